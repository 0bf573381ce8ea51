//! Conforming triangulations of the unit square.
//!
//! A [`Mesh`] is immutable once built. Besides vertices and counterclockwise
//! element triples it caches everything the rest of the crate queries in hot
//! loops: element areas, barycentric gradients, edge numbering, neighbour
//! links, vertex stars and a uniform background grid used for bounding-box
//! candidate searches.
//!
//! Local conventions: local edge `i` of an element is the edge opposite local
//! vertex `i`, and `neighbors(e)[i]` is the element across that edge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// Tolerance on barycentric coordinates for containment tests.
pub const BARY_TOL: f64 = 1e-12;

/// Distance outside the domain that [`Mesh::locate_point`] still accepts
/// (and clamps back onto the boundary).
pub const LOCATE_EPS: f64 = 1e-10;

/// Diagonal layout of the structured unit-square meshes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MeshPattern {
    /// Each cell is split into four triangles around an added centre vertex.
    #[default]
    Crisscross,
    /// Each cell is split in two, with diagonals alternating in a checkerboard.
    AlternatingDiagonal,
}

impl std::str::FromStr for MeshPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crisscross" => Ok(MeshPattern::Crisscross),
            "alternating" | "alternating_diagonal" => Ok(MeshPattern::AlternatingDiagonal),
            other => Err(Error::invalid(format!("unknown mesh pattern '{other}'"))),
        }
    }
}

/// Result of a point-location query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub element: usize,
    pub bary: [f64; 3],
}

/// Uniform grid of buckets holding the elements whose bounding boxes touch
/// each cell.
#[derive(Clone, Debug)]
struct BackgroundGrid {
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl BackgroundGrid {
    fn build(vertices: &[Point], elements: &[[usize; 3]], bbox: [Point; 2]) -> Self {
        let ne = elements.len().max(1);
        let side = ((ne as f64) / 2.0).sqrt().ceil().max(1.0) as usize;
        let width = (bbox[1][0] - bbox[0][0]).max(f64::MIN_POSITIVE);
        let height = (bbox[1][1] - bbox[0][1]).max(f64::MIN_POSITIVE);
        let dims = [side, side];
        let cell = [width / side as f64, height / side as f64];
        let mut grid = BackgroundGrid {
            origin: bbox[0],
            cell,
            dims,
            offsets: Vec::new(),
            items: Vec::new(),
        };
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (e, tri) in elements.iter().enumerate() {
            let b = triangle_bbox(tri.map(|v| vertices[v]));
            let (ix, iy) = grid.cell_range(b);
            for j in iy.0..=iy.1 {
                for i in ix.0..=ix.1 {
                    buckets[j * dims[0] + i].push(e);
                }
            }
        }
        grid.offsets.push(0);
        for bucket in buckets {
            grid.items.extend(bucket);
            grid.offsets.push(grid.items.len());
        }
        grid
    }

    fn cell_range(&self, bbox: [Point; 2]) -> ((usize, usize), (usize, usize)) {
        let idx = |v: f64, o: f64, h: f64, n: usize| -> usize {
            let i = ((v - o) / h).floor();
            if i < 0.0 {
                0
            } else {
                (i as usize).min(n - 1)
            }
        };
        let x0 = idx(bbox[0][0], self.origin[0], self.cell[0], self.dims[0]);
        let x1 = idx(bbox[1][0], self.origin[0], self.cell[0], self.dims[0]);
        let y0 = idx(bbox[0][1], self.origin[1], self.cell[1], self.dims[1]);
        let y1 = idx(bbox[1][1], self.origin[1], self.cell[1], self.dims[1]);
        ((x0, x1), (y0, y1))
    }

    fn candidates_into(&self, bbox: [Point; 2], out: &mut Vec<usize>) {
        out.clear();
        let (ix, iy) = self.cell_range(bbox);
        for j in iy.0..=iy.1 {
            for i in ix.0..=ix.1 {
                let c = j * self.dims[0] + i;
                out.extend_from_slice(&self.items[self.offsets[c]..self.offsets[c + 1]]);
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

/// Axis-aligned bounding box `[min, max]` of a triangle.
pub fn triangle_bbox(p: [Point; 3]) -> [Point; 2] {
    let mut lo = p[0];
    let mut hi = p[0];
    for q in &p[1..] {
        lo[0] = lo[0].min(q[0]);
        lo[1] = lo[1].min(q[1]);
        hi[0] = hi[0].max(q[0]);
        hi[1] = hi[1].max(q[1]);
    }
    [lo, hi]
}

/// A conforming triangulation.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    neighbors: Vec<[Option<usize>; 3]>,
    diameters: Vec<f64>,
    h: f64,
    areas: Vec<f64>,
    grad_lambda: Vec<[[f64; 2]; 3]>,
    edges: Vec<[usize; 2]>,
    element_edges: Vec<[usize; 3]>,
    boundary_edge: Vec<bool>,
    star_offsets: Vec<usize>,
    star_items: Vec<usize>,
    bbox: [Point; 2],
    grid: BackgroundGrid,
}

impl Mesh {
    /// Builds a mesh from raw vertex coordinates and counterclockwise
    /// triangles, deriving boundary flags from the edge topology.
    pub fn from_raw(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || elements.is_empty() {
            return Err(Error::InvalidMesh(
                "mesh has no vertices or no elements".into(),
            ));
        }
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(elements.len());
        let mut grad_lambda = Vec::with_capacity(elements.len());
        let mut diameters = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} references a missing vertex"
                )));
            }
            let [p0, p1, p2] = tri.map(|v| vertices[v]);
            let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
            if !(twice > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has non-positive signed area {}",
                    0.5 * twice
                )));
            }
            areas.push(0.5 * twice);
            grad_lambda.push([
                [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
                [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
                [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
            ]);
            let d = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            diameters.push(d(p0, p1).max(d(p1, p2)).max(d(p2, p0)));
        }

        let mut edge_map: BTreeMap<[usize; 2], Vec<(usize, usize)>> = BTreeMap::new();
        for (e, tri) in elements.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                edge_map
                    .entry([a.min(b), a.max(b)])
                    .or_default()
                    .push((e, i));
            }
        }
        let mut edges = Vec::with_capacity(edge_map.len());
        let mut element_edges = vec![[usize::MAX; 3]; elements.len()];
        let mut neighbors = vec![[None; 3]; elements.len()];
        let mut boundary_edge = Vec::with_capacity(edge_map.len());
        let mut boundary_vertex = vec![false; nv];
        for (id, (key, owners)) in edge_map.into_iter().enumerate() {
            edges.push(key);
            match owners.as_slice() {
                [(e, i)] => {
                    element_edges[*e][*i] = id;
                    boundary_edge.push(true);
                    boundary_vertex[key[0]] = true;
                    boundary_vertex[key[1]] = true;
                }
                [(e0, i0), (e1, i1)] => {
                    element_edges[*e0][*i0] = id;
                    element_edges[*e1][*i1] = id;
                    neighbors[*e0][*i0] = Some(*e1);
                    neighbors[*e1][*i1] = Some(*e0);
                    boundary_edge.push(false);
                }
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "edge {:?} is shared by {} elements",
                        key,
                        owners.len()
                    )))
                }
            }
        }

        let mut counts = vec![0usize; nv + 1];
        for tri in &elements {
            for &v in tri {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nv {
            counts[i + 1] += counts[i];
        }
        let star_offsets = counts.clone();
        let mut fill = counts;
        let mut star_items = vec![0; star_offsets[nv]];
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                star_items[fill[v]] = e;
                fill[v] += 1;
            }
        }

        let mut bbox = [vertices[0], vertices[0]];
        for p in &vertices {
            bbox[0][0] = bbox[0][0].min(p[0]);
            bbox[0][1] = bbox[0][1].min(p[1]);
            bbox[1][0] = bbox[1][0].max(p[0]);
            bbox[1][1] = bbox[1][1].max(p[1]);
        }
        let grid = BackgroundGrid::build(&vertices, &elements, bbox);
        let h = diameters.iter().copied().fold(0.0, f64::max);

        Ok(Mesh {
            vertices,
            elements,
            boundary_vertex,
            neighbors,
            diameters,
            h,
            areas,
            grad_lambda,
            edges,
            element_edges,
            boundary_edge,
            star_offsets,
            star_items,
            bbox,
            grid,
        })
    }

    /// Structured mesh of (0,1)^2 with `n` divisions per side.
    pub fn unit_square(n: usize, pattern: MeshPattern) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "mesh division must be at least 2, got {n}"
            )));
        }
        let side = n + 1;
        let hf = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(side * side + n * n);
        for j in 0..side {
            for i in 0..side {
                vertices.push([i as f64 * hf, j as f64 * hf]);
            }
        }
        let grid_id = |i: usize, j: usize| j * side + i;
        let mut elements = Vec::new();
        match pattern {
            MeshPattern::Crisscross => {
                for j in 0..n {
                    for i in 0..n {
                        let m = vertices.len();
                        vertices.push([(i as f64 + 0.5) * hf, (j as f64 + 0.5) * hf]);
                        let a = grid_id(i, j);
                        let b = grid_id(i + 1, j);
                        let c = grid_id(i + 1, j + 1);
                        let d = grid_id(i, j + 1);
                        elements.extend([[a, b, m], [b, c, m], [c, d, m], [d, a, m]]);
                    }
                }
            }
            MeshPattern::AlternatingDiagonal => {
                for j in 0..n {
                    for i in 0..n {
                        let a = grid_id(i, j);
                        let b = grid_id(i + 1, j);
                        let c = grid_id(i + 1, j + 1);
                        let d = grid_id(i, j + 1);
                        if (i + j) % 2 == 0 {
                            elements.extend([[a, b, c], [a, c, d]]);
                        } else {
                            elements.extend([[a, b, d], [b, c, d]]);
                        }
                    }
                }
            }
        }
        Mesh::from_raw(vertices, elements)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn element_points(&self, e: usize) -> [Point; 3] {
        self.elements[e].map(|v| self.vertices[v])
    }

    pub fn neighbors(&self, e: usize) -> [Option<usize>; 3] {
        self.neighbors[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    /// Diameter (longest edge) of element `e`.
    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Constant gradients of the three barycentric coordinates on `e`.
    pub fn grad_lambda(&self, e: usize) -> &[[f64; 2]; 3] {
        &self.grad_lambda[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of element `e`, indexed by opposite local vertex.
    pub fn element_edges(&self, e: usize) -> [usize; 3] {
        self.element_edges[e]
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.boundary_edge[edge]
    }

    /// Elements incident to vertex `v`, in increasing id order.
    pub fn vertex_star(&self, v: usize) -> &[usize] {
        &self.star_items[self.star_offsets[v]..self.star_offsets[v + 1]]
    }

    /// Bounding box of the vertex set, `[min, max]`.
    pub fn bounding_box(&self) -> [Point; 2] {
        self.bbox
    }

    pub fn barycentric(&self, e: usize, x: Point) -> [f64; 3] {
        let p0 = self.vertices[self.elements[e][0]];
        let g = &self.grad_lambda[e];
        let d = [x[0] - p0[0], x[1] - p0[1]];
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn point_at(&self, e: usize, bary: [f64; 3]) -> Point {
        let p = self.element_points(e);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    pub fn centroid(&self, e: usize) -> Point {
        self.point_at(e, [1.0 / 3.0; 3])
    }

    /// Elements whose bounding boxes may overlap `bbox`, sorted by id.
    pub fn candidates_into(&self, bbox: [Point; 2], out: &mut Vec<usize>) {
        self.grid.candidates_into(bbox, out);
    }

    /// Checks that every element has at least one vertex off the boundary.
    /// Returns the verdict and the ids of violating elements.
    pub fn check_internal_vertex_hypothesis(&self) -> (bool, Vec<usize>) {
        let bad: Vec<usize> = self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, tri)| tri.iter().all(|&v| self.boundary_vertex[v]))
            .map(|(e, _)| e)
            .collect();
        (bad.is_empty(), bad)
    }

    /// Finds the element containing `x`, walking from `hint` when given.
    ///
    /// Points within [`LOCATE_EPS`] outside the bounding box are clamped onto
    /// it. Points on shared edges or vertices resolve to the lowest element id.
    pub fn locate_point(&self, x: Point, hint: Option<usize>) -> Result<Location> {
        let x = self.clamp_to_domain(x)?;
        let found = hint
            .filter(|&e| e < self.elements.len())
            .and_then(|e| self.walk(x, e))
            .or_else(|| self.scan_grid(x))
            .or_else(|| self.scan_all(x));
        match found {
            Some(loc) => Ok(self.lowest_containing(x, loc)),
            None => Err(Error::OutOfDomain { x: x[0], y: x[1] }),
        }
    }

    fn clamp_to_domain(&self, x: Point) -> Result<Point> {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::OutOfDomain { x: x[0], y: x[1] });
        }
        let [lo, hi] = self.bbox;
        let mut y = x;
        for k in 0..2 {
            if y[k] < lo[k] - LOCATE_EPS || y[k] > hi[k] + LOCATE_EPS {
                return Err(Error::OutOfDomain { x: x[0], y: x[1] });
            }
            y[k] = y[k].clamp(lo[k], hi[k]);
        }
        Ok(y)
    }

    fn walk(&self, x: Point, start: usize) -> Option<Location> {
        let max_steps = 4 * self.elements.len().min(4096) + 16;
        let mut e = start;
        for _ in 0..max_steps {
            let bary = self.barycentric(e, x);
            let (imin, lmin) = argmin3(bary);
            if lmin >= -BARY_TOL {
                return Some(Location { element: e, bary });
            }
            e = self.neighbors[e][imin]?;
        }
        None
    }

    fn scan_grid(&self, x: Point) -> Option<Location> {
        let mut buf = Vec::new();
        self.grid.candidates_into([x, x], &mut buf);
        buf.into_iter().find_map(|e| self.contains(e, x))
    }

    fn scan_all(&self, x: Point) -> Option<Location> {
        (0..self.elements.len()).find_map(|e| self.contains(e, x))
    }

    fn contains(&self, e: usize, x: Point) -> Option<Location> {
        let bary = self.barycentric(e, x);
        (argmin3(bary).1 >= -BARY_TOL).then_some(Location { element: e, bary })
    }

    fn lowest_containing(&self, x: Point, loc: Location) -> Location {
        if argmin3(loc.bary).1 > 1e-9 {
            return loc;
        }
        let mut best = loc;
        for &v in &self.elements[loc.element] {
            for &e in self.vertex_star(v) {
                if e < best.element {
                    if let Some(l) = self.contains(e, x) {
                        best = l;
                    }
                }
            }
        }
        best
    }

    /// Verifies that every interior edge has exactly two owners and that
    /// all signed areas are positive.
    pub fn check_conformity(&self) -> Result<()> {
        let mut owners = vec![0u8; self.edges.len()];
        for ee in &self.element_edges {
            for &id in ee {
                owners[id] += 1;
            }
        }
        for (id, &count) in owners.iter().enumerate() {
            let expected = if self.boundary_edge[id] { 1 } else { 2 };
            if count != expected {
                return Err(Error::InvalidMesh(format!(
                    "edge {id} has {count} owners, expected {expected}"
                )));
            }
        }
        if let Some(e) = self.areas.iter().position(|&a| !(a > 0.0)) {
            return Err(Error::InvalidMesh(format!("element {e} is degenerate")));
        }
        Ok(())
    }

    /// Writes the plain-text mesh format: `NV NE`, then `x y b` per vertex,
    /// then `i j k` per element (0-based).
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "{} {}", self.vertices.len(), self.elements.len()).unwrap();
        for (p, &b) in self.vertices.iter().zip(&self.boundary_vertex) {
            writeln!(s, "{} {} {}", p[0], p[1], u8::from(b)).unwrap();
        }
        for t in &self.elements {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads the format written by [`Mesh::write_text`]. Boundary flags in
    /// the file must agree with the topology.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected end of input, expected {what}"),
                }),
            }
        };
        fn fields<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>> {
            let v: Vec<T> = s
                .split_whitespace()
                .map(|t| t.parse::<T>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse '{s}'"),
                })?;
            if v.len() != n {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {n} fields, found {}", v.len()),
                });
            }
            Ok(v)
        }
        let (ln, header) = next("header")?;
        let counts: Vec<usize> = fields(ln, &header, 2)?;
        let (nv, ne) = (counts[0], counts[1]);
        let mut vertices = Vec::with_capacity(nv);
        let mut flags = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next("vertex")?;
            let v: Vec<f64> = fields(ln, &l, 3)?;
            vertices.push([v[0], v[1]]);
            flags.push(v[2] != 0.0);
        }
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (ln, l) = next("element")?;
            let t: Vec<usize> = fields(ln, &l, 3)?;
            elements.push([t[0], t[1], t[2]]);
        }
        let mesh = Mesh::from_raw(vertices, elements)?;
        if let Some(v) = (0..nv).find(|&v| flags[v] != mesh.boundary_vertex[v]) {
            return Err(Error::InvalidMesh(format!(
                "boundary flag of vertex {v} disagrees with the topology"
            )));
        }
        Ok(mesh)
    }
}

fn argmin3(v: [f64; 3]) -> (usize, f64) {
    let mut i = 0;
    if v[1] < v[i] {
        i = 1;
    }
    if v[2] < v[i] {
        i = 2;
    }
    (i, v[i])
}
