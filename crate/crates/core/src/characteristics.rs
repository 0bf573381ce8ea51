//! Upwind foot-point map `x -> x - w*(x) dt` and composite-function integrals.
//!
//! With a piecewise-linear `w*` the map is affine on every element, so the
//! image of an element `K` is again a triangle. The integral
//! `int_K (u o X) phi dx` then splits into polynomial pieces over the
//! pullbacks of `X(K) ∩ K'`, which the exact mode integrates with a rule of
//! matching degree. The quadrature mode instead samples `u o X` at the nodes
//! of a fixed high-order rule on `K`.

use rayon::prelude::*;

use crate::clip::Polygon;
use crate::error::{Error, Result};
use crate::fe::{basis, FeSpace, Field, MAX_LOCAL};
use crate::mesh::{triangle_bbox, Mesh, Point, LOCATE_EPS};
use crate::quadrature::{triangle_rule, TriangleRule};

/// Pieces whose pulled-back area is below this fraction of |K| are dropped.
const SLIVER_FRACTION: f64 = 1e-14;

/// Step-condition threshold on `dt |w*|_{1,inf}`.
pub const STEP_CONDITION: f64 = 0.25;

/// How the composite term `(u o X, v)` is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompositeMode {
    /// Polygon clipping with exactness-matched rules on every piece.
    Exact,
    /// A fixed rule of the given degree on each element, with point location
    /// of every mapped node.
    Quadrature { degree: usize },
}

impl CompositeMode {
    pub const DEFAULT_QUADRATURE_DEGREE: usize = 12;

    pub fn quadrature() -> Self {
        CompositeMode::Quadrature {
            degree: Self::DEFAULT_QUADRATURE_DEGREE,
        }
    }
}

impl std::str::FromStr for CompositeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CompositeMode::Exact),
            "quadrature" => Ok(CompositeMode::quadrature()),
            other => Err(Error::invalid(format!("unknown composite mode '{other}'"))),
        }
    }
}

/// Determinant range of the map's Jacobian over all elements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianBounds {
    pub min_det: f64,
    pub max_det: f64,
    /// `dt * |w*|_{1,inf}`.
    pub step_measure: f64,
    /// Whether `step_measure <= 1/4`.
    pub condition_ok: bool,
}

#[derive(Clone, Copy, Debug)]
struct ElementMap {
    image: [Point; 3],
    jacobian: [[f64; 2]; 2],
    det: f64,
}

/// The map `X(x) = x - dt w*(x)` for a piecewise-linear `w*` vanishing on the
/// boundary.
#[derive(Clone, Debug)]
pub struct CharMap {
    w_star: Field,
    dt: f64,
    maps: Vec<ElementMap>,
    w1inf: f64,
}

impl CharMap {
    /// Builds the per-element affine maps. `w_star` must be a degree-1
    /// vector field; boundary coefficients within 1e-12 of zero are snapped
    /// to zero, larger ones are rejected.
    pub fn new(mut w_star: Field, dt: f64) -> Result<Self> {
        if w_star.space().degree() != 1 || w_star.components() != 2 {
            return Err(Error::invalid("w* must be a degree-1 vector field"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!(
                "time increment must be positive, got {dt}"
            )));
        }
        let space = w_star.space().clone();
        let n = space.n_dofs();
        for c in 0..2 {
            for (i, &b) in space.dirichlet_mask().iter().enumerate() {
                let v = w_star.coefficients()[c * n + i];
                if b && v.abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "w* does not vanish on the boundary (node {i}, value {v:e})"
                    )));
                }
            }
        }
        w_star.zero_boundary();
        let mesh = space.mesh();
        let mut maps = Vec::with_capacity(mesh.n_elements());
        let mut w1inf: f64 = 0.0;
        for e in 0..mesh.n_elements() {
            let g = w_star.vector_gradient(e, [1.0 / 3.0; 3]);
            w1inf = w1inf.max(
                (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2)).sqrt(),
            );
            let jacobian = [
                [1.0 - dt * g[0][0], -dt * g[0][1]],
                [-dt * g[1][0], 1.0 - dt * g[1][1]],
            ];
            let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
            let pts = mesh.element_points(e);
            let dofs = space.element_dofs(e);
            let image = std::array::from_fn(|i| {
                let d = dofs[i];
                [
                    pts[i][0] - dt * w_star.coefficients()[d],
                    pts[i][1] - dt * w_star.coefficients()[n + d],
                ]
            });
            maps.push(ElementMap {
                image,
                jacobian,
                det,
            });
        }
        Ok(CharMap {
            w_star,
            dt,
            maps,
            w1inf,
        })
    }

    pub fn w_star(&self) -> &Field {
        &self.w_star
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mesh(&self) -> &Mesh {
        self.w_star.space().mesh()
    }

    /// Image triangle `X(K)`.
    pub fn image(&self, e: usize) -> [Point; 3] {
        self.maps[e].image
    }

    /// Jacobian matrix `I - dt grad w*` on element `e`.
    pub fn jacobian(&self, e: usize) -> [[f64; 2]; 2] {
        self.maps[e].jacobian
    }

    /// `X(x)` for a point given by element and barycentric coordinates.
    #[inline]
    pub fn map_local(&self, e: usize, bary: [f64; 3]) -> Point {
        let im = &self.maps[e].image;
        [
            bary[0] * im[0][0] + bary[1] * im[1][0] + bary[2] * im[2][0],
            bary[0] * im[0][1] + bary[1] * im[1][1] + bary[2] * im[2][1],
        ]
    }

    /// `X(x) = x - w*(x) dt`. Images outside the domain by at most 1e-10 are
    /// clamped onto it.
    pub fn map_point(&self, x: Point) -> Result<Point> {
        let mesh = self.mesh();
        let loc = mesh.locate_point(x, None)?;
        let w = self.w_star.vector_value(loc.element, loc.bary);
        let y = [x[0] - self.dt * w[0], x[1] - self.dt * w[1]];
        let [lo, hi] = mesh.bounding_box();
        let mut out = y;
        for k in 0..2 {
            if y[k] < lo[k] - LOCATE_EPS || y[k] > hi[k] + LOCATE_EPS {
                return Err(Error::StepCondition(format!(
                    "image ({}, {}) of ({}, {}) leaves the domain",
                    y[0], y[1], x[0], x[1]
                )));
            }
            out[k] = y[k].clamp(lo[k], hi[k]);
        }
        Ok(out)
    }

    pub fn jacobian_bounds(&self) -> JacobianBounds {
        let (min_det, max_det) = self
            .maps
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m.det), hi.max(m.det))
            });
        let step_measure = self.dt * self.w1inf;
        JacobianBounds {
            min_det,
            max_det,
            step_measure,
            condition_ok: step_measure <= STEP_CONDITION,
        }
    }

    fn check_inputs(&self, u_prev: &Field, test_space: &FeSpace) -> Result<()> {
        if u_prev.components() != 2 {
            return Err(Error::invalid("u_prev must be a vector field"));
        }
        if !u_prev.space().same_mesh(test_space) || !test_space.same_mesh(self.w_star.space()) {
            return Err(Error::invalid(
                "u_prev, test space and w* must share one mesh",
            ));
        }
        if let Some(e) = self.maps.iter().position(|m| m.det <= 1e-12) {
            return Err(Error::StepCondition(format!(
                "characteristic map degenerates on element {e} (det {:e})",
                self.maps[e].det
            )));
        }
        Ok(())
    }

    /// Entries `int (u_prev o X) . phi_i dx` for every vector test function,
    /// component-blocked like a vector field of `test_space`.
    pub fn composite_load_vector(
        &self,
        u_prev: &Field,
        test_space: &FeSpace,
        mode: CompositeMode,
    ) -> Result<Vec<f64>> {
        let bounds = self.jacobian_bounds();
        if !bounds.condition_ok {
            log::warn!(
                "step condition violated: dt |w*|_1,inf = {:.4} > 1/4",
                bounds.step_measure
            );
        }
        self.composite_load_vector_quiet(u_prev, test_space, mode)
    }

    pub(crate) fn composite_load_vector_quiet(
        &self,
        u_prev: &Field,
        test_space: &FeSpace,
        mode: CompositeMode,
    ) -> Result<Vec<f64>> {
        match mode {
            CompositeMode::Exact => {
                let degree = u_prev.space().degree() + test_space.degree();
                self.exact_with_rule(u_prev, test_space, triangle_rule(degree))
            }
            CompositeMode::Quadrature { degree } => {
                self.quadrature(u_prev, test_space, triangle_rule(degree))
            }
        }
    }

    /// Exact mode with an explicitly chosen rule on every sub-triangle.
    pub fn composite_load_exact_with_rule(
        &self,
        u_prev: &Field,
        test_space: &FeSpace,
        rule: &TriangleRule,
    ) -> Result<Vec<f64>> {
        self.exact_with_rule(u_prev, test_space, rule)
    }

    fn exact_with_rule(
        &self,
        u_prev: &Field,
        test_space: &FeSpace,
        rule: &TriangleRule,
    ) -> Result<Vec<f64>> {
        self.check_inputs(u_prev, test_space)?;
        let mesh = self.mesh();
        let locals: Vec<[[f64; MAX_LOCAL]; 2]> = (0..mesh.n_elements())
            .into_par_iter()
            .map_init(Vec::new, |buf, e| {
                let mut acc = [[0.0; MAX_LOCAL]; 2];
                self.for_each_piece(e, buf, |piece| {
                    integrate_piece(piece, u_prev, test_space.degree(), rule, &mut acc);
                });
                acc
            })
            .collect();
        Ok(scatter(test_space, &locals))
    }

    fn quadrature(
        &self,
        u_prev: &Field,
        test_space: &FeSpace,
        rule: &TriangleRule,
    ) -> Result<Vec<f64>> {
        self.check_inputs(u_prev, test_space)?;
        let mesh = self.mesh();
        let tdeg = test_space.degree();
        let nl = basis::n_local(tdeg);
        let locals: Vec<[[f64; MAX_LOCAL]; 2]> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| -> Result<[[f64; MAX_LOCAL]; 2]> {
                let mut acc = [[0.0; MAX_LOCAL]; 2];
                let area = mesh.area(e);
                for (mu, w) in rule.iter() {
                    let x = self.map_local(e, *mu);
                    let loc = mesh.locate_point(x, Some(e))?;
                    let u = u_prev.vector_value(loc.element, loc.bary);
                    let phi = basis::values(tdeg, *mu);
                    for c in 0..2 {
                        for i in 0..nl {
                            acc[c][i] += area * w * u[c] * phi[i];
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        Ok(scatter(test_space, &locals))
    }

    /// Pieces of the pullback partition of element `e`: the source element
    /// `K'` and the area of `X|_K^{-1}(X(K) ∩ K')`.
    pub fn pullback_partition(&self, e: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut buf = Vec::new();
        self.for_each_piece(e, &mut buf, |piece| {
            let area: f64 = piece.fan().map(|t| t.area).sum();
            out.push((piece.source, area));
        });
        out
    }

    /// Clips `X(K)` against the domain and every candidate source element.
    fn for_each_piece(&self, e: usize, buf: &mut Vec<usize>, mut visit: impl FnMut(&Piece)) {
        let mesh = self.mesh();
        let map = &self.maps[e];
        let eps = 1e-12 * mesh.diameter(e);
        let [lo, hi] = mesh.bounding_box();
        let image = Polygon::from_slice(&map.image);
        let domain = Polygon::rectangle(lo, hi);
        let clipped = image.clip_convex(domain.points(), eps);
        if clipped.is_empty() {
            return;
        }
        // barycentric coordinates with respect to the image triangle equal
        // those of the pre-image point in K
        let img_bary = ImageBary::new(&map.image);
        let area_k = mesh.area(e);
        let det = map.det;
        let bbox = clipped.bbox();
        mesh.candidates_into(bbox, buf);
        for &src in buf.iter() {
            let tri = mesh.element_points(src);
            let [lo_t, hi_t] = triangle_bbox(tri);
            if lo_t[0] > bbox[1][0] + eps
                || lo_t[1] > bbox[1][1] + eps
                || hi_t[0] < bbox[0][0] - eps
                || hi_t[1] < bbox[0][1] - eps
            {
                continue;
            }
            let piece = clipped.clip_convex(&tri, eps);
            if piece.len() < 3 {
                continue;
            }
            let pre_area = piece.area() / det;
            if pre_area < SLIVER_FRACTION * area_k {
                continue;
            }
            let mut verts = [PieceVertex::default(); 24];
            for (v, &x) in verts.iter_mut().zip(piece.points()) {
                *v = PieceVertex {
                    mu: img_bary.at(x),
                    lambda: mesh.barycentric(src, x),
                };
            }
            visit(&Piece {
                source: src,
                verts,
                len: piece.len(),
                area_k,
            });
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct PieceVertex {
    /// barycentric coordinates in the target element K
    mu: [f64; 3],
    /// barycentric coordinates in the source element K'
    lambda: [f64; 3],
}

struct Piece {
    source: usize,
    verts: [PieceVertex; 24],
    len: usize,
    area_k: f64,
}

struct FanTriangle {
    v: [PieceVertex; 3],
    area: f64,
}

impl Piece {
    fn fan(&self) -> impl Iterator<Item = FanTriangle> + '_ {
        (1..self.len - 1).map(move |j| {
            let v = [self.verts[0], self.verts[j], self.verts[j + 1]];
            // area in K from the barycentric triangle
            let a = &v[0].mu;
            let b = &v[1].mu;
            let c = &v[2].mu;
            let cross = (b[1] - a[1]) * (c[2] - a[2]) - (b[2] - a[2]) * (c[1] - a[1]);
            FanTriangle {
                v,
                area: cross.abs() * self.area_k,
            }
        })
    }
}

fn integrate_piece(
    piece: &Piece,
    u_prev: &Field,
    test_degree: usize,
    rule: &TriangleRule,
    acc: &mut [[f64; MAX_LOCAL]; 2],
) {
    let udeg = u_prev.space().degree();
    let nu = basis::n_local(udeg);
    let nt = basis::n_local(test_degree);
    let uloc = [u_prev.local(0, piece.source), u_prev.local(1, piece.source)];
    for tri in piece.fan() {
        if tri.area == 0.0 {
            continue;
        }
        for (b, w) in rule.iter() {
            let mut mu = [0.0; 3];
            let mut la = [0.0; 3];
            for k in 0..3 {
                for (v, &bv) in tri.v.iter().zip(b) {
                    mu[k] += bv * v.mu[k];
                    la[k] += bv * v.lambda[k];
                }
            }
            let psi = basis::values(udeg, la);
            let phi = basis::values(test_degree, mu);
            let mut u = [0.0; 2];
            for j in 0..nu {
                u[0] += uloc[0][j] * psi[j];
                u[1] += uloc[1][j] * psi[j];
            }
            let s = tri.area * w;
            for i in 0..nt {
                acc[0][i] += s * u[0] * phi[i];
                acc[1][i] += s * u[1] * phi[i];
            }
        }
    }
}

fn scatter(space: &FeSpace, locals: &[[[f64; MAX_LOCAL]; 2]]) -> Vec<f64> {
    let n = space.n_dofs();
    let mut out = vec![0.0; 2 * n];
    for (e, acc) in locals.iter().enumerate() {
        for (i, &d) in space.element_dofs(e).iter().enumerate() {
            out[d] += acc[0][i];
            out[n + d] += acc[1][i];
        }
    }
    out
}

/// Barycentric coordinates with respect to a fixed triangle.
struct ImageBary {
    origin: Point,
    g1: [f64; 2],
    g2: [f64; 2],
}

impl ImageBary {
    fn new(p: &[Point; 3]) -> Self {
        let twice =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        ImageBary {
            origin: p[0],
            g1: [(p[2][1] - p[0][1]) / twice, (p[0][0] - p[2][0]) / twice],
            g2: [(p[0][1] - p[1][1]) / twice, (p[1][0] - p[0][0]) / twice],
        }
    }

    #[inline]
    fn at(&self, x: Point) -> [f64; 3] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let l1 = self.g1[0] * d[0] + self.g1[1] * d[1];
        let l2 = self.g2[0] * d[0] + self.g2[1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}
