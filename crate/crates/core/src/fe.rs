//! Lagrange finite element spaces of degree 1 and 2 and discrete fields.
//!
//! Global numbering: vertex DOFs come first (same ids as mesh vertices), then
//! for degree 2 one midpoint DOF per edge, in the mesh's sorted edge order.
//! Local numbering on an element: vertices 0..3, then the midpoint of the edge
//! opposite local vertex `i` at position `3 + i`.
//!
//! Vector fields store their components in consecutive blocks of length
//! `n_dofs`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::triangle_rule;

/// Maximum number of local DOFs (degree 2).
pub const MAX_LOCAL: usize = 6;

/// Shape-function values and barycentric derivatives on the reference element.
pub mod basis {
    use super::MAX_LOCAL;

    pub fn n_local(degree: usize) -> usize {
        match degree {
            1 => 3,
            2 => 6,
            _ => panic!("unsupported degree {degree}"),
        }
    }

    /// Values of the local shape functions at barycentric point `l`.
    #[inline]
    pub fn values(degree: usize, l: [f64; 3]) -> [f64; MAX_LOCAL] {
        match degree {
            1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
            _ => [
                l[0] * (2.0 * l[0] - 1.0),
                l[1] * (2.0 * l[1] - 1.0),
                l[2] * (2.0 * l[2] - 1.0),
                4.0 * l[1] * l[2],
                4.0 * l[2] * l[0],
                4.0 * l[0] * l[1],
            ],
        }
    }

    /// `d[j][a]` is the derivative of shape function `j` with respect to
    /// barycentric coordinate `a`.
    #[inline]
    pub fn lambda_derivatives(degree: usize, l: [f64; 3]) -> [[f64; 3]; MAX_LOCAL] {
        match degree {
            1 => [
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0; 3],
                [0.0; 3],
                [0.0; 3],
            ],
            _ => [
                [4.0 * l[0] - 1.0, 0.0, 0.0],
                [0.0, 4.0 * l[1] - 1.0, 0.0],
                [0.0, 0.0, 4.0 * l[2] - 1.0],
                [0.0, 4.0 * l[2], 4.0 * l[1]],
                [4.0 * l[2], 0.0, 4.0 * l[0]],
                [4.0 * l[1], 4.0 * l[0], 0.0],
            ],
        }
    }

    /// Physical gradients of the shape functions, given the element's
    /// barycentric gradients.
    #[inline]
    pub fn gradients(degree: usize, l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; MAX_LOCAL] {
        let d = lambda_derivatives(degree, l);
        let mut g = [[0.0; 2]; MAX_LOCAL];
        for j in 0..n_local(degree) {
            for a in 0..3 {
                g[j][0] += d[j][a] * gl[a][0];
                g[j][1] += d[j][a] * gl[a][1];
            }
        }
        g
    }

    /// Constant Hessians of the degree-2 shape functions as `[xx, xy, yy]`.
    pub fn hessians_p2(gl: &[[f64; 2]; 3]) -> [[f64; 3]; MAX_LOCAL] {
        let outer = |a: [f64; 2], b: [f64; 2]| {
            [
                a[0] * b[0] + b[0] * a[0],
                a[0] * b[1] + b[0] * a[1],
                a[1] * b[1] + b[1] * a[1],
            ]
        };
        let mut h = [[0.0; 3]; MAX_LOCAL];
        for i in 0..3 {
            // lambda_i (2 lambda_i - 1): second derivative 4 in lambda_i
            let s = outer(gl[i], gl[i]);
            h[i] = [2.0 * s[0], 2.0 * s[1], 2.0 * s[2]];
            // 4 lambda_a lambda_b
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let s = outer(gl[a], gl[b]);
            h[3 + i] = [4.0 * s[0], 4.0 * s[1], 4.0 * s[2]];
        }
        h
    }

    /// Barycentric coordinates of the local nodes.
    pub fn nodes(degree: usize) -> &'static [[f64; 3]] {
        const P1: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        const P2: [[f64; 3]; 6] = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ];
        match degree {
            1 => &P1,
            _ => &P2,
        }
    }
}

/// Continuous piecewise-polynomial Lagrange space on a mesh.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    nodes: Vec<Point>,
    dofs: Vec<usize>,
    dirichlet: Vec<bool>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<Self>> {
        if !(1..=2).contains(&degree) {
            return Err(Error::invalid(format!(
                "degree must be 1 or 2, got {degree}"
            )));
        }
        let nv = mesh.n_vertices();
        let mut nodes: Vec<Point> = mesh.vertices().to_vec();
        let mut dirichlet: Vec<bool> = mesh.boundary_vertex_flags().to_vec();
        let nl = basis::n_local(degree);
        let mut dofs = Vec::with_capacity(nl * mesh.n_elements());
        if degree == 2 {
            for (id, &[a, b]) in mesh.edges().iter().enumerate() {
                let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
                nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                dirichlet.push(mesh.is_boundary_edge(id));
            }
        }
        for e in 0..mesh.n_elements() {
            dofs.extend(mesh.element(e));
            if degree == 2 {
                dofs.extend(mesh.element_edges(e).map(|id| nv + id));
            }
        }
        Ok(Arc::new(FeSpace {
            mesh,
            degree,
            nodes,
            dofs,
            dirichlet,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_local(&self) -> usize {
        basis::n_local(self.degree)
    }

    /// Global DOF ids of element `e` in local order.
    #[inline]
    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let nl = self.n_local();
        &self.dofs[e * nl..(e + 1) * nl]
    }

    pub fn node(&self, dof: usize) -> Point {
        self.nodes[dof]
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// True for DOFs whose node lies on the boundary.
    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate_scalar(self: &Arc<Self>, f: impl Fn(Point) -> f64) -> Result<Field> {
        let coeffs = self.nodes.iter().map(|&x| f(x)).collect::<Vec<_>>();
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!(
                "interpolant at node {:?}",
                self.nodes[i]
            )));
        }
        Field::from_coefficients(self.clone(), 1, coeffs)
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate_vector(self: &Arc<Self>, f: impl Fn(Point) -> [f64; 2]) -> Result<Field> {
        let n = self.n_dofs();
        let mut coeffs = vec![0.0; 2 * n];
        for (i, &x) in self.nodes.iter().enumerate() {
            let v = f(x);
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::NonFinite(format!("interpolant at node {x:?}")));
            }
            coeffs[i] = v[0];
            coeffs[n + i] = v[1];
        }
        Field::from_coefficients(self.clone(), 2, coeffs)
    }
}

/// A discrete scalar or vector function in a [`FeSpace`].
#[derive(Clone, Debug)]
pub struct Field {
    space: Arc<FeSpace>,
    components: usize,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: Arc<FeSpace>, components: usize) -> Self {
        let n = space.n_dofs() * components;
        Field {
            space,
            components,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coefficients(
        space: Arc<FeSpace>,
        components: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&components) {
            return Err(Error::invalid("fields have one or two components"));
        }
        if coeffs.len() != components * space.n_dofs() {
            return Err(Error::invalid(format!(
                "coefficient length {} does not match {} x {} DOFs",
                coeffs.len(),
                components,
                space.n_dofs()
            )));
        }
        Ok(Field {
            space,
            components,
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient block of component `c`.
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.space.n_dofs();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Sets every coefficient at a boundary node to zero.
    pub fn zero_boundary(&mut self) {
        let n = self.space.n_dofs();
        for c in 0..self.components {
            for (i, &b) in self.space.dirichlet.iter().enumerate() {
                if b {
                    self.coeffs[c * n + i] = 0.0;
                }
            }
        }
    }

    /// Local coefficients of component `c` on element `e`.
    #[inline]
    pub fn local(&self, c: usize, e: usize) -> [f64; MAX_LOCAL] {
        let n = self.space.n_dofs();
        let mut out = [0.0; MAX_LOCAL];
        for (o, &d) in out.iter_mut().zip(self.space.element_dofs(e)) {
            *o = self.coeffs[c * n + d];
        }
        out
    }

    /// Value of component `c` at barycentric point `bary` of element `e`.
    #[inline]
    pub fn value(&self, c: usize, e: usize, bary: [f64; 3]) -> f64 {
        let phi = basis::values(self.space.degree, bary);
        let loc = self.local(c, e);
        (0..self.space.n_local()).map(|j| loc[j] * phi[j]).sum()
    }

    /// Both components of a vector field (second entry 0 for scalars).
    #[inline]
    pub fn vector_value(&self, e: usize, bary: [f64; 3]) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (c, vc) in v.iter_mut().enumerate().take(self.components) {
            *vc = self.value(c, e, bary);
        }
        v
    }

    /// Gradient of component `c`.
    pub fn gradient(&self, c: usize, e: usize, bary: [f64; 3]) -> [f64; 2] {
        let g = basis::gradients(self.space.degree, bary, self.space.mesh.grad_lambda(e));
        let loc = self.local(c, e);
        let mut out = [0.0; 2];
        for j in 0..self.space.n_local() {
            out[0] += loc[j] * g[j][0];
            out[1] += loc[j] * g[j][1];
        }
        out
    }

    /// Jacobian of a vector field, row `c` holding the gradient of component `c`.
    pub fn vector_gradient(&self, e: usize, bary: [f64; 3]) -> [[f64; 2]; 2] {
        [self.gradient(0, e, bary), self.gradient(1, e, bary)]
    }

    /// Evaluates all components at a physical point.
    pub fn value_at(&self, x: Point) -> Result<[f64; 2]> {
        let loc = self.space.mesh.locate_point(x, None)?;
        Ok(self.vector_value(loc.element, loc.bary))
    }

    /// `max_K max_x |grad w|_F` over sample points: exact for degree 1
    /// (piecewise-constant gradient), sampled at degree-4 quadrature points
    /// and vertices for degree 2.
    pub fn w1inf_seminorm(&self) -> f64 {
        let mesh = &self.space.mesh;
        let samples: Vec<[f64; 3]> = if self.space.degree == 1 {
            vec![[1.0 / 3.0; 3]]
        } else {
            let mut s = triangle_rule(4).points().to_vec();
            s.extend(basis::nodes(1));
            s
        };
        let mut best: f64 = 0.0;
        for e in 0..mesh.n_elements() {
            for &b in &samples {
                let mut sq = 0.0;
                for c in 0..self.components {
                    let g = self.gradient(c, e, b);
                    sq += g[0] * g[0] + g[1] * g[1];
                }
                best = best.max(sq.sqrt());
            }
        }
        best
    }

    /// Scales all coefficients in place.
    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }
}

/// Restricts a degree-2 vector field to its vertex values, giving the
/// degree-1 field with identical nodal values at the vertices.
pub fn project_p2_to_p1_at_vertices(v: &Field, p1: &Arc<FeSpace>) -> Result<Field> {
    if v.space.degree != 2 || p1.degree != 1 {
        return Err(Error::invalid(
            "expected a degree-2 field and a degree-1 target space",
        ));
    }
    if !v.space.same_mesh(p1) {
        return Err(Error::invalid(
            "source field and target space live on different meshes",
        ));
    }
    let n2 = v.space.n_dofs();
    let n1 = p1.n_dofs();
    let mut coeffs = Vec::with_capacity(v.components * n1);
    for c in 0..v.components {
        coeffs.extend_from_slice(&v.coeffs[c * n2..c * n2 + n1]);
    }
    Field::from_coefficients(p1.clone(), v.components, coeffs)
}
