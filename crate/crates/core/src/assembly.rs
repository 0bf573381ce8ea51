//! Bilinear forms, load vectors and the per-step saddle-point system.
//!
//! Unknown layout of [`SaddleSystem`]: free (non-Dirichlet) DOFs of the first
//! velocity component, then those of the second, then all pressure DOFs, then
//! one Lagrange multiplier enforcing a zero pressure mean.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe::{basis, FeSpace, Field, MAX_LOCAL};
use crate::mesh::Point;
use crate::quadrature::triangle_rule;
use crate::sparse::{CsrMatrix, SparseSymMatrix};

/// Default exactness degree for data terms (forcing, error norms).
pub const DATA_QUADRATURE_DEGREE: usize = 8;

type Local = [[f64; MAX_LOCAL]; MAX_LOCAL];

/// Local mass matrix of element `e`.
pub fn local_mass(space: &FeSpace, e: usize) -> Local {
    let k = space.degree();
    let n = space.n_local();
    let area = space.mesh().area(e);
    let mut m = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    for (l, w) in triangle_rule(2 * k).iter() {
        let phi = basis::values(k, *l);
        for i in 0..n {
            for j in 0..n {
                m[i][j] += w * area * phi[i] * phi[j];
            }
        }
    }
    m
}

/// Local matrix of `(grad u, grad v)` on element `e`.
pub fn local_stiffness(space: &FeSpace, e: usize) -> Local {
    let k = space.degree();
    let n = space.n_local();
    let area = space.mesh().area(e);
    let gl = space.mesh().grad_lambda(e);
    let mut a = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    for (l, w) in triangle_rule(2 * k - 2).iter() {
        let g = basis::gradients(k, *l, gl);
        for i in 0..n {
            for j in 0..n {
                a[i][j] += w * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    a
}

/// Local stabilization matrix: `h_K^{2k}` times the sum over `|alpha| = k`
/// of `(D^alpha p, D^alpha q)_K`.
pub fn local_stabilization(space: &FeSpace, e: usize) -> Local {
    let mesh = space.mesh();
    let h = mesh.diameter(e);
    let area = mesh.area(e);
    let gl = mesh.grad_lambda(e);
    let n = space.n_local();
    let mut c = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    match space.degree() {
        1 => {
            let s = h * h * area;
            for i in 0..n {
                for j in 0..n {
                    c[i][j] = s * (gl[i][0] * gl[j][0] + gl[i][1] * gl[j][1]);
                }
            }
        }
        _ => {
            let s = h.powi(4) * area;
            let hs = basis::hessians_p2(gl);
            for i in 0..n {
                for j in 0..n {
                    c[i][j] = s * (hs[i][0] * hs[j][0] + hs[i][1] * hs[j][1] + hs[i][2] * hs[j][2]);
                }
            }
        }
    }
    c
}

fn assemble_sym(
    space: &FeSpace,
    local: impl Fn(&FeSpace, usize) -> Local + Sync,
) -> SparseSymMatrix {
    let n = space.n_local();
    let locals: Vec<Local> = (0..space.mesh().n_elements())
        .into_par_iter()
        .map(|e| local(space, e))
        .collect();
    let mut t = Vec::with_capacity(locals.len() * n * (n + 1) / 2);
    for (e, m) in locals.iter().enumerate() {
        let dofs = space.element_dofs(e);
        for i in 0..n {
            for j in 0..n {
                if dofs[i] <= dofs[j] {
                    t.push((dofs[i], dofs[j], m[i][j]));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(space.n_dofs(), t)
}

pub fn assemble_mass(space: &FeSpace) -> SparseSymMatrix {
    assemble_sym(space, local_mass)
}

/// Stiffness matrix without the viscosity factor.
pub fn assemble_stiffness(space: &FeSpace) -> SparseSymMatrix {
    assemble_sym(space, local_stiffness)
}

pub fn assemble_stabilization(space: &FeSpace) -> SparseSymMatrix {
    assemble_sym(space, local_stabilization)
}

/// Matrix of `b(v, q) = -(div v, q)`: one row per pressure DOF, columns
/// ordered as the component-blocked velocity coefficients.
pub fn assemble_divergence(velocity: &FeSpace, pressure: &FeSpace) -> Result<CsrMatrix> {
    if !velocity.same_mesh(pressure) {
        return Err(Error::invalid(
            "velocity and pressure spaces use different meshes",
        ));
    }
    let (kv, kp) = (velocity.degree(), pressure.degree());
    let (nv, np) = (velocity.n_local(), pressure.n_local());
    let nu = velocity.n_dofs();
    let rule = triangle_rule(kv - 1 + kp);
    let locals: Vec<[[[f64; MAX_LOCAL]; MAX_LOCAL]; 2]> = (0..velocity.mesh().n_elements())
        .into_par_iter()
        .map(|e| {
            let mesh = velocity.mesh();
            let area = mesh.area(e);
            let gl = mesh.grad_lambda(e);
            let mut b = [[[0.0; MAX_LOCAL]; MAX_LOCAL]; 2];
            for (l, w) in rule.iter() {
                let g = basis::gradients(kv, *l, gl);
                let psi = basis::values(kp, *l);
                for i in 0..np {
                    for j in 0..nv {
                        for c in 0..2 {
                            b[c][i][j] -= w * area * g[j][c] * psi[i];
                        }
                    }
                }
            }
            b
        })
        .collect();
    let mut t = Vec::with_capacity(locals.len() * 2 * nv * np);
    for (e, b) in locals.iter().enumerate() {
        let vd = velocity.element_dofs(e);
        let pd = pressure.element_dofs(e);
        for i in 0..np {
            for j in 0..nv {
                for c in 0..2 {
                    t.push((pd[i], c * nu + vd[j], b[c][i][j]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(pressure.n_dofs(), 2 * nu, t))
}

/// `m_j = integral of psi_j` over the domain.
pub fn mean_value_vector(space: &FeSpace) -> Vec<f64> {
    let k = space.degree();
    let mut m = vec![0.0; space.n_dofs()];
    for e in 0..space.mesh().n_elements() {
        let area = space.mesh().area(e);
        let dofs = space.element_dofs(e);
        for (l, w) in triangle_rule(k).iter() {
            let phi = basis::values(k, *l);
            for (i, &d) in dofs.iter().enumerate() {
                m[d] += w * area * phi[i];
            }
        }
    }
    m
}

/// `(f, phi_i)` for a vector-valued `f`, component-blocked, using a rule
/// exact to `degree`.
pub fn load_vector(
    space: &FeSpace,
    f: &(dyn Fn(Point) -> [f64; 2] + Sync),
    degree: usize,
) -> Vec<f64> {
    let k = space.degree();
    let n = space.n_local();
    let nd = space.n_dofs();
    let rule = triangle_rule(degree);
    let mesh = space.mesh();
    let locals: Vec<[[f64; MAX_LOCAL]; 2]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let area = mesh.area(e);
            let mut b = [[0.0; MAX_LOCAL]; 2];
            for (l, w) in rule.iter() {
                let fx = f(mesh.point_at(e, *l));
                let phi = basis::values(k, *l);
                for i in 0..n {
                    b[0][i] += w * area * fx[0] * phi[i];
                    b[1][i] += w * area * fx[1] * phi[i];
                }
            }
            b
        })
        .collect();
    let mut out = vec![0.0; 2 * nd];
    for (e, b) in locals.iter().enumerate() {
        for (i, &d) in space.element_dofs(e).iter().enumerate() {
            out[d] += b[0][i];
            out[nd + d] += b[1][i];
        }
    }
    out
}

/// Velocity/pressure pairing and its stabilization weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementPair {
    /// `P_k / P_{k-1}`, `k >= 2`.
    TaylorHood,
    /// `P_k / P_k` with stabilization weight `delta0 > 0`.
    EqualOrder { delta0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub dt: f64,
    pub nu: f64,
    pub pair: ElementPair,
}

/// All time-independent operators of a velocity/pressure space pair.
/// Assembled once and shared by every viscosity and time step.
#[derive(Clone, Debug)]
pub struct Operators {
    velocity: Arc<FeSpace>,
    pressure: Arc<FeSpace>,
    mass: SparseSymMatrix,
    stiffness: SparseSymMatrix,
    divergence: CsrMatrix,
    pressure_mass: SparseSymMatrix,
    pressure_stiffness: SparseSymMatrix,
    stabilization: Option<SparseSymMatrix>,
    mean: Vec<f64>,
}

impl Operators {
    /// The stabilization matrix is assembled only for equal-order pairs.
    pub fn assemble(velocity: Arc<FeSpace>, pressure: Arc<FeSpace>) -> Result<Self> {
        let divergence = assemble_divergence(&velocity, &pressure)?;
        let stabilization =
            (velocity.degree() == pressure.degree()).then(|| assemble_stabilization(&pressure));
        Ok(Operators {
            mass: assemble_mass(&velocity),
            stiffness: assemble_stiffness(&velocity),
            pressure_mass: assemble_mass(&pressure),
            pressure_stiffness: assemble_stiffness(&pressure),
            mean: mean_value_vector(&pressure),
            divergence,
            stabilization,
            velocity,
            pressure,
        })
    }

    pub fn velocity(&self) -> &Arc<FeSpace> {
        &self.velocity
    }

    pub fn pressure(&self) -> &Arc<FeSpace> {
        &self.pressure
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.stiffness
    }

    pub fn divergence(&self) -> &CsrMatrix {
        &self.divergence
    }

    pub fn pressure_mass(&self) -> &SparseSymMatrix {
        &self.pressure_mass
    }

    pub fn pressure_stiffness(&self) -> &SparseSymMatrix {
        &self.pressure_stiffness
    }

    pub fn stabilization(&self) -> Option<&SparseSymMatrix> {
        self.stabilization.as_ref()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// The symmetric block system of one time step.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    params: SystemParams,
    velocity: Arc<FeSpace>,
    pressure: Arc<FeSpace>,
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
    matrix: SparseSymMatrix,
    velocity_block: SparseSymMatrix,
    pressure_block: SparseSymMatrix,
    fingerprint: u64,
}

/// Builds `[[M/dt + nu A, B^T], [B, -delta0 C]]` plus the mean-value row,
/// with Dirichlet velocity DOFs eliminated.
pub fn build_system(params: SystemParams, ops: &Operators) -> Result<SaddleSystem> {
    let (vel, pres) = (&ops.velocity, &ops.pressure);
    if !(params.dt > 0.0 && params.dt.is_finite()) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {}",
            params.dt
        )));
    }
    if !(params.nu > 0.0 && params.nu.is_finite()) {
        return Err(Error::invalid(format!(
            "viscosity must be positive, got {}",
            params.nu
        )));
    }
    let delta0 = match params.pair {
        ElementPair::TaylorHood => {
            if vel.degree() < 2 {
                return Err(Error::invalid(
                    "Taylor-Hood pairing requires velocity degree >= 2",
                ));
            }
            if pres.degree() + 1 != vel.degree() {
                return Err(Error::invalid(
                    "Taylor-Hood pairing requires pressure degree k - 1",
                ));
            }
            0.0
        }
        ElementPair::EqualOrder { delta0 } => {
            if !(delta0 > 0.0 && delta0.is_finite()) {
                return Err(Error::invalid(format!(
                    "equal-order pairing requires delta0 > 0, got {delta0}"
                )));
            }
            if pres.degree() != vel.degree() {
                return Err(Error::invalid("equal-order pairing requires equal degrees"));
            }
            delta0
        }
    };
    let c = match (params.pair, &ops.stabilization) {
        (ElementPair::EqualOrder { .. }, Some(c)) => Some(c),
        (ElementPair::EqualOrder { .. }, None) => {
            return Err(Error::invalid("stabilization matrix not assembled"))
        }
        _ => None,
    };

    let mask = vel.dirichlet_mask();
    let mut free = Vec::new();
    let mut free_index = vec![None; vel.n_dofs()];
    for (d, &bc) in mask.iter().enumerate() {
        if !bc {
            free_index[d] = Some(free.len());
            free.push(d);
        }
    }
    let nf = free.len();
    let np = pres.n_dofs();
    let nu_dofs = vel.n_dofs();
    let dim = 2 * nf + np + 1;

    let mut kt = Vec::with_capacity(ops.mass.nnz());
    for (r, col, v) in ops.mass.upper().iter() {
        if let (Some(i), Some(j)) = (free_index[r], free_index[col]) {
            kt.push((i, j, v / params.dt + params.nu * ops.stiffness.get(r, col)));
        }
    }
    let velocity_block = SparseSymMatrix::from_triplets(nf, kt);

    let mut t = Vec::with_capacity(2 * velocity_block.nnz() + 2 * ops.divergence.nnz() + 2 * np);
    for comp in 0..2 {
        let off = comp * nf;
        for (i, j, v) in velocity_block.upper().iter() {
            t.push((off + i, off + j, v));
        }
    }
    for (r, col, v) in ops.divergence.iter() {
        let (comp, d) = (col / nu_dofs, col % nu_dofs);
        if let Some(i) = free_index[d] {
            t.push((comp * nf + i, 2 * nf + r, v));
        }
    }
    let mut pt = Vec::new();
    for (i, j, v) in ops.pressure_mass.upper().iter() {
        pt.push((i, j, v));
    }
    if let Some(c) = c {
        for (i, j, v) in c.upper().iter() {
            t.push((2 * nf + i, 2 * nf + j, -delta0 * v));
            pt.push((i, j, delta0 * v));
        }
    }
    for (i, &m) in ops.mean.iter().enumerate() {
        t.push((2 * nf + i, dim - 1, m));
    }
    let matrix = SparseSymMatrix::from_triplets(dim, t);
    let pressure_block = SparseSymMatrix::from_triplets(np, pt);

    let mut hasher = DefaultHasher::new();
    matrix.dim().hash(&mut hasher);
    matrix.upper().indptr().hash(&mut hasher);
    matrix.upper().indices().hash(&mut hasher);
    for v in matrix.upper().values() {
        v.to_bits().hash(&mut hasher);
    }

    Ok(SaddleSystem {
        params,
        velocity: vel.clone(),
        pressure: pres.clone(),
        free,
        free_index,
        matrix,
        velocity_block,
        pressure_block,
        fingerprint: hasher.finish(),
    })
}

impl SaddleSystem {
    pub fn params(&self) -> SystemParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    /// Number of free DOFs per velocity component.
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    /// Velocity DOF of each free index.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// `M/dt + nu A` on free DOFs of one component.
    pub fn velocity_block(&self) -> &SparseSymMatrix {
        &self.velocity_block
    }

    /// Pressure mass plus `delta0 C` (pressure mass alone for Taylor-Hood).
    pub fn pressure_block(&self) -> &SparseSymMatrix {
        &self.pressure_block
    }

    /// Hash of the assembled matrix; equal fingerprints mean equal matrices.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn velocity_space(&self) -> &Arc<FeSpace> {
        &self.velocity
    }

    pub fn pressure_space(&self) -> &Arc<FeSpace> {
        &self.pressure
    }

    /// Right-hand side from a forcing load `(f, phi_i)` and a composite
    /// vector `((u o X1), phi_i)`, both component-blocked over all velocity
    /// DOFs. Pressure and multiplier entries are zero.
    pub fn assemble_rhs(&self, load: &[f64], composite: &[f64]) -> Result<Vec<f64>> {
        let nd = self.velocity.n_dofs();
        if load.len() != 2 * nd || composite.len() != 2 * nd {
            return Err(Error::invalid(format!(
                "right-hand side vectors must have length {}, got {} and {}",
                2 * nd,
                load.len(),
                composite.len()
            )));
        }
        let nf = self.free.len();
        let mut rhs = vec![0.0; self.dim()];
        for comp in 0..2 {
            for (i, &d) in self.free.iter().enumerate() {
                let g = comp * nd + d;
                rhs[comp * nf + i] = load[g] + composite[g] / self.params.dt;
            }
        }
        Ok(rhs)
    }

    /// Splits a solution vector into velocity (with zero boundary values),
    /// pressure and the multiplier.
    pub fn split_solution(&self, z: &[f64]) -> Result<(Field, Field, f64)> {
        if z.len() != self.dim() {
            return Err(Error::invalid("solution length does not match the system"));
        }
        let nd = self.velocity.n_dofs();
        let nf = self.free.len();
        let mut u = vec![0.0; 2 * nd];
        for comp in 0..2 {
            for (i, &d) in self.free.iter().enumerate() {
                u[comp * nd + d] = z[comp * nf + i];
            }
        }
        let np = self.pressure.n_dofs();
        let p = z[2 * nf..2 * nf + np].to_vec();
        Ok((
            Field::from_coefficients(self.velocity.clone(), 2, u)?,
            Field::from_coefficients(self.pressure.clone(), 1, p)?,
            z[self.dim() - 1],
        ))
    }

    /// Packs a velocity/pressure pair into the unknown layout (multiplier 0).
    pub fn pack(&self, u: &Field, p: &Field) -> Vec<f64> {
        let nd = self.velocity.n_dofs();
        let nf = self.free.len();
        let mut z = vec![0.0; self.dim()];
        for comp in 0..2 {
            for (i, &d) in self.free.iter().enumerate() {
                z[comp * nf + i] = u.coefficients()[comp * nd + d];
            }
        }
        z[2 * nf..2 * nf + p.coefficients().len()].copy_from_slice(p.coefficients());
        z
    }
}
