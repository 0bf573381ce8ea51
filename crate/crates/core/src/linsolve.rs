//! Direct and Krylov solvers for the saddle-point system.
//!
//! The direct back-end is a sparse `LDL^T` factorization of a slightly
//! shifted matrix plus iterative refinement, falling back to pivoted LU when the
//! refinement stalls. Factors are kept between calls and reused while the
//! system fingerprint is unchanged.
//! The Krylov back-end is preconditioned MINRES with the block-diagonal
//! preconditioner `diag(K, K, M_p + delta0 C, s)`, where `K = M/dt + nu A`
//! and `s` is the multiplier's Schur complement `m^T (M_p + delta0 C)^{-1} m`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky,
    SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SolverKind {
    #[default]
    Direct,
    Krylov,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "krylov" | "minres" => Ok(SolverKind::Krylov),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Direct => "direct",
            SolverKind::Krylov => "krylov",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Bound on `|S x - b|_2 / |b|_2`.
    pub tolerance: f64,
    /// MINRES iteration cap (per restart).
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Direct,
            tolerance: 1e-10,
            max_iterations: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub method: SolverKind,
    /// Zero for the direct back-end.
    pub iterations: usize,
    /// Final `|S x - b|_2 / |b|_2`.
    pub residual: f64,
    /// Whether a factorization or preconditioner from an earlier call was used.
    pub reused: bool,
}

enum Backend {
    Ldlt(Box<ShiftedLdlt>),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Minres(Box<BlockPreconditioner>),
}

struct BlockPreconditioner {
    n_free: usize,
    n_p: usize,
    velocity: faer::sparse::linalg::solvers::Llt<usize, f64>,
    pressure: faer::sparse::linalg::solvers::Llt<usize, f64>,
    multiplier: f64,
}

impl BlockPreconditioner {
    fn new(system: &SaddleSystem) -> Result<Self> {
        let velocity = to_faer(system.velocity_block(), false)
            .sp_cholesky(Side::Upper)
            .map_err(|e| failure(format!("velocity block Cholesky failed: {e:?}"), f64::NAN))?;
        let pressure = to_faer(system.pressure_block(), false)
            .sp_cholesky(Side::Upper)
            .map_err(|e| failure(format!("pressure block Cholesky failed: {e:?}"), f64::NAN))?;
        let (nf, np) = (system.n_free(), system.n_pressure());
        let lambda = system.dim() - 1;
        let mut m = Mat::<f64>::zeros(np, 1);
        for i in 0..np {
            m[(i, 0)] = system.matrix().get(2 * nf + i, lambda);
        }
        let mut y = m.clone();
        pressure.solve_in_place(&mut y);
        let s: f64 = (0..np).map(|i| m[(i, 0)] * y[(i, 0)]).sum();
        Ok(BlockPreconditioner {
            n_free: nf,
            n_p: np,
            velocity,
            pressure,
            multiplier: if s > 0.0 { s } else { 1.0 },
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nf = self.n_free;
        let mut v = Mat::<f64>::from_fn(nf, 2, |i, c| r[c * nf + i]);
        self.velocity.solve_in_place(&mut v);
        for c in 0..2 {
            for i in 0..nf {
                z[c * nf + i] = v[(i, c)];
            }
        }
        let off = 2 * nf;
        let mut p = Mat::<f64>::from_fn(self.n_p, 1, |i, _| r[off + i]);
        self.pressure.solve_in_place(&mut p);
        for i in 0..self.n_p {
            z[off + i] = p[(i, 0)];
        }
        let last = off + self.n_p;
        z[last] = r[last] / self.multiplier;
    }
}

/// Unpivoted `LDL^T` with a fill-reducing ordering. The pressure and
/// multiplier rows are shifted by a small negative multiple of the identity,
/// which makes the matrix quasi-definite and hence factorizable in any
/// order; the factor belongs to a nearby matrix, so callers refine.
/// Relative diagonal shift on the pressure and multiplier rows before the
/// `LDL^T` factorization.
const REGULARIZATION: f64 = 1e-10;

struct ShiftedLdlt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl ShiftedLdlt {
    fn new(system: &SaddleSystem) -> Result<Self> {
        let n = system.dim();
        let nv = 2 * system.n_free();
        let s = system.matrix();
        // size of the pressure Schur complement diagonal, sum_j B_ij^2 / K_jj
        let mut schur = vec![0.0; n - nv];
        for (r, c, v) in s.upper().iter() {
            if r < nv && c >= nv && c + 1 < n {
                schur[c - nv] += v * v / s.get(r, r);
            }
        }
        let shift = REGULARIZATION * schur.iter().fold(0.0, |a: f64, &b| a.max(b));
        let t: Vec<Triplet<usize, usize, f64>> = s
            .upper()
            .iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .chain((nv..n).map(|i| Triplet::new(i, i, -shift)))
            .collect();
        let a = SparseColMat::try_new_from_triplets(n, n, &t).expect("valid triplets");
        let symbolic = factorize_symbolic_cholesky(
            a.symbolic(),
            Side::Upper,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| failure(format!("symbolic factorization failed: {e:?}"), f64::NAN))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let par = Par::Seq;
        let mut mem =
            MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()));
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                a.as_ref(),
                Side::Upper,
                LdltRegularization::default(),
                par,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| failure(format!("LDL^T factorization failed: {e:?}"), f64::NAN))?;
        Ok(ShiftedLdlt { symbolic, values })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let par = Par::Seq;
        let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            m.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }
}

/// Stateful solver; caches one factorization (or preconditioner) keyed by
/// the system fingerprint.
pub struct LinearSolver {
    options: SolverOptions,
    cache: Option<(u64, Backend)>,
}

fn failure(message: String, residual: f64) -> Error {
    Error::SolverFailure { message, residual }
}

fn to_faer(m: &SparseSymMatrix, full: bool) -> SparseColMat<usize, f64> {
    let t: Vec<Triplet<usize, usize, f64>> = if full {
        m.full_triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect()
    } else {
        m.upper()
            .iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect()
    };
    SparseColMat::try_new_from_triplets(m.dim(), m.dim(), &t).expect("valid triplets")
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(s: &SparseSymMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let mut r = s.matvec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let rel = norm(&r) / norm(b);
    (r, rel)
}

impl LinearSolver {
    pub fn new(options: SolverOptions) -> Self {
        LinearSolver {
            options,
            cache: None,
        }
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Drops any cached factorization.
    pub fn reset(&mut self) {
        self.cache = None;
    }

    /// Solves `S x = rhs`. With `reuse`, a cached factorization of an
    /// identical matrix is used instead of refactoring.
    pub fn solve(
        &mut self,
        system: &SaddleSystem,
        rhs: &[f64],
        reuse: bool,
    ) -> Result<(Vec<f64>, SolveStats)> {
        let n = system.dim();
        if rhs.len() != n {
            return Err(Error::invalid(format!(
                "rhs has length {}, system has {n}",
                rhs.len()
            )));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand side".into()));
        }
        let fp = system.fingerprint();
        let reused = reuse && matches!(&self.cache, Some((f, _)) if *f == fp);
        if !reused {
            self.cache = None;
            let backend = match self.options.kind {
                SolverKind::Direct => match ShiftedLdlt::new(system) {
                    Ok(f) => Backend::Ldlt(Box::new(f)),
                    Err(e) => {
                        log::debug!("{e}; using LU");
                        Backend::Lu(lu_factor(system.matrix())?)
                    }
                },
                SolverKind::Krylov => Backend::Minres(Box::new(BlockPreconditioner::new(system)?)),
            };
            self.cache = Some((fp, backend));
        }
        let method = self.options.kind;
        if norm(rhs) == 0.0 {
            let stats = SolveStats {
                method,
                iterations: 0,
                residual: 0.0,
                reused,
            };
            return Ok((vec![0.0; n], stats));
        }
        let tol = self.options.tolerance;
        let s = system.matrix();
        match &self.cache.as_ref().unwrap().1 {
            Backend::Ldlt(f) => {
                if let Some((x, rel)) = refine(s, rhs, tol, 12, |r| f.solve(r)) {
                    return Ok((
                        x,
                        SolveStats {
                            method,
                            iterations: 0,
                            residual: rel,
                            reused,
                        },
                    ));
                }
                // the regularized factor was too far off; switch to pivoted LU
                log::debug!("LDL^T refinement stalled, falling back to LU");
                self.cache = Some((fp, Backend::Lu(lu_factor(s)?)));
                self.solve(system, rhs, true)
            }
            Backend::Lu(lu) => match refine(s, rhs, tol, 3, |r| lu_solve(lu, r)) {
                Some((x, rel)) => Ok((
                    x,
                    SolveStats {
                        method,
                        iterations: 0,
                        residual: rel,
                        reused,
                    },
                )),
                None => Err(failure(
                    "direct solve residual above tolerance".into(),
                    relative_residual(s, &lu_solve(lu, rhs), rhs).1,
                )),
            },
            Backend::Minres(pc) => {
                let mut x = vec![0.0; n];
                let mut total = 0;
                let mut rel = f64::INFINITY;
                for _ in 0..5 {
                    let (it, _) =
                        minres(s, pc, rhs, &mut x, 0.1 * tol, self.options.max_iterations);
                    total += it;
                    rel = relative_residual(s, &x, rhs).1;
                    if rel <= tol {
                        break;
                    }
                    if !rel.is_finite() {
                        return Err(failure("MINRES breakdown".into(), rel));
                    }
                }
                if rel > tol {
                    return Err(Error::NoConvergence {
                        iterations: total,
                        residual: rel,
                    });
                }
                Ok((
                    x,
                    SolveStats {
                        method,
                        iterations: total,
                        residual: rel,
                        reused,
                    },
                ))
            }
        }
    }
}

/// Solve followed by up to `sweeps` steps of iterative refinement. Sweeps
/// continue below `tol` (down to `tol / 100`) while each one still gains a
/// factor of four. `None` if the residual ends above `tol`.
fn refine(
    s: &SparseSymMatrix,
    b: &[f64],
    tol: f64,
    sweeps: usize,
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let mut x = solve(b);
    let (mut r, mut rel) = relative_residual(s, &x, b);
    for _ in 0..sweeps {
        if rel <= 1e-2 * tol {
            break;
        }
        let dx = solve(&r);
        let mut y = x.clone();
        y.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        let (ry, rely) = relative_residual(s, &y, b);
        let stalled = rely > 0.25 * rel;
        if rely < rel {
            (x, r, rel) = (y, ry, rely);
        }
        if stalled && rel <= tol {
            break;
        }
    }
    (rel <= tol).then_some((x, rel))
}

fn lu_factor(s: &SparseSymMatrix) -> Result<faer::sparse::linalg::solvers::Lu<usize, f64>> {
    to_faer(s, true)
        .sp_lu()
        .map_err(|e| failure(format!("sparse LU failed: {e:?}"), f64::NAN))
}

fn lu_solve(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    lu.solve_in_place(&mut m);
    (0..b.len()).map(|i| m[(i, 0)]).collect()
}

/// Preconditioned MINRES from the current `x`. Stops when the preconditioned
/// residual estimate falls below `tol` relative to its initial value.
/// Returns the iteration count and the final estimate.
fn minres(
    a: &SparseSymMatrix,
    pc: &BlockPreconditioner,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> (usize, f64) {
    let n = b.len();
    let mut v_old = vec![0.0; n];
    let mut v = a.matvec(x);
    v.iter_mut().zip(b).for_each(|(vi, bi)| *vi = bi - *vi);
    let mut z = vec![0.0; n];
    pc.apply(&v, &mut z);
    let mut gamma = dot(&z, &v).max(0.0).sqrt();
    if gamma == 0.0 {
        return (0, 0.0);
    }
    let eta0 = gamma;
    let mut eta = gamma;
    let mut gamma_old = 1.0;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut az = vec![0.0; n];
    let mut z_next = vec![0.0; n];
    for it in 1..=max_iter {
        z.iter_mut().for_each(|zi| *zi /= gamma);
        a.matvec_into(&z, &mut az);
        let delta = dot(&az, &z);
        let v_next: Vec<f64> = (0..n)
            .map(|i| az[i] - (delta / gamma) * v[i] - (gamma / gamma_old) * v_old[i])
            .collect();
        pc.apply(&v_next, &mut z_next);
        let gamma_next = dot(&z_next, &v_next).max(0.0).sqrt();
        let a0 = c * delta - c_old * s * gamma;
        let a1 = (a0 * a0 + gamma_next * gamma_next).sqrt();
        let a2 = s * delta + c_old * c * gamma;
        let a3 = s_old * gamma;
        let c_next = a0 / a1;
        let s_next = gamma_next / a1;
        let w_next: Vec<f64> = (0..n)
            .map(|i| (z[i] - a3 * w_old[i] - a2 * w[i]) / a1)
            .collect();
        for i in 0..n {
            x[i] += c_next * eta * w_next[i];
        }
        eta *= -s_next;
        if eta.abs() <= tol * eta0 || gamma_next == 0.0 || !eta.is_finite() {
            return (it, eta.abs() / eta0);
        }
        v_old = std::mem::replace(&mut v, v_next);
        std::mem::swap(&mut z, &mut z_next);
        w_old = std::mem::replace(&mut w, w_next);
        gamma_old = gamma;
        gamma = gamma_next;
        c_old = c;
        c = c_next;
        s_old = s;
        s = s_next;
    }
    (max_iter, eta.abs() / eta0)
}
