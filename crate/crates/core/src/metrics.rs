//! Relative errors against nodal interpolants of the exact solution and
//! convergence-order fits.
//!
//! For a discrete trajectory `phi_h^n` and reference `Pi phi(t^n)`:
//!
//! ```text
//! E_X = |Pi phi - phi_h|_X / |Pi phi|_X
//! |psi|_{l_inf(L2)} = max_{n=0..N_T} |psi^n|_{L2}
//! |psi|_{l2(Y)}     = (dt sum_{n=1..N_T} |psi^n|_Y^2)^{1/2}
//! ```
//!
//! The reference lies in the same space as the discrete field, so the space
//! norms are evaluated exactly through the mass and stiffness matrices.

use std::sync::Arc;

use crate::assembly::{Operators, DATA_QUADRATURE_DEGREE};
use crate::error::{Error, Result};
use crate::fe::{FeSpace, Field};
use crate::problems::ProblemDef;
use crate::quadrature::triangle_rule;
use crate::scheme::TrajectoryState;
use crate::sparse::SparseSymMatrix;

/// Squared norms of one time level.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepErrors {
    pub step: usize,
    pub time: f64,
    /// `|Pi u - u_h|_{L2}`.
    pub u_l2: f64,
    /// `|grad (Pi u - u_h)|_{L2}`.
    pub u_h1: f64,
    /// `|Pi p - p_h|_{L2}`; zero at step 0.
    pub p_l2: f64,
    pub ref_u_l2: f64,
    pub ref_u_h1: f64,
    pub ref_p_l2: f64,
}

/// Absolute errors against the exact solution itself, by quadrature.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DirectErrors {
    pub linf_l2_u: f64,
    pub l2_h1_u: f64,
    pub l2_l2_p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub linf_l2_u: f64,
    pub l2_h10_u: f64,
    pub l2_l2_p: f64,
    /// Set when a reference norm vanishes; the corresponding entry is then
    /// the absolute error rather than a ratio.
    pub trivial: bool,
    pub traces: Vec<StepErrors>,
    pub direct: Option<DirectErrors>,
}

/// Streaming accumulator: feed states in order with [`observe`](Self::observe).
pub struct ErrorAccumulator {
    problem: ProblemDef,
    ops: Arc<Operators>,
    dt: f64,
    with_direct: bool,
    traces: Vec<StepErrors>,
    direct: DirectSums,
}

#[derive(Default)]
struct DirectSums {
    linf_u: f64,
    h1_u: f64,
    l2_p: f64,
}

fn compatible(a: &Arc<FeSpace>, b: &Arc<FeSpace>) -> bool {
    Arc::ptr_eq(a, b)
        || a.degree() == b.degree()
            && (a.same_mesh(b)
                || a.mesh().vertices() == b.mesh().vertices()
                    && a.mesh().elements() == b.mesh().elements())
}

fn sym_norm(m: &SparseSymMatrix, x: &[f64]) -> f64 {
    m.quadratic_form(x).max(0.0).sqrt()
}

fn vector_norm(m: &SparseSymMatrix, f: &[f64], n: usize) -> f64 {
    (sym_norm(m, &f[..n]).powi(2) + sym_norm(m, &f[n..]).powi(2)).sqrt()
}

impl ErrorAccumulator {
    /// `ops` must be the operators the trajectory was computed with.
    pub fn new(problem: &ProblemDef, ops: Arc<Operators>, dt: f64) -> Result<Self> {
        if problem.exact_u.is_none() || problem.exact_p.is_none() {
            return Err(Error::invalid(
                "relative errors need the exact velocity and pressure",
            ));
        }
        Ok(ErrorAccumulator {
            problem: problem.clone(),
            ops,
            dt,
            with_direct: false,
            traces: Vec::new(),
            direct: DirectSums::default(),
        })
    }

    /// Also accumulate errors against the exact solution.
    pub fn with_direct(mut self, on: bool) -> Self {
        self.with_direct = on;
        self
    }

    pub fn observe(&mut self, state: &TrajectoryState) -> Result<()> {
        let expected = self.traces.len();
        if state.step != expected {
            return Err(Error::invalid(format!(
                "expected step {expected}, got {}",
                state.step
            )));
        }
        let t = state.time;
        let vel = self.ops.velocity();
        if !compatible(state.velocity.space(), vel)
            || !compatible(state.pressure.space(), self.ops.pressure())
        {
            return Err(Error::invalid("state does not match the operators"));
        }
        let u_exact = self.problem.exact_u.as_ref().unwrap();
        let p_exact = self.problem.exact_p.as_ref().unwrap();
        let ref_u = vel.interpolate_vector(|x| u_exact(x, t))?;
        let nd = vel.n_dofs();
        let eu: Vec<f64> = ref_u
            .coefficients()
            .iter()
            .zip(state.velocity.coefficients())
            .map(|(a, b)| a - b)
            .collect();
        let mut s = StepErrors {
            step: state.step,
            time: t,
            u_l2: vector_norm(self.ops.mass(), &eu, nd),
            u_h1: vector_norm(self.ops.stiffness(), &eu, nd),
            ref_u_l2: vector_norm(self.ops.mass(), ref_u.coefficients(), nd),
            ref_u_h1: vector_norm(self.ops.stiffness(), ref_u.coefficients(), nd),
            ..Default::default()
        };
        if state.step > 0 {
            let ref_p = self.ops.pressure().interpolate_scalar(|x| p_exact(x, t))?;
            let ep: Vec<f64> = ref_p
                .coefficients()
                .iter()
                .zip(state.pressure.coefficients())
                .map(|(a, b)| a - b)
                .collect();
            s.p_l2 = sym_norm(self.ops.pressure_mass(), &ep);
            s.ref_p_l2 = sym_norm(self.ops.pressure_mass(), ref_p.coefficients());
        }
        if self.with_direct {
            let (u_l2, u_h1, p_l2) =
                direct_errors(&state.velocity, &state.pressure, &self.problem, t);
            self.direct.linf_u = self.direct.linf_u.max(u_l2);
            if state.step > 0 {
                self.direct.h1_u += self.dt * u_h1 * u_h1;
                self.direct.l2_p += self.dt * p_l2 * p_l2;
            }
        }
        self.traces.push(s);
        Ok(())
    }

    pub fn finish(self) -> ErrorReport {
        let mut trivial = false;
        let mut ratio = |num: f64, den: f64| {
            if den > 0.0 {
                num / den
            } else {
                trivial = true;
                num
            }
        };
        let tr = &self.traces;
        let max = |f: fn(&StepErrors) -> f64| tr.iter().map(f).fold(0.0, f64::max);
        let l2 = |f: fn(&StepErrors) -> f64| {
            (self.dt * tr.iter().skip(1).map(|s| f(s).powi(2)).sum::<f64>()).sqrt()
        };
        let linf_l2_u = ratio(max(|s| s.u_l2), max(|s| s.ref_u_l2));
        let l2_h10_u = ratio(l2(|s| s.u_h1), l2(|s| s.ref_u_h1));
        let l2_l2_p = ratio(l2(|s| s.p_l2), l2(|s| s.ref_p_l2));
        ErrorReport {
            linf_l2_u,
            l2_h10_u,
            l2_l2_p,
            trivial,
            direct: self.with_direct.then(|| DirectErrors {
                linf_l2_u: self.direct.linf_u,
                l2_h1_u: self.direct.h1_u.sqrt(),
                l2_l2_p: self.direct.l2_p.sqrt(),
            }),
            traces: self.traces,
        }
    }
}

/// `|u - u_h|_{L2}`, `|grad(u - u_h)|_{L2}` (gradient of the exact field
/// by central differences) and `|p - p_h|_{L2}` at time `t`.
fn direct_errors(u: &Field, p: &Field, problem: &ProblemDef, t: f64) -> (f64, f64, f64) {
    let ue = problem.exact_u.as_ref().unwrap();
    let pe = problem.exact_p.as_ref().unwrap();
    let mesh = u.space().mesh();
    let rule = triangle_rule(DATA_QUADRATURE_DEGREE);
    let h = 1e-6;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for e in 0..mesh.n_elements() {
        let area = mesh.area(e);
        for (l, w) in rule.iter() {
            let x = mesh.point_at(e, *l);
            let (uh, ux) = (u.vector_value(e, *l), ue(x, t));
            a += w * area * ((uh[0] - ux[0]).powi(2) + (uh[1] - ux[1]).powi(2));
            let g = u.vector_gradient(e, *l);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let (up, um) = (ue(xp, t), ue(xm, t));
                for i in 0..2 {
                    b += w * area * (g[i][j] - (up[i] - um[i]) / (2.0 * h)).powi(2);
                }
            }
            c += w * area * (p.value(0, e, *l) - pe(x, t)).powi(2);
        }
    }
    (a.sqrt(), b.sqrt(), c.sqrt())
}

/// Streams a whole trajectory through an accumulator.
pub fn relative_errors<I>(
    trajectory: I,
    problem: &ProblemDef,
    ops: Arc<Operators>,
    dt: f64,
) -> Result<ErrorReport>
where
    I: IntoIterator<Item = Result<TrajectoryState>>,
{
    let mut acc = ErrorAccumulator::new(problem, ops, dt)?;
    for state in trajectory {
        acc.observe(&state?)?;
    }
    Ok(acc.finish())
}

/// Least-squares fit of `log E = slope log h + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

pub fn fit_order(h: &[f64], e: &[f64]) -> Result<OrderFit> {
    if h.len() != e.len() || h.len() < 3 {
        return Err(Error::invalid("need at least three (h, E) pairs"));
    }
    if h.iter().chain(e).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("h and E values must be positive and finite"));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("h values must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        residual,
    })
}
