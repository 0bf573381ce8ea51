//! Time stepping for the four Lagrange-Galerkin schemes.
//!
//! Every step solves
//!
//! ```text
//! (u^n - u^{n-1} o X, v)/dt + nu (grad u^n, grad v) + b(v, p^n) = (f^n, v)
//! b(u^n, q) - delta0 C(p^n, q) = 0
//! ```
//!
//! where `X(x) = x - w*(x) dt`. The Oseen variants take `w*` as the
//! piecewise-linear interpolant of the prescribed velocity at the previous
//! time level, the Navier-Stokes variants the vertex values of the previous
//! iterate. The matrix does not change between steps and is factored once.

use std::sync::Arc;

use crate::assembly::{
    build_system, load_vector, ElementPair, Operators, SaddleSystem, SystemParams,
    DATA_QUADRATURE_DEGREE,
};
use crate::characteristics::{CharMap, CompositeMode, JacobianBounds};
use crate::error::{Error, Result};
use crate::fe::{project_p2_to_p1_at_vertices, FeSpace, Field};
use crate::linsolve::{LinearSolver, SolveStats, SolverOptions};
use crate::mesh::{Mesh, MeshPattern};
use crate::problems::ProblemDef;
use crate::quadrature::triangle_rule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Oseen, Taylor-Hood `P_k/P_{k-1}`.
    OseenTaylorHood,
    /// Oseen, stabilized `P_k/P_k`.
    OseenStabilized,
    /// Navier-Stokes, Taylor-Hood.
    NavierStokesTaylorHood,
    /// Navier-Stokes, stabilized.
    NavierStokesStabilized,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::OseenTaylorHood,
        SchemeKind::OseenStabilized,
        SchemeKind::NavierStokesTaylorHood,
        SchemeKind::NavierStokesStabilized,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::OseenTaylorHood => "O_TH",
            SchemeKind::OseenStabilized => "O_PS",
            SchemeKind::NavierStokesTaylorHood => "NS_TH",
            SchemeKind::NavierStokesStabilized => "NS_PS",
        }
    }

    pub fn is_stabilized(self) -> bool {
        matches!(
            self,
            SchemeKind::OseenStabilized | SchemeKind::NavierStokesStabilized
        )
    }

    pub fn is_navier_stokes(self) -> bool {
        matches!(
            self,
            SchemeKind::NavierStokesTaylorHood | SchemeKind::NavierStokesStabilized
        )
    }

    /// Pressure degree for velocity degree `k`.
    pub fn pressure_degree(self, k: usize) -> usize {
        if self.is_stabilized() {
            k
        } else {
            k.saturating_sub(1)
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown scheme '{s}' (expected O_TH, O_PS, NS_TH or NS_PS)"
                ))
            })
    }
}

/// Parameters of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    /// Velocity degree, 1 or 2.
    pub k: usize,
    /// Mesh divisions per side.
    pub n: usize,
    pub pattern: MeshPattern,
    pub dt: f64,
    pub final_time: f64,
    pub nu: f64,
    /// Stabilization weight; used by the stabilized schemes only.
    pub delta0: f64,
    pub composite: CompositeMode,
    pub solver: SolverOptions,
    /// Abort instead of warning when `dt |w*|_{1,inf} > 1/4`.
    pub strict: bool,
    /// Exactness degree for the forcing term.
    pub load_degree: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: SchemeKind::OseenStabilized,
            k: 2,
            n: 16,
            pattern: MeshPattern::Crisscross,
            dt: 1.0 / 256.0,
            final_time: 1.0,
            nu: 1e-2,
            delta0: 0.1,
            composite: CompositeMode::Exact,
            solver: SolverOptions::default(),
            strict: false,
            load_degree: DATA_QUADRATURE_DEGREE,
        }
    }
}

impl RunConfig {
    /// `N_T = floor(T / dt)`, with a relative guard against `T / dt` landing
    /// just below an integer.
    pub fn n_steps(&self) -> usize {
        let r = self.final_time / self.dt;
        (r * (1.0 + 1e-12)).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.k) {
            return Err(Error::invalid(format!(
                "velocity degree must be 1 or 2, got {}",
                self.k
            )));
        }
        if !self.scheme.is_stabilized() && self.k < 2 {
            return Err(Error::invalid("Taylor-Hood schemes require k = 2"));
        }
        if self.n < 2 {
            return Err(Error::invalid(format!(
                "mesh division must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite())
            || !(self.final_time > 0.0 && self.final_time.is_finite())
        {
            return Err(Error::invalid("dt and T must be positive"));
        }
        if self.n_steps() < 1 {
            return Err(Error::invalid(format!(
                "T = {} is shorter than one step dt = {}",
                self.final_time, self.dt
            )));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!(
                "viscosity must lie in (0, 1], got {}",
                self.nu
            )));
        }
        if self.scheme.is_stabilized() && !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::invalid(format!(
                "stabilized schemes need delta0 > 0, got {}",
                self.delta0
            )));
        }
        Ok(())
    }

    pub fn pair(&self) -> ElementPair {
        if self.scheme.is_stabilized() {
            ElementPair::EqualOrder {
                delta0: self.delta0,
            }
        } else {
            ElementPair::TaylorHood
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub jacobian: JacobianBounds,
    pub solve: SolveStats,
    /// `(p^n, 1)`.
    pub pressure_mean: f64,
}

/// The discrete solution at time level `step`.
#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub step: usize,
    pub time: f64,
    pub velocity: Field,
    /// Zero at step 0, where no pressure is computed.
    pub pressure: Field,
    /// `None` at step 0.
    pub diagnostics: Option<StepDiagnostics>,
}

/// Assembles the operators for a configuration's spaces.
pub fn assemble_operators(config: &RunConfig) -> Result<Arc<Operators>> {
    config.validate()?;
    let mesh = Arc::new(Mesh::unit_square(config.n, config.pattern)?);
    let v = FeSpace::new(mesh.clone(), config.k)?;
    let p = if config.scheme.pressure_degree(config.k) == config.k {
        v.clone()
    } else {
        FeSpace::new(mesh, config.scheme.pressure_degree(config.k))?
    };
    Ok(Arc::new(Operators::assemble(v, p)?))
}

/// Streams the states `n = 0, 1, ..., N_T` of one run.
pub struct Simulation {
    config: RunConfig,
    problem: ProblemDef,
    ops: Arc<Operators>,
    p1: Arc<FeSpace>,
    system: SaddleSystem,
    solver: LinearSolver,
    current: Option<Field>,
    step: usize,
    n_steps: usize,
    warned: bool,
    failed: bool,
}

impl Simulation {
    pub fn new(config: RunConfig, problem: ProblemDef) -> Result<Self> {
        let ops = assemble_operators(&config)?;
        Self::with_operators(config, problem, ops)
    }

    /// Reuses operators assembled for the same mesh and spaces, e.g. across
    /// a viscosity sweep.
    pub fn with_operators(
        config: RunConfig,
        problem: ProblemDef,
        ops: Arc<Operators>,
    ) -> Result<Self> {
        config.validate()?;
        let v = ops.velocity();
        let n = config.n;
        let expected_vertices = match config.pattern {
            MeshPattern::Crisscross => (n + 1) * (n + 1) + n * n,
            MeshPattern::AlternatingDiagonal => (n + 1) * (n + 1),
        };
        if v.degree() != config.k
            || ops.pressure().degree() != config.scheme.pressure_degree(config.k)
            || v.mesh().n_vertices() != expected_vertices
        {
            return Err(Error::invalid("operators do not match the configuration"));
        }
        if !config.scheme.is_navier_stokes() && problem.w.is_none() {
            return Err(Error::invalid(
                "Oseen schemes need a prescribed advecting velocity",
            ));
        }
        let system = build_system(
            SystemParams {
                dt: config.dt,
                nu: config.nu,
                pair: config.pair(),
            },
            &ops,
        )?;
        let p1 = if v.degree() == 1 {
            v.clone()
        } else {
            FeSpace::new(v.mesh().clone(), 1)?
        };
        Ok(Simulation {
            solver: LinearSolver::new(config.solver),
            n_steps: config.n_steps(),
            config,
            problem,
            ops,
            p1,
            system,
            current: None,
            step: 0,
            warned: false,
            failed: false,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    pub fn system(&self) -> &SaddleSystem {
        &self.system
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn initial(&mut self) -> Result<TrajectoryState> {
        let u0 = &self.problem.u0;
        let mut u = self.ops.velocity().interpolate_vector(|x| u0(x))?;
        u.zero_boundary();
        self.current = Some(u.clone());
        Ok(TrajectoryState {
            step: 0,
            time: 0.0,
            velocity: u,
            pressure: Field::zeros(self.ops.pressure().clone(), 1),
            diagnostics: None,
        })
    }

    fn w_star(&self, u_prev: &Field, t_prev: f64) -> Result<Field> {
        if self.config.scheme.is_navier_stokes() {
            if u_prev.space().degree() == 1 {
                Ok(u_prev.clone())
            } else {
                project_p2_to_p1_at_vertices(u_prev, &self.p1)
            }
        } else {
            let w = self.problem.w.as_ref().expect("checked at construction");
            let mut ws = self.p1.interpolate_vector(|x| w(x, t_prev))?;
            ws.zero_boundary();
            Ok(ws)
        }
    }

    fn advance(&mut self) -> Result<TrajectoryState> {
        let n = self.step;
        let dt = self.config.dt;
        let (t_prev, t) = ((n - 1) as f64 * dt, n as f64 * dt);
        let u_prev = self.current.take().expect("initial state emitted");
        let map = CharMap::new(self.w_star(&u_prev, t_prev)?, dt)?;
        let jacobian = map.jacobian_bounds();
        if !jacobian.condition_ok {
            let msg = format!(
                "dt |w*|_1,inf = {:.4} exceeds 1/4 (det in [{:.4}, {:.4}])",
                jacobian.step_measure, jacobian.min_det, jacobian.max_det
            );
            if self.config.strict {
                return Err(Error::StepCondition(msg));
            }
            if !self.warned {
                log::warn!("step {n}: {msg}; further violations are not reported");
                self.warned = true;
            }
        }
        let vel = self.ops.velocity().clone();
        let composite = map.composite_load_vector_quiet(&u_prev, &vel, self.config.composite)?;
        let f = &self.problem.forcing;
        let load = load_vector(&vel, &|x| f(x, t), self.config.load_degree);
        let rhs = self.system.assemble_rhs(&load, &composite)?;
        let (z, solve) = self.solver.solve(&self.system, &rhs, true)?;
        let (u, p, _) = self.system.split_solution(&z)?;
        let pressure_mean = self
            .ops
            .mean()
            .iter()
            .zip(p.coefficients())
            .map(|(a, b)| a * b)
            .sum();
        log::debug!(
            "step {n} t={t:.6} residual={:.3e} reused={} det=[{:.6}, {:.6}]",
            solve.residual,
            solve.reused,
            jacobian.min_det,
            jacobian.max_det
        );
        self.current = Some(u.clone());
        Ok(TrajectoryState {
            step: n,
            time: t,
            velocity: u,
            pressure: p,
            diagnostics: Some(StepDiagnostics {
                jacobian,
                solve,
                pressure_mean,
            }),
        })
    }
}

impl Iterator for Simulation {
    type Item = Result<TrajectoryState>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.step > self.n_steps {
            return None;
        }
        let out = if self.step == 0 {
            self.initial()
        } else {
            self.advance()
        };
        if out.is_err() {
            self.failed = true;
        }
        let step = self.step;
        self.step += 1;
        Some(out.map_err(|e| e.at_step(step)))
    }
}

/// Starts a run; equivalent to [`Simulation::new`].
pub fn run(config: RunConfig, problem: ProblemDef) -> Result<Simulation> {
    Simulation::new(config, problem)
}

/// Diagnostics for the standing assumptions of the method.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    /// `dt |Pi_1 w^0|_{1,inf}` (or of the initial velocity for
    /// Navier-Stokes).
    pub step_measure: f64,
    pub step_condition_ok: bool,
    /// Every element has at least one interior vertex.
    pub internal_vertex_ok: bool,
    pub elements_without_internal_vertex: Vec<usize>,
    /// `|u_h^0 - u^0|_{L^2}` by quadrature.
    pub initial_error_l2: f64,
}

/// Evaluates the step condition, the interior-vertex condition and the
/// initial interpolation error. `quad_degree` sets the rule for the last.
pub fn check_hypotheses(
    config: &RunConfig,
    problem: &ProblemDef,
    mesh: &Arc<Mesh>,
    quad_degree: usize,
) -> Result<HypothesisReport> {
    let p1 = FeSpace::new(mesh.clone(), 1)?;
    let mut w0 = match &problem.w {
        Some(w) => p1.interpolate_vector(|x| w(x, 0.0))?,
        None => p1.interpolate_vector(|x| (problem.u0)(x))?,
    };
    w0.zero_boundary();
    let step_measure = config.dt * w0.w1inf_seminorm();
    let (internal_vertex_ok, bad) = mesh.check_internal_vertex_hypothesis();
    let space = FeSpace::new(mesh.clone(), config.k)?;
    let mut uh = space.interpolate_vector(|x| (problem.u0)(x))?;
    uh.zero_boundary();
    let rule = triangle_rule(quad_degree);
    let mut err2 = 0.0;
    for e in 0..mesh.n_elements() {
        let area = mesh.area(e);
        for (l, w) in rule.iter() {
            let x = mesh.point_at(e, *l);
            let a = uh.vector_value(e, *l);
            let b = (problem.u0)(x);
            err2 += w * area * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
        }
    }
    Ok(HypothesisReport {
        step_measure,
        step_condition_ok: step_measure <= crate::characteristics::STEP_CONDITION,
        internal_vertex_ok,
        elements_without_internal_vertex: bad,
        initial_error_l2: err2.sqrt(),
    })
}
