use std::time::Instant;

use lgfem::{ErrorAccumulator, ErrorReport, RunConfig, Simulation, SolverOptions, TrajectoryState};
use rayon::prelude::*;

use crate::spec::{ExperimentSpec, Job};

/// Result of one `(scheme, nu, N)` run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub job: Job,
    pub h: f64,
    pub dt: f64,
    pub outcome: Result<ErrorReport, String>,
    pub wall_seconds: f64,
    /// Final time level, kept for the hydrostatic case only.
    pub last: Option<TrajectoryState>,
    /// `|u_h|_{L2}` at the final step.
    pub final_velocity_l2: Option<f64>,
}

pub fn run_config(spec: &ExperimentSpec, job: Job) -> RunConfig {
    RunConfig {
        scheme: job.scheme,
        k: spec.k,
        n: job.n,
        dt: spec.dt_for(job.n),
        final_time: spec.final_time,
        nu: job.nu,
        delta0: spec.delta0,
        composite: spec.composite,
        solver: SolverOptions {
            kind: spec.solver,
            ..SolverOptions::default()
        },
        strict: spec.strict,
        ..RunConfig::default()
    }
}

fn run_one(spec: &ExperimentSpec, job: Job, keep_last: bool) -> RunRecord {
    let config = run_config(spec, job);
    let started = Instant::now();
    let problem = spec
        .case
        .problem(job.scheme, spec.cp, job.nu, spec.final_time);
    let mut last = None;
    let outcome = (|| -> lgfem::Result<ErrorReport> {
        let sim = Simulation::new(config.clone(), problem.clone())?;
        let mut acc = ErrorAccumulator::new(&problem, sim.operators().clone(), config.dt)?;
        for state in sim {
            let state = state?;
            acc.observe(&state)?;
            last = Some(state);
        }
        Ok(acc.finish())
    })();
    let wall_seconds = started.elapsed().as_secs_f64();
    let final_velocity_l2 = last.as_ref().map(velocity_l2);
    match &outcome {
        Ok(r) => log::info!(
            "{} {} nu={:e} N={}: {:.4e} {:.4e} {:.4e} ({wall_seconds:.1}s)",
            spec.case,
            job.scheme,
            job.nu,
            job.n,
            r.linf_l2_u,
            r.l2_h10_u,
            r.l2_l2_p
        ),
        Err(e) => log::warn!(
            "{} {} nu={:e} N={}: {e}",
            spec.case,
            job.scheme,
            job.nu,
            job.n
        ),
    }
    RunRecord {
        job,
        h: 1.0 / job.n as f64,
        dt: config.dt,
        outcome: outcome.map_err(|e| e.to_string()),
        wall_seconds,
        last: if keep_last { last } else { None },
        final_velocity_l2,
    }
}

/// `L2` norm of the velocity, exact for polynomial fields.
fn velocity_l2(state: &TrajectoryState) -> f64 {
    let v = &state.velocity;
    let mesh = v.space().mesh();
    let rule = lgfem::quadrature::triangle_rule(2 * v.space().degree());
    let mut s = 0.0;
    for e in 0..mesh.n_elements() {
        let a = mesh.area(e);
        for (l, w) in rule.iter() {
            let u = v.vector_value(e, *l);
            s += w * a * (u[0] * u[0] + u[1] * u[1]);
        }
    }
    s.sqrt()
}

/// Runs every job on the current rayon pool; records come back in
/// [`ExperimentSpec::jobs`] order.
pub fn run_all(spec: &ExperimentSpec, keep_last: bool) -> Vec<RunRecord> {
    spec.jobs()
        .into_par_iter()
        .map(|job| run_one(spec, job, keep_last))
        .collect()
}
