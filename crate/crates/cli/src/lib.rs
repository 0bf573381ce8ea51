//! Experiment runner for `lgfem`: mesh sweeps, CSV tables and log-log plots.
//!
//! Each case writes into the output directory:
//!
//! | file | content |
//! |------|---------|
//! | `<case>.csv` | one row per `(scheme, nu, N)` run |
//! | `<case>_slopes.csv` | fitted orders per `(scheme, nu)` sweep |
//! | `<case>.svg` | errors against `h` on log-log axes |
//! | `ex42_<scheme>_N<N>_field.txt` | final state on a 65 x 65 grid (hydrostatic case) |
//! | `ex42_final.csv` | final velocity norm per scheme (hydrostatic case) |
//!
//! Run columns are
//! `case,scheme,k,N,h,dt,nu,delta0,Cp,E_linfL2_u,E_l2H10_u,E_l2L2_p,slope_flag,wall_seconds`.
//! `slope_flag` is `ok` when all three fitted slopes of the sweep lie within
//! 0.3 of `k`, `off` otherwise, `na` with fewer than three usable meshes,
//! `trivial` when a reference norm vanishes (the entries are then absolute
//! errors) and `error:<message>` for a failed run. `wall_seconds` is zero
//! unless timings are requested, so reruns produce identical files.

pub mod plot;
pub mod report;
pub mod runner;
pub mod spec;

use std::path::PathBuf;

use anyhow::{Context, Result};

pub use report::{SweepFit, CSV_HEADER};
pub use runner::{run_all, RunRecord};
pub use spec::{Case, ExperimentSpec, Job, CI_N, FULL_N};

/// Grid divisions per side for field dumps.
pub const DUMP_DIVISIONS: usize = 64;

#[derive(Clone, Debug, Default)]
pub struct CaseOutput {
    pub csv: PathBuf,
    pub slopes: PathBuf,
    pub svg: Option<PathBuf>,
    pub field_dumps: Vec<PathBuf>,
    pub final_norms: Option<PathBuf>,
    pub records: Vec<RunRecord>,
    pub sweeps: Vec<SweepFit>,
}

pub fn run_case(spec: &ExperimentSpec) -> Result<CaseOutput> {
    std::fs::create_dir_all(&spec.out)
        .with_context(|| format!("creating {}", spec.out.display()))?;
    let case = spec.case.label();
    let hydrostatic = spec.case == Case::Ex42;
    let records = run_all(spec, hydrostatic);
    let sweeps = report::fit_sweeps(&records);

    let mut out = CaseOutput {
        csv: spec.out.join(format!("{case}.csv")),
        slopes: spec.out.join(format!("{case}_slopes.csv")),
        ..CaseOutput::default()
    };
    report::write_rows(&out.csv, spec, &records, &sweeps)?;
    report::write_slopes(&out.slopes, &sweeps)?;
    let svg = spec.out.join(format!("{case}.svg"));
    if plot::convergence_svg(&svg, &format!("case {case}"), &sweeps)? {
        out.svg = Some(svg);
    }
    if hydrostatic {
        for r in records.iter().filter(|r| r.last.is_some()) {
            let path = spec
                .out
                .join(format!("ex42_{}_N{}_field.txt", r.job.scheme, r.job.n));
            report::write_field_dump(&path, r, DUMP_DIVISIONS)?;
            out.field_dumps.push(path);
        }
        let path = spec.out.join("ex42_final.csv");
        report::write_final_norms(&path, spec, &records)?;
        out.final_norms = Some(path);
    }
    out.records = records;
    out.sweeps = sweeps;
    Ok(out)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
