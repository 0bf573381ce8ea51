use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use lgfem::{CompositeMode, SchemeKind, SolverKind};
use lgfem_cli::{run_case, Case, ExperimentSpec};

/// Lagrange-Galerkin convergence experiments on the unit square.
///
/// Thread count comes from LGFEM_THREADS (default: all cores).
#[derive(Parser, Debug)]
#[command(name = "lgfem", version)]
struct Args {
    /// Preset: a, b (Oseen, Cp = 1, 10), c, d (Navier-Stokes, Cp = 1, 10),
    /// ex42 (fluid at rest under a body force) or custom (zero data).
    #[arg(long)]
    case: Case,
    /// Schemes to compare, e.g. O_TH,O_PS.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeKind>>,
    /// Velocity degree.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Mesh divisions per side.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Time step; default h^2 (0.01 for ex42).
    #[arg(long)]
    dt: Option<f64>,
    /// Viscosities.
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    /// Pressure amplitude.
    #[arg(long)]
    cp: Option<f64>,
    /// Stabilization weight.
    #[arg(long)]
    delta0: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Composite-term integration: exact or quadrature.
    #[arg(long, default_value = "exact")]
    composite: CompositeMode,
    /// Linear solver: direct or krylov.
    #[arg(long, default_value = "direct")]
    solver: SolverKind,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Reduced mesh list 8, 11, 16, 23.
    #[arg(long)]
    ci: bool,
    /// Fail a run when the step condition is violated.
    #[arg(long)]
    strict: bool,
    /// Record wall-clock seconds in the CSV.
    #[arg(long)]
    timings: bool,
}

impl Args {
    fn spec(self) -> ExperimentSpec {
        let mut spec = ExperimentSpec::preset(self.case);
        if self.ci {
            spec = spec.ci();
        }
        if let Some(s) = self.schemes {
            spec.schemes = s;
        }
        if let Some(n) = self.n {
            spec.n_list = n;
        }
        if let Some(nu) = self.nu {
            spec.nu_list = nu;
        }
        spec.k = self.k;
        spec.dt = self.dt.or(spec.dt);
        spec.cp = self.cp.unwrap_or(spec.cp);
        spec.delta0 = self.delta0.unwrap_or(spec.delta0);
        spec.final_time = self.t.unwrap_or(spec.final_time);
        spec.composite = self.composite;
        spec.solver = self.solver;
        spec.strict = self.strict;
        spec.timings = self.timings;
        spec.out = self.out;
        spec
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("LGFEM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .with_context(|| format!("LGFEM_THREADS must be a count, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let result = init_threads().and_then(|()| run_case(&args.spec()));
    match result {
        Ok(out) => {
            println!("{}", out.csv.display());
            println!("{}", out.slopes.display());
            for p in out
                .svg
                .iter()
                .chain(&out.field_dumps)
                .chain(&out.final_norms)
            {
                println!("{}", p.display());
            }
            for s in &out.sweeps {
                if let Some(f) = &s.fits {
                    println!(
                        "{} nu={:e}: slopes {:.3} {:.3} {:.3}",
                        s.scheme, s.nu, f[0].slope, f[1].slope, f[2].slope
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
