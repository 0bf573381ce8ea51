use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lgfem::{
    example41, example42, zero_problem, CompositeMode, ProblemDef, ProblemKind, SchemeKind,
    SolverKind,
};

/// Paper mesh sequence.
pub const FULL_N: [usize; 5] = [16, 23, 32, 45, 64];
/// Reduced sequence for quick checks; `dt = h^2` is kept.
pub const CI_N: [usize; 4] = [8, 11, 16, 23];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    A,
    B,
    C,
    D,
    Ex42,
    /// `f = 0`, `u0 = 0`; every error column is trivially zero.
    Custom,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::A => "a",
            Case::B => "b",
            Case::C => "c",
            Case::D => "d",
            Case::Ex42 => "ex42",
            Case::Custom => "custom",
        }
    }

    pub fn default_schemes(self) -> Vec<SchemeKind> {
        use SchemeKind::*;
        match self {
            Case::A | Case::B | Case::Custom => vec![OseenTaylorHood, OseenStabilized],
            Case::C | Case::D | Case::Ex42 => vec![NavierStokesTaylorHood, NavierStokesStabilized],
        }
    }

    pub fn default_cp(self) -> f64 {
        match self {
            Case::B | Case::D => 10.0,
            Case::Ex42 | Case::Custom => 0.0,
            Case::A | Case::C => 1.0,
        }
    }

    /// Problem for one run. The flow type follows the scheme, so a preset
    /// may be rerun with the other scheme family.
    pub fn problem(self, scheme: SchemeKind, cp: f64, nu: f64, final_time: f64) -> ProblemDef {
        let kind = if scheme.is_navier_stokes() {
            ProblemKind::NavierStokes
        } else {
            ProblemKind::Oseen
        };
        let mut p = match self {
            Case::Ex42 => example42(),
            Case::Custom => zero_problem(final_time, kind),
            _ => example41(cp, nu, kind),
        };
        p.final_time = final_time;
        p
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "a" => Case::A,
            "b" => Case::B,
            "c" => Case::C,
            "d" => Case::D,
            "ex42" => Case::Ex42,
            "custom" => Case::Custom,
            _ => {
                return Err(format!(
                    "unknown case '{s}' (expected a, b, c, d, ex42 or custom)"
                ))
            }
        })
    }
}

/// One experiment: every combination of scheme, viscosity and mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub case: Case,
    pub schemes: Vec<SchemeKind>,
    pub k: usize,
    pub n_list: Vec<usize>,
    pub nu_list: Vec<f64>,
    /// `None` couples the step to the mesh, `dt = h^2` with `h = 1/N`.
    pub dt: Option<f64>,
    pub cp: f64,
    pub delta0: f64,
    pub final_time: f64,
    pub composite: CompositeMode,
    pub solver: SolverKind,
    pub strict: bool,
    /// Record wall-clock times; off by default so reruns give identical CSVs.
    pub timings: bool,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn preset(case: Case) -> Self {
        let mut spec = ExperimentSpec {
            case,
            schemes: case.default_schemes(),
            k: 2,
            n_list: FULL_N.to_vec(),
            nu_list: vec![1e-2],
            dt: None,
            cp: case.default_cp(),
            delta0: 0.1,
            final_time: 1.0,
            composite: CompositeMode::Exact,
            solver: SolverKind::Direct,
            strict: false,
            timings: false,
            out: PathBuf::from("out"),
        };
        if case == Case::Ex42 {
            spec.n_list = vec![16];
            spec.nu_list = vec![1e-4];
            spec.dt = Some(0.01);
            spec.delta0 = 1e-3;
            spec.final_time = 40.0;
        }
        spec
    }

    /// Switches a mesh sweep to the reduced list.
    pub fn ci(mut self) -> Self {
        if self.case != Case::Ex42 {
            self.n_list = CI_N.to_vec();
        }
        self
    }

    pub fn dt_for(&self, n: usize) -> f64 {
        self.dt.unwrap_or_else(|| {
            let h = 1.0 / n as f64;
            h * h
        })
    }

    /// Runs in output order: scheme, then viscosity, then mesh.
    pub fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for &scheme in &self.schemes {
            for &nu in &self.nu_list {
                for &n in &self.n_list {
                    jobs.push(Job { scheme, nu, n });
                }
            }
        }
        jobs
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub scheme: SchemeKind,
    pub nu: f64,
    pub n: usize,
}
