use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use lgfem::{fit_order, OrderFit, SchemeKind};

use crate::runner::RunRecord;
use crate::spec::ExperimentSpec;

pub const CSV_HEADER: [&str; 14] = [
    "case",
    "scheme",
    "k",
    "N",
    "h",
    "dt",
    "nu",
    "delta0",
    "Cp",
    "E_linfL2_u",
    "E_l2H10_u",
    "E_l2L2_p",
    "slope_flag",
    "wall_seconds",
];

pub const NORMS: [&str; 3] = ["E_linfL2_u", "E_l2H10_u", "E_l2L2_p"];

/// Half-width of the accepted slope band around the velocity degree.
pub const SLOPE_BAND: f64 = 0.3;

/// Fitted orders of one `(scheme, nu)` mesh sweep.
#[derive(Clone, Debug)]
pub struct SweepFit {
    pub scheme: SchemeKind,
    pub nu: f64,
    pub h: Vec<f64>,
    pub errors: [Vec<f64>; 3],
    /// `None` when fewer than three usable points remain.
    pub fits: Option<[OrderFit; 3]>,
    pub trivial: bool,
}

impl SweepFit {
    pub fn flag(&self, k: usize) -> &'static str {
        if self.trivial {
            return "trivial";
        }
        match &self.fits {
            None => "na",
            Some(f) => {
                let target = k as f64;
                if f.iter().all(|f| (f.slope - target).abs() <= SLOPE_BAND) {
                    "ok"
                } else {
                    "off"
                }
            }
        }
    }
}

/// Groups records by `(scheme, nu)` in first-seen order and fits each group.
pub fn fit_sweeps(records: &[RunRecord]) -> Vec<SweepFit> {
    let mut sweeps: Vec<SweepFit> = Vec::new();
    for r in records {
        let i = match sweeps
            .iter()
            .position(|s| s.scheme == r.job.scheme && s.nu == r.job.nu)
        {
            Some(i) => i,
            None => {
                sweeps.push(SweepFit {
                    scheme: r.job.scheme,
                    nu: r.job.nu,
                    h: Vec::new(),
                    errors: Default::default(),
                    fits: None,
                    trivial: false,
                });
                sweeps.len() - 1
            }
        };
        if let Ok(rep) = &r.outcome {
            let s = &mut sweeps[i];
            s.trivial |= rep.trivial;
            s.h.push(r.h);
            for (e, v) in s
                .errors
                .iter_mut()
                .zip([rep.linf_l2_u, rep.l2_h10_u, rep.l2_l2_p])
            {
                e.push(v);
            }
        }
    }
    for s in &mut sweeps {
        if s.trivial || s.h.len() < 3 {
            continue;
        }
        let fits: Result<Vec<OrderFit>, _> = s.errors.iter().map(|e| fit_order(&s.h, e)).collect();
        s.fits = fits.ok().map(|f| [f[0], f[1], f[2]]);
    }
    sweeps
}

fn flag_for(record: &RunRecord, sweeps: &[SweepFit], k: usize) -> String {
    match &record.outcome {
        Err(e) => format!("error:{}", e.replace(['\n', '\r'], " ")),
        Ok(rep) if rep.trivial => "trivial".into(),
        Ok(_) => sweeps
            .iter()
            .find(|s| s.scheme == record.job.scheme && s.nu == record.job.nu)
            .map_or("na", |s| s.flag(k))
            .into(),
    }
}

/// One row per record, in record order.
pub fn write_rows(
    path: &Path,
    spec: &ExperimentSpec,
    records: &[RunRecord],
    sweeps: &[SweepFit],
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        let (e1, e2, e3) = match &r.outcome {
            Ok(rep) => (
                format!("{:e}", rep.linf_l2_u),
                format!("{:e}", rep.l2_h10_u),
                format!("{:e}", rep.l2_l2_p),
            ),
            Err(_) => ("NaN".into(), "NaN".into(), "NaN".into()),
        };
        let wall = if spec.timings { r.wall_seconds } else { 0.0 };
        w.write_record([
            spec.case.label().to_string(),
            r.job.scheme.label().to_string(),
            spec.k.to_string(),
            r.job.n.to_string(),
            format!("{:e}", r.h),
            format!("{:e}", r.dt),
            format!("{:e}", r.job.nu),
            format!("{:e}", spec.delta0),
            spec.cp.to_string(),
            e1,
            e2,
            e3,
            flag_for(r, sweeps, spec.k),
            format!("{wall:.3}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `scheme,nu,norm,slope,intercept,residual` for every fitted sweep.
pub fn write_slopes(path: &Path, sweeps: &[SweepFit]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["scheme", "nu", "norm", "slope", "intercept", "residual"])?;
    for s in sweeps {
        let Some(fits) = &s.fits else { continue };
        for (name, f) in NORMS.iter().zip(fits) {
            w.write_record([
                s.scheme.label().to_string(),
                format!("{:e}", s.nu),
                name.to_string(),
                format!("{:.6}", f.slope),
                format!("{:.6}", f.intercept),
                format!("{:e}", f.residual),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Samples of the final state on a uniform `(m+1) x (m+1)` grid, one
/// `x y u1 u2 p` line per point, `x` fastest.
pub fn write_field_dump(path: &Path, record: &RunRecord, m: usize) -> Result<()> {
    let state = record
        .last
        .as_ref()
        .context("run did not keep its final state")?;
    let mesh = state.velocity.space().mesh().clone();
    let mut out =
        BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    writeln!(out, "# {} t={} x y u1 u2 p", record.job.scheme, state.time)?;
    let mut hint = None;
    for j in 0..=m {
        for i in 0..=m {
            let x = [i as f64 / m as f64, j as f64 / m as f64];
            let loc = mesh.locate_point(x, hint)?;
            hint = Some(loc.element);
            let u = state.velocity.vector_value(loc.element, loc.bary);
            let p = state.pressure.value(0, loc.element, loc.bary);
            writeln!(
                out,
                "{:.6} {:.6} {:.9e} {:.9e} {:.9e}",
                x[0], x[1], u[0], u[1], p
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `scheme,N,dt,T,u_L2_final` for runs that kept their final state.
pub fn write_final_norms(path: &Path, spec: &ExperimentSpec, records: &[RunRecord]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["scheme", "N", "dt", "T", "u_L2_final"])?;
    for r in records {
        let norm = r
            .final_velocity_l2
            .filter(|_| r.outcome.is_ok())
            .map_or_else(|| "NaN".to_string(), |v| format!("{v:e}"));
        w.write_record([
            r.job.scheme.label().to_string(),
            r.job.n.to_string(),
            format!("{:e}", r.dt),
            spec.final_time.to_string(),
            norm,
        ])?;
    }
    w.flush()?;
    Ok(())
}
