use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use crate::report::{SweepFit, NORMS};

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 600;

/// Log-log plot of every error against `h`, fitted slopes in the legend.
/// Returns `false` without writing when nothing is plottable.
pub fn convergence_svg(path: &Path, title: &str, sweeps: &[SweepFit]) -> Result<bool> {
    let mut series = Vec::new();
    for s in sweeps {
        for (i, name) in NORMS.iter().enumerate() {
            let pts: Vec<(f64, f64)> =
                s.h.iter()
                    .zip(&s.errors[i])
                    .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
                    .map(|(h, e)| (*h, *e))
                    .collect();
            if pts.len() < 2 {
                continue;
            }
            let slope = s
                .fits
                .as_ref()
                .map_or_else(|| "n/a".to_string(), |f| format!("{:.2}", f[i].slope));
            let label = format!("{} {} nu={:e}: slope {slope}", s.scheme, name, s.nu);
            series.push((label, pts));
        }
    }
    if series.is_empty() {
        return Ok(false);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (_, pts) in &series {
        for &(x, y) in pts {
            (x0, x1, y0, y1) = (x0.min(x), x1.max(x), y0.min(y), y1.max(y));
        }
    }
    let root = SVGBackend::new(path, (WIDTH, HEIGHT)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(
            (x0 / 1.2..x1 * 1.2).log_scale(),
            (y0 / 2.0..y1 * 2.0).log_scale(),
        )
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("h")
        .y_desc("relative error")
        .x_label_formatter(&|v| format!("{v:.3}"))
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (i, (label, pts)) in series.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(label)
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| anyhow!("{e}"))?;
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(true)
}
