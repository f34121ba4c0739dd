//! SVG diagnostic: √eigenvalues of B·Bᵀ and the best value against evaluations.

use std::fmt::Write as _;

use thiserror::Error;

use crate::harness::TrialRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("trajectory disabled: record {0} carries no trajectory (rerun with --trajectory)")]
    TrajectoryDisabled(usize),
    #[error("record {0} has an empty trajectory")]
    Empty(usize),
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const EIG_COLOR: &str = "#d62728";
const BEST_COLOR: &str = "#1f77b4";

/// Log-scaled axis over `[lo, hi]` (both positive), padded to whole decades.
struct LogAxis {
    lo: f64,
    hi: f64,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && *v > 0.0) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            lo = 1.0;
            hi = 1.0;
        }
        let mut lo = lo.log10().floor();
        let mut hi = hi.log10().ceil();
        if hi - lo < 1.0 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi }
    }

    /// Fraction of the axis height, 0 at the bottom.
    fn frac(&self, v: f64) -> f64 {
        (v.max(1e-300).log10() - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
        let mut t = self.lo.ceil();
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 {
            out.push(t);
            t += step;
        }
        out
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, width: f64) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    );
}

/// Renders a record with trajectories as an SVG document: one red curve per
/// √eigenvalue (left axis) and the best value in blue (right axis), both log
/// scaled, over evaluations.
pub fn emit_eig_plot(record: &TrialRecord, title: &str) -> Result<String, PlotError> {
    let eig = record
        .eig_trajectory
        .as_ref()
        .ok_or(PlotError::TrajectoryDisabled(record.trial))?;
    let best = record.trajectory.as_deref().unwrap_or(&[]);
    if eig.is_empty() {
        return Err(PlotError::Empty(record.trial));
    }

    let max_evals = eig
        .iter()
        .map(|s| s.evals)
        .chain(best.iter().map(|p| p.evals))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let eig_axis = LogAxis::new(eig.iter().flat_map(|s| s.sqrt_eigenvalues.iter().copied()));
    let best_axis = LogAxis::new(best.iter().filter_map(|p| p.best));

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |evals: f64| LEFT + plot_w * evals / max_evals;
    let py = |frac: f64| TOP + plot_h * (1.0 - frac);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for t in eig_axis.ticks() {
        let y = py(eig_axis.frac(10f64.powf(t)));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="{EIG_COLOR}">1e{t}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    if !best.is_empty() {
        for t in best_axis.ticks() {
            let y = py(best_axis.frac(10f64.powf(t)));
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{BEST_COLOR}">1e{t}</text>"#,
                LEFT + plot_w + 6.0,
                y + 4.0
            );
        }
    }
    for k in 0..=5 {
        let e = max_evals * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3e}</text>"#,
            px(e),
            TOP + plot_h + 18.0,
            e
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">evaluations</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{}) rotate(-90)" text-anchor="middle" fill="{EIG_COLOR}">sqrt(eigenvalue) of B·Bᵀ</text>"#,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate({},{}) rotate(90)" text-anchor="middle" fill="{BEST_COLOR}">best value</text>"#,
        WIDTH - 14.0,
        TOP + plot_h / 2.0
    );

    let n_eig = eig
        .iter()
        .map(|s| s.sqrt_eigenvalues.len())
        .max()
        .unwrap_or(0);
    for k in 0..n_eig {
        let pts: Vec<(f64, f64)> = eig
            .iter()
            .filter_map(|smp| smp.sqrt_eigenvalues.get(k).map(|&v| (smp.evals, v)))
            .map(|(e, v)| (px(e as f64), py(eig_axis.frac(v))))
            .collect();
        let _ = write!(s, r#"<g class="eigenvalue" data-index="{k}">"#);
        polyline(&mut s, &pts, EIG_COLOR, 1.0);
        let _ = writeln!(s, "</g>");
    }
    let pts: Vec<(f64, f64)> = best
        .iter()
        .filter_map(|p| p.best.map(|b| (px(p.evals as f64), py(best_axis.frac(b)))))
        .collect();
    if !pts.is_empty() {
        let _ = write!(s, r#"<g class="best-value">"#);
        polyline(&mut s, &pts, BEST_COLOR, 1.6);
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{EigenSample, TrajectoryPoint};

    fn record(eig: Option<Vec<EigenSample>>) -> TrialRecord {
        TrialRecord {
            trial: 3,
            seed: 3,
            success: false,
            evals_used: 32,
            infeasible_evals: 0,
            generations: 4,
            best_value: Some(2.0),
            failure: None,
            failure_detail: None,
            trajectory: Some(
                (1..=4)
                    .map(|g| TrajectoryPoint {
                        evals: 8 * g,
                        best: Some(10.0 / g as f64),
                    })
                    .collect(),
            ),
            eig_trajectory: eig,
        }
    }

    #[test]
    fn missing_trajectory_is_rejected() {
        let err = emit_eig_plot(&record(None), "x").unwrap_err();
        assert_eq!(err, PlotError::TrajectoryDisabled(3));
        assert!(err.to_string().contains("trajectory disabled"));
    }

    #[test]
    fn one_curve_per_eigenvalue_plus_best() {
        let eig = (1..=4)
            .map(|g| EigenSample {
                evals: 8 * g,
                sqrt_eigenvalues: vec![1.0; 5],
            })
            .collect();
        let svg = emit_eig_plot(&record(Some(eig)), "flat <B>").unwrap();
        assert_eq!(svg.matches(r#"class="eigenvalue""#).count(), 5);
        assert_eq!(svg.matches(r#"class="best-value""#).count(), 1);
        assert!(svg.contains("flat &lt;B&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
