//! Deterministic SVG plots of benchmark results.
//!
//! Output is plain text with fixed number formatting and no timestamps, so
//! identical inputs produce byte-identical files.

use std::io;
use std::path::{Path, PathBuf};

use super::{BenchSummary, LearningCurve};

const PARAM_NAMES: [&str; 4] = ["rho1", "theta1", "rho2", "theta2"];
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Fixed-precision SVG coordinate; normalizes negative zero.
fn num(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.3}")
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>\n",
            num(x1), num(y1), num(x2), num(y2), num(width)
        ));
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{}\"/>\n",
            coords.join(" "),
            num(width)
        ));
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, opacity: f64) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"{}\" stroke=\"none\"/>\n",
            coords.join(" "),
            num(opacity)
        ));
    }

    fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\">{content}</text>\n",
            num(x),
            num(y),
            num(size)
        ));
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n{}</svg>\n",
            num(self.width),
            num(self.height),
            num(self.width),
            num(self.height),
            num(self.width),
            num(self.height),
            self.body
        )
    }
}

/// Per-parameter policy evolution of one run: mean line inside a +/- one
/// standard deviation envelope, one panel per parameter.
pub fn render_params_svg(curve: &LearningCurve) -> String {
    const W: f64 = 640.0;
    const PANEL_H: f64 = 120.0;
    const MARGIN: f64 = 42.0;
    const TOP: f64 = 24.0;
    let h = TOP + 4.0 * PANEL_H + 16.0;
    let mut svg = Svg::new(W, h);
    let n = curve.points.len();
    let x_of = |k: usize| {
        if n <= 1 {
            MARGIN + (W - MARGIN - 12.0) / 2.0
        } else {
            MARGIN + (W - MARGIN - 12.0) * k as f64 / (n - 1) as f64
        }
    };
    svg.text(
        MARGIN,
        16.0,
        12.0,
        &format!(
            "policy evolution, robot {} run {} ({} updates)",
            curve.robot,
            curve.run,
            curve.points.len() - 1
        ),
    );
    for (pi, name) in PARAM_NAMES.iter().enumerate() {
        let top = TOP + pi as f64 * PANEL_H + 8.0;
        let bottom = top + PANEL_H - 24.0;
        // value range [-1.2, 1.2] covers the normalized space plus slack
        let y_of = |v: f64| {
            let v = v.clamp(-1.2, 1.2);
            bottom - (v + 1.2) / 2.4 * (bottom - top)
        };
        // frame and zero line
        svg.line(MARGIN, top, MARGIN, bottom, "#444444", 1.0);
        svg.line(MARGIN, bottom, W - 12.0, bottom, "#444444", 1.0);
        svg.line(MARGIN, y_of(0.0), W - 12.0, y_of(0.0), "#cccccc", 0.5);
        let mut upper: Vec<(f64, f64)> = Vec::with_capacity(n);
        let mut lower: Vec<(f64, f64)> = Vec::with_capacity(n);
        let mut mean: Vec<(f64, f64)> = Vec::with_capacity(n);
        for (k, p) in curve.points.iter().enumerate() {
            let x = x_of(k);
            mean.push((x, y_of(p.mean[pi])));
            upper.push((x, y_of(p.mean[pi] + p.std[pi])));
            lower.push((x, y_of(p.mean[pi] - p.std[pi])));
        }
        let mut band = upper.clone();
        band.extend(lower.iter().rev());
        svg.polygon(&band, COLORS[pi], 0.25);
        svg.polyline(&mean, COLORS[pi], 1.5);
        svg.text(8.0, (top + bottom) / 2.0, 11.0, name);
        svg.text(MARGIN - 30.0, y_of(1.0) + 4.0, 9.0, "1");
        svg.text(MARGIN - 34.0, y_of(-1.0) + 4.0, 9.0, "-1");
    }
    svg.text(W / 2.0 - 20.0, h - 4.0, 10.0, "update");
    svg.finish()
}

/// Overlaid Gaussian curves of the per-robot final-batch rewards, with the
/// two-standard-error interval marked under each curve.
pub fn render_rewards_svg(curves: &[LearningCurve], summary: &BenchSummary) -> String {
    const W: f64 = 640.0;
    const H: f64 = 300.0;
    const MARGIN: f64 = 48.0;
    let mut svg = Svg::new(W, H);
    svg.text(MARGIN, 16.0, 12.0, "final-batch reward distribution per robot");

    // per-robot samples
    let mut stats: Vec<(usize, f64, f64, f64)> = Vec::new(); // robot, mean, sd, se
    for r in &summary.robots {
        let vals: Vec<f64> = curves
            .iter()
            .filter(|c| c.robot == r.robot)
            .map(|c| c.final_batch_reward())
            .collect();
        if vals.is_empty() {
            continue;
        }
        let mean = r.final_reward_mean;
        let sd = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        stats.push((r.robot, mean, sd, r.final_reward_se));
    }
    if stats.is_empty() {
        return svg.finish();
    }
    let spread = |sd: f64| if sd > 1e-9 { sd } else { 0.05 };
    let lo = stats
        .iter()
        .map(|(_, m, sd, _)| m - 4.0 * spread(*sd))
        .fold(f64::INFINITY, f64::min);
    let hi = stats
        .iter()
        .map(|(_, m, sd, _)| m + 4.0 * spread(*sd))
        .fold(f64::NEG_INFINITY, f64::max);
    let x_of = |v: f64| MARGIN + (v - lo) / (hi - lo) * (W - MARGIN - 16.0);
    let base = H - 40.0;
    let top = 40.0;
    svg.line(MARGIN, base, W - 16.0, base, "#444444", 1.0);

    for (idx, (robot, mean, sd, se)) in stats.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let s = spread(*sd);
        // unit-peak Gaussian over the shared range
        let pts: Vec<(f64, f64)> = (0..=160)
            .map(|k| {
                let v = lo + (hi - lo) * k as f64 / 160.0;
                let y = (-0.5 * ((v - mean) / s).powi(2)).exp();
                (x_of(v), base - y * (base - top))
            })
            .collect();
        svg.polyline(&pts, color, 1.5);
        // two standard errors around the mean
        let y = base + 6.0 + idx as f64 * 5.0;
        svg.line(x_of(mean - 2.0 * se), y, x_of(mean + 2.0 * se), y, color, 2.0);
        svg.text(
            MARGIN,
            top - 18.0 + idx as f64 * 12.0,
            10.0,
            &format!(
                "robot {robot}: mean={} se={}",
                num(*mean),
                num(*se)
            ),
        );
        // color swatch next to the legend line
        svg.line(
            MARGIN - 16.0,
            top - 21.0 + idx as f64 * 12.0,
            MARGIN - 4.0,
            top - 21.0 + idx as f64 * 12.0,
            color,
            3.0,
        );
    }
    svg.text(x_of(lo) - 2.0, base + 24.0, 9.0, &num(lo));
    svg.text(x_of(hi) - 30.0, base + 24.0, 9.0, &num(hi));
    svg.text(W / 2.0 - 30.0, H - 6.0, 10.0, "batch reward");
    svg.finish()
}

/// Write every plot for a benchmark outcome; returns the created paths.
pub fn emit_plots(
    curves: &[LearningCurve],
    summary: &BenchSummary,
    out_dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for curve in curves {
        let path = out_dir.join(format!("params_r{}_n{}.svg", curve.robot, curve.run));
        std::fs::write(&path, render_params_svg(curve))?;
        written.push(path);
    }
    let path = out_dir.join("rewards_overlap.svg");
    std::fs::write(&path, render_rewards_svg(curves, summary))?;
    written.push(path);
    Ok(written)
}
