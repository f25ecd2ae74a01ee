//! CSV, key-value, and SVG writers. All output is a pure function of its
//! inputs, so identical runs produce identical bytes.

use std::fmt::Write as _;

use duopoly_core::scan::ScanSample;
use duopoly_core::{Root, ScanResult, SimStatus, SpectrumResult, Trajectory};

use crate::commands::boundary_lines;

pub const SPECTRUM_HEADER: &str = "tau,re,im,residual";
pub const TRAJECTORY_HEADER: &str = "t,x1,x2,z1,z2,dist";
pub const SCAN_HEADER: &str = "param,abscissa,verdict";

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 600.0;
pub const MARKER_RADIUS: f64 = 3.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// `v` with ten significant digits.
pub fn sig10(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let prec = (9 - v.abs().log10().floor() as i32).clamp(0, 15) as usize;
    format!("{v:.prec$}")
}

/// Shortest round-trip form, switching to exponent notation for extreme magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Roots in decreasing real part, repeated by multiplicity.
fn listed_roots(res: &SpectrumResult) -> Vec<Root> {
    let mut roots: Vec<Root> = res
        .all_roots()
        .flat_map(|r| std::iter::repeat_n(*r, r.multiplicity.max(1)))
        .collect();
    roots.sort_by(|a, b| b.value.re.total_cmp(&a.value.re).then(b.value.im.total_cmp(&a.value.im)));
    roots
}

pub fn spectrum_csv(results: &[SpectrumResult]) -> String {
    let mut out = format!("{SPECTRUM_HEADER}\n");
    for res in results {
        let abscissa = res.spectral_abscissa.map_or("none".to_string(), num);
        let _ = writeln!(
            out,
            "# tau={}, count_verified={}, spectral_abscissa={abscissa}",
            num(res.tau),
            res.count_verified
        );
        for r in listed_roots(res) {
            let _ = writeln!(out, "{},{},{},{}", num(res.tau), num(r.value.re), num(r.value.im), num(r.residual));
        }
    }
    out
}

fn status_line(status: &SimStatus) -> String {
    match status {
        SimStatus::Completed => "# status: completed".into(),
        SimStatus::Diverged { t } => format!("# status: diverged at t={t}"),
        SimStatus::DomainExit { t, detail } => format!("# status: domain exit at t={t}: {detail}"),
    }
}

pub fn trajectory_csv(traj: &Trajectory, history: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# step={}", traj.step);
    let _ = writeln!(out, "# tau={}", traj.tau);
    let _ = writeln!(out, "# history={history}");
    if let Some(r) = traj.reference {
        let _ = writeln!(out, "# equilibrium={},{},{},{}", r.x1, r.x2, r.z1, r.z2);
    }
    let _ = writeln!(out, "{TRAJECTORY_HEADER}");
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let dist = traj.equilibrium_distance.get(i).copied().unwrap_or(f64::NAN);
        let row = [*t, s.x1, s.x2, s.z1, s.z2, dist].map(num);
        let _ = writeln!(out, "{}", row.join(","));
    }
    let _ = writeln!(out, "{}", status_line(&traj.status));
    out
}

fn sample_row(s: &ScanSample) -> String {
    let abscissa = s.abscissa.map_or("nan".to_string(), num);
    let verdict = s.verdict.map_or("skipped", |v| v.as_str());
    format!("{},{abscissa},{verdict}", num(s.value))
}

pub fn scan_csv(res: &ScanResult) -> String {
    let mut out = format!("{SCAN_HEADER}\n");
    for s in &res.samples {
        let _ = writeln!(out, "{}", sample_row(s));
    }
    for line in boundary_lines(res) {
        let _ = writeln!(out, "# {line}");
    }
    out
}

pub fn key_values(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Scatter of every root in the complex plane, one colour per delay.
pub fn spectrum_svg(results: &[SpectrumResult]) -> String {
    let (left, right, top, bottom) = (70.0, 130.0, 30.0, 60.0);
    let (pw, ph) = (SVG_WIDTH - left - right, SVG_HEIGHT - top - bottom);
    let points: Vec<(usize, f64, f64)> = results
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.all_roots().map(move |z| (i, z.value.re, z.value.im)))
        .collect();
    let range = |vals: &mut dyn Iterator<Item = f64>, include_zero: bool| {
        let (mut lo, mut hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if include_zero || !lo.is_finite() {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if hi - lo < 1e-9 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    };
    let (x0, x1) = range(&mut points.iter().map(|p| p.1), true);
    let (y0, y1) = range(&mut points.iter().map(|p| p.2), false);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line class="re-zero" x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{1}" stroke="gray" stroke-dasharray="4 3"/>"#,
        sx(0.0),
        top + ph
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="lightgray"/>"#,
            sy(0.0),
            left + pw
        );
    }
    for (v, anchor, x, y) in [
        (x0, "start", left, top + ph + 16.0),
        (x1, "end", left + pw, top + ph + 16.0),
    ] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" font-size="11" text-anchor="{anchor}">{}</text>"#, fmt_tick(v));
    }
    for (v, y) in [(y0, top + ph), (y1, top + 10.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">Re</text>"#,
        left + pw / 2.0,
        SVG_HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {0})">Im</text>"#,
        top + ph / 2.0
    );
    for (i, x, y) in &points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{MARKER_RADIUS}" fill="{}"/>"#,
            sx(*x),
            sy(*y),
            PALETTE[i % PALETTE.len()]
        );
    }
    for (i, res) in results.iter().enumerate() {
        let y = top + 16.0 + 20.0 * i as f64;
        let x = left + pw + 20.0;
        let _ = writeln!(
            svg,
            r#"<circle cx="{x}" cy="{}" r="{MARKER_RADIUS}" fill="{}"/><text x="{}" y="{y}" font-size="12">τ = {}</text>"#,
            y - 4.0,
            PALETTE[i % PALETTE.len()],
            x + 10.0,
            res.tau
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    format!("{:.3}", v)
}
