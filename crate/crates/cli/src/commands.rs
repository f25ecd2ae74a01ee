//! The four pipelines. Each returns its standard-output text, warnings for
//! standard error, and the exit code to report; files are written as a side effect.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use duopoly_core::dde::{default_step, HISTORY_CONVENTION};
use duopoly_core::scan::linspace;
use duopoly_core::linearization::tau0_quartic;
use duopoly_core::spectrum::DEFAULT_GRID_DENSITY;
use duopoly_core::Quasipolynomial;
use rayon::prelude::*;
use duopoly_core::{
    assemble_report, crossing_test, dde, quartic_roots, quasipolynomial_at, scan, scan_parameter, solve, spectrum, Crossing,
    Rectangle, ScanOptions, ScanResult, Stability, Verdict,
};

use crate::config::Config;
use crate::{output, CliError, EXIT_OK, EXIT_VERIFICATION};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub exit: u8,
}

impl Report {
    fn new() -> Self {
        Self {
            stdout: String::new(),
            warnings: Vec::new(),
            exit: EXIT_OK,
        }
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.stdout.push_str(text.as_ref());
        self.stdout.push('\n');
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn search_rect(config: &Config) -> Rectangle {
    config
        .spectrum
        .as_ref()
        .and_then(|s| s.rect)
        .map(|r| Rectangle {
            re_min: r.re_min,
            re_max: r.re_max,
            im_min: r.im_min,
            im_max: r.im_max,
        })
        .unwrap_or_default()
}

fn grid_density(config: &Config) -> f64 {
    config
        .spectrum
        .as_ref()
        .and_then(|s| s.grid_density)
        .unwrap_or(DEFAULT_GRID_DENSITY)
}

fn flags(v: &[bool]) -> String {
    v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
}

pub fn analyze(config: &Config, kv_out: Option<&Path>) -> Result<Report, CliError> {
    let spec = config.model()?;
    let eq = solve(&spec)?;
    let report = assemble_report(&spec, &eq)?;
    let qp = quasipolynomial_at(&spec, &eq)?;
    let roots = quartic_roots(&report.tau0_quartic);
    let crossing = crossing_test(&qp);
    let tau = spec.tau();
    let res = spectrum(&qp, &search_rect(config), grid_density(config))?;

    let mut out = Report::new();
    out.warnings.extend(eq.warnings.iter().cloned());
    let s = eq.state;
    if eq.symmetric {
        out.line(format!(
            "equilibrium: x*={}, z*={} (symmetric)",
            output::sig10(s.x1),
            output::sig10(s.z1)
        ));
    } else {
        out.line(format!(
            "equilibrium: x1*={}, x2*={}, z1*={}, z2*={}",
            output::sig10(s.x1),
            output::sig10(s.x2),
            output::sig10(s.z1),
            output::sig10(s.z2)
        ));
    }
    out.line(format!("residual_norm: {:e}", eq.residual_norm));
    out.line(format!("local_max: firm1={} firm2={}", eq.local_max[0], eq.local_max[1]));
    for (i, h) in report.hessian.iter().enumerate() {
        out.line(format!(
            "hessian firm{}: determinant_dominance={} diagonal_dominance={}",
            i + 1,
            h.determinant_dominance,
            h.diagonal_dominance
        ));
    }
    for (i, p) in report.primitive.iter().enumerate() {
        out.line(format!(
            "primitive firm{}: fine_convex={} cost_convex={} strategic_substitute={} revenue_slope={}",
            i + 1,
            p.fine_convex,
            p.cost_convex,
            p.strategic_substitute,
            p.revenue_slope
        ));
    }
    let m = report.equal_marginal;
    out.line(format!(
        "symmetry: marginal_cost={} cost_curvature={} audit_probability={} quantity_speeds={} declaration_speeds={}",
        m.marginal_cost, m.cost_curvature, m.audit_probability, m.quantity_speeds, m.declaration_speeds
    ));
    if let Some(c) = report.linear_demand_condition {
        out.line(format!("linear_demand_condition: {c}"));
    }
    let q = report.tau0_quartic;
    out.line(format!("tau0 quartic: a3={} a2={} a1={} a0={}", q.a3, q.a2, q.a1, q.a0));
    out.line(format!(
        "tau0 roots: {}",
        roots.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect::<Vec<_>>().join(", ")
    ));
    let rh = report.routh_hurwitz;
    out.line(format!(
        "routh_hurwitz: {} (alpha0>0={} alpha1>0={} alpha3>0={} product={})",
        rh.holds(),
        rh.alpha0_positive,
        rh.alpha1_positive,
        rh.alpha3_positive,
        rh.hurwitz_product
    ));
    let crossing_text = match &crossing {
        Crossing::NoCrossings => "none".to_string(),
        Crossing::CrossingCandidates(w) => format!(
            "candidates at omega={}",
            w.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
        ),
    };
    out.line(format!("crossing: {crossing_text}"));
    out.line(format!("conditions: {}", report.verdict.as_str()));
    for note in &report.notes {
        out.line(format!("note: {note}"));
    }
    let abscissa = res.spectral_abscissa.unwrap_or(f64::NEG_INFINITY);
    out.line(format!(
        "spectral_abscissa: {abscissa} (tau={tau}, count_verified={})",
        res.count_verified
    ));
    let verdict = if report.verdict == Verdict::DelayIndependentStable {
        "delay-independent asymptotically stable".to_string()
    } else if !res.count_verified {
        out.warnings.push(res.hint.clone().unwrap_or_else(|| "root count not verified".into()));
        out.exit = EXIT_VERIFICATION;
        format!("inconclusive at tau={tau} (root count not verified)")
    } else {
        let (stability, warning) = scan::classify(abscissa);
        out.warnings.extend(warning);
        match stability {
            Stability::Stable => format!("asymptotically stable at tau={tau} (spectral abscissa {abscissa} < 0)"),
            Stability::Unstable => format!("unstable at tau={tau} (spectral abscissa {abscissa} >= 0)"),
        }
    };
    out.line(format!("verdict: {verdict}"));

    if let Some(path) = kv_out {
        let mut kv: Vec<(String, String)> = vec![
            ("x1".into(), s.x1.to_string()),
            ("x2".into(), s.x2.to_string()),
            ("z1".into(), s.z1.to_string()),
            ("z2".into(), s.z2.to_string()),
            ("residual_norm".into(), eq.residual_norm.to_string()),
            ("local_max".into(), flags(&eq.local_max)),
            ("symmetric".into(), eq.symmetric.to_string()),
        ];
        for (i, h) in report.hessian.iter().enumerate() {
            kv.push((format!("hessian_firm{}", i + 1), flags(&[h.determinant_dominance, h.diagonal_dominance])));
        }
        kv.extend([
            ("quartic".into(), format!("{},{},{},{}", q.a3, q.a2, q.a1, q.a0)),
            ("routh_hurwitz".into(), rh.holds().to_string()),
            ("crossing".into(), crossing_text),
            ("conditions".into(), report.verdict.as_str().into()),
            ("spectral_abscissa".into(), abscissa.to_string()),
            ("count_verified".into(), res.count_verified.to_string()),
            ("verdict".into(), verdict),
        ]);
        write_file(path, &output::key_values(&kv))?;
    }
    Ok(out)
}

/// Without delay the characteristic function is the quartic, so the window is
/// widened to hold all four roots; the seed grid is kept near 200 x 200.
fn cover_quartic(qp: &Quasipolynomial, rect: Rectangle, density: f64) -> (Rectangle, f64) {
    let roots = quartic_roots(&tau0_quartic(qp));
    let mut r = rect;
    for z in roots {
        r.re_min = r.re_min.min(z.re - 1.0);
        r.re_max = r.re_max.max(z.re + 1.0);
        r.im_min = r.im_min.min(z.im - 1.0);
        r.im_max = r.im_max.max(z.im + 1.0);
    }
    if r == rect {
        (rect, density)
    } else {
        (r, density.min(200.0 / r.width().max(r.height())))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpectrumArgs {
    pub taus: Option<Vec<f64>>,
    pub rect: Option<Rectangle>,
    pub grid_density: Option<f64>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

pub fn spectrum_cmd(config: &Config, args: &SpectrumArgs) -> Result<Report, CliError> {
    let spec = config.model()?;
    let eq = solve(&spec)?;
    let qp = quasipolynomial_at(&spec, &eq)?;
    let mut out = Report::new();
    let mut taus = args
        .taus
        .clone()
        .or_else(|| config.spectrum.as_ref().and_then(|s| s.taus.clone()))
        .unwrap_or_default();
    if taus.is_empty() {
        out.warnings.push("notice: no delays given; using tau=0".into());
        taus.push(0.0);
    }
    if let Some(t) = taus.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::Validation(format!("delay {t} must be nonnegative")));
    }
    let rect = args.rect.unwrap_or_else(|| search_rect(config));
    rect.validate()?;
    let density = args.grid_density.unwrap_or_else(|| grid_density(config));
    let results = taus
        .par_iter()
        .map(|&tau| {
            let (r, d) = if tau == 0.0 { cover_quartic(&qp, rect, density) } else { (rect, density) };
            spectrum(&qp.with_tau(tau), &r, d)
        })
        .collect::<duopoly_core::Result<Vec<_>>>()?;
    for res in &results {
        if !res.count_verified {
            out.warnings.push(format!(
                "warning: tau={}: {}",
                res.tau,
                res.hint.as_deref().unwrap_or("root count not verified")
            ));
            out.exit = EXIT_VERIFICATION;
        }
    }
    let csv = output::spectrum_csv(&results);
    match &args.csv {
        Some(path) => write_file(path, &csv)?,
        None => out.stdout.push_str(&csv),
    }
    if let Some(path) = &args.svg {
        write_file(path, &output::spectrum_svg(&results))?;
    }
    if args.csv.is_some() {
        for res in &results {
            out.line(format!(
                "tau={}: {} roots, spectral_abscissa={}, count_verified={}",
                res.tau,
                res.all_roots().map(|r| r.multiplicity).sum::<usize>(),
                res.spectral_abscissa.map_or("none".into(), |a| a.to_string()),
                res.count_verified
            ));
        }
    }
    Ok(out)
}

pub fn simulate(config: &Config, csv: Option<&Path>) -> Result<Report, CliError> {
    let section = config
        .simulate
        .ok_or_else(|| CliError::Config {
            key: "simulate".into(),
            message: "section required by the simulate command".into(),
        })?;
    let spec = config.model()?;
    let eq = solve(&spec)?;
    let initial = config.initial_state(&eq.state).expect("simulate section present");
    let step = section.step.unwrap_or_else(|| default_step(spec.tau()));
    let traj = dde::integrate_with_reference(&spec, initial, section.t_end, step, Some(eq.state))?;
    let text = output::trajectory_csv(&traj, HISTORY_CONVENTION);
    let mut out = Report::new();
    match csv {
        Some(path) => {
            write_file(path, &text)?;
            out.line(text.lines().last().unwrap_or_default().trim_start_matches("# "));
            if let Some(d) = traj.final_distance() {
                out.line(format!("final distance: {d:e}"));
            }
        }
        None => out.stdout.push_str(&text),
    }
    Ok(out)
}

/// Summary lines naming each bracketed verdict change.
pub fn boundary_lines(res: &ScanResult) -> Vec<String> {
    if res.brackets.is_empty() {
        return vec!["boundary: none in range".into()];
    }
    res.brackets
        .iter()
        .map(|b| {
            let (lo, hi) = if b.lo <= b.hi { (b.lo, b.hi) } else { (b.hi, b.lo) };
            format!("boundary: {lo} < {}0 < {hi}", res.param)
        })
        .collect()
}

pub fn scan_cmd(config: &Config, csv: Option<&Path>) -> Result<Report, CliError> {
    let section = config.scan.clone().ok_or_else(|| CliError::Config {
        key: "scan".into(),
        message: "section required by the scan command".into(),
    })?;
    let spec = config.model()?;
    let opts = ScanOptions {
        rect: search_rect(config),
        grid_density: grid_density(config),
        refine_tol: section.tol,
    };
    let res = scan_parameter(&spec, &section.param, &linspace(section.from, section.to, section.points), &opts)?;
    let mut out = Report::new();
    for s in &res.samples {
        if let Some(why) = &s.skipped {
            out.warnings.push(format!("warning: {}={}: skipped: {why}", res.param, s.value));
        }
        for w in &s.warnings {
            out.warnings.push(format!("warning: {}={}: {w}", res.param, s.value));
        }
    }
    let text = output::scan_csv(&res);
    match csv {
        Some(path) => write_file(path, &text)?,
        None => {
            let mut body = String::new();
            for line in text.lines().filter(|l| !l.starts_with('#')) {
                let _ = writeln!(body, "{line}");
            }
            out.stdout.push_str(&body);
        }
    }
    for line in boundary_lines(&res) {
        out.line(line);
    }
    Ok(out)
}
