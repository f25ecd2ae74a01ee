//! One-parameter stability sweeps and bisection of verdict changes.

use rayon::prelude::*;

use crate::equilibrium::solve_warm;
use crate::error::{Error, Result};
use crate::linearization::{quasipolynomial_at, Quasipolynomial};
use crate::model::{ModelSpec, StateVector};
use crate::spectrum::{spectrum, Rectangle, DEFAULT_GRID_DENSITY};

/// Abscissae this close to zero are classified unstable, with a warning.
pub const TIE_TOL: f64 = 1e-8;
pub const MAX_BISECTION_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

/// Verdict from a spectral abscissa, plus a warning when it is a near tie.
pub fn classify(abscissa: f64) -> (Stability, Option<String>) {
    if abscissa.abs() < TIE_TOL {
        (
            Stability::Unstable,
            Some(format!("spectral abscissa {abscissa:e} within {TIE_TOL:e} of zero; treated as unstable")),
        )
    } else if abscissa < 0.0 {
        (Stability::Stable, None)
    } else {
        (Stability::Unstable, None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub rect: Rectangle,
    pub grid_density: f64,
    /// Bisect every bracket down to this width.
    pub refine_tol: Option<f64>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            rect: Rectangle::default(),
            grid_density: DEFAULT_GRID_DENSITY,
            refine_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub value: f64,
    /// `-inf` when every root lies left of the search rectangle.
    pub abscissa: Option<f64>,
    pub verdict: Option<Stability>,
    /// Reason the point was skipped.
    pub skipped: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub verdict_lo: Stability,
    pub verdict_hi: Stability,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo).abs()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub param: String,
    pub samples: Vec<ScanSample>,
    /// Verdict flips between consecutive evaluated samples, refined when requested.
    pub brackets: Vec<Bracket>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub estimate: f64,
    pub bracket: Bracket,
    pub iterations: usize,
}

/// Spectral abscissa of one quasipolynomial, with warnings.
pub fn abscissa_of(qp: &Quasipolynomial, opts: &ScanOptions) -> Result<(f64, Vec<String>)> {
    let res = spectrum(qp, &opts.rect, opts.grid_density)?;
    let mut warnings = Vec::new();
    if !res.count_verified {
        warnings.push(res.hint.clone().unwrap_or_else(|| "root count not verified".into()));
    }
    Ok((res.spectral_abscissa.unwrap_or(f64::NEG_INFINITY), warnings))
}

fn prepare(base: &ModelSpec, param: &str, value: f64, warm: Option<&StateVector>) -> Result<(Quasipolynomial, StateVector)> {
    let spec = base.with_param(param, value)?;
    let eq = solve_warm(&spec, warm)?;
    Ok((quasipolynomial_at(&spec, &eq)?, eq.state))
}

/// Verdict at every value of `param`; failing points are skipped, not fatal.
pub fn scan_parameter(base: &ModelSpec, param: &str, values: &[f64], opts: &ScanOptions) -> Result<ScanResult> {
    base.param(param)?;
    // equilibria follow the branch sequentially; spectra are independent
    let mut warm: Option<StateVector> = None;
    let prepared: Vec<std::result::Result<Quasipolynomial, String>> = values
        .iter()
        .map(|&v| match prepare(base, param, v, warm.as_ref()) {
            Ok((qp, state)) => {
                warm = Some(state);
                Ok(qp)
            }
            Err(e) => Err(e.to_string()),
        })
        .collect();
    let samples: Vec<ScanSample> = values
        .par_iter()
        .zip(prepared.par_iter())
        .map(|(&value, qp)| {
            let outcome = qp.as_ref().map_err(Clone::clone).and_then(|qp| abscissa_of(qp, opts).map_err(|e| e.to_string()));
            match outcome {
                Ok((abscissa, mut warnings)) => {
                    let (verdict, tie) = classify(abscissa);
                    warnings.extend(tie);
                    ScanSample {
                        value,
                        abscissa: Some(abscissa),
                        verdict: Some(verdict),
                        skipped: None,
                        warnings,
                    }
                }
                Err(reason) => ScanSample {
                    value,
                    abscissa: None,
                    verdict: None,
                    skipped: Some(reason),
                    warnings: Vec::new(),
                },
            }
        })
        .collect();

    let evaluated: Vec<(f64, Stability)> = samples.iter().filter_map(|s| s.verdict.map(|v| (s.value, v))).collect();
    let mut brackets: Vec<Bracket> = evaluated
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| Bracket {
            lo: w[0].0,
            hi: w[1].0,
            verdict_lo: w[0].1,
            verdict_hi: w[1].1,
        })
        .collect();
    if let Some(tol) = opts.refine_tol {
        for b in brackets.iter_mut() {
            *b = bisect_boundary(base, param, b.lo, b.hi, tol, opts)?.bracket;
        }
    }
    Ok(ScanResult {
        param: param.to_string(),
        samples,
        brackets,
    })
}

/// Bisection on a two-valued predicate until the bracket is at most `tol` wide.
pub fn bisect_by<F>(lo: f64, hi: f64, tol: f64, mut verdict: F) -> Result<Boundary>
where
    F: FnMut(f64) -> Result<Stability>,
{
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Precondition(format!("bisection tolerance must be positive, got {tol}")));
    }
    let abort = |lo: f64, hi: f64, e: Error| Error::BisectionAborted {
        lo,
        hi,
        reason: e.to_string(),
    };
    let v_lo = verdict(lo).map_err(|e| abort(lo, hi, e))?;
    let v_hi = verdict(hi).map_err(|e| abort(lo, hi, e))?;
    if v_lo == v_hi {
        return Err(Error::Precondition(format!(
            "verdicts at {lo} and {hi} are both {}; no boundary to bisect",
            v_lo.as_str()
        )));
    }
    let mut b = Bracket {
        lo,
        hi,
        verdict_lo: v_lo,
        verdict_hi: v_hi,
    };
    let mut iterations = 0;
    while b.width() > tol && iterations < MAX_BISECTION_ITERATIONS {
        assert_ne!(b.verdict_lo, b.verdict_hi, "bisection bracket lost its flip");
        let mid = b.midpoint();
        let v = verdict(mid).map_err(|e| abort(b.lo, b.hi, e))?;
        if v == b.verdict_lo {
            b.lo = mid;
        } else {
            b.hi = mid;
        }
        iterations += 1;
    }
    assert_ne!(b.verdict_lo, b.verdict_hi, "bisection bracket lost its flip");
    Ok(Boundary {
        estimate: b.midpoint(),
        bracket: b,
        iterations,
    })
}

/// Locate the verdict change of `param` inside `[lo, hi]`.
pub fn bisect_boundary(base: &ModelSpec, param: &str, lo: f64, hi: f64, tol: f64, opts: &ScanOptions) -> Result<Boundary> {
    base.param(param)?;
    let mut warm: Option<StateVector> = None;
    bisect_by(lo, hi, tol, |v| {
        let (qp, state) = prepare(base, param, v, warm.as_ref())?;
        warm = Some(state);
        Ok(classify(abscissa_of(&qp, opts)?.0).0)
    })
}

/// `n` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}
