//! Characteristic roots: exact quartic at zero delay, imaginary-axis crossing
//! test, and verified root location of the quasipolynomial in rectangles.
//!
//! Completeness is certified with the argument principle. Evaluations use
//! [`Quasipolynomial::eval_scaled`], so residuals are reported relative to the
//! scaled function (the exponential term is divided out where it exceeds one).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linearization::{tau0_quartic, QuarticCoefficients, Quasipolynomial};

pub const DEFAULT_GRID_DENSITY: f64 = 20.0;
pub const NEWTON_MAX_ITERATIONS: usize = 50;
pub const NEWTON_STEP_TOL: f64 = 1e-12;
pub const DEDUP_TOL: f64 = 1e-6;
/// Accept a root when `|Q(λ)| < RESIDUAL_REL_TOL · max(1 + |λ|⁴, m)`, with `m`
/// the size of the two terms of `Q` at `λ`.
pub const RESIDUAL_REL_TOL: f64 = 1e-8;
/// A winding estimate must lie this close to an integer.
pub const WINDING_SNAP: f64 = 0.25;
pub const MAX_SUBDIVISION_DEPTH: usize = 16;
/// Boxes holding at most this many known zeros are re-checked for clusters.
const CLUSTER_RECHECK_MAX: usize = 4;
const MAX_GRID_NODES: usize = 40_000_000;
const MAX_BOUNDARY_EVALS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Default for Rectangle {
    fn default() -> Self {
        Self {
            re_min: -10.0,
            re_max: 1.0,
            im_min: -50.0,
            im_max: 50.0,
        }
    }
}

impl Rectangle {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let r = Self {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b, c, d] = [self.re_min, self.re_max, self.im_min, self.im_max];
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::InvalidRectangle("bounds must be finite".into()));
        }
        if a >= b {
            return Err(Error::InvalidRectangle(format!("re_min {a} must be below re_max {b}")));
        }
        if c >= d {
            return Err(Error::InvalidRectangle(format!("im_min {c} must be below im_max {d}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn expanded(&self, d: f64) -> Self {
        Self {
            re_min: self.re_min - d,
            re_max: self.re_max + d,
            im_min: self.im_min - d,
            im_max: self.im_max + d,
        }
    }

    fn scale(&self) -> f64 {
        self.width().max(self.height()).max(1.0)
    }

    /// Counter-clockwise corners starting bottom-left.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Four quadrants split at `(re, im)`.
    fn split(&self, re: f64, im: f64) -> [Rectangle; 4] {
        [
            Rectangle { re_max: re, im_max: im, ..*self },
            Rectangle { re_min: re, im_max: im, ..*self },
            Rectangle { re_max: re, im_min: im, ..*self },
            Rectangle { re_min: re, im_min: im, ..*self },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    /// `|Q(λ)|` of the scaled function.
    pub residual: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub tau: f64,
    /// Search window actually used (may be nudged outward off a boundary root).
    pub rectangle: Rectangle,
    /// Roots inside `rectangle`, sorted by decreasing real part.
    pub roots: Vec<Root>,
    /// Roots right of `rectangle`, filled only by [`spectrum`].
    pub right_of_rectangle: Vec<Root>,
    /// Argument-principle count for `rectangle`, when it settled.
    pub winding_count: Option<i64>,
    pub count_verified: bool,
    /// Maximum real part over all listed roots; `None` when none were found.
    pub spectral_abscissa: Option<f64>,
    pub hint: Option<String>,
}

impl SpectrumResult {
    pub fn all_roots(&self) -> impl Iterator<Item = &Root> {
        self.right_of_rectangle.iter().chain(self.roots.iter())
    }

    fn refresh_abscissa(&mut self) {
        self.spectral_abscissa = self.all_roots().map(|r| r.value.re).reduce(f64::max);
    }
}

// ---------------------------------------------------------------- polynomials

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Rounding-noise scale of evaluating `coeffs` at `z`.
fn noise(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs()) * f64::EPSILON
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

/// All complex roots of a real polynomial given in ascending coefficient order.
///
/// Aberth–Ehrlich simultaneous iteration, followed by collapsing clusters of a
/// multiple root onto the root of the matching derivative, and conjugate pairing.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    for v in c.iter_mut() {
        *v /= lead;
    }
    // Fujiwara bound
    let radius = (1..=n)
        .map(|k| (c[n - k].abs()).powf(1.0 / k as f64))
        .fold(0.0, f64::max)
        .max(1e-3)
        * 2.0;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..1000 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let (p, dp) = horner(&c, z[i]);
            if p.norm() <= noise(&c, z[i]) {
                continue;
            }
            let sum: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let denom = dp - p * sum;
            let w = if denom.norm() == 0.0 {
                Complex64::new(1e-8 * (1.0 + z[i].norm()), 0.0)
            } else {
                p / denom
            };
            z[i] -= w;
            worst = worst.max(w.norm() / (1.0 + z[i].norm()));
        }
        if worst < 4.0 * f64::EPSILON {
            break;
        }
    }
    collapse_clusters(&c, &mut z);
    pair_conjugates(&mut z);
    z
}

fn collapse_clusters(c: &[f64], z: &mut [Complex64]) {
    let n = z.len();
    let mut group = vec![usize::MAX; n];
    for i in 0..n {
        if group[i] != usize::MAX {
            continue;
        }
        group[i] = i;
        let mut stack = vec![i];
        while let Some(k) = stack.pop() {
            for j in 0..n {
                if group[j] == usize::MAX && (z[j] - z[k]).norm() < 1e-3 * (1.0 + z[k].norm()) {
                    group[j] = i;
                    stack.push(j);
                }
            }
        }
    }
    for g in 0..n {
        let members: Vec<usize> = (0..n).filter(|&j| group[j] == g).collect();
        let m = members.len();
        if m < 2 {
            continue;
        }
        let mut d = c.to_vec();
        for _ in 1..m {
            d = derivative(&d);
        }
        let mut center = members.iter().map(|&j| z[j]).sum::<Complex64>() / m as f64;
        for _ in 0..30 {
            let (p, dp) = horner(&d, center);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            center -= step;
            if step.norm() <= f64::EPSILON * (1.0 + center.norm()) {
                break;
            }
        }
        let (p, _) = horner(c, center);
        if p.norm() <= 100.0 * noise(c, center) {
            for &j in &members {
                z[j] = center;
            }
        }
    }
}

fn pair_conjugates(z: &mut [Complex64]) {
    let n = z.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        done[i] = true;
        let target = z[i].conj();
        let partner = (0..n)
            .filter(|&j| !done[j])
            .min_by(|&a, &b| (z[a] - target).norm().total_cmp(&(z[b] - target).norm()));
        match partner {
            Some(j) if (z[j] - target).norm() < (z[i] - target).norm() => {
                let mean = (z[i] + z[j].conj()) * 0.5;
                z[i] = mean;
                z[j] = mean.conj();
                done[j] = true;
            }
            _ => z[i].im = 0.0,
        }
    }
}

/// Roots of the monic quartic, sorted by decreasing real part.
pub fn quartic_roots(q: &QuarticCoefficients) -> [Complex64; 4] {
    let mut roots = polynomial_roots(&q.ascending());
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    [roots[0], roots[1], roots[2], roots[3]]
}

// ------------------------------------------------------------------ crossings

#[derive(Debug, Clone, PartialEq)]
pub enum Crossing {
    NoCrossings,
    /// Frequencies `ω > 0` with `|p1 p2 (iω)| = |g1 g2 (iω)|`.
    CrossingCandidates(Vec<f64>),
}

/// `h(s) = |p1 p2 (iω)|² − |g1 g2 (iω)|²` in `s = ω²`, ascending coefficients.
pub fn crossing_polynomial(qp: &Quasipolynomial) -> [f64; 5] {
    let p_mod = |a1: f64, a0: f64| [a0 * a0, a1 * a1 - 2.0 * a0, 1.0];
    let g_mod = |c1: f64, c0: f64| [c0 * c0, c1 * c1];
    let p1 = p_mod(qp.p1.linear, qp.p1.constant);
    let p2 = p_mod(qp.p2.linear, qp.p2.constant);
    let g1 = g_mod(qp.g1.slope, qp.g1.constant);
    let g2 = g_mod(qp.g2.slope, qp.g2.constant);
    let mut h = [0.0; 5];
    for i in 0..3 {
        for j in 0..3 {
            h[i + j] += p1[i] * p2[j];
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            h[i + j] -= g1[i] * g2[j];
        }
    }
    h
}

pub fn crossing_test(qp: &Quasipolynomial) -> Crossing {
    let h = crossing_polynomial(qp);
    let mut omegas: Vec<f64> = polynomial_roots(&h)
        .into_iter()
        .filter(|s| s.im.abs() <= 1e-6 * (1.0 + s.norm()))
        .map(|s| polish_real(&h, s.re))
        .filter(|&s| s > 0.0)
        .map(f64::sqrt)
        .collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    if omegas.is_empty() {
        Crossing::NoCrossings
    } else {
        Crossing::CrossingCandidates(omegas)
    }
}

fn polish_real(c: &[f64], mut s: f64) -> f64 {
    for _ in 0..20 {
        let (p, dp) = horner(c, Complex64::new(s, 0.0));
        if dp.re == 0.0 || p.re.abs() <= noise(c, Complex64::new(s, 0.0)) {
            break;
        }
        let next = s - p.re / dp.re;
        if !next.is_finite() || (next - s).abs() > 1e-3 * (1.0 + s.abs()) {
            break;
        }
        s = next;
    }
    s
}

// --------------------------------------------------------------- root finding

/// Half-width of the box used to resolve a multiple zero near `z`.
fn cluster_radius(z: Complex64, tau: f64) -> f64 {
    let r = 1e-3 * (1.0 + z.norm());
    if tau > 0.0 {
        r.min(0.5 / tau)
    } else {
        r
    }
}

/// Zeros counted with multiplicity in a small box around `z`.
fn local_multiplicity(qp: &Quasipolynomial, z: Complex64) -> Option<usize> {
    let h = cluster_radius(z, qp.tau);
    let rect = Rectangle {
        re_min: z.re - h,
        re_max: z.re + h,
        im_min: z.im - h,
        im_max: z.im + h,
    };
    winding_number(qp, &rect).ok().and_then(|(w, _)| usize::try_from(w).ok())
}

/// Newton's method; when convergence is only linear (a multiple zero) the
/// multiplicity is estimated from the step ratio, the iterate is refined with
/// the modified step, and the multiplicity is confirmed by a local winding count.
fn newton(qp: &Quasipolynomial, start: Complex64) -> Option<Root> {
    let mut z = start;
    let mut converged = false;
    let mut prev = f64::INFINITY;
    let mut ratio = 0.0;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let e = qp.eval_scaled(z);
        if e.value.norm() == 0.0 {
            converged = e.derivative.norm() > 1e-8 * e.magnitude.max(f64::MIN_POSITIVE);
            break;
        }
        if e.derivative.norm() == 0.0 {
            break;
        }
        let step = e.value / e.derivative;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        let size = step.norm();
        ratio = size / prev;
        prev = size;
        if size < NEWTON_STEP_TOL {
            converged = true;
            break;
        }
    }
    let mut multiplicity = 1;
    if !converged {
        if ratio > 0.0 && ratio < 1.0 {
            let m = (1.0 / (1.0 - ratio)).round().clamp(1.0, 8.0);
            if m >= 2.0 {
                let mut last = f64::INFINITY;
                for _ in 0..NEWTON_MAX_ITERATIONS {
                    let e = qp.eval_scaled(z);
                    if e.value.norm() == 0.0 || e.derivative.norm() == 0.0 {
                        break;
                    }
                    let step = e.value / e.derivative * m;
                    if step.norm() >= last {
                        break;
                    }
                    last = step.norm();
                    z -= step;
                    if last < NEWTON_STEP_TOL {
                        break;
                    }
                }
            }
        }
        multiplicity = local_multiplicity(qp, z)?;
        if multiplicity == 0 {
            return None;
        }
    }
    let e = qp.eval_scaled(z);
    let residual = e.value.norm();
    (residual < residual_bound(z, e.magnitude)).then_some(Root {
        value: z,
        residual,
        multiplicity,
    })
}

fn residual_bound(z: Complex64, magnitude: f64) -> f64 {
    RESIDUAL_REL_TOL * (1.0 + z.norm().powi(4)).max(magnitude)
}

fn merge_radius(root: &Root, tau: f64) -> f64 {
    if root.multiplicity > 1 {
        cluster_radius(root.value, tau)
    } else {
        DEDUP_TOL
    }
}

fn insert_unique(roots: &mut Vec<Root>, candidate: Root, tau: f64) {
    let near = |r: &Root| (r.value - candidate.value).norm() < merge_radius(r, tau).max(merge_radius(&candidate, tau));
    match roots.iter().position(near) {
        None => roots.push(candidate),
        Some(i) => {
            let existing = roots[i];
            let better = candidate.multiplicity > existing.multiplicity
                || (candidate.multiplicity == existing.multiplicity && candidate.residual < existing.residual);
            if better {
                roots.retain(|r| !near(r));
                roots.push(candidate);
            }
        }
    }
}

fn polish_seeds(qp: &Quasipolynomial, seeds: &[Complex64], rect: &Rectangle, roots: &mut Vec<Root>) {
    let found: Vec<Root> = seeds
        .par_iter()
        .filter_map(|&s| newton(qp, s))
        .filter(|r| rect.contains(r.value))
        .collect();
    for r in found {
        insert_unique(roots, r, qp.tau);
    }
}

fn grid_seeds(qp: &Quasipolynomial, rect: &Rectangle, density: f64) -> Result<Vec<Complex64>> {
    let nx = ((rect.width() * density).ceil() as usize).max(1) + 1;
    let ny = ((rect.height() * density).ceil() as usize).max(1) + 1;
    if nx.saturating_mul(ny) > MAX_GRID_NODES {
        return Err(Error::InvalidRectangle(format!(
            "grid of {nx}x{ny} nodes exceeds the limit; lower grid_density or shrink the rectangle"
        )));
    }
    let dx = rect.width() / (nx - 1) as f64;
    let dy = rect.height() / (ny - 1) as f64;
    let node = |i: usize, j: usize| Complex64::new(rect.re_min + i as f64 * dx, rect.im_min + j as f64 * dy);
    let signs: Vec<Vec<(bool, bool)>> = (0..ny)
        .into_par_iter()
        .map(|j| {
            (0..nx)
                .map(|i| {
                    let v = qp.eval_scaled(node(i, j)).value;
                    (v.re >= 0.0, v.im >= 0.0)
                })
                .collect()
        })
        .collect();
    let seeds = (0..ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            let signs = &signs;
            (0..nx - 1).filter_map(move |i| {
                let c = [signs[j][i], signs[j][i + 1], signs[j + 1][i], signs[j + 1][i + 1]];
                let re_change = c.iter().any(|s| s.0) && c.iter().any(|s| !s.0);
                let im_change = c.iter().any(|s| s.1) && c.iter().any(|s| !s.1);
                (re_change && im_change).then(|| node(i, j) + Complex64::new(0.5 * dx, 0.5 * dy))
            })
        })
        .collect();
    Ok(seeds)
}

// ------------------------------------------------------------ argument principle

#[derive(Clone, Copy)]
struct Sample {
    z: Complex64,
    value: Complex64,
    ratio: Complex64,
}

/// Boundary passes too close to a zero to integrate reliably.
struct NearZero;

fn sample(qp: &Quasipolynomial, z: Complex64, evals: &mut usize) -> std::result::Result<Sample, NearZero> {
    *evals += 1;
    if *evals > MAX_BOUNDARY_EVALS {
        return Err(NearZero);
    }
    let e = qp.eval_scaled(z);
    if e.value.norm() <= 1e-10 * e.magnitude || e.value.norm() == 0.0 {
        return Err(NearZero);
    }
    Ok(Sample {
        z,
        value: e.value,
        ratio: e.derivative / e.value,
    })
}

/// `(quadrature estimate, accumulated-argument count)`.
fn winding_once(qp: &Quasipolynomial, rect: &Rectangle, tol: f64) -> std::result::Result<(f64, i64), NearZero> {
    let corners = rect.corners();
    let perimeter = 2.0 * (rect.width() + rect.height());
    let mut integral = Complex64::new(0.0, 0.0);
    let mut arg_total = 0.0;
    let mut evals = 0usize;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let len = (b - a).norm();
        let pieces = ((len * 4.0).ceil() as usize).max(16);
        let point = |t: f64| a + (b - a) * t;
        let mut stack: Vec<(f64, f64, Sample, Sample)> = Vec::new();
        let mut left = sample(qp, point(0.0), &mut evals)?;
        for p in 0..pieces {
            let t1 = (p + 1) as f64 / pieces as f64;
            let right = sample(qp, point(t1), &mut evals)?;
            let t0 = p as f64 / pieces as f64;
            stack.push((t0, t1, left, right));
            left = right;
            while let Some((t0, t1, s0, s1)) = stack.pop() {
                let tm = 0.5 * (t0 + t1);
                let sm = sample(qp, point(tm), &mut evals)?;
                let dz = s1.z - s0.z;
                let simpson = dz / 6.0 * (s0.ratio + sm.ratio * 4.0 + s1.ratio);
                let trapezoid = dz / 4.0 * (s0.ratio + sm.ratio * 2.0 + s1.ratio);
                let d0 = (sm.value / s0.value).arg();
                let d1 = (s1.value / sm.value).arg();
                let seg_tol = (tol * (t1 - t0) * len / perimeter).max(1e-9);
                // the quadrature angle must agree with the principal increments,
                // otherwise a fast-rotating segment can alias by whole turns
                let resolved = d0.abs() < 0.5
                    && d1.abs() < 0.5
                    && (simpson.im - (d0 + d1)).abs() < 0.1
                    && (simpson - trapezoid).norm() <= seg_tol;
                if resolved {
                    integral += simpson;
                    arg_total += d0 + d1;
                } else {
                    if t1 - t0 < 1e-13 {
                        return Err(NearZero);
                    }
                    // right half first so the left half is processed next
                    stack.push((tm, t1, sm, s1));
                    stack.push((t0, tm, s0, sm));
                }
            }
        }
    }
    let tau = std::f64::consts::TAU;
    Ok((integral.im / tau, (arg_total / tau).round() as i64))
}

/// Number of zeros inside `rect`, with the rectangle actually integrated over.
///
/// When the boundary runs through or next to a zero, the rectangle is pushed
/// outward by a small multiple of `1e-6` of its size and retried.
pub fn winding_number(qp: &Quasipolynomial, rect: &Rectangle) -> Result<(i64, Rectangle)> {
    rect.validate()?;
    let mut last_estimate = f64::NAN;
    for attempt in 0..6 {
        let used = if attempt == 0 {
            *rect
        } else {
            rect.expanded(1e-6 * rect.scale() * (attempt as f64).powi(2))
        };
        let mut tol = 0.05;
        for _ in 0..5 {
            match winding_once(qp, &used, tol) {
                Ok((estimate, count)) => {
                    last_estimate = estimate;
                    let snapped = estimate.round();
                    if (estimate - snapped).abs() < WINDING_SNAP && snapped as i64 == count {
                        return Ok((count, used));
                    }
                    tol *= 0.25;
                }
                Err(NearZero) => break,
            }
        }
    }
    Err(Error::WindingUnresolved { estimate: last_estimate })
}

/// Zeros inside `rect`, counted with multiplicity.
fn count_inside(roots: &[Root], rect: &Rectangle) -> usize {
    roots.iter().filter(|r| rect.contains(r.value)).map(|r| r.multiplicity).sum()
}

/// Locate every zero in `rect` missing from `roots` by recursive quadrisection.
/// Returns whether the final count matched the winding number everywhere.
fn fill_missing(
    qp: &Quasipolynomial,
    rect: &Rectangle,
    roots: &mut Vec<Root>,
    known_winding: Option<(i64, Rectangle)>,
    depth: usize,
) -> Result<bool> {
    let (winding, used) = match known_winding {
        Some(w) => w,
        None => match winding_number(qp, rect) {
            Ok(w) => w,
            Err(Error::WindingUnresolved { .. }) => return Ok(false),
            Err(e) => return Err(e),
        },
    };
    let expected = usize::try_from(winding).unwrap_or(0);
    let inside = count_inside(roots, &used);
    if inside == expected {
        return Ok(true);
    }
    if inside > expected {
        return Ok(false);
    }
    let n = 6;
    let seeds: Vec<Complex64> = (0..n)
        .flat_map(|i| {
            (0..n).map(move |j| {
                Complex64::new(
                    used.re_min + used.width() * (i as f64 + 0.5) / n as f64,
                    used.im_min + used.height() * (j as f64 + 0.5) / n as f64,
                )
            })
        })
        .collect();
    polish_seeds(qp, &seeds, &used, roots);
    if count_inside(roots, &used) == expected {
        return Ok(true);
    }
    // zeros closer than the working precision can separate form a cluster
    if roots.iter().filter(|r| used.contains(r.value)).count() <= CLUSTER_RECHECK_MAX {
        for r in roots.iter_mut().filter(|r| used.contains(r.value)) {
            if let Some(m) = local_multiplicity(qp, r.value) {
                r.multiplicity = r.multiplicity.max(m);
            }
        }
        if count_inside(roots, &used) == expected {
            return Ok(true);
        }
    }
    if depth == 0 {
        return Ok(false);
    }
    // split off-center and away from known roots
    let keep_off = 1e-3 * used.width().min(used.height());
    let nearby = |re: f64, im: f64| {
        roots
            .iter()
            .any(|r| (r.value.re - re).abs() < keep_off || (r.value.im - im).abs() < keep_off)
    };
    let mut split = (
        used.re_min + 0.5 * used.width(),
        used.im_min + 0.5 * used.height(),
    );
    for k in 0..8 {
        let f = 0.5 + 0.0371 * (k as f64) * if k % 2 == 0 { 1.0 } else { -1.0 };
        let cand = (used.re_min + f * used.width(), used.im_min + (1.0 - f) * used.height());
        if !nearby(cand.0, cand.1) {
            split = cand;
            break;
        }
    }
    let mut complete = true;
    for quadrant in used.split(split.0, split.1) {
        complete &= fill_missing(qp, &quadrant, roots, None, depth - 1)?;
    }
    Ok(complete && count_inside(roots, &used) == expected)
}

/// Roots of `qp` inside `rect`, seeded from a sign-change grid with
/// `grid_density` points per unit length and verified by the argument principle.
pub fn quasipoly_roots(qp: &Quasipolynomial, rect: &Rectangle, grid_density: f64) -> Result<SpectrumResult> {
    rect.validate()?;
    if !(grid_density.is_finite() && grid_density > 0.0) {
        return Err(Error::InvalidRectangle(format!("grid density must be positive, got {grid_density}")));
    }
    let mut seeds = grid_seeds(qp, rect, grid_density)?;
    if qp.tau == 0.0 {
        seeds.extend(quartic_roots(&tau0_quartic(qp)));
    }
    let mut roots = Vec::new();
    polish_seeds(qp, &seeds, &rect.expanded(1e-6 * rect.scale()), &mut roots);

    let (winding, used, verified) = match winding_number(qp, rect) {
        Ok((w, used)) => {
            let ok = fill_missing(qp, &used, &mut roots, Some((w, used)), MAX_SUBDIVISION_DEPTH)?;
            (Some(w), used, ok)
        }
        Err(Error::WindingUnresolved { .. }) => (None, *rect, false),
        Err(e) => return Err(e),
    };
    roots.retain(|r| used.contains(r.value));
    roots.sort_by(|a, b| b.value.re.total_cmp(&a.value.re).then(b.value.im.total_cmp(&a.value.im)));
    let counted = count_inside(&roots, &used);
    let verified = verified && winding == Some(counted as i64);
    let hint = (!verified).then(|| {
        format!(
            "root count not verified (found {}, winding {}); retry with grid_density {}",
            counted,
            winding.map_or("unresolved".to_string(), |w| w.to_string()),
            2.0 * grid_density
        )
    });
    let mut result = SpectrumResult {
        tau: qp.tau,
        rectangle: used,
        roots,
        right_of_rectangle: Vec::new(),
        winding_count: winding,
        count_verified: verified,
        spectral_abscissa: None,
        hint,
    };
    result.refresh_abscissa();
    Ok(result)
}

/// Radius `R` such that every zero with `Re λ ≥ re_min` satisfies `|λ| ≤ R`.
pub fn right_region_radius(qp: &Quasipolynomial, re_min: f64) -> f64 {
    let prod = qp.product_coefficients();
    let coupling = qp.coupling_coefficients();
    let weight = (-re_min * qp.tau).exp();
    let excess = |r: f64| {
        let lower: f64 = (0..4).map(|k| prod[k].abs() * r.powi(k as i32)).sum::<f64>()
            + weight * (0..3).map(|k| coupling[k].abs() * r.powi(k as i32)).sum::<f64>();
        r.powi(4) - lower
    };
    let mut hi = 1.0;
    while excess(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Region right of `re_min` that can still hold zeros, or `None` when provably empty.
pub fn right_region(qp: &Quasipolynomial, re_min: f64) -> Option<Rectangle> {
    let r = right_region_radius(qp, re_min);
    let edge = r * 1.05 + 1.0;
    (r.is_finite() && r > re_min).then_some(Rectangle {
        re_min,
        re_max: edge,
        im_min: -edge,
        im_max: edge,
    })
}

/// Maximum real part of the zeros in `rect`.
///
/// Fails with [`Error::RectangleTooSmall`] if any zero lies right of `rect`,
/// and with [`Error::IncompleteSpectrum`] if the roots found do not account for
/// the winding count. Returns `-inf` when `rect` contains no zero at all.
pub fn spectral_abscissa(qp: &Quasipolynomial, rect: &Rectangle) -> Result<f64> {
    rect.validate()?;
    if let Some(region) = right_region(qp, rect.re_max) {
        let (count, _) = winding_number(qp, &region)?;
        if count != 0 {
            return Err(Error::RectangleTooSmall {
                re_max: rect.re_max,
                count,
                suggested_re_max: region.re_max,
            });
        }
    }
    let res = quasipoly_roots(qp, rect, DEFAULT_GRID_DENSITY)?;
    if !res.count_verified {
        return Err(Error::IncompleteSpectrum {
            found: res.roots.iter().map(|r| r.multiplicity).sum(),
            expected: res.winding_count.unwrap_or(-1),
        });
    }
    Ok(res.spectral_abscissa.unwrap_or(f64::NEG_INFINITY))
}

/// Roots in `rect` plus every zero right of it, so the abscissa is always
/// the true rightmost real part (or lies left of `rect.re_min` when `None`).
pub fn spectrum(qp: &Quasipolynomial, rect: &Rectangle, grid_density: f64) -> Result<SpectrumResult> {
    let mut res = quasipoly_roots(qp, rect, grid_density)?;
    let re_edge = res.rectangle.re_max;
    if let Some(region) = right_region(qp, re_edge) {
        let mut extra = Vec::new();
        if qp.tau == 0.0 {
            let seeds = quartic_roots(&tau0_quartic(qp));
            polish_seeds(qp, &seeds, &region, &mut extra);
        }
        let complete = fill_missing(qp, &region, &mut extra, None, MAX_SUBDIVISION_DEPTH)?;
        extra.retain(|r| r.value.re > re_edge);
        extra.sort_by(|a, b| b.value.re.total_cmp(&a.value.re).then(b.value.im.total_cmp(&a.value.im)));
        if !complete {
            res.count_verified = false;
            res.hint.get_or_insert_with(|| "zeros right of the rectangle could not all be located".into());
        }
        res.right_of_rectangle = extra;
        res.refresh_abscissa();
    }
    Ok(res)
}

/// [`spectrum`] at each delay, evaluated in parallel.
pub fn delay_sweep(qp: &Quasipolynomial, taus: &[f64], rect: &Rectangle, grid_density: f64) -> Result<Vec<SpectrumResult>> {
    taus.par_iter()
        .map(|&tau| spectrum(&qp.with_tau(tau), rect, grid_density))
        .collect()
}
