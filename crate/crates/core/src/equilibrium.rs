//! Interior equilibrium of the first-order system: closed form for the
//! symmetric linear/hyperbolic families, damped Newton otherwise.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::model::{
    fine_argument, profit_gradient, profit_hessian, CostFamily, DemandFamily, Firm, ModelSpec,
    StateVector,
};

/// Residual (max-norm) below which a point is accepted as an equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Absolute tolerance used to flag symmetric equilibria.
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const MAX_HALVINGS: usize = 30;
/// Distance above which closed form and Newton are reported as disagreeing.
const CROSS_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    ClosedForm,
    Newton { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub state: StateVector,
    /// Max-norm of the four first-order residuals.
    pub residual_norm: f64,
    /// Second-order maximum conditions per firm.
    pub local_max: [bool; 2],
    pub symmetric: bool,
    pub method: SolveMethod,
    pub warnings: Vec<String>,
}

impl Equilibrium {
    fn assemble(spec: &ModelSpec, state: StateVector, method: SolveMethod) -> Result<Self> {
        check_feasible(&state)?;
        let residual_norm = max_norm(&residual(spec, &state)?);
        let mut warnings = Vec::new();
        for firm in Firm::BOTH {
            let evaded = fine_argument(spec, firm, &state)?;
            if evaded <= 0.0 {
                warnings.push(format!(
                    "firm {}: fine argument x p - z = {evaded:e} is not positive (over-declaration)",
                    firm.index() + 1
                ));
            }
        }
        let symmetric =
            (state.x1 - state.x2).abs() < SYMMETRY_TOL && (state.z1 - state.z2).abs() < SYMMETRY_TOL;
        Ok(Self {
            state,
            residual_norm,
            local_max: verify_local_max(spec, &state),
            symmetric,
            method,
            warnings,
        })
    }
}

fn check_feasible(s: &StateVector) -> Result<()> {
    if !s.is_finite() || s.x1 <= 0.0 || s.x2 <= 0.0 || s.z1 < 0.0 || s.z2 < 0.0 {
        return Err(Error::InfeasibleEquilibrium(format!(
            "({}, {}, {}, {})",
            s.x1, s.x2, s.z1, s.z2
        )));
    }
    Ok(())
}

fn max_norm(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// First-order residuals ordered like the state: `(dP1/dx1, dP2/dx2, dP1/dz1, dP2/dz2)`.
pub fn residual(spec: &ModelSpec, s: &StateVector) -> Result<[f64; 4]> {
    let g1 = profit_gradient(spec, Firm::One, s)?;
    let g2 = profit_gradient(spec, Firm::Two, s)?;
    let r = [g1.dx, g2.dx, g1.dz, g2.dz];
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain {
            family: "profit gradient",
            detail: "non-finite residual".into(),
        });
    }
    Ok(r)
}

/// Jacobian of [`residual`], assembled from the Hessian blocks.
pub fn residual_jacobian(spec: &ModelSpec, s: &StateVector) -> Result<Matrix4<f64>> {
    let h1 = profit_hessian(spec, Firm::One, s)?;
    let h2 = profit_hessian(spec, Firm::Two, s)?;
    Ok(Matrix4::new(
        h1.xx, h1.cross, h1.xz, 0.0, //
        h2.cross, h2.xx, 0.0, h2.xz, //
        h1.xz, h1.rival_z, h1.zz, 0.0, //
        h2.rival_z, h2.xz, 0.0, h2.zz,
    ))
}

/// Closed-form symmetric equilibrium. `Ok(None)` when the spec is outside
/// the families that admit one.
pub fn solve_closed_form(spec: &ModelSpec) -> Result<Option<Equilibrium>> {
    let (d, c) = match (spec.cost(Firm::One), spec.cost(Firm::Two)) {
        (CostFamily::Quadratic { f, d, c }, CostFamily::Quadratic { f: f2, d: d2, c: c2 })
            if f == f2 && d == d2 && c == c2 =>
        {
            (*d, *c)
        }
        _ => return Ok(None),
    };
    let q = spec.q(Firm::One);
    if q != spec.q(Firm::Two) {
        return Ok(None);
    }
    let sigma = spec.sigma();
    let Some(evasion) = spec.fine().inverse_derivative(sigma * (1.0 - q) / q) else {
        return Ok(None);
    };
    let x = match *spec.demand() {
        DemandFamily::Linear { a, b } => {
            (a * (1.0 - sigma) - d) / (3.0 * b * (1.0 - sigma) + 2.0 * c)
        }
        // 1/(4x) = (d + 2cx)/(1 - sigma), positive root in cancellation-free form
        DemandFamily::Hyperbolic => {
            (1.0 - sigma) / (2.0 * (d + (d * d + 2.0 * c * (1.0 - sigma)).sqrt()))
        }
        DemandFamily::Custom(_) => return Ok(None),
    };
    if !(x > 0.0) {
        return Err(Error::InfeasibleEquilibrium(format!("x* = {x}")));
    }
    let price = spec.demand().eval(2.0 * x)?.value;
    let z = x * price - evasion;
    let state = StateVector::new(x, x, z, z);
    let eq = Equilibrium::assemble(spec, state, SolveMethod::ClosedForm)?;
    if eq.residual_norm < RESIDUAL_TOL {
        Ok(Some(eq))
    } else {
        // rounding at large parameter scales; polish without changing the branch
        let mut polished = solve_newton(spec, &state)?;
        polished.method = SolveMethod::ClosedForm;
        Ok(Some(polished))
    }
}

/// Damped Newton on the four first-order conditions.
pub fn solve_newton(spec: &ModelSpec, initial: &StateVector) -> Result<Equilibrium> {
    let mut s = *initial;
    let mut r = residual(spec, &s)?;
    let mut norm = max_norm(&r);
    let mut iterations = 0;
    while norm >= RESIDUAL_TOL {
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
                last: s,
            });
        }
        iterations += 1;
        let jac = residual_jacobian(spec, &s)?;
        let Some(step) = jac.lu().solve(&Vector4::from(r)) else {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
                last: s,
            });
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = StateVector::from_array([
                s.x1 - t * step[0],
                s.x2 - t * step[1],
                s.z1 - t * step[2],
                s.z2 - t * step[3],
            ]);
            if trial.x1 > 0.0 && trial.x2 > 0.0 {
                if let Ok(tr) = residual(spec, &trial) {
                    let trial_norm = max_norm(&tr);
                    if trial_norm < norm {
                        accepted = Some((trial, tr, trial_norm));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, tr, trial_norm)) => {
                s = trial;
                r = tr;
                norm = trial_norm;
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: norm,
                    last: s,
                })
            }
        }
    }
    Equilibrium::assemble(spec, s, SolveMethod::Newton { iterations })
}

/// Ten percent of the demand-domain scale per firm, with full declaration.
pub fn default_initial_guess(spec: &ModelSpec) -> Result<StateVector> {
    let x = 0.1 * spec.demand().quantity_scale();
    let price = spec.demand().eval(2.0 * x)?.value;
    Ok(StateVector::new(x, x, x * price, x * price))
}

/// Closed form when available (cross-checked by Newton), Newton from the
/// default guess otherwise.
pub fn solve(spec: &ModelSpec) -> Result<Equilibrium> {
    if let Some(mut eq) = solve_closed_form(spec)? {
        if let Ok(newton) = default_initial_guess(spec).and_then(|g| solve_newton(spec, &g)) {
            let gap = newton.state.distance(&eq.state);
            if gap > CROSS_CHECK_TOL {
                eq.warnings.push(format!(
                    "Newton from the default guess reached a different root (distance {gap:e})"
                ));
            }
        }
        return Ok(eq);
    }
    solve_newton(spec, &default_initial_guess(spec)?)
}

/// Like [`solve`] but warm-starts Newton from `previous` when no closed form applies.
pub fn solve_warm(spec: &ModelSpec, previous: Option<&StateVector>) -> Result<Equilibrium> {
    if let Some(eq) = solve_closed_form(spec)? {
        return Ok(eq);
    }
    if let Some(start) = previous {
        if let Ok(eq) = solve_newton(spec, start) {
            return Ok(eq);
        }
    }
    solve_newton(spec, &default_initial_guess(spec)?)
}

/// Second-order conditions per firm: fine strictly convex at the evaded
/// amount and `d2/dx_i2 [x_i p(x_i + x_j) - C_i(x_i)/(1 - sigma)] < 0`.
pub fn verify_local_max(spec: &ModelSpec, s: &StateVector) -> [bool; 2] {
    Firm::BOTH.map(|firm| local_max_for(spec, firm, s).unwrap_or(false))
}

fn local_max_for(spec: &ModelSpec, firm: Firm, s: &StateVector) -> Result<bool> {
    let x = s.quantity(firm);
    let p = spec.demand().eval(s.total_quantity())?;
    let cost = spec.cost(firm).eval(x)?;
    let fine = spec.fine().eval(fine_argument(spec, firm, s)?)?;
    let curvature = 2.0 * p.first + x * p.second - cost.second / (1.0 - spec.sigma());
    Ok(fine.second > 0.0 && curvature < 0.0)
}
