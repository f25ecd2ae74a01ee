//! Function families, the scalar parameter set and the profit functions of
//! the duopoly with their exact first and second partial derivatives.
//!
//! Every profit derivative here is analytic (chain rule on the profit
//! expression); finite differences only appear in tests.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Scalar callback used by custom families.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Value and first two derivatives of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

/// User-supplied function given by value, first and second derivative.
#[derive(Clone)]
pub struct CustomFamily {
    pub name: String,
    value: ScalarFn,
    first: ScalarFn,
    second: ScalarFn,
}

impl CustomFamily {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            first: Arc::new(first),
            second: Arc::new(second),
        }
    }

    fn jet(&self, u: f64) -> Jet {
        Jet {
            value: (self.value)(u),
            first: (self.first)(u),
            second: (self.second)(u),
        }
    }
}

impl fmt::Debug for CustomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFamily").field("name", &self.name).finish_non_exhaustive()
    }
}

impl PartialEq for CustomFamily {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && Arc::ptr_eq(&self.value, &other.value)
            && Arc::ptr_eq(&self.first, &other.first)
            && Arc::ptr_eq(&self.second, &other.second)
    }
}

/// Smallest total quantity accepted by the hyperbolic demand.
pub const HYPERBOLIC_MIN_QUANTITY: f64 = 1e-12;

/// Inverse demand `p(u)` of total quantity `u`.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandFamily {
    /// `p(u) = a - b u` on `0 <= u < a / b`.
    Linear { a: f64, b: f64 },
    /// `p(u) = 1 / u` on `u > 0`.
    Hyperbolic,
    Custom(CustomFamily),
}

impl DemandFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DemandFamily::Linear { .. } => "linear demand",
            DemandFamily::Hyperbolic => "hyperbolic demand",
            DemandFamily::Custom(_) => "custom demand",
        }
    }

    pub fn eval(&self, u: f64) -> Result<Jet> {
        if !u.is_finite() {
            return Err(self.domain_error(u, "non-finite quantity"));
        }
        let jet = match *self {
            DemandFamily::Linear { a, b } => {
                if u >= a / b {
                    return Err(self.domain_error(u, "price a - b u is not positive"));
                }
                Jet {
                    value: a - b * u,
                    first: -b,
                    second: 0.0,
                }
            }
            DemandFamily::Hyperbolic => {
                if u <= HYPERBOLIC_MIN_QUANTITY {
                    return Err(self.domain_error(u, "total quantity must be positive"));
                }
                let inv = 1.0 / u;
                Jet {
                    value: inv,
                    first: -inv * inv,
                    second: 2.0 * inv * inv * inv,
                }
            }
            DemandFamily::Custom(ref family) => family.jet(u),
        };
        if !(jet.value > 0.0) || !(jet.first < 0.0) || !jet.second.is_finite() {
            return Err(self.domain_error(u, "demand must be positive and strictly decreasing"));
        }
        Ok(jet)
    }

    /// Characteristic quantity scale: the width of the admissible domain
    /// when it is bounded, otherwise 1.
    pub fn quantity_scale(&self) -> f64 {
        match *self {
            DemandFamily::Linear { a, b } => a / b,
            _ => 1.0,
        }
    }

    fn domain_error(&self, u: f64, why: &str) -> Error {
        Error::Domain {
            family: self.name(),
            detail: format!("u = {u}: {why}"),
        }
    }
}

/// Production cost `C(u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFamily {
    /// `C(u) = f + d u + c u^2`.
    Quadratic { f: f64, d: f64, c: f64 },
    Custom(CustomFamily),
}

impl CostFamily {
    pub fn linear(d: f64) -> Self {
        CostFamily::Quadratic { f: 0.0, d, c: 0.0 }
    }

    pub fn eval(&self, u: f64) -> Result<Jet> {
        match *self {
            CostFamily::Quadratic { f, d, c } => Ok(Jet {
                value: f + d * u + c * u * u,
                first: d + 2.0 * c * u,
                second: 2.0 * c,
            }),
            CostFamily::Custom(ref family) => {
                let jet = family.jet(u);
                if !jet.value.is_finite() || !jet.first.is_finite() || !jet.second.is_finite() {
                    return Err(Error::Domain {
                        family: "custom cost",
                        detail: format!("u = {u}: non-finite value"),
                    });
                }
                Ok(jet)
            }
        }
    }
}

/// Fine `F(u)` applied to the evaded amount `u`.
#[derive(Debug, Clone, PartialEq)]
pub enum FineFamily {
    /// `F(u) = alpha u^2`.
    Quadratic { alpha: f64 },
    /// Custom fine; `inverse_derivative` is `(F')^{-1}` when known.
    Custom {
        family: CustomFamily,
        inverse_derivative: Option<InverseFn>,
    },
}

/// Wrapper so that `FineFamily` stays `Debug + PartialEq`.
#[derive(Clone)]
pub struct InverseFn(pub ScalarFn);

impl fmt::Debug for InverseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InverseFn")
    }
}

impl PartialEq for InverseFn {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl FineFamily {
    pub fn eval(&self, u: f64) -> Result<Jet> {
        let jet = match *self {
            FineFamily::Quadratic { alpha } => Jet {
                value: alpha * u * u,
                first: 2.0 * alpha * u,
                second: 2.0 * alpha,
            },
            FineFamily::Custom { ref family, .. } => family.jet(u),
        };
        if !jet.value.is_finite() || !jet.first.is_finite() || !jet.second.is_finite() {
            return Err(Error::Domain {
                family: "fine",
                detail: format!("u = {u}: non-finite value"),
            });
        }
        Ok(jet)
    }

    /// `(F')^{-1}(y)`, when the family provides it.
    pub fn inverse_derivative(&self, y: f64) -> Option<f64> {
        match self {
            FineFamily::Quadratic { alpha } => Some(y / (2.0 * alpha)),
            FineFamily::Custom {
                inverse_derivative: Some(inv),
                ..
            } => Some((inv.0)(y)),
            FineFamily::Custom { .. } => None,
        }
    }
}

/// Scalar parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Tax rate in `(0, 1)`.
    pub sigma: f64,
    /// Audit probabilities in `(0, 1)`.
    pub q1: f64,
    pub q2: f64,
    /// Adjustment speeds `k1..k4 > 0` (quantities of firm 1, 2, then declarations).
    pub k: [f64; 4],
    /// Entry delay of the second firm.
    pub tau: f64,
}

impl Params {
    pub fn new(sigma: f64, q1: f64, q2: f64, k: [f64; 4], tau: f64) -> Self {
        Self {
            sigma,
            q1,
            q2,
            k,
            tau,
        }
    }
}

/// One of the two firms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Firm {
    One,
    Two,
}

impl Firm {
    pub const BOTH: [Firm; 2] = [Firm::One, Firm::Two];

    pub fn other(self) -> Firm {
        match self {
            Firm::One => Firm::Two,
            Firm::Two => Firm::One,
        }
    }

    /// Zero-based index.
    pub fn index(self) -> usize {
        match self {
            Firm::One => 0,
            Firm::Two => 1,
        }
    }
}

/// Full parameterization of the model. Bounds are checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    demand: DemandFamily,
    cost1: CostFamily,
    cost2: CostFamily,
    fine: FineFamily,
    params: Params,
}

/// Parameter names accepted by [`ModelSpec::param`] and [`ModelSpec::with_param`].
pub const PARAM_NAMES: &[&str] = &[
    "a", "b", "sigma", "q", "q1", "q2", "k1", "k2", "k3", "k4", "tau", "alpha", "f", "d", "c",
    "f1", "d1", "c1", "f2", "d2", "c2",
];

impl ModelSpec {
    pub fn new(
        demand: DemandFamily,
        cost1: CostFamily,
        cost2: CostFamily,
        fine: FineFamily,
        params: Params,
    ) -> Result<Self> {
        let spec = Self {
            demand,
            cost1,
            cost2,
            fine,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Both firms share `cost`.
    pub fn symmetric(
        demand: DemandFamily,
        cost: CostFamily,
        fine: FineFamily,
        params: Params,
    ) -> Result<Self> {
        Self::new(demand, cost.clone(), cost, fine, params)
    }

    pub fn demand(&self) -> &DemandFamily {
        &self.demand
    }

    pub fn cost(&self, firm: Firm) -> &CostFamily {
        match firm {
            Firm::One => &self.cost1,
            Firm::Two => &self.cost2,
        }
    }

    pub fn fine(&self) -> &FineFamily {
        &self.fine
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    pub fn q(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.params.q1,
            Firm::Two => self.params.q2,
        }
    }

    /// Speed for the quantity of `firm` (`k1` or `k2`).
    pub fn k_quantity(&self, firm: Firm) -> f64 {
        self.params.k[firm.index()]
    }

    /// Speed for the declaration of `firm` (`k3` or `k4`).
    pub fn k_declared(&self, firm: Firm) -> f64 {
        self.params.k[firm.index() + 2]
    }

    /// Same spec with a different delay.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        self.with_param("tau", tau)
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        let p = &self.params;
        let quad = |cost: &CostFamily, which: usize| -> Result<f64> {
            match *cost {
                CostFamily::Quadratic { f, d, c } => Ok([f, d, c][which]),
                CostFamily::Custom(_) => Err(Error::UnknownParameter(name.to_string())),
            }
        };
        match name {
            "a" | "b" => match self.demand {
                DemandFamily::Linear { a, b } => Ok(if name == "a" { a } else { b }),
                _ => Err(Error::UnknownParameter(name.to_string())),
            },
            "sigma" => Ok(p.sigma),
            "q" | "q1" => Ok(p.q1),
            "q2" => Ok(p.q2),
            "k1" => Ok(p.k[0]),
            "k2" => Ok(p.k[1]),
            "k3" => Ok(p.k[2]),
            "k4" => Ok(p.k[3]),
            "tau" => Ok(p.tau),
            "alpha" => match self.fine {
                FineFamily::Quadratic { alpha } => Ok(alpha),
                _ => Err(Error::UnknownParameter(name.to_string())),
            },
            "f" | "f1" => quad(&self.cost1, 0),
            "d" | "d1" => quad(&self.cost1, 1),
            "c" | "c1" => quad(&self.cost1, 2),
            "f2" => quad(&self.cost2, 0),
            "d2" => quad(&self.cost2, 1),
            "c2" => quad(&self.cost2, 2),
            _ => Err(Error::UnknownParameter(name.to_string())),
        }
    }

    /// Copy of the spec with one scalar replaced. `q`, `f`, `d` and `c`
    /// set the value for both firms.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        // fail on names that do not apply to this spec's families
        self.param(name)?;
        let mut next = self.clone();
        let set_cost = |cost: &mut CostFamily, which: usize| {
            if let CostFamily::Quadratic { f, d, c } = cost {
                *[f, d, c][which] = value;
            }
        };
        match name {
            "a" | "b" => {
                if let DemandFamily::Linear { a, b } = &mut next.demand {
                    if name == "a" {
                        *a = value
                    } else {
                        *b = value
                    }
                }
            }
            "sigma" => next.params.sigma = value,
            "q" => {
                next.params.q1 = value;
                next.params.q2 = value;
            }
            "q1" => next.params.q1 = value,
            "q2" => next.params.q2 = value,
            "k1" => next.params.k[0] = value,
            "k2" => next.params.k[1] = value,
            "k3" => next.params.k[2] = value,
            "k4" => next.params.k[3] = value,
            "tau" => next.params.tau = value,
            "alpha" => {
                if let FineFamily::Quadratic { alpha } = &mut next.fine {
                    *alpha = value;
                }
            }
            "f" | "d" | "c" => {
                let which = ["f", "d", "c"].iter().position(|n| *n == name).unwrap();
                set_cost(&mut next.cost1, which);
                set_cost(&mut next.cost2, which);
            }
            "f1" => set_cost(&mut next.cost1, 0),
            "d1" => set_cost(&mut next.cost1, 1),
            "c1" => set_cost(&mut next.cost1, 2),
            "f2" => set_cost(&mut next.cost2, 0),
            "d2" => set_cost(&mut next.cost2, 1),
            "c2" => set_cost(&mut next.cost2, 2),
            _ => return Err(Error::UnknownParameter(name.to_string())),
        }
        next.validate()?;
        Ok(next)
    }

    fn validate(&self) -> Result<()> {
        fn check(name: &str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: name.to_string(),
                    value,
                    reason,
                })
            }
        }
        if let DemandFamily::Linear { a, b } = self.demand {
            check("demand.a", a, a > 0.0, "must be positive")?;
            check("demand.b", b, b > 0.0, "must be positive")?;
        }
        for (key, cost) in [("cost1", &self.cost1), ("cost2", &self.cost2)] {
            if let CostFamily::Quadratic { f, d, c } = *cost {
                check(&format!("{key}.f"), f, f >= 0.0, "must be nonnegative")?;
                check(&format!("{key}.d"), d, d > 0.0, "must be positive")?;
                check(&format!("{key}.c"), c, c >= 0.0, "must be nonnegative")?;
            }
        }
        if let FineFamily::Quadratic { alpha } = self.fine {
            check("fine.alpha", alpha, alpha > 0.0, "must be positive")?;
        }
        let p = &self.params;
        check("sigma", p.sigma, p.sigma > 0.0 && p.sigma < 1.0, "must lie in (0, 1)")?;
        check("q1", p.q1, p.q1 > 0.0 && p.q1 < 1.0, "must lie in (0, 1)")?;
        check("q2", p.q2, p.q2 > 0.0 && p.q2 < 1.0, "must lie in (0, 1)")?;
        for (i, k) in p.k.iter().enumerate() {
            check(&format!("k{}", i + 1), *k, *k > 0.0, "must be positive")?;
        }
        check("tau", p.tau, p.tau >= 0.0, "must be nonnegative")?;
        Ok(())
    }
}

/// State `(x1, x2, z1, z2)`: quantities and declared revenues.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    pub x1: f64,
    pub x2: f64,
    pub z1: f64,
    pub z2: f64,
}

impl StateVector {
    pub fn new(x1: f64, x2: f64, z1: f64, z2: f64) -> Self {
        Self { x1, x2, z1, z2 }
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.x2, self.z1, self.z2]
    }

    pub fn quantity(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.x1,
            Firm::Two => self.x2,
        }
    }

    pub fn declared(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.z1,
            Firm::Two => self.z2,
        }
    }

    pub fn total_quantity(&self) -> f64 {
        self.x1 + self.x2
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Local view of one firm: its own controls and the rival quantity entering
/// the demand argument (delayed for the second firm in the dynamics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmPoint {
    pub own_x: f64,
    pub own_z: f64,
    pub rival_x: f64,
}

impl FirmPoint {
    pub fn of(firm: Firm, s: &StateVector) -> Self {
        Self {
            own_x: s.quantity(firm),
            own_z: s.declared(firm),
            rival_x: s.quantity(firm.other()),
        }
    }
}

/// Partial derivatives of a profit function in the firm's own controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    /// dP_i / dx_i
    pub dx: f64,
    /// dP_i / dz_i
    pub dz: f64,
}

/// The five second partials of `P_i` (with `j` the rival).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianBlock {
    /// d2P_i / dx_i^2
    pub xx: f64,
    /// d2P_i / dx_j dx_i
    pub cross: f64,
    /// d2P_i / dx_i dz_i
    pub xz: f64,
    /// d2P_i / dx_j dz_i
    pub rival_z: f64,
    /// d2P_i / dz_i^2
    pub zz: f64,
}

impl HessianBlock {
    pub fn to_array(self) -> [f64; 5] {
        [self.xx, self.cross, self.xz, self.rival_z, self.zz]
    }
}

pub fn eval_demand(demand: &DemandFamily, u: f64) -> Result<Jet> {
    demand.eval(u)
}

/// Evaded amount `x_i p(x_1 + x_2) - z_i`.
pub fn fine_argument(spec: &ModelSpec, firm: Firm, s: &StateVector) -> Result<f64> {
    let pt = FirmPoint::of(firm, s);
    let p = spec.demand.eval(pt.own_x + pt.rival_x)?;
    Ok(pt.own_x * p.value - pt.own_z)
}

pub fn profit(spec: &ModelSpec, firm: Firm, s: &StateVector) -> Result<f64> {
    profit_at(spec, firm, FirmPoint::of(firm, s))
}

pub fn profit_at(spec: &ModelSpec, firm: Firm, pt: FirmPoint) -> Result<f64> {
    let q = spec.q(firm);
    let sigma = spec.sigma();
    let p = spec.demand.eval(pt.own_x + pt.rival_x)?;
    let revenue = pt.own_x * p.value;
    let cost = spec.cost(firm).eval(pt.own_x)?;
    let fine = spec.fine.eval(revenue - pt.own_z)?;
    Ok((1.0 - q * sigma) * revenue - cost.value - (1.0 - q) * sigma * pt.own_z - q * fine.value)
}

pub fn profit_gradient(spec: &ModelSpec, firm: Firm, s: &StateVector) -> Result<Gradient> {
    profit_gradient_at(spec, firm, FirmPoint::of(firm, s))
}

pub fn profit_gradient_at(spec: &ModelSpec, firm: Firm, pt: FirmPoint) -> Result<Gradient> {
    let q = spec.q(firm);
    let sigma = spec.sigma();
    let p = spec.demand.eval(pt.own_x + pt.rival_x)?;
    let cost = spec.cost(firm).eval(pt.own_x)?;
    let fine = spec.fine.eval(pt.own_x * p.value - pt.own_z)?;
    let marginal_revenue = p.value + pt.own_x * p.first;
    Ok(Gradient {
        dx: (1.0 - q * sigma - q * fine.first) * marginal_revenue - cost.first,
        dz: -(1.0 - q) * sigma + q * fine.first,
    })
}

pub fn profit_hessian(spec: &ModelSpec, firm: Firm, s: &StateVector) -> Result<HessianBlock> {
    profit_hessian_at(spec, firm, FirmPoint::of(firm, s))
}

pub fn profit_hessian_at(spec: &ModelSpec, firm: Firm, pt: FirmPoint) -> Result<HessianBlock> {
    let q = spec.q(firm);
    let sigma = spec.sigma();
    let x = pt.own_x;
    let p = spec.demand.eval(x + pt.rival_x)?;
    let cost = spec.cost(firm).eval(x)?;
    let fine = spec.fine.eval(x * p.value - pt.own_z)?;
    // derivatives of the revenue x_i p(x_i + x_j)
    let r_own = p.value + x * p.first;
    let r_rival = x * p.first;
    let r_own_own = 2.0 * p.first + x * p.second;
    let r_own_rival = p.first + x * p.second;
    let factor = 1.0 - q * sigma - q * fine.first;
    let curvature = q * fine.second;
    Ok(HessianBlock {
        xx: factor * r_own_own - curvature * r_own * r_own - cost.second,
        cross: factor * r_own_rival - curvature * r_own * r_rival,
        xz: curvature * r_own,
        rival_z: curvature * r_rival,
        zz: -curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_spec() -> ModelSpec {
        ModelSpec::symmetric(
            DemandFamily::Linear { a: 80.0, b: 10.0 },
            CostFamily::linear(4.0),
            FineFamily::Quadratic { alpha: 2.0 },
            Params::new(0.1, 0.5, 0.5, [1.0; 4], 0.0),
        )
        .unwrap()
    }

    fn fd_step(x: f64) -> f64 {
        f64::EPSILON.cbrt() * x.abs().max(1.0)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn hyperbolic_demand_at_two() {
        let jet = eval_demand(&DemandFamily::Hyperbolic, 2.0).unwrap();
        assert_eq!(jet.value, 0.5);
        assert_eq!(jet.first, -0.25);
        assert_eq!(jet.second, 0.25);
    }

    #[test]
    fn linear_demand_at_example_total_quantity() {
        let jet = eval_demand(&DemandFamily::Linear { a: 80.0, b: 10.0 }, 5.037037038).unwrap();
        assert!((jet.value - 29.62962962).abs() < 1e-7);
        assert_eq!(jet.first, -10.0);
        assert_eq!(jet.second, 0.0);
    }

    #[test]
    fn linear_demand_rejects_negative_price() {
        let err = eval_demand(&DemandFamily::Linear { a: 1.0, b: 1.0 }, 1.5).unwrap_err();
        match err {
            Error::Domain { family, .. } => assert_eq!(family, "linear demand"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(eval_demand(&DemandFamily::Hyperbolic, 0.0).is_err());
        assert!(eval_demand(&DemandFamily::Hyperbolic, 1e-13).is_err());
    }

    #[test]
    fn custom_demand_must_decrease() {
        let flat = DemandFamily::Custom(CustomFamily::new("flat", |_| 1.0, |_| 0.0, |_| 0.0));
        assert!(flat.eval(1.0).is_err());
    }

    #[test]
    fn zero_production_profit_is_minus_fixed_cost() {
        let spec = ModelSpec::symmetric(
            DemandFamily::Linear { a: 80.0, b: 10.0 },
            CostFamily::Quadratic {
                f: 3.5,
                d: 4.0,
                c: 0.2,
            },
            FineFamily::Quadratic { alpha: 2.0 },
            Params::new(0.1, 0.5, 0.5, [1.0; 4], 0.0),
        )
        .unwrap();
        let s = StateVector::new(0.0, 1.0, 0.0, 3.0);
        assert_eq!(profit(&spec, Firm::One, &s).unwrap(), -3.5);
    }

    #[test]
    fn untaxed_full_declaration_profit() {
        let spec = ModelSpec::symmetric(
            DemandFamily::Linear { a: 80.0, b: 10.0 },
            CostFamily::linear(4.0),
            FineFamily::Quadratic { alpha: 2.0 },
            Params::new(1e-12, 0.5, 0.5, [1.0; 4], 0.0),
        )
        .unwrap();
        let (x1, x2) = (1.5, 2.0);
        let price = 80.0 - 10.0 * (x1 + x2);
        let s = StateVector::new(x1, x2, x1 * price, x2 * price);
        let got = profit(&spec, Firm::One, &s).unwrap();
        assert!((got - (x1 * price - 4.0 * x1)).abs() < 1e-9);
    }

    #[test]
    fn profit_matches_direct_formula() {
        let spec = example_spec();
        let x = 68.0 / 27.0;
        let price = 80.0 - 10.0 * 2.0 * x;
        let z = x * price - 0.025;
        let s = StateVector::new(x, x, z, z);
        // two-branch form: not audited with probability 1 - q, audited with q
        let direct = 0.5 * (x * price - 4.0 * x - 0.1 * z)
            + 0.5 * (0.9 * x * price - 4.0 * x - 2.0 * (x * price - z).powi(2));
        let got = profit(&spec, Firm::Two, &s).unwrap();
        assert!((got - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences_at_unit_state() {
        let spec = example_spec();
        let s = StateVector::new(1.0, 1.0, 1.0, 1.0);
        for firm in Firm::BOTH {
            let g = profit_gradient(&spec, firm, &s).unwrap();
            let pt = FirmPoint::of(firm, &s);
            let hx = fd_step(pt.own_x);
            let hz = fd_step(pt.own_z);
            let f = |dx: f64, dz: f64| {
                profit_at(
                    &spec,
                    firm,
                    FirmPoint {
                        own_x: pt.own_x + dx,
                        own_z: pt.own_z + dz,
                        ..pt
                    },
                )
                .unwrap()
            };
            let fd_x = (f(hx, 0.0) - f(-hx, 0.0)) / (2.0 * hx);
            let fd_z = (f(0.0, hz) - f(0.0, -hz)) / (2.0 * hz);
            assert!(rel_err(g.dx, fd_x) < 1e-6, "{} vs {}", g.dx, fd_x);
            assert!(rel_err(g.dz, fd_z) < 1e-6, "{} vs {}", g.dz, fd_z);
        }
    }

    #[test]
    fn declaration_gradient_vanishes_at_optimal_evasion() {
        let spec = example_spec();
        let (x1, x2) = (2.0, 1.0);
        let price = 80.0 - 30.0;
        let s = StateVector::new(x1, x2, x1 * price - 0.025, x2 * price - 0.025);
        for firm in Firm::BOTH {
            let g = profit_gradient(&spec, firm, &s).unwrap();
            assert!(g.dz.abs() < 1e-12, "{}", g.dz);
        }
    }

    #[test]
    fn declaration_curvature_is_constant_for_quadratic_fine() {
        let spec = example_spec();
        for s in [
            StateVector::new(1.0, 2.0, 3.0, 4.0),
            StateVector::new(0.3, 0.1, 10.0, -2.0),
        ] {
            for firm in Firm::BOTH {
                assert_eq!(profit_hessian(&spec, firm, &s).unwrap().zz, -2.0);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let spec = example_spec();
        let x = 68.0 / 27.0;
        let z = x * (80.0 - 20.0 * x) - 0.025;
        let s = StateVector::new(x, x, z, z);
        for firm in Firm::BOTH {
            let h = profit_hessian(&spec, firm, &s).unwrap();
            let pt = FirmPoint::of(firm, &s);
            let grad = |dx: f64, dz: f64, dr: f64| {
                profit_gradient_at(
                    &spec,
                    firm,
                    FirmPoint {
                        own_x: pt.own_x + dx,
                        own_z: pt.own_z + dz,
                        rival_x: pt.rival_x + dr,
                    },
                )
                .unwrap()
            };
            let hx = fd_step(pt.own_x);
            let hz = fd_step(pt.own_z);
            let hr = fd_step(pt.rival_x);
            let xx = (grad(hx, 0.0, 0.0).dx - grad(-hx, 0.0, 0.0).dx) / (2.0 * hx);
            let cross = (grad(0.0, 0.0, hr).dx - grad(0.0, 0.0, -hr).dx) / (2.0 * hr);
            let xz = (grad(0.0, hz, 0.0).dx - grad(0.0, -hz, 0.0).dx) / (2.0 * hz);
            let rival_z = (grad(0.0, 0.0, hr).dz - grad(0.0, 0.0, -hr).dz) / (2.0 * hr);
            let zz = (grad(0.0, hz, 0.0).dz - grad(0.0, -hz, 0.0).dz) / (2.0 * hz);
            for (a, b) in h.to_array().iter().zip([xx, cross, xz, rival_z, zz]) {
                assert!(rel_err(*a, b) < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn symmetric_state_gives_equal_blocks() {
        let spec = example_spec();
        let s = StateVector::new(2.2, 2.2, 60.0, 60.0);
        let h1 = profit_hessian(&spec, Firm::One, &s).unwrap();
        let h2 = profit_hessian(&spec, Firm::Two, &s).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn parameter_bounds_are_validated() {
        let bad = ModelSpec::symmetric(
            DemandFamily::Hyperbolic,
            CostFamily::linear(1.0),
            FineFamily::Quadratic { alpha: 2.0 },
            Params::new(1.0, 0.5, 0.5, [1.0; 4], 0.0),
        );
        assert!(matches!(bad, Err(Error::InvalidParameter { ref name, .. }) if name == "sigma"));
        let spec = example_spec();
        assert!(matches!(
            spec.with_param("k3", 0.0),
            Err(Error::InvalidParameter { ref name, .. }) if name == "k3"
        ));
        assert!(matches!(spec.with_param("zeta", 1.0), Err(Error::UnknownParameter(_))));
        let moved = spec.with_param("b", 20.0).unwrap();
        assert_eq!(moved.param("b").unwrap(), 20.0);
        assert_eq!(moved.param("a").unwrap(), 80.0);
        let both = spec.with_param("d", 5.0).unwrap();
        assert_eq!(both.param("d2").unwrap(), 5.0);
    }
}
