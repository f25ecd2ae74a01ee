//! Sufficient conditions for local stability at an equilibrium.
//!
//! Every check here is one-sided: a failed check never implies instability.
//! Deciding instability is left to [`crate::spectrum`].

use crate::equilibrium::Equilibrium;
use crate::error::Result;
use crate::linearization::{quasipolynomial_at, tau0_quartic, QuarticCoefficients};
use crate::model::{eval_demand, fine_argument, profit_hessian, CostFamily, DemandFamily, Firm, HessianBlock, ModelSpec};

/// Slack allowed on non-strict inequalities, scaled by the operands' magnitude.
pub const NON_STRICT_TOL: f64 = 1e-12;
/// Relative tolerance for the equal-marginal comparisons.
pub const EQUAL_MARGINAL_REL_TOL: f64 = 1e-8;

/// `lhs >= rhs` up to a relative slack.
fn at_least(lhs: f64, rhs: f64) -> bool {
    lhs - rhs >= -NON_STRICT_TOL * lhs.abs().max(rhs.abs()).max(1.0)
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQUAL_MARGINAL_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Second-order inequalities on one firm's Hessian block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HessianChecks {
    /// `xx·zz − xz² > |cross·zz − xz·rival_z|`.
    pub determinant_dominance: bool,
    /// `−xx ≥ |cross|`.
    pub diagonal_dominance: bool,
}

impl HessianChecks {
    pub fn of(h: &HessianBlock) -> Self {
        let det = h.xx * h.zz - h.xz * h.xz;
        let off = (h.cross * h.zz - h.xz * h.rival_z).abs();
        Self {
            determinant_dominance: det > off,
            diagonal_dominance: at_least(-h.xx, h.cross.abs()),
        }
    }

    pub fn both(&self) -> bool {
        self.determinant_dominance && self.diagonal_dominance
    }
}

/// Primitive-function conditions that together imply [`HessianChecks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveChecks {
    /// `F″(x p − z) > 0`.
    pub fine_convex: bool,
    /// `C″(x) ≥ 0`.
    pub cost_convex: bool,
    /// `p′ + x p″ ≤ 0`.
    pub strategic_substitute: bool,
    /// `p + 2 x p′ ≥ 0`.
    pub revenue_slope: bool,
}

impl PrimitiveChecks {
    pub fn all(&self) -> bool {
        self.fine_convex && self.cost_convex && self.strategic_substitute && self.revenue_slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EqualMarginal {
    pub marginal_cost: bool,
    pub cost_curvature: bool,
    pub audit_probability: bool,
    pub quantity_speeds: bool,
    pub declaration_speeds: bool,
}

impl EqualMarginal {
    pub fn all(&self) -> bool {
        self.marginal_cost
            && self.cost_curvature
            && self.audit_probability
            && self.quantity_speeds
            && self.declaration_speeds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouthHurwitz {
    pub alpha0_positive: bool,
    pub alpha1_positive: bool,
    pub alpha3_positive: bool,
    pub hurwitz_product: bool,
}

impl RouthHurwitz {
    pub fn of(q: &QuarticCoefficients) -> Self {
        Self {
            alpha0_positive: q.a0 > 0.0,
            alpha1_positive: q.a1 > 0.0,
            alpha3_positive: q.a3 > 0.0,
            hurwitz_product: q.a1 * q.a2 * q.a3 > q.a1 * q.a1 + q.a3 * q.a3 * q.a0,
        }
    }

    pub fn holds(&self) -> bool {
        self.alpha0_positive && self.alpha1_positive && self.alpha3_positive && self.hurwitz_product
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Symmetric hypotheses plus both Hessian inequalities: stable for every delay.
    DelayIndependentStable,
    /// Only the undelayed quartic is Hurwitz.
    StableAtTauZero,
    /// No sufficient condition applies.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::DelayIndependentStable => "delay-independent-stable",
            Verdict::StableAtTauZero => "stable-at-tau-zero",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsReport {
    pub hessian: [HessianChecks; 2],
    pub primitive: [PrimitiveChecks; 2],
    pub equal_marginal: EqualMarginal,
    pub routh_hurwitz: RouthHurwitz,
    pub tau0_quartic: QuarticCoefficients,
    /// `None` when the demand/cost combination has no closed-form condition.
    pub linear_demand_condition: Option<bool>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// Per-firm `[determinant_dominance, diagonal_dominance]` results.
pub fn check_hessian_conditions(spec: &ModelSpec, eq: &Equilibrium) -> Result<[HessianChecks; 2]> {
    let h1 = profit_hessian(spec, Firm::One, &eq.state)?;
    let h2 = profit_hessian(spec, Firm::Two, &eq.state)?;
    Ok([HessianChecks::of(&h1), HessianChecks::of(&h2)])
}

pub fn check_primitive_conditions(spec: &ModelSpec, eq: &Equilibrium) -> Result<[PrimitiveChecks; 2]> {
    let s = &eq.state;
    let p = eval_demand(spec.demand(), s.total_quantity())?;
    let check = |firm: Firm| -> Result<PrimitiveChecks> {
        let x = s.quantity(firm);
        let fine = spec.fine().eval(fine_argument(spec, firm, s)?)?;
        let cost = spec.cost(firm).eval(x)?;
        Ok(PrimitiveChecks {
            fine_convex: fine.second > 0.0,
            cost_convex: at_least(cost.second, 0.0),
            strategic_substitute: at_least(-p.first, x * p.second),
            revenue_slope: at_least(p.value, -2.0 * x * p.first),
        })
    };
    Ok([check(Firm::One)?, check(Firm::Two)?])
}

/// Closed-form condition `2ac + 4bd ≥ ab(1−σ)` for linear demand and identical quadratic costs.
pub fn check_linear_demand_condition(spec: &ModelSpec) -> Option<bool> {
    let DemandFamily::Linear { a, b } = *spec.demand() else {
        return None;
    };
    let (
        CostFamily::Quadratic { d: d1, c: c1, .. },
        CostFamily::Quadratic { d: d2, c: c2, .. },
    ) = (spec.cost(Firm::One), spec.cost(Firm::Two))
    else {
        return None;
    };
    if d1 != d2 || c1 != c2 {
        return None;
    }
    Some(at_least(2.0 * a * c1 + 4.0 * b * d1, a * b * (1.0 - spec.sigma())))
}

pub fn routh_hurwitz(q: &QuarticCoefficients) -> bool {
    RouthHurwitz::of(q).holds()
}

pub fn check_equal_marginal(spec: &ModelSpec, eq: &Equilibrium) -> Result<EqualMarginal> {
    let c1 = spec.cost(Firm::One).eval(eq.state.x1)?;
    let c2 = spec.cost(Firm::Two).eval(eq.state.x2)?;
    let k = spec.params().k;
    Ok(EqualMarginal {
        marginal_cost: nearly_equal(c1.first, c2.first),
        cost_curvature: nearly_equal(c1.second, c2.second),
        audit_probability: nearly_equal(spec.q(Firm::One), spec.q(Firm::Two)),
        quantity_speeds: nearly_equal(k[0], k[1]),
        declaration_speeds: nearly_equal(k[2], k[3]),
    })
}

pub fn assemble_report(spec: &ModelSpec, eq: &Equilibrium) -> Result<ConditionsReport> {
    let hessian = check_hessian_conditions(spec, eq)?;
    let primitive = check_primitive_conditions(spec, eq)?;
    let equal_marginal = check_equal_marginal(spec, eq)?;
    let quartic = tau0_quartic(&quasipolynomial_at(spec, eq)?);
    let rh = RouthHurwitz::of(&quartic);
    let linear_demand_condition = check_linear_demand_condition(spec);

    let mut notes = Vec::new();
    let verdict = if equal_marginal.all() && hessian.iter().all(HessianChecks::both) {
        Verdict::DelayIndependentStable
    } else if rh.holds() {
        notes.push("stable without delay; behaviour for positive delay must be decided from the spectrum".into());
        Verdict::StableAtTauZero
    } else {
        notes.push("no sufficient condition holds; stability must be decided from the spectrum".into());
        Verdict::Inconclusive
    };
    if rh.hurwitz_product && !(rh.alpha0_positive && rh.alpha1_positive && rh.alpha3_positive) {
        notes.push("Hurwitz product inequality holds but a coefficient is non-positive".into());
    }
    Ok(ConditionsReport {
        hessian,
        primitive,
        equal_marginal,
        routh_hurwitz: rh,
        tau0_quartic: quartic,
        linear_demand_condition,
        verdict,
        notes,
    })
}
