#![allow(dead_code)]

pub mod invariants;

use duopoly_core::{CostFamily, DemandFamily, FineFamily, ModelSpec, Params};
use proptest::prelude::*;

/// Linear demand `80 − b u`, cost `4x`, fine `2u²`.
pub fn instability_example(b: f64, tau: f64) -> ModelSpec {
    ModelSpec::symmetric(
        DemandFamily::Linear { a: 80.0, b },
        CostFamily::linear(4.0),
        FineFamily::Quadratic { alpha: 2.0 },
        Params::new(0.1, 0.5, 0.5, [1.0; 4], tau),
    )
    .unwrap()
}

pub fn hyperbolic_example(tau: f64) -> ModelSpec {
    ModelSpec::symmetric(
        DemandFamily::Hyperbolic,
        CostFamily::Quadratic { f: 0.0, d: 0.5, c: 0.5 },
        FineFamily::Quadratic { alpha: 2.0 },
        Params::new(0.1, 0.5, 0.5, [1.0; 4], tau),
    )
    .unwrap()
}

fn cost() -> impl Strategy<Value = CostFamily> {
    (0.0..2.0f64, 0.1..4.0f64, 0.0..2.0f64).prop_map(|(f, d, c)| CostFamily::Quadratic { f, d, c })
}

fn params(symmetric: bool) -> impl Strategy<Value = Params> {
    (
        0.05..0.4f64,
        0.2..0.8f64,
        0.2..0.8f64,
        prop::array::uniform4(0.2..3.0f64),
        0.0..5.0f64,
    )
        .prop_map(move |(sigma, q1, q2, mut k, tau)| {
            if symmetric {
                k[1] = k[0];
                k[3] = k[2];
                Params::new(sigma, q1, q1, k, tau)
            } else {
                Params::new(sigma, q1, q2, k, tau)
            }
        })
}

fn demand() -> impl Strategy<Value = DemandFamily> {
    prop_oneof![
        Just(DemandFamily::Hyperbolic),
        (10.0..100.0f64, 0.5..50.0f64).prop_map(|(a, b)| DemandFamily::Linear { a, b }),
    ]
}

/// Specs over both demand families; possibly asymmetric and possibly infeasible.
pub fn any_spec() -> impl Strategy<Value = ModelSpec> {
    (demand(), cost(), cost(), 0.5..4.0f64, any::<bool>())
        .prop_flat_map(|(d, c1, c2, alpha, sym)| (Just((d, c1, c2, alpha, sym)), params(sym)))
        .prop_filter_map("invalid parameters", |((d, c1, c2, alpha, sym), p)| {
            let c2 = if sym { c1.clone() } else { c2 };
            ModelSpec::new(d, c1, c2, FineFamily::Quadratic { alpha }, p).ok()
        })
}

/// Symmetric specs (identical costs, audit probabilities and paired speeds).
pub fn symmetric_spec() -> impl Strategy<Value = ModelSpec> {
    (demand(), cost(), 0.5..4.0f64, params(true)).prop_filter_map("invalid parameters", |(d, c, alpha, p)| {
        ModelSpec::symmetric(d, c, FineFamily::Quadratic { alpha }, p).ok()
    })
}
