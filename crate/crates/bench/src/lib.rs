//! Fixtures shared by the benchmarks.

use duopoly_core::{CostFamily, DemandFamily, FineFamily, ModelSpec, Params};

/// Symmetric linear-demand market with quadratic fine at delay `tau`.
pub fn linear_market(b: f64, tau: f64) -> ModelSpec {
    ModelSpec::symmetric(
        DemandFamily::Linear { a: 80.0, b },
        CostFamily::linear(4.0),
        FineFamily::Quadratic { alpha: 2.0 },
        Params::new(0.1, 0.5, 0.5, [1.0; 4], tau),
    )
    .expect("fixture parameters are valid")
}

/// Symmetric hyperbolic-demand market at delay `tau`.
pub fn hyperbolic_market(tau: f64) -> ModelSpec {
    ModelSpec::symmetric(
        DemandFamily::Hyperbolic,
        CostFamily::Quadratic { f: 0.0, d: 0.5, c: 0.5 },
        FineFamily::Quadratic { alpha: 2.0 },
        Params::new(0.1, 0.5, 0.5, [1.0; 4], tau),
    )
    .expect("fixture parameters are valid")
}
