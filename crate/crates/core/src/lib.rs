//! Delayed Cournot duopoly with tax evasion: equilibria, local stability
//! conditions, characteristic-root spectra, and delay-equation simulation.

pub mod conditions;
pub mod dde;
pub mod equilibrium;
pub mod error;
pub mod linearization;
pub mod model;
pub mod scan;
pub mod spectrum;

pub use conditions::{assemble_report, ConditionsReport, Verdict};
pub use dde::{integrate, SimStatus, Trajectory};
pub use equilibrium::{solve, solve_warm, Equilibrium, SolveMethod};
pub use error::{Error, Result};
pub use linearization::{
    build_linearization, build_quasipolynomial, quasipolynomial_at, tau0_quartic, LinearFactor,
    LinearizedSystem, MonicQuadratic, QuarticCoefficients, Quasipolynomial,
};
pub use scan::{bisect_boundary, scan_parameter, ScanOptions, ScanResult, Stability};
pub use spectrum::{crossing_test, quartic_roots, spectral_abscissa, spectrum, Crossing, Rectangle, Root, SpectrumResult};
pub use model::{
    CostFamily, CustomFamily, DemandFamily, FineFamily, Firm, Jet, ModelSpec, Params, StateVector,
};
