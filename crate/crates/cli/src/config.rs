//! JSON model configuration: parsing with key-precise errors, validation into a
//! [`ModelSpec`], and serialization back from one.

use duopoly_core::{CostFamily, DemandFamily, FineFamily, ModelSpec, Params, Rectangle, StateVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub demand: DemandConfig,
    pub cost1: CostConfig,
    pub cost2: CostConfig,
    pub fine: FineConfig,
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DemandConfig {
    /// `p(u) = a - b u`
    Linear { a: f64, b: f64 },
    /// `p(u) = 1 / u`
    Hyperbolic,
}

/// `C(u) = f + d u + c u^2`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub f: f64,
    pub d: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum FineConfig {
    /// `F(u) = alpha u^2`
    Quadratic { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub sigma: f64,
    pub q1: f64,
    pub q2: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl From<Rectangle> for RectConfig {
    fn from(r: Rectangle) -> Self {
        Self {
            re_min: r.re_min,
            re_max: r.re_max,
            im_min: r.im_min,
            im_max: r.im_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RectConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
}

/// Start of a simulation: an explicit state, or the equilibrium scaled by `1 + perturbation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    State { x1: f64, x2: f64, z1: f64, z2: f64 },
    Perturbation(f64),
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Perturbation(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub initial: InitialConfig,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Parses configuration text; `origin` names the source in error messages.
pub fn parse(text: &str, origin: &str) -> Result<Config, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // a missing field is reported at its parent; name the field itself
        let key = match message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        CliError::Config {
            key,
            message: format!("{message} ({origin})"),
        }
    })
}

pub fn load(path: &std::path::Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config = parse(&text, &path.display().to_string())?;
    config.validate()?;
    Ok(config)
}

/// Config key holding a model parameter reported by the core validator.
fn key_for(name: &str) -> String {
    if name.contains('.') {
        name.to_string()
    } else {
        format!("params.{name}")
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl Config {
    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let demand = match self.demand {
            DemandConfig::Linear { a, b } => DemandFamily::Linear { a, b },
            DemandConfig::Hyperbolic => DemandFamily::Hyperbolic,
        };
        let cost = |c: CostConfig| CostFamily::Quadratic { f: c.f, d: c.d, c: c.c };
        let FineConfig::Quadratic { alpha } = self.fine;
        let p = self.params;
        ModelSpec::new(
            demand,
            cost(self.cost1),
            cost(self.cost2),
            FineFamily::Quadratic { alpha },
            Params::new(p.sigma, p.q1, p.q2, [p.k1, p.k2, p.k3, p.k4], p.tau),
        )
        .map_err(|e| match e {
            duopoly_core::Error::InvalidParameter { name, value, reason } => {
                invalid(&key_for(&name), format!("{value} {reason}"))
            }
            other => CliError::Core(other),
        })
    }

    /// Re-checks every field after parsing.
    pub fn validate(&self) -> Result<(), CliError> {
        let spec = self.model()?;
        if let Some(s) = &self.spectrum {
            if let Some(r) = s.rect {
                Rectangle::new(r.re_min, r.re_max, r.im_min, r.im_max)
                    .map_err(|e| invalid("spectrum.rect", e.to_string()))?;
            }
            if let Some(g) = s.grid_density {
                if !(g.is_finite() && g > 0.0) {
                    return Err(invalid("spectrum.grid_density", format!("{g} must be positive")));
                }
            }
            if let Some(taus) = &s.taus {
                if let Some(t) = taus.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                    return Err(invalid("spectrum.taus", format!("{t} must be nonnegative")));
                }
            }
        }
        if let Some(s) = &self.simulate {
            if !(s.t_end.is_finite() && s.t_end > 0.0) {
                return Err(invalid("simulate.t_end", format!("{} must be positive", s.t_end)));
            }
            if let Some(h) = s.step {
                if !(h.is_finite() && h > 0.0) {
                    return Err(invalid("simulate.step", format!("{h} must be positive")));
                }
            }
            match s.initial {
                InitialConfig::State { x1, x2, z1, z2 } => {
                    if ![x1, x2, z1, z2].iter().all(|v| v.is_finite()) {
                        return Err(invalid("simulate.initial.state", "components must be finite"));
                    }
                }
                InitialConfig::Perturbation(e) => {
                    if !(e.is_finite() && e > -1.0) {
                        return Err(invalid("simulate.initial.perturbation", format!("{e} must exceed -1")));
                    }
                }
            }
        }
        if let Some(s) = &self.scan {
            spec.param(&s.param)
                .map_err(|_| invalid("scan.param", format!("unknown parameter `{}`", s.param)))?;
            if !(s.from.is_finite() && s.to.is_finite() && s.from != s.to) {
                return Err(invalid("scan.to", "range must be finite and non-empty"));
            }
            if s.points < 2 {
                return Err(invalid("scan.points", format!("{} must be at least 2", s.points)));
            }
            if let Some(t) = s.tol {
                if !(t.is_finite() && t > 0.0) {
                    return Err(invalid("scan.tol", format!("{t} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Model sections of `spec`; fails for families without a configuration form.
    pub fn from_model(spec: &ModelSpec) -> Result<Self, CliError> {
        let unsupported = |what: &str| CliError::Validation(format!("{what} has no configuration form"));
        let demand = match *spec.demand() {
            DemandFamily::Linear { a, b } => DemandConfig::Linear { a, b },
            DemandFamily::Hyperbolic => DemandConfig::Hyperbolic,
            _ => return Err(unsupported("custom demand")),
        };
        let cost = |c: &CostFamily| match *c {
            CostFamily::Quadratic { f, d, c } => Ok(CostConfig { f, d, c }),
            CostFamily::Custom(_) => Err(unsupported("custom cost")),
        };
        let fine = match *spec.fine() {
            FineFamily::Quadratic { alpha } => FineConfig::Quadratic { alpha },
            FineFamily::Custom { .. } => return Err(unsupported("custom fine")),
        };
        let p = spec.params();
        Ok(Self {
            demand,
            cost1: cost(spec.cost(duopoly_core::Firm::One))?,
            cost2: cost(spec.cost(duopoly_core::Firm::Two))?,
            fine,
            params: ParamsConfig {
                sigma: p.sigma,
                q1: p.q1,
                q2: p.q2,
                k1: p.k[0],
                k2: p.k[1],
                k3: p.k[2],
                k4: p.k[3],
                tau: p.tau,
            },
            spectrum: None,
            simulate: None,
            scan: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub(crate) fn initial_state(&self, equilibrium: &StateVector) -> Option<StateVector> {
        let section = self.simulate.as_ref()?;
        Some(match section.initial {
            InitialConfig::State { x1, x2, z1, z2 } => StateVector::new(x1, x2, z1, z2),
            InitialConfig::Perturbation(e) => StateVector::from_array(equilibrium.to_array().map(|v| v * (1.0 + e))),
        })
    }
}
