//! Scenario configuration: one JSON document per scenario, unknown keys
//! rejected.

use std::path::Path;
use std::sync::Arc;

use halfspace_core::{BoundaryData, Mesh, NonlinearitySpec, ProfileParams, SolverConfig, StripDomain};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<StripDomain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
    /// Replaces the solve by an analytic field, for negative controls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<Synthetic>,
}

/// First-integral constant and sampling of the 1D profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBlock {
    #[serde(rename = "M")]
    pub m: f64,
    pub t_max: f64,
    pub n_samples: usize,
}

impl ProfileBlock {
    /// Uniform samples `t_max·k/n`, `k = 1..=n`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_samples;
        (1..=n).map(|k| self.t_max * k as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub top: TopData,
    pub sides: SideData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TopData {
    /// `v_M(λ)` from the profile block.
    Profile,
    Constant(f64),
    /// `base + amplitude·sin(2π·modes·x₁/L)`.
    Sinusoid {
        base: f64,
        amplitude: f64,
        #[serde(default = "one_mode")]
        modes: u32,
    },
}

fn one_mode() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideData {
    Periodic,
    /// `u(0, x_N) = u(L, x_N) = v_M(x_N)` from the profile block.
    Profile,
}

/// Analytic fields built on the scenario mesh instead of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Synthetic {
    /// `K_γ x_N^(2/(γ+1)) + amplitude·exp(−((x_N − center)/width)²)`.
    Bump { amplitude: f64, center: f64, width: f64 },
    Constant { value: f64 },
    /// `K_γ x_N^(2/(γ+1)) + amplitude·sin(6π x_N/λ)`.
    NonMonotone { amplitude: f64 },
}

/// Which artifact a check reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Profile,
    Field,
}

/// Expected outcome; negative controls declare `"expect": "fail"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// A check with its expected outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct CheckEntry {
    pub spec: CheckSpec,
    pub expect: Expect,
}

impl TryFrom<Value> for CheckEntry {
    type Error = String;

    fn try_from(v: Value) -> std::result::Result<Self, String> {
        let Value::Object(mut map) = v else {
            return Err("a check must be a JSON object".into());
        };
        let expect = match map.remove("expect") {
            Some(e) => serde_json::from_value(e).map_err(|e| format!("expect: {e}"))?,
            None => Expect::Pass,
        };
        let spec = serde_json::from_value(Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(Self { spec, expect })
    }
}

impl From<CheckEntry> for Value {
    fn from(c: CheckEntry) -> Value {
        let mut v = serde_json::to_value(c.spec).expect("check specs serialize");
        if c.expect == Expect::Fail {
            v["expect"] = serde_json::to_value(Expect::Fail).expect("expect serializes");
        }
        v
    }
}

/// Check names with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Central-difference residual of the profile ODE at samples with
    /// `t ≥ t_min`.
    OdeResidual {
        #[serde(default = "default_t_min")]
        t_min: f64,
        #[serde(default = "default_ode_max")]
        max: f64,
    },
    /// `max |½v′² − F(v) − M|` over the profile samples.
    FirstIntegralDrift {
        #[serde(default = "default_drift_tol")]
        tol: f64,
    },
    /// `v′` decreases towards `√(2M)` at the rate fixed by the first integral.
    AsymptoticSlope {
        #[serde(default = "default_drift_tol")]
        tol: f64,
    },
    BoundaryExponent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<Target>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<(f64, f64)>,
    },
    GradientExponent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<Target>,
        /// Angle of `η` from the `x₁` axis; 90 is `e_N`.
        #[serde(default = "default_angle")]
        angle_deg: f64,
        #[serde(default = "default_beta_min")]
        beta_min: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<(f64, f64)>,
    },
    MonotoneXn {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<Target>,
    },
    MovingPlane {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<Target>,
        /// Reflection heights; nine equally spaced levels when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<f64>>,
    },
    LowerBounds {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<Target>,
    },
    Rigidity {
        #[serde(default = "default_rigidity_tol")]
        tolerance: f64,
        #[serde(default = "default_row_fraction")]
        row_fraction: f64,
    },
    /// `sup |u − v_M(x_N)|` against the profile block's `M`.
    ProfileMatch { tol: f64 },
    /// `|M̂ − M| ≤ tol_rel·max(M, abs_floor)` against the profile block's `M`.
    EstimateM {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<Target>,
        #[serde(default = "default_tol_rel")]
        tol_rel: f64,
        #[serde(default = "default_abs_floor")]
        abs_floor: f64,
    },
    Rescale { epsilon: f64 },
    UpperBarrier { mu: f64, rho: f64 },
    /// Compares the solved field with a second solve whose top data are
    /// raised by `top_shift`.
    Comparison {
        top_shift: f64,
        #[serde(default = "default_sign_tol")]
        sign_tol: f64,
    },
}

fn default_t_min() -> f64 {
    1.0
}
fn default_ode_max() -> f64 {
    1e-3
}
fn default_drift_tol() -> f64 {
    1e-6
}
fn default_angle() -> f64 {
    90.0
}
fn default_beta_min() -> f64 {
    0.1
}
fn default_rigidity_tol() -> f64 {
    1e-3
}
fn default_row_fraction() -> f64 {
    1.0
}
fn default_tol_rel() -> f64 {
    0.01
}
fn default_abs_floor() -> f64 {
    0.5
}
fn default_sign_tol() -> f64 {
    1e-6
}

impl CheckSpec {
    /// Config name of the check.
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::OdeResidual { .. } => "ode_residual",
            CheckSpec::FirstIntegralDrift { .. } => "first_integral_drift",
            CheckSpec::AsymptoticSlope { .. } => "asymptotic_slope",
            CheckSpec::BoundaryExponent { .. } => "boundary_exponent",
            CheckSpec::GradientExponent { .. } => "gradient_exponent",
            CheckSpec::MonotoneXn { .. } => "monotone_xn",
            CheckSpec::MovingPlane { .. } => "moving_plane",
            CheckSpec::LowerBounds { .. } => "lower_bounds",
            CheckSpec::Rigidity { .. } => "rigidity",
            CheckSpec::ProfileMatch { .. } => "profile_match",
            CheckSpec::EstimateM { .. } => "estimate_m",
            CheckSpec::Rescale { .. } => "rescale",
            CheckSpec::UpperBarrier { .. } => "upper_barrier",
            CheckSpec::Comparison { .. } => "comparison",
        }
    }

    /// Artifact read by the check, given whether the scenario has a field.
    pub fn target(&self, has_field: bool) -> Target {
        let default = if has_field { Target::Field } else { Target::Profile };
        match self {
            CheckSpec::OdeResidual { .. } | CheckSpec::FirstIntegralDrift { .. } | CheckSpec::AsymptoticSlope { .. } => {
                Target::Profile
            }
            CheckSpec::BoundaryExponent { on, .. }
            | CheckSpec::GradientExponent { on, .. }
            | CheckSpec::MonotoneXn { on }
            | CheckSpec::MovingPlane { on, .. }
            | CheckSpec::LowerBounds { on }
            | CheckSpec::EstimateM { on, .. } => on.unwrap_or(default),
            CheckSpec::Rigidity { .. }
            | CheckSpec::ProfileMatch { .. }
            | CheckSpec::Rescale { .. }
            | CheckSpec::UpperBarrier { .. }
            | CheckSpec::Comparison { .. } => Target::Field,
        }
    }

    /// Whether the check compares against the profile block's `M`.
    fn needs_reference_m(&self) -> bool {
        matches!(self, CheckSpec::ProfileMatch { .. } | CheckSpec::EstimateM { .. })
    }
}

impl Scenario {
    /// Reads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_value(value)
    }

    /// Deserializes and validates a scenario document.
    pub fn from_value(value: Value) -> Result<Self> {
        let s: Scenario = serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Whether the scenario defines a 2D field.
    pub fn has_field(&self) -> bool {
        self.domain.is_some() && (self.boundary.is_some() || self.synthetic.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.=".contains(c)) {
            return Err(CliError::config(format!(
                "scenario name {:?} must be non-empty and use only letters, digits and _-.=",
                self.name
            )));
        }
        if let Some(p) = &self.profile {
            if !(p.t_max > 0.0 && p.t_max.is_finite()) || p.n_samples < 8 {
                return Err(CliError::config("profile needs t_max > 0 and n_samples >= 8"));
            }
            ProfileParams::new(self.nonlinearity.clone(), p.m)?;
        }
        if let Some(d) = &self.domain {
            d.validate()?;
        }
        self.solver.validate()?;
        if let Some(b) = &self.boundary {
            let uses_profile = b.top == TopData::Profile || b.sides == SideData::Profile;
            if uses_profile && self.profile.is_none() {
                return Err(CliError::config("profile boundary data require the profile block"));
            }
        }
        if (self.boundary.is_some() || self.synthetic.is_some()) && self.domain.is_none() {
            return Err(CliError::config("boundary data and synthetic fields require the domain block"));
        }
        if self.boundary.is_some() && self.synthetic.is_some() {
            return Err(CliError::config("a scenario has either boundary data or a synthetic field"));
        }
        let has_field = self.has_field();
        for c in &self.checks {
            let name = c.spec.name();
            match c.spec.target(has_field) {
                Target::Profile if self.profile.is_none() => {
                    return Err(CliError::config(format!("check {name} requires the profile block")));
                }
                Target::Field if !has_field => {
                    return Err(CliError::config(format!("check {name} requires domain and boundary blocks")));
                }
                _ => {}
            }
            if c.spec.needs_reference_m() && self.profile.is_none() {
                return Err(CliError::config(format!("check {name} compares against the profile block's M")));
            }
            if matches!(c.spec, CheckSpec::Comparison { .. }) && self.synthetic.is_some() {
                return Err(CliError::config("comparison needs solved fields, not a synthetic one"));
            }
        }
        Ok(())
    }

    /// Profile parameters; the profile block must be present.
    pub fn profile_params(&self) -> Result<ProfileParams> {
        let p = self.profile.ok_or_else(|| CliError::config("scenario has no profile block"))?;
        Ok(ProfileParams::new(self.nonlinearity.clone(), p.m)?)
    }

    /// Boundary data on `mesh` from the boundary block.
    pub fn boundary_data(&self, mesh: &Mesh) -> Result<BoundaryData> {
        let b = self.boundary.as_ref().ok_or_else(|| CliError::config("scenario has no boundary block"))?;
        let mut data = match b.sides {
            SideData::Profile => BoundaryData::from_profile(&self.profile_params()?, mesh).map_err(CliError::Solver)?,
            SideData::Periodic => BoundaryData::periodic(Arc::new(|_| 0.0)),
        };
        match b.top {
            TopData::Profile => {
                let v = self.profile_params()?.value(mesh.height()).map_err(CliError::Solver)?;
                data.top = Arc::new(move |_| v);
            }
            TopData::Constant(c) => data.top = Arc::new(move |_| c),
            TopData::Sinusoid { base, amplitude, modes } => {
                let k = std::f64::consts::TAU * modes as f64 / mesh.width();
                data.top = Arc::new(move |x| base + amplitude * (k * x).sin());
            }
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "name": "demo",
            "nonlinearity": {"kind": "PurePower", "gamma": 3.0},
            "profile": {"M": 0.5, "t_max": 4.0, "n_samples": 40},
            "domain": {"L": 1.0, "lambda": 1.0, "nx": 8, "ny": 16, "q": 2.0},
            "boundary": {"top": "profile", "sides": "profile"},
            "checks": [{"check": "monotone_xn"}, {"check": "moving_plane", "levels": [0.2], "expect": "fail"}]
        })
    }

    #[test]
    fn parses_checks_with_expectations() {
        let s = Scenario::from_value(base()).unwrap();
        assert_eq!(s.checks.len(), 2);
        assert_eq!(s.checks[0].expect, Expect::Pass);
        assert_eq!(s.checks[1].expect, Expect::Fail);
        assert_eq!(s.checks[1].spec, CheckSpec::MovingPlane { on: None, levels: Some(vec![0.2]) });
        let back = Scenario::from_value(serde_json::to_value(&s).unwrap()).unwrap();
        assert_eq!(back.checks, s.checks);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let mut v = base();
        v["solver"] = json!({"newton_tolerance": 1e-8});
        assert!(matches!(Scenario::from_value(v), Err(CliError::Config(_))));
        let mut v = base();
        v["checks"] = json!([{"check": "monotone_xn", "level": 3}]);
        assert!(matches!(Scenario::from_value(v), Err(CliError::Config(_))));
        let mut v = base();
        v["checks"] = json!([{"check": "no_such_check"}]);
        assert!(matches!(Scenario::from_value(v), Err(CliError::Config(_))));
    }

    #[test]
    fn block_requirements_are_enforced() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("profile");
        assert!(Scenario::from_value(v).is_err(), "profile boundary data need the profile block");
        let mut v = base();
        v.as_object_mut().unwrap().remove("boundary");
        let s = Scenario::from_value(v.clone()).unwrap();
        assert_eq!(s.checks[0].spec.target(s.has_field()), Target::Profile, "falls back to the profile");
        v["checks"] = json!([{"check": "rigidity"}]);
        assert!(Scenario::from_value(v).is_err(), "field-only checks need boundary data");
        let mut v = base();
        v["domain"]["ny"] = json!(2);
        assert!(matches!(Scenario::from_value(v), Err(CliError::Config(_))));
        let mut v = base();
        v["name"] = json!("has space");
        assert!(Scenario::from_value(v).is_err());
    }

    #[test]
    fn targets_default_to_the_field_when_one_exists() {
        let s = Scenario::from_value(base()).unwrap();
        assert_eq!(s.checks[0].spec.target(true), Target::Field);
        assert_eq!(s.checks[0].spec.target(false), Target::Profile);
        let drift = CheckSpec::FirstIntegralDrift { tol: 1e-6 };
        assert_eq!(drift.target(true), Target::Profile);
    }

    #[test]
    fn sinusoidal_top_data() {
        let mut v = base();
        v["boundary"] = json!({"top": {"sinusoid": {"base": 2.0, "amplitude": 0.5, "modes": 2}}, "sides": "periodic"});
        let s = Scenario::from_value(v).unwrap();
        let mesh = halfspace_core::build_mesh(&s.domain.unwrap()).unwrap();
        let bc = s.boundary_data(&mesh).unwrap();
        assert!(bc.is_periodic());
        assert!(((bc.top)(0.125) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn profile_grid_is_uniform_from_the_first_step() {
        let p = ProfileBlock { m: 0.0, t_max: 2.0, n_samples: 4 };
        assert_eq!(p.grid(), vec![0.5, 1.0, 1.5, 2.0]);
    }
}
