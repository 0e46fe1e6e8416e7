//! Scenario description, read from JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    QuadraticWalk,
    RidgeStream,
    LogisticStream,
    Lqr,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::QuadraticWalk => "quadratic-walk",
            Family::RidgeStream => "ridge-stream",
            Family::LogisticStream => "logistic-stream",
            Family::Lqr => "lqr",
        }
    }
}

/// How the minimizer sequence moves between rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkMode {
    /// Uniform random direction, step length exactly `epsilon`.
    #[default]
    Fixed,
    /// Uniform random direction, step length uniform in `[0, epsilon]`.
    Lazy,
    /// Alternates between two far-apart clusters. Only the competitive ratio
    /// is checked.
    Adversarial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disturbance {
    /// `‖R^{½}B^{−1}w_t‖` follows the walk mode, so the offsets are
    /// `epsilon`-smooth.
    #[default]
    Bounded,
    /// Student-t magnitudes with two degrees of freedom: no bound at all.
    HeavyTailed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceModeSetting {
    #[default]
    ZeroShifted,
    AbsoluteLevel,
}

impl From<BalanceModeSetting> for soco_core::BalanceMode {
    fn from(mode: BalanceModeSetting) -> Self {
        match mode {
            BalanceModeSetting::ZeroShifted => soco_core::BalanceMode::ZeroShifted,
            BalanceModeSetting::AbsoluteLevel => soco_core::BalanceMode::AbsoluteLevel,
        }
    }
}

/// `"auto"` (`β = 2 + 10/m`) or an explicit positive number.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum BetaSetting {
    #[default]
    Auto,
    Fixed(f64),
}

impl BetaSetting {
    pub fn resolve(self, modulus: f64) -> f64 {
        match self {
            BetaSetting::Auto => soco_core::obd::default_beta(modulus),
            BetaSetting::Fixed(beta) => beta,
        }
    }
}

impl Serialize for BetaSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BetaSetting::Auto => s.serialize_str("auto"),
            BetaSetting::Fixed(b) => s.serialize_f64(*b),
        }
    }
}

impl<'de> Deserialize<'de> for BetaSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct BetaVisitor;
        impl Visitor<'_> for BetaVisitor {
            type Value = BetaSetting;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"auto\" or a positive number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BetaSetting, E> {
                if v == "auto" {
                    Ok(BetaSetting::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<BetaSetting, E> {
                Ok(BetaSetting::Fixed(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BetaSetting, E> {
                Ok(BetaSetting::Fixed(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BetaSetting, E> {
                Ok(BetaSetting::Fixed(v as f64))
            }
        }
        d.deserialize_any(BetaVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    /// Smallest eigenvalue of every `Q_t`.
    pub state_modulus: f64,
    /// Entries of `B − I` are drawn from `[−spread, spread]`.
    pub control_spread: f64,
    /// Eigenvalues of `R` are drawn from `[1, control_cost_max]`.
    pub control_cost_max: f64,
    pub disturbance: Disturbance,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            state_modulus: 1.0,
            control_spread: 0.3,
            control_cost_max: 2.0,
            disturbance: Disturbance::Bounded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// First-order residual the offline optimum must reach.
    pub offline: f64,
    pub ratio: f64,
    pub accuracy: f64,
    pub regret_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            offline: 1e-10,
            ratio: 1e-3,
            accuracy: 1e-6,
            regret_floor: -1e-6,
        }
    }
}

impl Tolerances {
    pub fn verdicts(&self) -> soco_core::analysis::VerdictTolerances {
        soco_core::analysis::VerdictTolerances {
            ratio: self.ratio,
            accuracy: self.accuracy,
            regret_floor: self.regret_floor,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// Directory for the CSV and summary; falls back to `$SOCO_OUT_DIR`,
    /// then `./soco-out`.
    pub dir: Option<PathBuf>,
    /// File stem; defaults to the scenario name.
    pub stem: Option<String>,
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SOCO_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub family: Family,
    pub dimension: usize,
    pub horizon: usize,
    /// Smallest eigenvalue of the generated quadratics.
    #[serde(default)]
    pub modulus: Option<f64>,
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    pub epsilon: f64,
    #[serde(default)]
    pub beta: BetaSetting,
    pub seed: u64,
    #[serde(default)]
    pub walk: WalkMode,
    #[serde(default = "default_condition")]
    pub condition_number: f64,
    /// Rows per round for the regression families.
    #[serde(default)]
    pub samples_per_round: Option<usize>,
    #[serde(default)]
    pub balance_mode: BalanceModeSetting,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_condition() -> f64 {
    10.0
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad("epsilon must be finite and nonnegative".into());
        }
        if !(self.condition_number >= 1.0) {
            return bad(format!("condition_number must be at least 1, got {}", self.condition_number));
        }
        if let Some(m) = self.modulus {
            if !(m > 0.0) || !m.is_finite() {
                return bad("modulus must be finite and positive".into());
            }
        }
        if let BetaSetting::Fixed(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return bad("beta must be \"auto\" or a positive number".into());
            }
        }
        match self.family {
            Family::RidgeStream | Family::LogisticStream => {
                for (name, value) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
                    match value {
                        Some(v) if v > 0.0 && v.is_finite() => {}
                        Some(_) => return bad(format!("{name} must be positive")),
                        None => return bad(format!("{} needs {name}", self.family.as_str())),
                    }
                }
                if self.family == Family::RidgeStream && self.samples() < self.dimension {
                    return bad("ridge-stream needs samples_per_round >= dimension".into());
                }
            }
            Family::Lqr => {
                let sys = self.system_spec();
                if !(sys.state_modulus > 0.0) || !(sys.control_cost_max >= 1.0) || !(sys.control_spread >= 0.0) {
                    return bad("system needs state_modulus > 0, control_cost_max >= 1, control_spread >= 0".into());
                }
            }
            Family::QuadraticWalk => {}
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.family.as_str(), self.seed))
    }

    pub fn modulus_or_default(&self) -> f64 {
        self.modulus.unwrap_or(1.0)
    }

    pub fn samples(&self) -> usize {
        self.samples_per_round.unwrap_or(2 * self.dimension + 2)
    }

    pub fn system_spec(&self) -> SystemSpec {
        self.system.clone().unwrap_or_default()
    }

    /// Whether the accuracy and regret guarantees apply: they need a smooth
    /// minimizer sequence.
    pub fn smooth_checks(&self) -> bool {
        self.walk != WalkMode::Adversarial
            && !(self.family == Family::Lqr && self.system_spec().disturbance == Disturbance::HeavyTailed)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("soco-out"))
    }

    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| self.name())
    }

    /// Overrides one numeric field by name, for sweeps.
    pub fn with_param(&self, param: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(HarnessError::Config(format!("{param} needs a whole number, got {v}")))
            }
        };
        match param {
            "epsilon" => c.epsilon = value,
            "modulus" => c.modulus = Some(value),
            "beta" => c.beta = BetaSetting::Fixed(value),
            "lambda1" => c.lambda1 = Some(value),
            "lambda2" => c.lambda2 = Some(value),
            "condition_number" => c.condition_number = value,
            "horizon" => c.horizon = as_count(value)?,
            "dimension" => c.dimension = as_count(value)?,
            "seed" => c.seed = as_count(value)? as u64,
            other => return Err(HarnessError::Config(format!("unknown sweep parameter `{other}`"))),
        }
        c.name = Some(format!("{}-{param}{value}", self.name()));
        c.output.stem = None;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"family": "quadratic-walk", "dimension": 3, "horizon": 20, "epsilon": 0.1, "seed": 1}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.beta, BetaSetting::Auto);
        assert_eq!(c.walk, WalkMode::Fixed);
        assert_eq!(c.condition_number, 10.0);
        assert_eq!(c.name(), "quadratic-walk-seed1");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 3");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn beta_accepts_auto_and_numbers() {
        let c = ScenarioConfig::from_json(&MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"beta\": 3")).unwrap();
        assert_eq!(c.beta, BetaSetting::Fixed(3.0));
        assert!(ScenarioConfig::from_json(&MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"beta\": \"big\"")).is_err());
        assert_eq!(BetaSetting::Auto.resolve(10.0), 3.0);
    }

    #[test]
    fn regression_needs_lambdas() {
        let text = MINIMAL.replace("quadratic-walk", "ridge-stream");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn infeasible_condition_number() {
        let text = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"condition_number\": 0.5");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn sweep_override() {
        let c = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.with_param("epsilon", 0.2).unwrap().epsilon, 0.2);
        assert_eq!(c.with_param("horizon", 7.0).unwrap().horizon, 7);
        assert!(c.with_param("horizon", 7.5).is_err());
        assert!(c.with_param("nope", 1.0).is_err());
    }
}
