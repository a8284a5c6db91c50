//! Scenario configuration: JSON schema, strict validation, and dotted-path
//! overrides. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Schema(String),
    Override(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Parse(m) => write!(f, "malformed JSON: {m}"),
            ConfigError::Schema(m) => write!(f, "invalid config: {m}"),
            ConfigError::Override(m) => write!(f, "invalid override: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    #[serde(rename = "spherical")]
    Spherical,
    #[serde(rename = "planar")]
    Planar,
    #[serde(rename = "planar-levelset")]
    PlanarLevelSet,
    #[serde(rename = "planar-oracle-compare")]
    PlanarOracleCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalBallConfig {
    pub inertia: f64,
    pub mass: f64,
    #[serde(default)]
    pub spin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalParamsConfig {
    pub fixed_radius: f64,
    pub ball_radius: f64,
    pub inertia: [f64; 3],
    pub balls: Vec<SphericalBallConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalInitialConfig {
    pub omega: [f64; 3],
    pub gammas: Vec<[f64; 3]>,
    /// Integrate the full configuration (attitudes included).
    #[serde(default)]
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarBallConfig {
    pub mass: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarParamsConfig {
    pub radius: f64,
    pub plate_mass: f64,
    pub plate_inertia: f64,
    pub balls: Vec<PlanarBallConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarInitialConfig {
    pub v: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<[f64; 3]>,
    /// Ball centers; enables full (pose-space) runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<[f64; 2]>>,
    /// Reduced moments (N1, N2, M); alternative to `centers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nvec: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spins: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetInitialConfig {
    /// Level-set coordinates (v_phi, N1, N2).
    pub y: [f64; 3],
    /// Fixed integral values (d1, d2, d3).
    pub d: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub h: f64,
    pub t_end: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_sample_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolCheck {
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportCheckConfig {
    pub tolerance: f64,
    #[serde(default = "default_transport_t_end")]
    pub t_end: f64,
    /// Replace the measure density by 1 (negative control; the check is
    /// then expected to fail).
    #[serde(default)]
    pub unit_density: bool,
}

fn default_transport_t_end() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceCheckConfig {
    pub tolerance: f64,
    #[serde(default = "default_divergence_samples")]
    pub samples: usize,
}

fn default_divergence_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionCheckConfig {
    pub tolerance: f64,
    pub orthogonality_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormCheckConfig {
    pub tolerance: f64,
    pub v_phi_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckConfig {
    pub trajectory_tolerance: f64,
    pub elimination_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorCheckConfig {
    pub tolerance: f64,
    #[serde(default = "default_commutator_samples")]
    pub samples: usize,
}

fn default_commutator_samples() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderCheckConfig {
    pub min_order: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral_drift: Option<TolCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_residuals: Option<TolCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_transport: Option<TransportCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangle: Option<TolCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_commutator: Option<CommutatorCheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderCheckConfig>,
    /// Require admissibility flags to stay clean; on by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_path: Option<String>,
}

/// Per-system payload, dispatched on the `system` key.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemConfig {
    Spherical {
        params: SphericalParamsConfig,
        initial: SphericalInitialConfig,
    },
    Planar {
        params: PlanarParamsConfig,
        initial: PlanarInitialConfig,
    },
    PlanarLevelSet {
        params: PlanarParamsConfig,
        initial: LevelSetInitialConfig,
    },
    PlanarOracleCompare {
        params: PlanarParamsConfig,
        initial: PlanarInitialConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub integration: IntegrationConfig,
    pub checks: ChecksConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

const TOP_LEVEL_KEYS: &[&str] = &[
    "system",
    "params",
    "initial",
    "integration",
    "checks",
    "output",
    "seed",
];

fn field<'a>(root: &'a Value, key: &str) -> Result<&'a Value, ConfigError> {
    root.get(key)
        .ok_or_else(|| ConfigError::Schema(format!("missing required key '{key}'")))
}

fn parse_section<T: serde::de::DeserializeOwned>(
    value: &Value,
    section: &str,
) -> Result<T, ConfigError> {
    serde_json::from_value(value.clone())
        .map_err(|e| ConfigError::Schema(format!("in '{section}': {e}")))
}

impl ScenarioConfig {
    /// Parse and schema-validate a configuration value. Unknown keys are
    /// rejected at every level.
    pub fn from_value(root: &Value) -> Result<Self, ConfigError> {
        let obj = root
            .as_object()
            .ok_or_else(|| ConfigError::Schema("top level must be an object".into()))?;
        for key in obj.keys() {
            if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Schema(format!("unknown key '{key}'")));
            }
        }
        let kind: SystemKind = parse_section(field(root, "system")?, "system")?;
        let params = field(root, "params")?;
        let initial = field(root, "initial")?;
        let system = match kind {
            SystemKind::Spherical => SystemConfig::Spherical {
                params: parse_section(params, "params")?,
                initial: parse_section(initial, "initial")?,
            },
            SystemKind::Planar => SystemConfig::Planar {
                params: parse_section(params, "params")?,
                initial: parse_section(initial, "initial")?,
            },
            SystemKind::PlanarLevelSet => SystemConfig::PlanarLevelSet {
                params: parse_section(params, "params")?,
                initial: parse_section(initial, "initial")?,
            },
            SystemKind::PlanarOracleCompare => SystemConfig::PlanarOracleCompare {
                params: parse_section(params, "params")?,
                initial: parse_section(initial, "initial")?,
            },
        };
        let integration = parse_section(field(root, "integration")?, "integration")?;
        let checks = match root.get("checks") {
            Some(v) => parse_section(v, "checks")?,
            None => ChecksConfig::default(),
        };
        let output = match root.get("output") {
            Some(v) => parse_section(v, "output")?,
            None => OutputConfig::default(),
        };
        let seed = match root.get("seed") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| ConfigError::Schema("'seed' must be an unsigned integer".into()))?,
            None => 0,
        };
        Ok(Self {
            system,
            integration,
            checks,
            output,
            seed,
        })
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_value(&root)
    }

    /// Serialize back to the canonical JSON layout.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_value(&self) -> Value {
        let (system, params, initial) = match &self.system {
            SystemConfig::Spherical { params, initial } => (
                "spherical",
                serde_json::to_value(params).unwrap(),
                serde_json::to_value(initial).unwrap(),
            ),
            SystemConfig::Planar { params, initial } => (
                "planar",
                serde_json::to_value(params).unwrap(),
                serde_json::to_value(initial).unwrap(),
            ),
            SystemConfig::PlanarLevelSet { params, initial } => (
                "planar-levelset",
                serde_json::to_value(params).unwrap(),
                serde_json::to_value(initial).unwrap(),
            ),
            SystemConfig::PlanarOracleCompare { params, initial } => (
                "planar-oracle-compare",
                serde_json::to_value(params).unwrap(),
                serde_json::to_value(initial).unwrap(),
            ),
        };
        serde_json::json!({
            "system": system,
            "params": params,
            "initial": initial,
            "integration": serde_json::to_value(&self.integration).unwrap(),
            "checks": serde_json::to_value(&self.checks).unwrap(),
            "output": serde_json::to_value(&self.output).unwrap(),
            "seed": self.seed,
        })
    }
}

/// Apply one `key=value` override with a dotted path into the raw JSON
/// value, creating intermediate objects as needed. The value is parsed as
/// JSON when possible and falls back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(format!("expected key=value, got '{spec}'")))?;
    if path.is_empty() {
        return Err(ConfigError::Override("empty override path".into()));
    }
    let new_value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));

    let segments: Vec<&str> = path.split('.').collect();
    let mut cursor = root;
    for (k, segment) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        if let Ok(index) = segment.parse::<usize>() {
            let arr = cursor.as_array_mut().ok_or_else(|| {
                ConfigError::Override(format!("'{segment}' indexes a non-array in '{path}'"))
            })?;
            if index >= arr.len() {
                return Err(ConfigError::Override(format!(
                    "index {index} out of bounds in '{path}'"
                )));
            }
            if last {
                arr[index] = new_value;
                return Ok(());
            }
            cursor = &mut arr[index];
        } else {
            let obj = cursor.as_object_mut().ok_or_else(|| {
                ConfigError::Override(format!("'{segment}' indexes a non-object in '{path}'"))
            })?;
            if last {
                obj.insert(segment.to_string(), new_value);
                return Ok(());
            }
            cursor = obj
                .entry(segment.to_string())
                .or_insert_with(|| Value::Object(serde_json::Map::new()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": "planar",
        "params": {"radius": 0.5, "plate_mass": 2.0, "plate_inertia": 1.0,
                   "balls": [{"mass": 1.0, "inertia": 0.1}]},
        "initial": {"v": [0.1, 0.0, 0.2], "nvec": [0.0, 0.0, 1.0]},
        "integration": {"h": 1e-3, "t_end": 1.0}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.integration.sample_every, 10);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.checks.integral_drift.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_at_all_levels() {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v["bogus"] = Value::Bool(true);
        assert!(matches!(
            ScenarioConfig::from_value(&v),
            Err(ConfigError::Schema(_))
        ));

        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v["integration"]["adaptive"] = Value::Bool(true);
        let err = ScenarioConfig::from_value(&v).unwrap_err();
        assert!(err.to_string().contains("integration"));
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        apply_override(&mut v, "integration.h=5e-4").unwrap();
        apply_override(&mut v, "seed=9").unwrap();
        apply_override(&mut v, "initial.v.2=0.5").unwrap();
        apply_override(&mut v, "output.csv_path=/tmp/x.csv").unwrap();
        let cfg = ScenarioConfig::from_value(&v).unwrap();
        assert_eq!(cfg.integration.h, 5e-4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output.csv_path.as_deref(), Some("/tmp/x.csv"));
        match cfg.system {
            SystemConfig::Planar { initial, .. } => assert_eq!(initial.v[2], 0.5),
            _ => panic!("wrong system"),
        }
    }

    #[test]
    fn round_trip_is_stable() {
        let cfg = ScenarioConfig::from_str(MINIMAL).unwrap();
        let text = serde_json::to_string_pretty(&cfg.to_value()).unwrap();
        let again = ScenarioConfig::from_str(&text).unwrap();
        assert_eq!(cfg, again);
    }
}
