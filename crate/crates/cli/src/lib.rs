//! Scenario loading, preset registry, override plumbing and sweep grids for
//! the `vmshield` binary. Kept as a library so the logic is testable apart
//! from process exit codes.

use vmshield_core::sim::{AttackScenario, ScenarioConfig};
use vmshield_core::ScenarioConfig64;

/// Error classes map onto process exit codes: invalid input exits 2, I/O
/// failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(msg) | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

pub mod presets {
    /// Built-in scenarios, shipped verbatim from `presets/*.json`.
    pub const ALL: &[(&str, &str)] = &[
        (
            "benign-baseline",
            include_str!("../presets/benign-baseline.json"),
        ),
        ("co-residency", include_str!("../presets/co-residency.json")),
        ("multi-hijack", include_str!("../presets/multi-hijack.json")),
        (
            "grouped-cascade",
            include_str!("../presets/grouped-cascade.json"),
        ),
        (
            "consolidation-demo",
            include_str!("../presets/consolidation-demo.json"),
        ),
    ];

    pub fn get(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
    }

    pub fn names() -> Vec<&'static str> {
        ALL.iter().map(|(n, _)| *n).collect()
    }
}

/// Parses a scenario document, reporting serde's line/column diagnostics.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig64, CliError> {
    serde_json::from_str::<ScenarioConfig<f64>>(text)
        .map_err(|e| CliError::Invalid(format!("scenario parse error: {e}")))
}

/// Scalar overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub duration: Option<u64>,
    pub attack: Option<AttackScenario>,
    pub audit_interval: Option<u64>,
    pub dwell: Option<u64>,
    pub underload_threshold: Option<f64>,
}

pub fn apply_overrides(cfg: &mut ScenarioConfig64, ov: &Overrides) {
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(duration) = ov.duration {
        cfg.duration = duration;
    }
    if let Some(attack) = ov.attack {
        cfg.attack.scenario = attack;
    }
    if let Some(interval) = ov.audit_interval {
        cfg.audit.interval = interval;
    }
    if let Some(dwell) = ov.dwell {
        cfg.attack.dwell = dwell;
    }
    if let Some(threshold) = ov.underload_threshold {
        cfg.management.underload_threshold = threshold;
    }
}

/// Numeric scalar parameters a sweep may vary.
pub const GRID_KEYS: &[&str] = &[
    "seed",
    "duration",
    "audit_interval",
    "dwell",
    "launch_time",
    "management_interval",
    "underload_threshold",
    "overload_margin",
];

pub fn apply_grid_value(
    cfg: &mut ScenarioConfig64,
    key: &str,
    value: &str,
) -> Result<(), CliError> {
    let bad = |what: &str| CliError::Invalid(format!("grid value {value:?} for {key}: {what}"));
    let as_u64 = || {
        value
            .parse::<u64>()
            .map_err(|_| bad("expected an unsigned integer"))
    };
    let as_f64 = || value.parse::<f64>().map_err(|_| bad("expected a number"));
    match key {
        "seed" => cfg.seed = as_u64()?,
        "duration" => cfg.duration = as_u64()?,
        "audit_interval" => cfg.audit.interval = as_u64()?,
        "dwell" => cfg.attack.dwell = as_u64()?,
        "launch_time" => cfg.attack.launch_time = as_u64()?,
        "management_interval" => cfg.management.interval = as_u64()?,
        "underload_threshold" => cfg.management.underload_threshold = as_f64()?,
        "overload_margin" => cfg.management.overload_margin = as_f64()?,
        _ => {
            return Err(CliError::Invalid(format!(
                "unknown grid key {key:?}; supported: {}",
                GRID_KEYS.join(", ")
            )));
        }
    }
    Ok(())
}

/// An ordered parameter grid: the cartesian product of each `KEY=V1,V2,...`
/// flag, expanded in flag order.
#[derive(Debug, Clone)]
pub struct Grid {
    pub keys: Vec<String>,
    values: Vec<Vec<String>>,
}

impl Grid {
    pub fn parse(flags: &[String]) -> Result<Self, CliError> {
        if flags.is_empty() {
            return Err(CliError::Invalid(
                "empty grid: pass at least one --grid KEY=V1,V2".into(),
            ));
        }
        let mut keys = Vec::new();
        let mut values = Vec::new();
        for flag in flags {
            let (key, list) = flag.split_once('=').ok_or_else(|| {
                CliError::Invalid(format!("malformed --grid {flag:?}: expected KEY=V1,V2"))
            })?;
            if !GRID_KEYS.contains(&key) {
                return Err(CliError::Invalid(format!(
                    "unknown grid key {key:?}; supported: {}",
                    GRID_KEYS.join(", ")
                )));
            }
            if keys.iter().any(|k| k == key) {
                return Err(CliError::Invalid(format!("duplicate grid key {key:?}")));
            }
            let vals: Vec<String> = list
                .split(',')
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .collect();
            if vals.is_empty() {
                return Err(CliError::Invalid(format!("grid key {key:?} has no values")));
            }
            keys.push(key.to_string());
            values.push(vals);
        }
        Ok(Self { keys, values })
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in deterministic order: the last key varies fastest.
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut out = vec![Vec::new()];
        for (key, vals) in self.keys.iter().zip(&self.values) {
            let mut next = Vec::with_capacity(out.len() * vals.len());
            for prefix in &out {
                for v in vals {
                    let mut point = prefix.clone();
                    point.push((key.clone(), v.clone()));
                    next.push(point);
                }
            }
            out = next;
        }
        out
    }
}

/// Directory name for one sweep point, e.g. `audit_interval=2_dwell=5`.
pub fn point_dir_name(point: &[(String, String)]) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("_")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cartesian_product_in_flag_order() {
        let grid =
            Grid::parse(&["audit_interval=1,2,4".to_string(), "dwell=3,5".to_string()]).unwrap();
        assert_eq!(grid.len(), 6);
        let points = grid.points();
        assert_eq!(points.len(), 6);
        assert_eq!(point_dir_name(&points[0]), "audit_interval=1_dwell=3");
        assert_eq!(point_dir_name(&points[1]), "audit_interval=1_dwell=5");
        assert_eq!(point_dir_name(&points[5]), "audit_interval=4_dwell=5");
    }

    #[test]
    fn grid_rejects_unknown_keys_and_empty() {
        assert!(matches!(Grid::parse(&[]), Err(CliError::Invalid(_))));
        assert!(matches!(
            Grid::parse(&["bogus=1".to_string()]),
            Err(CliError::Invalid(_))
        ));
        assert!(matches!(
            Grid::parse(&["dwell=".to_string()]),
            Err(CliError::Invalid(_))
        ));
    }

    #[test]
    fn presets_parse_and_validate() {
        for (name, text) in presets::ALL {
            let cfg = parse_scenario(text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = parse_scenario(presets::get("benign-baseline").unwrap()).unwrap();
        apply_overrides(
            &mut cfg,
            &Overrides {
                seed: Some(99),
                duration: Some(10),
                attack: Some(AttackScenario::CoResidency),
                audit_interval: Some(2),
                dwell: Some(4),
                underload_threshold: Some(0.3),
            },
        );
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.duration, 10);
        assert_eq!(cfg.attack.scenario, AttackScenario::CoResidency);
        assert_eq!(cfg.audit.interval, 2);
        assert_eq!(cfg.attack.dwell, 4);
        assert_eq!(cfg.management.underload_threshold, 0.3);
    }
}
