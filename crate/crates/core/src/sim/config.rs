//! Scenario configuration: the JSON document consumed by `run`, plus its
//! validation rules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manager::VmFlavor;
use crate::model::Tick;
use crate::resources::ResourceVector;
use crate::scalar::Scalar;
use crate::security::AttackerPolicy;
use crate::workload::NormalizerMethod;

/// A named validation failure: which field, which constraint.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {constraint}")]
pub struct ConfigError {
    pub field: String,
    pub constraint: String,
}

impl ConfigError {
    fn new(field: &str, constraint: &str) -> Self {
        Self {
            field: field.to_string(),
            constraint: constraint.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerGroup<S> {
    pub count: usize,
    pub capacity: ResourceVector<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct ArrivalSpec<S: Scalar> {
    /// Per-tick admission probability, in `[0, 1]`.
    pub rate: S,
    pub demand_min: ResourceVector<S>,
    pub demand_max: ResourceVector<S>,
    /// Tasks per application (equal demand shares).
    #[serde(default = "default_fan_out")]
    pub fan_out: usize,
    #[serde(default = "default_max_fan_out")]
    pub max_fan_out: usize,
    pub duration_min: Tick,
    pub duration_max: Tick,
    #[serde(default = "default_users")]
    pub users: u32,
}

fn default_fan_out() -> usize {
    3
}
fn default_max_fan_out() -> usize {
    16
}
fn default_users() -> u32 {
    8
}

impl<S: Scalar> Default for ArrivalSpec<S> {
    fn default() -> Self {
        Self {
            rate: S::from_f64_lossy(0.1),
            demand_min: ResourceVector::new(
                S::from_f64_lossy(0.5),
                S::from_f64_lossy(512.0),
                S::from_f64_lossy(5.0),
                S::from_f64_lossy(50.0),
            )
            .unwrap(),
            demand_max: ResourceVector::new(
                S::from_f64_lossy(4.0),
                S::from_f64_lossy(4096.0),
                S::from_f64_lossy(40.0),
                S::from_f64_lossy(400.0),
            )
            .unwrap(),
            fan_out: default_fan_out(),
            max_fan_out: default_max_fan_out(),
            duration_min: 120,
            duration_max: 240,
            users: default_users(),
        }
    }
}

/// Per-VM synthetic usage signal: a base level plus a sinusoid plus Gaussian
/// noise, as a fraction of VM capacity, clamped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct UsageSignalSpec<S: Scalar> {
    pub base_level: S,
    pub amplitude: S,
    pub period: Tick,
    pub noise_std: S,
}

impl<S: Scalar> Default for UsageSignalSpec<S> {
    fn default() -> Self {
        Self {
            base_level: S::from_f64_lossy(0.5),
            amplitude: S::from_f64_lossy(0.2),
            period: 96,
            noise_std: S::from_f64_lossy(0.05),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSpec {
    pub enabled: bool,
    pub interval: Tick,
    /// Stale-entry window for the audit; defaults to the audit interval.
    pub liveness_window: Option<Tick>,
    pub attacker_policy: AttackerPolicy,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            interval: 1,
            liveness_window: None,
            attacker_policy: AttackerPolicy::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct ManagementSpec<S: Scalar> {
    pub interval: Tick,
    pub underload_threshold: S,
    pub overload_margin: S,
    pub consolidation: bool,
    pub relocate_victims: bool,
}

impl<S: Scalar> Default for ManagementSpec<S> {
    fn default() -> Self {
        Self {
            interval: 5,
            underload_threshold: S::from_f64_lossy(0.2),
            overload_margin: S::one(),
            consolidation: true,
            relocate_victims: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct PredictorSpec<S: Scalar> {
    pub lags: usize,
    pub learning_rate: S,
    pub epochs: usize,
    pub retrain_interval: Tick,
    /// Workload-store retention; must cover a training window (`lags + 2`).
    pub retention_horizon: Tick,
    pub normalization: NormalizerMethod,
    pub variance_floor: S,
}

impl<S: Scalar> Default for PredictorSpec<S> {
    fn default() -> Self {
        Self {
            lags: 12,
            learning_rate: S::from_f64_lossy(0.01),
            epochs: 200,
            retrain_interval: 24,
            retention_horizon: 96,
            normalization: NormalizerMethod::MinMax,
            variance_floor: S::from_f64_lossy(1e-12),
        }
    }
}

/// Linear server power model: `p_idle + (p_max - p_idle) * utilization`
/// unit-energy per tick, plus a fixed per-migration penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct EnergySpec<S: Scalar> {
    pub p_idle: S,
    pub p_max: S,
    pub migration_cost: S,
}

impl<S: Scalar> Default for EnergySpec<S> {
    fn default() -> Self {
        Self {
            p_idle: S::from_f64_lossy(0.6),
            p_max: S::one(),
            migration_cost: S::from_f64_lossy(0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackScenario {
    None,
    CoResidency,
    MultiHijack,
    GroupedCascade,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSpec {
    pub scenario: AttackScenario,
    /// Attacker VM count: `m` for multi-hijack, chain length `L` for the
    /// grouped cascade.
    pub count: usize,
    pub launch_time: Tick,
    /// Breach dwell time `D`: ticks an unauthorized link must persist before
    /// the breach completes.
    pub dwell: Tick,
    /// Register attackers inside a decoy application instead of leaving them
    /// unregistered.
    pub masquerade: bool,
    /// Flavor for attacker VMs; defaults to the smallest that fits.
    pub attacker_flavor: Option<String>,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            scenario: AttackScenario::None,
            count: 1,
            launch_time: 50,
            dwell: 5,
            masquerade: false,
            attacker_flavor: None,
        }
    }
}

/// Everything one deterministic run needs. Validate before running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct ScenarioConfig<S: Scalar> {
    pub seed: u64,
    pub duration: Tick,
    pub servers: Vec<ServerGroup<S>>,
    pub flavors: Vec<VmFlavor<S>>,
    /// Power every server on at tick zero (consolidation will trim); when
    /// false, servers start off and wake on demand.
    #[serde(default = "default_true")]
    pub servers_initially_active: bool,
    #[serde(default)]
    pub arrivals: ArrivalSpec<S>,
    #[serde(default)]
    pub usage: UsageSignalSpec<S>,
    #[serde(default)]
    pub audit: AuditSpec,
    #[serde(default)]
    pub management: ManagementSpec<S>,
    #[serde(default)]
    pub predictor: PredictorSpec<S>,
    #[serde(default)]
    pub energy: EnergySpec<S>,
    #[serde(default)]
    pub attack: AttackSpec,
}

fn default_true() -> bool {
    true
}

impl<S: Scalar> ScenarioConfig<S> {
    pub fn effective_liveness_window(&self) -> Tick {
        self.audit.liveness_window.unwrap_or(self.audit.interval)
    }

    /// Checks every scenario invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let zero = S::zero();
        let one = S::one();

        if self.servers.is_empty() {
            return Err(ConfigError::new(
                "servers",
                "at least one server group required",
            ));
        }
        for (i, g) in self.servers.iter().enumerate() {
            let field = format!("servers[{i}]");
            if g.count == 0 {
                return Err(ConfigError::new(&field, "count must be >= 1"));
            }
            g.capacity
                .validate()
                .map_err(|e| ConfigError::new(&field, &format!("invalid capacity: {e}")))?;
            if g.capacity.as_array().into_iter().any(|c| c <= zero) {
                return Err(ConfigError::new(
                    &field,
                    "every capacity component must be > 0",
                ));
            }
        }

        if self.flavors.is_empty() {
            return Err(ConfigError::new("flavors", "at least one flavor required"));
        }
        for (i, f) in self.flavors.iter().enumerate() {
            let field = format!("flavors[{i}]");
            f.capacity
                .validate()
                .map_err(|e| ConfigError::new(&field, &format!("invalid capacity: {e}")))?;
            if f.capacity.as_array().into_iter().any(|c| c <= zero) {
                return Err(ConfigError::new(
                    &field,
                    "every capacity component must be > 0",
                ));
            }
        }

        let a = &self.arrivals;
        if !(a.rate >= zero && a.rate <= one) {
            return Err(ConfigError::new("arrivals.rate", "must be within [0, 1]"));
        }
        a.demand_min
            .validate()
            .map_err(|e| ConfigError::new("arrivals.demand_min", &e.to_string()))?;
        a.demand_max
            .validate()
            .map_err(|e| ConfigError::new("arrivals.demand_max", &e.to_string()))?;
        if !a.demand_min.fits_within(a.demand_max) {
            return Err(ConfigError::new(
                "arrivals.demand_min",
                "must be <= demand_max in every component",
            ));
        }
        if a.fan_out == 0 {
            return Err(ConfigError::new("arrivals.fan_out", "must be >= 1"));
        }
        if a.fan_out > a.max_fan_out {
            return Err(ConfigError::new(
                "arrivals.fan_out",
                "must be <= max_fan_out",
            ));
        }
        if a.duration_min == 0 || a.duration_min > a.duration_max {
            return Err(ConfigError::new(
                "arrivals.duration_min",
                "must satisfy 1 <= duration_min <= duration_max",
            ));
        }
        if a.users == 0 {
            return Err(ConfigError::new("arrivals.users", "must be >= 1"));
        }

        let u = &self.usage;
        if !(u.base_level >= zero && u.base_level.is_finite()) {
            return Err(ConfigError::new(
                "usage.base_level",
                "must be finite and >= 0",
            ));
        }
        if !(u.amplitude >= zero && u.amplitude.is_finite()) {
            return Err(ConfigError::new(
                "usage.amplitude",
                "must be finite and >= 0",
            ));
        }
        if u.period == 0 {
            return Err(ConfigError::new("usage.period", "must be >= 1"));
        }
        if !(u.noise_std >= zero && u.noise_std.is_finite()) {
            return Err(ConfigError::new(
                "usage.noise_std",
                "must be finite and >= 0",
            ));
        }

        if self.audit.interval == 0 {
            return Err(ConfigError::new("audit.interval", "must be >= 1"));
        }
        if self.audit.liveness_window == Some(0) {
            return Err(ConfigError::new("audit.liveness_window", "must be >= 1"));
        }

        let m = &self.management;
        if m.interval == 0 {
            return Err(ConfigError::new("management.interval", "must be >= 1"));
        }
        if !(m.underload_threshold > zero && m.underload_threshold <= one) {
            return Err(ConfigError::new(
                "management.underload_threshold",
                "must be within (0, 1]",
            ));
        }
        if !(m.overload_margin > zero && m.overload_margin.is_finite()) {
            return Err(ConfigError::new(
                "management.overload_margin",
                "must be > 0",
            ));
        }

        let p = &self.predictor;
        if p.lags == 0 {
            return Err(ConfigError::new("predictor.lags", "must be >= 1"));
        }
        if !(p.learning_rate > zero && p.learning_rate.is_finite()) {
            return Err(ConfigError::new("predictor.learning_rate", "must be > 0"));
        }
        if p.retrain_interval == 0 {
            return Err(ConfigError::new(
                "predictor.retrain_interval",
                "must be >= 1",
            ));
        }
        if p.retention_horizon < (p.lags as Tick) + 2 {
            return Err(ConfigError::new(
                "predictor.retention_horizon",
                "must cover a training window: retention_horizon >= lags + 2",
            ));
        }
        if p.variance_floor.is_nan() || p.variance_floor < zero {
            return Err(ConfigError::new("predictor.variance_floor", "must be >= 0"));
        }

        let e = &self.energy;
        if !(e.p_idle >= zero && e.p_idle <= e.p_max && e.p_max.is_finite()) {
            return Err(ConfigError::new(
                "energy.p_idle",
                "must satisfy 0 <= p_idle <= p_max",
            ));
        }
        if !(e.migration_cost >= zero && e.migration_cost.is_finite()) {
            return Err(ConfigError::new("energy.migration_cost", "must be >= 0"));
        }

        let atk = &self.attack;
        if atk.dwell == 0 {
            return Err(ConfigError::new(
                "attack.dwell",
                "breach_dwell_time must be >= 1",
            ));
        }
        if atk.scenario != AttackScenario::None {
            if atk.count == 0 {
                return Err(ConfigError::new("attack.count", "must be >= 1"));
            }
            if atk.scenario == AttackScenario::MultiHijack && atk.count < 2 {
                return Err(ConfigError::new(
                    "attack.count",
                    "multi-hijack requires count >= 2",
                ));
            }
            if atk.scenario == AttackScenario::GroupedCascade && atk.count < 2 {
                return Err(ConfigError::new(
                    "attack.count",
                    "grouped-cascade requires chain length >= 2",
                ));
            }
            if atk.launch_time + atk.dwell > self.duration.saturating_sub(1) {
                return Err(ConfigError::new(
                    "attack.launch_time",
                    "attack must resolve within the run: launch_time + dwell <= duration - 1",
                ));
            }
            if let Some(name) = &atk.attacker_flavor {
                if !self.flavors.iter().any(|f| &f.name == name) {
                    return Err(ConfigError::new(
                        "attack.attacker_flavor",
                        "names a flavor not present in the catalogue",
                    ));
                }
            }
        }

        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ScenarioConfig<f64> {
        serde_json::from_str(
            r#"{
                "seed": 1,
                "duration": 100,
                "servers": [{"count": 2, "capacity": {"cpu": 8, "memory": 8192, "disk": 100, "bandwidth": 1000}}],
                "flavors": [{"name": "s", "capacity": {"cpu": 2, "memory": 2048, "disk": 20, "bandwidth": 200}}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_config_is_valid() {
        assert_eq!(minimal().validate(), Ok(()));
    }

    #[test]
    fn zero_dwell_names_the_constraint() {
        let mut cfg = minimal();
        cfg.attack.dwell = 0;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "attack.dwell");
        assert!(err.constraint.contains("breach_dwell_time must be >= 1"));
    }

    #[test]
    fn negative_server_capacity_is_rejected() {
        let json = r#"{
            "seed": 1,
            "duration": 10,
            "servers": [{"count": 1, "capacity": {"cpu": -1, "memory": 1, "disk": 1, "bandwidth": 1}}],
            "flavors": [{"name": "s", "capacity": {"cpu": 1, "memory": 1, "disk": 1, "bandwidth": 1}}]
        }"#;
        let cfg: ScenarioConfig<f64> = serde_json::from_str(json).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "servers[0]");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{"seed": 1, "duration": 10, "servers": [], "flavors": [], "bogus": 3}"#;
        assert!(serde_json::from_str::<ScenarioConfig<f64>>(json).is_err());
    }

    #[test]
    fn attack_must_resolve_within_run() {
        let mut cfg = minimal();
        cfg.attack.scenario = AttackScenario::CoResidency;
        cfg.attack.launch_time = 95;
        cfg.attack.dwell = 10;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "attack.launch_time");
    }

    #[test]
    fn retention_must_cover_training_window() {
        let mut cfg = minimal();
        cfg.predictor.lags = 12;
        cfg.predictor.retention_horizon = 5;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "predictor.retention_horizon");
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = minimal();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
