//! Artifact emission: metrics summary JSON, per-tick CSV and the JSON-lines
//! action and audit logs. All output is byte-deterministic for a given run.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::model::Tick;
use crate::scalar::Scalar;
use crate::sim::RunOutput;

/// The flat `metrics.json` document; carries the seed verbatim for
/// provenance.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsSummary<S> {
    pub seed: u64,
    pub duration: Tick,
    pub energy: S,
    pub active_server_ticks: u64,
    pub migrations: u64,
    pub terminations: u64,
    pub false_positive_terminations: u64,
    pub sla_violations: u64,
    pub attacks_established: u64,
    pub breaches_prevented: u64,
    pub breaches_succeeded: u64,
    pub apps_admitted: u64,
    pub apps_completed: u64,
    pub apps_failed: u64,
    pub apps_rejected: u64,
    pub unresolved_overloads: u64,
    pub invariant_violations: u64,
}

impl<S: Scalar + Serialize> RunOutput<S> {
    pub fn metrics_summary(&self) -> MetricsSummary<S> {
        let m = &self.metrics;
        MetricsSummary {
            seed: self.seed,
            duration: self.duration,
            energy: m.energy,
            active_server_ticks: m.active_server_ticks,
            migrations: m.migrations,
            terminations: m.terminations,
            false_positive_terminations: m.false_positive_terminations,
            sla_violations: m.sla_violations,
            attacks_established: m.attacks_established,
            breaches_prevented: m.breaches_prevented,
            breaches_succeeded: m.breaches_succeeded,
            apps_admitted: m.apps_admitted,
            apps_completed: m.apps_completed,
            apps_failed: m.apps_failed,
            apps_rejected: m.apps_rejected,
            unresolved_overloads: m.unresolved_overloads,
            invariant_violations: m.invariant_violations,
        }
    }

    pub fn metrics_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.metrics_summary())
            .expect("metrics serialize to JSON");
        text.push('\n');
        text
    }

    /// `tick,energy,active_servers,migrations,terminations,breaches_prevented,breaches_succeeded`
    /// with cumulative counters, `.` decimal separator.
    pub fn ticks_csv(&self) -> String {
        let mut out = String::from(
            "tick,energy,active_servers,migrations,terminations,breaches_prevented,breaches_succeeded\n",
        );
        for row in &self.ticks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.tick,
                row.energy,
                row.active_servers,
                row.migrations,
                row.terminations,
                row.breaches_prevented,
                row.breaches_succeeded
            ));
        }
        out
    }

    pub fn actions_jsonl(&self) -> String {
        let mut out = String::new();
        for action in &self.actions {
            out.push_str(&serde_json::to_string(action).expect("action serializes"));
            out.push('\n');
        }
        out
    }

    pub fn audit_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.audits {
            out.push_str(&serde_json::to_string(record).expect("audit record serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes `metrics.json`, `ticks.csv`, `actions.jsonl` and `audit.jsonl`
    /// into `dir`, creating it if needed.
    pub fn write_artifacts(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.json"), self.metrics_json())?;
        fs::write(dir.join("ticks.csv"), self.ticks_csv())?;
        fs::write(dir.join("actions.jsonl"), self.actions_jsonl())?;
        fs::write(dir.join("audit.jsonl"), self.audit_jsonl())?;
        Ok(())
    }

    /// Optional dump of the retained workload store (`workload.csv`).
    pub fn write_workload_csv(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("workload.csv"), &self.workload_csv)
    }
}

#[cfg(test)]
mod tests {
    use crate::sim::{run, ScenarioConfig};

    fn tiny_run() -> crate::RunOutput64 {
        let cfg: ScenarioConfig<f64> = serde_json::from_str(
            r#"{
                "seed": 5,
                "duration": 30,
                "servers": [{"count": 2, "capacity": {"cpu": 8, "memory": 8192, "disk": 100, "bandwidth": 1000}}],
                "flavors": [{"name": "s", "capacity": {"cpu": 2, "memory": 2048, "disk": 20, "bandwidth": 200}}],
                "arrivals": {
                    "rate": 0.5,
                    "demand_min": {"cpu": 1, "memory": 1024, "disk": 10, "bandwidth": 100},
                    "demand_max": {"cpu": 2, "memory": 2048, "disk": 20, "bandwidth": 200},
                    "fan_out": 2,
                    "duration_min": 5,
                    "duration_max": 10
                }
            }"#,
        )
        .unwrap();
        run(&cfg).unwrap()
    }

    #[test]
    fn metrics_json_carries_seed_and_counters() {
        let out = tiny_run();
        let value: serde_json::Value = serde_json::from_str(&out.metrics_json()).unwrap();
        assert_eq!(value["seed"], 5);
        assert_eq!(value["duration"], 30);
        assert!(value["energy"].is_number());
        assert_eq!(value["terminations"], 0);
    }

    #[test]
    fn ticks_csv_has_one_row_per_tick() {
        let out = tiny_run();
        let csv = out.ticks_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "tick,energy,active_servers,migrations,terminations,breaches_prevented,breaches_succeeded"
        );
        assert_eq!(lines.len(), 31);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[30].starts_with("29,"));
    }

    #[test]
    fn action_log_lines_parse_with_expected_fields() {
        let out = tiny_run();
        let jsonl = out.actions_jsonl();
        assert!(!jsonl.is_empty(), "expected admission power-ons at least");
        for line in jsonl.lines() {
            let value: serde_json::Value = serde_json::from_str(line).unwrap();
            for field in ["t", "action", "subject", "from", "to", "reason"] {
                assert!(value.get(field).is_some(), "missing {field} in {line}");
            }
        }
    }

    #[test]
    fn artifacts_land_on_disk() {
        let out = tiny_run();
        let dir = std::env::temp_dir().join(format!("vmshield-out-test-{}", std::process::id()));
        out.write_artifacts(&dir).unwrap();
        out.write_workload_csv(&dir).unwrap();
        for file in
            ["metrics.json", "ticks.csv", "actions.jsonl", "audit.jsonl", "workload.csv"]
        {
            assert!(dir.join(file).is_file(), "missing {file}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
