//! Resource-usage recording, normalization and per-VM forecasting.
//!
//! The store keeps a rolling window of per-VM usage samples; the predictor
//! modules turn that history into per-server forecasts that drive proactive
//! overload and underload handling.

mod features;
mod normalize;
mod predictor;

pub use features::select_features;
pub use normalize::{Normalizer, NormalizerMethod};
pub use predictor::{ar_gradient, ar_loss, PredictorConfig, VmPredictor};

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};

use thiserror::Error;

use crate::datacenter::DatacenterState;
use crate::model::{ServerId, Tick, VmId, VmState};
use crate::resources::{ResourceDim, ResourceVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("out-of-order record for {vm}: t={time} is before latest t={latest}")]
    OutOfOrder { vm: VmId, time: Tick, latest: Tick },
    #[error("cannot fit a normalizer on an empty series")]
    EmptySeries,
    #[error("degenerate series: zero spread under the requested method")]
    DegenerateSeries,
    #[error("not enough history for {vm}: have {have} samples, need {need}")]
    NotEnoughHistory { vm: VmId, have: usize, need: usize },
    #[error("missing forecast for hosted vm {0}")]
    IncompleteForecast(VmId),
}

/// One observed usage sample of a VM on its host.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsageRecord<S> {
    pub time: Tick,
    pub vm: VmId,
    pub server: ServerId,
    pub usage: ResourceVector<S>,
}

/// Append-only usage history with horizon-based eviction.
///
/// Records older than `retention_horizon` ticks relative to the latest
/// recorded time are evicted on append. Per-VM record times must be
/// monotonically non-decreasing.
#[derive(Debug, Clone)]
pub struct WorkloadStore<S> {
    series: BTreeMap<VmId, VecDeque<UsageRecord<S>>>,
    latest: Tick,
    retention_horizon: Tick,
}

impl<S: Scalar> WorkloadStore<S> {
    pub fn new(retention_horizon: Tick) -> Self {
        Self {
            series: BTreeMap::new(),
            latest: 0,
            retention_horizon,
        }
    }

    pub fn retention_horizon(&self) -> Tick {
        self.retention_horizon
    }

    /// Appends one record and applies horizon eviction.
    pub fn record(&mut self, rec: UsageRecord<S>) -> Result<(), WorkloadError> {
        if let Some(last) = self.series.get(&rec.vm).and_then(|q| q.back()) {
            if rec.time < last.time {
                return Err(WorkloadError::OutOfOrder {
                    vm: rec.vm,
                    time: rec.time,
                    latest: last.time,
                });
            }
        }
        let vm = rec.vm;
        self.series.entry(vm).or_default().push_back(rec);
        if rec.time > self.latest {
            self.latest = rec.time;
            self.evict_all();
        } else {
            self.evict_series(vm);
        }
        Ok(())
    }

    fn eviction_cutoff(&self) -> Option<Tick> {
        self.latest.checked_sub(self.retention_horizon)
    }

    fn evict_all(&mut self) {
        if let Some(cutoff) = self.eviction_cutoff() {
            self.series.retain(|_, q| {
                while q.front().is_some_and(|r| r.time < cutoff) {
                    q.pop_front();
                }
                !q.is_empty()
            });
        }
    }

    fn evict_series(&mut self, vm: VmId) {
        if let Some(cutoff) = self.eviction_cutoff() {
            if let Some(q) = self.series.get_mut(&vm) {
                while q.front().is_some_and(|r| r.time < cutoff) {
                    q.pop_front();
                }
                if q.is_empty() {
                    self.series.remove(&vm);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.series.values().map(|q| q.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn latest_time(&self) -> Tick {
        self.latest
    }

    pub fn count_for(&self, vm: VmId) -> usize {
        self.series.get(&vm).map_or(0, |q| q.len())
    }

    pub fn records_for(&self, vm: VmId) -> impl Iterator<Item = &UsageRecord<S>> {
        self.series.get(&vm).into_iter().flatten()
    }

    pub fn last_usage(&self, vm: VmId) -> Option<ResourceVector<S>> {
        self.series.get(&vm).and_then(|q| q.back()).map(|r| r.usage)
    }

    /// One resource dimension of a VM's history, oldest first.
    pub fn dim_series(&self, vm: VmId, dim: ResourceDim) -> Vec<S> {
        self.records_for(vm).map(|r| r.usage.get(dim)).collect()
    }

    /// The last `k` values of one dimension, oldest first (shorter when the
    /// history is).
    pub fn dim_tail(&self, vm: VmId, dim: ResourceDim, k: usize) -> Vec<S> {
        let len = self.count_for(vm);
        self.records_for(vm)
            .skip(len.saturating_sub(k))
            .map(|r| r.usage.get(dim))
            .collect()
    }

    /// Writes the whole store as CSV: `time,vm_id,server_id,cpu,mem,disk,bw`,
    /// rows sorted by time then VM id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,vm_id,server_id,cpu,mem,disk,bw")?;
        let mut rows: Vec<&UsageRecord<S>> = self.series.values().flatten().collect();
        rows.sort_by_key(|r| (r.time, r.vm));
        for r in rows {
            let [c, m, d, b] = r.usage.as_array();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.time, r.vm.0, r.server.0, c, m, d, b
            )?;
        }
        Ok(())
    }
}

/// Component-wise sum of hosted-VM forecasts for one server.
///
/// Every active VM hosted on the server must have a forecast.
pub fn predict_server<S: Scalar>(
    forecasts: &BTreeMap<VmId, ResourceVector<S>>,
    state: &DatacenterState<S>,
    server: ServerId,
) -> Result<ResourceVector<S>, WorkloadError> {
    let srv = match state.servers.get(&server) {
        Some(s) => s,
        None => return Ok(ResourceVector::zero()),
    };
    let mut total = ResourceVector::zero();
    for vm_id in &srv.hosted {
        if state
            .vms
            .get(vm_id)
            .is_some_and(|vm| vm.state == VmState::Active)
        {
            let f = forecasts
                .get(vm_id)
                .ok_or(WorkloadError::IncompleteForecast(*vm_id))?;
            total += *f;
        }
    }
    Ok(total)
}
