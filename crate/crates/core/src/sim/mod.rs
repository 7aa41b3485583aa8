//! Deterministic discrete-event engine tying the units together.
//!
//! Each tick: application arrivals and completions, per-VM usage sampling,
//! benign and attack link events, link audits, the management cycle (security
//! terminations, overload migration, underload consolidation), breach
//! resolution and energy accounting. Two runs with the same configuration
//! produce byte-identical outputs.

mod attack;
pub mod config;

pub use config::{
    ArrivalSpec, AttackScenario, AttackSpec, AuditSpec, ConfigError, EnergySpec, ManagementSpec,
    PredictorSpec, ScenarioConfig, ServerGroup, UsageSignalSpec,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::datacenter::{DatacenterState, StateError};
use crate::manager::{
    place_vm, split_demand, ActionRecord, FlavorCatalogue, ManagementConfig, ManagerError,
    SplitPolicy,
};
use crate::model::{
    AppId, AppStatus, Application, Link, PowerState, Task, Tick, UserId, Vm, VmGroup, VmId, VmPair,
    VmState,
};
use crate::resources::ResourceVector;
use crate::scalar::Scalar;
use crate::security::{
    self, audit, AuditRecord, AuthorizedLinks, LinkLog, SecurityError, SecurityVerdict, Termination,
};
use crate::workload::{PredictorConfig, UsageRecord, VmPredictor, WorkloadError, WorkloadStore};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

/// Aggregate counters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Metrics<S> {
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

/// Cumulative counters sampled at the end of each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRow<S> {
    pub tick: Tick,
    pub energy: S,
    pub active_servers: u64,
    pub migrations: u64,
    pub terminations: u64,
    pub breaches_prevented: u64,
    pub breaches_succeeded: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreachOutcome {
    Pending,
    Prevented,
    Succeeded,
}

/// One injected attack: its link must persist `dwell` ticks to complete.
/// Prevented iff every attacker VM is terminated strictly before that.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BreachAttempt {
    pub attackers: BTreeSet<VmId>,
    pub target: VmId,
    pub established_at: Tick,
    pub completes_at: Tick,
    pub outcome: BreachOutcome,
    /// The links the attackers keep alive while the attempt is pending.
    links: Vec<VmPair>,
}

/// Everything a run produces: final metrics, the per-tick series and the
/// action and audit logs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<S> {
    pub seed: u64,
    pub duration: Tick,
    pub metrics: Metrics<S>,
    pub ticks: Vec<TickRow<S>>,
    pub actions: Vec<ActionRecord>,
    pub audits: Vec<AuditRecord>,
    pub attempts: Vec<BreachAttempt>,
    pub warnings: Vec<String>,
    pub workload_csv: String,
}

/// Runs a validated scenario to completion.
pub fn run<S: Scalar>(config: &ScenarioConfig<S>) -> Result<RunOutput<S>, SimError> {
    config.validate()?;
    let mut sim = Simulation::new(config)?;
    for t in 0..config.duration {
        sim.step(t)?;
    }
    Ok(sim.finish())
}

struct Simulation<'c, S: Scalar> {
    cfg: &'c ScenarioConfig<S>,
    rng: ChaCha8Rng,
    state: DatacenterState<S>,
    store: WorkloadStore<S>,
    link_log: LinkLog,
    auth: AuthorizedLinks,
    catalogue: FlavorCatalogue<S>,
    predictors: BTreeMap<VmId, VmPredictor<S>>,
    signal_phase: BTreeMap<VmId, S>,
    /// Tick at which each task VM finishes its work and is released.
    release_at: BTreeMap<VmId, Tick>,
    /// Applications still running, so per-tick scans skip finished ones.
    running_apps: BTreeSet<AppId>,
    usage_scratch: Vec<(VmId, ResourceVector<S>, Option<crate::model::ServerId>)>,
    member_scratch: Vec<VmId>,
    attempts: Vec<BreachAttempt>,
    metrics: Metrics<S>,
    ticks: Vec<TickRow<S>>,
    actions: Vec<ActionRecord>,
    audits: Vec<AuditRecord>,
    warnings: Vec<String>,
    mgmt_cfg: ManagementConfig<S>,
    predictor_cfg: PredictorConfig<S>,
}

impl<'c, S: Scalar> Simulation<'c, S> {
    fn new(cfg: &'c ScenarioConfig<S>) -> Result<Self, SimError> {
        let catalogue = FlavorCatalogue::new(cfg.flavors.clone()).map_err(|e| ConfigError {
            field: "flavors".into(),
            constraint: e.to_string(),
        })?;
        let mut state = DatacenterState::new();
        let power = if cfg.servers_initially_active {
            PowerState::Active
        } else {
            PowerState::Off
        };
        for group in &cfg.servers {
            for _ in 0..group.count {
                state.add_server(group.capacity, power);
            }
        }
        let mgmt_cfg = ManagementConfig {
            underload_threshold: cfg.management.underload_threshold,
            overload_margin: cfg.management.overload_margin,
            consolidation: cfg.management.consolidation,
            size_reference: catalogue.reference(),
        };
        let predictor_cfg = PredictorConfig {
            lags: cfg.predictor.lags,
            learning_rate: cfg.predictor.learning_rate,
            epochs: cfg.predictor.epochs,
            normalization: cfg.predictor.normalization,
            variance_floor: cfg.predictor.variance_floor,
        };
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            state,
            store: WorkloadStore::new(cfg.predictor.retention_horizon),
            link_log: LinkLog::new(),
            auth: AuthorizedLinks::new(),
            catalogue,
            predictors: BTreeMap::new(),
            signal_phase: BTreeMap::new(),
            release_at: BTreeMap::new(),
            running_apps: BTreeSet::new(),
            usage_scratch: Vec::new(),
            member_scratch: Vec::new(),
            attempts: Vec::new(),
            metrics: Metrics::default(),
            ticks: Vec::new(),
            actions: Vec::new(),
            audits: Vec::new(),
            warnings: Vec::new(),
            mgmt_cfg,
            predictor_cfg,
        })
    }

    fn step(&mut self, t: Tick) -> Result<(), SimError> {
        self.process_releases(t)?;
        self.process_arrival(t)?;
        self.sample_usage(t)?;
        self.generate_benign_links(t)?;
        self.drive_attack(t)?;
        self.retrain_predictors(t);

        // Audit, then either hand the verdict to the management cycle (when
        // both are due this tick) or act on it immediately: detection latency
        // must follow the audit cadence, not the management cadence.
        let audit_due = self.cfg.audit.enabled && t.is_multiple_of(self.cfg.audit.interval);
        let mgmt_due = t.is_multiple_of(self.cfg.management.interval);
        let mut verdict = SecurityVerdict::empty(t);
        if audit_due {
            verdict = audit(
                &self.link_log,
                &self.auth,
                t,
                self.cfg.effective_liveness_window(),
                self.cfg.audit.attacker_policy,
            );
        }

        if mgmt_due {
            let mut forecasts = self.forecast_active_vms(t);
            let cycle = crate::manager::management_cycle(
                &mut self.state,
                &mut forecasts,
                &verdict,
                &mut self.link_log,
                &self.mgmt_cfg,
                t,
            )?;
            self.metrics.migrations += cycle.migrations;
            self.metrics.unresolved_overloads += cycle.unresolved_overloads;
            let cost = self.cfg.energy.migration_cost * S::from_u64(cycle.migrations).unwrap();
            self.metrics.energy = self.metrics.energy + cost;
            self.actions.extend(cycle.actions);
            if !verdict.is_empty() {
                self.audits.push(AuditRecord::from_verdict(
                    &verdict,
                    &cycle.terminations,
                    self.cfg.audit.attacker_policy,
                ));
            }
            self.handle_termination_effects(&cycle.terminations, t)?;
        } else if !verdict.is_empty() {
            let hosts: BTreeMap<VmId, Option<crate::model::ServerId>> = verdict
                .attackers
                .iter()
                .map(|vm| (*vm, self.state.vms.get(vm).and_then(|v| v.host)))
                .collect();
            let terminations =
                security::apply_verdict(&verdict, &mut self.state, &mut self.link_log);
            for term in &terminations {
                self.actions.push(ActionRecord::terminate(
                    t,
                    term.vm,
                    hosts[&term.vm],
                    "security",
                ));
            }
            self.audits.push(AuditRecord::from_verdict(
                &verdict,
                &terminations,
                self.cfg.audit.attacker_policy,
            ));
            self.handle_termination_effects(&terminations, t)?;
        }

        self.resolve_breaches(t);
        self.account_energy(t)?;
        self.metrics.invariant_violations += self.state.verify_invariants().len() as u64;
        self.push_tick_row(t);
        Ok(())
    }

    fn finish(self) -> RunOutput<S> {
        let mut workload_csv = Vec::new();
        self.store
            .write_csv(&mut workload_csv)
            .expect("writing to a Vec cannot fail");
        RunOutput {
            seed: self.cfg.seed,
            duration: self.cfg.duration,
            metrics: self.metrics,
            ticks: self.ticks,
            actions: self.actions,
            audits: self.audits,
            attempts: self.attempts,
            warnings: self.warnings,
            workload_csv: String::from_utf8(workload_csv).expect("csv is utf-8"),
        }
    }

    /// Releases task VMs whose work finishes at `t` and completes their
    /// applications once the last task is done.
    fn process_releases(&mut self, t: Tick) -> Result<(), SimError> {
        let due: Vec<VmId> = self
            .release_at
            .iter()
            .filter(|(_, &at)| at == t)
            .map(|(vm, _)| *vm)
            .collect();
        for vm in due {
            self.release_at.remove(&vm);
            self.release_vm(vm, t, "completed")?;
        }

        let completed: Vec<AppId> = self
            .running_apps
            .iter()
            .copied()
            .filter(|id| {
                let app = &self.state.applications[id];
                app.tasks
                    .iter()
                    .all(|task| app.arrival_time + task.duration <= t)
            })
            .collect();
        for id in completed {
            let app = self.state.applications.get(&id).unwrap();
            let completion = crate::manager::integrate_results(app, t)?;
            self.state.applications.get_mut(&id).unwrap().status = AppStatus::Completed(completion);
            self.running_apps.remove(&id);
            self.metrics.apps_completed += 1;
        }
        Ok(())
    }

    fn release_vm(&mut self, vm: VmId, t: Tick, reason: &str) -> Result<(), SimError> {
        let host = self.state.vms.get(&vm).and_then(|v| v.host);
        if self.state.terminate_vm(vm)? {
            self.actions
                .push(ActionRecord::terminate(t, vm, host, reason));
            self.link_log.remove_vm(vm);
            self.predictors.remove(&vm);
            self.signal_phase.remove(&vm);
        }
        Ok(())
    }

    /// Bernoulli arrival of one application per tick; admission is
    /// all-or-nothing across its task VMs.
    fn process_arrival(&mut self, t: Tick) -> Result<(), SimError> {
        let draw: f64 = self.rng.gen();
        if draw >= self.cfg.arrivals.rate.to_f64_lossy() {
            return Ok(());
        }
        let a = &self.cfg.arrivals;
        let mut demand = [S::zero(); 4];
        for (i, (lo, hi)) in a
            .demand_min
            .as_array()
            .into_iter()
            .zip(a.demand_max.as_array())
            .enumerate()
        {
            let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
            let v = if hi > lo {
                self.rng.gen_range(lo..hi)
            } else {
                lo
            };
            demand[i] = S::from_f64_lossy(v);
        }
        let demand = ResourceVector::from_array(demand);
        let user = UserId(self.rng.gen_range(0..a.users));
        let durations: Vec<Tick> = (0..a.fan_out)
            .map(|_| self.rng.gen_range(a.duration_min..=a.duration_max))
            .collect();

        let shares = split_demand(
            demand,
            SplitPolicy {
                fan_out: a.fan_out,
                max_fan_out: a.max_fan_out,
            },
        )?;
        let app_id = self.state.alloc_app_id();

        // provision first; any unsatisfiable share rejects the application
        let mut flavors = Vec::with_capacity(shares.len());
        for share in &shares {
            match self.catalogue.smallest_fitting(*share) {
                Ok(f) => flavors.push(f.capacity),
                Err(ManagerError::UnsatisfiableTask) => {
                    self.actions.push(ActionRecord::reject(
                        t,
                        app_id.to_string(),
                        "unsatisfiable_task",
                    ));
                    self.metrics.apps_rejected += 1;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            }
        }

        // plan placements all-or-nothing against one view, then execute:
        // a rejected application leaves the state untouched
        let mut view = crate::manager::PlacementView::from_state(&self.state);
        let mut placements = Vec::with_capacity(flavors.len());
        for capacity in &flavors {
            match view.place(*capacity, true) {
                Ok(placement) => {
                    view.commit(*capacity, placement);
                    placements.push(placement);
                }
                Err(ManagerError::AdmissionRejected) => {
                    self.actions.push(ActionRecord::reject(
                        t,
                        app_id.to_string(),
                        "admission_rejected",
                    ));
                    self.metrics.apps_rejected += 1;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            }
        }

        let mut vm_ids = Vec::with_capacity(flavors.len());
        for (capacity, placement) in flavors.iter().zip(placements) {
            if placement.power_on {
                self.state.power_on(placement.server)?;
                self.actions
                    .push(ActionRecord::power(t, true, placement.server, "admission"));
            }
            let vm_id = self.state.alloc_vm_id();
            self.state.register_vm(Vm {
                id: vm_id,
                capacity: *capacity,
                owner: user,
                group: VmGroup::Application(app_id),
                host: None,
                state: VmState::Migrating,
            });
            self.state.attach_vm(vm_id, placement.server)?;
            vm_ids.push(vm_id);
        }

        let tasks: Vec<Task<S>> = vm_ids
            .iter()
            .zip(shares)
            .zip(&durations)
            .map(|((vm_id, share), &duration)| Task {
                id: self.state.alloc_task_id(),
                demand: share,
                duration,
                assigned_vm: Some(*vm_id),
            })
            .collect();
        for (task, vm_id) in tasks.iter().zip(&vm_ids) {
            self.release_at.insert(*vm_id, t + task.duration);
        }
        self.auth.register_application(app_id, &vm_ids)?;
        for vm in &vm_ids {
            let phase = S::from_f64_lossy(self.rng.gen_range(0.0..self.cfg.usage.period as f64));
            self.signal_phase.insert(*vm, phase);
        }
        self.state.applications.insert(
            app_id,
            Application {
                id: app_id,
                user,
                tasks,
                arrival_time: t,
                status: AppStatus::Running,
            },
        );
        self.running_apps.insert(app_id);
        self.metrics.apps_admitted += 1;
        Ok(())
    }

    /// One usage sample per active VM: base + sinusoid + noise, as a
    /// fraction of VM capacity, clamped into `[0, capacity]`.
    fn sample_usage(&mut self, t: Tick) -> Result<(), SimError> {
        let u = &self.cfg.usage;
        let period = u.period as f64;
        let base = u.base_level.to_f64_lossy();
        let amp = u.amplitude.to_f64_lossy();
        let noise_std = u.noise_std.to_f64_lossy();
        let noise = if noise_std > 0.0 {
            Some(Normal::new(0.0, noise_std).unwrap())
        } else {
            None
        };

        let mut vms = std::mem::take(&mut self.usage_scratch);
        vms.clear();
        vms.extend(
            self.state
                .active_vms()
                .map(|vm| (vm.id, vm.capacity, vm.host)),
        );
        for &(vm, capacity, host) in &vms {
            let phase = self
                .signal_phase
                .get(&vm)
                .copied()
                .unwrap_or_else(S::zero)
                .to_f64_lossy();
            let wave =
                base + amp * (2.0 * std::f64::consts::PI * (t as f64 + phase) / period).sin();
            let mut frac = [0.0f64; 4];
            for f in frac.iter_mut() {
                let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut self.rng));
                *f = (wave + n).clamp(0.0, 1.0);
            }
            let usage = ResourceVector::from_array([
                capacity.cpu * S::from_f64_lossy(frac[0]),
                capacity.memory * S::from_f64_lossy(frac[1]),
                capacity.disk * S::from_f64_lossy(frac[2]),
                capacity.bandwidth * S::from_f64_lossy(frac[3]),
            ]);
            self.store.record(UsageRecord {
                time: t,
                vm,
                server: host.expect("active VM is hosted"),
                usage,
            })?;
        }
        self.usage_scratch = vms;
        Ok(())
    }

    /// Every running application with at least two active VMs exercises one
    /// random authorized pair per tick.
    fn generate_benign_links(&mut self, t: Tick) -> Result<(), SimError> {
        let app_ids: Vec<AppId> = self.running_apps.iter().copied().collect();
        let mut vms = std::mem::take(&mut self.member_scratch);
        for id in app_ids {
            vms.clear();
            vms.extend(
                self.state.applications[&id]
                    .tasks
                    .iter()
                    .filter_map(|task| task.assigned_vm)
                    .filter(|vm| {
                        self.state
                            .vms
                            .get(vm)
                            .is_some_and(|v| v.state == VmState::Active)
                    }),
            );
            let n = vms.len();
            if n < 2 {
                continue;
            }
            let pair_count = n * (n - 1) / 2;
            let idx = self.rng.gen_range(0..pair_count);
            // unrank the idx-th unordered pair
            let mut k = idx;
            let mut a = 0;
            while k >= n - 1 - a {
                k -= n - 1 - a;
                a += 1;
            }
            let b = a + 1 + k;
            let pair = VmPair::new(vms[a], vms[b]).expect("distinct endpoints");
            security::observe_link(
                &mut self.link_log,
                &self.state,
                Link {
                    pair,
                    established_at: t,
                },
            )?;
        }
        self.member_scratch = vms;
        Ok(())
    }

    fn drive_attack(&mut self, t: Tick) -> Result<(), SimError> {
        if self.cfg.attack.scenario != AttackScenario::None && t == self.cfg.attack.launch_time {
            attack::inject(self, t)?;
        }
        // attackers keep their links alive until terminated
        let mut refresh: Vec<VmPair> = Vec::new();
        for attempt in &self.attempts {
            if attempt.outcome != BreachOutcome::Pending {
                continue;
            }
            for pair in &attempt.links {
                let (a, b) = pair.endpoints();
                let both_active = [a, b].iter().all(|vm| {
                    self.state
                        .vms
                        .get(vm)
                        .is_some_and(|v| v.state == VmState::Active)
                });
                if both_active {
                    refresh.push(*pair);
                }
            }
        }
        for pair in refresh {
            self.link_log.observe(pair, t);
        }
        Ok(())
    }

    fn retrain_predictors(&mut self, t: Tick) {
        let p = &self.cfg.predictor;
        if t == 0 || !t.is_multiple_of(p.retrain_interval) {
            return;
        }
        let need = p.lags + 2;
        let vms: Vec<VmId> = self
            .state
            .active_vms()
            .map(|vm| vm.id)
            .filter(|vm| self.store.count_for(*vm) >= need)
            .collect();
        for vm in vms {
            let predictor = self
                .predictors
                .entry(vm)
                .or_insert_with(|| VmPredictor::new(self.predictor_cfg));
            // NotEnoughHistory is pre-filtered; other errors cannot occur here
            let _ = predictor.train(&self.store, vm, self.cfg.predictor.epochs, t);
        }
    }

    /// Forecast horizon is one management interval; cold VMs echo their last
    /// observation.
    fn forecast_active_vms(&mut self, _t: Tick) -> BTreeMap<VmId, ResourceVector<S>> {
        let horizon = self.cfg.management.interval;
        let mut forecasts = BTreeMap::new();
        for vm in self.state.active_vms() {
            let forecast = match self.predictors.get(&vm.id) {
                Some(p) => p.predict(&self.store, vm.id, horizon, vm.capacity),
                None => VmPredictor::new(self.predictor_cfg).predict(
                    &self.store,
                    vm.id,
                    horizon,
                    vm.capacity,
                ),
            };
            forecasts.insert(vm.id, forecast);
        }
        forecasts
    }

    /// Metric accounting, application failure and breach-prevention effects
    /// of a batch of security terminations.
    fn handle_termination_effects(
        &mut self,
        terminations: &[Termination],
        t: Tick,
    ) -> Result<(), SimError> {
        if terminations.is_empty() {
            return Ok(());
        }
        for term in terminations {
            self.metrics.terminations += 1;
            if !term.was_attacker {
                self.metrics.false_positive_terminations += 1;
                self.fail_application_of(term.vm, t)?;
            }
            self.release_at.remove(&term.vm);
            self.predictors.remove(&term.vm);
            self.signal_phase.remove(&term.vm);
        }

        // a prevented attempt is one whose attackers all died before completion
        let mut relocations: Vec<VmId> = Vec::new();
        for attempt in &mut self.attempts {
            if attempt.outcome != BreachOutcome::Pending || t >= attempt.completes_at {
                continue;
            }
            let all_dead = attempt.attackers.iter().all(|vm| {
                self.state
                    .vms
                    .get(vm)
                    .is_none_or(|v| v.state == VmState::Terminated)
            });
            if all_dead {
                attempt.outcome = BreachOutcome::Prevented;
                self.metrics.breaches_prevented += 1;
                if self.cfg.management.relocate_victims {
                    relocations.push(attempt.target);
                }
            }
        }
        for victim in relocations {
            let Some(vm) = self.state.vms.get(&victim) else {
                continue;
            };
            if vm.state != VmState::Active {
                continue;
            }
            let (capacity, host) = (vm.capacity, vm.host);
            if let Ok(placement) = place_vm(&self.state, capacity, host, true) {
                if placement.power_on {
                    self.state.power_on(placement.server)?;
                    self.actions
                        .push(ActionRecord::power(t, true, placement.server, "security"));
                }
                let from = self.state.migrate_vm(victim, placement.server)?;
                self.actions.push(ActionRecord::migrate(
                    t,
                    victim,
                    from,
                    placement.server,
                    "security",
                ));
                self.metrics.migrations += 1;
                self.metrics.energy = self.metrics.energy + self.cfg.energy.migration_cost;
            }
        }
        Ok(())
    }

    /// A benign VM lost to a termination fails its whole application.
    fn fail_application_of(&mut self, vm: VmId, t: Tick) -> Result<(), SimError> {
        let Ok(VmGroup::Application(app_id)) = self.state.vm(vm).map(|v| v.group) else {
            return Ok(());
        };
        let Some(app) = self.state.applications.get_mut(&app_id) else {
            return Ok(());
        };
        if app.status != AppStatus::Running {
            return Ok(());
        }
        app.status = AppStatus::Failed(t);
        self.running_apps.remove(&app_id);
        self.metrics.sla_violations += 1;
        self.metrics.apps_failed += 1;
        let siblings: Vec<VmId> = self.state.applications[&app_id]
            .tasks
            .iter()
            .filter_map(|task| task.assigned_vm)
            .filter(|sibling| {
                *sibling != vm
                    && self
                        .state
                        .vms
                        .get(sibling)
                        .is_some_and(|v| v.state == VmState::Active)
            })
            .collect();
        for sibling in siblings {
            self.release_at.remove(&sibling);
            self.release_vm(sibling, t, "app_failed")?;
        }
        Ok(())
    }

    /// Attempts whose dwell elapses while still pending have succeeded.
    fn resolve_breaches(&mut self, t: Tick) {
        for attempt in &mut self.attempts {
            if attempt.outcome == BreachOutcome::Pending && attempt.completes_at == t {
                attempt.outcome = BreachOutcome::Succeeded;
                self.metrics.breaches_succeeded += 1;
            }
        }
    }

    /// Linear power model per active server; off servers contribute nothing.
    fn account_energy(&mut self, _t: Tick) -> Result<(), SimError> {
        let e = &self.cfg.energy;
        let mut total = S::zero();
        let mut active = 0u64;
        for server in self.state.active_server_ids() {
            let util = self.state.server_utilization(server)?.mean_component();
            total = total + e.p_idle + (e.p_max - e.p_idle) * util;
            active += 1;
        }
        self.metrics.active_server_ticks += active;
        self.metrics.energy = self.metrics.energy + total;
        Ok(())
    }

    fn push_tick_row(&mut self, t: Tick) {
        self.ticks.push(TickRow {
            tick: t,
            energy: self.metrics.energy,
            active_servers: self.state.active_server_count(),
            migrations: self.metrics.migrations,
            terminations: self.metrics.terminations,
            breaches_prevented: self.metrics.breaches_prevented,
            breaches_succeeded: self.metrics.breaches_succeeded,
        });
    }
}
