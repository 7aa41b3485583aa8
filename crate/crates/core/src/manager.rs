//! Task splitting, VM provisioning and placement, forecast-driven overload
//! migration and underload consolidation, and verdict application.
//!
//! Every decision breaks ties by lowest id, so identical inputs always
//! produce identical action lists.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datacenter::{DatacenterState, StateError};
use crate::model::{Application, PowerState, ServerId, Tick, VmId, VmState};
use crate::resources::ResourceVector;
use crate::scalar::Scalar;
use crate::security::{apply_verdict, LinkLog, SecurityVerdict, Termination};
use crate::workload::{predict_server, WorkloadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManagerError {
    #[error("fan-out {requested} exceeds the per-application cap {cap}")]
    FanOutExceedsCap { requested: usize, cap: usize },
    #[error("fan-out must be at least 1")]
    ZeroFanOut,
    #[error("application demand must be positive")]
    EmptyDemand,
    #[error("flavor catalogue is empty")]
    EmptyCatalogue,
    #[error("flavors {a} and {b} have equal size keys; the catalogue order must be strict")]
    AmbiguousFlavorOrder { a: String, b: String },
    #[error("no flavor fits the task demand")]
    UnsatisfiableTask,
    #[error("no server can host the vm")]
    AdmissionRejected,
    #[error("server {0} is not predicted overloaded")]
    NotOverloaded(ServerId),
    #[error("server {0} is not predicted underloaded")]
    NotUnderloaded(ServerId),
    #[error("application {0} still has unfinished tasks")]
    TasksUnfinished(crate::model::AppId),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Forecast(#[from] WorkloadError),
    #[error(transparent)]
    Resource(#[from] crate::resources::ResourceError),
}

/// A named VM size from the catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmFlavor<S> {
    pub name: String,
    pub capacity: ResourceVector<S>,
}

/// Mean of per-component values normalized by `reference`: the single total
/// order used for "largest VM" and "smallest flavor" decisions.
pub fn scalar_size_key<S: Scalar>(rv: ResourceVector<S>, reference: ResourceVector<S>) -> S {
    let mut sum = S::zero();
    for (v, r) in rv.as_array().into_iter().zip(reference.as_array()) {
        if r > S::zero() {
            sum = sum + v / r;
        }
    }
    sum / S::from_f64_lossy(4.0)
}

/// Flavor catalogue, strictly ordered by scalar size key ascending. The
/// reference for the key is the per-component maximum across flavors.
#[derive(Debug, Clone, PartialEq)]
pub struct FlavorCatalogue<S> {
    flavors: Vec<VmFlavor<S>>,
    reference: ResourceVector<S>,
}

impl<S: Scalar> FlavorCatalogue<S> {
    pub fn new(mut flavors: Vec<VmFlavor<S>>) -> Result<Self, ManagerError> {
        if flavors.is_empty() {
            return Err(ManagerError::EmptyCatalogue);
        }
        let mut reference = ResourceVector::zero();
        for f in &flavors {
            reference = reference.component_max(f.capacity);
        }
        flavors.sort_by(|a, b| {
            scalar_size_key(a.capacity, reference)
                .partial_cmp(&scalar_size_key(b.capacity, reference))
                .unwrap()
        });
        for w in flavors.windows(2) {
            let ka = scalar_size_key(w[0].capacity, reference);
            let kb = scalar_size_key(w[1].capacity, reference);
            if ka == kb {
                return Err(ManagerError::AmbiguousFlavorOrder {
                    a: w[0].name.clone(),
                    b: w[1].name.clone(),
                });
            }
        }
        Ok(Self { flavors, reference })
    }

    /// Per-component maximum across flavors; the normalization reference for
    /// all scalar size keys.
    pub fn reference(&self) -> ResourceVector<S> {
        self.reference
    }

    pub fn flavors(&self) -> &[VmFlavor<S>] {
        &self.flavors
    }

    pub fn size_key(&self, capacity: ResourceVector<S>) -> S {
        scalar_size_key(capacity, self.reference)
    }

    /// Smallest flavor whose capacity covers `demand` component-wise.
    pub fn smallest_fitting(
        &self,
        demand: ResourceVector<S>,
    ) -> Result<&VmFlavor<S>, ManagerError> {
        self.flavors
            .iter()
            .find(|f| demand.fits_within(f.capacity))
            .ok_or(ManagerError::UnsatisfiableTask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPolicy {
    pub fan_out: usize,
    pub max_fan_out: usize,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self {
            fan_out: 1,
            max_fan_out: 16,
        }
    }
}

/// Splits an application's total demand into equal per-task shares.
pub fn split_demand<S: Scalar>(
    total: ResourceVector<S>,
    policy: SplitPolicy,
) -> Result<Vec<ResourceVector<S>>, ManagerError> {
    if total.is_zero() {
        return Err(ManagerError::EmptyDemand);
    }
    if policy.fan_out == 0 {
        return Err(ManagerError::ZeroFanOut);
    }
    if policy.fan_out > policy.max_fan_out {
        return Err(ManagerError::FanOutExceedsCap {
            requested: policy.fan_out,
            cap: policy.max_fan_out,
        });
    }
    let share = total.scale(S::one() / S::from_usize(policy.fan_out).unwrap());
    Ok(vec![share; policy.fan_out])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub server: ServerId,
    /// The chosen server is currently off and must be powered on first.
    pub power_on: bool,
}

/// Free capacities of a fleet, detached from the full state so a batch of
/// placements can be validated sequentially without cloning it.
#[derive(Debug, Clone)]
pub struct PlacementView<S> {
    /// active server -> (free capacity, total capacity)
    active: BTreeMap<ServerId, (ResourceVector<S>, ResourceVector<S>)>,
    /// off server -> total capacity
    off: BTreeMap<ServerId, ResourceVector<S>>,
    /// per-component max across all servers, for sizing off servers
    fleet_reference: ResourceVector<S>,
}

impl<S: Scalar> PlacementView<S> {
    pub fn from_state(state: &DatacenterState<S>) -> Self {
        Self::build(state, true)
    }

    /// A view without the off-server catalogue, for plans that may not
    /// power anything on.
    pub fn active_only(state: &DatacenterState<S>) -> Self {
        Self::build(state, false)
    }

    fn build(state: &DatacenterState<S>, with_off: bool) -> Self {
        let mut active = BTreeMap::new();
        let mut off = BTreeMap::new();
        let mut fleet_reference = ResourceVector::zero();
        if with_off {
            for srv in state.servers.values() {
                fleet_reference = fleet_reference.component_max(srv.capacity);
                if srv.is_active() {
                    active.insert(
                        srv.id,
                        (srv.capacity.saturating_sub(srv.reserved()), srv.capacity),
                    );
                } else {
                    off.insert(srv.id, srv.capacity);
                }
            }
        } else {
            for id in state.active_server_ids() {
                let srv = &state.servers[&id];
                active.insert(
                    id,
                    (srv.capacity.saturating_sub(srv.reserved()), srv.capacity),
                );
            }
        }
        Self {
            active,
            off,
            fleet_reference,
        }
    }

    pub fn exclude(&mut self, server: ServerId) {
        self.active.remove(&server);
        self.off.remove(&server);
    }

    /// Best-fit: among active servers that fit, the one with minimal scalar
    /// remaining capacity after placement (ties by lowest id). If none fits
    /// and `allow_power_on` is set, the smallest off server that fits.
    pub fn place(
        &self,
        capacity: ResourceVector<S>,
        allow_power_on: bool,
    ) -> Result<Placement, ManagerError> {
        let mut best: Option<(S, ServerId)> = None;
        for (&id, &(free, total)) in &self.active {
            if !capacity.fits_within(free) {
                continue;
            }
            let key = scalar_size_key(free.saturating_sub(capacity), total);
            if best.is_none_or(|(k, _)| key < k) {
                best = Some((key, id));
            }
        }
        if let Some((_, server)) = best {
            return Ok(Placement {
                server,
                power_on: false,
            });
        }
        if allow_power_on {
            let mut best_off: Option<(S, ServerId)> = None;
            for (&id, &total) in &self.off {
                if !capacity.fits_within(total) {
                    continue;
                }
                let key = scalar_size_key(total, self.fleet_reference);
                if best_off.is_none_or(|(k, _)| key < k) {
                    best_off = Some((key, id));
                }
            }
            if let Some((_, server)) = best_off {
                return Ok(Placement {
                    server,
                    power_on: true,
                });
            }
        }
        Err(ManagerError::AdmissionRejected)
    }

    /// Books a placement into the view so later placements see it.
    pub fn commit(&mut self, capacity: ResourceVector<S>, placement: Placement) {
        if placement.power_on {
            let total = self
                .off
                .remove(&placement.server)
                .expect("powered-on server was off");
            self.active
                .insert(placement.server, (total.saturating_sub(capacity), total));
        } else {
            let (free, _) = self
                .active
                .get_mut(&placement.server)
                .expect("target is active");
            *free = free.saturating_sub(capacity);
        }
    }
}

/// Best-fit placement against the live state; see [`PlacementView::place`].
pub fn place_vm<S: Scalar>(
    state: &DatacenterState<S>,
    capacity: ResourceVector<S>,
    exclude: Option<ServerId>,
    allow_power_on: bool,
) -> Result<Placement, ManagerError> {
    let mut view = PlacementView::from_state(state);
    if let Some(server) = exclude {
        view.exclude(server);
    }
    view.place(capacity, allow_power_on)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanReason {
    Overload,
    Underload,
    Security,
}

impl std::fmt::Display for PlanReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanReason::Overload => f.write_str("overload"),
            PlanReason::Underload => f.write_str("underload"),
            PlanReason::Security => f.write_str("security"),
        }
    }
}

/// A batch of capacity-safe migrations plus servers to power off afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MigrationPlan {
    pub moves: Vec<(VmId, ServerId, ServerId)>,
    pub shutdowns: Vec<ServerId>,
    pub reason: Option<PlanReason>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty() && self.shutdowns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverloadOutcome {
    /// VMs selected for migration: the shortest prefix of the
    /// capacity-descending order whose removal makes the rest fit.
    pub selected: Vec<VmId>,
    pub plan: MigrationPlan,
    /// Selected VMs with no feasible target; they stay put.
    pub unresolved: Vec<VmId>,
}

/// True iff the server's forecast exceeds `margin * capacity` in at least
/// one component.
pub fn is_overloaded<S: Scalar>(
    forecast: ResourceVector<S>,
    capacity: ResourceVector<S>,
    margin: S,
) -> bool {
    !forecast.fits_within(capacity.scale(margin))
}

/// Plans migrations off a predicted-overloaded server.
///
/// Hosted VMs are taken in descending scalar-capacity order (ties by lowest
/// id) until the summed forecast of the remaining VMs fits within
/// `margin * capacity`; each selected VM is assigned a target via best-fit
/// placement excluding the source. Targets are validated sequentially, so
/// applying the plan preserves capacity safety.
pub fn handle_overload<S: Scalar>(
    state: &DatacenterState<S>,
    server: ServerId,
    vm_forecasts: &BTreeMap<VmId, ResourceVector<S>>,
    margin: S,
    size_reference: ResourceVector<S>,
) -> Result<OverloadOutcome, ManagerError> {
    let srv = state.server(server)?;
    let limit = srv.capacity.scale(margin);
    let forecast = predict_server(vm_forecasts, state, server)?;
    if forecast.fits_within(limit) {
        return Err(ManagerError::NotOverloaded(server));
    }

    let mut vms: Vec<VmId> = srv
        .hosted
        .iter()
        .copied()
        .filter(|vm| {
            state
                .vms
                .get(vm)
                .is_some_and(|v| v.state == VmState::Active)
        })
        .collect();
    vms.sort_by(|a, b| {
        let ka = scalar_size_key(state.vms[a].capacity, size_reference);
        let kb = scalar_size_key(state.vms[b].capacity, size_reference);
        kb.partial_cmp(&ka).unwrap().then(a.cmp(b))
    });

    let mut remaining = forecast;
    let mut selected = Vec::new();
    for vm in &vms {
        if remaining.fits_within(limit) {
            break;
        }
        let f = vm_forecasts
            .get(vm)
            .copied()
            .unwrap_or(state.vms[vm].capacity);
        remaining = remaining.saturating_sub(f);
        selected.push(*vm);
    }

    let mut view = PlacementView::from_state(state);
    view.exclude(server);
    let mut plan = MigrationPlan {
        reason: Some(PlanReason::Overload),
        ..Default::default()
    };
    let mut unresolved = Vec::new();
    for &vm in &selected {
        let capacity = state.vms[&vm].capacity;
        match view.place(capacity, true) {
            Ok(placement) => {
                view.commit(capacity, placement);
                plan.moves.push((vm, server, placement.server));
            }
            Err(ManagerError::AdmissionRejected) => unresolved.push(vm),
            Err(e) => return Err(e),
        }
    }
    Ok(OverloadOutcome {
        selected,
        plan,
        unresolved,
    })
}

/// Plans full consolidation of a predicted-underloaded server.
///
/// All-or-nothing: if every hosted VM can be re-placed on other active
/// servers (sequential best-fit, no power-ons), the plan moves them all and
/// shuts the server down; otherwise the plan is empty and the server stays.
pub fn handle_underload<S: Scalar>(
    state: &DatacenterState<S>,
    server: ServerId,
    forecast: ResourceVector<S>,
    threshold: S,
) -> Result<MigrationPlan, ManagerError> {
    let srv = state.server(server)?;
    if !srv.is_active() {
        return Err(StateError::ServerOff(server).into());
    }
    let util = forecast.ratio(srv.capacity)?;
    if util.max_component() >= threshold {
        return Err(ManagerError::NotUnderloaded(server));
    }

    let mut plan = MigrationPlan {
        reason: Some(PlanReason::Underload),
        ..Default::default()
    };
    if srv.hosted.is_empty() {
        plan.shutdowns.push(server);
        return Ok(plan);
    }
    let mut view = PlacementView::active_only(state);
    view.exclude(server);
    for &vm in &srv.hosted {
        let capacity = state.vms[&vm].capacity;
        match view.place(capacity, false) {
            Ok(placement) => {
                view.commit(capacity, placement);
                plan.moves.push((vm, server, placement.server));
            }
            Err(ManagerError::AdmissionRejected) => {
                return Ok(MigrationPlan {
                    reason: Some(PlanReason::Underload),
                    ..Default::default()
                });
            }
            Err(e) => return Err(e),
        }
    }
    plan.shutdowns.push(server);
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Terminate,
    Migrate,
    PowerOn,
    PowerOff,
    Reject,
}

/// One action-log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub t: Tick,
    pub action: ActionKind,
    pub subject: String,
    pub from: Option<String>,
    pub to: Option<String>,
    pub reason: String,
}

impl ActionRecord {
    pub fn terminate(t: Tick, vm: VmId, host: Option<ServerId>, reason: &str) -> Self {
        Self {
            t,
            action: ActionKind::Terminate,
            subject: vm.to_string(),
            from: host.map(|s| s.to_string()),
            to: None,
            reason: reason.to_string(),
        }
    }

    pub fn migrate(t: Tick, vm: VmId, from: ServerId, to: ServerId, reason: &str) -> Self {
        Self {
            t,
            action: ActionKind::Migrate,
            subject: vm.to_string(),
            from: Some(from.to_string()),
            to: Some(to.to_string()),
            reason: reason.to_string(),
        }
    }

    pub fn power(t: Tick, on: bool, server: ServerId, reason: &str) -> Self {
        Self {
            t,
            action: if on {
                ActionKind::PowerOn
            } else {
                ActionKind::PowerOff
            },
            subject: server.to_string(),
            from: None,
            to: None,
            reason: reason.to_string(),
        }
    }

    pub fn reject(t: Tick, subject: String, reason: &str) -> Self {
        Self {
            t,
            action: ActionKind::Reject,
            subject,
            from: None,
            to: None,
            reason: reason.to_string(),
        }
    }
}

/// Applies a migration plan to the live state, powering on targets as
/// needed and powering off drained servers.
pub fn apply_plan<S: Scalar>(
    state: &mut DatacenterState<S>,
    plan: &MigrationPlan,
    now: Tick,
) -> Result<Vec<ActionRecord>, ManagerError> {
    let reason = plan
        .reason
        .map(|r| r.to_string())
        .unwrap_or_else(|| "plan".to_string());
    let mut actions = Vec::new();
    for &(vm, from, to) in &plan.moves {
        if state.servers[&to].power == PowerState::Off {
            state.power_on(to)?;
            actions.push(ActionRecord::power(now, true, to, &reason));
        }
        state.migrate_vm(vm, to)?;
        actions.push(ActionRecord::migrate(now, vm, from, to, &reason));
    }
    for &server in &plan.shutdowns {
        state.power_off(server)?;
        actions.push(ActionRecord::power(now, false, server, &reason));
    }
    Ok(actions)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManagementConfig<S> {
    pub underload_threshold: S,
    pub overload_margin: S,
    pub consolidation: bool,
    /// Normalization reference for scalar size keys (largest flavor).
    pub size_reference: ResourceVector<S>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleOutcome {
    pub actions: Vec<ActionRecord>,
    pub terminations: Vec<Termination>,
    pub migrations: u64,
    pub unresolved_overloads: u64,
}

/// One management cycle, in fixed order: security terminations, then
/// overload migration plans, then underload consolidation plans.
///
/// Server forecasts are recomputed from current membership before each
/// decision, so terminations and earlier plans are reflected in later steps.
/// `vm_forecasts` must cover every active VM.
pub fn management_cycle<S: Scalar>(
    state: &mut DatacenterState<S>,
    vm_forecasts: &mut BTreeMap<VmId, ResourceVector<S>>,
    verdict: &SecurityVerdict,
    link_log: &mut LinkLog,
    cfg: &ManagementConfig<S>,
    now: Tick,
) -> Result<CycleOutcome, ManagerError> {
    let mut out = CycleOutcome::default();

    // 1. security terminations
    let hosts: BTreeMap<VmId, Option<ServerId>> = verdict
        .attackers
        .iter()
        .map(|vm| (*vm, state.vms.get(vm).and_then(|v| v.host)))
        .collect();
    out.terminations = apply_verdict(verdict, state, link_log);
    for term in &out.terminations {
        vm_forecasts.remove(&term.vm);
        out.actions.push(ActionRecord::terminate(
            now,
            term.vm,
            hosts[&term.vm],
            "security",
        ));
    }

    // 2. overload handling; servers powered on mid-cycle are inspected on
    // the next one
    let server_ids: Vec<ServerId> = state.active_server_ids().collect();
    for server in server_ids.iter().copied() {
        if !state.servers[&server].is_active() {
            continue;
        }
        let forecast = predict_server(vm_forecasts, state, server)?;
        if !is_overloaded(
            forecast,
            state.servers[&server].capacity,
            cfg.overload_margin,
        ) {
            continue;
        }
        let outcome = handle_overload(
            state,
            server,
            vm_forecasts,
            cfg.overload_margin,
            cfg.size_reference,
        )?;
        out.unresolved_overloads += outcome.unresolved.len() as u64;
        out.migrations += outcome.plan.moves.len() as u64;
        out.actions.extend(apply_plan(state, &outcome.plan, now)?);
    }

    // 3. underload consolidation
    if cfg.consolidation {
        for server in server_ids.iter().copied() {
            if !state.servers[&server].is_active() {
                continue;
            }
            let forecast = predict_server(vm_forecasts, state, server)?;
            match handle_underload(state, server, forecast, cfg.underload_threshold) {
                Ok(plan) => {
                    out.migrations += plan.moves.len() as u64;
                    out.actions.extend(apply_plan(state, &plan, now)?);
                }
                Err(ManagerError::NotUnderloaded(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Application completion: all tasks must have finished by `now`; the
/// completion time is the latest task finish.
pub fn integrate_results<S: Scalar>(app: &Application<S>, now: Tick) -> Result<Tick, ManagerError> {
    let mut completion = app.arrival_time;
    for task in &app.tasks {
        let finish = app.arrival_time + task.duration;
        if finish > now {
            return Err(ManagerError::TasksUnfinished(app.id));
        }
        completion = completion.max(finish);
    }
    Ok(completion)
}
