//! Live link auditing: authorized link set vs observed link log.
//!
//! VMs executing tasks of a common application are authorized to talk to one
//! another, so the authorized set is the union of complete graphs over each
//! application's VMs. A monitor records every observed inter-VM link; the
//! audit diffs the live portion of that log against the authorized set,
//! names attacker VMs and issues termination verdicts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datacenter::DatacenterState;
use crate::model::{AppId, Application, Link, Tick, VmId, VmPair, VmState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SecurityError {
    #[error("vm {vm} already serves application {existing}, cannot also serve {requested}")]
    VmInTwoApplications {
        vm: VmId,
        existing: AppId,
        requested: AppId,
    },
    #[error("task {0} of application {1} has no assigned vm")]
    UnassignedTask(crate::model::TaskId, AppId),
    #[error("stale link: endpoint {0} is terminated")]
    StaleLink(VmId),
    #[error("unknown link endpoint {0}")]
    UnknownEndpoint(VmId),
}

/// Which endpoints of an unauthorized link count as attackers when both
/// belong to registered applications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerPolicy {
    /// Flag both endpoints of a cross-application link (conservative).
    Both,
    /// Flag only endpoints with no registered application.
    UnregisteredOnly,
}

impl std::fmt::Display for AttackerPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttackerPolicy::Both => f.write_str("both"),
            AttackerPolicy::UnregisteredOnly => f.write_str("unregistered_only"),
        }
    }
}

/// The set of VM pairs permitted to communicate, plus each VM's application
/// grouping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuthorizedLinks {
    pairs: BTreeSet<VmPair>,
    group_of: BTreeMap<VmId, AppId>,
}

impl AuthorizedLinks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Derives the authorized set from applications and their task → VM
    /// assignments: the complete graph over each application's VMs.
    pub fn build<S: Scalar>(
        applications: &BTreeMap<AppId, Application<S>>,
    ) -> Result<Self, SecurityError> {
        let mut auth = Self::new();
        for app in applications.values() {
            let mut vms = Vec::with_capacity(app.tasks.len());
            for task in &app.tasks {
                let vm = task
                    .assigned_vm
                    .ok_or(SecurityError::UnassignedTask(task.id, app.id))?;
                vms.push(vm);
            }
            auth.register_application(app.id, &vms)?;
        }
        Ok(auth)
    }

    /// Adds one application's VM group: all unordered pairs over its VMs.
    pub fn register_application(&mut self, app: AppId, vms: &[VmId]) -> Result<(), SecurityError> {
        for &vm in vms {
            match self.group_of.get(&vm) {
                Some(&existing) if existing != app => {
                    return Err(SecurityError::VmInTwoApplications {
                        vm,
                        existing,
                        requested: app,
                    });
                }
                _ => {
                    self.group_of.insert(vm, app);
                }
            }
        }
        for (i, &a) in vms.iter().enumerate() {
            for &b in &vms[i + 1..] {
                if a != b {
                    self.pairs.insert(VmPair::new(a, b).expect("distinct ids"));
                }
            }
        }
        Ok(())
    }

    pub fn is_authorized(&self, pair: VmPair) -> bool {
        self.pairs.contains(&pair)
    }

    pub fn group_of(&self, vm: VmId) -> Option<AppId> {
        self.group_of.get(&vm).copied()
    }

    pub fn pairs(&self) -> &BTreeSet<VmPair> {
        &self.pairs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpan {
    pub first_seen: Tick,
    pub last_seen: Tick,
}

/// Time-stamped log of observed live inter-VM links: one entry per unordered
/// pair, tracking first and most recent observation.
#[derive(Debug, Clone, Default)]
pub struct LinkLog {
    entries: BTreeMap<VmPair, LinkSpan>,
}

impl LinkLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an observation of `pair` at `now`: inserts a new entry or
    /// widens the span. Out-of-order observations never shrink it.
    pub fn observe(&mut self, pair: VmPair, now: Tick) -> LinkSpan {
        let span = self.entries.entry(pair).or_insert(LinkSpan {
            first_seen: now,
            last_seen: now,
        });
        span.first_seen = span.first_seen.min(now);
        span.last_seen = span.last_seen.max(now);
        *span
    }

    pub fn get(&self, pair: VmPair) -> Option<LinkSpan> {
        self.entries.get(&pair).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn remove_pair(&mut self, pair: VmPair) {
        self.entries.remove(&pair);
    }

    /// Drops every entry touching `vm` (the VM no longer exists).
    pub fn remove_vm(&mut self, vm: VmId) {
        self.entries.retain(|pair, _| !pair.contains(vm));
    }

    /// Pairs whose last observation is within `window` ticks of `now`.
    pub fn live_pairs(&self, now: Tick, window: Tick) -> impl Iterator<Item = VmPair> + '_ {
        let cutoff = now.saturating_sub(window);
        self.entries
            .iter()
            .filter(move |(_, span)| span.last_seen >= cutoff)
            .map(|(pair, _)| *pair)
    }
}

/// Validates endpoints against the datacenter state and records the link.
///
/// Links touching a terminated VM are dropped with a stale-link error; both
/// endpoints must be active.
pub fn observe_link<S: Scalar>(
    log: &mut LinkLog,
    state: &DatacenterState<S>,
    link: Link,
) -> Result<LinkSpan, SecurityError> {
    let (a, b) = link.pair.endpoints();
    for vm in [a, b] {
        match state.vm(vm) {
            Err(_) => return Err(SecurityError::UnknownEndpoint(vm)),
            Ok(v) if v.state == VmState::Terminated => return Err(SecurityError::StaleLink(vm)),
            Ok(_) => {}
        }
    }
    Ok(log.observe(link.pair, link.established_at))
}

/// Outcome of one audit: the unauthorized live links and the VMs to
/// terminate for them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityVerdict {
    pub unauthorized: BTreeSet<VmPair>,
    pub attackers: BTreeSet<VmId>,
    pub issued_at: Tick,
}

impl SecurityVerdict {
    pub fn empty(now: Tick) -> Self {
        Self {
            unauthorized: BTreeSet::new(),
            attackers: BTreeSet::new(),
            issued_at: now,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.unauthorized.is_empty() && self.attackers.is_empty()
    }
}

/// Names attacker VMs for a set of unauthorized links.
///
/// An endpoint with no registered application is an attacker. If both
/// endpoints belong to (necessarily distinct) applications, the policy
/// decides: `Both` flags both as suspicious, `UnregisteredOnly` flags
/// neither.
pub fn identify_attackers(
    unauthorized: &BTreeSet<VmPair>,
    auth: &AuthorizedLinks,
    policy: AttackerPolicy,
) -> BTreeSet<VmId> {
    let mut attackers = BTreeSet::new();
    for pair in unauthorized {
        let (a, b) = pair.endpoints();
        let ga = auth.group_of(a);
        let gb = auth.group_of(b);
        match (ga, gb) {
            (None, None) => {
                attackers.insert(a);
                attackers.insert(b);
            }
            (None, Some(_)) => {
                attackers.insert(a);
            }
            (Some(_), None) => {
                attackers.insert(b);
            }
            (Some(_), Some(_)) => {
                if policy == AttackerPolicy::Both {
                    attackers.insert(a);
                    attackers.insert(b);
                }
            }
        }
    }
    attackers
}

/// Diffs the live portion of the link log against the authorized set.
///
/// A pair is live when `last_seen >= now - liveness_window`. A full match
/// yields an empty verdict and nothing further happens.
pub fn audit(
    log: &LinkLog,
    auth: &AuthorizedLinks,
    now: Tick,
    liveness_window: Tick,
    policy: AttackerPolicy,
) -> SecurityVerdict {
    let unauthorized: BTreeSet<VmPair> = log
        .live_pairs(now, liveness_window)
        .filter(|pair| !auth.is_authorized(*pair))
        .collect();
    let attackers = identify_attackers(&unauthorized, auth, policy);
    SecurityVerdict {
        unauthorized,
        attackers,
        issued_at: now,
    }
}

/// A termination carried out for a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Termination {
    pub vm: VmId,
    /// Ground truth at termination time, for false-positive accounting.
    pub was_attacker: bool,
}

/// Terminates every attacker VM in the verdict, frees their hosts, and
/// removes the unauthorized entries from the link log.
///
/// Already-terminated VMs are skipped, so re-applying a verdict is a no-op.
pub fn apply_verdict<S: Scalar>(
    verdict: &SecurityVerdict,
    state: &mut DatacenterState<S>,
    log: &mut LinkLog,
) -> Vec<Termination> {
    let mut terminated = Vec::new();
    for &vm_id in &verdict.attackers {
        let Ok(vm) = state.vm(vm_id) else { continue };
        let was_attacker = vm.group.is_attacker();
        if state.terminate_vm(vm_id).unwrap_or(false) {
            log.remove_vm(vm_id);
            terminated.push(Termination {
                vm: vm_id,
                was_attacker,
            });
        }
    }
    for pair in &verdict.unauthorized {
        log.remove_pair(*pair);
    }
    terminated
}

/// One audit-trail line, emitted per non-empty verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: Tick,
    pub unauthorized: Vec<[String; 2]>,
    pub terminated: Vec<String>,
    pub policy: String,
}

impl AuditRecord {
    pub fn from_verdict(
        verdict: &SecurityVerdict,
        terminated: &[Termination],
        policy: AttackerPolicy,
    ) -> Self {
        Self {
            t: verdict.issued_at,
            unauthorized: verdict
                .unauthorized
                .iter()
                .map(|p| {
                    let (a, b) = p.endpoints();
                    [a.to_string(), b.to_string()]
                })
                .collect(),
            terminated: terminated.iter().map(|t| t.vm.to_string()).collect(),
            policy: policy.to_string(),
        }
    }
}
