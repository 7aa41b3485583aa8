//! Attack injectors: co-residency, simultaneous multi-VM hijack, and the
//! grouped cascade chain.
//!
//! Attackers are VMs with no registered application (unless masquerading
//! inside a decoy application). Every injected attack opens its unauthorized
//! links immediately and keeps them alive until the attackers are
//! terminated or the breach dwell time elapses.

use std::collections::BTreeSet;

use rand::Rng;

use super::{AttackScenario, BreachAttempt, BreachOutcome, SimError, Simulation};
use crate::manager::{place_vm, ActionRecord, ManagerError};
use crate::model::{AppId, ServerId, Tick, UserId, Vm, VmGroup, VmId, VmPair, VmState};
use crate::resources::ResourceVector;
use crate::scalar::Scalar;

const ATTACKER_USER: UserId = UserId(u32::MAX);

pub(super) fn inject<S: Scalar>(sim: &mut Simulation<'_, S>, t: Tick) -> Result<(), SimError> {
    match sim.cfg.attack.scenario {
        AttackScenario::None => Ok(()),
        AttackScenario::CoResidency => inject_co_residency(sim, t),
        AttackScenario::MultiHijack => inject_multi_hijack(sim, t),
        AttackScenario::GroupedCascade => inject_grouped_cascade(sim, t),
    }
}

/// Active benign VMs of running applications, in id order.
fn victim_candidates<S: Scalar>(sim: &Simulation<'_, S>) -> Vec<VmId> {
    sim.state
        .vms
        .values()
        .filter(|vm| vm.state == VmState::Active)
        .filter(|vm| match vm.group {
            VmGroup::Application(app) => sim
                .state
                .applications
                .get(&app)
                .is_some_and(|a| a.status == crate::model::AppStatus::Running),
            VmGroup::Attacker { .. } => false,
        })
        .map(|vm| vm.id)
        .collect()
}

/// Attacker VM capacity: the named flavor, or the smallest in the catalogue.
/// With a `fit` bound, the smallest flavor fitting that free capacity.
fn attacker_capacity<S: Scalar>(
    sim: &Simulation<'_, S>,
    fit: Option<ResourceVector<S>>,
) -> Option<ResourceVector<S>> {
    if let Some(name) = &sim.cfg.attack.attacker_flavor {
        let capacity = sim
            .catalogue
            .flavors()
            .iter()
            .find(|f| &f.name == name)?
            .capacity;
        return match fit {
            Some(free) if !capacity.fits_within(free) => None,
            _ => Some(capacity),
        };
    }
    match fit {
        Some(free) => sim
            .catalogue
            .flavors()
            .iter()
            .find(|f| f.capacity.fits_within(free))
            .map(|f| f.capacity),
        None => sim.catalogue.flavors().first().map(|f| f.capacity),
    }
}

fn spawn_attacker<S: Scalar>(
    sim: &mut Simulation<'_, S>,
    capacity: ResourceVector<S>,
    masquerade: Option<AppId>,
) -> VmId {
    let id = sim.state.alloc_vm_id();
    sim.state.register_vm(Vm {
        id,
        capacity,
        owner: ATTACKER_USER,
        group: VmGroup::Attacker { masquerade },
        host: None,
        state: VmState::Migrating,
    });
    let phase = S::from_f64_lossy(sim.rng.gen_range(0.0..sim.cfg.usage.period as f64));
    sim.signal_phase.insert(id, phase);
    id
}

fn open_attempt<S: Scalar>(
    sim: &mut Simulation<'_, S>,
    attackers: BTreeSet<VmId>,
    target: VmId,
    links: Vec<VmPair>,
    t: Tick,
) {
    for pair in &links {
        sim.link_log.observe(*pair, t);
    }
    sim.attempts.push(BreachAttempt {
        attackers,
        target,
        established_at: t,
        completes_at: t + sim.cfg.attack.dwell,
        outcome: BreachOutcome::Pending,
        links,
    });
    sim.metrics.attacks_established += 1;
}

/// Forces one attacker VM onto the same server as a victim VM and opens an
/// unauthorized link to it.
fn inject_co_residency<S: Scalar>(sim: &mut Simulation<'_, S>, t: Tick) -> Result<(), SimError> {
    let candidates = victim_candidates(sim);
    if candidates.is_empty() {
        sim.warnings.push(format!(
            "t={t}: co-residency injection infeasible: no active victim"
        ));
        return Ok(());
    }
    let start = sim.rng.gen_range(0..candidates.len());
    for offset in 0..candidates.len() {
        let victim = candidates[(start + offset) % candidates.len()];
        let host = sim.state.vms[&victim]
            .host
            .expect("active victim is hosted");
        let free = sim.state.free_capacity(host)?;
        let Some(capacity) = attacker_capacity(sim, Some(free)) else {
            continue;
        };

        let masquerade = sim.cfg.attack.masquerade.then(|| sim.state.alloc_app_id());
        let attacker = spawn_attacker(sim, capacity, masquerade);
        sim.state.attach_vm(attacker, host)?;
        if let Some(app) = masquerade {
            sim.auth.register_application(app, &[attacker])?;
        }
        let pair = VmPair::new(attacker, victim).expect("attacker and victim are distinct");
        open_attempt(sim, BTreeSet::from([attacker]), victim, vec![pair], t);
        return Ok(());
    }
    sim.warnings.push(format!(
        "t={t}: co-residency injection infeasible: no co-locatable server"
    ));
    Ok(())
}

/// Launches `count` attackers, each co-located with a distinct victim VM,
/// all opening their unauthorized links simultaneously. Injects the feasible
/// subset if fewer co-locations are possible.
fn inject_multi_hijack<S: Scalar>(sim: &mut Simulation<'_, S>, t: Tick) -> Result<(), SimError> {
    let mut candidates = victim_candidates(sim);
    if candidates.is_empty() {
        sim.warnings.push(format!(
            "t={t}: multi-hijack injection infeasible: no active victims"
        ));
        return Ok(());
    }
    let wanted = sim.cfg.attack.count;
    // shuffle, then walk candidates until `wanted` co-locations succeed:
    // a picked victim on a full host is skipped for the next one
    for i in 0..candidates.len().saturating_sub(1) {
        let j = sim.rng.gen_range(i..candidates.len());
        candidates.swap(i, j);
    }

    let masquerade = sim.cfg.attack.masquerade.then(|| sim.state.alloc_app_id());
    let mut injected = Vec::new();
    for victim in candidates {
        if injected.len() == wanted {
            break;
        }
        let host = sim.state.vms[&victim]
            .host
            .expect("active victim is hosted");
        let free = sim.state.free_capacity(host)?;
        let Some(capacity) = attacker_capacity(sim, Some(free)) else {
            continue;
        };
        let attacker = spawn_attacker(sim, capacity, masquerade);
        sim.state.attach_vm(attacker, host)?;
        let pair = VmPair::new(attacker, victim).expect("attacker and victim are distinct");
        open_attempt(sim, BTreeSet::from([attacker]), victim, vec![pair], t);
        injected.push(attacker);
    }
    if let (Some(app), false) = (masquerade, injected.is_empty()) {
        sim.auth.register_application(app, &injected)?;
    }
    if injected.len() < wanted {
        sim.warnings.push(format!(
            "t={t}: multi-hijack injected {} of {wanted} requested attackers",
            injected.len()
        ));
    }
    Ok(())
}

/// Launches a chain of `count` attackers reaching one victim VM: every chain
/// link plus the final link to the target is unauthorized.
fn inject_grouped_cascade<S: Scalar>(sim: &mut Simulation<'_, S>, t: Tick) -> Result<(), SimError> {
    let candidates = victim_candidates(sim);
    if candidates.is_empty() {
        sim.warnings.push(format!(
            "t={t}: cascade injection infeasible: no active victim"
        ));
        return Ok(());
    }
    let victim = candidates[sim.rng.gen_range(0..candidates.len())];
    let Some(capacity) = attacker_capacity(sim, None) else {
        sim.warnings.push(format!(
            "t={t}: cascade injection infeasible: empty catalogue"
        ));
        return Ok(());
    };

    let masquerade = sim.cfg.attack.masquerade.then(|| sim.state.alloc_app_id());
    let mut chain: Vec<VmId> = Vec::new();
    let mut powered_on: Vec<ServerId> = Vec::new();
    for _ in 0..sim.cfg.attack.count {
        match place_vm(&sim.state, capacity, None, true) {
            Ok(placement) => {
                if placement.power_on {
                    sim.state.power_on(placement.server)?;
                    powered_on.push(placement.server);
                    sim.actions
                        .push(ActionRecord::power(t, true, placement.server, "admission"));
                }
                let attacker = spawn_attacker(sim, capacity, masquerade);
                sim.state.attach_vm(attacker, placement.server)?;
                chain.push(attacker);
            }
            Err(ManagerError::AdmissionRejected) => {
                for vm in &chain {
                    sim.state.terminate_vm(*vm)?;
                    sim.state.unregister_vm(*vm);
                    sim.signal_phase.remove(vm);
                }
                for server in powered_on.iter().rev() {
                    if sim.state.servers[server].hosted.is_empty() {
                        sim.state.power_off(*server)?;
                        sim.actions
                            .push(ActionRecord::power(t, false, *server, "admission"));
                    }
                }
                sim.warnings.push(format!(
                    "t={t}: cascade injection infeasible: placement failed"
                ));
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(app) = masquerade {
        sim.auth.register_application(app, &chain)?;
    }

    let mut links: Vec<VmPair> = chain
        .windows(2)
        .map(|w| VmPair::new(w[0], w[1]).expect("chain ids are distinct"))
        .collect();
    links.push(VmPair::new(*chain.last().unwrap(), victim).expect("attacker and victim differ"));
    open_attempt(sim, chain.into_iter().collect(), victim, links, t);
    Ok(())
}
