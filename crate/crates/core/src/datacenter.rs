//! The mutable world the event loop evolves: servers, VMs, applications and
//! their placement bookkeeping.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{AppId, Application, PowerState, Server, ServerId, Vm, VmId, VmState};
use crate::resources::{ResourceDim, ResourceError, ResourceVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("unknown server {0}")]
    UnknownServer(ServerId),
    #[error("unknown vm {0}")]
    UnknownVm(VmId),
    #[error("server {0} is powered off")]
    ServerOff(ServerId),
    #[error("server {0} cannot fit the requested capacity")]
    CapacityExceeded(ServerId),
    #[error("server {0} still hosts VMs")]
    ServerNotEmpty(ServerId),
    #[error("vm {0} is not hosted anywhere")]
    VmNotHosted(VmId),
    #[error("vm {0} is terminated")]
    VmTerminated(VmId),
    #[error(transparent)]
    Resource(#[from] ResourceError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvariantViolation {
    /// Sum of hosted VM capacities exceeds the server capacity.
    CapacityExceeded { server: ServerId, dim: ResourceDim },
    /// A terminated VM still appears in a hosted set.
    ZombieHosting { server: ServerId, vm: VmId },
    /// An active VM is hosted on zero or several servers, or on an off server.
    PlacementBroken { vm: VmId },
    /// Created VM count does not match the live + terminated population.
    ConservationBroken { created: u64, accounted: u64 },
    /// An off server still hosts VMs.
    OffServerHosting { server: ServerId },
    /// The active-server index disagrees with a server's power state.
    IndexDrift { server: ServerId },
}

/// Servers, VMs and applications plus id allocation and placement rules.
///
/// All mutation happens on the simulator's event-loop thread; the struct is
/// plain data and can be cloned for what-if evaluation. `vms` holds only
/// live (active or migrating) VMs; terminated ones move to the graveyard so
/// per-tick scans stay proportional to the live population.
#[derive(Debug, Clone, Default)]
pub struct DatacenterState<S> {
    pub servers: BTreeMap<ServerId, Server<S>>,
    pub vms: BTreeMap<VmId, Vm<S>>,
    pub graveyard: BTreeMap<VmId, Vm<S>>,
    pub applications: BTreeMap<AppId, Application<S>>,
    /// Ids of powered-on servers, maintained by the power transitions. The
    /// invariant checker cross-validates it against the power states.
    active_servers: std::collections::BTreeSet<ServerId>,
    created_vms: u64,
    next_vm: u32,
    next_app: u32,
    next_task: u32,
}

impl<S: Scalar> DatacenterState<S> {
    pub fn new() -> Self {
        Self {
            servers: BTreeMap::new(),
            vms: BTreeMap::new(),
            graveyard: BTreeMap::new(),
            applications: BTreeMap::new(),
            active_servers: std::collections::BTreeSet::new(),
            created_vms: 0,
            next_vm: 0,
            next_app: 0,
            next_task: 0,
        }
    }

    pub fn add_server(&mut self, capacity: ResourceVector<S>, power: PowerState) -> ServerId {
        let id = ServerId(self.servers.len() as u32);
        self.servers.insert(id, Server::new(id, capacity, power));
        if power == PowerState::Active {
            self.active_servers.insert(id);
        }
        id
    }

    /// Ids of powered-on servers, ascending.
    pub fn active_server_ids(&self) -> impl Iterator<Item = ServerId> + '_ {
        self.active_servers.iter().copied()
    }

    pub fn alloc_vm_id(&mut self) -> VmId {
        let id = VmId(self.next_vm);
        self.next_vm += 1;
        id
    }

    pub fn alloc_app_id(&mut self) -> AppId {
        let id = AppId(self.next_app);
        self.next_app += 1;
        id
    }

    pub fn alloc_task_id(&mut self) -> crate::model::TaskId {
        let id = crate::model::TaskId(self.next_task);
        self.next_task += 1;
        id
    }

    pub fn server(&self, id: ServerId) -> Result<&Server<S>, StateError> {
        self.servers.get(&id).ok_or(StateError::UnknownServer(id))
    }

    /// Looks a VM up among both live and terminated populations.
    pub fn vm(&self, id: VmId) -> Result<&Vm<S>, StateError> {
        self.vms
            .get(&id)
            .or_else(|| self.graveyard.get(&id))
            .ok_or(StateError::UnknownVm(id))
    }

    /// Sum of hosted VM capacities (the reservation load) on a server.
    pub fn reserved(&self, server: ServerId) -> Result<ResourceVector<S>, StateError> {
        Ok(self.server(server)?.reserved)
    }

    fn recompute_reserved(&mut self, server: ServerId) {
        let srv = &self.servers[&server];
        let sum = ResourceVector::sum(
            srv.hosted
                .iter()
                .filter_map(|vm| self.vms.get(vm))
                .map(|vm| vm.capacity),
        );
        self.servers.get_mut(&server).unwrap().reserved = sum;
    }

    /// Capacity still free for reservations on a server.
    pub fn free_capacity(&self, server: ServerId) -> Result<ResourceVector<S>, StateError> {
        let srv = self.server(server)?;
        Ok(srv.capacity.saturating_sub(srv.reserved))
    }

    /// Whether an active server can take an additional reservation.
    pub fn can_host(&self, server: ServerId, capacity: ResourceVector<S>) -> bool {
        match self.servers.get(&server) {
            Some(srv) if srv.is_active() => (srv.reserved + capacity).fits_within(srv.capacity),
            _ => false,
        }
    }

    /// Registers a freshly created VM, unhosted. Counts toward conservation.
    pub fn register_vm(&mut self, vm: Vm<S>) {
        self.created_vms += 1;
        self.vms.insert(vm.id, vm);
    }

    /// Removes a VM that was registered but never attached (admission rollback).
    pub fn unregister_vm(&mut self, vm: VmId) {
        if self.vms.remove(&vm).is_some() || self.graveyard.remove(&vm).is_some() {
            self.created_vms -= 1;
        }
    }

    /// Attaches a VM to an active server, enforcing capacity safety.
    pub fn attach_vm(&mut self, vm_id: VmId, server_id: ServerId) -> Result<(), StateError> {
        let vm = self.vm(vm_id)?;
        if vm.state == VmState::Terminated {
            return Err(StateError::VmTerminated(vm_id));
        }
        let capacity = vm.capacity;
        let srv = self.server(server_id)?;
        if !srv.is_active() {
            return Err(StateError::ServerOff(server_id));
        }
        if !self.can_host(server_id, capacity) {
            return Err(StateError::CapacityExceeded(server_id));
        }
        self.servers
            .get_mut(&server_id)
            .unwrap()
            .hosted
            .insert(vm_id);
        let vm = self.vms.get_mut(&vm_id).unwrap();
        vm.host = Some(server_id);
        vm.state = VmState::Active;
        self.recompute_reserved(server_id);
        Ok(())
    }

    /// Detaches a VM from its host, leaving it in the `Migrating` state.
    pub fn detach_vm(&mut self, vm_id: VmId) -> Result<ServerId, StateError> {
        let host = self.vm(vm_id)?.host.ok_or(StateError::VmNotHosted(vm_id))?;
        self.servers.get_mut(&host).unwrap().hosted.remove(&vm_id);
        let vm = self.vms.get_mut(&vm_id).unwrap();
        vm.host = None;
        vm.state = VmState::Migrating;
        self.recompute_reserved(host);
        Ok(host)
    }

    /// Moves a VM between servers; capacity-checked on the target.
    pub fn migrate_vm(&mut self, vm_id: VmId, target: ServerId) -> Result<ServerId, StateError> {
        let from = self.detach_vm(vm_id)?;
        match self.attach_vm(vm_id, target) {
            Ok(()) => Ok(from),
            Err(e) => {
                // roll back so the state stays consistent
                self.attach_vm(vm_id, from)
                    .expect("source still fits its own VM");
                Err(e)
            }
        }
    }

    /// Terminates a VM, freeing its host and moving it to the graveyard.
    /// Idempotent.
    pub fn terminate_vm(&mut self, vm_id: VmId) -> Result<bool, StateError> {
        let vm = self.vm(vm_id)?;
        if vm.state == VmState::Terminated {
            return Ok(false);
        }
        if let Some(host) = vm.host {
            self.servers.get_mut(&host).unwrap().hosted.remove(&vm_id);
            self.recompute_reserved(host);
        }
        let mut vm = self.vms.remove(&vm_id).unwrap();
        vm.host = None;
        vm.state = VmState::Terminated;
        self.graveyard.insert(vm_id, vm);
        Ok(true)
    }

    pub fn power_on(&mut self, server_id: ServerId) -> Result<(), StateError> {
        let srv = self
            .servers
            .get_mut(&server_id)
            .ok_or(StateError::UnknownServer(server_id))?;
        srv.power = PowerState::Active;
        self.active_servers.insert(server_id);
        Ok(())
    }

    pub fn power_off(&mut self, server_id: ServerId) -> Result<(), StateError> {
        let srv = self
            .servers
            .get_mut(&server_id)
            .ok_or(StateError::UnknownServer(server_id))?;
        if !srv.hosted.is_empty() {
            return Err(StateError::ServerNotEmpty(server_id));
        }
        srv.power = PowerState::Off;
        self.active_servers.remove(&server_id);
        Ok(())
    }

    /// Per-component ratio of reserved capacity to server capacity, in `[0,1]^4`.
    ///
    /// The server must be active and all its capacity components positive.
    pub fn server_utilization(&self, server_id: ServerId) -> Result<ResourceVector<S>, StateError> {
        let srv = self.server(server_id)?;
        if !srv.is_active() {
            return Err(StateError::ServerOff(server_id));
        }
        let used = self.reserved(server_id)?;
        Ok(used.ratio(srv.capacity)?)
    }

    pub fn active_server_count(&self) -> u64 {
        self.active_servers.len() as u64
    }

    pub fn active_vms(&self) -> impl Iterator<Item = &Vm<S>> {
        self.vms.values().filter(|vm| vm.state == VmState::Active)
    }

    pub fn created_vm_count(&self) -> u64 {
        self.created_vms
    }

    /// Checks capacity safety, placement totality, zombie hosting and VM
    /// conservation. Reservation sums are recomputed from scratch here, so
    /// cache drift cannot hide an over-admission. Returns every violation.
    pub fn verify_invariants(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let eps = S::from_f64_lossy(1e-9);
        let mut well_hosted = 0u64;
        for srv in self.servers.values() {
            if srv.is_active() != self.active_servers.contains(&srv.id) {
                out.push(InvariantViolation::IndexDrift { server: srv.id });
            }
            if !srv.is_active() && !srv.hosted.is_empty() {
                out.push(InvariantViolation::OffServerHosting { server: srv.id });
            }
            let mut used = ResourceVector::zero();
            for vm_id in &srv.hosted {
                match self.vms.get(vm_id) {
                    Some(vm) => {
                        used += vm.capacity;
                        // a VM listed under two servers mismatches on at
                        // least one of them
                        if vm.host == Some(srv.id) && vm.state == VmState::Active {
                            well_hosted += 1;
                        } else {
                            out.push(InvariantViolation::PlacementBroken { vm: *vm_id });
                        }
                    }
                    // terminated VMs never sit in the live map, so a stale
                    // hosted entry shows up as a miss
                    None => out.push(InvariantViolation::ZombieHosting {
                        server: srv.id,
                        vm: *vm_id,
                    }),
                }
            }
            if !srv.hosted.is_empty() {
                for (dim, (u, c)) in ResourceDim::ALL
                    .iter()
                    .zip(used.as_array().into_iter().zip(srv.capacity.as_array()))
                {
                    if u > c * (S::one() + eps) + eps {
                        out.push(InvariantViolation::CapacityExceeded {
                            server: srv.id,
                            dim: *dim,
                        });
                    }
                }
            }
        }
        // Placement totality by counting: every hosted entry points back at
        // exactly one active VM (above), so the active population is fully
        // hosted iff the counts agree.
        let mut active_vms = 0u64;
        for vm in self.vms.values() {
            match vm.state {
                VmState::Active => active_vms += 1,
                VmState::Migrating => {
                    if vm.host.is_some() {
                        out.push(InvariantViolation::PlacementBroken { vm: vm.id });
                    }
                }
                VmState::Terminated => {
                    out.push(InvariantViolation::PlacementBroken { vm: vm.id });
                }
            }
        }
        if active_vms != well_hosted {
            out.push(InvariantViolation::ConservationBroken {
                created: active_vms,
                accounted: well_hosted,
            });
        }
        let accounted = (self.vms.len() + self.graveyard.len()) as u64;
        if accounted != self.created_vms {
            out.push(InvariantViolation::ConservationBroken {
                created: self.created_vms,
                accounted,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{UserId, VmGroup};

    fn rv(c: f64, m: f64, d: f64, b: f64) -> ResourceVector<f64> {
        ResourceVector::new(c, m, d, b).unwrap()
    }

    fn mk_vm(state: &mut DatacenterState<f64>, capacity: ResourceVector<f64>) -> VmId {
        let id = state.alloc_vm_id();
        state.register_vm(Vm {
            id,
            capacity,
            owner: UserId(0),
            group: VmGroup::Application(AppId(0)),
            host: None,
            state: VmState::Migrating,
        });
        id
    }

    #[test]
    fn utilization_half_load() {
        let mut st = DatacenterState::new();
        let s = st.add_server(rv(10.0, 10.0, 10.0, 10.0), PowerState::Active);
        let v = mk_vm(&mut st, rv(5.0, 5.0, 5.0, 5.0));
        st.attach_vm(v, s).unwrap();
        assert_eq!(st.server_utilization(s).unwrap(), rv(0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn utilization_empty_server() {
        let mut st = DatacenterState::<f64>::new();
        let s = st.add_server(rv(10.0, 10.0, 10.0, 10.0), PowerState::Active);
        assert_eq!(st.server_utilization(s).unwrap(), rv(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn utilization_full_server() {
        let mut st = DatacenterState::new();
        let s = st.add_server(rv(4.0, 8.0, 8.0, 8.0), PowerState::Active);
        let v = mk_vm(&mut st, rv(4.0, 8.0, 8.0, 8.0));
        st.attach_vm(v, s).unwrap();
        assert_eq!(st.server_utilization(s).unwrap(), rv(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn utilization_rejects_zero_capacity_component() {
        let mut st = DatacenterState::<f64>::new();
        let s = st.add_server(rv(10.0, 0.0, 10.0, 10.0), PowerState::Active);
        assert!(matches!(
            st.server_utilization(s),
            Err(StateError::Resource(ResourceError::ZeroCapacity(
                ResourceDim::Memory
            )))
        ));
    }

    #[test]
    fn utilization_rejects_off_server() {
        let mut st = DatacenterState::<f64>::new();
        let s = st.add_server(rv(10.0, 10.0, 10.0, 10.0), PowerState::Off);
        assert_eq!(st.server_utilization(s), Err(StateError::ServerOff(s)));
    }

    #[test]
    fn attach_enforces_capacity() {
        let mut st = DatacenterState::new();
        let s = st.add_server(rv(4.0, 4.0, 4.0, 4.0), PowerState::Active);
        let v1 = mk_vm(&mut st, rv(3.0, 3.0, 3.0, 3.0));
        let v2 = mk_vm(&mut st, rv(2.0, 2.0, 2.0, 2.0));
        st.attach_vm(v1, s).unwrap();
        assert_eq!(st.attach_vm(v2, s), Err(StateError::CapacityExceeded(s)));
        assert!(st.verify_invariants().is_empty());
    }

    #[test]
    fn terminate_is_idempotent_and_frees_host() {
        let mut st = DatacenterState::new();
        let s = st.add_server(rv(4.0, 4.0, 4.0, 4.0), PowerState::Active);
        let v = mk_vm(&mut st, rv(2.0, 2.0, 2.0, 2.0));
        st.attach_vm(v, s).unwrap();
        assert!(st.terminate_vm(v).unwrap());
        assert!(!st.terminate_vm(v).unwrap());
        assert!(st.servers[&s].hosted.is_empty());
        assert!(st.verify_invariants().is_empty());
    }

    #[test]
    fn invariant_checker_spots_zombie_hosting() {
        let mut st = DatacenterState::new();
        let s = st.add_server(rv(4.0, 4.0, 4.0, 4.0), PowerState::Active);
        let v = mk_vm(&mut st, rv(2.0, 2.0, 2.0, 2.0));
        st.attach_vm(v, s).unwrap();
        st.terminate_vm(v).unwrap();
        // corrupt the state on purpose: resurrect the hosted entry
        st.servers.get_mut(&s).unwrap().hosted.insert(v);
        let violations = st.verify_invariants();
        assert!(violations
            .iter()
            .any(|v| matches!(v, InvariantViolation::ZombieHosting { .. })));
    }

    #[test]
    fn power_off_requires_empty() {
        let mut st = DatacenterState::new();
        let s = st.add_server(rv(4.0, 4.0, 4.0, 4.0), PowerState::Active);
        let v = mk_vm(&mut st, rv(2.0, 2.0, 2.0, 2.0));
        st.attach_vm(v, s).unwrap();
        assert_eq!(st.power_off(s), Err(StateError::ServerNotEmpty(s)));
        st.terminate_vm(v).unwrap();
        st.power_off(s).unwrap();
        assert_eq!(st.servers[&s].power, PowerState::Off);
    }
}
