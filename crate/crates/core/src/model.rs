//! Domain types shared by every unit: servers, VMs, applications, tasks and
//! inter-VM links.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resources::ResourceVector;

/// Simulation time in discrete ticks; one usage sample per VM per tick.
pub type Tick = u64;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, concat!($prefix, "-{}"), self.0)
            }
        }
    };
}

id_type!(ServerId, "server");
id_type!(VmId, "vm");
id_type!(AppId, "app");
id_type!(TaskId, "task");
id_type!(UserId, "user");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("self-link on {0} is not a valid inter-VM link")]
    SelfLink(VmId),
}

/// Unordered pair of distinct VM ids; equality and ordering ignore the
/// order the endpoints were given in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VmPair {
    lo: VmId,
    hi: VmId,
}

impl VmPair {
    pub fn new(a: VmId, b: VmId) -> Result<Self, ModelError> {
        if a == b {
            return Err(ModelError::SelfLink(a));
        }
        if a < b {
            Ok(Self { lo: a, hi: b })
        } else {
            Ok(Self { lo: b, hi: a })
        }
    }

    pub fn endpoints(self) -> (VmId, VmId) {
        (self.lo, self.hi)
    }

    pub fn contains(self, vm: VmId) -> bool {
        self.lo == vm || self.hi == vm
    }

    /// The endpoint other than `vm`, if `vm` is an endpoint.
    pub fn other(self, vm: VmId) -> Option<VmId> {
        if self.lo == vm {
            Some(self.hi)
        } else if self.hi == vm {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl std::fmt::Display for VmPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}~{}", self.lo, self.hi)
    }
}

/// An observed communication link between two VMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub pair: VmPair,
    pub established_at: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerState {
    Active,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VmState {
    Active,
    Migrating,
    Terminated,
}

/// Who a VM works for: a registered application, or an attacker. An attacker
/// may masquerade inside a registered decoy application, in which case the
/// decoy id is what link authorization sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmGroup {
    Application(AppId),
    Attacker { masquerade: Option<AppId> },
}

impl VmGroup {
    /// The application this VM is registered under for link authorization.
    pub fn registered_app(self) -> Option<AppId> {
        match self {
            VmGroup::Application(app) => Some(app),
            VmGroup::Attacker { masquerade } => masquerade,
        }
    }

    /// Ground truth, independent of any masquerade.
    pub fn is_attacker(self) -> bool {
        matches!(self, VmGroup::Attacker { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Server<S> {
    pub id: ServerId,
    pub capacity: ResourceVector<S>,
    pub power: PowerState,
    pub hosted: BTreeSet<VmId>,
    /// Sum of hosted VM capacities, maintained by the datacenter state on
    /// every placement change. The invariant checker recomputes it from
    /// scratch, so drift cannot mask an over-admission.
    pub(crate) reserved: ResourceVector<S>,
}

impl<S> Server<S> {
    pub fn new(id: ServerId, capacity: ResourceVector<S>, power: PowerState) -> Self
    where
        S: crate::scalar::Scalar,
    {
        Self {
            id,
            capacity,
            power,
            hosted: BTreeSet::new(),
            reserved: ResourceVector::zero(),
        }
    }

    pub fn is_active(&self) -> bool {
        self.power == PowerState::Active
    }

    /// Current reservation load (sum of hosted VM capacities).
    pub fn reserved(&self) -> ResourceVector<S>
    where
        S: Copy,
    {
        self.reserved
    }
}

#[derive(Debug, Clone)]
pub struct Vm<S> {
    pub id: VmId,
    pub capacity: ResourceVector<S>,
    pub owner: UserId,
    pub group: VmGroup,
    pub host: Option<ServerId>,
    pub state: VmState,
}

#[derive(Debug, Clone)]
pub struct Task<S> {
    pub id: TaskId,
    pub demand: ResourceVector<S>,
    pub duration: Tick,
    pub assigned_vm: Option<VmId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppStatus {
    Running,
    Completed(Tick),
    /// A task's VM was lost before it finished.
    Failed(Tick),
}

#[derive(Debug, Clone)]
pub struct Application<S> {
    pub id: AppId,
    pub user: UserId,
    pub tasks: Vec<Task<S>>,
    pub arrival_time: Tick,
    pub status: AppStatus,
}

impl<S> Application<S> {
    pub fn completion_time(&self) -> Option<Tick> {
        match self.status {
            AppStatus::Completed(t) => Some(t),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    #[test]
    fn pair_is_order_insensitive() {
        let ab = VmPair::new(VmId(1), VmId(2)).unwrap();
        let ba = VmPair::new(VmId(2), VmId(1)).unwrap();
        assert_eq!(ab, ba);

        let hash = |p: &VmPair| {
            let mut h = DefaultHasher::new();
            p.hash(&mut h);
            h.finish()
        };
        assert_eq!(hash(&ab), hash(&ba));
    }

    #[test]
    fn self_link_is_rejected() {
        assert_eq!(
            VmPair::new(VmId(7), VmId(7)),
            Err(ModelError::SelfLink(VmId(7)))
        );
    }

    #[test]
    fn pair_other_endpoint() {
        let p = VmPair::new(VmId(3), VmId(9)).unwrap();
        assert_eq!(p.other(VmId(3)), Some(VmId(9)));
        assert_eq!(p.other(VmId(9)), Some(VmId(3)));
        assert_eq!(p.other(VmId(4)), None);
    }
}
