//! Property tests for the structural invariants: normalizer round-trips,
//! authorized-set closure, audit completeness, greedy overload selection and
//! plan safety.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use vmshield_core::datacenter::DatacenterState;
use vmshield_core::manager::{apply_plan, handle_overload, handle_underload, ManagerError};
use vmshield_core::model::{AppId, PowerState, UserId, Vm, VmId, VmPair, VmState};
use vmshield_core::resources::ResourceVector;
use vmshield_core::security::{
    audit, identify_attackers, AttackerPolicy, AuthorizedLinks, LinkLog,
};
use vmshield_core::workload::{
    Normalizer, NormalizerMethod, PredictorConfig, UsageRecord, VmPredictor, WorkloadStore,
};

fn rv(a: [f64; 4]) -> ResourceVector<f64> {
    ResourceVector::from_array(a)
}

proptest! {
    #[test]
    fn normalizer_round_trips_on_window(values in prop::collection::vec(-1e6f64..1e6, 1..64)) {
        for method in [NormalizerMethod::MinMax, NormalizerMethod::ZScore, NormalizerMethod::Clip] {
            let n = match Normalizer::fit_or_fallback(&values, method) {
                Ok(n) => n,
                Err(_) => continue,
            };
            for &x in &values {
                let rt = n.invert(n.apply(x));
                let tol = 1e-9 * x.abs().max(1.0);
                prop_assert!((rt - x).abs() <= tol, "{method:?}: {x} -> {rt}");
            }
        }
    }

    #[test]
    fn link_pairs_ignore_endpoint_order(a in 0u32..1000, b in 0u32..1000) {
        prop_assume!(a != b);
        let ab = VmPair::new(VmId(a), VmId(b)).unwrap();
        let ba = VmPair::new(VmId(b), VmId(a)).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(ab.cmp(&ba), std::cmp::Ordering::Equal);
    }

    /// The authorized set equals the brute-force union of complete graphs
    /// per application.
    #[test]
    fn authorized_set_is_union_of_complete_graphs(
        groups in prop::collection::vec(prop::collection::vec(0u32..60, 1..8), 1..10)
    ) {
        // make VM ids globally unique across applications
        let mut next = 0u32;
        let groups: Vec<Vec<VmId>> = groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|_| {
                        next += 1;
                        VmId(next)
                    })
                    .collect()
            })
            .collect();

        let mut auth = AuthorizedLinks::new();
        for (i, vms) in groups.iter().enumerate() {
            auth.register_application(AppId(i as u32), vms).unwrap();
        }

        let mut brute = BTreeSet::new();
        for vms in &groups {
            for i in 0..vms.len() {
                for j in (i + 1)..vms.len() {
                    brute.insert(VmPair::new(vms[i], vms[j]).unwrap());
                }
            }
        }
        prop_assert_eq!(auth.pairs(), &brute);
    }

    /// Every live logged pair missing from the authorized set appears in the
    /// verdict, and nothing else does.
    #[test]
    fn audit_equals_brute_force_set_difference(
        groups in prop::collection::vec(prop::collection::vec(0u32..50, 1..6), 1..10),
        raw_pairs in prop::collection::vec((0u32..50, 0u32..50), 0..80),
        stale_mask in prop::collection::vec(any::<bool>(), 80)
    ) {
        let mut next = 0u32;
        let groups: Vec<Vec<VmId>> = groups
            .iter()
            .map(|g| g.iter().map(|_| { next += 1; VmId(next) }).collect())
            .collect();
        let mut auth = AuthorizedLinks::new();
        for (i, vms) in groups.iter().enumerate() {
            auth.register_application(AppId(i as u32), vms).unwrap();
        }

        let now = 100u64;
        let window = 5u64;
        let mut log = LinkLog::new();
        for (i, (a, b)) in raw_pairs.iter().enumerate() {
            if a == b {
                continue;
            }
            let pair = VmPair::new(VmId(*a), VmId(*b)).unwrap();
            let seen_at = if stale_mask[i] { now - window - 10 } else { now };
            log.observe(pair, seen_at);
        }
        // a pair is live iff any of its observations was fresh
        let mut live: BTreeSet<VmPair> = BTreeSet::new();
        for (i, (a, b)) in raw_pairs.iter().enumerate() {
            if a != b && !stale_mask[i] {
                live.insert(VmPair::new(VmId(*a), VmId(*b)).unwrap());
            }
        }

        let verdict = audit(&log, &auth, now, window, AttackerPolicy::Both);
        let brute: BTreeSet<VmPair> =
            live.iter().filter(|p| !auth.pairs().contains(p)).copied().collect();
        prop_assert_eq!(&verdict.unauthorized, &brute);

        // attacker identification equals the per-endpoint membership rules
        let mut expect = BTreeSet::new();
        for pair in &brute {
            let (x, y) = pair.endpoints();
            match (auth.group_of(x), auth.group_of(y)) {
                (None, None) => {
                    expect.insert(x);
                    expect.insert(y);
                }
                (None, Some(_)) => {
                    expect.insert(x);
                }
                (Some(_), None) => {
                    expect.insert(y);
                }
                (Some(_), Some(_)) => {
                    expect.insert(x);
                    expect.insert(y);
                }
            }
        }
        prop_assert_eq!(&verdict.attackers, &expect);
        let unregistered = identify_attackers(&brute, &auth, AttackerPolicy::UnregisteredOnly);
        prop_assert!(unregistered.iter().all(|vm| auth.group_of(*vm).is_none()));
    }
}

/// (vm capacities, forecast fractions, server slack, spare-server frees)
type OverloadInstance = (Vec<[f64; 4]>, Vec<[f64; 4]>, [f64; 4], Vec<[f64; 4]>);

fn overload_instance() -> impl Strategy<Value = OverloadInstance> {
    (
        prop::collection::vec(prop::array::uniform4(1.0f64..5.0), 1..=8),
        prop::collection::vec(prop::array::uniform4(0.0f64..1.8), 1..=8),
        prop::array::uniform4(0.0f64..4.0),
        prop::collection::vec(prop::array::uniform4(0.0f64..12.0), 0..=3),
    )
}

proptest! {
    /// Greedy overload selection equals the shortest feasibility-achieving
    /// prefix, and applying the plan preserves capacity safety.
    #[test]
    fn overload_selection_matches_prefix_oracle(
        (vm_caps, forecast_fracs, slack, spare_frees) in overload_instance()
    ) {
        let mut state = DatacenterState::<f64>::new();
        let n = vm_caps.len();
        let mut total_cap = [0.0f64; 4];
        for cap in &vm_caps {
            for (t, c) in total_cap.iter_mut().zip(cap) {
                *t += c;
            }
        }
        let server_cap: [f64; 4] =
            std::array::from_fn(|i| total_cap[i] + slack[i]);
        let server = state.add_server(rv(server_cap), PowerState::Active);
        for free in &spare_frees {
            state.add_server(rv(*free), PowerState::Active);
        }

        let mut forecasts = BTreeMap::new();
        let mut vms = Vec::new();
        for (cap, frac) in vm_caps.iter().zip(forecast_fracs.iter().cycle()) {
            let id = state.alloc_vm_id();
            state.register_vm(Vm {
                id,
                capacity: rv(*cap),
                owner: UserId(0),
                group: vmshield_core::model::VmGroup::Application(AppId(0)),
                host: None,
                state: VmState::Migrating,
            });
            state.attach_vm(id, server).unwrap();
            // synthetic forecasts may exceed the VM capacity
            let f: [f64; 4] = std::array::from_fn(|i| cap[i] * frac[i]);
            forecasts.insert(id, rv(f));
            vms.push(id);
        }
        let _ = n;

        let reference = rv([5.0, 5.0, 5.0, 5.0]);
        let outcome = match handle_overload(&state, server, &forecasts, 1.0, reference) {
            Ok(o) => o,
            Err(ManagerError::NotOverloaded(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };

        // oracle: brute force over prefixes of the capacity-descending order
        let mut order = vms.clone();
        order.sort_by(|a, b| {
            let ka = vmshield_core::manager::scalar_size_key(state.vms[a].capacity, reference);
            let kb = vmshield_core::manager::scalar_size_key(state.vms[b].capacity, reference);
            kb.partial_cmp(&ka).unwrap().then(a.cmp(b))
        });
        let total = forecasts.values().fold(ResourceVector::zero(), |a, v| a + *v);
        let limit = rv(server_cap);
        let mut oracle_take = order.len();
        for take in 0..=order.len() {
            let mut remaining = total;
            for vm in &order[..take] {
                remaining = remaining.saturating_sub(forecasts[vm]);
            }
            if remaining.fits_within(limit) {
                oracle_take = take;
                break;
            }
        }
        prop_assert_eq!(&outcome.selected, &order[..oracle_take]);

        let mut after = state.clone();
        apply_plan(&mut after, &outcome.plan, 0).unwrap();
        prop_assert!(after.verify_invariants().is_empty());
    }

    /// Underload plans are all-or-nothing and keep the state capacity-safe.
    #[test]
    fn underload_plans_preserve_safety(
        vm_caps in prop::collection::vec(prop::array::uniform4(0.5f64..2.0), 1..=4),
        other_free in prop::array::uniform4(0.0f64..10.0),
    ) {
        let mut state = DatacenterState::<f64>::new();
        let server = state.add_server(rv([20.0, 20.0, 20.0, 20.0]), PowerState::Active);
        let other = state.add_server(rv(other_free), PowerState::Active);
        let _ = other;
        let mut forecast = ResourceVector::zero();
        for cap in &vm_caps {
            let id = state.alloc_vm_id();
            state.register_vm(Vm {
                id,
                capacity: rv(*cap),
                owner: UserId(0),
                group: vmshield_core::model::VmGroup::Application(AppId(0)),
                host: None,
                state: VmState::Migrating,
            });
            state.attach_vm(id, server).unwrap();
            forecast += rv(*cap).scale(0.05);
        }
        let plan = match handle_underload(&state, server, forecast, 0.2) {
            Ok(p) => p,
            Err(ManagerError::NotUnderloaded(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        if plan.is_empty() {
            return Ok(());
        }
        prop_assert_eq!(plan.moves.len(), vm_caps.len(), "all-or-nothing");
        let mut after = state.clone();
        apply_plan(&mut after, &plan, 0).unwrap();
        prop_assert!(after.verify_invariants().is_empty());
        prop_assert!(!after.servers[&server].is_active());
    }

    /// Emitted forecasts always land inside `[0, vm capacity]`.
    #[test]
    fn forecasts_respect_capacity_bounds(
        series in prop::collection::vec(0.0f64..50.0, 8..40),
        cap in 1.0f64..30.0,
        horizon in 0u64..12,
    ) {
        let mut store = WorkloadStore::new(10_000);
        for (t, &v) in series.iter().enumerate() {
            store
                .record(UsageRecord {
                    time: t as u64,
                    vm: VmId(1),
                    server: vmshield_core::model::ServerId(0),
                    usage: ResourceVector::splat(v.min(cap)),
                })
                .unwrap();
        }
        let mut predictor = VmPredictor::new(PredictorConfig {
            lags: 3,
            learning_rate: 0.05,
            epochs: 60,
            ..PredictorConfig::default()
        });
        let _ = predictor.train(&store, VmId(1), 60, series.len() as u64);
        let capacity = ResourceVector::splat(cap);
        let f = predictor.predict(&store, VmId(1), horizon, capacity);
        prop_assert!(f.fits_within(capacity), "forecast {f:?} exceeds capacity {cap}");
        prop_assert!(f.as_array().into_iter().all(|v| v >= 0.0));
    }
}
