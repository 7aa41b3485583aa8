//! Variance-ranked feature selection over the four resource dimensions.

use super::normalize::variance;
use super::WorkloadStore;
use crate::model::VmId;
use crate::resources::ResourceDim;
use crate::scalar::Scalar;

/// Ranks resource dimensions by sample variance, descending, dropping
/// dimensions whose variance falls below `variance_floor`.
///
/// At least the highest-variance dimension is always retained. With fewer
/// than two records the ranking is undefined and all dimensions are returned
/// in declaration order.
pub fn select_features<S: Scalar>(
    store: &WorkloadStore<S>,
    vm: VmId,
    variance_floor: S,
) -> Vec<ResourceDim> {
    if store.count_for(vm) < 2 {
        return ResourceDim::ALL.to_vec();
    }
    let mut ranked: Vec<(ResourceDim, S)> = ResourceDim::ALL
        .iter()
        .map(|&dim| (dim, variance(&store.dim_series(vm, dim))))
        .collect();
    // descending variance, declaration order on ties
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(a.0.index().cmp(&b.0.index()))
    });
    let kept: Vec<ResourceDim> = ranked
        .iter()
        .filter(|(_, v)| *v >= variance_floor)
        .map(|(d, _)| *d)
        .collect();
    if kept.is_empty() {
        vec![ranked[0].0]
    } else {
        kept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ServerId, Tick};
    use crate::resources::ResourceVector;
    use crate::workload::UsageRecord;

    fn store_with(samples: &[[f64; 4]]) -> WorkloadStore<f64> {
        let mut store = WorkloadStore::new(1000);
        for (t, s) in samples.iter().enumerate() {
            store
                .record(UsageRecord {
                    time: t as Tick,
                    vm: VmId(1),
                    server: ServerId(0),
                    usage: ResourceVector::from_array(*s),
                })
                .unwrap();
        }
        store
    }

    #[test]
    fn only_varying_dimension_survives() {
        let store = store_with(&[
            [1.0, 5.0, 5.0, 5.0],
            [3.0, 5.0, 5.0, 5.0],
            [2.0, 5.0, 5.0, 5.0],
        ]);
        assert_eq!(
            select_features(&store, VmId(1), 1e-12),
            vec![ResourceDim::Cpu]
        );
    }

    #[test]
    fn all_constant_keeps_first_dimension() {
        let store = store_with(&[[5.0, 5.0, 5.0, 5.0], [5.0, 5.0, 5.0, 5.0]]);
        assert_eq!(
            select_features(&store, VmId(1), 1e-12),
            vec![ResourceDim::Cpu]
        );
    }

    #[test]
    fn ranked_by_variance_descending() {
        // oracle: population variance of [0,4] is 4.0, of [0,2] is 1.0
        let store = store_with(&[[0.0, 0.0, 5.0, 5.0], [4.0, 2.0, 5.0, 5.0]]);
        assert_eq!(
            select_features(&store, VmId(1), 1e-12),
            vec![ResourceDim::Cpu, ResourceDim::Memory]
        );
    }

    #[test]
    fn insufficient_history_returns_declaration_order() {
        let store = store_with(&[[1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(
            select_features(&store, VmId(1), 1e-12),
            ResourceDim::ALL.to_vec()
        );
    }
}
