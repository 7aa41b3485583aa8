//! Per-VM linear autoregressive usage forecasting.
//!
//! Each resource dimension gets its own model: a bias plus `k` lag weights,
//! fitted on the normalized history by batch gradient descent on the mean
//! squared one-step error. Training is deterministic: weights start at zero
//! and every step either lowers the fitting loss or training stops.

use super::features::select_features;
use super::normalize::{Normalizer, NormalizerMethod};
use super::{WorkloadError, WorkloadStore};
use crate::model::{Tick, VmId};
use crate::resources::{ResourceDim, ResourceVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig<S> {
    /// Window length `k`: samples `t-k..t-1` predict sample `t`.
    pub lags: usize,
    pub learning_rate: S,
    pub epochs: usize,
    pub normalization: NormalizerMethod,
    /// Dimensions with variance below this are not modelled; they forecast
    /// as the last observation.
    pub variance_floor: S,
}

impl<S: Scalar> Default for PredictorConfig<S> {
    fn default() -> Self {
        Self {
            lags: 12,
            learning_rate: S::from_f64_lossy(0.01),
            epochs: 200,
            normalization: NormalizerMethod::MinMax,
            variance_floor: S::from_f64_lossy(1e-12),
        }
    }
}

/// One-step prediction for the window ending just before `t`:
/// `w[0] + sum_i w[i+1] * series[t-k+i]`.
fn predict_at<S: Scalar>(weights: &[S], series: &[S], lags: usize, t: usize) -> S {
    let mut y = weights[0];
    for (w, &x) in weights[1..].iter().zip(&series[t - lags..t]) {
        y = y + *w * x;
    }
    y
}

/// Mean squared one-step error of `weights` over the sliding windows of
/// `series`: for each `t in lags..len`, features `[1, series[t-lags..t]]`
/// predict target `series[t]`.
pub fn ar_loss<S: Scalar>(weights: &[S], series: &[S], lags: usize) -> S {
    if series.len() <= lags {
        return S::zero();
    }
    let n = S::from_usize(series.len() - lags).unwrap();
    let mut sum = S::zero();
    for t in lags..series.len() {
        let e = predict_at(weights, series, lags, t) - series[t];
        sum = sum + e * e;
    }
    sum / n
}

/// Analytic gradient of [`ar_loss`] with respect to the weights.
pub fn ar_gradient<S: Scalar>(weights: &[S], series: &[S], lags: usize) -> Vec<S> {
    let mut grad = vec![S::zero(); weights.len()];
    ar_gradient_into(weights, series, lags, &mut grad);
    grad
}

fn ar_gradient_into<S: Scalar>(weights: &[S], series: &[S], lags: usize, grad: &mut [S]) {
    grad.fill(S::zero());
    if series.len() <= lags {
        return;
    }
    let n = S::from_usize(series.len() - lags).unwrap();
    let two = S::from_f64_lossy(2.0);
    for t in lags..series.len() {
        let e = two * (predict_at(weights, series, lags, t) - series[t]);
        grad[0] = grad[0] + e;
        for (g, &x) in grad[1..].iter_mut().zip(&series[t - lags..t]) {
            *g = *g + e * x;
        }
    }
    for g in grad.iter_mut() {
        *g = *g / n;
    }
}

/// Batch gradient descent from `weights`, stopping early when a step would
/// raise the fitting loss or the improvement vanishes. Returns the final
/// fitting loss.
fn descend<S: Scalar>(
    weights: &mut [S],
    series: &[S],
    lags: usize,
    learning_rate: S,
    epochs: usize,
) -> S {
    let tol = S::from_f64_lossy(1e-15);
    let mut grad = vec![S::zero(); weights.len()];
    let mut backup = vec![S::zero(); weights.len()];
    let mut prev = ar_loss(weights, series, lags);
    for _ in 0..epochs {
        backup.copy_from_slice(weights);
        ar_gradient_into(weights, series, lags, &mut grad);
        for (w, &g) in weights.iter_mut().zip(&grad) {
            *w = *w - learning_rate * g;
        }
        let loss = ar_loss(weights, series, lags);
        if loss > prev {
            weights.copy_from_slice(&backup);
            break;
        }
        let improved = prev - loss;
        prev = loss;
        if improved < tol {
            break;
        }
    }
    prev
}

#[derive(Debug, Clone, PartialEq)]
struct DimModel<S> {
    normalizer: Normalizer<S>,
    /// `lags + 1` weights, bias first.
    weights: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
struct Trained<S> {
    dims: [Option<DimModel<S>>; 4],
    trained_at: Tick,
}

/// Trainable forecaster of one VM's resource usage.
#[derive(Debug, Clone, PartialEq)]
pub struct VmPredictor<S> {
    config: PredictorConfig<S>,
    trained: Option<Trained<S>>,
}

impl<S: Scalar> VmPredictor<S> {
    pub fn new(config: PredictorConfig<S>) -> Self {
        Self {
            config,
            trained: None,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained.is_some()
    }

    pub fn trained_at(&self) -> Option<Tick> {
        self.trained.as_ref().map(|t| t.trained_at)
    }

    pub fn weights(&self, dim: ResourceDim) -> Option<&[S]> {
        self.trained
            .as_ref()
            .and_then(|t| t.dims[dim.index()].as_ref())
            .map(|m| m.weights.as_slice())
    }

    /// (Re)fits the per-dimension models on the VM's stored history.
    ///
    /// Dimensions ranked out by feature selection are left unmodelled.
    /// Requires at least `lags + 2` samples.
    pub fn train(
        &mut self,
        store: &WorkloadStore<S>,
        vm: VmId,
        epochs: usize,
        now: Tick,
    ) -> Result<(), WorkloadError> {
        let k = self.config.lags;
        let have = store.count_for(vm);
        if have < k + 2 {
            return Err(WorkloadError::NotEnoughHistory {
                vm,
                have,
                need: k + 2,
            });
        }
        let selected = select_features(store, vm, self.config.variance_floor);
        let mut dims: [Option<DimModel<S>>; 4] = [None, None, None, None];
        for dim in selected {
            let raw = store.dim_series(vm, dim);
            let normalizer = Normalizer::fit_or_fallback(&raw, self.config.normalization)?;
            let series: Vec<S> = raw.iter().map(|&v| normalizer.apply(v)).collect();
            let mut weights = self
                .trained
                .as_ref()
                .and_then(|t| t.dims[dim.index()].as_ref())
                .map(|m| m.weights.clone())
                .unwrap_or_else(|| vec![S::zero(); k + 1]);
            descend(&mut weights, &series, k, self.config.learning_rate, epochs);
            dims[dim.index()] = Some(DimModel {
                normalizer,
                weights,
            });
        }
        self.trained = Some(Trained {
            dims,
            trained_at: now,
        });
        Ok(())
    }

    /// Fitting-set loss of one dimension's current model, if any.
    pub fn fitting_loss(&self, store: &WorkloadStore<S>, vm: VmId, dim: ResourceDim) -> Option<S> {
        let model = self.trained.as_ref()?.dims[dim.index()].as_ref()?;
        let raw = store.dim_series(vm, dim);
        if raw.len() <= self.config.lags {
            return None;
        }
        let series: Vec<S> = raw.iter().map(|&v| model.normalizer.apply(v)).collect();
        Some(ar_loss(&model.weights, &series, self.config.lags))
    }

    /// Iterated one-step forecast rolled `horizon` steps ahead, denormalized
    /// and clamped into `[0, capacity]`.
    ///
    /// Horizon zero, an untrained predictor, an unmodelled dimension or a
    /// too-short history all fall back to the last observed value.
    pub fn predict(
        &self,
        store: &WorkloadStore<S>,
        vm: VmId,
        horizon: Tick,
        capacity: ResourceVector<S>,
    ) -> ResourceVector<S> {
        let last = store.last_usage(vm).unwrap_or_else(ResourceVector::zero);
        let clamp = |rv: ResourceVector<S>| rv.clamp_components(ResourceVector::zero(), capacity);
        if horizon == 0 {
            return clamp(last);
        }
        let trained = match &self.trained {
            Some(t) => t,
            None => return clamp(last),
        };
        let k = self.config.lags;
        let mut out = last.as_array();
        for dim in ResourceDim::ALL {
            let model = match &trained.dims[dim.index()] {
                Some(m) => m,
                None => continue,
            };
            let mut window = store.dim_tail(vm, dim, k);
            if window.len() < k {
                continue;
            }
            for v in window.iter_mut() {
                *v = model.normalizer.apply(*v);
            }
            let mut latest = window[k - 1];
            for _ in 0..horizon {
                latest = predict_at(&model.weights, &window, k, k);
                window.remove(0);
                window.push(latest);
            }
            out[dim.index()] = model.normalizer.invert(latest);
        }
        clamp(ResourceVector::from_array(out))
    }
}
