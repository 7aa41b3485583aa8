//! Four-dimensional resource quantities and their arithmetic.
//!
//! A [`ResourceVector`] is the unit of all capacity, demand and usage
//! accounting: CPU (abstract compute units), memory (MiB), disk (GiB) and
//! bandwidth (Mbps). Components are real-valued, finite and non-negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// The four resource dimensions, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceDim {
    Cpu,
    Memory,
    Disk,
    Bandwidth,
}

impl ResourceDim {
    pub const ALL: [ResourceDim; 4] = [
        ResourceDim::Cpu,
        ResourceDim::Memory,
        ResourceDim::Disk,
        ResourceDim::Bandwidth,
    ];

    pub fn index(self) -> usize {
        match self {
            ResourceDim::Cpu => 0,
            ResourceDim::Memory => 1,
            ResourceDim::Disk => 2,
            ResourceDim::Bandwidth => 3,
        }
    }
}

impl std::fmt::Display for ResourceDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ResourceDim::Cpu => "cpu",
            ResourceDim::Memory => "memory",
            ResourceDim::Disk => "disk",
            ResourceDim::Bandwidth => "bandwidth",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResourceError {
    #[error("non-finite {0} component")]
    NonFinite(ResourceDim),
    #[error("negative {0} component")]
    Negative(ResourceDim),
    #[error("arithmetic overflow in {0} component")]
    Overflow(ResourceDim),
    #[error("zero {0} capacity on an active server")]
    ZeroCapacity(ResourceDim),
}

/// Quantity of the four managed resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector<S> {
    pub cpu: S,
    pub memory: S,
    pub disk: S,
    pub bandwidth: S,
}

impl<S: Scalar> ResourceVector<S> {
    /// Builds a vector, rejecting non-finite or negative components.
    pub fn new(cpu: S, memory: S, disk: S, bandwidth: S) -> Result<Self, ResourceError> {
        let rv = Self {
            cpu,
            memory,
            disk,
            bandwidth,
        };
        rv.validate()?;
        Ok(rv)
    }

    pub fn zero() -> Self {
        Self {
            cpu: S::zero(),
            memory: S::zero(),
            disk: S::zero(),
            bandwidth: S::zero(),
        }
    }

    /// Same value in every component.
    pub fn splat(v: S) -> Self {
        Self {
            cpu: v,
            memory: v,
            disk: v,
            bandwidth: v,
        }
    }

    pub fn from_array(a: [S; 4]) -> Self {
        Self {
            cpu: a[0],
            memory: a[1],
            disk: a[2],
            bandwidth: a[3],
        }
    }

    pub fn as_array(self) -> [S; 4] {
        [self.cpu, self.memory, self.disk, self.bandwidth]
    }

    pub fn get(self, dim: ResourceDim) -> S {
        self.as_array()[dim.index()]
    }

    pub fn validate(&self) -> Result<(), ResourceError> {
        for (dim, v) in ResourceDim::ALL.iter().zip(self.as_array()) {
            if !v.is_finite() {
                return Err(ResourceError::NonFinite(*dim));
            }
            if v < S::zero() {
                return Err(ResourceError::Negative(*dim));
            }
        }
        Ok(())
    }

    fn zip_with(self, other: Self, f: impl Fn(S, S) -> S) -> Self {
        Self {
            cpu: f(self.cpu, other.cpu),
            memory: f(self.memory, other.memory),
            disk: f(self.disk, other.disk),
            bandwidth: f(self.bandwidth, other.bandwidth),
        }
    }

    pub fn map(self, f: impl Fn(S) -> S) -> Self {
        Self {
            cpu: f(self.cpu),
            memory: f(self.memory),
            disk: f(self.disk),
            bandwidth: f(self.bandwidth),
        }
    }

    /// Component-wise sum; a component overflowing to infinity is an error.
    pub fn checked_add(self, other: Self) -> Result<Self, ResourceError> {
        let sum = self.zip_with(other, |a, b| a + b);
        for (dim, v) in ResourceDim::ALL.iter().zip(sum.as_array()) {
            if !v.is_finite() {
                return Err(ResourceError::Overflow(*dim));
            }
        }
        Ok(sum)
    }

    /// Component-wise difference clamped at zero.
    pub fn saturating_sub(self, other: Self) -> Self {
        self.zip_with(other, |a, b| (a - b).max(S::zero()))
    }

    /// True iff `self` fits within `capacity` in every component.
    pub fn fits_within(self, capacity: Self) -> bool {
        self.cpu <= capacity.cpu
            && self.memory <= capacity.memory
            && self.disk <= capacity.disk
            && self.bandwidth <= capacity.bandwidth
    }

    pub fn scale(self, factor: S) -> Self {
        self.map(|v| v * factor)
    }

    /// Per-component `self / denom`; a zero denominator component is an error.
    pub fn ratio(self, denom: Self) -> Result<Self, ResourceError> {
        for (dim, v) in ResourceDim::ALL.iter().zip(denom.as_array()) {
            if v <= S::zero() {
                return Err(ResourceError::ZeroCapacity(*dim));
            }
        }
        Ok(self.zip_with(denom, |a, b| a / b))
    }

    pub fn clamp_components(self, lo: Self, hi: Self) -> Self {
        self.zip_with(lo, |a, l| a.max(l))
            .zip_with(hi, |a, h| a.min(h))
    }

    /// Component-wise maximum.
    pub fn component_max(self, other: Self) -> Self {
        self.zip_with(other, |a, b| a.max(b))
    }

    pub fn max_component(self) -> S {
        self.cpu.max(self.memory).max(self.disk).max(self.bandwidth)
    }

    pub fn mean_component(self) -> S {
        let four = S::from_f64_lossy(4.0);
        (self.cpu + self.memory + self.disk + self.bandwidth) / four
    }

    pub fn is_zero(self) -> bool {
        self == Self::zero()
    }

    /// Component-wise sum of an iterator (plain, unchecked).
    pub fn sum(iter: impl Iterator<Item = Self>) -> Self {
        iter.fold(Self::zero(), |acc, v| acc + v)
    }
}

impl<S: Scalar> std::ops::Add for ResourceVector<S> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<S: Scalar> std::ops::AddAssign for ResourceVector<S> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Scalar> Default for ResourceVector<S> {
    fn default() -> Self {
        Self::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(c: f64, m: f64, d: f64, b: f64) -> ResourceVector<f64> {
        ResourceVector::new(c, m, d, b).unwrap()
    }

    #[test]
    fn add_identity() {
        assert_eq!(
            rv(1.0, 2.0, 3.0, 4.0)
                .checked_add(rv(0.0, 0.0, 0.0, 0.0))
                .unwrap(),
            rv(1.0, 2.0, 3.0, 4.0)
        );
    }

    #[test]
    fn add_component_wise() {
        assert_eq!(
            rv(1.0, 1.0, 1.0, 1.0)
                .checked_add(rv(2.0, 2.0, 2.0, 2.0))
                .unwrap(),
            rv(3.0, 3.0, 3.0, 3.0)
        );
    }

    #[test]
    fn add_doubles_fractional_units() {
        assert_eq!(
            rv(0.5, 100.0, 10.0, 50.0)
                .checked_add(rv(0.5, 100.0, 10.0, 50.0))
                .unwrap(),
            rv(1.0, 200.0, 20.0, 100.0)
        );
    }

    #[test]
    fn add_overflow_is_error() {
        let huge = rv(f64::MAX, 1.0, 1.0, 1.0);
        assert_eq!(
            huge.checked_add(huge),
            Err(ResourceError::Overflow(ResourceDim::Cpu))
        );
    }

    #[test]
    fn fits_at_equality_boundary() {
        assert!(rv(1.0, 1.0, 1.0, 1.0).fits_within(rv(1.0, 1.0, 1.0, 1.0)));
    }

    #[test]
    fn fits_rejects_single_component_violation() {
        assert!(!rv(2.0, 1.0, 1.0, 1.0).fits_within(rv(1.0, 9.0, 9.0, 9.0)));
    }

    #[test]
    fn zero_demand_fits_anything() {
        assert!(ResourceVector::<f64>::zero().fits_within(rv(0.0, 0.0, 0.0, 0.0)));
        assert!(ResourceVector::<f64>::zero().fits_within(rv(5.0, 1.0, 2.0, 3.0)));
    }

    #[test]
    fn construction_rejects_negative_and_non_finite() {
        assert_eq!(
            ResourceVector::new(-1.0, 0.0, 0.0, 0.0),
            Err(ResourceError::Negative(ResourceDim::Cpu))
        );
        assert_eq!(
            ResourceVector::new(0.0, f64::NAN, 0.0, 0.0),
            Err(ResourceError::NonFinite(ResourceDim::Memory))
        );
    }

    #[test]
    fn ratio_rejects_zero_denominator() {
        assert_eq!(
            rv(1.0, 1.0, 1.0, 1.0).ratio(rv(1.0, 0.0, 1.0, 1.0)),
            Err(ResourceError::ZeroCapacity(ResourceDim::Memory))
        );
    }

    #[test]
    fn works_in_f32() {
        let a = ResourceVector::<f32>::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let b = a.checked_add(a).unwrap();
        assert_eq!(b.as_array(), [2.0f32, 4.0, 6.0, 8.0]);
    }
}
