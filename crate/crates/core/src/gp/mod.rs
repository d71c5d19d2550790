//! Gaussian-process travel-time models.
//!
//! Both backends implement [`TravelTimeModel`], so the planner does not care
//! whether an edge was fitted in batch or learned from a stream.

pub mod batch;
pub mod online;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeKey;
use crate::math::Gaussian;

/// Squared-exponential kernel hyperparameters with a Gaussian noise term.
///
/// Units: `signal_var` and `noise_var` in seconds², `length_scale` in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_var: f64,
    pub length_scale: f64,
    pub noise_var: f64,
}

impl KernelParams {
    pub fn new(signal_var: f64, length_scale: f64, noise_var: f64) -> Result<Self> {
        let p = KernelParams { signal_var, length_scale, noise_var };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.signal_var) && ok(self.length_scale) && ok(self.noise_var) {
            Ok(())
        } else {
            Err(Error::invalid(format!("kernel parameters must be positive and finite: {self:?}")))
        }
    }

    /// `σ² exp(-(x - x')² / 2l²)`
    pub fn kernel(&self, x: f64, xp: f64) -> f64 {
        let d = (x - xp) / self.length_scale;
        self.signal_var * (-0.5 * d * d).exp()
    }

    pub fn to_log(&self) -> [f64; 3] {
        [self.signal_var.ln(), self.length_scale.ln(), self.noise_var.ln()]
    }

    pub fn from_log(v: [f64; 3]) -> Self {
        KernelParams { signal_var: v[0].exp(), length_scale: v[1].exp(), noise_var: v[2].exp() }
    }

    /// Prior predictive variance at any input.
    pub fn prior_variance(&self) -> f64 {
        self.signal_var + self.noise_var
    }
}

pub fn kernel_eval(p: &KernelParams, x: f64, xp: f64) -> f64 {
    p.kernel(x, xp)
}

/// Predictive travel-time law of one edge as a function of time of day.
pub trait TravelTimeModel {
    /// Gaussian travel time in seconds for a departure at `hour` in `[0, 24)`.
    fn predict(&self, hour: f64) -> Gaussian;
}

impl<T: TravelTimeModel + ?Sized> TravelTimeModel for &T {
    fn predict(&self, hour: f64) -> Gaussian {
        (**self).predict(hour)
    }
}

impl<T: TravelTimeModel + ?Sized> TravelTimeModel for Box<T> {
    fn predict(&self, hour: f64) -> Gaussian {
        (**self).predict(hour)
    }
}

/// A time-invariant law, handy for hand-built scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedLaw(pub Gaussian);

impl TravelTimeModel for FixedLaw {
    fn predict(&self, _hour: f64) -> Gaussian {
        self.0
    }
}

/// One law per hourly bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyLaw(pub [Gaussian; 24]);

impl TravelTimeModel for HourlyLaw {
    fn predict(&self, hour: f64) -> Gaussian {
        self.0[crate::time::hour_bin(hour)]
    }
}

/// Lookup of per-edge models.
pub trait ModelSource {
    fn model(&self, edge: EdgeKey) -> Option<&dyn TravelTimeModel>;
}

impl<M: TravelTimeModel> ModelSource for BTreeMap<EdgeKey, M> {
    fn model(&self, edge: EdgeKey) -> Option<&dyn TravelTimeModel> {
        self.get(&edge).map(|m| m as &dyn TravelTimeModel)
    }
}
