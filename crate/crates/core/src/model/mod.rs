//! Model abstraction: unnormalized density `h(x|theta)`, its theta
//! derivatives, prior derivatives, and auxiliary sampling hooks.
//!
//! A model here is the pair (likelihood kernel, prior): the likelihood is
//! `h(x|theta) / c(theta)` with `c` typically intractable, and the prior
//! density is known. Diagnostics only ever touch the model through this
//! trait, so the three shipped models (univariate Gaussian, Ising,
//! two-statistic ERGM) and any user model are interchangeable.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMat;

mod ergm;
mod gaussian;
mod ising;

pub use ergm::{ergm_statistics, ErgmModel, GraphState};
pub use gaussian::{
    gaussian_grad_log_h, gaussian_hess_log_h, gaussian_log_h, GaussianModel, GaussianPrior,
};
pub use ising::{ising_statistic, IsingModel, IsingState};

/// One coordinate's support interval; infinite endpoints allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::InvalidParam(format!(
                "interval ({lo}, {hi}) is empty or invalid"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// Strict interior membership; boundary values are outside.
    #[inline]
    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn has_finite_bound(&self) -> bool {
        self.lo.is_finite() || self.hi.is_finite()
    }
}

/// Per-coordinate support of the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support(Vec<Interval>);

impl Support {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidParam("support must have dimension >= 1".into()));
        }
        Ok(Support(intervals))
    }

    pub fn unbounded(dim: usize) -> Self {
        Support(vec![Interval::REAL; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn contains_interior(&self, values: &[f64]) -> bool {
        values.len() == self.0.len()
            && values
                .iter()
                .zip(&self.0)
                .all(|(&v, iv)| iv.contains_interior(v))
    }

    pub fn has_finite_bound(&self) -> bool {
        self.0.iter().any(|iv| iv.has_finite_bound())
    }
}

/// A point theta in p-dimensional parameter space, validated to lie strictly
/// inside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    support: Support,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, support: Support) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParam("parameter dimension must be >= 1".into()));
        }
        if values.len() != support.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} values vs {}-dimensional support",
                values.len(),
                support.dim()
            )));
        }
        for (coord, (&v, iv)) in values.iter().zip(support.intervals()).enumerate() {
            if !v.is_finite() || !iv.contains_interior(v) {
                return Err(Error::OutsideSupport {
                    coord,
                    value: v,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(ParamVector { values, support })
    }

    /// Convenience constructor for fully unconstrained parameters.
    pub fn unconstrained(values: Vec<f64>) -> Result<Self> {
        let support = Support::unbounded(values.len());
        Self::new(values, support)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Replace the coordinates, keeping the support. Fails if the new values
    /// violate it.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.support.clone())
    }

    /// Exact-coordinate identity key (bit pattern of each f64), used to
    /// deduplicate chain points.
    pub fn key(&self) -> PointKey {
        PointKey(self.values.iter().map(|v| v.to_bits()).collect())
    }
}

/// Bitwise identity of a parameter point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey(Vec<u64>);

/// Inner-sampler settings for auxiliary draws produced by MCMC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxConfig {
    /// Sweeps discarded before collecting draws.
    pub burn_in: usize,
    /// Keep every `thin`-th sweep after burn-in.
    pub thin: usize,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig {
            burn_in: 500,
            thin: 1,
        }
    }
}

/// A probability model with unnormalized density `h(x|theta)`, prior
/// `p(theta)`, and sampling hooks for the model distribution
/// `f(x|theta) = h(x|theta)/c(theta)`.
///
/// All methods must be pure functions of their arguments; samplers take
/// explicit seeds so that concurrent use is reproducible.
pub trait Model: Sync {
    type State: Clone + Send + Sync;

    fn name(&self) -> &'static str;
    fn param_dim(&self) -> usize;
    fn support(&self) -> Support;

    /// True when log h(x|theta) = theta' S(x): the gradient is the
    /// sufficient statistic (theta-free) and the Hessian vanishes.
    fn is_exponential_family(&self) -> bool;

    fn log_h(&self, data: &Self::State, theta: &ParamVector) -> f64;
    fn grad_log_h(&self, data: &Self::State, theta: &ParamVector) -> Vec<f64>;
    fn hess_log_h(&self, data: &Self::State, theta: &ParamVector) -> SquareMat;

    /// Log prior density, up to an additive constant; `-inf` outside the
    /// support.
    fn log_prior(&self, theta: &ParamVector) -> f64;
    fn grad_log_prior(&self, theta: &ParamVector) -> Vec<f64>;
    fn hess_log_prior(&self, theta: &ParamVector) -> SquareMat;

    /// Stream `count` auxiliary draws from f(.|theta).
    ///
    /// MCMC-backed models run an inner chain started at `data`, discard
    /// `cfg.burn_in` sweeps, and then emit every `cfg.thin`-th sweep; models
    /// with exact samplers may ignore `data` and `cfg`.
    fn visit_aux_states(
        &self,
        data: &Self::State,
        theta: &ParamVector,
        count: usize,
        seed: u64,
        cfg: &AuxConfig,
        visit: &mut dyn FnMut(&Self::State),
    ) -> Result<()>;

    /// Stream (grad log h, hess log h) evaluated at `count` auxiliary draws.
    ///
    /// The default routes through `visit_aux_states`; models with a cheap
    /// sufficient-statistic representation may override it.
    fn visit_aux_grads(
        &self,
        data: &Self::State,
        theta: &ParamVector,
        count: usize,
        seed: u64,
        cfg: &AuxConfig,
        visit: &mut dyn FnMut(&[f64], &SquareMat),
    ) -> Result<()> {
        self.visit_aux_states(data, theta, count, seed, cfg, &mut |y| {
            let g = self.grad_log_h(y, theta);
            let h = self.hess_log_h(y, theta);
            visit(&g, &h);
        })
    }

    /// Draw exactly from f(.|theta), when the model supports it (perfect
    /// sampling, enumeration, or direct simulation).
    fn sample_exact(&self, theta: &ParamVector, rng: &mut ChaCha8Rng) -> Result<Self::State>;
}
