//! Chain generation: Gibbs samplers for Ising/ERGM states and the Gaussian
//! posterior, perfect sampling via coupling from the past, random-walk
//! Metropolis-Hastings, the exchange algorithm, and double
//! Metropolis-Hastings.
//!
//! Each chain is generated single-threaded (Markov dependence); concurrent
//! chains must use distinct seeds, with streams derived by the splitting
//! rule in [`crate::rng`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::model::ParamVector;

mod ergm;
mod gaussian_gibbs;
mod ising;
mod mh;

pub use ergm::ergm_gibbs_cycle;
pub use gaussian_gibbs::gaussian_posterior_gibbs;
pub use ising::{
    ising_cftp, ising_cftp_schedule, ising_cftp_with_cap, ising_gibbs_sweep,
    CFTP_DEFAULT_MAX_SWEEPS,
};
pub use mh::{dmh_step, exchange_step, run_dmh, run_exchange, run_rwmh, ExactSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    GibbsPosterior,
    Mh,
    Exchange,
    Dmh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Number of retained iterations n.
    pub iterations: usize,
    /// Inner-sampler sweeps m per proposal (DMH only).
    #[serde(default = "default_inner_updates")]
    pub inner_updates: usize,
    /// Per-coordinate random-walk standard deviations.
    #[serde(default)]
    pub proposal_scale: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default)]
    pub burn_in: usize,
}

fn default_inner_updates() -> usize {
    1
}

fn default_thinning() -> usize {
    1
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if matches!(self.kind, SamplerKind::Dmh) && self.inner_updates == 0 {
            return Err(Error::Config("DMH needs inner_updates >= 1".into()));
        }
        if matches!(
            self.kind,
            SamplerKind::Mh | SamplerKind::Exchange | SamplerKind::Dmh
        ) {
            if self.proposal_scale.is_empty() {
                return Err(Error::Config("proposal_scale must be provided".into()));
            }
            if self.proposal_scale.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::Config(
                    "proposal_scale must be positive elementwise".into(),
                ));
            }
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be >= 1".into()));
        }
        Ok(())
    }
}

/// Provenance carried along with a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub model: String,
    pub sampler: SamplerConfig,
    /// Fraction of accepted proposals, when the sampler has an accept step.
    pub accept_rate: Option<f64>,
    pub wall_clock_sec: f64,
}

/// An ordered sequence of parameter draws with normalized weights.
#[derive(Debug, Clone)]
pub struct SampleChain {
    points: Vec<ParamVector>,
    weights: Vec<f64>,
    pub meta: ChainMeta,
}

impl SampleChain {
    /// Equal weights 1/n.
    pub fn uniform(points: Vec<ParamVector>, meta: ChainMeta) -> Result<Self> {
        let n = points.len();
        Self::weighted(points, vec![1.0 / n as f64; n], meta)
    }

    pub fn weighted(points: Vec<ParamVector>, weights: Vec<f64>, meta: ChainMeta) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("chain must contain at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points vs {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch(
                "all chain points must share a dimension".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParam("weights must be nonnegative".into()));
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        Ok(SampleChain {
            points,
            weights,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[ParamVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values of one coordinate along the chain.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.values()[j]).collect()
    }

    /// Restrict to the first `n` points, renormalizing weights.
    pub fn prefix(&self, n: usize) -> Result<SampleChain> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidParam(format!(
                "prefix length {n} out of range 1..={}",
                self.len()
            )));
        }
        let points = self.points[..n].to_vec();
        let mut weights = self.weights[..n].to_vec();
        let total = pairwise_sum(&weights);
        for w in weights.iter_mut() {
            *w /= total;
        }
        SampleChain::weighted(points, weights, self.meta.clone())
    }

    /// Write `iter,theta_0,...` rows. Floats print in shortest round-trip
    /// form, so identical chains serialize to identical bytes.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let p = self.dim();
        let header: Vec<String> = std::iter::once("iter".to_string())
            .chain((0..p).map(|j| format!("theta_{j}")))
            .collect();
        let werr = |e| Error::io("writing chain csv", e);
        writeln!(w, "{}", header.join(",")).map_err(werr)?;
        for (i, pt) in self.points.iter().enumerate() {
            let mut row = i.to_string();
            for v in pt.values() {
                row.push(',');
                row.push_str(&format!("{v}"));
            }
            writeln!(w, "{row}").map_err(werr)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Support;

    fn meta() -> ChainMeta {
        ChainMeta {
            model: "test".into(),
            sampler: SamplerConfig {
                kind: SamplerKind::Mh,
                iterations: 1,
                inner_updates: 1,
                proposal_scale: vec![1.0],
                seed: 0,
                thinning: 1,
                burn_in: 0,
            },
            accept_rate: None,
            wall_clock_sec: 0.0,
        }
    }

    fn pt(v: f64) -> ParamVector {
        ParamVector::new(vec![v], Support::unbounded(1)).unwrap()
    }

    #[test]
    fn uniform_weights_sum_to_one() {
        let chain = SampleChain::uniform((0..9999).map(|i| pt(i as f64)).collect(), meta()).unwrap();
        let total: f64 = chain.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_weights_rejected() {
        let pts = vec![pt(0.0), pt(1.0)];
        assert!(SampleChain::weighted(pts.clone(), vec![0.5, 0.6], meta()).is_err());
        assert!(SampleChain::weighted(pts.clone(), vec![-0.5, 1.5], meta()).is_err());
        assert!(SampleChain::weighted(pts, vec![1.0], meta()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig {
            kind: SamplerKind::Dmh,
            iterations: 10,
            inner_updates: 0,
            proposal_scale: vec![0.1],
            seed: 1,
            thinning: 1,
            burn_in: 0,
        };
        assert!(cfg.validate().is_err());
        cfg.inner_updates = 5;
        assert!(cfg.validate().is_ok());
        cfg.proposal_scale = vec![0.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn prefix_renormalizes() {
        let chain = SampleChain::uniform(vec![pt(0.0), pt(1.0), pt(2.0), pt(3.0)], meta()).unwrap();
        let pre = chain.prefix(2).unwrap();
        assert_eq!(pre.len(), 2);
        assert!((pre.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
