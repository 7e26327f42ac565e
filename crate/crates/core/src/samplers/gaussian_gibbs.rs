//! Conjugate two-block Gibbs sampler for the univariate Gaussian posterior.
//!
//! Full conditionals under mu ~ N(mu0, tau0^2), sigma^2 ~ IG(a, b):
//!
//! ```text
//! mu      | sigma^2, x ~ N(v (sum x / sigma^2 + mu0 / tau0^2), v),
//!                          v = 1 / (n / sigma^2 + 1 / tau0^2)
//! sigma^2 | mu, x      ~ IG(a + n/2, b + sum (x_i - mu)^2 / 2)
//! ```

use std::time::Instant;

use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::model::{GaussianModel, GaussianPrior, Model, ParamVector};
use crate::rng::{stream_rng, StreamDomain};
use crate::samplers::{ChainMeta, SampleChain, SamplerConfig, SamplerKind};
use crate::stats;

/// Draw `iterations` points from the Gaussian posterior. The chain starts at
/// (sample mean, sample variance); each iteration updates mu then sigma^2.
pub fn gaussian_posterior_gibbs(
    data: &[f64],
    prior: &GaussianPrior,
    iterations: usize,
    seed: u64,
) -> Result<SampleChain> {
    if data.is_empty() {
        return Err(Error::Empty("gaussian gibbs needs data".into()));
    }
    if iterations == 0 {
        return Err(Error::Config("iterations must be >= 1".into()));
    }
    let start = Instant::now();
    let n = data.len() as f64;
    let sum: f64 = data.iter().sum();
    let model = GaussianModel::new(data.len(), *prior);
    let support = model.support();

    let mut rng = stream_rng(seed, StreamDomain::Chain, 0);
    let mut mu = sum / n;
    let mut sigma_sq = if data.len() > 1 {
        stats::variance(data).max(1e-12)
    } else {
        1.0
    };

    let mut points = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // mu | sigma^2, x
        let v = 1.0 / (n / sigma_sq + 1.0 / prior.tau0_sq);
        let m = v * (sum / sigma_sq + prior.mu0 / prior.tau0_sq);
        mu = Normal::new(m, v.sqrt())
            .map_err(|e| Error::InvalidParam(e.to_string()))?
            .sample(&mut rng);

        // sigma^2 | mu, x
        let ss: f64 = data.iter().map(|x| (x - mu) * (x - mu)).sum();
        let shape = prior.ig_shape + n / 2.0;
        let rate = prior.ig_rate + ss / 2.0;
        let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidParam(e.to_string()))?;
        sigma_sq = 1.0 / gamma.sample(&mut rng);

        points.push(ParamVector::new(vec![mu, sigma_sq], support.clone())?);
    }

    let meta = ChainMeta {
        model: "gaussian".to_string(),
        sampler: SamplerConfig {
            kind: SamplerKind::GibbsPosterior,
            iterations,
            inner_updates: 1,
            proposal_scale: vec![],
            seed,
            thinning: 1,
            burn_in: 0,
        },
        accept_rate: None,
        wall_clock_sec: start.elapsed().as_secs_f64(),
    };
    SampleChain::uniform(points, meta)
}
