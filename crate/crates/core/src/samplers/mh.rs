//! Auxiliary-variable Metropolis-Hastings for doubly intractable posteriors:
//! the exchange algorithm (exact auxiliary draws) and double
//! Metropolis-Hastings (inner-sampler auxiliary draws), plus a plain
//! random-walk MH for tractable log targets.
//!
//! Both exchange and DMH accept a proposal theta' with probability
//!
//! ```text
//! min{1, [p(theta') h(x|theta') h(y|theta)] / [p(theta) h(x|theta) h(y|theta')]}
//! ```
//!
//! where y is an auxiliary dataset drawn (exactly, or approximately by m
//! inner sweeps started from the data) from f(.|theta'). The intractable
//! normalizing functions cancel.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{AuxConfig, Model, ParamVector, Support};
use crate::rng::{stream_rng, StreamDomain};
use crate::samplers::{ChainMeta, SampleChain, SamplerConfig, SamplerKind};

/// Exact sampler hook used by the exchange algorithm.
pub type ExactSampler<'a, S> = dyn FnMut(&ParamVector, &mut ChaCha8Rng) -> Result<S> + 'a;

/// Symmetric Gaussian random-walk proposal; `None` when the proposal falls
/// outside the support (such proposals are rejected outright).
fn propose(
    current: &ParamVector,
    scale: &[f64],
    rng: &mut ChaCha8Rng,
) -> Option<ParamVector> {
    let values: Vec<f64> = current
        .values()
        .iter()
        .zip(scale)
        .map(|(&v, &s)| v + s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    current.with_values(values).ok()
}

fn accept_log_ratio<M: Model>(
    model: &M,
    data: &M::State,
    aux: &M::State,
    current: &ParamVector,
    proposal: &ParamVector,
) -> f64 {
    model.log_prior(proposal) + model.log_h(data, proposal) + model.log_h(aux, current)
        - model.log_prior(current)
        - model.log_h(data, current)
        - model.log_h(aux, proposal)
}

/// One DMH transition. The auxiliary dataset is produced by `m_inner` full
/// inner-sampler sweeps under the proposal, started from the observed data.
/// Returns the next state and whether the proposal was accepted.
pub fn dmh_step<M: Model>(
    current: &ParamVector,
    data: &M::State,
    model: &M,
    m_inner: usize,
    proposal_scale: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(ParamVector, bool)> {
    let proposal = match propose(current, proposal_scale, rng) {
        Some(p) => p,
        None => return Ok((current.clone(), false)),
    };
    let inner_seed: u64 = rng.gen();
    let mut aux: Option<M::State> = None;
    let inner_cfg = AuxConfig {
        burn_in: 0,
        thin: m_inner,
    };
    model.visit_aux_states(data, &proposal, 1, inner_seed, &inner_cfg, &mut |y| {
        aux = Some(y.clone());
    })?;
    let aux = aux.ok_or_else(|| Error::Empty("inner sampler produced no draw".into()))?;
    let log_r = accept_log_ratio(model, data, &aux, current, &proposal);
    let accept = rng.gen::<f64>().ln() < log_r;
    Ok(if accept {
        (proposal, true)
    } else {
        (current.clone(), false)
    })
}

/// One exchange transition: identical acceptance ratio to `dmh_step` but the
/// auxiliary dataset is an exact draw from f(.|theta').
pub fn exchange_step<M: Model>(
    current: &ParamVector,
    data: &M::State,
    model: &M,
    exact_sampler: &mut ExactSampler<'_, M::State>,
    proposal_scale: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(ParamVector, bool)> {
    let proposal = match propose(current, proposal_scale, rng) {
        Some(p) => p,
        None => return Ok((current.clone(), false)),
    };
    let aux = exact_sampler(&proposal, rng)?;
    let log_r = accept_log_ratio(model, data, &aux, current, &proposal);
    let accept = rng.gen::<f64>().ln() < log_r;
    Ok(if accept {
        (proposal, true)
    } else {
        (current.clone(), false)
    })
}

fn run_mh_loop<M: Model>(
    model: &M,
    data: &M::State,
    init: &ParamVector,
    cfg: &SamplerConfig,
    mut step: impl FnMut(&ParamVector, &mut ChaCha8Rng) -> Result<(ParamVector, bool)>,
) -> Result<SampleChain> {
    cfg.validate()?;
    if cfg.proposal_scale.len() != model.param_dim() {
        return Err(Error::DimensionMismatch(format!(
            "proposal_scale has {} entries for a {}-dimensional model",
            cfg.proposal_scale.len(),
            model.param_dim()
        )));
    }
    let start = Instant::now();
    let mut rng = stream_rng(cfg.seed, StreamDomain::Chain, 0);
    let mut current = init.clone();
    let mut points = Vec::with_capacity(cfg.iterations);
    let mut accepted = 0usize;
    let mut proposals = 0usize;
    for _ in 0..cfg.burn_in {
        let (next, acc) = step(&current, &mut rng)?;
        current = next;
        proposals += 1;
        accepted += acc as usize;
    }
    while points.len() < cfg.iterations {
        for _ in 0..cfg.thinning {
            let (next, acc) = step(&current, &mut rng)?;
            current = next;
            proposals += 1;
            accepted += acc as usize;
        }
        points.push(current.clone());
    }
    let meta = ChainMeta {
        model: model.name().to_string(),
        sampler: cfg.clone(),
        accept_rate: Some(accepted as f64 / proposals as f64),
        wall_clock_sec: start.elapsed().as_secs_f64(),
    };
    SampleChain::uniform(points, meta)
}

/// DMH chain with `cfg.inner_updates` sweeps per auxiliary draw.
pub fn run_dmh<M: Model>(
    model: &M,
    data: &M::State,
    init: &ParamVector,
    cfg: &SamplerConfig,
) -> Result<SampleChain> {
    let m = cfg.inner_updates;
    run_mh_loop(model, data, init, cfg, |cur, rng| {
        dmh_step(cur, data, model, m, &cfg.proposal_scale, rng)
    })
}

/// Exchange chain using the model's exact sampler.
pub fn run_exchange<M: Model>(
    model: &M,
    data: &M::State,
    init: &ParamVector,
    cfg: &SamplerConfig,
) -> Result<SampleChain> {
    run_mh_loop(model, data, init, cfg, |cur, rng| {
        exchange_step(
            cur,
            data,
            model,
            &mut |theta, r| model.sample_exact(theta, r),
            &cfg.proposal_scale,
            rng,
        )
    })
}

/// Random-walk Metropolis for a tractable (fully normalizable) log target.
pub fn run_rwmh(
    log_target: impl Fn(&[f64]) -> f64,
    support: &Support,
    init: &ParamVector,
    cfg: &SamplerConfig,
    model_name: &str,
) -> Result<SampleChain> {
    cfg.validate()?;
    if cfg.proposal_scale.len() != support.dim() {
        return Err(Error::DimensionMismatch(
            "proposal_scale dimension mismatch".into(),
        ));
    }
    let start = Instant::now();
    let mut rng = stream_rng(cfg.seed, StreamDomain::Chain, 0);
    let mut current = init.clone();
    let mut current_lp = log_target(current.values());
    let mut points = Vec::with_capacity(cfg.iterations);
    let mut accepted = 0usize;
    let mut proposals = 0usize;
    let total = cfg.burn_in + cfg.iterations * cfg.thinning;
    for it in 0..total {
        proposals += 1;
        if let Some(prop) = propose(&current, &cfg.proposal_scale, &mut rng) {
            let lp = log_target(prop.values());
            if rng.gen::<f64>().ln() < lp - current_lp {
                current = prop;
                current_lp = lp;
                accepted += 1;
            }
        }
        if it >= cfg.burn_in && (it + 1 - cfg.burn_in) % cfg.thinning == 0 {
            points.push(current.clone());
        }
    }
    let meta = ChainMeta {
        model: model_name.to_string(),
        sampler: cfg.clone(),
        accept_rate: Some(accepted as f64 / proposals as f64),
        wall_clock_sec: start.elapsed().as_secs_f64(),
    };
    SampleChain::uniform(points, meta)
}
