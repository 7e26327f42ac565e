//! Two-stage Monte Carlo approximations at each unique chain point: the
//! approximate posterior score u_hat(theta), the approximate log-posterior
//! Hessian H_hat(theta), and the approximate score outer product
//! J_hat(theta), built from two independent auxiliary batches of size N.
//!
//! With g = grad log p(theta) + grad log h(x|theta) and auxiliary draws
//! y^(j) ~ f(.|theta) split into sets A and B of N draws each:
//!
//! ```text
//! u_hat   = g - (1/2N) sum_j grad log h(y^(j))
//! H_hat   = hess log p + hess log h(x|.)
//!           - (1/2N) sum_j hess log h(y^(j))
//!           - (1/2N) sum_j grad_k grad_l
//!           + (mean_A grad)_k (mean_B grad)_l
//! J_hat   = g_k g_l - g_k (mean_B grad)_l - g_l (mean_A grad)_k
//!           + (mean_A grad)_k (mean_B grad)_l
//! ```
//!
//! The split means make the product-of-expectations terms unbiased; H_hat
//! and J_hat are symmetrized as (M + M^T)/2 afterwards, which changes
//! nothing in expectation. Sums run through pairwise accumulators so the
//! 2N-term reductions keep full double precision.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{PairwiseVec, SquareMat};
use crate::model::{AuxConfig, Model, ParamVector, PointKey};
use crate::rng::{derive_seed, StreamDomain};
use crate::samplers::SampleChain;

/// Accumulated sums over one auxiliary set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSetSums {
    pub count: usize,
    pub seed: u64,
    pub grad_sum: Vec<f64>,
    pub hess_sum: SquareMat,
    pub outer_sum: SquareMat,
}

impl AuxSetSums {
    pub fn mean_grad(&self) -> Vec<f64> {
        self.grad_sum.iter().map(|v| v / self.count as f64).collect()
    }
}

/// Two independent auxiliary sets at a fixed theta, reduced to the sums the
/// estimators need.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxBatch {
    pub theta: ParamVector,
    pub n_per_set: usize,
    pub set_a: AuxSetSums,
    pub set_b: AuxSetSums,
}

fn accumulate_set<M: Model>(
    model: &M,
    data: &M::State,
    theta: &ParamVector,
    count: usize,
    seed: u64,
    cfg: &AuxConfig,
) -> Result<AuxSetSums> {
    let p = model.param_dim();
    let mut grad_acc = PairwiseVec::new(p);
    let mut hess_acc = PairwiseVec::new(p * (p + 1) / 2);
    let mut outer_acc = PairwiseVec::new(p * (p + 1) / 2);
    model.visit_aux_grads(data, theta, count, seed, cfg, &mut |g, h| {
        grad_acc.add(g);
        let mut idx = 0;
        for j in 0..p {
            for i in j..p {
                hess_acc.add_at(idx, h.get(i, j));
                outer_acc.add_at(idx, g[i] * g[j]);
                idx += 1;
            }
        }
    })?;
    let unpack = |acc: &PairwiseVec| {
        let tri = acc.totals();
        let mut m = SquareMat::zeros(p);
        let mut idx = 0;
        for j in 0..p {
            for i in j..p {
                m.set(i, j, tri[idx]);
                m.set(j, i, tri[idx]);
                idx += 1;
            }
        }
        m
    };
    Ok(AuxSetSums {
        count,
        seed,
        grad_sum: grad_acc.totals(),
        hess_sum: unpack(&hess_acc),
        outer_sum: unpack(&outer_acc),
    })
}

impl AuxBatch {
    /// Generate both auxiliary sets. The two seeds must differ; each set is
    /// an independent inner chain (or exact stream) under its own seed.
    pub fn generate<M: Model>(
        model: &M,
        data: &M::State,
        theta: &ParamVector,
        n_per_set: usize,
        seed_a: u64,
        seed_b: u64,
        cfg: &AuxConfig,
    ) -> Result<AuxBatch> {
        if n_per_set == 0 {
            return Err(Error::Empty("auxiliary batch needs N >= 1".into()));
        }
        if seed_a == seed_b {
            return Err(Error::AuxSeedsNotIndependent(seed_a));
        }
        let set_a = accumulate_set(model, data, theta, n_per_set, seed_a, cfg)?;
        let set_b = accumulate_set(model, data, theta, n_per_set, seed_b, cfg)?;
        Ok(AuxBatch {
            theta: theta.clone(),
            n_per_set,
            set_a,
            set_b,
        })
    }

    fn pooled_scale(&self) -> f64 {
        1.0 / (2.0 * self.n_per_set as f64)
    }
}

/// Pooled 2N-average of grad log h over both sets: the Monte Carlo
/// approximation of grad log c(theta).
pub fn approx_log_c_grad(batch: &AuxBatch) -> Vec<f64> {
    let s = batch.pooled_scale();
    batch
        .set_a
        .grad_sum
        .iter()
        .zip(&batch.set_b.grad_sum)
        .map(|(a, b)| (a + b) * s)
        .collect()
}

/// u_hat(theta) = grad log p + grad log h(x|theta) - approx grad log c.
pub fn approx_posterior_score<M: Model>(
    model: &M,
    data: &M::State,
    batch: &AuxBatch,
) -> Vec<f64> {
    let theta = &batch.theta;
    let gp = model.grad_log_prior(theta);
    let gx = model.grad_log_h(data, theta);
    let gc = approx_log_c_grad(batch);
    gp.iter()
        .zip(&gx)
        .zip(&gc)
        .map(|((p, x), c)| p + x - c)
        .collect()
}

/// Unbiased estimate of the log-posterior Hessian H(theta), symmetrized.
pub fn approx_h<M: Model>(model: &M, data: &M::State, batch: &AuxBatch) -> SquareMat {
    let theta = &batch.theta;
    let p = model.param_dim();
    let scale = batch.pooled_scale();
    let prior = model.hess_log_prior(theta);
    let datah = model.hess_log_h(data, theta);
    let mean_a = batch.set_a.mean_grad();
    let mean_b = batch.set_b.mean_grad();
    let mut out = SquareMat::zeros(p);
    for k in 0..p {
        for l in 0..p {
            let pooled_hess =
                (batch.set_a.hess_sum.get(k, l) + batch.set_b.hess_sum.get(k, l)) * scale;
            let pooled_outer =
                (batch.set_a.outer_sum.get(k, l) + batch.set_b.outer_sum.get(k, l)) * scale;
            out.set(
                k,
                l,
                prior.get(k, l) + datah.get(k, l) - pooled_hess - pooled_outer
                    + mean_a[k] * mean_b[l],
            );
        }
    }
    out.symmetrized()
}

/// Unbiased estimate of J(theta) = u(theta) u(theta)^T, symmetrized. The
/// cross terms carry minus signs because u = g - grad log c.
pub fn approx_j<M: Model>(model: &M, data: &M::State, batch: &AuxBatch) -> SquareMat {
    let theta = &batch.theta;
    let p = model.param_dim();
    let gp = model.grad_log_prior(theta);
    let gx = model.grad_log_h(data, theta);
    let g: Vec<f64> = gp.iter().zip(&gx).map(|(a, b)| a + b).collect();
    let mean_a = batch.set_a.mean_grad();
    let mean_b = batch.set_b.mean_grad();
    let mut out = SquareMat::zeros(p);
    for k in 0..p {
        for l in 0..p {
            out.set(
                k,
                l,
                g[k] * g[l] - g[k] * mean_b[l] - g[l] * mean_a[k] + mean_a[k] * mean_b[l],
            );
        }
    }
    out.symmetrized()
}

/// The triple (u_hat, H_hat, J_hat) at one chain point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimates {
    pub theta: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub h_hat: SquareMat,
    pub j_hat: SquareMat,
}

/// Evaluate all three estimators from one batch, with invariant checks.
pub fn point_estimates<M: Model>(
    model: &M,
    data: &M::State,
    batch: &AuxBatch,
) -> Result<PointEstimates> {
    let u_hat = approx_posterior_score(model, data, batch);
    let h_hat = approx_h(model, data, batch);
    let j_hat = approx_j(model, data, batch);
    if u_hat.iter().any(|v| !v.is_finite()) || !h_hat.is_finite() || !j_hat.is_finite() {
        return Err(Error::Degenerate(
            "non-finite point estimate (check the model derivatives)".into(),
        ));
    }
    Ok(PointEstimates {
        theta: batch.theta.values().to_vec(),
        u_hat,
        h_hat,
        j_hat,
    })
}

/// Estimates for the unique points of a chain, keyed by exact coordinates,
/// in first-occurrence order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateSet {
    pub estimates: Vec<PointEstimates>,
    pub aux_n: usize,
    pub seed: u64,
    #[serde(skip)]
    index: HashMap<PointKey, usize>,
}

impl EstimateSet {
    pub fn new(estimates: Vec<PointEstimates>, aux_n: usize, seed: u64) -> Self {
        let mut set = EstimateSet {
            estimates,
            aux_n,
            seed,
            index: HashMap::new(),
        };
        set.rebuild_index();
        set
    }

    /// Restore the key map (needed after deserialization).
    pub fn rebuild_index(&mut self) {
        self.index = self
            .estimates
            .iter()
            .enumerate()
            .map(|(i, e)| (key_of(&e.theta), i))
            .collect();
    }

    pub fn get(&self, point: &ParamVector) -> Option<&PointEstimates> {
        self.index.get(&point.key()).map(|&i| &self.estimates[i])
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

fn key_of(values: &[f64]) -> PointKey {
    ParamVector::unconstrained(values.to_vec())
        .expect("estimate theta is finite")
        .key()
}

/// Unique chain points in first-occurrence order, with their multiplicities.
pub fn unique_points(chain: &SampleChain) -> Vec<(&ParamVector, usize)> {
    let mut seen: HashMap<PointKey, usize> = HashMap::new();
    let mut uniques: Vec<(&ParamVector, usize)> = Vec::new();
    for point in chain.points() {
        match seen.get(&point.key()) {
            Some(&i) => uniques[i].1 += 1,
            None => {
                seen.insert(point.key(), uniques.len());
                uniques.push((point, 1));
            }
        }
    }
    uniques
}

/// Build estimates at every unique chain point.
///
/// Per-point seeds derive from (seed, set, unique index), so the result is
/// independent of the worker count; points fan out over the rayon pool
/// (bounded by `workers` when given) and merge back in order.
pub fn estimate_chain<M: Model>(
    model: &M,
    data: &M::State,
    chain: &SampleChain,
    aux_n: usize,
    seed: u64,
    cfg: &AuxConfig,
    workers: Option<usize>,
) -> Result<EstimateSet> {
    if chain.is_empty() {
        return Err(Error::Empty("estimate_chain needs a nonempty chain".into()));
    }
    let uniques = unique_points(chain);
    let run = || -> Vec<(usize, Result<PointEstimates>)> {
        uniques
            .par_iter()
            .enumerate()
            .map(|(idx, (point, _))| {
                let seed_a = derive_seed(seed, StreamDomain::AuxSetA, idx as u64);
                let seed_b = derive_seed(seed, StreamDomain::AuxSetB, idx as u64);
                let result = AuxBatch::generate(model, data, point, aux_n, seed_a, seed_b, cfg)
                    .and_then(|batch| point_estimates(model, data, &batch));
                (idx, result)
            })
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut estimates = Vec::with_capacity(results.len());
    let mut failures: Vec<(usize, String)> = Vec::new();
    for (idx, r) in results {
        match r {
            Ok(e) => estimates.push(e),
            Err(e) => failures.push((idx, e.to_string())),
        }
    }
    if let Some((first_index, first_error)) = failures.first().cloned() {
        return Err(Error::PerPointFailures {
            op: "estimate_chain",
            count: failures.len(),
            first_index,
            first_error,
        });
    }
    Ok(EstimateSet::new(estimates, aux_n, seed))
}
