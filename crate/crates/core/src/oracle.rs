//! Brute-force ground truth at desk scale: exact normalizing functions by
//! enumeration, exact score/Hessian of log c, exact grid posteriors, and
//! exact curvature inputs for tractable models.
//!
//! Log-domain accumulation is used throughout so enumeration stays stable
//! for larger theta.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMat;
use crate::model::{
    ergm_statistics, ising_statistic_i64, GaussianModel, GraphState, Interval, IsingState, Model,
    ParamVector,
};

/// log(sum exp(x_i)) over possibly empty input (-inf when empty).
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// Ising enumeration
// ---------------------------------------------------------------------------

/// Histogram of the Ising statistic over all 2^(r s) lattices; theta enters
/// only through reweighting, so one enumeration serves every theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingEnumeration {
    rows: usize,
    cols: usize,
    /// (statistic value, multiplicity), sorted by statistic.
    hist: Vec<(i64, u64)>,
}

impl IsingEnumeration {
    pub fn build(rows: usize, cols: usize) -> Result<Self> {
        let sites = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::EnumerationTooLarge("lattice size overflow".into()))?;
        if sites == 0 {
            return Err(Error::InvalidParam("lattice dimensions must be >= 1".into()));
        }
        if sites > 16 {
            return Err(Error::EnumerationTooLarge(format!(
                "{rows}x{cols} lattice has 2^{sites} states"
            )));
        }
        let mut hist = std::collections::BTreeMap::new();
        let mut spins = vec![-1i8; sites];
        for bits in 0u32..(1u32 << sites) {
            for (idx, s) in spins.iter_mut().enumerate() {
                *s = if (bits >> idx) & 1 == 1 { 1 } else { -1 };
            }
            let state = IsingState::new(rows, cols, spins.clone())?;
            *hist.entry(ising_statistic_i64(&state)).or_insert(0u64) += 1;
        }
        Ok(IsingEnumeration {
            rows,
            cols,
            hist: hist.into_iter().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// log c(theta) = log sum_x exp(theta S(x)).
    pub fn log_c(&self, theta: f64) -> f64 {
        log_sum_exp(
            self.hist
                .iter()
                .map(move |&(s, m)| theta * s as f64 + (m as f64).ln()),
        )
    }

    /// First and second derivatives of log c, evaluated in the log domain as
    /// c'/c and c''/c - (c'/c)^2. This is a numerically distinct route from
    /// the pmf-side moments, which makes the Bartlett-type identities a real
    /// two-route check.
    pub fn log_c_derivatives(&self, theta: f64) -> (f64, f64) {
        let log_c = self.log_c(theta);
        let pos = log_sum_exp(self.hist.iter().filter(|&&(s, _)| s > 0).map(move |&(s, m)| {
            theta * s as f64 + (m as f64 * s as f64).ln()
        }));
        let neg = log_sum_exp(self.hist.iter().filter(|&&(s, _)| s < 0).map(move |&(s, m)| {
            theta * s as f64 + (m as f64 * (-s) as f64).ln()
        }));
        let d1 = (pos - log_c).exp() - (neg - log_c).exp();
        let second = log_sum_exp(self.hist.iter().filter(|&&(s, _)| s != 0).map(move |&(s, m)| {
            theta * s as f64 + (m as f64 * (s as f64) * (s as f64)).ln()
        }));
        let d2 = (second - log_c).exp() - d1 * d1;
        (d1, d2)
    }

    /// E_f[S(X)] under f(.|theta), via the normalized pmf.
    pub fn mean_s(&self, theta: f64) -> f64 {
        self.pmf(theta).iter().map(|&(s, p)| p * s as f64).sum()
    }

    /// Var_f[S(X)], centered around the pmf mean.
    pub fn var_s(&self, theta: f64) -> f64 {
        let pmf = self.pmf(theta);
        let mean: f64 = pmf.iter().map(|&(s, p)| p * s as f64).sum();
        pmf.iter()
            .map(|&(s, p)| {
                let d = s as f64 - mean;
                p * d * d
            })
            .sum()
    }

    /// Probability of each distinct statistic value.
    pub fn pmf(&self, theta: f64) -> Vec<(i64, f64)> {
        let log_c = self.log_c(theta);
        self.hist
            .iter()
            .map(|&(s, m)| (s, (theta * s as f64 + (m as f64).ln() - log_c).exp()))
            .collect()
    }
}

/// Exact quantities for one (lattice, theta) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingTable {
    pub rows: usize,
    pub cols: usize,
    pub theta: f64,
    pub log_c: f64,
    pub mean_s: f64,
    pub var_s: f64,
    pub pmf: Vec<(i64, f64)>,
}

/// Enumerate an r x s lattice (r s <= 16) at a fixed theta.
pub fn enumerate_ising(rows: usize, cols: usize, theta: f64) -> Result<IsingTable> {
    let e = IsingEnumeration::build(rows, cols)?;
    Ok(IsingTable {
        rows,
        cols,
        theta,
        log_c: e.log_c(theta),
        mean_s: e.mean_s(theta),
        var_s: e.var_s(theta),
        pmf: e.pmf(theta),
    })
}

// ---------------------------------------------------------------------------
// ERGM enumeration
// ---------------------------------------------------------------------------

/// All graphs on n vertices with their (S1, S2) statistics; feasible for
/// n(n-1)/2 <= 15 dyads.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgmEnumeration {
    n: usize,
    tau: f64,
    dyads: Vec<(usize, usize)>,
    stats: Vec<[f64; 2]>,
}

impl ErgmEnumeration {
    pub fn build(n: usize, tau: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam("graph needs n >= 2 vertices".into()));
        }
        let dyad_count = n * (n - 1) / 2;
        if dyad_count > 15 {
            return Err(Error::EnumerationTooLarge(format!(
                "n = {n} gives 2^{dyad_count} graphs"
            )));
        }
        let mut dyads = Vec::with_capacity(dyad_count);
        for i in 0..n {
            for j in (i + 1)..n {
                dyads.push((i, j));
            }
        }
        let mut stats = Vec::with_capacity(1 << dyad_count);
        let mut g = GraphState::empty(n)?;
        for bits in 0u32..(1u32 << dyad_count) {
            for (idx, &(i, j)) in dyads.iter().enumerate() {
                g.set_edge(i, j, (bits >> idx) & 1 == 1);
            }
            stats.push(ergm_statistics(&g, tau));
        }
        Ok(ErgmEnumeration {
            n,
            tau,
            dyads,
            stats,
        })
    }

    pub fn log_c(&self, theta: &[f64]) -> f64 {
        log_sum_exp(
            self.stats
                .iter()
                .map(move |s| theta[0] * s[0] + theta[1] * s[1]),
        )
    }

    /// E_f[(S1, S2)] and the covariance matrix of the statistics.
    pub fn moments(&self, theta: &[f64]) -> ([f64; 2], SquareMat) {
        let log_c = self.log_c(theta);
        let mut mean = [0.0; 2];
        for s in &self.stats {
            let p = (theta[0] * s[0] + theta[1] * s[1] - log_c).exp();
            mean[0] += p * s[0];
            mean[1] += p * s[1];
        }
        let mut cov = SquareMat::zeros(2);
        for s in &self.stats {
            let p = (theta[0] * s[0] + theta[1] * s[1] - log_c).exp();
            let d = [s[0] - mean[0], s[1] - mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    cov.add_at(i, j, p * d[i] * d[j]);
                }
            }
        }
        (mean, cov)
    }

    /// Exact draw by inverse-CDF over the enumerated weights.
    pub fn sample(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<GraphState> {
        let log_c = self.log_c(theta);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = self.stats.len() - 1;
        for (idx, s) in self.stats.iter().enumerate() {
            acc += (theta[0] * s[0] + theta[1] * s[1] - log_c).exp();
            if u < acc {
                chosen = idx;
                break;
            }
        }
        let mut g = GraphState::empty(self.n)?;
        for (idx, &(i, j)) in self.dyads.iter().enumerate() {
            g.set_edge(i, j, (chosen >> idx) & 1 == 1);
        }
        Ok(g)
    }
}

/// Exact quantities for one (n, theta, tau) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmTable {
    pub n: usize,
    pub tau: f64,
    pub theta: [f64; 2],
    pub log_c: f64,
    pub mean: [f64; 2],
    pub cov: Vec<f64>,
}

pub fn enumerate_ergm(n: usize, theta: [f64; 2], tau: f64) -> Result<ErgmTable> {
    let e = ErgmEnumeration::build(n, tau)?;
    let (mean, cov) = e.moments(&theta);
    Ok(ErgmTable {
        n,
        tau,
        theta,
        log_c: e.log_c(&theta),
        mean,
        cov: cov.data().to_vec(),
    })
}

// ---------------------------------------------------------------------------
// Gaussian: tractable normalizing function
// ---------------------------------------------------------------------------

/// log c(theta) = (n/2) log(2 pi sigma^2) for n iid Gaussian observations.
pub fn gaussian_log_c(n_data: usize, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidParam(format!(
            "sigma^2 must be > 0, got {sigma_sq}"
        )));
    }
    Ok(n_data as f64 / 2.0 * (2.0 * std::f64::consts::PI * sigma_sq).ln())
}

/// Gradient of log c in (mu, sigma^2): (0, n / (2 sigma^2)).
pub fn gaussian_log_c_grad(n_data: usize, sigma_sq: f64) -> Result<[f64; 2]> {
    gaussian_log_c(n_data, sigma_sq)?;
    Ok([0.0, n_data as f64 / (2.0 * sigma_sq)])
}

/// Hessian of log c in (mu, sigma^2).
pub fn gaussian_log_c_hess(n_data: usize, sigma_sq: f64) -> Result<SquareMat> {
    gaussian_log_c(n_data, sigma_sq)?;
    let mut h = SquareMat::zeros(2);
    h.set(1, 1, -(n_data as f64) / (2.0 * sigma_sq * sigma_sq));
    Ok(h)
}

// ---------------------------------------------------------------------------
// Exact per-point posterior curvature for tractable/enumerable models
// ---------------------------------------------------------------------------

/// Exact posterior score u(theta) and log-posterior Hessian H(theta) for
/// models where log c is available, feeding exact CD and KSD.
pub trait ExactPosterior: Sync {
    fn score(&self, theta: &ParamVector) -> Vec<f64>;
    fn hessian(&self, theta: &ParamVector) -> SquareMat;

    /// J(theta) = u(theta) u(theta)^T.
    fn score_outer(&self, theta: &ParamVector) -> SquareMat {
        SquareMat::outer(&self.score(theta))
    }
}

/// Exact curvature for the univariate Gaussian model.
pub struct GaussianExactPosterior<'a> {
    pub model: &'a GaussianModel,
    pub data: &'a [f64],
}

impl ExactPosterior for GaussianExactPosterior<'_> {
    fn score(&self, theta: &ParamVector) -> Vec<f64> {
        let data = self.data.to_vec();
        let mut u = self.model.grad_log_prior(theta);
        let gh = self.model.grad_log_h(&data, theta);
        let gc = gaussian_log_c_grad(self.data.len(), theta.values()[1]).expect("valid sigma^2");
        for j in 0..2 {
            u[j] += gh[j] - gc[j];
        }
        u
    }

    fn hessian(&self, theta: &ParamVector) -> SquareMat {
        let data = self.data.to_vec();
        let hp = self.model.hess_log_prior(theta);
        let hh = self.model.hess_log_h(&data, theta);
        let hc = gaussian_log_c_hess(self.data.len(), theta.values()[1]).expect("valid sigma^2");
        hp.add(&hh).sub(&hc)
    }
}

/// Exact curvature for an enumerable Ising model with a uniform prior:
/// u(theta) = S(x) - E_f[S], H(theta) = -Var_f[S].
pub struct IsingExactPosterior {
    enumeration: IsingEnumeration,
    s_obs: f64,
}

impl IsingExactPosterior {
    pub fn new(data: &IsingState) -> Result<Self> {
        Ok(IsingExactPosterior {
            enumeration: IsingEnumeration::build(data.rows(), data.cols())?,
            s_obs: ising_statistic_i64(data) as f64,
        })
    }

    pub fn enumeration(&self) -> &IsingEnumeration {
        &self.enumeration
    }
}

impl ExactPosterior for IsingExactPosterior {
    fn score(&self, theta: &ParamVector) -> Vec<f64> {
        vec![self.s_obs - self.enumeration.mean_s(theta.values()[0])]
    }

    fn hessian(&self, theta: &ParamVector) -> SquareMat {
        let mut h = SquareMat::zeros(1);
        h.set(0, 0, -self.enumeration.var_s(theta.values()[0]));
        h
    }
}

// ---------------------------------------------------------------------------
// Grid posterior for the Ising dependence parameter
// ---------------------------------------------------------------------------

/// Quadrature gold standard for sampler validation: the posterior of theta
/// given an enumerable lattice, integrated on a uniform grid (endpoints
/// included) with the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

pub fn ising_grid_posterior(
    data: &IsingState,
    prior: Interval,
    grid_size: usize,
) -> Result<GridPosterior> {
    if grid_size < 100 {
        return Err(Error::InvalidParam("grid must have >= 100 points".into()));
    }
    let enumeration = IsingEnumeration::build(data.rows(), data.cols())?;
    let s_obs = ising_statistic_i64(data) as f64;
    let (lo, hi) = (prior.lo, prior.hi);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParam(
            "grid posterior needs a bounded prior interval".into(),
        ));
    }
    let h = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + h * i as f64).collect();
    let log_dens: Vec<f64> = grid
        .iter()
        .map(|&t| t * s_obs - enumeration.log_c(t))
        .collect();
    let mx = log_dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_dens.iter().map(|&v| (v - mx).exp()).collect();
    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..grid_size {
            let w = if i == 0 || i == grid_size - 1 { 0.5 } else { 1.0 };
            acc += w * f(i);
        }
        acc * h
    };
    let z = trap(&|i| raw[i]);
    if !(z > 0.0) {
        return Err(Error::Degenerate("grid posterior has zero mass".into()));
    }
    let density: Vec<f64> = raw.iter().map(|&v| v / z).collect();
    let mean = trap(&|i| density[i] * grid[i]);
    let second = trap(&|i| density[i] * grid[i] * grid[i]);
    Ok(GridPosterior {
        mean,
        variance: second - mean * mean,
        grid,
        density,
    })
}
