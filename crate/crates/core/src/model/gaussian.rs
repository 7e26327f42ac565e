//! Univariate Gaussian model with theta = (mu, sigma^2).
//!
//! The unnormalized density is fixed as
//! `h(x|theta) = exp(-sum_i (x_i - mu)^2 / (2 sigma^2))`, so the normalizing
//! function `c(theta) = (2 pi sigma^2)^{n/2}` genuinely depends on theta.
//! `c` is tractable here (see the oracle module), which is exactly why this
//! model can validate the approximate diagnostics against exact ones.
//!
//! Priors: mu ~ N(mu0, tau0^2), sigma^2 ~ InverseGamma(shape, rate), with
//! the defaults mu0 = 0, tau0^2 = 100, shape = rate = 0.001.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMat;
use crate::model::{AuxConfig, Interval, Model, ParamVector, Support};
use crate::rng::{stream_rng, StreamDomain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mu0: f64,
    pub tau0_sq: f64,
    /// Inverse-gamma shape for sigma^2.
    pub ig_shape: f64,
    /// Inverse-gamma rate for sigma^2.
    pub ig_rate: f64,
}

impl Default for GaussianPrior {
    fn default() -> Self {
        GaussianPrior {
            mu0: 0.0,
            tau0_sq: 100.0,
            ig_shape: 0.001,
            ig_rate: 0.001,
        }
    }
}

/// Model for `n_data` iid Gaussian observations.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    pub n_data: usize,
    pub prior: GaussianPrior,
}

impl Default for GaussianModel {
    fn default() -> Self {
        GaussianModel {
            n_data: 1,
            prior: GaussianPrior::default(),
        }
    }
}

impl GaussianModel {
    pub fn new(n_data: usize, prior: GaussianPrior) -> Self {
        GaussianModel { n_data, prior }
    }
}

fn check_sigma_sq(theta: &[f64]) -> Result<f64> {
    let s = theta[1];
    if !(s > 0.0) {
        return Err(Error::InvalidParam(format!("sigma^2 must be > 0, got {s}")));
    }
    Ok(s)
}

/// log h(x | mu, sigma^2) = -sum (x_i - mu)^2 / (2 sigma^2).
pub fn gaussian_log_h(data: &[f64], mu: f64, sigma_sq: f64) -> Result<f64> {
    check_sigma_sq(&[mu, sigma_sq])?;
    let ss: f64 = data.iter().map(|x| (x - mu) * (x - mu)).sum();
    Ok(-ss / (2.0 * sigma_sq))
}

/// Gradient of log h in (mu, sigma^2).
pub fn gaussian_grad_log_h(data: &[f64], mu: f64, sigma_sq: f64) -> Result<[f64; 2]> {
    let s = check_sigma_sq(&[mu, sigma_sq])?;
    let w: f64 = data.iter().map(|x| x - mu).sum();
    let v: f64 = data.iter().map(|x| (x - mu) * (x - mu)).sum();
    Ok([w / s, v / (2.0 * s * s)])
}

/// Hessian of log h in (mu, sigma^2).
pub fn gaussian_hess_log_h(data: &[f64], mu: f64, sigma_sq: f64) -> Result<SquareMat> {
    let s = check_sigma_sq(&[mu, sigma_sq])?;
    let n = data.len() as f64;
    let w: f64 = data.iter().map(|x| x - mu).sum();
    let v: f64 = data.iter().map(|x| (x - mu) * (x - mu)).sum();
    let mut h = SquareMat::zeros(2);
    h.set(0, 0, -n / s);
    h.set(0, 1, -w / (s * s));
    h.set(1, 0, -w / (s * s));
    h.set(1, 1, -v / (s * s * s));
    Ok(h)
}

impl Model for GaussianModel {
    type State = Vec<f64>;

    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn support(&self) -> Support {
        Support::new(vec![Interval::REAL, Interval::POSITIVE]).expect("static support")
    }

    fn is_exponential_family(&self) -> bool {
        false
    }

    fn log_h(&self, data: &Self::State, theta: &ParamVector) -> f64 {
        let t = theta.values();
        gaussian_log_h(data, t[0], t[1]).expect("theta validated by ParamVector")
    }

    fn grad_log_h(&self, data: &Self::State, theta: &ParamVector) -> Vec<f64> {
        let t = theta.values();
        gaussian_grad_log_h(data, t[0], t[1])
            .expect("theta validated by ParamVector")
            .to_vec()
    }

    fn hess_log_h(&self, data: &Self::State, theta: &ParamVector) -> SquareMat {
        let t = theta.values();
        gaussian_hess_log_h(data, t[0], t[1]).expect("theta validated by ParamVector")
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        let (mu, s) = (theta.values()[0], theta.values()[1]);
        let p = &self.prior;
        -(mu - p.mu0) * (mu - p.mu0) / (2.0 * p.tau0_sq) - (p.ig_shape + 1.0) * s.ln()
            - p.ig_rate / s
    }

    fn grad_log_prior(&self, theta: &ParamVector) -> Vec<f64> {
        let (mu, s) = (theta.values()[0], theta.values()[1]);
        let p = &self.prior;
        vec![
            -(mu - p.mu0) / p.tau0_sq,
            -(p.ig_shape + 1.0) / s + p.ig_rate / (s * s),
        ]
    }

    fn hess_log_prior(&self, theta: &ParamVector) -> SquareMat {
        let s = theta.values()[1];
        let p = &self.prior;
        SquareMat::diag(&[
            -1.0 / p.tau0_sq,
            (p.ig_shape + 1.0) / (s * s) - 2.0 * p.ig_rate / (s * s * s),
        ])
    }

    fn visit_aux_states(
        &self,
        data: &Self::State,
        theta: &ParamVector,
        count: usize,
        seed: u64,
        _cfg: &AuxConfig,
        visit: &mut dyn FnMut(&Self::State),
    ) -> Result<()> {
        // Exact iid draws; no inner chain needed.
        let n = if data.is_empty() { self.n_data } else { data.len() };
        let (mu, s) = (theta.values()[0], theta.values()[1]);
        let normal = Normal::new(mu, s.sqrt()).map_err(|e| Error::InvalidParam(e.to_string()))?;
        let mut rng = stream_rng(seed, StreamDomain::Inner, 0);
        let mut y = vec![0.0; n];
        for _ in 0..count {
            for v in y.iter_mut() {
                *v = normal.sample(&mut rng);
            }
            visit(&y);
        }
        Ok(())
    }

    fn visit_aux_grads(
        &self,
        data: &Self::State,
        theta: &ParamVector,
        count: usize,
        seed: u64,
        _cfg: &AuxConfig,
        visit: &mut dyn FnMut(&[f64], &SquareMat),
    ) -> Result<()> {
        // grad and hess of log h depend on a draw y only through
        //   W = sum (y_i - mu)   ~ N(0, n sigma^2)
        //   V = sum (y_i - mu)^2 ~ sigma^2 chi^2_n
        // which are independent under f(.|theta); sample them directly
        // instead of materializing n_data observations per draw.
        let n = if data.is_empty() { self.n_data } else { data.len() } as f64;
        let s = theta.values()[1];
        let chi = ChiSquared::new(n).map_err(|e| Error::InvalidParam(e.to_string()))?;
        let w_sd = (n * s).sqrt();
        let mut rng = stream_rng(seed, StreamDomain::Inner, 0);
        let mut hess = SquareMat::zeros(2);
        hess.set(0, 0, -n / s);
        for _ in 0..count {
            let w: f64 = w_sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let v: f64 = s * chi.sample(&mut rng);
            let grad = [w / s, v / (2.0 * s * s)];
            hess.set(0, 1, -w / (s * s));
            hess.set(1, 0, -w / (s * s));
            hess.set(1, 1, -v / (s * s * s));
            visit(&grad, &hess);
        }
        Ok(())
    }

    fn sample_exact(&self, theta: &ParamVector, rng: &mut ChaCha8Rng) -> Result<Self::State> {
        let (mu, s) = (theta.values()[0], theta.values()[1]);
        let normal = Normal::new(mu, s.sqrt()).map_err(|e| Error::InvalidParam(e.to_string()))?;
        Ok((0..self.n_data).map(|_| normal.sample(rng)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_h_examples() {
        assert_eq!(gaussian_log_h(&[0.0], 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(gaussian_log_h(&[1.0, -1.0], 0.0, 1.0).unwrap(), -1.0);
        assert_eq!(gaussian_log_h(&[2.0], 1.0, 2.0).unwrap(), -0.25);
        assert!(gaussian_log_h(&[0.0], 0.0, 0.0).is_err());
        assert!(gaussian_log_h(&[0.0], 0.0, -1.0).is_err());
    }

    #[test]
    fn grad_examples() {
        let g = gaussian_grad_log_h(&[1.0, -1.0], 0.0, 1.0).unwrap();
        assert_eq!(g, [0.0, 1.0]);
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let data: Vec<f64> = vec![
            0.46, -1.23, 0.11, 2.01, -0.55, 0.98, -0.33, 1.47, -0.88, 0.02,
        ];
        let (mu, s) = (0.3, 1.7);
        let hes = gaussian_hess_log_h(&data, mu, s).unwrap();
        let eps = 1e-6;
        let g = |m: f64, v: f64| gaussian_grad_log_h(&data, m, v).unwrap();
        let fd = [
            [
                (g(mu + eps, s)[0] - g(mu - eps, s)[0]) / (2.0 * eps),
                (g(mu, s + eps)[0] - g(mu, s - eps)[0]) / (2.0 * eps),
            ],
            [
                (g(mu + eps, s)[1] - g(mu - eps, s)[1]) / (2.0 * eps),
                (g(mu, s + eps)[1] - g(mu, s - eps)[1]) / (2.0 * eps),
            ],
        ];
        for i in 0..2 {
            for j in 0..2 {
                let exact = hes.get(i, j);
                let rel = (exact - fd[i][j]).abs() / exact.abs().max(1.0);
                assert!(rel < 1e-6, "entry ({i},{j}): {exact} vs fd {fd:?}");
            }
        }
    }

    #[test]
    fn aux_grads_match_aux_states_in_distribution() {
        // Same moments through both code paths (not the same draws).
        let model = GaussianModel::new(50, GaussianPrior::default());
        let theta = ParamVector::new(vec![1.0, 2.0], model.support()).unwrap();
        let data = vec![0.0; 50];
        let count = 4000;

        let mut mean_fast = [0.0, 0.0];
        model
            .visit_aux_grads(&data, &theta, count, 9, &AuxConfig::default(), &mut |g, _| {
                mean_fast[0] += g[0] / count as f64;
                mean_fast[1] += g[1] / count as f64;
            })
            .unwrap();

        let mut mean_slow = [0.0, 0.0];
        model
            .visit_aux_states(&data, &theta, count, 10, &AuxConfig::default(), &mut |y| {
                let g = gaussian_grad_log_h(y, 1.0, 2.0).unwrap();
                mean_slow[0] += g[0] / count as f64;
                mean_slow[1] += g[1] / count as f64;
            })
            .unwrap();

        // E[grad] = (0, n/(2 sigma^2)) = (0, 12.5); both estimates near it.
        assert!(mean_fast[0].abs() < 0.3, "{mean_fast:?}");
        assert!(mean_slow[0].abs() < 0.3, "{mean_slow:?}");
        assert!((mean_fast[1] - 12.5).abs() < 0.3, "{mean_fast:?}");
        assert!((mean_slow[1] - 12.5).abs() < 0.3, "{mean_slow:?}");
    }
}
