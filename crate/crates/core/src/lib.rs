//! Sample-quality diagnostics for Monte Carlo algorithms whose targets have
//! intractable normalizing functions.
//!
//! Posteriors of the form `pi(theta | x) ∝ p(theta) h(x|theta) / c(theta)`
//! with an unknown normalizing function `c(theta)` cannot be diagnosed with
//! tools that need the posterior score. This crate provides
//!
//! * a curvature diagnostic (`CD`) built from the second Bartlett identity,
//!   comparing the sensitivity matrix (average negative Hessian of the log
//!   posterior) against the variability matrix (average score outer product),
//! * its Monte Carlo approximation (`ACD`) for doubly intractable targets,
//!   built from unbiased auxiliary-sample estimators of the score and of the
//!   Hessian of `log c`,
//! * the IMQ kernel Stein discrepancy (`KSD`) and its approximate version
//!   (`AIKS`) that substitutes the estimated score,
//! * the samplers needed to exercise them (Ising/ERGM Gibbs, perfect sampling
//!   via coupling from the past, the exchange algorithm, double
//!   Metropolis-Hastings, and a conjugate Gaussian Gibbs sampler), and
//! * brute-force enumeration oracles that supply exact ground truth at desk
//!   scale.
//!
//! The [`harness`] module ties everything together behind an experiment
//! runner with CSV/JSON outputs; the `mcdiag` binary in the companion CLI
//! crate exposes it on the command line.

pub mod curvature;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod samplers;
pub mod score;
pub mod stats;
pub mod stein;

pub use error::{Error, Result};
pub use linalg::SquareMat;
pub use model::{Interval, ParamVector, Support};
pub use samplers::SampleChain;
