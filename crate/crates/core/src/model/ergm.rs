//! Undirected exponential random graph model with edge count and GWESP
//! statistics, theta = (theta_1, theta_2).
//!
//! `log h(x|theta) = theta_1 S1(x) + theta_2 S2(x)` with S1 the number of
//! edges and S2 the geometrically weighted edgewise shared partnership
//! statistic with decay tau (fixed, default 0.25). Priors are uniform on a
//! box.

use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMat;
use crate::model::{AuxConfig, Interval, Model, ParamVector, Support};
use crate::oracle::ErgmEnumeration;
use crate::rng::{stream_rng, StreamDomain};
use crate::samplers::ergm_gibbs_cycle;

/// Undirected simple graph: symmetric binary adjacency, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphStateRepr", into = "GraphStateRepr")]
pub struct GraphState {
    n: usize,
    adj: Vec<bool>,
}

/// Wire format: vertex count plus sorted edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphStateRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphStateRepr> for GraphState {
    type Error = Error;
    fn try_from(repr: GraphStateRepr) -> Result<Self> {
        GraphState::from_edges(repr.n, &repr.edges)
    }
}

impl From<GraphState> for GraphStateRepr {
    fn from(g: GraphState) -> Self {
        GraphStateRepr {
            n: g.n,
            edges: g.edges(),
        }
    }
}

impl GraphState {
    pub fn empty(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam("graph needs n >= 2 vertices".into()));
        }
        Ok(GraphState {
            n,
            adj: vec![false; n * n],
        })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::InvalidParam(format!(
                    "invalid edge ({i}, {j}) for n = {n}"
                )));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for i in 0..n {
            for j in (i + 1)..n {
                g.set_edge(i, j, true);
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    #[inline]
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        debug_assert_ne!(i, j);
        self.adj[i * self.n + j] = present;
        self.adj[j * self.n + i] = present;
    }

    pub fn edge_count(&self) -> usize {
        let mut c = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    c += 1;
                }
            }
        }
        c
    }

    /// Sorted (i < j) edge list.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Number of common neighbors of i and j.
    pub fn shared_partners(&self, i: usize, j: usize) -> usize {
        (0..self.n)
            .filter(|&v| v != i && v != j && self.has_edge(i, v) && self.has_edge(j, v))
            .count()
    }

    /// Sum of all adjacency entries (twice the edge count).
    pub fn adjacency_sum(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }
}

/// (S1, S2): edge count and the GWESP statistic with decay `tau`.
///
/// S2 = e^tau * sum_{k=1}^{n-2} {1 - (1 - e^{-tau})^k} EP_k(x), where EP_k
/// counts edges whose endpoints share exactly k neighbors. EP_k is found by
/// explicit common-neighbor counting per edge.
pub fn ergm_statistics(state: &GraphState, tau: f64) -> [f64; 2] {
    let n = state.n();
    let mut s1 = 0.0;
    let mut ep = vec![0u64; n.saturating_sub(1)]; // ep[k] for k = 0..n-2
    for i in 0..n {
        for j in (i + 1)..n {
            if state.has_edge(i, j) {
                s1 += 1.0;
                ep[state.shared_partners(i, j)] += 1;
            }
        }
    }
    let base = 1.0 - (-tau).exp();
    let mut s2 = 0.0;
    for (k, &count) in ep.iter().enumerate().skip(1) {
        if count > 0 {
            s2 += (1.0 - base.powi(k as i32)) * count as f64;
        }
    }
    s2 *= tau.exp();
    [s1, s2]
}

#[derive(Debug, Clone)]
pub struct ErgmModel {
    pub n: usize,
    pub tau: f64,
    /// Uniform prior box for (theta_1, theta_2).
    pub prior: [Interval; 2],
    enumeration: OnceLock<ErgmEnumeration>,
}

impl ErgmModel {
    pub const DEFAULT_TAU: f64 = 0.25;

    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam("ERGM needs n >= 2 vertices".into()));
        }
        Ok(ErgmModel {
            n,
            tau: Self::DEFAULT_TAU,
            prior: [
                Interval::new(-5.0, 2.27).expect("static"),
                Interval::new(-1.57, 2.32).expect("static"),
            ],
            enumeration: OnceLock::new(),
        })
    }

    pub fn with_prior(mut self, prior: [Interval; 2]) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    fn enumeration(&self) -> Result<&ErgmEnumeration> {
        if let Some(e) = self.enumeration.get() {
            return Ok(e);
        }
        let e = ErgmEnumeration::build(self.n, self.tau)?;
        Ok(self.enumeration.get_or_init(|| e))
    }
}

impl Model for ErgmModel {
    type State = GraphState;

    fn name(&self) -> &'static str {
        "ergm"
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn support(&self) -> Support {
        Support::new(self.prior.to_vec()).expect("valid prior box")
    }

    fn is_exponential_family(&self) -> bool {
        true
    }

    fn log_h(&self, data: &Self::State, theta: &ParamVector) -> f64 {
        let s = ergm_statistics(data, self.tau);
        theta.values()[0] * s[0] + theta.values()[1] * s[1]
    }

    fn grad_log_h(&self, data: &Self::State, _theta: &ParamVector) -> Vec<f64> {
        ergm_statistics(data, self.tau).to_vec()
    }

    fn hess_log_h(&self, _data: &Self::State, _theta: &ParamVector) -> SquareMat {
        SquareMat::zeros(2)
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        let inside = theta
            .values()
            .iter()
            .zip(&self.prior)
            .all(|(&v, iv)| iv.contains_interior(v));
        if inside {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn grad_log_prior(&self, _theta: &ParamVector) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn hess_log_prior(&self, _theta: &ParamVector) -> SquareMat {
        SquareMat::zeros(2)
    }

    fn visit_aux_states(
        &self,
        data: &Self::State,
        theta: &ParamVector,
        count: usize,
        seed: u64,
        cfg: &AuxConfig,
        visit: &mut dyn FnMut(&Self::State),
    ) -> Result<()> {
        let mut rng = stream_rng(seed, StreamDomain::Inner, 0);
        let mut state = data.clone();
        for _ in 0..cfg.burn_in {
            ergm_gibbs_cycle(&mut state, theta.values(), self.tau, &mut rng);
        }
        let thin = cfg.thin.max(1);
        for _ in 0..count {
            for _ in 0..thin {
                ergm_gibbs_cycle(&mut state, theta.values(), self.tau, &mut rng);
            }
            visit(&state);
        }
        Ok(())
    }

    /// Exact draw by enumerating all graphs; only feasible for n <= 6.
    fn sample_exact(&self, theta: &ParamVector, rng: &mut ChaCha8Rng) -> Result<Self::State> {
        self.enumeration()?.sample(theta.values(), rng)
    }
}
