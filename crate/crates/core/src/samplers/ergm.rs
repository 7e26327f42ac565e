//! Dyad-wise Gibbs updates for the two-statistic ERGM.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ergm_statistics, GraphState};

/// One full cycle of Gibbs updates over all dyads (i < j) in lexicographic
/// order. Each dyad is resampled from its full conditional
/// P(x_ij = 1 | rest) = sigmoid(theta' {S(x with edge) - S(x without)}).
///
/// Statistics are recomputed from scratch per toggle; the graphs here are
/// small enough that incremental bookkeeping is not worth its complexity.
pub fn ergm_gibbs_cycle(state: &mut GraphState, theta: &[f64], tau: f64, rng: &mut ChaCha8Rng) {
    let n = state.n();
    for i in 0..n {
        for j in (i + 1)..n {
            state.set_edge(i, j, true);
            let s_on = ergm_statistics(state, tau);
            state.set_edge(i, j, false);
            let s_off = ergm_statistics(state, tau);
            let d = theta[0] * (s_on[0] - s_off[0]) + theta[1] * (s_on[1] - s_off[1]);
            let p_on = 1.0 / (1.0 + (-d).exp());
            state.set_edge(i, j, rng.gen::<f64>() < p_on);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamDomain};

    #[test]
    fn zero_theta_gives_independent_half_density_edges() {
        // With theta = 0 every dyad is a fair coin; check the long-run edge
        // density on a small graph.
        let mut rng = stream_rng(17, StreamDomain::Inner, 0);
        let mut g = GraphState::empty(5).unwrap();
        let cycles = 4000;
        let mut total_edges = 0usize;
        for _ in 0..cycles {
            ergm_gibbs_cycle(&mut g, &[0.0, 0.0], 0.25, &mut rng);
            total_edges += g.edge_count();
        }
        let mean = total_edges as f64 / cycles as f64;
        // 10 dyads, Binomial(10, 1/2): mean 5, sd ~ 1.58/sqrt(cycles).
        assert!((mean - 5.0).abs() < 3.0 * 1.6 / (cycles as f64).sqrt() + 0.05,
            "mean edges = {mean}");
    }

    #[test]
    fn negative_edge_parameter_sparsifies() {
        let mut rng = stream_rng(18, StreamDomain::Inner, 0);
        let mut g = GraphState::empty(6).unwrap();
        let mut dense = 0usize;
        let mut sparse = 0usize;
        for _ in 0..500 {
            ergm_gibbs_cycle(&mut g, &[1.0, 0.0], 0.25, &mut rng);
            dense += g.edge_count();
        }
        let mut g = GraphState::empty(6).unwrap();
        for _ in 0..500 {
            ergm_gibbs_cycle(&mut g, &[-1.0, 0.0], 0.25, &mut rng);
            sparse += g.edge_count();
        }
        assert!(dense > sparse, "dense {dense} vs sparse {sparse}");
    }
}
