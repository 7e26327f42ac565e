//! Single-site heat-bath Gibbs updates and monotone coupling-from-the-past
//! perfect sampling for the ferromagnetic Ising model.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::IsingState;
use crate::rng::{stream_rng, StreamDomain};

/// One full raster-order sweep of heat-bath updates: each site is set to +1
/// with probability exp(theta * nbr) / (exp(theta * nbr) + exp(-theta * nbr))
/// where nbr is its 4-neighborhood spin sum.
pub fn ising_gibbs_sweep(state: &mut IsingState, theta: f64, rng: &mut ChaCha8Rng) {
    for i in 0..state.rows() {
        for j in 0..state.cols() {
            let nbr = state.neighbor_sum(i, j) as f64;
            let p_plus = 1.0 / (1.0 + (-2.0 * theta * nbr).exp());
            let spin = if rng.gen::<f64>() < p_plus { 1 } else { -1 };
            state.set(i, j, spin);
        }
    }
}

/// One coupled sweep: both lattices consume the same uniforms, site by site.
/// For theta >= 0 the heat-bath update is monotone in the neighbor sum, so a
/// componentwise ordering of the two states is preserved.
pub(crate) fn coupled_sweep(
    top: &mut IsingState,
    bottom: &mut IsingState,
    theta: f64,
    rng: &mut ChaCha8Rng,
) {
    for i in 0..top.rows() {
        for j in 0..top.cols() {
            let u: f64 = rng.gen();
            let nbr_t = top.neighbor_sum(i, j) as f64;
            let nbr_b = bottom.neighbor_sum(i, j) as f64;
            let p_t = 1.0 / (1.0 + (-2.0 * theta * nbr_t).exp());
            let p_b = 1.0 / (1.0 + (-2.0 * theta * nbr_b).exp());
            top.set(i, j, if u < p_t { 1 } else { -1 });
            bottom.set(i, j, if u < p_b { 1 } else { -1 });
        }
    }
}

pub const CFTP_DEFAULT_MAX_SWEEPS: u64 = 1 << 16;

/// Exact draw from the Ising model via Propp-Wilson coupling from the past,
/// with the default sweep cap.
pub fn ising_cftp(theta: f64, rows: usize, cols: usize, seed: u64) -> Result<IsingState> {
    ising_cftp_with_cap(theta, rows, cols, seed, CFTP_DEFAULT_MAX_SWEEPS)
}

pub fn ising_cftp_with_cap(
    theta: f64,
    rows: usize,
    cols: usize,
    seed: u64,
    max_sweeps: u64,
) -> Result<IsingState> {
    ising_cftp_schedule(theta, rows, cols, seed, 2, max_sweeps)
}

/// Coupling from the past with a configurable epoch growth factor.
///
/// Epochs restart at T, factor*T, factor^2*T, ... sweeps into the past. The
/// sweep at time -t always consumes the stream derived from (seed, t), so a
/// longer epoch reuses the randomness of shorter ones and the returned draw
/// does not depend on the schedule.
pub fn ising_cftp_schedule(
    theta: f64,
    rows: usize,
    cols: usize,
    seed: u64,
    factor: u64,
    max_sweeps: u64,
) -> Result<IsingState> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "monotone CFTP requires theta >= 0, got {theta}"
        )));
    }
    if factor < 2 {
        return Err(Error::InvalidParam("epoch factor must be >= 2".into()));
    }
    let mut epoch: u64 = 1;
    loop {
        let mut top = IsingState::constant(rows, cols, 1).expect("valid dims");
        let mut bottom = IsingState::constant(rows, cols, -1).expect("valid dims");
        // Sweep times -epoch, ..., -1; time -t uses stream index t.
        for t in (1..=epoch).rev() {
            let mut sweep_rng = stream_rng(seed, StreamDomain::Cftp, t);
            coupled_sweep(&mut top, &mut bottom, theta, &mut sweep_rng);
        }
        if top == bottom {
            return Ok(top);
        }
        if epoch >= max_sweeps {
            return Err(Error::CoalescenceFailure { max_sweeps });
        }
        epoch = (epoch * factor).min(max_sweeps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ising_statistic;

    #[test]
    fn theta_zero_coalesces_after_one_sweep() {
        // All sites are fair coins independent of neighbors, so both chains
        // agree after the first sweep at every epoch; in particular
        // epoch = 1 must succeed.
        for seed in 0..20 {
            let draw = ising_cftp_with_cap(0.0, 2, 2, seed, 1).unwrap();
            assert_eq!(draw.rows(), 2);
        }
    }

    #[test]
    fn negative_theta_rejected() {
        assert!(matches!(
            ising_cftp(-0.1, 2, 2, 0),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn cap_failure_is_explicit() {
        // theta far above the critical coupling on a larger lattice with a
        // one-sweep cap cannot coalesce.
        let err = ising_cftp_with_cap(2.0, 4, 4, 7, 1).unwrap_err();
        assert!(matches!(err, Error::CoalescenceFailure { .. }));
    }

    #[test]
    fn equal_bounding_chains_stay_coalesced() {
        let mut a = IsingState::constant(3, 3, 1).unwrap();
        let mut b = a.clone();
        let mut rng = stream_rng(11, StreamDomain::Cftp, 1);
        for _ in 0..10 {
            coupled_sweep(&mut a, &mut b, 0.4, &mut rng);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn monotone_order_preserved() {
        let mut top = IsingState::constant(3, 3, 1).unwrap();
        let mut bottom = IsingState::constant(3, 3, -1).unwrap();
        let mut rng = stream_rng(5, StreamDomain::Cftp, 1);
        for _ in 0..5 {
            coupled_sweep(&mut top, &mut bottom, 0.3, &mut rng);
            for i in 0..3 {
                for j in 0..3 {
                    assert!(top.get(i, j) >= bottom.get(i, j));
                }
            }
        }
    }

    #[test]
    fn doubling_and_quadrupling_schedules_agree_exactly() {
        for seed in 0..200u64 {
            let a = ising_cftp_schedule(0.2, 3, 3, seed, 2, 1 << 16).unwrap();
            let b = ising_cftp_schedule(0.2, 3, 3, seed, 4, 1 << 16).unwrap();
            assert_eq!(
                a, b,
                "seed {seed}: schedules disagree ({} vs {})",
                ising_statistic(&a),
                ising_statistic(&b)
            );
        }
    }

    #[test]
    fn sweep_at_theta_zero_mixes_instantly() {
        // Mean S(x) over repeated sweeps from a fixed start should be ~0.
        let mut rng = stream_rng(3, StreamDomain::Inner, 0);
        let mut state = IsingState::constant(3, 3, 1).unwrap();
        let sweeps = 10_000;
        let mut total = 0.0;
        for _ in 0..sweeps {
            ising_gibbs_sweep(&mut state, 0.0, &mut rng);
            total += ising_statistic(&state);
        }
        let mean = total / sweeps as f64;
        // Var[S] = 12 at theta = 0 on 3x3, so SE ~ sqrt(12/10000) ~ 0.035.
        assert!(mean.abs() < 3.0 * 0.035, "mean S = {mean}");
    }
}
