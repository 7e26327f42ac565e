//! Curvature diagnostics: the naive diagnostic, the scaled curvature
//! diagnostic (CD), and its approximate version (ACD).
//!
//! The second Bartlett identity says the sensitivity matrix (posterior
//! average of -H(theta)) and the variability matrix (posterior average of
//! u u^T) coincide at the target. A sample targeting the posterior should
//! therefore produce nearly equal Monte Carlo averages of the two; the
//! diagnostics below quantify their disagreement. CD compares the
//! half-vectorized matrices by angle and by norm ratio:
//!
//! ```text
//! CD = 1 - { w cos(h, j) + (1 - w) min(|h|, |j|) / max(|h|, |j|) }
//! ```
//!
//! with h = vech(Hn), j = vech(Jn) and Euclidean norms. A cosine below zero
//! saturates the diagnostic at 1. ACD is the same functional applied to
//! averages of the estimated matrices from [`crate::score`].

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SquareMat};
use crate::model::ParamVector;
use crate::oracle::ExactPosterior;
use crate::samplers::SampleChain;
use crate::score::EstimateSet;

pub const DEFAULT_W: f64 = 0.5;

/// Where per-point H and J matrices come from.
#[derive(Clone, Copy)]
pub enum HjSource<'a> {
    /// Closed-form score and Hessian (tractable or enumerable models).
    Exact(&'a dyn ExactPosterior),
    /// Two-stage Monte Carlo estimates.
    Estimates(&'a EstimateSet),
}

impl<'a> HjSource<'a> {
    /// Per-point (H, J) in chain order.
    pub fn hj(&self, idx: usize, point: &ParamVector) -> Result<(SquareMat, SquareMat)> {
        match self {
            HjSource::Exact(p) => Ok((p.hessian(point), p.score_outer(point))),
            HjSource::Estimates(set) => {
                let e = set.get(point).ok_or(Error::MissingEstimate(idx))?;
                Ok((e.h_hat.clone(), e.j_hat.clone()))
            }
        }
    }
}

/// Weighted average of -H over the chain (the sensitivity estimate carries
/// the sign flip). Weights need not be normalized.
pub fn average_h(h_points: &[SquareMat], weights: &[f64]) -> Result<SquareMat> {
    weighted_average(h_points, weights, -1.0)
}

/// Weighted average of J over the chain.
pub fn average_j(j_points: &[SquareMat], weights: &[f64]) -> Result<SquareMat> {
    weighted_average(j_points, weights, 1.0)
}

fn weighted_average(points: &[SquareMat], weights: &[f64], sign: f64) -> Result<SquareMat> {
    if points.is_empty() {
        return Err(Error::Empty("no matrices to average".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrices vs {} weights",
            points.len(),
            weights.len()
        )));
    }
    let dim = points[0].dim();
    let mut acc = SquareMat::zeros(dim);
    let mut total_w = 0.0;
    for (m, &w) in points.iter().zip(weights) {
        m.check_same_dim(&acc)?;
        total_w += w;
        for i in 0..dim {
            for j in 0..dim {
                acc.add_at(i, j, sign * w * m.get(i, j));
            }
        }
    }
    if !(total_w > 0.0) {
        return Err(Error::Degenerate("weights sum to zero".into()));
    }
    Ok(acc.scale(1.0 / total_w))
}

/// Frobenius distance between the averaged matrices.
pub fn naive_cd(hn: &SquareMat, jn: &SquareMat) -> Result<f64> {
    hn.check_same_dim(jn)?;
    Ok(hn.sub(jn).frobenius_norm())
}

/// The scaled curvature diagnostic in [0, 1]; 0 iff vech(Hn) = vech(Jn).
pub fn scaled_cd(hn: &SquareMat, jn: &SquareMat, w: f64) -> Result<f64> {
    hn.check_same_dim(jn)?;
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::InvalidParam(format!("weight w must be in (0,1), got {w}")));
    }
    let h = hn.vech();
    let j = jn.vech();
    let nh = norm2(&h);
    let nj = norm2(&j);
    if nh == 0.0 || nj == 0.0 {
        return Err(Error::Degenerate(
            "zero-norm vech in scaled CD; upstream estimates degenerate".into(),
        ));
    }
    if h == j {
        return Ok(0.0);
    }
    let cos = dot(&h, &j) / (nh * nj);
    let ratio = nh.min(nj) / nh.max(nj);
    Ok((1.0 - (w * cos + (1.0 - w) * ratio)).clamp(0.0, 1.0))
}

/// Inputs to the curvature diagnostics: averaged matrices plus provenance.
#[derive(Debug, Clone)]
pub struct CurvatureInputs {
    pub hn: SquareMat,
    pub jn: SquareMat,
    pub n: usize,
    pub approximated: bool,
}

impl CurvatureInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Empty("curvature inputs need n >= 1".into()));
        }
        if !self.hn.is_finite() || !self.jn.is_finite() {
            return Err(Error::Degenerate("curvature inputs must be finite".into()));
        }
        if !self.hn.is_symmetric(1e-9) || !self.jn.is_symmetric(1e-9) {
            return Err(Error::Degenerate("curvature inputs must be symmetric".into()));
        }
        self.hn.check_same_dim(&self.jn)
    }

    pub fn naive_cd(&self) -> Result<f64> {
        naive_cd(&self.hn, &self.jn)
    }

    pub fn scaled_cd(&self, w: f64) -> Result<f64> {
        scaled_cd(&self.hn, &self.jn, w)
    }
}

/// Averaged (Hn, Jn) over the chain from the given per-point source,
/// respecting point multiplicity through the chain weights.
pub fn chain_curvature_inputs(chain: &SampleChain, source: HjSource<'_>) -> Result<CurvatureInputs> {
    let mut hs = Vec::with_capacity(chain.len());
    let mut js = Vec::with_capacity(chain.len());
    for (idx, point) in chain.points().iter().enumerate() {
        let (h, j) = source.hj(idx, point)?;
        hs.push(h);
        js.push(j);
    }
    Ok(CurvatureInputs {
        hn: average_h(&hs, chain.weights())?,
        jn: average_j(&js, chain.weights())?,
        n: chain.len(),
        approximated: matches!(source, HjSource::Estimates(_)),
    })
}

/// Scaled CD of a chain with exact per-point curvature.
pub fn cd(chain: &SampleChain, exact: &dyn ExactPosterior, w: f64) -> Result<f64> {
    let inputs = chain_curvature_inputs(chain, HjSource::Exact(exact))?;
    inputs.scaled_cd(w)
}

/// Approximate curvature diagnostic: scaled CD over averaged estimated
/// matrices. Every unique chain point must have an estimate.
pub fn acd(chain: &SampleChain, estimates: &EstimateSet, w: f64) -> Result<f64> {
    let inputs = chain_curvature_inputs(chain, HjSource::Estimates(estimates))?;
    inputs.scaled_cd(w)
}

/// Scaled CD on running averages at each requested prefix length.
///
/// Prefix weights renormalize the leading chain weights, so a uniform chain
/// gives plain running means.
pub fn cd_trace(
    chain: &SampleChain,
    source: HjSource<'_>,
    prefix_lengths: &[usize],
    w: f64,
) -> Result<Vec<f64>> {
    if prefix_lengths.is_empty() {
        return Err(Error::Empty("no prefix lengths requested".into()));
    }
    let mut sorted = prefix_lengths.to_vec();
    sorted.sort_unstable();
    if sorted != prefix_lengths {
        return Err(Error::InvalidParam(
            "prefix lengths must be sorted ascending".into(),
        ));
    }
    if *sorted.first().unwrap() == 0 || *sorted.last().unwrap() > chain.len() {
        return Err(Error::InvalidParam(format!(
            "prefix lengths must lie in 1..={}",
            chain.len()
        )));
    }

    let dim = chain.dim();
    let mut h_run = SquareMat::zeros(dim);
    let mut j_run = SquareMat::zeros(dim);
    let mut w_run = 0.0;
    let mut out = Vec::with_capacity(sorted.len());
    let mut next = 0usize;
    for (idx, point) in chain.points().iter().enumerate() {
        let (h, j) = source.hj(idx, point)?;
        let wt = chain.weights()[idx];
        w_run += wt;
        for i in 0..dim {
            for jj in 0..dim {
                h_run.add_at(i, jj, -wt * h.get(i, jj));
                j_run.add_at(i, jj, wt * j.get(i, jj));
            }
        }
        while next < sorted.len() && sorted[next] == idx + 1 {
            let hn = h_run.scale(1.0 / w_run);
            let jn = j_run.scale(1.0 / w_run);
            out.push(scaled_cd(&hn, &jn, w)?);
            next += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_h_flips_sign() {
        let points = vec![SquareMat::identity(2).scale(-1.0); 3];
        let avg = average_h(&points, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(avg, SquareMat::identity(2));
    }

    #[test]
    fn average_h_two_point_example() {
        let a = SquareMat::diag(&[1.0, 3.0]).scale(-1.0);
        let b = SquareMat::diag(&[3.0, 1.0]).scale(-1.0);
        let avg = average_h(&[a, b], &[0.5, 0.5]).unwrap();
        assert_eq!(avg, SquareMat::diag(&[2.0, 2.0]));
    }

    #[test]
    fn average_respects_multiplicity() {
        // a 3-point chain sitting on one unique point
        let h = SquareMat::diag(&[2.0]);
        let avg = average_h(&[h.clone(), h.clone(), h.clone()], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(avg, SquareMat::diag(&[-2.0]));
    }

    #[test]
    fn average_j_outer_product() {
        let j = SquareMat::outer(&[1.0, 2.0]);
        let avg = average_j(&[j], &[1.0]).unwrap();
        assert_eq!(avg.data(), &[1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn averaged_j_of_independent_scores_is_full_rank() {
        let j1 = SquareMat::outer(&[1.0, 0.0]);
        let j2 = SquareMat::outer(&[0.0, 1.0]);
        let avg = average_j(&[j1, j2], &[0.5, 0.5]).unwrap();
        let det = avg.get(0, 0) * avg.get(1, 1) - avg.get(0, 1) * avg.get(1, 0);
        assert!(det > 0.0);
    }

    #[test]
    fn naive_cd_examples() {
        let i2 = SquareMat::identity(2);
        assert_eq!(naive_cd(&i2, &i2).unwrap(), 0.0);
        assert!((naive_cd(&i2, &i2.scale(2.0)).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        let h = SquareMat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(naive_cd(&h, &SquareMat::zeros(2)).unwrap(), 1.0);
        assert!(naive_cd(&i2, &SquareMat::identity(3)).is_err());
    }

    #[test]
    fn naive_cd_triangle_bound() {
        let h = SquareMat::from_rows(&[&[1.0, 0.2], &[0.2, 2.0]]);
        let j1 = SquareMat::from_rows(&[&[0.8, 0.1], &[0.1, 2.2]]);
        let j2 = SquareMat::from_rows(&[&[1.1, 0.4], &[0.4, 1.7]]);
        let lhs = (naive_cd(&h, &j1).unwrap() - naive_cd(&h, &j2).unwrap()).abs();
        let rhs = j1.sub(&j2).frobenius_norm();
        assert!(lhs <= rhs + 1e-15);
    }

    #[test]
    fn scaled_cd_examples() {
        let i2 = SquareMat::identity(2);
        assert_eq!(scaled_cd(&i2, &i2, 0.5).unwrap(), 0.0);

        // h ~ e1, j ~ e2 in vech space with equal norms: cos 0, ratio 1
        let h = SquareMat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let j = SquareMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        // vech(h) = (1,0,0), vech(j) = (0,1,0)
        assert!((scaled_cd(&h, &j, 0.5).unwrap() - 0.5).abs() < 1e-15);

        // h = 2j: cos 1, ratio 0.5 -> 0.25
        let j = SquareMat::from_rows(&[&[1.0, 0.5], &[0.5, 2.0]]);
        let h = j.scale(2.0);
        assert!((scaled_cd(&h, &j, 0.5).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn scaled_cd_zero_inputs_error() {
        let z = SquareMat::zeros(2);
        let i2 = SquareMat::identity(2);
        assert!(matches!(
            scaled_cd(&z, &i2, 0.5),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            scaled_cd(&i2, &z, 0.5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn scaled_cd_scale_and_swap_symmetric() {
        let h = SquareMat::from_rows(&[&[1.0, 0.3], &[0.3, 2.0]]);
        let j = SquareMat::from_rows(&[&[1.5, 0.1], &[0.1, 1.0]]);
        let base = scaled_cd(&h, &j, 0.5).unwrap();
        let scaled = scaled_cd(&h.scale(3.0), &j.scale(3.0), 0.5).unwrap();
        let swapped = scaled_cd(&j, &h, 0.5).unwrap();
        assert!((base - scaled).abs() < 1e-12);
        assert!((base - swapped).abs() < 1e-12);
    }
}
