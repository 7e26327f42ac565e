//! IMQ kernel Stein discrepancy (exact score) and its approximate version
//! AIKS (Monte Carlo score), with the constrained-support kernel k_R.
//!
//! The base kernel is the inverse multiquadric
//! `k(x, y) = (c^2 + |x - y|^2)^beta` with c > 0 and beta in (-1, 0). For
//! each coordinate j the Langevin Stein kernel is
//!
//! ```text
//! k0_j(x,y) = u_j(x) u_j(y) k + u_j(x) d/dy_j k + u_j(y) d/dx_j k + d2/dx_j dy_j k
//! ```
//!
//! and the discrepancy aggregates the per-coordinate weighted Gram sums
//! `w_j = sqrt(sum_{k,l} q_k k0_j(theta_k, theta_l) q_l)` with an L^p norm.
//! On a support with finite bounds the kernel is multiplied by
//! `prod (x_j - l_j)(y_j - l_j) prod (x_k - u_k)(y_k - u_k)`, which keeps it
//! a reproducing kernel and makes it vanish at the boundary.
//!
//! Gram evaluation tiles the upper triangle into fixed row blocks; blocks
//! are computed in parallel and reduced in block order, so results are
//! bitwise reproducible for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::model::{ParamVector, Support};
use crate::oracle::ExactPosterior;
use crate::samplers::SampleChain;
use crate::score::{unique_points, EstimateSet};

/// Radicands above this (negative) floor clamp to zero; anything lower is
/// reported as an error. Sized as ~100x the double-precision accumulation
/// error at n = 20,000 points.
pub const NEGATIVE_RADICAND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub c: f64,
    pub beta: f64,
    /// Exponent of the aggregating L^p norm.
    pub norm_p: f64,
    /// When set, coordinates with finite bounds engage the constrained
    /// kernel k_R.
    pub support: Option<Support>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            c: 1.0,
            beta: -0.5,
            norm_p: 2.0,
            support: None,
        }
    }
}

impl KernelConfig {
    /// Default kernel, constrained automatically if `support` has any
    /// finite bound.
    pub fn for_support(support: &Support) -> Self {
        KernelConfig {
            support: support.has_finite_bound().then(|| support.clone()),
            ..KernelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParam(format!("kernel c must be > 0, got {}", self.c)));
        }
        if !(self.beta > -1.0 && self.beta < 0.0) {
            return Err(Error::InvalidParam(format!(
                "kernel beta must be in (-1, 0), got {}",
                self.beta
            )));
        }
        if !(self.norm_p >= 1.0) {
            return Err(Error::InvalidParam(format!(
                "norm exponent must be >= 1, got {}",
                self.norm_p
            )));
        }
        Ok(())
    }

    fn aggregate(&self, w: &[f64]) -> f64 {
        if self.norm_p.is_infinite() {
            return w.iter().fold(0.0, |m: f64, &v| m.max(v));
        }
        let p = self.norm_p;
        w.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Base-kernel value and the coordinate-j partials needed by the Stein
/// kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub k: f64,
    /// d k / d x_j
    pub dx: f64,
    /// d k / d y_j
    pub dy: f64,
    /// d^2 k / d x_j d y_j
    pub dxdy: f64,
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// g^beta, g^(beta-1), g^(beta-2); beta = -1/2 goes through sqrt.
#[inline]
fn g_powers(g: f64, beta: f64) -> (f64, f64, f64) {
    if beta == -0.5 {
        let gb = 1.0 / g.sqrt();
        let gb1 = gb / g;
        (gb, gb1, gb1 / g)
    } else {
        let gb1 = g.powf(beta - 1.0);
        (gb1 * g, gb1, gb1 / g)
    }
}

/// Plain IMQ kernel and partials in coordinate j.
pub fn imq_kernel(x: &[f64], y: &[f64], j: usize, cfg: &KernelConfig) -> Result<KernelEval> {
    cfg.validate()?;
    if x.len() != y.len() || j >= x.len() {
        return Err(Error::DimensionMismatch(format!(
            "points of dim {} / {} with coordinate {j}",
            x.len(),
            y.len()
        )));
    }
    let beta = cfg.beta;
    let g = cfg.c * cfg.c + sq_dist(x, y);
    let (gb, gb1, gb2) = g_powers(g, beta);
    let d = x[j] - y[j];
    let dx = 2.0 * beta * d * gb1;
    Ok(KernelEval {
        k: gb,
        dx,
        dy: -dx,
        dxdy: -2.0 * beta * gb1 - 4.0 * beta * (beta - 1.0) * d * d * gb2,
    })
}

/// Per-coordinate boundary factor a_j(t) and its log-derivative
/// a_j'(t)/a_j(t) for the constrained kernel.
#[inline]
fn bound_factor(t: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let mut a = 1.0;
    let mut r = 0.0;
    if lo.is_finite() {
        let d = t - lo;
        if d <= 0.0 {
            return Err(Error::OutsideSupport {
                coord: usize::MAX,
                value: t,
                lo,
                hi,
            });
        }
        a *= d;
        r += 1.0 / d;
    }
    if hi.is_finite() {
        let d = t - hi;
        if d >= 0.0 {
            return Err(Error::OutsideSupport {
                coord: usize::MAX,
                value: t,
                lo,
                hi,
            });
        }
        a *= d;
        r += 1.0 / d;
    }
    Ok((a, r))
}

/// phi(x) = prod_j a_j(x_j) and the per-coordinate ratios a_j'/a_j.
fn point_factor(x: &[f64], support: &Support) -> Result<(f64, Vec<f64>)> {
    let mut phi = 1.0;
    let mut ratios = Vec::with_capacity(x.len());
    for (coord, (&t, iv)) in x.iter().zip(support.intervals()).enumerate() {
        let (a, r) = bound_factor(t, iv.lo, iv.hi).map_err(|e| match e {
            Error::OutsideSupport { value, lo, hi, .. } => Error::OutsideSupport {
                coord,
                value,
                lo,
                hi,
            },
            other => other,
        })?;
        phi *= a;
        ratios.push(r);
    }
    Ok((phi, ratios))
}

/// Constrained kernel k_R and partials in coordinate j; requires
/// `cfg.support` and points strictly inside the bounds.
pub fn constrained_kernel(x: &[f64], y: &[f64], j: usize, cfg: &KernelConfig) -> Result<KernelEval> {
    let support = cfg
        .support
        .as_ref()
        .ok_or_else(|| Error::Config("constrained kernel needs cfg.support".into()))?;
    if support.dim() != x.len() {
        return Err(Error::DimensionMismatch(
            "support dimension does not match points".into(),
        ));
    }
    let base = imq_kernel(x, y, j, cfg)?;
    let (phi_x, rx) = point_factor(x, support)?;
    let (phi_y, ry) = point_factor(y, support)?;
    let pp = phi_x * phi_y;
    Ok(KernelEval {
        k: base.k * pp,
        dx: pp * (base.dx + base.k * rx[j]),
        dy: pp * (base.dy + base.k * ry[j]),
        dxdy: pp * (base.dxdy + base.dx * ry[j] + base.dy * rx[j] + base.k * rx[j] * ry[j]),
    })
}

/// Kernel dispatch: constrained when the config carries a support.
pub fn kernel_eval(x: &[f64], y: &[f64], j: usize, cfg: &KernelConfig) -> Result<KernelEval> {
    match &cfg.support {
        Some(_) => constrained_kernel(x, y, j, cfg),
        None => imq_kernel(x, y, j, cfg),
    }
}

/// Stein kernel in coordinate j for a score function.
pub fn stein_kernel_j(
    x: &[f64],
    y: &[f64],
    j: usize,
    score: &dyn Fn(&[f64]) -> Vec<f64>,
    cfg: &KernelConfig,
) -> Result<f64> {
    let parts = kernel_eval(x, y, j, cfg)?;
    let ux = score(x)[j];
    let uy = score(y)[j];
    Ok(ux * uy * parts.k + ux * parts.dy + uy * parts.dx + parts.dxdy)
}

/// Per-coordinate Gram weights and the aggregate discrepancy.
#[derive(Debug, Clone, PartialEq)]
pub struct KsdResult {
    /// w_j = sqrt of the weighted Gram sum for coordinate j.
    pub w: Vec<f64>,
    /// The configured L^p aggregate of w.
    pub value: f64,
}

struct GramPoints<'a> {
    points: Vec<&'a [f64]>,
    weights: Vec<f64>,
    scores: Vec<&'a [f64]>,
    /// phi(x_i) per point (1 when unconstrained).
    phi: Vec<f64>,
    /// a_j'/a_j per point per coordinate (0 when unconstrained).
    ratios: Vec<Vec<f64>>,
}

fn prepare<'a>(
    points: &[&'a [f64]],
    weights: &'a [f64],
    scores: &'a [Vec<f64>],
    cfg: &KernelConfig,
) -> Result<GramPoints<'a>> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("KSD needs at least one point".into()));
    }
    if points.len() != weights.len() || points.len() != scores.len() {
        return Err(Error::DimensionMismatch(
            "points, weights and scores must have equal length".into(),
        ));
    }
    let dim = points[0].len();
    for (p, s) in points.iter().zip(scores) {
        if p.len() != dim || s.len() != dim {
            return Err(Error::DimensionMismatch(
                "inconsistent point or score dimension".into(),
            ));
        }
    }
    let (phi, ratios) = match &cfg.support {
        Some(support) => {
            if support.dim() != dim {
                return Err(Error::DimensionMismatch(
                    "kernel support dimension mismatch".into(),
                ));
            }
            let mut phis = Vec::with_capacity(points.len());
            let mut rats = Vec::with_capacity(points.len());
            for p in points {
                let (a, r) = point_factor(p, support)?;
                phis.push(a);
                rats.push(r);
            }
            (phis, rats)
        }
        None => (
            vec![1.0; points.len()],
            vec![vec![0.0; dim]; points.len()],
        ),
    };
    Ok(GramPoints {
        points: points.to_vec(),
        weights: weights.to_vec(),
        scores: scores.iter().map(|s| s.as_slice()).collect(),
        phi,
        ratios,
    })
}

/// Add q_k q_l k0_j(x_k, x_l) for all j into `acc`, doubling off-diagonal
/// pairs.
#[inline]
fn accumulate_pair(gp: &GramPoints<'_>, cfg: &KernelConfig, k: usize, l: usize, acc: &mut [f64]) {
    let (x, y) = (gp.points[k], gp.points[l]);
    let beta = cfg.beta;
    let g = cfg.c * cfg.c + sq_dist(x, y);
    let (gb, gb1, gb2) = g_powers(g, beta);
    let pp = gp.phi[k] * gp.phi[l];
    let pair_w = gp.weights[k] * gp.weights[l] * if k == l { 1.0 } else { 2.0 };
    for j in 0..x.len() {
        let d = x[j] - y[j];
        let dxk = 2.0 * beta * d * gb1;
        let dyk = -dxk;
        let dxdyk = -2.0 * beta * gb1 - 4.0 * beta * (beta - 1.0) * d * d * gb2;
        let (rx, ry) = (gp.ratios[k][j], gp.ratios[l][j]);
        let kk = gb * pp;
        let kdx = pp * (dxk + gb * rx);
        let kdy = pp * (dyk + gb * ry);
        let kdxdy = pp * (dxdyk + dxk * ry + dyk * rx + gb * rx * ry);
        let (ux, uy) = (gp.scores[k][j], gp.scores[l][j]);
        acc[j] += pair_w * (ux * uy * kk + ux * kdy + uy * kdx + kdxdy);
    }
}

const BLOCK_ROWS: usize = 64;

/// Raw weighted Gram sums per coordinate, cumulative at each boundary.
/// `boundaries` are ascending prefix lengths; entry t sums all pairs with
/// max index < boundaries[t].
fn gram_prefix_sums(
    gp: &GramPoints<'_>,
    cfg: &KernelConfig,
    boundaries: &[usize],
) -> Vec<Vec<f64>> {
    let dim = gp.points[0].len();
    // Split rows into blocks that never straddle a boundary.
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for &b in boundaries {
        while start < b {
            let end = (start + BLOCK_ROWS).min(b);
            blocks.push((start, end));
            start = end;
        }
    }
    let partials: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = vec![0.0; dim];
            for l in a..b {
                for k in 0..=l {
                    accumulate_pair(gp, cfg, k, l, &mut acc);
                }
            }
            acc
        })
        .collect();

    // Cumulative per-boundary totals, reduced in fixed block order with
    // pairwise sums per coordinate.
    let mut out = Vec::with_capacity(boundaries.len());
    let mut used = 0usize;
    let mut upto = 0usize;
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for &b in boundaries {
        while used < blocks.len() && blocks[used].1 <= b {
            for j in 0..dim {
                sums[j].push(partials[used][j]);
            }
            used += 1;
        }
        upto = upto.max(b);
        out.push((0..dim).map(|j| pairwise_sum(&sums[j])).collect());
    }
    out
}

fn result_from_sums(sums: &[f64], total_weight: f64, cfg: &KernelConfig) -> Result<KsdResult> {
    let scale = 1.0 / (total_weight * total_weight);
    let mut w = Vec::with_capacity(sums.len());
    for (j, &s) in sums.iter().enumerate() {
        let radicand = s * scale;
        if radicand < -NEGATIVE_RADICAND_TOL {
            return Err(Error::NegativeRadicand {
                coord: j,
                radicand,
            });
        }
        w.push(radicand.max(0.0).sqrt());
    }
    let value = cfg.aggregate(&w);
    Ok(KsdResult { w, value })
}

/// KSD over explicit points, weights, and per-point scores (no
/// deduplication).
pub fn ksd_with_scores(
    points: &[&[f64]],
    weights: &[f64],
    scores: &[Vec<f64>],
    cfg: &KernelConfig,
) -> Result<KsdResult> {
    let gp = prepare(points, weights, scores, cfg)?;
    let sums = gram_prefix_sums(&gp, cfg, &[points.len()]);
    let total_w = pairwise_sum(&gp.weights);
    result_from_sums(&sums[0], total_w, cfg)
}

/// KSD of a chain under an exact score. Identical chain points are merged
/// (summed weights, shared score), which leaves the value unchanged.
pub fn ksd(chain: &SampleChain, exact: &dyn ExactPosterior, cfg: &KernelConfig) -> Result<KsdResult> {
    let uniques = unique_points(chain);
    let scores: Vec<Vec<f64>> = uniques.iter().map(|(p, _)| exact.score(p)).collect();
    merged_ksd(chain, &uniques, scores, cfg)
}

/// AIKS: KSD with the estimated score u_hat substituted per unique point.
pub fn aiks(chain: &SampleChain, estimates: &EstimateSet, cfg: &KernelConfig) -> Result<KsdResult> {
    let uniques = unique_points(chain);
    let scores: Vec<Vec<f64>> = uniques
        .iter()
        .enumerate()
        .map(|(idx, (p, _))| {
            estimates
                .get(p)
                .map(|e| e.u_hat.clone())
                .ok_or(Error::MissingEstimate(idx))
        })
        .collect::<Result<_>>()?;
    merged_ksd(chain, &uniques, scores, cfg)
}

fn merged_ksd(
    chain: &SampleChain,
    uniques: &[(&ParamVector, usize)],
    scores: Vec<Vec<f64>>,
    cfg: &KernelConfig,
) -> Result<KsdResult> {
    // Merge weights by occurrence; chain weights are per index, so map each
    // index to its unique representative.
    let mut weight_map: std::collections::HashMap<crate::model::PointKey, f64> =
        std::collections::HashMap::new();
    for (point, &w) in chain.points().iter().zip(chain.weights()) {
        *weight_map.entry(point.key()).or_insert(0.0) += w;
    }
    let points: Vec<&[f64]> = uniques.iter().map(|(p, _)| p.values()).collect();
    let weights: Vec<f64> = uniques
        .iter()
        .map(|(p, _)| weight_map[&p.key()])
        .collect();
    ksd_with_scores(&points, &weights, &scores, cfg)
}

/// Score provider for prefix traces.
pub enum ScoreSource<'a> {
    Exact(&'a dyn ExactPosterior),
    Estimates(&'a EstimateSet),
}

impl ScoreSource<'_> {
    fn score(&self, idx: usize, point: &ParamVector) -> Result<Vec<f64>> {
        match self {
            ScoreSource::Exact(p) => Ok(p.score(point)),
            ScoreSource::Estimates(set) => set
                .get(point)
                .map(|e| e.u_hat.clone())
                .ok_or(Error::MissingEstimate(idx)),
        }
    }
}

/// KSD at each prefix length, sharing one Gram pass: the pairs of a longer
/// prefix extend those of a shorter one.
pub fn ksd_trace(
    chain: &SampleChain,
    source: ScoreSource<'_>,
    prefix_lengths: &[usize],
    cfg: &KernelConfig,
) -> Result<Vec<KsdResult>> {
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
    if sorted[0] == 0 || *sorted.last().unwrap() > chain.len() {
        return Err(Error::InvalidParam(format!(
            "prefix lengths must lie in 1..={}",
            chain.len()
        )));
    }
    // Scores per chain index; repeated points share the computation.
    let mut cache: std::collections::HashMap<crate::model::PointKey, Vec<f64>> =
        std::collections::HashMap::new();
    let mut scores = Vec::with_capacity(chain.len());
    for (idx, point) in chain.points().iter().enumerate() {
        let s = match cache.get(&point.key()) {
            Some(s) => s.clone(),
            None => {
                let s = source.score(idx, point)?;
                cache.insert(point.key(), s.clone());
                s
            }
        };
        scores.push(s);
    }
    let points: Vec<&[f64]> = chain.points().iter().map(|p| p.values()).collect();
    let gp = prepare(&points, chain.weights(), &scores, cfg)?;
    let sums = gram_prefix_sums(&gp, cfg, &sorted);
    let mut out = Vec::with_capacity(sorted.len());
    for (t, &len) in sorted.iter().enumerate() {
        let total_w = pairwise_sum(&gp.weights[..len]);
        out.push(result_from_sums(&sums[t], total_w, cfg)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SquareMat;
    use crate::model::Interval;
    use crate::samplers::{ChainMeta, SamplerConfig, SamplerKind};
    use rand::Rng;

    /// Standard 1D Gaussian target: u(x) = -x.
    struct StdNormal;
    impl ExactPosterior for StdNormal {
        fn score(&self, theta: &ParamVector) -> Vec<f64> {
            vec![-theta.values()[0]]
        }
        fn hessian(&self, _theta: &ParamVector) -> SquareMat {
            SquareMat::diag(&[-1.0])
        }
    }

    fn meta() -> ChainMeta {
        ChainMeta {
            model: "test".into(),
            sampler: SamplerConfig {
                kind: SamplerKind::Mh,
                iterations: 1,
                inner_updates: 1,
                proposal_scale: vec![1.0],
                seed: 0,
                thinning: 1,
                burn_in: 0,
            },
            accept_rate: None,
            wall_clock_sec: 0.0,
        }
    }

    fn chain_1d(values: &[f64]) -> SampleChain {
        let points = values
            .iter()
            .map(|&v| ParamVector::unconstrained(vec![v]).unwrap())
            .collect();
        SampleChain::uniform(points, meta()).unwrap()
    }

    #[test]
    fn kernel_at_identical_points() {
        let cfg = KernelConfig::default();
        let e = imq_kernel(&[0.3, -0.2], &[0.3, -0.2], 0, &cfg).unwrap();
        assert_eq!(e.k, 1.0);
        assert_eq!(e.dx, 0.0);
        assert_eq!(e.dy, 0.0);
        assert_eq!(e.dxdy, 1.0); // -2 beta = 1 at beta = -1/2, c = 1
    }

    #[test]
    fn kernel_value_at_distance_sqrt3() {
        let cfg = KernelConfig::default();
        let e = imq_kernel(&[3.0f64.sqrt()], &[0.0], 0, &cfg).unwrap();
        assert!((e.k - 0.5).abs() < 1e-15); // (1 + 3)^(-1/2)
    }

    #[test]
    fn kernel_partials_match_finite_differences() {
        let mut rng = crate::rng::stream_rng(1, crate::rng::StreamDomain::Inner, 0);
        let cfg = KernelConfig {
            beta: -0.3,
            c: 1.4,
            ..KernelConfig::default()
        };
        let h = 1e-5;
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            for j in 0..3 {
                let e = imq_kernel(&x, &y, j, &cfg).unwrap();
                let kf = |x: &[f64], y: &[f64]| imq_kernel(x, y, 0, &cfg).unwrap().k;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd_dx = (kf(&xp, &y) - kf(&xm, &y)) / (2.0 * h);
                assert!((e.dx - fd_dx).abs() <= 1e-6 * fd_dx.abs().max(1e-3), "dx");
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[j] += h;
                ym[j] -= h;
                let fd_dy = (kf(&x, &yp) - kf(&x, &ym)) / (2.0 * h);
                assert!((e.dy - fd_dy).abs() <= 1e-6 * fd_dy.abs().max(1e-3), "dy");
                let fd_dxdy = (kf(&xp, &yp) - kf(&xp, &ym) - kf(&xm, &yp) + kf(&xm, &ym))
                    / (4.0 * h * h);
                assert!(
                    (e.dxdy - fd_dxdy).abs() <= 1e-5 * fd_dxdy.abs().max(1e-2),
                    "dxdy: {} vs {}",
                    e.dxdy,
                    fd_dxdy
                );
            }
        }
    }

    fn unit_support() -> Support {
        Support::new(vec![Interval::UNIT]).unwrap()
    }

    #[test]
    fn constrained_kernel_1d_value() {
        let cfg = KernelConfig {
            support: Some(unit_support()),
            ..KernelConfig::default()
        };
        let e = constrained_kernel(&[0.5], &[0.5], 0, &cfg).unwrap();
        assert!((e.k - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn constrained_kernel_infinite_bounds_reduces_to_plain() {
        let cfg = KernelConfig {
            support: Some(Support::unbounded(2)),
            ..KernelConfig::default()
        };
        let x = [0.4, -1.0];
        let y = [-0.3, 0.7];
        let plain = imq_kernel(&x, &y, 1, &cfg).unwrap();
        let constrained = constrained_kernel(&x, &y, 1, &cfg).unwrap();
        assert_eq!(plain, constrained);
    }

    #[test]
    fn constrained_kernel_rejects_boundary_points() {
        let cfg = KernelConfig {
            support: Some(unit_support()),
            ..KernelConfig::default()
        };
        assert!(constrained_kernel(&[0.0], &[0.5], 0, &cfg).is_err());
        assert!(constrained_kernel(&[0.5], &[1.0], 0, &cfg).is_err());
        assert!(constrained_kernel(&[-0.2], &[0.5], 0, &cfg).is_err());
    }

    #[test]
    fn constrained_partials_match_finite_differences() {
        let mut rng = crate::rng::stream_rng(2, crate::rng::StreamDomain::Inner, 0);
        let cfg = KernelConfig {
            support: Some(unit_support()),
            ..KernelConfig::default()
        };
        let h = 1e-5;
        for _ in 0..50 {
            let x = vec![0.1 + 0.8 * rng.gen::<f64>()];
            let y = vec![0.1 + 0.8 * rng.gen::<f64>()];
            let e = constrained_kernel(&x, &y, 0, &cfg).unwrap();
            let kf = |x: &[f64], y: &[f64]| constrained_kernel(x, y, 0, &cfg).unwrap().k;
            let (xp, xm) = (vec![x[0] + h], vec![x[0] - h]);
            let (yp, ym) = (vec![y[0] + h], vec![y[0] - h]);
            let fd_dx = (kf(&xp, &y) - kf(&xm, &y)) / (2.0 * h);
            assert!((e.dx - fd_dx).abs() <= 1e-6 * fd_dx.abs().max(1e-3));
            let fd_dxdy =
                (kf(&xp, &yp) - kf(&xp, &ym) - kf(&xm, &yp) + kf(&xm, &ym)) / (4.0 * h * h);
            assert!(
                (e.dxdy - fd_dxdy).abs() <= 1e-5 * fd_dxdy.abs().max(1e-2),
                "{} vs {}",
                e.dxdy,
                fd_dxdy
            );
        }
    }

    #[test]
    fn stein_kernel_at_gaussian_mode() {
        let cfg = KernelConfig::default();
        let score = |x: &[f64]| vec![-x[0]];
        let v = stein_kernel_j(&[0.0], &[0.0], 0, &score, &cfg).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn stein_kernel_matches_independent_evaluation() {
        // Frozen from a term-by-term evaluation of the four-term formula.
        let cfg = KernelConfig::default();
        let score = |x: &[f64]| vec![-x[0]];
        let v = stein_kernel_j(&[1.0], &[-1.0], 0, &score, &cfg).unwrap();
        assert!((v - (-0.9302042786399125)).abs() < 1e-15, "{v}");
    }

    #[test]
    fn stein_kernel_symmetric_in_arguments() {
        let cfg = KernelConfig::default();
        let score = |x: &[f64]| vec![-x[0], -0.5 * x[1]];
        let mut rng = crate::rng::stream_rng(3, crate::rng::StreamDomain::Inner, 0);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            for j in 0..2 {
                let a = stein_kernel_j(&x, &y, j, &score, &cfg).unwrap();
                let b = stein_kernel_j(&y, &x, j, &score, &cfg).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_at_mode_gives_unit_ksd() {
        let chain = chain_1d(&[0.0]);
        let r = ksd(&chain, &StdNormal, &KernelConfig::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.w, vec![1.0]);
    }

    #[test]
    fn two_point_chain_matches_hand_expanded_gram() {
        // Frozen from a direct 2x2 evaluation.
        let chain = chain_1d(&[-1.0, 1.0]);
        let r = ksd(&chain, &StdNormal, &KernelConfig::default()).unwrap();
        assert!((r.value - 0.7313671175818911).abs() < 1e-14, "{}", r.value);

        let chain = chain_1d(&[-0.7, 0.7]);
        let r = ksd(&chain, &StdNormal, &KernelConfig::default()).unwrap();
        assert!((r.value - 0.5597359477321093).abs() < 1e-14, "{}", r.value);
    }

    #[test]
    fn permutation_invariance() {
        let vals: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut shuffled = vals.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let a = ksd(&chain_1d(&vals), &StdNormal, &KernelConfig::default()).unwrap();
        let b = ksd(&chain_1d(&shuffled), &StdNormal, &KernelConfig::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn weight_consistency_under_duplication() {
        // Duplicating every point and halving weights leaves KSD unchanged.
        let vals: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).cos()).collect();
        let base = ksd(&chain_1d(&vals), &StdNormal, &KernelConfig::default()).unwrap();

        let doubled: Vec<f64> = vals.iter().chain(vals.iter()).cloned().collect();
        let dup = ksd(&chain_1d(&doubled), &StdNormal, &KernelConfig::default()).unwrap();
        assert!((base.value - dup.value).abs() < 1e-12);

        // and the merged/raw paths agree
        let points: Vec<ParamVector> = doubled
            .iter()
            .map(|&v| ParamVector::unconstrained(vec![v]).unwrap())
            .collect();
        let raw_points: Vec<&[f64]> = points.iter().map(|p| p.values()).collect();
        let scores: Vec<Vec<f64>> = points.iter().map(|p| StdNormal.score(p)).collect();
        let w = vec![1.0 / doubled.len() as f64; doubled.len()];
        let raw = ksd_with_scores(&raw_points, &w, &scores, &KernelConfig::default()).unwrap();
        assert!((raw.value - dup.value).abs() < 1e-12);
    }

    #[test]
    fn trace_final_entry_matches_full_ksd() {
        let vals: Vec<f64> = (0..30).map(|i| (i as f64 * 0.31).sin() * 1.3).collect();
        let chain = chain_1d(&vals);
        let full = ksd(&chain, &StdNormal, &KernelConfig::default()).unwrap();
        let trace = ksd_trace(
            &chain,
            ScoreSource::Exact(&StdNormal),
            &[10, 20, 30],
            &KernelConfig::default(),
        )
        .unwrap();
        assert!((trace[2].value - full.value).abs() < 1e-12);
        // prefix values match restricted chains
        let pre = chain.prefix(10).unwrap();
        let direct = ksd(&pre, &StdNormal, &KernelConfig::default()).unwrap();
        assert!((trace[0].value - direct.value).abs() < 1e-12);
    }

    #[test]
    fn gram_block_determinism_across_worker_counts() {
        let vals: Vec<f64> = (0..200).map(|i| (i as f64 * 0.123).sin() * 2.0).collect();
        let chain = chain_1d(&vals);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ksd(&chain, &StdNormal, &KernelConfig::default()).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn config_validation() {
        let mut cfg = KernelConfig::default();
        cfg.c = 0.0;
        assert!(cfg.validate().is_err());
        cfg = KernelConfig::default();
        cfg.beta = -1.0;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
    }
}
