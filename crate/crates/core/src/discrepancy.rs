//! The discrepancy divergence between two empirical sample sets in its two
//! implementable closed forms:
//!
//! - squared loss with unit-norm linear hypotheses, where the value equals
//!   twice the largest-magnitude eigenvalue of the covariance difference
//!   ([`empirical_discrepancy`]), and
//! - 0-1 loss with linear separators in two dimensions, computed exactly by
//!   enumerating every halfplane labeling of the pooled points
//!   ([`disc_zero_one_linear_2d`]).

use alloc::vec::Vec;

use crate::linalg::{self, uncentered_covariance, SymMatrix};
use crate::matrix::SampleMatrix;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Largest per-side point count the exhaustive 0-1 computer accepts.
const EXHAUSTIVE_LIMIT: usize = 64;

/// Discrepancy value together with the spectral data needed to
/// back-propagate through it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscResult {
    /// `2 · |spectral|`, the discrepancy itself.
    pub value: f64,
    /// Signed dominant eigenvalue of the covariance difference.
    pub spectral: f64,
    /// Unit eigenvector at the dominant eigenvalue.
    pub direction: Vec<f64>,
    /// `sign(spectral)`, defined as `+1` when `spectral` is zero.
    pub sign: f64,
    pub converged: bool,
}

/// Covariance difference `M = (1/n) XgᵀXg − (1/m) XrᵀXr`.
///
/// Generated minus real; uncentered second moments, no mean subtraction.
pub fn cov_diff(xr: &SampleMatrix, xg: &SampleMatrix) -> Result<SymMatrix> {
    if xr.cols() != xg.cols() {
        return Err(Error::DimMismatch(xr.cols(), xg.cols()));
    }
    uncentered_covariance(xg).sub(&uncentered_covariance(xr))
}

/// Discrepancy under squared loss and unit-norm linear hypotheses:
/// `2 ‖ (1/n) XgᵀXg − (1/m) XrᵀXr ‖₂`, with the dominant eigenvector and its
/// sign retained for gradient use.
pub fn empirical_discrepancy(xr: &SampleMatrix, xg: &SampleMatrix) -> Result<DiscResult> {
    let m = cov_diff(xr, xg)?;
    let e = linalg::dominant_eigpair_default(&m);
    Ok(DiscResult {
        value: 2.0 * e.value.abs(),
        spectral: e.value,
        direction: e.vector,
        sign: if e.value < 0.0 { -1.0 } else { 1.0 },
        converged: e.converged,
    })
}

/// Mean squared loss `Ê_X (hᵀx − fᵀx)² = uᵀ Cov(X) u` with `u = h − f`.
fn pair_loss(cov: &SymMatrix, h: &[f64], f: &[f64]) -> f64 {
    let u: Vec<f64> = h.iter().zip(f).map(|(a, b)| a - b).collect();
    cov.quad_form(&u)
}

/// Worst-case slack of the trained-on-generated guarantee over random
/// hypothesis pairs: the minimum over pairs `(h, f)` of
/// `Ê_Xg ℓ(h,f) + disc(Xr, Xg) − Ê_Xr ℓ(h,f)` under squared loss.
///
/// Pairs are unit-norm and drawn sign-aligned (`⟨h, f⟩ ≥ 0`, so
/// `‖h − f‖ ≤ √2`); over that class the reported discrepancy is the exact
/// supremum of the loss difference, which keeps the slack nonnegative up to
/// eigensolver tolerance.
pub fn theorem1_gap(
    xr: &SampleMatrix,
    xg: &SampleMatrix,
    trials: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1"));
    }
    let disc = empirical_discrepancy(xr, xg)?;
    let cov_r = uncentered_covariance(xr);
    let cov_g = uncentered_covariance(xg);
    let d = xr.cols();
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let h = rng.unit_vector(d);
        let mut f = rng.unit_vector(d);
        if h.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            for x in &mut f {
                *x = -*x;
            }
        }
        let slack = pair_loss(&cov_g, &h, &f) + disc.value - pair_loss(&cov_r, &h, &f);
        min_slack = min_slack.min(slack);
    }
    Ok(min_slack)
}

/// Exact 0-1-loss discrepancy over linear separators for 2-D point sets.
///
/// The supremum over separator pairs `(h, h')` of
/// `|Ê_P 1[h≠h'] − Ê_Q 1[h≠h']|` is attained on the finite set of halfplane
/// labelings of the pooled points. Labelings are enumerated from lines
/// through every pair of pooled points (both orientations, with an
/// infinitesimal offset to each side) plus the all-inside/all-outside
/// extremes, and the maximum is taken over all labeling pairs. The
/// disagreement region of a pair is the symmetric difference of the two
/// halfplanes, i.e. the XOR of their labelings.
pub fn disc_zero_one_linear_2d(p: &SampleMatrix, q: &SampleMatrix) -> Result<f64> {
    if p.cols() != 2 || q.cols() != 2 {
        return Err(Error::DimMismatch(p.cols().max(q.cols()), 2));
    }
    if p.rows() > EXHAUSTIVE_LIMIT || q.rows() > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveSizeLimit(
            p.rows().max(q.rows()),
            EXHAUSTIVE_LIMIT,
        ));
    }
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(p.rows() + q.rows());
    for i in 0..p.rows() {
        points.push([p.get(i, 0), p.get(i, 1)]);
    }
    for i in 0..q.rows() {
        points.push([q.get(i, 0), q.get(i, 1)]);
    }
    let labelings = halfplane_labelings(&points);
    let mask_p: u128 = (0..p.rows()).fold(0, |m, i| m | (1u128 << i));
    let mask_q: u128 = (0..q.rows()).fold(0, |m, i| m | (1u128 << (p.rows() + i)));
    Ok(max_over_labeling_pairs(
        &labelings,
        mask_p,
        p.rows(),
        mask_q,
        q.rows(),
    ))
}

/// All halfplane labelings of `points` induced by lines through point pairs
/// (each side, each orientation) plus the two trivial labelings.
fn halfplane_labelings(points: &[[f64; 2]]) -> Vec<u128> {
    let n = points.len();
    let full: u128 = if n == 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    };
    let mut labels: Vec<u128> = alloc::vec![0, full];
    let mut proj = alloc::vec![0.0f64; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[j][0] - points[i][0];
            let dy = points[j][1] - points[i][1];
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            // normal to the line through points i and j
            let nv = [-dy, dx];
            for (k, pt) in points.iter().enumerate() {
                proj[k] = nv[0] * pt[0] + nv[1] * pt[1];
            }
            let t0 = proj[i];
            let mut above = 0u128;
            let mut above_or_on = 0u128;
            for (k, &pk) in proj.iter().enumerate() {
                if pk > t0 {
                    above |= 1u128 << k;
                }
                if pk >= t0 {
                    above_or_on |= 1u128 << k;
                }
            }
            // offset to each side of the line, and both orientations
            labels.push(above);
            labels.push(above_or_on);
            labels.push(full ^ above);
            labels.push(full ^ above_or_on);
        }
    }
    labels.sort_unstable();
    labels.dedup();
    labels
}

fn max_over_labeling_pairs(
    labelings: &[u128],
    mask_p: u128,
    np: usize,
    mask_q: u128,
    nq: usize,
) -> f64 {
    let inv_p = 1.0 / np as f64;
    let inv_q = 1.0 / nq as f64;
    let mut best = 0.0f64;
    for (i, &a) in labelings.iter().enumerate() {
        for &b in &labelings[i..] {
            let xor = a ^ b;
            let fp = (xor & mask_p).count_ones() as f64 * inv_p;
            let fq = (xor & mask_q).count_ones() as f64 * inv_q;
            best = best.max((fp - fq).abs());
        }
    }
    best
}
