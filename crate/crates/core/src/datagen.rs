//! Toy ground-truth distributions, latent noise, and the mode-limited base
//! generators used by the ensemble experiment.

use alloc::vec::Vec;

use crate::matrix::SampleMatrix;
use crate::rng::RngStream;
use crate::{Error, Result};

/// A mixture of `components` isotropic Gaussians with means spaced uniformly
/// on a circle of the given radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSpec {
    pub components: usize,
    pub radius: f64,
    pub sigma: f64,
}

impl RingSpec {
    pub fn new(components: usize, radius: f64, sigma: f64) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidParam("ring needs at least one component"));
        }
        if radius <= 0.0 || sigma <= 0.0 || !radius.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidParam(
                "ring radius and sigma must be positive",
            ));
        }
        Ok(RingSpec {
            components,
            radius,
            sigma,
        })
    }

    /// Mean of component `k`: `r·(cos 2πk/p, sin 2πk/p)`.
    pub fn mean(&self, k: usize) -> [f64; 2] {
        let angle = 2.0 * core::f64::consts::PI * k as f64 / self.components as f64;
        [
            self.radius * libm::cos(angle),
            self.radius * libm::sin(angle),
        ]
    }
}

impl Default for RingSpec {
    /// Nine well-separated modes; the likelihood gap between single-mode and
    /// full-mixture models is then large.
    fn default() -> Self {
        RingSpec {
            components: 9,
            radius: 1.0,
            sigma: 0.05,
        }
    }
}

/// Anything that can draw an i.i.d. batch of fixed-dimension samples.
pub trait SampleSource {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix;
}

/// Draw `n` ring samples; components chosen uniformly. Samples are NOT
/// clipped to the unit ball (density evaluation needs unclipped points);
/// rescale with [`rescale_to_unit_ball`] before feeding the discrepancy.
pub fn sample_ring(spec: &RingSpec, n: usize, rng: &mut RngStream) -> SampleMatrix {
    sample_modes(spec, &(0..spec.components).collect::<Vec<_>>(), n, rng)
}

fn sample_modes(spec: &RingSpec, modes: &[usize], n: usize, rng: &mut RngStream) -> SampleMatrix {
    debug_assert!(n >= 1);
    let mut data = Vec::with_capacity(n * 2);
    for _ in 0..n {
        let k = modes[rng.next_index(modes.len())];
        let mean = spec.mean(k);
        data.push(mean[0] + spec.sigma * rng.next_normal());
        data.push(mean[1] + spec.sigma * rng.next_normal());
    }
    SampleMatrix::new(n, 2, data).expect("finite by construction")
}

/// Log density of the ring mixture at `x`, stabilized by a max-shift.
pub fn ring_log_density(spec: &RingSpec, x: [f64; 2]) -> f64 {
    let inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let mut exponents = Vec::with_capacity(spec.components);
    let mut max_e = f64::NEG_INFINITY;
    for k in 0..spec.components {
        let m = spec.mean(k);
        let dx = x[0] - m[0];
        let dy = x[1] - m[1];
        let e = -(dx * dx + dy * dy) * inv2s2;
        max_e = max_e.max(e);
        exponents.push(e);
    }
    let sum: f64 = exponents.iter().map(|&e| libm::exp(e - max_e)).sum();
    max_e + libm::log(sum / spec.components as f64)
        - libm::log(2.0 * core::f64::consts::PI * spec.sigma * spec.sigma)
}

impl SampleSource for RingSpec {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix {
        sample_ring(self, n, rng)
    }
}

/// Samples only from a listed subset of ring components, uniformly over the
/// subset; the stand-in "pre-trained generators" for the ensemble toy.
#[derive(Debug, Clone)]
pub struct ModeLimitedSampler {
    spec: RingSpec,
    modes: Vec<usize>,
}

impl ModeLimitedSampler {
    pub fn new(spec: RingSpec, modes: Vec<usize>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParam("mode subset must be nonempty"));
        }
        if modes.iter().any(|&m| m >= spec.components) {
            return Err(Error::InvalidParam("mode index out of range"));
        }
        Ok(ModeLimitedSampler { spec, modes })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Exact probability this sampler assigns to each ring component.
    pub fn mode_weights(&self) -> Vec<f64> {
        let mut w = alloc::vec![0.0; self.spec.components];
        for &m in &self.modes {
            w[m] += 1.0 / self.modes.len() as f64;
        }
        w
    }
}

impl SampleSource for ModeLimitedSampler {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix {
        sample_modes(&self.spec, &self.modes, n, rng)
    }
}

/// Isotropic Gaussian scaled by a constant; doubles as latent noise and as
/// the same-distribution source for the finite-sample decay probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCloud {
    pub dim: usize,
    pub scale: f64,
}

impl SampleSource for GaussianCloud {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix {
        let data = (0..n * self.dim)
            .map(|_| self.scale * rng.next_normal())
            .collect();
        SampleMatrix::new(n, self.dim, data).expect("finite by construction")
    }
}

/// Uniform on `[-half_width, half_width]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformCube {
    pub dim: usize,
    pub half_width: f64,
}

impl SampleSource for UniformCube {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix {
        let data = (0..n * self.dim)
            .map(|_| rng.uniform(-self.half_width, self.half_width))
            .collect();
        SampleMatrix::new(n, self.dim, data).expect("finite by construction")
    }
}

/// Samples from a weighted mixture of sources: draw a component index from
/// the weights, then one sample from that component.
pub struct MixtureSource<'a> {
    sources: Vec<&'a dyn SampleSource>,
    cumulative: Vec<f64>,
}

impl<'a> MixtureSource<'a> {
    pub fn new(sources: Vec<&'a dyn SampleSource>, weights: &[f64]) -> Result<Self> {
        if sources.is_empty() || sources.len() != weights.len() {
            return Err(Error::DimMismatch(sources.len(), weights.len()));
        }
        let dim = sources[0].dim();
        if sources.iter().any(|s| s.dim() != dim) {
            return Err(Error::InvalidParam("mixture sources must share dim"));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidParam("mixture weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParam("mixture weights must not all be zero"));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(MixtureSource {
            sources,
            cumulative,
        })
    }
}

impl SampleSource for MixtureSource<'_> {
    fn dim(&self) -> usize {
        self.sources[0].dim()
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix {
        let dim = self.dim();
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let u = rng.next_f64();
            let k = self
                .cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.sources.len() - 1);
            let row = self.sources[k].sample(1, rng);
            data.extend_from_slice(row.data());
        }
        SampleMatrix::new(n, dim, data).expect("finite by construction")
    }
}

/// A source whose draws are multiplied by a fixed factor.
pub struct ScaledSource<'a> {
    pub inner: &'a dyn SampleSource,
    pub factor: f64,
}

impl SampleSource for ScaledSource<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> SampleMatrix {
        self.inner.sample(n, rng).scaled(self.factor)
    }
}

/// Divide every entry by `bound`: a fixed global scale into the unit ball,
/// not a per-point normalization, so second-moment structure is preserved up
/// to `1/bound²`. Callers pick a bound at least the max row norm.
pub fn rescale_to_unit_ball(x: &SampleMatrix, bound: f64) -> Result<SampleMatrix> {
    if bound.is_nan() || bound <= 0.0 {
        return Err(Error::InvalidParam("rescale bound must be positive"));
    }
    let data = x.data().iter().map(|v| v / bound).collect();
    SampleMatrix::new(x.rows(), x.cols(), data)
}

/// Gaussian-bump features centered at the ring component means:
/// `φ_k(x) = exp(−‖x−μ_k‖²/(2·bandwidth²))`.
///
/// A fixed nonlinear embedding for the ensemble toy: with well-separated
/// modes the uncentered second moment of `φ(X)` is nearly diagonal with the
/// component occupancies on the diagonal, so matching second moments in
/// feature space matches mode proportions.
pub fn ring_rbf_features(
    spec: &RingSpec,
    x: &SampleMatrix,
    bandwidth: f64,
) -> Result<SampleMatrix> {
    if x.cols() != 2 {
        return Err(Error::DimMismatch(x.cols(), 2));
    }
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(Error::InvalidParam("feature bandwidth must be positive"));
    }
    let p = spec.components;
    let inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut data = Vec::with_capacity(x.rows() * p);
    for r in 0..x.rows() {
        let row = x.row(r);
        for k in 0..p {
            let m = spec.mean(k);
            let dx = row[0] - m[0];
            let dy = row[1] - m[1];
            data.push(libm::exp(-(dx * dx + dy * dy) * inv2b2));
        }
    }
    SampleMatrix::new(x.rows(), p, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::empirical_discrepancy;
    use alloc::vec;

    #[test]
    fn degenerate_sigma_collapses_to_mean() {
        let spec = RingSpec::new(1, 1.0, 1e-12).unwrap();
        let mut rng = RngStream::new(1);
        let x = sample_ring(&spec, 50, &mut rng);
        for i in 0..x.rows() {
            assert!((x.get(i, 0) - 1.0).abs() < 1e-10);
            assert!(x.get(i, 1).abs() < 1e-10);
        }
    }

    #[test]
    fn four_component_means() {
        let spec = RingSpec::new(4, 1.0, 0.05).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (k, e) in expect.iter().enumerate() {
            let m = spec.mean(k);
            assert!((m[0] - e[0]).abs() < 1e-12);
            assert!((m[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_statistics_at_scale() {
        let spec = RingSpec::default();
        let mut rng = RngStream::new(2);
        let n = 100_000;
        let x = sample_ring(&spec, n, &mut rng);
        let (mut mx, mut my) = (0.0, 0.0);
        let mut counts = vec![0usize; spec.components];
        for i in 0..n {
            mx += x.get(i, 0);
            my += x.get(i, 1);
            // nearest component
            let mut best = (f64::INFINITY, 0);
            for k in 0..spec.components {
                let m = spec.mean(k);
                let d2 = (x.get(i, 0) - m[0]) * (x.get(i, 0) - m[0])
                    + (x.get(i, 1) - m[1]) * (x.get(i, 1) - m[1]);
                if d2 < best.0 {
                    best = (d2, k);
                }
            }
            counts[best.1] += 1;
        }
        // mean concentrates at the origin like sigma_eff/sqrt(n)
        let bound = 3.0 * 1.0 / libm::sqrt(n as f64);
        assert!((mx / n as f64).abs() < bound, "mean x {}", mx / n as f64);
        assert!((my / n as f64).abs() < bound, "mean y {}", my / n as f64);
        let expected = n / spec.components;
        let tol = (4.0 * libm::sqrt(n as f64)) as usize;
        for (k, &c) in counts.iter().enumerate() {
            assert!(
                c.abs_diff(expected) < tol,
                "component {k}: count {c} vs {expected}"
            );
        }
    }

    #[test]
    fn log_density_peak_single_component() {
        let spec = RingSpec::new(1, 1.0, 0.3).unwrap();
        let peak = ring_log_density(&spec, [1.0, 0.0]);
        let expect = -libm::log(2.0 * core::f64::consts::PI * 0.3 * 0.3);
        assert!((peak - expect).abs() < 1e-12);
    }

    #[test]
    fn log_density_rotation_symmetry() {
        let spec = RingSpec::default();
        let angle = 2.0 * core::f64::consts::PI / spec.components as f64;
        let (c, s) = (libm::cos(angle), libm::sin(angle));
        let mut rng = RngStream::new(3);
        for _ in 0..20 {
            let x = [rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)];
            let rx = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
            let a = ring_log_density(&spec, x);
            let b = ring_log_density(&spec, rx);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn log_density_integrates_to_one() {
        // quadrature over a grid covering the mixture mass
        let spec = RingSpec::new(5, 1.0, 0.15).unwrap();
        let lim = spec.radius + 6.0 * spec.sigma;
        let steps = 400;
        let h = 2.0 * lim / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let x = -lim + (i as f64 + 0.5) * h;
                let y = -lim + (j as f64 + 0.5) * h;
                integral += libm::exp(ring_log_density(&spec, [x, y])) * h * h;
            }
        }
        assert!((integral - 1.0).abs() < 1e-3, "integral {integral}");
    }

    #[test]
    fn mode_limited_single_mode_stays_close() {
        let spec = RingSpec::default();
        let sampler = ModeLimitedSampler::new(spec.clone(), vec![0]).unwrap();
        let mut rng = RngStream::new(4);
        let x = sampler.sample(1000, &mut rng);
        let mean = spec.mean(0);
        for i in 0..x.rows() {
            let dx = x.get(i, 0) - mean[0];
            let dy = x.get(i, 1) - mean[1];
            assert!(libm::sqrt(dx * dx + dy * dy) <= 5.0 * spec.sigma);
        }
    }

    #[test]
    fn mode_limited_all_modes_matches_ring_radius_marginal() {
        // two-sample KS statistic on the radius marginal
        let spec = RingSpec::default();
        let sampler =
            ModeLimitedSampler::new(spec.clone(), (0..spec.components).collect()).unwrap();
        let mut rng = RngStream::new(5);
        let n = 20_000;
        let a = sample_ring(&spec, n, &mut rng);
        let b = sampler.sample(n, &mut rng);
        let radius = |m: &SampleMatrix| -> Vec<f64> {
            let mut r: Vec<f64> = (0..m.rows()).map(|i| m.row_norm(i)).collect();
            r.sort_by(|x, y| x.total_cmp(y));
            r
        };
        let ra = radius(&a);
        let rb = radius(&b);
        let mut ks = 0.0f64;
        let (mut i, mut j) = (0, 0);
        while i < n && j < n {
            if ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn disjoint_mode_subsets_have_separated_samples() {
        let spec = RingSpec::default();
        let a = ModeLimitedSampler::new(spec.clone(), vec![0, 1, 2, 3]).unwrap();
        let b = ModeLimitedSampler::new(spec.clone(), vec![4, 5, 6, 7, 8]).unwrap();
        let mut rng = RngStream::new(6);
        let xa = a.sample(1000, &mut rng);
        let xb = b.sample(1000, &mut rng);
        let d = empirical_discrepancy(&xa, &xb).unwrap();
        assert!(d.value >= 0.1, "disc {}", d.value);
    }

    #[test]
    fn mode_limited_rejects_bad_subsets() {
        let spec = RingSpec::default();
        assert!(ModeLimitedSampler::new(spec.clone(), vec![]).is_err());
        assert!(ModeLimitedSampler::new(spec, vec![9]).is_err());
    }

    #[test]
    fn samplers_are_seed_deterministic() {
        let spec = RingSpec::default();
        let mut r1 = RngStream::new(7);
        let mut r2 = RngStream::new(7);
        assert_eq!(
            sample_ring(&spec, 64, &mut r1),
            sample_ring(&spec, 64, &mut r2)
        );
        let g = GaussianCloud { dim: 3, scale: 0.5 };
        let mut r1 = RngStream::new(8);
        let mut r2 = RngStream::new(8);
        assert_eq!(g.sample(16, &mut r1), g.sample(16, &mut r2));
    }

    #[test]
    fn rescale_bounds_norms_and_preserves_structure() {
        let spec = RingSpec::default();
        let mut rng = RngStream::new(9);
        let x = sample_ring(&spec, 500, &mut rng);
        let bound = x.max_row_norm();
        let y = rescale_to_unit_ball(&x, bound).unwrap();
        assert!(y.max_row_norm() <= 1.0 + 1e-12);
        // fixed global scale: entries divide exactly
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(*b, a / bound);
        }
        assert!(rescale_to_unit_ball(&x, 0.0).is_err());
    }

    #[test]
    fn rbf_features_separate_modes() {
        let spec = RingSpec::default();
        let mut rng = RngStream::new(10);
        let sampler = ModeLimitedSampler::new(spec.clone(), vec![3]).unwrap();
        let x = sampler.sample(100, &mut rng);
        let phi = ring_rbf_features(&spec, &x, 2.0 * spec.sigma).unwrap();
        for r in 0..phi.rows() {
            for k in 0..spec.components {
                if k == 3 {
                    assert!(phi.get(r, k) > 0.05, "own-mode feature too small");
                } else {
                    assert!(phi.get(r, k) < 1e-6, "cross-mode feature too large");
                }
            }
        }
    }
}
