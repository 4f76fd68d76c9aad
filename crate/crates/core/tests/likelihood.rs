//! Likelihood metrics on the toy ensemble pipeline: analytic-vs-KDE truth
//! agreement and the coverage orderings the mixture learner must reproduce.

use dgan_core::datagen::{
    ring_rbf_features, sample_ring, MixtureSource, ModeLimitedSampler, RingSpec, SampleSource,
};
use dgan_core::edgan::{edgan_optimize, EnsembleInputs};
use dgan_core::evaluation::likelihood_report;
use dgan_core::rng::RngStream;

/// The five mode-limited base generators of the ensemble toy.
fn base_generators(spec: &RingSpec) -> Vec<ModeLimitedSampler> {
    [
        vec![0, 1, 2, 3, 4],
        vec![2, 3, 4, 5, 6],
        vec![4, 5, 6, 7, 8],
        vec![6, 7, 8, 0],
        vec![8, 0, 1, 2],
    ]
    .into_iter()
    .map(|modes| ModeLimitedSampler::new(spec.clone(), modes).unwrap())
    .collect()
}

/// Learn mixture weights on Gaussian-bump features of fresh draws.
fn learn_alpha(
    spec: &RingSpec,
    gens: &[ModeLimitedSampler],
    n_train: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = RngStream::derived(seed, 50);
    let bandwidth = 2.0 * spec.sigma;
    let feats: Vec<_> = gens
        .iter()
        .map(|g| ring_rbf_features(spec, &g.sample(n_train, &mut rng), bandwidth).unwrap())
        .collect();
    let real = ring_rbf_features(spec, &sample_ring(spec, n_train, &mut rng), bandwidth).unwrap();
    let inputs = EnsembleInputs::new(&feats, &real).unwrap();
    edgan_optimize(&inputs, 300, None, seed).unwrap().alpha
}

/// Both likelihood metrics of a weighted mixture of the base generators,
/// evaluated against fresh real draws and the analytic truth density.
fn mixture_metrics(
    spec: &RingSpec,
    gens: &[ModeLimitedSampler],
    alpha: &[f64],
    n_eval: usize,
    seed: u64,
) -> (f64, f64) {
    let sources: Vec<&dyn SampleSource> = gens.iter().map(|g| g as &dyn SampleSource).collect();
    let mixture = MixtureSource::new(sources, alpha).unwrap();
    let mut rng = RngStream::derived(seed, 60);
    let generated = mixture.sample(n_eval, &mut rng);
    let real = sample_ring(spec, n_eval, &mut rng);
    let report = likelihood_report(&real, &generated, Some(spec)).unwrap();
    (report.l_real, report.l_generated)
}

#[test]
fn analytic_and_kde_truth_densities_agree() {
    // L(S_theta) via the analytic ring density vs via a KDE fit on a large
    // real sample: within half a nat
    let spec = RingSpec::default();
    let mut rng = RngStream::new(1);
    let real = sample_ring(&spec, 2000, &mut rng);
    let generated = sample_ring(&spec, 1000, &mut rng);
    let analytic = likelihood_report(&real, &generated, Some(&spec)).unwrap();
    let kde = likelihood_report(&real, &generated, None).unwrap();
    assert!(
        (analytic.l_generated - kde.l_generated).abs() < 0.5,
        "analytic {} vs kde {}",
        analytic.l_generated,
        kde.l_generated
    );
}

#[test]
fn single_mode_generator_scores_far_below_full_coverage() {
    // the coverage metric L(S_r) collapses when eight of nine modes are
    // missing: real points near those modes see no generated kernel mass
    let spec = RingSpec::default();
    let mut rng = RngStream::new(2);
    let single = ModeLimitedSampler::new(spec.clone(), vec![0]).unwrap();
    let real = sample_ring(&spec, 600, &mut rng);
    let narrow = single.sample(600, &mut rng);
    let full = sample_ring(&spec, 600, &mut rng);
    let narrow_report = likelihood_report(&real, &narrow, Some(&spec)).unwrap();
    let full_report = likelihood_report(&real, &full, Some(&spec)).unwrap();
    assert!(
        narrow_report.l_real < full_report.l_real - 10.0,
        "narrow {} vs full {}",
        narrow_report.l_real,
        full_report.l_real
    );
}

#[test]
fn learned_mixture_beats_uniform_and_worst_single_on_coverage() {
    // single-seed sanity of the ensemble ordering on L(S_r); the acceptance
    // suite runs the full multi-seed version
    let spec = RingSpec::default();
    let gens = base_generators(&spec);
    let alpha = learn_alpha(&spec, &gens, 800, 11);
    let uniform = vec![0.2; 5];
    let (l_sr_edgan, _) = mixture_metrics(&spec, &gens, &alpha, 800, 123);
    let (l_sr_uniform, _) = mixture_metrics(&spec, &gens, &uniform, 800, 123);
    let mut worst_single = f64::INFINITY;
    for k in 0..5 {
        let mut one_hot = vec![0.0; 5];
        one_hot[k] = 1.0;
        let (l_sr, _) = mixture_metrics(&spec, &gens, &one_hot, 800, 123);
        worst_single = worst_single.min(l_sr);
    }
    assert!(
        l_sr_edgan >= l_sr_uniform - 0.05,
        "edgan {l_sr_edgan} vs uniform {l_sr_uniform}"
    );
    assert!(
        l_sr_edgan > worst_single,
        "edgan {l_sr_edgan} vs worst single {worst_single}"
    );
}

#[test]
fn learned_weights_rebalance_the_overrepresented_modes() {
    // the five generators cover modes unevenly; the feature-space optimum
    // pushes the per-mode weights toward uniform
    let spec = RingSpec::default();
    let gens = base_generators(&spec);
    let alpha = learn_alpha(&spec, &gens, 2000, 3);
    let mut mode_weights = vec![0.0; spec.components];
    for (a, g) in alpha.iter().zip(&gens) {
        for (m, w) in g.mode_weights().into_iter().enumerate() {
            mode_weights[m] += a * w;
        }
    }
    let uniform_dev = |w: &[f64]| -> f64 {
        w.iter()
            .map(|x| (x - 1.0 / 9.0).abs())
            .fold(0.0f64, f64::max)
    };
    // uniform mixture weights deviate by about 0.03 at the worst mode
    let baseline = {
        let mut w = vec![0.0; spec.components];
        for g in &gens {
            for (m, gw) in g.mode_weights().into_iter().enumerate() {
                w[m] += 0.2 * gw;
            }
        }
        uniform_dev(&w)
    };
    assert!(
        uniform_dev(&mode_weights) < baseline,
        "learned dev {} vs uniform-mixture dev {}",
        uniform_dev(&mode_weights),
        baseline
    );
}
