//! Subcommand implementations. Each returns a single JSON-serializable
//! document for stdout; all logging goes to stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use dgan_core::datagen::{
    rescale_to_unit_ball, GaussianCloud, ModeLimitedSampler, RingSpec, SampleSource, ScaledSource,
};
use dgan_core::dgan::{self, DganConfig};
use dgan_core::discrepancy::{empirical_discrepancy, theorem1_gap};
use dgan_core::edgan::{self, EnsembleInputs};
use dgan_core::evaluation::{decay_probe, likelihood_report};
use dgan_core::matrix::SampleMatrix;
use dgan_core::rng::RngStream;

use crate::formats::{
    save_samples, save_xy_csv, write_checkpoint, CompareDoc, DiscDoc, EvalDoc, FormatError,
    TraceLine, WeightsDoc,
};

/// Errors split by exit code: input problems exit 2, numerical aborts exit 3.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<dgan_core::Error> for CliError {
    fn from(e: dgan_core::Error) -> Self {
        match e {
            dgan_core::Error::NonFiniteLoss(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<String> for CliError {
    fn from(m: String) -> Self {
        CliError::Input(m)
    }
}

fn require_dir(path: &Path) -> Result<(), CliError> {
    if !path.is_dir() {
        return Err(CliError::Input(format!(
            "output directory {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

/// `disc`: discrepancy between two CSV sample files.
pub fn cmd_disc(real: &Path, gen: &Path, bounded: bool) -> Result<DiscDoc, CliError> {
    let xr = crate::formats::load_samples(real, None, bounded)?;
    let xg = crate::formats::load_samples(gen, Some(xr.cols()), bounded)?;
    let d = empirical_discrepancy(&xr, &xg)?;
    Ok(DiscDoc {
        disc: d.value,
        spectral: d.spectral,
        converged: d.converged,
    })
}

/// Resolved knobs for `train-dgan`.
#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub cfg: DganConfig,
    pub ring: RingSpec,
    pub out_dir: PathBuf,
    pub sample_dump: usize,
}

#[derive(Debug, Serialize)]
pub struct TrainDoc {
    pub steps: usize,
    #[serde(rename = "initial_F")]
    pub initial_f: f64,
    #[serde(rename = "final_F")]
    pub final_f: f64,
    pub out_dir: String,
}

/// `train-dgan`: trains the toy generator/embedding pair against the ring
/// distribution rescaled into the unit ball, writing `g_theta.json`,
/// `f_zeta.json`, a streamed `trace.jsonl`, and a post-training sample dump
/// `samples.csv` (in original ring coordinates). Reruns with the same seed
/// reproduce every file byte for byte.
pub fn cmd_train_dgan(args: &TrainArgs) -> Result<TrainDoc, CliError> {
    args.cfg.validate()?;
    require_dir(&args.out_dir)?;
    let bound = args.ring.radius + 5.0 * args.ring.sigma;
    let real = ScaledSource {
        inner: &args.ring,
        factor: 1.0 / bound,
    };
    let noise = GaussianCloud { dim: 2, scale: 1.0 };
    let (gen0, embed0) = dgan::toy_networks(&args.cfg, 2, 2)?;

    let trace_path = args.out_dir.join("trace.jsonl");
    let trace_file = File::create(&trace_path).map_err(FormatError::Io)?;
    let mut writer = BufWriter::new(trace_file);
    let mut io_error: Option<std::io::Error> = None;
    let result = {
        let mut sink = |rec: &dgan::StepRecord| {
            let line = TraceLine {
                step: rec.step,
                f: rec.f_value,
                converged: rec.converged,
            };
            let encoded = serde_json::to_string(&line).expect("trace line serializes");
            if let Err(e) = writer
                .write_all(encoded.as_bytes())
                .and_then(|_| writer.write_all(b"\n"))
            {
                io_error.get_or_insert(e);
            }
        };
        dgan::dgan_train_streamed(&args.cfg, gen0, embed0, &real, &noise, &mut sink)
    };
    writer.flush().map_err(FormatError::Io)?;
    if let Some(e) = io_error {
        return Err(FormatError::Io(e).into());
    }
    // the partial trace file stands when training aborts
    let (gen, embed, trace) = result?;

    write_checkpoint(&gen, &args.out_dir.join("g_theta.json"))?;
    write_checkpoint(&embed, &args.out_dir.join("f_zeta.json"))?;

    let mut rng = RngStream::derived(args.cfg.seed, 2);
    let z = noise.sample(args.sample_dump, &mut rng);
    let generated = dgan::generate(&gen, &z)?;
    save_samples(&generated.scaled(bound), &args.out_dir.join("samples.csv"))?;

    let first = trace.records.first().expect("at least one step");
    let last = trace.records.last().expect("at least one step");
    Ok(TrainDoc {
        steps: args.cfg.steps,
        initial_f: first.f_value,
        final_f: last.f_value,
        out_dir: args.out_dir.display().to_string(),
    })
}

#[derive(Debug, Serialize)]
pub struct MixDoc {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub disc: f64,
    pub iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareDoc>,
}

/// `mix-edgan`: learns mixture weights over generator sample files.
pub fn cmd_mix_edgan(
    real: &Path,
    gens: &[PathBuf],
    iters: usize,
    eta0: Option<f64>,
    seed: u64,
    compare: bool,
    out_dir: Option<&Path>,
) -> Result<MixDoc, CliError> {
    let xr = crate::formats::load_samples(real, None, false)?;
    let mut xs = Vec::with_capacity(gens.len());
    for g in gens {
        xs.push(crate::formats::load_samples(g, Some(xr.cols()), false)?);
    }
    let inputs = EnsembleInputs::new(&xs, &xr)?;
    let weights = edgan::edgan_optimize(&inputs, iters, eta0, seed)?;
    let objective = edgan::ensemble_objective(&weights.alpha, &inputs)?.value;

    let compare_doc = if compare {
        let p = inputs.p();
        let mut singles = Vec::with_capacity(p);
        for k in 0..p {
            let mut alpha = vec![0.0; p];
            alpha[k] = 1.0;
            singles.push(2.0 * edgan::ensemble_objective(&alpha, &inputs)?.value);
        }
        let uniform = vec![1.0 / p as f64; p];
        let average = 2.0 * edgan::ensemble_objective(&uniform, &inputs)?.value;
        let doc = CompareDoc {
            singles,
            average,
            edgan: 2.0 * objective,
        };
        for (k, s) in doc.singles.iter().enumerate() {
            eprintln!("generator {:>2}  disc {s:.6}", k + 1);
        }
        eprintln!("average       disc {:.6}", doc.average);
        eprintln!("edgan         disc {:.6}", doc.edgan);
        Some(doc)
    } else {
        None
    };

    if let Some(dir) = out_dir {
        require_dir(dir)?;
        let doc = WeightsDoc {
            alpha: weights.alpha.clone(),
            objective,
            disc: 2.0 * objective,
            iters,
        };
        let text = serde_json::to_string(&doc).expect("weights serialize");
        std::fs::write(dir.join("weights.json"), text + "\n").map_err(FormatError::Io)?;
    }

    Ok(MixDoc {
        alpha: weights.alpha,
        objective,
        disc: 2.0 * objective,
        iters,
        compare: compare_doc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Decay,
    Continuity,
    Theorem1,
    Theorem4,
}

impl ProbeKind {
    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Decay => "decay",
            ProbeKind::Continuity => "continuity",
            ProbeKind::Theorem1 => "theorem1",
            ProbeKind::Theorem4 => "theorem4",
        }
    }
}

/// Resolved knobs for `probe`.
#[derive(Debug, Clone)]
pub struct ProbeArgs {
    pub kind: ProbeKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub ring: RingSpec,
    pub n_values: Vec<usize>,
    pub repeats: usize,
    pub dim: usize,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub instances: usize,
    pub grid_res: f64,
    pub seeds: usize,
}

#[derive(Debug, Serialize)]
pub struct ProbeDoc {
    pub kind: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    pub points: Vec<(f64, f64)>,
}

/// `probe`: runs one theorem probe, emits a verdict plus raw plot points,
/// and writes them as `<kind>.csv` (x,y columns) in the output directory.
pub fn cmd_probe(args: &ProbeArgs) -> Result<ProbeDoc, CliError> {
    require_dir(&args.out_dir)?;
    let (verdict, slope, points) = match args.kind {
        ProbeKind::Decay => {
            let source = GaussianCloud {
                dim: args.dim,
                scale: 0.25,
            };
            let res = decay_probe(&source, &args.n_values, args.repeats, args.seed)?;
            let pass = (-0.7..=-0.3).contains(&res.slope);
            let points: Vec<(f64, f64)> = res.points.iter().map(|&(n, v)| (n as f64, v)).collect();
            (pass, Some(res.slope), points)
        }
        ProbeKind::Continuity => {
            let cfg = DganConfig {
                seed: args.seed,
                ..DganConfig::default()
            };
            let (gen, embed) = dgan::toy_networks(&cfg, 2, 2)?;
            let bound = args.ring.radius + 5.0 * args.ring.sigma;
            let mut rng = RngStream::derived(args.seed, 7);
            let xr = rescale_to_unit_ball(
                &dgan_core::datagen::sample_ring(&args.ring, 64, &mut rng),
                bound,
            )?;
            let z = GaussianCloud { dim: 2, scale: 1.0 }.sample(64, &mut rng);
            let gaps = dgan::continuity_probe(&gen, &embed, &xr, &z, &args.epsilons, &mut rng)?;
            let pass = gaps.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9)
                && gaps.last().map(|l| l.1) <= gaps.first().map(|f| f.1);
            (pass, None, gaps)
        }
        ProbeKind::Theorem1 => {
            let bound = args.ring.radius + 5.0 * args.ring.sigma;
            let mut points = Vec::with_capacity(args.instances);
            let mut min_slack = f64::INFINITY;
            for i in 0..args.instances {
                let mut rng = RngStream::derived(args.seed, i as u64);
                let xr = rescale_to_unit_ball(
                    &dgan_core::datagen::sample_ring(&args.ring, 64, &mut rng),
                    bound,
                )?;
                let xg = rescale_to_unit_ball(
                    &dgan_core::datagen::sample_ring(&args.ring, 64, &mut rng),
                    bound,
                )?;
                let slack = theorem1_gap(&xr, &xg, args.trials, &mut rng)?;
                min_slack = min_slack.min(slack);
                points.push((i as f64, slack));
            }
            (min_slack >= -1e-9, None, points)
        }
        ProbeKind::Theorem4 => {
            let spec = &args.ring;
            if spec.components < 9 {
                return Err(CliError::Input(
                    "theorem4 probe expects at least nine ring components".into(),
                ));
            }
            let g1 = ModeLimitedSampler::new(spec.clone(), vec![0, 1, 2])?;
            let g2 = ModeLimitedSampler::new(spec.clone(), vec![3, 4, 5])?;
            let g3 = ModeLimitedSampler::new(spec.clone(), vec![6, 7, 8])?;
            let mut per_n: Vec<Vec<f64>> = vec![Vec::new(); args.n_values.len()];
            for s in 0..args.seeds {
                let gaps = edgan::theorem4_probe(
                    &[&g1, &g2, &g3],
                    spec,
                    &args.n_values,
                    args.grid_res,
                    args.seed.wrapping_add(s as u64),
                )?;
                for (slot, (_, g)) in per_n.iter_mut().zip(&gaps) {
                    slot.push(*g);
                }
            }
            let medians: Vec<f64> = per_n
                .iter()
                .map(|v| {
                    let mut v = v.clone();
                    v.sort_by(|a, b| a.total_cmp(b));
                    v[v.len() / 2]
                })
                .collect();
            let pass = medians.last() < medians.first();
            let points = args
                .n_values
                .iter()
                .zip(&medians)
                .map(|(&n, &m)| (n as f64, m))
                .collect();
            (pass, None, points)
        }
    };

    save_xy_csv(
        &points,
        &args.out_dir.join(format!("{}.csv", args.kind.name())),
    )?;
    Ok(ProbeDoc {
        kind: args.kind.name().to_string(),
        verdict: if verdict { "pass" } else { "fail" }.to_string(),
        slope,
        points,
    })
}

/// `eval`: likelihood report between a real and a generated sample file;
/// with a ring spec the analytic truth density replaces the real-side KDE.
pub fn cmd_eval(real: &Path, gen: &Path, ring: Option<&RingSpec>) -> Result<EvalDoc, CliError> {
    let xr = crate::formats::load_samples(real, None, false)?;
    let xg = crate::formats::load_samples(gen, Some(xr.cols()), false)?;
    let report = likelihood_report(&xr, &xg, ring)?;
    Ok(EvalDoc {
        l_sr: report.l_real,
        l_stheta: report.l_generated,
        n_real: report.n_real,
        n_gen: report.n_generated,
        bandwidth_gen: report.bandwidth_generated,
        bandwidth_real: report.bandwidth_real,
    })
}

/// Helper shared by the acceptance suite: a deterministic SampleMatrix draw.
pub fn ring_samples(spec: &RingSpec, n: usize, seed: u64) -> SampleMatrix {
    let mut rng = RngStream::new(seed);
    dgan_core::datagen::sample_ring(spec, n, &mut rng)
}
