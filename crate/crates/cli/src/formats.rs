//! File formats: CSV sample matrices, JSON network checkpoints, JSONL
//! training traces, and the JSON result documents each subcommand emits.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use dgan_core::matrix::SampleMatrix;
use dgan_core::neuralnet::{Activation, Layer, MlpParams};

/// Errors raised while reading or writing artifact files.
#[derive(Debug)]
pub enum FormatError {
    Io(std::io::Error),
    /// "empty sample": the file parsed to zero rows.
    Empty,
    /// Row at `line` (1-based) has `got` fields where `want` were expected.
    Ragged {
        line: usize,
        got: usize,
        want: usize,
    },
    /// Field at `line` failed to parse as a float.
    Parse {
        line: usize,
        token: String,
    },
    /// The parsed width disagrees with the width the caller required.
    Width {
        got: usize,
        want: usize,
    },
    /// Row at `line` violates the unit-ball convention.
    OutsideBall {
        line: usize,
        norm: f64,
    },
    /// Checkpoint document problems.
    Checkpoint(String),
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "{e}"),
            FormatError::Empty => write!(f, "empty sample"),
            FormatError::Ragged { line, got, want } => {
                write!(
                    f,
                    "line {line}: ragged row, {got} fields where {want} expected"
                )
            }
            FormatError::Parse { line, token } => {
                write!(f, "line {line}: cannot parse '{token}' as a number")
            }
            FormatError::Width { got, want } => {
                write!(f, "sample width {got} does not match expected {want}")
            }
            FormatError::OutsideBall { line, norm } => {
                write!(f, "line {line}: row norm {norm} outside the unit ball")
            }
            FormatError::Checkpoint(msg) => write!(f, "checkpoint: {msg}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io(e)
    }
}

/// CSV samples: comma-separated, no header, one sample per row. Written with
/// the shortest decimal representation that round-trips exactly.
pub fn save_samples(x: &SampleMatrix, path: &Path) -> Result<(), FormatError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for i in 0..x.rows() {
        line.clear();
        for (j, v) in x.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            let _ = write!(line, "{v}");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a CSV sample file; `expected_cols` pins the width, `bounded`
/// additionally enforces the unit-ball convention per row.
pub fn load_samples(
    path: &Path,
    expected_cols: Option<usize>,
    bounded: bool,
) -> Result<SampleMatrix, FormatError> {
    let text = fs::read_to_string(path)?;
    let mut data: Vec<f64> = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let want = *cols.get_or_insert(fields.len());
        if fields.len() != want {
            return Err(FormatError::Ragged {
                line: line_no,
                got: fields.len(),
                want,
            });
        }
        let mut norm_sq = 0.0;
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| FormatError::Parse {
                line: line_no,
                token: field.trim().to_string(),
            })?;
            if !v.is_finite() {
                return Err(FormatError::Parse {
                    line: line_no,
                    token: field.trim().to_string(),
                });
            }
            norm_sq += v * v;
            data.push(v);
        }
        if bounded && norm_sq > 1.0 + 1e-9 {
            return Err(FormatError::OutsideBall {
                line: line_no,
                norm: norm_sq.sqrt(),
            });
        }
        rows += 1;
    }
    let cols = cols.ok_or(FormatError::Empty)?;
    if rows == 0 {
        return Err(FormatError::Empty);
    }
    if let Some(want) = expected_cols {
        if cols != want {
            return Err(FormatError::Width { got: cols, want });
        }
    }
    SampleMatrix::new(rows, cols, data).map_err(|_| FormatError::Empty)
}

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
fn fmt_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Checkpoint JSON: `{"layers":[{"w":[[...]],"b":[...],"act":"tanh"},...]}`
/// with numbers written at 17 significant digits for round-trip exactness.
pub fn write_checkpoint(net: &MlpParams, path: &Path) -> Result<(), FormatError> {
    let mut out = String::from("{\"layers\":[");
    for (k, layer) in net.layers().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str("{\"w\":[");
        let (d_in, d_out) = (layer.in_dim(), layer.out_dim());
        for o in 0..d_out {
            if o > 0 {
                out.push(',');
            }
            out.push('[');
            for i in 0..d_in {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_f64_17(layer.weight[o * d_in + i]));
            }
            out.push(']');
        }
        out.push_str("],\"b\":[");
        for (i, b) in layer.bias.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64_17(*b));
        }
        out.push_str("],\"act\":\"");
        out.push_str(layer.act.name());
        out.push_str("\"}");
    }
    out.push_str("]}\n");
    fs::write(path, out)?;
    Ok(())
}

#[derive(Deserialize)]
struct CheckpointDoc {
    layers: Vec<LayerDoc>,
}

#[derive(Deserialize)]
struct LayerDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: String,
}

pub fn read_checkpoint(path: &Path) -> Result<MlpParams, FormatError> {
    let text = fs::read_to_string(path)?;
    let doc: CheckpointDoc =
        serde_json::from_str(&text).map_err(|e| FormatError::Checkpoint(e.to_string()))?;
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (k, l) in doc.layers.into_iter().enumerate() {
        let act = match l.act.as_str() {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            other => {
                return Err(FormatError::Checkpoint(format!(
                    "layer {k}: unknown activation '{other}'"
                )))
            }
        };
        let out_dim = l.w.len();
        let in_dim = l.w.first().map(|r| r.len()).unwrap_or(0);
        if out_dim != l.b.len() || l.w.iter().any(|r| r.len() != in_dim) {
            return Err(FormatError::Checkpoint(format!(
                "layer {k}: shape mismatch"
            )));
        }
        let mut weight = Vec::with_capacity(in_dim * out_dim);
        for row in &l.w {
            weight.extend_from_slice(row);
        }
        layers.push(Layer {
            weight,
            bias: l.b,
            act,
        });
    }
    MlpParams::new(layers).map_err(|e| FormatError::Checkpoint(e.to_string()))
}

/// One training-trace line, streamed as JSONL.
#[derive(Debug, Serialize, Deserialize)]
pub struct TraceLine {
    pub step: usize,
    #[serde(rename = "F")]
    pub f: f64,
    pub converged: bool,
}

/// Result document of `disc`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DiscDoc {
    pub disc: f64,
    pub spectral: f64,
    pub converged: bool,
}

/// Mixture-weight output of `mix-edgan`.
#[derive(Debug, Serialize, Deserialize)]
pub struct WeightsDoc {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub disc: f64,
    pub iters: usize,
}

/// Discrepancy comparison rows printed by `mix-edgan --compare`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CompareDoc {
    /// Discrepancy of each single generator against the real samples.
    pub singles: Vec<f64>,
    /// Discrepancy of the uniform average mixture.
    pub average: f64,
    /// Discrepancy of the learned mixture.
    pub edgan: f64,
}

/// Likelihood report of `eval`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalDoc {
    #[serde(rename = "L_Sr")]
    pub l_sr: f64,
    #[serde(rename = "L_Stheta")]
    pub l_stheta: f64,
    pub n_real: usize,
    pub n_gen: usize,
    pub bandwidth_gen: f64,
    pub bandwidth_real: Option<f64>,
}

/// Plot points as a two-column CSV.
pub fn save_xy_csv(points: &[(f64, f64)], path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dgan_core::rng::RngStream;

    fn tmpdir(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("dgan-fmt-{name}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = RngStream::new(1);
        let x =
            SampleMatrix::new(20, 3, (0..60).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
        let dir = tmpdir("roundtrip");
        let path = dir.join("x.csv");
        save_samples(&x, &path).unwrap();
        let y = load_samples(&path, Some(3), false).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn csv_ragged_row_names_line() {
        let dir = tmpdir("ragged");
        let path = dir.join("bad.csv");
        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        match load_samples(&path, None, false) {
            Err(FormatError::Ragged {
                line: 2,
                got: 1,
                want: 2,
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn csv_bad_token_names_line() {
        let dir = tmpdir("token");
        let path = dir.join("bad.csv");
        fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        match load_samples(&path, None, false) {
            Err(FormatError::Parse { line: 2, token }) => assert_eq!(token, "oops"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn csv_empty_file_is_empty_sample() {
        let dir = tmpdir("empty");
        let path = dir.join("empty.csv");
        fs::write(&path, "").unwrap();
        match load_samples(&path, None, false) {
            Err(FormatError::Empty) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn csv_width_check() {
        let dir = tmpdir("width");
        let path = dir.join("x.csv");
        fs::write(&path, "1.0,2.0\n").unwrap();
        assert!(matches!(
            load_samples(&path, Some(3), false),
            Err(FormatError::Width { got: 2, want: 3 })
        ));
    }

    #[test]
    fn csv_ball_check() {
        let dir = tmpdir("ball");
        let path = dir.join("x.csv");
        fs::write(&path, "0.9,0.9\n").unwrap();
        assert!(load_samples(&path, None, false).is_ok());
        assert!(matches!(
            load_samples(&path, None, true),
            Err(FormatError::OutsideBall { line: 1, .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = RngStream::new(2);
        let net = MlpParams::init(
            &[2, 5, 3],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let dir = tmpdir("ckpt");
        let path = dir.join("net.json");
        write_checkpoint(&net, &path).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn checkpoint_rejects_bad_activation() {
        let dir = tmpdir("ckpt-bad");
        let path = dir.join("net.json");
        fs::write(
            &path,
            r#"{"layers":[{"w":[[1.0]],"b":[0.0],"act":"gelu"}]}"#,
        )
        .unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(FormatError::Checkpoint(_))
        ));
    }

    #[test]
    fn trace_line_shape() {
        let line = TraceLine {
            step: 3,
            f: 0.5,
            converged: true,
        };
        let s = serde_json::to_string(&line).unwrap();
        assert_eq!(s, r#"{"step":3,"F":0.5,"converged":true}"#);
    }
}
