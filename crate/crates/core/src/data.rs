//! Synthetic data generation, label subsampling, and persistence of every
//! pipeline artifact (features, labels, spectra, chains, summaries).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeatureSet;
use crate::models::LabelData;
use crate::spectrum::LaplacianSpectrum;
use crate::uq::UQSummary;

/// Canonical two-moons size and ambient dimension.
pub const DEFAULT_MOONS_N: usize = 2000;
pub const DEFAULT_MOONS_DIM: usize = 100;

/// A feature set together with optional ground truth and, once labels have
/// been revealed, the observed subset.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub features: FeatureSet,
    /// Ground-truth classes in {−1, +1}, when known.
    pub truth: Option<Array1<f64>>,
    /// Labels revealed to the models; populated by subsampling.
    pub observed: Option<LabelData>,
}

/// Two interlocking moons: the upper semicircle of the unit circle at the
/// origin (class +1) and the lower semicircle of the unit circle at (1, 0.5)
/// (class −1), embedded in ℝ^d by zero-padding and perturbed by independent
/// N(0, σ²) noise on all d coordinates.
///
/// The first ⌈n/2⌉ rows belong to the upper moon. Angles are drawn uniformly
/// per point (upper moon first), then noise row by row, so outputs are
/// deterministic per seed.
pub fn gen_two_moons(n: usize, dim: usize, sigma: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::config("two-moons size must be at least 2"));
    }
    if dim < 2 {
        return Err(Error::config("two-moons ambient dimension must be at least 2"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::config("feature noise sigma must be nonnegative"));
    }
    let n_upper = n.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, dim));
    let mut truth = Array1::zeros(n);
    for i in 0..n {
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        if i < n_upper {
            points[[i, 0]] = theta.cos();
            points[[i, 1]] = theta.sin();
            truth[i] = 1.0;
        } else {
            points[[i, 0]] = 1.0 + theta.cos();
            points[[i, 1]] = 0.5 - theta.sin();
            truth[i] = -1.0;
        }
    }
    if sigma > 0.0 {
        for mut row in points.rows_mut() {
            for x in row.iter_mut() {
                *x += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(LabeledDataset {
        features: FeatureSet::new(points)?,
        truth: Some(truth),
        observed: None,
    })
}

/// How many labels to reveal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsampleScheme {
    /// Reveal round(fraction · N) labels, uniformly without replacement.
    Fraction(f64),
    /// Reveal exactly this many labels, uniformly without replacement.
    Count(usize),
    /// Reveal fixed quotas from the +1 and −1 classes respectively.
    PerClass(usize, usize),
}

/// Observation noise applied to revealed labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelNoise {
    Exact,
    /// Flip each revealed label independently with this probability.
    Flip(f64),
}

/// Reveal a random subset of the ground truth as observed labels.
///
/// Selected indices are reported in ascending node order; flip decisions are
/// then drawn one uniform per revealed label in that order.
pub fn subsample_labels(
    truth: ArrayView1<'_, f64>,
    scheme: SubsampleScheme,
    noise: LabelNoise,
    gamma: f64,
    seed: u64,
) -> Result<LabelData> {
    let n = truth.len();
    if let Some(bad) = truth.iter().find(|&&t| t != 1.0 && t != -1.0) {
        return Err(Error::config(format!(
            "ground truth must be ±1; found {bad}"
        )));
    }
    if let LabelNoise::Flip(p) = noise {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config("flip probability must lie in [0, 1]"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = match scheme {
        SubsampleScheme::Fraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("label fraction must lie in [0, 1]"));
            }
            let count = (f * n as f64).round() as usize;
            draw_count(n, count, &mut rng)?
        }
        SubsampleScheme::Count(count) => draw_count(n, count, &mut rng)?,
        SubsampleScheme::PerClass(n_pos, n_neg) => {
            let pos: Vec<usize> = (0..n).filter(|&j| truth[j] > 0.0).collect();
            let neg: Vec<usize> = (0..n).filter(|&j| truth[j] < 0.0).collect();
            if n_pos > pos.len() || n_neg > neg.len() {
                return Err(Error::config(format!(
                    "per-class quota ({n_pos}, {n_neg}) exceeds class sizes ({}, {})",
                    pos.len(),
                    neg.len()
                )));
            }
            if n_pos + n_neg == 0 {
                return Err(Error::config("per-class quotas must reveal at least one label"));
            }
            let mut sel: Vec<usize> = index_sample(&mut rng, pos.len(), n_pos)
                .into_iter()
                .map(|i| pos[i])
                .collect();
            sel.extend(index_sample(&mut rng, neg.len(), n_neg).into_iter().map(|i| neg[i]));
            sel
        }
    };
    picked.sort_unstable();
    let entries: Vec<(usize, f64)> = picked
        .into_iter()
        .map(|j| {
            let mut y = truth[j];
            if let LabelNoise::Flip(p) = noise {
                if rng.gen::<f64>() < p {
                    y = -y;
                }
            }
            (j, y)
        })
        .collect();
    LabelData::new(entries, gamma, n)
}

fn draw_count(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if count == 0 || count > n {
        return Err(Error::config(format!(
            "label count must lie in [1, {n}]; requested {count}"
        )));
    }
    Ok(index_sample(rng, n, count).into_vec())
}

// ---------------------------------------------------------------------------
// CSV formats. All files use '.'-decimal, comma separators, and LF endings;
// floats print in shortest round-trip form.
// ---------------------------------------------------------------------------

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("cannot open {}: {e}", path.display())))
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("cannot create {}: {e}", path.display())))
}

fn write_error(path: &Path, e: std::io::Error) -> Error {
    Error::io(format!("write to {} failed: {e}", path.display()))
}

fn line_error(path: &Path, line_no: usize, what: impl std::fmt::Display) -> Error {
    Error::io(format!("{} line {line_no}: {what}", path.display()))
}

/// Feature CSV: one row per node, d comma-separated floats; a single header
/// line is tolerated and skipped when its first field is not numeric.
pub fn load_features_csv(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let reader = open_reader(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| line_error(path, line_no, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(e) => {
                if line_no == 1 {
                    continue; // header
                }
                return Err(line_error(path, line_no, format!("malformed float: {e}")));
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(line_error(
                    path,
                    line_no,
                    format!("expected {w} fields, found {}", values.len()),
                ));
            }
            _ => {}
        }
        rows.push(values);
    }
    let d = width.ok_or_else(|| Error::io(format!("{}: no data rows", path.display())))?;
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let points = Array2::from_shape_vec((n, d), flat).expect("consistent row widths");
    FeatureSet::new(points)
}

pub fn save_features_csv(path: impl AsRef<Path>, features: &FeatureSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    for row in features.points().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// Label CSV: lines "node_index,label". Binary ±1 is expected by probit and
/// level-set models; real values are accepted here for Ginzburg-Landau.
pub fn load_labels_csv(path: impl AsRef<Path>, gamma: f64, n_nodes: usize) -> Result<LabelData> {
    let path = path.as_ref();
    let reader = open_reader(path)?;
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| line_error(path, line_no, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let mut fields = text.split(',');
        let node_field = fields.next().unwrap_or("");
        let label_field = fields
            .next()
            .ok_or_else(|| line_error(path, line_no, "expected \"node_index,label\""))?;
        if fields.next().is_some() {
            return Err(line_error(path, line_no, "expected exactly 2 fields"));
        }
        let node: usize = match node_field.trim().parse() {
            Ok(v) => v,
            Err(_) if line_no == 1 => continue, // header
            Err(e) => return Err(line_error(path, line_no, format!("malformed index: {e}"))),
        };
        let label: f64 = label_field
            .trim()
            .parse()
            .map_err(|e| line_error(path, line_no, format!("malformed label: {e}")))?;
        if node >= n_nodes {
            return Err(line_error(
                path,
                line_no,
                format!("node index {node} out of range for {n_nodes} nodes"),
            ));
        }
        entries.push((node, label));
    }
    LabelData::new(entries, gamma, n_nodes)
}

pub fn save_labels_csv(path: impl AsRef<Path>, labels: &LabelData) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    for (&j, &y) in labels.nodes().iter().zip(labels.values()) {
        writeln!(w, "{j},{y}").map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// One float per line; used for ground truth and state vectors.
pub fn load_vector_csv(path: impl AsRef<Path>) -> Result<Array1<f64>> {
    let path = path.as_ref();
    let reader = open_reader(path)?;
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| line_error(path, line_no, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        values.push(
            text.parse::<f64>()
                .map_err(|e| line_error(path, line_no, format!("malformed float: {e}")))?,
        );
    }
    if values.is_empty() {
        return Err(Error::io(format!("{}: no data rows", path.display())));
    }
    Ok(Array1::from_vec(values))
}

pub fn save_vector_csv(path: impl AsRef<Path>, v: ArrayView1<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    for x in v.iter() {
        writeln!(w, "{x}").map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// Dense weight export: N rows of N comma-separated weights.
pub fn save_weights_dense_csv(
    path: impl AsRef<Path>,
    weights: ArrayView2<'_, f64>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    for row in weights.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// Sparse weight export: one "i,j,w" line per stored entry, 0-based indices.
pub fn save_weights_coo_csv(
    path: impl AsRef<Path>,
    weights: ArrayView2<'_, f64>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    for ((i, j), &v) in weights.indexed_iter() {
        if v != 0.0 {
            writeln!(w, "{i},{j},{v}").map_err(|e| write_error(path, e))?;
        }
    }
    w.flush().map_err(|e| write_error(path, e))
}

// ---------------------------------------------------------------------------
// Binary formats: little-endian f64 payloads behind short magic headers, so
// expensive artifacts round-trip bitwise.
// ---------------------------------------------------------------------------

const SPECTRUM_MAGIC: &[u8; 8] = b"GUQSPEC1";
const CHAIN_MAGIC: &[u8; 8] = b"GUQCHN01";

fn put_u64(w: &mut impl Write, v: u64, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| write_error(path, e))
}

fn put_f64s<'a>(
    w: &mut impl Write,
    vs: impl Iterator<Item = &'a f64>,
    path: &Path,
) -> Result<()> {
    for &v in vs {
        w.write_all(&v.to_le_bytes()).map_err(|e| write_error(path, e))?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::io(format!("{}: truncated file: {e}", path.display())))?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64s(r: &mut impl Read, count: usize, path: &Path) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::io(format!("{}: truncated file: {e}", path.display())))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Binary spectrum: magic, N, m, saturation flag + value, eigenvalues,
/// then row-major eigenvectors. Bitwise round trip.
pub fn save_spectrum(path: impl AsRef<Path>, spectrum: &LaplacianSpectrum) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    w.write_all(SPECTRUM_MAGIC).map_err(|e| write_error(path, e))?;
    put_u64(&mut w, spectrum.n_nodes() as u64, path)?;
    put_u64(&mut w, spectrum.n_pairs() as u64, path)?;
    let sat = spectrum.saturation();
    put_u64(&mut w, u64::from(sat.is_some()), path)?;
    put_f64s(&mut w, std::iter::once(&sat.unwrap_or(0.0)), path)?;
    put_f64s(&mut w, spectrum.eigenvalues().iter(), path)?;
    put_f64s(&mut w, spectrum.eigenvectors().iter(), path)?;
    w.flush().map_err(|e| write_error(path, e))
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<LaplacianSpectrum> {
    let path = path.as_ref();
    let mut r = open_reader(path)?;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io(format!("{}: truncated file: {e}", path.display())))?;
    if &magic != SPECTRUM_MAGIC {
        return Err(Error::io(format!(
            "{}: not a spectrum file (bad magic)",
            path.display()
        )));
    }
    let n = get_u64(&mut r, path)? as usize;
    let m = get_u64(&mut r, path)? as usize;
    let has_sat = get_u64(&mut r, path)? != 0;
    let sat = get_f64s(&mut r, 1, path)?[0];
    let eigenvalues = Array1::from_vec(get_f64s(&mut r, m, path)?);
    let eigenvectors = Array2::from_shape_vec((n, m), get_f64s(&mut r, n * m, path)?)
        .expect("sized buffer");
    LaplacianSpectrum::from_parts(eigenvalues, eigenvectors, has_sat.then_some(sat))
}

/// CSV spectrum: first row the eigenvalues, then N rows of eigenvector
/// columns. The saturation level is not representable here; use the binary
/// form to preserve it.
pub fn save_spectrum_csv(path: impl AsRef<Path>, spectrum: &LaplacianSpectrum) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    let eig: Vec<String> = spectrum.eigenvalues().iter().map(|v| v.to_string()).collect();
    writeln!(w, "{}", eig.join(",")).map_err(|e| write_error(path, e))?;
    for row in spectrum.eigenvectors().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

pub fn load_spectrum_csv(path: impl AsRef<Path>) -> Result<LaplacianSpectrum> {
    let path = path.as_ref();
    let reader = open_reader(path)?;
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::io(format!("{}: empty file", path.display())))?;
    let first = first.map_err(|e| line_error(path, 1, e))?;
    let eigenvalues: Vec<f64> = first
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| line_error(path, 1, format!("malformed eigenvalue: {e}")))?;
    let m = eigenvalues.len();
    let mut flat = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| line_error(path, line_no, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let row: Vec<f64> = text
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| line_error(path, line_no, format!("malformed entry: {e}")))?;
        if row.len() != m {
            return Err(line_error(
                path,
                line_no,
                format!("expected {m} columns, found {}", row.len()),
            ));
        }
        flat.extend(row);
        n += 1;
    }
    let eigenvectors = Array2::from_shape_vec((n, m), flat).expect("checked widths");
    LaplacianSpectrum::from_parts(Array1::from_vec(eigenvalues), eigenvectors, None)
}

/// Raw-chain binary: magic, N, number of states, seed, then the states as a
/// row-major matrix of 64-bit floats.
pub fn save_chain(path: impl AsRef<Path>, samples: ArrayView2<'_, f64>, seed: u64) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    w.write_all(CHAIN_MAGIC).map_err(|e| write_error(path, e))?;
    put_u64(&mut w, samples.ncols() as u64, path)?;
    put_u64(&mut w, samples.nrows() as u64, path)?;
    put_u64(&mut w, seed, path)?;
    put_f64s(&mut w, samples.iter(), path)?;
    w.flush().map_err(|e| write_error(path, e))
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<(Array2<f64>, u64)> {
    let path = path.as_ref();
    let mut r = open_reader(path)?;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io(format!("{}: truncated file: {e}", path.display())))?;
    if &magic != CHAIN_MAGIC {
        return Err(Error::io(format!(
            "{}: not a chain file (bad magic)",
            path.display()
        )));
    }
    let n = get_u64(&mut r, path)? as usize;
    let m = get_u64(&mut r, path)? as usize;
    let seed = get_u64(&mut r, path)?;
    let samples = Array2::from_shape_vec((m, n), get_f64s(&mut r, m * n, path)?)
        .expect("sized buffer");
    Ok((samples, seed))
}

// ---------------------------------------------------------------------------
// JSON and CSV records for run outputs.
// ---------------------------------------------------------------------------

/// Persisted chain summary: scalar diagnostics plus the label-space fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSummaryRecord {
    pub acceptance_rate: f64,
    pub converged_at: Option<usize>,
    pub n_states: usize,
    pub beta_used: f64,
    pub scores: Vec<f64>,
    pub node_variance: Vec<f64>,
    pub mean_variance: f64,
    pub hard_labels: Vec<f64>,
}

impl ChainSummaryRecord {
    pub fn new(
        acceptance_rate: f64,
        converged_at: Option<usize>,
        n_states: usize,
        beta_used: f64,
        summary: &UQSummary,
    ) -> Self {
        ChainSummaryRecord {
            acceptance_rate,
            converged_at,
            n_states,
            beta_used,
            scores: summary.scores.to_vec(),
            node_variance: summary.node_variance.to_vec(),
            mean_variance: summary.mean_variance,
            hard_labels: summary.hard_labels.to_vec(),
        }
    }
}

/// Persisted MAP result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapRecord {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub state: Vec<f64>,
    pub hard_labels: Vec<f64>,
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let w = open_writer(path)?;
    serde_json::to_writer_pretty(w, value)
        .map_err(|e| Error::io(format!("write to {} failed: {e}", path.display())))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let r = open_reader(path)?;
    serde_json::from_reader(r)
        .map_err(|e| Error::io(format!("{}: malformed JSON: {e}", path.display())))
}

/// Summary CSV with header "node,score,variance,hard_label".
pub fn save_summary_csv(path: impl AsRef<Path>, summary: &UQSummary) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    writeln!(w, "node,score,variance,hard_label").map_err(|e| write_error(path, e))?;
    for j in 0..summary.scores.len() {
        writeln!(
            w,
            "{j},{},{},{}",
            summary.scores[j], summary.node_variance[j], summary.hard_labels[j]
        )
        .map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// Sweep CSV with header "sigma_or_gamma,trial,mean_variance".
pub fn save_sweep_csv(path: impl AsRef<Path>, rows: &[(f64, usize, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    writeln!(w, "sigma_or_gamma,trial,mean_variance").map_err(|e| write_error(path, e))?;
    for &(x, trial, mv) in rows {
        writeln!(w, "{x},{trial},{mv}").map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}
