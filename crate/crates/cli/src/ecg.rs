//! ECG records: one integer sample per line, resampled to a fixed window.

use std::path::Path;

use esafe_core::recovery::synth_sparse_signal;
use esafe_core::BoundedSignal;

use crate::CliError;

/// 2 seconds at 256 Hz.
pub const WINDOW: usize = 512;
pub const WINDOW_RATE_HZ: f64 = 256.0;
/// Rate assumed for files that don't say otherwise (MIT-BIH).
pub const DEFAULT_SOURCE_RATE_HZ: f64 = 360.0;
/// Bounds of the MIT-BIH range used for the attack sweep.
pub const GLOBAL_BOUNDS: (i64, i64) = (590, 1487);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    File,
    Synthetic,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Self::File => "file",
            Self::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub id: String,
    pub samples: Vec<i64>,
    pub sample_rate: f64,
    pub lower: i64,
    pub upper: i64,
    pub provenance: Provenance,
}

impl EcgRecord {
    /// Wraps already-windowed samples, computing bounds unless given.
    pub fn new(id: &str, samples: Vec<i64>, bounds: Option<(i64, i64)>, provenance: Provenance) -> Result<Self, CliError> {
        let (min, max) = match (samples.iter().min(), samples.iter().max()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(CliError::Input(format!("{id}: no samples"))),
        };
        let (lower, upper) = bounds.unwrap_or((min - 1, max + 1));
        if min <= lower || max >= upper {
            return Err(CliError::Input(format!("{id}: samples span [{min}, {max}], outside bounds ({lower}, {upper})")));
        }
        Ok(Self { id: id.to_owned(), samples, sample_rate: WINDOW_RATE_HZ, lower, upper, provenance })
    }

    pub fn range(&self) -> i64 {
        self.upper - self.lower
    }

    pub fn is_constant(&self) -> bool {
        self.samples.windows(2).all(|w| w[0] == w[1])
    }

    pub fn signal(&self) -> Result<BoundedSignal, CliError> {
        Ok(BoundedSignal::new(self.samples.iter().map(|&v| v as f64).collect(), self.lower, self.upper)?)
    }

    /// Same samples, different bounds.
    pub fn with_bounds(&self, lower: i64, upper: i64) -> Result<Self, CliError> {
        Self::new(&self.id, self.samples.clone(), Some((lower, upper)), self.provenance)
    }
}

/// Linear interpolation onto `len` evenly spaced points spanning the input.
pub fn resample(samples: &[i64], len: usize) -> Vec<i64> {
    match samples.len() {
        0 => Vec::new(),
        1 => vec![samples[0]; len],
        n if n == len => samples.to_vec(),
        n => {
            let step = (n - 1) as f64 / (len - 1) as f64;
            (0..len)
                .map(|j| {
                    let t = j as f64 * step;
                    let i = (t.floor() as usize).min(n - 2);
                    let frac = t - i as f64;
                    let v = samples[i] as f64 * (1.0 - frac) + samples[i + 1] as f64 * frac;
                    v.round() as i64
                })
                .collect()
        }
    }
}

/// Parses the text of a record file.
pub fn parse_ecg(id: &str, text: &str, bounds: Option<(i64, i64)>) -> Result<EcgRecord, CliError> {
    let provenance = if text.starts_with("# synthetic") { Provenance::Synthetic } else { Provenance::File };
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('#')) {
            continue;
        }
        raw.push(line.parse::<i64>().map_err(|_| CliError::Input(format!("{id}: line {} is not an integer: {line:?}", i + 1)))?);
    }
    if raw.is_empty() {
        return Err(CliError::Input(format!("{id}: empty record")));
    }
    let record = EcgRecord::new(id, resample(&raw, WINDOW), bounds, provenance)?;
    if record.is_constant() {
        log::warn!("{id}: constant signal, nothing to compress beyond its mean");
    }
    Ok(record)
}

pub fn load_ecg_csv(path: &Path, bounds: Option<(i64, i64)>) -> Result<EcgRecord, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let id = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    parse_ecg(&id, &text, bounds)
}

/// Every `*.csv` under `dir`, sorted by file name.
pub fn load_dir(dir: &Path, bounds: Option<(i64, i64)>) -> Result<Vec<EcgRecord>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_ecg_csv(p, bounds)).collect()
}

/// Sparse ECG-like record in the MIT-BIH range, rounded to integers.
pub fn synthetic_record(index: u64, sparsity: usize) -> Result<EcgRecord, CliError> {
    let (lo, hi) = GLOBAL_BOUNDS;
    let mut seed = b"fixture/".to_vec();
    seed.extend_from_slice(&index.to_be_bytes());
    let s = synth_sparse_signal::<f64>(&seed, WINDOW, sparsity, lo, hi)?;
    let samples: Vec<i64> = s.signal.values().iter().map(|v| v.round() as i64).collect();
    EcgRecord::new(&format!("synthetic-{index:02}"), samples, None, Provenance::Synthetic)
}

pub fn synthetic_records(count: usize, sparsity: usize) -> Result<Vec<EcgRecord>, CliError> {
    (0..count as u64).map(|i| synthetic_record(i, sparsity)).collect()
}

/// Writes records in the loader's format; returns the paths written.
pub fn write_fixtures(dir: &Path, records: &[EcgRecord]) -> Result<Vec<std::path::PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    records
        .iter()
        .map(|r| {
            let path = dir.join(format!("{}.csv", r.id));
            let mut text = format!("# {} ECG-like fixture, {} samples at {} Hz\n", r.provenance.label(), r.samples.len(), r.sample_rate);
            for v in &r.samples {
                text.push_str(&v.to_string());
                text.push('\n');
            }
            std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}
