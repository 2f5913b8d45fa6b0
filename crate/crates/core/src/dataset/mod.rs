//! Reproducible dataset generation.
//!
//! Every record draws its parameters from a private RNG seeded with
//! [`derive_seed`]`(master_seed, index)`, so a record can be regenerated in
//! isolation and output bytes do not depend on worker count.
//!
//! On-disk layout of an output directory:
//!
//! ```text
//! manifest.json
//! seismograms/000000.npy   shape (n_interrogators, n_samples)
//! snapshots/000000.npy     shape (n_snapshots, *grid_points), when enabled
//! ```

pub mod npy;
mod seed;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{record, Interrogator, Seismogram};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::media::MediumSpec;
use crate::solver::SimConfig;
use crate::source::{SourceSpec, Wavelet};

pub use npy::{load_array, save_array, NpyArray};
pub use seed::{derive_seed, splitmix64};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const SEISMOGRAM_DIR: &str = "seismograms";
const SNAPSHOT_DIR: &str = "snapshots";

/// Closed interval, serialized as `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl From<[f64; 2]> for Range {
    fn from([min, max]: [f64; 2]) -> Self {
        Range { min, max }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.min, r.max]
    }
}

impl Range {
    pub fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn point(x: f64) -> Self {
        Range { min: x, max: x }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::config(field, "range bounds must be finite"));
        }
        if self.min > self.max {
            return Err(Error::config(field, format!("min {} exceeds max {}", self.min, self.max)));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..self.max)
        }
    }
}

/// Parameter intervals sampled uniformly per record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranges {
    /// One interval per axis; defaults to the domain shrunk by the margin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epicenter: Option<Vec<Range>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Range>,
    /// Ricker peak frequency in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_frequency: Option<Range>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub split: String,
    pub count: u64,
    pub master_seed: u64,
    pub grid: Grid,
    pub medium: MediumSpec,
    /// Template; epicenter, amplitude and peak frequency are overridden by
    /// the drawn values.
    pub source: SourceSpec,
    pub sim: SimConfig,
    /// Output sampling rate in Hz.
    pub rate: f64,
    pub interrogators: Vec<Interrogator>,
    #[serde(default)]
    pub ranges: Ranges,
    /// Extra clearance, in meters, kept between default epicenter ranges
    /// and the domain faces (on top of the two-kernel-radius minimum).
    #[serde(default)]
    pub epicenter_margin: f64,
}

impl DatasetSpec {
    pub fn epicenter_ranges(&self) -> Vec<Range> {
        if let Some(r) = &self.ranges.epicenter {
            return r.clone();
        }
        let margin = 2.0 * self.source.kernel_radius + self.epicenter_margin.max(0.0);
        (0..self.grid.ndim())
            .map(|axis| {
                let (lo, hi) = self.grid.bounds(axis);
                Range::new(lo + margin, hi - margin)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::config("dataset.count", "must be at least 1"));
        }
        if self.split.is_empty() {
            return Err(Error::config("dataset.split", "must not be empty"));
        }
        if !(self.epicenter_margin >= 0.0 && self.epicenter_margin.is_finite()) {
            return Err(Error::config("dataset.epicenter_margin", "must be finite and >= 0"));
        }
        if self.interrogators.is_empty() {
            return Err(Error::config("interrogators", "at least one interrogator required"));
        }
        for (i, p) in self.interrogators.iter().enumerate() {
            p.validate(&self.grid, &format!("interrogators[{i}]"))?;
        }
        self.sim.validate(&self.grid)?;

        let epi = self.epicenter_ranges();
        if epi.len() != self.grid.ndim() {
            return Err(Error::config(
                "dataset.ranges.epicenter",
                format!("expected {} intervals, got {}", self.grid.ndim(), epi.len()),
            ));
        }
        for (axis, r) in epi.iter().enumerate() {
            r.validate(&format!("dataset.ranges.epicenter[{axis}]"))?;
        }
        if let Some(r) = &self.ranges.amplitude {
            r.validate("dataset.ranges.amplitude")?;
        }
        if let Some(r) = &self.ranges.peak_frequency {
            r.validate("dataset.ranges.peak_frequency")?;
            if r.min <= 0.0 {
                return Err(Error::config("dataset.ranges.peak_frequency", "frequencies must be positive"));
            }
            if !matches!(self.source.wavelet, Wavelet::Ricker { .. }) {
                return Err(Error::config(
                    "dataset.ranges.peak_frequency",
                    "only applies to a ricker wavelet",
                ));
            }
        }
        // the extreme corners of the ranges must satisfy the source margin
        let lo: Vec<f64> = epi.iter().map(|r| r.min).collect();
        let hi: Vec<f64> = epi.iter().map(|r| r.max).collect();
        for corner in [lo, hi] {
            let mut s = self.source.clone();
            s.epicenter = corner;
            s.validate(&self.grid).map_err(|e| match e {
                Error::Config { reason, .. } => Error::config("dataset.ranges.epicenter", reason),
                other => other,
            })?;
        }
        let medium = self.medium.build(&self.grid)?;
        // worst-case frequency does not change dt; the CFL and rate checks
        // only depend on the medium
        crate::acquisition::effective_config(&self.sim, &self.grid, &medium, self.rate)?;
        Ok(())
    }
}

/// Values drawn for a single record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawnParams {
    pub epicenter: Vec<f64>,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_frequency: Option<f64>,
}

/// Draws the parameters of record `index`: epicenter coordinates in axis
/// order, then amplitude, then peak frequency, each uniform on its interval.
pub fn draw_params(spec: &DatasetSpec, index: u64) -> DrawnParams {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.master_seed, index));
    let epicenter = spec.epicenter_ranges().iter().map(|r| r.draw(&mut rng)).collect();
    let amplitude = spec
        .ranges
        .amplitude
        .map(|r| r.draw(&mut rng))
        .unwrap_or(spec.source.amplitude);
    let peak_frequency = match spec.source.wavelet {
        Wavelet::Ricker { peak_frequency, .. } => {
            Some(spec.ranges.peak_frequency.map(|r| r.draw(&mut rng)).unwrap_or(peak_frequency))
        }
        Wavelet::GaussianPulse { .. } => None,
    };
    DrawnParams {
        epicenter,
        amplitude,
        peak_frequency,
    }
}

/// Source for a record: the template with the drawn values substituted.
pub fn record_source(spec: &DatasetSpec, params: &DrawnParams) -> SourceSpec {
    let mut s = spec.source.clone();
    s.epicenter = params.epicenter.clone();
    s.amplitude = params.amplitude;
    if let (Wavelet::Ricker { delay, .. }, Some(f0)) = (spec.source.wavelet, params.peak_frequency) {
        s.wavelet = Wavelet::Ricker {
            peak_frequency: f0,
            delay,
        };
    }
    s
}

/// Encoded files of a single record, before they are written.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordOutput {
    pub index: u64,
    pub seed: u64,
    pub params: DrawnParams,
    pub dt: f64,
    pub steps: u64,
    pub seismograms: Vec<u8>,
    pub snapshots: Option<(Vec<f64>, Vec<u8>)>,
}

/// Simulates record `index` and encodes its arrays.
pub fn regenerate_record(spec: &DatasetSpec, index: u64) -> Result<RecordOutput> {
    let seed = derive_seed(spec.master_seed, index);
    let wrap = |e: Error| Error::Record {
        index,
        seed,
        source: Box::new(e),
    };
    let params = draw_params(spec, index);
    let source = record_source(spec, &params);
    let medium = spec.medium.build(&spec.grid).map_err(wrap)?;
    let (result, traces) = record(&spec.grid, &medium, &source, &spec.sim, &spec.interrogators, spec.rate)
        .map_err(wrap)?;

    let samples = traces.first().map_or(0, |t| t.samples.len());
    let flat: Vec<f64> = traces.iter().flat_map(|t| t.samples.iter().copied()).collect();
    let seismograms = npy::encode(&[traces.len(), samples], &flat)?;

    let snapshots = if spec.sim.snapshot_every.is_some() {
        let times: Vec<f64> = result.snapshots.iter().map(|(t, _)| *t).collect();
        let mut shape = vec![result.snapshots.len()];
        shape.extend_from_slice(spec.grid.points());
        let flat: Vec<f64> = result
            .snapshots
            .iter()
            .flat_map(|(_, f)| f.values().iter().copied())
            .collect();
        Some((times, npy::encode(&shape, &flat)?))
    } else {
        None
    };
    Ok(RecordOutput {
        index,
        seed,
        params,
        dt: result.dt,
        steps: result.steps,
        seismograms,
        snapshots,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: u64,
    pub seed: u64,
    pub epicenter: Vec<f64>,
    pub params: DrawnParams,
    pub dt: f64,
    pub steps: u64,
    /// Relative paths keyed by array kind (`seismograms`, `snapshots`).
    pub files: BTreeMap<String, String>,
    /// CRC-32C of each file, as 8 hex digits.
    pub checksums: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub records: Vec<ManifestRecord>,
}

pub fn checksum(bytes: &[u8]) -> String {
    format!("{:08x}", crc32c::crc32c(bytes))
}

fn record_file(dir: &str, index: u64) -> String {
    format!("{dir}/{index:06}.npy")
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GenerateOptions {
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
}

/// Generates all records of `spec` into `out_dir` with default options.
pub fn generate(spec: &DatasetSpec, out_dir: &Path) -> Result<Manifest> {
    generate_with(spec, out_dir, GenerateOptions::default())
}

/// Generates all records of `spec` into `out_dir`.
///
/// Any previous `manifest.json`, `seismograms/` and `snapshots/` in
/// `out_dir` are replaced. On failure everything written is removed again.
pub fn generate_with(spec: &DatasetSpec, out_dir: &Path, opts: GenerateOptions) -> Result<Manifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    clean(out_dir)?;

    let outcome = if opts.workers == 0 {
        write_records(spec, out_dir)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?;
        pool.install(|| write_records(spec, out_dir))
    };
    let manifest = outcome.and_then(|records| {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            spec: spec.clone(),
            records,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = out_dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(manifest)
    });
    if manifest.is_err() {
        let _ = clean(out_dir);
    }
    manifest
}

fn clean(out_dir: &Path) -> Result<()> {
    for dir in [SEISMOGRAM_DIR, SNAPSHOT_DIR] {
        let p = out_dir.join(dir);
        if p.exists() {
            fs::remove_dir_all(&p).map_err(|e| Error::io(format!("removing {}", p.display()), e))?;
        }
    }
    let m = out_dir.join(MANIFEST_FILE);
    if m.exists() {
        fs::remove_file(&m).map_err(|e| Error::io(format!("removing {}", m.display()), e))?;
    }
    Ok(())
}

fn write_records(spec: &DatasetSpec, out_dir: &Path) -> Result<Vec<ManifestRecord>> {
    let snapshots = spec.sim.snapshot_every.is_some();
    let mk = |name: &str| {
        let p = out_dir.join(name);
        fs::create_dir_all(&p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
    };
    mk(SEISMOGRAM_DIR)?;
    if snapshots {
        mk(SNAPSHOT_DIR)?;
    }

    let results: Vec<Result<ManifestRecord>> = (0..spec.count)
        .into_par_iter()
        .map(|index| {
            let out = regenerate_record(spec, index)?;
            let mut files = BTreeMap::new();
            let mut checksums = BTreeMap::new();
            let mut write = |kind: &str, dir: &str, bytes: &[u8]| -> Result<()> {
                let rel = record_file(dir, index);
                let path = out_dir.join(&rel);
                fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
                files.insert(kind.to_string(), rel);
                checksums.insert(kind.to_string(), checksum(bytes));
                Ok(())
            };
            write("seismograms", SEISMOGRAM_DIR, &out.seismograms)?;
            let mut snapshot_times = None;
            if let Some((times, bytes)) = &out.snapshots {
                write("snapshots", SNAPSHOT_DIR, bytes)?;
                snapshot_times = Some(times.clone());
            }
            Ok(ManifestRecord {
                index,
                seed: out.seed,
                epicenter: out.params.epicenter.clone(),
                params: out.params,
                dt: out.dt,
                steps: out.steps,
                files,
                checksums,
                snapshot_times,
            })
        })
        .collect();
    // the lowest failing index is reported, independent of scheduling
    results.into_iter().collect()
}

/// One loaded simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub index: u64,
    pub record_seed: u64,
    pub epicenter: Vec<f64>,
    pub params: DrawnParams,
    pub seismograms: Vec<Seismogram>,
    pub snapshots: Option<Vec<(f64, ScalarField)>>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::config(
            "format_version",
            format!("unsupported manifest version {}", manifest.format_version),
        ));
    }
    Ok(manifest)
}

/// Lazily loads records in index order, verifying each file's checksum as
/// it is read.
pub struct DatasetReader {
    root: PathBuf,
    manifest: Manifest,
    next: usize,
}

impl DatasetReader {
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.records.is_empty()
    }

    fn read_verified(&self, entry: &ManifestRecord, kind: &str) -> Result<Option<NpyArray>> {
        let Some(rel) = entry.files.get(kind) else {
            return Ok(None);
        };
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if entry.checksums.get(kind).map(String::as_str) != Some(checksum(&bytes).as_str()) {
            return Err(Error::Integrity { path });
        }
        npy::decode(&bytes).map(Some)
    }

    fn load(&self, entry: &ManifestRecord) -> Result<DatasetRecord> {
        let spec = &self.manifest.spec;
        let arr = self
            .read_verified(entry, "seismograms")?
            .ok_or_else(|| Error::config(format!("records[{}].files", entry.index), "no seismogram file"))?;
        let (n_traces, n_samples) = match arr.shape[..] {
            [a, b] if a == spec.interrogators.len() => (a, b),
            _ => {
                return Err(Error::Format {
                    offset: 0,
                    reason: format!("seismogram array has shape {:?}", arr.shape),
                })
            }
        };
        let seismograms = (0..n_traces)
            .map(|i| Seismogram {
                interrogator_id: spec.interrogators[i].id.clone(),
                rate: spec.rate,
                samples: arr.data[i * n_samples..(i + 1) * n_samples].to_vec(),
            })
            .collect();

        let snapshots = match self.read_verified(entry, "snapshots")? {
            None => None,
            Some(arr) => {
                let times = entry.snapshot_times.clone().unwrap_or_default();
                let n = spec.grid.len();
                if arr.shape.first() != Some(&times.len()) || arr.data.len() != times.len() * n {
                    return Err(Error::Format {
                        offset: 0,
                        reason: format!("snapshot array has shape {:?}", arr.shape),
                    });
                }
                Some(
                    times
                        .iter()
                        .enumerate()
                        .map(|(i, &t)| Ok((t, ScalarField::new(spec.grid, arr.data[i * n..(i + 1) * n].to_vec())?)))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
        };
        Ok(DatasetRecord {
            index: entry.index,
            record_seed: entry.seed,
            epicenter: entry.epicenter.clone(),
            params: entry.params.clone(),
            seismograms,
            snapshots,
        })
    }
}

impl Iterator for DatasetReader {
    type Item = Result<DatasetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let entry = self.manifest.records.get(self.next)?;
        self.next += 1;
        Some(self.load(entry))
    }
}

/// Opens a dataset from its manifest; records are sorted by index.
pub fn load_dataset(manifest_path: &Path) -> Result<DatasetReader> {
    let mut manifest = read_manifest(manifest_path)?;
    manifest.records.sort_by_key(|r| r.index);
    let root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(DatasetReader {
        root,
        manifest,
        next: 0,
    })
}

/// Loads all records, failing on the first error.
pub fn load_all(manifest_path: &Path) -> Result<Vec<DatasetRecord>> {
    load_dataset(manifest_path)?.collect()
}
