//! Experiment artifacts: metric reports, durable CSV output, config hashing,
//! and raw-tensor export with JSON sidecars.
//!
//! Every number that leaves an experiment should remain traceable to the
//! exact configuration and seed that produced it. The pieces here enforce
//! that discipline:
//!
//! * [`MetricReport`] — one estimated quantity with its Monte Carlo standard
//!   error, the evaluation grid behind it, and the hash of the configuration
//!   that produced it. Serializes to JSON and to a flat CSV row.
//! * [`config_hash`] — a short deterministic fingerprint of any serializable
//!   configuration, used to key output files and to detect stale artifacts.
//! * [`RunStamp`] — the provenance columns (config hash, seed, build
//!   description) appended to every CSV row an experiment writes.
//! * [`CsvSink`] — a line writer that flushes after every row, so an
//!   interrupted sweep still leaves the completed rows on disk.
//! * [`write_tensor_f64`] / [`read_tensor_f64`] — raw little-endian `f64`
//!   tensor files with a JSON sidecar describing shape and provenance, plus
//!   [`export_detection_dataset`] for simulated detection data.
//!
//! Floating-point values are formatted with 17 significant digits
//! ([`fmt_g17`]), enough for bit-exact round trips through text.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::isac::{DetectionDataset, SceneConfig, SensingScene};
use crate::{Error, Result};

/// Format a float with 17 significant digits (scientific notation), the
/// smallest count guaranteeing that parsing the string recovers the exact
/// `f64` bits.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// 64-bit FNV-1a over a byte string. Small, dependency-free, and stable
/// across platforms and releases — which is the property a persisted
/// configuration fingerprint needs (the standard library's hasher is
/// explicitly unstable across versions).
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic 16-hex-digit fingerprint of any serializable configuration.
///
/// The value is serialized to canonical JSON (struct fields in declaration
/// order, map keys sorted) and hashed with 64-bit FNV-1a, so equal
/// configurations hash equally across runs, platforms, and processes.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)
        .map_err(|e| Error::invalid(format!("configuration is not serializable: {e}")))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

/// Build description for provenance columns: `git describe --always --dirty
/// --tags` when the working directory is a git checkout, otherwise the crate
/// version.
pub fn git_describe() -> String {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output();
    if let Ok(out) = out {
        if out.status.success() {
            let s = String::from_utf8_lossy(&out.stdout).trim().to_string();
            if !s.is_empty() {
                return s;
            }
        }
    }
    concat!("v", env!("CARGO_PKG_VERSION")).to_string()
}

/// One estimated quantity with its uncertainty and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    /// What was estimated (`"kld"`, `"mi"`, `"bcrb"`, ...).
    pub metric: String,
    pub value: f64,
    /// Monte Carlo standard error of `value` (0 for deterministic numbers).
    pub stderr: f64,
    /// Fingerprint of the configuration that produced the value.
    #[serde(rename = "config-hash")]
    pub config_hash: String,
    /// The evaluation grid behind the value — noise levels for an integrand,
    /// sweep points for a curve; empty for plain scalars.
    pub grid: Vec<f64>,
    /// Number of Monte Carlo samples consumed.
    pub samples: u64,
}

impl MetricReport {
    pub fn new(
        metric: impl Into<String>,
        value: f64,
        stderr: f64,
        config_hash: impl Into<String>,
        grid: Vec<f64>,
        samples: u64,
    ) -> Self {
        MetricReport {
            metric: metric.into(),
            value,
            stderr,
            config_hash: config_hash.into(),
            grid,
            samples,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("report serialization failed: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::invalid(format!("report deserialization failed: {e}")))
    }

    /// Column names matching [`csv_row`](Self::csv_row).
    pub const CSV_HEADER: &'static str = "metric,value,stderr,config_hash,samples,grid";

    /// The report as one flat CSV row; the grid is `;`-joined inside a single
    /// field so the row shape is fixed.
    pub fn csv_row(&self) -> String {
        let grid = self
            .grid
            .iter()
            .map(|&g| fmt_g17(g))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{},{},{},{},{}",
            self.metric,
            fmt_g17(self.value),
            fmt_g17(self.stderr),
            self.config_hash,
            self.samples,
            grid
        )
    }
}

/// Provenance fields appended to every CSV row an experiment writes: the
/// configuration fingerprint, the master seed, and the build description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
    pub describe: String,
}

impl RunStamp {
    /// Stamp for a configuration and seed, with the build description taken
    /// from [`git_describe`].
    pub fn new<T: Serialize>(config: &T, seed: u64) -> Result<Self> {
        Ok(RunStamp {
            config_hash: config_hash(config)?,
            seed,
            describe: git_describe(),
        })
    }

    /// Column names matching [`csv_fields`](Self::csv_fields).
    pub const CSV_COLS: &'static str = "config_hash,seed,describe";

    pub fn csv_fields(&self) -> [String; 3] {
        [
            self.config_hash.clone(),
            self.seed.to_string(),
            self.describe.clone(),
        ]
    }
}

/// A CSV writer that flushes after every row.
///
/// Sweeps can run for minutes; flushing per row means an interrupted run
/// still leaves every completed row on disk. Fields may not contain commas
/// or newlines — all values written here are numbers, hashes, or short
/// names, so quoting would only hide bugs.
#[derive(Debug)]
pub struct CsvSink {
    file: File,
    path: PathBuf,
}

impl CsvSink {
    /// Create (truncating) a CSV file with the given header line. Parent
    /// directories are created as needed.
    pub fn create(path: impl AsRef<Path>, header: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)?;
        writeln!(file, "{header}")?;
        file.flush()?;
        Ok(CsvSink { file, path })
    }

    /// Write one row and flush it to disk.
    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let mut line = String::new();
        for (i, f) in fields.iter().enumerate() {
            let f = f.as_ref();
            if f.contains(',') || f.contains('\n') {
                return Err(Error::invalid(format!(
                    "CSV field may not contain commas or newlines: {f:?}"
                )));
            }
            if i > 0 {
                line.push(',');
            }
            line.push_str(f);
        }
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Sidecar keys that describe the binary layout; callers cannot override
/// them.
const RESERVED_SIDECAR_KEYS: [&str; 3] = ["dtype", "order", "shape"];

/// Write a tensor as raw little-endian `f64` bytes plus a JSON sidecar.
///
/// `stem` names the pair: the data goes to `<stem>.f64` (row-major), the
/// sidecar to `<stem>.json`. The sidecar records `dtype`, `order`, and
/// `shape`, merged with the caller's `extra` object (provenance: seeds,
/// scene hashes, labels). Returns the two paths written.
pub fn write_tensor_f64(
    stem: &Path,
    data: &[f64],
    shape: &[usize],
    extra: serde_json::Value,
) -> Result<(PathBuf, PathBuf)> {
    let expect: usize = shape.iter().product();
    if shape.is_empty() || expect != data.len() {
        return Err(Error::dims(format!(
            "shape {shape:?} implies {expect} values, got {}",
            data.len()
        )));
    }
    let mut sidecar = match extra {
        serde_json::Value::Object(map) => map,
        serde_json::Value::Null => serde_json::Map::new(),
        other => {
            return Err(Error::invalid(format!(
                "sidecar extra must be a JSON object or null, got {other}"
            )))
        }
    };
    for key in RESERVED_SIDECAR_KEYS {
        if sidecar.contains_key(key) {
            return Err(Error::invalid(format!(
                "sidecar key {key:?} is reserved for the tensor layout"
            )));
        }
    }
    sidecar.insert("dtype".into(), json!("f64-le"));
    sidecar.insert("order".into(), json!("row-major"));
    sidecar.insert("shape".into(), json!(shape));

    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let bin_path = stem.with_extension("f64");
    let json_path = stem.with_extension("json");

    let mut bytes = Vec::with_capacity(data.len() * 8);
    for &v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin_path, bytes)?;
    let sidecar_text = serde_json::to_string_pretty(&serde_json::Value::Object(sidecar))
        .map_err(|e| Error::invalid(format!("sidecar serialization failed: {e}")))?;
    fs::write(&json_path, sidecar_text)?;
    Ok((bin_path, json_path))
}

/// Read back a tensor pair written by [`write_tensor_f64`]: the values, the
/// shape from the sidecar, and the full sidecar object.
pub fn read_tensor_f64(stem: &Path) -> Result<(Vec<f64>, Vec<usize>, serde_json::Value)> {
    let bin_path = stem.with_extension("f64");
    let json_path = stem.with_extension("json");
    let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(&json_path)?)
        .map_err(|e| Error::invalid(format!("bad sidecar {}: {e}", json_path.display())))?;
    let dtype = sidecar.get("dtype").and_then(|v| v.as_str());
    if dtype != Some("f64-le") {
        return Err(Error::invalid(format!(
            "unsupported dtype {dtype:?} in {}",
            json_path.display()
        )));
    }
    let shape: Vec<usize> = sidecar
        .get("shape")
        .and_then(|v| v.as_array())
        .map(|a| a.iter().filter_map(|v| v.as_u64()).map(|v| v as usize).collect())
        .unwrap_or_default();
    let bytes = fs::read(&bin_path)?;
    let expect: usize = shape.iter().product();
    if shape.is_empty() || bytes.len() != expect * 8 {
        return Err(Error::dims(format!(
            "{}: {} bytes does not match sidecar shape {shape:?}",
            bin_path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("exact 8-byte chunks")))
        .collect();
    Ok((data, shape, sidecar))
}

/// Export a simulated detection dataset: the snapshot matrix as a raw tensor
/// plus a sidecar carrying the generating scene (and its hash), the seed,
/// and the per-block labels and fading amplitudes.
pub fn export_detection_dataset(
    stem: &Path,
    data: &DetectionDataset,
    scene: &SensingScene,
    seed: u64,
) -> Result<(PathBuf, PathBuf)> {
    let snapshots = data.snapshots();
    let rows: Vec<f64> = snapshots.iter().copied().collect();
    let scene_cfg = SceneConfig::from_scene(scene);
    let extra = json!({
        "seed": seed,
        "scene_hash": config_hash(&scene_cfg)?,
        "scene": scene_cfg,
        "block_len": data.block_len(),
        "n_antennas": data.n_antennas(),
        "noise_power": data.noise_power(),
        "unit_kld_per_snapshot": data.unit_kld_per_snapshot(),
        "labels": data.labels(),
        "gammas": data.gammas(),
    });
    write_tensor_f64(
        stem,
        &rows,
        &[snapshots.nrows(), snapshots.ncols()],
        extra,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isac::{gen_detection, Hypothesis};
    use crate::numerics::RngStream;

    #[test]
    fn seventeen_digit_format_round_trips_exactly() {
        let values = [
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            5e-324,             // smallest subnormal
            f64::MAX,
            -f64::MIN_POSITIVE,
            0.0,
            -0.0,
            1.0,
            -123456.789012345,
        ];
        for &v in &values {
            let s = fmt_g17(v);
            let back: f64 = s.parse().expect("parseable");
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn fnv_hash_matches_published_vectors() {
        // Classic FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[derive(Serialize)]
    struct Demo {
        n: usize,
        label: String,
    }

    #[test]
    fn config_hash_is_deterministic_and_sensitive() {
        let a = Demo { n: 4, label: "x".into() };
        let b = Demo { n: 4, label: "x".into() };
        let c = Demo { n: 5, label: "x".into() };
        let ha = config_hash(&a).unwrap();
        assert_eq!(ha.len(), 16);
        assert!(ha.chars().all(|ch| ch.is_ascii_hexdigit()));
        assert_eq!(ha, config_hash(&b).unwrap());
        assert_ne!(ha, config_hash(&c).unwrap());
        // Maps hash by sorted key order, so insertion order cannot matter.
        let m1: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":2}"#).unwrap();
        let m2: serde_json::Value = serde_json::from_str(r#"{"b":2,"a":1}"#).unwrap();
        assert_eq!(config_hash(&m1).unwrap(), config_hash(&m2).unwrap());
    }

    #[test]
    fn metric_report_round_trips_with_exact_floats() {
        let r = MetricReport::new(
            "kld",
            1.0 / 3.0,
            0.001234,
            "00ff00ff00ff00ff",
            vec![0.1, 1.0, 10.0],
            6000,
        );
        // JSON keys are the documented set (parsed maps sort their keys).
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        assert_eq!(
            keys,
            vec!["config-hash", "grid", "metric", "samples", "stderr", "value"]
        );
        let back = MetricReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.metric, r.metric);
        assert_eq!(back.value.to_bits(), r.value.to_bits());
        assert_eq!(back.stderr.to_bits(), r.stderr.to_bits());
        assert_eq!(back.config_hash, r.config_hash);
        assert_eq!(back.grid, r.grid);
        assert_eq!(back.samples, r.samples);

        // CSV row: fixed field count, floats parse back bit-exactly.
        let row = r.csv_row();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[0], "kld");
        assert_eq!(fields[1].parse::<f64>().unwrap().to_bits(), r.value.to_bits());
        assert_eq!(fields[4], "6000");
        let grid: Vec<f64> = fields[5].split(';').map(|s| s.parse().unwrap()).collect();
        assert_eq!(grid, r.grid);
    }

    #[test]
    fn csv_sink_flushes_every_row_and_rejects_bad_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("rows.csv");
        let mut sink = CsvSink::create(&path, "a,b").unwrap();
        sink.row(&["1", "2"]).unwrap();
        // The row must already be on disk — no explicit flush, no drop.
        let on_disk = std::fs::read_to_string(&path).unwrap();
        assert_eq!(on_disk, "a,b\n1,2\n");
        sink.row(&[fmt_g17(0.5).as_str(), "x"]).unwrap();
        let on_disk = std::fs::read_to_string(&path).unwrap();
        assert_eq!(on_disk.lines().count(), 3);
        assert!(sink.row(&["bad,field", "y"]).is_err());
        assert!(sink.row(&["bad\nfield", "y"]).is_err());
        // Re-creating truncates.
        let _sink2 = CsvSink::create(&path, "a,b").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
    }

    #[test]
    fn run_stamp_carries_hash_seed_and_build() {
        let stamp = RunStamp::new(&Demo { n: 1, label: "s".into() }, 42).unwrap();
        let fields = stamp.csv_fields();
        assert_eq!(fields[0], config_hash(&Demo { n: 1, label: "s".into() }).unwrap());
        assert_eq!(fields[1], "42");
        assert!(!fields[2].is_empty());
        assert_eq!(RunStamp::CSV_COLS.split(',').count(), 3);
    }

    #[test]
    fn tensor_files_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("tensors").join("demo");
        let data = [1.0, -0.5, 1e-300, f64::MAX, 0.0, 2.25];
        let (bin, side) =
            write_tensor_f64(&stem, &data, &[2, 3], serde_json::json!({"seed": 7})).unwrap();
        assert!(bin.ends_with("demo.f64") && side.ends_with("demo.json"));
        let (back, shape, sidecar) = read_tensor_f64(&stem).unwrap();
        assert_eq!(shape, vec![2, 3]);
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(sidecar["seed"], 7);
        assert_eq!(sidecar["dtype"], "f64-le");
        assert_eq!(sidecar["order"], "row-major");

        // Reserved keys and shape mismatches are rejected.
        assert!(write_tensor_f64(&stem, &data, &[2, 3], serde_json::json!({"shape": 1})).is_err());
        assert!(write_tensor_f64(&stem, &data, &[4, 3], serde_json::Value::Null).is_err());
    }

    #[test]
    fn detection_export_records_scene_and_block_metadata() {
        let scene = SensingScene::small().with_snapshots(2).unwrap();
        let data = gen_detection(&scene, Hypothesis::Signal, 3, RngStream::new(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("h1");
        export_detection_dataset(&stem, &data, &scene, 9).unwrap();
        let (values, shape, sidecar) = read_tensor_f64(&stem).unwrap();
        assert_eq!(shape, vec![6, 32]); // 3 blocks x 2 snapshots, 2x16 antennas
        assert_eq!(values.len(), 6 * 32);
        assert_eq!(sidecar["labels"].as_array().unwrap().len(), 3);
        assert_eq!(sidecar["gammas"].as_array().unwrap().len(), 3);
        assert_eq!(sidecar["seed"], 9);
        let expect_hash = config_hash(&SceneConfig::from_scene(&scene)).unwrap();
        assert_eq!(sidecar["scene_hash"], expect_hash.as_str());
        // The sidecar's embedded scene reproduces the generator.
        let embedded: SceneConfig =
            serde_json::from_value(sidecar["scene"].clone()).unwrap();
        assert_eq!(config_hash(&embedded).unwrap(), expect_hash);
        // First stored value matches the dataset matrix.
        assert_eq!(values[0].to_bits(), data.snapshots()[[0, 0]].to_bits());
    }
}
