//! Experiment configuration: JSON file + dotted-path overrides + flags.
//!
//! A configuration fully determines an experiment. Its identity is the hash
//! of the resolved configuration with the `seed` and `output_dir` fields
//! neutralized, so the same experiment re-run under a different seed or into
//! a different directory reuses the same key with a different seed suffix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scoremetry::isac::SceneConfig;
use scoremetry::report::config_hash;

use crate::error::{CliError, CliResult};

/// Which experiment a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DetectKld,
    LocalizeBcrb,
    Mmse,
    Mi,
    Identities,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::DetectKld => "detect-kld",
            ExperimentKind::LocalizeBcrb => "localize-bcrb",
            ExperimentKind::Mmse => "mmse",
            ExperimentKind::Mi => "mi",
            ExperimentKind::Identities => "identities",
        }
    }
}

/// Knobs of the estimators themselves (grids, sample counts, guards).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    /// Log-spaced σ nodes for the divergence/information integrators.
    pub info_nodes: usize,
    /// Integrator grid bottom as a multiple of the data scale.
    pub sigma_min_factor: f64,
    /// Integrator grid top as a multiple of the data scale.
    pub sigma_max_factor: f64,
    /// Endpoint decay guard for the integrators.
    pub endpoint_fraction: f64,
    /// Monte-Carlo samples per sweep point for integrator estimates.
    pub mc_samples: usize,
    /// Prior draws for prior-information estimates and reference bounds.
    pub prior_draws: usize,
    /// θ draws for measurement-information estimates.
    pub fim_theta_draws: usize,
    /// Measurement draws per θ.
    pub fim_y_draws: usize,
    /// Trials for threshold-detector Monte-Carlo probabilities.
    pub mc_trials: usize,
    /// False-alarm rate for detection probabilities.
    pub p_fa: f64,
    /// Independent batches used to attach a standard error to bound
    /// estimates.
    pub stderr_batches: usize,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec {
            info_nodes: 64,
            sigma_min_factor: 1e-3,
            sigma_max_factor: 1e2,
            endpoint_fraction: 0.01,
            mc_samples: 10_000,
            prior_draws: 6_000,
            fim_theta_draws: 256,
            fim_y_draws: 8,
            mc_trials: 100_000,
            p_fa: 0.1,
            stderr_batches: 8,
        }
    }
}

/// Knobs of the training runs that produce checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSpec {
    /// Hard cap on optimizer steps; whichever of `iterations` and `epochs`
    /// is reached first ends training.
    pub iterations: u64,
    /// Passes over the training set.
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub ema_decay: f64,
    /// Probability of replacing a class label with the null token while
    /// training class-conditional networks.
    pub p_uncond: f64,
    /// Training-set rows (snapshots or draws, depending on experiment).
    pub n_train: usize,
    /// Cross-section quantile classes for class-conditional networks.
    pub classes: usize,
    /// Hidden-layer widths; empty means a (σ-aware) linear map.
    pub hidden: Vec<usize>,
    /// Number of noise levels in denoising schedules.
    pub sigma_levels: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            iterations: 100_000_000,
            epochs: 100,
            batch: 128,
            lr: 1e-3,
            ema_decay: 0.999,
            p_uncond: 0.1,
            n_train: 8192,
            classes: 10,
            hidden: Vec::new(),
            sigma_levels: 16,
        }
    }
}

/// What the sweep grid enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Target per-block divergence; mapped to transmit power through the
    /// closed form at the nominal cross-section. A grid value of exactly 0
    /// is evaluated at a vanishing transmit power.
    Kld,
    /// Transmit power in dBm.
    TransmitPowerDbm,
    /// Signal-to-noise ratio (linear). A grid value of exactly 0 means an
    /// independent/noise-only configuration where that is meaningful.
    Snr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variable: SweepVariable::Snr,
            grid: Vec::new(),
        }
    }
}

/// Prior for the linear-model posterior-mean experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MmsePriorKind {
    /// Standard normal prior in `dim` dimensions, random wide `n_meas × dim`
    /// model matrix.
    Gaussian,
    /// The scalar two-component reference mixture with the identity model.
    TwoModes,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmseSpec {
    pub prior: MmsePriorKind,
    #[serde(default = "default_mmse_dim")]
    pub dim: usize,
    #[serde(default = "default_mmse_meas")]
    pub n_meas: usize,
    #[serde(default = "default_mmse_trials")]
    pub trials: usize,
    #[serde(default = "default_mmse_iters")]
    pub max_iter: usize,
}

fn default_mmse_dim() -> usize {
    32
}
fn default_mmse_meas() -> usize {
    16
}
fn default_mmse_trials() -> usize {
    400
}
fn default_mmse_iters() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub training: TrainSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub mmse: Option<MmseSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> String {
    "out".to_string()
}

impl ExperimentConfig {
    /// Hash of the resolved configuration with `seed` and `output_dir`
    /// neutralized: the experiment's identity.
    pub fn run_key(&self) -> CliResult<String> {
        let mut c = self.clone();
        c.seed = 0;
        c.output_dir = String::new();
        config_hash(&c).map_err(CliError::from)
    }

    pub fn expect_kind(&self, kind: ExperimentKind) -> CliResult<()> {
        if self.experiment != kind {
            return Err(CliError::config(format!(
                "this command needs a `{}` configuration, got `{}`",
                kind.name(),
                self.experiment.name()
            )));
        }
        Ok(())
    }

    pub fn scene(&self) -> CliResult<&SceneConfig> {
        self.scene
            .as_ref()
            .ok_or_else(|| CliError::config("configuration has no `scene` section"))
    }

    pub fn sweep_grid(&self) -> CliResult<&[f64]> {
        if self.sweep.grid.is_empty() {
            return Err(CliError::config("sweep grid is empty"));
        }
        if !self.sweep.grid.iter().all(|v| v.is_finite()) {
            return Err(CliError::config("sweep grid holds a non-finite value"));
        }
        Ok(&self.sweep.grid)
    }

    pub fn mmse_spec(&self) -> CliResult<&MmseSpec> {
        self.mmse
            .as_ref()
            .ok_or_else(|| CliError::config("configuration has no `mmse` section"))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output_dir)
    }

    fn validate(&self) -> CliResult<()> {
        let e = &self.estimator;
        let t = &self.training;
        let checks: [(bool, &str); 12] = [
            (e.info_nodes >= 2, "estimator.info_nodes must be at least 2"),
            (
                e.sigma_min_factor > 0.0 && e.sigma_min_factor < e.sigma_max_factor,
                "estimator sigma factors must satisfy 0 < min < max",
            ),
            (e.mc_samples >= 2, "estimator.mc_samples must be at least 2"),
            (e.prior_draws >= 2, "estimator.prior_draws must be at least 2"),
            (
                e.fim_theta_draws >= 2 && e.fim_y_draws >= 1,
                "estimator FIM draw counts must be positive (θ at least 2)",
            ),
            (
                e.p_fa > 0.0 && e.p_fa < 1.0,
                "estimator.p_fa must lie strictly inside (0, 1)",
            ),
            (
                e.stderr_batches >= 2,
                "estimator.stderr_batches must be at least 2",
            ),
            (t.batch >= 1 && t.n_train >= 2, "training sizes must be positive"),
            (
                t.lr > 0.0 && t.lr.is_finite(),
                "training.lr must be positive and finite",
            ),
            (
                (0.0..1.0).contains(&t.ema_decay),
                "training.ema_decay must lie in [0, 1)",
            ),
            (
                (0.0..=1.0).contains(&t.p_uncond),
                "training.p_uncond must lie in [0, 1]",
            ),
            (t.sigma_levels >= 2, "training.sigma_levels must be at least 2"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(CliError::config(msg));
            }
        }
        if let Some(m) = &self.mmse {
            if m.trials < 1 || m.max_iter < 1 || m.dim < 1 || m.n_meas < 1 {
                return Err(CliError::config("mmse sizes must be positive"));
            }
        }
        Ok(())
    }
}

/// Parse an override value: JSON when it parses as JSON, else a bare string.
fn override_value(raw: &str) -> serde_json::Value {
    serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()))
}

/// Apply `--override key.path=value` onto the raw JSON tree. Intermediate
/// objects are created as needed; a non-object intermediate is an error.
fn apply_override(tree: &mut serde_json::Value, spec: &str) -> CliResult<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        CliError::config(format!("override `{spec}` is not of the form KEY=VALUE"))
    })?;
    if path.is_empty() {
        return Err(CliError::config("override has an empty key path"));
    }
    let mut node = &mut *tree;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node.as_object_mut().ok_or_else(|| {
            CliError::config(format!(
                "override `{path}`: `{}` is not a JSON object",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), override_value(raw));
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new()));
    }
    unreachable!("loop always returns on the last path segment");
}

/// Load a configuration file, apply overrides, then the seed/out flags.
pub fn load_config(
    path: &Path,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut tree: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{} is not valid JSON: {e}", path.display())))?;
    if !tree.is_object() {
        return Err(CliError::config(format!(
            "{} must hold a JSON object",
            path.display()
        )));
    }
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(tree)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in identity-suite configuration for running without a file.
pub fn identities_default() -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::Identities,
        scene: None,
        estimator: EstimatorSpec::default(),
        training: TrainSpec::default(),
        sweep: SweepSpec::default(),
        mmse: None,
        output_dir: default_output_dir(),
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "experiment": "identities",
            "output_dir": "out/x",
            "seed": 5
        })
    }

    fn write_tmp(v: &serde_json::Value) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), serde_json::to_vec_pretty(v).unwrap()).unwrap();
        f
    }

    #[test]
    fn defaults_fill_in_and_key_ignores_seed_and_outdir() {
        let f = write_tmp(&minimal_json());
        let cfg = load_config(f.path(), &[], None, None).unwrap();
        assert_eq!(cfg.estimator.info_nodes, 64);
        assert_eq!(cfg.training.batch, 128);
        let k1 = cfg.run_key().unwrap();

        let cfg2 = load_config(f.path(), &[], Some(99), Some(Path::new("elsewhere"))).unwrap();
        assert_eq!(cfg2.seed, 99);
        assert_eq!(cfg2.output_dir, "elsewhere");
        assert_eq!(cfg2.run_key().unwrap(), k1, "seed/out must not move the key");

        let f3 = write_tmp(&serde_json::json!({
            "experiment": "identities",
            "estimator": {"info_nodes": 32}
        }));
        let cfg3 = load_config(f3.path(), &[], None, None).unwrap();
        assert_ne!(cfg3.run_key().unwrap(), k1, "estimator changes move the key");
    }

    #[test]
    fn overrides_parse_json_and_create_paths() {
        let f = write_tmp(&minimal_json());
        let cfg = load_config(
            f.path(),
            &[
                "sweep.variable=\"kld\"".to_string(),
                "sweep.grid=[0.5, 2]".to_string(),
                "estimator.info_nodes=16".to_string(),
                "training.lr=0.01".to_string(),
            ],
            None,
            None,
        )
        .unwrap();
        assert_eq!(cfg.sweep.variable, SweepVariable::Kld);
        assert_eq!(cfg.sweep.grid, vec![0.5, 2.0]);
        assert_eq!(cfg.estimator.info_nodes, 16);
        assert_eq!(cfg.training.lr, 0.01);

        // A bare word parses as a string, so enum overrides work unquoted.
        let cfg = load_config(f.path(), &["sweep.variable=snr".to_string()], None, None).unwrap();
        assert_eq!(cfg.sweep.variable, SweepVariable::Snr);
    }

    #[test]
    fn unknown_fields_and_bad_overrides_are_config_errors() {
        let f = write_tmp(&serde_json::json!({"experiment": "identities", "typo_field": 1}));
        let err = load_config(f.path(), &[], None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let f = write_tmp(&minimal_json());
        let err = load_config(f.path(), &["no_equals_sign".to_string()], None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err =
            load_config(f.path(), &["experiment.sub=1".to_string()], None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2, "override through a non-object must fail");
        let err = load_config(f.path(), &["estimator.p_fa=1.5".to_string()], None, None)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2, "validation failures are config errors");
    }

    #[test]
    fn kind_and_section_guards() {
        let cfg = identities_default();
        assert!(cfg.expect_kind(ExperimentKind::Identities).is_ok());
        assert_eq!(
            cfg.expect_kind(ExperimentKind::Mi).unwrap_err().exit_code(),
            2
        );
        assert_eq!(cfg.scene().unwrap_err().exit_code(), 2);
        assert_eq!(cfg.sweep_grid().unwrap_err().exit_code(), 2);
        assert_eq!(cfg.mmse_spec().unwrap_err().exit_code(), 2);
    }
}
