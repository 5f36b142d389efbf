//! Shared experiment plumbing: scene construction, sweep-variable mapping,
//! cross-section quantile classes, and synthetic data draws used by both the
//! training and evaluation commands.

use ndarray::{Array2, ArrayView2};

use scoremetry::isac::{dbm_to_watts, gen_detection, Hypothesis, SensingScene};
use scoremetry::numerics::{RealMat, RngStream};

use crate::config::{ExperimentConfig, SweepVariable};
use crate::error::{CliError, CliResult};

/// Stand-in for "transmitter off": small enough that every derived quantity
/// (divergence, detection advantage) vanishes to double precision, while
/// keeping the scene algebra well defined.
pub const VANISHING_POWER_W: f64 = 1e-30;

pub fn scene_from(cfg: &ExperimentConfig) -> CliResult<SensingScene> {
    cfg.scene()?.to_scene().map_err(CliError::from)
}

/// Map one sweep-grid value to a transmit power in watts.
///
/// * `kld`: target per-block divergence, inverted through the closed form at
///   the nominal (mean) cross-section; a target of exactly 0 uses a
///   vanishing power.
/// * `transmit-power-dbm`: direct dBm → W conversion.
pub fn grid_to_power(scene: &SensingScene, variable: SweepVariable, value: f64) -> CliResult<f64> {
    match variable {
        SweepVariable::TransmitPowerDbm => Ok(dbm_to_watts(value)),
        SweepVariable::Kld => {
            if value == 0.0 {
                return Ok(VANISHING_POWER_W);
            }
            if value < 0.0 {
                return Err(CliError::config(format!(
                    "divergence targets must be nonnegative, got {value}"
                )));
            }
            let nominal = nominal_fixed_scene(scene)?;
            nominal.power_for_kld(value).map_err(CliError::from)
        }
        SweepVariable::Snr => Err(CliError::config(
            "an `snr` sweep does not map to a sensing-scene power",
        )),
    }
}

/// The scene with its cross-section prior collapsed to the prior mean, used
/// to anchor divergence targets for random-cross-section sweeps.
pub fn nominal_fixed_scene(scene: &SensingScene) -> CliResult<SensingScene> {
    let mean = scene.rcs().mean();
    scene
        .with_rcs(scoremetry::isac::RcsPrior::Fixed { value: mean })
        .map_err(CliError::from)
}

/// Quantile edges splitting an exponential prior with the given mean into
/// `classes` equal-probability bins: edge `i` is the `i/classes` quantile.
pub fn exponential_class_edges(mean: f64, classes: usize) -> Vec<f64> {
    (1..classes)
        .map(|i| -mean * (1.0 - i as f64 / classes as f64).ln())
        .collect()
}

/// Class index of a draw given ascending quantile edges.
pub fn class_of(gamma: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|&&e| gamma >= e).count()
}

/// Draw whole blocks of detection snapshots covering at least `min_rows`
/// rows, returning the snapshot matrix and the per-block cross-sections.
pub fn detection_rows(
    scene: &SensingScene,
    hypothesis: Hypothesis,
    min_rows: usize,
    stream: RngStream,
) -> CliResult<(RealMat, Vec<f64>)> {
    let k = scene.snapshots();
    let blocks = min_rows.div_ceil(k).max(1);
    let data = gen_detection(scene, hypothesis, blocks, stream)?;
    Ok((data.snapshots().to_owned(), data.gammas().to_vec()))
}

/// Per-coordinate pooled standard deviation around zero (not the mean):
/// the natural scale for zero-mean noise snapshots.
pub fn rms_scale(x: ArrayView2<f64>) -> f64 {
    let n = (x.nrows() * x.ncols()).max(1);
    (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

/// Divide every entry by `scale`.
pub fn scale_rows(x: &RealMat, scale: f64) -> RealMat {
    x.mapv(|v| v / scale)
}

/// Jointly Gaussian test pair: `x ~ N(0,1)`, `y = √snr·x + w`, `w ~ N(0,1)`,
/// so the mutual information is `½·ln(1+snr)` and `snr = 0` gives an
/// independent pair.
pub fn gaussian_pairs(snr: f64, n: usize, stream: RngStream) -> CliResult<(RealMat, RealMat)> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return Err(CliError::config(format!(
            "snr grid values must be nonnegative and finite, got {snr}"
        )));
    }
    let root = snr.sqrt();
    let x = stream.substream(0).standard_normal_mat(n, 1);
    let w = stream.substream(1).standard_normal_mat(n, 1);
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        y[[i, 0]] = root * x[[i, 0]] + w[[i, 0]];
    }
    Ok((x, y))
}

/// Conditional moments of `x | y` for [`gaussian_pairs`]: mean `ρ·y` with
/// `ρ = √snr/(1+snr)` and variance `1/(1+snr)`.
pub fn gaussian_pair_posterior(snr: f64) -> (f64, f64) {
    (snr.sqrt() / (1.0 + snr), 1.0 / (1.0 + snr))
}
