//! Mutual information and KL divergence by integrating score differences
//! over noise levels.
//!
//! For distributions `p` (sampled) and `q` (reference), corrupt a sample
//! `x ~ p` to `x_t = x + σn` and compare how well each distribution's
//! *smoothed score* explains the noise:
//!
//! ```text
//! KL(p ‖ q) = ∫ E[ ‖n + σ·s_q(x_t)‖² − ‖n + σ·s_p(x_t)‖² ] d(ln σ)
//! ```
//!
//! over σ from 0 to ∞. The reference score appears in the *positive* term:
//! a mismatched reference explains the noise worse, leaving a positive gap.
//! Mutual information is the same integral with `q` the marginal of `x` and
//! `p` the conditional given the paired `y`, averaged over joint draws.
//!
//! Three implementation choices matter for variance and correctness:
//!
//! * **Deterministic grid.** A log-spaced σ grid with trapezoid quadrature
//!   in `u = ln σ` (64 nodes by default) replaces Monte-Carlo importance
//!   sampling — reproducible, and the integrand can be traced per node.
//! * **Common random numbers.** The same noise draw `n` feeds both terms at
//!   a node, cancelling most of their shared variance; with identical score
//!   functions the per-sample integrand is *identically* zero, not just in
//!   expectation.
//! * **Endpoint guard.** The integral is truncated to
//!   `[1e-3, 1e2]·scale`; estimation errors out unless the mean integrand
//!   at both endpoints is below 1% of its peak (plus 3 standard errors of
//!   the endpoint mean), because each term alone diverges as σ→0 and only
//!   the difference is integrable.

use ndarray::ArrayView2;

use crate::losses::SigmaSchedule;
use crate::numerics::{RealMat, RngStream};
use crate::score::{CondSmoothedScore, SmoothedScore};
use crate::{Error, Result};

/// Quadrature settings for [`mi_score`] / [`kld_score`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InfoConfig {
    /// Number of log-spaced σ nodes.
    pub n_nodes: usize,
    /// Grid bottom as a multiple of `scale`.
    pub sigma_min_factor: f64,
    /// Grid top as a multiple of `scale`.
    pub sigma_max_factor: f64,
    /// Length scale of the data; `None` derives the pooled per-coordinate
    /// standard deviation from the samples.
    pub scale: Option<f64>,
    /// Endpoint guard: the |mean integrand| at each endpoint must not exceed
    /// this fraction of the peak |mean integrand| (plus 3 endpoint standard
    /// errors).
    pub endpoint_fraction: f64,
}

impl Default for InfoConfig {
    fn default() -> Self {
        InfoConfig {
            n_nodes: 64,
            sigma_min_factor: 1e-3,
            sigma_max_factor: 1e2,
            scale: None,
            endpoint_fraction: 0.01,
        }
    }
}

impl InfoConfig {
    fn validate(&self) -> Result<()> {
        if self.n_nodes < 4 {
            return Err(Error::invalid(format!(
                "need at least 4 quadrature nodes, got {}",
                self.n_nodes
            )));
        }
        if !(self.sigma_min_factor > 0.0 && self.sigma_max_factor > self.sigma_min_factor) {
            return Err(Error::invalid(format!(
                "need 0 < sigma_min_factor < sigma_max_factor, got [{}, {}]",
                self.sigma_min_factor, self.sigma_max_factor
            )));
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("scale must be positive, got {s}")));
            }
        }
        if !(self.endpoint_fraction > 0.0 && self.endpoint_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "endpoint_fraction must lie in (0, 1), got {}",
                self.endpoint_fraction
            )));
        }
        Ok(())
    }
}

/// An information estimate in nats, with its quadrature trace.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MiEstimate {
    /// Estimated value (nats).
    pub value: f64,
    /// Standard error of the value over samples.
    pub stderr: f64,
    /// The σ grid used.
    pub grid: Vec<f64>,
    /// Mean integrand per grid node (in `d ln σ` units).
    pub integrand: Vec<f64>,
    /// Standard error of the mean integrand per node.
    pub integrand_stderr: Vec<f64>,
}

/// Pooled per-coordinate standard deviation around the centroid.
fn pooled_std(xs: ArrayView2<f64>) -> f64 {
    let (n, d) = xs.dim();
    let mut mean = vec![0.0; d];
    for row in xs.rows() {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut ss = 0.0;
    for row in xs.rows() {
        for (j, &v) in row.iter().enumerate() {
            ss += (v - mean[j]) * (v - mean[j]);
        }
    }
    (ss / (n * d) as f64).sqrt()
}

/// Shared quadrature core. `scores_at` must return, for the corrupted batch
/// at one σ node, the pair `(reference scores, sampled-distribution scores)`
/// — reference is the positive term.
fn integrate_score_gap(
    xs: ArrayView2<f64>,
    cfg: &InfoConfig,
    stream: RngStream,
    mut scores_at: impl FnMut(ArrayView2<f64>, f64) -> Result<(RealMat, RealMat)>,
) -> Result<MiEstimate> {
    cfg.validate()?;
    let (m, d) = xs.dim();
    if m < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples for an information estimate, got {m}"
        )));
    }
    if let Some(bad) = xs.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "samples contain a non-finite value: {bad}"
        )));
    }
    let scale = match cfg.scale {
        Some(s) => s,
        None => {
            let s = pooled_std(xs);
            if !(s > 0.0) {
                return Err(Error::invalid(
                    "samples are degenerate (zero spread); pass an explicit scale".to_string(),
                ));
            }
            s
        }
    };
    let grid = SigmaSchedule::geometric(
        cfg.sigma_min_factor * scale,
        cfg.sigma_max_factor * scale,
        cfg.n_nodes,
    )?
    .levels()
    .to_vec();
    let du = (grid[cfg.n_nodes - 1] / grid[0]).ln() / (cfg.n_nodes - 1) as f64;

    // Per-sample trapezoid accumulators, and per-node statistics.
    let mut per_sample = vec![0.0f64; m];
    let mut node_mean = Vec::with_capacity(cfg.n_nodes);
    let mut node_stderr = Vec::with_capacity(cfg.n_nodes);
    let mut endpoint_terms: Vec<Vec<f64>> = Vec::new();
    for (j, &sigma) in grid.iter().enumerate() {
        // One shared noise draw per (sample, node): both score terms see the
        // same corruption — the common-random-numbers coupling.
        let noise = stream.substream(j as u64).standard_normal_mat(m, d);
        let x_t = &xs + &(&noise * sigma);
        let (s_ref, s_smp) = scores_at(x_t.view(), sigma)?;
        if s_ref.dim() != (m, d) || s_smp.dim() != (m, d) {
            return Err(Error::dims(format!(
                "score batches must be {m}×{d}, got {:?} and {:?}",
                s_ref.dim(),
                s_smp.dim()
            )));
        }
        let w = if j == 0 || j == cfg.n_nodes - 1 {
            0.5 * du
        } else {
            du
        };
        let mut mean = 0.0;
        let mut terms = Vec::with_capacity(m);
        for i in 0..m {
            let mut gap = 0.0;
            for k in 0..d {
                let a = noise[[i, k]] + sigma * s_ref[[i, k]];
                let b = noise[[i, k]] + sigma * s_smp[[i, k]];
                gap += a * a - b * b;
            }
            if !gap.is_finite() {
                return Err(Error::numerical(format!(
                    "integrand non-finite at node {j} (σ = {sigma:.3e}), sample {i}"
                )));
            }
            per_sample[i] += w * gap;
            mean += gap;
            terms.push(gap);
        }
        mean /= m as f64;
        let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (m - 1) as f64;
        node_mean.push(mean);
        node_stderr.push((var / m as f64).sqrt());
        if j == 0 || j == cfg.n_nodes - 1 {
            endpoint_terms.push(terms);
        }
    }

    // Endpoint guard: the truncated tails must be negligible relative to the
    // integrand's peak.
    let peak = node_mean.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for (which, j) in [(0usize, 0usize), (1, cfg.n_nodes - 1)] {
        let allowance =
            cfg.endpoint_fraction * peak + 3.0 * node_stderr[j] + 1e-12;
        if node_mean[j].abs() > allowance {
            let end = if which == 0 { "lower" } else { "upper" };
            return Err(Error::numerical(format!(
                "integrand has not decayed at the {end} σ endpoint \
                 (|{:.3e}| > {:.3e} at σ = {:.3e}); widen the grid or check that the two \
                 score functions describe overlapping distributions",
                node_mean[j], allowance, grid[j]
            )));
        }
    }

    let value = per_sample.iter().sum::<f64>() / m as f64;
    let var = per_sample
        .iter()
        .map(|t| (t - value) * (t - value))
        .sum::<f64>()
        / (m - 1) as f64;
    Ok(MiEstimate {
        value,
        stderr: (var / m as f64).sqrt(),
        grid,
        integrand: node_mean,
        integrand_stderr: node_stderr,
    })
}

/// Mutual information `I(X; Y)` in nats from paired samples `(x_i, y_i)` of
/// the joint distribution.
///
/// `uncond` is the smoothed score of the x-marginal (the reference);
/// `cond` the smoothed score of `x | y`. Per sample, the conditional is
/// evaluated at that sample's own `y_i` — the outer expectation over the
/// joint makes the KL-to-marginal average into the mutual information.
pub fn mi_score(
    uncond: &dyn SmoothedScore,
    cond: &dyn CondSmoothedScore,
    xs: ArrayView2<f64>,
    ys: ArrayView2<f64>,
    cfg: &InfoConfig,
    stream: RngStream,
) -> Result<MiEstimate> {
    let (m, d) = xs.dim();
    if uncond.dim() != d || cond.dim() != d {
        return Err(Error::dims(format!(
            "samples of dim {d} vs scores of dims {} and {}",
            uncond.dim(),
            cond.dim()
        )));
    }
    if ys.nrows() != m || ys.ncols() != cond.cond_dim() {
        return Err(Error::dims(format!(
            "{}×{} conditions vs {m} samples with cond dim {}",
            ys.nrows(),
            ys.ncols(),
            cond.cond_dim()
        )));
    }
    integrate_score_gap(xs, cfg, stream, |x_t, sigma| {
        let s_ref = uncond.score_batch(x_t, sigma)?;
        let s_smp = cond.score_batch(x_t, sigma, ys)?;
        Ok((s_ref, s_smp))
    })
}

/// KL divergence `KL(p ‖ q)` in nats, where `samples` are draws from `p`,
/// `sampled` is the smoothed score of `p`, and `reference` the smoothed
/// score of `q`.
///
/// For detection-style divergences between two conditionals, bind each
/// hypothesis' condition first (e.g. a class token) so both sides are plain
/// [`SmoothedScore`]s.
pub fn kld_score(
    reference: &dyn SmoothedScore,
    sampled: &dyn SmoothedScore,
    samples: ArrayView2<f64>,
    cfg: &InfoConfig,
    stream: RngStream,
) -> Result<MiEstimate> {
    let d = samples.ncols();
    if reference.dim() != d || sampled.dim() != d {
        return Err(Error::dims(format!(
            "samples of dim {d} vs scores of dims {} and {}",
            reference.dim(),
            sampled.dim()
        )));
    }
    integrate_score_gap(samples, cfg, stream, |x_t, sigma| {
        let s_ref = reference.score_batch(x_t, sigma)?;
        let s_smp = sampled.score_batch(x_t, sigma)?;
        Ok((s_ref, s_smp))
    })
}
