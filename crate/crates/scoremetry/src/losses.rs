//! Score-matching training objectives.
//!
//! Every objective implements [`Objective`](crate::net::Objective): given a
//! minibatch of clean samples it returns the minibatch-mean loss and exact
//! parameter gradients.
//!
//! * [`DsmLoss`] — denoising: corrupt each sample at a level drawn from a
//!   [`SigmaSchedule`] and regress the score of the corruption kernel,
//!   `−n/σ`. Levels are weighted by `λ(σ) = σ²`, which makes the loss equal
//!   plain noise-regression `½‖raw − n‖²` under the noise-prediction output
//!   and keeps every level's contribution O(1). This is the workhorse for
//!   learning the *smoothed* score `∇ log p_σ` across a schedule.
//! * [`IsmLoss`] — implicit: `E[tr ∇s(x) + ½‖s(x)‖²]` on clean samples,
//!   whose minimizer is the score of the data distribution itself (σ = 0).
//!   The Jacobian trace is computed *exactly* with one dual-number pass per
//!   coordinate. This is how the Fisher-information nets are trained.
//! * [`SsmLoss`] — sliced: the implicit objective with the trace replaced by
//!   Rademacher probes `vᵀ∇s v`; in one dimension it coincides with the
//!   implicit objective exactly.
//!
//! The fourth objective is different in kind: [`FsmLoss`] learns the
//! *measurement* score `∇_θ log p(y | θ)` from joint draws `(θ, y)` alone,
//! using integration by parts against a known (or previously learned, then
//! frozen) prior score:
//!
//! ```text
//! E[ ½‖s_ψ(θ, y)‖² + ∇_θ·s_ψ(θ, y) + s_ψ(θ, y)ᵀ∇_θ log p(θ) ]
//! ```
//!
//! whose unique minimizer is the measurement score. For a Gaussian
//! measurement `y = f(θ) + w` that minimizer is `J_f(θ)ᵀ(y − f(θ))/σ_w²`,
//! which is what the Fisher-information estimators consume.

use ndarray::ArrayView2;
use rand::Rng;

use crate::net::{CondBatch, CondSpec, GradSet, Objective, OwnedCond, ScoreNet};
use crate::numerics::{RealMat, RngStream};
use crate::score::SmoothedScore;
use crate::{Error, Result};

/// A fixed set of noise levels; objectives draw one level per sample
/// uniformly.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SigmaSchedule {
    levels: Vec<f64>,
}

impl SigmaSchedule {
    /// Geometric ladder from `sigma_min` up to `sigma_max` with `n ≥ 2`
    /// levels.
    pub fn geometric(sigma_min: f64, sigma_max: f64, n: usize) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min.is_finite() && sigma_max > sigma_min) {
            return Err(Error::invalid(format!(
                "need 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        if n < 2 {
            return Err(Error::invalid(
                "a geometric schedule needs at least 2 levels (use from_levels for one)"
                    .to_string(),
            ));
        }
        let ratio = (sigma_max / sigma_min).powf(1.0 / (n - 1) as f64);
        let levels = (0..n).map(|k| sigma_min * ratio.powi(k as i32)).collect();
        Ok(SigmaSchedule { levels })
    }

    /// Explicit levels (each positive and finite).
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("schedule needs at least one level".to_string()));
        }
        if let Some(bad) = levels.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!(
                "schedule levels must be positive and finite, got {bad}"
            )));
        }
        Ok(SigmaSchedule { levels })
    }

    /// One fixed level.
    pub fn single(sigma: f64) -> Result<Self> {
        Self::from_levels(vec![sigma])
    }

    /// Schedule matched to a dataset: from 1% of the pooled standard
    /// deviation up to twice the maximum radius about the centroid.
    pub fn for_data(data: &crate::net::Dataset, n: usize) -> Result<Self> {
        let lo = 0.01 * data.pooled_std();
        let hi = 2.0 * data.max_radius();
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!(
                "dataset has no usable spread (std {lo}, radius {hi})"
            )));
        }
        Self::geometric(lo, hi, n)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn sigma_min(&self) -> f64 {
        self.levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sigma_max(&self) -> f64 {
        self.levels.iter().copied().fold(0.0, f64::max)
    }

    /// Draw one level per sample, uniformly over the ladder.
    pub fn draw(&self, stream: RngStream, n: usize) -> Vec<f64> {
        let mut rng = stream.rng();
        (0..n)
            .map(|_| self.levels[rng.gen_range(0..self.levels.len())])
            .collect()
    }
}

/// `x_t = x + σ_i·n_i` row by row.
fn corrupt(x: ArrayView2<f64>, sigmas: &[f64], noise: &RealMat) -> RealMat {
    let mut x_t = x.to_owned();
    for (i, mut row) in x_t.rows_mut().into_iter().enumerate() {
        row.scaled_add(sigmas[i], &noise.row(i));
    }
    x_t
}

fn to_owned_cond(cond: CondBatch) -> OwnedCond {
    match cond {
        CondBatch::None => OwnedCond::None,
        CondBatch::Classes(ids) => OwnedCond::Classes(ids.to_vec()),
        CondBatch::Continuous(y) => OwnedCond::Continuous(y.to_owned()),
    }
}

/// Replace each class id with the null token with probability `p`.
fn swap_to_null(
    net: &ScoreNet,
    cond: CondBatch,
    p: f64,
    stream: RngStream,
) -> Result<OwnedCond> {
    if p == 0.0 {
        return Ok(to_owned_cond(cond));
    }
    match (&net.config().cond, cond) {
        (CondSpec::ClassEmbed { n_classes, .. }, CondBatch::Classes(ids)) => {
            let mut rng = stream.rng();
            Ok(OwnedCond::Classes(
                ids.iter()
                    .map(|&id| if rng.gen::<f64>() < p { *n_classes } else { id })
                    .collect(),
            ))
        }
        _ => Err(Error::invalid(
            "null-token dropout requires a class-conditional net and class labels".to_string(),
        )),
    }
}

/// Denoising score matching: `E σ²/2·‖s(x + σn, σ) + n/σ‖²`.
#[derive(Debug, Clone)]
pub struct DsmLoss {
    schedule: SigmaSchedule,
    p_uncond: f64,
}

impl DsmLoss {
    pub fn new(schedule: SigmaSchedule) -> Self {
        DsmLoss {
            schedule,
            p_uncond: 0.0,
        }
    }

    /// Enable classifier-free training: with probability `p` a sample's class
    /// label is replaced by the null token, so one net learns all
    /// class-conditional scores *and* the marginal.
    pub fn with_null_probability(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "null probability must lie in [0, 1], got {p}"
            )));
        }
        self.p_uncond = p;
        Ok(self)
    }

    pub fn schedule(&self) -> &SigmaSchedule {
        &self.schedule
    }
}

impl Objective for DsmLoss {
    fn loss_and_grads(
        &self,
        net: &ScoreNet,
        x: ArrayView2<f64>,
        cond: CondBatch,
        stream: RngStream,
    ) -> Result<(f64, GradSet)> {
        let (b, d) = x.dim();
        let sigmas = self.schedule.draw(stream.substream(1), b);
        let noise = stream.substream(2).standard_normal_mat(b, d);
        let x_t = corrupt(x, &sigmas, &noise);
        let owned = if self.p_uncond > 0.0 {
            swap_to_null(net, cond, self.p_uncond, stream.substream(3))?
        } else {
            to_owned_cond(cond)
        };
        let cache = net.forward(x_t.view(), &sigmas, owned.as_batch())?;
        let raw = cache.raw();
        let inv_b = 1.0 / b as f64;
        let mut d_raw = RealMat::zeros((b, d));
        let mut loss = 0.0;
        for i in 0..b {
            let s = sigmas[i];
            let c = net.output_scale(s);
            let lam = s * s;
            for j in 0..d {
                let r = c * raw[[i, j]] + noise[[i, j]] / s;
                loss += 0.5 * lam * r * r * inv_b;
                d_raw[[i, j]] = lam * c * r * inv_b;
            }
        }
        let mut grads = net.zero_grads();
        net.backward(&cache, &d_raw, &mut grads)?;
        Ok((loss, grads))
    }

    fn name(&self) -> &'static str {
        "dsm"
    }
}

/// Implicit score matching on clean samples: `E[tr ∇s(x) + ½‖s(x)‖²]` with
/// the Jacobian trace computed exactly (one dual pass per coordinate).
///
/// Unlike the denoising objective this trains the score at `σ = 0`, which is
/// what the Fisher-information estimators need; the net must therefore be
/// σ-free with an output defined at `σ = 0`. Conditioning (for posterior
/// scores `∇_θ log p(θ|y)`) passes straight through: supply a conditional net
/// and per-sample conditions and the trace/norm are taken with respect to the
/// net input only.
#[derive(Debug, Clone, Default)]
pub struct IsmLoss;

impl IsmLoss {
    pub fn new() -> Self {
        IsmLoss
    }
}

/// Shared core of the implicit/sliced objectives: exact or sliced trace plus
/// the exact ½‖s‖² term; `slices = None` means exact.
fn implicit_loss(
    net: &ScoreNet,
    x: ArrayView2<f64>,
    cond: CondBatch,
    stream: RngStream,
    slices: Option<usize>,
) -> Result<(f64, GradSet)> {
    let (b, d) = x.dim();
    let c = net.output_scale(0.0);
    if !c.is_finite() {
        return Err(Error::invalid(
            "implicit objectives train the clean score; the output parameterization must be \
             defined at σ = 0"
                .to_string(),
        ));
    }
    let sigmas = vec![0.0; b];
    let inv_b = 1.0 / b as f64;
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    let n_passes = slices.unwrap_or(d);
    for pass in 0..n_passes {
        // Exact mode: pass j differentiates along e_j and reads the (j, j)
        // Jacobian entry. Sliced mode: pass k uses a Rademacher direction per
        // sample and reads vᵀ(∇s)v, an unbiased trace estimate.
        let tangent = match slices {
            None => {
                let mut t = RealMat::zeros((b, d));
                t.column_mut(pass).fill(1.0);
                t
            }
            Some(_) => {
                let mut rng = stream.substream(3).substream(pass as u64).rng();
                RealMat::from_shape_fn((b, d), |_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            }
        };
        let cache = net.forward_jvp(x, &sigmas, cond, tangent.view())?;
        let raw_dot = cache.raw_dot().expect("dual cache");
        let mut d_raw_dot = RealMat::zeros((b, d));
        match slices {
            None => {
                for i in 0..b {
                    loss += c * raw_dot[[i, pass]] * inv_b;
                    d_raw_dot[[i, pass]] = c * inv_b;
                }
            }
            Some(k) => {
                let inv_bk = inv_b / k as f64;
                for i in 0..b {
                    let vjv: f64 = (0..d).map(|t| tangent[[i, t]] * raw_dot[[i, t]]).sum();
                    loss += c * vjv * inv_bk;
                    for t in 0..d {
                        d_raw_dot[[i, t]] = c * tangent[[i, t]] * inv_bk;
                    }
                }
            }
        }
        let mut d_raw = RealMat::zeros((b, d));
        if pass == 0 {
            // The exact ½‖s‖² term rides on the first pass (all passes share
            // the same primal values).
            let raw = cache.raw();
            for i in 0..b {
                for t in 0..d {
                    loss += 0.5 * c * c * raw[[i, t]] * raw[[i, t]] * inv_b;
                    d_raw[[i, t]] = c * c * raw[[i, t]] * inv_b;
                }
            }
        }
        net.backward_jvp(&cache, &d_raw, &d_raw_dot, &mut grads)?;
    }
    Ok((loss, grads))
}

impl Objective for IsmLoss {
    fn loss_and_grads(
        &self,
        net: &ScoreNet,
        x: ArrayView2<f64>,
        cond: CondBatch,
        stream: RngStream,
    ) -> Result<(f64, GradSet)> {
        implicit_loss(net, x, cond, stream, None)
    }

    fn name(&self) -> &'static str {
        "ism"
    }
}

/// Sliced score matching: the implicit objective with the exact Jacobian
/// trace replaced by `vᵀ(∇s)v` over Rademacher probe directions; the ½‖s‖²
/// term stays exact. Its expectation over probes equals [`IsmLoss`], and in
/// one dimension the two coincide identically (a ±1 probe cancels).
#[derive(Debug, Clone)]
pub struct SsmLoss {
    n_probes: usize,
}

impl SsmLoss {
    pub fn new(n_probes: usize) -> Result<Self> {
        if n_probes == 0 {
            return Err(Error::invalid("need at least one probe".to_string()));
        }
        Ok(SsmLoss { n_probes })
    }
}

impl Objective for SsmLoss {
    fn loss_and_grads(
        &self,
        net: &ScoreNet,
        x: ArrayView2<f64>,
        cond: CondBatch,
        stream: RngStream,
    ) -> Result<(f64, GradSet)> {
        implicit_loss(net, x, cond, stream, Some(self.n_probes))
    }

    fn name(&self) -> &'static str {
        "ssm"
    }
}

/// Measurement-score (Fisher) matching against a frozen prior score.
///
/// Trains `s_ψ(θ; y)` (net input `θ`, continuous condition `y`) to equal
/// `∇_θ log p(y|θ)` given only joint samples and the prior score `∇_θ log
/// p(θ)`. The net must be σ-free with an output defined at `σ = 0`.
pub struct FsmLoss<'a> {
    prior: &'a dyn SmoothedScore,
}

impl<'a> FsmLoss<'a> {
    pub fn new(prior: &'a dyn SmoothedScore) -> Self {
        FsmLoss { prior }
    }
}

impl Objective for FsmLoss<'_> {
    fn loss_and_grads(
        &self,
        net: &ScoreNet,
        x: ArrayView2<f64>,
        cond: CondBatch,
        _stream: RngStream,
    ) -> Result<(f64, GradSet)> {
        let (b, d) = x.dim();
        if self.prior.dim() != d {
            return Err(Error::dims(format!(
                "prior score of dim {} vs parameter dim {d}",
                self.prior.dim()
            )));
        }
        let c = net.output_scale(0.0);
        if !c.is_finite() {
            return Err(Error::invalid(
                "measurement-score matching needs an output parameterization defined at σ = 0"
                    .to_string(),
            ));
        }
        let pi = self.prior.score_batch(x, 0.0)?;
        let sigmas = vec![0.0; b];
        let inv_b = 1.0 / b as f64;
        let mut grads = net.zero_grads();
        let mut loss = 0.0;
        for j in 0..d {
            let mut tangent = RealMat::zeros((b, d));
            tangent.column_mut(j).fill(1.0);
            let cache = net.forward_jvp(x, &sigmas, cond, tangent.view())?;
            let raw_dot = cache.raw_dot().expect("dual cache");
            let mut d_raw_dot = RealMat::zeros((b, d));
            for i in 0..b {
                loss += c * raw_dot[[i, j]] * inv_b;
                d_raw_dot[[i, j]] = c * inv_b;
            }
            let mut d_raw = RealMat::zeros((b, d));
            if j == 0 {
                let raw = cache.raw();
                for i in 0..b {
                    for k in 0..d {
                        loss += (0.5 * c * c * raw[[i, k]] * raw[[i, k]]
                            + c * raw[[i, k]] * pi[[i, k]])
                            * inv_b;
                        d_raw[[i, k]] = (c * c * raw[[i, k]] + c * pi[[i, k]]) * inv_b;
                    }
                }
            }
            net.backward_jvp(&cache, &d_raw, &d_raw_dot, &mut grads)?;
        }
        Ok((loss, grads))
    }

    fn name(&self) -> &'static str {
        "fsm"
    }
}
