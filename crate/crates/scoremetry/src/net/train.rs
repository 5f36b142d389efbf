//! Minibatch training loop: shuffled epochs, Adam, and an exponential moving
//! average of the weights that becomes the returned network.

use ndarray::{ArrayView2, Axis};
use rand::Rng;

use super::{AdamState, CondBatch, CondSpec, GradSet, OwnedCond, ScoreNet};
use crate::numerics::{RealMat, RngStream};
use crate::{Error, Result};

/// A training objective: loss value plus parameter gradients for one
/// minibatch of clean samples.
///
/// The objective owns whatever randomness it needs beyond the data — noise
/// levels, corruption draws, slicing directions — and must take it from
/// `stream` so runs reproduce exactly. Both the loss and the gradients must
/// be minibatch *means*, so step size is batch-size invariant.
pub trait Objective {
    fn loss_and_grads(
        &self,
        net: &ScoreNet,
        x: ArrayView2<f64>,
        cond: CondBatch,
        stream: RngStream,
    ) -> Result<(f64, GradSet)>;

    /// Short name used in logs and reports.
    fn name(&self) -> &'static str;
}

/// Conditioning side of a dataset.
#[derive(Debug, Clone)]
pub enum CondData {
    None,
    /// One class id per sample.
    Classes(Vec<usize>),
    /// One condition row per sample.
    Continuous(RealMat),
}

/// Clean training samples with optional conditioning.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: RealMat,
    cond: CondData,
}

impl Dataset {
    pub fn unconditional(x: RealMat) -> Result<Self> {
        check_samples(&x)?;
        Ok(Dataset {
            x,
            cond: CondData::None,
        })
    }

    pub fn with_classes(x: RealMat, classes: Vec<usize>) -> Result<Self> {
        check_samples(&x)?;
        if classes.len() != x.nrows() {
            return Err(Error::dims(format!(
                "{} class labels for {} samples",
                classes.len(),
                x.nrows()
            )));
        }
        Ok(Dataset {
            x,
            cond: CondData::Classes(classes),
        })
    }

    pub fn with_continuous(x: RealMat, y: RealMat) -> Result<Self> {
        check_samples(&x)?;
        if y.nrows() != x.nrows() {
            return Err(Error::dims(format!(
                "{} condition rows for {} samples",
                y.nrows(),
                x.nrows()
            )));
        }
        Ok(Dataset {
            x,
            cond: CondData::Continuous(y),
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn cond(&self) -> &CondData {
        &self.cond
    }

    /// Pooled per-coordinate standard deviation around the centroid; the
    /// scale unit for noise schedules.
    pub fn pooled_std(&self) -> f64 {
        let mean = self.x.mean_axis(Axis(0)).expect("non-empty dataset");
        let mut ss = 0.0;
        for row in self.x.rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                ss += d * d;
            }
        }
        (ss / (self.x.nrows() * self.x.ncols()) as f64).sqrt()
    }

    /// Largest Euclidean distance from the centroid; sets the top of noise
    /// schedules.
    pub fn max_radius(&self) -> f64 {
        let mean = self.x.mean_axis(Axis(0)).expect("non-empty dataset");
        self.x
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .zip(mean.iter())
                    .map(|(&v, &m)| (v - m) * (v - m))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Per-column mean and standard deviation of the continuous conditions
    /// (errors for other condition kinds). Stds are floored at `1e-12` so
    /// constant columns stay usable.
    pub fn cond_standardization(&self) -> Result<(crate::numerics::RealVec, crate::numerics::RealVec)> {
        let y = match &self.cond {
            CondData::Continuous(y) => y,
            _ => {
                return Err(Error::invalid(
                    "dataset has no continuous conditions to standardize".to_string(),
                ))
            }
        };
        let mean = y.mean_axis(Axis(0)).expect("non-empty dataset");
        let mut var = crate::numerics::RealVec::zeros(y.ncols());
        for row in y.rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.mapv(|v| (v / y.nrows() as f64).sqrt().max(1e-12));
        Ok((mean, std))
    }

    /// Gather the rows of a minibatch.
    fn gather(&self, idx: &[usize]) -> (RealMat, OwnedCond) {
        let xb = RealMat::from_shape_fn((idx.len(), self.dim()), |(i, j)| self.x[[idx[i], j]]);
        let cb = match &self.cond {
            CondData::None => OwnedCond::None,
            CondData::Classes(c) => OwnedCond::Classes(idx.iter().map(|&i| c[i]).collect()),
            CondData::Continuous(y) => OwnedCond::Continuous(RealMat::from_shape_fn(
                (idx.len(), y.ncols()),
                |(i, j)| y[[idx[i], j]],
            )),
        };
        (xb, cb)
    }
}

fn check_samples(x: &RealMat) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid(
            "dataset needs at least one sample and one dimension".to_string(),
        ));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "dataset contains a non-finite value: {bad}"
        )));
    }
    Ok(())
}

/// Training-loop hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Weight-EMA decay; the (debiased) EMA weights are what [`train`]
    /// returns. 0 tracks the live weights exactly; 1 freezes the shadow at
    /// initialization.
    pub ema_decay: f64,
    /// Multiply the learning rate by this factor each epoch (1 = constant).
    pub lr_decay_per_epoch: f64,
    /// Optional hard cap on optimizer steps; training stops mid-epoch when
    /// reached. Useful for fixed-budget runs.
    pub max_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            lr: 1e-4,
            ema_decay: 0.999,
            lr_decay_per_epoch: 1.0,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid(
                "epochs and batch_size must be >= 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::invalid(format!(
                "ema_decay must lie in [0, 1], got {}",
                self.ema_decay
            )));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(Error::invalid(format!(
                "lr_decay_per_epoch must lie in (0, 1], got {}",
                self.lr_decay_per_epoch
            )));
        }
        if self.max_steps == Some(0) {
            return Err(Error::invalid("max_steps must be >= 1 when set".to_string()));
        }
        Ok(())
    }
}

/// Exponential moving average of the parameter tensors:
/// `shadow ← decay·shadow + (1−decay)·live` after every update, exactly.
/// Decay 1 therefore freezes the shadow at initialization and decay 0 tracks
/// the live weights.
///
/// Because the shadow starts at the initialization, after `t` updates it
/// still carries a `decayᵗ` fraction of the init. [`apply_debiased_to`]
/// removes that bias the same way Adam debiases its moments, which matters
/// for short runs with zero-initialized output layers.
///
/// [`apply_debiased_to`]: EmaShadow::apply_debiased_to
#[derive(Debug, Clone)]
pub struct EmaShadow {
    decay: f64,
    updates: u64,
    init: Vec<RealMat>,
    params: Vec<RealMat>,
}

impl EmaShadow {
    pub fn new(net: &ScoreNet, decay: f64) -> Self {
        let params: Vec<RealMat> = net.param_tensors().iter().map(|t| (*t).clone()).collect();
        EmaShadow {
            decay,
            updates: 0,
            init: params.clone(),
            params,
        }
    }

    pub fn update(&mut self, net: &ScoreNet) {
        self.updates += 1;
        let d = self.decay;
        for (shadow, live) in self.params.iter_mut().zip(net.param_tensors()) {
            ndarray::Zip::from(shadow).and(live).for_each(|s, &p| {
                *s = d * *s + (1.0 - d) * p;
            });
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Overwrite a net's parameters with the raw shadow.
    pub fn apply_to(&self, net: &mut ScoreNet) {
        for (live, shadow) in net.param_tensors_mut().into_iter().zip(&self.params) {
            live.assign(shadow);
        }
    }

    /// Overwrite a net's parameters with the initialization-debiased average
    /// `(shadow − decayᵗ·init) / (1 − decayᵗ)`. Falls back to the raw shadow
    /// when the correction is undefined (no updates yet, or decay 1).
    pub fn apply_debiased_to(&self, net: &mut ScoreNet) {
        let dt = self.decay.powi(self.updates.min(i32::MAX as u64) as i32);
        let denom = 1.0 - dt;
        if denom < 1e-12 {
            self.apply_to(net);
            return;
        }
        for ((live, shadow), init) in net
            .param_tensors_mut()
            .into_iter()
            .zip(&self.params)
            .zip(&self.init)
        {
            ndarray::Zip::from(live).and(shadow).and(init).for_each(|l, &s, &i| {
                *l = (s - dt * i) / denom;
            });
        }
    }
}

/// Loss trace and bookkeeping from a training run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainReport {
    pub objective: String,
    pub steps: u64,
    /// Mean loss per epoch, in order.
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// A trained (EMA) network plus its report.
pub struct TrainOutcome {
    pub net: ScoreNet,
    pub report: TrainReport,
}

/// Run minibatch training and return the EMA network.
///
/// Deterministic given `(net init, data, objective, cfg, stream)`: shuffling
/// and the objective's internal draws all derive from `stream`. A non-finite
/// loss aborts with [`Error::Diverged`].
pub fn train(
    mut net: ScoreNet,
    data: &Dataset,
    objective: &dyn Objective,
    cfg: &TrainConfig,
    stream: RngStream,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    match (&net.config().cond, data.cond()) {
        (CondSpec::None, CondData::None) => {}
        (CondSpec::ClassEmbed { n_classes, .. }, CondData::Classes(ids)) => {
            if let Some(&bad) = ids.iter().find(|&&id| id >= *n_classes) {
                return Err(Error::invalid(format!(
                    "class label {bad} out of range for a {n_classes}-class net"
                )));
            }
        }
        (CondSpec::Continuous { width }, CondData::Continuous(y)) => {
            if y.ncols() != *width {
                return Err(Error::dims(format!(
                    "condition width {} vs net condition width {width}",
                    y.ncols()
                )));
            }
            let (shift, scale) = data.cond_standardization()?;
            net.set_cond_standardization(shift, scale)?;
        }
        _ => {
            return Err(Error::invalid(
                "dataset conditioning does not match the net's condition spec".to_string(),
            ))
        }
    }
    if data.dim() != net.config().input_dim {
        return Err(Error::dims(format!(
            "data dim {} vs net input dim {}",
            data.dim(),
            net.config().input_dim
        )));
    }

    let mut adam = AdamState::new(cfg.lr, &net.param_tensors())?;
    let mut ema = EmaShadow::new(&net, cfg.ema_decay);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps: u64 = 0;

    'epochs: for epoch in 0..cfg.epochs {
        if epoch > 0 && cfg.lr_decay_per_epoch < 1.0 {
            adam.set_lr(cfg.lr * cfg.lr_decay_per_epoch.powi(epoch as i32))?;
        }
        shuffle(&mut order, stream.substream(1).substream(epoch as u64));
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (xb, cb) = data.gather(chunk);
            let noise = stream
                .substream(2)
                .substream(epoch as u64)
                .substream(b as u64);
            let (loss, grads) =
                objective.loss_and_grads(&net, xb.view(), cb.as_batch(), noise)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became {loss} at epoch {epoch}, batch {b}"
                )));
            }
            adam.step(net.param_tensors_mut(), &grads)?;
            ema.update(&net);
            epoch_loss += loss;
            epoch_batches += 1;
            steps += 1;
            if Some(steps) == cfg.max_steps {
                epoch_losses.push(epoch_loss / epoch_batches as f64);
                break 'epochs;
            }
        }
        epoch_losses.push(epoch_loss / epoch_batches as f64);
    }

    ema.apply_debiased_to(&mut net);
    let final_loss = *epoch_losses.last().expect("at least one epoch");
    Ok(TrainOutcome {
        net,
        report: TrainReport {
            objective: objective.name().to_string(),
            steps,
            epoch_losses,
            final_loss,
        },
    })
}

/// Fisher–Yates shuffle driven by a named stream.
fn shuffle(order: &mut [usize], stream: RngStream) {
    let mut rng = stream.rng();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}
