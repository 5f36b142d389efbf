//! A small fully-connected score network with explicit forward, backward, and
//! forward-over-backward passes.
//!
//! No autodiff framework is involved: gradients are hand-derived, which is
//! what makes the second-order objectives tractable — the Jacobian-vector
//! products needed by trace-based losses run as a *dual-number* forward pass
//! (primal + tangent), and backpropagation through that dual pass (which
//! touches the activation's second derivative) is implemented explicitly in
//! [`ScoreNet::backward_jvp`].
//!
//! The network maps `(x_t, σ, condition) ↦ raw output`, and a configurable
//! [`OutputParam`] turns the raw output into a score. Architecture knobs:
//!
//! * hidden layers and a smooth activation ([`Activation`]);
//! * a noise-level embedding ([`SigmaEmbed`]), sinusoidal features of `ln σ`
//!   by default;
//! * a conditioning channel ([`CondSpec`]): none, a learned class-embedding
//!   table with an extra *null* row (for classifier-free conditioning), or a
//!   continuous vector standardized by a stored affine transform;
//! * the final layer is zero-initialized so an untrained net outputs score 0.

mod adam;
mod checkpoint;
mod langevin;
mod train;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint};
pub use langevin::langevin_sample;
pub use train::{
    train, CondData, Dataset, EmaShadow, Objective, TrainConfig, TrainOutcome, TrainReport,
};

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{RealMat, RealVec, RngStream};
use crate::score::{CondSmoothedScore, SmoothedScore};
use crate::{Error, Result};

/// Smooth activation functions (second derivatives are needed by the
/// dual-pass backward, so everything here is C²).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// `x·sigmoid(x)` — the default.
    Silu,
    /// Hyperbolic tangent.
    Tanh,
    /// Identity (used for purely linear nets).
    Identity,
}

impl Activation {
    #[inline]
    pub fn f(self, x: f64) -> f64 {
        match self {
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn df(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    pub fn d2f(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
            }
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Identity => 0.0,
        }
    }
}

/// Noise-level feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaEmbed {
    /// The net never sees σ (clean-score objectives).
    None,
    /// One raw `ln σ` feature.
    LogScalar,
    /// `features` sinusoidal features of `ln σ`: pairs
    /// `(sin ω_k·ln σ, cos ω_k·ln σ)`, `ω_k = 0.25·2^k`. Must be even.
    Sinusoidal { features: usize },
}

impl SigmaEmbed {
    pub fn width(&self) -> usize {
        match self {
            SigmaEmbed::None => 0,
            SigmaEmbed::LogScalar => 1,
            SigmaEmbed::Sinusoidal { features } => *features,
        }
    }

    fn write(&self, sigma: f64, out: &mut [f64]) {
        match self {
            SigmaEmbed::None => {}
            SigmaEmbed::LogScalar => out[0] = sigma.ln(),
            SigmaEmbed::Sinusoidal { features } => {
                let u = sigma.ln();
                for k in 0..features / 2 {
                    let w = 0.25 * (1 << k) as f64;
                    out[2 * k] = (w * u).sin();
                    out[2 * k + 1] = (w * u).cos();
                }
            }
        }
    }
}

/// Conditioning channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CondSpec {
    /// Unconditional net.
    None,
    /// Learned class embedding with `n_classes` real classes plus one null
    /// row (index `n_classes`) used for classifier-free training.
    ClassEmbed { n_classes: usize, width: usize },
    /// Continuous condition vector of the given width, standardized by the
    /// affine transform stored in the net (and in its checkpoints).
    Continuous { width: usize },
}

impl CondSpec {
    pub fn width(&self) -> usize {
        match self {
            CondSpec::None => 0,
            CondSpec::ClassEmbed { width, .. } | CondSpec::Continuous { width } => *width,
        }
    }
}

/// How the raw network output is read as a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputParam {
    /// `score = raw`.
    DirectScore,
    /// `score = −raw/σ`: the net predicts the noise, which keeps its outputs
    /// O(1) across noise levels.
    NoisePrediction,
    /// `score = raw/(1 + σ²)`: exact for a standard normal, letting a single
    /// σ-independent linear map represent the smoothed score at *every* level.
    UnitGaussianScaled,
}

/// Architecture description; serialized verbatim into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Dimension of `x` (input and output).
    pub input_dim: usize,
    /// Hidden-layer widths; empty means a single linear map.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub sigma_embed: SigmaEmbed,
    pub cond: CondSpec,
    pub output: OutputParam,
    /// Whether dense layers carry biases.
    pub bias: bool,
}

impl NetConfig {
    /// Default architecture: 3×128 SiLU, 8 sinusoidal σ features,
    /// unconditional, noise-prediction output.
    pub fn default_mlp(input_dim: usize) -> Self {
        NetConfig {
            input_dim,
            hidden: vec![128, 128, 128],
            activation: Activation::Silu,
            sigma_embed: SigmaEmbed::Sinusoidal { features: 8 },
            cond: CondSpec::None,
            output: OutputParam::NoisePrediction,
            bias: true,
        }
    }

    /// Degenerate single linear layer without bias or σ features; the raw
    /// output is a fixed matrix times the input.
    pub fn linear_no_bias(input_dim: usize, output: OutputParam) -> Self {
        NetConfig {
            input_dim,
            hidden: vec![],
            activation: Activation::Identity,
            sigma_embed: SigmaEmbed::None,
            cond: CondSpec::None,
            output,
            bias: false,
        }
    }

    /// Plain MLP for clean-score objectives: no σ features, direct-score
    /// output.
    pub fn clean_mlp(input_dim: usize, hidden: Vec<usize>) -> Self {
        NetConfig {
            input_dim,
            hidden,
            activation: Activation::Silu,
            sigma_embed: SigmaEmbed::None,
            cond: CondSpec::None,
            output: OutputParam::DirectScore,
            bias: true,
        }
    }

    /// Total width of the assembled feature vector.
    pub fn feature_dim(&self) -> usize {
        self.input_dim + self.sigma_embed.width() + self.cond.width()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be >= 1".to_string()));
        }
        if let SigmaEmbed::Sinusoidal { features } = self.sigma_embed {
            if features == 0 || features % 2 != 0 {
                return Err(Error::invalid(format!(
                    "sinusoidal σ embedding needs a positive even feature count, got {features}"
                )));
            }
        }
        match &self.cond {
            CondSpec::ClassEmbed { n_classes, width } if *n_classes == 0 || *width == 0 => {
                return Err(Error::invalid(
                    "class embedding needs n_classes >= 1 and width >= 1".to_string(),
                ));
            }
            CondSpec::Continuous { width } if *width == 0 => {
                return Err(Error::invalid(
                    "continuous condition needs width >= 1".to_string(),
                ));
            }
            _ => {}
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden widths must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// A batch of conditioning inputs.
#[derive(Debug, Clone, Copy)]
pub enum CondBatch<'a> {
    None,
    /// Class index per sample; `n_classes` selects the null row.
    Classes(&'a [usize]),
    /// One raw (unstandardized) condition vector per row.
    Continuous(ArrayView2<'a, f64>),
}

/// One dense layer; bias kept as a `1×out` matrix so all parameters share a
/// type.
#[derive(Debug, Clone)]
struct Dense {
    w: RealMat,
    b: Option<RealMat>,
}

/// Parameter gradients, in the same fixed order as
/// [`ScoreNet::param_tensors`].
#[derive(Debug, Clone)]
pub struct GradSet {
    pub tensors: Vec<RealMat>,
}

impl GradSet {
    pub fn scale(&mut self, c: f64) {
        for t in &mut self.tensors {
            *t *= c;
        }
    }

    pub fn add(&mut self, other: &GradSet) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }
}

/// Cache produced by the forward pass and consumed by backward.
pub struct ForwardCache {
    /// Assembled `B×F` input features.
    features: RealMat,
    /// Pre-activations per layer.
    pre: Vec<RealMat>,
    /// Post-activations per layer (last entry is the raw output).
    post: Vec<RealMat>,
    /// Per-sample noise levels.
    sigmas: Vec<f64>,
    /// Class ids when the condition is an embedding lookup.
    class_ids: Option<Vec<usize>>,
    /// Tangent of the feature matrix (x columns carry the input tangent, σ
    /// and condition columns are zero) when this cache came from a dual pass.
    features_dot: Option<RealMat>,
    /// Tangent pre/post activations when this cache came from a dual pass.
    pre_dot: Option<Vec<RealMat>>,
    post_dot: Option<Vec<RealMat>>,
}

impl ForwardCache {
    /// Raw network output for this pass.
    pub fn raw(&self) -> &RealMat {
        self.post.last().expect("net has at least one layer")
    }

    /// Tangent of the raw output (dual passes only).
    pub fn raw_dot(&self) -> Option<&RealMat> {
        self.post_dot.as_ref().and_then(|v| v.last())
    }

    /// Per-sample noise levels recorded for this pass.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

/// The score network.
#[derive(Debug, Clone)]
pub struct ScoreNet {
    cfg: NetConfig,
    layers: Vec<Dense>,
    /// `(n_classes+1) × width` embedding table (last row = null token).
    embed: Option<RealMat>,
    /// Standardization applied to continuous conditions: `(y − shift)/scale`.
    cond_shift: RealVec,
    cond_scale: RealVec,
}

impl ScoreNet {
    /// Fresh network: uniform fan-in init `U[−1/√fan_in, 1/√fan_in]` for
    /// hidden layers, zero final layer (so the initial score is exactly 0,
    /// which keeps early Langevin chains from blowing up).
    pub fn new(cfg: NetConfig, stream: RngStream) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![cfg.feature_dim()];
        dims.extend(cfg.hidden.iter().copied());
        dims.push(cfg.input_dim);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let w = if l == dims.len() - 2 {
                RealMat::zeros((fan_in, fan_out))
            } else {
                let bound = (1.0 / fan_in as f64).sqrt();
                let mut rng = stream.substream(100 + l as u64).rng();
                RealMat::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound))
            };
            let b = cfg.bias.then(|| RealMat::zeros((1, fan_out)));
            layers.push(Dense { w, b });
        }
        let embed = match &cfg.cond {
            CondSpec::ClassEmbed { n_classes, width } => Some(
                stream
                    .substream(99)
                    .standard_normal_mat(n_classes + 1, *width)
                    * 0.05,
            ),
            _ => None,
        };
        let cond_width = match &cfg.cond {
            CondSpec::Continuous { width } => *width,
            _ => 0,
        };
        Ok(ScoreNet {
            cfg,
            layers,
            embed,
            cond_shift: RealVec::zeros(cond_width),
            cond_scale: RealVec::ones(cond_width),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Set the affine standardization for continuous conditions (stored in
    /// checkpoints). `scale` entries must be positive.
    pub fn set_cond_standardization(&mut self, shift: RealVec, scale: RealVec) -> Result<()> {
        let w = self.cfg.cond.width();
        if !matches!(self.cfg.cond, CondSpec::Continuous { .. }) {
            return Err(Error::invalid(
                "condition standardization only applies to continuous conditions".to_string(),
            ));
        }
        if shift.len() != w || scale.len() != w {
            return Err(Error::dims(format!(
                "standardization length {} / {} vs condition width {w}",
                shift.len(),
                scale.len()
            )));
        }
        if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(
                "standardization scale entries must be positive".to_string(),
            ));
        }
        self.cond_shift = shift;
        self.cond_scale = scale;
        Ok(())
    }

    pub fn cond_standardization(&self) -> (&RealVec, &RealVec) {
        (&self.cond_shift, &self.cond_scale)
    }

    /// All trainable tensors in a fixed order (layer weights/biases, then the
    /// embedding table). Adam, EMA, and checkpoints rely on this order.
    pub fn param_tensors(&self) -> Vec<&RealMat> {
        let mut out = Vec::new();
        for d in &self.layers {
            out.push(&d.w);
            if let Some(b) = &d.b {
                out.push(b);
            }
        }
        if let Some(e) = &self.embed {
            out.push(e);
        }
        out
    }

    /// Mutable twin of [`ScoreNet::param_tensors`].
    pub fn param_tensors_mut(&mut self) -> Vec<&mut RealMat> {
        let mut out: Vec<&mut RealMat> = Vec::new();
        for d in &mut self.layers {
            out.push(&mut d.w);
            if let Some(b) = &mut d.b {
                out.push(b);
            }
        }
        if let Some(e) = &mut self.embed {
            out.push(e);
        }
        out
    }

    /// Zero gradients shaped like the parameters.
    pub fn zero_grads(&self) -> GradSet {
        GradSet {
            tensors: self
                .param_tensors()
                .iter()
                .map(|t| RealMat::zeros(t.dim()))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    /// Assemble the `B×F` feature matrix from inputs, per-sample noise
    /// levels, and conditions.
    fn assemble(
        &self,
        x_t: ArrayView2<f64>,
        sigmas: &[f64],
        cond: CondBatch,
    ) -> Result<(RealMat, Option<Vec<usize>>)> {
        let b = x_t.nrows();
        if x_t.ncols() != self.cfg.input_dim {
            return Err(Error::dims(format!(
                "net input dim {} vs x of width {}",
                self.cfg.input_dim,
                x_t.ncols()
            )));
        }
        if sigmas.len() != b {
            return Err(Error::dims(format!(
                "{} σ values for {} samples",
                sigmas.len(),
                b
            )));
        }
        if !matches!(self.cfg.sigma_embed, SigmaEmbed::None) {
            if let Some(bad) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(Error::invalid(format!(
                    "σ must be positive and finite for this net, got {bad}"
                )));
            }
        }
        let f = self.cfg.feature_dim();
        let (x_w, s_w) = (self.cfg.input_dim, self.cfg.sigma_embed.width());
        let mut feat = RealMat::zeros((b, f));
        feat.slice_mut(ndarray::s![.., 0..x_w]).assign(&x_t);
        let mut class_ids = None;
        for i in 0..b {
            let mut row = feat.row_mut(i);
            let row_slice = row.as_slice_mut().expect("row-major feature matrix");
            self.cfg
                .sigma_embed
                .write(sigmas[i], &mut row_slice[x_w..x_w + s_w]);
        }
        match (&self.cfg.cond, cond) {
            (CondSpec::None, CondBatch::None) => {}
            (CondSpec::ClassEmbed { n_classes, width }, CondBatch::Classes(ids)) => {
                if ids.len() != b {
                    return Err(Error::dims(format!(
                        "{} class ids for {} samples",
                        ids.len(),
                        b
                    )));
                }
                let table = self.embed.as_ref().expect("class net has a table");
                for (i, &id) in ids.iter().enumerate() {
                    if id > *n_classes {
                        return Err(Error::invalid(format!(
                            "class id {id} out of range (0..={n_classes}, {n_classes} = null)"
                        )));
                    }
                    for j in 0..*width {
                        feat[[i, x_w + s_w + j]] = table[[id, j]];
                    }
                }
                class_ids = Some(ids.to_vec());
            }
            (CondSpec::Continuous { width }, CondBatch::Continuous(y)) => {
                if y.nrows() != b || y.ncols() != *width {
                    return Err(Error::dims(format!(
                        "condition batch {}×{} vs expected {b}×{width}",
                        y.nrows(),
                        y.ncols()
                    )));
                }
                for i in 0..b {
                    for j in 0..*width {
                        feat[[i, x_w + s_w + j]] =
                            (y[[i, j]] - self.cond_shift[j]) / self.cond_scale[j];
                    }
                }
            }
            _ => {
                return Err(Error::invalid(
                    "condition batch kind does not match the net's condition spec".to_string(),
                ))
            }
        }
        Ok((feat, class_ids))
    }

    /// Forward pass; returns a cache for [`ScoreNet::backward`].
    pub fn forward(
        &self,
        x_t: ArrayView2<f64>,
        sigmas: &[f64],
        cond: CondBatch,
    ) -> Result<ForwardCache> {
        let (features, class_ids) = self.assemble(x_t, sigmas, cond)?;
        let n_layers = self.layers.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut z = features.clone();
        for (l, d) in self.layers.iter().enumerate() {
            let mut a = z.dot(&d.w);
            if let Some(b) = &d.b {
                a += &b.row(0);
            }
            let zz = if l + 1 == n_layers {
                a.clone() // linear output layer
            } else {
                a.mapv(|v| self.cfg.activation.f(v))
            };
            pre.push(a);
            post.push(zz.clone());
            z = zz;
        }
        Ok(ForwardCache {
            features,
            pre,
            post,
            sigmas: sigmas.to_vec(),
            class_ids,
            features_dot: None,
            pre_dot: None,
            post_dot: None,
        })
    }

    /// Dual (primal + tangent) forward pass. `tangent_x` holds per-row input
    /// tangent directions; σ and condition features carry zero tangent. The
    /// tangent of the raw output is the input-Jacobian–vector product.
    pub fn forward_jvp(
        &self,
        x_t: ArrayView2<f64>,
        sigmas: &[f64],
        cond: CondBatch,
        tangent_x: ArrayView2<f64>,
    ) -> Result<ForwardCache> {
        if tangent_x.dim() != x_t.dim() {
            return Err(Error::dims(format!(
                "tangent shape {:?} vs input {:?}",
                tangent_x.dim(),
                x_t.dim()
            )));
        }
        let (features, class_ids) = self.assemble(x_t, sigmas, cond)?;
        let b = x_t.nrows();
        let mut feat_dot = RealMat::zeros((b, self.cfg.feature_dim()));
        feat_dot
            .slice_mut(ndarray::s![.., 0..self.cfg.input_dim])
            .assign(&tangent_x);
        let n_layers = self.layers.len();
        let (mut pre, mut post) = (Vec::with_capacity(n_layers), Vec::with_capacity(n_layers));
        let (mut pre_dot, mut post_dot) =
            (Vec::with_capacity(n_layers), Vec::with_capacity(n_layers));
        let mut z = features.clone();
        let mut z_dot = feat_dot.clone();
        for (l, d) in self.layers.iter().enumerate() {
            let mut a = z.dot(&d.w);
            if let Some(bb) = &d.b {
                a += &bb.row(0);
            }
            let a_dot = z_dot.dot(&d.w);
            let (zz, zz_dot) = if l + 1 == n_layers {
                (a.clone(), a_dot.clone())
            } else {
                let zz = a.mapv(|v| self.cfg.activation.f(v));
                let mut zd = a_dot.clone();
                ndarray::Zip::from(&mut zd).and(&a).for_each(|t, &av| {
                    *t *= self.cfg.activation.df(av);
                });
                (zz, zd)
            };
            pre.push(a);
            post.push(zz.clone());
            pre_dot.push(a_dot);
            post_dot.push(zz_dot.clone());
            z = zz;
            z_dot = zz_dot;
        }
        Ok(ForwardCache {
            features,
            pre,
            post,
            sigmas: sigmas.to_vec(),
            class_ids,
            features_dot: Some(feat_dot),
            pre_dot: Some(pre_dot),
            post_dot: Some(post_dot),
        })
    }

    /// Backpropagate `∂L/∂raw` through a primal cache, accumulating parameter
    /// gradients into `grads`.
    pub fn backward(&self, cache: &ForwardCache, d_raw: &RealMat, grads: &mut GradSet) -> Result<()> {
        if d_raw.dim() != cache.raw().dim() {
            return Err(Error::dims(format!(
                "backward: gradient shape {:?} vs output {:?}",
                d_raw.dim(),
                cache.raw().dim()
            )));
        }
        let n_layers = self.layers.len();
        let mut g = d_raw.clone();
        // Walk the layer-parameter slots backwards; the embedding table (if
        // any) occupies the final slot and is handled separately.
        let mut slot = self.layer_slot_count();
        for l in (0..n_layers).rev() {
            let g_a = if l + 1 == n_layers {
                g
            } else {
                let mut ga = g;
                ndarray::Zip::from(&mut ga)
                    .and(&cache.pre[l])
                    .for_each(|t, &a| *t *= self.cfg.activation.df(a));
                ga
            };
            let z_prev = if l == 0 {
                &cache.features
            } else {
                &cache.post[l - 1]
            };
            // Bias slot precedes in reverse order.
            if self.layers[l].b.is_some() {
                slot -= 1;
                let gb = g_a.sum_axis(Axis(0));
                let target = &mut grads.tensors[slot];
                for j in 0..gb.len() {
                    target[[0, j]] += gb[j];
                }
            }
            slot -= 1;
            grads.tensors[slot] += &z_prev.t().dot(&g_a);
            g = g_a.dot(&self.layers[l].w.t());
        }
        self.accumulate_embed_grads(cache, &g, grads);
        Ok(())
    }

    /// Backpropagate a loss that reads both the primal raw output and the
    /// tangent raw output of a dual pass. Needs the activation's second
    /// derivative: perturbing a weight changes pre-activations, which changes
    /// the slope the tangent is multiplied by.
    pub fn backward_jvp(
        &self,
        cache: &ForwardCache,
        d_raw: &RealMat,
        d_raw_dot: &RealMat,
        grads: &mut GradSet,
    ) -> Result<()> {
        let (pre_dot, post_dot) = match (&cache.pre_dot, &cache.post_dot) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::invalid(
                    "backward_jvp needs a cache from forward_jvp".to_string(),
                ))
            }
        };
        let n_layers = self.layers.len();
        let mut g = d_raw.clone();
        let mut g_dot = d_raw_dot.clone();
        let mut slot = self.layer_slot_count();
        for l in (0..n_layers).rev() {
            let (g_a, g_a_dot) = if l + 1 == n_layers {
                (g, g_dot)
            } else {
                let act = self.cfg.activation;
                let mut ga = g;
                // ∂L/∂a = ∂L/∂z·f'(a) + ∂L/∂ż·f''(a)·ȧ
                ndarray::Zip::from(&mut ga)
                    .and(&cache.pre[l])
                    .and(&g_dot)
                    .and(&pre_dot[l])
                    .for_each(|t, &a, &gd, &ad| {
                        *t = *t * act.df(a) + gd * act.d2f(a) * ad;
                    });
                // ∂L/∂ȧ = ∂L/∂ż·f'(a)
                let mut gad = g_dot;
                ndarray::Zip::from(&mut gad)
                    .and(&cache.pre[l])
                    .for_each(|t, &a| *t *= act.df(a));
                (ga, gad)
            };
            let (z_prev, z_prev_dot) = if l == 0 {
                (
                    &cache.features,
                    cache
                        .features_dot
                        .as_ref()
                        .expect("dual cache carries the feature tangent"),
                )
            } else {
                (&cache.post[l - 1], &post_dot[l - 1])
            };
            if self.layers[l].b.is_some() {
                slot -= 1;
                let gb = g_a.sum_axis(Axis(0));
                let target = &mut grads.tensors[slot];
                for j in 0..gb.len() {
                    target[[0, j]] += gb[j];
                }
            }
            slot -= 1;
            {
                // W enters both a = z·W + b and ȧ = ż·W.
                let target = &mut grads.tensors[slot];
                *target += &z_prev.t().dot(&g_a);
                *target += &z_prev_dot.t().dot(&g_a_dot);
            }
            g = g_a.dot(&self.layers[l].w.t());
            g_dot = g_a_dot.dot(&self.layers[l].w.t());
        }
        self.accumulate_embed_grads(cache, &g, grads);
        Ok(())
    }

    /// Number of gradient slots taken by dense layers (weights + biases).
    fn layer_slot_count(&self) -> usize {
        self.layers
            .iter()
            .map(|d| 1 + usize::from(d.b.is_some()))
            .sum::<usize>()
    }

    /// Scatter-add feature-level gradients into the class-embedding table.
    fn accumulate_embed_grads(&self, cache: &ForwardCache, g_features: &RealMat, grads: &mut GradSet) {
        if let (Some(ids), Some(_)) = (&cache.class_ids, &self.embed) {
            let (x_w, s_w) = (self.cfg.input_dim, self.cfg.sigma_embed.width());
            let width = self.cfg.cond.width();
            let table_grad = grads
                .tensors
                .last_mut()
                .expect("embedding gradient slot exists");
            for (i, &id) in ids.iter().enumerate() {
                for j in 0..width {
                    table_grad[[id, j]] += g_features[[i, x_w + s_w + j]];
                }
            }
        }
    }

    /// Per-sample factor `∂score/∂raw` for the configured output
    /// parameterization.
    pub fn output_scale(&self, sigma: f64) -> f64 {
        match self.cfg.output {
            OutputParam::DirectScore => 1.0,
            OutputParam::NoisePrediction => -1.0 / sigma,
            OutputParam::UnitGaussianScaled => 1.0 / (1.0 + sigma * sigma),
        }
    }

    /// Scores for a batch: forward pass plus output scaling.
    pub fn score_batch_full(
        &self,
        x_t: ArrayView2<f64>,
        sigmas: &[f64],
        cond: CondBatch,
    ) -> Result<RealMat> {
        if matches!(self.cfg.output, OutputParam::NoisePrediction) {
            if let Some(bad) = sigmas.iter().find(|s| !(**s > 0.0)) {
                return Err(Error::invalid(format!(
                    "noise-prediction nets need σ > 0 to report a score, got {bad}"
                )));
            }
        }
        let cache = self.forward(x_t, sigmas, cond)?;
        let mut out = cache.raw().clone();
        for (i, &s) in sigmas.iter().enumerate() {
            let c = self.output_scale(s);
            out.row_mut(i).mapv_inplace(|v| v * c);
        }
        Ok(out)
    }

    /// Jacobian `∂score/∂x` at one point, either exactly (one dual pass per
    /// input coordinate, batched) or by central finite differences.
    pub fn input_jacobian(
        &self,
        x_t: ArrayView1<f64>,
        sigma: f64,
        cond: CondBatch,
        mode: JacobianMode,
    ) -> Result<RealMat> {
        let d = self.cfg.input_dim;
        if x_t.len() != d {
            return Err(Error::dims(format!(
                "input_jacobian: point of dim {} vs net dim {d}",
                x_t.len()
            )));
        }
        match mode {
            JacobianMode::Exact => {
                if d > 64 {
                    return Err(Error::invalid(format!(
                        "exact Jacobian runs one dual pass per coordinate and is meant for \
                         small inputs (dim {d} > 64); use finite differences"
                    )));
                }
                // Replicate the point D times with tangent directions e_i;
                // column i of the Jacobian is the tangent output of row i.
                let xs = RealMat::from_shape_fn((d, d), |(_, j)| x_t[j]);
                let tangents = RealMat::eye(d);
                let sigmas = vec![sigma; d];
                let cond_rep = replicate_cond(cond, d)?;
                let cache =
                    self.forward_jvp(xs.view(), &sigmas, cond_rep.as_batch(), tangents.view())?;
                let raw_dot = cache.raw_dot().expect("dual cache");
                let c = self.output_scale(sigma);
                // raw_dot row i = J_raw·e_i → transpose to columns.
                Ok(raw_dot.t().to_owned() * c)
            }
            JacobianMode::FiniteDifference { step } => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::invalid(format!(
                        "finite-difference step must be positive, got {step}"
                    )));
                }
                let cond_rep = replicate_cond(cond, 1)?;
                let mut jac = RealMat::zeros((d, d));
                for i in 0..d {
                    let mut xp = x_t.to_owned();
                    let mut xm = x_t.to_owned();
                    xp[i] += step;
                    xm[i] -= step;
                    let sp = self.score_batch_full(
                        xp.insert_axis(Axis(0)).view(),
                        &[sigma],
                        cond_rep.as_batch(),
                    )?;
                    let sm = self.score_batch_full(
                        xm.insert_axis(Axis(0)).view(),
                        &[sigma],
                        cond_rep.as_batch(),
                    )?;
                    for j in 0..d {
                        jac[[j, i]] = (sp[[0, j]] - sm[[0, j]]) / (2.0 * step);
                    }
                }
                Ok(jac)
            }
        }
    }
}

/// How to compute an input Jacobian.
#[derive(Debug, Clone, Copy)]
pub enum JacobianMode {
    /// One dual pass per coordinate; exact to rounding.
    Exact,
    /// Central differences with the given step.
    FiniteDifference { step: f64 },
}

/// Owned condition data; lends itself out as a [`CondBatch`].
pub(crate) enum OwnedCond {
    None,
    Classes(Vec<usize>),
    Continuous(RealMat),
}

impl OwnedCond {
    pub(crate) fn as_batch(&self) -> CondBatch<'_> {
        match self {
            OwnedCond::None => CondBatch::None,
            OwnedCond::Classes(v) => CondBatch::Classes(v),
            OwnedCond::Continuous(m) => CondBatch::Continuous(m.view()),
        }
    }
}

/// Replicate a single-sample condition `n` times.
fn replicate_cond(cond: CondBatch, n: usize) -> Result<OwnedCond> {
    Ok(match cond {
        CondBatch::None => OwnedCond::None,
        CondBatch::Classes(ids) => {
            if ids.len() != 1 {
                return Err(Error::dims(format!(
                    "expected a single class id, got {}",
                    ids.len()
                )));
            }
            OwnedCond::Classes(vec![ids[0]; n])
        }
        CondBatch::Continuous(y) => {
            if y.nrows() != 1 {
                return Err(Error::dims(format!(
                    "expected a single condition row, got {}",
                    y.nrows()
                )));
            }
            OwnedCond::Continuous(RealMat::from_shape_fn((n, y.ncols()), |(_, j)| y[[0, j]]))
        }
    })
}

/// A trained net bound to an optional fixed condition, usable as a
/// [`SmoothedScore`].
pub struct NetScore {
    net: ScoreNet,
    class: Option<usize>,
    cond_vec: Option<RealVec>,
}

impl NetScore {
    pub fn unconditional(net: ScoreNet) -> Self {
        NetScore {
            net,
            class: None,
            cond_vec: None,
        }
    }

    /// Bind a class id (`n_classes` = the null token).
    pub fn with_class(net: ScoreNet, class: usize) -> Self {
        NetScore {
            net,
            class: Some(class),
            cond_vec: None,
        }
    }

    pub fn with_condition(net: ScoreNet, y: RealVec) -> Self {
        NetScore {
            net,
            class: None,
            cond_vec: Some(y),
        }
    }

    pub fn net(&self) -> &ScoreNet {
        &self.net
    }

    fn cond_for(&self, n: usize) -> OwnedCond {
        if let Some(c) = self.class {
            OwnedCond::Classes(vec![c; n])
        } else if let Some(y) = &self.cond_vec {
            OwnedCond::Continuous(RealMat::from_shape_fn((n, y.len()), |(_, j)| y[j]))
        } else {
            OwnedCond::None
        }
    }
}

impl SmoothedScore for NetScore {
    fn dim(&self) -> usize {
        self.net.cfg.input_dim
    }

    fn score(&self, x_t: ArrayView1<f64>, sigma: f64) -> Result<RealVec> {
        let x = x_t.to_owned().insert_axis(Axis(0));
        let cond = self.cond_for(1);
        let out = self
            .net
            .score_batch_full(x.view(), &[sigma], cond.as_batch())?;
        Ok(out.row(0).to_owned())
    }

    fn score_batch(&self, x_t: ArrayView2<f64>, sigma: f64) -> Result<RealMat> {
        let cond = self.cond_for(x_t.nrows());
        self.net
            .score_batch_full(x_t, &vec![sigma; x_t.nrows()], cond.as_batch())
    }

    fn jacobian_trace(&self, x_t: ArrayView1<f64>, sigma: f64) -> Result<f64> {
        let cond = self.cond_for(1);
        let j = self
            .net
            .input_jacobian(x_t, sigma, cond.as_batch(), JacobianMode::Exact)?;
        Ok((0..j.nrows()).map(|i| j[[i, i]]).sum())
    }
}

/// A conditional net viewed as a [`CondSmoothedScore`] (continuous
/// conditions).
pub struct CondNetScore {
    net: ScoreNet,
}

impl CondNetScore {
    pub fn new(net: ScoreNet) -> Result<Self> {
        if !matches!(net.config().cond, CondSpec::Continuous { .. }) {
            return Err(Error::invalid(
                "CondNetScore needs a net with a continuous condition channel".to_string(),
            ));
        }
        Ok(CondNetScore { net })
    }

    pub fn net(&self) -> &ScoreNet {
        &self.net
    }
}

impl CondSmoothedScore for CondNetScore {
    fn dim(&self) -> usize {
        self.net.cfg.input_dim
    }

    fn cond_dim(&self) -> usize {
        self.net.cfg.cond.width()
    }

    fn score(&self, x_t: ArrayView1<f64>, sigma: f64, y: ArrayView1<f64>) -> Result<RealVec> {
        let x = x_t.to_owned().insert_axis(Axis(0));
        let yb = y.to_owned().insert_axis(Axis(0));
        let out =
            self.net
                .score_batch_full(x.view(), &[sigma], CondBatch::Continuous(yb.view()))?;
        Ok(out.row(0).to_owned())
    }

    fn score_batch(
        &self,
        x_t: ArrayView2<f64>,
        sigma: f64,
        ys: ArrayView2<f64>,
    ) -> Result<RealMat> {
        self.net
            .score_batch_full(x_t, &vec![sigma; x_t.nrows()], CondBatch::Continuous(ys))
    }
}
