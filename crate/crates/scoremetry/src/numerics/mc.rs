//! Monte-Carlo reduction helpers: sample means with standard errors and
//! Hutchinson trace estimation.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use super::{RealVec, RngStream};
use crate::{Error, Result};

/// A Monte-Carlo mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    /// Sample mean.
    pub mean: f64,
    /// Standard error of the mean, `sample std / √n`.
    pub stderr: f64,
    /// Number of samples.
    pub n: usize,
}

/// Draw `n` evaluations of `f` on a fresh generator at `stream` and return
/// their mean and standard error. Non-finite samples abort with
/// [`Error::Numerical`] naming the offending index.
pub fn mc_mean(
    stream: RngStream,
    n: usize,
    mut f: impl FnMut(&mut ChaCha12Rng) -> f64,
) -> Result<MeanEstimate> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "mc_mean needs at least 2 samples for a standard error, got {n}"
        )));
    }
    let mut rng = stream.rng();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for i in 0..n {
        let x = f(&mut rng);
        if !x.is_finite() {
            return Err(Error::numerical(format!(
                "mc_mean: non-finite sample {x} at index {i}"
            )));
        }
        sum += x;
        sumsq += x * x;
    }
    let mean = sum / n as f64;
    let var = ((sumsq - sum * mean) / (n as f64 - 1.0)).max(0.0);
    Ok(MeanEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    })
}

/// Probe distribution for [`hutchinson_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// ±1 entries. Zero-variance on diagonal matrices, lowest variance in
    /// general; the default.
    Rademacher,
    /// Standard normal entries.
    Gaussian,
}

/// Randomized trace estimate `tr(A) ≈ mean over probes of vᵀ(A·v)`, where `A`
/// is only available through its matrix-vector product.
///
/// With [`ProbeKind::Rademacher`] each probe satisfies `vᵀv = dim` exactly, so
/// the estimator is exact for multiples of the identity and unbiased in
/// general.
pub fn hutchinson_trace(
    dim: usize,
    probes: usize,
    kind: ProbeKind,
    stream: RngStream,
    mut matvec: impl FnMut(&RealVec) -> RealVec,
) -> Result<f64> {
    if dim == 0 || probes == 0 {
        return Err(Error::invalid(format!(
            "hutchinson_trace needs dim >= 1 and probes >= 1, got dim={dim}, probes={probes}"
        )));
    }
    let mut rng = stream.rng();
    let mut acc = 0.0;
    for p in 0..probes {
        let v = RealVec::from_shape_fn(dim, |_| match kind {
            ProbeKind::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ProbeKind::Gaussian => rng.sample(StandardNormal),
        });
        let av = matvec(&v);
        if av.len() != dim {
            return Err(Error::dims(format!(
                "hutchinson_trace: matvec returned length {} for dim {dim}",
                av.len()
            )));
        }
        let q = v.dot(&av);
        if !q.is_finite() {
            return Err(Error::numerical(format!(
                "hutchinson_trace: non-finite quadratic form at probe {p}"
            )));
        }
        acc += q;
    }
    Ok(acc / probes as f64)
}
