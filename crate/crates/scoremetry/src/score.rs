//! Score-function abstractions shared by reference distributions, trained
//! networks, and the metric estimators.
//!
//! A *smoothed score* is the gradient of the log-density of `x + σ·n`,
//! `n ~ N(0, I)`, as a function of the noisy point `x_t` and the noise level
//! `σ`. At `σ = 0` it is the clean score `∇ₓ log p(x)`. Estimators only ever
//! see the [`SmoothedScore`] / [`CondSmoothedScore`] traits, so closed-form
//! references and learned networks are interchangeable — which is exactly how
//! learned estimates get validated against analytic ones.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::numerics::{RealMat, RealVec};
use crate::{Error, Result};

/// Score of a (possibly noise-smoothed) distribution.
pub trait SmoothedScore {
    /// Dimension of the sample space.
    fn dim(&self) -> usize;

    /// `∇ log p_σ(x_t)` where `p_σ = p * N(0, σ²I)`; `σ = 0` means the clean
    /// score.
    fn score(&self, x_t: ArrayView1<f64>, sigma: f64) -> Result<RealVec>;

    /// Batched evaluation at a common `σ`: row `i` of the result is the score
    /// at row `i` of `x_t`. The default loops; networks override with a real
    /// batched pass.
    fn score_batch(&self, x_t: ArrayView2<f64>, sigma: f64) -> Result<RealMat> {
        let mut out = Array2::zeros((x_t.nrows(), self.dim()));
        for (i, row) in x_t.rows().into_iter().enumerate() {
            let s = self.score(row, sigma)?;
            out.row_mut(i).assign(&s);
        }
        Ok(out)
    }

    /// `tr ∇ₓ (score)` — the Laplacian of the smoothed log-density. Needed by
    /// second-order posterior-variance rules; implementors without a cheap
    /// route may return [`Error::InvalidArgument`].
    fn jacobian_trace(&self, _x_t: ArrayView1<f64>, _sigma: f64) -> Result<f64> {
        Err(Error::invalid(
            "this score function does not expose a Jacobian trace".to_string(),
        ))
    }
}

/// Score of a conditional distribution `p(x | y)`, smoothed in `x`.
pub trait CondSmoothedScore {
    /// Dimension of `x`.
    fn dim(&self) -> usize;
    /// Dimension of the conditioning variable `y`.
    fn cond_dim(&self) -> usize;

    /// `∇_{x_t} log p_σ(x_t | y)`.
    fn score(&self, x_t: ArrayView1<f64>, sigma: f64, y: ArrayView1<f64>) -> Result<RealVec>;

    /// Batched evaluation at a common `σ` with per-row conditions.
    fn score_batch(
        &self,
        x_t: ArrayView2<f64>,
        sigma: f64,
        ys: ArrayView2<f64>,
    ) -> Result<RealMat> {
        if x_t.nrows() != ys.nrows() {
            return Err(Error::dims(format!(
                "score_batch: {} samples vs {} conditions",
                x_t.nrows(),
                ys.nrows()
            )));
        }
        let mut out = Array2::zeros((x_t.nrows(), self.dim()));
        for i in 0..x_t.nrows() {
            let s = self.score(x_t.row(i), sigma, ys.row(i))?;
            out.row_mut(i).assign(&s);
        }
        Ok(out)
    }
}

/// Wrap a closure as a [`SmoothedScore`].
pub struct ClosureScore<F> {
    dim: usize,
    f: F,
}

impl<F> ClosureScore<F>
where
    F: Fn(ArrayView1<f64>, f64) -> Result<RealVec>,
{
    pub fn new(dim: usize, f: F) -> Self {
        ClosureScore { dim, f }
    }
}

impl<F> SmoothedScore for ClosureScore<F>
where
    F: Fn(ArrayView1<f64>, f64) -> Result<RealVec>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x_t: ArrayView1<f64>, sigma: f64) -> Result<RealVec> {
        (self.f)(x_t, sigma)
    }
}

/// Wrap a closure as a [`CondSmoothedScore`].
pub struct ClosureCondScore<F> {
    dim: usize,
    cond_dim: usize,
    f: F,
}

impl<F> ClosureCondScore<F>
where
    F: Fn(ArrayView1<f64>, f64, ArrayView1<f64>) -> Result<RealVec>,
{
    pub fn new(dim: usize, cond_dim: usize, f: F) -> Self {
        ClosureCondScore { dim, cond_dim, f }
    }
}

impl<F> CondSmoothedScore for ClosureCondScore<F>
where
    F: Fn(ArrayView1<f64>, f64, ArrayView1<f64>) -> Result<RealVec>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn cond_dim(&self) -> usize {
        self.cond_dim
    }
    fn score(&self, x_t: ArrayView1<f64>, sigma: f64, y: ArrayView1<f64>) -> Result<RealVec> {
        (self.f)(x_t, sigma, y)
    }
}

/// A conditional score with the condition pinned to a fixed value, viewed as
/// an unconditional one.
pub struct BoundCondScore<'a, C: ?Sized> {
    cond: &'a C,
    y: RealVec,
}

impl<'a, C: CondSmoothedScore + ?Sized> BoundCondScore<'a, C> {
    pub fn new(cond: &'a C, y: RealVec) -> Self {
        BoundCondScore { cond, y }
    }
}

impl<C: CondSmoothedScore + ?Sized> SmoothedScore for BoundCondScore<'_, C> {
    fn dim(&self) -> usize {
        self.cond.dim()
    }
    fn score(&self, x_t: ArrayView1<f64>, sigma: f64) -> Result<RealVec> {
        self.cond.score(x_t, sigma, self.y.view())
    }
    fn score_batch(&self, x_t: ArrayView2<f64>, sigma: f64) -> Result<RealMat> {
        let ys = Array2::from_shape_fn((x_t.nrows(), self.y.len()), |(_, j)| self.y[j]);
        self.cond.score_batch(x_t, sigma, ys.view())
    }
}

/// Score of an affinely transformed variable `z = scale·x + shift` expressed
/// through the score of `x`.
///
/// If `S` scores `x`, then the smoothed score of `z` at `(z_t, σ)` is
/// `(1/scale)·S((z_t − shift)/scale, σ/scale)`: scaling commutes with the
/// Gaussian smoothing, so one reference score serves a whole family of
/// shifted/scaled models. `scale` must be positive.
pub struct AffineScore<S> {
    inner: S,
    scale: f64,
    shift: RealVec,
}

impl<S: SmoothedScore> AffineScore<S> {
    pub fn new(inner: S, scale: f64, shift: RealVec) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!(
                "AffineScore needs a positive finite scale, got {scale}"
            )));
        }
        if shift.len() != inner.dim() {
            return Err(Error::dims(format!(
                "AffineScore: shift length {} vs score dim {}",
                shift.len(),
                inner.dim()
            )));
        }
        Ok(AffineScore {
            inner,
            scale,
            shift,
        })
    }
}

impl<S: SmoothedScore> SmoothedScore for AffineScore<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn score(&self, z_t: ArrayView1<f64>, sigma: f64) -> Result<RealVec> {
        let x_t = (&z_t - &self.shift) / self.scale;
        Ok(self.inner.score(x_t.view(), sigma / self.scale)? / self.scale)
    }

    fn score_batch(&self, z_t: ArrayView2<f64>, sigma: f64) -> Result<RealMat> {
        let mut x_t = z_t.to_owned();
        for mut row in x_t.rows_mut() {
            row -= &self.shift;
        }
        x_t /= self.scale;
        Ok(self.inner.score_batch(x_t.view(), sigma / self.scale)? / self.scale)
    }

    fn jacobian_trace(&self, z_t: ArrayView1<f64>, sigma: f64) -> Result<f64> {
        let x_t = (&z_t - &self.shift) / self.scale;
        Ok(self.inner.jacobian_trace(x_t.view(), sigma / self.scale)? / (self.scale * self.scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_gaussian_score(dim: usize) -> impl SmoothedScore {
        // Smoothed standard normal: −x_t/(1 + σ²).
        ClosureScore::new(dim, |x_t: ArrayView1<f64>, sigma: f64| {
            Ok(x_t.mapv(|v| -v / (1.0 + sigma * sigma)))
        })
    }

    #[test]
    fn bound_condition_forwards() {
        let cond = ClosureCondScore::new(1, 1, |x_t: ArrayView1<f64>, _s, y: ArrayView1<f64>| {
            Ok(array![y[0] - x_t[0]])
        });
        let bound = BoundCondScore::new(&cond, array![2.5]);
        assert_eq!(bound.score(array![1.0].view(), 0.3).unwrap(), array![1.5]);
        let batch = bound
            .score_batch(array![[1.0], [0.0]].view(), 0.3)
            .unwrap();
        assert_eq!(batch, array![[1.5], [2.5]]);
    }

    #[test]
    fn affine_matches_closed_form() {
        // z = 2x + 1 with x ~ N(0,1) means z ~ N(1, 4); smoothed score is
        // −(z_t − 1)/(4 + σ²).
        let s = AffineScore::new(unit_gaussian_score(1), 2.0, array![1.0]).unwrap();
        for &(z, sig) in &[(0.7, 0.0), (-1.3, 0.5), (2.0, 3.0)] {
            let got = s.score(array![z].view(), sig).unwrap()[0];
            let want = -(z - 1.0) / (4.0 + sig * sig);
            assert!((got - want).abs() < 1e-12, "z={z} σ={sig}: {got} vs {want}");
        }
    }

    #[test]
    fn affine_rejects_bad_scale() {
        assert!(AffineScore::new(unit_gaussian_score(1), 0.0, array![0.0]).is_err());
        assert!(AffineScore::new(unit_gaussian_score(2), 1.0, array![0.0]).is_err());
    }

    #[test]
    fn batch_default_matches_single() {
        let s = unit_gaussian_score(2);
        let x = array![[1.0, -2.0], [0.5, 0.25]];
        let b = s.score_batch(x.view(), 0.7).unwrap();
        for i in 0..2 {
            let one = s.score(x.row(i), 0.7).unwrap();
            for j in 0..2 {
                assert_eq!(b[[i, j]], one[j]);
            }
        }
    }
}
