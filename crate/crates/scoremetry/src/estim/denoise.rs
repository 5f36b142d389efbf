//! Tweedie denoising and MMSE evaluation from smoothed scores.
//!
//! Under the AWGN corruption `x_t = x + σ_t·n` the posterior mean of the
//! clean sample has a closed form in the *smoothed score* of the corrupted
//! marginal — Tweedie's formula:
//!
//! ```text
//! E[x | x_t] = x_t + σ_t²·∇log p_σ(x_t)
//! ```
//!
//! so a learned score *is* an MMSE denoiser. The same score also gives the
//! MMSE itself without ever forming the posterior: the posterior-variance
//! identity `mmse(σ) = σ²·D − σ⁴·E‖∇log p_σ(x_t)‖²`, which
//! [`mmse_from_score`] evaluates by Monte Carlo.

use ndarray::{ArrayView1, ArrayView2};

use crate::numerics::{RealMat, RealVec, RngStream};
use crate::score::SmoothedScore;
use crate::{Error, Result};

/// Posterior mean `x_t + σ_t²·s(x_t, σ_t)` for a single corrupted point.
/// Requires `σ_t > 0`.
pub fn tweedie_denoise(
    score: &dyn SmoothedScore,
    x_t: ArrayView1<f64>,
    sigma_t: f64,
) -> Result<RealVec> {
    check_sigma(sigma_t)?;
    let s = score.score(x_t, sigma_t)?;
    Ok(&x_t + &(s * (sigma_t * sigma_t)))
}

/// [`tweedie_denoise`] applied to every row of a batch.
pub fn tweedie_denoise_batch(
    score: &dyn SmoothedScore,
    x_t: ArrayView2<f64>,
    sigma_t: f64,
) -> Result<RealMat> {
    check_sigma(sigma_t)?;
    let s = score.score_batch(x_t, sigma_t)?;
    Ok(&x_t + &(s * (sigma_t * sigma_t)))
}

fn check_sigma(sigma_t: f64) -> Result<()> {
    if !(sigma_t > 0.0 && sigma_t.is_finite()) {
        return Err(Error::invalid(format!(
            "Tweedie denoising needs σ_t > 0, got {sigma_t}"
        )));
    }
    Ok(())
}

/// Monte-Carlo MMSE at noise level `σ_t` from the score alone:
/// corrupt each clean sample once with fresh noise and average
/// `σ²·D − σ⁴·‖s(x + σn, σ)‖²`. Returns `(estimate, stderr)`.
///
/// The per-sample terms are iid, so the standard error is the usual
/// sample-mean one; note the estimate can dip below 0 or above the trivial
/// bound `σ²·D` only by Monte-Carlo noise.
pub fn mmse_from_score(
    score: &dyn SmoothedScore,
    xs: ArrayView2<f64>,
    sigma_t: f64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    check_sigma(sigma_t)?;
    let (n, d) = xs.dim();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples for an MMSE estimate, got {n}"
        )));
    }
    if d != score.dim() {
        return Err(Error::dims(format!(
            "samples of dim {d} vs score of dim {}",
            score.dim()
        )));
    }
    let noise = stream.standard_normal_mat(n, d);
    let x_t = &xs + &(&noise * sigma_t);
    let s = score.score_batch(x_t.view(), sigma_t)?;
    let s2 = sigma_t * sigma_t;
    let terms: Vec<f64> = s
        .rows()
        .into_iter()
        .map(|r| s2 * d as f64 - s2 * s2 * r.dot(&r))
        .collect();
    let mean = terms.iter().sum::<f64>() / n as f64;
    let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{mmse_gaussian_reference, Gaussian, GaussianMixture};
    use crate::quad::integrate_oracle;
    use crate::score::ClosureScore;
    use ndarray::array;

    fn standard_smoothed_score(dim: usize) -> ClosureScore<impl Fn(ArrayView1<f64>, f64) -> crate::Result<RealVec>> {
        ClosureScore::new(dim, |x: ArrayView1<f64>, s| {
            Ok(x.mapv(|v| -v / (1.0 + s * s)))
        })
    }

    /// N(0, I) prior: Tweedie is the linear shrinkage x_t/(1+σ²).
    #[test]
    fn gaussian_prior_gives_linear_shrinkage() {
        let score = standard_smoothed_score(3);
        let x_t = array![1.0, -2.0, 0.5];
        let sigma = 0.8;
        let out = tweedie_denoise(&score, x_t.view(), sigma).unwrap();
        let want = x_t.mapv(|v| v / (1.0 + sigma * sigma));
        for i in 0..3 {
            assert!((out[i] - want[i]).abs() < 1e-14);
        }
        let batch = RngStream::new(1).standard_normal_mat(5, 3);
        let outs = tweedie_denoise_batch(&score, batch.view(), sigma).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                assert!((outs[[i, j]] - batch[[i, j]] / (1.0 + sigma * sigma)).abs() < 1e-14);
            }
        }
    }

    /// σ_t → 0 returns the observation itself (the σ² factor kills the
    /// score term).
    #[test]
    fn vanishing_noise_returns_observation() {
        let score = standard_smoothed_score(2);
        let x_t = array![3.0, -1.0];
        let out = tweedie_denoise(&score, x_t.view(), 1e-9).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-15 && (out[1] + 1.0).abs() < 1e-15);
        assert!(tweedie_denoise(&score, x_t.view(), 0.0).is_err());
        assert!(tweedie_denoise(&score, x_t.view(), -1.0).is_err());
    }

    /// Mixture prior, 1-D: Tweedie through the exact smoothed score matches
    /// the quadrature posterior mean E[x|x_t] = ∫x p(x|x_t)dx to 1e-3.
    #[test]
    fn mixture_prior_matches_quadrature_posterior_mean() {
        let mix = GaussianMixture::new(
            vec![0.4, 0.6],
            vec![
                Gaussian::isotropic(array![-1.2], 0.3).unwrap(),
                Gaussian::isotropic(array![1.0], 0.5).unwrap(),
            ],
        )
        .unwrap();
        let sigma = 0.6;
        let score = {
            let mix = mix.clone();
            ClosureScore::new(1, move |x: ArrayView1<f64>, s| mix.smoothed_score(x, s))
        };
        for &y in &[-1.5, -0.3, 0.2, 1.4] {
            let tweedie = tweedie_denoise(&score, array![y].view(), sigma).unwrap()[0];
            // Conjugate closed form for the observation y = x + n with
            // n ~ N(0, σ²): posterior_1d with a = 1, noise_var = σ².
            let (post_mean, _) = mix.posterior_1d(y, 1.0, sigma * sigma).unwrap();
            assert!(
                (tweedie - post_mean).abs() < 1e-3,
                "y = {y}: tweedie {tweedie} vs posterior {post_mean}"
            );
            // And against brute-force quadrature, independent of conjugacy.
            let num = integrate_oracle(
                |x| {
                    let lik = (-(y - x) * (y - x) / (2.0 * sigma * sigma)).exp();
                    let prior = mix.log_pdf(array![x].view()).unwrap().exp();
                    x * lik * prior
                },
                -8.0,
                8.0,
            )
            .unwrap();
            let den = integrate_oracle(
                |x| {
                    let lik = (-(y - x) * (y - x) / (2.0 * sigma * sigma)).exp();
                    let prior = mix.log_pdf(array![x].view()).unwrap().exp();
                    lik * prior
                },
                -8.0,
                8.0,
            )
            .unwrap();
            assert!(
                (tweedie - num / den).abs() < 1e-3,
                "y = {y}: tweedie {tweedie} vs quadrature {}",
                num / den
            );
        }
    }

    /// Gaussian case: the score-based MMSE matches the closed form
    /// σ²D/(1+σ²)·… averaged over the sample set (the per-sample reference
    /// averages to the population value D·σ²/(1+σ²)).
    #[test]
    fn score_based_mmse_matches_gaussian_closed_form() {
        let d = 3usize;
        let score = standard_smoothed_score(d);
        let xs = RngStream::new(40).standard_normal_mat(6000, d);
        for &sigma in &[0.3, 1.0, 2.5] {
            let (est, se) = mmse_from_score(
                &score,
                xs.view(),
                sigma,
                RngStream::new(41).substream((sigma * 10.0) as u64),
            )
            .unwrap();
            let want = d as f64 * sigma * sigma / (1.0 + sigma * sigma);
            assert!(
                (est - want).abs() < 4.0 * se + 0.01 * want,
                "σ = {sigma}: mmse {est} ± {se} vs {want}"
            );
        }
        // Spot-check the per-sample reference formula is consistent with the
        // population value at σ = 1: E[mmse_ref] = (D + D)/4 = D/2.
        let r = mmse_gaussian_reference(array![0.0, 0.0, 0.0].view(), 1.0).unwrap();
        assert!((r - 0.75).abs() < 1e-12);
    }

    #[test]
    fn mmse_estimator_validates_inputs() {
        let score = standard_smoothed_score(2);
        let one = RealMat::zeros((1, 2));
        assert!(mmse_from_score(&score, one.view(), 1.0, RngStream::new(0)).is_err());
        let wrong = RealMat::zeros((5, 3));
        assert!(mmse_from_score(&score, wrong.view(), 1.0, RngStream::new(0)).is_err());
        let ok = RealMat::zeros((5, 2));
        assert!(mmse_from_score(&score, ok.view(), 0.0, RngStream::new(0)).is_err());
    }
}
