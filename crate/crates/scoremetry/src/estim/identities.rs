//! Cross-checks between information measures on an additive-noise channel.
//!
//! For a scalar source `x` with noisy observation `y = √snr·x + n`,
//! `n ~ N(0,1)` (equivalently `x_t = x + σ_t·ñ` with `σ_t = 1/√snr`),
//! classical identities tie together quantities this crate estimates by
//! entirely different routes:
//!
//! * **I-MMSE**: `dI/d snr = ½·mmse(snr)` — the slope of mutual information
//!   in SNR is half the minimum mean-square error.
//! * **De Bruijn**: `d h(x_t)/d σ² = ½·J(x_t)` — entropy growth under
//!   smoothing is half the Fisher information of the smoothed density.
//! * **Brown**: `J(√snr·x + n) = 1 − snr·mmse` — Fisher information of the
//!   observation complements the scaled MMSE.
//! * **KL curvature**: `KL(p ‖ p(·−δ)) ≈ ½·δ²·J(p)` for small shifts `δ` —
//!   divergence is locally a quadratic form in the Fisher information.
//!
//! [`identity_suite`] evaluates each side of every identity with adaptive
//! quadrature on a known 1-D Gaussian mixture — no sampling, no learned
//! models — so a failure indicates a real inconsistency in the analytic
//! machinery (densities, scores, posteriors), not estimation noise. The
//! suite is cheap and doubles as an end-user self-test via the CLI.

use ndarray::array;

use crate::dist::GaussianMixture;
use crate::quad::integrate_oracle;
use crate::{Error, Result};

/// One identity comparison: two independently computed sides and a verdict.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentityCheck {
    /// Which identity (and at which operating point).
    pub name: String,
    /// Left-hand side (the derivative / divergence route).
    pub lhs: f64,
    /// Right-hand side (the direct quadrature route).
    pub rhs: f64,
    /// `|lhs − rhs| / max(|rhs|, 1e-300)`.
    pub rel_err: f64,
    /// Relative tolerance this check is held to.
    pub tol: f64,
    /// `rel_err < tol`.
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let rel_err = (lhs - rhs).abs() / rhs.abs().max(1e-300);
        IdentityCheck {
            name: name.into(),
            lhs,
            rhs,
            rel_err,
            tol,
            pass: rel_err < tol,
        }
    }
}

/// Integration window covering every component out to 12 combined standard
/// deviations at smoothing level σ.
fn support(mix: &GaussianMixture, sigma: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut vmax = 0.0f64;
    for k in 0..mix.n_components() {
        let c = mix.component(k);
        lo = lo.min(c.mean()[0]);
        hi = hi.max(c.mean()[0]);
        vmax = vmax.max(c.cov_matrix()[[0, 0]]);
    }
    let spread = 12.0 * (vmax + sigma * sigma).sqrt();
    (lo - spread, hi + spread)
}

/// Differential entropy of the σ-smoothed mixture, by quadrature.
pub(crate) fn entropy_q(mix: &GaussianMixture, sigma: f64) -> Result<f64> {
    let (lo, hi) = support(mix, sigma);
    let v = integrate_oracle(
        |y| {
            let lp = mix
                .smoothed_log_pdf(array![y].view(), sigma)
                .expect("validated 1-D mixture");
            if lp < -700.0 {
                0.0
            } else {
                lp.exp() * lp
            }
        },
        lo,
        hi,
    )?;
    Ok(-v)
}

/// Fisher information of the σ-smoothed density, `∫ p·(∂ ln p)²`, by
/// quadrature.
pub(crate) fn fisher_q(mix: &GaussianMixture, sigma: f64) -> Result<f64> {
    let (lo, hi) = support(mix, sigma);
    integrate_oracle(
        |y| {
            let lp = mix
                .smoothed_log_pdf(array![y].view(), sigma)
                .expect("validated 1-D mixture");
            if lp < -700.0 {
                return 0.0;
            }
            let s = mix
                .smoothed_score(array![y].view(), sigma)
                .expect("validated 1-D mixture")[0];
            lp.exp() * s * s
        },
        lo,
        hi,
    )
}

/// Exact Bayes mean-square error for observing `y = x + σ·n` with `x` drawn
/// from a 1-D mixture, by adaptive quadrature over the smoothed marginal.
///
/// This is the oracle the sampling- and solver-based MMSE routes are judged
/// against; it involves no estimation.
pub fn quadrature_mmse(mix: &GaussianMixture, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "smoothing level must be positive and finite, got {sigma}"
        )));
    }
    mmse_q(mix, sigma)
}

/// Bayes-optimal mean-square error for observing `y = x + σ·n`, by the law
/// of total variance: `E_y[Var(x | y)]` with the exact mixture posterior.
pub(crate) fn mmse_q(mix: &GaussianMixture, sigma: f64) -> Result<f64> {
    // Validate once so the closure's expect cannot fire.
    mix.posterior_1d(0.0, 1.0, sigma * sigma)?;
    let (lo, hi) = support(mix, sigma);
    integrate_oracle(
        |y| {
            let lp = mix
                .smoothed_log_pdf(array![y].view(), sigma)
                .expect("validated 1-D mixture");
            if lp < -700.0 {
                return 0.0;
            }
            let (_, var) = mix
                .posterior_1d(y, 1.0, sigma * sigma)
                .expect("validated above");
            lp.exp() * var
        },
        lo,
        hi,
    )
}

/// `KL(p_σ ‖ p_σ(· − δ))` for the σ-smoothed mixture, by quadrature.
pub(crate) fn kl_shift_q(mix: &GaussianMixture, sigma: f64, delta: f64) -> Result<f64> {
    let (lo, hi) = support(mix, sigma);
    integrate_oracle(
        |y| {
            let lp = mix
                .smoothed_log_pdf(array![y].view(), sigma)
                .expect("validated 1-D mixture");
            if lp < -700.0 {
                return 0.0;
            }
            let lp_shift = mix
                .smoothed_log_pdf(array![y - delta].view(), sigma)
                .expect("validated 1-D mixture");
            lp.exp() * (lp - lp_shift)
        },
        lo,
        hi,
    )
}

/// Mutual information of the SNR channel, `I(snr) = h(√snr·x + n) − h(n)`,
/// via the smoothed-mixture entropy.
fn mi_of_snr(mix: &GaussianMixture, snr: f64) -> Result<f64> {
    let sigma_t = snr.sqrt().recip();
    let h_smoothed = entropy_q(mix, sigma_t)?;
    // h(√snr·x_t) = h(x_t) + ½ ln snr; h(n) = ½ ln(2πe).
    Ok(h_smoothed + 0.5 * snr.ln() - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln())
}

/// Run every identity check on a 1-D mixture.
///
/// Returns one [`IdentityCheck`] per comparison; a caller needing a single
/// verdict should AND the `pass` fields. Tolerances: 2% for the derivative
/// identities (I-MMSE, De Bruijn, Brown) and 5% for the small-shift KL
/// curvature, which carries an O(δ) skewness bias.
pub fn identity_suite(mix: &GaussianMixture) -> Result<Vec<IdentityCheck>> {
    if mix.dim() != 1 {
        return Err(Error::invalid(format!(
            "identity suite needs a 1-D mixture, got dim {}",
            mix.dim()
        )));
    }
    let mut checks = Vec::new();

    // I-MMSE at snr = 1: central difference of I(snr) vs ½·mmse.
    {
        let snr = 1.0;
        let eta = 1e-3;
        let lhs =
            (mi_of_snr(mix, snr * (1.0 + eta))? - mi_of_snr(mix, snr * (1.0 - eta))?)
                / (2.0 * eta * snr);
        let rhs = 0.5 * mmse_q(mix, snr.sqrt().recip())?;
        checks.push(IdentityCheck::new("i-mmse", lhs, rhs, 0.02));
    }

    // De Bruijn at σ = 0.5: d h/d σ² vs ½·J of the smoothed density.
    {
        let u = 0.25f64; // σ² = 0.25
        let eta = 1e-3;
        let h_hi = entropy_q(mix, (u * (1.0 + eta)).sqrt())?;
        let h_lo = entropy_q(mix, (u * (1.0 - eta)).sqrt())?;
        let lhs = (h_hi - h_lo) / (2.0 * eta * u);
        let rhs = 0.5 * fisher_q(mix, u.sqrt())?;
        checks.push(IdentityCheck::new("de-bruijn", lhs, rhs, 0.02));
    }

    // Brown at snr ∈ {0.1, 1, 10}: J(√snr·x + n) vs 1 − snr·mmse. The
    // observation is a scaled smoothed variable, so J(y) = J(x_t)/snr with
    // σ_t = 1/√snr.
    for snr in [0.1f64, 1.0, 10.0] {
        let sigma_t = snr.sqrt().recip();
        let lhs = fisher_q(mix, sigma_t)? / snr;
        let rhs = 1.0 - snr * mmse_q(mix, sigma_t)?;
        checks.push(IdentityCheck::new(format!("brown-snr-{snr}"), lhs, rhs, 0.02));
    }

    // KL curvature at σ = 0.5, δ = 1e-2: 2·KL/δ² vs J. The conventional ½
    // sits on the quadratic form; both sides here use that convention.
    {
        let sigma = 0.5;
        let delta = 1e-2;
        let lhs = 2.0 * kl_shift_q(mix, sigma, delta)? / (delta * delta);
        let rhs = fisher_q(mix, sigma)?;
        checks.push(IdentityCheck::new("kld-fim-curvature", lhs, rhs, 0.05));
    }

    Ok(checks)
}
