//! Bayesian Fisher information from score outer products, and the Bayesian
//! Cramér–Rao bound.
//!
//! The Fisher information of a parameter θ with prior p(θ) and likelihood
//! p(y|θ) decomposes as `J_b = J_p + J_d`: a prior part
//! `E[∇log p(θ) ∇log p(θ)ᵀ]` and a data part
//! `E[∇_θ log p(y|θ) ∇_θ log p(y|θ)ᵀ]`. Both are means of outer products of
//! *scores*, and so is the equivalent posterior form
//! `J_b = E[∇_θ log p(θ|y) ∇_θ log p(θ|y)ᵀ]` — which is what makes all of
//! them estimable from samples once the relevant score is known analytically
//! or learned:
//!
//! * [`bfim_posterior`] — one shot via the posterior score;
//! * [`prior_fim_est`] + [`data_fim_known`] — prior score plus a closed-form
//!   measurement score;
//! * [`prior_fim_est`] + [`data_fim_fsm`] — prior score plus a *learned*
//!   measurement score;
//! * [`combine_fim`] — sums the two parts of a prior-route estimate.
//!
//! [`bcrb`] turns an estimated `J_b` into the scalar bound `Tr(J_b⁻¹)` on
//! the Bayesian MSE, or the nuisance-marginalized Schur-complement form when
//! only a sub-block of θ is of interest.

use ndarray::ArrayView2;

use crate::numerics::{self as linalg, RealMat, RealVec};
use crate::score::{CondSmoothedScore, SmoothedScore};
use crate::{Error, Result};

/// Which estimation route produced a [`FimEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FimRoute {
    /// Mean outer product of posterior scores `∇_θ log p(θ|y)`.
    Posterior,
    /// The standalone prior part `E[∇log p(θ) ∇log p(θ)ᵀ]`.
    Prior,
    /// Prior part plus a closed-form measurement score.
    PriorKnownLikelihood,
    /// Prior part plus a measurement score learned by Fisher score matching.
    PriorFsm,
    /// Assembled directly from a closed-form matrix.
    Analytic,
}

/// An estimated Fisher information matrix with provenance and per-entry
/// Monte-Carlo standard errors.
///
/// The stored matrix is symmetrized and projected to the PSD cone: outer
/// product estimators are PSD in exact arithmetic, so eigenvalues below
/// `−1e-8·‖J‖` indicate a bug (and are an error) while smaller negative ones
/// are rounding noise and are clipped to zero.
#[derive(Debug, Clone)]
pub struct FimEstimate {
    j: RealMat,
    route: FimRoute,
    /// Number of θ draws backing the estimate.
    m: usize,
    /// Number of y draws per θ (1 when the estimator saw no measurements).
    l: usize,
    stderr: RealMat,
}

impl FimEstimate {
    /// Wrap a closed-form matrix (stderr 0). Symmetrizes and PSD-projects,
    /// so a matrix with a materially negative eigenvalue is rejected.
    pub fn analytic(j: RealMat) -> Result<Self> {
        let d = j.nrows();
        if j.ncols() != d {
            return Err(Error::dims(format!(
                "Fisher information must be square, got {}×{}",
                d,
                j.ncols()
            )));
        }
        let j = project_psd(linalg::symmetrize(&j)?)?;
        Ok(FimEstimate {
            j,
            route: FimRoute::Analytic,
            m: 0,
            l: 1,
            stderr: RealMat::zeros((d, d)),
        })
    }

    /// Mean outer product of score samples, with per-entry standard errors
    /// of the mean. Needs at least two terms.
    fn from_scores(scores: &[RealVec], route: FimRoute, m: usize, l: usize) -> Result<Self> {
        let n = scores.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 score samples for a Fisher estimate, got {n}"
            )));
        }
        let d = scores[0].len();
        let mut mean = RealMat::zeros((d, d));
        for s in scores {
            for a in 0..d {
                for b in 0..d {
                    mean[[a, b]] += s[a] * s[b];
                }
            }
        }
        mean /= n as f64;
        let mut var = RealMat::zeros((d, d));
        for s in scores {
            for a in 0..d {
                for b in 0..d {
                    let dev = s[a] * s[b] - mean[[a, b]];
                    var[[a, b]] += dev * dev;
                }
            }
        }
        let stderr = var.mapv(|v| (v / ((n - 1) as f64 * n as f64)).sqrt());
        let j = project_psd(linalg::symmetrize(&mean)?)?;
        Ok(FimEstimate {
            j,
            route,
            m,
            l,
            stderr,
        })
    }

    pub fn matrix(&self) -> &RealMat {
        &self.j
    }

    pub fn route(&self) -> FimRoute {
        self.route
    }

    /// Number of θ draws.
    pub fn n_theta(&self) -> usize {
        self.m
    }

    /// Number of y draws per θ.
    pub fn n_y_per_theta(&self) -> usize {
        self.l
    }

    pub fn stderr(&self) -> &RealMat {
        &self.stderr
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }
}

/// Clip rounding-level negative eigenvalues to zero; reject materially
/// negative ones (threshold `1e-8·‖J‖`, spectral norm).
fn project_psd(j: RealMat) -> Result<RealMat> {
    let (vals, vecs) = linalg::eigh_jacobi(&j)?;
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if norm == 0.0 {
        return Ok(j);
    }
    let floor = -1e-8 * norm;
    if let Some(&bad) = vals.iter().find(|&&v| v < floor) {
        return Err(Error::numerical(format!(
            "Fisher estimate has eigenvalue {bad:.3e} below −1e-8·‖J‖ = {floor:.3e}; \
             outer-product estimates are PSD, so this indicates a bug upstream"
        )));
    }
    if vals.iter().all(|&v| v >= 0.0) {
        return Ok(j);
    }
    let d = j.nrows();
    let mut out = RealMat::zeros((d, d));
    for k in 0..d {
        let lam = vals[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        for a in 0..d {
            for b in 0..d {
                out[[a, b]] += lam * vecs[[a, k]] * vecs[[b, k]];
            }
        }
    }
    Ok(out)
}

/// Check the `(θ[M], y[M·L])` row layout shared by the measurement-driven
/// estimators and return `(M, L)`.
fn paired_layout(thetas: ArrayView2<f64>, ys: ArrayView2<f64>) -> Result<(usize, usize)> {
    let m = thetas.nrows();
    if m == 0 || ys.nrows() == 0 {
        return Err(Error::invalid("need at least one θ and one y".to_string()));
    }
    if ys.nrows() % m != 0 {
        return Err(Error::dims(format!(
            "{} y rows do not group evenly over {m} θ rows",
            ys.nrows()
        )));
    }
    Ok((m, ys.nrows() / m))
}

/// Bayesian Fisher information via the posterior score:
/// `J_b ≈ (1/ML) Σ_m Σ_ℓ s(θ_m|y_{m,ℓ}) s(θ_m|y_{m,ℓ})ᵀ`, where
/// `s(θ|y) = ∇_θ log p(θ|y)` is evaluated at σ = 0.
///
/// `ys` holds `L` measurement rows per θ, grouped: row `m·L + ℓ` belongs to
/// `θ_m`. Fails when `M·L < 2`.
pub fn bfim_posterior(
    posterior: &dyn CondSmoothedScore,
    thetas: ArrayView2<f64>,
    ys: ArrayView2<f64>,
) -> Result<FimEstimate> {
    let (m, l) = paired_layout(thetas, ys)?;
    let mut scores = Vec::with_capacity(m * l);
    for mi in 0..m {
        for li in 0..l {
            scores.push(posterior.score(thetas.row(mi), 0.0, ys.row(mi * l + li))?);
        }
    }
    FimEstimate::from_scores(&scores, FimRoute::Posterior, m, l)
}

/// Prior Fisher information `J_p ≈ (1/M) Σ s(θ_m) s(θ_m)ᵀ` from the clean
/// prior score (σ = 0). Fails when `M < 2`.
pub fn prior_fim_est(prior: &dyn SmoothedScore, thetas: ArrayView2<f64>) -> Result<FimEstimate> {
    let m = thetas.nrows();
    let mut scores = Vec::with_capacity(m);
    for mi in 0..m {
        scores.push(prior.score(thetas.row(mi), 0.0)?);
    }
    FimEstimate::from_scores(&scores, FimRoute::Prior, m, 1)
}

fn data_fim(
    measurement: &dyn CondSmoothedScore,
    thetas: ArrayView2<f64>,
    ys: ArrayView2<f64>,
    route: FimRoute,
) -> Result<FimEstimate> {
    let (m, l) = paired_layout(thetas, ys)?;
    let mut scores = Vec::with_capacity(m * l);
    for mi in 0..m {
        for li in 0..l {
            scores.push(measurement.score(thetas.row(mi), 0.0, ys.row(mi * l + li))?);
        }
    }
    FimEstimate::from_scores(&scores, route, m, l)
}

/// Data (measurement) Fisher information
/// `J_d ≈ (1/ML) Σ s(θ_m; y_{m,ℓ}) s(θ_m; y_{m,ℓ})ᵀ` using a *closed-form*
/// measurement score `∇_θ log p(y|θ)` (input θ, condition y). Layout as in
/// [`bfim_posterior`].
pub fn data_fim_known(
    measurement: &dyn CondSmoothedScore,
    thetas: ArrayView2<f64>,
    ys: ArrayView2<f64>,
) -> Result<FimEstimate> {
    data_fim(measurement, thetas, ys, FimRoute::PriorKnownLikelihood)
}

/// Same estimator as [`data_fim_known`] but fed a measurement score
/// *learned* by Fisher score matching; only the provenance tag differs.
pub fn data_fim_fsm(
    measurement: &dyn CondSmoothedScore,
    thetas: ArrayView2<f64>,
    ys: ArrayView2<f64>,
) -> Result<FimEstimate> {
    data_fim(measurement, thetas, ys, FimRoute::PriorFsm)
}

/// Sum two Fisher estimates (typically `J_p + J_d` on the prior route).
///
/// Standard errors add in quadrature (the parts are estimated from
/// independent randomness); the route tag is taken from the non-[`Prior`]
/// part, and the sample counts conservatively as the minima.
///
/// [`Prior`]: FimRoute::Prior
pub fn combine_fim(a: &FimEstimate, b: &FimEstimate) -> Result<FimEstimate> {
    if a.dim() != b.dim() {
        return Err(Error::dims(format!(
            "cannot combine Fisher estimates of dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let j = &a.j + &b.j;
    let stderr = ndarray::Zip::from(&a.stderr)
        .and(&b.stderr)
        .map_collect(|&x, &y| (x * x + y * y).sqrt());
    let route = if a.route == FimRoute::Prior { b.route } else { a.route };
    Ok(FimEstimate {
        j,
        route,
        m: a.m.min(b.m),
        l: a.l.min(b.l),
        stderr,
    })
}

/// Bayesian Cramér–Rao bound from an estimated Fisher information.
///
/// * `nuisance = None`: `Tr(J⁻¹)`, the bound on the total MSE of θ.
/// * `nuisance = Some(idx)`: the listed coordinates are nuisance parameters
///   γ; the bound on the remaining block r is
///   `Tr((J_rr − J_rγ J_γγ⁻¹ J_γr)⁻¹)` — equivalently the trace of the
///   r-block of the full inverse.
///
/// Fails when J is numerically singular (1-norm condition number ≥ 1e12).
pub fn bcrb(j: &FimEstimate, nuisance: Option<&[usize]>) -> Result<f64> {
    let d = j.dim();
    let cond = linalg::condition_number_1(&j.j);
    if !cond.is_finite() || cond >= 1e12 {
        return Err(Error::numerical(format!(
            "Fisher information is numerically singular (condition number {cond:.3e})"
        )));
    }
    let Some(gamma) = nuisance else {
        let inv = linalg::lu_inverse(&j.j)?;
        return Ok((0..d).map(|i| inv[[i, i]]).sum());
    };
    let mut is_gamma = vec![false; d];
    for &g in gamma {
        if g >= d {
            return Err(Error::invalid(format!(
                "nuisance index {g} out of range for a {d}-dim parameter"
            )));
        }
        if std::mem::replace(&mut is_gamma[g], true) {
            return Err(Error::invalid(format!("duplicate nuisance index {g}")));
        }
    }
    let r_idx: Vec<usize> = (0..d).filter(|&i| !is_gamma[i]).collect();
    let g_idx: Vec<usize> = (0..d).filter(|&i| is_gamma[i]).collect();
    if r_idx.is_empty() || g_idx.is_empty() {
        return Err(Error::invalid(
            "nuisance set must leave both blocks non-empty".to_string(),
        ));
    }
    let pick = |rows: &[usize], cols: &[usize]| {
        RealMat::from_shape_fn((rows.len(), cols.len()), |(a, b)| j.j[[rows[a], cols[b]]])
    };
    let j_rr = pick(&r_idx, &r_idx);
    let j_rg = pick(&r_idx, &g_idx);
    let j_gg = pick(&g_idx, &g_idx);
    let j_gg_inv = linalg::lu_inverse(&j_gg)?;
    let schur = &j_rr - &j_rg.dot(&j_gg_inv).dot(&j_rg.t());
    let inv = linalg::lu_inverse(&schur)?;
    Ok((0..r_idx.len()).map(|i| inv[[i, i]]).sum())
}
