//! Closed-form localization bounds: the Bayesian Cramér–Rao bound on the
//! target position under the scene's priors, next to the prior-free
//! (data-only) bound.
//!
//! Both bounds share one Monte-Carlo average of the analytic Fisher
//! information over targets drawn from the scene prior, so their
//! difference isolates exactly the prior's contribution: the Bayesian
//! information is `J_b = J_p + E_θ[J(θ)]` and the data-only information is
//! the expectation alone. When the cross-section fluctuates it becomes a
//! nuisance parameter — the position bound then goes through the Schur
//! complement over the cross-section block.

use super::geometry::{analytic_fim, ParamSet};
use super::scene::{RcsPrior, SensingScene};
use crate::estim::{bcrb, FimEstimate};
use crate::numerics::RngStream;
use crate::{Error, Result};

/// Bayesian and data-only position bounds `(BCRB, CRB)` in m² (summed over
/// the two coordinates) for the scene's localization problem.
///
/// The probe is pointed at the scene center — the best the transmitter can
/// do before observing anything — and the data information is averaged
/// over `m_mc ≥ 100` targets drawn from the scene prior with `stream`.
/// With a fixed cross-section the parameter is the position alone; with a
/// fluctuating one the cross-section joins as a nuisance parameter, with
/// its own prior-information block.
pub fn analytic_bcrb_localization(
    scene: &SensingScene,
    m_mc: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if m_mc < 100 {
        return Err(Error::invalid(format!(
            "need at least 100 Monte-Carlo draws for the information average, got {m_mc}"
        )));
    }
    let params = match scene.rcs() {
        RcsPrior::Fixed { .. } => ParamSet::Position,
        RcsPrior::Exponential { .. } => ParamSet::PositionRcs,
    };
    let nuisance: Option<Vec<usize>> = match params {
        ParamSet::Position => None,
        ParamSet::PositionRcs => Some(vec![2]),
    };
    let probe = scene.probe();

    let p = params.dim();
    let mut j_d = ndarray::Array2::zeros((p, p));
    for m in 0..m_mc {
        let target = scene.sample_target(stream.substream(m as u64))?;
        let j = analytic_fim(
            scene.geometry(),
            &target,
            &probe,
            params,
            scene.noise_power(),
            scene.snapshots(),
        )?;
        j_d += &j;
    }
    j_d /= m_mc as f64;

    let j_b = &j_d + &scene.prior_information();
    let nu = nuisance.as_deref();
    let bayes = bcrb(&FimEstimate::analytic(j_b)?, nu)?;
    let data_only = bcrb(&FimEstimate::analytic(j_d)?, nu)?;
    Ok((bayes, data_only))
}
