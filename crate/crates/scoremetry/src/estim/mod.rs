//! Score-based estimators of information and estimation-theoretic metrics.
//!
//! Everything here consumes score functions — analytic ones from
//! [`dist`](crate::dist) or learned ones from [`net`](crate::net) — through
//! the [`SmoothedScore`](crate::score::SmoothedScore) /
//! [`CondSmoothedScore`](crate::score::CondSmoothedScore) traits, so every
//! estimator can be validated against closed forms by swapping the score
//! implementation:
//!
//! * [`fim`] — Bayesian Fisher information from score outer products
//!   ([`bfim_posterior`], [`prior_fim_est`], [`data_fim_known`],
//!   [`data_fim_fsm`]) and the Bayesian Cramér–Rao bound [`bcrb`] with
//!   optional nuisance-block handling.
//! * [`denoise`] — Tweedie posterior means ([`tweedie_denoise`]) and MMSE
//!   evaluation from scores alone ([`mmse_from_score`]).
//! * [`stmp`] — the turbo message-passing MMSE solver for linear models
//!   ([`stmp_solve`]) plus hard/soft data-consistency projections.
//! * [`info`] — mutual information and KL divergence by integrating score
//!   differences over noise levels ([`mi_score`], [`kld_score`]).
//! * [`identities`] — quadrature-based checks of the AWGN identities
//!   (De Bruijn, I-MMSE, posterior-variance/Fisher duality, KLD curvature)
//!   that the estimators rest on.

pub mod denoise;
pub mod fim;
pub mod identities;
pub mod info;
pub mod stmp;

pub use denoise::{mmse_from_score, tweedie_denoise, tweedie_denoise_batch};
pub use fim::{
    bcrb, bfim_posterior, combine_fim, data_fim_fsm, data_fim_known, prior_fim_est, FimEstimate,
    FimRoute,
};
pub use identities::{identity_suite, quadrature_mmse, IdentityCheck};
pub use info::{kld_score, mi_score, InfoConfig, MiEstimate};
pub use stmp::{hard_consistency, soft_consistency, stmp_solve, StmpConfig, StmpState, VarRule};
