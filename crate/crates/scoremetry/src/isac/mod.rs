//! Near-field sensing test bed: a uniform linear array illuminating a
//! point target, with every quantity of interest available in closed form.
//!
//! This module is the ground-truth companion to the score-based estimators
//! in [`crate::estim`]: it defines a physically parameterized scene whose
//! detection divergence, detection probability, Fisher information, and
//! Bayesian position bounds all have exact expressions, so the learned
//! estimators can be scored against something sharper than another Monte
//! Carlo run.
//!
//! The pieces, bottom up:
//!
//! * [`UlaGeometry`], [`TargetState`], [`steering_vector`],
//!   [`sensing_channel`] — array layout and the rank-one round-trip channel
//!   `H_s = β₀γ·a aᵀ` with near-field (per-element range) amplitudes and
//!   phases.
//! * [`optimal_probe`], [`predicted_signal`], [`measurement_jacobian`],
//!   [`analytic_fim`] — transmit design and the measurement model
//!   `f(θ) = H_s·x` with closed-form derivatives.
//! * [`SensingScene`] / [`SceneConfig`] — one immutable object bundling
//!   geometry, priors, noise and power (watts inside, dBm at the config
//!   boundary).
//! * [`gen_detection`], [`lrt_statistics`], [`lrt_montecarlo_pd`],
//!   [`analytic_kld_known_gamma`], [`detection_pd`] — hypothesis-labeled
//!   data, the matched detector, and its exact operating curve.
//! * [`analytic_bcrb_localization`] — Bayesian and data-only position
//!   bounds from the same information average.
//!
//! ```
//! use scoremetry::isac::{analytic_kld_known_gamma, detection_pd, SensingScene};
//!
//! let scene = SensingScene::small();
//! let kld = analytic_kld_known_gamma(&scene, &scene.probe())?;
//! let p_d = detection_pd(0.1, kld, scene.snapshots())?;
//! assert!(p_d > 0.1 && p_d < 1.0); // better than chance, not yet certain
//! # Ok::<(), scoremetry::Error>(())
//! ```

mod detect;
mod geometry;
mod localize;
mod scene;

pub use detect::{
    analytic_kld_known_gamma, detection_pd, gen_detection, lrt_montecarlo_pd, lrt_statistics,
    DetectionDataset, Hypothesis,
};
pub use geometry::{
    analytic_fim, cvec_norm, measurement_jacobian, optimal_probe, predicted_signal,
    sensing_channel, steering_vector, ParamSet, TargetState, UlaGeometry, SPEED_OF_LIGHT,
};
pub use localize::analytic_bcrb_localization;
pub use scene::{dbm_to_watts, watts_to_dbm, RcsPrior, SceneConfig, SensingScene};
