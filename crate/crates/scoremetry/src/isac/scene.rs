//! A complete sensing scene: array, nominal target, priors, noise, and
//! power budget, plus unit conversions and the closed-form quantities that
//! follow directly from the scene.
//!
//! Power-like quantities cross the API boundary in **watts**. Configuration
//! files may state them in dBm (as link budgets usually do); the
//! [`SceneConfig`] loader converts at parse time so nothing downstream ever
//! sees a dB value.

use ndarray::{array, Array2, ArrayView1};
use rand::Rng;
use rand_distr::Distribution;

use super::geometry::{
    analytic_fim, measurement_jacobian, optimal_probe, predicted_signal, steering_vector,
    ParamSet, TargetState, UlaGeometry,
};
use crate::numerics::{ComplexMat, ComplexVec, RealMat, RealVec, RngStream};
use crate::{Error, Result};

/// Convert a power from dBm to watts (`20 dBm → 0.1 W`, `−60 dBm → 1e-9 W`).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Convert a power from watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Prior on the target's radar cross-section.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RcsPrior {
    /// Deterministic, known cross-section.
    Fixed { value: f64 },
    /// Exponential fading with the given mean (a Swerling-style fluctuating
    /// return); the cross-section is redrawn independently for every
    /// coherent block and held fixed within it.
    Exponential { mean: f64 },
}

impl RcsPrior {
    pub fn validate(&self) -> Result<()> {
        let v = match self {
            RcsPrior::Fixed { value } => *value,
            RcsPrior::Exponential { mean } => *mean,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!(
                "cross-section scale must be positive, got {v}"
            )));
        }
        Ok(())
    }

    /// Mean cross-section under the prior.
    pub fn mean(&self) -> f64 {
        match self {
            RcsPrior::Fixed { value } => *value,
            RcsPrior::Exponential { mean } => *mean,
        }
    }

    /// Number of unknown parameters this prior adds to the estimation
    /// problem (0 when the cross-section is known, 1 when it fluctuates).
    pub fn n_unknowns(&self) -> usize {
        match self {
            RcsPrior::Fixed { .. } => 0,
            RcsPrior::Exponential { .. } => 1,
        }
    }

    /// Draw one cross-section value.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            RcsPrior::Fixed { value } => *value,
            RcsPrior::Exponential { mean } => {
                let exp = rand_distr::Exp::new(1.0 / mean).expect("validated positive mean");
                exp.sample(rng)
            }
        }
    }

    /// Average squared score of the prior density, `E[(d ln p/dγ)²]` — the
    /// cross-section block of the Bayesian prior information. `None` when
    /// the cross-section is known (no parameter to bound).
    pub fn prior_information(&self) -> Option<f64> {
        match self {
            RcsPrior::Fixed { .. } => None,
            // d/dγ ln[(1/m)e^{−γ/m}] = −1/m, a constant.
            RcsPrior::Exponential { mean } => Some(1.0 / (mean * mean)),
        }
    }
}

/// Immutable description of one monostatic near-field sensing scene.
///
/// The `center` plays two roles: it is the *nominal* target position used
/// for probe design and detection analysis, and the mean of the Gaussian
/// location prior (variance `location_var` per coordinate) used by the
/// Bayesian localization bounds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SensingScene {
    geometry: UlaGeometry,
    center: RealVec,
    location_var: f64,
    rcs: RcsPrior,
    noise_power: f64,
    snapshots: usize,
    transmit_power: f64,
}

impl SensingScene {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        geometry: UlaGeometry,
        center: RealVec,
        location_var: f64,
        rcs: RcsPrior,
        noise_power: f64,
        snapshots: usize,
        transmit_power: f64,
    ) -> Result<Self> {
        // Reuse the target validation for the nominal position (y > 0).
        TargetState::new(center.clone(), 1.0)?;
        rcs.validate()?;
        if !(location_var > 0.0 && location_var.is_finite()) {
            return Err(Error::invalid(format!(
                "location prior variance must be positive, got {location_var}"
            )));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::invalid(format!(
                "noise power must be positive watts, got {noise_power}"
            )));
        }
        if snapshots == 0 {
            return Err(Error::invalid("need at least one snapshot per block"));
        }
        if !(transmit_power > 0.0 && transmit_power.is_finite()) {
            return Err(Error::invalid(format!(
                "transmit power must be positive watts, got {transmit_power}"
            )));
        }
        Ok(SensingScene {
            geometry,
            center,
            location_var,
            rcs,
            noise_power,
            snapshots,
            transmit_power,
        })
    }

    /// Reference scene: 64-element half-meter array at 28 GHz, 4 snapshots,
    /// nominal target 20 m cross-range and 20 m down-range, 20 dBm transmit
    /// power, −60 dBm noise, location prior variance 5 m², known unit
    /// cross-section.
    pub fn reference() -> Self {
        SensingScene::new(
            UlaGeometry::new(64, 0.5, 28e9).expect("reference geometry is valid"),
            array![20.0, 20.0],
            5.0,
            RcsPrior::Fixed { value: 1.0 },
            dbm_to_watts(-60.0),
            4,
            dbm_to_watts(20.0),
        )
        .expect("reference scene is valid")
    }

    /// Scaled-down scene (16 antennas, otherwise the reference values)
    /// sized so that data generation and training stay interactive.
    pub fn small() -> Self {
        let mut s = SensingScene::reference();
        s.geometry = UlaGeometry::new(16, 0.5, 28e9).expect("small geometry is valid");
        s
    }

    pub fn geometry(&self) -> &UlaGeometry {
        &self.geometry
    }

    pub fn center(&self) -> ArrayView1<f64> {
        self.center.view()
    }

    pub fn location_var(&self) -> f64 {
        self.location_var
    }

    pub fn rcs(&self) -> RcsPrior {
        self.rcs
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn transmit_power(&self) -> f64 {
        self.transmit_power
    }

    /// Same scene with a different transmit power (for power sweeps).
    pub fn with_transmit_power(&self, watts: f64) -> Result<Self> {
        if !(watts > 0.0 && watts.is_finite()) {
            return Err(Error::invalid(format!(
                "transmit power must be positive watts, got {watts}"
            )));
        }
        let mut s = self.clone();
        s.transmit_power = watts;
        Ok(s)
    }

    /// Same scene with a different snapshot count.
    pub fn with_snapshots(&self, snapshots: usize) -> Result<Self> {
        if snapshots == 0 {
            return Err(Error::invalid("need at least one snapshot per block"));
        }
        let mut s = self.clone();
        s.snapshots = snapshots;
        Ok(s)
    }

    /// Same scene with a different location-prior variance.
    pub fn with_location_var(&self, var: f64) -> Result<Self> {
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::invalid(format!(
                "location prior variance must be positive, got {var}"
            )));
        }
        let mut s = self.clone();
        s.location_var = var;
        Ok(s)
    }

    /// Same scene with a different cross-section prior.
    pub fn with_rcs(&self, rcs: RcsPrior) -> Result<Self> {
        rcs.validate()?;
        let mut s = self.clone();
        s.rcs = rcs;
        Ok(s)
    }

    /// The nominal target (at the scene center with the prior-mean
    /// cross-section).
    pub fn nominal_target(&self) -> TargetState {
        TargetState::new(self.center.clone(), self.rcs.mean())
            .expect("scene validation guarantees a valid nominal target")
    }

    /// Energy-optimal probe pointed at the scene center under the scene's
    /// power budget.
    pub fn probe(&self) -> ComplexVec {
        optimal_probe(&self.geometry, &self.nominal_target(), self.transmit_power)
            .expect("scene validation guarantees a valid probe")
    }

    /// Noise-free received snapshot for a *unit* cross-section at the scene
    /// center under the scene's probe: the echo template that detection
    /// statistics correlate against. Received signals for other
    /// cross-sections are `γ` times this vector.
    pub fn unit_signal(&self) -> ComplexVec {
        let unit_target = TargetState::new(self.center.clone(), 1.0)
            .expect("scene validation guarantees a valid nominal position");
        predicted_signal(&self.geometry, &unit_target, &self.probe())
            .expect("scene validation guarantees a valid signal")
    }

    /// Steering vector toward the scene center.
    pub fn steering(&self) -> ComplexVec {
        steering_vector(&self.geometry, self.center.view())
            .expect("scene validation guarantees a valid steering vector")
    }

    /// Measurement Jacobian at a target under the scene's probe.
    pub fn measurement_jacobian(&self, target: &TargetState, params: ParamSet) -> Result<ComplexMat> {
        measurement_jacobian(&self.geometry, target, &self.probe(), params)
    }

    /// Closed-form Fisher information at a target under the scene's probe,
    /// noise power, and an explicit snapshot count.
    pub fn analytic_fim(
        &self,
        target: &TargetState,
        params: ParamSet,
        snapshots: usize,
    ) -> Result<RealMat> {
        analytic_fim(
            &self.geometry,
            target,
            &self.probe(),
            params,
            self.noise_power,
            snapshots,
        )
    }

    /// Bayesian prior information matrix for the scene's unknowns:
    /// `diag(1/σ_r², 1/σ_r²)` for a known cross-section, with the
    /// cross-section's own prior information appended when it fluctuates.
    pub fn prior_information(&self) -> RealMat {
        let p = 2 + self.rcs.n_unknowns();
        let mut j = Array2::zeros((p, p));
        j[[0, 0]] = 1.0 / self.location_var;
        j[[1, 1]] = 1.0 / self.location_var;
        if let Some(g) = self.rcs.prior_information() {
            j[[2, 2]] = g;
        }
        j
    }

    /// Draw a target from the scene's priors (Gaussian position around the
    /// center, cross-section from its prior). Positions behind the array
    /// (`y ≤ 0`) are redrawn — the model requires a target in front — so for
    /// priors that put non-negligible mass behind the array the effective
    /// position law is the truncation to `y > 0`.
    pub fn sample_target(&self, stream: RngStream) -> Result<TargetState> {
        let mut rng = stream.rng();
        let sd = self.location_var.sqrt();
        let gamma = self.rcs.sample(&mut rng);
        for _ in 0..100 {
            let x = self.center[0] + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let y = self.center[1] + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            if y > 0.0 {
                return TargetState::new(array![x, y], gamma);
            }
        }
        Err(Error::numerical(
            "location prior puts essentially all mass behind the array",
        ))
    }

    /// Transmit power (watts) at which the closed-form detection divergence
    /// [`super::analytic_kld_known_gamma`] of the optimal probe equals
    /// `target_kld`. Requires a fixed cross-section.
    pub fn power_for_kld(&self, target_kld: f64) -> Result<f64> {
        if !(target_kld > 0.0 && target_kld.is_finite()) {
            return Err(Error::invalid(format!(
                "target divergence must be positive, got {target_kld}"
            )));
        }
        let RcsPrior::Fixed { value: gamma } = self.rcs else {
            return Err(Error::invalid(
                "closed-form divergence needs a fixed cross-section",
            ));
        };
        let a = self.steering();
        let a2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let beta0 = self.geometry.path_gain();
        // kld = K·β₀²γ²·P_t·‖a‖⁴/σ²  ⇒  P_t = kld·σ²/(K·β₀²γ²·‖a‖⁴).
        let denom = self.snapshots as f64 * beta0 * beta0 * gamma * gamma * a2 * a2;
        Ok(target_kld * self.noise_power / denom)
    }
}

/// On-disk scene description with explicit units, mirroring the reference
/// parameter table: `N` antennas over aperture `D_a` at carrier `f`, `K`
/// snapshots per block, transmit power `P_t` and noise power `σ_s²` in dBm,
/// location prior `N(μ_r, σ_r²·I)`, and the cross-section prior.
///
/// dBm fields are converted to watts when the config is turned into a
/// [`SensingScene`]; watts are converted back to dBm on export.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Antenna count `N`.
    pub n_antennas: usize,
    /// Aperture `D_a` in meters.
    pub aperture_m: f64,
    /// Carrier frequency `f` in Hz.
    pub carrier_hz: f64,
    /// Snapshots per coherent block, `K`.
    pub snapshots: usize,
    /// Transmit power `P_t` in dBm.
    pub transmit_power_dbm: f64,
    /// Noise power `σ_s²` in dBm.
    pub noise_power_dbm: f64,
    /// Location prior mean `μ_r = (x, y)` in meters.
    pub center_m: [f64; 2],
    /// Location prior variance `σ_r²` per coordinate, in m².
    pub location_var_m2: f64,
    /// Cross-section prior.
    pub rcs: RcsPrior,
}

impl SceneConfig {
    /// Convert to a validated scene (dBm → watts happens here).
    pub fn to_scene(&self) -> Result<SensingScene> {
        SensingScene::new(
            UlaGeometry::new(self.n_antennas, self.aperture_m, self.carrier_hz)?,
            array![self.center_m[0], self.center_m[1]],
            self.location_var_m2,
            self.rcs,
            dbm_to_watts(self.noise_power_dbm),
            self.snapshots,
            dbm_to_watts(self.transmit_power_dbm),
        )
    }

    /// Describe an existing scene (watts → dBm happens here).
    pub fn from_scene(scene: &SensingScene) -> Self {
        SceneConfig {
            n_antennas: scene.geometry().n_antennas(),
            aperture_m: scene.geometry().aperture(),
            carrier_hz: scene.geometry().carrier_hz(),
            snapshots: scene.snapshots(),
            transmit_power_dbm: watts_to_dbm(scene.transmit_power()),
            noise_power_dbm: watts_to_dbm(scene.noise_power()),
            center_m: [scene.center()[0], scene.center()[1]],
            location_var_m2: scene.location_var(),
            rcs: scene.rcs(),
        }
    }
}
