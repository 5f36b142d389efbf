//! Near-field uniform linear array (ULA) geometry, round-trip sensing
//! channel, and its derivatives.
//!
//! The array lies on the x-axis with `N` elements spread over an aperture
//! `D_a` (spacing `d = D_a/(N−1)`, offsets symmetric about the origin). A
//! point target at `r = (x, y)`, `y > 0`, is in the *near field*: each
//! element sees a different range `r_n = ‖r − r_n^a‖`, so the steering
//! vector carries per-element amplitude `1/r_n` and phase `−2π r_n/λ` —
//! both curvature effects that a far-field model would flatten.
//!
//! The monostatic round-trip channel is the rank-one *transpose* outer
//! product `H_s = β·a aᵀ` (not `a aᴴ`: forward and return paths accumulate
//! the same phase, making `H_s` complex-symmetric). `β = β₀·γ` combines the
//! radar-equation path gain `β₀ = √(λ²/(4π)³)` with the target's radar
//! cross-section `γ`.
//!
//! Everything downstream needs derivatives of the received signal
//! `f(θ) = H_s·x` with respect to the target parameters; these are derived
//! in closed form here (chain rule through the per-element ranges) and
//! pinned against extrapolated finite differences in the tests.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::numerics::{ComplexMat, ComplexVec, RealMat, RealVec};
use crate::{Error, Result};

/// Exact SI speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array on the x-axis, centred at the origin.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UlaGeometry {
    n: usize,
    aperture: f64,
    carrier_hz: f64,
}

impl UlaGeometry {
    /// `n` antennas over an `aperture` (meters) at carrier `carrier_hz`.
    pub fn new(n: usize, aperture: f64, carrier_hz: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 antennas, got {n}")));
        }
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::invalid(format!(
                "aperture must be positive meters, got {aperture}"
            )));
        }
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "carrier must be positive Hz, got {carrier_hz}"
            )));
        }
        Ok(UlaGeometry {
            n,
            aperture,
            carrier_hz,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// Element spacing `d = D_a/(N−1)` (meters).
    pub fn spacing(&self) -> f64 {
        self.aperture / (self.n - 1) as f64
    }

    /// Carrier wavelength `λ = c/f` (meters).
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Element offsets in units of the spacing: `δ_n = n − (N−1)/2` for
    /// `n = 0..N`; symmetric about zero, summing to zero.
    pub fn offsets(&self) -> Vec<f64> {
        let half = (self.n - 1) as f64 / 2.0;
        (0..self.n).map(|i| i as f64 - half).collect()
    }

    /// Element x-coordinates in meters.
    pub fn element_positions(&self) -> Vec<f64> {
        let d = self.spacing();
        self.offsets().into_iter().map(|o| o * d).collect()
    }

    /// Per-element ranges `r_n = ‖r − r_n^a‖` to a point `pos = (x, y)`.
    /// Errors if the point (numerically) touches an element.
    pub fn ranges(&self, pos: ArrayView1<f64>) -> Result<Vec<f64>> {
        if pos.len() != 2 {
            return Err(Error::dims(format!(
                "target position must be (x, y), got length {}",
                pos.len()
            )));
        }
        let (x, y) = (pos[0], pos[1]);
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::invalid(format!(
                "target position must be finite, got ({x}, {y})"
            )));
        }
        let mut out = Vec::with_capacity(self.n);
        for xa in self.element_positions() {
            let r = ((x - xa) * (x - xa) + y * y).sqrt();
            if r < 1e-9 {
                return Err(Error::invalid(format!(
                    "target coincides with the element at x = {xa} m"
                )));
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Radar-equation path gain `β₀ = √(λ²/(4π)³)`.
    pub fn path_gain(&self) -> f64 {
        let lambda = self.wavelength();
        (lambda * lambda / (4.0 * std::f64::consts::PI).powi(3)).sqrt()
    }
}

/// A point scatterer: position `(x, y)` with `y > 0` (in front of the
/// array) and radar cross-section `γ > 0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TargetState {
    position: RealVec,
    rcs: f64,
}

impl TargetState {
    pub fn new(position: RealVec, rcs: f64) -> Result<Self> {
        if position.len() != 2 {
            return Err(Error::dims(format!(
                "target position must be (x, y), got length {}",
                position.len()
            )));
        }
        if !(position[1] > 0.0) || !position.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "target must sit in front of the array (y > 0), got ({}, {})",
                position[0], position[1]
            )));
        }
        if !(rcs > 0.0 && rcs.is_finite()) {
            return Err(Error::invalid(format!(
                "radar cross-section must be positive, got {rcs}"
            )));
        }
        Ok(TargetState { position, rcs })
    }

    pub fn position(&self) -> ArrayView1<f64> {
        self.position.view()
    }

    pub fn rcs(&self) -> f64 {
        self.rcs
    }
}

/// Near-field steering vector: `[a]_n = (1/r_n)·exp(−j·2π·r_n/λ)`.
pub fn steering_vector(geom: &UlaGeometry, pos: ArrayView1<f64>) -> Result<ComplexVec> {
    let ranges = geom.ranges(pos)?;
    let k = 2.0 * std::f64::consts::PI / geom.wavelength();
    Ok(Array1::from_iter(ranges.iter().map(|&r| {
        let (sin, cos) = (-k * r).sin_cos();
        Complex64::new(cos / r, sin / r)
    })))
}

/// Round-trip sensing channel `H_s = β₀·γ·a aᵀ` — rank one and complex
/// *symmetric* (transpose, not conjugate-transpose: the forward and return
/// paths accumulate identical phase).
pub fn sensing_channel(geom: &UlaGeometry, target: &TargetState) -> Result<ComplexMat> {
    let a = steering_vector(geom, target.position())?;
    let beta = geom.path_gain() * target.rcs();
    let n = a.len();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| a[i] * a[j] * beta))
}

/// The transmit vector maximizing the received echo energy under a power
/// budget: `x = √P_t·a*/‖a‖`, the dominant right singular vector of
/// `a aᵀ` scaled to `‖x‖² = P_t`. Achieves `‖H_s x‖² = β²·P_t·‖a‖⁴`.
pub fn optimal_probe(
    geom: &UlaGeometry,
    target: &TargetState,
    transmit_power: f64,
) -> Result<ComplexVec> {
    if !(transmit_power > 0.0 && transmit_power.is_finite()) {
        return Err(Error::invalid(format!(
            "transmit power must be positive watts, got {transmit_power}"
        )));
    }
    let a = steering_vector(geom, target.position())?;
    let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = transmit_power.sqrt() / norm;
    Ok(a.mapv(|z| z.conj() * scale))
}

/// Noise-free received signal `f(θ) = H_s(θ)·x` for probe `x`.
pub fn predicted_signal(
    geom: &UlaGeometry,
    target: &TargetState,
    probe: &ComplexVec,
) -> Result<ComplexVec> {
    let a = steering_vector(geom, target.position())?;
    if probe.len() != a.len() {
        return Err(Error::dims(format!(
            "probe of length {} vs {} antennas",
            probe.len(),
            a.len()
        )));
    }
    // f = β·(aᵀx)·a without materializing the N×N channel.
    let g: Complex64 = a.iter().zip(probe.iter()).map(|(ai, xi)| ai * xi).sum();
    let beta = geom.path_gain() * target.rcs();
    Ok(a.mapv(|ai| ai * g * beta))
}

/// Which target parameters the Jacobian / Fisher information ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSet {
    /// Position `(x, y)` only; cross-section treated as known.
    Position,
    /// Position and cross-section `(x, y, γ)`.
    PositionRcs,
}

impl ParamSet {
    pub fn dim(&self) -> usize {
        match self {
            ParamSet::Position => 2,
            ParamSet::PositionRcs => 3,
        }
    }
}

/// Analytic Jacobian `∂f/∂θ` of the received signal `f(θ) = β₀γ·a(r)aᵀ(r)·x`
/// with columns ordered `(x, y[, γ])`.
///
/// Derivation: with `g = aᵀx`, `f = β₀γ·g·a` and each element of the
/// steering vector depends on position only through its range,
/// `∂a_n/∂p = a_n·(−1/r_n − j·2π/λ)·∂r_n/∂p` with `∂r_n/∂x = (x−x_n^a)/r_n`
/// and `∂r_n/∂y = y/r_n`; the product rule gives
/// `∂f/∂p = β₀γ·((∂a)ᵀx·a + g·∂a)`. The cross-section enters linearly:
/// `∂f/∂γ = β₀·g·a`.
pub fn measurement_jacobian(
    geom: &UlaGeometry,
    target: &TargetState,
    probe: &ComplexVec,
    params: ParamSet,
) -> Result<ComplexMat> {
    let a = steering_vector(geom, target.position())?;
    let n = a.len();
    if probe.len() != n {
        return Err(Error::dims(format!(
            "probe of length {} vs {n} antennas",
            probe.len()
        )));
    }
    let ranges = geom.ranges(target.position())?;
    let k = 2.0 * std::f64::consts::PI / geom.wavelength();
    let (x, y) = (target.position()[0], target.position()[1]);
    let beta0 = geom.path_gain();
    let gamma = target.rcs();
    let g: Complex64 = a.iter().zip(probe.iter()).map(|(ai, xi)| ai * xi).sum();

    // ∂a per position coordinate.
    let mut da_dx = Array1::zeros(n);
    let mut da_dy = Array1::zeros(n);
    for (i, xa) in geom.element_positions().into_iter().enumerate() {
        let r = ranges[i];
        let radial = Complex64::new(-1.0 / r, -k); // d(ln a_n)/d r_n
        da_dx[i] = a[i] * radial * ((x - xa) / r);
        da_dy[i] = a[i] * radial * (y / r);
    }
    let dg_dx: Complex64 = da_dx.iter().zip(probe.iter()).map(|(d, xi)| d * xi).sum();
    let dg_dy: Complex64 = da_dy.iter().zip(probe.iter()).map(|(d, xi)| d * xi).sum();

    let mut jac = Array2::zeros((n, params.dim()));
    for i in 0..n {
        let scale = Complex64::new(beta0 * gamma, 0.0);
        jac[[i, 0]] = scale * (dg_dx * a[i] + g * da_dx[i]);
        jac[[i, 1]] = scale * (dg_dy * a[i] + g * da_dy[i]);
        if params == ParamSet::PositionRcs {
            jac[[i, 2]] = Complex64::new(beta0, 0.0) * g * a[i];
        }
    }
    Ok(jac)
}

/// Fisher information of the target parameters for `K` coherent snapshots
/// in circular complex noise of power `σ_s²`:
/// `J(θ) = K·(2/σ_s²)·Re{JᴴJ}` with `J` the measurement Jacobian.
pub fn analytic_fim(
    geom: &UlaGeometry,
    target: &TargetState,
    probe: &ComplexVec,
    params: ParamSet,
    noise_power: f64,
    snapshots: usize,
) -> Result<RealMat> {
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::invalid(format!(
            "noise power must be positive watts, got {noise_power}"
        )));
    }
    if snapshots == 0 {
        return Err(Error::invalid("need at least one snapshot".to_string()));
    }
    let jac = measurement_jacobian(geom, target, probe, params)?;
    let p = params.dim();
    let scale = 2.0 * snapshots as f64 / noise_power;
    let mut out = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            let v: Complex64 = jac
                .column(i)
                .iter()
                .zip(jac.column(j).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            out[[i, j]] = scale * v.re;
        }
    }
    Ok(out)
}

/// Euclidean norm of a complex vector.
pub fn cvec_norm(v: &ComplexVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
