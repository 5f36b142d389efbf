//! Adaptive 1-D Gauss–Kronrod quadrature.
//!
//! This is the crate's non-learned ground truth: entropies, Fisher
//! informations, posterior moments, and minimum mean-square errors of
//! one-dimensional reference distributions are all integrated here and then
//! compared against score-based estimates. The rule is the classic 7-point
//! Gauss / 15-point Kronrod pair with greedy interval bisection; it is fully
//! deterministic.

use crate::{Error, Result};

/// Kronrod-15 abscissae on `[0, 1]` (positive half; the rule is symmetric).
const XK: [f64; 8] = [
    0.000000000000000000,
    0.207784955007898468,
    0.405845151377397167,
    0.586087235467691130,
    0.741531185599394440,
    0.864864423359769073,
    0.949107912342758525,
    0.991455371120812639,
];
/// Kronrod-15 weights matching `XK`.
const WK: [f64; 8] = [
    0.209482141084727828,
    0.204432940075298892,
    0.190350578064785410,
    0.169004726639267903,
    0.140653259715525919,
    0.104790010322250184,
    0.063092092629978553,
    0.022935322010529225,
];
/// Gauss-7 weights for the even-indexed abscissae of `XK`.
const WG: [f64; 4] = [
    0.417959183673469388,
    0.381830050505118945,
    0.279705391489276668,
    0.129484966168869693,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Integral estimate.
    pub value: f64,
    /// Conservative absolute error estimate (sum of per-interval G-K gaps).
    pub abs_error: f64,
    /// Number of integrand evaluations used.
    pub evaluations: usize,
}

/// One G7/K15 evaluation on `[a, b]`: returns `(kronrod, |kronrod − gauss|)`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fk = 0.0;
    let mut fg = 0.0;
    for i in 0..8 {
        let (lo, hi) = (c - h * XK[i], c + h * XK[i]);
        let v = if i == 0 {
            f(c)
        } else {
            f(lo) + f(hi)
        };
        if !v.is_finite() {
            return Err(Error::numerical(format!(
                "quadrature: integrand non-finite near x = {lo}"
            )));
        }
        fk += WK[i] * v;
        if i % 2 == 0 {
            fg += WG[i / 2] * v;
        }
    }
    Ok((fk * h, (fk - fg).abs() * h.abs()))
}

/// Integrate `f` over `[a, b]` to the requested tolerance, bisecting the
/// interval with the largest error estimate until
/// `Σ errors ≤ max(abs_tol, rel_tol·|value|)` or the interval budget runs out.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!(
            "quadrature needs finite endpoints, got [{a}, {b}]"
        )));
    }
    if !(abs_tol > 0.0 || rel_tol > 0.0) {
        return Err(Error::invalid(
            "quadrature needs a positive abs_tol or rel_tol".to_string(),
        ));
    }
    const MAX_INTERVALS: usize = 4096;
    let mut evals = 15;
    let (v, e) = gk15(&mut f, a, b)?;
    // (lo, hi, value, error) work list; the worst interval is split each round.
    let mut parts: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                abs_error: error,
                evaluations: evals,
            });
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::numerical(format!(
                "quadrature failed to converge on [{a}, {b}]: error {error:.3e} after {} intervals",
                parts.len()
            )));
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&mut f, lo, mid)?;
        let (vr, er) = gk15(&mut f, mid, hi)?;
        evals += 30;
        parts.push((lo, mid, vl, el));
        parts.push((mid, hi, vr, er));
    }
}

/// Convenience wrapper with tolerances suited to oracle use: absolute 1e-12,
/// relative 1e-10.
pub fn integrate_oracle(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    Ok(integrate(f, a, b, 1e-12, 1e-10)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_pdf;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x, 0.0, 1.0, 1e-14, 0.0).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(r.evaluations, 15); // one panel suffices
    }

    #[test]
    fn gaussian_mass_and_entropy() {
        let mass = integrate_oracle(normal_pdf, -12.0, 12.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
        let h = integrate_oracle(|x| -normal_pdf(x) * normal_pdf(x).ln(), -12.0, 12.0).unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h - expect).abs() < 1e-10, "entropy {h} vs {expect}");
    }

    #[test]
    fn sharp_peak_is_resolved_adaptively() {
        // N(5, 0.01²) inside [0, 10]: needs many subdivisions but must land on 1.
        let r = integrate(|x| normal_pdf((x - 5.0) / 0.01) / 0.01, 0.0, 10.0, 1e-10, 1e-10)
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "mass {}", r.value);
        assert!(r.evaluations > 15);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x| 1.0 / x, -1.0, 1.0, 1e-10, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let fwd = integrate_oracle(|x| x.cos(), 0.0, 1.0).unwrap();
        let rev = integrate_oracle(|x| x.cos(), 1.0, 0.0).unwrap();
        assert!((fwd + rev).abs() < 1e-12);
        assert!((fwd - 1.0_f64.sin()).abs() < 1e-12);
    }
}
