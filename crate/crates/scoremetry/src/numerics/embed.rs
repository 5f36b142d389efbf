//! Embedding of complex vectors and matrices into real ones.
//!
//! A length-`N` complex vector `z` maps to the length-`2N` real vector
//! `[Re z; Im z]`. The embedding is an isometry (`‖z‖ = ‖embed(z)‖`) and turns
//! circularly-symmetric complex Gaussian noise of per-complex-entry variance
//! `σ²` into real Gaussian noise of per-real-coordinate variance `σ²/2`, which
//! is what lets real-valued score machinery digest complex baseband models.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::{ComplexMat, ComplexVec, RealMat, RealVec};
use crate::{Error, Result};

/// `[Re z; Im z]` embedding of a complex vector.
pub fn complex_to_real(z: &ComplexVec) -> RealVec {
    let n = z.len();
    Array1::from_shape_fn(2 * n, |i| if i < n { z[i].re } else { z[i - n].im })
}

/// Inverse of [`complex_to_real`]; fails on odd-length input.
pub fn real_to_complex(x: &RealVec) -> Result<ComplexVec> {
    if x.len() % 2 != 0 {
        return Err(Error::dims(format!(
            "real_to_complex needs an even length, got {}",
            x.len()
        )));
    }
    let n = x.len() / 2;
    Ok(Array1::from_shape_fn(n, |i| Complex64::new(x[i], x[i + n])))
}

/// Row-stacked `[Re A; Im A]` embedding of a complex `N×p` matrix into a real
/// `2N×p` one. When `A` is the Jacobian of a complex-valued map with respect
/// to real parameters, the result is the Jacobian of the embedded map.
pub fn complex_to_real_mat(a: &ComplexMat) -> RealMat {
    let (n, p) = a.dim();
    Array2::from_shape_fn((2 * n, p), |(i, j)| {
        if i < n {
            a[[i, j]].re
        } else {
            a[[i - n, j]].im
        }
    })
}

/// Inverse of [`complex_to_real_mat`]; fails on odd row count.
pub fn real_to_complex_mat(a: &RealMat) -> Result<ComplexMat> {
    if a.nrows() % 2 != 0 {
        return Err(Error::dims(format!(
            "real_to_complex_mat needs an even row count, got {}",
            a.nrows()
        )));
    }
    let n = a.nrows() / 2;
    Ok(Array2::from_shape_fn((n, a.ncols()), |(i, j)| {
        Complex64::new(a[[i, j]], a[[i + n, j]])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_and_layout() {
        let z = array![Complex64::new(1.0, -2.0), Complex64::new(0.5, 3.0)];
        let x = complex_to_real(&z);
        assert_eq!(x, array![1.0, 0.5, -2.0, 3.0]);
        assert_eq!(real_to_complex(&x).unwrap(), z);
    }

    #[test]
    fn embedding_is_an_isometry() {
        let s = crate::numerics::RngStream::new(17);
        let re = s.substream(0).standard_normal_vec(8);
        let im = s.substream(1).standard_normal_vec(8);
        let z: ComplexVec = Array1::from_shape_fn(8, |i| Complex64::new(re[i], im[i]));
        let x = complex_to_real(&z);
        let norm_z: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let norm_x: f64 = x.dot(&x).sqrt();
        assert!((norm_z - norm_x).abs() < 1e-12);
    }

    #[test]
    fn real_inner_product_matches_complex_real_part() {
        let u = array![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let v = array![Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5)];
        let dot_c: Complex64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        let dot_r = complex_to_real(&u).dot(&complex_to_real(&v));
        assert!((dot_c.re - dot_r).abs() < 1e-12);
    }

    #[test]
    fn odd_lengths_are_rejected() {
        assert!(real_to_complex(&array![1.0, 2.0, 3.0]).is_err());
        assert!(real_to_complex_mat(&RealMat::zeros((3, 2))).is_err());
    }

    #[test]
    fn matrix_embedding_round_trip() {
        let a = ComplexMat::from_shape_fn((3, 2), |(i, j)| {
            Complex64::new(i as f64 + 0.5, j as f64 - 1.0)
        });
        let r = complex_to_real_mat(&a);
        assert_eq!(r.dim(), (6, 2));
        assert_eq!(real_to_complex_mat(&r).unwrap(), a);
    }
}
