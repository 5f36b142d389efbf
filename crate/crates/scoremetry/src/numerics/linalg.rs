//! Small dense linear algebra: LU, Cholesky, symmetric Jacobi
//! eigendecomposition, one-sided Jacobi SVD, pseudo-inverse, and min-norm
//! least squares.
//!
//! Matrices in this crate are Fisher-information blocks, message-passing
//! system matrices, and steering Jacobians — a few dozen rows at most — so
//! every routine favors numerical robustness and determinism over speed.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense real vector.
pub type RealVec = Array1<f64>;
/// Dense real matrix.
pub type RealMat = Array2<f64>;
/// Dense complex vector.
pub type ComplexVec = Array1<Complex64>;
/// Dense complex matrix.
pub type ComplexMat = Array2<Complex64>;

/// Frobenius norm.
pub fn frobenius_norm(a: &RealMat) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest absolute asymmetry `max |A_ij − A_ji|`.
pub fn symmetry_defect(a: &RealMat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// `(A + Aᵀ)/2`. The result has zero symmetry defect up to rounding; callers
/// that require a symmetric matrix (Fisher blocks, covariances) route through
/// here before factorizing.
pub fn symmetrize(a: &RealMat) -> Result<RealMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims(format!(
            "symmetrize needs a square matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(0.5 * (a + &a.t()))
}

/// Compact LU factorization with partial pivoting: `P·A = L·U`.
struct Lu {
    /// L (unit lower, below diagonal) and U (upper) packed together.
    lu: RealMat,
    /// Row permutation: `perm[i]` is the original row in position `i`.
    perm: Vec<usize>,
}

fn lu_factor(a: &RealMat) -> Result<Lu> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dims(format!(
            "LU needs a square matrix, got {}×{}",
            n,
            a.ncols()
        )));
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::numerical("matrix contains non-finite entries"));
    }
    let tiny = scale.max(1.0) * 1e-14 * n.max(1) as f64;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // Partial pivoting: bring the largest remaining |entry| in column k up.
        let (mut pivot_row, mut pivot_abs) = (k, lu[[k, k]].abs());
        for i in (k + 1)..n {
            if lu[[i, k]].abs() > pivot_abs {
                pivot_row = i;
                pivot_abs = lu[[i, k]].abs();
            }
        }
        if pivot_abs <= tiny {
            return Err(Error::numerical(format!(
                "singular matrix: pivot {pivot_abs:.3e} at column {k} (scale {scale:.3e})"
            )));
        }
        if pivot_row != k {
            for j in 0..n {
                lu.swap([k, j], [pivot_row, j]);
            }
            perm.swap(k, pivot_row);
        }
        for i in (k + 1)..n {
            let m = lu[[i, k]] / lu[[k, k]];
            lu[[i, k]] = m;
            for j in (k + 1)..n {
                lu[[i, j]] -= m * lu[[k, j]];
            }
        }
    }
    Ok(Lu { lu, perm })
}

impl Lu {
    fn solve_vec(&self, b: &RealVec) -> RealVec {
        let n = self.perm.len();
        let mut x = Array1::from_shape_fn(n, |i| b[self.perm[i]]);
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[[i, j]] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[[i, j]] * x[j];
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }
}

/// Solve `A·x = b` by LU with partial pivoting.
pub fn lu_solve(a: &RealMat, b: &RealVec) -> Result<RealVec> {
    if a.nrows() != b.len() {
        return Err(Error::dims(format!(
            "lu_solve: {}×{} matrix vs length-{} rhs",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(lu_factor(a)?.solve_vec(b))
}

/// Dense inverse by LU with partial pivoting. Intended for matrices up to a
/// few dozen rows (Fisher blocks, message-passing Grams).
pub fn lu_inverse(a: &RealMat) -> Result<RealMat> {
    let n = a.nrows();
    let f = lu_factor(a)?;
    let mut inv = RealMat::zeros((n, n));
    for j in 0..n {
        let mut e = RealVec::zeros(n);
        e[j] = 1.0;
        let col = f.solve_vec(&e);
        for i in 0..n {
            inv[[i, j]] = col[i];
        }
    }
    Ok(inv)
}

/// Cholesky factor `L` (lower triangular) of a symmetric positive-definite
/// matrix: `A = L·Lᵀ`. Fails on indefinite input.
pub fn cholesky(a: &RealMat) -> Result<RealMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dims("cholesky needs a square matrix".to_string()));
    }
    let mut l = RealMat::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::numerical(format!(
                        "cholesky: non-positive pivot {s:.3e} at row {i}"
                    )));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(eigenvalues, V)` with columns of `V` the orthonormal
/// eigenvectors, sorted by descending eigenvalue, so `A = V·diag(λ)·Vᵀ`.
pub fn eigh_jacobi(a: &RealMat) -> Result<(RealVec, RealMat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dims("eigh needs a square matrix".to_string()));
    }
    if symmetry_defect(a) > 1e-8 * frobenius_norm(a).max(1e-300) {
        return Err(Error::invalid(
            "eigh_jacobi expects a symmetric matrix; symmetrize first".to_string(),
        ));
    }
    let mut m = symmetrize(a)?;
    let mut v = RealMat::eye(n);
    let norm = frobenius_norm(&m).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if (2.0 * off).sqrt() <= 1e-14 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // Classic Jacobi rotation zeroing (p,q).
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let vals = RealVec::from_shape_fn(n, |i| m[[order[i], order[i]]]);
    let vecs = RealMat::from_shape_fn((n, n), |(i, j)| v[[i, order[j]]]);
    Ok((vals, vecs))
}

/// Thin SVD `A = U·diag(s)·Vᵀ` by one-sided Jacobi orthogonalization.
///
/// Returns `(U m×r, s r, V n×r)` with `r = min(m, n)` and singular values in
/// descending order. Exact zeros appear for rank-deficient input.
pub fn svd_jacobi(a: &RealMat) -> Result<(RealMat, RealVec, RealMat)> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        // Work on the transpose and swap the factors back.
        let (u, s, v) = svd_jacobi(&a.t().to_owned())?;
        return Ok((v, s, u));
    }
    let mut u = a.clone(); // columns orthogonalized in place
    let mut v = RealMat::eye(n);
    let scale = a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1e-300);
    for _sweep in 0..60 {
        let mut converged = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    alpha += u[[i, p]] * u[[i, p]];
                    beta += u[[i, q]] * u[[i, q]];
                    gamma += u[[i, p]] * u[[i, q]];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt().max(1e-30 * scale * scale) {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u[[i, p]], u[[i, q]]);
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[[i, p]], v[[i, q]]);
                    v[[i, p]] = c * vp - s * vq;
                    v[[i, q]] = s * vp + c * vq;
                }
            }
        }
        if converged {
            break;
        }
    }
    // Column norms are the singular values; normalize U where nonzero.
    let mut sv: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let norm = (0..m).map(|i| u[[i, j]] * u[[i, j]]).sum::<f64>().sqrt();
            (norm, j)
        })
        .collect();
    sv.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let mut u_out = RealMat::zeros((m, n));
    let mut v_out = RealMat::zeros((n, n));
    let mut s_out = RealVec::zeros(n);
    for (k, &(norm, j)) in sv.iter().enumerate() {
        s_out[k] = norm;
        for i in 0..n {
            v_out[[i, k]] = v[[i, j]];
        }
        if norm > 1e-300 {
            for i in 0..m {
                u_out[[i, k]] = u[[i, j]] / norm;
            }
        }
    }
    Ok((u_out, s_out, v_out))
}

/// Moore–Penrose pseudo-inverse via [`svd_jacobi`]. Singular values below
/// `max(m,n)·ε·s_max` are treated as zero.
pub fn pinv(a: &RealMat) -> Result<RealMat> {
    let (u, s, v) = svd_jacobi(a)?;
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * s.iter().cloned().fold(0.0, f64::max);
    let r = s.len();
    let mut sinv = RealMat::zeros((r, r));
    for i in 0..r {
        if s[i] > cutoff {
            sinv[[i, i]] = 1.0 / s[i];
        }
    }
    Ok(v.dot(&sinv).dot(&u.t()))
}

/// Least-squares solve of `A·x ≈ y` that, among all residual minimizers,
/// returns the one closest to `anchor` (the all-zeros vector when `anchor` is
/// `None`, i.e. the classic minimum-norm solution).
///
/// Implemented as the pseudo-inverse projection `x = a + A⁺(y − A·a)`:
/// rank-deficient and under-determined systems are handled without special
/// cases.
///
/// ```
/// use ndarray::{array};
/// use scoremetry::numerics::lstsq_min_norm;
/// // Second row of A is zero, so the second coordinate is unconstrained and
/// // stays at the anchor; the first is pinned by the data.
/// let a = array![[1.0, 0.0], [0.0, 0.0]];
/// let x = lstsq_min_norm(&a, &array![3.0, 0.0], Some(&array![9.0, 7.0])).unwrap();
/// assert_eq!(x, array![3.0, 7.0]);
/// ```
pub fn lstsq_min_norm(a: &RealMat, y: &RealVec, anchor: Option<&RealVec>) -> Result<RealVec> {
    if a.nrows() != y.len() {
        return Err(Error::dims(format!(
            "lstsq: {}×{} matrix vs length-{} rhs",
            a.nrows(),
            a.ncols(),
            y.len()
        )));
    }
    if let Some(x0) = anchor {
        if x0.len() != a.ncols() {
            return Err(Error::dims(format!(
                "lstsq: anchor length {} vs {} columns",
                x0.len(),
                a.ncols()
            )));
        }
    }
    let a_pinv = pinv(a)?;
    Ok(match anchor {
        None => a_pinv.dot(y),
        Some(x0) => x0 + &a_pinv.dot(&(y - &a.dot(x0))),
    })
}

/// 1-norm condition number estimate `‖A‖₁·‖A⁻¹‖₁`; infinite when `A` is
/// numerically singular.
pub fn condition_number_1(a: &RealMat) -> f64 {
    fn one_norm(m: &RealMat) -> f64 {
        (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| m[[i, j]].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
    match lu_inverse(a) {
        Ok(inv) => one_norm(a) * one_norm(&inv),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use ndarray::array;

    #[test]
    fn lu_inverse_round_trip() {
        let g = RngStream::new(11).standard_normal_mat(6, 6);
        let a = g.dot(&g.t()) + RealMat::eye(6); // SPD, well conditioned
        let inv = lu_inverse(&a).unwrap();
        let eye = a.dot(&inv);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(lu_inverse(&a), Err(Error::Numerical(_))));
    }

    #[test]
    fn symmetrize_kills_defect() {
        let a = array![[1.0, 2.0], [2.0 + 3e-9, 5.0]];
        let s = symmetrize(&a).unwrap();
        assert!(symmetry_defect(&s) <= 1e-12);
        assert!((s[[0, 1]] - (2.0 + 1.5e-9)).abs() < 1e-15);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let back = l.dot(&l.t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[[i, j]] - a[[i, j]]).abs() < 1e-12);
            }
        }
        assert!(cholesky(&array![[1.0, 2.0], [2.0, 1.0]]).is_err()); // indefinite
    }

    #[test]
    fn eigh_recovers_known_spectrum() {
        let (vals, _vecs) = eigh_jacobi(&RealMat::from_diag(&array![3.0, 1.0, 2.0])).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        // Reconstruction on a dense symmetric matrix.
        let g = RngStream::new(5).standard_normal_mat(5, 5);
        let a = symmetrize(&g).unwrap();
        let (vals, v) = eigh_jacobi(&a).unwrap();
        let back = v.dot(&RealMat::from_diag(&vals)).dot(&v.t());
        for i in 0..5 {
            for j in 0..5 {
                assert!((back[[i, j]] - a[[i, j]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn svd_reconstructs_and_flags_rank_deficiency() {
        let a = array![[1.0, 0.0], [0.0, 0.0]];
        let (u, s, v) = svd_jacobi(&a).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14);
        assert!(s[1].abs() < 1e-14);
        let back = u.dot(&RealMat::from_diag(&s)).dot(&v.t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[[i, j]] - a[[i, j]]).abs() < 1e-12);
            }
        }
        // Tall dense matrix round trip.
        let t = RngStream::new(8).standard_normal_mat(7, 3);
        let (u, s, v) = svd_jacobi(&t).unwrap();
        let back = u.dot(&RealMat::from_diag(&s)).dot(&v.t());
        for i in 0..7 {
            for j in 0..3 {
                assert!((back[[i, j]] - t[[i, j]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pinv_of_projector_is_itself() {
        let a = array![[1.0, 0.0], [0.0, 0.0]];
        let p = pinv(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[[i, j]] - a[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstsq_prefers_the_anchor_in_null_directions() {
        let a = array![[1.0, 0.0], [0.0, 0.0]];
        let y = array![3.0, 0.0];
        let x = lstsq_min_norm(&a, &y, Some(&array![9.0, 7.0])).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 7.0).abs() < 1e-12);
        // Without an anchor the null component collapses to zero.
        let x0 = lstsq_min_norm(&a, &y, None).unwrap();
        assert!((x0[0] - 3.0).abs() < 1e-12 && x0[1].abs() < 1e-12);
        // Residual is minimal either way.
        let r = &y - &a.dot(&x);
        let r0 = &y - &a.dot(&x0);
        assert!((r.dot(&r) - r0.dot(&r0)).abs() < 1e-12);
    }

    #[test]
    fn lstsq_matches_direct_solve_when_full_rank() {
        let a = RngStream::new(21).standard_normal_mat(4, 4);
        let y = RngStream::new(22).standard_normal_vec(4);
        let x = lstsq_min_norm(&a, &y, None).unwrap();
        let direct = lu_solve(&a, &y).unwrap();
        for i in 0..4 {
            assert!((x[i] - direct[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn condition_number_of_identity_is_one() {
        let c = condition_number_1(&RealMat::eye(4));
        assert!((c - 1.0).abs() < 1e-12);
        assert!(condition_number_1(&array![[1.0, 2.0], [2.0, 4.0]]).is_infinite());
    }
}
