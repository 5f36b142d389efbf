//! Unadjusted Langevin sampling driven by a score function.

use ndarray::ArrayView2;

use crate::numerics::{RealMat, RngStream};
use crate::score::SmoothedScore;
use crate::{Error, Result};

/// Run the unadjusted Langevin iteration
/// `x ← x + (ε_k/2)·s(x, σ) + √ε_k·z`, `z ~ N(0, I)`, on every row of `init`
/// in parallel, one iteration per entry of `steps`, and return the full
/// trajectory: `steps.len() + 1` snapshots of the chain states, starting with
/// `init` itself.
///
/// Passing a decreasing slice of step sizes gives the usual annealed
/// variant; a constant slice is the plain sampler. With the exact score and
/// small steps the chains approach the smoothed distribution `p_σ`; with a
/// learned score this is the standard visual check that training captured
/// the distribution. Chains that leave the ball `‖x‖_∞ ≤ 1e6` (or hit a
/// non-finite value) abort with [`Error::Diverged`] rather than wandering
/// off silently.
pub fn langevin_sample(
    score: &dyn SmoothedScore,
    init: ArrayView2<f64>,
    sigma: f64,
    steps: &[f64],
    stream: RngStream,
) -> Result<Vec<RealMat>> {
    if init.ncols() != score.dim() {
        return Err(Error::dims(format!(
            "chains of dim {} vs score of dim {}",
            init.ncols(),
            score.dim()
        )));
    }
    if steps.is_empty() {
        return Err(Error::invalid("need at least one step size".to_string()));
    }
    if let Some(&bad) = steps.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!(
            "step sizes must be positive and finite, got {bad}"
        )));
    }
    let mut x = init.to_owned();
    let mut trajectory = Vec::with_capacity(steps.len() + 1);
    trajectory.push(x.clone());
    for (k, &eps) in steps.iter().enumerate() {
        let (half, root) = (0.5 * eps, eps.sqrt());
        let s = score.score_batch(x.view(), sigma)?;
        let z = stream
            .substream(k as u64)
            .standard_normal_mat(x.nrows(), x.ncols());
        ndarray::Zip::from(&mut x).and(&s).and(&z).for_each(|x, &s, &z| {
            *x += half * s + root * z;
        });
        if let Some(bad) = x.iter().find(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::Diverged(format!(
                "langevin chain left the trusted region at step {k} (value {bad})"
            )));
        }
        trajectory.push(x.clone());
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::ClosureScore;
    use ndarray::ArrayView1;

    /// For a standard normal target the chain's stationary second moment is
    /// known: the linear iteration x ← (1 − ε/2)x + √ε z has stationary
    /// variance ε/(1 − (1 − ε/2)²) = 1/(1 − ε/4) ≈ 1.0038 at ε = 0.015.
    #[test]
    fn stationary_variance_matches_linear_theory() {
        let score = ClosureScore::new(1, |x: ArrayView1<f64>, _s| Ok(x.mapv(|v| -v)));
        let chains = 4000;
        let init = RealMat::zeros((chains, 1));
        let eps = 0.015;
        let traj = langevin_sample(
            &score,
            init.view(),
            0.0,
            &vec![eps; 2000],
            RngStream::new(11).substream(1),
        )
        .unwrap();
        assert_eq!(traj.len(), 2001);
        let out = traj.last().unwrap();
        let var = out.iter().map(|v| v * v).sum::<f64>() / chains as f64;
        let want = 1.0 / (1.0 - eps / 4.0);
        // Standard error of a variance estimate over 4000 draws ≈ √(2/n) ≈ 0.022.
        assert!(
            (var - want).abs() < 5.0 * (2.0 / chains as f64).sqrt(),
            "stationary variance {var} vs {want}"
        );
    }

    /// The returned trajectory starts at the initial state and each snapshot
    /// differs from the previous one (noise is injected every step).
    #[test]
    fn trajectory_starts_at_init_and_moves() {
        let score = ClosureScore::new(2, |x: ArrayView1<f64>, _s| Ok(x.mapv(|v| -v)));
        let init = RealMat::from_elem((3, 2), 0.5);
        let traj =
            langevin_sample(&score, init.view(), 0.0, &[0.05; 4], RngStream::new(3)).unwrap();
        assert_eq!(traj.len(), 5);
        assert_eq!(traj[0], init);
        for w in traj.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    /// A score pointing *away* from the origin blows the chain up; the guard
    /// must catch it instead of returning huge values.
    #[test]
    fn divergence_is_reported() {
        let score = ClosureScore::new(1, |x: ArrayView1<f64>, _s| Ok(x.mapv(|v| 10.0 * v)));
        let init = RealMat::from_elem((4, 1), 1.0);
        let err = langevin_sample(
            &score,
            init.view(),
            0.0,
            &vec![0.5; 10_000],
            RngStream::new(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged(_)), "{err:?}");
    }

    #[test]
    fn same_stream_reproduces_chains() {
        let score = ClosureScore::new(2, |x: ArrayView1<f64>, _s| Ok(x.mapv(|v| -v)));
        let init = RealMat::from_elem((3, 2), 0.5);
        let a = langevin_sample(&score, init.view(), 0.0, &[0.05; 50], RngStream::new(9)).unwrap();
        let b = langevin_sample(&score, init.view(), 0.0, &[0.05; 50], RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    /// With a zero score the iteration is a pure random walk, so the chain
    /// variance grows linearly: var after k steps is exactly k·ε.
    #[test]
    fn zero_score_is_a_random_walk() {
        let score = ClosureScore::new(1, |x: ArrayView1<f64>, _s| Ok(x.mapv(|_| 0.0)));
        let chains = 4000;
        let eps = 0.05;
        let init = RealMat::zeros((chains, 1));
        let traj =
            langevin_sample(&score, init.view(), 0.0, &[eps; 400], RngStream::new(14)).unwrap();
        for k in [100usize, 400] {
            let var = traj[k].iter().map(|v| v * v).sum::<f64>() / chains as f64;
            let want = k as f64 * eps;
            // χ²-mean fluctuation: rel. stderr √(2/chains) ≈ 2.2%.
            assert!(
                (var / want - 1.0).abs() < 0.1,
                "step {k}: var {var} vs {want}"
            );
        }
    }

    /// Chains driven by the exact smoothed score of a two-mode mixture
    /// equilibrate to it: the fraction ending on each side of the density dip
    /// matches the mixture mass on that side (and hence the mode weights, up
    /// to small tail leakage), so both modes are visited in proportion.
    #[test]
    fn chains_split_across_modes_by_weight() {
        use crate::dist::{Gaussian, GaussianMixture};
        let mix = GaussianMixture::new(
            vec![0.4, 0.6],
            vec![
                Gaussian::isotropic(ndarray::array![-1.2], 0.3).unwrap(),
                Gaussian::isotropic(ndarray::array![1.0], 0.5).unwrap(),
            ],
        )
        .unwrap();
        let sigma = 0.1;
        let score = {
            let mix = mix.clone();
            ClosureScore::new(1, move |x: ArrayView1<f64>, s| mix.smoothed_score(x, s))
        };
        // Overdispersed deterministic start; the modes are ~2 component-stds
        // apart, so hops over the shallow dip happen every few dozen steps
        // and 2000 steps fully mix the ensemble.
        let chains = 3000;
        let init = RealMat::from_shape_fn((chains, 1), |(i, _)| {
            -4.0 + 7.0 * (i as f64 + 0.5) / chains as f64
        });
        let traj = langevin_sample(
            &score,
            init.view(),
            sigma,
            &vec![0.02; 2000],
            RngStream::new(21).substream(4),
        )
        .unwrap();
        let finals = traj.last().unwrap();
        let split = -0.1; // near the density minimum between the modes
        let frac_left = finals.iter().filter(|&&v| v < split).count() as f64 / chains as f64;
        // Oracle: mass of the σ-smoothed mixture left of the split point.
        let phi = |z: f64| 0.5 * (1.0 + statrs::function::erf::erf(z / 2f64.sqrt()));
        let mass_left = 0.4 * phi((split + 1.2) / (0.3f64 + sigma * sigma).sqrt())
            + 0.6 * phi((split - 1.0) / (0.5f64 + sigma * sigma).sqrt());
        assert!(
            (frac_left - mass_left).abs() < 0.03,
            "left fraction {frac_left} vs mixture mass {mass_left}"
        );
        assert!(
            (frac_left - 0.4).abs() < 0.05,
            "left fraction {frac_left} vs mode weight 0.4"
        );
    }

    #[test]
    fn rejects_bad_arguments() {
        let score = ClosureScore::new(2, |x: ArrayView1<f64>, _s| Ok(x.to_owned()));
        let init = RealMat::zeros((1, 3));
        assert!(langevin_sample(&score, init.view(), 0.0, &[0.1; 5], RngStream::new(0)).is_err());
        let init = RealMat::zeros((1, 2));
        assert!(langevin_sample(&score, init.view(), 0.0, &[], RngStream::new(0)).is_err());
        assert!(
            langevin_sample(&score, init.view(), 0.0, &[0.1, 0.0], RngStream::new(0)).is_err()
        );
    }
}
