//! Target detection: hypothesis-labeled snapshot generation, the matched
//! likelihood-ratio detector, and closed-form error probabilities.
//!
//! A detection experiment runs in coherent blocks. Within one block the
//! target's cross-section `γ` is frozen and `K` snapshots are received;
//! across blocks `γ` is redrawn from the scene's prior. Under the null
//! hypothesis the receiver sees circular complex noise of power `σ_s²`
//! (variance `σ_s²/2` per real coordinate after embedding); under the
//! signal hypothesis each snapshot adds the deterministic echo `γ·s₁`,
//! where `s₁` is the unit-cross-section echo template of the scene's probe.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::scene::{RcsPrior, SensingScene};
use crate::numerics::{complex_to_real, q_function, q_inverse, ComplexVec, RealMat, RngStream};
use crate::{Error, Result};

/// Which hypothesis a batch of blocks is generated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    /// Noise only.
    Null,
    /// Echo plus noise.
    Signal,
}

/// Labeled, real-embedded received snapshots grouped in coherent blocks,
/// with per-block ground truth and enough metadata to interpret the rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionDataset {
    snapshots: RealMat,
    labels: Vec<u8>,
    gammas: Vec<f64>,
    block_len: usize,
    n_antennas: usize,
    noise_power: f64,
    unit_kld_per_snapshot: f64,
}

impl DetectionDataset {
    /// All snapshots, one per row, real-embedded (`2N` columns, real parts
    /// then imaginary parts). Rows `b·K .. (b+1)·K` form block `b`.
    pub fn snapshots(&self) -> ArrayView2<f64> {
        self.snapshots.view()
    }

    /// Per-block hypothesis labels (0 = noise only, 1 = echo present).
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Per-block cross-section draws (0 under the null hypothesis).
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Snapshots per coherent block.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.len()
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshots.nrows()
    }

    /// Real embedding dimension of one snapshot (`2N`).
    pub fn dim(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Per-snapshot divergence between the two hypotheses at unit
    /// cross-section, `‖s₁‖²/σ_s²`; a block with cross-section `γ` has
    /// per-snapshot signal-to-noise ratio `γ²` times this.
    pub fn unit_kld_per_snapshot(&self) -> f64 {
        self.unit_kld_per_snapshot
    }

    /// The rows of one coherent block.
    pub fn block(&self, b: usize) -> ArrayView2<f64> {
        let k = self.block_len;
        self.snapshots.slice(ndarray::s![b * k..(b + 1) * k, ..])
    }

    /// Labels expanded to one entry per snapshot row.
    pub fn snapshot_labels(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n_snapshots());
        for &l in &self.labels {
            out.extend(std::iter::repeat(l).take(self.block_len));
        }
        out
    }

    /// Append another dataset generated from the same scene (used to build
    /// mixed-class training sets). Metadata must agree exactly.
    pub fn merge(mut self, other: DetectionDataset) -> Result<DetectionDataset> {
        if self.block_len != other.block_len
            || self.n_antennas != other.n_antennas
            || self.noise_power != other.noise_power
            || self.unit_kld_per_snapshot != other.unit_kld_per_snapshot
        {
            return Err(Error::invalid(
                "cannot merge detection datasets from different scenes",
            ));
        }
        let mut rows = Vec::with_capacity((self.n_snapshots() + other.n_snapshots()) * self.dim());
        rows.extend(self.snapshots.iter().copied());
        rows.extend(other.snapshots.iter().copied());
        let n = self.n_snapshots() + other.n_snapshots();
        self.snapshots = Array2::from_shape_vec((n, self.dim()), rows)
            .expect("row concatenation preserves the column count");
        self.labels.extend_from_slice(&other.labels);
        self.gammas.extend_from_slice(&other.gammas);
        Ok(self)
    }
}

/// Generate `n_blocks` coherent blocks under one hypothesis.
///
/// Block `b` draws from `stream.substream(b)` — first the cross-section
/// (signal hypothesis only), then the noise — so generation is
/// order-independent and could be farmed out across blocks without
/// changing a single draw.
pub fn gen_detection(
    scene: &SensingScene,
    hypothesis: Hypothesis,
    n_blocks: usize,
    stream: RngStream,
) -> Result<DetectionDataset> {
    if n_blocks == 0 {
        return Err(Error::invalid("need at least one block"));
    }
    let s1 = complex_to_real(&scene.unit_signal());
    let dim = s1.len();
    let k = scene.snapshots();
    let sd = (scene.noise_power() / 2.0).sqrt();
    let signal_energy: f64 = s1.iter().map(|v| v * v).sum();

    let mut snapshots = Array2::zeros((n_blocks * k, dim));
    let mut labels = Vec::with_capacity(n_blocks);
    let mut gammas = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut rng = stream.substream(b as u64).rng();
        let gamma = match hypothesis {
            Hypothesis::Null => 0.0,
            Hypothesis::Signal => scene.rcs().sample(&mut rng),
        };
        for row in b * k..(b + 1) * k {
            for c in 0..dim {
                let n: f64 = rng.sample(StandardNormal);
                snapshots[[row, c]] = gamma * s1[c] + sd * n;
            }
        }
        labels.push(match hypothesis {
            Hypothesis::Null => 0,
            Hypothesis::Signal => 1,
        });
        gammas.push(gamma);
    }
    Ok(DetectionDataset {
        snapshots,
        labels,
        gammas,
        block_len: k,
        n_antennas: scene.geometry().n_antennas(),
        noise_power: scene.noise_power(),
        unit_kld_per_snapshot: signal_energy / scene.noise_power(),
    })
}

/// Closed-form detection divergence for a known, fixed cross-section: the
/// Kullback–Leibler divergence between the signal and null hypotheses over
/// one coherent block, `K·‖H_s x‖²/σ_s²`, for an arbitrary probe `x`.
///
/// Errors when the scene's cross-section fluctuates (no closed form then).
pub fn analytic_kld_known_gamma(scene: &SensingScene, probe: &ComplexVec) -> Result<f64> {
    let RcsPrior::Fixed { value: gamma } = scene.rcs() else {
        return Err(Error::invalid(
            "closed-form divergence needs a fixed cross-section",
        ));
    };
    let target = super::geometry::TargetState::new(scene.center().to_owned(), gamma)?;
    let f = super::geometry::predicted_signal(scene.geometry(), &target, probe)?;
    let energy: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    Ok(scene.snapshots() as f64 * energy / scene.noise_power())
}

/// Detection probability of the matched coherent detector at false-alarm
/// rate `p_fa` when the two hypotheses are `kld` apart:
/// `P_d = Q(Q⁻¹(P_fa) − √(2·kld))`.
///
/// `kld` is the divergence of the **whole coherent block** (the
/// `snapshots`-snapshot total, i.e. `snapshots` times the per-snapshot
/// divergence); `snapshots` itself only validates the call — the block
/// total already carries the snapshot count.
pub fn detection_pd(p_fa: f64, kld: f64, snapshots: usize) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::invalid(format!(
            "false-alarm rate must be in (0, 1), got {p_fa}"
        )));
    }
    if !(kld >= 0.0 && kld.is_finite()) {
        return Err(Error::invalid(format!(
            "divergence must be non-negative and finite, got {kld}"
        )));
    }
    if snapshots == 0 {
        return Err(Error::invalid("need at least one snapshot"));
    }
    Ok(q_function(q_inverse(p_fa)? - (2.0 * kld).sqrt()))
}

/// Per-block matched-filter statistics `T_b = Σ_k ⟨s̃, ỹ_{b,k}⟩` (real
/// embedded inner products against a template echo). For a fixed, known
/// cross-section this is a monotone transform of the exact likelihood
/// ratio, hence the optimal detector.
pub fn lrt_statistics(dataset: &DetectionDataset, template: &ComplexVec) -> Result<Vec<f64>> {
    if template.len() != dataset.n_antennas() {
        return Err(Error::dims(format!(
            "template has {} antennas, dataset {}",
            template.len(),
            dataset.n_antennas()
        )));
    }
    let t = complex_to_real(template);
    let k = dataset.block_len();
    let mut out = Vec::with_capacity(dataset.n_blocks());
    for b in 0..dataset.n_blocks() {
        let block = dataset.block(b);
        let mut stat = 0.0;
        for row in 0..k {
            stat += block.row(row).dot(&t.view());
        }
        out.push(stat);
    }
    Ok(out)
}

/// Monte-Carlo operating point of the matched detector designed for the
/// unit cross-section: calibrates a threshold on `trials` noise-only
/// blocks to the target false-alarm rate, then measures the detection
/// frequency on `trials` signal blocks (cross-sections drawn from the
/// scene's prior). Returns `(P_d, achieved P_fa)`; the achieved rate sits
/// within `1/trials` of the target by construction.
pub fn lrt_montecarlo_pd(
    scene: &SensingScene,
    target_pfa: f64,
    trials: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::invalid(format!(
            "false-alarm rate must be in (0, 1), got {target_pfa}"
        )));
    }
    if trials < 10_000 {
        return Err(Error::invalid(format!(
            "threshold calibration needs at least 10^4 trials, got {trials}"
        )));
    }
    let tail = (trials as f64 * target_pfa.min(1.0 - target_pfa)).floor();
    if tail < 20.0 {
        return Err(Error::invalid(format!(
            "only {tail} calibration events expected in the tail; raise trials or move the \
             false-alarm target away from 0 or 1"
        )));
    }
    let template = scene.unit_signal();

    // Chunked generation keeps memory flat no matter how many trials run;
    // chunk c of each arm owns its own substream, and blocks inside a
    // chunk their own sub-substreams, so the draws do not depend on the
    // chunk size.
    const CHUNK: usize = 4096;
    let collect = |arm: u64, hyp: Hypothesis| -> Result<Vec<f64>> {
        let mut stats = Vec::with_capacity(trials);
        let mut done = 0usize;
        let mut c = 0u64;
        while done < trials {
            let take = CHUNK.min(trials - done);
            let data = gen_detection(scene, hyp, take, stream.substream(2 * c + arm))?;
            stats.extend(lrt_statistics(&data, &template)?);
            done += take;
            c += 1;
        }
        Ok(stats)
    };
    let h0 = collect(0, Hypothesis::Null)?;
    let h1 = collect(1, Hypothesis::Signal)?;

    // Threshold at the empirical (1 − P_fa) quantile of the null statistics.
    let mut sorted = h0.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("matched-filter statistics are finite"));
    let m = ((trials as f64 * target_pfa).round() as usize).clamp(1, trials - 1);
    let threshold = sorted[trials - m - 1];
    let achieved = h0.iter().filter(|&&t| t > threshold).count() as f64 / trials as f64;
    let p_d = h1.iter().filter(|&&t| t > threshold).count() as f64 / trials as f64;
    Ok((p_d, achieved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isac::scene::RcsPrior;
    use proptest::prelude::*;

    fn kld_tuned_scene(total_kld: f64) -> SensingScene {
        let s = SensingScene::small();
        let p = s.power_for_kld(total_kld).unwrap();
        s.with_transmit_power(p).unwrap()
    }

    #[test]
    fn null_blocks_are_pure_noise_at_half_power_per_coordinate() {
        let scene = SensingScene::small();
        let data = gen_detection(&scene, Hypothesis::Null, 1500, RngStream::new(11)).unwrap();
        assert_eq!(data.n_blocks(), 1500);
        assert_eq!(data.block_len(), 4);
        assert_eq!(data.dim(), 32);
        assert!(data.labels().iter().all(|&l| l == 0));
        assert!(data.gammas().iter().all(|&g| g == 0.0));

        let n = data.n_snapshots() * data.dim();
        let mean = data.snapshots().iter().sum::<f64>() / n as f64;
        let var = data.snapshots().iter().map(|v| v * v).sum::<f64>() / n as f64;
        let want = scene.noise_power() / 2.0;
        // Sample-variance standard error for Gaussian data: want·√(2/n).
        let se_var = want * (2.0 / n as f64).sqrt();
        assert!((var - want).abs() < 3.0 * se_var, "{var} vs {want}");
        let se_mean = (want / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean);
    }

    #[test]
    fn signal_blocks_average_to_the_embedded_echo() {
        let scene = SensingScene::small();
        let blocks = 3000;
        let data = gen_detection(&scene, Hypothesis::Signal, blocks, RngStream::new(12)).unwrap();
        assert!(data.labels().iter().all(|&l| l == 1));
        assert!(data.gammas().iter().all(|&g| g == 1.0)); // fixed unit cross-section

        let s1 = complex_to_real(&scene.unit_signal());
        let rows = data.n_snapshots() as f64;
        let se = (scene.noise_power() / 2.0 / rows).sqrt();
        for c in 0..data.dim() {
            let mean = data.snapshots().column(c).sum() / rows;
            assert!(
                (mean - s1[c]).abs() < 5.0 * se,
                "coordinate {c}: {mean} vs {}",
                s1[c]
            );
        }
        // Per-snapshot divergence metadata matches the closed form.
        let want = analytic_kld_known_gamma(&scene, &scene.probe()).unwrap()
            / scene.snapshots() as f64;
        assert!((data.unit_kld_per_snapshot() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn fluctuating_blocks_share_one_scale_drawn_from_the_exponential_law() {
        // Nearly noise-free scene: per-snapshot amplitude estimates recover
        // the block cross-section to ~1e-5.
        let scene = SensingScene::new(
            SensingScene::small().geometry().clone(),
            ndarray::array![20.0, 20.0],
            5.0,
            RcsPrior::Exponential { mean: 1.0 },
            1e-21,
            4,
            0.1,
        )
        .unwrap();
        let blocks = 600;
        let data = gen_detection(&scene, Hypothesis::Signal, blocks, RngStream::new(13)).unwrap();
        let s1 = complex_to_real(&scene.unit_signal());
        let energy: f64 = s1.iter().map(|v| v * v).sum();
        for b in 0..blocks {
            let block = data.block(b);
            let amps: Vec<f64> = (0..data.block_len())
                .map(|k| block.row(k).dot(&s1.view()) / energy)
                .collect();
            let spread = amps.iter().cloned().fold(f64::MIN, f64::max)
                - amps.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-3, "block {b} amplitudes disagree: {spread}");
            assert!((amps[0] - data.gammas()[b]).abs() < 1e-3);
        }
        // Kolmogorov–Smirnov fit of the stored block scales to Exp(1):
        // D_n below the 1% critical value 1.628/√n.
        let mut g = data.gammas().to_vec();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = g.len() as f64;
        let mut d_n = 0f64;
        for (i, &x) in g.iter().enumerate() {
            let cdf = 1.0 - (-x).exp();
            d_n = d_n
                .max((cdf - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - cdf).abs());
        }
        assert!(d_n < 1.628 / n.sqrt(), "KS statistic {d_n}");
        let mean = g.iter().sum::<f64>() / n;
        assert!((mean - 1.0).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn closed_form_divergence_composes_from_its_factors() {
        let scene = SensingScene::small();
        let probe = scene.probe();
        let kld = analytic_kld_known_gamma(&scene, &probe).unwrap();

        let a = scene.steering();
        let a2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let beta = scene.geometry().path_gain(); // γ = 1
        let want = scene.snapshots() as f64 * beta * beta * scene.transmit_power() * a2 * a2
            / scene.noise_power();
        assert!((kld - want).abs() < 1e-10 * want, "{kld} vs {want}");

        // Zero probe → zero divergence.
        let zero = ndarray::Array1::zeros(16);
        assert_eq!(analytic_kld_known_gamma(&scene, &zero).unwrap(), 0.0);

        // Linear in the snapshot count and the transmit power.
        let k8 = scene.with_snapshots(8).unwrap();
        let kld8 = analytic_kld_known_gamma(&k8, &probe).unwrap();
        assert!((kld8 - 2.0 * kld).abs() < 1e-12 * kld);
        let p2 = scene.with_transmit_power(0.2).unwrap();
        let kld_p2 = analytic_kld_known_gamma(&p2, &p2.probe()).unwrap();
        assert!((kld_p2 - 2.0 * kld).abs() < 1e-10 * kld);

        // Fluctuating cross-section has no closed form.
        let exp = scene.with_rcs(RcsPrior::Exponential { mean: 1.0 }).unwrap();
        assert!(analytic_kld_known_gamma(&exp, &probe).is_err());
    }

    #[test]
    fn detection_probability_formula_hits_known_points() {
        // Indistinguishable hypotheses: P_d = P_fa.
        for pfa in [0.01, 0.1, 0.5, 0.9] {
            assert!((detection_pd(pfa, 0.0, 4).unwrap() - pfa).abs() < 1e-9);
        }
        // Overwhelming divergence: P_d → 1.
        assert!(detection_pd(0.01, 1e6, 1).unwrap() > 1.0 - 1e-12);
        // Divergence chosen so the deflection bridges the 10% and 90%
        // quantiles lands exactly at P_d = 0.9.
        let d = q_inverse(0.1).unwrap() - q_inverse(0.9).unwrap();
        let kld = d * d / 2.0;
        assert!((detection_pd(0.1, kld, 4).unwrap() - 0.9).abs() < 1e-9);
        // Domain checks.
        assert!(detection_pd(0.0, 1.0, 4).is_err());
        assert!(detection_pd(1.0, 1.0, 4).is_err());
        assert!(detection_pd(0.1, -1.0, 4).is_err());
        assert!(detection_pd(0.1, f64::INFINITY, 4).is_err());
        assert!(detection_pd(0.1, 1.0, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn detection_probability_is_monotone(
            pfa_lo in 0.01f64..0.97,
            pfa_gap in 0.001f64..0.02,
            kld_lo in 0.0f64..30.0,
            kld_gap in 0.01f64..10.0,
        ) {
            let pfa_hi = pfa_lo + pfa_gap;
            let p_base = detection_pd(pfa_lo, kld_lo, 4).unwrap();
            prop_assert!((0.0..=1.0).contains(&p_base));
            // More divergence → more detections.
            let p_more = detection_pd(pfa_lo, kld_lo + kld_gap, 4).unwrap();
            prop_assert!(p_more >= p_base - 1e-12);
            // Looser false-alarm budget → more detections.
            let p_loose = detection_pd(pfa_hi, kld_lo, 4).unwrap();
            prop_assert!(p_loose >= p_base - 1e-12);
        }
    }

    #[test]
    fn monte_carlo_detector_matches_the_closed_form_curve() {
        let scene = kld_tuned_scene(2.0);
        let trials = 100_000;
        let (p_d, achieved) =
            lrt_montecarlo_pd(&scene, 0.1, trials, RngStream::new(21)).unwrap();
        assert!((achieved - 0.1).abs() <= 0.005);
        let want = detection_pd(0.1, 2.0, scene.snapshots()).unwrap();
        // Error budget: binomial noise on P_d plus threshold-calibration
        // noise propagated through the Gaussian tail.
        let n = trials as f64;
        let var_binom = want * (1.0 - want) / n;
        let c = q_inverse(0.1).unwrap();
        let z1 = c - (2.0f64 * 2.0).sqrt();
        let sd_thr =
            crate::numerics::normal_pdf(z1) * (0.1f64 * 0.9 / n).sqrt() / crate::numerics::normal_pdf(c);
        let tol = 3.0 * (var_binom + sd_thr * sd_thr).sqrt();
        assert!((p_d - want).abs() < tol, "{p_d} vs {want} (tol {tol})");
    }

    #[test]
    fn vanishing_transmit_power_collapses_detection_to_chance() {
        let scene = SensingScene::small().with_transmit_power(1e-30).unwrap();
        let trials = 20_000;
        let (p_d, achieved) =
            lrt_montecarlo_pd(&scene, 0.2, trials, RngStream::new(22)).unwrap();
        assert!((achieved - 0.2).abs() <= 0.005);
        // P_d ≈ P_fa: allow 3σ on each arm.
        let sd = (0.2f64 * 0.8 / trials as f64).sqrt();
        assert!((p_d - 0.2).abs() < 3.0 * std::f64::consts::SQRT_2 * sd, "{p_d}");
    }

    #[test]
    fn fluctuating_cross_section_detects_less_than_the_fixed_one() {
        let fixed = kld_tuned_scene(2.0);
        let fluct = fixed.with_rcs(RcsPrior::Exponential { mean: 1.0 }).unwrap();
        let trials = 30_000;
        let (pd_fixed, _) = lrt_montecarlo_pd(&fixed, 0.1, trials, RngStream::new(23)).unwrap();
        let (pd_fluct, _) = lrt_montecarlo_pd(&fluct, 0.1, trials, RngStream::new(23)).unwrap();
        // Same detector, same matched divergence at γ = 1; the exponential
        // fading spends much of its mass at weak returns. Expected gap is
        // ≈ 0.20, far beyond Monte-Carlo noise.
        assert!(
            pd_fluct < pd_fixed - 0.1,
            "fluctuating {pd_fluct} vs fixed {pd_fixed}"
        );
    }

    /// The miss exponent −(1/K)·ln(1−P_d) approaches the per-snapshot
    /// divergence from above as the block length grows (the asymptotic
    /// miss-rate optimality of the likelihood-ratio detector). At a
    /// per-snapshot divergence of 0.5 and a 25% false-alarm budget the
    /// exact Gaussian values are 0.735, 0.595, 0.520, 0.483 for
    /// K = 2, 4, 8, 16 — strictly decreasing, final point 3.4% off.
    #[test]
    fn miss_exponent_approaches_the_per_snapshot_divergence() {
        let per_snapshot = 0.5;
        let trials = 300_000;
        let mut exponents = Vec::new();
        for (i, k) in [2usize, 4, 8, 16].into_iter().enumerate() {
            let scene = SensingScene::small().with_snapshots(k).unwrap();
            let scene = scene
                .with_transmit_power(scene.power_for_kld(per_snapshot * k as f64).unwrap())
                .unwrap();
            let (p_d, _) =
                lrt_montecarlo_pd(&scene, 0.25, trials, RngStream::new(30 + i as u64)).unwrap();
            assert!(p_d < 1.0, "no misses observed at K = {k}; exponent undefined");
            exponents.push(-(1.0 - p_d).ln() / k as f64);
        }
        for w in exponents.windows(2) {
            assert!(w[1] < w[0] - 0.02, "exponents not decreasing: {exponents:?}");
        }
        let last = exponents[exponents.len() - 1];
        assert!(
            (last - per_snapshot).abs() <= 0.2 * per_snapshot,
            "final exponent {last} vs {per_snapshot}"
        );
    }

    #[test]
    fn generation_is_reproducible_and_validated() {
        let scene = SensingScene::small();
        let a = gen_detection(&scene, Hypothesis::Signal, 8, RngStream::new(40)).unwrap();
        let b = gen_detection(&scene, Hypothesis::Signal, 8, RngStream::new(40)).unwrap();
        assert_eq!(a, b);
        let c = gen_detection(&scene, Hypothesis::Signal, 8, RngStream::new(41)).unwrap();
        assert_ne!(a, c);
        assert!(gen_detection(&scene, Hypothesis::Null, 0, RngStream::new(40)).is_err());

        // Chunk-size independence of the Monte-Carlo operating point is
        // implied by per-chunk substreams; spot-check reproducibility.
        let s = kld_tuned_scene(1.0);
        let r1 = lrt_montecarlo_pd(&s, 0.1, 10_000, RngStream::new(42)).unwrap();
        let r2 = lrt_montecarlo_pd(&s, 0.1, 10_000, RngStream::new(42)).unwrap();
        assert_eq!(r1, r2);
        assert!(lrt_montecarlo_pd(&s, 0.1, 9_999, RngStream::new(42)).is_err());
        assert!(lrt_montecarlo_pd(&s, 1e-4, 10_000, RngStream::new(42)).is_err());
        assert!(lrt_montecarlo_pd(&s, 0.0, 10_000, RngStream::new(42)).is_err());

        // Mismatched merges are rejected; matched merges concatenate.
        let merged = a.clone().merge(c).unwrap();
        assert_eq!(merged.n_blocks(), 16);
        assert_eq!(merged.n_snapshots(), 64);
        let other_scene = gen_detection(
            &SensingScene::reference(),
            Hypothesis::Null,
            2,
            RngStream::new(40),
        )
        .unwrap();
        assert!(a.merge(other_scene).is_err());

        // Template dimension mismatches are caught.
        let data = gen_detection(&scene, Hypothesis::Null, 2, RngStream::new(40)).unwrap();
        let bad_template = ndarray::Array1::zeros(8);
        assert!(lrt_statistics(&data, &bad_template).is_err());
    }
}
