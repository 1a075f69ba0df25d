//! Monte Carlo simulation of the entanglement-based protocol and moment
//! estimation, closing the loop from samples back to an estimated key rate.
//!
//! Sample generation is chunked; each chunk draws from its own counter
//! stream of a seeded ChaCha12 generator, so batches are reproducible
//! bit-for-bit regardless of how many threads generate them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::gaussian::{project_physical, sqrtm_psd, validate_state, GaussianState};
use crate::keyrate::{post_channel_state, report_from_state, KeyRateReport, ProtocolConfig, RateOptions};
use crate::measurement::MeasurementKind;

/// Samples per RNG stream; fixed so that results do not depend on the
/// parallelism degree.
const CHUNK: usize = 8192;

/// Identity of the generator contract, recorded in batch metadata.
pub const GENERATOR_ID: &str = "chacha12/stream-per-chunk/8192";

/// Joint measurement records for `n` protocol rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub a_cols: usize,
    pub b_cols: usize,
    /// Row-major `n x (a_cols + b_cols)`; Alice's columns first.
    pub samples: Vec<f64>,
    pub seed: u64,
    pub generator: &'static str,
    pub config: ProtocolConfig<f64>,
    pub t: f64,
    pub xi: f64,
}

/// Sidecar metadata describing a batch, serialized as JSON next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchMeta {
    pub n: usize,
    pub a_cols: usize,
    pub b_cols: usize,
    pub seed: u64,
    pub generator: String,
    pub prep: crate::keyrate::Prep,
    pub bob: crate::keyrate::BobMeasurement,
    pub recon: crate::keyrate::Recon,
    pub v: f64,
    pub t: f64,
    pub xi: f64,
}

impl SampleBatch {
    pub fn cols(&self) -> usize {
        self.a_cols + self.b_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.samples[i * c..(i + 1) * c]
    }

    pub fn meta(&self) -> BatchMeta {
        BatchMeta {
            n: self.n,
            a_cols: self.a_cols,
            b_cols: self.b_cols,
            seed: self.seed,
            generator: self.generator.to_string(),
            prep: self.config.prep,
            bob: self.config.bob,
            recon: self.config.recon,
            v: self.config.v,
            t: self.t,
            xi: self.xi,
        }
    }

    /// Column labels for the CSV export.
    pub fn header(&self) -> Vec<&'static str> {
        let mut h = Vec::new();
        match self.a_cols {
            1 => h.push("alice_q"),
            _ => {
                h.push("alice_q");
                h.push("alice_p");
            }
        }
        match self.b_cols {
            1 => h.push("bob_q"),
            _ => {
                h.push("bob_q");
                h.push("bob_p");
            }
        }
        h
    }

    /// One row per sample.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        let c = self.cols();
        for i in 0..self.n {
            let row = &self.samples[i * c..(i + 1) * c];
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// The exact joint Gaussian law of (Alice, Bob) outcome records implied by
/// the post-channel state and the two measurement kinds: heterodyned modes
/// contribute both quadratures with one added vacuum unit, homodyne
/// contributes the Q row directly.
pub fn joint_outcome_moments(
    cfg: &ProtocolConfig<f64>,
    state: &GaussianState<f64>,
) -> (DVector<f64>, DMatrix<f64>, usize, usize) {
    let mut g = state.covariance().clone();
    let d = state.displacement().clone();
    let mut rows: Vec<usize> = Vec::new();
    let kinds = [(0usize, cfg.alice_kind()), (1usize, cfg.bob_kind())];
    let mut arities = [0usize; 2];
    for (mode, kind) in kinds {
        match kind {
            MeasurementKind::Heterodyne => {
                g[(2 * mode, 2 * mode)] += 1.0;
                g[(2 * mode + 1, 2 * mode + 1)] += 1.0;
                rows.push(2 * mode);
                rows.push(2 * mode + 1);
                arities[mode] = 2;
            }
            MeasurementKind::HomodyneQ => {
                rows.push(2 * mode);
                arities[mode] = 1;
            }
            MeasurementKind::HomodyneP => {
                rows.push(2 * mode + 1);
                arities[mode] = 1;
            }
        }
    }
    let k = rows.len();
    let mean = DVector::from_fn(k, |i, _| d[rows[i]]);
    let cov = DMatrix::from_fn(k, k, |i, j| g[(rows[i], rows[j])]);
    (mean, cov, arities[0], arities[1])
}

/// Draw `n` joint outcome records; deterministic for a fixed seed.
pub fn simulate(
    cfg: &ProtocolConfig<f64>,
    t: f64,
    xi: f64,
    n: usize,
    seed: u64,
) -> Result<SampleBatch, CoreError> {
    if n == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n",
            reason: "sample count must be at least 1".into(),
        });
    }
    let state = post_channel_state(cfg, t, xi)?;
    let (mean, cov, a_cols, b_cols) = joint_outcome_moments(cfg, &state);
    let k = mean.len();

    // Cholesky when possible, symmetric square root for semidefinite dust.
    let factor = match nalgebra::Cholesky::new(cov.clone()) {
        Some(ch) => ch.l(),
        None => sqrtm_psd(&cov)?,
    };

    let mut samples = vec![0.0f64; n * k];
    let n_chunks = n.div_ceil(CHUNK);
    samples
        .par_chunks_mut(CHUNK * k)
        .enumerate()
        .for_each(|(chunk_idx, out)| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(chunk_idx as u64 + 1);
            let rows_here = out.len() / k;
            let mut z = DVector::<f64>::zeros(k);
            for r in 0..rows_here {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                let x = &factor * &z + &mean;
                out[r * k..(r + 1) * k].copy_from_slice(x.as_slice());
            }
        });
    debug_assert!(n_chunks * CHUNK >= n);

    Ok(SampleBatch {
        n,
        a_cols,
        b_cols,
        samples,
        seed,
        generator: GENERATOR_ID,
        config: *cfg,
        t,
        xi,
    })
}

/// Sample moments of a batch, inverted through the measurement conventions
/// into an estimated two-mode covariance restricted to the observed
/// entries. Unobserved entries are zero and flagged through `observed`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedMoments {
    pub d_hat: DVector<f64>,
    pub gamma_hat: DMatrix<f64>,
    pub observed: [[bool; 4]; 4],
    pub n: usize,
    pub degenerate: bool,
    pub config: ProtocolConfig<f64>,
}

fn quad_indices(kind: MeasurementKind, mode: usize) -> Vec<usize> {
    match kind {
        MeasurementKind::Heterodyne => vec![2 * mode, 2 * mode + 1],
        MeasurementKind::HomodyneQ => vec![2 * mode],
        MeasurementKind::HomodyneP => vec![2 * mode + 1],
    }
}

pub fn estimate_moments(batch: &SampleBatch) -> Result<EstimatedMoments, CoreError> {
    if batch.n < 2 {
        return Err(CoreError::TooFewSamples {
            needed: 2,
            got: batch.n,
        });
    }
    let k = batch.cols();
    let n = batch.n;
    let mut mean = vec![0.0f64; k];
    for i in 0..n {
        let row = batch.row(i);
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let row = batch.row(i);
        for a in 0..k {
            let da = row[a] - mean[a];
            for b in a..k {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..k {
        for b in a..k {
            cov[(a, b)] /= denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let degenerate = (0..k).all(|a| cov[(a, a)] == 0.0);

    // Map outcome columns onto state quadratures. Heterodyne outcome
    // variances carry one added vacuum unit per quadrature; homodyne maps
    // directly. The batch columns record outcome variances (covariance of
    // the record = gamma entries plus the heterodyne unit on diagonals).
    let alice_kind = batch.config.alice_kind();
    let bob_kind = batch.config.bob_kind();
    let mut col_quads: Vec<(usize, bool)> = Vec::new(); // (quad index, came from heterodyne)
    for q in quad_indices(alice_kind, 0) {
        col_quads.push((q, alice_kind == MeasurementKind::Heterodyne));
    }
    for q in quad_indices(bob_kind, 1) {
        col_quads.push((q, bob_kind == MeasurementKind::Heterodyne));
    }
    debug_assert_eq!(col_quads.len(), k);

    let mut d_hat = DVector::<f64>::zeros(4);
    let mut gamma_hat = DMatrix::<f64>::zeros(4, 4);
    let mut observed = [[false; 4]; 4];
    for (a, &(qa, het_a)) in col_quads.iter().enumerate() {
        d_hat[qa] = mean[a];
        for (b, &(qb, _)) in col_quads.iter().enumerate() {
            let mut v = cov[(a, b)];
            if a == b && het_a {
                v -= 1.0; // remove the added vacuum unit
            }
            gamma_hat[(qa, qb)] = v;
            observed[qa][qb] = true;
        }
    }

    Ok(EstimatedMoments {
        d_hat,
        gamma_hat,
        observed,
        n,
        degenerate,
        config: batch.config,
    })
}

impl EstimatedMoments {
    /// The estimate an infinite batch would produce: true moments filled in
    /// on exactly the entries the configured measurements observe.
    pub fn from_exact(
        cfg: &ProtocolConfig<f64>,
        t: f64,
        xi: f64,
    ) -> Result<EstimatedMoments, CoreError> {
        let state = post_channel_state(cfg, t, xi)?;
        let mut observed = [[false; 4]; 4];
        let mut gamma_hat = DMatrix::<f64>::zeros(4, 4);
        let mut d_hat = DVector::<f64>::zeros(4);
        let mut quads = quad_indices(cfg.alice_kind(), 0);
        quads.extend(quad_indices(cfg.bob_kind(), 1));
        for &qa in &quads {
            d_hat[qa] = state.displacement()[qa];
            for &qb in &quads {
                gamma_hat[(qa, qb)] = state.covariance()[(qa, qb)];
                observed[qa][qb] = true;
            }
        }
        Ok(EstimatedMoments {
            d_hat,
            gamma_hat,
            observed,
            n: usize::MAX,
            degenerate: false,
            config: *cfg,
        })
    }

    /// Fill unobserved entries by the protocol family's phase symmetry:
    /// the P-quadrature diagonal mirrors the Q one, the cross-mode PP entry
    /// mirrors the QQ entry with opposite sign, and Q-P cross terms stay
    /// zero. Returns the completed state (displacement included).
    pub fn completed_state(&self) -> Result<GaussianState<f64>, CoreError> {
        let mut g = self.gamma_hat.clone();
        let obs = &self.observed;
        for mode in 0..2 {
            let q = 2 * mode;
            let p = q + 1;
            if !obs[p][p] && obs[q][q] {
                g[(p, p)] = g[(q, q)];
            }
        }
        if !obs[1][3] && obs[0][2] {
            g[(1, 3)] = -g[(0, 2)];
            g[(3, 1)] = -g[(0, 2)];
        }
        // exact symmetrization of sampling round-off
        for i in 0..4 {
            for j in (i + 1)..4 {
                let v = 0.5 * (g[(i, j)] + g[(j, i)]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        GaussianState::new(self.d_hat.clone(), g)
    }
}

/// Run the key-rate pipeline on estimated moments. Mildly unphysical
/// estimates (sampling noise pushing a symplectic eigenvalue below 1) are
/// repaired by eigenvalue clipping through the normal form; anything the
/// projection cannot fix is an error.
pub fn keyrate_from_estimate(
    est: &EstimatedMoments,
    cfg: &ProtocolConfig<f64>,
    t: f64,
    xi: f64,
    opts: &RateOptions<f64>,
) -> Result<KeyRateReport<f64>, CoreError> {
    if est.degenerate {
        return Err(CoreError::UnrepairableEstimate {
            reason: "degenerate batch with zero variance".into(),
        });
    }
    let state = est.completed_state()?;
    let state = if validate_state(&state)?.is_ok() {
        state
    } else {
        let projected = project_physical(&state).map_err(|e| CoreError::UnrepairableEstimate {
            reason: format!("projection failed: {e}"),
        })?;
        if !validate_state(&projected)?.is_ok() {
            return Err(CoreError::UnrepairableEstimate {
                reason: "state remains unphysical after eigenvalue clipping".into(),
            });
        }
        projected
    };
    let mut report = report_from_state(cfg, &state, t, xi, opts)?;
    report.estimated = true;
    report.n_samples = (est.n != usize::MAX).then_some(est.n as u64);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::{compute_report, BobMeasurement, Prep, Recon};
    use approx::assert_relative_eq;

    fn cfg(prep: Prep, bob: BobMeasurement, recon: Recon, v: f64) -> ProtocolConfig<f64> {
        ProtocolConfig::new(prep, bob, recon, v).unwrap()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let b1 = simulate(&c0, 0.7, 0.01, 30_000, 99).unwrap();
        let b2 = simulate(&c0, 0.7, 0.01, 30_000, 99).unwrap();
        assert_eq!(b1.samples.len(), b2.samples.len());
        for (x, y) in b1.samples.iter().zip(&b2.samples) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let b3 = simulate(&c0, 0.7, 0.01, 30_000, 100).unwrap();
        assert_ne!(b1.samples, b3.samples);
    }

    #[test]
    fn unmodulated_protocol_gives_uncorrelated_unit_variance() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 1.0);
        let n = 40_000;
        let b = simulate(&c0, 1.0, 0.0, n, 7).unwrap();
        let est = estimate_moments(&b).unwrap();
        let tol = 5.0 / (n as f64).sqrt();
        // Alice heterodynes a vacuum mode: state covariance estimate ~ I
        assert!((est.gamma_hat[(0, 0)] - 1.0).abs() < 2.0 * tol);
        assert!((est.gamma_hat[(1, 1)] - 1.0).abs() < 2.0 * tol);
        assert!(est.gamma_hat[(0, 2)].abs() < 2.0 * tol);
    }

    #[test]
    fn correlations_match_theory() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let n = 1_000_000;
        let b = simulate(&c0, 1.0, 0.0, n, 12345).unwrap();
        let (mean, cov, a_cols, _) = joint_outcome_moments(&c0, &post_channel_state(&c0, 1.0, 0.0).unwrap());
        assert_eq!(a_cols, 2);
        // empirical correlation of alice_q and bob_q
        let k = b.cols();
        let (mut saa, mut sbb, mut sab, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let row = &b.samples[i * k..(i + 1) * k];
            let (a, y) = (row[0], row[2]);
            sa += a;
            sb += y;
            saa += a * a;
            sbb += y * y;
            sab += a * y;
        }
        let nf = n as f64;
        let (ma, mb) = (sa / nf, sb / nf);
        let corr = (sab / nf - ma * mb)
            / ((saa / nf - ma * ma).sqrt() * (sbb / nf - mb * mb).sqrt());
        let theory = cov[(0, 2)] / (cov[(0, 0)] * cov[(2, 2)]).sqrt();
        assert!(
            (corr - theory).abs() < 4.0 / nf.sqrt(),
            "corr {corr} vs theory {theory}"
        );
        assert_relative_eq!(mean.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_moments_reproduce_the_analytic_report() {
        for (prep, bob, recon) in [
            (Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr),
            (Prep::Coherent, BobMeasurement::Heterodyne, Recon::Dr),
            (Prep::Squeezed, BobMeasurement::Homodyne, Recon::Rr),
        ] {
            let c0 = cfg(prep, bob, recon, 2.0);
            let est = EstimatedMoments::from_exact(&c0, 0.7, 0.01).unwrap();
            let from_est = keyrate_from_estimate(&est, &c0, 0.7, 0.01, &RateOptions::default()).unwrap();
            let direct = compute_report(&c0, 0.7, 0.01, &RateOptions::default()).unwrap();
            assert_eq!(from_est.i_xy, direct.i_xy);
            assert_eq!(from_est.chi_xe, direct.chi_xe);
            assert_eq!(from_est.chi_xb, direct.chi_xb);
            assert_eq!(from_est.k_coll, direct.k_coll);
            assert!(from_est.estimated);
        }
    }

    #[test]
    fn estimated_rate_converges() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let truth = compute_report(&c0, 0.7, 0.01, &RateOptions::default()).unwrap();
        let b = simulate(&c0, 0.7, 0.01, 200_000, 4242).unwrap();
        let est = estimate_moments(&b).unwrap();
        let r = keyrate_from_estimate(&est, &c0, 0.7, 0.01, &RateOptions::default()).unwrap();
        assert!(
            (r.k_coll - truth.k_coll).abs() < 0.02,
            "estimated {} vs true {}",
            r.k_coll,
            truth.k_coll
        );
        assert_eq!(r.n_samples, Some(200_000));
    }

    #[test]
    fn degenerate_batch_is_flagged() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let mut b = simulate(&c0, 0.7, 0.0, 10, 1).unwrap();
        b.samples.iter_mut().for_each(|x| *x = 0.25);
        let est = estimate_moments(&b).unwrap();
        assert!(est.degenerate);
        assert!(matches!(
            keyrate_from_estimate(&est, &c0, 0.7, 0.0, &RateOptions::default()),
            Err(CoreError::UnrepairableEstimate { .. })
        ));
    }

    #[test]
    fn heterodyne_vacuum_estimates_identity() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Heterodyne, Recon::Rr, 1.0);
        let n = 200_000;
        let b = simulate(&c0, 1.0, 0.0, n, 77).unwrap();
        let est = estimate_moments(&b).unwrap();
        let tol = 8.0 / (n as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (est.gamma_hat[(i, j)] - want).abs() < tol * 2.0,
                    "entry ({i},{j}) = {}",
                    est.gamma_hat[(i, j)]
                );
            }
        }
    }

    #[test]
    fn slightly_unphysical_estimates_are_projected() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Heterodyne, Recon::Rr, 2.0);
        let mut est = EstimatedMoments::from_exact(&c0, 0.8, 0.0).unwrap();
        // push the estimate just below the physical boundary
        est.gamma_hat *= 1.0 - 1e-7;
        let r = keyrate_from_estimate(&est, &c0, 0.8, 0.0, &RateOptions::default()).unwrap();
        assert!(r.estimated);
        assert!(r.k_coll.is_finite());
    }

    #[test]
    fn too_small_batches_are_rejected() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let b = simulate(&c0, 0.7, 0.0, 1, 5).unwrap();
        assert!(matches!(
            estimate_moments(&b),
            Err(CoreError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn csv_export_has_one_row_per_sample() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let b = simulate(&c0, 0.7, 0.0, 25, 5).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 26);
        assert_eq!(lines[0], "alice_q,alice_p,bob_q");
    }
}
