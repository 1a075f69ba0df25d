//! Collective-attack secret-key-rate bounds for the Gaussian-modulated
//! protocol family, computed in the entanglement-based picture.
//!
//! Eve is always granted the full purification of the Alice-Bob state, so
//! her Holevo information is `H(AB) - H(AB|X)` with `X` the reconciliation
//! reference (Alice's variable for direct reconciliation, Bob's for
//! reverse). Conditional covariances are outcome independent, so no
//! averaging integral is needed anywhere.

use serde::{Deserialize, Serialize};

use crate::channel::{apply, loss_noise};
use crate::error::CoreError;
use crate::gaussian::{make_tmsv, reduce, von_neumann_entropy, GaussianState};
use crate::measurement::{condition, outcome_marginal, MeasurementKind};
use crate::scalar::{c, log2, Real};

/// State preparation flavour; fixes Alice's equivalent measurement in the
/// entanglement-based scheme (heterodyne for coherent states, homodyne for
/// squeezed states).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prep {
    Coherent,
    Squeezed,
}

/// Bob's detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BobMeasurement {
    Homodyne,
    Heterodyne,
}

/// Direction of the one-way reconciliation flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recon {
    Dr,
    Rr,
}

/// One member of the protocol family. `v` is the EPR variance of the
/// underlying two-mode squeezed state (modulation variance `v - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig<T: Real = f64> {
    pub prep: Prep,
    pub bob: BobMeasurement,
    pub recon: Recon,
    pub v: T,
}

impl<T: Real> ProtocolConfig<T> {
    pub fn new(prep: Prep, bob: BobMeasurement, recon: Recon, v: T) -> Result<Self, CoreError> {
        if v < T::one() {
            return Err(CoreError::InvalidParameter {
                name: "V",
                reason: format!("EPR variance must be >= 1, got {v}"),
            });
        }
        Ok(Self { prep, bob, recon, v })
    }

    /// Alice's measurement in the entanglement-based picture. For squeezed
    /// preparation the random Q/P basis choice is symmetric for the states
    /// considered; rates are computed in the Q branch.
    pub fn alice_kind(&self) -> MeasurementKind {
        match self.prep {
            Prep::Coherent => MeasurementKind::Heterodyne,
            Prep::Squeezed => MeasurementKind::HomodyneQ,
        }
    }

    pub fn bob_kind(&self) -> MeasurementKind {
        match self.bob {
            BobMeasurement::Homodyne => MeasurementKind::HomodyneQ,
            BobMeasurement::Heterodyne => MeasurementKind::Heterodyne,
        }
    }

    /// Fraction of rounds surviving basis sifting: one for coherent
    /// preparation, one half for squeezed preparation.
    pub fn sift_factor(&self) -> T {
        match self.prep {
            Prep::Coherent => T::one(),
            Prep::Squeezed => c(0.5),
        }
    }
}

/// Knobs that extend the plain bounds: an information-reconciliation
/// efficiency `beta` multiplying `I(X:Y)` in `K`, and whether the sifting
/// factor is applied to the reported rates (off by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions<T: Real = f64> {
    pub beta: T,
    pub apply_sift: bool,
}

impl<T: Real> Default for RateOptions<T> {
    fn default() -> Self {
        Self {
            beta: T::one(),
            apply_sift: false,
        }
    }
}

/// The computed bounds, in bits per channel use.
///
/// `k_coll = beta * i_xy - chi_xe` and `k_coll_prime = chi_xb - chi_xe`
/// hold exactly by construction. Both are lower bounds on the extractable
/// key, not achieved rates; `k_coll_prime` assumes collective measurements
/// by Bob and is reported as a bound only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: serde::Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct KeyRateReport<T: Real = f64> {
    pub prep: Prep,
    pub bob: BobMeasurement,
    pub recon: Recon,
    pub v: T,
    pub t: T,
    pub xi: T,
    pub i_xy: T,
    pub chi_xe: T,
    pub chi_xb: T,
    pub k_coll: T,
    pub k_coll_prime: T,
    pub beta: T,
    pub sift_factor: T,
    pub estimated: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_samples: Option<u64>,
    /// The post-channel joint covariance the rates were computed from.
    #[serde(with = "crate::measurement::matrix_rows")]
    pub gamma_ab: nalgebra::DMatrix<T>,
}

/// The two-mode Alice-Bob state after sending the second half of the
/// entangled resource through the loss/excess-noise channel.
pub fn post_channel_state<T: Real>(
    cfg: &ProtocolConfig<T>,
    t: T,
    xi: T,
) -> Result<GaussianState<T>, CoreError> {
    let resource = make_tmsv(cfg.v)?;
    apply(&loss_noise(t, xi)?, &resource, 1)
}

/// Mutual information between the measurement records, from the determinant
/// ratio of Bob's marginal and conditional outcome covariances (computed by
/// conditioning Bob on Alice; the quantity is symmetric).
pub fn mutual_information_from_state<T: Real>(
    state: &GaussianState<T>,
    cfg: &ProtocolConfig<T>,
) -> Result<T, CoreError> {
    let (_, marginal) = outcome_marginal(state, 1, cfg.bob_kind())?;
    let conditional = condition(state, 0, cfg.alice_kind())?.conditional_state;
    let (_, cond_out) = outcome_marginal(&conditional, 0, cfg.bob_kind())?;
    let ratio = marginal.determinant() / cond_out.determinant();
    Ok(log2(ratio) * c::<T>(0.5))
}

/// Holevo information between a conditioning measurement on `measured_mode`
/// and the purifying environment: `H(AB) - H(AB|X)`, with the conditional
/// entropy read off the remaining mode (rank-one measurements leave the
/// measured mode in a pure state).
pub fn holevo_environment_from_state<T: Real>(
    state: &GaussianState<T>,
    measured_mode: usize,
    kind: MeasurementKind,
) -> Result<T, CoreError> {
    let h_ab = von_neumann_entropy(state)?;
    let conditional = condition(state, measured_mode, kind)?.conditional_state;
    let h_cond = von_neumann_entropy(&conditional)?;
    Ok(h_ab - h_cond)
}

/// Holevo information between Alice's variable and Bob's quantum mode:
/// `H(B) - H(B|X)`.
pub fn holevo_bob_from_state<T: Real>(
    state: &GaussianState<T>,
    cfg: &ProtocolConfig<T>,
) -> Result<T, CoreError> {
    let h_b = von_neumann_entropy(&reduce(state, &[1])?)?;
    let conditional = condition(state, 0, cfg.alice_kind())?.conditional_state;
    Ok(h_b - von_neumann_entropy(&conditional)?)
}

/// `chi(X:E)` for the protocol's reconciliation reference.
pub fn holevo_xe<T: Real>(cfg: &ProtocolConfig<T>, t: T, xi: T) -> Result<T, CoreError> {
    let state = post_channel_state(cfg, t, xi)?;
    holevo_xe_from_state(&state, cfg)
}

pub fn holevo_xe_from_state<T: Real>(
    state: &GaussianState<T>,
    cfg: &ProtocolConfig<T>,
) -> Result<T, CoreError> {
    match cfg.recon {
        Recon::Dr => holevo_environment_from_state(state, 0, cfg.alice_kind()),
        Recon::Rr => holevo_environment_from_state(state, 1, cfg.bob_kind()),
    }
}

/// `chi(X:B)` for the protocol.
pub fn holevo_xb<T: Real>(cfg: &ProtocolConfig<T>, t: T, xi: T) -> Result<T, CoreError> {
    let state = post_channel_state(cfg, t, xi)?;
    holevo_bob_from_state(&state, cfg)
}

/// `I(X:Y)` for the protocol.
pub fn mutual_information_xy<T: Real>(cfg: &ProtocolConfig<T>, t: T, xi: T) -> Result<T, CoreError> {
    let state = post_channel_state(cfg, t, xi)?;
    mutual_information_from_state(&state, cfg)
}

/// Assemble the full report from an explicit two-mode state (mode 0 Alice,
/// mode 1 Bob). This is the single code path shared by the analytic route
/// and the estimated-moments route.
pub fn report_from_state<T: Real>(
    cfg: &ProtocolConfig<T>,
    state: &GaussianState<T>,
    t: T,
    xi: T,
    opts: &RateOptions<T>,
) -> Result<KeyRateReport<T>, CoreError> {
    if state.n_modes() != 2 {
        return Err(CoreError::TooFewModes {
            needed: 2,
            got: state.n_modes(),
        });
    }
    let sift = if opts.apply_sift {
        cfg.sift_factor()
    } else {
        T::one()
    };
    let i_xy = mutual_information_from_state(state, cfg)? * sift;
    let chi_xe = holevo_xe_from_state(state, cfg)? * sift;
    let chi_xb = holevo_bob_from_state(state, cfg)? * sift;
    let k_coll = opts.beta * i_xy - chi_xe;
    let k_coll_prime = chi_xb - chi_xe;
    debug_assert!(i_xy <= chi_xb + c(1e-9), "accessible information exceeds the Holevo bound");
    Ok(KeyRateReport {
        prep: cfg.prep,
        bob: cfg.bob,
        recon: cfg.recon,
        v: cfg.v,
        t,
        xi,
        i_xy,
        chi_xe,
        chi_xb,
        k_coll,
        k_coll_prime,
        beta: opts.beta,
        sift_factor: sift,
        estimated: false,
        n_samples: None,
        gamma_ab: state.covariance().clone(),
    })
}

/// The full report for protocol parameters `(T, xi)`.
pub fn compute_report<T: Real>(
    cfg: &ProtocolConfig<T>,
    t: T,
    xi: T,
    opts: &RateOptions<T>,
) -> Result<KeyRateReport<T>, CoreError> {
    let state = post_channel_state(cfg, t, xi)?;
    report_from_state(cfg, &state, t, xi, opts)
}

/// Locate a sign change of `k_coll` in `T` by bisection to the given
/// absolute tolerance; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect_k_zero<T: Real>(
    cfg: &ProtocolConfig<T>,
    xi: T,
    mut lo: T,
    mut hi: T,
    tol: T,
    opts: &RateOptions<T>,
) -> Result<T, CoreError> {
    let k = |t: T| compute_report(cfg, t, xi, opts).map(|r| r.k_coll);
    let mut klo = k(lo)?;
    let khi = k(hi)?;
    if (klo > T::zero()) == (khi > T::zero()) {
        return Err(CoreError::InvalidParameter {
            name: "bracket",
            reason: "k_coll has the same sign at both bracket ends".into(),
        });
    }
    while hi - lo > tol {
        let mid = (lo + hi) * c::<T>(0.5);
        let km = k(mid)?;
        if (km > T::zero()) == (klo > T::zero()) {
            lo = mid;
            klo = km;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * c::<T>(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn cfg(prep: Prep, bob: BobMeasurement, recon: Recon, v: f64) -> ProtocolConfig<f64> {
        ProtocolConfig::new(prep, bob, recon, v).unwrap()
    }

    #[test]
    fn post_channel_examples() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let s = post_channel_state(&c0, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            s.covariance(),
            make_tmsv(2.0f64).unwrap().covariance(),
            epsilon = 1e-15
        );

        let s = post_channel_state(&c0, 0.5, 0.0).unwrap();
        assert_relative_eq!(s.covariance()[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.covariance()[(2, 2)], 1.5, epsilon = 1e-12);
        assert_relative_eq!(s.covariance()[(0, 2)], 1.5f64.sqrt(), epsilon = 1e-12);
        assert!(crate::gaussian::validate_state(&s).unwrap().is_ok());
    }

    #[test]
    fn mutual_information_examples() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr, 2.0);
        let i = mutual_information_xy(&c0, 1.0, 0.0).unwrap();
        assert_relative_eq!(i, 0.5, epsilon = 1e-10);

        let c1 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr, 1.0);
        assert_relative_eq!(mutual_information_xy(&c1, 0.8, 0.0).unwrap(), 0.0, epsilon = 1e-10);

        // monotone in T at zero excess noise
        let mut prev = -1.0;
        for k in 1..=19 {
            let t = k as f64 * 0.05;
            let i = mutual_information_xy(&c0, t, 0.0).unwrap();
            assert!(i >= prev - 1e-12);
            prev = i;
        }
    }

    #[test]
    fn holevo_xe_limits() {
        for (prep, bob, recon) in [
            (Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr),
            (Prep::Coherent, BobMeasurement::Heterodyne, Recon::Rr),
            (Prep::Squeezed, BobMeasurement::Homodyne, Recon::Rr),
        ] {
            let c0 = cfg(prep, bob, recon, 2.0);
            let chi = holevo_xe(&c0, 1.0, 0.0).unwrap();
            assert!(chi.abs() < 1e-10, "pure transmission leaks nothing, chi={chi}");
        }

        // nondecreasing in excess noise at fixed T
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let mut prev = -1.0;
        for k in 0..=10 {
            let xi = k as f64 * 0.02;
            let chi = holevo_xe(&c0, 0.6, xi).unwrap();
            assert!(chi >= prev - 1e-10);
            prev = chi;
        }
    }

    #[test]
    fn holevo_xb_examples() {
        let c1 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr, 1.0);
        assert_relative_eq!(holevo_xb(&c1, 0.7, 0.0).unwrap(), 0.0, epsilon = 1e-9);

        // lossless coherent protocol: chi(X:B) = g(2) with conditional purity
        let c2 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr, 2.0);
        let chi = holevo_xb(&c2, 1.0, 0.0).unwrap();
        let g2 = 1.5 * 1.5f64.log2() - 0.5 * 0.5f64.log2();
        assert_relative_eq!(chi, g2, epsilon = 1e-10);
        assert_relative_eq!(g2, 1.3774437510817343, epsilon = 1e-12);

        // Holevo dominance on a small grid
        for t in [0.3, 0.6, 0.9] {
            for xi in [0.0, 0.05] {
                for v in [1.5, 2.0, 4.0] {
                    let c3 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr, v);
                    let i = mutual_information_xy(&c3, t, xi).unwrap();
                    let chi = holevo_xb(&c3, t, xi).unwrap();
                    assert!(i <= chi + 1e-9, "I={i} chi_xb={chi}");
                }
            }
        }
    }

    #[test]
    fn report_identities_are_exact() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let r = compute_report(&c0, 0.55, 0.02, &RateOptions::default()).unwrap();
        assert_eq!(r.k_coll, r.i_xy - r.chi_xe);
        assert_eq!(r.k_coll_prime, r.chi_xb - r.chi_xe);
        assert!(r.chi_xe >= 0.0 && r.chi_xb >= 0.0 && r.i_xy >= 0.0);
    }

    #[test]
    fn lossless_channel_keeps_everything() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Heterodyne, Recon::Dr, 3.0);
        let r = compute_report(&c0, 1.0, 0.0, &RateOptions::default()).unwrap();
        assert!(r.chi_xe.abs() < 1e-10);
        assert!((r.k_coll - r.i_xy).abs() < 1e-10);
    }

    #[test]
    fn no_modulation_means_no_rate() {
        for bob in [BobMeasurement::Homodyne, BobMeasurement::Heterodyne] {
            let c0 = cfg(Prep::Coherent, bob, Recon::Rr, 1.0);
            let r = compute_report(&c0, 0.6, 0.0, &RateOptions::default()).unwrap();
            assert!(r.i_xy.abs() < 1e-9);
            assert!(r.chi_xe.abs() < 1e-9);
            assert!(r.chi_xb.abs() < 1e-9);
        }
    }

    #[test]
    fn reverse_reconciliation_is_lossy_tolerant() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        for k in 1..=19 {
            let t = k as f64 * 0.05;
            let r = compute_report(&c0, t, 0.0, &RateOptions::default()).unwrap();
            assert!(r.k_coll > 0.0, "RR rate must stay positive at T={t}");
        }
    }

    #[test]
    fn direct_reconciliation_crosses_zero() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Dr, 2.0);
        let t_star = bisect_k_zero(&c0, 0.0, 0.05, 0.999, 1e-4, &RateOptions::default()).unwrap();
        assert!((0.5..1.0).contains(&t_star), "T* = {t_star}");
        // the rate is positive above the crossing, negative below
        let above = compute_report(&c0, t_star + 0.01, 0.0, &RateOptions::default()).unwrap();
        let below = compute_report(&c0, t_star - 0.01, 0.0, &RateOptions::default()).unwrap();
        assert!(above.k_coll > 0.0 && below.k_coll < 0.0);
    }

    #[test]
    fn degradation_in_excess_noise() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        for t in [0.25, 0.5, 0.75] {
            let mut prev = f64::INFINITY;
            for k in 0..=6 {
                let xi = k as f64 * 0.01;
                let r = compute_report(&c0, t, xi, &RateOptions::default()).unwrap();
                assert!(r.k_coll <= prev + 1e-10);
                prev = r.k_coll;
            }
        }
    }

    #[test]
    fn displacement_leaves_reports_unchanged() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(41);
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 1.8);
        let base = post_channel_state(&c0, 0.6, 0.01).unwrap();
        let r0 = report_from_state(&c0, &base, 0.6, 0.01, &RateOptions::default()).unwrap();
        for _ in 0..10 {
            let d = DVector::from_fn(4, |_, _| rng.random::<f64>() * 6.0 - 3.0);
            let displaced = base.clone().with_displacement(d).unwrap();
            let r = report_from_state(&c0, &displaced, 0.6, 0.01, &RateOptions::default()).unwrap();
            assert_eq!(r.i_xy, r0.i_xy);
            assert_eq!(r.chi_xe, r0.chi_xe);
            assert_eq!(r.chi_xb, r0.chi_xb);
        }
    }

    #[test]
    fn squeezed_prep_and_sifting() {
        let c0 = cfg(Prep::Squeezed, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let plain = compute_report(&c0, 0.7, 0.0, &RateOptions::default()).unwrap();
        assert_eq!(plain.sift_factor, 1.0);
        let sifted = compute_report(
            &c0,
            0.7,
            0.0,
            &RateOptions {
                beta: 1.0,
                apply_sift: true,
            },
        )
        .unwrap();
        assert_eq!(sifted.sift_factor, 0.5);
        assert_relative_eq!(sifted.i_xy, 0.5 * plain.i_xy, epsilon = 1e-12);
        assert_relative_eq!(sifted.k_coll, 0.5 * plain.k_coll, epsilon = 1e-12);
    }

    #[test]
    fn beta_scales_only_the_mutual_information_term() {
        let c0 = cfg(Prep::Coherent, BobMeasurement::Homodyne, Recon::Rr, 2.0);
        let opts = RateOptions {
            beta: 0.95,
            apply_sift: false,
        };
        let r = compute_report(&c0, 0.6, 0.01, &opts).unwrap();
        assert_eq!(r.k_coll, 0.95 * r.i_xy - r.chi_xe);
        assert_eq!(r.k_coll_prime, r.chi_xb - r.chi_xe);
    }
}
