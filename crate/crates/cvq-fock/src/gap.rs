//! Entropy-gap checks between a state and the Gaussian state sharing its
//! first and second moments.
//!
//! The gap `delta_h = H(gaussianified) - H(rho)` is nonnegative for every
//! physical state; for single-mode states the Gaussian density is also
//! constructed explicitly (thermal state conjugated by exponentiated
//! squeeze, rotation and displacement generators) so the gap can be checked
//! against the relative entropy it equals.

use nalgebra::{DMatrix, DVector};

use crate::density::{entropy_fock, kraus_loss_last_mode, moments, FockDensity};
use crate::error::FockError;
use crate::ops::{displacement_op, rotation_op, squeeze_op, C64};

/// Result of one extremality evaluation.
#[derive(Debug, Clone)]
pub struct ExtremalityReport {
    /// `H(gaussianified) - H(rho)` in bits.
    pub delta_h: f64,
    pub gaussian_entropy: f64,
    pub fock_entropy: f64,
    /// `H(rho || rho_tilde)` in bits, when the explicit Gaussian density
    /// was constructed (single-mode states).
    pub relative_entropy: Option<f64>,
    /// Distinct record of a failed Gaussian-density construction; the gap
    /// itself is still returned.
    pub relative_entropy_error: Option<String>,
    pub tail_mass: f64,
}

/// Entropy of the Gaussian state with the given covariance, tolerating the
/// slight sub-physicality that truncation introduces: symplectic
/// eigenvalues within `1e-6` of 1 clamp to 1, anything lower is an error.
pub fn gaussian_entropy_of_covariance(g: &DMatrix<f64>) -> Result<f64, FockError> {
    let n = g.nrows() / 2;
    let state = cvq_core::GaussianState::new(DVector::zeros(2 * n), g.clone())?;
    let nus = cvq_core::gaussian::symplectic_eigenvalues(&state)?;
    let mut h = 0.0;
    for nu in nus {
        if nu < 1.0 - 1e-6 {
            return Err(FockError::Core(cvq_core::CoreError::Unphysical { min_nu: nu }));
        }
        h += cvq_core::gaussian::entropy_g(nu.max(1.0))?;
    }
    Ok(h)
}

/// An explicitly constructed Gaussian density: the matrix itself plus the
/// conjugating unitary and the exact thermal spectrum, which together give
/// `log(rho_tilde)` without ever eigendecomposing the (badly scaled)
/// density matrix.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    pub matrix: DMatrix<C64>,
    unitary: DMatrix<C64>,
    /// Base-2 logs of the thermal weights; `None` marks an exactly pure
    /// Gaussianification (zero weight outside the ground state).
    log2_spectrum: Vec<Option<f64>>,
}

/// Explicit single-mode Gaussian density with moments `(d, g)`, built at
/// dimension `work_dim`: a truncated thermal state conjugated by the
/// exponentiated squeeze, rotation and displacement operators read off the
/// normal form of `g`.
pub fn gaussianify_single_mode(
    d: &DVector<f64>,
    g: &DMatrix<f64>,
    work_dim: usize,
) -> Result<GaussianDensity, FockError> {
    if g.nrows() != 2 {
        return Err(FockError::InvalidParameter {
            name: "gamma",
            reason: "explicit Gaussian construction is single-mode only".into(),
        });
    }
    let (nus, s) = cvq_core::gaussian::williamson(g).map_err(|e| FockError::Gaussianification {
        reason: format!("normal form failed: {e}"),
    })?;
    let nu = nus[0].max(1.0);

    // S = R(theta) * diag(e^-r, e^r) * R(phi); the thermal factor absorbs
    // the inner rotation.
    let svd = nalgebra::SVD::new(s.clone(), true, true);
    let mut u = svd.u.expect("2x2 svd");
    let mut vt = svd.v_t.expect("2x2 svd");
    if u.determinant() < 0.0 {
        // keep both factors as proper rotations
        u.column_mut(1).neg_mut();
        vt.row_mut(1).neg_mut();
    }
    let s1 = svd.singular_values[0];
    let r = -s1.ln();
    let theta = u[(0, 1)].atan2(u[(0, 0)]);

    // thermal spectrum for nu = 2 nbar + 1
    let nbar = (nu - 1.0) / 2.0;
    let mut tau = DMatrix::<C64>::zeros(work_dim, work_dim);
    let mut log2_spectrum: Vec<Option<f64>> = vec![None; work_dim];
    if nbar <= 1e-15 {
        tau[(0, 0)] = C64::new(1.0, 0.0);
        log2_spectrum[0] = Some(0.0);
    } else {
        let q = nbar / (nbar + 1.0);
        let weights: Vec<f64> = (0..work_dim).map(|n| q.powi(n as i32)).collect();
        let total: f64 = weights.iter().sum();
        let log2_total = total.log2();
        for n in 0..work_dim {
            tau[(n, n)] = C64::new(weights[n] / total, 0.0);
            log2_spectrum[n] = Some(n as f64 * q.log2() - log2_total);
        }
    }

    let alpha = C64::new(d[0], d[1]) / C64::new(std::f64::consts::SQRT_2, 0.0);
    let sq = squeeze_op(r, work_dim);
    let rot = rotation_op(theta, work_dim);
    let disp = displacement_op(alpha, work_dim);
    let unitary = disp * rot * sq;
    let rho_tilde = &unitary * tau * unitary.adjoint();

    // quality gate: the construction must reproduce the requested moments
    let probe = FockDensity::from_matrix(1, work_dim - 1, rho_tilde.clone());
    let (dm, gm) = moments(&probe);
    let dev = (dm - d)
        .iter()
        .chain((gm - g).iter())
        .fold(0.0f64, |a, &x| a.max(x.abs()));
    if dev > 1e-6 {
        return Err(FockError::Gaussianification {
            reason: format!(
                "construction at dimension {work_dim} reproduces moments only to {dev:.2e}"
            ),
        });
    }
    Ok(GaussianDensity {
        matrix: rho_tilde,
        unitary,
        log2_spectrum,
    })
}

/// `H(rho || rho_tilde)` in bits, with `rho` embedded into the (possibly
/// larger) space of `rho_tilde`. Uses the analytic log of the construction,
/// `U log(tau) U^+`, so the result does not suffer from eigensolver noise
/// on the density's vanishing spectrum.
pub fn relative_entropy_vs_gaussian(
    rho: &FockDensity,
    rho_tilde: &GaussianDensity,
) -> Result<f64, FockError> {
    let small = rho.total_dim();
    let work = rho_tilde.matrix.nrows();
    debug_assert!(work >= small);
    let term1 = -entropy_fock(rho);

    // weights of rho along the constructed eigenbasis
    let mut term2 = 0.0;
    for k in 0..work {
        let col = rho_tilde.unitary.column(k);
        let mut w = 0.0;
        for i in 0..small {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..small {
                acc += rho.matrix()[(i, j)] * col[j];
            }
            w += (col[i].conj() * acc).re;
        }
        if w <= 1e-14 {
            continue;
        }
        match rho_tilde.log2_spectrum[k] {
            Some(l) => term2 += w * l,
            None => {
                return Err(FockError::Gaussianification {
                    reason: "relative entropy diverges: the Gaussianification is pure \
                             while the state has weight outside its support"
                        .into(),
                })
            }
        }
    }
    Ok(term1 - term2)
}

/// Options for [`extremality_gap`].
#[derive(Debug, Clone, Copy)]
pub struct GapOptions {
    /// Construct the explicit Gaussian density and report the relative
    /// entropy (single-mode states only; the two-mode construction is not
    /// provided and is reported as a distinct error when requested).
    pub with_relative_entropy: bool,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            with_relative_entropy: true,
        }
    }
}

/// The entropy gap of a state against its Gaussianification.
pub fn extremality_gap(rho: &FockDensity, opts: &GapOptions) -> Result<ExtremalityReport, FockError> {
    let (d, g) = moments(rho);
    let gaussian_entropy = gaussian_entropy_of_covariance(&g)?;
    let fock_entropy = entropy_fock(rho);
    let delta_h = gaussian_entropy - fock_entropy;

    let mut relative_entropy = None;
    let mut relative_entropy_error = None;
    if opts.with_relative_entropy {
        if rho.modes() == 1 {
            match build_gaussian_density_adaptive(&d, &g, rho.dim())
                .and_then(|tilde| relative_entropy_vs_gaussian(rho, &tilde))
            {
                Ok(rel) => relative_entropy = Some(rel),
                Err(e) => relative_entropy_error = Some(e.to_string()),
            }
        } else {
            relative_entropy_error =
                Some("explicit two-mode Gaussian density construction is not provided".into());
        }
    }

    Ok(ExtremalityReport {
        delta_h,
        gaussian_entropy,
        fock_entropy,
        relative_entropy,
        relative_entropy_error,
        tail_mass: rho.tail_mass(),
    })
}

fn build_gaussian_density_adaptive(
    d: &DVector<f64>,
    g: &DMatrix<f64>,
    base_dim: usize,
) -> Result<GaussianDensity, FockError> {
    // enough headroom for the squeeze to act before truncation bites
    let stretch = {
        let eigs = g.symmetric_eigenvalues();
        eigs.iter().fold(1.0f64, |a, &x| a.max(x))
    };
    let mut work = ((base_dim as f64) * stretch.sqrt()).ceil() as usize + 24;
    let mut last_err = None;
    for _ in 0..3 {
        match gaussianify_single_mode(d, g, work) {
            Ok(t) => return Ok(t),
            Err(e) => {
                last_err = Some(e);
                work = work * 3 / 2;
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// The gap before and after a photon-loss channel of transmittance `t`
/// applied to a single-mode state; only the two gap values are compared.
pub fn contraction_check(rho: &FockDensity, t: f64) -> Result<(f64, f64), FockError> {
    if rho.modes() != 1 {
        return Err(FockError::InvalidParameter {
            name: "rho",
            reason: "contraction check is single-mode".into(),
        });
    }
    let opts = GapOptions {
        with_relative_entropy: false,
    };
    let before = extremality_gap(rho, &opts)?.delta_h;
    let lossy = kraus_loss_last_mode(rho, t);
    let after = extremality_gap(&lossy, &opts)?.delta_h;
    Ok((before, after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::realize;
    use crate::spec::parse_state_spec;
    use approx::assert_relative_eq;

    fn rho(text: &str, cutoff: usize) -> FockDensity {
        realize(&parse_state_spec(text).unwrap(), cutoff).unwrap()
    }

    #[test]
    fn gaussian_input_has_zero_gap() {
        let r = extremality_gap(&rho("thermal:1.0", 40), &GapOptions::default()).unwrap();
        assert!(r.delta_h.abs() < 1e-6, "delta_h = {}", r.delta_h);
        let rel = r.relative_entropy.expect("single-mode construction");
        assert!(rel.abs() < 1e-4, "relative entropy = {rel}");
    }

    #[test]
    fn fock_one_gap_is_two_bits() {
        let r = extremality_gap(&rho("fock:1", 24), &GapOptions::default()).unwrap();
        assert_relative_eq!(r.delta_h, 2.0, epsilon = 1e-6);
        assert_relative_eq!(r.gaussian_entropy, 2.0, epsilon = 1e-6);
        assert_relative_eq!(r.fock_entropy, 0.0, epsilon = 1e-9);
        let rel = r.relative_entropy.expect("single-mode construction");
        assert!((r.delta_h - rel).abs() <= 1e-4, "gap {} vs relent {rel}", r.delta_h);
    }

    #[test]
    fn dual_path_identity_on_mixed_states() {
        for (text, cutoff) in [
            ("mix(0.5*fock:0, 0.5*fock:1)", 24),
            ("mix(0.3*coherent:0.7,0.2, 0.7*thermal:0.4)", 32),
            ("photonsub(thermal:0.8)", 40),
            ("loss(0.6, squeezed:0.5)", 40),
            ("mix(0.5*squeezed:0.4, 0.5*squeezed:-0.4)", 40),
        ] {
            let state = rho(text, cutoff);
            let r = extremality_gap(&state, &GapOptions::default()).unwrap();
            assert!(r.delta_h >= -1e-6, "{text}: gap {}", r.delta_h);
            let rel = r
                .relative_entropy
                .unwrap_or_else(|| panic!("{text}: {:?}", r.relative_entropy_error));
            assert!(
                (r.delta_h - rel).abs() <= 1e-4,
                "{text}: gap {} vs relative entropy {rel}",
                r.delta_h
            );
        }
    }

    #[test]
    fn two_mode_gap_works_without_relative_entropy() {
        let r = extremality_gap(&rho("dephase(0.3, tmsv:1.5)", 20), &GapOptions::default()).unwrap();
        assert!(r.delta_h >= -1e-6);
        assert!(r.relative_entropy.is_none());
        assert!(r.relative_entropy_error.is_some());
    }

    #[test]
    fn contraction_under_loss() {
        // the identity channel leaves the gap unchanged
        let s = rho("mix(0.5*fock:0, 0.5*fock:2)", 24);
        let (before, after) = contraction_check(&s, 1.0).unwrap();
        assert_relative_eq!(before, after, epsilon = 1e-6);

        // genuine loss strictly shrinks the gap of a photon-number state
        let one = rho("fock:1", 24);
        let (b1, a1) = contraction_check(&one, 0.5).unwrap();
        assert!(a1 < b1, "gap must contract: before {b1}, after {a1}");
        assert!(a1 <= b1 + 1e-4);
    }
}
