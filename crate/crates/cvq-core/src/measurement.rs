//! Gaussian conditioning: homodyne and heterodyne measurements on one mode,
//! yielding the conditional state of the remaining modes and the classical
//! outcome statistics.
//!
//! The conditional covariance never depends on the outcome value; the
//! conditional displacement is affine in the outcome and is returned as a
//! gain matrix plus offset. Heterodyne outcomes are reported in units where
//! their covariance equals `gamma + I` (signal plus one vacuum unit), so the
//! conditioning matrix doubles as the outcome precision matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::gaussian::{ensure_valid, GaussianState, TOL_PINV};
use crate::scalar::{c, Real};

/// The three supported single-mode measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    HomodyneQ,
    HomodyneP,
    Heterodyne,
}

impl MeasurementKind {
    /// Number of real outcome components.
    pub fn arity(self) -> usize {
        match self {
            MeasurementKind::HomodyneQ | MeasurementKind::HomodyneP => 1,
            MeasurementKind::Heterodyne => 2,
        }
    }
}

/// Result of conditioning on one measured mode.
///
/// The conditional displacement for outcome `x` is
/// `offset + gain * x`; the stored `conditional_state` carries the
/// displacement at the mean outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: serde::Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct ConditionalResult<T: Real = f64> {
    pub conditional_state: GaussianState<T>,
    #[serde(with = "crate::measurement::matrix_rows")]
    pub gain: DMatrix<T>,
    #[serde(with = "crate::measurement::vector_row")]
    pub offset: DVector<T>,
    #[serde(with = "crate::measurement::vector_row")]
    pub outcome_mean: DVector<T>,
    #[serde(with = "crate::measurement::matrix_rows")]
    pub outcome_cov: DMatrix<T>,
}

impl<T: Real> ConditionalResult<T> {
    /// Conditional displacement of the remaining modes given an outcome.
    pub fn displacement_for(&self, outcome: &DVector<T>) -> DVector<T> {
        &self.offset + &self.gain * outcome
    }
}

fn partition<T: Real>(
    s: &GaussianState<T>,
    mode: usize,
) -> (Vec<usize>, [usize; 2], DMatrix<T>, DMatrix<T>, DMatrix<T>, DVector<T>, DVector<T>) {
    let dim = 2 * s.n_modes();
    let meas = [2 * mode, 2 * mode + 1];
    let rest: Vec<usize> = (0..dim).filter(|q| *q != meas[0] && *q != meas[1]).collect();
    let g = s.covariance();
    let ga = DMatrix::from_fn(rest.len(), rest.len(), |i, j| g[(rest[i], rest[j])]);
    let cx = DMatrix::from_fn(rest.len(), 2, |i, j| g[(rest[i], meas[j])]);
    let gb = DMatrix::from_fn(2, 2, |i, j| g[(meas[i], meas[j])]);
    let da = DVector::from_fn(rest.len(), |i, _| s.displacement()[rest[i]]);
    let db = DVector::from_fn(2, |i, _| s.displacement()[meas[i]]);
    (rest, meas, ga, cx, gb, da, db)
}

/// Condition the state on measuring `mode` with the given kind.
///
/// Homodyne uses the rank-aware Schur complement
/// `gamma_A - C P (P gamma_B P)^+ P C^T` with `P` the projector onto the
/// measured quadrature; heterodyne uses `gamma_A - C (gamma_B + I)^{-1} C^T`.
pub fn condition<T: Real>(
    s: &GaussianState<T>,
    mode: usize,
    kind: MeasurementKind,
) -> Result<ConditionalResult<T>, CoreError> {
    ensure_valid(s)?;
    if mode >= s.n_modes() {
        return Err(CoreError::ModeOutOfRange {
            index: mode,
            n_modes: s.n_modes(),
        });
    }
    if s.n_modes() < 2 {
        return Err(CoreError::TooFewModes {
            needed: 2,
            got: s.n_modes(),
        });
    }
    let (_rest, _meas, ga, cx, gb, da, db) = partition(s, mode);
    let r = ga.nrows();

    let (gain, cond_cov, outcome_mean, outcome_cov) = match kind {
        MeasurementKind::HomodyneQ | MeasurementKind::HomodyneP => {
            let q = if kind == MeasurementKind::HomodyneQ { 0 } else { 1 };
            let var = gb[(q, q)];
            let floor = c::<T>(TOL_PINV) * gb[(0, 0)].max(gb[(1, 1)]).max(T::one());
            let col = cx.column(q).clone_owned();
            let gain = if var > floor {
                DMatrix::from_fn(r, 1, |i, _| col[i] / var)
            } else {
                // measured quadrature is deterministic: nothing to update
                DMatrix::zeros(r, 1)
            };
            let cond = &ga - &gain * col.transpose();
            let mean = DVector::from_element(1, db[q]);
            let ocov = DMatrix::from_element(1, 1, var);
            (gain, cond, mean, ocov)
        }
        MeasurementKind::Heterodyne => {
            let w = &gb + DMatrix::identity(2, 2);
            let winv = w
                .clone()
                .try_inverse()
                .expect("gamma_B + I is positive definite for valid states");
            let gain = &cx * &winv;
            let cond = &ga - &gain * cx.transpose();
            (gain, cond, db.clone(), w)
        }
    };

    // numerical symmetrization of the Schur complement
    let half = c::<T>(0.5);
    let cond_cov = DMatrix::from_fn(r, r, |i, j| (cond_cov[(i, j)] + cond_cov[(j, i)]) * half);

    let offset = &da - &gain * &outcome_mean;
    let conditional_state = GaussianState::new(da, cond_cov)?;
    Ok(ConditionalResult {
        conditional_state,
        gain,
        offset,
        outcome_mean,
        outcome_cov,
    })
}

/// Classical outcome distribution of measuring `mode`, without conditioning.
///
/// Homodyne: scalar Gaussian with variance the matching diagonal entry of
/// the mode's covariance block. Heterodyne: bivariate Gaussian with
/// covariance `gamma_B + I`.
pub fn outcome_marginal<T: Real>(
    s: &GaussianState<T>,
    mode: usize,
    kind: MeasurementKind,
) -> Result<(DVector<T>, DMatrix<T>), CoreError> {
    ensure_valid(s)?;
    if mode >= s.n_modes() {
        return Err(CoreError::ModeOutOfRange {
            index: mode,
            n_modes: s.n_modes(),
        });
    }
    let g = s.covariance();
    let d = s.displacement();
    let (q, p) = (2 * mode, 2 * mode + 1);
    Ok(match kind {
        MeasurementKind::HomodyneQ => (
            DVector::from_element(1, d[q]),
            DMatrix::from_element(1, 1, g[(q, q)]),
        ),
        MeasurementKind::HomodyneP => (
            DVector::from_element(1, d[p]),
            DMatrix::from_element(1, 1, g[(p, p)]),
        ),
        MeasurementKind::Heterodyne => {
            let mean = DVector::from_vec(vec![d[q], d[p]]);
            let mut cov = DMatrix::from_fn(2, 2, |i, j| g[(q + i, q + j)]);
            cov[(0, 0)] += T::one();
            cov[(1, 1)] += T::one();
            (mean, cov)
        }
    })
}

// serde helpers for nalgebra values as plain nested lists
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T, S>(m: &DMatrix<T>, ser: S) -> Result<S::Ok, S::Error>
    where
        T: Copy + Serialize,
        S: Serializer,
    {
        let rows: Vec<Vec<T>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, T, D>(de: D) -> Result<DMatrix<T>, D::Error>
    where
        T: Copy + Deserialize<'de> + nalgebra::Scalar,
        D: Deserializer<'de>,
    {
        let rows: Vec<Vec<T>> = Vec::deserialize(de)?;
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
    }
}

pub(crate) mod vector_row {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T, S>(v: &DVector<T>, ser: S) -> Result<S::Ok, S::Error>
    where
        T: Copy + Serialize,
        S: Serializer,
    {
        let row: Vec<T> = v.iter().copied().collect();
        row.serialize(ser)
    }

    pub fn deserialize<'de, T, D>(de: D) -> Result<DVector<T>, D::Error>
    where
        T: Copy + Deserialize<'de> + nalgebra::Scalar,
        D: Deserializer<'de>,
    {
        Ok(DVector::from_vec(Vec::<T>::deserialize(de)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{
        make_tmsv, random_state, reduce, symplectic_eigenvalues, validate_state,
        von_neumann_entropy,
    };
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;

    #[test]
    fn product_state_has_no_update() {
        let v = GaussianState::<f64>::vacuum(2);
        for kind in [
            MeasurementKind::HomodyneQ,
            MeasurementKind::HomodyneP,
            MeasurementKind::Heterodyne,
        ] {
            let r = condition(&v, 1, kind).unwrap();
            assert_relative_eq!(
                r.conditional_state.covariance(),
                &DMatrix::identity(2, 2),
                epsilon = 1e-12
            );
            assert_relative_eq!(r.gain.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tmsv_homodyne_schur_complement() {
        for v in [1.2, 1.5, 2.0, 5.0] {
            let s = make_tmsv(v).unwrap();
            let r = condition(&s, 1, MeasurementKind::HomodyneQ).unwrap();
            let expected = dmatrix![1.0 / v, 0.0; 0.0, v];
            assert_relative_eq!(r.conditional_state.covariance(), &expected, epsilon = 1e-10);
            assert_relative_eq!(r.outcome_cov[(0, 0)], v, epsilon = 1e-12);
        }
    }

    #[test]
    fn tmsv_heterodyne_prepares_coherent() {
        for v in [1.0, 1.5, 2.0, 10.0] {
            let s = make_tmsv(v).unwrap();
            let r = condition(&s, 1, MeasurementKind::Heterodyne).unwrap();
            assert_relative_eq!(
                r.conditional_state.covariance(),
                &DMatrix::identity(2, 2),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn marginal_examples() {
        let v = GaussianState::<f64>::vacuum(1);
        let (_, cov) = outcome_marginal(&v, 0, MeasurementKind::HomodyneQ).unwrap();
        assert_relative_eq!(cov[(0, 0)], 1.0, epsilon = 1e-15);

        let t = GaussianState::<f64>::thermal(3.0);
        let (_, cov) = outcome_marginal(&t, 0, MeasurementKind::Heterodyne).unwrap();
        assert_relative_eq!(cov, dmatrix![4.0, 0.0; 0.0, 4.0], epsilon = 1e-15);

        let s = make_tmsv(2.3f64).unwrap();
        let (_, cov) = outcome_marginal(&s, 1, MeasurementKind::HomodyneQ).unwrap();
        assert_relative_eq!(cov[(0, 0)], 2.3, epsilon = 1e-15);
    }

    #[test]
    fn single_mode_conditioning_rejected() {
        let v = GaussianState::<f64>::vacuum(1);
        assert!(matches!(
            condition(&v, 0, MeasurementKind::Heterodyne),
            Err(CoreError::TooFewModes { .. })
        ));
    }

    #[test]
    fn joint_moments_reconstruct_from_conditioning() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        for _ in 0..50 {
            let s = random_state(2, &mut rng);
            for kind in [
                MeasurementKind::HomodyneQ,
                MeasurementKind::HomodyneP,
                MeasurementKind::Heterodyne,
            ] {
                let r = condition(&s, 1, kind).unwrap();
                // remaining-mode covariance: conditional + explained part
                let ga = r.conditional_state.covariance()
                    + &r.gain * &r.outcome_cov * r.gain.transpose();
                let expect = reduce(&s, &[0]).unwrap();
                assert_relative_eq!(&ga, expect.covariance(), epsilon = 1e-9);
                // cross covariance: gain * outcome covariance
                let cross = &r.gain * &r.outcome_cov;
                match kind {
                    MeasurementKind::HomodyneQ => {
                        assert_relative_eq!(cross[(0, 0)], s.covariance()[(0, 2)], epsilon = 1e-9);
                        assert_relative_eq!(cross[(1, 0)], s.covariance()[(1, 2)], epsilon = 1e-9);
                    }
                    MeasurementKind::HomodyneP => {
                        assert_relative_eq!(cross[(0, 0)], s.covariance()[(0, 3)], epsilon = 1e-9);
                        assert_relative_eq!(cross[(1, 0)], s.covariance()[(1, 3)], epsilon = 1e-9);
                    }
                    MeasurementKind::Heterodyne => {
                        for i in 0..2 {
                            for j in 0..2 {
                                assert_relative_eq!(
                                    cross[(i, j)],
                                    s.covariance()[(i, 2 + j)],
                                    epsilon = 1e-9
                                );
                            }
                        }
                    }
                }
                // law of total variance: explained part cannot exceed total
                let (_, ocov) = outcome_marginal(&s, 1, kind).unwrap();
                assert!(ocov[(0, 0)] >= -1e-12);
                assert!(validate_state(&r.conditional_state).unwrap().is_ok());
            }
        }
    }

    #[test]
    fn conditioning_never_increases_entropy() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(91);
        for _ in 0..100 {
            let s = random_state(2, &mut rng);
            let marginal_h = von_neumann_entropy(&reduce(&s, &[0]).unwrap()).unwrap();
            for kind in [
                MeasurementKind::HomodyneQ,
                MeasurementKind::HomodyneP,
                MeasurementKind::Heterodyne,
            ] {
                let r = condition(&s, 1, kind).unwrap();
                let h = von_neumann_entropy(&r.conditional_state).unwrap();
                assert!(h <= marginal_h + 1e-8, "h={h} marginal={marginal_h}");
            }
        }
    }

    #[test]
    fn pure_states_stay_pure() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..40 {
            // random pure state: symplectic congruence of the vacuum
            let sp = crate::gaussian::random_symplectic(2, &mut rng);
            let g = &sp * sp.transpose();
            let s = GaussianState::new(nalgebra::DVector::zeros(4), g).unwrap();
            for kind in [
                MeasurementKind::HomodyneQ,
                MeasurementKind::HomodyneP,
                MeasurementKind::Heterodyne,
            ] {
                let r = condition(&s, 1, kind).unwrap();
                for nu in symplectic_eigenvalues(&r.conditional_state).unwrap() {
                    assert_relative_eq!(nu, 1.0, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn displacement_propagates_affinely() {
        let s = make_tmsv(2.0f64)
            .unwrap()
            .with_displacement(nalgebra::DVector::from_vec(vec![0.5, -0.25, 1.0, 2.0]))
            .unwrap();
        let r = condition(&s, 1, MeasurementKind::Heterodyne).unwrap();
        let at_mean = r.displacement_for(&r.outcome_mean);
        assert_relative_eq!(at_mean[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(at_mean[1], -0.25, epsilon = 1e-12);
    }
}
