//! Gaussian states as displacement vector + covariance matrix, with
//! symplectic-eigenvalue extraction, physicality validation and von Neumann
//! entropy.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;
use crate::scalar::{c, log2, Real};

/// Absolute tolerance on covariance symmetry.
pub const TOL_SYM: f64 = 1e-10;
/// Tolerance on the Heisenberg constraint `nu >= 1`.
pub const TOL_PHYS: f64 = 1e-9;
/// Relative singular-value cutoff for pseudo-inverses in conditioning.
pub const TOL_PINV: f64 = 1e-12;

/// The standard antisymmetric form fixing the commutation relations, block
/// diagonal with `n` copies of `[[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm<T: Real = f64> {
    n_modes: usize,
    matrix: DMatrix<T>,
}

impl<T: Real> SymplecticForm<T> {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }
}

/// Build the `n`-mode symplectic form; `n = 0` is rejected.
pub fn symplectic_form<T: Real>(n_modes: usize) -> Result<SymplecticForm<T>, CoreError> {
    if n_modes == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_modes",
            reason: "must be at least 1".into(),
        });
    }
    let mut m = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        m[(2 * k, 2 * k + 1)] = T::one();
        m[(2 * k + 1, 2 * k)] = -T::one();
    }
    Ok(SymplecticForm { n_modes, matrix: m })
}

/// An `n`-mode Gaussian state in shot-noise units: first moments `d` and
/// symmetrized second moments `gamma` (vacuum has `gamma = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState<T: Real = f64> {
    n_modes: usize,
    displacement: DVector<T>,
    covariance: DMatrix<T>,
}

/// Physicality verdict carrying the minimum symplectic eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub enum Validity<T: Real = f64> {
    Ok { min_nu: T },
    Violation { min_nu: T, detail: String },
}

impl<T: Real> Validity<T> {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validity::Ok { .. })
    }

    pub fn min_nu(&self) -> T {
        match self {
            Validity::Ok { min_nu } | Validity::Violation { min_nu, .. } => *min_nu,
        }
    }
}

impl<T: Real> GaussianState<T> {
    /// Assemble a state from its moments, checking dimensions only;
    /// physicality is the business of [`validate_state`].
    pub fn new(displacement: DVector<T>, covariance: DMatrix<T>) -> Result<Self, CoreError> {
        let dim = displacement.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(CoreError::DimensionMismatch {
                context: "displacement length must be 2 * n_modes",
                expected: dim + dim % 2,
                got: dim,
            });
        }
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(CoreError::DimensionMismatch {
                context: "covariance must be square of side 2 * n_modes",
                expected: dim,
                got: covariance.nrows().max(covariance.ncols()),
            });
        }
        Ok(Self {
            n_modes: dim / 2,
            displacement,
            covariance,
        })
    }

    /// The `n`-mode vacuum: zero displacement, identity covariance.
    pub fn vacuum(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self {
            n_modes,
            displacement: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim),
        }
    }

    /// Single-mode isotropic state with quadrature variance `nu` (a thermal
    /// state for `nu > 1`).
    pub fn thermal(nu: T) -> Self {
        let mut s = Self::vacuum(1);
        s.covariance[(0, 0)] = nu;
        s.covariance[(1, 1)] = nu;
        s
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn displacement(&self) -> &DVector<T> {
        &self.displacement
    }

    pub fn covariance(&self) -> &DMatrix<T> {
        &self.covariance
    }

    /// Replace the displacement, keeping the covariance.
    pub fn with_displacement(mut self, d: DVector<T>) -> Result<Self, CoreError> {
        if d.len() != 2 * self.n_modes {
            return Err(CoreError::DimensionMismatch {
                context: "displacement length must be 2 * n_modes",
                expected: 2 * self.n_modes,
                got: d.len(),
            });
        }
        self.displacement = d;
        Ok(self)
    }
}

/// Two-mode squeezed vacuum with EPR variance `V >= 1`.
///
/// Covariance blocks are `V*I` on the diagonal and `sqrt(V^2 - 1) * Z` off
/// the diagonal, `Z = diag(1, -1)`. `V = 1` is two uncorrelated vacua.
pub fn make_tmsv<T: Real>(v: T) -> Result<GaussianState<T>, CoreError> {
    if v < T::one() {
        return Err(CoreError::InvalidParameter {
            name: "V",
            reason: format!("EPR variance must be >= 1, got {v}"),
        });
    }
    let cz = (v * v - T::one()).sqrt();
    let mut g = DMatrix::identity(4, 4);
    for k in 0..4 {
        g[(k, k)] = v;
    }
    g[(0, 2)] = cz;
    g[(2, 0)] = cz;
    g[(1, 3)] = -cz;
    g[(3, 1)] = -cz;
    Ok(GaussianState {
        n_modes: 2,
        displacement: DVector::zeros(4),
        covariance: g,
    })
}

fn symmetry_defect<T: Real>(g: &DMatrix<T>) -> T {
    let mut defect = T::zero();
    for i in 0..g.nrows() {
        for j in (i + 1)..g.ncols() {
            let d = (g[(i, j)] - g[(j, i)]).abs();
            if d > defect {
                defect = d;
            }
        }
    }
    defect
}

/// Check the two state invariants: symmetric covariance and symplectic
/// eigenvalues `nu_i >= 1 - TOL_PHYS`. Dimension problems are errors, not
/// verdicts.
pub fn validate_state<T: Real>(s: &GaussianState<T>) -> Result<Validity<T>, CoreError> {
    let defect = symmetry_defect(&s.covariance);
    if defect > c(TOL_SYM) {
        // Report the eigenvalues of the symmetrized matrix so the verdict
        // still carries a meaningful min nu.
        let sym = symmetrized(&s.covariance);
        let min_nu = symplectic_eigenvalues_of(&sym)
            .map(|nu| nu.last().copied().unwrap_or_else(T::one))
            .unwrap_or_else(|_| T::zero());
        return Ok(Validity::Violation {
            min_nu,
            detail: format!("covariance asymmetry {defect} exceeds {TOL_SYM}"),
        });
    }
    let nus = symplectic_eigenvalues_of(&s.covariance)?;
    let min_nu = *nus.last().expect("at least one mode");
    if min_nu < T::one() - c(TOL_PHYS) {
        Ok(Validity::Violation {
            min_nu,
            detail: format!("min symplectic eigenvalue {min_nu} below 1"),
        })
    } else {
        Ok(Validity::Ok { min_nu })
    }
}

/// Shorthand used by operations whose preconditions demand a valid state.
pub fn ensure_valid<T: Real>(s: &GaussianState<T>) -> Result<(), CoreError> {
    match validate_state(s)? {
        Validity::Ok { .. } => Ok(()),
        Validity::Violation { min_nu, detail } => {
            if symmetry_defect(&s.covariance) > c(TOL_SYM) {
                Err(CoreError::NonSymmetric {
                    defect: to_f64(symmetry_defect(&s.covariance)),
                })
            } else {
                let _ = detail;
                Err(CoreError::Unphysical {
                    min_nu: to_f64(min_nu),
                })
            }
        }
    }
}

pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    num_traits::ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

fn symmetrized<T: Real>(g: &DMatrix<T>) -> DMatrix<T> {
    let half = c::<T>(0.5);
    DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| (g[(i, j)] + g[(j, i)]) * half)
}

/// Symplectic eigenvalues of a state, sorted in descending order.
///
/// The spectrum of `sigma * gamma` consists of pairs `+/- i nu`; the moduli
/// of the imaginary parts are returned. If the pairing structure is lost to
/// rounding, the symmetric product `gamma^{1/2} (-sigma gamma sigma)
/// gamma^{1/2}` is used instead, whose ordinary eigenvalues are `nu^2`.
pub fn symplectic_eigenvalues<T: Real>(s: &GaussianState<T>) -> Result<Vec<T>, CoreError> {
    let defect = symmetry_defect(&s.covariance);
    if defect > c(TOL_SYM) {
        return Err(CoreError::NonSymmetric {
            defect: to_f64(defect),
        });
    }
    symplectic_eigenvalues_of(&s.covariance)
}

pub(crate) fn symplectic_eigenvalues_of<T: Real>(g: &DMatrix<T>) -> Result<Vec<T>, CoreError> {
    let n = g.nrows() / 2;
    let sigma = symplectic_form::<T>(n)?.matrix().clone();
    let sg = &sigma * g;
    let eig = sg.complex_eigenvalues();

    // Pairing check: eigenvalues must be (+/-)i nu with negligible real part.
    let mut nus: Vec<T> = eig.iter().map(|z| z.im.abs()).collect();
    nus.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    let scale = nus.first().copied().unwrap_or_else(T::one).max(T::one());
    let tol = c::<T>(1e-8) * scale;
    let mut paired = eig.iter().all(|z| z.re.abs() <= tol);
    if paired {
        for k in 0..n {
            if (nus[2 * k] - nus[2 * k + 1]).abs() > tol {
                paired = false;
                break;
            }
        }
    }
    if paired {
        return Ok((0..n).map(|k| nus[2 * k]).collect());
    }

    // Symmetric fallback.
    let root = sqrtm_psd(g)?;
    let m = &root * &sigma * g * &sigma * &root * (-T::one());
    let mut sq = m.symmetric_eigen().eigenvalues.as_slice().to_vec();
    sq.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok((0..n)
        .map(|k| {
            let v = (sq[2 * k] + sq[2 * k + 1]) * c::<T>(0.5);
            v.max(T::zero()).sqrt()
        })
        .collect())
}

/// Symmetric square root of a positive-semidefinite matrix; small negative
/// eigenvalues are clamped to zero, genuinely indefinite input is an error.
pub(crate) fn sqrtm_psd<T: Real>(g: &DMatrix<T>) -> Result<DMatrix<T>, CoreError> {
    let eig = symmetrized(g).symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |a, &x| a.max(x.abs()));
    let tol = c::<T>(1e-12) * scale.max(T::one());
    let mut d = DMatrix::zeros(g.nrows(), g.ncols());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol {
            return Err(CoreError::NonPositive);
        }
        d[(k, k)] = lambda.max(T::zero()).sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `g(nu)` for one symplectic eigenvalue, in bits.
///
/// Exact formula above `1 + 1e-6`; below it a second-order expansion in
/// `t = (nu - 1)/2` avoids the `0 * log 0` cancellation. Values in
/// `[1 - TOL_PHYS, 1]` clamp to zero.
pub fn entropy_g<T: Real>(nu: T) -> Result<T, CoreError> {
    if nu < T::one() - c(TOL_PHYS) {
        return Err(CoreError::Unphysical {
            min_nu: to_f64(nu),
        });
    }
    let nu = nu.max(T::one());
    let half = c::<T>(0.5);
    if nu > T::one() + c(1e-6) {
        let p = (nu + T::one()) * half;
        let m = (nu - T::one()) * half;
        Ok(p * log2(p) - m * log2(m))
    } else {
        let t = (nu - T::one()) * half;
        if t <= T::zero() {
            return Ok(T::zero());
        }
        Ok((t + t * t * half) / T::ln_2() - t * log2(t))
    }
}

/// Von Neumann entropy in bits: the sum of `g(nu_i)` over the symplectic
/// spectrum. Displacement plays no role.
pub fn von_neumann_entropy<T: Real>(s: &GaussianState<T>) -> Result<T, CoreError> {
    let nus = symplectic_eigenvalues(s)?;
    let mut h = T::zero();
    for nu in nus {
        h += entropy_g(nu)?;
    }
    Ok(h)
}

/// Marginal state on the kept modes (indices are deduplicated and sorted).
pub fn reduce<T: Real>(s: &GaussianState<T>, keep: &[usize]) -> Result<GaussianState<T>, CoreError> {
    if keep.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "keep",
            reason: "mode set must be nonempty".into(),
        });
    }
    let mut modes: Vec<usize> = keep.to_vec();
    modes.sort_unstable();
    modes.dedup();
    if let Some(&bad) = modes.iter().find(|&&m| m >= s.n_modes) {
        return Err(CoreError::ModeOutOfRange {
            index: bad,
            n_modes: s.n_modes,
        });
    }
    let quads: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let dim = quads.len();
    let d = DVector::from_fn(dim, |i, _| s.displacement[quads[i]]);
    let g = DMatrix::from_fn(dim, dim, |i, j| s.covariance[(quads[i], quads[j])]);
    Ok(GaussianState {
        n_modes: modes.len(),
        displacement: d,
        covariance: g,
    })
}

/// Normal-form data of a covariance matrix: symplectic eigenvalues `nu` and
/// a symplectic `S` (satisfying `S^T sigma S = sigma`) with
/// `gamma = S * diag(nu_1, nu_1, ..., nu_n, nu_n) * S^T`.
pub fn williamson<T: Real>(g: &DMatrix<T>) -> Result<(Vec<T>, DMatrix<T>), CoreError> {
    let dim = g.nrows();
    let n = dim / 2;
    let gs = symmetrized(g);
    let eig = gs.clone().symmetric_eigen();
    let min_l = eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &x| a.min(x));
    if min_l <= T::zero() {
        return Err(CoreError::NonPositive);
    }
    let mut droot = DMatrix::zeros(dim, dim);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        droot[(k, k)] = l.sqrt();
    }
    let root = &eig.eigenvectors * &droot * eig.eigenvectors.transpose();

    let sigma = symplectic_form::<T>(n)?.matrix().clone();
    let m = &root * &sigma * &root; // antisymmetric
    let b = -(&m * &m); // symmetric positive definite, eigenvalues nu^2 (doubled)
    let beig = b.symmetric_eigen();

    // Greedy construction of an orthonormal basis (w_j, u_j) per plane with
    // M u = nu w and M w = -nu u, so that O^T M O = (+nu J) blocks.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        beig.eigenvalues[j]
            .partial_cmp(&beig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let mut chosen: Vec<DVector<T>> = Vec::with_capacity(dim);
    let mut nus: Vec<T> = Vec::with_capacity(n);
    let mut o = DMatrix::zeros(dim, dim);
    let mut col = 0usize;
    for &idx in &order {
        if col == dim {
            break;
        }
        let mut u: DVector<T> = beig.eigenvectors.column(idx).into();
        for v in &chosen {
            let proj = v.dot(&u);
            u -= v * proj;
        }
        let norm = u.norm();
        if norm < c(1e-8) {
            continue;
        }
        u /= norm;
        let nu = beig.eigenvalues[idx].max(T::zero()).sqrt();
        if nu <= T::zero() {
            return Err(CoreError::NonPositive);
        }
        let w = (&m * &u) / nu;
        o.set_column(col, &w);
        o.set_column(col + 1, &u);
        nus.push(nu);
        chosen.push(w);
        chosen.push(u);
        col += 2;
    }
    if col != dim {
        return Err(CoreError::NonPositive);
    }

    let mut dinv_root = DMatrix::zeros(dim, dim);
    for (k, &nu) in nus.iter().enumerate() {
        let r = T::one() / nu.sqrt();
        dinv_root[(2 * k, 2 * k)] = r;
        dinv_root[(2 * k + 1, 2 * k + 1)] = r;
    }
    let s = root * o * dinv_root;
    Ok((nus, s))
}

/// Repair a symmetric but slightly unphysical covariance by raising every
/// symplectic eigenvalue below 1 up to 1, through the normal form.
pub fn project_physical<T: Real>(s: &GaussianState<T>) -> Result<GaussianState<T>, CoreError> {
    let (nus, sp) = williamson(&s.covariance)?;
    let dim = 2 * s.n_modes;
    let mut d = DMatrix::zeros(dim, dim);
    for (k, &nu) in nus.iter().enumerate() {
        let v = nu.max(T::one());
        d[(2 * k, 2 * k)] = v;
        d[(2 * k + 1, 2 * k + 1)] = v;
    }
    let g = &sp * d * sp.transpose();
    Ok(GaussianState {
        n_modes: s.n_modes,
        displacement: s.displacement.clone(),
        covariance: symmetrized(&g),
    })
}

/// Random symplectic matrix built from Givens-style mode mixers, single-mode
/// phase rotations and squeezers. Useful for congruence-invariance checks
/// and for generating random physical states.
pub fn random_symplectic<R: rand::Rng>(n_modes: usize, rng: &mut R) -> DMatrix<f64> {
    use std::f64::consts::PI;
    let dim = 2 * n_modes;
    let mut s = DMatrix::<f64>::identity(dim, dim);
    let rounds = 2 * n_modes;
    for _ in 0..rounds {
        // per-mode phase rotation and squeeze
        for m in 0..n_modes {
            let theta = rng.random::<f64>() * 2.0 * PI;
            let r: f64 = (rng.random::<f64>() - 0.5) * 1.2;
            let mut gen = DMatrix::<f64>::identity(dim, dim);
            let (ct, st) = (theta.cos(), theta.sin());
            gen[(2 * m, 2 * m)] = ct * (-r).exp();
            gen[(2 * m, 2 * m + 1)] = st * r.exp();
            gen[(2 * m + 1, 2 * m)] = -st * (-r).exp();
            gen[(2 * m + 1, 2 * m + 1)] = ct * r.exp();
            s = gen * s;
        }
        // Givens-style beamsplitter between consecutive modes
        for m in 1..n_modes {
            let theta = rng.random::<f64>() * 2.0 * PI;
            let (ct, st) = (theta.cos(), theta.sin());
            let mut gen = DMatrix::<f64>::identity(dim, dim);
            for q in 0..2 {
                let a = 2 * (m - 1) + q;
                let b = 2 * m + q;
                gen[(a, a)] = ct;
                gen[(a, b)] = st;
                gen[(b, a)] = -st;
                gen[(b, b)] = ct;
            }
            s = gen * s;
        }
    }
    s
}

/// Random valid state: a random symplectic congruence of a random thermal
/// spectrum (optionally displaced).
pub fn random_state<R: rand::Rng>(n_modes: usize, rng: &mut R) -> GaussianState<f64> {
    let s = random_symplectic(n_modes, rng);
    let dim = 2 * n_modes;
    let mut d = DMatrix::<f64>::zeros(dim, dim);
    for m in 0..n_modes {
        let nu = 1.0 + rng.random::<f64>() * 3.0;
        d[(2 * m, 2 * m)] = nu;
        d[(2 * m + 1, 2 * m + 1)] = nu;
    }
    let g = &s * d * s.transpose();
    let disp = DVector::from_fn(dim, |_, _| (rng.random::<f64>() - 0.5) * 4.0);
    GaussianState {
        n_modes,
        displacement: disp,
        covariance: symmetrized(&g),
    }
}

// --- serialization -----------------------------------------------------
//
// Wire format: {"n_modes": n, "d": [...], "gamma": [[...], ...]} with the
// (Q1, P1, Q2, P2, ...) quadrature ordering.

#[derive(Serialize, Deserialize)]
struct StateWire<T> {
    n_modes: usize,
    d: Vec<T>,
    gamma: Vec<Vec<T>>,
}

impl<T: Real + Serialize> Serialize for GaussianState<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let dim = 2 * self.n_modes;
        let wire = StateWire {
            n_modes: self.n_modes,
            d: self.displacement.iter().copied().collect(),
            gamma: (0..dim)
                .map(|i| (0..dim).map(|j| self.covariance[(i, j)]).collect())
                .collect(),
        };
        wire.serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for GaussianState<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = StateWire::<T>::deserialize(deserializer)?;
        let dim = 2 * wire.n_modes;
        if wire.d.len() != dim || wire.gamma.len() != dim || wire.gamma.iter().any(|r| r.len() != dim)
        {
            return Err(D::Error::custom(format!(
                "inconsistent dimensions for {}-mode state",
                wire.n_modes
            )));
        }
        let d = DVector::from_vec(wire.d);
        let g = DMatrix::from_fn(dim, dim, |i, j| wire.gamma[i][j]);
        GaussianState::new(d, g).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn symplectic_form_blocks() {
        let s1 = symplectic_form::<f64>(1).unwrap();
        assert_eq!(s1.matrix(), &dmatrix![0.0, 1.0; -1.0, 0.0]);
        let s2 = symplectic_form::<f64>(2).unwrap();
        assert_eq!(s2.matrix()[(0, 1)], 1.0);
        assert_eq!(s2.matrix()[(1, 0)], -1.0);
        assert_eq!(s2.matrix()[(2, 3)], 1.0);
        assert_eq!(s2.matrix()[(3, 2)], -1.0);
        assert_eq!(s2.matrix()[(0, 2)], 0.0);
        assert!(symplectic_form::<f64>(0).is_err());
    }

    #[test]
    fn symplectic_form_is_orthogonal() {
        let s3 = symplectic_form::<f64>(3).unwrap();
        let prod = s3.matrix() * s3.matrix().transpose();
        assert_relative_eq!(prod, DMatrix::identity(6, 6), epsilon = 1e-15);
    }

    #[test]
    fn vacuum_is_valid() {
        let v = GaussianState::<f64>::vacuum(1);
        match validate_state(&v).unwrap() {
            Validity::Ok { min_nu } => assert_relative_eq!(min_nu, 1.0, epsilon = 1e-12),
            other => panic!("vacuum flagged invalid: {other:?}"),
        }
    }

    #[test]
    fn sub_heisenberg_is_violation() {
        let mut s = GaussianState::<f64>::vacuum(1);
        s.covariance *= 0.5;
        match validate_state(&s).unwrap() {
            Validity::Violation { min_nu, .. } => assert_relative_eq!(min_nu, 0.5, epsilon = 1e-12),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn tmsv_examples() {
        let s = make_tmsv(1.0f64).unwrap();
        assert_relative_eq!(s.covariance(), &DMatrix::identity(4, 4), epsilon = 1e-15);

        let s = make_tmsv(2.0f64).unwrap();
        assert_relative_eq!(s.covariance()[(0, 2)], 3.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(s.covariance()[(1, 3)], -(3.0f64.sqrt()), epsilon = 1e-12);

        // oracle for the validity example: the spectrum of sigma * gamma
        let sigma = symplectic_form::<f64>(2).unwrap().matrix().clone();
        let eig = (&sigma * s.covariance()).complex_eigenvalues();
        for z in eig.iter() {
            assert_relative_eq!(z.im.abs(), 1.0, epsilon = 1e-9);
            assert_relative_eq!(z.re, 0.0, epsilon = 1e-9);
        }
        assert!(validate_state(&s).unwrap().is_ok());

        assert!(make_tmsv(0.9f64).is_err());
        for v in [1.0f64, 1.5, 2.0, 5.0, 20.0] {
            let s = make_tmsv(v).unwrap();
            for nu in symplectic_eigenvalues(&s).unwrap() {
                assert_relative_eq!(nu, 1.0, epsilon = 1e-8);
            }
            assert!(von_neumann_entropy(&s).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn symplectic_eigenvalue_examples() {
        let v = GaussianState::<f64>::vacuum(1);
        assert_relative_eq!(symplectic_eigenvalues(&v).unwrap()[0], 1.0, epsilon = 1e-12);

        let t = GaussianState::<f64>::thermal(3.0);
        assert_relative_eq!(symplectic_eigenvalues(&t).unwrap()[0], 3.0, epsilon = 1e-12);

        let mut s = GaussianState::<f64>::vacuum(1);
        s.covariance[(0, 0)] = 0.5;
        s.covariance[(1, 1)] = 2.0;
        assert_relative_eq!(symplectic_eigenvalues(&s).unwrap()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_symmetric_rejected() {
        let mut s = GaussianState::<f64>::vacuum(1);
        s.covariance[(0, 1)] = 1e-3;
        assert!(matches!(
            symplectic_eigenvalues(&s),
            Err(CoreError::NonSymmetric { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        let v = GaussianState::<f64>::vacuum(2);
        assert_relative_eq!(von_neumann_entropy(&v).unwrap(), 0.0, epsilon = 1e-12);

        let t = GaussianState::<f64>::thermal(3.0);
        assert_relative_eq!(von_neumann_entropy(&t).unwrap(), 2.0, epsilon = 1e-12);

        let s = make_tmsv(3.0f64).unwrap();
        let marginal = reduce(&s, &[1]).unwrap();
        assert_relative_eq!(von_neumann_entropy(&marginal).unwrap(), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn entropy_rejects_unphysical() {
        let mut s = GaussianState::<f64>::vacuum(1);
        s.covariance *= 0.5;
        assert!(matches!(
            von_neumann_entropy(&s),
            Err(CoreError::Unphysical { .. })
        ));
    }

    #[test]
    fn g_is_monotone_and_convex() {
        let grid: Vec<f64> = (0..200).map(|k| 1.0 + 49.0 * k as f64 / 199.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&nu| entropy_g(nu).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "g must be nondecreasing");
        }
        // g is concave in nu (second differences nonpositive), which is what
        // makes the entropy bound tight; check the sign on the grid.
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-9);
        }
    }

    #[test]
    fn reduce_examples() {
        let v2 = GaussianState::<f64>::vacuum(2);
        let r = reduce(&v2, &[0]).unwrap();
        assert_eq!(r.n_modes(), 1);
        assert_relative_eq!(r.covariance(), &DMatrix::identity(2, 2), epsilon = 1e-15);

        let s = make_tmsv(2.5f64).unwrap();
        let r = reduce(&s, &[1]).unwrap();
        assert_relative_eq!(r.covariance(), &(DMatrix::identity(2, 2) * 2.5), epsilon = 1e-12);

        // reduce-then-reduce equals reduce with the intersected set
        let once = reduce(&s, &[0, 1]).unwrap();
        let twice = reduce(&once, &[0]).unwrap();
        assert_eq!(twice, reduce(&s, &[0]).unwrap());

        assert!(matches!(
            reduce(&s, &[2]),
            Err(CoreError::ModeOutOfRange { .. })
        ));
        assert!(reduce(&s, &[]).is_err());
    }

    #[test]
    fn displacement_is_irrelevant() {
        let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(7);
        for _ in 0..20 {
            let s = random_state(2, &mut rng);
            let zeroed = s.clone().with_displacement(DVector::zeros(4)).unwrap();
            assert_eq!(
                symplectic_eigenvalues(&s).unwrap(),
                symplectic_eigenvalues(&zeroed).unwrap()
            );
            assert_eq!(
                von_neumann_entropy(&s).unwrap(),
                von_neumann_entropy(&zeroed).unwrap()
            );
            assert_eq!(
                validate_state(&s).unwrap().min_nu(),
                validate_state(&zeroed).unwrap().min_nu()
            );
        }
    }

    #[test]
    fn williamson_reconstructs() {
        let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(11);
        for n in [1usize, 2, 3] {
            for _ in 0..10 {
                let s = random_state(n, &mut rng);
                let (nus, sp) = williamson(s.covariance()).unwrap();
                let dim = 2 * n;
                let mut d = DMatrix::<f64>::zeros(dim, dim);
                for (k, &nu) in nus.iter().enumerate() {
                    d[(2 * k, 2 * k)] = nu;
                    d[(2 * k + 1, 2 * k + 1)] = nu;
                }
                let rebuilt = &sp * d * sp.transpose();
                assert_relative_eq!(rebuilt, s.covariance().clone(), epsilon = 1e-8);
                let sigma = symplectic_form::<f64>(n).unwrap().matrix().clone();
                let cond = sp.transpose() * &sigma * &sp;
                assert_relative_eq!(cond, sigma, epsilon = 1e-8);

                let mut direct = symplectic_eigenvalues(&s).unwrap();
                let mut from_w = nus.clone();
                direct.sort_by(|a, b| b.partial_cmp(a).unwrap());
                from_w.sort_by(|a, b| b.partial_cmp(a).unwrap());
                for (a, b) in direct.iter().zip(&from_w) {
                    assert_relative_eq!(a, b, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn projection_raises_nu_to_one() {
        let mut s = GaussianState::<f64>::vacuum(1);
        s.covariance[(0, 0)] = 1.0 - 1e-7;
        s.covariance[(1, 1)] = 1.0 - 1e-7;
        let p = project_physical(&s).unwrap();
        assert!(validate_state(&p).unwrap().is_ok());
        let nu = symplectic_eigenvalues(&p).unwrap()[0];
        assert!(nu >= 1.0 - 1e-12);
    }

    #[test]
    fn json_round_trip_is_bit_faithful() {
        let s = make_tmsv(1.7f64)
            .unwrap()
            .with_displacement(DVector::from_vec(vec![0.1, -0.2, 0.3, 1.0 / 3.0]))
            .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: GaussianState<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        for (a, b) in s.displacement().iter().zip(back.displacement().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in s.covariance().iter().zip(back.covariance().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn generic_scalar_f32_smoke() {
        let s = make_tmsv(2.0f32).unwrap();
        let nus = symplectic_eigenvalues(&s).unwrap();
        assert!((nus[0] - 1.0).abs() < 1e-3);
    }
}
