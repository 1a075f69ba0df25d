//! Truncated Fock-basis density matrices: construction from state specs,
//! channel actions, moment extraction and entropy.
//!
//! Two-mode states are stored with the flat index `i_A * (N+1) + j_B`; the
//! quadrature ordering of extracted moments is `(Q_A, P_A, Q_B, P_B)`,
//! matching the covariance layer. `loss`, `dephase` and `photonsub` act on
//! the last mode (the transmitted half of a two-mode state).

use nalgebra::{DMatrix, DVector};

use crate::error::FockError;
use crate::ops::{
    coherent_amplitudes, hermitian_eigenvalues, ln_factorials, spectrum_entropy_bits, C64,
};
use crate::spec::StateSpec;
use crate::DEFAULT_TAIL_BUDGET;

/// A truncated density matrix with its bookkeeping: mode count, photon
/// cutoff `N` (dimension `N + 1` per mode) and the probability weight
/// sitting on the top two Fock levels of any mode.
#[derive(Debug, Clone)]
pub struct FockDensity {
    modes: usize,
    cutoff: usize,
    matrix: DMatrix<C64>,
    tail_mass: f64,
}

impl FockDensity {
    pub fn from_matrix(modes: usize, cutoff: usize, matrix: DMatrix<C64>) -> Self {
        let tail_mass = tail_mass_of(&matrix, modes, cutoff + 1);
        Self {
            modes,
            cutoff,
            matrix,
            tail_mass,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Dimension per mode, `N + 1`.
    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn total_dim(&self) -> usize {
        self.dim().pow(self.modes as u32)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn trace(&self) -> f64 {
        (0..self.total_dim()).map(|k| self.matrix[(k, k)].re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Check the admission invariants for verification runs: Hermitian to
    /// `1e-12`, eigenvalues above `-1e-10`, unit trace to `1e-8`, and tail
    /// mass within the budget.
    pub fn admit(&self, tail_budget: f64) -> Result<(), FockError> {
        let n = self.total_dim();
        let mut herm_defect = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                herm_defect = herm_defect.max(d);
            }
        }
        if herm_defect > 1e-12 {
            return Err(FockError::NotAdmitted {
                invariant: "hermiticity",
                value: herm_defect,
                tolerance: 1e-12,
            });
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(FockError::NotAdmitted {
                invariant: "unit trace",
                value: (tr - 1.0).abs(),
                tolerance: 1e-8,
            });
        }
        let eigs = hermitian_eigenvalues(&self.matrix, self.modes, self.dim());
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(FockError::NotAdmitted {
                invariant: "positivity",
                value: min,
                tolerance: -1e-10,
            });
        }
        if self.tail_mass > tail_budget {
            return Err(FockError::Truncation {
                tail_mass: self.tail_mass,
                budget: tail_budget,
                suggested_cutoff: suggest_cutoff(self, tail_budget),
            });
        }
        Ok(())
    }

    /// Marginal density of one mode of a two-mode state (identity on
    /// single-mode states when `keep = 0`).
    pub fn partial_trace(&self, keep: usize) -> Result<FockDensity, FockError> {
        if self.modes == 1 {
            if keep != 0 {
                return Err(FockError::InvalidParameter {
                    name: "keep",
                    reason: format!("single-mode state has no mode {keep}"),
                });
            }
            return Ok(self.clone());
        }
        if keep > 1 {
            return Err(FockError::InvalidParameter {
                name: "keep",
                reason: format!("two-mode state has no mode {keep}"),
            });
        }
        let d = self.dim();
        let mut out = DMatrix::<C64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut sum = C64::new(0.0, 0.0);
                for t in 0..d {
                    sum += if keep == 0 {
                        self.matrix[(a * d + t, b * d + t)]
                    } else {
                        self.matrix[(t * d + a, t * d + b)]
                    };
                }
                out[(a, b)] = sum;
            }
        }
        Ok(FockDensity::from_matrix(1, self.cutoff, out))
    }

    /// Photon-number marginal probabilities of one mode.
    pub fn number_marginal(&self, mode: usize) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; d];
        if self.modes == 1 {
            for k in 0..d {
                p[k] = self.matrix[(k, k)].re;
            }
        } else {
            for i in 0..d {
                for j in 0..d {
                    let k = i * d + j;
                    p[if mode == 0 { i } else { j }] += self.matrix[(k, k)].re;
                }
            }
        }
        p
    }
}

fn tail_mass_of(m: &DMatrix<C64>, modes: usize, dim: usize) -> f64 {
    let mut tail = 0.0;
    if modes == 1 {
        for k in dim.saturating_sub(2)..dim {
            tail += m[(k, k)].re;
        }
    } else {
        for i in 0..dim {
            for j in 0..dim {
                if i >= dim - 2 || j >= dim - 2 {
                    let k = i * dim + j;
                    tail += m[(k, k)].re;
                }
            }
        }
    }
    tail.max(0.0)
}

fn suggest_cutoff(rho: &FockDensity, budget: f64) -> usize {
    // extrapolate the decay of the worst mode's number distribution
    let mut worst_ratio: f64 = 0.5;
    for mode in 0..rho.modes {
        let p = rho.number_marginal(mode);
        let d = p.len();
        if d >= 5 && p[d - 3] > 1e-300 && p[d - 1] > 0.0 {
            worst_ratio = worst_ratio.max((p[d - 1] / p[d - 3]).sqrt().min(0.95));
        }
    }
    let needed = (budget / rho.tail_mass.max(1e-300)).ln() / worst_ratio.ln();
    rho.cutoff + (needed.ceil().max(4.0) as usize)
}

/// Realize a parsed state expression at the given cutoff, enforcing the
/// default tail-mass budget.
pub fn realize(spec: &StateSpec, cutoff: usize) -> Result<FockDensity, FockError> {
    realize_with_budget(spec, cutoff, DEFAULT_TAIL_BUDGET)
}

/// Realize with an explicit tail budget.
pub fn realize_with_budget(
    spec: &StateSpec,
    cutoff: usize,
    tail_budget: f64,
) -> Result<FockDensity, FockError> {
    if cutoff < 4 {
        return Err(FockError::InvalidParameter {
            name: "cutoff",
            reason: format!("cutoff must be at least 4, got {cutoff}"),
        });
    }
    let rho = build(spec, cutoff)?;
    if rho.tail_mass > tail_budget {
        return Err(FockError::Truncation {
            tail_mass: rho.tail_mass,
            budget: tail_budget,
            suggested_cutoff: suggest_cutoff(&rho, tail_budget),
        });
    }
    Ok(rho)
}

fn pure_from_amplitudes(modes: usize, cutoff: usize, v: &[C64]) -> FockDensity {
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let scale = 1.0 / norm;
    let n = v.len();
    let m = DMatrix::<C64>::from_fn(n, n, |i, j| v[i] * v[j].conj() * scale);
    FockDensity::from_matrix(modes, cutoff, m)
}

fn build(spec: &StateSpec, cutoff: usize) -> Result<FockDensity, FockError> {
    let dim = cutoff + 1;
    match spec {
        StateSpec::Fock(n) => {
            let n = *n as usize;
            if n > cutoff {
                return Err(FockError::InvalidParameter {
                    name: "fock",
                    reason: format!("level {n} exceeds cutoff {cutoff}"),
                });
            }
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            m[(n, n)] = C64::new(1.0, 0.0);
            Ok(FockDensity::from_matrix(1, cutoff, m))
        }
        StateSpec::Coherent { re, im } => {
            let v = coherent_amplitudes(C64::new(*re, *im), dim);
            Ok(pure_from_amplitudes(1, cutoff, &v))
        }
        StateSpec::Thermal { nbar } => {
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            if *nbar == 0.0 {
                m[(0, 0)] = C64::new(1.0, 0.0);
            } else {
                let q = nbar / (nbar + 1.0);
                let mut w = vec![0.0; dim];
                let mut total = 0.0;
                for (n, wn) in w.iter_mut().enumerate() {
                    *wn = q.powi(n as i32);
                    total += *wn;
                }
                for n in 0..dim {
                    m[(n, n)] = C64::new(w[n] / total, 0.0);
                }
            }
            Ok(FockDensity::from_matrix(1, cutoff, m))
        }
        StateSpec::Tmsv { v } => {
            // Schmidt form: lambda_n proportional to tanh(r)^n, cosh(2r) = V
            let ch2 = (v + 1.0) / 2.0; // cosh^2 r
            let th = ((v - 1.0) / (v + 1.0)).sqrt(); // tanh r
            let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
            for n in 0..dim {
                amps[n * dim + n] = C64::new(th.powi(n as i32) / ch2.sqrt(), 0.0);
            }
            Ok(pure_from_amplitudes(2, cutoff, &amps))
        }
        StateSpec::Squeezed { r } => {
            let lnf = ln_factorials(cutoff);
            let mut v = vec![C64::new(0.0, 0.0); dim];
            for n in 0..=(cutoff / 2) {
                let ln_mag = 0.5 * lnf[2 * n] - n as f64 * std::f64::consts::LN_2 - lnf[n];
                v[2 * n] = C64::new(
                    (-r.tanh()).powi(n as i32) * ln_mag.exp() / r.cosh().sqrt(),
                    0.0,
                );
            }
            Ok(pure_from_amplitudes(1, cutoff, &v))
        }
        StateSpec::Mix(branches) => {
            let modes = spec.modes()?;
            let total_dim = dim.pow(modes as u32);
            let mut m = DMatrix::<C64>::zeros(total_dim, total_dim);
            for (w, b) in branches {
                let rho = build(b, cutoff)?;
                m += rho.matrix() * C64::new(*w, 0.0);
            }
            Ok(FockDensity::from_matrix(modes, cutoff, m))
        }
        StateSpec::Loss { t, inner } => {
            let rho = build(inner, cutoff)?;
            Ok(kraus_loss_last_mode(&rho, *t))
        }
        StateSpec::Dephase { p, inner } => {
            let rho = build(inner, cutoff)?;
            Ok(dephase_last_mode(&rho, *p))
        }
        StateSpec::PhotonSub(inner) => {
            let rho = build(inner, cutoff)?;
            photon_subtract_last_mode(&rho)
        }
    }
}

/// Index arithmetic for acting on the last mode: for every matrix element,
/// the last-mode row level is `row % dim` and likewise for the column.
fn last_mode_stride(rho: &FockDensity) -> (usize, usize) {
    let dim = rho.dim();
    let outer = rho.total_dim() / dim;
    (outer, dim)
}

/// Photon-loss channel on the last mode via its Kraus stripes
/// `K_k |n> = sqrt(C(n, k) (1-T)^k T^(n-k)) |n-k>`; exactly trace
/// preserving on the truncated space.
pub fn kraus_loss_last_mode(rho: &FockDensity, t: f64) -> FockDensity {
    let (outer, dim) = last_mode_stride(rho);
    let total = rho.total_dim();
    let lnf = ln_factorials(dim - 1);
    let ln_t = t.ln();
    let ln_omt = if t < 1.0 { (1.0 - t).ln() } else { f64::NEG_INFINITY };
    let src = rho.matrix();
    let mut out = DMatrix::<C64>::zeros(total, total);

    for k in 0..dim {
        if k > 0 && t >= 1.0 {
            break;
        }
        // coeff[m] multiplies |m><m+k|
        let coeff: Vec<f64> = (0..dim - k)
            .map(|m| {
                let ln_c = lnf[m + k] - lnf[m] - lnf[k];
                let loss_term = if k == 0 { 0.0 } else { k as f64 * ln_omt };
                (0.5 * (ln_c + loss_term + m as f64 * ln_t)).exp()
            })
            .collect();
        for oa in 0..outer {
            for ob in 0..outer {
                for ja in 0..dim - k {
                    for jb in 0..dim - k {
                        let r = oa * dim + ja;
                        let c = ob * dim + jb;
                        let rs = oa * dim + ja + k;
                        let cs = ob * dim + jb + k;
                        out[(r, c)] += src[(rs, cs)] * (coeff[ja] * coeff[jb]);
                    }
                }
            }
        }
    }
    FockDensity::from_matrix(rho.modes, rho.cutoff, out)
}

/// Mixture of identity and full phase dephasing on the last mode: matrix
/// elements off diagonal in that mode are scaled by `1 - p`.
pub fn dephase_last_mode(rho: &FockDensity, p: f64) -> FockDensity {
    let (_, dim) = last_mode_stride(rho);
    let total = rho.total_dim();
    let src = rho.matrix();
    let out = DMatrix::<C64>::from_fn(total, total, |r, c| {
        if r % dim == c % dim {
            src[(r, c)]
        } else {
            src[(r, c)] * (1.0 - p)
        }
    });
    FockDensity::from_matrix(rho.modes, rho.cutoff, out)
}

/// Apply the lowering operator on the last mode and renormalize.
pub fn photon_subtract_last_mode(rho: &FockDensity) -> Result<FockDensity, FockError> {
    let (outer, dim) = last_mode_stride(rho);
    let total = rho.total_dim();
    let src = rho.matrix();
    let mut out = DMatrix::<C64>::zeros(total, total);
    for oa in 0..outer {
        for ob in 0..outer {
            for ja in 0..dim - 1 {
                for jb in 0..dim - 1 {
                    let r = oa * dim + ja;
                    let c = ob * dim + jb;
                    let rs = oa * dim + ja + 1;
                    let cs = ob * dim + jb + 1;
                    out[(r, c)] += src[(rs, cs)]
                        * (((ja + 1) as f64).sqrt() * ((jb + 1) as f64).sqrt());
                }
            }
        }
    }
    let tr: f64 = (0..total).map(|k| out[(k, k)].re).sum();
    if tr <= 1e-14 {
        return Err(FockError::Degenerate {
            reason: "photon subtraction of a state with no photons in the target mode".into(),
        });
    }
    out /= C64::new(tr, 0.0);
    Ok(FockDensity::from_matrix(rho.modes, rho.cutoff, out))
}

/// Ladder-operator expectation values of one mode: `<a>`, `<a^+ a>`, `<a^2>`.
struct ModeExpectations {
    m1: C64,
    nbar: f64,
    s2: C64,
}

fn mode_expectations(rho: &FockDensity, mode: usize) -> ModeExpectations {
    let d = rho.dim();
    let m = rho.matrix();
    let mut m1 = C64::new(0.0, 0.0);
    let mut nbar = 0.0;
    let mut s2 = C64::new(0.0, 0.0);
    let flat = |i: usize, j: usize| -> usize { i * d + j };
    if rho.modes == 1 {
        for n in 0..d {
            nbar += n as f64 * m[(n, n)].re;
            if n >= 1 {
                m1 += m[(n, n - 1)] * (n as f64).sqrt();
            }
            if n >= 2 {
                s2 += m[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt();
            }
        }
    } else {
        for i in 0..d {
            for j in 0..d {
                let row = flat(i, j);
                let (lvl, lowered1, lowered2) = if mode == 0 {
                    (i, (i >= 1).then(|| flat(i - 1, j)), (i >= 2).then(|| flat(i - 2, j)))
                } else {
                    (j, (j >= 1).then(|| flat(i, j - 1)), (j >= 2).then(|| flat(i, j - 2)))
                };
                nbar += lvl as f64 * m[(row, row)].re;
                if let Some(col) = lowered1 {
                    m1 += m[(row, col)] * (lvl as f64).sqrt();
                }
                if let Some(col) = lowered2 {
                    s2 += m[(row, col)] * ((lvl * (lvl - 1)) as f64).sqrt();
                }
            }
        }
    }
    ModeExpectations { m1, nbar, s2 }
}

/// First and second moments `(d, gamma)` in shot-noise units, evaluated
/// from exact ladder-operator matrix elements.
pub fn moments(rho: &FockDensity) -> (DVector<f64>, DMatrix<f64>) {
    let nm = rho.modes;
    let dim2 = 2 * nm;
    let mut d = DVector::<f64>::zeros(dim2);
    let mut g = DMatrix::<f64>::zeros(dim2, dim2);
    let sqrt2 = std::f64::consts::SQRT_2;

    let per_mode: Vec<ModeExpectations> = (0..nm).map(|m| mode_expectations(rho, m)).collect();
    for (m, e) in per_mode.iter().enumerate() {
        let dq = sqrt2 * e.m1.re;
        let dp = sqrt2 * e.m1.im;
        d[2 * m] = dq;
        d[2 * m + 1] = dp;
        g[(2 * m, 2 * m)] = 2.0 * e.s2.re + 2.0 * e.nbar + 1.0 - 2.0 * dq * dq;
        g[(2 * m + 1, 2 * m + 1)] = -2.0 * e.s2.re + 2.0 * e.nbar + 1.0 - 2.0 * dp * dp;
        let qp = 2.0 * e.s2.im - 2.0 * dq * dp;
        g[(2 * m, 2 * m + 1)] = qp;
        g[(2 * m + 1, 2 * m)] = qp;
    }

    if nm == 2 {
        let dmat = rho.dim();
        let m = rho.matrix();
        // u = <a_A a_B>, v = <a_A a_B^+>
        let mut u = C64::new(0.0, 0.0);
        let mut v = C64::new(0.0, 0.0);
        for i in 0..dmat {
            for j in 0..dmat {
                let row = i * dmat + j;
                if i >= 1 && j >= 1 {
                    u += m[(row, (i - 1) * dmat + (j - 1))] * ((i * j) as f64).sqrt();
                }
                if i >= 1 && j + 1 < dmat {
                    v += m[(row, (i - 1) * dmat + (j + 1))] * ((i * (j + 1)) as f64).sqrt();
                }
            }
        }
        let (dqa, dpa, dqb, dpb) = (d[0], d[1], d[2], d[3]);
        let qq = 2.0 * (u + v).re - 2.0 * dqa * dqb;
        let pp = 2.0 * (v - u).re - 2.0 * dpa * dpb;
        let qp = 2.0 * (u - v).im - 2.0 * dqa * dpb;
        let pq = 2.0 * (u + v).im - 2.0 * dpa * dqb;
        g[(0, 2)] = qq;
        g[(2, 0)] = qq;
        g[(1, 3)] = pp;
        g[(3, 1)] = pp;
        g[(0, 3)] = qp;
        g[(3, 0)] = qp;
        g[(1, 2)] = pq;
        g[(2, 1)] = pq;
    }
    (d, g)
}

/// Von Neumann entropy in bits from the eigenvalue spectrum.
pub fn entropy_fock(rho: &FockDensity) -> f64 {
    let eigs = hermitian_eigenvalues(rho.matrix(), rho.modes, rho.dim());
    spectrum_entropy_bits(&eigs)
}

/// Convenience: a Gaussian-layer state bearing this density's moments.
pub fn gaussian_state_of(rho: &FockDensity) -> Result<cvq_core::GaussianState64, FockError> {
    let (d, g) = moments(rho);
    Ok(cvq_core::GaussianState::new(d, g)?)
}
