//! Operator primitives in the truncated Fock basis: ladder stripes,
//! coherent and quadrature eigenvector amplitudes, and the exponentiated
//! displacement / squeeze / rotation generators.
//!
//! Quadratures follow the shot-noise convention of the covariance layer:
//! an outcome coordinate `x` relates to the raw quadrature by `x = sqrt(2) q`,
//! so the vacuum outcome distribution is standard normal.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

/// `ln(n!)` table up to `n` inclusive.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Lowering operator: `a[n-1, n] = sqrt(n)`.
pub fn lowering(dim: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

/// Amplitudes of the coherent state `|alpha>` truncated to `dim` levels
/// (not renormalized; the missing norm is exactly the truncated tail).
pub fn coherent_amplitudes(alpha: C64, dim: usize) -> Vec<C64> {
    let lnf = ln_factorials(dim.saturating_sub(1));
    let norm = (-0.5 * alpha.norm_sqr()).exp();
    let mut c = Vec::with_capacity(dim);
    let mut power = C64::new(1.0, 0.0);
    for n in 0..dim {
        let scale = norm * (-0.5 * lnf[n]).exp();
        c.push(power * scale);
        power *= alpha;
    }
    c
}

/// Quadrature eigenfunction amplitudes `<x|n>` in outcome units where the
/// vacuum density is standard normal: `<x|n> = (2 pi)^{-1/4} 2^{-n/2}
/// (n!)^{-1/2} H_n(x / sqrt(2)) e^{-x^2 / 4}`.
pub fn quadrature_amplitudes(x: f64, dim: usize) -> Vec<f64> {
    // stable recurrence on the normalized Hermite functions
    let q = x / std::f64::consts::SQRT_2;
    let mut psi = vec![0.0; dim];
    let norm0 = (std::f64::consts::PI * 2.0).powf(-0.25) * (-x * x / 4.0).exp();
    if dim > 0 {
        psi[0] = norm0;
    }
    if dim > 1 {
        psi[1] = q * std::f64::consts::SQRT_2 * norm0;
    }
    for n in 1..dim.saturating_sub(1) {
        let nf = n as f64;
        psi[n + 1] =
            (q * (2.0 / (nf + 1.0)).sqrt()) * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
    }
    psi
}

/// `exp(G)` for anti-Hermitian `G`, via the Hermitian eigendecomposition of
/// `iG`.
pub fn exp_antihermitian(g: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = g.nrows();
    let herm = g.map(|z| C64::new(0.0, 1.0) * z);
    let eig = herm.symmetric_eigen();
    let mut diag = DMatrix::<C64>::zeros(dim, dim);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        diag[(k, k)] = C64::new(0.0, -lambda).exp();
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Displacement operator `D(alpha) = exp(alpha a^+ - conj(alpha) a)`.
pub fn displacement_op(alpha: C64, dim: usize) -> DMatrix<C64> {
    let a = lowering(dim).map(|x| C64::new(x, 0.0));
    let g = a.adjoint() * alpha - &a * alpha.conj();
    exp_antihermitian(&g)
}

/// Squeeze operator `S(r) = exp(r/2 (a^2 - a^+2))`; sends the Q variance of
/// the vacuum to `e^{-2r}`.
pub fn squeeze_op(r: f64, dim: usize) -> DMatrix<C64> {
    let a = lowering(dim).map(|x| C64::new(x, 0.0));
    let a2 = &a * &a;
    let g = (&a2 - a2.adjoint()) * C64::new(0.5 * r, 0.0);
    exp_antihermitian(&g)
}

/// Phase rotation `R(theta) = exp(-i theta a^+ a)`, matching the covariance
/// rotation `[[cos, sin], [-sin, cos]]`.
pub fn rotation_op(theta: f64, dim: usize) -> DMatrix<C64> {
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    for n in 0..dim {
        u[(n, n)] = C64::new(0.0, -theta * n as f64).exp();
    }
    u
}

/// Hermitian eigenvalues with an exact sparsity shortcut for two-mode
/// matrices that are block diagonal in the photon-number difference
/// `i - j` (every state assembled from a two-mode squeezed root by loss,
/// dephasing, photon subtraction and mixing has this structure). Falls back
/// to the dense solver otherwise.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>, modes: usize, dim_per_mode: usize) -> Vec<f64> {
    if modes == 2 && number_difference_blocked(m, dim_per_mode) {
        let n = dim_per_mode;
        let mut out = Vec::with_capacity(n * n);
        for d in -(n as isize - 1)..=(n as isize - 1) {
            // indices (i, j) with i - j = d
            let idx: Vec<(usize, usize)> = (0..n)
                .filter_map(|j| {
                    let i = j as isize + d;
                    (0..n as isize).contains(&i).then(|| (i as usize, j))
                })
                .collect();
            let b = DMatrix::<C64>::from_fn(idx.len(), idx.len(), |r, c| {
                let (ir, jr) = idx[r];
                let (ic, jc) = idx[c];
                m[(ir * n + jr, ic * n + jc)]
            });
            out.extend(b.symmetric_eigenvalues().iter().copied());
        }
        out
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    }
}

fn number_difference_blocked(m: &DMatrix<C64>, n: usize) -> bool {
    let total = n * n;
    debug_assert_eq!(m.nrows(), total);
    for row in 0..total {
        let (i, j) = (row / n, row % n);
        let d_row = i as isize - j as isize;
        for col in 0..total {
            let (k, l) = (col / n, col % n);
            if k as isize - l as isize != d_row {
                let z = m[(row, col)];
                if z.re != 0.0 || z.im != 0.0 {
                    return false;
                }
            }
        }
    }
    true
}

/// Shannon entropy in bits of an eigenvalue list, clamping values below
/// `1e-14` to zero.
pub fn spectrum_entropy_bits(eigs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &l in eigs {
        if l > 1e-14 {
            h -= l * l.log2();
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coherent_amplitudes_are_poissonian() {
        let alpha = C64::new(0.8, -0.3);
        let c = coherent_amplitudes(alpha, 40);
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        let mean_n: f64 = c
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum();
        assert_relative_eq!(mean_n, alpha.norm_sqr(), epsilon = 1e-10);
    }

    #[test]
    fn quadrature_amplitudes_integrate_to_identity() {
        // sum_x psi_m(x) psi_n(x) dx = delta_{mn}
        let dim = 12;
        let (lo, hi, step) = (-10.0, 10.0, 0.02);
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        let mut x = lo;
        while x <= hi {
            let psi = quadrature_amplitudes(x, dim);
            for m in 0..dim {
                for n in 0..dim {
                    gram[(m, n)] += psi[m] * psi[n] * step;
                }
            }
            x += step;
        }
        assert_relative_eq!(gram, DMatrix::identity(dim, dim), epsilon = 1e-6);
    }

    #[test]
    fn displacement_moves_the_vacuum() {
        let alpha = C64::new(0.6, 0.2);
        let d = displacement_op(alpha, 48);
        let mut vac = DMatrix::<C64>::zeros(48, 1);
        vac[(0, 0)] = C64::new(1.0, 0.0);
        let moved = &d * vac;
        let expect = coherent_amplitudes(alpha, 48);
        for (got, want) in moved.iter().zip(&expect) {
            assert_relative_eq!(got.re, want.re, epsilon = 1e-9);
            assert_relative_eq!(got.im, want.im, epsilon = 1e-9);
        }
    }

    #[test]
    fn squeeze_amplitudes_match_closed_form() {
        let r = 0.5;
        let dim = 64;
        let s = squeeze_op(r, dim);
        let lnf = ln_factorials(dim - 1);
        // squeezed vacuum: c_{2n} = (-tanh r)^n sqrt((2n)!) / (2^n n! sqrt(cosh r))
        for n in 0..10usize {
            let want = (-r.tanh()).powi(n as i32)
                * (0.5 * lnf[2 * n] - n as f64 * std::f64::consts::LN_2 - lnf[n]).exp()
                / r.cosh().sqrt();
            let got = s[(2 * n, 0)];
            assert_relative_eq!(got.re, want, epsilon = 1e-9);
            assert_relative_eq!(got.im, 0.0, epsilon = 1e-12);
            if 2 * n + 1 < dim {
                assert_relative_eq!(s[(2 * n + 1, 0)].norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rotation_is_diagonal_phase() {
        let u = rotation_op(0.7, 5);
        for n in 0..5 {
            assert_relative_eq!(u[(n, n)].arg(), -0.7 * n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectrum_entropy_clamps_dust() {
        let h = spectrum_entropy_bits(&[0.5, 0.5, 1e-16, -1e-16]);
        assert_relative_eq!(h, 1.0, epsilon = 1e-12);
    }
}
