//! Classical-side checks: entropy gaps of discretized distributions against
//! their Gaussian counterparts, and discrete mutual information of joint
//! measurement-outcome distributions.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;

use crate::density::{moments, FockDensity};
use crate::error::FockError;
use crate::ops::{coherent_amplitudes, quadrature_amplitudes, C64};
use crate::povm::HeterodyneGrid;

/// Gap and relative entropy of a discrete distribution against the
/// discretized Gaussian with the same first and second moments.
#[derive(Debug, Clone)]
pub struct ClassicalGapReport {
    /// `H(gaussian on grid) - H(p)` in bits.
    pub gap: f64,
    /// `KL(p || gaussian on grid)` in bits.
    pub kl: f64,
    pub h_p: f64,
    pub h_gaussian: f64,
}

/// Compare a finite-support distribution with its Gaussianification on a
/// shared grid. A zero-variance distribution returns zero gap by the
/// limiting convention.
pub fn classical_gap(xs: &[f64], ps: &[f64]) -> Result<ClassicalGapReport, FockError> {
    if xs.len() != ps.len() || xs.is_empty() {
        return Err(FockError::InvalidParameter {
            name: "distribution",
            reason: "need matching nonempty supports and weights".into(),
        });
    }
    if ps.iter().any(|&p| p < 0.0) {
        return Err(FockError::InvalidParameter {
            name: "distribution",
            reason: "weights must be nonnegative".into(),
        });
    }
    let total: f64 = ps.iter().sum();
    if total <= 0.0 {
        return Err(FockError::InvalidParameter {
            name: "distribution",
            reason: "weights sum to zero".into(),
        });
    }
    let ps: Vec<f64> = ps.iter().map(|p| p / total).collect();
    let mean: f64 = xs.iter().zip(&ps).map(|(x, p)| x * p).sum();
    let var: f64 = xs
        .iter()
        .zip(&ps)
        .map(|(x, p)| (x - mean) * (x - mean) * p)
        .sum();
    if var < 1e-14 {
        return Ok(ClassicalGapReport {
            gap: 0.0,
            kl: 0.0,
            h_p: 0.0,
            h_gaussian: 0.0,
        });
    }
    let sigma = var.sqrt();

    // Shared grid: when the support is regularly spaced, subdivide its
    // native spacing so every support point stays exactly on the grid;
    // otherwise fall back to nearest-bin placement at sigma / 4.
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * sigma);
    let native = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let regular = native.is_finite()
        && native > 1e-6 * sigma
        && sorted.windows(2).all(|w| {
            let k = (w[1] - w[0]) / native;
            (k - k.round()).abs() < 1e-6
        });
    let (step, anchor) = if regular {
        let sub = (2.0 * native / sigma).ceil().max(1.0);
        (native / sub, sorted[0])
    } else {
        (sigma / 4.0, mean)
    };
    let lo_target = xs.iter().cloned().fold(mean - 6.0 * sigma, f64::min) - step;
    let hi_target = xs.iter().cloned().fold(mean + 6.0 * sigma, f64::max) + step;
    let k_lo = ((lo_target - anchor) / step).floor() as i64;
    let k_hi = ((hi_target - anchor) / step).ceil() as i64;
    let lo = anchor + k_lo as f64 * step;
    let bins = (k_hi - k_lo + 1) as usize;

    let mut p_grid = vec![0.0f64; bins];
    for (x, p) in xs.iter().zip(&ps) {
        let idx = (((x - lo) / step).round() as isize).clamp(0, bins as isize - 1) as usize;
        p_grid[idx] += p;
    }
    let gauss = |x: f64| {
        (-((x - mean) * (x - mean)) / (2.0 * var)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let q_grid: Vec<f64> = (0..bins).map(|k| gauss(lo + k as f64 * step) * step).collect();

    let h = |w: &[f64]| -> f64 {
        w.iter()
            .filter(|&&v| v > 1e-300)
            .map(|&v| -v * v.log2())
            .sum()
    };
    let h_p = h(&p_grid);
    let h_gaussian = h(&q_grid);
    let mut kl = 0.0;
    for (p, q) in p_grid.iter().zip(&q_grid) {
        if *p > 1e-300 {
            kl += p * (p / q.max(1e-300)).log2();
        }
    }
    Ok(ClassicalGapReport {
        gap: h_gaussian - h_p,
        kl,
        h_p,
        h_gaussian,
    })
}

/// Joint outcome masses of a heterodyne measurement on mode 0 and a
/// Q-homodyne on mode 1. The heterodyne axes are in amplitude coordinates,
/// the homodyne axis in shot-noise wire units; masses are indexed
/// `(iq * na + ip) * nb + k`.
#[derive(Debug, Clone)]
pub struct JointMasses {
    pub a_axis: Vec<f64>,
    pub b_axis: Vec<f64>,
    pub masses: Vec<f64>,
    pub total: f64,
}

/// Default homodyne axis for mode 1 of a state: six standard deviations,
/// 48 steps.
pub fn default_homodyne_axis(rho: &FockDensity) -> (Vec<f64>, f64) {
    let (_, g) = moments(rho);
    let sigma = g[(2, 2)].sqrt();
    let l = 6.0 * sigma;
    let step = l / 24.0;
    let n = (2.0 * l / step).round() as usize;
    ((0..=n).map(|k| -l + k as f64 * step).collect(), step)
}

/// Brute-force joint outcome distribution of (heterodyne on A, Q-homodyne
/// on B).
pub fn joint_het_hom_masses(
    rho: &FockDensity,
    a_grid: &HeterodyneGrid,
    b_axis: &[f64],
    b_step: f64,
) -> Result<JointMasses, FockError> {
    if rho.modes() != 2 {
        return Err(FockError::ModeMismatch {
            context: "joint outcome distribution needs a two-mode state".into(),
        });
    }
    let d = rho.dim();
    let m = rho.matrix();
    let w_a = a_grid.weight();
    let na = a_grid.axis.len();
    let nb = b_axis.len();

    // stage one: project the homodyne mode onto each quadrature amplitude
    let projected: Vec<DMatrix<C64>> = b_axis
        .par_iter()
        .map(|&xb| {
            let psi = quadrature_amplitudes(xb, d);
            let mut r = DMatrix::<C64>::zeros(d, d);
            for i in 0..d {
                for k in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..d {
                        if psi[j].abs() < 1e-160 {
                            continue;
                        }
                        for l in 0..d {
                            acc += m[(i * d + j, k * d + l)] * (psi[j] * psi[l]);
                        }
                    }
                    r[(i, k)] = acc;
                }
            }
            r
        })
        .collect();

    // stage two: contract with the coherent amplitudes of the heterodyne mode
    let mut masses = vec![0.0f64; na * na * nb];
    masses
        .par_chunks_mut(nb)
        .enumerate()
        .for_each(|(cell, out)| {
            let iq = cell / na;
            let ip = cell % na;
            let alpha = C64::new(a_grid.axis[iq], a_grid.axis[ip]);
            let amps = coherent_amplitudes(alpha, d);
            for (k, slot) in out.iter_mut().enumerate() {
                let r = &projected[k];
                let mut acc = 0.0;
                for i in 0..d {
                    let ci = amps[i].conj();
                    if ci.norm_sqr() < 1e-260 {
                        continue;
                    }
                    for kk in 0..d {
                        acc += (ci * amps[kk] * r[(i, kk)]).re;
                    }
                }
                *slot += acc * w_a * b_step;
            }
        });
    let total = masses.iter().sum();
    Ok(JointMasses {
        a_axis: a_grid.axis.clone(),
        b_axis: b_axis.to_vec(),
        masses,
        total,
    })
}

/// The same joint distribution for the Gaussian state with moments
/// `(d, g)`, evaluated on the same grid.
pub fn gaussian_het_hom_masses(
    dvec: &DVector<f64>,
    g: &DMatrix<f64>,
    a_grid: &HeterodyneGrid,
    b_axis: &[f64],
    b_step: f64,
) -> Result<JointMasses, FockError> {
    // outcome covariance in wire units: heterodyne adds one vacuum unit
    let cov = Matrix3::new(
        g[(0, 0)] + 1.0,
        g[(0, 1)],
        g[(0, 2)],
        g[(1, 0)],
        g[(1, 1)] + 1.0,
        g[(1, 2)],
        g[(2, 0)],
        g[(2, 1)],
        g[(2, 2)],
    );
    // physical outcome means in wire units
    let mean = Vector3::new(
        std::f64::consts::SQRT_2 * dvec[0],
        std::f64::consts::SQRT_2 * dvec[1],
        std::f64::consts::SQRT_2 * dvec[2],
    );
    let inv = cov.try_inverse().ok_or(FockError::InvalidParameter {
        name: "covariance",
        reason: "outcome covariance is singular".into(),
    })?;
    let det = cov.determinant();
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).powi(3) * det).sqrt();
    // wire coordinates are x = 2 * alpha for the heterodyne axes, so a
    // cell carries dx^2 dy = 4 step^2 b_step
    let w_cell = 4.0 * a_grid.step * a_grid.step * b_step;

    let na = a_grid.axis.len();
    let nb = b_axis.len();
    let mut masses = vec![0.0f64; na * na * nb];
    masses
        .par_chunks_mut(nb)
        .enumerate()
        .for_each(|(cell, out)| {
            let iq = cell / na;
            let ip = cell % na;
            let xq = 2.0 * a_grid.axis[iq];
            let xp = 2.0 * a_grid.axis[ip];
            for (k, slot) in out.iter_mut().enumerate() {
                let v = Vector3::new(xq, xp, b_axis[k]) - mean;
                let quad = (v.transpose() * inv * v)[(0, 0)];
                *slot = norm * (-0.5 * quad).exp() * w_cell;
            }
        });
    let total = masses.iter().sum();
    Ok(JointMasses {
        a_axis: a_grid.axis.clone(),
        b_axis: b_axis.to_vec(),
        masses,
        total,
    })
}

/// Discrete mutual information in bits between the heterodyne pair
/// `(aq, ap)` and the homodyne outcome, after normalizing the masses.
pub fn mutual_information_of(j: &JointMasses) -> f64 {
    let na = j.a_axis.len();
    let nb = j.b_axis.len();
    let total = j.total;
    let mut p_a = vec![0.0f64; na * na];
    let mut p_b = vec![0.0f64; nb];
    for cell in 0..na * na {
        for k in 0..nb {
            let v = j.masses[cell * nb + k] / total;
            p_a[cell] += v;
            p_b[k] += v;
        }
    }
    let mut mi = 0.0;
    for cell in 0..na * na {
        if p_a[cell] <= 0.0 {
            continue;
        }
        for k in 0..nb {
            let v = j.masses[cell * nb + k] / total;
            if v > 1e-300 {
                mi += v * (v / (p_a[cell] * p_b[k])).log2();
            }
        }
    }
    mi
}
