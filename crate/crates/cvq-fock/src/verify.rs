//! Verification harness: randomized state families, the Holevo-gap check
//! against the Gaussian pipeline, brute-force key-rate evaluation, and the
//! JSON-line case records emitted by batch runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{
    classical_gap, default_homodyne_axis, gaussian_het_hom_masses, joint_het_hom_masses,
    mutual_information_of,
};
use crate::density::{entropy_fock, moments, realize_with_budget, FockDensity};
use crate::error::FockError;
use crate::gap::{extremality_gap, GapOptions};
use crate::ops::quadrature_amplitudes;
use crate::povm::{heterodyne_condition_fock, HeterodyneGrid};
use crate::spec::StateSpec;
use cvq_core::keyrate::{holevo_environment_from_state, post_channel_state, ProtocolConfig};
use cvq_core::MeasurementKind;

/// One verification result, serialized as a JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub spec: String,
    pub cutoff: usize,
    pub tail_mass: f64,
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CaseRecord {
    /// `pass` means `value >= -tolerance` for one-sided gap quantities.
    fn gap(case_id: String, spec: String, cutoff: usize, tail: f64, quantity: &str, value: f64, tol: f64) -> Self {
        CaseRecord {
            case_id,
            spec,
            cutoff,
            tail_mass: tail,
            quantity: quantity.into(),
            value,
            tolerance: tol,
            pass: value >= -tol,
        }
    }

    fn bound(case_id: String, spec: String, cutoff: usize, tail: f64, quantity: &str, value: f64, tol: f64) -> Self {
        CaseRecord {
            case_id,
            spec,
            cutoff,
            tail_mass: tail,
            quantity: quantity.into(),
            value,
            tolerance: tol,
            pass: value.abs() <= tol,
        }
    }
}

/// Knobs shared by the batch runners.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub tail_budget: f64,
    pub defect_budget: f64,
    /// Cutoff ceiling for randomly generated two-mode cases, bounding the
    /// memory of one dense matrix.
    pub max_two_mode_cutoff: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tail_budget: crate::DEFAULT_TAIL_BUDGET,
            defect_budget: 1e-4,
            max_two_mode_cutoff: 32,
        }
    }
}

/// Realize a spec, escalating the cutoff until the tail budget is met.
pub fn realize_adaptive(
    spec: &StateSpec,
    start_cutoff: usize,
    cap: usize,
    tail_budget: f64,
) -> Result<FockDensity, FockError> {
    let mut cutoff = start_cutoff;
    loop {
        match realize_with_budget(spec, cutoff, tail_budget) {
            Ok(rho) => return Ok(rho),
            Err(FockError::Truncation {
                suggested_cutoff, ..
            }) if cutoff < cap => {
                cutoff = suggested_cutoff.clamp(cutoff + 2, cap);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Random state expressions drawn from the grammar's atoms and composites,
/// with parameters bounded so moderate cutoffs stay within budget. Draws
/// that cannot be realized at any cutoff (photon subtraction of a
/// photon-free state) are discarded and redrawn.
pub fn random_specs(seed: u64, count: usize) -> Vec<StateSpec> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let spec = random_spec(&mut rng);
        if spec_is_buildable(&spec) {
            out.push(spec);
        }
    }
    out
}

fn spec_is_buildable(spec: &StateSpec) -> bool {
    // a loose trial build surfaces structural failures; truncation alone
    // is fine because the batteries escalate the cutoff
    match realize_with_budget(spec, 12, f64::INFINITY) {
        Ok(_) => true,
        Err(FockError::Truncation { .. }) => true,
        Err(_) => false,
    }
}

fn random_atom<R: Rng>(rng: &mut R) -> StateSpec {
    match rng.random_range(0..5) {
        0 => StateSpec::Fock(rng.random_range(0..=3)),
        1 => StateSpec::Coherent {
            re: rng.random_range(-1.2..1.2),
            im: rng.random_range(-1.2..1.2),
        },
        2 => StateSpec::Thermal {
            nbar: rng.random_range(0.05..1.2),
        },
        3 => StateSpec::Squeezed {
            r: rng.random_range(0.05..0.6) * if rng.random::<bool>() { 1.0 } else { -1.0 },
        },
        _ => StateSpec::Fock(rng.random_range(0..=2)),
    }
}

fn random_single<R: Rng>(rng: &mut R, depth: usize) -> StateSpec {
    if depth == 0 {
        return random_atom(rng);
    }
    match rng.random_range(0..6) {
        0 | 1 => random_atom(rng),
        2 => {
            let k = rng.random_range(2..=3);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            StateSpec::Mix(
                raw.iter()
                    .map(|w| (w / total, random_single(rng, depth - 1)))
                    .collect(),
            )
        }
        3 => StateSpec::Loss {
            t: rng.random_range(0.3..0.95),
            inner: Box::new(random_single(rng, depth - 1)),
        },
        4 => StateSpec::Dephase {
            p: rng.random_range(0.05..0.6),
            inner: Box::new(random_single(rng, depth - 1)),
        },
        _ => {
            // keep photon subtraction away from photon-free states
            let inner = match random_single(rng, depth - 1) {
                StateSpec::Fock(0) => StateSpec::Fock(1),
                StateSpec::Coherent { re, im } if re.abs() + im.abs() < 0.2 => {
                    StateSpec::Coherent { re: 0.5, im }
                }
                other => other,
            };
            StateSpec::PhotonSub(Box::new(inner))
        }
    }
}

fn random_two_mode<R: Rng>(rng: &mut R, depth: usize) -> StateSpec {
    if depth == 0 {
        return StateSpec::Tmsv {
            v: rng.random_range(1.05..2.2),
        };
    }
    match rng.random_range(0..5) {
        0 => StateSpec::Tmsv {
            v: rng.random_range(1.05..2.2),
        },
        1 => StateSpec::Loss {
            t: rng.random_range(0.4..0.95),
            inner: Box::new(random_two_mode(rng, depth - 1)),
        },
        2 => StateSpec::Dephase {
            p: rng.random_range(0.05..0.5),
            inner: Box::new(random_two_mode(rng, depth - 1)),
        },
        3 => {
            let w = rng.random_range(0.2..0.8);
            let first = random_two_mode(rng, depth - 1);
            let second = random_two_mode(rng, depth - 1);
            StateSpec::Mix(vec![(w, first), (1.0 - w, second)])
        }
        _ => StateSpec::PhotonSub(Box::new(random_two_mode(rng, depth - 1))),
    }
}

fn random_spec<R: Rng>(rng: &mut R) -> StateSpec {
    let two_mode = rng.random::<f64>() < 0.3;
    if two_mode {
        let depth = rng.random_range(1..=2);
        random_two_mode(rng, depth)
    } else {
        let depth = rng.random_range(1..=3);
        random_single(rng, depth)
    }
}

/// The extremality battery: entropy gaps (and the single-mode dual-path
/// identity) over a randomized admitted family.
pub fn extremality_battery(seed: u64, count: usize, cfg: &VerifyConfig) -> Vec<CaseRecord> {
    let specs = random_specs(seed, count);
    specs
        .par_iter()
        .enumerate()
        .flat_map(|(k, spec)| run_extremality_case(k, spec, cfg))
        .collect()
}

fn run_extremality_case(k: usize, spec: &StateSpec, cfg: &VerifyConfig) -> Vec<CaseRecord> {
    let two_mode = spec.modes().map(|m| m == 2).unwrap_or(false);
    // single-mode cases also feed the dual-path identity, whose relative
    // entropy term is sensitive to the tail through log(rho_tilde); give
    // them a much tighter budget
    let (start, cap, budget) = if two_mode {
        (20, cfg.max_two_mode_cutoff, cfg.tail_budget)
    } else {
        (28, 140, cfg.tail_budget.min(1e-9))
    };
    let rho = match realize_adaptive(spec, start, cap, budget) {
        Ok(r) => r,
        Err(e) => {
            return vec![CaseRecord {
                case_id: format!("extremality-{k:04}"),
                spec: spec.to_string(),
                cutoff: 0,
                tail_mass: f64::NAN,
                quantity: format!("realization_error: {e}"),
                value: f64::NAN,
                tolerance: 0.0,
                pass: false,
            }]
        }
    };
    let opts = GapOptions {
        with_relative_entropy: !two_mode,
    };
    match extremality_gap(&rho, &opts) {
        Ok(rep) => {
            let mut out = vec![CaseRecord::gap(
                format!("extremality-{k:04}"),
                spec.to_string(),
                rho.cutoff(),
                rep.tail_mass,
                "delta_h_bits",
                rep.delta_h,
                1e-6,
            )];
            if let Some(rel) = rep.relative_entropy {
                out.push(CaseRecord::bound(
                    format!("dualpath-{k:04}"),
                    spec.to_string(),
                    rho.cutoff(),
                    rep.tail_mass,
                    "gap_minus_relative_entropy_bits",
                    rep.delta_h - rel,
                    1e-4,
                ));
            }
            out
        }
        Err(e) => vec![CaseRecord {
            case_id: format!("extremality-{k:04}"),
            spec: spec.to_string(),
            cutoff: rho.cutoff(),
            tail_mass: rho.tail_mass(),
            quantity: format!("gap_error: {e}"),
            value: f64::NAN,
            tolerance: 0.0,
            pass: false,
        }],
    }
}

/// Contraction battery: the entropy gap never grows under photon loss.
pub fn contraction_battery(seed: u64, count: usize, cfg: &VerifyConfig) -> Vec<CaseRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xc0ffee);
    let cases: Vec<(StateSpec, f64)> = (0..count)
        .map(|_| (random_single(&mut rng, 2), rng.random_range(0.2..0.98)))
        .collect();
    cases
        .par_iter()
        .enumerate()
        .map(|(k, (spec, t))| {
            let id = format!("contraction-{k:04}");
            match realize_adaptive(spec, 24, 120, cfg.tail_budget)
                .and_then(|rho| crate::gap::contraction_check(&rho, *t).map(|g| (rho, g)))
            {
                Ok((rho, (before, after))) => CaseRecord::gap(
                    id,
                    format!("loss({t:.3}, {spec})"),
                    rho.cutoff(),
                    rho.tail_mass(),
                    "gap_contraction_bits",
                    before - after,
                    1e-4,
                ),
                Err(e) => CaseRecord {
                    case_id: id,
                    spec: spec.to_string(),
                    cutoff: 0,
                    tail_mass: f64::NAN,
                    quantity: format!("error: {e}"),
                    value: f64::NAN,
                    tolerance: 0.0,
                    pass: false,
                },
            }
        })
        .collect()
}

/// Classical battery: homodyne outcome distributions of random single-mode
/// states have nonnegative entropy gap against their Gaussianification.
pub fn classical_battery(seed: u64, count: usize, cfg: &VerifyConfig) -> Vec<CaseRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xdead);
    let specs: Vec<StateSpec> = (0..count).map(|_| random_single(&mut rng, 2)).collect();
    specs
        .par_iter()
        .enumerate()
        .map(|(k, spec)| {
            let id = format!("classical-{k:04}");
            match realize_adaptive(spec, 24, 120, cfg.tail_budget) {
                Ok(rho) => {
                    let (xs, ps) = homodyne_outcome_distribution(&rho);
                    match classical_gap(&xs, &ps) {
                        Ok(rep) => CaseRecord::gap(
                            id,
                            spec.to_string(),
                            rho.cutoff(),
                            rho.tail_mass(),
                            "classical_gap_bits",
                            rep.gap,
                            1e-6,
                        ),
                        Err(e) => CaseRecord {
                            case_id: id,
                            spec: spec.to_string(),
                            cutoff: rho.cutoff(),
                            tail_mass: rho.tail_mass(),
                            quantity: format!("error: {e}"),
                            value: f64::NAN,
                            tolerance: 0.0,
                            pass: false,
                        },
                    }
                }
                Err(e) => CaseRecord {
                    case_id: id,
                    spec: spec.to_string(),
                    cutoff: 0,
                    tail_mass: f64::NAN,
                    quantity: format!("error: {e}"),
                    value: f64::NAN,
                    tolerance: 0.0,
                    pass: false,
                },
            }
        })
        .collect()
}

/// Q-quadrature outcome distribution of a single-mode state on its default
/// six-sigma grid.
pub fn homodyne_outcome_distribution(rho: &FockDensity) -> (Vec<f64>, Vec<f64>) {
    let (_, g) = moments(rho);
    let sigma = g[(0, 0)].max(1e-6).sqrt();
    let l = 6.0 * sigma;
    let step = l / 24.0;
    let n = (2.0 * l / step).round() as usize;
    let axis: Vec<f64> = (0..=n).map(|k| -l + k as f64 * step).collect();
    let d = rho.dim();
    let m = rho.matrix();
    let ps: Vec<f64> = axis
        .iter()
        .map(|&x| {
            let psi = quadrature_amplitudes(x, d);
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += (m[(i, j)] * psi[i] * psi[j]).re;
                }
            }
            acc.max(0.0) * step
        })
        .collect();
    (axis, ps)
}

/// Holevo-information comparison between the Gaussian pipeline applied to
/// the state's own moments and the brute-force discretized-heterodyne
/// accounting, conditioning on mode 0.
#[derive(Debug, Clone)]
pub struct HolevoGapReport {
    pub chi_gaussian: f64,
    pub chi_fock: f64,
    /// `chi_gaussian - chi_fock`; the extremality theorem makes this
    /// nonnegative for matched moments.
    pub delta_chi: f64,
    pub h_ab_fock: f64,
    pub completeness_defect: f64,
    /// Largest moment deviation from the reference state, when one was
    /// supplied.
    pub moment_deviation: Option<f64>,
}

pub fn holevo_gap_check(
    rho: &FockDensity,
    reference: Option<(&ProtocolConfig<f64>, f64, f64)>,
    defect_budget: f64,
) -> Result<HolevoGapReport, FockError> {
    let (d, g) = moments(rho);
    let state = cvq_core::GaussianState::new(d.clone(), g.clone())?;

    let moment_deviation = match reference {
        Some((cfg, t, xi)) => {
            let want = post_channel_state(cfg, t, xi)?;
            let dev_g = (want.covariance() - &g)
                .iter()
                .fold(0.0f64, |a, &x| a.max(x.abs()));
            let dev_d = (want.displacement() - &d)
                .iter()
                .fold(0.0f64, |a, &x| a.max(x.abs()));
            let dev = dev_g.max(dev_d);
            if dev > 1e-6 {
                return Err(FockError::MomentMismatch {
                    deviation: dev,
                    limit: 1e-6,
                });
            }
            Some(dev)
        }
        None => None,
    };

    let chi_gaussian =
        holevo_environment_from_state(&state, 0, MeasurementKind::Heterodyne)?;
    let grid = HeterodyneGrid::for_state(rho, 0)?;
    let cond = heterodyne_condition_fock(rho, 0, &grid, defect_budget)?;
    let h_ab_fock = entropy_fock(rho);
    let chi_fock = h_ab_fock - cond.conditional_entropy();
    Ok(HolevoGapReport {
        chi_gaussian,
        chi_fock,
        delta_chi: chi_gaussian - chi_fock,
        h_ab_fock,
        completeness_defect: cond.completeness_defect,
        moment_deviation,
    })
}

/// Mutual-information comparison on the discretized joint outcome
/// distribution (heterodyne on mode 0, Q-homodyne on mode 1): the Gaussian
/// side never exceeds the true side for matched moments.
#[derive(Debug, Clone)]
pub struct MutualInformationReport {
    pub i_fock: f64,
    pub i_gaussian: f64,
    pub mass_defect: f64,
}

pub fn mutual_information_check(rho: &FockDensity) -> Result<MutualInformationReport, FockError> {
    let a_grid = HeterodyneGrid::for_state(rho, 0)?;
    let (b_axis, b_step) = default_homodyne_axis(rho);
    let jm = joint_het_hom_masses(rho, &a_grid, &b_axis, b_step)?;
    let (d, g) = moments(rho);
    let gm = gaussian_het_hom_masses(&d, &g, &a_grid, &b_axis, b_step)?;
    Ok(MutualInformationReport {
        i_fock: mutual_information_of(&jm),
        i_gaussian: mutual_information_of(&gm),
        mass_defect: (jm.total - 1.0).abs().max((gm.total - 1.0).abs()),
    })
}

/// Brute-force key-rate bound for the coherent-preparation, homodyne-Bob,
/// direct-reconciliation protocol: mutual information from the joint
/// outcome grid minus the discretized-heterodyne Holevo term.
#[derive(Debug, Clone)]
pub struct OracleRate {
    pub i_xy: f64,
    pub chi_xe: f64,
    pub k_coll: f64,
}

pub fn oracle_rate_dr_coherent_homodyne(
    v: f64,
    t: f64,
    cutoff: usize,
    defect_budget: f64,
) -> Result<OracleRate, FockError> {
    let spec = StateSpec::Loss {
        t,
        inner: Box::new(StateSpec::Tmsv { v }),
    };
    let rho = realize_with_budget(&spec, cutoff, 1e-8)?;
    let hg = holevo_gap_check(&rho, None, defect_budget)?;
    let mi = mutual_information_check(&rho)?;
    Ok(OracleRate {
        i_xy: mi.i_fock,
        chi_xe: hg.chi_fock,
        k_coll: mi.i_fock - hg.chi_fock,
    })
}

/// The moment-matched attack family used by the main-theorem check: the
/// Gaussian member plus dephased, photon-subtracted and mixed departures,
/// all sharing the transmitted-mode loss structure.
pub fn attack_family(v: f64, t: f64) -> Vec<StateSpec> {
    let base = || StateSpec::Loss {
        t,
        inner: Box::new(StateSpec::Tmsv { v }),
    };
    let mut family = vec![base()];
    for p in [0.1, 0.2, 0.3, 0.5] {
        family.push(StateSpec::Dephase {
            p,
            inner: Box::new(base()),
        });
    }
    family.push(StateSpec::PhotonSub(Box::new(base())));
    family.push(StateSpec::Dephase {
        p: 0.15,
        inner: Box::new(StateSpec::PhotonSub(Box::new(base()))),
    });
    for (w, dv) in [(0.8, 0.25), (0.6, 0.15), (0.45, 0.35)] {
        family.push(StateSpec::Mix(vec![
            (w, base()),
            (
                1.0 - w,
                StateSpec::Loss {
                    t,
                    inner: Box::new(StateSpec::Tmsv { v: v + dv }),
                },
            ),
        ]));
    }
    family.push(StateSpec::Mix(vec![
        (0.7, base()),
        (
            0.3,
            StateSpec::Dephase {
                p: 0.4,
                inner: Box::new(base()),
            },
        ),
    ]));
    family
}
