//! Eigenvalue data on periodic orbits and the constant / narrow periodic-data
//! scans.

use nalgebra::Schur;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::CocycleSpec;
use crate::error::{Error, Result};
use crate::linalg::{binomial, compound, subsets, Matrix, ScaledMatrix, COMPOUND_LIMIT};
use crate::sft::PeriodicOrbit;

const MODULE: &str = "periodic_data";

/// Spread below which periodic data is reported as constant.
pub const DEFAULT_TOL_CONST: f64 = 1e-8;
const SCHUR_MAX_ITER: usize = 10_000;
const MAX_OFFENDERS: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicDatum {
    pub orbit: String,
    pub period: usize,
    /// `log|γ_i(p)|`, descending; `-inf` for zero eigenvalues.
    pub log_moduli: Vec<f64>,
    /// `|γ_i(p)|`, descending.
    pub moduli: Vec<f64>,
    /// `λ_i(p) = log|γ_i(p)| / n`.
    pub exponents: Vec<f64>,
}

fn log_spectral_radius(m: &ScaledMatrix, word: &str) -> Result<f64> {
    if m.log_scale == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let rho = if m.mat.nrows() == 1 {
        m.mat[(0, 0)].abs()
    } else {
        let schur = Schur::try_new(m.mat.clone(), f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::EigenNonConvergence { word: word.to_string() })?;
        schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    Ok(if rho > 0.0 { rho.ln() + m.log_scale } else { f64::NEG_INFINITY })
}

fn sorted_log_moduli(m: &ScaledMatrix, word: &str) -> Result<Vec<f64>> {
    let schur = Schur::try_new(m.mat.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::EigenNonConvergence { word: word.to_string() })?;
    let mut v: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| if z.norm() > 0.0 { z.norm().ln() + m.log_scale } else { f64::NEG_INFINITY })
        .collect();
    v.sort_by(|a, b| b.partial_cmp(a).expect("no NaN"));
    Ok(v)
}

/// Eigenvalue moduli of `Aⁿ(p)` for the orbit's base point.
///
/// `|γ_1⋯γ_q|` is the spectral radius of the `q`-th compound of `Aⁿ(p)`, so
/// each modulus is a ratio of compound spectral radii computed on log-rescaled
/// products; this keeps small moduli accurate next to large ones.
pub fn eigen_moduli(spec: &CocycleSpec, orbit: &PeriodicOrbit) -> Result<PeriodicDatum> {
    let d = spec.dimension();
    let n = orbit.period;
    let word = orbit.label();
    let p = orbit.point();
    let gens = spec.generators(&p, 0, n)?;
    let mut log_moduli = if (1..=d).all(|q| binomial(d, q) <= COMPOUND_LIMIT) {
        let mut out = Vec::with_capacity(d);
        let mut prev = 0.0;
        for q in 1..=d {
            let idx = subsets(d, q);
            let mut prod = ScaledMatrix::identity(idx.len());
            for a in &gens {
                prod.left_multiply(&compound(a, &idx));
            }
            let cur = log_spectral_radius(&prod, &word)?;
            out.push(if prev == f64::NEG_INFINITY { f64::NEG_INFINITY } else { cur - prev });
            prev = cur;
        }
        out
    } else {
        let mut prod = ScaledMatrix::identity(d);
        for a in &gens {
            prod.left_multiply(a);
        }
        sorted_log_moduli(&prod, &word)?
    };
    for i in 1..d {
        if log_moduli[i] > log_moduli[i - 1] {
            log_moduli[i] = log_moduli[i - 1];
        }
    }
    Ok(PeriodicDatum {
        orbit: word,
        period: n,
        moduli: log_moduli.iter().map(|l| l.exp()).collect(),
        exponents: exponents_from_log(&log_moduli, n),
        log_moduli,
    })
}

fn exponents_from_log(log_moduli: &[f64], n: usize) -> Vec<f64> {
    log_moduli.iter().map(|l| l / n as f64).collect()
}

/// `λ_i = log|γ_i| / n`; zero moduli give `-inf`.
pub fn exponents_at(datum: &PeriodicDatum) -> Vec<f64> {
    datum
        .moduli
        .iter()
        .map(|&m| if m > 0.0 { m.ln() / datum.period as f64 } else { f64::NEG_INFINITY })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Offender {
    pub orbit: String,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NarrownessReport {
    pub k: usize,
    pub max_period: usize,
    pub orbit_count: usize,
    /// Spread midpoints `λ̂_1..λ̂_{k+1}` (fewer when `k = d`).
    pub lambda_hat: Vec<f64>,
    /// Largest half-spread over the indices in `lambda_hat`.
    pub delta_hat: f64,
    pub tol_const: f64,
    pub constant: bool,
    /// `λ̂_k - λ̂_{k+1} > 2 δ̂`.
    pub viable: bool,
    /// Set for non-injective cocycles, where the data carries no guarantee.
    pub advisory_only: bool,
    pub worst_offenders: Vec<Offender>,
    pub data: Vec<PeriodicDatum>,
}

impl NarrownessReport {
    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda_hat[i - 1]
    }
}

pub fn scan_narrowness(spec: &CocycleSpec, k: usize, max_period: usize) -> Result<NarrownessReport> {
    scan_narrowness_with(spec, k, max_period, DEFAULT_TOL_CONST)
}

/// Eigen data on every prime orbit of period `<= max_period`; `λ̂_i` is the
/// midpoint of the observed range of `λ_i(p)` so `δ̂` is the least `δ` for which
/// the scanned data is `δ`-narrow.
pub fn scan_narrowness_with(spec: &CocycleSpec, k: usize, max_period: usize, tol_const: f64) -> Result<NarrownessReport> {
    let d = spec.dimension();
    if k == 0 || k > d {
        return Err(Error::domain(MODULE, format!("index k = {k} outside 1..={d}")));
    }
    let orbits = spec.system().prime_orbits_up_to(max_period)?;
    if orbits.is_empty() {
        return Err(Error::domain(MODULE, format!("no periodic orbits of period <= {max_period}")));
    }
    let data: Vec<PeriodicDatum> = orbits
        .par_iter()
        .map(|o| eigen_moduli(spec, o))
        .collect::<Result<_>>()?;
    let m = (k + 1).min(d);
    let mut lambda_hat = Vec::with_capacity(m);
    let mut delta_hat: f64 = 0.0;
    for i in 0..m {
        let (lo, hi) = data
            .iter()
            .map(|p| p.exponents[i])
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo > hi {
            lambda_hat.push(f64::NEG_INFINITY);
        } else {
            lambda_hat.push((hi + lo) / 2.0);
            delta_hat = delta_hat.max((hi - lo) / 2.0);
        }
    }
    let mut offenders: Vec<Offender> = data
        .iter()
        .map(|p| Offender {
            orbit: p.orbit.clone(),
            deviation: (0..m)
                .filter(|&i| p.exponents[i].is_finite())
                .map(|i| (p.exponents[i] - lambda_hat[i]).abs())
                .fold(0.0, f64::max),
        })
        .filter(|o| o.deviation > 0.0)
        .collect();
    offenders.sort_by(|a, b| b.deviation.partial_cmp(&a.deviation).expect("finite"));
    offenders.truncate(MAX_OFFENDERS);
    let viable = if k < d {
        lambda_hat[k - 1] - lambda_hat[k] > 2.0 * delta_hat
    } else {
        true
    };
    Ok(NarrownessReport {
        k,
        max_period,
        orbit_count: data.len(),
        lambda_hat,
        delta_hat,
        tol_const,
        constant: delta_hat <= tol_const,
        viable,
        advisory_only: !spec.is_injective(),
        worst_offenders: offenders,
        data,
    })
}

/// `|det Aⁿ(p)|` on the log scale, for cross-checks.
pub fn log_abs_det(gens: &[Matrix]) -> f64 {
    gens.iter().map(|a| a.determinant().abs().ln()).sum()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cocycle::LogModuli;
    use crate::sft::{SftSystem, Symbol};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn orbit(sys: &SftSystem, w: &[Symbol]) -> PeriodicOrbit {
        PeriodicOrbit::new(sys, w.to_vec()).unwrap()
    }

    fn conj_spec(log_moduli: LogModuli) -> CocycleSpec {
        let p0 = m2(1.0, 0.5, 0.0, 1.0);
        let p1 = m2(1.0, 0.0, 0.7, 1.2);
        CocycleSpec::conjugated_diagonal(SftSystem::full_shift(2), log_moduli, 0, vec![(vec![0], p0), (vec![1], p1)], 10.0)
            .unwrap()
    }

    pub(crate) fn swap_spec() -> CocycleSpec {
        CocycleSpec::one_step(SftSystem::full_shift(2), vec![m2(2.0, 0.0, 0.0, 0.5), m2(0.0, 2.0, 0.5, 0.0)]).unwrap()
    }

    #[test]
    fn moduli_examples() {
        let sys = SftSystem::full_shift(2);
        let c = CocycleSpec::constant(sys.clone(), m2(2.0, 0.0, 0.0, 0.5)).unwrap();
        let dat = eigen_moduli(&c, &orbit(&sys, &[0, 1, 1])).unwrap();
        assert!((dat.moduli[0] - 8.0).abs() < 1e-12 && (dat.moduli[1] - 0.125).abs() < 1e-15);
        assert!((dat.exponents[0] - LN_2).abs() < 1e-15 && (dat.exponents[1] + LN_2).abs() < 1e-15);

        let cd = conj_spec(LogModuli::Constant(vec![1.0, -1.0]));
        for w in [&[0u8][..], &[0, 1], &[0, 0, 1, 1, 1]] {
            let dat = eigen_moduli(&cd, &orbit(&sys, w)).unwrap();
            let n = w.len() as f64;
            assert!((dat.log_moduli[0] - n).abs() < 1e-12);
            assert!((dat.log_moduli[1] + n).abs() < 1e-12);
        }

        let r = m2(FRAC_PI_2.cos(), -FRAC_PI_2.sin(), FRAC_PI_2.sin(), FRAC_PI_2.cos());
        let rot = CocycleSpec::one_step(sys.clone(), vec![r.clone(), r]).unwrap();
        let dat = eigen_moduli(&rot, &orbit(&sys, &[0, 1, 1, 0])).unwrap();
        assert!((dat.moduli[0] - 1.0).abs() < 1e-12 && (dat.moduli[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_examples() {
        let mk = |moduli: Vec<f64>, period| PeriodicDatum {
            orbit: String::new(),
            period,
            log_moduli: moduli.iter().map(|m: &f64| m.ln()).collect(),
            moduli,
            exponents: vec![],
        };
        let e = exponents_at(&mk(vec![5f64.exp(), (-5f64).exp()], 5));
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] + 1.0).abs() < 1e-15);
        assert_eq!(exponents_at(&mk(vec![1.0, 1.0], 7)), vec![0.0, 0.0]);
        let e = exponents_at(&mk(vec![8.0, 0.125], 3));
        assert!((e[0] - 0.693147).abs() < 1e-6 && (e[1] + 0.693147).abs() < 1e-6);
        assert_eq!(exponents_at(&mk(vec![1.0, 0.0], 2))[1], f64::NEG_INFINITY);
    }

    #[test]
    fn narrowness_constant_families() {
        let cd = conj_spec(LogModuli::Constant(vec![1.0, -1.0]));
        let rep = scan_narrowness(&cd, 1, 8).unwrap();
        assert!(rep.delta_hat <= 1e-10);
        assert!((rep.lambda(1) - 1.0).abs() < 1e-10 && (rep.lambda(2) + 1.0).abs() < 1e-10);
        assert!(rep.constant && rep.viable && !rep.advisory_only);

        let c = CocycleSpec::constant(SftSystem::golden_mean(), m2(3.0, 1.0, 0.0, 0.5)).unwrap();
        let rep = scan_narrowness(&c, 1, 6).unwrap();
        assert_eq!(rep.delta_hat, 0.0);
        assert!(rep.worst_offenders.is_empty());
    }

    #[test]
    fn swap_family_half_spread() {
        // orbit 0: exponents ±log 2; orbit 1: A² = I, exponents 0
        let rep = scan_narrowness(&swap_spec(), 1, 6).unwrap();
        assert!((rep.delta_hat - LN_2 / 2.0).abs() < 1e-12);
        assert!(!rep.constant);
        assert!(!rep.viable);
    }

    #[test]
    fn narrow_perturbation() {
        let d = 0.01;
        let cd = conj_spec(LogModuli::PerSymbol(vec![vec![1.0 + d, -1.0 - d], vec![1.0 - d, -1.0 + d]]));
        let rep = scan_narrowness(&cd, 1, 8).unwrap();
        assert!((rep.delta_hat - d).abs() < 1e-10);
        assert!(rep.viable && !rep.constant);
    }

    #[test]
    fn galerkin_is_advisory() {
        let g = CocycleSpec::weighted_shift(SftSystem::full_shift(2), 5, vec![1.0, 2.0], 0.8).unwrap();
        let rep = scan_narrowness(&g, 1, 4).unwrap();
        assert!(rep.advisory_only);
        assert!(rep.data.iter().all(|p| p.exponents.iter().all(|e| *e == f64::NEG_INFINITY)));
    }

    #[test]
    fn no_orbits_is_domain_error() {
        let alternating = SftSystem::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let spec = CocycleSpec::constant(alternating, Matrix::identity(2, 2)).unwrap();
        assert!(matches!(scan_narrowness(&spec, 1, 1), Err(Error::Domain { .. })));
        assert!(scan_narrowness(&spec, 1, 2).is_ok());
    }

    #[test]
    fn delta_hat_monotone_in_period() {
        let spec = swap_spec();
        let mut last = 0.0;
        for n in 1..=8 {
            let d = scan_narrowness(&spec, 1, n).unwrap().delta_hat;
            assert!(d >= last);
            last = d;
        }
    }

    fn random_spec(entries: &[f64]) -> CocycleSpec {
        let a = Matrix::from_row_slice(3, 3, &entries[..9]);
        let b = Matrix::from_row_slice(3, 3, &entries[9..]);
        CocycleSpec::one_step(SftSystem::full_shift(2), vec![a, b]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rotation_invariance(entries in proptest::collection::vec(-2.0f64..2.0, 18), code in 0u32..64, len in 2usize..6) {
            let spec = random_spec(&entries);
            prop_assume!(spec.is_injective());
            let w: Vec<Symbol> = (0..len).map(|i| ((code >> i) & 1) as Symbol).collect();
            let base = eigen_moduli(&spec, &PeriodicOrbit { word: w.clone(), period: len }).unwrap();
            let scale = base.moduli[0];
            for r in 1..len {
                let mut rw = w.clone();
                rw.rotate_left(r);
                let rot = eigen_moduli(&spec, &PeriodicOrbit { word: rw, period: len }).unwrap();
                for i in 0..3 {
                    prop_assert!((rot.moduli[i] - base.moduli[i]).abs() <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn determinant_identity(entries in proptest::collection::vec(-2.0f64..2.0, 18), code in 0u32..64, len in 1usize..6) {
            let spec = random_spec(&entries);
            prop_assume!(spec.is_injective());
            let w: Vec<Symbol> = (0..len).map(|i| ((code >> i) & 1) as Symbol).collect();
            let o = PeriodicOrbit { word: w, period: len };
            let dat = eigen_moduli(&spec, &o).unwrap();
            let gens = spec.generators(&o.point(), 0, len).unwrap();
            let sum: f64 = dat.log_moduli.iter().sum();
            prop_assert!((sum - log_abs_det(&gens)).abs() <= 1e-8 * (1.0 + sum.abs()));
        }

        #[test]
        fn power_consistency(seed_word in 0u32..32, len in 1usize..5) {
            let spec = conj_spec(LogModuli::Constant(vec![0.7, -0.4]));
            let w: Vec<Symbol> = (0..len).map(|i| ((seed_word >> i) & 1) as Symbol).collect();
            let mut ww = w.clone();
            ww.extend(&w);
            let one = eigen_moduli(&spec, &PeriodicOrbit { word: w, period: len }).unwrap();
            let two = eigen_moduli(&spec, &PeriodicOrbit { word: ww, period: 2 * len }).unwrap();
            for i in 0..2 {
                prop_assert!((two.moduli[i] - one.moduli[i].powi(2)).abs() <= 1e-8 * two.moduli[i]);
            }
        }
    }
}
