//! Finite-time volume growth rates, exponent estimates, uniform convergence
//! of Gelfand exponents and the semicontinuity probe along closed orbits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::CocycleSpec;
use crate::error::{Error, Result};
use crate::periodic::{eigen_moduli, NarrownessReport};
use crate::sft::{PeriodicOrbit, Point};
use crate::snumbers::gelfand_profile;

const MODULE: &str = "lyapunov";

/// Center and tail lengths used for random sample points.
pub const SAMPLE_CENTER: std::ops::RangeInclusive<usize> = 1..=24;
pub const SAMPLE_TAIL: std::ops::RangeInclusive<usize> = 1..=8;

/// Where sample points come from.
#[derive(Debug, Clone)]
pub enum PointSource {
    /// `count` random eventually periodic points drawn from the seed.
    Random { count: usize },
    Points(Vec<Point>),
}

impl PointSource {
    pub fn points(&self, spec: &CocycleSpec, seed: u64) -> Vec<Point> {
        match self {
            PointSource::Points(p) => p.clone(),
            PointSource::Random { count } => random_points(spec, *count, seed),
        }
    }
}

pub fn random_points(spec: &CocycleSpec, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| spec.system().random_point(&mut rng, SAMPLE_CENTER, SAMPLE_TAIL))
        .collect()
}

/// `(1/n) log V_q(Aⁿ(x))`.
pub fn finite_time_lq(spec: &CocycleSpec, x: &Point, q: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain(MODULE, "n must be positive"));
    }
    let prof = gelfand_profile(spec, x, q, n)?;
    Ok(prof.log_v(q, n) / n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSpectrum {
    pub n: usize,
    pub samples: usize,
    /// `l_1..l_{q_max}` averaged over the samples.
    pub l: Vec<f64>,
    /// `ζ_q = l_q - l_{q-1}`.
    pub zeta: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub tol_group: f64,
    /// Noncompactness exponent; `-inf` for matrix cocycles.
    pub kappa: f64,
    /// Every exponent lies above `kappa`, so the quasi-compactness condition holds.
    pub quasi_compact: bool,
    /// Set when some `ζ_q = -inf` (vanishing volume growth).
    pub degenerate_bottom: bool,
}

pub fn spectrum_estimate(spec: &CocycleSpec, source: &PointSource, q_max: usize, n: usize, seed: u64) -> Result<LyapunovSpectrum> {
    let d = spec.dimension();
    if q_max == 0 || q_max > d || n == 0 {
        return Err(Error::domain(MODULE, format!("need 1 <= q_max <= {d} and n >= 1")));
    }
    let points = source.points(spec, seed);
    if points.is_empty() {
        return Err(Error::domain(MODULE, "no sample points"));
    }
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let prof = gelfand_profile(spec, x, q_max, n)?;
            Ok((1..=q_max).map(|q| prof.log_v(q, n) / n as f64).collect())
        })
        .collect::<Result<_>>()?;
    let l: Vec<f64> = (0..q_max)
        .map(|q| rows.iter().map(|r| r[q]).sum::<f64>() / rows.len() as f64)
        .collect();
    let zeta = differences(&l);
    let finite: Vec<f64> = zeta.iter().copied().filter(|z| z.is_finite()).collect();
    let spread = match (finite.first(), finite.last()) {
        (Some(a), Some(b)) => a - b,
        _ => 0.0,
    };
    let tol_group = 0.02 * (spread + 1.0);
    Ok(LyapunovSpectrum {
        n,
        samples: points.len(),
        multiplicities: group_runs(&zeta, tol_group),
        degenerate_bottom: zeta.iter().any(|z| *z == f64::NEG_INFINITY),
        l,
        zeta,
        tol_group,
        kappa: f64::NEG_INFINITY,
        quasi_compact: true,
    })
}

/// `ζ_1 = l_1`, `ζ_q = l_q - l_{q-1}`; `-inf` once the volume vanishes.
pub fn differences(l: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    l.iter()
        .map(|&v| {
            let z = if v == f64::NEG_INFINITY || prev == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                v - prev
            };
            prev = v;
            z
        })
        .collect()
}

fn group_runs(zeta: &[f64], tol: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for (i, z) in zeta.iter().enumerate() {
        let same = i > 0 && {
            let p = zeta[i - 1];
            (p == f64::NEG_INFINITY && *z == f64::NEG_INFINITY) || (p - z).abs() <= tol
        };
        match out.last_mut() {
            Some(last) if same => *last += 1,
            _ => out.push(1),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub e_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformConvergenceProfile {
    pub k: usize,
    pub lambda_hat: f64,
    pub entries: Vec<ConvergencePoint>,
    /// `e_n · n` grows across the requested range.
    pub non_convergent: bool,
    /// The periodic data was not constant, so no limit is guaranteed.
    pub advisory: bool,
}

/// `e_n = max_x |(1/n) log c_k(Aⁿ(x)) - λ̂_k|` over random sample points.
pub fn uniform_convergence_profile(
    spec: &CocycleSpec,
    narrowness: &NarrownessReport,
    k: usize,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<UniformConvergenceProfile> {
    if k == 0 || k > narrowness.lambda_hat.len() {
        return Err(Error::domain(MODULE, format!("index k = {k} not covered by the narrowness report")));
    }
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::domain(MODULE, "n_list must be nonempty and positive"));
    }
    let lambda_hat = narrowness.lambda(k);
    let n_top = *n_list.iter().max().expect("nonempty");
    let points = random_points(spec, samples, seed);
    let per_point: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let prof = gelfand_profile(spec, x, k, n_top)?;
            Ok(n_list
                .iter()
                .map(|&n| (prof.log_c(k, n) / n as f64 - lambda_hat).abs())
                .collect())
        })
        .collect::<Result<_>>()?;
    let entries: Vec<ConvergencePoint> = n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| ConvergencePoint {
            n,
            e_n: per_point.iter().map(|r| r[j]).fold(0.0, f64::max),
        })
        .collect();
    let first = &entries[0];
    let last = &entries[entries.len() - 1];
    let non_convergent = last.e_n > 1e-6 && last.e_n * last.n as f64 > 2.0 * first.e_n * first.n as f64;
    Ok(UniformConvergenceProfile {
        k,
        lambda_hat,
        entries,
        non_convergent,
        advisory: !narrowness.constant,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SemicontinuityEntry {
    pub n: usize,
    pub orbit: String,
    pub period: usize,
    pub connector_len: usize,
    /// `l_q(μ_p)` for the closed orbit.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemicontinuityReport {
    pub q: usize,
    /// `l_q` at `x`: exact when `x` is periodic, finite-time otherwise.
    pub reference: f64,
    pub reference_exact: bool,
    pub entries: Vec<SemicontinuityEntry>,
    /// `max_n (l_q(μ_{p_n}) - reference)`.
    pub gap: f64,
}

/// `l_q` of the invariant measure on a periodic orbit: the sum of the top `q`
/// eigenvalue exponents.
pub fn periodic_lq(spec: &CocycleSpec, orbit: &PeriodicOrbit, q: usize) -> Result<f64> {
    let datum = eigen_moduli(spec, orbit)?;
    Ok(datum.log_moduli[..q].iter().sum::<f64>() / orbit.period as f64)
}

pub fn semicontinuity_probe(spec: &CocycleSpec, x: &Point, q: usize, periods: &[usize]) -> Result<SemicontinuityReport> {
    let d = spec.dimension();
    if q == 0 || q > d {
        return Err(Error::domain(MODULE, format!("q = {q} outside 1..={d}")));
    }
    if periods.is_empty() || periods[0] == 0 || periods.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(MODULE, "periods must be positive and increasing"));
    }
    let sys = spec.system();
    let entries: Vec<SemicontinuityEntry> = periods
        .iter()
        .map(|&n| {
            let (orbit, j, _) = sys.close_orbit(x, n)?;
            Ok(SemicontinuityEntry {
                n,
                orbit: orbit.label(),
                period: orbit.period,
                connector_len: j,
                value: periodic_lq(spec, &orbit, q)?,
            })
        })
        .collect::<Result<_>>()?;
    let (reference, reference_exact) = match x.period() {
        Some(m) => {
            let word: Vec<_> = (0..m as i64).map(|i| x.coord(i)).collect();
            (periodic_lq(spec, &PeriodicOrbit::new(sys, word)?, q)?, true)
        }
        None => (finite_time_lq(spec, x, q, *periods.last().expect("nonempty"))?, false),
    };
    let gap = entries.iter().map(|e| e.value - reference).fold(f64::NEG_INFINITY, f64::max);
    Ok(SemicontinuityReport {
        q,
        reference,
        reference_exact,
        entries,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::LogModuli;
    use crate::linalg::Matrix;
    use crate::periodic::scan_narrowness;
    use crate::sft::SftSystem;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn diag_spec() -> CocycleSpec {
        CocycleSpec::constant(SftSystem::full_shift(2), m2(2.0, 0.0, 0.0, 0.5)).unwrap()
    }

    fn conj2() -> CocycleSpec {
        CocycleSpec::conjugated_diagonal(
            SftSystem::full_shift(2),
            LogModuli::Constant(vec![1.0, -1.0]),
            0,
            vec![(vec![0], m2(1.0, 0.5, 0.0, 1.0)), (vec![1], m2(1.0, 0.0, 0.7, 1.2))],
            10.0,
        )
        .unwrap()
    }

    fn conj3() -> CocycleSpec {
        let p0 = Matrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.0, 1.0, 0.2, 0.1, 0.0, 1.0]);
        let p1 = Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.4, 1.0, 0.0, 0.0, -0.3, 1.0]);
        CocycleSpec::conjugated_diagonal(
            SftSystem::full_shift(2),
            LogModuli::Constant(vec![1.0, 0.0, -1.0]),
            0,
            vec![(vec![0], p0), (vec![1], p1)],
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn lq_examples() {
        let x: Point = "(0)1101(01)".parse().unwrap();
        for n in [1, 7, 30] {
            assert!((finite_time_lq(&diag_spec(), &x, 1, n).unwrap() - LN_2).abs() < 1e-14);
            assert!(finite_time_lq(&diag_spec(), &x, 2, n).unwrap().abs() < 1e-14);
        }
        let l = finite_time_lq(&conj2(), &x, 1, 50).unwrap();
        // |log c_1(Aⁿ) - n| <= log ‖P‖ + log ‖P⁻¹‖ over the two conjugacies
        assert!((l - 1.0).abs() <= 2.0 * 10f64.ln() / 50.0);
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum_estimate(&diag_spec(), &PointSource::Random { count: 4 }, 2, 10, 1).unwrap();
        assert!((s.zeta[0] - LN_2).abs() < 1e-14 && (s.zeta[1] + LN_2).abs() < 1e-14);
        assert_eq!(s.multiplicities, vec![1, 1]);
        assert_eq!(s.kappa, f64::NEG_INFINITY);

        let s = spectrum_estimate(&conj3(), &PointSource::Random { count: 8 }, 3, 200, 2).unwrap();
        for (z, e) in s.zeta.iter().zip([1.0, 0.0, -1.0]) {
            assert!((z - e).abs() < 0.05, "{:?}", s.zeta);
        }

        let g = CocycleSpec::weighted_shift(SftSystem::full_shift(2), 16, vec![1.0, 1.5], 0.9).unwrap();
        let s = spectrum_estimate(&g, &PointSource::Random { count: 2 }, 16, 20, 3).unwrap();
        assert!(s.degenerate_bottom);
        assert_eq!(*s.zeta.last().unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn uniform_convergence_examples() {
        let c = diag_spec();
        let rep = scan_narrowness(&c, 1, 4).unwrap();
        let prof = uniform_convergence_profile(&c, &rep, 1, &[4, 8, 16], 10, 1).unwrap();
        assert!(prof.entries.iter().all(|e| e.e_n < 1e-14));
        assert!(!prof.non_convergent);

        let cd = conj2();
        let rep = scan_narrowness(&cd, 1, 8).unwrap();
        let prof = uniform_convergence_profile(&cd, &rep, 1, &[16, 32, 64], 40, 2).unwrap();
        let k = 2.0 * 10f64.ln();
        assert!(prof.entries.iter().all(|e| e.e_n * e.n as f64 <= k));
        assert!(!prof.non_convergent);

        let sw = crate::periodic::tests::swap_spec();
        let rep = scan_narrowness(&sw, 1, 6).unwrap();
        let prof = uniform_convergence_profile(&sw, &rep, 1, &[16, 32, 64], 40, 3).unwrap();
        assert!(prof.non_convergent && prof.advisory);
        assert!(prof.entries.last().unwrap().e_n > 0.1);
    }

    #[test]
    fn semicontinuity_examples() {
        let x = Point::periodic(&[0, 1, 1]).unwrap();
        let r = semicontinuity_probe(&conj2(), &x, 1, &[3, 6, 9]).unwrap();
        assert!(r.reference_exact && r.gap.abs() < 1e-12);
        assert!(r.entries.iter().all(|e| e.orbit == "011" || e.period % 3 == 0));

        let y: Point = "(0)10110(1)@2".parse().unwrap();
        let r = semicontinuity_probe(&conj2(), &y, 1, &[4, 8, 16, 32]).unwrap();
        assert!(r.entries.iter().all(|e| (e.value - 1.0).abs() < 1e-12));
        assert!(r.gap.abs() <= 2.0 * 10f64.ln() / 32.0);

        let r = semicontinuity_probe(&diag_spec(), &y, 2, &[2, 5, 9]).unwrap();
        assert!(r.entries.iter().all(|e| e.value.abs() < 1e-14));
        assert!(r.gap.abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn zeta_sums_to_l(seed in 0u64..1000, n in 1usize..40) {
            let s = spectrum_estimate(&conj3(), &PointSource::Random { count: 2 }, 3, n, seed).unwrap();
            for q in 0..3 {
                let sum: f64 = s.zeta[..=q].iter().sum();
                prop_assert!((sum - s.l[q]).abs() <= 1e-12 * (1.0 + s.l[q].abs()));
            }
            prop_assert_eq!(s.l[0], s.zeta[0]);
            let tol = s.tol_group;
            prop_assert!(s.zeta.windows(2).all(|w| w[0] >= w[1] - tol));
        }

        #[test]
        fn top_volume_is_determinant(seed in 0u64..1000, n in 1usize..30) {
            let spec = conj3();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = spec.system().random_point(&mut rng, 1..=10, 1..=4);
            let l = finite_time_lq(&spec, &x, 3, n).unwrap();
            // det is multiplicative; the raw product loses the small singular values
            let det = crate::periodic::log_abs_det(&spec.generators(&x, 0, n).unwrap()) / n as f64;
            prop_assert!((l - det).abs() < 1e-9);
        }
    }
}
