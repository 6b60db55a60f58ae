//! Domination certificates: singular-value gap profiles, the fitted `(C, τ)`,
//! reconstruction of the splitting `E ⊕ F`, direct verification of the
//! domination inequality, and uniform / partial hyperbolicity classification.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::cocycle::{least_squares, CocycleSpec, DEFAULT_FRAME_DEPTH};
use crate::error::{Error, Result};
use crate::linalg::{intersection, min_principal_angle, qr_positive, singular_values, subspace_distance, Matrix, ScaledMatrix};
use crate::lyapunov::random_points;
use crate::periodic::NarrownessReport;
use crate::sft::Point;
use crate::snumbers::{gelfand_profile, gelfand_profile_from, NormKind};

const MODULE: &str = "certifier";
const TIE_TOL: f64 = 1e-9;
const PAIRS_PER_SAMPLE: usize = 20;
const EQUIVARIANCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertifierOptions {
    pub tau_accept: f64,
    pub slope_reject: f64,
    pub res_accept: f64,
    pub max_witnesses: usize,
}

impl Default for CertifierOptions {
    fn default() -> Self {
        CertifierOptions {
            tau_accept: 0.999,
            slope_reject: 0.0,
            res_accept: 1.0,
            max_witnesses: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapPoint {
    pub n: usize,
    /// `log max{c_{k+1}(Aⁿx), c_{k+1}(Aⁿσx)} - log c_k(A^{n+1}x)`.
    pub log_ratio: f64,
    /// `log c_{k+1}(Aⁿx) - log c_k(Aⁿx)`.
    pub log_ratio_bg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapProfile {
    pub point: Point,
    /// Least-rotation label when the point lies on an enumerated orbit.
    pub orbit: Option<String>,
    pub k: usize,
    pub entries: Vec<GapPoint>,
}

pub fn gap_profile(spec: &CocycleSpec, x: &Point, k: usize, n_max: usize) -> Result<GapProfile> {
    let d = spec.dimension();
    if k == 0 || k >= d {
        return Err(Error::domain(MODULE, format!("index k = {k} outside 1..{d}")));
    }
    let here = gelfand_profile(spec, x, k + 1, n_max + 1)?;
    let next = gelfand_profile_from(spec, x, 1, k + 1, n_max)?;
    let mut entries = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let denom = here.log_c(k, n + 1);
        if denom == f64::NEG_INFINITY {
            return Err(Error::Injectivity(format!("c_{k}(A^{}(x)) vanishes at {x}", n + 1)));
        }
        let num = here.log_c(k + 1, n).max(next.log_c(k + 1, n));
        entries.push(GapPoint {
            n,
            log_ratio: num - denom,
            log_ratio_bg: here.log_c(k + 1, n) - here.log_c(k, n),
        });
    }
    Ok(GapProfile {
        point: x.clone(),
        orbit: None,
        k,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Rejected,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub point: String,
    pub orbit: Option<String>,
    pub n: usize,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopePoint {
    pub n: usize,
    pub value: f64,
    pub value_bg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationCertificate {
    pub k: usize,
    pub c_fit: f64,
    pub tau_fit: f64,
    pub slope: f64,
    /// Max absolute deviation of the envelope from the fitted line.
    pub residual: f64,
    pub n_range: (usize, usize),
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    /// Fitted `τ` for the same-time criterion `c_{k+1}(Aⁿ) / c_k(Aⁿ)`.
    pub tau_bg: f64,
    pub samples: usize,
    /// Non-injective cocycle: the fit is diagnostic and never certifies.
    pub advisory_only: bool,
    pub envelope: Vec<EnvelopePoint>,
}

/// Fit `log C + n log τ` to the pointwise upper envelope of the profiles.
pub fn fit_certificate(profiles: &[GapProfile], n_min: usize, n_max: usize, options: &CertifierOptions) -> Result<DominationCertificate> {
    if profiles.is_empty() {
        return Err(Error::domain(MODULE, "no gap profiles to fit"));
    }
    if n_min >= n_max || profiles.iter().any(|p| p.entries.len() <= n_max) {
        return Err(Error::domain(MODULE, format!("profiles must cover n in [{n_min}, {n_max}] with n_min < n_max")));
    }
    let k = profiles[0].k;
    let envelope: Vec<EnvelopePoint> = (n_min..=n_max)
        .map(|n| EnvelopePoint {
            n,
            value: profiles.iter().map(|p| p.entries[n].log_ratio).fold(f64::NEG_INFINITY, f64::max),
            value_bg: profiles.iter().map(|p| p.entries[n].log_ratio_bg).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let xs: Vec<f64> = envelope.iter().map(|e| e.n as f64).collect();
    let ys: Vec<f64> = envelope.iter().map(|e| e.value).collect();
    let (slope, intercept) = if ys.iter().all(|y| y.is_finite()) {
        least_squares(&xs, &ys)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    let residual = if slope.is_finite() {
        xs.iter().zip(&ys).map(|(x, y)| (y - (intercept + slope * x)).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    let ys_bg: Vec<f64> = envelope.iter().map(|e| e.value_bg).collect();
    let tau_bg = if ys_bg.iter().all(|y| y.is_finite()) {
        least_squares(&xs, &ys_bg).0.exp()
    } else {
        0.0
    };
    let tau_fit = slope.exp();
    let verdict = if slope >= options.slope_reject - TIE_TOL {
        Verdict::Rejected
    } else if tau_fit <= options.tau_accept && residual <= options.res_accept {
        Verdict::Certified
    } else {
        Verdict::Inconclusive
    };
    let witnesses = if verdict == Verdict::Rejected {
        let top = envelope.last().expect("nonempty").value;
        profiles
            .iter()
            .filter(|p| p.entries[n_max].log_ratio >= top - TIE_TOL)
            .take(options.max_witnesses)
            .map(|p| Witness {
                point: p.point.to_string(),
                orbit: p.orbit.clone(),
                n: n_max,
                log_ratio: p.entries[n_max].log_ratio,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(DominationCertificate {
        k,
        c_fit: intercept.exp(),
        tau_fit,
        slope,
        residual,
        n_range: (n_min, n_max),
        verdict,
        witnesses,
        tau_bg,
        samples: profiles.len(),
        advisory_only: false,
        envelope,
    })
}

#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub point: Point,
    pub orbit: Option<String>,
}

/// Every point of every prime orbit of period `<= max_period` (orbits in
/// enumeration order, each orbit's points in shift order), then `random`
/// eventually periodic points.
pub fn sample_points(spec: &CocycleSpec, max_period: usize, random: usize, seed: u64) -> Result<Vec<SamplePoint>> {
    let mut out = Vec::new();
    for orbit in spec.system().prime_orbits_up_to(max_period)? {
        let label = orbit.label();
        out.extend(orbit.points().into_iter().map(|point| SamplePoint {
            point,
            orbit: Some(label.clone()),
        }));
    }
    out.extend(random_points(spec, random, seed).into_iter().map(|point| SamplePoint { point, orbit: None }));
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyParams {
    pub k: usize,
    pub max_period: usize,
    pub random_samples: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub options: CertifierOptions,
}

/// Gap profiles over [`sample_points`] followed by [`fit_certificate`].
pub fn certify(spec: &CocycleSpec, params: &CertifyParams) -> Result<DominationCertificate> {
    let points = sample_points(spec, params.max_period, params.random_samples, params.seed)?;
    let profiles: Vec<GapProfile> = points
        .par_iter()
        .map(|s| {
            let mut p = gap_profile(spec, &s.point, params.k, params.n_max)?;
            p.orbit = s.orbit.clone();
            Ok(p)
        })
        .collect::<Result<_>>()?;
    let mut cert = fit_certificate(&profiles, params.n_min, params.n_max, &params.options)?;
    if !spec.is_injective() {
        cert.advisory_only = true;
        if cert.verdict == Verdict::Certified {
            cert.verdict = Verdict::Inconclusive;
        }
    }
    Ok(cert)
}

fn serialize_columns<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let cols: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
    cols.serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingSample {
    pub point: Point,
    pub k: usize,
    pub n: usize,
    /// Orthonormal basis of `E(x)`, as columns.
    #[serde(serialize_with = "serialize_columns")]
    pub e: Matrix,
    /// Orthonormal basis of `F(x)`, as columns.
    #[serde(serialize_with = "serialize_columns")]
    pub f: Matrix,
    /// Smallest principal angle between `E(x)` and `F(x)`.
    pub f_complement_angle: f64,
    /// Largest principal angle between the depth-`n` and depth-`n+1` bundles.
    pub convergence_gap: f64,
    /// `1 - c_{k+1}/c_k` of the products used for the reconstruction.
    pub singular_gap: f64,
}

fn require_injective_euclidean(spec: &CocycleSpec) -> Result<()> {
    if spec.norm().kind != NormKind::Euclidean {
        return Err(Error::domain(MODULE, "splitting reconstruction uses the Euclidean norm"));
    }
    if !spec.is_injective() {
        return Err(Error::Injectivity("splitting reconstruction needs invertible generators".into()));
    }
    Ok(())
}

/// Finite-time splitting at `x`: the fast bundle from `n` steps of the past,
/// the slow bundle from `n` steps of the future.
pub fn reconstruct_splitting(spec: &CocycleSpec, x: &Point, k: usize, n: usize) -> Result<SplittingSample> {
    require_injective_euclidean(spec)?;
    let d = spec.dimension();
    if k == 0 || k >= d || n == 0 {
        return Err(Error::domain(MODULE, format!("need 1 <= k < {d} and n >= 1")));
    }
    spec.system().check_point(x)?;
    let past = gelfand_profile_from(spec, x, -(n as i64), k + 1, n)?;
    let future = gelfand_profile(spec, x, k + 1, n)?;
    let gap = |p: &crate::snumbers::GelfandProfile| 1.0 - (p.log_c(k + 1, n) - p.log_c(k, n)).exp();
    let singular_gap = gap(&past).min(gap(&future));
    if singular_gap < 1e-10 {
        return Err(Error::IllConditioned { k, gap: singular_gap });
    }
    let e = spec.fast_frame(x, 0, k, n)?;
    let f = spec.slow_frame(x, 0, k, n)?;
    let e1 = spec.fast_frame(x, 0, k, n + 1)?;
    let f1 = spec.slow_frame(x, 0, k, n + 1)?;
    Ok(SplittingSample {
        point: x.clone(),
        k,
        n,
        f_complement_angle: min_principal_angle(&e, &f),
        convergence_gap: subspace_distance(&e, &e1).max(subspace_distance(&f, &f1)),
        e,
        f,
        singular_gap,
    })
}

/// Invariant frames along `x, σx, …, σⁿx` with the restricted step matrices:
/// `A(σⁱx) E_i = E_{i+1} e_steps[i]` and `A(σⁱx) F_i = F_{i+1} f_steps[i]`.
#[derive(Debug, Clone)]
pub struct BundleSegment {
    pub e: Vec<Matrix>,
    pub e_steps: Vec<Matrix>,
    pub f: Vec<Matrix>,
    pub f_steps: Vec<Matrix>,
}

pub fn bundle_segment(spec: &CocycleSpec, x: &Point, k: usize, n: usize, depth: usize) -> Result<BundleSegment> {
    let d = spec.dimension();
    let mut e = vec![spec.fast_frame(x, 0, k, depth)?];
    let mut e_steps = Vec::with_capacity(n);
    for i in 0..n {
        let (q, r) = qr_positive(&(spec.generator_at(x, i as i64)? * &e[i]));
        e.push(q);
        e_steps.push(r);
    }
    let mut f = vec![Matrix::zeros(d, d - k); n + 1];
    f[n] = spec.slow_frame(x, n as i64, k, depth)?;
    let mut f_steps = vec![Matrix::zeros(d - k, d - k); n];
    for i in (0..n).rev() {
        let (q, r) = qr_positive(&(spec.generator_inverse_at(x, i as i64)? * &f[i + 1]));
        f[i] = q;
        f_steps[i] = r.try_inverse().ok_or(Error::Singular {
            module: MODULE,
            sigma_min: 0.0,
        })?;
    }
    Ok(BundleSegment { e, e_steps, f, f_steps })
}

/// `log ‖M_{m-1}⋯M_0 c‖` for `m = 0..=steps.len()`.
fn log_growth(steps: &[Matrix], c: &DVector<f64>) -> Vec<f64> {
    let mut v = c.clone();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(steps.len() + 1);
    let n0 = v.norm();
    v /= n0;
    acc += n0.ln();
    out.push(acc);
    for m in steps {
        v = m * v;
        let s = v.norm();
        if s == 0.0 {
            acc = f64::NEG_INFINITY;
            out.push(acc);
            continue;
        }
        v /= s;
        acc += s.ln();
        out.push(acc);
    }
    out
}

/// Like [`log_growth`] for a vector pushed by the generators themselves.
fn log_growth_direct(spec: &CocycleSpec, x: &Point, u: &DVector<f64>, n: usize) -> Result<Vec<f64>> {
    let steps = spec.generators(x, 0, n)?;
    Ok(log_growth(&steps, u))
}

fn random_unit_in(basis: &Matrix, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let c = DVector::from_fn(basis.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let v = basis * c;
    let n = v.norm();
    v / n
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub c: f64,
    pub tau: f64,
    pub slack: f64,
    pub n_check: usize,
    pub pairs: usize,
    pub passed: usize,
    pub pass_rate: f64,
    /// `max log(‖Aⁿv‖ / (slack·C·τⁿ‖Aⁿu‖))`; positive means a violation.
    pub worst_margin: f64,
    /// Largest principal angle between pushed-forward and reconstructed bundles.
    pub equivariance_angle: f64,
    pub equivariant: bool,
}

/// Check `‖Aⁿ(x)v‖ <= 2 C τⁿ ‖Aⁿ(x)u‖` on random unit `u ∈ E(x)`, `v ∈ F(x)`
/// for `n = 1..=n_check`, plus equivariance of the reconstructed bundles.
pub fn verify_domination(
    spec: &CocycleSpec,
    samples: &[SplittingSample],
    c: f64,
    tau: f64,
    n_check: usize,
    seed: u64,
) -> Result<VerificationReport> {
    require_injective_euclidean(spec)?;
    let slack = 2.0;
    let per_sample: Vec<(usize, usize, f64, f64)> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
            let seg = bundle_segment(spec, &s.point, s.k, n_check, s.n.max(DEFAULT_FRAME_DEPTH))?;
            let invariant = subspace_distance(&seg.e[0], &s.e) < 1e-6 && subspace_distance(&seg.f[0], &s.f) < 1e-6;
            let mut passed = 0;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..PAIRS_PER_SAMPLE {
                let u = random_unit_in(&s.e, &mut rng);
                let v = random_unit_in(&s.f, &mut rng);
                let (gu, gv) = if invariant {
                    (
                        log_growth(&seg.e_steps, &(seg.e[0].transpose() * &u)),
                        log_growth(&seg.f_steps, &(seg.f[0].transpose() * &v)),
                    )
                } else {
                    (
                        log_growth_direct(spec, &s.point, &u, n_check)?,
                        log_growth_direct(spec, &s.point, &v, n_check)?,
                    )
                };
                let mut ok = true;
                for n in 1..=n_check {
                    let margin = gv[n] - gu[n] - (slack * c).ln() - n as f64 * tau.ln();
                    worst = worst.max(margin);
                    ok &= margin <= 0.0;
                }
                passed += ok as usize;
            }
            let mut angle: f64 = 0.0;
            if n_check > 0 {
                let e_target = spec.fast_frame(&s.point, n_check as i64, s.k, s.n.max(DEFAULT_FRAME_DEPTH))?;
                angle = angle.max(subspace_distance(&seg.e[n_check], &e_target));
                let pushed_f = spec.generator_at(&s.point, 0)? * &seg.f[0];
                let f_target = spec.slow_frame(&s.point, 1, s.k, s.n.max(DEFAULT_FRAME_DEPTH))?;
                angle = angle.max(subspace_distance(&qr_positive(&pushed_f).0, &f_target));
            }
            Ok((PAIRS_PER_SAMPLE, passed, worst, angle))
        })
        .collect::<Result<_>>()?;
    let pairs: usize = per_sample.iter().map(|p| p.0).sum();
    let passed: usize = per_sample.iter().map(|p| p.1).sum();
    let worst_margin = per_sample.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let equivariance_angle = per_sample.iter().map(|p| p.3).fold(0.0, f64::max);
    Ok(VerificationReport {
        c,
        tau,
        slack,
        n_check,
        pairs,
        passed,
        pass_rate: if pairs > 0 { passed as f64 / pairs as f64 } else { 1.0 },
        worst_margin,
        equivariance_angle,
        equivariant: equivariance_angle <= EQUIVARIANCE_TOL,
    })
}

fn log_extreme_singular(steps: &[Matrix], dim: usize) -> Vec<(f64, f64)> {
    let mut p = ScaledMatrix::identity(dim);
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push((0.0, 0.0));
    for m in steps {
        p.left_multiply(m);
        let sv = singular_values(&p.mat);
        let lo = sv.last().copied().unwrap_or(0.0);
        out.push((
            sv[0].ln() + p.log_scale,
            if lo > 0.0 { lo.ln() + p.log_scale } else { f64::NEG_INFINITY },
        ));
    }
    out
}

/// Smallest `C` with `‖Aⁿ(x)|F‖ <= C τⁿ m(Aⁿ(x)|E)` for all calibration
/// points and `n <= n_check`, using the exact restricted extremes.
pub fn fit_domination_constant(spec: &CocycleSpec, points: &[Point], k: usize, tau: f64, n_check: usize) -> Result<f64> {
    require_injective_euclidean(spec)?;
    let d = spec.dimension();
    let logs: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let seg = bundle_segment(spec, x, k, n_check, DEFAULT_FRAME_DEPTH)?;
            let ge = log_extreme_singular(&seg.e_steps, k);
            let gf = log_extreme_singular(&seg.f_steps, d - k);
            Ok((0..=n_check)
                .map(|n| gf[n].0 - ge[n].1 - n as f64 * tau.ln())
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(logs.into_iter().fold(f64::NEG_INFINITY, f64::max).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperbolicity {
    Uniform { k: usize },
    Partial { k1: usize, k2: usize },
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    pub c: f64,
    pub tau: f64,
    pub samples: usize,
    pub passed: usize,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterCheck {
    pub n: usize,
    /// Largest `|(1/n) log σ(Aⁿ|H)|` over samples and extreme singular values.
    pub max_abs_rate: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub dominated_indices: Vec<usize>,
    pub hyperbolicity: Hyperbolicity,
    pub lambda_hat: Vec<f64>,
    pub contraction: Option<RateCheck>,
    pub expansion: Option<RateCheck>,
    pub center: Option<CenterCheck>,
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOptions {
    /// Exponents within this distance of 0 count as zero.
    pub zero_tol: f64,
    /// Added to rates when fitting `τ` for contraction/expansion.
    pub epsilon: f64,
    pub n_check: usize,
    pub verify_points: usize,
    /// Period bound for the orbit points used to calibrate `C`.
    pub calibration_period: usize,
    pub center_n: usize,
    pub center_tol: f64,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            zero_tol: 0.05,
            epsilon: 0.05,
            n_check: 40,
            verify_points: 50,
            calibration_period: 6,
            center_n: 100,
            center_tol: 0.05,
            seed: 0,
        }
    }
}

/// Spread midpoints of every exponent over the scanned orbits.
pub fn full_lambda_hat(narrowness: &NarrownessReport, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let (lo, hi) = narrowness
                .data
                .iter()
                .map(|p| p.exponents[i])
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo > hi {
                f64::NEG_INFINITY
            } else {
                (lo + hi) / 2.0
            }
        })
        .collect()
}

fn calibration_points(spec: &CocycleSpec, period: usize) -> Result<Vec<Point>> {
    Ok(spec
        .system()
        .prime_orbits_up_to(period)?
        .iter()
        .flat_map(|o| o.points())
        .collect())
}

/// `log(‖Aᵐ(x)|F‖ / τᵐ)` for `m = 1..=n` via the slow frames.
fn contraction_logs(spec: &CocycleSpec, x: &Point, k: usize, n: usize, tau: f64) -> Result<Vec<f64>> {
    let seg = bundle_segment(spec, x, k, n, DEFAULT_FRAME_DEPTH)?;
    let g = log_extreme_singular(&seg.f_steps, spec.dimension() - k);
    Ok((1..=n).map(|m| g[m].0 - m as f64 * tau.ln()).collect())
}

/// `log(‖A^{-m}(x)|E‖ / τᵐ)` for `m = 1..=n` via restricted inverses.
fn expansion_logs(spec: &CocycleSpec, x: &Point, k: usize, n: usize, tau: f64) -> Result<Vec<f64>> {
    let e = spec.fast_frame(x, 0, k, DEFAULT_FRAME_DEPTH)?;
    (1..=n)
        .map(|m| {
            let inv = spec.restricted_inverse(x, m, &e)?;
            Ok(inv.singular_values()[0].ln() - m as f64 * tau.ln())
        })
        .collect()
}

fn rate_check(
    calibration: &[Point],
    verify: &[Point],
    tau: f64,
    seed: u64,
    logs: impl Fn(&Point) -> Result<Vec<f64>> + Sync,
    vector_logs: impl Fn(&Point, &mut ChaCha8Rng) -> Result<Vec<f64>> + Sync,
) -> Result<RateCheck> {
    let log_c = calibration
        .par_iter()
        .map(|x| Ok(logs(x)?.into_iter().fold(f64::NEG_INFINITY, f64::max)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let c = log_c.exp();
    let results: Vec<(usize, f64)> = verify
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut passed = 0;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..PAIRS_PER_SAMPLE {
                let g = vector_logs(x, &mut rng)?;
                let m = g.iter().map(|v| v - (2.0 * c).ln()).fold(f64::NEG_INFINITY, f64::max);
                worst = worst.max(m);
                passed += (m <= 0.0) as usize;
            }
            Ok((passed, worst))
        })
        .collect::<Result<_>>()?;
    Ok(RateCheck {
        c,
        tau,
        samples: verify.len() * PAIRS_PER_SAMPLE,
        passed: results.iter().map(|r| r.0).sum(),
        worst_margin: results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Growth rates on `H = Ẽ ∩ F̃`, the intersection of the fast bundle of index
/// `k2` with the slow bundle of index `k1`, along `n` steps.
pub fn center_rates(spec: &CocycleSpec, x: &Point, k1: usize, k2: usize, n: usize) -> Result<(f64, f64)> {
    let wide = bundle_segment(spec, x, k2, n, DEFAULT_FRAME_DEPTH)?;
    let narrow = bundle_segment(spec, x, k1, n, DEFAULT_FRAME_DEPTH)?;
    let h_dim = k2 - k1;
    let h: Vec<Matrix> = (0..=n).map(|i| intersection(&wide.e[i], &narrow.f[i], h_dim)).collect();
    let mut p = ScaledMatrix::identity(h_dim);
    for i in 0..n {
        let step = h[i + 1].transpose() * spec.generator_at(x, i as i64)? * &h[i];
        p.left_multiply(&step);
    }
    let sv = singular_values(&p.mat);
    let hi = (sv[0].ln() + p.log_scale) / n as f64;
    let lo = (sv[h_dim - 1].ln() + p.log_scale) / n as f64;
    Ok((hi, lo))
}

pub fn classify(
    spec: &CocycleSpec,
    narrowness: &NarrownessReport,
    certificates: &BTreeMap<usize, Vec<DominationCertificate>>,
    options: &ClassifyOptions,
) -> Result<Classification> {
    let d = spec.dimension();
    for (&k, certs) in certificates {
        let certified = certs.iter().find(|c| c.verdict == Verdict::Certified);
        let rejected = certs.iter().find(|c| c.verdict == Verdict::Rejected);
        if let (Some(a), Some(b)) = (certified, rejected) {
            return Err(Error::DiagnosticsConflict {
                k,
                message: format!(
                    "certified over n in {:?} but rejected over n in {:?}",
                    a.n_range, b.n_range
                ),
            });
        }
    }
    let dominated_indices: Vec<usize> = certificates
        .iter()
        .filter(|(_, c)| c.iter().any(|c| c.verdict == Verdict::Certified && !c.advisory_only))
        .map(|(&k, _)| k)
        .collect();
    let lambda_hat = full_lambda_hat(narrowness, d);
    let tol = options.zero_tol;
    let positive = lambda_hat.iter().take_while(|&&l| l > tol).count();
    let non_negative = lambda_hat.iter().take_while(|&&l| l >= -tol).count();
    let hyperbolicity = if positive >= 1 && positive == non_negative && positive < d && dominated_indices.contains(&positive) {
        Hyperbolicity::Uniform { k: positive }
    } else if positive >= 1
        && non_negative > positive
        && non_negative < d
        && dominated_indices.contains(&positive)
        && dominated_indices.contains(&non_negative)
    {
        Hyperbolicity::Partial {
            k1: positive,
            k2: non_negative,
        }
    } else {
        Hyperbolicity::None
    };
    let mut out = Classification {
        dominated_indices,
        hyperbolicity,
        contraction: None,
        expansion: None,
        center: None,
        verified: hyperbolicity == Hyperbolicity::None,
        lambda_hat: lambda_hat.clone(),
    };
    if hyperbolicity == Hyperbolicity::None {
        return Ok(out);
    }
    require_injective_euclidean(spec)?;
    let (k_fast, k_slow) = match hyperbolicity {
        Hyperbolicity::Uniform { k } => (k, k),
        Hyperbolicity::Partial { k1, k2 } => (k1, k2),
        Hyperbolicity::None => unreachable!(),
    };
    let calibration = calibration_points(spec, options.calibration_period)?;
    let verify = random_points(spec, options.verify_points, options.seed);
    let n = options.n_check;

    let tau_c = (lambda_hat[k_slow] + options.epsilon).exp();
    let contraction = rate_check(
        &calibration,
        &verify,
        tau_c,
        options.seed,
        |x| contraction_logs(spec, x, k_slow, n, tau_c),
        |x, rng| {
            let seg = bundle_segment(spec, x, k_slow, n, DEFAULT_FRAME_DEPTH)?;
            let v = random_unit_in(&seg.f[0], rng);
            let g = log_growth(&seg.f_steps, &(seg.f[0].transpose() * v));
            Ok((1..=n).map(|m| g[m] - m as f64 * tau_c.ln()).collect())
        },
    )?;
    let tau_e = (-lambda_hat[k_fast - 1] + options.epsilon).exp();
    let expansion = rate_check(
        &calibration,
        &verify,
        tau_e,
        options.seed ^ 0x5eed,
        |x| expansion_logs(spec, x, k_fast, n, tau_e),
        |x, rng| {
            let e = spec.fast_frame(x, 0, k_fast, DEFAULT_FRAME_DEPTH)?;
            let u = random_unit_in(&e, rng);
            (1..=n)
                .map(|m| {
                    let inv = spec.restricted_inverse(x, m, &e)?;
                    Ok(inv.apply(&u).norm().ln() - m as f64 * tau_e.ln())
                })
                .collect()
        },
    )?;
    let mut verified = contraction.passed == contraction.samples && expansion.passed == expansion.samples;
    if let Hyperbolicity::Partial { k1, k2 } = hyperbolicity {
        let rates: Vec<(f64, f64)> = verify
            .par_iter()
            .map(|x| center_rates(spec, x, k1, k2, options.center_n))
            .collect::<Result<_>>()?;
        let max_abs_rate = rates.iter().map(|(a, b)| a.abs().max(b.abs())).fold(0.0, f64::max);
        let passed = max_abs_rate <= options.center_tol;
        verified &= passed;
        out.center = Some(CenterCheck {
            n: options.center_n,
            max_abs_rate,
            tol: options.center_tol,
            passed,
        });
    }
    out.contraction = Some(contraction);
    out.expansion = Some(expansion);
    out.verified = verified;
    Ok(out)
}
