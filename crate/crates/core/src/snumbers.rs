//! Norm contexts, Gelfand numbers `c_k`, maximal volume growth `V_k` and the
//! measure of noncompactness for finite matrices.
//!
//! The Euclidean case is exact (singular values). Under the L1 and L∞ norms
//! the unit ball is a polytope; restricted operator norms are then computed
//! exactly by vertex enumeration and the subspace optimizations behind `c_k`
//! and `V_k` are bracketed or estimated by sampling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cocycle::CocycleSpec;
use crate::error::{Error, Result};
use crate::linalg::{binomial, compound, norm2, orthonormalize, singular_values, subsets, Matrix, ScaledMatrix, COMPOUND_LIMIT};
use crate::sft::Point;

const MODULE: &str = "snumbers";

/// Subspace samples used by [`gelfand`] and [`volume_growth`] for polyhedral norms.
pub const DEFAULT_SUBSPACE_SAMPLES: usize = 256;
/// Monte Carlo points per subspace in polyhedral volume estimates.
pub const DEFAULT_VOLUME_POINTS: usize = 4000;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Euclidean,
    L1,
    LInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormContext {
    pub kind: NormKind,
    pub dimension: usize,
}

impl NormContext {
    pub fn new(kind: NormKind, dimension: usize) -> Self {
        NormContext { kind, dimension }
    }

    pub fn euclidean(dimension: usize) -> Self {
        Self::new(NormKind::Euclidean, dimension)
    }

    pub fn vector_norm(&self, v: &DVector<f64>) -> f64 {
        vector_norm(self.kind, v.as_slice())
    }

    pub fn operator_norm(&self, t: &Matrix) -> f64 {
        operator_norm(self.kind, t)
    }

    /// Norm of the dual functional `w` (the dual of L1 is L∞ and vice versa).
    pub fn dual_norm(&self, w: &DVector<f64>) -> f64 {
        let dual = match self.kind {
            NormKind::Euclidean => NormKind::Euclidean,
            NormKind::L1 => NormKind::LInf,
            NormKind::LInf => NormKind::L1,
        };
        vector_norm(dual, w.as_slice())
    }
}

pub fn vector_norm(kind: NormKind, v: &[f64]) -> f64 {
    match kind {
        NormKind::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
        NormKind::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

/// Induced operator norm.
pub fn operator_norm(kind: NormKind, t: &Matrix) -> f64 {
    match kind {
        NormKind::Euclidean => norm2(t),
        NormKind::L1 => t
            .column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::LInf => t
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
    }
}

fn check_k(t: &Matrix, k: usize) -> Result<()> {
    if t.nrows() != t.ncols() {
        return Err(Error::domain(MODULE, "matrix must be square"));
    }
    if k == 0 || k > t.nrows() {
        return Err(Error::domain(
            MODULE,
            format!("index k = {k} outside 1..={}", t.nrows()),
        ));
    }
    Ok(())
}

/// Null vector of an (m-1)×m matrix by signed maximal minors.
fn cofactor_null_vector(a: &Matrix) -> DVector<f64> {
    let m = a.ncols();
    DVector::from_fn(m, |j, _| {
        if m == 1 {
            return 1.0;
        }
        let cols: Vec<usize> = (0..m).filter(|&c| c != j).collect();
        let minor = Matrix::from_fn(m - 1, m - 1, |r, c| a[(r, cols[c])]);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// Vertices `c` of `{c : ‖B c‖ ≤ 1}` for a polyhedral norm, one per
/// antipodal pair. `B` (d×m) must have full column rank.
pub fn ball_vertices(kind: NormKind, b: &Matrix) -> Vec<DVector<f64>> {
    let (d, m) = b.shape();
    let mut out = Vec::new();
    match kind {
        NormKind::Euclidean => panic!("the Euclidean ball has no vertices"),
        NormKind::L1 => {
            // extreme rays lie on m-1 independent hyperplanes (B c)_i = 0
            for rows in subsets(d, m - 1) {
                let a = Matrix::from_fn(m - 1, m, |r, c| b[(rows[r], c)]);
                let c = cofactor_null_vector(&a);
                let n = vector_norm(NormKind::L1, (b * &c).as_slice());
                if n > 1e-300 && c.norm() > 1e-12 * n {
                    out.push(c / n);
                }
            }
        }
        NormKind::LInf => {
            for rows in subsets(d, m) {
                let a = Matrix::from_fn(m, m, |r, c| b[(rows[r], c)]);
                let Some(lu_inv) = a.clone().lu().try_inverse() else {
                    continue;
                };
                if !lu_inv.iter().all(|x| x.is_finite()) {
                    continue;
                }
                for mask in 0..(1u64 << (m - 1)) {
                    let s = DVector::from_fn(m, |i, _| if i > 0 && mask & (1 << (i - 1)) != 0 { -1.0 } else { 1.0 });
                    let c = &lu_inv * s;
                    let n = vector_norm(NormKind::LInf, (b * &c).as_slice());
                    if n <= 1.0 + FEASIBILITY_TOL && n > 0.0 {
                        out.push(c / n);
                    }
                }
            }
        }
    }
    out
}

/// `sup{‖M c‖ : ‖B c‖ = 1}`: the norm of the map `B c ↦ M c` on span(B).
/// `M` may have a different row count from `B`.
pub fn map_norm_on_span(kind: NormKind, m: &Matrix, b: &Matrix) -> f64 {
    match kind {
        NormKind::Euclidean => {
            // orthonormalize B = Q R, then ‖M R⁻¹‖₂
            let qr = b.clone().qr();
            let r = qr.r();
            match r.clone().try_inverse() {
                Some(ri) => norm2(&(m * ri)),
                None => f64::INFINITY,
            }
        }
        _ => ball_vertices(kind, b)
            .iter()
            .map(|c| vector_norm(kind, (m * c).as_slice()))
            .fold(0.0, f64::max),
    }
}

/// `‖T|V‖` for `V` = span of the columns of `basis`.
pub fn restricted_norm(kind: NormKind, t: &Matrix, basis: &Matrix) -> f64 {
    map_norm_on_span(kind, &(t * basis), basis)
}

/// `inf{‖T w‖ : w ∈ W, ‖w‖ = 1}` for `W` = span(basis).
pub fn minimal_stretch(kind: NormKind, t: &Matrix, basis: &Matrix) -> f64 {
    let image = t * basis;
    if singular_values(&image).last().copied().unwrap_or(0.0) <= 1e-14 * norm2(basis).max(1e-300) * norm2(t) {
        return 0.0;
    }
    let inv_norm = map_norm_on_span(kind, basis, &image);
    if inv_norm.is_finite() && inv_norm > 0.0 {
        1.0 / inv_norm
    } else {
        0.0
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize, m: usize) -> Matrix {
    Matrix::from_fn(d, m, |_, _| rng.sample(StandardNormal))
}

fn coordinate_subspace(d: usize, cols: &[usize]) -> Matrix {
    Matrix::from_fn(d, cols.len(), |r, c| if r == cols[c] { 1.0 } else { 0.0 })
}

/// Candidate `m`-dimensional subspaces: the Euclidean singular subspace
/// selected by `top`, all coordinate subspaces when few, then Gaussian samples.
fn candidate_subspaces(t: &Matrix, m: usize, top: bool, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Matrix> {
    let d = t.nrows();
    let mut out = Vec::with_capacity(samples + 1);
    let svd = t.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let v = vt.transpose();
    out.push(if top { v.columns(0, m).into_owned() } else { v.columns(d - m, m).into_owned() });
    if binomial(d, m) <= 64 {
        out.extend(subsets(d, m).iter().map(|cols| coordinate_subspace(d, cols)));
    }
    for _ in 0..samples {
        out.push(orthonormalize(&gaussian_matrix(rng, d, m)));
    }
    out
}

/// `c_k(T)`. Exact singular value for the Euclidean norm; for polyhedral norms
/// the upper end of [`gelfand_bracket`] with default sampling.
pub fn gelfand(t: &Matrix, k: usize, norm: NormContext) -> Result<f64> {
    check_k(t, k)?;
    match norm.kind {
        NormKind::Euclidean => Ok(singular_values(t)[k - 1].max(0.0)),
        _ if k == 1 => Ok(operator_norm(norm.kind, t)),
        _ => Ok(gelfand_bracket(t, k, norm, DEFAULT_SUBSPACE_SAMPLES, 0)?.1),
    }
}

/// All Euclidean Gelfand numbers (singular values, descending).
pub fn gelfand_numbers(t: &Matrix) -> Vec<f64> {
    singular_values(t).into_iter().map(|s| s.max(0.0)).collect()
}

/// `(lower, upper)` with `lower <= c_k(T) <= upper`.
///
/// Upper: minimum of `‖T|V‖` over sampled subspaces of codimension `k-1`.
/// Lower: maximum over sampled `k`-dimensional `W` of the minimal stretch of
/// `T` on `W` (every codimension-`(k-1)` subspace meets `W`).
pub fn gelfand_bracket(t: &Matrix, k: usize, norm: NormContext, samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_k(t, k)?;
    let d = t.nrows();
    let op = operator_norm(norm.kind, t);
    if op == 0.0 {
        return Ok((0.0, 0.0));
    }
    if k == 1 {
        return Ok((op, op));
    }
    if norm.kind == NormKind::Euclidean {
        let s = singular_values(t)[k - 1].max(0.0);
        return Ok((s, s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = d - k + 1;
    let upper = candidate_subspaces(t, m, false, samples, &mut rng)
        .iter()
        .map(|v| restricted_norm(norm.kind, t, v))
        .fold(op, f64::min);
    let lower = candidate_subspaces(t, k, true, samples, &mut rng)
        .iter()
        .map(|w| minimal_stretch(norm.kind, t, w))
        .fold(0.0, f64::max);
    Ok((lower.min(upper), upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeGrowth {
    pub value: f64,
    /// False when the value is a Monte Carlo estimate (polyhedral norms).
    pub exact: bool,
}

/// Euclidean `V_k(T)`: spectral norm of the `k`-th compound, i.e. the product
/// of the top `k` singular values.
pub fn euclidean_volume_growth(t: &Matrix, k: usize) -> f64 {
    let d = t.nrows();
    if k == 0 {
        return 1.0;
    }
    if binomial(d, k) <= COMPOUND_LIMIT {
        norm2(&compound(t, &subsets(d, k)))
    } else {
        singular_values(t)[..k].iter().product()
    }
}

/// `V_k(T) = sup{det(T|V) : dim V = k}`.
pub fn volume_growth(t: &Matrix, k: usize, norm: NormContext) -> Result<VolumeGrowth> {
    volume_growth_estimate(t, k, norm, DEFAULT_SUBSPACE_SAMPLES, 0)
}

pub fn volume_growth_estimate(t: &Matrix, k: usize, norm: NormContext, samples: usize, seed: u64) -> Result<VolumeGrowth> {
    check_k(t, k)?;
    let d = t.nrows();
    if norm.kind == NormKind::Euclidean {
        return Ok(VolumeGrowth {
            value: euclidean_volume_growth(t, k),
            exact: true,
        });
    }
    if k == d {
        return Ok(VolumeGrowth {
            value: t.determinant().abs(),
            exact: true,
        });
    }
    if k == 1 {
        return Ok(VolumeGrowth {
            value: operator_norm(norm.kind, t),
            exact: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = candidate_subspaces(t, k, true, samples, &mut rng);
    let mut best: f64 = 0.0;
    for v in &candidates {
        best = best.max(restricted_determinant_estimate(norm.kind, t, v, DEFAULT_VOLUME_POINTS, &mut rng));
    }
    Ok(VolumeGrowth {
        value: best,
        exact: false,
    })
}

/// `det(T|V) = m_{TV}(T B_V) / m_V(B_V)` with each Haar measure normalized to
/// give the unit ball of its subspace the Euclidean-ball volume; 0 when `T|V`
/// is singular.
pub fn restricted_determinant_estimate(kind: NormKind, t: &Matrix, basis: &Matrix, points: usize, rng: &mut ChaCha8Rng) -> f64 {
    let q_v = orthonormalize(basis);
    let image = t * &q_v;
    let sv = singular_values(&image);
    if sv.last().copied().unwrap_or(0.0) <= 1e-14 * sv[0].max(1e-300) {
        return 0.0;
    }
    let q_tv = orthonormalize(&image);
    let euclid_det = (q_tv.transpose() * &image).determinant().abs();
    if kind == NormKind::Euclidean {
        return euclid_det;
    }
    let p_v = ball_fraction(kind, &q_v, points, rng);
    let p_tv = ball_fraction(kind, &q_tv, points, rng);
    if p_tv == 0.0 {
        return 0.0;
    }
    euclid_det * p_v / p_tv
}

/// Fraction of uniform samples from the Euclidean ball of radius `r` in
/// span(q) (orthonormal q) that lie in the polyhedral unit ball; `r` is
/// chosen so that the Euclidean ball contains the polyhedral one.
fn ball_fraction(kind: NormKind, q: &Matrix, points: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (d, k) = q.shape();
    let r = match kind {
        NormKind::LInf => (d as f64).sqrt(),
        _ => 1.0,
    };
    let mut hits = 0usize;
    for _ in 0..points {
        let mut g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let gn = g.norm();
        let radius = r * rng.random::<f64>().powf(1.0 / k as f64);
        g *= radius / gn;
        if vector_norm(kind, (q * g).as_slice()) <= 1.0 {
            hits += 1;
        }
    }
    hits as f64 / points as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoncompactnessValue {
    pub value: f64,
    pub log_value: f64,
}

/// Measure of noncompactness; every finite matrix is compact.
pub fn noncompactness(_t: &Matrix) -> NoncompactnessValue {
    NoncompactnessValue {
        value: 0.0,
        log_value: f64::NEG_INFINITY,
    }
}

/// `log c_q(Aⁿ(x))` and `log V_q(Aⁿ(x))` for `n = 0..=n_max`, `q = 1..=q_max`.
#[derive(Debug, Clone, Serialize)]
pub struct GelfandProfile {
    pub base: Point,
    pub q_max: usize,
    pub n_max: usize,
    /// `log_gelfand[n][q-1]`.
    pub log_gelfand: Vec<Vec<f64>>,
    /// `log_volume[n][q-1]`.
    pub log_volume: Vec<Vec<f64>>,
}

impl GelfandProfile {
    pub fn log_c(&self, q: usize, n: usize) -> f64 {
        self.log_gelfand[n][q - 1]
    }

    pub fn log_v(&self, q: usize, n: usize) -> f64 {
        self.log_volume[n][q - 1]
    }
}

/// Euclidean Gelfand profile along the forward orbit of `σ^{start}x`.
///
/// Volumes come from log-rescaled products of compound matrices, so every
/// `V_q` keeps full relative accuracy however far the singular values spread;
/// dimensions whose compounds are too large fall back to one rescaled product.
pub fn gelfand_profile_from(spec: &CocycleSpec, x: &Point, start: i64, q_max: usize, n_max: usize) -> Result<GelfandProfile> {
    let d = spec.dimension();
    if spec.norm().kind != NormKind::Euclidean {
        return Err(Error::domain(MODULE, "Gelfand profiles are computed for the Euclidean norm only"));
    }
    if q_max == 0 || q_max > d {
        return Err(Error::domain(MODULE, format!("q_max = {q_max} outside 1..={d}")));
    }
    spec.system().check_point(x)?;
    let compound_route = (1..=q_max).all(|q| binomial(d, q) <= COMPOUND_LIMIT);
    let indices: Vec<Vec<Vec<usize>>> = if compound_route {
        (1..=q_max).map(|q| subsets(d, q)).collect()
    } else {
        Vec::new()
    };
    let mut products: Vec<ScaledMatrix> = if compound_route {
        indices.iter().map(|idx| ScaledMatrix::identity(idx.len())).collect()
    } else {
        vec![ScaledMatrix::identity(d)]
    };
    let mut log_volume = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            let a = spec.generator_at(x, start + n as i64 - 1)?;
            if compound_route {
                for (p, idx) in products.iter_mut().zip(&indices) {
                    p.left_multiply(&compound(&a, idx));
                }
            } else {
                products[0].left_multiply(&a);
            }
        }
        let row: Vec<f64> = if compound_route {
            products.iter().map(ScaledMatrix::log_norm2).collect()
        } else {
            let p = &products[0];
            let sv = singular_values(&p.mat);
            let mut acc = 0.0;
            (0..q_max)
                .map(|q| {
                    acc += if sv[q] > 0.0 { sv[q].ln() + p.log_scale } else { f64::NEG_INFINITY };
                    acc
                })
                .collect()
        };
        log_volume.push(row);
    }
    let log_gelfand = log_volume
        .iter()
        .map(|row| {
            let mut out: Vec<f64> = Vec::with_capacity(q_max);
            for q in 0..q_max {
                let prev = if q == 0 { 0.0 } else { row[q - 1] };
                let mut c = if prev == f64::NEG_INFINITY { f64::NEG_INFINITY } else { row[q] - prev };
                if q > 0 {
                    c = c.min(out[q - 1]);
                }
                out.push(c);
            }
            out
        })
        .collect();
    Ok(GelfandProfile {
        base: x.shift(start),
        q_max,
        n_max,
        log_gelfand,
        log_volume,
    })
}

pub fn gelfand_profile(spec: &CocycleSpec, x: &Point, q_max: usize, n_max: usize) -> Result<GelfandProfile> {
    gelfand_profile_from(spec, x, 0, q_max, n_max)
}
