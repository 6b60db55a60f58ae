//! Linear cocycles over a subshift: generator families, products
//! `Aⁿ(x) = A(σⁿ⁻¹x)⋯A(x)`, invariant-frame iteration and restricted inverses.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm2, qr_positive, singular_values, subspace_distance, Matrix, ScaledMatrix};
use crate::sft::{point_distance, Point, SftSystem, Symbol};
use crate::snumbers::{NormContext, NormKind};

const MODULE: &str = "cocycle";

/// Largest lookup table (alphabet^(2r+1) windows) a locally constant map may use.
const MAX_TABLE: usize = 1 << 20;
/// Default bound on cond(P) for conjugated-diagonal families.
pub const DEFAULT_MAX_CONDITION: f64 = 1e8;
/// Backward depth used to locate fast/slow bundles when none is given.
pub const DEFAULT_FRAME_DEPTH: usize = 60;
const SINGULAR_FLOOR: f64 = 1e-12;

/// A map from `(2r+1)`-windows `x_{-r..=r}` to matrices.
#[derive(Debug, Clone)]
pub struct WindowTable {
    radius: usize,
    alphabet: usize,
    entries: Vec<Option<Matrix>>,
}

impl WindowTable {
    /// `entries` must cover exactly the admissible words of length `2r+1`.
    pub fn new(sys: &SftSystem, radius: usize, entries: Vec<(Vec<Symbol>, Matrix)>) -> Result<Self> {
        let alphabet = sys.alphabet_size();
        let len = 2 * radius + 1;
        let size = (alphabet as u128).pow(len as u32);
        if size > MAX_TABLE as u128 {
            return Err(Error::domain(MODULE, format!("window table of radius {radius} is too large")));
        }
        let mut table = vec![None; size as usize];
        let mut dim = None;
        for (word, m) in entries {
            if word.len() != len || !sys.is_admissible(&word) {
                return Err(Error::domain(
                    MODULE,
                    format!("table key {word:?} is not an admissible word of length {len}"),
                ));
            }
            if m.nrows() != m.ncols() || *dim.get_or_insert(m.nrows()) != m.nrows() {
                return Err(Error::domain(MODULE, "table matrices must be square of one size"));
            }
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::domain(MODULE, format!("table entry for {word:?} is not finite")));
            }
            let code = encode(&word, alphabet);
            if table[code].replace(m).is_some() {
                return Err(Error::domain(MODULE, format!("duplicate table key {word:?}")));
            }
        }
        let mut word = vec![0; len];
        for code in 0..table.len() {
            decode(code, alphabet, &mut word);
            if sys.is_admissible(&word) && table[code].is_none() {
                return Err(Error::domain(MODULE, format!("table is missing admissible window {word:?}")));
            }
        }
        Ok(WindowTable {
            radius,
            alphabet,
            entries: table,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.matrices().next().map_or(0, |m| m.nrows())
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.entries.iter().flatten()
    }

    /// Entry for the window centered at coordinate `i` of `x`.
    fn at(&self, x: &Point, i: i64) -> Result<&Matrix> {
        let r = self.radius as i64;
        let code = (i - r..=i + r).fold(0usize, |acc, j| acc * self.alphabet + x.coord(j) as usize);
        self.entries[code]
            .as_ref()
            .ok_or_else(|| Error::domain(MODULE, format!("inadmissible window at coordinate {i} of {x}")))
    }
}

fn encode(word: &[Symbol], alphabet: usize) -> usize {
    word.iter().fold(0, |acc, &s| acc * alphabet + s as usize)
}

fn decode(mut code: usize, alphabet: usize, word: &mut [Symbol]) {
    for s in word.iter_mut().rev() {
        *s = (code % alphabet) as Symbol;
        code /= alphabet;
    }
}

/// Diagonal log-moduli of a conjugated-diagonal family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogModuli {
    Constant(Vec<f64>),
    /// One diagonal per symbol, selected by `x_0`.
    PerSymbol(Vec<Vec<f64>>),
}

impl LogModuli {
    fn at(&self, s: Symbol) -> &[f64] {
        match self {
            LogModuli::Constant(v) => v,
            LogModuli::PerSymbol(v) => &v[s as usize],
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    LocallyConstant(WindowTable),
    /// `A(x) = P(σx) · diag(e^{λ(x_0)}) · P(x)⁻¹`.
    ConjugatedDiagonal {
        log_moduli: LogModuli,
        conjugacy: WindowTable,
        inverses: WindowTable,
    },
    /// Truncated weighted shift `(A(x)v)_i = w_i(x) v_{i+1}` with
    /// `w_i(x) = scale[x_0] · decayⁱ`.
    WeightedShift { scale: Vec<f64>, decay: f64 },
}

#[derive(Debug, Clone)]
pub struct CocycleSpec {
    system: SftSystem,
    dimension: usize,
    family: Family,
    norm: NormContext,
    holder_alpha: f64,
    injective: bool,
}

impl CocycleSpec {
    fn build(system: SftSystem, dimension: usize, family: Family) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::domain(MODULE, "dimension must be positive"));
        }
        let mut spec = CocycleSpec {
            system,
            dimension,
            family,
            norm: NormContext::euclidean(dimension),
            holder_alpha: 1.0,
            injective: false,
        };
        spec.injective = spec.min_generator_singular_value() > 0.0;
        Ok(spec)
    }

    pub fn locally_constant(system: SftSystem, radius: usize, entries: Vec<(Vec<Symbol>, Matrix)>) -> Result<Self> {
        let table = WindowTable::new(&system, radius, entries)?;
        let d = table.dimension();
        Self::build(system, d, Family::LocallyConstant(table))
    }

    /// `A(x) = mats[x_0]`.
    pub fn one_step(system: SftSystem, mats: Vec<Matrix>) -> Result<Self> {
        if mats.len() != system.alphabet_size() {
            return Err(Error::domain(MODULE, "one matrix per symbol is required"));
        }
        let entries = mats.into_iter().enumerate().map(|(s, m)| (vec![s as Symbol], m)).collect();
        Self::locally_constant(system, 0, entries)
    }

    pub fn constant(system: SftSystem, a0: Matrix) -> Result<Self> {
        let n = system.alphabet_size();
        Self::one_step(system, vec![a0; n])
    }

    pub fn conjugated_diagonal(
        system: SftSystem,
        log_moduli: LogModuli,
        conj_radius: usize,
        conj: Vec<(Vec<Symbol>, Matrix)>,
        max_condition: f64,
    ) -> Result<Self> {
        let mut invs = Vec::with_capacity(conj.len());
        for (w, p) in &conj {
            let sv = singular_values(p);
            let cond = sv[0] / sv[sv.len() - 1];
            if !(cond.is_finite() && cond <= max_condition) {
                return Err(Error::domain(
                    MODULE,
                    format!("conjugacy for window {w:?} has condition number {cond:e} above {max_condition:e}"),
                ));
            }
            let inv = p.clone().lu().try_inverse().expect("bounded condition implies invertible");
            invs.push((w.clone(), inv));
        }
        let conjugacy = WindowTable::new(&system, conj_radius, conj)?;
        let inverses = WindowTable::new(&system, conj_radius, invs)?;
        let d = conjugacy.dimension();
        match &log_moduli {
            LogModuli::Constant(v) if v.len() != d => {
                return Err(Error::domain(MODULE, "log-moduli length must equal the dimension"))
            }
            LogModuli::PerSymbol(v)
                if v.len() != system.alphabet_size() || v.iter().any(|l| l.len() != d) =>
            {
                return Err(Error::domain(MODULE, "per-symbol log-moduli must be alphabet × dimension"))
            }
            _ => {}
        }
        Self::build(
            system,
            d,
            Family::ConjugatedDiagonal {
                log_moduli,
                conjugacy,
                inverses,
            },
        )
    }

    /// Conjugated diagonal with `P ≡ I`.
    pub fn diagonal(system: SftSystem, log_moduli: LogModuli) -> Result<Self> {
        let d = match &log_moduli {
            LogModuli::Constant(v) => v.len(),
            LogModuli::PerSymbol(v) => v.first().map_or(0, Vec::len),
        };
        let conj = (0..system.alphabet_size())
            .map(|s| (vec![s as Symbol], Matrix::identity(d, d)))
            .collect();
        Self::conjugated_diagonal(system, log_moduli, 0, conj, DEFAULT_MAX_CONDITION)
    }

    pub fn weighted_shift(system: SftSystem, dimension: usize, scale: Vec<f64>, decay: f64) -> Result<Self> {
        if scale.len() != system.alphabet_size() || !scale.iter().chain([&decay]).all(|v| v.is_finite()) {
            return Err(Error::domain(MODULE, "weighted shift needs one finite scale per symbol"));
        }
        Self::build(system, dimension, Family::WeightedShift { scale, decay })
    }

    pub fn with_norm(mut self, kind: NormKind) -> Self {
        self.norm = NormContext::new(kind, self.dimension);
        self
    }

    pub fn with_holder_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(MODULE, format!("Hölder exponent {alpha} outside (0, 1]")));
        }
        self.holder_alpha = alpha;
        Ok(self)
    }

    /// Declare the injectivity flag. Declaring `true` for a family with a
    /// singular generator is an error; declaring `false` is always allowed.
    pub fn with_injective_flag(mut self, injective: bool) -> Result<Self> {
        if injective && !self.injective {
            return Err(Error::Injectivity(format!(
                "declared injective but smallest generator singular value is {:e}",
                self.min_generator_singular_value()
            )));
        }
        self.injective = injective;
        Ok(self)
    }

    pub fn system(&self) -> &SftSystem {
        &self.system
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn norm(&self) -> NormContext {
        self.norm
    }

    pub fn holder_alpha(&self) -> f64 {
        self.holder_alpha
    }

    pub fn is_injective(&self) -> bool {
        self.injective
    }

    /// Coordinates `-R..=R` determine `A(x)`.
    pub fn window_radius(&self) -> usize {
        match &self.family {
            Family::LocallyConstant(t) => t.radius(),
            Family::ConjugatedDiagonal { conjugacy, .. } => conjugacy.radius() + 1,
            Family::WeightedShift { .. } => 0,
        }
    }

    /// Every generator matrix the family can produce.
    pub fn generator_matrices(&self) -> Vec<Matrix> {
        match &self.family {
            Family::LocallyConstant(t) => t.matrices().cloned().collect(),
            Family::WeightedShift { scale, .. } => (0..scale.len()).map(|s| self.weighted_shift_matrix(s as Symbol)).collect(),
            Family::ConjugatedDiagonal { .. } => {
                // one point per admissible window x_{-r..=r+1}
                let r = self.window_radius() - 1;
                let a = self.system.alphabet_size();
                let len = 2 * r + 2;
                let mut word = vec![0; len];
                let mut out = Vec::new();
                for code in 0..a.pow(len as u32) {
                    decode(code, a, &mut word);
                    if !self.system.is_admissible(&word) {
                        continue;
                    }
                    let mut cyc = word.clone();
                    cyc.extend_from_slice(self.system.connector(word[len - 1], word[0]));
                    let x = Point::periodic(&cyc).expect("nonempty").shift(r as i64);
                    out.extend(self.generator_at(&x, 0).ok());
                }
                out
            }
        }
    }

    fn min_generator_singular_value(&self) -> f64 {
        match &self.family {
            Family::WeightedShift { .. } if self.dimension > 1 => 0.0,
            Family::ConjugatedDiagonal { .. } => f64::INFINITY,
            _ => self
                .generator_matrices()
                .iter()
                .map(|m| singular_values(m).last().copied().unwrap_or(0.0))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn weighted_shift_matrix(&self, s: Symbol) -> Matrix {
        let Family::WeightedShift { scale, decay } = &self.family else {
            unreachable!()
        };
        let d = self.dimension;
        let mut m = Matrix::zeros(d, d);
        let mut w = scale[s as usize];
        for i in 0..d.saturating_sub(1) {
            m[(i, i + 1)] = w;
            w *= decay;
        }
        m
    }

    /// `A(σⁱx)`.
    pub fn generator_at(&self, x: &Point, i: i64) -> Result<Matrix> {
        match &self.family {
            Family::LocallyConstant(t) => t.at(x, i).cloned(),
            Family::WeightedShift { .. } => Ok(self.weighted_shift_matrix(x.coord(i))),
            Family::ConjugatedDiagonal {
                log_moduli,
                conjugacy,
                inverses,
            } => {
                let p_next = conjugacy.at(x, i + 1)?;
                let p_inv = inverses.at(x, i)?;
                let lm = log_moduli.at(x.coord(i));
                let mut scaled = p_next.clone();
                for (j, l) in lm.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(l.exp());
                }
                Ok(scaled * p_inv)
            }
        }
    }

    /// `P(σⁱx)` for conjugated-diagonal families.
    pub fn conjugacy_at(&self, x: &Point, i: i64) -> Option<Matrix> {
        match &self.family {
            Family::ConjugatedDiagonal { conjugacy, .. } => conjugacy.at(x, i).ok().cloned(),
            _ => None,
        }
    }

    /// `A(σⁱx)⁻¹`.
    pub fn generator_inverse_at(&self, x: &Point, i: i64) -> Result<Matrix> {
        if let Family::ConjugatedDiagonal {
            log_moduli,
            conjugacy,
            inverses,
        } = &self.family
        {
            let p = conjugacy.at(x, i)?;
            let p_next_inv = inverses.at(x, i + 1)?;
            let lm = log_moduli.at(x.coord(i));
            let mut scaled = p.clone();
            for (j, l) in lm.iter().enumerate() {
                scaled.column_mut(j).scale_mut((-l).exp());
            }
            return Ok(scaled * p_next_inv);
        }
        let a = self.generator_at(x, i)?;
        let smin = singular_values(&a).last().copied().unwrap_or(0.0);
        match a.lu().try_inverse() {
            Some(inv) if smin > 0.0 && inv.iter().all(|v| v.is_finite()) => Ok(inv),
            _ => Err(Error::Singular {
                module: MODULE,
                sigma_min: smin,
            }),
        }
    }

    /// `A(x)` after checking that `x` belongs to the base system.
    pub fn evaluate(&self, x: &Point) -> Result<Matrix> {
        self.system.check_point(x)?;
        self.generator_at(x, 0)
    }

    /// `A(σ^{start+j}x)` for `j = 0..n`.
    pub fn generators(&self, x: &Point, start: i64, n: usize) -> Result<Vec<Matrix>> {
        (0..n as i64).map(|j| self.generator_at(x, start + j)).collect()
    }

    /// Raw product `Aⁿ(x)`, identity for `n = 0`.
    pub fn product(&self, x: &Point, n: usize) -> Result<Matrix> {
        self.system.check_point(x)?;
        let mut p = Matrix::identity(self.dimension, self.dimension);
        for j in 0..n {
            p = self.generator_at(x, j as i64)? * p;
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericOverflow { steps: j + 1 });
            }
        }
        Ok(p)
    }

    /// `Aⁿ(σ^{start}x)` as a log-rescaled matrix.
    pub fn scaled_product_from(&self, x: &Point, start: i64, n: usize) -> Result<ScaledMatrix> {
        let mut p = ScaledMatrix::identity(self.dimension);
        for j in 0..n as i64 {
            p.left_multiply(&self.generator_at(x, start + j)?);
        }
        Ok(p)
    }

    pub fn scaled_product(&self, x: &Point, n: usize) -> Result<ScaledMatrix> {
        self.system.check_point(x)?;
        self.scaled_product_from(x, 0, n)
    }

    /// Orthonormal frame of the `k`-dimensional fast bundle at `σ^{at}x`,
    /// obtained by pushing a singular frame forward `depth` steps.
    pub fn fast_frame(&self, x: &Point, at: i64, k: usize, depth: usize) -> Result<Matrix> {
        let depth = depth.max(1);
        let start = at - depth as i64;
        let warm = depth.min(8);
        let init = self.scaled_product_from(x, start, warm)?;
        let mut q = top_right_singular(&init.mat, k);
        for j in 0..depth as i64 {
            q = qr_positive(&(self.generator_at(x, start + j)? * q)).0;
        }
        Ok(q)
    }

    /// Orthonormal frame of the `(d-k)`-dimensional slow bundle at `σ^{at}x`,
    /// obtained by pushing backward through inverses from `σ^{at+depth}x`.
    pub fn slow_frame(&self, x: &Point, at: i64, k: usize, depth: usize) -> Result<Matrix> {
        let depth = depth.max(1);
        let end = at + depth as i64;
        let warm = depth.min(8) as i64;
        let mut inv = ScaledMatrix::identity(self.dimension);
        for j in 1..=warm {
            inv.left_multiply(&self.generator_inverse_at(x, end - j)?);
        }
        let mut q = top_right_singular(&inv.mat, self.dimension - k);
        for j in 1..=depth as i64 {
            q = qr_positive(&(self.generator_inverse_at(x, end - j)? * q)).0;
        }
        Ok(q)
    }

    /// Inverse of `Aⁿ(σ⁻ⁿx)` restricted to the preimage of `E ⊂ X_x`.
    ///
    /// When `E` is the fast bundle at `x`, the inverse is assembled from the
    /// triangular factors of a forward QR sweep; otherwise it falls back to a
    /// direct solve with the raw product.
    pub fn restricted_inverse(&self, x: &Point, n: usize, e: &Matrix) -> Result<RestrictedMap> {
        let k = e.ncols();
        if e.nrows() != self.dimension || k == 0 || k > self.dimension {
            return Err(Error::domain(MODULE, "subspace basis has the wrong shape"));
        }
        let e = qr_positive(e).0;
        if n == 0 {
            return Ok(RestrictedMap {
                domain: e.clone(),
                image: e,
            });
        }
        self.system.check_point(x)?;
        let start = -(n as i64);
        if let Ok(q0) = self.fast_frame(x, start, k, DEFAULT_FRAME_DEPTH) {
            let mut q = q0.clone();
            let mut r_acc = Matrix::identity(k, k);
            for j in 0..n as i64 {
                let (qn, r) = qr_positive(&(self.generator_at(x, start + j)? * q));
                q = qn;
                r_acc = r * r_acc;
            }
            if r_acc.iter().all(|v| v.is_finite()) && subspace_distance(&q, &e) < 1e-6 {
                let smin = singular_values(&r_acc).last().copied().unwrap_or(0.0);
                if smin < SINGULAR_FLOOR {
                    return Err(Error::Singular {
                        module: MODULE,
                        sigma_min: smin,
                    });
                }
                let coords = q.transpose() * &e;
                let r_inv = r_acc.lu().try_inverse().ok_or(Error::Singular {
                    module: MODULE,
                    sigma_min: smin,
                })?;
                return Ok(RestrictedMap {
                    image: q0 * r_inv * coords,
                    domain: e,
                });
            }
        }
        let b = self.product(&x.shift(start), n)?;
        let lu = b.lu();
        let w = lu.solve(&e).ok_or(Error::Singular {
            module: MODULE,
            sigma_min: 0.0,
        })?;
        let wmax = norm2(&w);
        let smin = if wmax.is_finite() && wmax > 0.0 { 1.0 / wmax } else { 0.0 };
        if smin < SINGULAR_FLOOR {
            return Err(Error::Singular {
                module: MODULE,
                sigma_min: smin,
            });
        }
        Ok(RestrictedMap { domain: e, image: w })
    }

    /// Empirical Hölder constants of `x ↦ A(x)` from random nearby pairs.
    pub fn holder_estimate(&self, sample_pairs: usize, seed: u64) -> Result<HolderEstimate> {
        if sample_pairs < 2 {
            return Err(Error::domain(MODULE, "at least two sample pairs are required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = self.window_radius();
        let mut pairs = Vec::with_capacity(sample_pairs);
        for _ in 0..sample_pairs {
            let x = self.system.random_point(&mut rng, 1..=2 * radius + 8, 1..=4);
            let s = rng.random_range(0..=radius + 3);
            let y = self.system.random_point_near(&x, s, &mut rng, 1..=4);
            let d = point_distance(&x, &y);
            if d > 0.0 {
                let diff = norm2(&(self.generator_at(&x, 0)? - self.generator_at(&y, 0)?));
                pairs.push((d, diff));
            }
        }
        let window_bound = (-((radius + 1) as f64)).exp() * (1.0 + 1e-12);
        let nonzero: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, diff)| diff > 0.0).collect();
        if nonzero.is_empty() {
            return Ok(HolderEstimate {
                kind: HolderKind::Degenerate,
                alpha_hat: f64::INFINITY,
                c_hat: 0.0,
                pairs_used: pairs.len(),
                window_radius: radius,
            });
        }
        let c_lip = nonzero.iter().map(|&(d, diff)| diff / d).fold(0.0, f64::max);
        if nonzero.iter().all(|&(d, _)| d > window_bound) {
            return Ok(HolderEstimate {
                kind: HolderKind::LocallyConstant,
                alpha_hat: f64::INFINITY,
                c_hat: c_lip,
                pairs_used: pairs.len(),
                window_radius: radius,
            });
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = nonzero.iter().map(|&(d, diff)| (d.ln(), diff.ln())).unzip();
        let (slope, intercept) = least_squares(&xs, &ys);
        Ok(HolderEstimate {
            kind: HolderKind::Fitted,
            alpha_hat: slope,
            c_hat: intercept.exp(),
            pairs_used: pairs.len(),
            window_radius: radius,
        })
    }
}

/// Top-`k` right singular vectors of `m`, as columns.
pub fn top_right_singular(m: &Matrix, k: usize) -> Matrix {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    vt.rows(0, k).transpose()
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// A linear map on `span(domain)` given by the images of its basis columns.
#[derive(Debug, Clone)]
pub struct RestrictedMap {
    /// Orthonormal basis of the domain subspace.
    pub domain: Matrix,
    /// `image[:, j]` is the image of `domain[:, j]`.
    pub image: Matrix,
}

impl RestrictedMap {
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.image * (self.domain.transpose() * u)
    }

    pub fn singular_values(&self) -> Vec<f64> {
        singular_values(&self.image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderKind {
    Fitted,
    /// Differences vanish below the window scale; `alpha_hat = +∞` and
    /// `c_hat` bounds `‖A(x) - A(y)‖ / d(x, y)`, valid for every `α <= 1`.
    LocallyConstant,
    /// All sampled differences were zero.
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderEstimate {
    pub kind: HolderKind,
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub pairs_used: usize,
    pub window_radius: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::principal_angles;
    use proptest::prelude::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn conj_spec() -> CocycleSpec {
        let sys = SftSystem::full_shift(2);
        let p0 = m2(1.0, 0.5, 0.0, 1.0);
        let p1 = m2(1.0, 0.0, 0.7, 1.2);
        CocycleSpec::conjugated_diagonal(sys, LogModuli::Constant(vec![1.0, -1.0]), 0, vec![(vec![0], p0), (vec![1], p1)], 10.0)
            .unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let sys = SftSystem::full_shift(2);
        let a0 = m2(1.0, 2.0, 3.0, 4.0);
        let c = CocycleSpec::constant(sys.clone(), a0.clone()).unwrap();
        let x: Point = "(01)1101(0)@1".parse().unwrap();
        assert_eq!(c.evaluate(&x).unwrap(), a0);
        let d = CocycleSpec::diagonal(sys.clone(), LogModuli::Constant(vec![1.0, -1.0])).unwrap();
        let dx = d.evaluate(&x).unwrap();
        assert!((dx - m2(1f64.exp(), 0.0, 0.0, (-1f64).exp())).norm() < 1e-15);
        let a1 = m2(0.0, 2.0, 0.5, 0.0);
        let ls = CocycleSpec::one_step(sys, vec![a0, a1.clone()]).unwrap();
        assert_eq!(x.coord(0), 1);
        assert_eq!(ls.evaluate(&x).unwrap(), a1);
    }

    #[test]
    fn inadmissible_points_are_rejected() {
        let g = SftSystem::golden_mean();
        let spec = CocycleSpec::constant(g, Matrix::identity(2, 2)).unwrap();
        let bad: Point = "(0)11(0)".parse().unwrap();
        assert!(matches!(spec.evaluate(&bad), Err(Error::Domain { .. })));
    }

    #[test]
    fn table_must_cover_admissible_words() {
        let g = SftSystem::golden_mean();
        let words = vec![(vec![0, 0, 0], Matrix::identity(1, 1))];
        assert!(CocycleSpec::locally_constant(g.clone(), 1, words).is_err());
        let all: Vec<_> = [[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0], [1, 0, 1]]
            .iter()
            .map(|w| (w.to_vec(), Matrix::identity(1, 1)))
            .collect();
        assert!(CocycleSpec::locally_constant(g.clone(), 1, all.clone()).is_ok());
        let mut extra = all;
        extra.push((vec![1, 1, 0], Matrix::identity(1, 1)));
        assert!(CocycleSpec::locally_constant(g, 1, extra).is_err());
    }

    #[test]
    fn product_examples() {
        let sys = SftSystem::full_shift(2);
        let spec = CocycleSpec::constant(sys, m2(2.0, 0.0, 0.0, 0.5)).unwrap();
        let x = Point::periodic(&[0, 1]).unwrap();
        assert_eq!(spec.product(&x, 0).unwrap(), Matrix::identity(2, 2));
        assert_eq!(spec.product(&x, 1).unwrap(), spec.evaluate(&x).unwrap());
        assert_eq!(spec.product(&x, 5).unwrap(), m2(32.0, 0.0, 0.0, 1.0 / 32.0));
        let big = CocycleSpec::constant(SftSystem::full_shift(2), m2(1e10, 0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(big.product(&x, 40), Err(Error::NumericOverflow { .. })));
        let scaled = big.scaled_product(&x, 40).unwrap();
        assert!((scaled.log_norm2() - 400.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn weighted_shift_is_nilpotent() {
        let spec = CocycleSpec::weighted_shift(SftSystem::full_shift(2), 4, vec![1.0, 2.0], 0.5).unwrap();
        assert!(!spec.is_injective());
        let x = Point::periodic(&[1]).unwrap();
        let a = spec.evaluate(&x).unwrap();
        assert_eq!(a[(0, 1)], 2.0);
        assert_eq!(a[(2, 3)], 0.5);
        assert_eq!(spec.product(&x, 4).unwrap(), Matrix::zeros(4, 4));
        assert!(spec.clone().with_injective_flag(true).is_err());
    }

    #[test]
    fn restricted_inverse_diagonal() {
        let spec = CocycleSpec::constant(SftSystem::full_shift(2), m2(2.0, 0.0, 0.0, 0.5)).unwrap();
        let x = Point::periodic(&[0]).unwrap();
        let e1 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let inv = spec.restricted_inverse(&x, 3, &e1).unwrap();
        let u = DVector::from_vec(vec![1.0, 0.0]);
        assert!((inv.apply(&u) - DVector::from_vec(vec![0.125, 0.0])).norm() < 1e-15);
        let id = spec.restricted_inverse(&x, 0, &e1).unwrap();
        assert_eq!(id.apply(&u), u);
    }

    #[test]
    fn restricted_inverse_conjugated() {
        let spec = conj_spec();
        let x: Point = "(01)1101001(10)@3".parse().unwrap();
        let p = spec.conjugacy_at(&x, 0).unwrap();
        let e = crate::linalg::orthonormalize(&p.columns(0, 1).into_owned());
        for n in [1usize, 5, 20] {
            let inv = spec.restricted_inverse(&x, n, &e).unwrap();
            let s = inv.singular_values()[0];
            let expected = (-(n as f64)).exp();
            // conditioning of P bounds the distortion
            assert!(s <= expected * 10.0 && s >= expected / 10.0, "n={n} s={s}");
            let back = spec.product(&x.shift(-(n as i64)), n).unwrap() * &inv.image;
            assert!((back - &inv.domain).norm() < 1e-8);
        }
    }

    #[test]
    fn fast_frame_matches_conjugacy() {
        let spec = conj_spec();
        let x: Point = "(011)0010(1)".parse().unwrap();
        let q = spec.fast_frame(&x, 0, 1, 60).unwrap();
        let p = spec.conjugacy_at(&x, 0).unwrap();
        let target = crate::linalg::orthonormalize(&p.columns(0, 1).into_owned());
        assert!(principal_angles(&q, &target)[0] < 1e-12);
        let f = spec.slow_frame(&x, 0, 1, 60).unwrap();
        let target = crate::linalg::orthonormalize(&p.columns(1, 1).into_owned());
        assert!(principal_angles(&f, &target)[0] < 1e-12);
    }

    #[test]
    fn holder_kinds() {
        let sys = SftSystem::full_shift(2);
        let c = CocycleSpec::constant(sys.clone(), m2(1.0, 2.0, 3.0, 4.0)).unwrap();
        assert_eq!(c.holder_estimate(200, 1).unwrap().kind, HolderKind::Degenerate);
        // radius-2 table with a distinct matrix per window
        let mut entries = Vec::new();
        for code in 0..32u32 {
            let w: Vec<Symbol> = (0..5).rev().map(|b| ((code >> b) & 1) as Symbol).collect();
            entries.push((w, Matrix::from_element(1, 1, code as f64)));
        }
        let lc = CocycleSpec::locally_constant(sys, 2, entries).unwrap();
        let h = lc.holder_estimate(400, 2).unwrap();
        assert_eq!(h.kind, HolderKind::LocallyConstant);
        assert_eq!(h.alpha_hat, f64::INFINITY);
        let h = conj_spec().holder_estimate(400, 3).unwrap();
        assert_eq!(h.kind, HolderKind::LocallyConstant);
        assert_eq!(h.window_radius, 1);
    }

    fn small_int_spec() -> CocycleSpec {
        let sys = SftSystem::golden_mean();
        CocycleSpec::one_step(sys, vec![m2(1.0, 1.0, 0.0, 1.0), m2(2.0, 0.0, 1.0, -1.0)]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cocycle_identity(seed in 0u64..10_000, n in 0usize..=10, m in 0usize..=10) {
            let spec = small_int_spec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = spec.system().random_point(&mut rng, 1..=10, 1..=4);
            let lhs = spec.product(&x, n + m).unwrap();
            let rhs = spec.product(&x.shift(n as i64), m).unwrap() * spec.product(&x, n).unwrap();
            prop_assert_eq!(lhs, rhs);

            let c = conj_spec();
            let y = c.system().random_point(&mut rng, 1..=10, 1..=4);
            let lhs = c.product(&y, n + m).unwrap();
            let rhs = c.product(&y.shift(n as i64), m).unwrap() * c.product(&y, n).unwrap();
            prop_assert!((&lhs - &rhs).norm() <= 1e-10 * lhs.norm());
        }

        #[test]
        fn conjugated_closed_form(seed in 0u64..10_000, n in 0usize..=20) {
            let c = conj_spec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = c.system().random_point(&mut rng, 1..=10, 1..=4);
            let p_n = c.conjugacy_at(&x, n as i64).unwrap();
            let p_0 = c.conjugacy_at(&x, 0).unwrap();
            let dn = Matrix::from_diagonal(&DVector::from_vec(vec![(n as f64).exp(), (-(n as f64)).exp()]));
            let closed = p_n * dn * p_0.try_inverse().unwrap();
            let prod = c.product(&x, n).unwrap();
            prop_assert!((&prod - &closed).norm() <= 1e-9 * closed.norm());
        }

        #[test]
        fn constant_on_cylinders(seed in 0u64..10_000) {
            let c = conj_spec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = c.system().random_point(&mut rng, 1..=10, 1..=4);
            let y = c.system().random_point_near(&x, c.window_radius() + 1, &mut rng, 1..=4);
            prop_assert_eq!(c.evaluate(&x).unwrap(), c.evaluate(&y).unwrap());
        }
    }
}
