//! Dense linear-algebra helpers shared by the analysis modules: compound
//! (exterior-power) matrices, log-rescaled products, orthonormal frames and
//! principal angles.

use nalgebra::{DMatrix, SVD};

pub type Matrix = DMatrix<f64>;

/// Largest compound dimension for which volume and eigenvalue data are
/// routed through exterior powers.
pub const COMPOUND_LIMIT: usize = 70;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All `q`-subsets of `0..d` in lexicographic order.
pub fn subsets(d: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(d, q));
    let mut cur = Vec::with_capacity(q);
    fn rec(start: usize, d: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == q {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            if d - i < q - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, d, q, cur, out);
            cur.pop();
        }
    }
    rec(0, d, q, &mut cur, &mut out);
    out
}

/// The `q`-th compound matrix: entry (I, J) is the minor det(M[I, J]).
pub fn compound(m: &Matrix, index: &[Vec<usize>]) -> Matrix {
    let n = index.len();
    let q = index.first().map_or(0, Vec::len);
    if q == 0 {
        return Matrix::from_element(1, 1, 1.0);
    }
    Matrix::from_fn(n, n, |r, c| {
        let rows = &index[r];
        let cols = &index[c];
        if q == 1 {
            m[(rows[0], cols[0])]
        } else {
            Matrix::from_fn(q, q, |i, j| m[(rows[i], cols[j])]).full_piv_lu().determinant()
        }
    })
}

pub fn max_column_norm(m: &Matrix) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// A matrix stored as `mat * exp(log_scale)`.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub mat: Matrix,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(n: usize) -> Self {
        ScaledMatrix {
            mat: Matrix::identity(n, n),
            log_scale: 0.0,
        }
    }

    /// Replace the product `P` by `a * P` and factor out the largest column norm.
    pub fn left_multiply(&mut self, a: &Matrix) {
        self.mat = a * &self.mat;
        self.renormalize();
    }

    pub fn renormalize(&mut self) {
        let s = max_column_norm(&self.mat);
        if s > 0.0 && s.is_finite() {
            self.mat /= s;
            self.log_scale += s.ln();
        } else if s == 0.0 {
            self.log_scale = f64::NEG_INFINITY;
        }
    }

    /// log of the spectral norm of the represented matrix.
    pub fn log_norm2(&self) -> f64 {
        if self.log_scale == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s = norm2(&self.mat);
        if s > 0.0 {
            s.ln() + self.log_scale
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    SVD::new(m.clone(), false, false).singular_values[0]
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Orthonormal basis (thin Q factor) for the column span of `m`.
pub fn orthonormalize(m: &Matrix) -> Matrix {
    let k = m.ncols();
    let qr = m.clone().qr();
    let q = qr.q();
    q.columns(0, k).into_owned()
}

/// Thin QR of `m` with R's diagonal made nonnegative.
pub fn qr_positive(m: &Matrix) -> (Matrix, Matrix) {
    let k = m.ncols();
    let qr = m.clone().qr();
    let mut q = qr.q().columns(0, k).into_owned();
    let mut r = qr.r().rows(0, k).into_owned();
    for i in 0..k {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Principal angles (ascending, radians) between the column spans of two
/// matrices with orthonormal columns. Cosines and sines are both computed so
/// small angles keep full relative accuracy.
pub fn principal_angles(a: &Matrix, b: &Matrix) -> Vec<f64> {
    let (big, small) = if a.ncols() >= b.ncols() { (a, b) } else { (b, a) };
    let m = small.ncols();
    if m == 0 {
        return Vec::new();
    }
    let cos = singular_values(&(big.transpose() * small));
    let resid = small - big * (big.transpose() * small);
    let mut sin = singular_values(&resid);
    sin.reverse();
    cos.iter()
        .zip(sin.iter())
        .take(m)
        .map(|(&c, &s)| s.clamp(0.0, 1.0).atan2(c.clamp(0.0, 1.0)))
        .collect()
}

/// Largest principal angle; the subspace distance used for convergence checks.
pub fn subspace_distance(a: &Matrix, b: &Matrix) -> f64 {
    principal_angles(a, b).into_iter().fold(0.0, f64::max)
}

/// Smallest principal angle; zero when the spans intersect.
pub fn min_principal_angle(a: &Matrix, b: &Matrix) -> f64 {
    principal_angles(a, b)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Orthonormal basis of the (approximate) intersection of two spans, of the
/// requested dimension.
pub fn intersection(a: &Matrix, b: &Matrix, dim: usize) -> Matrix {
    let svd = SVD::new(a.transpose() * b, true, false);
    let u = svd.u.expect("u requested");
    orthonormalize(&(a * u.columns(0, dim)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            subsets(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(subsets(5, 3).len(), binomial(5, 3));
    }

    #[test]
    fn compound_is_multiplicative() {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.7, 0.1, 1.5]);
        let b = Matrix::from_row_slice(3, 3, &[0.2, 1.0, -0.4, 1.1, 0.0, 0.9, -0.3, 2.0, 1.0]);
        let idx = subsets(3, 2);
        let lhs = compound(&(&a * &b), &idx);
        let rhs = compound(&a, &idx) * compound(&b, &idx);
        assert!((lhs - rhs).norm() < 1e-12);
        let top = compound(&a, &subsets(3, 3));
        assert!((top[(0, 0)] - a.determinant()).abs() < 1e-12);
    }

    #[test]
    fn small_angles_are_resolved() {
        let t = 1e-9_f64;
        let a = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = Matrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        let ang = principal_angles(&a, &b);
        assert!((ang[0] - t).abs() < 1e-15);
    }

    #[test]
    fn scaled_product_tracks_log_norm() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        let mut p = ScaledMatrix::identity(2);
        for _ in 0..400 {
            p.left_multiply(&a);
        }
        assert!((p.log_norm2() - 400.0 * 3f64.ln()).abs() < 1e-9);
    }
}
