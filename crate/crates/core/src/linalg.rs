//! Dense row-major matrices and a truncated SVD.
//!
//! The SVD reduces a tall matrix with a Householder QR and then runs
//! one-sided Jacobi rotations on the square triangular factor. Wide
//! matrices are handled through their transpose.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// `X ≈ U · diag(S) · Vᵀ` with `r` components.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    /// rows × r, orthonormal columns
    pub u: DenseMatrix<T>,
    /// descending, non-negative
    pub s: Vec<T>,
    /// cols × r, orthonormal columns
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let (m, n, r) = (self.u.rows(), self.v.rows(), self.s.len());
        let mut out = DenseMatrix::zeros(m, n);
        // scaled Vᵀ rows: s_k v_k
        let mut sv = vec![T::zero(); r * n];
        for k in 0..r {
            for j in 0..n {
                sv[k * n + j] = self.s[k] * self.v[(j, k)];
            }
        }
        for i in 0..m {
            let out_row = out.row_mut(i);
            for k in 0..r {
                let a = self.u[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(&sv[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Splits singular values evenly: returns `(U·√S, V·√S)`.
    pub fn balanced_factors(&self) -> (DenseMatrix<T>, DenseMatrix<T>) {
        let roots: Vec<T> = self.s.iter().map(|s| s.sqrt()).collect();
        let scale = |m: &DenseMatrix<T>| DenseMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)] * roots[c]);
        (scale(&self.u), scale(&self.v))
    }
}

/// Best rank-`rank` approximation of `x` in Frobenius norm.
pub fn truncated_svd<T: Scalar>(x: &DenseMatrix<T>, rank: usize) -> Result<SvdFactors<T>> {
    let min_dim = x.rows().min(x.cols());
    if rank == 0 || rank > min_dim {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} outside 1..={min_dim} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut full = if x.rows() >= x.cols() {
        thin_svd(x)
    } else {
        let t = thin_svd(&x.transpose());
        SvdFactors { u: t.v, s: t.s, v: t.u }
    };
    full.s.truncate(rank);
    full.u = take_columns(&full.u, rank);
    full.v = take_columns(&full.v, rank);
    Ok(full)
}

fn take_columns<T: Scalar>(m: &DenseMatrix<T>, k: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(m.rows(), k, |r, c| m[(r, c)])
}

/// Full thin SVD of a tall (`rows ≥ cols`) matrix.
fn thin_svd<T: Scalar>(a: &DenseMatrix<T>) -> SvdFactors<T> {
    let (m, n) = (a.rows(), a.cols());
    let (q, r) = householder_qr(a);

    // One-sided Jacobi on R, stored column-major for contiguous column access.
    let mut g: Vec<Vec<T>> = (0..n).map(|c| r.column(c)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|c| (0..n).map(|k| if k == c { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon();
    let tiny = T::min_positive_value().sqrt();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for qi in p + 1..n {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[qi], &g[qi]);
                let gamma = dot(&g[p], &g[qi]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma.abs() < tiny {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (gp, gq) = pair_mut(&mut g, p, qi);
                rotate(gp, gq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, qi);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<(T, usize)> = g.iter().enumerate().map(|(j, col)| (dot(col, col).sqrt(), j)).collect();
    sigma.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)));

    let s0 = sigma.first().map_or(T::zero(), |x| x.0);
    let cutoff = s0 * eps * T::from_count(n.max(1));
    // Left vectors of R; null directions get completed below.
    let mut ur: Vec<Option<Vec<T>>> = sigma
        .iter()
        .map(|&(sv, j)| {
            if sv > cutoff && sv > T::zero() {
                Some(g[j].iter().map(|&x| x / sv).collect())
            } else {
                None
            }
        })
        .collect();
    complete_orthonormal(&mut ur, n);

    let ur_mat = DenseMatrix::from_fn(n, n, |row, c| ur[c].as_ref().unwrap()[row]);
    let u = q.matmul(&ur_mat);
    let vmat = DenseMatrix::from_fn(n, n, |row, c| v[sigma[c].1][row]);
    let s = sigma
        .iter()
        .map(|&(sv, _)| if sv > cutoff { sv } else { T::zero() })
        .collect();
    debug_assert_eq!(u.rows(), m);
    SvdFactors { u, s, v: vmat }
}

fn pair_mut<X>(v: &mut [X], a: usize, b: usize) -> (&mut X, &mut X) {
    debug_assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills `None` slots with unit vectors orthogonal to all others
/// (modified Gram–Schmidt against canonical basis vectors).
fn complete_orthonormal<T: Scalar>(cols: &mut [Option<Vec<T>>], n: usize) {
    let mut basis = 0;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        loop {
            assert!(basis < n, "ran out of basis vectors");
            let mut cand: Vec<T> = (0..n).map(|k| if k == basis { T::one() } else { T::zero() }).collect();
            basis += 1;
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let proj = dot(&cand, other);
                    for (c, &o) in cand.iter_mut().zip(other) {
                        *c -= proj * o;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > T::lit(0.5) {
                cand.iter_mut().for_each(|c| *c /= norm);
                cols[slot] = Some(cand);
                break;
            }
        }
    }
}

/// Householder QR of a tall matrix: returns thin `Q` (rows × cols) and
/// square upper-triangular `R`.
fn householder_qr<T: Scalar>(a: &DenseMatrix<T>) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let (m, n) = (a.rows(), a.cols());
    // column-major working copy
    let mut w: Vec<Vec<T>> = (0..n).map(|c| a.column(c)).collect();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let x = &w[k][k..];
        let norm = dot(x, x).sqrt();
        let mut h: Vec<T> = x.to_vec();
        if norm == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if h[0] > T::zero() { -norm } else { norm };
        h[0] -= alpha;
        let hn = dot(&h, &h).sqrt();
        if hn == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        h.iter_mut().for_each(|x| *x /= hn);
        for col in w.iter_mut().skip(k) {
            let seg = &mut col[k..];
            let p = dot(&h, seg);
            let p2 = p + p;
            for (s, &hv) in seg.iter_mut().zip(&h) {
                *s -= p2 * hv;
            }
        }
        reflectors.push(h);
    }
    let r = DenseMatrix::from_fn(n, n, |row, c| if row <= c { w[c][row] } else { T::zero() });

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut qcols: Vec<Vec<T>> = (0..n)
        .map(|c| (0..m).map(|k| if k == c { T::one() } else { T::zero() }).collect())
        .collect();
    for k in (0..n).rev() {
        let h = &reflectors[k];
        if h.is_empty() {
            continue;
        }
        for col in qcols.iter_mut() {
            let seg = &mut col[k..];
            let p = dot(h, seg);
            if p == T::zero() {
                continue;
            }
            let p2 = p + p;
            for (s, &hv) in seg.iter_mut().zip(h) {
                *s -= p2 * hv;
            }
        }
    }
    let q = DenseMatrix::from_fn(m, n, |row, c| qcols[c][row]);
    (q, r)
}
