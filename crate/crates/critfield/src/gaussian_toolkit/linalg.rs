//! Small dense symmetric linear algebra.

use crate::error::{Error, Result};
use crate::scalar::{cst, to_f64, Real};

/// Symmetric matrix stored as its packed upper triangle, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix<T> {
    n: usize,
    data: Vec<T>,
}

#[inline]
fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl<T: Real> SymmetricMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Checks symmetry to `1e-12` relative before copying the upper triangle.
    pub fn from_dense(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        let scale = rows.iter().flatten().fold(T::zero(), |a, &b| a.max(b.abs()));
        let tol = T::tol_floor(1e-12) * scale.max(T::one());
        for i in 0..n {
            for j in 0..i {
                if (rows[i][j] - rows[j][i]).abs() > tol {
                    return Err(Error::InvalidArgument(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn diagonal(d: &[T]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[packed(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = packed(self.n, i, j);
        self.data[k] = v;
    }

    pub fn packed_upper(&self) -> &[T] {
        &self.data
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn scaled(&self, t: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| x * t).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Eigenvalues (ascending) and eigenvectors (as columns of the returned rows) by cyclic Jacobi.
    pub fn eigen(&self) -> (Vec<T>, Vec<Vec<T>>) {
        let n = self.n;
        let mut a = self.to_dense();
        let mut v: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        let two: T = cst(2.0);
        for _sweep in 0..64 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            let diag: T = (0..n).map(|i| a[i][i] * a[i][i]).sum();
            if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == T::zero() {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let vkp = row[p];
                        let vkq = row[q];
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap_or(std::cmp::Ordering::Equal));
        let vals = order.iter().map(|&i| a[i][i]).collect();
        let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
        (vals, vecs)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.eigen().0
    }

    /// Spectral norm.
    pub fn operator_norm(&self) -> T {
        self.eigenvalues().iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Determinant; closed forms up to 3x3, partial-pivot LU beyond.
    pub fn determinant(&self) -> T {
        match self.n {
            0 => T::one(),
            1 => self.get(0, 0),
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(0, 1),
            3 => {
                let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(0, 2));
                let (d, e, f) = (self.get(1, 1), self.get(1, 2), self.get(2, 2));
                a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
            }
            _ => lu_det(self.to_dense()),
        }
    }

    /// Symmetric positive semidefinite square root; eigenvalues above `-1e-10 |M|` are clamped at zero.
    pub fn sqrt_psd(&self) -> Result<Self> {
        let (vals, vecs) = self.eigen();
        let tol = T::tol_floor(1e-10) * self.max_abs();
        let mut roots = Vec::with_capacity(vals.len());
        for (i, &l) in vals.iter().enumerate() {
            if l < -tol {
                return Err(Error::NotPsd {
                    pivot: to_f64(l),
                    index: i,
                });
            }
            roots.push(l.max(T::zero()).sqrt());
        }
        let n = self.n;
        Ok(Self::from_fn(n, |i, j| (0..n).map(|k| vecs[i][k] * roots[k] * vecs[j][k]).sum()))
    }
}

fn lu_det<T: Real>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if a[p][k] == T::zero() {
            return T::zero();
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
        }
    }
    det
}

/// Lower-triangular matrix stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> LowerTriangular<T> {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.data[i * (i + 1) / 2 + j]
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * (i + 1) / 2 + j] = v;
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `L x` written into `out`.
    #[inline]
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        let mut k = 0;
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let mut s = T::zero();
            for xj in x.iter().take(i + 1) {
                s += self.data[k] * *xj;
                k += 1;
            }
            *o = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// Solves `L y = b`; requires a nonzero diagonal.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let mut s = b[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                s -= self.get(i, j) * *yj;
            }
            y[i] = s / self.get(i, i);
        }
        y
    }

    /// `L L^T`.
    pub fn gram(&self) -> SymmetricMatrix<T> {
        SymmetricMatrix::from_fn(self.n, |i, j| (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum())
    }

    pub fn diagonal_product(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).fold(T::one(), |a, b| a * b)
    }
}

/// Cholesky factor of a positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct PsdFactor<T> {
    pub l: LowerTriangular<T>,
    pub smallest_pivot: T,
    /// Number of pivots kept above the clamping tolerance.
    pub rank: usize,
}

fn cholesky<T: Real>(m: &SymmetricMatrix<T>, tol: T, strict: bool) -> Result<PsdFactor<T>> {
    let n = m.dim();
    let mut l = LowerTriangular::zeros(n);
    let mut smallest = T::infinity();
    let mut rank = 0;
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            d -= v * v;
        }
        smallest = smallest.min(d);
        if d < -tol {
            return Err(Error::NotPsd {
                pivot: to_f64(d),
                index: j,
            });
        }
        if d <= tol {
            if strict {
                return Err(Error::DegenerateConditioning {
                    smallest_pivot: to_f64(d),
                });
            }
            continue;
        }
        let r = d.sqrt();
        l.set(j, j, r);
        rank += 1;
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / r);
        }
    }
    if n == 0 {
        smallest = T::zero();
    }
    Ok(PsdFactor {
        l,
        smallest_pivot: smallest,
        rank,
    })
}

/// Lower factor `L` with `L L^T = M`; pivots within `1e-10 |M|` of zero give zero columns.
pub fn factor_psd<T: Real>(m: &SymmetricMatrix<T>) -> Result<PsdFactor<T>> {
    let tol = T::tol_floor(1e-10) * m.max_abs();
    cholesky(m, tol, false)
}

/// PSD Cholesky with pivots below `rel_tol |M|` clamped to zero.
pub(crate) fn factor_psd_rel<T: Real>(m: &SymmetricMatrix<T>, rel_tol: f64) -> Result<PsdFactor<T>> {
    let tol = T::tol_floor(rel_tol) * m.max_abs();
    cholesky(m, tol, false)
}

/// Cholesky that refuses pivots at or below `rel_tol |M|`.
pub(crate) fn factor_pd<T: Real>(m: &SymmetricMatrix<T>, rel_tol: f64) -> Result<PsdFactor<T>> {
    let tol = T::tol_floor(rel_tol) * m.max_abs();
    cholesky(m, tol, true)
}

/// Number of independent Hessian entries, `m(m+1)/2`.
pub fn nu(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Coordinates of the Hessian-as-vector: diagonal first, then `(i, j)` with `i < j` lexicographically.
pub fn hessian_coords(m: usize) -> Vec<(usize, usize)> {
    let mut c: Vec<(usize, usize)> = (0..m).map(|i| (i, i)).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            c.push((i, j));
        }
    }
    c
}

/// Symmetric matrix from its Hessian-vector coordinates.
pub fn sym_from_coords<T: Real>(m: usize, v: &[T]) -> SymmetricMatrix<T> {
    let mut s = SymmetricMatrix::zeros(m);
    for (k, &(i, j)) in hessian_coords(m).iter().enumerate() {
        s.set(i, j, v[k]);
    }
    s
}

/// Determinant of the symmetric matrix with Hessian-vector coordinates `v` (m <= 3 closed form).
#[inline]
pub fn det_from_coords<T: Real>(m: usize, v: &[T]) -> T {
    match m {
        1 => v[0],
        2 => v[0] * v[1] - v[2] * v[2],
        3 => {
            let (a, d, f, b, c, e) = (v[0], v[1], v[2], v[3], v[4], v[5]);
            a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
        }
        _ => sym_from_coords(m, v).determinant(),
    }
}
