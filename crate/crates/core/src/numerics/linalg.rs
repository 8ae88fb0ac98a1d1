use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use super::Dual2;
use crate::{Error, Result};

/// Relative pivot threshold below which a matrix counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// # Panics
    /// If the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// # Panics
    /// On incompatible shapes.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(l, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec shape");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ M y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn symmetry_gap(&self) -> f64 {
        self.sub(&self.transpose()).max_abs()
    }

    pub fn antisymmetry_gap(&self) -> f64 {
        self.add(&self.transpose()).max_abs()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn determinant(&self) -> f64 {
        Lu::decompose(self).determinant()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    min_pivot: f64,
    threshold: f64,
}

impl Lu {
    /// Factor without failing; exactly zero pivot columns are skipped.
    ///
    /// # Panics
    /// If `a` is not square.
    pub fn decompose(a: &Matrix) -> Self {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut min_pivot = f64::INFINITY;
        for c in 0..n {
            let (p, pmax) = (c..n)
                .map(|r| (r, lu[(r, c)].abs()))
                .fold(
                    (c, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            min_pivot = min_pivot.min(pmax);
            if p != c {
                for j in 0..n {
                    lu.data.swap(c * n + j, p * n + j);
                }
                perm.swap(c, p);
                sign = -sign;
            }
            let piv = lu[(c, c)];
            if piv == 0.0 {
                continue;
            }
            for r in c + 1..n {
                let f = lu[(r, c)] / piv;
                lu[(r, c)] = f;
                if f != 0.0 {
                    for j in c + 1..n {
                        lu[(r, j)] -= f * lu[(c, j)];
                    }
                }
            }
        }
        if n == 0 {
            min_pivot = 0.0;
        }
        Self {
            lu,
            perm,
            sign,
            min_pivot,
            threshold: SINGULAR_RTOL * a.norm_inf(),
        }
    }

    /// Factor and reject pivots at or below `1e-12·‖A‖∞`.
    pub fn factor(a: &Matrix) -> Result<Self> {
        let lu = Self::decompose(a);
        if a.rows > 0 && lu.is_singular() {
            return Err(Error::SingularMatrix {
                pivot: lu.min_pivot,
                threshold: lu.threshold,
            });
        }
        Ok(lu)
    }

    pub fn is_singular(&self) -> bool {
        self.min_pivot <= self.threshold
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn determinant(&self) -> f64 {
        (0..self.lu.rows).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n, "rhs length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lu.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

pub fn solve_dense(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return Err(Error::ShapeMismatch(format!(
            "rhs of length {} for a {}x{} system",
            b.len(),
            a.rows,
            a.cols
        )));
    }
    Ok(Lu::factor(a)?.solve(b))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Lu::factor(a)?.inverse())
}

/// Solve `A x = b` where the entries carry dual parts.
///
/// Pivoting follows the real parts, so derivatives of the solution come out
/// exact as long as the real system is nonsingular.
pub fn solve_dual(a: &[Dual2], n: usize, b: &[Dual2]) -> Result<Vec<Dual2>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "dual system with {} matrix entries and {} rhs entries for n = {n}",
            a.len(),
            b.len()
        )));
    }
    let scale = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].value().abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let threshold = SINGULAR_RTOL * scale;
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&r, &s| {
                m[r * n + c]
                    .value()
                    .abs()
                    .total_cmp(&m[s * n + c].value().abs())
            })
            .unwrap_or(c);
        let piv_abs = m[p * n + c].value().abs();
        if piv_abs <= threshold {
            return Err(Error::SingularMatrix {
                pivot: piv_abs,
                threshold,
            });
        }
        if p != c {
            for j in 0..n {
                m.swap(c * n + j, p * n + j);
            }
            x.swap(c, p);
        }
        let inv = m[c * n + c].recip();
        for r in c + 1..n {
            let f = m[r * n + c] * inv;
            if f.value() == 0.0 && f.is_constant() {
                continue;
            }
            for j in c + 1..n {
                let t = f * m[c * n + j];
                m[r * n + j] -= t;
            }
            let t = f * x[c];
            x[r] -= t;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    Ok(x)
}

/// Orthonormal basis of the null space of `a`.
///
/// Uses reduced row echelon form with pivots at or below `tol·max|a|` treated as zero,
/// then Gram–Schmidt.
pub fn null_space(a: &Matrix, tol: f64) -> Vec<Vec<f64>> {
    let (rows, cols) = (a.rows, a.cols);
    let mut m = a.clone();
    let cutoff = tol * a.max_abs().max(1.0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (p, pmax) = (r..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold(
                (r, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pmax <= cutoff {
            for i in r..rows {
                m[(i, c)] = 0.0;
            }
            continue;
        }
        for j in 0..cols {
            m.data.swap(r * cols + j, p * cols + j);
        }
        let piv = m[(r, c)];
        for j in 0..cols {
            m[(r, j)] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        m[(i, j)] -= f * m[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[(row, free)];
        }
        basis.push(v);
    }
    gram_schmidt(basis)
}

/// Modified Gram–Schmidt; vectors that collapse to zero are dropped.
pub fn gram_schmidt(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        let n0 = norm(&v);
        for u in &out {
            let d = dot(u, &v);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        let n = norm(&v);
        if n > 1e-12 * n0.max(1.0) {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
