//! Dense complex matrices sized for per-trial receiver construction.
//!
//! Everything here is a small value type. Matrices are stored row-major and
//! never exceed a few hundred rows, so the factorizations are plain
//! unblocked loops.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Max elementwise |M - Mᴴ| accepted by [`hermitian_solve`], relative to
/// `max(1, ‖M‖_max)`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Components of an arcsin argument may overshoot ±1 by this much before the
/// input is rejected.
pub const ARCSIN_BAND: f64 = 1e-9;

/// Relative pivot floor below which a Cholesky factorization is declared failed.
const PIVOT_FLOOR: f64 = 1e-14;

const JITTER_SCALE: f64 = 1e-10;

pub type ComplexVector = Vec<Complex64>;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag_real(&vec![1.0; n])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_diag_real(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn column_vector(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Real parts of the main diagonal.
    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }

    /// `diag(M)` as a matrix: off-diagonal entries zeroed.
    pub fn diag_part(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] = self[(i, i)];
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Adds `value` to each diagonal entry.
    pub fn add_diag(&self, value: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)].re += value;
        }
        out
    }

    /// `diag(left) · M · diag(right)` for real diagonal scalings.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Self {
        assert_eq!(left.len(), self.rows);
        assert_eq!(right.len(), self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * (left[i] * right[j]))
    }

    pub fn scale_rows(&self, left: &[f64]) -> Self {
        self.scale_rows_cols(left, &vec![1.0; self.cols])
    }

    pub fn scale_cols(&self, right: &[f64]) -> Self {
        self.scale_rows_cols(&vec![1.0; self.rows], right)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `Mᴴ·M` without forming the adjoint.
    pub fn gram(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                let a = row[i].conj();
                for j in 0..self.cols {
                    out.data[i * self.cols + j] += a * row[j];
                }
            }
        }
        out
    }

    /// `M·Mᴴ` without forming the adjoint.
    pub fn outer_gram(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v: Complex64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(&a, &b)| a * b.conj())
                    .sum();
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<ComplexVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max elementwise |M - Mᴴ|; infinite for non-square matrices.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for z in self.row(i) {
                write!(f, " {:+.6}{:+.6}j", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Lower-triangular Cholesky factor `L` with `M = L·Lᴴ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: ComplexMatrix,
}

impl Cholesky {
    /// Factors the lower triangle of `m`; the upper triangle is not read.
    pub fn new(m: &ComplexMatrix) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky of a {}x{} matrix",
                m.rows(),
                m.cols()
            )));
        }
        let scale = m.diag_real().into_iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        let floor = PIVOT_FLOOR * scale.max(f64::MIN_POSITIVE);
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = m[(j, j)].re;
            for k in 0..j {
                pivot -= l[(j, k)].norm_sqr();
            }
            if !(pivot > floor) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { row: j, pivot });
            }
            let d = pivot.sqrt();
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { factor: l })
    }

    pub fn factor(&self) -> &ComplexMatrix {
        &self.factor
    }

    /// Solves `L·Lᴴ·X = B` column by column.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.factor.rows();
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "solve with {n}x{n} factor and {} right-hand rows",
                b.rows()
            )));
        }
        let l = &self.factor;
        let mut x = b.clone();
        for c in 0..b.cols() {
            // forward: L·w = b
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)].re;
            }
            // backward: Lᴴ·x = w
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= l[(k, i)].conj() * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)].re;
            }
        }
        Ok(x)
    }
}

/// Solves `M·X = B` for Hermitian positive-definite `M`.
///
/// If the factorization fails, it is retried once with
/// `1e-10 · trace(M) / n` added to the diagonal.
pub fn hermitian_solve(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve_impl(m, b, true)
}

/// [`hermitian_solve`] without the jitter retry, for Gram matrices whose
/// singularity must be reported rather than regularized.
pub fn hermitian_solve_strict(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve_impl(m, b, false)
}

fn solve_impl(m: &ComplexMatrix, b: &ComplexMatrix, jitter_retry: bool) -> Result<ComplexMatrix> {
    let n = m.rows();
    if m.cols() != n || b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "hermitian_solve with {}x{} system and {}x{} right-hand side",
            m.rows(),
            m.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_TOLERANCE * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let chol = match Cholesky::new(m) {
        Ok(c) => c,
        Err(first) if !jitter_retry => return Err(first),
        Err(first) => {
            let jitter = JITTER_SCALE * m.trace().re / n as f64;
            if !(jitter > 0.0) {
                return Err(first);
            }
            log::debug!("Cholesky failed ({first}); retrying with jitter {jitter:e}");
            Cholesky::new(&m.add_diag(jitter))?
        }
    };
    let x = chol.solve(b)?;
    if !x.is_finite() {
        return Err(Error::NotPositiveDefinite {
            row: 0,
            pivot: f64::NAN,
        });
    }
    Ok(x)
}

/// Componentwise arcsin: `arcsin(Re c) + j·arcsin(Im c)` for every entry.
///
/// Components within [`ARCSIN_BAND`] outside [-1, 1] are clamped first.
pub fn elementwise_arcsin(c: &ComplexMatrix) -> Result<ComplexMatrix> {
    let component = |v: f64, row: usize, col: usize| -> Result<f64> {
        if !(v.abs() <= 1.0 + ARCSIN_BAND) {
            return Err(Error::DomainError { row, col, value: v });
        }
        Ok(v.clamp(-1.0, 1.0).asin())
    };
    let mut out = ComplexMatrix::zeros(c.rows(), c.cols());
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            let z = c[(i, j)];
            out[(i, j)] = Complex64::new(component(z.re, i, j)?, component(z.im, i, j)?);
        }
    }
    Ok(out)
}

/// Euclidean norm of a complex vector.
pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
