//! Dense square matrices and the symmetric / positive-definite wrappers
//! used throughout the crate.
//!
//! Everything here is small-`n` dense linear algebra stored row-major in a
//! single `Vec<f64>`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::matfun;

/// Relative symmetry tolerance: `‖S − Sᵀ‖_F ≤ SYMMETRY_TOL · (1 + ‖S‖_F)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative positive-definiteness threshold: the smallest eigenvalue must
/// exceed `SPD_TOL · max(1, λ_max)`.
pub const SPD_TOL: f64 = 1e-12;

/// A dense real `n × n` matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from a flat row-major slice of length `n²`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {n}x{n} matrix, found {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Matrix { n, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), n, "matrix rows must have length {n}");
            data.extend_from_slice(r);
        }
        Matrix { n, data }
    }

    /// The planar rotation `[[cos θ, sin θ], [−sin θ, cos θ]]`.
    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Matrix::from_rows(&[[c, s], [-s, c]])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut t = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn dist_frobenius(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖S − Sᵀ‖_F`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = self[(i, j)] - self[(j, i)];
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetric_part(&self) -> Matrix {
        let n = self.n;
        let mut s = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// `(A − Aᵀ) / 2`.
    pub fn skew_part(&self) -> Matrix {
        let n = self.n;
        let mut k = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = 0.5 * (self[(i, j)] - self[(j, i)]);
            }
        }
        k
    }

    /// `‖AᵀA − I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        (&self.transpose() * self).dist_frobenius(&Matrix::identity(self.n))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Lu {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Lu {
            n,
            lu: a,
            perm,
            sign,
            singular,
        }
    }

    pub fn det(&self) -> f64 {
        self.lu().det()
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let lu = self.lu();
        if lu.singular {
            return Err(Error::SingularInput);
        }
        let n = self.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let x = lu.solve_vec(&e);
            inv.set_column(j, &x);
        }
        if !inv.is_finite() {
            return Err(Error::SingularInput);
        }
        Ok(inv)
    }

    /// Solves `self · X = rhs` column by column.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let lu = self.lu();
        if lu.singular {
            return Err(Error::SingularInput);
        }
        let n = self.n;
        let mut x = Matrix::zeros(n);
        for j in 0..n {
            let col = lu.solve_vec(&rhs.column(j));
            x.set_column(j, &col);
        }
        Ok(x)
    }

    /// Embeds `block` into a copy of `self` with its rows/columns mapped through `idx`.
    pub fn with_block(&self, idx: &[usize], block: &Matrix) -> Matrix {
        let mut m = self.clone();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = block[(a, b)];
            }
        }
        m
    }
}

/// Packed LU factors of a square matrix.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.n)
            .map(|i| self.lu[i * self.n + i])
            .product::<f64>()
            * self.sign
    }

    /// Sign of the determinant and `ln |det|`, robust to over/underflow.
    pub fn log_abs_det(&self) -> (f64, f64) {
        if self.singular {
            return (0.0, f64::NEG_INFINITY);
        }
        let mut sign = self.sign;
        let mut acc = 0.0;
        for i in 0..self.n {
            let d = self.lu[i * self.n + i];
            if d < 0.0 {
                sign = -sign;
            }
            acc += d.abs().ln();
        }
        (sign, acc)
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            y[i] -= row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum::<f64>();
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&y[i + 1..]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        y
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in matrix product");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{}) [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Accepts `m` if its symmetry defect is within [`SYMMETRY_TOL`]; the
    /// stored matrix is the exact symmetric part.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        let defect = m.symmetry_defect();
        if defect > SYMMETRY_TOL * (1.0 + m.frobenius_norm()) {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric (defect {defect:e})"
            )));
        }
        Ok(SymMatrix(m.symmetric_part()))
    }

    /// Takes the symmetric part of `m` unconditionally.
    pub fn symmetrize(m: &Matrix) -> Self {
        SymMatrix(m.symmetric_part())
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(self.0.scale(s))
    }
}

impl std::ops::Deref for SymMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// A symmetric positive-definite matrix that passed eigenvalue certification.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    /// Certifies `m` as symmetric positive definite.
    pub fn new(m: Matrix) -> Result<Self> {
        Self::from_sym(SymMatrix::new(m)?)
    }

    pub fn from_sym(s: SymMatrix) -> Result<Self> {
        let eig = matfun::sym_eig(&s)?;
        certify_eigenvalues(&eig.values)?;
        Ok(SpdMatrix(s.0))
    }

    /// Symmetrizes `m` before certifying it; for matrices that are SPD in
    /// exact arithmetic but carry rounding asymmetry.
    pub fn from_computed(m: &Matrix) -> Result<Self> {
        Self::from_sym(SymMatrix::symmetrize(m))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(Matrix::identity(n))
    }

    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        SpdMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn as_sym(&self) -> SymMatrix {
        SymMatrix(self.0.clone())
    }
}

impl std::ops::Deref for SpdMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Checks eigenvalues (descending) against the SPD threshold.
pub(crate) fn certify_eigenvalues(values: &[f64]) -> Result<()> {
    let max = values.first().copied().unwrap_or(0.0);
    let min = values.last().copied().unwrap_or(0.0);
    if min > SPD_TOL * max.max(1.0) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        })
    }
}
