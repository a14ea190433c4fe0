//! Small dense matrices and a pivoted LU inverse for information matrices.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use crate::error::{CalibError, Result};

/// Condition bound above which an information matrix is treated as singular.
pub const DEFAULT_CONDITION_GUARD: f64 = 1e12;

/// Square, row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows do not form a square.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), dim, "matrix rows must have length {dim}");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric to `rel_tol` relative to the largest entry magnitude.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.dim).all(|i| {
            (i + 1..self.dim).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= rel_tol * scale)
        })
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self[(i, l)];
                for j in 0..n {
                    out[(i, j)] += a * rhs[(l, j)];
                }
            }
        }
        out
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.dim, self.dim)?;
        for row in self.rows() {
            write!(f, " ")?;
            for v in row {
                write!(f, " {v:>14.6e}")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Inverts a symmetric matrix.
///
/// The matrix is first equilibrated by its diagonal (`D⁻¹ A D⁻¹` with
/// `D = diag(sqrt|a_ii|)`) so that the conditioning test is independent of the
/// units of the parameters; information matrices routinely mix entries of
/// order 1e-8 and 1e7. The equilibrated matrix is factored by LU with partial
/// pivoting and its 1-norm condition number is checked against `guard`.
pub fn invert(matrix: &Matrix, guard: f64) -> Result<Matrix> {
    let n = matrix.dim();
    if !matrix.is_finite() {
        return Err(CalibError::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    if !matrix.is_symmetric(1e-9) {
        return Err(CalibError::InvalidConfig(
            "matrix passed to invert is not symmetric".into(),
        ));
    }

    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = matrix[(i, i)].abs().sqrt();
            if d > 0.0 {
                d
            } else {
                1.0
            }
        })
        .collect();
    let mut eq = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            eq[(i, j)] = matrix[(i, j)] / (scale[i] * scale[j]);
        }
    }

    let lu = LuDecomposition::factor(&eq)?;
    let eq_inv = lu.inverse();
    let condition = eq.norm_one() * eq_inv.norm_one();
    if !condition.is_finite() || condition > guard {
        return Err(CalibError::SingularInformation { condition });
    }

    let mut inv = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            inv[(i, j)] = eq_inv[(i, j)] / (scale[i] * scale[j]);
        }
    }
    // The input is symmetric, so the exact inverse is too.
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = avg;
            inv[(j, i)] = avg;
        }
    }
    Ok(inv)
}

struct LuDecomposition {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuDecomposition {
    fn factor(a: &Matrix) -> Result<Self> {
        let n = a.dim();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| lu[(r1, col)].abs().total_cmp(&lu[(r2, col)].abs()))
                .unwrap_or(col);
            if lu[(pivot_row, col)] == 0.0 {
                return Err(CalibError::SingularInformation {
                    condition: f64::INFINITY,
                });
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[(col, col)];
            for row in col + 1..n {
                let factor = lu[(row, col)] / pivot;
                lu[(row, col)] = factor;
                for j in col + 1..n {
                    lu[(row, j)] -= factor * lu[(col, j)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    fn inverse(&self) -> Matrix {
        let n = self.lu.dim();
        let mut inv = Matrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}
