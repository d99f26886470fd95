//! Small dense complex linear algebra: just enough for Haar sampling, gate
//! application and permanents.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                left: self.cols,
                right: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Rows permuted so that row `i` of the result is row `perm[i]` of self.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self[(perm[r], c)])
    }

    /// `max |(A†A − I)_{jk}|`, i.e. how far the columns are from orthonormal.
    pub fn isometry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.cols {
            for b in 0..self.cols {
                let mut s = Complex64::new(0.0, 0.0);
                for r in 0..self.rows {
                    s += self[(r, a)].conj() * self[(r, b)];
                }
                if a == b {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Complex Gaussian with independent real and imaginary parts of standard
/// deviation `part_sd`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, part_sd: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(part_sd * re, part_sd * im)
}

/// `rows × cols` Ginibre matrix with `E|x|² = 1`.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, sd))
}

/// Orthonormalizes the columns in place with two passes of modified
/// Gram–Schmidt. The implied `R` factor has a positive real diagonal, which
/// is the phase convention that makes QR of a Ginibre matrix Haar.
fn orthonormalize_columns(m: &mut CMatrix) {
    let (rows, cols) = (m.rows, m.cols);
    for c in 0..cols {
        for _pass in 0..2 {
            for prev in 0..c {
                let mut dot = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    dot += m[(r, prev)].conj() * m[(r, c)];
                }
                for r in 0..rows {
                    let q = m[(r, prev)];
                    m[(r, c)] -= dot * q;
                }
            }
        }
        let norm = (0..rows).map(|r| m[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..rows {
            m[(r, c)] /= norm;
        }
    }
}

/// The first `cols` columns of a Haar-random `rows × rows` unitary.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<CMatrix> {
    if cols == 0 || cols > rows {
        return Err(Error::invalid(format!(
            "isometry needs 1 <= cols <= rows, got {rows}x{cols}"
        )));
    }
    let mut m = ginibre(rows, cols, rng);
    orthonormalize_columns(&mut m);
    Ok(m)
}

/// Haar-random `d × d` unitary.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    haar_isometry(d, d, rng)
}
