//! Small dense complex linear algebra: a column-major complex matrix and a
//! minimum-norm least-squares solver for the greedy recovery baselines.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<F>>,
}

impl<F: Scalar> CMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(F::zero(), F::zero()); rows * cols],
        }
    }

    /// Build from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<Complex<F>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::mismatch("matrix data length", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<Complex<F>>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::mismatch("column length", rows, c.len()));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<F> {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex<F>) {
        self.data[c * self.rows + r] = v;
    }

    pub fn column(&self, c: usize) -> &[Complex<F>] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [Complex<F>] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn as_col_major(&self) -> &[Complex<F>] {
        &self.data
    }

    /// Sub-matrix made of the listed columns.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &c in idx {
            data.extend_from_slice(self.column(c));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
        if x.len() != self.cols {
            return Err(Error::mismatch("vector length", self.cols, x.len()));
        }
        let mut out = vec![Complex::new(F::zero(), F::zero()); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            if xc.re == F::zero() && xc.im == F::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.column(c)) {
                *o += a * xc;
            }
        }
        Ok(out)
    }

    /// `self^H * y`.
    pub fn hermitian_mul_vec(&self, y: &[Complex<F>]) -> Result<Vec<Complex<F>>> {
        if y.len() != self.rows {
            return Err(Error::mismatch("vector length", self.rows, y.len()));
        }
        Ok((0..self.cols).map(|c| inner(self.column(c), y)).collect())
    }

    pub fn column_norms(&self) -> Vec<F> {
        (0..self.cols).map(|c| norm(self.column(c))).collect()
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(F) -> G) -> CMatrix<G> {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(f(z.re), f(z.im)))
                .collect(),
        }
    }

    /// Largest normalised Hermitian inner product between distinct columns.
    pub fn mutual_coherence(&self) -> F {
        let norms = self.column_norms();
        let mut best = F::zero();
        for i in 0..self.cols {
            for j in (i + 1)..self.cols {
                let c = inner(self.column(i), self.column(j)).norm() / (norms[i] * norms[j]);
                if c > best {
                    best = c;
                }
            }
        }
        best
    }
}

/// Hermitian inner product `a^H b`.
pub fn inner<F: Scalar>(a: &[Complex<F>], b: &[Complex<F>]) -> Complex<F> {
    a.iter()
        .zip(b)
        .fold(Complex::new(F::zero(), F::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr<F: Scalar>(a: &[Complex<F>]) -> F {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm<F: Scalar>(a: &[Complex<F>]) -> F {
    norm_sqr(a).sqrt()
}

/// Solution of a least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares<F> {
    pub coefficients: Vec<Complex<F>>,
    pub residual: Vec<Complex<F>>,
    /// Set when the normal matrix was numerically singular and the
    /// minimum-norm (pseudo-inverse) solution was returned.
    pub rank_deficient: bool,
}

/// Minimum-norm least-squares fit of `y` on the columns of `a`.
///
/// Solves the normal equations through an eigendecomposition of the real
/// embedding of `a^H a`, so singular directions are dropped exactly as a
/// pseudo-inverse would.
pub fn lstsq<F: Scalar>(a: &CMatrix<F>, y: &[Complex<F>]) -> Result<LeastSquares<F>> {
    let s = a.cols();
    if y.len() != a.rows() {
        return Err(Error::mismatch("observation length", a.rows(), y.len()));
    }
    if s == 0 {
        return Ok(LeastSquares {
            coefficients: Vec::new(),
            residual: y.to_vec(),
            rank_deficient: false,
        });
    }
    let n = 2 * s;
    // real embedding [[Re G, -Im G], [Im G, Re G]]
    let mut g = vec![F::zero(); n * n];
    for i in 0..s {
        for j in i..s {
            let v = inner(a.column(i), a.column(j));
            let (re, im) = (v.re, v.im);
            // G[i][j] = v, G[j][i] = conj(v)
            g[i * n + j] = re;
            g[j * n + i] = re;
            g[(i + s) * n + (j + s)] = re;
            g[(j + s) * n + (i + s)] = re;
            g[i * n + (j + s)] = -im;
            g[(j + s) * n + i] = -im;
            g[(i + s) * n + j] = im;
            g[j * n + (i + s)] = im;
        }
    }
    let bh = a.hermitian_mul_vec(y)?;
    let mut b = vec![F::zero(); n];
    for i in 0..s {
        b[i] = bh[i].re;
        b[i + s] = bh[i].im;
    }

    let (evals, evecs) = symmetric_eigen(&g, n);
    let lmax = evals.iter().fold(F::zero(), |m, &l| m.max(l.abs()));
    let tol = lmax * F::epsilon() * F::lit(64.0 * n as f64);
    let mut x = vec![F::zero(); n];
    let mut rank_deficient = false;
    for k in 0..n {
        let l = evals[k];
        if l <= tol {
            rank_deficient = true;
            continue;
        }
        let mut proj = F::zero();
        for i in 0..n {
            proj += evecs[i * n + k] * b[i];
        }
        let scale = proj / l;
        for i in 0..n {
            x[i] += evecs[i * n + k] * scale;
        }
    }
    let coefficients: Vec<Complex<F>> = (0..s).map(|i| Complex::new(x[i], x[i + s])).collect();
    let fit = a.mul_vec(&coefficients)?;
    let residual = y.iter().zip(&fit).map(|(&u, &v)| u - v).collect();
    Ok(LeastSquares {
        coefficients,
        residual,
        rank_deficient,
    })
}

/// Cyclic Jacobi eigendecomposition of a dense symmetric `n x n` matrix
/// (row-major). Returns eigenvalues and the row-major eigenvector matrix whose
/// column `k` belongs to eigenvalue `k`.
pub fn symmetric_eigen<F: Scalar>(m: &[F], n: usize) -> (Vec<F>, Vec<F>) {
    let mut a = m.to_vec();
    let mut v = vec![F::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = F::one();
    }
    let two = F::lit(2.0);
    for _sweep in 0..100 {
        let mut off = F::zero();
        let mut diag = F::zero();
        for i in 0..n {
            diag += a[i * n + i] * a[i * n + i];
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= F::epsilon() * F::epsilon() * diag || off == F::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == F::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let evals = (0..n).map(|i| a[i * n + i]).collect();
    (evals, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn lstsq_recovers_exact_coefficients() {
        let a = CMatrix::from_columns(
            3,
            &[
                vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, -0.5)],
                vec![c(0.0, -1.0), c(2.0, 0.0), c(1.0, 1.0)],
            ],
        )
        .unwrap();
        let x = [c(0.3, -1.2), c(-2.0, 0.5)];
        let y = a.mul_vec(&x).unwrap();
        let ls = lstsq(&a, &y).unwrap();
        assert!(!ls.rank_deficient);
        for (u, v) in ls.coefficients.iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
        assert!(norm(&ls.residual) < 1e-12);
    }

    #[test]
    fn duplicated_column_is_flagged_and_min_norm() {
        let col = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let a = CMatrix::from_columns(2, &[col.clone(), col.clone()]).unwrap();
        let y = vec![c(2.0, 0.0), c(0.0, 2.0)];
        let ls = lstsq(&a, &y).unwrap();
        assert!(ls.rank_deficient);
        // minimum-norm split is even
        assert!((ls.coefficients[0] - c(1.0, 0.0)).norm() < 1e-10);
        assert!((ls.coefficients[1] - c(1.0, 0.0)).norm() < 1e-10);
        assert!(norm(&ls.residual) < 1e-10);
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let a = CMatrix::from_columns(
            4,
            &[
                vec![c(1.0, 0.2), c(0.0, 1.0), c(0.5, -0.5), c(0.1, 0.0)],
                vec![c(0.0, -1.0), c(2.0, 0.0), c(1.0, 1.0), c(-0.3, 0.4)],
            ],
        )
        .unwrap();
        let y = vec![c(1.0, 1.0), c(-1.0, 0.5), c(0.2, 0.0), c(3.0, -1.0)];
        let ls = lstsq(&a, &y).unwrap();
        for k in 0..2 {
            assert!(inner(a.column(k), &ls.residual).norm() < 1e-10);
        }
    }
}
