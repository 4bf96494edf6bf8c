//! Partial DFT measurement matrices and the dense complex kernels the
//! estimators are built on.
//!
//! Row `r`, column `c` of the measurement matrix is `exp(-j 2π P_r c / N)`
//! where `P_r` is the r-th pilot index. Entries are looked up from a table of
//! the `N` roots of unity indexed by `P_r * c mod N`, so two matrices built on
//! the same `N` agree bit-for-bit wherever the exponents agree modulo `N`.

use crate::error::{Error, Result};
use crate::pilot_alloc::PilotPattern;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Conditioning guard for the normal equations.
pub const MAX_CONDITION: f64 = 1e12;

/// `exp(-j 2π m / n)` for `m = 0..n`.
pub fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 / n as f64))
        .collect()
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
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

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Euclidean norm of a complex vector.
pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// The partial DFT matrix `F_p` together with the pattern it was built from.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    n: usize,
    pattern: PilotPattern,
    matrix: ComplexMatrix,
}

/// Builds the `N_p x N` partial DFT matrix for `pattern`.
pub fn build_partial_dft(n: usize, pattern: &PilotPattern) -> Result<MeasurementModel> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    if let Some(&index) = pattern.indices().iter().find(|&&p| p >= n) {
        return Err(Error::IndexOutOfRange { index, n });
    }
    if pattern.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pattern.n(),
        });
    }
    Ok(MeasurementModel::new(pattern))
}

impl MeasurementModel {
    pub fn new(pattern: &PilotPattern) -> Self {
        let n = pattern.n();
        let w = twiddles(n);
        let matrix = ComplexMatrix::from_fn(pattern.len(), n, |r, c| {
            w[(pattern.indices()[r] * c) % n]
        });
        Self {
            n,
            pattern: pattern.clone(),
            matrix,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_pilots(&self) -> usize {
        self.matrix.rows()
    }

    pub fn pattern(&self) -> &PilotPattern {
        &self.pattern
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `F_p h`.
    pub fn apply(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        self.matrix.mul_vec(h)
    }

    /// `F_p h` skipping zero entries of `h`.
    fn apply_sparse(&self, h: &[Complex64]) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; self.n_pilots()];
        for (c, &hc) in h.iter().enumerate() {
            if hc == zero {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.matrix[(r, c)] * hc;
            }
        }
        out
    }

    /// `F_p^H y`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.n_pilots() {
            return Err(Error::DimensionMismatch {
                expected: self.n_pilots(),
                found: y.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (r, &yr) in y.iter().enumerate() {
            for (o, f) in out.iter_mut().zip(self.matrix.row(r)) {
                *o += f.conj() * yr;
            }
        }
        Ok(out)
    }

    /// Dense `G = (1/N) F_p^H F_p`.
    ///
    /// `G` is circulant: `G[i][j]` depends only on `(j - i) mod N`. The
    /// diagonal is set to `N_p / N` directly.
    pub fn distorting_matrix(&self) -> ComplexMatrix {
        let n = self.n;
        let w = twiddles(n);
        let scale = 1.0 / n as f64;
        let lag: Vec<Complex64> = (0..n)
            .map(|d| {
                if d == 0 {
                    Complex64::new(self.n_pilots() as f64 * scale, 0.0)
                } else {
                    self.pattern
                        .indices()
                        .iter()
                        .map(|&p| w[(p * d) % n])
                        .sum::<Complex64>()
                        * scale
                }
            })
            .collect();
        ComplexMatrix::from_fn(n, n, |i, j| lag[(j + n - i) % n])
    }

    /// `G h` without forming `G`.
    pub fn apply_distorting(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        if h.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: h.len(),
            });
        }
        let y = self.apply_sparse(h);
        let scale = 1.0 / self.n as f64;
        Ok(self
            .apply_adjoint(&y)?
            .into_iter()
            .map(|v| v * scale)
            .collect())
    }

    /// Minimum-norm solution `F_p^+ y`, which for distinct DFT rows is `(1/N) F_p^H y`.
    pub fn min_norm_estimate(&self, observed: &[Complex64]) -> Result<Vec<Complex64>> {
        let scale = 1.0 / self.n as f64;
        Ok(self
            .apply_adjoint(observed)?
            .into_iter()
            .map(|v| v * scale)
            .collect())
    }

    /// Gram matrix `F_{p,S}^H F_{p,S}` of the columns in `support`.
    pub fn support_gram(&self, support: &[usize]) -> Result<ComplexMatrix> {
        self.check_support(support)?;
        let s = support.len();
        let mut gram = ComplexMatrix::zeros(s, s);
        for a in 0..s {
            for b in a..s {
                let v: Complex64 = (0..self.n_pilots())
                    .map(|r| self.matrix[(r, support[a])].conj() * self.matrix[(r, support[b])])
                    .sum();
                gram[(a, b)] = v;
                gram[(b, a)] = v.conj();
            }
        }
        Ok(gram)
    }

    fn check_support(&self, support: &[usize]) -> Result<()> {
        if let Some(&index) = support.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        Ok(())
    }

    /// Least squares restricted to the columns in `support`; zero elsewhere.
    pub fn least_squares_on_support(
        &self,
        observed: &[Complex64],
        support: &[usize],
    ) -> Result<Vec<Complex64>> {
        if observed.len() != self.n_pilots() {
            return Err(Error::DimensionMismatch {
                expected: self.n_pilots(),
                found: observed.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        if support.is_empty() {
            return Ok(out);
        }
        if support.len() > self.n_pilots() {
            return Err(Error::RankDeficient {
                condition: f64::INFINITY,
            });
        }
        let gram = self.support_gram(support)?;
        let rhs: Vec<Complex64> = support
            .iter()
            .map(|&c| {
                (0..self.n_pilots())
                    .map(|r| self.matrix[(r, c)].conj() * observed[r])
                    .sum()
            })
            .collect();
        let chol = Cholesky::factor(&gram)?;
        for (&c, v) in support.iter().zip(chol.solve(&rhs)) {
            out[c] = v;
        }
        Ok(out)
    }
}

/// Cholesky factor `A = L L^H` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: ComplexMatrix,
}

impl Cholesky {
    /// Fails with `RankDeficient` when the matrix is not numerically positive
    /// definite or the condition estimate `(max L_ii / min L_ii)^2` exceeds
    /// [`MAX_CONDITION`].
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.cols(),
            });
        }
        let mut l = ComplexMatrix::zeros(n, n);
        let scale = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > scale * 1e-14) {
                return Err(Error::RankDeficient {
                    condition: f64::INFINITY,
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = v / djj;
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| l[(i, i)].re).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = (max / min).powi(2);
        if condition > MAX_CONDITION {
            return Err(Error::RankDeficient { condition });
        }
        Ok(Self { lower: l })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let l = &self.lower;
        let n = l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = l[(i, k)];
                let yk = y[k];
                y[i] -= lik * yk;
            }
            y[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = l[(k, i)].conj();
                let yk = y[k];
                y[i] -= lki * yk;
            }
            y[i] /= l[(i, i)];
        }
        y
    }

    /// `trace(A^{-1})`.
    pub fn inverse_trace(&self) -> f64 {
        let n = self.lower.rows();
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        let mut trace = 0.0;
        for i in 0..n {
            e[i] = Complex64::new(1.0, 0.0);
            trace += self.solve(&e)[i].re;
            e[i] = Complex64::new(0.0, 0.0);
        }
        trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pattern(n: usize, idx: &[usize]) -> PilotPattern {
        PilotPattern::new(n, idx.to_vec()).unwrap()
    }

    #[test]
    fn zero_frequency_row_is_all_ones() {
        let m = build_partial_dft(4, &pattern(4, &[0])).unwrap();
        for v in m.matrix().row(0) {
            assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn quarter_turn_row() {
        let m = build_partial_dft(4, &pattern(4, &[1])).unwrap();
        let expected = [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        for (v, e) in m.matrix().row(0).iter().zip(expected) {
            assert!((v - e).norm() < 1e-15);
        }
    }

    #[test]
    fn entries_match_direct_exponential() {
        let p = [1usize, 2, 4];
        let m = build_partial_dft(7, &pattern(7, &p)).unwrap();
        assert_eq!((m.matrix().rows(), m.matrix().cols()), (3, 7));
        for (r, &pr) in p.iter().enumerate() {
            for col in 0..7 {
                let direct = Complex64::from_polar(1.0, -2.0 * PI * (pr * col) as f64 / 7.0);
                assert!((m.matrix()[(r, col)] - direct).norm() < 1e-12);
                assert!((m.matrix()[(r, col)].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_length_is_rejected() {
        let err = build_partial_dft(4, &pattern(8, &[5])).unwrap_err();
        assert_eq!(err, Error::IndexOutOfRange { index: 5, n: 4 });
    }

    #[test]
    fn full_pattern_gives_identity() {
        let m = MeasurementModel::new(&pattern(8, &(0..8).collect::<Vec<_>>()));
        let g = m.distorting_matrix();
        assert!(g.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-12);
    }

    #[test]
    fn distorting_diagonal_and_idempotence() {
        let m = MeasurementModel::new(&pattern(7, &[1, 2, 4]));
        let g = m.distorting_matrix();
        for i in 0..7 {
            assert_eq!(g[(i, i)], c(3.0 / 7.0, 0.0));
        }
        let gg = g.matmul(&g).unwrap();
        assert!(gg.max_abs_diff(&g) < 1e-10);
        // matches the explicit product
        let explicit = m.matrix().adjoint().matmul(m.matrix()).unwrap();
        let explicit = ComplexMatrix::from_fn(7, 7, |i, j| explicit[(i, j)] / 7.0);
        assert!(explicit.max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn min_norm_of_zero_is_zero() {
        let m = MeasurementModel::new(&pattern(7, &[1, 2, 4]));
        let out = m.min_norm_estimate(&[c(0.0, 0.0); 3]).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn min_norm_full_dft_inverts() {
        let m = MeasurementModel::new(&pattern(6, &(0..6).collect::<Vec<_>>()));
        let h: Vec<_> = (0..6).map(|i| c(i as f64 - 2.5, (i * i) as f64 * 0.1)).collect();
        let y = m.apply(&h).unwrap();
        let back = m.min_norm_estimate(&y).unwrap();
        for (a, b) in back.iter().zip(&h) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn min_norm_of_unit_tap_is_g_column() {
        let m = MeasurementModel::new(&pattern(7, &[1, 2, 4]));
        let mut h = vec![c(0.0, 0.0); 7];
        h[0] = c(1.0, 0.0);
        let y = m.apply(&h).unwrap();
        let est = m.min_norm_estimate(&y).unwrap();
        let g = m.distorting_matrix();
        for i in 0..7 {
            assert!((est[i] - g[(i, 0)]).norm() < 1e-12);
        }
        assert!((est[0] - c(3.0 / 7.0, 0.0)).norm() < 1e-12);
        assert!(m.min_norm_estimate(&[c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn ls_on_column_of_ones() {
        let m = MeasurementModel::new(&pattern(7, &[1, 2, 4]));
        let x = m
            .least_squares_on_support(&[c(1.0, 0.0); 3], &[0])
            .unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(x[1..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn ls_empty_support_is_zero() {
        let m = MeasurementModel::new(&pattern(7, &[1, 2, 4]));
        let x = m.least_squares_on_support(&[c(1.0, 2.0); 3], &[]).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn ls_recovers_true_support() {
        let m = MeasurementModel::new(&pattern(16, &[0, 1, 3, 7, 12]));
        let mut h = vec![c(0.0, 0.0); 16];
        h[2] = c(0.7, -0.2);
        h[9] = c(-1.1, 0.4);
        let y = m.apply(&h).unwrap();
        let x = m.least_squares_on_support(&y, &[2, 9]).unwrap();
        for (a, b) in x.iter().zip(&h) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn ls_rejects_oversized_and_duplicate_support() {
        let m = MeasurementModel::new(&pattern(7, &[1, 2, 4]));
        let y = [c(1.0, 0.0); 3];
        assert!(matches!(
            m.least_squares_on_support(&y, &[0, 1, 2, 3]),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            m.least_squares_on_support(&y, &[2, 2]),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            m.least_squares_on_support(&y, &[9]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn aliased_columns_are_rank_deficient() {
        // 8 subcarriers, pilots every other bin: columns 0 and 4 coincide.
        let m = MeasurementModel::new(&pattern(8, &[0, 2, 4, 6]));
        let y = [c(1.0, 0.0); 4];
        assert!(matches!(
            m.least_squares_on_support(&y, &[0, 4]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn inverse_trace_of_diagonal() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { c((i + 1) as f64, 0.0) } else { c(0.0, 0.0) });
        let t = Cholesky::factor(&a).unwrap().inverse_trace();
        assert!((t - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-14);
    }
}
