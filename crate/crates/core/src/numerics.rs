//! Dense complex linear algebra, seeded sampling and DFT construction.
//!
//! Problem sizes stay tiny (matrices up to roughly 36x36), so everything
//! here is dense, double precision and written directly against row-major
//! `Vec<Complex64>` storage. Dimensions are checked on every operation.

use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CtpError, Result};

pub type C64 = Complex64;

/// Relative tolerance used when verifying that a solver input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Seedable random generator handle.
///
/// Identical seeds produce identical streams. Independent streams for
/// different concerns (channel evolution, observation noise, ...) are
/// split off with [`SimRng::derive`].
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Deterministically derive an independent stream labeled `stream`.
    pub fn derive(&self, stream: u64) -> Self {
        Self::from_seed(splitmix64(
            self.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One draw from N(0, 1).
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw from [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.random_range(lo..hi)
    }

    /// Uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// One draw from CN(0, 1): independent real/imag parts of variance 1/2.
    pub fn complex_standard(&mut self) -> C64 {
        let re: f64 = self.inner.sample(StandardNormal);
        let im: f64 = self.inner.sample(StandardNormal);
        C64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
    }

    /// Fisher-Yates shuffle of a slice of indices.
    pub fn shuffle(&mut self, xs: &mut [usize]) {
        for i in (1..xs.len()).rev() {
            let j = self.inner.random_range(0..=i);
            xs.swap(i, j);
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec {
    data: Vec<C64>,
}

impl CVec {
    pub fn zeros(n: usize) -> Self {
        Self {
            data: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_vec(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.data.iter()
    }

    pub fn add(&self, other: &CVec) -> CVec {
        assert_eq!(self.len(), other.len(), "vector length mismatch in add");
        CVec::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &CVec) -> CVec {
        assert_eq!(self.len(), other.len(), "vector length mismatch in sub");
        CVec::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> CVec {
        CVec::from_vec(self.data.iter().map(|a| a * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> CVec {
        CVec::from_vec(self.data.iter().map(|a| a * s).collect())
    }

    /// Hermitian inner product `sum_n conj(self_n) * other_n`.
    pub fn dot_h(&self, other: &CVec) -> C64 {
        assert_eq!(self.len(), other.len(), "vector length mismatch in dot_h");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Outer product `self * other^H` as a matrix.
    pub fn outer_h(&self, other: &CVec) -> CMat {
        let mut m = CMat::zeros(self.len(), other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                m.data[i * other.len() + j] = self.data[i] * other.data[j].conj();
            }
        }
        m
    }
}

impl std::ops::Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self::from_diag(&diag.iter().map(|&d| C64::new(d, 0.0)).collect::<Vec<_>>())
    }

    /// Build from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows in from_rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C64] {
        assert!(i < self.rows, "row index out of bounds");
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.at(i, i)).collect()
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch in add"
        );
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch in sub"
        );
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        assert_eq!(self.cols, x.len(), "shape mismatch in matvec");
        let mut out = CVec::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Symmetrize a square matrix: `(A + A^H) / 2`.
    pub fn hermitize(&self) -> CMat {
        assert_eq!(self.rows, self.cols, "hermitize requires a square matrix");
        let ah = self.hermitian();
        self.add(&ah).scale_real(0.5)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry, `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "hermitian_deviation requires square");
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self.at(i, j) - self.at(j, i).conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    pub fn is_hermitian_within(&self, tol: f64) -> bool {
        self.rows == self.cols && self.hermitian_deviation() <= tol * self.max_abs().max(1.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Unnormalized DFT matrix: entry (m, k) = exp(-j 2 pi m k / n).
///
/// Entries have unit modulus, so rows double as valid passive reflection
/// patterns. `dft_matrix(n) * dft_matrix(n)^H = n * I`.
pub fn dft_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(CtpError::InvalidArgument(
            "DFT matrix size must be at least 1".into(),
        ));
    }
    let mut m = CMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            // reduce the phase index mod n before forming the angle
            let k = (r * c) % n;
            let angle = -2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            m.set(r, c, C64::from_polar(1.0, angle));
        }
    }
    Ok(m)
}

/// Draw a complex Gaussian vector with the given mean and diagonal
/// covariance: element n is `mean_n + sqrt(cov_n / 2) * (a + j b)` with
/// a, b independent standard normals, so `E|x_n - mean_n|^2 = cov_n`.
pub fn sample_complex_gaussian(mean: &CVec, cov_diag: &[f64], rng: &mut SimRng) -> Result<CVec> {
    if mean.len() != cov_diag.len() {
        return Err(CtpError::InvalidArgument(format!(
            "mean length {} != covariance length {}",
            mean.len(),
            cov_diag.len()
        )));
    }
    if let Some(bad) = cov_diag.iter().find(|&&v| v < 0.0 || !v.is_finite()) {
        return Err(CtpError::InvalidArgument(format!(
            "variance must be finite and nonnegative, got {bad}"
        )));
    }
    let mut out = CVec::zeros(mean.len());
    for n in 0..mean.len() {
        let s = (cov_diag[n] / 2.0).sqrt();
        let a = rng.standard_normal();
        let b = rng.standard_normal();
        out[n] = mean[n] + C64::new(s * a, s * b);
    }
    Ok(out)
}

/// Cholesky factorization of a Hermitian positive-definite matrix:
/// returns lower-triangular `L` with `A = L L^H`.
pub fn cholesky(a: &CMat) -> Result<CMat> {
    if a.rows() != a.cols() {
        return Err(CtpError::InvalidArgument(format!(
            "cholesky requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a.at(j, j).re;
        for k in 0..j {
            d -= l.at(j, k).norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(CtpError::Numerical(format!(
                "matrix not positive definite: pivot {d:.3e} at column {j}"
            )));
        }
        let diag = d.sqrt();
        l.set(j, j, C64::new(diag, 0.0));
        for i in (j + 1)..n {
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k).conj();
            }
            l.set(i, j, s / diag);
        }
    }
    Ok(l)
}

/// Solve `A X = B` for Hermitian positive-definite `A` via Cholesky.
///
/// `A` is verified Hermitian within [`HERMITIAN_TOL`] (relative to its
/// largest entry) before factorization.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.rows() != a.cols() {
        return Err(CtpError::InvalidArgument(format!(
            "hermitian_solve requires square A, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() != b.rows() {
        return Err(CtpError::InvalidArgument(format!(
            "A is {0}x{0} but B has {1} rows",
            a.rows(),
            b.rows()
        )));
    }
    if !a.is_hermitian_within(HERMITIAN_TOL) {
        return Err(CtpError::Numerical(format!(
            "matrix not Hermitian: deviation {:.3e} exceeds tolerance",
            a.hermitian_deviation()
        )));
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let m = b.cols();
    let mut x = b.clone();
    // forward: L Y = B
    for col in 0..m {
        for i in 0..n {
            let mut s = x.at(i, col);
            for k in 0..i {
                s -= l.at(i, k) * x.at(k, col);
            }
            x.set(i, col, s / l.at(i, i));
        }
    }
    // backward: L^H X = Y
    for col in 0..m {
        for i in (0..n).rev() {
            let mut s = x.at(i, col);
            for k in (i + 1)..n {
                s -= l.at(k, i).conj() * x.at(k, col);
            }
            x.set(i, col, s / l.at(i, i));
        }
    }
    Ok(x)
}

/// Vector right-hand-side convenience wrapper over [`hermitian_solve`].
pub fn hermitian_solve_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    let mut bm = CMat::zeros(b.len(), 1);
    for i in 0..b.len() {
        bm.set(i, 0, b[i]);
    }
    let x = hermitian_solve(a, &bm)?;
    Ok(CVec::from_vec((0..b.len()).map(|i| x.at(i, 0)).collect()))
}

/// Check positive semidefiniteness up to `tol`: succeeds when
/// `A + tol * max(1, max diag) * I` admits a Cholesky factorization.
pub fn is_psd_within(a: &CMat, tol: f64) -> bool {
    if a.rows() != a.cols() || !a.is_hermitian_within(HERMITIAN_TOL.max(tol)) {
        return false;
    }
    let scale = a
        .diag()
        .iter()
        .map(|d| d.re.abs())
        .fold(1.0_f64, f64::max);
    let shifted = a.add(&CMat::identity(a.rows()).scale_real(tol * scale));
    cholesky(&shifted).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn sample_zero_variance_is_exact() {
        let mut rng = SimRng::from_seed(7);
        let zero = CVec::zeros(3);
        let x = sample_complex_gaussian(&zero, &[0.0; 3], &mut rng).unwrap();
        assert_eq!(x.as_slice(), zero.as_slice());

        let mu = CVec::from_vec(vec![c(1.0, -2.0), c(0.5, 0.25)]);
        let x = sample_complex_gaussian(&mu, &[0.0, 0.0], &mut rng).unwrap();
        assert_eq!(x.as_slice(), mu.as_slice());
    }

    #[test]
    fn sample_unit_variance_moment() {
        let mut rng = SimRng::from_seed(42);
        let mean = CVec::zeros(1);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = sample_complex_gaussian(&mean, &[1.0], &mut rng).unwrap();
            acc += x[0].norm_sqr();
        }
        let emp = acc / n as f64;
        assert!((emp - 1.0).abs() <= 0.02, "E|x|^2 = {emp}");
    }

    #[test]
    fn sample_rejects_negative_variance() {
        let mut rng = SimRng::from_seed(1);
        let mean = CVec::zeros(1);
        assert!(matches!(
            sample_complex_gaussian(&mean, &[-1e-9], &mut rng),
            Err(CtpError::InvalidArgument(_))
        ));
    }

    #[test]
    fn sample_is_seed_deterministic() {
        let mean = CVec::zeros(4);
        let cov = [1.0, 2.0, 0.5, 3.0];
        let a = sample_complex_gaussian(&mean, &cov, &mut SimRng::from_seed(99)).unwrap();
        let b = sample_complex_gaussian(&mean, &cov, &mut SimRng::from_seed(99)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn dft_small_cases() {
        let d1 = dft_matrix(1).unwrap();
        assert_eq!(d1.at(0, 0), c(1.0, 0.0));

        let d2 = dft_matrix(2).unwrap();
        for (idx, want) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]
            .iter()
            .map(|&(i, j, w)| ((i, j), c(w, 0.0)))
        {
            assert!((d2.at(idx.0, idx.1) - want).norm() < 1e-12);
        }
        assert!((d2.at(1, 1) - c(-1.0, 0.0)).norm() < 1e-12);

        // row 1 of the 4-point DFT: exp(-j pi k / 2) = 1, -j, -1, j
        let d4 = dft_matrix(4).unwrap();
        let want = [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        for (k, w) in want.iter().enumerate() {
            assert!((d4.at(1, k) - w).norm() < 1e-12, "entry {k}");
        }
    }

    #[test]
    fn dft_rejects_zero() {
        assert!(matches!(dft_matrix(0), Err(CtpError::InvalidArgument(_))));
    }

    #[test]
    fn dft_unitary_scaled() {
        for n in [1, 2, 3, 8, 17, 36, 64] {
            let d = dft_matrix(n).unwrap();
            let prod = d.mul(&d.hermitian());
            let expect = CMat::identity(n).scale_real(n as f64);
            let err = prod.sub(&expect).max_abs();
            assert!(err < 1e-9, "n = {n}: deviation {err}");
        }
    }

    #[test]
    fn solve_identity_and_scaled() {
        let b = CMat::from_rows(&[
            vec![c(1.0, 2.0), c(0.0, -1.0)],
            vec![c(3.0, 0.0), c(2.0, 2.0)],
            vec![c(-1.0, 1.0), c(0.5, 0.0)],
        ]);
        let x = hermitian_solve(&CMat::identity(3), &b).unwrap();
        assert!(x.sub(&b).max_abs() < 1e-14);

        let a = CMat::identity(3).scale_real(2.0);
        let x = hermitian_solve(&a, &CMat::identity(3)).unwrap();
        assert!(x.sub(&CMat::identity(3).scale_real(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn solve_random_spd_residual() {
        let mut rng = SimRng::from_seed(2024);
        for trial in 0..100 {
            let n = 2 + rng.index(31); // up to 32x32
            let off_scale = 1.0 / (n as f64).sqrt();
            let mut l = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..i {
                    l.set(i, j, rng.complex_standard() * off_scale);
                }
                l.set(i, i, c(0.5 + rng.uniform(0.0, 1.5), 0.0));
            }
            let a = l.mul(&l.hermitian());
            let mut b = CMat::zeros(n, 2);
            for i in 0..n {
                for j in 0..2 {
                    b.set(i, j, rng.complex_standard());
                }
            }
            let x = hermitian_solve(&a, &b).unwrap();
            let resid = a.mul(&x).sub(&b).frobenius_norm() / b.frobenius_norm();
            assert!(resid <= 1e-10, "trial {trial}, n={n}: residual {resid:.3e}");
        }
    }

    #[test]
    fn solve_rejects_indefinite() {
        let a = CMat::from_real_diag(&[1.0, -1.0]);
        let b = CMat::identity(2);
        assert!(matches!(
            hermitian_solve(&a, &b),
            Err(CtpError::Numerical(_))
        ));
    }

    #[test]
    fn solve_rejects_non_hermitian() {
        let mut a = CMat::identity(2);
        a.set(0, 1, c(1.0, 0.0));
        assert!(matches!(
            hermitian_solve(&a, &CMat::identity(2)),
            Err(CtpError::Numerical(_))
        ));
    }

    #[test]
    fn psd_check_accepts_singular() {
        assert!(is_psd_within(&CMat::zeros(3, 3), 1e-9));
        assert!(is_psd_within(&CMat::from_real_diag(&[1.0, 0.0]), 1e-9));
        assert!(!is_psd_within(&CMat::from_real_diag(&[1.0, -0.1]), 1e-9));
    }

    #[test]
    fn sample_covariance_matches_request() {
        let mut rng = SimRng::from_seed(5150);
        let mean = CVec::zeros(3);
        let cov = [0.5, 2.0, 1.0e-2];
        let n = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let x = sample_complex_gaussian(&mean, &cov, &mut rng).unwrap();
            for k in 0..3 {
                acc[k] += x[k].norm_sqr();
            }
        }
        for k in 0..3 {
            let emp = acc[k] / n as f64;
            assert!(
                (emp - cov[k]).abs() <= 0.03 * cov[k],
                "entry {k}: {emp} vs {}",
                cov[k]
            );
        }
    }

    #[test]
    fn derive_streams_differ() {
        let base = SimRng::from_seed(3);
        let mut a = base.derive(0);
        let mut b = base.derive(1);
        let xs: Vec<f64> = (0..4).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..4).map(|_| b.standard_normal()).collect();
        assert_ne!(xs, ys);
        let mut a2 = base.derive(0);
        let xs2: Vec<f64> = (0..4).map(|_| a2.standard_normal()).collect();
        assert_eq!(xs, xs2);
    }
}
