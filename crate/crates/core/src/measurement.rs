//! Reflection-pattern measurement matrices and pilot observations.
//!
//! Per time interval the IRS applies `tau1` reflection patterns, one per
//! pilot slot. The patterns are columns of a fixed full-rank reference
//! matrix `Q`, cycled periodically so that every column is revisited; the
//! receiver stacks the corresponding received samples into an observation
//! vector.

use crate::error::{CtpError, Result};
use crate::numerics::{dft_matrix, sample_complex_gaussian, CMat, CVec, SimRng};

/// How the reference matrix is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// (N+1)-point DFT matrix; rows are unit-modulus, hence realizable
    /// as passive phase shifts.
    Dft,
    /// iid CN(0, 1) entries, redrawn until numerically full rank. Not
    /// physically realizable; kept as a baseline.
    Random,
}

/// Full-rank reference matrix whose columns supply reflection patterns.
#[derive(Debug, Clone)]
pub struct ReferenceMatrix {
    pub q: CMat,
    pub kind: ReferenceKind,
}

/// Whether an observation was actually received or predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsKind {
    Real,
    Imaginary,
}

/// One interval's worth of pilot observations and the measurement matrix
/// that produced them.
#[derive(Debug, Clone)]
pub struct ObservationBlock {
    /// Received (or predicted) samples, length tau1.
    pub y: CVec,
    /// Measurement matrix, tau1 x (N+1); row i is the reflection pattern
    /// of pilot slot i.
    pub v: CMat,
    /// Time-interval index (1-based).
    pub t: usize,
    pub kind: ObsKind,
}

/// Crude full-rank check via column-pivoted Gaussian elimination.
fn is_full_rank(m: &CMat) -> bool {
    let n = m.rows();
    let mut a = m.clone();
    let scale = a.max_abs();
    if scale == 0.0 {
        return false;
    }
    for k in 0..n {
        // find pivot
        let (mut best, mut best_val) = (k, 0.0);
        for i in k..n {
            let v = a.at(i, k).norm();
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if best_val < 1e-10 * scale {
            return false;
        }
        if best != k {
            for j in 0..n {
                let tmp = a.at(k, j);
                a.set(k, j, a.at(best, j));
                a.set(best, j, tmp);
            }
        }
        let piv = a.at(k, k);
        for i in (k + 1)..n {
            let f = a.at(i, k) / piv;
            for j in k..n {
                let v = a.at(i, j) - f * a.at(k, j);
                a.set(i, j, v);
            }
        }
    }
    true
}

/// Build an (N+1)x(N+1) reference matrix of the requested kind.
pub fn reference_matrix(kind: ReferenceKind, n: usize, rng: &mut SimRng) -> Result<ReferenceMatrix> {
    if n == 0 {
        return Err(CtpError::InvalidArgument(
            "IRS must have at least one element".into(),
        ));
    }
    let dim = n + 1;
    let q = match kind {
        ReferenceKind::Dft => dft_matrix(dim)?,
        ReferenceKind::Random => {
            let mut attempts = 0;
            loop {
                let mut q = CMat::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        q.set(i, j, rng.complex_standard());
                    }
                }
                if is_full_rank(&q) {
                    break q;
                }
                attempts += 1;
                if attempts >= 10 {
                    return Err(CtpError::Numerical(
                        "random reference matrix rank-deficient after 10 redraws".into(),
                    ));
                }
            }
        }
    };
    Ok(ReferenceMatrix { q, kind })
}

/// Measurement matrix of interval `t` (1-based): row i is the transpose of
/// column `idx(tau1 (t-1) + i)` of `Q`, with the 1-based wrap rule
/// `idx(k) = ((k - 1) mod (N+1)) + 1` so all N+1 columns are cycled.
pub fn measurement_matrix(t: usize, tau1: usize, q: &ReferenceMatrix) -> Result<CMat> {
    if t == 0 {
        return Err(CtpError::InvalidArgument(
            "interval index is 1-based; got 0".into(),
        ));
    }
    if tau1 == 0 {
        return Err(CtpError::InvalidArgument("tau1 must be positive".into()));
    }
    let dim = q.q.rows();
    let mut v = CMat::zeros(tau1, dim);
    for i in 1..=tau1 {
        let k = tau1 * (t - 1) + i;
        let col = (k - 1) % dim; // 0-based column index
        for r in 0..dim {
            v.set(i - 1, r, q.q.at(r, col));
        }
    }
    Ok(v)
}

/// Noisy pilot observation: `y = sqrt(p) V h + z`, `z ~ CN(0, noise_var I)`.
pub fn observe(
    h: &CVec,
    v: &CMat,
    tx_power: f64,
    noise_var: f64,
    rng: &mut SimRng,
) -> Result<CVec> {
    if v.cols() != h.len() {
        return Err(CtpError::InvalidArgument(format!(
            "measurement matrix has {} columns but channel has {} entries",
            v.cols(),
            h.len()
        )));
    }
    let clean = v.matvec(h).scale_real(tx_power.sqrt());
    if noise_var == 0.0 {
        return Ok(clean);
    }
    let z = sample_complex_gaussian(&CVec::zeros(v.rows()), &vec![noise_var; v.rows()], rng)?;
    Ok(clean.add(&z))
}

/// Noiseless observation `sqrt(p) V h`; used when constructing oracle
/// imaginary observations and when checking the affine structure.
pub fn observe_noiseless(h: &CVec, v: &CMat, tx_power: f64) -> CVec {
    v.matvec(h).scale_real(tx_power.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dft_reference_n1() {
        let mut rng = SimRng::from_seed(0);
        let q = reference_matrix(ReferenceKind::Dft, 1, &mut rng).unwrap();
        assert_eq!(q.q.rows(), 2);
        assert!((q.q.at(0, 0) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((q.q.at(0, 1) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((q.q.at(1, 0) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((q.q.at(1, 1) - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dft_reference_orthogonality() {
        let mut rng = SimRng::from_seed(0);
        let q = reference_matrix(ReferenceKind::Dft, 35, &mut rng).unwrap();
        let gram = q.q.hermitian().mul(&q.q);
        let expect = CMat::identity(36).scale_real(36.0);
        assert!(gram.sub(&expect).max_abs() < 1e-9);
    }

    #[test]
    fn random_reference_is_seed_repeatable() {
        let a = reference_matrix(ReferenceKind::Random, 5, &mut SimRng::from_seed(9)).unwrap();
        let b = reference_matrix(ReferenceKind::Random, 5, &mut SimRng::from_seed(9)).unwrap();
        assert_eq!(a.q, b.q);
    }

    #[test]
    fn measurement_first_and_wrapping_interval() {
        let mut rng = SimRng::from_seed(0);
        let q = reference_matrix(ReferenceKind::Dft, 35, &mut rng).unwrap();
        // t = 1: columns 1..6 (1-based)
        let v = measurement_matrix(1, 6, &q).unwrap();
        for i in 0..6 {
            for r in 0..36 {
                assert_eq!(v.at(i, r), q.q.at(r, i));
            }
        }
        // t = 6: columns 31..36; the wrap rule maps remainder 0 to column 36
        let v = measurement_matrix(6, 6, &q).unwrap();
        for i in 0..6 {
            for r in 0..36 {
                assert_eq!(v.at(i, r), q.q.at(r, 30 + i));
            }
        }
        // t = 7 cycles back to columns 1..6
        let v7 = measurement_matrix(7, 6, &q).unwrap();
        let v1 = measurement_matrix(1, 6, &q).unwrap();
        assert_eq!(v7, v1);
    }

    #[test]
    fn measurement_full_period_uses_whole_matrix() {
        let mut rng = SimRng::from_seed(0);
        let q = reference_matrix(ReferenceKind::Dft, 3, &mut rng).unwrap();
        let v = measurement_matrix(1, 4, &q).unwrap();
        assert_eq!(v, q.q.transpose());
        let v2 = measurement_matrix(2, 4, &q).unwrap();
        assert_eq!(v2, q.q.transpose());
    }

    #[test]
    fn measurement_periodicity_and_column_counts() {
        let mut rng = SimRng::from_seed(0);
        let n = 7; // N+1 = 8
        let q = reference_matrix(ReferenceKind::Random, n, &mut rng).unwrap();
        let tau1 = 3;
        for t in 1..=5 {
            assert_eq!(
                measurement_matrix(t, tau1, &q).unwrap(),
                measurement_matrix(t + n + 1, tau1, &q).unwrap()
            );
        }
        // over N+1 consecutive intervals, each column appears exactly tau1 times
        let mut counts = vec![0usize; n + 1];
        for t in 1..=(n + 1) {
            for i in 1..=tau1 {
                let k = tau1 * (t - 1) + i;
                counts[(k - 1) % (n + 1)] += 1;
            }
        }
        assert!(counts.iter().all(|&cnt| cnt == tau1));
    }

    #[test]
    fn observe_noiseless_identity_recovers_channel() {
        let h = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)]);
        let v = CMat::identity(3);
        let mut rng = SimRng::from_seed(4);
        let y = observe(&h, &v, 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(y.as_slice(), h.as_slice());

        // power scaling: p = 4 doubles the amplitude
        let y = observe(&h, &v, 4.0, 0.0, &mut rng).unwrap();
        for i in 0..3 {
            assert!((y[i] - h[i] * 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn observe_noise_only_moment() {
        let mut rng = SimRng::from_seed(31);
        let h = CVec::zeros(2);
        let v = CMat::identity(2);
        let noise_var = 0.3;
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let y = observe(&h, &v, 1.0, noise_var, &mut rng).unwrap();
            acc += y.norm_sq() / 2.0;
        }
        let emp = acc / trials as f64;
        assert!((emp - noise_var).abs() <= 0.03 * noise_var, "E|y|^2 = {emp}");
    }

    #[test]
    fn observe_is_affine_in_channel() {
        // finite difference of the noiseless map recovers sqrt(p) V
        let mut rng = SimRng::from_seed(12);
        let q = reference_matrix(ReferenceKind::Random, 3, &mut rng).unwrap();
        let v = measurement_matrix(2, 2, &q).unwrap();
        let p = 2.5;
        let h0 = CVec::from_vec((0..4).map(|_| rng.complex_standard()).collect());
        let base = observe_noiseless(&h0, &v, p);
        let eps = 1e-6;
        for j in 0..4 {
            let mut hp = h0.clone();
            hp[j] += c(eps, 0.0);
            let diff = observe_noiseless(&hp, &v, p).sub(&base).scale_real(1.0 / eps);
            for i in 0..2 {
                assert!(
                    (diff[i] - v.at(i, j) * p.sqrt()).norm() < 1e-6,
                    "Jacobian mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn rank_check_flags_singular() {
        let mut m = CMat::identity(3);
        m.set(2, 2, c(0.0, 0.0));
        assert!(!is_full_rank(&m));
        assert!(is_full_rank(&CMat::identity(3)));
    }
}
