use nalgebra::DVector;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::types::{ComplexMatrix, DensityMatrix};
use crate::error::{Error, Result};

/// ChaCha8 generator addressed by `(seed, stream)`.
///
/// Two instances with the same pair produce the same sequence on every
/// platform and thread count. Parallel work should never share an instance;
/// derive independent streams with [`SeededRng::substream`] instead.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on a stream derived from this one's stream and
    /// `label`. Does not advance `self`.
    pub fn substream(&self, label: u64) -> Self {
        Self::new(self.seed, splitmix64(self.stream ^ splitmix64(label)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn complex_gaussian(rng: &mut SeededRng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random `d × d` unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut SeededRng) -> ComplexMatrix {
    assert!(d >= 1, "haar_unitary: dimension must be positive");
    let ginibre = ComplexMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for v in q.column_mut(j).iter_mut() {
            *v *= phase;
        }
    }
    q
}

/// First `d_in` columns of a Haar-random `d_out × d_out` unitary.
pub fn haar_isometry(d_in: usize, d_out: usize, rng: &mut SeededRng) -> Result<ComplexMatrix> {
    if d_in == 0 || d_out < d_in {
        return Err(Error::InvalidArgument(format!(
            "isometry needs 1 <= d_in <= d_out, got d_in={d_in}, d_out={d_out}"
        )));
    }
    let u = haar_unitary(d_out, rng);
    Ok(u.columns(0, d_in).into_owned())
}

/// Haar-random normalised state vector.
pub fn random_pure_state(d: usize, rng: &mut SeededRng) -> DVector<Complex64> {
    let v = DVector::from_fn(d, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Random state of the given rank from the induced measure: a Haar-random
/// pure state on `d·rank` with the `rank`-dimensional ancilla traced out.
pub fn random_density_matrix(d: usize, rank: usize, rng: &mut SeededRng) -> Result<DensityMatrix> {
    if d == 0 || rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!(
            "random_density_matrix needs 1 <= rank <= d, got d={d}, rank={rank}"
        )));
    }
    let psi = random_pure_state(d * rank, rng);
    let a = ComplexMatrix::from_fn(d, rank, |i, k| psi[i * rank + k]);
    DensityMatrix::from_hermitian_part(&(&a * a.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{identity, max_abs_diff, HERMITIAN_TOL};
    use rand::Rng;

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = SeededRng::new(42, 7);
        let mut b = SeededRng::new(42, 7);
        let mut c = SeededRng::new(42, 8);
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        let s = SeededRng::new(42, 7);
        assert_eq!(s.substream(3).next_u64(), s.substream(3).next_u64());
        assert_ne!(s.substream(3).next_u64(), s.substream(4).next_u64());
    }

    #[test]
    fn haar_unitary_dimension_one_is_phase() {
        let mut rng = SeededRng::new(3, 0);
        let u = haar_unitary(1, &mut rng);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = SeededRng::new(3, 1);
        let u = haar_unitary(8, &mut rng);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(8)) < 1e-10);
    }

    #[test]
    fn haar_second_moment() {
        // E|U_11|^2 = 1/d; Var|U_11|^2 = (d-1)/(d^2 (d+1)).
        let d = 4;
        let draws = 100_000;
        let mut rng = SeededRng::new(2024, 0);
        let mean = (0..draws)
            .map(|_| haar_unitary(d, &mut rng)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        let var = (d as f64 - 1.0) / ((d * d) as f64 * (d as f64 + 1.0));
        let sigma = (var / draws as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean {mean}, sigma {sigma}");
    }

    #[test]
    fn left_invariance_statistics() {
        // Fixed unitary W: the first-row moduli of W·U must have the same
        // moments as those of U.
        let d = 3;
        let draws = 20_000;
        let mut rng = SeededRng::new(77, 0);
        let w = haar_unitary(d, &mut rng);
        let mut plain = 0.0;
        let mut rotated = 0.0;
        for _ in 0..draws {
            let u = haar_unitary(d, &mut rng);
            plain += u[(0, 1)].norm_sqr();
            rotated += (&w * &u)[(0, 1)].norm_sqr();
        }
        let var = (d as f64 - 1.0) / ((d * d) as f64 * (d as f64 + 1.0));
        let sigma = (var / draws as f64).sqrt();
        assert!((plain / draws as f64 - 1.0 / 3.0).abs() < 4.0 * sigma);
        assert!((rotated / draws as f64 - 1.0 / 3.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn isometries() {
        let mut rng = SeededRng::new(5, 5);
        let sq = haar_isometry(2, 2, &mut rng).unwrap();
        assert!(max_abs_diff(&(&sq * sq.adjoint()), &identity(2)) < 1e-10);
        let v = haar_isometry(2, 8, &mut rng).unwrap();
        assert_eq!(v.shape(), (8, 2));
        assert!(max_abs_diff(&(v.adjoint() * &v), &identity(2)) < 1e-10);

        // Gram-matrix oracle: explicit inner products between columns.
        let v = haar_isometry(3, 12, &mut rng).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut g = Complex64::new(0.0, 0.0);
                for r in 0..12 {
                    g += v[(r, a)].conj() * v[(r, b)];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((g - Complex64::new(target, 0.0)).norm() <= 1e-10);
            }
        }
        assert!(haar_isometry(3, 2, &mut rng).is_err());
    }

    #[test]
    fn pure_random_states() {
        let mut rng = SeededRng::new(1, 2);
        let rho = random_density_matrix(2, 1, &mut rng).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        assert_eq!(rho.rank(), 1);
        assert!(random_density_matrix(2, 3, &mut rng).is_err());
    }

    #[test]
    fn random_states_have_requested_rank() {
        let mut rng = SeededRng::new(8, 2);
        for d in 1..6 {
            for rank in 1..=d {
                assert_eq!(random_density_matrix(d, rank, &mut rng).unwrap().rank(), rank);
            }
        }
    }

    #[test]
    fn random_states_are_valid_over_many_draws() {
        let mut rng = SeededRng::new(99, 0);
        for _ in 0..1000 {
            let d = rng.random_range(1..6);
            let rank = rng.random_range(1..=d);
            let rho = random_density_matrix(d, rank, &mut rng).unwrap();
            let m = rho.matrix();
            assert!(crate::qcore::hermitian_deviation(m) <= HERMITIAN_TOL);
            assert!((m.trace().re - 1.0).abs() <= 1e-10);
            assert!(rho.eigenvalues()[0] >= -1e-10);
        }
    }

    #[test]
    fn mean_random_state_is_maximally_mixed() {
        // Unitary invariance forces E[ρ] = I/2. Per-entry standard deviation
        // is estimated from the sample itself.
        let draws = 100_000;
        let mut rng = SeededRng::new(4242, 0);
        let mut sum = ComplexMatrix::zeros(2, 2);
        let mut sumsq = [[0.0f64; 2]; 2];
        for _ in 0..draws {
            let rho = random_density_matrix(2, 2, &mut rng).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let z = rho.matrix()[(i, j)];
                    sum[(i, j)] += z;
                    sumsq[i][j] += z.norm_sqr();
                }
            }
        }
        let n = draws as f64;
        for i in 0..2 {
            for j in 0..2 {
                let mean = sum[(i, j)] / n;
                let target = if i == j { 0.5 } else { 0.0 };
                let var = sumsq[i][j] / n - mean.norm_sqr();
                let sigma = (var / n).sqrt();
                assert!((mean - Complex64::new(target, 0.0)).norm() < 3.0 * sigma.max(1e-12) + 1e-15,
                    "entry ({i},{j}) mean {mean}, sigma {sigma}");
            }
        }
    }
}
