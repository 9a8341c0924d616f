use num_complex::Complex64;

use super::types::{AsOperator, ComplexMatrix, HermitianOperator};
use crate::error::{Error, Result};

/// Kronecker product, dimensions `(ra·rb) × (ca·cb)`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Reduced operator on the subsystems listed in `keep` (0-based, any order;
/// the result keeps the original subsystem order).
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.nrows() != total || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!(
            "partial_trace: matrix is {}x{}, subsystem dims {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    let mut kept = vec![false; dims.len()];
    for &k in keep {
        if k >= dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "partial_trace: subsystem {k} out of range for {} subsystems",
                dims.len()
            )));
        }
        kept[k] = true;
    }
    let kept_dim: usize = dims.iter().zip(&kept).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let traced_dim = total / kept_dim;

    // Split every full index into (kept index, traced index).
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kept_dim); traced_dim];
    for full in 0..total {
        let mut rem = full;
        let (mut ki, mut ti) = (0usize, 0usize);
        let (mut kstride, mut tstride) = (1usize, 1usize);
        for (s, &d) in dims.iter().enumerate().rev() {
            let digit = rem % d;
            rem /= d;
            if kept[s] {
                ki += digit * kstride;
                kstride *= d;
            } else {
                ti += digit * tstride;
                tstride *= d;
            }
        }
        groups[ti].push((full, ki));
    }

    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for group in &groups {
        for &(i, ki) in group {
            for &(j, kj) in group {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `exp(scale · H)` through the Hermitian eigendecomposition of `H`.
pub fn herm_expm(h: &HermitianOperator, scale: Complex64) -> ComplexMatrix {
    let eig = h.matrix().clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let f = (scale * lambda).exp();
        for v in scaled.column_mut(j).iter_mut() {
            *v *= f;
        }
    }
    scaled * q.adjoint()
}

/// Hilbert–Schmidt inner product `Tr(a† b)`, real part.
pub fn hs_inner<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsOperator + ?Sized,
    B: AsOperator + ?Sized,
{
    let (a, b) = (a.as_operator(), b.as_operator());
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "hs_inner: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{c64, haar_unitary, identity, max_abs_diff, pauli_x, pauli_z, SeededRng};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(r: usize, c: usize, rng: &mut SeededRng) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, c, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_hermitian(d: usize, rng: &mut SeededRng) -> HermitianOperator {
        HermitianOperator::from_hermitian_part(&random_matrix(d, d, rng)).unwrap()
    }

    fn diag(v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| c64(x, 0.0))))
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        assert_eq!(kron(&diag(&[1.0, 2.0]), &diag(&[3.0, 4.0])), diag(&[3.0, 4.0, 6.0, 8.0]));

        // σx⊗σx |00⟩ = |11⟩, checked by explicit index expansion.
        let xx = kron(&pauli_x(), &pauli_x());
        let mut ket00 = DVector::zeros(4);
        ket00[0] = c64(1.0, 0.0);
        let out = &xx * &ket00;
        let x = pauli_x();
        for idx in 0..4 {
            let (i1, i2) = (idx / 2, idx % 2);
            let brute = x[(i1, 0)] * x[(i2, 0)];
            assert_eq!(out[idx], brute);
        }
        assert_eq!(out[3], c64(1.0, 0.0));
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let mut rng = SeededRng::new(11, 0);
        let rho = crate::qcore::random_density_matrix(3, 3, &mut rng).unwrap();
        let sigma = crate::qcore::random_density_matrix(2, 2, &mut rng).unwrap();
        let prod = kron(rho.matrix(), sigma.matrix());
        let red = partial_trace(&prod, &[3, 2], &[0]).unwrap();
        assert!(max_abs_diff(&red, rho.matrix()) < 1e-14);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DVector::from_vec(vec![c64(s, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(s, 0.0)]);
        let proj = &bell * bell.adjoint();
        let red = partial_trace(&proj, &[2, 2], &[0]).unwrap();
        assert!(max_abs_diff(&red, &identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_sum_oracle() {
        let mut rng = SeededRng::new(5, 1);
        let dims = [2usize, 3, 2];
        let m = random_matrix(12, 12, &mut rng);
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2], vec![0, 1, 2]] {
            let red = partial_trace(&m, &dims, &keep).unwrap();
            // element-wise summation oracle over explicit multi-indices
            let kd: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
            let kdim: usize = kd.iter().product();
            let mut oracle = ComplexMatrix::zeros(kdim, kdim);
            for a0 in 0..2 {
                for a1 in 0..3 {
                    for a2 in 0..2 {
                        for b0 in 0..2 {
                            for b1 in 0..3 {
                                for b2 in 0..2 {
                                    let a = [a0, a1, a2];
                                    let b = [b0, b1, b2];
                                    let traced_equal = (0..3)
                                        .filter(|s| !keep.contains(s))
                                        .all(|s| a[s] == b[s]);
                                    if !traced_equal {
                                        continue;
                                    }
                                    let mut ki = 0;
                                    let mut kj = 0;
                                    for &s in &keep {
                                        ki = ki * dims[s] + a[s];
                                        kj = kj * dims[s] + b[s];
                                    }
                                    let i = (a0 * 3 + a1) * 2 + a2;
                                    let j = (b0 * 3 + b1) * 2 + b2;
                                    oracle[(ki, kj)] += m[(i, j)];
                                }
                            }
                        }
                    }
                }
            }
            assert!(max_abs_diff(&red, &oracle) < 1e-12, "keep {keep:?}");
            assert!((red.trace() - m.trace()).norm() < 1e-12 || keep.len() < 3);
        }
        let full = partial_trace(&m, &dims, &[]).unwrap();
        assert!((full[(0, 0)] - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_dimension_errors() {
        let m = identity(4);
        assert!(partial_trace(&m, &[2, 3], &[0]).is_err());
        assert!(partial_trace(&m, &[2, 2], &[2]).is_err());
        assert!(partial_trace(&ComplexMatrix::zeros(4, 2), &[2, 2], &[0]).is_err());
    }

    #[test]
    fn herm_expm_examples() {
        let zero = HermitianOperator::zeros(3);
        assert!(max_abs_diff(&herm_expm(&zero, c64(0.3, -2.0)), &identity(3)) < 1e-15);

        let z = HermitianOperator::new(pauli_z()).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let u = herm_expm(&z, c64(0.0, -half_pi));
        let expected = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            c64(0.0, -half_pi).exp(),
            c64(0.0, half_pi).exp(),
        ]));
        assert!(max_abs_diff(&u, &expected) < 1e-15);
    }

    /// Scaling-and-squaring Taylor oracle for `exp(A)`.
    fn taylor_expm(a: &ComplexMatrix) -> ComplexMatrix {
        let norm: f64 = a.iter().map(|z| z.norm()).sum();
        let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scaled = a.unscale(2f64.powi(squarings));
        let n = a.nrows();
        let mut sum = identity(n);
        let mut term = identity(n);
        for k in 1..=30 {
            term = &term * &scaled / c64(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn herm_expm_matches_taylor_oracle() {
        let mut rng = SeededRng::new(7, 3);
        let h = random_hermitian(4, &mut rng);
        let scale = c64(0.0, -0.7);
        let u = herm_expm(&h, scale);
        let oracle = taylor_expm(&h.matrix().map(|z| z * scale));
        assert!(max_abs_diff(&u, &oracle) <= 1e-9);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(4)) < 1e-10);
    }

    #[test]
    fn herm_expm_rejects_non_hermitian_input() {
        let mut m = pauli_x();
        m[(0, 1)] = c64(2.0, 0.0);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn hs_inner_examples() {
        let i2 = HermitianOperator::identity(2);
        assert_eq!(hs_inner(&i2, &i2).unwrap(), 2.0);
        assert_eq!(hs_inner(&HermitianOperator::pauli_x(), &HermitianOperator::pauli_z()).unwrap(), 0.0);
        let plus = crate::qcore::DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap();
        assert!((hs_inner(&HermitianOperator::pauli_x(), &plus).unwrap() - 1.0).abs() < 1e-15);
        assert!(hs_inner(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn unitary_determinant_has_unit_modulus() {
        let mut rng = SeededRng::new(1, 9);
        for d in [1, 2, 5, 8] {
            let u = haar_unitary(d, &mut rng);
            assert!((u.determinant().norm() - 1.0).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kron_is_associative(seed in any::<u64>(), ra in 1usize..4, rb in 1usize..4, rc in 1usize..3) {
            let mut rng = SeededRng::new(seed, 0);
            let a = random_matrix(ra, ra + 1, &mut rng);
            let b = random_matrix(rb, rb, &mut rng);
            let c = random_matrix(rc + 1, rc, &mut rng);
            let left = kron(&kron(&a, &b), &c);
            let right = kron(&a, &kron(&b, &c));
            prop_assert!(max_abs_diff(&left, &right) <= 1e-12);
        }

        #[test]
        fn partial_trace_of_product(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
            let mut rng = SeededRng::new(seed, 1);
            let a = random_matrix(da, da, &mut rng);
            let b = random_matrix(db, db, &mut rng);
            let red = partial_trace(&kron(&a, &b), &[da, db], &[0]).unwrap();
            prop_assert!(max_abs_diff(&red, &(a * b.trace())) <= 1e-12);
        }

        #[test]
        fn expm_forward_backward_is_identity(seed in any::<u64>(), d in 1usize..7, t in -3.0f64..3.0) {
            let mut rng = SeededRng::new(seed, 2);
            let h = random_hermitian(d, &mut rng);
            let fwd = herm_expm(&h, c64(0.0, -t));
            let bwd = herm_expm(&h, c64(0.0, t));
            prop_assert!(max_abs_diff(&(fwd * bwd), &identity(d)) <= 1e-10);
        }
    }
}
