//! Dense complex linear algebra kernels shared by all modules.
//!
//! Everything here is self-contained: a cyclic Jacobi eigensolver for
//! Hermitian matrices, Gaussian elimination with partial pivoting, and the
//! scaling-and-squaring matrix exponential with Padé(13) approximation
//! (Higham 2005, SIAM J. Matrix Anal. Appl. 26, 1179). Matrix dimensions stay
//! at desk scale (a few hundred at most), so O(n³) dense routines are the
//! right tool.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Shorthand for a real-valued `Complex64`.
#[inline]
pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// n×n complex identity.
pub fn eye(n: usize) -> CMat {
    Array2::from_diag_elem(n, c(1.0))
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Kronecker product, block layout `a[i,j] * b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(a, b)
}

/// Frobenius norm.
pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn one_norm(a: &CMat) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        max = max.max(s);
    }
    max
}

/// Largest entrywise deviation from Hermiticity, ‖A − A†‖_max.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Largest entrywise difference between two matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the unitary matrix whose
/// columns are the matching eigenvectors, so that `m = V diag(λ) V†`.
/// Rejects inputs whose Hermiticity deviation exceeds `1e-10 · scale`.
pub fn hermitian_eigensystem(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigensystem needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let scale = frobenius_norm(m).max(1.0);
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: 1e-10 * scale,
        });
    }

    let mut a = m.clone();
    // Symmetrize exactly so round-off in the input cannot accumulate.
    for i in 0..n {
        a[[i, i]] = c(a[[i, i]].re);
        for j in (i + 1)..n {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]].conj());
            a[[i, j]] = avg;
            a[[j, i]] = avg.conj();
        }
    }
    let mut v = eye(n);
    let fro = frobenius_norm(&a).max(f64::MIN_POSITIVE);
    let skip_below = 1e-17 * fro;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-14 * fro {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                let mag = apq.norm();
                if mag <= skip_below {
                    continue;
                }
                let phase = apq / mag; // e^{iφ}
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                // tan of the rotation angle, smaller root of t² − 2ξt − 1 = 0
                let xi = (aqq - app) / (2.0 * mag);
                let t = if xi >= 0.0 {
                    1.0 / (xi + (1.0 + xi * xi).sqrt())
                } else {
                    -1.0 / (-xi + (1.0 + xi * xi).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;

                // Columns p,q of A and V: right-multiplication by the rotation.
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = cs * akp - sn * phase.conj() * akq;
                    a[[k, q]] = sn * phase * akp + cs * akq;
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = cs * vkp - sn * phase.conj() * vkq;
                    v[[k, q]] = sn * vkp * phase + cs * vkq;
                }
                // Rows p,q: left-multiplication by the adjoint rotation.
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = cs * apk - sn * phase * aqk;
                    a[[q, k]] = sn * phase.conj() * apk + cs * aqk;
                }
                a[[p, q]] = c(0.0);
                a[[q, p]] = c(0.0);
                a[[p, p]] = c(a[[p, p]].re);
                a[[q, q]] = c(a[[q, q]].re);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigs: Vec<f64> = (0..n).map(|i| a[[i, i]].re).collect();
    order.sort_by(|&i, &j| eigs[i].total_cmp(&eigs[j]));
    let sorted_eigs: Vec<f64> = order.iter().map(|&i| eigs[i]).collect();
    let mut sorted_v = CMat::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        sorted_v.column_mut(col).assign(&v.column(i));
    }
    Ok((sorted_eigs, sorted_v))
}

/// Eigendecomposition of a real symmetric matrix; thin wrapper over
/// [`hermitian_eigensystem`] returning real eigenvector columns.
pub fn symmetric_eigensystem(m: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let cm = m.mapv(c);
    let (eigs, v) = hermitian_eigensystem(&cm)?;
    Ok((eigs, v.mapv(|z| z.re)))
}

/// Singular values of a general complex matrix, descending, via the
/// eigenvalues of A†A.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    let ata = dagger(a).dot(a);
    let (eigs, _) = hermitian_eigensystem(&ata)?;
    let mut svs: Vec<f64> = eigs.iter().map(|&x| x.max(0.0).sqrt()).collect();
    svs.reverse();
    Ok(svs)
}

/// Solve A X = B by Gaussian elimination with partial pivoting.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve: A is {}x{}, B has {} rows",
            n,
            a.ncols(),
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = one_norm(a).max(f64::MIN_POSITIVE);

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = lu[[col, col]].norm();
        for row in (col + 1)..n {
            let mag = lu[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < 1e-300 * scale {
            return Err(Error::Numerical(format!(
                "singular matrix in linear solve (pivot {pivot_mag:.3e} at column {col})"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                lu.swap([col, j], [pivot_row, j]);
            }
            for j in 0..m {
                x.swap([col, j], [pivot_row, j]);
            }
        }
        let pivot = lu[[col, col]];
        for row in (col + 1)..n {
            let factor = lu[[row, col]] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in (col + 1)..n {
                let v = lu[[col, j]];
                lu[[row, j]] -= factor * v;
            }
            for j in 0..m {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
            lu[[row, col]] = c(0.0);
        }
    }
    for col in (0..n).rev() {
        let pivot = lu[[col, col]];
        for j in 0..m {
            let mut sum = x[[col, j]];
            for k in (col + 1)..n {
                sum -= lu[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = sum / pivot;
        }
    }
    Ok(x)
}

/// Padé(13) numerator/denominator coefficients (Higham 2005, Table 10.4).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential exp(A) by scaling-and-squaring with Padé(13).
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(CMat::zeros((0, 0)));
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / c((1u64 << s) as f64));

    let id = eye(n);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let w1 = &a6 * c(PADE13[13]) + &a4 * c(PADE13[11]) + &a2 * c(PADE13[9]);
    let w2 = w1.dot(&a6) + &a6 * c(PADE13[7]) + &a4 * c(PADE13[5]) + &a2 * c(PADE13[3]) + &id * c(PADE13[1]);
    let u = scaled.dot(&w2);

    let v1 = &a6 * c(PADE13[12]) + &a4 * c(PADE13[10]) + &a2 * c(PADE13[8]);
    let v = v1.dot(&a6) + &a6 * c(PADE13[6]) + &a4 * c(PADE13[4]) + &a2 * c(PADE13[2]) + &id * c(PADE13[0]);

    let mut result = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        result = result.dot(&result);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let mut m = CMat::zeros((n, n));
        for i in 0..n {
            m[[i, i]] = c(rng.gen_range(-1.0..1.0));
            for j in (i + 1)..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[[i, j]] = z;
                m[[j, i]] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eigensystem_diagonal() {
        let m = Array2::from_diag(&ndarray::arr1(&[c(1.0), c(2.0), c(3.0)]));
        let (eigs, v) = hermitian_eigensystem(&m).unwrap();
        assert_eq!(eigs, vec![1.0, 2.0, 3.0]);
        assert!(max_abs_diff(&v, &eye(3)) < 1e-14);
    }

    #[test]
    fn eigensystem_pauli_x() {
        let mut m = CMat::zeros((2, 2));
        m[[0, 1]] = c(1.0);
        m[[1, 0]] = c(1.0);
        let (eigs, _) = hermitian_eigensystem(&m).unwrap();
        assert!((eigs[0] + 1.0).abs() < 1e-14);
        assert!((eigs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigensystem_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let m = random_hermitian(8, &mut rng);
            let (eigs, v) = hermitian_eigensystem(&m).unwrap();
            let lambda = Array2::from_diag(&ndarray::arr1(
                &eigs.iter().map(|&x| c(x)).collect::<Vec<_>>(),
            ));
            let rebuilt = v.dot(&lambda).dot(&dagger(&v));
            let resid = frobenius_norm(&(&rebuilt - &m)) / frobenius_norm(&m);
            assert!(resid < 1e-10, "residual {resid:.3e}");
            let unit = max_abs_diff(&dagger(&v).dot(&v), &eye(8));
            assert!(unit < 1e-10, "eigenvectors not unitary: {unit:.3e}");
        }
    }

    #[test]
    fn eigensystem_rejects_non_hermitian() {
        let mut m = CMat::zeros((2, 2));
        m[[0, 1]] = c(1.0);
        m[[1, 0]] = c(2.0);
        assert!(matches!(
            hermitian_eigensystem(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(6, &mut rng) + eye(6).mapv(|z| z * c(4.0));
        let x_true = random_hermitian(6, &mut rng);
        let b = a.dot(&x_true);
        let x = solve(&a, &b).unwrap();
        assert!(max_abs_diff(&x, &x_true) < 1e-12);
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = CMat::zeros((4, 4));
        assert!(max_abs_diff(&expm(&z).unwrap(), &eye(4)) < 1e-14);
    }

    #[test]
    fn expm_antihermitian_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(6, &mut rng) * c(30.0); // forces several squarings
        let u = expm(&(h.mapv(|z| z * Complex64::new(0.0, -1.0)))).unwrap();
        let unit = max_abs_diff(&dagger(&u).dot(&u), &eye(6));
        assert!(unit < 1e-12, "unitarity defect {unit:.3e}");
    }

    #[test]
    fn expm_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(5, &mut rng);
        let (eigs, v) = hermitian_eigensystem(&h).unwrap();
        let exp_diag = Array2::from_diag(&ndarray::arr1(
            &eigs.iter().map(|&x| c(x.exp())).collect::<Vec<_>>(),
        ));
        let reference = v.dot(&exp_diag).dot(&dagger(&v));
        assert!(max_abs_diff(&expm(&h).unwrap(), &reference) < 1e-12);
    }
}
