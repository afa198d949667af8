//! States, channels, and the distances between them.
//!
//! Conventions used throughout the crate:
//!
//! * vectorization is column-stacking, so vec(AXB) = (Bᵀ ⊗ A) vec(X) and a
//!   Kraus operator K contributes K̄ ⊗ K to the superoperator;
//! * the Choi matrix is unnormalized, C = Σ_mn E_mn ⊗ Φ(E_mn), so the Choi of
//!   the identity channel is d times the maximally entangled projector and
//!   trace(C) = d for any trace-preserving map. Complete positivity is then
//!   exactly C ⪰ 0, with no scale factors;
//! * in bipartite layouts the reference copy is the first tensor factor and
//!   the channel output the second.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, dagger, eye, frobenius_norm, hermitian_deviation, hermitian_eigensystem, CMat, CVec,
};

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive state over a finite-dimensional Hilbert
/// space. Eigenvalues down to −1e-10 are accepted as integrator round-off and
/// clipped to zero with renormalization; anything lower is rejected.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        let dim = mat.nrows();
        if dim == 0 || mat.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square and nonempty, got {}x{}",
                dim,
                mat.ncols()
            )));
        }
        let dev = hermitian_deviation(&mat);
        if dev > HERMITICITY_TOL * frobenius_norm(&mat).max(1.0) {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: HERMITICITY_TOL,
            });
        }
        let trace = trace(&mat).re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {trace} deviates from 1 by more than {TRACE_TOL:.0e}"
            )));
        }
        let (eigs, v) = hermitian_eigensystem(&mat)?;
        if eigs[0] < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:.3e} below tolerance -{POSITIVITY_TOL:.0e}",
                eigs[0]
            )));
        }
        let mat = if eigs[0] < 0.0 {
            // Clip round-off negatives and renormalize.
            let clipped: Vec<f64> = eigs.iter().map(|&x| x.max(0.0)).collect();
            let norm: f64 = clipped.iter().sum();
            let lambda = Array2::from_diag(&ndarray::arr1(
                &clipped.iter().map(|&x| c(x / norm)).collect::<Vec<_>>(),
            ));
            v.dot(&lambda).dot(&dagger(&v))
        } else {
            mat
        };
        Ok(Self { dim, mat })
    }

    /// Pure state |ψ⟩⟨ψ| from an (unnormalized) state vector.
    pub fn pure(psi: &CVec) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let n = psi.len();
        let mut mat = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                mat[[i, j]] = psi[i] * psi[j].conj() / c(norm * norm);
            }
        }
        Self::new(mat)
    }

    /// Basis state |k⟩⟨k| in dimension `dim`.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut mat = CMat::zeros((dim, dim));
        mat[[k, k]] = c(1.0);
        Self::new(mat)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            dim,
            mat: eye(dim).mapv(|z| z / c(dim as f64)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigensystem(&self.mat)
            .expect("density matrix is Hermitian by construction")
            .0
    }

    /// Re-check all typed invariants; useful as a per-instance assertion.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.mat.clone()).map(|_| ())
    }
}

fn trace(m: &CMat) -> Complex64 {
    m.diag().iter().sum()
}

/// ½ Σ singular values of a − b; the standard trace distance in [0, 1].
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    trace_distance_mats(a.mat(), b.mat())
}

/// Trace distance on raw Hermitian matrices (no state validation).
pub fn trace_distance_mats(a: &CMat, b: &CMat) -> Result<f64> {
    let diff = a - b;
    let (eigs, _) = hermitian_eigensystem(&diff)?;
    Ok(0.5 * eigs.iter().map(|x| x.abs()).sum::<f64>())
}

/// Partial transpose over the second factor of a (d₁·d₂)-dimensional matrix.
pub fn partial_transpose_second(m: &CMat, dims: (usize, usize)) -> Result<CMat> {
    let (d1, d2) = dims;
    let n = d1 * d2;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but dims ({d1},{d2}) require {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMat::zeros((n, n));
    for a in 0..d1 {
        for b in 0..d2 {
            for cc in 0..d1 {
                for d in 0..d2 {
                    out[[a * d2 + b, cc * d2 + d]] = m[[a * d2 + d, cc * d2 + b]];
                }
            }
        }
    }
    Ok(out)
}

/// Trace out the second factor: (d₁·d₂) → d₁.
pub fn partial_trace_second(m: &CMat, dims: (usize, usize)) -> Result<CMat> {
    let (d1, d2) = dims;
    let n = d1 * d2;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but dims ({d1},{d2}) require {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMat::zeros((d1, d1));
    for a in 0..d1 {
        for cc in 0..d1 {
            let mut s = Complex64::default();
            for b in 0..d2 {
                s += m[[a * d2 + b, cc * d2 + b]];
            }
            out[[a, cc]] = s;
        }
    }
    Ok(out)
}

/// Trace out the first factor: (d₁·d₂) → d₂.
pub fn partial_trace_first(m: &CMat, dims: (usize, usize)) -> Result<CMat> {
    let (d1, d2) = dims;
    let n = d1 * d2;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but dims ({d1},{d2}) require {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMat::zeros((d2, d2));
    for b in 0..d2 {
        for d in 0..d2 {
            let mut s = Complex64::default();
            for a in 0..d1 {
                s += m[[a * d2 + b, a * d2 + d]];
            }
            out[[b, d]] = s;
        }
    }
    Ok(out)
}

/// Sum of |negative eigenvalues| of the partial transpose over the second
/// subsystem — the negativity entanglement monotone.
pub fn negativity(rho: &DensityMatrix, dims: (usize, usize)) -> Result<f64> {
    if dims.0 * dims.1 != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims ({},{}) do not factor dimension {}",
            dims.0,
            dims.1,
            rho.dim()
        )));
    }
    let pt = partial_transpose_second(rho.mat(), dims)?;
    let (eigs, _) = hermitian_eigensystem(&pt)?;
    Ok(eigs.iter().filter(|&&x| x < 0.0).map(|x| -x).sum())
}

/// Column-stacking vectorization: vec(X)[j·d + i] = X[i, j].
pub fn vec_col(m: &CMat) -> CVec {
    let d = m.nrows();
    let mut v = CVec::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[j * d + i] = m[[i, j]];
        }
    }
    v
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &CVec, d: usize) -> CMat {
    let mut m = CMat::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            m[[i, j]] = v[j * d + i];
        }
    }
    m
}

/// Linear map on vectorized operators; entries follow the column-stacking
/// convention, S[j'd+i', jd+i] = ⟨i'| Φ(E_ij) |j'⟩.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    mat: CMat,
}

impl Superoperator {
    pub fn new(dim: usize, mat: CMat) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "superoperator for dimension {dim} must be {0}x{0}, got {1}x{2}",
                dim * dim,
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { dim, mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: eye(dim * dim),
        }
    }

    /// Superoperator of the unitary conjugation ρ ↦ UρU†.
    pub fn from_unitary(u: &CMat) -> Result<Self> {
        let dim = u.nrows();
        if u.ncols() != dim {
            return Err(Error::DimensionMismatch("unitary must be square".into()));
        }
        let mat = linalg::kron(&u.mapv(|z| z.conj()), u);
        Self::new(dim, mat)
    }

    /// Superoperator from a set of Kraus operators, S = Σ K̄ᵢ ⊗ Kᵢ.
    pub fn from_kraus(kraus: &[CMat]) -> Result<Self> {
        let dim = kraus
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty Kraus set".into()))?
            .nrows();
        let mut mat = CMat::zeros((dim * dim, dim * dim));
        for k in kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch(
                    "Kraus operators must share one square shape".into(),
                ));
            }
            mat = mat + linalg::kron(&k.mapv(|z| z.conj()), k);
        }
        Self::new(dim, mat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    /// Apply the map to an operator.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, superoperator dimension is {}",
                x.nrows(),
                x.ncols(),
                self.dim
            )));
        }
        let v = vec_col(x);
        let out = self.mat.dot(&v);
        Ok(unvec_col(&out, self.dim))
    }

    /// Composition self ∘ other (apply `other` first).
    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(
                "composed superoperators must share a dimension".into(),
            ));
        }
        Superoperator::new(self.dim, self.mat.dot(&other.mat))
    }

    /// Trace preservation ⟺ the adjoint map fixes the identity,
    /// vec(I)† S = vec(I)†. Returns the largest deviation.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let id_vec = vec_col(&eye(d));
        let mut defect = 0.0f64;
        for col in 0..d * d {
            let mut s = Complex64::default();
            for row in 0..d * d {
                s += id_vec[row].conj() * self.mat[[row, col]];
            }
            defect = defect.max((s - id_vec[col].conj()).norm());
        }
        defect
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_defect() <= tol
    }

    /// Reshuffle into the Choi matrix, C[m·d+a, n·d+b] = S[b·d+a, n·d+m].
    pub fn to_choi(&self) -> ChoiMatrix {
        ChoiMatrix {
            dim: self.dim,
            mat: reshuffle(&self.mat, self.dim),
        }
    }
}

/// Choi matrix of a map, unnormalized so that trace = dim for any
/// trace-preserving map and positivity ⟺ complete positivity.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    dim: usize,
    mat: CMat,
}

impl ChoiMatrix {
    pub fn new(dim: usize, mat: CMat) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix for dimension {dim} must be {0}x{0}",
                dim * dim
            )));
        }
        Ok(Self { dim, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        trace(&self.mat)
    }

    /// Smallest eigenvalue; ≥ 0 exactly when the map is completely positive.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (eigs, _) = hermitian_eigensystem(&self.mat)?;
        Ok(eigs[0])
    }

    /// Reshuffle back into the superoperator (the reshuffle is an involution).
    pub fn to_superop(&self) -> Superoperator {
        Superoperator {
            dim: self.dim,
            mat: reshuffle(&self.mat, self.dim),
        }
    }

    /// The Choi state C/d, as a density matrix on the reference ⊗ output
    /// bipartition. Fails if the map is not CP / trace preserving enough to
    /// produce a valid state.
    pub fn as_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.mat.mapv(|z| z / c(self.dim as f64)))
    }
}

/// The superoperator ↔ Choi reshuffle; an exact linear involution.
fn reshuffle(m: &CMat, d: usize) -> CMat {
    let mut out = CMat::zeros((d * d, d * d));
    for mm in 0..d {
        for a in 0..d {
            for n in 0..d {
                for b in 0..d {
                    out[[mm * d + a, n * d + b]] = m[[b * d + a, n * d + mm]];
                }
            }
        }
    }
    out
}

/// The four Pauli matrices I, X, Y, Z.
pub fn pauli_matrices() -> [CMat; 4] {
    let i = Complex64::new(0.0, 1.0);
    let sx = ndarray::arr2(&[[c(0.0), c(1.0)], [c(1.0), c(0.0)]]);
    let sy = ndarray::arr2(&[[c(0.0), -i], [i, c(0.0)]]);
    let sz = ndarray::arr2(&[[c(1.0), c(0.0)], [c(0.0), c(-1.0)]]);
    [eye(2), sx, sy, sz]
}

/// Haar-random unitary from QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> CMat {
    let mut g = CMat::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            g[[i, j]] = Complex64::new(gaussian(rng), gaussian(rng));
        }
    }
    // Gram-Schmidt with phase fixing gives a Haar-distributed Q.
    let mut q = CMat::zeros((dim, dim));
    for j in 0..dim {
        let mut col = g.column(j).to_owned();
        for k in 0..j {
            let qk = q.column(k);
            let proj: Complex64 = qk.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            for i in 0..dim {
                let v = q[[i, k]];
                col[i] -= proj * v;
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let phase = col
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z / z.norm())
            .unwrap_or_else(|| c(1.0));
        for i in 0..dim {
            q[[i, j]] = col[i] / (phase * norm);
        }
    }
    q
}

/// Random density matrix: a normalized mixture of a few random pure states.
pub fn random_density_matrix<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    let u = random_unitary(dim, rng);
    let mut probs: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let lambda = Array2::from_diag(&ndarray::arr1(
        &probs.iter().map(|&p| c(p)).collect::<Vec<_>>(),
    ));
    DensityMatrix::new(u.dot(&lambda).dot(&dagger(&u)))
        .expect("mixture of pure states is a valid state")
}

/// Random CPT channel from a Haar-random Stinespring isometry with an
/// environment of dimension `env_dim`.
pub fn random_cpt_superop<R: Rng>(dim: usize, env_dim: usize, rng: &mut R) -> Superoperator {
    let big = random_unitary(dim * env_dim, rng);
    // Isometry columns: V|ψ⟩ = U (|ψ⟩ ⊗ |0⟩_env); Kraus Kᵢ = (I ⊗ ⟨i|) V.
    // Layout: system ⊗ environment, row index s·env_dim + e.
    let mut kraus = Vec::with_capacity(env_dim);
    for e in 0..env_dim {
        let mut k = CMat::zeros((dim, dim));
        for s_out in 0..dim {
            for s_in in 0..dim {
                k[[s_out, s_in]] = big[[s_out * env_dim + e, s_in * env_dim]];
            }
        }
        kraus.push(k);
    }
    Superoperator::from_kraus(&kraus).expect("Kraus set built with consistent dimensions")
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; good enough for Haar sampling.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
