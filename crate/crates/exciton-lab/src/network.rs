//! Single-excitation exciton networks and their trapping structure.
//!
//! A network is a set of N pigment sites with energies and coherent
//! couplings (both in cm⁻¹), per-site dephasing and dissipation rates, and a
//! designated site wired irreversibly to a sink. Coherent evolution of such a
//! network generically traps part of the excitation in dark states —
//! superpositions whose tunneling amplitudes toward the sink site cancel
//! exactly — and [`dark_subspace`](ExcitonNetwork::dark_subspace) computes
//! that subspace explicitly from the Hamiltonian eigenstructure.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, symmetric_eigensystem, CMat, CVec};
use crate::units::cm1_to_angular;

/// Bundled 7-site FMO Hamiltonian data (external literature values, cm⁻¹).
const FMO7_JSON: &str = include_str!("../data/fmo_hamiltonian.json");

/// An N-site single-excitation network with noise-rate metadata.
///
/// Site indices are 1-based in the public interface (matching the JSON
/// schema); energies and couplings are stored in cm⁻¹ and converted to
/// angular frequency only when a Hamiltonian is assembled.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NetworkJson", into = "NetworkJson")]
pub struct ExcitonNetwork {
    n_sites: usize,
    energies_cm1: Vec<f64>,
    couplings_cm1: Array2<f64>,
    dephasing_rates: Vec<f64>,
    dissipation_rates: Vec<f64>,
    sink_site: usize,
    sink_rate: f64,
    initial_site: usize,
    description: Option<String>,
}

/// Wire format: `{n_sites, energies_cm1[], couplings_cm1[][], dephasing_rates[],
/// dissipation_rates[], sink_site, sink_rate, initial_site}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkJson {
    n_sites: usize,
    energies_cm1: Vec<f64>,
    couplings_cm1: Vec<Vec<f64>>,
    dephasing_rates: Vec<f64>,
    dissipation_rates: Vec<f64>,
    sink_site: usize,
    sink_rate: f64,
    initial_site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

impl TryFrom<NetworkJson> for ExcitonNetwork {
    type Error = Error;

    fn try_from(j: NetworkJson) -> Result<Self> {
        let n = j.n_sites;
        if j.energies_cm1.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "expected {n} energies, got {}",
                j.energies_cm1.len()
            )));
        }
        if j.couplings_cm1.len() != n || j.couplings_cm1.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidNetwork(format!(
                "couplings_cm1 must be {n}x{n}"
            )));
        }
        let mut couplings = Array2::zeros((n, n));
        for (i, row) in j.couplings_cm1.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                couplings[[i, k]] = v;
            }
        }
        ExcitonNetwork::new(
            j.energies_cm1,
            couplings,
            j.dephasing_rates,
            j.dissipation_rates,
            j.sink_site,
            j.sink_rate,
            j.initial_site,
        )
        .map(|net| net.with_description(j.description))
    }
}

impl From<ExcitonNetwork> for NetworkJson {
    fn from(net: ExcitonNetwork) -> Self {
        let n = net.n_sites;
        let couplings_cm1 = (0..n)
            .map(|i| (0..n).map(|k| net.couplings_cm1[[i, k]]).collect())
            .collect();
        NetworkJson {
            n_sites: n,
            energies_cm1: net.energies_cm1,
            couplings_cm1,
            dephasing_rates: net.dephasing_rates,
            dissipation_rates: net.dissipation_rates,
            sink_site: net.sink_site,
            sink_rate: net.sink_rate,
            initial_site: net.initial_site,
            description: net.description,
        }
    }
}

impl ExcitonNetwork {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        energies_cm1: Vec<f64>,
        couplings_cm1: Array2<f64>,
        dephasing_rates: Vec<f64>,
        dissipation_rates: Vec<f64>,
        sink_site: usize,
        sink_rate: f64,
        initial_site: usize,
    ) -> Result<Self> {
        let n = energies_cm1.len();
        if n == 0 {
            return Err(Error::InvalidNetwork(
                "network needs at least one site".into(),
            ));
        }
        if couplings_cm1.nrows() != n || couplings_cm1.ncols() != n {
            return Err(Error::InvalidNetwork(format!(
                "expected {n}x{n} couplings, got {}x{}",
                couplings_cm1.nrows(),
                couplings_cm1.ncols()
            )));
        }
        for i in 0..n {
            if couplings_cm1[[i, i]] != 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "coupling diagonal must be zero (site {})",
                    i + 1
                )));
            }
            for j in 0..n {
                if (couplings_cm1[[i, j]] - couplings_cm1[[j, i]]).abs() > 1e-12 {
                    return Err(Error::InvalidNetwork(format!(
                        "couplings must be symmetric (sites {}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if dephasing_rates.len() != n || dissipation_rates.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "rate vectors must have length {n}"
            )));
        }
        if dephasing_rates.iter().chain(&dissipation_rates).any(|&r| r < 0.0) || sink_rate < 0.0 {
            return Err(Error::InvalidNetwork("rates must be non-negative".into()));
        }
        if sink_site == 0 || sink_site > n {
            return Err(Error::InvalidNetwork(format!(
                "sink_site {sink_site} out of range 1..={n}"
            )));
        }
        if initial_site == 0 || initial_site > n {
            return Err(Error::InvalidNetwork(format!(
                "initial_site {initial_site} out of range 1..={n}"
            )));
        }
        Ok(Self {
            n_sites: n,
            energies_cm1,
            couplings_cm1,
            dephasing_rates,
            dissipation_rates,
            sink_site,
            sink_rate,
            initial_site,
            description: None,
        })
    }

    /// Fully connected network: equal site energies, every pair coupled with
    /// the same strength J, no noise.
    pub fn fully_connected(
        n: usize,
        energy_cm1: f64,
        coupling_cm1: f64,
        sink_site: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidNetwork(format!(
                "fully connected network needs n >= 2, got {n}"
            )));
        }
        if coupling_cm1 == 0.0 {
            return Err(Error::InvalidNetwork("coupling must be nonzero".into()));
        }
        let mut couplings = Array2::from_elem((n, n), coupling_cm1);
        for i in 0..n {
            couplings[[i, i]] = 0.0;
        }
        Self::new(
            vec![energy_cm1; n],
            couplings,
            vec![0.0; n],
            vec![0.0; n],
            sink_site,
            0.0,
            1,
        )
    }

    /// The bundled seven-site FMO network: excitation injected at site 1,
    /// sink wired to site 3. Hamiltonian values are external literature data
    /// shipped in `data/fmo_hamiltonian.json`.
    pub fn fmo7() -> Self {
        serde_json::from_str(FMO7_JSON).expect("bundled FMO data file is valid")
    }

    /// Load a seven-site FMO network from an editable JSON data file.
    pub fn fmo7_from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let net: ExcitonNetwork = serde_json::from_str(&text)?;
        if net.n_sites != 7 {
            return Err(Error::InvalidNetwork(format!(
                "FMO data file must describe 7 sites, got {}",
                net.n_sites
            )));
        }
        Ok(net)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn energies_cm1(&self) -> &[f64] {
        &self.energies_cm1
    }

    pub fn couplings_cm1(&self) -> &Array2<f64> {
        &self.couplings_cm1
    }

    pub fn dephasing_rates(&self) -> &[f64] {
        &self.dephasing_rates
    }

    pub fn dissipation_rates(&self) -> &[f64] {
        &self.dissipation_rates
    }

    /// 1-based index of the site wired to the sink.
    pub fn sink_site(&self) -> usize {
        self.sink_site
    }

    /// Sink transfer rate Γ in ps⁻¹.
    pub fn sink_rate(&self) -> f64 {
        self.sink_rate
    }

    /// 1-based index of the initially excited site.
    pub fn initial_site(&self) -> usize {
        self.initial_site
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    fn with_description(mut self, description: Option<String>) -> Self {
        self.description = description;
        self
    }

    /// Replace all dephasing rates with a uniform value (ps⁻¹).
    pub fn with_uniform_dephasing(&self, gamma: f64) -> Self {
        let mut net = self.clone();
        net.dephasing_rates = vec![gamma.max(0.0); self.n_sites];
        net
    }

    pub fn with_dephasing_rates(&self, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != self.n_sites {
            return Err(Error::InvalidNetwork(format!(
                "expected {} dephasing rates, got {}",
                self.n_sites,
                rates.len()
            )));
        }
        if rates.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidNetwork("rates must be non-negative".into()));
        }
        let mut net = self.clone();
        net.dephasing_rates = rates;
        Ok(net)
    }

    pub fn with_sink_rate(&self, gamma: f64) -> Result<Self> {
        if gamma < 0.0 {
            return Err(Error::InvalidNetwork(
                "sink rate must be non-negative".into(),
            ));
        }
        let mut net = self.clone();
        net.sink_rate = gamma;
        Ok(net)
    }

    pub fn with_initial_site(&self, site: usize) -> Result<Self> {
        if site == 0 || site > self.n_sites {
            return Err(Error::InvalidNetwork(format!(
                "initial_site {site} out of range 1..={}",
                self.n_sites
            )));
        }
        let mut net = self.clone();
        net.initial_site = site;
        Ok(net)
    }

    /// Shift site energies by explicit offsets (cm⁻¹); couplings untouched.
    pub fn with_energy_offsets(&self, offsets_cm1: &[f64]) -> Result<Self> {
        if offsets_cm1.len() != self.n_sites {
            return Err(Error::InvalidNetwork(format!(
                "expected {} offsets, got {}",
                self.n_sites,
                offsets_cm1.len()
            )));
        }
        let mut net = self.clone();
        for (e, off) in net.energies_cm1.iter_mut().zip(offsets_cm1) {
            *e += off;
        }
        Ok(net)
    }

    /// Static diagonal disorder: independent Gaussian energy offsets with the
    /// given standard deviation. Deterministic under a fixed seed.
    pub fn with_gaussian_disorder(&self, seed: u64, std_dev_cm1: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std_dev_cm1)
            .map_err(|e| Error::InvalidNetwork(format!("bad disorder std-dev: {e}")))?;
        let offsets: Vec<f64> = (0..self.n_sites).map(|_| normal.sample(&mut rng)).collect();
        self.with_energy_offsets(&offsets)
    }

    /// Site-basis Hamiltonian in cm⁻¹.
    pub fn hamiltonian_cm1(&self) -> Array2<f64> {
        let n = self.n_sites;
        let mut h = self.couplings_cm1.clone();
        for i in 0..n {
            h[[i, i]] = self.energies_cm1[i];
        }
        h
    }

    /// Site-basis Hamiltonian in angular frequency (rad/ps).
    pub fn hamiltonian_angular(&self) -> Array2<f64> {
        self.hamiltonian_cm1().mapv(cm1_to_angular)
    }

    /// Diagonalize the 2×2 block of sites i, j (1-based) and rotate the rest
    /// of the Hamiltonian consistently. The returned network has zero
    /// coupling between the new |+⟩ (upper) and |−⟩ (lower) levels stored at
    /// positions i and j; the full spectrum is untouched. Also returns the
    /// mixing angle θ with |+⟩ = cos θ |i⟩ + sin θ |j⟩.
    pub fn hybrid_basis(&self, i: usize, j: usize) -> Result<(Self, f64)> {
        if i == j {
            return Err(Error::InvalidNetwork(
                "hybrid basis needs two distinct sites".into(),
            ));
        }
        for &s in &[i, j] {
            if s == 0 || s > self.n_sites {
                return Err(Error::InvalidNetwork(format!(
                    "site {s} out of range 1..={}",
                    self.n_sites
                )));
            }
        }
        let (i0, j0) = (i - 1, j - 1);
        let a = self.energies_cm1[i0];
        let b = self.energies_cm1[j0];
        let coupling = self.couplings_cm1[[i0, j0]];
        let theta = if coupling == 0.0 {
            0.0
        } else {
            0.5 * (2.0 * coupling).atan2(a - b)
        };
        let (cs, sn) = (theta.cos(), theta.sin());

        let h = self.hamiltonian_cm1();
        let n = self.n_sites;
        let mut rot = Array2::from_diag_elem(n, 1.0);
        rot[[i0, i0]] = cs;
        rot[[j0, i0]] = sn;
        rot[[i0, j0]] = -sn;
        rot[[j0, j0]] = cs;
        let h_rot = rot.t().dot(&h).dot(&rot);

        let mut energies = Vec::with_capacity(n);
        let mut couplings = h_rot.clone();
        for k in 0..n {
            energies.push(h_rot[[k, k]]);
            couplings[[k, k]] = 0.0;
        }
        // The rotated block is diagonal by construction; zero the round-off.
        couplings[[i0, j0]] = 0.0;
        couplings[[j0, i0]] = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let avg = 0.5 * (couplings[[p, q]] + couplings[[q, p]]);
                couplings[[p, q]] = avg;
                couplings[[q, p]] = avg;
            }
        }

        let net = Self::new(
            energies,
            couplings,
            self.dephasing_rates.clone(),
            self.dissipation_rates.clone(),
            self.sink_site,
            self.sink_rate,
            self.initial_site,
        )?;
        Ok((net, theta))
    }

    /// The dark (trapping) subspace: all single-excitation states whose
    /// transition amplitude to the sink site vanishes at every time.
    ///
    /// Within each Hamiltonian eigenspace, a state is dark exactly when it is
    /// orthogonal to the projection of |s⟩ onto that eigenspace; eigenvalues
    /// closer than 1e-8 (relative to the spectral scale) are clustered into
    /// one eigenspace so that exactly degenerate models survive round-off.
    pub fn dark_subspace(&self) -> DarkSubspace {
        let h = self.hamiltonian_angular();
        let n = self.n_sites;
        let (eigs, vecs) = symmetric_eigensystem(&h).expect("network Hamiltonian is symmetric");
        let scale = eigs.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
        let cluster_tol = 1e-8 * scale;
        let s0 = self.sink_site - 1;

        let mut basis_cols: Vec<Vec<f64>> = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (eigs[end] - eigs[end - 1]).abs() <= cluster_tol {
                end += 1;
            }
            // Sink-site coefficients in this eigenspace's basis.
            let coeff: Vec<f64> = (start..end).map(|k| vecs[[s0, k]]).collect();
            let norm = coeff.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dim = end - start;
            if norm < 1e-10 {
                // Sink has no weight here: the whole eigenspace is dark.
                for k in start..end {
                    basis_cols.push(vecs.column(k).to_vec());
                }
            } else if dim > 1 {
                // Orthonormal complement of the bright direction, built by
                // Gram-Schmidt in eigenspace coordinates.
                let bright: Vec<f64> = coeff.iter().map(|x| x / norm).collect();
                let mut local: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
                for seed in 0..dim {
                    let mut v: Vec<f64> = (0..dim).map(|t| (t == seed) as u8 as f64).collect();
                    let overlap: f64 = v.iter().zip(&bright).map(|(x, y)| x * y).sum();
                    for (x, y) in v.iter_mut().zip(&bright) {
                        *x -= overlap * y;
                    }
                    for prev in &local {
                        let ov: f64 = v.iter().zip(prev).map(|(x, y)| x * y).sum();
                        for (x, y) in v.iter_mut().zip(prev) {
                            *x -= ov * y;
                        }
                    }
                    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if vn > 1e-8 {
                        v.iter_mut().for_each(|x| *x /= vn);
                        local.push(v);
                        if local.len() == dim - 1 {
                            break;
                        }
                    }
                }
                for coeffs in local {
                    let mut col = vec![0.0; n];
                    for (t, &w) in coeffs.iter().enumerate() {
                        for r in 0..n {
                            col[r] += w * vecs[[r, start + t]];
                        }
                    }
                    basis_cols.push(col);
                }
            }
            start = end;
        }

        let dim = basis_cols.len();
        let mut basis = CMat::zeros((n, dim));
        for (k, col) in basis_cols.iter().enumerate() {
            for r in 0..n {
                basis[[r, k]] = c(col[r]);
            }
        }
        DarkSubspace {
            basis,
            dimension: dim,
        }
    }
}

/// Orthonormal basis of the trapping subspace of a network.
#[derive(Debug, Clone)]
pub struct DarkSubspace {
    /// n_sites × dimension matrix whose columns are the basis vectors.
    basis: CMat,
    dimension: usize,
}

impl DarkSubspace {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Projector onto the dark subspace.
    pub fn projector(&self) -> CMat {
        let n = self.basis.nrows();
        if self.dimension == 0 {
            return CMat::zeros((n, n));
        }
        let dag = self.basis.t().mapv(|z| z.conj());
        self.basis.dot(&dag)
    }

    /// ‖P_dark |ψ⟩‖² — the excitation weight that can never reach the sink.
    pub fn trapped_weight(&self, psi: &CVec) -> f64 {
        let mut total = 0.0;
        for k in 0..self.dimension {
            let overlap: Complex64 = self
                .basis
                .column(k)
                .iter()
                .zip(psi.iter())
                .map(|(b, p)| b.conj() * p)
                .sum();
            total += overlap.norm_sqr();
        }
        total
    }

    /// Trapped weight of a site basis state, 1-based index.
    pub fn trapped_weight_of_site(&self, site: usize) -> f64 {
        let n = self.basis.nrows();
        let mut psi = CVec::zeros(n);
        psi[site - 1] = c(1.0);
        self.trapped_weight(&psi)
    }
}

/// Unit basis vector |site⟩ (1-based) in the n-dimensional site space.
pub fn site_vector(n: usize, site: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[site - 1] = c(1.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, expm, eye, max_abs_diff};

    #[test]
    fn fully_connected_dimer() {
        let net = ExcitonNetwork::fully_connected(2, 0.0, 50.0, 2).unwrap();
        let h = net.hamiltonian_cm1();
        assert_eq!(h[[0, 1]], 50.0);
        assert_eq!(h[[1, 0]], 50.0);
        assert_eq!(h[[0, 0]], 0.0);
    }

    #[test]
    fn fully_connected_five_sites() {
        let net = ExcitonNetwork::fully_connected(5, 0.0, 1.0, 3).unwrap();
        let h = net.hamiltonian_cm1();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 0.0 } else { 1.0 };
                assert_eq!(h[[i, j]], expected);
            }
        }
    }

    #[test]
    fn fully_connected_spectrum() {
        // Complete graph on 4 sites: eigenvalues ε + 3J and ε − J (×3).
        let (eps, j) = (10.0, 3.0);
        let net = ExcitonNetwork::fully_connected(4, eps, j, 4).unwrap();
        let (eigs, _) = symmetric_eigensystem(&net.hamiltonian_cm1()).unwrap();
        assert!((eigs[3] - (eps + 3.0 * j)).abs() < 1e-10);
        for k in 0..3 {
            assert!((eigs[k] - (eps - j)).abs() < 1e-10);
        }
    }

    #[test]
    fn fully_connected_rejects_small_n() {
        assert!(ExcitonNetwork::fully_connected(1, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn fmo7_bundled_layout() {
        let net = ExcitonNetwork::fmo7();
        assert_eq!(net.n_sites(), 7);
        assert_eq!(net.sink_site(), 3);
        assert_eq!(net.initial_site(), 1);
        // Strong 1-2 coupling dominates row 1.
        let c12 = net.couplings_cm1()[[0, 1]].abs();
        for k in 2..7 {
            assert!(c12 > net.couplings_cm1()[[0, k]].abs());
        }
    }

    #[test]
    fn fmo7_rejects_wrong_site_count() {
        let mut j: serde_json::Value = serde_json::from_str(super::FMO7_JSON).unwrap();
        j["n_sites"] = serde_json::json!(6);
        j["energies_cm1"].as_array_mut().unwrap().pop();
        let text = serde_json::to_string(&j).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, text).unwrap();
        assert!(ExcitonNetwork::fmo7_from_file(&path).is_err());
    }

    #[test]
    fn network_json_round_trip() {
        let net = ExcitonNetwork::fmo7();
        let text = serde_json::to_string(&net).unwrap();
        let back: ExcitonNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(net.energies_cm1(), back.energies_cm1());
        assert_eq!(net.sink_site(), back.sink_site());
        assert_eq!(net.sink_rate(), back.sink_rate());
        assert!(
            max_abs_diff(
                &net.couplings_cm1().mapv(c),
                &back.couplings_cm1().mapv(c)
            ) < 1e-300
        );
    }

    #[test]
    fn zero_offsets_leave_network_unchanged() {
        let net = ExcitonNetwork::fmo7();
        let shifted = net.with_energy_offsets(&[0.0; 7]).unwrap();
        assert_eq!(net.energies_cm1(), shifted.energies_cm1());
    }

    #[test]
    fn disorder_is_deterministic_under_seed() {
        let net = ExcitonNetwork::fmo7();
        let a = net.with_gaussian_disorder(42, 30.0).unwrap();
        let b = net.with_gaussian_disorder(42, 30.0).unwrap();
        assert_eq!(a.energies_cm1(), b.energies_cm1());
        let other = net.with_gaussian_disorder(43, 30.0).unwrap();
        assert_ne!(a.energies_cm1(), other.energies_cm1());
    }

    #[test]
    fn hybrid_basis_degenerate_pair() {
        let net = ExcitonNetwork::fully_connected(2, 0.0, 25.0, 2).unwrap();
        let (rotated, theta) = net.hybrid_basis(1, 2).unwrap();
        assert!((theta - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert!((rotated.energies_cm1()[0] - 25.0).abs() < 1e-12);
        assert!((rotated.energies_cm1()[1] + 25.0).abs() < 1e-12);
        assert_eq!(rotated.couplings_cm1()[[0, 1]], 0.0);
    }

    #[test]
    fn hybrid_basis_zero_coupling_is_identity() {
        let mut couplings = Array2::zeros((3, 3));
        couplings[[1, 2]] = 4.0;
        couplings[[2, 1]] = 4.0;
        let net = ExcitonNetwork::new(
            vec![1.0, 2.0, 3.0],
            couplings,
            vec![0.0; 3],
            vec![0.0; 3],
            1,
            0.0,
            1,
        )
        .unwrap();
        let (rotated, theta) = net.hybrid_basis(1, 2).unwrap();
        assert_eq!(theta, 0.0);
        assert_eq!(rotated.energies_cm1(), net.energies_cm1());
    }

    #[test]
    fn hybrid_basis_fmo_sites_1_2() {
        // Closed-form 2×2 diagonalization of the bundled block.
        let net = ExcitonNetwork::fmo7();
        let (a, b) = (net.energies_cm1()[0], net.energies_cm1()[1]);
        let j = net.couplings_cm1()[[0, 1]];
        let mean = 0.5 * (a + b);
        let half_split = (0.25 * (a - b) * (a - b) + j * j).sqrt();

        let (rotated, theta) = net.hybrid_basis(1, 2).unwrap();
        assert!((rotated.energies_cm1()[0] - (mean + half_split)).abs() < 1e-9);
        assert!((rotated.energies_cm1()[1] - (mean - half_split)).abs() < 1e-9);
        // θ solves tan 2θ = 2J/(E₁−E₂).
        assert!(((2.0 * theta).tan() - 2.0 * j / (a - b)).abs() < 1e-9);
    }

    #[test]
    fn hybrid_basis_preserves_spectrum() {
        let net = ExcitonNetwork::fmo7();
        let (rotated, _) = net.hybrid_basis(1, 2).unwrap();
        let (e0, _) = symmetric_eigensystem(&net.hamiltonian_cm1()).unwrap();
        let (e1, _) = symmetric_eigensystem(&rotated.hamiltonian_cm1()).unwrap();
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn hybrid_basis_rejects_equal_sites() {
        let net = ExcitonNetwork::fmo7();
        assert!(net.hybrid_basis(2, 2).is_err());
    }

    #[test]
    fn dark_subspace_dimer_is_empty() {
        let net = ExcitonNetwork::fully_connected(2, 0.0, 10.0, 2).unwrap();
        assert_eq!(net.dark_subspace().dimension(), 0);
    }

    #[test]
    fn dark_subspace_fully_connected() {
        for n in [3usize, 5, 8] {
            let net = ExcitonNetwork::fully_connected(n, 0.0, 7.0, n).unwrap();
            let dark = net.dark_subspace();
            assert_eq!(dark.dimension(), n - 2, "n = {n}");
            // Trapped weight of the initial site matches 1 − 1/(N−1).
            let w = dark.trapped_weight_of_site(1);
            assert!((w - (1.0 - 1.0 / (n as f64 - 1.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn dark_subspace_decoupled_sink() {
        // Sink site fully decoupled: everything except |s⟩ is dark.
        let n = 5;
        let mut couplings = Array2::from_elem((n, n), 3.0);
        for i in 0..n {
            couplings[[i, i]] = 0.0;
            couplings[[i, n - 1]] = 0.0;
            couplings[[n - 1, i]] = 0.0;
        }
        let net = ExcitonNetwork::new(
            vec![0.0; n],
            couplings,
            vec![0.0; n],
            vec![0.0; n],
            n,
            0.0,
            1,
        )
        .unwrap();
        assert_eq!(net.dark_subspace().dimension(), n - 1);
    }

    #[test]
    fn dark_states_have_no_sink_amplitude_at_any_time() {
        // |⟨s| e^{−iHt} |v⟩| stays below 1e-8 on a 100-point grid.
        let net = ExcitonNetwork::fully_connected(6, 12.0, 5.0, 4).unwrap();
        let dark = net.dark_subspace();
        assert!(dark.dimension() > 0);
        let h = net.hamiltonian_angular().mapv(c);
        let s0 = net.sink_site() - 1;
        for t_idx in 0..100 {
            let t = 0.05 * t_idx as f64;
            let u = expm(&h.mapv(|z| z * Complex64::new(0.0, -t))).unwrap();
            for k in 0..dark.dimension() {
                let col = dark.basis().column(k);
                let amp: Complex64 = (0..net.n_sites()).map(|r| u[[s0, r]] * col[r]).sum();
                assert!(
                    amp.norm() < 1e-8,
                    "dark state {k} leaks {:.2e} at t = {t}",
                    amp.norm()
                );
            }
        }
    }

    #[test]
    fn dark_basis_is_orthonormal_and_invariant() {
        let net = ExcitonNetwork::fully_connected(7, 0.0, 2.0, 5).unwrap();
        let dark = net.dark_subspace();
        let b = dark.basis();
        let gram = dagger(b).dot(b);
        assert!(max_abs_diff(&gram, &eye(dark.dimension())) < 1e-12);
        // The dark projector commutes with H.
        let p = dark.projector();
        let h = net.hamiltonian_angular().mapv(c);
        assert!(max_abs_diff(&p.dot(&h), &h.dot(&p)) < 1e-9);
    }
}
