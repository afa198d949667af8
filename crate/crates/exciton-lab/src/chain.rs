//! Star-to-chain transformation of bosonic environments.
//!
//! A system coupled to a continuum with spectral density J(ω) — or to a
//! finite star of modes (ω_k, g_k) — is unitarily equivalent to the same
//! system coupled to the *first* mode of a nearest-neighbour bosonic chain.
//! The chain frequencies and hoppings are the three-term recurrence
//! coefficients (α_n, β_n) of the polynomials orthogonal under the measure
//! J(ω)dω: ω_n = α_n, t_n = √β_{n+1}, and the system couples to the chain
//! head with c₀ = √β₀ = √∫J.
//!
//! Coefficients are computed two independent ways: the discrete Stieltjes
//! procedure on an oversampled Gauss quadrature of the measure, and Lanczos
//! tridiagonalization (full reorthogonalization) of a star discretization
//! seeded with g/‖g‖. Dynamical equivalence of the two pictures is certified
//! by exact propagation on a truncated Fock space with a scaled-and-squared
//! matrix exponential, comparing the reduced system states.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonio::fmt_f64;
use crate::linalg::{c, dagger, expm, eye, kron, symmetric_eigensystem, CMat, CVec};
use crate::quantum::{partial_trace_second, pauli_matrices, trace_distance_mats};

/// Spectral density J(ω) of a bosonic environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralDensity {
    /// Constant J on a finite support interval.
    Flat { value: f64, support: (f64, f64) },
    /// J(ω) = prefactor · ω^exponent on [0, cutoff] (hard cutoff); exponent 1
    /// is the Ohmic case.
    PowerLaw {
        exponent: f64,
        cutoff: f64,
        prefactor: f64,
    },
    /// Piecewise-linear interpolation of (ω, J) samples.
    Tabulated { omegas: Vec<f64>, values: Vec<f64> },
}

impl SpectralDensity {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Flat { support, .. } => *support,
            Self::PowerLaw { cutoff, .. } => (0.0, *cutoff),
            Self::Tabulated { omegas, .. } => (
                omegas.first().copied().unwrap_or(0.0),
                omegas.last().copied().unwrap_or(0.0),
            ),
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            Self::Flat { value, support } => {
                if omega >= support.0 && omega <= support.1 {
                    *value
                } else {
                    0.0
                }
            }
            Self::PowerLaw {
                exponent,
                cutoff,
                prefactor,
            } => {
                if omega < 0.0 || omega > *cutoff {
                    0.0
                } else {
                    prefactor * omega.powf(*exponent)
                }
            }
            Self::Tabulated { omegas, values } => {
                if omegas.is_empty() || omega < omegas[0] || omega > *omegas.last().unwrap() {
                    return 0.0;
                }
                let idx = omegas.partition_point(|&x| x <= omega).min(omegas.len() - 1);
                if idx == 0 {
                    return values[0];
                }
                let (x0, x1) = (omegas[idx - 1], omegas[idx]);
                let (y0, y1) = (values[idx - 1], values[idx]);
                if x1 == x0 {
                    y0
                } else {
                    y0 + (y1 - y0) * (omega - x0) / (x1 - x0)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Flat { value, support } => {
                if *value < 0.0 {
                    return Err(Error::InvalidSpectralDensity("flat level must be >= 0".into()));
                }
                if !(support.0 < support.1) || !support.0.is_finite() || !support.1.is_finite() {
                    return Err(Error::InvalidSpectralDensity(
                        "flat support must be a finite interval".into(),
                    ));
                }
                if *value == 0.0 {
                    return Err(Error::InvalidSpectralDensity("flat density has zero weight".into()));
                }
            }
            Self::PowerLaw {
                exponent,
                cutoff,
                prefactor,
            } => {
                if *exponent <= -1.0 {
                    return Err(Error::InvalidSpectralDensity(format!(
                        "power law exponent {exponent} is not integrable"
                    )));
                }
                if *cutoff <= 0.0 || *prefactor <= 0.0 {
                    return Err(Error::InvalidSpectralDensity(
                        "power law needs positive cutoff and prefactor".into(),
                    ));
                }
            }
            Self::Tabulated { omegas, values } => {
                if omegas.len() < 2 || omegas.len() != values.len() {
                    return Err(Error::InvalidSpectralDensity(
                        "tabulated density needs >= 2 matching samples".into(),
                    ));
                }
                if omegas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSpectralDensity(
                        "tabulated frequencies must be strictly increasing".into(),
                    ));
                }
                if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::InvalidSpectralDensity(
                        "tabulated density must be finite and non-negative".into(),
                    ));
                }
                if values.iter().all(|&v| v == 0.0) {
                    return Err(Error::InvalidSpectralDensity(
                        "tabulated density is not integrable (zero weight)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Load a tabulated density from two-column CSV (omega, J); a non-numeric
    /// first line is treated as a header.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut omegas = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let a = parts.next().map(str::trim);
            let b = parts.next().map(str::trim);
            match (a.and_then(|s| s.parse::<f64>().ok()), b.and_then(|s| s.parse::<f64>().ok())) {
                (Some(x), Some(y)) => {
                    omegas.push(x);
                    values.push(y);
                }
                _ if lineno == 0 => continue, // header
                _ => {
                    return Err(Error::Config(format!(
                        "bad CSV line {} in {}",
                        lineno + 1,
                        path.display()
                    )))
                }
            }
        }
        let density = Self::Tabulated { omegas, values };
        density.validate()?;
        Ok(density)
    }

    /// Total weight ∫ J dω.
    pub fn total_weight(&self) -> Result<f64> {
        let (nodes, weights) = self.measure_quadrature(512)?;
        let _ = nodes;
        Ok(weights.iter().sum())
    }

    /// Gauss-Legendre composite quadrature of the measure J(ω)dω with at
    /// least `min_points` nodes. Exact for polynomial J on each panel;
    /// non-integer power laws get geometrically graded panels toward ω = 0.
    fn measure_quadrature(&self, min_points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        const PANEL_ORDER: usize = 24;
        let (lo, hi) = self.support();

        let edges: Vec<f64> = match self {
            Self::PowerLaw { exponent, .. } if exponent.fract() != 0.0 => {
                // Grade toward the algebraic endpoint singularity.
                let uniform = min_points.div_ceil(PANEL_ORDER).max(4);
                let graded = 48;
                let mut e = vec![0.0];
                for k in 0..graded {
                    e.push(hi * 0.5f64.powi((graded - 1 - k) as i32));
                }
                // Refine the top octaves uniformly as well.
                let mut refined = Vec::new();
                for w in e.windows(2) {
                    let span = w[1] - w[0];
                    let sub = if span > (hi - lo) / uniform as f64 { uniform / 4 } else { 1 };
                    for s in 0..sub {
                        refined.push(w[0] + span * s as f64 / sub as f64);
                    }
                }
                refined.push(hi);
                refined
            }
            Self::Tabulated { omegas, .. } => {
                // Sample points are the panel edges: J is linear inside.
                let mut e = omegas.clone();
                while (e.len() - 1) * PANEL_ORDER < min_points {
                    let mut finer = Vec::with_capacity(e.len() * 2);
                    for w in e.windows(2) {
                        finer.push(w[0]);
                        finer.push(0.5 * (w[0] + w[1]));
                    }
                    finer.push(*e.last().unwrap());
                    e = finer;
                }
                e
            }
            _ => {
                let panels = min_points.div_ceil(PANEL_ORDER).max(4);
                (0..=panels)
                    .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
                    .collect()
            }
        };

        let (gl_nodes, gl_weights) = gauss_legendre(PANEL_ORDER)?;
        let mut nodes = Vec::with_capacity((edges.len() - 1) * PANEL_ORDER);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            if half <= 0.0 {
                continue;
            }
            for (x, gw) in gl_nodes.iter().zip(&gl_weights) {
                let omega = mid + half * x;
                nodes.push(omega);
                weights.push(half * gw * self.eval(omega));
            }
        }
        Ok((nodes, weights))
    }
}

/// Legendre nodes and weights on [−1, 1] via Golub-Welsch on the Jacobi
/// matrix (β_k = k²/(4k²−1), β₀ = 2).
fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut t = ndarray::Array2::<f64>::zeros((order, order));
    for k in 1..order {
        let kf = k as f64;
        let beta = kf * kf / (4.0 * kf * kf - 1.0);
        t[[k - 1, k]] = beta.sqrt();
        t[[k, k - 1]] = beta.sqrt();
    }
    let (nodes, vecs) = symmetric_eigensystem(&t)?;
    let weights: Vec<f64> = (0..order).map(|k| 2.0 * vecs[[0, k]] * vecs[[0, k]]).collect();
    Ok((nodes, weights))
}

/// Nearest-neighbour chain equivalent of an environment: on-site frequencies
/// ω_n = α_n, hoppings t_n = √β_{n+1}, head coupling c₀ = √β₀.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCoefficients {
    pub system_coupling: f64,
    pub frequencies: Vec<f64>,
    pub hoppings: Vec<f64>,
}

impl ChainCoefficients {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// CSV with columns `n,omega_n,t_n`; the last row has no hopping.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,omega_n,t_n\n");
        for (n, omega) in self.frequencies.iter().enumerate() {
            let t = self
                .hoppings
                .get(n)
                .map(|&t| fmt_f64(t))
                .unwrap_or_default();
            out.push_str(&format!("{n},{},{t}\n", fmt_f64(*omega)));
        }
        out
    }

    /// The symmetric tridiagonal (Jacobi) matrix of the chain.
    pub fn jacobi_matrix(&self) -> ndarray::Array2<f64> {
        let n = self.len();
        let mut t = ndarray::Array2::zeros((n, n));
        for (k, &w) in self.frequencies.iter().enumerate() {
            t[[k, k]] = w;
        }
        for (k, &h) in self.hoppings.iter().enumerate() {
            t[[k, k + 1]] = h;
            t[[k + 1, k]] = h;
        }
        t
    }
}

/// Finite star of environment modes, each coupled directly to the system.
#[derive(Debug, Clone, PartialEq)]
pub struct StarDiscretization {
    pub mode_frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl StarDiscretization {
    pub fn len(&self) -> usize {
        self.mode_frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mode_frequencies.is_empty()
    }

    /// Σ g_k² — equals ∫J dω for a Gauss discretization.
    pub fn total_weight(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }
}

/// Recurrence coefficients of the measure J(ω)dω by the discrete Stieltjes
/// procedure on an oversampled quadrature (4× the requested length, with a
/// floor of 256 nodes).
pub fn chain_coefficients(j: &SpectralDensity, n_max: usize) -> Result<ChainCoefficients> {
    if n_max == 0 {
        return Err(Error::Config("chain length must be >= 1".into()));
    }
    let (nodes, weights) = j.measure_quadrature((8 * n_max).max(256))?;
    stieltjes(&nodes, &weights, n_max)
}

/// Discrete Stieltjes with normalized polynomials on a point measure.
fn stieltjes(nodes: &[f64], weights: &[f64], n_max: usize) -> Result<ChainCoefficients> {
    let npts = nodes.len();
    if n_max > npts {
        return Err(Error::Config(format!(
            "cannot compute {n_max} coefficients from a {npts}-point measure"
        )));
    }
    let beta0: f64 = weights.iter().sum();
    if !(beta0 > 0.0) || !beta0.is_finite() {
        return Err(Error::InvalidSpectralDensity(format!(
            "measure has non-positive total weight {beta0}"
        )));
    }

    let mut q_prev = vec![0.0; npts];
    let mut q: Vec<f64> = vec![1.0 / beta0.sqrt(); npts];
    let mut alphas = Vec::with_capacity(n_max);
    let mut sqrt_betas = Vec::with_capacity(n_max);
    let mut beta_sqrt_prev = 0.0;

    for n in 0..n_max {
        let alpha: f64 = nodes
            .iter()
            .zip(weights)
            .zip(&q)
            .map(|((&x, &w), &qk)| w * x * qk * qk)
            .sum();
        alphas.push(alpha);
        if n + 1 == n_max {
            break;
        }
        let mut r: Vec<f64> = nodes
            .iter()
            .zip(&q)
            .zip(&q_prev)
            .map(|((&x, &qk), &qp)| (x - alpha) * qk - beta_sqrt_prev * qp)
            .collect();
        let beta: f64 = r.iter().zip(weights).map(|(&rk, &w)| w * rk * rk).sum();
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::RecurrenceBreakdown { index: n + 1, beta });
        }
        let bs = beta.sqrt();
        r.iter_mut().for_each(|x| *x /= bs);
        q_prev = std::mem::replace(&mut q, r);
        beta_sqrt_prev = bs;
        sqrt_betas.push(bs);
    }

    Ok(ChainCoefficients {
        system_coupling: beta0.sqrt(),
        frequencies: alphas,
        hoppings: sqrt_betas,
    })
}

/// Gauss discretization of the measure J(ω)dω: nodes are the quadrature
/// points, couplings g_k the square roots of the weights (Golub-Welsch on the
/// chain's Jacobi matrix).
pub fn discretize(j: &SpectralDensity, m: usize) -> Result<StarDiscretization> {
    if m == 0 {
        return Err(Error::Config("discretization needs m >= 1".into()));
    }
    let chain = chain_coefficients(j, m)?;
    let total = chain.system_coupling * chain.system_coupling;
    let (nodes, vecs) = symmetric_eigensystem(&chain.jacobi_matrix())?;
    let couplings: Vec<f64> = (0..m)
        .map(|k| (total * vecs[[0, k]] * vecs[[0, k]]).sqrt())
        .collect();
    Ok(StarDiscretization {
        mode_frequencies: nodes,
        couplings,
    })
}

/// Exact star-to-chain transformation of a finite star: Lanczos
/// tridiagonalization of diag(ω_k) seeded with g/‖g‖, with full
/// reorthogonalization. Breakdown before M steps returns the shorter exact
/// chain (the remaining modes decouple).
pub fn lanczos_chain(star: &StarDiscretization) -> Result<ChainCoefficients> {
    let m = star.len();
    if m == 0 {
        return Err(Error::Config("star must have at least one mode".into()));
    }
    if star.mode_frequencies.len() != star.couplings.len() {
        return Err(Error::DimensionMismatch(
            "star frequencies and couplings differ in length".into(),
        ));
    }
    let norm = star.total_weight().sqrt();
    if norm < 1e-300 {
        return Err(Error::Numerical(
            "star has zero total coupling; the chain seed is undefined".into(),
        ));
    }

    let omega = &star.mode_frequencies;
    let mut v: Vec<f64> = star.couplings.iter().map(|g| g / norm).collect();
    let mut v_prev = vec![0.0; m];
    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::new();
    let mut beta_prev = 0.0;

    for _ in 0..m {
        // w = A v − β_{j−1} v_{j−1}, with A = diag(ω).
        let mut w: Vec<f64> = omega
            .iter()
            .zip(&v)
            .zip(&v_prev)
            .map(|((&o, &vk), &vp)| o * vk - beta_prev * vp)
            .collect();
        let alpha: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        for (wk, vk) in w.iter_mut().zip(&v) {
            *wk -= alpha * vk;
        }
        // Full reorthogonalization against every Lanczos vector so far.
        for prev in &basis {
            let proj: f64 = w.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (wk, pk) in w.iter_mut().zip(prev) {
                *wk -= proj * pk;
            }
        }
        let beta: f64 = w.iter().map(|x| x * x).sum::<f64>();
        let bs = beta.sqrt();
        if bs < 1e-13 * omega.iter().fold(1.0f64, |acc, x| acc.max(x.abs())) {
            break; // invariant subspace: exact shorter chain
        }
        betas.push(bs);
        w.iter_mut().for_each(|x| *x /= bs);
        v_prev = std::mem::replace(&mut v, w);
        basis.push(v.clone());
        beta_prev = bs;
    }
    betas.truncate(alphas.len().saturating_sub(1));

    Ok(ChainCoefficients {
        system_coupling: norm,
        frequencies: alphas,
        hoppings: betas,
    })
}

/// Two-level system H = (gap/2)σ_z + tunneling·σ_x.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwoLevelSystem {
    pub gap: f64,
    pub tunneling: f64,
}

#[derive(Debug, Clone)]
pub struct PropagationOptions {
    /// Cap on the full system ⊗ bath dimension.
    pub dimension_cap: usize,
    /// Largest tolerable population on the highest Fock level.
    pub leakage_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dimension_cap: 4096,
            leakage_tol: 1e-6,
        }
    }
}

/// Reduced system trajectories of the star and chain pictures plus their
/// maximum trace distance.
#[derive(Debug)]
pub struct StarChainComparison {
    pub times: Vec<f64>,
    pub star_reduced: Vec<CMat>,
    pub chain_reduced: Vec<CMat>,
    pub max_trace_distance: f64,
    pub star_leakage: f64,
    pub chain_leakage: f64,
}

/// Propagate system ⊗ environment exactly in both pictures from
/// |system: up⟩ ⊗ |vacuum⟩ and compare the reduced system states.
///
/// The system couples through σ_z ⊗ Σ g_k (a_k + a_k†) in the star picture
/// and σ_z ⊗ c₀ (b₀ + b₀†) in the chain picture. Each picture is advanced by
/// the scaled-and-squared matrix exponential of its full Hamiltonian;
/// populations reaching the top Fock level beyond `leakage_tol` abort the
/// comparison (the truncation would no longer be faithful).
pub fn propagate_star_vs_chain(
    system: &TwoLevelSystem,
    star: &StarDiscretization,
    n_fock: usize,
    t_grid: &[f64],
) -> Result<StarChainComparison> {
    propagate_star_vs_chain_with(system, star, n_fock, t_grid, &PropagationOptions::default())
}

pub fn propagate_star_vs_chain_with(
    system: &TwoLevelSystem,
    star: &StarDiscretization,
    n_fock: usize,
    t_grid: &[f64],
    opts: &PropagationOptions,
) -> Result<StarChainComparison> {
    if n_fock < 2 {
        return Err(Error::Config("need at least two Fock levels".into()));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("time grid must be nonempty and increasing".into()));
    }
    let m = star.len();
    let bath_dim = n_fock.checked_pow(m as u32).ok_or(Error::DimensionCap {
        dim: usize::MAX,
        cap: opts.dimension_cap,
    })?;
    if 2 * bath_dim > opts.dimension_cap {
        return Err(Error::DimensionCap {
            dim: 2 * bath_dim,
            cap: opts.dimension_cap,
        });
    }

    let zero_coupling = star.total_weight() == 0.0;
    let chain = if zero_coupling {
        ChainCoefficients {
            system_coupling: 0.0,
            frequencies: star.mode_frequencies.clone(),
            hoppings: vec![0.0; m.saturating_sub(1)],
        }
    } else {
        lanczos_chain(star)?
    };

    let h_star = star_hamiltonian(system, star, n_fock);
    let h_chain = chain_hamiltonian(system, &chain, n_fock);

    let star_run = propagate(&h_star, n_fock, star.len(), t_grid)?;
    let chain_run = propagate(&h_chain, n_fock, chain.len(), t_grid)?;

    for (label, leak) in [("star", star_run.leakage), ("chain", chain_run.leakage)] {
        if leak > opts.leakage_tol {
            let _ = label;
            return Err(Error::FockLeakage {
                leakage: leak,
                tolerance: opts.leakage_tol,
            });
        }
    }

    let mut max_dist = 0.0f64;
    for (a, b) in star_run.reduced.iter().zip(&chain_run.reduced) {
        max_dist = max_dist.max(trace_distance_mats(a, b)?);
    }

    Ok(StarChainComparison {
        times: t_grid.to_vec(),
        star_reduced: star_run.reduced,
        chain_reduced: chain_run.reduced,
        max_trace_distance: max_dist,
        star_leakage: star_run.leakage,
        chain_leakage: chain_run.leakage,
    })
}

fn annihilation(n_fock: usize) -> CMat {
    let mut a = CMat::zeros((n_fock, n_fock));
    for k in 1..n_fock {
        a[[k - 1, k]] = c((k as f64).sqrt());
    }
    a
}

/// Embed a single-mode operator at position `mode` of an M-mode register.
fn embed(op: &CMat, mode: usize, n_modes: usize, n_fock: usize) -> CMat {
    let mut out = eye(n_fock.pow(mode as u32));
    out = kron(&out, op);
    let right = eye(n_fock.pow((n_modes - mode - 1) as u32));
    kron(&out, &right)
}

fn system_hamiltonian(system: &TwoLevelSystem) -> CMat {
    let [_, sx, _, sz] = pauli_matrices();
    sz.mapv(|z| z * c(0.5 * system.gap)) + sx.mapv(|z| z * c(system.tunneling))
}

fn star_hamiltonian(system: &TwoLevelSystem, star: &StarDiscretization, n_fock: usize) -> CMat {
    let m = star.len();
    let bath_dim = n_fock.pow(m as u32);
    let a = annihilation(n_fock);
    let num = dagger(&a).dot(&a);
    let x = &a + &dagger(&a);

    let mut h_bath = CMat::zeros((bath_dim, bath_dim));
    let mut coupling = CMat::zeros((bath_dim, bath_dim));
    for k in 0..m {
        h_bath = h_bath + embed(&num, k, m, n_fock).mapv(|z| z * c(star.mode_frequencies[k]));
        coupling = coupling + embed(&x, k, m, n_fock).mapv(|z| z * c(star.couplings[k]));
    }
    let [_, _, _, sz] = pauli_matrices();
    kron(&system_hamiltonian(system), &eye(bath_dim)) + kron(&eye(2), &h_bath)
        + kron(&sz, &coupling)
}

fn chain_hamiltonian(system: &TwoLevelSystem, chain: &ChainCoefficients, n_fock: usize) -> CMat {
    let m = chain.len();
    let bath_dim = n_fock.pow(m as u32);
    let a = annihilation(n_fock);
    let ad = dagger(&a);
    let num = ad.dot(&a);
    let x = &a + &ad;

    let mut h_bath = CMat::zeros((bath_dim, bath_dim));
    for n in 0..m {
        h_bath = h_bath + embed(&num, n, m, n_fock).mapv(|z| z * c(chain.frequencies[n]));
    }
    for (n, &t) in chain.hoppings.iter().enumerate() {
        let hop = embed(&ad, n, m, n_fock).dot(&embed(&a, n + 1, m, n_fock));
        let hop = &hop + &dagger(&hop);
        h_bath = h_bath + hop.mapv(|z| z * c(t));
    }
    let coupling = embed(&x, 0, m, n_fock).mapv(|z| z * c(chain.system_coupling));
    let [_, _, _, sz] = pauli_matrices();
    kron(&system_hamiltonian(system), &eye(bath_dim)) + kron(&eye(2), &h_bath)
        + kron(&sz, &coupling)
}

struct PropagationRun {
    reduced: Vec<CMat>,
    leakage: f64,
}

/// Evolve |up⟩ ⊗ |vac⟩ under H on the given grid; one matrix exponential per
/// distinct step size (uniform grids therefore pay for exactly one).
fn propagate(h: &CMat, n_fock: usize, n_modes: usize, t_grid: &[f64]) -> Result<PropagationRun> {
    let dim = h.nrows();
    let bath_dim = n_fock.pow(n_modes as u32);
    let mut psi = CVec::zeros(dim);
    psi[0] = c(1.0); // |up⟩ ⊗ |vacuum⟩

    // Bath basis states with any mode at the top Fock level.
    let top_mask: Vec<bool> = (0..bath_dim)
        .map(|idx| {
            let mut rest = idx;
            let mut top = false;
            for _ in 0..n_modes {
                if rest % n_fock == n_fock - 1 {
                    top = true;
                }
                rest /= n_fock;
            }
            top
        })
        .collect();

    let minus_i = num_complex::Complex64::new(0.0, -1.0);
    let mut cache: HashMap<u64, CMat> = HashMap::new();
    let mut reduced = Vec::with_capacity(t_grid.len());
    let mut leakage = 0.0f64;

    let mut record = |psi: &CVec, reduced: &mut Vec<CMat>, leakage: &mut f64| -> Result<()> {
        let mut rho_full = CMat::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                rho_full[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        reduced.push(partial_trace_second(&rho_full, (2, bath_dim))?);
        let mut leak = 0.0;
        for s in 0..2 {
            for (b, &masked) in top_mask.iter().enumerate() {
                if masked {
                    leak += psi[s * bath_dim + b].norm_sqr();
                }
            }
        }
        *leakage = leakage.max(leak);
        Ok(())
    };

    let mut t_prev = t_grid[0];
    if t_prev != 0.0 {
        let u = expm(&h.mapv(|z| z * minus_i * c(t_prev)))?;
        psi = u.dot(&psi);
    }
    record(&psi, &mut reduced, &mut leakage)?;
    for &t in &t_grid[1..] {
        let dt = t - t_prev;
        let key = dt.to_bits();
        if !cache.contains_key(&key) {
            let u = expm(&h.mapv(|z| z * minus_i * c(dt)))?;
            cache.insert(key, u);
        }
        psi = cache[&key].dot(&psi);
        t_prev = t;
        record(&psi, &mut reduced, &mut leakage)?;
    }

    Ok(PropagationRun { reduced, leakage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn flat_unit() -> SpectralDensity {
        SpectralDensity::Flat {
            value: 1.0,
            support: (0.0, 1.0),
        }
    }

    /// Shifted-Legendre closed form for the flat density on [0, 1]:
    /// ω_n = 1/2, t_n = (n+1) / (2 √(4(n+1)² − 1)).
    fn legendre_hopping(n: usize) -> f64 {
        let k = (n + 1) as f64;
        0.5 * k / (4.0 * k * k - 1.0).sqrt()
    }

    #[test]
    fn flat_density_matches_shifted_legendre() {
        let chain = chain_coefficients(&flat_unit(), 21).unwrap();
        assert!((chain.system_coupling - 1.0).abs() < 1e-12);
        for (n, &w) in chain.frequencies.iter().enumerate() {
            assert!((w - 0.5).abs() < 1e-10, "omega_{n} = {w}");
        }
        for (n, &t) in chain.hoppings.iter().enumerate() {
            let expected = legendre_hopping(n);
            assert!(
                (t - expected).abs() < 1e-10,
                "t_{n} = {t}, expected {expected}"
            );
        }
    }

    #[test]
    fn ohmic_coefficients_self_converge() {
        // Default quadrature against a 10×-oversampled reference.
        let j = SpectralDensity::PowerLaw {
            exponent: 1.0,
            cutoff: 1.0,
            prefactor: 1.0,
        };
        let chain = chain_coefficients(&j, 21).unwrap();
        let (nodes, weights) = j.measure_quadrature(8 * 21 * 10).unwrap();
        let reference = stieltjes(&nodes, &weights, 21).unwrap();
        for n in 0..21 {
            assert!(
                (chain.frequencies[n] - reference.frequencies[n]).abs() < 1e-10,
                "alpha_{n}"
            );
        }
        for n in 0..20 {
            assert!(
                (chain.hoppings[n] - reference.hoppings[n]).abs() < 1e-10,
                "beta_{n}"
            );
        }
        // c₀² = ∫ ω dω = 1/2 exactly.
        assert!((chain.system_coupling.powi(2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chain_moments_match_quadrature_moments() {
        // First 2n moments from the Jacobi matrix, m_k = β₀ (e₀ᵀ Tᵏ e₀),
        // against direct quadrature sums.
        let j = SpectralDensity::PowerLaw {
            exponent: 2.0,
            cutoff: 1.5,
            prefactor: 0.7,
        };
        let n_max = 10;
        let chain = chain_coefficients(&j, n_max).unwrap();
        let t = chain.jacobi_matrix().mapv(c);
        let beta0 = chain.system_coupling * chain.system_coupling;
        let (nodes, weights) = j.measure_quadrature(2048).unwrap();

        let mut power = eye(n_max);
        for k in 0..2 * n_max {
            let direct: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * x.powi(k as i32))
                .sum();
            let recursive = beta0 * power[[0, 0]].re;
            assert!(
                (recursive - direct).abs() <= 1e-8 * direct.abs().max(1e-30),
                "moment {k}: {recursive} vs {direct}"
            );
            power = power.dot(&t);
        }
    }

    #[test]
    fn one_point_rule_sits_at_measure_mean() {
        let star = discretize(&flat_unit(), 1).unwrap();
        assert!((star.mode_frequencies[0] - 0.5).abs() < 1e-12);
        assert!((star.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_rule_matches_gauss_legendre() {
        let star = discretize(&flat_unit(), 2).unwrap();
        let offset = 1.0 / (2.0 * 3.0f64.sqrt());
        assert!((star.mode_frequencies[0] - (0.5 - offset)).abs() < 1e-12);
        assert!((star.mode_frequencies[1] - (0.5 + offset)).abs() < 1e-12);
    }

    #[test]
    fn discretization_preserves_total_weight() {
        for m in [1usize, 3, 7, 16] {
            let j = SpectralDensity::PowerLaw {
                exponent: 1.0,
                cutoff: 2.0,
                prefactor: 0.3,
            };
            let star = discretize(&j, m).unwrap();
            let expected = 0.3 * 2.0f64.powi(2) / 2.0;
            assert!(
                (star.total_weight() - expected).abs() < 1e-10,
                "m = {m}: {}",
                star.total_weight()
            );
        }
    }

    #[test]
    fn lanczos_single_mode_is_identity() {
        let star = StarDiscretization {
            mode_frequencies: vec![0.8],
            couplings: vec![0.25],
        };
        let chain = lanczos_chain(&star).unwrap();
        assert_eq!(chain.len(), 1);
        assert!((chain.frequencies[0] - 0.8).abs() < 1e-15);
        assert!((chain.system_coupling - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lanczos_matches_stieltjes_coefficients() {
        // A 20-mode Gauss star reproduces the continuous measure's first
        // coefficients; Lanczos must agree with Stieltjes there.
        let star = discretize(&flat_unit(), 20).unwrap();
        let via_lanczos = lanczos_chain(&star).unwrap();
        let via_stieltjes = chain_coefficients(&flat_unit(), 10).unwrap();
        for n in 0..10 {
            assert!(
                (via_lanczos.frequencies[n] - via_stieltjes.frequencies[n]).abs() < 1e-8,
                "alpha_{n}"
            );
        }
        for n in 0..9 {
            assert!(
                (via_lanczos.hoppings[n] - via_stieltjes.hoppings[n]).abs() < 1e-8,
                "t_{n}"
            );
        }
    }

    #[test]
    fn lanczos_chain_preserves_star_spectrum() {
        let j = SpectralDensity::PowerLaw {
            exponent: 1.0,
            cutoff: 1.0,
            prefactor: 2.0,
        };
        let star = discretize(&j, 12).unwrap();
        let chain = lanczos_chain(&star).unwrap();
        assert_eq!(chain.len(), 12);
        let (eigs, _) = symmetric_eigensystem(&chain.jacobi_matrix()).unwrap();
        let mut sorted = star.mode_frequencies.clone();
        sorted.sort_by(f64::total_cmp);
        for (a, b) in eigs.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn stieltjes_cost_scales_linearly_in_chain_length() {
        // Fixed quadrature, doubled n_max: time should roughly double, far
        // from quadratic. Loose ×2 band around the linear prediction.
        let j = flat_unit();
        let (nodes, weights) = j.measure_quadrature(4096).unwrap();
        let time = |n_max: usize| {
            let mut best = f64::INFINITY;
            for _ in 0..3 {
                let start = std::time::Instant::now();
                let chain = stieltjes(&nodes, &weights, n_max).unwrap();
                assert_eq!(chain.len(), n_max);
                best = best.min(start.elapsed().as_secs_f64());
            }
            best
        };
        let t100 = time(100);
        let t200 = time(200);
        let ratio = t200 / t100;
        assert!(ratio < 4.0, "doubling n_max scaled time by {ratio:.2}");
    }

    #[test]
    fn single_mode_star_and_chain_are_identical() {
        let system = TwoLevelSystem {
            gap: 1.0,
            tunneling: 0.25,
        };
        let star = StarDiscretization {
            mode_frequencies: vec![1.2],
            couplings: vec![0.05],
        };
        let grid: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
        let cmp = propagate_star_vs_chain(&system, &star, 6, &grid).unwrap();
        assert!(
            cmp.max_trace_distance < 1e-13,
            "distance {:.3e}",
            cmp.max_trace_distance
        );
    }

    #[test]
    fn zero_coupling_evolves_system_unitarily() {
        let system = TwoLevelSystem {
            gap: 0.9,
            tunneling: 0.4,
        };
        let star = StarDiscretization {
            mode_frequencies: vec![1.0, 2.0],
            couplings: vec![0.0, 0.0],
        };
        let grid: Vec<f64> = (0..=20).map(|k| 0.3 * k as f64).collect();
        let cmp = propagate_star_vs_chain(&system, &star, 3, &grid).unwrap();
        assert!(cmp.max_trace_distance < 1e-13);
        // Reduced state matches the bare two-level evolution.
        let h_sys = system_hamiltonian(&system);
        for (k, &t) in cmp.times.iter().enumerate() {
            let u = expm(&h_sys.mapv(|z| z * num_complex::Complex64::new(0.0, -t))).unwrap();
            let mut rho0 = CMat::zeros((2, 2));
            rho0[[0, 0]] = c(1.0);
            let expected = u.dot(&rho0).dot(&dagger(&u));
            assert!(max_abs_diff(&cmp.star_reduced[k], &expected) < 1e-12);
        }
    }

    #[test]
    fn four_mode_star_matches_chain_dynamics() {
        let system = TwoLevelSystem {
            gap: 1.0,
            tunneling: 0.3,
        };
        let j = SpectralDensity::Flat {
            value: 1e-3,
            support: (0.0, 1.0),
        };
        let star = discretize(&j, 4).unwrap();
        let grid: Vec<f64> = (0..=50).map(|k| 0.2 * k as f64).collect();
        let cmp = propagate_star_vs_chain(&system, &star, 4, &grid).unwrap();
        assert!(
            cmp.max_trace_distance < 1e-8,
            "distance {:.3e}",
            cmp.max_trace_distance
        );
        assert!(cmp.star_leakage < 1e-6);
        assert!(cmp.chain_leakage < 1e-6);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let system = TwoLevelSystem {
            gap: 1.0,
            tunneling: 0.0,
        };
        let star = discretize(&flat_unit(), 8).unwrap();
        let err = propagate_star_vs_chain(&system, &star, 4, &[0.0, 1.0]);
        assert!(matches!(err, Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn tabulated_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("density.csv");
        std::fs::write(&path, "omega,J\n0.0,0.0\n0.5,1.0\n1.0,0.0\n").unwrap();
        let j = SpectralDensity::from_csv(&path).unwrap();
        // Triangle of height 1 on [0,1]: weight 1/2.
        assert!((j.total_weight().unwrap() - 0.5).abs() < 1e-12);
        let chain = chain_coefficients(&j, 5).unwrap();
        assert!((chain.system_coupling.powi(2) - 0.5).abs() < 1e-12);
        // Symmetric measure: every alpha sits at the centre.
        for &w in &chain.frequencies {
            assert!((w - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_densities_are_rejected() {
        assert!(chain_coefficients(
            &SpectralDensity::PowerLaw {
                exponent: -1.5,
                cutoff: 1.0,
                prefactor: 1.0
            },
            4
        )
        .is_err());
        assert!(chain_coefficients(
            &SpectralDensity::Tabulated {
                omegas: vec![0.0, 1.0],
                values: vec![0.0, 0.0]
            },
            4
        )
        .is_err());
    }
}
