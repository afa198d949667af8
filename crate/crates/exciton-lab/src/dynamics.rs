//! Lindblad master equation for a network extended by ground and sink levels.
//!
//! The Hilbert space has N+2 levels: |0⟩ is the shared ground state, 1..N are
//! the single-excitation site states, and |S⟩ = N+1 is the sink. Noise enters
//! through three families of jump operators,
//!
//! * dephasing |j⟩⟨j| at rate γ_j — leaves site populations untouched and
//!   decays the coherence between sites j and k as e^{−(γ_j+γ_k)t/2},
//! * dissipation |0⟩⟨j| at rate κ_j — excitation loss to the ground state,
//! * the sink jump |S⟩⟨s| at rate Γ — one-way drain from the wired site,
//!
//! each contributing a dissipator D[A]ρ = AρA† − ½{A†A, ρ} scaled by its
//! rate. Realizing the sink as an explicit basis level keeps the total trace
//! at one, so the transfer efficiency is the plain population of |S⟩.

use ndarray::Array2;
use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{c, dagger, eye, hermitian_eigensystem, kron, CMat};
use crate::network::ExcitonNetwork;
use crate::ode::{integrate_dense, OdeOptions};
use crate::quantum::{unvec_col, vec_col, DensityMatrix, Superoperator};

/// A network's Lindblad generator on the (N+2)-level space.
#[derive(Debug)]
pub struct LindbladModel {
    n_sites: usize,
    hilbert_dim: usize,
    hamiltonian: CMat,
    jump_operators: Vec<(CMat, f64)>,
    // Cached pieces of the right-hand side Gρ + ρG† + Σ BρB†.
    effective: CMat,
    jumps_scaled: Vec<CMat>,
    generator: OnceLock<Superoperator>,
    initial_site: usize,
    sink_rate: f64,
    min_nonzero_rate: f64,
}

/// Build the Lindblad model of a network: coherent site Hamiltonian plus
/// dephasing, dissipation, and sink jump operators as typed on
/// [`ExcitonNetwork`].
pub fn assemble_generator(net: &ExcitonNetwork) -> LindbladModel {
    let n = net.n_sites();
    let dim = n + 2;
    let h_sites = net.hamiltonian_angular();
    let mut h = CMat::zeros((dim, dim));
    for i in 0..n {
        for j in 0..n {
            h[[i + 1, j + 1]] = c(h_sites[[i, j]]);
        }
    }

    let mut jumps: Vec<(CMat, f64)> = Vec::new();
    for (j, &gamma) in net.dephasing_rates().iter().enumerate() {
        if gamma > 0.0 {
            let mut op = CMat::zeros((dim, dim));
            op[[j + 1, j + 1]] = c(1.0);
            jumps.push((op, gamma));
        }
    }
    for (j, &kappa) in net.dissipation_rates().iter().enumerate() {
        if kappa > 0.0 {
            let mut op = CMat::zeros((dim, dim));
            op[[0, j + 1]] = c(1.0);
            jumps.push((op, kappa));
        }
    }
    if net.sink_rate() > 0.0 {
        let mut op = CMat::zeros((dim, dim));
        op[[dim - 1, net.sink_site()]] = c(1.0);
        jumps.push((op, net.sink_rate()));
    }

    LindbladModel::new(n, h, jumps, net.initial_site(), net.sink_rate())
}

impl LindbladModel {
    fn new(
        n_sites: usize,
        hamiltonian: CMat,
        jump_operators: Vec<(CMat, f64)>,
        initial_site: usize,
        sink_rate: f64,
    ) -> Self {
        let dim = hamiltonian.nrows();
        let minus_i = Complex64::new(0.0, -1.0);
        let mut effective = hamiltonian.mapv(|z| z * minus_i);
        let mut jumps_scaled = Vec::with_capacity(jump_operators.len());
        let mut min_rate = f64::INFINITY;
        for (op, rate) in &jump_operators {
            let b = op.mapv(|z| z * c(rate.sqrt()));
            let btb = dagger(&b).dot(&b);
            effective = effective - btb.mapv(|z| z * c(0.5));
            jumps_scaled.push(b);
            if *rate > 0.0 {
                min_rate = min_rate.min(*rate);
            }
        }
        Self {
            n_sites,
            hilbert_dim: dim,
            hamiltonian,
            jump_operators,
            effective,
            jumps_scaled,
            generator: OnceLock::new(),
            initial_site,
            sink_rate,
            min_nonzero_rate: min_rate,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Full Hilbert dimension N+2 (ground + sites + sink).
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    pub fn jump_operators(&self) -> &[(CMat, f64)] {
        &self.jump_operators
    }

    pub fn sink_rate(&self) -> f64 {
        self.sink_rate
    }

    /// The initial excitation |initial_site⟩⟨initial_site| as a density
    /// matrix on the extended space.
    pub fn initial_density(&self) -> DensityMatrix {
        DensityMatrix::basis_state(self.hilbert_dim, self.initial_site)
            .expect("initial site index validated by the network")
    }

    /// Right-hand side of the master equation.
    pub fn apply_rhs(&self, rho: &CMat) -> CMat {
        let g_rho = self.effective.dot(rho);
        let mut out = &g_rho + &dagger(&g_rho);
        for b in &self.jumps_scaled {
            out = out + b.dot(rho).dot(&dagger(b));
        }
        out
    }

    /// The generator as an explicit superoperator matrix (cached).
    pub fn generator(&self) -> &Superoperator {
        self.generator.get_or_init(|| {
            let d = self.hilbert_dim;
            let id = eye(d);
            let g = &self.effective;
            let mut mat = kron(&id, g) + kron(&g.mapv(|z| z.conj()), &id);
            for b in &self.jumps_scaled {
                mat = mat + kron(&b.mapv(|z| z.conj()), b);
            }
            Superoperator::new(d, mat).expect("generator dimensions are consistent")
        })
    }

    /// Largest entry of vec(I)†·L — zero for a trace-preserving generator
    /// (the adjoint maps the identity to zero, so e^{Lt} fixes the trace).
    pub fn trace_defect(&self) -> f64 {
        let d = self.hilbert_dim;
        let l = self.generator().mat();
        let id_vec = vec_col(&eye(d));
        let mut defect = 0.0f64;
        for col in 0..d * d {
            let mut s = Complex64::default();
            for row in 0..d * d {
                s += id_vec[row].conj() * l[[row, col]];
            }
            defect = defect.max(s.norm());
        }
        defect
    }
}

/// Populations, coherence, and conservation diagnostics on a time grid.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    /// Grid times in ps.
    pub times: Vec<f64>,
    /// N×T site populations.
    pub site_populations: Array2<f64>,
    /// Sink population p_sink(t); non-decreasing.
    pub sink_population: Vec<f64>,
    pub ground_population: Vec<f64>,
    /// Σ_{j≠k} |ρ_jk| over the site block.
    pub coherence_l1: Vec<f64>,
    /// max_t |tr ρ(t) − 1|.
    pub trace_error_max: f64,
    /// min over grid times of the smallest eigenvalue of ρ(t).
    pub min_eigenvalue: f64,
}

impl TrajectoryResult {
    /// Transfer efficiency: the sink population at the end of the grid.
    pub fn efficiency(&self) -> f64 {
        *self
            .sink_population
            .last()
            .expect("trajectory grids are nonempty")
    }

    /// CSV export with columns `time_ps, p_site_1..N, p_sink, p_ground,
    /// coherence_l1`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        use crate::jsonio::fmt_f64;
        let n = self.site_populations.nrows();
        let mut out = String::from("time_ps");
        for j in 1..=n {
            out.push_str(&format!(",p_site_{j}"));
        }
        out.push_str(",p_sink,p_ground,coherence_l1\n");
        for (k, &t) in self.times.iter().enumerate() {
            out.push_str(&fmt_f64(t));
            for j in 0..n {
                out.push(',');
                out.push_str(&fmt_f64(self.site_populations[[j, k]]));
            }
            out.push(',');
            out.push_str(&fmt_f64(self.sink_population[k]));
            out.push(',');
            out.push_str(&fmt_f64(self.ground_population[k]));
            out.push(',');
            out.push_str(&fmt_f64(self.coherence_l1[k]));
            out.push('\n');
        }
        out
    }
}

const TRACE_TOL: f64 = 1e-8;
const MONOTONE_SLACK: f64 = 1e-10;

/// Integrate the master equation and sample populations on `t_grid`.
///
/// The grid must increase from 0. Per-step local error is held at 1e-10
/// (see [`evolve_with_options`] to change it); the returned trajectory is
/// checked for unit trace and a non-decreasing sink population.
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<TrajectoryResult> {
    evolve_with_options(model, rho0, t_grid, &OdeOptions::default())
}

pub fn evolve_with_options(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<TrajectoryResult> {
    if rho0.dim() != model.hilbert_dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state dimension {} does not match model dimension {}",
            rho0.dim(),
            model.hilbert_dim
        )));
    }
    if t_grid.first() != Some(&0.0) {
        return Err(Error::Integration {
            time: t_grid.first().copied().unwrap_or(f64::NAN),
            reason: "time grid must start at 0".into(),
        });
    }

    let n = model.n_sites;
    let nt = t_grid.len();
    let mut site_populations = Array2::zeros((n, nt));
    let mut sink_population = vec![0.0; nt];
    let mut ground_population = vec![0.0; nt];
    let mut coherence_l1 = vec![0.0; nt];
    let mut trace_error_max = 0.0f64;
    let mut min_eigenvalue = f64::INFINITY;

    integrate_dense(
        |rho| model.apply_rhs(rho),
        rho0.mat(),
        t_grid,
        opts,
        |k, _t, rho| {
            for j in 0..n {
                site_populations[[j, k]] = rho[[j + 1, j + 1]].re;
            }
            ground_population[k] = rho[[0, 0]].re;
            sink_population[k] = rho[[n + 1, n + 1]].re;
            let mut l1 = 0.0;
            for a in 1..=n {
                for b in 1..=n {
                    if a != b {
                        l1 += rho[[a, b]].norm();
                    }
                }
            }
            coherence_l1[k] = l1;
            let trace: Complex64 = rho.diag().iter().sum();
            trace_error_max = trace_error_max.max((trace.re - 1.0).abs().max(trace.im.abs()));
            if let Ok((eigs, _)) = hermitian_eigensystem(&symmetrized(rho)) {
                min_eigenvalue = min_eigenvalue.min(eigs[0]);
            }
        },
    )?;

    if trace_error_max > TRACE_TOL {
        return Err(Error::Numerical(format!(
            "trace deviated by {trace_error_max:.3e} during evolution"
        )));
    }
    for w in sink_population.windows(2) {
        if w[1] < w[0] - MONOTONE_SLACK {
            return Err(Error::Numerical(format!(
                "sink population decreased from {} to {}",
                w[0], w[1]
            )));
        }
    }

    Ok(TrajectoryResult {
        times: t_grid.to_vec(),
        site_populations,
        sink_population,
        ground_population,
        coherence_l1,
        trace_error_max,
        min_eigenvalue,
    })
}

/// Exact Hermitization to protect the eigensolver from integrator round-off.
fn symmetrized(rho: &CMat) -> CMat {
    (rho + &dagger(rho)).mapv(|z| z * c(0.5))
}

/// Return the state matrices at the grid times alongside the trajectory.
pub fn evolve_states(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<CMat>> {
    let mut states = vec![CMat::zeros((0, 0)); t_grid.len()];
    integrate_dense(
        |rho| model.apply_rhs(rho),
        rho0.mat(),
        t_grid,
        opts,
        |k, _t, rho| {
            states[k] = rho.clone();
        },
    )?;
    Ok(states)
}

/// Long-time sink population from the stationary structure of the generator.
///
/// The conserved functional A∞ with tr(A∞ ρ₀) = p_sink(∞) is the oblique
/// projection of the sink projector onto ker(L†) along range(L†); it is
/// computed from the null spaces of LL† and L†L and cross-validated against
/// long-time integration to 1e-4. If the kernel geometry degenerates the
/// integration value alone is returned.
pub fn asymptotic_sink_population(model: &LindbladModel, rho0: &DensityMatrix) -> Result<f64> {
    if model.sink_rate <= 0.0 {
        return Err(Error::InvalidNetwork(
            "asymptotic sink population needs a positive sink rate".into(),
        ));
    }
    let integrated = integrate_to_plateau(model, rho0)?;
    match nullspace_sink_functional(model, rho0) {
        Some(projected) => {
            if (projected - integrated).abs() <= 1e-4 {
                Ok(projected)
            } else {
                Err(Error::Numerical(format!(
                    "stationary projection {projected:.6} and long-time integration \
                     {integrated:.6} disagree beyond 1e-4"
                )))
            }
        }
        None => Ok(integrated),
    }
}

fn nullspace_sink_functional(model: &LindbladModel, rho0: &DensityMatrix) -> Option<f64> {
    let d = model.hilbert_dim;
    let l = model.generator().mat();
    let l_dag = dagger(l);
    let m1 = l.dot(&l_dag); // kernel = ker(L†)
    let m2 = l_dag.dot(l); // kernel = ker(L)
    let (e1, v1) = hermitian_eigensystem(&m1).ok()?;
    let (e2, v2) = hermitian_eigensystem(&m2).ok()?;
    let scale = e1.last().copied()?.max(e2.last().copied()?).max(1e-300);
    let tol = scale * 1e-20;

    let k1: Vec<usize> = (0..e1.len()).filter(|&i| e1[i] < tol).collect();
    let k2: Vec<usize> = (0..e2.len()).filter(|&i| e2[i] < tol).collect();
    if k1.is_empty() || k1.len() != k2.len() {
        return None;
    }
    let k = k1.len();

    let mut sink_proj = CMat::zeros((d, d));
    sink_proj[[d - 1, d - 1]] = c(1.0);
    let p = vec_col(&sink_proj);

    // Solve (B† K) c = B† p, where K spans ker(L†) and B spans ker(L).
    let mut system = CMat::zeros((k, k));
    let mut rhs = CMat::zeros((k, 1));
    for (row, &bi) in k2.iter().enumerate() {
        for (col, &ki) in k1.iter().enumerate() {
            let mut s = Complex64::default();
            for t in 0..d * d {
                s += v2[[t, bi]].conj() * v1[[t, ki]];
            }
            system[[row, col]] = s;
        }
        let mut s = Complex64::default();
        for t in 0..d * d {
            s += v2[[t, bi]].conj() * p[t];
        }
        rhs[[row, 0]] = s;
    }
    let coeffs = crate::linalg::solve(&system, &rhs).ok()?;

    let mut a_inf = crate::linalg::CVec::zeros(d * d);
    for (col, &ki) in k1.iter().enumerate() {
        for t in 0..d * d {
            a_inf[t] += coeffs[[col, 0]] * v1[[t, ki]];
        }
    }
    // The functional must be Hermitian; symmetrize and sanity-check.
    let a_mat = unvec_col(&a_inf, d);
    let a_h = symmetrized(&a_mat);
    if crate::linalg::max_abs_diff(&a_mat, &a_h) > 1e-6 {
        return None;
    }
    let value: Complex64 = a_h
        .iter()
        .zip(rho0.mat().t().iter())
        .map(|(a, r)| a * r)
        .sum(); // tr(Aρ) = Σ_ij A_ij ρ_ji
    Some(value.re)
}

/// Integrate in doubling windows until p_sink plateaus.
fn integrate_to_plateau(model: &LindbladModel, rho0: &DensityMatrix) -> Result<f64> {
    let window = 50.0 / model.min_nonzero_rate;
    let opts = OdeOptions::default();
    let mut state = rho0.mat().clone();
    let mut p_prev = f64::NAN;
    for _chunk in 0..24 {
        let mut last = CMat::zeros((0, 0));
        integrate_dense(
            |rho| model.apply_rhs(rho),
            &state,
            &[0.0, window],
            &opts,
            |k, _t, rho| {
                if k == 1 {
                    last = rho.clone();
                }
            },
        )?;
        state = last;
        let d = model.hilbert_dim;
        let p = state[[d - 1, d - 1]].re;
        if !p_prev.is_nan() && (p - p_prev).abs() < 2.0e-5 {
            return Ok(p);
        }
        p_prev = p;
    }
    Err(Error::Numerical(
        "sink population did not plateau within the integration cap".into(),
    ))
}
