//! Exact closed-system evolution of a system coupled to an environment.
//!
//! The total Hamiltonian is diagonalized once per [`Evolver`]; every sampled
//! time afterwards costs only matrix-vector products. A mixed environment is
//! expanded into its eigen-ensemble so that the evolved state is an ensemble of
//! pure trajectories, from which reduced states follow by reshaping.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qcore::{
    commutator, embed_in_dims, ensure_dim, ensure_hermitian, identity, kron, max_abs, partial_trace_operator, pauli_x,
    pauli_z, purity, ComplexMatrix, ComplexVector, DensityMatrix, HermitianSpectrum, Ket, SpaceLayout, Subsystem,
    Tolerances, C64, I,
};

/// One product term `s ⊗ e` of the interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTerm {
    /// Dimensionless system factor.
    pub system: ComplexMatrix,
    /// Environment factor carrying the coupling constant.
    pub environment: ComplexMatrix,
}

impl InteractionTerm {
    pub fn new(system: ComplexMatrix, environment: ComplexMatrix) -> Self {
        Self { system, environment }
    }
}

/// `H = H_S ⊗ I + I ⊗ H_E + Σ_j s_j ⊗ e_j` on a layout whose system factors
/// come first.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedModel {
    hs: ComplexMatrix,
    he: ComplexMatrix,
    terms: Vec<InteractionTerm>,
    layout: SpaceLayout,
}

impl FactorizedModel {
    pub fn new(hs: ComplexMatrix, he: ComplexMatrix, terms: Vec<InteractionTerm>, layout: SpaceLayout) -> Result<Self> {
        if !layout.system_is_leading() {
            return Err(Error::InvalidLayout("system factors must be the leading slots of a factorized model".into()));
        }
        let tol = Tolerances::default().operator_hermitian;
        let ds = ensure_hermitian(&hs, tol, "system Hamiltonian")?;
        ensure_dim(layout.system_dim(), ds, "system Hamiltonian")?;
        let de = ensure_hermitian(&he, tol, "environment Hamiltonian")?;
        ensure_dim(layout.environment_dim(), de, "environment Hamiltonian")?;
        for term in &terms {
            let n = ensure_hermitian(&term.system, tol, "interaction system factor")?;
            ensure_dim(ds, n, "interaction system factor")?;
            let n = ensure_hermitian(&term.environment, tol, "interaction environment factor")?;
            ensure_dim(de, n, "interaction environment factor")?;
        }
        Ok(Self { hs, he, terms, layout })
    }

    pub fn system_hamiltonian(&self) -> &ComplexMatrix {
        &self.hs
    }

    pub fn environment_hamiltonian(&self) -> &ComplexMatrix {
        &self.he
    }

    pub fn terms(&self) -> &[InteractionTerm] {
        &self.terms
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn system_dim(&self) -> usize {
        self.hs.nrows()
    }

    pub fn environment_dim(&self) -> usize {
        self.he.nrows()
    }

    /// Same model with the interaction removed.
    pub fn without_interaction(&self) -> Self {
        Self { terms: Vec::new(), ..self.clone() }
    }

    /// Replaces every term `(s, e)` by `(c·s, e/c)`.
    pub fn rescaled_terms(&self, c: f64) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::invalid("c", "rescaling factor must be finite and nonzero"));
        }
        let terms =
            self.terms.iter().map(|t| InteractionTerm::new(t.system.scale(c), t.environment.unscale(c))).collect();
        Ok(Self { terms, ..self.clone() })
    }

    pub fn assemble_total(&self) -> ComplexMatrix {
        let ids = identity(self.system_dim());
        let ide = identity(self.environment_dim());
        let mut h = kron(&self.hs, &ide) + kron(&ids, &self.he);
        for term in &self.terms {
            h += kron(&term.system, &term.environment);
        }
        h
    }
}

/// Total Hamiltonian of a factorized model.
pub fn assemble_total(model: &FactorizedModel) -> ComplexMatrix {
    model.assemble_total()
}

/// Central spin in a uniform σ_z field coupled to `n` bath spins:
/// `(ω/2)σ_z + Σ_i (ω/2)σ_z^i + ε σ_x Σ_i σ_x^i`, optionally with an extra
/// longitudinal coupling `ε_z σ_z Σ_i σ_z^i` as a second term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralSpin {
    pub bath_spins: usize,
    pub omega: f64,
    pub epsilon: f64,
    pub epsilon_z: Option<f64>,
}

impl CentralSpin {
    pub fn new(bath_spins: usize, omega: f64, epsilon: f64) -> Self {
        Self { bath_spins, omega, epsilon, epsilon_z: None }
    }

    pub fn build(&self) -> Result<FactorizedModel> {
        let n = self.bath_spins;
        if n == 0 {
            return Err(Error::invalid("bath_spins", "at least one bath spin is required"));
        }
        if !self.omega.is_finite() || !self.epsilon.is_finite() {
            return Err(Error::invalid("omega/epsilon", "must be finite"));
        }
        let env_dims = vec![2; n];
        let bath_sum = |op: &ComplexMatrix| -> Result<ComplexMatrix> {
            let mut acc = ComplexMatrix::zeros(1 << n, 1 << n);
            for k in 0..n {
                acc += embed_in_dims(op, k, &env_dims)?;
            }
            Ok(acc)
        };
        let hs = pauli_z().scale(self.omega / 2.0);
        let he = bath_sum(&pauli_z())?.scale(self.omega / 2.0);
        let mut terms = vec![InteractionTerm::new(pauli_x(), bath_sum(&pauli_x())?.scale(self.epsilon))];
        if let Some(ez) = self.epsilon_z {
            if !ez.is_finite() {
                return Err(Error::invalid("epsilon_z", "must be finite"));
            }
            terms.push(InteractionTerm::new(pauli_z(), bath_sum(&pauli_z())?.scale(ez)));
        }
        FactorizedModel::new(hs, he, terms, SpaceLayout::qubits(n + 1, vec![0])?)
    }
}

/// Diagonalized total Hamiltonian of a model.
#[derive(Debug, Clone)]
pub struct Evolver<'a> {
    model: &'a FactorizedModel,
    spectrum: HermitianSpectrum,
}

impl<'a> Evolver<'a> {
    pub fn new(model: &'a FactorizedModel) -> Result<Self> {
        let spectrum = HermitianSpectrum::new(&model.assemble_total())?;
        Ok(Self { model, spectrum })
    }

    pub fn model(&self) -> &FactorizedModel {
        self.model
    }

    pub fn spectrum(&self) -> &HermitianSpectrum {
        &self.spectrum
    }

    /// Prepares `|ψ_S⟩⟨ψ_S| ⊗ ρ_E` for evolution.
    pub fn trajectory(&self, psi_s: &Ket, rho_e: &DensityMatrix) -> Result<Trajectory<'_>> {
        ensure_dim(self.model.system_dim(), psi_s.dim(), "initial system state")?;
        ensure_dim(self.model.environment_dim(), rho_e.dim(), "initial environment state")?;
        let components = environment_ensemble(rho_e)
            .into_iter()
            .map(|(w, e)| {
                let product = psi_s.amplitudes().kronecker(&e);
                let coords = self.spectrum.to_eigenbasis(&product);
                Component { weight: w, product, coords }
            })
            .collect();
        Ok(Trajectory { evolver: self, components })
    }
}

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    product: ComplexVector,
    coords: ComplexVector,
}

/// Weighted pure-state ensemble of an environment state.
fn environment_ensemble(rho_e: &DensityMatrix) -> Vec<(f64, ComplexVector)> {
    let m = rho_e.matrix();
    let d = m.nrows();
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == C64::new(0.0, 0.0)));
    if diagonal {
        return (0..d)
            .filter(|&i| m[(i, i)].re > 0.0)
            .map(|i| {
                let mut v = ComplexVector::zeros(d);
                v[i] = C64::new(1.0, 0.0);
                (m[(i, i)].re, v)
            })
            .collect();
    }
    let eig = m.clone().symmetric_eigen();
    (0..d)
        .filter(|&k| eig.eigenvalues[k] > 0.0)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
        .collect()
}

/// A product initial state bound to an [`Evolver`].
#[derive(Debug, Clone)]
pub struct Trajectory<'e> {
    evolver: &'e Evolver<'e>,
    components: Vec<Component>,
}

impl Trajectory<'_> {
    fn evolved(&self, c: &Component, t: f64) -> ComplexVector {
        if t == 0.0 {
            c.product.clone()
        } else {
            self.evolver.spectrum.evolve_from_eigenbasis(&c.coords, t)
        }
    }

    /// Full state `ρ(t) = U(t) ρ(0) U†(t)`.
    pub fn total_state(&self, t: f64) -> DensityMatrix {
        let d = self.evolver.spectrum.dim();
        let mut rho = ComplexMatrix::zeros(d, d);
        for c in &self.components {
            let psi = self.evolved(c, t);
            rho += (&psi * psi.adjoint()).scale(c.weight);
        }
        DensityMatrix::from_matrix_unchecked(rho)
    }

    /// `tr_E ρ(t)`
    pub fn reduced_system(&self, t: f64) -> DensityMatrix {
        let model = self.evolver.model;
        let (ds, de) = (model.system_dim(), model.environment_dim());
        let mut rho = ComplexMatrix::zeros(ds, ds);
        for c in &self.components {
            let psi = self.evolved(c, t);
            // row-major reshape: index s·d_E + e
            let a = DMatrix::from_row_slice(ds, de, psi.as_slice());
            rho += (&a * a.adjoint()).scale(c.weight);
        }
        DensityMatrix::from_matrix_unchecked(rho)
    }

    /// `tr_S ρ(t)`
    pub fn reduced_environment(&self, t: f64) -> DensityMatrix {
        let model = self.evolver.model;
        let (ds, de) = (model.system_dim(), model.environment_dim());
        let mut rho = ComplexMatrix::zeros(de, de);
        for c in &self.components {
            let psi = self.evolved(c, t);
            let a = DMatrix::from_row_slice(ds, de, psi.as_slice());
            rho += (a.transpose() * a.map(|z| z.conj())).scale(c.weight);
        }
        DensityMatrix::from_matrix_unchecked(rho)
    }
}

/// `U(t) (|ψ_S⟩⟨ψ_S| ⊗ ρ_E) U†(t)`
pub fn evolve_product(model: &FactorizedModel, psi_s0: &Ket, rho_e0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let evolver = Evolver::new(model)?;
    Ok(evolver.trajectory(psi_s0, rho_e0)?.total_state(t))
}

/// Reduced-state purity and exact largest Schmidt probability over time.
#[derive(Debug, Clone, PartialEq)]
pub struct PuritySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub pmax: Vec<f64>,
}

pub(crate) fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::invalid("times", "grid must start at 0"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("times", "grid must be finite and ascending"));
    }
    Ok(())
}

pub fn purity_series(
    model: &FactorizedModel,
    psi_s0: &Ket,
    rho_e0: &DensityMatrix,
    times: &[f64],
) -> Result<PuritySeries> {
    check_time_grid(times)?;
    let evolver = Evolver::new(model)?;
    Ok(evolver.trajectory(psi_s0, rho_e0)?.purity_series(times))
}

impl Trajectory<'_> {
    /// Purity series on an arbitrary (unchecked) time grid.
    pub fn purity_series(&self, times: &[f64]) -> PuritySeries {
        let samples: Vec<(f64, f64)> = times
            .par_iter()
            .map(|&t| {
                let rho = self.reduced_system(t);
                let top = rho.eigenvalues().first().copied().unwrap_or(0.0).min(1.0);
                (purity(&rho), top)
            })
            .collect();
        PuritySeries {
            times: times.to_vec(),
            values: samples.iter().map(|s| s.0).collect(),
            pmax: samples.iter().map(|s| s.1).collect(),
        }
    }
}

/// Eigenvalues grouped into (near-)degenerate blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtGroup {
    pub probability: f64,
    pub multiplicity: usize,
    /// Orthogonal projector onto the whole block.
    pub projector: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    /// All eigenvalues, descending.
    pub probs: Vec<f64>,
    pub groups: Vec<SchmidtGroup>,
}

pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Eigendecomposition `ρ = Σ p_i P_i` with descending probabilities.
pub fn schmidt_spectrum(rho_s: &DensityMatrix) -> SchmidtSpectrum {
    let eig = rho_s.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let probs: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let d = rho_s.dim();
    let mut groups: Vec<SchmidtGroup> = Vec::new();
    let mut lead = f64::NAN;
    for (&k, &p) in order.iter().zip(&probs) {
        let v = eig.eigenvectors.column(k);
        let proj = v * v.adjoint();
        match groups.last_mut() {
            Some(g) if (lead - p).abs() < DEGENERACY_TOLERANCE => {
                g.multiplicity += 1;
                g.projector += proj;
            }
            _ => {
                lead = p;
                groups.push(SchmidtGroup {
                    probability: p,
                    multiplicity: 1,
                    projector: ComplexMatrix::zeros(d, d) + proj,
                });
            }
        }
    }
    SchmidtSpectrum { probs, groups }
}

/// `ρ^k / tr ρ^k` and `tr ρ^{k+1} / tr ρ^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerEstimate {
    pub projector: ComplexMatrix,
    pub pmax: f64,
    pub k: usize,
    /// The two largest exact eigenvalues coincide within [`DEGENERACY_TOLERANCE`].
    pub degenerate: bool,
}

pub fn pointer_power(rho_s: &DensityMatrix, k: usize) -> Result<PointerEstimate> {
    if k == 0 {
        return Err(Error::invalid("k", "iteration power must be at least 1"));
    }
    let rho = rho_s.matrix();
    // trace-normalized after each multiplication to avoid underflow
    let mut power = rho.unscale(rho.trace().re);
    for _ in 1..k {
        let next = &power * rho;
        let tr = next.trace().re;
        power = next.unscale(tr);
    }
    let pmax = (&power * rho).trace().re;
    let ev = rho_s.eigenvalues();
    let degenerate = ev.len() > 1 && (ev[0] - ev[1]).abs() < DEGENERACY_TOLERANCE;
    Ok(PointerEstimate { projector: power, pmax, k, degenerate })
}

/// Max-norm mismatch between a central-difference estimate of `dρ_S/dt` and
/// `−i[H_S, ρ_S] − i Σ_j [s_j, tr_E((I ⊗ e_j) ρ)]` on an exact trajectory.
pub fn master_equation_residual(
    model: &FactorizedModel,
    psi_s0: &Ket,
    rho_e0: &DensityMatrix,
    t: f64,
    h: f64,
) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("h", "step must be positive and finite"));
    }
    let evolver = Evolver::new(model)?;
    let traj = evolver.trajectory(psi_s0, rho_e0)?;
    let forward = traj.reduced_system(t + h);
    let backward = traj.reduced_system(t - h);
    let derivative = (forward.matrix() - backward.matrix()).unscale(2.0 * h);

    let rho = traj.total_state(t);
    let rho_s = partial_trace_operator(rho.matrix(), model.layout(), Subsystem::System)?;
    let mut rhs = commutator(model.system_hamiltonian(), &rho_s) * (-I);
    let ids = identity(model.system_dim());
    for term in model.terms() {
        let weighted = kron(&ids, &term.environment) * rho.matrix();
        let env_avg = partial_trace_operator(&weighted, model.layout(), Subsystem::System)?;
        rhs -= commutator(&term.system, &env_avg) * I;
    }
    Ok(max_abs(&(derivative - rhs)))
}
