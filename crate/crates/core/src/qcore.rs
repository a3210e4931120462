//! Dense complex linear algebra on composite Hilbert spaces.
//!
//! Operators are plain [`ComplexMatrix`] values. States come in two flavours,
//! [`Ket`] for pure states and [`DensityMatrix`] for general ones, both
//! validated on construction. Tensor factors are ordered as in [`kron`]: slot 0
//! is the most significant index of a composite basis label.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Numerical thresholds used when validating states and operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed deviation of a ket norm from one.
    pub ket_norm: f64,
    /// Max elementwise deviation from Hermiticity for density matrices.
    pub density_hermitian: f64,
    /// Allowed deviation of a density-matrix trace from one.
    pub trace: f64,
    /// Eigenvalues in `[-negative_eigenvalue, 0)` are treated as zero.
    pub negative_eigenvalue: f64,
    /// Max elementwise deviation from Hermiticity for Hamiltonians and observables.
    pub operator_hermitian: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ket_norm: 1e-12,
            density_hermitian: 1e-12,
            trace: 1e-12,
            negative_eigenvalue: 1e-10,
            operator_hermitian: 1e-10,
        }
    }
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Largest elementwise deviation `|m_ij - conj(m_ji)|`; infinite for non-square input.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest elementwise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub(crate) fn ensure_square(m: &ComplexMatrix, context: &'static str) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::NotSquare { context, rows: m.nrows(), cols: m.ncols() })
    }
}

pub(crate) fn ensure_hermitian(m: &ComplexMatrix, tol: f64, context: &'static str) -> Result<usize> {
    let n = ensure_square(m, context)?;
    let deviation = hermitian_deviation(m);
    if deviation > tol {
        return Err(Error::NotHermitian { context, deviation });
    }
    Ok(n)
}

pub(crate) fn ensure_dim(expected: usize, found: usize, context: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, found })
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: ComplexVector,
}

impl Ket {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        Self::with_tolerance(amplitudes, Tolerances::default().ket_norm)
    }

    pub fn with_tolerance(amplitudes: ComplexVector, tol: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("ket has no amplitudes".into()));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm) })
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(ComplexVector::from_column_slice(amplitudes))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid("index", format!("{index} >= dimension {dim}")));
        }
        let mut v = ComplexVector::zeros(dim);
        v[index] = ONE;
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> ComplexVector {
        self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        Ket { amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }
}

/// Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&matrix, "density matrix")?;
        if matrix.nrows() == 0 {
            return Err(Error::InvalidState("empty density matrix".into()));
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > tol.density_hermitian {
            return Err(Error::NotHermitian { context: "density matrix", deviation });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol.trace || trace.im.abs() > tol.trace {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let min_eig = matrix.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -tol.negative_eigenvalue {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix known to be a density matrix by construction.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self { matrix: ket.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(Self { matrix: identity(dim).unscale(dim as f64) })
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let v = ComplexVector::from_iterator(probs.len(), probs.iter().map(|&p| C64::new(p, 0.0)));
        Self::new(ComplexMatrix::from_diagonal(&v))
    }

    /// Convex mixture `Σ w_k |ψ_k⟩⟨ψ_k|`; weights are normalized.
    pub fn mixture(weights: &[f64], kets: &[Ket]) -> Result<Self> {
        ensure_dim(weights.len(), kets.len(), "mixture weights")?;
        let total: f64 = weights.iter().sum();
        if kets.is_empty() || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || total <= 0.0 {
            return Err(Error::invalid("weights", "must be non-negative with positive sum"));
        }
        let dim = kets[0].dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (w, k) in weights.iter().zip(kets) {
            ensure_dim(dim, k.dim(), "mixture kets")?;
            m += k.projector().scale(w / total);
        }
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { matrix: kron(&self.matrix, &other.matrix) }
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Which side of the system/environment cut to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Environment,
}

/// Factor dimensions of a composite space and the slots that form the system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    dims: Vec<usize>,
    system_slots: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(dims: Vec<usize>, system_slots: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidLayout("dimensions must be a non-empty list of positive integers".into()));
        }
        let mut slots = system_slots;
        slots.sort_unstable();
        slots.dedup();
        if slots.is_empty() {
            return Err(Error::InvalidLayout("system slots must be non-empty".into()));
        }
        if let Some(&bad) = slots.iter().find(|&&s| s >= dims.len()) {
            return Err(Error::SlotOutOfRange { slot: bad, len: dims.len() });
        }
        if slots.len() == dims.len() {
            return Err(Error::InvalidLayout("system slots must be a strict subset of the factors".into()));
        }
        Ok(Self { dims, system_slots: slots })
    }

    /// `n` qubits; the system is the given slots.
    pub fn qubits(n: usize, system_slots: Vec<usize>) -> Result<Self> {
        Self::new(vec![2; n], system_slots)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn system_slots(&self) -> &[usize] {
        &self.system_slots
    }

    pub fn environment_slots(&self) -> Vec<usize> {
        (0..self.dims.len()).filter(|s| !self.system_slots.contains(s)).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn system_dim(&self) -> usize {
        self.system_slots.iter().map(|&s| self.dims[s]).product()
    }

    pub fn environment_dim(&self) -> usize {
        self.total_dim() / self.system_dim()
    }

    /// True when the system factors are exactly the leading slots `0..k`.
    pub fn system_is_leading(&self) -> bool {
        self.system_slots.iter().enumerate().all(|(i, &s)| i == s)
    }

    fn slots_of(&self, part: Subsystem) -> Vec<usize> {
        match part {
            Subsystem::System => self.system_slots.clone(),
            Subsystem::Environment => self.environment_slots(),
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Offsets into the full index contributed by every multi-index over `slots`,
    /// enumerated with the first listed slot most significant.
    fn offsets(&self, slots: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &slot in slots {
            let mut next = Vec::with_capacity(offsets.len() * self.dims[slot]);
            for &base in &offsets {
                for digit in 0..self.dims[slot] {
                    next.push(base + digit * strides[slot]);
                }
            }
            offsets = next;
        }
        offsets
    }
}

/// Lifts a single-factor operator to the full space, identity elsewhere.
pub fn embed(op: &ComplexMatrix, slot: usize, layout: &SpaceLayout) -> Result<ComplexMatrix> {
    embed_in_dims(op, slot, layout.dims())
}

/// [`embed`] over a bare list of factor dimensions.
pub fn embed_in_dims(op: &ComplexMatrix, slot: usize, dims: &[usize]) -> Result<ComplexMatrix> {
    if slot >= dims.len() {
        return Err(Error::SlotOutOfRange { slot, len: dims.len() });
    }
    let n = ensure_square(op, "embed")?;
    ensure_dim(dims[slot], n, "embed")?;
    let before: usize = dims[..slot].iter().product();
    let after: usize = dims[slot + 1..].iter().product();
    Ok(kron(&kron(&identity(before), op), &identity(after)))
}

/// Partial trace of an arbitrary square operator over the complement of `keep`.
pub fn partial_trace_operator(m: &ComplexMatrix, layout: &SpaceLayout, keep: Subsystem) -> Result<ComplexMatrix> {
    let n = ensure_square(m, "partial trace")?;
    ensure_dim(layout.total_dim(), n, "partial trace")?;
    let kept = layout.offsets(&layout.slots_of(keep));
    let traced_part = match keep {
        Subsystem::System => Subsystem::Environment,
        Subsystem::Environment => Subsystem::System,
    };
    let traced = layout.offsets(&layout.slots_of(traced_part));
    let d = kept.len();
    let mut out = ComplexMatrix::zeros(d, d);
    for (a, &ra) in kept.iter().enumerate() {
        for (b, &rb) in kept.iter().enumerate() {
            out[(a, b)] = traced.iter().map(|&t| m[(ra + t, rb + t)]).sum();
        }
    }
    Ok(out)
}

/// Reduced density matrix on the kept side of the layout's cut.
pub fn partial_trace(rho: &DensityMatrix, layout: &SpaceLayout, keep: Subsystem) -> Result<DensityMatrix> {
    partial_trace_operator(rho.matrix(), layout, keep).map(DensityMatrix::from_matrix_unchecked)
}

/// Eigendecomposition `H = V diag(E) V†` of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    values: DVector<f64>,
    vectors: ComplexMatrix,
}

impl HermitianSpectrum {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(h, Tolerances::default().operator_hermitian)
    }

    pub fn with_tolerance(h: &ComplexMatrix, tol: f64) -> Result<Self> {
        ensure_hermitian(h, tol, "propagator")?;
        let eig = h.clone().symmetric_eigen();
        Ok(Self { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    /// Phases `exp(-i E_k t)`.
    pub fn phases(&self, t: f64) -> ComplexVector {
        self.values.map(|e| C64::from_polar(1.0, -e * t))
    }

    /// `exp(-i H t)`
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let phases = self.phases(t);
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[k];
        }
        scaled * self.vectors.adjoint()
    }

    /// Coordinates of `v` in the eigenbasis (`V† v`).
    pub fn to_eigenbasis(&self, v: &ComplexVector) -> ComplexVector {
        self.vectors.ad_mul(v)
    }

    /// `exp(-i H t) v` given `V† v`.
    pub fn evolve_from_eigenbasis(&self, coords: &ComplexVector, t: f64) -> ComplexVector {
        let phased = coords.component_mul(&self.phases(t));
        &self.vectors * phased
    }
}

/// Unitary `exp(-i H t)` via eigendecomposition (ħ = 1).
pub fn propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    Ok(HermitianSpectrum::new(h)?.propagator(t))
}

/// `tr ρ²`, clamped to its exact range `[1/d, 1]` to absorb rounding.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr ρ² = Σ |ρ_ij|² for Hermitian ρ
    let p: f64 = rho.matrix().iter().map(|z| z.norm_sqr()).sum();
    p.clamp(1.0 / rho.dim() as f64, 1.0)
}

/// States that can produce expectation values.
pub trait QuantumState {
    fn dim(&self) -> usize;
    /// `⟨op⟩`; dimensions are checked by the caller.
    fn expectation_unchecked(&self, op: &ComplexMatrix) -> C64;

    fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        let n = ensure_square(op, "expectation")?;
        ensure_dim(self.dim(), n, "expectation")?;
        Ok(self.expectation_unchecked(op))
    }
}

impl QuantumState for Ket {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn expectation_unchecked(&self, op: &ComplexMatrix) -> C64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn expectation_unchecked(&self, op: &ComplexMatrix) -> C64 {
        // tr(op ρ) without forming the product
        let n = self.matrix.nrows();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += op[(i, j)] * self.matrix[(j, i)];
            }
        }
        acc
    }
}

/// Mean `⟨op⟩` and dispersion `⟨op²⟩ − ⟨op⟩²` (clamped at zero).
pub fn mean_dispersion<S: QuantumState + ?Sized>(op: &ComplexMatrix, state: &S) -> Result<(f64, f64)> {
    let mean = state.expectation(op)?.re;
    let second = state.expectation_unchecked(&(op * op)).re;
    Ok((mean, (second - mean * mean).max(0.0)))
}
