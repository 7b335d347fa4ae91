//! Tensor-product Hilbert-space bookkeeping and operator algebra for N bosonic
//! mode pairs plus one two-level coupler.
//!
//! The composite space is ordered (a₁..a_N, b₁..b_N, coupler) with the coupler
//! last. Basis indexing is row-major mixed radix over the mode dimensions, so
//! the coupler digit varies fastest. Coupler basis: index 0 = |g⟩, 1 = |e⟩.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Ordered composite Hilbert space: N A-modes, N B-modes, and (optionally) one
/// two-level coupler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceDescriptor {
    mode_dims: Vec<usize>,
    n_pairs: usize,
    has_coupler: bool,
}

impl SpaceDescriptor {
    /// Composite space with `2·n_pairs` bosonic modes truncated at
    /// `fock_levels` plus the two-level coupler.
    pub fn new(n_pairs: usize, fock_levels: usize) -> Result<Self> {
        if n_pairs == 0 {
            return Err(SimError::invalid("n_pairs must be ≥ 1"));
        }
        if fock_levels < 2 {
            return Err(SimError::invalid(
                "fock_levels must be ≥ 2 so the qubit subspace |0⟩,|1⟩ exists",
            ));
        }
        let mut mode_dims = vec![fock_levels; 2 * n_pairs];
        mode_dims.push(2);
        Ok(SpaceDescriptor { mode_dims, n_pairs, has_coupler: true })
    }

    /// Register-only space (no coupler slot); used for swap Hamiltonians that
    /// act purely on the two registers.
    pub fn registers_only(n_pairs: usize, fock_levels: usize) -> Result<Self> {
        let full = Self::new(n_pairs, fock_levels)?;
        Ok(SpaceDescriptor {
            mode_dims: full.mode_dims[..2 * n_pairs].to_vec(),
            n_pairs,
            has_coupler: false,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    /// Number of bosonic mode slots (A and B registers combined).
    pub fn n_modes(&self) -> usize {
        2 * self.n_pairs
    }

    pub fn has_coupler(&self) -> bool {
        self.has_coupler
    }

    /// Per-slot dimensions, coupler last when present.
    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    /// Total Hilbert-space dimension (product of all slot dimensions).
    pub fn dim(&self) -> usize {
        self.mode_dims.iter().product()
    }

    /// Slot index of A-mode `j` (0-based).
    pub fn a_slot(&self, j: usize) -> usize {
        j
    }

    /// Slot index of B-mode `k` (0-based).
    pub fn b_slot(&self, k: usize) -> usize {
        self.n_pairs + k
    }

    /// Slot index of the coupler, if this space has one.
    pub fn coupler_slot(&self) -> Option<usize> {
        self.has_coupler.then(|| 2 * self.n_pairs)
    }

    pub fn n_slots(&self) -> usize {
        self.mode_dims.len()
    }

    /// Row-major stride of `slot`: the index step of one quantum in it.
    pub fn stride(&self, slot: usize) -> usize {
        self.mode_dims[slot + 1..].iter().product()
    }

    /// Basis index of an occupation tuple (one digit per slot, coupler last).
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_slots() {
            return Err(SimError::invalid(format!(
                "occupation tuple has {} digits, space has {} slots",
                occupations.len(),
                self.n_slots()
            )));
        }
        let mut idx = 0;
        for (slot, (&n, &d)) in occupations.iter().zip(&self.mode_dims).enumerate() {
            if n >= d {
                return Err(SimError::invalid(format!(
                    "occupation {n} out of range for slot {slot} (dim {d})"
                )));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Occupation tuple of a basis index (inverse of [`index_of`]).
    ///
    /// [`index_of`]: SpaceDescriptor::index_of
    pub fn occupations_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.n_slots()];
        for slot in (0..self.n_slots()).rev() {
            digits[slot] = index % self.mode_dims[slot];
            index /= self.mode_dims[slot];
        }
        digits
    }

    /// Total excitation number of a basis state (photons plus coupler digit).
    pub fn excitation_of(&self, index: usize) -> usize {
        self.occupations_of(index).iter().sum()
    }

    fn check_mode_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.n_modes() {
            return Err(SimError::invalid(format!(
                "mode index {slot} out of range (space has {} bosonic modes)",
                self.n_modes()
            )));
        }
        Ok(())
    }

    fn require_coupler(&self) -> Result<usize> {
        self.coupler_slot()
            .ok_or_else(|| SimError::invalid("space has no coupler slot"))
    }
}

/// See [`SpaceDescriptor::new`].
pub fn make_space(n_pairs: usize, fock_levels: usize) -> Result<SpaceDescriptor> {
    SpaceDescriptor::new(n_pairs, fock_levels)
}

/// Addresses one bosonic mode of the composite space by register and pair
/// index (0-based); used e.g. for crosstalk coupling keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeAddress {
    A(usize),
    B(usize),
}

impl ModeAddress {
    pub fn slot(&self, space: &SpaceDescriptor) -> usize {
        match *self {
            ModeAddress::A(j) => space.a_slot(j),
            ModeAddress::B(k) => space.b_slot(k),
        }
    }

    pub fn pair_index(&self) -> usize {
        match *self {
            ModeAddress::A(j) | ModeAddress::B(j) => j,
        }
    }
}

impl std::fmt::Display for ModeAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ModeAddress::A(j) => write!(f, "a{}", j + 1),
            ModeAddress::B(k) => write!(f, "b{}", k + 1),
        }
    }
}

// ---------------------------------------------------------------------------
// Monomial operators
// ---------------------------------------------------------------------------

/// Single-slot operator with at most one nonzero per row and column, given as
/// (row digit, col digit, value) triples.
#[derive(Debug, Clone)]
pub(crate) struct SlotOp {
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SlotOp {
    /// Truncated annihilator: a|n⟩ = √n |n−1⟩.
    pub fn lower(dim: usize) -> Self {
        let entries = (1..dim)
            .map(|n| (n - 1, n, Complex64::new((n as f64).sqrt(), 0.0)))
            .collect();
        SlotOp { entries }
    }

    /// Truncated creator: a⁺|n⟩ = √(n+1) |n+1⟩.
    pub fn raise(dim: usize) -> Self {
        let entries = (1..dim)
            .map(|n| (n, n - 1, Complex64::new((n as f64).sqrt(), 0.0)))
            .collect();
        SlotOp { entries }
    }

    /// Diagonal operator with given per-level values.
    pub fn diagonal(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(n, &v)| (n, n, Complex64::new(v, 0.0)))
            .collect();
        SlotOp { entries }
    }

    /// σ = |g⟩⟨e| on a two-level slot.
    pub fn sigma_minus() -> Self {
        SlotOp { entries: vec![(0, 1, Complex64::new(1.0, 0.0))] }
    }

    /// σ⁺ = |e⟩⟨g| on a two-level slot.
    pub fn sigma_plus() -> Self {
        SlotOp { entries: vec![(1, 0, Complex64::new(1.0, 0.0))] }
    }

    /// σ_z = |e⟩⟨e| − |g⟩⟨g| on a two-level slot.
    pub fn sigma_z() -> Self {
        SlotOp { entries: vec![(0, 0, -Complex64::ONE), (1, 1, Complex64::ONE)] }
    }
}

/// Generalized-permutation matrix on the composite space: at most one nonzero
/// per row and per column. Products of single-slot ladder/projector operators
/// always have this form, which the evolution kernels exploit.
#[derive(Debug, Clone)]
pub(crate) struct Monomial {
    pub dim: usize,
    /// (row, col, value) triples, sorted by column, at most one per column.
    pub entries: Vec<(u32, u32, Complex64)>,
}

impl Monomial {
    /// Product of single-slot operators acting on distinct slots, identity on
    /// every other slot.
    pub fn from_slot_ops(space: &SpaceDescriptor, factors: &[(usize, &SlotOp)]) -> Self {
        let dim = space.dim();
        let mut entries = Vec::new();
        'cols: for col in 0..dim {
            let digits = space.occupations_of(col);
            let mut row = col as i64;
            let mut value = Complex64::ONE;
            for &(slot, op) in factors {
                let digit = digits[slot];
                match op.entries.iter().find(|(_, c, _)| *c == digit) {
                    Some(&(r, c, v)) => {
                        row += (r as i64 - c as i64) * space.stride(slot) as i64;
                        value *= v;
                    }
                    None => continue 'cols,
                }
            }
            entries.push((row as u32, col as u32, value));
        }
        Monomial { dim, entries }
    }

    /// Diagonal operator with per-basis-state weight `f(occupations)`.
    pub fn diagonal_from(space: &SpaceDescriptor, f: impl Fn(&[usize]) -> f64) -> Self {
        let dim = space.dim();
        let mut entries = Vec::new();
        for idx in 0..dim {
            let w = f(&space.occupations_of(idx));
            if w != 0.0 {
                entries.push((idx as u32, idx as u32, Complex64::new(w, 0.0)));
            }
        }
        Monomial { dim, entries }
    }

    pub fn dagger(&self) -> Self {
        let mut entries: Vec<_> =
            self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        entries.sort_unstable_by_key(|&(_, c, _)| c);
        Monomial { dim: self.dim, entries }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Monomial {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, s * v)).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    /// Attempt to read a dense matrix back as a monomial. Fails if any row or
    /// column holds more than one entry above `tol`.
    pub fn from_dense(m: &DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(SimError::invalid("monomial source matrix must be square"));
        }
        let dim = m.nrows();
        let mut row_used = vec![false; dim];
        let mut entries = Vec::new();
        for c in 0..dim {
            let mut hit = None;
            for r in 0..dim {
                if m[(r, c)].norm() > tol {
                    if hit.is_some() {
                        return Err(SimError::invalid(
                            "matrix has more than one nonzero per column; \
                             not a generalized permutation",
                        ));
                    }
                    hit = Some(r);
                }
            }
            if let Some(r) = hit {
                if row_used[r] {
                    return Err(SimError::invalid(
                        "matrix has more than one nonzero per row; \
                         not a generalized permutation",
                    ));
                }
                row_used[r] = true;
                entries.push((r as u32, c as u32, m[(r, c)]));
            }
        }
        Ok(Monomial { dim, entries })
    }

    /// Apply to a state vector: `out += coef · M · x`.
    pub fn apply_vec(&self, coef: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        for &(r, c, v) in &self.entries {
            out[r as usize] += coef * v * x[c as usize];
        }
    }
}

// ---------------------------------------------------------------------------
// Dense operators
// ---------------------------------------------------------------------------

/// Complex square matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: SpaceDescriptor,
    matrix: DMatrix<Complex64>,
}

impl Operator {
    pub fn new(space: SpaceDescriptor, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(SimError::mismatch(format!(
                "matrix is {}×{}, space dimension is {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Operator { space, matrix })
    }

    pub fn identity(space: SpaceDescriptor) -> Self {
        let dim = space.dim();
        Operator { space, matrix: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(space: SpaceDescriptor) -> Self {
        let dim = space.dim();
        Operator { space, matrix: DMatrix::zeros(dim, dim) }
    }

    pub(crate) fn from_monomial(space: SpaceDescriptor, m: &Monomial) -> Self {
        debug_assert_eq!(space.dim(), m.dim);
        Operator { space, matrix: m.to_dense() }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Hermitian conjugate. Applying it twice reproduces the operator exactly
    /// (conjugate-transpose is an involution in IEEE arithmetic).
    pub fn dagger(&self) -> Self {
        Operator { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let dim = self.dim();
        for i in 0..dim {
            for j in i..dim {
                if (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = &self.matrix.adjoint() * &self.matrix;
        let dim = self.dim();
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                if (prod[(i, j)] - expect).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Operator { space: self.space.clone(), matrix: self.matrix.clone() * s }
    }

    /// Largest |eigenvalue| of a Hermitian operator.
    pub fn spectral_norm_hermitian(&self) -> f64 {
        let eig = hermitian_eigenvalues(&self.matrix);
        eig.iter().fold(0.0f64, |m, &e| m.max(e.abs()))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        let mut m = 0.0f64;
        for (a, b) in self.matrix.iter().zip(other.matrix.iter()) {
            m = m.max((a - b).norm());
        }
        m
    }
}

impl std::ops::Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl std::ops::Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator { space: self.space.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl std::ops::Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix }
    }
}

/// [A, B] = AB − BA.
pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    assert_eq!(a.space, b.space, "operator spaces differ");
    Operator {
        space: a.space.clone(),
        matrix: &a.matrix * &b.matrix - &b.matrix * &a.matrix,
    }
}

/// Annihilator of bosonic mode `mode_index` (0-based slot over a₁..a_N,
/// b₁..b_N), identity elsewhere.
pub fn mode_annihilator(space: &SpaceDescriptor, mode_index: usize) -> Result<Operator> {
    space.check_mode_slot(mode_index)?;
    let op = SlotOp::lower(space.mode_dims()[mode_index]);
    let m = Monomial::from_slot_ops(space, &[(mode_index, &op)]);
    Ok(Operator::from_monomial(space.clone(), &m))
}

/// Creator of bosonic mode `mode_index`, identity elsewhere.
pub fn mode_creator(space: &SpaceDescriptor, mode_index: usize) -> Result<Operator> {
    Ok(mode_annihilator(space, mode_index)?.dagger())
}

/// Number operator a⁺a of bosonic mode `mode_index`.
pub fn mode_number(space: &SpaceDescriptor, mode_index: usize) -> Result<Operator> {
    space.check_mode_slot(mode_index)?;
    let values: Vec<f64> =
        (0..space.mode_dims()[mode_index]).map(|n| n as f64).collect();
    let op = SlotOp::diagonal(&values);
    let m = Monomial::from_slot_ops(space, &[(mode_index, &op)]);
    Ok(Operator::from_monomial(space.clone(), &m))
}

/// Coupler lowering operator σ = |g⟩⟨e|, identity on all modes.
pub fn coupler_sigma(space: &SpaceDescriptor) -> Result<Operator> {
    let slot = space.require_coupler()?;
    let m = Monomial::from_slot_ops(space, &[(slot, &SlotOp::sigma_minus())]);
    Ok(Operator::from_monomial(space.clone(), &m))
}

/// Coupler raising operator σ⁺ = |e⟩⟨g|.
pub fn coupler_sigma_plus(space: &SpaceDescriptor) -> Result<Operator> {
    Ok(coupler_sigma(space)?.dagger())
}

/// σ_z = |e⟩⟨e| − |g⟩⟨g| = [σ⁺, σ].
pub fn coupler_sigma_z(space: &SpaceDescriptor) -> Result<Operator> {
    let slot = space.require_coupler()?;
    let m = Monomial::from_slot_ops(space, &[(slot, &SlotOp::sigma_z())]);
    Ok(Operator::from_monomial(space.clone(), &m))
}

/// Projector |e⟩⟨e| on the coupler.
pub fn coupler_excited_projector(space: &SpaceDescriptor) -> Result<Operator> {
    let slot = space.require_coupler()?;
    let m = Monomial::from_slot_ops(space, &[(slot, &SlotOp::diagonal(&[0.0, 1.0]))]);
    Ok(Operator::from_monomial(space.clone(), &m))
}

/// Total excitation operator N_tot = Σ_j (a_j⁺a_j + b_j⁺b_j) + σ⁺σ.
pub fn total_excitation_operator(space: &SpaceDescriptor) -> Operator {
    let m = Monomial::diagonal_from(space, |occ| occ.iter().sum::<usize>() as f64);
    Operator::from_monomial(space.clone(), &m)
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// Pure amplitude vector or density matrix over a [`SpaceDescriptor`].
#[derive(Debug, Clone)]
pub struct QuantumState {
    space: SpaceDescriptor,
    payload: StatePayload,
}

#[derive(Debug, Clone)]
pub enum StatePayload {
    Pure(DVector<Complex64>),
    Density(DMatrix<Complex64>),
}

impl QuantumState {
    /// Pure state; the vector must be unit-norm within 1e-10.
    pub fn pure(space: SpaceDescriptor, vector: DVector<Complex64>) -> Result<Self> {
        if vector.len() != space.dim() {
            return Err(SimError::mismatch(format!(
                "vector length {} vs space dimension {}",
                vector.len(),
                space.dim()
            )));
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::invalid(format!(
                "pure state norm {norm} deviates from 1 by more than 1e-10"
            )));
        }
        Ok(QuantumState { space, payload: StatePayload::Pure(vector) })
    }

    /// Density matrix; Hermitian within 1e-10, unit trace within 1e-9, and
    /// minimum eigenvalue ≥ −1e-8.
    pub fn density(space: SpaceDescriptor, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(SimError::mismatch(format!(
                "density is {}×{}, space dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        let mut herm_dev = 0.0f64;
        for i in 0..matrix.nrows() {
            for j in i..matrix.ncols() {
                herm_dev = herm_dev.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
            }
        }
        if herm_dev > 1e-10 {
            return Err(SimError::invalid(format!(
                "density matrix Hermiticity deviation {herm_dev:.3e} > 1e-10"
            )));
        }
        let trace: Complex64 = matrix.diagonal().iter().sum();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
            return Err(SimError::invalid(format!(
                "density matrix trace {trace} deviates from 1 by more than 1e-9"
            )));
        }
        let min_eig = hermitian_eigenvalues(&matrix)
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e));
        if min_eig < -1e-8 {
            return Err(SimError::invalid(format!(
                "density matrix minimum eigenvalue {min_eig:.3e} < -1e-8"
            )));
        }
        Ok(QuantumState { space, payload: StatePayload::Density(matrix) })
    }

    pub(crate) fn pure_unchecked(space: SpaceDescriptor, vector: DVector<Complex64>) -> Self {
        QuantumState { space, payload: StatePayload::Pure(vector) }
    }

    pub(crate) fn density_unchecked(space: SpaceDescriptor, matrix: DMatrix<Complex64>) -> Self {
        QuantumState { space, payload: StatePayload::Density(matrix) }
    }

    /// Basis state |index⟩.
    pub fn basis_state(space: SpaceDescriptor, index: usize) -> Result<Self> {
        if index >= space.dim() {
            return Err(SimError::invalid(format!(
                "basis index {index} out of range for dimension {}",
                space.dim()
            )));
        }
        let mut v = DVector::zeros(space.dim());
        v[index] = Complex64::ONE;
        Ok(QuantumState { space, payload: StatePayload::Pure(v) })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn payload(&self) -> &StatePayload {
        &self.payload
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.payload, StatePayload::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&DVector<Complex64>> {
        match &self.payload {
            StatePayload::Pure(v) => Some(v),
            StatePayload::Density(_) => None,
        }
    }

    pub fn as_density(&self) -> Option<&DMatrix<Complex64>> {
        match &self.payload {
            StatePayload::Density(m) => Some(m),
            StatePayload::Pure(_) => None,
        }
    }

    /// Density-matrix view; pure states are promoted to |ψ⟩⟨ψ|.
    pub fn to_density_matrix(&self) -> DMatrix<Complex64> {
        match &self.payload {
            StatePayload::Pure(v) => v * v.adjoint(),
            StatePayload::Density(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        match &self.payload {
            StatePayload::Pure(v) => Complex64::new(v.norm_squared(), 0.0),
            StatePayload::Density(m) => m.diagonal().iter().sum(),
        }
    }

    /// tr(ρ²); equals 1 for pure states.
    pub fn purity(&self) -> f64 {
        match &self.payload {
            StatePayload::Pure(v) => {
                let n = v.norm_squared();
                n * n
            }
            StatePayload::Density(m) => (m * m).diagonal().iter().sum::<Complex64>().re,
        }
    }
}

/// ⟨ψ|A|ψ⟩ for pure states, tr(A·ρ) for densities.
pub fn expectation(op: &Operator, state: &QuantumState) -> Result<Complex64> {
    if op.space() != state.space() {
        return Err(SimError::mismatch(
            "operator and state live on different spaces".to_string(),
        ));
    }
    Ok(match state.payload() {
        StatePayload::Pure(v) => (v.adjoint() * op.matrix() * v)[(0, 0)],
        StatePayload::Density(m) => (op.matrix() * m).diagonal().iter().sum(),
    })
}

/// Eigenvalues of a Hermitian matrix, unsorted.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Full Hermitian eigendecomposition: (eigenvalues, unitary of eigenvectors).
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn space_dimensions() {
        let s = make_space(2, 3).unwrap();
        assert_eq!(s.dim(), 162);
        assert_eq!(s.n_slots(), 5);
        let s = make_space(1, 2).unwrap();
        assert_eq!(s.dim(), 8);
    }

    #[test]
    fn space_rejects_bad_arguments() {
        assert!(make_space(0, 3).is_err());
        assert!(make_space(1, 1).is_err());
        assert!(make_space(1, 0).is_err());
    }

    #[test]
    fn basis_indexing_round_trips_with_coupler_fastest() {
        let s = make_space(2, 3).unwrap();
        // coupler digit has stride 1
        assert_eq!(s.index_of(&[0, 0, 0, 0, 1]).unwrap(), 1);
        // last B-mode has stride 2
        assert_eq!(s.index_of(&[0, 0, 0, 1, 0]).unwrap(), 2);
        for idx in 0..s.dim() {
            let occ = s.occupations_of(idx);
            assert_eq!(s.index_of(&occ).unwrap(), idx);
        }
    }

    #[test]
    fn annihilator_matrix_elements() {
        let s = make_space(1, 3).unwrap();
        let a = mode_annihilator(&s, 0).unwrap();
        // single 3-level mode: √1 at (0,1), √2 at (1,2) within that slot
        let i0 = s.index_of(&[0, 0, 0]).unwrap();
        let i1 = s.index_of(&[1, 0, 0]).unwrap();
        let i2 = s.index_of(&[2, 0, 0]).unwrap();
        assert_eq!(a.matrix()[(i0, i1)], c(1.0, 0.0));
        assert_eq!(a.matrix()[(i1, i2)], c(2f64.sqrt(), 0.0));
        assert_eq!(a.matrix()[(i0, i2)], c(0.0, 0.0));
    }

    #[test]
    fn annihilator_kills_vacuum() {
        let s = make_space(2, 3).unwrap();
        for m in 0..s.n_modes() {
            let a = mode_annihilator(&s, m).unwrap();
            let vac = QuantumState::basis_state(s.clone(), 0).unwrap();
            let v = a.matrix() * vac.as_pure().unwrap();
            assert!(v.norm() == 0.0);
        }
    }

    #[test]
    fn annihilator_rejects_coupler_and_out_of_range() {
        let s = make_space(1, 3).unwrap();
        assert!(mode_annihilator(&s, 2).is_err());
        assert!(mode_annihilator(&s, 99).is_err());
    }

    #[test]
    fn truncated_commutator_is_identity_below_top_level() {
        let s = make_space(1, 3).unwrap();
        let a = mode_annihilator(&s, 0).unwrap();
        let comm = commutator(&a, &a.dagger());
        // identity on Fock 0,1 of the mode; deviation confined to the top level
        for idx in 0..s.dim() {
            let occ = s.occupations_of(idx);
            let expect = if occ[0] < 2 { 1.0 } else { -2.0 };
            assert!((comm.matrix()[(idx, idx)] - c(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn coupler_sigma_action() {
        let s = make_space(1, 2).unwrap();
        let sigma = coupler_sigma(&s).unwrap();
        let g = s.index_of(&[0, 0, 0]).unwrap();
        let e = s.index_of(&[0, 0, 1]).unwrap();
        assert_eq!(sigma.matrix()[(g, e)], c(1.0, 0.0)); // σ|e⟩ = |g⟩
        let col_g: Vec<_> = (0..s.dim()).map(|r| sigma.matrix()[(r, g)]).collect();
        assert!(col_g.iter().all(|v| v.norm() == 0.0)); // σ|g⟩ = 0
        // σ² = 0
        let sq = &sigma * &sigma;
        assert!(sq.max_abs_diff(&Operator::zeros(s.clone())) == 0.0);
    }

    #[test]
    fn sigma_commutator_is_sigma_z() {
        let s = make_space(1, 3).unwrap();
        let sigma = coupler_sigma(&s).unwrap();
        let sz = commutator(&sigma.dagger(), &sigma);
        let expect = coupler_sigma_z(&s).unwrap();
        assert!(sz.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let s = make_space(1, 3).unwrap();
        let sigma = coupler_sigma(&s).unwrap();
        let n_e = &sigma.dagger() * &sigma;
        let ground = QuantumState::basis_state(s.clone(), 0).unwrap();
        assert_eq!(expectation(&n_e, &ground).unwrap(), c(0.0, 0.0));

        // mode in |1⟩: ⟨a⁺a⟩ = 1
        let idx = s.index_of(&[1, 0, 0]).unwrap();
        let one = QuantumState::basis_state(s.clone(), idx).unwrap();
        let n0 = mode_number(&s, 0).unwrap();
        assert!((expectation(&n0, &one).unwrap() - c(1.0, 0.0)).norm() < 1e-15);

        // tr(1·ρ) = 1 for any valid density matrix
        let mut rho = DMatrix::zeros(s.dim(), s.dim());
        rho[(0, 0)] = c(0.5, 0.0);
        rho[(idx, idx)] = c(0.5, 0.0);
        rho[(0, idx)] = c(0.25, 0.1);
        rho[(idx, 0)] = c(0.25, -0.1);
        let rho = QuantumState::density(s.clone(), rho).unwrap();
        let id = Operator::identity(s.clone());
        assert!((expectation(&id, &rho).unwrap() - c(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn expectation_rejects_space_mismatch() {
        let s1 = make_space(1, 3).unwrap();
        let s2 = make_space(2, 3).unwrap();
        let op = Operator::identity(s1.clone());
        let st = QuantumState::basis_state(s2, 0).unwrap();
        assert!(expectation(&op, &st).is_err());
    }

    #[test]
    fn cross_mode_operators_commute() {
        // exhaustive for n_pairs ≤ 2, fock_levels ≤ 3
        for n_pairs in 1..=2 {
            for fock in 2..=3 {
                let s = make_space(n_pairs, fock).unwrap();
                let mut ops: Vec<Operator> = (0..s.n_modes())
                    .map(|m| mode_annihilator(&s, m).unwrap())
                    .collect();
                ops.push(coupler_sigma(&s).unwrap());
                for i in 0..ops.len() {
                    for j in (i + 1)..ops.len() {
                        let comm = commutator(&ops[i], &ops[j]);
                        assert!(
                            comm.max_abs_diff(&Operator::zeros(s.clone())) == 0.0,
                            "modes {i},{j} fail to commute (n={n_pairs}, fock={fock})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dagger_is_involution() {
        let s = make_space(2, 3).unwrap();
        let a = mode_annihilator(&s, 1).unwrap();
        let sigma = coupler_sigma(&s).unwrap();
        let mixed = &a * &sigma.dagger();
        assert_eq!(mixed.dagger().dagger(), mixed);
    }

    #[test]
    fn total_excitation_is_hermitian_diagonal() {
        let s = make_space(2, 3).unwrap();
        let n = total_excitation_operator(&s);
        assert!(n.is_hermitian(0.0));
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                if i != j {
                    assert_eq!(n.matrix()[(i, j)], c(0.0, 0.0));
                }
            }
            assert_eq!(n.matrix()[(i, i)].re, s.excitation_of(i) as f64);
        }
    }

    #[test]
    fn pure_state_norm_validation() {
        let s = make_space(1, 2).unwrap();
        let mut v = DVector::zeros(s.dim());
        v[0] = c(0.5, 0.0);
        assert!(QuantumState::pure(s.clone(), v).is_err());
    }

    #[test]
    fn density_validation_catches_defects() {
        let s = make_space(1, 2).unwrap();
        let d = s.dim();
        // non-hermitian
        let mut m = DMatrix::zeros(d, d);
        m[(0, 0)] = c(1.0, 0.0);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(QuantumState::density(s.clone(), m).is_err());
        // negative eigenvalue
        let mut m = DMatrix::zeros(d, d);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(QuantumState::density(s.clone(), m).is_err());
    }

    #[test]
    fn registers_only_space_has_no_coupler() {
        let s = SpaceDescriptor::registers_only(2, 3).unwrap();
        assert_eq!(s.dim(), 81);
        assert!(s.coupler_slot().is_none());
        assert!(coupler_sigma(&s).is_err());
    }
}
