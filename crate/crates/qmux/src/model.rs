//! Hamiltonian construction from device parameters and validation of the
//! dispersive-regime conditions.
//!
//! Everything here works in angular units: frequencies and couplings in rad/s,
//! rates in 1/s. Detunings are always derived from frequencies
//! (Δ = ω_c − ω_mode), never stored, so ω and Δ cannot drift apart.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::hilbert::{ModeAddress, Monomial, Operator, SlotOp, SpaceDescriptor};

/// Device parameters for N resonator pairs coupled to one two-level coupler.
///
/// `pairs[j]` holds the physical properties of modes a_j and b_j. The pairing
/// permutation maps each a_j to its partner b_{pairing[j]} (identity by
/// default); all derived per-pair quantities (detunings, λ_j, phases) follow
/// the pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    /// Coupler transition frequency ω_c (rad/s).
    pub omega_c: f64,
    pub pairs: Vec<PairParams>,
    /// Coupler energy relaxation rate γ (1/s).
    pub gamma: f64,
    /// Coupler pure dephasing rate γ_φ (1/s), applied as γ_φ(σ_zρσ_z − ρ).
    pub gamma_phi: f64,
    /// Direct inter-resonator couplings (rad/s), keyed by unordered mode pair.
    pub crosstalk: BTreeMap<(ModeAddress, ModeAddress), f64>,
    /// a_j is paired with b_{pairing[j]}; must be a bijection.
    pub pairing: Vec<usize>,
}

/// Frequencies, couplings, and decay rates of one a/b mode pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairParams {
    /// Mode frequencies ω_a, ω_b (rad/s).
    pub omega_a: f64,
    pub omega_b: f64,
    /// Coupler coupling strengths g (to a) and μ (to b), rad/s.
    pub g: f64,
    pub mu: f64,
    /// Photon decay rates κ (1/s).
    pub kappa_a: f64,
    pub kappa_b: f64,
}

impl DeviceParams {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Detuning Δ_aj = ω_c − ω_aj of mode a_j.
    pub fn delta_a(&self, j: usize) -> f64 {
        self.omega_c - self.pairs[j].omega_a
    }

    /// Detuning Δ_bk = ω_c − ω_bk of the physical mode b_k.
    pub fn delta_b_mode(&self, k: usize) -> f64 {
        self.omega_c - self.pairs[k].omega_b
    }

    /// Index of the B mode paired with a_j.
    pub fn partner(&self, j: usize) -> usize {
        self.pairing[j]
    }

    /// Detuning of pair j's B-side mode, b_{pairing[j]}.
    pub fn pair_delta_b(&self, j: usize) -> f64 {
        self.delta_b_mode(self.partner(j))
    }

    /// Coupling μ of pair j's B-side mode.
    pub fn pair_mu(&self, j: usize) -> f64 {
        self.pairs[self.partner(j)].mu
    }

    /// Frequency of an addressed mode.
    pub fn mode_frequency(&self, m: ModeAddress) -> f64 {
        match m {
            ModeAddress::A(j) => self.pairs[j].omega_a,
            ModeAddress::B(k) => self.pairs[k].omega_b,
        }
    }

    /// Coupler coupling strength of an addressed mode.
    pub fn mode_coupling(&self, m: ModeAddress) -> f64 {
        match m {
            ModeAddress::A(j) => self.pairs[j].g,
            ModeAddress::B(k) => self.pairs[k].mu,
        }
    }

    /// Mode decay rate κ of an addressed mode.
    pub fn mode_kappa(&self, m: ModeAddress) -> f64 {
        match m {
            ModeAddress::A(j) => self.pairs[j].kappa_a,
            ModeAddress::B(k) => self.pairs[k].kappa_b,
        }
    }

    /// |Δ_a1|/g_1, the dimensionless detuning of pair 1.
    pub fn nominal_alpha(&self) -> f64 {
        self.delta_a(0).abs() / self.pairs[0].g
    }

    /// Validate rates, couplings, detunings, pairing, and crosstalk keys.
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(SimError::invalid("device needs at least one mode pair"));
        }
        let n = self.n_pairs();
        if self.gamma < 0.0 || self.gamma_phi < 0.0 {
            return Err(SimError::invalid("coupler rates must be ≥ 0"));
        }
        for (j, p) in self.pairs.iter().enumerate() {
            if p.kappa_a < 0.0 || p.kappa_b < 0.0 {
                return Err(SimError::invalid(format!("pair {j}: κ must be ≥ 0")));
            }
            if p.g <= 0.0 || p.mu <= 0.0 {
                return Err(SimError::invalid(format!(
                    "pair {j}: couplings g, μ must be > 0"
                )));
            }
            if self.delta_a(j) == 0.0 || self.delta_b_mode(j) == 0.0 {
                return Err(SimError::invalid(format!(
                    "pair {j}: zero detuning (mode resonant with the coupler)"
                )));
            }
        }
        let mut seen = vec![false; n];
        if self.pairing.len() != n {
            return Err(SimError::invalid("pairing length must equal n_pairs"));
        }
        for &t in &self.pairing {
            if t >= n || seen[t] {
                return Err(SimError::invalid("pairing must be a bijection"));
            }
            seen[t] = true;
        }
        for (&(m1, m2), &v) in &self.crosstalk {
            if m1.pair_index() >= n || m2.pair_index() >= n {
                return Err(SimError::invalid(format!(
                    "crosstalk key ({m1},{m2}) references an unknown mode"
                )));
            }
            if m1 == m2 {
                return Err(SimError::invalid(format!(
                    "crosstalk key ({m1},{m1}) couples a mode to itself"
                )));
            }
            if !v.is_finite() {
                return Err(SimError::invalid("crosstalk strength must be finite"));
            }
        }
        Ok(())
    }

    /// Rebuild mode frequencies so that pair j sits at Δ_j = ±α·g_j with
    /// alternating signs (pair 1 positive), keeping everything else fixed.
    /// Both modes of a pair get the same detuning.
    pub fn with_alpha(&self, alpha: f64) -> Result<DeviceParams> {
        if alpha <= 0.0 {
            return Err(SimError::invalid("alpha must be > 0"));
        }
        let mut out = self.clone();
        for j in 0..self.n_pairs() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let delta = sign * alpha * self.pairs[j].g;
            out.pairs[j].omega_a = self.omega_c - delta;
            out.pairs[self.partner(j)].omega_b = self.omega_c - delta;
        }
        Ok(out)
    }

    /// Copy with all dissipation rates set to zero.
    pub fn zero_dissipation(&self) -> DeviceParams {
        let mut out = self.clone();
        out.gamma = 0.0;
        out.gamma_phi = 0.0;
        for p in &mut out.pairs {
            p.kappa_a = 0.0;
            p.kappa_b = 0.0;
        }
        out
    }

    /// Copy with every unordered inter-resonator pair coupled at
    /// `fraction · g_1` (the S1-style uniform crosstalk).
    pub fn with_uniform_crosstalk(&self, fraction: f64) -> DeviceParams {
        let mut out = self.clone();
        out.crosstalk.clear();
        if fraction == 0.0 {
            return out;
        }
        let strength = fraction * self.pairs[0].g;
        let modes: Vec<ModeAddress> = (0..self.n_pairs())
            .map(ModeAddress::A)
            .chain((0..self.n_pairs()).map(ModeAddress::B))
            .collect();
        for (i, &m1) in modes.iter().enumerate() {
            for &m2 in &modes[i + 1..] {
                out.crosstalk.insert((m1, m2), strength);
            }
        }
        out
    }

    fn check_space(&self, space: &SpaceDescriptor) -> Result<()> {
        if space.n_pairs() != self.n_pairs() {
            return Err(SimError::mismatch(format!(
                "device has {} pairs, space has {}",
                self.n_pairs(),
                space.n_pairs()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Effective parameters
// ---------------------------------------------------------------------------

/// Superexchange strengths, ac-Stark shifts, and swap phase factors derived
/// from [`DeviceParams`].
#[derive(Debug, Clone)]
pub struct EffectiveParams {
    /// Signed λ_j (rad/s): g_jμ_j/Δ_j for equal detunings, else
    /// (g_jμ_j/2)(Δ_aj⁻¹ + Δ_bj⁻¹).
    pub lambda: Vec<f64>,
    /// g_j²/Δ_aj (rad/s).
    pub stark_a: Vec<f64>,
    /// μ_j²/Δ_bj (rad/s), pair-indexed (uses the paired B mode).
    pub stark_b: Vec<f64>,
}

/// Whether all pairs share one swap interval t = π/(2λ) or each pair runs its
/// own t_j = π/(2|λ_j|) (staggered switching).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapTiming {
    Uniform,
    Staggered,
}

impl EffectiveParams {
    pub fn from_params(params: &DeviceParams) -> Self {
        let n = params.n_pairs();
        let mut lambda = Vec::with_capacity(n);
        let mut stark_a = Vec::with_capacity(n);
        let mut stark_b = Vec::with_capacity(n);
        for j in 0..n {
            let g = params.pairs[j].g;
            let mu = params.pair_mu(j);
            let da = params.delta_a(j);
            let db = params.pair_delta_b(j);
            // equal detunings route through g·μ/Δ so the two formulas agree
            // bit-exactly where they coincide algebraically
            let l = if da == db { g * mu / da } else { 0.5 * g * mu * (1.0 / da + 1.0 / db) };
            lambda.push(l);
            stark_a.push(g * g / da);
            stark_b.push(mu * mu / db);
        }
        EffectiveParams { lambda, stark_a, stark_b }
    }

    pub fn n_pairs(&self) -> usize {
        self.lambda.len()
    }

    /// Common |λ| if the magnitudes are uniform within 1e-9 relative.
    pub fn uniform_lambda(&self) -> Result<f64> {
        let l0 = self.lambda[0].abs();
        if l0 == 0.0 {
            return Err(SimError::invalid("λ_1 is zero"));
        }
        for (j, &l) in self.lambda.iter().enumerate() {
            if (l.abs() - l0).abs() > 1e-9 * l0 {
                return Err(SimError::invalid(format!(
                    "|λ_{}| = {:.6e} differs from |λ_1| = {:.6e}; \
                     use the staggered protocol for non-uniform couplings",
                    j + 1,
                    l.abs(),
                    l0
                )));
            }
        }
        Ok(l0)
    }

    /// Swap interval t = π/(2λ) of the uniform protocol (λ taken from pair 1
    /// after the uniformity check).
    pub fn swap_time(&self) -> Result<f64> {
        Ok(std::f64::consts::PI / (2.0 * self.uniform_lambda()?))
    }

    /// Per-pair swap interval t_j = π/(2|λ_j|).
    pub fn pair_swap_time(&self, j: usize) -> Result<f64> {
        if self.lambda[j] == 0.0 {
            return Err(SimError::invalid(format!("λ_{} is zero", j + 1)));
        }
        Ok(std::f64::consts::PI / (2.0 * self.lambda[j].abs()))
    }

    /// Phase exponent φ_j (units of π) decorating an excitation received by
    /// a_j: φ_j = (λ_j + g_j²/Δ_j)/(2λ̄).
    pub fn phase_phi(&self, j: usize, timing: SwapTiming) -> Result<f64> {
        Ok((self.lambda[j] + self.stark_a[j]) / (2.0 * self.timing_lambda(j, timing)?))
    }

    /// Phase exponent θ_j (units of π) decorating an excitation received by
    /// pair j's B mode: θ_j = (λ_j + μ_j²/Δ_j)/(2λ̄).
    pub fn phase_theta(&self, j: usize, timing: SwapTiming) -> Result<f64> {
        Ok((self.lambda[j] + self.stark_b[j]) / (2.0 * self.timing_lambda(j, timing)?))
    }

    fn timing_lambda(&self, j: usize, timing: SwapTiming) -> Result<f64> {
        match timing {
            SwapTiming::Uniform => self.uniform_lambda(),
            SwapTiming::Staggered => {
                if self.lambda[j] == 0.0 {
                    return Err(SimError::invalid(format!("λ_{} is zero", j + 1)));
                }
                Ok(self.lambda[j].abs())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Isolation report
// ---------------------------------------------------------------------------

/// One cross-pair separation check: the detuning separation of two modes from
/// different pairs against the product of their coupler couplings.
#[derive(Debug, Clone)]
pub struct CrossPairCheck {
    pub mode_1: ModeAddress,
    pub mode_2: ModeAddress,
    /// |Δ₁ − Δ₂| / (|Δ₁|⁻¹ + |Δ₂|⁻¹), rad²/s².
    pub separation: f64,
    /// Product of the two coupler couplings, rad²/s².
    pub coupling_product: f64,
    /// separation / coupling_product; must exceed the required margin.
    pub margin: f64,
}

/// One per-mode dispersive check |Δ|/coupling.
#[derive(Debug, Clone)]
pub struct DispersiveCheck {
    pub mode: ModeAddress,
    pub ratio: f64,
}

/// Result of evaluating the pair-isolation and large-detuning conditions.
#[derive(Debug, Clone)]
pub struct IsolationReport {
    pub cross: Vec<CrossPairCheck>,
    pub dispersive: Vec<DispersiveCheck>,
    pub required_margin: f64,
    /// Smallest achieved margin across all checks.
    pub worst_margin: f64,
    pub pass: bool,
    /// Structural problems (zero detunings) that force a failing report.
    pub errors: Vec<String>,
}

impl IsolationReport {
    /// Human-readable pass/fail table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "isolation check (required margin {:.3}):\n",
            self.required_margin
        ));
        for e in &self.errors {
            out.push_str(&format!("  ERROR  {e}\n"));
        }
        for c in &self.cross {
            out.push_str(&format!(
                "  {}  {}-{}: separation/coupling = {:>10.3}\n",
                if c.margin >= self.required_margin { "ok    " } else { "FAIL  " },
                c.mode_1,
                c.mode_2,
                c.margin
            ));
        }
        for d in &self.dispersive {
            out.push_str(&format!(
                "  {}  |Δ|/coupling ({}) = {:>10.3}\n",
                if d.ratio >= self.required_margin { "ok    " } else { "FAIL  " },
                d.mode,
                d.ratio
            ));
        }
        out.push_str(&format!(
            "  worst margin {:.3} → {}\n",
            self.worst_margin,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}

/// Evaluate the pair-isolation conditions: every cross-pair mode combination
/// must satisfy |Δ_m − Δ_n|/(|Δ_m|⁻¹ + |Δ_n|⁻¹) ≥ margin · c_m·c_n, and every
/// mode must satisfy |Δ|/coupling ≥ margin. Modes joined by the pairing map
/// are exempt from the cross check (they are *meant* to interact).
pub fn check_isolation(params: &DeviceParams, margin: f64) -> IsolationReport {
    let n = params.n_pairs();
    let mut errors = Vec::new();
    let mut cross = Vec::new();
    let mut dispersive = Vec::new();

    let modes: Vec<ModeAddress> = (0..n)
        .map(ModeAddress::A)
        .chain((0..n).map(ModeAddress::B))
        .collect();
    let delta_of = |m: ModeAddress| match m {
        ModeAddress::A(j) => params.delta_a(j),
        ModeAddress::B(k) => params.delta_b_mode(k),
    };

    for &m in &modes {
        let d = delta_of(m);
        if d == 0.0 {
            errors.push(format!("mode {m} has zero detuning"));
            continue;
        }
        dispersive.push(DispersiveCheck { mode: m, ratio: d.abs() / params.mode_coupling(m) });
    }

    for (i, &m1) in modes.iter().enumerate() {
        for &m2 in &modes[i + 1..] {
            let paired = matches!(
                (m1, m2),
                (ModeAddress::A(j), ModeAddress::B(k)) if params.partner(j) == k
            );
            if paired {
                continue;
            }
            let (d1, d2) = (delta_of(m1), delta_of(m2));
            if d1 == 0.0 || d2 == 0.0 {
                continue; // already reported above
            }
            let separation = (d1 - d2).abs() / (1.0 / d1.abs() + 1.0 / d2.abs());
            let coupling_product = params.mode_coupling(m1) * params.mode_coupling(m2);
            cross.push(CrossPairCheck {
                mode_1: m1,
                mode_2: m2,
                separation,
                coupling_product,
                margin: separation / coupling_product,
            });
        }
    }

    let worst_margin = cross
        .iter()
        .map(|c| c.margin)
        .chain(dispersive.iter().map(|d| d.ratio))
        .fold(f64::INFINITY, f64::min);
    let pass = errors.is_empty() && worst_margin >= margin;
    IsolationReport { cross, dispersive, required_margin: margin, worst_margin, pass, errors }
}

// ---------------------------------------------------------------------------
// Time-dependent Hamiltonians
// ---------------------------------------------------------------------------

/// One term `amplitude · e^{i·frequency·t} · op`, optionally together with its
/// Hermitian conjugate.
#[derive(Debug, Clone)]
pub struct HamiltonianTerm {
    pub(crate) op: Monomial,
    pub amplitude: Complex64,
    /// Phase rotation rate (rad/s); 0 for static terms.
    pub frequency: f64,
    pub add_conjugate: bool,
}

/// Hamiltonian as a sum of harmonically rotating sparse terms. The dense
/// snapshot [`at`](TimeDependentHamiltonian::at) serves inspection and tests;
/// the integrators consume the term list directly.
#[derive(Debug, Clone)]
pub struct TimeDependentHamiltonian {
    space: SpaceDescriptor,
    terms: Vec<HamiltonianTerm>,
}

impl TimeDependentHamiltonian {
    pub(crate) fn new(space: SpaceDescriptor, terms: Vec<HamiltonianTerm>) -> Self {
        TimeDependentHamiltonian { space, terms }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.frequency == 0.0)
    }

    /// Largest |frequency| among the terms (rad/s).
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.frequency.abs()).fold(0.0, f64::max)
    }

    /// Dense operator snapshot H(t).
    pub fn at(&self, t: f64) -> Operator {
        let dim = self.space.dim();
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for term in &self.terms {
            let phase = Complex64::from_polar(1.0, term.frequency * t);
            let coef = term.amplitude * phase;
            for &(r, c, v) in &term.op.entries {
                m[(r as usize, c as usize)] += coef * v;
            }
            if term.add_conjugate {
                let coef = coef.conj();
                for &(r, c, v) in &term.op.entries {
                    m[(c as usize, r as usize)] += coef * v.conj();
                }
            }
        }
        Operator::new(self.space.clone(), m).expect("dimensions fixed by construction")
    }

    /// Terms with Hermitian-conjugate partners made explicit:
    /// (op, amplitude, frequency) triples whose sum is H(t).
    pub(crate) fn flattened(&self) -> Vec<(Monomial, Complex64, f64)> {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for term in &self.terms {
            out.push((term.op.clone(), term.amplitude, term.frequency));
            if term.add_conjugate {
                out.push((term.op.dagger(), term.amplitude.conj(), -term.frequency));
            }
        }
        out
    }
}

fn a_sigma_plus(space: &SpaceDescriptor, j: usize) -> Result<Monomial> {
    let coupler = space
        .coupler_slot()
        .ok_or_else(|| SimError::invalid("interaction Hamiltonian needs the coupler slot"))?;
    let lower = SlotOp::lower(space.mode_dims()[space.a_slot(j)]);
    Ok(Monomial::from_slot_ops(
        space,
        &[(space.a_slot(j), &lower), (coupler, &SlotOp::sigma_plus())],
    ))
}

fn b_sigma_plus(space: &SpaceDescriptor, k: usize) -> Result<Monomial> {
    let coupler = space
        .coupler_slot()
        .ok_or_else(|| SimError::invalid("interaction Hamiltonian needs the coupler slot"))?;
    let lower = SlotOp::lower(space.mode_dims()[space.b_slot(k)]);
    Ok(Monomial::from_slot_ops(
        space,
        &[(space.b_slot(k), &lower), (coupler, &SlotOp::sigma_plus())],
    ))
}

/// Interaction-picture Hamiltonian
/// H_I(t) = Σ_j (g_j e^{iΔ_aj t} â_j σ⁺ + μ_j e^{iΔ_bj t} b̂_j σ⁺ + h.c.),
/// with the B modes taken through the pairing map.
pub fn interaction_hamiltonian(
    params: &DeviceParams,
    space: &SpaceDescriptor,
) -> Result<TimeDependentHamiltonian> {
    params.validate()?;
    params.check_space(space)?;
    let mut terms = Vec::new();
    for j in 0..params.n_pairs() {
        terms.push(HamiltonianTerm {
            op: a_sigma_plus(space, j)?,
            amplitude: Complex64::new(params.pairs[j].g, 0.0),
            frequency: params.delta_a(j),
            add_conjugate: true,
        });
        let k = params.partner(j);
        terms.push(HamiltonianTerm {
            op: b_sigma_plus(space, k)?,
            amplitude: Complex64::new(params.pairs[k].mu, 0.0),
            frequency: params.delta_b_mode(k),
            add_conjugate: true,
        });
    }
    Ok(TimeDependentHamiltonian::new(space.clone(), terms))
}

/// Dense snapshot of [`interaction_hamiltonian`] at time `t`.
pub fn build_interaction_hamiltonian(
    params: &DeviceParams,
    space: &SpaceDescriptor,
    t: f64,
) -> Result<Operator> {
    Ok(interaction_hamiltonian(params, space)?.at(t))
}

/// Interaction Hamiltonian plus direct inter-resonator crosstalk: each entry
/// {m, n} of the crosstalk map contributes
/// g_mn (m̂ n̂⁺ e^{i(ω_n−ω_m)t} + h.c.); the phase is static between
/// equal-frequency modes.
pub fn crosstalk_hamiltonian(
    params: &DeviceParams,
    space: &SpaceDescriptor,
) -> Result<TimeDependentHamiltonian> {
    let base = interaction_hamiltonian(params, space)?;
    let mut terms = base.terms;
    for (&(m1, m2), &strength) in &params.crosstalk {
        let slot1 = m1.slot(space);
        let slot2 = m2.slot(space);
        let lower = SlotOp::lower(space.mode_dims()[slot1]);
        let raise = SlotOp::raise(space.mode_dims()[slot2]);
        terms.push(HamiltonianTerm {
            op: Monomial::from_slot_ops(space, &[(slot1, &lower), (slot2, &raise)]),
            amplitude: Complex64::new(strength, 0.0),
            frequency: params.mode_frequency(m2) - params.mode_frequency(m1),
            add_conjugate: true,
        });
    }
    Ok(TimeDependentHamiltonian::new(space.clone(), terms))
}

/// Dense snapshot of [`crosstalk_hamiltonian`] at time `t`.
pub fn build_crosstalk_hamiltonian(
    params: &DeviceParams,
    space: &SpaceDescriptor,
    t: f64,
) -> Result<Operator> {
    Ok(crosstalk_hamiltonian(params, space)?.at(t))
}

/// Effective Hamiltonian pieces (H₀, H_int): H₀ carries the ac-Stark shifts on
/// |e⟩⟨e| and |g⟩⟨g|; H_int = Σ_j λ_j (â_j b̂_j⁺ e^{i(Δ_aj−Δ_bj)t} + h.c.)
/// (|e⟩⟨e| − |g⟩⟨g|), which is static for equal detunings.
pub fn effective_hamiltonians(
    params: &DeviceParams,
    space: &SpaceDescriptor,
) -> Result<(TimeDependentHamiltonian, TimeDependentHamiltonian)> {
    params.validate()?;
    params.check_space(space)?;
    let coupler = space
        .coupler_slot()
        .ok_or_else(|| SimError::invalid("effective Hamiltonian needs the coupler slot"))?;
    let eff = EffectiveParams::from_params(params);

    // aa⁺ on the truncated mode: n+1 below the top level, 0 at the top
    let truncated_aadag = |n: usize, dim: usize| -> f64 {
        if n + 1 < dim {
            (n + 1) as f64
        } else {
            0.0
        }
    };
    let h0_weight = |occ: &[usize]| -> f64 {
        let excited = occ[coupler] == 1;
        let mut w = 0.0;
        for j in 0..params.n_pairs() {
            let sa = space.a_slot(j);
            let sb = space.b_slot(params.partner(j));
            if excited {
                w += eff.stark_a[j] * truncated_aadag(occ[sa], space.mode_dims()[sa]);
                w += eff.stark_b[j] * truncated_aadag(occ[sb], space.mode_dims()[sb]);
            } else {
                w -= eff.stark_a[j] * occ[sa] as f64;
                w -= eff.stark_b[j] * occ[sb] as f64;
            }
        }
        w
    };
    let h0 = TimeDependentHamiltonian::new(
        space.clone(),
        vec![HamiltonianTerm {
            op: Monomial::diagonal_from(space, h0_weight),
            amplitude: Complex64::ONE,
            frequency: 0.0,
            add_conjugate: false,
        }],
    );

    let mut hint_terms = Vec::new();
    for j in 0..params.n_pairs() {
        let k = params.partner(j);
        let lower_a = SlotOp::lower(space.mode_dims()[space.a_slot(j)]);
        let raise_b = SlotOp::raise(space.mode_dims()[space.b_slot(k)]);
        hint_terms.push(HamiltonianTerm {
            op: Monomial::from_slot_ops(
                space,
                &[
                    (space.a_slot(j), &lower_a),
                    (space.b_slot(k), &raise_b),
                    (coupler, &SlotOp::sigma_z()),
                ],
            ),
            amplitude: Complex64::new(eff.lambda[j], 0.0),
            frequency: params.delta_a(j) - params.pair_delta_b(j),
            add_conjugate: true,
        });
    }
    let hint = TimeDependentHamiltonian::new(space.clone(), hint_terms);
    Ok((h0, hint))
}

/// Dense snapshot of [`effective_hamiltonians`] at t = 0.
pub fn build_effective_hamiltonians(
    params: &DeviceParams,
    space: &SpaceDescriptor,
) -> Result<(Operator, Operator)> {
    let (h0, hint) = effective_hamiltonians(params, space)?;
    Ok((h0.at(0.0), hint.at(0.0)))
}

/// Swap Hamiltonian H_e = −Σ_j λ_j (â_j b̂_j⁺ + â_j⁺ b̂_j) on a space with or
/// without the coupler slot (identity there when present).
pub fn swap_hamiltonian(
    params: &DeviceParams,
    space: &SpaceDescriptor,
) -> Result<TimeDependentHamiltonian> {
    params.validate()?;
    params.check_space(space)?;
    let eff = EffectiveParams::from_params(params);
    swap_hamiltonian_with(space, &eff.lambda, &params.pairing)
}

/// [`swap_hamiltonian`] from explicit λ_j (identity pairing); zero entries
/// contribute nothing.
pub fn swap_hamiltonian_from_lambdas(
    space: &SpaceDescriptor,
    lambdas: &[f64],
) -> Result<TimeDependentHamiltonian> {
    let pairing: Vec<usize> = (0..lambdas.len()).collect();
    swap_hamiltonian_with(space, lambdas, &pairing)
}

pub(crate) fn swap_hamiltonian_with(
    space: &SpaceDescriptor,
    lambdas: &[f64],
    pairing: &[usize],
) -> Result<TimeDependentHamiltonian> {
    if lambdas.len() != space.n_pairs() {
        return Err(SimError::mismatch(format!(
            "{} λ values for a space with {} pairs",
            lambdas.len(),
            space.n_pairs()
        )));
    }
    let mut terms = Vec::new();
    for (j, &l) in lambdas.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        let k = pairing[j];
        let lower_a = SlotOp::lower(space.mode_dims()[space.a_slot(j)]);
        let raise_b = SlotOp::raise(space.mode_dims()[space.b_slot(k)]);
        terms.push(HamiltonianTerm {
            op: Monomial::from_slot_ops(
                space,
                &[(space.a_slot(j), &lower_a), (space.b_slot(k), &raise_b)],
            ),
            amplitude: Complex64::new(-l, 0.0),
            frequency: 0.0,
            add_conjugate: true,
        });
    }
    Ok(TimeDependentHamiltonian::new(space.clone(), terms))
}

/// Dense snapshot of [`swap_hamiltonian`].
pub fn build_swap_hamiltonian(
    params: &DeviceParams,
    space: &SpaceDescriptor,
) -> Result<Operator> {
    Ok(swap_hamiltonian(params, space)?.at(0.0))
}

// ---------------------------------------------------------------------------
// Detuning matching
// ---------------------------------------------------------------------------

/// Which root of the detuning-matching quadratic to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchingRoot {
    /// The printed "+" branch.
    #[default]
    Plus,
    /// The alternative "−" branch, kept accessible for exploration.
    Minus,
}

/// Solve Δ_b = [Δ_a² + g² ± √((Δ_a² + g²)² − 4Δ_a²μ²)] / (2Δ_a), the B-side
/// detuning that makes the effective pair interaction time-independent for
/// g ≠ μ. Returns an error when no real matching exists.
pub fn solve_detuning_matching(g: f64, mu: f64, delta_a: f64) -> Result<f64> {
    solve_detuning_matching_root(g, mu, delta_a, MatchingRoot::Plus)
}

/// [`solve_detuning_matching`] with an explicit root choice.
pub fn solve_detuning_matching_root(
    g: f64,
    mu: f64,
    delta_a: f64,
    root: MatchingRoot,
) -> Result<f64> {
    if delta_a == 0.0 {
        return Err(SimError::invalid("Δ_a must be nonzero"));
    }
    // g = μ admits Δ_b = Δ_a exactly; in the dispersive regime (Δ_a² ≥ g²)
    // this is the "+" branch, returned without rounding through the radical
    if g == mu && root == MatchingRoot::Plus && delta_a * delta_a >= g * g {
        return Ok(delta_a);
    }
    let s = delta_a * delta_a + g * g;
    let disc = s * s - 4.0 * delta_a * delta_a * mu * mu;
    if disc < 0.0 {
        return Err(SimError::invalid(format!(
            "no real detuning matching: discriminant {disc:.6e} < 0 \
             (μ too large relative to Δ_a, g)"
        )));
    }
    let sq = disc.sqrt();
    let num = match root {
        MatchingRoot::Plus => s + sq,
        MatchingRoot::Minus => s - sq,
    };
    Ok(num / (2.0 * delta_a))
}

/// Residual of the matching identity g²/Δ_a − μ²/Δ_b + (Δ_a − Δ_b), scaled by
/// the largest participating magnitude. Zero (to rounding) when `delta_b`
/// comes from [`solve_detuning_matching`].
pub fn matching_residual(g: f64, mu: f64, delta_a: f64, delta_b: f64) -> f64 {
    let lhs = g * g / delta_a - mu * mu / delta_b;
    let rhs = -(delta_a - delta_b);
    let scale = [lhs.abs(), rhs.abs(), delta_a.abs(), delta_b.abs()]
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
    (lhs - rhs).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{
        commutator, coupler_sigma_plus, coupler_sigma_z, make_space, mode_annihilator,
        mode_number, total_excitation_operator,
    };
    use std::f64::consts::TAU;

    pub(crate) fn ghz(v: f64) -> f64 {
        TAU * v * 1e9
    }

    pub(crate) fn mhz(v: f64) -> f64 {
        TAU * v * 1e6
    }

    fn pair(omega_ghz: f64, g_mhz: f64, mu_mhz: f64) -> PairParams {
        PairParams {
            omega_a: ghz(omega_ghz),
            omega_b: ghz(omega_ghz),
            g: mhz(g_mhz),
            mu: mhz(mu_mhz),
            kappa_a: 1e6,
            kappa_b: 1e6,
        }
    }

    pub(crate) fn transfer_like_params() -> DeviceParams {
        DeviceParams {
            omega_c: ghz(6.0),
            pairs: vec![pair(5.45, 100.0, 100.0), pair(6.55, 100.0, 100.0)],
            gamma: 1.0 / 3e-6,
            gamma_phi: 1.0 / 3e-6,
            crosstalk: BTreeMap::new(),
            pairing: vec![0, 1],
        }
    }

    pub(crate) fn exchange_like_params() -> DeviceParams {
        DeviceParams {
            omega_c: ghz(6.0),
            pairs: vec![pair(5.07, 100.0, 100.0), pair(6.93, 100.0, 100.0)],
            gamma: 1.0 / 3e-6,
            gamma_phi: 1.0 / 3e-6,
            crosstalk: BTreeMap::new(),
            pairing: vec![0, 1],
        }
    }

    #[test]
    fn transfer_preset_detunings_give_alpha_5_5() {
        let p = transfer_like_params();
        assert!((p.delta_a(0) - ghz(0.55)).abs() < 1e-3);
        assert!((p.delta_a(1) + ghz(0.55)).abs() < 1e-3);
        assert!((p.nominal_alpha() - 5.5).abs() < 1e-12);
    }

    #[test]
    fn interaction_matches_hand_built_n1_t0() {
        let space = make_space(1, 3).unwrap();
        let mut p = transfer_like_params();
        p.pairs.truncate(1);
        p.pairing = vec![0];
        let h = build_interaction_hamiltonian(&p, &space, 0.0).unwrap();
        assert!(h.is_hermitian(1e-12));

        let g = p.pairs[0].g;
        let a = mode_annihilator(&space, 0).unwrap();
        let b = mode_annihilator(&space, 1).unwrap();
        let sp = coupler_sigma_plus(&space).unwrap();
        let half = &(&a + &b) * &sp;
        let expect = &half.scale(g.into()) + &half.scale(g.into()).dagger();
        assert!(h.max_abs_diff(&expect) < 1e-9);
    }

    #[test]
    fn interaction_norm_is_time_independent() {
        let space = make_space(2, 3).unwrap();
        let p = transfer_like_params();
        let td = interaction_hamiltonian(&p, &space).unwrap();
        let n0 = td.at(0.0).spectral_norm_hermitian();
        for &t in &[1e-9, 7e-9] {
            let nt = td.at(t).spectral_norm_hermitian();
            assert!(
                (nt - n0).abs() < 1e-6 * n0,
                "spectral norm drifted: {n0} vs {nt} at t={t}"
            );
        }
    }

    #[test]
    fn interaction_is_hermitian_and_conserves_excitation() {
        let space = make_space(2, 3).unwrap();
        let p = exchange_like_params();
        let td = interaction_hamiltonian(&p, &space).unwrap();
        let n_tot = total_excitation_operator(&space);
        for &t in &[0.0, 3.7e-10, 1.1e-9, 6.2e-9] {
            let h = td.at(t);
            assert!(h.is_hermitian(1e-12 * h.spectral_norm_hermitian()));
            let c = commutator(&h, &n_tot);
            assert!(c.max_abs_diff(&Operator::zeros(space.clone())) < 1e-6);
        }
    }

    #[test]
    fn isolation_exchange_preset_passes_margin_one() {
        let p = exchange_like_params();
        let report = check_isolation(&p, 1.0);
        assert!(report.pass, "{}", report.render());
        // Δ₁ = −Δ₂ cross separation: |2Δ|/(2/|Δ|) = Δ² → margin α² = 86.49
        let aa = report
            .cross
            .iter()
            .find(|c| c.mode_1 == ModeAddress::A(0) && c.mode_2 == ModeAddress::A(1))
            .unwrap();
        assert!((aa.margin - 9.3 * 9.3).abs() < 1e-6);
        assert!(report.worst_margin >= 9.3 - 1e-12);
    }

    #[test]
    fn isolation_equal_detunings_fail() {
        let mut p = exchange_like_params();
        p.pairs[1].omega_a = p.pairs[0].omega_a;
        p.pairs[1].omega_b = p.pairs[0].omega_b;
        let report = check_isolation(&p, 1.0);
        assert!(!report.pass);
        let zero = report
            .cross
            .iter()
            .find(|c| c.mode_1 == ModeAddress::A(0) && c.mode_2 == ModeAddress::A(1))
            .unwrap();
        assert_eq!(zero.margin, 0.0);
    }

    #[test]
    fn isolation_single_pair_has_no_cross_checks() {
        let mut p = transfer_like_params();
        p.pairs.truncate(1);
        p.pairing = vec![0];
        let report = check_isolation(&p, 1.0);
        assert!(report.cross.is_empty());
        assert_eq!(report.dispersive.len(), 2);
        assert!(report.pass);
    }

    #[test]
    fn isolation_margins_are_finite_for_opposite_detunings() {
        let p = exchange_like_params();
        let report = check_isolation(&p, 10.0);
        for c in &report.cross {
            assert!(c.margin.is_finite());
        }
        // per-mode |Δ|/g = 9.3 < 10 → the strict default margin fails
        assert!(!report.pass);
    }

    #[test]
    fn effective_lambda_value() {
        let p = transfer_like_params();
        let eff = EffectiveParams::from_params(&p);
        let expect = mhz(100.0 * 100.0 / 550.0);
        assert!((eff.lambda[0] - expect).abs() < 1e-12 * expect.abs());
        assert!((eff.lambda[1] + expect).abs() < 1e-12 * expect.abs());
        assert!((eff.uniform_lambda().unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn effective_pieces_commute_with_sigma_z() {
        let space = make_space(2, 3).unwrap();
        let p = transfer_like_params();
        let (h0, hint) = build_effective_hamiltonians(&p, &space).unwrap();
        let sz = coupler_sigma_z(&space).unwrap();
        let zero = Operator::zeros(space.clone());
        assert!(commutator(&h0, &sz).max_abs_diff(&zero) < 1e-9);
        assert!(commutator(&hint, &sz).max_abs_diff(&zero) < 1e-9);
        assert!(h0.is_hermitian(1e-9));
        assert!(hint.is_hermitian(1e-9));
    }

    #[test]
    fn hint_ground_block_reproduces_swap_hamiltonian() {
        let space = make_space(2, 3).unwrap();
        let p = transfer_like_params();
        let (_, hint) = build_effective_hamiltonians(&p, &space).unwrap();
        let he = build_swap_hamiltonian(&p, &space).unwrap();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                let gi = space.occupations_of(i).last() == Some(&0);
                let gj = space.occupations_of(j).last() == Some(&0);
                if gi && gj {
                    assert!(
                        (hint.matrix()[(i, j)] - he.matrix()[(i, j)]).norm() < 1e-9,
                        "|g⟩ block of H_int must equal H_e"
                    );
                }
            }
        }
    }

    #[test]
    fn equal_detuning_lambda_agrees_with_general_formula_exactly() {
        let p = transfer_like_params();
        let eff = EffectiveParams::from_params(&p);
        for j in 0..2 {
            let expect = p.pairs[j].g * p.pairs[j].mu / p.delta_a(j);
            assert_eq!(eff.lambda[j], expect);
        }
    }

    #[test]
    fn swap_commutes_with_mode_excitation() {
        let space = make_space(2, 3).unwrap();
        let p = exchange_like_params();
        let he = build_swap_hamiltonian(&p, &space).unwrap();
        let mut n = Operator::zeros(space.clone());
        for m in 0..space.n_modes() {
            n = &n + &mode_number(&space, m).unwrap();
        }
        assert!(commutator(&he, &n).max_abs_diff(&Operator::zeros(space.clone())) < 1e-6);
    }

    #[test]
    fn zero_lambdas_give_zero_swap_hamiltonian() {
        let space = make_space(2, 3).unwrap();
        let he = swap_hamiltonian_from_lambdas(&space, &[0.0, 0.0]).unwrap();
        assert_eq!(he.n_terms(), 0);
        assert!(he.at(0.0).max_abs_diff(&Operator::zeros(space)) == 0.0);
    }

    #[test]
    fn detuning_matching_equal_couplings_is_exact() {
        let g = mhz(100.0);
        let da = mhz(500.0);
        assert_eq!(solve_detuning_matching(g, g, da).unwrap(), da);
        let da = -mhz(340.0);
        assert_eq!(solve_detuning_matching(g, g, da).unwrap(), da);
    }

    #[test]
    fn detuning_matching_satisfies_identity() {
        let g = mhz(100.0);
        let mu = mhz(80.0);
        let da = mhz(500.0);
        let db = solve_detuning_matching(g, mu, da).unwrap();
        assert!(matching_residual(g, mu, da, db) < 1e-12);
        // the minus root solves the identity as well
        let db = solve_detuning_matching_root(g, mu, da, MatchingRoot::Minus).unwrap();
        assert!(matching_residual(g, mu, da, db) < 1e-12);
    }

    #[test]
    fn detuning_matching_rejects_negative_discriminant() {
        let g = mhz(100.0);
        let mu = ghz(2.0);
        let da = mhz(100.0);
        assert!(solve_detuning_matching(g, mu, da).is_err());
    }

    #[test]
    fn crosstalk_reduces_to_interaction_when_empty() {
        let space = make_space(2, 3).unwrap();
        let p = exchange_like_params();
        for &t in &[0.0, 2.3e-9] {
            let h = build_interaction_hamiltonian(&p, &space, t).unwrap();
            let hx = build_crosstalk_hamiltonian(&p, &space, t).unwrap();
            assert!(hx.max_abs_diff(&h) == 0.0);
        }
    }

    #[test]
    fn crosstalk_difference_scales_with_fraction() {
        let space = make_space(2, 3).unwrap();
        let p = exchange_like_params();
        let p1 = p.with_uniform_crosstalk(0.01);
        let p2 = p.with_uniform_crosstalk(0.02);
        assert_eq!(p1.crosstalk.len(), 6);
        let h = build_interaction_hamiltonian(&p, &space, 0.0).unwrap();
        let d1 = &build_crosstalk_hamiltonian(&p1, &space, 0.0).unwrap() - &h;
        let d2 = &build_crosstalk_hamiltonian(&p2, &space, 0.0).unwrap() - &h;
        let n1 = d1.spectral_norm_hermitian();
        let n2 = d2.spectral_norm_hermitian();
        assert!(n1 > 0.0);
        assert!((n2 / n1 - 2.0).abs() < 1e-9);
        assert!(build_crosstalk_hamiltonian(&p1, &space, 1.3e-9).unwrap().is_hermitian(1e-3));
    }

    #[test]
    fn equal_frequency_crosstalk_term_is_static() {
        let space = make_space(2, 3).unwrap();
        let p = exchange_like_params().with_uniform_crosstalk(0.01);
        // a1 → b1 element is time-independent (ω_a1 = ω_b1), a1 → a2 rotates
        let i_a1 = space.index_of(&[1, 0, 0, 0, 0]).unwrap();
        let i_b1 = space.index_of(&[0, 0, 1, 0, 0]).unwrap();
        let i_a2 = space.index_of(&[0, 1, 0, 0, 0]).unwrap();
        let h0 = build_crosstalk_hamiltonian(&p, &space, 0.0).unwrap();
        let h1 = build_crosstalk_hamiltonian(&p, &space, 0.83e-9).unwrap();
        let static_0 = h0.matrix()[(i_b1, i_a1)];
        let static_1 = h1.matrix()[(i_b1, i_a1)];
        assert!((static_0 - static_1).norm() < 1e-9 * static_0.norm());
        let rot_0 = h0.matrix()[(i_a2, i_a1)];
        let rot_1 = h1.matrix()[(i_a2, i_a1)];
        assert!((rot_0 - rot_1).norm() > 0.1 * rot_0.norm());
    }

    #[test]
    fn crosstalk_rejects_unknown_mode() {
        let mut p = exchange_like_params();
        p.crosstalk.insert((ModeAddress::A(0), ModeAddress::B(7)), 1e6);
        assert!(p.validate().is_err());
    }

    #[test]
    fn with_alpha_rebuilds_detunings() {
        let p = exchange_like_params();
        let q = p.with_alpha(7.25).unwrap();
        assert!((q.delta_a(0) - 7.25 * q.pairs[0].g).abs() < 1e-6);
        assert!((q.delta_a(1) + 7.25 * q.pairs[1].g).abs() < 1e-6);
        assert_eq!(q.delta_a(0), q.delta_b_mode(0));
        assert_eq!(q.delta_a(1), q.delta_b_mode(1));
    }

    #[test]
    fn pairing_must_be_bijection() {
        let mut p = exchange_like_params();
        p.pairing = vec![0, 0];
        assert!(p.validate().is_err());
        p.pairing = vec![1, 0];
        assert!(p.validate().is_ok());
    }
}
