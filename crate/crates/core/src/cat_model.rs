//! Instantaneous measurement of a bit by a bit-valued apparatus.
//!
//! Pair amplitudes `χ(σ, τ)` are stored at index `2σ + τ` (system first,
//! apparatus second), matching [`Operator::kron`]. The apparatus pointer
//! basis `δ_τ` is the computational basis and `σ + τ` is the sum mod 2.

use crate::error::{Error, Result};
use crate::statespace::{von_neumann_entropy, DensityMatrix, LogBase, Operator, StateVector, C64, STRUCTURE_TOL, ZERO};

/// Mass allowed on `σ ≠ τ` before a pair amplitude counts as not
/// classically correlated.
pub const OFF_BLOCK_TOL: f64 = 1e-10;

/// Smallest probability that can be conditioned on.
pub const MIN_PROBABILITY: f64 = 1e-14;

/// Amplitude `χ(σ, τ)` on `{0,1}²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAmplitude(StateVector);

impl PairAmplitude {
    pub fn new(v: StateVector) -> Result<Self> {
        if v.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: v.dim() });
        }
        Ok(PairAmplitude(v))
    }

    pub fn get(&self, sigma: usize, tau: usize) -> C64 {
        self.0.get(2 * sigma + tau)
    }

    pub fn vector(&self) -> &StateVector {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

fn check_bit(psi: &StateVector) -> Result<()> {
    if psi.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: psi.dim() });
    }
    Ok(())
}

/// Pointer state `δ_τ`.
pub fn delta(tau: usize) -> StateVector {
    StateVector::basis(2, tau)
}

/// `E(τ) = P_{δ_τ}`.
pub fn pointer_projector(tau: usize) -> Operator {
    delta(tau).projector()
}

/// Measurement interaction `χ(σ, τ) = ψ(σ)φ(τ ⊕ σ)`.
pub fn interact(psi: &StateVector, phi: &StateVector) -> Result<PairAmplitude> {
    check_bit(psi)?;
    check_bit(phi)?;
    let mut amps = [ZERO; 4];
    for sigma in 0..2 {
        for tau in 0..2 {
            amps[2 * sigma + tau] = psi.get(sigma) * phi.get(tau ^ sigma);
        }
    }
    PairAmplitude::new(StateVector::new(&amps)?)
}

/// Decohered compound state `ϱ̂ = Σ_τ ϱ(τ) ⊗ P_{δ_τ}` with blocks
/// `ϱ(τ)_{σσ'} = χ(σ,τ)χ(σ',τ)*`; for the cat scenario `ϱ(τ) = π(τ)P_{δ_τ}`.
///
/// Fails if more than [`OFF_BLOCK_TOL`] of the mass sits on `σ ≠ τ`.
pub fn compound_density(chi: &PairAmplitude) -> Result<DensityMatrix> {
    let off: f64 = (0..2).map(|s| chi.get(s, 1 - s).norm_sqr()).sum();
    if off > OFF_BLOCK_TOL {
        return Err(Error::InvalidArgument(format!(
            "pair amplitude is not classically correlated (mass {off:.3e} on σ ≠ τ)"
        )));
    }
    let mut rho = Operator::zeros(4);
    for tau in 0..2 {
        for s in 0..2 {
            for s2 in 0..2 {
                rho[(2 * s + tau, 2 * s2 + tau)] = chi.get(s, tau) * chi.get(s2, tau).conj();
            }
        }
    }
    DensityMatrix::new_unnormalized(rho)
}

/// Trace over the apparatus factor: `ρ_{σσ'} = Σ_τ ϱ̂_{(σ,τ),(σ',τ)}`.
pub fn partial_trace_system(rho_hat: &DensityMatrix) -> Result<DensityMatrix> {
    if rho_hat.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: rho_hat.dim() });
    }
    let m = rho_hat.op();
    let mut out = Operator::zeros(2);
    for s in 0..2 {
        for s2 in 0..2 {
            out[(s, s2)] = m[(2 * s, 2 * s2)] + m[(2 * s + 1, 2 * s2 + 1)];
        }
    }
    DensityMatrix::new_unnormalized(out)
}

/// Apparatus block `ϱ(τ)` of a compound state.
fn block(rho_hat: &Operator, tau: usize) -> Operator {
    let mut b = Operator::zeros(2);
    for s in 0..2 {
        for s2 in 0..2 {
            b[(s, s2)] = rho_hat[(2 * s + tau, 2 * s2 + tau)];
        }
    }
    b
}

/// Outcome probability `π(τ) = Tr ϱ(τ)`.
pub fn outcome_probability(rho_hat: &DensityMatrix, tau: usize) -> Result<f64> {
    if rho_hat.dim() != 4 || tau > 1 {
        return Err(Error::InvalidArgument("need a dim-4 compound state and τ ∈ {0, 1}".into()));
    }
    Ok(block(rho_hat.op(), tau).trace().re)
}

/// Posterior `ρ_τ = ϱ(τ)/π(τ)`.
pub fn bayes_condition(rho_hat: &DensityMatrix, tau: usize) -> Result<DensityMatrix> {
    let p = outcome_probability(rho_hat, tau)?;
    if p <= MIN_PROBABILITY {
        return Err(Error::ZeroProbability(p));
    }
    DensityMatrix::new_unnormalized(block(rho_hat.op(), tau).scale_re(1.0 / p))
}

/// Entropies of the compound and reduced states, in bits.
pub fn cat_entropies(psi: &StateVector) -> Result<(f64, f64)> {
    let rho_hat = compound_density(&interact(psi, &delta(0))?)?;
    let rho = partial_trace_system(&rho_hat)?;
    Ok((von_neumann_entropy(rho_hat.op(), LogBase::Bits)?, von_neumann_entropy(rho.op(), LogBase::Bits)?))
}

fn check_projector(e: &Operator) -> Result<()> {
    let dev = e.projector_deviation();
    if dev > STRUCTURE_TOL {
        return Err(Error::NotProjector(dev));
    }
    Ok(())
}

fn check_unit(psi: &StateVector) -> Result<()> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("state must be normalized, ‖ψ‖ = {n}")));
    }
    Ok(())
}

/// Result of a yes/no projective measurement without selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOutcome {
    /// `EP_ψE + FP_ψF`.
    pub mixed: DensityMatrix,
    /// `‖Eψ‖²`.
    pub lambda: f64,
    /// `‖Fψ‖²`.
    pub mu: f64,
}

/// Non-selective projection with `F = I − E`.
pub fn projection_postulate(psi: &StateVector, e: &Operator) -> Result<ProjectionOutcome> {
    if e.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: psi.dim(), got: e.dim() });
    }
    check_projector(e)?;
    check_unit(psi)?;
    let f = Operator::identity(e.dim()) - *e;
    let p = psi.projector();
    let mixed = DensityMatrix::new(*e * p * *e + f * p * f)?;
    Ok(ProjectionOutcome { mixed, lambda: e.apply(psi).norm_sqr(), mu: f.apply(psi).norm_sqr() })
}

/// Selective projection `ψ ↦ Eψ/‖Eψ‖`.
pub fn luders_project(psi: &StateVector, e: &Operator) -> Result<StateVector> {
    if e.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: psi.dim(), got: e.dim() });
    }
    check_projector(e)?;
    let v = e.apply(psi);
    let n = v.norm();
    if n <= MIN_PROBABILITY {
        return Err(Error::ZeroProbability(n * n));
    }
    Ok(v.scale(C64::from(1.0 / n)))
}

/// One outcome `y` of a reduction family: operator `V(y)` and weight `μ(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionElement {
    pub label: String,
    pub v: Operator,
    pub mu: f64,
}

/// Finite family with `Σ_y μ(y)V(y)†V(y) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionFamily {
    elements: Vec<ReductionElement>,
}

impl ReductionFamily {
    pub fn new(elements: Vec<ReductionElement>) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::InvalidArgument("empty reduction family".into()))?;
        let n = first.v.dim();
        let mut sum = Operator::zeros(n);
        for el in &elements {
            if el.v.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: el.v.dim() });
            }
            if !(el.mu.is_finite() && el.mu > 0.0) {
                return Err(Error::InvalidArgument(format!("weight μ({}) = {} must be positive", el.label, el.mu)));
            }
            sum = sum + (el.v.adjoint() * el.v).scale_re(el.mu);
        }
        let dev = sum.max_abs_diff(&Operator::identity(n));
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!("Σ μ V†V deviates from I by {dev:.3e}")));
        }
        Ok(ReductionFamily { elements })
    }

    pub fn elements(&self) -> &[ReductionElement] {
        &self.elements
    }

    /// Pointer projectors `V(τ) = E(τ)`, `μ = 1`.
    pub fn pointer() -> Self {
        let elements = (0..2)
            .map(|tau| ReductionElement { label: tau.to_string(), v: pointer_projector(tau), mu: 1.0 })
            .collect();
        ReductionFamily::new(elements).expect("projectors resolve the identity")
    }

    /// `V(±) = (I ± ½σ_x)/√2.5`, `μ = 1`.
    pub fn unsharp_x() -> Self {
        let c = 2.5f64.sqrt().recip();
        let half_x = crate::statespace::sigma_x().scale_re(0.5);
        let id = Operator::identity(2);
        let elements = vec![
            ReductionElement { label: "+".into(), v: (id + half_x).scale_re(c), mu: 1.0 },
            ReductionElement { label: "-".into(), v: (id - half_x).scale_re(c), mu: 1.0 },
        ];
        ReductionFamily::new(elements).expect("(I ± σx/2)²/2.5 sums to I")
    }
}

/// Probability `f(y)μ(y) = μ(y)‖V(y)ψ‖²` and posterior `V(y)ψ/‖V(y)ψ‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionOutcome {
    pub label: String,
    pub probability: f64,
    /// `None` for outcomes of probability below [`MIN_PROBABILITY`].
    pub posterior: Option<StateVector>,
}

pub fn reduction_apply(family: &ReductionFamily, psi: &StateVector) -> Result<Vec<ReductionOutcome>> {
    check_unit(psi)?;
    family
        .elements
        .iter()
        .map(|el| {
            if el.v.dim() != psi.dim() {
                return Err(Error::DimensionMismatch { expected: el.v.dim(), got: psi.dim() });
            }
            let v = el.v.apply(psi);
            let n2 = v.norm_sqr();
            let probability = el.mu * n2;
            let posterior = (probability > MIN_PROBABILITY).then(|| v.scale(C64::from(1.0 / n2.sqrt())));
            Ok(ReductionOutcome { label: el.label.clone(), probability, posterior })
        })
        .collect()
}

/// Observable `G = diag(g(σ ⊕ τ))` on the pair space.
pub fn cat_observable(g: [C64; 2]) -> Operator {
    let mut d = [ZERO; 4];
    for s in 0..2 {
        for t in 0..2 {
            d[2 * s + t] = g[s ^ t];
        }
    }
    Operator::diagonal(&d).expect("dimension 4")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondemolitionReport {
    /// `‖[F⊗I, G]χ₀‖` with `χ₀ = ψ ⊗ δ₀`.
    pub on_initial: f64,
    /// Operator norm `‖[F⊗I, G]‖`.
    pub full: f64,
}

/// Commutator of a system observable `F` with the pointer observable `G`,
/// on the initial pair state and as an operator.
pub fn nondemolition_check(g: [C64; 2], f: &Operator, psi: &StateVector) -> Result<NondemolitionReport> {
    check_bit(psi)?;
    if f.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: f.dim() });
    }
    let big_f = f.kron(&Operator::identity(2))?;
    let big_g = cat_observable(g);
    let comm = big_f.commutator(&big_g)?;
    let chi0 = psi.kron(&delta(0))?;
    Ok(NondemolitionReport { on_initial: comm.apply(&chi0).norm(), full: comm.spectral_norm() })
}

/// `X₀ = Σ_τ E(τ)FE(τ)` and `Y₀ = Σ_τ g(τ)E(τ)`.
pub fn reduced_operators(f: &Operator, g: [C64; 2]) -> Result<(Operator, Operator)> {
    if f.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: f.dim() });
    }
    let mut x0 = Operator::zeros(2);
    let mut y0 = Operator::zeros(2);
    for (tau, gt) in g.iter().enumerate() {
        let e = pointer_projector(tau);
        x0 = x0 + e * *f * e;
        y0 = y0 + e.scale(*gt);
    }
    Ok((x0, y0))
}
