//! Euler–Maruyama integrators for diffusive (Wiener) observation.

use super::{check_dim, check_normalized, DiffusionModel, StatePath, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoisePath, TimeGrid};
use crate::statespace::{DensityMatrix, Operator, StateVector};

/// How the noise path drives a nonlinear (posterior) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusiveDrive {
    /// Increments are the observation `dy`, a Wiener process under the
    /// input measure; the recorded weight is the likelihood.
    Observation,
    /// Increments are the innovation `dw̃`, a Wiener process under the
    /// output measure; the observation is reconstructed as
    /// `dy = dw̃ + 2Re⟨ψ|Lψ⟩dt`.
    Innovation,
}

/// One step `χ ← (I − ½L†LΔt + LΔy)·U χ` with `U = exp(−iHΔt/ħ)`.
///
/// The Hamiltonian part is propagated exactly so that `L = 0` is unitary;
/// the dissipative and noise parts are Euler–Maruyama.
struct StepFactory {
    u: Operator,
    damp_u: Operator,
    l_u: Operator,
    dt: f64,
}

impl StepFactory {
    fn new(model: &DiffusionModel, dt: f64) -> Self {
        let u = model.h.scale(crate::statespace::C64::new(0.0, -dt / model.hbar)).expm();
        let damp = (model.l.adjoint() * model.l).scale_re(0.5);
        StepFactory { u, damp_u: damp * u, l_u: model.l * u, dt }
    }

    fn step(&self, dy: f64) -> Operator {
        self.u - self.damp_u.scale_re(self.dt) + self.l_u.scale_re(dy)
    }
}

fn mean_l(l: &Operator, psi: &StateVector) -> f64 {
    2.0 * psi.inner(&l.apply(psi)).re
}

/// Linear equation `dχ + Kχ dt = Lχ dy`, one step
/// `χ ← (I − ½L†LΔt + LΔy)e^{−iHΔt/ħ}χ` per grid interval, `Δy` taken from
/// `noise`.
pub fn simulate_linear_diffusive(
    model: &DiffusionModel,
    chi0: &StateVector,
    grid: &TimeGrid,
    noise: &NoisePath,
) -> Result<TrajectoryRecord> {
    check_dim(model.dim(), chi0.dim())?;
    noise.check_grid(grid, NoiseKind::Wiener)?;
    let dt = grid.dt();
    let steps = StepFactory::new(model, dt);
    let mut chi = *chi0;
    let mut states = Vec::with_capacity(grid.len());
    let mut weights = Vec::with_capacity(grid.len());
    let mut innovations = Vec::with_capacity(grid.steps());
    states.push(chi);
    weights.push(chi.norm_sqr());
    for (step, &dy) in noise.increments.iter().enumerate() {
        let n2 = chi.norm_sqr();
        let m = if n2 > 0.0 { mean_l(&model.l, &chi) / n2 } else { 0.0 };
        innovations.push(dy - m * dt);
        chi = steps.step(dy).apply(&chi);
        if !chi.is_finite() {
            return Err(Error::NonFinite { step, what: "linear diffusive state".into() });
        }
        states.push(chi);
        weights.push(chi.norm_sqr());
    }
    Ok(TrajectoryRecord {
        grid: *grid,
        states: StatePath::Vectors(states),
        normalized: false,
        weights,
        observations: noise.increments.clone(),
        innovations,
        intensity: Vec::new(),
        jump_times: Vec::new(),
        stream: noise.stream,
    })
}

/// Posterior equation `dψ + K̃ψ dt = L̃ψ dw̃`, discretized as the normalized
/// linear step driven by the observation increment.
///
/// With [`DiffusiveDrive::Observation`] the path equals the normalized output
/// of [`simulate_linear_diffusive`] on the same increments and the weight
/// path equals its `‖χ‖²`.
pub fn simulate_nonlinear_diffusive(
    model: &DiffusionModel,
    psi0: &StateVector,
    grid: &TimeGrid,
    noise: &NoisePath,
    drive: DiffusiveDrive,
) -> Result<TrajectoryRecord> {
    check_dim(model.dim(), psi0.dim())?;
    check_normalized(psi0)?;
    noise.check_grid(grid, NoiseKind::Wiener)?;
    let dt = grid.dt();
    let steps = StepFactory::new(model, dt);
    let mut psi = *psi0;
    let mut weight = 1.0;
    let mut states = Vec::with_capacity(grid.len());
    let mut weights = Vec::with_capacity(grid.len());
    let mut observations = Vec::with_capacity(grid.steps());
    let mut innovations = Vec::with_capacity(grid.steps());
    states.push(psi);
    weights.push(weight);
    for (step, &dx) in noise.increments.iter().enumerate() {
        let m = mean_l(&model.l, &psi);
        let (dy, dw) = match drive {
            DiffusiveDrive::Observation => (dx, dx - m * dt),
            DiffusiveDrive::Innovation => (dx + m * dt, dx),
        };
        let phi = steps.step(dy).apply(&psi);
        let n2 = phi.norm_sqr();
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::TrajectoryAborted {
                t: grid.time(step + 1),
                reason: format!("posterior update has norm² {n2}"),
            });
        }
        weight *= n2;
        psi = phi.scale((1.0 / n2.sqrt()).into());
        states.push(psi);
        weights.push(weight);
        observations.push(dy);
        innovations.push(dw);
    }
    Ok(TrajectoryRecord {
        grid: *grid,
        states: StatePath::Vectors(states),
        normalized: true,
        weights,
        observations,
        innovations,
        intensity: Vec::new(),
        jump_times: Vec::new(),
        stream: noise.stream,
    })
}

/// Linear stochastic master equation
/// `dϱ = (−(Kϱ + ϱK†) + LϱL†)dt + (Lϱ + ϱL†)dy`, Euler–Maruyama.
pub fn simulate_linear_diffusive_density(
    model: &DiffusionModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    noise: &NoisePath,
) -> Result<TrajectoryRecord> {
    check_dim(model.dim(), rho0.dim())?;
    noise.check_grid(grid, NoiseKind::Wiener)?;
    let k = model.k();
    let l = model.l;
    let (kd, ld) = (k.adjoint(), l.adjoint());
    let dt = grid.dt();
    let mut rho = *rho0.op();
    let mut states = Vec::with_capacity(grid.len());
    let mut weights = Vec::with_capacity(grid.len());
    let mut innovations = Vec::with_capacity(grid.steps());
    states.push(rho);
    weights.push(rho.trace().re);
    for (step, &dy) in noise.increments.iter().enumerate() {
        let tr = rho.trace().re;
        let lr = l * rho;
        let rl = rho * ld;
        let m = if tr > 0.0 { (lr + rl).trace().re / tr } else { 0.0 };
        innovations.push(dy - m * dt);
        let drift = -(k * rho) - rho * kd + lr * ld;
        rho = rho + drift.scale_re(dt) + (lr + rl).scale_re(dy);
        if !rho.is_finite() {
            return Err(Error::NonFinite { step, what: "linear density".into() });
        }
        states.push(rho);
        weights.push(rho.trace().re);
    }
    Ok(TrajectoryRecord {
        grid: *grid,
        states: StatePath::Densities(states),
        normalized: false,
        weights,
        observations: noise.increments.clone(),
        innovations,
        intensity: Vec::new(),
        jump_times: Vec::new(),
        stream: noise.stream,
    })
}
