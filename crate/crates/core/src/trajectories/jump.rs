//! Counting (Poisson) observation: exact inter-jump propagation, jumps at
//! the event times of the driving path (linear) or sampled by thinning from
//! the conditional intensity (nonlinear).

use rand::Rng;

use super::{check_dim, check_normalized, JumpModel, Neumaier, StatePath, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::noise::{rng_stream, standard_exponential, NoiseKind, NoisePath, Purpose, TimeGrid};
use crate::statespace::{Operator, StateVector, C64};

/// Smallest admissible `‖Cψ‖` at a jump.
const COLLAPSE_FLOOR: f64 = 1e-14;

/// Propagation between jumps by `exp(−(G − ν/2)τ)`, plus the bookkeeping
/// shared by both counting simulators.
struct Propagator {
    minus_gs: Operator,
    c: Operator,
    nu: f64,
}

impl Propagator {
    fn new(model: &JumpModel) -> Self {
        Propagator { minus_gs: -model.shifted_g(), c: model.c, nu: model.nu }
    }

    fn flow(&self, v: &StateVector, tau: f64) -> StateVector {
        if tau <= 0.0 {
            return *v;
        }
        self.minus_gs.scale_re(tau).expm().apply(v)
    }

    /// `ν‖Cψ‖²/‖ψ‖²`.
    fn intensity(&self, v: &StateVector) -> f64 {
        self.nu * self.c.apply(v).norm_sqr() / v.norm_sqr()
    }
}

/// Builder for per-grid-point records of counting paths.
struct CountingRecorder {
    grid: TimeGrid,
    sqrt_nu: f64,
    states: Vec<StateVector>,
    weights: Vec<f64>,
    intensity: Vec<f64>,
    counts: Vec<f64>,
    compensator: Vec<Neumaier>,
    jump_times: Vec<f64>,
}

impl CountingRecorder {
    fn new(grid: &TimeGrid, nu: f64) -> Self {
        CountingRecorder {
            grid: *grid,
            sqrt_nu: nu.sqrt(),
            states: Vec::with_capacity(grid.len()),
            weights: Vec::with_capacity(grid.len()),
            intensity: Vec::with_capacity(grid.len()),
            counts: vec![0.0; grid.steps()],
            compensator: vec![Neumaier::default(); grid.steps()],
            jump_times: Vec::new(),
        }
    }

    fn step_of(&self, t: f64) -> usize {
        ((t / self.grid.dt()).ceil() as usize).clamp(1, self.grid.steps()) - 1
    }

    fn finish(self, normalized: bool, stream: u64) -> TrajectoryRecord {
        let innovations = self
            .counts
            .iter()
            .zip(&self.compensator)
            .map(|(n, c)| (n - c.value()) / self.sqrt_nu)
            .collect();
        TrajectoryRecord {
            grid: self.grid,
            states: StatePath::Vectors(self.states),
            normalized,
            weights: self.weights,
            observations: self.counts,
            innovations,
            intensity: self.intensity,
            jump_times: self.jump_times,
            stream,
        }
    }
}

/// Linear equation `dχ + (G − ν/2)χ dt = (C − I)χ dn` on the event times of a
/// Poisson path (input measure, intensity `ν`).
///
/// Innovations are `ν^{−1/2}(Δn − ∫ν‖Cψ‖²dt)` with `ψ = χ/‖χ‖`, the
/// compensator integrated exactly between events.
pub fn simulate_linear_jump(
    model: &JumpModel,
    chi0: &StateVector,
    grid: &TimeGrid,
    noise: &NoisePath,
) -> Result<TrajectoryRecord> {
    check_dim(model.dim(), chi0.dim())?;
    noise.check_grid(grid, NoiseKind::Poisson)?;
    let prop = Propagator::new(model);
    let mut rec = CountingRecorder::new(grid, model.nu);
    let mut chi = *chi0;
    let mut t = 0.0;
    let mut events = noise.jump_times.iter().peekable();
    rec.states.push(chi);
    rec.weights.push(chi.norm_sqr());
    rec.intensity.push(prop.intensity(&chi));
    for k in 1..grid.len() {
        let tk = grid.time(k);
        while let Some(&&tj) = events.peek() {
            if tj > tk {
                break;
            }
            events.next();
            chi = advance(&prop, &mut rec, chi, t, tj, k - 1)?;
            t = tj;
            let n0 = chi.norm_sqr();
            chi = prop.c.apply(&chi);
            if !chi.is_finite() {
                return Err(Error::NonFinite { step: k - 1, what: "state after jump".into() });
            }
            if chi.norm_sqr() < COLLAPSE_FLOOR * COLLAPSE_FLOOR * n0 {
                return Err(Error::TrajectoryAborted { t, reason: format!("‖Cχ‖/‖χ‖ = {:.3e} at a jump", (chi.norm_sqr() / n0).sqrt()) });
            }
            let s = rec.step_of(tj);
            rec.counts[s] += 1.0;
            rec.jump_times.push(tj);
        }
        chi = advance(&prop, &mut rec, chi, t, tk, k - 1)?;
        t = tk;
        rec.states.push(chi);
        rec.weights.push(chi.norm_sqr());
        rec.intensity.push(prop.intensity(&chi));
    }
    Ok(rec.finish(false, noise.stream))
}

/// Flows `v` from `a` to `b` (within grid step `step`), adding the exact
/// compensator `ν(b − a) − ln(‖φ(b)‖²/‖φ(a)‖²)`.
fn advance(prop: &Propagator, rec: &mut CountingRecorder, v: StateVector, a: f64, b: f64, step: usize) -> Result<StateVector> {
    if b <= a {
        return Ok(v);
    }
    let n0 = v.norm_sqr();
    let w = prop.flow(&v, b - a);
    let n1 = w.norm_sqr();
    if !(n1.is_finite() && n1 > 0.0) {
        return Err(Error::NonFinite { step, what: "inter-jump flow".into() });
    }
    rec.compensator[step].add(prop.nu * (b - a) - (n1 / n0).ln());
    Ok(w)
}

/// Posterior equation driven by its own counting process: jumps arrive with
/// conditional intensity `ν‖Cψ‖²` (Ogata thinning with bound `ν·σ_max(C)²`),
/// `ψ → Cψ/‖Cψ‖` at jumps, normalized flow between them.
///
/// The weight path is the likelihood of the generated counting path relative
/// to a Poisson(`ν`) reference, i.e. `‖χ‖²` of the linear solution.
pub fn simulate_nonlinear_jump(
    model: &JumpModel,
    psi0: &StateVector,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    check_dim(model.dim(), psi0.dim())?;
    check_normalized(psi0)?;
    let prop = Propagator::new(model);
    let bound = model.nu * model.c.spectral_norm().powi(2) * (1.0 + 1e-12);
    let mut rng = rng_stream(seed, Purpose::Thinning, stream);
    let mut rec = CountingRecorder::new(grid, model.nu);
    let mut psi = *psi0;
    let mut log_weight = 0.0;
    let mut t = 0.0;
    let mut candidate = standard_exponential(&mut rng) / bound;
    rec.states.push(psi);
    rec.weights.push(1.0);
    rec.intensity.push(prop.intensity(&psi));
    for k in 1..grid.len() {
        let tk = grid.time(k);
        while candidate <= tk {
            let (next, lw) = advance_normalized(&prop, &mut rec, psi, t, candidate, k - 1)?;
            psi = next;
            log_weight += lw;
            t = candidate;
            let lambda = prop.intensity(&psi);
            if lambda > bound {
                return Err(Error::TrajectoryAborted { t, reason: format!("intensity {lambda} exceeds thinning bound {bound}") });
            }
            if rng.random::<f64>() * bound < lambda {
                let cpsi = prop.c.apply(&psi);
                let n = cpsi.norm();
                if n < COLLAPSE_FLOOR {
                    return Err(Error::TrajectoryAborted { t, reason: format!("‖Cψ‖ = {n:.3e} at a jump") });
                }
                log_weight += (n * n).ln();
                psi = cpsi.scale(C64::from(1.0 / n));
                let s = rec.step_of(t);
                rec.counts[s] += 1.0;
                rec.jump_times.push(t);
            }
            candidate = t + standard_exponential(&mut rng) / bound;
        }
        let (next, lw) = advance_normalized(&prop, &mut rec, psi, t, tk, k - 1)?;
        psi = next;
        log_weight += lw;
        t = tk;
        if !log_weight.is_finite() {
            return Err(Error::NonFinite { step: k - 1, what: "likelihood".into() });
        }
        rec.states.push(psi);
        rec.weights.push(log_weight.exp());
        rec.intensity.push(prop.intensity(&psi));
    }
    Ok(rec.finish(true, stream))
}

/// Normalized flow; returns the new state and the log-likelihood increment
/// `ln‖φ(b)‖²` of the unnormalized flow.
fn advance_normalized(
    prop: &Propagator,
    rec: &mut CountingRecorder,
    psi: StateVector,
    a: f64,
    b: f64,
    step: usize,
) -> Result<(StateVector, f64)> {
    let phi = advance(prop, rec, psi, a, b, step)?;
    let n2 = phi.norm_sqr();
    Ok((phi.scale(C64::from(1.0 / n2.sqrt())), n2.ln()))
}
