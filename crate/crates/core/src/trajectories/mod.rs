//! Stochastic wave and master equation integrators for diffusive and counting
//! observation, deterministic master equations, and ensemble reduction.
//!
//! Linear equations carry the output likelihood in the norm of `χ` (or the
//! trace of `ϱ`); nonlinear equations propagate the normalized posterior.
//! The nonlinear diffusive step is the normalized linear step, so the two
//! agree path-wise on shared increments up to rounding.

mod diffusive;
mod ensemble;
mod jump;
mod lindblad;

use std::io::Write;

pub use diffusive::{
    simulate_linear_diffusive, simulate_linear_diffusive_density, simulate_nonlinear_diffusive, DiffusiveDrive,
};
pub use ensemble::{ensemble_average, run_ensemble, AverageMode, EnsembleAccumulator, MeanVar, Neumaier};
pub use jump::{simulate_linear_jump, simulate_nonlinear_jump};
pub use lindblad::{integrate_jump_master, integrate_lindblad, Superoperator};

use crate::error::{Error, Result};
use crate::noise::TimeGrid;
use crate::statespace::{density_to_bloch, Operator, StateVector, C64, STRUCTURE_TOL};

/// Diffusive observation model: Hamiltonian `H` and coupling `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionModel {
    pub h: Operator,
    pub l: Operator,
    pub hbar: f64,
}

impl DiffusionModel {
    pub fn new(h: Operator, l: Operator, hbar: f64) -> Result<Self> {
        if h.dim() != l.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: l.dim() });
        }
        let dev = h.hermitian_deviation();
        if dev > STRUCTURE_TOL {
            return Err(Error::NotHermitian(dev));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("ħ must be positive, got {hbar}")));
        }
        Ok(DiffusionModel { h, l, hbar })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `K = ½L†L + (i/ħ)H`.
    pub fn k(&self) -> Operator {
        (self.l.adjoint() * self.l).scale_re(0.5) + self.h.scale(C64::new(0.0, 1.0 / self.hbar))
    }
}

/// Counting observation model: collapse `C`, energy `E`, intensity `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpModel {
    pub c: Operator,
    pub e: Operator,
    pub nu: f64,
    pub hbar: f64,
}

impl JumpModel {
    pub fn new(c: Operator, e: Operator, nu: f64, hbar: f64) -> Result<Self> {
        if c.dim() != e.dim() {
            return Err(Error::DimensionMismatch { expected: c.dim(), got: e.dim() });
        }
        let dev = e.hermitian_deviation();
        if dev > STRUCTURE_TOL.max(1e-12 * e.frobenius_norm()) {
            return Err(Error::NotHermitian(dev));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidArgument(format!("intensity ν must be positive, got {nu}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("ħ must be positive, got {hbar}")));
        }
        Ok(JumpModel { c, e, nu, hbar })
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    /// `G = (ν/2)C†C + (i/ħ)E`.
    pub fn g(&self) -> Operator {
        (self.c.adjoint() * self.c).scale_re(0.5 * self.nu) + self.e.scale(C64::new(0.0, 1.0 / self.hbar))
    }

    /// Inter-jump generator of the linear equation, `G − (ν/2)I`.
    pub fn shifted_g(&self) -> Operator {
        self.g() - Operator::identity(self.dim()).scale_re(0.5 * self.nu)
    }
}

/// Counting model approximating a diffusive one at intensity `ν` (`ħ = 1`):
/// `C = I + ν^{−1/2}L`, `E = H + (ν^{1/2}/2i)(L − L†)`.
pub fn jump_to_diffusion_embedding(l: &Operator, h: &Operator, nu: f64) -> Result<JumpModel> {
    embed_diffusion(&DiffusionModel::new(*h, *l, 1.0)?, nu)
}

/// Embedding for general `ħ`; the energy correction scales with `ħ` so that
/// the jump master equation reproduces the diffusive one exactly.
pub fn embed_diffusion(model: &DiffusionModel, nu: f64) -> Result<JumpModel> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::InvalidArgument(format!("intensity ν must be positive, got {nu}")));
    }
    let n = model.dim();
    let c = Operator::identity(n) + model.l.scale_re(nu.powf(-0.5));
    // ħν^{1/2}/(2i) = −i ħν^{1/2}/2
    let skew = model.l - model.l.adjoint();
    let e = model.h + skew.scale(C64::new(0.0, -0.5 * model.hbar * nu.sqrt()));
    JumpModel::new(c, e, nu, model.hbar)
}

/// Per-grid-point state of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum StatePath {
    Vectors(Vec<StateVector>),
    Densities(Vec<Operator>),
}

impl StatePath {
    pub fn len(&self) -> usize {
        match self {
            StatePath::Vectors(v) => v.len(),
            StatePath::Densities(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `χχ†` (or `ϱ`) at grid point `k`.
    pub fn density(&self, k: usize) -> Operator {
        match self {
            StatePath::Vectors(v) => v[k].projector(),
            StatePath::Densities(v) => v[k],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StatePath::Vectors(v) => v[0].dim(),
            StatePath::Densities(v) => v[0].dim(),
        }
    }
}

/// One simulated path sampled on its grid.
///
/// `states`, `weights` and `intensity` have one entry per grid point;
/// `observations` and `innovations` hold the increment over `(t_k, t_{k+1}]`.
/// For normalized records `weights` is the likelihood accumulated alongside
/// the posterior; otherwise it is `‖χ‖²` or `Tr ϱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: TimeGrid,
    pub states: StatePath,
    pub normalized: bool,
    pub weights: Vec<f64>,
    pub observations: Vec<f64>,
    pub innovations: Vec<f64>,
    /// Conditional counting intensity `ν‖Cψ‖²`; empty for diffusive records.
    pub intensity: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub stream: u64,
}

impl TrajectoryRecord {
    /// Normalized posterior density at grid point `k`.
    pub fn posterior(&self, k: usize) -> Operator {
        let rho = self.states.density(k);
        rho.scale_re(1.0 / rho.trace().re)
    }

    /// Posterior Bloch vectors (qubit records only).
    pub fn bloch_path(&self) -> Result<Vec<crate::statespace::BlochVector>> {
        (0..self.states.len()).map(|k| density_to_bloch(&self.posterior(k))).collect()
    }

    /// Sum of the innovation increments, the innovation process at `T`.
    pub fn innovation_total(&self) -> f64 {
        let mut acc = Neumaier::default();
        for x in &self.innovations {
            acc.add(*x);
        }
        acc.value()
    }

    /// CSV export. Header: `t`, then `re0,im0,…` for state vectors, `x,y,z`
    /// for qubit densities or `re00,im00,…` for larger densities, then
    /// `weight,obs_increment,innovation` and `intensity` for counting records.
    /// The increment columns at row `k` cover `(t_{k−1}, t_k]`; row 0 has 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.states.dim();
        let mut header = vec!["t".to_string()];
        match &self.states {
            StatePath::Vectors(_) => {
                for i in 0..n {
                    header.push(format!("re{i}"));
                    header.push(format!("im{i}"));
                }
            }
            StatePath::Densities(_) if n == 2 => header.extend(["x", "y", "z"].map(String::from)),
            StatePath::Densities(_) => {
                for i in 0..n {
                    for j in 0..n {
                        header.push(format!("re{i}{j}"));
                        header.push(format!("im{i}{j}"));
                    }
                }
            }
        }
        header.extend(["weight", "obs_increment", "innovation"].map(String::from));
        let has_intensity = !self.intensity.is_empty();
        if has_intensity {
            header.push("intensity".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.states.len() {
            let mut row = vec![fmt_f64(self.grid.time(k))];
            match &self.states {
                StatePath::Vectors(v) => {
                    for a in v[k].amplitudes() {
                        row.push(fmt_f64(a.re));
                        row.push(fmt_f64(a.im));
                    }
                }
                StatePath::Densities(_) if n == 2 => {
                    let r = density_to_bloch(&self.posterior(k))?;
                    row.extend([r.x, r.y, r.z].map(fmt_f64));
                }
                StatePath::Densities(v) => {
                    for a in v[k].entries() {
                        row.push(fmt_f64(a.re));
                        row.push(fmt_f64(a.im));
                    }
                }
            }
            let (obs, inn) = if k == 0 { (0.0, 0.0) } else { (self.observations[k - 1], self.innovations[k - 1]) };
            row.extend([self.weights[k], obs, inn].map(fmt_f64));
            if has_intensity {
                row.push(fmt_f64(self.intensity[k]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal form; stable across runs and platforms.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:e}")
    }
}

pub(crate) fn check_normalized(psi: &StateVector) -> Result<()> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("initial state must be normalized, ‖ψ‖ = {n}")));
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
