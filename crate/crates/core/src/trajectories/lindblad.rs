//! Deterministic master equations integrated with classical RK4.

use super::{check_dim, DiffusionModel, JumpModel};
use crate::error::{Error, Result};
use crate::noise::TimeGrid;
use crate::statespace::{DensityMatrix, Operator, C64, ZERO};

/// Linear map `ρ ↦ Σ A_i ρ B_i` stored as an `n² × n²` matrix acting on the
/// row-major vectorization of `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    m: Vec<C64>,
}

impl Superoperator {
    pub fn zeros(dim: usize) -> Self {
        Superoperator { dim, m: vec![ZERO; dim.pow(4)] }
    }

    /// Adds the term `ρ ↦ AρB`.
    pub fn add_sandwich(&mut self, a: &Operator, b: &Operator) {
        let n = self.dim;
        let nn = n * n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let aik = a[(i, k)];
                    if aik == ZERO {
                        continue;
                    }
                    for l in 0..n {
                        self.m[(i * n + j) * nn + k * n + l] += aik * b[(l, j)];
                    }
                }
            }
        }
    }

    /// `ρ ↦ −(Kρ + ρK†) + LρL†`.
    pub fn lindblad(k: &Operator, l: &Operator) -> Self {
        let n = k.dim();
        let id = Operator::identity(n);
        let mut s = Superoperator::zeros(n);
        s.add_sandwich(&(-*k), &id);
        s.add_sandwich(&id, &(-k.adjoint()));
        s.add_sandwich(l, &l.adjoint());
        s
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        let n = self.dim;
        let nn = n * n;
        let src = rho.entries();
        let mut out = Operator::zeros(n);
        for r in 0..nn {
            let row = &self.m[r * nn..(r + 1) * nn];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(src) {
                acc += a * b;
            }
            out[(r / n, r % n)] = acc;
        }
        out
    }

    /// Frobenius norm, an upper bound on the induced 2-norm.
    pub fn norm_bound(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn rk4_step(&self, rho: &Operator, h: f64) -> Operator {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(*rho + k1.scale_re(0.5 * h)));
        let k3 = self.apply(&(*rho + k2.scale_re(0.5 * h)));
        let k4 = self.apply(&(*rho + k3.scale_re(h)));
        *rho + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)
    }

    /// Integrates `dρ/dt = S(ρ)` on the grid with `h·‖S‖ ≤ 0.02` substeps.
    ///
    /// Fails if the trace drifts by more than `1e-6` or an eigenvalue drops
    /// below `−1e-8`.
    pub fn integrate(&self, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
        check_dim(self.dim, rho0.dim())?;
        let substeps = ((grid.dt() * self.norm_bound() / 0.02).ceil() as usize).max(1);
        let h = grid.dt() / substeps as f64;
        let tr0 = rho0.trace();
        let mut rho = *rho0.op();
        let mut path = Vec::with_capacity(grid.len());
        path.push(*rho0);
        for step in 0..grid.steps() {
            for _ in 0..substeps {
                rho = self.rk4_step(&rho, h);
            }
            if !rho.is_finite() {
                return Err(Error::NonFinite { step, what: "density matrix".into() });
            }
            // restore exact Hermiticity lost to rounding
            rho = (rho + rho.adjoint()).scale_re(0.5);
            let drift = (rho.trace().re - tr0).abs();
            if drift > 1e-6 {
                return Err(Error::StepRejected(format!("trace drift {drift:.3e} at step {step}")));
            }
            let lowest = rho.hermitian_eigenvalues()?[0];
            if lowest < -1e-8 {
                return Err(Error::NotPositive(lowest));
            }
            path.push(DensityMatrix::assume_valid(rho));
        }
        Ok(path)
    }
}

/// `dρ/dt = −(Kρ + ρK†) + LρL†` with `K = ½L†L + (i/ħ)H`.
pub fn integrate_lindblad(model: &DiffusionModel, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    check_trace_one(rho0)?;
    Superoperator::lindblad(&model.k(), &model.l).integrate(rho0, grid)
}

/// Mean of the counting master equation: `dρ/dt = −(Gρ + ρG†) + νCρC†`.
pub fn integrate_jump_master(model: &JumpModel, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    check_trace_one(rho0)?;
    // G − ν/2 and C − I keep the entries O(ν^{1/2}) for embedded models
    let n = model.dim();
    let id = Operator::identity(n);
    let gs = model.shifted_g();
    let dc = model.c - id;
    let mut s = Superoperator::zeros(n);
    s.add_sandwich(&(-gs), &id);
    s.add_sandwich(&id, &(-gs.adjoint()));
    let nu = model.nu;
    // ν(CρC† − ρ) = ν(ΔρΔ† + Δρ + ρΔ†) with Δ = C − I
    s.add_sandwich(&dc.scale_re(nu), &dc.adjoint());
    s.add_sandwich(&dc.scale_re(nu), &id);
    s.add_sandwich(&id, &dc.adjoint().scale_re(nu));
    s.integrate(rho0, grid)
}

fn check_trace_one(rho0: &DensityMatrix) -> Result<()> {
    let tr = rho0.trace();
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("initial density matrix must have unit trace, got {tr}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{bloch_to_density, sigma_x, sigma_z, BlochVector, StateVector};
    use crate::trajectories::embed_diffusion;

    fn plus() -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::from_real(&[1.0, 1.0]).unwrap().normalized().unwrap()).unwrap()
    }

    #[test]
    fn unitary_motion_keeps_purity() {
        let m = DiffusionModel::new(sigma_x().scale_re(0.8) + sigma_z().scale_re(0.3), Operator::zeros(2), 1.0).unwrap();
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let path = integrate_lindblad(&m, &plus(), &grid).unwrap();
        for rho in &path {
            assert!((rho.purity() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dephasing_decays_coherence() {
        let m = DiffusionModel::new(Operator::zeros(2), sigma_z(), 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let path = integrate_lindblad(&m, &plus(), &grid).unwrap();
        let c0 = plus().op()[(0, 1)];
        let c1 = path[100].op()[(0, 1)];
        assert!((c1 - c0 * (-2.0f64).exp()).norm() < 1e-6);
        assert!((path[100].trace() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_jump_model_is_static() {
        let j = JumpModel::new(Operator::identity(2), Operator::zeros(2), 3.0, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let rho0 = bloch_to_density(&BlochVector::new(0.3, -0.2, 0.5)).unwrap();
        let path = integrate_jump_master(&j, &rho0, &grid).unwrap();
        for rho in &path {
            assert!(rho.op().max_abs_diff(rho0.op()) < 1e-14);
        }
    }

    #[test]
    fn embedded_jump_master_equals_lindblad() {
        let d = DiffusionModel::new(sigma_z().scale_re(0.5), sigma_x().scale_re(0.7), 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let rho0 = bloch_to_density(&BlochVector::new(0.0, 0.6, 0.8)).unwrap();
        let a = integrate_lindblad(&d, &rho0, &grid).unwrap();
        for nu in [4.0, 100.0, 1e4] {
            let b = integrate_jump_master(&embed_diffusion(&d, nu).unwrap(), &rho0, &grid).unwrap();
            let err = a.iter().zip(&b).map(|(x, y)| x.op().max_abs_diff(y.op())).fold(0.0, f64::max);
            assert!(err < 1e-9, "ν = {nu}: {err}");
        }
    }

    #[test]
    fn rejects_unnormalized_start() {
        let m = DiffusionModel::new(Operator::zeros(2), sigma_z(), 1.0).unwrap();
        let rho = DensityMatrix::new_unnormalized(Operator::identity(2)).unwrap();
        assert!(integrate_lindblad(&m, &rho, &TimeGrid::new(1.0, 0.5).unwrap()).is_err());
    }
}
