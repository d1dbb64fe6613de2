//! Qubit with Hamiltonian `σ(h)` observed through `L = σ(l)` (Hermitian), at
//! the level of Bloch vectors.
//!
//! The likelihood-weighted state `ϱ = ½(πI + σ(p))` is tracked as the
//! 4-vector `(π, p)`; the posterior polarization is `r = p/π`. Precession uses
//! `k = 2h/ħ`, i.e. `dr/dt = −r × k` for the free motion.

use std::io::Write;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::noise::{rng_stream, standard_normal, NoiseKind, NoisePath, Purpose, TimeGrid};
use crate::statespace::{pauli, BlochVector, DensityMatrix, Operator};
use crate::trajectories::{embed_diffusion, fmt_f64, DiffusionModel, JumpModel, MeanVar};

/// Angle below which `k` and `l` count as colinear.
pub const COLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitScenario {
    pub h: BlochVector,
    pub l: BlochVector,
    pub nu: f64,
    pub hbar: f64,
    pub r0: BlochVector,
}

impl QubitScenario {
    pub fn new(h: BlochVector, l: BlochVector, nu: f64, r0: BlochVector) -> Result<Self> {
        Self::with_hbar(h, l, nu, 1.0, r0)
    }

    pub fn with_hbar(h: BlochVector, l: BlochVector, nu: f64, hbar: f64, r0: BlochVector) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidArgument(format!("intensity ν must be positive, got {nu}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("ħ must be positive, got {hbar}")));
        }
        if !(h.is_finite() && l.is_finite() && r0.is_finite()) {
            return Err(Error::InvalidArgument("non-finite scenario vector".into()));
        }
        check_ball(&r0)?;
        Ok(QubitScenario { h, l, nu, hbar, r0 })
    }

    /// Scenario specified by the precession vector `k` instead of `h`.
    pub fn from_k(k: BlochVector, l: BlochVector, nu: f64, hbar: f64, r0: BlochVector) -> Result<Self> {
        Self::with_hbar(k.scale(0.5 * hbar), l, nu, hbar, r0)
    }

    pub fn k(&self) -> BlochVector {
        self.h.scale(2.0 / self.hbar)
    }

    pub fn diffusion_model(&self) -> DiffusionModel {
        DiffusionModel { h: pauli(&self.h), l: pauli(&self.l), hbar: self.hbar }
    }

    /// Counting model with `C = I + ν^{−1/2}σ(l)`, `E = σ(h)`.
    pub fn jump_model(&self) -> Result<JumpModel> {
        embed_diffusion(&self.diffusion_model(), self.nu)
    }

    /// Conditional counting intensity `ν + 2ν^{1/2} l·r + l·l`.
    pub fn intensity(&self, r: &BlochVector) -> f64 {
        self.nu + 2.0 * self.nu.sqrt() * self.l.dot(r) + self.l.dot(&self.l)
    }
}

fn check_ball(r: &BlochVector) -> Result<()> {
    let n = r.norm();
    if n > 1.0 + 1e-12 {
        return Err(Error::OutsideBall(n));
    }
    Ok(())
}

/// Likelihood `π` and unnormalized polarization `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiPState {
    pub pi: f64,
    pub p: BlochVector,
}

impl PiPState {
    pub fn initial(r0: &BlochVector) -> Self {
        PiPState { pi: 1.0, p: *r0 }
    }

    /// Posterior polarization `p/π`.
    pub fn r(&self) -> BlochVector {
        self.p.scale(1.0 / self.pi)
    }

    /// `ϱ = ½(πI + σ(p))`.
    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new_unnormalized((Operator::identity(2).scale_re(self.pi) + pauli(&self.p)).scale_re(0.5))
    }

    fn to_vec(self) -> Vector4<f64> {
        Vector4::new(self.pi, self.p.x, self.p.y, self.p.z)
    }

    fn from_vec(v: &Vector4<f64>) -> Self {
        PiPState { pi: v[0], p: BlochVector::new(v[1], v[2], v[3]) }
    }

    fn check(&self, step: usize) -> Result<()> {
        if !(self.pi.is_finite() && self.p.is_finite()) {
            return Err(Error::NonFinite { step, what: "(π, p)".into() });
        }
        if self.pi <= 0.0 {
            return Err(Error::TrajectoryAborted { t: f64::NAN, reason: format!("π = {} ≤ 0 at step {step}; grid too coarse", self.pi) });
        }
        Ok(())
    }
}

/// Bloch-level posterior path of a counting observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingFilterPath {
    pub r: Vec<BlochVector>,
    /// Conditional intensity at each grid point.
    pub intensity: Vec<f64>,
}

/// `dr/dt = −r × k − 2ν^{1/2} l + 2ν^{1/2}(l·r) r` between jumps.
fn counting_drift(sc: &QubitScenario, k: &BlochVector, r: &BlochVector) -> BlochVector {
    let s = sc.nu.sqrt();
    -r.cross(k) - sc.l.scale(2.0 * s) + r.scale(2.0 * s * sc.l.dot(r))
}

/// Posterior jump `Δr = 2(ν^{1/2}(l − (l·r)r) + (l·r)l − (l·l)r) / intensity`.
pub fn counting_jump(sc: &QubitScenario, r: &BlochVector) -> Result<BlochVector> {
    let lam = sc.intensity(r);
    if lam < 1e-12 {
        return Err(Error::TrajectoryAborted { t: f64::NAN, reason: format!("conditional intensity {lam:.3e} at a jump") });
    }
    let lr = sc.l.dot(r);
    let num = (sc.l - r.scale(lr)).scale(sc.nu.sqrt()) + sc.l.scale(lr) - r.scale(sc.l.dot(&sc.l));
    Ok(*r + num.scale(2.0 / lam))
}

fn rk4_bloch<F: Fn(&BlochVector) -> BlochVector>(f: &F, r: BlochVector, h: f64) -> BlochVector {
    let k1 = f(&r);
    let k2 = f(&(r + k1.scale(0.5 * h)));
    let k3 = f(&(r + k2.scale(0.5 * h)));
    let k4 = f(&(r + k3.scale(h)));
    r + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0)
}

/// Integrates `f` over `[a, b]` with RK4 steps of length at most `hmax`.
fn rk4_span<F: Fn(&BlochVector) -> BlochVector>(f: &F, mut r: BlochVector, a: f64, b: f64, hmax: f64) -> BlochVector {
    if b <= a {
        return r;
    }
    let n = ((b - a) / hmax).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    for _ in 0..n {
        r = rk4_bloch(f, r, h);
    }
    r
}

/// Nonlinear counting filter for the Bloch vector, integrated with RK4
/// between the given jump times and updated by [`counting_jump`] at them.
pub fn bloch_counting_filter(sc: &QubitScenario, r0: &BlochVector, jump_times: &[f64], grid: &TimeGrid) -> Result<CountingFilterPath> {
    check_ball(r0)?;
    let k = sc.k();
    let rate = k.norm() + 4.0 * sc.nu.sqrt() * sc.l.norm() + 1.0;
    let hmax = 0.004 / rate;
    let f = |r: &BlochVector| counting_drift(sc, &k, r);
    let mut r = *r0;
    let mut t = 0.0;
    let mut path = Vec::with_capacity(grid.len());
    let mut intensity = Vec::with_capacity(grid.len());
    path.push(r);
    intensity.push(sc.intensity(&r));
    let mut events = jump_times.iter().peekable();
    for step in 1..grid.len() {
        let tk = grid.time(step);
        while let Some(&&tj) = events.peek() {
            if tj > tk {
                break;
            }
            events.next();
            r = rk4_span(&f, r, t, tj, hmax);
            t = tj;
            r = counting_jump(sc, &r).map_err(|e| at_time(e, t))?;
        }
        r = rk4_span(&f, r, t, tk, hmax);
        t = tk;
        if !r.is_finite() {
            return Err(Error::NonFinite { step, what: "posterior Bloch vector".into() });
        }
        path.push(r);
        intensity.push(sc.intensity(&r));
    }
    Ok(CountingFilterPath { r: path, intensity })
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::TrajectoryAborted { reason, .. } => Error::TrajectoryAborted { t, reason },
        other => other,
    }
}

fn skew(k: &BlochVector) -> Matrix3<f64> {
    // matrix of p ↦ k × p
    Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0)
}

/// Drift `D` of `(π, p)`: `dp/dt = −(p × k + 2(l·l)p − 2(l·p)l)`, `dπ/dt = 0`.
fn drift_matrix(k: &BlochVector, l: &BlochVector) -> Matrix4<f64> {
    let lv = Vector3::new(l.x, l.y, l.z);
    let block = skew(k) - Matrix3::identity() * (2.0 * l.dot(l)) + lv * lv.transpose() * 2.0;
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(1, 1).copy_from(&block);
    m
}

/// Noise coefficient `B` of the counting system:
/// `dπ = (ν^{−1/2}(l·l)π + 2 l·p)dy`,
/// `dp ∋ (2lπ + 2ν^{−1/2}(l·p)l − ν^{−1/2}(l·l)p)dy`.
fn counting_noise_matrix(l: &BlochVector, nu: f64) -> Matrix4<f64> {
    let e = nu.powf(-0.5);
    let ll = l.dot(l);
    let lv = Vector3::new(l.x, l.y, l.z);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = e * ll;
    for i in 0..3 {
        m[(0, i + 1)] = 2.0 * lv[i];
        m[(i + 1, 0)] = 2.0 * lv[i];
    }
    let block = lv * lv.transpose() * (2.0 * e) - Matrix3::identity() * (e * ll);
    m.fixed_view_mut::<3, 3>(1, 1).copy_from(&block);
    m
}

/// Linear counting system driven by `y_t = ν^{−1/2}n_t − ν^{1/2}t`.
///
/// Between events `dy = −ν^{1/2}dt` and the system is propagated by the exact
/// matrix exponential; at an event `dy = ν^{−1/2}`.
pub fn linear_pi_p_counting(sc: &QubitScenario, r0: &BlochVector, jump_times: &[f64], grid: &TimeGrid) -> Result<Vec<PiPState>> {
    check_ball(r0)?;
    let d = drift_matrix(&sc.k(), &sc.l);
    let b = counting_noise_matrix(&sc.l, sc.nu);
    let flow_gen = d - b * sc.nu.sqrt();
    let jump = Matrix4::identity() + b * sc.nu.powf(-0.5);
    let flow = |tau: f64| (flow_gen * tau).exp();
    let grid_flow = flow(grid.dt());
    let mut q = PiPState::initial(r0).to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(PiPState::from_vec(&q));
    let mut events = jump_times.iter().peekable();
    for step in 1..grid.len() {
        let tk = grid.time(step);
        let mut jumped = false;
        while let Some(&&tj) = events.peek() {
            if tj > tk {
                break;
            }
            events.next();
            q = flow(tj - t) * q;
            q = jump * q;
            t = tj;
            jumped = true;
        }
        q = if jumped || (tk - t - grid.dt()).abs() > 1e-15 { flow(tk - t) * q } else { grid_flow * q };
        t = tk;
        let s = PiPState::from_vec(&q);
        s.check(step)?;
        out.push(s);
    }
    Ok(out)
}

/// Integration scheme for the diffusive `(π, p)` system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiPScheme {
    /// Euler–Maruyama on `dπ = 2l·p dw`, `dp = −(…)dt + 2lπ dw`.
    Euler,
    /// Exact update for colinear `k ∥ l`: geometric factors
    /// `exp(±2|l|Δw − 2|l|²Δt)` on `π_± = (π ± l̂·p)/2` and exact damped
    /// rotation of `p_⊥`.
    Exponential,
}

/// Linear diffusive system (the `ν → ∞` limit of the counting one).
pub fn diffusive_pi_p(sc: &QubitScenario, r0: &BlochVector, w: &NoisePath, grid: &TimeGrid, scheme: PiPScheme) -> Result<Vec<PiPState>> {
    check_ball(r0)?;
    w.check_grid(grid, NoiseKind::Wiener)?;
    let k = sc.k();
    let l = sc.l;
    let dt = grid.dt();
    let mut s = PiPState::initial(r0);
    let mut out = Vec::with_capacity(grid.len());
    out.push(s);
    match scheme {
        PiPScheme::Euler => {
            let ll = l.dot(&l);
            for (step, &dw) in w.increments.iter().enumerate() {
                let drift = -(s.p.cross(&k) + s.p.scale(2.0 * ll) - l.scale(2.0 * l.dot(&s.p)));
                let pi = s.pi + 2.0 * l.dot(&s.p) * dw;
                let p = s.p + drift.scale(dt) + l.scale(2.0 * s.pi * dw);
                s = PiPState { pi, p };
                s.check(step + 1)?;
                out.push(s);
            }
        }
        PiPScheme::Exponential => {
            let frame = ColinearFrame::new(&k, &l)?;
            let la = l.norm();
            let damp = (-2.0 * la * la * dt).exp();
            let (c, sn) = ((frame.k_e * dt).cos(), (frame.k_e * dt).sin());
            let e = frame.e;
            let mut pe = e.dot(&s.p);
            let mut plus = 0.5 * (s.pi + pe);
            let mut minus = 0.5 * (s.pi - pe);
            let mut perp = s.p - e.scale(pe);
            for (step, &dw) in w.increments.iter().enumerate() {
                plus *= (2.0 * la * dw - 2.0 * la * la * dt).exp();
                minus *= (-2.0 * la * dw - 2.0 * la * la * dt).exp();
                perp = (perp.scale(c) + e.cross(&perp).scale(sn)).scale(damp);
                pe = plus - minus;
                s = PiPState { pi: plus + minus, p: e.scale(pe) + perp };
                s.check(step + 1)?;
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Orthonormal axis `e` along `l` (or `k`, or `e_z`) with `k = k_e e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColinearFrame {
    pub e: BlochVector,
    pub k_e: f64,
}

impl ColinearFrame {
    pub fn new(k: &BlochVector, l: &BlochVector) -> Result<Self> {
        let e = l.unit().or_else(|| k.unit()).unwrap_or(BlochVector::EZ);
        let k_e = k.dot(&e);
        let k_perp = (*k - e.scale(k_e)).norm();
        if k_perp.atan2(k_e.abs()) > COLINEAR_TOL && k_perp > 0.0 {
            return Err(Error::InvalidArgument(format!(
                "k and l are not colinear (angle {:.3e} rad)",
                k_perp.atan2(k_e.abs())
            )));
        }
        Ok(ColinearFrame { e, k_e })
    }
}

/// Closed-form solution of the colinear diffusive system at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColinearSolution {
    pub pi: f64,
    pub p: BlochVector,
    /// Posterior polarization from the `cosh`/`tanh` expressions.
    pub r: BlochVector,
}

/// `π_± = ½(1 ± z)exp(±2|l|w − 2|l|²t)`, `p_⊥` the damped rotation of the
/// initial transverse polarization, and
/// `z_ω = (tanh 2|l|w + z)/(1 + z tanh 2|l|w)`,
/// `r_⊥ω = R(t)r_⊥/(cosh 2|l|w + z sinh 2|l|w)`; `z` is measured along `l`.
pub fn closed_form_colinear(l: &BlochVector, k: &BlochVector, r0: &BlochVector, w: f64, t: f64) -> Result<ColinearSolution> {
    check_ball(r0)?;
    if !(t >= 0.0 && t.is_finite() && w.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite t ≥ 0 and w, got t = {t}, w = {w}")));
    }
    let frame = ColinearFrame::new(k, l)?;
    let e = frame.e;
    let la = l.norm();
    let z = e.dot(r0);
    let perp0 = *r0 - e.scale(z);
    let rot = perp0.scale((frame.k_e * t).cos()) + e.cross(&perp0).scale((frame.k_e * t).sin());
    let decay = (-2.0 * la * la * t).exp();
    let a = 2.0 * la * w;
    let plus = 0.5 * (1.0 + z) * (a - 2.0 * la * la * t).exp();
    let minus = 0.5 * (1.0 - z) * (-a - 2.0 * la * la * t).exp();
    let p = e.scale(plus - minus) + rot.scale(decay);
    let (z_w, den) = posterior_z(a, z);
    // cosh a + z sinh a = e^{|a|}·den/2
    let r_perp = rot.scale(2.0 * (-a.abs()).exp() / den);
    Ok(ColinearSolution { pi: plus + minus, p, r: e.scale(z_w) + r_perp })
}

/// `(tanh a + z)/(1 + z tanh a)` written as
/// `((1+z)e^a − (1−z)e^{−a})/((1+z)e^a + (1−z)e^{−a})` and scaled by
/// `e^{−|a|}`, so `z = ±1` and large `|a|` stay finite. Also returns the
/// scaled denominator.
fn posterior_z(a: f64, z: f64) -> (f64, f64) {
    let f = (-2.0 * a.abs()).exp();
    let (p, m) = if a >= 0.0 { (1.0 + z, (1.0 - z) * f) } else { ((1.0 + z) * f, 1.0 - z) };
    ((p - m) / (p + m), p + m)
}

/// Bloch master equation `dr/dt = −r × k − 2(l·l)r + 2(l·r)l`, solved by the
/// exact exponential of its 3×3 generator at each grid point.
pub fn bloch_master_solve(k: &BlochVector, l: &BlochVector, r0: &BlochVector, grid: &TimeGrid) -> Result<Vec<BlochVector>> {
    check_ball(r0)?;
    let lv = Vector3::new(l.x, l.y, l.z);
    let gen = skew(k) - Matrix3::identity() * (2.0 * l.dot(l)) + lv * lv.transpose() * 2.0;
    let r0v = Vector3::new(r0.x, r0.y, r0.z);
    Ok((0..grid.len())
        .map(|i| {
            let v = (gen * grid.time(i)).exp() * r0v;
            BlochVector::new(v[0], v[1], v[2])
        })
        .collect())
}

/// Localization statistics of `z_ω(t)` for the colinear closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationStats {
    pub mean_z: f64,
    pub mean_z2: f64,
    /// Fraction of samples with `|z_ω| > 0.99`, among samples with
    /// `|w_t| ≥ 1e-12`.
    pub localized_fraction: f64,
    pub std_error_z: f64,
    pub std_error_z2: f64,
    pub excluded: u64,
    pub samples: u64,
}

/// Samples `w_t ~ Normal(0, t)` and evaluates `z_ω(t)` from the closed form.
pub fn localization_statistic(l_abs: f64, t: f64, z: f64, n: u64, seed: u64) -> Result<LocalizationStats> {
    if !(l_abs >= 0.0 && t > 0.0 && z.abs() <= 1.0 && n > 0) {
        return Err(Error::InvalidArgument(format!("bad localization input |l| = {l_abs}, t = {t}, z = {z}, N = {n}")));
    }
    let mut rng = rng_stream(seed, Purpose::Sampling, 0);
    let (mut m1, mut m2) = (MeanVar::default(), MeanVar::default());
    let (mut loc, mut excluded) = (0u64, 0u64);
    for _ in 0..n {
        let w = t.sqrt() * standard_normal(&mut rng);
        let (zw, _) = posterior_z(2.0 * l_abs * w, z);
        m1.add(zw);
        m2.add(zw * zw);
        if w.abs() < 1e-12 {
            excluded += 1;
        } else if zw.abs() > 0.99 {
            loc += 1;
        }
    }
    let counted = (n - excluded).max(1);
    Ok(LocalizationStats {
        mean_z: m1.mean(),
        mean_z2: m2.mean(),
        localized_fraction: loc as f64 / counted as f64,
        std_error_z: m1.std_error(),
        std_error_z2: m2.std_error(),
        excluded,
        samples: n,
    })
}

/// CSV with header `t,pi,p_x,p_y,p_z,r_x,r_y,r_z,intensity`; the intensity
/// column is empty when not supplied.
pub fn write_pi_p_csv<W: Write>(mut w: W, grid: &TimeGrid, states: &[PiPState], intensity: Option<&[f64]>) -> Result<()> {
    writeln!(w, "t,pi,p_x,p_y,p_z,r_x,r_y,r_z,intensity")?;
    for (k, s) in states.iter().enumerate() {
        let r = s.r();
        let lam = intensity.map(|v| fmt_f64(v[k])).unwrap_or_default();
        let cols = [grid.time(k), s.pi, s.p.x, s.p.y, s.p.z, r.x, r.y, r.z].map(fmt_f64);
        writeln!(w, "{},{}", cols.join(","), lam)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{bloch_to_density, density_to_bloch};
    use proptest::prelude::*;

    fn sc(h: [f64; 3], l: [f64; 3], nu: f64, r0: [f64; 3]) -> QubitScenario {
        QubitScenario::new(BlochVector::from_array(h), BlochVector::from_array(l), nu, BlochVector::from_array(r0)).unwrap()
    }

    #[test]
    fn free_precession_keeps_length() {
        let s = sc([0.3, -0.2, 0.5], [0.0; 3], 10.0, [0.6, 0.0, 0.8]);
        let g = TimeGrid::new(2.0, 0.01).unwrap();
        let path = bloch_counting_filter(&s, &s.r0, &[0.3, 1.1], &g).unwrap();
        for r in &path.r {
            assert!((r.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn eigen_polarization_is_fixed() {
        for sign in [1.0, -1.0] {
            let s = sc([0.0, 0.0, 0.7], [0.0, 0.0, 0.5], 9.0, [0.0, 0.0, sign]);
            let g = TimeGrid::new(1.0, 0.01).unwrap();
            let path = bloch_counting_filter(&s, &s.r0, &[0.2, 0.21, 0.9], &g).unwrap();
            for r in &path.r {
                assert!(r.max_abs_diff(&s.r0) < 1e-12);
            }
        }
    }

    #[test]
    fn jump_formula_matches_collapse_of_density() {
        let s = sc([0.1, 0.2, 0.3], [0.4, -0.3, 0.6], 7.0, [0.0; 3]);
        let c = s.jump_model().unwrap().c;
        for r in [BlochVector::new(0.3, 0.4, -0.5), BlochVector::new(-0.9, 0.1, 0.2), BlochVector::ZERO] {
            let rho = bloch_to_density(&r).unwrap();
            let post = c * *rho.op() * c.adjoint();
            let lam = s.nu * post.trace().re;
            assert!((lam - s.intensity(&r)).abs() < 1e-12);
            let expect = density_to_bloch(&post.scale_re(1.0 / post.trace().re)).unwrap();
            assert!(counting_jump(&s, &r).unwrap().max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn filter_equals_ratio_of_linear_system() {
        let s = sc([0.2, 0.0, 0.5], [0.3, 0.4, 0.2], 16.0, [0.1, 0.5, -0.3]);
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let jumps = [0.05, 0.051, 0.2, 0.33, 0.6, 0.61, 0.62, 0.95];
        let filt = bloch_counting_filter(&s, &s.r0, &jumps, &g).unwrap();
        let lin = linear_pi_p_counting(&s, &s.r0, &jumps, &g).unwrap();
        for (a, b) in filt.r.iter().zip(&lin) {
            assert!(a.max_abs_diff(&b.r()) < 1e-8, "{a:?} vs {:?}", b.r());
            assert!(a.norm() <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn no_coupling_keeps_likelihood_one() {
        let s = sc([0.0, 0.4, 0.0], [0.0; 3], 4.0, [1.0, 0.0, 0.0]);
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let lin = linear_pi_p_counting(&s, &s.r0, &[0.3, 0.5], &g).unwrap();
        for st in &lin {
            assert!((st.pi - 1.0).abs() < 1e-12);
        }
        let w = NoisePath::wiener(&g, 1, 0);
        for scheme in [PiPScheme::Euler, PiPScheme::Exponential] {
            let d = diffusive_pi_p(&s, &s.r0, &w, &g, scheme).unwrap();
            for st in &d {
                assert_eq!(st.pi, 1.0);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let l = BlochVector::EZ;
        let r0 = BlochVector::new(0.0, 0.0, 0.0);
        let c = closed_form_colinear(&l, &BlochVector::ZERO, &r0, 0.0, 1.0).unwrap();
        assert!((c.pi - (-2.0f64).exp()).abs() < 1e-15);
        assert!(c.p.z.abs() < 1e-15);
        for z in [-0.7, 0.0, 0.4, 1.0] {
            let c = closed_form_colinear(&l, &BlochVector::EZ, &BlochVector::new(0.0, 0.0, z), 0.0, 0.8).unwrap();
            assert!((c.r.z - z).abs() < 1e-15);
        }
        for w in [-1.0, 0.1, 2.0] {
            let c = closed_form_colinear(&l.scale(0.5), &BlochVector::ZERO, &r0, w, 0.3).unwrap();
            assert!((c.r.z - (w as f64).tanh()).abs() < 1e-15);
            let edge = closed_form_colinear(&l, &BlochVector::ZERO, &BlochVector::EZ.scale(-1.0), w, 0.3).unwrap();
            assert_eq!(edge.r.z, -1.0);
        }
        assert!(closed_form_colinear(&l, &BlochVector::EX, &r0, 0.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_ratio_matches_posterior_formula() {
        let l = BlochVector::new(0.0, 0.6, 0.8).scale(0.7);
        let k = l.scale(-1.3);
        let r0 = BlochVector::new(0.5, 0.3, -0.2);
        for (w, t) in [(0.3, 0.5), (-1.2, 2.0), (0.0, 0.1)] {
            let c = closed_form_colinear(&l, &k, &r0, w, t).unwrap();
            assert!(c.r.max_abs_diff(&c.p.scale(1.0 / c.pi)) < 1e-12);
        }
    }

    #[test]
    fn exponential_scheme_is_exact() {
        let s = sc([0.0, 0.0, 0.4], [0.0, 0.0, 0.5], 1.0, [0.3, -0.4, 0.3]);
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let w = NoisePath::wiener(&g, 4, 2);
        let path = diffusive_pi_p(&s, &s.r0, &w, &g, PiPScheme::Exponential).unwrap();
        let wt = w.cumulative();
        for (i, st) in path.iter().enumerate() {
            let c = closed_form_colinear(&s.l, &s.k(), &s.r0, wt[i], g.time(i)).unwrap();
            assert!((st.pi - c.pi).abs() < 1e-10);
            assert!(st.p.max_abs_diff(&c.p) < 1e-10);
        }
    }

    #[test]
    fn euler_tracks_density_sme_exactly() {
        let s = sc([0.1, 0.3, -0.2], [0.5, 0.1, 0.3], 1.0, [0.2, 0.2, 0.6]);
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let w = NoisePath::wiener(&g, 8, 0);
        let bloch = diffusive_pi_p(&s, &s.r0, &w, &g, PiPScheme::Euler).unwrap();
        let rho0 = bloch_to_density(&s.r0).unwrap();
        let rec = crate::trajectories::simulate_linear_diffusive_density(&s.diffusion_model(), &rho0, &g, &w).unwrap();
        for (k, st) in bloch.iter().enumerate() {
            let rho = rec.states.density(k);
            assert!(rho.max_abs_diff(st.density().unwrap().op()) < 1e-12);
        }
    }

    #[test]
    fn master_examples() {
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let r = bloch_master_solve(&BlochVector::ZERO, &BlochVector::EZ, &BlochVector::EX, &g).unwrap();
        for (i, v) in r.iter().enumerate() {
            assert!(v.max_abs_diff(&BlochVector::new((-2.0 * g.time(i)).exp(), 0.0, 0.0)) < 1e-8);
        }
        let g10 = TimeGrid::new(10.0, 0.5).unwrap();
        let r0 = BlochVector::new(0.5, 0.2, -0.4);
        let r = bloch_master_solve(&BlochVector::EZ.scale(3.0), &BlochVector::EZ, &r0, &g10).unwrap();
        assert!(r.last().unwrap().max_abs_diff(&BlochVector::new(0.0, 0.0, -0.4)) < 1e-6);
        let r = bloch_master_solve(&BlochVector::new(1.0, 2.0, 0.5), &BlochVector::ZERO, &r0, &g).unwrap();
        for v in &r {
            assert!((v.norm() - r0.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn localization_edges() {
        let s = localization_statistic(20.0, 1.0, 1.0, 1000, 1).unwrap();
        assert_eq!(s.mean_z, 1.0);
        let s = localization_statistic(20.0, 1.0, -1.0, 1000, 1).unwrap();
        assert_eq!(s.mean_z, -1.0);
        let s = localization_statistic(20.0, 1.0, 0.0, 20000, 1).unwrap();
        assert!(s.mean_z2 >= 0.97);
        assert!(s.mean_z.abs() < 4.0 * s.std_error_z);
        let s = localization_statistic(1e6, 1.0, 0.0, 2000, 2).unwrap();
        assert!(s.mean_z2 > 0.999);
    }

    proptest! {
        #[test]
        fn jump_keeps_ball(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64,
                           lx in -2.0..2.0f64, ly in -2.0..2.0f64, lz in -2.0..2.0f64, nu in 0.5..100.0f64) {
            let r = BlochVector::new(x, y, z);
            prop_assume!(r.norm() <= 1.0);
            let s = QubitScenario::new(BlochVector::ZERO, BlochVector::new(lx, ly, lz), nu, r).unwrap();
            if s.intensity(&r) > 1e-6 {
                prop_assert!(counting_jump(&s, &r).unwrap().norm() <= 1.0 + 1e-9);
            }
        }
    }
}
