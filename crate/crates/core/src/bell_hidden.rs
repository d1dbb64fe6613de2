//! Dispersion-free (zero-one) value assignments for qubit spin projections,
//! parametrized by `λ ∈ [−½, ½]`, whose λ-average reproduces `⟨σ(e)⟩ = e·r`.
//!
//! With `c = e·r` the assignment is
//!
//! * `c > 0`: `s_λ(e) = +1` iff `c ≥ 2λ` (the retained set of `e·r < 2λ`
//!   taken with strict inequality),
//! * `c < 0`: `s_λ(e) = −s_λ(−e)`,
//! * `c = 0`: `s_λ(e) = t(e)` for `λ ≤ 0` and `−t(e)` for `λ > 0`, where
//!   `t` is a fixed antisymmetric sign on the great circle orthogonal to `r`.
//!
//! This agrees with the set-algebra partition away from the measure-zero
//! circles `c = −2λ` and `c = 0`, and makes `s_λ(−e) = −s_λ(e)` hold
//! everywhere. For `|r| < 1` the same rule is applied to the sub-unit `r`
//! (an extension; the integral identity still holds exactly).

use std::io::Write;

use crate::error::{Error, Result};
use crate::statespace::BlochVector;
use crate::trajectories::fmt_f64;

/// Unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(BlochVector);

impl Direction {
    pub fn new(v: BlochVector) -> Result<Self> {
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("direction must have unit norm, got {}", v.norm())));
        }
        Ok(Direction(v))
    }

    /// Normalizes a nonzero vector.
    pub fn normalize(v: BlochVector) -> Result<Self> {
        v.unit().map(Direction).ok_or_else(|| Error::InvalidArgument("zero vector has no direction".into()))
    }

    pub fn vector(&self) -> BlochVector {
        self.0
    }

    pub fn flip(&self) -> Self {
        Direction(-self.0)
    }

    pub fn angle_to(&self, other: &Direction) -> f64 {
        // atan2 form is accurate for tiny angles
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

/// Right-handed orthonormal frame `(u, v, n)` with `n = r/|r|` (`e_z` for
/// `r = 0`).
fn frame(r: &BlochVector) -> (BlochVector, BlochVector, BlochVector) {
    let n = r.unit().unwrap_or(BlochVector::EZ);
    let a = n.to_array().map(f64::abs);
    let axis = if a[0] <= a[1] && a[0] <= a[2] {
        BlochVector::EX
    } else if a[1] <= a[2] {
        BlochVector::EY
    } else {
        BlochVector::EZ
    };
    let u = n.cross(&axis).unit().expect("axis is not parallel to n");
    let v = n.cross(&u);
    (u, v, n)
}

/// Antisymmetric sign on the great circle orthogonal to `r`.
fn tie_sign(e: &Direction, r: &BlochVector) -> f64 {
    let (u, v, n) = frame(r);
    let x = e.0;
    for d in [x.dot(&u), x.dot(&v), x.dot(&n)] {
        if d != 0.0 {
            return d.signum();
        }
    }
    1.0
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.abs() <= 0.5) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} outside [−½, ½]")));
    }
    Ok(())
}

fn check_ball(r: &BlochVector) -> Result<()> {
    if r.norm() > 1.0 + 1e-12 {
        return Err(Error::OutsideBall(r.norm()));
    }
    Ok(())
}

fn s_unchecked(e: &Direction, lambda: f64, r: &BlochVector) -> f64 {
    let c = e.0.dot(r);
    if c > 0.0 {
        if c >= 2.0 * lambda {
            1.0
        } else {
            -1.0
        }
    } else if c < 0.0 {
        if -c >= 2.0 * lambda {
            -1.0
        } else {
            1.0
        }
    } else {
        let t = tie_sign(e, r);
        if lambda <= 0.0 {
            t
        } else {
            -t
        }
    }
}

/// Dispersion-free value `s_λ(e) = ±1` of `σ(e)`.
pub fn s_lambda(e: &Direction, lambda: f64, r: &BlochVector) -> Result<f64> {
    check_lambda(lambda)?;
    check_ball(r)?;
    Ok(s_unchecked(e, lambda, r))
}

/// Zero-one probability `χ_λ^+(e) = ½(1 + s_λ(e))` of the event `P(e)`.
pub fn chi_plus(e: &Direction, lambda: f64, r: &BlochVector) -> Result<f64> {
    Ok(0.5 * (1.0 + s_lambda(e, lambda, r)?))
}

/// λ-values at which `s_λ(e)` can change: `±|c|/2` and `0`, clipped.
fn breakpoints(cs: &[f64]) -> Vec<f64> {
    let mut pts = vec![-0.5, 0.0, 0.5];
    for &c in cs {
        let h = (0.5 * c.abs()).min(0.5);
        pts.push(h);
        pts.push(-h);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Integrates a λ-step function over `[−½, ½]` exactly, sampling it once per
/// interval between breakpoints.
fn integrate_steps<F: Fn(f64) -> f64>(pts: &[f64], f: F) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]) * f(0.5 * (w[0] + w[1]))).sum()
}

/// `∫ s_λ(e) dλ` over `[−½, ½]` by breakpoint-aware quadrature (exact for
/// the step function up to rounding).
pub fn lambda_mean(e: &Direction, r: &BlochVector) -> Result<f64> {
    check_ball(r)?;
    let c = e.0.dot(r);
    Ok(integrate_steps(&breakpoints(&[c]), |l| s_unchecked(e, l, r)))
}

/// Midpoint rule with `n ≥ 1000` nodes.
pub fn lambda_mean_midpoint(e: &Direction, r: &BlochVector, n: usize) -> Result<f64> {
    check_ball(r)?;
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 nodes, got {n}")));
    }
    let h = 1.0 / n as f64;
    Ok((0..n).map(|i| s_unchecked(e, -0.5 + (i as f64 + 0.5) * h, r)).sum::<f64>() * h)
}

/// `M[χ_λ^+(e)χ_λ^+(f)]` by breakpoint-aware quadrature.
pub fn second_moment(e: &Direction, f: &Direction, r: &BlochVector) -> Result<f64> {
    check_ball(r)?;
    let pts = breakpoints(&[e.0.dot(r), f.0.dot(r)]);
    Ok(integrate_steps(&pts, |l| 0.25 * (1.0 + s_unchecked(e, l, r)) * (1.0 + s_unchecked(f, l, r))))
}

/// Midpoint-rule variant of [`second_moment`].
pub fn second_moment_midpoint(e: &Direction, f: &Direction, r: &BlochVector, n: usize) -> Result<f64> {
    check_ball(r)?;
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 nodes, got {n}")));
    }
    let h = 1.0 / n as f64;
    Ok((0..n)
        .map(|i| {
            let l = -0.5 + (i as f64 + 0.5) * h;
            0.25 * (1.0 + s_unchecked(e, l, r)) * (1.0 + s_unchecked(f, l, r))
        })
        .sum::<f64>()
        * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityRow {
    pub alpha: f64,
    pub moment: f64,
    /// `α·m(r₁) + (1−α)·m(r₂)`.
    pub interpolated: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinitySweep {
    pub rows: Vec<AffinityRow>,
    pub max_deviation: f64,
}

/// Compares the second moment at `r = αr₁ + (1−α)r₂` with the interpolation
/// of its endpoint values.
pub fn affinity_sweep(e: &Direction, f: &Direction, r1: &BlochVector, r2: &BlochVector, alphas: &[f64]) -> Result<AffinitySweep> {
    let m1 = second_moment(e, f, r1)?;
    let m2 = second_moment(e, f, r2)?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("mixing weight α = {alpha} outside [0, 1]")));
        }
        let r = r1.scale(alpha) + r2.scale(1.0 - alpha);
        let moment = second_moment(e, f, &r)?;
        let interpolated = alpha * m1 + (1.0 - alpha) * m2;
        rows.push(AffinityRow { alpha, moment, interpolated, deviation: (moment - interpolated).abs() });
    }
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(AffinitySweep { rows, max_deviation })
}

/// Which circle of the sphere a discontinuity was witnessed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// `e·r = 2λ`.
    Lambda,
    /// `e·r = −2λ`.
    MirrorLambda,
    /// `e·r = 0`.
    Equator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscontinuityWitness {
    pub boundary: BoundaryKind,
    /// Direction on the boundary.
    pub on_boundary: Direction,
    /// `(δ, s_λ(e_above), s_λ(e_below))` for directions at angular
    /// separation `δ` straddling the boundary (`e_above·r` larger).
    pub pairs: Vec<(f64, f64, f64)>,
    /// `s_λ(e_above) − s_λ(e_below)`, constant along the sequence.
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeReport {
    /// `|2λ| > |r|`: the circle `e·r = 2λ` does not meet the sphere.
    NoBoundary,
    Witness(DiscontinuityWitness),
}

/// Looks for a sign jump of `s_λ` at arbitrarily small angular separation.
///
/// Tries the circle `e·r = 2λ` first, then `e·r = −2λ`, then the equator
/// (for `λ < 0` the first two carry no jump). `azimuth` fixes where on the
/// circle the witness is placed.
pub fn discontinuity_probe(lambda: f64, r: &BlochVector, azimuth: f64, deltas: &[f64]) -> Result<ProbeReport> {
    check_lambda(lambda)?;
    check_ball(r)?;
    let rn = r.norm();
    if 2.0 * lambda.abs() > rn || rn == 0.0 {
        return Ok(ProbeReport::NoBoundary);
    }
    let (u, v, n) = frame(r);
    let radial = u.scale(azimuth.cos()) + v.scale(azimuth.sin());
    // direction with e·r = rn·cos θ
    let at = |theta: f64| Direction(n.scale(theta.cos()) + radial.scale(theta.sin()));
    for (kind, c) in [(BoundaryKind::Lambda, 2.0 * lambda), (BoundaryKind::MirrorLambda, -2.0 * lambda), (BoundaryKind::Equator, 0.0)] {
        let theta0 = (c / rn).clamp(-1.0, 1.0).acos();
        let mut pairs = Vec::with_capacity(deltas.len());
        for &d in deltas {
            // smaller polar angle means larger e·r
            let above = s_unchecked(&at(theta0 - 0.5 * d), lambda, r);
            let below = s_unchecked(&at(theta0 + 0.5 * d), lambda, r);
            pairs.push((d, above, below));
        }
        let jumps: Vec<f64> = pairs.iter().map(|p| p.1 - p.2).collect();
        if !jumps.is_empty() && jumps.iter().all(|&j| j != 0.0 && j == jumps[0]) {
            return Ok(ProbeReport::Witness(DiscontinuityWitness { boundary: kind, on_boundary: at(theta0), pairs, jump: jumps[0] }));
        }
    }
    Err(Error::InvalidArgument(format!("no sign jump found for λ = {lambda}")))
}

/// `n` nearly uniform directions on a Fibonacci spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Direction> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Direction::normalize(BlochVector::new(rho * phi.cos(), rho * phi.sin(), z)).expect("unit by construction")
        })
        .collect()
}

/// One row of a grid check of the λ-mean identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub e: Direction,
    pub quantum: f64,
    pub lambda_mean: f64,
    pub abs_error: f64,
}

pub fn grid_check(r: &BlochVector, n: usize) -> Result<Vec<GridRow>> {
    fibonacci_sphere(n)
        .into_iter()
        .map(|e| {
            let quantum = e.0.dot(r);
            let lambda_mean = lambda_mean(&e, r)?;
            Ok(GridRow { e, quantum, lambda_mean, abs_error: (lambda_mean - quantum).abs() })
        })
        .collect()
}

/// CSV header `e_x,e_y,e_z,quantum_expectation,lambda_mean,abs_error`.
pub fn write_grid_csv<W: Write>(mut w: W, rows: &[GridRow]) -> Result<()> {
    writeln!(w, "e_x,e_y,e_z,quantum_expectation,lambda_mean,abs_error")?;
    for row in rows {
        let v = row.e.0;
        let cols = [v.x, v.y, v.z, row.quantum, row.lambda_mean, row.abs_error].map(fmt_f64);
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}
