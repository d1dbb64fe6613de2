//! Small dense complex matrices, qubit states and Pauli calculus.
//!
//! Everything here is fixed to dimension 2 (a qubit) or 4 (qubit ⊗ qubit).
//! Storage is inline so operators and states are `Copy` and cheap to move
//! between worker threads.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for Hermitian / unitary / projector checks.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Eigenvalues in `[-EIGEN_FLOOR, 0)` are treated as round-off and clamped.
pub const EIGEN_FLOOR: f64 = 1e-10;

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 => Ok(()),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Dense `dim × dim` complex matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Operator {
    dim: usize,
    data: [C64; 16],
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 4);
        Operator { dim, data: [ZERO; 16] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op[(i, i)] = ONE;
        }
        op
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite operator entry".into()));
        }
        let mut op = Self::zeros(dim);
        op.data[..dim * dim].copy_from_slice(entries);
        Ok(op)
    }

    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(dim, &c)
    }

    pub fn diagonal(values: &[C64]) -> Result<Self> {
        check_dim(values.len())?;
        let mut op = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            op[(i, i)] = *v;
        }
        Ok(op)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for z in out.data[..self.dim * self.dim].iter_mut() {
            *z *= s;
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(*self * *other)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(*self + *other)
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(*self * *other - *other * *self)
    }

    /// `Tr(A ρ)`.
    pub fn expectation(&self, rho: &Operator) -> Result<C64> {
        Ok(self.try_mul(rho)?.trace())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let m = self.to_nalgebra();
        m.singular_values().iter().cloned().fold(0.0, f64::max)
    }

    /// Max-abs entry of `A − B`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).max_abs_diff(&Operator::identity(self.dim)) <= tol
    }

    pub fn projector_deviation(&self) -> f64 {
        let sq = (*self * *self).max_abs_diff(self);
        sq.max(self.hermitian_deviation())
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.dim, v.dim, "operator/state dimension mismatch");
        let mut out = StateVector::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = ZERO;
            for j in 0..self.dim {
                acc += self[(i, j)] * v.amps[j];
            }
            out.amps[i] = acc;
        }
        out
    }

    /// Kronecker product of two qubit operators (result has dimension 4).
    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.dim != 2 || other.dim != 2 {
            return Err(Error::UnsupportedDimension(self.dim * other.dim));
        }
        let mut out = Self::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[(2 * i + k, 2 * j + l)] = self[(i, j)] * other[(k, l)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let dev = self.hermitian_deviation();
        if dev > STRUCTURE_TOL.max(1e-10 * self.frobenius_norm()) {
            return Err(Error::NotHermitian(dev));
        }
        let mut ev: Vec<f64> = if self.dim == 2 {
            let a = self[(0, 0)].re;
            let d = self[(1, 1)].re;
            let b = self[(0, 1)];
            let mean = 0.5 * (a + d);
            let half = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            vec![mean - half, mean + half]
        } else {
            let eig = nalgebra::SymmetricEigen::new(self.to_nalgebra());
            eig.eigenvalues.iter().cloned().collect()
        };
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(ev)
    }

    /// Matrix exponential `exp(A)`.
    ///
    /// Dimension 2 uses the closed form for `a·I + B` with `B` traceless
    /// (`B² = −det(B)·I`); dimension 4 uses scaling and squaring with a
    /// truncated Taylor series.
    pub fn expm(&self) -> Self {
        if self.dim == 2 {
            let half_tr = self.trace() * 0.5;
            let b = *self - Operator::identity(2).scale(half_tr);
            // B² = s² I with s² = b00² + b01 b10 for traceless B
            let s2 = b[(0, 0)] * b[(0, 0)] + b[(0, 1)] * b[(1, 0)];
            let s = s2.sqrt();
            let (cosh, sinhc) = if s.norm() < 1e-4 {
                (
                    ONE + s2 * 0.5 + s2 * s2 / 24.0,
                    ONE + s2 / 6.0 + s2 * s2 / 120.0,
                )
            } else {
                (s.cosh(), s.sinh() / s)
            };
            let e = half_tr.exp();
            (Operator::identity(2).scale(cosh) + b.scale(sinhc)).scale(e)
        } else {
            let norm = self.frobenius_norm();
            let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
            let a = self.scale_re(0.5f64.powi(squarings as i32));
            let mut term = Operator::identity(self.dim);
            let mut sum = term;
            for k in 1..=18 {
                term = (term * a).scale_re(1.0 / k as f64);
                sum = sum + term;
            }
            for _ in 0..squarings {
                sum = sum * sum;
            }
            sum
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for Operator {
    type Output = Operator;
    #[inline]
    fn mul(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for Operator {
    type Output = Operator;
    #[inline]
    fn add(mut self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a += b;
        }
        self
    }
}

impl AddAssign for Operator {
    fn add_assign(&mut self, rhs: Operator) {
        *self = *self + rhs;
    }
}

impl Sub for Operator {
    type Output = Operator;
    #[inline]
    fn sub(mut self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a -= b;
        }
        self
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:>10.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A (possibly unnormalized) state vector.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct StateVector {
    dim: usize,
    amps: [C64; 4],
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        StateVector { dim, amps: [ZERO; 4] }
    }

    pub fn new(amps: &[C64]) -> Result<Self> {
        check_dim(amps.len())?;
        let mut v = Self::zeros(amps.len());
        v.amps[..amps.len()].copy_from_slice(amps);
        Ok(v)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        let c: Vec<C64> = amps.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(&c)
    }

    /// Computational basis vector `δ_k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.amps[k] = ONE;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps[..self.dim]
    }

    pub fn get(&self, k: usize) -> C64 {
        self.amps[k]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot normalize vector of norm {n}")));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for z in out.amps[..self.dim].iter_mut() {
            *z *= s;
        }
        out
    }

    /// `⟨self|other⟩`, antilinear in the first argument.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim, other.dim);
        self.amplitudes().iter().zip(other.amplitudes()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Self) -> Operator {
        assert_eq!(self.dim, other.dim);
        let mut op = Operator::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                op[(i, j)] = self.amps[i] * other.amps[j].conj();
            }
        }
        op
    }

    /// `χχ†` (unnormalized if `χ` is).
    pub fn projector(&self) -> Operator {
        self.outer(self)
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.dim != 2 || other.dim != 2 {
            return Err(Error::UnsupportedDimension(self.dim * other.dim));
        }
        let mut v = Self::zeros(4);
        for i in 0..2 {
            for k in 0..2 {
                v.amps[2 * i + k] = self.amps[i] * other.amps[k];
            }
        }
        Ok(v)
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(mut self, rhs: StateVector) -> StateVector {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.amps.iter_mut().zip(rhs.amps.iter()) {
            *a += b;
        }
        self
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(mut self, rhs: StateVector) -> StateVector {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.amps.iter_mut().zip(rhs.amps.iter()) {
            *a -= b;
        }
        self
    }
}

/// Validated density matrix.
///
/// The normalized variant has unit trace; the unnormalized variant (`ϱ`)
/// only requires a positive trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let rho = Self::new_unnormalized(op)?;
        let tr = op.trace().re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr} ≠ 1")));
        }
        Ok(rho)
    }

    pub fn new_unnormalized(op: Operator) -> Result<Self> {
        let dev = op.hermitian_deviation();
        if dev > STRUCTURE_TOL.max(1e-12 * op.frobenius_norm()) {
            return Err(Error::NotHermitian(dev));
        }
        let ev = op.hermitian_eigenvalues()?;
        let scale = op.trace().re.abs().max(1.0);
        if ev[0] < -EIGEN_FLOOR * scale {
            return Err(Error::NotPositive(ev[0]));
        }
        if !(op.trace().re > 0.0) {
            return Err(Error::InvalidArgument("density matrix trace must be positive".into()));
        }
        Ok(DensityMatrix(op))
    }

    /// Wraps an operator already checked by the caller against its own
    /// (integration-level) tolerances.
    pub(crate) fn assume_valid(op: Operator) -> Self {
        DensityMatrix(op)
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        Self::new(psi.normalized()?.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(Operator::identity(dim).scale_re(1.0 / dim as f64))
    }

    pub fn op(&self) -> &Operator {
        &self.0
    }

    pub fn into_op(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn normalized(&self) -> Self {
        DensityMatrix(self.0.scale_re(1.0 / self.trace()))
    }
}

/// Real 3-vector used for Bloch vectors and Pauli coefficient triples.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub const ZERO: BlochVector = BlochVector::new(0.0, 0.0, 0.0);
    pub const EX: BlochVector = BlochVector::new(1.0, 0.0, 0.0);
    pub const EY: BlochVector = BlochVector::new(0.0, 1.0, 0.0);
    pub const EZ: BlochVector = BlochVector::new(0.0, 0.0, 1.0);

    pub fn from_array(a: [f64; 3]) -> Self {
        BlochVector::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        BlochVector::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        BlochVector::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn unit(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        (self.x - o.x).abs().max((self.y - o.y).abs()).max((self.z - o.z).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for BlochVector {
    type Output = BlochVector;
    fn add(self, o: BlochVector) -> BlochVector {
        BlochVector::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for BlochVector {
    type Output = BlochVector;
    fn sub(self, o: BlochVector) -> BlochVector {
        BlochVector::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        self.scale(-1.0)
    }
}

impl Mul<BlochVector> for f64 {
    type Output = BlochVector;
    fn mul(self, v: BlochVector) -> BlochVector {
        v.scale(self)
    }
}

pub fn sigma_x() -> Operator {
    pauli(&BlochVector::EX)
}

pub fn sigma_y() -> Operator {
    pauli(&BlochVector::EY)
}

pub fn sigma_z() -> Operator {
    pauli(&BlochVector::EZ)
}

/// `σ(l) = l_x σ_x + l_y σ_y + l_z σ_z`.
pub fn pauli(l: &BlochVector) -> Operator {
    let mut op = Operator::zeros(2);
    op[(0, 0)] = C64::new(l.z, 0.0);
    op[(1, 1)] = C64::new(-l.z, 0.0);
    op[(0, 1)] = C64::new(l.x, -l.y);
    op[(1, 0)] = C64::new(l.x, l.y);
    op
}

/// `ρ = ½(I + σ(r))`.
pub fn bloch_to_density(r: &BlochVector) -> Result<DensityMatrix> {
    let n = r.norm();
    if !n.is_finite() || n > 1.0 + 1e-10 {
        return Err(Error::OutsideBall(n));
    }
    Ok(DensityMatrix((Operator::identity(2) + pauli(r)).scale_re(0.5)))
}

/// Unit vector `ψ` with `ψψ† = ½(I + σ(r))`, for `|r| = 1` within 1e-9.
pub fn pure_state(r: &BlochVector) -> Result<StateVector> {
    let n = r.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("pure state needs |r| = 1, got {n}")));
    }
    let r = r.scale(1.0 / n);
    // branch away from the pole where the denominator vanishes
    let amps = if r.z >= 0.0 {
        let s = (2.0 * (1.0 + r.z)).sqrt();
        [C64::new((1.0 + r.z) / s, 0.0), C64::new(r.x / s, r.y / s)]
    } else {
        let s = (2.0 * (1.0 - r.z)).sqrt();
        [C64::new(r.x / s, -r.y / s), C64::new((1.0 - r.z) / s, 0.0)]
    };
    StateVector::new(&amps)
}

/// Components `Tr(σ_a ρ)`; for unnormalized input this returns the
/// polarization `p` of `ϱ = ½(σ(p) + πI)`.
pub fn density_to_bloch(rho: &Operator) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho.dim() });
    }
    Ok(BlochVector::new(
        2.0 * rho[(0, 1)].re,
        -2.0 * rho[(0, 1)].im,
        (rho[(0, 0)] - rho[(1, 1)]).re,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

/// Shannon entropy of a probability vector (zero entries contribute zero).
pub fn shannon_entropy(probs: &[f64], base: LogBase) -> f64 {
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    match base {
        LogBase::Bits => h / std::f64::consts::LN_2,
        LogBase::Nats => h,
    }
}

/// `S(ρ) = −Tr ρ log ρ`, in bits by default.
pub fn von_neumann_entropy(rho: &Operator, base: LogBase) -> Result<f64> {
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("entropy needs unit trace, got {tr}")));
    }
    let ev = rho.hermitian_eigenvalues()?;
    if ev[0] < -EIGEN_FLOOR {
        return Err(Error::NotPositive(ev[0]));
    }
    let clamped: Vec<f64> = ev.iter().map(|&v| v.max(0.0)).collect();
    Ok(shannon_entropy(&clamped, base).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_basics() {
        let z = pauli(&BlochVector::EZ);
        assert_eq!(z, Operator::diagonal(&[ONE, -ONE]).unwrap());
        let x = pauli(&BlochVector::EX);
        assert_eq!(x, Operator::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap());
        let l = pauli(&BlochVector::new(1.0, 2.0, 2.0));
        assert!(l.is_hermitian(0.0));
        assert_eq!(l.trace(), ZERO);
        // hand-multiplied 2x2 product
        let mut sq = Operator::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                sq[(i, j)] = l[(i, 0)] * l[(0, j)] + l[(i, 1)] * l[(1, j)];
            }
        }
        assert!(sq.max_abs_diff(&Operator::identity(2).scale_re(9.0)) < 1e-14);
    }

    #[test]
    fn pauli_commutator() {
        let comm = sigma_x().commutator(&sigma_y()).unwrap();
        assert!(comm.max_abs_diff(&sigma_z().scale(c(0.0, 2.0))) < 1e-15);
        let a = pauli(&BlochVector::new(0.3, -0.2, 0.9));
        assert_eq!(a.commutator(&a).unwrap(), Operator::zeros(2));
    }

    #[test]
    fn bloch_density_examples() {
        let rho = bloch_to_density(&BlochVector::ZERO).unwrap();
        assert!(rho.op().max_abs_diff(&Operator::identity(2).scale_re(0.5)) < 1e-15);
        let up = bloch_to_density(&BlochVector::EZ).unwrap();
        assert!(up.op().max_abs_diff(&Operator::diagonal(&[ONE, ZERO]).unwrap()) < 1e-15);
        let px = bloch_to_density(&BlochVector::EX).unwrap();
        assert!((*px.op() * *px.op()).max_abs_diff(px.op()) < 1e-14);
        assert!(bloch_to_density(&BlochVector::new(1.0, 1.0, 0.0)).is_err());

        assert_eq!(
            density_to_bloch(&Operator::identity(2).scale_re(0.5)).unwrap(),
            BlochVector::ZERO
        );
        assert_eq!(
            density_to_bloch(&Operator::diagonal(&[ONE, ZERO]).unwrap()).unwrap(),
            BlochVector::EZ
        );
        assert!(density_to_bloch(&Operator::identity(4)).is_err());
    }

    #[test]
    fn expectation_matches_dot_product() {
        let rho = bloch_to_density(&BlochVector::new(0.0, 0.0, 0.3)).unwrap();
        let v = pauli(&BlochVector::EZ).expectation(rho.op()).unwrap();
        assert_abs_diff_eq!(v.re, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn entropy_examples() {
        let mixed = Operator::identity(2).scale_re(0.5);
        assert_abs_diff_eq!(von_neumann_entropy(&mixed, LogBase::Bits).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            von_neumann_entropy(&mixed, LogBase::Nats).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-14
        );
        let psi = StateVector::new(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&psi.projector(), LogBase::Bits).unwrap(), 0.0, epsilon = 1e-12);
        let d = Operator::diagonal(&[c(0.75, 0.0), c(0.25, 0.0)]).unwrap();
        let expected = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert_abs_diff_eq!(von_neumann_entropy(&d, LogBase::Bits).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.811_278_124_459_132_8, epsilon = 1e-15);
        let bad = Operator::diagonal(&[c(1.5, 0.0), c(-0.5, 0.0)]).unwrap();
        assert!(matches!(von_neumann_entropy(&bad, LogBase::Bits), Err(Error::NotPositive(_))));
        // round-off sized negative eigenvalue is clamped
        let nearly = Operator::diagonal(&[c(1.0 + 1e-11, 0.0), c(-1e-11, 0.0)]).unwrap();
        assert!(von_neumann_entropy(&nearly, LogBase::Bits).unwrap() >= 0.0);
    }

    #[test]
    fn entropy_dim4() {
        let d = Operator::diagonal(&[c(0.25, 0.0); 4]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&d, LogBase::Bits).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn expm_closed_form_vs_taylor() {
        let a = Operator::from_rows(2, &[c(0.3, 1.0), c(-0.5, 0.2), c(0.7, 0.0), c(-1.1, 0.4)]).unwrap();
        let e2 = a.expm();
        // same matrix embedded block-diagonally in dim 4 goes through the Taylor path
        let mut big = Operator::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                big[(i, j)] = a[(i, j)];
            }
        }
        let e4 = big.expm();
        for i in 0..2 {
            for j in 0..2 {
                assert!((e4[(i, j)] - e2[(i, j)]).norm() < 1e-12);
            }
        }
        assert!((e4[(2, 2)] - ONE).norm() < 1e-14);
        // nilpotent case: exp(N) = I + N
        let n = Operator::from_rows(2, &[ZERO, c(2.0, 0.0), ZERO, ZERO]).unwrap();
        assert!(n.expm().max_abs_diff(&(Operator::identity(2) + n)) < 1e-15);
    }

    #[test]
    fn unitary_and_hermitian_checks() {
        let h = pauli(&BlochVector::new(0.2, 0.4, -0.1));
        assert!(h.is_hermitian(1e-12));
        let u = h.scale(c(0.0, -1.0)).expm();
        assert!(u.is_unitary(1e-12));
        assert!(!h.is_unitary(1e-3));
        let nh = Operator::from_rows(2, &[ONE, ONE, ZERO, ONE]).unwrap();
        assert!(!nh.is_hermitian(1e-12));
        assert!(matches!(DensityMatrix::new(nh), Err(Error::NotHermitian(_))));
    }

    fn vec3() -> impl Strategy<Value = BlochVector> {
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, z)| BlochVector::new(x, y, z))
    }

    fn ball() -> impl Strategy<Value = BlochVector> {
        vec3().prop_map(|v| {
            let n = v.norm();
            if n > 1.0 { v.scale(0.999 / n) } else { v }
        })
    }

    proptest! {
        #[test]
        fn anticommutation(l in vec3(), m in vec3()) {
            let (sl, sm) = (pauli(&l), pauli(&m));
            let lhs = sl * sm + sm * sl;
            let rhs = Operator::identity(2).scale_re(2.0 * l.dot(&m));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn pure_state_reproduces_bloch(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            let v = BlochVector::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let r = v.scale(1.0 / v.norm());
            let psi = pure_state(&r).unwrap();
            prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
            prop_assert!(density_to_bloch(&psi.projector()).unwrap().max_abs_diff(&r) < 1e-12);
        }

        #[test]
        fn bloch_round_trip_and_purity(r in ball()) {
            let rho = bloch_to_density(&r).unwrap();
            let back = density_to_bloch(rho.op()).unwrap();
            prop_assert!(back.max_abs_diff(&r) < 1e-12);
            prop_assert!((rho.purity() - 0.5 * (1.0 + r.dot(&r))).abs() < 1e-12);
            let again = bloch_to_density(&back).unwrap();
            prop_assert!(again.op().max_abs_diff(rho.op()) < 1e-12);
        }

        #[test]
        fn entropy_unitary_invariance(r in ball(), h in vec3(), t in 0.0f64..3.0) {
            let rho = bloch_to_density(&r).unwrap();
            let u = pauli(&h).scale(c(0.0, -t)).expm();
            let rotated = u * *rho.op() * u.adjoint();
            let s0 = von_neumann_entropy(rho.op(), LogBase::Bits).unwrap();
            let s1 = von_neumann_entropy(&rotated, LogBase::Bits).unwrap();
            prop_assert!((s0 - s1).abs() < 1e-10);
        }
    }
}
