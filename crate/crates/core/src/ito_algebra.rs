//! Symbolic quantum Itô algebra over the canonical differentials `dΛ_μ^ν`.
//!
//! Indices run over `μ ∈ {−, 1..d}` (lower) and `ν ∈ {1..d, +}` (upper),
//! with `dΛ_−^+ = dt`. Products follow the vacuum table
//! `dΛ_μ^ι · dΛ_κ^ν = δ_κ^ι dΛ_μ^ν`. For `d = 1` the four basis elements are
//! `dt`, the annihilation `dΛ_−`, the creation `dΛ^+` and the counting `dΛ`.
//!
//! Coefficients are either exact complex rationals (so table identities are
//! checked without tolerances), floating complex numbers, or qubit
//! [`Operator`]s (left-to-right order is kept when multiplying).
//!
//! # Text format
//!
//! [`ItoElement::render`] produces one line: terms ordered `dt`, annihilation
//! `dΛ_−^k`, creation `dΛ_j^+`, then `dΛ_j^k` (by index within each group),
//! joined by ` + ` / ` - `, each written `coef*name` (a unit coefficient is
//! omitted). Basis names for `d = 1` are `dt`, `dL(-)`, `dL(+)` and `dL`;
//! for `d > 1` they are `dt`, `dL(-,k)`, `dL(j,+)` and `dL(j,k)` (lower index
//! first). The zero element renders as `0`. Example: `dt + 2*dL(-)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::statespace::{Operator, C64};

/// Exact complex rational.
pub type ExactComplex = Complex<BigRational>;

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact integer `n` as a complex rational.
pub fn exact_int(n: i64) -> ExactComplex {
    Complex::new(rational(n, 1), BigRational::zero())
}

/// Exact `(re_num/re_den) + i (im_num/im_den)`.
pub fn exact(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> ExactComplex {
    Complex::new(rational(re_num, re_den), rational(im_num, im_den))
}

/// Coefficient ring for Itô elements.
pub trait Coefficient: Clone + PartialEq + fmt::Debug {
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Conjugate for scalars, Hermitian adjoint for operators.
    fn adjoint(&self) -> Self;
    fn render(&self) -> String;
    /// System dimension for operator coefficients, `None` for scalars.
    fn system_dim(&self) -> Option<usize> {
        None
    }
}

/// Scalar coefficients: these have a unit and admit a matrix representation.
pub trait Scalar: Coefficient {
    fn zero() -> Self;
    fn one() -> Self;
}

impl Coefficient for ExactComplex {
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn adjoint(&self) -> Self {
        self.conj()
    }
    fn render(&self) -> String {
        let fmt_q = |q: &BigRational| {
            if q.is_integer() {
                q.numer().to_string()
            } else {
                format!("{}/{}", q.numer(), q.denom())
            }
        };
        let re_zero = Zero::is_zero(&self.re);
        let im_zero = Zero::is_zero(&self.im);
        let im_part = |q: &BigRational| {
            if q.is_one() {
                "i".to_string()
            } else if (-q.clone()).is_one() {
                "-i".to_string()
            } else {
                format!("{}i", fmt_q(q))
            }
        };
        match (re_zero, im_zero) {
            (_, true) => fmt_q(&self.re),
            (true, false) => im_part(&self.im),
            (false, false) => {
                let im = im_part(&self.im);
                let sep = if self.im.is_negative() { "" } else { "+" };
                format!("({}{}{})", fmt_q(&self.re), sep, im)
            }
        }
    }
}

impl Scalar for ExactComplex {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
}

impl Coefficient for C64 {
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn adjoint(&self) -> Self {
        self.conj()
    }
    fn render(&self) -> String {
        if self.im == 0.0 {
            format!("{}", self.re)
        } else if self.re == 0.0 {
            format!("{}i", self.im)
        } else {
            format!("({}{:+}i)", self.re, self.im)
        }
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
}

impl Coefficient for Operator {
    fn is_zero(&self) -> bool {
        self.entries().iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
    fn add(&self, other: &Self) -> Self {
        *self + *other
    }
    fn mul(&self, other: &Self) -> Self {
        *self * *other
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn adjoint(&self) -> Self {
        Operator::adjoint(self)
    }
    fn render(&self) -> String {
        let n = self.dim();
        let rows: Vec<String> = (0..n)
            .map(|i| {
                let cols: Vec<String> = (0..n).map(|j| Coefficient::render(&self[(i, j)])).collect();
                format!("[{}]", cols.join(","))
            })
            .collect();
        format!("[{}]", rows.join(","))
    }
    fn system_dim(&self) -> Option<usize> {
        Some(self.dim())
    }
}

/// Lower index `μ ∈ {−, 1..d}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lower {
    Minus,
    Mode(u32),
}

/// Upper index `ν ∈ {1..d, +}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Upper {
    Mode(u32),
    Plus,
}

/// Canonical differential `dΛ_lower^upper`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItoBasisIndex {
    pub lower: Lower,
    pub upper: Upper,
}

impl ItoBasisIndex {
    pub const DT: ItoBasisIndex = ItoBasisIndex { lower: Lower::Minus, upper: Upper::Plus };

    pub fn new(lower: Lower, upper: Upper, d: u32) -> Result<Self> {
        let ok = |k: u32| (1..=d).contains(&k);
        match (lower, upper) {
            (Lower::Mode(k), _) if !ok(k) => Err(Error::InvalidArgument(format!("mode {k} outside 1..={d}"))),
            (_, Upper::Mode(k)) if !ok(k) => Err(Error::InvalidArgument(format!("mode {k} outside 1..={d}"))),
            _ => Ok(ItoBasisIndex { lower, upper }),
        }
    }

    /// All `(d+1)²` basis indices in canonical order.
    pub fn all(d: u32) -> Vec<ItoBasisIndex> {
        let lowers = std::iter::once(Lower::Minus).chain((1..=d).map(Lower::Mode));
        let mut out = Vec::new();
        for lo in lowers {
            for k in 1..=d {
                out.push(ItoBasisIndex { lower: lo, upper: Upper::Mode(k) });
            }
            out.push(ItoBasisIndex { lower: lo, upper: Upper::Plus });
        }
        out.sort();
        out
    }

    /// Product of two basis differentials: `Some(basis)` or `None` for zero.
    pub fn product(self, rhs: ItoBasisIndex) -> Option<ItoBasisIndex> {
        match (self.upper, rhs.lower) {
            (Upper::Mode(i), Lower::Mode(k)) if i == k => {
                Some(ItoBasisIndex { lower: self.lower, upper: rhs.upper })
            }
            _ => None,
        }
    }

    /// Index switch `dΛ_μ^ν ↦ dΛ_{−ν}^{−μ}` with `−(−,+) = (+,−)`.
    pub fn star(self) -> ItoBasisIndex {
        let lower = match self.upper {
            Upper::Mode(k) => Lower::Mode(k),
            Upper::Plus => Lower::Minus,
        };
        let upper = match self.lower {
            Lower::Mode(k) => Upper::Mode(k),
            Lower::Minus => Upper::Plus,
        };
        ItoBasisIndex { lower, upper }
    }

    fn row(self) -> usize {
        match self.lower {
            Lower::Minus => 0,
            Lower::Mode(k) => k as usize,
        }
    }

    fn col(self, d: u32) -> usize {
        match self.upper {
            Upper::Mode(k) => k as usize,
            Upper::Plus => d as usize + 1,
        }
    }

    pub fn name(self, d: u32) -> String {
        match (self.lower, self.upper, d) {
            (Lower::Minus, Upper::Plus, _) => "dt".into(),
            (Lower::Minus, Upper::Mode(_), 1) => "dL(-)".into(),
            (Lower::Mode(_), Upper::Plus, 1) => "dL(+)".into(),
            (Lower::Mode(_), Upper::Mode(_), 1) => "dL".into(),
            (Lower::Minus, Upper::Mode(k), _) => format!("dL(-,{k})"),
            (Lower::Mode(j), Upper::Plus, _) => format!("dL({j},+)"),
            (Lower::Mode(j), Upper::Mode(k), _) => format!("dL({j},{k})"),
        }
    }
}

/// Finitely supported linear combination of canonical differentials.
///
/// Zero coefficients are pruned on construction, so `==` is structural.
#[derive(Clone, PartialEq)]
pub struct ItoElement<C: Coefficient> {
    d: u32,
    terms: BTreeMap<ItoBasisIndex, C>,
}

impl<C: Coefficient> fmt::Debug for ItoElement<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ItoElement(d={}; {})", self.d, self.render())
    }
}

impl<C: Coefficient> fmt::Display for ItoElement<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl<C: Coefficient> ItoElement<C> {
    pub fn zero(d: u32) -> Self {
        assert!(d >= 1, "Ito algebra dimension must be at least 1");
        ItoElement { d, terms: BTreeMap::new() }
    }

    /// Builds an element from `(basis, coefficient)` pairs; repeated indices
    /// are summed. Operator coefficients are only allowed for `d = 1` and
    /// must share one system dimension.
    pub fn from_terms(d: u32, terms: impl IntoIterator<Item = (ItoBasisIndex, C)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("Ito algebra dimension must be at least 1".into()));
        }
        let mut out = Self::zero(d);
        let mut sys_dim = None;
        for (idx, c) in terms {
            let idx = ItoBasisIndex::new(idx.lower, idx.upper, d)?;
            if let Some(sd) = c.system_dim() {
                if d != 1 {
                    return Err(Error::InvalidArgument(
                        "operator coefficients are supported only for d = 1".into(),
                    ));
                }
                match sys_dim {
                    None => sys_dim = Some(sd),
                    Some(prev) if prev != sd => {
                        return Err(Error::DimensionMismatch { expected: prev, got: sd })
                    }
                    _ => {}
                }
            }
            out.add_term(idx, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, idx: ItoBasisIndex, c: C) {
        let updated = match self.terms.remove(&idx) {
            Some(prev) => prev.add(&c),
            None => c,
        };
        if !updated.is_zero() {
            self.terms.insert(idx, updated);
        }
    }

    pub fn dimension(&self) -> u32 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, idx: ItoBasisIndex) -> Option<&C> {
        self.terms.get(&idx)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ItoBasisIndex, &C)> {
        self.terms.iter()
    }

    fn system_dim(&self) -> Option<usize> {
        self.terms.values().next().and_then(|c| c.system_dim())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.d as usize, got: other.d as usize });
        }
        if let (Some(a), Some(b)) = (self.system_dim(), other.system_dim()) {
            if a != b {
                return Err(Error::DimensionMismatch { expected: a, got: b });
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(*idx, c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        ItoElement { d: self.d, terms: self.terms.iter().map(|(k, c)| (*k, c.neg())).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// `c · a`, multiplying every coefficient on the left.
    pub fn scale_left(&self, c: &C) -> Self {
        let mut out = Self::zero(self.d);
        for (idx, a) in &self.terms {
            out.add_term(*idx, c.mul(a));
        }
        out
    }

    /// `a · c`, multiplying every coefficient on the right.
    pub fn scale_right(&self, c: &C) -> Self {
        let mut out = Self::zero(self.d);
        for (idx, a) in &self.terms {
            out.add_term(*idx, a.mul(c));
        }
        out
    }

    /// Table product; the coefficient of `self` stays on the left.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.d);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                if let Some(idx) = ia.product(*ib) {
                    out.add_term(idx, ca.mul(cb));
                }
            }
        }
        Ok(out)
    }

    /// Quantum Itô involution: `(α dΛ_μ^ν)★ = α† dΛ_{−ν}^{−μ}`.
    pub fn star(&self) -> Self {
        let mut out = Self::zero(self.d);
        for (idx, c) in &self.terms {
            out.add_term(idx.star(), c.adjoint());
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        let mut ordered: Vec<_> = self.terms.iter().collect();
        ordered.sort_by_key(|(idx, _)| {
            let group = match (idx.lower, idx.upper) {
                (Lower::Minus, Upper::Plus) => 0,
                (Lower::Minus, _) => 1,
                (_, Upper::Plus) => 2,
                _ => 3,
            };
            (group, **idx)
        });
        for (n, (idx, c)) in ordered.into_iter().enumerate() {
            let name = idx.name(self.d);
            let coef = c.render();
            let (negative, body) = match coef.as_str() {
                "1" => (false, name),
                "-1" => (true, name),
                s if s.starts_with('-') => (true, format!("{}*{}", &s[1..], name)),
                s => (false, format!("{s}*{name}")),
            };
            match (n, negative) {
                (0, false) => out.push_str(&body),
                (0, true) => {
                    out.push('-');
                    out.push_str(&body);
                }
                (_, false) => {
                    out.push_str(" + ");
                    out.push_str(&body);
                }
                (_, true) => {
                    out.push_str(" - ");
                    out.push_str(&body);
                }
            }
        }
        out
    }
}

impl<C: Scalar> ItoElement<C> {
    pub fn basis(d: u32, idx: ItoBasisIndex) -> Result<Self> {
        Self::from_terms(d, [(idx, C::one())])
    }

    pub fn dt(d: u32) -> Self {
        Self::from_terms(d, [(ItoBasisIndex::DT, C::one())]).expect("dt is valid in every dimension")
    }

    /// `dΛ_−` for `d = 1`.
    pub fn annihilation() -> Self {
        Self::basis(1, ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) }).unwrap()
    }

    /// `dΛ^+` for `d = 1`.
    pub fn creation() -> Self {
        Self::basis(1, ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Plus }).unwrap()
    }

    /// `dΛ` for `d = 1`.
    pub fn counting() -> Self {
        Self::basis(1, ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Mode(1) }).unwrap()
    }

    /// `dw = dΛ_− + dΛ^+`.
    pub fn wiener() -> Self {
        Self::annihilation().add(&Self::creation()).unwrap()
    }

    /// `dm = dΛ_− + dΛ^+ + dΛ` (compensated Poisson).
    pub fn poisson() -> Self {
        Self::wiener().add(&Self::counting()).unwrap()
    }

    /// Scalar multiple `c · self`.
    pub fn scale(&self, c: &C) -> Self {
        self.scale_left(c)
    }

    /// Representation by `(d+2) × (d+2)` upper triangular matrices in the
    /// basis `(−, 1..d, +)`: `dΛ_μ^ν ↦ E_{μν}`.
    pub fn matrix_rep(&self) -> TriangularRep<C> {
        let n = self.d as usize + 2;
        let mut rep = TriangularRep::<C>::zeros(n);
        for (idx, c) in &self.terms {
            let (i, j) = (idx.row(), idx.col(self.d));
            rep.entries[i * n + j] = rep.entries[i * n + j].add(c);
        }
        rep
    }
}

/// Standard one-dimensional noise `dy = dΛ^+ + dΛ_− + ε dΛ`, satisfying
/// `(dy)² = dt + ε dy`. `ε = 0` gives `dw`, `ε = 1` gives `dm`.
pub fn standard_noise(epsilon: &BigRational) -> Result<ItoElement<ExactComplex>> {
    if epsilon.is_negative() {
        return Err(Error::InvalidArgument(format!("noise parameter ε = {epsilon} must be ≥ 0")));
    }
    let eps = Complex::new(epsilon.clone(), BigRational::zero());
    ItoElement::wiener().add(&ItoElement::counting().scale(&eps))
}

/// Floating-point variant of [`standard_noise`] for embedded numeric models.
pub fn standard_noise_f64(epsilon: f64) -> Result<ItoElement<C64>> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise parameter ε = {epsilon} must be ≥ 0")));
    }
    ItoElement::<C64>::wiener().add(&ItoElement::counting().scale(&C64::new(epsilon, 0.0)))
}

/// Momentum differential of the Langevin force, `df = iħ(dΛ_− − dΛ^+)`.
pub fn langevin_force(hbar: &BigRational) -> Result<ItoElement<ExactComplex>> {
    if !hbar.is_positive() {
        return Err(Error::InvalidArgument("ħ must be positive".into()));
    }
    let coef = Complex::new(BigRational::zero(), hbar.clone());
    Ok(ItoElement::annihilation().sub(&ItoElement::creation())?.scale(&coef))
}

/// Itô correction `dX · dY` for operator-valued differentials.
pub fn ito_correction(dx: &ItoElement<Operator>, dy: &ItoElement<Operator>) -> Result<ItoElement<Operator>> {
    dx.mul(dy)
}

/// Full product differential `d(XY) = dX·Y + X·dY + dX·dY`.
pub fn product_differential(
    x: &Operator,
    dx: &ItoElement<Operator>,
    y: &Operator,
    dy: &ItoElement<Operator>,
) -> Result<ItoElement<Operator>> {
    for el in [dx, dy] {
        if let Some(sd) = el.system_dim() {
            if sd != x.dim() || sd != y.dim() {
                return Err(Error::DimensionMismatch { expected: x.dim(), got: sd });
            }
        }
    }
    let first = dx.scale_right(y);
    let second = dy.scale_left(x);
    first.add(&second)?.add(&ito_correction(dx, dy)?)
}

/// Square matrix representing an Itô element.
#[derive(Clone, PartialEq, Debug)]
pub struct TriangularRep<C: Scalar> {
    n: usize,
    entries: Vec<C>,
}

impl<C: Scalar> TriangularRep<C> {
    pub fn zeros(n: usize) -> Self {
        TriangularRep { n, entries: vec![C::zero(); n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &C {
        &self.entries[i * self.n + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.entries[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.entries[k * n + j];
                    if !b.is_zero() {
                        out.entries[i * n + j] = out.entries[i * n + j].add(&a.mul(b));
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        TriangularRep {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        TriangularRep {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(&b.neg())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|c| c.is_zero())
    }

    /// Entries below the diagonal vanish, and so do the diagonal entries in
    /// the `−` and `+` slots.
    pub fn is_triangular(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| {
            let below = j < i;
            let corner_diag = i == j && (i == 0 || i == n - 1);
            !(below || corner_diag) || self.entries[i * n + j].is_zero()
        }))
    }
}

/// One checked product `a · b` of basis differentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCheck {
    pub left: String,
    pub right: String,
    pub symbolic: String,
    pub via_matrix: String,
    pub ok: bool,
}

/// Outcome of [`verify_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub d: u32,
    pub products: Vec<ProductCheck>,
    /// `(identity, holds)`; the noise identities are only listed for `d = 1`.
    pub identities: Vec<(String, bool)>,
}

impl TableReport {
    pub fn failures(&self) -> usize {
        self.products.iter().filter(|p| !p.ok).count() + self.identities.iter().filter(|i| !i.1).count()
    }
}

/// Checks every basis product against the product of matrix
/// representations, in exact arithmetic. For `d = 1` also checks
/// `dΛ_− = dw·dm − dt`, `dΛ^+ = dm·dw − dt` and `dΛ = dm − dw` on the
/// representations.
pub fn verify_table(d: u32) -> Result<TableReport> {
    if d == 0 {
        return Err(Error::UnsupportedDimension(0));
    }
    let all = ItoBasisIndex::all(d);
    let mut products = Vec::with_capacity(all.len() * all.len());
    for &a in &all {
        for &b in &all {
            let (ea, eb) = (ItoElement::<ExactComplex>::basis(d, a)?, ItoElement::<ExactComplex>::basis(d, b)?);
            let sym = ea.mul(&eb)?;
            let rep = ea.matrix_rep().mul(&eb.matrix_rep());
            let via = ItoElement::from_rep(d, &rep)?;
            products.push(ProductCheck {
                left: a.name(d),
                right: b.name(d),
                symbolic: sym.render(),
                via_matrix: via.as_ref().map_or_else(|| "not representable".into(), |v| v.render()),
                ok: via.as_ref() == Some(&sym) && sym.matrix_rep() == rep,
            });
        }
    }
    let mut identities = Vec::new();
    if d == 1 {
        let r = |e: &ItoElement<ExactComplex>| e.matrix_rep();
        let (rt, rw) = (r(&ItoElement::dt(1)), r(&ItoElement::wiener()));
        let rm = r(&ItoElement::poisson());
        identities.push(("dL(-) = dw*dm - dt".into(), rw.mul(&rm).sub(&rt) == r(&ItoElement::annihilation())));
        identities.push(("dL(+) = dm*dw - dt".into(), rm.mul(&rw).sub(&rt) == r(&ItoElement::creation())));
        identities.push(("dL = dm - dw".into(), rm.sub(&rw) == r(&ItoElement::counting())));
    }
    Ok(TableReport { d, products, identities })
}

impl ItoElement<ExactComplex> {
    /// Inverse of [`ItoElement::matrix_rep`]; `None` if the matrix has
    /// entries outside the representable pattern.
    fn from_rep(d: u32, rep: &TriangularRep<ExactComplex>) -> Result<Option<Self>> {
        let n = d as usize + 2;
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let c = rep.get(i, j);
                if Coefficient::is_zero(c) {
                    continue;
                }
                let lower = if i == 0 { Lower::Minus } else if i <= d as usize { Lower::Mode(i as u32) } else { return Ok(None) };
                let upper = if j == n - 1 { Upper::Plus } else if j >= 1 { Upper::Mode(j as u32) } else { return Ok(None) };
                terms.push((ItoBasisIndex { lower, upper }, c.clone()));
            }
        }
        ItoElement::from_terms(d, terms).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{pauli, BlochVector, StateVector};
    use proptest::prelude::*;

    type E = ItoElement<ExactComplex>;

    fn dt() -> E {
        E::dt(1)
    }
    fn dm_() -> E {
        E::annihilation()
    }
    fn dp() -> E {
        E::creation()
    }
    fn dl() -> E {
        E::counting()
    }

    #[test]
    fn table_report_is_clean() {
        for d in 1..=2 {
            let rep = verify_table(d).unwrap();
            assert_eq!(rep.products.len(), ((d + 1) * (d + 1)).pow(2) as usize);
            assert_eq!(rep.failures(), 0, "{rep:?}");
        }
        assert_eq!(verify_table(1).unwrap().identities.len(), 3);
        assert!(verify_table(0).is_err());
    }

    #[test]
    fn hp_table_examples() {
        assert_eq!(dm_().mul(&dp()).unwrap(), dt());
        assert!(dp().mul(&dm_()).unwrap().is_zero());
        let dw = E::wiener();
        assert_eq!(dw.mul(&dw).unwrap(), dt());
    }

    #[test]
    fn star_examples() {
        assert_eq!(dp().star(), dm_());
        assert_eq!(dm_().star(), dp());
        assert_eq!(dt().star(), dt());
        assert_eq!(dl().star(), dl());
        let i = exact(0, 1, 1, 1);
        let idw = E::wiener().scale(&i);
        assert_eq!(idw.star(), E::wiener().scale(&exact(0, 1, -1, 1)));
    }

    #[test]
    fn standard_noise_family() {
        let dw = standard_noise(&rational(0, 1)).unwrap();
        assert_eq!(dw, E::wiener());
        assert_eq!(dw.mul(&dw).unwrap(), dt());

        let dm = standard_noise(&rational(1, 1)).unwrap();
        assert_eq!(dm, E::poisson());
        assert_eq!(dm.mul(&dm).unwrap(), dt().add(&dm).unwrap());

        let dy = standard_noise(&rational(2, 1)).unwrap();
        let lhs = dy.mul(&dy).unwrap().sub(&dt()).unwrap();
        assert_eq!(lhs, dy.scale(&exact_int(2)));

        let half = standard_noise(&rational(1, 3)).unwrap();
        let lhs = half.mul(&half).unwrap().sub(&dt()).unwrap();
        assert_eq!(lhs, half.scale(&exact(1, 3, 0, 1)));

        assert!(standard_noise(&rational(-1, 2)).is_err());
    }

    #[test]
    fn matrix_rep_examples() {
        let (rt, rw, rm) = (dt().matrix_rep(), E::wiener().matrix_rep(), E::poisson().matrix_rep());
        assert_eq!(rw.mul(&rm).sub(&rt), dm_().matrix_rep());
        assert_eq!(rm.mul(&rw).sub(&rt), dp().matrix_rep());
        assert_eq!(rm.sub(&rw), dl().matrix_rep());
        assert!(rt.mul(&rt).is_zero());
        assert_ne!(rw.mul(&rm), rm.mul(&rw));
        // explicit 3x3 matrices
        let one = exact_int(1);
        assert_eq!(rt.get(0, 2), &one);
        assert_eq!(rw.get(0, 1), &one);
        assert_eq!(rw.get(1, 2), &one);
        assert_eq!(rm.get(1, 1), &one);
        for r in [&rt, &rw, &rm] {
            assert!(r.is_triangular());
        }
    }

    #[test]
    fn commutator_examples() {
        let hbar = rational(1, 1);
        let df = langevin_force(&hbar).unwrap();
        let dw = E::wiener();
        let i_dt = dt().scale(&exact(0, 1, 1, 1));
        assert_eq!(df.mul(&dw).unwrap(), i_dt);
        assert_eq!(dw.mul(&df).unwrap(), i_dt.neg());
        assert_eq!(df.commutator(&dw).unwrap(), dt().scale(&exact(0, 1, 2, 1)));
        assert!(dw.commutator(&dw).unwrap().is_zero());
        assert_eq!(dl().commutator(&dm_()).unwrap(), dm_().neg());

        let hbar = rational(3, 2);
        let df = langevin_force(&hbar).unwrap();
        assert_eq!(df.commutator(&dw).unwrap(), dt().scale(&exact(0, 1, 3, 1)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = E::dt(1);
        let b = E::dt(2);
        assert!(matches!(a.mul(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn general_d_table() {
        for d in 1..=3u32 {
            let all = ItoBasisIndex::all(d);
            assert_eq!(all.len(), ((d + 1) * (d + 1)) as usize);
            for a in &all {
                for b in &all {
                    let prod = E::basis(d, *a).unwrap().mul(&E::basis(d, *b).unwrap()).unwrap();
                    let expected = match (a.upper, b.lower) {
                        (Upper::Mode(i), Lower::Mode(k)) if i == k => {
                            E::basis(d, ItoBasisIndex { lower: a.lower, upper: b.upper }).unwrap()
                        }
                        _ => E::zero(d),
                    };
                    assert_eq!(prod, expected, "d={d} {a:?}·{b:?}");
                    // homomorphism
                    let lhs = prod.matrix_rep();
                    let rhs = E::basis(d, *a).unwrap().matrix_rep().mul(&E::basis(d, *b).unwrap().matrix_rep());
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn rendering() {
        let e = dt().add(&dm_().scale(&exact_int(2))).unwrap();
        assert_eq!(e.render(), "dt + 2*dL(-)");
        let e = dp().sub(&dl().scale(&exact(1, 2, 0, 1))).unwrap();
        assert_eq!(e.render(), "dL(+) - 1/2*dL");
        assert_eq!(E::zero(1).render(), "0");
        assert_eq!(dt().scale(&exact(0, 1, -1, 1)).render(), "-i*dt");
        assert_eq!(dt().scale(&exact(1, 1, 2, 1)).render(), "(1+2i)*dt");
        let e = E::basis(2, ItoBasisIndex { lower: Lower::Mode(2), upper: Upper::Mode(1) }).unwrap();
        assert_eq!(e.render(), "dL(2,1)");
    }

    #[test]
    fn operator_coefficients() {
        let l = pauli(&BlochVector::new(0.3, -0.4, 1.2));
        // dχ = L χ dw with χ stored as the operator |χ⟩⟨e0|
        let chi = StateVector::new(&[C64::new(0.6, 0.1), C64::new(-0.2, 0.7)]).unwrap();
        let x = chi.outer(&StateVector::basis(2, 0));
        let dw_terms = |c: Operator| {
            ItoElement::from_terms(
                1,
                [
                    (ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) }, c),
                    (ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Plus }, c),
                ],
            )
            .unwrap()
        };
        let dx = dw_terms(l * x);
        let dxd = dx.star();
        let corr = ito_correction(&dx, &dxd).unwrap();
        let expected = l * chi.projector() * l.adjoint();
        assert_eq!(corr.terms().count(), 1);
        let c = corr.coefficient(ItoBasisIndex::DT).unwrap();
        assert!(c.max_abs_diff(&expected) < 1e-14);

        // dX = A dt annihilates everything
        let a = pauli(&BlochVector::EX);
        let dtx = ItoElement::from_terms(1, [(ItoBasisIndex::DT, a)]).unwrap();
        assert!(ito_correction(&dtx, &dx).unwrap().is_zero());
        assert!(ito_correction(&dx, &dtx).unwrap().is_zero());

        // dχ = L dΛ^+ − L† dΛ_−  ⇒  dχ dχ★ = L†L dt
        let ln = Operator::from_rows(2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.5), C64::new(0.2, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let dchi = ItoElement::from_terms(
            1,
            [
                (ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Plus }, ln),
                (ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) }, -ln.adjoint()),
            ],
        )
        .unwrap();
        let corr = ito_correction(&dchi, &dchi.star()).unwrap();
        let c = corr.coefficient(ItoBasisIndex::DT).unwrap();
        assert!(c.max_abs_diff(&(ln.adjoint() * ln)) < 1e-14);
        assert_eq!(corr.terms().count(), 1);

        // full product differential, d = 1 operator elements only
        let full = product_differential(&x, &dx, &x.adjoint(), &dxd).unwrap();
        let dt_coef = full.coefficient(ItoBasisIndex::DT).unwrap();
        assert!(dt_coef.max_abs_diff(&expected) < 1e-14);
        let dminus = full.coefficient(ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) }).unwrap();
        let lin = l * x * x.adjoint() + x * x.adjoint() * l.adjoint();
        assert!(dminus.max_abs_diff(&lin) < 1e-14);

        let big = Operator::identity(4);
        assert!(ItoElement::from_terms(2, [(ItoBasisIndex::DT, a)]).is_err());
        let mixed = ItoElement::from_terms(1, [(ItoBasisIndex::DT, big)]).unwrap();
        assert!(dtx.mul(&mixed).is_err());
    }

    #[test]
    fn subalgebras_closed() {
        let two = exact_int(2);
        let a = E::wiener().add(&dt().scale(&two)).unwrap();
        let b = E::wiener().scale(&exact(1, 3, 1, 1)).add(&dt()).unwrap();
        let p = a.mul(&b).unwrap();
        let in_b = |e: &E| {
            let w = e.coefficient(ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) });
            let c = e.coefficient(ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Plus });
            w == c && e.coefficient(ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Mode(1) }).is_none()
        };
        assert!(in_b(&p));
        let m = E::poisson().scale(&exact(5, 7, 0, 1)).add(&dt()).unwrap();
        let q = m.mul(&E::poisson()).unwrap();
        let in_c = |e: &E| {
            let x = e.coefficient(ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) });
            x == e.coefficient(ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Plus })
                && x == e.coefficient(ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Mode(1) })
        };
        assert!(in_c(&q));
    }

    fn small_rat() -> impl Strategy<Value = ExactComplex> {
        (-4i64..5, 1i64..4, -4i64..5, 1i64..4).prop_map(|(a, b, c, d)| exact(a, b, c, d))
    }

    fn element(d: u32) -> impl Strategy<Value = E> {
        let n = ((d + 1) * (d + 1)) as usize;
        proptest::collection::vec(small_rat(), n).prop_map(move |coefs| {
            E::from_terms(d, ItoBasisIndex::all(d).into_iter().zip(coefs)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn associativity(a in element(2), b in element(2), c in element(2)) {
            let l = a.mul(&b).unwrap().mul(&c).unwrap();
            let r = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(l, r);
        }

        #[test]
        fn star_is_antimultiplicative_involution(a in element(1), b in element(1)) {
            prop_assert_eq!(a.star().star(), a.clone());
            prop_assert_eq!(a.mul(&b).unwrap().star(), b.star().mul(&a.star()).unwrap());
        }

        #[test]
        fn homomorphism(a in element(1), b in element(1)) {
            prop_assert_eq!(a.mul(&b).unwrap().matrix_rep(), a.matrix_rep().mul(&b.matrix_rep()));
            prop_assert!(a.matrix_rep().is_triangular());
        }

        #[test]
        fn bilinear(a in element(1), b in element(1), c in element(1), s in small_rat()) {
            let lhs = a.add(&b).unwrap().mul(&c).unwrap();
            let rhs = a.mul(&c).unwrap().add(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(a.scale(&s).mul(&b).unwrap(), a.mul(&b).unwrap().scale(&s));
        }
    }
}
