//! Blackbody spectral energy per mode and the mean occupation number of a
//! geometrically distributed oscillator.
//!
//! Every law depends on `ω` and `τ` only through `x = ħω/kτ`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::trajectories::{fmt_f64, Neumaier};

/// Above this ratio `e^x − 1` is replaced by `e^x`.
pub const OVERFLOW_RATIO: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    omega: f64,
    tau: f64,
    hbar: f64,
    k: f64,
}

impl SpectralPoint {
    /// Point in units `ħ = k = 1`.
    pub fn new(omega: f64, tau: f64) -> Result<Self> {
        Self::with_constants(omega, tau, 1.0, 1.0)
    }

    pub fn with_constants(omega: f64, tau: f64, hbar: f64, k: f64) -> Result<Self> {
        for (name, v) in [("ω", omega), ("τ", tau), ("ħ", hbar), ("k", k)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(SpectralPoint { omega, tau, hbar, k })
    }

    /// Point with `kτ = 1` and `ħω = x`.
    pub fn from_ratio(x: f64) -> Result<Self> {
        Self::new(x, 1.0)
    }

    /// `x = ħω/kτ`.
    pub fn ratio(&self) -> f64 {
        self.hbar * self.omega / (self.k * self.tau)
    }

    pub fn thermal_energy(&self) -> f64 {
        self.k * self.tau
    }

    pub fn quantum_energy(&self) -> f64 {
        self.hbar * self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralLaw {
    Planck,
    /// First two terms of the small-`x` expansion: `kτ − ½ħω`.
    Rayleigh,
    /// `ħω e^{−x}`.
    Wien,
    /// Equipartition value `kτ`.
    Classical,
}

impl SpectralLaw {
    pub const ALL: [SpectralLaw; 4] = [SpectralLaw::Classical, SpectralLaw::Rayleigh, SpectralLaw::Wien, SpectralLaw::Planck];

    pub fn name(self) -> &'static str {
        match self {
            SpectralLaw::Planck => "planck",
            SpectralLaw::Rayleigh => "rayleigh",
            SpectralLaw::Wien => "wien",
            SpectralLaw::Classical => "classical",
        }
    }
}

/// Mean energy of one mode under the chosen law.
pub fn spectral_energy(point: &SpectralPoint, law: SpectralLaw) -> f64 {
    let x = point.ratio();
    let q = point.quantum_energy();
    match law {
        SpectralLaw::Planck => q * mean_quanta(point),
        SpectralLaw::Rayleigh => point.thermal_energy() - 0.5 * q,
        SpectralLaw::Wien => q * (-x).exp(),
        SpectralLaw::Classical => point.thermal_energy(),
    }
}

/// Mean number of quanta `1/(e^x − 1)`.
pub fn mean_quanta(point: &SpectralPoint) -> f64 {
    let x = point.ratio();
    if x > OVERFLOW_RATIO {
        (-x).exp()
    } else {
        1.0 / x.exp_m1()
    }
}

/// `p_n = (1 − e^{−x}) e^{−nx}` for `n = 0..=n_max`.
pub fn occupation_probabilities(x: f64, n_max: usize) -> Result<Vec<f64>> {
    check_ratio(x)?;
    let norm = -(-x).exp_m1();
    Ok((0..=n_max).map(|n| norm * (-(n as f64) * x).exp()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesMean {
    /// `Σ_{n ≤ n_max} n p_n`.
    pub value: f64,
    /// `Σ_{n > n_max} n p_n`, the exact truncation remainder.
    pub remainder: f64,
}

/// Truncated mean `Σ n p_n` of the occupation distribution.
pub fn mean_quanta_series(x: f64, n_max: usize) -> Result<SeriesMean> {
    let p = occupation_probabilities(x, n_max)?;
    let mut acc = Neumaier::default();
    for (n, pn) in p.iter().enumerate() {
        acc.add(n as f64 * pn);
    }
    // Σ_{n>N} n qⁿ (1 − q) = q^{N+1} (N + 1 − N q) / (1 − q)
    let q = (-x).exp();
    let nn = n_max as f64;
    let remainder = (-(nn + 1.0) * x).exp() * (nn + 1.0 - nn * q) / -(-x).exp_m1();
    Ok(SeriesMean { value: acc.value(), remainder })
}

fn check_ratio(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio x must be positive and finite, got {x}")));
    }
    Ok(())
}

/// CSV with header `x,classical,rayleigh,wien,planck`, in units `kτ = 1`.
pub fn write_spectrum_csv<W: Write>(mut w: W, ratios: &[f64]) -> Result<()> {
    writeln!(w, "x,classical,rayleigh,wien,planck")?;
    for &x in ratios {
        let p = SpectralPoint::from_ratio(x)?;
        let cols: Vec<String> =
            std::iter::once(fmt_f64(x)).chain(SpectralLaw::ALL.iter().map(|&l| fmt_f64(spectral_energy(&p, l)))).collect();
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// `n` ratios log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    check_ratio(lo)?;
    check_ratio(hi)?;
    if n < 2 || hi <= lo {
        return Err(Error::InvalidArgument("log grid needs n ≥ 2 and lo < hi".into()));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}
