//! Time grids, reproducible random streams and pre-drawn driving noise.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, purpose)`
//! with the trajectory index as the stream id, so trajectory `i` of an
//! ensemble is the same no matter which worker produced it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Independent purposes drawing from the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Wiener,
    Poisson,
    Thinning,
    Sampling,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Wiener => 0x5749_454e,
            Purpose::Poisson => 0x504f_4953,
            Purpose::Thinning => 0x5448_494e,
            Purpose::Sampling => 0x5341_4d50,
        }
    }
}

/// Random stream for `(seed, purpose, index)`.
pub fn rng_stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn standard_exponential<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Uniform grid `t_k = k·Δt`, `k = 0..=steps`, on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// `T/Δt` must be an integer up to a relative `1e-9`.
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end.is_finite() && dt.is_finite() && t_end > 0.0 && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("grid needs T > 0 and Δt > 0, got T = {t_end}, Δt = {dt}")));
        }
        if dt > t_end * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("Δt = {dt} exceeds T = {t_end}")));
        }
        let ratio = t_end / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!("T/Δt = {ratio} is not an integer")));
        }
        Ok(TimeGrid { t_end, dt, steps: steps as usize })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point closest to `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 || k as usize > self.steps || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(Error::InvalidArgument(format!("t = {t} is not a grid point")));
        }
        Ok(k as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Wiener,
    Poisson,
}

/// Driving noise aligned to a grid: `increments[k]` covers `(t_k, t_{k+1}]`.
///
/// Wiener increments are `Normal(0, Δt)`. Poisson paths store the exact event
/// times together with per-step counts; a step may hold more than one event.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub kind: NoiseKind,
    pub increments: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl NoisePath {
    pub fn wiener(grid: &TimeGrid, seed: u64, stream: u64) -> Self {
        let mut rng = rng_stream(seed, Purpose::Wiener, stream);
        let sd = grid.dt().sqrt();
        let increments = (0..grid.steps()).map(|_| sd * standard_normal(&mut rng)).collect();
        NoisePath { kind: NoiseKind::Wiener, increments, jump_times: Vec::new(), seed, stream }
    }

    /// Homogeneous Poisson process of intensity `rate` from exponential
    /// waiting times.
    pub fn poisson(grid: &TimeGrid, rate: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidArgument(format!("Poisson rate must be ≥ 0, got {rate}")));
        }
        let mut rng = rng_stream(seed, Purpose::Poisson, stream);
        let mut jump_times = Vec::new();
        if rate > 0.0 {
            let mut t = 0.0;
            loop {
                t += standard_exponential(&mut rng) / rate;
                if t > grid.t_end() {
                    break;
                }
                jump_times.push(t);
            }
        }
        Ok(Self::from_jump_times(grid, jump_times, seed, stream))
    }

    /// Poisson path with the given (sorted) event times.
    pub fn from_jump_times(grid: &TimeGrid, jump_times: Vec<f64>, seed: u64, stream: u64) -> Self {
        let mut increments = vec![0.0; grid.steps()];
        for &t in &jump_times {
            let k = ((t / grid.dt()).ceil() as usize).clamp(1, grid.steps()) - 1;
            increments[k] += 1.0;
        }
        NoisePath { kind: NoiseKind::Poisson, increments, jump_times, seed, stream }
    }

    /// Wiener path with prescribed increments (seed and stream are zero).
    pub fn frozen_wiener(increments: Vec<f64>) -> Self {
        NoisePath { kind: NoiseKind::Wiener, increments, jump_times: Vec::new(), seed: 0, stream: 0 }
    }

    /// Cumulative path values at the grid points, starting at 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for dx in &self.increments {
            acc += dx;
            out.push(acc);
        }
        out
    }

    pub fn check_grid(&self, grid: &TimeGrid, kind: NoiseKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!("expected {kind:?} noise, got {:?}", self.kind)));
        }
        if self.increments.len() != grid.steps() {
            return Err(Error::DimensionMismatch { expected: grid.steps(), got: self.increments.len() });
        }
        Ok(())
    }
}
