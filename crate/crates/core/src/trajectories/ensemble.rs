//! Deterministic ensemble reduction.
//!
//! Trajectories are produced in parallel in fixed-size chunks and folded in
//! index order with compensated sums, so results do not depend on the number
//! of workers.

use rayon::prelude::*;

use super::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::noise::TimeGrid;
use crate::statespace::{Operator, C64};

/// Trajectories generated per parallel batch.
const CHUNK: u64 = 256;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running mean and variance of a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanVar {
    n: u64,
    s1: Neumaier,
    s2: Neumaier,
}

impl MeanVar {
    pub fn add(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.s1.value() / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return 0.0;
        }
        ((self.s2.value() - self.s1.value() * self.s1.value() / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// How records are combined into a density-matrix path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMode {
    /// Unweighted mean of the unnormalized `χχ†` (or `ϱ`), for paths drawn
    /// under the input (reference) measure.
    InputMeasure,
    /// `Σ π_i P_i / Σ π_i` over normalized posteriors `P_i` with likelihood
    /// weights `π_i`, for paths drawn under the input measure.
    WeightedPosterior,
    /// Unweighted mean of normalized posteriors, for paths drawn under the
    /// output measure.
    OutputSample,
}

/// Streaming accumulator of density-matrix paths.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    mode: AverageMode,
    grid: TimeGrid,
    dim: usize,
    sums: Vec<Neumaier>,
    weight_sums: Vec<Neumaier>,
    count: u64,
}

impl EnsembleAccumulator {
    pub fn new(mode: AverageMode, grid: &TimeGrid, dim: usize) -> Self {
        let len = grid.len();
        EnsembleAccumulator {
            mode,
            grid: *grid,
            dim,
            sums: vec![Neumaier::default(); len * dim * dim * 2],
            weight_sums: vec![Neumaier::default(); len],
            count: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, rec: &TrajectoryRecord) -> Result<()> {
        if rec.grid != self.grid {
            return Err(Error::InvalidArgument("record grid differs from the ensemble grid".into()));
        }
        if rec.states.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rec.states.dim() });
        }
        let block = self.dim * self.dim * 2;
        for k in 0..self.grid.len() {
            let (rho, w) = match self.mode {
                AverageMode::InputMeasure => (rec.states.density(k), 1.0),
                AverageMode::WeightedPosterior => (rec.posterior(k), rec.weights[k]),
                AverageMode::OutputSample => (rec.posterior(k), 1.0),
            };
            self.weight_sums[k].add(w);
            for (i, z) in rho.entries().iter().enumerate() {
                self.sums[k * block + 2 * i].add(w * z.re);
                self.sums[k * block + 2 * i + 1].add(w * z.im);
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Averaged path. Input-measure averages are left unnormalized, so their
    /// trace measures mean-square unitarity.
    pub fn finish(&self) -> Result<Vec<Operator>> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let block = self.dim * self.dim * 2;
        (0..self.grid.len())
            .map(|k| {
                let denom = match self.mode {
                    AverageMode::WeightedPosterior => self.weight_sums[k].value(),
                    _ => self.count as f64,
                };
                if !(denom > 0.0) {
                    return Err(Error::ZeroProbability(denom));
                }
                let entries: Vec<C64> = (0..self.dim * self.dim)
                    .map(|i| {
                        C64::new(self.sums[k * block + 2 * i].value(), self.sums[k * block + 2 * i + 1].value()) / denom
                    })
                    .collect();
                Operator::from_rows(self.dim, &entries)
            })
            .collect()
    }
}

/// Averages a set of records sharing one grid.
pub fn ensemble_average(records: &[TrajectoryRecord], mode: AverageMode) -> Result<Vec<Operator>> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let mut acc = EnsembleAccumulator::new(mode, &first.grid, first.states.dim());
    for r in records {
        acc.add(r)?;
    }
    acc.finish()
}

/// Produces items `0..n` with `produce` on `workers` threads and hands them
/// to `consume` strictly in index order.
///
/// The first error (by index) stops the run and is returned.
pub fn run_ensemble<T, P, C>(n: u64, workers: usize, produce: P, mut consume: C) -> Result<()>
where
    T: Send,
    P: Fn(u64) -> Result<T> + Sync,
    C: FnMut(u64, T) -> Result<()>,
{
    if workers <= 1 {
        for i in 0..n {
            consume(i, produce(i)?)?;
        }
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let batch: Vec<Result<T>> = pool.install(|| (start..end).into_par_iter().map(&produce).collect());
        for (i, item) in (start..end).zip(batch) {
            consume(i, item?)?;
        }
        start = end;
    }
    Ok(())
}
