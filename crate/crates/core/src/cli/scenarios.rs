//! Scenario runners. Each one reads a completed [`ScenarioConfig`], writes
//! its artifacts and reports the number of failed checks.

use serde::Serialize;
use serde_json::json;

use super::artifacts::{Abort, ArtifactSet, Table, SCHEMA_VERSION};
use super::config::{Measure, ModelSpec, ScenarioConfig, ScenarioKind, Scheme};
use crate::bell_hidden::{self, Direction, ProbeReport};
use crate::cat_model::{self, ReductionFamily};
use crate::error::{Error, Result};
use crate::ito_algebra::verify_table;
use crate::noise::{NoisePath, TimeGrid};
use crate::qubit_model::{
    bloch_counting_filter, bloch_master_solve, closed_form_colinear, diffusive_pi_p, localization_statistic, write_pi_p_csv,
    ColinearFrame, PiPScheme, PiPState, QubitScenario,
};
use crate::spectra::{self, SpectralLaw, SpectralPoint};
use crate::statespace::{pure_state, sigma_x, sigma_z, BlochVector, DensityMatrix, Operator, StateVector, C64};
use crate::trajectories::{
    embed_diffusion, integrate_jump_master, integrate_lindblad, run_ensemble, simulate_linear_diffusive, simulate_linear_jump,
    simulate_nonlinear_diffusive, simulate_nonlinear_jump, DiffusionModel, DiffusiveDrive, JumpModel, MeanVar, Neumaier,
    TrajectoryRecord,
};

/// Outcome of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub completed: Option<u64>,
    pub aborted: Vec<Abort>,
    /// Checks that did not hold (only scenarios with exact checks report any).
    pub failures: usize,
}

impl ScenarioOutcome {
    fn plain() -> Self {
        ScenarioOutcome { completed: None, aborted: Vec::new(), failures: 0 }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig, workers: usize, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    match cfg.scenario {
        ScenarioKind::Diffusive => diffusive(cfg, workers, set),
        ScenarioKind::Jump => jump(cfg, workers, set),
        ScenarioKind::QubitCounting => qubit_counting(cfg, workers, set),
        ScenarioKind::QubitDiffusive => qubit_diffusive(cfg, workers, set),
        ScenarioKind::ClosedForm => closed_form(cfg, set),
        ScenarioKind::Cat => cat(cfg, set),
        ScenarioKind::Bell => bell(cfg, set),
        ScenarioKind::Spectra => spectra_run(cfg, set),
        ScenarioKind::ItoCheck => ito_check(cfg, set),
    }
}

fn missing(what: &str) -> Error {
    Error::InvalidArgument(format!("configuration lacks `{what}`"))
}

fn model(cfg: &ScenarioConfig) -> Result<&ModelSpec> {
    cfg.model.as_ref().ok_or_else(|| missing("model"))
}

fn grid_of(cfg: &ScenarioConfig) -> Result<(TimeGrid, Vec<usize>)> {
    let g = cfg.grid.as_ref().ok_or_else(|| missing("grid"))?;
    let grid = TimeGrid::new(g.t_end.ok_or_else(|| missing("grid.T"))?, g.dt.ok_or_else(|| missing("grid.dt"))?)?;
    let steps = grid.steps();
    let stride = match g.stride {
        Some(s) => s,
        // smallest divisor of the step count giving at most 1000 intervals
        None => (steps.div_ceil(1000).max(1)..=steps.max(1)).find(|s| steps % s == 0).unwrap_or(1),
    };
    if stride == 0 || steps % stride != 0 {
        return Err(Error::InvalidArgument(format!("stride {stride} must divide {steps} steps")));
    }
    Ok((grid, (0..=steps).step_by(stride).collect()))
}

fn state_of(spec: &Option<Vec<[f64; 2]>>) -> Result<StateVector> {
    let amps: Vec<C64> = spec.as_ref().ok_or_else(|| missing("model.psi0"))?.iter().map(|z| C64::new(z[0], z[1])).collect();
    let psi = StateVector::new(&amps)?;
    if !psi.is_normalized() {
        return Err(Error::InvalidArgument(format!("psi0 must be normalized, ‖ψ‖ = {}", psi.norm())));
    }
    Ok(psi)
}

fn bloch_of(v: Option<[f64; 3]>, what: &str) -> Result<BlochVector> {
    v.map(BlochVector::from_array).ok_or_else(|| missing(what))
}

/// Trajectory-level failures are recorded; anything else stops the run.
fn guard<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::TrajectoryAborted { .. } | Error::NonFinite { .. } | Error::StepRejected(_) | Error::ZeroProbability(_))) => {
            Ok(Err(e.to_string()))
        }
        Err(e) => Err(e),
    }
}

/// Compensated running sum of fixed-width rows.
struct PathMean {
    width: usize,
    sums: Vec<Neumaier>,
    count: u64,
}

impl PathMean {
    fn new(rows: usize, width: usize) -> Self {
        PathMean { width, sums: vec![Neumaier::default(); rows * width], count: 0 }
    }

    fn add(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.sums.len());
        for (s, v) in self.sums.iter_mut().zip(values) {
            s.add(*v);
        }
        self.count += 1;
    }

    fn row(&self, k: usize) -> Vec<f64> {
        self.sums[k * self.width..(k + 1) * self.width].iter().map(|s| s.value()).collect()
    }
}

fn flatten(op: &Operator) -> Vec<f64> {
    op.entries().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn density_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            h.push(format!("re{i}{j}"));
            h.push(format!("im{i}{j}"));
        }
    }
    h
}

fn row_with_time(t: f64, values: &[f64]) -> Vec<f64> {
    std::iter::once(t).chain(values.iter().copied()).collect()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Serialize)]
struct Checkpoint {
    t: f64,
    max_abs_deviation: f64,
}

#[derive(Serialize)]
struct Martingale {
    statistic: &'static str,
    mean: f64,
    std_error: f64,
    bound: f64,
    within_bound: bool,
}

fn martingale(statistic: &'static str, mv: &MeanVar, t_end: f64) -> Martingale {
    let bound = 3.0 * (t_end / mv.count().max(1) as f64).sqrt();
    Martingale { statistic, mean: mv.mean(), std_error: mv.std_error(), bound, within_bound: mv.mean().abs() <= bound }
}

/// Deviation of an averaged path from a reference at `T/4`, `T/2`, `T`.
fn checkpoints(grid: &TimeGrid, idx: &[usize], dev: &[f64]) -> Vec<Checkpoint> {
    [0.25, 0.5, 1.0]
        .iter()
        .map(|f| {
            let target = f * grid.t_end();
            let (pos, _) = idx
                .iter()
                .enumerate()
                .min_by(|a, b| (grid.time(*a.1) - target).abs().total_cmp(&(grid.time(*b.1) - target).abs()))
                .expect("non-empty index set");
            Checkpoint { t: grid.time(idx[pos]), max_abs_deviation: dev[pos] }
        })
        .collect()
}

struct DensitySample {
    rows: Vec<f64>,
    martingale: f64,
    first: Option<TrajectoryRecord>,
}

/// Shared driver of the operator-level ensembles: averages density rows and
/// compares them with a master-equation path.
#[allow(clippy::too_many_arguments)]
fn density_ensemble<P>(
    cfg: &ScenarioConfig,
    workers: usize,
    set: &mut ArtifactSet,
    grid: &TimeGrid,
    idx: &[usize],
    master: &[DensityMatrix],
    statistic: &'static str,
    produce: P,
) -> Result<ScenarioOutcome>
where
    P: Fn(u64) -> Result<(TrajectoryRecord, f64)> + Sync,
{
    let dim = master[0].dim();
    let n = cfg.trajectories.ok_or_else(|| missing("N"))?;
    let measure = model(cfg)?.measure.unwrap_or(Measure::Input);
    let width = 2 * dim * dim;
    let mut mean = PathMean::new(idx.len(), width);
    let mut mv = MeanVar::default();
    let mut aborted = Vec::new();
    let mut first = None;
    run_ensemble(
        n,
        workers,
        |i| {
            guard(produce(i).map(|(rec, stat)| {
                let rows = idx
                    .iter()
                    .flat_map(|&k| match measure {
                        Measure::Input => flatten(&rec.states.density(k)),
                        Measure::Output => flatten(&rec.posterior(k)),
                    })
                    .collect();
                DensitySample { rows, martingale: stat, first: (i == 0).then_some(rec) }
            }))
        },
        |i, out| {
            match out {
                Ok(s) => {
                    mean.add(&s.rows);
                    mv.add(s.martingale);
                    if s.first.is_some() {
                        first = s.first;
                    }
                }
                Err(reason) => aborted.push(Abort { trajectory: i, reason }),
            }
            Ok(())
        },
    )?;
    if mean.count == 0 {
        return Err(Error::TrajectoryAborted { t: 0.0, reason: "every trajectory aborted".into() });
    }
    let header = density_header(dim);
    let (mut ens, mut mas) = (Table::new(&header), Table::new(&header));
    let mut dev = Vec::with_capacity(idx.len());
    for (pos, &k) in idx.iter().enumerate() {
        let avg: Vec<f64> = mean.row(pos).iter().map(|s| s / mean.count as f64).collect();
        let reference = flatten(master[k].op());
        dev.push(max_abs(&avg, &reference));
        ens.push(&row_with_time(grid.time(k), &avg));
        mas.push(&row_with_time(grid.time(k), &reference));
    }
    set.write("ensemble.csv", &ens.to_csv())?;
    set.write("master.csv", &mas.to_csv())?;
    if let Some(rec) = first {
        let mut buf = Vec::new();
        rec.write_csv(&mut buf)?;
        set.write("trajectory_0.csv", &buf)?;
    }
    set.write_json(
        "comparison.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "measure": measure,
            "trajectories_completed": mean.count,
            "trajectories_aborted": aborted.len(),
            "max_abs_deviation": dev.iter().copied().fold(0.0, f64::max),
            "checkpoints": checkpoints(grid, idx, &dev),
            "martingale": martingale(statistic, &mv, grid.t_end()),
        }),
    )?;
    Ok(ScenarioOutcome { completed: Some(mean.count), aborted, failures: 0 })
}

fn diffusion_model(m: &ModelSpec) -> Result<DiffusionModel> {
    let h = m.h.as_ref().ok_or_else(|| missing("model.h"))?.operator()?;
    let l = m.l.as_ref().ok_or_else(|| missing("model.l"))?.operator()?;
    DiffusionModel::new(h, l, m.hbar.unwrap_or(1.0))
}

fn diffusive(cfg: &ScenarioConfig, workers: usize, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let m = model(cfg)?;
    let dm = diffusion_model(m)?;
    let psi0 = state_of(&m.psi0)?;
    let (grid, idx) = grid_of(cfg)?;
    let seed = cfg.seed.ok_or_else(|| missing("seed"))?;
    let master = integrate_lindblad(&dm, &DensityMatrix::from_pure(&psi0)?, &grid)?;
    let measure = m.measure.unwrap_or(Measure::Input);
    let statistic = match measure {
        Measure::Input => "observation w_T",
        Measure::Output => "innovation w̃_T",
    };
    density_ensemble(cfg, workers, set, &grid, &idx, &master, statistic, |i| {
        let noise = NoisePath::wiener(&grid, seed, i);
        let rec = match measure {
            Measure::Input => simulate_linear_diffusive(&dm, &psi0, &grid, &noise)?,
            Measure::Output => simulate_nonlinear_diffusive(&dm, &psi0, &grid, &noise, DiffusiveDrive::Innovation)?,
        };
        let stat = match measure {
            Measure::Input => noise.cumulative().last().copied().unwrap_or(0.0),
            Measure::Output => rec.innovation_total(),
        };
        Ok((rec, stat))
    })
}

fn jump_model(m: &ModelSpec) -> Result<JumpModel> {
    let nu = m.nu.ok_or_else(|| missing("model.nu"))?;
    let hbar = m.hbar.unwrap_or(1.0);
    match (&m.c, &m.e) {
        (Some(c), Some(e)) => JumpModel::new(c.operator()?, e.operator()?, nu, hbar),
        _ => embed_diffusion(&diffusion_model(m)?, nu),
    }
}

fn jump(cfg: &ScenarioConfig, workers: usize, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let m = model(cfg)?;
    let jm = jump_model(m)?;
    let psi0 = state_of(&m.psi0)?;
    let (grid, idx) = grid_of(cfg)?;
    let seed = cfg.seed.ok_or_else(|| missing("seed"))?;
    let master = integrate_jump_master(&jm, &DensityMatrix::from_pure(&psi0)?, &grid)?;
    let measure = m.measure.unwrap_or(Measure::Output);
    let statistic = match measure {
        Measure::Input => "compensated reference count (N_T − νT)/√ν",
        Measure::Output => "counting innovation y_T",
    };
    density_ensemble(cfg, workers, set, &grid, &idx, &master, statistic, |i| match measure {
        Measure::Input => {
            let noise = NoisePath::poisson(&grid, jm.nu, seed, i)?;
            let rec = simulate_linear_jump(&jm, &psi0, &grid, &noise)?;
            let count: f64 = rec.observations.iter().sum();
            Ok((rec, (count - jm.nu * grid.t_end()) / jm.nu.sqrt()))
        }
        Measure::Output => {
            let rec = simulate_nonlinear_jump(&jm, &psi0, &grid, seed, i)?;
            let stat = rec.innovation_total();
            Ok((rec, stat))
        }
    })
}

fn qubit_scenario(m: &ModelSpec) -> Result<QubitScenario> {
    let l = m.l.as_ref().ok_or_else(|| missing("model.l"))?.bloch()?;
    let nu = m.nu.ok_or_else(|| missing("model.nu"))?;
    let hbar = m.hbar.unwrap_or(1.0);
    let r0 = bloch_of(m.r0, "model.r0")?;
    match (&m.h, &m.k) {
        (Some(h), None) => QubitScenario::with_hbar(h.bloch()?, l, nu, hbar, r0),
        (None, Some(k)) => QubitScenario::from_k(k.bloch()?, l, nu, hbar, r0),
        (None, None) => Err(missing("model.h or model.k")),
        (Some(_), Some(_)) => Err(Error::InvalidArgument("`h` and `k` are mutually exclusive".into())),
    }
}

fn bloch_row(r: &BlochVector) -> [f64; 3] {
    [r.x, r.y, r.z]
}

struct CountingSample {
    r: Vec<f64>,
    innovation: f64,
    jumps: f64,
    filter_deviation: f64,
    intensity_deviation: f64,
    first: Option<Table>,
}

fn qubit_counting(cfg: &ScenarioConfig, workers: usize, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let sc = qubit_scenario(model(cfg)?)?;
    let psi0 = pure_state(&sc.r0)?;
    let jm = sc.jump_model()?;
    let (grid, idx) = grid_of(cfg)?;
    let seed = cfg.seed.ok_or_else(|| missing("seed"))?;
    let n = cfg.trajectories.ok_or_else(|| missing("N"))?;
    let master = bloch_master_solve(&sc.k(), &sc.l, &sc.r0, &grid)?;
    let mut mean = PathMean::new(idx.len(), 3);
    let (mut innov, mut jumps) = (MeanVar::default(), MeanVar::default());
    let (mut filter_dev, mut intensity_dev) = (0.0f64, 0.0f64);
    let mut aborted = Vec::new();
    let mut first = None;
    run_ensemble(
        n,
        workers,
        |i| {
            guard((|| {
                let rec = simulate_nonlinear_jump(&jm, &psi0, &grid, seed, i)?;
                let op_path = rec.bloch_path()?;
                let path = bloch_counting_filter(&sc, &sc.r0, &rec.jump_times, &grid)?;
                let filter_deviation = path.r.iter().zip(&op_path).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
                let intensity_deviation = max_abs(&path.intensity, &rec.intensity);
                let first = (i == 0).then(|| {
                    let mut t = Table::new(&["t", "x", "y", "z", "intensity", "x_operator", "y_operator", "z_operator"]);
                    for k in 0..grid.len() {
                        let (a, b) = (path.r[k], op_path[k]);
                        t.push(&[grid.time(k), a.x, a.y, a.z, path.intensity[k], b.x, b.y, b.z]);
                    }
                    t
                });
                Ok(CountingSample {
                    r: idx.iter().flat_map(|&k| bloch_row(&path.r[k])).collect(),
                    innovation: rec.innovation_total(),
                    jumps: rec.jump_times.len() as f64,
                    filter_deviation,
                    intensity_deviation,
                    first,
                })
            })())
        },
        |i, out| {
            match out {
                Ok(s) => {
                    mean.add(&s.r);
                    innov.add(s.innovation);
                    jumps.add(s.jumps);
                    filter_dev = filter_dev.max(s.filter_deviation);
                    intensity_dev = intensity_dev.max(s.intensity_deviation);
                    if s.first.is_some() {
                        first = s.first;
                    }
                }
                Err(reason) => aborted.push(Abort { trajectory: i, reason }),
            }
            Ok(())
        },
    )?;
    if mean.count == 0 {
        return Err(Error::TrajectoryAborted { t: 0.0, reason: "every trajectory aborted".into() });
    }
    let dev = write_bloch_pair(set, &grid, &idx, &mean, &master)?;
    if let Some(t) = first {
        set.write("trajectory_0.csv", &t.to_csv())?;
    }
    set.write_json(
        "comparison.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "trajectories_completed": mean.count,
            "trajectories_aborted": aborted.len(),
            "max_abs_deviation": dev.iter().copied().fold(0.0, f64::max),
            "checkpoints": checkpoints(&grid, &idx, &dev),
            "bloch_vs_operator_max_deviation": filter_dev,
            "intensity_max_deviation": intensity_dev,
            "mean_jump_count": jumps.mean(),
            "martingale": martingale("counting innovation y_T", &innov, grid.t_end()),
        }),
    )?;
    Ok(ScenarioOutcome { completed: Some(mean.count), aborted, failures: 0 })
}

/// Writes `ensemble.csv` and `master.csv` with columns `t,x,y,z`. Rows of
/// width 4 hold `(Σπ, Σp)` and give `Σp/Σπ`; width-3 rows are plain sums.
fn write_bloch_pair(set: &mut ArtifactSet, grid: &TimeGrid, idx: &[usize], mean: &PathMean, master: &[BlochVector]) -> Result<Vec<f64>> {
    let header = ["t", "x", "y", "z"];
    let (mut ens, mut mas) = (Table::new(&header), Table::new(&header));
    let mut dev = Vec::with_capacity(idx.len());
    for (pos, &k) in idx.iter().enumerate() {
        let row = mean.row(pos);
        let avg: Vec<f64> = if mean.width == 4 {
            row[1..].iter().map(|p| p / row[0]).collect()
        } else {
            row.iter().map(|x| x / mean.count as f64).collect()
        };
        let reference = bloch_row(&master[k]);
        dev.push(max_abs(&avg, &reference));
        ens.push(&row_with_time(grid.time(k), &avg));
        mas.push(&row_with_time(grid.time(k), &reference));
    }
    set.write("ensemble.csv", &ens.to_csv())?;
    set.write("master.csv", &mas.to_csv())?;
    Ok(dev)
}

fn pip_scheme(s: Scheme) -> PiPScheme {
    match s {
        Scheme::Euler => PiPScheme::Euler,
        Scheme::Exponential => PiPScheme::Exponential,
    }
}

/// Largest deviation of a `(π, p)` path from the closed form:
/// `(π, p, r)` components separately.
fn closed_form_errors(sc: &QubitScenario, states: &[PiPState], w: &[f64], grid: &TimeGrid) -> Result<[f64; 3]> {
    let mut err = [0.0f64; 3];
    for (k, s) in states.iter().enumerate() {
        let cf = closed_form_colinear(&sc.l, &sc.k(), &sc.r0, w[k], grid.time(k))?;
        err[0] = err[0].max((s.pi - cf.pi).abs());
        err[1] = err[1].max(s.p.max_abs_diff(&cf.p));
        err[2] = err[2].max(s.r().max_abs_diff(&cf.r));
    }
    Ok(err)
}

struct PiPSample {
    rows: Vec<f64>,
    w_end: f64,
    pi_end: f64,
    errors: Option<[f64; 3]>,
    first: Option<Vec<u8>>,
}

fn qubit_diffusive(cfg: &ScenarioConfig, workers: usize, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let m = model(cfg)?;
    let sc = qubit_scenario(m)?;
    let colinear = ColinearFrame::new(&sc.k(), &sc.l).is_ok();
    let scheme = m.scheme.unwrap_or(if colinear { Scheme::Exponential } else { Scheme::Euler });
    let (grid, idx) = grid_of(cfg)?;
    let seed = cfg.seed.ok_or_else(|| missing("seed"))?;
    let n = cfg.trajectories.ok_or_else(|| missing("N"))?;
    let master = bloch_master_solve(&sc.k(), &sc.l, &sc.r0, &grid)?;
    let mut mean = PathMean::new(idx.len(), 4);
    let (mut w_stat, mut pi_stat) = (MeanVar::default(), MeanVar::default());
    let mut errors = [0.0f64; 3];
    let mut aborted = Vec::new();
    let mut first = None;
    run_ensemble(
        n,
        workers,
        |i| {
            guard((|| {
                let noise = NoisePath::wiener(&grid, seed, i);
                let states = diffusive_pi_p(&sc, &sc.r0, &noise, &grid, pip_scheme(scheme))?;
                let w = noise.cumulative();
                let errors = if colinear { Some(closed_form_errors(&sc, &states, &w, &grid)?) } else { None };
                let first = if i == 0 {
                    let mut buf = Vec::new();
                    write_pi_p_csv(&mut buf, &grid, &states, None)?;
                    Some(buf)
                } else {
                    None
                };
                let last = states.last().expect("grid has points");
                Ok(PiPSample {
                    rows: idx.iter().flat_map(|&k| [states[k].pi, states[k].p.x, states[k].p.y, states[k].p.z]).collect(),
                    w_end: *w.last().expect("grid has points"),
                    pi_end: last.pi,
                    errors,
                    first,
                })
            })())
        },
        |i, out| {
            match out {
                Ok(s) => {
                    mean.add(&s.rows);
                    w_stat.add(s.w_end);
                    pi_stat.add(s.pi_end);
                    if let Some(e) = s.errors {
                        for (a, b) in errors.iter_mut().zip(e) {
                            *a = a.max(b);
                        }
                    }
                    if s.first.is_some() {
                        first = s.first;
                    }
                }
                Err(reason) => aborted.push(Abort { trajectory: i, reason }),
            }
            Ok(())
        },
    )?;
    if mean.count == 0 {
        return Err(Error::TrajectoryAborted { t: 0.0, reason: "every trajectory aborted".into() });
    }
    let dev = write_bloch_pair(set, &grid, &idx, &mean, &master)?;
    if let Some(buf) = first {
        set.write("trajectory_0.csv", &buf)?;
    }
    let closed = colinear.then(|| json!({ "max_abs_error_pi": errors[0], "max_abs_error_p": errors[1], "max_abs_error_r": errors[2] }));
    set.write_json(
        "comparison.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "scheme": scheme,
            "colinear": colinear,
            "trajectories_completed": mean.count,
            "trajectories_aborted": aborted.len(),
            "max_abs_deviation": dev.iter().copied().fold(0.0, f64::max),
            "checkpoints": checkpoints(&grid, &idx, &dev),
            "closed_form": closed,
            "mean_likelihood_at_T": pi_stat.mean(),
            "mean_likelihood_std_error": pi_stat.std_error(),
            "martingale": martingale("observation w_T", &w_stat, grid.t_end()),
        }),
    )?;
    Ok(ScenarioOutcome { completed: Some(mean.count), aborted, failures: 0 })
}

fn closed_form(cfg: &ScenarioConfig, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let sc = qubit_scenario(model(cfg)?)?;
    let frame = ColinearFrame::new(&sc.k(), &sc.l)?;
    let (grid, _) = grid_of(cfg)?;
    let seed = cfg.seed.ok_or_else(|| missing("seed"))?;
    let noise = NoisePath::wiener(&grid, seed, 0);
    let w = noise.cumulative();
    let exp = diffusive_pi_p(&sc, &sc.r0, &noise, &grid, PiPScheme::Exponential)?;
    let eul = diffusive_pi_p(&sc, &sc.r0, &noise, &grid, PiPScheme::Euler)?;
    let mut t = Table::new(&["t", "w", "pi_closed", "pi_exponential", "pi_euler", "z_closed", "z_exponential", "z_euler"]);
    for k in 0..grid.len() {
        let cf = closed_form_colinear(&sc.l, &sc.k(), &sc.r0, w[k], grid.time(k))?;
        let z = |r: BlochVector| frame.e.dot(&r);
        t.push(&[grid.time(k), w[k], cf.pi, exp[k].pi, eul[k].pi, z(cf.r), z(exp[k].r()), z(eul[k].r())]);
    }
    set.write("path.csv", &t.to_csv())?;
    let ee = closed_form_errors(&sc, &exp, &w, &grid)?;
    let ue = closed_form_errors(&sc, &eul, &w, &grid)?;
    let loc = cfg.localization.as_ref().ok_or_else(|| missing("localization"))?;
    let stats = localization_statistic(
        loc.l_abs.ok_or_else(|| missing("localization.l_abs"))?,
        loc.t.ok_or_else(|| missing("localization.t"))?,
        loc.z.ok_or_else(|| missing("localization.z"))?,
        loc.samples.ok_or_else(|| missing("localization.samples"))?,
        seed,
    )?;
    set.write_json(
        "comparison.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "exponential": { "max_abs_error_pi": ee[0], "max_abs_error_p": ee[1], "max_abs_error_r": ee[2] },
            "euler": { "max_abs_error_pi": ue[0], "max_abs_error_p": ue[1], "max_abs_error_r": ue[2] },
            "localization": {
                "mean_z": stats.mean_z,
                "mean_z2": stats.mean_z2,
                "std_error_z": stats.std_error_z,
                "std_error_z2": stats.std_error_z2,
                "localized_fraction": stats.localized_fraction,
                "excluded": stats.excluded,
                "samples": stats.samples,
            },
        }),
    )?;
    Ok(ScenarioOutcome::plain())
}

fn density_json(rho: &Operator) -> Vec<[f64; 2]> {
    rho.entries().iter().map(|z| [z.re, z.im]).collect()
}

fn cat(cfg: &ScenarioConfig, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let psi = state_of(&model(cfg)?.psi0)?;
    let (compound, reduced_bits) = cat_model::cat_entropies(&psi)?;
    let chi = cat_model::interact(&psi, &cat_model::delta(0))?;
    let rho_hat = cat_model::compound_density(&chi)?;
    let reduced = cat_model::partial_trace_system(&rho_hat)?;
    let mut outcomes = Vec::new();
    let mut rebuilt = Operator::zeros(2);
    for tau in 0..2 {
        let p = cat_model::outcome_probability(&rho_hat, tau)?;
        let post = match cat_model::bayes_condition(&rho_hat, tau) {
            Ok(post) => {
                rebuilt = rebuilt + post.op().scale_re(p);
                Some(density_json(post.op()))
            }
            Err(Error::ZeroProbability(_)) => None,
            Err(e) => return Err(e),
        };
        outcomes.push(json!({ "tau": tau, "probability": p, "posterior": post }));
    }
    let proj = cat_model::projection_postulate(&psi, &cat_model::pointer_projector(0))?;
    let family = |f: &ReductionFamily| -> Result<serde_json::Value> {
        let outs = cat_model::reduction_apply(f, &psi)?;
        Ok(outs.iter().map(|o| json!({ "label": o.label, "probability": o.probability })).collect())
    };
    let g = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
    let diag = cat_model::nondemolition_check(g, &sigma_z(), &psi)?;
    let offd = cat_model::nondemolition_check(g, &sigma_x(), &psi)?;
    set.write_json(
        "report.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "entropy_bits": { "compound": compound, "reduced": reduced_bits },
            "reduced_state": density_json(reduced.op()),
            "outcomes": outcomes,
            "bayes_reconstruction_deviation": rebuilt.max_abs_diff(reduced.op()),
            "projection": {
                "lambda": proj.lambda,
                "mu": proj.mu,
                "mixed": density_json(proj.mixed.op()),
                "deviation_from_reduced": proj.mixed.op().max_abs_diff(reduced.op()),
            },
            "reduction": { "pointer": family(&ReductionFamily::pointer())?, "unsharp_x": family(&ReductionFamily::unsharp_x())? },
            "commutators": {
                "sigma_z": { "on_initial": diag.on_initial, "full": diag.full },
                "sigma_x": { "on_initial": offd.on_initial, "full": offd.full },
            },
        }),
    )?;
    Ok(ScenarioOutcome::plain())
}

fn direction(v: Option<[f64; 3]>, what: &str) -> Result<Direction> {
    Direction::normalize(bloch_of(v, what)?)
}

fn bell(cfg: &ScenarioConfig, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let b = cfg.bell.as_ref().ok_or_else(|| missing("bell"))?;
    let r = bloch_of(b.r, "bell.r")?;
    let rows = bell_hidden::grid_check(&r, b.directions.ok_or_else(|| missing("bell.directions"))?)?;
    let mut buf = Vec::new();
    bell_hidden::write_grid_csv(&mut buf, &rows)?;
    set.write("grid.csv", &buf)?;
    let lambda = b.lambda.ok_or_else(|| missing("bell.lambda"))?;
    let deltas = [1e-2, 1e-4, 1e-6, 1e-8];
    let probe = match bell_hidden::discontinuity_probe(lambda, &r, 0.0, &deltas)? {
        ProbeReport::NoBoundary => json!({ "lambda": lambda, "witness": null }),
        ProbeReport::Witness(w) => json!({
            "lambda": lambda,
            "witness": {
                "boundary": format!("{:?}", w.boundary),
                "on_boundary": bloch_row(&w.on_boundary.vector()),
                "jump": w.jump,
                "pairs": w.pairs.iter().map(|p| json!({ "delta": p.0, "s_above": p.1, "s_below": p.2 })).collect::<Vec<_>>(),
            },
        }),
    };
    let (e, f) = (direction(b.e, "bell.e")?, direction(b.f, "bell.f")?);
    let (r1, r2) = (bloch_of(b.r1, "bell.r1")?, bloch_of(b.r2, "bell.r2")?);
    let sweep = bell_hidden::affinity_sweep(&e, &f, &r1, &r2, b.alphas.as_deref().ok_or_else(|| missing("bell.alphas"))?)?;
    set.write_json(
        "report.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "grid_max_abs_error": rows.iter().map(|r| r.abs_error).fold(0.0, f64::max),
            "probe": probe,
            "affinity": {
                "max_deviation": sweep.max_deviation,
                "rows": sweep.rows.iter().map(|r| json!({
                    "alpha": r.alpha, "moment": r.moment, "interpolated": r.interpolated, "deviation": r.deviation,
                })).collect::<Vec<_>>(),
            },
        }),
    )?;
    Ok(ScenarioOutcome::plain())
}

fn spectra_run(cfg: &ScenarioConfig, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let s = cfg.spectra.as_ref().ok_or_else(|| missing("spectra"))?;
    let xs = spectra::log_grid(
        s.x_min.ok_or_else(|| missing("spectra.x_min"))?,
        s.x_max.ok_or_else(|| missing("spectra.x_max"))?,
        s.points.ok_or_else(|| missing("spectra.points"))?,
    )?;
    let mut buf = Vec::new();
    spectra::write_spectrum_csv(&mut buf, &xs)?;
    set.write("spectrum.csv", &buf)?;
    let x = s.series_x.ok_or_else(|| missing("spectra.series_x"))?;
    let series = spectra::mean_quanta_series(x, s.n_max.ok_or_else(|| missing("spectra.n_max"))?)?;
    let closed = spectra::mean_quanta(&SpectralPoint::from_ratio(x)?);
    let e = |x: f64, law| Ok::<f64, Error>(spectra::spectral_energy(&SpectralPoint::from_ratio(x)?, law));
    let planck_low = e(0.1, SpectralLaw::Planck)?;
    let planck_high = e(7.0, SpectralLaw::Planck)?;
    set.write_json(
        "report.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "series": {
                "x": x,
                "value": series.value,
                "remainder": series.remainder,
                "closed_form": closed,
                "abs_difference": (series.value - closed).abs(),
            },
            "limits": {
                "rayleigh_gap_at_x_0_1": (planck_low - e(0.1, SpectralLaw::Rayleigh)?).abs(),
                "wien_relative_gap_at_x_7": (planck_high - e(7.0, SpectralLaw::Wien)?).abs() / planck_high,
            },
        }),
    )?;
    Ok(ScenarioOutcome::plain())
}

fn ito_check(cfg: &ScenarioConfig, set: &mut ArtifactSet) -> Result<ScenarioOutcome> {
    let d = cfg.ito.as_ref().and_then(|i| i.d).ok_or_else(|| missing("ito.d"))?;
    let report = verify_table(d)?;
    let failures = report.failures();
    set.write_json(
        "report.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "d": d,
            "failures": failures,
            "products": report.products.iter().map(|p| json!({
                "left": p.left, "right": p.right, "symbolic": p.symbolic, "via_matrix": p.via_matrix, "ok": p.ok,
            })).collect::<Vec<_>>(),
            "identities": report.identities.iter().map(|(name, ok)| json!({ "identity": name, "ok": ok })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(ScenarioOutcome { failures, ..ScenarioOutcome::plain() })
}
