//! Scenario configuration: a TOML document with optional sections, overlaid
//! by command-line flags and completed with per-scenario defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::TimeGrid;
use crate::statespace::{pauli, BlochVector, Operator, StateVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Diffusive,
    Jump,
    QubitCounting,
    QubitDiffusive,
    ClosedForm,
    Cat,
    Bell,
    Spectra,
    ItoCheck,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 9] = [
        ScenarioKind::Diffusive,
        ScenarioKind::Jump,
        ScenarioKind::QubitCounting,
        ScenarioKind::QubitDiffusive,
        ScenarioKind::ClosedForm,
        ScenarioKind::Cat,
        ScenarioKind::Bell,
        ScenarioKind::Spectra,
        ScenarioKind::ItoCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Diffusive => "diffusive",
            ScenarioKind::Jump => "jump",
            ScenarioKind::QubitCounting => "qubit-counting",
            ScenarioKind::QubitDiffusive => "qubit-diffusive",
            ScenarioKind::ClosedForm => "closed-form",
            ScenarioKind::Cat => "cat",
            ScenarioKind::Bell => "bell",
            ScenarioKind::Spectra => "spectra",
            ScenarioKind::ItoCheck => "ito-check",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ScenarioKind::Diffusive => "diffusive trajectory ensemble vs the Lindblad master equation",
            ScenarioKind::Jump => "counting trajectory ensemble vs the jump master equation",
            ScenarioKind::QubitCounting => "qubit counting filter in Bloch form vs operator trajectories",
            ScenarioKind::QubitDiffusive => "qubit (π, p) ensemble vs the Bloch master equation and closed form",
            ScenarioKind::ClosedForm => "single colinear path: closed form vs exponential and Euler schemes; localization",
            ScenarioKind::Cat => "instantaneous pointer measurement: entropies, Bayes, projections, commutators",
            ScenarioKind::Bell => "dispersion-free qubit assignments: λ-mean grid, discontinuity, affinity",
            ScenarioKind::Spectra => "blackbody laws and mean occupation number",
            ScenarioKind::ItoCheck => "exact verification of the Itô multiplication table",
        }
    }

    fn is_qubit(self) -> bool {
        matches!(self, ScenarioKind::QubitCounting | ScenarioKind::QubitDiffusive | ScenarioKind::ClosedForm)
    }
}

/// Operator given either as Pauli coefficients `σ(l)` or as a row-major
/// list of `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

impl OperatorSpec {
    pub fn pauli(v: [f64; 3]) -> Self {
        OperatorSpec { pauli: Some(v), matrix: None }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match (&self.pauli, &self.matrix) {
            (Some(p), None) if p.iter().all(|x| x.is_finite()) => Ok(()),
            (Some(_), None) => Err("Pauli coefficients must be finite".into()),
            (None, Some(m)) if matches!(m.len(), 4 | 16) && m.iter().flatten().all(|x| x.is_finite()) => Ok(()),
            (None, Some(m)) => Err(format!("matrix needs 4 or 16 finite [re, im] entries, got {}", m.len())),
            _ => Err("give exactly one of `pauli` or `matrix`".into()),
        }
    }

    pub fn operator(&self) -> Result<Operator> {
        self.validate().map_err(Error::InvalidArgument)?;
        if let Some(p) = self.pauli {
            return Ok(pauli(&BlochVector::from_array(p)));
        }
        let m = self.matrix.as_ref().expect("validated");
        let dim = if m.len() == 4 { 2 } else { 4 };
        Operator::from_rows(dim, &m.iter().map(|z| C64::new(z[0], z[1])).collect::<Vec<_>>())
    }

    /// Bloch coefficients; qubit scenarios accept the Pauli form only.
    pub fn bloch(&self) -> Result<BlochVector> {
        self.pauli
            .filter(|_| self.matrix.is_none())
            .map(BlochVector::from_array)
            .ok_or_else(|| Error::InvalidArgument("qubit scenarios take operators as `pauli` triples".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    /// Output every `stride`-th grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// Linear equations under the reference measure, likelihood-weighted.
    Input,
    /// Nonlinear filters sampled under the output measure.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    Exponential,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<OperatorSpec>,
    /// Qubit Hamiltonian as `k = 2h/ħ`; excludes `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<OperatorSpec>,
    /// Collapse operator of an explicit jump model (with `e`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Measure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSpec {
    pub samples: Option<u64>,
    pub l_abs: Option<f64>,
    pub t: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSpec {
    pub r: Option<[f64; 3]>,
    pub directions: Option<usize>,
    pub lambda: Option<f64>,
    pub e: Option<[f64; 3]>,
    pub f: Option<[f64; 3]>,
    pub r1: Option<[f64; 3]>,
    pub r2: Option<[f64; 3]>,
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraSpec {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub points: Option<usize>,
    pub series_x: Option<f64>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoSpec {
    pub d: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell: Option<BellSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ito: Option<ItoSpec>,
}

/// Command-line overrides; `None` leaves the configured value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub h: Option<[f64; 3]>,
    pub k: Option<[f64; 3]>,
    pub l: Option<[f64; 3]>,
    pub r0: Option<[f64; 3]>,
    pub nu: Option<f64>,
    pub trajectories: Option<u64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
    pub measure: Option<Measure>,
    pub scheme: Option<Scheme>,
}

/// Where a validation problem sits in the document.
struct Problem {
    section: Option<&'static str>,
    key: &'static str,
    message: String,
}

fn problem(section: Option<&'static str>, key: &'static str, message: impl Into<String>) -> Problem {
    Problem { section, key, message: message.into() }
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        ScenarioConfig {
            scenario,
            seed: None,
            trajectories: None,
            output: None,
            grid: None,
            model: None,
            localization: None,
            bell: None,
            spectra: None,
            ito: None,
        }
    }

    /// Parses and validates a document; errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.check().map_err(|p| Error::Config { line: locate(text, p.section, p.key), message: p.message })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|p| Error::InvalidArgument(p.message))
    }

    pub fn apply(&mut self, o: &Overrides) {
        let pauli = |v: &Option<[f64; 3]>| v.map(OperatorSpec::pauli);
        let m = self.model.get_or_insert_with(ModelSpec::default);
        if o.h.is_some() {
            m.h = pauli(&o.h);
        }
        if o.k.is_some() {
            m.k = pauli(&o.k);
        }
        if o.l.is_some() {
            m.l = pauli(&o.l);
        }
        m.r0 = o.r0.or(m.r0);
        m.nu = o.nu.or(m.nu);
        m.measure = o.measure.or(m.measure);
        m.scheme = o.scheme.or(m.scheme);
        if *m == ModelSpec::default() {
            self.model = None;
        }
        self.trajectories = o.trajectories.or(self.trajectories);
        self.seed = o.seed.or(self.seed);
        if o.t_end.is_some() || o.dt.is_some() || o.stride.is_some() {
            let g = self.grid.get_or_insert(GridSpec { t_end: None, dt: None, stride: None });
            g.t_end = o.t_end.or(g.t_end);
            g.dt = o.dt.or(g.dt);
            g.stride = o.stride.or(g.stride);
        }
    }

    /// Fills every field the scenario reads with its default value.
    pub fn complete(&mut self) {
        use ScenarioKind::*;
        let kind = self.scenario;
        let needs_grid = matches!(kind, Diffusive | Jump | QubitCounting | QubitDiffusive | ClosedForm);
        let needs_ensemble = matches!(kind, Diffusive | Jump | QubitCounting | QubitDiffusive);
        if needs_grid || kind == Bell {
            self.seed.get_or_insert(1);
        }
        if needs_ensemble {
            self.trajectories.get_or_insert(match kind {
                QubitCounting => 200,
                _ => 1000,
            });
        }
        if needs_grid {
            let g = self.grid.get_or_insert(GridSpec { t_end: None, dt: None, stride: None });
            g.t_end.get_or_insert(1.0);
            g.dt.get_or_insert(if kind == ClosedForm { 1e-4 } else { 1e-3 });
        }
        let half = std::f64::consts::FRAC_1_SQRT_2;
        match kind {
            Diffusive | Jump => {
                let m = self.model.get_or_insert_with(ModelSpec::default);
                let explicit_jump = kind == Jump && (m.c.is_some() || m.e.is_some());
                if !explicit_jump {
                    m.h.get_or_insert(OperatorSpec::pauli([0.0, 0.0, 0.5]));
                    m.l.get_or_insert(OperatorSpec::pauli([0.0, 0.0, 1.0]));
                }
                m.hbar.get_or_insert(1.0);
                if kind == Jump {
                    m.nu.get_or_insert(100.0);
                }
                if m.psi0.is_none() {
                    let dim = [&m.h, &m.l, &m.c, &m.e]
                        .into_iter()
                        .flatten()
                        .find_map(|s| s.matrix.as_ref().map(|mm| if mm.len() == 16 { 4 } else { 2 }))
                        .unwrap_or(2);
                    let a = (dim as f64).sqrt().recip();
                    m.psi0 = Some(vec![[a, 0.0]; dim]);
                }
                m.measure.get_or_insert(if kind == Jump { Measure::Output } else { Measure::Input });
            }
            QubitCounting | QubitDiffusive | ClosedForm => {
                let m = self.model.get_or_insert_with(ModelSpec::default);
                if m.h.is_none() && m.k.is_none() {
                    m.k = Some(OperatorSpec::pauli(if kind == QubitCounting { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] }));
                }
                m.l.get_or_insert(OperatorSpec::pauli(match kind {
                    QubitDiffusive => [0.0, 0.0, 1.0],
                    _ => [0.0, 0.0, 0.5],
                }));
                m.hbar.get_or_insert(1.0);
                m.nu.get_or_insert(100.0);
                m.r0.get_or_insert(match kind {
                    QubitCounting => [1.0, 0.0, 0.0],
                    QubitDiffusive => [0.8, 0.0, 0.6],
                    _ => [0.0, 0.0, 0.3],
                });
                if kind == ClosedForm {
                    let l = self.localization.get_or_insert_with(LocalizationSpec::default);
                    l.samples.get_or_insert(100_000);
                    l.l_abs.get_or_insert(20.0);
                    l.t.get_or_insert(1.0);
                    l.z.get_or_insert(0.0);
                }
            }
            Cat => {
                let m = self.model.get_or_insert_with(ModelSpec::default);
                m.psi0.get_or_insert(vec![[half, 0.0], [half, 0.0]]);
            }
            Bell => {
                let b = self.bell.get_or_insert_with(BellSpec::default);
                b.r.get_or_insert([0.0, 0.0, 1.0]);
                b.directions.get_or_insert(100);
                b.lambda.get_or_insert(0.1);
                b.e.get_or_insert([0.0, 0.0, 1.0]);
                b.f.get_or_insert([1.0, 0.0, 0.0]);
                b.r1.get_or_insert([0.6, 0.0, 0.8]);
                b.r2.get_or_insert([-0.6, 0.0, 0.8]);
                b.alphas.get_or_insert(vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
            }
            Spectra => {
                let s = self.spectra.get_or_insert_with(SpectraSpec::default);
                s.x_min.get_or_insert(1e-3);
                s.x_max.get_or_insert(20.0);
                s.points.get_or_insert(200);
                s.series_x.get_or_insert(0.5);
                s.n_max.get_or_insert(200);
            }
            ItoCheck => {
                self.ito.get_or_insert_with(ItoSpec::default).d.get_or_insert(1);
            }
        }
    }

    fn check(&self) -> std::result::Result<(), Problem> {
        if self.trajectories == Some(0) {
            return Err(problem(None, "N", "N must be at least 1"));
        }
        if let Some(g) = &self.grid {
            for (key, v) in [("T", g.t_end), ("dt", g.dt)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(problem(Some("grid"), key, format!("{key} must be positive, got {v}")));
                    }
                }
            }
            if let (Some(t), Some(dt)) = (g.t_end, g.dt) {
                let grid = TimeGrid::new(t, dt).map_err(|e| problem(Some("grid"), "dt", e.to_string()))?;
                if let Some(s) = g.stride {
                    if s == 0 || grid.steps() % s != 0 {
                        return Err(problem(Some("grid"), "stride", format!("stride {s} must divide the {} steps", grid.steps())));
                    }
                }
            }
        }
        if let Some(m) = &self.model {
            let ops = [("h", &m.h), ("k", &m.k), ("l", &m.l), ("c", &m.c), ("e", &m.e)];
            for (key, spec) in ops {
                if let Some(s) = spec {
                    s.validate().map_err(|msg| problem(Some("model"), key, format!("{key}: {msg}")))?;
                    if self.scenario.is_qubit() && s.pauli.is_none() {
                        return Err(problem(Some("model"), key, "qubit scenarios take operators as `pauli` triples"));
                    }
                }
            }
            if m.h.is_some() && m.k.is_some() {
                return Err(problem(Some("model"), "k", "`h` and `k` are mutually exclusive"));
            }
            if m.k.is_some() && !self.scenario.is_qubit() {
                return Err(problem(Some("model"), "k", "`k` applies to qubit scenarios only; use `h`"));
            }
            if m.c.is_some() != m.e.is_some() {
                return Err(problem(Some("model"), "c", "an explicit jump model needs both `c` and `e`"));
            }
            for (key, v) in [("nu", m.nu), ("hbar", m.hbar)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(problem(Some("model"), key, format!("{key} must be positive, got {v}")));
                    }
                }
            }
            if let Some(p) = &m.psi0 {
                let v = StateVector::new(&p.iter().map(|z| C64::new(z[0], z[1])).collect::<Vec<_>>())
                    .map_err(|e| problem(Some("model"), "psi0", e.to_string()))?;
                if !v.is_normalized() {
                    return Err(problem(Some("model"), "psi0", format!("psi0 must be normalized, ‖ψ‖ = {}", v.norm())));
                }
            }
            if let Some(r) = m.r0 {
                let n = BlochVector::from_array(r).norm();
                if !(n <= 1.0 + 1e-10) {
                    return Err(problem(Some("model"), "r0", format!("r0 must lie in the unit ball, |r0| = {n}")));
                }
            }
        }
        if let Some(b) = &self.bell {
            if let Some(l) = b.lambda {
                if !(l.abs() <= 0.5) {
                    return Err(problem(Some("bell"), "lambda", "lambda must lie in [-0.5, 0.5]"));
                }
            }
            if b.directions == Some(0) {
                return Err(problem(Some("bell"), "directions", "need at least one direction"));
            }
        }
        if let Some(s) = &self.spectra {
            for (key, v) in [("x_min", s.x_min), ("x_max", s.x_max), ("series_x", s.series_x)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(problem(Some("spectra"), key, format!("{key} must be positive, got {v}")));
                    }
                }
            }
        }
        if let Some(ItoSpec { d: Some(0) }) = &self.ito {
            return Err(problem(Some("ito"), "d", "d must be at least 1"));
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (top level for `None`); 0 if absent.
fn locate(text: &str, section: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = Some(rest.trim_end_matches(']').trim().to_string());
            continue;
        }
        let in_section = match section {
            None => current.is_none(),
            Some(s) => current.as_deref().is_some_and(|c| c == s || c.starts_with(&format!("{s}."))),
        };
        let name = line.split('=').next().unwrap_or("").trim();
        if in_section && name == key {
            return i + 1;
        }
        if let (Some(s), Some(c)) = (section, current.as_deref()) {
            if c == format!("{s}.{key}") {
                return i + 1;
            }
        }
    }
    0
}
