//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Reference values come from closed forms and quadratures
//! written here, not from the library.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_traits::Zero;
use qfilter::bell_hidden::{self, affinity_sweep, discontinuity_probe, fibonacci_sphere, lambda_mean, Direction, ProbeReport};
use qfilter::cat_model;
use qfilter::cli::{self, Overrides, ScenarioKind};
use qfilter::ito_algebra::{verify_table, ExactComplex, ItoBasisIndex, ItoElement, Lower, Upper};
use qfilter::noise::{NoisePath, TimeGrid};
use qfilter::qubit_model::{diffusive_pi_p, localization_statistic, PiPScheme, QubitScenario};
use qfilter::spectra::{self, SpectralLaw, SpectralPoint};
use qfilter::statespace::{density_to_bloch, pauli, sigma_x, sigma_z, BlochVector, DensityMatrix, Operator, StateVector, C64};
use qfilter::trajectories::{
    embed_diffusion, integrate_lindblad, run_ensemble, simulate_linear_diffusive, simulate_nonlinear_diffusive,
    simulate_nonlinear_jump, AverageMode, DiffusionModel, DiffusiveDrive, EnsembleAccumulator, MeanVar,
};

const SEED: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// `H = σ(0,0,½)`, `L = σ(0,0,1)`, `ψ₀ = (1,1)/√2`.
fn dephasing_model() -> (DiffusionModel, StateVector) {
    let h = pauli(&BlochVector::new(0.0, 0.0, 0.5));
    let l = pauli(&BlochVector::new(0.0, 0.0, 1.0));
    let psi0 = StateVector::from_real(&[1.0, 1.0]).unwrap().normalized().unwrap();
    (DiffusionModel::new(h, l, 1.0).unwrap(), psi0)
}

/// Solution of the dephasing master equation: diagonal ½, coherence
/// `½e^{−2t}e^{−it}`.
fn dephasing_exact(t: f64) -> Operator {
    let c = C64::new(0.0, -t).exp() * (0.5 * (-2.0 * t).exp());
    Operator::from_rows(2, &[C64::new(0.5, 0.0), c, c.conj(), C64::new(0.5, 0.0)]).unwrap()
}

fn ito_table() -> Verdict {
    let start = Instant::now();
    let minus = ItoBasisIndex { lower: Lower::Minus, upper: Upper::Mode(1) };
    let plus = ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Plus };
    let count = ItoBasisIndex { lower: Lower::Mode(1), upper: Upper::Mode(1) };
    let dt = ItoBasisIndex::DT;
    // vacuum table for d = 1: only these four products are nonzero
    let table = |a: ItoBasisIndex, b: ItoBasisIndex| -> Option<ItoBasisIndex> {
        match (a, b) {
            (x, y) if x == minus && y == plus => Some(dt),
            (x, y) if x == minus && y == count => Some(minus),
            (x, y) if x == count && y == plus => Some(plus),
            (x, y) if x == count && y == count => Some(count),
            _ => None,
        }
    };
    let basis = [dt, minus, plus, count];
    let mut mismatches = 0;
    for a in basis {
        for b in basis {
            let got = ItoElement::<ExactComplex>::basis(1, a).unwrap().mul(&ItoElement::basis(1, b).unwrap()).unwrap();
            let want = match table(a, b) {
                Some(c) => ItoElement::basis(1, c).unwrap(),
                None => ItoElement::zero(1),
            };
            if got != want {
                mismatches += 1;
            }
        }
    }
    // 3×3 representations in the basis (−, 1, +), integer entries
    type M = [[i64; 3]; 3];
    let unit = |i: usize, j: usize| -> M {
        let mut m = [[0; 3]; 3];
        m[i][j] = 1;
        m
    };
    let add = |a: M, b: M, s: i64| -> M {
        let mut m = a;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += s * b[i][j];
            }
        }
        m
    };
    let mul = |a: M, b: M| -> M {
        let mut m = [[0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        m
    };
    let (e_t, e_minus, e_plus, e_count) = (unit(0, 2), unit(0, 1), unit(1, 2), unit(1, 1));
    let w = add(e_minus, e_plus, 1);
    let m = add(w, e_count, 1);
    let oracle_identities = add(mul(w, m), e_t, -1) == e_minus && add(mul(m, w), e_t, -1) == e_plus && add(m, w, -1) == e_count;
    let as_int = |e: &ItoElement<ExactComplex>| -> M {
        let rep = e.matrix_rep();
        let mut out = [[0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                let c = rep.get(i, j);
                assert!(c.im.is_zero() && c.re.is_integer());
                *x = c.re.to_integer().try_into().unwrap();
            }
        }
        out
    };
    let reps_match = as_int(&ItoElement::wiener()) == w && as_int(&ItoElement::poisson()) == m;
    let report = verify_table(1).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && oracle_identities && reps_match && report.failures() == 0 && report.products.len() == 16 && elapsed < 1.0;
    verdict(
        pass,
        format!(
            "16 products vs table: {mismatches} mismatches; library table/identity failures {}; oracle identities {oracle_identities}; {elapsed:.3} s",
            report.failures()
        ),
    )
}

fn checkpoint_indices(grid: &TimeGrid) -> Vec<usize> {
    [0.25, 0.5, 1.0].iter().map(|&t| grid.index_of(t).unwrap()).collect()
}

fn decoherence_mean() -> Verdict {
    let start = Instant::now();
    let (model, psi0) = dephasing_model();
    let grid = TimeGrid::new(1.0, 1e-3).unwrap();
    let n = 10_000;
    let mut acc = EnsembleAccumulator::new(AverageMode::InputMeasure, &grid, 2);
    run_ensemble(
        n,
        1,
        |i| simulate_linear_diffusive(&model, &psi0, &grid, &NoisePath::wiener(&grid, SEED, i)),
        |_, rec| acc.add(&rec),
    )
    .unwrap();
    let mean = acc.finish().unwrap();
    let master = integrate_lindblad(&model, &DensityMatrix::from_pure(&psi0).unwrap(), &grid).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    let mut master_gap = 0.0f64;
    for k in checkpoint_indices(&grid) {
        let exact = dephasing_exact(grid.time(k));
        master_gap = master_gap.max(master[k].op().max_abs_diff(&exact));
        let d = mean[k].max_abs_diff(&exact);
        worst = worst.max(d);
        parts.push(format!("t={}: {d:.4}", grid.time(k)));
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        worst <= 0.05 && master_gap <= 1e-8 && elapsed < 60.0,
        format!("max |mean(χχ†) − ρ(t)| {} (bound 0.05); integrator vs exact {master_gap:.1e}; {elapsed:.1} s", parts.join(", ")),
    )
}

fn closed_form_regression() -> Verdict {
    let l = BlochVector::new(0.0, 0.0, 0.5);
    let k = BlochVector::new(0.0, 0.0, 1.0);
    let r0 = BlochVector::new(0.0, 0.0, 0.3);
    let z = 0.3;
    let la = 0.5;
    let sc = QubitScenario::from_k(k, l, 100.0, 1.0, r0).unwrap();
    // π_± = ½(1 ± z)exp(±2|l|w − 2|l|²t)
    let oracle = |w: f64, t: f64| {
        let plus = 0.5 * (1.0 + z) * (2.0 * la * w - 2.0 * la * la * t).exp();
        let minus = 0.5 * (1.0 - z) * (-2.0 * la * w - 2.0 * la * la * t).exp();
        (plus, minus)
    };
    let sup = |grid: &TimeGrid, scheme: PiPScheme, stream: u64| {
        let noise = NoisePath::wiener(grid, SEED, stream);
        let w = noise.cumulative();
        let path = diffusive_pi_p(&sc, &r0, &noise, grid, scheme).unwrap();
        let mut err = 0.0f64;
        for (i, s) in path.iter().enumerate() {
            let (p, m) = oracle(w[i], grid.time(i));
            let (sp, sm) = (0.5 * (s.pi + s.p.z), 0.5 * (s.pi - s.p.z));
            err = err.max((sp - p).abs()).max((sm - m).abs());
            err = err.max((s.r().z - (p - m) / (p + m)).abs());
        }
        err
    };
    let coarse = TimeGrid::new(1.0, 1e-3).unwrap();
    let fine = TimeGrid::new(1.0, 1e-4).unwrap();
    let exp_err = (0..20).map(|s| sup(&coarse, PiPScheme::Exponential, s)).fold(0.0, f64::max);
    let eul_err = sup(&fine, PiPScheme::Euler, 0);
    verdict(
        exp_err <= 1e-10 && eul_err <= 1e-2,
        format!("exponential scheme sup error {exp_err:.2e} over 20 paths (bound 1e-10); Euler Δt=1e-4 sup error {eul_err:.2e} (bound 1e-2)"),
    )
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn localization() -> Verdict {
    let start = Instant::now();
    let n = 100_000;
    let stats = localization_statistic(20.0, 1.0, 0.0, n, SEED).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    // E[tanh²(40w)], w ~ N(0, 1), composite Gauss–Legendre on [−12, 12]
    let rule = gauss_legendre(16);
    let panels = 2400;
    let h = 24.0 / panels as f64;
    let mut oracle = 0.0;
    for p in 0..panels {
        let mid = -12.0 + (p as f64 + 0.5) * h;
        for &(x, wt) in &rule {
            let w = mid + 0.5 * h * x;
            oracle += 0.5 * h * wt * (40.0 * w).tanh().powi(2) * (-0.5 * w * w).exp() / (2.0 * PI).sqrt();
        }
    }
    let gap = (stats.mean_z2 - oracle).abs();
    verdict(
        stats.mean_z2 >= 0.97 && gap <= 0.01 && elapsed < 10.0,
        format!("E[z²] {:.5} over {n} samples, quadrature {oracle:.5}, gap {gap:.1e} (bound 1e-2); {elapsed:.2} s", stats.mean_z2),
    )
}

fn jump_central_limit() -> Verdict {
    let start = Instant::now();
    let (model, psi0) = dephasing_model();
    let jm = embed_diffusion(&model, 1e4).unwrap();
    let grid = TimeGrid::new(1.0, 1e-3).unwrap();
    let n = 10_000;
    let mut acc = EnsembleAccumulator::new(AverageMode::OutputSample, &grid, 2);
    let mut aborted = 0;
    run_ensemble(
        n,
        1,
        |i| Ok(simulate_nonlinear_jump(&jm, &psi0, &grid, SEED, i).ok()),
        |_, rec| {
            match rec {
                Some(r) => acc.add(&r)?,
                None => aborted += 1,
            }
            Ok(())
        },
    )
    .unwrap();
    let mean = acc.finish().unwrap();
    let mut sup = 0.0f64;
    for (k, rho) in mean.iter().enumerate() {
        let t = grid.time(k);
        let exact = BlochVector::new((-2.0 * t).exp() * t.cos(), (-2.0 * t).exp() * t.sin(), 0.0);
        sup = sup.max(density_to_bloch(rho).unwrap().max_abs_diff(&exact));
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        sup <= 0.05 && aborted == 0,
        format!("ν=1e4, N={n}: sup |mean Bloch − diffusive Lindblad| {sup:.4} (bound 0.05); {aborted} aborted; {elapsed:.1} s"),
    )
}

fn martingales() -> Verdict {
    let (model, psi0) = dephasing_model();
    let grid = TimeGrid::new(1.0, 1e-3).unwrap();
    let n = 10_000;
    let bound = 3.0 * (grid.t_end() / n as f64).sqrt();
    let mut diffusive = MeanVar::default();
    run_ensemble(
        n,
        1,
        |i| {
            let noise = NoisePath::wiener(&grid, SEED, i);
            simulate_nonlinear_diffusive(&model, &psi0, &grid, &noise, DiffusiveDrive::Innovation)
        },
        |_, rec| {
            diffusive.add(rec.innovation_total());
            Ok(())
        },
    )
    .unwrap();
    let jm = embed_diffusion(&model, 100.0).unwrap();
    let mut counting = MeanVar::default();
    run_ensemble(
        n,
        1,
        |i| simulate_nonlinear_jump(&jm, &psi0, &grid, SEED, i),
        |_, rec| {
            counting.add(rec.innovation_total());
            Ok(())
        },
    )
    .unwrap();
    verdict(
        diffusive.mean().abs() <= bound && counting.mean().abs() <= bound,
        format!(
            "mean w̃_T {:.4} (SE {:.4}), mean counting innovation at ν=100 {:.4} (SE {:.4}); bound {bound:.4}",
            diffusive.mean(),
            diffusive.std_error(),
            counting.mean(),
            counting.std_error()
        ),
    )
}

fn cat_exactness() -> Verdict {
    let balanced = StateVector::from_real(&[1.0, 1.0]).unwrap().normalized().unwrap();
    let (compound, reduced) = cat_model::cat_entropies(&balanced).unwrap();
    let one_bit = (compound - 1.0).abs().max((reduced - 1.0).abs());
    let mut bayes = 0.0f64;
    let mut entropy = 0.0f64;
    for (a, b) in [(3.0, 4.0), (5.0, 12.0), (8.0, 15.0), (1.0, 0.0)] {
        let n = f64::hypot(a, b);
        let psi = StateVector::from_real(&[a / n, b / n]).unwrap();
        let rho_hat = cat_model::compound_density(&cat_model::interact(&psi, &cat_model::delta(0)).unwrap()).unwrap();
        let rho = cat_model::partial_trace_system(&rho_hat).unwrap();
        let mut rebuilt = Operator::zeros(2);
        for tau in 0..2 {
            let p = cat_model::outcome_probability(&rho_hat, tau).unwrap();
            if p > 0.0 {
                rebuilt = rebuilt + cat_model::bayes_condition(&rho_hat, tau).unwrap().op().scale_re(p);
            }
        }
        bayes = bayes.max(rebuilt.max_abs_diff(rho.op()));
        let shannon: f64 = [a * a / (n * n), b * b / (n * n)].iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum();
        let (c, r) = cat_model::cat_entropies(&psi).unwrap();
        entropy = entropy.max((c - r).abs()).max((r - shannon).abs());
    }
    let g = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
    let diag = cat_model::nondemolition_check(g, &sigma_z(), &balanced).unwrap();
    let offd = cat_model::nondemolition_check(g, &sigma_x(), &balanced).unwrap();
    verdict(
        one_bit <= 1e-12 && bayes <= 1e-15 && entropy <= 1e-12 && diag.on_initial <= 1e-14 && offd.full > 0.5,
        format!(
            "balanced entropy error {one_bit:.1e}; Bayes reconstruction {bayes:.1e}; compound/reduced/Shannon {entropy:.1e}; diagonal commutator on χ₀ {:.1e}; σx commutator norm {:.3}",
            diag.on_initial, offd.full
        ),
    )
}

fn bell_identity() -> Verdict {
    let r = BlochVector::EZ;
    let mut grid_err = 0.0f64;
    for e in fibonacci_sphere(100) {
        let v = e.vector();
        grid_err = grid_err.max((lambda_mean(&e, &r).unwrap() - (v.x * r.x + v.y * r.y + v.z * r.z)).abs());
    }
    let witness = match discontinuity_probe(0.1, &r, 0.0, &[1e-2, 1e-4, 1e-6, 1e-8]).unwrap() {
        ProbeReport::Witness(w) => {
            let flips = w.pairs.iter().all(|(_, above, below)| above != below);
            let s_on = bell_hidden::s_lambda(&w.on_boundary, 0.1, &r).unwrap();
            flips && (s_on == 1.0 || s_on == -1.0) && w.jump == 2.0
        }
        ProbeReport::NoBoundary => false,
    };
    let dir = |x, y, z| Direction::normalize(BlochVector::new(x, y, z)).unwrap();
    let alphas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let ez = dir(0.0, 0.0, 1.0);
    let colinear = [
        affinity_sweep(&ez, &ez, &BlochVector::EZ.scale(0.3), &BlochVector::EZ.scale(0.9), &alphas).unwrap(),
        affinity_sweep(&ez, &ez.flip(), &BlochVector::EZ, &-BlochVector::EZ, &alphas).unwrap(),
    ]
    .iter()
    .map(|s| s.max_deviation)
    .fold(0.0, f64::max);
    let orthogonal =
        affinity_sweep(&ez, &dir(1.0, 0.0, 0.0), &BlochVector::new(0.6, 0.0, 0.8), &BlochVector::new(-0.6, 0.0, 0.8), &alphas)
            .unwrap()
            .max_deviation;
    verdict(
        grid_err <= 1e-9 && witness && colinear <= 1e-9 && orthogonal > 1e-3,
        format!(
            "100-direction grid error {grid_err:.1e}; witness at λ=0.1 {witness}; affinity deviation colinear {colinear:.1e}, orthogonal {orthogonal:.3}"
        ),
    )
}

fn planck_limits() -> Verdict {
    let e = |x: f64, law| spectra::spectral_energy(&SpectralPoint::from_ratio(x).unwrap(), law);
    let low = SpectralPoint::from_ratio(0.1).unwrap();
    let rayleigh = (e(0.1, SpectralLaw::Planck) - e(0.1, SpectralLaw::Rayleigh)).abs() / low.thermal_energy();
    let wien = (e(7.0, SpectralLaw::Planck) - e(7.0, SpectralLaw::Wien)).abs() / e(7.0, SpectralLaw::Planck);
    // x/(e^x − 1) with kτ = 1
    let planck_oracle = |x: f64| x / x.exp_m1();
    let planck_err = [0.1, 1.0, 7.0].iter().map(|&x| (e(x, SpectralLaw::Planck) - planck_oracle(x)).abs()).fold(0.0, f64::max);
    let mut series = 0.0f64;
    for x in [0.05, 0.5, 1.0, 3.0, 10.0] {
        let s = spectra::mean_quanta_series(x, 2000).unwrap();
        series = series.max((s.value - 1.0 / x.exp_m1()).abs());
    }
    verdict(
        rayleigh <= 1e-3 && wien <= 1e-3 && series <= 1e-12 && planck_err <= 1e-14,
        format!("Rayleigh gap at x=0.1 {rayleigh:.3e}; Wien gap at x=7 {wien:.3e}; series vs closed form {series:.1e}; Planck vs oracle {planck_err:.1e}"),
    )
}

fn determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for kind in ScenarioKind::ALL {
        let over = Overrides { trajectories: Some(200), ..Overrides::default() };
        let cfg = cli::effective_config(kind, None, &over).unwrap();
        let runs: Vec<_> = [(1, "a"), (1, "b"), (3, "c")]
            .iter()
            .map(|&(workers, tag)| {
                let dir = root.path().join(format!("{}-{tag}", kind.name()));
                let out = cli::run(&cfg, workers, &dir).unwrap();
                let mut files: Vec<(String, Vec<u8>)> = out
                    .manifest
                    .artifacts
                    .iter()
                    .map(|a| (a.file.clone(), std::fs::read(dir.join(&a.file)).unwrap()))
                    .collect();
                files.push(("manifest.json".into(), std::fs::read(dir.join("manifest.json")).unwrap()));
                files
            })
            .collect();
        if runs[0] != runs[1] || runs[0] != runs[2] {
            differing.push(kind.name());
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} scenarios run 3× (workers 1, 1, 3); differing: {:?}", ScenarioKind::ALL.len(), differing),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("Itô table exactness", ito_table),
        ("decoherence-mean identity", decoherence_mean),
        ("closed-form regression", closed_form_regression),
        ("localization", localization),
        ("jump-to-diffusion limit", jump_central_limit),
        ("martingale innovations", martingales),
        ("cat-model exactness", cat_exactness),
        ("Bell identity", bell_identity),
        ("Planck limits", planck_limits),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
