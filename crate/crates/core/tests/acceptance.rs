//! Acceptance suite: one numbered check per criterion, one PASS/FAIL line each.
//!
//! Run with `cargo test -p biharm --test acceptance`; pass criterion numbers
//! as arguments to run a subset.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use biharm::diagnostics::{
    self, coercivity_margins, Classification, CoercivityConstants, DiagnosticsRecord, Thresholds,
};
use biharm::experiment::{cmd_evolve, cmd_sweep, Experiment, SweepEntry};
use biharm::grid::{bilaplacian, build_grid, radial_laplacian, Discretization};
use biharm::groundstate::{
    copt_from_kinetic, explicit_profile, matching_dilation, solve_ground_state, validate_pohozaev, GroundState,
    GroundStateOptions, NormalizedMinimizer,
};
use biharm::io::{read_timeseries, Checkpoint, GridSpec, GroundStateFile, ModelSpec};
use biharm::literal::{format_complex, parse_complex};
use biharm::model::{check_hypotheses, EntryStatus, ModelParams, NonlinearityModel};
use biharm::propagate::{evolve, linear_flow, EvolveOptions, SolutionState, Termination};
use biharm::C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: pass flag and a one-line account.
struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn decoupled(d: usize) -> Arc<NonlinearityModel<f64>> {
    Arc::new(NonlinearityModel::decoupled(ModelParams::unit(d, 1).unwrap()).unwrap())
}

fn space(d: usize, n: usize, r_max: f64) -> Arc<Discretization<f64>> {
    Arc::new(Discretization::build(d, n, r_max).unwrap())
}

fn gaussian(space: &Arc<Discretization<f64>>, model: &Arc<NonlinearityModel<f64>>, amp: f64, width: f64) -> SolutionState<f64> {
    SolutionState::from_fn(
        0.0,
        &[&|r: f64| C::new(amp * (-(r / width) * (r / width)).exp(), 0.0)],
        Arc::clone(space),
        Arc::clone(model),
    )
    .unwrap()
}

fn max_rel_drift(records: &[DiagnosticsRecord<f64>], pick: impl Fn(&DiagnosticsRecord<f64>) -> f64) -> f64 {
    let x0 = pick(&records[0]);
    records.iter().map(|r| ((pick(r) - x0) / x0).abs()).fold(0.0, f64::max)
}

/// The d = 8 ground state shared by several criteria.
struct Reference {
    space: Arc<Discretization<f64>>,
    model: Arc<NonlinearityModel<f64>>,
    gs: GroundState<f64>,
    min: NormalizedMinimizer<f64>,
}

const REF_N: usize = 512;
const REF_R_MAX: f64 = 16.0;

fn reference() -> &'static Reference {
    static CELL: OnceLock<Reference> = OnceLock::new();
    CELL.get_or_init(|| {
        let space = space(8, REF_N, REF_R_MAX);
        let model = decoupled(8);
        let opts = GroundStateOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let (gs, min) = solve_ground_state(&*model, &space, &opts).unwrap();
        Reference { space, model, gs, min }
    })
}

fn thresholds(r: &Reference) -> Thresholds {
    r.gs.thresholds("acceptance reference").unwrap()
}

fn criterion_1() -> Verdict {
    let mut worst = 0.0f64;
    let mut all = true;
    let models: Vec<(&str, NonlinearityModel<f64>)> = vec![
        ("decoupled d=5", NonlinearityModel::decoupled(ModelParams::unit(5, 1).unwrap()).unwrap()),
        ("decoupled d=8", NonlinearityModel::decoupled(ModelParams::unit(8, 1).unwrap()).unwrap()),
        (
            "decoupled d=5 l=2, unequal coefficients",
            NonlinearityModel::decoupled(ModelParams::new(5, vec![1.0, 2.0], vec![0.5, 1.5]).unwrap()).unwrap(),
        ),
        (
            "coupled d=8 beta=0.5",
            NonlinearityModel::coupled(ModelParams::new(8, vec![1.0, 0.7], vec![1.0, 1.3]).unwrap(), 0.5).unwrap(),
        ),
        ("critical power d=8", NonlinearityModel::power(ModelParams::unit(8, 1).unwrap(), 4.0).unwrap()),
    ];
    let mut failing = Vec::new();
    for (label, m) in &models {
        let report = check_hypotheses(m, 10_000, 1e-8, 11).unwrap();
        for e in &report.entries {
            if e.status == EntryStatus::Pass {
                worst = worst.max(e.residual);
            }
        }
        let ok = report.all_pass()
            && ["real_part_identity", "gauge_imaginary_identity"]
                .iter()
                .all(|n| report.entry(n).is_some_and(|e| e.status == EntryStatus::Pass));
        if !ok {
            failing.push(label.to_string());
        }
        all &= ok;
    }
    let broken = NonlinearityModel::power(ModelParams::unit(8, 1).unwrap(), 3.0).unwrap();
    let report = check_hypotheses(&broken, 10_000, 1e-8, 11).unwrap();
    let h5 = report.entry("H5").unwrap();
    let witness: Vec<String> = h5.witness.iter().map(|&z| format_complex(z)).collect();
    let witness_ok = !witness.is_empty()
        && h5.parameter.is_some()
        && witness.iter().zip(&h5.witness).all(|(s, &z)| parse_complex(s) == Some(z));
    let broken_ok = h5.status == EntryStatus::Fail && witness_ok;
    verdict(
        all && broken_ok,
        format!(
            "{} built-in models pass with worst residual {worst:.2e} (failing: {failing:?}); \
             degree-broken model: H5 {:?}, residual {:.2e}, witness {:?} at lambda {:?}",
            models.len(),
            h5.status,
            h5.residual,
            witness,
            h5.parameter
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut worst_lap = 0.0f64;
    let mut worst_bi = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut worst_dense = 0.0f64;
    for d in [5usize, 8] {
        let g = Arc::new(build_grid(d, 512, 1.0f64).unwrap());
        let dd = d as f64;
        let lap = radial_laplacian(&g);
        let v = lap.apply_real(&g.sample(|r| r * r));
        let bi = bilaplacian(&g);
        let w = bi.apply_real(&g.sample(|r| r.powi(4)));
        // Interior: away from the origin closure and the outer ghost.
        for ((&r, &a), &b) in g.nodes().iter().zip(&v).zip(&w) {
            if (0.1..0.9).contains(&r) {
                worst_lap = worst_lap.max((a - 2.0 * dd).abs() / (2.0 * dd));
                let t = 8.0 * dd * (dd + 2.0);
                worst_bi = worst_bi.max((b - t).abs() / t);
            }
        }
        let sp: Discretization<f64> = Discretization::build(d, 512, 1.0).unwrap();
        let ls = sp.laplacian().spectral().unwrap();
        let bs = sp.bilaplacian().spectral().unwrap();
        for (l, b) in ls.eigenvalues().iter().zip(bs.eigenvalues()) {
            worst_eig = worst_eig.max(((l * l - b) / (l * l)).abs());
        }
        // Rayleigh quotients of the stencil bilaplacian at the Laplacian
        // eigenvectors, in the weighted inner product.
        for j in 0..ls.len() {
            let e = ls.eigenvector(j);
            let q = sp.grid().inner_real(&e, &sp.bilaplacian().apply_real(&e));
            let lam2 = ls.eigenvalues()[j].powi(2);
            worst_eig = worst_eig.max(((q - lam2) / lam2).abs());
        }
        // An independent dense eigensolve of the bilaplacian, whose accuracy
        // is relative to its spectral radius.
        let dense = sp.bilaplacian().diagonalize_dense().unwrap();
        let mut squared: Vec<f64> = ls.eigenvalues().iter().map(|l| l * l).collect();
        squared.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let top = squared[squared.len() - 1];
        for (a, b) in squared.iter().zip(dense.eigenvalues()) {
            worst_dense = worst_dense.max((a - b).abs() / top);
        }
    }
    verdict(
        worst_lap <= 1e-6 && worst_bi <= 1e-6 && worst_eig <= 1e-8 && worst_dense <= 1e-8,
        format!(
            "max rel error: Laplacian of r^2 {worst_lap:.2e}, bilaplacian of r^4 {worst_bi:.2e}; \
             Rayleigh quotients vs squared eigenvalues {worst_eig:.2e}, dense eigensolve {worst_dense:.2e} of the spectral radius"
        ),
    )
}

fn criterion_3() -> Verdict {
    let sp = space(5, 256, 8.0);
    let params = ModelParams::new(5, vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
    let free = Arc::new(NonlinearityModel::free(params).unwrap());
    let mut u = SolutionState::from_fn(
        0.0,
        &[
            &|r: f64| C::new((-r * r).exp(), 0.3 * r * (-r * r).exp()),
            &|r: f64| C::new(0.5 * (-(r / 1.5).powi(2)).exp(), 0.0),
        ],
        Arc::clone(&sp),
        Arc::clone(&free),
    )
    .unwrap();
    let g = sp.grid();
    let n0: Vec<f64> = u.fields().iter().map(|f| g.norm_sq(f)).collect();
    let dt = 1e-3;
    for _ in 0..1000 {
        u = linear_flow(&u, dt).unwrap();
    }
    let norm_drift = u
        .fields()
        .iter()
        .zip(&n0)
        .map(|(f, &a)| ((g.norm_sq(f).sqrt() - a.sqrt()) / a.sqrt()).abs())
        .fold(0.0, f64::max);

    let spectral = sp.laplacian().spectral().unwrap();
    let mut phase_err = 0.0f64;
    for j in [0usize, 3, 50, 200] {
        let e = spectral.eigenvector(j);
        let lam = spectral.eigenvalues()[j];
        let psi = SolutionState::new(
            0.0,
            vec![e.iter().map(|&v| C::new(v, 0.0)).collect(), e.iter().map(|&v| C::new(0.0, v)).collect()],
            Arc::clone(&sp),
            Arc::clone(&free),
        )
        .unwrap();
        let out = linear_flow(&psi, dt).unwrap();
        let scale = e.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for (k, (gamma, alpha)) in [(1.0, 1.0), (0.5, 2.0)].into_iter().enumerate() {
            let phase = C::from_polar(1.0, dt * gamma / alpha * lam * lam);
            let unit = if k == 0 { C::new(1.0, 0.0) } else { C::new(0.0, 1.0) };
            let err = out.fields()[k]
                .iter()
                .zip(&e)
                .map(|(&a, &v)| (a - phase * unit * v).norm())
                .fold(0.0, f64::max);
            phase_err = phase_err.max(err / scale);
        }
    }
    verdict(
        norm_drift <= 1e-12 && phase_err <= 1e-10,
        format!("L2 norm drift over 1000 steps {norm_drift:.2e}; eigenvector phase error {phase_err:.2e}"),
    )
}

/// Relative sup-distance between `psi` and the dilated explicit profile on
/// `r ≤ r_max/2`, the dilation matched at the first node.
fn explicit_mismatch(sp: &Discretization<f64>, psi: &[f64]) -> f64 {
    let g = sp.grid();
    let nu = matching_dilation(g.d(), g.nodes()[0], psi[0]).unwrap();
    let peak = psi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    g.nodes()
        .iter()
        .zip(psi)
        .filter(|(&r, _)| r <= g.r_max() / 2.0)
        .map(|(&r, &p)| (p - explicit_profile(g.d(), nu, r)).abs())
        .fold(0.0, f64::max)
        / peak
}

/// Documented bound on the change of the normalised value when the grid is
/// refined from `n = 512` to `n = 1024` at fixed `r_max = 16`.
const GRID_REFINEMENT_TOL: f64 = 3e-3;

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let sp = Discretization::build(8, 1024, REF_R_MAX).unwrap();
    let m = decoupled(8);
    let opts = GroundStateOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let (gs, min) = solve_ground_state(&*m, &sp, &opts).unwrap();
    let elapsed = start.elapsed();
    let mismatch = explicit_mismatch(&sp, &gs.profiles[0]);
    let coarse = reference();
    let refine = (min.value - coarse.min.value).abs() / min.value;
    verdict(
        mismatch <= 1e-3 && elapsed.as_secs() <= 300 && refine <= GRID_REFINEMENT_TOL,
        format!(
            "n=1024, r_max=16: relative sup mismatch {mismatch:.2e} on r <= 8, {} iterations in {:.1}s; \
             I changes by {refine:.2e} from n=512",
            min.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Verdict {
    let r = reference();
    let mut lines = Vec::new();
    let mut ok = true;
    let poh = validate_pohozaev(&r.gs, 1e-4);
    ok &= poh.passed;
    lines.push(format!("decoupled Pohozaev worst {:.2e}", poh.worst()));

    let coupled = NonlinearityModel::coupled(ModelParams::unit(8, 2).unwrap(), 0.5).unwrap();
    let (cgs, _) = solve_ground_state(
        &coupled,
        &r.space,
        &GroundStateOptions {
            tol: 1e-10,
            ..Default::default()
        },
    )
    .unwrap();
    let cpoh = validate_pohozaev(&cgs, 1e-4);
    ok &= cpoh.passed;
    lines.push(format!("coupled beta=0.5 Pohozaev worst {:.2e}", cpoh.worst()));

    for (name, gs) in [("decoupled", &r.gs), ("coupled", &cgs)] {
        let c = gs.copt().unwrap();
        let dis = c.relative_disagreement();
        let sharp = gs.c_opt * gs.kinetic.powi(2);
        let eq = (gs.potential - sharp).abs() / sharp;
        ok &= dis <= 1e-6 && eq <= 1e-4;
        lines.push(format!("{name} C_opt routes differ by {dis:.2e}, equality defect {eq:.2e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_ratio = 0.0f64;
    for _ in 0..100 {
        let terms: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.4..3.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let f = move |r: f64| -> C<f64> {
            terms
                .iter()
                .map(|&(a, b, s, c)| {
                    let g = (-(r / s) * (r / s)).exp();
                    C::new(a * (1.0 + c * r * r) * g, b * g)
                })
                .sum()
        };
        let u = SolutionState::from_fn(0.0, &[&f], Arc::clone(&r.space), Arc::clone(&r.model)).unwrap();
        let k = diagnostics::kinetic(&u);
        let p = diagnostics::potential(&u);
        worst_ratio = worst_ratio.max(p / (r.gs.c_opt * k.powi(2)));
    }
    ok &= worst_ratio <= 1.0;
    lines.push(format!("100 random fields: max P/(C_opt K^2) {worst_ratio:.4}"));
    verdict(ok, lines.join("; "))
}

/// Continuum `K(W)` in `d = 5`, where `K = ∫ W^{10}`.
fn kinetic_w_d5() -> f64 {
    let c10 = 105f64.powf(1.25);
    let area = 8.0 * std::f64::consts::PI.powi(2) / 3.0;
    let gamma_5_2 = 0.75 * std::f64::consts::PI.sqrt();
    c10 * area * gamma_5_2 * gamma_5_2 / 48.0
}

fn criterion_6() -> Verdict {
    let sp = space(5, 256, 8.0);
    let m = decoupled(5);
    let u = gaussian(&sp, &m, 1.0, 1.0);
    let k_psi = kinetic_w_d5();
    let th = Thresholds::new(2.0 * k_psi / 5.0, k_psi, copt_from_kinetic(k_psi, 5).unwrap(), 5, "continuum").unwrap();
    let class = diagnostics::classify(&u, &th);
    let mut drifts = Vec::new();
    let mut mass = 0.0f64;
    let mut ended = true;
    for dt in [1e-4, 5e-5] {
        let tr = evolve(&u, &EvolveOptions::new(dt, 0.1).record_every(10).boundary_tol(1.0)).unwrap();
        let recs: Vec<_> = tr.diagnostics().copied().collect();
        drifts.push(max_rel_drift(&recs, |r| r.energy));
        mass = mass.max(max_rel_drift(&recs, |r| r.mass));
        ended &= tr.termination == Termination::ReachedEnd;
    }
    let ratio = drifts[0] / drifts[1];
    verdict(
        class == Classification::ScatterRegime
            && ended
            && mass <= 1e-8
            && drifts[0] <= 1e-6
            && (3.5..=4.5).contains(&ratio),
        format!(
            "{class:?} data; mass drift {mass:.2e}, energy drift {:.2e} at dt=1e-4 and {:.2e} at dt=5e-5 (ratio {ratio:.3})",
            drifts[0], drifts[1]
        ),
    )
}

fn criterion_7() -> Verdict {
    let sp = space(5, 512, 16.0);
    let m = decoupled(5);
    let u = gaussian(&sp, &m, 1.0, 1.0);
    let tr = evolve(&u, &EvolveOptions::new(1e-5, 5e-3).record_every(25).boundary_tol(1.0)).unwrap();
    let recs: Vec<_> = tr.diagnostics().copied().collect();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut max_bmf = 0.0f64;
    for w in recs.windows(3) {
        if w.iter().any(|r| r.boundary_mass_fraction >= 1e-8) {
            continue;
        }
        let fd = (w[2].virial - w[0].virial) / (w[2].t - w[0].t);
        worst = worst.max((fd - w[1].virial_rate_rhs).abs() / w[1].virial_rate_rhs.abs());
        max_bmf = max_bmf.max(w[1].boundary_mass_fraction);
        checked += 1;
    }
    let r = reference();
    let psi = r.gs.state(1.0, 0.0, Arc::clone(&r.space), Arc::clone(&r.model)).unwrap();
    let rate = diagnostics::virial_rate_rhs(&psi);
    let scale = 8.0 * diagnostics::kinetic(&psi);
    let stationary = rate.abs() / scale;
    verdict(
        checked >= 10 && worst <= 1e-2 && stationary <= 1e-2,
        format!(
            "d=5 Gaussian: {checked} centred differences, max rel mismatch {worst:.2e}, \
             max boundary mass fraction {max_bmf:.1e}; at psi |rate|/8K = {stationary:.2e}"
        ),
    )
}

fn write_reference(dir: &Path) -> std::path::PathBuf {
    let r = reference();
    let spec = ModelSpec {
        name: "decoupled".into(),
        d: 8,
        alpha: vec![1.0],
        gamma: vec![1.0],
        params: Default::default(),
    };
    let path = dir.join("groundstate.json");
    GroundStateFile::new(r.gs.clone(), &spec, GridSpec { n: REF_N, r_max: REF_R_MAX }, "acceptance").save(&path).unwrap();
    path
}

const SWEEP_DT: f64 = 1e-4;
const SWEEP_T: f64 = 0.2;

fn sweep_config(reference: &Path, amplitudes: &str) -> String {
    format!(
        "seed = 1\n[model]\nname = \"decoupled\"\nd = 8\nl = 1\nalpha = [1.0]\ngamma = [1.0]\n\
         [grid]\nn = {REF_N}\nr_max = {REF_R_MAX:?}\n\
         [integrator]\ndt = {SWEEP_DT:?}\nt_end = {SWEEP_T:?}\nrecord_every = 10\nblowup_factor = 100.0\nboundary_mass_tol = 1.0\n\
         [reference]\nground_state = {:?}\n[sweep]\namplitudes = [{amplitudes}]\nworkers = 4\n",
        reference.display().to_string()
    )
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let gs_path = write_reference(dir.path());
    let start = Instant::now();
    let exp = Experiment::from_str(&sweep_config(&gs_path, "0.5, 0.9, 1.1, 1.5"), dir.path()).unwrap();
    let out = cmd_sweep(&exp).unwrap();
    let elapsed = start.elapsed();
    let runs: Vec<SweepEntry> = serde_json::from_value(out.summary["runs"].clone()).unwrap();
    let k_psi = thresholds(reference()).k_psi;
    let expected = [
        Classification::ScatterRegime,
        Classification::ScatterRegime,
        Classification::BlowUpRegime,
        Classification::BlowUpRegime,
    ];
    let mut ok = elapsed.as_secs() <= 900;
    let mut lines = Vec::new();
    for (e, want) in runs.iter().zip(expected) {
        let ev = &e.evidence;
        let energy_ok = e.energy_ratio < 1.0 && (e.energy_ratio - e.energy_ratio_predicted).abs() <= 1e-6;
        let run_ok = if e.amplitude < 1.0 {
            ev.termination == Termination::ReachedEnd && ev.kinetic_max < k_psi && ev.s_stabilizing
        } else {
            ev.termination == Termination::BlowUpDetected && ev.kinetic_growth > 100.0
        };
        ok &= e.classification == want && energy_ok && run_ok;
        lines.push(format!(
            "a={}: {:?}, E/E_psi {:.6} (predicted {:.6}), {:?} at t={:.4}, max K/K0 {:.3}, max K/K_psi {:.3}, S tail {:.2e}",
            e.amplitude,
            e.classification,
            e.energy_ratio,
            e.energy_ratio_predicted,
            ev.termination,
            ev.t_final,
            ev.kinetic_growth,
            ev.kinetic_max / k_psi,
            ev.s_tail_fraction
        ));
    }
    ok &= runs.len() == 4;
    lines.push(format!("sweep wall time {:.1}s", elapsed.as_secs_f64()));
    verdict(ok, lines.join("; "))
}

fn criterion_9() -> Verdict {
    let r = reference();
    let th = thresholds(r);
    let u = r.gs.state(0.5, 0.0, Arc::clone(&r.space), Arc::clone(&r.model)).unwrap();
    let tr = evolve(
        &u,
        &EvolveOptions::new(SWEEP_DT, SWEEP_T).record_every(10).boundary_tol(1.0),
    )
    .unwrap();
    let first = tr.first();
    let c = CoercivityConstants::from_data(first.energy, first.kinetic, &th).unwrap();
    let mut violations = 0;
    let mut min_excess = f64::INFINITY;
    for rec in tr.diagnostics() {
        let m = coercivity_margins(rec, &th, &c);
        if !m.coercive {
            violations += 1;
        }
        min_excess = min_excess.min(m.coercivity / m.floor);
    }
    // Independent evaluation of δ′ from the trapped kinetic level.
    let trapped = 1.0 - c.delta_tilde;
    let delta_prime = 1.0 - trapped.powf(2.0 / 4.0);
    let consistent = (delta_prime - c.delta_prime).abs() < 1e-12;
    verdict(
        violations == 0 && consistent && tr.records.len() > 100,
        format!(
            "{} records, delta' = {:.6}, floor {:.4e}, min coercivity/floor {min_excess:.3}, {violations} violations",
            tr.records.len(),
            c.delta_prime,
            c.coercivity_floor()
        ),
    )
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = |t_end: f64, initial: &str, out: &str| {
        format!(
            "seed = 9\n[model]\nname = \"decoupled\"\nd = 5\nl = 1\nalpha = [1.0]\ngamma = [1.0]\n\
             [grid]\nn = 256\nr_max = 8.0\n\
             [integrator]\ndt = 1e-4\nt_end = {t_end:?}\nrecord_every = 25\nboundary_mass_tol = 1.0\n\
             {initial}[output]\ndir = \"{out}\"\n"
        )
    };
    let gauss = "[initial]\nfamily = \"gaussian\"\namplitudes = [1.0]\nwidths = [1.0]\n";
    let run = |text: String| cmd_evolve(&Experiment::from_str(&text, dir.path()).unwrap()).unwrap();
    run(cfg(0.05, gauss, "a"));
    run(cfg(0.05, gauss, "b"));
    let ta = std::fs::read(dir.path().join("a/timeseries.csv")).unwrap();
    let tb = std::fs::read(dir.path().join("b/timeseries.csv")).unwrap();
    let identical = ta == tb;

    run(cfg(0.025, gauss, "half"));
    run(cfg(
        0.05,
        "[initial]\nfamily = \"checkpoint\"\npath = \"half/final_checkpoint.json\"\n",
        "resumed",
    ));
    let whole = Checkpoint::load(&dir.path().join("a/final_checkpoint.json")).unwrap();
    let resumed = Checkpoint::load(&dir.path().join("resumed/final_checkpoint.json")).unwrap();
    let bits = |c: &Checkpoint| -> Vec<u64> {
        c.fields.iter().flatten().flat_map(|p| [p[0].to_bits(), p[1].to_bits()]).collect()
    };
    let same_state = bits(&whole) == bits(&resumed) && whole.t.to_bits() == resumed.t.to_bits() && whole.resume == resumed.resume;
    let (_, _, rows_whole) = read_timeseries(&dir.path().join("a/timeseries.csv")).unwrap();
    let (_, _, rows_half) = read_timeseries(&dir.path().join("half/timeseries.csv")).unwrap();
    let (_, _, rows_resumed) = read_timeseries(&dir.path().join("resumed/timeseries.csv")).unwrap();
    let mut stitched = rows_half.clone();
    stitched.extend(rows_resumed.into_iter().skip(1));
    let row_bits = |rows: &[Vec<f64>]| -> Vec<u64> { rows.iter().flatten().map(|x| x.to_bits()).collect() };
    let same_series = row_bits(&stitched) == row_bits(&rows_whole);
    verdict(
        identical && same_state && same_series,
        format!(
            "repeat run time series identical: {identical}; resumed final state bitwise equal: {same_state}; \
             stitched time series bitwise equal: {same_series}"
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let v = result.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!("criterion {id:>2}: {} ({secs:.1}s) {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
