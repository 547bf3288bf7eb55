//! The batch studies. Each writes its CSV tables row group by row group, then
//! `report.json` and `timing.json`, into the output directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use wavegh_core::discretization::{
    assemble_operators, validate_f, DiscreteOperator, Level, Mesh, NonlinearitySpec, NormPack, StateVector,
};
use wavegh_core::dynamics::{
    conjugated_flow_error, draw_initial_condition, energy_profile, fit_envelope, lipschitz_envelope_check,
    AttractorSample, Integrator, LipschitzConstants, GRONWALL_SLACK,
};
use wavegh_core::gh::{
    dgh_dynamical_with, gh_exact, gh_lower, verify_dynamical, DynamicalCheck, FiniteMetricSpace, MapCandidate,
    SearchOptions,
};
use wavegh_core::perturbation::{c2_distance, deviation_norms, make_pullback, DiffeoMap};

use crate::config::{GhSection, ScenarioConfig};
use crate::io::{write_coordinate, write_json, write_sample, write_synced, Cell, CsvWriter, EigenJson, GhJson};
use crate::parallel::{self, in_pool};
use crate::report::{write_report, StudyOutcome, Timer, Verdict};
use crate::HarnessError;

/// Streams for the Lipschitz pairs start here so they never collide with the
/// sampler's initial conditions.
const PAIR_STREAM: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Continuity,
    Stability,
    Estimates,
    Solve,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Continuity => "continuity",
            Study::Stability => "stability",
            Study::Estimates => "estimates",
            Study::Solve => "solve",
        }
    }
}

/// Runs a study on a pool of `threads` workers and writes its report files.
pub fn run(study: Study, cfg: &ScenarioConfig, out: &Path, threads: usize) -> Result<StudyOutcome, HarnessError> {
    std::fs::create_dir_all(out)?;
    let mut timer = Timer::new();
    let outcome = in_pool(threads, || match study {
        Study::Continuity => continuity(cfg, out, &mut timer),
        Study::Stability => stability(cfg, out, &mut timer),
        Study::Estimates => estimates(cfg, out, &mut timer),
        Study::Solve => solve(cfg, out, &mut timer),
    })??;
    write_report(out, Some(cfg), &outcome)?;
    timer.write(out, study.name(), threads)?;
    Ok(outcome)
}

/// Ad-hoc comparison of two metric files.
pub fn run_gh(
    x_path: &Path,
    y_path: &Path,
    gh: &GhSection,
    seed: u64,
    out: &Path,
    threads: usize,
) -> Result<StudyOutcome, HarnessError> {
    std::fs::create_dir_all(out)?;
    let mut timer = Timer::new();
    let x = crate::io::read_metric(x_path)?;
    let y = crate::io::read_metric(y_path)?;
    let opts = SearchOptions { sweeps: gh.sweeps, ..Default::default() };
    let est = in_pool(threads, || parallel::gh_upper(&x, &y, gh.budget, seed, &opts))??;
    timer.stage("search");
    write_json(&out.join("gh.json"), &GhJson::from(&est))?;
    let mut artifacts = vec!["gh.json".to_string()];
    let exact = if x.len().max(y.len()) <= gh.exact_cap {
        let e = gh_exact(&x, &y)?;
        write_json(&out.join("gh_exact.json"), &GhJson::from(&e))?;
        artifacts.push("gh_exact.json".into());
        Some(e.upper)
    } else {
        None
    };
    let summary = json!({
        "n_x": x.len(),
        "n_y": y.len(),
        "lower": est.lower,
        "upper": est.upper,
        "exact": exact,
        "triangle_violation_x": x.triangle_violation(),
        "triangle_violation_y": y.triangle_violation(),
    });
    let outcome = StudyOutcome { study: "gh", summary, verdicts: Vec::new(), artifacts };
    write_report(out, None, &outcome)?;
    timer.write(out, "gh", threads)?;
    Ok(outcome)
}

fn operator(mesh: &Mesh, h: &DiffeoMap) -> wavegh_core::Result<DiscreteOperator> {
    let id = DiffeoMap::identity(*h.domain());
    assemble_operators(mesh, &mesh.pullback(&id, h)?)
}

/// Seeds for the identical-map control runs.
pub fn control_seed(seed: u64, run: usize) -> u64 {
    seed ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn nearest_map(src: &[StateVector], dst: &[StateVector], pack: &NormPack<'_>) -> Vec<usize> {
    src.par_iter()
        .map(|p| {
            dst.iter()
                .enumerate()
                .map(|(j, q)| (pack.x_dist(p, q, Level::X0), j))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map_or(0, |(_, j)| j)
        })
        .collect()
}

fn provenance_map(src: &AttractorSample, dst: &AttractorSample, fallback: &[usize]) -> Vec<usize> {
    src.provenance
        .iter()
        .zip(fallback)
        .map(|(p, &nn)| dst.provenance.iter().position(|q| q.ic == p.ic && q.snap == p.snap).unwrap_or(nn))
        .collect()
}

/// Starting maps for the search between two samples on the same mesh: match
/// by provenance where both samples kept the same snapshot, and nearest
/// neighbours in the shared coefficient space.
fn seed_candidates(
    a: &AttractorSample,
    b: &AttractorSample,
    pack: &NormPack<'_>,
) -> (Vec<MapCandidate>, Vec<MapCandidate>) {
    let side = |src: &AttractorSample, dst: &AttractorSample| -> Vec<MapCandidate> {
        let nn = nearest_map(&src.points, &dst.points, pack);
        let prov = provenance_map(src, dst, &nn);
        let mut out = vec![MapCandidate { source: src.len(), target: dst.len(), map: prov }];
        if out[0].map != nn {
            out.push(MapCandidate { source: src.len(), target: dst.len(), map: nn });
        }
        out
    };
    (side(a, b), side(b, a))
}

fn skeleton_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace, cap: usize) -> wavegh_core::Result<f64> {
    let idx: Vec<usize> = (0..cap.min(x.len()).min(y.len())).collect();
    Ok(gh_exact(&x.subspace(&idx)?, &y.subspace(&idx)?)?.upper)
}

fn partial(study: &'static str, step: usize) -> impl FnOnce(HarnessError) -> HarnessError {
    move |e| HarnessError::Partial { study, step, source: Box::new(e) }
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

struct StepResult {
    row: Vec<Cell>,
    json: Value,
    upper: f64,
}

pub fn continuity(cfg: &ScenarioConfig, out: &Path, timer: &mut Timer) -> Result<StudyOutcome, HarnessError> {
    let domain = cfg.domain()?;
    let mesh = Mesh::new(domain, cfg.domain.resolution)?;
    let family = cfg.family()?;
    let members = family.members()?;
    let h0 = family.reference();
    let f = cfg.nonlinearity();
    let scfg = cfg.sampler_config();
    let dt = cfg.solver.dt;
    let op0 = operator(&mesh, &h0)?;
    let i0 = Integrator::new(&op0, f, dt)?;
    let pack0 = NormPack::new(&op0);
    let a0 = parallel::sample_attractor(&i0, &mesh, &scfg, cfg.seed)?;
    let x0 = a0.metric_space()?;
    write_sample(out, "sample_ref", &a0)?;
    let mut artifacts = vec!["sample_ref.json".to_string(), "sample_ref.bin".into(), "continuity.csv".into()];
    timer.stage("reference sample");

    let mut csv = CsvWriter::create(
        &out.join("continuity.csv"),
        &[
            "step",
            "s",
            "delta",
            "det_dev",
            "hbar_dev",
            "lambda1",
            "n_points",
            "eps_inv",
            "gh_lower",
            "gh_upper",
            "gh_exact_skeleton",
        ],
    )?;
    let mut steps = Vec::new();
    let mut uppers = Vec::new();
    for (k, (h, &s)) in members.iter().zip(&family.schedule).enumerate() {
        let run_step = || -> Result<StepResult, HarnessError> {
            let op = operator(&mesh, h)?;
            let integ = Integrator::new(&op, f, dt)?;
            let a = parallel::sample_attractor(&integ, &mesh, &scfg, cfg.seed)?;
            let x = a.metric_space()?;
            let (init_i, init_j) = seed_candidates(&a, &a0, &pack0);
            let opts = SearchOptions { init_i, init_j, ..cfg.search_options() };
            let est = parallel::gh_upper(&x, &x0, cfg.gh.budget, cfg.seed, &opts)?;
            let exact = skeleton_exact(&x, &x0, cfg.gh.exact_cap)?;
            let (det_dev, hbar_dev) = deviation_norms(&make_pullback(&h0, h, &mesh.quadrature_points())?);
            let field = mesh.pullback(&DiffeoMap::identity(domain), h)?;
            write_synced(&out.join(format!("coefficient_field_{k}.csv")), &field.to_csv())?;
            write_json(&out.join(format!("gh_step_{k}.json")), &GhJson::from(&est))?;
            let row = vec![
                k.into(),
                s.into(),
                h.delta().into(),
                det_dev.into(),
                hbar_dev.into(),
                op.lambda1().into(),
                a.len().into(),
                a.eps_inv.into(),
                est.lower.into(),
                est.upper.into(),
                exact.into(),
            ];
            let json = json!({
                "step": k, "s": s, "delta": h.delta(), "det_dev": det_dev, "hbar_dev": hbar_dev,
                "n_points": a.len(), "eps_inv": a.eps_inv, "gh_lower": est.lower, "gh_upper": est.upper,
                "gh_exact_skeleton": exact,
            });
            Ok(StepResult { row, json, upper: est.upper })
        };
        let r = run_step().map_err(partial("continuity", k))?;
        csv.rows(vec![r.row])?;
        artifacts.push(format!("coefficient_field_{k}.csv"));
        artifacts.push(format!("gh_step_{k}.json"));
        steps.push(r.json);
        uppers.push(r.upper);
        timer.stage(&format!("step {k}"));
    }

    let mut control_csv = CsvWriter::create(&out.join("control.csv"), &["run", "seed", "gh_lower", "gh_upper"])?;
    artifacts.push("control.csv".into());
    let mut control = Vec::new();
    for run in 1..=cfg.gh.control_runs {
        let seed = control_seed(cfg.seed, run);
        let c = parallel::sample_attractor(&i0, &mesh, &scfg, seed)
            .map_err(|e| partial("continuity", members.len() + run)(e.into()))?;
        let xc = c.metric_space()?;
        let (init_i, init_j) = seed_candidates(&c, &a0, &pack0);
        let opts = SearchOptions { init_i, init_j, ..cfg.search_options() };
        let est = parallel::gh_upper(&xc, &x0, cfg.gh.budget, cfg.seed, &opts)?;
        control_csv.rows(vec![vec![run.into(), seed.into(), est.lower.into(), est.upper.into()]])?;
        control.push(est.upper);
    }
    timer.stage("control runs");

    let floor = control.iter().sum::<f64>() / control.len() as f64;
    let last = *uppers.last().expect("schedule is nonempty");
    let mono = nonincreasing(&uppers);
    let bound = cfg.gh.floor_factor * floor;
    let verdict = Verdict::new(
        "C7",
        "continuity along the schedule",
        mono && last < bound,
        format!(
            "gh_upper {} along the schedule; final {last:.3e} vs bound {bound:.3e} ({}x noise floor {floor:.3e})",
            if mono { "nonincreasing" } else { "not monotone" },
            cfg.gh.floor_factor
        ),
    );
    let summary =
        json!({ "steps": steps, "control_upper": control, "noise_floor": floor, "reference_points": a0.len() });
    Ok(StudyOutcome { study: "continuity", summary, verdicts: vec![verdict], artifacts })
}

fn check_json(c: &DynamicalCheck) -> Value {
    json!({
        "distortion": c.distortion, "coverage": c.coverage, "base_coverage": c.base_coverage,
        "commuting": c.commuting, "rep_deviation": c.rep_deviation,
    })
}

pub fn stability(cfg: &ScenarioConfig, out: &Path, timer: &mut Timer) -> Result<StudyOutcome, HarnessError> {
    let domain = cfg.domain()?;
    let mesh = Mesh::new(domain, cfg.domain.resolution)?;
    let family = cfg.family()?;
    let members = family.members()?;
    let h0 = family.reference();
    let f = cfg.nonlinearity();
    let scfg = cfg.sampler_config();
    let dt = cfg.solver.dt;
    let grid = domain.validation_grid();
    let op0 = operator(&mesh, &h0)?;
    let i0 = Integrator::new(&op0, f, dt)?;
    let pack0 = NormPack::new(&op0);
    let a0 = parallel::sample_attractor(&i0, &mesh, &scfg, cfg.seed)?;
    let fs0 = a0.flow_sample(&pack0)?;
    write_sample(out, "sample_ref", &a0)?;
    let mut artifacts = vec!["sample_ref.json".to_string(), "sample_ref.bin".into(), "stability.csv".into()];
    timer.stage("reference sample");

    let mut csv = CsvWriter::create(
        &out.join("stability.csv"),
        &[
            "step",
            "s",
            "d_c2",
            "eps",
            "gh_lower",
            "verified",
            "distortion_i",
            "coverage_i",
            "commuting_i",
            "rep_deviation_i",
            "distortion_j",
            "coverage_j",
            "commuting_j",
            "rep_deviation_j",
        ],
    )?;
    let mut rows = Vec::new();
    let mut eps = Vec::new();
    let mut verified = Vec::new();
    for (k, (h, &s)) in members.iter().zip(&family.schedule).enumerate() {
        let run_step = || -> Result<(Vec<Cell>, Value, f64, bool), HarnessError> {
            let op = operator(&mesh, h)?;
            let integ = Integrator::new(&op, f, dt)?;
            let a = parallel::sample_attractor(&integ, &mesh, &scfg, cfg.seed)?;
            let fs = a.flow_sample(&NormPack::new(&op))?;
            let d_c2 = c2_distance(&h0, h, &grid)?;
            let (init_i, init_j) = seed_candidates(&a, &a0, &pack0);
            let opts = cfg.dynamical_options(SearchOptions { init_i, init_j, ..cfg.search_options() });
            let est = dgh_dynamical_with(&fs, &fs0, cfg.gh.budget, cfg.seed, &opts)?;
            let (ok, ci, cj) = verify_dynamical(&fs, &fs0, &est)?;
            let e = est.eps_dynamical.expect("dynamical estimate carries eps");
            write_json(&out.join(format!("gh_pair_{k}.json")), &GhJson::from(&est))?;
            let row = vec![
                k.into(),
                s.into(),
                d_c2.into(),
                e.into(),
                gh_lower(fs.space(), fs0.space()).into(),
                ok.into(),
                ci.distortion.into(),
                ci.coverage.max(ci.base_coverage).into(),
                ci.commuting.into(),
                ci.rep_deviation.into(),
                cj.distortion.into(),
                cj.coverage.max(cj.base_coverage).into(),
                cj.commuting.into(),
                cj.rep_deviation.into(),
            ];
            let json = json!({
                "step": k, "s": s, "d_c2": d_c2, "eps": e, "verified": ok,
                "check_i": check_json(&ci), "check_j": check_json(&cj),
                "rep_i": est.rep_i.as_ref().map(|r| &r.s), "rep_j": est.rep_j.as_ref().map(|r| &r.s),
            });
            Ok((row, json, e, ok))
        };
        let (row, json, e, ok) = run_step().map_err(partial("stability", k))?;
        csv.rows(vec![row])?;
        artifacts.push(format!("gh_pair_{k}.json"));
        rows.push(json);
        eps.push(e);
        verified.push(ok);
        timer.stage(&format!("pair {k}"));
    }

    let last = *eps.last().expect("schedule is nonempty");
    let smallest_ok = *verified.last().expect("schedule is nonempty");
    let mono = nonincreasing(&eps);
    let verdict = Verdict::new(
        "C8",
        "dynamical stability certificate",
        smallest_ok && mono && last < cfg.gh.threshold,
        format!(
            "smallest pair eps {last:.3e} (threshold {:.3e}, witnesses {}); eps {} as d_C2 shrinks",
            cfg.gh.threshold,
            if smallest_ok { "re-verified" } else { "FAILED re-verification" },
            if mono { "nonincreasing" } else { "increases" }
        ),
    );
    let summary = json!({ "pairs": rows, "reference_points": a0.len(), "grid_m": cfg.gh.grid_m });
    Ok(StudyOutcome { study: "stability", summary, verdicts: vec![verdict], artifacts })
}

pub fn estimates(cfg: &ScenarioConfig, out: &Path, timer: &mut Timer) -> Result<StudyOutcome, HarnessError> {
    let domain = cfg.domain()?;
    let mesh = Mesh::new(domain, cfg.domain.resolution)?;
    let family = cfg.family()?;
    let members = family.members()?;
    let h0 = family.reference();
    let f = cfg.nonlinearity();
    let scfg = cfg.sampler_config();
    let sol = &cfg.solver;
    let op0 = operator(&mesh, &h0)?;
    let integ = Integrator::new(&op0, f, sol.dt)?;
    let pack = NormPack::new(&op0);
    let s0 = draw_initial_condition(&pack, &mesh, &scfg, cfg.seed, 0);
    let mut verdicts = Vec::new();
    let mut artifacts = Vec::new();

    // energy envelope
    let traj = integ.trajectory(&s0, sol.t_end, 1)?;
    let profile = energy_profile(&traj, &op0, &f)?;
    let fit = fit_envelope(&profile)?;
    let mut csv = CsvWriter::create(&out.join("energy.csv"), &["t", "e2", "envelope"])?;
    csv.rows(
        profile.times.iter().zip(&profile.e2).map(|(&t, &e)| vec![t.into(), e.into(), fit.eval(t).into()]).collect(),
    )?;
    artifacts.push("energy.csv".to_string());
    verdicts.push(Verdict::new(
        "C4",
        "energy envelope",
        fit.covers(sol.envelope_slack),
        format!(
            "a={:.4e} b={:.4e} c={:.4e}, overshoot {:.4} (slack {})",
            fit.a, fit.b, fit.c, fit.overshoot, sol.envelope_slack
        ),
    ));
    timer.stage("energy envelope");

    // Lipschitz envelope over seeded pairs
    let consts = LipschitzConstants::new(f.l, op0.lambda1())?;
    let reports = (0..sol.pairs)
        .into_par_iter()
        .map(|p| {
            let u = integ
                .evolve(&draw_initial_condition(&pack, &mesh, &scfg, cfg.seed, PAIR_STREAM + 2 * p), sol.t_absorb)?;
            let w = integ.evolve(
                &draw_initial_condition(&pack, &mesh, &scfg, cfg.seed, PAIR_STREAM + 2 * p + 1),
                sol.t_absorb,
            )?;
            lipschitz_envelope_check(&u, &w, sol.horizon, &consts, &integ)
        })
        .collect::<wavegh_core::Result<Vec<_>>>()?;
    let mut csv = CsvWriter::create(&out.join("gronwall.csv"), &["pair", "z0", "max_ratio", "at_time", "pass"])?;
    csv.rows(
        reports
            .iter()
            .enumerate()
            .map(|(p, r)| vec![p.into(), r.z0.into(), r.max_ratio.into(), r.at_time.into(), r.pass.into()])
            .collect(),
    )?;
    artifacts.push("gronwall.csv".into());
    let worst = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    verdicts.push(Verdict::new(
        "C3",
        "Gronwall envelope",
        sol.pairs >= 20 && reports.iter().all(|r| r.pass),
        format!("{} pairs, C={:.4}, worst ratio {worst:.4} (limit {})", sol.pairs, consts.c, 1.0 + GRONWALL_SLACK),
    ));
    timer.stage("gronwall");

    // conjugated flows along the schedule
    let t_grid: Vec<f64> = (0..=sol.conj_steps).map(|k| sol.conj_t * k as f64 / sol.conj_steps as f64).collect();
    let conj = members
        .par_iter()
        .map(|h| conjugated_flow_error(h, &h0, &mesh, &f, &s0, &t_grid, sol.dt))
        .collect::<wavegh_core::Result<Vec<_>>>()?;
    let mut csv =
        CsvWriter::create(&out.join("conjugation.csv"), &["step", "s", "delta", "det_dev", "hbar_dev", "max_error"])?;
    let mut curves = CsvWriter::create(&out.join("conjugation_curves.csv"), &["step", "t", "error"])?;
    for (k, (r, (h, &s))) in conj.iter().zip(members.iter().zip(&family.schedule)).enumerate() {
        csv.rows(vec![vec![
            k.into(),
            s.into(),
            h.delta().into(),
            r.det_dev.into(),
            r.hbar_dev.into(),
            r.max_error.into(),
        ]])?;
        curves.rows(r.times.iter().zip(&r.errors).map(|(&t, &e)| vec![k.into(), t.into(), e.into()]).collect())?;
    }
    artifacts.push("conjugation.csv".into());
    artifacts.push("conjugation_curves.csv".into());
    let errs: Vec<f64> = conj.iter().map(|r| r.max_error).collect();
    let strictly = errs.windows(2).all(|w| w[1] < w[0]);
    let last = *errs.last().expect("schedule is nonempty");
    verdicts.push(Verdict::new(
        "C5",
        "conjugated flow convergence",
        strictly && last < sol.conj_tol,
        format!(
            "max error {} along {} steps; final {last:.3e} (tol {:.1e})",
            if strictly { "strictly decreasing" } else { "not strictly decreasing" },
            errs.len(),
            sol.conj_tol
        ),
    ));
    timer.stage("conjugation");

    let summary = json!({
        "lambda1": op0.lambda1(),
        "envelope": { "a": fit.a, "b": fit.b, "c": fit.c, "overshoot": fit.overshoot, "hull_points": fit.points },
        "gronwall": { "c": consts.c, "worst_ratio": worst, "pairs": sol.pairs },
        "conjugation": { "max_errors": errs, "det_dev": conj.iter().map(|r| r.det_dev).collect::<Vec<_>>(),
                         "hbar_dev": conj.iter().map(|r| r.hbar_dev).collect::<Vec<_>>() },
    });
    Ok(StudyOutcome { study: "estimates", summary, verdicts, artifacts })
}

pub fn solve(cfg: &ScenarioConfig, out: &Path, timer: &mut Timer) -> Result<StudyOutcome, HarnessError> {
    let domain = cfg.domain()?;
    let mesh = Mesh::new(domain, cfg.domain.resolution)?;
    let h = DiffeoMap::identity(domain);
    let f: NonlinearitySpec = cfg.nonlinearity();
    let field = mesh.pullback(&h, &h)?;
    let op = assemble_operators(&mesh, &field)?;
    let integ = Integrator::new(&op, f, cfg.solver.dt)?;
    let pack = NormPack::new(&op);
    let s0 = draw_initial_condition(&pack, &mesh, &cfg.sampler_config(), cfg.seed, 0);
    let traj = integ.trajectory(&s0, cfg.solver.t_end, cfg.solver.record_every)?;
    let profile = energy_profile(&traj, &op, &f)?;
    timer.stage("integrate");

    write_coordinate(&out.join("mass.txt"), &op.m)?;
    write_coordinate(&out.join("stiffness.txt"), &op.k)?;
    write_json(&out.join("eigen.json"), &EigenJson::from(op.eigen_report()))?;
    write_synced(&out.join("coefficient_field.csv"), &field.to_csv())?;
    write_synced(&out.join("trajectory.csv"), &traj.to_csv())?;
    write_synced(&out.join("energy.csv"), &profile.to_csv())?;
    let f_check = validate_f(&f, 2.0 * cfg.sampler.radius, 1001)
        .map(|r| json!({ "max_fprime": r.max_fprime, "fd_rel_err": r.fd_rel_err, "dissipativity": r.dissipativity }));
    let last = traj.states.last().expect("trajectory holds the initial state");
    let summary = json!({
        "n_dof": op.dim(),
        "lambda1": op.lambda1(),
        "lambda_max": op.lambda_max(),
        "dt_cap": op.dt_cap(),
        "final_x0": pack.x_norm(last, Level::X0),
        "final_e2": profile.e2.last(),
        "nonlinearity": f_check.unwrap_or_else(|e| json!({ "error": e.to_string() })),
    });
    let artifacts =
        ["mass.txt", "stiffness.txt", "eigen.json", "coefficient_field.csv", "trajectory.csv", "energy.csv"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    Ok(StudyOutcome { study: "solve", summary, verdicts: Vec::new(), artifacts })
}

/// Lists the files a finished study left in `out`, for reporting.
pub fn artifact_paths(out: &Path, outcome: &StudyOutcome) -> Vec<PathBuf> {
    outcome.artifacts.iter().map(|a| out.join(a)).collect()
}
