//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavegh::config::{load_config, ScenarioConfig};
use wavegh::report::StudyOutcome;
use wavegh::studies::{self, Study};
use wavegh_core::discretization::{
    assemble_operators, first_eigenvalue, DiscreteOperator, Level, Mesh, NonlinearitySpec, NormPack, StateVector,
};
use wavegh_core::dynamics::Integrator;
use wavegh_core::gh::{gh_exact, gh_lower, gh_upper, FiniteMetricSpace};
use wavegh_core::linalg::BandedSym;
use wavegh_core::perturbation::{CoefficientField, ReferenceDomain};

struct Line {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

impl Line {
    fn passed(&self) -> bool {
        self.pass && self.secs < self.budget
    }

    fn print(&self) {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        println!("{tag} {} {}: {} [{:.2} s, budget {:.1} s]", self.id, self.name, self.detail, self.secs, self.budget);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()))
}

fn identity_operator(domain: ReferenceDomain, n: usize) -> DiscreteOperator {
    let mesh = Mesh::new(domain, n).unwrap();
    assemble_operators(&mesh, &CoefficientField::identity(domain.dim(), mesh.quadrature_points())).unwrap()
}

fn c1() -> Line {
    let ((l1, l2), secs) = timed(|| {
        let op1 = identity_operator(ReferenceDomain::interval(0.0, 1.0).unwrap(), 256);
        let op2 = identity_operator(ReferenceDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap(), 64);
        (first_eigenvalue(&op1, 1e-10).unwrap().lambda1, first_eigenvalue(&op2, 1e-10).unwrap().lambda1)
    });
    let r1 = (l1 / (PI * PI) - 1.0).abs();
    let r2 = (l2 / (2.0 * PI * PI) - 1.0).abs();
    Line {
        id: "C1",
        name: "eigenvalue fidelity",
        pass: r1 <= 1e-3 && r2 <= 5e-3,
        detail: format!("1D rel err {r1:.3e} (<= 1e-3), 2D rel err {r2:.3e} (<= 5e-3)"),
        secs,
        budget: 5.0,
    }
}

/// `a'' + a' + λ a = 0`, `a(0) = 1`, `a'(0) = 0`.
fn damped_mode(lambda: f64, t: f64) -> (f64, f64) {
    let w = (lambda - 0.25).sqrt();
    let e = (-0.5 * t).exp();
    (e * ((w * t).cos() + 0.5 / w * (w * t).sin()), -e * (w + 0.25 / w) * (w * t).sin())
}

fn observed_orders(op: &DiscreteOperator, phi: &[f64], lambda: f64, t_end: f64) -> (Vec<f64>, Vec<f64>) {
    let pack = NormPack::new(op);
    let s0 = StateVector::new(phi.to_vec(), vec![0.0; phi.len()]).unwrap();
    let (a, da) = damped_mode(lambda, t_end);
    let exact = StateVector::new(phi.iter().map(|x| a * x).collect(), phi.iter().map(|x| da * x).collect()).unwrap();
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let integ = Integrator::new(op, NonlinearitySpec::zero(), dt).unwrap();
            pack.x_dist(&integ.evolve(&s0, t_end).unwrap(), &exact, Level::X0)
        })
        .collect();
    let orders = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    (errs, orders)
}

fn c2() -> Line {
    let ((mode, pde), secs) = timed(|| {
        // the mode itself: unit mass and stiffness, ω = √3/2
        let mut m = BandedSym::zeros(1, 0);
        m.add(0, 0, 1.0);
        let op = DiscreteOperator::from_matrices(m.clone(), m).unwrap();
        let mode = observed_orders(&op, &[1.0], 1.0, 5.0);
        // sin x on (0,π) against the frequency of the discrete eigenpair
        let n = 32;
        let mesh = Mesh::new(ReferenceDomain::interval(0.0, PI).unwrap(), n).unwrap();
        let op = assemble_operators(&mesh, &CoefficientField::identity(1, mesh.quadrature_points())).unwrap();
        let h = PI / n as f64;
        let lambda_h = 6.0 * (1.0 - h.cos()) / (h * h * (2.0 + h.cos()));
        let pde = observed_orders(&op, &mesh.interpolate_fn(|p| p[0].sin()), lambda_h, 5.0);
        (mode, pde)
    });
    let min = mode.1.iter().chain(&pde.1).cloned().fold(f64::INFINITY, f64::min);
    Line {
        id: "C2",
        name: "solver order",
        pass: min >= 1.9,
        detail: format!("mode orders {:.3?}, sin(x) on (0,pi) orders {:.3?} (>= 1.9)", mode.1, pde.1),
        secs,
        budget: 10.0,
    }
}

fn random_space(rng: &mut ChaCha8Rng) -> FiniteMetricSpace {
    let n = rng.gen_range(1..=6);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()).collect())
        .collect();
    FiniteMetricSpace::from_rows(&rows).unwrap()
}

fn c6() -> Line {
    let ((equal, below, lower_bad, two, one), secs) = timed(|| {
        let (mut equal, mut below, mut lower_bad) = (0, 0, 0);
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_space(&mut rng);
            let y = random_space(&mut rng);
            let exact = gh_exact(&x, &y).unwrap().upper;
            let up = gh_upper(&x, &y, 200, seed).unwrap().upper;
            let tol = 1e-12 * (1.0 + exact);
            if (up - exact).abs() <= tol {
                equal += 1;
            }
            if up < exact - tol {
                below += 1;
            }
            if gh_lower(&x, &y) > exact + tol {
                lower_bad += 1;
            }
        }
        let pair = |d: f64| FiniteMetricSpace::from_rows(&[vec![0.0, d], vec![d, 0.0]]).unwrap();
        let point = FiniteMetricSpace::from_rows(&[vec![0.0]]).unwrap();
        let two = gh_upper(&pair(2.0), &pair(3.0), 200, 0).unwrap().upper;
        let one = gh_upper(&point, &pair(3.0), 200, 0).unwrap().upper;
        (equal, below, lower_bad, two, one)
    });
    Line {
        id: "C6",
        name: "GH oracle equivalence",
        pass: equal >= 90 && below == 0 && lower_bad == 0 && two == 1.0 && one == 3.0,
        detail: format!(
            "upper = exact in {equal}/100, below exact {below}, lower > exact {lower_bad}, {{2}} vs {{3}} = {two}, point vs {{3}} = {one}"
        ),
        secs,
        budget: 60.0,
    }
}

fn from_outcome(id: &'static str, name: &'static str, outcome: &StudyOutcome, secs: f64, budget: f64) -> Line {
    match outcome.verdict(id) {
        Some(v) => Line { id, name, pass: v.pass, detail: v.detail.clone(), secs, budget },
        None => Line { id, name, pass: false, detail: "study produced no verdict".into(), secs, budget },
    }
}

/// Every output file except the wall-clock record.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "timing.json") {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().unwrap();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let mut lines = vec![c1(), c2()];

    let studies = [
        (Study::Estimates, "estimates.toml"),
        (Study::Continuity, "continuity.toml"),
        (Study::Stability, "stability.toml"),
    ];
    let mut runs = Vec::new();
    for (study, file) in studies {
        let cfg = config(file);
        let out = root.path().join(format!("{}_n", study.name()));
        let (outcome, secs) = timed(|| studies::run(study, &cfg, &out, threads).unwrap());
        match study {
            Study::Estimates => {
                lines.push(from_outcome("C3", "Gronwall envelope", &outcome, secs, 60.0));
                lines.push(from_outcome("C4", "energy bound shape", &outcome, secs, 60.0));
                lines.push(from_outcome("C5", "conjugated flow convergence", &outcome, secs, 120.0));
                lines.push(c6());
            }
            Study::Continuity => lines.push(from_outcome("C7", "continuity study", &outcome, secs, 600.0)),
            Study::Stability => lines.push(from_outcome("C8", "stability study", &outcome, secs, 600.0)),
            Study::Solve => unreachable!(),
        }
        runs.push((study, cfg, out, secs));
    }

    let mut diffs = Vec::new();
    let mut c9_secs = 0.0;
    for (study, cfg, out_n, _) in &runs {
        let out_1 = root.path().join(format!("{}_1", study.name()));
        let (_, secs) = timed(|| studies::run(*study, cfg, &out_1, 1).unwrap());
        c9_secs += secs;
        let (a, b) = (snapshot(out_n), snapshot(&out_1));
        if a.keys().ne(b.keys()) {
            diffs.push(format!("{}: file sets differ", study.name()));
        }
        for (k, v) in &a {
            if b.get(k) != Some(v) {
                diffs.push(format!("{}/{}", study.name(), k.display()));
            }
        }
    }
    lines.push(Line {
        id: "C9",
        name: "determinism",
        pass: diffs.is_empty(),
        detail: if diffs.is_empty() {
            format!("estimates, continuity and stability byte-identical at 1 and {threads} threads")
        } else {
            format!("differences: {}", diffs.join(", "))
        },
        secs: c9_secs,
        // a single-thread rerun may not be faster than the pooled one
        budget: 2.0 * runs.iter().map(|r| r.3).sum::<f64>() + 1.0,
    });

    lines.sort_by_key(|l| l.id[1..].parse::<u32>().unwrap());
    for l in &lines {
        l.print();
    }
    if lines.iter().all(Line::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
