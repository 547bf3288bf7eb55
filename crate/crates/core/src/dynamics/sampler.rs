//! Attractor sampling: seeded initial conditions, transient removal by an
//! energy plateau test, snapshot collection and farthest-point subsampling.
//!
//! The pieces are exposed separately so callers can run initial conditions and
//! flow tables concurrently; [`sample_attractor`] composes them sequentially.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::energy::e2_of;
use super::integrator::Integrator;
use crate::discretization::{Level, Mesh, NormPack, StateVector};
use crate::error::{invalid, Error, Result};
use crate::gh::{FiniteMetricSpace, FlowSample};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_ics: usize,
    /// Initial conditions are scaled into the X¹ ball of this radius.
    pub radius: f64,
    /// Sine modes per axis in the initial-condition expansion.
    pub modes: usize,
    pub t_transient: f64,
    pub t_window: f64,
    pub stride: f64,
    pub max_points: usize,
    pub plateau_tol: f64,
    pub plateau_window: usize,
    pub t_cap: f64,
    /// Flow table resolution: images at `k/m`, `k = 0..=m`.
    pub flow_m: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_ics: 16,
            radius: 2.0,
            modes: 6,
            t_transient: 20.0,
            t_window: 10.0,
            stride: 0.5,
            max_points: 96,
            plateau_tol: 1e-4,
            plateau_window: 50,
            t_cap: 200.0,
            flow_m: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("radius", self.radius),
            ("t_transient", self.t_transient),
            ("t_window", self.t_window),
            ("stride", self.stride),
            ("plateau_tol", self.plateau_tol),
            ("t_cap", self.t_cap),
        ];
        if let Some((name, v)) = pos.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid(format!("sampler.{name} must be positive, got {v}")));
        }
        if self.n_ics == 0 || self.max_points == 0 || self.modes == 0 || self.flow_m == 0 || self.plateau_window == 0 {
            return Err(invalid("sampler counts (n_ics, max_points, modes, flow_m, plateau_window) must be >= 1"));
        }
        if self.t_cap < self.t_transient {
            return Err(invalid("sampler.t_cap must be at least t_transient"));
        }
        Ok(())
    }

    pub fn snapshots_per_ic(&self) -> usize {
        (libm::floor(self.t_window / self.stride + 1e-9) as usize).max(1)
    }
}

/// Random low-mode sine expansion with coefficients `U(-1,1)/k²`, rescaled to
/// an X¹ norm drawn uniformly from `[0.1, 1] · radius`.
///
/// The generator is `ChaCha8(seed)` on stream `ic`, so each draw is independent
/// of how many other initial conditions are drawn or in which order.
pub fn draw_initial_condition(
    pack: &NormPack<'_>,
    mesh: &Mesh,
    cfg: &SamplerConfig,
    seed: u64,
    ic: usize,
) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ic as u64);
    let [(a, b), (c, d)] = mesh.domain().bounds();
    let k = cfg.modes;
    let two_d = mesh.dim() == 2;
    let n_coef = if two_d { k * k } else { k };
    let mut coef = |_: ()| -> Vec<f64> {
        (0..n_coef)
            .map(|idx| {
                let (k1, k2) = if two_d { (idx % k + 1, idx / k + 1) } else { (idx + 1, 1) };
                let decay = if two_d { (k1 * k1 + k2 * k2) as f64 } else { (k1 * k1) as f64 };
                rng.gen_range(-1.0..1.0) / decay
            })
            .collect()
    };
    let cu = coef(());
    let cv = coef(());
    let scale: f64 = rng.gen_range(0.1..1.0);
    let eval = |cs: &[f64], p: [f64; 2]| -> f64 {
        let mut acc = 0.0;
        for (idx, c_k) in cs.iter().enumerate() {
            let (k1, k2) = if two_d { (idx % k + 1, idx / k + 1) } else { (idx + 1, 1) };
            let mut phi = libm::sin(k1 as f64 * core::f64::consts::PI * (p[0] - a) / (b - a));
            if two_d {
                phi *= libm::sin(k2 as f64 * core::f64::consts::PI * (p[1] - c) / (d - c));
            }
            acc += c_k * phi;
        }
        acc
    };
    let s = StateVector { u: mesh.interpolate_fn(|p| eval(&cu, p)), v: mesh.interpolate_fn(|p| eval(&cv, p)) };
    let norm = pack.x_norm(&s, Level::X1);
    if norm == 0.0 {
        return s;
    }
    s.scaled(scale * cfg.radius / norm)
}

/// Post-transient snapshots of one initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct IcRun {
    pub ic: usize,
    pub t_plateau: f64,
    pub snapshots: Vec<(f64, StateVector)>,
}

/// Integrates initial condition `ic` until `t ≥ t_transient` and the energy
/// slope satisfies `|ΔE2/Δt| ≤ tol · max(E2, tol · E2(0))` over every step of
/// the trailing window, then records snapshots every `stride` over `t_window`.
///
/// The `tol · E2(0)` floor lets the test settle on attractors where `E2 → 0`.
pub fn run_ic(integ: &Integrator<'_>, mesh: &Mesh, cfg: &SamplerConfig, seed: u64, ic: usize) -> Result<IcRun> {
    let op = integ.op();
    let f = integ.nonlinearity();
    let pack = NormPack::new(op);
    let dt = integ.dt();
    let tol = cfg.plateau_tol;
    let mut s = draw_initial_condition(&pack, mesh, cfg, seed, ic);
    let e0 = e2_of(op, f, &s.u, &s.v);
    let floor = tol * e0;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.plateau_window + 1);
    window.push_back(e0);
    let mut steps = 0usize;
    let t_plateau = loop {
        let t = steps as f64 * dt;
        if t >= cfg.t_transient && window.len() == cfg.plateau_window + 1 {
            let flat = window
                .iter()
                .zip(window.iter().skip(1))
                .all(|(e_prev, e_next)| libm::fabs(e_next - e_prev) / dt <= tol * e_prev.max(floor));
            if flat {
                break t;
            }
        }
        if t > cfg.t_cap {
            return Err(Error::NonDissipative { t_cap: cfg.t_cap });
        }
        s = integ.step(&s);
        steps += 1;
        if !s.is_finite() {
            return Err(Error::Blowup { time: steps as f64 * dt });
        }
        if window.len() == cfg.plateau_window + 1 {
            window.pop_front();
        }
        window.push_back(e2_of(op, f, &s.u, &s.v));
    };
    let n_snap = cfg.snapshots_per_ic();
    let mut snapshots = Vec::with_capacity(n_snap);
    let mut t = t_plateau;
    for j in 0..n_snap {
        if j > 0 {
            s = integ.evolve_from(&s, t, cfg.stride)?;
            t = t_plateau + j as f64 * cfg.stride;
        }
        snapshots.push((t, s.clone()));
    }
    Ok(IcRun { ic, t_plateau, snapshots })
}

/// Greedy farthest-point selection starting at index 0; ties go to the lowest
/// index.
pub fn farthest_point_indices(points: &[StateVector], max_points: usize, pack: &NormPack<'_>) -> Vec<usize> {
    if points.is_empty() || max_points == 0 {
        return Vec::new();
    }
    let mut chosen = vec![0usize];
    let mut min_d: Vec<f64> = points.iter().map(|p| pack.x_dist(p, &points[0], Level::X0)).collect();
    while chosen.len() < max_points.min(points.len()) {
        let (best, &d) = min_d
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, d)| if *d > *acc.1 { (i, d) } else { acc });
        if d <= 0.0 {
            break;
        }
        chosen.push(best);
        for (i, p) in points.iter().enumerate() {
            let di = pack.x_dist(p, &points[best], Level::X0);
            if di < min_d[i] {
                min_d[i] = di;
            }
        }
    }
    chosen
}

/// Images of `s` at `t = k/m`, `k = 0..=m`.
pub fn flow_images(integ: &Integrator<'_>, s: &StateVector, m: usize) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(s.clone());
    let mut x = s.clone();
    for k in 1..=m {
        // segment lengths k/m - (k-1)/m computed from the grid to avoid drift
        let h = k as f64 / m as f64 - (k - 1) as f64 / m as f64;
        x = integ.evolve(&x, h)?;
        out.push(x.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub ic: usize,
    /// Snapshot ordinal within the run.
    pub snap: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSample {
    pub seed: u64,
    pub points: Vec<StateVector>,
    /// Row-major X⁰ distance matrix.
    pub dist: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// `flows[i][k]` is point `i` advanced to `k/flow_m`.
    pub flows: Vec<Vec<StateVector>>,
    pub flow_m: usize,
    pub plateau_times: Vec<f64>,
    /// Invariance proxy `max_{i,k} min_j ‖φ(x_i, k/m) − x_j‖`.
    pub eps_inv: f64,
}

/// Snapshots of all runs flattened in `(ic, time)` order, then subsampled.
pub fn select_points(runs: &[IcRun], max_points: usize, pack: &NormPack<'_>) -> (Vec<StateVector>, Vec<Provenance>) {
    let mut all = Vec::new();
    let mut prov = Vec::new();
    for run in runs {
        for (snap, (t, s)) in run.snapshots.iter().enumerate() {
            all.push(s.clone());
            prov.push(Provenance { ic: run.ic, snap, t: *t });
        }
    }
    let idx = farthest_point_indices(&all, max_points, pack);
    (idx.iter().map(|&i| all[i].clone()).collect(), idx.iter().map(|&i| prov[i]).collect())
}

pub fn distance_matrix(points: &[StateVector], pack: &NormPack<'_>) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pack.x_dist(&points[i], &points[j], Level::X0);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

impl AttractorSample {
    pub fn from_parts(
        seed: u64,
        points: Vec<StateVector>,
        provenance: Vec<Provenance>,
        flows: Vec<Vec<StateVector>>,
        plateau_times: Vec<f64>,
        pack: &NormPack<'_>,
    ) -> Result<Self> {
        if points.len() != provenance.len() || points.len() != flows.len() {
            return Err(invalid("sample parts have inconsistent lengths"));
        }
        let flow_m = flows.first().map_or(0, |f| f.len().saturating_sub(1));
        if flows.iter().any(|f| f.len() != flow_m + 1) {
            return Err(invalid("flow tables have inconsistent lengths"));
        }
        let dist = distance_matrix(&points, pack);
        let mut eps_inv: f64 = 0.0;
        for flow in &flows {
            for img in flow.iter().skip(1) {
                let near = points.iter().map(|p| pack.x_dist(img, p, Level::X0)).fold(f64::INFINITY, f64::min);
                eps_inv = eps_inv.max(near);
            }
        }
        Ok(Self { seed, points, dist, provenance, flows, flow_m, plateau_times, eps_inv })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn metric_space(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::new(self.len(), self.dist.clone())
    }

    /// Enriched flow sample: point `(x, k)` is `flows[x][k]`, indexed
    /// `x (m + 1) + k`.
    pub fn flow_sample(&self, pack: &NormPack<'_>) -> Result<FlowSample> {
        let enriched: Vec<StateVector> = self.flows.iter().flatten().cloned().collect();
        let d = distance_matrix(&enriched, pack);
        FlowSample::new(self.len(), self.flow_m, FiniteMetricSpace::new(enriched.len(), d)?)
    }
}

/// Sequential composition of the sampling stages.
pub fn sample_attractor(
    integ: &Integrator<'_>,
    mesh: &Mesh,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<AttractorSample> {
    cfg.validate()?;
    let pack = NormPack::new(integ.op());
    let runs = (0..cfg.n_ics).map(|ic| run_ic(integ, mesh, cfg, seed, ic)).collect::<Result<Vec<_>>>()?;
    let (points, provenance) = select_points(&runs, cfg.max_points, &pack);
    let flows = points.iter().map(|p| flow_images(integ, p, cfg.flow_m)).collect::<Result<Vec<_>>>()?;
    let plateau = runs.iter().map(|r| r.t_plateau).collect();
    AttractorSample::from_parts(seed, points, provenance, flows, plateau, &pack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_operators, NonlinearitySpec};
    use crate::perturbation::{CoefficientField, ReferenceDomain};
    use core::f64::consts::PI;

    fn setup() -> (Mesh, crate::discretization::DiscreteOperator) {
        let mesh = Mesh::new(ReferenceDomain::interval(0.0, PI).unwrap(), 16).unwrap();
        let op = assemble_operators(&mesh, &CoefficientField::identity(1, mesh.quadrature_points())).unwrap();
        (mesh, op)
    }

    fn small_cfg() -> SamplerConfig {
        SamplerConfig {
            n_ics: 3,
            t_transient: 5.0,
            t_window: 2.0,
            stride: 0.5,
            max_points: 6,
            flow_m: 4,
            ..Default::default()
        }
    }

    #[test]
    fn initial_conditions_respect_radius_and_seed() {
        let (mesh, op) = setup();
        let pack = NormPack::new(&op);
        let cfg = SamplerConfig::default();
        let a = draw_initial_condition(&pack, &mesh, &cfg, 7, 2);
        let b = draw_initial_condition(&pack, &mesh, &cfg, 7, 2);
        let c = draw_initial_condition(&pack, &mesh, &cfg, 7, 3);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(pack.x_norm(&a, Level::X1) <= cfg.radius * (1.0 + 1e-12));
    }

    #[test]
    fn linear_attractor_is_origin() {
        let (mesh, op) = setup();
        let integ = Integrator::new(&op, NonlinearitySpec::linear(1.0), 1e-2).unwrap();
        let s = sample_attractor(&integ, &mesh, &small_cfg(), 1).unwrap();
        let pack = NormPack::new(&op);
        for p in &s.points {
            assert!(pack.x_norm(p, Level::X0) < 1e-3);
        }
        let space = s.metric_space().unwrap();
        assert!(space.diameter() < 1e-3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let (mesh, op) = setup();
        let integ = Integrator::new(&op, NonlinearitySpec::sine(1.0, -3.0), 1e-2).unwrap();
        let a = sample_attractor(&integ, &mesh, &small_cfg(), 11).unwrap();
        let b = sample_attractor(&integ, &mesh, &small_cfg(), 11).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 6);
        assert_eq!(a.flows[0].len(), 5);
    }

    #[test]
    fn nondissipative_configuration_reported() {
        let (mesh, op) = setup();
        // f(u) = -2u makes the origin a strongly unstable equilibrium on (0, π)
        let integ = Integrator::new(&op, NonlinearitySpec::linear(-2.0), 1e-2).unwrap();
        let cfg = SamplerConfig { t_cap: 10.0, t_transient: 1.0, ..small_cfg() };
        let err = sample_attractor(&integ, &mesh, &cfg, 3).unwrap_err();
        assert!(matches!(err, Error::NonDissipative { .. } | Error::Blowup { .. }), "{err:?}");
    }

    #[test]
    fn farthest_point_prefers_spread() {
        let (_, op) = setup();
        let pack = NormPack::new(&op);
        let n = op.dim();
        let mk = |c: f64| StateVector { u: vec![c; n], v: vec![0.0; n] };
        let pts = [mk(0.0), mk(0.1), mk(1.0), mk(0.5)];
        assert_eq!(farthest_point_indices(&pts, 3, &pack), vec![0, 2, 3]);
    }
}
