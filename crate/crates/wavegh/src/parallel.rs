//! Rayon-backed versions of the parallelizable core stages. Every parallel map
//! collects in index order and every reduction is order-insensitive, so the
//! results match the sequential core functions bit for bit at any thread count.

use rayon::prelude::*;
use wavegh_core::discretization::{Mesh, NormPack};
use wavegh_core::dynamics::{flow_images, run_ic, select_points, AttractorSample, Integrator, SamplerConfig};
use wavegh_core::gh::{combine, direction_problems, DirectionResult, FiniteMetricSpace, GHEstimate, SearchOptions};
use wavegh_core::Result;

use crate::HarnessError;

/// Runs `f` on a dedicated pool; `threads = 0` lets rayon choose.
pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> std::result::Result<T, HarnessError> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn sample_attractor(
    integ: &Integrator<'_>,
    mesh: &Mesh,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<AttractorSample> {
    cfg.validate()?;
    let pack = NormPack::new(integ.op());
    let runs =
        (0..cfg.n_ics).into_par_iter().map(|ic| run_ic(integ, mesh, cfg, seed, ic)).collect::<Result<Vec<_>>>()?;
    let (points, provenance) = select_points(&runs, cfg.max_points, &pack);
    let flows = points.par_iter().map(|p| flow_images(integ, p, cfg.flow_m)).collect::<Result<Vec<_>>>()?;
    let plateau = runs.iter().map(|r| r.t_plateau).collect();
    AttractorSample::from_parts(seed, points, provenance, flows, plateau, &pack)
}

pub fn gh_upper(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: usize,
    seed: u64,
    opts: &SearchOptions,
) -> Result<GHEstimate> {
    let (pi, pj) = direction_problems(x, y, seed, opts)?;
    if budget == 0 {
        return Err(wavegh_core::Error::InvalidArgument("budget must be at least one restart".into()));
    }
    let run = |p: &wavegh_core::gh::DirectionProblem<'_>| -> DirectionResult {
        (0..budget).into_par_iter().map(|k| p.restart(k)).reduce_with(DirectionResult::better).expect("budget >= 1")
    };
    let (ri, rj) = rayon::join(|| run(&pi), || run(&pj));
    Ok(combine(x, y, ri, rj, seed, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use wavegh_core::discretization::{assemble_operators, NonlinearitySpec};
    use wavegh_core::gh;
    use wavegh_core::perturbation::{CoefficientField, ReferenceDomain};

    #[test]
    fn matches_sequential_core() {
        let mesh = Mesh::new(ReferenceDomain::interval(0.0, std::f64::consts::PI).unwrap(), 12).unwrap();
        let op = assemble_operators(&mesh, &CoefficientField::identity(1, mesh.quadrature_points())).unwrap();
        let integ = Integrator::new(&op, NonlinearitySpec::sine(1.0, -3.0), 1e-2).unwrap();
        let cfg =
            SamplerConfig { n_ics: 4, t_transient: 5.0, t_window: 2.0, max_points: 8, flow_m: 3, ..Default::default() };
        let seq = wavegh_core::dynamics::sample_attractor(&integ, &mesh, &cfg, 9).unwrap();
        let par = in_pool(3, || sample_attractor(&integ, &mesh, &cfg, 9)).unwrap().unwrap();
        assert_eq!(seq, par);
        let x = seq.metric_space().unwrap();
        let y = x.subspace(&[0, 2, 4, 6]).unwrap();
        let a = gh::gh_upper(&x, &y, 6, 5).unwrap();
        let b = in_pool(4, || gh_upper(&x, &y, 6, 5, &SearchOptions::default())).unwrap().unwrap();
        assert_eq!(a, b);
    }
}
