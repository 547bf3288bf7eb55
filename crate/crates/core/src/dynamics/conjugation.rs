use alloc::vec::Vec;

use super::integrator::Integrator;
use crate::discretization::{
    assemble_operators, DiscreteOperator, Level, Mesh, NonlinearitySpec, NormPack, StateVector,
};
use crate::error::{invalid, Result};
use crate::perturbation::{deviation_norms, make_pullback, DiffeoMap};

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationReport {
    pub times: Vec<f64>,
    /// `‖T_n(t) V₀ − T₀(t) V₀‖` in the X⁰ norm of the reference operator.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub det_dev: f64,
    pub hbar_dev: f64,
}

/// Error curve between two operators on the shared mesh, starting from the
/// same coefficient vector. `t_grid` must be nondecreasing and nonnegative.
pub fn conjugated_flow_error_ops(
    op_0: &DiscreteOperator,
    op_n: &DiscreteOperator,
    f: &NonlinearitySpec,
    v0: &StateVector,
    t_grid: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, f64)> {
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("t_grid must be nonnegative and nondecreasing"));
    }
    let i0 = Integrator::new(op_0, *f, dt)?;
    let i_n = Integrator::new(op_n, *f, dt)?;
    let pack = NormPack::new(op_0);
    let (mut a, mut b) = (v0.clone(), v0.clone());
    let mut t_prev = 0.0;
    let mut errors = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let h = t - t_prev;
        if h > 0.0 {
            a = i0.evolve_from(&a, t_prev, h)?;
            b = i_n.evolve_from(&b, t_prev, h)?;
        }
        t_prev = t;
        errors.push(pack.x_dist(&a, &b, Level::X0));
    }
    let max = errors.iter().cloned().fold(0.0, f64::max);
    Ok((errors, max))
}

/// Compares the flows pulled back from `h_0` and `h_n`. The transport between
/// the two problems is the identity on coefficients because both are
/// assembled on `mesh`.
pub fn conjugated_flow_error(
    h_n: &DiffeoMap,
    h_0: &DiffeoMap,
    mesh: &Mesh,
    f: &NonlinearitySpec,
    v0: &StateVector,
    t_grid: &[f64],
    dt: f64,
) -> Result<ConjugationReport> {
    let id = DiffeoMap::identity(*h_0.domain());
    let op_0 = assemble_operators(mesh, &mesh.pullback(&id, h_0)?)?;
    let op_n = assemble_operators(mesh, &mesh.pullback(&id, h_n)?)?;
    let (errors, max_error) = conjugated_flow_error_ops(&op_0, &op_n, f, v0, t_grid, dt)?;
    let (det_dev, hbar_dev) = deviation_norms(&make_pullback(h_0, h_n, &mesh.quadrature_points())?);
    Ok(ConjugationReport { times: t_grid.to_vec(), errors, max_error, det_dev, hbar_dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{FamilyKind, ReferenceDomain};

    #[test]
    fn identical_maps_give_zero_error() {
        let d = ReferenceDomain::interval(0.0, core::f64::consts::PI).unwrap();
        let mesh = Mesh::new(d, 24).unwrap();
        let h = FamilyKind::Bump1d { width: 0.5, center: 1.5 }.member(0.1, d).unwrap();
        let v0 = StateVector { u: mesh.interpolate_fn(|p| p[0].sin()), v: mesh.interpolate_fn(|p| (2.0 * p[0]).sin()) };
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let rep = conjugated_flow_error(&h, &h, &mesh, &NonlinearitySpec::default(), &v0, &grid, 1e-2).unwrap();
        assert_eq!(rep.max_error, 0.0);
        assert!(rep.det_dev < 1e-14 && rep.hbar_dev < 1e-14);
    }

    #[test]
    fn error_shrinks_with_amplitude() {
        let d = ReferenceDomain::interval(0.0, core::f64::consts::PI).unwrap();
        let mesh = Mesh::new(d, 24).unwrap();
        let fam = FamilyKind::Bump1d { width: 0.5, center: 1.5 };
        let id = DiffeoMap::identity(d);
        let v0 = StateVector { u: mesh.interpolate_fn(|p| p[0].sin()), v: mesh.interpolate_fn(|_| 0.0) };
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&s| {
                let h = fam.member(s, d).unwrap();
                conjugated_flow_error(&h, &id, &mesh, &NonlinearitySpec::default(), &v0, &grid, 1e-2).unwrap().max_error
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
