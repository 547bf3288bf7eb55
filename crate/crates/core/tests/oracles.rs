use std::f64::consts::PI;
use wavegh_core::discretization::{
    assemble_operators, first_eigenvalue, Level, Mesh, NonlinearitySpec, NormPack, StateVector,
};
use wavegh_core::dynamics::Integrator;
use wavegh_core::perturbation::{
    c2_distance, transfer_state, CoefficientField, DiffeoMap, FamilyKind, MapKind, ReferenceDomain,
};

#[test]
fn c2_distance_of_quadratic_map_matches_closed_form() {
    let d = ReferenceDomain::interval(0.0, 1.0).unwrap();
    let h = DiffeoMap::new(MapKind::Poly1d { coeffs: [0.0, 1.0, 0.05, 0.0] }, d).unwrap();
    let id = DiffeoMap::identity(d);
    // |h - x| = 0.05x², |h' - 1| = 0.1x, |h''| = 0.1, all maximal at x = 1
    let oracle = d.sample_grid(1001).iter().map(|p| 0.05 * p[0] * p[0] + 0.1 * p[0] + 0.1).fold(0.0, f64::max);
    assert!((oracle - 0.25).abs() < 1e-15);
    let got = c2_distance(&h, &id, &d.sample_grid(1001)).unwrap();
    assert!((got - oracle).abs() < 1e-14, "{got} vs {oracle}");
}

fn transfer_error(n: usize, s: f64) -> f64 {
    let d = ReferenceDomain::interval(0.0, 1.0).unwrap();
    let mesh = Mesh::new(d, n).unwrap();
    let id = DiffeoMap::identity(d);
    let h = FamilyKind::Quadratic1d.member(s, d).unwrap();
    let u = mesh.interpolate_fn(|p| (PI * p[0]).sin());
    let moved = transfer_state(&u, &id, &h, &mesh).unwrap();
    assert_eq!(moved.outside, 0);
    // inverse of x + s x (1 - x) by the quadratic formula
    let inv = |x: f64| ((1.0 + s) - ((1.0 + s).powi(2) - 4.0 * s * x).sqrt()) / (2.0 * s);
    mesh.interior_coords()
        .iter()
        .zip(&moved.values)
        .map(|(p, v)| ((PI * inv(p[0])).sin() - v).abs())
        .fold(0.0, f64::max)
}

#[test]
fn transfer_matches_analytic_composition_to_second_order() {
    // only the P1 interpolant of sin(πx) is approximate: |e| ≤ h²π²/8
    let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| transfer_error(n, 0.1)).collect();
    for (k, e) in errs.iter().enumerate() {
        let h = 1.0 / (16 << k) as f64;
        assert!(*e <= h * h * PI * PI / 8.0, "n={}: {e:e}", 16 << k);
    }
    let rate = (errs[0] / errs[3]).log2() / 3.0;
    assert!(rate > 1.8, "rate {rate}, errors {errs:?}");
}

#[test]
fn first_eigenvalue_matches_discrete_sine_mode() {
    for n in [16, 64, 256] {
        let d = ReferenceDomain::interval(0.0, PI).unwrap();
        let mesh = Mesh::new(d, n).unwrap();
        let op = assemble_operators(&mesh, &CoefficientField::identity(1, mesh.quadrature_points())).unwrap();
        let h = PI / n as f64;
        // P1 mass/stiffness on sin(x_j): λ_h = 6(1 - cos h) / (h²(2 + cos h))
        let oracle = 6.0 * (1.0 - h.cos()) / (h * h * (2.0 + h.cos()));
        let got = first_eigenvalue(&op, 1e-10).unwrap().lambda1;
        assert!((got - oracle).abs() < 1e-9 * oracle, "n={n}: {got} vs {oracle}");
    }
}

/// Damped single mode `a'' + a' + λ a = 0` with `a(0) = 1`, `a'(0) = 0`.
fn mode(lambda: f64, t: f64) -> (f64, f64) {
    let w = (lambda - 0.25).sqrt();
    let e = (-0.5 * t).exp();
    let a = e * ((w * t).cos() + 0.5 / w * (w * t).sin());
    let da = -e * (w + 0.25 / w) * (w * t).sin();
    (a, da)
}

#[test]
fn damped_mode_closed_form_is_consistent() {
    // ω = √3/2 for λ = 1; check the ODE residual by central differences
    let (t, e) = (0.7, 1e-4);
    let (a, da) = mode(1.0, t);
    let ddu = (mode(1.0, t + e).0 - 2.0 * a + mode(1.0, t - e).0) / (e * e);
    assert!((ddu + da + a).abs() < 1e-6);
    assert!((mode(1.0, 0.0).0 - 1.0).abs() < 1e-15 && mode(1.0, 0.0).1.abs() < 1e-15);
}

#[test]
fn integrator_is_second_order_on_the_discrete_mode() {
    // coarse enough that dt = 1e-2 is below the stability cap
    let n = 32;
    let d = ReferenceDomain::interval(0.0, PI).unwrap();
    let mesh = Mesh::new(d, n).unwrap();
    let op = assemble_operators(&mesh, &CoefficientField::identity(1, mesh.quadrature_points())).unwrap();
    let pack = NormPack::new(&op);
    let h = PI / n as f64;
    let lambda_h = 6.0 * (1.0 - h.cos()) / (h * h * (2.0 + h.cos()));
    let phi = mesh.interpolate_fn(|p| p[0].sin());
    let s0 = StateVector::new(phi.clone(), vec![0.0; phi.len()]).unwrap();
    let t_end = 2.0;
    let (a, da) = mode(lambda_h, t_end);
    let exact = StateVector::new(phi.iter().map(|x| a * x).collect(), phi.iter().map(|x| da * x).collect()).unwrap();
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let integ = Integrator::new(&op, NonlinearitySpec::zero(), dt).unwrap();
            pack.x_dist(&integ.evolve(&s0, t_end).unwrap(), &exact, Level::X0)
        })
        .collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 1.9, "rate {rate}, errors {errs:?}");
    }
}
