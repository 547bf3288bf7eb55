use alloc::format;

use crate::discretization::{Level, NormPack, StateVector};
use crate::error::{invalid, Error, Result};

use super::integrator::{split_steps, Integrator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub l: f64,
    pub lambda1: f64,
    /// `l/(2λ₁) + 1/2`, the growth rate of `‖Z‖_{X⁰}`.
    pub c: f64,
    /// `max(l/λ₁, l)`.
    pub ell: f64,
}

impl LipschitzConstants {
    pub fn new(l: f64, lambda1: f64) -> Result<Self> {
        if !(l >= 0.0) || !(lambda1 > 0.0) {
            return Err(invalid(format!("need l >= 0 and lambda1 > 0, got l = {l}, lambda1 = {lambda1}")));
        }
        Ok(Self { l, lambda1, c: l / (2.0 * lambda1) + 0.5, ell: (l / lambda1).max(l) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallReport {
    /// `max_t ‖Z(t)‖ / (‖Z(0)‖ e^{Ct})` over the step grid.
    pub max_ratio: f64,
    pub at_time: f64,
    pub z0: f64,
    pub pass: bool,
}

pub const GRONWALL_SLACK: f64 = 0.05;

/// Evolves `u0` and `ut0` side by side on `[0, t]` and compares the X⁰ norm of
/// their difference with the Gronwall envelope `‖Z(0)‖ e^{Ct}`.
pub fn lipschitz_envelope_check(
    u0: &StateVector,
    ut0: &StateVector,
    t: f64,
    consts: &LipschitzConstants,
    integ: &Integrator<'_>,
) -> Result<GronwallReport> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid(format!("horizon must lie in (0, 1], got {t}")));
    }
    let pack = NormPack::new(integ.op());
    let z0 = pack.x_dist(u0, ut0, Level::X0);
    if z0 == 0.0 {
        return Err(Error::Degenerate("initial states coincide, ratio undefined".into()));
    }
    let (full, rem) = split_steps(t, integ.dt());
    let (mut a, mut b) = (u0.clone(), ut0.clone());
    let mut rep = GronwallReport { max_ratio: 1.0, at_time: 0.0, z0, pass: true };
    let mut time = 0.0;
    let steps = full + usize::from(rem > 0.0);
    for k in 0..steps {
        let h = if k < full { integ.dt() } else { rem };
        if k < full {
            a = integ.step(&a);
            b = integ.step(&b);
        } else {
            a = integ.evolve(&a, rem)?;
            b = integ.evolve(&b, rem)?;
        }
        time += h;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Blowup { time });
        }
        let ratio = pack.x_dist(&a, &b, Level::X0) / (z0 * libm::exp(consts.c * time));
        if ratio > rep.max_ratio {
            rep.max_ratio = ratio;
            rep.at_time = time;
        }
    }
    rep.pass = rep.max_ratio <= 1.0 + GRONWALL_SLACK;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_operators, Mesh, NonlinearitySpec};
    use crate::perturbation::{CoefficientField, ReferenceDomain};
    use alloc::vec;

    #[test]
    fn constants() {
        let c = LipschitzConstants::new(1.5, 1.0).unwrap();
        assert_eq!(c.c, 1.25);
        assert_eq!(c.ell, 1.5);
        assert!(LipschitzConstants::new(1.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_and_linear_cases() {
        let mesh = Mesh::new(ReferenceDomain::interval(0.0, core::f64::consts::PI).unwrap(), 24).unwrap();
        let op = assemble_operators(&mesh, &CoefficientField::identity(1, mesh.quadrature_points())).unwrap();
        let integ = Integrator::new(&op, NonlinearitySpec::zero(), 1e-2).unwrap();
        let consts = LipschitzConstants::new(0.0, op.lambda1()).unwrap();
        let s = StateVector { u: mesh.interpolate_fn(|p| p[0].sin()), v: vec![0.0; op.dim()] };
        assert!(matches!(lipschitz_envelope_check(&s, &s, 1.0, &consts, &integ), Err(Error::Degenerate(_))));
        let z = StateVector::zeros(op.dim());
        let rep = lipschitz_envelope_check(&s, &z, 1.0, &consts, &integ).unwrap();
        assert!(rep.max_ratio <= 1.0 && rep.pass);
    }
}
