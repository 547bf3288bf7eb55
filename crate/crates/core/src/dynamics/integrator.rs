use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::discretization::{DiscreteOperator, NonlinearitySpec, StateVector};
use crate::error::{invalid, Error, Result};
use crate::linalg::{BandedCholesky, BandedSym};

/// IMEX trapezoidal stepper for `M u'' + M u' + K u = -M f(u)`.
///
/// Damping and stiffness are treated by the trapezoidal rule; `f` is evaluated
/// nodally at the midpoint predictor `u + (dt/2) v`. Each step solves
/// `[(1 + dt/2) M + (dt²/4) K] v₁ = (1 - dt/2) M v₀ - dt K u₀ - (dt²/4) K v₀ - dt M f(u*)`
/// and sets `u₁ = u₀ + (dt/2)(v₀ + v₁)`.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    op: &'a DiscreteOperator,
    f: NonlinearitySpec,
    dt: f64,
    sys: BandedCholesky,
}

fn system(op: &DiscreteOperator, dt: f64) -> Result<BandedCholesky> {
    let a: BandedSym = op.m.combine(1.0 + 0.5 * dt, &op.k, 0.25 * dt * dt);
    a.cholesky()
}

impl<'a> Integrator<'a> {
    pub fn new(op: &'a DiscreteOperator, f: NonlinearitySpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let cap = op.dt_cap();
        if dt > cap {
            return Err(invalid(format!("dt = {dt} exceeds the stability cap {cap:.6e}")));
        }
        Ok(Self { op, f, dt, sys: system(op, dt)? })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn op(&self) -> &'a DiscreteOperator {
        self.op
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.f
    }

    fn step_with(&self, s: &StateVector, dt: f64, sys: &BandedCholesky) -> StateVector {
        let op = self.op;
        let n = s.dim();
        let mut rhs = op.m.matvec(&s.v);
        rhs.iter_mut().for_each(|x| *x *= 1.0 - 0.5 * dt);
        // K (dt u₀ + dt²/4 v₀) in one product
        let w: Vec<f64> = s.u.iter().zip(&s.v).map(|(u, v)| dt * u + 0.25 * dt * dt * v).collect();
        let kw = op.k.matvec(&w);
        for i in 0..n {
            rhs[i] -= kw[i];
        }
        if !self.f.is_zero() {
            let fu: Vec<f64> = s.u.iter().zip(&s.v).map(|(u, v)| self.f.f(u + 0.5 * dt * v)).collect();
            let mf = op.m.matvec(&fu);
            for i in 0..n {
                rhs[i] -= dt * mf[i];
            }
        }
        sys.solve_in_place(&mut rhs);
        let u = s.u.iter().zip(&s.v).zip(&rhs).map(|((u, v0), v1)| u + 0.5 * dt * (v0 + v1)).collect();
        StateVector { u, v: rhs }
    }

    /// One step of size `dt`.
    pub fn step(&self, s: &StateVector) -> StateVector {
        self.step_with(s, self.dt, &self.sys)
    }

    fn check(&self, s: &StateVector, time: f64) -> Result<()> {
        if s.is_finite() {
            Ok(())
        } else {
            Err(Error::Blowup { time })
        }
    }

    /// `T(t) s`: full steps followed by one partial step landing on `t`.
    pub fn evolve(&self, s: &StateVector, t: f64) -> Result<StateVector> {
        self.evolve_from(s, 0.0, t)
    }

    /// As [`Self::evolve`] with `t0` used only for blowup time reporting.
    pub fn evolve_from(&self, s: &StateVector, t0: f64, t: f64) -> Result<StateVector> {
        if !(t >= 0.0) {
            return Err(invalid(format!("evolution time must be nonnegative, got {t}")));
        }
        if s.dim() != self.op.dim() {
            return Err(invalid(format!(
                "state dimension {} differs from operator dimension {}",
                s.dim(),
                self.op.dim()
            )));
        }
        let (full, rem) = split_steps(t, self.dt);
        let mut x = s.clone();
        for k in 0..full {
            x = self.step(&x);
            self.check(&x, t0 + (k + 1) as f64 * self.dt)?;
        }
        if rem > 0.0 {
            let sys = system(self.op, rem)?;
            x = self.step_with(&x, rem, &sys);
            self.check(&x, t0 + t)?;
        }
        Ok(x)
    }

    /// States at `0, dt, 2dt, …` up to `t_end`, keeping every `every`-th step and
    /// the final time.
    pub fn trajectory(&self, s: &StateVector, t_end: f64, every: usize) -> Result<Trajectory> {
        let every = every.max(1);
        let (full, rem) = split_steps(t_end, self.dt);
        let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
        traj.times.push(0.0);
        traj.states.push(s.clone());
        let mut x = s.clone();
        for k in 1..=full {
            x = self.step(&x);
            let t = k as f64 * self.dt;
            self.check(&x, t)?;
            if k % every == 0 || (k == full && rem == 0.0) {
                traj.times.push(t);
                traj.states.push(x.clone());
            }
        }
        if rem > 0.0 {
            let sys = system(self.op, rem)?;
            x = self.step_with(&x, rem, &sys);
            self.check(&x, t_end)?;
            traj.times.push(t_end);
            traj.states.push(x);
        }
        Ok(traj)
    }
}

/// Number of full steps of size `dt` in `t` and the leftover, snapping
/// leftovers below `1e-9 dt` to zero.
pub fn split_steps(t: f64, dt: f64) -> (usize, f64) {
    let ratio = t / dt;
    let mut full = libm::floor(ratio + 1e-9) as usize;
    let mut rem = t - full as f64 * dt;
    if rem < 1e-9 * dt {
        rem = 0.0;
    }
    if rem < 0.0 {
        full = full.saturating_sub(1);
        rem = t - full as f64 * dt;
    }
    (full, rem)
}

pub fn step(s: &StateVector, dt: f64, op: &DiscreteOperator, f: &NonlinearitySpec) -> Result<StateVector> {
    let integ = Integrator::new(op, *f, dt)?;
    let out = integ.step(s);
    integ.check(&out, dt)?;
    Ok(out)
}

pub fn evolve(s: &StateVector, t: f64, dt: f64, op: &DiscreteOperator, f: &NonlinearitySpec) -> Result<StateVector> {
    Integrator::new(op, *f, dt)?.evolve(s, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Columns `t, u_0 … u_{n-1}, v_0 … v_{n-1}`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.dim());
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",u{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.16e}"));
            for x in s.u.iter().chain(&s.v) {
                out.push_str(&format!(",{x:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_operators, Level, Mesh, NormPack};
    use crate::perturbation::{CoefficientField, ReferenceDomain};
    use alloc::vec;
    use core::f64::consts::PI;

    fn op_on(a: f64, b: f64, n: usize) -> (Mesh, DiscreteOperator) {
        let mesh = Mesh::new(ReferenceDomain::interval(a, b).unwrap(), n).unwrap();
        let field = CoefficientField::identity(1, mesh.quadrature_points());
        let op = assemble_operators(&mesh, &field).unwrap();
        (mesh, op)
    }

    #[test]
    fn zero_state_is_fixed() {
        let (_, op) = op_on(0.0, PI, 24);
        let z = StateVector::zeros(op.dim());
        let out = step(&z, 1e-2, &op, &NonlinearitySpec::default()).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let (mesh, op) = op_on(0.0, PI, 24);
        let s = StateVector { u: mesh.interpolate_fn(|p| p[0].sin()), v: vec![0.3; op.dim()] };
        let integ = Integrator::new(&op, NonlinearitySpec::default(), 1e-2).unwrap();
        assert_eq!(integ.evolve(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn dt_above_cap_rejected() {
        let (_, op) = op_on(0.0, 1.0, 64);
        assert!(matches!(Integrator::new(&op, NonlinearitySpec::zero(), 0.1), Err(Error::InvalidArgument(_))));
        assert!(Integrator::new(&op, NonlinearitySpec::zero(), 0.0).is_err());
    }

    #[test]
    fn linear_energy_is_nonincreasing() {
        let (mesh, op) = op_on(0.0, PI, 24);
        let pack = NormPack::new(&op);
        let integ = Integrator::new(&op, NonlinearitySpec::zero(), 1e-2).unwrap();
        let mut s = StateVector {
            u: mesh.interpolate_fn(|p| p[0].sin() + 0.3 * (3.0 * p[0]).sin()),
            v: mesh.interpolate_fn(|p| (2.0 * p[0]).sin()),
        };
        let mut e = pack.x_norm(&s, Level::X0).powi(2);
        for _ in 0..500 {
            s = integ.step(&s);
            let e1 = pack.x_norm(&s, Level::X0).powi(2);
            assert!(e1 <= e + 1e-10, "{e1} > {e}");
            e = e1;
        }
    }

    #[test]
    fn partial_step_lands_on_target() {
        assert_eq!(split_steps(1.0, 0.1), (10, 0.0));
        let (full, rem) = split_steps(0.125, 0.05);
        assert_eq!(full, 2);
        assert!((rem - 0.025).abs() < 1e-15);
    }

    #[test]
    fn trajectory_records_every_and_final() {
        let (mesh, op) = op_on(0.0, PI, 24);
        let s = StateVector { u: mesh.interpolate_fn(|p| p[0].sin()), v: vec![0.0; op.dim()] };
        let integ = Integrator::new(&op, NonlinearitySpec::zero(), 1e-2).unwrap();
        let traj = integ.trajectory(&s, 0.105, 5).unwrap();
        assert_eq!(traj.times.len(), 4);
        assert!((traj.times[3] - 0.105).abs() < 1e-15);
        let direct = integ.evolve(&s, 0.105).unwrap();
        assert_eq!(traj.states[3], direct);
        assert!(traj.to_csv().lines().count() == 5);
    }
}
