use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::integrator::Trajectory;
use crate::discretization::{DiscreteOperator, NonlinearitySpec};
use crate::error::{invalid, Result};
use crate::linalg::dot;

/// `E2(t) = ‖u_tt‖₀² + ‖u_t‖₁² + ‖u‖₂²` per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub times: Vec<f64>,
    pub e2: Vec<f64>,
}

impl EnergyProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,e2\n");
        for (t, e) in self.times.iter().zip(&self.e2) {
            out.push_str(&format!("{t:.16e},{e:.16e}\n"));
        }
        out
    }
}

/// `E2` of one state, with `u_tt = -v - M⁻¹Ku - f(u)` taken from the
/// semi-discrete equation.
pub fn e2_of(op: &DiscreteOperator, f: &NonlinearitySpec, u: &[f64], v: &[f64]) -> f64 {
    let ku = op.k.matvec(u);
    let au = op.m_solve(&ku);
    let utt: Vec<f64> = (0..u.len()).map(|i| -v[i] - au[i] - f.f(u[i])).collect();
    let e = op.m.quad_form(&utt) + op.k.quad_form(v) + dot(&ku, &au);
    e.max(0.0)
}

pub fn energy_profile(traj: &Trajectory, op: &DiscreteOperator, f: &NonlinearitySpec) -> Result<EnergyProfile> {
    if traj.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let e2 = traj.states.iter().map(|s| e2_of(op, f, &s.u, &s.v)).collect();
    Ok(EnergyProfile { times: traj.times.clone(), e2 })
}

/// Envelope `a + b e^{-ct}` fitted to an energy profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `max_t E2(t)/envelope(t) - 1`, clipped below at 0.
    pub overshoot: f64,
    /// Number of upper-hull points entering the least-squares fit.
    pub points: usize,
}

impl EnvelopeFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a + self.b * libm::exp(-self.c * t)
    }

    pub fn covers(&self, slack: f64) -> bool {
        self.c > 0.0 && self.overshoot <= slack
    }
}

/// Indices `k` with `E2[k]` strictly above every later value, plus the last.
/// When the profile oscillates, only the local maxima among them are kept.
fn upper_hull(e2: &[f64]) -> Vec<usize> {
    let n = e2.len();
    let mut all = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for k in (0..n).rev() {
        if e2[k] > best || k == n - 1 {
            all.push(k);
        }
        best = best.max(e2[k]);
    }
    all.reverse();
    let peaks: Vec<usize> =
        all.iter().copied().filter(|&k| k == 0 || k == n - 1 || (e2[k] >= e2[k - 1] && e2[k] >= e2[k + 1])).collect();
    if peaks.len() >= MIN_PEAKS {
        peaks
    } else {
        all
    }
}

const MIN_PEAKS: usize = 8;

/// Relative-weighted nonnegative least squares for `(a, b)` at fixed `c`.
fn solve_ab(ts: &[f64], ys: &[f64], c: f64) -> (f64, f64, f64) {
    let ymax = ys.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * ymax.max(f64::MIN_POSITIVE);
    let rows: Vec<(f64, f64, f64)> = ts
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let w = 1.0 / y.max(floor);
            (w, w * libm::exp(-c * t), w * y)
        })
        .collect();
    let sse = |a: f64, b: f64| rows.iter().map(|(p, q, r)| (a * p + b * q - r) * (a * p + b * q - r)).sum::<f64>();
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, q, r) in &rows {
        s11 += p * p;
        s12 += p * q;
        s22 += q * q;
        r1 += p * r;
        r2 += q * r;
    }
    let det = s11 * s22 - s12 * s12;
    let mut cands: Vec<(f64, f64)> = Vec::new();
    if det > 1e-14 * s11 * s22 {
        let a = (r1 * s22 - r2 * s12) / det;
        let b = (s11 * r2 - s12 * r1) / det;
        if a >= 0.0 && b >= 0.0 {
            cands.push((a, b));
        }
    }
    if s11 > 0.0 {
        cands.push(((r1 / s11).max(0.0), 0.0));
    }
    if s22 > 0.0 {
        cands.push((0.0, (r2 / s22).max(0.0)));
    }
    let (a, b) = cands.into_iter().min_by(|x, y| sse(x.0, x.1).total_cmp(&sse(y.0, y.1))).unwrap_or((0.0, 0.0));
    (a, b, sse(a, b))
}

/// Minimizes `cost(log10 c)` over `c ∈ [1e-4, 1e3]`: a 71-point log grid
/// followed by golden-section refinement around the best grid point.
fn search_rate(cost: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = (-4.0f64, 3.0f64);
    let n_grid = 71;
    let log_c = |i: usize| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64;
    let best_i = (0..n_grid).min_by(|&i, &j| cost(log_c(i)).total_cmp(&cost(log_c(j)))).unwrap_or(0);
    let (mut x0, mut x1) = (log_c(best_i.saturating_sub(1)), log_c((best_i + 1).min(n_grid - 1)));
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut xa = x1 - g * (x1 - x0);
    let mut xb = x0 + g * (x1 - x0);
    let (mut fa, mut fb) = (cost(xa), cost(xb));
    for _ in 0..60 {
        if fa <= fb {
            x1 = xb;
            xb = xa;
            fb = fa;
            xa = x1 - g * (x1 - x0);
            fa = cost(xa);
        } else {
            x0 = xa;
            xa = xb;
            fa = fb;
            xb = x0 + g * (x1 - x0);
            fb = cost(xb);
        }
    }
    let lc = if fa <= fb { xa } else { xb };
    let lc = if cost(log_c(best_i)) < cost(lc) { log_c(best_i) } else { lc };
    libm::pow(10.0, lc)
}

/// Least-squares fit of `a + b e^{-ct}` (`a, b ≥ 0`, `c > 0`) minimizing
/// relative residuals.
fn fit_points(ts: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let c = search_rate(|lc| solve_ab(ts, ys, libm::pow(10.0, lc)).2);
    let (a, b, _) = solve_ab(ts, ys, c);
    (a, b, c)
}

/// Tightest majorant of `e2` of the form `a + e^{-ct} M(t)` with `M`
/// nonincreasing, or `None` if it overflows.
fn decaying_majorant(times: &[f64], e2: &[f64], a: f64, c: f64) -> Option<Vec<f64>> {
    let n = e2.len();
    let mut out = vec![0.0; n];
    let mut g = f64::NEG_INFINITY;
    for k in (0..n).rev() {
        if k + 1 < n {
            g *= libm::exp(c * (times[k + 1] - times[k]));
        }
        g = g.max(e2[k] - a);
        out[k] = a + g;
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Envelope fit in two least-squares passes. The first, over the local peaks
/// of the suffix-max hull, fixes the decay rate `c`; the second refits
/// `(a, b)` at that rate against the decaying majorant of the whole profile.
pub fn fit_envelope(profile: &EnergyProfile) -> Result<EnvelopeFit> {
    if profile.e2.is_empty() || profile.e2.len() != profile.times.len() {
        return Err(invalid("energy profile is empty or ragged"));
    }
    let hull = upper_hull(&profile.e2);
    let ts: Vec<f64> = hull.iter().map(|&k| profile.times[k]).collect();
    let ys: Vec<f64> = hull.iter().map(|&k| profile.e2[k]).collect();
    if ys.iter().all(|&y| y == 0.0) {
        return Ok(EnvelopeFit { a: 0.0, b: 0.0, c: 1.0, overshoot: 0.0, points: hull.len() });
    }
    let (a0, b0, c) = fit_points(&ts, &ys);
    let (a, b) = match decaying_majorant(&profile.times, &profile.e2, a0, c) {
        Some(maj) => {
            let (a, b, _) = solve_ab(&profile.times, &maj, c);
            (a, b)
        }
        None => (a0, b0),
    };
    let mut fit = EnvelopeFit { a, b, c, overshoot: 0.0, points: hull.len() };
    fit.overshoot = overshoot(&fit, profile);
    Ok(fit)
}

fn overshoot(fit: &EnvelopeFit, profile: &EnergyProfile) -> f64 {
    let mut worst: f64 = 0.0;
    for (&t, &e) in profile.times.iter().zip(&profile.e2) {
        let env = fit.eval(t);
        if e > 0.0 {
            worst = worst.max(if env > 0.0 { e / env - 1.0 } else { f64::INFINITY });
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn synthetic(a: f64, b: f64, c: f64) -> EnergyProfile {
        let times: Vec<f64> = (0..400).map(|k| k as f64 * 0.05).collect();
        let e2 = times.iter().map(|t| a + b * libm::exp(-c * t)).collect();
        EnergyProfile { times, e2 }
    }

    #[test]
    fn recovers_exact_envelope() {
        let fit = fit_envelope(&synthetic(0.5, 2.0, 0.7)).unwrap();
        assert!((fit.a - 0.5).abs() < 1e-6 && (fit.b - 2.0).abs() < 1e-6 && (fit.c - 0.7).abs() < 1e-5, "{fit:?}");
        assert!(fit.overshoot < 1e-6);
    }

    #[test]
    fn pure_decay_has_zero_floor() {
        let fit = fit_envelope(&synthetic(0.0, 3.0, 1.0)).unwrap();
        assert!(fit.a < 1e-8 && (fit.c - 1.0).abs() < 1e-5, "{fit:?}");
    }

    #[test]
    fn zero_profile() {
        let p = EnergyProfile { times: vec![0.0, 1.0], e2: vec![0.0, 0.0] };
        let fit = fit_envelope(&p).unwrap();
        assert_eq!((fit.a, fit.b, fit.overshoot), (0.0, 0.0, 0.0));
        assert!(fit.covers(0.05));
    }

    #[test]
    fn hull_is_suffix_maxima() {
        assert_eq!(upper_hull(&[5.0, 3.0, 4.0, 1.0, 2.0, 0.5]), vec![0, 2, 4, 5]);
    }
}
