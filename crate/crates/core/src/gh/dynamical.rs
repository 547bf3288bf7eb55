//! Upper bounds on the dynamical distance between sampled flows.
//!
//! A flow sample holds base points `x` and their images `φ(x, k/m)`; all of
//! them form the enriched space on which the ε-isometry conditions are
//! checked. Candidate maps send base points to base points. The commuting
//! condition is evaluated at grid times for base points, with the flow of `x`
//! between snapshots interpolated linearly in state space and carried through
//! the map by interpolating the images of the bracketing snapshots. Because
//! the sampled metric comes from a Hilbert norm, the distance from an
//! interpolated point follows from the identity
//! `|(1-θ)a + θb - q|² = (1-θ)|a-q|² + θ|b-q|² - θ(1-θ)|a-b|²`.

use alloc::format;
use alloc::vec::Vec;

use super::search::{direction_problems, DirectionProblem, SearchOptions};
use super::{
    coverage_unchecked, distortion_unchecked, gh_lower, gh_upper_with, FiniteMetricSpace, GHEstimate, MapCandidate,
};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_RHO: f64 = 0.9;
/// Offsets `s` tried per point, in `[-1, 1]`.
const S_STEPS: usize = 10;
const VERIFY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    base_n: usize,
    m: usize,
    space: FiniteMetricSpace,
}

impl FlowSample {
    /// `space` holds point `(x, k)` at index `x (m + 1) + k`.
    pub fn new(base_n: usize, m: usize, space: FiniteMetricSpace) -> Result<Self> {
        if m == 0 {
            return Err(invalid("flow grid needs m >= 1"));
        }
        if space.len() != base_n * (m + 1) {
            return Err(invalid(format!("enriched space has {} points, expected {}", space.len(), base_n * (m + 1))));
        }
        Ok(Self { base_n, m, space })
    }

    /// Stationary flow `φ(x, t) = x` on `space`.
    pub fn stationary(space: &FiniteMetricSpace, m: usize) -> Result<Self> {
        let n = space.len();
        let w = m + 1;
        let mut d = alloc::vec![0.0; n * w * n * w];
        for a in 0..n * w {
            for b in 0..n * w {
                d[a * n * w + b] = space.d(a / w, b / w);
            }
        }
        Self::new(n, m, FiniteMetricSpace::new(n * w, d)?)
    }

    pub fn base_len(&self) -> usize {
        self.base_n
    }

    pub fn grid(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    #[inline]
    pub fn index(&self, x: usize, k: usize) -> usize {
        x * (self.m + 1) + k
    }

    pub fn base_indices(&self) -> Vec<usize> {
        (0..self.base_n).map(|x| self.index(x, 0)).collect()
    }

    pub fn base_space(&self) -> Result<FiniteMetricSpace> {
        self.space.subspace(&self.base_indices())
    }

    /// `I(φ(x, k/m)) = ψ(i(x), k/m)`.
    pub fn equivariant_extension(&self, other: &FlowSample, base: &MapCandidate) -> Result<MapCandidate> {
        if base.source != self.base_n || base.target != other.base_n || self.m != other.m {
            return Err(invalid("base map does not match the flow samples"));
        }
        let map = (0..self.base_n)
            .flat_map(|x| (0..=self.m).map(move |k| (x, k)))
            .map(|(x, k)| other.index(base.map[x], k))
            .collect();
        MapCandidate::new(other.space.len(), map)
    }
}

/// Per-point time changes `α(x, t) = t + s_x ρ min(t, 1 − t)` on `[0, 1]` and
/// `α(x, t) = t` elsewhere. With `|s_x| ≤ 1` and `ρ < 1` each `α(x, ·)` is
/// strictly increasing, fixes 0, and deviates from `t` by at most `|s_x| ρ / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparametrization {
    pub rho: f64,
    pub s: Vec<f64>,
}

impl Reparametrization {
    pub fn identity(n: usize) -> Self {
        Self { rho: DEFAULT_RHO, s: alloc::vec![0.0; n] }
    }

    pub fn alpha(&self, x: usize, t: f64) -> f64 {
        if (0.0..=1.0).contains(&t) {
            t + self.s[x] * self.rho * t.min(1.0 - t)
        } else {
            t
        }
    }

    /// `sup_t |α(x, t) − t|` over all points.
    pub fn deviation(&self) -> f64 {
        self.s.iter().map(|s| 0.5 * libm::fabs(*s) * self.rho).fold(0.0, f64::max)
    }

    /// Strict monotonicity, `α(x, 0) = 0` and `|α − t| < ε` on the `m` grid.
    pub fn is_valid(&self, eps: f64, m: usize) -> bool {
        let slope_ok = self.s.iter().all(|s| libm::fabs(s * self.rho) < 1.0);
        let zero_ok = (0..self.s.len()).all(|x| self.alpha(x, 0.0) == 0.0);
        let grid_ok = (0..self.s.len()).all(|x| {
            (0..=m).all(|k| {
                let t = k as f64 / m as f64;
                libm::fabs(self.alpha(x, t) - t) < eps
            })
        });
        slope_ok && zero_ok && grid_ok && self.deviation() < eps
    }
}

/// Terms of the dynamical objective for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicalCheck {
    pub distortion: f64,
    pub coverage: f64,
    pub base_coverage: f64,
    pub commuting: f64,
    pub rep_deviation: f64,
}

impl DynamicalCheck {
    pub fn value(&self) -> f64 {
        self.distortion.max(self.coverage).max(self.base_coverage).max(self.commuting).max(self.rep_deviation)
    }
}

fn s_grid() -> Vec<f64> {
    // 0 first, then increasing |s|, so ties keep the smallest offset
    let mut out = alloc::vec![0.0];
    for k in 1..=S_STEPS {
        let s = k as f64 / S_STEPS as f64;
        out.push(s);
        out.push(-s);
    }
    out
}

/// Max over grid times of the commuting error of base point `x` under offset `s`.
fn commuting_error(fx: &FlowSample, fy: &FlowSample, map: &[usize], x: usize, s: f64, rho: f64) -> f64 {
    let m = fx.m;
    let ys = fy.space();
    let yb = map[fx.index(x, 0)];
    let mut worst: f64 = 0.0;
    for k in 0..=m {
        let t = k as f64 / m as f64;
        let alpha = t + s * rho * t.min(1.0 - t);
        let tau = (alpha * m as f64).clamp(0.0, m as f64);
        let k1 = (libm::floor(tau) as usize).min(m - 1);
        let theta = tau - k1 as f64;
        let a = map[fx.index(x, k1)];
        let b = map[fx.index(x, k1 + 1)];
        let q = yb + k;
        let (daq, dbq, dab) = (ys.d(a, q), ys.d(b, q), ys.d(a, b));
        let d2 = (1.0 - theta) * daq * daq + theta * dbq * dbq - theta * (1.0 - theta) * dab * dab;
        worst = worst.max(libm::sqrt(d2.max(0.0)));
    }
    worst
}

fn static_terms(fx: &FlowSample, fy: &FlowSample, map: &[usize]) -> (f64, f64, f64) {
    let dist = distortion_unchecked(map, fx.space(), fy.space());
    let cov = coverage_unchecked(map, fy.space());
    let base_imgs: Vec<usize> = (0..fx.base_n).map(|x| map[fx.index(x, 0)]).collect();
    let base_cov = fy
        .base_indices()
        .iter()
        .map(|&q| base_imgs.iter().map(|&z| fy.space().d(z, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    (dist, cov, base_cov)
}

fn base_to_base(fx: &FlowSample, fy: &FlowSample, map: &[usize]) -> bool {
    (0..fx.base_n).all(|x| map[fx.index(x, 0)].is_multiple_of(fy.m + 1))
}

/// Evaluates a candidate, choosing the best offset per base point.
fn evaluate(fx: &FlowSample, fy: &FlowSample, map: &[usize], rho: f64) -> Option<(DynamicalCheck, Reparametrization)> {
    if !base_to_base(fx, fy, map) {
        return None;
    }
    let (distortion, coverage, base_coverage) = static_terms(fx, fy, map);
    let grid = s_grid();
    let mut rep = Reparametrization { rho, s: alloc::vec![0.0; fx.base_n] };
    let (mut commuting, mut rep_deviation) = (0.0f64, 0.0f64);
    for x in 0..fx.base_n {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &s in &grid {
            let c = commuting_error(fx, fy, map, x, s, rho);
            let dev = 0.5 * libm::fabs(s) * rho;
            if c.max(dev) < best.0 {
                best = (c.max(dev), c, s);
            }
        }
        rep.s[x] = best.2;
        commuting = commuting.max(best.1);
        rep_deviation = rep_deviation.max(0.5 * libm::fabs(best.2) * rho);
    }
    Some((DynamicalCheck { distortion, coverage, base_coverage, commuting, rep_deviation }, rep))
}

/// Evaluates a candidate with fixed offsets.
fn evaluate_fixed(fx: &FlowSample, fy: &FlowSample, map: &[usize], rep: &Reparametrization) -> Option<DynamicalCheck> {
    if !base_to_base(fx, fy, map) || rep.s.len() != fx.base_n {
        return None;
    }
    let (distortion, coverage, base_coverage) = static_terms(fx, fy, map);
    let commuting = (0..fx.base_n).map(|x| commuting_error(fx, fy, map, x, rep.s[x], rep.rho)).fold(0.0, f64::max);
    Some(DynamicalCheck { distortion, coverage, base_coverage, commuting, rep_deviation: rep.deviation() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalOptions {
    /// Base-level search options (initial candidates, sweeps).
    pub base: SearchOptions,
    /// Restarts of the constrained search on the enriched spaces; 0 disables it.
    pub enriched_budget: usize,
    pub rho: f64,
}

impl Default for DynamicalOptions {
    fn default() -> Self {
        Self { base: SearchOptions::default(), enriched_budget: 4, rho: DEFAULT_RHO }
    }
}

fn best_direction(
    fx: &FlowSample,
    fy: &FlowSample,
    base_cands: &[MapCandidate],
    enriched: Option<&DirectionProblem<'_>>,
    enriched_budget: usize,
    rho: f64,
) -> Result<(f64, MapCandidate, Reparametrization, DynamicalCheck, u64)> {
    let mut cands: Vec<MapCandidate> =
        base_cands.iter().map(|c| fx.equivariant_extension(fy, c)).collect::<Result<Vec<_>>>()?;
    let mut iterations = 0;
    if let (Some(prob), true) = (enriched, enriched_budget > 0) {
        let res = prob.run(enriched_budget);
        iterations = res.iterations;
        cands.push(MapCandidate::new(fy.space().len(), res.map)?);
    }
    let mut best: Option<(f64, MapCandidate, Reparametrization, DynamicalCheck)> = None;
    for c in cands {
        if let Some((chk, rep)) = evaluate(fx, fy, &c.map, rho) {
            let v = chk.value();
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, c, rep, chk));
            }
        }
    }
    let (v, c, rep, chk) = best.ok_or_else(|| invalid("no admissible candidate map"))?;
    Ok((v, c, rep, chk, iterations))
}

/// Upper bound on the dynamical distance with default options.
pub fn dgh_dynamical(fx: &FlowSample, fy: &FlowSample, budget: usize, seed: u64) -> Result<GHEstimate> {
    dgh_dynamical_with(fx, fy, budget, seed, &DynamicalOptions::default())
}

/// Candidates per direction are the equivariant extensions of the base search
/// witnesses and of any supplied base candidates, plus the result of a search
/// on the enriched spaces restricted to base-to-base maps. The smallest
/// certified value wins; the witnesses are re-verified before returning.
pub fn dgh_dynamical_with(
    fx: &FlowSample,
    fy: &FlowSample,
    budget: usize,
    seed: u64,
    opts: &DynamicalOptions,
) -> Result<GHEstimate> {
    if fx.m != fy.m {
        return Err(invalid(format!("flow grids differ: {} vs {}", fx.m, fy.m)));
    }
    if !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(invalid("rho must lie in (0, 1)"));
    }
    let (bx, by) = (fx.base_space()?, fy.base_space()?);
    let base = gh_upper_with(&bx, &by, budget, seed, &opts.base)?;

    let mut cand_i = alloc::vec![base.witness_i.clone()];
    cand_i.extend(opts.base.init_i.iter().cloned());
    let mut cand_j = alloc::vec![base.witness_j.clone()];
    cand_j.extend(opts.base.init_j.iter().cloned());

    let allowed = |src: &FlowSample, dst: &FlowSample| -> Vec<Vec<usize>> {
        let all: Vec<usize> = (0..dst.space.len()).collect();
        (0..src.space.len()).map(|a| if a % (src.m + 1) == 0 { dst.base_indices() } else { all.clone() }).collect()
    };
    let init_i: Vec<MapCandidate> = cand_i.iter().map(|c| fx.equivariant_extension(fy, c)).collect::<Result<_>>()?;
    let init_j: Vec<MapCandidate> = cand_j.iter().map(|c| fy.equivariant_extension(fx, c)).collect::<Result<_>>()?;
    let enr_opts = SearchOptions {
        sweeps: opts.base.sweeps,
        init_i,
        init_j,
        allowed_i: Some(allowed(fx, fy)),
        allowed_j: Some(allowed(fy, fx)),
    };
    let (mut pi, mut pj) = direction_problems(fx.space(), fy.space(), seed, &enr_opts)?;
    pi.stream = 2;
    pj.stream = 3;

    let (vi, wi, ri, _, it_i) = best_direction(fx, fy, &cand_i, Some(&pi), opts.enriched_budget, opts.rho)?;
    let (vj, wj, rj, _, it_j) = best_direction(fy, fx, &cand_j, Some(&pj), opts.enriched_budget, opts.rho)?;
    let eps = vi.max(vj);
    let est = GHEstimate {
        lower: gh_lower(fx.space(), fy.space()),
        upper: eps,
        witness_i: wi,
        witness_j: wj,
        restarts: budget,
        iterations: base.iterations + it_i + it_j,
        seed,
        budget,
        eps_dynamical: Some(eps),
        rep_i: Some(ri),
        rep_j: Some(rj),
    };
    if !verify_dynamical(fx, fy, &est)?.0 {
        return Err(Error::Degenerate("dynamical witnesses failed re-verification".into()));
    }
    Ok(est)
}

/// Re-checks witnesses and reparametrizations of a dynamical estimate at
/// `ε + 1e-12`: both ε-isometry conditions on the enriched spaces, base
/// coverage, both commuting conditions and the time-change invariants.
pub fn verify_dynamical(
    fx: &FlowSample,
    fy: &FlowSample,
    est: &GHEstimate,
) -> Result<(bool, DynamicalCheck, DynamicalCheck)> {
    let eps = est.eps_dynamical.ok_or_else(|| invalid("estimate carries no dynamical value"))?;
    let (ri, rj) = match (&est.rep_i, &est.rep_j) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(invalid("estimate carries no reparametrizations")),
    };
    let lim = eps + VERIFY_SLACK;
    let ci = evaluate_fixed(fx, fy, &est.witness_i.map, ri).ok_or_else(|| invalid("witness i is not base-to-base"))?;
    let cj = evaluate_fixed(fy, fx, &est.witness_j.map, rj).ok_or_else(|| invalid("witness j is not base-to-base"))?;
    let ok = ci.value() < lim && cj.value() < lim && ri.is_valid(lim, fx.m) && rj.is_valid(lim, fy.m);
    Ok((ok, ci, cj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gh::gh_upper;
    use alloc::vec;
    use alloc::vec::Vec;

    /// Flow sample of points moving on the real line.
    fn line_flow(paths: &[Vec<f64>]) -> FlowSample {
        let m = paths[0].len() - 1;
        let pts: Vec<f64> = paths.iter().flatten().cloned().collect();
        let n = pts.len();
        let d = (0..n * n).map(|k| libm::fabs(pts[k / n] - pts[k % n])).collect();
        FlowSample::new(paths.len(), m, FiniteMetricSpace::new(n, d).unwrap()).unwrap()
    }

    #[test]
    fn identical_flows_give_zero() {
        let f = line_flow(&[vec![0.0, 0.1, 0.2, 0.3], vec![1.0, 0.9, 0.85, 0.8], vec![2.0, 2.0, 2.1, 2.3]]);
        let est = dgh_dynamical(&f, &f, 4, 1).unwrap();
        assert!(est.eps_dynamical.unwrap() < 1e-6);
    }

    #[test]
    fn stationary_flows_reduce_to_static() {
        let x = FiniteMetricSpace::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]]).unwrap();
        let y = FiniteMetricSpace::from_rows(&[vec![0.0, 1.2], vec![1.2, 0.0]]).unwrap();
        let stat = gh_upper(&x, &y, 10, 3).unwrap().upper;
        let est =
            dgh_dynamical(&FlowSample::stationary(&x, 4).unwrap(), &FlowSample::stationary(&y, 4).unwrap(), 10, 3)
                .unwrap();
        assert!((est.eps_dynamical.unwrap() - stat).abs() < 1e-12, "{} vs {stat}", est.eps_dynamical.unwrap());
    }

    #[test]
    fn speed_change_bounded_by_sigma() {
        let m = 10;
        let sigma = 0.05;
        let fx = line_flow(&[(0..=m).map(|k| k as f64 / m as f64).collect()]);
        let fy = line_flow(&[(0..=m).map(|k| (1.0 + sigma) * k as f64 / m as f64).collect()]);
        let est = dgh_dynamical(&fx, &fy, 4, 2).unwrap();
        assert!(est.eps_dynamical.unwrap() <= sigma + 1e-12, "{est:?}");
        assert!(verify_dynamical(&fx, &fy, &est).unwrap().0);
    }

    #[test]
    fn time_offset_used_when_flows_are_out_of_phase() {
        // Y runs the same path but its snapshots lag; a time change helps the
        // commuting term while the isometry terms stay zero.
        let m = 10;
        let path: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
        let fx = line_flow(core::slice::from_ref(&path));
        let fy = line_flow(&[path]);
        let rep = Reparametrization { rho: DEFAULT_RHO, s: vec![0.5] };
        assert!(rep.is_valid(0.3, m));
        assert!(!rep.is_valid(0.2, m));
        let chk = evaluate_fixed(&fx, &fy, &(0..=m).collect::<Vec<_>>(), &rep).unwrap();
        assert!(chk.commuting > 0.0 && chk.distortion == 0.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = line_flow(&[vec![0.0, 1.0]]);
        let b = line_flow(&[vec![0.0, 1.0, 2.0]]);
        assert!(matches!(dgh_dynamical(&a, &b, 1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn reparametrization_fixes_endpoints() {
        let rep = Reparametrization { rho: 0.9, s: vec![1.0, -1.0] };
        for x in 0..2 {
            assert_eq!(rep.alpha(x, 0.0), 0.0);
            assert_eq!(rep.alpha(x, 1.0), 1.0);
            assert_eq!(rep.alpha(x, 2.0), 2.0);
        }
        assert!((rep.deviation() - 0.45).abs() < 1e-15);
    }
}
