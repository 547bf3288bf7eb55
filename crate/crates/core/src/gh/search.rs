//! Restarted simulated annealing over single-point reassignments.
//!
//! Each direction `X → Y` and `Y → X` is searched independently because the
//! two-sided objective separates. Restart `k` draws from `ChaCha8(seed)` on a
//! stream derived from the direction and `k`, so restarts can run in any order
//! or concurrently; the best map is the minimum by `(value, k)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gh_lower, objective, FiniteMetricSpace, GHEstimate, MapCandidate};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchOptions {
    /// Annealing moves per restart, as a multiple of the source size.
    /// Zero selects the default of 60.
    pub sweeps: usize,
    /// Extra starting maps for the `X → Y` direction, tried after the greedy
    /// start.
    pub init_i: Vec<MapCandidate>,
    pub init_j: Vec<MapCandidate>,
    /// Per-source-point admissible targets for `X → Y`.
    pub allowed_i: Option<Vec<Vec<usize>>>,
    pub allowed_j: Option<Vec<Vec<usize>>>,
}

pub const DEFAULT_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionResult {
    pub value: f64,
    pub map: Vec<usize>,
    pub restart: usize,
    pub iterations: u64,
}

impl DirectionResult {
    /// Keeps the smaller value, breaking ties by restart index.
    pub fn better(self, other: DirectionResult) -> DirectionResult {
        let iterations = self.iterations + other.iterations;
        let mut best = if (other.value, other.restart) < (self.value, self.restart) { other } else { self };
        best.iterations = iterations;
        best
    }
}

/// One search direction with its restart schedule.
#[derive(Debug, Clone)]
pub struct DirectionProblem<'a> {
    pub src: &'a FiniteMetricSpace,
    pub dst: &'a FiniteMetricSpace,
    pub seed: u64,
    pub stream: u64,
    pub init: &'a [MapCandidate],
    pub allowed: Option<&'a [Vec<usize>]>,
    pub sweeps: usize,
}

impl<'a> DirectionProblem<'a> {
    pub fn validate(&self) -> Result<()> {
        if let Some(allowed) = self.allowed {
            if allowed.len() != self.src.len() {
                return Err(invalid("allowed-target table does not match the source size"));
            }
            if allowed.iter().any(|a| a.is_empty() || a.iter().any(|&t| t >= self.dst.len())) {
                return Err(invalid("allowed-target sets must be nonempty and in range"));
            }
        }
        for c in self.init {
            if c.source != self.src.len() || c.target != self.dst.len() {
                return Err(invalid("initial candidate does not match the spaces"));
            }
            if !self.admissible(&c.map) {
                return Err(invalid("initial candidate violates the allowed-target table"));
            }
        }
        Ok(())
    }

    fn admissible(&self, map: &[usize]) -> bool {
        self.allowed.is_none_or(|a| map.iter().enumerate().all(|(x, t)| a[x].contains(t)))
    }

    fn targets(&self, x: usize) -> TargetSet<'_> {
        match self.allowed {
            Some(a) => TargetSet::List(&a[x]),
            None => TargetSet::All(self.dst.len()),
        }
    }

    /// Greedy start: points in index order, each sent to the admissible target
    /// of least partial distortion, ties broken by closeness of mean distance
    /// and then by index.
    pub fn greedy(&self) -> Vec<usize> {
        let (x, y) = (self.src, self.dst);
        let mean = |s: &FiniteMetricSpace, i: usize| s.row(i).iter().sum::<f64>() / s.len() as f64;
        let my: Vec<f64> = (0..y.len()).map(|j| mean(y, j)).collect();
        let mut map = vec![0usize; x.len()];
        for a in 0..x.len() {
            let mx = mean(x, a);
            let mut best = (f64::INFINITY, f64::INFINITY, usize::MAX);
            for t in self.targets(a).iter() {
                let mut pd: f64 = 0.0;
                for b in 0..a {
                    pd = pd.max(libm::fabs(x.d(a, b) - y.d(t, map[b])));
                    if pd > best.0 {
                        break;
                    }
                }
                let key = (pd, libm::fabs(mx - my[t]), t);
                if key < best {
                    best = key;
                }
            }
            map[a] = best.2;
        }
        map
    }

    fn start(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if k == 0 {
            return self.greedy();
        }
        if let Some(c) = self.init.get(k - 1) {
            return c.map.clone();
        }
        (0..self.src.len())
            .map(|x| {
                let ts = self.targets(x);
                ts.get(rng.gen_range(0..ts.len()))
            })
            .collect()
    }

    /// Runs restart `k`.
    pub fn restart(&self, k: usize) -> DirectionResult {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream << 32) | k as u64);
        let start = self.start(k, &mut rng);
        let sweeps = if self.sweeps == 0 { DEFAULT_SWEEPS } else { self.sweeps };
        let moves = sweeps * self.src.len();
        let mut st = Anneal::new(self.src, self.dst, start);
        let mut best_val = st.value();
        let mut best_map = st.map.clone();
        let scale = self.src.diameter().max(self.dst.diameter());
        let mut iterations = 0u64;
        if best_val > 0.0 && moves > 0 && !self.src.is_empty() {
            let t0 = 0.05 * scale;
            let cool = libm::pow(1e-3, 1.0 / moves as f64);
            let mut temp = t0;
            let mut cur = best_val;
            for _ in 0..moves {
                iterations += 1;
                let x = rng.gen_range(0..self.src.len());
                let ts = self.targets(x);
                let t = ts.get(rng.gen_range(0..ts.len()));
                let old = st.map[x];
                if t != old {
                    st.assign(x, t);
                    let v = st.value();
                    let accept = v <= cur || rng.gen::<f64>() < libm::exp(-(v - cur) / temp);
                    if accept {
                        cur = v;
                        if v < best_val {
                            best_val = v;
                            best_map.clone_from(&st.map);
                            if v == 0.0 {
                                break;
                            }
                        }
                    } else {
                        st.assign(x, old);
                    }
                }
                temp *= cool;
            }
        }
        // recompute from scratch so values match the exact solver bit for bit
        let value = objective(&best_map, self.src, self.dst);
        DirectionResult { value, map: best_map, restart: k, iterations }
    }

    /// Sequential reduction over restarts `0..budget`.
    pub fn run(&self, budget: usize) -> DirectionResult {
        (0..budget).map(|k| self.restart(k)).reduce(DirectionResult::better).expect("budget >= 1")
    }
}

enum TargetSet<'a> {
    All(usize),
    List(&'a [usize]),
}

impl TargetSet<'_> {
    fn len(&self) -> usize {
        match self {
            Self::All(n) => *n,
            Self::List(l) => l.len(),
        }
    }

    fn get(&self, i: usize) -> usize {
        match self {
            Self::All(_) => i,
            Self::List(l) => l[i],
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// Incrementally maintained distortion row maxima and coverage radii.
struct Anneal<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    map: Vec<usize>,
    row_max: Vec<f64>,
    count: Vec<usize>,
    nearest: Vec<f64>,
}

impl<'a> Anneal<'a> {
    fn new(x: &'a FiniteMetricSpace, y: &'a FiniteMetricSpace, map: Vec<usize>) -> Self {
        let mut count = vec![0usize; y.len()];
        for &t in &map {
            count[t] += 1;
        }
        let mut st = Self { x, y, map, row_max: vec![0.0; x.len()], count, nearest: vec![0.0; y.len()] };
        for a in 0..x.len() {
            st.row_max[a] = st.row(a);
        }
        for q in 0..y.len() {
            st.nearest[q] = st.nearest_of(q);
        }
        st
    }

    fn row(&self, a: usize) -> f64 {
        let ta = self.map[a];
        (0..self.x.len()).map(|b| libm::fabs(self.x.d(a, b) - self.y.d(ta, self.map[b]))).fold(0.0, f64::max)
    }

    fn nearest_of(&self, q: usize) -> f64 {
        (0..self.y.len()).filter(|&z| self.count[z] > 0).map(|z| self.y.d(z, q)).fold(f64::INFINITY, f64::min)
    }

    fn value(&self) -> f64 {
        let d = self.row_max.iter().cloned().fold(0.0, f64::max);
        self.nearest.iter().cloned().fold(d, f64::max)
    }

    fn assign(&mut self, a: usize, t: usize) {
        let old = self.map[a];
        self.map[a] = t;
        for b in 0..self.x.len() {
            if b == a {
                continue;
            }
            let e_old = libm::fabs(self.x.d(a, b) - self.y.d(old, self.map[b]));
            let e_new = libm::fabs(self.x.d(a, b) - self.y.d(t, self.map[b]));
            if e_new >= self.row_max[b] {
                self.row_max[b] = e_new;
            } else if e_old == self.row_max[b] {
                self.row_max[b] = self.row(b);
            }
        }
        self.row_max[a] = self.row(a);
        self.count[old] -= 1;
        self.count[t] += 1;
        for q in 0..self.y.len() {
            let dn = self.y.d(t, q);
            if self.count[old] == 0 && self.nearest[q] == self.y.d(old, q) {
                self.nearest[q] = self.nearest_of(q);
            } else if dn < self.nearest[q] {
                self.nearest[q] = dn;
            }
        }
    }
}

/// Upper bound on the two-sided value by restarted annealing; `budget` is the
/// number of restarts per direction.
pub fn gh_upper(x: &FiniteMetricSpace, y: &FiniteMetricSpace, budget: usize, seed: u64) -> Result<GHEstimate> {
    gh_upper_with(x, y, budget, seed, &SearchOptions::default())
}

pub fn gh_upper_with(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: usize,
    seed: u64,
    opts: &SearchOptions,
) -> Result<GHEstimate> {
    let (pi, pj) = direction_problems(x, y, seed, opts)?;
    if budget == 0 {
        return Err(invalid("budget must be at least one restart"));
    }
    Ok(combine(x, y, pi.run(budget), pj.run(budget), seed, budget))
}

/// The two direction problems of a search, validated.
pub fn direction_problems<'a>(
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    seed: u64,
    opts: &'a SearchOptions,
) -> Result<(DirectionProblem<'a>, DirectionProblem<'a>)> {
    let pi = DirectionProblem {
        src: x,
        dst: y,
        seed,
        stream: 0,
        init: &opts.init_i,
        allowed: opts.allowed_i.as_deref(),
        sweeps: opts.sweeps,
    };
    let pj = DirectionProblem {
        src: y,
        dst: x,
        seed,
        stream: 1,
        init: &opts.init_j,
        allowed: opts.allowed_j.as_deref(),
        sweeps: opts.sweeps,
    };
    pi.validate()?;
    pj.validate()?;
    Ok((pi, pj))
}

pub fn combine(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    ri: DirectionResult,
    rj: DirectionResult,
    seed: u64,
    budget: usize,
) -> GHEstimate {
    GHEstimate {
        lower: gh_lower(x, y),
        upper: ri.value.max(rj.value),
        witness_i: MapCandidate { source: x.len(), target: y.len(), map: ri.map },
        witness_j: MapCandidate { source: y.len(), target: x.len(), map: rj.map },
        restarts: budget,
        iterations: ri.iterations + rj.iterations,
        seed,
        budget,
        eps_dynamical: None,
        rep_i: None,
        rep_j: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gh::{gh_exact, is_eps_isometry};

    fn random_space(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
        // random points in the plane give a valid metric
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = libm::hypot(pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
            }
        }
        FiniteMetricSpace::new(n, d).unwrap()
    }

    #[test]
    fn identical_spaces_reach_zero_at_budget_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 3, 6, 20] {
            let x = random_space(&mut rng, n);
            assert_eq!(gh_upper(&x, &x, 1, 9).unwrap().upper, 0.0);
        }
    }

    #[test]
    fn never_below_exact_and_witnesses_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let x = random_space(&mut rng, 1 + trial % 5);
            let y = random_space(&mut rng, 1 + (trial * 7) % 5);
            let ex = gh_exact(&x, &y).unwrap().upper;
            let up = gh_upper(&x, &y, 20, trial as u64).unwrap();
            assert!(up.upper >= ex);
            assert!(up.lower <= ex);
            assert!(is_eps_isometry(&up.witness_i, &x, &y, up.upper + 1e-12).unwrap());
            assert!(is_eps_isometry(&up.witness_j, &y, &x, up.upper + 1e-12).unwrap());
        }
    }

    #[test]
    fn budget_zero_rejected() {
        let x = FiniteMetricSpace::point();
        assert!(gh_upper(&x, &x, 0, 1).is_err());
    }

    #[test]
    fn allowed_targets_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_space(&mut rng, 6);
        let y = random_space(&mut rng, 6);
        let allowed: Vec<Vec<usize>> = (0..6).map(|i| vec![i % 3, 3 + i % 3]).collect();
        let opts = SearchOptions { allowed_i: Some(allowed.clone()), ..Default::default() };
        let est = gh_upper_with(&x, &y, 10, 2, &opts).unwrap();
        for (i, t) in est.witness_i.map.iter().enumerate() {
            assert!(allowed[i].contains(t));
        }
    }

    #[test]
    fn incremental_state_matches_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_space(&mut rng, 9);
        let y = random_space(&mut rng, 7);
        let mut st = Anneal::new(&x, &y, vec![0; 9]);
        for _ in 0..300 {
            let a = rng.gen_range(0..9);
            let t = rng.gen_range(0..7);
            st.assign(a, t);
            let scratch = objective(&st.map, &x, &y);
            assert_eq!(st.value(), scratch);
        }
    }
}
