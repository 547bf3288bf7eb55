use alloc::vec;
use alloc::vec::Vec;

use super::{coverage_unchecked, gh_lower, FiniteMetricSpace, GHEstimate, MapCandidate};
use crate::error::{Error, Result};

pub const EXACT_CAP: usize = 7;

struct Dfs<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    map: Vec<usize>,
    best: f64,
    best_map: Vec<usize>,
    nodes: u64,
}

impl Dfs<'_> {
    fn go(&mut self, k: usize, partial: f64) {
        self.nodes += 1;
        if k == self.map.len() {
            let v = partial.max(coverage_unchecked(&self.map, self.y));
            if v < self.best {
                self.best = v;
                self.best_map.clone_from(&self.map);
            }
            return;
        }
        for t in 0..self.y.len() {
            let mut pd = partial;
            for j in 0..k {
                pd = pd.max(libm::fabs(self.x.d(k, j) - self.y.d(t, self.map[j])));
                if pd >= self.best {
                    break;
                }
            }
            if pd >= self.best {
                continue;
            }
            self.map[k] = t;
            self.go(k + 1, pd);
        }
    }
}

/// Minimum over all maps `X → Y` of `max(distortion, coverage)`, by depth-first
/// enumeration pruned on partial distortion.
fn best_direction(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> (f64, Vec<usize>, u64) {
    let mut dfs = Dfs { x, y, map: vec![0; x.len()], best: f64::INFINITY, best_map: vec![0; x.len()], nodes: 0 };
    dfs.go(0, 0.0);
    (dfs.best, dfs.best_map, dfs.nodes)
}

/// Exact two-sided value for spaces with at most [`EXACT_CAP`] points.
pub fn gh_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<GHEstimate> {
    let n = x.len().max(y.len());
    if n > EXACT_CAP {
        return Err(Error::ExactCapExceeded { n, cap: EXACT_CAP });
    }
    let (vi, mi, ni) = best_direction(x, y);
    let (vj, mj, nj) = best_direction(y, x);
    let value = vi.max(vj);
    debug_assert!(gh_lower(x, y) <= value);
    Ok(GHEstimate {
        lower: value,
        upper: value,
        witness_i: MapCandidate { source: x.len(), target: y.len(), map: mi },
        witness_j: MapCandidate { source: y.len(), target: x.len(), map: mj },
        restarts: 0,
        iterations: ni + nj,
        seed: 0,
        budget: 0,
        eps_dynamical: None,
        rep_i: None,
        rep_j: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gh::is_eps_isometry;

    #[test]
    fn paper_examples() {
        let two = FiniteMetricSpace::two_point(2.0).unwrap();
        let three = FiniteMetricSpace::two_point(3.0).unwrap();
        assert_eq!(gh_exact(&two, &three).unwrap().upper, 1.0);
        assert_eq!(gh_exact(&FiniteMetricSpace::point(), &three).unwrap().upper, 3.0);
        assert_eq!(gh_exact(&three, &FiniteMetricSpace::point()).unwrap().upper, 3.0);
    }

    #[test]
    fn permuted_copy_is_zero() {
        let x = FiniteMetricSpace::from_rows(&[
            vec![0.0, 1.0, 2.5, 2.0],
            vec![1.0, 0.0, 1.7, 2.2],
            vec![2.5, 1.7, 0.0, 1.1],
            vec![2.0, 2.2, 1.1, 0.0],
        ])
        .unwrap();
        let y = x.permuted(&[2, 0, 3, 1]).unwrap();
        let est = gh_exact(&x, &y).unwrap();
        assert_eq!(est.upper, 0.0);
        assert!(is_eps_isometry(&est.witness_i, &x, &y, 1e-12).unwrap());
        assert_eq!(est.witness_i.map, vec![1, 3, 0, 2]);
    }

    #[test]
    fn cap_enforced() {
        let x = FiniteMetricSpace::new(8, vec![0.0; 64]).unwrap();
        assert!(matches!(gh_exact(&x, &FiniteMetricSpace::point()), Err(Error::ExactCapExceeded { n: 8, cap: 7 })));
    }
}
