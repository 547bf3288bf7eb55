//! Gromov-Hausdorff machinery on finite metric spaces.
//!
//! Distances follow the two-sided ε-isometry convention without the factor ½:
//! `d_GH(X, Y)` is the least ε admitting ε-isometries both ways, so it can be
//! up to twice the correspondence-based textbook value. For one-point versus
//! two-point spaces at distance 3 it is 3, not 1.5.

mod dynamical;
mod exact;
mod search;
mod space;

pub use dynamical::{
    dgh_dynamical, dgh_dynamical_with, verify_dynamical, DynamicalCheck, DynamicalOptions, FlowSample,
    Reparametrization, DEFAULT_RHO,
};
pub use exact::{gh_exact, EXACT_CAP};
pub use search::{
    combine, direction_problems, gh_upper, gh_upper_with, DirectionProblem, DirectionResult, SearchOptions,
    DEFAULT_SWEEPS,
};
pub use space::FiniteMetricSpace;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// A total map between point indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MapCandidate {
    pub source: usize,
    pub target: usize,
    pub map: Vec<usize>,
}

impl MapCandidate {
    pub fn new(target: usize, map: Vec<usize>) -> Result<Self> {
        if let Some(bad) = map.iter().find(|&&y| y >= target) {
            return Err(invalid(format!("map sends a point to {bad}, target has {target} points")));
        }
        Ok(Self { source: map.len(), target, map })
    }

    pub fn identity(n: usize) -> Self {
        Self { source: n, target: n, map: (0..n).collect() }
    }

    fn check(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<()> {
        if self.source != x.len() || self.target != y.len() || self.map.len() != self.source {
            return Err(invalid(format!(
                "map {}->{} does not match spaces of size {} and {}",
                self.source,
                self.target,
                x.len(),
                y.len()
            )));
        }
        if self.map.iter().any(|&v| v >= self.target) {
            return Err(invalid("map index out of range"));
        }
        Ok(())
    }
}

/// `max |d_X(x, x') − d_Y(m x, m x')|`.
pub fn distortion(m: &MapCandidate, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<f64> {
    m.check(x, y)?;
    Ok(distortion_unchecked(&m.map, x, y))
}

pub(crate) fn distortion_unchecked(map: &[usize], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..map.len() {
        for b in (a + 1)..map.len() {
            worst = worst.max(libm::fabs(x.d(a, b) - y.d(map[a], map[b])));
        }
    }
    worst
}

/// `max_y min_x d_Y(m x, y)`.
pub fn coverage_deficit(m: &MapCandidate, y: &FiniteMetricSpace) -> Result<f64> {
    if m.target != y.len() || m.map.iter().any(|&v| v >= y.len()) {
        return Err(invalid("map target does not match the space"));
    }
    if m.map.is_empty() {
        return Err(invalid("empty map"));
    }
    Ok(coverage_unchecked(&m.map, y))
}

pub(crate) fn coverage_unchecked(map: &[usize], y: &FiniteMetricSpace) -> f64 {
    let mut seen = alloc::vec![false; y.len()];
    for &v in map {
        seen[v] = true;
    }
    let image: Vec<usize> = (0..y.len()).filter(|&v| seen[v]).collect();
    (0..y.len()).map(|q| image.iter().map(|&z| y.d(z, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

/// One-direction objective `max(distortion, coverage)`.
pub(crate) fn objective(map: &[usize], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    distortion_unchecked(map, x, y).max(coverage_unchecked(map, y))
}

/// Strict test `distortion < ε` and `coverage_deficit < ε`.
pub fn is_eps_isometry(m: &MapCandidate, x: &FiniteMetricSpace, y: &FiniteMetricSpace, eps: f64) -> Result<bool> {
    Ok(distortion(m, x, y)? < eps && coverage_deficit(m, y)? < eps)
}

/// `|diam X − diam Y|`.
pub fn gh_lower(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    libm::fabs(x.diameter() - y.diameter())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GHEstimate {
    pub lower: f64,
    pub upper: f64,
    pub witness_i: MapCandidate,
    pub witness_j: MapCandidate,
    pub restarts: usize,
    pub iterations: u64,
    pub seed: u64,
    pub budget: usize,
    /// Certified dynamical ε, set by [`dgh_dynamical`].
    pub eps_dynamical: Option<f64>,
    pub rep_i: Option<Reparametrization>,
    pub rep_j: Option<Reparametrization>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn distortion_examples() {
        let x = FiniteMetricSpace::two_point(2.0).unwrap();
        let y = FiniteMetricSpace::two_point(3.0).unwrap();
        assert_eq!(distortion(&MapCandidate::identity(2), &x, &x).unwrap(), 0.0);
        assert_eq!(distortion(&MapCandidate::identity(2), &x, &y).unwrap(), 1.0);
        let constant = MapCandidate::new(2, vec![0, 0]).unwrap();
        assert_eq!(distortion(&constant, &x, &y).unwrap(), 2.0);
        assert!(distortion(&MapCandidate::identity(3), &x, &y).is_err());
    }

    #[test]
    fn coverage_examples() {
        let y = FiniteMetricSpace::two_point(3.0).unwrap();
        assert_eq!(coverage_deficit(&MapCandidate::identity(2), &y).unwrap(), 0.0);
        assert_eq!(coverage_deficit(&MapCandidate::new(2, vec![0]).unwrap(), &y).unwrap(), 3.0);
        // four points on a line at 0, 1, 2, 3; image {0, 2} is a net of radius 1
        let line = FiniteMetricSpace::from_rows(&[
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 0.0, 1.0, 2.0],
            vec![2.0, 1.0, 0.0, 1.0],
            vec![3.0, 2.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(coverage_deficit(&MapCandidate::new(4, vec![0, 2]).unwrap(), &line).unwrap(), 1.0);
    }

    #[test]
    fn strict_isometry() {
        let x = FiniteMetricSpace::two_point(2.0).unwrap();
        let y = FiniteMetricSpace::two_point(3.0).unwrap();
        let id = MapCandidate::identity(2);
        assert!(is_eps_isometry(&id, &x, &x, 1e-9).unwrap());
        assert!(is_eps_isometry(&id, &x, &y, 1.01).unwrap());
        assert!(!is_eps_isometry(&id, &x, &y, 1.0).unwrap());
        let constant = MapCandidate::new(2, vec![0, 0]).unwrap();
        assert!(!is_eps_isometry(&constant, &x, &y, 2.5).unwrap());
    }

    #[test]
    fn lower_bound_examples() {
        let x = FiniteMetricSpace::two_point(2.0).unwrap();
        let y = FiniteMetricSpace::two_point(3.0).unwrap();
        assert_eq!(gh_lower(&x, &y), 1.0);
        assert_eq!(gh_lower(&x, &x), 0.0);
    }

    #[test]
    fn space_validation() {
        assert!(FiniteMetricSpace::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        let bad =
            FiniteMetricSpace::from_rows(&[vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).unwrap();
        assert_eq!(bad.triangle_violation(), 3.0);
    }
}
