//! Conforming finite elements for the pulled-back operator on the reference
//! mesh: P1 on intervals, Q1 on rectangles.
//!
//! Every perturbed problem is assembled on the same reference mesh, so
//! coefficient vectors from different problems live in one space and the
//! transport between them is the identity on coefficients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2, BandedCholesky, BandedSym};
use crate::perturbation::{make_pullback, CoefficientField, DiffeoMap, Point, ReferenceDomain};

/// Uniform tensor mesh. `cells[k]` is the number of cells along axis `k`;
/// interior nodes are numbered lexicographically with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: ReferenceDomain,
    cells: [usize; 2],
    spacing: [f64; 2],
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // 1/(2√3)

impl Mesh {
    /// `resolution` cells per axis.
    pub fn new(domain: ReferenceDomain, resolution: usize) -> Result<Self> {
        if resolution < 4 {
            return Err(invalid(format!("resolution {resolution} gives fewer than 3 interior nodes per axis")));
        }
        let [(a, b), (c, d)] = domain.bounds();
        let cells = match domain {
            ReferenceDomain::Interval { .. } => [resolution, 1],
            ReferenceDomain::Rectangle { .. } => [resolution, resolution],
        };
        let spacing = [(b - a) / cells[0] as f64, if domain.dim() == 2 { (d - c) / cells[1] as f64 } else { 0.0 }];
        Ok(Self { domain, cells, spacing })
    }

    pub fn domain(&self) -> &ReferenceDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn resolution(&self) -> usize {
        self.cells[0]
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    fn interior_per_axis(&self) -> [usize; 2] {
        match self.dim() {
            1 => [self.cells[0] - 1, 1],
            _ => [self.cells[0] - 1, self.cells[1] - 1],
        }
    }

    pub fn n_interior(&self) -> usize {
        let [nx, ny] = self.interior_per_axis();
        nx * ny
    }

    /// Bandwidth of the assembled matrices.
    pub fn bandwidth(&self) -> usize {
        match self.dim() {
            1 => 1,
            _ => self.cells[0],
        }
    }

    fn node(&self, i: usize, j: usize) -> Point {
        let [(a, _), (c, _)] = self.domain.bounds();
        [a + i as f64 * self.spacing[0], c + j as f64 * self.spacing[1]]
    }

    /// Interior index of grid node `(i, j)`, `None` on the boundary.
    fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        let [nx, _] = self.interior_per_axis();
        match self.dim() {
            1 => (i >= 1 && i < self.cells[0]).then(|| i - 1),
            _ => (i >= 1 && i < self.cells[0] && j >= 1 && j < self.cells[1]).then(|| (i - 1) + (j - 1) * nx),
        }
    }

    pub fn interior_coords(&self) -> Vec<Point> {
        let [nx, ny] = self.interior_per_axis();
        let mut out = Vec::with_capacity(nx * ny);
        match self.dim() {
            1 => out.extend((1..=nx).map(|i| self.node(i, 0))),
            _ => {
                for j in 1..=ny {
                    out.extend((1..=nx).map(|i| self.node(i, j)));
                }
            }
        }
        out
    }

    /// Element midpoints in 1D; 2×2 Gauss points per cell in 2D, cell by cell.
    pub fn quadrature_points(&self) -> Vec<Point> {
        let [hx, hy] = self.spacing;
        match self.dim() {
            1 => (0..self.cells[0])
                .map(|e| {
                    let p = self.node(e, 0);
                    [p[0] + 0.5 * hx, 0.0]
                })
                .collect(),
            _ => {
                let mut out = Vec::with_capacity(4 * self.cells[0] * self.cells[1]);
                for cj in 0..self.cells[1] {
                    for ci in 0..self.cells[0] {
                        let p = self.node(ci, cj);
                        for (gx, gy) in gauss_local() {
                            out.push([p[0] + gx * hx, p[1] + gy * hy]);
                        }
                    }
                }
                out
            }
        }
    }

    /// Nodal values of `g` at interior nodes.
    pub fn interpolate_fn(&self, g: impl Fn(Point) -> f64) -> Vec<f64> {
        self.interior_coords().into_iter().map(g).collect()
    }

    /// P1/Q1 interpolant of interior values `u` (zero on the boundary) at `p`;
    /// `None` when `p` lies outside the domain.
    pub fn interpolate(&self, u: &[f64], p: Point) -> Option<f64> {
        if !self.domain.contains(p) {
            return None;
        }
        let [(a, _), (c, _)] = self.domain.bounds();
        let locate = |x: f64, lo: f64, h: f64, n: usize| {
            let s = ((x - lo) / h).clamp(0.0, n as f64);
            let k = (libm::floor(s) as usize).min(n - 1);
            (k, s - k as f64)
        };
        let val = |i: usize, j: usize| self.interior_index(i, j).map_or(0.0, |k| u[k]);
        let (i, tx) = locate(p[0], a, self.spacing[0], self.cells[0]);
        match self.dim() {
            1 => Some((1.0 - tx) * val(i, 0) + tx * val(i + 1, 0)),
            _ => {
                let (j, ty) = locate(p[1], c, self.spacing[1], self.cells[1]);
                Some(
                    (1.0 - tx) * (1.0 - ty) * val(i, j)
                        + tx * (1.0 - ty) * val(i + 1, j)
                        + (1.0 - tx) * ty * val(i, j + 1)
                        + tx * ty * val(i + 1, j + 1),
                )
            }
        }
    }

    /// Pullback field of `h_new ∘ h_ref⁻¹` at this mesh's quadrature points.
    pub fn pullback(&self, h_ref: &DiffeoMap, h_new: &DiffeoMap) -> Result<CoefficientField> {
        if h_ref.domain() != &self.domain {
            return Err(invalid("map domain differs from mesh domain"));
        }
        make_pullback(h_ref, h_new, &self.quadrature_points())
    }
}

fn gauss_local() -> [(f64, f64); 4] {
    let (lo, hi) = (0.5 - GAUSS_OFFSET, 0.5 + GAUSS_OFFSET);
    [(lo, lo), (hi, lo), (lo, hi), (hi, hi)]
}

/// `{lambda1, residual, iterations}` of an eigen solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenReport {
    pub lambda1: f64,
    pub residual: f64,
    pub iterations: usize,
}

const DEFAULT_EIG_TOL: f64 = 1e-9;
const EIG_MAX_ITER: usize = 1000;
const POWER_ITERS: usize = 100;

/// Mass and stiffness matrices of the pulled-back form on interior nodes,
/// with their factorizations and cached spectral bounds.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub m: BandedSym,
    pub k: BandedSym,
    m_chol: BandedCholesky,
    k_chol: BandedCholesky,
    eig: EigenReport,
    lambda_max: f64,
}

/// `M_ij = ∫ φ_i φ_j detH`, `K_ij = ∫ (H̄ᵀH̄ ∇φ_i)·∇φ_j detH` over interior basis
/// functions.
///
/// In 1D the coefficients are frozen at the element midpoint and the element
/// integrals of the P1 basis are exact; in 2D the Q1 products are integrated by
/// 2×2 Gauss quadrature.
pub fn assemble_operators(mesh: &Mesh, field: &CoefficientField) -> Result<DiscreteOperator> {
    let expected = match mesh.dim() {
        1 => mesh.cells[0],
        _ => 4 * mesh.cells[0] * mesh.cells[1],
    };
    if field.len() != expected || field.dim != mesh.dim() {
        return Err(invalid(format!(
            "field has {} points in {}D, mesh expects {expected} in {}D",
            field.len(),
            field.dim,
            mesh.dim()
        )));
    }
    let n = mesh.n_interior();
    let bw = mesh.bandwidth();
    let mut m = BandedSym::zeros(n, bw);
    let mut k = BandedSym::zeros(n, bw);
    let [hx, hy] = mesh.spacing;
    match mesh.dim() {
        1 => {
            for e in 0..mesh.cells[0] {
                let hb = field.hbar[e][0][0];
                let det = field.det[e];
                let ke = hb * hb * det / hx;
                let me = det * hx / 6.0;
                let idx = [mesh.interior_index(e, 0), mesh.interior_index(e + 1, 0)];
                for a in 0..2 {
                    for b in 0..=a {
                        let (Some(i), Some(j)) = (idx[a], idx[b]) else { continue };
                        let sign = if a == b { 1.0 } else { -1.0 };
                        let mass = if a == b { 2.0 } else { 1.0 };
                        k.add(i, j, sign * ke);
                        m.add(i, j, mass * me);
                    }
                }
            }
        }
        _ => {
            let weight = 0.25 * hx * hy;
            for cj in 0..mesh.cells[1] {
                for ci in 0..mesh.cells[0] {
                    let idx = [
                        mesh.interior_index(ci, cj),
                        mesh.interior_index(ci + 1, cj),
                        mesh.interior_index(ci, cj + 1),
                        mesh.interior_index(ci + 1, cj + 1),
                    ];
                    let cell = cj * mesh.cells[0] + ci;
                    for (g, (xi, eta)) in gauss_local().into_iter().enumerate() {
                        let q = 4 * cell + g;
                        let (hb, det) = (field.hbar[q], field.det[q]);
                        let phi = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta];
                        let grad = [
                            [-(1.0 - eta) / hx, -(1.0 - xi) / hy],
                            [(1.0 - eta) / hx, -xi / hy],
                            [-eta / hx, (1.0 - xi) / hy],
                            [eta / hx, xi / hy],
                        ];
                        let tg: Vec<[f64; 2]> = grad
                            .iter()
                            .map(|g| [hb[0][0] * g[0] + hb[0][1] * g[1], hb[1][0] * g[0] + hb[1][1] * g[1]])
                            .collect();
                        for a in 0..4 {
                            for b in 0..4 {
                                let (Some(i), Some(j)) = (idx[a], idx[b]) else { continue };
                                if j > i {
                                    continue;
                                }
                                k.add(i, j, weight * det * (tg[a][0] * tg[b][0] + tg[a][1] * tg[b][1]));
                                m.add(i, j, weight * det * phi[a] * phi[b]);
                            }
                        }
                    }
                }
            }
        }
    }
    DiscreteOperator::from_matrices(m, k)
}

impl DiscreteOperator {
    pub fn from_matrices(m: BandedSym, k: BandedSym) -> Result<Self> {
        if m.dim() != k.dim() || m.bandwidth() != k.bandwidth() {
            return Err(invalid("mass and stiffness shapes differ"));
        }
        let m_chol = m.cholesky()?;
        let k_chol = k.cholesky()?;
        let mut op = Self {
            m,
            k,
            m_chol,
            k_chol,
            eig: EigenReport { lambda1: 0.0, residual: f64::INFINITY, iterations: 0 },
            lambda_max: 0.0,
        };
        op.eig = first_eigenvalue(&op, DEFAULT_EIG_TOL)?;
        op.lambda_max = estimate_lambda_max(&op);
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Cached smallest generalized eigenvalue of `K x = λ M x`.
    pub fn lambda1(&self) -> f64 {
        self.eig.lambda1
    }

    pub fn eigen_report(&self) -> EigenReport {
        self.eig
    }

    /// Power-iteration estimate of the largest generalized eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Largest admissible time step `0.5 / sqrt(λ_max)`.
    pub fn dt_cap(&self) -> f64 {
        0.5 / libm::sqrt(self.lambda_max)
    }

    pub fn m_solve(&self, b: &[f64]) -> Vec<f64> {
        self.m_chol.solve(b)
    }

    pub fn k_solve(&self, b: &[f64]) -> Vec<f64> {
        self.k_chol.solve(b)
    }

    /// `M⁻¹ K u`, the discrete image of the operator.
    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        self.m_chol.solve(&self.k.matvec(u))
    }
}

/// Smallest generalized eigenvalue by inverse iteration (shift 0) from the
/// all-ones vector; stops once `‖Kx − λMx‖/‖Mx‖ ≤ tol·λ`.
pub fn first_eigenvalue(op: &DiscreteOperator, tol: f64) -> Result<EigenReport> {
    if !(tol > 0.0) {
        return Err(invalid("eigenvalue tolerance must be positive"));
    }
    let n = op.dim();
    let mut x = vec![1.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=EIG_MAX_ITER {
        let mx = op.m.matvec(&x);
        let mut y = op.k_chol.solve(&mx);
        let scale = libm::sqrt(op.m.quad_form(&y));
        y.iter_mut().for_each(|v| *v /= scale);
        x = y;
        let kx = op.k.matvec(&x);
        let mx = op.m.matvec(&x);
        let lambda = dot(&x, &kx) / dot(&x, &mx);
        let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
        residual = norm2(&r) / norm2(&mx);
        if residual <= tol * lambda {
            return Ok(EigenReport { lambda1: lambda, residual, iterations: it });
        }
    }
    Err(Error::Convergence { iterations: EIG_MAX_ITER, residual })
}

/// First generalized eigenvector normalized to `xᵀMx = 1`.
pub fn first_eigenvector(op: &DiscreteOperator, tol: f64) -> Result<Vec<f64>> {
    let n = op.dim();
    let mut x = vec![1.0; n];
    for _ in 0..EIG_MAX_ITER {
        let mut y = op.k_chol.solve(&op.m.matvec(&x));
        let scale = libm::sqrt(op.m.quad_form(&y));
        y.iter_mut().for_each(|v| *v /= scale);
        x = y;
        let kx = op.k.matvec(&x);
        let mx = op.m.matvec(&x);
        let lambda = dot(&x, &kx);
        let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
        if norm2(&r) / norm2(&mx) <= tol * lambda {
            return Ok(x);
        }
    }
    Err(Error::Convergence { iterations: EIG_MAX_ITER, residual: f64::NAN })
}

fn estimate_lambda_max(op: &DiscreteOperator) -> f64 {
    let n = op.dim();
    let mut x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        let mut y = op.m_chol.solve(&op.k.matvec(&x));
        let s = norm2(&y);
        y.iter_mut().for_each(|v| *v /= s);
        x = y;
        lambda = op.k.quad_form(&x) / op.m.quad_form(&x);
    }
    lambda
}

/// Coefficient vectors of displacement and velocity on interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(invalid("u and v lengths differ"));
        }
        Ok(Self { u, v })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        StateVector { u: crate::linalg::sub(&self.u, &other.u), v: crate::linalg::sub(&self.v, &other.v) }
    }

    pub fn scaled(&self, c: f64) -> StateVector {
        StateVector { u: self.u.iter().map(|x| c * x).collect(), v: self.v.iter().map(|x| c * x).collect() }
    }

    /// `(1 - θ) self + θ other`.
    pub fn lerp(&self, other: &StateVector, theta: f64) -> StateVector {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - theta) * x + theta * y).collect();
        StateVector { u: mix(&self.u, &other.u), v: mix(&self.v, &other.v) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    X0,
    X1,
}

/// Discrete scale of norms attached to one operator.
#[derive(Debug, Clone, Copy)]
pub struct NormPack<'a> {
    pub op: &'a DiscreteOperator,
}

impl<'a> NormPack<'a> {
    pub fn new(op: &'a DiscreteOperator) -> Self {
        Self { op }
    }

    pub fn norm0(&self, u: &[f64]) -> f64 {
        libm::sqrt(self.op.m.quad_form(u).max(0.0))
    }

    pub fn norm1(&self, u: &[f64]) -> f64 {
        libm::sqrt(self.op.k.quad_form(u).max(0.0))
    }

    /// `‖M⁻¹Ku‖₀`.
    pub fn norm2(&self, u: &[f64]) -> f64 {
        let ku = self.op.k.matvec(u);
        let au = self.op.m_solve(&ku);
        libm::sqrt(dot(&ku, &au).max(0.0))
    }

    pub fn x_norm(&self, s: &StateVector, level: Level) -> f64 {
        match level {
            Level::X0 => libm::sqrt(self.op.k.quad_form(&s.u).max(0.0) + self.op.m.quad_form(&s.v).max(0.0)),
            Level::X1 => {
                let (a, b) = (self.norm2(&s.u), self.norm1(&s.v));
                libm::sqrt(a * a + b * b)
            }
        }
    }

    /// `‖a - b‖` in the given level.
    pub fn x_dist(&self, a: &StateVector, b: &StateVector, level: Level) -> f64 {
        self.x_norm(&a.sub(b), level)
    }
}

pub fn x_norm(s: &StateVector, pack: &NormPack<'_>, level: Level) -> Result<f64> {
    if s.dim() != pack.op.dim() {
        return Err(invalid(format!("state has dimension {}, operator {}", s.dim(), pack.op.dim())));
    }
    Ok(pack.x_norm(s, level))
}

/// `f(u) = a u + b sin u` or `f(u) = c u³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Sine { a: f64, b: f64 },
    Cubic { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    pub kind: Nonlinearity,
    /// Asserted bound on `|f'|`.
    pub l: f64,
    /// Growth exponent in `|f''(u)| ≤ C(|u|^γ + 1)`.
    pub gamma: f64,
}

impl NonlinearitySpec {
    /// `a u + b sin u` with the tight bound `l = |a| + |b|`.
    pub fn sine(a: f64, b: f64) -> Self {
        Self { kind: Nonlinearity::Sine { a, b }, l: libm::fabs(a) + libm::fabs(b), gamma: 0.0 }
    }

    pub fn zero() -> Self {
        Self::sine(0.0, 0.0)
    }

    pub fn linear(a: f64) -> Self {
        Self::sine(a, 0.0)
    }

    pub fn cubic(c: f64, l: f64) -> Self {
        Self { kind: Nonlinearity::Cubic { c }, l, gamma: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Nonlinearity::Sine { a, b } if a == 0.0 && b == 0.0)
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self.kind {
            Nonlinearity::Sine { a, b } => a * u + b * libm::sin(u),
            Nonlinearity::Cubic { c } => c * u * u * u,
        }
    }

    #[inline]
    pub fn fprime(&self, u: f64) -> f64 {
        match self.kind {
            Nonlinearity::Sine { a, b } => a + b * libm::cos(u),
            Nonlinearity::Cubic { c } => 3.0 * c * u * u,
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| self.f(x)).collect()
    }
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        Self::sine(1.0, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FReport {
    pub max_fprime: f64,
    pub max_fprime_at: f64,
    /// Worst relative mismatch between `f'` and a central difference of `f`.
    pub fd_rel_err: f64,
    /// Smallest `C` with `|f''(u)| ≤ C(|u|^γ + 1)` on the samples.
    pub growth_c: f64,
    /// `min f(u)/u` over `R/2 ≤ |u| ≤ R`.
    pub dissipativity: f64,
}

/// Checks the hypotheses on `f` at `samples` equispaced points of `[-R, R]`.
pub fn validate_f(spec: &NonlinearitySpec, r: f64, samples: usize) -> Result<FReport> {
    if !(r > 0.0) || samples < 100 {
        return Err(invalid("validate_f needs R > 0 and at least 100 samples"));
    }
    let mut rep =
        FReport { max_fprime: 0.0, max_fprime_at: 0.0, fd_rel_err: 0.0, growth_c: 0.0, dissipativity: f64::INFINITY };
    for i in 0..samples {
        let u = -r + 2.0 * r * i as f64 / (samples - 1) as f64;
        let fp = spec.fprime(u);
        if libm::fabs(fp) > rep.max_fprime {
            rep.max_fprime = libm::fabs(fp);
            rep.max_fprime_at = u;
        }
        let h = 1e-5 * 1.0f64.max(libm::fabs(u));
        let fd = (spec.f(u + h) - spec.f(u - h)) / (2.0 * h);
        let err = libm::fabs(fd - fp) / 1.0f64.max(libm::fabs(fp));
        rep.fd_rel_err = rep.fd_rel_err.max(err);
        if err > 1e-6 {
            return Err(Error::Validation {
                u,
                reason: format!("f' disagrees with finite difference (rel err {err:e})"),
            });
        }
        let fpp = (spec.fprime(u + h) - spec.fprime(u - h)) / (2.0 * h);
        rep.growth_c = rep.growth_c.max(libm::fabs(fpp) / (libm::pow(libm::fabs(u), spec.gamma) + 1.0));
        if libm::fabs(u) >= 0.5 * r {
            rep.dissipativity = rep.dissipativity.min(spec.f(u) / u);
        }
    }
    if rep.max_fprime > spec.l * (1.0 + 1e-12) {
        return Err(Error::Validation {
            u: rep.max_fprime_at,
            reason: format!("|f'| = {} exceeds l = {}", rep.max_fprime, spec.l),
        });
    }
    Ok(rep)
}
