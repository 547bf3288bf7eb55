//! Diffeomorphic domain perturbations and their pullback coefficient fields.
//!
//! Maps are closed-form analytic families with hand-coded first and second
//! derivatives. Everything is evaluated in two components: a 1D map `h(x)` is
//! embedded as `(x, y) ↦ (h(x), y)`, which leaves the Frobenius norms and
//! determinants of the 1D problem unchanged.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::Mesh;
use crate::error::{invalid, Error, Result};

pub type Point = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];
/// `hess[i][j][k] = ∂² h_i / ∂x_j ∂x_k`.
pub type Hess2 = [[[f64; 2]; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Default number of C² sample points per axis.
pub const C2_GRID_PER_AXIS: usize = 1001;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inv2(m: &Mat2) -> Option<Mat2> {
    let d = det2(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

pub fn transpose2(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn frobenius2(m: &Mat2) -> f64 {
    libm::sqrt(m.iter().flatten().map(|v| v * v).sum())
}

fn mat_sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceDomain {
    Interval { a: f64, b: f64 },
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
}

impl ReferenceDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("interval needs b > a, got ({a}, {b})")));
        }
        Ok(Self::Interval { a, b })
    }

    pub fn rectangle(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let ok = [a, b, c, d].iter().all(|v| v.is_finite());
        if !ok || !(b > a) || !(d > c) {
            return Err(invalid(format!("rectangle needs b > a and d > c, got ({a}, {b}) x ({c}, {d})")));
        }
        Ok(Self::Rectangle { a, b, c, d })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            Self::Rectangle { .. } => 2,
        }
    }

    /// `[(a, b), (c, d)]`; the second axis of an interval is `(0, 0)`.
    pub fn bounds(&self) -> [(f64, f64); 2] {
        match *self {
            Self::Interval { a, b } => [(a, b), (0.0, 0.0)],
            Self::Rectangle { a, b, c, d } => [(a, b), (c, d)],
        }
    }

    /// Closed-domain membership with a small relative slack.
    pub fn contains(&self, p: Point) -> bool {
        let [(a, b), (c, d)] = self.bounds();
        let sx = 1e-12 * (b - a);
        let in_x = p[0] >= a - sx && p[0] <= b + sx;
        match self {
            Self::Interval { .. } => in_x,
            Self::Rectangle { .. } => {
                let sy = 1e-12 * (d - c);
                in_x && p[1] >= c - sy && p[1] <= d + sy
            }
        }
    }

    /// Uniform tensor grid with `per_axis` points per axis, endpoints included.
    /// The grid used for map validation and C² distances.
    pub fn validation_grid(&self) -> Vec<Point> {
        self.sample_grid(default_per_axis(self))
    }

    pub fn sample_grid(&self, per_axis: usize) -> Vec<Point> {
        let per_axis = per_axis.max(2);
        let [(a, b), (c, d)] = self.bounds();
        let xs: Vec<f64> = (0..per_axis).map(|i| a + (b - a) * i as f64 / (per_axis - 1) as f64).collect();
        match self {
            Self::Interval { .. } => xs.into_iter().map(|x| [x, 0.0]).collect(),
            Self::Rectangle { .. } => {
                let mut out = Vec::with_capacity(per_axis * per_axis);
                for j in 0..per_axis {
                    let y = c + (d - c) * j as f64 / (per_axis - 1) as f64;
                    out.extend(xs.iter().map(|&x| [x, y]));
                }
                out
            }
        }
    }
}

/// Value, Jacobian and Hessian of a map at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: Point,
    pub jac: Mat2,
    pub hess: Hess2,
}

impl Jet {
    fn is_finite(&self) -> bool {
        self.value
            .iter()
            .chain(self.jac.iter().flatten())
            .chain(self.hess.iter().flatten().flatten())
            .all(|v| v.is_finite())
    }
}

/// Closed-form map families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapKind {
    Identity,
    /// `p ↦ m p + shift`. For 1D domains only `m[0][0]` and `shift[0]` may differ
    /// from the identity.
    Affine {
        m: Mat2,
        shift: Point,
    },
    /// `x ↦ c0 + c1 x + c2 x² + c3 x³` (1D).
    Poly1d {
        coeffs: [f64; 4],
    },
    /// `x ↦ x + A w tanh((x - c)/w)` (1D); its derivative `1 + A sech²((x-c)/w)`
    /// is a localized stretch bump of height `A` and width `w`.
    TanhStretch {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// `p ↦ p + A exp(-|p - c|²/w²) (p - c)` (2D).
    RadialBump {
        amplitude: f64,
        width: f64,
        center: Point,
    },
}

impl MapKind {
    pub fn is_one_dimensional(&self) -> bool {
        match self {
            Self::Poly1d { .. } | Self::TanhStretch { .. } => true,
            Self::Affine { m, shift } => m[0][1] == 0.0 && m[1][0] == 0.0 && m[1][1] == 1.0 && shift[1] == 0.0,
            Self::Identity => true,
            Self::RadialBump { .. } => false,
        }
    }

    pub fn jet(&self, p: Point) -> Jet {
        let zero_h: Hess2 = [[[0.0; 2]; 2]; 2];
        match *self {
            Self::Identity => Jet { value: p, jac: IDENTITY, hess: zero_h },
            Self::Affine { m, shift } => Jet {
                value: [m[0][0] * p[0] + m[0][1] * p[1] + shift[0], m[1][0] * p[0] + m[1][1] * p[1] + shift[1]],
                jac: m,
                hess: zero_h,
            },
            Self::Poly1d { coeffs: c } => {
                let x = p[0];
                let v = c[0] + x * (c[1] + x * (c[2] + x * c[3]));
                let d1 = c[1] + x * (2.0 * c[2] + 3.0 * c[3] * x);
                let d2 = 2.0 * c[2] + 6.0 * c[3] * x;
                let mut hess = zero_h;
                hess[0][0][0] = d2;
                Jet { value: [v, p[1]], jac: [[d1, 0.0], [0.0, 1.0]], hess }
            }
            Self::TanhStretch { amplitude: a, width: w, center: c } => {
                let t = libm::tanh((p[0] - c) / w);
                let sech2 = 1.0 - t * t;
                let mut hess = zero_h;
                hess[0][0][0] = -2.0 * a * t * sech2 / w;
                Jet { value: [p[0] + a * w * t, p[1]], jac: [[1.0 + a * sech2, 0.0], [0.0, 1.0]], hess }
            }
            Self::RadialBump { amplitude: a, width: w, center: c } => {
                let d = [p[0] - c[0], p[1] - c[1]];
                let w2 = w * w;
                let g = libm::exp(-(d[0] * d[0] + d[1] * d[1]) / w2);
                let mut jac = [[0.0; 2]; 2];
                let mut hess = zero_h;
                for i in 0..2 {
                    for j in 0..2 {
                        let delta_ij = if i == j { 1.0 } else { 0.0 };
                        jac[i][j] = delta_ij * (1.0 + a * g) - 2.0 * a * g * d[i] * d[j] / w2;
                        for k in 0..2 {
                            let delta_ik = if i == k { 1.0 } else { 0.0 };
                            let delta_jk = if j == k { 1.0 } else { 0.0 };
                            hess[i][j][k] = a
                                * g
                                * (-2.0 * (delta_ij * d[k] + delta_ik * d[j] + delta_jk * d[i]) / w2
                                    + 4.0 * d[i] * d[j] * d[k] / (w2 * w2));
                        }
                    }
                }
                Jet { value: [p[0] + a * g * d[0], p[1] + a * g * d[1]], jac, hess }
            }
        }
    }
}

/// A validated C² diffeomorphism of a reference domain with its C² distance to
/// the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffeoMap {
    kind: MapKind,
    domain: ReferenceDomain,
    delta: f64,
}

impl DiffeoMap {
    pub fn identity(domain: ReferenceDomain) -> Self {
        Self { kind: MapKind::Identity, domain, delta: 0.0 }
    }

    /// Validates the map on `domain`: finite jets, positive Jacobian determinant
    /// and `d_C2(h, id) < 1` on the default sample grid, and consistency of the
    /// closed-form derivatives with central differences.
    pub fn new(kind: MapKind, domain: ReferenceDomain) -> Result<Self> {
        if domain.dim() == 1 && !kind.is_one_dimensional() {
            return Err(invalid("map acts on the second coordinate of a 1D domain"));
        }
        let grid = domain.validation_grid();
        for &p in &grid {
            let jet = kind.jet(p);
            if !jet.is_finite() {
                return Err(Error::Evaluation { point: p, reason: "non-finite jet".into() });
            }
            let det = det2(&jet.jac);
            if !(det > 0.0) {
                return Err(Error::Orientation { point: p, det });
            }
        }
        let probe = domain.sample_grid(9);
        if let Some((p, err)) = derivative_consistency(&kind, &probe) {
            if err > 1e-6 {
                return Err(Error::Evaluation {
                    point: p,
                    reason: format!("closed-form derivatives disagree with finite differences (rel err {err:e})"),
                });
            }
        }
        let delta = c2_distance_kinds(&kind, &MapKind::Identity, &grid)?;
        if !(delta < 1.0) {
            return Err(invalid(format!("d_C2(h, id) = {delta} must be < 1")));
        }
        Ok(Self { kind, domain, delta })
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn domain(&self) -> &ReferenceDomain {
        &self.domain
    }

    /// `d_C2(h, 1_Ω)` on the default sample grid.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn jet(&self, p: Point) -> Jet {
        self.kind.jet(p)
    }

    pub fn apply(&self, p: Point) -> Point {
        self.kind.jet(p).value
    }

    /// Solves `h(y) = x` by damped Newton iteration started at `y = x`.
    pub fn invert(&self, x: Point) -> Result<Point> {
        if self.kind == MapKind::Identity {
            return Ok(x);
        }
        let scale = 1.0f64.max(libm::fabs(x[0])).max(libm::fabs(x[1]));
        let mut y = x;
        let mut jet = self.kind.jet(y);
        let mut r = [jet.value[0] - x[0], jet.value[1] - x[1]];
        let mut rn = libm::hypot(r[0], r[1]);
        for _ in 0..NEWTON_MAX_ITER {
            if rn <= NEWTON_TOL * scale {
                return Ok(y);
            }
            let Some(ji) = inv2(&jet.jac) else {
                return Err(Error::SingularMap { point: x, residual: rn });
            };
            let step = [ji[0][0] * r[0] + ji[0][1] * r[1], ji[1][0] * r[0] + ji[1][1] * r[1]];
            let mut lambda = 1.0;
            loop {
                let cand = [y[0] - lambda * step[0], y[1] - lambda * step[1]];
                let cj = self.kind.jet(cand);
                let cr = [cj.value[0] - x[0], cj.value[1] - x[1]];
                let crn = libm::hypot(cr[0], cr[1]);
                if crn < rn || lambda < 1e-6 {
                    y = cand;
                    jet = cj;
                    r = cr;
                    rn = crn;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if rn <= NEWTON_TOL * scale {
            Ok(y)
        } else {
            Err(Error::SingularMap { point: x, residual: rn })
        }
    }
}

fn default_per_axis(domain: &ReferenceDomain) -> usize {
    match domain {
        ReferenceDomain::Interval { .. } => C2_GRID_PER_AXIS,
        // a full 1001² grid is 10⁶ jets; 401² keeps validation cheap
        ReferenceDomain::Rectangle { .. } => 401,
    }
}

/// Worst relative disagreement between closed-form and central-difference
/// derivatives over `points`.
pub fn derivative_consistency(kind: &MapKind, points: &[Point]) -> Option<(Point, f64)> {
    let step = 1e-5;
    let mut worst: Option<(Point, f64)> = None;
    for &p in points {
        let jet = kind.jet(p);
        let mut err: f64 = 0.0;
        for k in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[k] += step;
            pm[k] -= step;
            let (jp, jm) = (kind.jet(pp), kind.jet(pm));
            for i in 0..2 {
                let fd = (jp.value[i] - jm.value[i]) / (2.0 * step);
                err = err.max(libm::fabs(fd - jet.jac[i][k]) / 1.0f64.max(libm::fabs(jet.jac[i][k])));
                for j in 0..2 {
                    let fd2 = (jp.jac[i][j] - jm.jac[i][j]) / (2.0 * step);
                    let h = jet.hess[i][j][k];
                    err = err.max(libm::fabs(fd2 - h) / 1.0f64.max(libm::fabs(h)));
                }
            }
        }
        if worst.is_none_or(|(_, w)| err > w) {
            worst = Some((p, err));
        }
    }
    worst
}

fn c2_distance_kinds(h: &MapKind, g: &MapKind, grid: &[Point]) -> Result<f64> {
    if grid.is_empty() {
        return Err(invalid("c2_distance needs a nonempty sample grid"));
    }
    let mut best: f64 = 0.0;
    for &p in grid {
        let (a, b) = (h.jet(p), g.jet(p));
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Evaluation { point: p, reason: "non-finite jet".into() });
        }
        let dv = libm::hypot(a.value[0] - b.value[0], a.value[1] - b.value[1]);
        let dj = frobenius2(&mat_sub(&a.jac, &b.jac));
        let dh: f64 = a
            .hess
            .iter()
            .flatten()
            .flatten()
            .zip(b.hess.iter().flatten().flatten())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        best = best.max(dv + dj + libm::sqrt(dh));
    }
    Ok(best)
}

/// `max_p |h - g|₂ + ‖Dh - Dg‖_F + ‖D²h - D²g‖_F` over the sample grid.
///
/// A grid maximum under-approximates the true supremum.
pub fn c2_distance(h: &DiffeoMap, g: &DiffeoMap, grid: &[Point]) -> Result<f64> {
    if h.domain != g.domain {
        return Err(invalid("maps are defined on different reference domains"));
    }
    c2_distance_kinds(&h.kind, &g.kind, grid)
}

/// Named scalar-parameter families `s ↦ h_s` with `h_0 = identity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// `x ↦ a + (1 + s)(x - a)`, both axes in 2D.
    Scale,
    /// `x ↦ x + s (x - a)(b - x)/(b - a)`; keeps the interval fixed.
    Quadratic1d,
    /// [`MapKind::TanhStretch`] with amplitude `s`.
    Bump1d { width: f64, center: f64 },
    /// `(x, y) ↦ (x, y + s (x - a))`.
    Shear2d,
    /// [`MapKind::RadialBump`] with amplitude `s`.
    Radial2d { width: f64, center: Point },
}

impl FamilyKind {
    pub const NAMES: [&'static str; 5] = ["scale", "quadratic1d", "bump1d", "shear2d", "radial2d"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Scale => "scale",
            Self::Quadratic1d => "quadratic1d",
            Self::Bump1d { .. } => "bump1d",
            Self::Shear2d => "shear2d",
            Self::Radial2d { .. } => "radial2d",
        }
    }

    pub fn map_kind(&self, s: f64, domain: &ReferenceDomain) -> MapKind {
        if s == 0.0 {
            return MapKind::Identity;
        }
        let [(a, b), (c, _)] = domain.bounds();
        match *self {
            Self::Scale => {
                let sy = if domain.dim() == 2 { 1.0 + s } else { 1.0 };
                MapKind::Affine { m: [[1.0 + s, 0.0], [0.0, sy]], shift: [-s * a, (1.0 - sy) * c] }
            }
            Self::Quadratic1d => {
                let l = b - a;
                // x + s (x - a)(b - x)/l expanded in powers of x
                MapKind::Poly1d { coeffs: [-s * a * b / l, 1.0 + s * (a + b) / l, -s / l, 0.0] }
            }
            Self::Bump1d { width, center } => MapKind::TanhStretch { amplitude: s, width, center },
            Self::Shear2d => MapKind::Affine { m: [[1.0, 0.0], [s, 1.0]], shift: [0.0, -s * a] },
            Self::Radial2d { width, center } => MapKind::RadialBump { amplitude: s, width, center },
        }
    }

    pub fn member(&self, s: f64, domain: ReferenceDomain) -> Result<DiffeoMap> {
        let needs_2d = matches!(self, Self::Shear2d | Self::Radial2d { .. });
        let needs_1d = matches!(self, Self::Quadratic1d | Self::Bump1d { .. });
        if (needs_2d && domain.dim() != 2) || (needs_1d && domain.dim() != 1) {
            return Err(invalid(format!("family '{}' does not apply to a {}D domain", self.name(), domain.dim())));
        }
        if s == 0.0 {
            return Ok(DiffeoMap::identity(domain));
        }
        DiffeoMap::new(self.map_kind(s, &domain), domain)
    }
}

/// A family with a strictly decreasing positive parameter schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily {
    pub kind: FamilyKind,
    pub domain: ReferenceDomain,
    pub schedule: Vec<f64>,
}

impl PerturbationFamily {
    pub fn new(kind: FamilyKind, domain: ReferenceDomain, schedule: Vec<f64>) -> Result<Self> {
        if schedule.is_empty() {
            return Err(invalid("schedule is empty"));
        }
        if schedule.iter().any(|&s| !(s > 0.0)) {
            return Err(invalid("schedule entries must be positive"));
        }
        if schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("schedule must be strictly decreasing"));
        }
        Ok(Self { kind, domain, schedule })
    }

    pub fn reference(&self) -> DiffeoMap {
        DiffeoMap::identity(self.domain)
    }

    /// Members along the schedule; fails if any member violates the map
    /// invariants or δ increases along the schedule.
    pub fn members(&self) -> Result<Vec<DiffeoMap>> {
        let maps = self.schedule.iter().map(|&s| self.kind.member(s, self.domain)).collect::<Result<Vec<_>>>()?;
        if let Some(w) = maps.windows(2).find(|w| w[1].delta() > w[0].delta()) {
            return Err(invalid(format!("delta increases along schedule ({} -> {})", w[0].delta(), w[1].delta())));
        }
        Ok(maps)
    }
}

/// Jacobian data of `h_new ∘ h_ref⁻¹` at quadrature points.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub dim: usize,
    pub points: Vec<Point>,
    pub h: Vec<Mat2>,
    /// `(H⁻¹)ᵀ`
    pub hbar: Vec<Mat2>,
    /// `|det H|`
    pub det: Vec<f64>,
}

impl CoefficientField {
    pub fn identity(dim: usize, points: Vec<Point>) -> Self {
        let n = points.len();
        Self { dim, points, h: vec![IDENTITY; n], hbar: vec![IDENTITY; n], det: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Worst violation of `Hbar Hᵀ = I` and `det = |det H|` across points.
    pub fn invariant_residuals(&self) -> (f64, f64) {
        let mut ortho: f64 = 0.0;
        let mut det: f64 = 0.0;
        for k in 0..self.len() {
            let prod = matmul2(&self.hbar[k], &transpose2(&self.h[k]));
            ortho = ortho.max(frobenius2(&mat_sub(&prod, &IDENTITY)));
            det = det.max(libm::fabs(self.det[k] - libm::fabs(det2(&self.h[k]))));
        }
        (ortho, det)
    }

    /// CSV rows: coordinates (x, or x,y), H entries row-major, det.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str("x,h11,det\n");
        } else {
            out.push_str("x,y,h11,h12,h21,h22,det\n");
        }
        for k in 0..self.len() {
            let (p, h) = (self.points[k], self.h[k]);
            if self.dim == 1 {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p[0], h[0][0], self.det[k]));
            } else {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    p[0], p[1], h[0][0], h[0][1], h[1][0], h[1][1], self.det[k]
                ));
            }
        }
        out
    }
}

/// Pullback coefficients: `H = D(h_new ∘ h_ref⁻¹)` at each quadrature point,
/// with `h_ref⁻¹` evaluated by damped Newton iteration.
pub fn make_pullback(h_ref: &DiffeoMap, h_new: &DiffeoMap, quad: &[Point]) -> Result<CoefficientField> {
    if h_ref.domain != h_new.domain {
        return Err(invalid("maps are defined on different reference domains"));
    }
    let dim = h_ref.domain.dim();
    let mut field = CoefficientField::identity(dim, quad.to_vec());
    for (k, &x) in quad.iter().enumerate() {
        let y = h_ref.invert(x)?;
        let jr = h_ref.jet(y).jac;
        let jn = h_new.jet(y).jac;
        let jr_inv = inv2(&jr).ok_or(Error::SingularMap { point: x, residual: 0.0 })?;
        let h = matmul2(&jn, &jr_inv);
        let det = det2(&h);
        if !(det > 0.0) {
            return Err(Error::Orientation { point: x, det });
        }
        let hinv = inv2(&h).ok_or(Error::Orientation { point: x, det })?;
        field.h[k] = h;
        field.hbar[k] = transpose2(&hinv);
        field.det[k] = libm::fabs(det);
    }
    Ok(field)
}

/// `(max |detH - 1|, max ‖I - Hbar‖_F)`.
pub fn deviation_norms(field: &CoefficientField) -> (f64, f64) {
    let det_dev = field.det.iter().map(|d| libm::fabs(d - 1.0)).fold(0.0, f64::max);
    let hbar_dev = field.hbar.iter().map(|m| frobenius2(&mat_sub(&IDENTITY, m))).fold(0.0, f64::max);
    (det_dev, hbar_dev)
}

/// Result of [`transfer_state`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub values: Vec<f64>,
    /// Nodes whose composed preimage fell outside the domain and were set to 0.
    pub outside: usize,
}

/// `u ∘ (h_src ∘ h_dst⁻¹)` sampled at the interior nodes of `mesh`.
///
/// `u` holds interior-node values (boundary values are zero). Off-node values
/// use the P1/Q1 interpolant on the mesh; preimages outside the domain evaluate
/// to zero, the homogeneous Dirichlet extension.
pub fn transfer_state(u: &[f64], h_src: &DiffeoMap, h_dst: &DiffeoMap, mesh: &Mesh) -> Result<Transfer> {
    if u.len() != mesh.n_interior() {
        return Err(invalid(format!("state has {} entries, mesh has {} interior nodes", u.len(), mesh.n_interior())));
    }
    if h_src == h_dst {
        return Ok(Transfer { values: u.to_vec(), outside: 0 });
    }
    let mut values = Vec::with_capacity(u.len());
    let mut outside = 0;
    for x in mesh.interior_coords() {
        let p = h_src.apply(h_dst.invert(x)?);
        match mesh.interpolate(u, p) {
            Some(v) => values.push(v),
            None => {
                outside += 1;
                values.push(0.0);
            }
        }
    }
    Ok(Transfer { values, outside })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ReferenceDomain {
        ReferenceDomain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(ReferenceDomain::interval(1.0, 1.0).is_err());
        assert!(ReferenceDomain::rectangle(0.0, 1.0, 2.0, 1.0).is_err());
        assert_eq!(ReferenceDomain::rectangle(0.0, 1.0, 0.0, 2.0).unwrap().dim(), 2);
    }

    #[test]
    fn c2_identity_is_zero_and_translation_is_shift() {
        let d = unit();
        let grid = d.sample_grid(1001);
        let id = DiffeoMap::identity(d);
        assert_eq!(c2_distance(&id, &id, &grid).unwrap(), 0.0);
        let shift = DiffeoMap::new(MapKind::Affine { m: IDENTITY, shift: [0.1, 0.0] }, d).unwrap();
        let v = c2_distance(&shift, &id, &grid).unwrap();
        assert!((v - 0.1).abs() < 1e-15, "{v}");
        assert_eq!(c2_distance(&id, &shift, &grid).unwrap(), v);
    }

    #[test]
    fn c2_empty_grid_is_invalid() {
        let id = DiffeoMap::identity(unit());
        assert!(matches!(c2_distance(&id, &id, &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn delta_must_stay_below_one() {
        let big = MapKind::Affine { m: [[2.0, 0.0], [0.0, 1.0]], shift: [0.0, 0.0] };
        assert!(matches!(DiffeoMap::new(big, unit()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn orientation_reversal_rejected() {
        let flip = MapKind::Poly1d { coeffs: [1.0, -0.2, 0.0, 0.0] };
        assert!(matches!(DiffeoMap::new(flip, unit()), Err(Error::Orientation { .. })));
    }

    #[test]
    fn second_coordinate_maps_rejected_in_1d() {
        let shear = MapKind::Affine { m: [[1.0, 0.0], [0.1, 1.0]], shift: [0.0, 0.0] };
        assert!(DiffeoMap::new(shear, unit()).is_err());
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let d2 = ReferenceDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let kinds = [
            MapKind::Poly1d { coeffs: [0.0, 1.0, 0.05, 0.01] },
            MapKind::TanhStretch { amplitude: 0.1, width: 0.3, center: 0.4 },
            MapKind::RadialBump { amplitude: 0.05, width: 0.4, center: [0.5, 0.4] },
        ];
        for k in kinds {
            let (_, err) = derivative_consistency(&k, &d2.sample_grid(7)).unwrap();
            assert!(err < 1e-6, "{k:?}: {err}");
        }
    }

    #[test]
    fn newton_inverse_roundtrip() {
        let h = DiffeoMap::new(MapKind::TanhStretch { amplitude: 0.2, width: 0.3, center: 0.5 }, unit()).unwrap();
        for i in 0..=20 {
            let x = [i as f64 / 20.0, 0.0];
            let y = h.invert(h.apply(x)).unwrap();
            assert!((y[0] - x[0]).abs() < 1e-11);
        }
    }

    #[test]
    fn pullback_scaling_field() {
        let d = unit();
        let h = DiffeoMap::new(MapKind::Affine { m: [[1.1, 0.0], [0.0, 1.0]], shift: [0.0, 0.0] }, d).unwrap();
        let quad: Vec<Point> = (0..10).map(|i| [(i as f64 + 0.5) / 10.0, 0.0]).collect();
        let field = make_pullback(&DiffeoMap::identity(d), &h, &quad).unwrap();
        for k in 0..field.len() {
            assert!((field.h[k][0][0] - 1.1).abs() < 1e-15);
            assert!((field.hbar[k][0][0] - 1.0 / 1.1).abs() < 1e-15);
            assert!((field.det[k] - 1.1).abs() < 1e-15);
        }
        let (dd, hd) = deviation_norms(&field);
        assert!((dd - 0.1).abs() < 1e-14);
        assert!((hd - (1.0 - 1.0 / 1.1)).abs() < 1e-14);
    }

    #[test]
    fn pullback_shear_field() {
        let d = ReferenceDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let h = FamilyKind::Shear2d.member(0.05, d).unwrap();
        let quad = d.sample_grid(5);
        let field = make_pullback(&DiffeoMap::identity(d), &h, &quad).unwrap();
        for k in 0..field.len() {
            assert_eq!(field.h[k], [[1.0, 0.0], [0.05, 1.0]]);
            assert!((field.det[k] - 1.0).abs() < 1e-15);
        }
        let (ortho, det) = field.invariant_residuals();
        assert!(ortho < 1e-10 && det < 1e-12);
    }

    #[test]
    fn pullback_of_same_map_is_identity() {
        let d = unit();
        let h = FamilyKind::Bump1d { width: 0.3, center: 0.4 }.member(0.2, d).unwrap();
        let quad = d.sample_grid(33);
        let field = make_pullback(&h, &h, &quad).unwrap();
        let (dd, hd) = deviation_norms(&field);
        assert!(dd < 1e-14 && hd < 1e-14, "{dd} {hd}");
    }

    #[test]
    fn family_validation() {
        let d = unit();
        assert!(PerturbationFamily::new(FamilyKind::Scale, d, vec![0.1, 0.1]).is_err());
        assert!(PerturbationFamily::new(FamilyKind::Scale, d, vec![0.1, -0.05]).is_err());
        let fam = PerturbationFamily::new(FamilyKind::Quadratic1d, d, vec![0.2, 0.1, 0.05]).unwrap();
        let members = fam.members().unwrap();
        assert!(members.windows(2).all(|w| w[1].delta() <= w[0].delta()));
        assert!(FamilyKind::Shear2d.member(0.1, d).is_err());
    }

    #[test]
    fn quadratic_family_fixes_endpoints() {
        let d = ReferenceDomain::interval(0.5, 2.0).unwrap();
        let h = FamilyKind::Quadratic1d.member(0.3, d).unwrap();
        assert!((h.apply([0.5, 0.0])[0] - 0.5).abs() < 1e-14);
        assert!((h.apply([2.0, 0.0])[0] - 2.0).abs() < 1e-14);
    }
}
