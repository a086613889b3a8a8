//! Charts on S²×R² and S²×S², chart transitions, and the matrix of the
//! (b-)symplectic form in the chart's b-coframe.
//!
//! Coordinates are stored in chart order: `(θ, z)` or `(x, y)` for each
//! sphere factor and `(u, v)` for the plane. Frame slots use a different
//! order on cylindrical factors, `(z-slot, θ-slot)`, so that the vector
//! `z∂z` (or `∂z` off the singular factor) comes first. On the factor
//! carrying the singular hypersurface the z-slot is the b-vector `z∂z`
//! and its dual is `dz/z`; every matrix expressed in this frame stays
//! finite on `z = 0`.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::Matrix4;
use serde::Serialize;

use crate::error::{Error, Result};

/// Points closer than this to a chart boundary are rejected.
pub const CHART_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Sign of `x`, with zero counted as positive.
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Manifold {
    SphereTimesPlane,
    SphereTimesSphere,
}

/// Chart on a single sphere factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SphereChart {
    /// `(θ, z)` with `|z| < 1`.
    Cylindrical,
    /// `(x, y)` on the open hemisphere where `z` has the given sign.
    Hemisphere(Sign),
}

impl SphereChart {
    fn label(self) -> &'static str {
        match self {
            SphereChart::Cylindrical => "U0",
            SphereChart::Hemisphere(Sign::Plus) => "U+",
            SphereChart::Hemisphere(Sign::Minus) => "U-",
        }
    }

    fn parse(s: &str) -> Option<SphereChart> {
        match s {
            "U0" => Some(SphereChart::Cylindrical),
            "U+" => Some(SphereChart::Hemisphere(Sign::Plus)),
            "U-" => Some(SphereChart::Hemisphere(Sign::Minus)),
            _ => None,
        }
    }

    const ALL: [SphereChart; 3] = [
        SphereChart::Hemisphere(Sign::Plus),
        SphereChart::Hemisphere(Sign::Minus),
        SphereChart::Cylindrical,
    ];

    /// Chart best conditioned at height `z`.
    pub fn preferred_at(z: f64) -> SphereChart {
        if z.abs() > std::f64::consts::FRAC_1_SQRT_2 {
            SphereChart::Hemisphere(Sign::of(z))
        } else {
            SphereChart::Cylindrical
        }
    }
}

/// A chart of the product manifold, one sphere chart per sphere factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChartId {
    Plane(SphereChart),
    Sphere(SphereChart, SphereChart),
}

impl ChartId {
    pub fn manifold(self) -> Manifold {
        match self {
            ChartId::Plane(_) => Manifold::SphereTimesPlane,
            ChartId::Sphere(..) => Manifold::SphereTimesSphere,
        }
    }

    /// Sphere chart of factor `f`, or `None` for the plane factor.
    pub fn sphere(self, f: usize) -> Option<SphereChart> {
        match (self, f) {
            (ChartId::Plane(c), 0) | (ChartId::Sphere(c, _), 0) => Some(c),
            (ChartId::Sphere(_, c), 1) => Some(c),
            _ => None,
        }
    }

    /// True when no factor uses cylindrical coordinates.
    pub fn is_cartesian(self) -> bool {
        (0..2).all(|f| self.sphere(f) != Some(SphereChart::Cylindrical))
    }

    pub fn label(self) -> String {
        match self {
            ChartId::Plane(c) => c.label().to_string(),
            ChartId::Sphere(a, b) => format!("{}x{}", a.label(), b.label()),
        }
    }

    pub fn parse(s: &str) -> Option<ChartId> {
        match s.split_once('x') {
            Some((a, b)) => Some(ChartId::Sphere(SphereChart::parse(a)?, SphereChart::parse(b)?)),
            None => Some(ChartId::Plane(SphereChart::parse(s)?)),
        }
    }

    /// Every chart of the atlas, including mixed products on S²×S².
    pub fn atlas(m: Manifold) -> Vec<ChartId> {
        match m {
            Manifold::SphereTimesPlane => SphereChart::ALL.iter().map(|&c| ChartId::Plane(c)).collect(),
            Manifold::SphereTimesSphere => SphereChart::ALL
                .iter()
                .flat_map(|&a| SphereChart::ALL.iter().map(move |&b| ChartId::Sphere(a, b)))
                .collect(),
        }
    }

    /// The all-Cartesian chart containing the given pole signs.
    pub fn cartesian(m: Manifold, s1: Sign, s2: Sign) -> ChartId {
        match m {
            Manifold::SphereTimesPlane => ChartId::Plane(SphereChart::Hemisphere(s1)),
            Manifold::SphereTimesSphere => {
                ChartId::Sphere(SphereChart::Hemisphere(s1), SphereChart::Hemisphere(s2))
            }
        }
    }

    pub fn cylindrical(m: Manifold) -> ChartId {
        match m {
            Manifold::SphereTimesPlane => ChartId::Plane(SphereChart::Cylindrical),
            Manifold::SphereTimesSphere => ChartId::Sphere(SphereChart::Cylindrical, SphereChart::Cylindrical),
        }
    }

    /// Coordinate index stored in each frame slot.
    pub fn slot_coords(self) -> [usize; 4] {
        let mut out = [0, 1, 2, 3];
        for f in 0..2 {
            if self.sphere(f) == Some(SphereChart::Cylindrical) {
                out[2 * f] = 2 * f + 1;
                out[2 * f + 1] = 2 * f;
            }
        }
        out
    }

    /// Coordinate names in chart order.
    pub fn coord_names(self) -> [String; 4] {
        let mut out: [String; 4] = Default::default();
        for f in 0..2 {
            let (a, b) = match self.sphere(f) {
                Some(SphereChart::Cylindrical) => ("theta", "z"),
                Some(SphereChart::Hemisphere(_)) => ("x", "y"),
                None => ("u", "v"),
            };
            let suffix = if self.manifold() == Manifold::SphereTimesSphere {
                (f + 1).to_string()
            } else {
                String::new()
            };
            out[2 * f] = format!("{a}{suffix}");
            out[2 * f + 1] = format!("{b}{suffix}");
        }
        out
    }

    /// Coframe labels in slot order; `b_factor` marks the factor carrying Z.
    pub fn frame_labels(self, b_factor: Option<usize>) -> [String; 4] {
        let names = self.coord_names();
        let slots = self.slot_coords();
        std::array::from_fn(|s| {
            let name = &names[slots[s]];
            let f = s / 2;
            if s % 2 == 0 && b_factor == Some(f) && self.sphere(f) == Some(SphereChart::Cylindrical) {
                format!("d{name}/{name}")
            } else {
                format!("d{name}")
            }
        })
    }

    /// Index of the slot holding a b-vector, if any.
    pub fn b_slot(self, b_factor: Option<usize>) -> Option<usize> {
        let f = b_factor?;
        (self.sphere(f) == Some(SphereChart::Cylindrical)).then_some(2 * f)
    }
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for ChartId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

fn sphere_domain_error(chart: SphereChart, c: [f64; 2]) -> Option<String> {
    if !c[0].is_finite() || !c[1].is_finite() {
        return Some("non-finite coordinate".into());
    }
    match chart {
        SphereChart::Cylindrical => {
            (c[1].abs() > 1.0 - CHART_MARGIN).then(|| format!("|z| = {} too close to a pole", c[1].abs()))
        }
        SphereChart::Hemisphere(_) => {
            let r2 = c[0] * c[0] + c[1] * c[1];
            (r2 > 1.0 - CHART_MARGIN).then(|| format!("x^2+y^2 = {r2} too close to the equator"))
        }
    }
}

/// `sqrt(1 - z^2)` computed without cancellation near the poles.
#[inline]
pub(crate) fn cos_lat(z: f64) -> f64 {
    ((1.0 - z) * (1.0 + z)).max(0.0).sqrt()
}

#[inline]
fn sphere_ambient(chart: SphereChart, c: [f64; 2]) -> [f64; 3] {
    match chart {
        SphereChart::Cylindrical => {
            let s = cos_lat(c[1]);
            let (sin, cos) = c[0].sin_cos();
            [s * cos, s * sin, c[1]]
        }
        SphereChart::Hemisphere(e) => {
            let r2 = c[0] * c[0] + c[1] * c[1];
            [c[0], c[1], e.value() * (1.0 - r2).max(0.0).sqrt()]
        }
    }
}

fn sphere_convert(from: SphereChart, to: SphereChart, c: [f64; 2]) -> Option<[f64; 2]> {
    let out = match (from, to) {
        (a, b) if a == b => c,
        (SphereChart::Cylindrical, SphereChart::Hemisphere(e)) => {
            if c[1] == 0.0 || Sign::of(c[1]) != e {
                return None;
            }
            let s = cos_lat(c[1]);
            let (sin, cos) = c[0].sin_cos();
            [s * cos, s * sin]
        }
        (SphereChart::Hemisphere(e), SphereChart::Cylindrical) => {
            let r2 = c[0] * c[0] + c[1] * c[1];
            let z = e.value() * (1.0 - r2).max(0.0).sqrt();
            [normalize_angle(c[1].atan2(c[0])), z]
        }
        _ => return None,
    };
    sphere_domain_error(to, out).is_none().then_some(out)
}

/// A point of S²×R² or S²×S² in a specific chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub chart: ChartId,
    pub coords: [f64; 4],
}

impl Point {
    /// Validates the chart domain and normalizes cylindrical angles.
    pub fn new(chart: ChartId, coords: [f64; 4]) -> Result<Point> {
        let mut coords = coords;
        for f in 0..2 {
            match chart.sphere(f) {
                Some(sc) => {
                    if let Some(reason) = sphere_domain_error(sc, [coords[2 * f], coords[2 * f + 1]]) {
                        return Err(Error::ChartDomain { chart: chart.label(), reason });
                    }
                    if sc == SphereChart::Cylindrical {
                        coords[2 * f] = normalize_angle(coords[2 * f]);
                    }
                }
                None => {
                    if !coords[2].is_finite() || !coords[3].is_finite() {
                        return Err(Error::ChartDomain {
                            chart: chart.label(),
                            reason: "non-finite plane coordinate".into(),
                        });
                    }
                }
            }
        }
        Ok(Point { chart, coords })
    }

    /// Rechecks the chart domain of an existing point.
    pub fn validate(&self) -> Result<()> {
        Point::new(self.chart, self.coords).map(|_| ())
    }

    /// Ambient coordinates `(x, y, z, u, v, 0)` or `(x1, y1, z1, x2, y2, z2)`.
    pub fn ambient(&self) -> [f64; 6] {
        let mut a = [0.0; 6];
        for f in 0..2 {
            let c = [self.coords[2 * f], self.coords[2 * f + 1]];
            match self.chart.sphere(f) {
                Some(sc) => a[3 * f..3 * f + 3].copy_from_slice(&sphere_ambient(sc, c)),
                None => {
                    a[3] = c[0];
                    a[4] = c[1];
                }
            }
        }
        a
    }

    /// Height coordinate of sphere factor `f`.
    pub fn height(&self, f: usize) -> f64 {
        self.ambient()[3 * f + 2]
    }

    /// Distance to another point in the same chart, wrapping angles.
    pub fn chart_distance(&self, other: &Point) -> f64 {
        let mut d2 = 0.0;
        for i in 0..4 {
            let mut d = self.coords[i] - other.coords[i];
            if i % 2 == 0 && self.chart.sphere(i / 2) == Some(SphereChart::Cylindrical) {
                d = (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            }
            d2 += d * d;
        }
        d2.sqrt()
    }
}

/// Expresses `p` in the `target` chart.
pub fn to_chart(p: &Point, target: ChartId) -> Result<Point> {
    let overlap = || Error::OutOfOverlap { target: target.label() };
    if p.chart.manifold() != target.manifold() {
        return Err(overlap());
    }
    let mut coords = p.coords;
    for f in 0..2 {
        if let (Some(from), Some(to)) = (p.chart.sphere(f), target.sphere(f)) {
            let c = sphere_convert(from, to, [p.coords[2 * f], p.coords[2 * f + 1]]).ok_or_else(overlap)?;
            coords[2 * f] = c[0];
            coords[2 * f + 1] = c[1];
        }
    }
    Point::new(target, coords).map_err(|_| overlap())
}

/// First and second derivatives of the ambient embedding of one chart.
pub(crate) struct Embedding {
    pub a: [f64; 6],
    /// `jac[k][i] = ∂a_k/∂q_i`.
    pub jac: [[f64; 4]; 6],
}

/// `hess[k][i][j] = ∂²a_k/∂q_i∂q_j`.
pub(crate) type EmbeddingHessian = [[[f64; 4]; 4]; 6];

pub(crate) fn embedding(chart: ChartId, q: &[f64; 4]) -> Embedding {
    let mut a = [0.0; 6];
    let mut jac = [[0.0; 4]; 6];
    for f in 0..2 {
        let (i, j) = (2 * f, 2 * f + 1);
        match chart.sphere(f) {
            Some(SphereChart::Cylindrical) => {
                let k = 3 * f;
                let (theta, z) = (q[i], q[j]);
                let s = cos_lat(z);
                let (sin, cos) = theta.sin_cos();
                a[k] = s * cos;
                a[k + 1] = s * sin;
                a[k + 2] = z;
                jac[k][i] = -s * sin;
                jac[k][j] = -z / s * cos;
                jac[k + 1][i] = s * cos;
                jac[k + 1][j] = -z / s * sin;
                jac[k + 2][j] = 1.0;
            }
            Some(SphereChart::Hemisphere(e)) => {
                let k = 3 * f;
                let (x, y) = (q[i], q[j]);
                let z = e.value() * (1.0 - x * x - y * y).max(0.0).sqrt();
                a[k] = x;
                a[k + 1] = y;
                a[k + 2] = z;
                jac[k][i] = 1.0;
                jac[k + 1][j] = 1.0;
                jac[k + 2][i] = -x / z;
                jac[k + 2][j] = -y / z;
            }
            None => {
                a[3] = q[i];
                a[4] = q[j];
                jac[3][i] = 1.0;
                jac[4][j] = 1.0;
            }
        }
    }
    Embedding { a, jac }
}

pub(crate) fn embedding_hessian(chart: ChartId, q: &[f64; 4]) -> EmbeddingHessian {
    let mut h = [[[0.0; 4]; 4]; 6];
    for f in 0..2 {
        let (i, j) = (2 * f, 2 * f + 1);
        let k = 3 * f;
        match chart.sphere(f) {
            Some(SphereChart::Cylindrical) => {
                let (theta, z) = (q[i], q[j]);
                let s = cos_lat(z);
                let (sin, cos) = theta.sin_cos();
                let s3 = s * s * s;
                h[k][i][i] = -s * cos;
                h[k][i][j] = z / s * sin;
                h[k][j][i] = z / s * sin;
                h[k][j][j] = -cos / s3;
                h[k + 1][i][i] = -s * sin;
                h[k + 1][i][j] = -z / s * cos;
                h[k + 1][j][i] = -z / s * cos;
                h[k + 1][j][j] = -sin / s3;
            }
            Some(SphereChart::Hemisphere(e)) => {
                let (x, y) = (q[i], q[j]);
                let z = e.value() * (1.0 - x * x - y * y).max(0.0).sqrt();
                let z3 = z * z * z;
                h[k + 2][i][i] = -(z * z + x * x) / z3;
                h[k + 2][j][j] = -(z * z + y * y) / z3;
                h[k + 2][i][j] = -x * y / z3;
                h[k + 2][j][i] = -x * y / z3;
            }
            None => {}
        }
    }
    h
}

/// Symplectic data of one factor: sphere factors carry `σ·dθ∧dz`
/// (times `1/z` when singular), the plane carries `ρ·du∧dv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FactorForm {
    Sphere { coeff: f64, singular: bool },
    Plane { coeff: f64 },
}

/// A (b-)symplectic form on one of the product manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BForm {
    pub factors: [FactorForm; 2],
}

impl BForm {
    /// Index of the singular sphere factor, if any.
    pub fn singular_factor(&self) -> Option<usize> {
        (0..2).find(|&f| matches!(self.factors[f], FactorForm::Sphere { singular: true, .. }))
    }

    /// Upper off-diagonal entry `Ω[2f][2f+1]` of each 2×2 block, in the
    /// chart's frame.
    pub(crate) fn block_coeffs(&self, chart: ChartId, q: &[f64; 4]) -> [f64; 2] {
        std::array::from_fn(|f| match (self.factors[f], chart.sphere(f)) {
            (FactorForm::Plane { coeff }, _) => coeff,
            (FactorForm::Sphere { coeff, .. }, Some(SphereChart::Cylindrical)) => -coeff,
            (FactorForm::Sphere { coeff, singular }, Some(SphereChart::Hemisphere(e))) => {
                let (x, y) = (q[2 * f], q[2 * f + 1]);
                let z2 = 1.0 - x * x - y * y;
                if singular {
                    coeff / z2
                } else {
                    coeff / (e.value() * z2.sqrt())
                }
            }
            (FactorForm::Sphere { .. }, None) => unreachable!("sphere form on the plane factor"),
        })
    }

    pub fn matrix_at(&self, p: &Point) -> Result<BFrameMatrix> {
        p.validate()?;
        let c = self.block_coeffs(p.chart, &p.coords);
        let mut m = Matrix4::zeros();
        for f in 0..2 {
            m[(2 * f, 2 * f + 1)] = c[f];
            m[(2 * f + 1, 2 * f)] = -c[f];
        }
        Ok(BFrameMatrix { entries: m, frame: p.chart.frame_labels(self.singular_factor()) })
    }
}

/// A 4×4 matrix together with the coframe labels of its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BFrameMatrix {
    pub entries: Matrix4<f64>,
    pub frame: [String; 4],
}
