//! The catalogue of coupled spin-oscillator and coupled angular momenta
//! systems, classical and b-symplectic, with closed-form derivatives.
//!
//! Every component of a momentum map is a b-function `c·log|z_f| + g`
//! where `g` is a quadratic polynomial in the ambient coordinates
//! `(x, y, z, u, v, 0)` or `(x1, y1, z1, x2, y2, z2)`. Derivatives in a
//! chart follow from the chain rule through the analytic chart embedding,
//! and the `dz/z` component of a log term is its coefficient `c`, so
//! differentials stay finite on the singular hypersurface.
//!
//! Hamiltonian vector fields are `X_f = Ω⁻¹·df` in the b-frame. With
//! this convention the reversed spin-oscillator has
//! `X_L = ∂θ − v∂u + u∂v`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2x4, Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{embedding, embedding_hessian, BForm, ChartId, FactorForm, Manifold, Point, SphereChart};

/// Residual below which a point counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemId {
    Cso,
    BCso,
    BCsoReversed,
    Cam,
    Cam1,
    Cam2,
    Cam3,
    /// Non-integrable variant, a negative control only.
    CamBroken,
}

impl SystemId {
    pub const ALL: [SystemId; 8] = [
        SystemId::Cso,
        SystemId::BCso,
        SystemId::BCsoReversed,
        SystemId::Cam,
        SystemId::Cam1,
        SystemId::Cam2,
        SystemId::Cam3,
        SystemId::CamBroken,
    ];

    /// The seven integrable systems.
    pub const INTEGRABLE: [SystemId; 7] = [
        SystemId::Cso,
        SystemId::BCso,
        SystemId::BCsoReversed,
        SystemId::Cam,
        SystemId::Cam1,
        SystemId::Cam2,
        SystemId::Cam3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Cso => "cso",
            SystemId::BCso => "bcso",
            SystemId::BCsoReversed => "bcso-reversed",
            SystemId::Cam => "cam",
            SystemId::Cam1 => "cam1",
            SystemId::Cam2 => "cam2",
            SystemId::Cam3 => "cam3",
            SystemId::CamBroken => "cambroken",
        }
    }

    pub fn manifold(self) -> Manifold {
        match self {
            SystemId::Cso | SystemId::BCso | SystemId::BCsoReversed => Manifold::SphereTimesPlane,
            _ => Manifold::SphereTimesSphere,
        }
    }

    pub fn is_spin_oscillator(self) -> bool {
        self.manifold() == Manifold::SphereTimesPlane
    }

    pub fn is_b_system(self) -> bool {
        !matches!(self, SystemId::Cso | SystemId::Cam)
    }

    pub fn is_integrable(self) -> bool {
        self != SystemId::CamBroken
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<SystemId> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == key)
            .ok_or_else(|| Error::BadParams(format!("unknown system '{s}'")))
    }
}

impl Serialize for SystemId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Parameters of both families; each system reads the ones it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams {
    pub rho1: f64,
    pub rho2: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub t: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams { rho1: 1.0, rho2: 1.0, r1: 1.0, r2: 2.0, t: 0.5 }
    }
}

impl SystemParams {
    pub fn spin_oscillator(rho1: f64, rho2: f64) -> Self {
        SystemParams { rho1, rho2, ..Default::default() }
    }

    pub fn angular_momenta(r1: f64, r2: f64, t: f64) -> Self {
        SystemParams { r1, r2, t, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Observable {
    L,
    H,
}

impl Observable {
    fn index(self) -> usize {
        match self {
            Observable::L => 0,
            Observable::H => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumValue {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// `c + g·a + ½ aᵀQa` in ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Quadratic {
    c: f64,
    g: [f64; 6],
    q: [[f64; 6]; 6],
}

impl Quadratic {
    fn zero() -> Self {
        Quadratic { c: 0.0, g: [0.0; 6], q: [[0.0; 6]; 6] }
    }

    fn linear(mut self, k: usize, c: f64) -> Self {
        self.g[k] += c;
        self
    }

    /// Adds `c·a_k·a_l`.
    fn product(mut self, k: usize, l: usize, c: f64) -> Self {
        if k == l {
            self.q[k][k] += 2.0 * c;
        } else {
            self.q[k][l] += c;
            self.q[l][k] += c;
        }
        self
    }

    fn value(&self, a: &[f64; 6]) -> f64 {
        let mut v = self.c;
        for k in 0..6 {
            let qa: f64 = (0..6).map(|l| self.q[k][l] * a[l]).sum();
            v += a[k] * (self.g[k] + 0.5 * qa);
        }
        v
    }

    fn gradient(&self, a: &[f64; 6]) -> [f64; 6] {
        std::array::from_fn(|k| self.g[k] + (0..6).map(|l| self.q[k][l] * a[l]).sum::<f64>())
    }
}

/// `coeff·log|z_factor| + poly`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BFunction {
    log: Option<(usize, f64)>,
    poly: Quadratic,
}

impl BFunction {
    fn smooth(poly: Quadratic) -> Self {
        BFunction { log: None, poly }
    }

    fn with_log(factor: usize, coeff: f64, poly: Quadratic) -> Self {
        BFunction { log: Some((factor, coeff)), poly }
    }
}

/// One of the catalogued systems with fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDef {
    pub id: SystemId,
    pub params: SystemParams,
    pub form: BForm,
    fns: [BFunction; 2],
}

fn sphere(coeff: f64, singular: bool) -> FactorForm {
    FactorForm::Sphere { coeff, singular }
}

/// Builds a system after validating the parameters its family uses.
pub fn make_system(id: SystemId, params: SystemParams) -> Result<SystemDef> {
    let p = params;
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if id.is_spin_oscillator() {
        if !positive(p.rho1) || !positive(p.rho2) {
            return Err(Error::BadParams(format!("rho1 = {}, rho2 = {} must be positive", p.rho1, p.rho2)));
        }
    } else {
        if !positive(p.r1) || !positive(p.r2) || p.r1 >= p.r2 {
            return Err(Error::BadParams(format!("need 0 < R1 < R2, got R1 = {}, R2 = {}", p.r1, p.r2)));
        }
        if !(0.0..=1.0).contains(&p.t) {
            return Err(Error::BadParams(format!("t = {} outside [0, 1]", p.t)));
        }
    }

    // ambient indices
    const X: usize = 0;
    const Y: usize = 1;
    const Z: usize = 2;
    const U: usize = 3;
    const V: usize = 4;
    const X2: usize = 3;
    const Y2: usize = 4;
    const Z2: usize = 5;

    let oscillator = Quadratic::zero().product(U, U, 0.5 * p.rho2).product(V, V, 0.5 * p.rho2);
    let spin_coupling = BFunction::smooth(Quadratic::zero().product(X, U, 0.5).product(Y, V, 0.5));
    let dot = |q: Quadratic, t: f64| q.product(X, X2, t).product(Y, Y2, t).product(Z, Z2, t);
    let (r1, r2, t) = (p.r1, p.r2, p.t);

    let (form, l, h) = match id {
        SystemId::Cso => (
            [sphere(-p.rho1, false), FactorForm::Plane { coeff: p.rho2 }],
            BFunction::smooth(oscillator.linear(Z, p.rho1)),
            spin_coupling,
        ),
        SystemId::BCso => (
            [sphere(-p.rho1, true), FactorForm::Plane { coeff: p.rho2 }],
            BFunction::with_log(0, p.rho1, oscillator),
            spin_coupling,
        ),
        SystemId::BCsoReversed => (
            [sphere(p.rho1, true), FactorForm::Plane { coeff: p.rho2 }],
            BFunction::with_log(0, -p.rho1, oscillator),
            spin_coupling,
        ),
        SystemId::Cam => (
            [sphere(-r1, false), sphere(-r2, false)],
            BFunction::smooth(Quadratic::zero().linear(Z, r1).linear(Z2, r2)),
            BFunction::smooth(dot(Quadratic::zero().linear(Z, 1.0 - t), t)),
        ),
        SystemId::Cam1 => (
            [sphere(-r1, true), sphere(-r2, false)],
            BFunction::with_log(0, r1, Quadratic::zero().linear(Z2, r2)),
            BFunction::smooth(dot(Quadratic::zero().linear(Z, 1.0 - t), t)),
        ),
        SystemId::Cam2 => (
            [sphere(-r1, true), sphere(-r2, false)],
            BFunction::with_log(0, r1, Quadratic::zero().linear(Z2, r2)),
            BFunction::with_log(0, 1.0 - t, dot(Quadratic::zero(), t)),
        ),
        SystemId::Cam3 => (
            [sphere(-r1, false), sphere(-r2, true)],
            BFunction::with_log(1, r2, Quadratic::zero().linear(Z, r1)),
            BFunction::smooth(dot(Quadratic::zero().linear(Z, 1.0 - t), t)),
        ),
        SystemId::CamBroken => (
            [sphere(-r1, true), sphere(-r2, false)],
            BFunction::smooth(Quadratic::zero().linear(Z, r1).linear(Z2, r2)),
            BFunction::with_log(0, 1.0 - t, dot(Quadratic::zero(), t)),
        ),
    };
    Ok(SystemDef { id, params, form: BForm { factors: form }, fns: [l, h] })
}

/// Coordinate-frame and b-frame gradients of both components.
pub(crate) struct LocalGradients {
    /// Gradients in the chart's coordinate frame (log terms included).
    pub coord: [[f64; 4]; 2],
    /// Gradients in the b-frame, slot order.
    pub frame: [[f64; 4]; 2],
}

impl SystemDef {
    pub fn manifold(&self) -> Manifold {
        self.id.manifold()
    }

    pub fn singular_factor(&self) -> Option<usize> {
        self.form.singular_factor()
    }

    fn log_value(chart: ChartId, q: &[f64; 4], a: &[f64; 6], factor: usize, c: f64) -> f64 {
        match chart.sphere(factor) {
            Some(SphereChart::Cylindrical) => c * a[3 * factor + 2].abs().ln(),
            _ => {
                let (x, y) = (q[2 * factor], q[2 * factor + 1]);
                c * 0.5 * (-(x * x + y * y)).ln_1p()
            }
        }
    }

    /// `(L, H)` at raw chart coordinates, without domain checks.
    pub(crate) fn eval_raw(&self, chart: ChartId, q: &[f64; 4]) -> MomentumValue {
        let a = crate::geometry::Point { chart, coords: *q }.ambient();
        let v: [f64; 2] = std::array::from_fn(|k| {
            let f = &self.fns[k];
            let mut v = f.poly.value(&a);
            if let Some((factor, c)) = f.log {
                v += Self::log_value(chart, q, &a, factor, c);
            }
            v
        });
        MomentumValue { l: v[0], h: v[1] }
    }

    /// True when some component has a log term and the point lies on Z.
    fn touches_log_zero(&self, p: &Point) -> bool {
        self.fns.iter().any(|f| match f.log {
            Some((factor, _)) => p.height(factor) == 0.0,
            None => false,
        })
    }

    pub(crate) fn gradients_raw(&self, chart: ChartId, q: &[f64; 4]) -> LocalGradients {
        let emb = embedding(chart, q);
        let bf = self.singular_factor();
        let b_slot = chart.b_slot(bf);
        let slots = chart.slot_coords();
        let z = bf.map_or(1.0, |f| emb.a[3 * f + 2]);
        let mut coord = [[0.0; 4]; 2];
        let mut frame = [[0.0; 4]; 2];
        for k in 0..2 {
            let f = &self.fns[k];
            let g = f.poly.gradient(&emb.a);
            let mut smooth = [0.0; 4];
            for (i, s) in smooth.iter_mut().enumerate() {
                *s = (0..6).map(|m| g[m] * emb.jac[m][i]).sum();
            }
            let mut log_coord = [0.0; 4];
            let mut log_b = 0.0;
            if let Some((factor, c)) = f.log {
                match chart.sphere(factor) {
                    Some(SphereChart::Cylindrical) => {
                        log_coord[2 * factor + 1] = c / emb.a[3 * factor + 2];
                        log_b = c;
                    }
                    _ => {
                        let (x, y) = (q[2 * factor], q[2 * factor + 1]);
                        let w = 1.0 - x * x - y * y;
                        log_coord[2 * factor] = -c * x / w;
                        log_coord[2 * factor + 1] = -c * y / w;
                    }
                }
            }
            for i in 0..4 {
                coord[k][i] = smooth[i] + log_coord[i];
            }
            for s in 0..4 {
                let i = slots[s];
                frame[k][s] = if Some(s) == b_slot { z * smooth[i] + log_b } else { smooth[i] + log_coord[i] };
            }
        }
        LocalGradients { coord, frame }
    }

    /// Coordinate-frame Hessians of `L` and `H` in any chart.
    pub(crate) fn coord_hessians(&self, chart: ChartId, q: &[f64; 4]) -> [Matrix4<f64>; 2] {
        let emb = embedding(chart, q);
        let eh = embedding_hessian(chart, q);
        std::array::from_fn(|k| {
            let f = &self.fns[k];
            let g = f.poly.gradient(&emb.a);
            let mut h = Matrix4::zeros();
            for i in 0..4 {
                for j in i..4 {
                    let mut v = 0.0;
                    for m in 0..6 {
                        v += g[m] * eh[m][i][j];
                        if emb.jac[m][i] != 0.0 {
                            let qj: f64 = (0..6).map(|n| f.poly.q[m][n] * emb.jac[n][j]).sum();
                            v += emb.jac[m][i] * qj;
                        }
                    }
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
            if let Some((factor, c)) = f.log {
                let (i, j) = (2 * factor, 2 * factor + 1);
                match chart.sphere(factor) {
                    Some(SphereChart::Cylindrical) => {
                        let z = emb.a[3 * factor + 2];
                        h[(j, j)] -= c / (z * z);
                    }
                    _ => {
                        let (x, y) = (q[i], q[j]);
                        let w = 1.0 - x * x - y * y;
                        let w2 = w * w;
                        h[(i, i)] -= c * (w + 2.0 * x * x) / w2;
                        h[(j, j)] -= c * (w + 2.0 * y * y) / w2;
                        h[(i, j)] -= c * 2.0 * x * y / w2;
                        h[(j, i)] -= c * 2.0 * x * y / w2;
                    }
                }
            }
            h
        })
    }

    /// Converts frame-slot field components into coordinate velocities.
    pub(crate) fn field_raw(&self, chart: ChartId, q: &[f64; 4], df: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
        let a = self.form.block_coeffs(chart, q);
        let mut x = [0.0; 4];
        for f in 0..2 {
            x[2 * f] = -df[2 * f + 1] / a[f];
            x[2 * f + 1] = df[2 * f] / a[f];
        }
        let slots = chart.slot_coords();
        let b_slot = chart.b_slot(self.singular_factor());
        let z = self.singular_factor().map_or(1.0, |f| crate::geometry::Point { chart, coords: *q }.height(f));
        let mut qdot = [0.0; 4];
        for s in 0..4 {
            qdot[slots[s]] = if Some(s) == b_slot { z * x[s] } else { x[s] };
        }
        (x, qdot)
    }

    /// Coordinate velocity of the flow of `which`, without domain checks.
    pub(crate) fn velocity_raw(&self, chart: ChartId, q: &[f64; 4], which: Observable) -> [f64; 4] {
        let g = self.gradients_raw(chart, q);
        self.field_raw(chart, q, &g.frame[which.index()]).1
    }
}

/// Canonical defining function of Z; 1 for the symplectic systems.
pub fn z_value(sys: &SystemDef, p: &Point) -> f64 {
    sys.singular_factor().map_or(1.0, |f| p.height(f))
}

/// Evaluates the momentum map.
pub fn eval_f(sys: &SystemDef, p: &Point) -> Result<MomentumValue> {
    p.validate()?;
    if sys.touches_log_zero(p) {
        return Err(Error::OnSingularHypersurface);
    }
    Ok(sys.eval_raw(p.chart, &p.coords))
}

/// `dL` and `dH` as rows, in b-frame slot order.
pub fn eval_df(sys: &SystemDef, p: &Point) -> Result<Matrix2x4<f64>> {
    p.validate()?;
    let g = sys.gradients_raw(p.chart, &p.coords);
    Ok(Matrix2x4::from_fn(|k, s| g.frame[k][s]))
}

/// Hessians of `L` and `H` at a fixed point given in a Cartesian chart.
pub fn eval_hessians(sys: &SystemDef, p: &Point) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
    p.validate()?;
    if !p.chart.is_cartesian() {
        return Err(Error::ChartDomain {
            chart: p.chart.label(),
            reason: "Hessians are taken in Cartesian charts".into(),
        });
    }
    let residual = eval_df(sys, p)?.norm();
    if residual > FIXED_POINT_TOL {
        return Err(Error::NotFixedPoint { residual, tolerance: FIXED_POINT_TOL });
    }
    let [hl, hh] = sys.coord_hessians(p.chart, &p.coords);
    Ok((hl, hh))
}

/// `X_f = Ω⁻¹·df` in b-frame slot order.
pub fn hamiltonian_field(sys: &SystemDef, p: &Point, which: Observable) -> Result<Vector4<f64>> {
    p.validate()?;
    let g = sys.gradients_raw(p.chart, &p.coords);
    let (x, _) = sys.field_raw(p.chart, &p.coords, &g.frame[which.index()]);
    Ok(Vector4::from(x))
}

/// `{L, H} = dH(X_L)`.
pub fn poisson_bracket(sys: &SystemDef, p: &Point) -> Result<f64> {
    p.validate()?;
    let g = sys.gradients_raw(p.chart, &p.coords);
    let (x, _) = sys.field_raw(p.chart, &p.coords, &g.frame[0]);
    Ok((0..4).map(|s| g.frame[1][s] * x[s]).sum())
}
