//! Integration of Hamiltonian flows in chart coordinates with automatic
//! chart switching, a guard against the singular hypersurface, and
//! first-integral drift tracking.

use std::f64::consts::TAU;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{to_chart, ChartId, Point, SphereChart};
use crate::systems::{eval_f, hamiltonian_field, z_value, Observable, SystemDef, SystemId, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for RK45.
    pub step: f64,
    /// Mixed absolute/relative local error target of RK45.
    pub tolerance: f64,
    /// Integration stops once `|z_value|` drops below this.
    pub z_guard: f64,
    /// A sphere factor changes chart within this distance of its chart boundary.
    pub chart_switch_margin: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45,
            step: 1e-2,
            tolerance: 1e-10,
            z_guard: 1e-8,
            chart_switch_margin: 0.05,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        IntegratorConfig { method: Method::Rk4, step, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::BadParams(format!("step {} must be positive", self.step)));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(Error::BadParams(format!("tolerance {} outside (0, 1e-3]", self.tolerance)));
        }
        if !(self.z_guard >= 0.0 && self.chart_switch_margin > 0.0 && self.chart_switch_margin < 0.5) {
            return Err(Error::BadParams("invalid guard or chart-switch margin".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum Termination {
    Completed,
    /// Truncated when `|z_value|` fell below the guard.
    NearSingularHypersurface { t: f64, z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowState {
    pub t: f64,
    pub point: Point,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrajectory {
    pub system: SystemId,
    pub params: SystemParams,
    pub which: Observable,
    pub config: IntegratorConfig,
    pub states: Vec<FlowState>,
    pub min_abs_z: f64,
    pub termination: Termination,
}

impl FlowTrajectory {
    pub fn end(&self) -> &FlowState {
        self.states.last().expect("trajectory holds its initial state")
    }

    /// `(|ΔL|, |ΔH|)` of every state against the initial one.
    pub fn drift(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let s0 = self.states[0];
        self.states.iter().map(move |s| ((s.l - s0.l).abs(), (s.h - s0.h).abs()))
    }
}

/// Maxima of the first-integral drift.
pub fn conservation_report(traj: &FlowTrajectory) -> (f64, f64) {
    traj.drift().fold((0.0, 0.0), |(a, b), (l, h)| (a.max(l), b.max(h)))
}

fn axpy(q: &[f64; 4], h: f64, k: &[[f64; 4]], c: &[f64]) -> [f64; 4] {
    std::array::from_fn(|i| q[i] + h * k.iter().zip(c).map(|(kj, cj)| cj * kj[i]).sum::<f64>())
}

fn rk4_step(f: &impl Fn(&[f64; 4]) -> [f64; 4], q: &[f64; 4], h: f64) -> [f64; 4] {
    let k1 = f(q);
    let k2 = f(&axpy(q, 0.5 * h, &[k1], &[1.0]));
    let k3 = f(&axpy(q, 0.5 * h, &[k2], &[1.0]));
    let k4 = f(&axpy(q, h, &[k3], &[1.0]));
    axpy(q, h, &[k1, k2, k3, k4], &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0])
}

// Dormand–Prince 5(4) tableau
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// One Dormand–Prince trial step: fifth-order solution and scaled error.
/// Coordinate `log_coord`, if any, enters logarithms and gets purely
/// relative error control.
fn dp_step(
    f: &impl Fn(&[f64; 4]) -> [f64; 4],
    q: &[f64; 4],
    h: f64,
    tol: f64,
    log_coord: Option<usize>,
) -> ([f64; 4], f64) {
    let mut k: Vec<[f64; 4]> = Vec::with_capacity(7);
    k.push(f(q));
    for a in DP_A {
        let y = axpy(q, h, &k, a);
        k.push(f(&y));
    }
    // the last stage is evaluated at the fifth-order solution
    let y = axpy(q, h, &k[..6], DP_A[5]);
    let err = (0..4)
        .map(|i| {
            let e = h * (0..7).map(|j| DP_E[j] * k[j][i]).sum::<f64>();
            let size = q[i].abs().max(y[i].abs());
            let scale = tol * if Some(i) == log_coord { size } else { 1.0 + size };
            (e / scale).abs()
        })
        .fold(0.0, f64::max);
    (y, err)
}

/// Chart for the next step: a sphere factor within `margin` of its chart
/// boundary moves to the chart preferred at its height.
fn next_chart(p: &Point, margin: f64) -> ChartId {
    let mut charts = [p.chart.sphere(0), p.chart.sphere(1)];
    for (f, slot) in charts.iter_mut().enumerate() {
        if let Some(sc) = *slot {
            let (a, b) = (p.coords[2 * f], p.coords[2 * f + 1]);
            let near = match sc {
                SphereChart::Cylindrical => 1.0 - b.abs() < margin,
                SphereChart::Hemisphere(_) => 1.0 - a.hypot(b) < margin,
            };
            if near {
                *slot = Some(SphereChart::preferred_at(p.height(f)));
            }
        }
    }
    match p.chart {
        ChartId::Plane(_) => ChartId::Plane(charts[0].expect("sphere factor")),
        ChartId::Sphere(..) => ChartId::Sphere(charts[0].expect("sphere factor"), charts[1].expect("sphere factor")),
    }
}

fn state(sys: &SystemDef, t: f64, p: Point) -> Result<FlowState> {
    let v = eval_f(sys, &p)?;
    Ok(FlowState { t, point: p, l: v.l, h: v.h })
}

/// Integrates `ẋ = X_which(x)` from `p0` up to time `t_max`.
pub fn integrate(
    sys: &SystemDef,
    p0: &Point,
    which: Observable,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowTrajectory> {
    cfg.validate()?;
    p0.validate()?;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::BadParams(format!("t_max = {t_max} must be finite and non-negative")));
    }
    let z0 = z_value(sys, p0).abs();
    if z0 < cfg.z_guard.max(f64::MIN_POSITIVE) {
        return Err(Error::OnSingularHypersurface);
    }
    let mut traj = FlowTrajectory {
        system: sys.id,
        params: sys.params,
        which,
        config: *cfg,
        states: vec![state(sys, 0.0, *p0)?],
        min_abs_z: z0,
        termination: Termination::Completed,
    };
    let mut p = *p0;
    let mut t = 0.0;
    let mut h = cfg.step.min(t_max.max(f64::MIN_POSITIVE));
    let mut steps = 0;
    while t < t_max {
        if steps >= cfg.max_steps {
            return Err(Error::StepFailure { t });
        }
        steps += 1;
        let chart = next_chart(&p, cfg.chart_switch_margin);
        if chart != p.chart {
            p = to_chart(&p, chart)?;
        }
        let field = |q: &[f64; 4]| sys.velocity_raw(chart, q, which);
        let log_coord =
            sys.singular_factor().filter(|&f| chart.sphere(f) == Some(SphereChart::Cylindrical)).map(|f| 2 * f + 1);
        let h_try = h.min(t_max - t);
        let (q_new, accepted, h_next) = match cfg.method {
            Method::Rk4 => (rk4_step(&field, &p.coords, h_try), true, h),
            Method::Rk45 => {
                let (y, err) = dp_step(&field, &p.coords, h_try, cfg.tolerance, log_coord);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let ok = err <= 1.0 && y.iter().all(|c| c.is_finite());
                (y, ok, h_try * if ok { factor } else { factor.min(1.0) })
            }
        };
        // a trial leaving the chart is retried with a smaller step
        let next = if accepted { Point::new(chart, q_new).ok() } else { None };
        let Some(next) = next else {
            h = if cfg.method == Method::Rk4 {
                return Err(Error::StepFailure { t });
            } else {
                h_next.min(0.5 * h_try)
            };
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StepFailure { t });
            }
            continue;
        };
        t = if h_try == t_max - t { t_max } else { t + h_try };
        h = h_next;
        p = next;
        let z = z_value(sys, &p).abs();
        traj.min_abs_z = traj.min_abs_z.min(z);
        if z < cfg.z_guard {
            traj.termination = Termination::NearSingularHypersurface { t, z };
            break;
        }
        traj.states.push(state(sys, t, p)?);
    }
    Ok(traj)
}

/// Return distance of the time-2π flow of `L` to its starting point.
pub fn period_check(sys: &SystemDef, p0: &Point) -> Result<f64> {
    let x = hamiltonian_field(sys, p0, Observable::L)?;
    if x.norm() <= 1e-9 {
        return Err(Error::NotApplicable("the L-orbit of a fixed point is a point".into()));
    }
    let traj = integrate(sys, p0, Observable::L, TAU, &IntegratorConfig::default())?;
    if traj.termination != Termination::Completed {
        return Err(Error::OnSingularHypersurface);
    }
    let end = traj.end().point;
    match to_chart(&end, p0.chart) {
        Ok(e) => Ok(e.chart_distance(p0)),
        Err(_) => Ok(to_chart(p0, end.chart)?.chart_distance(&end)),
    }
}

/// Writes `t,chart,c1,c2,c3,c4,L,H` rows with 17 significant digits.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &FlowTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = crate::imaging::io_err;
    w.write_record(["t", "chart", "c1", "c2", "c3", "c4", "L", "H"]).map_err(io)?;
    for s in &traj.states {
        let mut row = vec![format!("{:.16e}", s.t), s.point.chart.label()];
        row.extend(s.point.coords.iter().map(|c| format!("{c:.16e}")));
        row.push(format!("{:.16e}", s.l));
        row.push(format!("{:.16e}", s.h));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Manifold, Sign};
    use crate::systems::make_system;
    use std::f64::consts::PI;

    fn reversed() -> SystemDef {
        make_system(SystemId::BCsoReversed, SystemParams::spin_oscillator(1.0, 1.0)).unwrap()
    }

    fn start() -> Point {
        Point::new(ChartId::cylindrical(Manifold::SphereTimesPlane), [0.0, 0.5, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn reversed_rotation_endpoint() {
        let traj = integrate(&reversed(), &start(), Observable::L, PI, &IntegratorConfig::default()).unwrap();
        let e = traj.end();
        assert_eq!(e.t, PI);
        let want = Point::new(start().chart, [PI, 0.5, -1.0, 0.0]).unwrap();
        assert!(e.point.chart_distance(&want) < 1e-8, "{:?}", e.point);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let sys = reversed();
        let exact = Point::new(start().chart, [PI, 0.5, -1.0, 0.0]).unwrap();
        let err = |h: f64| {
            let traj = integrate(&sys, &start(), Observable::L, PI, &IntegratorConfig::rk4(h)).unwrap();
            traj.end().point.chart_distance(&exact)
        };
        let ratio = err(PI / 20.0) / err(PI / 40.0);
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bcso_l_flow_conserves() {
        let sys = make_system(SystemId::BCso, SystemParams::default()).unwrap();
        let traj = integrate(&sys, &start(), Observable::L, TAU, &IntegratorConfig::default()).unwrap();
        let (dl, dh) = conservation_report(&traj);
        assert!(dl <= 1e-8 && dh <= 1e-8, "{dl:e} {dh:e}");
    }

    #[test]
    fn cam2_h_flow_conserves() {
        let sys = make_system(SystemId::Cam2, SystemParams::angular_momenta(1.0, 2.0, 0.5)).unwrap();
        let p = Point::new(ChartId::cylindrical(Manifold::SphereTimesSphere), [0.3, 0.4, 2.0, -0.6]).unwrap();
        let traj = integrate(&sys, &p, Observable::H, 10.0, &IntegratorConfig::default()).unwrap();
        let (dl, dh) = conservation_report(&traj);
        assert!(dl <= 1e-6 && dh <= 1e-6, "{dl:e} {dh:e}");
    }

    #[test]
    fn zero_length_trajectory() {
        let traj = integrate(&reversed(), &start(), Observable::H, 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(conservation_report(&traj), (0.0, 0.0));
    }

    #[test]
    fn near_z_stays_finite() {
        let sys = make_system(SystemId::BCso, SystemParams::default()).unwrap();
        let p = Point::new(ChartId::cylindrical(Manifold::SphereTimesPlane), [0.2, 1e-5, 1.5, -0.5]).unwrap();
        let traj = integrate(&sys, &p, Observable::H, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(traj.states.iter().all(|s| s.l.is_finite() && s.h.is_finite() && s.point.coords.iter().all(|c| c.is_finite())));
        if traj.termination == Termination::Completed {
            let (dl, dh) = conservation_report(&traj);
            assert!(dl <= 1e-6 && dh <= 1e-6);
        }
    }

    #[test]
    fn flow_switches_charts_through_the_pole() {
        // H of the classical CSO moves the spin across the pole
        let sys = make_system(SystemId::Cso, SystemParams::default()).unwrap();
        let p = Point::new(ChartId::cylindrical(Manifold::SphereTimesPlane), [0.0, 0.9, 0.0, 2.0]).unwrap();
        let traj = integrate(&sys, &p, Observable::H, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(traj.states.iter().any(|s| s.point.chart.is_cartesian()));
        let (dl, dh) = conservation_report(&traj);
        assert!(dl <= 1e-6 && dh <= 1e-6, "{dl:e} {dh:e}");
    }

    #[test]
    fn period_rejects_fixed_points() {
        let sys = make_system(SystemId::BCso, SystemParams::default()).unwrap();
        let pole = Point::new(ChartId::cartesian(Manifold::SphereTimesPlane, Sign::Plus, Sign::Plus), [0.0; 4]).unwrap();
        assert!(matches!(period_check(&sys, &pole), Err(Error::NotApplicable(_))));
        assert!(period_check(&sys, &start()).unwrap() < 1e-6);
    }

    #[test]
    fn trajectory_csv_header() {
        let traj = integrate(&reversed(), &start(), Observable::L, 0.1, &IntegratorConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,chart,c1,c2,c3,c4,L,H\n"));
        assert_eq!(text.lines().count(), traj.states.len() + 1);
    }
}
