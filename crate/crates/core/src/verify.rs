//! Integrability, derivative and chart-overlap verification suites.

use serde::Serialize;

use crate::exec::{map_slice, Execution};
use crate::geometry::{to_chart, ChartId, Point};
use crate::sampling::{random_point, sharded, SampleBox};
use crate::systems::{eval_df, eval_f, poisson_bracket, z_value, SystemDef};

pub const DEFAULT_SEED: u64 = 0x5eed_b5e1_0000_0001;
pub const POINTS_PER_CHART: usize = 1000;
pub const INVOLUTION_TOL: f64 = 1e-9;
pub const BROKEN_BRACKET_FLOOR: f64 = 1e-3;
pub const GRADIENT_STEP: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const OVERLAP_TOL: f64 = 1e-11;
/// Finite differences are taken only where `|z_value|` exceeds this, so
/// the step stays small against the distance to Z.
pub const FD_MIN_Z: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    /// Largest normalized error seen (or smallest bracket for the negative control).
    pub worst: f64,
    pub tolerance: f64,
    pub per_chart: Vec<ChartCount>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartCount {
    pub chart: ChartId,
    pub checked: usize,
    pub failures: usize,
}

fn chart_points(sys: &SystemDef, chart: ChartId, n: usize, seed: u64, exec: Execution) -> Vec<Point> {
    let salt = chart.label().bytes().fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64));
    crate::sampling::random_points(chart, n, seed ^ salt ^ (sys.id as u64) << 56, &SampleBox::default(), exec)
}

/// Normalized bracket `|{L,H}| / (1 + ‖dL‖‖dH‖)`.
pub fn normalized_bracket(sys: &SystemDef, p: &Point) -> f64 {
    let b = poisson_bracket(sys, p).expect("sampled point is valid");
    let df = eval_df(sys, p).expect("sampled point is valid");
    b.abs() / (1.0 + df.row(0).norm() * df.row(1).norm())
}

/// Involution on every chart. For the non-integrable variant the suite
/// instead checks that the bracket is large on at least 90% of points.
pub fn involution_suite(sys: &SystemDef, n: usize, seed: u64, exec: Execution) -> SuiteReport {
    let integrable = sys.id.is_integrable();
    let mut per_chart = Vec::new();
    let mut worst: f64 = if integrable { 0.0 } else { f64::INFINITY };
    for chart in ChartId::atlas(sys.manifold()) {
        let pts = chart_points(sys, chart, n, seed, exec);
        let vals = map_slice(&pts, exec, |p| {
            if integrable {
                normalized_bracket(sys, p)
            } else {
                poisson_bracket(sys, p).unwrap().abs()
            }
        });
        let failures = if integrable {
            vals.iter().filter(|&&v| v > INVOLUTION_TOL).count()
        } else {
            vals.iter().filter(|&&v| v <= BROKEN_BRACKET_FLOOR).count()
        };
        for v in vals {
            worst = if integrable { worst.max(v) } else { worst.min(v) };
        }
        per_chart.push(ChartCount { chart, checked: pts.len(), failures });
    }
    let checked: usize = per_chart.iter().map(|c| c.checked).sum();
    let failures: usize = per_chart.iter().map(|c| c.failures).sum();
    let passed = if integrable { failures == 0 } else { (failures as f64) <= 0.1 * checked as f64 };
    SuiteReport {
        suite: if integrable { "involution" } else { "non-involution" }.into(),
        passed,
        checked,
        failures,
        worst,
        tolerance: if integrable { INVOLUTION_TOL } else { BROKEN_BRACKET_FLOOR },
        per_chart,
    }
}

/// Central-difference coordinate gradients of `(L, H)` at `p`.
pub fn fd_gradients(sys: &SystemDef, p: &Point, h: f64) -> Option<[[f64; 4]; 2]> {
    let mut out = [[0.0; 4]; 2];
    for i in 0..4 {
        let mut qp = p.coords;
        let mut qm = p.coords;
        qp[i] += h;
        qm[i] -= h;
        let fp = eval_f(sys, &Point::new(p.chart, qp).ok()?).ok()?;
        let fm = eval_f(sys, &Point::new(p.chart, qm).ok()?).ok()?;
        out[0][i] = (fp.l - fm.l) / (2.0 * h);
        out[1][i] = (fp.h - fm.h) / (2.0 * h);
    }
    Some(out)
}

/// Coordinate-frame gradients reconstructed from the analytic b-frame ones.
pub fn analytic_coord_gradients(sys: &SystemDef, p: &Point) -> [[f64; 4]; 2] {
    let df = eval_df(sys, p).expect("valid point");
    let slots = p.chart.slot_coords();
    let b_slot = p.chart.b_slot(sys.singular_factor());
    let z = z_value(sys, p);
    let mut out = [[0.0; 4]; 2];
    for k in 0..2 {
        for s in 0..4 {
            out[k][slots[s]] = if Some(s) == b_slot { df[(k, s)] / z } else { df[(k, s)] };
        }
    }
    out
}

/// Largest `|fd − analytic| / (1 + ‖analytic‖∞)` over both components.
pub fn gradient_error(sys: &SystemDef, p: &Point) -> Option<f64> {
    let fd = fd_gradients(sys, p, GRADIENT_STEP)?;
    let an = analytic_coord_gradients(sys, p);
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let scale = 1.0 + an[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..4 {
            worst = worst.max((fd[k][i] - an[k][i]).abs() / scale);
        }
    }
    Some(worst)
}

/// Analytic differentials against finite differences away from Z.
pub fn gradient_suite(sys: &SystemDef, n: usize, seed: u64, exec: Execution) -> SuiteReport {
    let mut per_chart = Vec::new();
    let mut worst: f64 = 0.0;
    for chart in ChartId::atlas(sys.manifold()) {
        let pts: Vec<Point> = chart_points(sys, chart, n, seed.rotate_left(7), exec)
            .into_iter()
            .filter(|p| z_value(sys, p).abs() >= FD_MIN_Z)
            .collect();
        let errs = map_slice(&pts, exec, |p| gradient_error(sys, p).unwrap_or(f64::INFINITY));
        let failures = errs.iter().filter(|&&e| e > GRADIENT_TOL).count();
        worst = errs.iter().fold(worst, |m, &e| m.max(e));
        per_chart.push(ChartCount { chart, checked: pts.len(), failures });
    }
    let checked = per_chart.iter().map(|c| c.checked).sum();
    let failures: usize = per_chart.iter().map(|c| c.failures).sum();
    SuiteReport {
        suite: "gradient".into(),
        passed: failures == 0,
        checked,
        failures,
        worst,
        tolerance: GRADIENT_TOL,
        per_chart,
    }
}

/// `(L, H)` agree on chart overlaps. Points are drawn in the source chart
/// and kept when they also lie in the target chart's sample box.
pub fn overlap_suite(sys: &SystemDef, n: usize, seed: u64, exec: Execution) -> SuiteReport {
    let atlas = ChartId::atlas(sys.manifold());
    let b = SampleBox::default();
    let mut per_chart = Vec::new();
    let mut worst: f64 = 0.0;
    for &from in &atlas {
        for &to in &atlas {
            if from == to {
                continue;
            }
            let probe = crate::sampling::random_points(from, 64, seed, &b, Execution::Sequential);
            if !probe.iter().any(|p| in_box(&to_chart(p, to).ok(), &b)) {
                continue;
            }
            // rejection sampling, bounded so disjoint pairs terminate
            let pairs: Vec<(Point, Point)> = sharded(n * 64, seed ^ from.label().len() as u64 ^ (to.label().len() as u64) << 8, exec, |rng| {
                let p = random_point(from, &b, rng);
                to_chart(&p, to).ok().filter(|q| in_box(&Some(*q), &b)).map(|q| (p, q))
            })
            .into_iter()
            .flatten()
            .take(n)
            .collect();
            let errs = map_slice(&pairs, exec, |(p, q)| match (eval_f(sys, p), eval_f(sys, q)) {
                (Ok(a), Ok(c)) => ((a.l - c.l).abs() / (1.0 + a.l.abs())).max((a.h - c.h).abs() / (1.0 + a.h.abs())),
                (Err(_), Err(_)) => 0.0,
                _ => f64::INFINITY,
            });
            let failures = errs.iter().filter(|&&e| e > OVERLAP_TOL).count();
            worst = errs.iter().fold(worst, |m, &e| m.max(e));
            per_chart.push(ChartCount { chart: from, checked: pairs.len(), failures });
        }
    }
    let checked = per_chart.iter().map(|c| c.checked).sum();
    let failures: usize = per_chart.iter().map(|c| c.failures).sum();
    SuiteReport {
        suite: "overlap".into(),
        passed: failures == 0,
        checked,
        failures,
        worst,
        tolerance: OVERLAP_TOL,
        per_chart,
    }
}

fn in_box(p: &Option<Point>, b: &SampleBox) -> bool {
    let Some(p) = p else { return false };
    let a = p.ambient();
    (0..2).all(|f| match p.chart.sphere(f) {
        Some(crate::geometry::SphereChart::Cylindrical) => a[3 * f + 2].abs() <= 1.0 - b.margin,
        Some(_) => a[3 * f].hypot(a[3 * f + 1]) <= 1.0 - b.margin,
        None => true,
    })
}

/// All three suites for one system.
pub fn verify_system(sys: &SystemDef, seed: u64, exec: Execution) -> Vec<SuiteReport> {
    vec![
        involution_suite(sys, POINTS_PER_CHART, seed, exec),
        gradient_suite(sys, POINTS_PER_CHART, seed, exec),
        overlap_suite(sys, POINTS_PER_CHART, seed, exec),
    ]
}
