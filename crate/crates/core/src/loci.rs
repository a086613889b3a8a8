//! Rank of the momentum map differential and rank-1 singular loci.

use std::collections::HashMap;

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_range, map_slice, Execution};
use crate::geometry::{ChartId, Manifold, Point, SphereChart, CHART_MARGIN};
use crate::systems::{eval_df, SystemDef, SystemParams};

/// Singular values below this fraction of `σ₁ + 1` count as zero.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankResult {
    pub rank: u8,
    pub singular_values: [f64; 2],
    /// Multiplier with `μ·dL + dH ≈ 0`, when the rank is 1 and `dL ≠ 0`.
    pub mu: Option<f64>,
}

/// Rank of `dF` from the singular values of its 2×4 b-frame matrix.
pub fn rank_at(sys: &SystemDef, p: &Point) -> Result<RankResult> {
    let df = eval_df(sys, p)?;
    let (a, b) = (df.row(0), df.row(1));
    let aa = a.dot(&a);
    let bb = b.dot(&b);
    let ab = a.dot(&b);
    // σ₁σ₂ = |a ∧ b| from the Lagrange identity, free of cancellation
    let mut wedge2 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let m = a[i] * b[j] - a[j] * b[i];
            wedge2 += m * m;
        }
    }
    let tr = aa + bb;
    let prod = wedge2.sqrt();
    let s1 = (0.5 * (tr + ((tr - 2.0 * prod) * (tr + 2.0 * prod)).max(0.0).sqrt())).sqrt();
    let s2 = if s1 > 0.0 { prod / s1 } else { 0.0 };
    let tol = RANK_TOL * (s1 + 1.0);
    let rank = (s1 > tol) as u8 + (s2 > tol) as u8;
    let mu = (rank == 1 && aa > 0.0).then(|| -ab / aa);
    Ok(RankResult { rank, singular_values: [s1, s2], mu })
}

/// Point on the rank-1 locus of the reversed spin-oscillator:
/// `(u, v) = ±√(ρ₁/ρ₂)·(√(1−z²)/z)·(cos θ, sin θ)`.
pub fn reversed_rank1_analytic(params: &SystemParams, theta: f64, z: f64, branch: crate::geometry::Sign) -> Result<Point> {
    if !(z.is_finite() && z != 0.0 && z.abs() < 1.0) {
        return Err(Error::BadParams(format!("z = {z} must lie in (-1, 0) or (0, 1)")));
    }
    let k = branch.value() * (params.rho1 / params.rho2).sqrt() * crate::geometry::cos_lat(z) / z;
    let (s, c) = theta.sin_cos();
    Point::new(ChartId::cylindrical(Manifold::SphereTimesPlane), [theta, z, k * c, k * s])
}

/// Seed grid for the rank-1 scan, in the all-cylindrical chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rank1Grid {
    pub resolution: usize,
    /// Sphere heights are sampled in `z_min ≤ |z| ≤ z_max`.
    pub z_min: f64,
    pub z_max: f64,
    pub plane_half_width: f64,
    /// Grid points are used as seeds when `σ₂/σ₁` is below this.
    pub seed_ratio: f64,
}

impl Default for Rank1Grid {
    fn default() -> Self {
        Rank1Grid { resolution: 16, z_min: 0.05, z_max: 0.8, plane_half_width: 3.0, seed_ratio: 0.3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Rank1Sample {
    pub point: Point,
    pub mu: f64,
    pub component: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Rank1Locus {
    pub grid: Rank1Grid,
    pub seeds: usize,
    pub samples: Vec<Rank1Sample>,
    pub components: usize,
}

impl Rank1Grid {
    fn axes(&self, chart: ChartId) -> [Vec<f64>; 4] {
        let n = self.resolution;
        let lin = |lo: f64, hi: f64, m: usize| (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect::<Vec<_>>();
        std::array::from_fn(|k| match chart.sphere(k / 2) {
            Some(_) if k % 2 == 0 => (0..n).map(|i| i as f64 * std::f64::consts::TAU / n as f64).collect(),
            Some(_) => {
                let half = lin(self.z_min, self.z_max, n / 2);
                half.iter().rev().map(|z| -z).chain(half.iter().copied()).collect()
            }
            None => lin(-self.plane_half_width, self.plane_half_width, n),
        })
    }

    /// Grid spacing per coordinate.
    fn spacing(&self, chart: ChartId) -> [f64; 4] {
        let axes = self.axes(chart);
        std::array::from_fn(|k| {
            let a = &axes[k];
            a.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
        })
    }

    fn contains(&self, chart: ChartId, q: &[f64; 4]) -> bool {
        (0..2).all(|f| match chart.sphere(f) {
            Some(_) => {
                let z = q[2 * f + 1].abs();
                z >= 0.5 * self.z_min && z <= 1.0 - CHART_MARGIN
            }
            None => q[2].abs() <= 1.5 * self.plane_half_width && q[3].abs() <= 1.5 * self.plane_half_width,
        })
    }
}

/// Min-norm Gauss–Newton on `μ·∇L + ∇H = 0` over `(q, μ)`.
fn colinear_newton(sys: &SystemDef, chart: ChartId, q0: [f64; 4]) -> Option<([f64; 4], f64)> {
    let mut q = q0;
    let g = sys.gradients_raw(chart, &q).coord;
    let gl = SVector::<f64, 4>::from(g[0]);
    let gh = SVector::<f64, 4>::from(g[1]);
    let ll = gl.dot(&gl);
    if ll == 0.0 {
        return None;
    }
    let mut mu = -gl.dot(&gh) / ll;
    for _ in 0..40 {
        let g = sys.gradients_raw(chart, &q).coord;
        let gl = SVector::<f64, 4>::from(g[0]);
        let gh = SVector::<f64, 4>::from(g[1]);
        let r = gl * mu + gh;
        if !r.norm().is_finite() {
            return None;
        }
        if r.norm() <= 1e-14 * (1.0 + gh.norm()) {
            break;
        }
        let [hl, hh] = sys.coord_hessians(chart, &q);
        let jq = hl * mu + hh;
        let j = SMatrix::<f64, 4, 5>::from_fn(|i, k| if k < 4 { jq[(i, k)] } else { gl[i] });
        let svd = j.svd(true, true);
        let cut = 1e-10 * svd.singular_values.max();
        let step = svd.solve(&(-r), cut).ok()?;
        for (k, qk) in q.iter_mut().enumerate() {
            *qk += step[k];
        }
        mu += step[4];
        if !Point::new(chart, q).is_ok() {
            return None;
        }
    }
    Some((q, mu))
}

/// Relative colinearity residual `‖μ·dL + dH‖ / ‖dH‖` in the b-frame.
pub fn colinearity_residual(sys: &SystemDef, p: &Point, mu: f64) -> f64 {
    let df = eval_df(sys, p).expect("valid point");
    (df.row(0) * mu + df.row(1)).norm() / df.row(1).norm()
}

/// Rank-1 points found by Newton from grid seeds, clustered into
/// connected components by adjacency within twice the grid spacing.
pub fn scan_rank1(sys: &SystemDef, grid: &Rank1Grid, exec: Execution) -> Result<Rank1Locus> {
    if grid.resolution < 16 {
        return Err(Error::BadParams("rank-1 scan needs at least 16 points per axis".into()));
    }
    let chart = ChartId::cylindrical(sys.manifold());
    let axes = grid.axes(chart);
    let n = grid.resolution;
    let seeds: Vec<[f64; 4]> = map_range(n, exec, |i0| {
        let mut out = Vec::new();
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let q = [axes[0][i0], axes[1][i1], axes[2][i2], axes[3][i3]];
                    let Ok(p) = Point::new(chart, q) else { continue };
                    let r = rank_at(sys, &p).expect("valid point");
                    if r.singular_values[1] <= grid.seed_ratio * r.singular_values[0] {
                        out.push(q);
                    }
                }
            }
        }
        out
    })
    .into_iter()
    .flatten()
    .collect();

    let solved: Vec<Option<(Point, f64)>> = map_slice(&seeds, exec, |q0| {
        let (q, mu) = colinear_newton(sys, chart, *q0)?;
        if !grid.contains(chart, &q) {
            return None;
        }
        let p = Point::new(chart, q).ok()?;
        let r = rank_at(sys, &p).ok()?;
        (r.rank == 1 && colinearity_residual(sys, &p, mu) <= 1e-8).then_some((p, mu))
    });
    let mut found: Vec<(Point, f64)> = solved.into_iter().flatten().collect();
    found.sort_by(|a, b| {
        a.0.coords.iter().zip(b.0.coords.iter()).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y)))
    });
    found.dedup_by(|a, b| a.0.chart_distance(&b.0) < 1e-10);

    let labels = cluster(&found.iter().map(|(p, _)| p.coords).collect::<Vec<_>>(), chart, &grid.spacing(chart));
    let components = labels.iter().copied().max().map_or(0, |m| m + 1);
    let samples =
        found.into_iter().zip(labels).map(|((point, mu), component)| Rank1Sample { point, mu, component }).collect();
    Ok(Rank1Locus { grid: *grid, seeds: seeds.len(), samples, components })
}

/// Connected components under the relation "within 2 grid spacings" in
/// spacing-normalized coordinates, angles wrapping. Labels are ordered
/// by first appearance.
fn cluster(points: &[[f64; 4]], chart: ChartId, h: &[f64; 4]) -> Vec<usize> {
    const RADIUS: f64 = 2.0;
    let tau = std::f64::consts::TAU;
    let periodic: [Option<f64>; 4] =
        std::array::from_fn(|k| (k % 2 == 0 && chart.sphere(k / 2) == Some(SphereChart::Cylindrical)).then(|| tau / h[k]));
    let norm: Vec<[f64; 4]> = points.iter().map(|q| std::array::from_fn(|k| q[k] / h[k])).collect();
    let cell = |x: &[f64; 4]| -> [i64; 4] { std::array::from_fn(|k| (x[k] / RADIUS).floor() as i64) };
    let mut grid: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
    for (i, x) in norm.iter().enumerate() {
        grid.entry(cell(x)).or_default().push(i);
    }
    let period_cells: [Option<i64>; 4] = std::array::from_fn(|k| periodic[k].map(|p| (p / RADIUS).ceil() as i64));
    let dist = |a: &[f64; 4], b: &[f64; 4]| -> f64 {
        (0..4)
            .map(|k| {
                let mut d = (a[k] - b[k]).abs();
                if let Some(p) = periodic[k] {
                    d = d.rem_euclid(p);
                    d = d.min(p - d);
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, x) in norm.iter().enumerate() {
        let c = cell(x);
        for code in 0..81 {
            let mut nb = c;
            let mut rest = code;
            for (k, slot) in nb.iter_mut().enumerate() {
                *slot += (rest % 3) as i64 - 1;
                rest /= 3;
                if let Some(pc) = period_cells[k] {
                    *slot = slot.rem_euclid(pc);
                }
            }
            // cells near the angular seam are stored unwrapped
            let mut candidates = Vec::new();
            if let Some(v) = grid.get(&nb) {
                candidates.extend_from_slice(v);
            }
            for (k, pc) in period_cells.iter().enumerate() {
                if let Some(pc) = pc {
                    for shift in [-*pc, *pc] {
                        let mut alt = nb;
                        alt[k] += shift;
                        if let Some(v) = grid.get(&alt) {
                            candidates.extend_from_slice(v);
                        }
                    }
                }
            }
            for j in candidates {
                if j != i && dist(x, &norm[j]) <= RADIUS {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut label_of: HashMap<usize, usize> = HashMap::new();
    (0..points.len())
        .map(|i| {
            let r = find(&mut parent, i);
            let next = label_of.len();
            *label_of.entry(r).or_insert(next)
        })
        .collect()
}

/// Distance from a sampled reversed-system rank-1 point to the analytic
/// locus at the same `(θ, z)`, minimized over both branches.
pub fn reversed_deviation(params: &SystemParams, p: &Point) -> f64 {
    use crate::geometry::Sign;
    [Sign::Plus, Sign::Minus]
        .iter()
        .filter_map(|&b| reversed_rank1_analytic(params, p.coords[0], p.coords[1], b).ok())
        .map(|a| (a.coords[2] - p.coords[2]).hypot(a.coords[3] - p.coords[3]))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sign;
    use crate::systems::{make_system, SystemId};

    fn reversed() -> SystemDef {
        make_system(SystemId::BCsoReversed, SystemParams::spin_oscillator(1.0, 1.0)).unwrap()
    }

    #[test]
    fn bcso_pole_has_rank_zero() {
        let sys = make_system(SystemId::BCso, SystemParams::spin_oscillator(1.0, 1.0)).unwrap();
        let p = Point::new(ChartId::cartesian(Manifold::SphereTimesPlane, Sign::Plus, Sign::Plus), [0.0; 4]).unwrap();
        assert_eq!(rank_at(&sys, &p).unwrap().rank, 0);
    }

    #[test]
    fn reversed_reference_point_has_rank_one() {
        let sys = reversed();
        let p = Point::new(ChartId::cylindrical(Manifold::SphereTimesPlane), [0.0, 0.5f64.sqrt(), 1.0, 0.0]).unwrap();
        let r = rank_at(&sys, &p).unwrap();
        assert_eq!(r.rank, 1);
        assert!(colinearity_residual(&sys, &p, r.mu.unwrap()) < 1e-12);
    }

    #[test]
    fn analytic_locus_values() {
        let one = SystemParams::spin_oscillator(1.0, 1.0);
        let p = reversed_rank1_analytic(&one, 0.0, 0.5f64.sqrt(), Sign::Plus).unwrap();
        assert!((p.coords[2] - 1.0).abs() < 1e-15 && p.coords[3] == 0.0);
        let four = SystemParams::spin_oscillator(4.0, 1.0);
        let p = reversed_rank1_analytic(&four, std::f64::consts::FRAC_PI_2, 0.5f64.sqrt(), Sign::Minus).unwrap();
        assert!(p.coords[2].abs() < 1e-15 && (p.coords[3] + 2.0).abs() < 1e-15);
        let p = reversed_rank1_analytic(&one, 1.0, 1.0 - 1e-9, Sign::Plus).unwrap();
        assert!(p.coords[2].hypot(p.coords[3]) < 1e-4);
        assert!(reversed_rank1_analytic(&one, 0.0, 0.0, Sign::Plus).is_err());
        assert!(reversed_rank1_analytic(&one, 0.0, 1.0, Sign::Plus).is_err());
    }

    #[test]
    fn analytic_locus_has_rank_one_on_both_hemispheres() {
        let sys = reversed();
        for z in [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9] {
            for b in [Sign::Plus, Sign::Minus] {
                let p = reversed_rank1_analytic(&sys.params, 0.7, z, b).unwrap();
                assert_eq!(rank_at(&sys, &p).unwrap().rank, 1, "z = {z}");
            }
        }
    }

    #[test]
    fn clustering_wraps_angles() {
        let chart = ChartId::cylindrical(Manifold::SphereTimesPlane);
        let h = [0.1; 4];
        let pts = [[0.01, 0.5, 0.0, 0.0], [std::f64::consts::TAU - 0.01, 0.5, 0.0, 0.0], [3.0, 0.5, 0.0, 0.0]];
        assert_eq!(cluster(&pts, chart, &h), vec![0, 0, 1]);
    }
}
