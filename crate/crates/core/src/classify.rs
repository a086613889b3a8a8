//! Fixed points and their Williamson types.
//!
//! A fixed point is classified from the spectrum of a pencil
//! `c₁·A_L + c₂·A_H`, where `A_f = Ω⁻¹·d²f`. A pencil is admissible when
//! its four eigenvalues are pairwise distinct; the spectrum pattern of any
//! admissible pencil then decides the type.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{Complex, Matrix4, SMatrix, SVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_range, map_slice, Execution};
use crate::geometry::{to_chart, ChartId, Manifold, Point, Sign, SphereChart};
use crate::sampling::shard_rng;
use crate::systems::{eval_df, eval_hessians, make_system, z_value, Observable, SystemDef, SystemId, SystemParams, FIXED_POINT_TOL};

/// Pencil gap (see [`pencil_gap`]) below which eigenvalues collide.
pub const COLLISION_TOL: f64 = 1e-7;
/// Relative size below which a real or imaginary part counts as zero.
pub const PATTERN_TOL: f64 = 1e-8;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const PENCIL_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
const RANDOM_PENCILS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Provenance {
    #[serde(rename = "A_L")]
    AL,
    #[serde(rename = "A_H")]
    AH,
    #[serde(rename = "pencil")]
    Pencil { c1: f64, c2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    pub entries: Matrix4<f64>,
    pub provenance: Provenance,
}

/// Four eigenvalues sorted lexicographically by `(re, im)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub values: [Complex<f64>; 4],
}

impl Spectrum {
    pub fn new(mut values: [Complex<f64>; 4]) -> Spectrum {
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Spectrum { values }
    }

    pub fn radius(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest pairwise distance between eigenvalues.
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..4 {
            for j in i + 1..4 {
                gap = gap.min((self.values[i] - self.values[j]).norm());
            }
        }
        gap
    }

    /// `min_gap / radius`, zero for the zero spectrum.
    pub fn relative_gap(&self) -> f64 {
        let r = self.radius();
        if r == 0.0 {
            0.0
        } else {
            self.min_gap() / r
        }
    }

    pub fn is_distinct(&self) -> bool {
        self.relative_gap() > COLLISION_TOL
    }

    /// Largest distance from `-λ` and `λ̄` to the nearest eigenvalue.
    pub fn symmetry_defect(&self) -> f64 {
        let nearest = |w: Complex<f64>| self.values.iter().map(|v| (v - w).norm()).fold(f64::INFINITY, f64::min);
        self.values.iter().map(|&v| nearest(-v).max(nearest(v.conj()))).fold(0.0, f64::max)
    }
}

impl Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.values.iter().map(|v| [v.re, v.im]).collect();
        pairs.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilliamsonType {
    EllipticElliptic,
    FocusFocus,
    EllipticHyperbolic,
    HyperbolicHyperbolic,
    Degenerate,
}

impl WilliamsonType {
    pub fn name(self) -> &'static str {
        match self {
            WilliamsonType::EllipticElliptic => "elliptic-elliptic",
            WilliamsonType::FocusFocus => "focus-focus",
            WilliamsonType::EllipticHyperbolic => "elliptic-hyperbolic",
            WilliamsonType::HyperbolicHyperbolic => "hyperbolic-hyperbolic",
            WilliamsonType::Degenerate => "degenerate",
        }
    }

    pub fn has_hyperbolic_component(self) -> bool {
        matches!(self, WilliamsonType::EllipticHyperbolic | WilliamsonType::HyperbolicHyperbolic)
    }
}

impl fmt::Display for WilliamsonType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Eigenvalues of a real 4×4 matrix by shifted QR iteration.
pub fn eig4(m: &Matrix4<f64>) -> Result<Spectrum> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite matrix entry".into()));
    }
    crate::eig::eigenvalues4(m).map(Spectrum::new).ok_or(Error::NonConvergence)
}

/// Pattern match of a spectrum with pairwise-distinct eigenvalues.
pub fn williamson_type(spec: &Spectrum) -> Result<WilliamsonType> {
    let tol = PATTERN_TOL * spec.radius();
    let (mut imaginary, mut real, mut complex) = (0, 0, 0);
    for v in &spec.values {
        match (v.re.abs() <= tol, v.im.abs() <= tol) {
            (true, false) => imaginary += 1,
            (false, true) => real += 1,
            (false, false) => complex += 1,
            (true, true) => return Err(Error::UnrecognizedPattern(format!("zero eigenvalue in {:?}", spec.values))),
        }
    }
    match (imaginary, real, complex) {
        (4, 0, 0) => Ok(WilliamsonType::EllipticElliptic),
        (0, 0, 4) => Ok(WilliamsonType::FocusFocus),
        (2, 2, 0) => Ok(WilliamsonType::EllipticHyperbolic),
        (0, 4, 0) => Ok(WilliamsonType::HyperbolicHyperbolic),
        _ => Err(Error::UnrecognizedPattern(format!("{:?}", spec.values))),
    }
}

/// Coefficients `[a1, a2, a3, a4]` of `det(λI − A) = λ⁴ + a1λ³ + a2λ² + a3λ + a4`
/// by the Faddeev–LeVerrier recursion.
pub fn charpoly(a: &Matrix4<f64>) -> [f64; 4] {
    let mut coeffs = [0.0; 4];
    let mut m = Matrix4::<f64>::zeros();
    let mut prev = 1.0;
    for k in 1..=4 {
        m = a * m + Matrix4::identity() * prev;
        let c = -(a * m).trace() / k as f64;
        coeffs[k - 1] = c;
        prev = c;
    }
    coeffs
}

/// `b² − 4c` of the even characteristic polynomial `λ⁴ + bλ² + c`.
pub fn biquadratic_discriminant(a: &Matrix4<f64>) -> f64 {
    let p = charpoly(a);
    p[1] * p[1] - 4.0 * p[3]
}

/// The fixed candidate list followed by seeded random pairs.
pub fn pencil_candidates() -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = [1.0, 0.5, 0.25, 0.75, 0.125, 1.5, 3.0].iter().map(|g| (1.0, 2.0 * g)).collect();
    let mut rng = shard_rng(PENCIL_SEED, 0);
    for _ in 0..RANDOM_PENCILS {
        out.push((rng.random_range(0.25..2.0), rng.random_range(-4.0..4.0)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PencilChoice {
    pub c1: f64,
    pub c2: f64,
    pub spectrum: Spectrum,
    pub relative_gap: f64,
}

/// Minimum eigenvalue gap of `m` relative to its Frobenius norm.
///
/// Rounding splits a non-semisimple double eigenvalue by about
/// `√ε·‖m‖`, independently of the spectral radius, so the norm is the
/// scale that separates genuine gaps from collisions.
pub fn pencil_gap(m: &Matrix4<f64>, spectrum: &Spectrum) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        0.0
    } else {
        spectrum.min_gap() / n
    }
}

fn try_pencil(al: &Matrix4<f64>, ah: &Matrix4<f64>, c1: f64, c2: f64) -> Option<(Spectrum, f64)> {
    let m = al * c1 + ah * c2;
    let spectrum = eig4(&m).ok()?;
    Some((spectrum, pencil_gap(&m, &spectrum)))
}

/// All admissible pencils from the candidate list, in list order.
pub fn admissible_pencils(al: &Matrix4<f64>, ah: &Matrix4<f64>) -> Vec<PencilChoice> {
    pencil_candidates()
        .into_iter()
        .filter_map(|(c1, c2)| {
            let (spectrum, gap) = try_pencil(al, ah, c1, c2)?;
            (gap > COLLISION_TOL).then_some(PencilChoice { c1, c2, spectrum, relative_gap: gap })
        })
        .collect()
}

/// First admissible pencil of the candidate list.
pub fn pencil_select(al: &Matrix4<f64>, ah: &Matrix4<f64>) -> Result<PencilChoice> {
    let mut best_gap: f64 = 0.0;
    for (c1, c2) in pencil_candidates() {
        let Some((spectrum, gap)) = try_pencil(al, ah, c1, c2) else { continue };
        if gap > COLLISION_TOL {
            return Ok(PencilChoice { c1, c2, spectrum, relative_gap: gap });
        }
        best_gap = best_gap.max(gap);
    }
    Err(Error::NoAdmissiblePencil { best_gap })
}

fn omega_inverse(sys: &SystemDef, p: &Point) -> Result<Matrix4<f64>> {
    let omega = sys.form.matrix_at(p)?.entries;
    let mut inv = Matrix4::zeros();
    for f in 0..2 {
        let a = omega[(2 * f, 2 * f + 1)];
        inv[(2 * f, 2 * f + 1)] = -1.0 / a;
        inv[(2 * f + 1, 2 * f)] = 1.0 / a;
    }
    Ok(inv)
}

/// `A = Ω⁻¹·d²f` at a fixed point given in a Cartesian chart.
pub fn linearize(sys: &SystemDef, p: &Point, which: Observable) -> Result<LinearOperator> {
    let (hl, hh) = eval_hessians(sys, p)?;
    let inv = omega_inverse(sys, p)?;
    let (h, provenance) = match which {
        Observable::L => (hl, Provenance::AL),
        Observable::H => (hh, Provenance::AH),
    };
    Ok(LinearOperator { entries: inv * h, provenance })
}

/// `c₁·A_L + c₂·A_H` at a fixed point.
pub fn pencil_operator(sys: &SystemDef, p: &Point, c1: f64, c2: f64) -> Result<LinearOperator> {
    let al = linearize(sys, p, Observable::L)?.entries;
    let ah = linearize(sys, p, Observable::H)?.entries;
    Ok(LinearOperator { entries: al * c1 + ah * c2, provenance: Provenance::Pencil { c1, c2 } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalCouplings {
    pub t_minus: f64,
    pub t_plus: f64,
}

/// `t± = R₂ / (2R₂ + R₁ ∓ 2√(R₁R₂))`.
pub fn t_critical(r1: f64, r2: f64) -> Result<CriticalCouplings> {
    if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r1 <= r2) {
        return Err(Error::BadParams(format!("need 0 < R1 <= R2, got R1 = {r1}, R2 = {r2}")));
    }
    let s = 2.0 * (r1 * r2).sqrt();
    Ok(CriticalCouplings { t_minus: r2 / (2.0 * r2 + r1 + s), t_plus: r2 / (2.0 * r2 + r1 - s) })
}

/// `(b, c)` of the classical pole polynomials `λ⁴ + bλ² + c`.
pub fn cam_charpoly_reference(pole: (Sign, Sign), r1: f64, r2: f64, t: f64) -> Result<(f64, f64)> {
    make_system(SystemId::Cam, SystemParams::angular_momenta(r1, r2, t))?;
    let d = r1 * r1 * r2 * r2;
    let (b, root) = match pole {
        (Sign::Plus, Sign::Plus) => (
            1.0 / (r1 * r1) + 2.0 * (t * t + r2) / (r1 * r2) + t * (t + 2.0 * r2) / (r2 * r2) + 2.0,
            -t * t + t * r1 + t + r1 * r2 + r2,
        ),
        (Sign::Plus, Sign::Minus) => (
            (1.0 - 2.0 * t).powi(2) / (r1 * r1)
                + 2.0 * (r2 - t * t - 2.0 * t * r2) / (r1 * r2)
                + t * (t + 2.0 * r2) / (r2 * r2)
                + 2.0,
            -t * t + t * r1 - 2.0 * t * r2 + t + r1 * r2 + r2,
        ),
        (Sign::Minus, Sign::Plus) => (
            1.0 / (r1 * r1) + 2.0 * (r2 - t * t) / (r1 * r2) + t * (t - 2.0 * r2) / (r2 * r2) + 2.0,
            t * t - t * r1 - t + r1 * r2 + r2,
        ),
        (Sign::Minus, Sign::Minus) => (
            (1.0 - 2.0 * t).powi(2) / (r1 * r1)
                + 2.0 * (r2 + t * t - 2.0 * t * r2) / (r1 * r2)
                + t * (t - 2.0 * r2) / (r2 * r2)
                + 2.0,
            -t * t + t * r1 + 2.0 * t * r2 + t - r1 * r2 - r2,
        ),
    };
    Ok((b, root * root / d))
}

/// Analytic fixed-point candidates: the poles or double poles.
pub fn pole_candidates(m: Manifold) -> Vec<(String, Point)> {
    let signs = [Sign::Plus, Sign::Minus];
    match m {
        Manifold::SphereTimesPlane => signs
            .iter()
            .map(|&s| {
                let name = if s == Sign::Plus { "north" } else { "south" };
                (name.to_string(), Point::new(ChartId::cartesian(m, s, s), [0.0; 4]).unwrap())
            })
            .collect(),
        Manifold::SphereTimesSphere => signs
            .iter()
            .flat_map(|&a| signs.iter().map(move |&b| (a, b)))
            .map(|(a, b)| {
                (format!("p{}{}", a.symbol(), b.symbol()), Point::new(ChartId::cartesian(m, a, b), [0.0; 4]).unwrap())
            })
            .collect(),
    }
}

fn coord_residual(sys: &SystemDef, chart: ChartId, q: &[f64; 4]) -> (SVector<f64, 8>, f64) {
    let g = sys.gradients_raw(chart, q).coord;
    let r = SVector::<f64, 8>::from_fn(|i, _| g[i / 4][i % 4]);
    let n = r.norm();
    (r, n)
}

/// Gauss–Newton on the coordinate gradients of `(L, H)`, with the
/// stacked Hessians as Jacobian. Returns the last valid iterate.
pub fn newton_refine(sys: &SystemDef, start: &Point) -> Option<(Point, usize)> {
    let chart = start.chart;
    let mut q = start.coords;
    let (mut r, mut norm) = coord_residual(sys, chart, &q);
    for it in 0..NEWTON_MAX_ITER {
        if !norm.is_finite() {
            return None;
        }
        if norm <= NEWTON_TOL {
            return Some((Point::new(chart, q).ok()?, it));
        }
        let [hl, hh] = sys.coord_hessians(chart, &q);
        let j = SMatrix::<f64, 8, 4>::from_fn(|i, k| if i < 4 { hl[(i, k)] } else { hh[(i - 4, k)] });
        let step = j.svd(true, true).solve(&(-r), 1e-14).ok()?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: [f64; 4] = std::array::from_fn(|i| q[i] + scale * step[i]);
            if Point::new(chart, cand).is_ok() {
                let (rc, nc) = coord_residual(sys, chart, &cand);
                if nc < norm {
                    q = cand;
                    r = rc;
                    norm = nc;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (norm <= FIXED_POINT_TOL).then(|| Point::new(chart, q).ok().map(|p| (p, NEWTON_MAX_ITER)))?
}

/// Grid used to look for fixed points away from the analytic candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanConfig {
    pub resolution: usize,
    pub margin: f64,
    pub plane_half_width: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { resolution: 32, margin: 1e-3, plane_half_width: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub config: ScanConfig,
    pub charts: usize,
    pub grid_points: usize,
    pub seeds: usize,
    pub converged: usize,
    /// Fixed points found by the scan that are not analytic candidates.
    pub extra: usize,
}

fn axis(chart: ChartId, k: usize, cfg: &ScanConfig) -> Vec<f64> {
    let n = cfg.resolution;
    let lin = |lo: f64, hi: f64| (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
    match chart.sphere(k / 2) {
        Some(SphereChart::Cylindrical) if k.is_multiple_of(2) => {
            (0..n).map(|i| (i as f64 + 0.5) * std::f64::consts::TAU / n as f64).collect()
        }
        Some(_) => lin(-1.0 + cfg.margin, 1.0 - cfg.margin),
        None => lin(-cfg.plane_half_width, cfg.plane_half_width),
    }
}

fn scale_of(sys: &SystemDef) -> f64 {
    let p = &sys.params;
    if sys.id.is_spin_oscillator() {
        p.rho1.max(p.rho2).max(1.0)
    } else {
        p.r2.max(1.0)
    }
}

/// Grid points of one chart whose gradient norm falls below the seeding
/// threshold, one seed per connected cluster (the cluster minimum).
fn scan_chart(sys: &SystemDef, chart: ChartId, cfg: &ScanConfig, exec: Execution) -> Vec<Point> {
    let n = cfg.resolution;
    let axes: Vec<Vec<f64>> = (0..4).map(|k| axis(chart, k, cfg)).collect();
    let h = axes.iter().map(|a| (a[1] - a[0]).abs()).fold(0.0, f64::max);
    let tau = 2.0 * h * scale_of(sys);
    let cyl = |k: usize| chart.sphere(k / 2) == Some(SphereChart::Cylindrical) && k.is_multiple_of(2);
    let hits: Vec<([usize; 4], f64)> = map_range(n, exec, |i0| {
        let mut out = Vec::new();
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let idx = [i0, i1, i2, i3];
                    let q: [f64; 4] = std::array::from_fn(|k| axes[k][idx[k]]);
                    if Point::new(chart, q).is_err() {
                        continue;
                    }
                    let g = sys.gradients_raw(chart, &q).coord;
                    let norm = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
                    if norm <= tau {
                        out.push((idx, norm));
                    }
                }
            }
        }
        out
    })
    .into_iter()
    .flatten()
    .collect();

    // union-find over grid adjacency, with angular wraparound
    let index: HashMap<[usize; 4], usize> = hits.iter().enumerate().map(|(i, (idx, _))| (*idx, i)).collect();
    let mut parent: Vec<usize> = (0..hits.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, (idx, _)) in hits.iter().enumerate() {
        for code in 0..81usize {
            let mut nb = *idx;
            let mut c = code;
            let mut ok = true;
            for (k, slot) in nb.iter_mut().enumerate() {
                let d = (c % 3) as isize - 1;
                c /= 3;
                let v = *slot as isize + d;
                if cyl(k) {
                    *slot = v.rem_euclid(n as isize) as usize;
                } else if v < 0 || v >= n as isize {
                    ok = false;
                } else {
                    *slot = v as usize;
                }
            }
            if let (true, Some(&j)) = (ok, index.get(&nb)) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut best: HashMap<usize, usize> = HashMap::new();
    for i in 0..hits.len() {
        let root = find(&mut parent, i);
        let e = best.entry(root).or_insert(i);
        if hits[i].1 < hits[*e].1 {
            *e = i;
        }
    }
    let mut seeds: Vec<usize> = best.into_values().collect();
    seeds.sort_unstable();
    seeds
        .into_iter()
        .map(|i| Point::new(chart, std::array::from_fn(|k| axes[k][hits[i].0[k]])).unwrap())
        .collect()
}

/// Re-expresses a point in the all-Cartesian chart containing it.
pub fn to_cartesian(p: &Point) -> Option<Point> {
    let m = p.chart.manifold();
    let s1 = Sign::of(p.height(0));
    let s2 = Sign::of(if m == Manifold::SphereTimesSphere { p.height(1) } else { 1.0 });
    to_chart(p, ChartId::cartesian(m, s1, s2)).ok()
}

fn ambient_distance(a: &Point, b: &Point) -> f64 {
    let (x, y) = (a.ambient(), b.ambient());
    x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct FixedPointSearch {
    pub points: Vec<(String, Point)>,
    pub scan: Option<ScanSummary>,
}

/// Analytic candidates refined by Newton, plus (optionally) a grid scan
/// over every chart for fixed points elsewhere.
pub fn find_fixed_points(sys: &SystemDef, scan: Option<&ScanConfig>, exec: Execution) -> FixedPointSearch {
    let mut points: Vec<(String, Point)> = pole_candidates(sys.manifold())
        .into_iter()
        .filter_map(|(name, p)| newton_refine(sys, &p).map(|(q, _)| (name, q)))
        .collect();
    let Some(cfg) = scan else { return FixedPointSearch { points, scan: None } };

    let atlas = ChartId::atlas(sys.manifold());
    let seeds: Vec<Point> = atlas.iter().flat_map(|&c| scan_chart(sys, c, cfg, exec)).collect();
    let refined: Vec<Option<Point>> = map_slice(&seeds, exec, |s| {
        let (p, _) = newton_refine(sys, s)?;
        to_cartesian(&p).and_then(|c| newton_refine(sys, &c)).map(|(c, _)| c).or(Some(p))
    });
    let converged = refined.iter().flatten().count();
    let mut extra = 0;
    for p in refined.into_iter().flatten() {
        if points.iter().all(|(_, q)| ambient_distance(q, &p) > 1e-6) {
            extra += 1;
            points.push((format!("extra{extra}"), p));
        }
    }
    let summary = ScanSummary {
        config: *cfg,
        charts: atlas.len(),
        grid_points: atlas.len() * cfg.resolution.pow(4),
        seeds: seeds.len(),
        converged,
        extra,
    };
    FixedPointSearch { points, scan: Some(summary) }
}

fn matrix_rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub label: String,
    pub point: Point,
    #[serde(rename = "type")]
    pub kind: WilliamsonType,
    pub spectrum: Option<Spectrum>,
    pub pencil: Option<(f64, f64)>,
    #[serde(rename = "A_L")]
    pub a_l: [[f64; 4]; 4],
    #[serde(rename = "A_H")]
    pub a_h: [[f64; 4]; 4],
    pub degenerate: bool,
    pub residual: f64,
    /// [`pencil_gap`] of the chosen (or best) pencil.
    pub relative_gap: f64,
    pub z_value: f64,
    /// Set when a hyperbolic component appears.
    pub not_semitoric: bool,
}

/// Williamson type of one fixed point.
pub fn classify_point(sys: &SystemDef, label: &str, p: &Point) -> Result<FixedPointReport> {
    let al = linearize(sys, p, Observable::L)?.entries;
    let ah = linearize(sys, p, Observable::H)?.entries;
    let residual = eval_df(sys, p)?.norm();
    let (kind, spectrum, pencil, gap) = match pencil_select(&al, &ah) {
        Ok(choice) => {
            (williamson_type(&choice.spectrum)?, Some(choice.spectrum), Some((choice.c1, choice.c2)), choice.relative_gap)
        }
        Err(Error::NoAdmissiblePencil { best_gap }) => (WilliamsonType::Degenerate, None, None, best_gap),
        Err(e) => return Err(e),
    };
    Ok(FixedPointReport {
        label: label.to_string(),
        point: *p,
        kind,
        spectrum,
        pencil,
        a_l: matrix_rows(&al),
        a_h: matrix_rows(&ah),
        degenerate: kind == WilliamsonType::Degenerate,
        residual,
        relative_gap: gap,
        z_value: z_value(sys, p),
        not_semitoric: kind.has_hyperbolic_component(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub fixed_points: Vec<FixedPointReport>,
    pub scan: Option<ScanSummary>,
}

pub fn classify_system(sys: &SystemDef, scan: Option<&ScanConfig>, exec: Execution) -> Result<ClassificationReport> {
    let search = find_fixed_points(sys, scan, exec);
    let mut fixed_points = Vec::new();
    for (label, p) in &search.points {
        let p = to_cartesian(p).ok_or_else(|| Error::NumericalFailure(format!("{label} lies on an equator")))?;
        fixed_points.push(classify_point(sys, label, &p)?);
    }
    Ok(ClassificationReport { fixed_points, scan: search.scan })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub types: Vec<(String, WilliamsonType)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub pole: String,
    pub t: f64,
    pub before: WilliamsonType,
    pub after: WilliamsonType,
    /// Nearest of `t⁻`, `t⁺`.
    pub reference: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub system: SystemId,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub critical: CriticalCouplings,
    pub rows: Vec<SweepRow>,
    pub transitions: Vec<Transition>,
}

const BISECT_TOL: f64 = 1e-12;

/// Discriminant of `A_L + A_H` at pole `label` for coupling `t`.
pub fn pole_discriminant(id: SystemId, r1: f64, r2: f64, t: f64, label: &str) -> Result<f64> {
    let sys = make_system(id, SystemParams::angular_momenta(r1, r2, t))?;
    let (_, p) = pole_candidates(sys.manifold())
        .into_iter()
        .find(|(l, _)| l == label)
        .ok_or_else(|| Error::BadParams(format!("unknown pole {label}")))?;
    Ok(biquadratic_discriminant(&pencil_operator(&sys, &p, 1.0, 1.0)?.entries))
}

fn pole_type(id: SystemId, r1: f64, r2: f64, t: f64, label: &str) -> Result<WilliamsonType> {
    let sys = make_system(id, SystemParams::angular_momenta(r1, r2, t))?;
    let (_, p) = pole_candidates(sys.manifold()).into_iter().find(|(l, _)| l == label).unwrap();
    Ok(classify_point(&sys, label, &p)?.kind)
}

/// Williamson types of the four double poles over `steps` equally spaced
/// couplings in `[0, 1]`, with type changes located by bisection on the
/// discriminant of `A_L + A_H`.
pub fn tsweep(id: SystemId, r1: f64, r2: f64, steps: usize, exec: Execution) -> Result<SweepReport> {
    if id.is_spin_oscillator() {
        return Err(Error::BadParams(format!("{id} has no coupling parameter")));
    }
    if steps < 2 {
        return Err(Error::BadParams("need at least 2 steps".into()));
    }
    let critical = t_critical(r1, r2)?;
    make_system(id, SystemParams::angular_momenta(r1, r2, 0.0))?;
    let ts: Vec<f64> = (0..steps).map(|i| i as f64 / (steps - 1) as f64).collect();
    let labels: Vec<String> = pole_candidates(Manifold::SphereTimesSphere).into_iter().map(|(l, _)| l).collect();

    let rows: Vec<Result<SweepRow>> = map_slice(&ts, exec, |&t| {
        let types = labels.iter().map(|l| Ok((l.clone(), pole_type(id, r1, r2, t, l)?))).collect::<Result<Vec<_>>>()?;
        Ok(SweepRow { t, types })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut transitions = Vec::new();
    for label in &labels {
        let d: Vec<f64> = ts.iter().map(|&t| pole_discriminant(id, r1, r2, t, label)).collect::<Result<_>>()?;
        for i in 0..steps - 1 {
            let (mut lo, mut hi) = (ts[i], ts[i + 1]);
            let (dlo, dhi) = (d[i], d[i + 1]);
            let root = if dlo == 0.0 {
                if i == 0 || d[i - 1].signum() == dhi.signum() {
                    continue;
                }
                lo
            } else if dhi == 0.0 || dlo.signum() == dhi.signum() {
                continue;
            } else {
                let s_lo = dlo.signum();
                while hi - lo > BISECT_TOL {
                    let mid = 0.5 * (lo + hi);
                    let dm = pole_discriminant(id, r1, r2, mid, label)?;
                    if dm == 0.0 {
                        lo = mid;
                        hi = mid;
                    } else if dm.signum() == s_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let reference = if (root - critical.t_minus).abs() < (root - critical.t_plus).abs() {
                critical.t_minus
            } else {
                critical.t_plus
            };
            let before = pole_type(id, r1, r2, ts[i.saturating_sub(usize::from(dlo == 0.0))], label)?;
            let after = pole_type(id, r1, r2, ts[i + 1], label)?;
            transitions.push(Transition {
                pole: label.clone(),
                t: root,
                before,
                after,
                reference,
                deviation: (root - reference).abs(),
            });
        }
    }
    Ok(SweepReport { system: id, r1, r2, critical, rows, transitions })
}
