//! Momentum-map image sampling, coverage accounting and the analytic
//! boundary of the reversed system.
//!
//! Samples are drawn in the all-cylindrical chart. On a factor carrying
//! the singular hypersurface the height is drawn from an even mixture of
//! uniform `z` and log-uniform `|z|` down to [`SamplingDomain::z_floor`],
//! so the logarithmic end of the image is reached at desk-scale sample
//! counts.

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::geometry::{cos_lat, ChartId, Manifold, Point, Sign};
use crate::sampling::{random_sign, sharded};
use crate::systems::{eval_f, MomentumValue, SystemDef, SystemId, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    Whole,
    FirstFactorUpper,
    FirstFactorLower,
    SecondFactorUpper,
    SecondFactorLower,
}

impl Subset {
    pub const ALL: [Subset; 5] = [
        Subset::Whole,
        Subset::FirstFactorUpper,
        Subset::FirstFactorLower,
        Subset::SecondFactorUpper,
        Subset::SecondFactorLower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Whole => "whole",
            Subset::FirstFactorUpper => "first-factor-upper",
            Subset::FirstFactorLower => "first-factor-lower",
            Subset::SecondFactorUpper => "second-factor-upper",
            Subset::SecondFactorLower => "second-factor-lower",
        }
    }

    /// Required sign of the height on sphere factor `f`, if any.
    fn sign_on(self, f: usize) -> Option<Sign> {
        match (self, f) {
            (Subset::FirstFactorUpper, 0) | (Subset::SecondFactorUpper, 1) => Some(Sign::Plus),
            (Subset::FirstFactorLower, 0) | (Subset::SecondFactorLower, 1) => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Subset> {
        Subset::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::BadParams(format!("unknown subset '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumSample {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub chart: ChartId,
    pub subset: Subset,
    /// False when `(L, H)` was clamped onto the window.
    pub in_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageWindow {
    pub l_range: [f64; 2],
    pub h_range: [f64; 2],
    pub resolution: usize,
}

impl Default for ImageWindow {
    fn default() -> Self {
        ImageWindow { l_range: [-3.0, 3.0], h_range: [-3.0, 3.0], resolution: 30 }
    }
}

impl ImageWindow {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] < r[1];
        if !ok(self.l_range) || !ok(self.h_range) || self.resolution == 0 {
            return Err(Error::BadParams(format!("invalid image window {self:?}")));
        }
        Ok(())
    }

    fn contains(&self, l: f64, h: f64) -> bool {
        (self.l_range[0]..=self.l_range[1]).contains(&l) && (self.h_range[0]..=self.h_range[1]).contains(&h)
    }

    /// Coverage cell `(i_L, i_H)` of an in-window value.
    pub fn cell(&self, l: f64, h: f64) -> (usize, usize) {
        let idx = |x: f64, r: [f64; 2]| {
            let k = ((x - r[0]) / (r[1] - r[0]) * self.resolution as f64).floor() as usize;
            k.min(self.resolution - 1)
        };
        (idx(l, self.l_range), idx(h, self.h_range))
    }
}

/// Coordinate region the sampler draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingDomain {
    /// Distance kept from the poles in `|z|`.
    pub margin: f64,
    /// Smallest `|z|` drawn on the singular factor.
    pub z_floor: f64,
    pub plane_half_width: f64,
}

impl Default for SamplingDomain {
    fn default() -> Self {
        SamplingDomain { margin: 1e-3, z_floor: 1e-12, plane_half_width: 8.0 }
    }
}

fn draw_height<R: Rng>(rng: &mut R, d: &SamplingDomain, singular: bool, sign: Option<Sign>) -> f64 {
    let top = 1.0 - d.margin;
    let mag = if singular && rng.random::<bool>() {
        (rng.random_range(d.z_floor.ln()..=top.ln())).exp()
    } else {
        loop {
            let z: f64 = rng.random_range(0.0..=top);
            if !singular || z >= d.z_floor {
                break z;
            }
        }
    };
    let s = sign.unwrap_or_else(|| random_sign(rng));
    s.value() * mag
}

/// `n` seeded samples of the momentum image, clamped to `window`.
pub fn sample_image(
    sys: &SystemDef,
    n: usize,
    seed: u64,
    window: &ImageWindow,
    subset: Subset,
    domain: &SamplingDomain,
    exec: Execution,
) -> Result<Vec<MomentumSample>> {
    window.validate()?;
    if n == 0 {
        return Err(Error::BadParams("sample count must be at least 1".into()));
    }
    let m = sys.manifold();
    if m == Manifold::SphereTimesPlane && subset.sign_on(1).is_some() {
        return Err(Error::BadParams(format!("subset {} needs a second sphere factor", subset.name())));
    }
    let chart = ChartId::cylindrical(m);
    let singular = sys.singular_factor();
    Ok(sharded(n, seed, exec, |rng| {
        let mut q = [0.0; 4];
        for f in 0..2 {
            if m == Manifold::SphereTimesPlane && f == 1 {
                let w = domain.plane_half_width;
                q[2] = rng.random_range(-w..=w);
                q[3] = rng.random_range(-w..=w);
            } else {
                q[2 * f] = rng.random_range(0.0..TAU);
                q[2 * f + 1] = draw_height(rng, domain, singular == Some(f), subset.sign_on(f));
            }
        }
        let v = sys.eval_raw(chart, &q);
        let in_window = window.contains(v.l, v.h);
        MomentumSample {
            l: v.l.clamp(window.l_range[0], window.l_range[1]),
            h: v.h.clamp(window.h_range[0], window.h_range[1]),
            chart,
            subset,
            in_window,
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub window: ImageWindow,
    pub resolution: usize,
    pub cells_hit: usize,
    pub cells_total: usize,
}

/// Per-cell hit counts of the in-window samples, indexed `[i_L][i_H]`.
pub fn cell_counts(samples: &[MomentumSample], window: &ImageWindow) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0; window.resolution]; window.resolution];
    for s in samples.iter().filter(|s| s.in_window) {
        let (i, j) = window.cell(s.l, s.h);
        counts[i][j] += 1;
    }
    counts
}

pub fn coverage(samples: &[MomentumSample], window: &ImageWindow) -> CoverageReport {
    let counts = cell_counts(samples, window);
    CoverageReport {
        window: *window,
        resolution: window.resolution,
        cells_hit: counts.iter().flatten().filter(|&&c| c > 0).count(),
        cells_total: window.resolution * window.resolution,
    }
}

/// Worst ratio of mirrored cell counts under `H → −H`, over cell pairs
/// where both cells have at least `min_hits`.
pub fn h_mirror_ratio(samples: &[MomentumSample], window: &ImageWindow, min_hits: usize) -> Option<(f64, f64)> {
    if window.h_range[0] != -window.h_range[1] {
        return None;
    }
    let counts = cell_counts(samples, window);
    let r = window.resolution;
    let mut range: Option<(f64, f64)> = None;
    for row in &counts {
        for j in 0..r / 2 {
            let (a, b) = (row[j], row[r - 1 - j]);
            if a >= min_hits && b >= min_hits {
                let q = a as f64 / b as f64;
                range = Some(range.map_or((q, q), |(lo, hi)| (lo.min(q), hi.max(q))));
            }
        }
    }
    range
}

/// Writes `L,H,chart,subset` rows with 17 significant digits.
pub fn write_samples_csv<W: Write>(out: W, samples: &[MomentumSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["L", "H", "chart", "subset"]).map_err(io_err)?;
    for s in samples {
        w.write_record([format!("{:.16e}", s.l), format!("{:.16e}", s.h), s.chart.label(), s.subset.name().into()])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub(crate) fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Boundary point of the reversed system's image, the image of its
/// rank-1 locus at height `z`.
pub fn reversed_boundary(params: &SystemParams, z: f64, branch: Sign) -> Result<MomentumValue> {
    if !(z > 0.0 && z <= 1.0) || !(params.rho1 > 0.0 && params.rho2 > 0.0) {
        return Err(Error::BadParams(format!("z = {z} must lie in (0, 1] with positive rho")));
    }
    let rho1 = params.rho1;
    let w = (1.0 - z) * (1.0 + z);
    Ok(MomentumValue {
        l: -rho1 * z.ln() + rho1 * w / (2.0 * z * z),
        h: branch.value() * (rho1 / params.rho2).sqrt() * w / (2.0 * z),
    })
}

/// Signed amount by which `(l, h)` lies outside the reversed image,
/// negative inside. The boundary height at `l` is found by bisection in
/// `ln z`, along which the boundary `L` decreases monotonically.
pub fn reversed_excess(params: &SystemParams, l: f64, h: f64) -> f64 {
    if l <= 0.0 {
        return (-l).max(h.abs());
    }
    let bl = |s: f64| reversed_boundary(params, s.exp(), Sign::Plus).expect("z in (0, 1]");
    let (mut lo, mut hi) = (-1.0, 0.0);
    while bl(lo).l < l {
        lo *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bl(mid).l > l {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    h.abs() - bl(0.5 * (lo + hi)).h
}

/// Explicit bCSO preimage of `target`: `(u, v)` is taken colinear with
/// `(x, y)` and a single scalar is found by bisection, the height for
/// `ℓ ≥ 0` and the oscillator radius for `ℓ < 0`.
pub fn probe_preimage(sys: &SystemDef, target: MomentumValue) -> Result<Point> {
    if sys.id != SystemId::BCso {
        return Err(Error::NotApplicable(format!("probe_preimage needs bcso, got {}", sys.id)));
    }
    let (l, h) = (target.l, target.h);
    if !(l.is_finite() && h.is_finite()) {
        return Err(Error::BadParams("non-finite target".into()));
    }
    let (rho1, rho2) = (sys.params.rho1, sys.params.rho2);
    let dir = Sign::of(h).value();
    let plane = Manifold::SphereTimesPlane;
    let p = if h == 0.0 && l >= 0.0 {
        let n = (2.0 * l / rho2).sqrt();
        Point::new(ChartId::cartesian(plane, Sign::Plus, Sign::Plus), [0.0, 0.0, 0.0, n])?
    } else {
        // H along the family as a function of the bisection variable
        let family: Box<dyn Fn(f64) -> (f64, f64)> = if l >= 0.0 {
            Box::new(move |s: f64| {
                let z = s.exp();
                let n = (2.0 * (l - rho1 * s) / rho2).sqrt();
                (z, 0.5 * cos_lat(z) * n)
            })
        } else {
            Box::new(move |n: f64| {
                let z = ((l - 0.5 * rho2 * n * n) / rho1).exp();
                (z, 0.5 * cos_lat(z) * n)
            })
        };
        let target_h = h.abs();
        let (mut lo, mut hi) = if l >= 0.0 { (-1.0, 0.0) } else { (0.0, 1.0) };
        let grows = |x: f64| family(x).1 >= target_h;
        let mut guard = 0;
        if l >= 0.0 {
            while !grows(lo) {
                lo *= 2.0;
                guard += 1;
                if guard > 60 {
                    return Err(Error::NumericalFailure("no bracket for the height".into()));
                }
            }
        } else {
            while !grows(hi) {
                hi *= 2.0;
                guard += 1;
                if guard > 60 {
                    return Err(Error::NumericalFailure("no bracket for the oscillator radius".into()));
                }
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            // H decreases in ln z and increases in N
            if grows(mid) == (l >= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let (z, _) = family(x);
        let n = if l >= 0.0 { (2.0 * (l - rho1 * x) / rho2).sqrt() } else { x };
        Point::new(ChartId::cylindrical(plane), [0.0, z, dir * n, 0.0])?
    };
    let v = eval_f(sys, &p)?;
    let residual = (v.l - l).abs().max((v.h - h).abs());
    if residual > 1e-9 {
        return Err(Error::NumericalFailure(format!("preimage residual {residual:e} for target ({l}, {h})")));
    }
    Ok(p)
}

/// Samples whose `|L − ℓ|` is below `half_width`, as `(min H, max H)`.
pub fn fiber_h_range(samples: &[MomentumSample], ell: f64, half_width: f64) -> Option<(f64, f64)> {
    samples.iter().filter(|s| s.in_window && (s.l - ell).abs() < half_width).fold(None, |acc, s| {
        Some(acc.map_or((s.h, s.h), |(lo, hi): (f64, f64)| (lo.min(s.h), hi.max(s.h))))
    })
}

/// Largest boundary excess over in-window samples of the reversed system.
pub fn reversed_max_excess(params: &SystemParams, samples: &[MomentumSample], exec: Execution) -> f64 {
    let inside: Vec<&MomentumSample> = samples.iter().filter(|s| s.in_window).collect();
    map_slice(&inside, exec, |s| reversed_excess(params, s.l, s.h)).into_iter().fold(f64::NEG_INFINITY, f64::max)
}
