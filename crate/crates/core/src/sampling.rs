//! Seeded, chart-uniform random points.
//!
//! A run with master seed `s` draws its `i`-th shard of [`SHARD_SIZE`]
//! points from ChaCha8 seeded with `s` on stream `i`. Shards are merged in
//! index order, so output does not depend on the execution policy.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{map_range, Execution};
use crate::geometry::{ChartId, Point, Sign, SphereChart};

pub const SHARD_SIZE: usize = 4096;

/// Random generator for shard `shard` of a run seeded with `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Region of chart coordinates to sample from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    /// Distance kept from chart boundaries (in `|z|` or disk radius).
    pub margin: f64,
    /// Half-width of the `(u, v)` square on the plane factor.
    pub plane_half_width: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { margin: 1e-3, plane_half_width: 3.0 }
    }
}

fn sphere_coords<R: Rng>(chart: SphereChart, margin: f64, rng: &mut R) -> [f64; 2] {
    match chart {
        SphereChart::Cylindrical => [rng.random_range(0.0..TAU), rng.random_range(-1.0 + margin..=1.0 - margin)],
        SphereChart::Hemisphere(_) => {
            let r_max = 1.0 - margin;
            loop {
                let x = rng.random_range(-r_max..=r_max);
                let y = rng.random_range(-r_max..=r_max);
                if x * x + y * y <= r_max * r_max {
                    return [x, y];
                }
            }
        }
    }
}

/// One point drawn uniformly in the chart coordinates of `chart`.
pub fn random_point<R: Rng>(chart: ChartId, b: &SampleBox, rng: &mut R) -> Point {
    let mut q = [0.0; 4];
    for f in 0..2 {
        let c = match chart.sphere(f) {
            Some(sc) => sphere_coords(sc, b.margin, rng),
            None => {
                let w = b.plane_half_width;
                [rng.random_range(-w..=w), rng.random_range(-w..=w)]
            }
        };
        q[2 * f] = c[0];
        q[2 * f + 1] = c[1];
    }
    Point::new(chart, q).expect("sample box lies inside the chart")
}

/// `n` seeded points in one chart.
pub fn random_points(chart: ChartId, n: usize, seed: u64, b: &SampleBox, exec: Execution) -> Vec<Point> {
    sharded(n, seed, exec, |rng| random_point(chart, b, rng))
}

/// Runs `draw` `n` times across deterministic shards.
pub fn sharded<T, F>(n: usize, seed: u64, exec: Execution, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    let shards = n.div_ceil(SHARD_SIZE);
    map_range(shards, exec, |s| {
        let mut rng = shard_rng(seed, s as u64);
        let len = SHARD_SIZE.min(n - s * SHARD_SIZE);
        (0..len).map(|_| draw(&mut rng)).collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Uniform sign.
pub fn random_sign<R: Rng>(rng: &mut R) -> Sign {
    if rng.random::<bool>() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}
