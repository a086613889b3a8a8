#![allow(dead_code)]

use bsemitoric::classify::{linearize, pole_candidates};
use bsemitoric::geometry::{Manifold, Sign};
use bsemitoric::systems::{make_system, Observable, SystemId, SystemParams};
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 20_240_611;

pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

/// Random `(R₁, R₂, t)` with `0 < R₁ < R₂`.
pub fn random_cam_params(r: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let r1 = r.random_range(0.3..3.0);
    let r2 = r1 + r.random_range(0.05..3.0);
    (r1, r2, r.random_range(0.0..=1.0))
}

pub fn sign(s: char) -> Sign {
    if s == '+' { Sign::Plus } else { Sign::Minus }
}

pub const POLES: [&str; 4] = ["p++", "p+-", "p-+", "p--"];

/// `A_L + A_H` of `id` at the named double pole.
pub fn pole_matrix(id: SystemId, r1: f64, r2: f64, t: f64, label: &str) -> Matrix4<f64> {
    let sys = make_system(id, SystemParams::angular_momenta(r1, r2, t)).unwrap();
    let (_, p) = pole_candidates(Manifold::SphereTimesSphere).into_iter().find(|(l, _)| l == label).unwrap();
    linearize(&sys, &p, Observable::L).unwrap().entries + linearize(&sys, &p, Observable::H).unwrap().entries
}

/// The classical `A⁰ = A⁰_L + A⁰_H` as displayed for general `(ε₁, ε₂)`.
pub fn transcribed_a0(e1: f64, e2: f64, r1: f64, r2: f64, t: f64) -> Matrix4<f64> {
    let k = (-e2 * t + t - 1.0) / r1;
    Matrix4::new(
        0.0, k - 1.0, 0.0, t / (e1 * r1),
        -k + 1.0, 0.0, -t / (e1 * r1), 0.0,
        0.0, t / (e2 * r2), 0.0, -e1 * t / r2 - 1.0,
        -t / (e2 * r2), 0.0, e1 * t / r2 + 1.0, 0.0,
    )
}

type Poly = Vec<f64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &mut Poly, b: &Poly, s: f64) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (i, y) in b.iter().enumerate() {
        a[i] += s * y;
    }
}

fn det(m: &[Vec<Poly>]) -> Poly {
    if m.len() == 1 {
        return m[0][0].clone();
    }
    let mut out = vec![0.0];
    for j in 0..m.len() {
        let minor: Vec<Vec<Poly>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, p)| p.clone()).collect()).collect();
        poly_add(&mut out, &poly_mul(&m[0][j], &det(&minor)), if j % 2 == 0 { 1.0 } else { -1.0 });
    }
    out
}

/// Coefficients `[c₀, c₁, c₂, c₃, c₄]` of `det(λI − A)` by cofactor
/// expansion with polynomial entries.
pub fn charpoly_cofactor(a: &Matrix4<f64>) -> [f64; 5] {
    let m: Vec<Vec<Poly>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { vec![-a[(i, j)], 1.0] } else { vec![-a[(i, j)]] }).collect())
        .collect();
    let p = det(&m);
    std::array::from_fn(|k| p.get(k).copied().unwrap_or(0.0))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}
