mod common;

use std::f64::consts::{PI, TAU};

use bsemitoric::classify::{linearize, pole_candidates, t_critical};
use bsemitoric::geometry::{to_chart, ChartId, Manifold, Point, SphereChart};
use bsemitoric::imaging::{reversed_boundary, reversed_excess};
use bsemitoric::loci::{rank_at, reversed_rank1_analytic};
use bsemitoric::systems::{
    eval_df, eval_f, hamiltonian_field, make_system, z_value, Observable, SystemDef, SystemId, SystemParams,
};
use nalgebra::Matrix4;
use proptest::prelude::*;

fn system(id: SystemId) -> SystemDef {
    make_system(id, SystemParams::default()).unwrap()
}

/// Strategy for a valid point in a random chart of `m`, kept `1e-3` away
/// from chart boundaries.
fn point_in(m: Manifold) -> impl Strategy<Value = Point> {
    let atlas = ChartId::atlas(m);
    (0..atlas.len(), prop::array::uniform4(0.0f64..1.0)).prop_map(move |(c, u)| {
        let chart = atlas[c];
        let mut q = [0.0; 4];
        for f in 0..2 {
            let (a, b) = (u[2 * f], u[2 * f + 1]);
            let (x, y) = match chart.sphere(f) {
                Some(SphereChart::Cylindrical) => (a * TAU, (2.0 * b - 1.0) * 0.999),
                Some(SphereChart::Hemisphere(_)) => {
                    let r = 0.999 * a.sqrt();
                    (r * (b * TAU).cos(), r * (b * TAU).sin())
                }
                None => (6.0 * a - 3.0, 6.0 * b - 3.0),
            };
            q[2 * f] = x;
            q[2 * f + 1] = y;
        }
        Point::new(chart, q).unwrap()
    })
}

fn integrable() -> impl Strategy<Value = SystemId> {
    prop::sample::select(SystemId::INTEGRABLE.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chart_round_trip(p in point_in(Manifold::SphereTimesSphere)) {
        for target in ChartId::atlas(Manifold::SphereTimesSphere) {
            if let Ok(q) = to_chart(&p, target) {
                let back = to_chart(&q, p.chart).unwrap();
                prop_assert!(back.chart_distance(&p) <= 1e-12);
            }
        }
    }

    #[test]
    fn form_is_antisymmetric_and_nondegenerate(id in integrable(), p in point_in(Manifold::SphereTimesPlane), q in point_in(Manifold::SphereTimesSphere)) {
        let sys = system(id);
        let p = if sys.manifold() == Manifold::SphereTimesPlane { p } else { q };
        let m = sys.form.matrix_at(&p).unwrap().entries;
        prop_assert_eq!(m.transpose(), -m);
        prop_assert!(m.iter().all(|v| v.is_finite()));
        prop_assert!(m.determinant().abs() > 0.0);
    }

    #[test]
    fn hamiltonian_field_preserves_both_integrals(id in integrable(), p in point_in(Manifold::SphereTimesPlane), q in point_in(Manifold::SphereTimesSphere)) {
        let sys = system(id);
        let p = if sys.manifold() == Manifold::SphereTimesPlane { p } else { q };
        prop_assume!(z_value(&sys, &p).abs() > 1e-3);
        let df = eval_df(&sys, &p).unwrap();
        for which in [Observable::L, Observable::H] {
            let x = hamiltonian_field(&sys, &p, which).unwrap();
            let scale = 1.0 + df.norm() * x.norm();
            prop_assert!((df.row(0) * x)[0].abs() <= 1e-10 * scale);
            prop_assert!((df.row(1) * x)[0].abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn cam1_antipodal_symmetry(theta1 in 0.0..TAU, z1 in -0.99f64..0.99, theta2 in 0.0..TAU, z2 in -0.99f64..0.99, t in 0.0f64..=1.0) {
        prop_assume!(z1.abs() > 1e-3);
        let sys = make_system(SystemId::Cam1, SystemParams::angular_momenta(1.0, 2.0, t)).unwrap();
        let chart = ChartId::cylindrical(Manifold::SphereTimesSphere);
        let a = eval_f(&sys, &Point::new(chart, [theta1, z1, theta2, z2]).unwrap()).unwrap();
        let b = eval_f(&sys, &Point::new(chart, [theta1 + PI, -z1, theta2, z2]).unwrap()).unwrap();
        prop_assert!((a.l - b.l).abs() <= 1e-12 * (1.0 + a.l.abs()));
        prop_assert!((a.h + b.h).abs() <= 1e-12);
    }

    #[test]
    fn bcso_point_reflection_symmetry(x in -0.7f64..0.7, y in -0.7f64..0.7, u in -3.0f64..3.0, v in -3.0f64..3.0) {
        let sys = system(SystemId::BCso);
        let chart = ChartId::cartesian(Manifold::SphereTimesPlane, bsemitoric::geometry::Sign::Plus, bsemitoric::geometry::Sign::Plus);
        let a = eval_f(&sys, &Point::new(chart, [x, y, u, v]).unwrap()).unwrap();
        let b = eval_f(&sys, &Point::new(chart, [-x, -y, -u, -v]).unwrap()).unwrap();
        prop_assert!((a.l - b.l).abs() <= 1e-12 && (a.h - b.h).abs() <= 1e-12);
    }

    #[test]
    fn rank_on_z_is_positive(id in prop::sample::select(vec![SystemId::BCso, SystemId::BCsoReversed, SystemId::Cam1, SystemId::Cam2, SystemId::Cam3]), a in 0.0..TAU, b in -0.99f64..0.99, c in 0.0..TAU) {
        let sys = system(id);
        let f = sys.singular_factor().unwrap();
        let mut q = match sys.manifold() {
            Manifold::SphereTimesPlane => [a, 0.0, 3.0 * b, 3.0 * (c / PI - 1.0)],
            Manifold::SphereTimesSphere => [a, b, c, b],
        };
        q[2 * f + 1] = 0.0;
        let p = Point::new(ChartId::cylindrical(sys.manifold()), q).unwrap();
        prop_assert_eq!(z_value(&sys, &p), 0.0);
        prop_assert!(rank_at(&sys, &p).unwrap().rank >= 1);
    }

    #[test]
    fn reversed_locus_image_is_theta_independent(z in 0.02f64..0.98, rho1 in 0.3f64..3.0, rho2 in 0.3f64..3.0, plus in any::<bool>()) {
        let params = SystemParams::spin_oscillator(rho1, rho2);
        let sys = make_system(SystemId::BCsoReversed, params).unwrap();
        let branch = if plus { bsemitoric::geometry::Sign::Plus } else { bsemitoric::geometry::Sign::Minus };
        let vals: Vec<(f64, f64)> = (0..16)
            .map(|k| {
                let p = reversed_rank1_analytic(&params, TAU * k as f64 / 16.0, z, branch).unwrap();
                let v = eval_f(&sys, &p).unwrap();
                (v.l, v.h)
            })
            .collect();
        let n = vals.len() as f64;
        let (ml, mh) = vals.iter().fold((0.0, 0.0), |(a, b), v| (a + v.0 / n, b + v.1 / n));
        let var = vals.iter().map(|v| (v.0 - ml).powi(2) + (v.1 - mh).powi(2)).sum::<f64>() / n;
        prop_assert!(var <= 1e-18, "variance {var:e}");
        let w = reversed_boundary(&params, z, branch).unwrap();
        prop_assert!(reversed_excess(&params, w.l, w.h).abs() <= 1e-9 * (1.0 + w.h.abs()));
    }

    #[test]
    fn linearized_operators_are_hamiltonian(r1 in 0.3f64..2.0, dr in 0.05f64..2.0, t in 0.0f64..=1.0, id in prop::sample::select(vec![SystemId::Cam, SystemId::Cam1, SystemId::Cam2, SystemId::Cam3])) {
        let sys = make_system(id, SystemParams::angular_momenta(r1, r1 + dr, t)).unwrap();
        for (_, p) in pole_candidates(Manifold::SphereTimesSphere) {
            let omega = sys.form.matrix_at(&p).unwrap().entries;
            for which in [Observable::L, Observable::H] {
                let a = linearize(&sys, &p, which).unwrap().entries;
                let s: Matrix4<f64> = omega * a;
                prop_assert!((s - s.transpose()).abs().max() <= 1e-10);
            }
        }
    }

    #[test]
    fn critical_couplings_are_ordered(r1 in 0.01f64..10.0, ratio in 1.0f64..50.0) {
        let c = t_critical(r1, r1 * ratio).unwrap();
        prop_assert!(0.0 < c.t_minus && c.t_minus < 0.5 && 0.5 < c.t_plus && c.t_plus <= 1.0 + 1e-15);
    }
}
