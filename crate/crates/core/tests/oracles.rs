mod common;

use bsemitoric::classify::{
    admissible_pencils, cam_charpoly_reference, charpoly, classify_system, eig4, linearize, pencil_select,
    pole_candidates, t_critical, williamson_type, ScanConfig, WilliamsonType,
};
use bsemitoric::exec::Execution;
use bsemitoric::geometry::Manifold;
use bsemitoric::systems::{make_system, z_value, Observable, SystemId, SystemParams};
use bsemitoric::Error;
use common::*;
use nalgebra::Complex;

#[test]
fn classical_matrices_match_the_transcribed_display() {
    let mut r = rng(1);
    for _ in 0..50 {
        let (r1, r2, t) = random_cam_params(&mut r);
        for label in POLES {
            let c: Vec<char> = label.chars().collect();
            let want = transcribed_a0(sign(c[1]).value(), sign(c[2]).value(), r1, r2, t);
            let got = pole_matrix(SystemId::Cam, r1, r2, t, label);
            assert!((got - want).abs().max() <= 1e-12, "{label} at {r1} {r2} {t}");
        }
    }
}

#[test]
fn b_system_matrices_equal_classical_ones_at_designated_poles() {
    let cases = [
        (SystemId::Cam1, "p++"),
        (SystemId::Cam1, "p+-"),
        (SystemId::Cam2, "p++"),
        (SystemId::Cam2, "p+-"),
        (SystemId::Cam3, "p++"),
        (SystemId::Cam3, "p-+"),
    ];
    let mut r = rng(2);
    for _ in 0..50 {
        let (r1, r2, t) = random_cam_params(&mut r);
        for (id, label) in cases {
            let a = pole_matrix(id, r1, r2, t, label);
            let a0 = pole_matrix(SystemId::Cam, r1, r2, t, label);
            assert!((a - a0).abs().max() <= 1e-12, "{id} {label}");
        }
    }
}

#[test]
fn b_system_polynomials_equal_permuted_classical_ones() {
    let cases = [
        (SystemId::Cam2, "p-+", "p--"),
        (SystemId::Cam2, "p--", "p-+"),
        (SystemId::Cam3, "p+-", "p--"),
        (SystemId::Cam3, "p--", "p+-"),
    ];
    let mut r = rng(3);
    for _ in 0..100 {
        let (r1, r2, t) = random_cam_params(&mut r);
        for (id, label, reference) in cases {
            let p = charpoly_cofactor(&pole_matrix(id, r1, r2, t, label));
            let c: Vec<char> = reference.chars().collect();
            let (b, cc) = cam_charpoly_reference((sign(c[1]), sign(c[2])), r1, r2, t).unwrap();
            let want = [cc, 0.0, b, 0.0, 1.0];
            for k in 0..5 {
                assert!(close(p[k], want[k], 1e-10), "{id} {label} coefficient {k}: {} vs {}", p[k], want[k]);
            }
        }
    }
}

#[test]
fn cofactor_oracle_matches_reference_polynomials() {
    let mut r = rng(4);
    for _ in 0..100 {
        let (r1, r2, t) = random_cam_params(&mut r);
        for label in POLES {
            let a = pole_matrix(SystemId::Cam, r1, r2, t, label);
            let p = charpoly_cofactor(&a);
            let c: Vec<char> = label.chars().collect();
            let (b, cc) = cam_charpoly_reference((sign(c[1]), sign(c[2])), r1, r2, t).unwrap();
            let want = [cc, 0.0, b, 0.0, 1.0];
            let fl = charpoly(&a);
            for k in 0..5 {
                assert!(close(p[k], want[k], 1e-10), "{label} coefficient {k}");
            }
            // Faddeev–LeVerrier gives [a₁..a₄] of λ⁴ + a₁λ³ + … + a₄
            for k in 0..4 {
                assert!(close(fl[k], p[3 - k], 1e-10), "{label} a{}", k + 1);
            }
        }
    }
}

#[test]
fn eigenvalues_match_biquadratic_closed_form() {
    let mut r = rng(5);
    for _ in 0..100 {
        let (r1, r2, t) = random_cam_params(&mut r);
        for label in POLES {
            let a = pole_matrix(SystemId::Cam, r1, r2, t, label);
            let c: Vec<char> = label.chars().collect();
            let (b, cc) = cam_charpoly_reference((sign(c[1]), sign(c[2])), r1, r2, t).unwrap();
            let disc = Complex::new(b * b - 4.0 * cc, 0.0).sqrt();
            let mut roots = Vec::new();
            for mu in [(-b + disc) / 2.0, (-b - disc) / 2.0] {
                let s = mu.sqrt();
                roots.push(s);
                roots.push(-s);
            }
            let spec = eig4(&a).unwrap();
            for z in roots {
                let d = spec.values.iter().map(|v| (v - z).norm()).fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-9 * (1.0 + z.norm()), "{label} root {z} missing, spectrum {:?}", spec.values);
            }
        }
    }
}

#[test]
fn degenerate_at_critical_coupling() {
    let tc = t_critical(1.0, 2.0).unwrap();
    for t in [tc.t_minus, tc.t_plus] {
        let sys = make_system(SystemId::Cam1, SystemParams::angular_momenta(1.0, 2.0, t)).unwrap();
        let (_, p) = pole_candidates(Manifold::SphereTimesSphere).into_iter().find(|(l, _)| l == "p+-").unwrap();
        let al = linearize(&sys, &p, Observable::L).unwrap().entries;
        let ah = linearize(&sys, &p, Observable::H).unwrap().entries;
        assert!(matches!(pencil_select(&al, &ah), Err(Error::NoAdmissiblePencil { .. })), "t = {t}");
    }
}

#[test]
fn reversed_poles_are_elliptic_elliptic() {
    let sys = make_system(SystemId::BCsoReversed, SystemParams::spin_oscillator(1.0, 1.0)).unwrap();
    let report = classify_system(&sys, None, Execution::Sequential).unwrap();
    assert_eq!(report.fixed_points.len(), 2);
    for fp in &report.fixed_points {
        assert_eq!(fp.kind, WilliamsonType::EllipticElliptic);
        assert_eq!(fp.pencil, Some((1.0, 1.0)));
        let mut im: Vec<f64> = fp.spectrum.unwrap().values.iter().map(|v| v.im).collect();
        im.sort_by(f64::total_cmp);
        for (got, want) in im.iter().zip([-1.5, -0.5, 0.5, 1.5]) {
            assert!((got - want).abs() <= 1e-9);
        }
        assert!(fp.spectrum.unwrap().values.iter().all(|v| v.re.abs() <= 1e-9));
    }
}

#[test]
fn type_is_independent_of_the_admissible_pencil() {
    for id in SystemId::INTEGRABLE {
        let sys = make_system(id, SystemParams::default()).unwrap();
        for (label, p) in pole_candidates(sys.manifold()) {
            let al = linearize(&sys, &p, Observable::L).unwrap().entries;
            let ah = linearize(&sys, &p, Observable::H).unwrap().entries;
            let pencils = admissible_pencils(&al, &ah);
            assert!(pencils.len() >= 10, "{id} {label}: {} admissible", pencils.len());
            let first = williamson_type(&pencils[0].spectrum).unwrap();
            for c in &pencils {
                assert_eq!(williamson_type(&c.spectrum).unwrap(), first, "{id} {label} pencil ({}, {})", c.c1, c.c2);
            }
        }
    }
}

#[test]
fn spectra_are_symmetric_under_negation_and_conjugation() {
    let mut r = rng(6);
    for _ in 0..50 {
        let (r1, r2, t) = random_cam_params(&mut r);
        for id in [SystemId::Cam, SystemId::Cam1, SystemId::Cam2, SystemId::Cam3] {
            for label in POLES {
                let spec = eig4(&pole_matrix(id, r1, r2, t, label)).unwrap();
                assert!(spec.symmetry_defect() <= 1e-9 * (1.0 + spec.radius()));
            }
        }
    }
}

#[test]
fn fixed_points_stay_away_from_z() {
    for id in SystemId::INTEGRABLE.into_iter().filter(|id| id.is_b_system()) {
        let sys = make_system(id, SystemParams::default()).unwrap();
        let report = classify_system(&sys, Some(&ScanConfig::default()), Execution::Parallel).unwrap();
        assert!(!report.fixed_points.is_empty());
        for fp in &report.fixed_points {
            assert!(z_value(&sys, &fp.point).abs() >= 0.5, "{id} {}", fp.label);
        }
    }
}
