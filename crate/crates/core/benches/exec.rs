use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bsemitoric::classify::{find_fixed_points, ScanConfig};
use bsemitoric::exec::Execution;
use bsemitoric::imaging::{sample_image, ImageWindow, SamplingDomain, Subset};
use bsemitoric::systems::{make_system, SystemId, SystemParams};
use bsemitoric::verify::{involution_suite, DEFAULT_SEED};

const POLICIES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(e: Execution) -> &'static str {
    match e {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn image(c: &mut Criterion) {
    let sys = make_system(SystemId::BCso, SystemParams::default()).unwrap();
    let window = ImageWindow::default();
    let mut g = c.benchmark_group("sample_image_100k");
    g.sample_size(10);
    for e in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(label(e)), |b| {
            b.iter(|| sample_image(&sys, 100_000, DEFAULT_SEED, &window, Subset::Whole, &SamplingDomain::default(), e).unwrap())
        });
    }
    g.finish();
}

fn fixed_point_scan(c: &mut Criterion) {
    let sys = make_system(SystemId::Cam1, SystemParams::default()).unwrap();
    let scan = ScanConfig::default();
    let mut g = c.benchmark_group("fixed_point_scan_cam1");
    g.sample_size(10);
    for e in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(label(e)), |b| b.iter(|| find_fixed_points(&sys, Some(&scan), e)));
    }
    g.finish();
}

fn involution(c: &mut Criterion) {
    let sys = make_system(SystemId::Cam2, SystemParams::default()).unwrap();
    let mut g = c.benchmark_group("involution_suite_cam2");
    g.sample_size(10);
    for e in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(label(e)), |b| b.iter(|| involution_suite(&sys, 1000, DEFAULT_SEED, e)));
    }
    g.finish();
}

criterion_group!(benches, image, fixed_point_scan, involution);
criterion_main!(benches);
