use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tesim_bench::geant_fixture;
use tesim_core::lp::{build_arc_lp, build_lp, eval_piecewise_delay, solve_lp, DEFAULT_TOLERANCE};
use tesim_core::paths::{build_path_set, PathSource};
use tesim_core::raecke::{extract_weighted_paths, raecke_distribution};
use tesim_core::sim::{simulate_step, system_paths, RunOptions};
use tesim_core::{CostMetric, Objective, RaeckeParams, TeSystem};

fn paths(c: &mut Criterion) {
    let (t, _) = geant_fixture(1.0);
    c.bench_function("ksp_all_pairs_k4", |b| {
        b.iter(|| build_path_set(black_box(&t), PathSource::Ksp(CostMetric::HopCount), 4))
    });
    let mut g = c.benchmark_group("raecke");
    g.sample_size(10);
    g.bench_function("distribution_8_trees", |b| {
        b.iter(|| {
            let d = raecke_distribution(black_box(&t), &RaeckeParams::default());
            extract_weighted_paths(&t, &d)
        })
    });
    g.finish();
}

fn lp(c: &mut Criterion) {
    let (t, tm) = geant_fixture(1.2);
    let ksp = build_path_set(&t, PathSource::Ksp(CostMetric::HopCount), 4);
    let mut g = c.benchmark_group("lp");
    g.sample_size(10);
    for obj in [Objective::LoadBalance, Objective::AverageDelay] {
        let m = build_lp(&ksp, &tm, &t, obj);
        g.bench_function(format!("ksp_{}", obj.tag()), |b| b.iter(|| solve_lp(black_box(&m), DEFAULT_TOLERANCE)));
        let arc = build_arc_lp(&t, &tm, obj);
        g.bench_function(format!("arc_{}", obj.tag()), |b| b.iter(|| solve_lp(black_box(&arc), DEFAULT_TOLERANCE)));
    }
    g.finish();
}

fn step(c: &mut Criterion) {
    let (t, tm) = geant_fixture(1.2);
    let sys = TeSystem::from_name("KSP+AD").unwrap();
    let ps = system_paths(&sys, &t, &RunOptions::default()).unwrap();
    let mut g = c.benchmark_group("step");
    g.sample_size(10);
    g.bench_function("ksp_ad", |b| {
        b.iter(|| simulate_step(Objective::AverageDelay, Some(&ps), black_box(&tm), &t, DEFAULT_TOLERANCE))
    });
    g.finish();
    c.bench_function("piecewise_delay", |b| b.iter(|| eval_piecewise_delay(black_box(0.87))));
}

criterion_group!(benches, paths, lp, step);
criterion_main!(benches);
