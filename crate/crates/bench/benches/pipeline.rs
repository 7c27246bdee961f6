use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use depscope_core::bytecode::{load_jar_bytes, ArtifactAnalysis, ClassModel};
use depscope_core::metrics::{compute_metrics, BinConfig};
use depscope_core::version::compare_raw;
use depscope_testkit::alerts::{p3, P3_CURRENT};
use depscope_testkit::corpus::generate;

fn versions() -> Vec<String> {
    let qualifiers = ["", "-alpha1", "-beta-2", "-rc", "-SNAPSHOT", ".Final", "-jre", "-sp1"];
    let mut out = Vec::new();
    for major in 0..5 {
        for minor in 0..10 {
            for patch in 0..5 {
                let q = qualifiers[(major * 7 + minor * 3 + patch) % qualifiers.len()];
                out.push(format!("{major}.{minor}.{patch}{q}"));
            }
        }
    }
    out.reverse();
    out
}

fn version_sort(c: &mut Criterion) {
    let list = versions();
    c.bench_function("sort 250 versions", |b| {
        b.iter_batched(
            || list.clone(),
            |mut l| {
                l.sort_by(|x, y| compare_raw(x, y));
                l
            },
            BatchSize::SmallInput,
        )
    });
}

fn bytecode(c: &mut Criterion) {
    let ws = p3();
    let version = ws.version(P3_CURRENT);
    let jar = version.jar_bytes();
    let classes: Vec<Vec<u8>> = version.classes.iter().map(|s| s.compile(true)).collect();
    c.bench_function("parse class models", |b| {
        b.iter(|| {
            for bytes in &classes {
                black_box(ClassModel::parse(bytes).unwrap());
            }
        })
    });
    c.bench_function("analyze jar", |b| {
        b.iter(|| {
            let loaded = load_jar_bytes(&jar, "bench").unwrap();
            black_box(ArtifactAnalysis::from_classes(&version.version_ref, "0", &loaded))
        })
    });
}

fn metrics(c: &mut Criterion) {
    let input = generate(1, 60, 20).metrics_input();
    let bins = BinConfig::default();
    c.bench_function("metrics over 60 projects", |b| {
        b.iter(|| black_box(compute_metrics(&input, &bins)))
    });
}

criterion_group!(benches, version_sort, bytecode, metrics);
criterion_main!(benches);
