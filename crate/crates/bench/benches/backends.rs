use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use voxid_bench::embedding_set;
use voxid_core::classifier::{svm_predict, train_svm};
use voxid_core::plda::{plda_identify, train_plda};
use voxid_core::{PldaOptions, SvmParams};

fn backends(c: &mut Criterion) {
    let (x, y) = embedding_set(10);
    let svm = SvmParams::default();
    let plda = PldaOptions::default();
    let mut group = c.benchmark_group("backend");
    group.sample_size(10);
    group.bench_function("svm_train_10spk", |b| {
        b.iter(|| train_svm(black_box(&x), &y, &svm).unwrap())
    });
    group.bench_function("plda_train_10spk", |b| {
        b.iter(|| train_plda(black_box(&x), &y, &plda).unwrap())
    });
    let (model, _) = train_svm(&x, &y, &svm).unwrap();
    group.bench_function("svm_predict", |b| {
        b.iter(|| svm_predict(&model, black_box(&x[3])).unwrap())
    });
    let trained = train_plda(&x, &y, &plda).unwrap();
    group.bench_function("plda_identify", |b| {
        b.iter(|| plda_identify(&trained.model, black_box(&x[3])).unwrap())
    });
    group.finish();
}

criterion_group!(benches, backends);
criterion_main!(benches);
