//! Sequential vs parallel execution of the three data-parallel hot loops.
//! Both modes produce identical results; only wall-clock time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evolm::benchfns::{lookup, run_many, sca_config};
use evolm::cnn::{CnnArchitecture, CnnModel};
use evolm::dataset::{class_indices, synthesize};
use evolm::elm::one_hot;
use evolm::exec::Execution;
use evolm::pipeline::{candidate_config, evolve_elm};
use evolm::RngStream;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn extraction(c: &mut Criterion) {
    let data = synthesize(40, &mut RngStream::new(1, 0)).unwrap();
    let arch = CnnArchitecture::parse("in_6c_2p_12c_2p").unwrap();
    let cnn = CnnModel::new(arch, 2, &mut RngStream::new(2, 0)).freeze();
    let mut group = c.benchmark_group("feature_extraction");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, data.train.len()), |b| {
            b.iter(|| cnn.extract_features(&data.train, exec).unwrap())
        });
    }
    group.finish();
}

fn sca_fitness(c: &mut Criterion) {
    let data = synthesize(40, &mut RngStream::new(3, 0)).unwrap();
    let arch = CnnArchitecture::parse("in_6c_2p_12c_2p").unwrap();
    let cnn = CnnModel::new(arch, 2, &mut RngStream::new(4, 0)).freeze();
    let features = cnn.extract_features(&data.train, Execution::Sequential).unwrap();
    let targets = one_hot(&class_indices(&data.train), 2).unwrap();
    let config = candidate_config(features.cols(), 40, 10, 3, 2.0, 5);
    let mut group = c.benchmark_group("sca_elm_evolution");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, config.population), |b| {
            b.iter(|| evolve_elm(&features, &targets, &config, 40, exec).unwrap())
        });
    }
    group.finish();
}

fn benchmark_seeds(c: &mut Criterion) {
    let f = lookup("tf1").unwrap();
    let base = sca_config(&f, 30, 100, 2.0);
    let mut group = c.benchmark_group("benchmark_runs");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 8), |b| b.iter(|| run_many(&f, &base, 8, 6, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, extraction, sca_fitness, benchmark_seeds);
criterion_main!(benches);
