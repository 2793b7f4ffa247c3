use std::hint::black_box;

use cloud_ksvd::cloud::distributed_power_method;
use cloud_ksvd::coding::{lasso_encode, omp_encode, CodingConfig};
use cloud_ksvd::ksvd::{atom_update, power_atom_update};
use cloud_ksvd::network::consensus_sum;
use cloud_ksvd::rng::{gaussian_vector, random_unit_vector};
use cloud_ksvd::{
    gen_erdos_renyi_connected, init_dictionary, local_degree_weights, stream_rng, Mat, Stream,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn random_mat(seed: u64, rows: usize, cols: usize) -> Mat {
    let mut rng = stream_rng(seed, Stream::Lanes);
    let columns: Vec<Vec<f64>> = (0..cols).map(|_| gaussian_vector(&mut rng, rows)).collect();
    Mat::from_columns(&columns).unwrap()
}

fn coding(c: &mut Criterion) {
    let mut g = c.benchmark_group("coding");
    for (n, k) in [(20, 50), (256, 100)] {
        let d = init_dictionary(n, k, 1);
        let y = random_unit_vector(&mut stream_rng(2, Stream::Lanes), n);
        g.bench_function(BenchmarkId::new("omp_t0_3", format!("{n}x{k}")), |b| {
            b.iter(|| omp_encode(black_box(&y), &d, 3).unwrap())
        });
        let cfg = CodingConfig::new(3);
        g.bench_function(BenchmarkId::new("lasso_tau_0.1", format!("{n}x{k}")), |b| {
            b.iter(|| lasso_encode(black_box(&y), &d, 0.1, &cfg).unwrap())
        });
    }
    g.finish();
}

fn atom_updates(c: &mut Criterion) {
    let mut g = c.benchmark_group("atom_update");
    for (n, cols) in [(20, 30), (256, 60)] {
        let e = random_mat(3, n, cols);
        let d_ref = random_unit_vector(&mut stream_rng(4, Stream::Lanes), n);
        g.bench_function(BenchmarkId::new("reference", format!("{n}x{cols}")), |b| {
            b.iter(|| atom_update(black_box(&e), &d_ref).unwrap())
        });
        g.bench_function(BenchmarkId::new("power_15", format!("{n}x{cols}")), |b| {
            b.iter(|| power_atom_update(black_box(&e), &d_ref, &d_ref, 15).unwrap())
        });
    }
    g.finish();
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("network");
    for sites in [10, 50] {
        let w = local_degree_weights(&gen_erdos_renyi_connected(sites, 0.5, 5).unwrap());
        let mut rng = stream_rng(6, Stream::Lanes);
        let z: Vec<Vec<f64>> = (0..sites).map(|_| gaussian_vector(&mut rng, 20)).collect();
        g.bench_function(BenchmarkId::new("consensus_sum_15", sites), |b| {
            b.iter(|| consensus_sum(black_box(&z), &w, 15).unwrap())
        });
        let parts: Vec<Mat> = (0..sites)
            .map(|i| random_mat(100 + i as u64, 20, 10).outer_gram())
            .collect();
        let q_init = random_unit_vector(&mut rng, 20);
        g.bench_function(BenchmarkId::new("dpm_tp15_tc15", sites), |b| {
            b.iter(|| distributed_power_method(black_box(&parts), &w, 15, 15, &q_init).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, coding, atom_updates, network);
criterion_main!(benches);
