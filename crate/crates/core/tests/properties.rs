use cloud_ksvd::cloud::{distributed_power_method, power_method_iterates, sign_align};
use cloud_ksvd::coding::omp_encode;
use cloud_ksvd::ksvd::atom_update;
use cloud_ksvd::linalg::{dot, norm2, outer};
use cloud_ksvd::mnist::{encode_idx_images, parse_idx_images, resample_28_to_16};
use cloud_ksvd::network::{consensus_rounds, consensus_sum, estimate_mixing_time, Topology};
use cloud_ksvd::rng::{gaussian_vector, random_unit_vector};
use cloud_ksvd::{
    cloud_ksvd, gen_erdos_renyi_connected, gen_synthetic_sites, init_dictionary,
    local_degree_weights, stream_rng, CloudConfig, Mat, Stream, SyntheticConfig,
};
use proptest::prelude::*;

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, Stream::Lanes)
}

fn random_mat(seed: u64, rows: usize, cols: usize) -> Mat {
    let mut r = rng(seed);
    let columns: Vec<Vec<f64>> = (0..cols).map(|_| gaussian_vector(&mut r, rows)).collect();
    Mat::from_columns(&columns).unwrap()
}

/// `max_i ||e_i^T W^t - 1^T / N||_2` by explicit powering.
fn row_distance(w: &Mat, t: usize) -> f64 {
    let n = w.rows();
    let mut p = Mat::identity(n);
    for _ in 0..t {
        p = p.matmul(w).unwrap();
    }
    (0..n)
        .map(|i| {
            p.row(i)
                .iter()
                .map(|v| (v - 1.0 / n as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sign_alignment_points_toward_reference(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let (d_ref, q) = (random_unit_vector(&mut r, 7), random_unit_vector(&mut r, 7));
        let out = sign_align(&d_ref, &q);
        prop_assert!(dot(&d_ref, &out) >= 0.0);
        prop_assert!(out == q || out.iter().zip(&q).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn omp_codes_are_sparse_least_squares_fits(seed in 0u64..10_000, t0 in 1usize..5) {
        let d = init_dictionary(10, 16, seed);
        let y = random_unit_vector(&mut rng(seed), 10);
        let code = omp_encode(&y, &d, t0).unwrap();
        prop_assert!(code.nnz() <= t0);
        let residual = code.residual(&y, &d);
        for &j in code.support() {
            prop_assert!(dot(d.atom(j), &residual).abs() < 1e-10);
        }
        prop_assert!(norm2(&residual) <= 1.0 + 1e-12);
    }

    #[test]
    fn atom_update_beats_random_unit_factors(seed in 0u64..10_000) {
        let e = random_mat(seed, 6, 9);
        let mut r = rng(seed + 1);
        let (d, x) = atom_update(&e, &random_unit_vector(&mut r, 6)).unwrap();
        let best = e.sub(&outer(&d, &x)).unwrap().frobenius_norm();
        for _ in 0..20 {
            let d2 = random_unit_vector(&mut r, 6);
            let other = e.sub(&outer(&d2, &e.tr_matvec(&d2))).unwrap().frobenius_norm();
            prop_assert!(best <= other + 1e-8);
        }
    }

    #[test]
    fn long_corrected_consensus_recovers_the_sum(n in 2usize..10, seed in 0u64..10_000) {
        let w = local_degree_weights(&gen_erdos_renyi_connected(n, 0.6, seed).unwrap());
        let mut r = rng(seed);
        let z: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vector(&mut r, 3)).collect();
        let total: Vec<f64> = (0..3).map(|j| z.iter().map(|v| v[j]).sum()).collect();
        let run = consensus_sum(&z, &w, 1500).unwrap();
        for est in &run.estimates {
            for (a, b) in est.iter().zip(&total) {
                prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn equal_states_are_fixed_by_gossip(n in 1usize..12, seed in 0u64..10_000) {
        let w = local_degree_weights(&gen_erdos_renyi_connected(n, 0.5, seed).unwrap());
        let z = vec![vec![0.25, -3.0]; n];
        for state in consensus_rounds(&w, &z, 7) {
            for (a, b) in state.iter().zip(&z[0]) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs());
            }
        }
    }

    #[test]
    fn mixing_time_is_the_first_half_crossing(n in 1usize..10, seed in 0u64..10_000) {
        let w = local_degree_weights(&gen_erdos_renyi_connected(n, 0.4, seed).unwrap());
        let t = estimate_mixing_time(&w).unwrap();
        prop_assert!(row_distance(w.matrix(), t) <= 0.5);
        if t > 1 {
            prop_assert!(row_distance(w.matrix(), t - 1) > 0.5);
        }
    }

    #[test]
    fn uniform_weights_reproduce_centralized_power_method(n in 1usize..8, seed in 0u64..10_000) {
        let m = random_mat(seed, 5, 8).outer_gram();
        let parts = vec![m.scale(1.0 / n as f64); n];
        let w = local_degree_weights(&Topology::complete(n));
        let q_init = random_unit_vector(&mut rng(seed + 7), 5);
        let run = distributed_power_method(&parts, &w, 12, 1, &q_init).unwrap();
        let central = power_method_iterates(&m, &q_init, 12).unwrap();
        for q in &run.estimates {
            for (a, b) in q.iter().zip(&central[11]) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn idx_round_trip_preserves_byte_pixels(seed in 0u64..10_000, count in 1usize..5) {
        let mut r = rng(seed);
        let images: Vec<Vec<f64>> = (0..count)
            .map(|_| gaussian_vector(&mut r, 12).iter().map(|v| (v.abs() * 60.0).min(255.0).round() / 255.0).collect())
            .collect();
        let (rows, cols, parsed) = parse_idx_images(&encode_idx_images(3, 4, &images)).unwrap();
        prop_assert_eq!((rows, cols), (3, 4));
        prop_assert_eq!(parsed, images);
    }

    #[test]
    fn resampling_keeps_constant_images_constant(level in 0.0f64..1.0) {
        let out = resample_28_to_16(&vec![level; 784]);
        prop_assert_eq!(out.len(), 256);
        prop_assert!(out.iter().all(|v| (v - level).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cloud_sites_keep_unit_atoms_and_full_traces(seed in 0u64..1000, sites in 1usize..4) {
        let data = gen_synthetic_sites(
            &SyntheticConfig { sites, samples_per_site: 30, n: 8, k: 12, t0: 2, sigma2: 0.01 },
            seed,
        )
        .unwrap();
        let w = local_degree_weights(&gen_erdos_renyi_connected(sites, 0.7, seed).unwrap());
        let (states, trace) = cloud_ksvd(&data.sites, 12, &w, &CloudConfig::new(2, 3, 5, 4, seed)).unwrap();
        prop_assert_eq!(trace.records.len(), 3 * 12);
        prop_assert_eq!(trace.errors.len(), 3);
        for s in &states {
            prop_assert!(s.dictionary.max_norm_deviation() < 1e-12);
        }
    }
}
