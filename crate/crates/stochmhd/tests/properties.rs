//! Randomized invariants of the spectral, Besov, noise and ledger layers.

use proptest::prelude::*;

use stochmhd::besov::{block_symbol, bony_scalar, freq_project, LpPartition, Part};
use stochmhd::dynamics::StoppingLedger;
use stochmhd::harness::{parse_config_str, ExperimentConfig, ExperimentKind};
use stochmhd::noise::NoiseState;
use stochmhd::renorm::r_lambda;
use stochmhd::spectral::random::{random_scalar, random_vector};
use stochmhd::spectral::serialize::{read_binary, write_binary};
use stochmhd::spectral::{leray_project, Grid};

fn grid_size() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![8usize, 16, 32])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_of_unity(r in 0.0f64..200.0) {
        let part = LpPartition { j_max: 9 };
        let s: f64 = part.blocks().map(|j| block_symbol(j, r)).sum();
        prop_assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn high_plus_low_is_identity(n in grid_size(), seed in any::<u64>(), lam in 0.5f64..40.0) {
        let g = Grid::new(n).unwrap();
        let f = random_scalar(&g, seed, 1.0, (n / 3) as i64);
        let sum = &freq_project(&f, lam, Part::High).unwrap() + &freq_project(&f, lam, Part::Low).unwrap();
        prop_assert!((&sum - &f).norm() <= 1e-15 * f.norm());
    }

    #[test]
    fn leray_is_idempotent_and_divergence_free(n in grid_size(), seed in any::<u64>()) {
        let g = Grid::new(n).unwrap();
        let p = leray_project(&random_vector(&g, seed, 1.0, (n / 2) as i64));
        prop_assert!(p.divergence_residual() < 1e-14 * p.norm().max(1.0));
        prop_assert!((&leray_project(&p) - &p).norm() <= 1e-15 * p.norm());
    }

    #[test]
    fn binary_roundtrip_is_exact(n in grid_size(), seed in any::<u64>()) {
        let g = Grid::new(n).unwrap();
        let a = random_scalar(&g, seed, 0.5, (n / 2) as i64);
        let b = random_scalar(&g, seed ^ 1, 2.0, 3);
        let mut buf = Vec::new();
        write_binary(&mut buf, &[&a, &b]).unwrap();
        let back = read_binary(buf.as_slice(), &g).unwrap();
        prop_assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn bony_pieces_reconstruct_product(n in grid_size(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let g = Grid::new(n).unwrap();
        let f = random_scalar(&g, s1, 1.0, (n / 3) as i64);
        let h = random_scalar(&g, s2, 1.0, (n / 3) as i64);
        let b = bony_scalar(&f, &h).unwrap();
        let sum = &(&b.lt + &b.gt) + &b.res;
        prop_assert!((&sum - &f.product(&h)).norm() < 1e-12 * (f.norm() * h.norm()).max(1e-300));
    }

    #[test]
    fn noise_is_reproducible_and_real(seed in any::<u64>(), h in 1e-4f64..0.5) {
        let g = Grid::new(8).unwrap();
        let mut a = NoiseState::new(&g, 1.0, seed).unwrap();
        let mut b = NoiseState::new(&g, 1.0, seed).unwrap();
        for _ in 0..3 {
            a.ou_step(h).unwrap();
            b.ou_step(h).unwrap();
        }
        prop_assert_eq!(&a.f_u, &b.f_u);
        let (xu, xb) = a.fields(None);
        prop_assert_eq!(xu.hermitian_residual(), 0.0);
        prop_assert!(xb.divergence_residual() < 1e-13 * xb.norm().max(1.0));
    }

    #[test]
    fn ledger_follows_definition(norm0 in 0.0f64..5.0, steps in prop::collection::vec(0.0f64..12.0, 1..40), a in 2.75f64..=3.0) {
        let mut l = StoppingLedger::new(norm0, a);
        for (i, &x) in steps.iter().enumerate() {
            let lam = l.observe(0.01 * (i + 1) as f64, x);
            prop_assert_eq!(lam, l.lambda());
        }
        prop_assert!(l.verify().is_ok(), "{:?}", l.verify());
        let idx: Vec<u64> = l.entries.iter().map(|e| e.index).collect();
        prop_assert!(idx.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn r_lambda_grows_in_time_and_cutoff(t in 0.01f64..5.0, lam in 2.0f64..40.0) {
        let r = r_lambda(lam, t, 1.0).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!(r_lambda(lam, 2.0 * t, 1.0).unwrap() >= r);
        prop_assert!(r_lambda(2.0 * lam, t, 1.0).unwrap() >= r);
    }

    #[test]
    fn config_roundtrip(n in (2usize..64).prop_map(|k| 2 * k), nu in 1e-3f64..10.0, dt in 1e-6f64..0.1, a in 2.75f64..=3.0, seeds in prop::collection::vec(any::<u64>(), 1..4)) {
        let mut c = ExperimentConfig::new(ExperimentKind::Simulate, n);
        c.nu = nu;
        c.dt = dt;
        c.exponent = a;
        c.seeds = seeds;
        prop_assert_eq!(parse_config_str(&c.canonical_json()).unwrap(), c);
    }
}
