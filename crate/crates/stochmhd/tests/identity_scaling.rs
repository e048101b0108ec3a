//! Identity residuals stay at round-off as the grid is refined.

use std::collections::BTreeMap;

use stochmhd::identities::{run_seed, IdentityKind, SuiteParams};

/// Residuals below this are indistinguishable from round-off noise.
const NOISE_FLOOR: f64 = 1e-15;

fn worst_by_id(n: usize) -> BTreeMap<String, f64> {
    let p = SuiteParams {
        n,
        ..SuiteParams::default()
    };
    let mut worst = BTreeMap::new();
    for seed in 1..=3 {
        for r in run_seed(&p, seed).unwrap() {
            if r.kind == IdentityKind::Informational {
                continue;
            }
            let e = worst.entry(r.identity_id.clone()).or_insert(0.0f64);
            *e = e.max(r.relative_residual);
        }
    }
    worst
}

#[test]
fn residuals_do_not_grow_under_refinement() {
    let levels: Vec<BTreeMap<String, f64>> = [32, 64, 128].into_iter().map(worst_by_id).collect();
    for id in levels[0].keys() {
        let series: Vec<f64> = levels.iter().map(|l| l[id].max(NOISE_FLOOR)).collect();
        for w in series.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio < 10.0 && ratio > 0.1, "{id}: {series:?}");
        }
        assert!(series.iter().all(|&r| r < 1e-10), "{id}: {series:?}");
    }
}
