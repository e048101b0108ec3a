//! Monte Carlo entry means of the resonant product converge at rate 1/sqrt(samples).

use rayon::prelude::*;

use stochmhd::noise::sample_at;
use stochmhd::renorm::{exact_entry_means, sample_entry_means};
use stochmhd::spectral::Grid;
use stochmhd::stats::linear_fit;

#[test]
fn entry_means_converge_at_monte_carlo_rate() {
    let (lambda, t, nu) = (4.0, 0.5, 1.0);
    let g = Grid::new(16).unwrap();
    let exact = exact_entry_means(&g, lambda, t, nu).unwrap();
    let sizes = [16usize, 64, 256, 1024];
    let replicates = 24u64;
    let total = *sizes.last().unwrap();
    let pool: Vec<Vec<[[f64; 4]; 4]>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            (0..total as u64)
                .map(|s| sample_entry_means(&sample_at(&g, nu, t, 1000 + r, s).unwrap(), lambda))
                .collect()
        })
        .collect();
    let rms: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let mut sq = 0.0;
            for rep in &pool {
                for i in 0..4 {
                    for j in 0..4 {
                        let mean = rep[..n].iter().map(|m| m[i][j]).sum::<f64>() / n as f64;
                        sq += (mean - exact[i][j]).powi(2);
                    }
                }
            }
            (sq / (16.0 * replicates as f64)).sqrt()
        })
        .collect();
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = rms.iter().map(|e| e.ln()).collect();
    let (_, slope, _) = linear_fit(&x, &y);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}, rms {rms:?}");
}
