use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Ambient, GridSet};
use crate::verify::{self, CountMethod};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub beta: f64,
    #[serde(rename = "N")]
    pub modulus: u32,
    pub trials: u32,
    pub seed: u64,
    /// `β²`, the expected density of `B × B`.
    pub alpha: f64,
    pub mean_skew_count: f64,
    /// Mean skew count divided by `N⁴`.
    pub mean_skew_normalized: f64,
    pub alpha_5_2: f64,
    pub alpha_3: f64,
    /// Mean skew count over `α^{5/2}N⁴`.
    pub ratio_5_2: f64,
    /// Mean skew count over `α³N⁴`.
    pub ratio_3: f64,
    pub mean_corner_count: f64,
    /// Mean corner count over `α²N³`.
    pub corner_ratio: f64,
}

/// Random product sets `A = B × B ⊆ (Z/NZ)²` with `B` of density `β`.
pub fn product_set_experiment(beta: f64, modulus: u32, trials: u32, seed: u64) -> Result<ExperimentReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Parameter(format!("beta must lie in [0, 1], got {beta}")));
    }
    if modulus == 0 || modulus > 256 {
        return Err(Error::Parameter(format!("N must lie in 1..=256, got {modulus}")));
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    let ambient = Ambient::torus(modulus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut skew_sum = 0u128;
    let mut corner_sum = 0u128;
    for _ in 0..trials {
        let b: Vec<i64> = (0..i64::from(modulus)).filter(|_| rng.gen_bool(beta)).collect();
        let set = GridSet::new(ambient, b.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))))?;
        skew_sum += u128::from(verify::count_skew_corners(&set, CountMethod::Fft)?.total());
        corner_sum += u128::from(verify::count_corners(&set)?.total());
    }
    let n = f64::from(modulus);
    let mean_skew = skew_sum as f64 / f64::from(trials);
    let mean_corner = corner_sum as f64 / f64::from(trials);
    let alpha = beta * beta;
    let alpha_5_2 = alpha.powf(2.5);
    let alpha_3 = alpha.powi(3);
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    Ok(ExperimentReport {
        beta,
        modulus,
        trials,
        seed,
        alpha,
        mean_skew_count: mean_skew,
        mean_skew_normalized: mean_skew / n.powi(4),
        alpha_5_2,
        alpha_3,
        ratio_5_2: ratio(mean_skew, alpha_5_2 * n.powi(4)),
        ratio_3: ratio(mean_skew, alpha_3 * n.powi(4)),
        mean_corner_count: mean_corner,
        corner_ratio: ratio(mean_corner, alpha * alpha * n.powi(3)),
    })
}
