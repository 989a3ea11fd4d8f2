use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::{dft, rows_dft, AnalysisConfig, FourierTable, TwoDFunction};
use crate::error::{Check, Error, Result};
use crate::grid::{AmbientKind, GridSet};
use crate::verify::{self, CountMethod};

/// Above this modulus the exact counters switch to the FFT path.
const NAIVE_COUNT_LIMIT: u32 = 128;

/// `b(a) = E_x |f̃̂_x(a)| |1̂_x(a)|` for the indicator of a torus set, which
/// reduces to `(1/N) Σ_{A_x ≠ ∅} (N/|A_x|) |1̂_x(a)|²`.
pub(crate) fn horizontal_weights(torus: &GridSet) -> Vec<f64> {
    let n = torus.size() as usize;
    let cols: Vec<&[u32]> = torus.nonempty_columns().map(|(_, c)| c).collect();
    let mut buf = vec![Complex64::default(); cols.len() * n];
    for (row, col) in buf.chunks_mut(n).zip(&cols) {
        for &y in *col {
            row[y as usize] = Complex64::new(1.0, 0.0);
        }
    }
    if !cols.is_empty() {
        rows_dft(&mut buf, n);
    }
    let mut weights = vec![0.0; n];
    for (row, col) in buf.chunks(n).zip(&cols) {
        let scale = 1.0 / col.len() as f64;
        for (w, c) in weights.iter_mut().zip(row) {
            *w += c.norm_sqr() * scale;
        }
    }
    weights
}

/// Spectral data of `A ⊆ [n]²` viewed inside `(Z/2nZ)²`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub n: u32,
    pub modulus: u32,
    /// `|A| / n²`.
    pub alpha: f64,
    pub torus: GridSet,
    /// `Ŝ(f_A)` with `f_A = 1_A − α·1_{[n]²}`.
    pub s_balanced: FourierTable,
    /// `Ŝ(1_A)`.
    pub s_indicator: FourierTable,
    /// `E_x |(1̃_A)_x^(a)| |(1_A)_x^(a)|` for every `a`.
    pub horizontal: Vec<f64>,
}

impl Spectrum {
    pub fn of(a: &GridSet) -> Result<Spectrum> {
        if a.ambient().kind != AmbientKind::Grid {
            return Err(Error::AmbientMismatch {
                expected: "grid",
                found: a.ambient(),
            });
        }
        let n = a.size();
        let alpha = a.density();
        let torus = a.embed_torus()?;
        let big = torus.size() as usize;
        let sizes = torus.column_sizes();
        let s_one: Vec<f64> = sizes.iter().map(|&s| s as f64 / big as f64).collect();
        let s_bal: Vec<f64> = s_one
            .iter()
            .enumerate()
            .map(|(x, &v)| if (1..=n as usize).contains(&x) { v - alpha / 2.0 } else { v })
            .collect();
        Ok(Spectrum {
            n,
            modulus: torus.size(),
            alpha,
            s_balanced: dft(&s_bal)?,
            s_indicator: dft(&s_one)?,
            horizontal: horizontal_weights(&torus),
            torus,
        })
    }

    /// `|Ŝ(f_A)(a)|` for `a = 1..N`.
    pub fn vertical_magnitudes(&self) -> Vec<f64> {
        self.s_balanced.coefficients()[1..].iter().map(|c| c.norm()).collect()
    }

    /// `Σ_{a≠0} |Ŝ(f_A)(a)| b(a)`.
    pub fn dichotomy_lhs(&self) -> f64 {
        self.s_balanced.coefficients()[1..]
            .iter()
            .zip(&self.horizontal[1..])
            .map(|(s, b)| s.norm() * b)
            .sum()
    }

    /// `Σ_{a≠0} b(a)^{3/2}`.
    pub fn horizontal_mass(&self) -> f64 {
        self.horizontal[1..].iter().map(|b| b.powf(1.5)).sum()
    }

    /// `Σ_{a≠0} |Ŝ(f_A)(a)|^p`.
    pub fn vertical_mass(&self, p: f64) -> f64 {
        self.vertical_magnitudes().iter().map(|v| v.powf(p)).sum()
    }
}

fn exact_total(a: &GridSet) -> Result<u64> {
    let method = if a.size() <= NAIVE_COUNT_LIMIT {
        CountMethod::Naive
    } else {
        CountMethod::Fft
    };
    Ok(verify::count_skew_corners(a, method)?.total())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GvnReport {
    pub modulus: u32,
    pub size: usize,
    pub alpha: f64,
    /// `Λ(1_A, 1_A, 1_A)` from the exact tuple count.
    pub lambda: f64,
    /// `‖Ŝ(f_A)‖_∞` with `f_A = 1_A − α·1_{G²}`.
    pub sup_norm: f64,
    pub max_nontrivial_coeff: f64,
    /// `α³ − α‖Ŝ(f_A)‖_∞`.
    pub lower_bound: f64,
    pub inequality_holds: bool,
    /// Largest nontrivial `|1̂_A(a, b)|`; `A` is `η`-uniform for this `η`.
    pub eta: f64,
    pub count: u64,
    /// `(α³ − αη)N⁴`.
    pub count_lower_bound: f64,
}

/// `Λ(1_A, 1_A, 1_A) ≥ α³ − α‖Ŝ(f_A)‖_∞` on a torus, plus the `η`-uniform count.
pub fn check_gvn(a: &GridSet, config: &AnalysisConfig) -> Result<GvnReport> {
    if a.ambient().kind != AmbientKind::Torus {
        return Err(Error::AmbientMismatch {
            expected: "torus",
            found: a.ambient(),
        });
    }
    let n = a.size() as usize;
    let alpha = a.density();
    let s_bal: Vec<f64> = a.column_sizes().iter().map(|&s| s as f64 / n as f64 - alpha).collect();
    let table = dft(&s_bal)?;
    let sup_norm = table.coefficients().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let max_nontrivial_coeff = table.max_nontrivial();

    let count = exact_total(a)?;
    let n4 = (n as f64).powi(4);
    let lambda = count as f64 / n4;
    let lower_bound = alpha.powi(3) - alpha * sup_norm;
    let inequality_holds = lambda >= lower_bound - config.tolerance;

    let spectrum = TwoDFunction::indicator(a)?.dft2();
    let eta = spectrum[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let count_lower_bound = (alpha.powi(3) - alpha * eta) * n4;

    if !inequality_holds {
        return Err(Error::falsified(
            Check::GeneralisedVonNeumann,
            format!("lambda = {lambda:e} < alpha^3 - alpha·sup = {lower_bound:e}"),
        ));
    }
    if (count as f64) < count_lower_bound - config.tolerance * n4 {
        return Err(Error::falsified(
            Check::GeneralisedVonNeumann,
            format!("{count} skew corners, fewer than (alpha^3 - alpha·eta)N^4 = {count_lower_bound}"),
        ));
    }
    Ok(GvnReport {
        modulus: n as u32,
        size: a.len(),
        alpha,
        lambda,
        sup_norm,
        max_nontrivial_coeff,
        lower_bound,
        inequality_holds,
        eta,
        count,
        count_lower_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DichotomyBranch {
    /// `α ≤ 8/n`.
    I,
    /// The Fourier sum is at least `α²/64`.
    Ii,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyReport {
    pub n: u32,
    pub modulus: u32,
    pub alpha: f64,
    pub small_density_threshold: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_meets_bound: bool,
    pub branch: DichotomyBranch,
}

pub fn dichotomy_report(a: &GridSet, config: &AnalysisConfig) -> Result<DichotomyReport> {
    if a.ambient().kind != AmbientKind::Grid {
        return Err(Error::AmbientMismatch {
            expected: "grid",
            found: a.ambient(),
        });
    }
    if let Some(w) = verify::find_skew_corner(a) {
        return Err(Error::Parameter(format!("input contains the skew corner {w:?}")));
    }
    let spectrum = Spectrum::of(a)?;
    let alpha = spectrum.alpha;
    let threshold = 8.0 / f64::from(a.size());
    let lhs = spectrum.dichotomy_lhs();
    let rhs = alpha * alpha / 64.0;
    let lhs_meets_bound = lhs >= rhs - config.tolerance;
    let branch = if alpha <= threshold {
        DichotomyBranch::I
    } else if lhs_meets_bound {
        DichotomyBranch::Ii
    } else {
        return Err(Error::falsified(
            Check::Dichotomy,
            format!("alpha = {alpha} > 8/n and lhs = {lhs:e} < alpha^2/64 = {rhs:e}"),
        ));
    };
    Ok(DichotomyReport {
        n: a.size(),
        modulus: spectrum.modulus,
        alpha,
        small_density_threshold: threshold,
        lhs,
        rhs,
        lhs_meets_bound,
        branch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsevalReport {
    pub modulus: u32,
    pub nonempty_columns: usize,
    pub full_sum: f64,
    pub expected_full_sum: f64,
    pub nontrivial_sum: f64,
}

/// Grid inputs are embedded in `(Z/2nZ)²` first.
pub fn parseval_bound(a: &GridSet, config: &AnalysisConfig) -> Result<ParsevalReport> {
    let torus = a.to_torus();
    let n = torus.size();
    let weights = horizontal_weights(&torus);
    let full_sum: f64 = weights.iter().sum();
    let nontrivial_sum = full_sum - weights[0];
    let nonempty = torus.nonempty_column_count();
    let expected = nonempty as f64 / f64::from(n);
    if (full_sum - expected).abs() > config.tolerance || nontrivial_sum > 1.0 + config.tolerance {
        return Err(Error::falsified(
            Check::ParsevalBound,
            format!("full sum {full_sum} vs {expected}, nontrivial sum {nontrivial_sum}"),
        ));
    }
    Ok(ParsevalReport {
        modulus: n,
        nonempty_columns: nonempty,
        full_sum,
        expected_full_sum: expected,
        nontrivial_sum,
    })
}
