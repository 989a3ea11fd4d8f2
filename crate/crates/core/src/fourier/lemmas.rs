use num_bigint::BigUint;
use serde::Serialize;

use super::{CharacterSet, Progression};
use crate::error::{Check, Error, Result};
use crate::grid::{AmbientKind, GridSet};

/// `ζ(s)` for real `s > 1`: the first `terms` terms summed smallest first,
/// plus an Euler–Maclaurin tail.
pub fn zeta(s: f64, terms: u64) -> Result<f64> {
    if s.is_nan() || s <= 1.0 || terms == 0 {
        return Err(Error::Parameter(format!("zeta needs s > 1 and terms ≥ 1, got s = {s}")));
    }
    let head: f64 = (1..=terms).rev().map(|k| (k as f64).powf(-s)).sum();
    let k = terms as f64;
    let tail = k.powf(1.0 - s) / (s - 1.0) - 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * k.powf(-s - 3.0) / 720.0;
    Ok(head + tail)
}

/// Exponents `(p, q, p′)` for the technical lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaParams {
    pub p: f64,
    pub q: f64,
    pub p_prime: f64,
}

impl LemmaParams {
    pub const HORIZONTAL: LemmaParams = LemmaParams {
        p: 1.5,
        q: 0.0,
        p_prime: 4.0 / 3.0,
    };
    pub const VERTICAL: LemmaParams = LemmaParams {
        p: 1.25,
        q: 0.5,
        p_prime: 1.2,
    };

    /// `c = (2ζ(p/p′))^{−1/p}`.
    pub fn constant(&self, zeta_terms: u64) -> Result<f64> {
        Ok((2.0 * zeta(self.p / self.p_prime, zeta_terms)?).powf(-1.0 / self.p))
    }

    /// `⌈2^{1/(p−1)} β^{p(q−1)/(p−1)}⌉`.
    pub fn size_bound(&self, beta: f64) -> f64 {
        let p = self.p;
        (2f64.powf(1.0 / (p - 1.0)) * beta.powf(p * (self.q - 1.0) / (p - 1.0))).ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TechnicalSelection {
    pub m: usize,
    pub bound: f64,
    pub c: f64,
    /// `Σ_{j≤m} b_j`.
    pub partial_sum: f64,
    /// `c·m^{1−1/p′}·β`.
    pub target: f64,
}

const FEASIBILITY_SLACK: f64 = 1e-12;

/// Smallest `m ≤ bound` with `Σ_{j≤m} b_j ≥ c·m^{1−1/p′}·β`.
pub fn technical_select(b: &[f64], beta: f64, params: LemmaParams, zeta_terms: u64) -> Result<TechnicalSelection> {
    let LemmaParams { p, q, p_prime } = params;
    if !(p > 1.0 && p_prime > 1.0 && p_prime < p) {
        return Err(Error::Parameter(format!("need p > 1 and 1 < p' < p, got p = {p}, p' = {p_prime}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    if b.iter().any(|&v| v.is_nan() || v < 0.0 || !v.is_finite()) {
        return Err(Error::Parameter("sequence must be finite and nonnegative".into()));
    }
    if b.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Parameter("sequence must be nonincreasing".into()));
    }
    let lp: f64 = b.iter().map(|v| v.powf(p)).sum();
    let l1: f64 = b.iter().sum();
    if lp < beta.powf(p) * (1.0 - FEASIBILITY_SLACK) {
        return Err(Error::Parameter(format!("sum of b^p = {lp:e} is below beta^p = {:e}", beta.powf(p))));
    }
    if l1 > beta.powf(q) * (1.0 + FEASIBILITY_SLACK) {
        return Err(Error::Parameter(format!("sum of b = {l1:e} exceeds beta^q = {:e}", beta.powf(q))));
    }

    let c = params.constant(zeta_terms)?;
    let bound = params.size_bound(beta);
    let limit = if bound >= b.len() as f64 { b.len() } else { bound as usize };
    let mut partial = 0.0;
    for (j, &v) in b.iter().enumerate().take(limit) {
        partial += v;
        let m = j + 1;
        let target = c * (m as f64).powf(1.0 - 1.0 / p_prime) * beta;
        if partial >= target {
            return Ok(TechnicalSelection {
                m,
                bound,
                c,
                partial_sum: partial,
                target,
            });
        }
    }
    Err(Error::falsified(
        Check::TechnicalLemma,
        format!("no m ≤ {bound} reaches c·m^(1-1/p')·beta with c = {c}"),
    ))
}

/// Is `‖r/den‖^m · Q ≤ 1`, i.e. `min(r, den − r)^m · Q ≤ den^m`, exactly?
fn within_dirichlet(r: u64, den: u64, m: u32, q_max: u64) -> bool {
    let dist = r.min(den - r);
    if dist == 0 {
        return true;
    }
    let small = u128::from(dist)
        .checked_pow(m)
        .and_then(|v| v.checked_mul(u128::from(q_max)));
    match (small, u128::from(den).checked_pow(m)) {
        (Some(lhs), Some(rhs)) => lhs <= rhs,
        _ => BigUint::from(dist).pow(m) * BigUint::from(q_max) <= BigUint::from(den).pow(m),
    }
}

/// Least `q ∈ [Q]` with `‖q·θ_j‖ ≤ Q^{−1/m}` for every `θ_j = a_j/N_j`, given
/// as pairs `(a_j, N_j)`.
pub fn dirichlet(thetas: &[(u64, u64)], q_max: u64) -> Result<u64> {
    if thetas.is_empty() || q_max == 0 {
        return Err(Error::Parameter("dirichlet needs at least one theta and Q ≥ 1".into()));
    }
    if thetas.iter().any(|&(_, den)| den == 0) {
        return Err(Error::Parameter("zero denominator".into()));
    }
    let m = thetas.len() as u32;
    (1..=q_max)
        .find(|&q| {
            thetas.iter().all(|&(a, den)| {
                let r = ((u128::from(q) * u128::from(a)) % u128::from(den)) as u64;
                within_dirichlet(r, den, m, q_max)
            })
        })
        .ok_or_else(|| Error::falsified(Check::Dirichlet, format!("no q ≤ {q_max} for {thetas:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnihilationReport {
    pub annihilated: bool,
    /// `max_{γ,x} |γ(x) − 1|`.
    pub worst_deviation: f64,
    /// `min_γ |1̂_X(γ)| / (|X|/N)`, when annihilated.
    pub min_coefficient_ratio: Option<f64>,
    /// `1 − ν²/2`.
    pub coefficient_bound: f64,
}

const ANNIHILATION_SLACK: f64 = 1e-12;

/// Whether `|γ(x) − 1| ≤ ν` on `Γ × X`; when it holds, also checks
/// `|1̂_X(γ)| ≥ (1 − ν²/2)|X|/N` for every `γ ∈ Γ`.
pub fn annihilation_check(gamma: &CharacterSet, x_set: &[i64], nu: f64) -> Result<AnnihilationReport> {
    if !(nu > 0.0 && nu <= 2.0) {
        return Err(Error::Parameter(format!("nu must lie in (0, 2], got {nu}")));
    }
    let n = i64::from(gamma.modulus);
    let mut xs: Vec<i64> = x_set.iter().map(|x| x.rem_euclid(n)).collect();
    xs.sort_unstable();
    xs.dedup();

    let worst = gamma
        .frequencies
        .iter()
        .flat_map(|&a| xs.iter().map(move |&x| gamma.deviation(a, x)))
        .fold(0.0, f64::max);
    let annihilated = worst <= nu + ANNIHILATION_SLACK;
    let coefficient_bound = 1.0 - nu * nu / 2.0;

    let mut min_ratio = None;
    if annihilated && !xs.is_empty() {
        let size = xs.len() as f64;
        let mut ratio = f64::INFINITY;
        for &a in &gamma.frequencies {
            let coeff: rustfft::num_complex::Complex64 = xs
                .iter()
                .map(|&x| {
                    let r = (i128::from(a) * i128::from(x)).rem_euclid(i128::from(n)) as f64;
                    super::e(-r / n as f64)
                })
                .sum();
            ratio = ratio.min(coeff.norm() / size);
        }
        if ratio < coefficient_bound - 1e-9 {
            return Err(Error::falsified(
                Check::Annihilation,
                format!("|1_X^(γ)|·N/|X| = {ratio} below 1 - ν²/2 = {coefficient_bound}"),
            ));
        }
        min_ratio = Some(ratio);
    }
    Ok(AnnihilationReport {
        annihilated,
        worst_deviation: worst,
        min_coefficient_ratio: min_ratio,
        coefficient_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnihilatingOutcome {
    /// `αn < 6^{m+1}`.
    SmallDensity { alpha_n: f64, threshold: f64 },
    Progression {
        progression: Progression,
        ell: u64,
        q: u64,
        big_q: u64,
    },
}

/// Largest `ℓ ≥ 0` with `(6ℓ)^{m+1} ≤ αn`.
fn annihilating_length(alpha_n: f64, m: usize) -> u64 {
    let fits = |l: u64| ((6 * l) as f64).powi(m as i32 + 1) <= alpha_n;
    let mut l = (alpha_n.powf(1.0 / (m as f64 + 1.0)) / 6.0).floor().max(0.0) as u64;
    while l > 0 && !fits(l) {
        l -= 1;
    }
    while fits(l + 1) {
        l += 1;
    }
    l
}

/// A progression `P = q·[ℓ] ⊆ [n]` that 1-annihilates `Γ`, with
/// `ℓ = ⌊(αn)^{1/(m+1)}/6⌋`, `Q = (6ℓ)^m` and `q ∈ [Q]` from Dirichlet.
pub fn annihilating_progression(gamma: &CharacterSet, alpha: f64, n: u32) -> Result<AnnihilatingOutcome> {
    let m = gamma.len();
    if m == 0 {
        return Err(Error::Parameter("character set must be nonempty".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let alpha_n = alpha * f64::from(n);
    let threshold = 6f64.powi(m as i32 + 1);
    if alpha_n < threshold {
        return Ok(AnnihilatingOutcome::SmallDensity { alpha_n, threshold });
    }
    let ell = annihilating_length(alpha_n, m);
    let big_q = (6 * ell)
        .checked_pow(m as u32)
        .ok_or_else(|| Error::Capability("Q overflows u64".into()))?;
    let den = u64::from(gamma.modulus);
    let thetas: Vec<(u64, u64)> = gamma.frequencies.iter().map(|&a| (u64::from(a), den)).collect();
    let q = dirichlet(&thetas, big_q)?;
    let progression = Progression::new(q as i64, q, ell)?;

    if progression.span() as f64 > alpha_n || !progression.within(n) {
        return Err(Error::falsified(
            Check::AnnihilatingProgression,
            format!("span {} exceeds alpha·n = {alpha_n}", progression.span()),
        ));
    }
    let xs: Vec<i64> = progression.elements().collect();
    let report = annihilation_check(gamma, &xs, 1.0)?;
    if !report.annihilated {
        return Err(Error::falsified(
            Check::AnnihilatingProgression,
            format!("max |γ(x) - 1| = {} on {progression:?}", report.worst_deviation),
        ));
    }
    Ok(AnnihilatingOutcome::Progression {
        progression,
        ell,
        q,
        big_q,
    })
}

/// Which coordinate the progression constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `B ⊆ P × [n]`; the square is `P × P′`.
    Columns,
    /// `B ⊆ [n] × P`; the square is `P′ × P`.
    Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PigeonholeOutcome {
    pub translate: Progression,
    /// `|B ∩ square|`.
    pub count: u64,
    pub density: f64,
    /// Density of `B` on its strip.
    pub beta: f64,
    /// `β − ℓd/n`.
    pub guarantee: f64,
}

/// Scans every translate `P′ ⊆ [n]` of `P` and returns one maximising the
/// density of `B` on the square, ties going to the smallest start.
pub fn pigeonhole_square(b_set: &GridSet, p: &Progression, orientation: Orientation) -> Result<PigeonholeOutcome> {
    if b_set.ambient().kind != AmbientKind::Grid {
        return Err(Error::AmbientMismatch {
            expected: "grid",
            found: b_set.ambient(),
        });
    }
    let n = b_set.size();
    if !p.within(n) || p.span() > u64::from(n) {
        return Err(Error::Parameter(format!("progression {p:?} must lie in [{n}] with span ≤ n")));
    }
    let owned;
    let strip = match orientation {
        Orientation::Columns => b_set,
        Orientation::Rows => {
            owned = b_set.transpose();
            &owned
        }
    };
    if let Some((x, _)) = strip.nonempty_columns().find(|&(x, _)| !p.contains(x)) {
        return Err(Error::Parameter(format!("set has points outside the strip at {x}")));
    }

    // counts[y] = #{x ∈ P : (x, y) ∈ B}, then window sums along the residue of y mod d
    let n_us = n as usize;
    let step = p.step as usize;
    let mut counts = vec![0u64; n_us + 1];
    for (_, col) in strip.nonempty_columns() {
        for &y in col {
            counts[y as usize] += 1;
        }
    }
    let mut prefix = vec![0u64; n_us + 1];
    for y in 1..=n_us {
        prefix[y] = counts[y] + if y > step { prefix[y - step] } else { 0 };
    }
    let reach = ((p.len - 1) * p.step) as usize;
    let mut best: Option<(usize, u64)> = None;
    for s in 1..=n_us - reach {
        let top = prefix[s + reach];
        let below = if s > step { prefix[s - step] } else { 0 };
        let count = top - below;
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((s, count));
        }
    }
    let (start, count) = best.expect("P fits in [n]");

    let len = p.len as f64;
    let beta = strip.len() as f64 / (len * f64::from(n));
    let density = count as f64 / (len * len);
    let guarantee = beta - p.span() as f64 / f64::from(n);
    if density < guarantee - 1e-12 {
        return Err(Error::falsified(
            Check::Pigeonhole,
            format!("best square density {density} below beta - ld/n = {guarantee}"),
        ));
    }
    Ok(PigeonholeOutcome {
        translate: Progression::new(start as i64, p.step, p.len)?,
        count,
        density,
        beta,
        guarantee,
    })
}
