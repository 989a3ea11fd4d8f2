//! Discrete Fourier analysis on `Z/NZ` and `(Z/NZ)²`, the skew-corner form
//! `Λ`, and the density-increment machinery built on top of it.
//!
//! Conventions: `f̂(a) = E_x f(x) e(−ax/N)` with `e(θ) = exp(2πiθ)`, so
//! inversion is `f(x) = Σ_a f̂(a) e(ax/N)`. Characters are indexed by their
//! frequency `a ∈ 0..N` and `a = 0` is the trivial character.

mod diagnostics;
mod experiment;
mod increment;
mod lemmas;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AmbientKind, GridSet};

pub use diagnostics::{
    check_gvn, dichotomy_report, parseval_bound, DichotomyBranch, DichotomyReport, GvnReport, ParsevalReport,
    Spectrum,
};
pub use experiment::{product_set_experiment, ExperimentReport};
pub use increment::{
    annihilating_progressions, best_effort_floor, column_extraction, horizontal_increment, increment_step,
    progression_increment, row_extraction, vertical_l2_increment, vertical_linfty_increment, Branch, Extraction, IncrementMode, IncrementOutcome, LinftyOutcome,
    OutcomeVariant, RouteOutcome,
};
pub use lemmas::{
    annihilating_progression, annihilation_check, dirichlet, pigeonhole_square, technical_select, zeta,
    AnnihilatingOutcome, AnnihilationReport, LemmaParams, Orientation, PigeonholeOutcome,
    TechnicalSelection,
};

/// Constants left implicit by the asymptotic argument, made explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisConfig {
    /// The large constant `C`.
    pub c: f64,
    /// The increment constant `c′ ∈ (0, 1/4)`.
    pub c_prime: f64,
    pub tolerance: f64,
    /// Terms summed directly before the Euler–Maclaurin tail in `ζ`.
    pub zeta_terms: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            c: 64.0,
            c_prime: 0.05,
            tolerance: 1e-9,
            zeta_terms: 1_000_000,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::Parameter(format!("C must be at least 1, got {}", self.c)));
        }
        if !(self.c_prime > 0.0 && self.c_prime < 0.25) {
            return Err(Error::Parameter(format!("c' must lie in (0, 1/4), got {}", self.c_prime)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if self.zeta_terms == 0 {
            return Err(Error::Parameter("zeta_terms must be positive".into()));
        }
        Ok(())
    }
}

/// `e(θ) = exp(2πiθ)`.
pub fn e(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * theta)
}

/// `‖r/N‖_{R/Z}` for an integer residue `r`.
pub fn circle_distance(r: u64, modulus: u64) -> f64 {
    let r = r % modulus;
    r.min(modulus - r) as f64 / modulus as f64
}

/// Fourier coefficients of a function on `Z/NZ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    coefficients: Vec<Complex64>,
}

impl FourierTable {
    pub fn modulus(&self) -> u32 {
        self.coefficients.len() as u32
    }

    /// `f̂(a)` with `a` read modulo `N`.
    pub fn coeff(&self, a: i64) -> Complex64 {
        self.coefficients[a.rem_euclid(self.coefficients.len() as i64) as usize]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// `Σ_a |f̂(a)|²`.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `max_{a≠0} |f̂(a)|`, or 0 when `N = 1`.
    pub fn max_nontrivial(&self) -> f64 {
        self.coefficients[1..].iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

pub fn dft(values: &[f64]) -> Result<FourierTable> {
    let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft_complex(&buf)
}

pub fn dft_complex(values: &[Complex64]) -> Result<FourierTable> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Parameter("transform needs N ≥ 1".into()));
    }
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    Ok(FourierTable { coefficients: buf })
}

/// `f(x) = Σ_a f̂(a) e(ax/N)`.
pub fn idft(table: &FourierTable) -> Vec<Complex64> {
    let mut buf = table.coefficients.clone();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

/// Forward transforms of every length-`n` row of `data`, normalised by `1/n`.
pub(crate) fn rows_dft(data: &mut [Complex64], n: usize) {
    FftPlanner::new().plan_fft_forward(n).process(data);
    let scale = 1.0 / n as f64;
    data.iter_mut().for_each(|c| *c *= scale);
}

/// A real function on `(Z/NZ)²`, stored as `values[x·N + y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoDFunction {
    modulus: usize,
    values: Vec<f64>,
}

impl TwoDFunction {
    pub fn zeros(modulus: u32) -> Result<Self> {
        Self::constant(modulus, 0.0)
    }

    pub fn constant(modulus: u32, value: f64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::Parameter("modulus must be at least 1".into()));
        }
        let n = modulus as usize;
        Ok(TwoDFunction {
            modulus: n,
            values: vec![value; n * n],
        })
    }

    pub fn from_fn(modulus: u32, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut out = Self::zeros(modulus)?;
        let n = out.modulus;
        for x in 0..n {
            for y in 0..n {
                out.values[x * n + y] = f(x, y);
            }
        }
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("function values must be finite".into()));
        }
        Ok(out)
    }

    /// `1_A` for a torus set.
    pub fn indicator(a: &GridSet) -> Result<Self> {
        if a.ambient().kind != AmbientKind::Torus {
            return Err(Error::AmbientMismatch {
                expected: "torus",
                found: a.ambient(),
            });
        }
        let mut out = Self::zeros(a.size())?;
        let n = out.modulus;
        for (x, y) in a.points() {
            out.values[x as usize * n + y as usize] = 1.0;
        }
        Ok(out)
    }

    /// `f_A = 1_A − α·1_{[n]²}` for `A ⊆ [n]²` viewed in `(Z/2nZ)²`, with
    /// `α = |A|/n²`. Returns the function and `α`.
    pub fn balanced(a: &GridSet) -> Result<(Self, f64)> {
        if a.ambient().kind != AmbientKind::Grid {
            return Err(Error::AmbientMismatch {
                expected: "grid",
                found: a.ambient(),
            });
        }
        let n = a.size() as usize;
        let alpha = a.density();
        let mut out = Self::indicator(&a.embed_torus()?)?;
        let big = out.modulus;
        for x in 1..=n {
            for y in 1..=n {
                out.values[x * big + y] -= alpha;
            }
        }
        Ok((out, alpha))
    }

    /// `f_A = 1_A − α·1_{G²}` for a torus set, with `α = |A|/N²`.
    pub fn torus_balanced(a: &GridSet) -> Result<(Self, f64)> {
        let alpha = a.density();
        let mut out = Self::indicator(a)?;
        out.values.iter_mut().for_each(|v| *v -= alpha);
        Ok((out, alpha))
    }

    pub fn modulus(&self) -> u32 {
        self.modulus as u32
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[(x % self.modulus) * self.modulus + y % self.modulus]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The slice `f(x, ·)`.
    pub fn column(&self, x: usize) -> &[f64] {
        let n = self.modulus;
        &self.values[x * n..(x + 1) * n]
    }

    /// `S(f)(x) = E_y f(x, y)`.
    pub fn marginal_s(&self) -> Vec<f64> {
        let n = self.modulus as f64;
        self.values.chunks(self.modulus).map(|c| c.iter().sum::<f64>() / n).collect()
    }

    /// `f̃(x, y) = f(x, y) / ‖f(x, ·)‖₁` with the probability measure on `y`;
    /// zero on columns where `f(x, ·)` vanishes.
    pub fn normalized_tilde(&self) -> TwoDFunction {
        let n = self.modulus;
        let mut out = self.clone();
        for col in out.values.chunks_mut(n) {
            let norm = col.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            if norm == 0.0 {
                col.fill(0.0);
            } else {
                col.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }

    /// Row-major table of the column transforms `(f(x, ·))^(a)`.
    pub fn column_transforms(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        rows_dft(&mut buf, self.modulus);
        buf
    }

    /// Full two-dimensional transform, `f̂(a, b)` at index `a·N + b`.
    pub fn dft2(&self) -> Vec<Complex64> {
        let n = self.modulus;
        let cols = self.column_transforms();
        let mut transposed = vec![Complex64::default(); n * n];
        for x in 0..n {
            for b in 0..n {
                transposed[b * n + x] = cols[x * n + b];
            }
        }
        rows_dft(&mut transposed, n);
        let mut out = vec![Complex64::default(); n * n];
        for b in 0..n {
            for a in 0..n {
                out[a * n + b] = transposed[b * n + a];
            }
        }
        out
    }

    fn same_modulus(&self, other: &TwoDFunction) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::Parameter(format!(
                "moduli differ: {} and {}",
                self.modulus, other.modulus
            )));
        }
        Ok(())
    }
}

/// A duplicate-free set of nontrivial frequencies modulo `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharacterSet {
    pub modulus: u32,
    pub frequencies: Vec<u32>,
}

impl CharacterSet {
    pub fn new(modulus: u32, frequencies: Vec<u32>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::Parameter("modulus must be at least 1".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &a in &frequencies {
            if a == 0 || a >= modulus {
                return Err(Error::Parameter(format!("frequency {a} not in 1..{modulus}")));
            }
            if !seen.insert(a) {
                return Err(Error::Parameter(format!("duplicate frequency {a}")));
            }
        }
        Ok(CharacterSet { modulus, frequencies })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// `|γ_a(x) − 1| = 2|sin(πax/N)|`, with the phase reduced exactly.
    pub fn deviation(&self, a: u32, x: i64) -> f64 {
        let n = u64::from(self.modulus);
        let r = (i128::from(a) * i128::from(x)).rem_euclid(i128::from(n)) as u64;
        2.0 * (PI * circle_distance(r, n)).sin()
    }
}

/// `{start, start + step, …, start + (len − 1)·step}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Progression {
    pub start: i64,
    pub step: u64,
    pub len: u64,
}

impl Progression {
    pub fn new(start: i64, step: u64, len: u64) -> Result<Self> {
        if step == 0 || len == 0 {
            return Err(Error::Parameter("progression needs positive step and length".into()));
        }
        Ok(Progression { start, step, len })
    }

    /// Length times common difference.
    pub fn span(&self) -> u64 {
        self.len * self.step
    }

    pub fn last(&self) -> i64 {
        self.start + ((self.len - 1) * self.step) as i64
    }

    pub fn elements(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len).map(move |k| self.start + (k * self.step) as i64)
    }

    pub fn contains(&self, z: i64) -> bool {
        z >= self.start && z <= self.last() && ((z - self.start) as u64).is_multiple_of(self.step)
    }

    /// Position of `z` in the progression, if present.
    pub fn position(&self, z: i64) -> Option<u64> {
        self.contains(z).then(|| (z - self.start) as u64 / self.step)
    }

    pub fn within(&self, n: u32) -> bool {
        self.start >= 1 && self.last() <= i64::from(n)
    }

    pub fn shifted(&self, t: i64) -> Progression {
        Progression { start: self.start + t, ..*self }
    }
}

/// `Λ(f, g, h) = E_{x,y,d} f(x, y) g(x, y + d) S(h)(x + d)`, by direct summation.
pub fn lambda_direct(f: &TwoDFunction, g: &TwoDFunction, h: &TwoDFunction) -> Result<f64> {
    f.same_modulus(g)?;
    f.same_modulus(h)?;
    let n = f.modulus;
    let sh = h.marginal_s();
    let mut total = 0.0;
    for x in 0..n {
        let fx = f.column(x);
        let gx = g.column(x);
        for (y, &fv) in fx.iter().enumerate() {
            if fv == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for d in 0..n {
                inner += gx[(y + d) % n] * sh[(x + d) % n];
            }
            total += fv * inner;
        }
    }
    Ok(total / (n * n * n) as f64)
}

/// `Λ(f, g, h) = Σ_a Ŝ(h)(a) E_x f̂_x(a) conj(ĝ_x(a)) e(ax/N)`.
pub fn lambda_fourier(f: &TwoDFunction, g: &TwoDFunction, h: &TwoDFunction) -> Result<f64> {
    f.same_modulus(g)?;
    f.same_modulus(h)?;
    let n = f.modulus;
    let sh = dft(&h.marginal_s())?;
    let fc = f.column_transforms();
    let gc = if std::ptr::eq(f, g) { fc.clone() } else { g.column_transforms() };
    let mut total = Complex64::default();
    for a in 0..n {
        let mut inner = Complex64::default();
        for x in 0..n {
            let phase = e(((a * x) % n) as f64 / n as f64);
            inner += fc[x * n + a] * gc[x * n + a].conj() * phase;
        }
        total += sh.coefficients[a] * inner;
    }
    Ok(total.re / n as f64)
}

/// Evaluates `Λ` both ways and returns the direct value, failing if the two
/// disagree by more than `tolerance` (scaled by the sup norms of the inputs).
pub fn lambda_form_with(f: &TwoDFunction, g: &TwoDFunction, h: &TwoDFunction, tolerance: f64) -> Result<f64> {
    let direct = lambda_direct(f, g, h)?;
    let fourier = lambda_fourier(f, g, h)?;
    let sup = |t: &TwoDFunction| t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = (sup(f) * sup(g) * sup(h)).max(1.0);
    if (direct - fourier).abs() > tolerance * scale {
        return Err(Error::Inconsistent(format!(
            "lambda: direct {direct:e} vs fourier {fourier:e}"
        )));
    }
    Ok(direct)
}

pub fn lambda_form(f: &TwoDFunction, g: &TwoDFunction, h: &TwoDFunction) -> Result<f64> {
    lambda_form_with(f, g, h, AnalysisConfig::default().tolerance)
}
