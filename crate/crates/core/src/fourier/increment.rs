use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::diagnostics::{dichotomy_report, DichotomyBranch, Spectrum};
use super::lemmas::{
    annihilating_progression, annihilation_check, dirichlet, pigeonhole_square, technical_select,
    AnnihilatingOutcome, LemmaParams, Orientation, PigeonholeOutcome, TechnicalSelection,
};
use super::{AnalysisConfig, CharacterSet, Progression};
use crate::error::{Check, Error, Result};
use crate::grid::{Ambient, AmbientKind, GridSet};
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementMode {
    Guaranteed,
    BestEffort,
}

/// Case label of the progression increment: (i) small density, (ii) the
/// `L^∞` column increment, (iii) the vertical `L²` column increment, (iv) the
/// horizontal `L²` row increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    I,
    Ii,
    Iii,
    Iv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeVariant {
    SmallDensity,
    /// `A″ ⊆ [n] × P`.
    RowProgression,
    /// `A′ ⊆ P × [n]`.
    ColumnProgression,
    /// A set in `[n′]²` after pigeonholing and renaming.
    Subsquare,
}

/// A subset of a strip `P × [n]` (columns) or `[n] × P` (rows).
#[derive(Debug, Clone)]
pub struct Extraction {
    pub progression: Progression,
    pub orientation: Orientation,
    pub set: GridSet,
    pub density: f64,
}

impl Extraction {
    fn new(progression: Progression, orientation: Orientation, set: GridSet) -> Self {
        let density = set.len() as f64 / (progression.len as f64 * f64::from(set.size()));
        Extraction {
            progression,
            orientation,
            set,
            density,
        }
    }
}

/// Result of one of the two `L²` routes.
#[derive(Debug, Clone)]
pub struct RouteOutcome {
    pub gamma: CharacterSet,
    pub selection: TechnicalSelection,
    pub hypothesis: f64,
    pub threshold: f64,
    pub progression: AnnihilatingOutcome,
    pub extraction: Option<Extraction>,
}

/// `A″ = ⋃_x {x} × ((A_x − y_x) ∩ P)` with `y_x` maximising the overlap,
/// ties to the smallest shift.
fn extract_rows(torus: &GridSet, p: &Progression, n: u32) -> Result<GridSet> {
    let big = i64::from(torus.size());
    let cols: Vec<(i64, &[u32])> = torus.nonempty_columns().collect();
    let rows: Vec<Vec<(i64, i64)>> = cols
        .par_iter()
        .map(|&(x, col)| {
            let mut hist = vec![0u32; big as usize];
            for &z in col {
                for e in p.elements() {
                    hist[(i64::from(z) - e).rem_euclid(big) as usize] += 1;
                }
            }
            let (shift, _) = hist
                .iter()
                .enumerate()
                .fold((0, 0), |best, (s, &c)| if c > best.1 { (s, c) } else { best });
            p.elements()
                .filter(|&e| col.binary_search(&((e + shift as i64).rem_euclid(big) as u32)).is_ok())
                .map(|e| (x, e))
                .collect()
        })
        .collect();
    GridSet::new(Ambient::grid(n)?, rows.into_iter().flatten())
}

/// `A′ = ⋃_{x∈P} {x} × A_{x+y}` with `y` maximising `Σ_{x∈P} |A_{x+y}|`.
fn extract_columns(torus: &GridSet, p: &Progression, n: u32) -> Result<GridSet> {
    let big = i64::from(torus.size());
    let sizes = torus.column_sizes();
    let weight = |y: i64| -> u64 { p.elements().map(|x| sizes[(x + y).rem_euclid(big) as usize]).sum() };
    let shift = (0..big).fold((0, 0), |best, y| {
        let w = weight(y);
        if w > best.1 {
            (y, w)
        } else {
            best
        }
    });
    let pts = p.elements().flat_map(|x| {
        torus
            .column((x + shift.0).rem_euclid(big))
            .iter()
            .map(move |&y| (x, i64::from(y)))
    });
    GridSet::new(Ambient::grid(n)?, pts)
}

/// `A″ ⊆ [n] × P` for a progression `P ⊆ [n]`, shifting each column independently.
pub fn row_extraction(a: &GridSet, p: &Progression) -> Result<Extraction> {
    require_grid(a)?;
    if !p.within(a.size()) {
        return Err(Error::Parameter(format!("{p:?} does not lie in [{}]", a.size())));
    }
    let set = extract_rows(&a.embed_torus()?, p, a.size())?;
    Ok(Extraction::new(*p, Orientation::Rows, set))
}

/// `A′ ⊆ P × [n]` for a progression `P ⊆ [n]`, shifting all columns together.
pub fn column_extraction(a: &GridSet, p: &Progression) -> Result<Extraction> {
    require_grid(a)?;
    if !p.within(a.size()) {
        return Err(Error::Parameter(format!("{p:?} does not lie in [{}]", a.size())));
    }
    let set = extract_columns(&a.embed_torus()?, p, a.size())?;
    Ok(Extraction::new(*p, Orientation::Columns, set))
}

fn require_grid(a: &GridSet) -> Result<()> {
    if a.ambient().kind != AmbientKind::Grid {
        return Err(Error::AmbientMismatch {
            expected: "grid",
            found: a.ambient(),
        });
    }
    Ok(())
}

/// Nontrivial frequencies sorted by decreasing weight, ties to the smaller frequency.
fn ranked(weights: &[f64]) -> Vec<(u32, f64)> {
    let mut order: Vec<(u32, f64)> = weights.iter().enumerate().skip(1).map(|(a, &w)| (a as u32, w)).collect();
    order.sort_by(|l, r| r.1.total_cmp(&l.1).then(l.0.cmp(&r.0)));
    order
}

#[allow(clippy::too_many_arguments)]
fn route(
    spectrum: &Spectrum,
    weights: &[f64],
    beta: f64,
    params: LemmaParams,
    hypothesis: f64,
    threshold: f64,
    orientation: Orientation,
    config: &AnalysisConfig,
) -> Result<Option<RouteOutcome>> {
    if spectrum.alpha == 0.0 || hypothesis < threshold {
        return Ok(None);
    }
    let order = ranked(weights);
    let b: Vec<f64> = order.iter().map(|&(_, w)| w).collect();
    let selection = technical_select(&b, beta, params, config.zeta_terms)?;
    let gamma = CharacterSet::new(
        spectrum.modulus,
        order[..selection.m].iter().map(|&(a, _)| a).collect(),
    )?;
    let progression = annihilating_progression(&gamma, spectrum.alpha, spectrum.n)?;
    let extraction = match &progression {
        AnnihilatingOutcome::SmallDensity { .. } => None,
        AnnihilatingOutcome::Progression { progression: p, .. } => {
            let set = match orientation {
                Orientation::Rows => extract_rows(&spectrum.torus, p, spectrum.n)?,
                Orientation::Columns => extract_columns(&spectrum.torus, p, spectrum.n)?,
            };
            Some(Extraction::new(*p, orientation, set))
        }
    };
    Ok(Some(RouteOutcome {
        gamma,
        selection,
        hypothesis,
        threshold,
        progression,
        extraction,
    }))
}

/// Runs when `Σ_{a≠0} b(a)^{3/2} ≥ (Cα)^{3/2}`; returns `None` otherwise.
pub fn horizontal_increment(a: &GridSet, config: &AnalysisConfig) -> Result<Option<RouteOutcome>> {
    require_grid(a)?;
    let spectrum = Spectrum::of(a)?;
    horizontal_route(&spectrum, config)
}

fn horizontal_route(spectrum: &Spectrum, config: &AnalysisConfig) -> Result<Option<RouteOutcome>> {
    let beta = config.c * spectrum.alpha;
    route(
        spectrum,
        &spectrum.horizontal,
        beta,
        LemmaParams::HORIZONTAL,
        spectrum.horizontal_mass(),
        beta.powf(1.5),
        Orientation::Rows,
        config,
    )
}

/// Runs when `Σ_{a≠0} |Ŝ(f_A)(a)|^{5/2} ≥ (Cα)^{5/2}`; returns `None` otherwise.
pub fn vertical_l2_increment(a: &GridSet, config: &AnalysisConfig) -> Result<Option<RouteOutcome>> {
    require_grid(a)?;
    let spectrum = Spectrum::of(a)?;
    vertical_route(&spectrum, config)
}

fn vertical_route(spectrum: &Spectrum, config: &AnalysisConfig) -> Result<Option<RouteOutcome>> {
    let ca = config.c * spectrum.alpha;
    let squares: Vec<f64> = spectrum.s_balanced.coefficients().iter().map(|c| c.norm_sqr()).collect();
    route(
        spectrum,
        &squares,
        ca * ca,
        LemmaParams::VERTICAL,
        spectrum.vertical_mass(2.5),
        ca.powf(2.5),
        Orientation::Columns,
        config,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinftyOutcome {
    /// `α < (4/c′)(π/n)^{1/2}`.
    SmallDensity { alpha: f64, threshold: f64 },
    Progression {
        progression: Progression,
        ell: u64,
        q: u64,
        big_q: u64,
        density: f64,
    },
}

/// Consecutive blocks of length in `[ℓ, 2ℓ)` inside each residue class of `[n]` mod `q`.
pub(crate) fn residue_blocks(n: u64, q: u64, ell: u64) -> Vec<Progression> {
    let mut blocks = Vec::new();
    for r in 1..=q.min(n) {
        let size = (n - r) / q + 1;
        let count = size / ell;
        for k in 0..count {
            let len = if k + 1 == count { size - k * ell } else { ell };
            blocks.push(Progression {
                start: (r + k * ell * q) as i64,
                step: q,
                len,
            });
        }
    }
    blocks
}

/// Given a nontrivial frequency `a` with `|Ŝ(f_A)(a)| ≥ 4c′α`, finds a
/// progression `P ⊆ [n]` of span below `2c′αn` on whose columns `A` has
/// density at least `(1 + 3c′)α`.
pub fn vertical_linfty_increment(a: &GridSet, gamma: u32, config: &AnalysisConfig) -> Result<LinftyOutcome> {
    require_grid(a)?;
    config.validate()?;
    let spectrum = Spectrum::of(a)?;
    linfty_route(a, &spectrum, gamma, config)
}

fn linfty_route(a: &GridSet, spectrum: &Spectrum, gamma: u32, config: &AnalysisConfig) -> Result<LinftyOutcome> {
    let n = u64::from(spectrum.n);
    let big = spectrum.modulus;
    let alpha = spectrum.alpha;
    let cp = config.c_prime;
    if gamma == 0 || gamma >= big {
        return Err(Error::Parameter(format!("frequency {gamma} not in 1..{big}")));
    }
    let coeff = spectrum.s_balanced.coeff(i64::from(gamma)).norm();
    if coeff < 4.0 * cp * alpha {
        return Err(Error::Parameter(format!(
            "|S(f_A)^({gamma})| = {coeff} is below 4c'alpha = {}",
            4.0 * cp * alpha
        )));
    }
    let nf = n as f64;
    let threshold = 4.0 / cp * (std::f64::consts::PI / nf).sqrt();
    if alpha < threshold {
        return Ok(LinftyOutcome::SmallDensity { alpha, threshold });
    }
    let big_q = (2.0 * (std::f64::consts::PI * nf).sqrt()).ceil() as u64;
    let ell = (cp * alpha * nf / big_q as f64).floor() as u64;
    if ell == 0 {
        return Err(Error::falsified(Check::LinftyIncrement, "block length is zero above the density guard"));
    }
    let q = dirichlet(&[(u64::from(gamma), u64::from(big))], big_q)?;
    if n / q < ell {
        return Err(Error::falsified(
            Check::LinftyIncrement,
            format!("residue classes mod {q} are shorter than {ell}"),
        ));
    }
    let sizes = a.column_sizes();
    let best = residue_blocks(n, q, ell)
        .into_iter()
        .map(|p| {
            let mass: u64 = p.elements().map(|x| sizes[(x - 1) as usize]).sum();
            (p, mass as f64 / (nf * p.len as f64))
        })
        .fold(None, |best: Option<(Progression, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .expect("at least one block");
    let (progression, density) = best;
    let target = (1.0 + 3.0 * cp) * alpha;
    if density < target - config.tolerance {
        return Err(Error::falsified(
            Check::LinftyIncrement,
            format!("best block density {density} below (1+3c')alpha = {target}"),
        ));
    }
    if progression.span() as f64 > 2.0 * cp * alpha * nf {
        return Err(Error::falsified(
            Check::LinftyIncrement,
            format!("span {} exceeds 2c'alpha n", progression.span()),
        ));
    }
    Ok(LinftyOutcome::Progression {
        progression,
        ell,
        q,
        big_q,
        density,
    })
}

/// The outcome of one increment step.
#[derive(Debug, Clone, Serialize)]
pub struct IncrementOutcome {
    pub variant: OutcomeVariant,
    /// `None` only for the unchanged-square fallback of best-effort mode.
    pub branch: Option<Branch>,
    pub input_density: f64,
    pub progressions: Vec<Progression>,
    #[serde(skip)]
    pub extracted: Option<GridSet>,
    /// `|A′|` and the area of the box it lives in.
    pub count: u64,
    pub area: u64,
    pub density: f64,
    pub nprime: Option<u32>,
    pub m: Option<usize>,
    pub detail: String,
}

impl IncrementOutcome {
    fn small_density(a: &GridSet, detail: impl Into<String>) -> Self {
        IncrementOutcome {
            variant: OutcomeVariant::SmallDensity,
            branch: Some(Branch::I),
            input_density: a.density(),
            progressions: Vec::new(),
            extracted: None,
            count: a.len() as u64,
            area: a.ambient().area(),
            density: a.density(),
            nprime: None,
            m: None,
            detail: detail.into(),
        }
    }

    fn strip(a: &GridSet, ex: Extraction, branch: Branch, m: Option<usize>) -> Self {
        let variant = match ex.orientation {
            Orientation::Rows => OutcomeVariant::RowProgression,
            Orientation::Columns => OutcomeVariant::ColumnProgression,
        };
        IncrementOutcome {
            variant,
            branch: Some(branch),
            input_density: a.density(),
            progressions: vec![ex.progression],
            count: ex.set.len() as u64,
            area: ex.progression.len * u64::from(a.size()),
            density: ex.density,
            extracted: Some(ex.set),
            nprime: None,
            m,
            detail: String::new(),
        }
    }
}

fn constants_too_aggressive(detail: String) -> Error {
    Error::falsified(Check::Increment, format!("constants too aggressive at this scale: {detail}"))
}

fn ensure_free(set: &GridSet) -> Result<()> {
    if let Some(w) = verify::find_skew_corner(set) {
        return Err(Error::falsified(Check::Increment, format!("extracted set contains {w:?}")));
    }
    Ok(())
}

/// The progression increment with explicit constants: routes through the
/// Hölder split and returns a row or column progression outcome, or the
/// small-density case. Fails when no branch verifies at these constants.
pub fn progression_increment(a: &GridSet, config: &AnalysisConfig) -> Result<IncrementOutcome> {
    require_grid(a)?;
    config.validate()?;
    if let Some(w) = verify::find_skew_corner(a) {
        return Err(Error::Parameter(format!("input contains the skew corner {w:?}")));
    }
    if a.is_empty() {
        return Ok(IncrementOutcome::small_density(a, "empty set"));
    }
    let dichotomy = dichotomy_report(a, config)?;
    if dichotomy.branch == DichotomyBranch::I {
        return Ok(IncrementOutcome::small_density(
            a,
            format!("alpha = {} ≤ 8/n", dichotomy.alpha),
        ));
    }
    let spectrum = Spectrum::of(a)?;
    let alpha = spectrum.alpha;
    let n = f64::from(spectrum.n);
    let tol = config.tolerance;

    for (outcome, branch, exponent) in [
        (horizontal_route(&spectrum, config)?, Branch::Iv, 0.25),
        (vertical_route(&spectrum, config)?, Branch::Iii, 1.0 / 6.0),
    ] {
        let Some(outcome) = outcome else { continue };
        let Some(ex) = outcome.extraction else {
            return Ok(IncrementOutcome::small_density(a, "alpha·n below 6^(m+1)"));
        };
        let m = outcome.gamma.len();
        let target = 3.0 * (m as f64).powf(exponent) * alpha;
        if ex.density < target - tol {
            return Err(constants_too_aggressive(format!(
                "branch {branch:?}: strip density {} below {target}",
                ex.density
            )));
        }
        if ex.progression.span() as f64 > alpha * n {
            return Err(constants_too_aggressive(format!("branch {branch:?}: span exceeds alpha·n")));
        }
        ensure_free(&ex.set)?;
        return Ok(IncrementOutcome::strip(a, ex, branch, Some(m)));
    }

    let (gamma, coeff) = ranked(&spectrum.s_balanced.coefficients().iter().map(|c| c.norm()).collect::<Vec<_>>())[0];
    if coeff < 4.0 * config.c_prime * alpha {
        return Err(constants_too_aggressive(format!(
            "no route applies: horizontal mass {:e}, vertical mass {:e}, max |S(f_A)^| = {coeff:e}",
            spectrum.horizontal_mass(),
            spectrum.vertical_mass(2.5)
        )));
    }
    match linfty_route(a, &spectrum, gamma, config)? {
        LinftyOutcome::SmallDensity { threshold, .. } => Ok(IncrementOutcome::small_density(
            a,
            format!("alpha below (4/c')(pi/n)^(1/2) = {threshold}"),
        )),
        LinftyOutcome::Progression { progression, .. } => {
            let set = GridSet::new(
                a.ambient(),
                a.points().filter(|&(x, _)| progression.contains(x)),
            )?;
            Ok(IncrementOutcome::strip(
                a,
                Extraction::new(progression, Orientation::Columns, set),
                Branch::Ii,
                Some(1),
            ))
        }
    }
}

/// Renames `B ∩ square` to a subset of `[ℓ]²`.
fn rename(strip: &GridSet, p: &Progression, ph: &PigeonholeOutcome, orientation: Orientation) -> Result<GridSet> {
    let (px, py) = match orientation {
        Orientation::Columns => (p, &ph.translate),
        Orientation::Rows => (&ph.translate, p),
    };
    let pts = strip.points().filter_map(|(x, y)| {
        let i = px.position(x)?;
        let j = py.position(y)?;
        Some((i as i64 + 1, j as i64 + 1))
    });
    GridSet::new(Ambient::grid(p.len as u32)?, pts)
}

fn subsquare(
    a: &GridSet,
    strip: &GridSet,
    p: &Progression,
    orientation: Orientation,
    branch: Branch,
    m: Option<usize>,
) -> Result<IncrementOutcome> {
    let ph = pigeonhole_square(strip, p, orientation)?;
    let set = rename(strip, p, &ph, orientation)?;
    debug_assert_eq!(set.len() as u64, ph.count);
    let side = p.len as u32;
    Ok(IncrementOutcome {
        variant: OutcomeVariant::Subsquare,
        branch: Some(branch),
        input_density: a.density(),
        progressions: vec![*p, ph.translate],
        count: set.len() as u64,
        area: u64::from(side) * u64::from(side),
        density: set.len() as f64 / (f64::from(side) * f64::from(side)),
        extracted: Some(set),
        nprime: Some(side),
        m,
        detail: format!("strip density {}, pigeonhole guarantee {}", ph.beta, ph.guarantee),
    })
}

pub fn increment_step(a: &GridSet, config: &AnalysisConfig, mode: IncrementMode) -> Result<IncrementOutcome> {
    match mode {
        IncrementMode::Guaranteed => guaranteed_step(a, config),
        IncrementMode::BestEffort => best_effort_step(a, config),
    }
}

fn guaranteed_step(a: &GridSet, config: &AnalysisConfig) -> Result<IncrementOutcome> {
    let strip = progression_increment(a, config)?;
    if strip.variant == OutcomeVariant::SmallDensity {
        return Ok(strip);
    }
    let orientation = match strip.variant {
        OutcomeVariant::RowProgression => Orientation::Rows,
        _ => Orientation::Columns,
    };
    let p = strip.progressions[0];
    let set = strip.extracted.as_ref().expect("strip outcome carries its set");
    let out = subsquare(a, set, &p, orientation, strip.branch.expect("branch"), strip.m)?;
    let m = strip.m.unwrap_or(1) as f64;
    let target = (1.0 + config.c_prime) * m.powf(1.0 / 6.0) * a.density();
    if out.density < target - config.tolerance {
        return Err(constants_too_aggressive(format!(
            "subsquare density {} below (1+c')m^(1/6)alpha = {target}",
            out.density
        )));
    }
    ensure_free(out.extracted.as_ref().expect("subsquare set"))?;
    Ok(out)
}

/// Frequencies tried per route in best-effort mode.
const BEST_EFFORT_GAMMA: usize = 3;
/// Largest Dirichlet range scanned in best-effort mode.
const BEST_EFFORT_MAX_Q: u64 = 1 << 22;

/// Smallest side length a best-effort subsquare may have.
pub fn best_effort_floor(n: u32) -> u32 {
    (f64::from(n).sqrt().floor() as u32).max(2)
}

#[derive(Clone, Copy)]
struct Candidate {
    progression: Progression,
    orientation: Orientation,
    branch: Branch,
    m: usize,
    count: u64,
}

impl Candidate {
    fn density(&self) -> f64 {
        self.count as f64 / (self.progression.len as f64).powi(2)
    }

    fn better_than(&self, other: &Candidate) -> bool {
        let (l, r) = (self.count * other.progression.len.pow(2), other.count * self.progression.len.pow(2));
        l > r || (l == r && self.progression.len > other.progression.len)
    }
}

/// Progressions `q·[ℓ] ⊆ [n]` that 1-annihilate `Γ`, one per length
/// `ℓ ≥ min_len`, with `q` the least Dirichlet solution for `Q = (6ℓ)^m`.
pub fn annihilating_progressions(gamma: &CharacterSet, n: u32, min_len: u32) -> Result<Vec<Progression>> {
    let floor = min_len.max(1);
    let den = u64::from(gamma.modulus);
    let thetas: Vec<(u64, u64)> = gamma.frequencies.iter().map(|&a| (u64::from(a), den)).collect();
    let m = gamma.len() as u32;
    let mut out = Vec::new();
    for ell in u64::from(floor)..=u64::from(n) {
        let Some(big_q) = (6 * ell).checked_pow(m).filter(|&q| q <= BEST_EFFORT_MAX_Q) else {
            break;
        };
        let q = dirichlet(&thetas, big_q)?;
        if ell * q > u64::from(n) {
            continue;
        }
        let p = Progression::new(q as i64, q, ell)?;
        let xs: Vec<i64> = p.elements().collect();
        if !annihilation_check(gamma, &xs, 1.0)?.annihilated {
            return Err(Error::falsified(Check::AnnihilatingProgression, format!("{p:?} fails to annihilate")));
        }
        out.push(p);
    }
    Ok(out)
}

fn best_effort_step(a: &GridSet, config: &AnalysisConfig) -> Result<IncrementOutcome> {
    require_grid(a)?;
    config.validate()?;
    if let Some(w) = verify::find_skew_corner(a) {
        return Err(Error::Parameter(format!("input contains the skew corner {w:?}")));
    }
    if a.is_empty() {
        return Ok(IncrementOutcome::small_density(a, "empty set"));
    }
    let n = a.size();
    let floor = best_effort_floor(n);
    let spectrum = Spectrum::of(a)?;
    let mut strips: HashMap<(Progression, bool), GridSet> = HashMap::new();
    let mut best: Option<Candidate> = None;
    let mut consider = |strip: &GridSet, p: Progression, orientation: Orientation, branch: Branch, m: usize| -> Result<()> {
        let ph = pigeonhole_square(strip, &p, orientation)?;
        let cand = Candidate {
            progression: p,
            orientation,
            branch,
            m,
            count: ph.count,
        };
        if best.is_none_or(|b| cand.better_than(&b)) {
            best = Some(cand);
        }
        Ok(())
    };

    let vertical: Vec<f64> = spectrum.s_balanced.coefficients().iter().map(|c| c.norm()).collect();
    for (weights, orientation, branch) in [
        (&spectrum.horizontal, Orientation::Rows, Branch::Iv),
        (&vertical, Orientation::Columns, Branch::Iii),
    ] {
        let order = ranked(weights);
        for m in 1..=BEST_EFFORT_GAMMA.min(order.len()) {
            let gamma = CharacterSet::new(spectrum.modulus, order[..m].iter().map(|&(f, _)| f).collect())?;
            for p in annihilating_progressions(&gamma, n, floor)? {
                let key = (p, orientation == Orientation::Rows);
                if let std::collections::hash_map::Entry::Vacant(slot) = strips.entry(key) {
                    slot.insert(match orientation {
                        Orientation::Rows => extract_rows(&spectrum.torus, &p, n)?,
                        Orientation::Columns => extract_columns(&spectrum.torus, &p, n)?,
                    });
                }
                consider(&strips[&key], p, orientation, branch, m)?;
            }
        }
    }

    let big_q = (2.0 * (std::f64::consts::PI * f64::from(n)).sqrt()).ceil() as u64;
    for &(gamma, _) in ranked(&vertical).iter().take(BEST_EFFORT_GAMMA) {
        let q = dirichlet(&[(u64::from(gamma), u64::from(spectrum.modulus))], big_q)?;
        for ell in u64::from(floor)..=u64::from(n) / q {
            for p in residue_blocks(u64::from(n), q, ell).into_iter().filter(|p| p.span() <= u64::from(n)) {
                let strip = GridSet::new(a.ambient(), a.points().filter(|&(x, _)| p.contains(x)))?;
                consider(&strip, p, Orientation::Columns, Branch::Ii, 1)?;
            }
        }
    }

    let whole = IncrementOutcome {
        variant: OutcomeVariant::Subsquare,
        branch: None,
        input_density: a.density(),
        progressions: vec![Progression::new(1, 1, u64::from(n))?; 2],
        extracted: Some(a.clone()),
        count: a.len() as u64,
        area: a.ambient().area(),
        density: a.density(),
        nprime: Some(n),
        m: None,
        detail: "no subsquare beats the input".into(),
    };
    let Some(cand) = best.filter(|c| c.density() > a.density()) else {
        return Ok(whole);
    };
    let strip = match (cand.branch, cand.orientation) {
        (Branch::Ii, _) => GridSet::new(a.ambient(), a.points().filter(|&(x, _)| cand.progression.contains(x)))?,
        (_, o) => strips.remove(&(cand.progression, o == Orientation::Rows)).expect("strip cached"),
    };
    let out = subsquare(a, &strip, &cand.progression, cand.orientation, cand.branch, Some(cand.m))?;
    ensure_free(out.extracted.as_ref().expect("subsquare set"))?;
    Ok(out)
}
