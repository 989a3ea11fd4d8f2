//! Large skew-corner-free sets: the digit-product construction over a small
//! torus base set, and the sphere sets
//! `A_{r,t} = {(x, y) ∈ B × B : ‖x‖² = r, ⟨x, y⟩ = t}` with `B = [m]^d`,
//! pushed into `[n]` by a base-`2m` digit map.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Ambient, GridSet};
use crate::verify;

/// Products above this side length are not re-verified unless asked.
pub const PRODUCT_VERIFY_LIMIT: u64 = 64;

/// A skew-corner-free subset of `(Z/bZ)²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseSet {
    points: GridSet,
}

impl BaseSet {
    pub fn new(points: GridSet) -> Result<Self> {
        if !points.ambient().is_torus() {
            return Err(Error::AmbientMismatch {
                expected: "torus",
                found: points.ambient(),
            });
        }
        if let Some(w) = verify::find_skew_corner(&points) {
            return Err(Error::Parameter(format!(
                "base set contains the skew corner {w:?}"
            )));
        }
        Ok(BaseSet { points })
    }

    pub fn modulus(&self) -> u32 {
        self.points.size()
    }

    pub fn points(&self) -> &GridSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    /// Verify only when `n ≤ PRODUCT_VERIFY_LIMIT`.
    Auto,
    Always,
    Never,
}

/// `⌊log_b n⌋` in integer arithmetic.
fn floor_log(b: u64, n: u64) -> u32 {
    let mut k = 0;
    let mut p = 1u64;
    while let Some(next) = p.checked_mul(b) {
        if next > n {
            break;
        }
        p = next;
        k += 1;
    }
    k
}

pub fn product_construction(base: &BaseSet, n: u32) -> Result<GridSet> {
    product_construction_with(base, n, Verification::Auto)
}

/// All `(x, y) ∈ [b^k]²` whose base-`b` digit pairs of `(x − 1, y − 1)` lie in
/// the base set, with `k = ⌊log_b n⌋`. The result has exactly `|S|^k` points.
pub fn product_construction_with(base: &BaseSet, n: u32, verification: Verification) -> Result<GridSet> {
    let b = u64::from(base.modulus());
    if b < 2 {
        return Err(Error::Parameter("product construction needs a base of modulus at least 2".into()));
    }
    let k = floor_log(b, u64::from(n));
    if k == 0 {
        return Err(Error::Parameter(format!("n = {n} is smaller than the base modulus {b}")));
    }
    let digits: Vec<(u64, u64)> = base
        .points()
        .points()
        .map(|(x, y)| (x as u64, y as u64))
        .collect();
    let total = (digits.len() as u128).pow(k);
    if total > 50_000_000 {
        return Err(Error::Capability(format!("product construction would have {total} points")));
    }

    let mut coords: Vec<(u64, u64)> = vec![(0, 0)];
    let mut place = 1u64;
    for _ in 0..k {
        coords = coords
            .iter()
            .flat_map(|&(x, y)| digits.iter().map(move |&(dx, dy)| (x + dx * place, y + dy * place)))
            .collect();
        place *= b;
    }
    let set = GridSet::new(
        Ambient::grid(n)?,
        coords.into_iter().map(|(x, y)| (x as i64 + 1, y as i64 + 1)),
    )?;

    let check = match verification {
        Verification::Auto => u64::from(n) <= PRODUCT_VERIFY_LIMIT,
        Verification::Always => true,
        Verification::Never => false,
    };
    if check {
        if let Some(w) = verify::find_skew_corner(&set) {
            return Err(Error::Inconsistent(format!("product set contains skew corner {w:?}")));
        }
    }
    Ok(set)
}

/// `φ(x) = 1 + Σ_j (2m)^{j−1} (x_j − 1)` for `x ∈ [m]^d`.
pub fn freiman_embed(x: &[u32], m: u32) -> Result<u64> {
    if m == 0 {
        return Err(Error::Parameter("m must be at least 1".into()));
    }
    let base = 2 * u64::from(m);
    let mut value = 0u64;
    let mut place = 1u64;
    for &c in x {
        if !(1..=m).contains(&c) {
            return Err(Error::Parameter(format!("coordinate {c} outside [1, {m}]")));
        }
        value = u64::from(c - 1)
            .checked_mul(place)
            .and_then(|v| v.checked_add(value))
            .ok_or_else(|| Error::Capability("embedding overflows u64".into()))?;
        place = place.saturating_mul(base);
    }
    Ok(value + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SphereParams {
    pub m: u32,
    pub d: u32,
    pub r: u32,
    pub t: u32,
}

/// The box `[m]^d` in lexicographic order (first coordinate fastest).
fn box_points(m: u32, d: u32) -> Vec<Vec<u32>> {
    let count = (m as usize).pow(d);
    (0..count)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let c = (idx % m as usize) as u32 + 1;
                    idx /= m as usize;
                    c
                })
                .collect()
        })
        .collect()
}

fn norm_sq(x: &[u32]) -> u32 {
    x.iter().map(|c| c * c).sum()
}

fn dot(x: &[u32], y: &[u32]) -> u32 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Enumerates `A_{r,t}` as pairs of box points.
pub fn sphere_family(m: u32, d: u32, r: u32, t: u32) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
    check_box(m, d)?;
    let pts = box_points(m, d);
    let mut out = Vec::new();
    for x in pts.iter().filter(|x| norm_sq(x) == r) {
        for y in &pts {
            if dot(x, y) == t {
                out.push((x.clone(), y.clone()));
            }
        }
    }
    Ok(out)
}

fn check_box(m: u32, d: u32) -> Result<()> {
    if m == 0 || d == 0 {
        return Err(Error::Parameter("sphere construction needs m ≥ 1 and d ≥ 1".into()));
    }
    if (m as u64).checked_pow(d).is_none_or(|c| c > 50_000_000) {
        return Err(Error::Capability(format!("box [{m}]^{d} is too large to enumerate")));
    }
    Ok(())
}

/// `d = ⌊√(2 log₂ n)⌋` and `m = ⌊n^{1/d} / 2⌋`, both computed exactly:
/// `d` is the largest integer with `2^{d²} ≤ n²`, `m` the largest with
/// `(2m)^d ≤ n`.
pub fn sphere_dimensions(n: u32) -> Result<(u32, u32)> {
    if n < 2 {
        return Err(Error::Parameter("sphere construction needs n ≥ 2".into()));
    }
    let n2 = u128::from(n) * u128::from(n);
    let mut d = 1u32;
    while (d + 1) * (d + 1) < 128 && (1u128 << ((d + 1) * (d + 1))) <= n2 {
        d += 1;
    }
    let mut m = 0u32;
    while u128::from(2 * (m + 1)).pow(d) <= u128::from(n) {
        m += 1;
    }
    if m == 0 {
        return Err(Error::Parameter(format!(
            "n = {n} gives m = 0; the construction needs n ≥ 2^d = {}",
            1u64 << d
        )));
    }
    Ok((d, m))
}

/// Pigeonhole guarantee `m^{2d−4} / d²` for the plain sphere construction.
pub fn sphere_guarantee(m: u32, d: u32) -> f64 {
    f64::from(m).powi(2 * d as i32 - 4) / f64::from(d * d)
}

/// Guarantee `m^{2d−6} / d³` for the bi-skew variant.
pub fn bi_sphere_guarantee(m: u32, d: u32) -> f64 {
    f64::from(m).powi(2 * d as i32 - 6) / f64::from(d).powi(3)
}

#[derive(Debug, Clone)]
pub struct SphereConstruction {
    pub set: GridSet,
    pub params: SphereParams,
    pub guaranteed: f64,
}

/// Box points grouped by squared norm.
fn shells(m: u32, d: u32) -> BTreeMap<u32, Vec<Vec<u32>>> {
    let mut shells: BTreeMap<u32, Vec<Vec<u32>>> = BTreeMap::new();
    for p in box_points(m, d) {
        shells.entry(norm_sq(&p)).or_default().push(p);
    }
    shells
}

/// Histogram of `⟨x, y⟩` over `x ∈ xs`, `y ∈ ys`, indexed by `t`.
fn inner_product_histogram(xs: &[Vec<u32>], ys: &[Vec<u32>], max_t: usize) -> Vec<u64> {
    xs.par_chunks(64)
        .map(|chunk| {
            let mut hist = vec![0u64; max_t + 1];
            for x in chunk {
                for y in ys {
                    hist[dot(x, y) as usize] += 1;
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; max_t + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
                a
            },
        )
}

fn embed_pairs(n: u32, m: u32, pairs: impl Iterator<Item = (Vec<u32>, Vec<u32>)>) -> Result<GridSet> {
    let pts: Vec<(i64, i64)> = pairs
        .map(|(x, y)| Ok((freiman_embed(&x, m)? as i64, freiman_embed(&y, m)? as i64)))
        .collect::<Result<_>>()?;
    GridSet::new(Ambient::grid(n)?, pts)
}

pub fn sphere_construction(n: u32) -> Result<SphereConstruction> {
    let (d, m) = sphere_dimensions(n)?;
    sphere_construction_in_box(n, m, d)
}

/// Scans every `(r, t)` for a largest `A_{r,t}` (ties to the smallest pair)
/// and returns its image under `φ × φ` in `[n]²`.
pub fn sphere_construction_in_box(n: u32, m: u32, d: u32) -> Result<SphereConstruction> {
    check_box(m, d)?;
    if u64::from(2 * m).pow(d) > u64::from(n) {
        return Err(Error::Parameter(format!("(2m)^d = {} exceeds n = {n}", u64::from(2 * m).pow(d))));
    }
    let shells = shells(m, d);
    let all: Vec<Vec<u32>> = shells.values().flatten().cloned().collect();
    let max_t = (d * m * m) as usize;

    let mut best = (0u64, 0u32, 0u32);
    for (&r, xs) in &shells {
        let hist = inner_product_histogram(xs, &all, max_t);
        for (t, &count) in hist.iter().enumerate() {
            if count > best.0 {
                best = (count, r, t as u32);
            }
        }
    }
    let (_, r, t) = best;
    let xs = &shells[&r];
    let pairs = xs
        .iter()
        .flat_map(|x| all.iter().filter(move |y| dot(x, y) == t).map(move |y| (x.clone(), y.clone())));
    let set = embed_pairs(n, m, pairs)?;
    Ok(SphereConstruction {
        set,
        params: SphereParams { m, d, r, t },
        guaranteed: sphere_guarantee(m, d),
    })
}

pub fn bi_sphere_construction(n: u32) -> Result<SphereConstruction> {
    let (d, m) = sphere_dimensions(n)?;
    bi_sphere_construction_in_box(n, m, d)
}

/// Both points on the sphere of radius `√r`: pick the fullest shell, then
/// the most popular inner product inside it.
pub fn bi_sphere_construction_in_box(n: u32, m: u32, d: u32) -> Result<SphereConstruction> {
    check_box(m, d)?;
    if u64::from(2 * m).pow(d) > u64::from(n) {
        return Err(Error::Parameter(format!("(2m)^d = {} exceeds n = {n}", u64::from(2 * m).pow(d))));
    }
    let shells = shells(m, d);
    // BTreeMap iterates r ascending, so strict > keeps the smallest r on ties
    let mut best_r = 0u32;
    let mut best_len = 0usize;
    for (&r, xs) in &shells {
        if xs.len() > best_len {
            best_len = xs.len();
            best_r = r;
        }
    }
    let shell = &shells[&best_r];
    let hist = inner_product_histogram(shell, shell, (d * m * m) as usize);
    let (mut t, mut best) = (0u32, 0u64);
    for (i, &c) in hist.iter().enumerate() {
        if c > best {
            best = c;
            t = i as u32;
        }
    }
    let pairs = shell
        .iter()
        .flat_map(|x| shell.iter().filter(move |y| dot(x, y) == t).map(move |y| (x.clone(), y.clone())));
    let set = embed_pairs(n, m, pairs)?;
    Ok(SphereConstruction {
        set,
        params: SphereParams { m, d, r: best_r, t },
        guaranteed: bi_sphere_guarantee(m, d),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub n: u32,
    pub size: u64,
    pub density: f64,
    pub fitted_c: f64,
    pub m: u32,
    pub d: u32,
    pub r: u32,
    pub t: u32,
    pub guaranteed: f64,
}

/// `(2 log₂ n − log₂ size) / √(log₂ n)`.
pub fn fitted_c(n: u32, size: u64) -> f64 {
    let ln = f64::from(n).log2();
    (2.0 * ln - (size as f64).log2()) / ln.sqrt()
}

pub fn growth_table(ns: &[u32]) -> Result<Vec<GrowthRow>> {
    ns.iter()
        .map(|&n| {
            let c = sphere_construction(n)?;
            let size = c.set.len() as u64;
            Ok(GrowthRow {
                n,
                size,
                density: c.set.density(),
                fitted_c: fitted_c(n, size),
                m: c.params.m,
                d: c.params.d,
                r: c.params.r,
                t: c.params.t,
                guaranteed: c.guaranteed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_examples() {
        assert_eq!(freiman_embed(&[3], 5).unwrap(), 3);
        assert_eq!(freiman_embed(&[1, 1, 1], 4).unwrap(), 1);
        assert_eq!(freiman_embed(&[2, 1], 2).unwrap(), 2);
        assert_eq!(freiman_embed(&[1, 2], 2).unwrap(), 5);
        assert!(freiman_embed(&[0, 1], 2).is_err());
        assert!(freiman_embed(&[3, 1], 2).is_err());
    }

    #[test]
    fn freiman_property_exhaustive() {
        for m in 1..=3u32 {
            for d in 1..=3u32 {
                let pts = box_points(m, d);
                let phi: Vec<u64> = pts.iter().map(|p| freiman_embed(p, m).unwrap()).collect();
                let mut seen = std::collections::HashSet::new();
                for &v in &phi {
                    assert!(v >= 1 && v <= u64::from(2 * m).pow(d));
                    assert!(seen.insert(v), "φ not injective");
                }
                let sum = |a: &[u32], b: &[u32]| a.iter().zip(b).map(|(u, v)| u + v).collect::<Vec<_>>();
                for (i, a) in pts.iter().enumerate() {
                    for (j, b) in pts.iter().enumerate() {
                        for (k, c) in pts.iter().enumerate() {
                            for (l, e) in pts.iter().enumerate() {
                                let lhs = phi[i] + phi[j] == phi[k] + phi[l];
                                let rhs = sum(a, b) == sum(c, e);
                                assert_eq!(lhs, rhs);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_family_examples() {
        let a = sphere_family(2, 2, 5, 4).unwrap();
        let expect = vec![(vec![2, 1], vec![1, 2]), (vec![1, 2], vec![2, 1])];
        assert_eq!(a.len(), 2);
        for p in &expect {
            assert!(a.contains(p));
        }
        assert_eq!(sphere_family(1, 1, 1, 1).unwrap(), vec![(vec![1], vec![1])]);
    }

    #[test]
    fn sphere_family_partitions_box_pairs() {
        for (m, d) in [(2u32, 2u32), (3, 2), (2, 3), (3, 3)] {
            let top = d * m * m;
            let mut total = 0usize;
            for r in 1..=top {
                for t in 1..=top {
                    total += sphere_family(m, d, r, t).unwrap().len();
                }
            }
            assert_eq!(total, (m as usize).pow(2 * d));
        }
    }

    #[test]
    fn dimensions() {
        assert_eq!(sphere_dimensions(16).unwrap(), (2, 2));
        assert_eq!(sphere_dimensions(64).unwrap(), (3, 2));
        assert_eq!(sphere_dimensions(1 << 20).unwrap(), (6, 5));
        assert_eq!(sphere_dimensions(1 << 10).unwrap(), (4, 2));
        assert_eq!(sphere_dimensions(2).unwrap(), (1, 1));
        assert!(sphere_dimensions(1).is_err());
    }

    #[test]
    fn sphere_n16_is_free_and_large_enough() {
        let c = sphere_construction(16).unwrap();
        assert_eq!((c.params.m, c.params.d), (2, 2));
        assert!(c.set.len() as f64 >= c.guaranteed);
        assert_eq!(c.set.len(), sphere_family(2, 2, c.params.r, c.params.t).unwrap().len());
        assert!(verify::is_skew_corner_free(&c.set));
    }

    #[test]
    fn bi_sphere_subset_of_plain_family() {
        let c = bi_sphere_construction(64).unwrap();
        assert_eq!((c.params.m, c.params.d), (2, 3));
        assert!(verify::is_bi_skew_corner_free(&c.set));
        let SphereParams { m, d, r, t } = c.params;
        let plain = embed_pairs(64, m, sphere_family(m, d, r, t).unwrap().into_iter()).unwrap();
        assert!(c.set.points().all(|(x, y)| plain.contains(x, y)));
        assert!(c.set.len() as f64 >= c.guaranteed);
    }

    #[test]
    fn product_of_singleton() {
        let base = BaseSet::new(GridSet::new(Ambient::torus(2).unwrap(), [(0, 0)]).unwrap()).unwrap();
        let p = product_construction(&base, 4).unwrap();
        assert_eq!(p.points().collect::<Vec<_>>(), vec![(1, 1)]);
        assert!(product_construction(&base, 1).is_err());
    }

    #[test]
    fn product_size_is_power() {
        let base = BaseSet::new(
            GridSet::new(Ambient::torus(3).unwrap(), [(0, 0), (1, 2), (2, 0)]).unwrap(),
        )
        .unwrap();
        for (n, k) in [(3u32, 1u32), (9, 2), (26, 2), (27, 3)] {
            let p = product_construction_with(&base, n, Verification::Always).unwrap();
            assert_eq!(p.len(), 3usize.pow(k));
        }
    }

    #[test]
    fn base_set_rejects_corners() {
        let bad = GridSet::new(Ambient::torus(3).unwrap(), [(0, 0), (0, 1), (1, 0)]).unwrap();
        assert!(BaseSet::new(bad).is_err());
        assert!(BaseSet::new(GridSet::empty(Ambient::grid(3).unwrap())).is_err());
    }

    #[test]
    fn fitted_constant() {
        assert_eq!(fitted_c(1024, 1024 * 1024), 0.0);
        assert!((fitted_c(1 << 16, 1 << 16) - 4.0).abs() < 1e-12);
    }
}
