//! Skew-corner detection and exact tuple counting.
//!
//! A set is free of nontrivial skew corners iff, for every nonempty column
//! `x` and every nonzero vertical difference `d` of `A_x`, the column `x + d`
//! is empty. Both the detector and the counters are built on that slice
//! view. Counts are tuple counts `(x, y, y', d)`, so on a torus the total
//! equals `N⁴ Λ(1_A, 1_A, 1_A)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AmbientKind, GridSet, Witness};

/// Rounding residue above which the FFT path refuses to report a count.
pub const FFT_RESIDUE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CornerCount {
    /// Tuples with `d = 0`; always `Σ_x |A_x|²`.
    pub trivial: u64,
    pub nontrivial: u64,
}

impl CornerCount {
    pub fn total(&self) -> u64 {
        self.trivial + self.nontrivial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMethod {
    Naive,
    Fft,
}

pub fn count_skew_corners(a: &GridSet, method: CountMethod) -> Result<CornerCount> {
    match method {
        CountMethod::Naive => Ok(count_skew_corners_naive(a)),
        CountMethod::Fft => count_skew_corners_fft(a),
    }
}

/// Target column of `x + d`, if it exists in the ambient.
#[inline]
fn shifted(a: &GridSet, x: i64, d: i64) -> Option<i64> {
    let amb = a.ambient();
    match amb.kind {
        AmbientKind::Grid => Some(x + d).filter(|&c| amb.contains(c)),
        AmbientKind::Torus => Some((x + d).rem_euclid(i64::from(amb.size))),
    }
}

pub fn find_skew_corner(a: &GridSet) -> Option<Witness> {
    let amb = a.ambient();
    let n = i64::from(amb.size);
    let nonempty: Vec<(i64, &[u32])> = a.nonempty_columns().collect();
    if nonempty.len() < 2 {
        // a single column has no partner column x + d with d != 0
        return None;
    }
    let occupied = |c: i64| -> Option<u32> { a.column(c).first().copied() };

    nonempty.par_iter().find_map_first(|&(x, ys)| {
        if ys.len() < 2 {
            return None;
        }
        if ys.len() <= nonempty.len() {
            for (i, &y1) in ys.iter().enumerate() {
                for &y2 in &ys[i + 1..] {
                    let d = i64::from(y2 - y1);
                    if let Some(c) = shifted(a, x, d) {
                        if let Some(yp) = occupied(c) {
                            return Some(Witness { x, y: y1.into(), y_prime: yp.into(), d });
                        }
                    }
                    if let Some(c) = shifted(a, x, -d) {
                        if let Some(yp) = occupied(c) {
                            let d = if amb.is_torus() { n - d } else { -d };
                            return Some(Witness { x, y: y2.into(), y_prime: yp.into(), d });
                        }
                    }
                }
            }
            None
        } else {
            for &(xp, other) in &nonempty {
                if xp == x {
                    continue;
                }
                let d = match amb.kind {
                    AmbientKind::Grid => xp - x,
                    AmbientKind::Torus => (xp - x).rem_euclid(n),
                };
                for &y in ys {
                    let target = match amb.kind {
                        AmbientKind::Grid => i64::from(y) + d,
                        AmbientKind::Torus => (i64::from(y) + d).rem_euclid(n),
                    };
                    if amb.contains(target) && ys.binary_search(&(target as u32)).is_ok() {
                        return Some(Witness { x, y: y.into(), y_prime: other[0].into(), d });
                    }
                }
            }
            None
        }
    })
}

pub fn is_skew_corner_free(a: &GridSet) -> bool {
    find_skew_corner(a).is_none()
}

/// Free in both orientations: `a` and its transpose are skew-corner-free.
pub fn is_bi_skew_corner_free(a: &GridSet) -> bool {
    is_skew_corner_free(a) && is_skew_corner_free(&a.transpose())
}

/// Randomized witness search: each probe draws a column with at least two
/// points and a random pair in it, then tests both partner columns.
pub fn probe_skew_corners(a: &GridSet, probes: u64, seed: u64) -> Option<Witness> {
    let cols: Vec<(i64, &[u32])> = a.nonempty_columns().filter(|(_, c)| c.len() >= 2).collect();
    if cols.is_empty() || a.nonempty_column_count() < 2 {
        return None;
    }
    let n = i64::from(a.size());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probes {
        let (x, ys) = cols[rng.gen_range(0..cols.len())];
        let i = rng.gen_range(0..ys.len());
        let mut j = rng.gen_range(0..ys.len() - 1);
        if j >= i {
            j += 1;
        }
        let (y1, y2) = (ys[i.min(j)], ys[i.max(j)]);
        let d = i64::from(y2 - y1);
        if let Some(c) = shifted(a, x, d) {
            if let Some(&yp) = a.column(c).first() {
                return Some(Witness { x, y: y1.into(), y_prime: yp.into(), d });
            }
        }
        if let Some(c) = shifted(a, x, -d) {
            if let Some(&yp) = a.column(c).first() {
                let d = if a.ambient().is_torus() { n - d } else { -d };
                return Some(Witness { x, y: y2.into(), y_prime: yp.into(), d });
            }
        }
    }
    None
}

/// Exact counts by enumerating ordered pairs inside each column. Grid
/// ambients count only witnesses whose arithmetic stays inside `[n]`.
pub fn count_skew_corners_naive(a: &GridSet) -> CornerCount {
    let sizes = a.column_sizes();
    let amb = a.ambient();
    let (trivial, nontrivial) = a
        .raw_columns()
        .par_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map(|(i, ys)| {
            let x = amb.coord(i);
            let k = ys.len() as u64;
            let mut nontrivial = 0u64;
            for (p, &y1) in ys.iter().enumerate() {
                for &y2 in &ys[p + 1..] {
                    let d = i64::from(y2 - y1);
                    for dd in [d, -d] {
                        if let Some(c) = shifted(a, x, dd) {
                            nontrivial += sizes[amb.index(c)];
                        }
                    }
                }
            }
            (k * k, nontrivial)
        })
        .reduce(|| (0, 0), |l, r| (l.0 + r.0, l.1 + r.1));
    CornerCount { trivial, nontrivial }
}

/// Counts via per-column cyclic autocorrelations computed with a length-`N`
/// FFT. Grid inputs are embedded in `(Z/2nZ)²` first; the counts agree with
/// the grid counts because no wrapped difference lands on an occupied column.
pub fn count_skew_corners_fft(a: &GridSet) -> Result<CornerCount> {
    let torus = a.to_torus();
    let n = torus.size() as usize;
    let sizes = torus.column_sizes();
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);
    let scratch_len = forward
        .get_inplace_scratch_len()
        .max(inverse.get_inplace_scratch_len());

    let partials: Vec<Result<(u64, u64)>> = torus
        .raw_columns()
        .par_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map_init(
            || (vec![Complex64::default(); n], vec![Complex64::default(); scratch_len]),
            |(buf, scratch), (x, ys)| {
                buf.fill(Complex64::default());
                for &y in ys {
                    buf[y as usize] = Complex64::new(1.0, 0.0);
                }
                forward.process_with_scratch(buf, scratch);
                for v in buf.iter_mut() {
                    *v = Complex64::new(v.norm_sqr(), 0.0);
                }
                inverse.process_with_scratch(buf, scratch);
                let scale = 1.0 / n as f64;
                let mut trivial = 0u64;
                let mut nontrivial = 0u64;
                for (d, v) in buf.iter().enumerate() {
                    let c = v.re * scale;
                    let r = c.round();
                    let residue = (c - r).abs().max((v.im * scale).abs());
                    if residue > FFT_RESIDUE_TOLERANCE {
                        return Err(Error::Precision {
                            residue,
                            tolerance: FFT_RESIDUE_TOLERANCE,
                        });
                    }
                    let c = r as u64;
                    if c == 0 {
                        continue;
                    }
                    let weight = sizes[(x + d) % n];
                    if d == 0 {
                        trivial += c * weight;
                    } else {
                        nontrivial += c * weight;
                    }
                }
                Ok((trivial, nontrivial))
            },
        )
        .collect();

    let mut count = CornerCount::default();
    for p in partials {
        let (t, nt) = p?;
        count.trivial += t;
        count.nontrivial += nt;
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CornerTally {
    /// Tuples with `d = 0`, one per point.
    pub trivial: u64,
    pub nontrivial: u64,
}

impl CornerTally {
    pub fn total(&self) -> u64 {
        self.trivial + self.nontrivial
    }
}

/// Counts tuples `(x, y, d)` with `(x, y), (x + d, y), (x, y + d)` all in a
/// torus set.
pub fn count_corners(a: &GridSet) -> Result<CornerTally> {
    let amb = a.ambient();
    if !amb.is_torus() {
        return Err(Error::AmbientMismatch {
            expected: "torus",
            found: amb,
        });
    }
    let n = i64::from(amb.size);
    let nontrivial = a
        .raw_columns()
        .par_iter()
        .enumerate()
        .map(|(x, ys)| {
            let x = x as i64;
            let mut count = 0u64;
            for &y in ys {
                for &y2 in ys {
                    if y2 == y {
                        continue;
                    }
                    let d = (i64::from(y2) - i64::from(y)).rem_euclid(n);
                    if a.contains((x + d) % n, y.into()) {
                        count += 1;
                    }
                }
            }
            count
        })
        .sum();
    Ok(CornerTally {
        trivial: a.len() as u64,
        nontrivial,
    })
}
