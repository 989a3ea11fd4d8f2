//! Exact extremal search in small grids and tori.
//!
//! Branch-and-bound over columns, left to right. Each column takes a subset
//! of rows, stored as a bit mask. Freeness factors through the per-column
//! difference sets: two nonempty columns at distance `δ` are compatible iff
//! neither has a vertical difference `±δ`. Each open column carries the set
//! of distances to already-filled columns, which bounds its best possible
//! size through a precomputed table.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::construct::BaseSet;
use crate::error::{Error, Result};
use crate::grid::{Ambient, AmbientKind, GridSet};

pub const DEFAULT_BUDGET: u64 = 100_000_000;
pub const MAX_SEARCH_SIZE: u32 = 64;
/// Largest side for which the column-capacity table is precomputed.
const CAP_TABLE_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Skew,
    BiSkew,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub budget: u64,
    pub mode: SearchMode,
    /// Quotient by the translation symmetries of the ambient.
    pub symmetry: bool,
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: DEFAULT_BUDGET,
            mode: SearchMode::Skew,
            symmetry: true,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub ambient: Ambient,
    pub best_size: usize,
    pub witness: GridSet,
    pub optimal: bool,
    pub nodes_explored: u64,
    pub budget_exhausted: bool,
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Nonzero vertical differences of a column, as a bit mask indexed by
/// `|d|` (grid) or by the residue `d mod n` (torus, symmetric).
fn difference_mask(s: u64, n: usize, torus: bool) -> u64 {
    let full = low_mask(n);
    let mut d = 0u64;
    let mut rest = s;
    while rest != 0 {
        let y = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if torus {
            let rot = if y == 0 { s } else { ((s >> y) | (s << (n - y))) & full };
            d |= rot;
        } else {
            d |= s >> y;
        }
    }
    d & !1
}

/// Column subsets in decreasing popcount, ascending within a popcount.
fn column_candidates(n: usize, require_zero: bool, allow_empty: bool) -> impl Iterator<Item = u64> {
    let free_bits = if require_zero { n - 1 } else { n };
    let nonempty = (1..=n).rev().flat_map(move |k| {
        let choose = if require_zero { k - 1 } else { k };
        combinations(free_bits, choose).map(move |m| if require_zero { (m << 1) | 1 } else { m })
    });
    nonempty.chain(allow_empty.then_some(0))
}

/// All `k`-subsets of `n` bits in increasing numeric order (Gosper's hack).
fn combinations(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit = 1u128 << n;
    let mut next: Option<u128> = if k <= n { Some((1u128 << k) - 1) } else { None };
    std::iter::from_fn(move || {
        let v = next?;
        next = if v == 0 {
            None
        } else {
            let c = v & v.wrapping_neg();
            let r = v + c;
            let w = (((r ^ v) >> 2) / c) | r;
            (w < limit).then_some(w)
        };
        Some(v as u64)
    })
}

struct Searcher {
    n: usize,
    torus: bool,
    mode: SearchMode,
    symmetry: bool,
    budget: u64,
    /// `cap[allowed]`: largest column whose differences avoid the complement.
    cap: Option<Vec<u8>>,
    nodes: AtomicU64,
    exhausted: AtomicBool,
    best: AtomicUsize,
    witness: Mutex<(usize, Vec<u64>)>,
}

impl Searcher {
    fn new(ambient: Ambient, config: &SearchConfig) -> Self {
        let n = ambient.size as usize;
        let torus = ambient.is_torus();
        let mut s = Searcher {
            n,
            torus,
            mode: config.mode,
            symmetry: config.symmetry,
            budget: config.budget,
            cap: None,
            nodes: AtomicU64::new(0),
            exhausted: AtomicBool::new(false),
            best: AtomicUsize::new(0),
            witness: Mutex::new((0, vec![0; n])),
        };
        if n <= CAP_TABLE_LIMIT {
            s.cap = Some(s.capacity_table());
        }
        s
    }

    fn distance_bits(&self) -> usize {
        if self.torus {
            self.n / 2
        } else {
            self.n.saturating_sub(1)
        }
    }

    /// Maps a full difference mask onto the compact distance index.
    fn compress(&self, mask: u64) -> usize {
        let mut out = 0usize;
        let mut rest = mask & !1;
        while rest != 0 {
            let d = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let idx = if self.torus { d.min(self.n - d) } else { d };
            out |= 1 << (idx - 1);
        }
        out
    }

    fn capacity_table(&self) -> Vec<u8> {
        let bits = self.distance_bits();
        let mut table = vec![0u8; 1 << bits];
        for s in 0..(1u64 << self.n) {
            let d = self.compress(difference_mask(s, self.n, self.torus));
            let size = s.count_ones() as u8;
            if size > table[d] {
                table[d] = size;
            }
        }
        for b in 0..bits {
            for m in 0..table.len() {
                if m >> b & 1 == 1 {
                    table[m] = table[m].max(table[m ^ (1 << b)]);
                }
            }
        }
        table
    }

    fn capacity(&self, forbidden: u64) -> usize {
        match &self.cap {
            Some(table) => {
                let allowed = !self.compress(forbidden) & ((1usize << self.distance_bits()) - 1);
                table[allowed] as usize
            }
            None => self.n,
        }
    }

    fn distance(&self, from: usize, to: usize) -> usize {
        // from < to; the torus masks are symmetric so one direction suffices
        to - from
    }

    fn rows_free(&self, cols: &[u64], upto: usize) -> bool {
        let mut rows = vec![0u64; self.n];
        for (x, &c) in cols.iter().enumerate().take(upto) {
            let mut rest = c;
            while rest != 0 {
                let y = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                rows[y] |= 1 << x;
            }
        }
        let diffs: Vec<u64> = rows
            .iter()
            .map(|&r| difference_mask(r, self.n, self.torus))
            .collect();
        for y in 0..self.n {
            if rows[y] == 0 {
                continue;
            }
            for y2 in y + 1..self.n {
                if rows[y2] == 0 {
                    continue;
                }
                let delta = y2 - y;
                if (diffs[y] | diffs[y2]) >> delta & 1 == 1 {
                    return false;
                }
            }
        }
        true
    }

    fn candidates(&self, x: usize) -> impl Iterator<Item = u64> {
        let require_zero = self.symmetry
            && match (self.mode, self.torus) {
                (SearchMode::Skew, _) => true,
                (SearchMode::BiSkew, true) => x == 0,
                (SearchMode::BiSkew, false) => false,
            };
        let allow_empty = !(self.symmetry && self.torus && x == 0);
        column_candidates(self.n, require_zero, allow_empty)
    }

    /// Counts a node; false once the budget is spent.
    fn tick(&self) -> bool {
        if self.exhausted.load(Ordering::Relaxed) {
            return false;
        }
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.budget {
            self.exhausted.store(true, Ordering::Relaxed);
            return false;
        }
        true
    }

    fn record(&self, cols: &[u64], size: usize) {
        let mut w = self.witness.lock().unwrap();
        if size > w.0 {
            w.0 = size;
            w.1.copy_from_slice(cols);
            self.best.fetch_max(size, Ordering::Relaxed);
        }
    }

    /// Applies column `x := s` to the open-column state.
    fn place(&self, x: usize, s: u64, forbid: &mut [u64], blocked: &mut u64) {
        let d = difference_mask(s, self.n, self.torus);
        for (x2, f) in forbid.iter_mut().enumerate().take(self.n).skip(x + 1) {
            let delta = self.distance(x, x2);
            *f |= 1 << delta;
            if d >> delta & 1 == 1 {
                *blocked |= 1 << x2;
            }
        }
    }

    fn admissible(&self, x: usize, s: u64, cols: &mut [u64], forbid: &[u64], blocked: u64) -> bool {
        if s == 0 {
            return true;
        }
        if blocked >> x & 1 == 1 || difference_mask(s, self.n, self.torus) & forbid[x] != 0 {
            return false;
        }
        if self.mode == SearchMode::BiSkew {
            cols[x] = s;
            let ok = self.rows_free(cols, x + 1);
            cols[x] = 0;
            return ok;
        }
        true
    }

    fn remaining_bound(&self, from: usize, forbid: &[u64], blocked: u64) -> usize {
        (from..self.n)
            .filter(|&x| blocked >> x & 1 == 0)
            .map(|x| self.capacity(forbid[x]))
            .sum()
    }

    fn dfs(&self, x: usize, cols: &mut Vec<u64>, forbid: &[u64], blocked: u64, current: usize) {
        if x == self.n {
            if current > self.best.load(Ordering::Relaxed) {
                self.record(cols, current);
            }
            return;
        }
        if !self.tick() {
            return;
        }
        let later = self.remaining_bound(x + 1, forbid, blocked);
        let here = if blocked >> x & 1 == 1 { 0 } else { self.capacity(forbid[x]) };
        if current + here + later <= self.best.load(Ordering::Relaxed) {
            return;
        }
        for s in self.candidates(x) {
            let size = s.count_ones() as usize;
            if s != 0 && current + size + later <= self.best.load(Ordering::Relaxed) {
                // popcounts only decrease from here, except for the empty column
                if self.candidates_allow_empty(x) {
                    self.descend_empty(x, cols, forbid, blocked, current);
                }
                return;
            }
            if !self.admissible(x, s, cols, forbid, blocked) {
                continue;
            }
            if s == 0 {
                self.descend_empty(x, cols, forbid, blocked, current);
                continue;
            }
            let mut f = forbid.to_vec();
            let mut b = blocked;
            self.place(x, s, &mut f, &mut b);
            cols[x] = s;
            self.dfs(x + 1, cols, &f, b, current + size);
            cols[x] = 0;
            if self.exhausted.load(Ordering::Relaxed) {
                return;
            }
        }
    }

    fn candidates_allow_empty(&self, x: usize) -> bool {
        !(self.symmetry && self.torus && x == 0)
    }

    fn descend_empty(&self, x: usize, cols: &mut Vec<u64>, forbid: &[u64], blocked: u64, current: usize) {
        self.dfs(x + 1, cols, forbid, blocked, current);
    }

    fn run(&self, parallel: bool) {
        if self.n == 0 || !self.tick() {
            return;
        }
        let forbid = vec![0u64; self.n];
        let first: Vec<u64> = self.candidates(0).collect();
        let branch = |s: u64| {
            let mut cols = vec![0u64; self.n];
            if !self.admissible(0, s, &mut cols, &forbid, 0) {
                return;
            }
            let mut f = forbid.clone();
            let mut b = 0u64;
            if s != 0 {
                self.place(0, s, &mut f, &mut b);
            }
            cols[0] = s;
            self.dfs(1, &mut cols, &f, b, s.count_ones() as usize);
        };
        if parallel {
            first.par_iter().for_each(|&s| branch(s));
        } else {
            for s in first {
                branch(s);
                if self.exhausted.load(Ordering::Relaxed) {
                    break;
                }
            }
        }
    }
}

fn columns_to_set(ambient: Ambient, cols: &[u64]) -> GridSet {
    let lo = ambient.lo();
    let pts = cols.iter().enumerate().flat_map(|(x, &c)| {
        (0..64).filter(move |y| c >> y & 1 == 1).map(move |y| (x as i64 + lo, y as i64 + lo))
    });
    GridSet::new(ambient, pts).expect("search columns stay in range")
}

/// Largest skew-corner-free (or bi-skew-corner-free) set in the ambient.
pub fn max_skew_corner_free(ambient: Ambient, config: &SearchConfig) -> Result<SearchResult> {
    if ambient.size > MAX_SEARCH_SIZE {
        return Err(Error::Capability(format!(
            "search supports sizes up to {MAX_SEARCH_SIZE}, got {}",
            ambient.size
        )));
    }
    let searcher = Searcher::new(ambient, config);
    searcher.run(config.parallel);
    let (best_size, cols) = searcher.witness.into_inner().unwrap();
    let exhausted = searcher.exhausted.load(Ordering::Relaxed);
    let witness = columns_to_set(ambient, &cols);
    debug_assert_eq!(witness.len(), best_size);
    Ok(SearchResult {
        ambient,
        best_size,
        witness,
        optimal: !exhausted,
        nodes_explored: searcher.nodes.load(Ordering::Relaxed).min(config.budget),
        budget_exhausted: exhausted,
    })
}

/// A skew-corner-free `S ⊆ (Z/bZ)²` with `|S| > b`, if the search finds one.
pub fn find_base_set(b: u32, config: &SearchConfig) -> Result<Option<BaseSet>> {
    if b == 0 {
        return Err(Error::Parameter("modulus must be at least 1".into()));
    }
    if b == 1 {
        return Ok(None);
    }
    let res = max_skew_corner_free(Ambient::torus(b)?, &config.mode(SearchMode::Skew))?;
    if res.best_size > b as usize {
        Ok(Some(BaseSet::new(res.witness)?))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub n: u32,
    pub s: usize,
    pub certified: bool,
    pub nodes: u64,
}

/// `s(n)` for `n = 1..=n_max` on grids.
pub fn s_table(n_max: u32, config: &SearchConfig) -> Result<Vec<TableRow>> {
    (1..=n_max)
        .map(|n| {
            let r = max_skew_corner_free(Ambient::grid(n)?, config)?;
            Ok(TableRow {
                n,
                s: r.best_size,
                certified: r.optimal,
                nodes: r.nodes_explored,
            })
        })
        .collect()
}

/// Randomized greedy skew-corner-free set: visits cells in a seeded random
/// order and keeps each one that leaves the set free.
pub fn greedy_free_set(ambient: Ambient, seed: u64) -> Result<GridSet> {
    if ambient.size > MAX_SEARCH_SIZE {
        return Err(Error::Capability(format!(
            "greedy builder supports sizes up to {MAX_SEARCH_SIZE}"
        )));
    }
    let n = ambient.size as usize;
    let torus = ambient.kind == AmbientKind::Torus;
    let mut cells: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect();
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cols = vec![0u64; n];
    let mut diffs = vec![0u64; n];
    for (x, y) in cells {
        let s = cols[x] | 1 << y;
        let d = difference_mask(s, n, torus);
        let ok = (0..n).filter(|&x2| x2 != x && cols[x2] != 0).all(|x2| {
            let delta = if torus { (x2 + n - x) % n } else { x.abs_diff(x2) };
            (d | diffs[x2]) >> delta & 1 == 0
        });
        if ok {
            cols[x] = s;
            diffs[x] = d;
        }
    }
    Ok(columns_to_set(ambient, &cols))
}
