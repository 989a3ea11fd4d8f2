//! Ambient spaces and the column-major point-set model.
//!
//! A grid `[n]²` uses 1-based coordinates in `1..=n`; a torus `(Z/NZ)²` uses
//! residues in `0..N`. Sets are stored column by column because every
//! algorithm in this crate works on the slices `A_x = {y : (x, y) ∈ A}`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbientKind {
    Grid,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Ambient {
    pub kind: AmbientKind,
    pub size: u32,
}

impl Ambient {
    pub fn grid(n: u32) -> Result<Self> {
        Self::new(AmbientKind::Grid, n)
    }

    pub fn torus(n: u32) -> Result<Self> {
        Self::new(AmbientKind::Torus, n)
    }

    pub fn new(kind: AmbientKind, size: u32) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parameter("ambient size must be at least 1".into()));
        }
        Ok(Ambient { kind, size })
    }

    pub fn is_torus(&self) -> bool {
        self.kind == AmbientKind::Torus
    }

    /// Smallest valid coordinate.
    pub fn lo(&self) -> i64 {
        match self.kind {
            AmbientKind::Grid => 1,
            AmbientKind::Torus => 0,
        }
    }

    /// Largest valid coordinate.
    pub fn hi(&self) -> i64 {
        self.lo() + i64::from(self.size) - 1
    }

    pub fn contains(&self, c: i64) -> bool {
        (self.lo()..=self.hi()).contains(&c)
    }

    /// Storage index of a coordinate.
    pub(crate) fn index(&self, c: i64) -> usize {
        (c - self.lo()) as usize
    }

    pub(crate) fn coord(&self, index: usize) -> i64 {
        index as i64 + self.lo()
    }

    /// Number of points of the ambient square.
    pub fn area(&self) -> u64 {
        u64::from(self.size) * u64::from(self.size)
    }
}

impl fmt::Display for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AmbientKind::Grid => write!(f, "grid [{}]^2", self.size),
            AmbientKind::Torus => write!(f, "torus (Z/{}Z)^2", self.size),
        }
    }
}

/// A nontrivial skew corner `(x, y), (x, y + d), (x + d, y')`.
///
/// On a torus `d` is reported as a residue in `1..N` and the sums wrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub x: i64,
    pub y: i64,
    pub y_prime: i64,
    pub d: i64,
}

impl Witness {
    pub fn points(&self, ambient: Ambient) -> [(i64, i64); 3] {
        let wrap = |c: i64| match ambient.kind {
            AmbientKind::Grid => c,
            AmbientKind::Torus => c.rem_euclid(i64::from(ambient.size)),
        };
        [
            (self.x, self.y),
            (self.x, wrap(self.y + self.d)),
            (wrap(self.x + self.d), self.y_prime),
        ]
    }
}

/// A finite point set in a grid or torus, immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridSet {
    ambient: Ambient,
    columns: Vec<Vec<u32>>,
    len: usize,
}

impl GridSet {
    pub fn empty(ambient: Ambient) -> Self {
        GridSet {
            ambient,
            columns: vec![Vec::new(); ambient.size as usize],
            len: 0,
        }
    }

    /// Builds a set from coordinate pairs, silently merging duplicates.
    pub fn new(ambient: Ambient, points: impl IntoIterator<Item = (i64, i64)>) -> Result<Self> {
        let mut columns = vec![Vec::new(); ambient.size as usize];
        for (x, y) in points {
            if !ambient.contains(x) || !ambient.contains(y) {
                return Err(Error::Coordinate { x, y, ambient });
            }
            columns[ambient.index(x)].push(y as u32);
        }
        Ok(Self::from_columns_unchecked(ambient, columns))
    }

    /// Like [`GridSet::new`] but rejects duplicates instead of merging them.
    pub fn new_strict(
        ambient: Ambient,
        points: impl IntoIterator<Item = (i64, i64)>,
    ) -> Result<Self> {
        let mut columns: Vec<Vec<u32>> = vec![Vec::new(); ambient.size as usize];
        for (x, y) in points {
            if !ambient.contains(x) || !ambient.contains(y) {
                return Err(Error::Coordinate { x, y, ambient });
            }
            columns[ambient.index(x)].push(y as u32);
        }
        for (i, col) in columns.iter_mut().enumerate() {
            col.sort_unstable();
            if let Some(w) = col.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Duplicate {
                    x: ambient.coord(i),
                    y: i64::from(w[0]),
                });
            }
        }
        Ok(Self::from_columns_unchecked(ambient, columns))
    }

    /// Columns must already hold in-range values; they are sorted and deduplicated here.
    pub(crate) fn from_columns_unchecked(ambient: Ambient, mut columns: Vec<Vec<u32>>) -> Self {
        debug_assert_eq!(columns.len(), ambient.size as usize);
        let mut len = 0;
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            len += col.len();
        }
        GridSet {
            ambient,
            columns,
            len,
        }
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn size(&self) -> u32 {
        self.ambient.size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `|A|` divided by the area of the ambient square.
    pub fn density(&self) -> f64 {
        self.len as f64 / self.ambient.area() as f64
    }

    /// The slice `A_x`, sorted. Out-of-range columns are empty.
    pub fn column(&self, x: i64) -> &[u32] {
        if self.ambient.contains(x) {
            &self.columns[self.ambient.index(x)]
        } else {
            &[]
        }
    }

    /// Columns by storage index.
    pub(crate) fn raw_columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    /// `(x, A_x)` for every nonempty column, in increasing `x`.
    pub fn nonempty_columns(&self) -> impl Iterator<Item = (i64, &[u32])> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(|(i, c)| (self.ambient.coord(i), c.as_slice()))
    }

    pub fn nonempty_column_count(&self) -> usize {
        self.columns.iter().filter(|c| !c.is_empty()).count()
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.ambient.contains(y) && self.column(x).binary_search(&(y as u32)).is_ok()
    }

    /// Points in column-major order.
    pub fn points(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.columns.iter().enumerate().flat_map(move |(i, col)| {
            let x = self.ambient.coord(i);
            col.iter().map(move |&y| (x, i64::from(y)))
        })
    }

    /// Reinterprets a subset of `[n]²` as a subset of `(Z/2nZ)²` with the same
    /// coordinates.
    pub fn embed_torus(&self) -> Result<GridSet> {
        if self.ambient.kind != AmbientKind::Grid {
            return Err(Error::AmbientMismatch {
                expected: "grid",
                found: self.ambient,
            });
        }
        let ambient = Ambient::torus(2 * self.ambient.size)?;
        let mut columns = vec![Vec::new(); ambient.size as usize];
        for (i, col) in self.columns.iter().enumerate() {
            columns[i + 1] = col.clone();
        }
        Ok(GridSet {
            ambient,
            columns,
            len: self.len,
        })
    }

    /// The torus view used by the spectral code: grids are embedded, tori are cloned.
    pub fn to_torus(&self) -> GridSet {
        match self.ambient.kind {
            AmbientKind::Torus => self.clone(),
            AmbientKind::Grid => self.embed_torus().expect("grid ambient"),
        }
    }

    /// `(x, y) ↦ (x + h, y + v(x))` on the torus, with an independent vertical
    /// shift per column.
    pub fn translate(&self, h: i64, v: impl Fn(i64) -> i64) -> Result<GridSet> {
        if !self.ambient.is_torus() {
            return Err(Error::AmbientMismatch {
                expected: "torus",
                found: self.ambient,
            });
        }
        let n = i64::from(self.ambient.size);
        let mut columns = vec![Vec::new(); n as usize];
        for (i, col) in self.columns.iter().enumerate() {
            if col.is_empty() {
                continue;
            }
            let x = i as i64;
            let shift = v(x);
            let target = &mut columns[(x + h).rem_euclid(n) as usize];
            target.extend(col.iter().map(|&y| (i64::from(y) + shift).rem_euclid(n) as u32));
        }
        Ok(Self::from_columns_unchecked(self.ambient, columns))
    }

    /// `(x, y) ↦ (y, x)`.
    pub fn transpose(&self) -> GridSet {
        let mut columns = vec![Vec::new(); self.ambient.size as usize];
        for (x, y) in self.points() {
            columns[self.ambient.index(y)].push(x as u32);
        }
        Self::from_columns_unchecked(self.ambient, columns)
    }

    /// Column sizes `|A_x|` by storage index.
    pub fn column_sizes(&self) -> Vec<u64> {
        self.columns.iter().map(|c| c.len() as u64).collect()
    }
}
