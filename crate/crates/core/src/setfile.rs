//! The `skewset v1` text format.
//!
//! ```text
//! skewset 1
//! ambient torus 6
//! 0 0
//! 0 1
//! ```
//!
//! One `x y` pair per line after the two header lines. Blank lines are
//! ignored; duplicates and out-of-range points are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Ambient, AmbientKind, GridSet};

pub fn parse(text: &str) -> Result<GridSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let parse_err = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };

    match lines.next() {
        Some((_, "skewset 1")) => {}
        Some((line, _)) => return Err(parse_err(line, "expected header `skewset 1`")),
        None => return Err(parse_err(1, "empty input")),
    }

    let ambient = match lines.next() {
        Some((line, l)) => {
            let fields: Vec<&str> = l.split_whitespace().collect();
            let kind = match fields.as_slice() {
                ["ambient", "grid", _] => AmbientKind::Grid,
                ["ambient", "torus", _] => AmbientKind::Torus,
                _ => return Err(parse_err(line, "expected `ambient grid <n>` or `ambient torus <N>`")),
            };
            let size: u32 = fields[2]
                .parse()
                .map_err(|_| parse_err(line, "ambient size must be a positive integer"))?;
            Ambient::new(kind, size).map_err(|e| parse_err(line, &e.to_string()))?
        }
        None => return Err(parse_err(2, "missing ambient line")),
    };

    let mut points = Vec::new();
    for (line, l) in lines {
        let mut it = l.split_whitespace();
        let (Some(xs), Some(ys), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(line, "expected `x y`"));
        };
        let x: i64 = xs.parse().map_err(|_| parse_err(line, "bad x coordinate"))?;
        let y: i64 = ys.parse().map_err(|_| parse_err(line, "bad y coordinate"))?;
        if !ambient.contains(x) || !ambient.contains(y) {
            return Err(parse_err(line, &format!("point ({x}, {y}) lies outside {ambient}")));
        }
        points.push((x, y));
    }
    GridSet::new_strict(ambient, points)
}

/// Serialises in column-major order; the output is canonical for a given set.
pub fn render(set: &GridSet) -> String {
    let ambient = set.ambient();
    let kind = match ambient.kind {
        AmbientKind::Grid => "grid",
        AmbientKind::Torus => "torus",
    };
    let mut out = String::with_capacity(32 + set.len() * 8);
    out.push_str("skewset 1\n");
    let _ = writeln!(out, "ambient {kind} {}", ambient.size);
    for (x, y) in set.points() {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<GridSet> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(path: impl AsRef<Path>, set: &GridSet) -> Result<()> {
    std::fs::write(path, render(set))?;
    Ok(())
}
