//! Generators for the regular lattices used as trap arrays, and reservoirs
//! with an embedded target.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Point, TargetPattern, TrapArray, MIN_TRAP_DISTANCE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Ladder,
    Square,
    Triangular,
    Honeycomb,
    Kagome,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 6] = [
        LatticeKind::Chain,
        LatticeKind::Ladder,
        LatticeKind::Square,
        LatticeKind::Triangular,
        LatticeKind::Honeycomb,
        LatticeKind::Kagome,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Chain => "chain",
            LatticeKind::Ladder => "ladder",
            LatticeKind::Square => "square",
            LatticeKind::Triangular => "triangular",
            LatticeKind::Honeycomb => "honeycomb",
            LatticeKind::Kagome => "kagome",
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LatticeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown lattice kind '{s}'")))
    }
}

/// How the target is placed inside the reservoir.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedding {
    /// A centered block of the reservoir.
    Compact,
    /// Every other site of the reservoir.
    Checkerboard,
}

impl FromStr for Embedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Embedding::Compact),
            "checkerboard" => Ok(Embedding::Checkerboard),
            _ => Err(Error::validation(format!("unknown embedding '{s}'"))),
        }
    }
}

impl fmt::Display for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Embedding::Compact => "compact",
            Embedding::Checkerboard => "checkerboard",
        })
    }
}

/// Raw generated sites before row-major re-indexing.
#[derive(Default)]
struct Sites {
    points: Vec<Point>,
    links: Vec<(usize, usize)>,
}

impl Sites {
    /// Sorts sites row-major (by y, then x) and relabels links.
    fn into_row_major(self) -> (Vec<Point>, Vec<(usize, usize)>) {
        let key = |p: &Point| ((p.y * 1e6).round() as i64, (p.x * 1e6).round() as i64);
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by_key(|&i| key(&self.points[i]));
        let mut relabel = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            relabel[old] = new;
        }
        let points = order.iter().map(|&i| self.points[i]).collect();
        let links = self
            .links
            .iter()
            .map(|&(a, b)| (relabel[a], relabel[b]))
            .collect();
        (points, links)
    }
}

fn two_dims(kind: LatticeKind, dims: &[usize]) -> Result<(usize, usize)> {
    match *dims {
        [n] => Ok((n, n)),
        [r, c] => Ok((r, c)),
        _ => Err(Error::validation(format!(
            "{kind} lattice takes 1 or 2 extents, got {}",
            dims.len()
        ))),
    }
}

fn one_dim(kind: LatticeKind, dims: &[usize]) -> Result<usize> {
    match *dims {
        [n] => Ok(n),
        _ => Err(Error::validation(format!(
            "{kind} lattice takes 1 extent, got {}",
            dims.len()
        ))),
    }
}

fn grid_sites(rows: usize, cols: usize, a: f64) -> Sites {
    let mut s = Sites::default();
    let id = |r: usize, c: usize| r * cols + c;
    for r in 0..rows {
        for c in 0..cols {
            s.points.push(Point::new(c as f64 * a, r as f64 * a));
            if c + 1 < cols {
                s.links.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                s.links.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    s
}

/// Rows offset by half a spacing, giving a rectangular triangular patch.
fn triangular_sites(rows: usize, cols: usize, a: f64) -> Sites {
    let mut s = Sites::default();
    let h = a * 3f64.sqrt() / 2.0;
    let id = |r: usize, c: usize| r * cols + c;
    for r in 0..rows {
        let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
        for c in 0..cols {
            s.points
                .push(Point::new((c as f64 + shift) * a, r as f64 * h));
            if c + 1 < cols {
                s.links.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                // Even rows reach down-left and down; odd rows down and down-right.
                let (lo, hi) = if r % 2 == 0 {
                    (c.wrapping_sub(1), c)
                } else {
                    (c, c + 1)
                };
                for cc in [lo, hi] {
                    if cc < cols {
                        s.links.push((id(r, c), id(r + 1, cc)));
                    }
                }
            }
        }
    }
    s
}

/// `rows x cols` hexagons in a brick arrangement: `cols + 1` vertical zigzag
/// chains of `2 rows + 2` vertices, joined by horizontal links, with the two
/// dangling corner vertices removed.
fn honeycomb_sites(rows: usize, cols: usize, a: f64) -> Sites {
    let h = a * 3f64.sqrt() / 2.0;
    let height = 2 * rows + 2;
    let mut index = HashMap::new();
    let mut s = Sites::default();
    let dangling = |i: usize, j: usize| {
        (i == 0 && j == 0) || (i == cols && (i + j) % 2 == 1 && (j == 0 || j == height - 1))
    };
    for i in 0..=cols {
        for j in 0..height {
            if dangling(i, j) {
                continue;
            }
            let bump = ((i + j) % 2) as f64 * 0.5;
            index.insert((i, j), s.points.len());
            s.points
                .push(Point::new((1.5 * i as f64 + bump) * a, j as f64 * h));
        }
    }
    for (&(i, j), &u) in &index {
        if let Some(&v) = index.get(&(i, j + 1)) {
            s.links.push((u, v));
        }
        if (i + j) % 2 == 1 {
            if let Some(&v) = index.get(&(i + 1, j)) {
                s.links.push((u, v));
            }
        }
    }
    s
}

/// Parallelogram patch of `rows x cols` three-site kagome unit cells.
fn kagome_sites(rows: usize, cols: usize, a: f64) -> Sites {
    let r3 = 3f64.sqrt();
    let basis = [
        Point::new(0.0, 0.0),
        Point::new(a, 0.0),
        Point::new(a / 2.0, r3 * a / 2.0),
    ];
    let id = |i: usize, j: usize, b: usize| 3 * (j * cols + i) + b;
    let mut s = Sites::default();
    for j in 0..rows {
        for i in 0..cols {
            let origin = Point::new(2.0 * a * i as f64 + a * j as f64, r3 * a * j as f64);
            for b in basis {
                s.points.push(Point::new(origin.x + b.x, origin.y + b.y));
            }
            s.links.extend([
                (id(i, j, 0), id(i, j, 1)),
                (id(i, j, 0), id(i, j, 2)),
                (id(i, j, 1), id(i, j, 2)),
            ]);
            if i + 1 < cols {
                s.links.push((id(i, j, 1), id(i + 1, j, 0)));
            }
            if j + 1 < rows {
                s.links.push((id(i, j, 2), id(i, j + 1, 0)));
                if i >= 1 {
                    s.links.push((id(i, j, 2), id(i - 1, j + 1, 1)));
                }
            }
        }
    }
    s
}

fn check_spacing(spacing: f64) -> Result<()> {
    if !spacing.is_finite() || spacing < MIN_TRAP_DISTANCE {
        return Err(Error::Geometry(format!(
            "spacing {spacing} um is below the {MIN_TRAP_DISTANCE} um minimum"
        )));
    }
    Ok(())
}

fn generate(kind: LatticeKind, dims: &[usize], spacing: f64) -> Result<Sites> {
    check_spacing(spacing)?;
    if dims.contains(&0) {
        return Err(Error::validation("lattice extents must be >= 1"));
    }
    let a = spacing;
    Ok(match kind {
        LatticeKind::Chain => grid_sites(1, one_dim(kind, dims)?, a),
        LatticeKind::Ladder => grid_sites(2, one_dim(kind, dims)?, a),
        LatticeKind::Square => {
            let (r, c) = two_dims(kind, dims)?;
            grid_sites(r, c, a)
        }
        LatticeKind::Triangular => {
            let (r, c) = two_dims(kind, dims)?;
            triangular_sites(r, c, a)
        }
        LatticeKind::Honeycomb => {
            let (r, c) = two_dims(kind, dims)?;
            honeycomb_sites(r, c, a)
        }
        LatticeKind::Kagome => {
            let (r, c) = two_dims(kind, dims)?;
            kagome_sites(r, c, a)
        }
    })
}

/// Builds a lattice of the given kind with nearest-neighbor links.
///
/// Extents are `[n]` for chains and ladders (sites per row), and `[rows, cols]`
/// (or `[n]` for a square patch) for the 2D lattices. Honeycomb extents count
/// hexagons; kagome extents count three-site unit cells. Traps are indexed
/// row-major.
pub fn build_lattice(kind: LatticeKind, dims: &[usize], spacing: f64) -> Result<TrapArray> {
    let (points, links) = generate(kind, dims, spacing)?.into_row_major();
    TrapArray::new(points, links)
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Reservoir of roughly `2 n` traps containing an `n`-site target.
///
/// Square compact targets are the centered `sqrt(n) x sqrt(n)` block of the
/// square reservoir whose site count is closest to `2 n`. Square checkerboard
/// targets are one color class of a `rows x cols = 2 n` grid. Chains and
/// ladders use `2 n` sites. The other lattices are cropped to the `2 n` sites
/// closest to the patch center, and the target is the `n` closest of those.
pub fn build_reservoir_with_target(
    kind: LatticeKind,
    n: usize,
    embedding: Embedding,
    spacing: f64,
) -> Result<(TrapArray, TargetPattern)> {
    if n == 0 {
        return Err(Error::validation("target atom count must be >= 1"));
    }
    check_spacing(spacing)?;
    match (kind, embedding) {
        (LatticeKind::Square, Embedding::Compact) => {
            let k = isqrt(n);
            if k * k != n {
                return Err(Error::validation(format!(
                    "compact square target needs a perfect square atom count, got {n}"
                )));
            }
            // Square closest to 2n sites, always at least one site wider
            // than the target block.
            let side = ((2.0 * n as f64).sqrt().round() as usize).max(k + 1);
            let offset = (side - k) / 2;
            let array = build_lattice(kind, &[side, side], spacing)?;
            let target = (offset..offset + k)
                .flat_map(|r| (offset..offset + k).map(move |c| r * side + c))
                .collect();
            let target = TargetPattern::new(&array, target)?;
            Ok((array, target))
        }
        (LatticeKind::Square, Embedding::Checkerboard) => {
            let total = 2 * n;
            let rows = (1..=isqrt(total))
                .rev()
                .find(|&r| total.is_multiple_of(r) && total / r <= 2 * r)
                .ok_or_else(|| {
                    Error::validation(format!(
                        "no near-square grid of {total} sites for a checkerboard of {n}"
                    ))
                })?;
            let cols = total / rows;
            let array = build_lattice(kind, &[rows, cols], spacing)?;
            let target = (0..total)
                .filter(|i| (i / cols + i % cols).is_multiple_of(2))
                .collect();
            let target = TargetPattern::new(&array, target)?;
            Ok((array, target))
        }
        (LatticeKind::Chain, _) => {
            let array = build_lattice(kind, &[2 * n], spacing)?;
            let target: Vec<usize> = match embedding {
                Embedding::Compact => (n / 2..n / 2 + n).collect(),
                Embedding::Checkerboard => (0..n).map(|i| 2 * i).collect(),
            };
            let target = TargetPattern::new(&array, target)?;
            Ok((array, target))
        }
        (LatticeKind::Ladder, Embedding::Checkerboard) => {
            let array = build_lattice(kind, &[n], spacing)?;
            let target = (0..2 * n)
                .filter(|i| (i / n + i % n).is_multiple_of(2))
                .collect();
            let target = TargetPattern::new(&array, target)?;
            Ok((array, target))
        }
        (LatticeKind::Ladder, Embedding::Compact) => {
            let array = build_lattice(kind, &[n], spacing)?;
            let target = nearest_to_center(array.traps(), n);
            let target = TargetPattern::new(&array, target)?;
            Ok((array, target))
        }
        (_, Embedding::Checkerboard) => Err(Error::validation(format!(
            "checkerboard embedding is not supported on {kind} lattices"
        ))),
        (_, Embedding::Compact) => {
            // Patch large enough that a centered disk of 2n sites fits inside.
            let per_cell = match kind {
                LatticeKind::Honeycomb => 2,
                LatticeKind::Kagome => 3,
                _ => 1,
            };
            let extent = (1..)
                .find(|m| per_cell * m * m >= 8 * n + 16)
                .expect("unbounded");
            let (points, links) = generate(kind, &[extent, extent], spacing)?.into_row_major();
            let keep = nearest_to_center(&points, 2 * n);
            let mut relabel = vec![usize::MAX; points.len()];
            for (new, &old) in keep.iter().enumerate() {
                relabel[old] = new;
            }
            let kept_points: Vec<Point> = keep.iter().map(|&i| points[i]).collect();
            let kept_links = links
                .into_iter()
                .filter(|&(a, b)| relabel[a] != usize::MAX && relabel[b] != usize::MAX)
                .map(|(a, b)| (relabel[a], relabel[b]))
                .collect();
            let array = TrapArray::new(kept_points, kept_links)?;
            let target = nearest_to_center(array.traps(), n);
            let target = TargetPattern::new(&array, target)?;
            Ok((array, target))
        }
    }
}

/// Indices of the `count` points closest to the bounding-box center, ties
/// broken toward lower indices, returned sorted.
fn nearest_to_center(points: &[Point], count: usize) -> Vec<usize> {
    let center = super::BoundingBox::of(points.iter().copied())
        .expect("non-empty")
        .center();
    let mut order: Vec<usize> = (0..points.len()).collect();
    // Quantize so that symmetric sites compare equal despite rounding.
    let key = |i: usize| (points[i].distance(center) * 1e6).round() as i64;
    order.sort_by_key(|&i| (key(i), i));
    let mut chosen: Vec<usize> = order.into_iter().take(count).collect();
    chosen.sort_unstable();
    chosen
}
