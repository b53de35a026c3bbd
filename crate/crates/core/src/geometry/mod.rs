//! Static trap arrays: positions, link graphs, target patterns and occupancies.
//!
//! Positions are in micrometers. A [`TrapArray`] is validated on construction
//! and immutable afterwards.

mod lattice;
mod path;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lattice::{build_lattice, build_reservoir_with_target, Embedding, LatticeKind};
pub use path::{link_path, PathFinder};

/// Minimum allowed distance between two traps, in um.
pub const MIN_TRAP_DISTANCE: f64 = 3.0;

/// Relative tolerance used when matching link lengths against the spacing.
pub const LINK_TOLERANCE: f64 = 0.01;

/// A position in the focal plane, in um.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point a fraction `t` of the way from `self` to `other`.
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn of(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BoundingBox {
            min: first,
            max: first,
        };
        for p in it {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
        }
        Some(bb)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }
}

/// Region reachable by the moving tweezers, centered on the array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldOfView {
    pub width: f64,
    pub height: f64,
}

impl Default for FieldOfView {
    fn default() -> Self {
        FieldOfView {
            width: 180.0,
            height: 180.0,
        }
    }
}

/// The static microtrap array.
#[derive(Clone, Debug)]
pub struct TrapArray {
    traps: Vec<Point>,
    links: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    spacing: f64,
    fov: FieldOfView,
    bounds: BoundingBox,
    lookup: HashMap<(i64, i64), usize>,
}

fn grid_key(p: Point) -> (i64, i64) {
    ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64)
}

impl TrapArray {
    /// Validates and builds an array with the default field of view.
    pub fn new(traps: Vec<Point>, links: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_field_of_view(traps, links, FieldOfView::default())
    }

    pub fn with_field_of_view(
        traps: Vec<Point>,
        links: Vec<(usize, usize)>,
        fov: FieldOfView,
    ) -> Result<Self> {
        let n = traps.len();
        if n == 0 {
            return Err(Error::validation("trap array is empty"));
        }
        if traps.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::validation("trap position is not finite"));
        }
        if !(fov.width > 0.0 && fov.height > 0.0) {
            return Err(Error::validation("field of view must be positive"));
        }

        let mut min_dist = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d = traps[i].distance(traps[j]);
                if d < MIN_TRAP_DISTANCE * (1.0 - 1e-9) {
                    return Err(Error::Geometry(format!(
                        "traps {i} and {j} are {d:.3} um apart, minimum is {MIN_TRAP_DISTANCE} um"
                    )));
                }
                min_dist = min_dist.min(d);
            }
        }

        let mut normalized = Vec::with_capacity(links.len());
        for &(a, b) in &links {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::InvalidIndex { index: idx, len: n });
                }
            }
            if a == b {
                return Err(Error::validation(format!("link ({a}, {b}) is a self-loop")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!(
                "duplicate link ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &normalized {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let spacing = normalized
            .iter()
            .map(|&(a, b)| traps[a].distance(traps[b]))
            .reduce(f64::min)
            .unwrap_or(if n > 1 { min_dist } else { MIN_TRAP_DISTANCE });

        let bounds = BoundingBox::of(traps.iter().copied()).expect("non-empty");
        if bounds.width() > fov.width || bounds.height() > fov.height {
            return Err(Error::Geometry(format!(
                "array spans {:.1} x {:.1} um, field of view is {:.1} x {:.1} um",
                bounds.width(),
                bounds.height(),
                fov.width,
                fov.height
            )));
        }

        let lookup = traps
            .iter()
            .enumerate()
            .map(|(i, &p)| (grid_key(p), i))
            .collect();
        Ok(TrapArray {
            traps,
            links: normalized,
            neighbors,
            spacing,
            fov,
            bounds,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.traps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traps.is_empty()
    }

    pub fn traps(&self) -> &[Point] {
        &self.traps
    }

    /// Links as `(low, high)` index pairs, sorted.
    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// Sorted neighbor list of trap `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_linked(&self, a: usize, b: usize) -> bool {
        a < self.len() && self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Nominal nearest-neighbor distance in um.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn field_of_view(&self) -> FieldOfView {
        self.fov
    }

    pub fn bounds(&self) -> BoundingBox {
        self.bounds
    }

    pub fn position(&self, i: usize) -> Result<Point> {
        self.traps.get(i).copied().ok_or(Error::InvalidIndex {
            index: i,
            len: self.len(),
        })
    }

    /// Whether `p` lies inside the field of view centered on the array.
    pub fn in_field_of_view(&self, p: Point) -> bool {
        let c = self.bounds.center();
        let eps = 1e-9;
        (p.x - c.x).abs() <= self.fov.width / 2.0 + eps
            && (p.y - c.y).abs() <= self.fov.height / 2.0 + eps
    }

    /// Index of the trap sitting at `p`, if any, within `tol` um.
    pub fn trap_at(&self, p: Point, tol: f64) -> Option<usize> {
        match self.lookup.get(&grid_key(p)) {
            Some(&i) if self.traps[i].distance(p) <= tol => Some(i),
            _ => self.traps.iter().position(|&q| q.distance(p) <= tol),
        }
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidIndex {
                index: i,
                len: self.len(),
            })
        }
    }

    /// Connected components of the link graph, as a label per trap.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(u) = stack.pop() {
                for &v in &self.neighbors[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Straight-line distance between traps `i` and `j` in um.
pub fn euclidean_distance(array: &TrapArray, i: usize, j: usize) -> Result<f64> {
    Ok(array.position(i)?.distance(array.position(j)?))
}

/// Sites of a [`TrapArray`] that must end up filled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetPattern {
    indices: Vec<usize>,
}

impl TargetPattern {
    /// Sorts and validates `indices` against `array`.
    pub fn new(array: &TrapArray, mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::validation("target pattern is empty"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("target pattern has duplicate indices"));
        }
        for &i in &indices {
            array.check_index(i)?;
        }
        Ok(TargetPattern { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Per-trap membership mask.
    pub fn mask(&self, n_traps: usize) -> Vec<bool> {
        let mut mask = vec![false; n_traps];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }
}

/// Which traps hold exactly one atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Occupancy {
    filled: Vec<bool>,
}

impl Occupancy {
    pub fn empty(n_traps: usize) -> Self {
        Occupancy {
            filled: vec![false; n_traps],
        }
    }

    pub fn full(n_traps: usize) -> Self {
        Occupancy {
            filled: vec![true; n_traps],
        }
    }

    pub fn from_mask(filled: Vec<bool>) -> Self {
        Occupancy { filled }
    }

    pub fn from_indices(n_traps: usize, indices: &[usize]) -> Result<Self> {
        let mut occ = Occupancy::empty(n_traps);
        for &i in indices {
            if i >= n_traps {
                return Err(Error::InvalidIndex {
                    index: i,
                    len: n_traps,
                });
            }
            if occ.filled[i] {
                return Err(Error::validation(format!(
                    "trap {i} listed twice in occupancy"
                )));
            }
            occ.filled[i] = true;
        }
        Ok(occ)
    }

    /// Occupancy equal to the target pattern.
    pub fn from_pattern(n_traps: usize, pattern: &TargetPattern) -> Self {
        Occupancy {
            filled: pattern.mask(n_traps),
        }
    }

    pub fn len(&self) -> usize {
        self.filled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filled.is_empty()
    }

    pub fn is_filled(&self, i: usize) -> bool {
        self.filled[i]
    }

    pub fn set(&mut self, i: usize, filled: bool) {
        self.filled[i] = filled;
    }

    pub fn atom_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }

    pub fn filled_indices(&self) -> Vec<usize> {
        self.iter_filled().collect()
    }

    pub fn iter_filled(&self) -> impl Iterator<Item = usize> + '_ {
        self.filled
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| i)
    }

    pub fn as_mask(&self) -> &[bool] {
        &self.filled
    }

    /// Number of pattern sites that hold an atom.
    pub fn count_filled_in(&self, pattern: &TargetPattern) -> usize {
        pattern
            .indices()
            .iter()
            .filter(|&&i| self.filled[i])
            .count()
    }

    /// True when exactly the pattern sites are filled.
    pub fn matches_exactly(&self, pattern: &TargetPattern) -> bool {
        self.atom_count() == pattern.len() && self.count_filled_in(pattern) == pattern.len()
    }

    /// JSON array of filled trap indices.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.filled_indices()).expect("indices serialize")
    }

    pub fn from_json(json: &str, n_traps: usize) -> Result<Self> {
        let indices: Vec<usize> = serde_json::from_str(json)?;
        Occupancy::from_indices(n_traps, &indices)
    }
}

/// On-disk geometry document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub traps: Vec<Point>,
    pub links: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<usize>>,
}

impl GeometryFile {
    pub fn from_array(array: &TrapArray, target: Option<&TargetPattern>) -> Self {
        GeometryFile {
            traps: array.traps().to_vec(),
            links: array.links().iter().map(|&(a, b)| [a, b]).collect(),
            target: target.map(|t| t.indices().to_vec()),
        }
    }

    /// Validates every invariant and returns the array and optional target.
    pub fn into_parts(self) -> Result<(TrapArray, Option<TargetPattern>)> {
        let links = self.links.iter().map(|&[a, b]| (a, b)).collect();
        let array = TrapArray::new(self.traps, links)?;
        let target = self
            .target
            .map(|t| TargetPattern::new(&array, t))
            .transpose()?;
        Ok((array, target))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
