//! Greedy move planning.
//!
//! Every (filled non-target trap, empty target trap) pair is listed, sorted
//! by straight-line length, and accepted shortest first while both ends are
//! still free. Atoms already on target sites stay put. In type-2 mode each
//! accepted move follows the link graph, and a filled trap `O` on the way from
//! `S` to `T` turns the move into `O -> T` followed by `S -> O`, applied
//! recursively against the occupancy as it evolves. Surplus atoms are then
//! carried out of the array.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Occupancy, PathFinder, Point, TargetPattern, TrapArray};

/// Elementary move kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveType {
    /// Straight line between traps, passing between rows.
    Type1,
    /// Along the links of the array, never over a filled trap.
    Type2,
    /// Straight line from a trap to a release point outside the array.
    Disposal,
}

/// Which move type the planner uses for filling targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveMode {
    Type1,
    Type2,
}

impl std::str::FromStr for MoveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" => Ok(MoveMode::Type1),
            "type2" => Ok(MoveMode::Type2),
            _ => Err(Error::validation(format!("unknown move mode '{s}'"))),
        }
    }
}

/// One single-atom move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MoveRecord", into = "MoveRecord")]
pub struct Move {
    pub source: usize,
    /// Destination trap; `None` for disposals.
    pub target: Option<usize>,
    pub kind: MoveType,
    /// Waypoints in um, starting at the source trap.
    pub path: Vec<Point>,
    /// Sum of segment lengths, um.
    pub path_length: f64,
}

impl Move {
    pub fn new(source: usize, target: Option<usize>, kind: MoveType, path: Vec<Point>) -> Self {
        let path_length = polyline_length(&path);
        Move {
            source,
            target,
            kind,
            path,
            path_length,
        }
    }

    pub fn start(&self) -> Point {
        self.path[0]
    }

    pub fn end(&self) -> Point {
        *self.path.last().expect("path has at least one point")
    }

    pub fn is_disposal(&self) -> bool {
        self.kind == MoveType::Disposal
    }
}

pub fn polyline_length(path: &[Point]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveRecord {
    source: Option<usize>,
    target: Option<usize>,
    #[serde(rename = "type")]
    kind: MoveType,
    path: Vec<Point>,
}

impl TryFrom<MoveRecord> for Move {
    type Error = String;

    fn try_from(r: MoveRecord) -> std::result::Result<Self, String> {
        let source = r.source.ok_or("move has no source trap")?;
        if r.path.len() < 2 {
            return Err(format!(
                "move from trap {source} has fewer than two waypoints"
            ));
        }
        match (r.kind, r.target) {
            (MoveType::Disposal, Some(_)) => return Err("disposal move with a target trap".into()),
            (MoveType::Type1 | MoveType::Type2, None) => {
                return Err(format!("move from trap {source} has no target trap"))
            }
            _ => {}
        }
        Ok(Move::new(source, r.target, r.kind, r.path))
    }
}

impl From<Move> for MoveRecord {
    fn from(m: Move) -> Self {
        MoveRecord {
            source: Some(m.source),
            target: m.target,
            kind: m.kind,
            path: m.path,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStats {
    pub n_moves: usize,
    pub n_fill_moves: usize,
    pub n_disposals: usize,
    pub n_obstacle_substitutions: usize,
    pub total_path_length: f64,
}

/// Ordered list of moves with summary statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovePlan {
    pub moves: Vec<Move>,
    pub stats: PlanStats,
}

impl MovePlan {
    pub fn from_moves(moves: Vec<Move>, n_obstacle_substitutions: usize) -> Self {
        let n_disposals = moves.iter().filter(|m| m.is_disposal()).count();
        let stats = PlanStats {
            n_moves: moves.len(),
            n_fill_moves: moves.len() - n_disposals,
            n_disposals,
            n_obstacle_substitutions,
            total_path_length: moves.iter().map(|m| m.path_length).sum(),
        };
        MovePlan { moves, stats }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerOptions {
    pub mode: MoveMode,
    /// Type-1 moves are refused below this spacing, um.
    pub type1_min_spacing: f64,
    /// Release points sit this far outside the array bounding box, um.
    pub disposal_margin: f64,
    /// When false (repair mode) surplus atoms are left in place.
    pub dispose_surplus: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            mode: MoveMode::Type2,
            type1_min_spacing: 5.0,
            disposal_margin: 20.0,
            dispose_surplus: true,
        }
    }
}

impl PlannerOptions {
    pub fn with_mode(mode: MoveMode) -> Self {
        PlannerOptions {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.type1_min_spacing >= 0.0 && self.type1_min_spacing.is_finite()) {
            return Err(Error::validation("type1_min_spacing must be >= 0"));
        }
        if !(self.disposal_margin > 0.0 && self.disposal_margin.is_finite()) {
            return Err(Error::validation("disposal_margin must be positive"));
        }
        Ok(())
    }
}

fn check_sizes(array: &TrapArray, occupancy: &Occupancy) -> Result<()> {
    if occupancy.len() != array.len() {
        return Err(Error::validation(format!(
            "occupancy has {} entries for {} traps",
            occupancy.len(),
            array.len()
        )));
    }
    Ok(())
}

/// Greedy shortest-first assignment of sources to empty target sites.
fn greedy_assignment(
    array: &TrapArray,
    occupancy: &Occupancy,
    pattern: &TargetPattern,
) -> Vec<(usize, usize)> {
    let in_target = pattern.mask(array.len());
    let sources: Vec<usize> = occupancy.iter_filled().filter(|&i| !in_target[i]).collect();
    let holes: Vec<usize> = pattern
        .indices()
        .iter()
        .copied()
        .filter(|&t| !occupancy.is_filled(t))
        .collect();

    let traps = array.traps();
    let mut pairs = Vec::with_capacity(sources.len() * holes.len());
    for &s in &sources {
        for &t in &holes {
            // Quantized so that geometrically equal lengths tie exactly.
            let len = (traps[s].distance(traps[t]) * 1e9).round() as i64;
            pairs.push((len, s, t));
        }
    }
    pairs.sort_unstable();

    let mut source_used = vec![false; array.len()];
    let mut target_used = vec![false; array.len()];
    let mut accepted = Vec::with_capacity(holes.len());
    for (_, s, t) in pairs {
        if accepted.len() == holes.len() {
            break;
        }
        if !source_used[s] && !target_used[t] {
            source_used[s] = true;
            target_used[t] = true;
            accepted.push((s, t));
        }
    }
    accepted
}

fn link_move(array: &TrapArray, nodes: &[usize]) -> Move {
    let path = nodes.iter().map(|&i| array.traps()[i]).collect();
    Move::new(
        nodes[0],
        Some(*nodes.last().expect("non-empty")),
        MoveType::Type2,
        path,
    )
}

/// Recursively replaces `S -> T` by `O -> T`, `S -> O` while a filled trap
/// `O` (the one closest to `T`) lies on the link path. Applies the emitted
/// moves to `occupancy`.
fn resolve_into(
    finder: &mut PathFinder<'_>,
    occupancy: &mut Occupancy,
    source: usize,
    target: usize,
    out: &mut Vec<Move>,
    substitutions: &mut usize,
) -> Result<()> {
    let path = finder.path_avoiding(source, target, occupancy.as_mask())?;
    let obstacle = path[1..path.len() - 1]
        .iter()
        .rev()
        .copied()
        .find(|&i| occupancy.is_filled(i));
    match obstacle {
        Some(o) => {
            *substitutions += 1;
            resolve_into(finder, occupancy, o, target, out, substitutions)?;
            resolve_into(finder, occupancy, source, o, out, substitutions)
        }
        None => {
            out.push(link_move(finder.array(), &path));
            occupancy.set(source, false);
            occupancy.set(target, true);
            Ok(())
        }
    }
}

/// Type-2 moves realizing `source -> target` without passing over filled
/// traps. On return only `source` and `target` have changed state.
pub fn resolve_obstacles(
    array: &TrapArray,
    occupancy: &Occupancy,
    source: usize,
    target: usize,
) -> Result<Vec<Move>> {
    check_sizes(array, occupancy)?;
    array.check_index(source)?;
    array.check_index(target)?;
    if !occupancy.is_filled(source) || occupancy.is_filled(target) {
        return Err(Error::validation(format!(
            "move {source} -> {target} needs a filled source and an empty target"
        )));
    }
    let mut occ = occupancy.clone();
    let mut moves = Vec::new();
    let mut subs = 0;
    resolve_into(
        &mut PathFinder::new(array),
        &mut occ,
        source,
        target,
        &mut moves,
        &mut subs,
    )?;
    Ok(moves)
}

/// Release point for a surplus atom: straight out through the nearest side
/// of the bounding box, `margin` beyond it.
fn release_point(array: &TrapArray, from: Point, margin: f64) -> Point {
    let bb = array.bounds();
    let sides = [
        (from.x - bb.min.x, Point::new(bb.min.x - margin, from.y)),
        (bb.max.x - from.x, Point::new(bb.max.x + margin, from.y)),
        (from.y - bb.min.y, Point::new(from.x, bb.min.y - margin)),
        (bb.max.y - from.y, Point::new(from.x, bb.max.y + margin)),
    ];
    sides
        .into_iter()
        .reduce(|best, side| if side.0 < best.0 { side } else { best })
        .expect("four sides")
        .1
}

/// One disposal move per atom outside the pattern, in trap order.
pub fn plan_disposals(
    array: &TrapArray,
    occupancy: &Occupancy,
    pattern: &TargetPattern,
    margin: f64,
) -> Result<Vec<Move>> {
    check_sizes(array, occupancy)?;
    if occupancy.count_filled_in(pattern) != pattern.len() {
        return Err(Error::validation(
            "disposal planned before all target sites are filled",
        ));
    }
    let in_target = pattern.mask(array.len());
    occupancy
        .iter_filled()
        .filter(|&i| !in_target[i])
        .map(|i| {
            let from = array.traps()[i];
            let to = release_point(array, from, margin);
            if !array.in_field_of_view(to) {
                return Err(Error::FieldOfView { x: to.x, y: to.y });
            }
            Ok(Move::new(i, None, MoveType::Disposal, vec![from, to]))
        })
        .collect()
}

/// Plans the rearrangement of `initial` into `pattern`.
pub fn plan(
    array: &TrapArray,
    initial: &Occupancy,
    pattern: &TargetPattern,
    options: &PlannerOptions,
) -> Result<MovePlan> {
    options.validate()?;
    check_sizes(array, initial)?;
    if let Some(&bad) = pattern.indices().iter().find(|&&i| i >= array.len()) {
        return Err(Error::InvalidIndex {
            index: bad,
            len: array.len(),
        });
    }
    let available = initial.atom_count();
    if available < pattern.len() {
        return Err(Error::InsufficientAtoms {
            available,
            required: pattern.len(),
        });
    }
    if options.mode == MoveMode::Type1 && array.spacing() < options.type1_min_spacing - 1e-9 {
        return Err(Error::Spacing {
            min: options.type1_min_spacing,
            actual: array.spacing(),
        });
    }

    let assignment = greedy_assignment(array, initial, pattern);

    let mut occupancy = initial.clone();
    let mut moves = Vec::new();
    let mut substitutions = 0;
    match options.mode {
        MoveMode::Type1 => {
            for &(s, t) in &assignment {
                let path = vec![array.traps()[s], array.traps()[t]];
                moves.push(Move::new(s, Some(t), MoveType::Type1, path));
                occupancy.set(s, false);
                occupancy.set(t, true);
            }
        }
        MoveMode::Type2 => {
            let components = array.components();
            let mut finder = PathFinder::new(array);
            for &(s, t) in &assignment {
                if components[s] != components[t] {
                    return Err(Error::NoPath {
                        source_trap: s,
                        target_trap: t,
                    });
                }
            }
            for &(s, t) in &assignment {
                resolve_into(
                    &mut finder,
                    &mut occupancy,
                    s,
                    t,
                    &mut moves,
                    &mut substitutions,
                )?;
            }
        }
    }

    if options.dispose_surplus {
        moves.extend(plan_disposals(
            array,
            &occupancy,
            pattern,
            options.disposal_margin,
        )?);
    }
    Ok(MovePlan::from_moves(moves, substitutions))
}

/// Fills the unfilled pattern sites of `observed` from the atoms outside the
/// pattern, leaving surplus atoms where they are.
pub fn repair_plan(
    array: &TrapArray,
    observed: &Occupancy,
    pattern: &TargetPattern,
    mode: MoveMode,
) -> Result<MovePlan> {
    check_sizes(array, observed)?;
    let defects = pattern.len() - observed.count_filled_in(pattern);
    let reserves = observed.atom_count() - observed.count_filled_in(pattern);
    if reserves < defects {
        return Err(Error::InsufficientAtoms {
            available: reserves,
            required: defects,
        });
    }
    let options = PlannerOptions {
        mode,
        dispose_surplus: false,
        ..Default::default()
    };
    plan(array, observed, pattern, &options)
}
