use std::collections::{HashMap, VecDeque};

use super::TrapArray;
use crate::error::{Error, Result};

const UNREACHED: u32 = u32::MAX;

/// Shortest paths on the link graph, caching one BFS distance field per
/// destination trap.
///
/// Among equal-length paths the lexicographically smallest index sequence is
/// returned: walking from the source, each step takes the lowest-index
/// neighbor that is one hop closer to the destination.
#[derive(Debug)]
pub struct PathFinder<'a> {
    array: &'a TrapArray,
    fields: HashMap<usize, Vec<u32>>,
}

impl<'a> PathFinder<'a> {
    pub fn new(array: &'a TrapArray) -> Self {
        PathFinder {
            array,
            fields: HashMap::new(),
        }
    }

    pub fn array(&self) -> &'a TrapArray {
        self.array
    }

    fn field(&mut self, target: usize) -> &[u32] {
        let array = self.array;
        self.fields.entry(target).or_insert_with(|| {
            let mut dist = vec![UNREACHED; array.len()];
            let mut queue = VecDeque::new();
            dist[target] = 0;
            queue.push_back(target);
            while let Some(u) = queue.pop_front() {
                for &v in array.neighbors(u) {
                    if dist[v] == UNREACHED {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
    }

    /// Hop count between two traps, or `None` if they are disconnected.
    pub fn hops(&mut self, source: usize, target: usize) -> Result<Option<usize>> {
        self.array.check_index(source)?;
        self.array.check_index(target)?;
        let d = self.field(target)[source];
        Ok((d != UNREACHED).then_some(d as usize))
    }

    /// Shortest link path from `source` to `target`, both endpoints included.
    pub fn path(&mut self, source: usize, target: usize) -> Result<Vec<usize>> {
        self.array.check_index(source)?;
        self.array.check_index(target)?;
        if source == target {
            return Err(Error::validation(format!(
                "link path needs distinct endpoints, got {source} twice"
            )));
        }
        let array = self.array;
        let dist = self.field(target);
        if dist[source] == UNREACHED {
            return Err(Error::NoPath {
                source_trap: source,
                target_trap: target,
            });
        }
        let mut path = Vec::with_capacity(dist[source] as usize + 1);
        let mut at = source;
        path.push(at);
        while at != target {
            // Neighbor lists are sorted, so the first match is the smallest index.
            at = *array
                .neighbors(at)
                .iter()
                .find(|&&v| dist[v] + 1 == dist[at])
                .expect("BFS field has a descending neighbor");
            path.push(at);
        }
        Ok(path)
    }
}

impl PathFinder<'_> {
    /// Among the shortest link paths from `source` to `target`, one that
    /// crosses the fewest traps marked in `blocked` (endpoints excluded).
    /// Remaining ties go to the lexicographically smallest sequence.
    pub fn path_avoiding(
        &mut self,
        source: usize,
        target: usize,
        blocked: &[bool],
    ) -> Result<Vec<usize>> {
        let mut path = self.path(source, target)?;
        let array = self.array;
        let dist = self.field(target).to_vec();
        let d0 = dist[source] as usize;
        // cost[v]: fewest blocked interior nodes from v to target, over the
        // nodes that lie on some shortest source -> target path.
        let mut cost = vec![u32::MAX; array.len()];
        let mut layer = vec![source];
        let mut layers = vec![layer.clone()];
        let mut seen = vec![false; array.len()];
        seen[source] = true;
        for _ in 0..d0 {
            let mut next = Vec::new();
            for &u in &layer {
                for &v in array.neighbors(u) {
                    if dist[v] + 1 == dist[u] && !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            layers.push(next.clone());
            layer = next;
        }
        cost[target] = 0;
        for l in layers.iter().rev().skip(1) {
            for &u in l {
                let best = array
                    .neighbors(u)
                    .iter()
                    .filter(|&&v| dist[v] + 1 == dist[u] && seen[v])
                    .map(|&v| cost[v])
                    .min()
                    .expect("on a shortest path");
                cost[u] = best + u32::from(u != source && blocked[u]);
            }
        }
        path.clear();
        let mut at = source;
        path.push(at);
        while at != target {
            let want = cost[at] - u32::from(at != source && blocked[at]);
            at = *array
                .neighbors(at)
                .iter()
                .find(|&&v| dist[v] + 1 == dist[at] && seen[v] && cost[v] == want)
                .expect("cost field has a descending neighbor");
            path.push(at);
        }
        Ok(path)
    }
}

/// Shortest path on the link graph from `source` to `target`.
pub fn link_path(array: &TrapArray, source: usize, target: usize) -> Result<Vec<usize>> {
    PathFinder::new(array).path(source, target)
}
