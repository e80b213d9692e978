use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::successors::successors_2d;
use super::{ddim_successors, BlockingPath, Branching, StepKind};
use crate::error::{param, Result};
use crate::lattice::TorusGrid;

/// Inclusive coordinate box in unwrapped coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Region {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(param("region", "corner dimensions differ"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(param("region", format!("empty box {lo:?}..={hi:?}")));
        }
        Ok(Region { lo, hi })
    }

    /// The fundamental domain `[0, m)` of a grid.
    pub fn whole(grid: &TorusGrid) -> Self {
        Region {
            lo: vec![0; grid.ndim()],
            hi: grid.dims().iter().map(|&m| m as i64 - 1).collect(),
        }
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.lo.len()).map(|a| self.extent(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, z: &[i64]) -> bool {
        z.len() == self.lo.len() && z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (l, h))| l <= c && c <= h)
    }

    /// Row-major key with coordinate 0 fastest; `None` outside the box.
    pub fn key(&self, z: &[i64]) -> Option<usize> {
        if !self.contains(z) {
            return None;
        }
        let mut key = 0;
        for a in (0..z.len()).rev() {
            key = key * self.extent(a) + (z[a] - self.lo[a]) as usize;
        }
        Some(key)
    }

    pub fn site(&self, mut key: usize) -> Vec<i64> {
        (0..self.lo.len())
            .map(|a| {
                let e = self.extent(a);
                let c = self.lo[a] + (key % e) as i64;
                key /= e;
                c
            })
            .collect()
    }
}

const UNSEEN: u32 = u32::MAX;

struct Bfs {
    parent: Vec<u32>,
    kind: Vec<Option<StepKind>>,
}

/// Level-synchronous breadth-first search over blocking steps inside
/// `region`. Frontiers are visited in key order so that parents, and hence
/// the returned shortest path, are reproducible. Stops after the first level
/// for which `stop` returns true on some discovered key, returning the
/// smallest such key.
fn bfs<F>(grid: &TorusGrid, start: usize, region: &Region, mode: Branching<'_>, stop: F) -> (Bfs, Option<usize>)
where
    F: Fn(usize) -> bool,
{
    let n = region.len();
    let mut state = Bfs {
        parent: vec![UNSEEN; n],
        kind: vec![None; n],
    };
    state.parent[start] = start as u32;
    if stop(start) {
        return (state, Some(start));
    }
    let mut frontier = vec![start];
    let mut next = Vec::new();
    let mut buf2 = Vec::with_capacity(2);
    while !frontier.is_empty() {
        next.clear();
        let mut hit: Option<usize> = None;
        for &v in &frontier {
            let z = region.site(v);
            if !grid.get(&z).is_car() {
                continue;
            }
            let mut visit = |s: &[i64], k: StepKind, next: &mut Vec<usize>| {
                if let Some(w) = region.key(s) {
                    if state.parent[w] == UNSEEN {
                        state.parent[w] = v as u32;
                        state.kind[w] = Some(k);
                        next.push(w);
                        if stop(w) {
                            hit = Some(hit.map_or(w, |h| h.min(w)));
                        }
                    }
                }
            };
            if grid.ndim() == 2 {
                successors_2d(grid, [z[0], z[1]], mode, &mut buf2);
                for &(s, k) in &buf2 {
                    visit(&s, k, &mut next);
                }
            } else {
                for (s, k) in ddim_successors(grid, &z, mode).expect("car site") {
                    visit(&s, k, &mut next);
                }
            }
        }
        if hit.is_some() {
            return (state, hit);
        }
        next.sort_unstable();
        std::mem::swap(&mut frontier, &mut next);
    }
    (state, None)
}

fn rebuild(state: &Bfs, region: &Region, end: usize) -> BlockingPath {
    let mut keys = vec![end];
    let mut kinds = Vec::new();
    let mut cur = end;
    while state.parent[cur] as usize != cur {
        kinds.push(state.kind[cur].unwrap());
        cur = state.parent[cur] as usize;
        keys.push(cur);
    }
    keys.reverse();
    kinds.reverse();
    BlockingPath {
        sites: keys.into_iter().map(|k| region.site(k)).collect(),
        kinds,
        cyclic: false,
    }
}

/// A shortest blocking path from `from` to any of `targets`, searching only
/// inside `region`. Paths pass through car sites; the final site may be
/// empty. Among shortest paths the one ending at the smallest region key
/// wins. `None` if `from` is empty, outside the region, or nothing is
/// reachable.
pub fn reachable(
    grid: &TorusGrid,
    from: &[i64],
    targets: &[Vec<i64>],
    region: &Region,
    mode: Branching<'_>,
) -> Option<BlockingPath> {
    if from.len() != grid.ndim() || !grid.get(from).is_car() {
        return None;
    }
    let start = region.key(from)?;
    let wanted: HashSet<usize> = targets.iter().filter_map(|t| region.key(t)).collect();
    if wanted.is_empty() {
        return None;
    }
    let (state, hit) = bfs(grid, start, region, mode, |k| wanted.contains(&k));
    hit.map(|end| rebuild(&state, region, end))
}

/// Every site inside `region` at which some blocking path from `from` ends,
/// including `from` itself when it holds a car.
pub fn reach_set(grid: &TorusGrid, from: &[i64], region: &Region, mode: Branching<'_>) -> Vec<Vec<i64>> {
    if from.len() != grid.ndim() || !grid.get(from).is_car() {
        return Vec::new();
    }
    let Some(start) = region.key(from) else {
        return Vec::new();
    };
    let (state, _) = bfs(grid, start, region, mode, |_| false);
    (0..region.len())
        .filter(|&k| state.parent[k] != UNSEEN)
        .map(|k| region.site(k))
        .collect()
}
