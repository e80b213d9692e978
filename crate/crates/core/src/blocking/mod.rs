//! Blocking paths.
//!
//! A blocking path is a sequence of sites in which the car at each site can
//! only move strictly after the car at the next site has moved. In two
//! dimensions there are four ways to take a step:
//!
//! * `I`:   an East car, step `(1,0)`;
//! * `II`:  a North car, step `(0,1)`;
//! * `III`: East cars at `z` and `z+(1,0)` with a North car at `z+(1,-1)`,
//!   step `(1,1)`;
//! * `IV`:  North cars at `z` and `z+(0,1)` with an East car at `z+(-1,1)`,
//!   step `(1,1)`.
//!
//! The `d`-dimensional kinds generalise these: `DForward` is the straight
//! step and `DDiag(c)` steps to `z + e_a + e_c` when the car facing `c`
//! wins the race for the vacancy in front of `z`.

mod cyclic;
mod greedy;
mod search;
mod successors;
mod wchain;

use serde::{Deserialize, Serialize};

use crate::error::{BmlError, Result};
use crate::lattice::{SiteState, TorusGrid};
use crate::rng::splitmix64;

pub use cyclic::{find_cyclic, find_cyclic_with};
pub use greedy::{greedy_construct, w_trace_from_sites, ChoiceMode, GreedyFailure, GreedyPath, WTrace};
pub use search::{reachable, reach_set, Region};
pub use successors::{ddim_successors, race_winner, successors};
pub use wchain::{
    tail_curve, tail_estimate, transition_probability, wchain_final_histogram, wchain_simulate,
    wchain_stationary, Stationary, TailEstimate,
};

/// A 2-d lattice site in unwrapped coordinates.
pub type Site = [i64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StepKind {
    I,
    II,
    III,
    IV,
    DForward,
    DDiag(u8),
}

impl StepKind {
    pub fn label(self) -> String {
        match self {
            StepKind::I => "i".into(),
            StepKind::II => "ii".into(),
            StepKind::III => "iii".into(),
            StepKind::IV => "iv".into(),
            StepKind::DForward => "Df".into(),
            StepKind::DDiag(c) => format!("Dc{c}"),
        }
    }

    pub fn from_label(s: &str) -> Option<StepKind> {
        Some(match s {
            "i" => StepKind::I,
            "ii" => StepKind::II,
            "iii" => StepKind::III,
            "iv" => StepKind::IV,
            "Df" => StepKind::DForward,
            _ => StepKind::DDiag(s.strip_prefix("Dc")?.parse().ok()?),
        })
    }
}

/// Which diagonal branches a successor query may offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching<'a> {
    Full,
    Coins(&'a CoinField),
}

/// Independent fair coins attached to branch locations (the contested site
/// in front of the branching car). A coin's value is a fixed function of the
/// location, so repeated queries agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinField {
    AllTrue,
    AllFalse,
    Random { seed: u64 },
}

impl CoinField {
    pub fn allows(&self, location: usize) -> bool {
        match *self {
            CoinField::AllTrue => true,
            CoinField::AllFalse => false,
            CoinField::Random { seed } => {
                splitmix64(seed ^ splitmix64(location as u64)) & 1 == 1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockingPath {
    pub sites: Vec<Vec<i64>>,
    /// One kind per step. A cyclic path has as many steps as sites, the last
    /// step leading from the final site back to the first (modulo the torus).
    pub kinds: Vec<StepKind>,
    pub cyclic: bool,
}

impl BlockingPath {
    pub fn single(site: &[i64]) -> Self {
        BlockingPath {
            sites: vec![site.to_vec()],
            kinds: Vec::new(),
            cyclic: false,
        }
    }

    pub fn steps(&self) -> usize {
        self.kinds.len()
    }

    /// The `(from, to, kind)` triples of every step, including the closing
    /// step of a cyclic path.
    pub fn step_triples(&self) -> impl Iterator<Item = (&[i64], &[i64], StepKind)> + '_ {
        let n = self.sites.len();
        self.kinds.iter().enumerate().map(move |(m, &k)| {
            let to = if m + 1 < n {
                &self.sites[m + 1]
            } else {
                &self.sites[0]
            };
            (self.sites[m].as_slice(), to.as_slice(), k)
        })
    }

    /// Join two paths where `self` ends at the site `next` starts from.
    pub fn concat(&self, next: &BlockingPath) -> Result<BlockingPath> {
        if self.cyclic || next.cyclic {
            return Err(BmlError::Precondition("cannot concatenate cyclic paths".into()));
        }
        if self.sites.last() != next.sites.first() {
            return Err(BmlError::Precondition("paths do not share an endpoint".into()));
        }
        let mut out = self.clone();
        out.sites.extend(next.sites.iter().skip(1).cloned());
        out.kinds.extend(&next.kinds);
        Ok(out)
    }

    /// Total displacement along each axis.
    pub fn displacement(&self, grid: &TorusGrid) -> Vec<i64> {
        let mut total = vec![0i64; grid.ndim()];
        for (from, to, kind) in self.step_triples() {
            if let Some(delta) = step_delta(grid, from, kind) {
                for (t, d) in total.iter_mut().zip(delta) {
                    *t += d;
                }
            } else {
                // unlicensed step; fall back to the raw coordinate difference
                for (a, t) in total.iter_mut().enumerate() {
                    *t += to[a] - from[a];
                }
            }
        }
        total
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PathJson::from(self)).expect("path serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<BlockingPath> {
        let raw: PathJson = serde_json::from_value(v.clone())
            .map_err(|e| BmlError::Precondition(format!("bad path JSON: {e}")))?;
        let kinds = raw
            .kinds
            .iter()
            .map(|l| {
                StepKind::from_label(l)
                    .ok_or_else(|| BmlError::Precondition(format!("unknown step kind `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockingPath {
            sites: raw.sites,
            kinds,
            cyclic: raw.cyclic,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PathJson {
    sites: Vec<Vec<i64>>,
    kinds: Vec<String>,
    cyclic: bool,
}

impl From<&BlockingPath> for PathJson {
    fn from(p: &BlockingPath) -> Self {
        PathJson {
            sites: p.sites.clone(),
            kinds: p.kinds.iter().map(|k| k.label()).collect(),
            cyclic: p.cyclic,
        }
    }
}

fn offset(z: &[i64], delta: &[i64]) -> Vec<i64> {
    z.iter().zip(delta).map(|(a, b)| a + b).collect()
}

fn unit(d: usize, axis: usize) -> Vec<i64> {
    let mut e = vec![0; d];
    e[axis] = 1;
    e
}

/// Displacement of a step of `kind` taken from `z`, if the configuration
/// licenses it.
pub fn step_delta(grid: &TorusGrid, z: &[i64], kind: StepKind) -> Option<Vec<i64>> {
    let d = grid.ndim();
    let here = grid.get(z);
    let SiteState::Car(dir) = here else {
        return None;
    };
    let a = dir.axis();
    match kind {
        StepKind::I | StepKind::II | StepKind::III | StepKind::IV if d != 2 => None,
        StepKind::I => (here == SiteState::EAST).then(|| vec![1, 0]),
        StepKind::II => (here == SiteState::NORTH).then(|| vec![0, 1]),
        StepKind::III => (here == SiteState::EAST
            && grid.at(z[0] + 1, z[1]) == SiteState::EAST
            && grid.at(z[0] + 1, z[1] - 1) == SiteState::NORTH)
            .then(|| vec![1, 1]),
        StepKind::IV => (here == SiteState::NORTH
            && grid.at(z[0], z[1] + 1) == SiteState::NORTH
            && grid.at(z[0] - 1, z[1] + 1) == SiteState::EAST)
            .then(|| vec![1, 1]),
        StepKind::DForward => Some(unit(d, a)),
        StepKind::DDiag(c) => {
            let c = c as usize;
            (c < d && c != a && race_winner(grid, z) == Some(c)).then(|| {
                let mut e = unit(d, a);
                e[c] += 1;
                e
            })
        }
    }
}

/// Whether the configuration licenses stepping from `from` to `to` (compared
/// modulo the torus) with `kind`.
pub fn step_is_licensed(grid: &TorusGrid, from: &[i64], to: &[i64], kind: StepKind) -> bool {
    if from.len() != grid.ndim() || to.len() != grid.ndim() {
        return false;
    }
    step_delta(grid, from, kind).is_some_and(|delta| grid.index(&offset(from, &delta)) == grid.index(to))
}

/// True iff every step of `path` is licensed by `grid`. A cyclic path must in
/// addition advance along both axes overall (it uses at least one step with a
/// horizontal and one with a vertical component).
pub fn validate_path(grid: &TorusGrid, path: &BlockingPath) -> bool {
    if path.sites.is_empty() {
        return false;
    }
    let expected_steps = if path.cyclic {
        path.sites.len()
    } else {
        path.sites.len() - 1
    };
    if path.kinds.len() != expected_steps {
        return false;
    }
    if !path
        .step_triples()
        .all(|(from, to, kind)| step_is_licensed(grid, from, to, kind))
    {
        return false;
    }
    if path.cyclic {
        let disp = path.displacement(grid);
        return disp.iter().filter(|&&x| x > 0).count() >= 2;
    }
    true
}
