//! Time evolution of configurations and the statistics recorded along the way.

mod engines;
mod poisson;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{BmlError, Result};
use crate::lattice::{TorusGrid, EMPTY};
use crate::par::Exec;

pub use engines::{active_axis, is_frozen, step_ddim, step_deterministic, DDimStepper};
pub use poisson::{run_poisson, PoissonEvent, PoissonSim, PoissonStats};

/// Stable identity of a car, assigned in storage order of the initially
/// occupied sites.
pub type CarId = u32;

const NO_CAR: CarId = CarId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Two-dimensional alternating East/North kernel.
    Deterministic,
    /// Generic kernel, direction `t mod d` moves at sub-step `t`.
    Ddim,
}

/// Per-car bookkeeping, kept only when a run is tracked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarLedger {
    /// Initial site of each car, sorted (car ids follow storage order).
    pub initial_site: Vec<usize>,
    pub move_counts: Vec<u64>,
    /// Sub-step of each car's first move; `None` means it never moved.
    pub first_move: Vec<Option<u64>>,
}

impl CarLedger {
    fn new(grid: &TorusGrid) -> (Self, Vec<CarId>) {
        let mut ids = vec![NO_CAR; grid.len()];
        let mut initial_site = Vec::new();
        for (i, &c) in grid.codes().iter().enumerate() {
            if c != EMPTY {
                ids[i] = initial_site.len() as CarId;
                initial_site.push(i);
            }
        }
        let n = initial_site.len();
        (
            CarLedger {
                initial_site,
                move_counts: vec![0; n],
                first_move: vec![None; n],
            },
            ids,
        )
    }

    pub fn car_at_initial_site(&self, site: usize) -> Option<CarId> {
        self.initial_site
            .binary_search(&site)
            .ok()
            .map(|i| i as CarId)
    }

    /// First move of the car initially at `site`: `None` if the site started
    /// empty, `Some(None)` if that car never moved.
    pub fn first_move_time(&self, site: usize) -> Option<Option<u64>> {
        self.car_at_initial_site(site)
            .map(|id| self.first_move[id as usize])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub d: usize,
    pub cars: usize,
    /// Entry `t - 1` holds the number of moves at sub-step `t`.
    pub moves_per_substep: Vec<u64>,
    /// Sub-step that completed the first run of `d` silent sub-steps.
    pub frozen_at: Option<u64>,
    pub cars_ledger: Option<CarLedger>,
}

impl SimStats {
    pub fn substeps(&self) -> u64 {
        self.moves_per_substep.len() as u64
    }

    pub fn total_moves(&self) -> u64 {
        self.moves_per_substep.iter().sum()
    }

    /// Moves per car per sub-step over the sub-steps in `window`
    /// (1-based, half open). Sub-steps after a freeze count as silent.
    pub fn speed(&self, window: Range<u64>) -> Result<f64> {
        if window.start == 0 || window.end <= window.start {
            return Err(BmlError::param(
                "window",
                format!("{window:?} is empty or starts before sub-step 1"),
            ));
        }
        if self.cars == 0 {
            return Err(BmlError::param("window", "no cars on the grid"));
        }
        let recorded = self.substeps();
        if window.end - 1 > recorded && self.frozen_at.is_none() {
            return Err(BmlError::param(
                "window",
                format!("{window:?} extends past the {recorded} recorded sub-steps"),
            ));
        }
        let lo = (window.start - 1).min(recorded) as usize;
        let hi = (window.end - 1).min(recorded) as usize;
        let moves: u64 = self.moves_per_substep[lo..hi].iter().sum();
        Ok(moves as f64 / (self.cars as f64 * (window.end - window.start) as f64))
    }

    /// Speed over the last `len` sub-steps of the nominal horizon.
    pub fn final_window_speed(&self, horizon: u64, len: u64) -> Result<f64> {
        let len = len.min(horizon);
        self.speed(horizon - len + 1..horizon + 1)
    }
}

/// Convenience wrapper around [`speed`](SimStats::speed).
pub fn speed(stats: &SimStats, window: Range<u64>) -> Result<f64> {
    stats.speed(window)
}

/// A configuration evolving under one of the synchronous engines.
#[derive(Debug, Clone)]
pub struct Simulation {
    grid: TorusGrid,
    engine: Engine,
    t: u64,
    silent: usize,
    stepper: DDimStepper,
    tracking: Option<(CarLedger, Vec<CarId>)>,
    movers: Vec<(usize, usize)>,
    stats: SimStats,
}

impl Simulation {
    pub fn new(grid: TorusGrid, engine: Engine) -> Result<Self> {
        if engine == Engine::Deterministic && grid.ndim() != 2 {
            return Err(BmlError::Unsupported(format!(
                "the deterministic engine is two-dimensional, grid has d={}",
                grid.ndim()
            )));
        }
        let stats = SimStats {
            d: grid.ndim(),
            cars: grid.car_count(),
            moves_per_substep: Vec::new(),
            frozen_at: None,
            cars_ledger: None,
        };
        Ok(Simulation {
            grid,
            engine,
            t: 0,
            silent: 0,
            stepper: DDimStepper::default(),
            tracking: None,
            movers: Vec::new(),
            stats,
        })
    }

    /// Record per-car move counts and first-move times.
    pub fn tracked(mut self) -> Self {
        assert_eq!(self.t, 0, "tracking must start at sub-step 0");
        self.tracking = Some(CarLedger::new(&self.grid));
        self
    }

    /// Parallelism used inside a single sub-step of the generic kernel.
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.stepper = DDimStepper::new(exec);
        self
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn substep(&self) -> u64 {
        self.t
    }

    pub fn frozen_at(&self) -> Option<u64> {
        self.stats.frozen_at
    }

    /// Advance one sub-step, returning the number of cars that moved.
    pub fn step(&mut self) -> u64 {
        self.t += 1;
        let t = self.t;
        let moves = match &mut self.tracking {
            Some((ledger, ids)) => {
                let axis = active_axis(t, self.grid.ndim());
                engines::collect_movers(&self.grid, axis, &mut self.movers);
                engines::apply_movers(&mut self.grid, axis, &self.movers);
                for &(from, to) in &self.movers {
                    let id = ids[from];
                    ids[to] = id;
                    ids[from] = NO_CAR;
                    ledger.move_counts[id as usize] += 1;
                    ledger.first_move[id as usize].get_or_insert(t);
                }
                self.movers.len() as u64
            }
            None => match self.engine {
                Engine::Deterministic => step_deterministic(&mut self.grid, t),
                Engine::Ddim => self.stepper.step(&mut self.grid, t),
            },
        };
        self.stats.moves_per_substep.push(moves);
        if moves == 0 {
            self.silent += 1;
            if self.silent == self.grid.ndim() && self.stats.frozen_at.is_none() {
                self.stats.frozen_at = Some(t);
            }
        } else {
            self.silent = 0;
        }
        moves
    }

    /// Step until `max_substeps` have elapsed or the configuration freezes.
    pub fn run(&mut self, max_substeps: u64) -> &SimStats {
        while self.t < max_substeps && self.stats.frozen_at.is_none() {
            self.step();
        }
        self.sync_ledger();
        &self.stats
    }

    fn sync_ledger(&mut self) {
        if let Some((ledger, _)) = &self.tracking {
            self.stats.cars_ledger = Some(ledger.clone());
        }
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn into_parts(mut self) -> (TorusGrid, SimStats) {
        self.sync_ledger();
        (self.grid, self.stats)
    }
}

/// Evolve `grid` in place for at most `max_substeps`, halting early once `d`
/// consecutive sub-steps are silent (the configuration is then constant).
pub fn run(grid: &mut TorusGrid, max_substeps: u64, engine: Engine) -> Result<SimStats> {
    if max_substeps == 0 {
        return Err(BmlError::param("max_substeps", "must be at least 1"));
    }
    let placeholder = TorusGrid::empty(&vec![1; grid.ndim()])?;
    let owned = std::mem::replace(grid, placeholder);
    let mut sim = Simulation::new(owned, engine)?;
    sim.run(max_substeps);
    let (g, stats) = sim.into_parts();
    *grid = g;
    Ok(stats)
}
