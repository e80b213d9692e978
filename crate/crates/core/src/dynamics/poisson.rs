//! Random-time dynamics: every car carries an independent unit-rate Poisson
//! clock and attempts to advance when it rings.
//!
//! The superposition of the clocks is a single Poisson process of rate equal
//! to the number of cars, and each ring belongs to a uniformly chosen car, so
//! we draw an exponential gap and then a car. A ring whose car is blocked is
//! recorded as a failed attempt.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{CarId, NO_CAR};
use crate::lattice::{TorusGrid, EMPTY};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonEvent {
    /// Waiting time since the previous event.
    pub dt: f64,
    pub car: CarId,
    pub from: usize,
    /// Destination if the attempt succeeded.
    pub to: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PoissonSim {
    grid: TorusGrid,
    ids: Vec<CarId>,
    position: Vec<usize>,
    clock: f64,
    events: u64,
    moves: u64,
    movable: usize,
    rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
}

impl PoissonSim {
    pub fn new(grid: TorusGrid, seed: RngSeed) -> Self {
        let mut ids = vec![NO_CAR; grid.len()];
        let mut position = Vec::new();
        for (i, &c) in grid.codes().iter().enumerate() {
            if c != EMPTY {
                ids[i] = position.len() as CarId;
                position.push(i);
            }
        }
        let gap = (!position.is_empty()).then(|| Exp::new(position.len() as f64).unwrap());
        let mut sim = PoissonSim {
            grid,
            ids,
            position,
            clock: 0.0,
            events: 0,
            moves: 0,
            movable: 0,
            rng: seed.rng(),
            gap,
        };
        sim.movable = (0..sim.grid.len()).filter(|&i| sim.can_move(i)).count();
        sim
    }

    #[inline]
    fn ahead(&self, site: usize) -> Option<usize> {
        match self.grid.codes()[site] {
            EMPTY => None,
            c => Some(self.grid.neighbor(site, (c - 1) as usize, true)),
        }
    }

    #[inline]
    fn can_move(&self, site: usize) -> bool {
        self.ahead(site)
            .is_some_and(|f| self.grid.codes()[f] == EMPTY)
    }

    /// Cells whose mobility can change when the car at `from` moves to `to`.
    fn affected(&self, from: usize, to: usize, out: &mut Vec<usize>) {
        out.clear();
        out.push(from);
        out.push(to);
        for axis in 0..self.grid.ndim() {
            out.push(self.grid.neighbor(from, axis, false));
            out.push(self.grid.neighbor(to, axis, false));
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Ring the next clock. `None` when there are no cars.
    pub fn step(&mut self) -> Option<PoissonEvent> {
        let gap = self.gap?;
        let dt = gap.sample(&mut self.rng);
        self.clock += dt;
        self.events += 1;
        let car = self.rng.random_range(0..self.position.len()) as CarId;
        let from = self.position[car as usize];
        let target = self.ahead(from).unwrap();
        if self.grid.codes()[target] != EMPTY {
            return Some(PoissonEvent {
                dt,
                car,
                from,
                to: None,
            });
        }
        let mut touched = Vec::with_capacity(2 + 2 * self.grid.ndim());
        self.affected(from, target, &mut touched);
        let before = touched.iter().filter(|&&i| self.can_move(i)).count();
        let cells = self.grid.codes_mut();
        cells[target] = cells[from];
        cells[from] = EMPTY;
        self.ids[target] = car;
        self.ids[from] = NO_CAR;
        self.position[car as usize] = target;
        let after = touched.iter().filter(|&&i| self.can_move(i)).count();
        self.movable = self.movable + after - before;
        self.moves += 1;
        Some(PoissonEvent {
            dt,
            car,
            from,
            to: Some(target),
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn moves(&self) -> u64 {
        self.moves
    }

    /// Number of cars with a vacancy directly ahead.
    pub fn movable(&self) -> usize {
        self.movable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonStats {
    pub cars: usize,
    pub events: u64,
    pub moves: u64,
    pub clock: f64,
    /// Event count at which the movable set became empty.
    pub frozen_at_event: Option<u64>,
}

/// Run the random-time dynamics for at most `max_events` clock rings,
/// halting as soon as no car can move (such a configuration never changes).
pub fn run_poisson(grid: TorusGrid, max_events: u64, seed: RngSeed) -> (TorusGrid, PoissonStats) {
    let mut sim = PoissonSim::new(grid, seed);
    let mut frozen_at_event = (sim.movable() == 0).then_some(0);
    while frozen_at_event.is_none() && sim.events() < max_events {
        sim.step();
        if sim.movable() == 0 {
            frozen_at_event = Some(sim.events());
        }
    }
    let stats = PoissonStats {
        cars: sim.position.len(),
        events: sim.events(),
        moves: sim.moves(),
        clock: sim.clock(),
        frozen_at_event,
    };
    (sim.grid, stats)
}
