//! Synchronous update kernels.
//!
//! Sub-steps are numbered from 1 and sub-step `t` moves the cars facing
//! axis `t mod d`; in two dimensions odd sub-steps move North cars and even
//! sub-steps move East cars. Every kernel reads eligibility from the
//! configuration as it was before the sub-step.

use crate::lattice::{TorusGrid, EMPTY};
use crate::par::{chunked_sum, Exec};

/// Axis whose cars move at sub-step `t` on a `d`-dimensional torus.
#[inline]
pub fn active_axis(t: u64, d: usize) -> usize {
    (t % d as u64) as usize
}

/// New state of a cell given its rear neighbour, itself and its forward
/// neighbour along the active axis. Returns the state and whether a car
/// moved into the cell. Written branch-free so the row loops vectorize.
#[inline(always)]
fn advance(back: u8, cur: u8, fwd: u8, car: u8) -> (u8, u8) {
    let vacate = ((cur == car) & (fwd == EMPTY)) as u8;
    let fill = ((cur == EMPTY) & (back == car)) as u8;
    // `fill` implies `cur == EMPTY`, so the two terms never overlap
    let next = (cur & vacate.wrapping_sub(1)) | (car & fill.wrapping_neg());
    (next, fill)
}

/// Apply [`advance`] across aligned slices, returning the number of fills.
#[inline(always)]
fn advance_slices(back: &[u8], cur: &[u8], fwd: &[u8], out: &mut [u8], car: u8) -> u64 {
    let n = out.len();
    let (back, cur, fwd) = (&back[..n], &cur[..n], &fwd[..n]);
    let mut moves = 0u64;
    // u8 partial sums keep the inner loop in vector lanes
    for (((o, b), c), f) in out
        .chunks_mut(255)
        .zip(back.chunks(255))
        .zip(cur.chunks(255))
        .zip(fwd.chunks(255))
    {
        let mut acc = 0u8;
        for i in 0..o.len() {
            let (next, fill) = advance(b[i], c[i], f[i], car);
            o[i] = next;
            acc += fill;
        }
        moves += acc as u64;
    }
    moves
}

/// One sub-step of the two-dimensional model, updating rows in place.
///
/// # Panics
/// If the grid is not two-dimensional.
pub fn step_deterministic(grid: &mut TorusGrid, t: u64) -> u64 {
    assert_eq!(grid.ndim(), 2, "step_deterministic needs a 2-d torus");
    let (m, n) = (grid.dims()[0], grid.dims()[1]);
    let cells = grid.codes_mut();
    if t % 2 == 1 {
        north_substep(cells, m, n)
    } else {
        east_substep(cells, m)
    }
}

fn east_substep(cells: &mut [u8], m: usize) -> u64 {
    const CAR: u8 = 1;
    // padded copy of one row: [row[m-1], row[0..m], row[0]]
    let mut buf = vec![EMPTY; m + 2];
    let mut moves = 0u64;
    for row in cells.chunks_exact_mut(m) {
        buf[1..=m].copy_from_slice(row);
        buf[0] = row[m - 1];
        buf[m + 1] = row[0];
        moves += advance_slices(&buf[..m], &buf[1..=m], &buf[2..], row, CAR);
    }
    moves
}

fn north_substep(cells: &mut [u8], m: usize, n: usize) -> u64 {
    const CAR: u8 = 2;
    let first = cells[..m].to_vec();
    let mut prev = cells[(n - 1) * m..].to_vec();
    let mut cur = vec![EMPTY; m];
    let mut moves = 0u64;
    for y in 0..n {
        let (head, tail) = cells.split_at_mut((y + 1) * m);
        let row = &mut head[y * m..];
        cur.copy_from_slice(row);
        let fwd: &[u8] = if y + 1 < n { &tail[..m] } else { &first };
        moves += advance_slices(&prev, &cur, fwd, row, CAR);
        std::mem::swap(&mut prev, &mut cur);
    }
    moves
}

/// Double-buffered kernel for any dimension `d >= 2`.
#[derive(Debug, Default, Clone)]
pub struct DDimStepper {
    scratch: Vec<u8>,
    exec: Exec,
}

impl DDimStepper {
    pub fn new(exec: Exec) -> Self {
        DDimStepper {
            scratch: Vec::new(),
            exec,
        }
    }

    pub fn step(&mut self, grid: &mut TorusGrid, t: u64) -> u64 {
        let axis = active_axis(t, grid.ndim());
        let car = axis as u8 + 1;
        let m = grid.dims()[axis];
        let s = grid.stride(axis);
        let block = m * s;
        self.scratch.resize(grid.len(), EMPTY);
        let old = grid.codes();
        // Work unit: a whole line when the axis is contiguous, otherwise one
        // slab of `s` cells sharing a coordinate along the axis.
        let unit = if s == 1 { m } else { s };
        let chunk = unit * (8192 / unit).max(1);
        let moves = chunked_sum(self.exec, &mut self.scratch, chunk, |off, out| {
            let mut moves = 0u64;
            for (u, slab) in out.chunks_mut(unit).enumerate() {
                let base = off + u * unit;
                if s == 1 {
                    let line = &old[base..base + m];
                    let (first, last) = (line[0], line[m - 1]);
                    if m == 1 {
                        let (next, fill) = advance(first, first, first, car);
                        slab[0] = next;
                        moves += fill as u64;
                        continue;
                    }
                    let (next, fill) = advance(last, first, line[1], car);
                    slab[0] = next;
                    moves += fill as u64;
                    let (next, fill) = advance(line[m - 2], last, first, car);
                    slab[m - 1] = next;
                    moves += fill as u64;
                    if m > 2 {
                        moves += advance_slices(
                            &line[..m - 2],
                            &line[1..m - 1],
                            &line[2..],
                            &mut slab[1..m - 1],
                            car,
                        );
                    }
                } else {
                    let o_base = base / block * block;
                    let c = (base - o_base) / s;
                    let back = &old[o_base + (c + m - 1) % m * s..][..s];
                    let fwd = &old[o_base + (c + 1) % m * s..][..s];
                    let cur = &old[base..base + s];
                    moves += advance_slices(back, cur, fwd, slab, car);
                }
            }
            moves
        });
        grid.swap_codes(&mut self.scratch);
        moves
    }
}

/// One sub-step of the `d`-dimensional model: cars facing axis `t mod d`
/// advance into vacancies.
pub fn step_ddim(grid: &mut TorusGrid, t: u64) -> u64 {
    DDimStepper::default().step(grid, t)
}

/// Sites whose car moves at this sub-step, computed from the pre-step state.
pub(crate) fn collect_movers(grid: &TorusGrid, axis: usize, movers: &mut Vec<(usize, usize)>) {
    movers.clear();
    let car = axis as u8 + 1;
    let cells = grid.codes();
    movers.extend(
        grid.forward_pairs(axis)
            .filter(|&(i, f)| cells[i] == car && cells[f] == EMPTY),
    );
}

/// Apply a mover list. Sources are cars and targets vacancies before the
/// sub-step, so the two sets are disjoint and the order is irrelevant.
pub(crate) fn apply_movers(grid: &mut TorusGrid, axis: usize, movers: &[(usize, usize)]) {
    let car = axis as u8 + 1;
    let cells = grid.codes_mut();
    for &(from, to) in movers {
        cells[from] = EMPTY;
        cells[to] = car;
    }
}

/// True iff no car has a vacant site directly ahead of it.
pub fn is_frozen(grid: &TorusGrid) -> bool {
    let cells = grid.codes();
    (0..grid.ndim()).all(|axis| {
        let car = axis as u8 + 1;
        !grid
            .forward_pairs(axis)
            .any(|(i, f)| cells[i] == car && cells[f] == EMPTY)
    })
}
