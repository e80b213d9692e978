//! Site states, toroidal grids and the random initial configuration.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BmlError, Result};
use crate::rng::{threshold, RngSeed};

/// Raw cell code for a vacancy. A car facing along axis `a` is stored as `a + 1`.
pub const EMPTY: u8 = 0;

/// Direction of travel, as the axis a car advances along (+1 on that axis).
/// In two dimensions axis 0 is East and axis 1 is North.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction(pub u8);

impl Direction {
    pub const EAST: Direction = Direction(0);
    pub const NORTH: Direction = Direction(1);

    pub fn axis(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteState {
    Empty,
    Car(Direction),
}

impl SiteState {
    pub const EAST: SiteState = SiteState::Car(Direction::EAST);
    pub const NORTH: SiteState = SiteState::Car(Direction::NORTH);

    #[inline]
    pub fn from_code(code: u8) -> SiteState {
        if code == EMPTY {
            SiteState::Empty
        } else {
            SiteState::Car(Direction(code - 1))
        }
    }

    #[inline]
    pub fn code(self) -> u8 {
        match self {
            SiteState::Empty => EMPTY,
            SiteState::Car(d) => d.0 + 1,
        }
    }

    pub fn is_car(self) -> bool {
        matches!(self, SiteState::Car(_))
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            SiteState::Car(d) => Some(d),
            SiteState::Empty => None,
        }
    }
}

/// Product law for the initial configuration.
///
/// In two dimensions a site holds an East car with probability `theta * p`,
/// a North car with probability `(1 - theta) * p` and is empty otherwise.
/// For `d > 2` every direction has probability `p / d` and `theta` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    pub p: f64,
    pub theta: f64,
    pub d: usize,
}

impl InitialLaw {
    pub fn new(p: f64, theta: f64, d: usize) -> Result<Self> {
        let law = InitialLaw { p, theta, d };
        law.validate()?;
        Ok(law)
    }

    /// Unbiased two-dimensional law (`theta = 1/2`).
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, 0.5, 2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(BmlError::param("p", format!("{} is not in [0, 1]", self.p)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(BmlError::param(
                "theta",
                format!("{} is not in (0, 1)", self.theta),
            ));
        }
        if self.d < 2 {
            return Err(BmlError::param("d", format!("dimension {} < 2", self.d)));
        }
        Ok(())
    }

    /// Probability that a site holds a car facing `axis`.
    pub fn direction_probability(&self, axis: usize) -> f64 {
        match (self.d, axis) {
            (2, 0) => self.theta * self.p,
            (2, 1) => (1.0 - self.theta) * self.p,
            (d, a) if a < d => self.p / d as f64,
            _ => 0.0,
        }
    }

    /// Cumulative `u32` thresholds, one per direction.
    fn thresholds(&self) -> Vec<u64> {
        let mut acc = 0.0;
        (0..self.d)
            .map(|a| {
                acc += self.direction_probability(a);
                if a + 1 == self.d {
                    threshold(self.p)
                } else {
                    threshold(acc)
                }
            })
            .collect()
    }
}

/// A configuration on a `d`-dimensional torus.
///
/// Cells are stored densely with coordinate 0 varying fastest, so in two
/// dimensions each row (fixed North coordinate) is a contiguous slice.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    cells: Vec<u8>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dims", &self.dims)
            .field("cars", &self.car_count())
            .finish()
    }
}

impl TorusGrid {
    pub fn empty(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(BmlError::param("dims", "need at least two dimensions"));
        }
        if dims.contains(&0) {
            return Err(BmlError::param("dims", "every extent must be positive"));
        }
        let mut strides = Vec::with_capacity(dims.len());
        let mut s = 1usize;
        for &m in dims {
            strides.push(s);
            s = s
                .checked_mul(m)
                .ok_or_else(|| BmlError::param("dims", "grid too large"))?;
        }
        Ok(TorusGrid {
            dims: dims.to_vec(),
            strides,
            cells: vec![EMPTY; s],
        })
    }

    /// Build a grid from raw cell codes in storage order.
    pub fn from_codes(dims: &[usize], cells: Vec<u8>) -> Result<Self> {
        let mut g = Self::empty(dims)?;
        if cells.len() != g.cells.len() {
            return Err(BmlError::param("cells", "length does not match dims"));
        }
        if let Some(&c) = cells.iter().find(|&&c| c as usize > dims.len()) {
            return Err(BmlError::param("cells", format!("bad cell code {c}")));
        }
        g.cells = cells;
        Ok(g)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn codes(&self) -> &[u8] {
        &self.cells
    }

    pub(crate) fn codes_mut(&mut self) -> &mut [u8] {
        &mut self.cells
    }

    pub(crate) fn swap_codes(&mut self, other: &mut Vec<u8>) {
        std::mem::swap(&mut self.cells, other);
    }

    /// Storage index of a coordinate vector, wrapping every axis.
    pub fn index(&self, z: &[i64]) -> usize {
        debug_assert_eq!(z.len(), self.dims.len());
        z.iter()
            .zip(&self.dims)
            .zip(&self.strides)
            .map(|((&c, &m), &s)| c.rem_euclid(m as i64) as usize * s)
            .sum()
    }

    pub fn coords(&self, mut idx: usize) -> Vec<i64> {
        self.dims
            .iter()
            .map(|&m| {
                let c = idx % m;
                idx /= m;
                c as i64
            })
            .collect()
    }

    /// Index of the neighbour one step along `axis`, forwards or backwards.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let m = self.dims[axis];
        let s = self.strides[axis];
        let c = (idx / s) % m;
        if forward {
            if c + 1 == m {
                idx + s - m * s
            } else {
                idx + s
            }
        } else if c == 0 {
            idx + (m - 1) * s
        } else {
            idx - s
        }
    }

    #[inline]
    pub fn state_at(&self, idx: usize) -> SiteState {
        SiteState::from_code(self.cells[idx])
    }

    pub fn get(&self, z: &[i64]) -> SiteState {
        self.state_at(self.index(z))
    }

    pub fn set(&mut self, z: &[i64], state: SiteState) {
        let i = self.index(z);
        self.cells[i] = state.code();
    }

    /// Two-dimensional convenience accessor.
    #[inline]
    pub fn at(&self, x: i64, y: i64) -> SiteState {
        debug_assert_eq!(self.ndim(), 2);
        let m = self.dims[0] as i64;
        let n = self.dims[1] as i64;
        let i = y.rem_euclid(n) as usize * self.dims[0] + x.rem_euclid(m) as usize;
        SiteState::from_code(self.cells[i])
    }

    pub fn set_at(&mut self, x: i64, y: i64, state: SiteState) {
        self.set(&[x, y], state);
    }

    /// All `(site, site + e_axis)` index pairs, in storage order of the first.
    pub fn forward_pairs(&self, axis: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let s = self.strides[axis];
        let m = self.dims[axis];
        let block = s * m;
        let outer = self.cells.len() / block;
        (0..outer).flat_map(move |o| {
            (0..m).flat_map(move |c| {
                let base = o * block + c * s;
                let fwd = o * block + ((c + 1) % m) * s;
                (0..s).map(move |r| (base + r, fwd + r))
            })
        })
    }

    pub fn car_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != EMPTY).count()
    }

    /// Serialize in the text snapshot format: a header line
    /// `BML d m n ...` followed by one byte per site in storage order.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = format!("BML {}", self.ndim());
        for m in &self.dims {
            out.push_str(&format!(" {m}"));
        }
        out.push('\n');
        let mut bytes = out.into_bytes();
        let two_d = self.ndim() == 2;
        bytes.extend(self.cells.iter().map(|&c| match c {
            EMPTY => b'.',
            1 if two_d => b'E',
            2 if two_d => b'N',
            c => b'0' + (c - 1),
        }));
        bytes
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| BmlError::Snapshot("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| BmlError::Snapshot("header is not UTF-8".into()))?;
        let mut fields = header.split(' ');
        if fields.next() != Some("BML") {
            return Err(BmlError::Snapshot("header must start with `BML`".into()));
        }
        let nums: Vec<usize> = fields
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| BmlError::Snapshot(format!("bad header number: {e}")))?;
        let (&d, dims) = nums
            .split_first()
            .ok_or_else(|| BmlError::Snapshot("missing dimension".into()))?;
        if dims.len() != d {
            return Err(BmlError::Snapshot(format!(
                "header declares d={d} but lists {} extents",
                dims.len()
            )));
        }
        if d > 10 {
            return Err(BmlError::Snapshot("at most 10 directions are encodable".into()));
        }
        let body = &bytes[nl + 1..];
        let two_d = d == 2;
        let cells = body
            .iter()
            .map(|&b| match b {
                b'.' => Ok(EMPTY),
                b'E' if two_d => Ok(1),
                b'N' if two_d => Ok(2),
                b'0'..=b'9' if !two_d && ((b - b'0') as usize) < d => Ok(b - b'0' + 1),
                other => Err(BmlError::Snapshot(format!("bad site byte {other:#04x}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_codes(dims, cells).map_err(|e| BmlError::Snapshot(e.to_string()))
    }

    pub fn write_snapshot(&self, path: &Path) -> std::io::Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_snapshot())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| BmlError::Snapshot(format!("{}: {e}", path.display())))?;
        Self::from_snapshot(&buf)
    }
}

/// Draw an initial configuration, each site independently from `law`.
pub fn sample_initial(dims: &[usize], law: &InitialLaw, seed: RngSeed) -> Result<TorusGrid> {
    law.validate()?;
    if dims.len() != law.d {
        return Err(BmlError::param(
            "dims",
            format!("{} extents for a d={} law", dims.len(), law.d),
        ));
    }
    let mut grid = TorusGrid::empty(dims)?;
    let cuts = law.thresholds();
    let d = cuts.len() as u8;
    let mut rng = seed.rng();
    let mut words = [0u32; 1024];
    for block in grid.codes_mut().chunks_mut(words.len()) {
        let words = &mut words[..block.len()];
        rng.fill(words);
        for (cell, &u) in block.iter_mut().zip(words.iter()) {
            // index of the first cut above u, or d when u is past them all
            let idx = cuts.iter().map(|&c| (u as u64 >= c) as u8).sum::<u8>();
            *cell = if idx < d { idx + 1 } else { EMPTY };
        }
    }
    Ok(grid)
}

/// Number of cars per direction and of empty sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub per_direction: Vec<usize>,
    pub empty: usize,
}

impl Census {
    pub fn cars(&self) -> usize {
        self.per_direction.iter().sum()
    }
}

pub fn car_census(grid: &TorusGrid) -> Census {
    let mut per_direction = vec![0usize; grid.ndim()];
    let mut empty = 0;
    for &c in grid.codes() {
        if c == EMPTY {
            empty += 1;
        } else {
            per_direction[(c - 1) as usize] += 1;
        }
    }
    Census {
        per_direction,
        empty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p_one_fills_and_p_zero_empties() {
        let full = sample_initial(&[4, 4], &InitialLaw::symmetric(1.0).unwrap(), 1.into()).unwrap();
        assert_eq!(car_census(&full).empty, 0);
        let none = sample_initial(&[4, 4], &InitialLaw::symmetric(0.0).unwrap(), 1.into()).unwrap();
        assert_eq!(car_census(&none).empty, 16);
    }

    #[test]
    fn east_fraction_concentrates() {
        // Binomial(10^6, 0.25): sd = sqrt(0.25*0.75/1e6) ~ 4.3e-4, 3 sd ~ 1.3e-3 < 0.005.
        let g = sample_initial(&[1000, 1000], &InitialLaw::symmetric(0.5).unwrap(), 11.into())
            .unwrap();
        let frac = car_census(&g).per_direction[0] as f64 / 1e6;
        assert!((frac - 0.25).abs() < 0.005, "{frac}");
    }

    #[test]
    fn census_examples() {
        let g = TorusGrid::empty(&[2, 2]).unwrap();
        assert_eq!(
            car_census(&g),
            Census {
                per_direction: vec![0, 0],
                empty: 4
            }
        );
        let mut g = TorusGrid::empty(&[2, 2]).unwrap();
        g.set_at(0, 0, SiteState::EAST);
        g.set_at(1, 1, SiteState::NORTH);
        let c = car_census(&g);
        assert_eq!((c.per_direction[0], c.per_direction[1], c.empty), (1, 1, 2));
    }

    #[test]
    fn parameter_errors() {
        assert!(InitialLaw::new(1.5, 0.5, 2).is_err());
        assert!(InitialLaw::new(0.5, 0.0, 2).is_err());
        assert!(InitialLaw::new(0.5, 1.0, 2).is_err());
        assert!(InitialLaw::new(0.5, 0.5, 1).is_err());
        let law = InitialLaw::symmetric(0.5).unwrap();
        assert!(sample_initial(&[4, 0], &law, 0.into()).is_err());
        assert!(sample_initial(&[4, 4, 4], &law, 0.into()).is_err());
    }

    #[test]
    fn wraparound_neighbours() {
        let g = TorusGrid::empty(&[5, 3]).unwrap();
        let i = g.index(&[4, 2]);
        assert_eq!(g.neighbor(i, 0, true), g.index(&[0, 2]));
        assert_eq!(g.neighbor(i, 1, true), g.index(&[4, 0]));
        assert_eq!(g.neighbor(g.index(&[0, 0]), 0, false), g.index(&[4, 0]));
        assert_eq!(g.neighbor(g.index(&[0, 0]), 1, false), g.index(&[0, 2]));
        assert_eq!(g.index(&[-1, -1]), g.index(&[4, 2]));
        assert_eq!(g.coords(g.index(&[3, 1])), vec![3, 1]);
    }

    #[test]
    fn snapshot_header_and_body() {
        let mut g = TorusGrid::empty(&[3, 2]).unwrap();
        g.set_at(0, 0, SiteState::EAST);
        g.set_at(2, 1, SiteState::NORTH);
        assert_eq!(g.to_snapshot(), b"BML 2 3 2\nE....N".to_vec());
        let mut h = TorusGrid::empty(&[2, 1, 2]).unwrap();
        h.set(&[1, 0, 1], SiteState::Car(Direction(2)));
        assert_eq!(h.to_snapshot(), b"BML 3 2 1 2\n...2".to_vec());
        assert!(TorusGrid::from_snapshot(b"BML 2 2 2\nEEN").is_err());
        assert!(TorusGrid::from_snapshot(b"BML 2 2 2\nEEN1").is_err());
        assert!(TorusGrid::from_snapshot(b"XYZ 2 2 2\nEENN").is_err());
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(m in 1usize..7, n in 1usize..7, d3 in 1usize..4, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let g = sample_initial(&[m, n], &InitialLaw::symmetric(p).unwrap(), seed.into()).unwrap();
            let bytes = g.to_snapshot();
            prop_assert_eq!(TorusGrid::from_snapshot(&bytes).unwrap(), g);
            let h = sample_initial(&[m, n, d3], &InitialLaw::new(p, 0.5, 3).unwrap(), seed.into()).unwrap();
            let bytes = h.to_snapshot();
            let back = TorusGrid::from_snapshot(&bytes).unwrap();
            prop_assert_eq!(back.to_snapshot(), bytes);
        }

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
            let law = InitialLaw::symmetric(0.4).unwrap();
            let s = RngSeed::new(seed, stream);
            prop_assert_eq!(sample_initial(&[9, 7], &law, s).unwrap(), sample_initial(&[9, 7], &law, s).unwrap());
        }
    }
}
