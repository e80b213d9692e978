//! Oriented bond percolation: each vertex has edges to `x + e0` and `x + e1`,
//! open independently with probability `q`. Graphs are finite windows of the
//! quadrant or skew tori `Z^2 / (Z ra + Z rb)`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::graph::{find_cycle, Digraph};
use crate::par::{map_indices, Exec};
use crate::rng::{threshold, RngSeed};

/// `(g, s, t)` with `g = gcd(a, b) >= 0` and `s a + t b = g`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1, 0);
    let (mut t0, mut t1) = (0, 1);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewTorusSpec {
    pub a: [i64; 2],
    pub b: [i64; 2],
    pub r: i64,
}

/// A skew torus in reduced form: the identification lattice has basis
/// `(width, 0)` and `(shift, height)`, so every vertex has a unique
/// representative in `[0, width) x [0, height)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewTorus {
    pub spec: SkewTorusSpec,
    width: i64,
    height: i64,
    shift: i64,
}

impl SkewTorusSpec {
    pub fn new(a: [i64; 2], b: [i64; 2], r: i64) -> Result<Self> {
        if r < 1 {
            return Err(param("r", format!("must be positive, got {r}")));
        }
        if a[0] * b[1] - a[1] * b[0] == 0 {
            return Err(param("a,b", format!("{a:?} and {b:?} are linearly dependent")));
        }
        Ok(SkewTorusSpec { a, b, r })
    }

    pub fn unit(a: [i64; 2], b: [i64; 2]) -> Result<Self> {
        Self::new(a, b, 1)
    }

    /// `|det[ra rb]|`.
    pub fn vertex_count(&self) -> u64 {
        ((self.a[0] * self.b[1] - self.a[1] * self.b[0]).unsigned_abs()) * (self.r * self.r) as u64
    }

    pub fn build(&self) -> Result<SkewTorus> {
        let s = Self::new(self.a, self.b, self.r)?;
        let u = [s.a[0] * s.r, s.a[1] * s.r];
        let w = [s.b[0] * s.r, s.b[1] * s.r];
        let (g, x, y) = ext_gcd(u[1], w[1]);
        let (width, height, shift) = if g == 0 {
            unreachable!("independent generators cannot both lie on the x-axis")
        } else {
            let v2x = x * u[0] + y * w[0];
            let width = ((w[1] / g) * u[0] - (u[1] / g) * w[0]).abs();
            (width, g, v2x.rem_euclid(width))
        };
        Ok(SkewTorus {
            spec: s,
            width,
            height,
            shift,
        })
    }
}

impl SkewTorus {
    pub fn vertex_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    /// The reduced representative of `x`.
    pub fn reduce(&self, x: [i64; 2]) -> [i64; 2] {
        let j = x[1].div_euclid(self.height);
        let y = x[1] - j * self.height;
        let xx = (x[0] - j * self.shift).rem_euclid(self.width);
        [xx, y]
    }

    pub fn canonicalize(&self, x: [i64; 2]) -> usize {
        let [a, b] = self.reduce(x);
        (b * self.width + a) as usize
    }

    pub fn representative(&self, id: usize) -> [i64; 2] {
        let id = id as i64;
        [id % self.width, id / self.width]
    }

    /// Smallest `l > 0` with `(l, l)` identified with the origin.
    pub fn diag_ell(&self) -> u64 {
        let origin = self.canonicalize([0, 0]);
        (1..=self.vertex_count() as i64)
            .find(|&l| self.canonicalize([l, l]) == origin)
            .expect("the diagonal returns within the vertex count") as u64
    }

    fn graph(&self) -> OrientedGraph {
        let n = self.vertex_count();
        let mut next = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for v in 0..n {
            let [x, y] = self.representative(v);
            next[0].push(self.canonicalize([x + 1, y]) as u32);
            next[1].push(self.canonicalize([x, y + 1]) as u32);
        }
        OrientedGraph { next }
    }
}

/// `diag_ell` of the unscaled torus `T(a, b)`.
pub fn diag_ell(a: [i64; 2], b: [i64; 2]) -> Result<u64> {
    Ok(SkewTorusSpec::unit(a, b)?.build()?.diag_ell())
}

/// The rectangle `[0, width) x [0, height)` of the quadrant, without wrap.
/// Vertices are numbered along anti-diagonals, `rank(x, y) = s(s+1)/2 + x`
/// with `s = x + y`, so that windows of different sizes that are sampled from
/// the same stream agree on their common vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub width: usize,
    pub height: usize,
}

impl Window {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(param("window", "extents must be positive"));
        }
        Ok(Window { width, height })
    }

    /// The square holding every vertex with `x + y <= n`.
    pub fn square(n: usize) -> Self {
        Window {
            width: n + 1,
            height: n + 1,
        }
    }

    pub fn rank(x: usize, y: usize) -> usize {
        let s = x + y;
        s * (s + 1) / 2 + x
    }

    fn rank_count(&self) -> usize {
        Self::rank(self.width - 1, self.height - 1) + 1
    }

    pub fn contains(&self, x: [i64; 2]) -> bool {
        x[0] >= 0 && x[1] >= 0 && (x[0] as usize) < self.width && (x[1] as usize) < self.height
    }

    fn graph(&self) -> OrientedGraph {
        let n = self.rank_count();
        let mut next = [vec![NONE; n], vec![NONE; n]];
        for x in 0..self.width {
            for y in 0..self.height {
                let v = Self::rank(x, y);
                if x + 1 < self.width {
                    next[0][v] = Self::rank(x + 1, y) as u32;
                }
                if y + 1 < self.height {
                    next[1][v] = Self::rank(x, y + 1) as u32;
                }
            }
        }
        OrientedGraph { next }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
struct OrientedGraph {
    /// Head of the `+e0` and `+e1` edge of each vertex (`NONE` off a window).
    next: [Vec<u32>; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BondGraph {
    Window(Window),
    Skew(SkewTorus),
}

impl BondGraph {
    fn id(&self, x: [i64; 2]) -> Option<usize> {
        match self {
            BondGraph::Window(w) => w.contains(x).then(|| Window::rank(x[0] as usize, x[1] as usize)),
            BondGraph::Skew(t) => Some(t.canonicalize(x)),
        }
    }

    fn coords(&self, id: usize) -> [i64; 2] {
        match self {
            BondGraph::Window(_) => {
                // invert rank: largest s with s(s+1)/2 <= id
                let mut s = (((8 * id + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
                while (s + 1) * (s + 2) / 2 <= id {
                    s += 1;
                }
                while s * (s + 1) / 2 > id {
                    s -= 1;
                }
                let x = id - s * (s + 1) / 2;
                [x as i64, (s - x) as i64]
            }
            BondGraph::Skew(t) => t.representative(id),
        }
    }

    fn structure(&self) -> OrientedGraph {
        match self {
            BondGraph::Window(w) => w.graph(),
            BondGraph::Skew(t) => t.graph(),
        }
    }
}

/// One uniform per oriented edge. Thresholding the same uniforms at
/// different `q` couples the configurations monotonically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondUniforms {
    graph: BondGraph,
    structure: OrientedGraph,
    /// Interleaved `(e0, e1)` per vertex id.
    uniforms: Vec<u32>,
}

impl BondUniforms {
    pub fn sample(graph: BondGraph, seed: RngSeed) -> Self {
        let structure = graph.structure();
        let n = structure.next[0].len();
        let mut uniforms = vec![0u32; 2 * n];
        seed.rng().fill(&mut uniforms[..]);
        BondUniforms {
            graph,
            structure,
            uniforms,
        }
    }

    pub fn at(&self, q: f64) -> Result<OrientedBondConfig> {
        if !(0.0..=1.0).contains(&q) {
            return Err(param("q", format!("must lie in [0, 1], got {q}")));
        }
        let cut = threshold(q);
        let n = self.structure.next[0].len();
        let mut open = [vec![false; n], vec![false; n]];
        for v in 0..n {
            for (dir, o) in open.iter_mut().enumerate() {
                o[v] = self.structure.next[dir][v] != NONE && (self.uniforms[2 * v + dir] as u64) < cut;
            }
        }
        Ok(OrientedBondConfig {
            q,
            graph: self.graph.clone(),
            structure: self.structure.clone(),
            open,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedBondConfig {
    pub q: f64,
    graph: BondGraph,
    structure: OrientedGraph,
    open: [Vec<bool>; 2],
}

/// Each oriented edge open independently with probability `q`.
pub fn sample_bonds(graph: BondGraph, q: f64, seed: RngSeed) -> Result<OrientedBondConfig> {
    BondUniforms::sample(graph, seed).at(q)
}

impl OrientedBondConfig {
    pub fn graph(&self) -> &BondGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.open[0].len()
    }

    /// Open state of the `+e_dir` edge leaving `x` (`None` off the graph).
    pub fn is_open(&self, x: [i64; 2], dir: usize) -> Option<bool> {
        let v = self.graph.id(x)?;
        (self.structure.next[dir][v] != NONE).then(|| self.open[dir][v])
    }

    /// Number of edges and of open edges.
    pub fn edge_counts(&self) -> (u64, u64) {
        let mut edges = 0;
        let mut open = 0;
        for dir in 0..2 {
            for (v, &o) in self.open[dir].iter().enumerate() {
                if self.structure.next[dir][v] != NONE {
                    edges += 1;
                    open += o as u64;
                }
            }
        }
        (edges, open)
    }

    fn out(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..2).filter(move |&d| self.open[d][v]).map(move |d| self.structure.next[d][v] as usize)
    }

    /// Vertices reachable from `x` by open oriented paths (indexed by id).
    fn reach_from(&self, x: usize) -> Vec<bool> {
        let mut seen = vec![false; self.vertex_count()];
        seen[x] = true;
        let mut queue = VecDeque::from([x]);
        while let Some(v) = queue.pop_front() {
            for w in self.out(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Whether an open oriented path leads from `x` to `y`; false when either
    /// lies off the graph.
    pub fn reach(&self, x: [i64; 2], y: [i64; 2]) -> bool {
        match (self.graph.id(x), self.graph.id(y)) {
            (Some(a), Some(b)) => self.reach_from(a)[b],
            _ => false,
        }
    }

    pub fn open_digraph(&self) -> Digraph {
        Digraph::from_fn(self.vertex_count(), |v, out| out.extend(self.out(v)))
    }

    /// An open oriented cycle as a list of vertex representatives (the first
    /// is not repeated), or `None`.
    pub fn has_oriented_cycle(&self) -> Option<Vec<[i64; 2]>> {
        find_cycle(&self.open_digraph()).map(|c| c.into_iter().map(|v| self.graph.coords(v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationEstimate {
    pub q: f64,
    /// Window size `n` for survival estimates, scale `r` for cycle estimates.
    pub size: u64,
    pub trials: u64,
    pub successes: u64,
    pub phat: f64,
    pub stderr: f64,
}

fn summarize(q: f64, size: u64, outcomes: &[bool]) -> PercolationEstimate {
    let trials = outcomes.len() as u64;
    let successes = outcomes.iter().filter(|&&o| o).count() as u64;
    let phat = successes as f64 / trials as f64;
    PercolationEstimate {
        q,
        size,
        trials,
        successes,
        phat,
        stderr: (phat * (1.0 - phat) / trials as f64).sqrt(),
    }
}

/// Whether the origin reaches the line `x + y = n` in one sample.
fn survives(uniforms: &BondUniforms, q: f64, n: usize) -> bool {
    let config = uniforms.at(q).expect("validated q");
    let seen = config.reach_from(0);
    (0..=n).any(|x| seen[Window::rank(x, n - x)])
}

/// `P((0,0) reaches the line x + y = n)` under oriented bond percolation.
/// Trial `t` uses the stream `seed.derive(t)` laid out in anti-diagonal
/// order, so estimates for different `n` (and `q`) share their randomness.
pub fn estimate_theta(q: f64, n: usize, trials: u64, seed: RngSeed, exec: Exec) -> Result<PercolationEstimate> {
    Ok(estimate_theta_curve(q, &[n], trials, seed, exec)?.remove(0))
}

pub fn estimate_theta_curve(q: f64, ns: &[usize], trials: u64, seed: RngSeed, exec: Exec) -> Result<Vec<PercolationEstimate>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(param("q", format!("must lie in [0, 1], got {q}")));
    }
    if trials == 0 || ns.is_empty() {
        return Err(param("trials", "need at least one trial and one size"));
    }
    let largest = *ns.iter().max().unwrap();
    let window = BondGraph::Window(Window::square(largest));
    let rows = map_indices(exec, trials as usize, |t| {
        let u = BondUniforms::sample(window.clone(), seed.derive(t as u64));
        ns.iter().map(|&n| survives(&u, q, n)).collect::<Vec<_>>()
    });
    Ok(ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let col: Vec<bool> = rows.iter().map(|r| r[i]).collect();
            summarize(q, n as u64, &col)
        })
        .collect())
}

/// Probability that bond percolation on the skew torus has an open oriented
/// cycle.
pub fn estimate_cycle_prob(spec: &SkewTorusSpec, q: f64, trials: u64, seed: RngSeed, exec: Exec) -> Result<PercolationEstimate> {
    if !(0.0..=1.0).contains(&q) {
        return Err(param("q", format!("must lie in [0, 1], got {q}")));
    }
    if trials == 0 {
        return Err(param("trials", "must be at least 1"));
    }
    let graph = BondGraph::Skew(spec.build()?);
    let outcomes = map_indices(exec, trials as usize, |t| {
        let config = BondUniforms::sample(graph.clone(), seed.derive(t as u64)).at(q).unwrap();
        config.has_oriented_cycle().is_some()
    });
    Ok(summarize(q, spec.r as u64, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_identity() {
        for (a, b) in [(12, 18), (-3, 4), (0, 5), (7, 0), (-6, -9)] {
            let (g, s, t) = ext_gcd(a, b);
            assert!(g >= 0);
            assert_eq!(s * a + t * b, g);
        }
    }

    #[test]
    fn reference_torus() {
        let t = SkewTorusSpec::unit([6, -3], [-2, 4]).unwrap().build().unwrap();
        assert_eq!(t.vertex_count(), 18);
        assert_eq!(t.diag_ell(), 6);
        assert_ne!(t.canonicalize([0, 0]), t.canonicalize([1, 0]));
        assert_eq!(t.canonicalize([0, 0]), t.canonicalize([6, -3]));
        assert_eq!(t.canonicalize([3, 5]), t.canonicalize([3 - 2, 5 + 4]));
        assert_eq!(diag_ell([1, 0], [0, 1]).unwrap(), 1);
        assert_eq!(diag_ell([2, 0], [0, 2]).unwrap(), 2);
        assert!(SkewTorusSpec::unit([2, 1], [4, 2]).is_err());
        assert_eq!(SkewTorusSpec::new([6, -3], [-2, 4], 4).unwrap().vertex_count(), 18 * 16);
    }

    #[test]
    fn window_ranks_invert() {
        let g = BondGraph::Window(Window::new(7, 5).unwrap());
        for x in 0..7 {
            for y in 0..5 {
                let id = g.id([x, y]).unwrap();
                assert_eq!(g.coords(id), [x, y]);
            }
        }
        assert_eq!(g.id([7, 0]), None);
    }

    #[test]
    fn extreme_q() {
        let w = BondGraph::Window(Window::new(6, 6).unwrap());
        let all = sample_bonds(w.clone(), 1.0, 1.into()).unwrap();
        let none = sample_bonds(w, 0.0, 1.into()).unwrap();
        let (e, o) = all.edge_counts();
        assert_eq!(e, 60);
        assert_eq!(o, 60);
        assert_eq!(none.edge_counts().1, 0);
        assert!(all.reach([1, 1], [5, 3]));
        assert!(!all.reach([1, 1], [0, 3]));
        assert!(none.reach([2, 2], [2, 2]));
        assert!(!none.reach([2, 2], [3, 2]));
        let spec = SkewTorusSpec::new([6, -3], [-2, 4], 2).unwrap();
        let t = BondGraph::Skew(spec.build().unwrap());
        let c = sample_bonds(t.clone(), 1.0, 3.into()).unwrap();
        assert!(c.has_oriented_cycle().is_some());
        assert!(sample_bonds(t, 0.0, 3.into()).unwrap().has_oriented_cycle().is_none());
        assert!(sample_bonds(BondGraph::Window(Window::square(3)), 1.5, 0.into()).is_err());
    }

    #[test]
    fn theta_extremes() {
        let one = estimate_theta(1.0, 10, 20, 1.into(), Exec::Sequential).unwrap();
        assert_eq!(one.successes, 20);
        let zero = estimate_theta(0.0, 1, 20, 1.into(), Exec::Sequential).unwrap();
        assert_eq!(zero.successes, 0);
    }
}
