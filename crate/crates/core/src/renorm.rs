//! The renormalized lattice. Renormalized site `u` stands for the
//! anti-diagonal segment `V_u = u1 (10M, 9M) + u2 (9M, 10M) + {(s, -s) : |s| <= k}`
//! and an edge `(u, v)` is good when every site of `V_u` has a blocking path
//! to some site of `V_v`.

use serde::{Deserialize, Serialize};

use crate::blocking::{greedy_construct, reachable, BlockingPath, Branching, ChoiceMode, Region};
use crate::error::{param, Result};
use crate::lattice::{sample_initial, InitialLaw, TorusGrid, EMPTY};
use crate::par::{map_indices, Exec};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormParams {
    pub m: i64,
    pub k: i64,
}

impl RenormParams {
    /// Requires `M > 2k >= 0`. The slope condition is checked separately by
    /// [`validate_params`].
    pub fn new(m: i64, k: i64) -> Result<Self> {
        if k < 0 {
            return Err(param("k", format!("must be non-negative, got {k}")));
        }
        if m <= 2 * k {
            return Err(param("M", format!("need M > 2k, got M={m}, k={k}")));
        }
        Ok(RenormParams { m, k })
    }

    /// Centre of `V_u`.
    pub fn centre(&self, u: [i64; 2]) -> [i64; 2] {
        [
            u[0] * 10 * self.m + u[1] * 9 * self.m,
            u[0] * 9 * self.m + u[1] * 10 * self.m,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub ok: bool,
    /// `(10M + k) / (9M - k)`, or infinity when undefined.
    pub slope_ratio: f64,
    pub diagnostics: Vec<String>,
}

/// `M > 2k > 0` together with `(10M + k) / (9M - k) <= 9/8`.
pub fn validate_params(m: i64, k: i64) -> ParamCheck {
    let mut diagnostics = Vec::new();
    if k <= 0 {
        diagnostics.push(format!("k must be positive, got {k}"));
    }
    if m <= 2 * k {
        diagnostics.push(format!("need M > 2k, got M={m}, k={k}"));
    }
    let den = 9 * m - k;
    let slope_ratio = if den > 0 {
        (10 * m + k) as f64 / den as f64
    } else {
        f64::INFINITY
    };
    // exact rational comparison: 8 (10M + k) <= 9 (9M - k)
    if den <= 0 || 8 * (10 * m + k) > 9 * den {
        diagnostics.push(format!("(10M+k)/(9M-k) = {slope_ratio:.4} exceeds 9/8"));
    }
    ParamCheck {
        ok: diagnostics.is_empty(),
        slope_ratio,
        diagnostics,
    }
}

/// The `2k + 1` sites of `V_u`, in increasing `s`.
pub fn renorm_site_coords(u: [i64; 2], params: &RenormParams) -> Result<Vec<[i64; 2]>> {
    let p = RenormParams::new(params.m, params.k)?;
    let c = p.centre(u);
    Ok((-p.k..=p.k).map(|s| [c[0] + s, c[1] - s]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormEdge {
    pub u: [i64; 2],
    pub v: [i64; 2],
}

impl RenormEdge {
    pub fn new(u: [i64; 2], v: [i64; 2]) -> Result<Self> {
        match [v[0] - u[0], v[1] - u[1]] {
            [1, 0] | [0, 1] => Ok(RenormEdge { u, v }),
            d => Err(param("edge", format!("v - u must be (1,0) or (0,1), got {d:?}"))),
        }
    }

    pub fn east(u: [i64; 2]) -> Self {
        RenormEdge { u, v: [u[0] + 1, u[1]] }
    }

    pub fn north(u: [i64; 2]) -> Self {
        RenormEdge { u, v: [u[0], u[1] + 1] }
    }

    /// Smallest `L1` distance between an endpoint of `self` and one of `other`.
    pub fn distance(&self, other: &RenormEdge) -> i64 {
        let l1 = |a: [i64; 2], b: [i64; 2]| (a[0] - b[0]).abs() + (a[1] - b[1]).abs();
        [self.u, self.v]
            .iter()
            .flat_map(|&a| [other.u, other.v].map(|b| l1(a, b)))
            .min()
            .unwrap()
    }
}

/// Bounding box of `V_u` and `V_v`, widened by one site on every side: the
/// diagonal step cases read the neighbours at `(1,-1)` and `(-1,1)`. Blocking
/// steps never decrease a coordinate, so a path between the two segments
/// stays inside the unwidened box.
pub fn dependency_box(edge: &RenormEdge, params: &RenormParams) -> Result<Region> {
    let sites: Vec<[i64; 2]> = renorm_site_coords(edge.u, params)?
        .into_iter()
        .chain(renorm_site_coords(edge.v, params)?)
        .collect();
    let lo = (0..2).map(|a| sites.iter().map(|s| s[a]).min().unwrap() - 1).collect();
    let hi = (0..2).map(|a| sites.iter().map(|s| s[a]).max().unwrap() + 1).collect();
    Region::new(lo, hi)
}

pub fn boxes_disjoint(a: &Region, b: &Region) -> bool {
    (0..a.lo.len()).any(|i| a.hi[i] < b.lo[i] || b.hi[i] < a.lo[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoodEdgeMode {
    /// A shortest-path search from every site of `V_u`; returns witnesses.
    Full,
    /// One backward sweep marking every site that reaches `V_v`.
    #[default]
    Sweep,
    /// Only the two ends of `V_u` are searched (plus a car check on the rest).
    /// Exact when the box holds no vacancies; otherwise a middle path may
    /// stop at a vacancy, so this can report good when the edge is not.
    EndpointOnly,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeVerdict {
    pub good: bool,
    /// One path per site of `V_u` in full mode (up to the first failure).
    pub witnesses: Vec<BlockingPath>,
}

/// A rectangle of a 2-d configuration copied out with coordinate 0 fastest,
/// surrounded by a one-site border of vacancies.
pub(crate) struct Patch {
    lo: [i64; 2],
    w: usize,
    h: usize,
    /// Padded row length.
    stride: usize,
    cells: Vec<u8>,
}

impl Patch {
    pub(crate) fn new(grid: &TorusGrid, region: &Region) -> Self {
        let (w, h) = (region.extent(0), region.extent(1));
        let stride = w + 2;
        let dims = grid.dims();
        let xs: Vec<usize> = (0..w)
            .map(|i| (region.lo[0] + i as i64).rem_euclid(dims[0] as i64) as usize)
            .collect();
        let codes = grid.codes();
        let mut cells = vec![EMPTY; stride * (h + 2)];
        for j in 0..h {
            let row = (region.lo[1] + j as i64).rem_euclid(dims[1] as i64) as usize * dims[0];
            let out = &mut cells[(j + 1) * stride + 1..(j + 1) * stride + 1 + w];
            for (c, &x) in out.iter_mut().zip(&xs) {
                *c = codes[row + x];
            }
        }
        Patch {
            lo: [region.lo[0], region.lo[1]],
            w,
            h,
            stride,
            cells,
        }
    }

    pub(crate) fn key(&self, z: [i64; 2]) -> Option<usize> {
        let (i, j) = (z[0] - self.lo[0], z[1] - self.lo[1]);
        (i >= 0 && j >= 0 && (i as usize) < self.w && (j as usize) < self.h)
            .then(|| (j as usize + 1) * self.stride + i as usize + 1)
    }

    /// Marks (1 or 0, indexed by [`Patch::key`]) of the sites from which some
    /// blocking path inside the patch ends at one of `targets`. Reverse
    /// row-major order visits every successor first.
    pub(crate) fn backward(&self, targets: &[usize]) -> Vec<u8> {
        let s = self.stride;
        let c = &self.cells;
        let mut ok = vec![0u8; c.len()];
        for &t in targets {
            ok[t] = 1;
        }
        for j in (1..=self.h).rev() {
            for v in (j * s + 1..j * s + 1 + self.w).rev() {
                let east = (c[v] == 1) as u8;
                let north = (c[v] == 2) as u8;
                let via_east = ok[v + 1] | ((c[v + 1] == 1) as u8 & (c[v + 1 - s] == 2) as u8 & ok[v + 1 + s]);
                let via_north = ok[v + s] | ((c[v + s] == 2) as u8 & (c[v + s - 1] == 1) as u8 & ok[v + s + 1]);
                ok[v] |= (east & via_east) | (north & via_north);
            }
        }
        ok
    }

    /// Sites at which some blocking path from `start` (a car) ends.
    pub(crate) fn forward(&self, start: usize) -> Vec<bool> {
        let s = self.stride;
        let c = &self.cells;
        let mut seen = vec![false; c.len()];
        if c[start] == EMPTY {
            return seen;
        }
        seen[start] = true;
        for v in start..c.len() - s - 1 {
            if !seen[v] {
                continue;
            }
            match c[v] {
                1 => {
                    seen[v + 1] = true;
                    if c[v + 1] == 1 && c[v + 1 - s] == 2 {
                        seen[v + 1 + s] = true;
                    }
                }
                2 => {
                    seen[v + s] = true;
                    if c[v + s] == 2 && c[v + s - 1] == 1 {
                        seen[v + s + 1] = true;
                    }
                }
                _ => {}
            }
        }
        seen
    }

    pub(crate) fn is_car(&self, key: usize) -> bool {
        self.cells[key] != EMPTY
    }
}

fn check_fits(grid: &TorusGrid, region: &Region) -> Result<()> {
    if grid.ndim() != 2 {
        return Err(param("grid", "good edges are defined on 2-d grids"));
    }
    for a in 0..2 {
        if grid.dims()[a] < region.extent(a) {
            return Err(param(
                "grid",
                format!(
                    "extent {} along axis {a} is smaller than the dependency box ({})",
                    grid.dims()[a],
                    region.extent(a)
                ),
            ));
        }
    }
    Ok(())
}

/// Decide whether `edge` is good. Searches are confined to the dependency
/// box, which must fit in the torus without wrapping onto itself.
pub fn is_good_edge(grid: &TorusGrid, edge: &RenormEdge, params: &RenormParams, mode: GoodEdgeMode) -> Result<EdgeVerdict> {
    let region = dependency_box(edge, params)?;
    check_fits(grid, &region)?;
    let sources = renorm_site_coords(edge.u, params)?;
    let targets = renorm_site_coords(edge.v, params)?;
    let target_vecs: Vec<Vec<i64>> = targets.iter().map(|t| t.to_vec()).collect();
    let search = |x: &[i64; 2]| reachable(grid, x, &target_vecs, &region, Branching::Full);
    match mode {
        GoodEdgeMode::Full => {
            let mut witnesses = Vec::with_capacity(sources.len());
            for x in &sources {
                match search(x) {
                    Some(p) => witnesses.push(p),
                    None => return Ok(EdgeVerdict { good: false, witnesses }),
                }
            }
            Ok(EdgeVerdict { good: true, witnesses })
        }
        GoodEdgeMode::Sweep => {
            let patch = Patch::new(grid, &region);
            let marks: Vec<usize> = targets
                .iter()
                .map(|&t| patch.key(t).expect("target inside box"))
                .collect();
            let ok = patch.backward(&marks);
            let good = sources.iter().all(|&x| {
                let key = patch.key(x).expect("source inside box");
                patch.is_car(key) && ok[key] == 1
            });
            Ok(EdgeVerdict {
                good,
                witnesses: Vec::new(),
            })
        }
        GoodEdgeMode::EndpointOnly => {
            if !sources.iter().all(|x| grid.get(x).is_car()) {
                return Ok(EdgeVerdict::default());
            }
            let mut witnesses = Vec::new();
            for x in [sources[0], sources[sources.len() - 1]] {
                match search(&x) {
                    Some(p) => witnesses.push(p),
                    None => return Ok(EdgeVerdict { good: false, witnesses }),
                }
            }
            Ok(EdgeVerdict { good: true, witnesses })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodEdgeSample {
    pub edge: RenormEdge,
    pub p: f64,
    pub m: i64,
    pub k: i64,
    pub trials: u64,
    pub successes: u64,
    pub phat: f64,
    pub stderr: f64,
}

fn binomial(trials: u64, successes: u64) -> (f64, f64) {
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Fraction of independent configurations (symmetric law, density `p`) in
/// which `edge` is good. Each trial samples a fresh torus exactly the size of
/// the dependency box.
pub fn estimate_good_prob(
    p: f64,
    params: &RenormParams,
    edge: &RenormEdge,
    trials: u64,
    seed: RngSeed,
    mode: GoodEdgeMode,
    exec: Exec,
) -> Result<GoodEdgeSample> {
    if trials == 0 {
        return Err(param("trials", "must be at least 1"));
    }
    let law = InitialLaw::symmetric(p)?;
    let region = dependency_box(edge, params)?;
    let dims = [region.extent(0), region.extent(1)];
    let outcomes = map_indices(exec, trials as usize, |t| -> Result<bool> {
        let grid = sample_initial(&dims, &law, seed.derive(t as u64))?;
        Ok(is_good_edge(&grid, edge, params, mode)?.good)
    });
    let successes = outcomes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|&g| g).count() as u64;
    let (phat, stderr) = binomial(trials, successes);
    Ok(GoodEdgeSample {
        edge: *edge,
        p,
        m: params.m,
        k: params.k,
        trials,
        successes,
        phat,
        stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HitMethod {
    /// Every site reachable by some blocking path.
    #[default]
    Search,
    Greedy(ChoiceMode),
}

/// Whether `y1 / y2` lies in `[8/9, 9/8]` with both coordinates positive.
pub fn in_cone(y: [i64; 2]) -> bool {
    y[0] > 0 && y[1] > 0 && 9 * y[0] >= 8 * y[1] && 8 * y[0] <= 9 * y[1]
}

/// Region holding every blocking path from the origin up to the line of `y`.
fn target_region(y: [i64; 2]) -> Region {
    let l = y[0] + y[1];
    Region::new(vec![-1, -1], vec![l + 1, l + 1]).expect("non-empty")
}

/// Distance along the target line from `y` to the nearest endpoint of a
/// blocking path from the origin on a fresh density-1 configuration; `None`
/// when no path reaches the line.
pub fn target_miss(y: [i64; 2], method: HitMethod, seed: RngSeed) -> Result<Option<u64>> {
    if y[0] + y[1] < 0 {
        return Err(param("y", "target line lies behind the origin"));
    }
    let region = target_region(y);
    let dims = [region.extent(0), region.extent(1)];
    let grid = sample_initial(&dims, &InitialLaw::symmetric(1.0)?, seed)?;
    let line = y[0] + y[1];
    match method {
        HitMethod::Search => {
            let patch = Patch::new(&grid, &region);
            let seen = patch.forward(patch.key([0, 0]).unwrap());
            Ok((0..=line)
                .filter_map(|x| {
                    let z = [x, line - x];
                    patch.key(z).filter(|&k| seen[k]).map(|_| (x - y[0]).unsigned_abs())
                })
                .min())
        }
        HitMethod::Greedy(mode) => match greedy_construct(&grid, [0, 0], y, mode)? {
            Ok(g) => Ok(Some((g.path.sites.last().unwrap()[0] - y[0]).unsigned_abs())),
            Err(_) => Ok(None),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetHitEstimate {
    pub y: [i64; 2],
    pub k: u64,
    pub trials: u64,
    pub successes: u64,
    pub phat: f64,
    pub stderr: f64,
    /// False when `y` is outside the cone where a hitting bound is known; the
    /// estimate is still reported.
    pub in_cone: bool,
    /// Trials per miss distance (the last bucket counts trials that never
    /// reached the target line).
    pub miss_histogram: Vec<u64>,
}

/// Estimate the probability that a blocking path from the origin ends within
/// `k` sites of `y` on its anti-diagonal line, at density 1.
pub fn estimate_target_hit(
    y: [i64; 2],
    k: u64,
    trials: u64,
    seed: RngSeed,
    method: HitMethod,
    exec: Exec,
) -> Result<TargetHitEstimate> {
    if trials == 0 {
        return Err(param("trials", "must be at least 1"));
    }
    let misses = map_indices(exec, trials as usize, |t| target_miss(y, method, seed.derive(t as u64)));
    let misses = misses.into_iter().collect::<Result<Vec<_>>>()?;
    let width = (y[0] + y[1]).unsigned_abs() as usize + 1;
    let mut miss_histogram = vec![0u64; width + 1];
    let mut successes = 0;
    for m in misses {
        match m {
            Some(d) => {
                miss_histogram[(d as usize).min(width - 1)] += 1;
                if d <= k {
                    successes += 1;
                }
            }
            None => miss_histogram[width] += 1,
        }
    }
    let (phat, stderr) = binomial(trials, successes);
    Ok(TargetHitEstimate {
        y,
        k,
        trials,
        successes,
        phat,
        stderr,
        in_cone: in_cone(y),
        miss_histogram,
    })
}
