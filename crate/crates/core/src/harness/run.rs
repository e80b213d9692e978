//! Experiment execution and run persistence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{EdgeDirection, EngineChoice, ExperimentConfig, ExperimentKind, HarnessError, TableFormat};
use super::phase::classify_phase;
use super::render::render_snapshot;
use crate::blocking::{find_cyclic, transition_probability, wchain_simulate, wchain_stationary, BlockingPath};
use crate::dynamics::{run_poisson, Engine, SimStats, Simulation};
use crate::lattice::{sample_initial, TorusGrid};
use crate::par::{map_indices, set_threads, Exec};
use crate::percolation::{diag_ell, estimate_cycle_prob, SkewTorusSpec};
use crate::renorm::{estimate_good_prob, estimate_target_hit, in_cone, validate_params, RenormEdge, RenormParams};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub toolkit_version: String,
    pub wall_time_secs: f64,
    pub statistics: Value,
    pub manifest: Vec<ManifestEntry>,
}

impl RunRecord {
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

pub const RECORD_FILE: &str = "record.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Check that every manifest entry exists under `dir` with the recorded
/// size and hash; returns the offending paths.
pub fn verify_manifest(dir: &Path, record: &RunRecord) -> Vec<String> {
    record
        .manifest
        .iter()
        .filter(|e| match fs::read(dir.join(&e.path)) {
            Ok(b) => b.len() as u64 != e.bytes || sha256_hex(&b) != e.sha256,
            Err(_) => true,
        })
        .map(|e| e.path.clone())
        .collect()
}

struct Outputs {
    dir: PathBuf,
    format: TableFormat,
    png: bool,
    manifest: Vec<ManifestEntry>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Header-first CSV or a JSON array, by the configured format.
    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<(), HarnessError> {
        match self.format {
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r)?;
                }
                let bytes = w.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))?;
                self.write(&format!("{stem}.csv"), &bytes)
            }
            TableFormat::Json => {
                let bytes = serde_json::to_vec_pretty(rows)?;
                self.write(&format!("{stem}.json"), &bytes)
            }
        }
    }

    fn image(&mut self, stem: &str, grid: &TorusGrid, overlay: &[BlockingPath]) -> Result<(), HarnessError> {
        let img = render_snapshot(grid, overlay, &[])?;
        self.write(&format!("{stem}.ppm"), &img.to_ppm())?;
        if self.png {
            self.write(&format!("{stem}.png"), &img.to_png()?)?;
        }
        Ok(())
    }
}

/// Validate `config`, run it, write its artifacts and `record.json` into the
/// output directory, and return the record.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    config.validate()?;
    if let Some(n) = config.threads {
        set_threads(n);
    }
    let dir = config.out_dir();
    fs::create_dir_all(&dir)?;
    let mut out = Outputs {
        dir: dir.clone(),
        format: config.format(),
        png: config.png.unwrap_or(false),
        manifest: Vec::new(),
    };
    let started = Instant::now();
    let statistics = match config.kind {
        ExperimentKind::Simulate => simulate(config, &mut out)?,
        ExperimentKind::PhaseScan => phase_scan(config, &mut out)?,
        ExperimentKind::Blocking => blocking(config, &mut out)?,
        ExperimentKind::GoodEdge => good_edge(config, &mut out)?,
        ExperimentKind::TargetHit => target_hit(config, &mut out)?,
        ExperimentKind::SkewCycle => skew_cycle(config, &mut out)?,
        ExperimentKind::Wchain => wchain(config, &mut out)?,
        ExperimentKind::Render => render(config, &mut out)?,
    };
    let record = RunRecord {
        config: config.clone(),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        statistics,
        manifest: out.manifest,
    };
    fs::write(dir.join(RECORD_FILE), serde_json::to_vec_pretty(&record)?)?;
    Ok(record)
}

/// Seed sweeps run one seed per work item; nested estimators stay sequential.
fn sweep<T: Send>(config: &ExperimentConfig, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    map_indices(config.exec(), n, f)
}

#[derive(Serialize)]
struct StatsRow {
    substep: u64,
    moves: u64,
    cumulative_moves: u64,
}

enum Outcome {
    Sync { grid: TorusGrid, stats: SimStats, cars_before: usize },
    Poisson { grid: TorusGrid, stats: crate::dynamics::PoissonStats, cars_before: usize },
}

fn evolve(config: &ExperimentConfig, p: f64, seed: u64) -> Result<Outcome, HarnessError> {
    let grid = sample_initial(&config.dims(), &config.law(p)?, RngSeed::from(seed))?;
    let cars_before = grid.car_count();
    Ok(match config.engine() {
        EngineChoice::Poisson => {
            let (grid, stats) = run_poisson(grid, config.steps(), RngSeed::new(seed, 1));
            Outcome::Poisson { grid, stats, cars_before }
        }
        e => {
            let engine = if e == EngineChoice::Ddim { Engine::Ddim } else { Engine::Deterministic };
            let mut sim = Simulation::new(grid, engine)?.with_exec(Exec::Sequential);
            sim.run(config.steps());
            let (grid, stats) = sim.into_parts();
            Outcome::Sync { grid, stats, cars_before }
        }
    })
}

/// Summary of one run, shared by `simulate` and `phase-scan`.
fn summarize(config: &ExperimentConfig, p: f64, seed: u64, outcome: &Outcome) -> Result<Value, HarnessError> {
    Ok(match outcome {
        Outcome::Sync { grid, stats, cars_before } => {
            let (phase, speed) = if stats.cars == 0 {
                (None, None)
            } else {
                let (ph, v) = classify_phase(stats, config.steps(), config.window(), &config.thresholds())?;
                (Some(ph.label()), Some(v))
            };
            json!({
                "p": p,
                "seed": seed,
                "cars": stats.cars,
                "cars_conserved": grid.car_count() == *cars_before,
                "substeps": stats.substeps(),
                "total_moves": stats.total_moves(),
                "frozen_at": stats.frozen_at,
                "final_window_speed": speed,
                "phase": phase,
            })
        }
        Outcome::Poisson { grid, stats, cars_before } => json!({
            "p": p,
            "seed": seed,
            "cars": stats.cars,
            "cars_conserved": grid.car_count() == *cars_before,
            "events": stats.events,
            "moves": stats.moves,
            "clock": stats.clock,
            "frozen_at_event": stats.frozen_at_event,
        }),
    })
}

/// The model parameters after defaults, so a record is readable on its own.
fn model(config: &ExperimentConfig) -> Value {
    json!({
        "dims": config.dims(),
        "d": config.dimension(),
        "theta": config.theta(),
        "engine": config.engine(),
        "steps": config.steps(),
    })
}

fn simulate(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let seeds = config.seeds();
    let p = config.p();
    let outcomes = sweep(config, seeds.len(), |i| evolve(config, p, seeds[i]));
    let mut runs = Vec::new();
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        let outcome = outcome?;
        runs.push(summarize(config, p, seed, &outcome)?);
        let grid = match &outcome {
            Outcome::Sync { grid, stats, .. } => {
                let mut total = 0;
                let rows: Vec<StatsRow> = stats
                    .moves_per_substep
                    .iter()
                    .enumerate()
                    .map(|(t, &m)| {
                        total += m;
                        StatsRow {
                            substep: t as u64 + 1,
                            moves: m,
                            cumulative_moves: total,
                        }
                    })
                    .collect();
                out.table(&format!("stats_seed{seed}"), &rows)?;
                grid
            }
            Outcome::Poisson { grid, .. } => grid,
        };
        out.write(&format!("final_seed{seed}.bml"), &grid.to_snapshot())?;
        if grid.ndim() == 2 {
            out.image(&format!("final_seed{seed}"), grid, &[])?;
        }
    }
    Ok(json!({ "model": model(config), "runs": runs }))
}

#[derive(Serialize)]
struct PhaseRow {
    p: f64,
    seed: u64,
    frozen_at: Option<u64>,
    final_window_speed: Option<f64>,
    phase: Option<String>,
}

fn phase_scan(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let seeds = config.seeds();
    let ps = config.ps();
    let jobs: Vec<(f64, u64)> = ps.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let results = sweep(config, jobs.len(), |i| {
        let (p, s) = jobs[i];
        summarize(config, p, s, &evolve(config, p, s)?)
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<PhaseRow> = results
        .iter()
        .map(|r| PhaseRow {
            p: r["p"].as_f64().unwrap(),
            seed: r["seed"].as_u64().unwrap(),
            frozen_at: r["frozen_at"].as_u64(),
            final_window_speed: r["final_window_speed"].as_f64(),
            phase: r["phase"].as_str().map(String::from),
        })
        .collect();
    out.table("phases", &rows)?;
    let per_p: Vec<Value> = ps
        .iter()
        .map(|&p| {
            let mine: Vec<&PhaseRow> = rows.iter().filter(|r| r.p == p).collect();
            let count = |label: &str| mine.iter().filter(|r| r.phase.as_deref() == Some(label)).count();
            json!({
                "p": p,
                "seeds": mine.len(),
                "free_flowing": count("free-flowing"),
                "intermediate": count("intermediate"),
                "jammed": count("jammed"),
                "frozen": mine.iter().filter(|r| r.frozen_at.is_some()).count(),
            })
        })
        .collect();
    Ok(json!({ "model": model(config), "summary": per_p, "runs": results }))
}

#[derive(Serialize)]
struct CyclicRow {
    seed: u64,
    found: bool,
    steps: usize,
    displacement: String,
}

fn blocking(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let seeds = config.seeds();
    let law = config.law(config.p())?;
    let dims = config.dims();
    let found = sweep(config, seeds.len(), |i| -> Result<_, HarnessError> {
        let grid = sample_initial(&dims, &law, RngSeed::from(seeds[i]))?;
        let path = find_cyclic(&grid);
        Ok((grid, path))
    });
    let mut rows = Vec::new();
    for (&seed, r) in seeds.iter().zip(found) {
        let (grid, path) = r?;
        let disp = path.as_ref().map(|p| p.displacement(&grid)).unwrap_or_default();
        rows.push(CyclicRow {
            seed,
            found: path.is_some(),
            steps: path.as_ref().map_or(0, |p| p.steps()),
            displacement: disp.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
        });
        if let Some(path) = &path {
            out.write(&format!("cyclic_seed{seed}.json"), &serde_json::to_vec_pretty(&path.to_json())?)?;
            if config.overlay.unwrap_or(false) && grid.ndim() == 2 {
                out.image(&format!("cyclic_seed{seed}"), &grid, std::slice::from_ref(path))?;
            }
        }
    }
    out.table("cyclic", &rows)?;
    let hits = rows.iter().filter(|r| r.found).count();
    Ok(json!({
        "p": config.p(),
        "seeds": rows.len(),
        "found": hits,
        "fraction": hits as f64 / rows.len() as f64,
    }))
}

#[derive(Serialize)]
struct EstimateRow {
    p: f64,
    #[serde(rename = "M")]
    m: i64,
    k: i64,
    trials: u64,
    successes: u64,
    phat: f64,
    stderr: f64,
}

fn good_edge(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let seed = RngSeed::from(config.base_seed());
    let mode = config.mode.unwrap_or_default();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for k in config.ks() {
        let params = RenormParams::new(config.m_for(k), k)?;
        checks.push(json!({ "M": params.m, "k": k, "check": validate_params(params.m, k) }));
        let edge = match config.edge.unwrap_or_default() {
            EdgeDirection::East => RenormEdge::east([0, 0]),
            EdgeDirection::North => RenormEdge::north([0, 0]),
        };
        for p in config.ps() {
            let s = estimate_good_prob(p, &params, &edge, config.trials(), seed, mode, config.exec())?;
            rows.push(EstimateRow {
                p,
                m: s.m,
                k: s.k,
                trials: s.trials,
                successes: s.successes,
                phat: s.phat,
                stderr: s.stderr,
            });
        }
    }
    out.table("estimates", &rows)?;
    Ok(json!({ "params": checks, "estimates": rows }))
}

#[derive(Serialize)]
struct HitRow {
    y1: i64,
    y2: i64,
    k: i64,
    trials: u64,
    successes: u64,
    phat: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct MissRow {
    miss: String,
    count: u64,
}

fn target_hit(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let y = config.y();
    let seed = RngSeed::from(config.base_seed());
    let mut rows = Vec::new();
    let mut histogram = Vec::new();
    for k in config.ks() {
        let e = estimate_target_hit(y, k as u64, config.trials(), seed, config.method(), config.exec())?;
        rows.push(HitRow {
            y1: y[0],
            y2: y[1],
            k,
            trials: e.trials,
            successes: e.successes,
            phat: e.phat,
            stderr: e.stderr,
        });
        histogram = e.miss_histogram;
    }
    out.table("hits", &rows)?;
    let width = histogram.len().saturating_sub(1);
    let misses: Vec<MissRow> = histogram
        .iter()
        .enumerate()
        .map(|(i, &count)| MissRow {
            miss: if i == width { "none".into() } else { i.to_string() },
            count,
        })
        .collect();
    out.table("misses", &misses)?;
    Ok(json!({
        "y": y,
        "in_cone": in_cone(y),
        "method": config.method(),
        "estimates": rows,
        "miss_histogram": histogram,
    }))
}

#[derive(Serialize)]
struct CycleRow {
    q: f64,
    r: i64,
    trials: u64,
    successes: u64,
    phat: f64,
    stderr: f64,
}

fn skew_cycle(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let (a, b) = (config.a(), config.b());
    let seed = RngSeed::from(config.base_seed());
    let mut rows = Vec::new();
    let mut tori = Vec::new();
    for r in config.rs() {
        let spec = SkewTorusSpec::new(a, b, r)?;
        tori.push(json!({ "r": r, "vertex_count": spec.vertex_count(), "diag_ell": spec.build()?.diag_ell() }));
        for q in config.qs() {
            let e = estimate_cycle_prob(&spec, q, config.trials(), seed, config.exec())?;
            rows.push(CycleRow {
                q,
                r,
                trials: e.trials,
                successes: e.successes,
                phat: e.phat,
                stderr: e.stderr,
            });
        }
    }
    out.table("cycles", &rows)?;
    Ok(json!({
        "a": a,
        "b": b,
        "diag_ell_unit": diag_ell(a, b)?,
        "tori": tori,
        "estimates": rows,
    }))
}

#[derive(Serialize)]
struct TransitionRow {
    from: u32,
    to: u32,
    count: u64,
    empirical: f64,
    exact: f64,
}

fn wchain(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let n = config.n();
    let trace = wchain_simulate(n, config.w0.unwrap_or(0), RngSeed::from(config.base_seed()));
    let top = *trace.values.iter().max().unwrap() as usize;
    let mut counts = vec![[0u64; 3]; top + 1];
    for w in trace.values.windows(2) {
        counts[w[0] as usize][(w[1] + 1 - w[0]) as usize] += 1;
    }
    let mut rows = Vec::new();
    for (i, c) in counts.iter().enumerate() {
        let total: u64 = c.iter().sum();
        for (slot, &count) in c.iter().enumerate() {
            let j = i as i64 + slot as i64 - 1;
            if j < 0 || total == 0 {
                continue;
            }
            rows.push(TransitionRow {
                from: i as u32,
                to: j as u32,
                count,
                empirical: count as f64 / total as f64,
                exact: transition_probability(i as u32, j as u32),
            });
        }
    }
    out.table("transitions", &rows)?;
    // pooled frequencies: state 0, and every state j >= 1 by step
    let zero = counts.first().copied().unwrap_or_default();
    let pos = counts.iter().skip(1).fold([0u64; 3], |acc, c| [acc[0] + c[0], acc[1] + c[1], acc[2] + c[2]]);
    let freq = |c: [u64; 3], i: usize| {
        let t: u64 = c.iter().sum();
        if t == 0 {
            f64::NAN
        } else {
            c[i] as f64 / t as f64
        }
    };
    let pooled = json!({
        "zero": { "stay": freq(zero, 1), "up": freq(zero, 2), "visits": zero.iter().sum::<u64>() },
        "positive": { "down": freq(pos, 0), "stay": freq(pos, 1), "up": freq(pos, 2), "visits": pos.iter().sum::<u64>() },
    });
    let pi = wchain_stationary();
    let mut occupancy = vec![0u64; top + 1];
    for &w in &trace.values {
        occupancy[w as usize] += 1;
    }
    let len = trace.values.len() as f64;
    let tv = 0.5
        * (occupancy
            .iter()
            .enumerate()
            .map(|(j, &c)| (c as f64 / len - pi.probability(j as u32)).abs())
            .sum::<f64>()
            + pi.tail(top as u32));
    Ok(json!({
        "n": n,
        "pooled": pooled,
        "occupancy_tv_distance": tv,
        "max_state": top,
    }))
}

fn render(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, HarnessError> {
    let seed = config.base_seed();
    let mut grid = match &config.snapshot {
        Some(path) => TorusGrid::read_snapshot(path)?,
        None => sample_initial(&config.dims(), &config.law(config.p())?, RngSeed::from(seed))?,
    };
    let steps = config.steps();
    let mut frozen_at = None;
    if steps > 0 {
        let mut sim = Simulation::new(grid, Engine::Deterministic)?;
        sim.run(steps);
        frozen_at = sim.frozen_at();
        grid = sim.into_parts().0;
    }
    let overlay: Vec<BlockingPath> = if config.overlay.unwrap_or(false) {
        find_cyclic(&grid).into_iter().collect()
    } else {
        Vec::new()
    };
    out.image("snapshot", &grid, &overlay)?;
    Ok(json!({
        "dims": grid.dims(),
        "cars": grid.car_count(),
        "substeps": steps,
        "frozen_at": frozen_at,
        "overlay_steps": overlay.first().map(|p| p.steps()),
    }))
}
