//! Experiment configuration: a versioned JSON document, validated field by
//! field before anything runs.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::phase::PhaseThresholds;
use crate::blocking::ChoiceMode;
use crate::error::BmlError;
use crate::lattice::{InitialLaw, TorusGrid};
use crate::par::Exec;
use crate::percolation::SkewTorusSpec;
use crate::renorm::{GoodEdgeMode, HitMethod, RenormParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    PhaseScan,
    Blocking,
    GoodEdge,
    TargetHit,
    SkewCycle,
    Wchain,
    Render,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Simulate,
        ExperimentKind::PhaseScan,
        ExperimentKind::Blocking,
        ExperimentKind::GoodEdge,
        ExperimentKind::TargetHit,
        ExperimentKind::SkewCycle,
        ExperimentKind::Wchain,
        ExperimentKind::Render,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::PhaseScan => "phase-scan",
            ExperimentKind::Blocking => "blocking",
            ExperimentKind::GoodEdge => "good-edge",
            ExperimentKind::TargetHit => "target-hit",
            ExperimentKind::SkewCycle => "skew-cycle",
            ExperimentKind::Wchain => "wchain",
            ExperimentKind::Render => "render",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    #[default]
    Deterministic,
    Ddim,
    /// Independent rate-1 clocks; `steps` then counts clock rings.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDirection {
    #[default]
    East,
    North,
}

/// Every field but `kind` is optional; the accessors below supply defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub kind: ExperimentKind,
    pub dims: Option<Vec<usize>>,
    pub p: Option<f64>,
    /// Densities for phase scans and good-edge sweeps.
    pub ps: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub d: Option<usize>,
    pub engine: Option<EngineChoice>,
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    /// Explicit seed list; otherwise `runs` consecutive seeds from `seed`.
    pub seeds: Option<Vec<u64>>,
    pub runs: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<TableFormat>,
    pub png: Option<bool>,
    /// Length of the final measurement window, in sub-steps.
    pub window: Option<u64>,
    pub thresholds: Option<PhaseThresholds>,
    pub m: Option<i64>,
    pub k: Option<i64>,
    pub ks: Option<Vec<i64>>,
    pub mode: Option<GoodEdgeMode>,
    pub edge: Option<EdgeDirection>,
    pub y: Option<[i64; 2]>,
    pub method: Option<HitMethod>,
    pub q: Option<f64>,
    pub qs: Option<Vec<f64>>,
    pub a: Option<[i64; 2]>,
    pub b: Option<[i64; 2]>,
    pub r: Option<i64>,
    pub rs: Option<Vec<i64>>,
    pub trials: Option<u64>,
    /// Walk length for the W-chain experiment.
    pub n: Option<usize>,
    pub w0: Option<u32>,
    /// Configuration file to load instead of sampling one.
    pub snapshot: Option<PathBuf>,
    /// Overlay a cyclic blocking path, when one exists.
    pub overlay: Option<bool>,
    pub threads: Option<usize>,
    pub exec: Option<Exec>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug)]
pub enum HarnessError {
    /// The configuration was rejected before anything ran.
    Config(Vec<FieldError>),
    Runtime(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(errors) => {
                write!(f, "invalid configuration")?;
                for e in errors {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
            HarnessError::Runtime(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<BmlError> for HarnessError {
    fn from(e: BmlError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

fn json_field_error(e: &serde_json::Error) -> FieldError {
    let msg = e.to_string();
    // serde names the offending key between backticks
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
        .unwrap_or("<document>");
    FieldError::new(field, msg.clone())
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig::from_value(serde_json::json!({ "kind": kind })).expect("bare config parses")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(vec![json_field_error(&e)]))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, HarnessError> {
        serde_json::from_value(value).map_err(|e| HarnessError::Config(vec![json_field_error(&e)]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dims(&self) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| vec![200; self.d.unwrap_or(2)])
    }

    pub fn dimension(&self) -> usize {
        self.dims.as_ref().map_or(self.d.unwrap_or(2), |d| d.len())
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(match self.kind {
            ExperimentKind::Blocking => 0.96,
            ExperimentKind::GoodEdge => 1.0,
            _ => 0.8,
        })
    }

    pub fn ps(&self) -> Vec<f64> {
        match (&self.ps, self.kind) {
            (Some(ps), _) => ps.clone(),
            (None, ExperimentKind::PhaseScan) if self.p.is_none() => vec![0.1, 0.3, 0.32, 0.34, 0.8],
            _ => vec![self.p()],
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(0.5)
    }

    pub fn law(&self, p: f64) -> Result<InitialLaw, BmlError> {
        InitialLaw::new(p, self.theta(), self.dimension())
    }

    pub fn engine(&self) -> EngineChoice {
        self.engine.unwrap_or(if self.dimension() == 2 {
            EngineChoice::Deterministic
        } else {
            EngineChoice::Ddim
        })
    }

    pub fn steps(&self) -> u64 {
        match (self.steps, self.engine(), self.kind) {
            (Some(s), _, _) => s,
            (None, _, ExperimentKind::Render) => 0,
            (None, EngineChoice::Poisson, _) => 10_000_000,
            _ => 20_000,
        }
    }

    /// Sorted, de-duplicated seed list.
    pub fn seeds(&self) -> Vec<u64> {
        let mut seeds = match &self.seeds {
            Some(s) => s.clone(),
            None => {
                let first = self.seed.unwrap_or(0);
                (0..self.runs.unwrap_or(1)).map(|i| first.wrapping_add(i)).collect()
            }
        };
        seeds.sort_unstable();
        seeds.dedup();
        seeds
    }

    /// Seed for single-stream experiments.
    pub fn base_seed(&self) -> u64 {
        self.seed.or_else(|| self.seeds.as_ref().and_then(|s| s.iter().min().copied())).unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("bml-out"))
    }

    pub fn format(&self) -> TableFormat {
        self.format.unwrap_or_default()
    }

    pub fn window(&self) -> u64 {
        self.window.unwrap_or(1_000).min(self.steps().max(1))
    }

    pub fn thresholds(&self) -> PhaseThresholds {
        self.thresholds.unwrap_or_default()
    }

    pub fn ks(&self) -> Vec<i64> {
        self.ks.clone().unwrap_or_else(|| {
            vec![self.k.unwrap_or(match self.kind {
                ExperimentKind::TargetHit => 2,
                _ => 10,
            })]
        })
    }

    /// `M` for a given `k`, defaulting to `20k`.
    pub fn m_for(&self, k: i64) -> i64 {
        self.m.unwrap_or(20 * k.max(1))
    }

    pub fn y(&self) -> [i64; 2] {
        self.y.unwrap_or([40, 40])
    }

    pub fn method(&self) -> HitMethod {
        self.method.unwrap_or(HitMethod::Greedy(ChoiceMode::Alternate))
    }

    pub fn qs(&self) -> Vec<f64> {
        self.qs.clone().unwrap_or_else(|| vec![self.q.unwrap_or(0.8)])
    }

    pub fn a(&self) -> [i64; 2] {
        self.a.unwrap_or([6, -3])
    }

    pub fn b(&self) -> [i64; 2] {
        self.b.unwrap_or([-2, 4])
    }

    pub fn rs(&self) -> Vec<i64> {
        self.rs.clone().unwrap_or_else(|| vec![self.r.unwrap_or(1)])
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(100)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(1_000_000)
    }

    pub fn exec(&self) -> Exec {
        self.exec.unwrap_or_default()
    }

    /// Check every parameter the chosen experiment reads, collecting all
    /// problems rather than stopping at the first.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut errs = Vec::new();
        let mut check = |field: &str, r: Result<(), BmlError>| {
            if let Err(e) = r {
                let msg = match e {
                    BmlError::Parameter { reason, .. } => reason,
                    other => other.to_string(),
                };
                errs.push(FieldError::new(field, msg));
            }
        };
        let fail = |reason: String| Err(BmlError::Precondition(reason));
        use ExperimentKind as K;

        if self.version != SCHEMA_VERSION {
            check("version", fail(format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version)));
        }
        if let Some(t) = self.threads {
            if t == 0 {
                check("threads", fail("must be at least 1".into()));
            }
        }
        let grid_kind = matches!(self.kind, K::Simulate | K::PhaseScan | K::Blocking | K::Render);
        if grid_kind {
            if let (Some(dims), Some(d)) = (&self.dims, self.d) {
                if dims.len() != d {
                    check("d", fail(format!("d={d} disagrees with dims of length {}", dims.len())));
                }
            }
            check("dims", TorusGrid::empty(&self.dims()).map(|_| ()));
            let field = if self.ps.is_some() { "ps" } else { "p" };
            for p in self.ps() {
                // theta and d problems are reported under their own names
                match self.law(p) {
                    Err(BmlError::Parameter { name, reason }) if name != "p" => check(name, fail(reason)),
                    r => check(field, r.map(|_| ())),
                }
            }
            if self.ps().is_empty() {
                check("ps", fail("needs at least one density".into()));
            }
            if self.seeds().is_empty() {
                check("seeds", fail("needs at least one seed".into()));
            }
            if self.engine() == EngineChoice::Deterministic && self.dimension() != 2 {
                check("engine", fail("the deterministic engine is two-dimensional".into()));
            }
            if self.steps() == 0 && self.kind != K::Render {
                check("steps", fail("must be at least 1".into()));
            }
            if self.window == Some(0) {
                check("window", fail("must be at least 1".into()));
            }
            let th = self.thresholds();
            if !(0.0 <= th.low && th.low <= th.high) {
                check("thresholds", fail(format!("need 0 <= low <= high, got {th:?}")));
            }
            if matches!(self.kind, K::Render) && self.dimension() != 2 {
                check("dims", Err(BmlError::Unsupported("rendering needs a 2-d grid".into())));
            }
        }
        if matches!(self.kind, K::GoodEdge | K::TargetHit | K::SkewCycle) && self.trials() == 0 {
            check("trials", fail("must be at least 1".into()));
        }
        match self.kind {
            K::GoodEdge => {
                for p in self.ps() {
                    check(if self.ps.is_some() { "ps" } else { "p" }, InitialLaw::symmetric(p).map(|_| ()));
                }
                if self.ks().is_empty() {
                    check("ks", fail("needs at least one k".into()));
                }
                for k in self.ks() {
                    let field = if self.m.is_some() { "m" } else { "k" };
                    check(field, RenormParams::new(self.m_for(k), k).map(|_| ()));
                }
            }
            K::TargetHit => {
                let y = self.y();
                if y[0] + y[1] < 0 {
                    check("y", fail("target line lies behind the origin".into()));
                }
                if self.ks().iter().any(|&k| k < 0) {
                    check("k", fail("must be non-negative".into()));
                }
            }
            K::SkewCycle => {
                for q in self.qs() {
                    if !(0.0..=1.0).contains(&q) {
                        check(if self.qs.is_some() { "qs" } else { "q" }, fail(format!("must lie in [0, 1], got {q}")));
                    }
                }
                for r in self.rs() {
                    let field = if self.rs.is_some() { "rs" } else { "r" };
                    check(field, SkewTorusSpec::new(self.a(), self.b(), r).map(|_| ()));
                }
            }
            K::Wchain if self.n() == 0 => check("n", fail("must be at least 1".into())),
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(errs))
        }
    }
}
