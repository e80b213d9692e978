use serde::{Deserialize, Serialize};

use super::{BlockingPath, Site, StepKind};
use crate::error::{param, Result};
use crate::lattice::{SiteState, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceMode {
    /// Choices only at the even diagonal lines.
    #[default]
    Alternate,
    /// The closer option whenever a diagonal step is available.
    All,
}

/// Distances of a path from the target's diagonal, sampled at the even lines
/// `z1 + z2 = s + 2n` where `s` is the line of the start site.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WTrace {
    pub values: Vec<u32>,
    /// The site whose anti-diagonal offset the values measure.
    pub target: Option<Site>,
    pub crossings: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    pub path: BlockingPath,
    pub trace: WTrace,
}

/// Construction stopped at a vacancy.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyFailure {
    pub partial: GreedyPath,
    pub empty_site: Site,
}

/// `W` along a path: at each even line the first site on or beyond it, with
/// `W = ceil(|D| / 2)` where `D = (z1 - z2) - (y1 - y2)`. In alternate mode
/// every even line is visited and `D` is even there.
pub fn w_trace_from_sites(sites: &[Vec<i64>], target: Site) -> WTrace {
    let mut trace = WTrace {
        target: Some(target),
        ..WTrace::default()
    };
    let Some(first) = sites.first() else {
        return trace;
    };
    let base = first[0] + first[1];
    let mut line = base;
    for z in sites {
        if z[0] + z[1] >= line {
            let d = ((z[0] - z[1]) - (target[0] - target[1])).unsigned_abs();
            trace.values.push(d.div_ceil(2) as u32);
            trace.crossings.push([z[0], z[1]]);
            line = z[0] + z[1] + 2 - (z[0] + z[1] - base) % 2;
        }
    }
    trace
}

struct Builder<'a> {
    grid: &'a TorusGrid,
    sites: Vec<Vec<i64>>,
    kinds: Vec<StepKind>,
}

impl Builder<'_> {
    fn here(&self) -> Site {
        let z = self.sites.last().unwrap();
        [z[0], z[1]]
    }

    fn state(&self, dx: i64, dy: i64) -> Result<SiteState, Site> {
        let [x, y] = self.here();
        match self.grid.at(x + dx, y + dy) {
            SiteState::Empty => Err([x + dx, y + dy]),
            s => Ok(s),
        }
    }

    fn push(&mut self, dx: i64, dy: i64, kind: StepKind) {
        let [x, y] = self.here();
        self.sites.push(vec![x + dx, y + dy]);
        self.kinds.push(kind);
    }

    /// One round of the alternate-mode rule from an even line to the next.
    fn round(&mut self, target: Site) -> Result<(), Site> {
        let [x, y] = self.here();
        let d = (x - y) - (target[0] - target[1]);
        let me = self.state(0, 0)?;
        if me == SiteState::EAST {
            let ahead = self.state(1, 0)?;
            if ahead == SiteState::NORTH {
                self.push(1, 0, StepKind::I);
                self.push(0, 1, StepKind::II);
                return Ok(());
            }
            let below = self.state(1, -1)?;
            if below == SiteState::NORTH && d >= 0 {
                self.push(1, 1, StepKind::III);
            } else {
                self.push(1, 0, StepKind::I);
                self.push(1, 0, StepKind::I);
            }
        } else {
            let ahead = self.state(0, 1)?;
            if ahead == SiteState::EAST {
                self.push(0, 1, StepKind::II);
                self.push(1, 0, StepKind::I);
                return Ok(());
            }
            let left = self.state(-1, 1)?;
            if left == SiteState::EAST && d <= 0 {
                self.push(1, 1, StepKind::IV);
            } else {
                self.push(0, 1, StepKind::II);
                self.push(0, 1, StepKind::II);
            }
        }
        Ok(())
    }

    /// One step of the all-mode rule; never jumps past `last_line`.
    fn single(&mut self, target: Site, last_line: i64) -> Result<(), Site> {
        let [x, y] = self.here();
        let d = (x - y) - (target[0] - target[1]);
        let room = x + y + 2 <= last_line;
        let me = self.state(0, 0)?;
        if me == SiteState::EAST {
            let diag = room
                && d >= 0
                && self.state(1, 0)? == SiteState::EAST
                && self.state(1, -1)? == SiteState::NORTH;
            if diag {
                self.push(1, 1, StepKind::III);
            } else {
                self.push(1, 0, StepKind::I);
            }
        } else {
            let diag = room
                && d <= 0
                && self.state(0, 1)? == SiteState::NORTH
                && self.state(-1, 1)? == SiteState::EAST;
            if diag {
                self.push(1, 1, StepKind::IV);
            } else {
                self.push(0, 1, StepKind::II);
            }
        }
        Ok(())
    }

    fn finish(self, target: Site) -> GreedyPath {
        let trace = w_trace_from_sites(&self.sites, target);
        GreedyPath {
            path: BlockingPath {
                sites: self.sites,
                kinds: self.kinds,
                cyclic: false,
            },
            trace,
        }
    }
}

/// Build a blocking path from `start` to the anti-diagonal line of `target`,
/// steering towards `target` whenever a diagonal step offers a choice.
///
/// In alternate mode a target on a line of the wrong parity is handled by
/// steering to `target - (1,0)` and then extending by one straight step; the
/// trace then refers to the shifted target. All mode walks straight to the
/// target's line.
pub fn greedy_construct(
    grid: &TorusGrid,
    start: Site,
    target: Site,
    mode: ChoiceMode,
) -> Result<Result<GreedyPath, GreedyFailure>> {
    if grid.ndim() != 2 {
        return Err(param("grid", "the greedy constructor is two-dimensional"));
    }
    let lines = (target[0] + target[1]) - (start[0] + start[1]);
    if lines < 0 {
        return Err(param("target", "target line lies behind the start"));
    }
    let mut b = Builder {
        grid,
        sites: vec![start.to_vec()],
        kinds: Vec::new(),
    };
    let (aim, extend) = match mode {
        ChoiceMode::Alternate if lines % 2 == 1 => ([target[0] - 1, target[1]], true),
        _ => (target, false),
    };
    let last_line = aim[0] + aim[1];
    let outcome = (|| {
        while b.here()[0] + b.here()[1] < last_line {
            match mode {
                ChoiceMode::Alternate => b.round(aim)?,
                ChoiceMode::All => b.single(aim, last_line)?,
            }
        }
        if extend {
            match b.state(0, 0)? {
                SiteState::EAST => b.push(1, 0, StepKind::I),
                _ => b.push(0, 1, StepKind::II),
            }
        }
        Ok(())
    })();
    Ok(match outcome {
        Ok(()) => Ok(b.finish(aim)),
        Err(empty_site) => Err(GreedyFailure {
            partial: b.finish(aim),
            empty_site,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocking::validate_path;
    use crate::lattice::{sample_initial, InitialLaw};

    #[test]
    fn all_east_runs_due_east() {
        let mut g = TorusGrid::empty(&[30, 30]).unwrap();
        for x in 0..30 {
            for y in 0..30 {
                g.set_at(x, y, SiteState::EAST);
            }
        }
        let out = greedy_construct(&g, [0, 0], [10, 0], ChoiceMode::Alternate).unwrap().unwrap();
        assert_eq!(out.path.sites.last().unwrap(), &vec![10, 0]);
        assert!(out.path.kinds.iter().all(|&k| k == StepKind::I));
        assert_eq!(out.trace.values, vec![5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn paths_validate_and_traces_match() {
        let law = InitialLaw::symmetric(1.0).unwrap();
        for seed in 0..20u64 {
            let g = sample_initial(&[128, 128], &law, seed.into()).unwrap();
            for (target, mode) in [
                ([40, 44], ChoiceMode::Alternate),
                ([41, 44], ChoiceMode::Alternate),
                ([50, 30], ChoiceMode::All),
                ([33, 40], ChoiceMode::All),
            ] {
                let out = greedy_construct(&g, [0, 0], target, mode).unwrap().unwrap();
                assert!(validate_path(&g, &out.path));
                let end = out.path.sites.last().unwrap();
                assert_eq!(end[0] + end[1], target[0] + target[1]);
                let aim = out.trace.target.unwrap();
                assert_eq!(out.trace, w_trace_from_sites(&out.path.sites, aim));
                for w in out.trace.values.windows(2) {
                    assert!(w[0].abs_diff(w[1]) <= 1);
                }
            }
        }
    }

    #[test]
    fn vacancy_reports_partial_path() {
        let law = InitialLaw::symmetric(1.0).unwrap();
        let mut g = sample_initial(&[64, 64], &law, 1.into()).unwrap();
        for x in 0..64i64 {
            for y in 0..64i64 {
                if x + y == 20 {
                    g.set_at(x, y, SiteState::Empty);
                }
            }
        }
        let fail = greedy_construct(&g, [0, 0], [20, 20], ChoiceMode::Alternate)
            .unwrap()
            .unwrap_err();
        assert!(validate_path(&g, &fail.partial.path));
        assert!(fail.empty_site[0] + fail.empty_site[1] >= 20);
        assert!(greedy_construct(&g, [5, 5], [1, 1], ChoiceMode::All).is_err());
    }
}
