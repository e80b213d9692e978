use super::{offset, unit, Branching, Site, StepKind};
use crate::error::{BmlError, Result};
use crate::lattice::{SiteState, TorusGrid};

fn require_car(grid: &TorusGrid, z: &[i64]) -> Result<usize> {
    if z.len() != grid.ndim() {
        return Err(BmlError::Precondition(format!(
            "site has {} coordinates on a {}-d grid",
            z.len(),
            grid.ndim()
        )));
    }
    match grid.get(z) {
        SiteState::Car(dir) => Ok(dir.axis()),
        SiteState::Empty => Err(BmlError::Precondition(format!(
            "no blocking step starts at the vacancy {z:?}"
        ))),
    }
}

/// Coin key of the contested site in front of a car heading along `axis`.
fn coin_key(grid: &TorusGrid, contested: &[i64], axis: usize) -> usize {
    grid.index(contested) * grid.ndim() + axis
}

/// Blocking steps out of `z` on a 2-d grid, cases i-iv.
pub fn successors(grid: &TorusGrid, z: &[i64], mode: Branching<'_>) -> Result<Vec<(Vec<i64>, StepKind)>> {
    if grid.ndim() != 2 {
        return Err(BmlError::Unsupported("the i-iv step cases are two-dimensional".into()));
    }
    require_car(grid, z)?;
    let mut out = Vec::with_capacity(2);
    successors_2d(grid, [z[0], z[1]], mode, &mut out);
    Ok(out.into_iter().map(|(s, k)| (s.to_vec(), k)).collect())
}

/// Allocation-free variant for search loops. `z` must hold a car.
pub(crate) fn successors_2d(
    grid: &TorusGrid,
    z: Site,
    mode: Branching<'_>,
    out: &mut Vec<(Site, StepKind)>,
) {
    out.clear();
    let [x, y] = z;
    let here = grid.at(x, y);
    let coin = |w: Site, axis: usize| match mode {
        Branching::Full => true,
        Branching::Coins(field) => field.allows(coin_key(grid, &w, axis)),
    };
    if here == SiteState::EAST {
        out.push(([x + 1, y], StepKind::I));
        if grid.at(x + 1, y) == SiteState::EAST
            && grid.at(x + 1, y - 1) == SiteState::NORTH
            && coin([x + 1, y], 0)
        {
            out.push(([x + 1, y + 1], StepKind::III));
        }
    } else if here == SiteState::NORTH {
        out.push(([x, y + 1], StepKind::II));
        if grid.at(x, y + 1) == SiteState::NORTH
            && grid.at(x - 1, y + 1) == SiteState::EAST
            && coin([x, y + 1], 1)
        {
            out.push(([x + 1, y + 1], StepKind::IV));
        }
    }
}

/// Which direction's car takes the vacancy left when the car in front of `z`
/// advances. The vacancy appears during the sub-step of the blocker's axis
/// `b`; the sub-steps that follow serve axes `b+1, b+2, ...` (mod d), and the
/// first of those with a car pointing into the vacancy claims it. `None` when
/// `z` is empty or the site ahead is empty.
pub fn race_winner(grid: &TorusGrid, z: &[i64]) -> Option<usize> {
    let d = grid.ndim();
    let a = grid.get(z).direction()?.axis();
    let w = offset(z, &unit(d, a));
    let b = grid.get(&w).direction()?.axis();
    (1..=d).map(|s| (b + s) % d).find(|&x| {
        if x == a {
            return true;
        }
        let mut behind = w.clone();
        behind[x] -= 1;
        grid.get(&behind) == SiteState::Car(crate::lattice::Direction(x as u8))
    })
}

/// Blocking steps out of `z` in any dimension: always the straight step, plus
/// the diagonal step towards the race winner when that winner is not `z`'s
/// own car. On a 2-d grid this reproduces cases i-iv.
pub fn ddim_successors(grid: &TorusGrid, z: &[i64], mode: Branching<'_>) -> Result<Vec<(Vec<i64>, StepKind)>> {
    let d = grid.ndim();
    let a = require_car(grid, z)?;
    let w = offset(z, &unit(d, a));
    let mut out = vec![(w.clone(), StepKind::DForward)];
    if let Some(c) = race_winner(grid, z).filter(|&c| c != a) {
        let allowed = match mode {
            Branching::Full => true,
            Branching::Coins(field) => field.allows(coin_key(grid, &w, a)),
        };
        if allowed {
            let mut next = w;
            next[c] += 1;
            out.push((next, StepKind::DDiag(c as u8)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocking::{step_is_licensed, CoinField};
    use crate::lattice::{Direction, SiteState::*};
    use std::collections::BTreeSet;

    const STATES: [SiteState; 3] = [Empty, SiteState::EAST, SiteState::NORTH];

    /// Every assignment of the five cells that matter around (2,2).
    #[test]
    fn ddim_rule_reduces_to_cases_i_to_iv() {
        let cells = [(2, 2), (3, 2), (3, 1), (2, 3), (1, 3)];
        for code in 0..3usize.pow(5) {
            let mut g = TorusGrid::empty(&[6, 6]).unwrap();
            let mut c = code;
            for &(x, y) in &cells {
                g.set_at(x, y, STATES[c % 3]);
                c /= 3;
            }
            let z = [2i64, 2];
            if g.get(&z) == Empty {
                assert!(successors(&g, &z, Branching::Full).is_err());
                assert!(ddim_successors(&g, &z, Branching::Full).is_err());
                continue;
            }
            let two: BTreeSet<Vec<i64>> = successors(&g, &z, Branching::Full)
                .unwrap()
                .into_iter()
                .map(|(s, _)| s)
                .collect();
            let gen: BTreeSet<Vec<i64>> = ddim_successors(&g, &z, Branching::Full)
                .unwrap()
                .into_iter()
                .map(|(s, _)| s)
                .collect();
            assert_eq!(two, gen, "pattern {code}");
            for (s, k) in successors(&g, &z, Branching::Full).unwrap() {
                assert!(step_is_licensed(&g, &z, &s, k));
            }
            for (s, k) in ddim_successors(&g, &z, Branching::Full).unwrap() {
                assert!(step_is_licensed(&g, &z, &s, k));
            }
            // completeness: nothing licensed is missing
            for k in [StepKind::I, StepKind::II, StepKind::III, StepKind::IV] {
                for dx in 0..=1 {
                    for dy in 0..=1 {
                        let t = [2 + dx, 2 + dy];
                        if step_is_licensed(&g, &z, &t, k) {
                            assert!(two.iter().any(|w| w[..] == t[..]));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn listed_examples() {
        let mut g = TorusGrid::empty(&[6, 6]).unwrap();
        g.set_at(2, 2, SiteState::EAST);
        g.set_at(3, 2, SiteState::NORTH);
        assert_eq!(
            successors(&g, &[2, 2], Branching::Full).unwrap(),
            vec![(vec![3, 2], StepKind::I)]
        );
        g.set_at(3, 2, SiteState::EAST);
        g.set_at(3, 1, SiteState::NORTH);
        assert_eq!(
            successors(&g, &[2, 2], Branching::Full).unwrap(),
            vec![(vec![3, 2], StepKind::I), (vec![3, 3], StepKind::III)]
        );
        let mut h = TorusGrid::empty(&[6, 6]).unwrap();
        h.set_at(2, 2, SiteState::NORTH);
        h.set_at(2, 3, SiteState::NORTH);
        h.set_at(1, 3, SiteState::EAST);
        assert_eq!(
            successors(&h, &[2, 2], Branching::Full).unwrap(),
            vec![(vec![2, 3], StepKind::II), (vec![3, 3], StepKind::IV)]
        );
    }

    #[test]
    fn three_dimensional_race() {
        let car = |a: u8| SiteState::Car(Direction(a));
        let mut g = TorusGrid::empty(&[5, 5, 5]).unwrap();
        g.set(&[1, 1, 1], car(0));
        g.set(&[2, 1, 1], car(1));
        g.set(&[2, 1, 0], car(2));
        let s = ddim_successors(&g, &[1, 1, 1], Branching::Full).unwrap();
        assert_eq!(
            s,
            vec![(vec![2, 1, 1], StepKind::DForward), (vec![2, 1, 2], StepKind::DDiag(2))]
        );
        // blocker along axis 2: the order is 0, 1, 2, so our own car wins
        g.set(&[2, 1, 1], car(2));
        let s = ddim_successors(&g, &[1, 1, 1], Branching::Full).unwrap();
        assert_eq!(s.len(), 1);
        // nothing ahead
        g.set(&[2, 1, 1], Empty);
        let s = ddim_successors(&g, &[1, 1, 1], Branching::Full).unwrap();
        assert_eq!(s, vec![(vec![2, 1, 1], StepKind::DForward)]);
    }

    #[test]
    fn coin_modes() {
        let law = crate::lattice::InitialLaw::symmetric(1.0).unwrap();
        let g = crate::lattice::sample_initial(&[12, 12], &law, 9.into()).unwrap();
        let yes = CoinField::AllTrue;
        let no = CoinField::AllFalse;
        let rnd = CoinField::Random { seed: 3 };
        let mut offered = 0;
        let mut kept = 0;
        for x in 0..12 {
            for y in 0..12 {
                let z = [x, y];
                let full = successors(&g, &z, Branching::Full).unwrap();
                assert_eq!(successors(&g, &z, Branching::Coins(&yes)).unwrap(), full);
                let pruned = successors(&g, &z, Branching::Coins(&no)).unwrap();
                assert!(pruned.iter().all(|(_, k)| matches!(k, StepKind::I | StepKind::II)));
                assert_eq!(pruned.len(), 1);
                let r1 = successors(&g, &z, Branching::Coins(&rnd)).unwrap();
                let r2 = successors(&g, &z, Branching::Coins(&rnd)).unwrap();
                assert_eq!(r1, r2);
                offered += full.len() - 1;
                kept += r1.len() - 1;
            }
        }
        assert!(offered > 10 && kept > 0 && kept < offered);
    }
}
