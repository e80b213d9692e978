use std::collections::HashSet;

use bml::blocking::{successors, Branching, ChoiceMode};
use bml::par::Exec;
use bml::renorm::{
    boxes_disjoint, dependency_box, estimate_good_prob, estimate_target_hit, in_cone, is_good_edge,
    renorm_site_coords, GoodEdgeMode, HitMethod, RenormEdge, RenormParams,
};
use bml::{sample_initial, InitialLaw, SiteState, TorusGrid};
use proptest::prelude::*;

/// Independent check of goodness: depth-first search from each source,
/// confined to the box by coordinate bounds.
fn dfs_good(g: &TorusGrid, edge: &RenormEdge, params: &RenormParams) -> bool {
    let region = dependency_box(edge, params).unwrap();
    let targets: HashSet<[i64; 2]> = renorm_site_coords(edge.v, params).unwrap().into_iter().collect();
    renorm_site_coords(edge.u, params).unwrap().into_iter().all(|x| {
        if !g.get(&x).is_car() {
            return false;
        }
        let mut seen = HashSet::from([x]);
        let mut stack = vec![x];
        while let Some(z) = stack.pop() {
            if targets.contains(&z) {
                return true;
            }
            if !g.get(&z).is_car() {
                continue;
            }
            for (w, _) in successors(g, &z, Branching::Full).unwrap() {
                let w = [w[0], w[1]];
                if region.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        false
    })
}

fn box_grid(edge: &RenormEdge, params: &RenormParams, pad: usize, p: f64, seed: u64) -> TorusGrid {
    let r = dependency_box(edge, params).unwrap();
    let dims = [r.extent(0) + pad, r.extent(1) + pad];
    sample_initial(&dims, &InitialLaw::symmetric(p).unwrap(), seed.into()).unwrap()
}

fn verdicts(g: &TorusGrid, edge: &RenormEdge, params: &RenormParams) -> [bool; 4] {
    let v = |mode| is_good_edge(g, edge, params, mode).unwrap();
    let full = v(GoodEdgeMode::Full);
    if full.good {
        assert_eq!(full.witnesses.len(), 2 * params.k as usize + 1);
    }
    [full.good, v(GoodEdgeMode::Sweep).good, dfs_good(g, edge, params), v(GoodEdgeMode::EndpointOnly).good]
}

#[test]
fn full_and_sweep_agree_with_dfs() {
    let (mut goods, mut total, mut endpoint_only_wrong) = (0, 0, 0);
    for (m, k) in [(5, 2), (10, 3), (8, 0)] {
        let params = RenormParams::new(m, k).unwrap();
        for edge in [RenormEdge::east([0, 0]), RenormEdge::north([1, -1])] {
            for seed in 0..40u64 {
                let p = 0.94 + 0.04 * (seed % 4) as f64 / 3.0;
                let g = box_grid(&edge, &params, 0, p, seed);
                let [full, sweep, oracle, ends] = verdicts(&g, &edge, &params);
                assert_eq!(sweep, oracle, "sweep vs dfs, M={m} k={k} seed={seed}");
                assert_eq!(full, oracle, "full vs dfs, M={m} k={k} seed={seed}");
                // endpoints reaching is necessary but, with vacancies, not sufficient
                assert!(ends || !oracle);
                endpoint_only_wrong += (ends != oracle) as u32;
                goods += oracle as u32;
                total += 1;
            }
        }
    }
    assert!(goods > 0 && goods < total, "{goods}/{total}");
    assert!(endpoint_only_wrong > 0);
}

#[test]
fn endpoint_only_is_exact_at_density_one() {
    let mut outcomes = [0u32; 2];
    for (m, k) in [(3, 1), (5, 2), (9, 4), (13, 6)] {
        let params = RenormParams::new(m, k).unwrap();
        for edge in [RenormEdge::east([0, 0]), RenormEdge::north([0, 0])] {
            for seed in 0..100u64 {
                let g = box_grid(&edge, &params, 0, 1.0, seed);
                let [full, sweep, oracle, ends] = verdicts(&g, &edge, &params);
                assert!(full == oracle && sweep == oracle && ends == oracle, "M={m} k={k} seed={seed}");
                outcomes[oracle as usize] += 1;
            }
        }
    }
    assert!(outcomes[0] > 0 && outcomes[1] > 0, "{outcomes:?}");
}

#[test]
fn vacancy_on_source_segment_is_not_good() {
    let params = RenormParams::new(10, 2).unwrap();
    let edge = RenormEdge::east([0, 0]);
    let mut g = box_grid(&edge, &params, 0, 1.0, 9);
    g.set(&[1, -1], SiteState::Empty);
    for mode in [GoodEdgeMode::Full, GoodEdgeMode::Sweep, GoodEdgeMode::EndpointOnly] {
        assert!(!is_good_edge(&g, &edge, &params, mode).unwrap().good);
    }
    let empty = TorusGrid::empty(&[200, 200]).unwrap();
    assert!(!is_good_edge(&empty, &edge, &params, GoodEdgeMode::Sweep).unwrap().good);
    let small = TorusGrid::empty(&[50, 50]).unwrap();
    assert!(is_good_edge(&small, &edge, &params, GoodEdgeMode::Sweep).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn verdict_ignores_sites_outside_the_box(seed in any::<u64>(), noise in any::<u64>(), p in 0.95f64..=1.0) {
        let params = RenormParams::new(6, 2).unwrap();
        let edge = RenormEdge::east([0, 0]);
        let region = dependency_box(&edge, &params).unwrap();
        let g = box_grid(&edge, &params, 12, p, seed);
        let other = sample_initial(g.dims(), &InitialLaw::symmetric(0.5).unwrap(), noise.into()).unwrap();
        let mut h = g.clone();
        for i in 0..g.len() {
            let z = g.coords(i);
            // the box lies at negative coordinates too; compare modulo the torus
            let inside = (region.lo[0]..=region.hi[0]).any(|x| x.rem_euclid(g.dims()[0] as i64) == z[0])
                && (region.lo[1]..=region.hi[1]).any(|y| y.rem_euclid(g.dims()[1] as i64) == z[1]);
            if !inside {
                h.set(&z, other.get(&z));
            }
        }
        for mode in [GoodEdgeMode::Sweep, GoodEdgeMode::Full] {
            prop_assert_eq!(
                is_good_edge(&g, &edge, &params, mode).unwrap().good,
                is_good_edge(&h, &edge, &params, mode).unwrap().good
            );
        }
    }

    #[test]
    fn segments_are_anti_diagonal(u0 in -5i64..5, u1 in -5i64..5, k in 0i64..6, extra in 1i64..20) {
        let params = RenormParams::new(2 * k + extra, k).unwrap();
        let sites = renorm_site_coords([u0, u1], &params).unwrap();
        prop_assert_eq!(sites.len(), 2 * k as usize + 1);
        let line = sites[0][0] + sites[0][1];
        prop_assert!(sites.iter().all(|s| s[0] + s[1] == line));
        let distinct: HashSet<_> = sites.iter().collect();
        prop_assert_eq!(distinct.len(), sites.len());
    }
}

#[test]
fn far_edges_have_disjoint_boxes() {
    for (m, k) in [(200, 10), (20, 1), (41, 20)] {
        let params = RenormParams::new(m, k).unwrap();
        let mut edges = Vec::new();
        for a in (-40..=40).step_by(8) {
            for b in (-40..=40).step_by(8) {
                edges.push(RenormEdge::east([a, b]));
                edges.push(RenormEdge::north([a + 3, b - 1]));
            }
        }
        let boxes: Vec<_> = edges.iter().map(|e| dependency_box(e, &params).unwrap()).collect();
        let mut far = 0;
        for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                if edges[i].distance(&edges[j]) >= 30 {
                    far += 1;
                    assert!(boxes_disjoint(&boxes[i], &boxes[j]), "{:?} {:?}", edges[i], edges[j]);
                }
            }
        }
        assert!(far > 10_000);
        let a = dependency_box(&RenormEdge::east([0, 0]), &params).unwrap();
        let b = dependency_box(&RenormEdge::north([1, 0]), &params).unwrap();
        assert!(!boxes_disjoint(&a, &b));
    }
}

#[test]
fn zero_density_is_never_good() {
    let params = RenormParams::new(10, 2).unwrap();
    let s = estimate_good_prob(0.0, &params, &RenormEdge::east([0, 0]), 20, 1.into(), GoodEdgeMode::Sweep, Exec::Parallel)
        .unwrap();
    assert_eq!(s.successes, 0);
    assert_eq!(s.phat, 0.0);
}

#[test]
fn segment_target_reached_at_full_density() {
    // half-width 8 around (30, 30), searched over every blocking path
    let e = estimate_target_hit([30, 30], 8, 400, 5.into(), HitMethod::Search, Exec::Parallel).unwrap();
    assert!(e.in_cone);
    assert!(e.phat >= 0.99, "{}", e.phat);
    let out = estimate_target_hit([200, 20], 5, 4, 5.into(), HitMethod::Search, Exec::Sequential).unwrap();
    assert!(!out.in_cone && !in_cone([200, 20]));
}

/// Least-squares fit of `ys` on `xs`, returning `(slope, r_squared)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

#[test]
fn greedy_miss_tail_is_log_linear() {
    let e = estimate_target_hit([60, 60], 0, 20_000, 21.into(), HitMethod::Greedy(ChoiceMode::Alternate), Exec::Parallel)
        .unwrap();
    let h = &e.miss_histogram;
    let ks = [2usize, 4, 8];
    let tails: Vec<f64> = ks.iter().map(|&k| h[k + 1..].iter().sum::<u64>() as f64 / e.trials as f64).collect();
    assert!(tails.windows(2).all(|w| w[0] > w[1]), "{tails:?}");
    assert!(tails[2] > 0.0);
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = tails.iter().map(|t| t.ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    assert!(slope < 0.0 && r2 >= 0.95, "slope {slope}, r2 {r2}");
}
