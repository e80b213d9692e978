use std::collections::HashSet;

use bml::graph::tarjan_scc;
use bml::par::Exec;
use bml::percolation::{diag_ell, estimate_theta_curve, BondGraph, BondUniforms, SkewTorus, SkewTorusSpec, Window};
use proptest::prelude::*;

/// Whether `d` lies in the lattice spanned by `u` and `w`, by Cramer's rule.
fn in_lattice(d: [i64; 2], u: [i64; 2], w: [i64; 2]) -> bool {
    let det = u[0] * w[1] - u[1] * w[0];
    let s = d[0] * w[1] - d[1] * w[0];
    let t = u[0] * d[1] - u[1] * d[0];
    s % det == 0 && t % det == 0
}

fn generators(spec: &SkewTorusSpec) -> ([i64; 2], [i64; 2]) {
    let r = spec.r;
    ([spec.a[0] * r, spec.a[1] * r], [spec.b[0] * r, spec.b[1] * r])
}

fn spec_strategy() -> impl Strategy<Value = SkewTorusSpec> {
    (-6i64..=6, -6i64..=6, -6i64..=6, -6i64..=6, 1i64..=3)
        .prop_filter("independent", |&(a0, a1, b0, b1, _)| a0 * b1 - a1 * b0 != 0)
        .prop_map(|(a0, a1, b0, b1, r)| SkewTorusSpec::new([a0, a1], [b0, b1], r).unwrap())
}

/// Open out-neighbours of every vertex, from `is_open` and `canonicalize` alone.
fn open_adjacency(t: &SkewTorus, config: &bml::percolation::OrientedBondConfig) -> Vec<Vec<usize>> {
    (0..t.vertex_count())
        .map(|v| {
            let x = t.representative(v);
            (0..2)
                .filter(|&d| config.is_open(x, d).unwrap())
                .map(|d| t.canonicalize(if d == 0 { [x[0] + 1, x[1]] } else { [x[0], x[1] + 1] }))
                .collect()
        })
        .collect()
}

/// Kahn's algorithm: a digraph is acyclic iff repeatedly deleting sources empties it.
fn has_cycle_by_peeling(adj: &[Vec<usize>]) -> bool {
    let mut indeg = vec![0usize; adj.len()];
    for outs in adj {
        for &w in outs {
            indeg[w] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..adj.len()).filter(|&v| indeg[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = stack.pop() {
        removed += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                stack.push(w);
            }
        }
    }
    removed < adj.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_matches_coset_membership(spec in spec_strategy(), pts in prop::collection::vec((-40i64..40, -40i64..40), 30)) {
        let t = spec.build().unwrap();
        let (u, w) = generators(&spec);
        prop_assert_eq!(t.vertex_count() as u64, spec.vertex_count());
        for &(x0, x1) in &pts {
            let x = [x0, x1];
            prop_assert!(in_lattice([x[0] - t.reduce(x)[0], x[1] - t.reduce(x)[1]], u, w));
            prop_assert_eq!(t.representative(t.canonicalize(x)), t.reduce(x));
            for &(y0, y1) in &pts {
                let same = t.canonicalize(x) == t.canonicalize([y0, y1]);
                prop_assert_eq!(same, in_lattice([x0 - y0, x1 - y1], u, w));
            }
        }
    }

    #[test]
    fn ids_cover_the_quotient(spec in spec_strategy()) {
        // D e0 and D e1 lie in the lattice, so [0, D)^2 meets every coset
        let t = spec.build().unwrap();
        let d = spec.vertex_count() as i64;
        prop_assume!(d <= 150);
        let ids: HashSet<usize> = (0..d).flat_map(|x| (0..d).map(move |y| [x, y])).map(|z| t.canonicalize(z)).collect();
        prop_assert_eq!(ids.len() as i64, d);
        prop_assert!(ids.iter().all(|&i| i < t.vertex_count()));
    }

    #[test]
    fn diagonal_period_by_brute_force(spec in spec_strategy()) {
        let t = spec.build().unwrap();
        let (u, w) = generators(&spec);
        let ell = (1..).find(|&l| in_lattice([l, l], u, w)).unwrap();
        prop_assert_eq!(t.diag_ell() as i64, ell);
        // the scaled torus closes the diagonal exactly r times later
        let unit = diag_ell(spec.a, spec.b).unwrap() as i64;
        prop_assert_eq!(ell, unit * spec.r);
    }

    #[test]
    fn cycle_detection_agrees_with_two_oracles(spec in spec_strategy(), q in 0.0f64..=1.0, seed in any::<u64>()) {
        let t = spec.build().unwrap();
        prop_assume!(t.vertex_count() <= 400);
        let config = BondUniforms::sample(BondGraph::Skew(t.clone()), seed.into()).at(q).unwrap();
        let adj = open_adjacency(&t, &config);
        let peeled = has_cycle_by_peeling(&adj);

        let comp = tarjan_scc(&config.open_digraph());
        let mut sizes = vec![0usize; t.vertex_count()];
        for &c in &comp {
            sizes[c] += 1;
        }
        let self_loop = adj.iter().enumerate().any(|(v, outs)| outs.contains(&v));
        let by_scc = self_loop || sizes.iter().any(|&s| s > 1);
        prop_assert_eq!(peeled, by_scc);

        let found = config.has_oriented_cycle();
        prop_assert_eq!(found.is_some(), peeled);
        if let Some(cycle) = found {
            // every hop is an open unit step and the walk closes up
            for (i, &x) in cycle.iter().enumerate() {
                let y = cycle[(i + 1) % cycle.len()];
                let hop = (0..2).find(|&d| {
                    let step = if d == 0 { [x[0] + 1, x[1]] } else { [x[0], x[1] + 1] };
                    t.canonicalize(step) == t.canonicalize(y) && config.is_open(x, d).unwrap()
                });
                prop_assert!(hop.is_some(), "no open edge {:?} -> {:?}", x, y);
            }
        }
    }

    #[test]
    fn coupled_configurations_are_monotone(spec in spec_strategy(), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0, seed in any::<u64>()) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let t = spec.build().unwrap();
        prop_assume!(t.vertex_count() <= 400);
        let u = BondUniforms::sample(BondGraph::Skew(t.clone()), seed.into());
        let (a, b) = (u.at(lo).unwrap(), u.at(hi).unwrap());
        for v in 0..t.vertex_count() {
            let x = t.representative(v);
            for d in 0..2 {
                prop_assert!(!a.is_open(x, d).unwrap() || b.is_open(x, d).unwrap());
            }
        }
        prop_assert!(a.edge_counts().1 <= b.edge_counts().1);
        prop_assert!(a.has_oriented_cycle().is_none() || b.has_oriented_cycle().is_some());
        let far = t.representative(t.vertex_count() - 1);
        prop_assert!(!a.reach([0, 0], far) || b.reach([0, 0], far));
    }
}

#[test]
fn reference_torus_by_brute_force() {
    let (a, b) = ([6, -3], [-2, 4]);
    let t = SkewTorusSpec::unit(a, b).unwrap().build().unwrap();
    let ids: HashSet<usize> = (0..18).flat_map(|x| (0..18).map(move |y| [x, y])).map(|z| t.canonicalize(z)).collect();
    assert_eq!(ids.len(), 18);
    let ell = (1..).find(|&l| in_lattice([l, l], a, b)).unwrap();
    assert_eq!(ell, 6);
    assert_eq!(diag_ell(a, b).unwrap(), 6);
}

#[test]
fn all_open_torus_follows_the_diagonal_chain() {
    for r in [1, 2, 3, 5] {
        let spec = SkewTorusSpec::new([6, -3], [-2, 4], r).unwrap();
        let t = spec.build().unwrap();
        let ell = t.diag_ell() as i64;
        assert_eq!(ell, 6 * r);
        let config = BondUniforms::sample(BondGraph::Skew(t.clone()), 3.into()).at(1.0).unwrap();
        for j in 0..6 {
            let (x, y) = ([j * r, j * r], [(j + 1) * r, (j + 1) * r]);
            assert!(config.reach(x, y));
            assert_ne!(t.canonicalize(x), t.canonicalize(y));
        }
        assert_eq!(t.canonicalize([ell, ell]), t.canonicalize([0, 0]));
        assert!(config.has_oriented_cycle().is_some());
        let closed = BondUniforms::sample(BondGraph::Skew(t), 3.into()).at(0.0).unwrap();
        assert!(closed.has_oriented_cycle().is_none());
    }
}

#[test]
fn window_edges_and_open_fraction() {
    let n = 710;
    let w = Window::new(n, n).unwrap();
    let u = BondUniforms::sample(BondGraph::Window(w), 11.into());
    for q in [0.3, 0.8] {
        let config = u.at(q).unwrap();
        let (edges, open) = config.edge_counts();
        let n = n as u64;
        assert_eq!(edges, 2 * n * (n - 1));
        let sigma = (q * (1.0 - q) / edges as f64).sqrt();
        let frac = open as f64 / edges as f64;
        assert!((frac - q).abs() < 3.0 * sigma, "q={q} open fraction {frac}");
    }
    let config = u.at(1.0).unwrap();
    let last = n as i64 - 1;
    assert_eq!(config.is_open([last, 0], 0), None);
    assert_eq!(config.is_open([0, last], 1), None);
    assert_eq!(config.is_open([-1, 0], 0), None);
    assert_eq!(config.is_open([last, 0], 1), Some(true));
    assert!(config.reach([0, 0], [last, last]));
    assert!(!config.reach([3, 3], [2, 9]));
}

#[test]
fn survival_is_nonincreasing_in_size() {
    let est = estimate_theta_curve(0.8, &[16, 32, 64], 400, 8.into(), Exec::Parallel).unwrap();
    // every trial shares one window, so survivors to a far line survive to a near one
    assert!(est.windows(2).all(|w| w[0].successes >= w[1].successes), "{est:?}");
    assert!(est[2].phat > 0.5);
    let sub = estimate_theta_curve(0.4, &[16, 32, 64], 400, 8.into(), Exec::Sequential).unwrap();
    assert!(sub.windows(2).all(|w| w[0].successes >= w[1].successes));
    assert!(sub[2].phat < est[2].phat);
}
