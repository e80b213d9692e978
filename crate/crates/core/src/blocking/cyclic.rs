use super::successors::successors_2d;
use super::{BlockingPath, Branching, StepKind};
use crate::graph::{bfs_edge_path, source_of, tarjan_scc, Digraph};
use crate::lattice::TorusGrid;

fn advances(kind: StepKind) -> (bool, bool) {
    match kind {
        StepKind::I => (true, false),
        StepKind::II => (false, true),
        _ => (true, true),
    }
}

fn delta(kind: StepKind) -> [i64; 2] {
    match kind {
        StepKind::I => [1, 0],
        StepKind::II => [0, 1],
        _ => [1, 1],
    }
}

/// The successor digraph of a 2-d torus restricted to car sites, with the
/// step kind of every edge.
pub(crate) fn successor_digraph(grid: &TorusGrid, mode: Branching<'_>) -> (Digraph, Vec<StepKind>) {
    let mut kinds = Vec::new();
    let mut buf = Vec::with_capacity(2);
    let g = Digraph::from_fn(grid.len(), |v, out| {
        if !grid.state_at(v).is_car() {
            return;
        }
        let z = grid.coords(v);
        successors_2d(grid, [z[0], z[1]], mode, &mut buf);
        for &(s, k) in &buf {
            let w = grid.index(&s);
            if grid.state_at(w).is_car() {
                out.push(w);
                kinds.push(k);
            }
        }
    });
    (g, kinds)
}

/// A cyclic blocking path on a 2-d torus that advances along both axes, or
/// `None`. The result is a closed walk of the successor digraph: it may pass
/// through a site more than once.
pub fn find_cyclic(grid: &TorusGrid) -> Option<BlockingPath> {
    find_cyclic_with(grid, Branching::Full)
}

pub fn find_cyclic_with(grid: &TorusGrid, mode: Branching<'_>) -> Option<BlockingPath> {
    if grid.ndim() != 2 {
        return None;
    }
    let (g, kinds) = successor_digraph(grid, mode);
    let comp = tarjan_scc(&g);
    let ncomp = comp.iter().filter(|&&c| c != usize::MAX).max().map_or(0, |&c| c + 1);
    // per component: one horizontally and one vertically advancing edge
    let mut horiz = vec![None; ncomp];
    let mut vert = vec![None; ncomp];
    let mut both = vec![None; ncomp];
    for v in 0..g.len() {
        for e in g.out_edges(v) {
            let w = g.edge_target(e);
            if comp[v] != comp[w] {
                continue;
            }
            let c = comp[v];
            match advances(kinds[e]) {
                (true, true) => {
                    both[c].get_or_insert(e);
                }
                (true, false) => {
                    horiz[c].get_or_insert(e);
                }
                _ => {
                    vert[c].get_or_insert(e);
                }
            }
        }
    }
    let comp_of = &comp;
    let same = |c: usize| move |w: usize| comp_of[w] == c;
    let mut walk = None;
    for &c in &comp {
        if c == usize::MAX || (both[c].is_none() && (horiz[c].is_none() || vert[c].is_none())) {
            continue;
        }
        let edges = if let Some(e) = both[c] {
            let back = bfs_edge_path(&g, g.edge_target(e), source_of(&g, e), same(c))?;
            std::iter::once(e).chain(back).collect::<Vec<_>>()
        } else {
            let (h, u) = (horiz[c].unwrap(), vert[c].unwrap());
            let to_u = bfs_edge_path(&g, g.edge_target(h), source_of(&g, u), same(c))?;
            let to_h = bfs_edge_path(&g, g.edge_target(u), source_of(&g, h), same(c))?;
            std::iter::once(h)
                .chain(to_u)
                .chain(std::iter::once(u))
                .chain(to_h)
                .collect()
        };
        walk = Some(edges);
        break;
    }
    let edges = walk?;
    let mut site = grid.coords(source_of(&g, edges[0]));
    let mut path = BlockingPath {
        sites: Vec::with_capacity(edges.len()),
        kinds: Vec::with_capacity(edges.len()),
        cyclic: true,
    };
    for &e in &edges {
        path.sites.push(site.clone());
        let k = kinds[e];
        path.kinds.push(k);
        let d = delta(k);
        site[0] += d[0];
        site[1] += d[1];
    }
    Some(path)
}
