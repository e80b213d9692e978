//! Directed-graph utilities shared by the blocking-path and percolation code.

use std::collections::VecDeque;

/// Compressed adjacency lists over vertices `0..n`.
#[derive(Debug, Clone, Default)]
pub struct Digraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Digraph {
    /// Build from a closure that appends the out-neighbours of a vertex.
    pub fn from_fn<F>(n: usize, mut out: F) -> Self
    where
        F: FnMut(usize, &mut Vec<usize>),
    {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for v in 0..n {
            out(v, &mut targets);
            offsets.push(targets.len());
        }
        Digraph { offsets, targets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn out(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Edge ids of `v`'s out-edges; edge `e` goes to `targets[e]`.
    pub fn out_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn edge_target(&self, e: usize) -> usize {
        self.targets[e]
    }
}

/// Strongly connected components (iterative Tarjan). Returns the component
/// index of every vertex; components are numbered in reverse topological
/// order of the condensation.
pub fn tarjan_scc(g: &Digraph) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = g.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos == 0 && index[v] == UNSEEN {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let out = g.out(v);
            if *pos < out.len() {
                let w = out[*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

/// Shortest path (as an edge-id list) from `from` to `to` using only
/// vertices accepted by `keep`. Empty when `from == to`.
pub fn bfs_edge_path<F>(g: &Digraph, from: usize, to: usize, keep: F) -> Option<Vec<usize>>
where
    F: Fn(usize) -> bool,
{
    if from == to {
        return Some(Vec::new());
    }
    let mut via = std::collections::HashMap::new();
    let mut queue = VecDeque::from([from]);
    via.insert(from, usize::MAX);
    while let Some(v) = queue.pop_front() {
        for e in g.out_edges(v) {
            let w = g.edge_target(e);
            if !keep(w) || via.contains_key(&w) {
                continue;
            }
            via.insert(w, e);
            if w == to {
                let mut edges = Vec::new();
                let mut cur = to;
                while cur != from {
                    let e = via[&cur];
                    edges.push(e);
                    cur = source_of(g, e);
                }
                edges.reverse();
                return Some(edges);
            }
            queue.push_back(w);
        }
    }
    None
}

/// Source vertex of edge `e` (binary search over the offsets).
pub fn source_of(g: &Digraph, e: usize) -> usize {
    g.offsets.partition_point(|&o| o <= e) - 1
}

/// Find a directed cycle by colour-marking DFS. Returns the vertices of one
/// cycle in order (the first vertex is not repeated at the end).
pub fn find_cycle(g: &Digraph) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let n = g.len();
    let mut colour = vec![Colour::White; n];
    let mut parent = vec![usize::MAX; n];
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if colour[root] != Colour::White {
            continue;
        }
        colour[root] = Colour::Grey;
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let out = g.out(v);
            if *pos < out.len() {
                let w = out[*pos];
                *pos += 1;
                match colour[w] {
                    Colour::White => {
                        colour[w] = Colour::Grey;
                        parent[w] = v;
                        call.push((w, 0));
                    }
                    Colour::Grey => {
                        let mut cycle = vec![v];
                        let mut cur = v;
                        while cur != w {
                            cur = parent[cur];
                            cycle.push(cur);
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    Colour::Black => {}
                }
            } else {
                colour[v] = Colour::Black;
                call.pop();
            }
        }
    }
    None
}
