//! T-walks on a transition graph and minimum-weight search.
//!
//! A walk's weight counts subsystem changes between consecutive edges plus
//! edges whose control label is not `Zero`. The search is a dynamic program
//! over `(step, vertex, last subsystem)`; exhaustive enumeration is kept for
//! cross-checking.

use std::collections::BTreeSet;

use crate::abstraction::Abstraction;
use crate::error::{Error, Result};
use crate::graph::TransitionGraph;
use crate::system::SwitchedSystem;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Walk {
    pub start: usize,
    /// Edge identifiers in traversal order.
    pub edges: Vec<usize>,
}

impl Walk {
    pub fn empty(start: usize) -> Self {
        Walk {
            start,
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn end(&self, graph: &TransitionGraph) -> usize {
        self.edges.last().map_or(self.start, |e| graph.edge(*e).dst)
    }

    /// Visited vertices, `r + 1` of them.
    pub fn vertices(&self, graph: &TransitionGraph) -> Vec<usize> {
        std::iter::once(self.start)
            .chain(self.edges.iter().map(|e| graph.edge(*e).dst))
            .collect()
    }

    pub fn alphas(&self, graph: &TransitionGraph) -> Vec<usize> {
        self.edges.iter().map(|e| graph.edge(*e).alpha()).collect()
    }

    pub fn is_vertex_consistent(&self, graph: &TransitionGraph) -> bool {
        let mut at = self.start;
        for &e in &self.edges {
            if e >= graph.edges().len() || graph.edge(e).src != at {
                return false;
            }
            at = graph.edge(e).dst;
        }
        at < graph.n_vertices()
    }
}

pub fn is_t_walk(graph: &TransitionGraph, system: &SwitchedSystem, walk: &Walk, horizon: usize) -> bool {
    if walk.len() > horizon || !walk.is_vertex_consistent(graph) {
        return false;
    }
    if walk.is_empty() {
        return walk.start == Abstraction::ORIGIN;
    }
    walk.alphas(graph)
        .windows(2)
        .all(|w| system.allows_switch(w[0], w[1]))
}

pub fn walk_weight(graph: &TransitionGraph, walk: &Walk) -> usize {
    let switches = walk
        .alphas(graph)
        .windows(2)
        .filter(|w| w[0] != w[1])
        .count();
    let controls = walk
        .edges
        .iter()
        .filter(|e| !graph.edge(**e).beta().is_zero())
        .count();
    switches + controls
}

/// Fewest steps from each vertex to `dst`, ignoring subsystem compatibility.
fn hops_to(graph: &TransitionGraph, dst: usize) -> Vec<Option<usize>> {
    let n = graph.n_vertices();
    let mut dist = vec![None; n];
    dist[dst] = Some(0);
    let mut changed = true;
    while changed {
        changed = false;
        for e in graph.edges() {
            if let Some(d) = dist[e.dst] {
                if dist[e.src].is_none_or(|s| s > d + 1) {
                    dist[e.src] = Some(d + 1);
                    changed = true;
                }
            }
        }
    }
    dist
}

/// Every T-walk from `src` to `dst`, shortest first and lexicographically by
/// edge identifier within a length.
pub fn enumerate_t_walks(
    graph: &TransitionGraph,
    system: &SwitchedSystem,
    src: usize,
    dst: usize,
    horizon: usize,
    cap: usize,
) -> Result<Vec<Walk>> {
    let mut found = Vec::new();
    if src == dst && src == Abstraction::ORIGIN {
        found.push(Walk::empty(src));
    }
    if src >= graph.n_vertices() || dst >= graph.n_vertices() {
        return Ok(found);
    }
    let hops = hops_to(graph, dst);
    let mut level = vec![Walk::empty(src)];
    for step in 1..=horizon {
        let mut next = Vec::new();
        for w in &level {
            let at = w.end(graph);
            let last_alpha = w.edges.last().map(|e| graph.edge(*e).alpha());
            for &e in graph.out_edges(at) {
                let edge = graph.edge(e);
                if last_alpha.is_some_and(|a| !system.allows_switch(a, edge.alpha())) {
                    continue;
                }
                if hops[edge.dst].is_none_or(|h| step + h > horizon) {
                    continue;
                }
                let mut ext = w.clone();
                ext.edges.push(e);
                if edge.dst == dst {
                    if found.len() == cap {
                        return Err(Error::CapExceeded {
                            cap,
                            reached: found.len() + 1,
                        });
                    }
                    found.push(ext.clone());
                }
                next.push(ext);
            }
        }
        level = next;
    }
    Ok(found)
}

/// Best path into each `(vertex, last alpha)` after a fixed number of steps.
type Layer = Vec<Vec<Option<(usize, Vec<usize>)>>>;

/// Runs the `(step, vertex, last alpha)` dynamic program from `src` and calls
/// `visit(step, last_alpha, weight, path)` for the best walk reaching the
/// origin at every step and last subsystem.
fn origin_arrivals(
    graph: &TransitionGraph,
    system: &SwitchedSystem,
    src: usize,
    horizon: usize,
    mut visit: impl FnMut(usize, usize, usize, &[usize]),
) {
    let n = graph.n_vertices();
    let n_alpha = system.n_subsystems();
    if src >= n {
        return;
    }
    let offer = |slot: &mut Option<(usize, Vec<usize>)>, w: usize, path: Vec<usize>| {
        let better = match slot {
            None => true,
            Some((bw, bp)) => (w, &path) < (*bw, bp),
        };
        if better {
            *slot = Some((w, path));
        }
    };
    let mut layer: Layer = vec![vec![None; n_alpha]; n];
    for &e in graph.out_edges(src) {
        let edge = graph.edge(e);
        if edge.alpha() >= n_alpha || horizon == 0 {
            continue;
        }
        let w = usize::from(!edge.beta().is_zero());
        offer(&mut layer[edge.dst][edge.alpha()], w, vec![e]);
    }
    for step in 1..=horizon {
        for (a, cell) in layer[Abstraction::ORIGIN].iter().enumerate() {
            if let Some((w, p)) = cell {
                visit(step, a, *w, p);
            }
        }
        if step == horizon {
            break;
        }
        let mut next: Layer = vec![vec![None; n_alpha]; n];
        for (v, cells) in layer.iter().enumerate() {
            if v == Abstraction::ORIGIN {
                continue;
            }
            for (a, cell) in cells.iter().enumerate() {
                let Some((w, p)) = cell else { continue };
                for &e in graph.out_edges(v) {
                    let edge = graph.edge(e);
                    if edge.alpha() >= n_alpha || !system.allows_switch(a, edge.alpha()) {
                        continue;
                    }
                    let cost = usize::from(a != edge.alpha()) + usize::from(!edge.beta().is_zero());
                    let mut path = p.clone();
                    path.push(e);
                    offer(&mut next[edge.dst][edge.alpha()], w + cost, path);
                }
            }
        }
        layer = next;
    }
}

/// Minimum-weight T-walk from `src` to the origin whose tail can be padded
/// to length `horizon`. Ties go to the shorter walk, then to the
/// lexicographically smaller edge sequence.
pub fn find_hands_off_walk(
    graph: &TransitionGraph,
    system: &SwitchedSystem,
    src: usize,
    horizon: usize,
) -> Option<(Walk, usize)> {
    if src == Abstraction::ORIGIN {
        return Some((Walk::empty(src), 0));
    }
    let pad = PaddingCosts::new(system.switch_set(), system.n_subsystems(), horizon);
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    origin_arrivals(graph, system, src, horizon, |step, a, w, p| {
        if pad.cost(a, horizon - step).is_none() {
            return;
        }
        let cand = (w, step, p.to_vec());
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    });
    best.map(|(w, _, p)| (Walk { start: src, edges: p }, w))
}

/// A walk together with the cheapest realizable padding behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedWalk {
    pub walk: Walk,
    pub weight: usize,
    /// Subsystem changes contributed by padding, boundary switch included.
    pub padding_cost: usize,
}

impl PaddedWalk {
    pub fn total(&self) -> usize {
        self.weight + self.padding_cost
    }
}

/// Like [`find_hands_off_walk`] but minimizes walk weight plus the cost of the
/// optimal padding tail, then weight, then length, then edge sequence.
pub fn find_sparsest_padded_walk(
    graph: &TransitionGraph,
    system: &SwitchedSystem,
    src: usize,
    horizon: usize,
) -> Option<PaddedWalk> {
    let pad = PaddingCosts::new(system.switch_set(), system.n_subsystems(), horizon);
    if src == Abstraction::ORIGIN {
        return pad.start_cost(horizon).map(|(_, c)| PaddedWalk {
            walk: Walk::empty(src),
            weight: 0,
            padding_cost: c,
        });
    }
    let mut best: Option<(usize, usize, usize, Vec<usize>, usize)> = None;
    origin_arrivals(graph, system, src, horizon, |step, a, w, p| {
        let Some(c) = pad.cost(a, horizon - step) else {
            return;
        };
        let cand = (w + c, w, step, p.to_vec(), c);
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    });
    best.map(|(_, w, _, p, c)| PaddedWalk {
        walk: Walk { start: src, edges: p },
        weight: w,
        padding_cost: c,
    })
}

/// `cost[l][j]`: fewest subsystem changes over `l` further steps after
/// subsystem `j`, or `None` when no admissible continuation exists.
#[derive(Debug, Clone)]
pub struct PaddingCosts {
    cost: Vec<Vec<Option<usize>>>,
    succ: Vec<Vec<usize>>,
}

impl PaddingCosts {
    pub fn new(switch_set: &BTreeSet<(usize, usize)>, n: usize, max_len: usize) -> Self {
        let mut succ = vec![Vec::new(); n];
        for &(i, j) in switch_set {
            if i < n && j < n {
                succ[i].push(j);
            }
        }
        let mut cost = vec![vec![Some(0); n]];
        for l in 1..=max_len {
            let prev = &cost[l - 1];
            let row = (0..n)
                .map(|j| {
                    succ[j]
                        .iter()
                        .filter_map(|&k| prev[k].map(|c| c + usize::from(k != j)))
                        .min()
                })
                .collect();
            cost.push(row);
        }
        PaddingCosts { cost, succ }
    }

    pub fn cost(&self, last: usize, len: usize) -> Option<usize> {
        self.cost.get(len).and_then(|row| row.get(last).copied().flatten())
    }

    /// Cheapest first subsystem for a sequence of `len` steps with no
    /// predecessor; smallest index on ties.
    pub fn start_cost(&self, len: usize) -> Option<(usize, usize)> {
        if len == 0 {
            return None;
        }
        (0..self.succ.len())
            .filter_map(|j| self.cost(j, len - 1).map(|c| (c, j)))
            .min()
            .map(|(c, j)| (j, c))
    }

    fn successors(&self, j: usize) -> &[usize] {
        &self.succ[j]
    }
}

/// Subsystem indices for `len` padding steps after `last`.
///
/// Stays on `last` when it may self-loop; otherwise moves to the smallest
/// self-looping successor; otherwise moves to the successor with the
/// cheapest admissible continuation (smallest index on ties).
pub fn pad_discrete(
    switch_set: &BTreeSet<(usize, usize)>,
    n_subsystems: usize,
    last: usize,
    len: usize,
) -> Result<Vec<usize>> {
    let costs = PaddingCosts::new(switch_set, n_subsystems.max(last + 1), len);
    let mut out = Vec::with_capacity(len);
    let mut prev = last;
    for step in 0..len {
        let remaining = len - step - 1;
        let succ = costs.successors(prev);
        if succ.is_empty() {
            return Err(Error::NoAdmissibleSuccessor { last: prev });
        }
        let next = if switch_set.contains(&(prev, prev)) {
            prev
        } else if let Some(&i) = succ.iter().find(|i| switch_set.contains(&(**i, **i))) {
            i
        } else {
            succ.iter()
                .filter_map(|&j| costs.cost(j, remaining).map(|c| (c, j)))
                .min()
                .map(|(_, j)| j)
                .ok_or(Error::NoAdmissibleSuccessor { last: prev })?
        };
        out.push(next);
        prev = next;
    }
    Ok(out)
}

/// Padding for a walk of length zero: a full sequence of `len` steps.
pub fn pad_from_origin(
    switch_set: &BTreeSet<(usize, usize)>,
    n_subsystems: usize,
    len: usize,
) -> Result<Vec<usize>> {
    let costs = PaddingCosts::new(switch_set, n_subsystems, len);
    if len == 0 {
        return Ok(Vec::new());
    }
    let (first, _) = costs.start_cost(len).ok_or_else(|| {
        Error::MalformedSequence(format!("no admissible subsystem sequence of length {len}"))
    })?;
    let mut out = vec![first];
    out.extend(pad_discrete(switch_set, n_subsystems, first, len - 1)?);
    Ok(out)
}
