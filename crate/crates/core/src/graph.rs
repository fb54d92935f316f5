//! Labelled transition multigraph over the regions of an abstraction.
//!
//! Vertex `p` stands for region `p`. An edge `(src, dst, alpha, beta)` records
//! that applying subsystem `alpha` with continuous control rule `beta` moves
//! every state of `src` into `dst`.
//!
//! Discovery works on sign cells (see [`crate::pattern`]):
//! * `mu = 0` edges whenever every cell of the source has a determined image
//!   cell and all images fall in one region;
//! * feedback edges that cancel one coordinate `k` through the input,
//!   `mu = -(A(k, j) / b(k)) x_j`, whenever row `k` of `A` sees exactly one
//!   free coordinate `j` of the source. They are searched from single-axis
//!   patterns, and from every pattern of a support lattice.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{
    sample_in_cells, Abstraction, AbstractionFamily, Region, RegionKind, SignConstraint,
    SAMPLE_RADIUS,
};
use crate::error::{Error, Result};
use crate::pattern::{image_stays_in_box, Cell};
use crate::system::{SwitchedSystem, EPS_ZERO};

#[derive(Debug, Clone, PartialEq)]
pub enum Beta {
    Zero,
    /// `mu(x) = c . x + e`
    Feedback { c: Vec<f64>, e: f64 },
    /// Any nonzero admissible control is claimed to work.
    FreeNonzero,
}

impl Beta {
    pub fn is_zero(&self) -> bool {
        matches!(self, Beta::Zero)
    }

    fn rank(&self) -> u8 {
        match self {
            Beta::Zero => 0,
            Beta::Feedback { .. } => 1,
            Beta::FreeNonzero => 2,
        }
    }

    fn cmp_key(&self, other: &Beta) -> Ordering {
        match (self, other) {
            (Beta::Feedback { c: c1, e: e1 }, Beta::Feedback { c: c2, e: e2 }) => c1
                .iter()
                .zip(c2)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| c1.len().cmp(&c2.len()))
                .then_with(|| e1.total_cmp(e2)),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    /// Control value at state `x`; `free_value` is used for `FreeNonzero`.
    pub fn eval(&self, x: &[f64], free_value: f64) -> f64 {
        match self {
            Beta::Zero => 0.0,
            Beta::Feedback { c, e } => c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + e,
            Beta::FreeNonzero => free_value,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Beta::Zero => "0".into(),
            Beta::FreeNonzero => "μ≠0".into(),
            Beta::Feedback { c, e } => {
                let mut terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| format!("{v}*x{}", k + 1))
                    .collect();
                if *e != 0.0 || terms.is_empty() {
                    terms.push(format!("{e}"));
                }
                terms.join(" + ")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLabel {
    /// Subsystem index (0-based).
    pub alpha: usize,
    pub beta: Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub label: EdgeLabel,
}

impl Edge {
    pub fn new(src: usize, dst: usize, alpha: usize, beta: Beta) -> Self {
        Edge {
            src,
            dst,
            label: EdgeLabel { alpha, beta },
        }
    }

    pub fn alpha(&self) -> usize {
        self.label.alpha
    }

    pub fn beta(&self) -> &Beta {
        &self.label.beta
    }

    fn cmp_key(&self, other: &Edge) -> Ordering {
        (self.src, self.dst, self.label.alpha)
            .cmp(&(other.src, other.dst, other.label.alpha))
            .then_with(|| self.label.beta.cmp_key(&other.label.beta))
    }
}

/// Immutable multigraph. Edges are kept sorted by `(src, dst, alpha, beta)`
/// without duplicates; an edge's identifier is its position in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    vertices: Vec<Region>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
}

impl TransitionGraph {
    pub fn new(vertices: Vec<Region>, mut edges: Vec<Edge>) -> Result<Self> {
        let n = vertices.len();
        if let Some(e) = edges.iter().find(|e| e.src >= n || e.dst >= n) {
            return Err(Error::RejectedEdge(format!(
                "edge {} -> {} refers to a missing vertex",
                e.src, e.dst
            )));
        }
        edges.sort_by(|a, b| a.cmp_key(b));
        edges.dedup_by(|a, b| a.cmp_key(b).is_eq());
        let mut out = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out[e.src].push(id);
        }
        Ok(Self {
            vertices,
            edges,
            out,
        })
    }

    pub fn vertices(&self) -> &[Region] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Identifiers of the edges leaving `v`, ascending.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn with_extra_edges(&self, extra: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.extend(extra);
        Self::new(self.vertices.clone(), edges)
    }
}

enum MapTarget {
    Constant(usize),
    Indeterminate,
    NotConstant(Vec<Option<usize>>),
}

fn map_cells(abs: &Abstraction, m: &DMatrix<f64>, cells: &[Cell]) -> Result<MapTarget> {
    let mut targets: Vec<Option<usize>> = Vec::new();
    for cell in cells {
        let Some(img) = cell.image(m) else {
            return Ok(MapTarget::Indeterminate);
        };
        let t = if image_stays_in_box(m, cell, abs.domain(), EPS_ZERO) {
            abs.region_of_cell(&img)?
        } else {
            None
        };
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    match targets.as_slice() {
        [Some(t)] => Ok(MapTarget::Constant(*t)),
        _ => Ok(MapTarget::NotConstant(targets)),
    }
}

fn structural_zero(v: f64, scale: f64) -> bool {
    v.abs() <= 1e-12 * scale.max(1.0)
}

/// Discovers the `mu = 0` and coordinate-cancelling feedback edges.
pub fn build_graph(system: &SwitchedSystem, abs: &Abstraction) -> Result<TransitionGraph> {
    if abs.dim() != system.dim() {
        return Err(Error::InvalidAbstraction(format!(
            "abstraction has dimension {}, system has {}",
            abs.dim(),
            system.dim()
        )));
    }
    let mut edges = Vec::new();
    for region in abs.regions().iter().filter(|r| !r.is_origin()) {
        let cells = abs.cells_of(region.id)?;
        if cells.is_empty() {
            continue;
        }
        for (i, sub) in system.subsystems().iter().enumerate() {
            match map_cells(abs, &sub.a, &cells)? {
                MapTarget::Constant(t) => edges.push(Edge::new(region.id, t, i, Beta::Zero)),
                MapTarget::Indeterminate => {}
                // leaving the domain: no mu = 0 edge, feedback may still apply
                MapTarget::NotConstant(ts) if ts.contains(&None) => {}
                MapTarget::NotConstant(ts) => {
                    return Err(Error::InvalidAbstraction(format!(
                        "region {} reaches {:?} under subsystem {} with mu = 0",
                        region.id,
                        ts,
                        i + 1
                    )))
                }
            }

            let free = region.free_coords();
            let searchable = !free.is_empty()
                && (free.len() == 1 || abs.family() == AbstractionFamily::Lattice);
            if !searchable {
                continue;
            }
            for k in 0..system.dim() {
                if sub.b[k] == 0.0 {
                    continue;
                }
                let seen: Vec<usize> = free.iter().copied().filter(|j| sub.a[(k, *j)] != 0.0).collect();
                let [j] = seen.as_slice() else { continue };
                let j = *j;
                let coef = -sub.a[(k, j)] / sub.b[k];
                let mut m = sub.a.clone();
                for p in 0..system.dim() {
                    let shift = coef * sub.b[p];
                    let v = sub.a[(p, j)] + shift;
                    m[(p, j)] = if p == k || structural_zero(v, sub.a[(p, j)].abs() + shift.abs()) {
                        0.0
                    } else {
                        v
                    };
                }
                let MapTarget::Constant(t) = map_cells(abs, &m, &cells)? else {
                    continue;
                };
                if !feedback_within_controls(system, abs, &cells, j, coef) {
                    continue;
                }
                let mut c = vec![0.0; system.dim()];
                c[j] = coef;
                edges.push(Edge::new(region.id, t, i, Beta::Feedback { c, e: 0.0 }));
            }
        }
    }
    TransitionGraph::new(abs.regions().to_vec(), edges)
}

/// Range of `coef * x_j` over the cells stays inside the control set.
fn feedback_within_controls(
    system: &SwitchedSystem,
    abs: &Abstraction,
    cells: &[Cell],
    j: usize,
    coef: f64,
) -> bool {
    cells.iter().all(|cell| {
        let (lo, hi) = abs.domain().coord_range(j, cell.0[j]);
        let (a, b) = (coef * lo, coef * hi);
        // 0 * inf is NaN; an unbounded side with coef != 0 stays unbounded
        let fix = |v: f64, bound: f64| if v.is_nan() { 0.0 * bound } else { v };
        let (a, b) = (fix(a, lo), fix(b, hi));
        system.control_set().contains_range(a.min(b), a.max(b))
    })
}

/// Samples states of the source region and checks that the labelled control
/// is admissible (and nonzero for non-`Zero` labels) and lands in `dst`.
pub fn validate_edge(
    system: &SwitchedSystem,
    abs: &Abstraction,
    edge: &Edge,
    n_samples: usize,
    seed: u64,
) -> Result<bool> {
    if edge.src >= abs.len() || edge.dst >= abs.len() || edge.alpha() >= system.n_subsystems() {
        return Ok(false);
    }
    if let Beta::Feedback { c, .. } = edge.beta() {
        if c.len() != system.dim() {
            return Ok(false);
        }
    }
    let cells = abs.cells_of(edge.src)?;
    if cells.is_empty() {
        return Ok(true);
    }
    let free_value = match (edge.beta(), system.control_set().default_nonzero()) {
        (Beta::FreeNonzero, None) => return Ok(false),
        (_, v) => v.unwrap_or(0.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<_> = cells
        .iter()
        .flat_map(|c| {
            [
                c.representative(abs.domain(), 1.0),
                c.representative(abs.domain(), SAMPLE_RADIUS),
            ]
        })
        .collect();
    points.extend((0..n_samples).map(|_| sample_in_cells(abs.domain(), &cells, &mut rng)));
    let sub = system.subsystem(edge.alpha());
    for x in &points {
        let mu = edge.beta().eval(x.as_slice(), free_value);
        if !system.control_set().contains_approx(mu, EPS_ZERO) {
            return Ok(false);
        }
        if !edge.beta().is_zero() && mu.abs() <= EPS_ZERO {
            return Ok(false);
        }
        match abs.classify(&sub.step(x, mu), EPS_ZERO) {
            Ok(t) if t == edge.dst => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Appends user-supplied edges after each passes [`validate_edge`].
pub fn add_extra_edges(
    graph: &TransitionGraph,
    system: &SwitchedSystem,
    abs: &Abstraction,
    extra: &[Edge],
    n_samples: usize,
    seed: u64,
) -> Result<TransitionGraph> {
    for e in extra {
        if !validate_edge(system, abs, e, n_samples, seed)? {
            return Err(Error::RejectedEdge(format!(
                "({}, {}, subsystem {}, {}) failed validation",
                e.src,
                e.dst,
                e.alpha() + 1,
                e.beta().render()
            )));
        }
    }
    graph.with_extra_edges(extra.iter().cloned())
}

fn region_caption(r: &Region) -> String {
    match &r.kind {
        RegionKind::Origin => "origin".into(),
        RegionKind::Other => "other".into(),
        RegionKind::Pattern { free, signs } => {
            let parts: Vec<String> = free
                .iter()
                .zip(signs)
                .map(|(k, s)| {
                    let sign = match s {
                        SignConstraint::Pos => ">0",
                        SignConstraint::Neg => "<0",
                        SignConstraint::Any => "!=0",
                    };
                    format!("x{}{sign}", k + 1)
                })
                .collect();
            parts.join(", ")
        }
    }
}

pub fn export_dot(graph: &TransitionGraph) -> String {
    let mut s = String::from("digraph transition_graph {\n");
    for v in graph.vertices() {
        let _ = writeln!(s, "  v{} [label=\"v{}: {}\"];", v.id, v.id, region_caption(v));
    }
    for e in graph.edges() {
        let _ = writeln!(
            s,
            "  v{} -> v{} [label=\"{} / {}\"];",
            e.src,
            e.dst,
            e.alpha() + 1,
            e.beta().render()
        );
    }
    s.push_str("}\n");
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaJson {
    Zero,
    Feedback { c: Vec<f64>, e: f64 },
    FreeNonzero,
}

/// Edge record; `alpha` is 1-based, `src`/`dst` are region ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub src: usize,
    pub dst: usize,
    pub alpha: usize,
    pub beta: BetaJson,
}

/// Region record; coordinates are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionJson {
    pub id: usize,
    pub kind: String,
    #[serde(default)]
    pub free_coords: Vec<usize>,
    #[serde(default)]
    pub signs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<RegionJson>,
    edges: Vec<EdgeJson>,
}

impl From<&Edge> for EdgeJson {
    fn from(e: &Edge) -> Self {
        EdgeJson {
            src: e.src,
            dst: e.dst,
            alpha: e.alpha() + 1,
            beta: match e.beta() {
                Beta::Zero => BetaJson::Zero,
                Beta::Feedback { c, e } => BetaJson::Feedback { c: c.clone(), e: *e },
                Beta::FreeNonzero => BetaJson::FreeNonzero,
            },
        }
    }
}

impl EdgeJson {
    pub fn to_edge(&self) -> Result<Edge> {
        if self.alpha == 0 {
            return Err(Error::RejectedEdge("alpha is 1-based".into()));
        }
        let beta = match &self.beta {
            BetaJson::Zero => Beta::Zero,
            BetaJson::Feedback { c, e } => Beta::Feedback { c: c.clone(), e: *e },
            BetaJson::FreeNonzero => Beta::FreeNonzero,
        };
        Ok(Edge::new(self.src, self.dst, self.alpha - 1, beta))
    }
}

pub fn sign_name(s: SignConstraint) -> &'static str {
    match s {
        SignConstraint::Pos => "pos",
        SignConstraint::Neg => "neg",
        SignConstraint::Any => "any",
    }
}

pub fn parse_sign(s: &str) -> Option<SignConstraint> {
    match s {
        "pos" => Some(SignConstraint::Pos),
        "neg" => Some(SignConstraint::Neg),
        "any" => Some(SignConstraint::Any),
        _ => None,
    }
}

impl From<&Region> for RegionJson {
    fn from(r: &Region) -> Self {
        let (kind, free_coords, signs) = match &r.kind {
            RegionKind::Origin => ("origin", vec![], vec![]),
            RegionKind::Other => ("other", vec![], vec![]),
            RegionKind::Pattern { free, signs } => (
                "pattern",
                free.iter().map(|k| k + 1).collect(),
                signs.iter().map(|s| sign_name(*s).to_string()).collect(),
            ),
        };
        RegionJson {
            id: r.id,
            kind: kind.into(),
            free_coords,
            signs,
        }
    }
}

impl RegionJson {
    pub fn to_region(&self) -> Result<Region> {
        let kind = match self.kind.as_str() {
            "origin" => RegionKind::Origin,
            "other" => RegionKind::Other,
            "pattern" => {
                if self.free_coords.contains(&0) {
                    return Err(Error::InvalidAbstraction("free_coords are 1-based".into()));
                }
                let signs = self
                    .signs
                    .iter()
                    .map(|s| {
                        parse_sign(s).ok_or_else(|| {
                            Error::InvalidAbstraction(format!("unknown sign {s:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                RegionKind::Pattern {
                    free: self.free_coords.iter().map(|k| k - 1).collect(),
                    signs,
                }
            }
            other => {
                return Err(Error::InvalidAbstraction(format!(
                    "unknown region kind {other:?}"
                )))
            }
        };
        Ok(Region { id: self.id, kind })
    }
}

pub fn export_json(graph: &TransitionGraph) -> String {
    let doc = GraphJson {
        vertices: graph.vertices().iter().map(RegionJson::from).collect(),
        edges: graph.edges().iter().map(EdgeJson::from).collect(),
    };
    let value = serde_json::to_value(&doc).expect("graph serializes");
    serde_json::to_string_pretty(&value).expect("graph serializes") + "\n"
}

pub fn import_json(text: &str) -> Result<TransitionGraph> {
    let doc: GraphJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let vertices = doc
        .vertices
        .iter()
        .map(RegionJson::to_region)
        .collect::<Result<Vec<_>>>()?;
    let edges = doc
        .edges
        .iter()
        .map(EdgeJson::to_edge)
        .collect::<Result<Vec<_>>>()?;
    TransitionGraph::new(vertices, edges)
}
