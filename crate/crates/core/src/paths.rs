//! Mapping paths of a fixed sort and their exhaustive enumeration.
//!
//! For a sort `X` every segment `(y, d, D_d(y))` or its reversal lies over
//! exactly one pair `(d, y)` with `y ∈ D_{s(d)}(X)`. Those pairs are the edges
//! of the [`ElementGraph`]; weakly equal segments are the two traversals of
//! one such edge, so proper paths are the walks that never reuse an edge.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagram::Diagram;
use crate::error::{Error, Result, ValidationReport};

/// Default number of search steps before path enumeration gives up.
pub const DEFAULT_BUDGET: u64 = 50_000_000;

/// An element of one component: `(vertex, position in the carrier)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElemRef {
    pub vertex: usize,
    pub index: usize,
}

impl ElemRef {
    pub fn new(vertex: usize, index: usize) -> Self {
        Self { vertex, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    #[serde(rename = "op")]
    Opposite,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Opposite,
            Direction::Opposite => Direction::Forward,
        }
    }
}

/// `(left, edge, right)` with `right = D_edge(left)`, or `(left, edge^op, right)`
/// with `left = D_edge(right)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSegment {
    pub left: ElemRef,
    pub edge: usize,
    pub dir: Direction,
    pub right: ElemRef,
}

pub type SegmentKey = (usize, Direction, ElemRef, ElemRef);

impl PathSegment {
    pub fn reversed(&self) -> Self {
        Self {
            left: self.right,
            edge: self.edge,
            dir: self.dir.flip(),
            right: self.left,
        }
    }

    /// The element graph edge `(edge, source element)` this segment traverses.
    pub fn class(&self) -> (usize, usize) {
        match self.dir {
            Direction::Forward => (self.edge, self.left.index),
            Direction::Opposite => (self.edge, self.right.index),
        }
    }

    pub fn key(&self) -> SegmentKey {
        (self.edge, self.dir, self.left, self.right)
    }

    /// Checks the segment against the diagram's arrow at `sort`.
    pub fn is_valid(&self, d: &Diagram, sort: usize) -> bool {
        let shape = d.shape();
        if self.edge >= shape.edge_count() {
            return false;
        }
        let e = shape.edge(self.edge);
        let (src, tgt) = match self.dir {
            Direction::Forward => (self.left, self.right),
            Direction::Opposite => (self.right, self.left),
        };
        src.vertex == e.source
            && tgt.vertex == e.target
            && src.index < d.component(e.source).size(sort)
            && tgt.index < d.component(e.target).size(sort)
            && d.arrow(self.edge).apply(sort, src.index) == tgt.index
    }
}

/// Equal, or equal after reversing one of them.
pub fn weak_equal(a: &PathSegment, b: &PathSegment) -> bool {
    a == b || *a == b.reversed()
}

/// A chain of segments of one sort; the empty path is anchored at `start`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingPath {
    pub sort: usize,
    pub start: ElemRef,
    pub segments: Vec<PathSegment>,
}

impl MappingPath {
    pub fn empty(sort: usize, at: ElemRef) -> Self {
        Self {
            sort,
            start: at,
            segments: Vec::new(),
        }
    }

    /// Builds a path, checking only that consecutive segments chain.
    pub fn new(sort: usize, start: ElemRef, segments: Vec<PathSegment>) -> Result<Self> {
        let mut cur = start;
        for s in &segments {
            if s.left != cur {
                return Err(Error::EndpointMismatch);
            }
            cur = s.right;
        }
        Ok(Self { sort, start, segments })
    }

    pub fn end(&self) -> ElemRef {
        self.segments.last().map_or(self.start, |s| s.right)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `y₀, …, yₙ`.
    pub fn elements(&self) -> Vec<ElemRef> {
        std::iter::once(self.start)
            .chain(self.segments.iter().map(|s| s.right))
            .collect()
    }

    pub fn key(&self) -> Vec<SegmentKey> {
        self.segments.iter().map(PathSegment::key).collect()
    }

    /// Shortest first, then lexicographic by segment keys.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        (self.len(), self.key(), self.start).cmp(&(other.len(), other.key(), other.start))
    }

    pub fn validate(&self, d: &Diagram) -> Result<(), ValidationReport> {
        let mut report = ValidationReport::new();
        if self.sort >= d.signature().sort_count() {
            report.push("path", "unknown sort");
            return Err(report);
        }
        if self.start.vertex >= d.shape().vertex_count()
            || self.start.index >= d.component(self.start.vertex).size(self.sort)
        {
            report.push("path", "start element not in any carrier");
        }
        let mut cur = self.start;
        for (k, s) in self.segments.iter().enumerate() {
            if s.left != cur {
                report.push(format!("segment {k}"), "does not chain with its predecessor");
            }
            if !s.is_valid(d, self.sort) {
                report.push(format!("segment {k}"), "not realized by the diagram");
            }
            cur = s.right;
        }
        report.into_result()
    }

    /// No two distinct segments are weakly equal.
    pub fn is_proper(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.segments.iter().all(|s| seen.insert(s.class()))
    }

    /// No element repeats except possibly `y₀ = yₙ`.
    pub fn is_inner_cycle_free(&self) -> bool {
        self.first_inner_repeat().is_none()
    }

    fn first_inner_repeat(&self) -> Option<(usize, usize)> {
        let ys = self.elements();
        let n = self.len();
        for j in 1..ys.len() {
            for i in 0..j {
                if ys[i] == ys[j] && j - i < n {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Splices out inner cycles until none remain. Endpoints are kept and the
    /// result's segments are a subsequence of the input's.
    pub fn reduce_inner_cycles(&self) -> MappingPath {
        let mut p = self.clone();
        while let Some((i, j)) = p.first_inner_repeat() {
            p.segments.drain(i..j);
        }
        p
    }

    pub fn concat(&self, other: &MappingPath) -> Result<MappingPath> {
        if self.sort != other.sort || self.end() != other.start {
            return Err(Error::EndpointMismatch);
        }
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().copied());
        Ok(MappingPath {
            sort: self.sort,
            start: self.start,
            segments,
        })
    }

    pub fn reverse(&self) -> MappingPath {
        MappingPath {
            sort: self.sort,
            start: self.end(),
            segments: self.segments.iter().rev().map(PathSegment::reversed).collect(),
        }
    }

    /// No segment of one path is weakly equal to a segment of the other.
    pub fn is_disjoint_from(&self, other: &MappingPath) -> bool {
        let mine: std::collections::HashSet<_> = self.segments.iter().map(PathSegment::class).collect();
        other.segments.iter().all(|s| !mine.contains(&s.class()))
    }

    /// `[(Sort,d-13^op,S/I),(S/I,d13,Interface)]` style rendering.
    pub fn display(&self, d: &Diagram) -> String {
        let mut out = String::from("[");
        for (k, s) in self.segments.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let op = if s.dir == Direction::Opposite { "^op" } else { "" };
            let _ = write!(
                out,
                "({},{}{},{})",
                elem_name(d, self.sort, s.left),
                d.shape().edge(s.edge).name,
                op,
                elem_name(d, self.sort, s.right)
            );
        }
        out.push(']');
        out
    }
}

pub fn elem_name(d: &Diagram, sort: usize, e: ElemRef) -> &str {
    d.component(e.vertex).id(sort, e.index)
}

/// One element graph edge: `source` is the node of `y`, `target` the node of `D_d(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphEdge {
    pub edge: usize,
    pub source: usize,
    pub target: usize,
}

/// The elements of one sort across all components, joined by one edge per
/// pair `(d, y)` with `y ∈ D_{s(d)}(X)`.
#[derive(Debug, Clone)]
pub struct ElementGraph {
    pub sort: usize,
    nodes: Vec<ElemRef>,
    offsets: Vec<usize>,
    edges: Vec<GraphEdge>,
    adjacency: Vec<Vec<(usize, Direction)>>,
}

impl ElementGraph {
    pub fn new(d: &Diagram, sort: usize) -> Self {
        let shape = d.shape();
        let mut nodes = Vec::new();
        let mut offsets = Vec::with_capacity(shape.vertex_count());
        for v in 0..shape.vertex_count() {
            offsets.push(nodes.len());
            nodes.extend((0..d.component(v).size(sort)).map(|i| ElemRef::new(v, i)));
        }
        let mut edges = Vec::new();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (k, e) in shape.edges().iter().enumerate() {
            for y in 0..d.component(e.source).size(sort) {
                let g = GraphEdge {
                    edge: k,
                    source: offsets[e.source] + y,
                    target: offsets[e.target] + d.arrow(k).apply(sort, y),
                };
                adjacency[g.source].push((edges.len(), Direction::Forward));
                adjacency[g.target].push((edges.len(), Direction::Opposite));
                edges.push(g);
            }
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        Self {
            sort,
            nodes,
            offsets,
            edges,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, e: ElemRef) -> usize {
        self.offsets[e.vertex] + e.index
    }

    pub fn elem(&self, node: usize) -> ElemRef {
        self.nodes[node]
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    /// `(graph edge, direction)` pairs leaving `node`, forward before opposite per edge.
    pub fn adjacent(&self, node: usize) -> &[(usize, Direction)] {
        &self.adjacency[node]
    }

    /// The node reached by traversing graph edge `g` in direction `dir`.
    pub fn far_end(&self, g: usize, dir: Direction) -> usize {
        match dir {
            Direction::Forward => self.edges[g].target,
            Direction::Opposite => self.edges[g].source,
        }
    }

    pub fn segment(&self, g: usize, dir: Direction) -> PathSegment {
        let e = self.edges[g];
        let (l, r) = match dir {
            Direction::Forward => (e.source, e.target),
            Direction::Opposite => (e.target, e.source),
        };
        PathSegment {
            left: self.nodes[l],
            edge: e.edge,
            dir,
            right: self.nodes[r],
        }
    }

    pub fn path(&self, start: usize, steps: &[(usize, Direction)]) -> MappingPath {
        MappingPath {
            sort: self.sort,
            start: self.nodes[start],
            segments: steps.iter().map(|&(g, dir)| self.segment(g, dir)).collect(),
        }
    }

    /// Visits every proper path (optionally only inner-cycle-free ones)
    /// starting at `start`, the empty one first. The visitor returns `false`
    /// to stop the search; the result is `false` iff it was stopped.
    pub fn walk_proper(
        &self,
        start: usize,
        inner_cycle_free_only: bool,
        budget: &mut u64,
        visit: &mut dyn FnMut(usize, &[(usize, Direction)]) -> bool,
    ) -> Result<bool> {
        self.walk_proper_bounded(start, inner_cycle_free_only, usize::MAX, budget, visit)
    }

    /// [`Self::walk_proper`] restricted to paths of at most `max_len` segments.
    pub fn walk_proper_bounded(
        &self,
        start: usize,
        inner_cycle_free_only: bool,
        max_len: usize,
        budget: &mut u64,
        visit: &mut dyn FnMut(usize, &[(usize, Direction)]) -> bool,
    ) -> Result<bool> {
        let mut walker = Walker {
            max_len,
            g: self,
            start,
            icf: inner_cycle_free_only,
            used: vec![false; self.edges.len()],
            on_path: vec![false; self.nodes.len()],
            steps: Vec::new(),
            budget,
            initial: 0,
        };
        walker.initial = *walker.budget;
        walker.on_path[start] = true;
        if !visit(start, &[]) {
            return Ok(false);
        }
        walker.extend(start, visit)
    }
}

struct Walker<'a> {
    g: &'a ElementGraph,
    max_len: usize,
    start: usize,
    icf: bool,
    used: Vec<bool>,
    on_path: Vec<bool>,
    steps: Vec<(usize, Direction)>,
    budget: &'a mut u64,
    initial: u64,
}

impl Walker<'_> {
    fn extend(&mut self, node: usize, visit: &mut dyn FnMut(usize, &[(usize, Direction)]) -> bool) -> Result<bool> {
        for &(g, dir) in self.g.adjacent(node) {
            if self.used[g] {
                continue;
            }
            let next = self.g.far_end(g, dir);
            let closing = next == self.start;
            if self.icf && self.on_path[next] && !closing {
                continue;
            }
            if *self.budget == 0 {
                return Err(Error::BudgetExhausted(self.initial));
            }
            *self.budget -= 1;
            self.used[g] = true;
            self.steps.push((g, dir));
            debug_assert!(self.steps.len() <= self.g.edge_count());
            let mut keep_going = visit(next, &self.steps);
            // an inner-cycle-free path cannot continue once it has closed
            if keep_going && !(self.icf && closing) && self.steps.len() < self.max_len {
                let fresh = !self.on_path[next];
                self.on_path[next] = true;
                keep_going = self.extend(next, visit)?;
                if fresh {
                    self.on_path[next] = false;
                }
            }
            self.steps.pop();
            self.used[g] = false;
            if !keep_going {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// All proper paths from `z` to `z2`, shortest first then by segment keys.
pub fn enumerate_proper_paths(
    d: &Diagram,
    sort: usize,
    z: ElemRef,
    z2: ElemRef,
    inner_cycle_free_only: bool,
    budget: &mut u64,
) -> Result<Vec<MappingPath>> {
    let g = ElementGraph::new(d, sort);
    let target = g.node(z2);
    let mut out = Vec::new();
    g.walk_proper(g.node(z), inner_cycle_free_only, budget, &mut |end, steps| {
        if end == target {
            out.push(g.path(g.node(z), steps));
        }
        true
    })?;
    out.sort_by(MappingPath::canonical_cmp);
    Ok(out)
}

/// All non-empty proper paths from `z` back to `z`.
pub fn enumerate_cyclic_proper(
    d: &Diagram,
    sort: usize,
    z: ElemRef,
    inner_cycle_free_only: bool,
    budget: &mut u64,
) -> Result<Vec<MappingPath>> {
    let mut all = enumerate_proper_paths(d, sort, z, z, inner_cycle_free_only, budget)?;
    all.retain(|p| !p.is_empty());
    Ok(all)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::presheaf::{BaseSignature, Presheaf, PresheafMorphism};
    use crate::shape::ShapeGraph;

    fn set(sig: &Arc<BaseSignature>, elems: &[&str]) -> Arc<Presheaf> {
        Arc::new(Presheaf::new(sig.clone(), vec![elems.iter().map(|e| e.to_string()).collect()], vec![]).unwrap())
    }

    fn diagram(vertices: &[(&str, &[&str])], edges: &[(&str, &str, &str, &[usize])]) -> Diagram {
        let sig = Arc::new(BaseSignature::sets());
        let comps: Vec<_> = vertices.iter().map(|(_, es)| set(&sig, es)).collect();
        let shape = ShapeGraph::new(
            vertices.iter().map(|v| v.0),
            edges
                .iter()
                .map(|e| (e.0.to_string(), e.1.to_string(), e.2.to_string())),
        )
        .unwrap();
        let arrows = edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let se = shape.edge(k);
                PresheafMorphism::new(comps[se.source].clone(), comps[se.target].clone(), vec![e.3.to_vec()]).unwrap()
            })
            .collect();
        Diagram::new(sig, shape, comps, arrows).unwrap()
    }

    fn f1() -> Diagram {
        diagram(
            &[("1", &["*1"]), ("2", &["*2"])],
            &[("d", "1", "2", &[0]), ("d'", "1", "2", &[0])],
        )
    }

    fn f4() -> Diagram {
        diagram(
            &[("1", &["x"]), ("2", &["y", "z"])],
            &[("f", "1", "2", &[0]), ("g", "1", "2", &[1])],
        )
    }

    fn f2() -> Diagram {
        diagram(
            &[("0", &["x", "y"]), ("1", &["*1"]), ("2", &["*2"])],
            &[("d", "0", "1", &[0, 0]), ("d'", "0", "2", &[0, 0])],
        )
    }

    fn f3() -> Diagram {
        diagram(&[("1", &["*"])], &[("d", "1", "1", &[0])])
    }

    fn seg(left: (usize, usize), edge: usize, dir: Direction, right: (usize, usize)) -> PathSegment {
        PathSegment {
            left: ElemRef::new(left.0, left.1),
            edge,
            dir,
            right: ElemRef::new(right.0, right.1),
        }
    }

    fn f1_witness() -> MappingPath {
        MappingPath::new(
            0,
            ElemRef::new(1, 0),
            vec![
                seg((1, 0), 0, Direction::Opposite, (0, 0)),
                seg((0, 0), 1, Direction::Forward, (1, 0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn weak_equality() {
        let a = seg((0, 0), 0, Direction::Forward, (1, 0));
        assert!(weak_equal(&a, &a.reversed()));
        assert!(weak_equal(&a, &a));
        let b = seg((0, 0), 1, Direction::Forward, (1, 1));
        assert!(!weak_equal(&a, &b));
    }

    #[test]
    fn properness() {
        let d = f4();
        let backtrack = MappingPath::new(
            0,
            ElemRef::new(1, 0),
            vec![
                seg((1, 0), 0, Direction::Opposite, (0, 0)),
                seg((0, 0), 0, Direction::Forward, (1, 0)),
            ],
        )
        .unwrap();
        assert!(backtrack.validate(&d).is_ok());
        assert!(!backtrack.is_proper());
        assert!(MappingPath::empty(0, ElemRef::new(0, 0)).is_proper());
        let w = f1_witness();
        assert!(w.validate(&f1()).is_ok());
        assert!(w.is_proper());
    }

    #[test]
    fn inner_cycle_freeness() {
        let w = f1_witness();
        assert!(w.is_inner_cycle_free());
        let single = MappingPath::new(0, ElemRef::new(0, 0), vec![seg((0, 0), 0, Direction::Forward, (1, 0))]).unwrap();
        assert!(single.is_inner_cycle_free());
        let mut twice = w.clone();
        twice.segments.extend(w.segments.clone());
        assert!(!twice.is_inner_cycle_free());
    }

    #[test]
    fn reduction_excises_detour() {
        let d = f2();
        // *1 -> x -> *1 -> y -> *2 : the detour through x is excised
        let p = MappingPath::new(
            0,
            ElemRef::new(1, 0),
            vec![
                seg((1, 0), 0, Direction::Opposite, (0, 0)),
                seg((0, 0), 0, Direction::Forward, (1, 0)),
                seg((1, 0), 0, Direction::Opposite, (0, 1)),
                seg((0, 1), 1, Direction::Forward, (2, 0)),
            ],
        )
        .unwrap();
        assert!(p.validate(&d).is_ok());
        let r = p.reduce_inner_cycles();
        assert!(r.is_inner_cycle_free());
        assert_eq!(r.start, p.start);
        assert_eq!(r.end(), p.end());
        assert_eq!(r.segments, p.segments[2..].to_vec());
        assert!(r.validate(&d).is_ok());
        assert_eq!(f1_witness().reduce_inner_cycles(), f1_witness());
    }

    #[test]
    fn f4_paths() {
        let d = f4();
        let mut budget = DEFAULT_BUDGET;
        let yz = enumerate_proper_paths(&d, 0, ElemRef::new(1, 0), ElemRef::new(1, 1), false, &mut budget).unwrap();
        assert_eq!(yz.len(), 1);
        assert_eq!(yz[0].display(&d), "[(y,f^op,x),(x,g,z)]");
        let yy = enumerate_proper_paths(&d, 0, ElemRef::new(1, 0), ElemRef::new(1, 0), false, &mut budget).unwrap();
        assert_eq!(yy.len(), 1);
        assert!(yy[0].is_empty());
        assert!(enumerate_cyclic_proper(&d, 0, ElemRef::new(0, 0), false, &mut budget)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn f2_paths() {
        let d = f2();
        let mut budget = DEFAULT_BUDGET;
        let ps = enumerate_proper_paths(&d, 0, ElemRef::new(1, 0), ElemRef::new(2, 0), false, &mut budget).unwrap();
        let shown: Vec<String> = ps.iter().map(|p| p.display(&d)).collect();
        assert_eq!(shown, ["[(*1,d^op,x),(x,d',*2)]", "[(*1,d^op,y),(y,d',*2)]"]);
    }

    #[test]
    fn cyclic_paths() {
        let mut budget = DEFAULT_BUDGET;
        let d = f1();
        let cycles = enumerate_cyclic_proper(&d, 0, ElemRef::new(1, 0), false, &mut budget).unwrap();
        assert!(cycles.contains(&f1_witness()));
        let d = f3();
        let cycles = enumerate_cyclic_proper(&d, 0, ElemRef::new(0, 0), false, &mut budget).unwrap();
        assert!(cycles.iter().any(|p| p.display(&d) == "[(*,d,*)]"));
    }

    #[test]
    fn concat_and_reverse() {
        let w = f1_witness();
        let unit = MappingPath::empty(0, w.end());
        assert_eq!(w.concat(&unit).unwrap(), w);
        assert_eq!(w.reverse().reverse(), w);
        assert_eq!(w.reverse().display(&f1()), "[(*2,d'^op,*1),(*1,d,*2)]");
        let elsewhere = MappingPath::empty(0, ElemRef::new(0, 0));
        assert!(matches!(w.concat(&elsewhere), Err(Error::EndpointMismatch)));
    }

    #[test]
    fn budget_is_enforced() {
        let d = f2();
        let mut budget = 1;
        let r = enumerate_proper_paths(&d, 0, ElemRef::new(1, 0), ElemRef::new(2, 0), false, &mut budget);
        assert!(matches!(r, Err(Error::BudgetExhausted(_))));
    }
}
