//! Shape multigraphs and their structural analyses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};

/// Default cap on the number of enumerated elementary cycles.
pub const CYCLE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeEdge {
    pub name: String,
    pub source: usize,
    pub target: usize,
}

/// A finite directed multigraph `I` indexing a diagram.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShapeGraph {
    vertices: Vec<String>,
    edges: Vec<ShapeEdge>,
}

/// An edge sequence from a branching index to a minimal index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Branch {
    pub source: usize,
    pub edges: Vec<usize>,
    pub target: usize,
}

/// An elementary directed cycle, given by its edges in traversal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedCycle {
    pub edges: Vec<usize>,
}

/// An elementary undirected cycle. `steps[k] = (edge, forward)`; `forward`
/// means the edge is traversed from its source to its target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedCycle {
    pub start: usize,
    pub steps: Vec<(usize, bool)>,
}

impl UndirectedCycle {
    pub fn edge_set(&self) -> BTreeSet<usize> {
        self.steps.iter().map(|s| s.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexClass {
    Minimal,
    Branching,
    Irrelevant,
    JumpOver,
    Plain,
}

impl VertexClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexClass::Minimal => "minimal",
            VertexClass::Branching => "branching",
            VertexClass::Irrelevant => "irrelevant",
            VertexClass::JumpOver => "jump-over",
            VertexClass::Plain => "plain",
        }
    }
}

impl ShapeGraph {
    pub fn new<V, E>(vertices: V, edges: E) -> Result<Self, ValidationReport>
    where
        V: IntoIterator,
        V::Item: Into<String>,
        E: IntoIterator<Item = (String, String, String)>,
    {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        let mut report = ValidationReport::new();
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.as_str()) {
                report.push(format!("vertex {v}"), "duplicate vertex name");
            }
        }
        let mut names = BTreeSet::new();
        let mut out = Vec::new();
        for (name, src, tgt) in edges {
            if !names.insert(name.clone()) {
                report.push(format!("edge {name}"), "duplicate edge name");
            }
            let source = vertices.iter().position(|v| *v == src);
            let target = vertices.iter().position(|v| *v == tgt);
            match (source, target) {
                (Some(source), Some(target)) => out.push(ShapeEdge { name, source, target }),
                (None, _) => report.push(format!("edge {name}"), format!("undeclared source vertex {src}")),
                (_, None) => report.push(format!("edge {name}"), format!("undeclared target vertex {tgt}")),
            }
        }
        report.into_result()?;
        Ok(Self { vertices, edges: out })
    }

    /// Builds a shape from already-resolved edges. Panics on out-of-range endpoints.
    pub fn from_parts(vertices: Vec<String>, edges: Vec<ShapeEdge>) -> Self {
        assert!(edges
            .iter()
            .all(|e| e.source < vertices.len() && e.target < vertices.len()));
        Self { vertices, edges }
    }

    /// `1 ⇉ 2` with edges `d` and `d'`.
    pub fn parallel_pair() -> Self {
        Self::from_parts(
            vec!["1".into(), "2".into()],
            vec![
                ShapeEdge {
                    name: "d".into(),
                    source: 0,
                    target: 1,
                },
                ShapeEdge {
                    name: "d'".into(),
                    source: 0,
                    target: 1,
                },
            ],
        )
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[ShapeEdge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.name == name)
    }

    pub fn edge(&self, e: usize) -> &ShapeEdge {
        &self.edges[e]
    }

    pub fn out_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].source == v).collect()
    }

    pub fn in_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].target == v).collect()
    }

    /// `Min(I)`: vertices without outgoing edges.
    pub fn min_indices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.out_edges(v).is_empty())
            .collect()
    }

    /// `Br(I)`: vertices with at least two outgoing edges.
    pub fn branching_indices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.out_edges(v).len() >= 2)
            .collect()
    }

    pub fn is_minimal(&self, v: usize) -> bool {
        self.edges.iter().all(|e| e.source != v)
    }

    pub fn has_directed_cycle(&self) -> bool {
        self.topological_order().is_none()
    }

    /// Vertices ordered so that every edge goes from an earlier to a later one.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.vertices.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.target] += 1;
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for e in self.out_edges(v) {
                let t = self.edges[e].target;
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.push(t);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// All edge sequences from `v` to a minimal vertex, depth first in edge order.
    pub fn paths_to_minimal(&self, v: usize) -> Result<Vec<Vec<usize>>> {
        if self.has_directed_cycle() {
            return Err(Error::DirectedCycle);
        }
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.collect_paths(v, &mut stack, &mut out);
        Ok(out)
    }

    fn collect_paths(&self, v: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let outs = self.out_edges(v);
        if outs.is_empty() {
            out.push(stack.clone());
            return;
        }
        for e in outs {
            stack.push(e);
            self.collect_paths(self.edges[e].target, stack, out);
            stack.pop();
        }
    }

    /// The first edge sequence to a minimal vertex, always following the
    /// first outgoing edge.
    pub fn canonical_path_to_minimal(&self, v: usize) -> Result<Vec<usize>> {
        if self.has_directed_cycle() {
            return Err(Error::DirectedCycle);
        }
        let mut path = Vec::new();
        let mut cur = v;
        while let Some(&e) = self.out_edges(cur).first() {
            path.push(e);
            cur = self.edges[e].target;
        }
        Ok(path)
    }

    /// Every branch, grouped by branching index in vertex order.
    pub fn enumerate_branches(&self) -> Result<Vec<Branch>> {
        let mut out = Vec::new();
        for b in self.branching_indices() {
            for edges in self.paths_to_minimal(b)? {
                let target = self.edges[*edges.last().expect("branches are nonempty")].target;
                out.push(Branch {
                    source: b,
                    edges,
                    target,
                });
            }
        }
        Ok(out)
    }

    /// Branches that are not a proper suffix of another branch.
    pub fn maximal_branches(&self) -> Result<Vec<Branch>> {
        let all = self.enumerate_branches()?;
        Ok(all
            .iter()
            .filter(|b| {
                !all.iter()
                    .any(|o| o.edges.len() > b.edges.len() && o.edges.ends_with(&b.edges))
            })
            .cloned()
            .collect())
    }

    /// `Af(I)`: minimal vertices that are the target of some branch.
    pub fn affected_minimal(&self) -> Result<Vec<usize>> {
        let targets: BTreeSet<usize> = self.enumerate_branches()?.into_iter().map(|b| b.target).collect();
        Ok(targets.into_iter().collect())
    }

    /// Elementary directed cycles, each reported once starting at its least vertex.
    pub fn directed_cycles(&self, cap: usize) -> Result<Vec<DirectedCycle>> {
        let mut out = Vec::new();
        for s in 0..self.vertices.len() {
            let mut on_path = vec![false; self.vertices.len()];
            on_path[s] = true;
            let mut stack = Vec::new();
            self.directed_from(s, s, &mut on_path, &mut stack, &mut out, cap)?;
        }
        Ok(out)
    }

    fn directed_from(
        &self,
        s: usize,
        v: usize,
        on_path: &mut [bool],
        stack: &mut Vec<usize>,
        out: &mut Vec<DirectedCycle>,
        cap: usize,
    ) -> Result<()> {
        for e in self.out_edges(v) {
            let t = self.edges[e].target;
            if t == s {
                if out.len() >= cap {
                    return Err(Error::CycleOverflow { cap });
                }
                stack.push(e);
                out.push(DirectedCycle { edges: stack.clone() });
                stack.pop();
            } else if t > s && !on_path[t] {
                on_path[t] = true;
                stack.push(e);
                self.directed_from(s, t, on_path, stack, out, cap)?;
                stack.pop();
                on_path[t] = false;
            }
        }
        Ok(())
    }

    /// Elementary undirected cycles with at least two edges, each reported once.
    pub fn undirected_cycles(&self, cap: usize) -> Result<Vec<UndirectedCycle>> {
        let mut out = Vec::new();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for s in 0..self.vertices.len() {
            let mut on_path = vec![false; self.vertices.len()];
            on_path[s] = true;
            let mut steps = Vec::new();
            self.undirected_from(s, s, &mut on_path, &mut steps, &mut seen, &mut out, cap)?;
        }
        Ok(out)
    }

    fn incident(&self, v: usize) -> Vec<(usize, bool, usize)> {
        let mut out = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            if e.source == e.target {
                continue;
            }
            if e.source == v {
                out.push((k, true, e.target));
            }
            if e.target == v {
                out.push((k, false, e.source));
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn undirected_from(
        &self,
        s: usize,
        v: usize,
        on_path: &mut [bool],
        steps: &mut Vec<(usize, bool)>,
        seen: &mut BTreeSet<Vec<usize>>,
        out: &mut Vec<UndirectedCycle>,
        cap: usize,
    ) -> Result<()> {
        for (e, forward, w) in self.incident(v) {
            if steps.iter().any(|st| st.0 == e) {
                continue;
            }
            if w == s && !steps.is_empty() {
                steps.push((e, forward));
                let mut key: Vec<usize> = steps.iter().map(|st| st.0).collect();
                key.sort_unstable();
                if seen.insert(key) {
                    if out.len() >= cap {
                        return Err(Error::CycleOverflow { cap });
                    }
                    out.push(UndirectedCycle {
                        start: s,
                        steps: steps.clone(),
                    });
                }
                steps.pop();
            } else if w > s && !on_path[w] {
                on_path[w] = true;
                steps.push((e, forward));
                self.undirected_from(s, w, on_path, steps, seen, out, cap)?;
                steps.pop();
                on_path[w] = false;
            }
        }
        Ok(())
    }

    pub fn has_undirected_cycle(&self) -> bool {
        // a multigraph without loops is a forest iff |E| = |V| - #components
        let mut uf = crate::unionfind::UnionFind::new(self.vertices.len());
        self.edges
            .iter()
            .filter(|e| e.source != e.target)
            .any(|e| !uf.union(e.source, e.target))
    }

    /// Vertices that stop contributing once their predecessors are removed:
    /// no incoming edge from outside the set and exactly one outgoing edge.
    pub fn irrelevant_vertices(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut removed = vec![false; n];
        loop {
            let next = (0..n).find(|&v| {
                !removed[v]
                    && self.out_edges(v).len() == 1
                    && self.in_edges(v).iter().all(|&e| {
                        let src = self.edges[e].source;
                        src != v && removed[src]
                    })
            });
            match next {
                Some(v) => removed[v] = true,
                None => break,
            }
        }
        (0..n).filter(|&v| removed[v]).collect()
    }

    /// Exactly one incoming and one outgoing edge, not a loop.
    pub fn is_jump_over(&self, v: usize) -> bool {
        let ins = self.in_edges(v);
        self.out_edges(v).len() == 1 && ins.len() == 1 && self.edges[ins[0]].source != v
    }

    /// Minimal, then branching, then (iterated) irrelevant, then jump-over.
    pub fn classify_vertices(&self) -> Vec<VertexClass> {
        let irrelevant = self.irrelevant_vertices();
        (0..self.vertices.len())
            .map(|v| {
                let outs = self.out_edges(v).len();
                if outs == 0 {
                    VertexClass::Minimal
                } else if outs >= 2 {
                    VertexClass::Branching
                } else if irrelevant.contains(&v) {
                    VertexClass::Irrelevant
                } else if self.is_jump_over(v) {
                    VertexClass::JumpOver
                } else {
                    VertexClass::Plain
                }
            })
            .collect()
    }
}
