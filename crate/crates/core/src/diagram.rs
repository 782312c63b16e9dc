//! Diagrams `D: I → Set^B` and transformations between them.

use std::sync::Arc;

use crate::error::{Error, Result, ValidationReport};
use crate::presheaf::{is_pullback_square, BaseSignature, Presheaf, PresheafMorphism};
use crate::shape::{Branch, ShapeGraph};

/// A presheaf per shape vertex and a morphism per shape edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    sig: Arc<BaseSignature>,
    shape: ShapeGraph,
    components: Vec<Arc<Presheaf>>,
    arrows: Vec<PresheafMorphism>,
}

impl Diagram {
    pub fn new(
        sig: Arc<BaseSignature>,
        shape: ShapeGraph,
        components: Vec<Arc<Presheaf>>,
        arrows: Vec<PresheafMorphism>,
    ) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::new();
        if components.len() != shape.vertex_count() {
            report.push("components", "one component per shape vertex required");
        }
        if arrows.len() != shape.edge_count() {
            report.push("arrows", "one arrow per shape edge required");
        }
        if !report.is_empty() {
            return Err(report);
        }
        for (v, c) in components.iter().enumerate() {
            if **c.signature() != *sig {
                report.push(
                    format!("vertex {}", shape.vertices()[v]),
                    "component over a different signature",
                );
            }
        }
        for (k, a) in arrows.iter().enumerate() {
            let e = shape.edge(k);
            if **a.domain() != *components[e.source] {
                report.push(format!("edge {}", e.name), "arrow domain differs from source component");
            }
            if **a.codomain() != *components[e.target] {
                report.push(
                    format!("edge {}", e.name),
                    "arrow codomain differs from target component",
                );
            }
        }
        report.into_result()?;
        Ok(Self {
            sig,
            shape,
            components,
            arrows,
        })
    }

    pub fn signature(&self) -> &Arc<BaseSignature> {
        &self.sig
    }

    pub fn shape(&self) -> &ShapeGraph {
        &self.shape
    }

    pub fn component(&self, v: usize) -> &Arc<Presheaf> {
        &self.components[v]
    }

    pub fn components(&self) -> &[Arc<Presheaf>] {
        &self.components
    }

    pub fn arrow(&self, e: usize) -> &PresheafMorphism {
        &self.arrows[e]
    }

    pub fn arrows(&self) -> &[PresheafMorphism] {
        &self.arrows
    }

    pub fn is_empty(&self) -> bool {
        self.components.iter().all(|c| c.is_empty())
    }

    /// Follows an edge sequence from element `idx` of the sequence's source.
    pub fn apply_path(&self, edges: &[usize], sort: usize, idx: usize) -> usize {
        edges.iter().fold(idx, |y, &e| self.arrows[e].apply(sort, y))
    }

    /// The composite `D_p` of a nonempty edge sequence.
    pub fn composite(&self, edges: &[usize]) -> Result<PresheafMorphism> {
        let (first, rest) = edges
            .split_first()
            .ok_or_else(|| Error::Precondition("empty edge sequence".into()))?;
        rest.iter()
            .try_fold(self.arrows[*first].clone(), |acc, &e| acc.then(&self.arrows[e]))
    }

    pub fn branch_composite(&self, b: &Branch) -> Result<PresheafMorphism> {
        self.composite(&b.edges)
    }

    pub fn all_monic(&self) -> bool {
        self.arrows.iter().all(PresheafMorphism::is_injective)
    }

    /// Removes a set of vertices and every edge touching them.
    pub fn without_vertices(&self, drop: &[usize]) -> Diagram {
        let keep: Vec<usize> = (0..self.shape.vertex_count()).filter(|v| !drop.contains(v)).collect();
        let renumber = |v: usize| keep.iter().position(|&k| k == v);
        let mut edges = Vec::new();
        let mut arrows = Vec::new();
        for (k, e) in self.shape.edges().iter().enumerate() {
            if let (Some(s), Some(t)) = (renumber(e.source), renumber(e.target)) {
                edges.push(crate::shape::ShapeEdge {
                    name: e.name.clone(),
                    source: s,
                    target: t,
                });
                arrows.push(self.arrows[k].clone());
            }
        }
        let shape = ShapeGraph::from_parts(keep.iter().map(|&v| self.shape.vertices()[v].clone()).collect(), edges);
        Diagram {
            sig: self.sig.clone(),
            shape,
            components: keep.iter().map(|&v| self.components[v].clone()).collect(),
            arrows,
        }
    }
}

/// A family `τᵢ: Eᵢ → Dᵢ` over a common shape.
#[derive(Debug, Clone)]
pub struct DiagramTransformation {
    pub domain: Arc<Diagram>,
    pub codomain: Arc<Diagram>,
    pub components: Vec<PresheafMorphism>,
}

/// The first naturality square that is not a pullback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CartesianFailure {
    pub edge: String,
}

impl DiagramTransformation {
    pub fn new(
        domain: Arc<Diagram>,
        codomain: Arc<Diagram>,
        components: Vec<PresheafMorphism>,
    ) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::new();
        if domain.shape() != codomain.shape() {
            report.push("shape", "domain and codomain diagrams have different shapes");
            return Err(report);
        }
        if components.len() != domain.shape().vertex_count() {
            report.push("components", "one component per shape vertex required");
            return Err(report);
        }
        let shape = domain.shape();
        for (v, t) in components.iter().enumerate() {
            if t.domain() != domain.component(v) || t.codomain() != codomain.component(v) {
                report.push(
                    format!("vertex {}", shape.vertices()[v]),
                    "component has wrong endpoints",
                );
            }
        }
        if !report.is_empty() {
            return Err(report);
        }
        for (k, e) in shape.edges().iter().enumerate() {
            let sig = domain.signature();
            for x in 0..sig.sort_count() {
                for a in 0..domain.component(e.source).size(x) {
                    let left = components[e.target].apply(x, domain.arrow(k).apply(x, a));
                    let right = codomain.arrow(k).apply(x, components[e.source].apply(x, a));
                    if left != right {
                        report.push(
                            format!("edge {}, sort {}", e.name, sig.sorts()[x]),
                            format!("naturality fails at {}", domain.component(e.source).id(x, a)),
                        );
                    }
                }
            }
        }
        report.into_result()?;
        Ok(Self {
            domain,
            codomain,
            components,
        })
    }

    pub fn identity(d: &Arc<Diagram>) -> Self {
        Self {
            domain: d.clone(),
            codomain: d.clone(),
            components: d.components().iter().map(PresheafMorphism::identity).collect(),
        }
    }

    /// Checks that every naturality square is a pullback.
    pub fn cartesian_check(&self) -> Result<(), CartesianFailure> {
        for (k, e) in self.domain.shape().edges().iter().enumerate() {
            if !is_pullback_square(
                self.domain.arrow(k),
                &self.components[e.source],
                &self.components[e.target],
                self.codomain.arrow(k),
            ) {
                return Err(CartesianFailure { edge: e.name.clone() });
            }
        }
        Ok(())
    }

    pub fn is_cartesian(&self) -> bool {
        self.cartesian_check().is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(sig: &Arc<BaseSignature>, elems: &[&str]) -> Arc<Presheaf> {
        Arc::new(Presheaf::new(sig.clone(), vec![elems.iter().map(|e| e.to_string()).collect()], vec![]).unwrap())
    }

    fn map(a: &Arc<Presheaf>, b: &Arc<Presheaf>, comp: Vec<usize>) -> PresheafMorphism {
        PresheafMorphism::new(a.clone(), b.clone(), vec![comp]).unwrap()
    }

    /// `{a,b} ⇉ {a,b}` over `{*1} ⇉ {*2}` with arrows `(k, id)`.
    fn twisted(k_swaps: bool) -> DiagramTransformation {
        let sig = Arc::new(BaseSignature::sets());
        let d1 = set(&sig, &["*1"]);
        let d2 = set(&sig, &["*2"]);
        let d = Arc::new(
            Diagram::new(
                sig.clone(),
                ShapeGraph::parallel_pair(),
                vec![d1.clone(), d2.clone()],
                vec![map(&d1, &d2, vec![0]), map(&d1, &d2, vec![0])],
            )
            .unwrap(),
        );
        let e1 = set(&sig, &["a", "b"]);
        let e2 = set(&sig, &["a", "b"]);
        let k = if k_swaps { vec![1, 0] } else { vec![0, 1] };
        let e = Arc::new(
            Diagram::new(
                sig,
                ShapeGraph::parallel_pair(),
                vec![e1.clone(), e2.clone()],
                vec![map(&e1, &e2, k), map(&e1, &e2, vec![0, 1])],
            )
            .unwrap(),
        );
        DiagramTransformation::new(e, d, vec![map(&e1, &d1, vec![0, 0]), map(&e2, &d2, vec![0, 0])]).unwrap()
    }

    #[test]
    fn constant_typing_of_twisted_family_is_cartesian() {
        assert!(twisted(true).is_cartesian());
        assert!(twisted(false).is_cartesian());
    }

    #[test]
    fn identity_transformation_is_cartesian() {
        let t = twisted(true);
        assert!(DiagramTransformation::identity(&t.domain).is_cartesian());
    }

    #[test]
    fn wrong_fiber_size_names_the_square() {
        let t = twisted(false);
        let sig = t.domain.signature().clone();
        let e1 = set(&sig, &["a"]);
        let e2 = t.domain.component(1).clone();
        let e = Arc::new(
            Diagram::new(
                sig,
                ShapeGraph::parallel_pair(),
                vec![e1.clone(), e2.clone()],
                vec![map(&e1, &e2, vec![0]), map(&e1, &e2, vec![0])],
            )
            .unwrap(),
        );
        let d = t.codomain.clone();
        let bad = DiagramTransformation::new(
            e,
            d.clone(),
            vec![map(&e1, d.component(0), vec![0]), map(&e2, d.component(1), vec![0, 0])],
        )
        .unwrap();
        assert_eq!(bad.cartesian_check(), Err(CartesianFailure { edge: "d".into() }));
    }
}
