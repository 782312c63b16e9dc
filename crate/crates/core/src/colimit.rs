//! Colimits of diagrams: the universal coproduct-and-quotient recipe, the
//! specialized construction over minimal components, and helpers around them.

use std::sync::Arc;

use crate::diagram::Diagram;
use crate::error::{Error, Result};
use crate::paths::{Direction, ElemRef, MappingPath, PathSegment};
use crate::presheaf::{coproduct, quotient, Congruence, Coproduct, Presheaf, PresheafMorphism};
use crate::shape::{Branch, ShapeEdge, ShapeGraph};

/// An apex with one leg per shape vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cocone {
    pub apex: Arc<Presheaf>,
    pub legs: Vec<PresheafMorphism>,
}

impl Cocone {
    /// `κ_{t(d)} ∘ D_d = κ_{s(d)}` for every edge.
    pub fn check_commutative(&self, d: &Diagram) -> Result<()> {
        if self.legs.len() != d.shape().vertex_count() {
            return Err(Error::NotCommutative("one leg per vertex required".into()));
        }
        for (v, leg) in self.legs.iter().enumerate() {
            if leg.domain() != d.component(v) || *leg.codomain() != self.apex {
                return Err(Error::NotCommutative(format!(
                    "leg {} has wrong endpoints",
                    d.shape().vertices()[v]
                )));
            }
        }
        let sig = d.signature();
        for (k, e) in d.shape().edges().iter().enumerate() {
            for x in 0..sig.sort_count() {
                for y in 0..d.component(e.source).size(x) {
                    if self.legs[e.target].apply(x, d.arrow(k).apply(x, y)) != self.legs[e.source].apply(x, y) {
                        return Err(Error::NotCommutative(format!(
                            "edge {}, sort {}, element {}",
                            e.name,
                            sig.sorts()[x],
                            d.component(e.source).id(x, y)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_jointly_surjective(&self) -> bool {
        (0..self.apex.signature().sort_count()).all(|x| {
            let mut hit = vec![false; self.apex.size(x)];
            for leg in &self.legs {
                for &v in leg.component(x) {
                    hit[v] = true;
                }
            }
            hit.into_iter().all(|b| b)
        })
    }
}

fn vertex_coproduct(d: &Diagram, vertices: &[usize]) -> Result<Coproduct> {
    let parts: Vec<(String, Arc<Presheaf>)> = vertices
        .iter()
        .map(|&v| (d.shape().vertices()[v].clone(), d.component(v).clone()))
        .collect();
    coproduct(d.signature(), &parts)
}

/// `(∐ Dᵢ)/≡` with `≡` generated by `y ~ D_d(y)` over all edges.
pub fn colimit_universal(d: &Diagram) -> Result<Cocone> {
    let all: Vec<usize> = (0..d.shape().vertex_count()).collect();
    let coprod = vertex_coproduct(d, &all)?;
    let sig = d.signature();
    let mut pairs = Vec::new();
    for (k, e) in d.shape().edges().iter().enumerate() {
        for x in 0..sig.sort_count() {
            for y in 0..d.component(e.source).size(x) {
                pairs.push((
                    x,
                    coprod.embed(e.source, x, y),
                    coprod.embed(e.target, x, d.arrow(k).apply(x, y)),
                ));
            }
        }
    }
    let congruence = Congruence::from_pairs(&coprod.object, &pairs);
    let q = quotient(&coprod.object, &congruence)?;
    let legs = coprod
        .injections
        .iter()
        .map(|inj| inj.then(&q.projection))
        .collect::<Result<_>>()?;
    Ok(Cocone { apex: q.object, legs })
}

/// The parallel pair `∐_{d∈I₁} D_{s(d)} ⇉ ∐_{j∈I₀} Dⱼ` whose coequalizer is the colimit.
#[derive(Debug, Clone)]
pub struct CoequalizerForm {
    /// Shape `1 ⇉ 2`; edge `d` is `⟨⊆_{t(e)} ∘ D_e⟩`, edge `d'` is `⟨⊆_{s(e)}⟩`.
    pub diagram: Diagram,
    pub edge_coproduct: Coproduct,
    pub vertex_coproduct: Coproduct,
}

pub fn universal_coequalizer_form(d: &Diagram) -> Result<CoequalizerForm> {
    let shape = d.shape();
    let all: Vec<usize> = (0..shape.vertex_count()).collect();
    let vertices = vertex_coproduct(d, &all)?;
    let parts: Vec<(String, Arc<Presheaf>)> = shape
        .edges()
        .iter()
        .map(|e| (e.name.clone(), d.component(e.source).clone()))
        .collect();
    let edges = coproduct(d.signature(), &parts)?;
    let (mut moved, mut kept) = (Vec::new(), Vec::new());
    for (k, e) in shape.edges().iter().enumerate() {
        moved.push(d.arrow(k).then(&vertices.injections[e.target])?);
        kept.push(vertices.injections[e.source].clone());
    }
    let (along, stay) = if shape.edge_count() == 0 {
        let empty = edges.object.clone();
        let comps: Vec<Vec<usize>> = vec![Vec::new(); d.signature().sort_count()];
        let f = PresheafMorphism::new(empty.clone(), vertices.object.clone(), comps.clone())?;
        (f.clone(), f)
    } else {
        (edges.copair(&moved)?, edges.copair(&kept)?)
    };
    let diagram = Diagram::new(
        d.signature().clone(),
        ShapeGraph::parallel_pair(),
        vec![edges.object.clone(), vertices.object.clone()],
        vec![along, stay],
    )?;
    Ok(CoequalizerForm {
        diagram,
        edge_coproduct: edges,
        vertex_coproduct: vertices,
    })
}

/// A pair `(D_p(y), D_{p'}(y))` forced by two branches out of a common source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimaryIdentification {
    pub sort: usize,
    pub left: ElemRef,
    pub right: ElemRef,
    pub branches: (Branch, Branch),
    pub source: ElemRef,
    /// Up `p` from `left` to `y`, then down `p'` to `right`: one branching position.
    pub witness: MappingPath,
}

/// Forward path from `start` along an edge sequence.
pub fn forward_path(d: &Diagram, sort: usize, start: ElemRef, edges: &[usize]) -> MappingPath {
    let mut cur = start;
    let mut segments = Vec::with_capacity(edges.len());
    for &e in edges {
        let next = ElemRef::new(d.shape().edge(e).target, d.arrow(e).apply(sort, cur.index));
        segments.push(PathSegment {
            left: cur,
            edge: e,
            dir: Direction::Forward,
            right: next,
        });
        cur = next;
    }
    MappingPath { sort, start, segments }
}

pub fn primary_identifications(d: &Diagram) -> Result<Vec<PrimaryIdentification>> {
    let branches = d.shape().enumerate_branches()?;
    let sig = d.signature();
    let mut out = Vec::new();
    for (a, p) in branches.iter().enumerate() {
        for q in &branches[a + 1..] {
            if q.source != p.source || q.edges[0] == p.edges[0] {
                continue;
            }
            for x in 0..sig.sort_count() {
                for y in 0..d.component(p.source).size(x) {
                    let source = ElemRef::new(p.source, y);
                    let down_p = forward_path(d, x, source, &p.edges);
                    let down_q = forward_path(d, x, source, &q.edges);
                    let witness = down_p.reverse().concat(&down_q)?;
                    out.push(PrimaryIdentification {
                        sort: x,
                        left: down_p.end(),
                        right: down_q.end(),
                        branches: (p.clone(), q.clone()),
                        source,
                        witness,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Smallest equivalence containing `pairs`, checked to be op-compatible.
pub fn congruence_closure(base: &Presheaf, pairs: &[(usize, usize, usize)]) -> Result<Congruence> {
    let c = Congruence::from_pairs(base, pairs);
    c.check_compatible(base)?;
    Ok(c)
}

/// `(∐_{i∈Min(I)} Dᵢ)/≅` with legs factoring through the first path to a minimal index.
pub fn colimit_specialized(d: &Diagram) -> Result<Cocone> {
    let shape = d.shape();
    if shape.has_directed_cycle() {
        return Err(Error::DirectedCycle);
    }
    let mins = shape.min_indices();
    let part_of = |v: usize| mins.iter().position(|&m| m == v).expect("minimal vertex");
    let coprod = vertex_coproduct(d, &mins)?;
    let pairs: Vec<(usize, usize, usize)> = primary_identifications(d)?
        .iter()
        .map(|p| {
            (
                p.sort,
                coprod.embed(part_of(p.left.vertex), p.sort, p.left.index),
                coprod.embed(part_of(p.right.vertex), p.sort, p.right.index),
            )
        })
        .collect();
    let congruence = congruence_closure(&coprod.object, &pairs)?;
    let q = quotient(&coprod.object, &congruence)?;
    let mut legs = Vec::with_capacity(shape.vertex_count());
    for v in 0..shape.vertex_count() {
        let path = shape.canonical_path_to_minimal(v)?;
        let target = path.last().map_or(v, |&e| shape.edge(e).target);
        let min_leg = coprod.injections[part_of(target)].then(&q.projection)?;
        legs.push(if path.is_empty() {
            min_leg
        } else {
            d.composite(&path)?.then(&min_leg)?
        });
    }
    Ok(Cocone { apex: q.object, legs })
}

/// The unique `u: c.apex → rho.apex` with `u ∘ κᵢ = ρᵢ`.
pub fn mediating_morphism(d: &Diagram, c: &Cocone, rho: &Cocone) -> Result<PresheafMorphism> {
    rho.check_commutative(d)?;
    let sig = d.signature();
    let mut comps = Vec::with_capacity(sig.sort_count());
    for x in 0..sig.sort_count() {
        let mut u: Vec<Option<usize>> = vec![None; c.apex.size(x)];
        for (v, leg) in c.legs.iter().enumerate() {
            for a in 0..d.component(v).size(x) {
                let s = leg.apply(x, a);
                let val = rho.legs[v].apply(x, a);
                match u[s] {
                    Some(prev) if prev != val => {
                        return Err(Error::NotCommutative(format!(
                            "apex element {} has two candidate images",
                            c.apex.id(x, s)
                        )))
                    }
                    _ => u[s] = Some(val),
                }
            }
        }
        let comp = u
            .into_iter()
            .enumerate()
            .map(|(s, v)| {
                v.ok_or_else(|| Error::Precondition(format!("apex element {} is not hit by any leg", c.apex.id(x, s))))
            })
            .collect::<Result<Vec<_>>>()?;
        comps.push(comp);
    }
    Ok(PresheafMorphism::new(c.apex.clone(), rho.apex.clone(), comps)?)
}

/// Whether the mediator between two cocones over `d` exists and is bijective.
pub fn cocones_isomorphic(d: &Diagram, a: &Cocone, b: &Cocone) -> bool {
    mediating_morphism(d, a, b).is_ok_and(|u| u.is_bijective())
}

/// The span `B ←[id,id]– B+B –[f,g]→ D` for a parallel pair `f, g: B → D`.
pub fn coequalizer_as_pushout(f: &PresheafMorphism, g: &PresheafMorphism) -> Result<Diagram> {
    if f.domain() != g.domain() {
        return Err(Error::NotComposable);
    }
    if f.codomain() != g.codomain() {
        return Err(Error::CodomainMismatch);
    }
    let b = f.domain().clone();
    let sig = b.signature().clone();
    let bb = coproduct(&sig, &[("1".into(), b.clone()), ("2".into(), b.clone())])?;
    let id = PresheafMorphism::identity(&b);
    let fold = bb.copair(&[id.clone(), id])?;
    let fg = bb.copair(&[f.clone(), g.clone()])?;
    let shape = ShapeGraph::from_parts(
        vec!["B+B".into(), "B".into(), "D".into()],
        vec![
            ShapeEdge {
                name: "[id,id]".into(),
                source: 0,
                target: 1,
            },
            ShapeEdge {
                name: "[f,g]".into(),
                source: 0,
                target: 2,
            },
        ],
    );
    Ok(Diagram::new(
        sig,
        shape,
        vec![bb.object.clone(), b, f.codomain().clone()],
        vec![fold, fg],
    )?)
}

/// The diagram `B ⇉ D` of a parallel pair.
pub fn parallel_pair_diagram(f: &PresheafMorphism, g: &PresheafMorphism) -> Result<Diagram> {
    if f.domain() != g.domain() {
        return Err(Error::NotComposable);
    }
    if f.codomain() != g.codomain() {
        return Err(Error::CodomainMismatch);
    }
    Ok(Diagram::new(
        f.domain().signature().clone(),
        ShapeGraph::parallel_pair(),
        vec![f.domain().clone(), f.codomain().clone()],
        vec![f.clone(), g.clone()],
    )?)
}

/// A diagram with irrelevant and jump-over vertices eliminated, plus what is
/// needed to lift a cocone back to the original shape.
#[derive(Debug, Clone)]
pub struct Simplified {
    pub diagram: Diagram,
    /// Original vertex → vertex of the simplified diagram, if kept.
    pub kept: Vec<Option<usize>>,
    /// Removed vertices in removal order, each with the original edge
    /// sequence leading to the vertex its leg factors through.
    pub removed: Vec<(usize, Vec<usize>)>,
}

/// Repeatedly drops a vertex with no incoming and one outgoing edge, or
/// replaces a vertex with one incoming and one outgoing edge by the composite.
pub fn simplify(d: &Diagram) -> Result<Simplified> {
    let shape = d.shape();
    let n = shape.vertex_count();
    let mut alive = vec![true; n];
    // current edges: (name, source, target, original edge sequence)
    let mut edges: Vec<(String, usize, usize, Vec<usize>)> = shape
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| (e.name.clone(), e.source, e.target, vec![k]))
        .collect();
    let mut removed = Vec::new();
    loop {
        let outs = |v: usize, es: &[(String, usize, usize, Vec<usize>)]| {
            es.iter()
                .enumerate()
                .filter(|(_, e)| e.1 == v)
                .map(|(k, _)| k)
                .collect::<Vec<_>>()
        };
        let ins = |v: usize, es: &[(String, usize, usize, Vec<usize>)]| {
            es.iter()
                .enumerate()
                .filter(|(_, e)| e.2 == v)
                .map(|(k, _)| k)
                .collect::<Vec<_>>()
        };
        let step = (0..n).filter(|&v| alive[v]).find_map(|v| {
            let o = outs(v, &edges);
            let i = ins(v, &edges);
            if o.len() != 1 || edges[o[0]].2 == v {
                return None;
            }
            match i.len() {
                0 => Some((v, None, o[0])),
                1 if edges[i[0]].1 != v => Some((v, Some(i[0]), o[0])),
                _ => None,
            }
        });
        let Some((v, incoming, out)) = step else { break };
        let (out_name, _, _, out_seq) = edges[out].clone();
        removed.push((v, out_seq.clone()));
        alive[v] = false;
        if let Some(a) = incoming {
            let (a_name, a_src, _, a_seq) = edges[a].clone();
            let mut seq = a_seq;
            seq.extend(out_seq);
            edges[a] = (format!("{a_name};{out_name}"), a_src, edges[out].2, seq);
        }
        edges.remove(out);
    }
    let mut kept = vec![None; n];
    let mut next = 0;
    for v in 0..n {
        if alive[v] {
            kept[v] = Some(next);
            next += 1;
        }
    }
    let new_shape = ShapeGraph::from_parts(
        (0..n)
            .filter(|&v| alive[v])
            .map(|v| shape.vertices()[v].clone())
            .collect(),
        edges
            .iter()
            .map(|(name, s, t, _)| ShapeEdge {
                name: name.clone(),
                source: kept[*s].expect("alive"),
                target: kept[*t].expect("alive"),
            })
            .collect(),
    );
    let arrows = edges.iter().map(|e| d.composite(&e.3)).collect::<Result<Vec<_>>>()?;
    let components = (0..n).filter(|&v| alive[v]).map(|v| d.component(v).clone()).collect();
    let diagram = Diagram::new(d.signature().clone(), new_shape, components, arrows)?;
    Ok(Simplified { diagram, kept, removed })
}

impl Simplified {
    /// Extends a cocone over the simplified diagram to the original one.
    pub fn lift_cocone(&self, original: &Diagram, c: &Cocone) -> Result<Cocone> {
        let n = original.shape().vertex_count();
        let mut legs: Vec<Option<PresheafMorphism>> = (0..n).map(|v| self.kept[v].map(|k| c.legs[k].clone())).collect();
        for (v, seq) in self.removed.iter().rev() {
            let target = original.shape().edge(*seq.last().expect("nonempty")).target;
            let via = legs[target].clone().expect("target leg computed first");
            legs[*v] = Some(original.composite(seq)?.then(&via)?);
        }
        Ok(Cocone {
            apex: c.apex.clone(),
            legs: legs.into_iter().map(|l| l.expect("every vertex has a leg")).collect(),
        })
    }
}
