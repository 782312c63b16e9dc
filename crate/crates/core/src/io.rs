//! Workspace files and JSON renderings of cocones, verdicts and round-trips.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::colimit::Cocone;
use crate::diagram::{Diagram, DiagramTransformation};
use crate::error::{Error, Result, ValidationReport};
use crate::paths::{elem_name, Direction, ElemRef, MappingPath};
use crate::presheaf::{BaseSignature, Presheaf, PresheafMorphism, RawMorphism, RawPresheaf};
use crate::semantics::{RoundTrip, TypedInstance};
use crate::shape::ShapeGraph;
use crate::vk::{VkVerdict, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOp {
    pub name: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBase {
    pub sorts: Vec<String>,
    #[serde(default)]
    pub ops: Vec<RawOp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawShape {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub edges: Vec<RawOp>,
}

/// A transformation into the diagram of another workspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTyping {
    pub over: String,
    pub components: IndexMap<String, RawMorphism>,
}

/// An instance typed over the universal colimit apex of the workspace diagram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub name: String,
    pub instance: RawPresheaf,
    pub typing: RawMorphism,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWorkspace {
    pub base: RawBase,
    pub shape: RawShape,
    #[serde(default)]
    pub components: IndexMap<String, RawPresheaf>,
    #[serde(default)]
    pub arrows: IndexMap<String, RawMorphism>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typing: Option<RawTyping>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instances: Vec<RawInstance>,
}

/// A parsed and validated workspace.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub raw: RawWorkspace,
    pub diagram: Arc<Diagram>,
    pub typing: Option<Typing>,
}

#[derive(Debug, Clone)]
pub struct Typing {
    pub over: String,
    pub target: Box<Workspace>,
    pub family: DiagramTransformation,
}

fn prefixed(prefix: &str, r: ValidationReport) -> ValidationReport {
    let mut out = ValidationReport::new();
    for i in r.issues {
        out.push(format!("{prefix}: {}", i.location), i.message);
    }
    out
}

pub fn signature_from_raw(base: &RawBase) -> Result<Arc<BaseSignature>> {
    let sig = BaseSignature::new(
        base.sorts.iter().cloned(),
        base.ops
            .iter()
            .map(|o| (o.name.clone(), o.source.clone(), o.target.clone())),
    )
    .map_err(|r| prefixed("base", r))?;
    Ok(Arc::new(sig))
}

pub fn signature_to_raw(sig: &BaseSignature) -> RawBase {
    RawBase {
        sorts: sig.sorts().to_vec(),
        ops: sig
            .ops()
            .iter()
            .map(|o| RawOp {
                name: o.name.clone(),
                source: sig.sorts()[o.source].clone(),
                target: sig.sorts()[o.target].clone(),
            })
            .collect(),
    }
}

/// Resolves a raw workspace; `fetch` returns the text of a workspace named in a typing section.
pub fn resolve(raw: RawWorkspace, fetch: &dyn Fn(&str) -> Result<String>) -> Result<Workspace> {
    let sig = signature_from_raw(&raw.base)?;
    let shape = ShapeGraph::new(
        raw.shape.vertices.iter().cloned(),
        raw.shape
            .edges
            .iter()
            .map(|e| (e.name.clone(), e.source.clone(), e.target.clone())),
    )
    .map_err(|r| prefixed("shape", r))?;
    let mut report = ValidationReport::new();
    for v in raw.components.keys() {
        if shape.vertex_index(v).is_none() {
            report.push(format!("component {v}"), "no such shape vertex");
        }
    }
    for e in raw.arrows.keys() {
        if shape.edge_index(e).is_none() {
            report.push(format!("arrow {e}"), "no such shape edge");
        }
    }
    let mut components = Vec::with_capacity(shape.vertex_count());
    for v in shape.vertices() {
        let p = match raw.components.get(v) {
            Some(rp) => Presheaf::from_raw(sig.clone(), rp).unwrap_or_else(|r| {
                report.extend(prefixed(&format!("component {v}"), r));
                Presheaf::empty(sig.clone())
            }),
            None => {
                report.push(format!("component {v}"), "missing");
                Presheaf::empty(sig.clone())
            }
        };
        components.push(Arc::new(p));
    }
    if !report.is_empty() {
        return Err(report.into());
    }
    let mut arrows = Vec::with_capacity(shape.edge_count());
    for e in shape.edges() {
        let (dom, cod) = (components[e.source].clone(), components[e.target].clone());
        let m = match raw.arrows.get(&e.name) {
            Some(rm) => PresheafMorphism::from_raw(dom, cod, rm).map_err(|r| prefixed(&format!("arrow {}", e.name), r)),
            None => {
                let mut r = ValidationReport::new();
                r.push(format!("arrow {}", e.name), "missing");
                Err(r)
            }
        };
        match m {
            Ok(m) => arrows.push(m),
            Err(r) => report.extend(r),
        }
    }
    report.into_result()?;
    let diagram = Arc::new(Diagram::new(sig, shape, components, arrows)?);
    let typing = match &raw.typing {
        None => None,
        Some(t) => Some(resolve_typing(&diagram, t, fetch)?),
    };
    Ok(Workspace { raw, diagram, typing })
}

fn resolve_typing(e: &Arc<Diagram>, t: &RawTyping, fetch: &dyn Fn(&str) -> Result<String>) -> Result<Typing> {
    let text = fetch(&t.over)?;
    let target = parse_workspace(&text, fetch)?;
    let d = target.diagram.clone();
    let mut report = ValidationReport::new();
    if d.shape() != e.shape() {
        report.push("typing", format!("shape differs from the shape of {}", t.over));
        return Err(report.into());
    }
    if d.signature() != e.signature() {
        report.push("typing", format!("base differs from the base of {}", t.over));
        return Err(report.into());
    }
    let mut comps = Vec::new();
    for (v, name) in e.shape().vertices().iter().enumerate() {
        let empty = RawMorphism::new();
        let rm = t.components.get(name).unwrap_or(&empty);
        match PresheafMorphism::from_raw(e.component(v).clone(), d.component(v).clone(), rm) {
            Ok(m) => comps.push(m),
            Err(r) => report.extend(prefixed(&format!("typing {name}"), r)),
        }
    }
    report.into_result()?;
    let family = DiagramTransformation::new(e.clone(), d, comps).map_err(|r| prefixed("typing", r))?;
    Ok(Typing {
        over: t.over.clone(),
        target: Box::new(target),
        family,
    })
}

pub fn parse_workspace(text: &str, fetch: &dyn Fn(&str) -> Result<String>) -> Result<Workspace> {
    let raw: RawWorkspace = serde_json::from_str(text)?;
    resolve(raw, fetch)
}

/// Reads a workspace; typing references are resolved relative to its directory.
pub fn load_workspace(path: &Path) -> Result<Workspace> {
    let text = std::fs::read_to_string(path)?;
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let fetch = move |name: &str| -> Result<String> { Ok(std::fs::read_to_string(dir.join(name))?) };
    parse_workspace(&text, &fetch)
}

pub fn diagram_to_raw(d: &Diagram) -> RawWorkspace {
    let shape = d.shape();
    RawWorkspace {
        base: signature_to_raw(d.signature()),
        shape: RawShape {
            vertices: shape.vertices().to_vec(),
            edges: shape
                .edges()
                .iter()
                .map(|e| RawOp {
                    name: e.name.clone(),
                    source: shape.vertices()[e.source].clone(),
                    target: shape.vertices()[e.target].clone(),
                })
                .collect(),
        },
        components: shape
            .vertices()
            .iter()
            .zip(d.components())
            .map(|(v, c)| (v.clone(), c.to_raw()))
            .collect(),
        arrows: shape
            .edges()
            .iter()
            .zip(d.arrows())
            .map(|(e, a)| (e.name.clone(), a.to_raw()))
            .collect(),
        typing: None,
        instances: Vec::new(),
    }
}

/// A family `τ: E ⇒ D` as a workspace for `E` typed over the workspace `over`.
pub fn family_to_raw(t: &DiagramTransformation, over: &str) -> RawWorkspace {
    let mut raw = diagram_to_raw(&t.domain);
    raw.typing = Some(RawTyping {
        over: over.to_string(),
        components: t
            .domain
            .shape()
            .vertices()
            .iter()
            .zip(&t.components)
            .map(|(v, m)| (v.clone(), m.to_raw()))
            .collect(),
    });
    raw
}

/// Pretty JSON with two-space indentation and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_workspace(raw: &RawWorkspace, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, to_json(raw)?)?)
}

/// The instance named `name`, typed over `apex`.
pub fn instance_by_name(ws: &Workspace, name: &str, apex: &Arc<Presheaf>) -> Result<TypedInstance> {
    let ri = ws
        .raw
        .instances
        .iter()
        .find(|i| i.name == name)
        .ok_or_else(|| Error::Format(format!("no instance named {name}")))?;
    let sig = ws.diagram.signature().clone();
    let k = Presheaf::from_raw(sig, &ri.instance).map_err(|r| prefixed(&format!("instance {name}"), r))?;
    let typing = PresheafMorphism::from_raw(Arc::new(k), apex.clone(), &ri.typing)
        .map_err(|r| prefixed(&format!("instance {name} typing"), r))?;
    TypedInstance::new(typing, apex)
}

pub fn cocone_json(d: &Diagram, c: &Cocone, method: &str) -> Value {
    let legs: IndexMap<String, RawMorphism> = d
        .shape()
        .vertices()
        .iter()
        .zip(&c.legs)
        .map(|(v, l)| (v.clone(), l.to_raw()))
        .collect();
    json!({
        "base": signature_to_raw(d.signature()),
        "method": method,
        "apex": c.apex.to_raw(),
        "legs": legs,
    })
}

pub fn typed_instance_json(t: &TypedInstance) -> Value {
    json!({
        "base": signature_to_raw(t.instance().signature()),
        "apex": t.typing.codomain().to_raw(),
        "instance": t.instance().to_raw(),
        "typing": t.typing.to_raw(),
    })
}

fn elem_json(d: &Diagram, sort: usize, e: ElemRef) -> Value {
    json!({
        "vertex": d.shape().vertices()[e.vertex],
        "element": elem_name(d, sort, e),
    })
}

pub fn path_json(d: &Diagram, p: &MappingPath) -> Value {
    let segments: Vec<Value> = p
        .segments
        .iter()
        .map(|s| {
            json!({
                "from": elem_json(d, p.sort, s.left),
                "edge": d.shape().edge(s.edge).name,
                "dir": match s.dir { Direction::Forward => "forward", Direction::Opposite => "op" },
                "to": elem_json(d, p.sort, s.right),
            })
        })
        .collect();
    json!({
        "sort": d.signature().sorts()[p.sort],
        "start": elem_json(d, p.sort, p.start),
        "end": elem_json(d, p.sort, p.end()),
        "segments": segments,
        "text": p.display(d),
    })
}

pub fn witness_json(d: &Diagram, w: &Witness) -> Value {
    let sort = d.signature().sorts()[w.sort()].clone();
    match w {
        Witness::DistinctPaths { z, z2, p1, p2 } => json!({
            "kind": w.kind(),
            "sort": sort,
            "z": elem_json(d, p1.sort, *z),
            "z2": elem_json(d, p1.sort, *z2),
            "p1": path_json(d, p1),
            "p2": path_json(d, p2),
        }),
        Witness::CyclicPath { z, path } => json!({
            "kind": w.kind(),
            "sort": sort,
            "z": elem_json(d, path.sort, *z),
            "path": path_json(d, path),
        }),
        Witness::DomainCycle(c) => {
            let apex = d.shape().edges().first().map(|e| d.component(e.source).clone());
            let names: Vec<String> = c
                .sequence
                .iter()
                .map(|&i| apex.as_ref().map_or(i.to_string(), |a| a.id(c.sort, i).to_string()))
                .collect();
            json!({ "kind": w.kind(), "sort": sort, "sequence": names })
        }
        Witness::ImageOverlap {
            sort: x,
            first,
            second,
            y,
            target,
        } => {
            let names = |b: &crate::shape::Branch| -> Vec<String> {
                b.edges.iter().map(|&e| d.shape().edge(e).name.clone()).collect()
            };
            json!({
                "kind": w.kind(),
                "sort": sort,
                "first": names(first),
                "second": names(second),
                "y": elem_json(d, *x, *y),
                "target": elem_json(d, *x, *target),
            })
        }
        Witness::DirectedCycleOrbit {
            cycle,
            sort: x,
            y,
            k,
            path,
        } => json!({
            "kind": w.kind(),
            "sort": sort,
            "cycle": cycle.iter().map(|&e| d.shape().edge(e).name.clone()).collect::<Vec<_>>(),
            "y": elem_json(d, *x, *y),
            "k": k,
            "path": path_json(d, path),
        }),
    }
}

pub fn verdict_json(d: &Diagram, v: &VkVerdict) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("result".into(), json!(v.result));
    out.insert("method".into(), json!(v.method));
    if let Some(c) = v.condition {
        out.insert("condition".into(), json!(c));
    }
    if let Some(w) = &v.witness {
        out.insert("witness".into(), witness_json(d, w));
    }
    if let Some(w) = &v.canonical {
        out.insert("canonical".into(), witness_json(d, w));
    }
    if let Some(r) = &v.route {
        let steps: Vec<Value> = r
            .steps
            .iter()
            .map(|(q, a)| json!({ "question": q, "answer": a }))
            .collect();
        out.insert("route".into(), json!({ "steps": steps, "terminal": r.terminal }));
    }
    if let Some(n) = &v.note {
        out.insert("note".into(), json!(n));
    }
    Value::Object(out)
}

/// Per-sort element tables of each comparison morphism.
pub fn roundtrip_json(kind: &str, labels: &[String], rt: &RoundTrip) -> Value {
    let comparisons: IndexMap<String, Value> = labels
        .iter()
        .zip(&rt.comparisons)
        .map(|(l, m)| (l.clone(), json!({ "bijective": m.is_bijective(), "table": m.to_raw() })))
        .collect();
    json!({
        "kind": kind,
        "pass": rt.pass,
        "failures": rt.failures,
        "comparisons": comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
  "base": { "sorts": ["X"] },
  "shape": { "vertices": ["1", "2"], "edges": [{ "name": "f", "source": "1", "target": "2" }] },
  "components": {
    "1": { "carriers": { "X": ["a"] } },
    "2": { "carriers": { "X": ["b", "c"] } }
  },
  "arrows": { "f": { "X": { "a": "c" } } }
}"#;

    fn no_fetch(name: &str) -> Result<String> {
        Err(Error::Format(format!("unexpected reference {name}")))
    }

    #[test]
    fn parses_and_round_trips() {
        let ws = parse_workspace(TINY, &no_fetch).unwrap();
        assert_eq!(ws.diagram.arrow(0).apply(0, 0), 1);
        let again = diagram_to_raw(&ws.diagram);
        assert_eq!(again, ws.raw);
        let text = to_json(&again).unwrap();
        assert!(text.starts_with("{\n  \"base\""));
        assert_eq!(parse_workspace(&text, &no_fetch).unwrap().raw, again);
    }

    #[test]
    fn dangling_edge_is_named() {
        let bad = TINY.replace("\"target\": \"2\"", "\"target\": \"9\"");
        let err = parse_workspace(&bad, &no_fetch).unwrap_err().to_string();
        assert!(err.contains("edge f"), "{err}");
    }

    #[test]
    fn non_total_arrow_is_reported() {
        let bad = TINY.replace("{ \"a\": \"c\" }", "{}");
        let err = parse_workspace(&bad, &no_fetch).unwrap_err().to_string();
        assert!(err.contains("arrow f"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_workspace("{\n  \"base\": ", &no_fetch).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
