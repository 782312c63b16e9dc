//! Graphviz renderings of shapes and witnesses.

use std::fmt::Write;

use crate::diagram::Diagram;
use crate::paths::{elem_name, Direction, ElemRef, MappingPath};
use crate::presheaf::ids;
use crate::shape::ShapeGraph;
use crate::vk::Witness;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn shape_dot(shape: &ShapeGraph) -> String {
    let mut out = String::from("digraph shape {\n");
    for v in shape.vertices() {
        let _ = writeln!(out, "  {};", quote(v));
    }
    for e in shape.edges() {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(&shape.vertices()[e.source]),
            quote(&shape.vertices()[e.target]),
            quote(&e.name)
        );
    }
    out.push_str("}\n");
    out
}

/// Elements on the two paths of the witness, the first path dashed and the
/// second dotted; arrows point the way the diagram maps.
pub fn witness_dot(d: &Diagram, w: &Witness) -> String {
    let mut out = String::from("digraph witness {\n");
    let Some(Witness::DistinctPaths { p1, p2, .. }) = w.to_distinct_paths(d) else {
        out.push_str("}\n");
        return out;
    };
    let node = |p: &MappingPath, e: ElemRef| ids::tagged(&d.shape().vertices()[e.vertex], elem_name(d, p.sort, e));
    let mut nodes: Vec<String> = Vec::new();
    for p in [&p1, &p2] {
        for e in p.elements() {
            let n = node(p, e);
            if !nodes.contains(&n) {
                let _ = writeln!(out, "  {} [label={}];", quote(&n), quote(elem_name(d, p.sort, e)));
                nodes.push(n);
            }
        }
    }
    for (p, style) in [(&p1, "dashed"), (&p2, "dotted")] {
        for s in &p.segments {
            let (from, to) = match s.dir {
                Direction::Forward => (s.left, s.right),
                Direction::Opposite => (s.right, s.left),
            };
            let _ = writeln!(
                out,
                "  {} -> {} [label={}, style={style}];",
                quote(&node(p, from)),
                quote(&node(p, to)),
                quote(&d.shape().edge(s.edge).name)
            );
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_shape() {
        assert_eq!(shape_dot(&ShapeGraph::default()), "digraph shape {\n}\n");
    }

    #[test]
    fn quotes_are_escaped() {
        let s = ShapeGraph::new(["a\"b"], Vec::<(String, String, String)>::new()).unwrap();
        assert_eq!(shape_dot(&s), "digraph shape {\n  \"a\\\"b\";\n}\n");
    }
}
