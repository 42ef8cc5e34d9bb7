//! Graphviz DOT rendering of subgraphs with optional pattern overlays.
//!
//! Vertex labels follow the forensic convention of the first eight address
//! characters. Output ordering is stable (vertices in sorted-address order,
//! edges in key order) so exports diff cleanly between runs.

use crate::patterns::{RadialPattern, SequentialPattern};
use crate::txgraph::Subgraph;
use std::collections::BTreeSet;
use std::fmt::Write;

/// Patterns to highlight on top of a subgraph export.
#[derive(Debug, Default)]
pub struct PatternOverlay<'a> {
    pub sequential: &'a [SequentialPattern],
    pub radial: &'a [RadialPattern],
}

pub fn subgraph_to_dot(sg: &Subgraph, overlay: Option<&PatternOverlay<'_>>) -> String {
    let mut centers = BTreeSet::new();
    let mut path_vertices = BTreeSet::new();
    let mut highlight_edges = BTreeSet::new();
    if let Some(ov) = overlay {
        for r in ov.radial {
            centers.insert(&r.center);
            for s in &r.spokes {
                if sg.edges.contains_key(&(r.center.clone(), s.clone())) {
                    highlight_edges.insert((&r.center, s));
                }
            }
        }
        for p in ov.sequential {
            for v in &p.path_vertices {
                path_vertices.insert(v);
            }
            for w in p.path_vertices.windows(2) {
                if sg.edges.contains_key(&(w[0].clone(), w[1].clone())) {
                    highlight_edges.insert((&w[0], &w[1]));
                }
            }
        }
    }

    let mut out = String::from("digraph snapshot {\n");
    out.push_str("    node [shape=circle, fontsize=10];\n");
    for (i, v) in sg.vertices.iter().enumerate() {
        let mut attrs = vec![format!("label=\"{}\"", v.value.short_label())];
        if sg.seed.contains(v) {
            attrs.push("shape=doublecircle".to_string());
        }
        if centers.contains(v) {
            attrs.push("style=filled".to_string());
            attrs.push("fillcolor=orange".to_string());
        } else if path_vertices.contains(v) {
            attrs.push("color=red".to_string());
        }
        writeln!(out, "    v{i} [{}];", attrs.join(", ")).unwrap();
    }
    for ((from, to), agg) in &sg.edges {
        let fi = sg.vertex_id(from).expect("edge endpoints are vertices");
        let ti = sg.vertex_id(to).expect("edge endpoints are vertices");
        let mut attrs = vec![format!("label=\"{}\"", agg.tx_count)];
        if highlight_edges.contains(&(from, to)) {
            attrs.push("color=red".to_string());
            attrs.push("penwidth=2.0".to_string());
        }
        writeln!(out, "    v{fi} -> v{ti} [{}];", attrs.join(", ")).unwrap();
    }
    out.push_str("}\n");
    out
}
