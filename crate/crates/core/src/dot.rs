//! Graphviz DOT and JSON payloads for the ISM digraph, the MICMAC scatter
//! and the DEMATEL influence map.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::dematel::{DematelResult, Group};
use crate::io::format_fixed;
use crate::ism::IsmDigraph;
use crate::micmac::QuadrantAssignment;
use crate::model::BarrierRegistry;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' | '\\' => {
                out.push('\\');
                out.push(ch);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(ch),
        }
    }
    out.push('"');
    out
}

fn node_label(members: &[usize], registry: &BarrierRegistry) -> String {
    members
        .iter()
        .map(|&m| registry.abbr(m))
        .collect::<Vec<_>>()
        .join("+")
}

/// Level 1 is drawn at the top; edges point from driver to dependent.
pub fn ism_dot(digraph: &IsmDigraph, registry: &BarrierRegistry) -> String {
    let mut out = String::new();
    out.push_str("digraph ism {\n");
    out.push_str("  rankdir=BT;\n");
    out.push_str("  node [shape=box];\n");
    for node in &digraph.nodes {
        let _ = writeln!(
            out,
            "  n{} [label={}, level={}];",
            node.id,
            quote(&node_label(&node.members, registry)),
            node.level
        );
    }
    let mut level_ids: Vec<usize> = digraph.nodes.iter().map(|n| n.level).collect();
    level_ids.dedup();
    for level in level_ids {
        let ids: Vec<String> = digraph
            .nodes
            .iter()
            .filter(|n| n.level == level)
            .map(|n| format!("n{}", n.id))
            .collect();
        let _ = writeln!(out, "  {{ rank=same; {}; }}", ids.join("; "));
    }
    for edge in &digraph.edges {
        let _ = writeln!(out, "  n{} -> n{};", edge.from, edge.to);
    }
    out.push_str("}\n");
    out
}

pub fn ism_json(digraph: &IsmDigraph, registry: &BarrierRegistry) -> Value {
    let nodes: Vec<Value> = digraph
        .nodes
        .iter()
        .map(|node| {
            let successors: Vec<usize> = digraph
                .edges
                .iter()
                .filter(|e| e.from == node.id)
                .map(|e| e.to)
                .collect();
            json!({
                "id": node.id,
                "label": node_label(&node.members, registry),
                "members": node.members.iter().map(|&m| registry.abbr(m)).collect::<Vec<_>>(),
                "level": node.level,
                "successors": successors,
            })
        })
        .collect();
    let edges: Vec<Value> = digraph
        .edges
        .iter()
        .map(|e| {
            let links: Vec<[&str; 2]> = e
                .links
                .iter()
                .map(|&(u, v)| [registry.abbr(u), registry.abbr(v)])
                .collect();
            json!({ "from": e.from, "to": e.to, "links": links })
        })
        .collect();
    json!({ "nodes": nodes, "edges": edges })
}

/// Scatter points at (dependence, driving) with the quadrant split at `mid`.
pub fn micmac_json(quadrants: &QuadrantAssignment, registry: &BarrierRegistry) -> Value {
    let points: Vec<Value> = quadrants
        .points
        .iter()
        .map(|p| {
            json!({
                "abbr": registry.abbr(p.index),
                "x": p.dependence,
                "y": p.driving,
                "quadrant": p.quadrant,
            })
        })
        .collect();
    json!({
        "x_axis": "dependence",
        "y_axis": "driving",
        "mid": quadrants.mid,
        "max": registry.len(),
        "points": points,
    })
}

/// Cause nodes share the top rank, effect nodes the bottom rank.
pub fn influence_dot(result: &DematelResult, registry: &BarrierRegistry) -> String {
    let mut out = String::new();
    out.push_str("digraph influence {\n");
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [shape=ellipse];\n");
    for row in &result.cause_effect.rows {
        let label = format!(
            "{}\nR+C={}\nR-C={}",
            registry.abbr(row.index),
            format_fixed(row.prominence, 3),
            format_fixed(row.relation, 3)
        );
        let _ = writeln!(
            out,
            "  n{} [label={}, group={}];",
            row.index,
            quote(&label),
            row.group.to_string().to_lowercase()
        );
    }
    for (group, rank) in [(Group::Cause, "min"), (Group::Effect, "max")] {
        let ids: Vec<String> = result
            .cause_effect
            .group_members(group)
            .iter()
            .map(|i| format!("n{i}"))
            .collect();
        if !ids.is_empty() {
            let _ = writeln!(out, "  {{ rank={rank}; {}; }}", ids.join("; "));
        }
    }
    for edge in &result.edges.edges {
        let _ = writeln!(
            out,
            "  n{} -> n{} [label={}];",
            edge.from,
            edge.to,
            quote(&format_fixed(edge.value, 3))
        );
    }
    out.push_str("}\n");
    out
}

pub fn influence_json(result: &DematelResult, registry: &BarrierRegistry) -> Value {
    let nodes: Vec<Value> = result
        .cause_effect
        .rows
        .iter()
        .map(|row| {
            json!({
                "abbr": registry.abbr(row.index),
                "prominence": row.prominence,
                "relation": row.relation,
                "group": row.group,
            })
        })
        .collect();
    let edges: Vec<Value> = result
        .edges
        .edges
        .iter()
        .map(|e| {
            json!({
                "from": registry.abbr(e.from),
                "to": registry.abbr(e.to),
                "value": e.value,
            })
        })
        .collect();
    json!({ "threshold": result.threshold(), "nodes": nodes, "edges": edges })
}
