use super::Knowledge;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExportNode {
    pub id: String,
    pub activity: String,
    pub visits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExportEdge {
    pub src: String,
    pub dst: String,
    pub action_id: String,
    #[serde(rename = "type")]
    pub action_type: String,
    pub flags: Vec<String>,
    pub function: String,
}

/// Graph document: `{nodes:[{id, activity, visits}], edges:[{src, dst,
/// action_id, type, flags, function}]}`, nodes by id, edges by
/// (src, action, dst).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<GraphExportNode>,
    pub edges: Vec<GraphExportEdge>,
}

impl GraphExport {
    pub fn from_knowledge(k: &Knowledge) -> Self {
        let nodes = k
            .graph()
            .nodes()
            .map(|id| {
                let s = k.state(id);
                GraphExportNode {
                    id: id.to_string(),
                    activity: s.activity().to_string(),
                    visits: s.visit_count,
                }
            })
            .collect();
        let edges = k
            .graph()
            .edges()
            .map(|(key, _)| {
                let a = k.action(key.action);
                GraphExportEdge {
                    src: key.src.to_string(),
                    dst: key.dst.to_string(),
                    action_id: key.action.to_string(),
                    action_type: a.action_type.to_string(),
                    flags: a.flag.names().into_iter().map(String::from).collect(),
                    function: a.function.clone(),
                }
            })
            .collect();
        GraphExport { nodes, edges }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph aig {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "  {} [label=\"{}\\n{} ({})\"];",
                n.id,
                n.id,
                dot_escape(&n.activity),
                n.visits
            );
        }
        for e in &self.edges {
            let style = if e.flags.iter().any(|f| f == "ineffective") {
                " style=dashed"
            } else {
                ""
            };
            let label = if e.function.is_empty() {
                format!("{} {}", e.action_id, e.action_type)
            } else {
                format!("{} {}: {}", e.action_id, e.action_type, dot_escape(&e.function))
            };
            let _ = writeln!(out, "  {} -> {} [label=\"{}\"{}];", e.src, e.dst, label, style);
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
