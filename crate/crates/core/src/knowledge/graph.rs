use super::{AbsActionId, AbsStateId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One observed outcome of an abstract action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub src: AbsStateId,
    pub action: AbsActionId,
    pub dst: AbsStateId,
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}", self.src, self.action, self.dst)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub successes: u32,
    pub failures: u32,
    /// Text typed the last time this edge was traversed by an input action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_text: Option<String>,
}

/// Abstract interaction graph: abstract states as nodes, one edge per
/// distinct (source, action, target) outcome.
///
/// Edges removed after repeated navigation failures are kept aside and are
/// never re-added, so later path searches cannot route through them again.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionGraph {
    nodes: BTreeSet<AbsStateId>,
    #[serde(with = "edge_list")]
    edges: BTreeMap<EdgeKey, EdgeStats>,
    #[serde(with = "edge_list")]
    removed: BTreeMap<EdgeKey, EdgeStats>,
}

impl InteractionGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: AbsStateId) {
        self.nodes.insert(id);
    }

    pub fn nodes(&self) -> impl Iterator<Item = AbsStateId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, id: AbsStateId) -> bool {
        self.nodes.contains(&id)
    }

    /// Records a traversal. Returns false when the edge was previously
    /// removed and therefore stays out of the graph.
    ///
    /// Panics if either endpoint is not a node.
    pub fn record_transition(&mut self, key: EdgeKey, input_text: Option<&str>) -> bool {
        assert!(
            self.nodes.contains(&key.src) && self.nodes.contains(&key.dst),
            "edge {key} has an endpoint outside the graph"
        );
        if self.removed.contains_key(&key) {
            return false;
        }
        let stats = self.edges.entry(key).or_default();
        stats.successes += 1;
        if let Some(t) = input_text {
            stats.input_text = Some(t.to_string());
        }
        true
    }

    /// Inserts an edge without traversal statistics. Used to build synthetic
    /// graphs.
    pub fn add_edge(&mut self, key: EdgeKey) {
        self.nodes.insert(key.src);
        self.nodes.insert(key.dst);
        self.edges.entry(key).or_default();
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<&EdgeStats> {
        self.edges.get(key)
    }

    pub fn contains_edge(&self, key: &EdgeKey) -> bool {
        self.edges.contains_key(key)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &EdgeStats)> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn removed_edges(&self) -> impl Iterator<Item = (&EdgeKey, &EdgeStats)> {
        self.removed.iter()
    }

    pub fn is_removed(&self, key: &EdgeKey) -> bool {
        self.removed.contains_key(key)
    }

    /// Outgoing live edges of `src` in ascending (action, target) order.
    pub fn out_edges(&self, src: AbsStateId) -> impl Iterator<Item = &EdgeKey> {
        let lo = EdgeKey {
            src,
            action: AbsActionId(0),
            dst: AbsStateId(0),
        };
        let hi = EdgeKey {
            src,
            action: AbsActionId(u32::MAX),
            dst: AbsStateId(u32::MAX),
        };
        self.edges.range(lo..=hi).map(|(k, _)| k)
    }

    /// Increments the failure counter of a live edge and removes it once the
    /// counter reaches `threshold`. Returns `Some(true)` if removed, `None`
    /// if no such live edge exists.
    pub fn record_failure(&mut self, key: &EdgeKey, threshold: u32) -> Option<bool> {
        let stats = self.edges.get_mut(key)?;
        stats.failures += 1;
        if stats.failures >= threshold {
            let stats = self.edges.remove(key).expect("edge present");
            self.removed.insert(*key, stats);
            Some(true)
        } else {
            Some(false)
        }
    }
}

mod edge_list {
    use super::{EdgeKey, EdgeStats};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        #[serde(flatten)]
        key: EdgeKey,
        #[serde(flatten)]
        stats: EdgeStats,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<EdgeKey, EdgeStats>, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<Entry> = map
            .iter()
            .map(|(k, v)| Entry {
                key: *k,
                stats: v.clone(),
            })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<EdgeKey, EdgeStats>, D::Error> {
        let list = Vec::<Entry>::deserialize(d)?;
        Ok(list.into_iter().map(|e| (e.key, e.stats)).collect())
    }
}
