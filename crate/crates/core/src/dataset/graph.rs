use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub lon: f64,
    pub lat: f64,
}

/// Undirected street graph. Node order is the order nodes were declared in
/// and is the row order of every matrix derived from the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetGraph {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    index: HashMap<NodeId, usize>,
}

impl StreetGraph {
    /// Builds a graph from declared nodes and undirected edges given by node id.
    ///
    /// Rejects duplicate node ids, non-finite coordinates, self-loops,
    /// duplicate undirected edges and edges to undeclared nodes. Edge errors
    /// carry the 1-based position of the offending edge.
    pub fn new(nodes: Vec<Node>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if !node.lon.is_finite() || !node.lat.is_finite() {
                return Err(Error::Graph(format!(
                    "node {} has non-finite coordinates",
                    node.id
                )));
            }
            if index.insert(node.id, i).is_some() {
                return Err(Error::Graph(format!("duplicate node id {}", node.id)));
            }
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut resolved = Vec::with_capacity(edges.len());
        for (row, &(a, b)) in edges.iter().enumerate() {
            let row = row + 1;
            let ia = *index
                .get(&a)
                .ok_or(Error::DanglingEdge { row, node_id: a })?;
            let ib = *index
                .get(&b)
                .ok_or(Error::DanglingEdge { row, node_id: b })?;
            if ia == ib {
                return Err(Error::Graph(format!("self-loop on node {a} (edge {row})")));
            }
            let key = (ia.min(ib), ia.max(ib));
            if !seen.insert(key) {
                return Err(Error::Graph(format!(
                    "duplicate edge {a}-{b} (edge {row})"
                )));
            }
            resolved.push((ia, ib));
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in &resolved {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Self {
            nodes,
            edges: resolved,
            adjacency,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges as pairs of node indices, in declaration order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    /// Edges as id pairs, in declaration order.
    pub fn edge_ids(&self) -> Vec<(NodeId, NodeId)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.nodes[a].id, self.nodes[b].id))
            .collect()
    }

    /// Returns the graph with nodes reordered so that new node `i` is old
    /// node `order[i]`. Edge declaration order is kept.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::Dimension(format!(
                "permutation of length {} for {} nodes",
                order.len(),
                self.len()
            )));
        }
        let nodes = order.iter().map(|&i| self.nodes[i]).collect();
        Self::new(nodes, &self.edge_ids())
    }
}
