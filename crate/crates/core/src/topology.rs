//! Communication graphs for the round-synchronous simulator.
//!
//! Nodes are dense integers `0..n`. Every undirected link is stored once per
//! direction, so the directed edge `(i, j)` is addressable through
//! [`Graph::edge_index`] and carries its own penalty state.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("num_nodes must be ≥ 1")]
    Empty,
    #[error("{kind} graph cannot be built with {n} nodes: {reason}")]
    InvalidSize {
        kind: Topology,
        n: usize,
        reason: &'static str,
    },
    #[error("node {0} lists itself as a neighbor")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) has no reverse edge")]
    Asymmetric(usize, usize),
    #[error("neighbor list of node {0} is not strictly ascending")]
    Unsorted(usize),
    #[error("neighbor {1} of node {0} is out of range")]
    OutOfRange(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("unknown topology `{0}` (expected complete, ring or cluster)")]
    UnknownKind(alloc::string::String),
}

/// Named graph families used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    Complete,
    Ring,
    /// Two complete halves joined by a single bridge edge.
    Cluster,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Complete, Topology::Ring, Topology::Cluster];

    pub fn name(self) -> &'static str {
        match self {
            Topology::Complete => "complete",
            Topology::Ring => "ring",
            Topology::Cluster => "cluster",
        }
    }

    pub fn build(self, n: usize) -> Result<Graph, TopologyError> {
        match self {
            Topology::Complete => Graph::complete(n),
            Topology::Ring => Graph::ring(n),
            Topology::Cluster => Graph::cluster(n),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complete" => Ok(Topology::Complete),
            "ring" => Ok(Topology::Ring),
            "cluster" => Ok(Topology::Cluster),
            other => Err(TopologyError::UnknownKind(other.into())),
        }
    }
}

/// Immutable undirected graph with sorted per-node neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl Graph {
    /// Validates an adjacency list: symmetric, loop-free, sorted and connected.
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>) -> Result<Self, TopologyError> {
        let n = neighbors.len();
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        for (i, list) in neighbors.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TopologyError::Unsorted(i));
            }
            for &j in list {
                if j >= n {
                    return Err(TopologyError::OutOfRange(i, j));
                }
                if j == i {
                    return Err(TopologyError::SelfLoop(i));
                }
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(TopologyError::Asymmetric(i, j));
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        offsets.push(0);
        for list in &neighbors {
            acc += list.len();
            offsets.push(acc);
        }
        let graph = Graph { neighbors, offsets };
        if !graph.is_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(graph)
    }

    pub fn complete(n: usize) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Self::from_neighbors(neighbors)
    }

    pub fn ring(n: usize) -> Result<Self, TopologyError> {
        if n < 3 {
            return Err(TopologyError::InvalidSize {
                kind: Topology::Ring,
                n,
                reason: "a ring needs at least 3 nodes",
            });
        }
        let neighbors = (0..n)
            .map(|i| {
                let mut list = vec![(i + n - 1) % n, (i + 1) % n];
                list.sort_unstable();
                list
            })
            .collect();
        Self::from_neighbors(neighbors)
    }

    /// Two complete graphs on `0..n/2` and `n/2..n` plus the bridge `(n/2 - 1, n/2)`.
    pub fn cluster(n: usize) -> Result<Self, TopologyError> {
        if n < 4 || n % 2 != 0 {
            return Err(TopologyError::InvalidSize {
                kind: Topology::Cluster,
                n,
                reason: "a cluster graph needs an even node count of at least 4",
            });
        }
        let half = n / 2;
        let neighbors = (0..n)
            .map(|i| {
                let block = if i < half { 0..half } else { half..n };
                let mut list: Vec<usize> = block.filter(|&j| j != i).collect();
                if i == half - 1 {
                    list.push(half);
                } else if i == half {
                    list.insert(0, half - 1);
                }
                list
            })
            .collect();
        Self::from_neighbors(neighbors)
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted one-hop neighbors of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    /// Number of directed edges (twice the undirected edge count).
    pub fn num_directed_edges(&self) -> usize {
        self.offsets[self.num_nodes()]
    }

    /// Flat index of the directed edge `(node, neighbors(node)[slot])`.
    pub fn edge_index(&self, node: usize, slot: usize) -> usize {
        debug_assert!(slot < self.degree(node));
        self.offsets[node] + slot
    }

    /// Undirected edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }
}
