//! Topological graph with visitation records.
//!
//! Nodes are places the agent has stood on (visited) or seen as waypoint
//! options (unvisited); an edge joins two places reachable from each other in
//! a straight line. The graph only grows: nodes, edges and visited flags are
//! never removed.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::Point2;

pub type NodeId = usize;

pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn planar_distance(&self, other: &Point3) -> f64 {
        self.xy().distance(&other.xy())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub position: Point3,
    pub visited: bool,
    /// Options generated on the first visit; reused on every revisit.
    pub cached_options: Vec<NodeId>,
}

/// A predicted waypoint already placed in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub position: Point3,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// The node was already visited; nothing changed.
    Revisit,
    /// The node was expanded with this many options.
    Expanded(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl TopoGraph {
    /// Graph holding only the (unvisited) start node with id 0.
    pub fn new(start: Point3) -> Self {
        Self {
            nodes: vec![Node {
                id: 0,
                position: start,
                visited: false,
                cached_options: Vec::new(),
            }],
            edges: BTreeSet::new(),
        }
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

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id < self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Adjacent node ids in ascending order.
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn add_edge(&mut self, a: NodeId, b: NodeId) {
        if a != b {
            self.edges.insert((a.min(b), a.max(b)));
        }
    }

    fn add_node(&mut self, position: Point3) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            position,
            visited: false,
            cached_options: Vec::new(),
        });
        id
    }

    /// Nearest node strictly closer than `threshold` (planar), lower id on ties.
    pub fn nearest_within(&self, p: &Point3, threshold: f64) -> Option<NodeId> {
        self.nodes
            .iter()
            .map(|n| (n.id, n.position.planar_distance(p)))
            .filter(|&(_, d)| d < threshold)
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
            .map(|(id, _)| id)
    }

    /// Expands `current` unless it was already visited. `predict` is only
    /// invoked for a first visit and must return the new waypoints in world
    /// coordinates.
    pub fn update<F>(&mut self, current: NodeId, merge_threshold: f64, predict: F) -> Result<UpdateOutcome>
    where
        F: FnOnce() -> Vec<ScoredPoint>,
    {
        if self.node(current)?.visited {
            return Ok(UpdateOutcome::Revisit);
        }
        self.nodes[current].visited = true;
        let waypoints = predict();
        let options = self.merge(&waypoints, current, merge_threshold)?;
        let n = options.len();
        self.nodes[current].cached_options = options;
        Ok(UpdateOutcome::Expanded(n))
    }

    /// Merging module: drops near-duplicate waypoints (keeping the higher
    /// score), snaps each survivor onto an existing node closer than the
    /// threshold or creates a new unvisited node, and links every resulting
    /// option to `current`. Returns the option ids in waypoint order.
    pub fn merge(&mut self, waypoints: &[ScoredPoint], current: NodeId, threshold: f64) -> Result<Vec<NodeId>> {
        self.node(current)?;
        if !(threshold > 0.0) {
            return Err(Error::InvalidConfig("merge threshold must be positive".into()));
        }
        let mut ranked: Vec<&ScoredPoint> = waypoints.iter().collect();
        ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));

        let mut survivors: Vec<&ScoredPoint> = Vec::new();
        for w in ranked {
            if survivors
                .iter()
                .all(|s| s.position.planar_distance(&w.position) >= threshold)
            {
                survivors.push(w);
            }
        }

        let mut options = Vec::new();
        for w in survivors {
            let id = match self.nearest_within(&w.position, threshold) {
                Some(id) => id,
                None => self.add_node(w.position),
            };
            if id == current || options.contains(&id) {
                continue;
            }
            self.add_edge(current, id);
            options.push(id);
        }
        Ok(options)
    }

    /// Single-source shortest planar edge lengths.
    pub fn distances_from(&self, from: NodeId) -> Result<(Vec<f64>, Vec<Option<NodeId>>)> {
        self.node(from)?;
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let adjacency: Vec<Vec<NodeId>> = (0..n).map(|i| self.neighbors(i)).collect();
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(HeapItem { cost: 0.0, node: from });
        while let Some(HeapItem { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &next in &adjacency[node] {
                let c = cost + self.nodes[node].position.planar_distance(&self.nodes[next].position);
                if c < dist[next] || (c == dist[next] && prev[next].is_some_and(|p| node < p)) {
                    dist[next] = c;
                    prev[next] = Some(node);
                    heap.push(HeapItem { cost: c, node: next });
                }
            }
        }
        Ok((dist, prev))
    }

    /// Uniform-cost search; `None` when `to` is in another component.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Result<Option<Vec<NodeId>>> {
        self.node(to)?;
        let (dist, prev) = self.distances_from(from)?;
        if !dist[to].is_finite() {
            return Ok(None);
        }
        let mut path = vec![to];
        let mut cur = to;
        while let Some(p) = prev[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(Some(path))
    }

    /// (visited ids, unvisited ids), both ascending.
    pub fn visit_partition(&self) -> (Vec<NodeId>, Vec<NodeId>) {
        let (v, u): (Vec<&Node>, Vec<&Node>) = self.nodes.iter().partition(|n| n.visited);
        (v.iter().map(|n| n.id).collect(), u.iter().map(|n| n.id).collect())
    }

    /// Smallest planar distance between any two nodes.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                best = best.min(a.position.planar_distance(&b.position));
            }
        }
        best
    }
}

#[derive(PartialEq)]
struct HeapItem {
    cost: f64,
    node: NodeId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(x: f64, y: f64, score: f64) -> ScoredPoint {
        ScoredPoint {
            position: Point3::new(x, y, 0.0),
            score,
        }
    }

    #[test]
    fn fresh_graph_partition() {
        let mut g = TopoGraph::new(Point3::default());
        g.update(0, 0.5, Vec::new).unwrap();
        assert_eq!(g.visit_partition(), (vec![0], vec![]));
    }

    #[test]
    fn first_visit_adds_options() {
        let mut g = TopoGraph::new(Point3::default());
        let out = g
            .update(0, 0.5, || vec![sp(2.0, 0.0, 0.9), sp(0.0, 2.0, 0.8), sp(-2.0, 0.0, 0.7), sp(0.0, -2.0, 0.6)])
            .unwrap();
        assert_eq!(out, UpdateOutcome::Expanded(4));
        assert_eq!(g.len(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.node(0).unwrap().cached_options, vec![1, 2, 3, 4]);
        assert_eq!(g.visit_partition(), (vec![0], vec![1, 2, 3, 4]));
    }

    #[test]
    fn revisit_is_identity_and_skips_prediction() {
        let mut g = TopoGraph::new(Point3::default());
        g.update(0, 0.5, || vec![sp(2.0, 0.0, 0.9)]).unwrap();
        let snapshot = g.clone();
        let out = g
            .update(0, 0.5, || panic!("prediction must not run on a revisit"))
            .unwrap();
        assert_eq!(out, UpdateOutcome::Revisit);
        assert_eq!(g, snapshot);
    }

    #[test]
    fn nearby_waypoint_reuses_existing_node() {
        let mut g = TopoGraph::new(Point3::default());
        g.update(0, 0.5, || vec![sp(2.0, 0.0, 0.9), sp(0.0, 2.0, 0.9)]).unwrap();
        // Travel to node 1 and expand: a waypoint 0.3 m from node 2.
        g.update(1, 0.5, || vec![sp(0.3, 2.0, 0.9), sp(4.0, 0.0, 0.8)]).unwrap();
        assert_eq!(g.node(1).unwrap().cached_options, vec![2, 3]);
        assert!(g.has_edge(1, 2));
        assert_eq!(g.len(), 4);
        assert_eq!(g.visit_partition(), (vec![0, 1], vec![2, 3]));
    }

    #[test]
    fn duplicates_removed_by_score() {
        let mut g = TopoGraph::new(Point3::default());
        let opts = g.merge(&[sp(2.0, 0.0, 0.5), sp(2.2, 0.0, 0.9)], 0, 0.5).unwrap();
        assert_eq!(opts, vec![1]);
        assert_eq!(g.node(1).unwrap().position.x, 2.2);
    }

    #[test]
    fn outside_threshold_creates_node() {
        let mut g = TopoGraph::new(Point3::default());
        g.merge(&[sp(2.0, 0.0, 1.0)], 0, 0.5).unwrap();
        let opts = g.merge(&[sp(2.6, 0.0, 1.0)], 0, 0.5).unwrap();
        assert_eq!(opts, vec![2]);
    }

    #[test]
    fn merge_picks_nearest_then_lowest_id() {
        let mut g = TopoGraph::new(Point3::new(-10.0, 0.0, 0.0));
        g.merge(&[sp(0.0, 0.0, 1.0), sp(1.0, 0.0, 1.0)], 0, 0.5).unwrap();
        // 0.45 from node 1 and 0.55 from node 2 with threshold 0.6.
        let opts = g.merge(&[sp(0.45, 0.0, 1.0)], 0, 0.6).unwrap();
        assert_eq!(opts, vec![1]);
        // Equidistant: lower id wins.
        let opts = g.merge(&[sp(0.5, 0.0, 1.0)], 0, 0.6).unwrap();
        assert_eq!(opts, vec![1]);
        let opts = g.merge(&[sp(0.9, 0.0, 1.0)], 0, 0.6).unwrap();
        assert_eq!(opts, vec![2]);
    }

    #[test]
    fn waypoint_on_current_node_is_not_a_self_loop() {
        let mut g = TopoGraph::new(Point3::default());
        let opts = g.merge(&[sp(0.1, 0.0, 1.0)], 0, 0.5).unwrap();
        assert!(opts.is_empty());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn unknown_node_errors() {
        let mut g = TopoGraph::new(Point3::default());
        assert!(matches!(g.update(3, 0.5, Vec::new), Err(Error::UnknownNode(3))));
        assert!(g.shortest_path(0, 9).is_err());
    }

    #[test]
    fn shortest_paths() {
        let mut g = TopoGraph::new(Point3::default());
        g.update(0, 0.5, || vec![sp(1.0, 0.0, 1.0)]).unwrap();
        g.update(1, 0.5, || vec![sp(2.0, 0.0, 1.0)]).unwrap();
        assert_eq!(g.shortest_path(0, 0).unwrap(), Some(vec![0]));
        assert_eq!(g.shortest_path(0, 2).unwrap(), Some(vec![0, 1, 2]));
        assert_eq!(g.shortest_path(2, 0).unwrap(), Some(vec![2, 1, 0]));

        let mut h = TopoGraph::new(Point3::default());
        h.merge(&[sp(5.0, 5.0, 1.0)], 0, 0.5).unwrap();
        h.add_node(Point3::new(-5.0, 0.0, 0.0));
        assert_eq!(h.shortest_path(0, 2).unwrap(), None);
    }

    #[test]
    fn shortest_path_prefers_short_detour() {
        let mut g = TopoGraph::new(Point3::default());
        // 0 -> 1 (far corner) -> 3 versus 0 -> 2 -> 3 on a straight line.
        g.merge(&[sp(0.0, 5.0, 1.0), sp(1.0, 0.0, 0.9)], 0, 0.5).unwrap();
        g.merge(&[sp(2.0, 0.0, 1.0)], 1, 0.5).unwrap();
        g.merge(&[sp(2.0, 0.0, 1.0)], 2, 0.5).unwrap();
        assert_eq!(g.shortest_path(0, 3).unwrap(), Some(vec![0, 2, 3]));
    }

    #[test]
    fn json_snapshot() {
        let mut g = TopoGraph::new(Point3::default());
        g.update(0, 0.5, || vec![sp(1.0, 0.0, 1.0)]).unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["edges"], serde_json::json!([[0, 1]]));
        assert_eq!(v["nodes"][0]["visited"], true);
        let back: TopoGraph = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }
}
