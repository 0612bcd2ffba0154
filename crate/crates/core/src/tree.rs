//! Rooted vascular tree model: radius propagation by Murray's law, flow
//! propagation by flow conservation, Strahler ordering and Poiseuille
//! pressures.
//!
//! Node and edge ids are dense integers assigned in creation order and never
//! reused; deleted slots stay empty. All iteration runs in ascending id
//! order, which makes every pass over the tree reproducible.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::units;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug)]
pub struct Node {
    pub pos: Vec3,
    /// Sampled terminal (afferent arteriole outlet). Terminals stay leaves.
    pub is_terminal: bool,
    pub parent_edge: Option<EdgeId>,
    /// Outgoing edges, kept sorted ascending.
    pub child_edges: Vec<EdgeId>,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
    /// Vessel radius, μm.
    pub radius: f64,
    /// Volumetric flow, μm³/s. Zero on trees without propagated hemodynamics.
    pub flow: f64,
}

/// Hemodynamic boundary conditions in internal units.
#[derive(Clone, Copy, Debug)]
pub struct HemoConfig {
    /// Blood viscosity, N·s/μm².
    pub viscosity_mu: f64,
    /// Inlet flow, μm³/s.
    pub inlet_flow_q0: f64,
    /// Inlet pressure, N/μm².
    pub inlet_pressure_p0: f64,
}

impl Default for HemoConfig {
    fn default() -> Self {
        HemoConfig {
            viscosity_mu: 3.6e-15,
            inlet_flow_q0: 7.0 * units::ML_PER_MIN,
            inlet_pressure_p0: units::mmhg_to_internal(100.0),
        }
    }
}

impl HemoConfig {
    pub fn with_inlet_pressure_mmhg(mut self, p0: f64) -> Self {
        self.inlet_pressure_p0 = units::mmhg_to_internal(p0);
        self
    }
}

/// Pressure drop over a straight cylindrical vessel (Hagen–Poiseuille).
pub fn poiseuille_drop(mu: f64, length: f64, flow: f64, radius: f64) -> f64 {
    8.0 * mu * length * flow / (std::f64::consts::PI * radius.powi(4))
}

/// A check failed by [`VesselTree::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    MissingRoot,
    RootHasParent,
    /// Edge references a deleted or out-of-range node.
    DanglingEdge(EdgeId),
    /// Adjacency lists disagree with the edge table.
    AdjacencyMismatch(EdgeId),
    /// Node has more than one incoming edge.
    MultipleParents(NodeId),
    /// Edge closes a cycle back into the traversal.
    Cycle(EdgeId),
    Unreachable(NodeId),
    TerminalNotLeaf(NodeId),
    NonPositiveRadius(EdgeId),
    NonPositiveFlow(EdgeId),
    ZeroLengthEdge(EdgeId),
    /// Parent radius³ differs from the sum of child radii³.
    MurrayViolation(NodeId),
    /// Parent flow differs from the sum of child flows.
    FlowViolation(NodeId),
    /// Tree mixes zero and non-zero flows.
    PartiallyPropagated,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MissingRoot => write!(f, "root node is missing"),
            Violation::RootHasParent => write!(f, "root node has a parent edge"),
            Violation::DanglingEdge(e) => write!(f, "edge {e} references a missing node"),
            Violation::AdjacencyMismatch(e) => write!(f, "edge {e} not mirrored in adjacency lists"),
            Violation::MultipleParents(n) => write!(f, "node {n} has multiple parents"),
            Violation::Cycle(e) => write!(f, "edge {e} closes a cycle"),
            Violation::Unreachable(n) => write!(f, "node {n} unreachable from root"),
            Violation::TerminalNotLeaf(n) => write!(f, "terminal node {n} has children"),
            Violation::NonPositiveRadius(e) => write!(f, "edge {e} has non-positive radius"),
            Violation::NonPositiveFlow(e) => write!(f, "edge {e} has non-positive flow"),
            Violation::ZeroLengthEdge(e) => write!(f, "edge {e} has zero length"),
            Violation::MurrayViolation(n) => write!(f, "radius propagation inconsistent at node {n}"),
            Violation::FlowViolation(n) => write!(f, "flow conservation broken at node {n}"),
            Violation::PartiallyPropagated => write!(f, "tree mixes zero and non-zero edge flows"),
        }
    }
}

/// Rooted directed tree of straight cylindrical vessels.
#[derive(Clone, Debug)]
pub struct VesselTree {
    nodes: Vec<Option<Node>>,
    edges: Vec<Option<Edge>>,
    root: NodeId,
}

impl VesselTree {
    pub fn new(root_pos: Vec3) -> Self {
        let root = Node { pos: root_pos, is_terminal: false, parent_edge: None, child_edges: Vec::new() };
        VesselTree { nodes: vec![Some(root)], edges: Vec::new(), root: 0 }
    }

    /// Creates a tree whose root occupies a specific id slot; used when
    /// rebuilding a tree from files that preserve original ids.
    pub fn with_root_id(root: NodeId, root_pos: Vec3) -> Self {
        let mut nodes = Vec::with_capacity(root + 1);
        nodes.resize_with(root + 1, || None);
        nodes[root] =
            Some(Node { pos: root_pos, is_terminal: false, parent_edge: None, child_edges: Vec::new() });
        VesselTree { nodes, edges: Vec::new(), root }
    }

    /// Inserts a detached node at an explicit id slot.
    pub fn insert_node_at(&mut self, id: NodeId, pos: Vec3, is_terminal: bool) -> Result<()> {
        if id >= self.nodes.len() {
            self.nodes.resize_with(id + 1, || None);
        }
        if self.nodes[id].is_some() {
            return Err(Error::InvalidParameter(format!("node id {id} already in use")));
        }
        self.nodes[id] = Some(Node { pos, is_terminal, parent_edge: None, child_edges: Vec::new() });
        Ok(())
    }

    /// Inserts an edge at an explicit id slot, wiring adjacency. Edge ids must
    /// arrive in a consistent order: child lists stay sorted by re-sorting.
    pub fn insert_edge_at(
        &mut self,
        id: EdgeId,
        parent: NodeId,
        child: NodeId,
        radius: f64,
        flow: f64,
    ) -> Result<()> {
        if !self.contains_node(parent) {
            return Err(Error::NodeNotFound(parent));
        }
        if !self.contains_node(child) {
            return Err(Error::NodeNotFound(child));
        }
        if self.node(child).parent_edge.is_some() || child == self.root {
            return Err(Error::DuplicateParent { child });
        }
        if id >= self.edges.len() {
            self.edges.resize_with(id + 1, || None);
        }
        if self.edges[id].is_some() {
            return Err(Error::InvalidParameter(format!("edge id {id} already in use")));
        }
        self.edges[id] = Some(Edge { parent, child, radius, flow });
        self.node_mut(parent).child_edges.push(id);
        self.node_mut(parent).child_edges.sort_unstable();
        self.node_mut(child).parent_edge = Some(id);
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        self.nodes[id].as_ref().expect("node id is alive")
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id].as_mut().expect("node id is alive")
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        self.edges[id].as_ref().expect("edge id is alive")
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> &mut Edge {
        self.edges[id].as_mut().expect("edge id is alive")
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        id < self.nodes.len() && self.nodes[id].is_some()
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        id < self.edges.len() && self.edges[id].is_some()
    }

    /// Upper bound on node ids (dead slots included).
    pub fn node_capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_capacity(&self) -> usize {
        self.edges.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_some()).count()
    }

    /// Alive node ids in ascending order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_some()).map(|(i, _)| i)
    }

    /// Alive edge ids in ascending order.
    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_some()).map(|(i, _)| i)
    }

    /// Derived edge length: Euclidean distance of the endpoint positions.
    pub fn edge_length(&self, id: EdgeId) -> f64 {
        let e = self.edge(id);
        self.node(e.parent).pos.distance(self.node(e.child).pos)
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.node(id).child_edges.is_empty()
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&n| self.is_leaf(n)).collect()
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent_edge.map(|e| self.edge(e).parent)
    }

    pub fn children_of(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.node(id).child_edges.iter().map(move |&e| self.edge(e).child)
    }

    /// Adds a detached node; connect it with [`VesselTree::add_edge`].
    pub fn add_node(&mut self, pos: Vec3, is_terminal: bool) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Some(Node { pos, is_terminal, parent_edge: None, child_edges: Vec::new() }));
        id
    }

    pub fn add_edge(&mut self, parent: NodeId, child: NodeId, radius: f64, flow: f64) -> Result<EdgeId> {
        if !self.contains_node(parent) {
            return Err(Error::NodeNotFound(parent));
        }
        if !self.contains_node(child) {
            return Err(Error::NodeNotFound(child));
        }
        if self.node(child).parent_edge.is_some() || child == self.root {
            return Err(Error::DuplicateParent { child });
        }
        let id = self.edges.len();
        self.edges.push(Some(Edge { parent, child, radius, flow }));
        self.node_mut(parent).child_edges.push(id);
        self.node_mut(child).parent_edge = Some(id);
        Ok(id)
    }

    /// Removes an edge, detaching the child subtree from the tree.
    pub fn remove_edge(&mut self, id: EdgeId) {
        let e = self.edges[id].take().expect("edge id is alive");
        if let Some(parent) = self.nodes[e.parent].as_mut() {
            parent.child_edges.retain(|&c| c != id);
        }
        if let Some(child) = self.nodes[e.child].as_mut() {
            child.parent_edge = None;
        }
    }

    /// Removes an isolated node (no incident edges).
    pub fn remove_node(&mut self, id: NodeId) {
        let n = self.nodes[id].take().expect("node id is alive");
        assert!(n.parent_edge.is_none() && n.child_edges.is_empty(), "node {id} still wired");
    }

    /// Deletes the whole subtree hanging below `node`, including it.
    pub fn remove_subtree(&mut self, node: NodeId) {
        let ids = self.subtree_nodes(node);
        for &n in ids.iter().rev() {
            let child_edges = self.node(n).child_edges.clone();
            for e in child_edges {
                self.remove_edge(e);
            }
            if let Some(pe) = self.node(n).parent_edge {
                self.remove_edge(pe);
            }
            self.remove_node(n);
        }
    }

    /// Contracts an edge: its child node is absorbed into the parent
    /// endpoint and any grandchildren are re-parented there. Radii and flows
    /// on surviving edges are untouched.
    pub fn contract_edge(&mut self, id: EdgeId) -> Result<()> {
        let e = self.edge(id).clone();
        if e.child == self.root {
            return Err(Error::InvalidParameter("cannot contract into the root".into()));
        }
        let grandchildren = self.node(e.child).child_edges.clone();
        self.remove_edge(id);
        for g in grandchildren {
            self.edge_mut(g).parent = e.parent;
            self.node_mut(e.child).child_edges.retain(|&c| c != g);
            self.node_mut(e.parent).child_edges.push(g);
        }
        self.node_mut(e.parent).child_edges.sort_unstable();
        self.remove_node_checked(e.child)?;
        Ok(())
    }

    /// Moves an edge under a different parent node, keeping adjacency lists
    /// sorted. The caller is responsible for not creating a cycle.
    pub fn reparent_edge(&mut self, e: EdgeId, new_parent: NodeId) -> Result<()> {
        if !self.contains_edge(e) {
            return Err(Error::EdgeNotFound(e));
        }
        if !self.contains_node(new_parent) {
            return Err(Error::NodeNotFound(new_parent));
        }
        let old_parent = self.edge(e).parent;
        if old_parent == new_parent {
            return Ok(());
        }
        self.node_mut(old_parent).child_edges.retain(|&c| c != e);
        self.edge_mut(e).parent = new_parent;
        self.node_mut(new_parent).child_edges.push(e);
        self.node_mut(new_parent).child_edges.sort_unstable();
        Ok(())
    }

    /// Nodes of the subtree rooted at `node` in pre-order (children visited
    /// ascending).
    pub fn subtree_nodes(&self, node: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            out.push(n);
            for &e in self.node(n).child_edges.iter().rev() {
                stack.push(self.edge(e).child);
            }
        }
        out
    }

    /// Edge ids in post-order: every child edge appears before its parent
    /// edge, children visited ascending.
    pub fn post_order_edges(&self) -> Vec<EdgeId> {
        let mut out = Vec::with_capacity(self.num_edges());
        // (edge, expanded) pairs; edges pushed in reverse so lower ids pop first.
        let mut stack: Vec<(EdgeId, bool)> = Vec::new();
        for &e in self.node(self.root).child_edges.iter().rev() {
            stack.push((e, false));
        }
        while let Some((e, expanded)) = stack.pop() {
            if expanded {
                out.push(e);
                continue;
            }
            stack.push((e, true));
            let child = self.edge(e).child;
            for &c in self.node(child).child_edges.iter().rev() {
                stack.push((c, false));
            }
        }
        out
    }

    /// Nodes in breadth-first order from the root.
    pub fn bfs_nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.num_nodes());
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(self.root);
        while let Some(n) = queue.pop_front() {
            out.push(n);
            for &e in &self.node(n).child_edges {
                queue.push_back(self.edge(e).child);
            }
        }
        out
    }

    /// Propagates radii leaf-to-root by Murray's law: each internal edge gets
    /// the cube root of the sum of its child edges' cubed radii. Edges ending
    /// at leaves keep their assigned radii and must have positive ones.
    pub fn propagate_radii_murray(&mut self) -> Result<()> {
        for e in self.post_order_edges() {
            let child = self.edge(e).child;
            let child_edges = &self.node(child).child_edges;
            if child_edges.is_empty() {
                if !(self.edge(e).radius > 0.0) {
                    return Err(Error::MissingRadius(e));
                }
                continue;
            }
            let sum_cubes: f64 = child_edges.iter().map(|&c| self.edge(c).radius.powi(3)).sum();
            self.edge_mut(e).radius = sum_cubes.cbrt();
        }
        Ok(())
    }

    /// Propagates flows leaf-to-root: every leaf edge carries Q0/N (N = leaf
    /// count) and every internal edge the sum of its child edges' flows, so
    /// conservation holds exactly at each node.
    pub fn propagate_flows(&mut self, q0: f64) -> Result<()> {
        if !(q0 > 0.0) {
            return Err(Error::InvalidParameter(format!("inlet flow must be > 0, got {q0}")));
        }
        let n_leaves = self.node_ids().filter(|&n| self.is_leaf(n) && n != self.root).count();
        if n_leaves == 0 {
            return Ok(());
        }
        let q_t = q0 / n_leaves as f64;
        for e in self.post_order_edges() {
            let child = self.edge(e).child;
            let child_edges = &self.node(child).child_edges;
            let q = if child_edges.is_empty() {
                q_t
            } else {
                child_edges.iter().map(|&c| self.edge(c).flow).sum()
            };
            self.edge_mut(e).flow = q;
        }
        Ok(())
    }

    /// Strahler order per edge: leaf edges are 0; a parent edge takes the
    /// maximum child order, plus one when two or more children share that
    /// maximum. Indexed by edge id; dead slots are None.
    pub fn strahler_orders(&self) -> Vec<Option<u32>> {
        let mut orders: Vec<Option<u32>> = vec![None; self.edges.len()];
        for e in self.post_order_edges() {
            let child = self.edge(e).child;
            let child_edges = &self.node(child).child_edges;
            let order = if child_edges.is_empty() {
                0
            } else {
                let mut max = 0u32;
                let mut ties = 0usize;
                for &c in child_edges {
                    let o = orders[c].expect("post-order guarantees children first");
                    if o > max {
                        max = o;
                        ties = 1;
                    } else if o == max {
                        ties += 1;
                    }
                }
                if ties >= 2 {
                    max + 1
                } else {
                    max
                }
            };
            orders[e] = Some(order);
        }
        orders
    }

    /// Node pressures from a breadth-first sweep: the root sits at p0 and
    /// each child sits one Poiseuille drop below its parent.
    pub fn compute_pressures(&self, cfg: &HemoConfig) -> Result<BTreeMap<NodeId, f64>> {
        let mut pressures = BTreeMap::new();
        pressures.insert(self.root, cfg.inlet_pressure_p0);
        for n in self.bfs_nodes() {
            let p_here = pressures[&n];
            for &e in &self.node(n).child_edges {
                let edge = self.edge(e);
                if !(edge.radius > 0.0) {
                    return Err(Error::NonPositiveRadius(e));
                }
                let drop = poiseuille_drop(cfg.viscosity_mu, self.edge_length(e), edge.flow, edge.radius);
                pressures.insert(edge.child, p_here - drop);
            }
        }
        Ok(pressures)
    }

    /// Checks every structural and hemodynamic invariant, returning all
    /// violations found (empty = valid). Trees whose edges all carry zero
    /// flow are treated as not yet propagated: radius positivity is still
    /// enforced, Murray and flow consistency are skipped.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !self.contains_node(self.root) {
            v.push(Violation::MissingRoot);
            return v;
        }
        if self.node(self.root).parent_edge.is_some() {
            v.push(Violation::RootHasParent);
        }

        let mut incoming = vec![0usize; self.nodes.len()];
        for (id, e) in self.edges.iter().enumerate() {
            let Some(e) = e else { continue };
            if !self.contains_node(e.parent) || !self.contains_node(e.child) {
                v.push(Violation::DanglingEdge(id));
                continue;
            }
            incoming[e.child] += 1;
            let parent_ok = self.node(e.parent).child_edges.contains(&id);
            let child_ok = self.node(e.child).parent_edge == Some(id);
            if !parent_ok || !child_ok {
                v.push(Violation::AdjacencyMismatch(id));
            }
        }
        for (n, &count) in incoming.iter().enumerate() {
            if count > 1 {
                v.push(Violation::MultipleParents(n));
            }
        }

        // Reachability walk; revisiting a node marks the offending edge.
        let mut seen = vec![false; self.nodes.len()];
        seen[self.root] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(self.root);
        while let Some(n) = queue.pop_front() {
            for &e in &self.node(n).child_edges {
                if !self.contains_edge(e) {
                    continue;
                }
                let child = self.edge(e).child;
                if !self.contains_node(child) {
                    continue;
                }
                if seen[child] {
                    v.push(Violation::Cycle(e));
                    continue;
                }
                seen[child] = true;
                queue.push_back(child);
            }
        }
        for n in self.node_ids() {
            if !seen[n] {
                v.push(Violation::Unreachable(n));
            }
            if self.node(n).is_terminal && !self.node(n).child_edges.is_empty() {
                v.push(Violation::TerminalNotLeaf(n));
            }
        }

        let mut any_flow = false;
        let mut all_flow = true;
        for e in self.edge_ids() {
            let edge = self.edge(e);
            if !(edge.radius > 0.0) {
                v.push(Violation::NonPositiveRadius(e));
            }
            if edge.flow != 0.0 {
                any_flow = true;
            } else {
                all_flow = false;
            }
            if self.contains_node(edge.parent)
                && self.contains_node(edge.child)
                && self.edge_length(e) == 0.0
            {
                v.push(Violation::ZeroLengthEdge(e));
            }
        }
        if any_flow && !all_flow {
            v.push(Violation::PartiallyPropagated);
        }
        if any_flow && all_flow {
            for e in self.edge_ids() {
                if !(self.edge(e).flow > 0.0) {
                    v.push(Violation::NonPositiveFlow(e));
                }
            }
            for n in self.node_ids() {
                let node = self.node(n);
                let Some(pe) = node.parent_edge else { continue };
                if node.child_edges.is_empty() {
                    continue;
                }
                let rp3 = self.edge(pe).radius.powi(3);
                let sum_r3: f64 = node.child_edges.iter().map(|&c| self.edge(c).radius.powi(3)).sum();
                if (rp3 - sum_r3).abs() > 1e-9 * rp3.abs().max(f64::MIN_POSITIVE) {
                    v.push(Violation::MurrayViolation(n));
                }
                let qp = self.edge(pe).flow;
                let sum_q: f64 = node.child_edges.iter().map(|&c| self.edge(c).flow).sum();
                if (qp - sum_q).abs() > 1e-9 * qp.abs().max(f64::MIN_POSITIVE) {
                    v.push(Violation::FlowViolation(n));
                }
            }
        }
        v
    }
}

impl VesselTree {
    fn remove_node_checked(&mut self, id: NodeId) -> Result<()> {
        let n = self.nodes[id].as_ref().ok_or(Error::NodeNotFound(id))?;
        if n.parent_edge.is_some() || !n.child_edges.is_empty() {
            return Err(Error::InvalidParameter(format!("node {id} still has incident edges")));
        }
        self.nodes[id] = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// root --e0--> a --e1--> b, plus a second child c of a.
    fn small_tree() -> (VesselTree, NodeId, NodeId, NodeId) {
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(100.0, 0.0, 0.0), false);
        let b = t.add_node(Vec3::new(200.0, 50.0, 0.0), true);
        let c = t.add_node(Vec3::new(200.0, -50.0, 0.0), true);
        t.add_edge(t.root(), a, 0.0, 0.0).unwrap();
        t.add_edge(a, b, 10.0, 0.0).unwrap();
        t.add_edge(a, c, 10.0, 0.0).unwrap();
        (t, a, b, c)
    }

    #[test]
    fn murray_single_child_copies_radius() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(10.0, 0.0, 0.0), false);
        let b = t.add_node(Vec3::new(20.0, 0.0, 0.0), true);
        t.add_edge(t.root(), a, 0.0, 0.0).unwrap();
        t.add_edge(a, b, 7.5, 0.0).unwrap();
        t.propagate_radii_murray().unwrap();
        assert_eq!(t.edge(0).radius, 7.5);
    }

    #[test]
    fn murray_two_equal_children() {
        let (mut t, ..) = small_tree();
        t.propagate_radii_murray().unwrap();
        let expect = 10.0 * 2.0f64.cbrt();
        assert!((t.edge(0).radius - expect).abs() < 1e-12, "{}", t.edge(0).radius);
    }

    #[test]
    fn murray_root_radius_for_thirty_thousand_terminals() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let hub = t.add_node(Vec3::new(1.0, 0.0, 0.0), false);
        t.add_edge(t.root(), hub, 0.0, 0.0).unwrap();
        for i in 0..30_000 {
            let term = t.add_node(Vec3::new(2.0, i as f64, 0.0), true);
            t.add_edge(hub, term, 10.08, 0.0).unwrap();
        }
        t.propagate_radii_murray().unwrap();
        let root_radius = t.edge(0).radius;
        assert!((root_radius - 313.2).abs() < 0.1, "root radius {root_radius}");
    }

    #[test]
    fn murray_root_identity_independent_of_topology() {
        // Same 8 terminal radii arranged as a star vs a deep chain of
        // bifurcations must give the same root radius.
        let radii = [9.5, 10.0, 10.2, 11.0, 9.9, 10.6, 10.1, 9.7];
        let expect = radii.iter().map(|r| r * r * r).sum::<f64>().cbrt();

        let mut star = VesselTree::new(Vec3::ZERO);
        let hub = star.add_node(Vec3::new(1.0, 0.0, 0.0), false);
        star.add_edge(star.root(), hub, 0.0, 0.0).unwrap();
        for (i, &r) in radii.iter().enumerate() {
            let t = star.add_node(Vec3::new(2.0, i as f64, 0.0), true);
            star.add_edge(hub, t, r, 0.0).unwrap();
        }
        star.propagate_radii_murray().unwrap();
        assert!((star.edge(0).radius - expect).abs() <= 1e-9 * expect);

        let mut chain = VesselTree::new(Vec3::ZERO);
        let mut spine = chain.add_node(Vec3::new(1.0, 0.0, 0.0), false);
        chain.add_edge(chain.root(), spine, 0.0, 0.0).unwrap();
        for (i, &r) in radii.iter().enumerate() {
            let t = chain.add_node(Vec3::new(2.0, i as f64, 0.0), true);
            chain.add_edge(spine, t, r, 0.0).unwrap();
            if i + 2 < radii.len() {
                let next = chain.add_node(Vec3::new(1.0, i as f64 + 1.0, 0.0), false);
                chain.add_edge(spine, next, 0.0, 0.0).unwrap();
                spine = next;
            }
        }
        chain.propagate_radii_murray().unwrap();
        assert!((chain.edge(0).radius - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn murray_errors_on_leaf_without_radius() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(1.0, 0.0, 0.0), true);
        t.add_edge(t.root(), a, 0.0, 0.0).unwrap();
        assert!(matches!(t.propagate_radii_murray(), Err(Error::MissingRadius(0))));
    }

    #[test]
    fn flows_split_equally_and_conserve() {
        let (mut t, ..) = small_tree();
        let q0 = 7.0 * units::ML_PER_MIN;
        t.propagate_flows(q0).unwrap();
        assert!((t.edge(1).flow - q0 / 2.0).abs() <= 1e-9 * q0);
        assert!((t.edge(0).flow - q0).abs() <= 1e-9 * q0);
    }

    #[test]
    fn terminal_flow_at_paper_scale() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let hub = t.add_node(Vec3::new(1.0, 0.0, 0.0), false);
        t.add_edge(t.root(), hub, 1.0, 0.0).unwrap();
        for i in 0..30_000 {
            let term = t.add_node(Vec3::new(2.0, i as f64, 0.0), true);
            t.add_edge(hub, term, 10.08, 0.0).unwrap();
        }
        t.propagate_flows(1.167e11).unwrap();
        let qt = t.edge(5).flow;
        assert!((qt - 3.89e6).abs() / 3.89e6 < 1e-3, "terminal flow {qt}");
        let sum: f64 = (0..30_000).map(|i| t.edge(1 + i).flow).sum();
        assert!((sum - t.edge(0).flow).abs() <= 1e-9 * sum);
    }

    #[test]
    fn single_terminal_carries_full_inlet_flow() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(1.0, 0.0, 0.0), true);
        t.add_edge(t.root(), a, 10.0, 0.0).unwrap();
        t.propagate_flows(1000.0).unwrap();
        assert_eq!(t.edge(0).flow, 1000.0);
    }

    #[test]
    fn strahler_basic_cases() {
        // Single edge.
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(1.0, 0.0, 0.0), true);
        t.add_edge(t.root(), a, 1.0, 0.0).unwrap();
        assert_eq!(t.strahler_orders()[0], Some(0));

        // Two order-0 children -> parent order 1.
        let (t2, ..) = small_tree();
        let orders = t2.strahler_orders();
        assert_eq!(orders[1], Some(0));
        assert_eq!(orders[2], Some(0));
        assert_eq!(orders[0], Some(1));
    }

    /// Builds a tree whose root edge has children of the given orders by
    /// attaching minimal Strahler ladders underneath.
    fn tree_with_child_orders(child_orders: &[u32]) -> VesselTree {
        let mut t = VesselTree::new(Vec3::ZERO);
        let hub = t.add_node(Vec3::new(1.0, 0.0, 0.0), false);
        t.add_edge(t.root(), hub, 1.0, 0.0).unwrap();
        for (i, &o) in child_orders.iter().enumerate() {
            let top = t.add_node(Vec3::new(2.0, i as f64 * 10.0, 0.0), false);
            let e = t.add_edge(hub, top, 1.0, 0.0).unwrap();
            grow_ladder(&mut t, top, e, o, i);
        }
        t
    }

    /// Extends `node` until its incoming edge has Strahler order `o`.
    fn grow_ladder(t: &mut VesselTree, node: NodeId, _edge: EdgeId, o: u32, salt: usize) {
        if o == 0 {
            t.node_mut(node).is_terminal = true;
            return;
        }
        for b in 0..2 {
            let child = t.add_node(
                Vec3::new(3.0 + o as f64, salt as f64 * 10.0 + b as f64, o as f64),
                false,
            );
            let e = t.add_edge(node, child, 1.0, 0.0).unwrap();
            grow_ladder(t, child, e, o - 1, salt);
        }
    }

    #[test]
    fn strahler_multifurcation_rules() {
        let t = tree_with_child_orders(&[2, 1]);
        assert_eq!(t.strahler_orders()[0], Some(2));
        let t = tree_with_child_orders(&[2, 2]);
        assert_eq!(t.strahler_orders()[0], Some(3));
    }

    /// Recursive-definition oracle for Strahler orders.
    fn strahler_oracle(t: &VesselTree, e: EdgeId) -> u32 {
        let child = t.edge(e).child;
        let kids: Vec<u32> =
            t.node(child).child_edges.iter().map(|&c| strahler_oracle(t, c)).collect();
        if kids.is_empty() {
            return 0;
        }
        let max = *kids.iter().max().unwrap();
        if kids.iter().filter(|&&k| k == max).count() >= 2 {
            max + 1
        } else {
            max
        }
    }

    #[test]
    fn strahler_matches_recursive_oracle_on_random_trees() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let mut t = VesselTree::new(Vec3::ZERO);
            let mut nodes = vec![t.root()];
            let n = rng.gen_range(2..200);
            for i in 0..n {
                let parent = nodes[rng.gen_range(0..nodes.len())];
                let id = t.add_node(Vec3::new(i as f64, rng.gen(), rng.gen()), false);
                t.add_edge(parent, id, 1.0, 0.0).unwrap();
                nodes.push(id);
            }
            let orders = t.strahler_orders();
            for e in t.edge_ids() {
                assert_eq!(orders[e], Some(strahler_oracle(&t, e)));
            }
        }
    }

    #[test]
    fn pressure_drop_scalar_example() {
        // mu = 3.6e-15 N·s/μm², l = 1000 μm, Q = 3.89e6 μm³/s, r = 10 μm.
        let drop = poiseuille_drop(3.6e-15, 1000.0, 3.89e6, 10.0);
        assert!((drop - 3.566e-9).abs() / 3.566e-9 < 1e-3, "drop {drop}");
        let mmhg = units::internal_to_mmhg(drop);
        assert!((mmhg - 26.7).abs() < 0.1, "drop {mmhg} mmHg");
    }

    #[test]
    fn pressures_zero_length_edge_has_zero_drop() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::ZERO, true);
        t.add_edge(t.root(), a, 10.0, 100.0).unwrap();
        let cfg = HemoConfig::default();
        let p = t.compute_pressures(&cfg).unwrap();
        assert_eq!(p[&a], cfg.inlet_pressure_p0);
    }

    #[test]
    fn pressures_decrease_along_paths() {
        let (mut t, a, b, c) = small_tree();
        t.propagate_radii_murray().unwrap();
        t.propagate_flows(1.167e11).unwrap();
        let cfg = HemoConfig::default();
        let p = t.compute_pressures(&cfg).unwrap();
        assert!(p[&t.root()] > p[&a]);
        assert!(p[&a] > p[&b]);
        assert!(p[&a] > p[&c]);
    }

    #[test]
    fn pressures_error_on_bad_radius() {
        let mut t = VesselTree::new(Vec3::ZERO);
        let a = t.add_node(Vec3::new(1.0, 0.0, 0.0), true);
        t.add_edge(t.root(), a, 0.0, 10.0).unwrap();
        assert!(matches!(t.compute_pressures(&HemoConfig::default()), Err(Error::NonPositiveRadius(0))));
    }

    #[test]
    fn validate_clean_tree_is_empty() {
        let (mut t, ..) = small_tree();
        t.propagate_radii_murray().unwrap();
        t.propagate_flows(1e6).unwrap();
        assert!(t.validate().is_empty(), "{:?}", t.validate());
    }

    #[test]
    fn validate_flags_zeroed_radius() {
        let (mut t, ..) = small_tree();
        t.propagate_radii_murray().unwrap();
        t.propagate_flows(1e6).unwrap();
        t.edge_mut(1).radius = 0.0;
        let v = t.validate();
        assert!(v.contains(&Violation::NonPositiveRadius(1)), "{v:?}");
    }

    #[test]
    fn validate_flags_back_edge_cycle() {
        let (mut t, a, b, _) = small_tree();
        // Wire a raw back-edge b -> a without going through add_edge.
        let id = t.edges.len();
        t.edges.push(Some(Edge { parent: b, child: a, radius: 1.0, flow: 0.0 }));
        t.nodes[b].as_mut().unwrap().child_edges.push(id);
        let v = t.validate();
        assert!(
            v.iter().any(|x| matches!(x, Violation::Cycle(_)))
                || v.iter().any(|x| matches!(x, Violation::MultipleParents(_))),
            "{v:?}"
        );
    }

    #[test]
    fn validate_unpropagated_tree_skips_hemodynamics() {
        let (t, ..) = small_tree();
        // Radii on terminal edges only, flows all zero: the root edge radius
        // of 0 is still a violation, Murray checks are not run.
        let v = t.validate();
        assert!(v.contains(&Violation::NonPositiveRadius(0)));
        assert!(!v.iter().any(|x| matches!(x, Violation::MurrayViolation(_))));
    }

    #[test]
    fn contract_edge_reparents_grandchildren() {
        let (mut t, a, b, c) = small_tree();
        t.contract_edge(0).unwrap();
        assert!(!t.contains_node(a));
        assert_eq!(t.parent_of(b), Some(t.root()));
        assert_eq!(t.parent_of(c), Some(t.root()));
        assert_eq!(t.num_edges(), 2);
        let v = t.validate();
        assert!(!v.iter().any(|x| matches!(x, Violation::Unreachable(_))), "{v:?}");
    }

    #[test]
    fn remove_subtree_deletes_all_below() {
        let (mut t, a, ..) = small_tree();
        t.remove_subtree(a);
        assert_eq!(t.num_nodes(), 1);
        assert_eq!(t.num_edges(), 0);
    }
}
