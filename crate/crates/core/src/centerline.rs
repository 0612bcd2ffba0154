//! Preprocessing of raw centerline graphs into a prebuilt large-artery tree.
//!
//! Skeletonization output arrives as an undirected weighted graph; the
//! pipeline here turns it into a clean rooted tree: maximum-radius spanning
//! tree, orientation away from the root, collapse of degree-2 chains, fan-out
//! and depth pruning.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::tree::{NodeId, VesselTree};
use crate::voxel::DistanceField;

#[derive(Clone, Debug)]
pub struct CenterNode {
    pub pos: Vec3,
    /// Vessel radius at this node, μm, when known.
    pub radius: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CenterEdge {
    pub a: u64,
    pub b: u64,
    pub radius: Option<f64>,
}

/// Undirected weighted graph as ingested from skeletonization output.
/// Node ids are preserved from the input files.
#[derive(Clone, Debug, Default)]
pub struct CenterlineGraph {
    nodes: BTreeMap<u64, CenterNode>,
    edges: Vec<CenterEdge>,
}

impl CenterlineGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: u64, pos: Vec3, radius: Option<f64>) -> Result<()> {
        if !pos.is_finite() {
            return Err(Error::InvalidParameter(format!("node {id} position is not finite")));
        }
        if self.nodes.insert(id, CenterNode { pos, radius }).is_some() {
            return Err(Error::InvalidParameter(format!("duplicate node id {id}")));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, a: u64, b: u64, radius: Option<f64>) -> Result<()> {
        if a == b {
            return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
        }
        if !self.nodes.contains_key(&a) {
            return Err(Error::NodeNotFound(a as usize));
        }
        if !self.nodes.contains_key(&b) {
            return Err(Error::NodeNotFound(b as usize));
        }
        self.edges.push(CenterEdge { a, b, radius });
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: u64) -> Option<&CenterNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (u64, &CenterNode)> {
        self.nodes.iter().map(|(&id, n)| (id, n))
    }

    pub fn edges(&self) -> &[CenterEdge] {
        &self.edges
    }

    /// Edge radius: the explicit value when present, otherwise the mean of
    /// the endpoint node radii when both are known.
    pub fn resolved_edge_radius(&self, e: &CenterEdge) -> Option<f64> {
        e.radius.or_else(|| {
            let ra = self.nodes[&e.a].radius?;
            let rb = self.nodes[&e.b].radius?;
            Some(0.5 * (ra + rb))
        })
    }
}

/// Assigns every edge the mean of the distance-field values at its two
/// endpoint positions. Errors when an endpoint falls outside the field.
pub fn assign_edge_radii(graph: &mut CenterlineGraph, field: &DistanceField) -> Result<()> {
    let values: BTreeMap<u64, f64> = graph
        .nodes
        .iter()
        .map(|(&id, n)| Ok((id, field.sample_world(n.pos)?)))
        .collect::<Result<_>>()?;
    for edge in graph.edges.iter_mut() {
        edge.radius = Some(0.5 * (values[&edge.a] + values[&edge.b]));
    }
    Ok(())
}

/// Spanning forest that maximizes total radius (minimum spanning tree under
/// weight = −radius), removing the thinnest edge of every loop. Kruskal with
/// ties broken on ascending endpoint ids.
pub fn minimum_spanning_tree(graph: &CenterlineGraph) -> Result<CenterlineGraph> {
    let mut order: Vec<(f64, u64, u64, usize)> = Vec::with_capacity(graph.edges.len());
    for (i, e) in graph.edges.iter().enumerate() {
        let r = graph
            .resolved_edge_radius(e)
            .ok_or_else(|| Error::InvalidParameter(format!("edge {}-{} has no radius", e.a, e.b)))?;
        let (lo, hi) = if e.a < e.b { (e.a, e.b) } else { (e.b, e.a) };
        order.push((r, lo, hi, i));
    }
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let ids: Vec<u64> = graph.nodes.keys().copied().collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }

    let mut out = CenterlineGraph::new();
    for (&id, n) in &graph.nodes {
        out.add_node(id, n.pos, n.radius)?;
    }
    for (r, _, _, i) in order {
        let e = &graph.edges[i];
        let ra = find(&mut parent, index[&e.a]);
        let rb = find(&mut parent, index[&e.b]);
        if ra != rb {
            parent[ra] = rb;
            out.edges.push(CenterEdge { a: e.a, b: e.b, radius: Some(r) });
        }
    }
    Ok(out)
}

/// Directs every edge of the component containing `root_id` away from it via
/// depth-first search, producing an unpropagated [`VesselTree`] (edge radii
/// from the graph, flows zero). Nodes unreachable from the root are dropped;
/// a cycle in the root's component is an error.
///
/// Returns the tree and the mapping from input node ids to tree node ids.
pub fn orient_from_root(
    graph: &CenterlineGraph,
    root_id: u64,
) -> Result<(VesselTree, BTreeMap<u64, NodeId>)> {
    let root = graph.nodes.get(&root_id).ok_or(Error::NodeNotFound(root_id as usize))?;

    // Adjacency with deterministic neighbor order.
    let mut adj: BTreeMap<u64, Vec<(u64, usize)>> = BTreeMap::new();
    for (i, e) in graph.edges.iter().enumerate() {
        adj.entry(e.a).or_default().push((e.b, i));
        adj.entry(e.b).or_default().push((e.a, i));
    }
    for list in adj.values_mut() {
        list.sort_unstable();
    }

    let mut tree = VesselTree::new(root.pos);
    let mut map: BTreeMap<u64, NodeId> = BTreeMap::new();
    map.insert(root_id, tree.root());

    let mut visited_edges: BTreeSet<usize> = BTreeSet::new();
    let mut stack: Vec<u64> = vec![root_id];
    while let Some(at) = stack.pop() {
        let Some(neighbors) = adj.get(&at) else { continue };
        for &(next, ei) in neighbors {
            if visited_edges.contains(&ei) {
                continue;
            }
            if map.contains_key(&next) {
                // A second path into an already-visited node closes a loop.
                return Err(Error::GraphCycle);
            }
            visited_edges.insert(ei);
            let node = tree.add_node(graph.nodes[&next].pos, false);
            let radius = graph.resolved_edge_radius(&graph.edges[ei]).unwrap_or(0.0);
            tree.add_edge(map[&at], node, radius, 0.0)?;
            map.insert(next, node);
            stack.push(next);
        }
    }
    Ok((tree, map))
}

/// Collapses every chain of degree-2 nodes into a single edge whose radius is
/// the length-weighted mean over the original chain segments. Chain interior
/// nodes are removed; endpoints stay put.
pub fn remove_intermediate_nodes(tree: &mut VesselTree) {
    let is_interior = |t: &VesselTree, n: NodeId| {
        n != t.root()
            && !t.node(n).is_terminal
            && t.node(n).parent_edge.is_some()
            && t.node(n).child_edges.len() == 1
    };

    let candidates: Vec<NodeId> = tree.node_ids().collect();
    for start in candidates {
        if !tree.contains_node(start) || !is_interior(tree, start) {
            continue;
        }
        // Walk up to the top of the maximal chain containing `start`.
        let mut top = start;
        while let Some(parent) = tree.parent_of(top) {
            if is_interior(tree, parent) {
                top = parent;
            } else {
                break;
            }
        }
        let head = tree.parent_of(top).expect("interior node has a parent");

        let mut segment_edges = vec![tree.node(top).parent_edge.unwrap()];
        let mut cursor = top;
        while is_interior(tree, cursor) {
            let e = tree.node(cursor).child_edges[0];
            segment_edges.push(e);
            cursor = tree.edge(e).child;
        }
        let tail = cursor;

        let total_len: f64 = segment_edges.iter().map(|&e| tree.edge_length(e)).sum();
        let radius = if total_len > 0.0 {
            segment_edges.iter().map(|&e| tree.edge(e).radius * tree.edge_length(e)).sum::<f64>()
                / total_len
        } else {
            segment_edges.iter().map(|&e| tree.edge(e).radius).sum::<f64>()
                / segment_edges.len() as f64
        };
        let flow = tree.edge(*segment_edges.last().unwrap()).flow;

        // Unlink the chain and bridge head -> tail.
        let mut interior = Vec::new();
        let mut node = top;
        while node != tail {
            let e = tree.node(node).child_edges[0];
            interior.push(node);
            node = tree.edge(e).child;
        }
        for &e in &segment_edges {
            tree.remove_edge(e);
        }
        for n in interior {
            tree.remove_node(n);
        }
        tree.add_edge(head, tail, radius, flow).expect("bridge endpoints are alive");
    }
}

/// Downstream depth of each node: length of the longest path to any leaf.
fn downstream_depths(tree: &VesselTree) -> Vec<f64> {
    let mut depth = vec![0.0f64; tree.node_capacity()];
    for e in tree.post_order_edges() {
        let edge = tree.edge(e);
        let candidate = depth[edge.child] + tree.edge_length(e);
        if candidate > depth[edge.parent] {
            depth[edge.parent] = candidate;
        }
    }
    depth
}

/// Limits the fan-out of every node to `max_children`, keeping the children
/// with the greatest downstream cumulative path length (ties keep the lower
/// child node id). Discarded children disappear with their whole subtrees.
pub fn degree_prune(tree: &mut VesselTree, max_children: usize) {
    let candidates: Vec<NodeId> = tree.node_ids().collect();
    for n in candidates {
        if !tree.contains_node(n) {
            continue;
        }
        if tree.node(n).child_edges.len() <= max_children {
            continue;
        }
        let depth = downstream_depths(tree);
        let mut ranked: Vec<(f64, NodeId)> = tree
            .node(n)
            .child_edges
            .iter()
            .map(|&e| {
                let child = tree.edge(e).child;
                (depth[child] + tree.edge_length(e), child)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, child) in ranked.iter().skip(max_children) {
            tree.remove_subtree(child);
        }
    }
}

/// Removes every node whose cumulative path length from the root exceeds
/// `max_distance`. Path length grows monotonically along paths, so removal is
/// subtree-complete by construction.
pub fn depth_prune(tree: &mut VesselTree, max_distance: f64) {
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    dist.insert(tree.root(), 0.0);
    let mut doomed = Vec::new();
    for n in tree.bfs_nodes() {
        let d = dist[&n];
        if d > max_distance {
            continue; // subtree goes with the already-doomed ancestor
        }
        for &e in &tree.node(n).child_edges {
            let child = tree.edge(e).child;
            let dc = d + tree.edge_length(e);
            dist.insert(child, dc);
            if dc > max_distance {
                doomed.push(child);
            }
        }
    }
    for n in doomed {
        if tree.contains_node(n) {
            tree.remove_subtree(n);
        }
    }
}

/// Keeps the connected component with the most nodes; among equally sized
/// components the one containing the smallest node id wins.
pub fn largest_component(graph: &CenterlineGraph) -> Result<CenterlineGraph> {
    if graph.nodes.is_empty() {
        return Err(Error::EmptyMask("centerline graph has no nodes".into()));
    }
    let ids: Vec<u64> = graph.nodes.keys().copied().collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut label = vec![usize::MAX; ids.len()];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for e in &graph.edges {
        let (a, b) = (index[&e.a], index[&e.b]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut n_components = 0usize;
    for start in 0..ids.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let component = n_components;
        n_components += 1;
        let mut stack = vec![start];
        label[start] = component;
        while let Some(at) = stack.pop() {
            for &next in &adj[at] {
                if label[next] == usize::MAX {
                    label[next] = component;
                    stack.push(next);
                }
            }
        }
    }
    let mut size = vec![0usize; n_components];
    let mut min_id = vec![u64::MAX; n_components];
    for (i, &l) in label.iter().enumerate() {
        size[l] += 1;
        min_id[l] = min_id[l].min(ids[i]);
    }
    let winner = (0..n_components)
        .max_by(|&a, &b| size[a].cmp(&size[b]).then(min_id[b].cmp(&min_id[a])))
        .unwrap();

    let mut out = CenterlineGraph::new();
    for (i, &id) in ids.iter().enumerate() {
        if label[i] == winner {
            let n = &graph.nodes[&id];
            out.add_node(id, n.pos, n.radius)?;
        }
    }
    for e in &graph.edges {
        if label[index[&e.a]] == winner {
            out.edges.push(e.clone());
        }
    }
    Ok(out)
}

/// Full preprocessing pipeline: spanning forest, orientation, chain collapse,
/// degree and depth pruning, and a final chain collapse (pruning can create
/// new degree-2 nodes). Subtree-complete pruning keeps the tree connected, so
/// component selection after orientation reduces to a consistency check;
/// input components not containing the root are dropped by orientation.
pub fn preprocess(
    graph: &CenterlineGraph,
    root_id: u64,
    max_depth: f64,
    max_children: usize,
) -> Result<VesselTree> {
    let forest = minimum_spanning_tree(graph)?;
    let (mut tree, _) = orient_from_root(&forest, root_id)?;
    remove_intermediate_nodes(&mut tree);
    degree_prune(&mut tree, max_children);
    depth_prune(&mut tree, max_depth);
    remove_intermediate_nodes(&mut tree);
    debug_assert!(
        !tree.validate().iter().any(|v| matches!(v, crate::tree::Violation::Unreachable(_))),
        "pruning must preserve connectivity"
    );
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{distance_transform, VoxelMask};

    fn line_graph(radii: &[f64]) -> CenterlineGraph {
        let mut g = CenterlineGraph::new();
        for i in 0..=radii.len() {
            g.add_node(i as u64, Vec3::new(i as f64 * 100.0, 0.0, 0.0), None).unwrap();
        }
        for (i, &r) in radii.iter().enumerate() {
            g.add_edge(i as u64, i as u64 + 1, Some(r)).unwrap();
        }
        g
    }

    #[test]
    fn self_loops_rejected() {
        let mut g = CenterlineGraph::new();
        g.add_node(0, Vec3::ZERO, None).unwrap();
        assert!(g.add_edge(0, 0, None).is_err());
    }

    #[test]
    fn assign_radii_from_field() {
        let mut shell = VoxelMask::new([9, 9, 9], 1.0, Vec3::ZERO).unwrap();
        for k in 1..8 {
            for j in 1..8 {
                for i in 1..8 {
                    shell.set([i, j, k], true);
                }
            }
        }
        let field = distance_transform(&shell);
        let mut g = CenterlineGraph::new();
        g.add_node(0, shell.voxel_center([4, 4, 4]), None).unwrap();
        g.add_node(1, shell.voxel_center([2, 4, 4]), None).unwrap();
        g.add_edge(0, 1, None).unwrap();
        assign_edge_radii(&mut g, &field).unwrap();
        let want = 0.5 * (field.value([4, 4, 4]) + field.value([2, 4, 4]));
        assert_eq!(g.edges()[0].radius, Some(want));

        let mut bad = CenterlineGraph::new();
        bad.add_node(0, Vec3::new(-5.0, 0.0, 0.0), None).unwrap();
        bad.add_node(1, Vec3::new(1.0, 1.0, 1.0), None).unwrap();
        bad.add_edge(0, 1, None).unwrap();
        assert!(matches!(assign_edge_radii(&mut bad, &field), Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn edge_radius_falls_back_to_node_means() {
        let mut g = CenterlineGraph::new();
        g.add_node(0, Vec3::ZERO, Some(4.0)).unwrap();
        g.add_node(1, Vec3::new(1.0, 0.0, 0.0), Some(6.0)).unwrap();
        g.add_edge(0, 1, None).unwrap();
        assert_eq!(g.resolved_edge_radius(&g.edges()[0]), Some(5.0));
    }

    #[test]
    fn mst_keeps_tree_unchanged() {
        let g = line_graph(&[3.0, 2.0, 4.0]);
        let mst = minimum_spanning_tree(&g).unwrap();
        assert_eq!(mst.num_edges(), 3);
    }

    #[test]
    fn mst_triangle_drops_thinnest_edge() {
        let mut g = CenterlineGraph::new();
        for i in 0..3 {
            g.add_node(i, Vec3::new(i as f64, 0.0, 0.0), None).unwrap();
        }
        g.add_edge(0, 1, Some(3.0)).unwrap();
        g.add_edge(1, 2, Some(3.0)).unwrap();
        g.add_edge(0, 2, Some(1.0)).unwrap();
        let mst = minimum_spanning_tree(&g).unwrap();
        assert_eq!(mst.num_edges(), 2);
        assert!(mst.edges().iter().all(|e| e.radius == Some(3.0)));
    }

    /// Exhaustive max-spanning-tree oracle over all edge subsets.
    fn brute_force_max_spanning_radius(g: &CenterlineGraph) -> f64 {
        let n = g.num_nodes();
        let m = g.num_edges();
        let ids: Vec<u64> = g.nodes().map(|(id, _)| id).collect();
        let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut best = f64::NEG_INFINITY;
        for subset in 0u32..(1 << m) {
            if subset.count_ones() as usize != n - 1 {
                continue;
            }
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    let r = find(p, p[x]);
                    p[x] = r;
                }
                p[x]
            }
            let mut total = 0.0;
            let mut joined = 0usize;
            let mut ok = true;
            for (i, e) in g.edges().iter().enumerate() {
                if subset & (1 << i) == 0 {
                    continue;
                }
                let (ra, rb) = (find(&mut parent, index[&e.a]), find(&mut parent, index[&e.b]));
                if ra == rb {
                    ok = false;
                    break;
                }
                parent[ra] = rb;
                total += e.radius.unwrap();
                joined += 1;
            }
            if ok && joined == n - 1 {
                best = best.max(total);
            }
        }
        best
    }

    #[test]
    fn mst_matches_exhaustive_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(4..9usize);
            let mut g = CenterlineGraph::new();
            for i in 0..n {
                g.add_node(i as u64, Vec3::new(i as f64, 0.0, 0.0), None).unwrap();
            }
            // Random connected graph: a spine plus a few extras.
            for i in 1..n {
                g.add_edge(i as u64 - 1, i as u64, Some(rng.gen_range(0.5..5.0))).unwrap();
            }
            let mut extras = 0;
            while extras < 4 {
                let a = rng.gen_range(0..n as u64);
                let b = rng.gen_range(0..n as u64);
                if a != b
                    && !g.edges().iter().any(|e| (e.a, e.b) == (a, b) || (e.b, e.a) == (a, b))
                {
                    g.add_edge(a, b, Some(rng.gen_range(0.5..5.0))).unwrap();
                    extras += 1;
                }
            }
            let mst = minimum_spanning_tree(&g).unwrap();
            let total: f64 = mst.edges().iter().map(|e| e.radius.unwrap()).sum();
            let best = brute_force_max_spanning_radius(&g);
            assert!((total - best).abs() < 1e-9, "kept {total}, best {best}");
        }
    }

    #[test]
    fn mst_cycle_property() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let n = 10usize;
        let mut g = CenterlineGraph::new();
        for i in 0..n {
            g.add_node(i as u64, Vec3::new(i as f64, 0.0, 0.0), None).unwrap();
        }
        for i in 1..n {
            g.add_edge(i as u64 - 1, i as u64, Some(rng.gen_range(0.5..5.0))).unwrap();
        }
        for _ in 0..6 {
            let a = rng.gen_range(0..n as u64);
            let b = rng.gen_range(0..n as u64);
            if a != b {
                let _ = g.add_edge(a, b, Some(rng.gen_range(0.5..5.0)));
            }
        }
        let mst = minimum_spanning_tree(&g).unwrap();
        let (tree, map) = orient_from_root(&mst, 0).unwrap();
        for e in g.edges() {
            let in_tree =
                mst.edges().iter().any(|t| (t.a, t.b) == (e.a, e.b) || (t.b, t.a) == (e.a, e.b));
            if in_tree {
                continue;
            }
            // Min radius on the tree path between the endpoints.
            let (na, nb) = (map[&e.a], map[&e.b]);
            let mut ancestors = BTreeMap::new();
            let mut cur = Some(na);
            let mut d = 0;
            while let Some(c) = cur {
                ancestors.insert(c, d);
                d += 1;
                cur = tree.parent_of(c);
            }
            let mut cur = nb;
            let mut path_min = f64::INFINITY;
            while !ancestors.contains_key(&cur) {
                let pe = tree.node(cur).parent_edge.unwrap();
                path_min = path_min.min(tree.edge(pe).radius);
                cur = tree.parent_of(cur).unwrap();
            }
            let meet = cur;
            let mut cur = na;
            while cur != meet {
                let pe = tree.node(cur).parent_edge.unwrap();
                path_min = path_min.min(tree.edge(pe).radius);
                cur = tree.parent_of(cur).unwrap();
            }
            assert!(
                e.radius.unwrap() <= path_min + 1e-12,
                "non-tree edge {}-{} radius {} exceeds path minimum {}",
                e.a,
                e.b,
                e.radius.unwrap(),
                path_min
            );
        }
    }

    #[test]
    fn orient_path_from_middle_and_end() {
        let g = line_graph(&[2.0, 3.0]);
        let (t, map) = orient_from_root(&g, 1).unwrap();
        assert_eq!(t.root(), map[&1]);
        assert_eq!(t.parent_of(map[&0]), Some(map[&1]));
        assert_eq!(t.parent_of(map[&2]), Some(map[&1]));

        let (t, map) = orient_from_root(&g, 0).unwrap();
        assert_eq!(t.parent_of(map[&1]), Some(map[&0]));
        assert_eq!(t.parent_of(map[&2]), Some(map[&1]));
    }

    #[test]
    fn orient_rejects_cycles_and_missing_root() {
        let mut g = CenterlineGraph::new();
        for i in 0..3 {
            g.add_node(i, Vec3::new(i as f64, 0.0, 0.0), None).unwrap();
        }
        g.add_edge(0, 1, Some(1.0)).unwrap();
        g.add_edge(1, 2, Some(1.0)).unwrap();
        g.add_edge(2, 0, Some(1.0)).unwrap();
        assert!(matches!(orient_from_root(&g, 0), Err(Error::GraphCycle)));
        assert!(matches!(orient_from_root(&g, 99), Err(Error::NodeNotFound(_))));
    }

    #[test]
    fn collapse_chain_to_single_edge() {
        let g = line_graph(&[2.0, 4.0]);
        let (mut t, map) = orient_from_root(&g, 0).unwrap();
        remove_intermediate_nodes(&mut t);
        assert_eq!(t.num_nodes(), 2);
        assert_eq!(t.num_edges(), 1);
        let e = t.edge_ids().next().unwrap();
        // Equal segment lengths: plain mean of 2 and 4.
        assert!((t.edge(e).radius - 3.0).abs() < 1e-12);
        // Endpoints preserved; length is the straight-line distance.
        assert_eq!(t.edge_length(e), 200.0);
        assert!(t.contains_node(map[&0]));
    }

    #[test]
    fn collapse_weights_radius_by_length() {
        let mut g = CenterlineGraph::new();
        g.add_node(0, Vec3::ZERO, None).unwrap();
        g.add_node(1, Vec3::new(100.0, 0.0, 0.0), None).unwrap();
        g.add_node(2, Vec3::new(400.0, 0.0, 0.0), None).unwrap();
        g.add_edge(0, 1, Some(2.0)).unwrap();
        g.add_edge(1, 2, Some(5.0)).unwrap();
        let (mut t, _) = orient_from_root(&g, 0).unwrap();
        remove_intermediate_nodes(&mut t);
        let e = t.edge_ids().next().unwrap();
        let want = (2.0 * 100.0 + 5.0 * 300.0) / 400.0;
        assert!((t.edge(e).radius - want).abs() < 1e-12);
    }

    #[test]
    fn collapse_leaves_branching_tree_unchanged() {
        let mut g = CenterlineGraph::new();
        g.add_node(0, Vec3::ZERO, None).unwrap();
        g.add_node(1, Vec3::new(1.0, 0.0, 0.0), None).unwrap();
        g.add_node(2, Vec3::new(2.0, 1.0, 0.0), None).unwrap();
        g.add_node(3, Vec3::new(2.0, -1.0, 0.0), None).unwrap();
        g.add_edge(0, 1, Some(1.0)).unwrap();
        g.add_edge(1, 2, Some(1.0)).unwrap();
        g.add_edge(1, 3, Some(1.0)).unwrap();
        let (mut t, _) = orient_from_root(&g, 0).unwrap();
        let before = (t.num_nodes(), t.num_edges());
        remove_intermediate_nodes(&mut t);
        assert_eq!((t.num_nodes(), t.num_edges()), before);
    }

    fn star_with_depths(depths: &[f64]) -> VesselTree {
        let mut t = VesselTree::new(Vec3::ZERO);
        for (i, &d) in depths.iter().enumerate() {
            let angle = i as f64;
            let dir = Vec3::new(angle.cos(), angle.sin(), 0.0);
            let a = t.add_node(dir * 10.0, false);
            t.add_edge(t.root(), a, 1.0, 0.0).unwrap();
            let b = t.add_node(dir * (10.0 + d), false);
            t.add_edge(a, b, 1.0, 0.0).unwrap();
        }
        t
    }

    #[test]
    fn degree_prune_keeps_longest_paths() {
        let mut t = star_with_depths(&[10.0, 9.0, 8.0, 7.0, 2.0, 1.0]);
        degree_prune(&mut t, 4);
        assert_eq!(t.node(t.root()).child_edges.len(), 4);
        // Brute-force downstream length of each surviving branch.
        let depths: Vec<f64> = t
            .node(t.root())
            .child_edges
            .iter()
            .map(|&e| {
                let child = t.edge(e).child;
                let ge = t.node(child).child_edges[0];
                t.edge_length(e) + t.edge_length(ge)
            })
            .collect();
        for d in depths {
            assert!(d >= 10.0 + 7.0 - 1e-9, "kept a short branch: {d}");
        }
    }

    #[test]
    fn degree_prune_no_op_below_limit() {
        let mut t = star_with_depths(&[3.0, 2.0, 1.0]);
        let before = t.num_nodes();
        degree_prune(&mut t, 4);
        assert_eq!(t.num_nodes(), before);
    }

    #[test]
    fn degree_prune_single_path() {
        let mut t = star_with_depths(&[10.0, 5.0, 2.0]);
        degree_prune(&mut t, 1);
        assert_eq!(t.node(t.root()).child_edges.len(), 1);
    }

    #[test]
    fn degree_prune_idempotent() {
        let mut t = star_with_depths(&[10.0, 9.0, 8.0, 7.0, 2.0, 1.0]);
        degree_prune(&mut t, 4);
        let snapshot: Vec<_> = t.node_ids().collect();
        degree_prune(&mut t, 4);
        assert_eq!(snapshot, t.node_ids().collect::<Vec<_>>());
    }

    #[test]
    fn depth_prune_cumulative_distance() {
        let g = line_graph(&[1.0, 1.0, 1.0]);
        let (mut t, map) = orient_from_root(&g, 0).unwrap();
        depth_prune(&mut t, 250.0);
        assert!(t.contains_node(map[&0]));
        assert!(t.contains_node(map[&1]));
        assert!(t.contains_node(map[&2]));
        assert!(!t.contains_node(map[&3]));

        let (mut t2, map2) = orient_from_root(&g, 0).unwrap();
        depth_prune(&mut t2, f64::INFINITY);
        assert_eq!(t2.num_nodes(), 4);
        depth_prune(&mut t2, 0.0);
        assert_eq!(t2.num_nodes(), 1);
        assert!(t2.contains_node(map2[&0]));
    }

    #[test]
    fn depth_prune_idempotent() {
        let g = line_graph(&[1.0, 1.0, 1.0]);
        let (mut t, _) = orient_from_root(&g, 0).unwrap();
        depth_prune(&mut t, 150.0);
        let n = t.num_nodes();
        depth_prune(&mut t, 150.0);
        assert_eq!(t.num_nodes(), n);
    }

    #[test]
    fn largest_component_selection() {
        let mut g = CenterlineGraph::new();
        for i in 0..8u64 {
            g.add_node(i, Vec3::new(i as f64, 0.0, 0.0), None).unwrap();
        }
        // Component {0..4} of size 5, component {5..7} of size 3.
        for i in 0..4 {
            g.add_edge(i, i + 1, Some(1.0)).unwrap();
        }
        g.add_edge(5, 6, Some(1.0)).unwrap();
        g.add_edge(6, 7, Some(1.0)).unwrap();
        let big = largest_component(&g).unwrap();
        assert_eq!(big.num_nodes(), 5);
        assert!(big.node(0).is_some());

        // Tie of sizes {4, 4}: the component holding the smaller min id wins.
        let mut tie = CenterlineGraph::new();
        for i in 0..8u64 {
            tie.add_node(i, Vec3::new(i as f64, 0.0, 0.0), None).unwrap();
        }
        for i in [1u64, 2, 3] {
            tie.add_edge(i - 1, i, Some(1.0)).unwrap();
        }
        for i in [5u64, 6, 7] {
            tie.add_edge(i - 1, i, Some(1.0)).unwrap();
        }
        let winner = largest_component(&tie).unwrap();
        assert!(winner.node(0).is_some());
        assert!(winner.node(4).is_none());

        // Connected graph unchanged; empty graph errors.
        let whole = largest_component(&g).unwrap();
        assert_eq!(whole.num_nodes(), 5);
        assert!(largest_component(&CenterlineGraph::new()).is_err());
    }

    #[test]
    fn preprocess_produces_valid_tree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut g = CenterlineGraph::new();
        let n = 40;
        for i in 0..n {
            g.add_node(
                i as u64,
                Vec3::new(
                    rng.gen_range(0.0..1000.0),
                    rng.gen_range(0.0..1000.0),
                    rng.gen_range(0.0..1000.0),
                ),
                None,
            )
            .unwrap();
        }
        for i in 1..n {
            let parent = rng.gen_range(0..i);
            g.add_edge(parent as u64, i as u64, Some(rng.gen_range(5.0..50.0))).unwrap();
        }
        for _ in 0..8 {
            let a = rng.gen_range(0..n as u64);
            let b = rng.gen_range(0..n as u64);
            if a != b {
                let _ = g.add_edge(a, b, Some(rng.gen_range(5.0..50.0)));
            }
        }
        let tree = preprocess(&g, 0, 2000.0, 4).unwrap();
        let violations = tree.validate();
        assert!(violations.is_empty(), "{violations:?}");
        assert!(tree.num_nodes() <= g.num_nodes());
        // No degree-2 interior chains remain.
        for nid in tree.node_ids() {
            if nid != tree.root() && tree.node(nid).parent_edge.is_some() {
                assert_ne!(tree.node(nid).child_edges.len(), 1, "degree-2 node survived");
            }
        }
    }
}
