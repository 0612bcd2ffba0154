//! Global constructive optimization of the vascular tree.
//!
//! Starting from terminals attached to a prebuilt large-artery tree, the
//! engine alternates four passes until the global cost settles:
//!
//! * relax — move each free branching node to the local cost minimum;
//! * merge — contract degenerate short edges left behind by relaxation;
//! * split — insert a new branching node where regrouping a subset of a
//!   node's children lowers cost;
//! * prune — drop low-order generated branches and re-attach their
//!   terminals inside the subtree they were assigned to at initialization.
//!
//! The cost of an edge combines the material volume of the vessel and the
//! power dissipated by laminar flow through it; radii never enter the
//! optimizer's decision variables, they always follow from the terminal
//! radii by cube-sum propagation.

mod optim;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::sampling::TerminalSet;
use crate::tree::{EdgeId, NodeId, VesselTree};
use crate::units;

use optim::Anchor;

/// All optimization weights, physical constants, thresholds and schedules.
#[derive(Clone, Debug)]
pub struct GcoConfig {
    /// Material cost weight, N/(μm²·s).
    pub w_c: f64,
    /// Power cost weight, dimensionless.
    pub w_p: f64,
    /// Blood viscosity, N·s/μm².
    pub viscosity_mu: f64,
    /// Inlet flow distributed over the terminals, μm³/s.
    pub inlet_flow_q0: f64,
    /// Merge when shortest/second-shortest incident edge length falls below
    /// this ratio.
    pub merge_ratio_threshold: f64,
    /// Merge any incident edge shorter than this, μm.
    pub merge_abs_epsilon: f64,
    /// Strahler threshold per iteration; the last entry repeats when there
    /// are more iterations than entries.
    pub prune_order_schedule: Vec<u32>,
    pub max_iterations: usize,
    /// Gradient-norm cutoff for node relaxation, N/s.
    pub relax_tolerance: f64,
    pub relax_max_steps: usize,
    /// Distance guard below which the cost gradient is treated as singular.
    pub min_edge_epsilon: f64,
    /// Relative global-cost improvement below which the inner
    /// relax/merge/split loop stops.
    pub inner_tolerance: f64,
    pub inner_max_sweeps: usize,
    /// Attach terminals to any prebuilt node instead of ending nodes only.
    pub attach_all_nodes: bool,
    /// Relax independent subtrees on worker threads. Results are
    /// bit-identical to the sequential schedule.
    pub parallel_relax: bool,
    pub seed: u64,
}

impl Default for GcoConfig {
    fn default() -> Self {
        GcoConfig {
            w_c: 5e-8,
            w_p: 1.0,
            viscosity_mu: 3.6e-15,
            inlet_flow_q0: 7.0 * units::ML_PER_MIN,
            merge_ratio_threshold: 0.2,
            merge_abs_epsilon: 1.0,
            prune_order_schedule: vec![2, 2, 1, 1, 1],
            max_iterations: 5,
            relax_tolerance: 1e-10,
            relax_max_steps: 60,
            min_edge_epsilon: 1e-6,
            inner_tolerance: 1e-4,
            inner_max_sweeps: 10,
            attach_all_nodes: false,
            parallel_relax: false,
            seed: 0,
        }
    }
}

impl GcoConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.w_c >= 0.0) || !(self.w_p >= 0.0) {
            problems.push("w_c and w_p must be non-negative".to_string());
        }
        if self.w_c == 0.0 && self.w_p == 0.0 {
            problems.push("w_c and w_p must not both be zero".to_string());
        }
        if !(self.viscosity_mu > 0.0) {
            problems.push(format!("viscosity_mu must be > 0, got {}", self.viscosity_mu));
        }
        if !(self.inlet_flow_q0 > 0.0) {
            problems.push(format!("inlet_flow_q0 must be > 0, got {}", self.inlet_flow_q0));
        }
        if !(self.merge_ratio_threshold > 0.0) {
            problems.push(format!(
                "merge_ratio_threshold must be > 0, got {}",
                self.merge_ratio_threshold
            ));
        }
        if !(self.merge_abs_epsilon > 0.0) {
            problems.push(format!("merge_abs_epsilon must be > 0, got {}", self.merge_abs_epsilon));
        }
        if self.prune_order_schedule.is_empty() {
            problems.push("prune_order_schedule must have at least one entry".to_string());
        }
        if self.relax_max_steps == 0 {
            problems.push("relax_max_steps must be >= 1".to_string());
        }
        if self.inner_max_sweeps == 0 {
            problems.push("inner_max_sweeps must be >= 1".to_string());
        }
        if !(self.min_edge_epsilon > 0.0) {
            problems.push(format!("min_edge_epsilon must be > 0, got {}", self.min_edge_epsilon));
        }
        if !(self.relax_tolerance >= 0.0) || !(self.inner_tolerance >= 0.0) {
            problems.push("tolerances must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("\n")))
        }
    }
}

/// Terminal node id -> prebuilt node it was attached to at initialization.
pub type SubtreeAssignment = BTreeMap<NodeId, NodeId>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Init,
    Relax,
    Merge,
    Split,
    Prune,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Relax => "relax",
            Phase::Merge => "merge",
            Phase::Split => "split",
            Phase::Prune => "prune",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TraceRecord {
    pub iteration: u32,
    pub phase: Phase,
    /// Global cost, N·μm/s.
    pub cost: f64,
    pub nodes: usize,
    pub edges: usize,
}

pub type ConvergenceTrace = Vec<TraceRecord>;

#[derive(Clone, Copy, Debug, Default)]
pub struct GcoDiagnostics {
    /// Relaxations whose line search failed before making progress.
    pub relax_failures: usize,
    /// Merge candidates skipped because the absorbed endpoint is protected.
    pub skipped_merges: usize,
    pub merges_applied: usize,
    pub splits_applied: usize,
}

// ---------------------------------------------------------------------------
// Cost model.
// ---------------------------------------------------------------------------

/// Coefficient of the edge cost per unit length: material term plus power
/// term, N/s.
pub fn edge_coefficient(radius: f64, flow: f64, cfg: &GcoConfig) -> f64 {
    let pi = std::f64::consts::PI;
    cfg.w_c * pi * radius * radius
        + cfg.w_p * flow * flow * 8.0 * cfg.viscosity_mu / (pi * radius.powi(4))
}

/// Cost of a single edge at its current length, N·μm/s.
pub fn edge_cost(tree: &VesselTree, e: EdgeId, cfg: &GcoConfig) -> f64 {
    edge_coefficient(tree.edge(e).radius, tree.edge(e).flow, cfg) * tree.edge_length(e)
}

/// Sum of the costs of all edges incident to `v`.
pub fn local_cost(tree: &VesselTree, v: NodeId, cfg: &GcoConfig) -> Result<f64> {
    if !tree.contains_node(v) {
        return Err(Error::NodeNotFound(v));
    }
    let node = tree.node(v);
    let incident = node.parent_edge.iter().chain(node.child_edges.iter());
    let mut total = 0.0;
    let mut any = false;
    for &e in incident {
        any = true;
        if !(tree.edge(e).radius > 0.0) {
            return Err(Error::NonPositiveRadius(e));
        }
        total += edge_cost(tree, e, cfg);
    }
    if !any {
        return Err(Error::InvalidParameter(format!("node {v} has no incident edges")));
    }
    Ok(total)
}

/// Analytic gradient of [`local_cost`] with respect to the position of `v`:
/// the weighted sum of unit vectors pointing from each neighbor to `v`.
/// Errors when a neighbor sits within `min_edge_epsilon` (merge first).
pub fn local_cost_gradient(tree: &VesselTree, v: NodeId, cfg: &GcoConfig) -> Result<Vec3> {
    let anchors = incident_anchors(tree, v, cfg, None)?;
    optim::weber_gradient(tree.node(v).pos, &anchors, cfg.min_edge_epsilon).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "node {v} coincides with a neighbor within {} μm",
            cfg.min_edge_epsilon
        ))
    })
}

/// Global cost: the sum of local costs over all nodes, which counts every
/// edge at both of its endpoints. Accumulated with compensated summation in
/// ascending edge order so the value is independent of any parallel
/// execution schedule.
pub fn global_cost(tree: &VesselTree, cfg: &GcoConfig) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for e in tree.edge_ids() {
        let value = edge_cost(tree, e, cfg);
        let y = value - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    2.0 * sum
}

fn incident_anchors(
    tree: &VesselTree,
    v: NodeId,
    cfg: &GcoConfig,
    overlay: Option<&BTreeMap<NodeId, Vec3>>,
) -> Result<Vec<Anchor>> {
    if !tree.contains_node(v) {
        return Err(Error::NodeNotFound(v));
    }
    let node = tree.node(v);
    let mut anchors = Vec::with_capacity(node.child_edges.len() + 1);
    let lookup = |n: NodeId| -> Vec3 {
        overlay.and_then(|o| o.get(&n).copied()).unwrap_or_else(|| tree.node(n).pos)
    };
    if let Some(pe) = node.parent_edge {
        let edge = tree.edge(pe);
        if !(edge.radius > 0.0) {
            return Err(Error::NonPositiveRadius(pe));
        }
        anchors.push(Anchor { pos: lookup(edge.parent), coeff: edge_coefficient(edge.radius, edge.flow, cfg) });
    }
    for &ce in &node.child_edges {
        let edge = tree.edge(ce);
        if !(edge.radius > 0.0) {
            return Err(Error::NonPositiveRadius(ce));
        }
        anchors.push(Anchor { pos: lookup(edge.child), coeff: edge_coefficient(edge.radius, edge.flow, cfg) });
    }
    if anchors.is_empty() {
        return Err(Error::InvalidParameter(format!("node {v} has no incident edges")));
    }
    Ok(anchors)
}

/// Result of relaxing one node.
#[derive(Clone, Copy, Debug)]
pub struct RelaxOutcome {
    pub pos: Vec3,
    pub cost_before: f64,
    pub cost_after: f64,
    /// The optimizer could not move the node at all.
    pub stalled: bool,
}

/// Moves `v` to a local minimizer of its local cost with all neighbors
/// fixed. The node must not be the root or a terminal; the engine
/// additionally keeps prebuilt nodes out of this. The returned cost never
/// exceeds the starting cost; on line-search failure the position is left
/// unchanged and the outcome is flagged.
pub fn relax_node(tree: &mut VesselTree, v: NodeId, cfg: &GcoConfig) -> Result<RelaxOutcome> {
    if v == tree.root() {
        return Err(Error::InvalidParameter("cannot relax the root".into()));
    }
    if tree.node(v).is_terminal {
        return Err(Error::InvalidParameter(format!("cannot relax terminal node {v}")));
    }
    let anchors = incident_anchors(tree, v, cfg, None)?;
    let start = tree.node(v).pos;
    let res = optim::minimize(&anchors, start, cfg.min_edge_epsilon, cfg.relax_tolerance, cfg.relax_max_steps);
    tree.node_mut(v).pos = res.pos;
    Ok(RelaxOutcome {
        pos: res.pos,
        cost_before: optim::weber_cost(start, &anchors),
        cost_after: res.cost,
        stalled: res.stalled,
    })
}

// ---------------------------------------------------------------------------
// Split evaluation, shared by the greedy pass and by exhaustive oracles.
// ---------------------------------------------------------------------------

/// Geometry and hemodynamics of one child edge entering a split decision.
#[derive(Clone, Copy, Debug)]
pub struct SplitChild {
    pub pos: Vec3,
    pub radius: f64,
    pub flow: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SplitCandidate {
    /// Change in total cost if the subset is regrouped under a new node
    /// (negative = improvement).
    pub delta: f64,
    /// Relaxed position of the would-be new node.
    pub pos: Vec3,
}

/// Evaluates regrouping `subset` (indices into `children`) under a new
/// intermediate node: the new node starts at the centroid of the parent and
/// subset endpoints and is locally relaxed before costs are compared.
pub fn evaluate_split_subset(
    v_pos: Vec3,
    children: &[SplitChild],
    subset: &[usize],
    cfg: &GcoConfig,
) -> SplitCandidate {
    let sum_cubes: f64 = subset.iter().map(|&i| children[i].radius.powi(3)).sum();
    let new_radius = sum_cubes.cbrt();
    let new_flow: f64 = subset.iter().map(|&i| children[i].flow).sum();

    let mut anchors = Vec::with_capacity(subset.len() + 1);
    anchors.push(Anchor { pos: v_pos, coeff: edge_coefficient(new_radius, new_flow, cfg) });
    let mut centroid = v_pos;
    for &i in subset {
        let c = children[i];
        anchors.push(Anchor { pos: c.pos, coeff: edge_coefficient(c.radius, c.flow, cfg) });
        centroid += c.pos;
    }
    centroid = centroid / (subset.len() as f64 + 1.0);

    let res = optim::minimize(
        &anchors,
        centroid,
        cfg.min_edge_epsilon,
        cfg.relax_tolerance,
        cfg.relax_max_steps,
    );
    let baseline: f64 = subset
        .iter()
        .map(|&i| {
            let c = children[i];
            edge_coefficient(c.radius, c.flow, cfg) * v_pos.distance(c.pos)
        })
        .sum();
    SplitCandidate { delta: res.cost - baseline, pos: res.pos }
}

// ---------------------------------------------------------------------------
// Engine.
// ---------------------------------------------------------------------------

/// Optimization state: the evolving tree plus everything the passes need to
/// protect (prebuilt nodes, terminal identities and radii, subtree
/// assignment).
pub struct Gco {
    tree: VesselTree,
    config: GcoConfig,
    assignment: SubtreeAssignment,
    /// Flags indexed by node id; prebuilt ids never get reused.
    prebuilt: Vec<bool>,
    terminal_radii: BTreeMap<NodeId, f64>,
    pub trace: ConvergenceTrace,
    pub diagnostics: GcoDiagnostics,
}

/// Final result of a GCO run.
pub struct GcoOutput {
    pub tree: VesselTree,
    pub trace: ConvergenceTrace,
    pub assignment: SubtreeAssignment,
    pub diagnostics: GcoDiagnostics,
}

/// Error carrying the convergence trace accumulated before the failure.
#[derive(Debug)]
pub struct GcoError {
    pub source: Error,
    pub trace: ConvergenceTrace,
}

impl std::fmt::Display for GcoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.source)
    }
}

impl std::error::Error for GcoError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Connects every terminal to its nearest attachment node on the prebuilt
/// tree (ending nodes by default, every node with `attach_all_nodes`), then
/// propagates radii and flows. Ties go to the lower node id.
pub fn initialize(prebuilt: &VesselTree, terminals: &TerminalSet, config: &GcoConfig) -> Result<Gco> {
    config.validate()?;
    if terminals.is_empty() {
        return Err(Error::InvalidParameter("terminal set is empty".into()));
    }
    if terminals.positions.len() != terminals.radii.len() {
        return Err(Error::InvalidParameter("terminal positions and radii differ in length".into()));
    }
    if let Some(i) = terminals.radii.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter(format!("terminal {i} has non-positive radius")));
    }

    let mut tree = prebuilt.clone();
    let prebuilt_flags: Vec<bool> = (0..tree.node_capacity()).map(|i| tree.contains_node(i)).collect();

    let targets: Vec<NodeId> = if config.attach_all_nodes {
        tree.node_ids().collect()
    } else {
        tree.node_ids().filter(|&n| tree.is_leaf(n)).collect()
    };
    if targets.is_empty() {
        return Err(Error::NoAttachmentNodes);
    }

    let mut assignment = SubtreeAssignment::new();
    let mut terminal_radii = BTreeMap::new();
    for (pos, &radius) in terminals.positions.iter().zip(&terminals.radii) {
        let mut best = targets[0];
        let mut best_d2 = pos.distance_squared(tree.node(best).pos);
        for &t in &targets[1..] {
            let d2 = pos.distance_squared(tree.node(t).pos);
            if d2 < best_d2 {
                best = t;
                best_d2 = d2;
            }
        }
        let term = tree.add_node(*pos, true);
        tree.add_edge(best, term, radius, 0.0)?;
        assignment.insert(term, best);
        terminal_radii.insert(term, radius);
    }

    tree.propagate_radii_murray()?;
    tree.propagate_flows(config.inlet_flow_q0)?;

    Ok(Gco {
        tree,
        config: config.clone(),
        assignment,
        prebuilt: prebuilt_flags,
        terminal_radii,
        trace: Vec::new(),
        diagnostics: GcoDiagnostics::default(),
    })
}

/// True when `anc` lies on the path from `node` to the root (or equals it).
pub fn has_ancestor(tree: &VesselTree, node: NodeId, anc: NodeId) -> bool {
    let mut cur = Some(node);
    while let Some(n) = cur {
        if n == anc {
            return true;
        }
        cur = tree.parent_of(n);
    }
    false
}

impl Gco {
    pub fn tree(&self) -> &VesselTree {
        &self.tree
    }

    pub fn config(&self) -> &GcoConfig {
        &self.config
    }

    pub fn assignment(&self) -> &SubtreeAssignment {
        &self.assignment
    }

    pub fn is_prebuilt(&self, n: NodeId) -> bool {
        n < self.prebuilt.len() && self.prebuilt[n]
    }

    pub fn global_cost(&self) -> f64 {
        global_cost(&self.tree, &self.config)
    }

    fn record(&mut self, iteration: u32, phase: Phase) {
        self.trace.push(TraceRecord {
            iteration,
            phase,
            cost: self.global_cost(),
            nodes: self.tree.num_nodes(),
            edges: self.tree.num_edges(),
        });
    }

    fn relaxable(&self, n: NodeId) -> bool {
        self.tree.contains_node(n)
            && n != self.tree.root()
            && !self.tree.node(n).is_terminal
            && !self.is_prebuilt(n)
    }

    /// Relaxes every movable node once, in ascending id order. With
    /// `parallel_relax` the independent subtrees run on worker threads;
    /// the result is bit-identical because subtrees share no edges.
    pub fn relax_pass(&mut self) {
        let eligible: Vec<NodeId> = (0..self.tree.node_capacity()).filter(|&n| self.relaxable(n)).collect();
        if eligible.is_empty() {
            return;
        }
        if !self.config.parallel_relax {
            for v in eligible {
                match relax_node(&mut self.tree, v, &self.config) {
                    Ok(outcome) => {
                        if outcome.stalled {
                            self.diagnostics.relax_failures += 1;
                        }
                    }
                    Err(_) => self.diagnostics.relax_failures += 1,
                }
            }
            return;
        }

        // Group movable nodes by the prebuilt node at the top of their
        // generated chain; groups touch disjoint edge sets.
        let mut groups: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &v in &eligible {
            let mut owner = v;
            while !self.is_prebuilt(owner) {
                owner = self.tree.parent_of(owner).expect("non-root nodes have parents");
            }
            groups.entry(owner).or_default().push(v);
        }
        let group_list: Vec<Vec<NodeId>> = groups.into_values().collect();
        let tree = &self.tree;
        let cfg = &self.config;
        let results: Vec<Vec<(NodeId, Vec3, bool)>> = group_list
            .par_iter()
            .map(|nodes| {
                let mut overlay: BTreeMap<NodeId, Vec3> = BTreeMap::new();
                let mut out = Vec::with_capacity(nodes.len());
                for &v in nodes {
                    match incident_anchors(tree, v, cfg, Some(&overlay)) {
                        Ok(anchors) => {
                            let res = optim::minimize(
                                &anchors,
                                tree.node(v).pos,
                                cfg.min_edge_epsilon,
                                cfg.relax_tolerance,
                                cfg.relax_max_steps,
                            );
                            overlay.insert(v, res.pos);
                            out.push((v, res.pos, res.stalled));
                        }
                        Err(_) => out.push((v, tree.node(v).pos, true)),
                    }
                }
                out
            })
            .collect();
        for group in results {
            for (v, pos, stalled) in group {
                self.tree.node_mut(v).pos = pos;
                if stalled {
                    self.diagnostics.relax_failures += 1;
                }
            }
        }
    }

    /// Contracts degenerate edges: at any node whose shortest incident edge
    /// is much shorter than its second (or absolutely tiny), the shortest
    /// edge's child endpoint is absorbed into its parent endpoint.
    /// Prebuilt nodes and terminals are never deleted.
    pub fn merge_pass(&mut self) -> Result<()> {
        let mut merged_any = false;
        for v in 0..self.tree.node_capacity() {
            if !self.tree.contains_node(v) {
                continue;
            }
            let node = self.tree.node(v);
            let incident: Vec<EdgeId> =
                node.parent_edge.iter().chain(node.child_edges.iter()).copied().collect();
            if incident.is_empty() {
                continue;
            }
            let mut lengths: Vec<(f64, EdgeId)> =
                incident.iter().map(|&e| (self.tree.edge_length(e), e)).collect();
            lengths.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let (min_len, min_edge) = lengths[0];
            let ratio_trigger = lengths.len() >= 2 && {
                let second = lengths[1].0;
                second > 0.0 && min_len / second < self.config.merge_ratio_threshold
            };
            let abs_trigger = min_len < self.config.merge_abs_epsilon;
            if !(ratio_trigger || abs_trigger) {
                continue;
            }
            let absorbed = self.tree.edge(min_edge).child;
            if self.tree.node(absorbed).is_terminal || self.is_prebuilt(absorbed) {
                self.diagnostics.skipped_merges += 1;
                continue;
            }
            self.tree.contract_edge(min_edge)?;
            self.diagnostics.merges_applied += 1;
            merged_any = true;
        }
        if merged_any {
            self.tree.propagate_radii_murray()?;
            self.tree.propagate_flows(self.config.inlet_flow_q0)?;
        }
        Ok(())
    }

    /// Greedy split of one multifurcation: picks the child pair whose
    /// regrouping under a relaxed new node is cheapest, grows the subset
    /// while that improves, and applies the split only when it beats the
    /// unsplit cost. Returns whether a split happened.
    pub fn split_node(&mut self, v: NodeId) -> Result<bool> {
        let child_edges: Vec<EdgeId> = self.tree.node(v).child_edges.clone();
        if child_edges.len() < 3 {
            return Ok(false);
        }
        let v_pos = self.tree.node(v).pos;
        let children: Vec<SplitChild> = child_edges
            .iter()
            .map(|&e| {
                let edge = self.tree.edge(e);
                SplitChild { pos: self.tree.node(edge.child).pos, radius: edge.radius, flow: edge.flow }
            })
            .collect();
        let cfg = &self.config;

        // Best pair.
        let mut pairs = Vec::new();
        for i in 0..children.len() {
            for j in (i + 1)..children.len() {
                pairs.push([i, j]);
            }
        }
        let evaluated: Vec<SplitCandidate> = pairs
            .par_iter()
            .map(|p| evaluate_split_subset(v_pos, &children, p, cfg))
            .collect();
        let mut best_idx = 0;
        for (i, cand) in evaluated.iter().enumerate() {
            if cand.delta < evaluated[best_idx].delta {
                best_idx = i;
            }
        }
        let mut subset: Vec<usize> = pairs[best_idx].to_vec();
        let mut best = evaluated[best_idx];

        // Grow while adding a child lowers the delta.
        loop {
            let remaining: Vec<usize> =
                (0..children.len()).filter(|i| !subset.contains(i)).collect();
            if remaining.is_empty() {
                break;
            }
            let candidates: Vec<Vec<usize>> = remaining
                .iter()
                .map(|&k| {
                    let mut s = subset.clone();
                    s.push(k);
                    s.sort_unstable();
                    s
                })
                .collect();
            let evaluated: Vec<SplitCandidate> = candidates
                .par_iter()
                .map(|s| evaluate_split_subset(v_pos, &children, s, cfg))
                .collect();
            let mut arg = 0;
            for (i, cand) in evaluated.iter().enumerate() {
                if cand.delta < evaluated[arg].delta {
                    arg = i;
                }
            }
            if evaluated[arg].delta < best.delta {
                subset = candidates[arg].clone();
                best = evaluated[arg];
            } else {
                break;
            }
        }

        if !(best.delta < 0.0) {
            return Ok(false);
        }

        // Apply: new node takes the subset's edges; its own edge radius and
        // flow keep the cube-sum and flow-sum invariants intact by
        // construction, and a full re-propagation keeps everything canonical.
        let sum_cubes: f64 = subset.iter().map(|&i| children[i].radius.powi(3)).sum();
        let new_flow: f64 = subset.iter().map(|&i| children[i].flow).sum();
        let v_new = self.tree.add_node(best.pos, false);
        self.tree.add_edge(v, v_new, sum_cubes.cbrt(), new_flow)?;
        for &i in &subset {
            self.tree.reparent_edge(child_edges[i], v_new)?;
        }
        self.tree.propagate_radii_murray()?;
        self.tree.propagate_flows(self.config.inlet_flow_q0)?;
        self.diagnostics.splits_applied += 1;
        Ok(true)
    }

    /// Applies [`Gco::split_node`] to every node that had three or more
    /// children when the pass started; nodes created by this pass are
    /// visited on the next one.
    pub fn split_pass(&mut self) -> Result<()> {
        let cap = self.tree.node_capacity();
        for v in 0..cap {
            if self.tree.contains_node(v) && self.tree.node(v).child_edges.len() >= 3 {
                self.split_node(v)?;
            }
        }
        Ok(())
    }

    /// Removes generated edges whose Strahler order falls below
    /// `order_threshold` (prebuilt edges and the root's outgoing edges are
    /// exempt), re-attaches every orphaned terminal to the nearest surviving
    /// node inside its assigned subtree, deletes the dead branches and
    /// re-propagates radii and flows.
    pub fn prune_and_reconnect(&mut self, order_threshold: u32) -> Result<()> {
        let orders = self.tree.strahler_orders();
        let root = self.tree.root();
        let doomed: Vec<EdgeId> = self
            .tree
            .edge_ids()
            .filter(|&e| {
                let edge = self.tree.edge(e);
                let prebuilt_edge = self.is_prebuilt(edge.parent) && self.is_prebuilt(edge.child);
                let root_edge = edge.parent == root;
                !prebuilt_edge && !root_edge && orders[e].unwrap_or(0) < order_threshold
            })
            .collect();
        if doomed.is_empty() {
            return Ok(());
        }
        for e in doomed {
            self.tree.remove_edge(e);
        }

        // Survivors: still connected to the root.
        let mut surviving = vec![false; self.tree.node_capacity()];
        for n in self.tree.bfs_nodes() {
            surviving[n] = true;
        }

        // Re-attach orphaned terminals within their assigned subtree.
        let orphans: Vec<NodeId> = self
            .terminal_radii
            .keys()
            .copied()
            .filter(|&t| self.tree.contains_node(t) && !surviving[t])
            .collect();
        let mut candidate_cache: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for t in orphans {
            let anchor = self.assignment[&t];
            let candidates = candidate_cache.entry(anchor).or_insert_with(|| {
                self.tree
                    .subtree_nodes(anchor)
                    .into_iter()
                    .filter(|&n| surviving[n] && !self.tree.node(n).is_terminal)
                    .collect()
            });
            let t_pos = self.tree.node(t).pos;
            let mut best = anchor;
            let mut best_d2 = f64::INFINITY;
            for &c in candidates.iter() {
                let d2 = t_pos.distance_squared(self.tree.node(c).pos);
                if d2 < best_d2 || (d2 == best_d2 && c < best) {
                    best = c;
                    best_d2 = d2;
                }
            }
            if let Some(pe) = self.tree.node(t).parent_edge {
                self.tree.remove_edge(pe);
            }
            self.tree.add_edge(best, t, self.terminal_radii[&t], 0.0)?;
        }

        // Drop everything no longer reachable from the root.
        let mut reachable = vec![false; self.tree.node_capacity()];
        for n in self.tree.bfs_nodes() {
            reachable[n] = true;
        }
        let dead: Vec<NodeId> =
            (0..self.tree.node_capacity()).filter(|&n| self.tree.contains_node(n) && !reachable[n]).collect();
        for &n in &dead {
            for e in self.tree.node(n).child_edges.clone() {
                self.tree.remove_edge(e);
            }
        }
        for &n in &dead {
            if let Some(pe) = self.tree.node(n).parent_edge {
                self.tree.remove_edge(pe);
            }
            self.tree.remove_node(n);
        }

        // Cascade-delete surviving intermediates left childless.
        loop {
            let mut removed = false;
            for n in 0..self.tree.node_capacity() {
                if !self.tree.contains_node(n) || n == self.tree.root() {
                    continue;
                }
                let node = self.tree.node(n);
                if node.is_terminal || self.is_prebuilt(n) || !node.child_edges.is_empty() {
                    continue;
                }
                if let Some(pe) = node.parent_edge {
                    self.tree.remove_edge(pe);
                }
                self.tree.remove_node(n);
                removed = true;
            }
            if !removed {
                break;
            }
        }

        self.tree.propagate_radii_murray()?;
        self.tree.propagate_flows(self.config.inlet_flow_q0)?;
        Ok(())
    }

    fn relative_change(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(f64::MIN_POSITIVE)
    }

    /// Inner loop: relax, merge and split sweeps until the global cost stops
    /// improving (or the sweep cap is hit). Records one trace event per pass.
    fn inner_sweeps(&mut self, iteration: u32) -> Result<()> {
        let mut prev = self.global_cost();
        for _ in 0..self.config.inner_max_sweeps {
            self.relax_pass();
            self.record(iteration, Phase::Relax);
            self.merge_pass()?;
            self.record(iteration, Phase::Merge);
            self.split_pass()?;
            self.record(iteration, Phase::Split);
            let cost = self.global_cost();
            if Self::relative_change(prev, cost) < self.config.inner_tolerance {
                break;
            }
            prev = cost;
        }
        Ok(())
    }

    fn run_loop(&mut self) -> Result<()> {
        self.record(0, Phase::Init);
        if self.config.max_iterations == 0 {
            return Ok(());
        }
        let mut prev_prune_cost: Option<f64> = None;
        let mut last_iteration = 0;
        for iteration in 1..=self.config.max_iterations {
            last_iteration = iteration as u32;
            self.inner_sweeps(last_iteration)?;
            let idx = (iteration - 1).min(self.config.prune_order_schedule.len() - 1);
            let threshold = self.config.prune_order_schedule[idx];
            self.prune_and_reconnect(threshold)?;
            self.record(last_iteration, Phase::Prune);
            let cost = self.global_cost();
            if let Some(prev) = prev_prune_cost {
                if Self::relative_change(prev, cost) < self.config.inner_tolerance {
                    break;
                }
            }
            prev_prune_cost = Some(cost);
        }
        // Final optimization block so the returned tree is relaxed rather
        // than freshly pruned.
        self.inner_sweeps(last_iteration + 1)?;
        Ok(())
    }

    pub fn into_output(self) -> GcoOutput {
        GcoOutput {
            tree: self.tree,
            trace: self.trace,
            assignment: self.assignment,
            diagnostics: self.diagnostics,
        }
    }
}

/// Full optimization: initialize once, then iterate inner sweeps and pruning
/// until the post-prune cost settles or the iteration cap is reached. On
/// failure the trace accumulated so far rides along with the error.
pub fn run(
    prebuilt: &VesselTree,
    terminals: &TerminalSet,
    config: &GcoConfig,
) -> Result<GcoOutput, Box<GcoError>> {
    let mut gco = initialize(prebuilt, terminals, config)
        .map_err(|source| Box::new(GcoError { source, trace: Vec::new() }))?;
    match gco.run_loop() {
        Ok(()) => Ok(gco.into_output()),
        Err(source) => Err(Box::new(GcoError { source, trace: gco.trace })),
    }
}
