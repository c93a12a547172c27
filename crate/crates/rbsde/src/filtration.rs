//! Finite discrete-time filtered probability space as an event tree.
//!
//! Nodes are dense integer ids ordered by (level, id); every non-terminal
//! node branches with strictly positive probabilities that sum to one.
//! Stopping rules assign a decision per node; stopping systems may stop at
//! the plus slot of a level, plain rules only at instants. The terminal
//! time is an absorbing plain rule, by default the constant horizon.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::processes::{LatticeProcess, Phase, Slot};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub level: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Branch probabilities, one per child, renormalized to sum to one.
    pub probs: Vec<f64>,
    /// Index of this node among its siblings (0 at the root).
    pub branch: usize,
}

/// Per-node decision of a stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Decision {
    /// Stop at the instant slot of the node's level.
    Stop,
    /// Stop at the plus slot (systems only).
    StopPlus,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Plain,
    System,
}

/// Stopping rule on the tree: systems may collect at plus slots.
///
/// Decisions are canonical: every node weakly below a stopping node is
/// marked `Stop`, and terminal-frontier nodes always stop.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    decisions: Vec<Decision>,
    kind: RuleKind,
}

/// First-stop structure of a rule: for each node, whether the rule stops
/// there for the first time along its path, and whether the node is still
/// "live" (no strict predecessor has stopped).
#[derive(Debug, Clone)]
pub struct Frontier {
    pub stop_phase: Vec<Option<Phase>>,
    pub live: Vec<bool>,
}

impl StoppingRule {
    pub fn new(tree: &FilteredTree, mut decisions: Vec<Decision>, kind: RuleKind) -> Result<Self> {
        if decisions.len() != tree.node_count() {
            return Err(Error::InvalidRule(format!(
                "expected {} decisions, got {}",
                tree.node_count(),
                decisions.len()
            )));
        }
        // Canonicalize: force stops at the terminal frontier, mark everything
        // below a stop as stopped.
        let mut stopped_above = vec![false; decisions.len()];
        for node in tree.nodes_by_level() {
            let above = match tree.parent(node) {
                None => false,
                Some(p) => stopped_above[p] || tree.decision_stops(&decisions, p),
            };
            stopped_above[node] = above;
            if above {
                decisions[node] = Decision::Stop;
                continue;
            }
            if tree.forced_stop(node) && decisions[node] == Decision::Continue {
                return Err(Error::InvalidRule(format!(
                    "node {node} must stop: every path stops by the terminal time"
                )));
            }
            if decisions[node] == Decision::StopPlus {
                if kind == RuleKind::Plain {
                    return Err(Error::InvalidRule("plain rules cannot stop at a plus slot".into()));
                }
                if tree.forced_stop(node) {
                    return Err(Error::InvalidRule(format!(
                        "node {node} is at the terminal time: no plus slot there"
                    )));
                }
            }
        }
        Ok(StoppingRule { decisions, kind })
    }

    /// The rule that stops everywhere at the terminal time.
    pub fn at_terminal(tree: &FilteredTree, kind: RuleKind) -> Self {
        let decisions = (0..tree.node_count())
            .map(|v| if tree.forced_stop(v) { Decision::Stop } else { Decision::Continue })
            .collect();
        StoppingRule::new(tree, decisions, kind).expect("terminal rule is always valid")
    }

    /// The rule that stops immediately at the root.
    pub fn at_root(tree: &FilteredTree, kind: RuleKind) -> Self {
        let mut decisions = vec![Decision::Stop; tree.node_count()];
        decisions[tree.root()] = Decision::Stop;
        StoppingRule::new(tree, decisions, kind).expect("root rule is always valid")
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn decision(&self, node: NodeId) -> Decision {
        self.decisions[node]
    }

    pub fn frontier(&self, tree: &FilteredTree) -> Frontier {
        let n = tree.node_count();
        let mut stop_phase = vec![None; n];
        let mut live = vec![false; n];
        for node in tree.nodes_by_level() {
            let is_live = match tree.parent(node) {
                None => true,
                Some(p) => live[p] && stop_phase[p].is_none(),
            };
            live[node] = is_live;
            if is_live {
                stop_phase[node] = match self.decisions[node] {
                    Decision::Stop => Some(Phase::Instant),
                    Decision::StopPlus => Some(Phase::Plus),
                    Decision::Continue => None,
                };
            }
        }
        Frontier { stop_phase, live }
    }

    /// Stop slot on the path through `leaf`, as (node, slot).
    pub fn stop_on_path(&self, tree: &FilteredTree, leaf: NodeId) -> (NodeId, Slot) {
        for node in tree.path_from_root(leaf) {
            match self.decisions[node] {
                Decision::Stop => return (node, Slot::instant(tree.level(node))),
                Decision::StopPlus => return (node, Slot::plus(tree.level(node))),
                Decision::Continue => {}
            }
        }
        unreachable!("every path stops by the terminal time")
    }

    /// Pathwise comparison: self stops no later than `other` on every path.
    pub fn is_leq(&self, tree: &FilteredTree, other: &StoppingRule) -> bool {
        tree.leaves().all(|leaf| {
            let (_, a) = self.stop_on_path(tree, leaf);
            let (_, b) = other.stop_on_path(tree, leaf);
            a <= b
        })
    }

    /// Pathwise minimum of two rules (earlier stop slot wins).
    pub fn min(&self, tree: &FilteredTree, other: &StoppingRule) -> StoppingRule {
        let decisions = (0..tree.node_count())
            .map(|v| self.decisions[v].min(other.decisions[v]))
            .collect();
        let kind = if self.kind == RuleKind::Plain && other.kind == RuleKind::Plain {
            RuleKind::Plain
        } else {
            RuleKind::System
        };
        StoppingRule::new(tree, decisions, kind).expect("min of valid rules is valid")
    }

    /// Expectation of the stopped values `X_tau`.
    pub fn expect_stopped(&self, tree: &FilteredTree, x: &LatticeProcess) -> f64 {
        let front = self.frontier(tree);
        let mut total = 0.0;
        for node in 0..tree.node_count() {
            if let Some(phase) = front.stop_phase[node] {
                total += tree.path_probability(node) * x.get(tree, node, phase);
            }
        }
        total
    }
}

/// Increasing sequence of plain stopping rules ending at the terminal time.
#[derive(Debug, Clone)]
pub struct Chain {
    pub rules: Vec<StoppingRule>,
}

impl Chain {
    pub fn new(tree: &FilteredTree, rules: Vec<StoppingRule>) -> Result<Self> {
        for w in rules.windows(2) {
            if !w[0].is_leq(tree, &w[1]) {
                return Err(Error::InvalidRule("chain rules must be increasing".into()));
            }
        }
        match rules.last() {
            Some(last) if *last == StoppingRule::at_terminal(tree, RuleKind::Plain) => {}
            _ => return Err(Error::InvalidRule("chain must reach the terminal time".into())),
        }
        Ok(Chain { rules })
    }
}

#[derive(Debug, Clone)]
pub struct FilteredTree {
    nodes: Vec<Node>,
    horizon: usize,
    step: f64,
    /// Nodes where the terminal time stops (pathwise first hit wins).
    terminal_stop: Vec<bool>,
    /// Live region: no strict ancestor is a terminal stop.
    active: Vec<bool>,
    /// Probability of reaching each node from the root.
    path_prob: Vec<f64>,
    up_count: Vec<usize>,
}

impl FilteredTree {
    /// Builds a tree from explicit nodes. Ids must be dense and ordered by
    /// (level, id); probabilities are checked to sum to one within 1e-12
    /// per node and then renormalized exactly.
    pub fn from_nodes(mut nodes: Vec<Node>, step: f64, horizon: usize) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::InvalidTree("horizon must be at least 1".into()));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidTree("step must be positive".into()));
        }
        nodes.sort_by_key(|n| (n.level, n.id));
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidTree(format!(
                    "node ids must be dense integers in (level, id) order; found {} at position {i}",
                    n.id
                )));
            }
        }
        if nodes.is_empty() || nodes[0].level != 0 || nodes.iter().filter(|n| n.level == 0).count() != 1 {
            return Err(Error::InvalidTree("exactly one root at level 0".into()));
        }
        for n in &nodes {
            if n.level > horizon {
                return Err(Error::InvalidTree(format!("node {} beyond horizon", n.id)));
            }
            if n.level < horizon && n.children.is_empty() {
                return Err(Error::InvalidTree(format!("node {} at level {} has no child", n.id, n.level)));
            }
            if n.level == horizon && !n.children.is_empty() {
                return Err(Error::InvalidTree(format!("terminal node {} has children", n.id)));
            }
            if n.children.len() != n.probs.len() {
                return Err(Error::InvalidTree(format!("node {}: children/probs length mismatch", n.id)));
            }
            let sum: f64 = n.probs.iter().sum();
            if n.probs.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::InvalidTree(format!("node {}: branch probabilities must be positive", n.id)));
            }
            if !n.children.is_empty() && (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidTree(format!("node {}: probabilities sum to {sum}", n.id)));
            }
        }
        // Renormalize and wire parent/child consistency.
        let ids: Vec<Vec<NodeId>> = nodes.iter().map(|n| n.children.clone()).collect();
        for (v, kids) in ids.iter().enumerate() {
            let sum: f64 = nodes[v].probs.iter().sum();
            for p in nodes[v].probs.iter_mut() {
                *p /= sum;
            }
            for (i, &w) in kids.iter().enumerate() {
                if w >= nodes.len() || nodes[w].level != nodes[v].level + 1 {
                    return Err(Error::InvalidTree(format!("node {v}: child {w} not at next level")));
                }
                nodes[w].parent = Some(v);
                nodes[w].branch = i;
            }
        }
        for n in &nodes {
            if n.level > 0 && n.parent.is_none() {
                return Err(Error::InvalidTree(format!("node {} has no parent", n.id)));
            }
        }
        let mut tree = FilteredTree {
            terminal_stop: nodes.iter().map(|n| n.level == horizon).collect(),
            active: vec![true; nodes.len()],
            path_prob: vec![0.0; nodes.len()],
            up_count: vec![0; nodes.len()],
            nodes,
            horizon,
            step,
        };
        tree.recompute_derived();
        Ok(tree)
    }

    /// Full binary history tree of the binomial model: child 0 moves down
    /// with probability `1 - up_prob`, child 1 moves up with `up_prob`.
    pub fn binomial(periods: usize, step: f64, up_prob: f64) -> Self {
        assert!(periods >= 1 && (0.0..1.0).contains(&(1.0 - up_prob)) && up_prob > 0.0 && up_prob < 1.0);
        let mut nodes = Vec::new();
        nodes.push(Node { id: 0, level: 0, parent: None, children: vec![], probs: vec![], branch: 0 });
        let mut frontier = vec![0usize];
        for level in 1..=periods {
            let mut next = Vec::new();
            for &v in &frontier {
                for branch in 0..2usize {
                    let id = nodes.len();
                    nodes.push(Node { id, level, parent: Some(v), children: vec![], probs: vec![], branch });
                    nodes[v].children.push(id);
                    nodes[v].probs.push(if branch == 0 { 1.0 - up_prob } else { up_prob });
                    next.push(id);
                }
            }
            frontier = next;
        }
        FilteredTree::from_nodes(nodes, step, periods).expect("binomial construction is valid")
    }

    /// Single-branch chain (deterministic path), useful for tests.
    pub fn chain(periods: usize, step: f64) -> Self {
        let mut nodes = Vec::new();
        for level in 0..=periods {
            nodes.push(Node {
                id: level,
                level,
                parent: (level > 0).then(|| level - 1),
                children: if level < periods { vec![level + 1] } else { vec![] },
                probs: if level < periods { vec![1.0] } else { vec![] },
                branch: 0,
            });
        }
        FilteredTree::from_nodes(nodes, step, periods).expect("chain construction is valid")
    }

    /// Installs a plain absorbing terminal time. Processes and generators
    /// are frozen strictly after it.
    pub fn with_terminal(mut self, rule: &StoppingRule) -> Result<Self> {
        if rule.kind() != RuleKind::Plain {
            return Err(Error::InvalidRule("terminal time must be a plain rule".into()));
        }
        let front = rule.frontier(&self);
        self.terminal_stop = front.stop_phase.iter().map(|p| p.is_some()).collect();
        self.recompute_derived();
        Ok(self)
    }

    fn recompute_derived(&mut self) {
        let order: Vec<NodeId> = self.nodes_by_level().collect();
        for &v in &order {
            let (prob, ups, live) = match self.nodes[v].parent {
                None => (1.0, 0, true),
                Some(p) => (
                    self.path_prob[p] * self.nodes[p].probs[self.nodes[v].branch],
                    self.up_count[p] + self.nodes[v].branch,
                    self.active[p] && !self.terminal_stop[p],
                ),
            };
            self.path_prob[v] = prob;
            self.up_count[v] = ups;
            self.active[v] = live;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn level(&self, node: NodeId) -> usize {
        self.nodes[node].level
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.step
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node].parent
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.nodes[node].children
    }

    pub fn branch_probability(&self, node: NodeId, branch: usize) -> f64 {
        self.nodes[node].probs[branch]
    }

    pub fn path_probability(&self, node: NodeId) -> f64 {
        self.path_prob[node]
    }

    pub fn up_count(&self, node: NodeId) -> usize {
        self.up_count[node]
    }

    /// Number of up-moves along the path, for recombining labels.
    pub fn is_active(&self, node: NodeId) -> bool {
        self.active[node]
    }

    pub fn terminal_stops_at(&self, node: NodeId) -> bool {
        self.active[node] && self.terminal_stop[node]
    }

    /// Whether a rule is forced to stop here (terminal time reached).
    pub fn forced_stop(&self, node: NodeId) -> bool {
        !self.active[node] || self.terminal_stop[node]
    }

    fn decision_stops(&self, decisions: &[Decision], node: NodeId) -> bool {
        decisions[node] != Decision::Continue
    }

    /// Nodes in (level, id) order; node ids are already sorted this way.
    pub fn nodes_by_level(&self) -> impl Iterator<Item = NodeId> + '_ {
        0..self.nodes.len()
    }

    /// Active nodes at a given level.
    pub fn level_nodes(&self, level: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(move |n| n.level == level && self.active[n.id])
            .map(|n| n.id)
    }

    /// Nodes without children (level == horizon).
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.children.is_empty()).map(|n| n.id)
    }

    /// Terminal frontier: nodes where the terminal time stops.
    pub fn terminal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(move |&v| self.terminal_stops_at(v))
    }

    pub fn path_from_root(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut v = node;
        while let Some(p) = self.nodes[v].parent {
            path.push(p);
            v = p;
        }
        path.reverse();
        path
    }

    /// Expectation of instant values on the terminal frontier.
    pub fn expect_terminal(&self, values: &BTreeMap<NodeId, f64>) -> Result<f64> {
        let mut total = 0.0;
        for v in self.terminal_nodes() {
            let x = values
                .get(&v)
                .ok_or(Error::IncompleteSection { node: v, level: self.level(v) })?;
            total += self.path_prob[v] * x;
        }
        Ok(total)
    }

    pub fn terminal_frontier_rule(&self) -> StoppingRule {
        StoppingRule::at_terminal(self, RuleKind::Plain)
    }
}

/// One-step conditional expectation: per level-`at` node, the probability-
/// weighted sum of its children's values, in child-id order.
pub fn cond_expect(
    tree: &FilteredTree,
    values: &BTreeMap<NodeId, f64>,
    at: usize,
) -> Result<BTreeMap<NodeId, f64>> {
    let mut out = BTreeMap::new();
    for v in tree.level_nodes(at) {
        if tree.terminal_stops_at(v) {
            continue;
        }
        let mut acc = 0.0;
        for (i, &w) in tree.children(v).iter().enumerate() {
            let x = values
                .get(&w)
                .ok_or(Error::IncompleteSection { node: w, level: at + 1 })?;
            acc += tree.branch_probability(v, i) * x;
        }
        out.insert(v, acc);
    }
    Ok(out)
}

/// Class (D) norm: sup over plain stopping rules of E|X_tau|, computed as
/// the root value of the Snell envelope of |X| restricted to instants.
pub fn class_d_norm(tree: &FilteredTree, x: &LatticeProcess) -> f64 {
    let mut value = vec![0.0; tree.node_count()];
    for node in (0..tree.node_count()).rev() {
        if !tree.is_active(node) {
            continue;
        }
        let own = x.get(tree, node, Phase::Instant).abs();
        value[node] = if tree.terminal_stops_at(node) {
            own
        } else {
            let mut cont = 0.0;
            for (i, &w) in tree.children(node).iter().enumerate() {
                cont += tree.branch_probability(node, i) * value[w];
            }
            own.max(cont)
        };
    }
    value[tree.root()]
}

/// Norm over stopping systems: sup over all-slot rules of E|X_rho|. This is
/// the grid realization of the class (D) norm of the continuous-time model,
/// where stopping times can sample values just after an instant.
pub fn optional_norm(tree: &FilteredTree, x: &LatticeProcess) -> f64 {
    let mut value = vec![0.0; tree.node_count()];
    for node in (0..tree.node_count()).rev() {
        if !tree.is_active(node) {
            continue;
        }
        let own = x.get(tree, node, Phase::Instant).abs();
        value[node] = if tree.terminal_stops_at(node) {
            own
        } else {
            let mut cont = 0.0;
            for (i, &w) in tree.children(node).iter().enumerate() {
                cont += tree.branch_probability(node, i) * value[w];
            }
            own.max(x.get(tree, node, Phase::Plus).abs().max(cont))
        };
    }
    value[tree.root()]
}

/// Builds the chain `tau_k = min(T, first level with accumulated load >=
/// threshold_k)`. Load accrues along branches with weight `h`: the value
/// read at a node is charged for the interval leading into it.
pub fn build_chain(tree: &FilteredTree, thresholds: &[f64], load: &LatticeProcess) -> Result<Chain> {
    for (i, w) in thresholds.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::NonMonotoneThresholds { index: i + 1 });
        }
    }
    for node in 0..tree.node_count() {
        if load.get(tree, node, Phase::Instant) < 0.0 {
            return Err(Error::InvalidRule(format!("load must be nonnegative, node {node}")));
        }
    }
    let mut accumulated = vec![0.0; tree.node_count()];
    for node in tree.nodes_by_level() {
        if let Some(p) = tree.parent(node) {
            accumulated[node] = accumulated[p] + tree.step() * load.get(tree, node, Phase::Instant);
        }
    }
    let mut rules = Vec::with_capacity(thresholds.len() + 1);
    for &thr in thresholds {
        let decisions = (0..tree.node_count())
            .map(|v| {
                if tree.forced_stop(v) || accumulated[v] >= thr {
                    Decision::Stop
                } else {
                    Decision::Continue
                }
            })
            .collect();
        rules.push(StoppingRule::new(tree, decisions, RuleKind::Plain)?);
    }
    let terminal = StoppingRule::at_terminal(tree, RuleKind::Plain);
    if rules.last() != Some(&terminal) {
        rules.push(terminal);
    }
    Chain::new(tree, rules)
}

/// Number of stopping rules of the given kind, by the product recursion
/// over subtrees.
pub fn count_stopping_rules(tree: &FilteredTree, kind: RuleKind) -> u128 {
    fn count(tree: &FilteredTree, kind: RuleKind, node: NodeId) -> u128 {
        if tree.forced_stop(node) {
            return 1;
        }
        let own = match kind {
            RuleKind::Plain => 1u128,
            RuleKind::System => 2,
        };
        let product: u128 = tree
            .children(node)
            .iter()
            .map(|&w| count(tree, kind, w))
            .product();
        own.saturating_add(product)
    }
    count(tree, kind, tree.root())
}

/// Visits every stopping rule of the given kind in canonical order:
/// at each live node, stop-at-t first, then stop-at-t-plus (systems),
/// then continue with children combinations cycling deepest-last.
pub fn for_each_stopping_rule(
    tree: &FilteredTree,
    kind: RuleKind,
    budget: u128,
    mut visit: impl FnMut(&StoppingRule),
) -> Result<()> {
    let total = count_stopping_rules(tree, kind);
    if total > budget {
        return Err(Error::OracleSizeLimit { required: total, budget });
    }
    let mut decisions = vec![Decision::Stop; tree.node_count()];
    fn descend(
        tree: &FilteredTree,
        kind: RuleKind,
        live: &[NodeId],
        decisions: &mut Vec<Decision>,
        visit: &mut impl FnMut(&StoppingRule, &FilteredTree),
    ) {
        // Enumerate decision combinations on the live frontier by recursing
        // over it one node at a time.
        fn inner(
            tree: &FilteredTree,
            kind: RuleKind,
            live: &[NodeId],
            at: usize,
            decisions: &mut Vec<Decision>,
            next_live: &mut Vec<NodeId>,
            visit: &mut impl FnMut(&StoppingRule, &FilteredTree),
        ) {
            if at == live.len() {
                if next_live.is_empty() {
                    let rule = StoppingRule {
                        decisions: decisions.clone(),
                        kind,
                    };
                    visit(&rule, tree);
                } else {
                    let deeper = std::mem::take(next_live);
                    descend(tree, kind, &deeper, decisions, visit);
                    *next_live = deeper;
                }
                return;
            }
            let v = live[at];
            if tree.forced_stop(v) {
                decisions[v] = Decision::Stop;
                inner(tree, kind, live, at + 1, decisions, next_live, visit);
                return;
            }
            let options: &[Decision] = match kind {
                RuleKind::Plain => &[Decision::Stop, Decision::Continue],
                RuleKind::System => &[Decision::Stop, Decision::StopPlus, Decision::Continue],
            };
            for &d in options {
                decisions[v] = d;
                if d == Decision::Continue {
                    let mark = next_live.len();
                    next_live.extend_from_slice(tree.children(v));
                    inner(tree, kind, live, at + 1, decisions, next_live, visit);
                    next_live.truncate(mark);
                    // Canonical form for the next combination.
                    for &w in tree.children(v) {
                        reset_subtree(tree, w, decisions);
                    }
                    decisions[v] = Decision::Stop;
                } else {
                    inner(tree, kind, live, at + 1, decisions, next_live, visit);
                }
            }
        }
        fn reset_subtree(tree: &FilteredTree, node: NodeId, decisions: &mut [Decision]) {
            decisions[node] = Decision::Stop;
            for &w in tree.children(node) {
                reset_subtree(tree, w, decisions);
            }
        }
        let mut next_live = Vec::new();
        inner(tree, kind, live, 0, decisions, &mut next_live, visit);
    }
    descend(tree, kind, &[tree.root()], &mut decisions, &mut |rule, _| visit(rule));
    Ok(())
}

/// Exhaustive duplicate-free enumeration, collected. Fails fast when the
/// closed-form count exceeds the budget.
pub fn enumerate_stopping_rules(
    tree: &FilteredTree,
    kind: RuleKind,
    budget: u128,
) -> Result<Vec<StoppingRule>> {
    let mut rules = Vec::new();
    for_each_stopping_rule(tree, kind, budget, |r| rules.push(r.clone()))?;
    Ok(rules)
}
