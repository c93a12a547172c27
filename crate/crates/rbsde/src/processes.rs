//! Regulated (làdlàg) processes on the doubled time grid.
//!
//! Each time level `t < N` carries two slots: the instant `t` and the right
//! limit `t+`. The terminal level has no plus slot. A [`LatticeProcess`]
//! stores one value per node and slot; adaptedness holds by construction
//! since values are attached to event-tree nodes.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::filtration::{FilteredTree, NodeId};

/// Phase of a slot: the instant `t` or its right limit `t+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Instant,
    Plus,
}

/// A point on the doubled time grid, ordered `0 < 0+ < 1 < 1+ < ... < N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub level: usize,
    pub phase: Phase,
}

impl Slot {
    pub fn instant(level: usize) -> Self {
        Slot { level, phase: Phase::Instant }
    }

    pub fn plus(level: usize) -> Self {
        Slot { level, phase: Phase::Plus }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase {
            Phase::Instant => write!(f, "{}", self.level),
            Phase::Plus => write!(f, "{}+", self.level),
        }
    }
}

/// Real-valued process indexed by (node, slot).
///
/// The slot level always equals the node level, so a process is stored as
/// two values per node (instant and plus). The plus value of a terminal
/// node is kept equal to its instant value and is never emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeProcess {
    values: Vec<f64>,
}

impl LatticeProcess {
    pub fn constant(tree: &FilteredTree, c: f64) -> Self {
        LatticeProcess { values: vec![c; 2 * tree.node_count()] }
    }

    /// Builds a process from per-node instant values, copying each instant
    /// value to the node's plus slot (right-continuous extension).
    pub fn from_instants(tree: &FilteredTree, instants: &[f64]) -> Self {
        assert_eq!(instants.len(), tree.node_count());
        let mut values = Vec::with_capacity(2 * instants.len());
        for &v in instants {
            values.push(v);
            values.push(v);
        }
        LatticeProcess { values }
    }

    pub fn get(&self, tree: &FilteredTree, node: NodeId, phase: Phase) -> f64 {
        self.values[self.index(tree, node, phase)]
    }

    pub fn set(&mut self, tree: &FilteredTree, node: NodeId, phase: Phase, v: f64) {
        let i = self.index(tree, node, phase);
        self.values[i] = v;
        if phase == Phase::Instant && tree.level(node) == tree.horizon() {
            self.values[i + 1] = v;
        }
    }

    fn index(&self, tree: &FilteredTree, node: NodeId, phase: Phase) -> usize {
        if phase == Phase::Plus {
            debug_assert!(tree.level(node) < tree.horizon(), "terminal level has no plus slot");
        }
        2 * node + (phase == Phase::Plus) as usize
    }

    pub fn at(&self, tree: &FilteredTree, node: NodeId, slot: Slot) -> f64 {
        debug_assert_eq!(tree.level(node), slot.level);
        self.get(tree, node, slot.phase)
    }

    /// Largest |value - other| over the slots of the tree.
    pub fn sup_distance(&self, tree: &FilteredTree, other: &LatticeProcess) -> f64 {
        let mut worst = 0.0f64;
        for node in 0..tree.node_count() {
            worst = worst.max((self.get(tree, node, Phase::Instant) - other.get(tree, node, Phase::Instant)).abs());
            if tree.level(node) < tree.horizon() {
                worst = worst.max((self.get(tree, node, Phase::Plus) - other.get(tree, node, Phase::Plus)).abs());
            }
        }
        worst
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatticeProcess {
        LatticeProcess { values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &LatticeProcess, f: impl Fn(f64, f64) -> f64) -> LatticeProcess {
        assert_eq!(self.values.len(), other.values.len());
        LatticeProcess {
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// True if self <= other + tol at every slot.
    pub fn dominated_by(&self, tree: &FilteredTree, other: &LatticeProcess, tol: f64) -> bool {
        for node in 0..tree.node_count() {
            if self.get(tree, node, Phase::Instant) > other.get(tree, node, Phase::Instant) + tol {
                return false;
            }
            if tree.level(node) < tree.horizon()
                && self.get(tree, node, Phase::Plus) > other.get(tree, node, Phase::Plus) + tol
            {
                return false;
            }
        }
        true
    }
}

/// Adapted finite-variation process with derived jump channels.
///
/// The base process `K` starts at zero. Its increments split into the
/// cadlag jump into level `t`, `dK*_t = K_t - K_(t-1)+`, and the right
/// jump `d+K_t = K_t+ - K_t`. Predictability of the cadlag channel means
/// `dK*` agrees across siblings of the same parent.
#[derive(Debug, Clone)]
pub struct FvProcess {
    pub base: LatticeProcess,
}

impl FvProcess {
    pub fn zero(tree: &FilteredTree) -> Self {
        FvProcess { base: LatticeProcess::constant(tree, 0.0) }
    }

    pub fn from_base(tree: &FilteredTree, base: LatticeProcess) -> Result<Self> {
        let v0 = base.get(tree, tree.root(), Phase::Instant);
        if v0 != 0.0 {
            return Err(Error::InvalidTree(format!("finite-variation process must start at 0, got {v0}")));
        }
        Ok(FvProcess { base })
    }

    /// Builds the process by accumulating the given jump channels along paths.
    pub fn from_jumps(tree: &FilteredTree, cadlag: &[f64], right: &[f64]) -> Self {
        assert_eq!(cadlag.len(), tree.node_count());
        assert_eq!(right.len(), tree.node_count());
        let mut base = LatticeProcess::constant(tree, 0.0);
        for node in tree.nodes_by_level() {
            let at = match tree.parent(node) {
                // cadlag[root] is ignored: K_0 = 0 by definition.
                None => 0.0,
                Some(p) => base.get(tree, p, Phase::Plus) + cadlag[node],
            };
            base.set(tree, node, Phase::Instant, at);
            if tree.level(node) < tree.horizon() {
                base.set(tree, node, Phase::Plus, at + right[node]);
            }
        }
        FvProcess { base }
    }

    /// Cadlag jump into `node`: `K(node) - K(parent, plus)`. Zero at the root.
    pub fn cadlag_jump(&self, tree: &FilteredTree, node: NodeId) -> f64 {
        match tree.parent(node) {
            None => 0.0,
            Some(p) => self.base.get(tree, node, Phase::Instant) - self.base.get(tree, p, Phase::Plus),
        }
    }

    /// Right jump at `node`: `K(node, plus) - K(node)`. Zero at the horizon.
    pub fn right_jump(&self, tree: &FilteredTree, node: NodeId) -> f64 {
        if tree.level(node) == tree.horizon() {
            0.0
        } else {
            self.base.get(tree, node, Phase::Plus) - self.base.get(tree, node, Phase::Instant)
        }
    }

    /// Expected total variation: E sum |dK*| + |d+K| along paths.
    pub fn expected_variation(&self, tree: &FilteredTree) -> f64 {
        let mut acc = vec![0.0; tree.node_count()];
        for node in tree.nodes_by_level() {
            let from_parent = match tree.parent(node) {
                None => 0.0,
                Some(p) => acc[p],
            };
            acc[node] = from_parent + self.cadlag_jump(tree, node).abs() + self.right_jump(tree, node).abs();
        }
        tree.leaves().map(|v| tree.path_probability(v) * acc[v]).sum()
    }

    /// Checks that every cadlag jump agrees across siblings within `tol`.
    pub fn is_predictable(&self, tree: &FilteredTree, tol: f64) -> bool {
        for node in 0..tree.node_count() {
            let kids = tree.children(node);
            if kids.len() > 1 {
                let first = self.cadlag_jump(tree, kids[0]);
                for &w in &kids[1..] {
                    if (self.cadlag_jump(tree, w) - first).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_increasing(&self, tree: &FilteredTree, tol: f64) -> bool {
        (1..tree.node_count()).all(|v| self.cadlag_jump(tree, v) >= -tol)
            && (0..tree.node_count()).all(|v| self.right_jump(tree, v) >= -tol)
    }
}

/// Jordan decomposition `K = K+ - K-` with per-channel minimality: at each
/// slot increment only one of the two parts moves.
pub fn jordan(tree: &FilteredTree, k: &FvProcess) -> (FvProcess, FvProcess) {
    let n = tree.node_count();
    let mut cad_p = vec![0.0; n];
    let mut cad_m = vec![0.0; n];
    let mut right_p = vec![0.0; n];
    let mut right_m = vec![0.0; n];
    for node in 0..n {
        let c = k.cadlag_jump(tree, node);
        cad_p[node] = c.max(0.0);
        cad_m[node] = (-c).max(0.0);
        let r = k.right_jump(tree, node);
        right_p[node] = r.max(0.0);
        right_m[node] = (-r).max(0.0);
    }
    (
        FvProcess::from_jumps(tree, &cad_p, &right_p),
        FvProcess::from_jumps(tree, &cad_m, &right_m),
    )
}

/// Martingale component: starts at zero and carries no right jumps.
#[derive(Debug, Clone)]
pub struct MartingalePart {
    pub base: LatticeProcess,
}

impl MartingalePart {
    pub fn zero(tree: &FilteredTree) -> Self {
        MartingalePart { base: LatticeProcess::constant(tree, 0.0) }
    }

    /// Builds the martingale from per-node increments `dM_t` (zero-mean
    /// across siblings); the plus slot copies the instant value.
    pub fn from_increments(tree: &FilteredTree, increments: &[f64]) -> Self {
        assert_eq!(increments.len(), tree.node_count());
        let mut base = LatticeProcess::constant(tree, 0.0);
        for node in tree.nodes_by_level() {
            let at = match tree.parent(node) {
                None => 0.0,
                Some(p) => base.get(tree, p, Phase::Instant) + increments[node],
            };
            base.set(tree, node, Phase::Instant, at);
            if tree.level(node) < tree.horizon() {
                base.set(tree, node, Phase::Plus, at);
            }
        }
        MartingalePart { base }
    }

    /// Worst |E(M_{t+1} | F_t) - M_t| over nodes, plus the largest right jump.
    pub fn martingale_defect(&self, tree: &FilteredTree) -> f64 {
        let mut worst = 0.0f64;
        for node in 0..tree.node_count() {
            if tree.level(node) < tree.horizon() {
                worst = worst.max(
                    (self.base.get(tree, node, Phase::Plus) - self.base.get(tree, node, Phase::Instant)).abs(),
                );
            }
            let kids = tree.children(node);
            if !kids.is_empty() {
                let mut cond = 0.0;
                for (i, &w) in kids.iter().enumerate() {
                    cond += tree.branch_probability(node, i) * self.base.get(tree, w, Phase::Instant);
                }
                worst = worst.max((cond - self.base.get(tree, node, Phase::Instant)).abs());
            }
        }
        worst
    }
}

/// Result of a supermartingale membership test.
#[derive(Debug, Clone)]
pub struct SupermartingaleCheck {
    pub ok: bool,
    /// Largest violation found (0 when `ok`).
    pub worst: f64,
    pub node: NodeId,
    pub slot: Slot,
}

/// Tests `X_t >= X_t+ >= E(X_{t+1} | F_t)` at every node, tolerance 1e-10.
pub fn check_supermartingale(tree: &FilteredTree, x: &LatticeProcess) -> SupermartingaleCheck {
    let tol = 1e-10;
    let mut check = SupermartingaleCheck { ok: true, worst: 0.0, node: 0, slot: Slot::instant(0) };
    let mut record = |violation: f64, node: NodeId, slot: Slot| {
        if violation > check.worst {
            check.worst = violation;
            check.node = node;
            check.slot = slot;
        }
        if violation > tol {
            check.ok = false;
        }
    };
    for node in 0..tree.node_count() {
        let level = tree.level(node);
        if level == tree.horizon() || !tree.is_active(node) {
            continue;
        }
        let at = x.get(tree, node, Phase::Instant);
        let plus = x.get(tree, node, Phase::Plus);
        record(plus - at, node, Slot::instant(level));
        if tree.terminal_stops_at(node) {
            continue;
        }
        let kids = tree.children(node);
        let mut cond = 0.0;
        for (i, &w) in kids.iter().enumerate() {
            cond += tree.branch_probability(node, i) * x.get(tree, w, Phase::Instant);
        }
        record(cond - plus, node, Slot::plus(level));
    }
    check
}

/// Mertens decomposition of a supermartingale: `X = X_0 + M - K` with `M`
/// a martingale and `K` increasing, predictable, starting at zero.
///
/// `d+K_t = X_t - X_t+` and `dK*_{t+1} = X_t+ - E(X_{t+1} | F_t)`, both
/// measurable at `t`, so `K` is predictable by construction.
pub fn mertens_decompose(tree: &FilteredTree, x: &LatticeProcess) -> Result<(MartingalePart, FvProcess)> {
    let check = check_supermartingale(tree, x);
    if !check.ok {
        return Err(Error::NotSupermartingale {
            node: check.node,
            slot: check.slot,
            violation: check.worst,
        });
    }
    let n = tree.node_count();
    let mut cadlag = vec![0.0; n];
    let mut right = vec![0.0; n];
    let mut m_inc = vec![0.0; n];
    for node in 0..n {
        if tree.level(node) == tree.horizon() || !tree.is_active(node) || tree.terminal_stops_at(node) {
            continue;
        }
        let plus = x.get(tree, node, Phase::Plus);
        right[node] = x.get(tree, node, Phase::Instant) - plus;
        let kids = tree.children(node);
        let mut cond = 0.0;
        for (i, &w) in kids.iter().enumerate() {
            cond += tree.branch_probability(node, i) * x.get(tree, w, Phase::Instant);
        }
        for &w in kids {
            cadlag[w] = plus - cond;
            m_inc[w] = x.get(tree, w, Phase::Instant) - cond;
        }
    }
    Ok((
        MartingalePart::from_increments(tree, &m_inc),
        FvProcess::from_jumps(tree, &cadlag, &right),
    ))
}

/// Left and right limit processes on the grid.
///
/// The left limit at `t` reads the parent's plus slot; the right limit at
/// `t` reads the own plus slot. Both coincide with `X` on plus slots, and
/// the conventions at the boundary are `leftX_0 = X_0`, `rightX_N = X_N`.
pub fn left_right_limits(tree: &FilteredTree, x: &LatticeProcess) -> (LatticeProcess, LatticeProcess) {
    let mut left = x.clone();
    let mut right = x.clone();
    for node in 0..tree.node_count() {
        let level = tree.level(node);
        if let Some(p) = tree.parent(node) {
            left.set(tree, node, Phase::Instant, x.get(tree, p, Phase::Plus));
        }
        if level < tree.horizon() {
            right.set(tree, node, Phase::Instant, x.get(tree, node, Phase::Plus));
        }
    }
    (left, right)
}

/// Writes `node_id,slot,value` rows in (level, id) order. Plus slots of
/// terminal nodes are skipped. Values use the shortest representation that
/// parses back to the same bits.
pub fn write_csv(tree: &FilteredTree, x: &LatticeProcess, out: &mut impl Write) -> Result<()> {
    writeln!(out, "node_id,slot,value")?;
    for node in tree.nodes_by_level() {
        let level = tree.level(node);
        writeln!(out, "{},{},{}", node, Slot::instant(level), x.get(tree, node, Phase::Instant))?;
        if level < tree.horizon() {
            writeln!(out, "{},{},{}", node, Slot::plus(level), x.get(tree, node, Phase::Plus))?;
        }
    }
    Ok(())
}

/// Parses the output of [`write_csv`] back into a process.
pub fn read_csv(tree: &FilteredTree, input: &mut impl BufRead) -> Result<LatticeProcess> {
    let mut x = LatticeProcess::constant(tree, 0.0);
    let mut seen = vec![false; 2 * tree.node_count()];
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "node_id,slot,value" {
                return Err(Error::Csv(format!("unexpected header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let node: NodeId = parts
            .next()
            .ok_or_else(|| Error::Csv(format!("line {lineno}: missing node_id")))?
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("line {lineno}: bad node_id: {e}")))?;
        if node >= tree.node_count() {
            return Err(Error::Csv(format!("line {lineno}: node {node} not in tree")));
        }
        let slot_txt = parts
            .next()
            .ok_or_else(|| Error::Csv(format!("line {lineno}: missing slot")))?
            .trim();
        let (level_txt, phase) = match slot_txt.strip_suffix('+') {
            Some(rest) => (rest, Phase::Plus),
            None => (slot_txt, Phase::Instant),
        };
        let level: usize = level_txt
            .parse()
            .map_err(|e| Error::Csv(format!("line {lineno}: bad slot: {e}")))?;
        if level != tree.level(node) {
            return Err(Error::Csv(format!(
                "line {lineno}: slot level {level} does not match node level {}",
                tree.level(node)
            )));
        }
        if phase == Phase::Plus && level == tree.horizon() {
            return Err(Error::Csv(format!("line {lineno}: terminal level has no plus slot")));
        }
        let value: f64 = parts
            .next()
            .ok_or_else(|| Error::Csv(format!("line {lineno}: missing value")))?
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("line {lineno}: bad value: {e}")))?;
        x.set(tree, node, phase, value);
        seen[2 * node + (phase == Phase::Plus) as usize] = true;
    }
    for node in 0..tree.node_count() {
        if !seen[2 * node] {
            return Err(Error::Csv(format!("missing row for node {node}")));
        }
        if tree.level(node) < tree.horizon() && !seen[2 * node + 1] {
            return Err(Error::Csv(format!("missing plus row for node {node}")));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::FilteredTree;

    fn one_period() -> FilteredTree {
        FilteredTree::binomial(1, 1.0, 0.5)
    }

    #[test]
    fn slot_ordering_is_total() {
        assert!(Slot::instant(0) < Slot::plus(0));
        assert!(Slot::plus(0) < Slot::instant(1));
        assert!(Slot::instant(1) < Slot::plus(1));
    }

    #[test]
    fn jordan_splits_signwise() {
        // Increments +1, -2, +3 along a single-branch chain.
        let tree = FilteredTree::chain(3, 1.0);
        let cadlag = [0.0, 1.0, -2.0, 3.0];
        let right = [0.0; 4];
        let k = FvProcess::from_jumps(&tree, &cadlag, &right);
        let (kp, km) = jordan(&tree, &k);
        assert_eq!(kp.cadlag_jump(&tree, 1), 1.0);
        assert_eq!(kp.cadlag_jump(&tree, 2), 0.0);
        assert_eq!(kp.cadlag_jump(&tree, 3), 3.0);
        assert_eq!(km.cadlag_jump(&tree, 1), 0.0);
        assert_eq!(km.cadlag_jump(&tree, 2), 2.0);
        assert_eq!(km.cadlag_jump(&tree, 3), 0.0);
        // Reconstruction K = K+ - K-.
        for node in 0..tree.node_count() {
            for phase in [Phase::Instant, Phase::Plus] {
                if phase == Phase::Plus && tree.level(node) == tree.horizon() {
                    continue;
                }
                let diff = kp.base.get(&tree, node, phase) - km.base.get(&tree, node, phase);
                assert_eq!(diff, k.base.get(&tree, node, phase));
            }
        }
    }

    #[test]
    fn jordan_of_zero_is_zero() {
        let tree = one_period();
        let (kp, km) = jordan(&tree, &FvProcess::zero(&tree));
        assert!(kp.expected_variation(&tree) == 0.0 && km.expected_variation(&tree) == 0.0);
    }

    #[test]
    fn jordan_positive_increments_split_channels() {
        let tree = FilteredTree::chain(2, 1.0);
        let k = FvProcess::from_jumps(&tree, &[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]);
        let (kp, km) = jordan(&tree, &k);
        assert_eq!(kp.cadlag_jump(&tree, 1), 1.0);
        assert_eq!(kp.right_jump(&tree, 1), 1.0);
        assert_eq!(km.expected_variation(&tree), 0.0);
    }

    #[test]
    fn supermartingale_check_flags_right_jump_up() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 0.0);
        x.set(&tree, 0, Phase::Plus, 5.0);
        let check = check_supermartingale(&tree, &x);
        assert!(!check.ok);
        assert_eq!(check.worst, 5.0);
        assert_eq!(check.node, 0);
        assert_eq!(check.slot, Slot::instant(0));
    }

    #[test]
    fn supermartingale_check_accepts_decreasing() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 5.0);
        x.set(&tree, 1, Phase::Instant, 0.0);
        x.set(&tree, 2, Phase::Instant, 0.0);
        assert!(check_supermartingale(&tree, &x).ok);
    }

    #[test]
    fn mertens_deterministic_drop() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 5.0);
        x.set(&tree, 1, Phase::Instant, 0.0);
        x.set(&tree, 2, Phase::Instant, 0.0);
        let (m, k) = mertens_decompose(&tree, &x).unwrap();
        assert_eq!(m.martingale_defect(&tree), 0.0);
        assert_eq!(m.base.get(&tree, 1, Phase::Instant), 0.0);
        assert_eq!(k.cadlag_jump(&tree, 1), 5.0);
        assert_eq!(k.cadlag_jump(&tree, 2), 5.0);
    }

    #[test]
    fn mertens_martingale_input_gives_zero_k() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 1.0);
        x.set(&tree, 1, Phase::Instant, 2.0);
        x.set(&tree, 2, Phase::Instant, 0.0);
        let (m, k) = mertens_decompose(&tree, &x).unwrap();
        assert_eq!(k.expected_variation(&tree), 0.0);
        assert_eq!(m.base.get(&tree, 1, Phase::Instant), 1.0);
        assert_eq!(m.base.get(&tree, 2, Phase::Instant), -1.0);
    }

    #[test]
    fn mertens_right_jump_only() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 1.0);
        x.set(&tree, 0, Phase::Instant, 2.0);
        let (m, k) = mertens_decompose(&tree, &x).unwrap();
        assert_eq!(k.right_jump(&tree, 0), 1.0);
        assert_eq!(k.cadlag_jump(&tree, 1), 0.0);
        assert_eq!(m.martingale_defect(&tree), 0.0);
        assert_eq!(m.base.get(&tree, 1, Phase::Instant), 0.0);
    }

    #[test]
    fn mertens_rejects_submartingale() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 0.0);
        x.set(&tree, 1, Phase::Instant, 2.0);
        x.set(&tree, 2, Phase::Instant, 2.0);
        assert!(mertens_decompose(&tree, &x).is_err());
    }

    #[test]
    fn mertens_reconstructs_supermartingale() {
        let tree = FilteredTree::binomial(2, 0.5, 0.3);
        let mut x = LatticeProcess::constant(&tree, 0.0);
        // A decreasing deterministic staircase with a right jump.
        for node in 0..tree.node_count() {
            let level = tree.level(node) as f64;
            x.set(&tree, node, Phase::Instant, 10.0 - level);
            if tree.level(node) < tree.horizon() {
                x.set(&tree, node, Phase::Plus, 10.0 - level - 0.25);
            }
        }
        let (m, k) = mertens_decompose(&tree, &x).unwrap();
        let x0 = x.get(&tree, 0, Phase::Instant);
        for node in 0..tree.node_count() {
            for phase in [Phase::Instant, Phase::Plus] {
                if phase == Phase::Plus && tree.level(node) == tree.horizon() {
                    continue;
                }
                let rebuilt = x0 + m.base.get(&tree, node, phase) - k.base.get(&tree, node, phase);
                assert!((rebuilt - x.get(&tree, node, phase)).abs() <= 1e-12);
            }
        }
        assert!(k.is_predictable(&tree, 1e-12));
        assert!(k.is_increasing(&tree, 0.0));
    }

    #[test]
    fn limits_read_off_the_grid() {
        let tree = one_period();
        let mut x = LatticeProcess::constant(&tree, 0.0);
        x.set(&tree, 0, Phase::Plus, 5.0);
        let (left, right) = left_right_limits(&tree, &x);
        assert_eq!(right.get(&tree, 0, Phase::Instant), 5.0);
        assert_eq!(left.get(&tree, 1, Phase::Instant), 5.0);
        assert_eq!(left.get(&tree, 2, Phase::Instant), 5.0);
        assert_eq!(left.get(&tree, 0, Phase::Instant), 0.0);
        // Terminal right limit is the terminal value.
        assert_eq!(right.get(&tree, 1, Phase::Instant), 0.0);
    }

    #[test]
    fn limits_of_constant_are_constant() {
        let tree = FilteredTree::binomial(2, 1.0, 0.5);
        let x = LatticeProcess::constant(&tree, 3.5);
        let (left, right) = left_right_limits(&tree, &x);
        assert_eq!(left, x);
        assert_eq!(right, x);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let tree = FilteredTree::binomial(2, 1.0, 0.5);
        let mut x = LatticeProcess::constant(&tree, 0.0);
        let mut v = 0.1f64;
        for node in 0..tree.node_count() {
            x.set(&tree, node, Phase::Instant, v);
            v = v * 1.7 + 0.3;
            if tree.level(node) < tree.horizon() {
                x.set(&tree, node, Phase::Plus, v);
                v = -v / 3.0;
            }
        }
        let mut buf = Vec::new();
        write_csv(&tree, &x, &mut buf).unwrap();
        let parsed = read_csv(&tree, &mut buf.as_slice()).unwrap();
        for node in 0..tree.node_count() {
            assert_eq!(parsed.get(&tree, node, Phase::Instant).to_bits(), x.get(&tree, node, Phase::Instant).to_bits());
            if tree.level(node) < tree.horizon() {
                assert_eq!(parsed.get(&tree, node, Phase::Plus).to_bits(), x.get(&tree, node, Phase::Plus).to_bits());
            }
        }
    }
}
