//! Binary decision trees over the modifier cube `[0, 1]^R`, the per-tree
//! observation-to-leaf bookkeeping, and the GROW/PRUNE proposal moves.
//!
//! Trees live in a slot arena. The root is always slot 0; pruned children
//! are returned to a free list and reused by later grows, so node ids are
//! stable while a node is alive but not across prune/grow cycles.
//!
//! Routing follows the rule `{z[axis] < threshold}`: strictly below goes
//! left, equal or above goes right. Axes are zero-based.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::draw_multinomial_index;
use crate::scalar::Real;

pub type NodeId = usize;

/// Probability of proposing GROW at a tree that has at least one split.
/// At a stump GROW is proposed with probability one.
pub const GROW_PROBABILITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionRule<F> {
    pub axis: usize,
    pub threshold: F,
}

impl<F: Real> DecisionRule<F> {
    pub fn new(axis: usize, threshold: F) -> Result<Self> {
        if !(threshold > F::zero() && threshold < F::one()) {
            return Err(Error::Domain(format!(
                "threshold {threshold} outside the open unit interval"
            )));
        }
        Ok(Self { axis, threshold })
    }

    #[inline]
    pub fn goes_left(&self, value: F) -> bool {
        value < self.threshold
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind<F> {
    Leaf {
        jump: F,
    },
    Split {
        rule: DecisionRule<F>,
        left: NodeId,
        right: NodeId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<F> {
    pub depth: u32,
    pub parent: Option<NodeId>,
    pub kind: NodeKind<F>,
}

impl<F> Node<F> {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree<F> {
    nodes: Vec<Option<Node<F>>>,
    free: Vec<NodeId>,
}

impl<F: Real> DecisionTree<F> {
    pub const ROOT: NodeId = 0;

    pub fn stump(jump: F) -> Self {
        Self {
            nodes: vec![Some(Node {
                depth: 0,
                parent: None,
                kind: NodeKind::Leaf { jump },
            })],
            free: Vec::new(),
        }
    }

    /// Number of arena slots, live or free. Node ids are below this bound.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn get(&self, id: NodeId) -> Option<&Node<F>> {
        self.nodes.get(id).and_then(Option::as_ref)
    }

    pub fn node(&self, id: NodeId) -> &Node<F> {
        self.get(id).expect("live node id")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node<F> {
        self.nodes[id].as_mut().expect("live node id")
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.node(id).is_leaf()
    }

    pub fn is_stump(&self) -> bool {
        self.is_leaf(Self::ROOT)
    }

    /// Live nodes in slot order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Node<F>)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| n.as_ref().map(|n| (id, n)))
    }

    /// Leaf ids in slot order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.iter()
            .filter(|(_, n)| n.is_leaf())
            .map(|(id, _)| id)
            .collect()
    }

    pub fn num_leaves(&self) -> usize {
        self.iter().filter(|(_, n)| n.is_leaf()).count()
    }

    pub fn num_internal(&self) -> usize {
        self.iter().filter(|(_, n)| !n.is_leaf()).count()
    }

    /// Internal nodes whose children are both leaves, in slot order.
    pub fn nogs(&self) -> Vec<NodeId> {
        self.iter()
            .filter_map(|(id, n)| match n.kind {
                NodeKind::Split { left, right, .. }
                    if self.is_leaf(left) && self.is_leaf(right) =>
                {
                    Some(id)
                }
                _ => None,
            })
            .collect()
    }

    /// Internal nodes with their rules, in slot order.
    pub fn rules(&self) -> impl Iterator<Item = (NodeId, &DecisionRule<F>)> + '_ {
        self.iter().filter_map(|(id, n)| match &n.kind {
            NodeKind::Split { rule, .. } => Some((id, rule)),
            NodeKind::Leaf { .. } => None,
        })
    }

    pub fn jump(&self, id: NodeId) -> F {
        match self.node(id).kind {
            NodeKind::Leaf { jump } => jump,
            NodeKind::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    pub fn set_jump(&mut self, id: NodeId, value: F) {
        match &mut self.node_mut(id).kind {
            NodeKind::Leaf { jump } => *jump = value,
            NodeKind::Split { .. } => panic!("node {id} is not a leaf"),
        }
    }

    /// Jumps of all leaves in slot order.
    pub fn jumps(&self) -> impl Iterator<Item = F> + '_ {
        self.iter().filter_map(|(_, n)| match n.kind {
            NodeKind::Leaf { jump } => Some(jump),
            NodeKind::Split { .. } => None,
        })
    }

    /// Largest split axis used, if any.
    pub fn max_axis(&self) -> Option<usize> {
        self.rules().map(|(_, r)| r.axis).max()
    }

    /// Leaf reached by the modifier vector `z`. Axes are not bounds-checked
    /// beyond the slice indexing itself; see [`DecisionTree::evaluate`].
    pub fn leaf_for(&self, z: &[F]) -> NodeId {
        let mut id = Self::ROOT;
        loop {
            match &self.node(id).kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(z[rule.axis]) { *left } else { *right };
                }
            }
        }
    }

    /// Leaf reached by observation `i` of column-major modifiers `z`.
    #[inline]
    pub fn leaf_for_column(&self, z: &[Vec<F>], i: usize) -> NodeId {
        let mut id = Self::ROOT;
        loop {
            match &self.node(id).kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(z[rule.axis][i]) { *left } else { *right };
                }
            }
        }
    }

    /// Evaluate the step function at `z`.
    pub fn evaluate(&self, z: &[F]) -> Result<F> {
        if let Some(axis) = self.max_axis() {
            if axis >= z.len() {
                return Err(Error::Input(format!(
                    "tree splits on axis {axis} but modifier vector has length {}",
                    z.len()
                )));
            }
        }
        Ok(self.jump(self.leaf_for(z)))
    }

    fn alloc(&mut self, node: Node<F>) -> NodeId {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id] = Some(node);
                id
            }
            None => {
                self.nodes.push(Some(node));
                self.nodes.len() - 1
            }
        }
    }

    /// Split `leaf` with `rule`, returning the new `(left, right)` ids.
    pub fn grow(
        &mut self,
        leaf: NodeId,
        rule: DecisionRule<F>,
        left_jump: F,
        right_jump: F,
    ) -> Result<(NodeId, NodeId)> {
        let depth = match self.get(leaf) {
            Some(n) if n.is_leaf() => n.depth,
            _ => return Err(Error::State(format!("cannot grow non-leaf node {leaf}"))),
        };
        let left = self.alloc(Node {
            depth: depth + 1,
            parent: Some(leaf),
            kind: NodeKind::Leaf { jump: left_jump },
        });
        let right = self.alloc(Node {
            depth: depth + 1,
            parent: Some(leaf),
            kind: NodeKind::Leaf { jump: right_jump },
        });
        self.node_mut(leaf).kind = NodeKind::Split { rule, left, right };
        Ok((left, right))
    }

    /// Collapse the nog node `node` into a leaf carrying `jump`. Returns the
    /// ids of the removed children.
    pub fn prune(&mut self, node: NodeId, jump: F) -> Result<(NodeId, NodeId)> {
        let (left, right) = match self.get(node).map(|n| &n.kind) {
            Some(NodeKind::Split { left, right, .. })
                if self.is_leaf(*left) && self.is_leaf(*right) =>
            {
                (*left, *right)
            }
            _ => return Err(Error::State(format!("node {node} is not prunable"))),
        };
        self.nodes[left] = None;
        self.nodes[right] = None;
        // keep allocation order deterministic: left is reused first
        self.free.push(right);
        self.free.push(left);
        self.node_mut(node).kind = NodeKind::Leaf { jump };
        Ok((left, right))
    }

    /// Canonical shape string ignoring rules and jumps: `.` for a leaf,
    /// `(LR)` for a split.
    pub fn topology(&self) -> String {
        fn walk<F: Real>(t: &DecisionTree<F>, id: NodeId, out: &mut String) {
            match &t.node(id).kind {
                NodeKind::Leaf { .. } => out.push('.'),
                NodeKind::Split { left, right, .. } => {
                    out.push('(');
                    walk(t, *left, out);
                    walk(t, *right, out);
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        walk(self, Self::ROOT, &mut s);
        s
    }

    /// Nested debug representation; see [`TreeJson`].
    pub fn to_json(&self) -> TreeJson {
        fn walk<F: Real>(t: &DecisionTree<F>, id: NodeId) -> TreeJson {
            match &t.node(id).kind {
                NodeKind::Leaf { jump } => TreeJson::Leaf { leaf: jump.as_f64() },
                NodeKind::Split { rule, left, right } => TreeJson::Split {
                    axis: rule.axis,
                    threshold: rule.threshold.as_f64(),
                    left: Box::new(walk(t, *left)),
                    right: Box::new(walk(t, *right)),
                },
            }
        }
        walk(self, Self::ROOT)
    }

    pub fn from_json(json: &TreeJson) -> Result<Self> {
        fn walk<F: Real>(t: &mut DecisionTree<F>, id: NodeId, json: &TreeJson) -> Result<()> {
            match json {
                TreeJson::Leaf { leaf } => {
                    t.set_jump(id, F::of(*leaf));
                    Ok(())
                }
                TreeJson::Split {
                    axis,
                    threshold,
                    left,
                    right,
                } => {
                    let rule = DecisionRule::new(*axis, F::of(*threshold))?;
                    let (l, r) = t.grow(id, rule, F::zero(), F::zero())?;
                    walk(t, l, left)?;
                    walk(t, r, right)
                }
            }
        }
        let mut tree = Self::stump(F::zero());
        walk(&mut tree, Self::ROOT, json)?;
        Ok(tree)
    }
}

/// Debug serialization of a tree.
///
/// A leaf is `{"leaf": <jump>}`; a split is
/// `{"axis": <zero-based modifier>, "threshold": <t>, "left": {..}, "right": {..}}`
/// where `left` receives `z[axis] < t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeJson {
    Leaf {
        leaf: f64,
    },
    Split {
        axis: usize,
        threshold: f64,
        left: Box<TreeJson>,
        right: Box<TreeJson>,
    },
}

/// Observation-to-leaf map for one tree and one fixed set of modifiers.
///
/// `members[id]` lists, in increasing order, the observations routed to leaf
/// `id`; lists of internal or free slots are empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafAssignment {
    leaf_of: Vec<NodeId>,
    members: Vec<Vec<u32>>,
}

impl LeafAssignment {
    /// Route every observation through `tree` from scratch.
    pub fn build<F: Real>(tree: &DecisionTree<F>, z: &[Vec<F>], n: usize) -> Self {
        let mut members = vec![Vec::new(); tree.capacity()];
        let mut leaf_of = Vec::with_capacity(n);
        for i in 0..n {
            let leaf = tree.leaf_for_column(z, i);
            leaf_of.push(leaf);
            members[leaf].push(i as u32);
        }
        Self { leaf_of, members }
    }

    pub fn len(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_of.is_empty()
    }

    #[inline]
    pub fn leaf_of(&self, i: usize) -> NodeId {
        self.leaf_of[i]
    }

    pub fn members(&self, id: NodeId) -> &[u32] {
        self.members.get(id).map_or(&[], Vec::as_slice)
    }

    fn slot(&mut self, id: NodeId) -> &mut Vec<u32> {
        if id >= self.members.len() {
            self.members.resize_with(id + 1, Vec::new);
        }
        &mut self.members[id]
    }

    /// Move the observations of a freshly split leaf into its children.
    pub fn apply_grow<F: Real>(
        &mut self,
        leaf: NodeId,
        left: NodeId,
        right: NodeId,
        rule: &DecisionRule<F>,
        z: &[Vec<F>],
    ) {
        let parent = std::mem::take(self.slot(leaf));
        let column = &z[rule.axis];
        let (l, r): (Vec<u32>, Vec<u32>) = parent
            .iter()
            .partition(|&&i| rule.goes_left(column[i as usize]));
        for &i in &l {
            self.leaf_of[i as usize] = left;
        }
        for &i in &r {
            self.leaf_of[i as usize] = right;
        }
        *self.slot(left) = l;
        *self.slot(right) = r;
    }

    /// Merge the observations of two pruned children back into `node`.
    pub fn apply_prune(&mut self, node: NodeId, left: NodeId, right: NodeId) {
        let a = std::mem::take(self.slot(left));
        let b = std::mem::take(self.slot(right));
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut ia, mut ib) = (0, 0);
        while ia < a.len() && ib < b.len() {
            if a[ia] < b[ib] {
                merged.push(a[ia]);
                ia += 1;
            } else {
                merged.push(b[ib]);
                ib += 1;
            }
        }
        merged.extend_from_slice(&a[ia..]);
        merged.extend_from_slice(&b[ib..]);
        for &i in &merged {
            self.leaf_of[i as usize] = node;
        }
        *self.slot(node) = merged;
    }

    /// True when this assignment equals a from-scratch rebuild for `tree`.
    pub fn matches<F: Real>(&self, tree: &DecisionTree<F>, z: &[Vec<F>]) -> bool {
        let fresh = Self::build(tree, z, self.len());
        if fresh.leaf_of != self.leaf_of {
            return false;
        }
        let slots = fresh.members.len().max(self.members.len());
        (0..slots).all(|id| fresh.members(id) == self.members(id))
    }
}

/// A proposed split of `leaf` by `rule`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowMove<F> {
    pub leaf: NodeId,
    pub rule: DecisionRule<F>,
    /// `log q(T* -> T) - log q(T -> T*)`, including the move-type
    /// probabilities. The rule density is excluded: it appears identically in
    /// the tree prior and cancels.
    pub log_proposal_ratio: F,
}

/// A proposed collapse of the nog node `node`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruneMove<F> {
    pub node: NodeId,
    /// `log q(T* -> T) - log q(T -> T*)`, rule density excluded as for GROW.
    pub log_proposal_ratio: F,
}

/// How grow proposals choose a cutpoint once the axis is fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutpointMode {
    /// `t ~ Uniform(0, 1)` on the full modifier range.
    #[default]
    Uniform,
    /// Uniform over midpoints between consecutive distinct modifier values
    /// inside the node, restricted to cuts leaving both children non-empty.
    Midpoints,
}

/// Probability that the move on `tree` is a GROW.
pub fn grow_probability<F: Real>(tree: &DecisionTree<F>) -> F {
    if tree.is_stump() {
        F::one()
    } else {
        F::of(GROW_PROBABILITY)
    }
}

fn grow_log_ratio<F: Real>(tree: &DecisionTree<F>, leaf: NodeId) -> F {
    let leaves = tree.num_leaves();
    // nog count after the grow: +1 for `leaf`, -1 if its parent stops being a nog
    let mut nogs_after = tree.nogs().len() + 1;
    if let Some(parent) = tree.node(leaf).parent {
        if let NodeKind::Split { left, right, .. } = tree.node(parent).kind {
            let sibling = if left == leaf { right } else { left };
            if tree.is_leaf(sibling) {
                nogs_after -= 1;
            }
        }
    }
    let prune_after = F::one() - F::of(GROW_PROBABILITY);
    (prune_after / F::of(nogs_after as f64)).ln()
        - (grow_probability(tree) / F::of(leaves as f64)).ln()
}

fn uniform_index<F: Real, R: Rng + ?Sized>(len: usize, rng: &mut R) -> usize {
    let idx = (F::unit(rng) * F::of(len as f64)).to_usize().unwrap_or(0);
    idx.min(len - 1)
}

fn open_unit<F: Real, R: Rng + ?Sized>(rng: &mut R) -> F {
    loop {
        let u = F::unit(rng);
        if u > F::zero() {
            return u;
        }
    }
}

/// Propose splitting a uniformly chosen leaf on axis `r ~ theta` at a
/// uniform cutpoint.
pub fn propose_grow<F: Real, R: Rng + ?Sized>(
    tree: &DecisionTree<F>,
    theta: &[F],
    rng: &mut R,
) -> GrowMove<F> {
    let leaves = tree.leaves();
    let leaf = leaves[uniform_index::<F, _>(leaves.len(), rng)];
    let axis = draw_multinomial_index(theta, rng);
    let threshold = open_unit(rng);
    GrowMove {
        leaf,
        rule: DecisionRule { axis, threshold },
        log_proposal_ratio: grow_log_ratio(tree, leaf),
    }
}

/// GROW proposal with the cutpoint drawn from the admissible empirical
/// midpoints of the chosen leaf. Returns `None` when the chosen leaf has no
/// admissible cut on the chosen axis.
pub fn propose_grow_midpoints<F: Real, R: Rng + ?Sized>(
    tree: &DecisionTree<F>,
    theta: &[F],
    assignment: &LeafAssignment,
    z: &[Vec<F>],
    rng: &mut R,
) -> Option<GrowMove<F>> {
    let leaves = tree.leaves();
    let leaf = leaves[uniform_index::<F, _>(leaves.len(), rng)];
    let axis = draw_multinomial_index(theta, rng);
    let mut values: Vec<F> = assignment
        .members(leaf)
        .iter()
        .map(|&i| z[axis][i as usize])
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite modifiers"));
    values.dedup();
    if values.len() < 2 {
        return None;
    }
    let k = uniform_index::<F, _>(values.len() - 1, rng);
    let threshold = (values[k] + values[k + 1]) * F::of(0.5);
    Some(GrowMove {
        leaf,
        rule: DecisionRule { axis, threshold },
        log_proposal_ratio: grow_log_ratio(tree, leaf),
    })
}

/// Propose collapsing a uniformly chosen nog node. `None` at a stump.
pub fn propose_prune<F: Real, R: Rng + ?Sized>(
    tree: &DecisionTree<F>,
    rng: &mut R,
) -> Option<PruneMove<F>> {
    let nogs = tree.nogs();
    if nogs.is_empty() {
        return None;
    }
    let node = nogs[uniform_index::<F, _>(nogs.len(), rng)];
    let leaves_after = tree.num_leaves() - 1;
    let grow_after = if leaves_after == 1 {
        F::one()
    } else {
        F::of(GROW_PROBABILITY)
    };
    let prune_now = F::one() - F::of(GROW_PROBABILITY);
    let log_proposal_ratio = (grow_after / F::of(leaves_after as f64)).ln()
        - (prune_now / F::of(nogs.len() as f64)).ln();
    Some(PruneMove {
        node,
        log_proposal_ratio,
    })
}

/// Number of internal nodes splitting on each of the `r` axes, summed over
/// the trees.
pub fn split_counts<'a, F: Real>(
    trees: impl IntoIterator<Item = &'a DecisionTree<F>>,
    r: usize,
) -> Vec<usize> {
    let mut counts = vec![0; r];
    for tree in trees {
        for (_, rule) in tree.rules() {
            counts[rule.axis] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;
    use rand::Rng;

    fn two_leaf() -> DecisionTree<f64> {
        let mut t = DecisionTree::stump(0.0);
        let (l, r) = t.grow(0, DecisionRule::new(0, 0.5).unwrap(), 1.0, -1.0).unwrap();
        assert_eq!((l, r), (1, 2));
        t
    }

    /// Hand-built three-leaf tree: split z_0 < 0.4, then the right child on
    /// z_1 < 0.7.
    fn three_leaf() -> DecisionTree<f64> {
        let mut t = DecisionTree::stump(0.0);
        let (l, r) = t.grow(0, DecisionRule::new(0, 0.4).unwrap(), 0.0, 0.0).unwrap();
        t.set_jump(l, 1.5);
        let (rl, rr) = t.grow(r, DecisionRule::new(1, 0.7).unwrap(), 0.0, 0.0).unwrap();
        t.set_jump(rl, -2.0);
        t.set_jump(rr, 4.0);
        t
    }

    #[test]
    fn stump_evaluates_to_root_jump() {
        let t = DecisionTree::stump(0.7);
        assert_eq!(t.evaluate(&[0.1, 0.9]).unwrap(), 0.7);
        assert_eq!(t.evaluate(&[]).unwrap(), 0.7);
    }

    #[test]
    fn boundary_routes_right() {
        let t = two_leaf();
        assert_eq!(t.evaluate(&[0.3, 0.0]).unwrap(), 1.0);
        assert_eq!(t.evaluate(&[0.5, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let t = three_leaf();
        assert!(matches!(t.evaluate(&[0.5]), Err(Error::Input(_))));
    }

    #[test]
    fn rule_threshold_must_be_interior() {
        assert!(DecisionRule::new(0, 0.0_f64).is_err());
        assert!(DecisionRule::new(0, 1.0_f64).is_err());
        assert!(DecisionRule::new(0, f64::NAN).is_err());
    }

    #[test]
    fn three_leaf_matches_rectangle_oracle() {
        let t = three_leaf();
        // leaf rectangles written out independently: (lo, hi) per axis and jump
        let rects = [
            ([(0.0, 0.4), (0.0, 1.0)], 1.5),
            ([(0.4, 1.0), (0.0, 0.7)], -2.0),
            ([(0.4, 1.0), (0.7, 1.0)], 4.0),
        ];
        let mut rng = RngStream::new(3, 0);
        for _ in 0..100 {
            let z = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let hits: Vec<f64> = rects
                .iter()
                .filter(|(b, _)| b.iter().enumerate().all(|(a, &(lo, hi))| z[a] >= lo && z[a] < hi))
                .map(|(_, v)| *v)
                .collect();
            assert_eq!(hits.len(), 1);
            assert_eq!(t.evaluate(&z).unwrap(), hits[0]);
        }
    }

    #[test]
    fn leaf_count_is_internal_plus_one() {
        let t = three_leaf();
        assert_eq!(t.num_leaves(), t.num_internal() + 1);
        assert_eq!(t.nogs(), vec![2]);
        assert_eq!(t.topology(), "(.(..))");
    }

    #[test]
    fn degenerate_theta_always_picks_that_axis() {
        let t = DecisionTree::<f64>::stump(0.0);
        let mut rng = RngStream::new(1, 0);
        for _ in 0..200 {
            let mv = propose_grow(&t, &[1.0, 0.0, 0.0], &mut rng);
            assert_eq!(mv.rule.axis, 0);
            assert!(mv.rule.threshold > 0.0 && mv.rule.threshold < 1.0);
        }
    }

    #[test]
    fn grow_axis_frequencies_follow_theta() {
        let theta = [0.5, 0.3, 0.2];
        let t = three_leaf();
        let mut rng = RngStream::new(11, 0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[propose_grow(&t, &theta, &mut rng).rule.axis] += 1;
        }
        for (c, p) in counts.iter().zip(theta) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn grow_then_prune_ratios_cancel() {
        let mut rng = RngStream::new(5, 0);
        for start in [DecisionTree::stump(0.0), two_leaf(), three_leaf()] {
            for _ in 0..50 {
                let mv = propose_grow(&start, &[0.5, 0.5], &mut rng);
                let mut grown = start.clone();
                let (_, _) = grown.grow(mv.leaf, mv.rule, 0.0, 0.0).unwrap();
                // reverse move: prune exactly the node that was grown
                let nogs = grown.nogs();
                assert!(nogs.contains(&mv.leaf));
                let back = loop {
                    let p = propose_prune(&grown, &mut rng).unwrap();
                    if p.node == mv.leaf {
                        break p;
                    }
                };
                assert!((mv.log_proposal_ratio + back.log_proposal_ratio).abs() < 1e-12);
                let mut pruned = grown.clone();
                pruned.prune(back.node, 0.0).unwrap();
                assert_eq!(pruned.topology(), start.topology());
            }
        }
    }

    #[test]
    fn prune_two_leaf_gives_stump() {
        let t = two_leaf();
        let mut rng = RngStream::new(2, 0);
        let mv = propose_prune(&t, &mut rng).unwrap();
        assert_eq!(mv.node, 0);
        let mut s = t.clone();
        s.prune(mv.node, 0.0).unwrap();
        assert!(s.is_stump());
        assert_eq!(s.num_leaves(), 1);
        assert!(propose_prune(&s, &mut rng).is_none());
    }

    fn random_tree(leaves: usize, r: usize, rng: &mut RngStream) -> DecisionTree<f64> {
        let mut t = DecisionTree::stump(0.0);
        while t.num_leaves() < leaves {
            let ls = t.leaves();
            let leaf = ls[rng.random_range(0..ls.len())];
            let rule = DecisionRule::new(rng.random_range(0..r), rng.random_range(0.01..0.99)).unwrap();
            t.grow(leaf, rule, rng.random(), rng.random()).unwrap();
        }
        t
    }

    #[test]
    fn nog_count_matches_traversal() {
        fn count(t: &DecisionTree<f64>, id: NodeId) -> usize {
            match &t.node(id).kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => {
                    let both = t.is_leaf(*left) && t.is_leaf(*right);
                    usize::from(both) + count(t, *left) + count(t, *right)
                }
            }
        }
        let mut rng = RngStream::new(8, 0);
        for _ in 0..20 {
            let t = random_tree(15, 4, &mut rng);
            assert_eq!(t.num_leaves(), 15);
            assert_eq!(t.nogs().len(), count(&t, 0));
        }
    }

    #[test]
    fn split_counts_cases() {
        let stumps = vec![DecisionTree::<f64>::stump(0.0); 5];
        assert_eq!(split_counts(&stumps, 4), vec![0; 4]);
        let mut one = DecisionTree::stump(0.0);
        one.grow(0, DecisionRule::new(2, 0.3).unwrap(), 0.0, 0.0).unwrap();
        assert_eq!(split_counts([&one], 4), vec![0, 0, 1, 0]);

        fn walk(t: &DecisionTree<f64>, id: NodeId, c: &mut [usize]) {
            if let NodeKind::Split { rule, left, right } = &t.node(id).kind {
                c[rule.axis] += 1;
                walk(t, *left, c);
                walk(t, *right, c);
            }
        }
        let mut rng = RngStream::new(4, 0);
        let ens: Vec<_> = (0..10).map(|k| random_tree(1 + k, 5, &mut rng)).collect();
        let mut oracle = vec![0; 5];
        for t in &ens {
            walk(t, 0, &mut oracle);
        }
        let counts = split_counts(&ens, 5);
        assert_eq!(counts, oracle);
        assert_eq!(counts.iter().sum::<usize>(), ens.iter().map(|t| t.num_internal()).sum::<usize>());
    }

    #[test]
    fn leaves_tile_the_cube() {
        // each random z lands in exactly one leaf rectangle derived from the
        // root-to-leaf rule conjunctions
        let mut rng = RngStream::new(21, 0);
        let t = random_tree(8, 3, &mut rng);
        let mut rects = Vec::new();
        for leaf in t.leaves() {
            let mut bounds = vec![(0.0, 1.0); 3];
            let mut child = leaf;
            while let Some(parent) = t.node(child).parent {
                if let NodeKind::Split { rule, left, .. } = &t.node(parent).kind {
                    let b = &mut bounds[rule.axis];
                    if *left == child {
                        b.1 = f64::min(b.1, rule.threshold);
                    } else {
                        b.0 = f64::max(b.0, rule.threshold);
                    }
                }
                child = parent;
            }
            rects.push((leaf, bounds));
        }
        for _ in 0..2000 {
            let z: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let inside: Vec<_> = rects
                .iter()
                .filter(|(_, b)| b.iter().enumerate().all(|(a, &(lo, hi))| z[a] >= lo && z[a] < hi))
                .collect();
            assert_eq!(inside.len(), 1);
            assert_eq!(inside[0].0, t.leaf_for(&z));
        }
    }

    #[test]
    fn incremental_assignment_equals_rebuild() {
        let mut rng = RngStream::new(9, 0);
        let n = 300;
        let z: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
        let mut t = DecisionTree::stump(0.0);
        let mut a = LeafAssignment::build(&t, &z, n);
        for step in 0..400 {
            if step % 3 != 2 || t.is_stump() {
                let mv = propose_grow(&t, &[0.3, 0.3, 0.4], &mut rng);
                let (l, r) = t.grow(mv.leaf, mv.rule, 0.0, 0.0).unwrap();
                a.apply_grow(mv.leaf, l, r, &mv.rule, &z);
            } else {
                let mv = propose_prune(&t, &mut rng).unwrap();
                let (l, r) = t.prune(mv.node, 0.0).unwrap();
                a.apply_prune(mv.node, l, r);
            }
            assert!(a.matches(&t, &z), "step {step}");
        }
        let total: usize = t.leaves().iter().map(|&l| a.members(l).len()).sum();
        assert_eq!(total, n);
    }

    #[test]
    fn midpoint_cuts_leave_children_nonempty() {
        let z = vec![vec![0.1, 0.2, 0.2, 0.9]];
        let t = DecisionTree::<f64>::stump(0.0);
        let a = LeafAssignment::build(&t, &z, 4);
        let mut rng = RngStream::new(0, 0);
        for _ in 0..100 {
            let mv = propose_grow_midpoints(&t, &[1.0], &a, &z, &mut rng).unwrap();
            assert!([0.15, 0.55].iter().any(|m| (mv.rule.threshold - m).abs() < 1e-15));
        }
        let single = LeafAssignment::build(&t, &[vec![0.3]], 1);
        assert!(propose_grow_midpoints(&t, &[1.0], &single, &[vec![0.3]], &mut rng).is_none());
    }

    #[test]
    fn json_snapshot_and_round_trip() {
        let t = three_leaf();
        let json = serde_json::to_string(&t.to_json()).unwrap();
        assert_eq!(
            json,
            r#"{"axis":0,"threshold":0.4,"left":{"leaf":1.5},"right":{"axis":1,"threshold":0.7,"left":{"leaf":-2.0},"right":{"leaf":4.0}}}"#
        );
        let back: TreeJson = serde_json::from_str(&json).unwrap();
        let t2 = DecisionTree::<f64>::from_json(&back).unwrap();
        assert_eq!(t2.to_json(), t.to_json());
    }

    #[test]
    fn works_in_single_precision() {
        let mut t = DecisionTree::<f32>::stump(0.0);
        t.grow(0, DecisionRule::new(1, 0.25f32).unwrap(), 2.0, 3.0).unwrap();
        assert_eq!(t.evaluate(&[0.9, 0.1]).unwrap(), 2.0);
        assert_eq!(t.evaluate(&[0.9, 0.25]).unwrap(), 3.0);
    }
}
