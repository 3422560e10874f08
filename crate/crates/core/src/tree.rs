//! Reasoning tree for self-refine search.
//!
//! Each node holds one candidate assertion set. The tree supports the four
//! phases of a rollout as plain state transitions: UCT selection over every
//! evaluated node, child insertion, reward recording and value
//! backpropagation. Nothing here talks to an agent.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Identifier of a node, unique within one tree. Ids are dense and follow
/// creation order, so comparing ids compares creation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("tree has no evaluated node to select")]
    NoCandidates,
    #[error("node {0} has not been evaluated")]
    Unevaluated(NodeId),
    #[error("parent visit count is zero: ln(0) is undefined")]
    ZeroParentVisits,
    #[error("reward {reward} outside [{min}, {max}]")]
    RewardOutOfRange { reward: f64, min: f64, max: f64 },
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("malformed tree: {0}")]
    Malformed(String),
}

/// Search constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams<S> {
    /// Exploration constant of the UCT bonus.
    pub c: S,
    /// Guards the division in the UCT bonus.
    pub epsilon: S,
    pub n_rollouts: u32,
    /// Critic scores above this are clamped down to it.
    pub score_cap: S,
    pub score_min: S,
    pub score_max: S,
}

impl<S: Scalar> Default for SearchParams<S> {
    fn default() -> Self {
        Self {
            c: S::lit(1.4),
            epsilon: S::lit(1e-6),
            n_rollouts: 4,
            score_cap: S::lit(95.0),
            score_min: S::lit(-100.0),
            score_max: S::lit(100.0),
        }
    }
}

impl<S: Scalar> SearchParams<S> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |m: &str| Err(TreeError::InvalidParams(m.to_string()));
        if !(self.c >= S::zero()) || !self.c.is_finite() {
            return bad("c must be a finite non-negative number");
        }
        if !(self.epsilon > S::zero()) || !self.epsilon.is_finite() {
            return bad("epsilon must be a finite positive number");
        }
        if self.n_rollouts == 0 {
            return bad("n_rollouts must be positive");
        }
        if !(self.score_min < self.score_cap && self.score_cap <= self.score_max) {
            return bad("require score_min < score_cap <= score_max");
        }
        Ok(())
    }

    /// `true` when `v` lies in `[score_min, score_max]`.
    pub fn in_range(&self, v: S) -> bool {
        v >= self.score_min && v <= self.score_max
    }
}

/// Content of one node: an assertion set plus whatever the generator said
/// around it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerContent {
    pub assertions: Vec<String>,
    pub commentary: String,
    /// Checker log attached once the assertions have been checked.
    pub syntax_log: Option<String>,
}

impl AnswerContent {
    pub fn new(assertions: Vec<String>, commentary: impl Into<String>) -> Self {
        Self {
            assertions,
            commentary: commentary.into(),
            syntax_log: None,
        }
    }

    /// Assertions joined with blank lines, the form used inside prompts.
    pub fn assertions_text(&self) -> String {
        self.assertions.join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningNode<S> {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub answer: AnswerContent,
    pub q_value: S,
    /// Reward samples plus expansions.
    pub visit_count: u64,
    pub reward_samples: Vec<S>,
}

impl<S: Scalar> ReasoningNode<S> {
    fn new(id: NodeId, parent: Option<NodeId>, answer: AnswerContent) -> Self {
        Self {
            id,
            parent,
            children: Vec::new(),
            answer,
            q_value: S::zero(),
            visit_count: 0,
            reward_samples: Vec::new(),
        }
    }

    pub fn is_evaluated(&self) -> bool {
        !self.reward_samples.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    /// Most recent (suppressed) score recorded on this node.
    pub fn last_reward(&self) -> Option<S> {
        self.reward_samples.last().copied()
    }
}

/// UCT value from raw quantities:
/// `q + c * sqrt((ln(parent_visits) + 1) / (visits + epsilon))`.
pub fn uct_value<S: Scalar>(
    q: S,
    visits: u64,
    parent_visits: u64,
    params: &SearchParams<S>,
) -> Result<S, TreeError> {
    if parent_visits == 0 {
        return Err(TreeError::ZeroParentVisits);
    }
    let numer = S::from_count(parent_visits).ln() + S::one();
    let denom = S::from_count(visits) + params.epsilon;
    Ok(q + params.c * (numer / denom).sqrt())
}

/// UCT value of an evaluated node given the visit count of its parent (the
/// root passes its own count).
pub fn compute_uct<S: Scalar>(
    node: &ReasoningNode<S>,
    parent_visit_count: u64,
    params: &SearchParams<S>,
) -> Result<S, TreeError> {
    if !node.is_evaluated() {
        return Err(TreeError::Unevaluated(node.id));
    }
    uct_value(node.q_value, node.visit_count, parent_visit_count, params)
}

/// Tree of candidate assertion sets for one signal. Node ids index `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTree<S> {
    pub signal_name: String,
    pub root: NodeId,
    pub rollouts_completed: u32,
    pub nodes: Vec<ReasoningNode<S>>,
}

impl<S: Scalar> ReasoningTree<S> {
    /// Creates a single-node tree holding `root_answer`.
    pub fn new(signal_name: impl Into<String>, root_answer: AnswerContent) -> Self {
        Self {
            signal_name: signal_name.into(),
            root: NodeId::ROOT,
            rollouts_completed: 0,
            nodes: vec![ReasoningNode::new(NodeId::ROOT, None, root_answer)],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&ReasoningNode<S>, TreeError> {
        self.nodes.get(id.index()).ok_or(TreeError::UnknownNode(id))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut ReasoningNode<S>, TreeError> {
        self.nodes.get_mut(id.index()).ok_or(TreeError::UnknownNode(id))
    }

    pub fn root_node(&self) -> &ReasoningNode<S> {
        &self.nodes[self.root.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReasoningNode<S>> {
        self.nodes.iter()
    }

    /// Visit count used as `N(Father(a))` for `id`.
    pub fn parent_visits(&self, id: NodeId) -> Result<u64, TreeError> {
        let node = self.node(id)?;
        match node.parent {
            Some(p) => Ok(self.node(p)?.visit_count),
            None => Ok(node.visit_count),
        }
    }

    pub fn uct(&self, id: NodeId, params: &SearchParams<S>) -> Result<S, TreeError> {
        let node = self.node(id)?;
        compute_uct(node, self.parent_visits(id)?, params)
    }

    /// Greedy UCT selection over every evaluated node. Earliest node wins
    /// ties.
    pub fn select_node(&self, params: &SearchParams<S>) -> Result<NodeId, TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::NoCandidates);
        }
        let mut best: Option<(NodeId, S)> = None;
        for node in self.nodes.iter().filter(|n| n.is_evaluated()) {
            let value = self.uct(node.id, params)?;
            match best {
                Some((_, b)) if value <= b => {}
                _ => best = Some((node.id, value)),
            }
        }
        best.map(|(id, _)| id).ok_or(TreeError::NoCandidates)
    }

    /// Appends an unevaluated child under `parent`. Expanding a node counts
    /// as a visit of that node.
    pub fn add_child(&mut self, parent: NodeId, answer: AnswerContent) -> Result<NodeId, TreeError> {
        self.node(parent)?;
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(ReasoningNode::new(id, Some(parent), answer));
        let p = self.node_mut(parent)?;
        p.children.push(id);
        p.visit_count += 1;
        Ok(id)
    }

    /// Appends a (suppressed) reward sample; Q becomes the mean of all
    /// samples.
    pub fn record_reward(
        &mut self,
        id: NodeId,
        reward: S,
        params: &SearchParams<S>,
    ) -> Result<(), TreeError> {
        if !reward.is_finite() || !params.in_range(reward) {
            return Err(TreeError::RewardOutOfRange {
                reward: reward.as_f64(),
                min: params.score_min.as_f64(),
                max: params.score_max.as_f64(),
            });
        }
        let node = self.node_mut(id)?;
        node.reward_samples.push(reward);
        node.visit_count += 1;
        let sum = node.reward_samples.iter().fold(S::zero(), |acc, &r| acc + r);
        node.q_value = sum / S::from_count(node.reward_samples.len() as u64);
        Ok(())
    }

    /// Walks from the parent of `from` up to the root, setting each
    /// ancestor's Q to the average of its own Q and its best evaluated
    /// child's Q. `from` itself is untouched.
    pub fn backpropagate(&mut self, from: NodeId) -> Result<(), TreeError> {
        let mut cursor = self.node(from)?.parent;
        while let Some(id) = cursor {
            let best_child = self
                .node(id)?
                .children
                .iter()
                .map(|&c| &self.nodes[c.index()])
                .filter(|c| c.is_evaluated())
                .map(|c| c.q_value)
                .fold(None, |acc: Option<S>, q| Some(acc.map_or(q, |a| a.max(q))));
            let node = self.node_mut(id)?;
            if let Some(best) = best_child {
                node.q_value = (node.q_value + best) / S::lit(2.0);
            }
            cursor = node.parent;
        }
        Ok(())
    }

    /// Evaluated node with the highest Q; earliest wins ties.
    pub fn best_node(&self) -> Option<&ReasoningNode<S>> {
        self.nodes
            .iter()
            .filter(|n| n.is_evaluated())
            .fold(None, |best: Option<&ReasoningNode<S>>, n| match best {
                Some(b) if n.q_value <= b.q_value => Some(b),
                _ => Some(n),
            })
    }

    pub fn mark_rollout_completed(&mut self) {
        self.rollouts_completed += 1;
    }

    /// Ids from the root down to `id`.
    pub fn path_to(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        let mut path = vec![id];
        let mut cursor = self.node(id)?.parent;
        while let Some(p) = cursor {
            if path.len() > self.nodes.len() {
                return Err(TreeError::Malformed("cycle in parent links".into()));
            }
            path.push(p);
            cursor = self.node(p)?.parent;
        }
        path.reverse();
        Ok(path)
    }

    /// Checks structural invariants: one root, consistent parent/child links,
    /// acyclic, fully reachable, Q inside `[score_min, score_max]`.
    pub fn validate(&self, params: &SearchParams<S>) -> Result<(), TreeError> {
        let malformed = |m: String| Err(TreeError::Malformed(m));
        if self.nodes.is_empty() {
            return malformed("no nodes".into());
        }
        let roots: Vec<_> = self.nodes.iter().filter(|n| n.parent.is_none()).collect();
        if roots.len() != 1 || roots[0].id != self.root {
            return malformed(format!("expected exactly one root at {}", self.root));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id.index() != i {
                return malformed(format!("node at position {i} has id {}", node.id));
            }
            if let Some(p) = node.parent {
                let parent = self.node(p)?;
                if parent.children.iter().filter(|&&c| c == node.id).count() != 1 {
                    return malformed(format!("{p} does not list child {}", node.id));
                }
                if p >= node.id {
                    return malformed(format!("{} created before its parent {p}", node.id));
                }
            }
            for &c in &node.children {
                if self.node(c)?.parent != Some(node.id) {
                    return malformed(format!("{c} listed under {} but parented elsewhere", node.id));
                }
            }
            if !params.in_range(node.q_value) {
                return malformed(format!("{} has Q {} out of range", node.id, node.q_value));
            }
            if node.reward_samples.iter().any(|&r| !params.in_range(r)) {
                return malformed(format!("{} holds an out-of-range reward", node.id));
            }
        }
        // Parents always precede children, so every node reaches the root.
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(text: &str, params: &SearchParams<S>) -> Result<Self, TreeError> {
        let tree: Self =
            serde_json::from_str(text).map_err(|e| TreeError::Malformed(e.to_string()))?;
        tree.validate(params)?;
        Ok(tree)
    }
}
