//! Monte-Carlo tree search over a tree code.
//!
//! One call to [`Searcher::search`] is one round of search from a root: UCB
//! selection through already-expanded nodes, expansion of the first node not
//! yet in the tree, and a default-policy rollout from there. Statistics are
//! kept only for expanded nodes, so memory grows with the number of rounds and
//! never with the size of the code tree.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::channel::branch_reward;
use crate::codebook::{CodeParams, NodeIndex, Symbol, TreeCode, Word};

#[derive(Debug, Error, PartialEq)]
pub enum MctsError {
    #[error("node at depth {} position {} has not been expanded", .0.depth, .0.position)]
    NotExpanded(NodeIndex),
    #[error("invalid search parameter: {0}")]
    InvalidParam(String),
}

/// Default policy used by rollouts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ExplorePolicy {
    #[default]
    UniformRandom,
    /// Cycles through the actions `0, 1, .., 2^k - 1, 0, ..` across all
    /// rollout steps of a decode.
    RoundRobin,
}

/// Initial value of a per-(node, action) statistic at expansion.
#[derive(Clone, Default)]
pub enum Prior<T> {
    #[default]
    Zero,
    Constant(T),
    Custom(Arc<dyn Fn(NodeIndex, Symbol) -> T + Send + Sync>),
}

impl<T: Copy + Default> Prior<T> {
    pub fn custom(f: impl Fn(NodeIndex, Symbol) -> T + Send + Sync + 'static) -> Self {
        Prior::Custom(Arc::new(f))
    }

    #[inline]
    pub fn value(&self, node: NodeIndex, action: Symbol) -> T {
        match self {
            Prior::Zero => T::default(),
            Prior::Constant(v) => *v,
            Prior::Custom(f) => f(node, action),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Prior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Zero => f.write_str("Zero"),
            Prior::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Prior::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MctsParams {
    /// Exploration constant `C`. `None` uses the search depth of the round.
    pub exploration_c: Option<f64>,
    /// `N_0(s, a)`.
    pub init_n: Prior<u64>,
    /// `Q_0(s, a)`; also read by [`greedy_path`] at unexpanded nodes.
    pub init_q: Prior<f64>,
    pub explore_policy: ExplorePolicy,
    /// Maximum number of rollout steps after an expansion.
    pub explore_depth_cap: Option<u32>,
    /// Keep statistics across decoding rounds instead of starting fresh.
    pub reuse_stats: bool,
}

impl MctsParams {
    pub fn with_c(c: f64) -> Self {
        Self {
            exploration_c: Some(c),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MctsError> {
        if let Some(c) = self.exploration_c {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(MctsError::InvalidParam(format!(
                    "exploration constant must be finite and nonnegative, got {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn c_for_depth(&self, search_depth: u32) -> f64 {
        self.exploration_c.unwrap_or(search_depth as f64)
    }
}

/// Work counters accumulated by a [`SearchStats`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchEffort {
    /// Rounds of search run.
    pub searches: u64,
    pub expansions: u64,
    /// Branch rewards evaluated during selection and rollouts.
    pub reward_evals: u64,
    pub selection_steps: u64,
}

impl SearchEffort {
    pub fn add(&mut self, other: &SearchEffort) {
        self.searches += other.searches;
        self.expansions += other.expansions;
        self.reward_evals += other.reward_evals;
        self.selection_steps += other.selection_steps;
    }
}

/// The expanded set with visit counts `N(s, a)` and value estimates `Q(s, a)`.
#[derive(Clone, Debug)]
pub struct SearchStats {
    k: u32,
    arity: usize,
    slots: FxHashMap<NodeIndex, usize>,
    nodes: Vec<NodeIndex>,
    visits: Vec<u64>,
    values: Vec<f64>,
    credited: Vec<f64>,
    init_n: Prior<u64>,
    init_q: Prior<f64>,
    round_robin: u64,
    effort: SearchEffort,
}

impl SearchStats {
    pub fn new(code_params: &CodeParams, params: &MctsParams) -> Self {
        Self {
            k: code_params.k(),
            arity: code_params.arity() as usize,
            slots: FxHashMap::default(),
            nodes: Vec::new(),
            visits: Vec::new(),
            values: Vec::new(),
            credited: Vec::new(),
            init_n: params.init_n.clone(),
            init_q: params.init_q.clone(),
            round_robin: 0,
            effort: SearchEffort::default(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_expanded(&self, node: NodeIndex) -> bool {
        self.slots.contains_key(&node)
    }

    pub fn expanded_count(&self) -> usize {
        self.nodes.len()
    }

    /// Expanded nodes in expansion order.
    pub fn expanded(&self) -> &[NodeIndex] {
        &self.nodes
    }

    pub fn q_values(&self, node: NodeIndex) -> Option<&[f64]> {
        self.slot(node).map(|s| &self.values[self.range(s)])
    }

    pub fn visit_counts(&self, node: NodeIndex) -> Option<&[u64]> {
        self.slot(node).map(|s| &self.visits[self.range(s)])
    }

    /// Sum of all accumulated rewards credited to each action of `node`.
    pub fn credited(&self, node: NodeIndex) -> Option<&[f64]> {
        self.slot(node).map(|s| &self.credited[self.range(s)])
    }

    /// `N(s) = sum_a N(s, a)`.
    pub fn node_visits(&self, node: NodeIndex) -> Option<u64> {
        self.visit_counts(node).map(|v| v.iter().sum())
    }

    pub fn effort(&self) -> &SearchEffort {
        &self.effort
    }

    /// `Q(s, a)` if `node` is expanded, `Q_0(s, a)` otherwise.
    pub fn q_or_prior(&self, node: NodeIndex, action: Symbol) -> f64 {
        match self.slot(node) {
            Some(s) => self.values[s * self.arity + action as usize],
            None => self.init_q.value(node, action),
        }
    }

    #[inline]
    fn slot(&self, node: NodeIndex) -> Option<usize> {
        self.slots.get(&node).copied()
    }

    #[inline]
    fn range(&self, slot: usize) -> std::ops::Range<usize> {
        slot * self.arity..(slot + 1) * self.arity
    }

    /// Adds `node` to the expanded set with `(N, Q) = (N_0, Q_0)`.
    pub fn expand(&mut self, node: NodeIndex) -> usize {
        if let Some(s) = self.slot(node) {
            return s;
        }
        let slot = self.nodes.len();
        self.slots.insert(node, slot);
        self.nodes.push(node);
        for a in 0..self.arity as Symbol {
            self.visits.push(self.init_n.value(node, a));
            self.values.push(self.init_q.value(node, a));
            self.credited.push(0.0);
        }
        self.effort.expansions += 1;
        slot
    }

    /// Applies the incremental-mean update to `(node, action)` with return `q`.
    pub fn update(&mut self, node: NodeIndex, action: Symbol, q: f64) -> Result<(), MctsError> {
        let slot = self.slot(node).ok_or(MctsError::NotExpanded(node))?;
        if action as usize >= self.arity {
            return Err(MctsError::InvalidParam(format!(
                "action {action} out of range"
            )));
        }
        self.credit(slot, action, q);
        Ok(())
    }

    fn ucb_action(&self, slot: usize, c: f64) -> Symbol {
        let visits = &self.visits[self.range(slot)];
        if let Some(untried) = visits.iter().position(|&n| n == 0) {
            return untried as Symbol;
        }
        let values = &self.values[self.range(slot)];
        let total: u64 = visits.iter().sum();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (a, (&q, &n)) in values.iter().zip(visits).enumerate() {
            let score = ucb_score(q, n, total, c);
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best as Symbol
    }

    /// Incremental-mean update after `q` was obtained through `(slot, action)`.
    #[inline]
    fn credit(&mut self, slot: usize, action: Symbol, q: f64) {
        let i = slot * self.arity + action as usize;
        self.visits[i] += 1;
        let n = self.visits[i] as f64;
        self.values[i] = (1.0 - 1.0 / n) * self.values[i] + q / n;
        self.credited[i] += q;
    }

    fn next_default_action<R: Rng>(&mut self, policy: ExplorePolicy, rng: &mut R) -> Symbol {
        match policy {
            ExplorePolicy::UniformRandom => rng.gen_range(0..self.arity) as Symbol,
            ExplorePolicy::RoundRobin => {
                let a = (self.round_robin % self.arity as u64) as Symbol;
                self.round_robin += 1;
                a
            }
        }
    }
}

/// `Q + C sqrt(ln N(s) / N(s, a))`.
#[inline]
pub fn ucb_score(q: f64, n_sa: u64, n_s: u64, c: f64) -> f64 {
    q + c * ((n_s as f64).ln() / n_sa as f64).sqrt()
}

/// UCB action at an expanded node. Untried actions (`N(s, a) = 0`) come first,
/// lowest index first; otherwise the lowest-index maximizer of [`ucb_score`].
pub fn select_action_ucb(
    stats: &SearchStats,
    node: NodeIndex,
    c: f64,
) -> Result<Symbol, MctsError> {
    let slot = stats.slot(node).ok_or(MctsError::NotExpanded(node))?;
    Ok(stats.ucb_action(slot, c))
}

/// Walks `length` steps from `start`, taking the lowest-index maximizer of
/// `Q(s, a)` at each node. Unexpanded nodes are read through `Q_0`.
pub fn greedy_path(stats: &SearchStats, start: NodeIndex, length: u32) -> Vec<Symbol> {
    let mut node = start;
    let mut path = Vec::with_capacity(length as usize);
    for _ in 0..length {
        let mut best = 0;
        let mut best_q = stats.q_or_prior(node, 0);
        for a in 1..stats.arity as Symbol {
            let q = stats.q_or_prior(node, a);
            if q > best_q {
                best_q = q;
                best = a;
            }
        }
        path.push(best);
        node = node.child(stats.k, best);
    }
    path
}

/// Everything a round of search reads but does not modify.
pub struct Searcher<'a> {
    code: &'a TreeCode,
    received: &'a [Word],
    params: &'a MctsParams,
    c: f64,
}

impl<'a> Searcher<'a> {
    /// `received[i]` is the word received for branches at depth `i + 1`; it
    /// must cover every depth the searches reach.
    pub fn new(code: &'a TreeCode, received: &'a [Word], params: &'a MctsParams, c: f64) -> Self {
        Self {
            code,
            received,
            params,
            c,
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    #[inline]
    fn reward(&self, stats: &mut SearchStats, node: NodeIndex, action: Symbol) -> f64 {
        stats.effort.reward_evals += 1;
        let n = self.code.params().n();
        branch_reward(
            self.code.label(node, action),
            self.received[node.depth as usize],
            n,
        ) as f64
    }

    /// One round of search below `node` with `depth` levels to go. Returns the
    /// accumulated reward of the path it followed.
    pub fn search<R: Rng>(
        &self,
        stats: &mut SearchStats,
        node: NodeIndex,
        depth: u32,
        rng: &mut R,
    ) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let slot = match stats.slot(node) {
            Some(slot) => slot,
            None => {
                stats.expand(node);
                let rollout = self
                    .params
                    .explore_depth_cap
                    .map_or(depth, |cap| depth.min(cap));
                return self.explore(stats, node, rollout, rng);
            }
        };
        let action = stats.ucb_action(slot, self.c);
        stats.effort.selection_steps += 1;
        let r = self.reward(stats, node, action);
        let q = r + self.search(stats, node.child(stats.k, action), depth - 1, rng);
        stats.credit(slot, action, q);
        q
    }

    /// Default-policy rollout of `depth` steps from `node`.
    pub fn explore<R: Rng>(
        &self,
        stats: &mut SearchStats,
        node: NodeIndex,
        depth: u32,
        rng: &mut R,
    ) -> f64 {
        let mut node = node;
        let mut total = 0.0;
        for _ in 0..depth {
            let a = stats.next_default_action(self.params.explore_policy, rng);
            total += self.reward(stats, node, a);
            node = node.child(stats.k, a);
        }
        total
    }

    /// `m` rounds of search from `root`, each `depth` levels deep.
    pub fn run<R: Rng>(
        &self,
        stats: &mut SearchStats,
        root: NodeIndex,
        depth: u32,
        m: u64,
        rng: &mut R,
    ) {
        for _ in 0..m {
            self.search(stats, root, depth, rng);
            stats.effort.searches += 1;
        }
    }
}
