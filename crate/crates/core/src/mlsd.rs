//! Exact sequence decoding.
//!
//! Over a BSC, maximum-likelihood sequence decoding is the search for the
//! root-to-leaf path of largest accumulated reward `sum_i (n - d_H(x_i, y_i))`.
//! [`mlsd_decode`] solves it by backward dynamic programming,
//! [`brute_force_decode`] by enumerating every leaf, and
//! [`sliding_window_full_search`] approximates it with a depth-limited search
//! that commits one action per step.
//!
//! Ties are always resolved towards the lowest action index, which makes the
//! dynamic program return the lexicographically smallest optimal path, the
//! same one the enumeration finds.

use thiserror::Error;

use crate::channel::{branch_reward, hamming_distance, ReceivedSequence};
use crate::codebook::{CodeParams, NodeIndex, NodePath, Symbol, TreeCode, Word};

/// Largest `k * d` exact decoding will take on.
pub const MAX_EXACT_KD: u32 = 26;
/// Largest `k * d` for the enumeration oracle and full DP tables.
pub const MAX_ENUMERATION_KD: u32 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum MlsdError {
    #[error(
        "tree too large ({leaves_log2} bits of leaves, limit {limit}), use MCTS or sliding-window"
    )]
    TreeTooLarge { leaves_log2: u32, limit: u32 },
    #[error("input error: {0}")]
    Input(String),
}

pub(crate) fn check_exact_budget(kd: u32) -> Result<(), MlsdError> {
    check_budget(kd, MAX_EXACT_KD)
}

fn check_budget(kd: u32, limit: u32) -> Result<(), MlsdError> {
    if kd > limit {
        Err(MlsdError::TreeTooLarge {
            leaves_log2: kd,
            limit,
        })
    } else {
        Ok(())
    }
}

fn check_received(params: &CodeParams, received: &[Word]) -> Result<(), MlsdError> {
    if received.len() != params.d() as usize {
        return Err(MlsdError::Input(format!(
            "received {} symbols for a depth-{} code",
            received.len(),
            params.d()
        )));
    }
    let mask = params.word_mask();
    if received.iter().any(|&w| w & !mask != 0) {
        return Err(MlsdError::Input(format!(
            "received word wider than n={}",
            params.n()
        )));
    }
    Ok(())
}

fn check_sequence(code: &TreeCode, received: &ReceivedSequence) -> Result<(), MlsdError> {
    if received.n() != code.params().n() {
        return Err(MlsdError::Input(format!(
            "received words have {} bits, code uses n={}",
            received.n(),
            code.params().n()
        )));
    }
    check_received(code.params(), received.symbols())
}

/// A decoded path with its accumulated reward and the number of `Q*` entries
/// evaluated to find it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSearch {
    pub actions: Vec<Symbol>,
    pub reward: u64,
    pub q_entries: u64,
}

/// Best path of length `depth` below `start`, by backward induction over the
/// subtree. Rewards beyond `start.depth + depth` are ignored.
///
/// Works level by level: only the values of one level and the argmax action
/// of every nonleaf node of the subtree are kept.
pub fn search_subtree(
    code: &TreeCode,
    received: &[Word],
    start: NodeIndex,
    depth: u32,
) -> PathSearch {
    let params = code.params();
    let k = params.k();
    let n = params.n();
    let arity = params.arity() as usize;
    debug_assert!(start.depth + depth <= params.d());

    let mut q_entries = 0u64;
    let mut next_values: Vec<u32> = vec![0; 1usize << (k * depth)];
    let mut best: Vec<Vec<u16>> = vec![Vec::new(); depth as usize];
    for rel in (0..depth).rev() {
        let width = 1usize << (k * rel);
        let abs_depth = start.depth + rel;
        let y = received[abs_depth as usize];
        let base = start.position << (k * rel);
        let mut values = vec![0u32; width];
        let mut choice = vec![0u16; width];
        if let Some(labels) = code.level_labels_u8(abs_depth, base, width) {
            let mut table = [0u32; 256];
            for (x, r) in table.iter_mut().enumerate().take(1 << n) {
                *r = branch_reward(x as Word, y, n);
            }
            for ((value, pick), (kids, xs)) in values.iter_mut().zip(choice.iter_mut()).zip(
                next_values
                    .chunks_exact(arity)
                    .zip(labels.chunks_exact(arity)),
            ) {
                let mut best_value = table[xs[0] as usize] + kids[0];
                let mut best_action = 0;
                for a in 1..arity {
                    let q = table[xs[a] as usize] + kids[a];
                    if q > best_value {
                        best_value = q;
                        best_action = a;
                    }
                }
                *value = best_value;
                *pick = best_action as u16;
            }
            q_entries += (width * arity) as u64;
            best[rel as usize] = choice;
            next_values = values;
            continue;
        }
        for j in 0..width {
            let node = NodeIndex {
                depth: abs_depth,
                position: base + j as u64,
            };
            let children = &next_values[j * arity..(j + 1) * arity];
            let mut best_value = 0;
            let mut best_action = 0;
            for (a, &v) in children.iter().enumerate() {
                let q = branch_reward(code.label(node, a as Symbol), y, n) + v;
                if a == 0 || q > best_value {
                    best_value = q;
                    best_action = a;
                }
            }
            values[j] = best_value;
            choice[j] = best_action as u16;
        }
        q_entries += (width * arity) as u64;
        best[rel as usize] = choice;
        next_values = values;
    }
    let reward = next_values.first().copied().unwrap_or(0) as u64;

    let mut actions = Vec::with_capacity(depth as usize);
    let mut j = 0usize;
    for choice in &best {
        let a = choice[j] as usize;
        actions.push(a as Symbol);
        j = j * arity + a;
    }
    PathSearch {
        actions,
        reward,
        q_entries,
    }
}

/// Maximum-likelihood sequence estimate of the information symbols.
pub fn mlsd_decode(code: &TreeCode, received: &ReceivedSequence) -> Result<Vec<Symbol>, MlsdError> {
    Ok(mlsd_decode_with_effort(code, received)?.actions)
}

pub fn mlsd_decode_with_effort(
    code: &TreeCode,
    received: &ReceivedSequence,
) -> Result<PathSearch, MlsdError> {
    check_sequence(code, received)?;
    mlsd_decode_words(code, received.symbols())
}

pub(crate) fn mlsd_decode_words(
    code: &TreeCode,
    received: &[Word],
) -> Result<PathSearch, MlsdError> {
    let params = code.params();
    check_exact_budget(params.k() * params.d())?;
    check_received(params, received)?;
    Ok(search_subtree(code, received, NodeIndex::ROOT, params.d()))
}

/// Accumulated Hamming distance between the codeword of `actions` and
/// `received`, computed by walking the tree from the root.
pub fn path_distance(code: &TreeCode, received: &[Word], actions: &[Symbol]) -> u64 {
    let k = code.params().k();
    let mut node = NodeIndex::ROOT;
    let mut total = 0u64;
    for (&a, &y) in actions.iter().zip(received) {
        total += hamming_distance(code.label(node, a), y) as u64;
        node = node.child(k, a);
    }
    total
}

/// Exhaustive minimum-distance decoding. Leaves are visited in lexicographic
/// order and only a strictly smaller distance replaces the incumbent.
pub fn brute_force_decode(
    code: &TreeCode,
    received: &ReceivedSequence,
) -> Result<Vec<Symbol>, MlsdError> {
    check_sequence(code, received)?;
    let params = code.params();
    check_budget(params.k() * params.d(), MAX_ENUMERATION_KD)?;
    let mut best: Option<(u64, u64)> = None;
    for leaf in 0..params.leaf_count() {
        let path = NodeIndex {
            depth: params.d(),
            position: leaf,
        }
        .to_path(params.k());
        let dist = path_distance(code, received.symbols(), path.actions());
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, leaf));
        }
    }
    let (_, leaf) = best.expect("at least one leaf");
    Ok(NodeIndex {
        depth: params.d(),
        position: leaf,
    }
    .to_path(params.k())
    .actions()
    .to_vec())
}

/// Sliding-window full search: at step `i`, search every path of length
/// `min(window, d + 1 - i)` below the node fixed by the committed actions and
/// commit the first action of the best one.
pub fn sliding_window_full_search(
    code: &TreeCode,
    received: &ReceivedSequence,
    window: u32,
) -> Result<Vec<Symbol>, MlsdError> {
    Ok(sliding_window_with_effort(code, received, window)?.actions)
}

pub fn sliding_window_with_effort(
    code: &TreeCode,
    received: &ReceivedSequence,
    window: u32,
) -> Result<PathSearch, MlsdError> {
    check_sequence(code, received)?;
    sliding_window_words(code, received.symbols(), window)
}

pub(crate) fn sliding_window_words(
    code: &TreeCode,
    received: &[Word],
    window: u32,
) -> Result<PathSearch, MlsdError> {
    let params = code.params();
    if window == 0 {
        return Err(MlsdError::Input("window depth must be at least 1".into()));
    }
    check_received(params, received)?;
    check_exact_budget(params.k() * window.min(params.d()))?;
    let mut node = NodeIndex::ROOT;
    let mut actions = Vec::with_capacity(params.d() as usize);
    let mut q_entries = 0;
    for i in 0..params.d() {
        let depth = window.min(params.d() - i);
        let step = search_subtree(code, received, node, depth);
        q_entries += step.q_entries;
        let a = step.actions[0];
        actions.push(a);
        node = node.child(params.k(), a);
    }
    let reward = params.d() as u64 * params.n() as u64 - path_distance(code, received, &actions);
    Ok(PathSearch {
        actions,
        reward,
        q_entries,
    })
}

/// Full `V*` / `Q*` tables over the whole tree, for inspection.
#[derive(Clone, Debug)]
pub struct DpTables {
    params: CodeParams,
    v_star: Vec<f64>,
    q_star: Vec<f64>,
    q_entries: u64,
}

impl DpTables {
    /// Backward induction: `V*(leaf) = 0`, `Q*(s,a) = r(s,a) + V*(s')`,
    /// `V*(s) = max_a Q*(s,a)`, visiting nodes from the deepest level up.
    pub fn build(code: &TreeCode, received: &ReceivedSequence) -> Result<Self, MlsdError> {
        check_sequence(code, received)?;
        let params = *code.params();
        check_budget(params.k() * params.d(), MAX_ENUMERATION_KD)?;
        let k = params.k();
        let arity = params.arity();
        let total_nodes = params.level_start(params.d()) + params.leaf_count();
        let mut v_star = vec![0.0; total_nodes as usize];
        let mut q_star = vec![0.0; params.label_count() as usize];
        let mut q_entries = 0;
        for depth in (0..params.d()).rev() {
            let y = received.symbols()[depth as usize];
            for position in 0..params.level_width(depth) {
                let node = NodeIndex { depth, position };
                let id = params.node_id(node);
                let mut v = f64::NEG_INFINITY;
                for a in 0..arity {
                    let child = params.node_id(node.child(k, a as Symbol));
                    let q = branch_reward(code.label(node, a as Symbol), y, params.n()) as f64
                        + v_star[child as usize];
                    q_star[(id * arity + a) as usize] = q;
                    q_entries += 1;
                    v = v.max(q);
                }
                v_star[id as usize] = v;
            }
        }
        Ok(Self {
            params,
            v_star,
            q_star,
            q_entries,
        })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn v_star_at(&self, node: NodeIndex) -> f64 {
        self.v_star[self.params.node_id(node) as usize]
    }

    pub fn q_star_at(&self, node: NodeIndex, action: Symbol) -> f64 {
        self.q_star[(self.params.node_id(node) * self.params.arity() + action as u64) as usize]
    }

    pub fn v_star(&self, node: &NodePath) -> f64 {
        self.v_star_at(node.to_index(self.params.k()))
    }

    pub fn q_star(&self, node: &NodePath, action: Symbol) -> f64 {
        self.q_star_at(node.to_index(self.params.k()), action)
    }

    /// Number of `Q*(s, a)` entries evaluated by [`DpTables::build`].
    pub fn q_entries(&self) -> u64 {
        self.q_entries
    }

    /// Forward walk taking the lowest-index maximizer of `Q*` at every node.
    pub fn greedy_path(&self) -> Vec<Symbol> {
        let k = self.params.k();
        let mut node = NodeIndex::ROOT;
        let mut actions = Vec::with_capacity(self.params.d() as usize);
        for _ in 0..self.params.d() {
            let mut best = 0;
            for a in 1..self.params.arity() as Symbol {
                if self.q_star_at(node, a) > self.q_star_at(node, best) {
                    best = a;
                }
            }
            actions.push(best);
            node = node.child(k, best);
        }
        actions
    }
}
