//! Regular `2^k`-ary tree codes.
//!
//! Nodes are never materialized. A node is identified either by the action
//! prefix leading to it ([`NodePath`]) or, equivalently, by its depth and its
//! position within that depth ([`NodeIndex`]). Branch labels live in one flat
//! table indexed by `heap_id(node) * 2^k + action`, where nodes are numbered
//! level by level from the root.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{flip_mask, symbol_errors};
use crate::mlsd::{self, MlsdError};
use crate::seeds::{self, stream};

/// An information symbol, equivalently an action at a tree node (`< 2^k`).
pub type Symbol = u32;
/// An `n`-bit channel word stored in the low bits of a `u64`.
pub type Word = u64;

/// Default upper bound on the number of branch labels a code may hold.
pub const DEFAULT_MAX_LABELS: u64 = 1 << 27;

pub const MAX_K: u32 = 16;
pub const MAX_N: u32 = 64;
/// Bound on `k * d` so node positions fit a `u64`.
pub const MAX_KD: u32 = 60;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("invalid code parameters: {0}")]
    InvalidParams(String),
    #[error("code too large: {labels} branch labels exceed the budget of {budget}")]
    TooLarge { labels: u128, budget: u64 },
    #[error("input error: {0}")]
    Input(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Decoder(#[from] MlsdError),
}

/// `(k, n, d)`: bits per information symbol, bits per encoded symbol, depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CodeParams {
    k: u32,
    n: u32,
    d: u32,
}

impl CodeParams {
    pub fn new(k: u32, n: u32, d: u32) -> Result<Self, CodeError> {
        if k == 0 || n == 0 || d == 0 {
            return Err(CodeError::InvalidParams(format!(
                "k, n and d must be positive (got k={k}, n={n}, d={d})"
            )));
        }
        if k > MAX_K {
            return Err(CodeError::InvalidParams(format!("k={k} exceeds {MAX_K}")));
        }
        if n > MAX_N {
            return Err(CodeError::InvalidParams(format!("n={n} exceeds {MAX_N}")));
        }
        if k.checked_mul(d).is_none_or(|kd| kd > MAX_KD) {
            return Err(CodeError::TooLarge {
                labels: u128::MAX,
                budget: DEFAULT_MAX_LABELS,
            });
        }
        Ok(Self { k, n, d })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Number of actions at every nonleaf node, `2^k`.
    pub fn arity(&self) -> u64 {
        1 << self.k
    }

    /// Mask selecting the low `n` bits of a word.
    pub fn word_mask(&self) -> Word {
        word_mask(self.n)
    }

    /// Number of nodes at `depth`.
    pub fn level_width(&self, depth: u32) -> u64 {
        1 << (self.k * depth)
    }

    /// Heap id of the first node at `depth`.
    pub fn level_start(&self, depth: u32) -> u64 {
        (self.level_width(depth) - 1) / (self.arity() - 1)
    }

    pub fn node_id(&self, node: NodeIndex) -> u64 {
        self.level_start(node.depth) + node.position
    }

    pub fn nonleaf_count(&self) -> u64 {
        self.level_start(self.d)
    }

    pub fn leaf_count(&self) -> u64 {
        self.level_width(self.d)
    }

    /// `2^k (2^{kd} - 1) / (2^k - 1)`: one label per (nonleaf node, action).
    pub fn label_count(&self) -> u64 {
        self.nonleaf_count() * self.arity()
    }

    fn check_budget(&self, max_labels: u64) -> Result<(), CodeError> {
        let labels = self.label_count();
        if labels > max_labels {
            return Err(CodeError::TooLarge {
                labels: labels as u128,
                budget: max_labels,
            });
        }
        Ok(())
    }
}

impl fmt::Display for CodeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, n={}, d={})", self.k, self.n, self.d)
    }
}

pub(crate) fn word_mask(n: u32) -> Word {
    if n >= 64 {
        Word::MAX
    } else {
        (1 << n) - 1
    }
}

/// A node given by its depth and its position among the nodes at that depth.
///
/// The position of a node reached by actions `a_1..a_l` is the base-`2^k`
/// number `a_1 a_2 .. a_l`, so the children of `(l, p)` are
/// `(l + 1, p * 2^k + a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex {
    pub depth: u32,
    pub position: u64,
}

impl NodeIndex {
    pub const ROOT: NodeIndex = NodeIndex {
        depth: 0,
        position: 0,
    };

    #[inline]
    pub fn child(self, k: u32, action: Symbol) -> NodeIndex {
        NodeIndex {
            depth: self.depth + 1,
            position: (self.position << k) | action as u64,
        }
    }

    pub fn to_path(self, k: u32) -> NodePath {
        let mask = (1u64 << k) - 1;
        let actions = (0..self.depth)
            .rev()
            .map(|shift| ((self.position >> (shift * k)) & mask) as Symbol)
            .collect();
        NodePath { actions }
    }
}

/// A node identified by the sequence of actions from the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath {
    actions: Vec<Symbol>,
}

impl NodePath {
    pub fn root() -> Self {
        Self::default()
    }

    /// Builds a path, checking every action against `params`.
    pub fn new(actions: Vec<Symbol>, params: &CodeParams) -> Result<Self, CodeError> {
        if actions.len() > params.d as usize {
            return Err(CodeError::Input(format!(
                "path of length {} is deeper than d={}",
                actions.len(),
                params.d
            )));
        }
        check_symbols(&actions, params)?;
        Ok(Self { actions })
    }

    pub fn depth(&self) -> u32 {
        self.actions.len() as u32
    }

    pub fn actions(&self) -> &[Symbol] {
        &self.actions
    }

    pub fn child(&self, action: Symbol) -> NodePath {
        let mut actions = self.actions.clone();
        actions.push(action);
        NodePath { actions }
    }

    pub fn to_index(&self, k: u32) -> NodeIndex {
        let position = self.actions.iter().fold(0u64, |p, &a| (p << k) | a as u64);
        NodeIndex {
            depth: self.depth(),
            position,
        }
    }
}

fn check_symbols(symbols: &[Symbol], params: &CodeParams) -> Result<(), CodeError> {
    match symbols.iter().position(|&a| a as u64 >= params.arity()) {
        Some(i) => Err(CodeError::Input(format!(
            "symbol {} at index {} is out of range for k={}",
            symbols[i], i, params.k
        ))),
        None => Ok(()),
    }
}

/// Flat label storage, narrowest integer type that holds `n` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
enum LabelTable {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    U64(Vec<u64>),
}

impl LabelTable {
    fn with_capacity(n: u32, len: usize) -> Self {
        match n {
            0..=8 => LabelTable::U8(Vec::with_capacity(len)),
            9..=16 => LabelTable::U16(Vec::with_capacity(len)),
            17..=32 => LabelTable::U32(Vec::with_capacity(len)),
            _ => LabelTable::U64(Vec::with_capacity(len)),
        }
    }

    fn push(&mut self, w: Word) {
        match self {
            LabelTable::U8(v) => v.push(w as u8),
            LabelTable::U16(v) => v.push(w as u16),
            LabelTable::U32(v) => v.push(w as u32),
            LabelTable::U64(v) => v.push(w),
        }
    }

    #[inline]
    fn get(&self, i: usize) -> Word {
        match self {
            LabelTable::U8(v) => v[i] as Word,
            LabelTable::U16(v) => v[i] as Word,
            LabelTable::U32(v) => v[i] as Word,
            LabelTable::U64(v) => v[i],
        }
    }

    fn len(&self) -> usize {
        match self {
            LabelTable::U8(v) => v.len(),
            LabelTable::U16(v) => v.len(),
            LabelTable::U32(v) => v.len(),
            LabelTable::U64(v) => v.len(),
        }
    }
}

/// A tree code: parameters plus one `n`-bit label per (nonleaf node, action).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeCode {
    params: CodeParams,
    labels: LabelTable,
    seed: Option<u64>,
    level_starts: Vec<u64>,
}

fn level_starts(params: &CodeParams) -> Vec<u64> {
    (0..=params.d).map(|l| params.level_start(l)).collect()
}

impl TreeCode {
    /// Builds a code from labels in `(heap id, action)` order.
    pub fn from_labels(
        params: CodeParams,
        labels: impl IntoIterator<Item = Word>,
        seed: Option<u64>,
    ) -> Result<Self, CodeError> {
        params.check_budget(DEFAULT_MAX_LABELS)?;
        let expected = params.label_count() as usize;
        let mask = params.word_mask();
        let mut table = LabelTable::with_capacity(params.n, expected);
        for (i, w) in labels.into_iter().enumerate() {
            if i >= expected {
                return Err(CodeError::Validation(format!(
                    "more than {expected} labels for {params}"
                )));
            }
            if w & !mask != 0 {
                return Err(CodeError::Validation(format!(
                    "label {i} ({w:#x}) is wider than n={}",
                    params.n
                )));
            }
            table.push(w);
        }
        if table.len() != expected {
            return Err(CodeError::Validation(format!(
                "{params} needs {expected} labels, found {}",
                table.len()
            )));
        }
        Ok(Self {
            params,
            labels: table,
            seed,
            level_starts: level_starts(&params),
        })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// Generator seed, when the code was produced by [`generate_random_code`].
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Label `x(s, a)` on branch `action` out of `node`. `node` must be a
    /// nonleaf node and `action < 2^k`.
    #[inline]
    pub fn label(&self, node: NodeIndex, action: Symbol) -> Word {
        let id = self.level_starts[node.depth as usize] + node.position;
        self.labels
            .get(((id << self.params.k) | action as u64) as usize)
    }

    /// Labels of `count` consecutive nodes at `depth` starting at `position`,
    /// when labels are stored one byte each.
    #[inline]
    pub(crate) fn level_labels_u8(&self, depth: u32, position: u64, count: usize) -> Option<&[u8]> {
        match &self.labels {
            LabelTable::U8(v) => {
                let start =
                    ((self.level_starts[depth as usize] + position) << self.params.k) as usize;
                Some(&v[start..start + (count << self.params.k)])
            }
            _ => None,
        }
    }

    /// Checked form of [`TreeCode::label`] keyed by action prefix.
    pub fn branch_label(&self, node: &NodePath, action: Symbol) -> Result<Word, CodeError> {
        if node.depth() >= self.params.d {
            return Err(CodeError::Input(format!(
                "node at depth {} is a leaf",
                node.depth()
            )));
        }
        check_symbols(node.actions(), &self.params)?;
        check_symbols(&[action], &self.params)?;
        Ok(self.label(node.to_index(self.params.k), action))
    }

    /// All labels in `(heap id, action)` order.
    pub fn labels(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.labels.len()).map(|i| self.labels.get(i))
    }

    /// Short content hash of the parameters and label table.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.params.k.to_le_bytes());
        h.update(self.params.n.to_le_bytes());
        h.update(self.params.d.to_le_bytes());
        let mut buf = Vec::with_capacity(1 << 16);
        for w in self.labels() {
            buf.extend_from_slice(&w.to_le_bytes());
            if buf.len() >= 1 << 16 {
                h.update(&buf);
                buf.clear();
            }
        }
        h.update(&buf);
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Draws every branch label i.i.d. uniform over `{0,1}^n`.
pub fn generate_random_code(params: CodeParams, seed: u64) -> Result<TreeCode, CodeError> {
    generate_random_code_with_budget(params, seed, DEFAULT_MAX_LABELS)
}

pub fn generate_random_code_with_budget(
    params: CodeParams,
    seed: u64,
    max_labels: u64,
) -> Result<TreeCode, CodeError> {
    params.check_budget(max_labels)?;
    let mut rng = seeds::rng_from(seed, &[]);
    let mask = params.word_mask();
    let count = params.label_count() as usize;
    let mut labels = LabelTable::with_capacity(params.n, count);
    for _ in 0..count {
        labels.push(rng.next_u64() & mask);
    }
    Ok(TreeCode {
        params,
        labels,
        seed: Some(seed),
        level_starts: level_starts(&params),
    })
}

/// Encodes `info` by walking the tree and emitting each branch label.
pub fn encode(code: &TreeCode, info: &[Symbol]) -> Result<Vec<Word>, CodeError> {
    let params = code.params();
    if info.len() != params.d as usize {
        return Err(CodeError::Input(format!(
            "expected {} information symbols, got {}",
            params.d,
            info.len()
        )));
    }
    check_symbols(info, params)?;
    let mut node = NodeIndex::ROOT;
    Ok(info
        .iter()
        .map(|&a| {
            let x = code.label(node, a);
            node = node.child(params.k, a);
            x
        })
        .collect())
}

pub(crate) fn random_info<R: Rng>(params: &CodeParams, rng: &mut R) -> Vec<Symbol> {
    (0..params.d)
        .map(|_| rng.gen_range(0..params.arity()) as Symbol)
        .collect()
}

/// Two information sequences sharing one codeword, if any exist.
///
/// Diagnostic only; enumerates all `2^{kd}` codewords, so `kd` is capped.
pub fn find_codeword_collision(
    code: &TreeCode,
) -> Result<Option<(Vec<Symbol>, Vec<Symbol>)>, CodeError> {
    let params = code.params();
    if params.k * params.d > 22 {
        return Err(CodeError::TooLarge {
            labels: params.leaf_count() as u128,
            budget: 1 << 22,
        });
    }
    let mut seen: HashMap<Vec<Word>, u64> = HashMap::new();
    for leaf in 0..params.leaf_count() {
        let info = NodeIndex {
            depth: params.d,
            position: leaf,
        }
        .to_path(params.k);
        let cw = encode(code, info.actions())?;
        if let Some(&other) = seen.get(&cw) {
            let first = NodeIndex {
                depth: params.d,
                position: other,
            }
            .to_path(params.k);
            return Ok(Some((first.actions().to_vec(), info.actions().to_vec())));
        }
        seen.insert(cw, leaf);
    }
    Ok(None)
}

/// Outcome of pool selection.
#[derive(Clone, Debug)]
pub struct PoolSelection {
    pub code: TreeCode,
    pub index: usize,
    /// Code seed of every pool member.
    pub seeds: Vec<u64>,
    /// Mean symbol error rate of every pool member under exact decoding.
    pub bers: Vec<f64>,
}

/// Seed of pool member `index` when selecting with master seed `seed`.
pub fn pool_member_seed(seed: u64, index: usize) -> u64 {
    seeds::derive_seed(seed, &[stream::POOL_CODE, index as u64])
}

/// Measures the exact-decoding error rate of `code` on the pool's shared
/// trial stream: trial `t` uses the same information and noise for every code.
pub fn pool_error_count(
    code: &TreeCode,
    trials: usize,
    crossover_p: f64,
    seed: u64,
) -> Result<u64, CodeError> {
    let params = *code.params();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng_from(seed, &[stream::POOL_TRIAL, t as u64]);
            let info = random_info(&params, &mut rng);
            let mut cw = encode(code, &info)?;
            for w in cw.iter_mut() {
                *w ^= flip_mask(params.n, crossover_p, &mut rng);
            }
            let est = mlsd::mlsd_decode_words(code, &cw)?.actions;
            Ok(symbol_errors(&info, &est) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Picks, from `pool_size` random codes, the one with the lowest exact-decoding
/// error rate over BSC(`crossover_p`). Ties go to the lowest pool index.
pub fn select_best_code(
    params: CodeParams,
    pool_size: usize,
    trials_per_code: usize,
    crossover_p: f64,
    seed: u64,
) -> Result<TreeCode, CodeError> {
    Ok(select_best_code_detailed(params, pool_size, trials_per_code, crossover_p, seed)?.code)
}

pub fn select_best_code_detailed(
    params: CodeParams,
    pool_size: usize,
    trials_per_code: usize,
    crossover_p: f64,
    seed: u64,
) -> Result<PoolSelection, CodeError> {
    if pool_size == 0 {
        return Err(CodeError::Input("pool size must be at least 1".into()));
    }
    if !(0.0..=0.5).contains(&crossover_p) {
        return Err(CodeError::Input(format!(
            "crossover probability {crossover_p} outside [0, 0.5]"
        )));
    }
    params.check_budget(DEFAULT_MAX_LABELS)?;
    mlsd::check_exact_budget(params.k * params.d)?;
    let seeds: Vec<u64> = (0..pool_size).map(|i| pool_member_seed(seed, i)).collect();
    let mut best: Option<(usize, u64, TreeCode)> = None;
    let mut bers = Vec::with_capacity(pool_size);
    let denom = (trials_per_code.max(1) as f64) * params.d as f64;
    for (i, &code_seed) in seeds.iter().enumerate() {
        let code = generate_random_code(params, code_seed)?;
        let errors = pool_error_count(&code, trials_per_code, crossover_p, seed)?;
        bers.push(errors as f64 / denom);
        if best.as_ref().is_none_or(|(_, e, _)| errors < *e) {
            best = Some((i, errors, code));
        }
    }
    let (index, _, code) = best.expect("pool is nonempty");
    Ok(PoolSelection {
        code,
        index,
        seeds,
        bers,
    })
}

/// Writes `code` in the text format read by [`read_code`].
pub fn write_code<W: Write>(code: &TreeCode, mut out: W) -> io::Result<()> {
    let p = code.params();
    writeln!(out, "# tree code, labels in (node, action) order")?;
    writeln!(out, "k={}", p.k)?;
    writeln!(out, "n={}", p.n)?;
    writeln!(out, "d={}", p.d)?;
    if let Some(seed) = code.seed {
        writeln!(out, "seed={seed}")?;
    }
    let width = p.n as usize;
    for w in code.labels() {
        writeln!(out, "{w:0width$b}")?;
    }
    out.flush()
}

pub fn save_code(code: &TreeCode, destination: &Path) -> Result<(), CodeError> {
    let io_err = |source| CodeError::Io {
        path: destination.to_path_buf(),
        source,
    };
    let file = File::create(destination).map_err(io_err)?;
    write_code(code, BufWriter::new(file)).map_err(io_err)
}

/// Parses an `n`-bit binary string.
pub fn parse_word(s: &str, n: u32) -> Result<Word, String> {
    if s.len() != n as usize {
        return Err(format!("expected {n} bits, found {:?}", s));
    }
    if !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(format!("{s:?} is not a binary string"));
    }
    Word::from_str_radix(s, 2).map_err(|e| e.to_string())
}

pub fn read_code<R: BufRead>(input: R) -> Result<TreeCode, CodeError> {
    let mut header: HashMap<&'static str, u64> = HashMap::new();
    let mut params: Option<CodeParams> = None;
    let mut labels: Vec<Word> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let parse_err = |msg: String| CodeError::Parse { line: line_no, msg };
        let line = line.map_err(|e| parse_err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            if params.is_some() {
                return Err(parse_err(format!("header field {key:?} after labels")));
            }
            let key = match key.trim() {
                "k" => "k",
                "n" => "n",
                "d" => "d",
                "seed" => "seed",
                other => return Err(parse_err(format!("unknown header field {other:?}"))),
            };
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("field {key}: {e}")))?;
            if header.insert(key, value).is_some() {
                return Err(parse_err(format!("duplicate header field {key:?}")));
            }
            continue;
        }
        let p = match params {
            Some(p) => p,
            None => {
                let field = |name: &str| {
                    header
                        .get(name)
                        .copied()
                        .ok_or_else(|| parse_err(format!("label before header field {name:?}")))
                        .and_then(|v| {
                            u32::try_from(v).map_err(|_| parse_err(format!("{name} too large")))
                        })
                };
                let p = CodeParams::new(field("k")?, field("n")?, field("d")?)?;
                p.check_budget(DEFAULT_MAX_LABELS)?;
                labels.reserve(p.label_count() as usize);
                params = Some(p);
                p
            }
        };
        labels.push(parse_word(line, p.n).map_err(parse_err)?);
    }
    let params = match params {
        Some(p) => p,
        None => {
            let get = |name| header.get(name).map(|&v| v as u32);
            match (get("k"), get("n"), get("d")) {
                (Some(k), Some(n), Some(d)) => CodeParams::new(k, n, d)?,
                _ => return Err(CodeError::Validation("missing k, n or d header".into())),
            }
        }
    };
    TreeCode::from_labels(params, labels, header.get("seed").copied())
}

pub fn load_code(source: &Path) -> Result<TreeCode, CodeError> {
    let file = File::open(source).map_err(|e| CodeError::Io {
        path: source.to_path_buf(),
        source: e,
    })?;
    read_code(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: u32, n: u32, d: u32) -> CodeParams {
        CodeParams::new(k, n, d).unwrap()
    }

    #[test]
    fn label_counts() {
        assert_eq!(p(1, 2, 4).label_count(), 30);
        assert_eq!(p(1, 2, 10).label_count(), 2046);
        assert_eq!(p(2, 3, 3).label_count(), 4 * (1 + 4 + 16));
        assert_eq!(p(1, 2, 4).leaf_count(), 16);
        assert_eq!(
            generate_random_code(p(1, 2, 4), 7)
                .unwrap()
                .labels()
                .count(),
            30
        );
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CodeParams::new(0, 2, 3).is_err());
        assert!(CodeParams::new(1, 0, 3).is_err());
        assert!(CodeParams::new(1, 2, 0).is_err());
        assert!(CodeParams::new(1, 65, 3).is_err());
        assert!(matches!(
            generate_random_code_with_budget(p(1, 2, 20), 1, 1000),
            Err(CodeError::TooLarge { .. })
        ));
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_random_code(p(1, 2, 4), 7).unwrap();
        let b = generate_random_code(p(1, 2, 4), 7).unwrap();
        let c = generate_random_code(p(1, 2, 4), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.labels().collect::<Vec<_>>(),
            c.labels().collect::<Vec<_>>()
        );
        assert!(a.labels().all(|w| w < 4));
    }

    #[test]
    fn node_index_and_path_agree() {
        for k in 1..=3 {
            let params = p(k, 2, 4);
            for depth in 0..=4 {
                for position in 0..params.level_width(depth) {
                    let node = NodeIndex { depth, position };
                    assert_eq!(node.to_path(k).to_index(k), node);
                }
            }
        }
        let path = NodePath::new(vec![0, 1, 1], &p(1, 2, 4)).unwrap();
        let node = path.to_index(1);
        assert_eq!(
            node,
            NodeIndex {
                depth: 3,
                position: 0b011
            }
        );
        assert_eq!(p(1, 2, 4).node_id(node), 7 + 3);
        assert_eq!(path.child(0).to_index(1), node.child(1, 0));
    }

    #[test]
    fn heap_ids_are_dense_and_distinct() {
        let params = p(2, 1, 3);
        let mut ids: Vec<u64> = (0..params.d())
            .flat_map(|depth| {
                (0..params.level_width(depth)).map(move |position| NodeIndex { depth, position })
            })
            .map(|node| params.node_id(node))
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..params.nonleaf_count()).collect::<Vec<_>>());
    }

    #[test]
    fn label_table_is_total() {
        let code = generate_random_code(p(1, 3, 12), 3).unwrap();
        let params = code.params();
        for depth in 0..params.d() {
            for position in 0..params.level_width(depth) {
                let path = NodeIndex { depth, position }.to_path(1);
                for a in 0..2 {
                    assert!(code.branch_label(&path, a).unwrap() < 8);
                }
            }
        }
        let leaf = NodePath::new(vec![0; 12], params).unwrap();
        assert!(code.branch_label(&leaf, 0).is_err());
    }

    #[test]
    fn encode_follows_the_path() {
        let params = p(1, 2, 4);
        let labels: Vec<Word> = (0..30).map(|i| i % 4).collect();
        let code = TreeCode::from_labels(params, labels, None).unwrap();
        // Path (0,1,1,0) visits heap ids 0, 1, 4, 10.
        let cw = encode(&code, &[0, 1, 1, 0]).unwrap();
        let expected: Vec<Word> = [(0, 0), (1, 1), (4, 1), (10, 0)]
            .iter()
            .map(|&(id, a)| ((id * 2 + a) % 4) as Word)
            .collect();
        assert_eq!(cw, expected);

        let one = generate_random_code(p(1, 2, 1), 5).unwrap();
        assert_eq!(
            encode(&one, &[1]).unwrap(),
            vec![one.label(NodeIndex::ROOT, 1)]
        );

        assert!(matches!(encode(&code, &[0, 1]), Err(CodeError::Input(_))));
        assert!(matches!(
            encode(&code, &[0, 1, 2, 0]),
            Err(CodeError::Input(_))
        ));
    }

    #[test]
    fn encode_matches_branch_walk() {
        let code = generate_random_code(p(2, 3, 5), 11).unwrap();
        let info = vec![3, 0, 2, 1, 1];
        let mut path = NodePath::root();
        let mut walked = Vec::new();
        for &a in &info {
            walked.push(code.branch_label(&path, a).unwrap());
            path = path.child(a);
        }
        assert_eq!(encode(&code, &info).unwrap(), walked);
    }

    #[test]
    fn save_load_round_trip() {
        let code = generate_random_code(p(1, 2, 10), 42).unwrap();
        let mut buf = Vec::new();
        write_code(&code, &mut buf).unwrap();
        let back = read_code(buf.as_slice()).unwrap();
        assert_eq!(back, code);

        let wide = generate_random_code(p(2, 40, 3), 9).unwrap();
        let mut buf = Vec::new();
        write_code(&wide, &mut buf).unwrap();
        assert_eq!(read_code(buf.as_slice()).unwrap(), wide);
    }

    #[test]
    fn accepts_hand_written_file() {
        let mut text = String::from("# example\nk=1\nn=2\nd=4\n");
        for i in 0..30 {
            text.push_str(&format!("{:02b}\n", i % 4));
        }
        let code = read_code(text.as_bytes()).unwrap();
        assert_eq!(code.params(), &p(1, 2, 4));
        assert_eq!(code.seed(), None);
    }

    #[test]
    fn rejects_malformed_files() {
        let mut text = String::from("k=1\nn=2\nd=4\n");
        for _ in 0..29 {
            text.push_str("01\n");
        }
        assert!(matches!(
            read_code(text.as_bytes()),
            Err(CodeError::Validation(_))
        ));
        let bad_width = "k=1\nn=2\nd=1\n01\n011\n";
        assert!(matches!(
            read_code(bad_width.as_bytes()),
            Err(CodeError::Parse { line: 5, .. })
        ));
        let bad_key = "k=1\nq=2\n";
        assert!(matches!(
            read_code(bad_key.as_bytes()),
            Err(CodeError::Parse { line: 2, .. })
        ));
        let no_header = "01\n";
        assert!(matches!(
            read_code(no_header.as_bytes()),
            Err(CodeError::Parse { line: 1, .. })
        ));
        let too_many = "k=1\nn=2\nd=1\n01\n10\n11\n";
        assert!(matches!(
            read_code(too_many.as_bytes()),
            Err(CodeError::Validation(_))
        ));
    }

    #[test]
    fn collision_diagnostic() {
        let params = p(1, 1, 2);
        let same = TreeCode::from_labels(params, vec![0; 6], None).unwrap();
        assert_eq!(
            find_codeword_collision(&same).unwrap(),
            Some((vec![0, 0], vec![0, 1]))
        );
        // Root labels 0/1, depth-2 labels distinct per node.
        let distinct = TreeCode::from_labels(params, vec![0, 1, 0, 1, 0, 1], None).unwrap();
        assert_eq!(find_codeword_collision(&distinct).unwrap(), None);
    }

    #[test]
    fn single_member_pool_is_returned() {
        let params = p(1, 2, 6);
        let sel = select_best_code_detailed(params, 1, 10, 0.1, 5).unwrap();
        assert_eq!(sel.index, 0);
        assert_eq!(
            sel.code,
            generate_random_code(params, pool_member_seed(5, 0)).unwrap()
        );
    }

    #[test]
    fn pool_rejects_bad_arguments() {
        let params = p(1, 2, 4);
        assert!(select_best_code(params, 0, 10, 0.1, 1).is_err());
        assert!(select_best_code(params, 2, 10, 0.7, 1).is_err());
    }

    #[test]
    fn noiseless_pool_picks_first_zero_error_code() {
        let params = p(1, 2, 6);
        let sel = select_best_code_detailed(params, 6, 50, 0.0, 3).unwrap();
        let first_zero = sel.bers.iter().position(|&b| b == 0.0);
        if let Some(i) = first_zero {
            assert_eq!(sel.index, i);
        }
        for i in 0..6 {
            let code = generate_random_code(params, sel.seeds[i]).unwrap();
            if find_codeword_collision(&code).unwrap().is_none() {
                assert_eq!(sel.bers[i], 0.0);
            }
        }
    }
}
