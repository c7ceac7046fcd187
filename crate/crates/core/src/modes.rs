//! Decoding orchestrations built on the search core.
//!
//! - [`decode_single_round`]: `m` searches from the root to the leaves, then a
//!   greedy read-out of all `d` symbols.
//! - [`decode_sliding_root`]: `d` decoding rounds; round `i` searches below the
//!   node fixed by the symbols already committed and commits symbol `i`.
//! - [`decode_anytime`] / [`AnytimeDecoder`]: round `i` starts as soon as
//!   `y_i` arrives, searches from the root to depth `i` and re-decodes the
//!   whole prefix `1..i`.
//!
//! Round `i` of a decode draws from `seeds::round_rng(seed, i)`. The single
//! round of [`decode_single_round`] is keyed as round `d`, the same key as the
//! last anytime round.

use serde::Serialize;
use thiserror::Error;

use crate::codebook::{NodeIndex, Symbol, TreeCode, Word};
use crate::mcts::{greedy_path, MctsError, MctsParams, SearchEffort, SearchStats, Searcher};
use crate::seeds::round_rng;
use crate::ReceivedSequence;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Search(#[from] MctsError),
}

/// Per-action probabilities at one node, proportional to `exp(beta Q(s, a))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SoftOutput {
    pub probs: Vec<f64>,
    pub beta: f64,
}

impl SoftOutput {
    /// Lowest-index most probable action.
    pub fn hard_decision(&self) -> Symbol {
        let mut best = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = a;
            }
        }
        best as Symbol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeResult {
    pub estimates: Vec<Symbol>,
    /// Anytime mode: `snapshots[i - 1]` is the prefix decoded in round `i`.
    pub snapshots: Option<Vec<Vec<Symbol>>>,
    /// Sliding-root mode with soft output: distribution over symbol `i` at
    /// the root of round `i`.
    pub soft: Option<Vec<SoftOutput>>,
    /// Number of decoding rounds.
    pub rounds: u32,
    pub effort: SearchEffort,
}

/// Softmax of `beta * Q(s, .)` at an expanded node, shifted by the maximum.
pub fn soft_output(
    stats: &SearchStats,
    node: NodeIndex,
    beta: f64,
) -> Result<SoftOutput, DecodeError> {
    let q = stats.q_values(node).ok_or(MctsError::NotExpanded(node))?;
    Ok(softmax(q, beta))
}

pub(crate) fn softmax(q: &[f64], beta: f64) -> SoftOutput {
    let shift = q
        .iter()
        .map(|&v| beta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = q.iter().map(|&v| (beta * v - shift).exp()).collect();
    let z: f64 = weights.iter().sum();
    SoftOutput {
        probs: weights.into_iter().map(|w| w / z).collect(),
        beta,
    }
}

fn check_rounds(m: u64) -> Result<(), DecodeError> {
    if m == 0 {
        Err(DecodeError::Input(
            "at least one round of search is required".into(),
        ))
    } else {
        Ok(())
    }
}

fn check_received(code: &TreeCode, received: &ReceivedSequence) -> Result<(), DecodeError> {
    let params = code.params();
    if received.n() != params.n() {
        return Err(DecodeError::Input(format!(
            "received words have {} bits, code uses n={}",
            received.n(),
            params.n()
        )));
    }
    if received.len() != params.d() as usize {
        return Err(DecodeError::Input(format!(
            "received {} symbols for a depth-{} code",
            received.len(),
            params.d()
        )));
    }
    Ok(())
}

/// Single-round decoding: `m` searches from the root over the full depth,
/// then a greedy walk over `Q`.
pub fn decode_single_round(
    code: &TreeCode,
    received: &ReceivedSequence,
    m: u64,
    params: &MctsParams,
    seed: u64,
) -> Result<DecodeResult, DecodeError> {
    check_received(code, received)?;
    check_rounds(m)?;
    params.validate()?;
    let d = code.params().d();
    let mut stats = SearchStats::new(code.params(), params);
    let searcher = Searcher::new(code, received.symbols(), params, params.c_for_depth(d));
    let mut rng = round_rng(seed, d as u64);
    searcher.run(&mut stats, NodeIndex::ROOT, d, m, &mut rng);
    Ok(DecodeResult {
        estimates: greedy_path(&stats, NodeIndex::ROOT, d),
        snapshots: None,
        soft: None,
        rounds: 1,
        effort: *stats.effort(),
    })
}

/// Sliding-root decoding. Round `i` searches `m_per_round` times below the
/// node fixed by `a_1..a_{i-1}`, to depth `min(search_depth, d + 1 - i)`,
/// and commits `a_i`.
pub fn decode_sliding_root(
    code: &TreeCode,
    received: &ReceivedSequence,
    m_per_round: u64,
    search_depth: Option<u32>,
    params: &MctsParams,
    seed: u64,
) -> Result<DecodeResult, DecodeError> {
    sliding_root(
        code,
        received,
        m_per_round,
        search_depth,
        params,
        seed,
        None,
    )
}

/// [`decode_sliding_root`] also reporting, for every symbol, the soft output
/// at the root of the round that committed it.
pub fn decode_sliding_root_soft(
    code: &TreeCode,
    received: &ReceivedSequence,
    m_per_round: u64,
    search_depth: Option<u32>,
    params: &MctsParams,
    seed: u64,
    beta: f64,
) -> Result<DecodeResult, DecodeError> {
    sliding_root(
        code,
        received,
        m_per_round,
        search_depth,
        params,
        seed,
        Some(beta),
    )
}

fn sliding_root(
    code: &TreeCode,
    received: &ReceivedSequence,
    m_per_round: u64,
    search_depth: Option<u32>,
    params: &MctsParams,
    seed: u64,
    beta: Option<f64>,
) -> Result<DecodeResult, DecodeError> {
    check_received(code, received)?;
    check_rounds(m_per_round)?;
    params.validate()?;
    if search_depth == Some(0) {
        return Err(DecodeError::Input("search depth must be at least 1".into()));
    }
    let cp = code.params();
    let d = cp.d();
    let mut root = NodeIndex::ROOT;
    let mut estimates = Vec::with_capacity(d as usize);
    let mut soft = beta.map(|_| Vec::with_capacity(d as usize));
    let mut effort = SearchEffort::default();
    let mut stats = SearchStats::new(cp, params);
    for i in 1..=d {
        if i > 1 && !params.reuse_stats {
            effort.add(stats.effort());
            stats = SearchStats::new(cp, params);
        }
        let depth = search_depth.map_or(d + 1 - i, |s| s.min(d + 1 - i));
        let searcher = Searcher::new(code, received.symbols(), params, params.c_for_depth(depth));
        let mut rng = round_rng(seed, i as u64);
        searcher.run(&mut stats, root, depth, m_per_round, &mut rng);
        let a = greedy_path(&stats, root, 1)[0];
        if let (Some(out), Some(beta)) = (soft.as_mut(), beta) {
            out.push(soft_output(&stats, root, beta)?);
        }
        estimates.push(a);
        root = root.child(cp.k(), a);
    }
    effort.add(stats.effort());
    Ok(DecodeResult {
        estimates,
        snapshots: None,
        soft,
        rounds: d,
        effort,
    })
}

/// Incremental anytime decoder: feed received words one at a time.
pub struct AnytimeDecoder<'a> {
    code: &'a TreeCode,
    params: &'a MctsParams,
    m_per_round: u64,
    seed: u64,
    received: Vec<Word>,
    snapshots: Vec<Vec<Symbol>>,
    stats: SearchStats,
    effort: SearchEffort,
}

impl<'a> AnytimeDecoder<'a> {
    pub fn new(
        code: &'a TreeCode,
        m_per_round: u64,
        params: &'a MctsParams,
        seed: u64,
    ) -> Result<Self, DecodeError> {
        check_rounds(m_per_round)?;
        params.validate()?;
        Ok(Self {
            code,
            params,
            m_per_round,
            seed,
            received: Vec::with_capacity(code.params().d() as usize),
            snapshots: Vec::with_capacity(code.params().d() as usize),
            stats: SearchStats::new(code.params(), params),
            effort: SearchEffort::default(),
        })
    }

    /// Runs the decoding round triggered by `y` and returns its snapshot.
    pub fn push(&mut self, y: Word) -> Result<&[Symbol], DecodeError> {
        let cp = self.code.params();
        if self.received.len() == cp.d() as usize {
            return Err(DecodeError::Input(format!(
                "more than d={} received symbols",
                cp.d()
            )));
        }
        if y & !cp.word_mask() != 0 {
            return Err(DecodeError::Input(format!(
                "received word wider than n={}",
                cp.n()
            )));
        }
        self.received.push(y);
        let round = self.received.len() as u32;
        if round > 1 && !self.params.reuse_stats {
            self.effort.add(self.stats.effort());
            self.stats = SearchStats::new(cp, self.params);
        }
        let searcher = Searcher::new(
            self.code,
            &self.received,
            self.params,
            self.params.c_for_depth(round),
        );
        let mut rng = round_rng(self.seed, round as u64);
        searcher.run(
            &mut self.stats,
            NodeIndex::ROOT,
            round,
            self.m_per_round,
            &mut rng,
        );
        self.snapshots
            .push(greedy_path(&self.stats, NodeIndex::ROOT, round));
        Ok(self.snapshots.last().expect("just pushed"))
    }

    pub fn snapshots(&self) -> &[Vec<Symbol>] {
        &self.snapshots
    }

    /// Statistics of the latest round.
    pub fn stats(&self) -> &SearchStats {
        &self.stats
    }

    pub fn finish(mut self) -> Result<DecodeResult, DecodeError> {
        let d = self.code.params().d() as usize;
        if self.snapshots.len() != d {
            return Err(DecodeError::Input(format!(
                "stream ended after {} of {d} symbols",
                self.snapshots.len()
            )));
        }
        self.effort.add(self.stats.effort());
        Ok(DecodeResult {
            estimates: self.snapshots[d - 1].clone(),
            rounds: d as u32,
            snapshots: Some(self.snapshots),
            soft: None,
            effort: self.effort,
        })
    }
}

/// Anytime decoding over a stream of received words `y_1..y_d`.
pub fn decode_anytime<I: IntoIterator<Item = Word>>(
    code: &TreeCode,
    received_stream: I,
    m_per_round: u64,
    params: &MctsParams,
    seed: u64,
) -> Result<DecodeResult, DecodeError> {
    let mut decoder = AnytimeDecoder::new(code, m_per_round, params, seed)?;
    for y in received_stream {
        decoder.push(y)?;
    }
    decoder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{encode, generate_random_code, CodeParams};

    fn setup(d: u32, seed: u64) -> (TreeCode, Vec<Symbol>, ReceivedSequence) {
        let code = generate_random_code(CodeParams::new(1, 2, d).unwrap(), seed).unwrap();
        let info: Vec<Symbol> = (0..d).map(|i| ((seed >> (i % 60)) & 1) as Symbol).collect();
        let rx = ReceivedSequence::new(2, encode(&code, &info).unwrap()).unwrap();
        (code, info, rx)
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&[0.3, 7.0], 0.0);
        assert_eq!(s.probs, vec![0.5, 0.5]);
        let s = softmax(&[2.0, 1.0], 1.0);
        assert!((s.probs[0] - 0.731_058_578_630_004_8).abs() < 1e-12);
        assert!((s.probs[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
        let mut last = 0.0;
        for beta in [0.5, 1.0, 5.0, 50.0, 500.0] {
            let p = softmax(&[3.0, 1.0], beta).probs[0];
            assert!(p > last || p == 1.0);
            last = p;
        }
        assert!((last - 1.0).abs() < 1e-12);
        let big = softmax(&[1e6, 1e6 - 1.0], 1.0);
        assert!((big.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_output_requires_expanded_node() {
        let (code, _, _) = setup(3, 1);
        let stats = SearchStats::new(code.params(), &MctsParams::default());
        assert!(soft_output(&stats, NodeIndex::ROOT, 1.0).is_err());
    }

    #[test]
    fn one_round_gives_all_zero_path() {
        let (code, _, rx) = setup(6, 3);
        let out = decode_single_round(&code, &rx, 1, &MctsParams::default(), 9).unwrap();
        assert_eq!(out.estimates, vec![0; 6]);
        assert_eq!(out.effort.expansions, 1);
    }

    #[test]
    fn sliding_root_with_unit_depth_matches_single_round() {
        for seed in 0..10 {
            let (code, _, rx) = setup(1, seed);
            let params = MctsParams::default();
            let a = decode_single_round(&code, &rx, 7, &params, seed).unwrap();
            let b = decode_sliding_root(&code, &rx, 7, None, &params, seed).unwrap();
            assert_eq!(a.estimates, b.estimates);
            assert_eq!(a.effort, b.effort);
        }
    }

    #[test]
    fn last_anytime_round_matches_single_round() {
        let (code, _, rx) = setup(6, 4);
        let params = MctsParams::default();
        let single = decode_single_round(&code, &rx, 40, &params, 11).unwrap();
        let any = decode_anytime(&code, rx.symbols().iter().copied(), 40, &params, 11).unwrap();
        assert_eq!(any.estimates, single.estimates);
        let snaps = any.snapshots.unwrap();
        assert_eq!(snaps.len(), 6);
        for (i, s) in snaps.iter().enumerate() {
            assert_eq!(s.len(), i + 1);
        }
    }

    #[test]
    fn truncated_stream_gives_same_snapshots() {
        let (code, _, rx) = setup(8, 5);
        let params = MctsParams::default();
        let full = decode_anytime(&code, rx.symbols().iter().copied(), 30, &params, 2).unwrap();
        let mut dec = AnytimeDecoder::new(&code, 30, &params, 2).unwrap();
        for &y in &rx.symbols()[..5] {
            dec.push(y).unwrap();
        }
        assert_eq!(dec.snapshots(), &full.snapshots.unwrap()[..5]);
        assert!(dec.finish().is_err());
    }

    #[test]
    fn soft_and_hard_decisions_agree() {
        let (code, _, rx) = setup(6, 6);
        let params = MctsParams::default();
        let out = decode_sliding_root_soft(&code, &rx, 50, None, &params, 1, 0.7).unwrap();
        let soft = out.soft.unwrap();
        for (s, &a) in soft.iter().zip(&out.estimates) {
            assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(s.hard_decision(), a);
        }
    }

    #[test]
    fn input_validation() {
        let (code, _, rx) = setup(4, 1);
        let params = MctsParams::default();
        assert!(decode_single_round(&code, &rx, 0, &params, 0).is_err());
        let short = ReceivedSequence::new(2, vec![0; 3]).unwrap();
        assert!(decode_single_round(&code, &short, 5, &params, 0).is_err());
        assert!(decode_sliding_root(&code, &rx, 5, Some(0), &params, 0).is_err());
        assert!(decode_anytime(&code, vec![0; 5], 5, &params, 0).is_err());
        assert!(decode_anytime(&code, vec![0b100], 5, &params, 0).is_err());
        assert!(decode_single_round(&code, &rx, 5, &MctsParams::with_c(-2.0), 0).is_err());
    }

    #[test]
    fn reuse_flag_carries_statistics() {
        let (code, _, rx) = setup(5, 8);
        let params = MctsParams {
            reuse_stats: true,
            ..MctsParams::default()
        };
        let out = decode_sliding_root(&code, &rx, 20, None, &params, 3).unwrap();
        assert_eq!(out.estimates.len(), 5);
        assert_eq!(out.effort.searches, 100);
        assert!(out.effort.expansions <= 100);
    }
}
