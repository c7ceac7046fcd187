//! Tree codes and their decoders.
//!
//! A rate `k/n` tree code of depth `d` is a regular `2^k`-ary tree whose
//! branches carry `n`-bit labels. Encoding walks the tree along the
//! information symbols and emits the labels it passes. Decoding over a
//! binary symmetric channel is a search for the root-to-leaf path whose
//! labels are closest (in Hamming distance) to the received symbols.
//!
//! The crate provides:
//!
//! - [`codebook`]: code parameters, random generation, pool selection,
//!   encoding and a text file format;
//! - [`channel`]: the binary symmetric channel and the per-branch reward;
//! - [`mlsd`]: exact decoding by backward dynamic programming, a brute-force
//!   oracle and the sliding-window full-search baseline;
//! - [`mcts`]: the Monte-Carlo tree search core (UCB selection, expansion,
//!   default-policy rollouts);
//! - [`modes`]: single-round, sliding-root and anytime decoding plus soft
//!   output;
//! - [`experiment`]: a seeded Monte-Carlo BER harness with CSV / JSON-lines
//!   output;
//! - [`cli`]: the `treemcts` command-line front end.

pub mod channel;
pub mod cli;
pub mod codebook;
pub mod experiment;
pub mod mcts;
pub mod mlsd;
pub mod modes;
pub mod seeds;
pub mod stats;

pub use channel::{reward, transmit_bsc, ChannelConfig, ChannelError, ReceivedSequence};
pub use codebook::{
    encode, generate_random_code, load_code, save_code, select_best_code, CodeError, CodeParams,
    NodeIndex, NodePath, Symbol, TreeCode, Word,
};
pub use experiment::{
    compare_reports, emit_report, run_experiment, BerReport, DecoderSpec, ExperimentConfig,
    ExperimentError, ReportFormat,
};
pub use mcts::{ExplorePolicy, MctsParams, Prior, SearchStats};
pub use mlsd::{brute_force_decode, mlsd_decode, sliding_window_full_search, DpTables, MlsdError};
pub use modes::{
    decode_anytime, decode_single_round, decode_sliding_root, soft_output, DecodeError,
    DecodeResult, SoftOutput,
};
