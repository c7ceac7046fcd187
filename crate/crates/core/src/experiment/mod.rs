//! Monte-Carlo error-rate harness.
//!
//! Trial `t` of an experiment draws its information sequence and channel noise
//! from streams derived from `(master_seed, t)` only, so every decoder run with
//! the same master seed sees exactly the same inputs. Decoder randomness comes
//! from a third stream derived from the same pair. Trials are spread over a
//! rayon pool and reduced with integer sums, so reports do not depend on the
//! number of worker threads.

mod config;
mod report;

use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{check_probability, transmit_bsc_with, ChannelError, ReceivedSequence};
use crate::codebook::{
    load_code, random_info, select_best_code, CodeError, CodeParams, Symbol, TreeCode,
};
use crate::mcts::{ExplorePolicy, MctsParams, Prior};
use crate::mlsd::{self, MlsdError, MAX_ENUMERATION_KD, MAX_EXACT_KD};
use crate::modes::{self, DecodeError};
use crate::seeds::{self, stream};

pub use config::{parse_experiment_file, parse_experiment_toml, parse_policy, ExperimentFile};
pub use report::{
    compare_reports, emit_report, emit_reports, parse_csv, reports_from_csv, write_reports,
    BerReport, BerRow, BitComparison, Comparison, CsvRow, EffortSummary, ReportFormat, Round,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Exact(#[from] MlsdError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("reports are not comparable: {0}")]
    Mismatch(String),
}

/// Where the code under test comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CodeSource {
    Random {
        params: CodeParams,
        seed: u64,
    },
    File(PathBuf),
    Pool {
        params: CodeParams,
        pool_size: usize,
        trials_per_code: usize,
        crossover_p: f64,
        seed: u64,
    },
}

impl CodeSource {
    pub fn build(&self) -> Result<TreeCode, CodeError> {
        match self {
            CodeSource::Random { params, seed } => {
                crate::codebook::generate_random_code(*params, *seed)
            }
            CodeSource::File(path) => load_code(path),
            CodeSource::Pool {
                params,
                pool_size,
                trials_per_code,
                crossover_p,
                seed,
            } => select_best_code(*params, *pool_size, *trials_per_code, *crossover_p, *seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DecoderSpec {
    Mlsd,
    BruteForce,
    SlidingWindow { window: u32 },
    MctsSingle { m: u64 },
    MctsSliding { m: u64, search_depth: Option<u32> },
    MctsAnytime { m: u64 },
}

impl DecoderSpec {
    /// Name used in reports and on the command line.
    pub fn label(&self) -> String {
        match self {
            DecoderSpec::Mlsd => "mlsd".into(),
            DecoderSpec::BruteForce => "brute".into(),
            DecoderSpec::SlidingWindow { window } => format!("sliding-window:w{window}"),
            DecoderSpec::MctsSingle { .. } => "mcts-single".into(),
            DecoderSpec::MctsSliding {
                search_depth: None, ..
            } => "mcts-sliding".into(),
            DecoderSpec::MctsSliding {
                search_depth: Some(s),
                ..
            } => format!("mcts-sliding:s{s}"),
            DecoderSpec::MctsAnytime { .. } => "mcts-anytime".into(),
        }
    }

    /// Rounds of search per decoding round, for the search-based decoders.
    pub fn m(&self) -> Option<u64> {
        match *self {
            DecoderSpec::MctsSingle { m }
            | DecoderSpec::MctsSliding { m, .. }
            | DecoderSpec::MctsAnytime { m } => Some(m),
            _ => None,
        }
    }

    pub fn is_search(&self) -> bool {
        self.m().is_some()
    }

    pub fn is_anytime(&self) -> bool {
        matches!(self, DecoderSpec::MctsAnytime { .. })
    }

    /// Builds a spec from a command-line decoder name.
    pub fn from_name(
        name: &str,
        m: Option<u64>,
        window: Option<u32>,
        search_depth: Option<u32>,
    ) -> Result<Self, ExperimentError> {
        let need_m = || m.ok_or_else(|| ExperimentError::Config(format!("decoder {name} needs m")));
        Ok(match name {
            "mlsd" => DecoderSpec::Mlsd,
            "brute" => DecoderSpec::BruteForce,
            "sliding-window" => DecoderSpec::SlidingWindow {
                window: window.ok_or_else(|| {
                    ExperimentError::Config("decoder sliding-window needs a window depth".into())
                })?,
            },
            "mcts-single" => DecoderSpec::MctsSingle { m: need_m()? },
            "mcts-sliding" => DecoderSpec::MctsSliding {
                m: need_m()?,
                search_depth,
            },
            "mcts-anytime" => DecoderSpec::MctsAnytime { m: need_m()? },
            other => {
                return Err(ExperimentError::Config(format!(
                    "unknown decoder {other:?} (expected mlsd, brute, sliding-window, \
                     mcts-single, mcts-sliding or mcts-anytime)"
                )))
            }
        })
    }
}

/// Plain-data search settings; see [`MctsParams`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MctsSettings {
    pub c: Option<f64>,
    pub policy: ExplorePolicy,
    pub q0: f64,
    pub n0: u64,
    pub explore_depth_cap: Option<u32>,
}

impl Default for MctsSettings {
    fn default() -> Self {
        Self {
            c: None,
            policy: ExplorePolicy::UniformRandom,
            q0: 0.0,
            n0: 0,
            explore_depth_cap: None,
        }
    }
}

impl MctsSettings {
    pub fn to_params(&self) -> MctsParams {
        MctsParams {
            exploration_c: self.c,
            init_n: if self.n0 == 0 {
                Prior::Zero
            } else {
                Prior::Constant(self.n0)
            },
            init_q: if self.q0 == 0.0 {
                Prior::Zero
            } else {
                Prior::Constant(self.q0)
            },
            explore_policy: self.policy,
            explore_depth_cap: self.explore_depth_cap,
            reuse_stats: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub code: CodeSource,
    pub crossover_p: f64,
    pub decoder: DecoderSpec,
    pub trials: u64,
    pub master_seed: u64,
    pub mcts: MctsSettings,
}

/// Trial count used when a configuration does not give one.
pub fn default_trials(d: u32) -> u64 {
    if d <= 16 {
        20_000
    } else {
        5_000
    }
}

/// Information sequence and channel output of trial `t`.
pub fn trial_input(
    code: &TreeCode,
    crossover_p: f64,
    master_seed: u64,
    t: u64,
) -> Result<(Vec<Symbol>, ReceivedSequence), ExperimentError> {
    let params = code.params();
    let mut info_rng = seeds::rng_from(master_seed, &[stream::INFO, t]);
    let info = random_info(params, &mut info_rng);
    let codeword = crate::codebook::encode(code, &info)?;
    let mut noise_rng = seeds::rng_from(master_seed, &[stream::NOISE, t]);
    let received = transmit_bsc_with(&codeword, params.n(), crossover_p, &mut noise_rng)?;
    Ok((info, received))
}

/// Seed handed to the decoder in trial `t`.
pub fn decoder_seed(master_seed: u64, t: u64) -> u64 {
    seeds::derive_seed(master_seed, &[stream::DECODER, t])
}

/// Checks that `cfg` can run against `code` before any trial starts.
pub fn validate(cfg: &ExperimentConfig, code: &TreeCode) -> Result<(), ExperimentError> {
    if cfg.trials == 0 {
        return Err(ExperimentError::Config("trials must be at least 1".into()));
    }
    check_probability(cfg.crossover_p)?;
    let params = code.params();
    let kd = params.k() * params.d();
    match cfg.decoder {
        DecoderSpec::Mlsd if kd > MAX_EXACT_KD => {
            return Err(MlsdError::TreeTooLarge {
                leaves_log2: kd,
                limit: MAX_EXACT_KD,
            }
            .into())
        }
        DecoderSpec::BruteForce if kd > MAX_ENUMERATION_KD => {
            return Err(MlsdError::TreeTooLarge {
                leaves_log2: kd,
                limit: MAX_ENUMERATION_KD,
            }
            .into())
        }
        DecoderSpec::SlidingWindow { window } => {
            if window == 0 {
                return Err(ExperimentError::Config(
                    "window depth must be at least 1".into(),
                ));
            }
            if params.k() * window.min(params.d()) > MAX_EXACT_KD {
                return Err(MlsdError::TreeTooLarge {
                    leaves_log2: params.k() * window,
                    limit: MAX_EXACT_KD,
                }
                .into());
            }
        }
        DecoderSpec::MctsSingle { m }
        | DecoderSpec::MctsSliding { m, .. }
        | DecoderSpec::MctsAnytime { m } => {
            if m == 0 {
                return Err(ExperimentError::Config("m must be at least 1".into()));
            }
            if let DecoderSpec::MctsSliding {
                search_depth: Some(0),
                ..
            } = cfg.decoder
            {
                return Err(ExperimentError::Config(
                    "search depth must be at least 1".into(),
                ));
            }
            cfg.mcts.to_params().validate().map_err(DecodeError::from)?;
        }
        _ => {}
    }
    Ok(())
}

/// Per-trial outcome: one error flag per counted (bit, round) cell.
struct TrialOutcome {
    errors: Vec<bool>,
    expansions: u64,
    reward_evals: u64,
    q_entries: u64,
}

#[derive(Clone)]
struct Tally {
    errors: Vec<u64>,
    expansions: u64,
    reward_evals: u64,
    q_entries: u64,
    max_expansions: u64,
    max_reward_evals: u64,
    max_q_entries: u64,
}

impl Tally {
    fn new(cells: usize) -> Self {
        Self {
            errors: vec![0; cells],
            expansions: 0,
            reward_evals: 0,
            q_entries: 0,
            max_expansions: 0,
            max_reward_evals: 0,
            max_q_entries: 0,
        }
    }

    fn record(mut self, t: TrialOutcome) -> Self {
        for (e, &flag) in self.errors.iter_mut().zip(&t.errors) {
            *e += flag as u64;
        }
        self.expansions += t.expansions;
        self.reward_evals += t.reward_evals;
        self.q_entries += t.q_entries;
        self.max_expansions = self.max_expansions.max(t.expansions);
        self.max_reward_evals = self.max_reward_evals.max(t.reward_evals);
        self.max_q_entries = self.max_q_entries.max(t.q_entries);
        self
    }

    fn merge(mut self, other: Tally) -> Self {
        for (e, o) in self.errors.iter_mut().zip(other.errors) {
            *e += o;
        }
        self.expansions += other.expansions;
        self.reward_evals += other.reward_evals;
        self.q_entries += other.q_entries;
        self.max_expansions = self.max_expansions.max(other.max_expansions);
        self.max_reward_evals = self.max_reward_evals.max(other.max_reward_evals);
        self.max_q_entries = self.max_q_entries.max(other.max_q_entries);
        self
    }
}

/// Cells of the anytime triangle `(bit i, round j)`, `1 <= i <= j <= d`,
/// ordered by bit and then round.
fn anytime_cells(d: u32) -> Vec<(u32, u32)> {
    (1..=d).flat_map(|i| (i..=d).map(move |j| (i, j))).collect()
}

fn run_trial(
    code: &TreeCode,
    cfg: &ExperimentConfig,
    params: &MctsParams,
    cells: &[(u32, u32)],
    t: u64,
) -> Result<TrialOutcome, ExperimentError> {
    let (info, received) = trial_input(code, cfg.crossover_p, cfg.master_seed, t)?;
    let seed = decoder_seed(cfg.master_seed, t);
    let per_bit =
        |est: &[Symbol]| -> Vec<bool> { info.iter().zip(est).map(|(a, b)| a != b).collect() };
    let words = received.symbols();
    let outcome = match cfg.decoder {
        DecoderSpec::Mlsd => {
            let out = mlsd::mlsd_decode_words(code, words)?;
            TrialOutcome {
                errors: per_bit(&out.actions),
                expansions: 0,
                reward_evals: 0,
                q_entries: out.q_entries,
            }
        }
        DecoderSpec::BruteForce => TrialOutcome {
            errors: per_bit(&mlsd::brute_force_decode(code, &received)?),
            expansions: 0,
            reward_evals: 0,
            q_entries: 0,
        },
        DecoderSpec::SlidingWindow { window } => {
            let out = mlsd::sliding_window_words(code, words, window)?;
            TrialOutcome {
                errors: per_bit(&out.actions),
                expansions: 0,
                reward_evals: 0,
                q_entries: out.q_entries,
            }
        }
        DecoderSpec::MctsSingle { m } => {
            let out = modes::decode_single_round(code, &received, m, params, seed)?;
            TrialOutcome {
                errors: per_bit(&out.estimates),
                expansions: out.effort.expansions,
                reward_evals: out.effort.reward_evals,
                q_entries: 0,
            }
        }
        DecoderSpec::MctsSliding { m, search_depth } => {
            let out = modes::decode_sliding_root(code, &received, m, search_depth, params, seed)?;
            TrialOutcome {
                errors: per_bit(&out.estimates),
                expansions: out.effort.expansions,
                reward_evals: out.effort.reward_evals,
                q_entries: 0,
            }
        }
        DecoderSpec::MctsAnytime { m } => {
            let out = modes::decode_anytime(code, words.iter().copied(), m, params, seed)?;
            let snaps = out
                .snapshots
                .as_ref()
                .expect("anytime decodes keep snapshots");
            TrialOutcome {
                errors: cells
                    .iter()
                    .map(|&(i, j)| snaps[j as usize - 1][i as usize - 1] != info[i as usize - 1])
                    .collect(),
                expansions: out.effort.expansions,
                reward_evals: out.effort.reward_evals,
                q_entries: 0,
            }
        }
    };
    Ok(outcome)
}

/// Builds the code named by `cfg` and runs the experiment on it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BerReport, ExperimentError> {
    let code = cfg.code.build()?;
    run_experiment_with_code(&code, cfg)
}

/// Runs `cfg` against an already-built code; `cfg.code` is only echoed.
pub fn run_experiment_with_code(
    code: &TreeCode,
    cfg: &ExperimentConfig,
) -> Result<BerReport, ExperimentError> {
    validate(cfg, code)?;
    let d = code.params().d();
    let params = cfg.mcts.to_params();
    let cells: Vec<(u32, u32)> = if cfg.decoder.is_anytime() {
        anytime_cells(d)
    } else {
        (1..=d).map(|i| (i, 0)).collect()
    };
    let first_error: Mutex<Option<ExperimentError>> = Mutex::new(None);
    let tally = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(code, cfg, &params, &cells, t))
        .filter_map(|r| match r {
            Ok(outcome) => Some(outcome),
            Err(e) => {
                first_error.lock().expect("poisoned").get_or_insert(e);
                None
            }
        })
        .fold(|| Tally::new(cells.len()), Tally::record)
        .reduce(|| Tally::new(cells.len()), Tally::merge);
    if let Some(e) = first_error.into_inner().expect("poisoned") {
        return Err(e);
    }

    let rows = cells
        .iter()
        .zip(&tally.errors)
        .map(|(&(bit, round), &errors)| BerRow {
            bit,
            round: if cfg.decoder.is_anytime() {
                Round::At(round)
            } else {
                Round::Final
            },
            errors,
            trials: cfg.trials,
        })
        .collect();
    let n = cfg.trials as f64;
    Ok(BerReport {
        decoder: cfg.decoder,
        params: *code.params(),
        crossover_p: cfg.crossover_p,
        c: if cfg.decoder.is_search() {
            cfg.mcts.c
        } else {
            None
        },
        trials: cfg.trials,
        master_seed: cfg.master_seed,
        code_fingerprint: Some(code.fingerprint()),
        rows,
        effort: EffortSummary {
            mean_expansions: tally.expansions as f64 / n,
            mean_reward_evals: tally.reward_evals as f64 / n,
            mean_q_entries: tally.q_entries as f64 / n,
            max_expansions: tally.max_expansions,
            max_reward_evals: tally.max_reward_evals,
            max_q_entries: tally.max_q_entries,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::generate_random_code;

    fn cfg(decoder: DecoderSpec, p: f64, trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            code: CodeSource::Random {
                params: CodeParams::new(1, 2, 6).unwrap(),
                seed: 3,
            },
            crossover_p: p,
            decoder,
            trials,
            master_seed: 77,
            mcts: MctsSettings::default(),
        }
    }

    #[test]
    fn anytime_cell_layout() {
        let cells = anytime_cells(10);
        assert_eq!(cells.len(), 55);
        assert_eq!(cells[0], (1, 1));
        assert_eq!(cells[9], (1, 10));
        assert_eq!(cells[10], (2, 2));
        assert_eq!(*cells.last().unwrap(), (10, 10));
    }

    #[test]
    fn trial_inputs_are_shared_across_decoders() {
        let code = generate_random_code(CodeParams::new(1, 2, 6).unwrap(), 3).unwrap();
        let a = trial_input(&code, 0.1, 5, 12).unwrap();
        let b = trial_input(&code, 0.1, 5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, trial_input(&code, 0.1, 5, 13).unwrap());
    }

    #[test]
    fn noiseless_exact_decoders_make_no_errors() {
        let code = generate_random_code(CodeParams::new(1, 2, 6).unwrap(), 3).unwrap();
        if crate::codebook::find_codeword_collision(&code)
            .unwrap()
            .is_some()
        {
            return;
        }
        for dec in [
            DecoderSpec::Mlsd,
            DecoderSpec::BruteForce,
            DecoderSpec::SlidingWindow { window: 6 },
        ] {
            let report = run_experiment(&cfg(dec, 0.0, 200)).unwrap();
            assert!(report.rows.iter().all(|r| r.errors == 0));
        }
    }

    #[test]
    fn config_errors_surface_before_trials() {
        assert!(matches!(
            run_experiment(&cfg(DecoderSpec::Mlsd, 0.1, 0)),
            Err(ExperimentError::Config(_))
        ));
        assert!(matches!(
            run_experiment(&cfg(DecoderSpec::MctsSingle { m: 0 }, 0.1, 5)),
            Err(ExperimentError::Config(_))
        ));
        assert!(run_experiment(&cfg(DecoderSpec::Mlsd, 0.7, 5)).is_err());
        let mut big = cfg(DecoderSpec::BruteForce, 0.1, 5);
        big.code = CodeSource::Random {
            params: CodeParams::new(1, 2, 22).unwrap(),
            seed: 1,
        };
        assert!(matches!(
            run_experiment(&big),
            Err(ExperimentError::Exact(_))
        ));
    }

    #[test]
    fn decoder_names() {
        assert_eq!(
            DecoderSpec::from_name("sliding-window", None, Some(10), None).unwrap(),
            DecoderSpec::SlidingWindow { window: 10 }
        );
        assert!(DecoderSpec::from_name("mcts-single", None, None, None).is_err());
        assert!(DecoderSpec::from_name("viterbi", Some(1), None, None).is_err());
        assert_eq!(
            DecoderSpec::MctsSliding {
                m: 3,
                search_depth: Some(4)
            }
            .label(),
            "mcts-sliding:s4"
        );
    }
}
