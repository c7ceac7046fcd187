//! The `treemcts` command-line front end.
//!
//! Codeword and received files hold one `n`-bit binary string per line.
//! Information sequences are comma- or whitespace-separated symbols.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::channel::{transmit_bsc, ChannelConfig, ChannelError, ReceivedSequence};
use crate::codebook::{
    encode, generate_random_code, load_code, parse_word, save_code, select_best_code_detailed,
    CodeError, CodeParams, Symbol, TreeCode, Word,
};
use crate::experiment::{
    compare_reports, emit_reports, parse_csv, parse_experiment_file, parse_policy,
    reports_from_csv, run_experiment_with_code, write_reports, BerReport, CodeSource, DecoderSpec,
    ExperimentError, MctsSettings, ReportFormat,
};
use crate::mlsd::{brute_force_decode, mlsd_decode, sliding_window_full_search, MlsdError};
use crate::modes::{decode_single_round, decode_sliding_root, DecodeError, DecodeResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Exact(#[from] MlsdError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Usage(#[from] clap::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "treemcts",
    version,
    about = "Tree codes over a binary symmetric channel, decoded by exhaustive search or Monte-Carlo tree search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random tree code and write it to a file.
    GenCode {
        #[command(flatten)]
        shape: Shape,
        /// Code seed; chosen at random and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Output code file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a pool of random codes and keep the one with the lowest exact-decoding error rate.
    SelectCode {
        #[command(flatten)]
        shape: Shape,
        /// Number of random codes in the pool.
        #[arg(long, default_value_t = 50)]
        pool_size: usize,
        /// Monte-Carlo trials per pool member.
        #[arg(long, default_value_t = 10_000)]
        trials_per_code: usize,
        /// Crossover probability used for selection.
        #[arg(long)]
        p: f64,
        /// Pool seed; chosen at random and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Output code file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode an information sequence.
    Encode {
        /// Code file.
        #[arg(long)]
        code: PathBuf,
        /// Information symbols, e.g. "0,1,1,0".
        #[arg(long)]
        info: String,
        /// Codeword file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pass a codeword through a binary symmetric channel.
    Transmit {
        /// Codeword file.
        #[arg(long)]
        input: PathBuf,
        /// Crossover probability in [0, 0.5].
        #[arg(long)]
        p: f64,
        /// Noise seed; chosen at random and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Received-sequence file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a received sequence and print the information estimates.
    Decode {
        /// Code file.
        #[arg(long)]
        code: PathBuf,
        /// Received-sequence file.
        #[arg(long)]
        received: PathBuf,
        /// mlsd, brute, sliding-window, mcts-single, mcts-sliding or mcts-anytime.
        #[arg(long, default_value = "mlsd")]
        decoder: String,
        #[command(flatten)]
        search: SearchArgs,
        /// Decoder seed; chosen at random and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the experiments described by a TOML file.
    Experiment {
        /// Experiment file.
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count of every run.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the output file; `-` or no file at all means standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the output format: csv or json-lines.
        #[arg(long)]
        format: Option<ReportFormat>,
    },
    /// Compare the final per-bit error rates of two CSV reports.
    Compare {
        /// First report (one decoder and m).
        a: PathBuf,
        /// Second report (one decoder and m).
        b: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Shape {
    /// Information bits per branch.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Code bits per branch.
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// Tree depth.
    #[arg(long)]
    pub d: u32,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Search rounds per decoding round.
    #[arg(long)]
    pub m: Option<u64>,
    /// Exploration constant; defaults to the search depth.
    #[arg(long)]
    pub c: Option<f64>,
    /// Window depth of the sliding-window decoder.
    #[arg(long)]
    pub window: Option<u32>,
    /// Search depth of sliding-root decoding; defaults to the remaining depth.
    #[arg(long)]
    pub search_depth: Option<u32>,
    /// Rollout policy: uniform or round-robin.
    #[arg(long, default_value = "uniform")]
    pub policy: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

/// Auto-chosen seeds go to standard error so they never mix with data output.
fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed={s}");
        s
    })
}

/// Parses information symbols separated by commas or whitespace.
pub fn parse_info(text: &str, params: &CodeParams) -> Result<Vec<Symbol>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Symbol>()
                .map_err(|_| CliError::Input(format!("bad information symbol {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|info| {
            if info.len() != params.d() as usize {
                Err(CliError::Input(format!(
                    "expected {} information symbols, found {}",
                    params.d(),
                    info.len()
                )))
            } else {
                Ok(info)
            }
        })
}

/// Reads a file of binary strings, all of the same width.
pub fn read_words(path: &Path) -> Result<(u32, Vec<Word>), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let width = lines
        .first()
        .map(|l| l.len() as u32)
        .ok_or_else(|| CliError::Input(format!("{}: no symbols", path.display())))?;
    let words = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            parse_word(l, width)
                .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<_, _>>()?;
    Ok((width, words))
}

fn write_words(
    words: &[Word],
    n: u32,
    dest: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let width = n as usize;
    let text: String = words.iter().map(|w| format!("{w:0width$b}\n")).collect();
    match dest {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => stdout.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

fn format_symbols(s: &[Symbol]) -> String {
    s.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn decode(
    code: &TreeCode,
    rx: &ReceivedSequence,
    decoder: &DecoderSpec,
    settings: &MctsSettings,
    seed: u64,
) -> Result<DecodeResult, CliError> {
    let params = settings.to_params();
    let exact = |estimates| DecodeResult {
        estimates,
        snapshots: None,
        soft: None,
        rounds: 1,
        effort: Default::default(),
    };
    Ok(match *decoder {
        DecoderSpec::Mlsd => exact(mlsd_decode(code, rx)?),
        DecoderSpec::BruteForce => exact(brute_force_decode(code, rx)?),
        DecoderSpec::SlidingWindow { window } => {
            exact(sliding_window_full_search(code, rx, window)?)
        }
        DecoderSpec::MctsSingle { m } => decode_single_round(code, rx, m, &params, seed)?,
        DecoderSpec::MctsSliding { m, search_depth } => {
            decode_sliding_root(code, rx, m, search_depth, &params, seed)?
        }
        DecoderSpec::MctsAnytime { m } => {
            crate::modes::decode_anytime(code, rx.symbols().iter().copied(), m, &params, seed)?
        }
    })
}

fn load_reports(path: &Path) -> Result<Vec<BerReport>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(reports_from_csv(&parse_csv(file)?)?)
}

fn single_report(path: &Path) -> Result<BerReport, CliError> {
    let mut reports = load_reports(path)?;
    if reports.len() != 1 {
        return Err(CliError::Input(format!(
            "{}: expected one decoder and m, found {}",
            path.display(),
            reports.len()
        )));
    }
    Ok(reports.remove(0))
}

/// Runs one command line, writing normal output to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::GenCode { shape, seed, out } => {
            let params = CodeParams::new(shape.k, shape.n, shape.d)?;
            let seed = seed_or_random(seed);
            let code = generate_random_code(params, seed)?;
            save_code(&code, &out)?;
        }
        Command::SelectCode {
            shape,
            pool_size,
            trials_per_code,
            p,
            seed,
            out,
        } => {
            let params = CodeParams::new(shape.k, shape.n, shape.d)?;
            let seed = seed_or_random(seed);
            let sel = select_best_code_detailed(params, pool_size, trials_per_code, p, seed)?;
            save_code(&sel.code, &out)?;
            writeln!(
                stdout,
                "selected pool member {} (code seed {}, error rate {})",
                sel.index, sel.seeds[sel.index], sel.bers[sel.index]
            )
            .map_err(stdout_err)?;
        }
        Command::Encode { code, info, out } => {
            let code = load_code(&code)?;
            let info = parse_info(&info, code.params())?;
            let cw = encode(&code, &info)?;
            write_words(&cw, code.params().n(), out.as_deref(), stdout)?;
        }
        Command::Transmit {
            input,
            p,
            seed,
            out,
        } => {
            let (n, words) = read_words(&input)?;
            let seed = seed_or_random(seed);
            let rx = transmit_bsc(&words, n, &ChannelConfig::new(p, seed)?)?;
            write_words(rx.symbols(), n, out.as_deref(), stdout)?;
        }
        Command::Decode {
            code,
            received,
            decoder,
            search,
            seed,
        } => {
            let code = load_code(&code)?;
            let (n, words) = read_words(&received)?;
            if n != code.params().n() {
                return Err(CliError::Input(format!(
                    "received words have {n} bits, code has n={}",
                    code.params().n()
                )));
            }
            let rx = ReceivedSequence::new(n, words)?;
            let spec =
                DecoderSpec::from_name(&decoder, search.m, search.window, search.search_depth)?;
            let settings = MctsSettings {
                c: search.c,
                policy: parse_policy(&search.policy)?,
                ..MctsSettings::default()
            };
            let seed = if spec.is_search() {
                seed_or_random(seed)
            } else {
                0
            };
            let result = decode(&code, &rx, &spec, &settings, seed)?;
            writeln!(stdout, "{}", format_symbols(&result.estimates)).map_err(stdout_err)?;
        }
        Command::Experiment {
            config,
            trials,
            out,
            format,
        } => {
            let file = parse_experiment_file(&config)?;
            let mut reports = Vec::with_capacity(file.runs.len());
            let mut built: Option<(CodeSource, TreeCode)> = None;
            for mut run in file.runs {
                if let Some(t) = trials {
                    run.trials = t;
                }
                let code = match built.take() {
                    Some((source, code)) if source == run.code => code,
                    _ => run.code.build()?,
                };
                reports.push(run_experiment_with_code(&code, &run)?);
                built = Some((run.code, code));
            }
            let format = format.unwrap_or(file.format);
            match out.or(file.out) {
                Some(path) if path != Path::new("-") => emit_reports(&reports, format, &path)?,
                _ => write_reports(&reports, format, BufWriter::new(stdout))?,
            }
        }
        Command::Compare { a, b } => {
            let (ra, rb) = (single_report(&a)?, single_report(&b)?);
            let cmp = compare_reports(&ra, &rb)?;
            writeln!(stdout, "bit,ber_a,ber_b,ratio,difference,significance")
                .map_err(stdout_err)?;
            for bit in &cmp.bits {
                let sig = if bit.a_significantly_lower {
                    "a-lower"
                } else if bit.a_significantly_higher {
                    "a-higher"
                } else {
                    "none"
                };
                writeln!(
                    stdout,
                    "{},{},{},{},{},{}",
                    bit.bit, bit.ber_a, bit.ber_b, bit.ratio, bit.difference, sig
                )
                .map_err(stdout_err)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn every_flag_is_documented() {
        let cmd = Cli::command();
        cmd.clone().debug_assert();
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "{}", sub.get_name());
            for arg in sub.get_arguments() {
                assert!(
                    arg.get_help().is_some(),
                    "{} --{} has no help",
                    sub.get_name(),
                    arg.get_id()
                );
            }
        }
    }

    #[test]
    fn info_parsing() {
        let p = CodeParams::new(1, 2, 4).unwrap();
        assert_eq!(parse_info("0,1, 1 0", &p).unwrap(), vec![0, 1, 1, 0]);
        assert!(parse_info("0,1", &p).is_err());
        assert!(parse_info("0,1,x,0", &p).is_err());
    }
}
