//! TOML experiment files.
//!
//! ```toml
//! k = 1
//! n = 2
//! d = 10
//! code_seed = 7          # or code_file = "code.txt", or pool_size = 50
//! p = 0.1
//! decoder = ["mlsd", "mcts-anytime"]
//! m = [10, 100, 1000]
//! trials = 20000
//! master_seed = 1
//! c = 10.0
//! out = "fig.csv"
//! ```
//!
//! Every search decoder is run once per listed `m`; exhaustive decoders once.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{
    default_trials, CodeSource, DecoderSpec, ExperimentConfig, ExperimentError, MctsSettings,
    ReportFormat,
};
use crate::codebook::CodeParams;
use crate::mcts::ExplorePolicy;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    k: Option<u32>,
    n: Option<u32>,
    d: Option<u32>,
    code_seed: Option<u64>,
    code_file: Option<PathBuf>,
    pool_size: Option<usize>,
    trials_per_code: Option<usize>,
    pool_p: Option<f64>,
    pool_seed: Option<u64>,
    p: f64,
    decoder: OneOrMany<String>,
    m: Option<OneOrMany<u64>>,
    window: Option<u32>,
    search_depth: Option<u32>,
    trials: Option<u64>,
    master_seed: Option<u64>,
    c: Option<f64>,
    policy: Option<String>,
    q0: Option<f64>,
    n0: Option<u64>,
    explore_depth_cap: Option<u32>,
    format: Option<String>,
    out: Option<PathBuf>,
}

/// A parsed experiment file: the runs it describes and where to write them.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentFile {
    pub runs: Vec<ExperimentConfig>,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
}

fn cfg_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

pub fn parse_policy(s: &str) -> Result<ExplorePolicy, ExperimentError> {
    match s {
        "uniform" => Ok(ExplorePolicy::UniformRandom),
        "round-robin" => Ok(ExplorePolicy::RoundRobin),
        other => Err(cfg_err(format!(
            "unknown policy {other:?} (uniform or round-robin)"
        ))),
    }
}

/// Parses TOML text. Relative `code_file` and `out` paths are taken relative
/// to `base_dir`.
pub fn parse_experiment_toml(
    text: &str,
    base_dir: &Path,
) -> Result<ExperimentFile, ExperimentError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
    let params = match (raw.k, raw.n, raw.d) {
        (Some(k), Some(n), Some(d)) => Some(CodeParams::new(k, n, d)?),
        (None, None, None) => None,
        _ => return Err(cfg_err("k, n and d must be given together")),
    };
    let need_params = || params.ok_or_else(|| cfg_err("k, n and d are required"));

    let sources = [
        raw.code_seed.is_some(),
        raw.code_file.is_some(),
        raw.pool_size.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(cfg_err(
            "give exactly one of code_seed, code_file and pool_size",
        ));
    }
    let code = if let Some(seed) = raw.code_seed {
        CodeSource::Random {
            params: need_params()?,
            seed,
        }
    } else if let Some(path) = raw.code_file {
        CodeSource::File(base_dir.join(path))
    } else {
        CodeSource::Pool {
            params: need_params()?,
            pool_size: raw.pool_size.unwrap_or(50),
            trials_per_code: raw.trials_per_code.unwrap_or(10_000),
            crossover_p: raw.pool_p.unwrap_or(raw.p),
            seed: raw.pool_seed.unwrap_or(0),
        }
    };

    let trials = match (raw.trials, params) {
        (Some(t), _) => t,
        (None, Some(p)) => default_trials(p.d()),
        (None, None) => return Err(cfg_err("trials is required when reading a code file")),
    };
    let mcts = MctsSettings {
        c: raw.c,
        policy: raw
            .policy
            .as_deref()
            .map(parse_policy)
            .transpose()?
            .unwrap_or_default(),
        q0: raw.q0.unwrap_or(0.0),
        n0: raw.n0.unwrap_or(0),
        explore_depth_cap: raw.explore_depth_cap,
    };
    let ms: Vec<Option<u64>> = match raw.m {
        Some(m) => m.into_vec().into_iter().map(Some).collect(),
        None => vec![None],
    };

    let mut runs = Vec::new();
    for name in raw.decoder.into_vec() {
        let probe = DecoderSpec::from_name(&name, Some(1), raw.window, raw.search_depth)?;
        let specs: Vec<DecoderSpec> = if probe.is_search() {
            ms.iter()
                .map(|&m| DecoderSpec::from_name(&name, m, raw.window, raw.search_depth))
                .collect::<Result<_, _>>()?
        } else {
            vec![probe]
        };
        for decoder in specs {
            runs.push(ExperimentConfig {
                code: code.clone(),
                crossover_p: raw.p,
                decoder,
                trials,
                master_seed: raw.master_seed.unwrap_or(0),
                mcts: mcts.clone(),
            });
        }
    }
    if runs.is_empty() {
        return Err(cfg_err("no decoders listed"));
    }
    let format = raw
        .format
        .as_deref()
        .map(str::parse)
        .transpose()
        .map_err(cfg_err)?
        .unwrap_or(ReportFormat::Csv);
    Ok(ExperimentFile {
        runs,
        format,
        out: raw.out.map(|p| base_dir.join(p)),
    })
}

pub fn parse_experiment_file(path: &Path) -> Result<ExperimentFile, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_experiment_toml(&text, base)
}
