//! Error-rate reports, their CSV / JSON-lines serialization and comparison.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecoderSpec, ExperimentError};
use crate::codebook::CodeParams;
use crate::stats::{wilson_interval, Interval, Z_95};

/// Decoding round a row refers to. Non-anytime decoders only report `Final`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Round {
    At(u32),
    Final,
}

impl Ord for Round {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Round::At(a), Round::At(b)) => a.cmp(b),
            (Round::At(_), Round::Final) => Ordering::Less,
            (Round::Final, Round::At(_)) => Ordering::Greater,
            (Round::Final, Round::Final) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Round {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Round::At(j) => write!(f, "{j}"),
            Round::Final => f.write_str("final"),
        }
    }
}

impl std::str::FromStr for Round {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "final" {
            Ok(Round::Final)
        } else {
            s.parse()
                .map(Round::At)
                .map_err(|_| format!("bad round {s:?}"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerRow {
    /// 1-based information symbol index.
    pub bit: u32,
    pub round: Round,
    pub errors: u64,
    pub trials: u64,
}

impl BerRow {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn interval(&self) -> Interval {
        wilson_interval(self.errors, self.trials, Z_95)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EffortSummary {
    pub mean_expansions: f64,
    pub mean_reward_evals: f64,
    /// Mean number of exhaustive-search `Q*` entries per decode.
    pub mean_q_entries: f64,
    pub max_expansions: u64,
    pub max_reward_evals: u64,
    pub max_q_entries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerReport {
    pub decoder: DecoderSpec,
    pub params: CodeParams,
    pub crossover_p: f64,
    /// Explicit exploration constant, `None` for the depth default or for
    /// exhaustive decoders.
    pub c: Option<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub code_fingerprint: Option<String>,
    /// Sorted by bit, then round.
    pub rows: Vec<BerRow>,
    pub effort: EffortSummary,
}

impl BerReport {
    pub fn row(&self, bit: u32, round: Round) -> Option<&BerRow> {
        self.rows.iter().find(|r| r.bit == bit && r.round == round)
    }

    /// Row holding the last decision on `bit`: round `d` for anytime
    /// decoding, the final decision otherwise.
    pub fn final_row(&self, bit: u32) -> Option<&BerRow> {
        if self.decoder.is_anytime() {
            self.row(bit, Round::At(self.params.d()))
        } else {
            self.row(bit, Round::Final)
        }
    }

    pub fn final_ber(&self, bit: u32) -> Option<f64> {
        self.final_row(bit).map(BerRow::ber)
    }

    /// Mean final error rate over bits `1..=last_bit`.
    pub fn mean_final_ber(&self, last_bit: u32) -> f64 {
        let bers: Vec<f64> = (1..=last_bit).filter_map(|b| self.final_ber(b)).collect();
        bers.iter().sum::<f64>() / bers.len() as f64
    }

    fn c_field(&self) -> String {
        match (self.decoder.is_search(), self.c) {
            (false, _) => String::new(),
            (true, Some(c)) => format!("{c}"),
            (true, None) => "auto".into(),
        }
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.rows
            .iter()
            .map(|r| CsvRow {
                decoder: self.decoder.label(),
                k: self.params.k(),
                n: self.params.n(),
                d: self.params.d(),
                p: self.crossover_p,
                m: self.decoder.m(),
                c: self.c_field(),
                bit_index: r.bit,
                round: r.round.to_string(),
                trials: r.trials,
                errors: r.errors,
                ber: r.ber(),
            })
            .collect()
    }
}

/// One emitted line; the CSV columns in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub decoder: String,
    pub k: u32,
    pub n: u32,
    pub d: u32,
    pub p: f64,
    pub m: Option<u64>,
    #[serde(rename = "C")]
    pub c: String,
    pub bit_index: u32,
    pub round: String,
    pub trials: u64,
    pub errors: u64,
    pub ber: f64,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    row: &'a CsvRow,
    master_seed: u64,
    code: Option<&'a str>,
    effort: &'a EffortSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" | "jsonl" => Ok(ReportFormat::JsonLines),
            other => Err(format!("unknown format {other:?} (csv or json-lines)")),
        }
    }
}

/// Writes several reports as one table ordered by (decoder, m, bit, round).
pub fn write_reports<W: Write>(
    reports: &[BerReport],
    format: ReportFormat,
    out: W,
) -> Result<(), ExperimentError> {
    let mut order: Vec<(&BerReport, &BerRow, CsvRow)> = reports
        .iter()
        .flat_map(|rep| {
            rep.rows
                .iter()
                .zip(rep.csv_rows())
                .map(move |(r, c)| (rep, r, c))
        })
        .collect();
    order.sort_by(|(ra, a, ca), (rb, b, cb)| {
        (&ca.decoder, ra.decoder.m(), a.bit, a.round).cmp(&(
            &cb.decoder,
            rb.decoder.m(),
            b.bit,
            b.round,
        ))
    });
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for (_, _, row) in &order {
                w.serialize(row)?;
            }
            if order.is_empty() {
                w.write_record([
                    "decoder",
                    "k",
                    "n",
                    "d",
                    "p",
                    "m",
                    "C",
                    "bit_index",
                    "round",
                    "trials",
                    "errors",
                    "ber",
                ])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        ReportFormat::JsonLines => {
            let mut out = out;
            for (rep, _, row) in &order {
                let line = JsonRow {
                    row,
                    master_seed: rep.master_seed,
                    code: rep.code_fingerprint.as_deref(),
                    effort: &rep.effort,
                };
                serde_json::to_writer(&mut out, &line).map_err(|e| {
                    ExperimentError::Config(format!("json serialization failed: {e}"))
                })?;
                out.write_all(b"\n").map_err(csv::Error::from)?;
            }
            out.flush().map_err(csv::Error::from)?;
        }
    }
    Ok(())
}

pub fn emit_reports(
    reports: &[BerReport],
    format: ReportFormat,
    destination: &Path,
) -> Result<(), ExperimentError> {
    let io_err = |source| ExperimentError::Io {
        path: destination.to_path_buf(),
        source,
    };
    let file = File::create(destination).map_err(io_err)?;
    write_reports(reports, format, BufWriter::new(file)).map_err(|e| match e {
        ExperimentError::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(source) => io_err(source),
            _ => unreachable!("checked is_io_error"),
        },
        other => other,
    })
}

pub fn emit_report(
    report: &BerReport,
    format: ReportFormat,
    destination: &Path,
) -> Result<(), ExperimentError> {
    emit_reports(std::slice::from_ref(report), format, destination)
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, ExperimentError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(ExperimentError::from)
}

/// Final error rates of one bit in two reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BitComparison {
    pub bit: u32,
    pub ber_a: f64,
    pub ber_b: f64,
    /// `ber_a / ber_b`; 1 when both are zero.
    pub ratio: f64,
    /// `ber_a - ber_b`.
    pub difference: f64,
    /// 95% intervals are disjoint and `a` is lower.
    pub a_significantly_lower: bool,
    /// 95% intervals are disjoint and `a` is higher.
    pub a_significantly_higher: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub decoder_a: String,
    pub decoder_b: String,
    pub bits: Vec<BitComparison>,
}

impl Comparison {
    pub fn mean_ratio(&self, last_bit: u32) -> f64 {
        let (sa, sb) = self
            .bits
            .iter()
            .filter(|b| b.bit <= last_bit)
            .fold((0.0, 0.0), |(sa, sb), b| (sa + b.ber_a, sb + b.ber_b));
        ratio(sa, sb)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

/// Bit-by-bit comparison of the final decisions of two reports on the same
/// code, channel and trial count.
pub fn compare_reports(a: &BerReport, b: &BerReport) -> Result<Comparison, ExperimentError> {
    if a.params != b.params {
        return Err(ExperimentError::Mismatch(format!(
            "code parameters differ: {} vs {}",
            a.params, b.params
        )));
    }
    if let (Some(fa), Some(fb)) = (&a.code_fingerprint, &b.code_fingerprint) {
        if fa != fb {
            return Err(ExperimentError::Mismatch(format!(
                "codes differ: {fa} vs {fb}"
            )));
        }
    }
    if a.crossover_p != b.crossover_p {
        return Err(ExperimentError::Mismatch(format!(
            "crossover probabilities differ: {} vs {}",
            a.crossover_p, b.crossover_p
        )));
    }
    if a.trials != b.trials {
        return Err(ExperimentError::Mismatch(format!(
            "trial counts differ: {} vs {}",
            a.trials, b.trials
        )));
    }
    let mut bits = Vec::with_capacity(a.params.d() as usize);
    for bit in 1..=a.params.d() {
        let (ra, rb) = match (a.final_row(bit), b.final_row(bit)) {
            (Some(ra), Some(rb)) => (ra, rb),
            _ => return Err(ExperimentError::Mismatch(format!("bit {bit} missing"))),
        };
        let (ia, ib) = (ra.interval(), rb.interval());
        let separated = ia.separated_from(&ib);
        bits.push(BitComparison {
            bit,
            ber_a: ra.ber(),
            ber_b: rb.ber(),
            ratio: ratio(ra.ber(), rb.ber()),
            difference: ra.ber() - rb.ber(),
            a_significantly_lower: separated && ra.ber() < rb.ber(),
            a_significantly_higher: separated && ra.ber() > rb.ber(),
        });
    }
    Ok(Comparison {
        decoder_a: a.decoder.label(),
        decoder_b: b.decoder.label(),
        bits,
    })
}

/// Rebuilds reports from parsed CSV rows, one per (decoder, m) group.
pub fn reports_from_csv(rows: &[CsvRow]) -> Result<Vec<BerReport>, ExperimentError> {
    let mut groups: Vec<((String, Option<u64>), Vec<&CsvRow>)> = Vec::new();
    for row in rows {
        let key = (row.decoder.clone(), row.m);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|((label, m), group)| {
            let first = group[0];
            let params = CodeParams::new(first.k, first.n, first.d)?;
            let decoder = decoder_from_label(&label, m)?;
            let mut out = Vec::with_capacity(group.len());
            for r in &group {
                out.push(BerRow {
                    bit: r.bit_index,
                    round: r.round.parse().map_err(ExperimentError::Config)?,
                    errors: r.errors,
                    trials: r.trials,
                });
            }
            Ok(BerReport {
                decoder,
                params,
                crossover_p: first.p,
                c: first.c.parse().ok(),
                trials: first.trials,
                master_seed: 0,
                code_fingerprint: None,
                rows: out,
                effort: EffortSummary::default(),
            })
        })
        .collect()
}

fn decoder_from_label(label: &str, m: Option<u64>) -> Result<DecoderSpec, ExperimentError> {
    let (name, suffix) = label.split_once(':').unwrap_or((label, ""));
    let number = |prefix: char| -> Result<Option<u32>, ExperimentError> {
        match suffix.strip_prefix(prefix) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ExperimentError::Config(format!("bad decoder label {label:?}"))),
            None => Ok(None),
        }
    };
    DecoderSpec::from_name(name, m, number('w')?, number('s')?)
}
