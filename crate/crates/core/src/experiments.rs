//! Monte-Carlo sweeps and single-channel reports.
//!
//! A sweep draws one channel per trial index and reuses it at every axis
//! value and for every scheme, so curves are paired comparisons. Records
//! are sorted by `(axis value, scheme, trial)` before they are written,
//! which makes the output independent of how trials were scheduled.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{cof_multi_equation, swz_evaluate, CofEvaluation, SwzEvaluation};
use crate::channel::{
    cutset_sum_rate, db_to_linear, receiver_cut, sample_channel, Channel, SearchMethod, SystemConfig,
    RNG_ID,
};
use crate::error::{Error, Result};
use crate::jqcof::{jqcof_optimize, JqcofEvaluation, ALLOCATION};
use crate::qcof::{qcof_optimize, QcofEvaluation};

/// Slack allowed when checking a scheme against the cut-set bound.
pub const CUTSET_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Qcof,
    Jqcof,
    Cof,
    Swz,
    Cutset,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Qcof, Scheme::Jqcof, Scheme::Cof, Scheme::Swz, Scheme::Cutset];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Qcof => "qcof",
            Scheme::Jqcof => "jqcof",
            Scheme::Cof => "cof",
            Scheme::Swz => "swz",
            Scheme::Cutset => "cutset",
        }
    }

    /// Whether the scheme depends on the equation search method.
    pub fn uses_search(self) -> bool {
        matches!(self, Scheme::Qcof | Scheme::Jqcof)
    }

    pub fn search_label(self, method: SearchMethod) -> &'static str {
        if self.uses_search() {
            method.as_str()
        } else {
            "none"
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme `{s}`")))
    }
}

/// Parses `qcof,jqcof,...`, keeping the canonical scheme order and dropping
/// duplicates.
pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    let mut out = s
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<Vec<Scheme>>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidConfig("no schemes given".into()));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Backhaul,
    SnrDb,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backhaul" => Ok(SweepAxis::Backhaul),
            "snr-db" | "snr_db" => Ok(SweepAxis::SnrDb),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Parses a comma list (`0,0.5,1`) or an inclusive range `start:stop:step`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::InvalidConfig(m);
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| bad(format!("bad number `{x}`: {e}")));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad(format!("range `{s}` is empty or has a nonpositive step")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad(format!("cannot parse axis values `{s}`"))),
    };
    Ok(values)
}

/// One sweep: the base configuration fixes dimensions, trials, seed and
/// search knobs; `snr_db` and `backhaul` fix whichever parameter is not
/// being swept (the axis value overrides the other).
#[derive(Clone, Debug, Serialize)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub snr_db: f64,
    pub backhaul: f64,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("no axis values".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig("axis values must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes requested".into()));
        }
        for &v in &self.values {
            self.point_config(v).validate()?;
        }
        Ok(())
    }

    /// `(snr_db, C)` at an axis value.
    pub fn point(&self, value: f64) -> (f64, f64) {
        match self.axis {
            SweepAxis::Backhaul => (self.snr_db, value),
            SweepAxis::SnrDb => (value, self.backhaul),
        }
    }

    pub fn point_config(&self, value: f64) -> SystemConfig {
        let (snr_db, c) = self.point(value);
        SystemConfig {
            snr: db_to_linear(snr_db),
            backhaul: vec![c; self.base.relays],
            ..self.base.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub search: &'static str,
    #[serde(rename = "L")]
    pub users: usize,
    #[serde(rename = "K")]
    pub relays: usize,
    pub snr_db: f64,
    #[serde(rename = "C")]
    pub backhaul: f64,
    pub trial: u64,
    pub sum_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub search: &'static str,
    #[serde(rename = "L")]
    pub users: usize,
    #[serde(rename = "K")]
    pub relays: usize,
    pub snr_db: f64,
    #[serde(rename = "C")]
    pub backhaul: f64,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// A record that exceeded the cut-set bound of its own trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundViolation {
    pub scheme: Scheme,
    pub trial: u64,
    pub snr_db: f64,
    #[serde(rename = "C")]
    pub backhaul: f64,
    pub sum_rate: f64,
    pub cutset: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepMetadata {
    pub version: &'static str,
    pub seed: u64,
    pub rng: &'static str,
    pub epsilon: f64,
    pub allocation: &'static str,
    pub lll_delta: f64,
    pub search: SearchMethod,
    #[serde(rename = "L")]
    pub users: usize,
    #[serde(rename = "K")]
    pub relays: usize,
    pub trials: usize,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub snr_db: Option<f64>,
    #[serde(rename = "C")]
    pub backhaul: Option<f64>,
    pub channel_reuse: &'static str,
    pub unconstrained_user_rule: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Cross-check of every record against its cut-set bound; empty when all
    /// schemes stayed below it.
    pub bound_violations: Vec<BoundViolation>,
}

/// Sum-rate of one scheme on one channel.
pub fn scheme_sum_rate(scheme: Scheme, h: &Channel, cfg: &SystemConfig) -> Result<f64> {
    Ok(match scheme {
        Scheme::Qcof => qcof_optimize(h, cfg.snr, &cfg.backhaul, cfg.search, cfg.lll_delta)?.sum_rate,
        Scheme::Jqcof => {
            jqcof_optimize(h, cfg.snr, &cfg.backhaul, cfg.epsilon, cfg.search, cfg.lll_delta)?.sum_rate
        }
        Scheme::Cof => cof_multi_equation(h, cfg.snr, &cfg.backhaul)?.sum_rate,
        Scheme::Swz => swz_evaluate(h, cfg.snr, &cfg.backhaul)?.sum_rate,
        Scheme::Cutset => cutset_sum_rate(h, cfg.snr, &cfg.backhaul),
    })
}

struct TrialOutput {
    records: Vec<(usize, TrialRecord)>,
    violations: Vec<BoundViolation>,
}

fn run_trial(spec: &SweepSpec, trial: u64) -> Result<TrialOutput> {
    let h = sample_channel(&spec.base, trial);
    let mut out = TrialOutput {
        records: Vec::with_capacity(spec.values.len() * spec.schemes.len()),
        violations: Vec::new(),
    };
    for (i, &value) in spec.values.iter().enumerate() {
        let cfg = spec.point_config(value);
        let (snr_db, c) = spec.point(value);
        let cutset = cutset_sum_rate(&h, cfg.snr, &cfg.backhaul);
        for &scheme in &spec.schemes {
            let sum_rate = scheme_sum_rate(scheme, &h, &cfg).map_err(|e| e.at_trial(trial))?;
            if sum_rate > cutset + CUTSET_TOLERANCE {
                out.violations.push(BoundViolation {
                    scheme,
                    trial,
                    snr_db,
                    backhaul: c,
                    sum_rate,
                    cutset,
                });
            }
            out.records.push((
                i,
                TrialRecord {
                    scheme,
                    search: scheme.search_label(cfg.search),
                    users: cfg.users,
                    relays: cfg.relays,
                    snr_db,
                    backhaul: c,
                    trial,
                    sum_rate,
                },
            ));
        }
    }
    Ok(out)
}

/// Runs every trial of the sweep on a pool of `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outputs = pool.install(|| {
        (0..spec.base.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(spec, t))
            .collect::<Result<Vec<TrialOutput>>>()
    })?;

    let mut keyed = Vec::with_capacity(spec.values.len() * spec.schemes.len() * spec.base.trials);
    let mut bound_violations = Vec::new();
    for o in outputs {
        keyed.extend(o.records);
        bound_violations.extend(o.violations);
    }
    keyed.sort_by(|(ia, a), (ib, b)| ia.cmp(ib).then(a.scheme.cmp(&b.scheme)).then(a.trial.cmp(&b.trial)));
    let records: Vec<TrialRecord> = keyed.into_iter().map(|(_, r)| r).collect();
    let aggregates = aggregate(&records);

    let (snr_db, backhaul) = match spec.axis {
        SweepAxis::Backhaul => (Some(spec.snr_db), None),
        SweepAxis::SnrDb => (None, Some(spec.backhaul)),
    };
    let metadata = SweepMetadata {
        version: env!("CARGO_PKG_VERSION"),
        seed: spec.base.seed,
        rng: RNG_ID,
        epsilon: spec.base.epsilon,
        allocation: ALLOCATION,
        lll_delta: spec.base.lll_delta,
        search: spec.base.search,
        users: spec.base.users,
        relays: spec.base.relays,
        trials: spec.base.trials,
        axis: spec.axis,
        values: spec.values.clone(),
        schemes: spec.schemes.clone(),
        snr_db,
        backhaul,
        channel_reuse: "paired: trial t uses the same channel at every axis value and for every scheme",
        unconstrained_user_rule: "a user in no equation is limited by its SIC term only",
    };
    Ok(SweepResult {
        metadata,
        records,
        aggregates,
        bound_violations,
    })
}

/// Mean and standard error per `(axis point, scheme)`; expects records in
/// the sorted order produced by [`run_sweep`].
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    let same_group = |a: &TrialRecord, b: &TrialRecord| {
        a.scheme == b.scheme && a.search == b.search && a.snr_db == b.snr_db && a.backhaul == b.backhaul
    };
    let mut start = 0;
    while start < records.len() {
        let first = &records[start];
        let end = start + records[start..].iter().take_while(|r| same_group(first, r)).count();
        let group = &records[start..end];
        let n = group.len() as f64;
        let mean = group.iter().map(|r| r.sum_rate).sum::<f64>() / n;
        let stderr = if group.len() > 1 {
            let var = group.iter().map(|r| (r.sum_rate - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        out.push(AggregateRow {
            scheme: first.scheme,
            search: first.search,
            users: first.users,
            relays: first.relays,
            snr_db: first.snr_db,
            backhaul: first.backhaul,
            mean_sum_rate: mean,
            stderr,
            trials: group.len(),
        });
        start = end;
    }
    out
}

pub const RECORD_HEADER: &str = "scheme,search,L,K,snr_db,C,trial,sum_rate";
pub const AGGREGATE_HEADER: &str = "scheme,search,L,K,snr_db,C,mean_sum_rate,stderr,trials";

pub fn write_records_csv<W: Write>(mut w: W, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.scheme, r.search, r.users, r.relays, r.snr_db, r.backhaul, r.trial, r.sum_rate
        )?;
    }
    Ok(())
}

pub fn write_aggregates_csv<W: Write>(mut w: W, rows: &[AggregateRow]) -> std::io::Result<()> {
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme, r.search, r.users, r.relays, r.snr_db, r.backhaul, r.mean_sum_rate, r.stderr, r.trials
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown output format `{other}`"))),
        }
    }
}

/// Writes a sweep and returns the paths created.
///
/// CSV output puts raw trials at `out`, aggregates at `<stem>.agg.csv` and
/// metadata at `<stem>.meta.json`. JSON output is a single document.
pub fn write_sweep(result: &SweepResult, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    match format {
        OutputFormat::Csv => {
            let agg = out.with_extension("agg.csv");
            let meta = out.with_extension("meta.json");
            let mut w = BufWriter::new(File::create(out)?);
            write_records_csv(&mut w, &result.records)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(&agg)?);
            write_aggregates_csv(&mut w, &result.aggregates)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(&meta)?);
            serde_json::to_writer_pretty(&mut w, &result.metadata)?;
            writeln!(w)?;
            w.flush()?;
            Ok(vec![out.to_path_buf(), agg, meta])
        }
        OutputFormat::Json => {
            let mut w = BufWriter::new(File::create(out)?);
            serde_json::to_writer_pretty(&mut w, result)?;
            writeln!(w)?;
            w.flush()?;
            Ok(vec![out.to_path_buf()])
        }
    }
}

/// Full diagnostic output of one scheme on one channel.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeReport {
    Qcof {
        search: SearchMethod,
        sum_rate: f64,
        evaluation: QcofEvaluation,
    },
    Jqcof {
        search: SearchMethod,
        sum_rate: f64,
        evaluation: JqcofEvaluation,
    },
    Cof {
        sum_rate: f64,
        evaluation: CofEvaluation,
    },
    Swz {
        sum_rate: f64,
        evaluation: SwzEvaluation,
    },
    Cutset {
        sum_rate: f64,
        receiver_cut: f64,
        backhaul_total: f64,
    },
}

impl SchemeReport {
    pub fn sum_rate(&self) -> f64 {
        match self {
            SchemeReport::Qcof { sum_rate, .. }
            | SchemeReport::Jqcof { sum_rate, .. }
            | SchemeReport::Cof { sum_rate, .. }
            | SchemeReport::Swz { sum_rate, .. }
            | SchemeReport::Cutset { sum_rate, .. } => *sum_rate,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    #[serde(rename = "L")]
    pub users: usize,
    #[serde(rename = "K")]
    pub relays: usize,
    pub snr_db: f64,
    pub snr: f64,
    #[serde(rename = "C")]
    pub backhaul: Vec<f64>,
    pub epsilon: f64,
    pub lll_delta: f64,
    pub allocation: &'static str,
    pub schemes: Vec<SchemeReport>,
}

/// Evaluates the requested schemes on a channel loaded from `path`.
///
/// `cfg.users`/`cfg.relays` must match the file; `cfg.snr` should be
/// `db_to_linear(snr_db)`.
pub fn eval_single(path: &Path, cfg: &SystemConfig, snr_db: f64, schemes: &[Scheme]) -> Result<EvalReport> {
    let channel = Channel::load_json(path).map_err(|e| match e {
        Error::Io(io) => Error::MalformedChannelFile(format!("{}: {io}", path.display())),
        other => other,
    })?;
    eval_channel(&channel, cfg, snr_db, schemes)
}

pub fn eval_channel(h: &Channel, cfg: &SystemConfig, snr_db: f64, schemes: &[Scheme]) -> Result<EvalReport> {
    if h.users() != cfg.users || h.relays() != cfg.relays {
        return Err(Error::DimensionMismatch(format!(
            "channel file has L={}, K={} but L={}, K={} were requested",
            h.users(),
            h.relays(),
            cfg.users,
            cfg.relays
        )));
    }
    if cfg.backhaul.len() != cfg.relays {
        return Err(Error::DimensionMismatch(format!(
            "{} backhaul capacities for {} relays",
            cfg.backhaul.len(),
            cfg.relays
        )));
    }
    cfg.validate()?;

    let (snr, c) = (cfg.snr, cfg.backhaul.as_slice());
    let reports = schemes
        .iter()
        .map(|&s| {
            Ok(match s {
                Scheme::Qcof => {
                    let e = qcof_optimize(h, snr, c, cfg.search, cfg.lll_delta)?;
                    SchemeReport::Qcof {
                        search: cfg.search,
                        sum_rate: e.sum_rate,
                        evaluation: e,
                    }
                }
                Scheme::Jqcof => {
                    let e = jqcof_optimize(h, snr, c, cfg.epsilon, cfg.search, cfg.lll_delta)?;
                    SchemeReport::Jqcof {
                        search: cfg.search,
                        sum_rate: e.sum_rate,
                        evaluation: e,
                    }
                }
                Scheme::Cof => {
                    let e = cof_multi_equation(h, snr, c)?;
                    SchemeReport::Cof {
                        sum_rate: e.sum_rate,
                        evaluation: e,
                    }
                }
                Scheme::Swz => {
                    let e = swz_evaluate(h, snr, c)?;
                    SchemeReport::Swz {
                        sum_rate: e.sum_rate,
                        evaluation: e,
                    }
                }
                Scheme::Cutset => SchemeReport::Cutset {
                    sum_rate: cutset_sum_rate(h, snr, c),
                    receiver_cut: receiver_cut(h, snr),
                    backhaul_total: c.iter().sum(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        users: cfg.users,
        relays: cfg.relays,
        snr_db,
        snr,
        backhaul: cfg.backhaul.clone(),
        epsilon: cfg.epsilon,
        lll_delta: cfg.lll_delta,
        allocation: ALLOCATION,
        schemes: reports,
    })
}
