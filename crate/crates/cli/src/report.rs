use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "W2sq_post_to_truth")]
    W2sqPostToTruth,
    #[serde(rename = "W2sq_bary_to_truth")]
    W2sqBaryToTruth,
    #[serde(rename = "W2sq_bma_to_truth")]
    W2sqBmaToTruth,
    #[serde(rename = "residual")]
    Residual,
    #[serde(rename = "var_grad")]
    VarGrad,
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed-form distance between posterior draws and the truth.
    ClosedForm,
    /// Deterministic descent on `k` draws, closed-form distance.
    Descent,
    /// Batch SGD, closed-form distance.
    Sgd,
    /// Exact discrete transport between sample clouds.
    Sampled,
}

/// One measurement in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub n: usize,
    pub k: Option<usize>,
    pub s: Option<usize>,
    /// SGD iteration for trajectory points.
    pub t: Option<usize>,
    pub replication: usize,
    pub metric: Metric,
    pub method: Method,
    pub value: f64,
    pub wall_ms: f64,
    pub seed: u64,
    pub config_hash: String,
}

const RECORD_HEADER: [&str; 12] =
    ["experiment", "n", "k", "s", "t", "replication", "metric", "method", "value", "wall_ms", "seed", "config_hash"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Mean and std of the values across replications.
    AcrossReplications,
    /// Mean over `t ≥ t₀` of each trajectory, summarised across replications.
    TrajectoryMean,
    /// Std over `t ≥ t₀` of each trajectory, summarised across replications.
    TrajectoryStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub metric: Metric,
    pub method: Method,
    pub n: usize,
    pub k: Option<usize>,
    pub s: Option<usize>,
    pub statistic: Statistic,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

const SUMMARY_HEADER: [&str; 10] = ["experiment", "metric", "method", "n", "k", "s", "statistic", "count", "mean", "std"];

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub records: Vec<Record>,
    /// Cells whose descent did not converge.
    pub flagged: usize,
    /// Trajectory summaries use `t ≥ summary_from`.
    pub summary_from: usize,
}

type GroupKey = (Metric, Method, usize, Option<usize>, Option<usize>);

impl ExperimentReport {
    pub fn new(experiment: &str, summary_from: usize) -> Self {
        Self { experiment: experiment.into(), summary_from, ..Default::default() }
    }

    pub fn values(&self, metric: Metric, method: Method) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.metric == metric && r.method == method)
    }

    /// Summary rows in deterministic order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut plain: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
        let mut traj: BTreeMap<GroupKey, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        for r in &self.records {
            let key = (r.metric, r.method, r.n, r.k, r.s);
            match r.t {
                None => plain.entry(key).or_default().push(r.value),
                Some(t) if t >= self.summary_from => {
                    traj.entry(key).or_default().entry(r.replication).or_default().push(r.value)
                }
                Some(_) => {}
            }
        }
        let row = |(metric, method, n, k, s): GroupKey, statistic, v: &[f64]| {
            let (mean, std) = mean_std(v);
            SummaryRow { experiment: self.experiment.clone(), metric, method, n, k, s, statistic, count: v.len(), mean, std }
        };
        let mut out: Vec<SummaryRow> =
            plain.iter().map(|(key, v)| row(*key, Statistic::AcrossReplications, v)).collect();
        for (key, reps) in &traj {
            let stats: Vec<(f64, f64)> = reps.values().map(|v| mean_std(v)).collect();
            let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
            let stds: Vec<f64> = stats.iter().map(|s| s.1).collect();
            out.push(row(*key, Statistic::TrajectoryMean, &means));
            out.push(row(*key, Statistic::TrajectoryStd, &stds));
        }
        out.sort_by(|a, b| {
            (a.metric, a.method, a.statistic, a.n, a.k, a.s).cmp(&(b.metric, b.method, b.statistic, b.n, b.k, b.s))
        });
        out
    }

    /// Looks up one summary row.
    pub fn summary_row(
        &self,
        metric: Metric,
        method: Method,
        statistic: Statistic,
        n: usize,
        k: Option<usize>,
        s: Option<usize>,
    ) -> Option<SummaryRow> {
        self.summary()
            .into_iter()
            .find(|r| r.metric == metric && r.method == method && r.statistic == statistic && r.n == n && r.k == k && r.s == s)
    }

    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &RECORD_HEADER, &self.records)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &SUMMARY_HEADER, &self.summary())
    }
}

fn write_csv<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Serialize)]
struct JsonMirror<'a> {
    experiment: &'a str,
    flagged: usize,
    records: &'a [Record],
    summary: Vec<SummaryRow>,
}

/// Writes `<experiment>_records.csv` and `<experiment>_summary.csv`
/// and/or `<experiment>.json` into `dir`, returning the paths written.
pub fn emit_report(report: &ExperimentReport, format: Format, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let name = report.experiment.replace('-', "_");
    if matches!(format, Format::Csv | Format::Both) {
        let p = dir.join(format!("{name}_records.csv"));
        report.write_records_csv(std::fs::File::create(&p)?)?;
        written.push(p);
        let p = dir.join(format!("{name}_summary.csv"));
        report.write_summary_csv(std::fs::File::create(&p)?)?;
        written.push(p);
    }
    if matches!(format, Format::Json | Format::Both) {
        let p = dir.join(format!("{name}.json"));
        let mirror = JsonMirror {
            experiment: &report.experiment,
            flagged: report.flagged,
            records: &report.records,
            summary: report.summary(),
        };
        let mut f = std::fs::File::create(&p)?;
        serde_json::to_writer_pretty(&mut f, &mirror)?;
        f.write_all(b"\n")?;
        written.push(p);
    }
    Ok(written)
}
