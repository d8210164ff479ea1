use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::experiment::{write_csv, CsvRecord, ResultRow, TraceRow};

pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub delta_min: Option<f64>,
    pub runs: usize,
    pub samples_mean: f64,
    pub samples_std: f64,
    pub correct_rate: f64,
    pub stopped_rate: f64,
    pub seconds_per_round_mean: f64,
    pub seconds_per_round_std: f64,
}

impl CsvRecord for AggregateRow {
    const HEADER: &'static [&'static str] = &[
        "algorithm",
        "n",
        "k",
        "delta_min",
        "runs",
        "samples_mean",
        "samples_std",
        "correct_rate",
        "stopped_rate",
        "seconds_per_round_mean",
        "seconds_per_round_std",
    ];
}

/// Per-round mean of recorded ratios across the traces of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub delta_min: Option<f64>,
    /// `(round, mean ratio, traces contributing)`.
    pub points: Vec<(u64, f64, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub aggregates: Vec<AggregateRow>,
    pub ratio_curves: Vec<RatioCurve>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, PartialOrd)]
struct Key {
    algorithm: String,
    n: usize,
    k: usize,
    delta_min: Option<f64>,
}

#[derive(Default)]
struct Group {
    samples: Vec<f64>,
    correct: usize,
    stopped: usize,
    seconds: Vec<f64>,
    ratios: BTreeMap<u64, (f64, usize)>,
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::csv(path, e))
}

/// Aggregate every results file matching `pattern`, grouping rows by
/// `(algorithm, n, k, delta_min)`.
pub fn aggregate(pattern: &str) -> Result<Report> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| HarnessError::Config(format!("bad pattern '{pattern}': {e}")))?
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    if paths.is_empty() {
        return Err(HarnessError::Data(format!(
            "no result files match '{pattern}'"
        )));
    }
    let mut groups: Vec<(Key, Group)> = Vec::new();
    for path in &paths {
        let base = path.parent().unwrap_or(Path::new("."));
        for row in read_rows::<ResultRow>(path)? {
            let key = Key {
                algorithm: row.algorithm.clone(),
                n: row.n,
                k: row.k,
                delta_min: row.delta_min,
            };
            let pos = match groups.iter().position(|(k, _)| *k == key) {
                Some(p) => p,
                None => {
                    groups.push((key, Group::default()));
                    groups.len() - 1
                }
            };
            let g = &mut groups[pos].1;
            g.samples.push(row.samples as f64);
            g.correct += row.correct as usize;
            g.stopped += row.stopped as usize;
            g.seconds.push(row.wall_clock_per_round_mean);
            if !row.trace_file.is_empty() {
                let trace = base.join(&row.trace_file);
                if trace.is_file() {
                    for t in read_rows::<TraceRow>(&trace)? {
                        if let Some(r) = t.ratio {
                            let e = g.ratios.entry(t.round).or_insert((0.0, 0));
                            e.0 += r;
                            e.1 += 1;
                        }
                    }
                }
            }
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut report = Report::default();
    for (key, g) in groups {
        let (samples_mean, samples_std) = mean_std(&g.samples);
        let (sec_mean, sec_std) = mean_std(&g.seconds);
        let runs = g.samples.len();
        report.aggregates.push(AggregateRow {
            algorithm: key.algorithm.clone(),
            n: key.n,
            k: key.k,
            delta_min: key.delta_min,
            runs,
            samples_mean,
            samples_std,
            correct_rate: g.correct as f64 / runs as f64,
            stopped_rate: g.stopped as f64 / runs as f64,
            seconds_per_round_mean: sec_mean,
            seconds_per_round_std: sec_std,
        });
        if !g.ratios.is_empty() {
            report.ratio_curves.push(RatioCurve {
                algorithm: key.algorithm,
                n: key.n,
                k: key.k,
                delta_min: key.delta_min,
                points: g
                    .ratios
                    .into_iter()
                    .map(|(t, (s, c))| (t, s / c as f64, c))
                    .collect(),
            });
        }
    }
    Ok(report)
}

fn dmin_tag(d: Option<f64>) -> String {
    d.map_or_else(|| "na".to_string(), |v| v.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Aggregate `pattern` and write `aggregate.csv` plus whitespace-separated
/// data files under `out_dir`:
/// `samples_<alg>_n<n>_k<k>.dat` (delta_min, mean, std),
/// `seconds_<alg>.dat` (n, mean, std) and
/// `ratio_<alg>_n<n>_k<k>_dmin<d>.dat` (round, mean ratio).
pub fn report(pattern: &str, out_dir: &Path) -> Result<Report> {
    let mut rep = aggregate(pattern)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let agg = out_dir.join(AGGREGATE_FILE);
    write_csv(&agg, rep.aggregates.iter().cloned())?;
    rep.files.push(agg);

    let mut by_size: BTreeMap<(String, usize, usize), Vec<&AggregateRow>> = BTreeMap::new();
    let mut by_alg: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in &rep.aggregates {
        by_size
            .entry((row.algorithm.clone(), row.n, row.k))
            .or_default()
            .push(row);
        by_alg
            .entry(row.algorithm.clone())
            .or_default()
            .entry(row.n)
            .or_default()
            .push(row.seconds_per_round_mean);
    }
    for ((alg, n, k), rows) in &by_size {
        let mut text = String::from("# delta_min samples_mean samples_std\n");
        for r in rows.iter().filter(|r| r.delta_min.is_some()) {
            let _ = writeln!(
                text,
                "{} {} {}",
                dmin_tag(r.delta_min),
                r.samples_mean,
                r.samples_std
            );
        }
        let path = out_dir.join(format!("samples_{alg}_n{n}_k{k}.dat"));
        write_text(&path, &text)?;
        rep.files.push(path);
    }
    for (alg, ns) in &by_alg {
        let mut text = String::from("# n seconds_per_round_mean seconds_per_round_std\n");
        for (n, secs) in ns {
            let (m, s) = mean_std(secs);
            let _ = writeln!(text, "{n} {m} {s}");
        }
        let path = out_dir.join(format!("seconds_{alg}.dat"));
        write_text(&path, &text)?;
        rep.files.push(path);
    }
    for c in &rep.ratio_curves {
        let mut text = String::from("# round ratio_mean traces\n");
        for (t, r, count) in &c.points {
            let _ = writeln!(text, "{t} {r} {count}");
        }
        let path = out_dir.join(format!(
            "ratio_{}_n{}_k{}_dmin{}.dat",
            c.algorithm,
            c.n,
            c.k,
            dmin_tag(c.delta_min)
        ));
        write_text(&path, &text)?;
        rep.files.push(path);
    }
    Ok(rep)
}
