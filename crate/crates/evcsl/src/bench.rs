//! Batch experiment runner and the statistical reporting pipeline:
//! per-preset summaries, Wilcoxon signed-rank tests with Bonferroni
//! correction, and improvement ECDFs against a baseline layout.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ga::ConfigError;
use crate::model::{Instance, Solution};
use crate::presets::AlgoSpec;
use crate::run::{Budget, RunResult, TrajectoryPoint};
use crate::vns::CandidateRanks;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Stat(#[from] StatError),
    #[error("invalid batch: {0}")]
    Invalid(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("empty input")]
    Empty,
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("only {0} non-zero differences; the signed-rank test needs at least 5")]
    TooFewPairs(usize),
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("{0}")]
    BadArgument(String),
}

/// One solver run inside a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub best_avg_distance_m: f64,
    pub violations: usize,
    pub evaluations: u64,
    pub wall_seconds: f64,
    pub best_solution: Solution,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl RunRecord {
    fn from_result(result: RunResult) -> Self {
        RunRecord {
            seed: result.seed,
            best_avg_distance_m: result.best_evaluation.avg_distance,
            violations: result.best_evaluation.violations(),
            evaluations: result.evaluations,
            wall_seconds: result.wall_seconds,
            best_solution: result.best_solution,
            trajectory: result.trajectory,
        }
    }
}

/// A batch of independent runs of one algorithm on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub instance_id: String,
    pub algorithm: String,
    pub preset: String,
    pub baseline_avg_distance: Option<f64>,
    pub runs: Vec<RunRecord>,
}

impl BenchReport {
    pub fn best_values(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.best_avg_distance_m).collect()
    }
}

/// Runs `n_runs` independent solver runs with seeds `base_seed..base_seed
/// + n_runs`, optionally across threads. Records are always in seed order
/// regardless of completion order, so eval-budget batches are reproducible
/// at any parallelism. VNS candidate ranks are built once and shared.
#[allow(clippy::too_many_arguments)]
pub fn run_batch(
    instance: &Instance,
    instance_id: &str,
    algo: &AlgoSpec,
    preset_label: &str,
    n_runs: usize,
    base_seed: u64,
    budget: Budget,
    parallelism: usize,
) -> Result<BenchReport, BenchError> {
    if n_runs == 0 {
        return Err(BenchError::Invalid("n_runs must be at least 1".into()));
    }
    if parallelism == 0 {
        return Err(BenchError::Invalid("parallelism must be at least 1".into()));
    }
    algo.validate()?;

    let ranks = match algo {
        AlgoSpec::Vns(cfg) => Some(CandidateRanks::build(
            instance,
            cfg.required_rank_width(instance.n_candidates()),
        )),
        AlgoSpec::Ga(_) => None,
    };

    let seeds: Vec<u64> = (0..n_runs as u64).map(|i| base_seed + i).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| BenchError::Invalid(e.to_string()))?;
    let results: Result<Vec<RunResult>, ConfigError> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| algo.run_with_ranks(instance, ranks.as_ref(), seed, budget))
            .collect()
    });

    Ok(BenchReport {
        instance_id: instance_id.to_string(),
        algorithm: algo.algorithm_name().to_string(),
        preset: preset_label.to_string(),
        baseline_avg_distance: None,
        runs: results?.into_iter().map(RunRecord::from_result).collect(),
    })
}

/// One row of the report CSV. The header is fixed:
/// `instance,algorithm,preset,seed,best_avg_distance_m,evals,wall_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub algorithm: String,
    pub preset: String,
    pub seed: u64,
    pub best_avg_distance_m: f64,
    pub evals: u64,
    pub wall_s: f64,
}

pub fn report_rows(report: &BenchReport) -> Vec<ReportRow> {
    report
        .runs
        .iter()
        .map(|r| ReportRow {
            instance: report.instance_id.clone(),
            algorithm: report.algorithm.clone(),
            preset: report.preset.clone(),
            seed: r.seed,
            best_avg_distance_m: r.best_avg_distance_m,
            evals: r.evaluations,
            wall_s: r.wall_seconds,
        })
        .collect()
}

/// Writes report rows as CSV, one row per run.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows from one report CSV.
pub fn read_report_csv<R: Read>(reader: R) -> Result<Vec<ReportRow>, BenchError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in r.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Summary statistics of the per-run best values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); `None` for n < 2.
    pub sd: Option<f64>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Mean, sample SD, min, median (midpoint for even n) and max.
pub fn summarize(values: &[f64]) -> Result<Summary, StatError> {
    if values.is_empty() {
        return Err(StatError::Empty);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some((ss / (n as f64 - 1.0)).sqrt())
    } else {
        None
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        n,
        mean,
        sd,
        min: sorted[0],
        median,
        max: sorted[n - 1],
    })
}

/// `"mean±sd"` with the mean at two decimals and the SD at two significant
/// digits, the table convention of the reporting pipeline.
pub fn format_mean_sd(mean: f64, sd: Option<f64>) -> String {
    match sd {
        None => format!("{:.2}±n/a", mean),
        Some(sd) if sd == 0.0 => format!("{:.2}±0.00", mean),
        Some(sd) => {
            let decimals = (1 - sd.abs().log10().floor() as i32).max(0) as usize;
            format!("{:.2}±{:.*}", mean, decimals, sd)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// All 2^n sign patterns enumerated.
    Exact,
    /// Normal approximation with tie and continuity corrections.
    NormalApprox,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// min(W+, W-), the usual reported statistic.
    pub w_statistic: f64,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Pairs remaining after dropping zero differences.
    pub n_used: usize,
    pub all_zero: bool,
    pub method: WilcoxonMethod,
}

/// Largest n for which the exact sign-pattern enumeration is used.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero
/// differences are dropped; |differences| are ranked with midranks on
/// ties. Exact enumeration of all 2^n sign patterns up to n = 20, normal
/// approximation with tie and continuity corrections above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, StatError> {
    wilcoxon_signed_rank_with_threshold(a, b, WILCOXON_EXACT_MAX_N)
}

/// [`wilcoxon_signed_rank`] with a custom exact/approximate switchover,
/// used to validate the approximation against the exact path.
pub fn wilcoxon_signed_rank_with_threshold(
    a: &[f64],
    b: &[f64],
    exact_max_n: usize,
) -> Result<WilcoxonResult, StatError> {
    if a.len() != b.len() {
        return Err(StatError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatError::Empty);
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            w_statistic: 0.0,
            w_plus: 0.0,
            p_value: 1.0,
            n_used: 0,
            all_zero: true,
            method: WilcoxonMethod::Degenerate,
        });
    }
    let n = diffs.len();
    if n < 5 {
        return Err(StatError::TooFewPairs(n));
    }

    let ranks = midranks(&diffs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let w_statistic = w_plus.min(w_minus);

    let (p_value, method) = if n <= exact_max_n {
        (exact_two_sided_p(&ranks, w_plus), WilcoxonMethod::Exact)
    } else {
        (approx_two_sided_p(&diffs, &ranks, w_plus), WilcoxonMethod::NormalApprox)
    };

    Ok(WilcoxonResult {
        w_statistic,
        w_plus,
        p_value,
        n_used: n,
        all_zero: false,
        method,
    })
}

/// Ranks of |diffs| with midranks for ties.
fn midranks(diffs: &[f64]) -> Vec<f64> {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p: enumerate all 2^n equally likely sign patterns of
/// the ranks and count pattern sums at or beyond `w_plus` on either side.
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let patterns: u64 = 1 << n;
    let mut count_le: u64 = 0;
    let mut count_ge: u64 = 0;
    for mask in 0..patterns {
        let mut sum = 0.0;
        for (i, r) in ranks.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += *r;
            }
        }
        if sum <= w_plus {
            count_le += 1;
        }
        if sum >= w_plus {
            count_ge += 1;
        }
    }
    let tail = count_le.min(count_ge) as f64 / patterns as f64;
    (2.0 * tail).min(1.0)
}

/// Normal approximation with tie correction and a continuity correction
/// of 0.5 toward the mean.
fn approx_two_sided_p(diffs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = diffs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;

    // Tie correction: sum t^3 - t over groups of tied |differences|.
    let mut sorted_abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    sorted_abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted_abs.len() {
        let mut j = i;
        while j + 1 < sorted_abs.len() && sorted_abs[j + 1] == sorted_abs[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    debug_assert!(ranks.len() == diffs.len());

    if variance <= 0.0 {
        return 1.0;
    }
    let centered = w_plus - mean;
    let corrected = if centered > 0.0 {
        centered - 0.5
    } else if centered < 0.0 {
        centered + 0.5
    } else {
        return 1.0;
    };
    let z = corrected / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = 2.0 * (1.0 - normal.cdf(z.abs()));
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Bonferroni correction for `m` comparisons: p_adj = min(1, m * p).
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatError> {
    if m < p_values.len() {
        return Err(StatError::BadArgument(format!(
            "m = {m} is smaller than the number of p-values ({})",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (m as f64 * p).min(1.0)).collect())
}

/// Empirical cumulative distribution of per-run improvement over a
/// baseline: improvement = 100 * (baseline - best) / baseline. Returns the
/// step-function support points ascending with cumulative fractions in
/// (0, 1], the last always exactly 1.
pub fn improvement_ecdf(
    best_values: &[f64],
    baseline: f64,
) -> Result<Vec<(f64, f64)>, StatError> {
    if best_values.is_empty() {
        return Err(StatError::Empty);
    }
    if !(baseline > 0.0) {
        return Err(StatError::NonPositiveBaseline(baseline));
    }
    let mut improvements: Vec<f64> = best_values
        .iter()
        .map(|best| 100.0 * (baseline - best) / baseline)
        .collect();
    improvements.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = improvements.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && improvements[j + 1] == improvements[i] {
            j += 1;
        }
        points.push((improvements[i], (j + 1) as f64 / n as f64));
        i = j + 1;
    }
    Ok(points)
}

/// Writes ECDF points as CSV with header `improvement_pct,cum_fraction`.
pub fn write_ecdf_csv<W: Write>(points: &[(f64, f64)], mut writer: W) -> Result<(), BenchError> {
    writeln!(writer, "improvement_pct,cum_fraction")?;
    for (pct, frac) in points {
        writeln!(writer, "{pct},{frac}")?;
    }
    Ok(())
}
