//! Subcommand definitions and execution.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use evcsl::bench::{
    bonferroni, format_mean_sd, improvement_ecdf, read_report_csv, report_rows, run_batch,
    summarize, wilcoxon_signed_rank, write_ecdf_csv, write_report_csv, ReportRow, StatError,
};
use evcsl::io::{
    generate_synthetic, import_city, load_instance, load_solution, malaga_like, save_instance,
    save_solution, Geometry, ImportParams, SyntheticSpec,
};
use evcsl::model::{evaluate, DistanceCap, Evaluation, Instance};
use evcsl::run::Budget;

use crate::config::resolve_algo;

/// Environment variable naming the directory for default output paths.
pub const OUT_DIR_ENV: &str = "EVCSL_OUT_DIR";

const FORMAT_DOCS: &str = "File formats (instance/solution JSON, report and ECDF CSV) are \
documented in docs/formats.md at the repository root.";

#[derive(Parser)]
#[command(
    name = "evcsl",
    version,
    about = "EV charging station location: instances, solvers, benchmarks",
    after_help = FORMAT_DOCS
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file.
    Generate(GenerateArgs),
    /// Build an instance from city CSV files (clients, candidates, substations).
    Import(ImportArgs),
    /// Score a solution file against an instance.
    Evaluate(EvaluateArgs),
    /// Run one solver and write the best solution found.
    Solve(SolveArgs),
    /// Run a batch of independent solver runs and write a report CSV.
    Bench(BenchArgs),
    /// Merge report CSVs: summary table, pairwise Wilcoxon matrix, ECDFs.
    Report(ReportArgs),
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Import(args) => import(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Solve(args) => solve(args),
        Command::Bench(args) => bench(args),
        Command::Report(args) => report(args),
    }
}

fn parse_cap(s: &str) -> Result<DistanceCap, String> {
    if s == "unbounded" {
        return Ok(DistanceCap::Unbounded);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected meters or \"unbounded\", got `{s}`"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("distance cap must be non-negative and finite, got {v}"));
    }
    Ok(DistanceCap::Meters(v))
}

/// Joins `file` onto the default output directory (`EVCSL_OUT_DIR`, or the
/// working directory when unset).
fn default_out(file: &str) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(file),
        None => PathBuf::from(file),
    }
}

fn instance_label(instance: &Instance, path: &Path) -> String {
    instance
        .name()
        .map(str::to_string)
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".to_string())
        })
}

fn budget_from(evals: Option<u64>, seconds: Option<f64>) -> Result<Budget> {
    Budget::new(evals, seconds).map_err(|e| anyhow::anyhow!("{e}; pass --evals and/or --seconds"))
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GeometryArg {
    Uniform,
    Clustered,
}

#[derive(Args)]
struct GenerateArgs {
    /// Named generator preset; `malaga-like` mirrors the full-city
    /// dimensions (363 clients, 33550 candidates, 14 substations).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, required_unless_present = "preset")]
    clients: Option<usize>,
    #[arg(long, required_unless_present = "preset")]
    candidates: Option<usize>,
    #[arg(long, required_unless_present = "preset")]
    substations: Option<usize>,
    /// Number of stations every solution opens (Ms).
    #[arg(long)]
    stations: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    geometry: GeometryArg,
    #[arg(long, default_value_t = 10_000.0)]
    side_m: f64,
    #[arg(long, default_value_t = 8)]
    hotspots: usize,
    #[arg(long, default_value_t = 500.0)]
    hotspot_stddev_m: f64,
    #[arg(long, default_value_t = 1.0)]
    users_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    users_max: f64,
    #[arg(long, default_value_t = 2)]
    capacity_min: u32,
    #[arg(long, default_value_t = 6)]
    capacity_max: u32,
    /// Client distance cap in meters, or "unbounded".
    #[arg(long, value_parser = parse_cap, default_value = "unbounded")]
    max_client_dist: DistanceCap,
    /// Substation distance cap in meters, or "unbounded".
    #[arg(long, value_parser = parse_cap, default_value = "unbounded")]
    max_substation_dist: DistanceCap,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
    /// Output path [default: $EVCSL_OUT_DIR/instance.json]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let spec = match args.preset.as_deref() {
        Some("malaga-like") => {
            let mut spec = malaga_like(args.stations, args.seed);
            if let Some(name) = args.name {
                spec.name = Some(name);
            }
            spec
        }
        Some(other) => bail!("unknown generator preset `{other}` (available: malaga-like)"),
        None => SyntheticSpec {
            name: args.name,
            n_clients: args.clients.expect("required by clap"),
            n_candidates: args.candidates.expect("required by clap"),
            n_substations: args.substations.expect("required by clap"),
            n_stations: args.stations,
            geometry: match args.geometry {
                GeometryArg::Uniform => Geometry::UniformSquare { side_m: args.side_m },
                GeometryArg::Clustered => Geometry::Clustered {
                    side_m: args.side_m,
                    n_hotspots: args.hotspots,
                    hotspot_stddev_m: args.hotspot_stddev_m,
                },
            },
            users_range: (args.users_min, args.users_max),
            capacity_range: (args.capacity_min, args.capacity_max),
            max_client_dist: args.max_client_dist,
            max_substation_dist: args.max_substation_dist,
            seed: args.seed,
        },
    };

    let instance = generate_synthetic(&spec)?;
    let out = args.output.unwrap_or_else(|| default_out("instance.json"));
    save_instance(&instance, &out)?;
    eprintln!(
        "generated instance: {} clients, {} candidates, {} substations, Ms={} -> {}",
        instance.n_clients(),
        instance.n_candidates(),
        instance.n_substations(),
        instance.n_stations(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct ImportArgs {
    /// Clients CSV with header id,lon,lat,population.
    #[arg(long)]
    clients: PathBuf,
    /// Candidates CSV with header id,lon,lat.
    #[arg(long)]
    candidates: PathBuf,
    /// Substations CSV with header id,lon,lat,capacity.
    #[arg(long)]
    substations: PathBuf,
    #[arg(long)]
    stations: usize,
    #[arg(long, value_parser = parse_cap, default_value = "unbounded")]
    max_client_dist: DistanceCap,
    #[arg(long, value_parser = parse_cap, default_value = "unbounded")]
    max_substation_dist: DistanceCap,
    #[arg(long)]
    name: Option<String>,
    /// Output path [default: $EVCSL_OUT_DIR/instance.json]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn import(args: ImportArgs) -> Result<ExitCode> {
    let instance = import_city(
        &args.clients,
        &args.candidates,
        &args.substations,
        &ImportParams {
            name: args.name,
            n_stations: args.stations,
            max_client_dist: args.max_client_dist,
            max_substation_dist: args.max_substation_dist,
        },
    )?;
    let out = args.output.unwrap_or_else(|| default_out("instance.json"));
    save_instance(&instance, &out)?;
    eprintln!(
        "imported instance: {} clients, {} candidates, {} substations -> {}",
        instance.n_clients(),
        instance.n_candidates(),
        instance.n_substations(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

fn evaluation_json(eval: &Evaluation) -> serde_json::Value {
    serde_json::json!({
        "objective": eval.objective,
        "avg_distance_m": eval.avg_distance,
        "dc_violations": eval.dc_violations,
        "substation_feasible": eval.substation_feasible,
        "total_violations": eval.violations(),
        "substation_assignment": eval.substation_assignment,
    })
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<ExitCode> {
    let instance = load_instance(&args.instance)?;
    let solution = load_solution(&args.solution, &instance)?;
    let eval = evaluate(&instance, &solution);
    println!("{}", evaluation_json(&eval));
    if eval.is_feasible() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "solution is infeasible: {} distance-cap violations, substation assignment {}",
            eval.dc_violations,
            if eval.substation_feasible { "ok" } else { "impossible" }
        );
        Ok(ExitCode::from(2))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solver: ga or vns. Implied by --preset.
    #[arg(long)]
    algo: Option<String>,
    /// Preset name: GA-1, GA-2, VNS-1 or VNS-2.
    #[arg(long)]
    preset: Option<String>,
    /// JSON file overriding individual configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stop after this many solution evaluations.
    #[arg(long)]
    evals: Option<u64>,
    /// Stop after this many wall-clock seconds.
    #[arg(long)]
    seconds: Option<f64>,
    /// Solution output path [default: $EVCSL_OUT_DIR/solution.json]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let instance = load_instance(&args.instance)?;
    let (spec, preset_label) = resolve_algo(
        args.algo.as_deref(),
        args.preset.as_deref(),
        args.config.as_deref(),
    )?;
    let budget = budget_from(args.evals, args.seconds)?;

    let result = spec.run(&instance, args.seed, budget)?;
    let out = args.output.unwrap_or_else(|| default_out("solution.json"));
    save_solution(&result.best_solution, &out)?;

    let best = &result.best_evaluation;
    let summary = serde_json::json!({
        "instance": instance_label(&instance, &args.instance),
        "algorithm": spec.algorithm_name(),
        "preset": preset_label,
        "seed": args.seed,
        "avg_distance_m": best.avg_distance,
        "objective": best.objective,
        "dc_violations": best.dc_violations,
        "substation_feasible": best.substation_feasible,
        "evaluations": result.evaluations,
        "wall_seconds": result.wall_seconds,
        "solution_path": out.display().to_string(),
    });
    println!("{summary}");

    if best.is_feasible() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("best solution found is infeasible");
        Ok(ExitCode::from(2))
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Seeds are base-seed .. base-seed + runs - 1.
    #[arg(long, default_value_t = 1)]
    base_seed: u64,
    #[arg(long)]
    evals: Option<u64>,
    #[arg(long)]
    seconds: Option<f64>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Report CSV path [default: $EVCSL_OUT_DIR/report.csv]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let instance = load_instance(&args.instance)?;
    let (spec, preset_label) = resolve_algo(
        args.algo.as_deref(),
        args.preset.as_deref(),
        args.config.as_deref(),
    )?;
    let budget = budget_from(args.evals, args.seconds)?;
    let label = instance_label(&instance, &args.instance);

    eprintln!(
        "running {} x {} (seeds {}..{}), parallelism {}",
        args.runs,
        preset_label,
        args.base_seed,
        args.base_seed + args.runs as u64 - 1,
        args.parallel
    );
    let report = run_batch(
        &instance,
        &label,
        &spec,
        &preset_label,
        args.runs,
        args.base_seed,
        budget,
        args.parallel,
    )?;

    let out = args.output.unwrap_or_else(|| default_out("report.csv"));
    let file = File::create(&out).with_context(|| format!("cannot write {}", out.display()))?;
    write_report_csv(&report_rows(&report), BufWriter::new(file))?;
    eprintln!("report written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct ReportArgs {
    /// One or more report CSVs produced by `evcsl bench`.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Print summary values divided by 100 (the usual table convention).
    #[arg(long)]
    scale_x100: bool,
    /// Baseline average distance in meters; enables improvement ECDFs.
    #[arg(long)]
    baseline: Option<f64>,
    /// Directory for ECDF CSVs [default: $EVCSL_OUT_DIR or .]
    #[arg(long)]
    ecdf_dir: Option<PathBuf>,
    /// Significance level for the Wilcoxon matrix.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for path in &args.reports {
        let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
        rows.extend(read_report_csv(file)?);
    }
    if rows.is_empty() {
        bail!("the report files contain no runs");
    }

    // Group by (instance, algorithm, preset), preserving input order.
    let mut groups: Vec<(GroupKey, Vec<ReportRow>)> = Vec::new();
    for row in rows {
        let key = GroupKey {
            instance: row.instance.clone(),
            algorithm: row.algorithm.clone(),
            preset: row.preset.clone(),
        };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row),
            None => groups.push((key, vec![row])),
        }
    }

    let scale = if args.scale_x100 { 0.01 } else { 1.0 };
    println!("# summary{}", if args.scale_x100 { " (values x 10^-2)" } else { "" });
    println!("instance,algorithm,preset,n,mean_sd,min,median,max");
    for (key, rows) in &groups {
        let values: Vec<f64> = rows.iter().map(|r| r.best_avg_distance_m * scale).collect();
        let s = summarize(&values)?;
        println!(
            "{},{},{},{},{},{:.2},{:.2},{:.2}",
            key.instance,
            key.algorithm,
            key.preset,
            s.n,
            format_mean_sd(s.mean, s.sd),
            s.min,
            s.median,
            s.max
        );
    }

    wilcoxon_matrix(&groups, args.alpha)?;

    if let Some(baseline) = args.baseline {
        let dir = args
            .ecdf_dir
            .clone()
            .unwrap_or_else(|| default_out(""));
        let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        for (key, rows) in &groups {
            let values: Vec<f64> = rows.iter().map(|r| r.best_avg_distance_m).collect();
            let points = improvement_ecdf(&values, baseline)?;
            let name = format!(
                "ecdf_{}_{}_{}.csv",
                sanitize(&key.instance),
                sanitize(&key.algorithm),
                sanitize(&key.preset)
            );
            let path = dir.join(name);
            let file =
                File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
            write_ecdf_csv(&points, BufWriter::new(file))?;
            eprintln!("ecdf written to {}", path.display());
        }
    }

    Ok(ExitCode::SUCCESS)
}

#[derive(Clone, PartialEq, Eq)]
struct GroupKey {
    instance: String,
    algorithm: String,
    preset: String,
}

impl GroupKey {
    fn label(&self) -> String {
        format!("{}/{}", self.algorithm, self.preset)
    }
}

/// Pairwise two-sided Wilcoxon signed-rank tests between all groups of the
/// same instance, paired by seed, Bonferroni-corrected over the number of
/// comparisons per instance.
fn wilcoxon_matrix(groups: &[(GroupKey, Vec<ReportRow>)], alpha: f64) -> Result<()> {
    let mut instances: Vec<&str> = Vec::new();
    for (key, _) in groups {
        if !instances.contains(&key.instance.as_str()) {
            instances.push(&key.instance);
        }
    }

    for instance in instances {
        let members: Vec<&(GroupKey, Vec<ReportRow>)> = groups
            .iter()
            .filter(|(k, _)| k.instance == instance)
            .collect();
        if members.len() < 2 {
            continue;
        }
        let m = members.len() * (members.len() - 1) / 2;
        println!("# wilcoxon instance={instance} (two-sided, Bonferroni m={m}, alpha={alpha})");
        println!("group_a,group_b,n_pairs,w,p,p_adj,significant");
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let (ka, rows_a) = members[i];
                let (kb, rows_b) = members[j];
                let (a, b) = paired_by_seed(rows_a, rows_b);
                if a.len() < rows_a.len() || a.len() < rows_b.len() {
                    eprintln!(
                        "warning: {} vs {} on {}: only {} common seeds",
                        ka.label(),
                        kb.label(),
                        instance,
                        a.len()
                    );
                }
                match wilcoxon_signed_rank(&a, &b) {
                    Ok(result) => {
                        let p_adj = bonferroni(&[result.p_value], m)?[0];
                        println!(
                            "{},{},{},{},{:.6},{:.6},{}",
                            ka.label(),
                            kb.label(),
                            result.n_used,
                            result.w_statistic,
                            result.p_value,
                            p_adj,
                            p_adj < alpha
                        );
                    }
                    Err(StatError::TooFewPairs(n)) => {
                        println!("{},{},{},n/a,n/a,n/a,false", ka.label(), kb.label(), n);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(())
}

/// Values of the two groups restricted to their common seeds, in seed order.
fn paired_by_seed(a: &[ReportRow], b: &[ReportRow]) -> (Vec<f64>, Vec<f64>) {
    let by_seed: BTreeMap<u64, f64> = a.iter().map(|r| (r.seed, r.best_avg_distance_m)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut b_sorted: Vec<&ReportRow> = b.iter().collect();
    b_sorted.sort_by_key(|r| r.seed);
    for row in b_sorted {
        if let Some(&x) = by_seed.get(&row.seed) {
            xs.push(x);
            ys.push(row.best_avg_distance_m);
        }
    }
    (xs, ys)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}
