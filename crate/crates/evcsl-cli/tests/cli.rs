//! End-to-end tests of the `evcsl` binary: exit codes, file outputs and
//! the determinism contract.

use std::path::PathBuf;
use std::process::{Command, Output};

use evcsl::io::{load_solution, save_instance, save_solution};
use evcsl::model::{
    brute_force_optimum, compare, evaluate, DistanceCap, Instance, Matrix, Solution,
};
use tempfile::TempDir;

fn evcsl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evcsl"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stdout);
    let line = text.lines().last().unwrap_or_else(|| panic!("no stdout in {text:?}"));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stdout not JSON ({e}): {line}"))
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// 10 candidates on a line, 4 clients, Ms=3; small enough for the oracle.
fn tiny_instance() -> Instance {
    let xs: Vec<f64> = vec![0.0, 1.0, 3.0, 7.0, 12.0, 18.0, 25.0, 33.0, 42.0, 52.0];
    let clients = [2.0, 9.0, 24.0, 50.0];
    let dc: Vec<Vec<f64>> = clients
        .iter()
        .map(|&c| xs.iter().map(|&x| (c - x).abs()).collect())
        .collect();
    Instance::new(
        Some("tiny-line".into()),
        vec![3.0, 1.0, 2.0, 4.0],
        Matrix::from_rows(dc, xs.len()).unwrap(),
        Matrix::from_flat(1, xs.len(), vec![5.0; xs.len()]).unwrap(),
        DistanceCap::Unbounded,
        DistanceCap::Unbounded,
        vec![3],
        3,
        None,
    )
    .unwrap()
}

fn write_tiny_instance(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("tiny.json");
    save_instance(&tiny_instance(), &path).unwrap();
    path
}

#[test]
fn solve_reaches_the_oracle_optimum_on_a_tiny_instance() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);
    let solution_path = dir.path().join("sol.json");

    let out = run(evcsl()
        .arg("solve")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "GA-2"])
        .args(["--evals", "20000"])
        .args(["--seed", "7"])
        .args(["--output", solution_path.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let instance = tiny_instance();
    let found = load_solution(&solution_path, &instance).unwrap();
    let found_eval = evaluate(&instance, &found);
    let (_, oracle_eval) = brute_force_optimum(&instance).unwrap();
    assert_eq!(
        compare(&found_eval, &oracle_eval),
        std::cmp::Ordering::Equal,
        "GA-2 found {} vs oracle {}",
        found_eval.avg_distance,
        oracle_eval.avg_distance
    );

    let summary = stdout_json(&out);
    assert_eq!(summary["algorithm"], "ga");
    assert_eq!(summary["preset"], "GA-2");
    assert_eq!(summary["avg_distance_m"].as_f64().unwrap(), found_eval.avg_distance);
}

#[test]
fn missing_instance_file_exits_one_with_error() {
    let out = run(evcsl()
        .arg("solve")
        .args(["--instance", "/nonexistent/instance.json"])
        .args(["--preset", "GA-2"])
        .args(["--evals", "10"]));
    assert_eq!(exit_code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn wall_clock_budget_flag_is_accepted() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);
    // The 60 s limit is the paper-style budget; the tiny eval budget makes
    // the run finish immediately (whichever hits first).
    let out = run(evcsl()
        .arg("solve")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "VNS-1"])
        .args(["--seconds", "60"])
        .args(["--evals", "300"])
        .args(["--output", dir.path().join("s.json").to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn budget_is_required() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);
    let out = run(evcsl()
        .arg("solve")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "GA-1"]));
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--evals"));
}

#[test]
fn evaluate_scores_solutions_and_flags_infeasibility() {
    let dir = TempDir::new().unwrap();

    // Zero-distance toy: a single co-located client and station.
    let zero = Instance::new(
        None,
        vec![1.0],
        Matrix::from_rows(vec![vec![0.0]], 1).unwrap(),
        Matrix::from_rows(vec![vec![0.0]], 1).unwrap(),
        DistanceCap::Unbounded,
        DistanceCap::Unbounded,
        vec![1],
        1,
        None,
    )
    .unwrap();
    let zero_path = dir.path().join("zero.json");
    save_instance(&zero, &zero_path).unwrap();
    let sol_path = dir.path().join("zero_sol.json");
    save_solution(&Solution::new(vec![0], &zero).unwrap(), &sol_path).unwrap();

    let out = run(evcsl()
        .arg("evaluate")
        .args(["--instance", zero_path.to_str().unwrap()])
        .args(["--solution", sol_path.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["avg_distance_m"].as_f64().unwrap(), 0.0);

    // Worked 2-client example: users (2,3), distances (5,9) and (8,4).
    let worked = Instance::new(
        None,
        vec![2.0, 3.0],
        Matrix::from_rows(vec![vec![5.0, 9.0], vec![8.0, 4.0]], 2).unwrap(),
        Matrix::from_rows(vec![vec![0.0, 0.0]], 2).unwrap(),
        DistanceCap::Unbounded,
        DistanceCap::Unbounded,
        vec![2],
        2,
        None,
    )
    .unwrap();
    let worked_path = dir.path().join("worked.json");
    save_instance(&worked, &worked_path).unwrap();
    let worked_sol = dir.path().join("worked_sol.json");
    save_solution(&Solution::new(vec![0, 1], &worked).unwrap(), &worked_sol).unwrap();
    let out = run(evcsl()
        .arg("evaluate")
        .args(["--instance", worked_path.to_str().unwrap()])
        .args(["--solution", worked_sol.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0);
    assert_eq!(stdout_json(&out)["avg_distance_m"].as_f64().unwrap(), 4.4);

    // Tight client cap: the only solution violates it -> exit 2.
    let capped = Instance::new(
        None,
        vec![1.0],
        Matrix::from_rows(vec![vec![500.0]], 1).unwrap(),
        Matrix::from_rows(vec![vec![0.0]], 1).unwrap(),
        DistanceCap::Meters(100.0),
        DistanceCap::Unbounded,
        vec![1],
        1,
        None,
    )
    .unwrap();
    let capped_path = dir.path().join("capped.json");
    save_instance(&capped, &capped_path).unwrap();
    let capped_sol = dir.path().join("capped_sol.json");
    save_solution(&Solution::new(vec![0], &capped).unwrap(), &capped_sol).unwrap();
    let out = run(evcsl()
        .arg("evaluate")
        .args(["--instance", capped_path.to_str().unwrap()])
        .args(["--solution", capped_sol.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 2);
    assert_eq!(stdout_json(&out)["dc_violations"].as_u64().unwrap(), 1);
}

#[test]
fn solve_exits_two_when_every_solution_is_infeasible() {
    let dir = TempDir::new().unwrap();
    // Capacity sum covers Ms, but the substation is out of range of every
    // candidate, so no solution has a valid assignment.
    let hopeless = Instance::new(
        None,
        vec![1.0],
        Matrix::from_rows(vec![vec![1.0, 2.0, 3.0]], 3).unwrap(),
        Matrix::from_rows(vec![vec![900.0, 900.0, 900.0]], 3).unwrap(),
        DistanceCap::Unbounded,
        DistanceCap::Meters(10.0),
        vec![2],
        2,
        None,
    )
    .unwrap();
    let path = dir.path().join("hopeless.json");
    save_instance(&hopeless, &path).unwrap();

    let out = run(evcsl()
        .arg("solve")
        .args(["--instance", path.to_str().unwrap()])
        .args(["--preset", "VNS-2"])
        .args(["--evals", "200"])
        .args(["--output", dir.path().join("s.json").to_str().unwrap()]));
    assert_eq!(exit_code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["substation_feasible"], false);
}

#[test]
fn solve_is_deterministic_for_fixed_seed_and_evals() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);

    let mut solutions = Vec::new();
    let mut summaries = Vec::new();
    for attempt in 0..2 {
        let sol = dir.path().join(format!("sol{attempt}.json"));
        let out = run(evcsl()
            .arg("solve")
            .args(["--instance", instance_path.to_str().unwrap()])
            .args(["--preset", "VNS-1"])
            .args(["--evals", "2000"])
            .args(["--seed", "42"])
            .args(["--output", sol.to_str().unwrap()]));
        assert_eq!(exit_code(&out), 0);
        solutions.push(std::fs::read(&sol).unwrap());
        let mut summary = stdout_json(&out);
        summary.as_object_mut().unwrap().remove("wall_seconds");
        summary.as_object_mut().unwrap().remove("solution_path");
        summaries.push(summary);
    }
    assert_eq!(solutions[0], solutions[1], "solution files must be byte-identical");
    assert_eq!(summaries[0], summaries[1]);
}

fn csv_without_wall_column(raw: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(raw)
        .lines()
        .map(|line| {
            let mut cols: Vec<&str> = line.split(',').collect();
            cols.pop();
            cols.join(",")
        })
        .collect()
}

#[test]
fn bench_is_deterministic_and_parallelism_independent() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);

    let mut reports = Vec::new();
    for (attempt, parallel) in ["1", "4", "1"].iter().enumerate() {
        let report = dir.path().join(format!("report{attempt}.csv"));
        let out = run(evcsl()
            .arg("bench")
            .args(["--instance", instance_path.to_str().unwrap()])
            .args(["--preset", "GA-1"])
            .args(["--runs", "4"])
            .args(["--base-seed", "10"])
            .args(["--evals", "500"])
            .args(["--parallel", parallel])
            .args(["--output", report.to_str().unwrap()]));
        assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(&report).unwrap());
    }
    // Identical rows apart from wall-clock timings.
    let a = csv_without_wall_column(&reports[0]);
    let b = csv_without_wall_column(&reports[1]);
    let c = csv_without_wall_column(&reports[2]);
    assert_eq!(a, b, "parallelism must not change results");
    assert_eq!(a, c, "repeat runs must be identical");
    assert_eq!(
        a[0],
        "instance,algorithm,preset,seed,best_avg_distance_m,evals"
    );
    assert_eq!(a.len(), 5); // header + 4 runs
}

#[test]
fn bench_single_run_matches_solve() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);

    let report_path = dir.path().join("report.csv");
    let out = run(evcsl()
        .arg("bench")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "VNS-2"])
        .args(["--runs", "1"])
        .args(["--base-seed", "77"])
        .args(["--evals", "800"])
        .args(["--output", report_path.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0);

    let solve_out = run(evcsl()
        .arg("solve")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "VNS-2"])
        .args(["--seed", "77"])
        .args(["--evals", "800"])
        .args(["--output", dir.path().join("s.json").to_str().unwrap()]));
    let summary = stdout_json(&solve_out);

    let report = String::from_utf8(std::fs::read(&report_path).unwrap()).unwrap();
    let row = report.lines().nth(1).expect("one data row");
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols[0], "tiny-line");
    assert_eq!(cols[1], "vns");
    assert_eq!(cols[2], "VNS-2");
    assert_eq!(cols[3], "77");
    assert_eq!(
        cols[4].parse::<f64>().unwrap(),
        summary["avg_distance_m"].as_f64().unwrap()
    );
    assert_eq!(
        cols[5].parse::<u64>().unwrap(),
        summary["evaluations"].as_u64().unwrap()
    );
}

#[test]
fn report_emits_summary_wilcoxon_matrix_and_ecdfs() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);

    let mut report_paths = Vec::new();
    for preset in ["GA-1", "GA-2"] {
        let path = dir.path().join(format!("{preset}.csv"));
        let out = run(evcsl()
            .arg("bench")
            .args(["--instance", instance_path.to_str().unwrap()])
            .args(["--preset", preset])
            .args(["--runs", "8"])
            .args(["--base-seed", "1"])
            .args(["--evals", "300"])
            .args(["--output", path.to_str().unwrap()]));
        assert_eq!(exit_code(&out), 0);
        report_paths.push(path);
    }

    let ecdf_dir = dir.path().join("ecdf");
    let out = run(evcsl()
        .arg("report")
        .arg("--reports")
        .args(report_paths.iter().map(|p| p.to_str().unwrap()))
        .args(["--baseline", "40.0"])
        .args(["--ecdf-dir", ecdf_dir.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("instance,algorithm,preset,n,mean_sd,min,median,max"), "{text}");
    assert!(text.contains("tiny-line,ga,GA-1,8,"), "{text}");
    assert!(text.contains("tiny-line,ga,GA-2,8,"), "{text}");
    assert!(text.contains("# wilcoxon instance=tiny-line"), "{text}");
    assert!(text.contains("Bonferroni m=1"), "{text}");
    assert!(text.contains("ga/GA-1,ga/GA-2,"), "{text}");

    for preset in ["GA-1", "GA-2"] {
        let path = ecdf_dir.join(format!("ecdf_tiny-line_ga_{preset}.csv"));
        let content = std::fs::read_to_string(&path)
            .unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert!(content.starts_with("improvement_pct,cum_fraction\n"));
        let last = content.trim_end().lines().last().unwrap();
        assert!(last.ends_with(",1"), "ECDF must end at fraction 1: {last}");
    }
}

#[test]
fn summary_shows_zero_sd_for_constant_runs() {
    let dir = TempDir::new().unwrap();
    // Ms = M: exactly one solution exists, so every run returns it.
    let forced = Instance::new(
        Some("forced".into()),
        vec![1.0, 2.0],
        Matrix::from_rows(vec![vec![4.0, 6.0], vec![6.0, 4.0]], 2).unwrap(),
        Matrix::from_rows(vec![vec![0.0, 0.0]], 2).unwrap(),
        DistanceCap::Unbounded,
        DistanceCap::Unbounded,
        vec![2],
        2,
        None,
    )
    .unwrap();
    let instance_path = dir.path().join("forced.json");
    save_instance(&forced, &instance_path).unwrap();

    let report_path = dir.path().join("report.csv");
    let out = run(evcsl()
        .arg("bench")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "GA-2"])
        .args(["--runs", "3"])
        .args(["--evals", "100"])
        .args(["--output", report_path.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0);

    let out = run(evcsl()
        .arg("report")
        .args(["--reports", report_path.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("±0.00"), "{text}");
}

#[test]
fn generate_writes_a_loadable_instance() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("gen.json");
    let out = run(evcsl()
        .arg("generate")
        .args(["--clients", "10"])
        .args(["--candidates", "25"])
        .args(["--substations", "2"])
        .args(["--stations", "5"])
        .args(["--geometry", "clustered"])
        .args(["--hotspots", "3"])
        .args(["--seed", "9"])
        .args(["--output", out_path.to_str().unwrap()]));
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let inst = evcsl::io::load_instance(&out_path).unwrap();
    assert_eq!(inst.n_clients(), 10);
    assert_eq!(inst.n_candidates(), 25);
    assert_eq!(inst.n_stations(), 5);
}

#[test]
fn out_dir_env_var_sets_default_output_location() {
    let dir = TempDir::new().unwrap();
    let instance_path = write_tiny_instance(&dir);
    let out = run(evcsl()
        .env(
            "EVCSL_OUT_DIR",
            dir.path().to_str().unwrap(),
        )
        .arg("solve")
        .args(["--instance", instance_path.to_str().unwrap()])
        .args(["--preset", "GA-2"])
        .args(["--evals", "100"]));
    assert_eq!(exit_code(&out), 0);
    assert!(dir.path().join("solution.json").exists());
}

#[test]
fn help_mentions_format_documentation() {
    let out = run(evcsl().arg("--help"));
    assert_eq!(exit_code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("docs/formats.md"));
}
