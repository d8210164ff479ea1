use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandit-cpe"))
        .args(args)
        .env("BANDIT_CPE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Drop the two wall-clock columns so runs can be compared byte for byte.
fn without_clock(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            [&f[..10], &f[12..]].concat().join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const SYNTHETIC: &str = r#"{
    "algorithm": "icb",
    "n": 6,
    "k": 3,
    "epsilon": 0.2,
    "delta_min": 0.5,
    "seeds": [3, 1, 2],
    "check_every": 5
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_rows_in_seed_order_and_is_reproducible() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = bin(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read_to_string(out.join("results.csv")).unwrap());
    }
    let lines: Vec<&str> = outputs[0].lines().collect();
    assert_eq!(
        lines[0],
        "seed,algorithm,n,k,delta_min,epsilon,samples,stopped,correct,output,wall_clock_total,wall_clock_per_round_mean,trace_file"
    );
    assert_eq!(lines.len(), 4);
    let seeds: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(seeds, ["3", "1", "2"]);
    for l in &lines[1..] {
        let trace = l.rsplit(',').next().unwrap();
        let text = fs::read_to_string(dir.path().join("a").join(trace)).unwrap();
        assert!(text.starts_with("round,empirical_best_value,margin,alpha,ratio,round_seconds\n"));
        assert!(text.lines().count() > 1);
        assert!(l.contains(",true,"));
    }
    assert_eq!(without_clock(&outputs[0]), without_clock(&outputs[1]));
}

#[test]
fn flags_override_config() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC);
    let out = dir.path().join("o");
    let o = bin(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "9",
        "--algorithm",
        "exhaustive",
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("9,exhaustive,6,3,0.5,0.2,"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempdir().unwrap();
    let cases = [
        SYNTHETIC.replace("\"check_every\"", "\"surprise\": 1, \"check_every\""),
        SYNTHETIC.replace("\"epsilon\": 0.2", "\"epsilon\": -0.2"),
        SYNTHETIC.replace("icb", "quantum"),
        "{ not json".to_string(),
    ];
    for text in cases {
        let cfg = write_config(dir.path(), &text);
        let o = bin(&[
            "run",
            "--config",
            &cfg,
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(!o.stderr.is_empty());
    }
    let o = bin(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_is_a_row_not_an_error() {
    let dir = tempdir().unwrap();
    let text = SYNTHETIC
        .replace("\"check_every\": 5", "\"budget\": 40, \"epsilon\": 0.0")
        .replace("\"epsilon\": 0.2,", "");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("o");
    let o = bin(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    for row in text.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[6], "40");
        assert_eq!(f[7], "false");
    }
}

#[test]
fn crowd_experiment_runs_from_files() {
    let dir = tempdir().unwrap();
    let mut labels = String::from("task_id,worker_id,label\n");
    let mut truth = String::from("task_id,label\n");
    for t in 0..40 {
        truth.push_str(&format!("t{t},1\n"));
        for w in 0..5 {
            let right = (t * 7 + w * 3) % 10 < 9 - 2 * w;
            labels.push_str(&format!("t{t},w{w},{}\n", if right { 1 } else { 0 }));
        }
    }
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    fs::write(dir.path().join("truth.csv"), truth).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"algorithm": "icb", "k": 2, "epsilon": 0.3, "seeds": [0, 1],
            "environment": {"type": "crowd", "labels": "labels.csv", "truth": "truth.csv"}}"#,
    );
    let out = dir.path().join("o");
    let o = bin(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0,icb,5,2,,0.3,"));

    fs::remove_file(dir.path().join("truth.csv")).unwrap();
    let o = bin(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_with_no_algorithms_writes_header_only() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = bin(&[
        "bench",
        "--n",
        "10,12",
        "--algos",
        "",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "algorithm,n,k,rounds,per_round_seconds\n"
    );
}

#[test]
fn bench_notes_skipped_exhaustive() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = bin(&[
        "bench",
        "--n",
        "8,24",
        "--algos",
        "icb,exhaustive",
        "--rounds",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipping exhaustive at n = 24"));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().any(|r| r.starts_with("icb,24,12,20,")));
    let o = bin(&["bench", "--n", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn result_line(seed: u64, alg: &str, n: usize, dmin: &str, samples: u64, trace: &str) -> String {
    format!("{seed},{alg},{n},3,{dmin},0.1,{samples},true,true,0 1 2,0.5,0.001,{trace}\n")
}

const HEADER: &str = "seed,algorithm,n,k,delta_min,epsilon,samples,stopped,correct,output,wall_clock_total,wall_clock_per_round_mean,trace_file\n";

#[test]
fn report_groups_and_averages() {
    let dir = tempdir().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir_all(runs.join("traces")).unwrap();
    fs::write(
        runs.join("traces/a.csv"),
        "round,empirical_best_value,margin,alpha,ratio,round_seconds\n10,1,0,0.9,0.8,0\n20,1,0,0.9,1,0\n",
    )
    .unwrap();
    fs::write(
        runs.join("traces/b.csv"),
        "round,empirical_best_value,margin,alpha,ratio,round_seconds\n10,1,0,0.9,0.6,0\n",
    )
    .unwrap();
    let first = [
        HEADER.to_string(),
        result_line(0, "saqm", 8, "0.5", 100, "traces/a.csv"),
        result_line(0, "icb", 8, "0.5", 7, ""),
    ]
    .concat();
    let second = [
        HEADER.to_string(),
        result_line(1, "saqm", 8, "0.5", 200, "traces/b.csv"),
        result_line(1, "saqm", 8, "1", 50, ""),
    ]
    .concat();
    fs::write(runs.join("r1.csv"), first).unwrap();
    fs::write(runs.join("r2.csv"), second).unwrap();

    let out = dir.path().join("rep");
    let pattern = format!("{}/r*.csv", runs.display());
    let o = bin(&["report", &pattern, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let rows: Vec<Vec<String>> = agg
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let saqm = rows
        .iter()
        .find(|r| r[0] == "saqm" && r[3] == "0.5")
        .unwrap();
    assert_eq!(saqm[4], "2");
    assert_eq!(saqm[5].parse::<f64>().unwrap(), 150.0);
    assert_eq!(saqm[6].parse::<f64>().unwrap(), 50.0);
    let ratio = fs::read_to_string(out.join("ratio_saqm_n8_k3_dmin0.5.dat")).unwrap();
    let pts: Vec<&str> = ratio.lines().skip(1).collect();
    assert_eq!(pts, ["10 0.7 2", "20 1 1"]);
    let samples = fs::read_to_string(out.join("samples_saqm_n8_k3.dat")).unwrap();
    assert_eq!(
        samples.lines().skip(1).collect::<Vec<_>>(),
        ["0.5 150 50", "1 50 0"]
    );
    assert!(out.join("seconds_icb.dat").is_file());

    let o = bin(&[
        "report",
        &format!("{}/nothing*.csv", runs.display()),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dks_tool_prints_subset_and_value() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("g.csv");
    fs::write(&g, "i,j,weight\n0,1,5\n0,2,1\n1,2,1\n").unwrap();
    let o = bin(&["dks", g.to_str().unwrap(), "--k", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "subset,value\n0 1,5\n");
    let o = bin(&["dks", g.to_str().unwrap(), "--k", "3", "--exact"]);
    assert_eq!(stdout(&o), "subset,value\n0 1 2,7\n");
    let o = bin(&["dks", g.to_str().unwrap(), "--k", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn galloc_tool_prints_allocation() {
    let o = bin(&[
        "galloc",
        "--n",
        "5",
        "--k",
        "2",
        "--strategy",
        "cyclic",
        "--t",
        "12",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "super_arm,probability,count");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0 1,0.2,3");
    let total: u64 = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 12);
    let o = bin(&[
        "galloc",
        "--n",
        "5",
        "--k",
        "2",
        "--strategy",
        "spiral",
        "--t",
        "12",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
