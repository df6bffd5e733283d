use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn treecost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treecost"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = treecost(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small dataset, labeled workload and hash-encoded checkpoint.
struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    work: PathBuf,
    ck: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    let work = dir.path().join("work");
    let ck = dir.path().join("model.ck");
    ok(&["gen-data", "--data-dir", s(&data), "--title-rows", "800", "--info-rows", "800", "--sample-size", "100"]);
    ok(&["gen-queries", "--data-dir", s(&data), "--workload-dir", s(&work), "--queries", "120", "--seed", "3"]);
    ok(&[
        "train", "--data-dir", s(&data), "--workload-dir", s(&work), "--checkpoint", s(&ck), "--omega", "1", "--epochs",
        "2",
    ]);
    Fixture { _dir: dir, data, work, ck }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = treecost(&["estimate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(treecost(&[]).status.code(), Some(1));
}

#[test]
fn help_prints_defaults() {
    let o = treecost(&["train", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("--batch-size <BATCH_SIZE>"));
    assert!(text.contains("[default: 64]"));
    assert!(stdout(&treecost(&["gen-data", "--help"])).contains("[default: 1000]"));
}

#[test]
fn data_and_model_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing");
    let o = treecost(&["evaluate", "--data-dir", s(&missing), "--workload-dir", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));

    let data = dir.path().join("data");
    ok(&["gen-data", "--data-dir", s(&data), "--title-rows", "50", "--info-rows", "50"]);
    let bogus = dir.path().join("bogus.ck");
    std::fs::write(&bogus, b"not a checkpoint").unwrap();
    let plan = dir.path().join("p.json");
    std::fs::write(&plan, r#"{"op":"SeqScan","table":"title"}"#).unwrap();
    let o = treecost(&["estimate", "--data-dir", s(&data), "--checkpoint", s(&bogus), s(&plan)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn pipeline_evaluate_and_estimate() {
    let f = fixture();
    let metrics = f.data.parent().unwrap().join("metrics.tsv");
    let out = ok(&[
        "evaluate", "--data-dir", s(&f.data), "--workload-dir", s(&f.work), "--checkpoint", s(&f.ck),
        "--metrics-out", s(&metrics), "--include-oracle",
    ]);
    assert!(out.starts_with("estimator\ttarget\tmedian"));
    let oracle: Vec<&str> = out.lines().filter(|l| l.starts_with("oracle")).collect();
    assert_eq!(oracle.len(), 2);
    for line in oracle {
        assert!(line.split('\t').skip(2).all(|v| v == "1.0000"), "{line}");
    }
    assert!(out.lines().any(|l| l.starts_with("model\tcard")));
    assert!(out.lines().any(|l| l.starts_with("baseline\tcost")));
    assert_eq!(std::fs::read_to_string(&metrics).unwrap(), out);
    let raw = std::fs::read_to_string(format!("{}.raw", metrics.display())).unwrap();
    assert_eq!(raw.lines().count(), 121);

    // Estimating the same plan twice: the repeat is answered from the pool.
    let plan = f.work.join("q00005.json");
    let out = ok(&["estimate", "--data-dir", s(&f.data), "--checkpoint", s(&f.ck), s(&plan), s(&plan)]);
    let lines: Vec<&str> = out.lines().collect();
    let value = |l: &str| l.split_once('\t').unwrap().1.to_string();
    assert_eq!(value(lines[1]), value(lines[2]));
    let counters = lines[3];
    assert!(counters.starts_with("cells "), "{counters}");
    assert!(!counters.contains("pool_hits 0"), "{counters}");
}

fn cells(out: &str) -> u64 {
    let last = out.lines().last().unwrap();
    last.split('\t').next().unwrap().trim_start_matches("cells ").parse().unwrap()
}

#[test]
fn pool_saves_cells_and_keeps_estimates() {
    let f = fixture();
    let base = ["estimate", "--data-dir", s(&f.data), "--checkpoint", s(&f.ck), "--workload-dir", s(&f.work)];
    let with_pool = ok(&base);
    let mut args = base.to_vec();
    args.extend(["--pool-capacity", "0"]);
    let without = ok(&args);
    let body = |o: &str| o.lines().skip(1).take(120).map(str::to_string).collect::<Vec<_>>();
    let (a, b) = (body(&with_pool), body(&without));
    for (x, y) in a.iter().zip(&b) {
        let parse = |l: &str| -> Vec<f64> { l.split('\t').skip(1).map(|v| v.parse().unwrap()).collect() };
        for (p, q) in parse(x).iter().zip(parse(y)) {
            assert!((p - q).abs() <= 1e-4 * q.abs().max(1.0), "{x} vs {y}");
        }
    }
    assert!(cells(&with_pool) < cells(&without), "{} vs {}", cells(&with_pool), cells(&without));
}

#[test]
fn fixed_seeds_reproduce_metrics() {
    let run = || {
        let f = fixture();
        ok(&["evaluate", "--data-dir", s(&f.data), "--workload-dir", s(&f.work), "--checkpoint", s(&f.ck)])
    };
    assert_eq!(run(), run());
}
