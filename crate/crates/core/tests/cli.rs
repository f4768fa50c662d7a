use std::path::PathBuf;
use std::process::{Command, Output};

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn cofe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cofe"))
        .args(args)
        .env_remove("COFE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn extract_smokers_gives_two_formulas() {
    let model = models().join("smokers.model");
    let o = cofe(&[
        "extract",
        path(&model),
        "--epsilon",
        "0.1",
        "--theta-d",
        "0.1",
        "--theta-n",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let formulas: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit() || c == '-'))
        .collect();
    assert_eq!(formulas.len(), 2, "{text}");
    assert!(formulas[0].starts_with("0.0  "));
    assert!(stderr(&o).contains("psi\tcluster\t2\t2"));
}

#[test]
fn extract_none_is_canonical() {
    let model = models().join("skewed.model");
    let o = cofe(&["extract", path(&model), "--epsilon", "0", "--strategy", "none"]);
    assert!(o.status.success());
    let n = stdout(&o).lines().filter(|l| l.contains("  ")).count();
    assert_eq!(n, 8);
}

#[test]
fn extract_quartiles() {
    let model = models().join("skewed.model");
    let o = cofe(&[
        "extract",
        path(&model),
        "--strategy",
        "quantile",
        "--epsilon",
        "0.09895",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("quantile(q=4)"), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("  ")).count(), 4);
}

#[test]
fn extract_then_query_agrees_with_reduced_model() {
    let dir = tempfile::tempdir().unwrap();
    let mln = dir.path().join("out.mln");
    let reduced = dir.path().join("reduced.model");
    let model = models().join("skewed.model");
    let o = cofe(&[
        "extract",
        path(&model),
        "--epsilon",
        "0.2",
        "-o",
        path(&mln),
        "--reduced-model",
        path(&reduced),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for q in ["a=1", "b=0 | c=1", "c=1 | a=0, b=1"] {
        let x: f64 = stdout(&cofe(&["query", path(&mln), q])).trim().parse().unwrap();
        let y: f64 = stdout(&cofe(&["query", path(&reduced), q])).trim().parse().unwrap();
        assert!((x - y).abs() <= 1e-6, "{q}: {x} vs {y}");
    }
}

#[test]
fn query_prints_six_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.model");
    std::fs::write(&m, "prv A\nparfactor g (A)\n0 1\n1 3\n").unwrap();
    let o = cofe(&["query", path(&m), "a=1"]);
    assert_eq!(stdout(&o), "0.750000\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.model");
    std::fs::write(&m, "prv A\nparfactor g (A)\n0 1\n1 3\n").unwrap();
    let o = cofe(&["query", path(&m), "a=1 | a"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("end of line"), "{}", stderr(&o));
    let o = cofe(&["query", path(&m), "a 1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'1'"));

    let bad = dir.path().join("bad.model");
    std::fs::write(&bad, "prv A\nparfactor g (A)\n0 1\n1 0\n").unwrap();
    let o = cofe(&["extract", path(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let broken = dir.path().join("broken.model");
    std::fs::write(&broken, "prv A\nparfactor g (A\n").unwrap();
    assert_eq!(cofe(&["extract", path(&broken)]).status.code(), Some(2));

    let o = cofe(&["extract", path(&m), "--epsilon", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_is_deterministic_and_honors_env_seed() {
    let args = ["eval", "--preset", "smokers1", "--reps", "3", "--domain-size", "2"];
    let a = cofe(&[&args[..], &["--seed", "7"]].concat());
    let b = cofe(&[&args[..], &["--seed", "7"]].concat());
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let env = Command::new(env!("CARGO_BIN_EXE_cofe"))
        .args(args)
        .env("COFE_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&env), stdout(&a));
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["smokers_domain_size"], 2);
}

#[test]
fn eval_formats() {
    let o = cofe(&["eval", "--preset", "art2", "--reps", "2", "--fig3"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 10);
    assert_eq!(text.lines().next().unwrap().split('\t').count(), 4);
    let o = cofe(&["eval", "--preset", "art2", "--reps", "2", "--format", "csv"]);
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 9);
    assert_eq!(cofe(&["eval", "--preset", "nope"]).status.code(), Some(3));
}

#[test]
fn convert_both_ways() {
    let dir = tempfile::tempdir().unwrap();
    let mln = dir.path().join("s.mln");
    let model = models().join("smokers.model");
    let o = cofe(&["convert", path(&model), "-o", path(&mln)]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(&mln)
            .unwrap()
            .lines()
            .filter(|l| l.contains("  "))
            .count(),
        8
    );
    let back = cofe(&["convert", path(&mln)]);
    assert!(back.status.success(), "{}", stderr(&back));
    assert!(stdout(&back).contains("parfactor g1 (Friends(X,Y), Smokes(X), Smokes(Y))"));

    let partial = dir.path().join("p.mln");
    std::fs::write(&partial, "prv A\nprv B\n1.0  a ^ b\n").unwrap();
    let o = cofe(&["convert", path(&partial)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("satisfies no formula"));
}

#[test]
fn version_flag() {
    let o = cofe(&["--version"]);
    assert!(stdout(&o).starts_with("cofe "));
}
