//! End-to-end tests of the `raxon` binary.

use std::path::Path;
use std::process::{Command, Output};

fn raxon(args: &[&str], envs: &[(&str, &str)], cwd: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_raxon"));
    cmd.args(args).current_dir(cwd);
    cmd.env_remove("RAXON_DB");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("report key {key} missing in:\n{text}"))
        .to_owned()
}

fn gen_corpus(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "gen",
        "--output",
        "data.nt",
        "--shape",
        "chain",
        "--size",
        "5",
        "--records",
        "50",
        "--typed",
        "--link-density",
        "0.5",
        "--seed",
        "13",
    ];
    args.extend_from_slice(extra);
    let out = raxon(&args, &[], dir);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn usage_error_exits_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = raxon(&["load", "--nonsense"], &[], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let help = raxon(&["--help"], &[], dir.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("load"));
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let first = std::fs::read(dir.path().join("data.nt")).unwrap();
    std::fs::remove_file(dir.path().join("data.nt")).unwrap();
    gen_corpus(dir.path(), &[]);
    let second = std::fs::read(dir.path().join("data.nt")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn load_reports_are_identical_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let one = raxon(
        &["load", "--input", "data.nt", "--db", "db_a", "--m", "0.3"],
        &[],
        dir.path(),
    );
    let two = raxon(
        &["load", "--input", "data.nt", "--db", "db_b", "--m", "0.3"],
        &[],
        dir.path(),
    );
    assert!(one.status.success() && two.status.success());
    let strip = |text: &str| -> Vec<String> {
        text.lines()
            .filter(|l| !l.starts_with("wall_time_ms:") && !l.starts_with("db_dir:"))
            .map(str::to_owned)
            .collect()
    };
    assert_eq!(strip(&stdout(&one)), strip(&stdout(&two)));
}

#[test]
fn algo_none_yields_one_table_per_cs() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let out = raxon(
        &["load", "--input", "data.nt", "--db", "db", "--algo", "none"],
        &[],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(report_value(&text, "tables"), report_value(&text, "cs_count"));
    assert_eq!(report_value(&text, "dense_coverage"), "1.0");
}

#[test]
fn m_one_yields_single_table_with_zero_dense_coverage() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let out = raxon(
        &["load", "--input", "data.nt", "--db", "db", "--m", "1"],
        &[],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(report_value(&text, "tables"), "1");
    assert_eq!(report_value(&text, "dense_count"), "0");
    assert_eq!(report_value(&text, "dense_coverage"), "0.0");
}

#[test]
fn load_refuses_non_empty_target() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    std::fs::create_dir(dir.path().join("db")).unwrap();
    std::fs::write(dir.path().join("db/junk"), "x").unwrap();
    let out = raxon(
        &["load", "--input", "data.nt", "--db", "db"],
        &[],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not empty"));
}

#[test]
fn query_flow_returns_expected_bindings() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tiny.nt"),
        "<a> <p> <b> .\n<b> <q> \"v\" .\n<c> <p> <b> .\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("q.rq"),
        "SELECT ?x WHERE { ?x <p> ?y . ?y <q> \"v\" }",
    )
    .unwrap();
    let load = raxon(
        &["load", "--input", "tiny.nt", "--db", "db"],
        &[],
        dir.path(),
    );
    assert!(load.status.success(), "{}", stderr(&load));
    let out = raxon(&["query", "--db", "db", "--file", "q.rq"], &[], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines: Vec<&str> = text.lines().map(str::trim).collect();
    assert_eq!(lines.remove(0), "?x");
    lines.sort_unstable();
    assert_eq!(lines, vec!["<a>", "<c>"]);
}

#[test]
fn query_env_var_supplies_database() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.nt"), "<a> <p> <b> .\n").unwrap();
    std::fs::write(dir.path().join("q.rq"), "SELECT ?x WHERE { ?x <p> ?y }").unwrap();
    let load = raxon(
        &["load", "--input", "tiny.nt", "--db", "db"],
        &[],
        dir.path(),
    );
    assert!(load.status.success());
    let out = raxon(
        &["query", "--file", "q.rq"],
        &[("RAXON_DB", "db")],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("<a>"));
}

#[test]
fn query_on_empty_database_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.nt"), "").unwrap();
    std::fs::write(dir.path().join("q.rq"), "SELECT ?x WHERE { ?x <p> ?y }").unwrap();
    let load = raxon(
        &["load", "--input", "empty.nt", "--db", "db"],
        &[],
        dir.path(),
    );
    assert!(load.status.success(), "{}", stderr(&load));
    let out = raxon(&["query", "--db", "db", "--file", "q.rq"], &[], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "?x\n");
}

#[test]
fn explain_prints_permutations_before_results() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let load = raxon(
        &["load", "--input", "data.nt", "--db", "db", "--m", "0.3"],
        &[],
        dir.path(),
    );
    assert!(load.status.success());
    std::fs::write(
        dir.path().join("q.rq"),
        "SELECT * WHERE { ?a <http://synth.example/p0> ?b . ?b <http://synth.example/p1> ?c }",
    )
    .unwrap();
    let out = raxon(
        &["query", "--db", "db", "--file", "q.rq", "--explain"],
        &[],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# permutations:"));
    assert!(text.contains("# matches q0:"));
    let perm_line = text.lines().position(|l| l.starts_with("# permutations:"));
    let header_line = text.lines().position(|l| !l.starts_with('#'));
    assert!(perm_line.unwrap() < header_line.unwrap());
}

#[test]
fn unsupported_feature_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.nt"), "<a> <p> <b> .\n").unwrap();
    let load = raxon(
        &["load", "--input", "tiny.nt", "--db", "db"],
        &[],
        dir.path(),
    );
    assert!(load.status.success());
    std::fs::write(
        dir.path().join("q.rq"),
        "SELECT * WHERE { ?x <p> ?y . OPTIONAL { ?x <q> ?z } }",
    )
    .unwrap();
    let out = raxon(&["query", "--db", "db", "--file", "q.rq"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("OPTIONAL"));
}

#[test]
fn strict_parse_failure_names_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.nt"), "<a> <p> <b> .\nmalformed\n").unwrap();
    let out = raxon(
        &["load", "--input", "bad.nt", "--db", "db", "--strict"],
        &[],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"));
}

#[test]
fn stats_reports_lattice_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let out = raxon(&["stats", "--input", "data.nt"], &[], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(report_value(&text, "cs_count"), "5");
    report_value(&text, "direct_edges");
    report_value(&text, "closure_edges");
    assert!(text.lines().any(|l| l.starts_with("records_")));
}

#[test]
fn merge_plan_alias_and_json_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let full = raxon(
        &[
            "merge-plan",
            "--input",
            "data.nt",
            "--m",
            "0.3",
            "--json",
            "plan.json",
        ],
        &[],
        dir.path(),
    );
    assert!(full.status.success(), "{}", stderr(&full));
    let text = stdout(&full);
    report_value(&text, "total_cost");
    report_value(&text, "dense_coverage");
    assert!(text.lines().any(|l| l.starts_with("group_")));

    let alias = raxon(
        &["merge", "--input", "data.nt", "--m", "0.3"],
        &[],
        dir.path(),
    );
    assert_eq!(stdout(&alias), text);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.json")).unwrap())
            .unwrap();
    assert_eq!(json["tables"], json["groups"]);
}

#[test]
fn load_json_report_matches_text() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    let out = raxon(
        &[
            "load",
            "--input",
            "data.nt",
            "--db",
            "db",
            "--json-report",
            "report.json",
        ],
        &[],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(
        json["tables"].to_string(),
        report_value(&text, "tables"),
    );
    assert_eq!(
        json["ecs_links"].to_string(),
        report_value(&text, "ecs_links"),
    );
}

#[test]
fn verify_passes_on_generated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(
        dir.path(),
        &["--queries", "qs", "--query-count", "8"],
    );
    let out = raxon(
        &[
            "verify",
            "--input",
            "data.nt",
            "--queries",
            "qs",
            "--m-grid",
            "0,0.5,1",
        ],
        &[],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(report_value(&text, "mismatches"), "0");
    assert_eq!(report_value(&text, "queries"), "8");
}

#[test]
fn verify_empty_query_set_passes_with_zero_checks() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &[]);
    std::fs::create_dir(dir.path().join("qs")).unwrap();
    let out = raxon(
        &["verify", "--input", "data.nt", "--queries", "qs"],
        &[],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(report_value(&text, "checks"), "0");
}
