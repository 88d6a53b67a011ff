use std::path::Path;
use std::process::{Command, Output};

use ciu::report::{ContrastDocument, ReportDocument};

const BIN: &str = env!("CARGO_BIN_EXE_ciu-explain");
const ADAPTER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/fake_adapter.py");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("CIU_EXPLAIN_TIMEOUT_SECS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn external_scenario(dir: &Path, mode: &str) -> String {
    let body = format!(
        r#"
name = "external"

[[feature]]
name = "x1"
range = [0.0, 1.0]

[[feature]]
name = "x2"
range = [0.0, 1.0]

[model]
kind = "external"
command = ["python3", "{ADAPTER}", "{mode}", "[[0.5, 0.5]]"]

[[output]]
name = "y"
"#
    );
    write_scenario(dir, "external.toml", &body)
}

#[test]
fn explain_linear_demo_text() {
    let o = run(&["explain", "demo_linear", "--context", "0.3,0.6", "--output", "y", "--targets", "x1,x2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("x1 is important (CI=0.5) and its current value 0.3 is bad (CU=0.3) for y."), "{text}");
    assert!(text.contains("x2 is important (CI=0.5)"), "{text}");
}

#[test]
fn missing_context_is_a_usage_error() {
    let o = run(&["explain", "demo_linear", "--output", "y"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let o = run(&["explain", "demo_linear", "--context", "0.3,0.6", "--output", "y", "--strategy", "bogus"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn out_of_range_context_names_the_feature() {
    let o = run(&["explain", "demo_linear", "--context", "1.5,0.6", "--output", "y"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("x1"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn named_context_values_win_over_positional() {
    let o = run(&["explain", "demo_linear", "--context", "0.9,0.6,x1=0.3", "--output", "y", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = ReportDocument::from_json(stdout(&o).trim()).unwrap();
    assert_eq!(doc.context, vec![0.3, 0.6]);
}

#[test]
fn json_report_round_trips() {
    let o = run(&["explain", "demo_deflategate", "--context", "10.5,0.5,0.8", "--output", "throwability", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let doc = ReportDocument::from_json(text.trim()).unwrap();
    assert_eq!(doc.to_canonical_json(), text.trim_end());
    assert_eq!(doc.entries.len(), 5);

    let o = run(&[
        "contrast", "demo_deflategate", "--context", "10.5,0.5,0.8",
        "--output", "throwability", "--output", "compliance", "--json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let doc = ContrastDocument::from_json(text.trim()).unwrap();
    assert_eq!(doc.to_canonical_json(), text.trim_end());
}

#[test]
fn unknown_output_is_a_validation_error() {
    let o = run(&["explain", "demo_linear", "--context", "0.3,0.6", "--output", "z"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_target_is_a_validation_error() {
    let o = run(&["explain", "demo_linear", "--context", "0.3,0.6", "--output", "y", "--targets", "x9"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("x9"));
}

#[test]
fn refinement_with_monte_carlo_is_rejected() {
    let o = run(&[
        "explain", "demo_linear", "--context", "0.3,0.6", "--output", "y",
        "--strategy", "mc", "--refine", "2",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn contrast_deflategate_at_ten_and_a_half_psi() {
    let o = run(&[
        "contrast", "demo_deflategate", "--context", "psi=10.5,size=0.5,grip=0.8",
        "--output", "throwability,compliance",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("output throwability was preferred over compliance"), "{text}");
    assert!(text.contains("- for psi, the context favors throwability"), "{text}");
}

#[test]
fn contrast_needs_two_distinct_outputs() {
    let same = run(&[
        "contrast", "demo_deflategate", "--context", "10.5,0.5,0.8",
        "--output", "compliance", "--output", "compliance",
    ]);
    assert_eq!(code(&same), 1);
    let one = run(&["contrast", "demo_deflategate", "--context", "10.5,0.5,0.8", "--output", "compliance"]);
    assert_eq!(code(&one), 1);
    let unknown = run(&[
        "contrast", "demo_deflategate", "--context", "10.5,0.5,0.8",
        "--output", "compliance,nope",
    ]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn sweep_writes_one_row_per_probe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x1.csv");
    let o = run(&[
        "sweep", "demo_linear", "--context", "0.3,0.6", "--feature", "x1",
        "--resolution", "11", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("11 rows"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "value,out_0");
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[1], "0,0.3");
    assert_eq!(lines[11], "1,0.8");
}

#[test]
fn sweep_of_categorical_feature_is_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bev.csv");
    let o = run(&[
        "sweep", "demo_mug", "--context", "300,latte", "--feature", "beverage",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("espresso,"));
    assert!(lines[2].starts_with("latte,"));
}

#[test]
fn sweep_to_unwritable_path_fails() {
    let o = run(&[
        "sweep", "demo_linear", "--context", "0.3,0.6", "--feature", "x1",
        "--out", "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn validate_bundled_demos() {
    for demo in ["demo_linear", "demo_mug", "demo_deflategate"] {
        let o = run(&["validate", demo]);
        assert_eq!(code(&o), 0, "{demo}: {}", stderr(&o));
    }
}

#[test]
fn validate_reports_concept_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "cycle.toml",
        r#"
[[feature]]
name = "x1"
range = [0.0, 1.0]

[concepts]
alpha = ["beta"]
beta = ["alpha"]

[model]
kind = "linear"
weights = [[1.0]]

[[output]]
name = "y"
"#,
    );
    let o = run(&["validate", &path]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("alpha -> beta -> alpha") || err.contains("beta -> alpha -> beta"), "{err}");
}

#[test]
fn validate_rejects_overlapping_label_bands() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "bands.toml",
        r#"
[[feature]]
name = "x1"
range = [0.0, 1.0]

[model]
kind = "linear"
weights = [[1.0]]

[[output]]
name = "y"

[labels]
importance = [[0.5, "low"], [0.4, "lower"], [1.0, "high"]]
"#,
    );
    assert_eq!(code(&run(&["validate", &path])), 2);
}

#[test]
fn validate_probe_model_handshake() {
    let dir = tempfile::tempdir().unwrap();
    let good = external_scenario(dir.path(), "linear");
    let o = run(&["validate", &good, "--probe-model"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let bad = external_scenario(dir.path(), "bad_hello");
    // Without probing the adapter is never launched.
    assert_eq!(code(&run(&["validate", &bad])), 0);
    let o = run(&["validate", &bad, "--probe-model"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn external_model_matches_builtin_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = external_scenario(dir.path(), "linear");
    let ext = run(&["explain", &path, "--context", "0.3,0.6", "--output", "y", "--json"]);
    assert_eq!(code(&ext), 0, "{}", stderr(&ext));
    let own = run(&["explain", "demo_linear", "--context", "0.3,0.6", "--output", "y", "--json"]);
    let a = ReportDocument::from_json(stdout(&ext).trim()).unwrap();
    let b = ReportDocument::from_json(stdout(&own).trim()).unwrap();
    for (ea, eb) in a.entries.iter().zip(&b.entries) {
        assert_eq!(ea.target, eb.target);
        assert!((ea.ci - eb.ci).abs() <= 1e-9 && (ea.cu - eb.cu).abs() <= 1e-9);
    }
}

#[test]
fn adapter_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["nan", "error", "close"] {
        let path = external_scenario(dir.path(), mode);
        let o = run(&["explain", &path, "--context", "0.3,0.6", "--output", "y"]);
        assert_eq!(code(&o), 3, "{mode}: {}", stderr(&o));
    }
    let path = external_scenario(dir.path(), "error");
    let o = run(&["explain", &path, "--context", "0.3,0.6", "--output", "y"]);
    assert!(stderr(&o).contains("model exploded: input out of domain"));
}

#[test]
fn timeout_environment_variable_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let path = external_scenario(dir.path(), "slow");
    let o = Command::new(BIN)
        .args(["explain", &path, "--context", "0.3,0.6", "--output", "y"])
        .env("CIU_EXPLAIN_TIMEOUT_SECS", "0.5")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("did not answer within 500ms"), "{}", stderr(&o));

    let o = Command::new(BIN)
        .args(["explain", "demo_linear", "--context", "0.3,0.6", "--output", "y"])
        .env("CIU_EXPLAIN_TIMEOUT_SECS", "soon")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn seeded_monte_carlo_is_reproducible_and_jobs_do_not_matter() {
    let args = [
        "explain", "demo_deflategate", "--context", "12.5,0.3,0.6", "--output", "compliance",
        "--strategy", "mc", "--mc-samples", "300", "--seed", "42", "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let mut parallel = args.to_vec();
    parallel.extend(["--jobs", "4"]);
    assert_eq!(run(&parallel).stdout, a.stdout);

    let mut other = args.to_vec();
    other[10] = "43";
    assert_ne!(run(&other).stdout, a.stdout);
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("explain"));
}
