use std::process::{Command, Output};

fn volterra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volterra"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_prints_nodes() {
    let out = volterra(&["solve", "--problem", "exp_growth", "--steps", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,t,x");
    assert_eq!(lines.len(), 6);
    // (1 + 1/4)^4
    assert!(lines[5].ends_with("2.44140625000e0"), "{}", lines[5]);
}

#[test]
fn converge_csv_has_report_columns() {
    let out = volterra(&[
        "converge",
        "--problem",
        "exp_growth",
        "--steps",
        "25,50,100,200",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("M,h,error,order,bound"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][3], "");
    for row in &rows[1..] {
        let p: f64 = row[3].parse().unwrap();
        assert!((0.9..=1.1).contains(&p));
    }
}

#[test]
fn json_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("picard.json");
    let out = volterra(&[
        "picard",
        "--problem",
        "quadratic",
        "--steps",
        "50",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["converged"], true);
    assert!(v["iterations"].as_u64().unwrap() <= 51);
}

#[test]
fn problem_files_horizon_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lin.toml");
    std::fs::write(
        &path,
        "kind = \"second-kind\"\nhorizon = 1.0\n[forcing]\nexpr = \"1\"\n[[kernels]]\norder = 1\nexpr = \"-x1\"\n",
    )
    .unwrap();
    let out = volterra(&[
        "solve",
        "--problem",
        path.to_str().unwrap(),
        "--steps",
        "2",
        "--horizon",
        "2",
    ]);
    assert!(out.status.success());
    // x1 = 1 - 1, x2 = 1 - (1 + 0)
    assert!(stdout(&out)
        .lines()
        .last()
        .unwrap()
        .ends_with(",0.00000000000e0"));

    let out = volterra(&[
        "bounds",
        "--problem",
        "factorial_infinite",
        "--truncation",
        "4",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["truncation_order"], 4);
}

#[test]
fn reduce_warns_nothing_on_valid_problem() {
    let out = volterra(&[
        "reduce",
        "--problem",
        "classical_first_kind",
        "--steps",
        "10,20",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("M,h,error,order,bound\n"));
}

#[test]
fn verify_lemma41_reports_trials() {
    let out = volterra(&[
        "verify-lemma41",
        "--n",
        "3",
        "--i",
        "6",
        "--trials",
        "5",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 6);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], f[2]);
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "kind = \"first-kind\"\nhorizon = 1.0\n[rhs]\nf = \"t\"\n[[kernels]]\norder = 1\nk = \"1\"\nk_t = \"0\"\n").unwrap();
    for args in [
        vec!["solve", "--problem", "no_such_problem"],
        vec!["solve", "--problem", bad.to_str().unwrap()],
        vec!["solve", "--problem", "bilinear_first_kind"],
        vec!["solve", "--problem", "exp_growth", "--steps", "10,20"],
        vec!["converge", "--problem", "exp_growth", "--steps", "25,60"],
        vec!["solve", "--problem", "exp_growth", "--format", "xml"],
    ] {
        let out = volterra(&args);
        assert_eq!(
            out.status.code(),
            Some(if args.contains(&"xml") { 2 } else { 1 }),
            "{args:?}"
        );
        assert!(!out.stderr.is_empty());
    }
    let out = volterra(&["solve", "--problem", bad.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("f_t"));
}
