use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use duopoly_cli::config::{self, Config};
use duopoly_cli::output::{SCAN_HEADER, SPECTRUM_HEADER, TRAJECTORY_HEADER};
use duopoly_core::{quartic_roots, quasipolynomial_at, solve, tau0_quartic};
use num_complex::Complex64;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn duopoly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duopoly"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn instability() -> PathBuf {
    example("instability.json")
}

fn hyperbolic() -> PathBuf {
    example("hyperbolic.json")
}

/// Writes `text` to a fresh temporary config and returns its directory guard and path.
fn temp_config(text: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    (dir, path)
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn analyze_reports_example_equilibrium_and_instability() {
    let o = duopoly(&["analyze", path_str(&instability())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("x*=2.518518519, z*=74.59777092"), "{out}");
    let verdict = out.lines().find(|l| l.starts_with("verdict:")).unwrap();
    assert!(verdict.contains("unstable"), "{verdict}");
    let abscissa: f64 = verdict
        .split("spectral abscissa ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(abscissa > 0.0);
}

#[test]
fn analyze_declares_hyperbolic_example_delay_independent() {
    let o = duopoly(&["analyze", path_str(&hyperbolic())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: delay-independent asymptotically stable"));
}

#[test]
fn analyze_writes_key_value_report() {
    let dir = tempfile::tempdir().unwrap();
    let kv = dir.path().join("report.txt");
    let o = duopoly(&["analyze", path_str(&hyperbolic()), "--report", path_str(&kv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(kv).unwrap();
    assert!(text.lines().any(|l| l == "crossing=none"), "{text}");
    assert!(text.lines().all(|l| l.contains('=')));
}

#[test]
fn missing_sigma_is_a_validation_error_naming_the_key() {
    let text = std::fs::read_to_string(instability()).unwrap().replace(r#""sigma": 0.1, "#, "");
    let (_dir, path) = temp_config(&text);
    let o = duopoly(&["analyze", path_str(&path)]);
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_VALIDATION as i32));
    assert!(stderr(&o).contains("params.sigma"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let text = std::fs::read_to_string(instability())
        .unwrap()
        .replace(r#""tau": 0.0 }"#, r#""tau": 0.0, "delay": 1.0 }"#);
    let (_dir, path) = temp_config(&text);
    let o = duopoly(&["analyze", path_str(&path)]);
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_VALIDATION as i32));
    assert!(stderr(&o).contains("delay"), "{}", stderr(&o));
}

#[test]
fn out_of_range_value_names_the_key() {
    let text = std::fs::read_to_string(instability()).unwrap().replace(r#""q2": 0.5"#, r#""q2": 1.5"#);
    let (_dir, path) = temp_config(&text);
    let o = duopoly(&["analyze", path_str(&path)]);
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_VALIDATION as i32));
    assert!(stderr(&o).contains("params.q2"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let o = duopoly(&["analyze", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_IO as i32));
}

#[test]
fn infeasible_market_is_a_solver_failure() {
    // marginal cost above the choke price leaves no interior equilibrium
    let text = std::fs::read_to_string(instability()).unwrap().replace(r#""a": 80.0"#, r#""a": 3.0"#);
    let (_dir, path) = temp_config(&text);
    let o = duopoly(&["analyze", path_str(&path)]);
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_SOLVER as i32), "{}", stderr(&o));
}

#[test]
fn bad_scan_parameter_is_a_validation_error() {
    let text = std::fs::read_to_string(instability())
        .unwrap()
        .replace(r#""param": "b""#, r#""param": "slope""#);
    let (_dir, path) = temp_config(&text);
    let o = duopoly(&["scan", path_str(&path)]);
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_VALIDATION as i32));
    assert!(stderr(&o).contains("scan.param"), "{}", stderr(&o));
}

#[test]
fn zero_delay_spectrum_lists_the_quartic_roots() {
    let o = duopoly(&["spectrum", path_str(&instability()), "--tau", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next(), Some(SPECTRUM_HEADER));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 4);

    let cfg = config::load(&instability()).unwrap();
    let spec = cfg.model().unwrap();
    let qp = quasipolynomial_at(&spec, &solve(&spec).unwrap()).unwrap();
    let exact = quartic_roots(&tau0_quartic(&qp));
    for row in rows {
        let z = Complex64::new(row[1].parse().unwrap(), row[2].parse().unwrap());
        let nearest = exact.iter().map(|e| (e - z).norm() / (1.0 + e.norm())).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-9, "{z}");
    }
}

#[test]
fn delay_sweep_files_show_unstable_roots_at_every_delay() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg) = (dir.path().join("roots.csv"), dir.path().join("roots.svg"));
    let o = duopoly(&[
        "spectrum",
        path_str(&instability()),
        "--tau",
        "0,0.5,1,5",
        "--csv",
        path_str(&csv),
        "--svg",
        path_str(&svg),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some(SPECTRUM_HEADER));
    for tau in ["0.0", "0.5", "1.0", "5.0"] {
        let comment = text.lines().find(|l| l.starts_with(&format!("# tau={tau},"))).unwrap();
        assert!(comment.contains("count_verified=true"), "{comment}");
        let right = data_rows(&text)
            .iter()
            .filter(|r| r[0] == tau)
            .any(|r| r[1].parse::<f64>().unwrap() > 0.0);
        assert!(right, "tau={tau}");
    }
    let picture = std::fs::read_to_string(&svg).unwrap();
    assert!(picture.contains(r#"width="800" height="600""#));
    assert!(picture.contains(">Re</text>") && picture.contains(">Im</text>"));
    assert!(picture.contains(r#"class="re-zero""#));
    assert!(picture.contains(r#"r="3""#));
    let colours: std::collections::BTreeSet<&str> =
        picture.split("fill=\"#").skip(1).map(|s| &s[..6]).collect();
    assert!(colours.len() >= 4);
}

#[test]
fn empty_delay_list_defaults_to_zero_with_notice() {
    let o = duopoly(&["spectrum", path_str(&instability()), "--tau", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("notice"), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert!(!rows.is_empty() && rows.iter().all(|r| r[0] == "0.0"));
}

#[test]
fn stable_simulation_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = duopoly(&["simulate", path_str(&hyperbolic()), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, TRAJECTORY_HEADER);
    for key in ["# step=", "# tau=", "# history="] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{key}");
    }
    assert_eq!(text.lines().last(), Some("# status: completed"));
    let last = data_rows(&text).pop().unwrap();
    assert!(last[5].parse::<f64>().unwrap() < 1e-6, "{last:?}");
}

#[test]
fn unstable_simulation_reports_its_status() {
    let o = duopoly(&["simulate", path_str(&instability())]);
    assert_eq!(o.status.code(), Some(0));
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.starts_with("# status: ") && last != "# status: completed", "{last}");
}

#[test]
fn delay_scan_of_stable_example_finds_no_boundary() {
    let o = duopoly(&["scan", path_str(&hyperbolic())]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some(SCAN_HEADER));
    assert!(out.lines().any(|l| l == "boundary: none in range"), "{out}");
}

#[test]
fn scan_brackets_b0_between_68_and_69() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = duopoly(&["scan", path_str(&instability()), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next(), Some(SCAN_HEADER));
    let summary = stdout(&o);
    let line = summary.lines().find(|l| l.starts_with("boundary: ")).unwrap();
    let parts: Vec<&str> = line.trim_start_matches("boundary: ").split(" < ").collect();
    assert_eq!(parts.len(), 3, "{line}");
    assert_eq!(parts[1], "b0");
    let (lo, hi): (f64, f64) = (parts[0].parse().unwrap(), parts[2].parse().unwrap());
    assert!(hi - lo <= 0.01 + 1e-12);
    assert!(lo > 68.0 && hi < 69.0, "{line}");
}

#[test]
fn example_configs_round_trip() {
    for path in [instability(), hyperbolic()] {
        let cfg: Config = config::load(&path).unwrap();
        let again = config::parse(&cfg.to_json(), "round trip").unwrap();
        assert_eq!(cfg, again);
        let spec = cfg.model().unwrap();
        let from_spec = config::parse(&Config::from_model(&spec).unwrap().to_json(), "round trip").unwrap();
        assert_eq!(from_spec.model().unwrap(), spec);
    }
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let run = |threads: &str, args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_duopoly"))
            .args(args)
            .env(duopoly_cli::THREADS_ENV, threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        o.stdout
    };
    let ins = instability();
    let spectrum_args = ["spectrum", path_str(&ins), "--tau", "0,0.5,1,5"];
    let scan_args = ["scan", path_str(&ins)];
    let sim_args = ["simulate", path_str(&ins)];
    for args in [&spectrum_args[..], &scan_args[..], &sim_args[..]] {
        let (a, b, c) = (run("1", args), run("4", args), run("4", args));
        assert_eq!(a, b);
        assert_eq!(b, c);
    }
}

#[test]
fn invalid_thread_override_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_duopoly"))
        .args(["analyze", path_str(&hyperbolic())])
        .env(duopoly_cli::THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(duopoly_cli::EXIT_VALIDATION as i32));
}
