use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cutproj");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fib() -> PathBuf {
    configs().join("fibonacci.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Writes the Fibonacci config with `edit` applied.
fn variant(dir: &tempfile::TempDir, name: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(fib()).unwrap();
    let p = dir.path().join(name);
    std::fs::write(&p, edit(text)).unwrap();
    p
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn check_exit_codes() {
    let o = run(&["check", "--config", fib().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("dual pairing: ok"));

    let z2 = configs().join("z2_split.toml");
    let o = run(&["check", "--config", z2.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("internal density: FAILED"));

    let dir = tempfile::tempdir().unwrap();
    let bad = variant(&dir, "bad.toml", |t| t.replace("m = 1", "m = 2"));
    let o = run(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("scheme.basis"), "{}", stderr(&o));

    let typo = variant(&dir, "typo.toml", |t| {
        t.replace("threshold =", "treshold =")
    });
    let o = run(&["check", "--config", typo.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("treshold"), "{}", stderr(&o));

    let o = run(&[
        "check",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn modelset_spacings_are_golden_powers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(&dir, "ms.toml", |t| {
        t.replace("lo = [-5]\nhi = [5]", "lo = [0]\nhi = [40]")
    });
    let out = dir.path().join("ms.csv");
    let o = run(&[
        "modelset",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("x1,xstar1,z1,z2\n"));
    let rows = csv_rows(&text);
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!(rows.len() > 10);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r[1]));
        // x = z1 + golden z2
        assert!((r[0] - (r[2] + golden * r[3])).abs() < 1e-9);
    }
    // the closed window hits both endpoints at x = 0 and x = 1
    for w in rows.windows(2) {
        let s = w[1][0] - w[0][0];
        let unit = w[0][0] == 0.0 && s == 1.0;
        assert!(
            unit || (s - golden).abs() < 1e-9 || (s - golden * golden).abs() < 1e-9,
            "spacing {s}"
        );
    }
}

#[test]
fn diffract_writes_spectrum_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.csv");
    let o = run(&[
        "diffract",
        "--config",
        fib().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("k1,re,im,intensity\n"));
    let rows = csv_rows(&text);
    let zero = rows.iter().find(|r| r[0] == 0.0).expect("A(0) present");
    assert!((zero[1] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spec.json")).unwrap())
            .unwrap();
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["scheme"]["d"], 1);
    assert_eq!(meta["spectrum"]["sign"], -1.0);
    assert!(meta["truncation"]["internal_radius"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn diffract_header_only_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = variant(&dir, "empty.toml", |t| {
        t.replace("lo = [-5]\nhi = [5]", "lo = [1]\nhi = [-1]")
    });
    let o = run(&["diffract", "--config", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "k1,re,im,intensity\n");

    let high = variant(&dir, "high.toml", |t| {
        t.replace("threshold = 1e-3", "threshold = 0.5")
    });
    let o = run(&["diffract", "--config", high.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "k1,re,im,intensity\n");

    let atomic = variant(&dir, "atomic.toml", |t| {
        t.replace("kind = \"box\"", "kind = \"atomic\"\npoints = [[0.5]]")
    });
    let o = run(&["diffract", "--config", atomic.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn oracle_rows_and_errors() {
    let f = fib();
    let o = run(&[
        "oracle",
        "--config",
        f.to_str().unwrap(),
        "--k",
        "0",
        "--k",
        "golden - 1",
        "--radius",
        "300",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);

    // k = 0 is the empirical density of the same patch
    let dir = tempfile::tempdir().unwrap();
    let patch = variant(&dir, "patch.toml", |t| {
        t.replace("lo = [-5]\nhi = [5]", "lo = [-300]\nhi = [300]")
    });
    let ms = run(&["modelset", "--config", patch.to_str().unwrap()]);
    let n = stdout(&ms).lines().count() - 1;
    assert_eq!(rows[0][1], n as f64 / 600.0);
    assert!((rows[0][3] - 1.0 / 5f64.sqrt()).abs() < 1e-12);

    let o = run(&["oracle", "--config", f.to_str().unwrap(), "--radius", "0"]);
    assert_eq!(code(&o), 2);
    let o = run(&["oracle", "--config", f.to_str().unwrap(), "--k", "0,1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pdcheck_both_ok_and_both_fail() {
    let f = fib();
    let o = run(&["pdcheck", "--config", f.to_str().unwrap(), "--trials", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("verdict: both-ok"));
    assert!(stderr(&o).contains("entrywise equal: true"));

    let o = run(&[
        "pdcheck",
        "--config",
        f.to_str().unwrap(),
        "--trials",
        "10",
        "--corrupt",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("verdict: both-fail"), "{}", stderr(&o));
}

#[test]
fn comb_file_duplicates_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let comb = dir.path().join("c.csv");
    std::fs::write(&comb, "x1,re,im\n0,1,0\n1,0.5,0\n0,1,0\n").unwrap();
    let o = run(&[
        "pdcheck",
        "--config",
        fib().to_str().unwrap(),
        "--comb",
        comb.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));
}

#[test]
fn almost_periods_eps_zero_is_trivial() {
    let f = fib();
    let o = run(&[
        "almostperiods",
        "--config",
        f.to_str().unwrap(),
        "--eps",
        "0",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert!(rows.len() > 3);
    let accepted: Vec<&Vec<f64>> = rows.iter().filter(|r| r[2] == 1.0).collect();
    assert_eq!(accepted.len(), 1);
    assert_eq!(accepted[0][0], 0.0);

    let o = run(&["almostperiods", "--config", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(csv_rows(&stdout(&o)).iter().filter(|r| r[2] == 1.0).count() > 1);
}

#[test]
fn seed_flag_is_reproducible() {
    let f = fib();
    let a = run(&[
        "pdcheck",
        "--config",
        f.to_str().unwrap(),
        "--trials",
        "3",
        "--seed",
        "9",
    ]);
    let b = run(&[
        "pdcheck",
        "--config",
        f.to_str().unwrap(),
        "--trials",
        "3",
        "--seed",
        "9",
    ]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    assert!(stderr(&a).contains("seed: 9"));
}
