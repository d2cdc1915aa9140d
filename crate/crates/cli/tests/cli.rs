use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn walshdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walshdiv"))
        .args(args)
        .env_remove("WALSH_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows (after the `#` comments and the header line).
fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn assert_param_echo(csv: &str) {
    for key in ["# n=", "# c=", "# seed=", "# grid_resolution="] {
        assert!(csv.lines().any(|l| l.starts_with(key)), "missing {key} in\n{csv}");
    }
}

#[test]
fn lemma2_exhaustive_at_12_passes() {
    let o = walshdiv(&["lemma2", "--n", "12", "--mode", "exhaustive"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_param_echo(&out);
    let integral = rows(&out).into_iter().find(|r| r[1].starts_with("integral")).unwrap();
    assert_eq!(integral[4], "pass");
    assert_eq!(integral[3], "2/5");
}

#[test]
fn failing_lemma_exits_nonzero_with_witness() {
    // E_2 has points without a (+1, -1) sign change
    let o = walshdiv(&["lemma2", "--n", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("first failed assertion"), "{err}");
    assert!(err.contains("witness: 1/2^4"), "{err}");
    // below n = 121 the chain n/30 - 1 > n/40 is false
    let o = walshdiv(&["chain-check", "--n", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n/30 - 1 > n/40"));
}

#[test]
fn sampled_runs_are_reproducible() {
    let args = ["lemma2", "--n", "20", "--mode", "sample", "--samples", "300", "--seed", "7", "-q"];
    let a = walshdiv(&args);
    let b = walshdiv(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("# seed=7"));
    let mut other = args;
    other[8] = "8";
    assert_ne!(walshdiv(&other).stdout, a.stdout);
    let single = Command::new(env!("CARGO_BIN_EXE_walshdiv"))
        .args(args)
        .env("WALSH_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(single.stdout, a.stdout);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("desk.cfg");
    fs::write(&cfg, "# desk instance\nn=2\nc=3\ngrid_cap=18\nsamples=10\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = walshdiv(&["build-fn", "--config", cfg, "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# n=2\n") && out.contains("# c=3\n") && out.contains("# grid_resolution=2^18\n"));
    let o = walshdiv(&["build-fn", "--config", cfg, "--c", "2", "--grid-cap", "11", "-q"]);
    let out = stdout(&o);
    assert!(out.contains("# c=2\n") && out.contains("# grid_resolution=none\n"), "{out}");
    let o = walshdiv(&["build-fn", "--config", "/nonexistent/cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn measure_table_has_exact_and_float_columns() {
    let o = walshdiv(&["measure-en", "--n-max", "100", "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 100);
    let last = &r[99];
    assert_eq!(last[0], "100");
    assert!(last[1].contains('/'));
    assert_eq!(last[6], "pass");
    assert!(last[5].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn build_fn_coefficients_respect_the_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coeffs.csv");
    let o = walshdiv(&[
        "build-fn",
        "--n",
        "2",
        "--c",
        "2",
        "--coefficients",
        path.to_str().unwrap(),
        "-q",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    assert_param_echo(&text);
    let r = rows(&text);
    assert!(!r.is_empty());
    for row in r {
        let m: u64 = row[0].parse().unwrap();
        assert!((4..1 << 12).contains(&m), "coefficient at {m}");
    }
}

#[test]
fn lemma1_all_cells_and_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.csv");
    let o = walshdiv(&["lemma1", "--n", "2", "--c", "2", "--witnesses", w.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let witnesses = rows(&fs::read_to_string(&w).unwrap());
    // 16 base cells; the 6 off-support cells without a sign change have no witness
    assert_eq!(witnesses.len(), 10);
    // infeasible single point: off the support and no grid
    let o = walshdiv(&["lemma1", "--n", "2", "--c", "10", "--x", "3/2^4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid cap"), "{}", stderr(&o));
}

#[test]
fn partial_sums_agree_with_grid() {
    let o = walshdiv(&[
        "partial-sums", "--n", "2", "--c", "2", "--x", "3/2^4", "--l-max", "300", "-q",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 300);
    assert!(r.iter().all(|row| row[1] == row[3]));
}

#[test]
fn strong_mean_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("means.csv");
    let o = walshdiv(&[
        "strong-mean", "--phi", "pow:2", "--phi", "exppow:2", "--n", "2", "--c", "3", "--x", "5/2^4",
        "--N-list", "16,256,4096", "-o", table.to_str().unwrap(), "-q",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&table).unwrap();
    assert_param_echo(&text);
    let r = rows(&text);
    assert_eq!(r.len(), 6);
    // t^2 <= e^{t^2} - 1, so the means are ordered in Φ at every N
    for pair in r.chunks(2) {
        assert_eq!((pair[0][1].as_str(), pair[1][1].as_str()), ("pow:2", "exppow:2"));
        let (a, b): (f64, f64) = (pair[0][4].parse().unwrap(), pair[1][4].parse().unwrap());
        assert!(a <= b);
        assert_eq!(pair[0][8], "pass");
    }

    let svg = dir.path().join("means.svg");
    let o = walshdiv(&[
        "plot",
        "--input",
        table.to_str().unwrap(),
        "--x",
        "N",
        "--y",
        "mean_float",
        "--group",
        "phi",
        "--log-y",
        "-o",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<?xml"));
    assert_eq!(text.matches("<polyline").count(), 2);
    assert!(Path::new(&svg).exists());
}

#[test]
fn chain_check_range() {
    let o = walshdiv(&["chain-check", "--n-min", "151", "--n-max", "160", "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    let nk = r.iter().find(|row| row[1].starts_with("minimal n_k")).unwrap();
    assert_eq!(nk[2], "20001");
    assert!(r.iter().all(|row| row[5].starts_with("n=")));
}
