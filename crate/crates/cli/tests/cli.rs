use std::path::Path;
use std::process::{Command, Output};

use steane_ft::report::CsvDoc;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_steane-ft"));
    c.env("RUST_LOG", "error");
    for (k, _) in std::env::vars() {
        if k.starts_with("STEANE_FT_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

const SMALL_SWEEP: [&str; 8] = [
    "sweep",
    "--C",
    "inf",
    "--C",
    "1",
    "--epsilon-grid",
    "2e-4:1e-3:2",
    "--trials",
];

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(
        out.lines().filter(|l| l.starts_with("PASS")).count(),
        7,
        "{out}"
    );
}

#[test]
fn dropped_verification_cnot_fails_selftest() {
    let o = run(&["--drop-verification-cnot", "selftest"]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("ancilla-verification"),
        "{}",
        stderr(&o)
    );
    assert!(stdout(&o).contains("FAIL ancilla-verification"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["sweep", "--bogus"])), 1);
    assert_eq!(code(&run(&["sweep", "--epsilon", "1e-4"])), 1);
    assert_eq!(code(&run(&["sweep", "--C", "inf"])), 1);
    assert_eq!(
        code(&run(&["sweep", "--C", "inf", "--epsilon-grid", "1:2"])),
        1
    );
    assert_eq!(
        code(&run(&[
            "sweep",
            "--C",
            "inf",
            "--epsilon",
            "1e-4",
            "--mode",
            "nope"
        ])),
        1
    );
    assert_eq!(
        code(&run(&["fit", "--input", "x.csv", "--model", "cubic"])),
        1
    );
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn empty_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&run(&["fit", "--input", empty.to_str().unwrap()])), 1);
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        code(&run(&["fit", "--input", missing.to_str().unwrap()])),
        3
    );
    let header_only = dir.path().join("header.csv");
    std::fs::write(
        &header_only,
        "# mode: memory_t20\nC,epsilon,P_fail_a1,stderr\n",
    )
    .unwrap();
    assert_eq!(
        code(&run(&["fit", "--input", header_only.to_str().unwrap()])),
        1
    );
}

#[test]
fn unwritable_output_exits_3() {
    let o = run(&["table1", "--out", "/nonexistent-dir/t.csv"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn degenerate_fit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("s.csv");
    let o = run(&[
        "sweep",
        "--C",
        "inf",
        "--epsilon",
        "1e-3",
        "--trials",
        "2000",
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "fit",
        "--input",
        sweep.to_str().unwrap(),
        "--model",
        "free_quadratic",
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn sweep_rows_independent_of_thread_count() {
    let mut outputs = Vec::new();
    for threads in ["1", "4", "0"] {
        let mut args = SMALL_SWEEP.to_vec();
        args.extend(["3000", "--threads", threads]);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push(stdout(&o));
    }
    assert_eq!(data_rows(&outputs[0]).len(), 5);
    assert_eq!(data_rows(&outputs[0]), data_rows(&outputs[1]));
    assert_eq!(data_rows(&outputs[0]), data_rows(&outputs[2]));
}

#[test]
fn seed_controls_results() {
    let base = [
        "sweep",
        "--C",
        "inf",
        "--epsilon",
        "1e-3",
        "--trials",
        "3000",
        "--seed",
    ];
    let a = stdout(&run(&[&base[..], &["5"]].concat()));
    let b = stdout(&run(&[&base[..], &["5"]].concat()));
    let c = stdout(&run(&[&base[..], &["6"]].concat()));
    assert_eq!(data_rows(&a), data_rows(&b));
    assert_ne!(data_rows(&a), data_rows(&c));
}

#[test]
fn manifest_records_run() {
    let mut args = SMALL_SWEEP.to_vec();
    args.push("1000");
    let doc = CsvDoc::parse(&stdout(&run(&args))).unwrap();
    let m = &doc.manifest;
    for key in [
        "command",
        "version",
        "timestamp",
        "seed",
        "fingerprint",
        "duration_s",
        "schedule",
    ] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    assert_eq!(m.get("C"), Some("inf,1"));
    assert_eq!(m.get("epsilon"), Some("0.0002,0.001"));
    assert_eq!(m.get("trials"), Some("1000"));
}

#[test]
fn config_file_and_env_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# test\nC = inf\nepsilon = 1e-3\ntrials = 300\nseed = 9\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let trials = |o: Output| {
        CsvDoc::parse(&stdout(&o))
            .unwrap()
            .manifest
            .get("trials")
            .unwrap()
            .to_string()
    };
    assert_eq!(trials(run(&["--config", c, "sweep"])), "300");
    assert_eq!(
        trials(run(&["--config", c, "sweep", "--trials", "200"])),
        "200"
    );
    let o = bin()
        .args(["--config", c, "sweep"])
        .env("STEANE_FT_TRIALS", "250")
        .output()
        .unwrap();
    assert_eq!(trials(o), "250");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(code(&run(&["--config", c, "sweep"])), 1);
}

#[test]
fn sweep_fit_thresholds_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (s, f, t) = (
        dir.path().join("s.csv"),
        dir.path().join("f.csv"),
        dir.path().join("t.csv"),
    );
    let mut args = SMALL_SWEEP.to_vec();
    args.extend(["4000", "--out", s.to_str().unwrap()]);
    assert_eq!(code(&run(&args)), 0);
    let text = read(&s);
    assert_eq!(CsvDoc::parse(&text).unwrap().render().unwrap(), text);

    assert_eq!(
        code(&run(&[
            "fit",
            "--input",
            s.to_str().unwrap(),
            "--out",
            f.to_str().unwrap()
        ])),
        0
    );
    let fits = CsvDoc::parse(&read(&f)).unwrap();
    assert_eq!(fits.rows.len(), 2);
    assert_eq!(fits.manifest.get("model"), Some("quadratic"));
    let d2 = fits.f64_at(&fits.rows[0], "value").unwrap();
    assert!(d2 > 1e3 && d2 < 1e5, "{d2}");

    assert_eq!(
        code(&run(&[
            "thresholds",
            "--fits",
            f.to_str().unwrap(),
            "--out",
            t.to_str().unwrap()
        ])),
        0
    );
    let th = CsvDoc::parse(&read(&t)).unwrap();
    assert_eq!(th.rows.len(), 2);
    let eps = th.f64_at(&th.rows[0], "eps_pth").unwrap();
    let approx = th.f64_at(&th.rows[0], "eps_pth_approx").unwrap();
    assert!((eps / approx - 1.0).abs() < 0.01);
}

#[test]
fn stabilize_and_fig5_outputs() {
    let o = run(&[
        "stabilize",
        "--C",
        "inf",
        "--epsilon",
        "1e-3",
        "--trials",
        "500",
        "--t-max",
        "4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&stdout(&o)).len(), 5);

    let o = run(&[
        "fig5",
        "--C",
        "0.1",
        "--epsilon",
        "2e-3",
        "--trials",
        "500",
        "--a-count",
        "6",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&stdout(&o)).len(), 7);
    let o = run(&["fig5", "--C", "0.1", "--C", "1", "--epsilon", "2e-3"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn reference_table_commands() {
    let o = run(&["table1"]);
    assert_eq!(code(&o), 0);
    let doc = CsvDoc::parse(&stdout(&o)).unwrap();
    assert_eq!(doc.rows.len(), 7);
    let flag = doc.column("flag").unwrap();
    assert!(doc.rows.iter().all(|r| r[flag] == "ok"));

    let doc = CsvDoc::parse(&stdout(&run(&["thresholds", "--use-reference-table"]))).unwrap();
    let inf = doc.rows.iter().find(|r| r[0] == "inf").unwrap();
    let eps = doc.f64_at(inf, "eps_pth").unwrap();
    assert!((eps - 3.9163e-4).abs() < 1e-7, "{eps}");
    assert_eq!(code(&run(&["thresholds"])), 1);
}

#[test]
fn dumps() {
    let o = run(&["dump-tables"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("[syndrome_to_leader]"));
    assert_eq!(out.lines().skip_while(|l| *l != "[vectors]").count(), 130);

    let a = stdout(&run(&["dump-network"]));
    let b = stdout(&run(&["--drop-verification-cnot", "dump-network"]));
    assert!(a.contains("[fingerprint]"));
    assert_ne!(a.lines().last(), b.lines().last());
}

#[test]
fn thresholds_merge_several_fit_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    for (mode, sweep, model, fit) in [
        ("memory_t20", "s.csv", "quadratic", "d2.csv"),
        ("ec1", "e.csv", "linear", "d1.csv"),
    ] {
        let o = run(&[
            "sweep",
            "--mode",
            mode,
            "--C",
            "inf",
            "--epsilon",
            "5e-4,1e-3",
            "--trials",
            "4000",
            "--out",
            &p(sweep),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&[
            "fit",
            "--input",
            &p(sweep),
            "--model",
            model,
            "--out",
            &p(fit),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let o = run(&["thresholds", "--fits", &p("d2.csv"), "--fits", &p("d1.csv")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = CsvDoc::parse(&stdout(&o)).unwrap();
    assert_eq!(doc.rows.len(), 1);
    let d1 = doc.f64_at(&doc.rows[0], "D1").unwrap();
    assert!(d1 > 50.0 && d1 < 1000.0, "{d1}");

    let o = run(&["thresholds", "--fits", &p("d2.csv"), "--fits", &p("s.csv")]);
    assert_eq!(code(&o), 1);
}
