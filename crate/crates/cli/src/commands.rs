use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use steane_ft::analysis::Model;
use steane_ft::circuit::{build_recovery, RecoverySchedule, SyndromeNetwork};
use steane_ft::codebook::{self, ErrorVector};
use steane_ft::engine::{
    run_ec1_experiment, run_fig5_experiment, run_memory_experiment, run_stabilization_experiment,
    run_zgate_experiment, ExperimentConfig, Mode,
};
use steane_ft::noise::NoiseParams;
use steane_ft::report::{
    self, fig5_rows, fit_document, fit_rows, fmt_f64, parse_f64, reference_thresholds,
    stabilize_rows, sweep_row, table1_rows, threshold_row, thresholds_from_fits, CsvDoc, Manifest,
    FIG5_COLUMNS, FIT_COLUMNS, STABILIZE_COLUMNS, SWEEP_COLUMNS, TABLE1_COLUMNS, THRESHOLD_COLUMNS,
};
use steane_ft::selftest::run_selftest;

use crate::config::{parse_grid, ConfigFile};
use crate::{Cli, CliError, Command, ExperimentArgs};

struct Ctx {
    cfg: ConfigFile,
    threads: usize,
    drop_verification: bool,
    started: Instant,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let ctx = Ctx {
        threads: cfg.pick(cli.threads, "threads", 0)?,
        cfg,
        drop_verification: cli.drop_verification_cnot,
        started: Instant::now(),
    };
    match cli.command {
        Command::Selftest => selftest(&ctx),
        Command::Sweep(a) => sweep(&ctx, &a),
        Command::Stabilize(a) => stabilize(&ctx, &a),
        Command::Fig5(a) => fig5(&ctx, &a),
        Command::Fit(a) => fit(&ctx, &a.input, &a.model, a.out.as_deref()),
        Command::Thresholds(a) => thresholds(&ctx, &a.fits, a.out.as_deref()),
        Command::Table1(a) => table1(&ctx, a.out.as_deref()),
        Command::DumpTables(a) => write_text(a.out.as_deref(), &dump_tables()),
        Command::DumpNetwork(a) => {
            let net = network(&ctx)?;
            let text = format!("{}[fingerprint]\n{}\n", net.dump(), net.fingerprint());
            write_text(a.out.as_deref(), &text)
        }
    }
}

fn network(ctx: &Ctx) -> Result<SyndromeNetwork, CliError> {
    let mut net = build_recovery(RecoverySchedule::default())?;
    if ctx.drop_verification {
        log::warn!("verification CNOT removed from both ancilla preparations");
        net.phase_prep.steps[4].gates.clear();
        net.bit_prep.steps[4].gates.clear();
    }
    Ok(net)
}

fn base_manifest() -> Manifest {
    let mut m = Manifest::default();
    let argv: Vec<String> = std::env::args().collect();
    m.push("command", argv.join(" "))
        .push("version", report::VERSION)
        .push(
            "timestamp",
            humantime::format_rfc3339_seconds(SystemTime::now()),
        );
    m
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(ctx: &Ctx, mut doc: CsvDoc, out: Option<&Path>) -> Result<(), CliError> {
    doc.manifest.push(
        "duration_s",
        format!("{:.3}", ctx.started.elapsed().as_secs_f64()),
    );
    write_text(out, &doc.render()?)
}

fn selftest(ctx: &Ctx) -> Result<(), CliError> {
    let checks = run_selftest(&network(ctx)?);
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "selftest failed: {}",
            failed.join(", ")
        )))
    }
}

/// Experiment settings shared by `sweep`, `stabilize` and `fig5`.
struct Plan {
    mode: Mode,
    ratios: Vec<f64>,
    epsilons: Vec<f64>,
    trials: u64,
    seed: u64,
    t_max: usize,
    encoder_noisy: bool,
    out: Option<PathBuf>,
}

fn plan(ctx: &Ctx, a: &ExperimentArgs, mode: Mode) -> Result<Plan, CliError> {
    let cfg = &ctx.cfg;
    let parse_all = |xs: Vec<String>| -> Result<Vec<f64>, CliError> {
        xs.iter()
            .map(|s| parse_f64(s).map_err(CliError::from))
            .collect()
    };
    let ratios = parse_all(cfg.pick_list(&a.c, "C"))?;
    if ratios.is_empty() {
        return Err(CliError::Usage("no --C given".into()));
    }
    let mut epsilons = parse_all(cfg.pick_list(&a.epsilon, "epsilon"))?;
    if epsilons.is_empty() {
        let grid = a
            .epsilon_grid
            .clone()
            .or_else(|| cfg.get("epsilon-grid").map(String::from));
        match grid {
            Some(g) => epsilons = parse_grid(&g)?,
            None => {
                return Err(CliError::Usage(
                    "no --epsilon or --epsilon-grid given".into(),
                ))
            }
        }
    }
    let defaults = ExperimentConfig::new(mode, NoiseParams::noiseless());
    Ok(Plan {
        mode,
        ratios,
        epsilons,
        trials: cfg.pick(a.trials, "trials", defaults.trials)?,
        seed: cfg.pick(a.seed, "seed", defaults.master_seed)?,
        t_max: cfg.pick(a.t_max, "t-max", defaults.t_max)?,
        encoder_noisy: cfg.pick(a.encoder_noisy, "encoder-noisy", defaults.encoder_noisy)?,
        out: a.out.clone().or_else(|| cfg.get("out").map(PathBuf::from)),
    })
}

impl Plan {
    fn configs(&self, threads: usize) -> Result<Vec<ExperimentConfig>, CliError> {
        let mut out = Vec::new();
        for &c in &self.ratios {
            for &eps in &self.epsilons {
                let mut cfg = ExperimentConfig::new(self.mode, NoiseParams::from_ratio(eps, c)?);
                cfg.trials = self.trials;
                cfg.master_seed = self.seed;
                cfg.t_max = self.t_max;
                cfg.encoder_noisy = self.encoder_noisy;
                cfg.threads = threads;
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }

    fn manifest(&self, first: &ExperimentConfig, threads: usize) -> Result<Manifest, CliError> {
        let net = build_recovery(first.schedule)?;
        let list = |xs: &[f64]| xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",");
        let mut m = base_manifest();
        m.push_config(first, &net.fingerprint());
        m.set("C", list(&self.ratios))
            .set("epsilon", list(&self.epsilons))
            .push("threads", threads);
        if self.ratios.len() * self.epsilons.len() > 1 {
            m.set("gamma", "per row");
        }
        Ok(m)
    }
}

fn sweep(ctx: &Ctx, a: &ExperimentArgs) -> Result<(), CliError> {
    let name = ctx
        .cfg
        .pick(a.mode.clone(), "mode", "memory_t20".to_string())?;
    let mode = Mode::parse(&name)?;
    if mode == Mode::Stabilize {
        return Err(CliError::Usage(
            "use the stabilize command for stabilize runs".into(),
        ));
    }
    let p = plan(ctx, a, mode)?;
    let configs = p.configs(ctx.threads)?;
    let mut doc = CsvDoc::new(p.manifest(&configs[0], ctx.threads)?, &SWEEP_COLUMNS);
    for cfg in &configs {
        let stats = match mode {
            Mode::Ec1 => run_ec1_experiment(cfg)?,
            Mode::ZGate => run_zgate_experiment(cfg)?,
            Mode::Fig5 => run_fig5_experiment(cfg, &[])?.stats,
            _ => run_memory_experiment(cfg)?,
        };
        log::info!(
            "C={} ε={}: P_fail_a1={}",
            cfg.noise.ratio_c,
            cfg.noise.epsilon,
            stats.p_fail_a1()
        );
        doc.push_row(sweep_row(cfg, &stats))?;
    }
    emit(ctx, doc, p.out.as_deref())
}

fn stabilize(ctx: &Ctx, a: &ExperimentArgs) -> Result<(), CliError> {
    let p = plan(ctx, a, Mode::Stabilize)?;
    let configs = p.configs(ctx.threads)?;
    let mut doc = CsvDoc::new(p.manifest(&configs[0], ctx.threads)?, &STABILIZE_COLUMNS);
    for cfg in &configs {
        let series = run_stabilization_experiment(cfg)?;
        for row in stabilize_rows(cfg, &series) {
            doc.push_row(row)?;
        }
    }
    emit(ctx, doc, p.out.as_deref())
}

fn fig5(ctx: &Ctx, a: &ExperimentArgs) -> Result<(), CliError> {
    let p = plan(ctx, a, Mode::Fig5)?;
    if p.ratios.len() != 1 || p.epsilons.len() != 1 {
        return Err(CliError::Usage(
            "fig5 takes exactly one --C and one --epsilon".into(),
        ));
    }
    let n = ctx.cfg.pick(a.a_count, "a-count", 11usize)?;
    if n < 2 {
        return Err(CliError::Usage("--a-count must be at least 2".into()));
    }
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let configs = p.configs(ctx.threads)?;
    let table = run_fig5_experiment(&configs[0], &grid)?;
    let mut doc = CsvDoc::new(p.manifest(&configs[0], ctx.threads)?, &FIG5_COLUMNS);
    for row in fig5_rows(&table) {
        doc.push_row(row)?;
    }
    emit(ctx, doc, p.out.as_deref())
}

fn read_doc(path: &Path) -> Result<CsvDoc, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("{} is empty", path.display())));
    }
    Ok(CsvDoc::parse(&text)?)
}

fn fit(ctx: &Ctx, input: &Path, model: &str, out: Option<&Path>) -> Result<(), CliError> {
    let model = Model::parse(model)?;
    let src = read_doc(input)?;
    let fits = fit_document(&src, model)?;
    let mut m = base_manifest();
    m.push("input", input.display()).push("model", model.name());
    if let Some(f) = src.manifest.get("fingerprint") {
        m.push("fingerprint", f);
    }
    let mut doc = CsvDoc::new(m, &FIT_COLUMNS);
    for row in fit_rows(&fits) {
        doc.push_row(row)?;
    }
    emit(ctx, doc, out)
}

fn thresholds(ctx: &Ctx, fits: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut m = base_manifest();
    let (sets, source) = if fits.is_empty() {
        (reference_thresholds()?, "reference_table")
    } else {
        let mut merged: Option<CsvDoc> = None;
        for p in fits {
            m.push("input", p.display());
            let doc = read_doc(p)?;
            match &mut merged {
                None => merged = Some(doc),
                Some(all) if all.header == doc.header => all.rows.extend(doc.rows),
                Some(_) => {
                    return Err(CliError::Usage(format!(
                        "{} is not a fit file like the others",
                        p.display()
                    )))
                }
            }
        }
        let merged = merged.expect("at least one fit file");
        (thresholds_from_fits(&merged)?, "fits")
    };
    let mut doc = CsvDoc::new(m, &THRESHOLD_COLUMNS);
    for (row, t) in &sets {
        doc.push_row(threshold_row(row, t, source))?;
    }
    emit(ctx, doc, out)
}

fn table1(ctx: &Ctx, out: Option<&Path>) -> Result<(), CliError> {
    let (rows, flagged) = table1_rows()?;
    let mut m = base_manifest();
    m.push("g1_tolerance", fmt_f64(report::G1_TOLERANCE));
    let mut doc = CsvDoc::new(m, &TABLE1_COLUMNS);
    for r in rows {
        doc.push_row(r)?;
    }
    emit(ctx, doc, out)?;
    if flagged > 0 {
        return Err(CliError::Numerical(format!(
            "{flagged} rows disagree on G1"
        )));
    }
    Ok(())
}

fn dump_tables() -> String {
    let t = codebook::tables();
    let mut s = String::new();
    let words = |v: &[ErrorVector]| {
        v.iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "[h_rows]\n{}", words(&t.h_rows));
    let _ = writeln!(s, "[cperp]\n{}", words(&t.cperp_words));
    let _ = writeln!(s, "[c]\n{}", words(&t.c_words));
    s.push_str("[syndrome_to_leader]\n");
    for (k, e) in t.syndrome_to_leader.iter().enumerate() {
        let _ = writeln!(s, "{k:03b} {e}");
    }
    s.push_str("[vectors]\nvector syndrome eff_weight class\n");
    for e in ErrorVector::all() {
        let _ = writeln!(
            s,
            "{e} {} {} {:?}",
            codebook::syndrome_of(e),
            codebook::effective_weight(e),
            codebook::classify(e)
        );
    }
    s
}
