//! CSV documents with `#`-prefixed manifest headers, and the row schemas of
//! every emitted dataset.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analysis::{
    fit_free_quadratic, fit_line, fit_slope_poly, fit_through_origin, g1_combine, thresholds_from,
    FitResult, Model, TableRow, ThresholdSet, REFERENCE_TABLE,
};
use crate::engine::{ExperimentConfig, FidelitySeries, Fig5Table, TrialStats};
use crate::error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ordered `key: value` lines written as `# key: value`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Replaces the value of `key`, appending it if absent.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Records the experiment parameters shared by all engine outputs.
    pub fn push_config(&mut self, config: &ExperimentConfig, fingerprint: &str) -> &mut Self {
        let s = &config.schedule;
        self.push("mode", config.mode.name())
            .push("C", fmt_f64(config.noise.ratio_c))
            .push("epsilon", fmt_f64(config.noise.epsilon))
            .push("gamma", fmt_f64(config.noise.gamma))
            .push("trials", config.trials)
            .push("seed", config.master_seed)
            .push("encoder_noisy", config.encoder_noisy)
            .push("t_steps", config.t_steps())
            .push(
                "schedule",
                format!(
                    "rounds={} steps_per_round={} correction_steps={} dt0={} dt={} vote={:?} wait={:?} readout={:?} phase_layers={:?} bit_layers={:?}",
                    s.rounds,
                    s.steps_per_round,
                    s.correction_steps,
                    s.channel_prefix_steps,
                    s.inter_recovery_gap,
                    s.vote,
                    s.wait,
                    s.readout,
                    s.layout.phase_layers,
                    s.layout.bit_layers
                ),
            )
            .push("fingerprint", fingerprint)
    }

    fn render(&self, out: &mut String) {
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
}

/// Shortest round-trip text for a float; `inf` for infinity.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else {
        format!("{x}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64, Error> {
    let t = s.trim();
    match t {
        "inf" | "Inf" | "INF" | "infinity" => Ok(f64::INFINITY),
        _ => t
            .parse()
            .map_err(|_| Error::Parse(format!("not a number: {s:?}"))),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsvDoc {
    pub manifest: Manifest,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(manifest: Manifest, header: &[&str]) -> Self {
        CsvDoc {
            manifest,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<(), Error> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} fields, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self) -> Result<String, Error> {
        let mut out = String::new();
        self.manifest.render(&mut out);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?);
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<CsvDoc, Error> {
        let mut manifest = Manifest::default();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            body_start += line.len();
            let rest = rest.trim_end_matches('\n');
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| Error::Parse(format!("bad manifest line {line:?}")))?;
            manifest.entries.push((k.to_string(), v.to_string()));
        }
        let body = &text[body_start..];
        if body.trim().is_empty() {
            return Err(Error::Parse("no CSV header".into()));
        }
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(body.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        Ok(CsvDoc {
            manifest,
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize, Error> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    }

    pub fn f64_at(&self, row: &[String], name: &str) -> Result<f64, Error> {
        parse_f64(&row[self.column(name)?])
    }
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "mode",
    "C",
    "epsilon",
    "gamma",
    "t_steps",
    "trials",
    "seed",
    "P_E_strict",
    "P_fail_a1",
    "stderr",
    "eta0",
    "eta3b",
    "eta3p",
    "etaY",
    "F_a1",
    "P_EC1",
    "stderr_EC1",
];

pub fn sweep_row(config: &ExperimentConfig, s: &TrialStats) -> Vec<String> {
    vec![
        config.mode.name().to_string(),
        fmt_f64(config.noise.ratio_c),
        fmt_f64(config.noise.epsilon),
        fmt_f64(config.noise.gamma),
        config.t_steps().to_string(),
        s.trials.to_string(),
        config.master_seed.to_string(),
        fmt_f64(s.p_e_strict()),
        fmt_f64(s.p_fail_a1()),
        fmt_f64(s.p_fail_a1_stderr()),
        fmt_f64(s.eta0()),
        fmt_f64(s.eta3_b()),
        fmt_f64(s.eta3_p()),
        fmt_f64(s.eta_y()),
        fmt_f64(s.f_a1()),
        fmt_f64(s.p_ec1()),
        fmt_f64(s.p_ec1_stderr()),
    ]
}

pub const STABILIZE_COLUMNS: [&str; 9] = [
    "C", "epsilon", "gamma", "trials", "seed", "recovery", "t", "F", "stderr",
];

pub fn stabilize_rows(config: &ExperimentConfig, series: &FidelitySeries) -> Vec<Vec<String>> {
    series
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            vec![
                fmt_f64(config.noise.ratio_c),
                fmt_f64(config.noise.epsilon),
                fmt_f64(config.noise.gamma),
                series.trials.to_string(),
                config.master_seed.to_string(),
                (k + 1).to_string(),
                p.t.to_string(),
                fmt_f64(p.fidelity),
                fmt_f64(p.stderr),
            ]
        })
        .collect()
}

pub const FIG5_COLUMNS: [&str; 6] = ["a", "F", "eta0", "eta3b", "eta3p", "delta_eta3"];

pub fn fig5_rows(table: &Fig5Table) -> Vec<Vec<String>> {
    let s = &table.stats;
    table
        .rows
        .iter()
        .map(|&(a, f)| {
            vec![
                fmt_f64(a),
                fmt_f64(f),
                fmt_f64(s.eta0()),
                fmt_f64(s.eta3_b()),
                fmt_f64(s.eta3_p()),
                fmt_f64(s.delta_eta3()),
            ]
        })
        .collect()
}

pub const FIT_COLUMNS: [&str; 9] = [
    "model", "C", "epsilon", "param", "value", "stderr", "rss", "points", "r2",
];

/// A fit of one group of input rows.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRow {
    pub ratio_c: f64,
    /// Set for per-ε fits (fidelity lines).
    pub epsilon: Option<f64>,
    pub fit: FitResult,
}

pub fn fit_rows(fits: &[FitRow]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for f in fits {
        for (k, param) in f.fit.model.params().into_iter().enumerate() {
            out.push(vec![
                f.fit.model.name(),
                fmt_f64(f.ratio_c),
                f.epsilon.map(fmt_f64).unwrap_or_default(),
                param,
                fmt_f64(f.fit.coefficients[k]),
                fmt_f64(f.fit.stderr[k]),
                fmt_f64(f.fit.rss),
                f.fit.points.to_string(),
                fmt_f64(f.fit.r2),
            ]);
        }
    }
    out
}

type Group<'a> = (Vec<String>, Vec<&'a Vec<String>>);

/// Groups rows by the text of the given key columns, in order of first
/// appearance.
fn group_by<'a>(doc: &'a CsvDoc, keys: &[&str]) -> Result<Vec<Group<'a>>, Error> {
    let cols: Vec<usize> = keys
        .iter()
        .map(|k| doc.column(k))
        .collect::<Result<_, _>>()?;
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: BTreeMap<Vec<String>, Vec<&Vec<String>>> = BTreeMap::new();
    for row in &doc.rows {
        let key: Vec<String> = cols.iter().map(|&c| row[c].clone()).collect();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let rows = groups.remove(&k).unwrap_or_default();
            (k, rows)
        })
        .collect())
}

/// Fits `model` to a sweep, stabilize or line-fit document, one fit per group.
///
/// * sweep + `quadratic`/`free_quadratic`: `P_fail_a1` against ε, per C
/// * sweep + `linear`: `P_EC1` against ε, per C
/// * stabilize + `line`: `F` against t, per (C, ε)
/// * line fits + `slope_poly2`/`slope_poly3`: `A` against ε, per C
pub fn fit_document(doc: &CsvDoc, model: Model) -> Result<Vec<FitRow>, Error> {
    if doc.rows.is_empty() {
        return Err(Error::InvalidInput("input has no data rows".into()));
    }
    let mut out = Vec::new();
    match model {
        Model::Quadratic | Model::Linear | Model::FreeQuadratic => {
            let (y, s) = match model {
                Model::Linear => ("P_EC1", "stderr_EC1"),
                _ => ("P_fail_a1", "stderr"),
            };
            for (key, rows) in group_by(doc, &["C"])? {
                let pts: Vec<(f64, f64, f64)> = rows
                    .iter()
                    .map(|r| {
                        Ok((
                            doc.f64_at(r, "epsilon")?,
                            doc.f64_at(r, y)?,
                            doc.f64_at(r, s)?,
                        ))
                    })
                    .collect::<Result<_, Error>>()?;
                let fit = match model {
                    Model::Quadratic => fit_through_origin(&pts, 2)?,
                    Model::Linear => fit_through_origin(&pts, 1)?,
                    _ => fit_free_quadratic(&pts)?,
                };
                out.push(FitRow {
                    ratio_c: parse_f64(&key[0])?,
                    epsilon: None,
                    fit,
                });
            }
        }
        Model::Line => {
            for (key, rows) in group_by(doc, &["C", "epsilon"])? {
                let pts: Vec<(f64, f64, f64)> = rows
                    .iter()
                    .map(|r| {
                        Ok((
                            doc.f64_at(r, "t")?,
                            doc.f64_at(r, "F")?,
                            doc.f64_at(r, "stderr")?,
                        ))
                    })
                    .collect::<Result<_, Error>>()?;
                out.push(FitRow {
                    ratio_c: parse_f64(&key[0])?,
                    epsilon: Some(parse_f64(&key[1])?),
                    fit: fit_line(&pts)?,
                });
            }
        }
        Model::SlopePoly(degree) => {
            let (model_col, param_col) = (doc.column("model")?, doc.column("param")?);
            for (key, rows) in group_by(doc, &["C"])? {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r[model_col] == "line" && r[param_col] == "A")
                    .map(|r| Ok((doc.f64_at(r, "epsilon")?, doc.f64_at(r, "value")?)))
                    .collect::<Result<_, Error>>()?;
                out.push(FitRow {
                    ratio_c: parse_f64(&key[0])?,
                    epsilon: None,
                    fit: fit_slope_poly(&pts, degree)?,
                });
            }
        }
    }
    Ok(out)
}

pub const THRESHOLD_COLUMNS: [&str; 12] = [
    "C",
    "D2",
    "D1",
    "G1",
    "eps_pth",
    "eps_pth_approx",
    "eps_sth",
    "eps_mth",
    "eps_g1",
    "eps_thg1",
    "eps_thg2",
    "source",
];

pub fn threshold_row(row: &TableRow, t: &ThresholdSet, source: &str) -> Vec<String> {
    vec![
        fmt_f64(row.ratio_c),
        fmt_f64(row.d2),
        fmt_f64(row.d1),
        fmt_f64(row.g1),
        fmt_f64(t.eps_pth),
        fmt_f64(t.eps_pth_approx),
        t.eps_sth.map(fmt_f64).unwrap_or_default(),
        fmt_f64(t.eps_mth),
        fmt_f64(t.eps_g1),
        fmt_f64(t.eps_thg1),
        fmt_f64(t.eps_thg2),
        source.to_string(),
    ]
}

/// Table rows rebuilt from a fit document: `D₂` from the quadratic fit,
/// `D₁` from the linear fit (0 if absent), `G₁` from the combination formula.
/// A `slope_poly3` (else `slope_poly2`) fit of the same C supplies `ε_sth`.
pub fn thresholds_from_fits(doc: &CsvDoc) -> Result<Vec<(TableRow, ThresholdSet)>, Error> {
    let (mc, cc, pc, vc) = (
        doc.column("model")?,
        doc.column("C")?,
        doc.column("param")?,
        doc.column("value")?,
    );
    // (model, param) -> value, per C in order of appearance
    type Params = BTreeMap<(String, String), f64>;
    let mut by_c: Vec<(String, Params)> = Vec::new();
    for r in &doc.rows {
        let idx = match by_c.iter().position(|(c, _)| *c == r[cc]) {
            Some(i) => i,
            None => {
                by_c.push((r[cc].clone(), BTreeMap::new()));
                by_c.len() - 1
            }
        };
        by_c[idx]
            .1
            .insert((r[mc].clone(), r[pc].clone()), parse_f64(&r[vc])?);
    }
    let mut out = Vec::new();
    for (c, params) in by_c {
        let Some(&d2) = params.get(&("quadratic".to_string(), "c2".to_string())) else {
            continue;
        };
        let ratio_c = parse_f64(&c)?;
        let d1 = params
            .get(&("linear".to_string(), "c1".to_string()))
            .copied()
            .unwrap_or(0.0);
        let row = TableRow {
            ratio_c,
            d2,
            d1,
            g1: g1_combine(ratio_c, d1, d2),
        };
        let slope = [3u8, 2].into_iter().find_map(|d| {
            let name = Model::SlopePoly(d).name();
            let coeffs: Option<Vec<f64>> = (1..=d)
                .map(|k| params.get(&(name.clone(), format!("c{k}"))).copied())
                .collect();
            coeffs.map(|coefficients| FitResult {
                model: Model::SlopePoly(d),
                stderr: vec![0.0; coefficients.len()],
                coefficients,
                rss: 0.0,
                points: 0,
                r2: 1.0,
            })
        });
        out.push((row, thresholds_from(&row, slope.as_ref())?));
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("no quadratic fits in input".into()));
    }
    Ok(out)
}

pub fn reference_thresholds() -> Result<Vec<(TableRow, ThresholdSet)>, Error> {
    REFERENCE_TABLE
        .iter()
        .map(|r| Ok((*r, thresholds_from(r, None)?)))
        .collect()
}

pub const TABLE1_COLUMNS: [&str; 12] = [
    "C",
    "D2",
    "D1",
    "G1_published",
    "G1_recomputed",
    "delta_G1",
    "flag",
    "eps_pth",
    "eps_mth",
    "eps_g1",
    "eps_thg1",
    "eps_thg2",
];

/// Largest tolerated gap between published and recomputed `G₁`.
pub const G1_TOLERANCE: f64 = 0.5;

/// Reference table with recomputed `G₁`; the flag column is `ok` or `MISMATCH`.
pub fn table1_rows() -> Result<(Vec<Vec<String>>, usize), Error> {
    let mut flagged = 0;
    let mut rows = Vec::new();
    for (row, t) in reference_thresholds()? {
        let g1 = g1_combine(row.ratio_c, row.d1, row.d2);
        let delta = g1 - row.g1;
        let ok = delta.abs() <= G1_TOLERANCE;
        if !ok {
            flagged += 1;
        }
        rows.push(vec![
            fmt_f64(row.ratio_c),
            fmt_f64(row.d2),
            fmt_f64(row.d1),
            fmt_f64(row.g1),
            format!("{g1:.4}"),
            format!("{delta:.4}"),
            if ok { "ok" } else { "MISMATCH" }.to_string(),
            fmt_f64(t.eps_pth),
            fmt_f64(t.eps_mth),
            fmt_f64(t.eps_g1),
            fmt_f64(t.eps_thg1),
            fmt_f64(t.eps_thg2),
        ]);
    }
    Ok((rows, flagged))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_with(rows: Vec<Vec<String>>, header: &[&str]) -> CsvDoc {
        let mut m = Manifest::default();
        m.push("command", "test")
            .push("timestamp", "2026-01-01T00:00:00Z");
        let mut d = CsvDoc::new(m, header);
        for r in rows {
            d.push_row(r).unwrap();
        }
        d
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let d = doc_with(
            vec![
                vec!["a".into(), "1e-5".into(), "x, with comma".into()],
                vec!["b".into(), "inf".into(), "".into()],
            ],
            &["k", "v", "note"],
        );
        let text = d.render().unwrap();
        let back = CsvDoc::parse(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.render().unwrap(), text);
        assert_eq!(back.manifest.get("command"), Some("test"));
    }

    #[test]
    fn parse_rejects_empty() {
        assert!(CsvDoc::parse("").is_err());
        assert!(CsvDoc::parse("# a: b\n").is_err());
        assert!(CsvDoc::parse("# nocolon\nx\n").is_err());
    }

    #[test]
    fn floats() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(parse_f64("inf").unwrap(), f64::INFINITY);
        for x in [1e-5, 0.00039163, 33961.0, 1.0 / 3.0] {
            assert_eq!(parse_f64(&fmt_f64(x)).unwrap(), x);
        }
        assert!(parse_f64("abc").is_err());
    }

    #[test]
    fn planted_sweep_fit() {
        let mut rows = Vec::new();
        for eps in [1e-4, 2e-4, 4e-4, 8e-4] {
            let mut r = vec![String::new(); SWEEP_COLUMNS.len()];
            r[1] = "inf".into();
            r[2] = fmt_f64(eps);
            r[8] = fmt_f64(33961.0 * eps * eps);
            r[9] = fmt_f64(1e-5);
            r[15] = fmt_f64(290.8 * eps);
            r[16] = fmt_f64(1e-4);
            rows.push(r);
        }
        let doc = doc_with(rows, &SWEEP_COLUMNS);
        let q = fit_document(&doc, Model::Quadratic).unwrap();
        assert_eq!(q.len(), 1);
        assert!(((q[0].fit.coefficients[0] - 33961.0) / 33961.0).abs() < 1e-10);
        let l = fit_document(&doc, Model::Linear).unwrap();
        assert!(((l[0].fit.coefficients[0] - 290.8) / 290.8).abs() < 1e-10);

        let mut fits = doc_with(fit_rows(&q), &FIT_COLUMNS);
        for r in fit_rows(&l) {
            fits.push_row(r).unwrap();
        }
        let th = thresholds_from_fits(&fits).unwrap();
        assert_eq!(th.len(), 1);
        assert!((th[0].0.g1 - 36715.6).abs() < 0.1);
    }

    #[test]
    fn empty_fit_input() {
        let doc = doc_with(vec![], &SWEEP_COLUMNS);
        assert!(fit_document(&doc, Model::Quadratic).is_err());
    }

    #[test]
    fn table1_is_clean() {
        let (rows, flagged) = table1_rows().unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(flagged, 0);
    }
}
