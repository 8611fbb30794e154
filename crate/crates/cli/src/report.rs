//! Evaluation rows, the comparison CSV and its text rendering.

use std::fmt::Write as _;

use nnpi::estimators::TrainError;
use nnpi::metrics::{mpiw, picp, scale_intervals};
use nnpi::{Method, Splits, TrainedIntervalModel};

/// Scores of one model at one evaluated coverage target.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub trained_target: Option<f64>,
    pub evaluated_target: f64,
    pub n_test: usize,
    pub raw_picp: f64,
    pub raw_mpiw: f64,
    pub k: f64,
    pub scaled_picp: f64,
    pub scaled_mpiw: f64,
    /// Scaled coverage on the calibration split that fitted `k`.
    pub calibration_picp: f64,
    pub n_calibration: usize,
}

pub const CSV_HEADER: &str = "method,trained_target,evaluated_target,n_test,raw_picp,raw_mpiw,k,\
scaled_picp,scaled_mpiw,calibration_picp,n_calibration";

/// Recalibrates `model` at `target` on the calibration split and scores the test split.
pub fn evaluate(
    model: &mut TrainedIntervalModel,
    splits: &Splits,
    target: f64,
) -> Result<ReportRow, TrainError> {
    let k = model.calibrate(&splits.calibration, target)?;
    let cal = scale_intervals(&model.raw_batch(&splits.calibration, target)?, k);
    let raw = model.raw_batch(&splits.test, target)?;
    let scaled = scale_intervals(&raw, k);
    Ok(ReportRow {
        method: model.method(),
        trained_target: model.trained_target,
        evaluated_target: target,
        n_test: raw.len(),
        raw_picp: picp(&raw),
        raw_mpiw: mpiw(&raw),
        k,
        scaled_picp: picp(&scaled),
        scaled_mpiw: mpiw(&scaled),
        calibration_picp: picp(&cal),
        n_calibration: cal.len(),
    })
}

/// Row label such as `MLE` or `EIM 80`.
pub fn row_label(method: Method, trained_target: Option<f64>) -> String {
    let name = match method {
        Method::Fixed => "Fixed",
        Method::Mle => "MLE",
        Method::Ensemble => "Ensemble",
        Method::Quantile => "Quantile",
        Method::Eim => "EIM",
    };
    match trained_target {
        Some(t) => format!("{name} {}", percent(t)),
        None => name.to_string(),
    }
}

/// `0.8` → `80`, `0.925` → `92.5`.
pub fn percent(t: f64) -> String {
    let p = (t * 100.0 * 1e6).round() / 1e6;
    format!("{p}")
}

/// Display order of methods in tables.
fn method_rank(m: Method) -> usize {
    match m {
        Method::Mle => 0,
        Method::Ensemble => 1,
        Method::Eim => 2,
        Method::Quantile => 3,
        Method::Fixed => 4,
    }
}

/// Sorts rows into table order: method, then trained target, then evaluated target.
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        method_rank(a.method)
            .cmp(&method_rank(b.method))
            .then(
                a.trained_target
                    .unwrap_or(-1.0)
                    .total_cmp(&b.trained_target.unwrap_or(-1.0)),
            )
            .then(a.evaluated_target.total_cmp(&b.evaluated_target))
    });
}

/// `x` rounded to four significant digits.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000".into();
    }
    // The exponent after rounding, so that 9.9996 counts as 10.00.
    let sci = format!("{x:.3e}");
    let exponent: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (3 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn header_lines(config_fp: &str, dataset_fp: &str) -> String {
    format!("# config_fingerprint={config_fp}\n# dataset_fingerprint={dataset_fp}\n")
}

/// Machine-readable report with full-precision values.
pub fn render_csv(rows: &[ReportRow], config_fp: &str, dataset_fp: &str) -> String {
    let mut out = header_lines(config_fp, dataset_fp);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            opt(r.trained_target),
            r.evaluated_target,
            r.n_test,
            r.raw_picp,
            r.raw_mpiw,
            r.k,
            r.scaled_picp,
            r.scaled_mpiw,
            r.calibration_picp,
            r.n_calibration
        )
        .unwrap();
    }
    out
}

/// Outcome of the diagonal check for one trained target.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalResult {
    pub target: f64,
    /// Trained target of the best EIM model at `target`.
    pub best: f64,
    pub best_mpiw: f64,
    pub own_mpiw: f64,
}

impl DiagonalResult {
    pub fn holds(&self) -> bool {
        self.own_mpiw <= self.best_mpiw
    }
}

/// For each EIM model evaluated at its own target: is it the narrowest EIM model there?
pub fn diagonal_check(rows: &[ReportRow]) -> Vec<DiagonalResult> {
    let eim: Vec<&ReportRow> = rows.iter().filter(|r| r.method == Method::Eim).collect();
    let mut out = Vec::new();
    for own in &eim {
        let Some(t) = own.trained_target else {
            continue;
        };
        if own.evaluated_target != t {
            continue;
        }
        let best = eim
            .iter()
            .filter(|r| r.evaluated_target == t)
            .min_by(|a, b| a.scaled_mpiw.total_cmp(&b.scaled_mpiw))
            .expect("own row is present");
        out.push(DiagonalResult {
            target: t,
            best: best.trained_target.unwrap_or(f64::NAN),
            best_mpiw: best.scaled_mpiw,
            own_mpiw: own.scaled_mpiw,
        });
    }
    out
}

fn table(
    out: &mut String,
    title: &str,
    rows: &[ReportRow],
    targets: &[f64],
    value: impl Fn(&ReportRow) -> f64,
) {
    let mut labels: Vec<(Method, Option<f64>)> = Vec::new();
    for r in rows {
        let key = (r.method, r.trained_target);
        if !labels.contains(&key) {
            labels.push(key);
        }
    }
    let names: Vec<String> = labels.iter().map(|&(m, t)| row_label(m, t)).collect();
    let first = names.iter().map(String::len).max().unwrap_or(0).max(5);
    let cells: Vec<Vec<String>> = labels
        .iter()
        .map(|&(m, tt)| {
            targets
                .iter()
                .map(|&t| {
                    rows.iter()
                        .find(|r| {
                            r.method == m && r.trained_target == tt && r.evaluated_target == t
                        })
                        .map(|r| sig4(value(r)))
                        .unwrap_or_else(|| "-".into())
                })
                .collect()
        })
        .collect();
    let heads: Vec<String> = targets
        .iter()
        .map(|&t| format!("{}%", percent(t)))
        .collect();
    let width = cells
        .iter()
        .flatten()
        .chain(&heads)
        .map(String::len)
        .max()
        .unwrap_or(0);
    writeln!(out, "{title}").unwrap();
    write!(out, "{:<first$}", "model").unwrap();
    for h in &heads {
        write!(out, "  {h:>width$}").unwrap();
    }
    out.push('\n');
    for (name, row) in names.iter().zip(&cells) {
        write!(out, "{name:<first$}").unwrap();
        for c in row {
            write!(out, "  {c:>width$}").unwrap();
        }
        out.push('\n');
    }
    out.push('\n');
}

/// Aligned text tables (one per metric, models × evaluated targets).
pub fn render_text(
    rows: &[ReportRow],
    targets: &[f64],
    config_fp: &str,
    dataset_fp: &str,
    diagonal: bool,
    failures: &[String],
) -> String {
    let mut out = header_lines(config_fp, dataset_fp);
    out.push('\n');
    table(&mut out, "Scaled test MPIW", rows, targets, |r| {
        r.scaled_mpiw
    });
    table(&mut out, "Scaled test PICP", rows, targets, |r| {
        r.scaled_picp
    });
    table(&mut out, "Calibration factor k", rows, targets, |r| r.k);
    table(&mut out, "Raw test MPIW", rows, targets, |r| r.raw_mpiw);
    table(&mut out, "Raw test PICP", rows, targets, |r| r.raw_picp);
    table(&mut out, "Scaled calibration PICP", rows, targets, |r| {
        r.calibration_picp
    });
    if diagonal {
        let checks = diagonal_check(rows);
        if !checks.is_empty() {
            writeln!(out, "EIM diagonal check").unwrap();
            for c in &checks {
                let verdict = if c.holds() {
                    "best".to_string()
                } else {
                    format!(
                        "not best (EIM {} has {})",
                        percent(c.best),
                        sig4(c.best_mpiw)
                    )
                };
                writeln!(
                    out,
                    "EIM {} at {}%: {} with {}",
                    percent(c.target),
                    percent(c.target),
                    verdict,
                    sig4(c.own_mpiw)
                )
                .unwrap();
            }
            let held = checks.iter().filter(|c| c.holds()).count();
            writeln!(
                out,
                "diagonal holds for {held} of {} targets\n",
                checks.len()
            )
            .unwrap();
        }
    }
    if !failures.is_empty() {
        writeln!(out, "Failures").unwrap();
        for f in failures {
            writeln!(out, "{f}").unwrap();
        }
    }
    out
}

/// Parses rows back from [`render_csv`] output.
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some(CSV_HEADER) {
        return Err("missing report header".into());
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(format!("expected 11 fields in `{line}`"));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("`{}`: {e}", f[i]));
            let int = |i: usize| {
                f[i].parse::<usize>()
                    .map_err(|e| format!("`{}`: {e}", f[i]))
            };
            Ok(ReportRow {
                method: f[0].parse().map_err(|e| format!("{e}"))?,
                trained_target: if f[1].is_empty() { None } else { Some(num(1)?) },
                evaluated_target: num(2)?,
                n_test: int(3)?,
                raw_picp: num(4)?,
                raw_mpiw: num(5)?,
                k: num(6)?,
                scaled_picp: num(7)?,
                scaled_mpiw: num(8)?,
                calibration_picp: num(9)?,
                n_calibration: int(10)?,
            })
        })
        .collect()
}
