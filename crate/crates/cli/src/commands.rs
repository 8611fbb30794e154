//! The CLI verbs.

use std::fs;
use std::path::{Path, PathBuf};

use nnpi::data::write_csv;
use nnpi::estimators::{
    load_bundle, save_bundle, train_eim, train_ensemble, train_fixed, train_mle, train_quantile,
    GridScore, TrainError,
};
use nnpi::{Method, Splits, Trained, TrainedIntervalModel};

use crate::config::RunConfig;
use crate::dataset::{config_fingerprint, dataset_fingerprint, load_data, prepare, Prepared};
use crate::error::CliError;
use crate::histogram::{self, Bins};
use crate::report::{self, evaluate, percent, row_label, sort_rows, ReportRow};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const TRAINING_LOG: &str = "training_log.csv";
pub const GRID_SEARCH: &str = "grid_search.csv";

/// A validated config plus its fingerprint.
pub struct Run {
    pub cfg: RunConfig,
    pub fingerprint: String,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        Ok(Self {
            fingerprint: config_fingerprint(&cfg)?,
            cfg,
        })
    }

    fn out(&self) -> &Path {
        &self.cfg.output_dir
    }

    /// Creates `dir` and writes the resolved config into it.
    fn persist_config(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RESOLVED_CONFIG), self.cfg.to_toml()?)?;
        Ok(())
    }
}

/// Directory-friendly model name such as `eim-0.8`.
pub fn model_slug(method: Method, trained_target: Option<f64>) -> String {
    match trained_target {
        Some(t) => format!("{method}-{t}"),
        None => method.to_string(),
    }
}

fn train_one(
    cfg: &RunConfig,
    splits: &Splits,
    method: Method,
    target: Option<f64>,
) -> Result<Trained, TrainError> {
    let calibrate_for = match target {
        Some(t) => vec![t],
        None => cfg.targets.clone(),
    };
    let need = || {
        target.ok_or_else(|| TrainError::Config(format!("method {method} needs a coverage target")))
    };
    match method {
        Method::Fixed => train_fixed(splits, &cfg.fixed, cfg.seed, &calibrate_for),
        Method::Mle => train_mle(splits, &cfg.mle, cfg.seed, &calibrate_for),
        Method::Ensemble => train_ensemble(splits, &cfg.ensemble, cfg.seed, &calibrate_for),
        Method::Quantile => train_quantile(splits, &cfg.quantile, need()?, cfg.seed),
        Method::Eim => train_eim(splits, &cfg.eim, need()?, cfg.seed),
    }
}

fn grid_csv(scores: &[GridScore]) -> String {
    let mut out = String::from("tau_lower,tau_upper,k,validation_mpiw,validation_picp\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.tau_lower,
            s.tau_upper,
            s.k.map(|k| k.to_string()).unwrap_or_default(),
            s.validation_mpiw,
            s.validation_picp
        ));
    }
    out
}

fn stamp(model: &mut TrainedIntervalModel, run: &Run, data: &Prepared) {
    model
        .metadata
        .insert("config_fingerprint".into(), run.fingerprint.clone());
    model
        .metadata
        .insert("dataset_fingerprint".into(), data.fingerprint.clone());
    model
        .metadata
        .insert("dataset".into(), data.data.provenance().to_string());
}

/// Bundle directory plus training log, grid scores and resolved config.
fn write_model(
    run: &Run,
    dir: &Path,
    model: &TrainedIntervalModel,
    trained: &Trained,
) -> Result<(), CliError> {
    save_bundle(model, dir).map_err(|e| CliError::training(dir.display().to_string(), e))?;
    fs::write(dir.join(TRAINING_LOG), trained.log.to_csv())?;
    if !trained.search.is_empty() {
        fs::write(dir.join(GRID_SEARCH), grid_csv(&trained.search))?;
    }
    run.persist_config(dir)
}

/// `train`: fits one method and writes its bundle to `<out>/<slug>`.
pub fn train(run: &Run, method: Method, target: Option<f64>) -> Result<PathBuf, CliError> {
    if method.is_target_specific() && target.is_none() {
        return Err(CliError::Usage(format!(
            "--target is required for method {method}"
        )));
    }
    if let Some(t) = target {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Usage(format!(
                "--target must lie in (0, 1), got {t}"
            )));
        }
    }
    let data = prepare(&run.cfg)?;
    let trained_target = target.filter(|_| method.is_target_specific());
    let label = model_slug(method, trained_target);
    let mut trained = train_one(&run.cfg, &data.splits, method, target)
        .map_err(|e| CliError::training(format!("training {label}"), e))?;
    let mut model = trained.model.clone();
    stamp(&mut model, run, &data);
    trained.model = model.clone();
    let dir = run.out().join(&label);
    write_model(run, &dir, &model, &trained)?;
    log::info!("wrote {}", dir.display());
    Ok(dir)
}

fn load_for(data: &Prepared, bundle: &Path) -> Result<TrainedIntervalModel, CliError> {
    let model =
        load_bundle(bundle).map_err(|e| CliError::training(bundle.display().to_string(), e))?;
    if model.scaling.dim() != data.data.dim() {
        return Err(CliError::Data(format!(
            "{} expects {} features, the dataset has {}",
            bundle.display(),
            model.scaling.dim(),
            data.data.dim()
        )));
    }
    Ok(model)
}

fn write_report(
    run: &Run,
    rows: &mut [ReportRow],
    dataset_fp: &str,
    failures: &[String],
) -> Result<(), CliError> {
    sort_rows(rows);
    let mut targets = run.cfg.targets.clone();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    fs::write(
        run.out().join(REPORT_CSV),
        report::render_csv(rows, &run.fingerprint, dataset_fp),
    )?;
    fs::write(
        run.out().join(REPORT_TXT),
        report::render_text(
            rows,
            &targets,
            &run.fingerprint,
            dataset_fp,
            run.cfg.compare.diagonal_check,
            failures,
        ),
    )?;
    Ok(())
}

/// `evaluate`: recalibrates every bundle at every target and scores the test split.
pub fn evaluate_bundles(run: &Run, bundles: &[PathBuf]) -> Result<Vec<ReportRow>, CliError> {
    if bundles.is_empty() {
        return Err(CliError::Usage("at least one --bundle is required".into()));
    }
    let data = prepare(&run.cfg)?;
    let mut rows = Vec::new();
    for b in bundles {
        let mut model = load_for(&data, b)?;
        for &t in &run.cfg.targets {
            rows.push(
                evaluate(&mut model, &data.splits, t)
                    .map_err(|e| CliError::training(format!("evaluating {}", b.display()), e))?,
            );
        }
    }
    run.persist_config(run.out())?;
    write_report(run, &mut rows, &data.fingerprint, &[])?;
    Ok(rows)
}

fn histogram_columns<'a>(
    models: impl Iterator<Item = &'a TrainedIntervalModel>,
    splits: &Splits,
    bins: &Bins,
    target: f64,
) -> Result<Vec<(String, Vec<f64>)>, TrainError> {
    let test = splits.test.features();
    let mut cols = Vec::new();
    for m in models {
        let ivs = m.predict_intervals(test, target)?;
        cols.push((
            row_label(m.method(), m.trained_target),
            bins.coverage_density(&ivs),
        ));
    }
    Ok(cols)
}

/// File name for the coverage histogram at one evaluated target.
pub fn histogram_file(target: f64) -> String {
    format!("histogram-{}.csv", percent(target))
}

/// `compare`: trains every configured method, evaluates every model at every
/// target and writes the report and histograms.
///
/// A failing method is recorded and skipped; the first failure is returned
/// after everything else has been written.
pub fn compare(run: &Run) -> Result<Vec<ReportRow>, CliError> {
    let cfg = &run.cfg;
    let data = prepare(cfg)?;
    run.persist_config(run.out())?;
    let mut jobs: Vec<(Method, Option<f64>)> = Vec::new();
    for method in [
        Method::Fixed,
        Method::Mle,
        Method::Ensemble,
        Method::Quantile,
        Method::Eim,
    ] {
        if !cfg.compare.methods.contains(&method) {
            continue;
        }
        if method.is_target_specific() {
            jobs.extend(cfg.targets.iter().map(|&t| (method, Some(t))));
        } else {
            jobs.push((method, None));
        }
    }

    let mut rows = Vec::new();
    let mut models = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (method, target) in jobs {
        let label = row_label(method, target);
        log::info!("training {label}");
        let outcome = train_one(cfg, &data.splits, method, target).and_then(|mut trained| {
            let mut model = trained.model.clone();
            stamp(&mut model, run, &data);
            let mut local = Vec::new();
            for &t in &cfg.targets {
                local.push(evaluate(&mut model, &data.splits, t)?);
            }
            trained.model = model.clone();
            Ok((trained, model, local))
        });
        match outcome {
            Ok((trained, model, local)) => {
                let dir = run.out().join("models").join(model_slug(method, target));
                write_model(run, &dir, &model, &trained)?;
                rows.extend(local);
                models.push(model);
            }
            Err(e) => {
                log::error!("{label}: {e}");
                failures.push(format!("{label}: {e}"));
                first_error.get_or_insert(CliError::training(label, e));
            }
        }
    }

    write_report(run, &mut rows, &data.fingerprint, &failures)?;
    let targets: Vec<f64> = data.splits.test.targets().to_vec();
    let bins = Bins::over(&targets, cfg.histogram.bins)?;
    for &t in &cfg.targets {
        let eligible = models
            .iter()
            .filter(|m| m.trained_target.is_none_or(|tt| tt == t));
        let cols = histogram_columns(eligible, &data.splits, &bins, t)
            .map_err(|e| CliError::training("histogram", e))?;
        fs::write(
            run.out().join(histogram_file(t)),
            histogram::render(&bins, &cols, &run.fingerprint, &data.fingerprint),
        )?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// `histogram`: coverage density of one bundle on the test split.
pub fn histogram_for(run: &Run, bundle: &Path, target: Option<f64>) -> Result<PathBuf, CliError> {
    let data = prepare(&run.cfg)?;
    let mut model = load_for(&data, bundle)?;
    let t = target
        .or(model.trained_target)
        .unwrap_or(run.cfg.targets[0]);
    model
        .calibrate(&data.splits.calibration, t)
        .map_err(|e| CliError::training(bundle.display().to_string(), e))?;
    let targets: Vec<f64> = data.splits.test.targets().to_vec();
    let bins = Bins::over(&targets, run.cfg.histogram.bins)?;
    let cols = histogram_columns(std::iter::once(&model), &data.splits, &bins, t)
        .map_err(|e| CliError::training(bundle.display().to_string(), e))?;
    run.persist_config(run.out())?;
    let path = run.out().join(format!(
        "histogram-{}-at-{}.csv",
        model_slug(model.method(), model.trained_target),
        percent(t)
    ));
    fs::write(
        &path,
        histogram::render(&bins, &cols, &run.fingerprint, &data.fingerprint),
    )?;
    Ok(path)
}

/// `gen-data`: writes the configured dataset as CSV (target first).
pub fn gen_data(run: &Run, output: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let data = load_data(&run.cfg)?;
    let path = match output {
        Some(p) => p,
        None => run
            .out()
            .join(format!("{}.csv", run.cfg.data.synthetic.kind.name())),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(&data, &path)?;
    log::info!(
        "wrote {} rows to {} (fingerprint {})",
        data.len(),
        path.display(),
        dataset_fingerprint(&data)
    );
    Ok(path)
}
