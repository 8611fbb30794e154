//! Comma-separated dataset files (no quoting).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{DataError, Dataset};

/// Feature count of the YearPredictionMSD file.
pub const MSD_FEATURES: usize = 90;
/// Release-year range of the YearPredictionMSD targets.
pub const MSD_YEAR_RANGE: (f64, f64) = (1922.0, 2011.0);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    pub target_column: usize,
    pub has_header: bool,
}

/// Row counts collected while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    pub rejected_non_finite: usize,
    pub out_of_range_targets: usize,
}

pub fn load_csv(path: &Path, options: CsvOptions) -> Result<(Dataset, LoadReport), DataError> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut report = LoadReport::default();
    let mut width: Option<usize> = None;
    let mut features: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if options.has_header && i == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| DataError::Parse {
                    path: display.clone(),
                    line: lineno,
                    message: format!("cannot parse `{}` as a number", field.trim()),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match width {
            None => {
                if options.target_column >= values.len() {
                    return Err(DataError::Parse {
                        path: display,
                        line: lineno,
                        message: format!(
                            "target column {} out of range for {} fields",
                            options.target_column,
                            values.len()
                        ),
                    });
                }
                width = Some(values.len());
            }
            Some(w) if w != values.len() => {
                return Err(DataError::Parse {
                    path: display,
                    line: lineno,
                    message: format!("expected {w} fields, found {}", values.len()),
                });
            }
            Some(_) => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            report.rejected_non_finite += 1;
            continue;
        }
        for (j, v) in values.into_iter().enumerate() {
            if j == options.target_column {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }

    let Some(width) = width else {
        return Err(DataError::Format(format!("{display}: no data rows")));
    };
    if report.rejected_non_finite > 0 {
        log::warn!(
            "{display}: rejected {} row(s) with non-finite values",
            report.rejected_non_finite
        );
    }
    report.rows = targets.len();
    if report.rows == 0 {
        return Err(DataError::Format(format!(
            "{display}: every row was rejected"
        )));
    }
    let features = Array2::from_shape_vec((report.rows, width - 1), features)
        .map_err(|e| DataError::Format(e.to_string()))?;
    let data = Dataset::new(features, Array1::from(targets), format!("csv:{display}"))?;
    Ok((data, report))
}

/// Loads YearPredictionMSD: year in column 0, 90 audio features, no header.
///
/// Years outside 1922–2011 are kept and counted.
pub fn load_msd_csv(path: &Path) -> Result<(Dataset, LoadReport), DataError> {
    let (data, mut report) = load_csv(path, CsvOptions::default())?;
    if data.dim() != MSD_FEATURES {
        return Err(DataError::Format(format!(
            "{}: expected {MSD_FEATURES} feature columns, found {}",
            path.display(),
            data.dim()
        )));
    }
    report.out_of_range_targets = data
        .targets()
        .iter()
        .filter(|&&y| y < MSD_YEAR_RANGE.0 || y > MSD_YEAR_RANGE.1)
        .count();
    if report.out_of_range_targets > 0 {
        log::warn!(
            "{}: {} target(s) outside {}-{}",
            path.display(),
            report.out_of_range_targets,
            MSD_YEAR_RANGE.0,
            MSD_YEAR_RANGE.1
        );
    }
    let provenance = format!("msd:{}", path.display());
    let data = Dataset::new(
        data.features().to_owned(),
        data.targets().to_owned(),
        provenance,
    )?;
    Ok((data, report))
}

/// Writes target then features per row, no header; values round-trip exactly.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut line = String::new();
    for (y, x) in data.targets().iter().zip(data.features().rows()) {
        line.clear();
        line.push_str(&y.to_string());
        for v in x {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}
