//! Delimiter-separated table loading.
//!
//! Tables must be rectangular and numeric; the target is one designated
//! column (the last one by default). Every parse failure names the
//! offending 1-based line, and the optional header row can be auto-detected
//! (a first row with any non-numeric cell is treated as a header).

use std::path::Path;

use aglnet::{Dataset, Task};

use crate::config::ResolvedData;
use crate::error::{io_error, CliError, Result};

/// A loaded dataset plus the header names, when the file had a header.
#[derive(Debug)]
pub struct LoadedTable {
    pub dataset: Dataset,
    pub header: Option<Vec<String>>,
}

pub fn load_table(source: &ResolvedData, task: Task) -> Result<LoadedTable> {
    let mut delim_buf = [0u8; 4];
    let delim_str = source.delimiter.encode_utf8(&mut delim_buf);
    if delim_str.len() != 1 {
        return Err(CliError::Usage(format!(
            "delimiter must be a single-byte character, got {:?}",
            source.delimiter
        )));
    }
    let path = &source.path;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim_str.as_bytes()[0])
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_error("read", path, std::io::Error::other(e.to_string())),
            _ => CliError::Usage(format!("{}: {e}", path.display())),
        })?;

    let mut width: Option<usize> = None;
    let mut header: Option<Vec<String>> = None;
    let mut inputs: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut first = true;

    for record in reader.records() {
        let record =
            record.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        if first {
            first = false;
            let treat_as_header = match source.has_header {
                Some(explicit) => explicit,
                None => record.iter().any(|cell| cell.parse::<f64>().is_err()),
            };
            width = Some(record.len());
            if treat_as_header {
                header = Some(record.iter().map(str::to_string).collect());
                continue;
            }
        }

        let width = width.unwrap();
        if record.len() != width {
            return Err(CliError::Usage(format!(
                "{}: line {line}: expected {width} fields, found {}",
                path.display(),
                record.len()
            )));
        }
        if width < 2 {
            return Err(CliError::Usage(format!(
                "{}: line {line}: need at least two columns (features and a target)",
                path.display()
            )));
        }
        let target_col = match source.target_column {
            Some(c) if c >= width => {
                return Err(CliError::Usage(format!(
                    "{}: target column {c} out of range for {width} columns",
                    path.display()
                )))
            }
            Some(c) => c,
            None => width - 1,
        };

        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                CliError::Usage(format!(
                    "{}: line {line}, column {}: cannot parse {cell:?} as a number",
                    path.display(),
                    col + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Usage(format!(
                    "{}: line {line}, column {}: non-finite value {cell:?}",
                    path.display(),
                    col + 1
                )));
            }
            if col == target_col {
                if task == Task::Binary && value != 0.0 && value != 1.0 {
                    return Err(CliError::Usage(format!(
                        "{}: line {line}: binary target must be 0 or 1, got {cell}",
                        path.display()
                    )));
                }
                targets.push(value);
            } else {
                inputs.push(value);
            }
        }
    }

    let width = width.unwrap_or(0);
    if targets.is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", path.display())));
    }
    let dataset = Dataset::from_flat(inputs, width - 1, targets, task)?;

    // drop the target column's name so header entries align with features
    let header = header.map(|mut names| {
        let target_col = source.target_column.unwrap_or(width - 1);
        names.remove(target_col);
        names
    });
    Ok(LoadedTable { dataset, header })
}

/// Reads a feature-names file: one name per line, blank lines skipped. The
/// count must match the dataset's feature count exactly.
pub fn load_names(path: &Path, n_inputs: usize) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error("read names from", path, e))?;
    let names: Vec<String> =
        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect();
    if names.len() != n_inputs {
        return Err(CliError::Usage(format!(
            "{}: {} names for {} features",
            path.display(),
            names.len(),
            n_inputs
        )));
    }
    Ok(names)
}

/// Feature names for reporting: explicit names file, else the data header,
/// else x0, x1, ...
pub fn feature_names(
    names_file: Option<&Path>,
    header: Option<&[String]>,
    n_inputs: usize,
) -> Result<Vec<String>> {
    if let Some(path) = names_file {
        return load_names(path, n_inputs);
    }
    if let Some(header) = header {
        if header.len() == n_inputs {
            return Ok(header.to_vec());
        }
    }
    Ok((0..n_inputs).map(|k| format!("x{k}")).collect())
}
