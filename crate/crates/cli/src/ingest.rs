//! CSV ingestion: typed columns, incomplete-row removal, response closure
//! and the zero transform.

use std::path::Path;

use dirreg_core::composition::{transform_zeros, validate_and_normalize, CompositionMatrix};
use dirreg_core::model::{Column, DataTable};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// How the response columns are found in the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSelector {
    /// Exactly these columns, in this order.
    Columns(Vec<String>),
    /// Every column whose name starts with the prefix, in file order.
    /// Component names drop the prefix and one `.`/`_` separator.
    Prefix(String),
}

/// Counts reported back to the user; `retained_rows + dropped_rows ==
/// input_rows`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_rows: usize,
    pub dropped_rows: usize,
    pub retained_rows: usize,
    /// Rows whose sum was off by more than the closure tolerance.
    pub normalized_rows: usize,
    pub replaced_zeros: usize,
    pub transformed_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    /// Non-response columns of the retained rows.
    pub covariates: DataTable,
    /// Closed, zero-transformed response.
    pub y: CompositionMatrix,
    pub report: IngestReport,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

struct RawCsv {
    header: Vec<String>,
    records: Vec<Vec<String>>,
}

fn read_raw(path: &Path) -> Result<RawCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| parse_error(&e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(&e, i as u64 + 2))?;
        records.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawCsv { header, records })
}

fn parse_error(err: &csv::Error, fallback_line: u64) -> CliError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    CliError::Parse {
        line,
        message: err.to_string(),
    }
}

fn component_name(column: &str, prefix: &str) -> String {
    let rest = &column[prefix.len()..];
    let rest = rest
        .strip_prefix('.')
        .or_else(|| rest.strip_prefix('_'))
        .unwrap_or(rest);
    if rest.is_empty() {
        column.to_string()
    } else {
        rest.to_string()
    }
}

/// Read `path`, keep rows complete in the response and `covariates`, close
/// the response rows and apply the zero transform.
pub fn ingest_csv(path: &Path, response: &ResponseSelector, covariates: &[String]) -> Result<Ingested> {
    let raw = read_raw(path)?;
    let response_idx: Vec<usize> = match response {
        ResponseSelector::Columns(names) => names
            .iter()
            .map(|n| {
                raw.header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| CliError::NoResponseColumns(format!("column `{n}` not in header")))
            })
            .collect::<Result<_>>()?,
        ResponseSelector::Prefix(prefix) => (0..raw.header.len())
            .filter(|&j| raw.header[j].starts_with(prefix.as_str()))
            .collect(),
    };
    if response_idx.len() < 2 {
        return Err(CliError::NoResponseColumns(format!(
            "{} response column(s) selected; at least 2 required",
            response_idx.len()
        )));
    }
    let component_names: Vec<String> = response_idx
        .iter()
        .map(|&j| match response {
            ResponseSelector::Prefix(p) => component_name(&raw.header[j], p),
            ResponseSelector::Columns(_) => raw.header[j].clone(),
        })
        .collect();
    for c in covariates {
        if !raw.header.contains(c) {
            return Err(dirreg_core::Error::UnknownColumn(c.clone()).into());
        }
        if response_idx.iter().any(|&j| &raw.header[j] == c) {
            return Err(CliError::Config(format!("`{c}` is both a response and a covariate")));
        }
    }

    let used: Vec<usize> = response_idx
        .iter()
        .copied()
        .chain(covariates.iter().map(|c| raw.header.iter().position(|h| h == c).unwrap()))
        .collect();
    let keep: Vec<usize> = (0..raw.records.len())
        .filter(|&i| used.iter().all(|&j| !is_missing(&raw.records[i][j])))
        .collect();
    let input_rows = raw.records.len();
    if keep.is_empty() {
        return Err(CliError::AllRowsDropped);
    }

    let mut values = DMatrix::zeros(keep.len(), response_idx.len());
    for (r, &i) in keep.iter().enumerate() {
        for (c, &j) in response_idx.iter().enumerate() {
            let field = raw.records[i][j].trim();
            values[(r, c)] = field.parse::<f64>().map_err(|_| CliError::Parse {
                line: i as u64 + 2,
                message: format!("response column `{}`: `{field}` is not a number", raw.header[j]),
            })?;
        }
    }
    let normalized = validate_and_normalize(&values, component_names)?;
    let transformed = transform_zeros(&normalized.matrix)?;

    let mut table = DataTable::new(keep.len());
    for (j, name) in raw.header.iter().enumerate() {
        if response_idx.contains(&j) {
            continue;
        }
        let fields: Vec<&str> = keep.iter().map(|&i| raw.records[i][j].as_str()).collect();
        table.insert(name.clone(), typed_column(&fields))?;
    }

    Ok(Ingested {
        covariates: table,
        y: transformed.matrix,
        report: IngestReport {
            input_rows,
            dropped_rows: input_rows - keep.len(),
            retained_rows: keep.len(),
            normalized_rows: normalized.normalized_rows,
            replaced_zeros: transformed.replaced_zeros,
            transformed_rows: transformed.transformed_rows,
        },
    })
}

/// Numeric when every present field parses as a number, else categorical.
fn typed_column(fields: &[&str]) -> Column {
    let parsed: Option<Vec<Option<f64>>> = fields
        .iter()
        .map(|f| {
            if is_missing(f) {
                Some(None)
            } else {
                f.trim().parse::<f64>().ok().map(Some)
            }
        })
        .collect();
    match parsed {
        Some(v) => Column::Numeric(v),
        None => Column::Categorical(
            fields
                .iter()
                .map(|f| (!is_missing(f)).then(|| f.trim().to_string()))
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn cols(names: &[&str]) -> ResponseSelector {
        ResponseSelector::Columns(names.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn drops_incomplete_rows() {
        let f = write("a,b,g\n0.5,0.5,x\n0.2,0.8,\n0.3,0.7,y\nNA,1,y\n");
        let got = ingest_csv(f.path(), &cols(&["a", "b"]), &["g".into()]).unwrap();
        assert_eq!(got.report.input_rows, 4);
        assert_eq!(got.report.retained_rows, 2);
        assert_eq!(got.report.dropped_rows, 2);
        assert_eq!(got.y.n_obs(), 2);
        assert_eq!(got.covariates.column("g").unwrap().levels(), ["x", "y"]);
    }

    #[test]
    fn unused_missing_columns_do_not_drop() {
        let f = write("a,b,g,h\n0.5,0.5,x,\n0.3,0.7,y,1\n");
        let got = ingest_csv(f.path(), &cols(&["a", "b"]), &["g".into()]).unwrap();
        assert_eq!(got.report.retained_rows, 2);
    }

    #[test]
    fn zero_is_replaced_and_counted() {
        let f = write("p.a,p.b,p.c\n0,0.5,0.5\n0.2,0.3,0.5\n");
        let got = ingest_csv(f.path(), &ResponseSelector::Prefix("p".into()), &[]).unwrap();
        assert_eq!(got.y.component_names(), ["a", "b", "c"]);
        assert_eq!(got.report.replaced_zeros, 1);
        assert_eq!(got.report.transformed_rows, 1);
        assert!(got.y.is_interior());
    }

    #[test]
    fn unclosed_rows_are_normalized() {
        let f = write("a,b\n1,3\n0.25,0.75\n");
        let got = ingest_csv(f.path(), &cols(&["a", "b"]), &[]).unwrap();
        assert_eq!(got.report.normalized_rows, 1);
        assert_eq!(got.y.row(0), got.y.row(1));
    }

    #[test]
    fn error_cases() {
        let header_only = write("a,b,g\n");
        assert!(matches!(
            ingest_csv(header_only.path(), &cols(&["a", "b"]), &[]),
            Err(CliError::AllRowsDropped)
        ));
        let ragged = write("a,b\n0.5,0.5\n0.5,0.5,1\n");
        assert!(matches!(
            ingest_csv(ragged.path(), &cols(&["a", "b"]), &[]),
            Err(CliError::Parse { line: 3, .. })
        ));
        let text = write("a,b\n0.5,0.5\nhalf,0.5\n");
        assert!(matches!(
            ingest_csv(text.path(), &cols(&["a", "b"]), &[]),
            Err(CliError::Parse { line: 3, .. })
        ));
        let f = write("a,b\n0.5,0.5\n");
        assert!(matches!(
            ingest_csv(f.path(), &ResponseSelector::Prefix("z".into()), &[]),
            Err(CliError::NoResponseColumns(_))
        ));
        assert!(matches!(
            ingest_csv(f.path(), &cols(&["a", "b"]), &["g".into()]),
            Err(CliError::Core(dirreg_core::Error::UnknownColumn(_)))
        ));
        let negative = write("a,b\n-0.5,1.5\n");
        assert_eq!(
            ingest_csv(negative.path(), &cols(&["a", "b"]), &[]).unwrap_err().code(),
            "negative_entry"
        );
    }
}
