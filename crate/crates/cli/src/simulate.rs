//! Synthetic two-group data sets written as CSV.

use std::fs;
use std::path::Path;

use dirreg_core::simulate::{BloodShaped, BLOOD_BETA};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Parse `"b0,b1;b0,b1;…"` into `(intercept, group-B effect)` rows.
pub fn parse_beta(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split(';')
        .map(|row| {
            let v: Vec<f64> = row
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CliError::Config(format!("beta row `{row}` is not two numbers")))?;
            match v[..] {
                [a, b] => Ok([a, b]),
                _ => Err(CliError::Config(format!("beta row `{row}` needs exactly two numbers"))),
            }
        })
        .collect()
}

/// Rows of the built-in blood fit, cycled to `components − 1` rows.
pub fn default_beta(components: usize) -> Vec<[f64; 2]> {
    (0..components.saturating_sub(1))
        .map(|k| BLOOD_BETA[k % BLOOD_BETA.len()])
        .collect()
}

#[derive(Debug, Serialize)]
struct Truth<'a> {
    components: Vec<String>,
    reference: String,
    beta: &'a [[f64; 2]],
    log_precision: f64,
    n: usize,
    seed: u64,
}

/// Generate and write `spec` as CSV (components, then `Disease`), plus the
/// true coefficients as JSON when `truth` is given.
pub fn write_simulated(spec: &BloodShaped, output: &Path, truth: Option<&Path>) -> Result<()> {
    if spec.beta.is_empty() {
        return Err(CliError::Config("at least two components required".into()));
    }
    if !(0.0..=1.0).contains(&spec.share_a) {
        return Err(CliError::Config(format!("share {} outside [0, 1]", spec.share_a)));
    }
    let data = spec.generate()?;
    let names = data.y.component_names().to_vec();
    let mut w = csv::Writer::from_path(output).map_err(|e| CliError::io(output, e))?;
    let mut header = names.clone();
    header.push("Disease".into());
    w.write_record(&header).map_err(|e| CliError::io(output, e))?;
    let disease = data.table.require("Disease")?;
    for i in 0..data.y.n_obs() {
        let mut record: Vec<String> = data.y.row(i).iter().map(|v| v.to_string()).collect();
        record.push(disease.value(i).map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&record).map_err(|e| CliError::io(output, e))?;
    }
    w.flush().map_err(|e| CliError::io(output, e))?;
    if let Some(path) = truth {
        let t = Truth {
            reference: names[names.len() - 1].clone(),
            components: names,
            beta: &spec.beta,
            log_precision: spec.log_precision,
            n: spec.n,
            seed: spec.seed,
        };
        let mut text = serde_json::to_string_pretty(&t).map_err(|e| CliError::io(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_parsing() {
        assert_eq!(parse_beta("1,2; -0.5,0").unwrap(), vec![[1.0, 2.0], [-0.5, 0.0]]);
        assert!(parse_beta("1,2,3").is_err());
        assert!(parse_beta("1,x").is_err());
    }

    #[test]
    fn default_rows_cycle() {
        assert_eq!(default_beta(3), BLOOD_BETA[..2].to_vec());
        assert_eq!(default_beta(5)[3], BLOOD_BETA[0]);
    }

    #[test]
    fn writes_closed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sim.csv");
        let truth = dir.path().join("truth.json");
        write_simulated(&BloodShaped::default(), &out, Some(&truth)).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "Albumin,Pre.Albumin,Globulin.A,Globulin.B,Disease");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 30);
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            let sum: f64 = fields[..4].iter().map(|f| f.parse::<f64>().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(fields[4] == "A" || fields[4] == "B");
        }
        let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&truth).unwrap()).unwrap();
        assert_eq!(t["reference"], "Globulin.B");
    }
}
