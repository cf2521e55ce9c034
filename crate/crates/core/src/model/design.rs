use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::data::{Column, DataTable, Value};
use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// How one formula term maps onto design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TermEncoding {
    Numeric { name: String },
    /// Dummy coding against `levels[0]`; one column per remaining level.
    Categorical { name: String, levels: Vec<String> },
}

impl TermEncoding {
    pub fn name(&self) -> &str {
        match self {
            TermEncoding::Numeric { name } | TermEncoding::Categorical { name, .. } => name,
        }
    }
}

/// `n × p` model matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    encoding: Vec<TermEncoding>,
}

impl DesignMatrix {
    pub fn intercept_only(n: usize) -> Self {
        Self {
            values: DMatrix::from_element(n, 1, 1.0),
            column_names: vec![INTERCEPT.to_string()],
            encoding: Vec::new(),
        }
    }

    /// Wrap a numeric matrix; column 0 must be all ones. Remaining columns
    /// are treated as numeric terms named after their column.
    pub fn from_columns(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        if values.ncols() == 0 || values.ncols() != column_names.len() {
            return Err(Error::DimensionMismatch {
                context: "design column names",
                expected: values.ncols(),
                found: column_names.len(),
            });
        }
        if values.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::Dimension(
                "first design column must be the intercept".into(),
            ));
        }
        let encoding = column_names[1..]
            .iter()
            .map(|name| TermEncoding::Numeric { name: name.clone() })
            .collect();
        Ok(Self {
            values,
            column_names,
            encoding,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn encoding(&self) -> &[TermEncoding] {
        &self.encoding
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Encode a covariate setting with the same layout as the training design.
    pub fn encode<F>(&self, mut lookup: F) -> Result<Vec<f64>>
    where
        F: FnMut(&str) -> Option<Value>,
    {
        let mut row = Vec::with_capacity(self.n_cols());
        row.push(1.0);
        for term in &self.encoding {
            let value = lookup(term.name()).ok_or_else(|| Error::MissingValue {
                column: term.name().to_string(),
                row: 0,
            })?;
            match (term, value) {
                (TermEncoding::Numeric { .. }, Value::Number(x)) => row.push(x),
                (TermEncoding::Categorical { levels, .. }, Value::Level(level)) => {
                    if !levels.contains(&level) {
                        return Err(Error::UnknownColumn(format!("{}={level}", term.name())));
                    }
                    row.extend(levels[1..].iter().map(|l| f64::from(u8::from(*l == level))));
                }
                (term, _) => {
                    return Err(Error::Dimension(format!(
                        "value kind does not match term `{}`",
                        term.name()
                    )))
                }
            }
        }
        Ok(row)
    }
}

/// Intercept plus main effects, categorical terms dummy-coded against their
/// lexicographically first level.
pub fn build_design_matrix(terms: &[String], data: &DataTable) -> Result<DesignMatrix> {
    let n = data.n_rows();
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut column_names = vec![INTERCEPT.to_string()];
    let mut encoding = Vec::with_capacity(terms.len());
    for term in terms {
        let column = data.require(term)?;
        if let Some(row) = (0..n).find(|&r| column.is_missing(r)) {
            return Err(Error::MissingValue {
                column: term.clone(),
                row,
            });
        }
        match column {
            Column::Numeric(v) => {
                columns.push(v.iter().map(|x| x.unwrap_or(f64::NAN)).collect());
                column_names.push(term.clone());
                encoding.push(TermEncoding::Numeric { name: term.clone() });
            }
            Column::Categorical(v) => {
                let levels = column.levels();
                if levels.len() < 2 {
                    return Err(Error::SingleLevelFactor(term.clone()));
                }
                for level in &levels[1..] {
                    columns.push(
                        v.iter()
                            .map(|x| f64::from(u8::from(x.as_deref() == Some(level.as_str()))))
                            .collect(),
                    );
                    column_names.push(format!("{term}{level}"));
                }
                encoding.push(TermEncoding::Categorical {
                    name: term.clone(),
                    levels,
                });
            }
        }
    }
    let p = columns.len();
    let values = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    Ok(DesignMatrix {
        values,
        column_names,
        encoding,
    })
}
