//! Datasets, CSV tables and the bounding preprocessing step.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{Family, Observation};

/// Row-major design matrix with responses. Row `i` is `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("dataset needs p >= 1".into()));
        }
        if x.len() != p * y.len() {
            return Err(Error::Dimension { expected: p * y.len(), got: x.len() });
        }
        Ok(Self { p, x, y })
    }

    pub fn from_observations(obs: &[Observation]) -> Result<Self> {
        let p = obs.first().map(|o| o.x.len()).ok_or_else(|| {
            Error::InvalidParameter("cannot build a dataset from zero observations".into())
        })?;
        let mut x = Vec::with_capacity(p * obs.len());
        for o in obs {
            crate::error::check_dim(p, o.x.len())?;
            x.extend_from_slice(&o.x);
        }
        Self::new(p, x, obs.iter().map(|o| o.y).collect())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.x.chunks_exact(self.p).zip(self.y.iter().copied())
    }

    pub fn observation(&self, i: usize) -> Observation {
        Observation::new(self.row(i).to_vec(), self.y[i])
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.rows().map(|(x, y)| Observation::new(x.to_vec(), y)).collect()
    }

    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.p, &self.x)
    }

    pub fn response(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    /// Refuses data outside the bounded domain the sensitivity bounds assume:
    /// every covariate in `[-1, 1]`, linear responses in `[-1, 1]`, logistic
    /// responses in `{0, 1}`. The error names the first offending row.
    pub fn check_domain(&self, family: Family) -> Result<()> {
        for (i, (x, y)) in self.rows().enumerate() {
            if let Some((j, v)) = x.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
                return Err(Error::DomainViolation {
                    row: i,
                    reason: format!("covariate {j} = {v} is outside [-1, 1]"),
                });
            }
            let ok = match family {
                Family::Linear => y.abs() <= 1.0,
                Family::Logistic => y == 0.0 || y == 1.0,
            };
            if !ok {
                let want = match family {
                    Family::Linear => "[-1, 1]",
                    Family::Logistic => "{0, 1}",
                };
                return Err(Error::DomainViolation {
                    row: i,
                    reason: format!("response {y} is outside {want}"),
                });
            }
        }
        Ok(())
    }
}

/// A numeric table read from CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .zip(&headers)
                .map(|(field, name)| {
                    field.parse::<f64>().map_err(|_| Error::Preprocess {
                        column: name.clone(),
                        reason: format!("row {i}: '{field}' is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| Error::Preprocess {
            column: name.to_owned(),
            reason: "no such column".into(),
        })
    }
}

/// Which columns to log-transform and which column is the response.
///
/// Every non-response column becomes a covariate unless `covariates` lists
/// them explicitly. The scaling constants are computed from the data and are
/// treated as public.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub response: String,
    pub log_columns: Vec<String>,
    pub covariates: Option<Vec<String>>,
    /// Min-max the response to `[-1, 1]` (linear models). Binary responses
    /// for logistic models must keep their `{0, 1}` coding.
    pub scale_response: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            response: "y".into(),
            log_columns: Vec::new(),
            covariates: None,
            scale_response: true,
        }
    }
}

/// Affine map applied to one column: `v -> 2 (t(v) - min) / (max - min) - 1`
/// where `t` is `ln` for log columns and the identity otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub column: String,
    pub log: bool,
    pub min: f64,
    pub max: f64,
}

impl ColumnScaling {
    pub fn apply(&self, v: f64) -> f64 {
        let t = if self.log { v.ln() } else { v };
        2.0 * (t - self.min) / (self.max - self.min) - 1.0
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub data: Dataset,
    pub covariate_names: Vec<String>,
    /// Response scaling first (if any), then one entry per covariate.
    pub scaling: Vec<ColumnScaling>,
}

pub fn preprocess(table: &RawTable, config: &PreprocessConfig) -> Result<Preprocessed> {
    if table.rows.is_empty() {
        return Err(Error::InvalidParameter("table has no rows".into()));
    }
    for name in &config.log_columns {
        table.column_index(name)?;
    }
    let response_idx = table.column_index(&config.response)?;
    let covariate_names: Vec<String> = match &config.covariates {
        Some(names) => names.clone(),
        None => table
            .headers
            .iter()
            .filter(|h| **h != config.response)
            .cloned()
            .collect(),
    };
    let covariate_idx = covariate_names
        .iter()
        .map(|n| table.column_index(n))
        .collect::<Result<Vec<_>>>()?;

    let transformed = |idx: usize| -> Result<(Vec<f64>, ColumnScaling)> {
        let name = &table.headers[idx];
        let log = config.log_columns.contains(name);
        let mut values = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            let v = row[idx];
            if log && !(v > 0.0) {
                return Err(Error::Preprocess {
                    column: name.clone(),
                    reason: format!("row {i}: log transform needs a positive value, got {v}"),
                });
            }
            values.push(if log { v.ln() } else { v });
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if !(max > min) {
            return Err(Error::Preprocess {
                column: name.clone(),
                reason: "column is constant; min-max scaling is undefined".into(),
            });
        }
        let scaled = values.iter().map(|t| 2.0 * (t - min) / (max - min) - 1.0).collect();
        Ok((scaled, ColumnScaling { column: name.clone(), log, min, max }))
    };

    let mut scaling = Vec::with_capacity(covariate_idx.len() + 1);
    let y = if config.scale_response {
        let (y, s) = transformed(response_idx)?;
        scaling.push(s);
        y
    } else {
        table.rows.iter().map(|r| r[response_idx]).collect()
    };
    let mut columns = Vec::with_capacity(covariate_idx.len());
    for idx in covariate_idx {
        let (col, s) = transformed(idx)?;
        columns.push(col);
        scaling.push(s);
    }

    let p = columns.len() + 1;
    let n = table.rows.len();
    let mut x = Vec::with_capacity(n * p);
    for i in 0..n {
        x.push(1.0);
        x.extend(columns.iter().map(|c| c[i]));
    }
    Ok(Preprocessed { data: Dataset::new(p, x, y)?, covariate_names, scaling })
}
