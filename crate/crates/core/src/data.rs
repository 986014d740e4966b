use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Named numeric feature columns plus a response, all of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: IndexMap<String, Vec<f64>>,
    response: Vec<f64>,
}

impl Dataset {
    pub fn new(columns: IndexMap<String, Vec<f64>>, response: Vec<f64>) -> Result<Dataset> {
        let n = response.len();
        for (name, col) in &columns {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "column `{name}` has {} rows, response has {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumericColumn {
                    column: name.clone(),
                    reason: format!("non-finite value at row {i}"),
                });
            }
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite response at row {i}")));
        }
        Ok(Dataset { columns, response })
    }

    /// Builds a dataset from `(name, values)` pairs.
    pub fn from_columns<I, S>(columns: I, response: Vec<f64>) -> Result<Dataset>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        Dataset::new(columns.into_iter().map(|(k, v)| (k.into(), v)).collect(), response)
    }

    /// Features without an observed response; the response is set to zero.
    pub fn features_only(columns: IndexMap<String, Vec<f64>>) -> Result<Dataset> {
        let n = columns.values().next().map_or(0, Vec::len);
        Dataset::new(columns, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Rows `rows`, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), rows.iter().map(|&i| v[i]).collect()))
                .collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
        }
    }
}
