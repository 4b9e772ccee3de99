use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major numeric design matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, n_rows: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * names.len() {
            return Err(Error::Data(format!(
                "matrix data has {} values, expected {} x {}",
                data.len(),
                n_rows,
                names.len()
            )));
        }
        Ok(FeatureMatrix { names, n_rows, data })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(Error::Data("ragged rows".into()));
        }
        Self::new(names, rows.len(), data)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.names.len();
        &self.data[i * p..(i + 1) * p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.names.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let data = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        FeatureMatrix { names: self.names.clone(), n_rows: rows.len(), data }
    }
}
