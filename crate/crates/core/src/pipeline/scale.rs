use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnData, TabularFrame};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub column: String,
    pub mu: f64,
    /// Population standard deviation; zero marks a constant column.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ColumnScale>,
}

impl ScalerParams {
    pub fn constant_columns(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().filter(|c| c.sigma == 0.0).map(|c| c.column.as_str())
    }
}

pub fn fit_scaler(train: &TabularFrame, columns: &[String]) -> Result<ScalerParams> {
    let columns = columns
        .iter()
        .map(|name| {
            let values = train
                .require(name)?
                .as_numeric()
                .ok_or_else(|| Error::Pipeline(format!("cannot scale non-numeric column `{name}`")))?;
            let (mu, sigma) =
                if values.is_empty() { (0.0, 0.0) } else { (stats::mean(values), stats::std_dev(values)) };
            Ok(ColumnScale { column: name.clone(), mu, sigma })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalerParams { columns })
}

/// Maps `x -> (x - mu) / sigma`, or to 0 for constant columns.
pub fn apply_scaler(params: &ScalerParams, frame: &TabularFrame) -> Result<TabularFrame> {
    let mut out = frame.clone();
    for c in &params.columns {
        let source = frame.require(&c.column)?;
        let values = source
            .as_numeric()
            .ok_or_else(|| Error::Pipeline(format!("cannot scale non-numeric column `{}`", c.column)))?;
        let scaled = values.iter().map(|&x| if c.sigma == 0.0 { 0.0 } else { (x - c.mu) / c.sigma }).collect();
        out = out.with_column(Column { schema: source.schema.clone(), data: ColumnData::Numeric(scaled) })?;
    }
    Ok(out)
}
