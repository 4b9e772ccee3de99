use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Encoding;
use crate::data::{ColumnData, DType, TabularFrame};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EncodedColumn {
    Numeric {
        column: String,
    },
    /// `levels.len()` indicator columns, no reference level dropped.
    OneHot {
        column: String,
        levels: Vec<String>,
    },
    /// Integer `1..=K` following the declared order.
    Ordinal {
        column: String,
        levels: Vec<String>,
    },
}

impl EncodedColumn {
    pub fn source(&self) -> &str {
        match self {
            EncodedColumn::Numeric { column }
            | EncodedColumn::OneHot { column, .. }
            | EncodedColumn::Ordinal { column, .. } => column,
        }
    }

    fn output_names(&self) -> Vec<String> {
        match self {
            EncodedColumn::Numeric { column } | EncodedColumn::Ordinal { column, .. } => vec![column.clone()],
            EncodedColumn::OneHot { column, levels } => levels.iter().map(|l| format!("{column}={l}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub columns: Vec<EncodedColumn>,
}

impl EncoderSpec {
    pub fn output_names(&self) -> Vec<String> {
        self.columns.iter().flat_map(EncodedColumn::output_names).collect()
    }
}

/// Chooses an encoding per feature column. Unordered categorical columns
/// are one-hot whatever the option; ordered ones (including binned numeric
/// columns) follow `option`. Category sets come from the frame's frozen
/// levels, so groups absent from the training rows still get a column.
pub fn fit_encoder(train: &TabularFrame, features: &[String], option: Encoding) -> Result<EncoderSpec> {
    let columns = features
        .iter()
        .map(|name| {
            let col = train.require(name)?;
            Ok(match (&col.data, col.schema.dtype) {
                (ColumnData::Numeric(_), _) => EncodedColumn::Numeric { column: name.clone() },
                (ColumnData::Categorical { levels, .. }, DType::Ordinal) if option == Encoding::Ordinal => {
                    EncodedColumn::Ordinal { column: name.clone(), levels: levels.clone() }
                }
                (ColumnData::Categorical { levels, .. }, _) => {
                    EncodedColumn::OneHot { column: name.clone(), levels: levels.clone() }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncoderSpec { columns })
}

pub fn apply_encoder(spec: &EncoderSpec, frame: &TabularFrame) -> Result<FeatureMatrix> {
    let n = frame.n_rows();
    let names = spec.output_names();
    let p = names.len();
    let mut data = vec![0.0; n * p];
    let mut offset = 0;
    for enc in &spec.columns {
        let col = frame.require(enc.source())?;
        match enc {
            EncodedColumn::Numeric { column } => {
                let values = col
                    .as_numeric()
                    .ok_or_else(|| Error::Pipeline(format!("column `{column}` is no longer numeric")))?;
                for (i, &v) in values.iter().enumerate() {
                    data[i * p + offset] = v;
                }
                offset += 1;
            }
            EncodedColumn::OneHot { column, levels } | EncodedColumn::Ordinal { column, levels } => {
                let (frame_levels, codes) = col
                    .as_categorical()
                    .ok_or_else(|| Error::Pipeline(format!("column `{column}` is not categorical")))?;
                let index: HashMap<&str, usize> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
                let remap = frame_levels.iter().map(|l| index.get(l.as_str()).copied()).collect::<Vec<_>>();
                let one_hot = matches!(enc, EncodedColumn::OneHot { .. });
                for (i, &c) in codes.iter().enumerate() {
                    let level = remap[c as usize].ok_or_else(|| {
                        Error::Pipeline(format!(
                            "category `{}` of column `{column}` was not seen when fitting",
                            frame_levels[c as usize]
                        ))
                    })?;
                    if one_hot {
                        data[i * p + offset + level] = 1.0;
                    } else {
                        data[i * p + offset] = (level + 1) as f64;
                    }
                }
                offset += if one_hot { levels.len() } else { 1 };
            }
        }
    }
    FeatureMatrix::new(names, n, data)
}
