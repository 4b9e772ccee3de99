use serde::{Deserialize, Serialize};

use crate::data::{Column, TabularFrame};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinMode {
    FixedWidth(f64),
    Quantile(usize),
}

/// Cut points fitted on training data. Bin `i` is `[edges[i-1], edges[i])`;
/// values beyond the fitted range fall into the first or last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub column: String,
    pub mode: BinMode,
    pub edges: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BinningSpec {
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin_of(&self, x: f64) -> usize {
        self.edges.partition_point(|&e| e <= x)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_bins()).map(|i| format!("bin-{i}")).collect()
    }
}

/// Fits cut points on the training values of `column`.
///
/// Fixed width: interior multiples of the width between the bin holding
/// the training minimum and the bin holding the maximum. Quantile: the
/// interpolated `i/k` quantiles, deduplicated, dropping any at or below the
/// training minimum (those would only open an empty first bin).
pub fn fit_binning(train: &TabularFrame, column: &str, mode: BinMode) -> Result<BinningSpec> {
    let values = train
        .require(column)?
        .as_numeric()
        .ok_or_else(|| Error::Pipeline(format!("cannot bin non-numeric column `{column}`")))?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges = Vec::new();
    if let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) {
        match mode {
            BinMode::FixedWidth(width) => {
                if !(width > 0.0) {
                    return Err(Error::Pipeline(format!("bin width {width} must be positive")));
                }
                let first = (lo / width).floor() as i64;
                let last = (hi / width).floor() as i64;
                edges.extend((first + 1..=last).map(|k| k as f64 * width));
            }
            BinMode::Quantile(k) => {
                if k < 2 {
                    return Err(Error::Pipeline(format!("need at least two quantile bins, got {k}")));
                }
                for i in 1..k {
                    let e = stats::quantile_sorted(&sorted, i as f64 / k as f64);
                    if e > lo && edges.last().is_none_or(|&last| e > last) {
                        edges.push(e);
                    }
                }
            }
        }
    }
    let mut warnings = Vec::new();
    if edges.is_empty() {
        warnings.push(format!("column `{column}` is constant in training data; single bin"));
    }
    Ok(BinningSpec { column: column.to_string(), mode, edges, warnings })
}

/// Replaces the numeric column with an ordinal column of bin labels.
pub fn apply_binning(spec: &BinningSpec, frame: &TabularFrame) -> Result<TabularFrame> {
    let source = frame.require(&spec.column)?;
    let values = source
        .as_numeric()
        .ok_or_else(|| Error::Pipeline(format!("cannot bin non-numeric column `{}`", spec.column)))?;
    let labels = spec.labels();
    let binned: Vec<&str> = values.iter().map(|&x| labels[spec.bin_of(x)].as_str()).collect();
    let column = Column::ordinal(&spec.column, source.schema.role, labels.clone(), &binned)?;
    frame.with_column(column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Role;

    fn frame(values: Vec<f64>) -> TabularFrame {
        let n = values.len();
        TabularFrame::new(vec![
            Column::numeric("age", Role::Feature, values),
            Column::categorical("g", Role::Protected, &vec!["a"; n]),
            Column::numeric("y", Role::Target, vec![0.0; n]),
        ])
        .unwrap()
    }

    fn codes(frame: &TabularFrame) -> Vec<u32> {
        frame.require("age").unwrap().as_categorical().unwrap().1.to_vec()
    }

    #[test]
    fn fixed_width_bins() {
        let train = frame(vec![5.0, 15.0, 25.0]);
        let spec = fit_binning(&train, "age", BinMode::FixedWidth(10.0)).unwrap();
        assert_eq!(spec.edges, vec![10.0, 20.0]);
        let binned = apply_binning(&spec, &train).unwrap();
        assert_eq!(codes(&binned), vec![0, 1, 2]);
        // half-open intervals, clamping outside the training range
        let probe = frame(vec![-3.0, 10.0, 19.999, 20.0, 99.0]);
        assert_eq!(codes(&apply_binning(&spec, &probe).unwrap()), vec![0, 1, 1, 2, 2]);
        assert_eq!(binned.require("age").unwrap().schema.dtype, crate::data::DType::Ordinal);
    }

    #[test]
    fn quantile_bins_are_balanced() {
        let train = frame((1..=100).map(f64::from).collect());
        let spec = fit_binning(&train, "age", BinMode::Quantile(4)).unwrap();
        assert_eq!(spec.edges.len(), 3);
        for (got, want) in spec.edges.iter().zip([25.75, 50.5, 75.25]) {
            assert!((got - want).abs() < 1e-12);
        }
        let binned = codes(&apply_binning(&spec, &train).unwrap());
        let mut counts = [0; 4];
        for c in binned {
            counts[c as usize] += 1;
        }
        assert_eq!(counts, [25, 25, 25, 25]);
    }

    #[test]
    fn constant_column_gives_single_bin() {
        let train = frame(vec![7.0; 12]);
        for mode in [BinMode::Quantile(3), BinMode::FixedWidth(10.0)] {
            let spec = fit_binning(&train, "age", mode).unwrap();
            assert_eq!(spec.n_bins(), 1);
            assert_eq!(spec.warnings.len(), 1);
            assert!(codes(&apply_binning(&spec, &train).unwrap()).iter().all(|&c| c == 0));
        }
    }

    #[test]
    fn tied_quantiles_collapse() {
        let mut values = vec![0.0; 50];
        values.extend((1..=50).map(f64::from));
        let spec = fit_binning(&frame(values), "age", BinMode::Quantile(4)).unwrap();
        // the 0.25 quantile equals the minimum and is dropped
        assert_eq!(spec.edges.len(), 2);
        assert!(spec.edges.windows(2).all(|w| w[0] < w[1]));
    }
}
