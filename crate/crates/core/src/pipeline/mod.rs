//! Interpretation of design-decision option tokens as data transformations.
//!
//! Every `fit_*` function reads the training partition only and returns an
//! immutable spec; `apply_*` functions take the spec by reference and return
//! new frames, so test data can never influence a fitted transformation.

mod binning;
mod cutoff;
mod encode;
mod features;
mod scale;
mod split;

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision_space::presets;
use crate::error::{Error, Result};
use crate::models::ModelKind;

pub use binning::{apply_binning, fit_binning, BinMode, BinningSpec};
pub use cutoff::{apply_cutoff, cutoff_threshold, predict_with_threshold};
pub use encode::{apply_encoder, fit_encoder, EncodedColumn, EncoderSpec};
pub use features::{exclude_features, exclude_subgroups, SubgroupExclusion};
pub use scale::{apply_scaler, fit_scaler, ScalerParams};
pub use split::{split, split_frame, Split};

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self { $($name::$variant => $token),+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err(Error::Pipeline(format!(
                        concat!("unknown ", stringify!($name), " option `{}`"), other
                    ))),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

token_enum!(ExcludeFeatures {
    None => "none",
    Race => "race",
    Sex => "sex",
    RaceSex => "race-sex",
});

token_enum!(ExcludeSubgroups {
    KeepAll => "keep-all",
    DropSmallest1 => "drop-smallest-1",
    DropSmallest2 => "drop-smallest-2",
    KeepLargest2 => "keep-largest-2",
    DropOther => "drop-other",
});

token_enum!(Scale {
    DoNotScale => "do-not-scale",
    Scale => "scale",
});

token_enum!(PreprocessAge {
    None => "none",
    Bins10 => "bins-10",
    Quantiles3 => "quantiles-3",
    Quantiles4 => "quantiles-4",
});

token_enum!(PreprocessIncome {
    None => "none",
    Bins10000 => "bins-10000",
    Quantiles3 => "quantiles-3",
    Quantiles4 => "quantiles-4",
});

token_enum!(Encoding {
    OneHot => "one-hot",
    Ordinal => "ordinal",
});

token_enum!(Stratify {
    None => "none",
    Target => "target",
    ProtectedAttribute => "protected-attribute",
    Both => "both",
});

token_enum!(Cutoff {
    Raw05 => "raw-0.5",
    Quantile10 => "quantile-0.1",
    Quantile25 => "quantile-0.25",
});

impl PreprocessAge {
    pub fn bin_mode(self) -> Option<BinMode> {
        match self {
            PreprocessAge::None => None,
            PreprocessAge::Bins10 => Some(BinMode::FixedWidth(10.0)),
            PreprocessAge::Quantiles3 => Some(BinMode::Quantile(3)),
            PreprocessAge::Quantiles4 => Some(BinMode::Quantile(4)),
        }
    }
}

impl PreprocessIncome {
    pub fn bin_mode(self) -> Option<BinMode> {
        match self {
            PreprocessIncome::None => None,
            PreprocessIncome::Bins10000 => Some(BinMode::FixedWidth(10_000.0)),
            PreprocessIncome::Quantiles3 => Some(BinMode::Quantile(3)),
            PreprocessIncome::Quantiles4 => Some(BinMode::Quantile(4)),
        }
    }
}

impl Cutoff {
    /// `None` for the fixed 0.5 threshold, else the quantile of scores
    /// below which rows are predicted negative.
    pub fn quantile(self) -> Option<f64> {
        match self {
            Cutoff::Raw05 => None,
            Cutoff::Quantile10 => Some(0.1),
            Cutoff::Quantile25 => Some(0.25),
        }
    }
}

/// Semantic names bound to dataset columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnBindings {
    /// Column excluded by the `race` options; defaults to the protected column.
    #[serde(default)]
    pub race: Option<String>,
    #[serde(default)]
    pub sex: Option<String>,
    #[serde(default = "default_age")]
    pub age: String,
    #[serde(default = "default_income")]
    pub income: String,
    /// Protected category removed by `drop-other`.
    #[serde(default)]
    pub drop_other_category: Option<String>,
}

fn default_age() -> String {
    "age".into()
}

fn default_income() -> String {
    "income".into()
}

impl Default for ColumnBindings {
    fn default() -> Self {
        ColumnBindings {
            race: None,
            sex: Some("sex".into()),
            age: default_age(),
            income: default_income(),
            drop_other_category: Some("other".into()),
        }
    }
}

/// One universe's design options, interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub exclude_features: ExcludeFeatures,
    pub exclude_subgroups: ExcludeSubgroups,
    pub scale: Scale,
    pub preprocess_age: PreprocessAge,
    pub preprocess_income: PreprocessIncome,
    pub encode_categorical: Encoding,
    pub model: ModelKind,
    pub stratify_split: Stratify,
    pub cutoff: Cutoff,
    pub test_fraction: f64,
}

pub const DEFAULT_TEST_FRACTION: f64 = 0.3;

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            exclude_features: ExcludeFeatures::None,
            exclude_subgroups: ExcludeSubgroups::KeepAll,
            scale: Scale::DoNotScale,
            preprocess_age: PreprocessAge::None,
            preprocess_income: PreprocessIncome::None,
            encode_categorical: Encoding::OneHot,
            model: ModelKind::Logreg,
            stratify_split: Stratify::None,
            cutoff: Cutoff::Raw05,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

impl PipelineConfig {
    /// Builds a config from `fixed` defaults overridden by a universe's
    /// assignments. Unknown decision names are rejected.
    pub fn from_options(
        assignments: &BTreeMap<String, String>,
        fixed: &BTreeMap<String, String>,
        test_fraction: f64,
    ) -> Result<PipelineConfig> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Pipeline(format!("test fraction {test_fraction} outside (0, 1)")));
        }
        let mut config = PipelineConfig { test_fraction, ..Default::default() };
        for (name, token) in fixed.iter().chain(assignments) {
            config.set(name, token)?;
        }
        Ok(config)
    }

    pub fn set(&mut self, decision: &str, token: &str) -> Result<()> {
        match decision {
            presets::EXCLUDE_FEATURES => self.exclude_features = token.parse()?,
            presets::EXCLUDE_SUBGROUPS => self.exclude_subgroups = token.parse()?,
            presets::SCALE => self.scale = token.parse()?,
            presets::PREPROCESS_AGE => self.preprocess_age = token.parse()?,
            presets::PREPROCESS_INCOME => self.preprocess_income = token.parse()?,
            presets::ENCODE_CATEGORICAL => self.encode_categorical = token.parse()?,
            presets::MODEL => self.model = token.parse()?,
            presets::STRATIFY_SPLIT => self.stratify_split = token.parse()?,
            presets::CUTOFF => self.cutoff = token.parse()?,
            other => return Err(Error::Pipeline(format!("unknown design decision `{other}`"))),
        }
        Ok(())
    }
}

/// Checks that every option of every decision in a design space is
/// interpretable by the pipeline.
pub fn validate_design_space(space: &crate::decision_space::DecisionSpace) -> Result<()> {
    let mut probe = PipelineConfig::default();
    for d in space.decisions() {
        for o in &d.options {
            probe.set(&d.name, o)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for c in Cutoff::ALL {
            assert_eq!(c.token().parse::<Cutoff>().unwrap(), *c);
        }
        assert!("quantile-0.5".parse::<Cutoff>().is_err());
        assert_eq!(serde_json::to_string(&Stratify::ProtectedAttribute).unwrap(), "\"protected-attribute\"");
    }

    #[test]
    fn config_from_options() {
        let fixed: BTreeMap<String, String> = [("scale".to_string(), "scale".to_string())].into();
        let opts: BTreeMap<String, String> =
            [("model".to_string(), "gbm".to_string()), ("cutoff".to_string(), "quantile-0.25".to_string())].into();
        let c = PipelineConfig::from_options(&opts, &fixed, 0.3).unwrap();
        assert_eq!(c.model, ModelKind::Gbm);
        assert_eq!(c.cutoff, Cutoff::Quantile25);
        assert_eq!(c.scale, Scale::Scale);
        assert_eq!(c.stratify_split, Stratify::None);

        let bad: BTreeMap<String, String> = [("colour".to_string(), "red".to_string())].into();
        assert!(PipelineConfig::from_options(&bad, &BTreeMap::new(), 0.3).is_err());
        assert!(PipelineConfig::from_options(&opts, &fixed, 1.0).is_err());
    }

    #[test]
    fn preset_space_is_interpretable() {
        validate_design_space(&presets::design_space()).unwrap();
    }
}
