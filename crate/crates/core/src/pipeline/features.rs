use serde::{Deserialize, Serialize};

use super::{ColumnBindings, ExcludeFeatures, ExcludeSubgroups};
use crate::data::{Role, TabularFrame};
use crate::error::{Error, Result};

/// Model input columns after dropping the excluded ones.
///
/// Inputs are the feature and protected columns, in frame order. The
/// protected column stays in the frame for evaluation whatever is excluded.
pub fn exclude_features(
    frame: &TabularFrame,
    option: ExcludeFeatures,
    bindings: &ColumnBindings,
) -> Result<Vec<String>> {
    let race = bindings.race.clone().unwrap_or_else(|| frame.protected_name().to_string());
    let bound = |name: Option<&String>, what: &str| -> Result<String> {
        let name = name.ok_or_else(|| Error::Pipeline(format!("no column bound to `{what}`")))?;
        frame
            .column(name)
            .map(|c| c.name().to_string())
            .ok_or_else(|| Error::Pipeline(format!("bound `{what}` column `{name}` is missing")))
    };
    let excluded: Vec<String> = match option {
        ExcludeFeatures::None => vec![],
        ExcludeFeatures::Race => vec![bound(Some(&race), "race")?],
        ExcludeFeatures::Sex => vec![bound(bindings.sex.as_ref(), "sex")?],
        ExcludeFeatures::RaceSex => vec![bound(Some(&race), "race")?, bound(bindings.sex.as_ref(), "sex")?],
    };
    Ok(frame
        .columns()
        .iter()
        .filter(|c| matches!(c.schema.role, Role::Feature | Role::Protected))
        .map(|c| c.name().to_string())
        .filter(|n| !excluded.contains(n))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupExclusion {
    pub dropped_groups: Vec<String>,
    pub dropped_fraction: f64,
}

/// Removes protected groups from a training frame by their size in it.
///
/// Only groups with at least one training row take part in the size
/// ranking; ties are broken by group name ascending.
pub fn exclude_subgroups(
    train: &TabularFrame,
    option: ExcludeSubgroups,
    drop_other: Option<&str>,
) -> Result<(TabularFrame, SubgroupExclusion)> {
    let (levels, codes) = train.groups();
    let mut counts = vec![0usize; levels.len()];
    for &c in codes {
        counts[c as usize] += 1;
    }
    let present: Vec<usize> = (0..levels.len()).filter(|&g| counts[g] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Pipeline(format!(
            "protected column needs at least two groups, training data has {}",
            present.len()
        )));
    }
    let mut ascending = present.clone();
    ascending.sort_by(|&a, &b| counts[a].cmp(&counts[b]).then_with(|| levels[a].cmp(&levels[b])));
    let mut descending = present.clone();
    descending.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then_with(|| levels[a].cmp(&levels[b])));

    let dropped: Vec<usize> = match option {
        ExcludeSubgroups::KeepAll => vec![],
        ExcludeSubgroups::DropSmallest1 => ascending[..1].to_vec(),
        ExcludeSubgroups::DropSmallest2 => ascending[..2.min(ascending.len())].to_vec(),
        ExcludeSubgroups::KeepLargest2 => descending[2.min(descending.len())..].to_vec(),
        ExcludeSubgroups::DropOther => {
            let name = drop_other.ok_or_else(|| Error::Pipeline("no category bound for `drop-other`".into()))?;
            let g = levels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::Pipeline(format!("`drop-other` category `{name}` is not a protected group")))?;
            vec![g]
        }
    };

    let remaining_groups = present.iter().filter(|g| !dropped.contains(g)).count();
    let keep: Vec<usize> = (0..train.n_rows()).filter(|&r| !dropped.contains(&(codes[r] as usize))).collect();
    if remaining_groups < 2 {
        return Err(Error::Pipeline(format!("`{option}` would leave fewer than two groups")));
    }
    if keep.len() < 10 {
        return Err(Error::Pipeline(format!("`{option}` would leave {} training rows", keep.len())));
    }
    let mut dropped_groups: Vec<String> = dropped.iter().map(|&g| levels[g].clone()).collect();
    dropped_groups.sort();
    let dropped_fraction =
        if train.n_rows() == 0 { 0.0 } else { (train.n_rows() - keep.len()) as f64 / train.n_rows() as f64 };
    Ok((train.take(&keep), SubgroupExclusion { dropped_groups, dropped_fraction }))
}
