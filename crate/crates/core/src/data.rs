//! Tabular data with typed, role-tagged columns.
//!
//! Category sets are frozen when a frame is built and survive filtering, so
//! a group that exists in the data but has no rows in a subset is still
//! enumerated downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Numeric,
    Categorical,
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Feature,
    Target,
    Protected,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub dtype: DType,
    pub role: Role,
    /// Category order, required for ordinal columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("schema {}: {e}", path.display())))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Data(format!("duplicate column `{}` in schema", c.name)));
            }
            if c.dtype == DType::Ordinal && c.order.as_ref().is_none_or(|o| o.is_empty()) {
                return Err(Error::Data(format!("ordinal column `{}` needs an order", c.name)));
            }
        }
        let targets: Vec<_> = self.columns.iter().filter(|c| c.role == Role::Target).collect();
        if targets.len() != 1 {
            return Err(Error::Data(format!("expected one target column, found {}", targets.len())));
        }
        if targets[0].dtype != DType::Numeric {
            return Err(Error::Data("target column must be numeric 0/1".into()));
        }
        let protected: Vec<_> = self.columns.iter().filter(|c| c.role == Role::Protected).collect();
        if protected.len() != 1 {
            return Err(Error::Data(format!("expected one protected column, found {}", protected.len())));
        }
        if protected[0].dtype != DType::Categorical {
            return Err(Error::Data("protected column must be categorical".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// Codes index into `levels`. For ordinal columns `levels` is the
    /// declared order; for categorical columns the sorted observed set.
    Categorical {
        levels: Vec<String>,
        codes: Vec<u32>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => {
                ColumnData::Categorical { levels: levels.clone(), codes: rows.iter().map(|&r| codes[r]).collect() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub schema: ColumnSchema,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: &str, role: Role, values: Vec<f64>) -> Column {
        Column {
            schema: ColumnSchema { name: name.into(), dtype: DType::Numeric, role, order: None },
            data: ColumnData::Numeric(values),
        }
    }

    /// Categorical column whose category set is the sorted set of `values`.
    pub fn categorical<S: AsRef<str>>(name: &str, role: Role, values: &[S]) -> Column {
        let levels: Vec<String> =
            values.iter().map(|v| v.as_ref().to_string()).collect::<BTreeSet<_>>().into_iter().collect();
        Self::with_levels(name, role, DType::Categorical, levels, values).expect("levels cover values")
    }

    /// Categorical column with an explicit (frozen) category set.
    pub fn categorical_with_levels<S: AsRef<str>>(
        name: &str,
        role: Role,
        levels: Vec<String>,
        values: &[S],
    ) -> Result<Column> {
        Self::with_levels(name, role, DType::Categorical, levels, values)
    }

    pub fn ordinal<S: AsRef<str>>(name: &str, role: Role, order: Vec<String>, values: &[S]) -> Result<Column> {
        Self::with_levels(name, role, DType::Ordinal, order, values)
    }

    fn with_levels<S: AsRef<str>>(
        name: &str,
        role: Role,
        dtype: DType,
        levels: Vec<String>,
        values: &[S],
    ) -> Result<Column> {
        let index: HashMap<&str, u32> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let codes = values
            .iter()
            .map(|v| {
                index
                    .get(v.as_ref())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("unknown category `{}` in column `{name}`", v.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        let order = (dtype == DType::Ordinal).then(|| levels.clone());
        Ok(Column {
            schema: ColumnSchema { name: name.into(), dtype, role, order },
            data: ColumnData::Categorical { levels, codes },
        })
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    pub fn as_categorical(&self) -> Option<(&[String], &[u32])> {
        match &self.data {
            ColumnData::Categorical { levels, codes } => Some((levels, codes)),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Textual value of row `row`, as written to CSV.
    pub fn value_string(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
        }
    }
}

/// Rectangular dataset with exactly one binary target and one categorical
/// protected column.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularFrame {
    columns: Vec<Column>,
    n_rows: usize,
}

impl TabularFrame {
    pub fn new(columns: Vec<Column>) -> Result<TabularFrame> {
        let n_rows = columns.first().map(|c| c.data.len()).unwrap_or(0);
        if let Some(c) = columns.iter().find(|c| c.data.len() != n_rows) {
            return Err(Error::Data(format!("column `{}` has a different length", c.name())));
        }
        let schema = Schema { columns: columns.iter().map(|c| c.schema.clone()).collect() };
        schema.validate()?;
        let frame = TabularFrame { columns, n_rows };
        let target = frame.column(frame.target_name()).expect("validated");
        if let Some(v) = target.as_numeric() {
            if v.iter().any(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::Data("target not binary".into()));
            }
        }
        Ok(frame)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schema(&self) -> Schema {
        Schema { columns: self.columns.iter().map(|c| c.schema.clone()).collect() }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name).ok_or_else(|| Error::Data(format!("column `{name}` not found")))
    }

    pub fn target_name(&self) -> &str {
        self.columns.iter().find(|c| c.schema.role == Role::Target).map(Column::name).expect("frame has a target")
    }

    pub fn protected_name(&self) -> &str {
        self.columns
            .iter()
            .find(|c| c.schema.role == Role::Protected)
            .map(Column::name)
            .expect("frame has a protected column")
    }

    /// Target labels as 0/1.
    pub fn target(&self) -> Vec<u8> {
        let col = self.column(self.target_name()).expect("target");
        col.as_numeric().expect("numeric target").iter().map(|&y| y as u8).collect()
    }

    /// Protected-group codes and the frozen group names.
    pub fn groups(&self) -> (&[String], &[u32]) {
        self.column(self.protected_name()).and_then(Column::as_categorical).expect("categorical protected column")
    }

    /// New frame with the given rows, in the given order.
    pub fn take(&self, rows: &[usize]) -> TabularFrame {
        TabularFrame {
            columns: self
                .columns
                .iter()
                .map(|c| Column { schema: c.schema.clone(), data: c.data.take(rows) })
                .collect(),
            n_rows: rows.len(),
        }
    }

    /// Replaces (or appends) a column of the same length.
    pub fn with_column(&self, column: Column) -> Result<TabularFrame> {
        if column.data.len() != self.n_rows {
            return Err(Error::Data(format!("column `{}` has a different length", column.name())));
        }
        let mut columns = self.columns.clone();
        match columns.iter_mut().find(|c| c.name() == column.name()) {
            Some(slot) => *slot = column,
            None => columns.push(column),
        }
        TabularFrame::new(columns)
    }

    pub fn filter_rows(&self, predicates: &[RowPredicate]) -> Result<TabularFrame> {
        Ok(self.take(&self.matching_rows(predicates)?))
    }

    /// Indices of rows satisfying every predicate.
    pub fn matching_rows(&self, predicates: &[RowPredicate]) -> Result<Vec<usize>> {
        let compiled = predicates.iter().map(|p| p.compile(self)).collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows).filter(|&r| compiled.iter().all(|p| p.matches(r))).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(self.columns.iter().map(Column::name))?;
        for row in 0..self.n_rows {
            writer.write_record(self.columns.iter().map(|c| c.value_string(row)))?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn parse_decimal(text: &str) -> Option<f64> {
    let body = text.strip_prefix(['-', '+']).unwrap_or(text);
    let mut digits = 0;
    let mut dots = 0;
    for ch in body.chars() {
        match ch {
            '0'..='9' => digits += 1,
            '.' => dots += 1,
            _ => return None,
        }
    }
    if digits == 0 || dots > 1 {
        return None;
    }
    text.parse().ok()
}

/// Loads an RFC-4180 CSV whose header names the schema's columns in any order.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<TabularFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<TabularFrame> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = reader.headers()?.clone();
    let mut positions = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let pos = header
            .iter()
            .position(|h| h == c.name)
            .ok_or_else(|| Error::Data(format!("missing column `{}`", c.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| schema.column(h).is_none()) {
        return Err(Error::Data(format!("column `{extra}` is not in the schema")));
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for (slot, &pos) in raw.iter_mut().zip(&positions) {
            let value = record.get(pos).unwrap_or("");
            if value.is_empty() {
                return Err(Error::Data(format!(
                    "missing value in column `{}` on data row {}",
                    header.get(pos).unwrap_or("?"),
                    line + 1
                )));
            }
            slot.push(value.to_string());
        }
    }

    let mut columns = Vec::with_capacity(schema.columns.len());
    for (c, values) in schema.columns.iter().zip(raw) {
        let column = match c.dtype {
            DType::Numeric => {
                let parsed = values
                    .iter()
                    .map(|v| {
                        parse_decimal(v)
                            .ok_or_else(|| Error::Data(format!("unparseable numeric `{v}` in column `{}`", c.name)))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if c.role == Role::Target && parsed.iter().any(|&y| y != 0.0 && y != 1.0) {
                    return Err(Error::Data("target not binary".into()));
                }
                Column::numeric(&c.name, c.role, parsed)
            }
            DType::Categorical => Column::categorical(&c.name, c.role, &values),
            DType::Ordinal => {
                Column::ordinal(&c.name, c.role, c.order.clone().expect("validated"), &values).map_err(|e| match e {
                    Error::Data(m) => Error::Data(m.replace("unknown category", "unknown ordinal category")),
                    other => other,
                })?
            }
        };
        columns.push(column);
    }
    TabularFrame::new(columns)
}

/// A literal compared against a column value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Test {
    Equals { value: Scalar },
    NotEquals { value: Scalar },
    InSet { values: Vec<Scalar> },
    LessThan { value: f64 },
    AtLeast { value: f64 },
}

/// One conjunct of a row filter, e.g.
/// `{"column": "age", "op": "less-than", "value": 65}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPredicate {
    pub column: String,
    #[serde(flatten)]
    pub test: Test,
}

impl RowPredicate {
    pub fn new(column: &str, test: Test) -> Self {
        RowPredicate { column: column.into(), test }
    }

    pub fn equals(column: &str, value: &str) -> Self {
        Self::new(column, Test::Equals { value: Scalar::Text(value.into()) })
    }

    pub fn not_equals(column: &str, value: &str) -> Self {
        Self::new(column, Test::NotEquals { value: Scalar::Text(value.into()) })
    }

    pub fn less_than(column: &str, value: f64) -> Self {
        Self::new(column, Test::LessThan { value })
    }

    pub fn at_least(column: &str, value: f64) -> Self {
        Self::new(column, Test::AtLeast { value })
    }

    pub fn in_set(column: &str, values: &[&str]) -> Self {
        Self::new(column, Test::InSet { values: values.iter().map(|v| Scalar::Text(v.to_string())).collect() })
    }

    fn compile<'a>(&self, frame: &'a TabularFrame) -> Result<Compiled<'a>> {
        let column = frame.require(&self.column)?;
        let incompatible =
            || Error::Data(format!("predicate {:?} is incompatible with column `{}`", self.test, self.column));
        match &column.data {
            ColumnData::Numeric(values) => {
                let number = |s: &Scalar| match s {
                    Scalar::Number(x) => Ok(*x),
                    Scalar::Text(_) => Err(incompatible()),
                };
                let (lo, hi, set, negate) = match &self.test {
                    Test::LessThan { value } => (f64::NEG_INFINITY, *value, None, false),
                    Test::AtLeast { value } => (*value, f64::INFINITY, None, false),
                    Test::Equals { value } => (f64::NAN, f64::NAN, Some(vec![number(value)?]), false),
                    Test::NotEquals { value } => (f64::NAN, f64::NAN, Some(vec![number(value)?]), true),
                    Test::InSet { values } => {
                        (f64::NAN, f64::NAN, Some(values.iter().map(number).collect::<Result<Vec<_>>>()?), false)
                    }
                };
                Ok(Compiled::Numeric { values, lo, hi, set, negate })
            }
            ColumnData::Categorical { levels, codes } => {
                let code = |s: &Scalar| match s {
                    Scalar::Text(t) => levels
                        .iter()
                        .position(|l| l == t)
                        .map(|i| i as u32)
                        .ok_or_else(|| Error::Data(format!("unknown category `{t}` in column `{}`", self.column))),
                    Scalar::Number(_) => Err(incompatible()),
                };
                let mut allowed = vec![false; levels.len()];
                match &self.test {
                    Test::Equals { value } => allowed[code(value)? as usize] = true,
                    Test::NotEquals { value } => {
                        allowed.iter_mut().for_each(|a| *a = true);
                        allowed[code(value)? as usize] = false;
                    }
                    Test::InSet { values } => {
                        for v in values {
                            allowed[code(v)? as usize] = true;
                        }
                    }
                    Test::LessThan { .. } | Test::AtLeast { .. } => return Err(incompatible()),
                }
                Ok(Compiled::Categorical { codes, allowed })
            }
        }
    }
}

enum Compiled<'a> {
    Numeric { values: &'a [f64], lo: f64, hi: f64, set: Option<Vec<f64>>, negate: bool },
    Categorical { codes: &'a [u32], allowed: Vec<bool> },
}

impl Compiled<'_> {
    fn matches(&self, row: usize) -> bool {
        match self {
            Compiled::Numeric { values, lo, hi, set, negate } => {
                let x = values[row];
                match set {
                    Some(set) => set.contains(&x) != *negate,
                    None => x >= *lo && x < *hi,
                }
            }
            Compiled::Categorical { codes, allowed } => allowed[codes[row] as usize],
        }
    }
}

/// Parameters of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    #[serde(default = "default_protected")]
    pub protected: String,
    #[serde(default = "default_target")]
    pub target: String,
    /// Group name -> population proportion.
    pub groups: BTreeMap<String, f64>,
    /// Group name -> probability of a positive target.
    pub base_rates: BTreeMap<String, f64>,
    pub numeric_features: Vec<NumericFeatureSpec>,
    #[serde(default)]
    pub categorical_features: Vec<CategoricalFeatureSpec>,
    pub auxiliary: Vec<AuxiliarySpec>,
}

fn default_protected() -> String {
    "race".into()
}

fn default_target() -> String {
    "target".into()
}

/// `value = mean + group_shift[g] + target_shift * y + sd * z`, clamped and
/// rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFeatureSpec {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub target_shift: f64,
    #[serde(default)]
    pub group_shift: BTreeMap<String, f64>,
    #[serde(default)]
    pub decimals: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFeatureSpec {
    pub name: String,
    pub levels: Vec<String>,
    #[serde(default)]
    pub ordered: bool,
    /// Level weights for negative rows (uniform when absent).
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Level weights for positive rows (same as `weights` when absent).
    #[serde(default)]
    pub positive_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliarySpec {
    pub name: String,
    pub levels: Vec<String>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Per-group level weights overriding `weights`.
    #[serde(default)]
    pub group_weights: BTreeMap<String, Vec<f64>>,
}

impl GeneratorSpec {
    pub fn load(path: &Path) -> Result<GeneratorSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("generator spec {}: {e}", path.display())))
    }

    /// A public-coverage-like population: three groups with different base
    /// rates, age and income features below the study's population filters,
    /// and region/county/military/citizenship columns for evaluation subsets.
    pub fn example(n: usize) -> GeneratorSpec {
        let map = |pairs: &[(&str, f64)]| -> BTreeMap<String, f64> {
            pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        };
        let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        GeneratorSpec {
            n,
            protected: "race".into(),
            target: "target".into(),
            groups: map(&[("white", 0.62), ("black", 0.24), ("other", 0.14)]),
            base_rates: map(&[("white", 0.32), ("black", 0.52), ("other", 0.44)]),
            numeric_features: vec![
                NumericFeatureSpec {
                    name: "age".into(),
                    mean: 42.0,
                    sd: 13.0,
                    min: Some(18.0),
                    max: Some(64.0),
                    target_shift: -6.0,
                    group_shift: map(&[("black", -3.0), ("other", -1.0)]),
                    decimals: Some(0),
                },
                NumericFeatureSpec {
                    name: "income".into(),
                    mean: 17500.0,
                    sd: 6500.0,
                    min: Some(0.0),
                    max: Some(29999.0),
                    target_shift: -4500.0,
                    group_shift: map(&[("black", -2500.0), ("other", -1200.0)]),
                    decimals: Some(0),
                },
                NumericFeatureSpec {
                    name: "hours".into(),
                    mean: 34.0,
                    sd: 11.0,
                    min: Some(0.0),
                    max: Some(80.0),
                    target_shift: -5.0,
                    group_shift: BTreeMap::new(),
                    decimals: Some(0),
                },
            ],
            categorical_features: vec![
                CategoricalFeatureSpec {
                    name: "sex".into(),
                    levels: strings(&["female", "male"]),
                    ordered: false,
                    weights: Some(vec![0.46, 0.54]),
                    positive_weights: Some(vec![0.58, 0.42]),
                },
                CategoricalFeatureSpec {
                    name: "education".into(),
                    levels: strings(&["less-than-hs", "high-school", "some-college", "bachelor", "graduate"]),
                    ordered: true,
                    weights: Some(vec![0.08, 0.30, 0.30, 0.22, 0.10]),
                    positive_weights: Some(vec![0.22, 0.38, 0.26, 0.10, 0.04]),
                },
                CategoricalFeatureSpec {
                    name: "marital".into(),
                    levels: strings(&["married", "never-married", "separated"]),
                    ordered: false,
                    weights: Some(vec![0.50, 0.35, 0.15]),
                    positive_weights: Some(vec![0.35, 0.42, 0.23]),
                },
            ],
            auxiliary: vec![
                AuxiliarySpec {
                    name: "region".into(),
                    levels: strings(&["north", "south", "east", "west"]),
                    weights: Some(vec![0.35, 0.25, 0.22, 0.18]),
                    group_weights: [
                        ("black".to_string(), vec![0.15, 0.45, 0.25, 0.15]),
                        ("other".to_string(), vec![0.20, 0.20, 0.20, 0.40]),
                    ]
                    .into_iter()
                    .collect(),
                },
                AuxiliarySpec {
                    name: "county".into(),
                    levels: strings(&["los-angeles", "san-francisco", "elsewhere"]),
                    weights: Some(vec![0.25, 0.08, 0.67]),
                    group_weights: BTreeMap::new(),
                },
                AuxiliarySpec {
                    name: "military".into(),
                    levels: strings(&["never", "veteran", "active"]),
                    weights: Some(vec![0.88, 0.10, 0.02]),
                    group_weights: BTreeMap::new(),
                },
                AuxiliarySpec {
                    name: "citizenship".into(),
                    levels: strings(&["citizen", "naturalized", "non-citizen"]),
                    weights: Some(vec![0.80, 0.10, 0.10]),
                    group_weights: [("other".to_string(), vec![0.55, 0.20, 0.25])].into_iter().collect(),
                },
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        let total: f64 = self.groups.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("group proportions sum to {total}, not 1")));
        }
        if self.groups.len() < 3 {
            return Err(Error::Data("generator needs at least three protected groups".into()));
        }
        if self.auxiliary.len() < 2 {
            return Err(Error::Data("generator needs at least two auxiliary columns".into()));
        }
        if self.groups.values().any(|&p| p < 0.0) {
            return Err(Error::Data("negative group proportion".into()));
        }
        for g in self.groups.keys() {
            match self.base_rates.get(g) {
                Some(r) if (0.0..=1.0).contains(r) => {}
                Some(r) => return Err(Error::Data(format!("base rate {r} for `{g}` outside [0, 1]"))),
                None => return Err(Error::Data(format!("no base rate for group `{g}`"))),
            }
        }
        let check_weights = |name: &str, levels: usize, w: &[f64]| {
            if w.len() != levels || w.iter().any(|&x| x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                Err(Error::Data(format!("bad weights for column `{name}`")))
            } else {
                Ok(())
            }
        };
        for c in &self.categorical_features {
            for w in [&c.weights, &c.positive_weights].into_iter().flatten() {
                check_weights(&c.name, c.levels.len(), w)?;
            }
        }
        for a in &self.auxiliary {
            for w in a.weights.iter().chain(a.group_weights.values()) {
                check_weights(&a.name, a.levels.len(), w)?;
            }
        }
        Ok(())
    }
}

fn draw_weighted<R: Rng>(rng: &mut R, weights: Option<&[f64]>, k: usize) -> usize {
    let u: f64 = rng.random();
    match weights {
        None => ((u * k as f64) as usize).min(k - 1),
        Some(w) => {
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            for (i, wi) in w.iter().enumerate() {
                acc += wi / total;
                if u < acc {
                    return i;
                }
            }
            k - 1
        }
    }
}

/// Draws a synthetic frame; a pure function of `(spec, seed)`.
pub fn synthesize(spec: &GeneratorSpec, seed: u64) -> Result<TabularFrame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group_names: Vec<String> = spec.groups.keys().cloned().collect();
    let proportions: Vec<f64> = spec.groups.values().copied().collect();

    let mut groups = Vec::with_capacity(spec.n);
    let mut target = Vec::with_capacity(spec.n);
    let mut numeric: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.n); spec.numeric_features.len()];
    let mut categorical: Vec<Vec<&str>> = vec![Vec::with_capacity(spec.n); spec.categorical_features.len()];
    let mut auxiliary: Vec<Vec<&str>> = vec![Vec::with_capacity(spec.n); spec.auxiliary.len()];

    for _ in 0..spec.n {
        let g = draw_weighted(&mut rng, Some(&proportions), proportions.len());
        let name = &group_names[g];
        let y = u8::from(rng.random::<f64>() < spec.base_rates[name]);
        groups.push(name.as_str());
        target.push(f64::from(y));

        for (f, out) in spec.numeric_features.iter().zip(numeric.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            let mut x =
                f.mean + f.group_shift.get(name).copied().unwrap_or(0.0) + f.target_shift * f64::from(y) + f.sd * z;
            if let Some(lo) = f.min {
                x = x.max(lo);
            }
            if let Some(hi) = f.max {
                x = x.min(hi);
            }
            if let Some(d) = f.decimals {
                let scale = 10f64.powi(d as i32);
                x = (x * scale).round() / scale;
            }
            out.push(x + 0.0);
        }
        for (c, out) in spec.categorical_features.iter().zip(categorical.iter_mut()) {
            let w = if y == 1 { c.positive_weights.as_ref().or(c.weights.as_ref()) } else { c.weights.as_ref() };
            let level = draw_weighted(&mut rng, w.map(Vec::as_slice), c.levels.len());
            out.push(c.levels[level].as_str());
        }
        for (a, out) in spec.auxiliary.iter().zip(auxiliary.iter_mut()) {
            let w = a.group_weights.get(name).or(a.weights.as_ref());
            let level = draw_weighted(&mut rng, w.map(Vec::as_slice), a.levels.len());
            out.push(a.levels[level].as_str());
        }
    }

    let mut columns =
        vec![Column::categorical_with_levels(&spec.protected, Role::Protected, group_names.clone(), &groups)?];
    for (f, values) in spec.numeric_features.iter().zip(numeric) {
        columns.push(Column::numeric(&f.name, Role::Feature, values));
    }
    for (c, values) in spec.categorical_features.iter().zip(categorical) {
        columns.push(if c.ordered {
            Column::ordinal(&c.name, Role::Feature, c.levels.clone(), &values)?
        } else {
            Column::categorical_with_levels(&c.name, Role::Feature, sorted(&c.levels), &values)?
        });
    }
    for (a, values) in spec.auxiliary.iter().zip(auxiliary) {
        columns.push(Column::categorical_with_levels(&a.name, Role::Auxiliary, sorted(&a.levels), &values)?);
    }
    columns.push(Column::numeric(&spec.target, Role::Target, target));
    TabularFrame::new(columns)
}

fn sorted(levels: &[String]) -> Vec<String> {
    let mut v = levels.to_vec();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(text: &str) -> Schema {
        serde_json::from_str(text).unwrap()
    }

    fn small_schema() -> Schema {
        schema(
            r#"{"columns":[
                {"name":"age","dtype":"numeric","role":"feature"},
                {"name":"race","dtype":"categorical","role":"protected"},
                {"name":"target","dtype":"numeric","role":"target"}]}"#,
        )
    }

    #[test]
    fn load_small_csv() {
        let text = "age,race,target\n30,a,1\n41.5,b,0\n-2,a,1\n";
        let frame = read_csv(text.as_bytes(), &small_schema()).unwrap();
        assert_eq!(frame.n_rows(), 3);
        assert_eq!(frame.require("age").unwrap().as_numeric().unwrap(), &[30.0, 41.5, -2.0]);
        assert_eq!(frame.groups().0, &["a".to_string(), "b".to_string()]);
        assert_eq!(frame.target(), vec![1, 0, 1]);
    }

    #[test]
    fn header_order_does_not_matter() {
        let a = read_csv("age,race,target\n30,a,1\n41,b,0\n".as_bytes(), &small_schema()).unwrap();
        let b = read_csv("target,age,race\n1,30,a\n0,41,b\n".as_bytes(), &small_schema()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_errors() {
        let s = small_schema();
        let err = read_csv("age,race,target\n30,a,2\n".as_bytes(), &s).unwrap_err();
        assert!(err.to_string().contains("target not binary"));
        assert!(read_csv("age,race\n30,a\n".as_bytes(), &s).unwrap_err().to_string().contains("missing column"));
        assert!(read_csv("age,race,target\n,a,1\n".as_bytes(), &s).unwrap_err().to_string().contains("missing value"));
        for bad in ["1e3", "1,000", "NaN", "inf", "3.1.4", "-"] {
            let text = format!("age,race,target\n\"{bad}\",a,1\n");
            assert!(read_csv(text.as_bytes(), &s).unwrap_err().to_string().contains("unparseable"), "{bad}");
        }
        let ordinal = schema(
            r#"{"columns":[
                {"name":"edu","dtype":"ordinal","role":"feature","order":["lo","hi"]},
                {"name":"race","dtype":"categorical","role":"protected"},
                {"name":"target","dtype":"numeric","role":"target"}]}"#,
        );
        let err = read_csv("edu,race,target\nmid,a,1\n".as_bytes(), &ordinal).unwrap_err();
        assert!(err.to_string().contains("unknown ordinal category"));
    }

    fn five_rows() -> TabularFrame {
        TabularFrame::new(vec![
            Column::numeric("age", Role::Feature, vec![30.0, 70.0, 40.0, 64.0, 20.0]),
            Column::numeric("income", Role::Feature, vec![25000.0, 10000.0, 45000.0, 29999.0, 30000.0]),
            Column::categorical("race", Role::Protected, &["a", "b", "a", "c", "b"]),
            Column::numeric("target", Role::Target, vec![1.0, 0.0, 1.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn filter_population() {
        let frame = five_rows();
        let preds = vec![RowPredicate::less_than("age", 65.0), RowPredicate::less_than("income", 30000.0)];
        let kept = frame.filter_rows(&preds).unwrap();
        // rows 0 (30, 25000) and 3 (64, 29999) qualify
        assert_eq!(kept.n_rows(), 2);
        assert_eq!(kept.require("age").unwrap().as_numeric().unwrap(), &[30.0, 64.0]);
        assert_eq!(kept.groups().0, frame.groups().0);
        assert_eq!(kept.filter_rows(&preds).unwrap(), kept);
    }

    #[test]
    fn filter_identity_and_empty() {
        let frame = five_rows();
        assert_eq!(frame.filter_rows(&[]).unwrap(), frame);
        let none = frame.filter_rows(&[RowPredicate::at_least("age", 1000.0)]).unwrap();
        assert_eq!(none.n_rows(), 0);
        assert_eq!(none.groups().0.len(), 3);
    }

    #[test]
    fn filter_categorical_ops() {
        let frame = five_rows();
        assert_eq!(frame.matching_rows(&[RowPredicate::equals("race", "b")]).unwrap(), vec![1, 4]);
        assert_eq!(frame.matching_rows(&[RowPredicate::not_equals("race", "a")]).unwrap(), vec![1, 3, 4]);
        assert_eq!(frame.matching_rows(&[RowPredicate::in_set("race", &["a", "c"])]).unwrap(), vec![0, 2, 3]);
        assert!(frame.filter_rows(&[RowPredicate::less_than("race", 1.0)]).is_err());
        assert!(frame.filter_rows(&[RowPredicate::equals("age", "x")]).is_err());
        assert!(frame.filter_rows(&[RowPredicate::equals("race", "zzz")]).is_err());
        assert!(frame.filter_rows(&[RowPredicate::equals("nope", "a")]).is_err());
    }

    #[test]
    fn predicate_json_shape() {
        let p: RowPredicate = serde_json::from_str(r#"{"column":"age","op":"less-than","value":65}"#).unwrap();
        assert_eq!(p, RowPredicate::less_than("age", 65.0));
        let q: RowPredicate =
            serde_json::from_str(r#"{"column":"region","op":"in-set","values":["north","east"]}"#).unwrap();
        assert_eq!(q, RowPredicate::in_set("region", &["north", "east"]));
    }

    #[test]
    fn synthesize_group_proportions() {
        let mut spec = GeneratorSpec::example(10_000);
        spec.groups = [("a", 0.6), ("b", 0.3), ("c", 0.1)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        spec.base_rates = [("a", 0.5), ("b", 0.5), ("c", 0.5)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for a in &mut spec.auxiliary {
            a.group_weights.clear();
        }
        for f in &mut spec.numeric_features {
            f.group_shift.clear();
        }
        let frame = synthesize(&spec, 42).unwrap();
        let (levels, codes) = frame.groups();
        assert_eq!(levels, &["a", "b", "c"]);
        let mut counts = [0usize; 3];
        for &c in codes {
            counts[c as usize] += 1;
        }
        // 3 / sqrt(n) in proportion terms is 300 rows at n = 10000.
        for (got, want) in counts.iter().zip([6000.0, 3000.0, 1000.0]) {
            assert!((*got as f64 - want).abs() <= 300.0, "{counts:?}");
        }
        let rate = frame.target().iter().map(|&y| f64::from(y)).sum::<f64>() / 10_000.0;
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn synthesize_is_deterministic() {
        let spec = GeneratorSpec::example(500);
        let a = synthesize(&spec, 9).unwrap();
        let b = synthesize(&spec, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthesize(&spec, 10).unwrap());
    }

    #[test]
    fn synthesize_rejects_bad_proportions() {
        let mut spec = GeneratorSpec::example(10);
        spec.groups.insert("white".into(), 0.7);
        assert!(synthesize(&spec, 0).unwrap_err().to_string().contains("sum"));
    }

    #[test]
    fn csv_round_trip() {
        let frame = synthesize(&GeneratorSpec::example(300), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        frame.write_csv(&path).unwrap();
        let back = load_csv(&path, &frame.schema()).unwrap();
        assert_eq!(back, frame);
    }
}
