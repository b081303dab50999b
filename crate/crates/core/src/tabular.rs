//! Data model, CSV ingestion, schema-driven encoding, stratified splitting and
//! per-class summary statistics.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed;

/// Literal marking a missing cell in numeric columns.
pub const MISSING_MARKER: &str = "N/A";

/// Canonical index of the age feature in the stroke schema.
pub const AGE_INDEX: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Ordinal,
    Nominal,
}

impl FeatureKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, FeatureKind::Numeric)
    }
}

/// What to do with a category string absent from the encoding map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnmappedPolicy {
    Reject,
    /// Map to the most frequent known code in the column and log a warning.
    MajorityCode,
}

#[derive(Debug, Clone)]
pub struct FeatureSpec {
    name: String,
    kind: FeatureKind,
    encoding: Vec<(String, u32)>,
    unmapped: UnmappedPolicy,
}

impl FeatureSpec {
    pub fn numeric(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            encoding: Vec::new(),
            unmapped: UnmappedPolicy::Reject,
        }
    }

    /// Categorical spec. Codes are assigned 0.. in the order given.
    pub fn categorical(name: &str, kind: FeatureKind, categories: &[&str]) -> Result<Self> {
        if kind == FeatureKind::Numeric {
            return Err(Error::InvalidDataset(format!(
                "`{name}`: numeric specs carry no categories"
            )));
        }
        if categories.is_empty() {
            return Err(Error::InvalidDataset(format!("`{name}`: empty encoding")));
        }
        if kind == FeatureKind::Binary && categories.len() != 2 {
            return Err(Error::InvalidDataset(format!(
                "`{name}`: binary spec needs exactly two categories"
            )));
        }
        let mut encoding = Vec::with_capacity(categories.len());
        for (code, cat) in categories.iter().enumerate() {
            if encoding.iter().any(|(c, _): &(String, u32)| c == cat) {
                return Err(Error::InvalidDataset(format!(
                    "`{name}`: duplicate category {cat:?}"
                )));
            }
            encoding.push((cat.to_string(), code as u32));
        }
        Ok(FeatureSpec {
            name: name.to_string(),
            kind,
            encoding,
            unmapped: UnmappedPolicy::Reject,
        })
    }

    pub fn with_unmapped(mut self, policy: UnmappedPolicy) -> Self {
        self.unmapped = policy;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn encoding(&self) -> &[(String, u32)] {
        &self.encoding
    }

    pub fn encode(&self, category: &str) -> Option<u32> {
        self.encoding
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, code)| *code)
    }

    pub fn decode(&self, code: u32) -> Option<&str> {
        self.encoding
            .iter()
            .find(|(_, c)| *c == code)
            .map(|(s, _)| s.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
    pub label: FeatureSpec,
    pub id_column: Option<String>,
}

impl Schema {
    /// Schema of the public stroke prediction dataset, in canonical feature
    /// order.
    pub fn stroke() -> Self {
        use FeatureKind::*;
        let cat = |name, kind, cats: &[&str]| {
            FeatureSpec::categorical(name, kind, cats).expect("static spec is valid")
        };
        Schema {
            features: vec![
                // The public file has one "Other" row; it takes the majority code.
                cat("gender", Binary, &["Female", "Male"])
                    .with_unmapped(UnmappedPolicy::MajorityCode),
                FeatureSpec::numeric("age"),
                cat("hypertension", Binary, &["0", "1"]),
                cat("heart_disease", Binary, &["0", "1"]),
                cat("ever_married", Binary, &["No", "Yes"]),
                cat(
                    "work_type",
                    Nominal,
                    &["Govt_job", "Never_worked", "Private", "Self-employed", "children"],
                ),
                cat("residence_type", Binary, &["Rural", "Urban"]),
                FeatureSpec::numeric("avg_glucose_level"),
                FeatureSpec::numeric("bmi"),
                cat(
                    "smoking_status",
                    Ordinal,
                    &["Unknown", "formerly smoked", "never smoked", "smokes"],
                ),
            ],
            label: cat("stroke", Binary, &["0", "1"]),
            id_column: Some("id".to_string()),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    fn all_columns(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.features.iter().chain(std::iter::once(&self.label))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub cells: Vec<Option<Cell>>,
}

impl RawColumn {
    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }
}

/// Ingested CSV, columns in schema order (features, then label).
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub row_count: usize,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_csv(file, schema)
}

/// Parses CSV from any reader. Header names match the schema
/// case-insensitively and in any order.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut by_name: HashMap<String, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if by_name.insert(h.to_lowercase(), i).is_some() {
            return Err(Error::DuplicateColumn(h.to_string()));
        }
    }

    let mut positions = Vec::new();
    for spec in schema.all_columns() {
        let pos = by_name
            .get(&spec.name.to_lowercase())
            .copied()
            .ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
        positions.push(pos);
    }
    let id = schema.id_column.as_ref().map(|s| s.to_lowercase());
    for h in headers.iter() {
        let lower = h.to_lowercase();
        let known = schema.all_columns().any(|s| s.name.to_lowercase() == lower);
        if !known && id.as_deref() != Some(lower.as_str()) {
            log::warn!("ignoring column `{h}` not present in schema");
        }
    }

    let specs: Vec<&FeatureSpec> = schema.all_columns().collect();
    let mut columns: Vec<RawColumn> = specs
        .iter()
        .map(|s| RawColumn {
            name: s.name.clone(),
            cells: Vec::new(),
        })
        .collect();

    let mut row_count = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for ((spec, &pos), column) in specs.iter().zip(&positions).zip(columns.iter_mut()) {
            let raw = record.get(pos).unwrap_or("");
            let cell = if spec.kind == FeatureKind::Numeric {
                if raw == MISSING_MARKER {
                    None
                } else {
                    let v: f64 = raw.parse().map_err(|_| Error::UnparsableCell {
                        row,
                        column: spec.name.clone(),
                        value: raw.to_string(),
                    })?;
                    Some(Cell::Number(v))
                }
            } else {
                Some(Cell::Text(raw.to_string()))
            };
            column.cells.push(cell);
        }
        row_count += 1;
    }
    Ok(RawTable { columns, row_count })
}

/// Encoded feature table; missing cells survive as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    n_rows: usize,
    values: Vec<Option<f64>>,
}

impl EncodedTable {
    pub fn new(
        names: Vec<String>,
        kinds: Vec<FeatureKind>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if names.len() != kinds.len() {
            return Err(Error::InvalidDataset("names/kinds length differ".into()));
        }
        let p = names.len();
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * p);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} cells, expected {p}",
                    r.len()
                )));
            }
            values.extend(r);
        }
        Ok(EncodedTable {
            names,
            kinds,
            n_rows,
            values,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let p = self.n_cols();
        self.values[row * p + col] = value;
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let p = self.n_cols();
        &self.values[row * p..(row + 1) * p]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.n_rows).map(move |r| self.get(r, col))
    }

    pub fn missing_count(&self, col: usize) -> usize {
        self.column(col).filter(Option::is_none).count()
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedTable {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        EncodedTable {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            n_rows: rows.len(),
            values,
        }
    }

    /// Pairs the table with labels; fails if any cell is still missing.
    pub fn to_dataset(&self, labels: &[u8]) -> Result<Dataset> {
        if labels.len() != self.n_rows {
            return Err(Error::LengthMismatch(self.n_rows, labels.len()));
        }
        let mut x = Vec::with_capacity(self.values.len());
        for (i, v) in self.values.iter().enumerate() {
            match v {
                Some(v) => x.push(*v),
                None => {
                    return Err(Error::InvalidDataset(format!(
                        "missing value at row {}, column `{}`",
                        i / self.n_cols(),
                        self.names[i % self.n_cols()]
                    )))
                }
            }
        }
        Dataset::new(x, labels.to_vec(), self.names.clone())
    }
}

/// Encodes categorical columns through the schema maps and extracts the label.
pub fn encode(table: &RawTable, schema: &Schema) -> Result<(EncodedTable, Vec<u8>)> {
    let n = table.row_count;
    let p = schema.features.len();
    let mut values = vec![None; n * p];
    for (j, spec) in schema.features.iter().enumerate() {
        let column = table
            .column(&spec.name)
            .ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
        let encoded = encode_column(spec, column)?;
        for (i, v) in encoded.into_iter().enumerate() {
            values[i * p + j] = v;
        }
    }
    let label_col = table
        .column(&schema.label.name)
        .ok_or_else(|| Error::MissingColumn(schema.label.name.clone()))?;
    let labels = encode_column(&schema.label, label_col)?
        .into_iter()
        .enumerate()
        .map(|(row, v)| match v {
            Some(v) => Ok(v as u8),
            None => Err(Error::UnparsableCell {
                row,
                column: schema.label.name.clone(),
                value: MISSING_MARKER.into(),
            }),
        })
        .collect::<Result<Vec<u8>>>()?;
    let table = EncodedTable {
        names: schema.feature_names(),
        kinds: schema.features.iter().map(|f| f.kind).collect(),
        n_rows: n,
        values,
    };
    Ok((table, labels))
}

fn encode_column(spec: &FeatureSpec, column: &RawColumn) -> Result<Vec<Option<f64>>> {
    if spec.kind == FeatureKind::Numeric {
        return column
            .cells
            .iter()
            .enumerate()
            .map(|(row, c)| match c {
                None => Ok(None),
                Some(Cell::Number(v)) => Ok(Some(*v)),
                Some(Cell::Text(t)) => t.parse::<f64>().map(Some).map_err(|_| {
                    Error::UnparsableCell {
                        row,
                        column: spec.name.clone(),
                        value: t.clone(),
                    }
                }),
            })
            .collect();
    }

    let text = |c: &Option<Cell>| -> String {
        match c {
            None => MISSING_MARKER.to_string(),
            Some(Cell::Text(t)) => t.clone(),
            Some(Cell::Number(v)) => v.to_string(),
        }
    };
    let mut codes: Vec<Option<u32>> = column.cells.iter().map(|c| spec.encode(&text(c))).collect();
    let unmapped = codes.iter().filter(|c| c.is_none()).count();
    if unmapped > 0 {
        let first_bad = codes.iter().position(Option::is_none).unwrap();
        let bad_value = text(&column.cells[first_bad]);
        match spec.unmapped {
            UnmappedPolicy::Reject => {
                return Err(Error::UnknownCategory {
                    column: spec.name.clone(),
                    value: bad_value,
                })
            }
            UnmappedPolicy::MajorityCode => {
                let mut counts = vec![0usize; spec.encoding.len()];
                for c in codes.iter().flatten() {
                    counts[*c as usize] += 1;
                }
                // first maximum wins, so ties go to the lower code
                let majority = counts
                    .iter()
                    .enumerate()
                    .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
                    .0 as u32;
                log::warn!(
                    "column `{}`: {unmapped} cell(s) with unmapped category (e.g. {bad_value:?}) \
                     mapped to majority code {majority}",
                    spec.name
                );
                for c in codes.iter_mut().filter(|c| c.is_none()) {
                    *c = Some(majority);
                }
            }
        }
    }
    Ok(codes.into_iter().map(|c| c.map(f64::from)).collect())
}

/// Dense, complete numeric dataset with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    y: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// `x` is row-major with `feature_names.len()` columns.
    pub fn new(x: Vec<f64>, y: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let p = feature_names.len();
        if p == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if x.len() != y.len() * p {
            return Err(Error::InvalidDataset(format!(
                "{} values for {} rows of {p} features",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(Error::InvalidDataset(format!(
                "label {} at row {i} is not 0/1",
                y[i]
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: i / p,
                feature: i % p,
            });
        }
        Ok(Dataset {
            n_rows: y.len(),
            n_features: p,
            x,
            y,
            feature_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let p = feature_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidDataset(format!(
                "row {bad} has {} values, expected {p}",
                rows[bad].len()
            )));
        }
        Dataset::new(rows.concat(), y, feature_names)
    }

    /// Names `x0, x1, ...` for quick construction.
    pub fn unnamed(rows: &[Vec<f64>], y: Vec<u8>) -> Result<Self> {
        let p = rows.first().map_or(1, Vec::len);
        Dataset::from_rows(rows, y, (0..p).map(|j| format!("x{j}")).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_features)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.n_features + j]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.n_features);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            x,
            n_rows: indices.len(),
            n_features: self.n_features,
            y,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Appends rows (already validated by the caller's construction).
    pub(crate) fn push_row(&mut self, row: &[f64], label: u8) {
        debug_assert_eq!(row.len(), self.n_features);
        self.x.extend_from_slice(row);
        self.y.push(label);
        self.n_rows += 1;
    }

    pub fn class_indices(&self, class: u8) -> Vec<usize> {
        (0..self.n_rows).filter(|&i| self.y[i] == class).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        [self.n_rows - pos, pos]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassBalance {
    pub negative: usize,
    pub positive: usize,
    pub positive_fraction: f64,
}

pub fn class_balance(ds: &Dataset) -> ClassBalance {
    class_balance_labels(ds.y())
}

pub fn class_balance_labels(y: &[u8]) -> ClassBalance {
    let positive = y.iter().filter(|&&v| v == 1).count();
    let negative = y.len() - positive;
    let positive_fraction = if y.is_empty() {
        0.0
    } else {
        positive as f64 / y.len() as f64
    };
    ClassBalance {
        negative,
        positive,
        positive_fraction,
    }
}

/// Per-class test counts: largest-remainder rounding of `count × fraction`,
/// so the total equals `round(n × fraction)`.
pub fn stratified_test_counts(counts: [usize; 2], test_fraction: f64) -> [usize; 2] {
    let n: usize = counts.iter().sum();
    let total = (n as f64 * test_fraction).round() as usize;
    let exact = counts.map(|c| c as f64 * test_fraction);
    let mut out = exact.map(|e| e.floor() as usize);
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut k = 0;
    while out.iter().sum::<usize>() < total && k < 8 {
        let c = order[k % 2];
        if out[c] < counts[c] {
            out[c] += 1;
        }
        k += 1;
    }
    out
}

/// Stratified partition of row indices by label; both lists come back sorted.
pub fn stratified_split_indices(
    y: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidDataset(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let balance = class_balance_labels(y);
    let counts = [balance.negative, balance.positive];
    let test_counts = stratified_test_counts(counts, test_fraction);
    for class in 0..2 {
        if test_counts[class] == 0 || test_counts[class] == counts[class] {
            return Err(Error::DegenerateClass(format!(
                "class {class} with {} rows cannot populate both partitions at fraction {test_fraction}",
                counts[class]
            )));
        }
    }
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let (t, r) = idx.split_at(test_counts[class as usize]);
        test.extend_from_slice(t);
        train.extend_from_slice(r);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(ds.y(), test_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of ones; present for 0/1-valued features.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prevalence: Option<f64>,
}

impl FeatureSummary {
    /// Statistics over the given values. `std` is the sample standard
    /// deviation (n − 1 denominator, 0 for a single value); empty input gives
    /// NaN statistics, serialized as null.
    pub fn from_values(values: &[f64], binary: bool) -> Self {
        let count = values.len();
        if count == 0 {
            return FeatureSummary {
                count,
                mean: f64::NAN,
                median: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                prevalence: None,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            (sorted[count / 2 - 1] + sorted[count / 2]) / 2.0
        };
        FeatureSummary {
            count,
            mean,
            median,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[count - 1],
            prevalence: binary
                .then(|| values.iter().filter(|&&v| v == 1.0).count() as f64 / count as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureReport {
    pub name: String,
    pub overall: FeatureSummary,
    /// Indexed by class label when grouped.
    pub by_class: Option<[FeatureSummary; 2]>,
}

/// Per-feature summary, serialized as a JSON object keyed by feature name in
/// feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryReport {
    pub features: Vec<FeatureReport>,
}

impl SummaryReport {
    pub fn feature(&self, name: &str) -> Option<&FeatureReport> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl Serialize for FeatureReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let o = &self.overall;
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("count", &o.count)?;
        map.serialize_entry("mean", &o.mean)?;
        map.serialize_entry("median", &o.median)?;
        map.serialize_entry("std", &o.std)?;
        map.serialize_entry("min", &o.min)?;
        map.serialize_entry("max", &o.max)?;
        if let Some(p) = o.prevalence {
            map.serialize_entry("prevalence", &p)?;
        }
        if let Some([neg, pos]) = &self.by_class {
            map.serialize_entry("0", neg)?;
            map.serialize_entry("1", pos)?;
        }
        map.end()
    }
}

impl Serialize for SummaryReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.features.len()))?;
        for f in &self.features {
            map.serialize_entry(&f.name, f)?;
        }
        map.end()
    }
}

fn is_binary_valued(values: &[f64]) -> bool {
    !values.is_empty() && values.iter().all(|&v| v == 0.0 || v == 1.0)
}

fn summarize_columns<'a>(
    names: &[String],
    column: impl Fn(usize) -> Vec<(f64, u8)> + 'a,
    group_by_label: bool,
) -> SummaryReport {
    let features = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let cells = column(j);
            let all: Vec<f64> = cells.iter().map(|c| c.0).collect();
            let binary = is_binary_valued(&all);
            let by_class = group_by_label.then(|| {
                [0u8, 1].map(|class| {
                    let vals: Vec<f64> =
                        cells.iter().filter(|c| c.1 == class).map(|c| c.0).collect();
                    FeatureSummary::from_values(&vals, binary)
                })
            });
            FeatureReport {
                name: name.clone(),
                overall: FeatureSummary::from_values(&all, binary),
                by_class,
            }
        })
        .collect();
    SummaryReport { features }
}

pub fn summarize(ds: &Dataset, group_by_label: bool) -> SummaryReport {
    summarize_columns(
        ds.feature_names(),
        |j| (0..ds.n_rows()).map(|i| (ds.value(i, j), ds.y()[i])).collect(),
        group_by_label,
    )
}

/// Summary over the observed cells of a table that may still contain
/// missing values.
pub fn summarize_table(table: &EncodedTable, labels: &[u8], group_by_label: bool) -> SummaryReport {
    summarize_columns(
        table.names(),
        |j| {
            table
                .column(j)
                .zip(labels)
                .filter_map(|(v, &y)| v.map(|v| (v, y)))
                .collect()
        },
        group_by_label,
    )
}
