//! Iterative (chained-equations) imputation of numeric columns with a
//! regression forest per incomplete column.
//!
//! Missing cells start at the column mean. Each round visits the incomplete
//! columns in order, fits a forest on the rows where that column was
//! observed (all other columns as covariates, at their current values) and
//! overwrites the missing cells with its predictions, clamped to the
//! observed range. Rounds stop once the largest relative change of any
//! imputed cell falls below `tolerance`, or after `max_rounds`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::forest::RegressionForest;
use crate::seed;
use crate::tabular::{EncodedTable, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputerConfig {
    pub max_rounds: usize,
    pub tolerance: f64,
    pub forest_trees: usize,
    pub forest_max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig {
            max_rounds: 10,
            tolerance: 1e-3,
            forest_trees: 50,
            forest_max_depth: None,
            seed: 0,
        }
    }
}

impl ImputerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 || self.forest_trees == 0 {
            return Err(Error::Config(
                "imputer needs max_rounds >= 1 and forest_trees >= 1".into(),
            ));
        }
        if !(self.tolerance >= 0.0) || self.forest_max_depth == Some(0) {
            return Err(Error::Config(
                "imputer tolerance must be >= 0 and depth >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedColumn {
    pub index: usize,
    pub forest: RegressionForest,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedImputer {
    pub names: Vec<String>,
    /// Columns that had missing cells at fit time, in column order.
    pub columns: Vec<ImputedColumn>,
    /// Rounds actually run by `fit_transform`.
    pub rounds: usize,
}

impl FittedImputer {
    pub fn covers(&self, col: usize) -> bool {
        self.columns.iter().any(|c| c.index == col)
    }
}

/// Covariate matrix: every column except `skip`, row-major.
fn covariates(values: &[Vec<f64>], skip: usize, rows: &[usize]) -> Vec<f64> {
    let p = values.len();
    let mut out = Vec::with_capacity(rows.len() * (p - 1));
    for &r in rows {
        for (j, col) in values.iter().enumerate() {
            if j != skip {
                out.push(col[r]);
            }
        }
    }
    out
}

fn covariate_row(values: &[Vec<f64>], skip: usize, r: usize, buf: &mut Vec<f64>) {
    buf.clear();
    for (j, col) in values.iter().enumerate() {
        if j != skip {
            buf.push(col[r]);
        }
    }
}

struct ColumnInfo {
    index: usize,
    observed: Vec<usize>,
    missing: Vec<usize>,
    mean: f64,
    min: f64,
    max: f64,
}

fn column_info(table: &EncodedTable) -> Result<Vec<ColumnInfo>> {
    let mut out = Vec::new();
    for j in 0..table.n_cols() {
        let (mut observed, mut missing) = (Vec::new(), Vec::new());
        for (i, v) in table.column(j).enumerate() {
            if v.is_some() {
                observed.push(i);
            } else {
                missing.push(i);
            }
        }
        if missing.is_empty() {
            continue;
        }
        let name = &table.names()[j];
        if table.kinds()[j] != FeatureKind::Numeric {
            return Err(Error::NonNumericMissing(name.clone()));
        }
        if observed.is_empty() {
            return Err(Error::NoObservedValues(name.clone()));
        }
        let vals: Vec<f64> = observed.iter().map(|&i| table.get(i, j).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(ColumnInfo {
            index: j,
            observed,
            missing,
            mean,
            min,
            max,
        });
    }
    Ok(out)
}

/// Column-major working copy with missing cells at their column means.
fn initial_values(table: &EncodedTable, means: &[(usize, f64)]) -> Vec<Vec<f64>> {
    (0..table.n_cols())
        .map(|j| {
            let fill = means.iter().find(|m| m.0 == j).map_or(0.0, |m| m.1);
            table.column(j).map(|v| v.unwrap_or(fill)).collect()
        })
        .collect()
}

fn write_back(table: &EncodedTable, values: &[Vec<f64>], cols: &[usize]) -> EncodedTable {
    let mut out = table.clone();
    for &j in cols {
        for i in 0..table.n_rows() {
            if table.get(i, j).is_none() {
                out.set(i, j, Some(values[j][i]));
            }
        }
    }
    out
}

pub fn fit_transform(table: &EncodedTable, cfg: &ImputerConfig) -> Result<(EncodedTable, FittedImputer)> {
    cfg.validate()?;
    let info = column_info(table)?;
    if info.is_empty() {
        return Ok((
            table.clone(),
            FittedImputer {
                names: table.names().to_vec(),
                columns: Vec::new(),
                rounds: 0,
            },
        ));
    }
    if table.n_cols() < 2 {
        return Err(Error::SchemaMismatch(
            "imputation needs at least one covariate column".into(),
        ));
    }
    let means: Vec<(usize, f64)> = info.iter().map(|c| (c.index, c.mean)).collect();
    let mut values = initial_values(table, &means);
    let p = table.n_cols();
    let mut forests: Vec<Option<RegressionForest>> = vec![None; info.len()];
    let mut rounds = 0;
    let mut buf = Vec::with_capacity(p - 1);

    while rounds < cfg.max_rounds {
        rounds += 1;
        let mut max_change: f64 = 0.0;
        for (k, col) in info.iter().enumerate() {
            let j = col.index;
            let x = covariates(&values, j, &col.observed);
            let target: Vec<f64> = col.observed.iter().map(|&i| values[j][i]).collect();
            // the seed depends on the column only, so unchanged covariates give an identical forest
            let forest = RegressionForest::fit(
                &x,
                p - 1,
                &target,
                cfg.forest_trees,
                cfg.forest_max_depth,
                seed::derive_index(cfg.seed, j as u64),
            );
            for &i in &col.missing {
                covariate_row(&values, j, i, &mut buf);
                let new = forest.predict(&buf).clamp(col.min, col.max);
                let old = values[j][i];
                max_change = max_change.max((new - old).abs() / (old.abs() + 1e-12));
                values[j][i] = new;
            }
            forests[k] = Some(forest);
        }
        if max_change < cfg.tolerance {
            break;
        }
    }

    let cols: Vec<usize> = info.iter().map(|c| c.index).collect();
    let completed = write_back(table, &values, &cols);
    let columns = info
        .into_iter()
        .zip(forests)
        .map(|(c, f)| ImputedColumn {
            index: c.index,
            forest: f.expect("every column is fitted in round one"),
            mean: c.mean,
            min: c.min,
            max: c.max,
        })
        .collect();
    Ok((
        completed,
        FittedImputer {
            names: table.names().to_vec(),
            columns,
            rounds,
        },
    ))
}

/// Fills missing cells of covered columns with one prediction pass of the
/// fitted forests, starting from the fit-time column means.
pub fn transform(imp: &FittedImputer, table: &EncodedTable) -> Result<EncodedTable> {
    if table.names() != imp.names.as_slice() {
        return Err(Error::SchemaMismatch(
            "table columns differ from the columns seen at fit time".into(),
        ));
    }
    for j in 0..table.n_cols() {
        if table.missing_count(j) > 0 && !imp.covers(j) {
            return Err(Error::SchemaMismatch(format!(
                "column `{}` has missing cells but the imputer was not fitted on it",
                table.names()[j]
            )));
        }
    }
    let means: Vec<(usize, f64)> = imp.columns.iter().map(|c| (c.index, c.mean)).collect();
    let mut values = initial_values(table, &means);
    let p = table.n_cols();
    let mut buf = Vec::with_capacity(p.saturating_sub(1));
    for col in &imp.columns {
        let j = col.index;
        for i in 0..table.n_rows() {
            if table.get(i, j).is_none() {
                covariate_row(&values, j, i, &mut buf);
                values[j][i] = col.forest.predict(&buf).clamp(col.min, col.max);
            }
        }
    }
    let cols: Vec<usize> = imp.columns.iter().map(|c| c.index).collect();
    Ok(write_back(table, &values, &cols))
}
