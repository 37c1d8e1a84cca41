use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{feature_kind, FeatureKind, FeatureVector};
use crate::error::{Error, Result};

/// Columns whose sample sd falls below this are treated as constant.
const CONSTANT_SD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    /// Constant (or under-populated) columns are left on their raw scale.
    pub constant: bool,
}

impl ColumnStats {
    pub fn apply(&self, x: f64) -> f64 {
        if self.constant {
            x
        } else {
            (x - self.mean) / self.sd
        }
    }
}

/// Dense documents × features matrix; `None` cells are missing values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    names: Vec<String>,
    values: Vec<Option<f64>>,
    stats: Option<Vec<ColumnStats>>,
    row_index: HashMap<String, usize>,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, names: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if rows.len() != ids.len() {
            return Err(Error::Shape(format!("{} rows for {} ids", rows.len(), ids.len())));
        }
        let mut values = Vec::with_capacity(ids.len() * names.len());
        for (id, row) in ids.iter().zip(rows) {
            if row.len() != names.len() {
                return Err(Error::Shape(format!("row `{id}` has {} values for {} features", row.len(), names.len())));
            }
            values.extend(row.into_iter().map(|v| v.filter(|x| x.is_finite())));
        }
        let mut row_index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if row_index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(FeatureMatrix { ids, names, values, stats: None, row_index })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn is_standardized(&self) -> bool {
        self.stats.is_some()
    }

    pub fn stats(&self) -> Option<&[ColumnStats]> {
        self.stats.as_deref()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.row_index.get(id).copied()
    }

    pub fn column_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.names.len() + col]
    }

    pub fn value(&self, id: &str, name: &str) -> Option<f64> {
        self.get(self.row_of(id)?, self.column_of(name)?)
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.column_of(name).ok_or_else(|| Error::MissingFeature(name.to_string()))?;
        Ok((0..self.rows()).map(|r| self.get(r, c)).collect())
    }

    pub fn feature_vector(&self, id: &str) -> Option<FeatureVector> {
        let r = self.row_of(id)?;
        let mut fv = FeatureVector::new();
        for (c, name) in self.names.iter().enumerate() {
            fv.set(name, self.get(r, c), feature_kind(name).unwrap_or(FeatureKind::Native));
        }
        Some(fv)
    }

    /// Sample mean/sd per column over the present values.
    pub fn column_stats(&self) -> Vec<ColumnStats> {
        (0..self.cols())
            .map(|c| {
                let xs: Vec<f64> = (0..self.rows()).filter_map(|r| self.get(r, c)).collect();
                if xs.len() < 2 {
                    return ColumnStats { mean: xs.first().copied().unwrap_or(0.0), sd: 0.0, constant: true };
                }
                let mean = crate::math::mean(&xs);
                let sd = crate::math::sample_variance(&xs).sqrt();
                ColumnStats { mean, sd, constant: sd < CONSTANT_SD }
            })
            .collect()
    }

    /// Z-score every non-constant column. Constant columns keep their raw
    /// values and are flagged in [`Self::stats`].
    pub fn standardize(&self) -> Result<FeatureMatrix> {
        if self.is_standardized() {
            return Ok(self.clone());
        }
        if self.rows() < 2 {
            return Err(Error::Degenerate("standardization needs at least two documents".into()));
        }
        let stats = self.column_stats();
        let mut out = self.clone();
        for r in 0..self.rows() {
            for (c, s) in stats.iter().enumerate() {
                let i = r * self.cols() + c;
                out.values[i] = self.values[i].map(|x| s.apply(x));
            }
        }
        out.stats = Some(stats);
        Ok(out)
    }

    /// Standardize an outside vector with this matrix's statistics.
    pub fn standardize_vector(&self, fv: &FeatureVector) -> FeatureVector {
        let Some(stats) = &self.stats else {
            return fv.clone();
        };
        let mut out = FeatureVector::new();
        for (name, value) in fv.iter() {
            let kind = feature_kind(name).unwrap_or(FeatureKind::Native);
            let v = match self.column_of(name) {
                Some(c) => value.value.map(|x| stats[c].apply(x)),
                None => value.value,
            };
            out.set(name, v, kind);
        }
        out
    }

    /// Keep only the listed rows (in the given order).
    pub fn select_rows(&self, ids: &[String]) -> Result<FeatureMatrix> {
        let rows = ids
            .iter()
            .map(|id| {
                let r = self.row_of(id).ok_or_else(|| Error::DanglingId(id.clone()))?;
                Ok((0..self.cols()).map(|c| self.get(r, c)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(ids.to_vec(), self.names.clone(), rows)
    }

    /// CSV with a `doc_id` column and one column per feature; missing values
    /// are empty cells.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header = std::iter::once("doc_id").chain(self.names.iter().map(String::as_str));
        out.write_record(header).map_err(csv_err)?;
        for (r, id) in self.ids.iter().enumerate() {
            let mut record = vec![id.clone()];
            record.extend((0..self.cols()).map(|c| self.get(r, c).map_or(String::new(), |v| format!("{v:?}"))));
            out.write_record(&record).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("doc_id") {
            return Err(Error::Shape("feature CSV must start with a `doc_id` column".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (n, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            ids.push(record.get(0).unwrap_or_default().to_string());
            let row = record
                .iter()
                .skip(1)
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| Error::parse("<features.csv>", n + 2, format!("bad number `{cell}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        FeatureMatrix::new(ids, names, rows)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Shape(format!("csv: {e}"))
}
