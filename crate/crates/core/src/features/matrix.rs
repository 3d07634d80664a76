use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lineage::Lineage;
use crate::{Error, Result, SCHEMA_VERSION};

/// Identity and lineage of one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub id: usize,
    pub level: u8,
    pub lineage: Lineage,
    /// Rendered lineage path; also the CSV header.
    pub name: String,
}

impl FeatureDescriptor {
    pub fn new(id: usize, lineage: Lineage) -> Self {
        Self {
            id,
            level: lineage.level(),
            name: lineage.to_string(),
            lineage,
        }
    }
}

/// Records × features table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    pub descriptors: Vec<FeatureDescriptor>,
    pub record_ids: Vec<String>,
    /// `(row, col)` cells whose ratio denominator was guarded to 0.
    pub guarded: Vec<(usize, usize)>,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f64>,
        descriptors: Vec<FeatureDescriptor>,
        record_ids: Vec<String>,
        guarded: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let (n_rows, n_cols) = (record_ids.len(), descriptors.len());
        if values.len() != n_rows * n_cols {
            return Err(Error::Argument(format!(
                "{} values for a {n_rows} x {n_cols} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Run(format!(
                "non-finite value in row {} column `{}`",
                i / n_cols.max(1),
                descriptors[i % n_cols.max(1)].name
            )));
        }
        if descriptors.iter().enumerate().any(|(i, d)| d.id != i) {
            return Err(Error::Argument("descriptor ids must equal column index".into()));
        }
        Ok(Self {
            values,
            n_rows,
            descriptors,
            record_ids,
            guarded,
        })
    }

    /// Matrix from plain rows with synthetic descriptors; handy for callers
    /// that already hold a numeric table.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        let descriptors = (0..n_cols)
            .map(|j| {
                use super::lineage::{Band, FeaturePath, Statistic, Transform};
                // columns are labelled as approximation bands of a pseudo transform
                FeatureDescriptor::new(
                    j,
                    Lineage::single(FeaturePath::new(
                        Transform::Dwt(format!("col{j}")),
                        Some(Band::Approx(1)),
                        Statistic::Mean,
                    )),
                )
            })
            .collect();
        Self::new(
            rows.iter().flatten().copied().collect(),
            descriptors,
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            Vec::new(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.descriptors.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let n = self.n_cols();
        self.values[row * n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_rows(&self, col: usize, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| self.get(r, col)).collect()
    }

    /// Dense row-major copy of the given rows restricted to `cols`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&r| cols.iter().map(|&c| self.get(r, c)).collect())
            .collect()
    }

    /// New matrix holding only `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let values = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        let guarded = self
            .guarded
            .iter()
            .filter_map(|&(r, c)| rows.iter().position(|&x| x == r).map(|nr| (nr, c)))
            .collect();
        FeatureMatrix {
            values,
            n_rows: rows.len(),
            descriptors: self.descriptors.clone(),
            record_ids: rows.iter().map(|&r| self.record_ids[r].clone()).collect(),
            guarded,
        }
    }

    pub fn is_guarded(&self, row: usize, col: usize) -> bool {
        self.guarded.contains(&(row, col))
    }

    /// Column counts per level 0, 1, 2.
    pub fn level_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for d in &self.descriptors {
            counts[d.level.min(2) as usize] += 1;
        }
        counts
    }

    /// CSV with a `record_id` column followed by one column per descriptor.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["record_id".to_string()];
        header.extend(self.descriptors.iter().map(|d| d.name.clone()));
        w.write_record(&header)?;
        for r in 0..self.n_rows {
            let mut row = vec![self.record_ids[r].clone()];
            row.extend(self.row(r).iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn sidecar(&self, extras: serde_json::Value) -> DescriptorSidecar {
        DescriptorSidecar {
            schema_version: SCHEMA_VERSION,
            extraction: extras,
            descriptors: self
                .descriptors
                .iter()
                .map(|d| DescriptorEntry {
                    id: d.id,
                    level: d.level,
                    name: d.name.clone(),
                    lineage: d.lineage.stages(),
                })
                .collect(),
            guarded: self.guarded.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorEntry {
    pub id: usize,
    pub level: u8,
    pub name: String,
    pub lineage: Vec<String>,
}

/// JSON companion of the feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSidecar {
    pub schema_version: u32,
    pub extraction: serde_json::Value,
    pub descriptors: Vec<DescriptorEntry>,
    pub guarded: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (3, 2));
        assert_eq!(m.column(1), vec![2.0, 4.0, 6.0]);
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        assert_eq!(s.record_ids, vec!["r2", "r0"]);
        assert!(FeatureMatrix::from_rows(&[vec![1.0], vec![f64::NAN]]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_export() {
        let m = FeatureMatrix::from_rows(&[vec![0.5, 2.0]]).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "record_id,dwt(col0)/approx1/mean,dwt(col1)/approx1/mean");
        assert_eq!(lines.next().unwrap(), "r0,0.5,2.0");
    }
}
