//! Labeled traffic observations and their CSV form.
//!
//! Column layout (27 columns): `sample_id`, `label`, then 7 link metrics for
//! each of WiFi, LiFi and 5G in that order, then 4 scenario scalars.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numfmt::format_sig9;

pub const FEATURE_COUNT: usize = 25;

/// Per-technology metric columns, in layout order.
pub const LINK_METRICS: [&str; 7] = ["TX", "RX", "OCCUPY", "DELAY", "THROUGHPUT", "LOSS", "SNR"];

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "TX_WIFI",
    "RX_WIFI",
    "OCCUPY_WIFI",
    "DELAY_WIFI",
    "THROUGHPUT_WIFI",
    "LOSS_WIFI",
    "SNR_WIFI",
    "TX_LIFI",
    "RX_LIFI",
    "OCCUPY_LIFI",
    "DELAY_LIFI",
    "THROUGHPUT_LIFI",
    "LOSS_LIFI",
    "SNR_LIFI",
    "TX_5G",
    "RX_5G",
    "OCCUPY_5G",
    "DELAY_5G",
    "THROUGHPUT_5G",
    "LOSS_5G",
    "SNR_5G",
    "ALGORITHM",
    "NUM_UES",
    "PACKET_SIZE",
    "DEMAND_RATE",
];

pub const COL_ALGORITHM: usize = 21;
pub const COL_NUM_UES: usize = 22;
pub const COL_PACKET_SIZE: usize = 23;
pub const COL_DEMAND_RATE: usize = 24;

/// Column index of `metric` (offset into [`LINK_METRICS`]) for technology slot `tech`.
pub const fn link_column(tech: usize, metric: usize) -> usize {
    tech * LINK_METRICS.len() + metric
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("invalid feature vector: {0}")]
    Invalid(String),
}

/// One traffic window of one UE. `label` is the application class, 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sample_id: u64,
    pub label: u8,
    pub features: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn new(sample_id: u64, label: u8, features: [f64; FEATURE_COUNT]) -> Result<Self, DatasetError> {
        let fv = FeatureVector { sample_id, label, features };
        fv.validate()?;
        Ok(fv)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.label != 1 && self.label != 2 {
            return Err(DatasetError::Invalid(format!("label {} not in {{1,2}}", self.label)));
        }
        if let Some(i) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(format!("feature {} is not finite", FEATURE_NAMES[i])));
        }
        Ok(())
    }

    /// Zero-based class index used by the classifier (label 1 → 0, label 2 → 1).
    pub fn class_index(&self) -> usize {
        usize::from(self.label - 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(rows: Vec<FeatureVector>) -> Self {
        Dataset { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for row in &self.rows {
            counts[row.class_index()] += 1;
        }
        counts
    }

    /// Concatenates datasets and renumbers `sample_id` sequentially from 0.
    pub fn pooled<I: IntoIterator<Item = Dataset>>(parts: I) -> Dataset {
        let mut rows: Vec<FeatureVector> = parts.into_iter().flat_map(|d| d.rows).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            row.sample_id = i as u64;
        }
        Dataset { rows }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset { rows: indices.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    pub fn header() -> Vec<&'static str> {
        let mut header = vec!["sample_id", "label"];
        header.extend_from_slice(&FEATURE_NAMES);
        header
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header())?;
        let mut record: Vec<String> = Vec::with_capacity(FEATURE_COUNT + 2);
        for row in &self.rows {
            record.clear();
            record.push(row.sample_id.to_string());
            record.push(row.label.to_string());
            record.extend(row.features.iter().map(|&v| format_sig9(v)));
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DatasetError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header = r.headers()?.clone();
        let expected = Self::header();
        if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != *b) {
            return Err(DatasetError::Header {
                expected: expected.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != expected.len() {
                return Err(DatasetError::Row {
                    row: line,
                    reason: format!("expected {} fields, found {}", expected.len(), record.len()),
                });
            }
            let bad = |reason: String| DatasetError::Row { row: line, reason };
            let sample_id: u64 = record[0].trim().parse().map_err(|e| bad(format!("sample_id: {e}")))?;
            let label: u8 = record[1].trim().parse().map_err(|e| bad(format!("label: {e}")))?;
            let mut features = [0.0; FEATURE_COUNT];
            for (slot, field) in features.iter_mut().zip(record.iter().skip(2)) {
                *slot = field.trim().parse().map_err(|e| bad(format!("`{field}`: {e}")))?;
            }
            let fv = FeatureVector { sample_id, label, features };
            fv.validate().map_err(|e| bad(e.to_string()))?;
            rows.push(fv);
        }
        Ok(Dataset { rows })
    }

    pub fn from_csv_str(text: &str) -> Result<Dataset, DatasetError> {
        Self::read_csv(text.as_bytes())
    }

    /// Hex SHA-256 of the canonical CSV rendering.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u64, label: u8, seed: f64) -> FeatureVector {
        let mut f = [0.0; FEATURE_COUNT];
        for (i, v) in f.iter_mut().enumerate() {
            *v = seed * (i as f64 + 1.0) / 7.0;
        }
        FeatureVector::new(id, label, f).unwrap()
    }

    #[test]
    fn header_has_27_columns_in_order() {
        let h = Dataset::header();
        assert_eq!(h.len(), 27);
        assert_eq!(h[2], "TX_WIFI");
        assert_eq!(h[9], "TX_LIFI");
        assert_eq!(h[16], "TX_5G");
        assert_eq!(h[23], "ALGORITHM");
        assert_eq!(h[26], "DEMAND_RATE");
        assert_eq!(link_column(2, 6), 20);
        assert_eq!(FEATURE_NAMES[link_column(0, 2)], "OCCUPY_WIFI");
    }

    #[test]
    fn csv_round_trip_keeps_nine_digits() {
        let ds = Dataset::new(vec![row(0, 1, 1.5), row(1, 2, 0.25)]);
        let text = String::from_utf8(ds.to_csv_bytes()).unwrap();
        let back = Dataset::from_csv_str(&text).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in ds.rows.iter().zip(&back.rows) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
            }
        }
        // A second pass is a fixed point.
        assert_eq!(back.to_csv_bytes(), Dataset::from_csv_str(&text).unwrap().to_csv_bytes());
    }

    #[test]
    fn rejects_bad_label_and_header() {
        let ds = Dataset::new(vec![row(0, 1, 1.0)]);
        let text = String::from_utf8(ds.to_csv_bytes()).unwrap();
        let bad_label = text.replacen("\n0,1,", "\n0,3,", 1);
        assert!(matches!(Dataset::from_csv_str(&bad_label), Err(DatasetError::Row { row: 2, .. })));
        let bad_header = text.replacen("TX_WIFI", "TX_WLAN", 1);
        assert!(matches!(Dataset::from_csv_str(&bad_header), Err(DatasetError::Header { .. })));
        let nan = text.replacen(",0.142857143,", ",NaN,", 1);
        assert!(Dataset::from_csv_str(&nan).is_err());
    }

    #[test]
    fn pooled_renumbers_ids() {
        let a = Dataset::new(vec![row(0, 1, 1.0), row(1, 2, 1.0)]);
        let b = Dataset::new(vec![row(0, 1, 2.0)]);
        let p = Dataset::pooled([a, b]);
        assert_eq!(p.rows.iter().map(|r| r.sample_id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(p.class_counts(), [2, 1]);
    }
}
