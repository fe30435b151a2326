use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the long-format results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub run_id: String,
    pub phase: String,
    pub f: Option<f64>,
    pub train_size: Option<usize>,
    pub split: Option<usize>,
    pub seed: Option<u64>,
    pub epoch: Option<usize>,
    pub metric: String,
    pub value: f64,
}

/// Writes records with a header row and LF line endings. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in records {
        if !r.value.is_finite() || r.f.is_some_and(|f| !f.is_finite()) {
            return Err(Error::NonFinite(format!("{}/{}", r.run_id, r.metric)));
        }
        writer.serialize(r)?;
    }
    if records.is_empty() {
        writer.write_record([
            "run_id", "phase", "f", "train_size", "split", "seed", "epoch", "metric", "value",
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn to_csv_string(records: &[ResultRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Sample mean and standard error of the mean (sample sd / √n; 0 for n = 1).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Relative reduction of the f = 1 error achieved by f = 0, in percent.
pub fn improvement_pct(err_f1: f64, err_f0: f64) -> f64 {
    (err_f1 - err_f0) / err_f1 * 100.0
}
