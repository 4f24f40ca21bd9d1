//! Per-run learning-curve CSVs and the cross-run summary.

use std::path::Path;

use super::RunOutput;
use crate::error::{Error, Result};
use crate::federation::RoundRecord;

pub const RUN_CSV_HEADER: &str = "round,f1,accuracy,classification_accuracy,cumulative_bytes,wall_seconds";

pub fn write_run_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_run_csv(path: &Path) -> Result<Vec<RoundRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<&str> = r.headers()?.iter().collect::<Vec<_>>();
    if header.join(",") != RUN_CSV_HEADER {
        return Err(Error::InvalidDataset(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.join(",")
        )));
    }
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// One line per sweep row; failed rows carry their error and empty metrics.
pub fn write_summary_csv(path: &Path, results: &[(super::ExperimentRow, std::result::Result<RunOutput, String>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "run_id",
        "model",
        "algorithm",
        "rounds",
        "clients",
        "batch_size",
        "c_fraction",
        "skewness",
        "client_epochs",
        "small_skew",
        "seed",
        "mu",
        "max_f1",
        "final_f1",
        "model_bytes",
        "total_bytes",
        "total_wall_seconds",
        "status",
    ])?;
    for (row, res) in results {
        let canon = row.canonical();
        let mut fields: Vec<String> = Vec::with_capacity(18);
        match res {
            Ok(out) => {
                fields.push(out.run_id.clone());
                fields.extend(canon.split(',').map(str::to_string));
                let s = &out.summary;
                fields.push(s.max_f1.to_string());
                fields.push(s.final_f1.to_string());
                fields.push(out.model_bytes.to_string());
                fields.push(s.total_bytes.to_string());
                fields.push(s.total_wall_seconds.to_string());
                fields.push("ok".into());
            }
            Err(msg) => {
                fields.push(String::new());
                fields.extend(canon.split(',').map(str::to_string));
                fields.extend(std::iter::repeat_n(String::new(), 5));
                fields.push(format!("error: {msg}"));
            }
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
