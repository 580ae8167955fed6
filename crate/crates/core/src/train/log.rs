//! Training log rows and their CSV form.

use std::io::Write;

use sha2::{Digest, Sha256};

use super::TrainError;

pub const LOG_HEADER: [&str; 9] = [
    "iteration",
    "env_steps",
    "noise_mm",
    "beta",
    "success_rate",
    "policy_loss",
    "value_loss",
    "clip_frac",
    "kl",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub env_steps: u64,
    pub noise_mm: f64,
    pub beta: f64,
    /// Success rate of episodes that ended during the iteration (NaN if none).
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_frac: f64,
    pub kl: f64,
}

impl LogRow {
    fn record(&self) -> [String; 9] {
        [
            self.iteration.to_string(),
            self.env_steps.to_string(),
            self.noise_mm.to_string(),
            self.beta.to_string(),
            self.success_rate.to_string(),
            self.policy_loss.to_string(),
            self.value_loss.to_string(),
            self.clip_frac.to_string(),
            self.kl.to_string(),
        ]
    }
}

/// Writes the header (when `header` is set) and rows.
pub fn write_log_csv<W: Write>(out: W, rows: &[LogRow], header: bool) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(LOG_HEADER)?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of the log's CSV bytes.
pub fn log_checksum(rows: &[LogRow]) -> String {
    let mut buf = Vec::new();
    write_log_csv(&mut buf, rows, true).expect("writing to memory");
    hex::encode(Sha256::digest(&buf))
}
