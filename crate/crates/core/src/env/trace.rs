//! Per-step episode traces as CSV.

use std::io::Write;

use super::EnvError;

/// One trace row; row 0 is the reset observation with zero actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub true_plug: [f64; 12],
    pub observed_plug: [f64; 12],
    pub a_pf: [f64; 6],
    pub a_rl: [f64; 6],
    pub a_total: [f64; 6],
    pub reward: f64,
    pub penetration: f64,
    pub done: bool,
}

const POSE_FIELDS: [&str; 12] = ["tx", "ty", "tz", "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22"];
const TWIST_FIELDS: [&str; 6] = ["dx", "dy", "dz", "rx", "ry", "rz"];

pub const TRACE_COLUMNS: usize = 1 + 12 * 2 + 6 * 3 + 3;

fn header() -> Vec<String> {
    let mut h = vec!["step".to_string()];
    for prefix in ["true", "obs"] {
        h.extend(POSE_FIELDS.iter().map(|f| format!("{prefix}_{f}")));
    }
    for prefix in ["pf", "rl", "total"] {
        h.extend(TWIST_FIELDS.iter().map(|f| format!("{prefix}_{f}")));
    }
    h.extend(["reward", "penetration", "done"].map(String::from));
    h
}

/// Writes rows with a header; floats use shortest round-trip formatting.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), EnvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for r in rows {
        let mut rec = Vec::with_capacity(TRACE_COLUMNS);
        rec.push(r.step.to_string());
        let floats = r
            .true_plug
            .iter()
            .chain(&r.observed_plug)
            .chain(&r.a_pf)
            .chain(&r.a_rl)
            .chain(&r.a_total)
            .chain([&r.reward, &r.penetration]);
        rec.extend(floats.map(|v| v.to_string()));
        rec.push(u8::from(r.done).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
