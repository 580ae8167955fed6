//! Result matrices as an aligned text table and a full-precision CSV.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::eval::CellResult;
use super::ExperimentError;
use crate::train::Variant;

/// Percentages with two decimals, e.g. `96.25±1.22%`.
pub fn format_cell(mean_rate: f64, std_rate: f64) -> String {
    format!("{:.2}±{:.2}%", 100.0 * mean_rate, 100.0 * std_rate)
}

pub const RESULT_HEADER: [&str; 9] = [
    "scene",
    "variant",
    "noise",
    "successes",
    "trials",
    "mean_rate",
    "std_rate",
    "mean_steps_to_success",
    "seed_rates",
];

/// One CSV line of a result matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scene: String,
    pub variant: Variant,
    pub noise: f64,
    pub successes: usize,
    pub trials: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_steps_to_success: f64,
    /// Per-seed rates joined with `;`.
    pub seed_rates: String,
}

impl ResultRow {
    pub fn from_cell(c: &CellResult) -> Self {
        Self {
            scene: c.cell.scene.clone(),
            variant: c.cell.variant,
            noise: c.cell.noise,
            successes: c.stats.successes,
            trials: c.stats.trials,
            mean_rate: c.stats.mean_rate,
            std_rate: c.stats.std_rate,
            mean_steps_to_success: c.stats.mean_steps_to_success,
            seed_rates: c.stats.seed_rates.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
        }
    }
}

fn push_unique<T: PartialEq + Clone>(v: &mut Vec<T>, x: &T) {
    if !v.contains(x) {
        v.push(x.clone());
    }
}

/// Rows are variants, columns are scene × noise level, both in order of first
/// appearance. Returns `(text table, CSV)`.
pub fn emit_table(results: &[CellResult]) -> Result<(String, String), ExperimentError> {
    let mut variants: Vec<Variant> = Vec::new();
    let mut columns: Vec<(String, u64)> = Vec::new();
    for r in results {
        push_unique(&mut variants, &r.cell.variant);
        push_unique(&mut columns, &(r.cell.scene.clone(), r.cell.noise.to_bits()));
    }
    let mut grid: Vec<Vec<String>> = Vec::with_capacity(variants.len() + 1);
    let mut head = vec!["variant".to_string()];
    head.extend(columns.iter().map(|(s, n)| {
        let n = f64::from_bits(*n);
        format!("{s} {n}mm/{n}°")
    }));
    grid.push(head);
    for v in &variants {
        let mut line = vec![v.to_string()];
        for (s, n) in &columns {
            let cell = results
                .iter()
                .find(|r| r.cell.variant == *v && r.cell.scene == *s && r.cell.noise.to_bits() == *n);
            line.push(cell.map_or("-".to_string(), |c| format_cell(c.stats.mean_rate, c.stats.std_rate)));
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|l| l[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for (i, line) in grid.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        text.push_str(cells.join(" | ").trim_end());
        text.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            text.push_str(&rule.join("-|-"));
            text.push('\n');
        }
    }

    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RESULT_HEADER)?;
    for r in results {
        w.serialize(ResultRow::from_cell(r))?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
    Ok((text, csv))
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}
