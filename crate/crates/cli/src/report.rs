//! JSON and CSV report emission.
//!
//! Floats are written with 17 significant digits so a report re-parses to the
//! same bits; non-finite floats become `null`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};
use swd_core::sliced::{DirectionSummary, Estimand, PlanInputs, ProjectionPlan};

/// Output of `swd distance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub kind: String,
    pub p: f64,
    pub dim: usize,
    pub m: usize,
    pub n: usize,
    pub value: f64,
    /// Monte Carlo standard error; absent for deterministic kinds.
    pub std_error: Option<f64>,
    pub estimand: Option<Estimand>,
    pub directions: Option<DirectionSummary>,
    pub per_projection: Option<ValueSummary>,
    pub argmax: Option<Vec<f64>>,
    pub plan: Option<ProjectionPlan>,
    pub plan_inputs: Option<PlanInputs>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ValueSummary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Output of `swd brackets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub m: f64,
    pub epsilon: f64,
    pub count: u64,
    pub nodes: Vec<f64>,
    /// Number of brackets whose gaps were checked.
    pub audited: u64,
    pub max_gap: f64,
    pub min_gap: f64,
    pub gaps_within_epsilon: bool,
    pub brackets: Option<Vec<BracketEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        CompactFormatter.write_f32(writer, value)
    }
}

/// One JSON document followed by a newline.
pub fn write_json<T: Serialize>(out: &mut impl Write, value: &T) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut *out, ExactFloats);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    writeln!(out)
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    write_json(&mut buf, value).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// CSV with a header row; columns may differ in length (short ones leave blanks).
pub fn write_columns(out: &mut impl Write, names: &[&str], columns: &[&[f64]]) -> io::Result<()> {
    writeln!(out, "{}", names.join(","))?;
    let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    for i in 0..rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| c.get(i).map(|v| format!("{v:.16e}")).unwrap_or_default())
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
