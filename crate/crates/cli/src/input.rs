//! Point-cloud CSV reader.
//!
//! One row per point with `d` numeric columns. A header row is optional; when
//! present and its last column is named `weight`, that column holds the point
//! weights, which are normalized to sum to 1. Without weights the measure is
//! uniform. Lines starting with `#` are skipped.

use std::io::Read;
use std::path::Path;

use swd_core::EmpiricalMeasure;

use crate::{CliError, CliResult};

pub fn read_measure(path: &Path) -> CliResult<EmpiricalMeasure> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_measure(file).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_field(field: &str, line: u64, column: usize) -> CliResult<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("line {line}, column {column}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("line {line}, column {column}: value {v} is not finite")));
    }
    Ok(v)
}

pub fn parse_measure(reader: impl Read) -> CliResult<EmpiricalMeasure> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut width = None;
    let mut weighted = false;
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Usage(format!("line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(index as u64 + 1);
        let is_header = index == 0 && record.iter().any(|f| f.parse::<f64>().is_err());
        if is_header {
            weighted = record.iter().next_back().is_some_and(|f| f.eq_ignore_ascii_case("weight"));
            width = Some(record.len());
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CliError::Usage(format!("line {line}: expected {w} columns, found {}", record.len())));
            }
            _ => {}
        }
        let coords = if weighted { record.len() - 1 } else { record.len() };
        for (column, field) in record.iter().take(coords).enumerate() {
            points.push(parse_field(field, line, column + 1)?);
        }
        if weighted {
            let w = parse_field(&record[coords], line, coords + 1)?;
            if w < 0.0 {
                return Err(CliError::Usage(format!("line {line}, column {}: negative weight {w}", coords + 1)));
            }
            weights.push(w);
        }
    }
    let dim = width.map(|w| if weighted { w - 1 } else { w }).unwrap_or(0);
    if dim == 0 || points.is_empty() {
        return Err(CliError::Usage("no data rows with at least one coordinate".into()));
    }
    if !weighted {
        return Ok(EmpiricalMeasure::uniform(points, dim)?);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(CliError::Usage("weights sum to zero".into()));
    }
    let weights = weights.into_iter().map(|w| w / total).collect();
    Ok(EmpiricalMeasure::new(points, dim, weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<EmpiricalMeasure> {
        parse_measure(s.as_bytes())
    }

    #[test]
    fn plain_rows() {
        let m = parse("0,0\n3,4\n").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.len(), 2);
        assert!(m.is_uniform());
    }

    #[test]
    fn header_with_weights() {
        let m = parse("x,y,weight\n0,0,1\n1,1,3\n").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn header_without_weights() {
        let m = parse("# comment\na,b,c\n1,2,3\n").unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse("1,2\n3,x\n").unwrap_err().to_string();
        assert!(err.contains("line 2, column 2"), "{err}");
        let err = parse("1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(parse("x,weight\n1,-1\n2,2\n").is_err());
        assert!(parse("x,weight\n1,0\n").is_err());
        assert!(parse("").is_err());
        assert!(parse("1,nan\n").is_err());
    }
}
