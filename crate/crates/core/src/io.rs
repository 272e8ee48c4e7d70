//! Reading datasets, measures and models; writing experiment reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{empirical_from, Atom, Dataset, DiscreteMeasure};
use crate::robustness::{RobustnessReport, Timings};
use crate::solver::SvmModel;

/// Parses CSV text with a header row whose last column is `y`. Blank lines
/// are skipped; row numbers in errors are 1-based file lines.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Csv {
            row: 1,
            column: 0,
            message: "missing header".into(),
        });
    }
    if headers.len() < 2 {
        return Err(Error::Csv {
            row: 1,
            column: 1,
            message: "need at least one input column and y".into(),
        });
    }
    if headers.get(headers.len() - 1) != Some("y") {
        return Err(Error::Csv {
            row: 1,
            column: headers.len(),
            message: format!(
                "last column must be `y`, found `{}`",
                &headers[headers.len() - 1]
            ),
        });
    }
    let width = headers.len();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Csv {
                row,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Csv {
                row,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                row,
                column: c + 1,
                message: if field.is_empty() {
                    "empty field".into()
                } else {
                    format!("not a number: `{field}`")
                },
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    column: c + 1,
                    message: format!("non-finite value `{field}`"),
                });
            }
            vals.push(v);
        }
        let y = vals.pop().unwrap();
        data.push(Atom::new(vals, y));
    }
    if data.is_empty() {
        return Err(Error::Csv {
            row: 2,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Ok(data)
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_csv(&fs::read_to_string(path)?)
}

/// Loads a dataset as its empirical measure.
pub fn load_empirical(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    empirical_from(&ingest_csv(path)?)
}

fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    read_json(path)
}

pub fn write_measure(path: impl AsRef<Path>, m: &DiscreteMeasure) -> Result<()> {
    write_json(path, m)
}

/// Weighted points on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMeasure {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRepr {
    atoms: Vec<[f64; 1]>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

/// `{"atoms": [[v], ...], "weights": [...]}` with optional weights.
pub fn parse_line_measure(text: &str) -> Result<LineMeasure> {
    let r: LineRepr = serde_json::from_str(text)?;
    // reuse the measure validation with the value as the input coordinate
    let atoms: Vec<Atom> = r.atoms.iter().map(|a| Atom::new(vec![a[0]], 0.0)).collect();
    let m = match r.weights {
        Some(w) => DiscreteMeasure::new(atoms, w)?,
        None => DiscreteMeasure::uniform(atoms)?,
    };
    Ok(LineMeasure {
        points: m.atoms().iter().map(|a| a.x[0]).collect(),
        weights: m.weights().to_vec(),
    })
}

pub fn read_line_measure(path: impl AsRef<Path>) -> Result<LineMeasure> {
    parse_line_measure(&fs::read_to_string(path)?)
}

pub fn parse_model(text: &str) -> Result<SvmModel> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    read_json(path)
}

pub fn write_model(path: impl AsRef<Path>, m: &SvmModel) -> Result<()> {
    write_json(path, m)
}

pub fn parse_report(text: &str) -> Result<RobustnessReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<RobustnessReport> {
    read_json(path)
}

pub const CSV_COLUMNS: [&str; 10] = [
    "n",
    "delta",
    "d_pro_h",
    "d_pro_probe",
    "med_h_dist",
    "med_sup_dist",
    "risk_gap",
    "certified_frac",
    "series",
    "lambda",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One row per cell; missing values are empty fields.
pub fn report_to_csv(report: &RobustnessReport) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.n,
            c.delta,
            opt(c.d_pro_h),
            opt(c.d_pro_probe),
            opt(c.med_h_dist),
            opt(c.med_sup_dist),
            opt(c.risk_gap),
            c.certified_frac,
            c.series,
            c.lambda
        );
    }
    out
}

/// Path of the timing sidecar for a report written to `out`.
pub fn timing_path(out: &Path) -> std::path::PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".timing.json");
    out.with_file_name(name)
}

/// Writes the JSON report, the timing sidecar and optionally a CSV table.
pub fn emit_report(
    report: &RobustnessReport,
    timings: &Timings,
    out: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    write_json(out, report)?;
    write_json(timing_path(out), timings)?;
    if let Some(p) = csv {
        fs::write(p, report_to_csv(report))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_ok() {
        let d = parse_csv("x1,x2,y\n1,2,3\n\n-0.5, 1e-3 ,1\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].x, vec![-0.5, 1e-3]);
        assert_eq!(d[1].y, 1.0);
    }

    #[test]
    fn csv_errors_locate_the_cell() {
        match parse_csv("x,y\n1,2\n3\n") {
            Err(Error::Csv { row: 3, .. }) => {}
            e => panic!("{e:?}"),
        }
        match parse_csv("x,y\n1,2\n3,NaN\n") {
            Err(Error::Csv {
                row: 3, column: 2, ..
            }) => {}
            e => panic!("{e:?}"),
        }
        match parse_csv("x,y\n1,abc\n") {
            Err(Error::Csv {
                row: 2, column: 2, ..
            }) => {}
            e => panic!("{e:?}"),
        }
        match parse_csv("x,z\n1,2\n") {
            Err(Error::Csv {
                row: 1, column: 2, ..
            }) => {}
            e => panic!("{e:?}"),
        }
        assert!(parse_csv("").is_err());
        assert!(parse_csv("x,y\n").is_err());
        assert!(parse_csv("x,y\n1,\n").is_err());
    }

    #[test]
    fn line_measures() {
        let m = parse_line_measure(r#"{"atoms": [[0.5], [1.5]]}"#).unwrap();
        assert_eq!(m.points, vec![0.5, 1.5]);
        assert_eq!(m.weights, vec![0.5, 0.5]);
        assert!(parse_line_measure(r#"{"atoms": [[0.5, 1.0]]}"#).is_err());
        assert!(parse_line_measure(r#"{"atoms": [[0.5]], "weights": [0.3]}"#).is_err());
        assert!(parse_line_measure(r#"{"atoms": []}"#).is_err());
    }

    #[test]
    fn timing_sidecar_name() {
        assert_eq!(
            timing_path(Path::new("/tmp/r.json")),
            Path::new("/tmp/r.json.timing.json")
        );
    }
}
