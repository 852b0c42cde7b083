//! Observed count series and the delimited text format used to read and
//! write them.
//!
//! The file format is UTF-8 delimited text (comma or tab) with a header row.
//! Optional leading `# key=value` lines carry metadata; `bound` and `origin`
//! are recognized. [`write_series`] emits a file that [`parse_series`]
//! reads back unchanged.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    pub y: Vec<u64>,
    pub bound: Option<u64>,
    pub covariates: Vec<Covariate>,
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub len: usize,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    pub zero_fraction: f64,
}

impl CountSeries {
    pub fn new(y: Vec<u64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::usage("count series is empty"));
        }
        Ok(CountSeries {
            y,
            bound: None,
            covariates: Vec::new(),
            origin: String::new(),
        })
    }

    pub fn with_bound(mut self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("bound must be positive"));
        }
        if let Some((t, &v)) = self.y.iter().enumerate().find(|(_, &v)| v > n) {
            return Err(Error::domain(format!("count {v} at t={t} exceeds bound {n}")));
        }
        self.bound = Some(n);
        Ok(self)
    }

    pub fn with_covariate(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() != self.y.len() {
            return Err(Error::Shape {
                what: "covariate rows",
                expected: self.y.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("covariate '{name}' has non-finite values")));
        }
        if self.covariate(&name).is_some() {
            return Err(Error::usage(format!("duplicate covariate '{name}'")));
        }
        self.covariates.push(Covariate { name, values });
        Ok(self)
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn covariate(&self, name: &str) -> Option<&Covariate> {
        self.covariates.iter().find(|c| c.name == name)
    }

    pub fn mean(&self) -> f64 {
        self.y.iter().sum::<u64>() as f64 / self.y.len() as f64
    }

    pub fn summary(&self) -> SeriesSummary {
        let zeros = self.y.iter().filter(|&&v| v == 0).count();
        SeriesSummary {
            len: self.len(),
            min: *self.y.iter().min().unwrap_or(&0),
            max: *self.y.iter().max().unwrap_or(&0),
            mean: self.mean(),
            zero_fraction: zeros as f64 / self.len() as f64,
        }
    }
}

/// Column selection for [`parse_series`].
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub count_column: String,
    /// Overrides a `# bound=` declaration in the file.
    pub bound: Option<u64>,
    pub covariates: Vec<String>,
}

pub fn read_series(path: impl AsRef<Path>, options: &IngestOptions) -> Result<CountSeries> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_series(&text, options)
}

/// Metadata lines and the remaining body, with the 1-based line number at
/// which the body starts.
struct Preamble<'a> {
    bound: Option<u64>,
    origin: String,
    body: &'a str,
    first_line: usize,
}

fn split_preamble(text: &str) -> Result<Preamble<'_>> {
    let mut bound = None;
    let mut origin = String::new();
    let mut rest = text;
    let mut line_no = 1;
    while let Some(stripped) = rest.strip_prefix('#') {
        let (line, tail) = stripped.split_once('\n').unwrap_or((stripped, ""));
        if let Some((key, value)) = line.trim().split_once('=') {
            match key.trim() {
                "bound" => {
                    bound = Some(value.trim().parse().map_err(|_| Error::Ingest {
                        line: line_no,
                        reason: format!("invalid bound '{}'", value.trim()),
                    })?)
                }
                "origin" => origin = value.trim().to_string(),
                _ => {}
            }
        }
        rest = tail;
        line_no += 1;
    }
    Ok(Preamble {
        bound,
        origin,
        body: rest,
        first_line: line_no,
    })
}

fn parse_count(field: &str, line: usize) -> Result<u64> {
    let field = field.trim();
    if let Ok(v) = field.parse::<i64>() {
        if v < 0 {
            return Err(Error::Ingest {
                line,
                reason: format!("negative count {v}"),
            });
        }
        return Ok(v as u64);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v >= 0.0 => Ok(v as u64),
        Ok(v) if v < 0.0 => Err(Error::Ingest {
            line,
            reason: format!("negative count {v}"),
        }),
        _ => Err(Error::Ingest {
            line,
            reason: format!("count '{field}' is not a non-negative integer"),
        }),
    }
}

pub fn parse_series(text: &str, options: &IngestOptions) -> Result<CountSeries> {
    let pre = split_preamble(text)?;
    let header_line = pre.body.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(pre.body.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Ingest {
            line: pre.first_line,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Ingest {
            line: pre.first_line,
            reason: format!("column '{name}' not found in header"),
        })
    };
    let count_idx = column(&options.count_column)?;
    let cov_idx = options
        .covariates
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;

    let bound = options.bound.or(pre.bound);
    let mut y = Vec::new();
    let mut covs: Vec<Vec<f64>> = vec![Vec::new(); cov_idx.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest {
            line: pre.first_line + e.position().map_or(0, |p| p.line() as usize - 1),
            reason: e.to_string(),
        })?;
        let line = pre.first_line + record.position().map_or(0, |p| p.line() as usize - 1);
        if record.len() != headers.len() {
            return Err(Error::Ingest {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let count = parse_count(&record[count_idx], line)?;
        if let Some(n) = bound {
            if count > n {
                return Err(Error::Ingest {
                    line,
                    reason: format!("count {count} exceeds bound {n}"),
                });
            }
        }
        y.push(count);
        for (values, &idx) in covs.iter_mut().zip(&cov_idx) {
            let v: f64 = record[idx].parse().map_err(|_| Error::Ingest {
                line,
                reason: format!("covariate value '{}' is not numeric", &record[idx]),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    line,
                    reason: "non-finite covariate value".into(),
                });
            }
            values.push(v);
        }
    }
    if y.is_empty() {
        return Err(Error::Ingest {
            line: pre.first_line,
            reason: "no data rows".into(),
        });
    }

    let mut series = CountSeries::new(y)?.with_origin(pre.origin);
    if let Some(n) = bound {
        series = series.with_bound(n)?;
    }
    for (name, values) in options.covariates.iter().zip(covs) {
        series = series.with_covariate(name.clone(), values)?;
    }
    Ok(series)
}

/// Serialize a series in the format accepted by [`parse_series`], with the
/// count column named `y`.
pub fn write_series(series: &CountSeries) -> String {
    let mut out = String::new();
    if let Some(n) = series.bound {
        let _ = writeln!(out, "# bound={n}");
    }
    if !series.origin.is_empty() {
        let _ = writeln!(out, "# origin={}", series.origin);
    }
    out.push('y');
    for c in &series.covariates {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push('\n');
    for (t, v) in series.y.iter().enumerate() {
        let _ = write!(out, "{v}");
        for c in &series.covariates {
            let _ = write!(out, ",{}", c.values[t]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(count: &str, covs: &[&str]) -> IngestOptions {
        IngestOptions {
            count_column: count.into(),
            bound: None,
            covariates: covs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn parses_comma_and_tab() {
        let s = parse_series("year,crises\n1800,0\n1801,2\n1802,1\n", &opts("crises", &["year"])).unwrap();
        assert_eq!(s.y, vec![0, 2, 1]);
        assert_eq!(s.covariate("year").unwrap().values, vec![1800.0, 1801.0, 1802.0]);

        let s = parse_series("votes\tregime\n0\t-1\n3\t0\n", &opts("votes", &["regime"])).unwrap();
        assert_eq!(s.y, vec![0, 3]);
    }

    #[test]
    fn negative_count_names_line() {
        let err = parse_series("y\n1\n-1\n2\n", &opts("y", &[])).unwrap_err();
        match err {
            Error::Ingest { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingestion_errors() {
        assert!(matches!(
            parse_series("y\n1\n2.5\n", &opts("y", &[])),
            Err(Error::Ingest { line: 3, .. })
        ));
        assert!(matches!(
            parse_series("y,x\n1,2\n3\n", &opts("y", &["x"])),
            Err(Error::Ingest { line: 3, .. })
        ));
        let mut o = opts("y", &[]);
        o.bound = Some(10);
        assert!(matches!(
            parse_series("y\n1\n11\n", &o),
            Err(Error::Ingest { line: 3, .. })
        ));
        assert!(matches!(
            parse_series("# bound=4\ny\n1\n5\n", &opts("y", &[])),
            Err(Error::Ingest { line: 4, .. })
        ));
        assert!(matches!(parse_series("y\n", &opts("y", &[])), Err(Error::Ingest { .. })));
        assert!(matches!(parse_series("a\n1\n", &opts("y", &[])), Err(Error::Ingest { .. })));
    }

    #[test]
    fn write_then_parse() {
        let s = CountSeries::new(vec![0, 3, 10, 7])
            .unwrap()
            .with_bound(10)
            .unwrap()
            .with_covariate("regime", vec![-1.0, 0.0, 1.0, 0.25])
            .unwrap()
            .with_origin("2002-01");
        let text = write_series(&s);
        let back = parse_series(&text, &opts("y", &["regime"])).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn summary_stats() {
        let s = CountSeries::new(vec![0, 0, 2, 6]).unwrap();
        let sum = s.summary();
        assert_eq!((sum.len, sum.min, sum.max), (4, 0, 6));
        assert_eq!(sum.mean, 2.0);
        assert_eq!(sum.zero_fraction, 0.5);
    }
}
