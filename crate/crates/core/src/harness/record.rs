use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::DistributionKind;

/// One trial of a sweep. Absent values (phase disabled or failed) are empty
/// CSV cells and JSON `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub d: usize,
    /// Trial index within its `(n, d)` cell.
    pub trial: u32,
    /// Trial coordinate of the random stream; unique across the sweep.
    pub stream_trial: u32,
    pub seed: u64,
    pub profile: String,
    pub distribution: DistributionKind,
    pub tp_renormalized: bool,
    /// Second singular value of the profile η.
    pub profile_s2: Option<f64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub sqrt_d_times_s2: Option<f64>,
    pub spectral_converged: Option<bool>,
    pub spectral_iterations: Option<usize>,
    pub spectral_residual: Option<f64>,
    /// `‖Y - E(Y)‖` of the raw ensemble.
    pub centered_norm: Option<f64>,
    pub centered_converged: Option<bool>,
    pub lambda1: Option<f64>,
    pub fixed_point_entropy: Option<f64>,
    pub fixed_point_converged: Option<bool>,
    /// `‖Σ - I‖` of the raw ensemble.
    pub sigma_deviation: Option<f64>,
    pub sigma_min_eig: Option<f64>,
    pub tp_defect: Option<f64>,
    pub unital_defect: Option<f64>,
    pub kraus_rank: Option<usize>,
    pub oracle_s1: Option<f64>,
    pub oracle_s2: Option<f64>,
    pub error: Option<String>,
}

/// CSV column order; the JSON keys are the same.
pub const COLUMNS: [&str; 28] = [
    "n",
    "d",
    "trial",
    "stream_trial",
    "seed",
    "profile",
    "distribution",
    "tp_renormalized",
    "profile_s2",
    "s1",
    "s2",
    "sqrt_d_times_s2",
    "spectral_converged",
    "spectral_iterations",
    "spectral_residual",
    "centered_norm",
    "centered_converged",
    "lambda1",
    "fixed_point_entropy",
    "fixed_point_converged",
    "sigma_deviation",
    "sigma_min_eig",
    "tp_defect",
    "unital_defect",
    "kraus_rank",
    "oracle_s1",
    "oracle_s2",
    "error",
];

enum Cell<'a> {
    Int(u64),
    Count(Option<usize>),
    Float(Option<f64>),
    Bool(Option<bool>),
    Text(Option<&'a str>),
}

/// 17 significant digits: enough to round-trip any `f64`.
fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl ExperimentRecord {
    /// A record with only the identifying fields set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d: usize,
        trial: u32,
        stream_trial: u32,
        seed: u64,
        profile: String,
        distribution: DistributionKind,
        tp_renormalized: bool,
    ) -> Self {
        Self {
            n,
            d,
            trial,
            stream_trial,
            seed,
            profile,
            distribution,
            tp_renormalized,
            profile_s2: None,
            s1: None,
            s2: None,
            sqrt_d_times_s2: None,
            spectral_converged: None,
            spectral_iterations: None,
            spectral_residual: None,
            centered_norm: None,
            centered_converged: None,
            lambda1: None,
            fixed_point_entropy: None,
            fixed_point_converged: None,
            sigma_deviation: None,
            sigma_min_eig: None,
            tp_defect: None,
            unital_defect: None,
            kraus_rank: None,
            oracle_s1: None,
            oracle_s2: None,
            error: None,
        }
    }

    pub fn key(&self) -> (usize, usize, u32) {
        (self.n, self.d, self.trial)
    }

    fn cells(&self) -> [Cell<'_>; 28] {
        use Cell::*;
        [
            Int(self.n as u64),
            Int(self.d as u64),
            Int(u64::from(self.trial)),
            Int(u64::from(self.stream_trial)),
            Int(self.seed),
            Text(Some(&self.profile)),
            Text(Some(self.distribution.token())),
            Bool(Some(self.tp_renormalized)),
            Float(self.profile_s2),
            Float(self.s1),
            Float(self.s2),
            Float(self.sqrt_d_times_s2),
            Bool(self.spectral_converged),
            Count(self.spectral_iterations),
            Float(self.spectral_residual),
            Float(self.centered_norm),
            Bool(self.centered_converged),
            Float(self.lambda1),
            Float(self.fixed_point_entropy),
            Bool(self.fixed_point_converged),
            Float(self.sigma_deviation),
            Float(self.sigma_min_eig),
            Float(self.tp_defect),
            Float(self.unital_defect),
            Count(self.kraus_rank),
            Float(self.oracle_s1),
            Float(self.oracle_s2),
            Text(self.error.as_deref()),
        ]
    }

    fn csv_fields(&self) -> Vec<String> {
        self.cells()
            .into_iter()
            .map(|c| match c {
                Cell::Int(v) => v.to_string(),
                Cell::Count(Some(v)) => v.to_string(),
                Cell::Float(Some(v)) => fmt_float(v),
                Cell::Count(None) | Cell::Float(None) | Cell::Bool(None) | Cell::Text(None) => String::new(),
                Cell::Bool(Some(b)) => b.to_string(),
                Cell::Text(Some(s)) => s.to_string(),
            })
            .collect()
    }

    fn write_json(&self, out: &mut String) {
        out.push('{');
        for (k, (name, c)) in COLUMNS.iter().zip(self.cells()).enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "\"{name}\": ");
            match c {
                Cell::Int(v) => {
                    let _ = write!(out, "{v}");
                }
                Cell::Count(Some(v)) => {
                    let _ = write!(out, "{v}");
                }
                Cell::Float(Some(v)) if v.is_finite() => out.push_str(&fmt_float(v)),
                Cell::Count(None) | Cell::Float(_) | Cell::Bool(None) | Cell::Text(None) => out.push_str("null"),
                Cell::Bool(Some(b)) => {
                    let _ = write!(out, "{b}");
                }
                Cell::Text(Some(s)) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
            }
        }
        out.push('}');
    }

    /// Single-line JSON object.
    pub fn to_json_line(&self) -> String {
        let mut s = String::new();
        self.write_json(&mut s);
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format `{other}` (expected csv or json)"
            ))),
        }
    }
}

impl ReportFormat {
    /// Guess from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

/// Renders records in the fixed column order. An empty list gives a
/// header-only CSV or `[]`.
pub fn render_report(records: &[ExperimentRecord], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let fmt_err = |e: csv::Error| Error::Format {
                what: "csv",
                message: e.to_string(),
            };
            w.write_record(COLUMNS).map_err(fmt_err)?;
            for r in records {
                w.write_record(r.csv_fields()).map_err(fmt_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format {
                what: "csv",
                message: e.to_string(),
            })?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Json => {
            let mut out = String::from("[");
            for (k, r) in records.iter().enumerate() {
                out.push_str(if k == 0 { "\n  " } else { ",\n  " });
                r.write_json(&mut out);
            }
            out.push_str(if records.is_empty() { "]\n" } else { "\n]\n" });
            Ok(out)
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes a report to `path` atomically.
pub fn emit_report(records: &[ExperimentRecord], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let text = render_report(records, format)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn parse_csv_report(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Format {
        what: "csv report",
        message: e.to_string(),
    })?;
    if headers.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Format {
            what: "csv report",
            message: "header does not match the record columns".into(),
        });
    }
    r.deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| Error::Format {
                what: "csv report",
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_json_report(text: &str) -> Result<Vec<ExperimentRecord>> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        what: "json report",
        message: e.to_string(),
    })
}

/// Reads a CSV or JSON report, picking the format by extension and falling
/// back to content sniffing.
pub fn load_report(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = ReportFormat::from_path(path).unwrap_or(if text.trim_start().starts_with('[') {
        ReportFormat::Json
    } else {
        ReportFormat::Csv
    });
    match format {
        ReportFormat::Csv => parse_csv_report(&text),
        ReportFormat::Json => parse_json_report(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentRecord {
        let mut r = ExperimentRecord::new(8, 4, 1, 5, 42, "perm-sum(n=8, d=4)".into(), DistributionKind::Rademacher, true);
        r.s1 = Some(1.0);
        r.s2 = Some(0.1 + 0.2);
        r.spectral_converged = Some(true);
        r.spectral_iterations = Some(17);
        r.kraus_rank = Some(4);
        r.error = Some("quote \" and, comma".into());
        r
    }

    #[test]
    fn empty_csv_is_header_only() {
        let s = render_report(&[], ReportFormat::Csv).unwrap();
        assert_eq!(s, format!("{}\n", COLUMNS.join(",")));
        assert!(parse_csv_report(&s).unwrap().is_empty());
        assert!(parse_json_report(&render_report(&[], ReportFormat::Json).unwrap())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn both_formats_roundtrip_exactly() {
        let r = sample();
        for f in [ReportFormat::Csv, ReportFormat::Json] {
            let text = render_report(std::slice::from_ref(&r), f).unwrap();
            let back = match f {
                ReportFormat::Csv => parse_csv_report(&text).unwrap(),
                ReportFormat::Json => parse_json_report(&text).unwrap(),
            };
            assert_eq!(back, vec![r.clone()], "{f:?}");
        }
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        let csv = render_report(&[sample()], ReportFormat::Csv).unwrap();
        assert!(csv.contains(",17,"), "{csv}");
    }
}
