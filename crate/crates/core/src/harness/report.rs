//! Experiment reports and curve files.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::rates::{Dissipativity, ModelConstants};
use crate::rng::StreamPurpose;

/// First line of every curve file.
pub const CSV_MAGIC: &str = "# levy-spde-lab v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Monte Carlo resolution cannot probe the bound.
    Inconclusive,
    /// Reported, never asserted.
    Info,
}

impl Status {
    /// Process exit code for a report with this overall status.
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Pass | Self::Info => 0,
            Self::Fail => 2,
            Self::Inconclusive => 3,
        }
    }

    /// Any failure wins; otherwise any inconclusive check; otherwise pass.
    pub fn overall(checks: &[Check]) -> Self {
        if checks.iter().any(|c| c.status == Self::Fail) {
            Self::Fail
        } else if checks.iter().any(|c| c.status == Self::Inconclusive) {
            Self::Inconclusive
        } else {
            Self::Pass
        }
    }
}

/// How the confidence bound is compared with the theoretical one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    /// Strictly below.
    Below,
}

/// Non-finite numbers are written as the strings `"inf"`, `"-inf"`, `"nan"`.
mod lenient {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else {
            Repr::Text(v.to_string().to_lowercase())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> std::result::Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a number: {other:?}"))),
            },
        }
    }

    pub fn ser_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.map(to_repr).serialize(s)
    }

    pub fn de_opt<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
    }

    pub fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let r: Vec<Vec<Repr>> = rows.iter().map(|row| row.iter().copied().map(to_repr).collect()).collect();
        r.serialize(s)
    }

    pub fn de_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
        Vec::<Vec<Repr>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(from_repr).collect())
            .collect()
    }
}

/// One recorded comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    /// Point estimate.
    #[serde(serialize_with = "lenient::ser_opt", deserialize_with = "lenient::de_opt")]
    pub empirical: Option<f64>,
    /// One-sided confidence limit on the side that is compared.
    #[serde(serialize_with = "lenient::ser_opt", deserialize_with = "lenient::de_opt")]
    pub ci_bound: Option<f64>,
    #[serde(serialize_with = "lenient::ser_opt", deserialize_with = "lenient::de_opt")]
    pub theoretical_bound: Option<f64>,
    pub comparison: Comparison,
    pub status: Status,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    /// Pass iff `ci_bound` respects `theoretical_bound` under `comparison`.
    pub fn assert(name: impl Into<String>, empirical: f64, ci_bound: f64, theoretical: f64, comparison: Comparison) -> Self {
        let ok = match comparison {
            Comparison::AtMost => ci_bound <= theoretical,
            Comparison::AtLeast => ci_bound >= theoretical,
            Comparison::Below => ci_bound < theoretical,
        };
        Self {
            name: name.into(),
            empirical: Some(empirical),
            ci_bound: Some(ci_bound),
            theoretical_bound: Some(theoretical),
            comparison,
            status: if ok { Status::Pass } else { Status::Fail },
            note: String::new(),
        }
    }

    pub fn info(name: impl Into<String>, empirical: f64, ci_bound: Option<f64>, theoretical: Option<f64>) -> Self {
        Self {
            name: name.into(),
            empirical: Some(empirical),
            ci_bound,
            theoretical_bound: theoretical,
            comparison: Comparison::AtMost,
            status: Status::Info,
            note: String::new(),
        }
    }

    pub fn inconclusive(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            empirical: None,
            ci_bound: None,
            theoretical_bound: None,
            comparison: Comparison::AtMost,
            status: Status::Inconclusive,
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// A table of numbers with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(serialize_with = "lenient::ser_rows", deserialize_with = "lenient::de_rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// CSV text: the magic line, a header row, then one line per row.
    /// Numbers use the shortest representation that parses back exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_MAGIC);
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(CSV_MAGIC) {
            return Err(Error::Curve("missing header line".into()));
        }
        let header = lines.next().ok_or_else(|| Error::Curve("missing column names".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if columns.iter().any(String::is_empty) {
            return Err(Error::Curve("empty column name".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Curve(format!("row {}: {e}", i + 1)))?;
            if row.len() != columns.len() {
                return Err(Error::Curve(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self {
            name: name.to_string(),
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSummary {
    pub n_modes: usize,
    pub constants: ModelConstants,
    pub dissipativity: Dissipativity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub master_seed: u64,
    /// Stream purposes drawn from; member `i` always uses stream index `i`.
    pub streams: Vec<StreamPurpose>,
    pub bootstrap_resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Runtime {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub status: Status,
    pub config: ExperimentConfig,
    pub model: ModelSummary,
    pub checks: Vec<Check>,
    pub series: Vec<Curve>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
    /// Files written next to the report, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock only; excluded from reproducibility comparisons.
    pub runtime: Runtime,
}

impl ExperimentReport {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with wall-clock fields cleared, for bit-exact comparison.
    pub fn numerics(&self) -> Self {
        let mut r = self.clone();
        r.runtime.seconds = 0.0;
        r
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Curve> {
        self.series.iter().find(|c| c.name == name)
    }
}
