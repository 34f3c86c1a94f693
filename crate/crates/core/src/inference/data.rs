//! Longitudinal swab observations and their CSV schema.
//!
//! The CSV header is exactly `case_id,t_anchor,value,censored` (schema v1).
//! Lines starting with `#` are comments. `value` is a log₁₀ gene copies·ml⁻¹
//! concentration and must be empty when `censored` is true.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::DelayDistribution;
use crate::ParamError;

pub const OBSERVATION_COLUMNS: [&str; 4] = ["case_id", "t_anchor", "value", "censored"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no records")]
    NoRecords,
    #[error("header must be `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// What a single swab told us.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    Detected(f64),
    /// Negative result: concentration below the dataset's censoring threshold.
    Censored,
}

impl Measurement {
    pub fn is_censored(&self) -> bool {
        matches!(self, Self::Censored)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub case_id: String,
    /// Days relative to the dataset anchor (infection or symptom onset).
    pub t_anchor: f64,
    pub measurement: Measurement,
}

/// How observation times relate to infection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnchorMode {
    /// Times are days since a known infection (challenge studies).
    Infection,
    /// Times are days from symptom onset; each case's incubation period is
    /// latent with the given prior.
    Onset { incubation: DelayDistribution },
}

/// All observations of one case, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSeries {
    pub id: String,
    pub times: Vec<f64>,
    pub measurements: Vec<Measurement>,
}

impl CaseSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Measurement)> + '_ {
        self.times.iter().copied().zip(self.measurements.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub anchor: AnchorMode,
    pub cases: Vec<CaseSeries>,
    /// Log₁₀ concentration below which negative results are censored.
    pub censor_threshold: f64,
}

impl Dataset {
    /// Group records by case, keeping first-appearance order.
    pub fn new(
        anchor: AnchorMode,
        records: Vec<ObservationRecord>,
        censor_threshold: f64,
    ) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::NoRecords);
        }
        if !censor_threshold.is_finite() {
            return Err(ParamError::new("censor_threshold", censor_threshold, "must be finite").into());
        }
        if let AnchorMode::Onset { incubation } = anchor {
            incubation.validate()?;
        }
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cases: Vec<CaseSeries> = Vec::new();
        for (i, rec) in records.into_iter().enumerate() {
            if !rec.t_anchor.is_finite() {
                return Err(DataError::Row {
                    row: i + 1,
                    message: "t_anchor must be finite".into(),
                });
            }
            if let Measurement::Detected(v) = rec.measurement {
                if !v.is_finite() {
                    return Err(DataError::Row {
                        row: i + 1,
                        message: "value must be finite".into(),
                    });
                }
            }
            let slot = *index.entry(rec.case_id.clone()).or_insert_with(|| {
                cases.push(CaseSeries {
                    id: rec.case_id.clone(),
                    times: Vec::new(),
                    measurements: Vec::new(),
                });
                cases.len() - 1
            });
            cases[slot].times.push(rec.t_anchor);
            cases[slot].measurements.push(rec.measurement);
        }
        Ok(Self {
            anchor,
            cases,
            censor_threshold,
        })
    }

    pub fn n_cases(&self) -> usize {
        self.cases.len()
    }

    pub fn n_observations(&self) -> usize {
        self.cases.iter().map(CaseSeries::len).sum()
    }

    pub fn incubation_prior(&self) -> Option<DelayDistribution> {
        match self.anchor {
            AnchorMode::Infection => None,
            AnchorMode::Onset { incubation } => Some(incubation),
        }
    }
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Read observations from a CSV file; see the module docs for the schema.
///
/// With [`AnchorMode::Onset`], rows whose `t_anchor` is blank belong to cases
/// without a recorded symptom onset and are skipped.
pub fn load_dataset(
    path: impl AsRef<Path>,
    anchor: AnchorMode,
    censor_threshold: f64,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, anchor, censor_threshold)
}

/// [`load_dataset`] over any reader.
pub fn read_dataset<R: std::io::Read>(
    reader: R,
    anchor: AnchorMode,
    censor_threshold: f64,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let header = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if e.is_io_error() => return Err(DataError::Csv { row: 0, source: e }),
        Err(_) => return Err(DataError::NoRecords),
    };
    if header.is_empty() {
        return Err(DataError::NoRecords);
    }
    if header.iter().ne(OBSERVATION_COLUMNS.iter().copied()) {
        return Err(DataError::Header {
            expected: OBSERVATION_COLUMNS.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let onset_mode = matches!(anchor, AnchorMode::Onset { .. });
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|source| DataError::Csv { row: row_no, source })?;
        let bad = |message: String| DataError::Row { row: row_no, message };

        let case_id = row[0].to_string();
        if case_id.is_empty() {
            return Err(bad("empty case_id".into()));
        }
        let t_raw = &row[1];
        if t_raw.is_empty() {
            if onset_mode {
                continue;
            }
            return Err(bad("missing t_anchor".into()));
        }
        let t_anchor: f64 = t_raw
            .parse()
            .map_err(|_| bad(format!("t_anchor `{t_raw}` is not a number")))?;
        let censored = parse_bool(&row[3])
            .ok_or_else(|| bad(format!("censored `{}` is not a boolean", &row[3])))?;
        let measurement = match (row[2].is_empty(), censored) {
            (true, true) => Measurement::Censored,
            (false, false) => {
                let v: f64 = row[2]
                    .parse()
                    .map_err(|_| bad(format!("value `{}` is not a number", &row[2])))?;
                Measurement::Detected(v)
            }
            (false, true) => return Err(bad("row has both a value and censored=true".into())),
            (true, false) => return Err(bad("missing value with censored=false".into())),
        };
        records.push(ObservationRecord {
            case_id,
            t_anchor,
            measurement,
        });
    }
    Dataset::new(anchor, records, censor_threshold)
}

/// Write observations in the schema [`load_dataset`] reads.
pub fn write_dataset<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OBSERVATION_COLUMNS)?;
    for case in &dataset.cases {
        for (t, m) in case.iter() {
            let (value, censored) = match m {
                Measurement::Detected(v) => (v.to_string(), "false"),
                Measurement::Censored => (String::new(), "true"),
            };
            w.write_record([case.id.as_str(), &t.to_string(), &value, censored])?;
        }
    }
    w.flush()?;
    Ok(())
}
