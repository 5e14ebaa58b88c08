//! Result records and their CSV/JSON emission.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CSV header, in column order.
pub const HEADERS: [&str; 13] = [
    "weight_id", "p", "shift_id", "i", "ap", "ainfty_w", "ainfty_sigma", "Sp", "SpStar", "R", "rho", "domC",
    "decay_c",
];

/// One measured point of an experiment. Quantities an experiment does not
/// compute are left empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub weight_id: String,
    pub p: f64,
    pub shift_id: String,
    pub i: u32,
    pub ap: Option<f64>,
    pub ainfty_w: Option<f64>,
    pub ainfty_sigma: Option<f64>,
    #[serde(rename = "Sp")]
    pub sp: Option<f64>,
    #[serde(rename = "SpStar")]
    pub sp_star: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "domC")]
    pub dom_c: Option<f64>,
    pub decay_c: Option<f64>,
}

impl ResultRecord {
    fn measurements(&self) -> [Option<f64>; 9] {
        [
            self.ap,
            self.ainfty_w,
            self.ainfty_sigma,
            self.sp,
            self.sp_star,
            self.r,
            self.rho,
            self.dom_c,
            self.decay_c,
        ]
    }

    /// Checks that every present value is finite.
    pub fn check_finite(&self) -> Result<()> {
        let values = std::iter::once(Some(self.p)).chain(self.measurements());
        match values.zip(HEADERS.iter().skip(1)).find(|(v, _)| v.is_some_and(|x| !x.is_finite())) {
            Some((v, name)) => Err(Error::Domain(format!(
                "record ({}, {}, {}): {name} = {} is not finite",
                self.weight_id,
                self.p,
                self.shift_id,
                v.unwrap()
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown output format {s:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

fn check_records(records: &[ResultRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to emit".into()));
    }
    records.iter().try_for_each(ResultRecord::check_finite)
}

/// Renders records as CSV. Floats use the shortest representation that
/// parses back to the same value.
pub fn to_csv(records: &[ResultRecord]) -> Result<String> {
    check_records(records)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Renders records as a pretty-printed JSON array.
pub fn to_json(records: &[ResultRecord]) -> Result<String> {
    check_records(records)?;
    let mut text = serde_json::to_string_pretty(records)?;
    text.push('\n');
    Ok(text)
}

pub fn from_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn from_json(text: &str) -> Result<Vec<ResultRecord>> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `records` to `path` in the given format.
pub fn emit(records: &[ResultRecord], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(records)?,
        Format::Json => to_json(records)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}
