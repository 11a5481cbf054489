//! Per-household time series: `step,p_b,p_s,d,r,y_min,y_max`, one row per
//! slow step.

use std::io::{Read, Write};
use std::path::Path;

use prosumer_core::synthetic::SyntheticDay;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const HEADER: [&str; 7] = ["step", "p_b", "p_s", "d", "r", "y_min", "y_max"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub step: usize,
    pub p_b: f64,
    pub p_s: f64,
    pub d: f64,
    pub r: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesFile {
    pub rows: Vec<SeriesRow>,
}

impl SeriesFile {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&SeriesRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// Row checks: consecutive steps from 0, finite values, `d, r ≥ 0`,
    /// `y_min ≤ y_max` and `0 ≤ p_s ≤ p_b`.
    pub fn validate(&self) -> Result<(), String> {
        for (k, row) in self.rows.iter().enumerate() {
            let at = |m: &str| format!("row {}: {m}", k + 1);
            if row.step != k {
                return Err(at(&format!("step {} where {k} was expected", row.step)));
            }
            let vals = [row.p_b, row.p_s, row.d, row.r, row.y_min, row.y_max];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(at("non-finite value"));
            }
            if row.d < 0.0 || row.r < 0.0 {
                return Err(at("d and r must be nonnegative"));
            }
            if row.y_min > row.y_max {
                return Err(at("y_min exceeds y_max"));
            }
            if !(row.p_s >= 0.0 && row.p_s <= row.p_b) {
                return Err(at("need 0 <= p_s <= p_b"));
            }
        }
        Ok(())
    }

    pub fn read_from(reader: impl Read) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| CliError::Validation(format!("series header: {e}")))?;
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(CliError::Validation(format!(
                "series header must be '{}', found '{}'",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = rdr
            .deserialize()
            .collect::<Result<Vec<SeriesRow>, _>>()
            .map_err(|e| CliError::Validation(format!("series row: {e}")))?;
        let file = Self { rows };
        file.validate().map_err(CliError::Validation)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let f = std::fs::File::open(path)
            .map_err(|e| CliError::Validation(format!("cannot open series {}: {e}", path.display())))?;
        Self::read_from(f).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write_to(&self, writer: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.write_to(f)
    }
}

impl From<&SyntheticDay> for SeriesFile {
    fn from(day: &SyntheticDay) -> Self {
        let rows = (0..day.len())
            .map(|i| SeriesRow {
                step: i,
                p_b: day.p_b[i],
                p_s: day.p_s[i],
                d: day.d[i],
                r: day.r[i],
                y_min: day.y_min[i],
                y_max: day.y_max[i],
            })
            .collect();
        Self { rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let day = prosumer_core::synthetic::residential_day(&Default::default(), 3, 0);
        let file = SeriesFile::from(&day);
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"step,p_b,p_s,d,r,y_min,y_max\n"));
        assert_eq!(SeriesFile::read_from(&buf[..]).unwrap(), file);
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_header = "step,p_b,p_s,d,r,y_min\n0,1,1,1,1,0\n";
        assert!(SeriesFile::read_from(bad_header.as_bytes()).is_err());
        let sell_above_buy = "step,p_b,p_s,d,r,y_min,y_max\n0,1,2,1,0,0,0\n";
        assert!(SeriesFile::read_from(sell_above_buy.as_bytes()).is_err());
        let skipped = "step,p_b,p_s,d,r,y_min,y_max\n1,1,1,1,0,0,0\n";
        assert!(SeriesFile::read_from(skipped.as_bytes()).is_err());
        let negative_load = "step,p_b,p_s,d,r,y_min,y_max\n0,1,1,-1,0,0,0\n";
        assert!(SeriesFile::read_from(negative_load.as_bytes()).is_err());
    }
}
