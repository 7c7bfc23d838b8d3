//! Age- and sex-banded mortality tables.
//!
//! A life table maps an age band and a sex code to a per-cycle death
//! probability. Bands are lower-inclusive and upper-exclusive; the last band
//! of a sex may be open-ended (no upper age). Bands must jointly cover ages
//! from 0 up to the open end with no gaps or overlaps, so a lookup either
//! succeeds or the table itself was rejected at load time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Sex code used by mortality tables.
///
/// The numeric codes are what expressions see: sex-valued parameters hold
/// 1.0, 2.0 or 3.0 and the table maps them back before lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sex {
    Male,
    Female,
    Both,
}

impl Sex {
    pub const fn code(self) -> f64 {
        match self {
            Sex::Male => 1.0,
            Sex::Female => 2.0,
            Sex::Both => 3.0,
        }
    }

    pub fn from_code(code: f64) -> Option<Sex> {
        if code == 1.0 {
            Some(Sex::Male)
        } else if code == 2.0 {
            Some(Sex::Female)
        } else if code == 3.0 {
            Some(Sex::Both)
        } else {
            None
        }
    }

    pub fn from_label(label: &str) -> Option<Sex> {
        match label {
            "MLE" => Some(Sex::Male),
            "FMLE" => Some(Sex::Female),
            "BTSX" => Some(Sex::Both),
            _ => None,
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            Sex::Male => "MLE",
            Sex::Female => "FMLE",
            Sex::Both => "BTSX",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One input row of a life table.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeTableRow {
    pub age_lo: f64,
    /// `None` marks an open-ended band.
    pub age_hi: Option<f64>,
    pub sex: Sex,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy)]
struct Band {
    lo: f64,
    hi: Option<f64>,
    prob: f64,
}

/// Validated mortality table with per-sex contiguous age bands.
#[derive(Debug, Clone)]
pub struct LifeTable {
    bands: BTreeMap<Sex, Vec<Band>>,
}

#[derive(Debug, Error)]
pub enum LifeTableError {
    #[error("life table i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("life table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("life table is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("life table row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("life table is empty")]
    Empty,
    #[error("life table bands for sex {sex} must start at age 0 (first band starts at {lo})")]
    GapAtZero { sex: Sex, lo: f64 },
    #[error("life table bands for sex {sex} leave a gap or overlap at age {age}")]
    NotContiguous { sex: Sex, age: f64 },
    #[error("life table band for sex {sex} at age {lo} is empty or inverted")]
    EmptyBand { sex: Sex, lo: f64 },
    #[error("only the last band for sex {sex} may be open-ended")]
    OpenBandNotLast { sex: Sex },
    #[error("age {age} is outside the life table coverage for sex {sex}")]
    AgeOutOfRange { age: f64, sex: Sex },
    #[error("life table has no bands for sex {0}")]
    UnknownSex(Sex),
    #[error("{0} is not a valid sex code (expected 1 = MLE, 2 = FMLE, 3 = BTSX)")]
    BadSexCode(f64),
}

impl LifeTable {
    /// Builds a table from raw rows, validating band structure.
    ///
    /// Row order is irrelevant: bands are sorted per sex before the
    /// contiguity checks, so shuffled input yields the same table.
    pub fn from_rows(rows: Vec<LifeTableRow>) -> Result<LifeTable, LifeTableError> {
        if rows.is_empty() {
            return Err(LifeTableError::Empty);
        }
        let mut bands: BTreeMap<Sex, Vec<Band>> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if !row.age_lo.is_finite() || row.age_lo < 0.0 {
                return Err(LifeTableError::BadRow {
                    row: i + 1,
                    message: format!("age_lo {} must be a finite non-negative number", row.age_lo),
                });
            }
            if !(0.0..=1.0).contains(&row.prob) {
                return Err(LifeTableError::BadRow {
                    row: i + 1,
                    message: format!("prob {} must lie in [0, 1]", row.prob),
                });
            }
            bands.entry(row.sex).or_default().push(Band {
                lo: row.age_lo,
                hi: row.age_hi,
                prob: row.prob,
            });
        }
        for (&sex, list) in bands.iter_mut() {
            list.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            if list[0].lo != 0.0 {
                return Err(LifeTableError::GapAtZero { sex, lo: list[0].lo });
            }
            for (i, band) in list.iter().enumerate() {
                match band.hi {
                    Some(hi) => {
                        if hi <= band.lo {
                            return Err(LifeTableError::EmptyBand { sex, lo: band.lo });
                        }
                        if let Some(next) = list.get(i + 1) {
                            if next.lo != hi {
                                return Err(LifeTableError::NotContiguous { sex, age: hi });
                            }
                        }
                    }
                    None => {
                        if i + 1 != list.len() {
                            return Err(LifeTableError::OpenBandNotLast { sex });
                        }
                    }
                }
            }
        }
        Ok(LifeTable { bands })
    }

    /// Reads a table from a CSV file with columns age_lo, age_hi, sex, prob.
    /// An empty age_hi cell marks an open-ended band.
    pub fn load(path: &Path) -> Result<LifeTable, LifeTableError> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let col = |name: &'static str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or(LifeTableError::MissingColumn(name))
        };
        let (c_lo, c_hi, c_sex, c_prob) = (col("age_lo")?, col("age_hi")?, col("sex")?, col("prob")?);
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let field = |idx: usize| record.get(idx).unwrap_or("").trim();
            let bad = |message: String| LifeTableError::BadRow { row, message };
            let age_lo: f64 = field(c_lo)
                .parse()
                .map_err(|_| bad(format!("age_lo `{}` is not a number", field(c_lo))))?;
            let hi_raw = field(c_hi);
            let age_hi = if hi_raw.is_empty() {
                None
            } else {
                Some(
                    hi_raw
                        .parse()
                        .map_err(|_| bad(format!("age_hi `{hi_raw}` is not a number")))?,
                )
            };
            let sex = Sex::from_label(field(c_sex))
                .ok_or_else(|| bad(format!("sex `{}` is not one of MLE, FMLE, BTSX", field(c_sex))))?;
            let prob: f64 = field(c_prob)
                .parse()
                .map_err(|_| bad(format!("prob `{}` is not a number", field(c_prob))))?;
            rows.push(LifeTableRow { age_lo, age_hi, sex, prob });
        }
        LifeTable::from_rows(rows)
    }

    /// Death probability for one age under one sex code.
    pub fn mortality_prob(&self, age: f64, sex: Sex) -> Result<f64, LifeTableError> {
        let bands = self
            .bands
            .get(&sex)
            .ok_or(LifeTableError::UnknownSex(sex))?;
        if age.is_finite() && age >= 0.0 {
            for band in bands {
                let below_hi = band.hi.map_or(true, |hi| age < hi);
                if age >= band.lo && below_hi {
                    return Ok(band.prob);
                }
            }
        }
        Err(LifeTableError::AgeOutOfRange { age, sex })
    }

    /// Element-wise lookup over parallel age and sex-code sequences.
    pub fn mortality_probs(&self, ages: &[f64], sex_codes: &[f64]) -> Result<Vec<f64>, LifeTableError> {
        debug_assert_eq!(ages.len(), sex_codes.len());
        ages.iter()
            .zip(sex_codes)
            .map(|(&age, &code)| {
                let sex = Sex::from_code(code).ok_or(LifeTableError::BadSexCode(code))?;
                self.mortality_prob(age, sex)
            })
            .collect()
    }
}
