//! Subject record CSV format.
//!
//! Comma separated with a header row naming at least the columns in
//! [`RECORD_COLUMNS`]; column order is free and extra columns are ignored.
//! Missing values are empty fields. When a motor NIHSS column is empty, it
//! is computed from the optional item columns `nihss_d1_facial`,
//! `nihss_d1_upper_left`, `nihss_d1_upper_right`, `nihss_d1_lower_left`,
//! `nihss_d1_lower_right` (and the same with `d180`) if all five are present.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::clinical::{motor_nihss, MotorNihssComponents, SubjectRecord};
use crate::error::{Error, Result};

pub const RECORD_COLUMNS: [&str; 9] = [
    "id",
    "age",
    "sex",
    "treatment",
    "hv_ml",
    "ivh_ml",
    "nihss_motor_d1",
    "nihss_motor_d180",
    "mrs_d365",
];

const ITEM_SUFFIXES: [&str; 5] = [
    "facial",
    "upper_left",
    "upper_right",
    "lower_left",
    "lower_right",
];

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<SubjectRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(file, &path.display().to_string())
}

pub fn parse_records<R: Read>(input: R, source: &str) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for name in RECORD_COLUMNS {
        if !col.contains_key(name) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                message: format!("missing column '{name}'"),
            });
        }
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |name: &str| -> Option<&str> {
            col.get(name)
                .and_then(|&i| row.get(i))
                .filter(|s| !s.is_empty())
        };
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let id = field("id")
            .ok_or_else(|| parse_err("empty id".into()))?
            .to_string();
        let number = |name: &str| -> Result<Option<f64>> {
            field(name)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| parse_err(format!("{name}: '{s}' is not a number")))
                })
                .transpose()
        };
        let required = |name: &str| -> Result<f64> {
            number(name)?.ok_or_else(|| parse_err(format!("{name} is required (subject {id})")))
        };
        let motor = |visit: &str, column: &str| -> Result<Option<f64>> {
            if let Some(v) = number(column)? {
                return Ok(Some(v));
            }
            let names: Vec<String> = ITEM_SUFFIXES
                .iter()
                .map(|s| format!("nihss_{visit}_{s}"))
                .collect();
            let items: Vec<Option<f64>> = names.iter().map(|n| number(n)).collect::<Result<_>>()?;
            if items.iter().any(Option::is_none) {
                return Ok(None);
            }
            let as_u8 = |v: Option<f64>| -> Result<u8> {
                let v = v.unwrap_or_default();
                if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                    return Err(parse_err(format!("NIHSS item {v} is not a small integer")));
                }
                Ok(v as u8)
            };
            let c = MotorNihssComponents {
                facial_palsy: as_u8(items[0])?,
                upper_left: as_u8(items[1])?,
                upper_right: as_u8(items[2])?,
                lower_left: as_u8(items[3])?,
                lower_right: as_u8(items[4])?,
            };
            Ok(Some(motor_nihss(&c)? as f64))
        };

        let sex = field("sex")
            .ok_or_else(|| parse_err("sex is required".into()))?
            .parse()
            .map_err(parse_err)?;
        let treatment = field("treatment")
            .ok_or_else(|| parse_err("treatment is required".into()))?
            .parse()
            .map_err(parse_err)?;
        let record = SubjectRecord {
            age: required("age")?,
            sex,
            treatment,
            haematoma_volume_ml: required("hv_ml")?,
            ivh_volume_ml: required("ivh_ml")?,
            nihss_motor_baseline: motor("d1", "nihss_motor_d1")?
                .ok_or_else(|| parse_err(format!("nihss_motor_d1 is required (subject {id})")))?,
            nihss_motor_day180: motor("d180", "nihss_motor_d180")?,
            mrs_day365: number("mrs_d365")?,
            id,
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records with shortest round-trip float formatting.
pub fn write_records<W: Write>(records: &[SubjectRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.id.clone(),
            r.age.to_string(),
            r.sex.to_string(),
            r.treatment.to_string(),
            r.haematoma_volume_ml.to_string(),
            r.ivh_volume_ml.to_string(),
            r.nihss_motor_baseline.to_string(),
            opt(r.nihss_motor_day180),
            opt(r.mrs_day365),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}
