//! File formats: survival CSV, JSON with fixed-precision floats, atomic writes.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::families::{SurvivalDataset, SurvivalRecord};

pub const CSV_HEADER: [&str; 3] = ["time", "event", "group"];

/// Parses `time,event,group` CSV. Row numbers in errors count data rows from 1.
pub fn read_survival_csv<R: Read>(reader: R) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Data {
            row: 0,
            message: format!("header must be exactly `time,event,group`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Data { row, message: e.to_string() })?;
        if rec.len() != 3 {
            return Err(Error::Data { row, message: format!("expected 3 columns, found {}", rec.len()) });
        }
        let time: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Data { row, message: format!("time `{}` is not a number", &rec[0]) })?;
        if !(time > 0.0 && time.is_finite()) {
            return Err(Error::Data { row, message: format!("time must be positive, got {time}") });
        }
        let flag = |col: usize, name: &str| match rec[col].trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::Data { row, message: format!("{name} must be 0 or 1, got `{other}`") }),
        };
        records.push(SurvivalRecord { time, event: flag(1, "event")?, treated: flag(2, "group")? });
    }
    let data = SurvivalDataset::new(records)?;
    let (n0, n1) = data.arm_counts();
    info!("read {} rows ({} events; {} comparator, {} treated)", data.len(), data.event_count(), n0, n1);
    Ok(data)
}

pub fn ingest_csv(path: &Path) -> Result<SurvivalDataset> {
    read_survival_csv(BufReader::new(File::open(path)?))
}

/// Writes times in shortest round-trip form so that reading back is exact.
pub fn write_survival_csv<W: Write>(data: &SurvivalDataset, mut out: W) -> Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for r in data.records() {
        writeln!(out, "{},{},{}", r.time, r.event as u8, r.treated as u8)?;
    }
    Ok(())
}

/// Finite floats as 17 significant digits in exponent notation.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedPrecision;

impl Formatter for FixedPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedPrecision);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let d = read_survival_csv("time,event,group\n10.5,1,0\n".as_bytes()).unwrap();
        assert_eq!(d.records(), &[SurvivalRecord::new(10.5, true, false)]);
    }

    #[test]
    fn reports_row_numbers() {
        let e = read_survival_csv("time,event,group\n-1,1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Data { row: 1, .. }), "{e}");
        let e = read_survival_csv("time,event,group\n1,1,0\n2,x,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Data { row: 2, .. }));
        let e = read_survival_csv("time,event,group\n1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Data { row: 1, .. }));
        let e = read_survival_csv("time,event,arm\n1,1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Data { row: 0, .. }));
    }

    #[test]
    fn round_trip() {
        let d = SurvivalDataset::new(vec![
            SurvivalRecord::new(0.1 + 0.2, true, true),
            SurvivalRecord::new(1825.0, false, false),
            SurvivalRecord::new(1e-7, true, false),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_survival_csv(&d, &mut buf).unwrap();
        assert_eq!(read_survival_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn float_format() {
        let v = to_json_bytes(&serde_json::json!({"x": 0.1, "n": 3, "inf": f64::INFINITY})).unwrap();
        assert_eq!(String::from_utf8(v).unwrap(), "{\"inf\":null,\"n\":3,\"x\":1.0000000000000001e-1}\n");
    }
}
