//! CSV reading and writing of subject-level data.
//!
//! Header: `id,group,x1..xL,d1..dL` with optional `c1..cL` per-endpoint
//! censoring times. `group` is `t` or `c`; `d` is `0` or `1`.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Dataset, Group, SubjectRecord};
use crate::error::{Result, WinError};

fn parse_err(row: usize, message: impl Into<String>) -> WinError {
    WinError::Parse {
        row,
        message: message.into(),
    }
}

/// Number of endpoints implied by a header, and whether censoring columns
/// are present.
fn check_header(header: &csv::StringRecord) -> Result<(usize, bool)> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 4 || cols[0] != "id" || cols[1] != "group" {
        return Err(parse_err(0, "header must start with id,group"));
    }
    let rest = cols.len() - 2;
    let (l, censor) = if rest % 3 == 0 && cols.get(2 + 2 * (rest / 3)).is_some_and(|c| *c == "c1") {
        (rest / 3, true)
    } else if rest % 2 == 0 {
        (rest / 2, false)
    } else {
        return Err(parse_err(0, "header column count does not match x1..xL,d1..dL[,c1..cL]"));
    };
    let mut expected = vec!["id".to_string(), "group".to_string()];
    expected.extend((1..=l).map(|k| format!("x{k}")));
    expected.extend((1..=l).map(|k| format!("d{k}")));
    if censor {
        expected.extend((1..=l).map(|k| format!("c{k}")));
    }
    if cols != expected {
        return Err(parse_err(0, format!("expected header {}", expected.join(","))));
    }
    Ok((l, censor))
}

fn number(row: usize, name: &str, field: &str) -> Result<f64> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") {
        return Err(parse_err(row, format!("missing value in column {name}")));
    }
    f.parse::<f64>()
        .map_err(|_| parse_err(row, format!("column {name}: '{f}' is not a number")))
}

/// Parses subjects from CSV text.
pub fn read_subjects<R: Read>(reader: R) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let (l, censor) = check_header(rdr.headers()?)?;
    let width = 2 + l * if censor { 3 } else { 2 };
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(row, format!("expected {width} fields, found {}", rec.len())));
        }
        let id = rec[0].trim().to_string();
        let group = match rec[1].trim() {
            "t" => Group::Treatment,
            "c" => Group::Control,
            g => return Err(parse_err(row, format!("group must be t or c, found '{g}'"))),
        };
        let mut times = Vec::with_capacity(l);
        let mut events = Vec::with_capacity(l);
        for k in 0..l {
            times.push(number(row, &format!("x{}", k + 1), &rec[2 + k])?);
            events.push(match rec[2 + l + k].trim() {
                "1" => true,
                "0" => false,
                d => return Err(parse_err(row, format!("d{} must be 0 or 1, found '{d}'", k + 1))),
            });
        }
        let mut s = SubjectRecord::new(id, group, times, events).map_err(|e| parse_err(row, e.to_string()))?;
        if censor {
            let c = (0..l)
                .map(|k| number(row, &format!("c{}", k + 1), &rec[2 + 2 * l + k]).map(Some))
                .collect::<Result<Vec<_>>>()?;
            s.censor_times = Some(c);
            s.validate().map_err(|e| parse_err(row, e.to_string()))?;
        }
        out.push(s);
    }
    Ok(out)
}

/// Reads a dataset without a horizon (`tau = +inf`).
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    Dataset::new(read_subjects(reader)?)
}

pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

/// Writes subjects with full round-trip precision. Censoring columns are
/// emitted only when every subject carries them.
pub fn write_subjects<W: Write>(writer: W, subjects: &[SubjectRecord]) -> Result<()> {
    let l = subjects.first().map_or(1, SubjectRecord::n_endpoints);
    let censor = !subjects.is_empty() && subjects.iter().all(|s| s.censor_times.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "group".to_string()];
    header.extend((1..=l).map(|k| format!("x{k}")));
    header.extend((1..=l).map(|k| format!("d{k}")));
    if censor {
        header.extend((1..=l).map(|k| format!("c{k}")));
    }
    wtr.write_record(&header)?;
    for s in subjects {
        let mut rec = vec![s.id.clone(), s.group.label().to_string()];
        rec.extend(s.times.iter().map(|x| format!("{x:?}")));
        rec.extend(s.events.iter().map(|&d| if d { "1" } else { "0" }.to_string()));
        if censor {
            for c in s.censor_times.as_ref().into_iter().flatten() {
                match c {
                    Some(v) => rec.push(format!("{v:?}")),
                    None => return Err(WinError::validation(format!("subject {} lacks a censoring time", s.id))),
                }
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_dataset_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    write_subjects(std::fs::File::create(path)?, dataset.subjects())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_two_rows() {
        let d = read_dataset("id,group,x1,d1\na,t,2.5,1\nb,c,3,0\n".as_bytes()).unwrap();
        assert_eq!(d.subjects().len(), 2);
        assert_eq!(d.subjects()[1].times, vec![3.0]);
        assert!(!d.subjects()[1].events[0]);
    }

    #[test]
    fn bad_indicator_names_row() {
        let e = read_subjects("id,group,x1,d1\na,t,2.5,1\nb,c,3,2\n".as_bytes()).unwrap_err();
        match e {
            WinError::Parse { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("d1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_values_rejected() {
        assert!(read_subjects("id,group,x1,d1\na,t,NA,1\n".as_bytes()).is_err());
        assert!(read_subjects("id,group,x1,d1\na,t,,1\n".as_bytes()).is_err());
        assert!(read_subjects("id,group,x1,d1\na,x,1,1\n".as_bytes()).is_err());
        assert!(read_subjects("id,grp,x1,d1\na,t,1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn censoring_columns() {
        let s = read_subjects("id,group,x1,x2,d1,d2,c1,c2\na,t,3,7,1,1,5,inf\n".as_bytes()).unwrap();
        assert_eq!(s[0].censor_times, Some(vec![Some(5.0), Some(f64::INFINITY)]));
    }

    #[test]
    fn round_trip() {
        let text = "id,group,x1,x2,d1,d2\na,t,0.1,3.3333333333333335,1,0\nb,c,2,7,0,1\n";
        let s = read_subjects(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_subjects(&mut buf, &s).unwrap();
        assert_eq!(read_subjects(buf.as_slice()).unwrap(), s);
    }
}
