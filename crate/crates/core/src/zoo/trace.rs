use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::zoo::TraceRecord;

/// Reads a newline-delimited JSON trace, validating every record.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(BufReader::new(file))
}

pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut records: Vec<TraceRecord> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        check_record(&record, records.first(), line_no)?;
        records.push(record);
    }
    Ok(records)
}

fn check_record(record: &TraceRecord, first: Option<&TraceRecord>, line: usize) -> Result<()> {
    if record.per_model.is_empty() {
        return Err(Error::Schema {
            line,
            message: "record lists no models".into(),
        });
    }
    if let Some(first) = first {
        if first.per_model.len() != record.per_model.len() {
            return Err(Error::Schema {
                line,
                message: format!(
                    "record has {} models, earlier records have {}",
                    record.per_model.len(),
                    first.per_model.len()
                ),
            });
        }
        for (a, b) in first.per_model.iter().zip(&record.per_model) {
            if a.name != b.name {
                return Err(Error::Schema {
                    line,
                    message: format!(
                        "model order differs: expected `{}`, found `{}`",
                        a.name, b.name
                    ),
                });
            }
        }
    }
    for (m, r) in record.per_model.iter().enumerate() {
        let field = |f: &str| format!("models[{m}].{f}");
        if !(0.0..=1.0).contains(&r.accuracy) {
            return Err(Error::Validation {
                line,
                field: field("accuracy"),
                message: format!("must lie in [0, 1], got {}", r.accuracy),
            });
        }
        if !(r.energy_joules.is_finite() && r.energy_joules >= 0.0) {
            return Err(Error::Validation {
                line,
                field: field("energy_joules"),
                message: format!("must be finite and >= 0, got {}", r.energy_joules),
            });
        }
        if !(r.latency_seconds.is_finite() && r.latency_seconds >= 0.0) {
            return Err(Error::Validation {
                line,
                field: field("latency_seconds"),
                message: format!("must be finite and >= 0, got {}", r.latency_seconds),
            });
        }
    }
    Ok(())
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Serialization(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = concat!(
        r#"{"request_id":"a","text":"guten tag","reference":"good day","models":[{"name":"small","accuracy":0.5,"energy_joules":44.639,"latency_seconds":0.2,"output_text":"good day"},{"name":"large","accuracy":1.0,"energy_joules":527.87,"latency_seconds":1.1}]}"#,
        "\n",
        r#"{"request_id":"b","text":"danke","reference":null,"models":[{"name":"small","accuracy":0.0,"energy_joules":40.0,"latency_seconds":0.1},{"name":"large","accuracy":0.25,"energy_joules":500.0,"latency_seconds":0.9}]}"#,
        "\n"
    );

    #[test]
    fn empty_input() {
        assert!(parse_trace("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn two_records_round_trip() {
        let recs = parse_trace(TWO.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(
            recs[0].per_model[0].output_text.as_deref(),
            Some("good day")
        );
        assert_eq!(recs[1].reference, None);
        assert_eq!(recs[0].per_model[1].energy_joules, 527.87);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        write_trace(&p, &recs).unwrap();
        assert_eq!(load_trace(&p).unwrap(), recs);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), TWO);
    }

    #[test]
    fn accuracy_out_of_range_names_field_and_line() {
        let bad = TWO.replace("\"accuracy\":0.25", "\"accuracy\":1.2");
        match parse_trace(bad.as_bytes()) {
            Err(Error::Validation { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "models[1].accuracy");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let bad = format!("{TWO}{{not json\n");
        match parse_trace(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let bad = TWO.replacen("\"text\"", "\"extra\":1,\"text\"", 1);
        assert!(matches!(
            parse_trace(bad.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn inconsistent_model_count() {
        let line1 = TWO.lines().next().unwrap();
        let short = r#"{"request_id":"c","text":"x","reference":null,"models":[{"name":"small","accuracy":0.1,"energy_joules":1.0,"latency_seconds":0.1}]}"#;
        let input = format!("{line1}\n{short}\n");
        assert!(matches!(
            parse_trace(input.as_bytes()),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn model_order_must_match() {
        let swapped = TWO
            .lines()
            .nth(1)
            .unwrap()
            .replace("\"small\"", "\"tmp\"")
            .replace("\"large\"", "\"small\"")
            .replace("\"tmp\"", "\"large\"");
        let input = format!("{}\n{swapped}\n", TWO.lines().next().unwrap());
        assert!(matches!(
            parse_trace(input.as_bytes()),
            Err(Error::Schema { line: 2, .. })
        ));
    }
}
