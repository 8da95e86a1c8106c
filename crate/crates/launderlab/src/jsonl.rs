//! Dataset JSONL format: a header object on the first line carrying the
//! role and manifest, then one item object per line. UTF-8, LF endings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetManifest, DatasetRole, MCQItem};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    role: DatasetRole,
    manifest: DatasetManifest,
}

pub fn write_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        role: ds.role,
        manifest: ds.manifest.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(to_format)?;
    w.write_all(b"\n")?;
    for item in &ds.items {
        serde_json::to_writer(&mut w, item).map_err(to_format)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::Format("missing header line".into())),
    };
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::Format(format!("bad header line: {e}")))?;

    let mut items = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: MCQItem = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 2,
            msg: e.to_string(),
        })?;
        items.push(item);
    }
    let ds = Dataset {
        items,
        role: header.role,
        manifest: header.manifest,
    };
    ds.validate()?;
    Ok(ds)
}

fn to_format(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_benchmark, TaskSpec};

    #[test]
    fn round_trip_is_value_exact() {
        let ds = gen_benchmark(&TaskSpec::default(), 25, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.jsonl");
        write_jsonl(&ds, &path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn out_of_range_answer_names_the_item() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"role":"benchmark-test","manifest":{{"generator":{{"kind":"external"}},"corruption":[]}}}}"#).unwrap();
        writeln!(
            f,
            r#"{{"id":"bad7","question":"q","choices":["a","b","c","d"],"answer":7,"meta":{{}}}}"#
        )
        .unwrap();
        drop(f);
        let err = read_jsonl(&path).unwrap_err().to_string();
        assert!(err.contains("bad7") && err.contains('7'), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"role":"benchmark-test","manifest":{{"generator":{{"kind":"external"}},"corruption":[]}}}}"#).unwrap();
        writeln!(
            f,
            r#"{{"id":"ok","question":"q","choices":["a","b","c","d"],"answer":0,"meta":{{}}}}"#
        )
        .unwrap();
        writeln!(f, "this is not json").unwrap();
        drop(f);
        match read_jsonl(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        File::create(&path).unwrap();
        assert!(matches!(read_jsonl(&path), Err(Error::Format(_))));
    }

    #[test]
    fn empty_items_round_trip() {
        let mut ds = gen_benchmark(&TaskSpec::default(), 1, 5).unwrap();
        ds.items.clear();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.jsonl");
        write_jsonl(&ds, &path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(ds, back);
        assert!(back.is_empty());
    }
}
