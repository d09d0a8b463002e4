use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use super::{DatasetError, ParseKind};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    event_id: String,
    vector: Vec<f64>,
}

/// Per-event frame descriptors, in file order.
pub type Embeddings = BTreeMap<String, Vec<Vec<f64>>>;

fn bad(line: usize, message: String) -> DatasetError {
    DatasetError::Parse {
        line,
        kind: ParseKind::InvalidRecord,
        message,
    }
}

/// Reads `event_id,v0,v1,...` CSV, or JSONL `{"event_id", "vector"}` when the
/// extension is `.jsonl` or `.json`. Repeated ids are further frames of the
/// same event.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Embeddings, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(DatasetError::io(path))?;
    let mut out = Embeddings::new();
    let is_json = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("json")
    );
    if is_json {
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(DatasetError::io(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: JsonRow = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
                line: i + 1,
                kind: ParseKind::Syntax,
                message: e.to_string(),
            })?;
            out.entry(row.event_id).or_default().push(row.vector);
        }
        return Ok(out);
    }
    let mut reader = csv::Reader::from_reader(file);
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let mut fields = row.iter();
        let id = fields.next().ok_or_else(|| bad(line, "empty row".into()))?.to_string();
        let vector = fields
            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(line, format!("{v:?}: {e}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        out.entry(id).or_default().push(vector);
    }
    Ok(out)
}

/// Writes rows as `event_id,v0..v{d-1}` CSV.
pub fn write_embeddings_csv<W: Write>(writer: W, dim: usize, rows: &[(String, Vec<f64>)]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["event_id".to_string()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for (id, v) in rows {
        let mut record = vec![id.clone()];
        record.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(DatasetError::io("<embeddings>"))?;
    Ok(())
}
