//! Statement store: JSON lines. The first line is the header
//! `{"schema_version":1}`; every following line is one statement record
//! (`id`, `text`, optional `in_response_to` and `tag`, `occurrence_count`).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use prediag_core::knowledge::StatementRecord;
use prediag_core::{KnowledgeGraph, Preprocessor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
}

pub fn save(graph: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut buf = serde_json::to_vec(&Header {
        schema_version: SCHEMA_VERSION,
    })
    .expect("header");
    buf.push(b'\n');
    for rec in graph.records() {
        serde_json::to_writer(&mut buf, &rec).expect("record serializes");
        buf.push(b'\n');
    }
    // write then rename so a crash never leaves a half-written store
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(Error::io(&tmp))?;
    f.write_all(&buf)
        .and_then(|_| f.sync_all())
        .map_err(Error::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn load(path: &Path, preprocessor: Preprocessor) -> Result<KnowledgeGraph> {
    let file = std::fs::File::open(path).map_err(Error::io(path))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(Error::io(path))?;
    let header: Header =
        serde_json::from_str(&header).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported schema_version {}", header.schema_version),
        ));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StatementRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(i + 2, e.to_string()))?;
        records.push(rec);
    }
    KnowledgeGraph::from_records(preprocessor, records).map_err(|source| Error::Corpus {
        path: path.into(),
        source,
    })
}
