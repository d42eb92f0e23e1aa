//! Manifest CSV: header `id,magnification,label,subtype`, then one record
//! per line, e.g. `B_TA-40-0007,40,benign,TA`.

use std::path::Path;

use prediag_core::classifier::{BreakhisRecord, DatasetManifest, Label, Magnification, Subtype};

use crate::error::{Error, Result};

pub fn read(path: &Path) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        let line = i + 2;
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", row.len())));
        }
        let parse =
            || -> std::result::Result<BreakhisRecord, prediag_core::classifier::ClassifierError> {
                BreakhisRecord::new(
                    &row[0],
                    row[1].parse::<Magnification>()?,
                    row[2].parse::<Label>()?,
                    row[3].parse::<Subtype>()?,
                )
            };
        records.push(parse().map_err(|e| bad(e.to_string()))?);
    }
    Ok(DatasetManifest::new(records))
}

pub fn write(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["id", "magnification", "label", "subtype"])
        .map_err(csv_err)?;
    for r in manifest.records() {
        w.write_record([
            r.id.as_str(),
            &r.magnification.factor().to_string(),
            r.label.as_str(),
            r.subtype.code(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(Error::io(path))
}
