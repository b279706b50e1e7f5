//! Per-image manifest CSV: header `image_path,eye,label[,split]`.
//!
//! Fields are never quoted. A path containing a comma shows up as an extra
//! field and the row is rejected; quote characters are rejected outright.

use std::path::{Path, PathBuf};

use diacnn_core::data::{Dataset, Split};

use crate::error::{Error, Result};

const COLUMNS: [&str; 3] = ["image_path", "eye", "label"];

fn bad(path: &Path, detail: impl Into<String>) -> Error {
    Error::Manifest { path: path.to_path_buf(), detail: detail.into() }
}

/// Parses manifest text over the ODIR classes. Row numbers in errors are
/// file line numbers, so the header is line 1.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().quoting(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(origin, e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = [0usize; 3];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::Data(diacnn_core::data::DataError::MissingColumn(name.into())))?;
    }
    let split_col = col("split");
    let mut ds = Dataset::odir();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => bad(origin, format!("row {}: {}", p.line(), e.kind_message())),
            None => bad(origin, e.to_string()),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().any(|f| f.contains('"')) {
            return Err(bad(origin, format!("row {row}: quote characters are not supported")));
        }
        ds.push_row(row, &record[idx[0]], &record[idx[1]], &record[idx[2]], split_col.map(|c| &record[c]))
            .map_err(|e| bad(origin, e.to_string()))?;
    }
    Ok(ds)
}

trait KindMessage {
    fn kind_message(&self) -> String;
}

impl KindMessage for csv::Error {
    fn kind_message(&self) -> String {
        match self.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("expected {expected_len} fields, found {len} (paths must not contain commas)")
            }
            _ => self.to_string(),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path)
}

/// Renders `ds` with a filled split column, in sample order.
pub fn render_manifest(ds: &Dataset) -> Result<String> {
    let mut out = String::from("image_path,eye,label,split\n");
    for s in &ds.samples {
        if s.image_path.contains([',', '"', '\n']) {
            return Err(Error::Config(format!("image path `{}` cannot be written unquoted", s.image_path)));
        }
        let split = if s.split == Split::Unassigned { "" } else { s.split.as_str() };
        out.push_str(&format!("{},{},{},{}\n", s.image_path, s.eye.as_str(), ds.class_names[s.label], split));
    }
    Ok(out)
}

/// Image paths in a manifest are relative to the manifest's directory.
pub fn resolve_image(manifest: &Path, image_path: &str) -> PathBuf {
    let p = Path::new(image_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(p)
    }
}
