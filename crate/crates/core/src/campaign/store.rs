use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::Test;

/// One evaluated test of a final sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub test: Test,
    pub rho_bar: f64,
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("artifacts contain only finite numbers and strings")
}

/// Writes `contents` to a sibling temporary file, then renames it over `path`.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CampaignError> {
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| CampaignError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| CampaignError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CampaignError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CampaignError::io(path, e))
}

pub(crate) fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Header line followed by one JSON object per row.
pub(crate) fn write_jsonl<H: Serialize, R: Serialize>(path: &Path, header: &H, rows: &[R]) -> Result<(), CampaignError> {
    let mut text = to_json(header);
    text.push('\n');
    for r in rows {
        text.push_str(&to_json(r));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::Artifact(format!("{}: {e}", path.display())))
}

/// Header value and rows of a JSON-lines artifact.
pub fn read_jsonl<R: DeserializeOwned>(path: &Path) -> Result<(serde_json::Value, Vec<R>), CampaignError> {
    let f = fs::File::open(path).map_err(|e| CampaignError::io(path, e))?;
    let bad = |line: usize, e: &dyn std::fmt::Display| CampaignError::Artifact(format!("{}:{line}: {e}", path.display()));
    let mut lines = BufReader::new(f).lines();
    let header = match lines.next() {
        Some(l) => {
            let l = l.map_err(|e| CampaignError::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| bad(1, &e))?
        }
        None => return Err(bad(1, &"empty file")),
    };
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let l = l.map_err(|e| CampaignError::io(path, e))?;
        if l.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&l).map_err(|e| bad(i + 2, &e))?);
    }
    Ok((header, rows))
}

/// First line of a file, if readable.
pub(crate) fn first_line(path: &Path) -> Option<String> {
    let f = fs::File::open(path).ok()?;
    BufReader::new(f).lines().next()?.ok()
}
