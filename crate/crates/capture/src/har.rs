use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::{ResourceLog, Result};

const EPOCH: &str = "1970-01-01T00:00:00.000Z";

/// HAR 1.2 document for one visit. Timestamps are fixed so that identical
/// visits produce identical files; bodies are summarized by hash only.
pub fn to_har(log: &ResourceLog) -> Value {
    let entries: Vec<Value> = log
        .records
        .iter()
        .map(|r| {
            json!({
                "startedDateTime": EPOCH,
                "time": 0,
                "request": {
                    "method": "GET",
                    "url": r.url,
                    "httpVersion": "HTTP/1.1",
                    "cookies": [],
                    "headers": [],
                    "queryString": [],
                    "headersSize": -1,
                    "bodySize": 0,
                },
                "response": {
                    "status": r.status,
                    "statusText": "",
                    "httpVersion": "HTTP/1.1",
                    "cookies": [],
                    "headers": [],
                    "content": { "size": r.size_bytes, "mimeType": r.mime },
                    "redirectURL": "",
                    "headersSize": -1,
                    "bodySize": r.size_bytes,
                },
                "cache": {},
                "timings": { "send": 0, "wait": 0, "receive": 0 },
                "_canonicalKey": r.canonical_key,
                "_resourceType": r.resource_type.as_str(),
                "_bodyHash": r.body_hash,
            })
        })
        .collect();
    json!({
        "log": {
            "version": "1.2",
            "creator": { "name": "breakscan", "version": env!("CARGO_PKG_VERSION") },
            "pages": [{
                "startedDateTime": EPOCH,
                "id": format!("{}-{}", log.phase.as_str(), log.run_index),
                "title": log.site,
                "pageTimings": {},
            }],
            "entries": entries,
        }
    })
}

/// Writes `<phase>-<run>.har` and `<phase>-<run>.sidecar.json` under `dir`
/// and returns the sidecar path.
pub fn write_log(dir: &Path, log: &ResourceLog) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}-{}", log.phase.as_str(), log.run_index);
    fs::write(dir.join(format!("{stem}.har")), serde_json::to_vec_pretty(&to_har(log))?)?;
    let sidecar = dir.join(format!("{stem}.sidecar.json"));
    fs::write(&sidecar, serde_json::to_vec_pretty(log)?)?;
    Ok(sidecar)
}

pub fn read_log(sidecar: &Path) -> Result<ResourceLog> {
    Ok(serde_json::from_slice(&fs::read(sidecar)?)?)
}
