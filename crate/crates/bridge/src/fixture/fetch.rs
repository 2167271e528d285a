//! Where the fixture driver gets bytes from: a corpus directory on disk, or
//! plain HTTP (normally through the capture/replay proxy).

use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use breakscan_common::mime_for_path;
use url::Url;

use super::script::DriverManifest;

#[derive(Debug, Clone)]
pub enum CorpusSource {
    Directory(PathBuf),
    Network,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawFetch {
    Response {
        final_url: Url,
        status: u16,
        mime: String,
        body: Vec<u8>,
    },
    TimedOut,
    Failed(String),
}

/// Maps a URL path under `root`, refusing `..` escapes.
pub fn safe_join(root: &Path, url_path: &str) -> Option<PathBuf> {
    let mut out = root.to_path_buf();
    let rel = if url_path.ends_with('/') { format!("{url_path}index.html") } else { url_path.to_string() };
    for comp in Path::new(rel.trim_start_matches('/')).components() {
        match comp {
            Component::Normal(c) => out.push(c),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(out)
}

/// Site root of `<label>.<domain>` maps to `/<label>.html`, so one corpus
/// directory can host every fixture site.
pub fn landing_path(host: &str, root: &Path) -> Option<String> {
    let label = host.split('.').next().filter(|l| !l.is_empty())?;
    let candidate = format!("/{label}.html");
    safe_join(root, &candidate).filter(|p| p.is_file()).map(|_| candidate)
}

pub(crate) fn fetch_directory(root: &Path, manifest: &DriverManifest, url: &Url) -> RawFetch {
    if url.path() == "/" {
        if let Some(landing) = url.host_str().and_then(|h| landing_path(h, root)) {
            let mut target = url.clone();
            target.set_path(&landing);
            return fetch_directory(root, manifest, &target);
        }
    }
    let path = url.path();
    if manifest.is_stall_path(path) {
        return RawFetch::TimedOut;
    }
    match safe_join(root, path).map(std::fs::read) {
        Some(Ok(body)) => RawFetch::Response {
            final_url: url.clone(),
            status: 200,
            mime: mime_for_path(path).to_string(),
            body,
        },
        _ => RawFetch::Response {
            final_url: url.clone(),
            status: 404,
            mime: "text/html; charset=utf-8".into(),
            body: b"<html><body><h1>Not Found</h1></body></html>".to_vec(),
        },
    }
}

pub(crate) fn fetch_network(client: &reqwest::blocking::Client, url: &Url, timeout: Duration) -> RawFetch {
    let resp = match client.get(url.as_str()).timeout(timeout).send() {
        Ok(r) => r,
        Err(e) if e.is_timeout() => return RawFetch::TimedOut,
        Err(e) => return RawFetch::Failed(e.to_string()),
    };
    let final_url = resp.url().clone();
    let status = resp.status().as_u16();
    let mime = resp
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_else(|| mime_for_path(final_url.path()))
        .to_string();
    match resp.bytes() {
        Ok(body) => RawFetch::Response {
            final_url,
            status,
            mime,
            body: body.to_vec(),
        },
        Err(e) if e.is_timeout() => RawFetch::TimedOut,
        Err(e) => RawFetch::Failed(e.to_string()),
    }
}

pub(crate) fn http_client(proxy: Option<&str>) -> crate::Result<reqwest::blocking::Client> {
    let mut b = reqwest::blocking::Client::builder().no_proxy();
    if let Some(p) = proxy {
        let p = if p.contains("://") { p.to_string() } else { format!("http://{p}") };
        b = b.proxy(reqwest::Proxy::all(&p).map_err(|e| crate::BridgeError::Session(e.to_string()))?);
    }
    b.build().map_err(|e| crate::BridgeError::Session(e.to_string()))
}
