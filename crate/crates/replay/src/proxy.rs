use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::pin::Pin;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use breakscan_bridge::webdriver::CaptureLookup;
use breakscan_capture::ResourceRecord;
use breakscan_common::{canonical_key, canonicalize_url, VolatileParams};
use bytes::Bytes;
use http::header::{HeaderName, CONTENT_TYPE, HOST};
use http::{Method, Request, Response, StatusCode};
use http_body_util::{BodyExt, Full};
use hyper::body::Incoming;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio_rustls::TlsAcceptor;

use crate::archive::ReplayArchive;
use crate::tls::InterceptionCa;
use crate::{ReplayError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissPolicy {
    #[serde(rename = "404")]
    NotFound,
    Close,
    /// Hold the connection open until the client gives up.
    Stall,
}

impl FromStr for MissPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "404" => Ok(Self::NotFound),
            "close" => Ok(Self::Close),
            "stall" => Ok(Self::Stall),
            other => Err(format!("unknown miss policy {other:?} (expected 404, close or stall)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyMode {
    Record,
    Replay(MissPolicy),
}

#[derive(Debug, Clone)]
pub struct ProxyConfig {
    pub mode: ProxyMode,
    pub listen: SocketAddr,
    /// Sends every upstream request as plain HTTP to this address, keeping
    /// the original Host header. Used to record local corpora under their
    /// public host names.
    pub upstream_override: Option<SocketAddr>,
    pub upstream_timeout: Duration,
    pub volatile: VolatileParams,
}

impl ProxyConfig {
    pub fn new(mode: ProxyMode) -> Self {
        Self {
            mode,
            listen: SocketAddr::from(([127, 0, 0, 1], 0)),
            upstream_override: None,
            upstream_timeout: Duration::from_secs(5),
            volatile: VolatileParams::default(),
        }
    }

    pub fn with_port(mut self, port: u16) -> Self {
        self.listen.set_port(port);
        self
    }

    pub fn with_upstream_override(mut self, addr: Option<SocketAddr>) -> Self {
        self.upstream_override = addr;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub served: u64,
    pub misses: u64,
    pub missed_keys: Vec<String>,
    /// Whether the first request of the visit was answered.
    pub main_document_served: bool,
}

/// Everything the proxy saw during one visit.
#[derive(Debug, Clone, Default)]
pub struct VisitCapture {
    pub stats: ReplayStats,
    pub records: Vec<ResourceRecord>,
    /// Upstream error for the first request, in record mode.
    pub main_failure: Option<String>,
}

#[derive(Default)]
struct Visit {
    capture: VisitCapture,
    started: bool,
    /// Redirect target the main document is still waiting on.
    main_pending: Option<String>,
    bodies: HashMap<String, (u16, Bytes)>,
}

impl Visit {
    /// The main document is the first request plus any redirects it leads
    /// to; it counts as served only if the end of that chain was.
    fn track_main(&mut self, url: &str, status: u16, location: Option<&str>, served: bool) -> bool {
        let first = !self.started;
        self.started = true;
        let canonical = canonicalize_url(url).ok();
        if !first && (self.main_pending.is_none() || self.main_pending != canonical) {
            return false;
        }
        self.capture.stats.main_document_served = served;
        self.main_pending = match location {
            Some(loc) if served && (300..400).contains(&status) => url::Url::parse(url)
                .and_then(|base| base.join(loc))
                .ok()
                .and_then(|u| canonicalize_url(u.as_str()).ok()),
            _ => None,
        };
        true
    }
}

struct Shared {
    config: ProxyConfig,
    archive: RwLock<ReplayArchive>,
    visit: Mutex<Visit>,
    ca: InterceptionCa,
    upstream: reqwest::Client,
}

type Reply = std::result::Result<Response<Full<Bytes>>, io::Error>;

const HOP_BY_HOP: [&str; 9] = [
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "proxy-connection",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
];

fn skip_header(name: &str) -> bool {
    HOP_BY_HOP.contains(&name) || name == "content-length"
}

fn plain(status: StatusCode, text: &str) -> Response<Full<Bytes>> {
    let mut r = Response::new(Full::new(Bytes::from(text.to_string())));
    *r.status_mut() = status;
    r.headers_mut().insert(CONTENT_TYPE, "text/plain; charset=utf-8".parse().unwrap());
    r
}

impl Shared {
    #[allow(clippy::too_many_arguments)]
    fn note(&self, method: &str, url: &str, status: u16, headers: &[(String, String)], body: &Bytes, served: bool, key: &str) {
        let mut v = self.visit.lock().unwrap();
        let location = header_value(headers, "location");
        v.track_main(url, status, (!location.is_empty()).then_some(location.as_str()), served);
        let mime = header_value(headers, "content-type");
        if served {
            v.capture.stats.served += 1;
        } else {
            v.capture.stats.misses += 1;
            v.capture.stats.missed_keys.push(key.to_string());
        }
        if served || status != 0 {
            if let Ok(rec) = ResourceRecord::new(method, url, status, &mime, body, &self.config.volatile) {
                v.capture.records.push(rec);
            }
            if let Ok(u) = canonicalize_url(url) {
                v.bodies.insert(u, (status, body.clone()));
            }
        }
    }

    fn note_failure(&self, url: &str, key: &str, reason: String) {
        let mut v = self.visit.lock().unwrap();
        if v.track_main(url, 0, None, false) {
            v.capture.main_failure = Some(reason);
        }
        v.capture.stats.misses += 1;
        v.capture.stats.missed_keys.push(key.to_string());
    }
}

fn handle(shared: Arc<Shared>, req: Request<Incoming>, base: Option<Arc<str>>) -> Pin<Box<dyn Future<Output = Reply> + Send>> {
    Box::pin(async move {
        if req.method() == Method::CONNECT {
            return Ok(connect(shared, req));
        }
        let url = match &base {
            Some(b) => format!("{b}{}", req.uri().path_and_query().map(|p| p.as_str()).unwrap_or("/")),
            None if req.uri().scheme().is_some() => req.uri().to_string(),
            None => return Ok(plain(StatusCode::BAD_REQUEST, "proxy requests need an absolute URI")),
        };
        let method = req.method().as_str().to_string();
        let Ok(key) = canonical_key(&method, &url, &shared.config.volatile) else {
            return Ok(plain(StatusCode::BAD_REQUEST, "unsupported URL"));
        };
        match shared.config.mode {
            ProxyMode::Record => record(shared, req, url, method, key).await,
            ProxyMode::Replay(policy) => replay(shared, url, method, key, policy).await,
        }
    })
}

async fn record(shared: Arc<Shared>, req: Request<Incoming>, url: String, method: String, key: String) -> Reply {
    let (parts, body) = req.into_parts();
    let body = body.collect().await.map(|b| b.to_bytes()).unwrap_or_default();
    let authority = parts
        .uri
        .authority()
        .map(|a| a.to_string())
        .or_else(|| url.split("://").nth(1).and_then(|r| r.split('/').next()).map(String::from))
        .unwrap_or_default();
    let target = match shared.config.upstream_override {
        Some(addr) => {
            let path = url.splitn(4, '/').nth(3).unwrap_or("");
            format!("http://{addr}/{path}")
        }
        None => url.clone(),
    };
    let mut up = shared.upstream.request(parts.method.clone(), &target).timeout(shared.config.upstream_timeout);
    for (name, value) in parts.headers.iter() {
        let n = name.as_str();
        if !skip_header(n) && name != HOST {
            up = up.header(name, value);
        }
    }
    up = up.header(HOST, authority);
    if !body.is_empty() {
        up = up.body(body);
    }
    let resp = match up.send().await {
        Ok(r) => r,
        Err(e) => {
            shared.note_failure(&url, &key, e.to_string());
            return Ok(plain(StatusCode::BAD_GATEWAY, &format!("upstream error: {e}")));
        }
    };
    let status = resp.status();
    let headers: Vec<(String, String)> = resp
        .headers()
        .iter()
        .filter(|(n, _)| !skip_header(n.as_str()))
        .filter_map(|(n, v)| Some((n.as_str().to_string(), v.to_str().ok()?.to_string())))
        .collect();
    let bytes = match resp.bytes().await {
        Ok(b) => b,
        Err(e) => {
            shared.note_failure(&url, &key, e.to_string());
            return Ok(plain(StatusCode::BAD_GATEWAY, &format!("upstream error: {e}")));
        }
    };
    {
        let mut archive = shared.archive.write().unwrap();
        if let Err(e) = archive.insert(&key, &url, status.as_u16(), headers.clone(), &bytes) {
            tracing::warn!(%key, "archive write failed: {e}");
        }
    }
    shared.note(&method, &url, status.as_u16(), &headers, &bytes, true, &key);
    Ok(build(status.as_u16(), &headers, bytes))
}

async fn replay(shared: Arc<Shared>, url: String, method: String, key: String, policy: MissPolicy) -> Reply {
    let hit = {
        let archive = shared.archive.read().unwrap();
        archive.get(&key).cloned().map(|e| {
            let body = archive.body(&e).map(Bytes::from);
            (e, body)
        })
    };
    match hit {
        Some((entry, Ok(body))) => {
            shared.note(&method, &url, entry.status, &entry.headers, &body, true, &key);
            Ok(build(entry.status, &entry.headers, body))
        }
        Some((_, Err(e))) => {
            tracing::warn!(%key, "archive body unreadable: {e}");
            miss(shared, url, method, key, policy).await
        }
        None => miss(shared, url, method, key, policy).await,
    }
}

async fn miss(shared: Arc<Shared>, url: String, method: String, key: String, policy: MissPolicy) -> Reply {
    match policy {
        MissPolicy::NotFound => {
            let body = Bytes::from_static(b"not in archive");
            let headers = [("content-type".to_string(), "text/plain".to_string())];
            shared.note(&method, &url, 404, &headers, &body, false, &key);
            Ok(plain(StatusCode::NOT_FOUND, "not in archive"))
        }
        MissPolicy::Close => {
            shared.note(&method, &url, 0, &[], &Bytes::new(), false, &key);
            Err(io::Error::new(io::ErrorKind::ConnectionAborted, "miss"))
        }
        MissPolicy::Stall => {
            shared.note(&method, &url, 0, &[], &Bytes::new(), false, &key);
            std::future::pending::<()>().await;
            unreachable!()
        }
    }
}

fn header_value(headers: &[(String, String)], name: &str) -> String {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.clone())
        .unwrap_or_default()
}

fn build(status: u16, headers: &[(String, String)], body: Bytes) -> Response<Full<Bytes>> {
    let mut r = Response::new(Full::new(body));
    *r.status_mut() = StatusCode::from_u16(status).unwrap_or(StatusCode::BAD_GATEWAY);
    for (n, v) in headers {
        if let (Ok(n), Ok(v)) = (HeaderName::from_bytes(n.as_bytes()), v.parse()) {
            r.headers_mut().append(n, v);
        }
    }
    r
}

fn connect(shared: Arc<Shared>, req: Request<Incoming>) -> Response<Full<Bytes>> {
    let Some(authority) = req.uri().authority().cloned() else {
        return plain(StatusCode::BAD_REQUEST, "CONNECT needs host:port");
    };
    let host = authority.host().to_string();
    let config = match shared.ca.server_config(&host) {
        Ok(c) => c,
        Err(e) => return plain(StatusCode::BAD_GATEWAY, &e.to_string()),
    };
    let base: Arc<str> = match authority.port_u16() {
        None | Some(443) => format!("https://{host}").into(),
        Some(p) => format!("https://{host}:{p}").into(),
    };
    tokio::spawn(async move {
        let upgraded = match hyper::upgrade::on(req).await {
            Ok(u) => u,
            Err(e) => return tracing::debug!("upgrade failed: {e}"),
        };
        let tls = match TlsAcceptor::from(config).accept(TokioIo::new(upgraded)).await {
            Ok(t) => t,
            Err(e) => return tracing::debug!(%host, "tls accept failed: {e}"),
        };
        let svc = service_fn(move |r| handle(shared.clone(), r, Some(base.clone())));
        if let Err(e) = http1::Builder::new().serve_connection(TokioIo::new(tls), svc).await {
            tracing::debug!("intercepted connection ended: {e}");
        }
    });
    Response::new(Full::new(Bytes::new()))
}

async fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    loop {
        let Ok((stream, _)) = listener.accept().await else { continue };
        let shared = shared.clone();
        tokio::spawn(async move {
            let svc = service_fn(move |r| handle(shared.clone(), r, None));
            if let Err(e) = http1::Builder::new().serve_connection(TokioIo::new(stream), svc).with_upgrades().await {
                tracing::debug!("connection ended: {e}");
            }
        });
    }
}

/// A running proxy. Methods are blocking; the server runs on its own
/// runtime until `shutdown`.
pub struct ProxyHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    runtime: Option<tokio::runtime::Runtime>,
}

impl ProxyHandle {
    pub fn start(config: ProxyConfig, archive: ReplayArchive) -> Result<Self> {
        if let ProxyMode::Replay(_) = config.mode {
            if archive.is_empty() {
                return Err(ReplayError::EmptyArchive(archive.dir().display().to_string()));
            }
        }
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let upstream = reqwest::Client::builder()
            .no_proxy()
            .redirect(reqwest::redirect::Policy::none())
            .build()
            .map_err(|e| ReplayError::Upstream(e.to_string()))?;
        let listener = runtime.block_on(TcpListener::bind(config.listen))?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            config,
            archive: RwLock::new(archive),
            visit: Mutex::new(Visit::default()),
            ca: InterceptionCa::generate()?,
            upstream,
        });
        runtime.spawn(accept_loop(listener, shared.clone()));
        Ok(Self {
            addr,
            shared,
            runtime: Some(runtime),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `host:port` for browser proxy settings.
    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    pub fn ca_pem(&self) -> String {
        self.shared.ca.ca_pem()
    }

    pub fn spki_pin(&self) -> String {
        self.shared.ca.spki_pin()
    }

    pub fn stats(&self) -> ReplayStats {
        self.shared.visit.lock().unwrap().capture.stats.clone()
    }

    /// Returns what was seen since the previous call and starts a new visit.
    pub fn take_visit(&self) -> VisitCapture {
        std::mem::take(&mut *self.shared.visit.lock().unwrap()).capture
    }

    pub fn lookup(&self) -> Arc<dyn CaptureLookup> {
        Arc::new(Lookup(self.shared.clone()))
    }

    /// Stops serving, dropping stalled connections, and hands back the
    /// archive, saved to disk in record mode.
    pub fn shutdown(mut self) -> Result<ReplayArchive> {
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
        let archive = self.shared.archive.read().unwrap().clone();
        if self.shared.config.mode == ProxyMode::Record {
            archive.save()?;
        }
        Ok(archive)
    }
}

impl Drop for ProxyHandle {
    fn drop(&mut self) {
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
    }
}

struct Lookup(Arc<Shared>);

impl CaptureLookup for Lookup {
    fn main_status(&self, url: &str) -> Option<u16> {
        let u = canonicalize_url(url).ok()?;
        self.0.visit.lock().unwrap().bodies.get(&u).map(|(s, _)| *s)
    }

    fn body_text(&self, url: &str) -> Option<String> {
        let u = canonicalize_url(url).ok()?;
        let v = self.0.visit.lock().unwrap();
        v.bodies.get(&u).map(|(_, b)| String::from_utf8_lossy(b).into_owned())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn main_document_follows_redirects() {
        let mut v = Visit::default();
        assert!(v.track_main("http://a.test/", 302, Some("/home.html"), true));
        assert!(v.capture.stats.main_document_served);
        assert!(!v.track_main("http://a.test/style.css", 200, None, true));
        assert!(v.track_main("http://a.test/home.html", 404, None, false));
        assert!(!v.capture.stats.main_document_served);
        assert!(!v.track_main("http://a.test/home.html", 200, None, true));
        assert!(!v.capture.stats.main_document_served);
    }

    #[test]
    fn miss_policy_names() {
        assert_eq!("404".parse::<MissPolicy>().unwrap(), MissPolicy::NotFound);
        assert_eq!("stall".parse::<MissPolicy>().unwrap(), MissPolicy::Stall);
        assert!("drop".parse::<MissPolicy>().is_err());
    }
}
