use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::pin::Pin;
use std::sync::Arc;

use breakscan_bridge::fixture::{landing_path, safe_join};
use breakscan_common::mime_for_path;
use bytes::Bytes;
use http::header::{CONTENT_TYPE, HOST, LOCATION};
use http::{Request, Response, StatusCode};
use http_body_util::Full;
use hyper::body::Incoming;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use tokio::net::TcpListener;

use crate::Result;

const NOT_FOUND: &str = "<!doctype html><html><head><title>404 Not Found</title></head><body><h1>Not Found</h1></body></html>";

/// Static server for a fixture corpus. Host `<label>.<anything>` has its
/// root redirected to `/<label>.html`; paths under a stall prefix never
/// answer.
pub struct CorpusServer {
    addr: SocketAddr,
    runtime: Option<tokio::runtime::Runtime>,
}

struct Site {
    root: PathBuf,
    stall_prefixes: Vec<String>,
}

impl CorpusServer {
    pub fn start(root: &Path, listen: SocketAddr, stall_prefixes: &[&str]) -> Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = runtime.block_on(TcpListener::bind(listen))?;
        let addr = listener.local_addr()?;
        let site = Arc::new(Site {
            root: root.to_path_buf(),
            stall_prefixes: stall_prefixes.iter().map(|s| s.to_string()).collect(),
        });
        runtime.spawn(async move {
            loop {
                let Ok((stream, _)) = listener.accept().await else { continue };
                let site = site.clone();
                tokio::spawn(async move {
                    let svc = service_fn(move |r| respond(site.clone(), r));
                    let _ = http1::Builder::new().serve_connection(TokioIo::new(stream), svc).await;
                });
            }
        });
        Ok(Self {
            addr,
            runtime: Some(runtime),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
    }
}

impl Drop for CorpusServer {
    fn drop(&mut self) {
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
    }
}

fn respond(
    site: Arc<Site>,
    req: Request<Incoming>,
) -> Pin<Box<dyn Future<Output = std::result::Result<Response<Full<Bytes>>, std::io::Error>> + Send>> {
    Box::pin(async move {
        let path = req.uri().path().to_string();
        if site.stall_prefixes.iter().any(|p| path.starts_with(p.as_str())) {
            std::future::pending::<()>().await;
        }
        let host = req
            .headers()
            .get(HOST)
            .and_then(|h| h.to_str().ok())
            .or_else(|| req.uri().host())
            .unwrap_or_default()
            .split(':')
            .next()
            .unwrap_or_default()
            .to_string();
        if path == "/" {
            if let Some(landing) = landing_path(&host, &site.root) {
                let mut r = Response::new(Full::new(Bytes::new()));
                *r.status_mut() = StatusCode::FOUND;
                r.headers_mut().insert(LOCATION, landing.parse().unwrap());
                return Ok(r);
            }
        }
        let file = safe_join(&site.root, &path).filter(|p| p.is_file());
        let (status, mime, body) = match file.map(std::fs::read) {
            Some(Ok(bytes)) => (StatusCode::OK, mime_for_path(&path), bytes),
            _ => (StatusCode::NOT_FOUND, "text/html; charset=utf-8", NOT_FOUND.as_bytes().to_vec()),
        };
        let mut r = Response::new(Full::new(Bytes::from(body)));
        *r.status_mut() = status;
        r.headers_mut().insert(CONTENT_TYPE, mime.parse().unwrap());
        Ok(r)
    })
}
