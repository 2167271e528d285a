use std::path::Path;

use breakscan_bridge::{BrowserSession, NavigationOutcome, SessionConfig, SessionFactory};

use crate::archive::ReplayArchive;
use crate::proxy::{ProxyConfig, ProxyHandle, ProxyMode, VisitCapture};
use crate::Result;

/// Landing page, scrolled to the bottom, then up to `inner_pages` of its
/// same-site links (longest first), each scrolled too. Returns the landing
/// navigation outcome.
pub fn scripted_visit(session: &mut dyn BrowserSession, site_url: &str, timeout_ms: u64, inner_pages: usize) -> NavigationOutcome {
    let nav = session.navigate(site_url, timeout_ms);
    if !nav.loaded() {
        return nav;
    }
    let _ = session.scroll_to_bottom();
    let inner: Vec<String> = session.collect_anchors().unwrap_or_default().into_iter().take(inner_pages).collect();
    for url in inner {
        if session.navigate(&url, timeout_ms).loaded() {
            let _ = session.scroll_to_bottom();
        }
    }
    nav
}

/// Records one scripted visit of `site_url` into `archive_dir` through a
/// proxy started from `proxy`. The archive is marked unreachable when the
/// main document could not be fetched.
pub fn record_site(
    factory: &dyn SessionFactory,
    session: &SessionConfig,
    proxy: ProxyConfig,
    archive_dir: &Path,
    site_url: &str,
    inner_pages: usize,
) -> Result<(ReplayArchive, VisitCapture)> {
    let archive = ReplayArchive::create(archive_dir, site_url)?;
    let handle = ProxyHandle::start(ProxyConfig { mode: ProxyMode::Record, ..proxy }, archive)?;
    let cfg = session.clone().with_proxy(handle.endpoint());
    let nav = match factory.open_session(&cfg) {
        Ok(mut s) => {
            let nav = scripted_visit(s.as_mut(), site_url, cfg.page_load_timeout_ms, inner_pages);
            let _ = s.close();
            Some(nav)
        }
        Err(e) => {
            tracing::warn!(site_url, "session failed: {e}");
            None
        }
    };
    let capture = handle.take_visit();
    let mut archive = handle.shutdown()?;
    archive.meta.settings.insert("inner_pages".into(), inner_pages.to_string());
    archive.meta.settings.insert("page_load_timeout_ms".into(), cfg.page_load_timeout_ms.to_string());
    archive.meta.unreachable = match (&capture.main_failure, &nav) {
        (Some(reason), _) => Some(reason.clone()),
        (None, None) => Some("browser session could not be opened".into()),
        (None, Some(n)) if !capture.stats.main_document_served => Some(format!("main document never served ({:?})", n.result)),
        _ => None,
    };
    archive.save()?;
    Ok((archive, capture))
}
