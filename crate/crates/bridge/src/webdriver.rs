//! Live sessions over the W3C WebDriver HTTP protocol (chromedriver).

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};

use crate::dom::{Dom, NodeId, NodeKind};
use crate::snapshot::DomSnapshot;
use crate::{
    same_site_anchors, BridgeError, BrowserSession, DriverMode, ElementCategory, FrameSource, InteractionOutcome,
    InteractionTarget, LogEntry, NavResult, NavigationOutcome, Result, SessionConfig, SessionFactory,
};

/// What the capture proxy saw; the protocol itself does not expose the
/// main-document status or the markup of frames it cannot enter.
pub trait CaptureLookup: Send + Sync {
    fn main_status(&self, url: &str) -> Option<u16>;
    fn body_text(&self, url: &str) -> Option<String>;
}

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecc";

const XPATH_JS: &str = r#"
function xp(el) {
  const segs = [];
  for (let n = el; n && n.nodeType === 1; n = n.parentElement) {
    const name = n.localName;
    let idx = 1, count = 0;
    const sibs = n.parentElement ? n.parentElement.children : [n];
    for (const s of sibs) { if (s.localName === name) { count++; if (s === n) idx = count; } }
    segs.unshift(count > 1 ? name + '[' + idx + ']' : name);
  }
  return '/' + segs.join('/');
}
function hidden(el) {
  for (let n = el; n && n.nodeType === 1; n = n.parentElement) { if (n.hasAttribute('hidden')) return true; }
  return el.getClientRects().length === 0;
}
"#;

const LOCATE_JS: &str = r#"
const cat = arguments[0];
const q = {
  button: 'button, input[type=submit], input[type=button], [role=button]',
  link: 'a[href]',
  dropdown: 'select, details > summary, [aria-expanded]',
  input: 'input:not([type]), input[type=text], input[type=search], input[type=email]',
};
let els;
if (cat === 'login') {
  els = [];
  for (const pw of document.querySelectorAll('input[type=password]')) {
    els.push(pw);
    const f = pw.form || pw.closest('form');
    if (f) for (const s of f.querySelectorAll('button:not([type]), button[type=submit], input[type=submit], input[type=image]')) els.push(s);
  }
  els = [...new Set(els)].sort((a, b) => a.compareDocumentPosition(b) & 4 ? -1 : 1);
} else {
  els = [...document.querySelectorAll(q[cat])];
  if (cat === 'link') els = els.filter(e => e.getAttribute('href').trim() !== '');
}
return els.filter(e => e.namespaceURI === 'http://www.w3.org/1999/xhtml' && !hidden(e))
  .map(e => [xp(e), (e.innerText || e.textContent || '').replace(/\s+/g, ' ').trim()]);
"#;

const TREE_JS: &str = r#"
const r = document.evaluate(arguments[0], document, null, XPathResult.FIRST_ORDERED_NODE_TYPE, null).singleNodeValue;
if (!r) return null;
let root = r;
for (let i = 0; i < arguments[1] && root.parentElement; i++) root = root.parentElement;
function tree(n) {
  if (n.nodeType === 3) return n.nodeValue;
  if (n.nodeType !== 1) return null;
  const attrs = [...n.attributes].map(a => [a.name, a.value]);
  const kids = n.localName === 'template' ? n.content.childNodes : n.childNodes;
  return [n.localName, attrs, [...kids].map(tree).filter(c => c !== null)];
}
return tree(root);
"#;

const SCROLL_JS: &str = r#"
window.scrollBy(0, window.innerHeight);
const h = Math.max(document.documentElement.scrollHeight, document.body ? document.body.scrollHeight : 0);
return [window.scrollY + window.innerHeight, h];
"#;

const HEIGHT_JS: &str =
    "return Math.max(document.documentElement.scrollHeight, document.body ? document.body.scrollHeight : 0);";

const NAV_STATUS_JS: &str = r#"
const e = performance.getEntriesByType('navigation')[0];
return e && e.responseStatus ? e.responseStatus : null;
"#;

/// Connects to a WebDriver endpoint such as `http://127.0.0.1:9515`.
pub struct WebDriverFactory {
    endpoint: String,
    browser_binary: Option<String>,
    /// Base64-encoded extension packages, keyed by blocker id.
    extensions: Vec<(String, String)>,
    spki_pins: Vec<String>,
    capture: Option<Arc<dyn CaptureLookup>>,
}

impl WebDriverFactory {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            browser_binary: None,
            extensions: Vec::new(),
            spki_pins: Vec::new(),
            capture: None,
        }
    }

    pub fn with_browser_binary(mut self, path: impl Into<String>) -> Self {
        self.browser_binary = Some(path.into());
        self
    }

    /// Installs the packed extension `crx` whenever a session's blocker id
    /// equals `blocker_id`.
    pub fn with_extension(mut self, blocker_id: impl Into<String>, crx: &[u8]) -> Self {
        self.extensions
            .push((blocker_id.into(), base64::engine::general_purpose::STANDARD.encode(crx)));
        self
    }

    /// SPKI hash of the interception certificate the proxy presents.
    pub fn with_spki_pin(mut self, pin: impl Into<String>) -> Self {
        self.spki_pins.push(pin.into());
        self
    }

    pub fn with_capture(mut self, capture: Arc<dyn CaptureLookup>) -> Self {
        self.capture = Some(capture);
        self
    }

    pub fn capabilities(&self, cfg: &SessionConfig) -> Value {
        let mut args = vec!["--no-first-run".to_string(), "--disable-dev-shm-usage".to_string()];
        if cfg.headless_display {
            args.push("--headless=new".into());
        }
        if let Some(p) = &cfg.proxy_endpoint {
            args.push(format!("--proxy-server=http://{p}"));
            args.push("--proxy-bypass-list=<-loopback>".into());
        }
        if !self.spki_pins.is_empty() {
            args.push(format!("--ignore-certificate-errors-spki-list={}", self.spki_pins.join(",")));
        }
        let mut chrome = json!({ "args": args });
        if let Some(bin) = &self.browser_binary {
            chrome["binary"] = json!(bin);
        }
        if let Some(b) = &cfg.blocker {
            let crx: Vec<&String> = self.extensions.iter().filter(|(id, _)| *id == b.id).map(|(_, c)| c).collect();
            if !crx.is_empty() {
                chrome["extensions"] = json!(crx);
            }
        }
        json!({
            "capabilities": {
                "alwaysMatch": {
                    "browserName": "chrome",
                    "pageLoadStrategy": "normal",
                    "acceptInsecureCerts": true,
                    "timeouts": { "pageLoad": cfg.page_load_timeout_ms, "script": 30_000 },
                    "goog:chromeOptions": chrome,
                    "goog:loggingPrefs": { "browser": "ALL" },
                }
            }
        })
    }

    pub fn open(&self, cfg: &SessionConfig) -> Result<WebDriverSession> {
        cfg.validate()?;
        if cfg.mode != DriverMode::Live {
            return Err(BridgeError::Session("webdriver factory needs mode=live".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .no_proxy()
            .timeout(Duration::from_millis(cfg.page_load_timeout_ms + 30_000))
            .build()
            .map_err(|e| BridgeError::Session(e.to_string()))?;
        let resp = http
            .post(format!("{}/session", self.endpoint))
            .json(&self.capabilities(cfg))
            .send()
            .map_err(|e| BridgeError::Session(format!("webdriver endpoint {}: {e}", self.endpoint)))?;
        let body: Value = resp.json().map_err(|e| BridgeError::Session(e.to_string()))?;
        let value = unwrap_value(body).map_err(|e| BridgeError::Session(e.to_string()))?;
        let id = value["sessionId"]
            .as_str()
            .ok_or_else(|| BridgeError::Protocol("new session response without sessionId".into()))?
            .to_string();
        Ok(WebDriverSession {
            http,
            base: format!("{}/session/{id}", self.endpoint),
            cfg: cfg.clone(),
            capture: self.capture.clone(),
            url: None,
        })
    }
}

impl SessionFactory for WebDriverFactory {
    fn open_session(&self, cfg: &SessionConfig) -> Result<Box<dyn BrowserSession>> {
        Ok(Box::new(self.open(cfg)?))
    }
}

#[derive(Debug)]
struct WdError {
    error: String,
    message: String,
}

impl std::fmt::Display for WdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.error, self.message)
    }
}

fn unwrap_value(body: Value) -> std::result::Result<Value, WdError> {
    let value = body.get("value").cloned().unwrap_or(Value::Null);
    if let Some(err) = value.get("error").and_then(Value::as_str) {
        return Err(WdError {
            error: err.to_string(),
            message: value["message"].as_str().unwrap_or_default().to_string(),
        });
    }
    Ok(value)
}

pub struct WebDriverSession {
    http: reqwest::blocking::Client,
    base: String,
    cfg: SessionConfig,
    capture: Option<Arc<dyn CaptureLookup>>,
    url: Option<String>,
}

impl WebDriverSession {
    fn call(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> Result<std::result::Result<Value, WdError>> {
        let mut req = self.http.request(method.clone(), format!("{}{path}", self.base));
        if method != reqwest::Method::GET && method != reqwest::Method::DELETE {
            req = req.json(&body.unwrap_or_else(|| json!({})));
        }
        let resp = req.send().map_err(|e| BridgeError::Protocol(e.to_string()))?;
        let body: Value = resp.json().map_err(|e| BridgeError::Protocol(e.to_string()))?;
        Ok(unwrap_value(body))
    }

    fn ok(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> Result<Value> {
        self.call(method, path, body)?.map_err(|e| BridgeError::Protocol(e.to_string()))
    }

    fn exec(&self, script: &str, args: Value) -> Result<Value> {
        self.ok(reqwest::Method::POST, "/execute/sync", Some(json!({ "script": script, "args": args })))
    }

    fn find_xpath(&self, xpath: &str) -> Result<Option<String>> {
        match self.call(reqwest::Method::POST, "/element", Some(json!({ "using": "xpath", "value": xpath })))? {
            Ok(v) => Ok(v[ELEMENT_KEY].as_str().map(str::to_string)),
            Err(e) if e.error == "no such element" => Ok(None),
            Err(e) => Err(BridgeError::Protocol(e.to_string())),
        }
    }

    fn page_url(&self) -> Result<String> {
        Ok(self.ok(reqwest::Method::GET, "/url", None)?.as_str().unwrap_or_default().to_string())
    }

    fn main_status(&self, url: &str) -> Option<u16> {
        if let Some(s) = self.capture.as_ref().and_then(|c| c.main_status(url)) {
            return Some(s);
        }
        self.exec(NAV_STATUS_JS, json!([])).ok()?.as_u64().map(|s| s as u16)
    }

    fn frames_rec(&self, path: Vec<usize>, out: &mut Vec<FrameSource>) -> Result<()> {
        let url = self.exec("return location.href;", json!([]))?.as_str().unwrap_or_default().to_string();
        let source = self.ok(reqwest::Method::GET, "/source", None)?.as_str().unwrap_or_default().to_string();
        out.push(FrameSource {
            frame_path: path.clone(),
            url,
            source_text: source,
            accessible: true,
        });
        let srcs = self.exec(
            "return [...document.querySelectorAll('iframe,frame')].map(f => f.src);",
            json!([]),
        )?;
        let srcs: Vec<String> = srcs
            .as_array()
            .map(|a| a.iter().map(|v| v.as_str().unwrap_or_default().to_string()).collect())
            .unwrap_or_default();
        for (i, src) in srcs.into_iter().enumerate() {
            let mut child = path.clone();
            child.push(i);
            match self.call(reqwest::Method::POST, "/frame", Some(json!({ "id": i })))? {
                Ok(_) => {
                    let res = self.frames_rec(child.clone(), out);
                    self.ok(reqwest::Method::POST, "/frame/parent", None)?;
                    res?;
                }
                Err(_) => {
                    let fallback = self.capture.as_ref().and_then(|c| c.body_text(&src));
                    out.push(FrameSource {
                        frame_path: child,
                        url: src,
                        accessible: fallback.is_some(),
                        source_text: fallback.unwrap_or_default(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Builds a [`Dom`] from the `[name, attrs, children]` tree returned by the
/// in-page serializer and returns the root element.
fn dom_from_tree(tree: &Value) -> Option<(Dom, NodeId)> {
    let mut dom = Dom::parse("");
    let holder = dom.body()?;
    fn walk(dom: &mut Dom, parent: NodeId, v: &Value) {
        match v {
            Value::String(t) => {
                dom.append_text(parent, t);
            }
            Value::Array(parts) if parts.len() == 3 => {
                let name = parts[0].as_str().unwrap_or("unknown");
                let attrs: Vec<(String, String)> = parts[1]
                    .as_array()
                    .map(|a| {
                        a.iter()
                            .filter_map(|kv| Some((kv.get(0)?.as_str()?.to_string(), kv.get(1)?.as_str()?.to_string())))
                            .collect()
                    })
                    .unwrap_or_default();
                let id = dom.append_element(parent, name, attrs);
                for c in parts[2].as_array().into_iter().flatten() {
                    walk(dom, id, c);
                }
            }
            _ => {}
        }
    }
    walk(&mut dom, holder, tree);
    let root = *dom.children(holder).first()?;
    matches!(dom.kind(root), NodeKind::Element(_)).then_some((dom, root))
}

fn path_of(url: &str) -> String {
    url::Url::parse(url).map(|u| format!("{}{}", u.host_str().unwrap_or_default(), u.path())).unwrap_or_default()
}

impl BrowserSession for WebDriverSession {
    fn navigate(&mut self, url: &str, timeout_ms: u64) -> NavigationOutcome {
        let start = Instant::now();
        let _ = self.call(reqwest::Method::POST, "/timeouts", Some(json!({ "pageLoad": timeout_ms })));
        let res = self.call(reqwest::Method::POST, "/url", Some(json!({ "url": url })));
        let elapsed = start.elapsed().as_millis() as u64;
        let final_url = self.page_url().unwrap_or_else(|_| url.to_string());
        self.url = Some(final_url.clone());
        let result = match res {
            Err(_) => NavResult::ConnectionError,
            Ok(Ok(_)) => NavResult::Loaded,
            Ok(Err(e)) if e.error == "timeout" => NavResult::Timeout,
            Ok(Err(e)) if e.message.contains("crash") => NavResult::Crashed,
            Ok(Err(_)) => NavResult::ConnectionError,
        };
        let status = match result {
            NavResult::Loaded | NavResult::Timeout => self.main_status(&final_url).or_else(|| self.main_status(url)),
            _ => None,
        };
        let result = match (result, status) {
            (NavResult::Loaded, None | Some(0)) => NavResult::ConnectionError,
            (r, _) => r,
        };
        NavigationOutcome {
            final_url,
            http_status: status.filter(|s| *s > 0),
            load_time_ms: elapsed.min(timeout_ms),
            result,
        }
    }

    fn current_url(&self) -> Option<String> {
        self.url.clone()
    }

    fn enumerate_frames(&mut self) -> Result<Vec<FrameSource>> {
        self.ok(reqwest::Method::POST, "/frame", Some(json!({ "id": null })))?;
        let mut out = Vec::new();
        self.frames_rec(Vec::new(), &mut out)?;
        Ok(out)
    }

    fn collect_anchors(&mut self) -> Result<Vec<String>> {
        let hrefs = self.exec(
            "return [...document.querySelectorAll('a[href]')].map(a => a.getAttribute('href'));",
            json!([]),
        )?;
        let page = self.page_url()?;
        let hrefs: Vec<&str> = hrefs.as_array().into_iter().flatten().filter_map(Value::as_str).collect();
        Ok(same_site_anchors(&page, hrefs))
    }

    fn locate_elements(&mut self, category: ElementCategory) -> Result<Vec<InteractionTarget>> {
        let found = self.exec(&format!("{XPATH_JS}{LOCATE_JS}"), json!([category.as_str()]))?;
        Ok(found
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|pair| {
                Some(InteractionTarget {
                    category,
                    xpath: pair.get(0)?.as_str()?.to_string(),
                    display_text: pair.get(1)?.as_str()?.to_string(),
                    stable: false,
                })
            })
            .collect())
    }

    fn snapshot_subtree(&mut self, target: &InteractionTarget, depth: usize) -> Result<DomSnapshot> {
        let tree = self.exec(TREE_JS, json!([target.xpath, depth]))?;
        let (dom, root) = dom_from_tree(&tree).ok_or_else(|| BridgeError::StaleTarget(target.xpath.clone()))?;
        Ok(DomSnapshot {
            target_xpath: target.xpath.clone(),
            depth,
            serialized: dom.normalized(root),
        })
    }

    fn interact(&mut self, target: &InteractionTarget) -> Result<InteractionOutcome> {
        let Some(el) = self.find_xpath(&target.xpath)? else {
            return Ok(InteractionOutcome::Stale);
        };
        let before = self.page_url()?;
        let typing = target.category == ElementCategory::Input
            || self
                .exec(
                    "const e = arguments[0]; return e.localName === 'textarea' || (e.localName === 'input' && !['submit','button','image','checkbox','radio','reset'].includes(e.type));",
                    json!([{ ELEMENT_KEY: el }]),
                )?
                .as_bool()
                .unwrap_or(false);
        let res = if typing {
            self.call(reqwest::Method::POST, &format!("/element/{el}/click"), None)?.and_then(|_| {
                self.call(reqwest::Method::POST, &format!("/element/{el}/value"), Some(json!({ "text": "a" })))
                    .unwrap_or_else(|e| Err(WdError { error: "unknown error".into(), message: e.to_string() }))
            })
        } else {
            self.call(reqwest::Method::POST, &format!("/element/{el}/click"), None)?
        };
        match res {
            Err(e) if e.error == "element click intercepted" => return Ok(InteractionOutcome::Intercepted),
            Err(e) if e.error == "stale element reference" || e.error == "no such element" => {
                return Ok(InteractionOutcome::Stale)
            }
            Err(e) if e.error == "element not interactable" => return Ok(InteractionOutcome::Intercepted),
            Err(e) => return Err(BridgeError::Protocol(e.to_string())),
            Ok(_) => {}
        }
        thread::sleep(Duration::from_millis(self.cfg.settle_ms));
        let after = self.page_url()?;
        self.url = Some(after.clone());
        Ok(if path_of(&after) != path_of(&before) {
            InteractionOutcome::NavigatedAway
        } else {
            InteractionOutcome::Clicked
        })
    }

    fn console_log(&mut self) -> Result<Vec<LogEntry>> {
        let v = self.ok(reqwest::Method::POST, "/se/log", Some(json!({ "type": "browser" })))?;
        Ok(v.as_array()
            .into_iter()
            .flatten()
            .map(|e| LogEntry {
                level: e["level"].as_str().unwrap_or_default().to_string(),
                text: e["message"].as_str().unwrap_or_default().to_string(),
                timestamp: e["timestamp"].as_u64().unwrap_or_default(),
            })
            .collect())
    }

    fn screenshot(&mut self, region: Option<&InteractionTarget>) -> Result<Vec<u8>> {
        let path = match region {
            Some(t) => {
                let el = self.find_xpath(&t.xpath)?.ok_or_else(|| BridgeError::StaleTarget(t.xpath.clone()))?;
                format!("/element/{el}/screenshot")
            }
            None => "/screenshot".to_string(),
        };
        let b64 = self.ok(reqwest::Method::GET, &path, None)?;
        base64::engine::general_purpose::STANDARD
            .decode(b64.as_str().unwrap_or_default())
            .map_err(|e| BridgeError::Protocol(e.to_string()))
    }

    fn scroll_to_bottom(&mut self) -> Result<usize> {
        let cap = self.cfg.scroll_step_cap.max(1);
        let mut steps = 0;
        while steps < cap {
            steps += 1;
            let v = self.exec(SCROLL_JS, json!([]))?;
            thread::sleep(Duration::from_millis(self.cfg.scroll_dwell_ms));
            let reached = v[0].as_f64().unwrap_or(0.0);
            let height = v[1].as_f64().unwrap_or(0.0);
            if reached + 1.0 >= height {
                let now = self.exec(HEIGHT_JS, json!([]))?.as_f64().unwrap_or(0.0);
                if now <= height {
                    break;
                }
            }
        }
        Ok(steps)
    }

    fn close(self: Box<Self>) -> Result<()> {
        self.http
            .delete(self.base.clone())
            .send()
            .map_err(|e| BridgeError::Protocol(e.to_string()))?;
        Ok(())
    }
}
