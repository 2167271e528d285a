//! WebDriver client against a minimal in-process endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use breakscan_bridge::webdriver::WebDriverFactory;
use breakscan_bridge::{BridgeError, BrowserSession, DriverMode, ElementCategory, NavResult, SessionConfig};
use serde_json::{json, Value};

type Seen = Arc<Mutex<Vec<(String, String, Value)>>>;

fn respond(method: &str, path: &str, body: &Value) -> Value {
    let v = match (method, path) {
        ("POST", "/session") => json!({"sessionId": "s1", "capabilities": {}}),
        ("POST", "/session/s1/url") => Value::Null,
        ("GET", "/session/s1/url") => json!("http://site.test/"),
        ("POST", "/session/s1/execute/sync") => {
            let script = body["script"].as_str().unwrap_or_default();
            if script.contains("responseStatus") {
                json!(200)
            } else if script.contains("querySelectorAll(q[cat])") {
                json!([["/html/body/button", "Go"]])
            } else {
                Value::Null
            }
        }
        ("POST", "/session/s1/se/log") => {
            json!([{"level": "SEVERE", "message": "http://site.test/ 404", "timestamp": 7}])
        }
        ("POST", "/session/s1/element") => json!({"error": "no such element", "message": "gone"}),
        _ => Value::Null,
    };
    json!({ "value": v })
}

fn serve(listener: TcpListener, seen: Seen) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        let seen = seen.clone();
        thread::spawn(move || handle(stream, seen));
    }
}

fn handle(stream: TcpStream, seen: Seen) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut stream = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut parts = line.split_whitespace();
        let method = parts.next().unwrap_or_default().to_string();
        let path = parts.next().unwrap_or_default().to_string();
        let mut len = 0;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h).unwrap();
            if h == "\r\n" || h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut buf = vec![0; len];
        reader.read_exact(&mut buf).unwrap();
        let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
        let out = respond(&method, &path, &body).to_string();
        seen.lock().unwrap().push((method, path, body));
        write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{out}",
            out.len()
        )
        .unwrap();
    }
}

fn endpoint() -> (String, Seen) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen: Seen = Arc::default();
    let s = seen.clone();
    thread::spawn(move || serve(listener, s));
    (format!("http://{addr}"), seen)
}

#[test]
fn session_round_trip() {
    let (url, seen) = endpoint();
    let cfg = SessionConfig::new(DriverMode::Live).with_proxy("127.0.0.1:9999").with_timeout(2_000);
    let mut s = WebDriverFactory::new(url).open(&cfg).unwrap();
    let nav = s.navigate("http://site.test/", 2_000);
    assert_eq!((nav.result, nav.http_status), (NavResult::Loaded, Some(200)));
    let targets = s.locate_elements(ElementCategory::Button).unwrap();
    assert_eq!(targets[0].xpath, "/html/body/button");
    assert_eq!(targets[0].display_text, "Go");
    let log = s.console_log().unwrap();
    assert_eq!(log[0].timestamp, 7);
    assert!(matches!(s.screenshot(Some(&targets[0])), Err(BridgeError::StaleTarget(_))));
    Box::new(s).close().unwrap();

    let seen = seen.lock().unwrap();
    let (_, _, caps) = seen.iter().find(|(m, p, _)| m == "POST" && p == "/session").unwrap();
    let args = &caps["capabilities"]["alwaysMatch"]["goog:chromeOptions"]["args"];
    assert!(args.as_array().unwrap().iter().any(|a| a == "--proxy-server=http://127.0.0.1:9999"));
    assert!(seen.iter().any(|(m, p, b)| m == "POST" && p == "/session/s1/url" && b["url"] == "http://site.test/"));
    assert!(seen.iter().any(|(m, p, _)| m == "DELETE" && p == "/session/s1"));
}

#[test]
fn endpoint_down_is_session_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = WebDriverFactory::new(format!("http://127.0.0.1:{port}"))
        .open(&SessionConfig::new(DriverMode::Live))
        .err()
        .unwrap();
    assert!(matches!(err, BridgeError::Session(_)));
}
