//! Seeded generator of EasyList rules and request URLs drawn from a shared
//! vocabulary so that a realistic fraction of requests hit some rule.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HOSTS: [&str; 10] = [
    "ads.example.com",
    "example.com",
    "static.example.com",
    "cdn.site.net",
    "site.net",
    "tracker.org",
    "pix.tracker.org",
    "news.example.co.uk",
    "example.co.uk",
    "adserver.net",
];

const PATH_PIECES: [&str; 14] = [
    "ads", "banner", "img", "track", "pixel", "js", "ad_frame", "pop-up", "x.gif", "Banner", "v1", "adv%20x", "static", "a.b",
];

pub const TYPES: [&str; 7] = ["script", "image", "media", "stylesheet", "xmlhttprequest", "subdocument", "other"];

pub struct Request {
    pub url: String,
    pub origin: String,
    pub resource_type: &'static str,
}

fn pattern(rng: &mut ChaCha8Rng) -> String {
    let mut p = String::new();
    match rng.random_range(0..10) {
        0..=3 => {
            p.push_str("||");
            p.push_str(HOSTS.choose(rng).unwrap());
            if rng.random_bool(0.6) {
                p.push('^');
            }
        }
        4 => {
            p.push('|');
            p.push_str(if rng.random_bool(0.5) { "http://" } else { "https://" });
            p.push_str(HOSTS.choose(rng).unwrap());
        }
        _ => {}
    }
    let pieces = rng.random_range(if p.is_empty() { 1 } else { 0 }..3);
    for i in 0..pieces {
        if i > 0 || !p.is_empty() || rng.random_bool(0.5) {
            p.push_str(["/", "^", "*", "/", "*/"].choose(rng).unwrap());
        }
        p.push_str(PATH_PIECES.choose(rng).unwrap());
    }
    match rng.random_range(0..8) {
        0 => p.push('^'),
        1 => p.push('|'),
        2 => p.push('*'),
        _ => {}
    }
    p
}

fn options(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut opts = Vec::new();
    if rng.random_bool(0.3) {
        let n = rng.random_range(1..3);
        let neg = rng.random_bool(0.3);
        let mut chosen: Vec<&str> = TYPES.choose_multiple(rng, n).copied().collect();
        chosen.sort();
        for t in chosen {
            opts.push(if neg { format!("~{t}") } else { t.to_string() });
        }
    }
    match rng.random_range(0..6) {
        0 => opts.push("third-party".into()),
        1 => opts.push("~third-party".into()),
        _ => {}
    }
    if rng.random_bool(0.2) {
        let inc = HOSTS.choose(rng).unwrap();
        let mut d = inc.to_string();
        if rng.random_bool(0.4) {
            let sub = HOSTS.iter().find(|h| h.ends_with(&format!(".{inc}"))).copied();
            match sub {
                Some(s) => d.push_str(&format!("|~{s}")),
                None => d = format!("~{inc}"),
            }
        }
        opts.push(format!("domain={d}"));
    }
    if rng.random_bool(0.05) {
        opts.push("match-case".into());
    }
    opts
}

/// `count` rules, roughly a fifth of them exceptions.
pub fn generate_rules(seed: u64, count: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut r = String::new();
            if rng.random_bool(0.2) {
                r.push_str("@@");
            }
            r.push_str(&pattern(&mut rng));
            let opts = options(&mut rng);
            if !opts.is_empty() {
                r.push('$');
                r.push_str(&opts.join(","));
            }
            r
        })
        .collect()
}

pub fn generate_requests(seed: u64, count: usize) -> Vec<Request> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..count)
        .map(|_| {
            let host = HOSTS.choose(&mut rng).unwrap();
            let sub = if rng.random_bool(0.2) { "www." } else { "" };
            let scheme = if rng.random_bool(0.5) { "http" } else { "https" };
            let mut url = format!("{scheme}://{sub}{host}");
            if rng.random_bool(0.1) {
                url.push_str(":8080");
            }
            for _ in 0..rng.random_range(0..4) {
                url.push('/');
                url.push_str(PATH_PIECES.choose(&mut rng).unwrap());
            }
            if rng.random_bool(0.3) {
                url.push('/');
            }
            if rng.random_bool(0.3) {
                url.push_str(&format!("?{}={}", PATH_PIECES.choose(&mut rng).unwrap(), rng.random_range(0..100)));
            }
            if rng.random_bool(0.1) {
                url.push_str("#frag");
            }
            Request {
                url,
                origin: HOSTS.choose(&mut rng).unwrap().to_string(),
                resource_type: TYPES.choose(&mut rng).unwrap(),
            }
        })
        .collect()
}
