use std::path::PathBuf;

use breakscan_filters::{load_list, CompiledFilterSet, Decision, ListFormat, RequestContext, ResourceType, RuleKind};

fn list(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../lists").join(name)
}

#[test]
fn vendored_easylist_parses_and_compiles() {
    let rules = load_list(&list("easylist.txt"), ListFormat::Adblock).unwrap();
    assert!(rules.len() > 70_000, "{}", rules.len());
    let set = CompiledFilterSet::compile(rules);
    let st = set.stats();
    assert_eq!(st.total, st.block + st.exception + st.comment + st.cosmetic + st.invalid + st.unsupported_exception);
    assert!(st.cosmetic + st.invalid > 0);
    assert!(st.cosmetic > 10_000, "{st:?}");
    assert!(st.block > 5_000, "{st:?}");

    let ad = RequestContext::new("http://pagead2.googlesyndication.com/pagead/show_ads.js", "news.example.com", ResourceType::Script).unwrap();
    assert_eq!(set.match_request(&ad).decision, Decision::Blocked);
    let benign = RequestContext::new("https://news.example.com/static/app.js", "news.example.com", ResourceType::Script).unwrap();
    assert_eq!(set.match_request(&benign).decision, Decision::NoMatch);
}

#[test]
fn vendored_easyprivacy_parses() {
    let rules = load_list(&list("easyprivacy.txt"), ListFormat::Adblock).unwrap();
    assert!(rules.iter().any(|r| r.kind == RuleKind::Exception));
    let set = CompiledFilterSet::compile(rules);
    let ga = RequestContext::new("https://www.google-analytics.com/analytics.js", "shop.example.com", ResourceType::Script).unwrap();
    assert_eq!(set.match_request(&ga).decision, Decision::Blocked);
}
