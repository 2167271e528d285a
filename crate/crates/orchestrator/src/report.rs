use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use breakscan_detectors::{BreakageFinding, Category};
use serde::{Deserialize, Serialize};

/// Report columns: group, subcategory, heading.
pub const COLUMNS: [(Category, &str, &str); 10] = [
    (Category::ExtensionDetection, "disable_prompt", "Disable Prompt"),
    (Category::HtmlElement, "button", "Buttons"),
    (Category::HtmlElement, "link", "Links"),
    (Category::HtmlElement, "login", "Login"),
    (Category::HtmlElement, "dropdown", "Drop Downs"),
    (Category::HtmlElement, "input", "Input"),
    (Category::Resource, "image", "Images"),
    (Category::Resource, "video", "Videos"),
    (Category::Crash, "page_crash", "Page Crashes"),
    (Category::Unresponsive, "unresponsive", "Count"),
];

fn group_heading(c: Category) -> &'static str {
    match c {
        Category::ExtensionDetection => "Extension Detection",
        Category::HtmlElement => "HTML Elements",
        Category::Resource => "Resources",
        Category::Crash => "Crashes",
        Category::Unresponsive => "Unresponsiveness",
    }
}

/// Sites for which each (blocker, category) protocol completed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestedCounts {
    /// Row order.
    pub blockers: Vec<String>,
    pub tested: BTreeMap<String, BTreeMap<Category, u64>>,
}

impl TestedCounts {
    pub fn new(blockers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            blockers: blockers.into_iter().map(Into::into).collect(),
            tested: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, blocker: &str, category: Category, n: u64) {
        *self.tested.entry(blocker.to_string()).or_default().entry(category).or_default() += n;
    }

    pub fn get(&self, blocker: &str, category: Category) -> u64 {
        self.tested.get(blocker).and_then(|m| m.get(&category)).copied().unwrap_or(0)
    }
}

/// Percentage in basis points, rounded half up.
pub fn basis_points(count: u64, tested: u64) -> u64 {
    if tested == 0 {
        return 0;
    }
    (count * 20_000 + tested) / (2 * tested)
}

/// `count (pct%)` with two decimals, e.g. `25 (1.67%)`.
pub fn format_cell(count: u64, tested: u64) -> String {
    let bp = basis_points(count, tested);
    format!("{count} ({}.{:02}%)", bp / 100, bp % 100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub category: Category,
    pub subcategory: String,
    pub count: u64,
    pub tested: u64,
    pub percent: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub blocker: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub rows: Vec<ReportRow>,
}

/// Counts distinct sites per (blocker, subcategory); the denominator is the
/// number of sites tested for that blocker and category.
pub fn build_report(findings: &[BreakageFinding], tested: &TestedCounts) -> CampaignReport {
    let mut sites: BTreeMap<(&str, Category, &str), BTreeSet<&str>> = BTreeMap::new();
    for f in findings {
        sites.entry((&f.blocker_id, f.category, &f.subcategory)).or_default().insert(&f.site);
    }
    let mut blockers = tested.blockers.clone();
    for b in tested.tested.keys().map(String::as_str).chain(findings.iter().map(|f| f.blocker_id.as_str())) {
        if !blockers.iter().any(|x| x == b) {
            blockers.push(b.to_string());
        }
    }
    let rows = blockers
        .into_iter()
        .map(|blocker| {
            let cells = COLUMNS
                .iter()
                .map(|&(category, sub, _)| {
                    let count = sites.get(&(blocker.as_str(), category, sub)).map_or(0, |s| s.len() as u64);
                    let n = tested.get(&blocker, category);
                    Cell {
                        category,
                        subcategory: sub.to_string(),
                        count,
                        tested: n,
                        percent: basis_points(count, n) as f64 / 100.0,
                        text: format_cell(count, n),
                    }
                })
                .collect();
            ReportRow { blocker, cells }
        })
        .collect();
    CampaignReport { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" | "text" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown report format {s:?} (table|csv|json)")),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_report(report: &CampaignReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Csv => {
            let mut out = String::from("blocker");
            for (c, sub, _) in COLUMNS {
                out.push_str(&format!(",{}/{sub}", c.as_str()));
            }
            out.push('\n');
            for row in &report.rows {
                out.push_str(&csv_field(&row.blocker));
                for cell in &row.cells {
                    out.push(',');
                    out.push_str(&csv_field(&cell.text));
                }
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => render_table(report),
    }
}

fn render_table(report: &CampaignReport) -> String {
    let mut groups = vec![String::new()];
    let mut heads = vec!["Blocker".to_string()];
    let mut last = None;
    for (c, _, label) in COLUMNS {
        groups.push(if last == Some(c) { String::new() } else { group_heading(c).to_string() });
        last = Some(c);
        heads.push(label.to_string());
    }
    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| std::iter::once(r.blocker.clone()).chain(r.cells.iter().map(|c| c.text.clone())).collect())
        .collect();
    let widths: Vec<usize> = (0..heads.len())
        .map(|i| {
            std::iter::once(&groups[i])
                .chain(std::iter::once(&heads[i]))
                .chain(body.iter().map(|r| &r[i]))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join(" | ").trim_end().to_string() + "\n"
    };
    let mut out = line(&groups);
    out.push_str(&line(&heads));
    out.push_str(&(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-") + "\n"));
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use breakscan_detectors::{Confidence, Evidence, FindingContext};

    #[test]
    fn cell_format() {
        assert_eq!(format_cell(25, 1500), "25 (1.67%)");
        assert_eq!(format_cell(3, 1000), "3 (0.30%)");
        assert_eq!(format_cell(76, 600), "76 (12.67%)");
        assert_eq!(format_cell(0, 0), "0 (0.00%)");
        assert_eq!(format_cell(0, 300), "0 (0.00%)");
        assert_eq!(format_cell(1, 8), "1 (12.50%)");
        assert_eq!(format_cell(1, 3), "1 (33.33%)");
        assert_eq!(format_cell(2, 3), "2 (66.67%)");
        assert_eq!(format_cell(1000, 1000), "1000 (100.00%)");
    }

    fn finding(site: &str, blocker: &str, cat: Category, sub: &str) -> BreakageFinding {
        let ctx = FindingContext::new(site, format!("http://{site}/"), blocker);
        let ev = vec![Evidence::LogExcerpt {
            level: "INFO".into(),
            text: "x".into(),
        }];
        BreakageFinding::new(&ctx, cat, sub, ev, Confidence::Automatic).unwrap()
    }

    #[test]
    fn counts_distinct_sites_over_category_denominator() {
        let mut tested = TestedCounts::new(["abp", "ubo"]);
        tested.add("abp", Category::HtmlElement, 300);
        tested.add("abp", Category::Unresponsive, 1000);
        let findings = vec![
            finding("a.com", "abp", Category::HtmlElement, "button"),
            finding("a.com", "abp", Category::HtmlElement, "button"),
            finding("b.com", "abp", Category::HtmlElement, "button"),
            finding("b.com", "abp", Category::Unresponsive, "unresponsive"),
        ];
        let r = build_report(&findings, &tested);
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].cells[1].text, "2 (0.67%)");
        assert_eq!(r.rows[0].cells[9].text, "1 (0.10%)");
        assert!(r.rows[1].cells.iter().all(|c| c.text == "0 (0.00%)"));
        let csv = render_report(&r, ReportFormat::Csv);
        assert!(csv.starts_with("blocker,extension_detection/disable_prompt,html_element/button"));
        assert!(csv.contains("abp,0 (0.00%),2 (0.67%)"));
        let table = render_report(&r, ReportFormat::Table);
        assert!(table.contains("Drop Downs") && table.contains("Unresponsiveness"));
        let json: CampaignReport = serde_json::from_str(&render_report(&r, ReportFormat::Json)).unwrap();
        assert_eq!(json, r);
    }

    #[test]
    fn empty_report_is_all_zero() {
        let r = build_report(&[], &TestedCounts::new(["x"]));
        assert!(r.rows[0].cells.iter().all(|c| c.text == "0 (0.00%)"));
        assert!(build_report(&[], &TestedCounts::default()).rows.is_empty());
    }
}
