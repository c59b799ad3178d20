//! Query construction, RSS parsing, time windowing, article text extraction
//! and deduplication. Network access lives in the pipeline crate; everything
//! here operates on bytes and values.

use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use quick_xml::events::Event as XmlEvent;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::Event;

pub const DEFAULT_WINDOW_DAYS: i64 = 31;
pub const DEFAULT_FEED_BASE: &str = "https://news.google.com/rss/search";

/// Thematic search keywords, grouped as public / economic / weather-condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordBank {
    pub public: Vec<String>,
    pub economic: Vec<String>,
    pub weather: Vec<String>,
}

const PUBLIC: &[&str] = &[
    "public", "community", "people", "infrastructure", "society", "impact", "disruption", "affected",
    "resilience", "support", "relief", "aid", "assistance", "emergency", "response", "preparedness",
    "adaptation", "mitigation", "awareness", "engagement", "cooperation", "solidarity", "social",
    "health", "welfare", "equity", "inclusion", "vulnerability", "risk", "protection", "shelter",
    "evacuation", "relocation", "caution", "damage", "evacuation", "injury", "help", "sympathy",
];

const ECONOMIC: &[&str] = &[
    "damage", "loss", "economic", "cost", "impact", "financial", "property", "disaster", "recovery",
    "reconstruction", "insurance", "business", "investment", "job_loss", "economic_growth",
    "market_disruption", "supply_chain", "infrastructure", "resilience", "recovery_funds",
    "economic_development", "employment", "gdp_impact", "financial_aid", "bailout", "debt",
    "bankruptcy", "taxation",
];

const WEATHER: &[&str] = &[
    "dry", "snow", "high temperature", "wind", "thunderstorms", "rain", "winter", "cold", "summer",
    "hot", "lost moisture", "pressure", "water vapor", "sea level pressure", "precipitation",
];

fn owned(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for KeywordBank {
    fn default() -> Self {
        KeywordBank { public: owned(PUBLIC), economic: owned(ECONOMIC), weather: owned(WEATHER) }
    }
}

impl KeywordBank {
    pub fn empty() -> Self {
        KeywordBank { public: vec![], economic: vec![], weather: vec![] }
    }

    pub fn len(&self) -> usize {
        self.public.len() + self.economic.len() + self.weather.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads a TOML bank (`public`, `economic`, `weather` arrays); entries are lowercased.
    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        let mut bank: KeywordBank = toml::from_str(s)?;
        for list in [&mut bank.public, &mut bank.economic, &mut bank.weather] {
            for k in list.iter_mut() {
                *k = k.trim().to_lowercase();
            }
            list.retain(|k| !k.is_empty());
        }
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| IngestError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("event name must be nonempty")]
    EmptyEventName,
    #[error("event country must be nonempty")]
    EmptyCountry,
    #[error("query must be nonempty")]
    EmptyQuery,
    #[error("feed is not RSS/XML: {0}")]
    Format(String),
    #[error("no article text could be extracted from {0}")]
    EmptyBody(String),
    #[error("{0}")]
    Config(String),
}

fn keyword_phrase(k: &str) -> String {
    k.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One query per keyword: `<proxy> <country> <keyword> weather` for public and
/// economic keywords, `<proxy> <country> <keyword>` for weather-condition ones.
/// Deduplicated with first occurrence kept.
pub fn build_queries(event: &Event, bank: &KeywordBank) -> Result<Vec<String>, IngestError> {
    if event.name.trim().is_empty() {
        return Err(IngestError::EmptyEventName);
    }
    if event.country.trim().is_empty() {
        return Err(IngestError::EmptyCountry);
    }
    let proxy = if event.proxy_query_name.trim().is_empty() { &event.name } else { &event.proxy_query_name };
    let prefix = format!("{} {}", proxy.trim(), event.country.trim());
    let anchored = bank.public.iter().chain(&bank.economic).map(|k| (k, true));
    let plain = bank.weather.iter().map(|k| (k, false));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (k, anchor) in anchored.chain(plain) {
        let phrase = keyword_phrase(k);
        if phrase.is_empty() {
            continue;
        }
        let q = if anchor { format!("{prefix} {phrase} weather") } else { format!("{prefix} {phrase}") };
        if seen.insert(q.clone()) {
            out.push(q);
        }
    }
    Ok(out)
}

/// RFC 3986 unreserved characters stay literal; everything else is escaped.
const QUERY_ESCAPE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// `<base>?q=<query>&hl=<locale>&gl=<region>&ceid=<region>:<lang>`.
pub fn feed_url(base: &str, query: &str, locale: &str) -> Result<String, IngestError> {
    if query.trim().is_empty() {
        return Err(IngestError::EmptyQuery);
    }
    let (lang, region) = match locale.split_once('-') {
        Some((l, r)) => (l.to_string(), r.to_string()),
        None => (locale.to_string(), locale.to_ascii_uppercase()),
    };
    Ok(format!(
        "{base}?q={}&hl={locale}&gl={region}&ceid={region}:{lang}",
        utf8_percent_encode(query, QUERY_ESCAPE)
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedItem {
    pub title: String,
    pub link: String,
    pub published: Option<DateTime<Utc>>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeedParse {
    pub items: Vec<FeedItem>,
    /// Items dropped for lacking an absolute link.
    pub skipped: usize,
    /// Items kept without a parseable publication date.
    pub undated: usize,
}

pub fn parse_date(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    DateTime::parse_from_rfc2822(s)
        .or_else(|_| DateTime::parse_from_rfc3339(s))
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

fn is_absolute_url(s: &str) -> bool {
    url::Url::parse(s).map(|u| matches!(u.scheme(), "http" | "https")).unwrap_or(false)
}

#[derive(Default)]
struct PartialItem {
    title: String,
    link: String,
    pub_date: String,
    description: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Title,
    Link,
    PubDate,
    Description,
    Other,
}

/// Parses RSS 2.0 `<item>` elements. Items without an absolute link are
/// skipped and counted; items without a readable `pubDate` are kept with
/// `published = None`.
pub fn parse_feed(bytes: &[u8]) -> Result<FeedParse, IngestError> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut out = FeedParse::default();
    let mut saw_root = false;
    let mut item: Option<PartialItem> = None;
    let mut field = Field::Other;
    // nesting depth inside the current field element
    let mut field_depth = 0usize;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| IngestError::Format(format!("at byte {}: {e}", reader.buffer_position())))?;
        match ev {
            XmlEvent::Start(e) => {
                let name = e.local_name();
                let name = name.as_ref();
                if !saw_root {
                    if name == b"rss" || name == b"channel" || name == b"RDF" {
                        saw_root = true;
                    } else {
                        return Err(IngestError::Format(format!(
                            "unexpected root element <{}>",
                            String::from_utf8_lossy(name)
                        )));
                    }
                }
                if item.is_some() {
                    if field_depth > 0 {
                        field_depth += 1;
                    } else {
                        field = match name {
                            b"title" => Field::Title,
                            b"link" => Field::Link,
                            b"pubDate" | b"date" => Field::PubDate,
                            b"description" => Field::Description,
                            _ => Field::Other,
                        };
                        field_depth = 1;
                    }
                } else if name == b"item" {
                    item = Some(PartialItem::default());
                    field = Field::Other;
                    field_depth = 0;
                }
            }
            XmlEvent::End(e) => {
                if item.is_some() && field_depth > 0 {
                    field_depth -= 1;
                    if field_depth == 0 {
                        field = Field::Other;
                    }
                } else if e.local_name().as_ref() == b"item" {
                    if let Some(p) = item.take() {
                        finish_item(p, &mut out);
                    }
                }
            }
            XmlEvent::Empty(e) => {
                if !saw_root {
                    return Err(IngestError::Format("document has no RSS root".into()));
                }
                let _ = e;
            }
            XmlEvent::Text(t) => {
                if let Some(p) = item.as_mut() {
                    let text = t.unescape().map(|c| c.into_owned()).unwrap_or_else(|_| {
                        String::from_utf8_lossy(&t).into_owned()
                    });
                    push_field(p, field, &text);
                } else if !saw_root && !t.iter().all(u8::is_ascii_whitespace) {
                    return Err(IngestError::Format("text before root element".into()));
                }
            }
            XmlEvent::CData(c) => {
                if let Some(p) = item.as_mut() {
                    push_field(p, field, &String::from_utf8_lossy(&c));
                }
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !saw_root {
        return Err(IngestError::Format("document has no RSS root".into()));
    }
    Ok(out)
}

fn push_field(p: &mut PartialItem, field: Field, text: &str) {
    let target = match field {
        Field::Title => &mut p.title,
        Field::Link => &mut p.link,
        Field::PubDate => &mut p.pub_date,
        Field::Description => &mut p.description,
        Field::Other => return,
    };
    target.push_str(text);
}

fn finish_item(p: PartialItem, out: &mut FeedParse) {
    let link = p.link.trim().to_string();
    if !is_absolute_url(&link) {
        out.skipped += 1;
        return;
    }
    let published = parse_date(&p.pub_date);
    if published.is_none() {
        out.undated += 1;
    }
    out.items.push(FeedItem {
        title: p.title.trim().to_string(),
        link,
        published,
        description: p.description.trim().to_string(),
    });
}

/// Whether `published` falls within `half_width_days` calendar days of the
/// event date (inclusive). Unknown timestamps are outside every window.
pub fn within_window(published: Option<DateTime<Utc>>, event_date: NaiveDate, half_width_days: i64) -> bool {
    match published {
        Some(ts) => (ts.date_naive() - event_date).num_days().abs() <= half_width_days,
        None => false,
    }
}

/// One extracted news article, as stored in the per-event corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub url: String,
    pub title: String,
    pub body: String,
    pub published: Option<DateTime<Utc>>,
    pub event: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPage {
    pub title: Option<String>,
    pub body: String,
}

const SKIP_CONTENT: &[&str] = &[
    "script", "style", "noscript", "nav", "header", "footer", "aside", "form", "svg", "iframe", "template",
    "button", "select",
];
const BLOCK: &[&str] = &[
    "p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "section", "article", "main",
    "blockquote", "table", "tr", "td", "th", "figure", "figcaption", "body", "pre", "dd", "dt",
];

/// Minimum characters for a text block to count as article prose.
const MIN_BLOCK_CHARS: usize = 40;

struct Tag<'a> {
    name: String,
    closing: bool,
    self_closing: bool,
    raw: &'a str,
}

/// Splits HTML into text and tags. Only ASCII bytes are used as cut points,
/// so every slice lands on a char boundary.
fn tokenize_html(html: &str) -> Vec<Result<Tag<'_>, &str>> {
    let bytes = html.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut text_start = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            if html[i..].starts_with("<!--") {
                if text_start < i {
                    out.push(Err(&html[text_start..i]));
                }
                let end = html[i + 4..].find("-->").map(|p| i + 4 + p + 3).unwrap_or(bytes.len());
                i = end;
                text_start = i;
                continue;
            }
            let next = bytes.get(i + 1).copied().unwrap_or(b' ');
            if next.is_ascii_alphabetic() || next == b'/' || next == b'!' || next == b'?' {
                if let Some(rel) = html[i..].find('>') {
                    if text_start < i {
                        out.push(Err(&html[text_start..i]));
                    }
                    let raw = &html[i..i + rel + 1];
                    let inner = raw[1..raw.len() - 1].trim();
                    let closing = inner.starts_with('/');
                    let self_closing = inner.ends_with('/');
                    let name: String = inner
                        .trim_start_matches('/')
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric())
                        .collect::<String>()
                        .to_ascii_lowercase();
                    out.push(Ok(Tag { name, closing, self_closing, raw }));
                    i += rel + 1;
                    text_start = i;
                    continue;
                }
            }
        }
        i += 1;
    }
    if text_start < bytes.len() {
        out.push(Err(&html[text_start..]));
    }
    out
}

/// Decodes the handful of entities that matter for news prose.
pub fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let semi = tail.find(';').filter(|&p| p <= 10);
        let decoded = semi.and_then(|p| {
            let ent = &tail[1..p];
            let ch = match ent {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" | "#39" => Some('\''),
                "nbsp" => Some(' '),
                "rsquo" | "lsquo" => Some('\''),
                "rdquo" | "ldquo" => Some('"'),
                "mdash" | "ndash" => Some('-'),
                "hellip" => Some('…'),
                _ if ent.starts_with("#x") || ent.starts_with("#X") => {
                    u32::from_str_radix(&ent[2..], 16).ok().and_then(char::from_u32)
                }
                _ if ent.starts_with('#') => ent[1..].parse::<u32>().ok().and_then(char::from_u32),
                _ => None,
            };
            ch.map(|c| (c, p))
        });
        match decoded {
            Some((c, p)) => {
                out.push(c);
                rest = &tail[p + 1..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Strips markup and boilerplate from a page.
///
/// When the page has an `<article>` element its blocks form the body;
/// otherwise the largest contiguous run of prose blocks wins. A run breaks at
/// two consecutive short blocks (menus, bylines, share widgets).
pub fn extract_page(html: &str) -> ExtractedPage {
    let tokens = tokenize_html(html);
    let mut title: Option<String> = None;
    let mut in_title = false;
    let mut skip: Vec<String> = Vec::new();
    let mut article_depth = 0usize;
    let mut saw_article = false;
    let mut blocks: Vec<(String, bool)> = Vec::new();
    let mut current = String::new();
    let mut current_in_article = false;

    let flush = |current: &mut String, in_article: bool, blocks: &mut Vec<(String, bool)>| {
        let text = collapse_ws(&decode_entities(current));
        if !text.is_empty() {
            blocks.push((text, in_article));
        }
        current.clear();
    };

    for tok in tokens {
        match tok {
            Ok(tag) => {
                if tag.raw.starts_with("<!") || tag.raw.starts_with("<?") {
                    continue;
                }
                let name = tag.name.as_str();
                if !skip.is_empty() {
                    if tag.closing && skip.last().map(String::as_str) == Some(name) {
                        skip.pop();
                    } else if !tag.closing && !tag.self_closing && SKIP_CONTENT.contains(&name) {
                        skip.push(tag.name.clone());
                    }
                    continue;
                }
                if name == "title" {
                    in_title = !tag.closing;
                    continue;
                }
                if SKIP_CONTENT.contains(&name) && !tag.closing && !tag.self_closing {
                    flush(&mut current, current_in_article, &mut blocks);
                    skip.push(tag.name.clone());
                    continue;
                }
                if BLOCK.contains(&name) {
                    flush(&mut current, current_in_article, &mut blocks);
                }
                if name == "article" {
                    if tag.closing {
                        article_depth = article_depth.saturating_sub(1);
                    } else if !tag.self_closing {
                        article_depth += 1;
                        saw_article = true;
                    }
                }
                current_in_article = article_depth > 0;
            }
            Err(text) => {
                if !skip.is_empty() {
                    continue;
                }
                if in_title {
                    let t = collapse_ws(&decode_entities(text));
                    if !t.is_empty() && title.is_none() {
                        title = Some(t);
                    }
                    continue;
                }
                if current.is_empty() {
                    current_in_article = article_depth > 0;
                }
                current.push_str(text);
                current.push(' ');
            }
        }
    }
    flush(&mut current, current_in_article, &mut blocks);

    let body_blocks: Vec<&str> = if saw_article && blocks.iter().any(|(_, a)| *a) {
        blocks.iter().filter(|(_, a)| *a).map(|(t, _)| t.as_str()).collect()
    } else {
        largest_run(&blocks.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>())
    };
    ExtractedPage { title, body: body_blocks.join("\n\n") }
}

fn largest_run<'a>(blocks: &[&'a str]) -> Vec<&'a str> {
    let mut best: (usize, usize, usize) = (0, 0, 0); // (chars, start, end)
    let mut start = 0;
    while start < blocks.len() {
        if blocks[start].chars().count() < MIN_BLOCK_CHARS {
            start += 1;
            continue;
        }
        let mut end = start;
        let mut shorts = 0;
        let mut last_long = start;
        while end < blocks.len() {
            if blocks[end].chars().count() < MIN_BLOCK_CHARS {
                shorts += 1;
                if shorts >= 2 {
                    break;
                }
            } else {
                shorts = 0;
                last_long = end;
            }
            end += 1;
        }
        let total: usize = blocks[start..=last_long].iter().map(|b| b.chars().count()).sum();
        if total > best.0 {
            best = (total, start, last_long + 1);
        }
        start = last_long + 1;
    }
    blocks[best.1..best.2].to_vec()
}

fn title_key(title: &str) -> String {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drops repeats by URL and by (normalized title, publication day); keeps
/// the first occurrence. Undated articles only dedupe by URL.
pub fn dedupe(articles: Vec<Article>) -> Vec<Article> {
    let mut urls = HashSet::new();
    let mut title_days = HashSet::new();
    articles
        .into_iter()
        .filter(|a| {
            if !urls.insert(a.url.clone()) {
                return false;
            }
            match a.published {
                Some(ts) => {
                    let key = title_key(&a.title);
                    key.is_empty() || title_days.insert((key, ts.date_naive()))
                }
                None => true,
            }
        })
        .collect()
}
