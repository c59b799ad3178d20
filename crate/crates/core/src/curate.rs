//! Sentence curation: segmentation, length filtering and gazetteer-based
//! location matching.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::event::Event;
use crate::ingest::Article;

pub const MIN_SENTENCE_CHARS: usize = 30;
pub const MAX_SENTENCE_CHARS: usize = 200;

/// Tokens ending in a period that never close a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "u.s.", "u.k.", "u.n.", "e.u.", "u.s.a.", "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "mt.", "jr.", "sr.",
    "gen.", "gov.", "sen.", "rep.", "lt.", "col.", "capt.", "sgt.", "inc.", "ltd.", "corp.", "co.", "no.",
    "vs.", "e.g.", "i.e.", "approx.", "dept.", "jan.", "feb.", "aug.", "sept.", "oct.", "nov.", "dec.",
    "a.m.", "p.m.",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub name: String,
    pub country_code: String,
    pub admin1_code: String,
    pub admin2_code: String,
}

/// One location mention found in a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerHit {
    /// Text as it appears in the sentence.
    pub surface: String,
    /// Registered name (or the event country).
    pub name: String,
    pub country_code: String,
    #[serde(default)]
    pub admin1_code: String,
    #[serde(default)]
    pub admin2_code: String,
}

/// A curated sentence, as stored in the sentences file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    #[serde(rename = "url")]
    pub source_url: String,
    #[serde(rename = "event")]
    pub event_ref: String,
    #[serde(rename = "locations")]
    pub matched_locations: Vec<GazetteerHit>,
}

impl Sentence {
    /// Stable identifier derived from the text; groups the samples of one sentence.
    pub fn id(&self) -> String {
        sentence_id(&self.text)
    }
}

pub fn sentence_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationReport {
    pub articles_in: usize,
    pub sentences_segmented: usize,
    pub dropped_short: usize,
    pub dropped_long: usize,
    pub dropped_no_location: usize,
    pub kept: usize,
}

impl CurationReport {
    pub fn reconciles(&self) -> bool {
        self.kept + self.dropped_short + self.dropped_long + self.dropped_no_location == self.sentences_segmented
    }

    pub fn merge(&mut self, other: &CurationReport) {
        self.articles_in += other.articles_in;
        self.sentences_segmented += other.sentences_segmented;
        self.dropped_short += other.dropped_short;
        self.dropped_long += other.dropped_long;
        self.dropped_no_location += other.dropped_no_location;
        self.kept += other.kept;
    }
}

fn is_closing_punct(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '»')
}

fn is_opening_punct(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '“' | '‘' | '«')
}

fn guarded(prefix: &str) -> bool {
    let token = prefix.rsplit(char::is_whitespace).next().unwrap_or("");
    let token = token.trim_start_matches(is_opening_punct).to_lowercase();
    if ABBREVIATIONS.contains(&token.as_str()) {
        return true;
    }
    // single initials such as "J."
    let mut chars = token.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(a), Some('.'), None) if a.is_alphabetic())
}

/// Splits on `.`, `!` or `?` (plus any closing quotes) followed by whitespace
/// and an uppercase letter or digit, or by end of text. Periods ending a
/// guarded abbreviation do not split.
pub fn segment_sentences(body: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || is_closing_punct(chars[j].1)) {
                j += 1;
            }
            let end_byte = chars.get(j).map(|&(p, _)| p).unwrap_or(body.len());
            let boundary = if j >= chars.len() {
                true
            } else if chars[j].1.is_whitespace() {
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                while k < chars.len() && is_opening_punct(chars[k].1) {
                    k += 1;
                }
                k >= chars.len() || chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit()
            } else {
                false
            };
            if boundary && !(c == '.' && guarded(&body[start..pos + 1])) {
                let s = body[start..end_byte].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                start = end_byte;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    let tail = body[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Inclusive character-length bounds.
pub fn length_filter(s: &str) -> bool {
    (MIN_SENTENCE_CHARS..=MAX_SENTENCE_CHARS).contains(&s.chars().count())
}

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("reading gazetteer {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gazetteer line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Word-normalized lookup key: lowercase alphanumeric runs joined by one space.
fn words(s: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(st) = start.take() {
            out.push((st, i));
        }
    }
    if let Some(st) = start {
        out.push((st, s.len()));
    }
    out
}

fn normalize_name(s: &str) -> String {
    words(s).iter().map(|&(a, b)| s[a..b].to_lowercase()).collect::<Vec<_>>().join(" ")
}

/// Place names with admin codes, indexed per country.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    // country code → normalized name → entry indices (file order)
    by_country: HashMap<String, HashMap<String, Vec<usize>>>,
    max_words: usize,
}

impl Gazetteer {
    /// Parses tab-separated `name, country_code, admin1_code[, admin2_code]`
    /// rows. Blank lines, `#` comments and a leading `name\t…` header are ignored.
    pub fn parse(text: &str) -> Result<Self, GazetteerError> {
        let mut g = Gazetteer::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim_end_matches('\r');
            if row.trim().is_empty() || row.starts_with('#') {
                continue;
            }
            if idx == 0 && row.to_ascii_lowercase().starts_with("name\t") {
                continue;
            }
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() < 3 || cols.len() > 4 {
                return Err(GazetteerError::Format {
                    line,
                    reason: format!("expected 3 or 4 tab-separated columns, found {}", cols.len()),
                });
            }
            let name = cols[0].trim();
            if normalize_name(name).is_empty() {
                return Err(GazetteerError::Format { line, reason: "empty place name".into() });
            }
            let cc = cols[1].trim().to_ascii_uppercase();
            if cc.len() != 2 || !cc.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(GazetteerError::Format { line, reason: format!("bad country code `{}`", cols[1]) });
            }
            g.insert(GazetteerEntry {
                name: name.to_string(),
                country_code: cc,
                admin1_code: cols[2].trim().to_string(),
                admin2_code: cols.get(3).map(|s| s.trim().to_string()).unwrap_or_default(),
            });
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GazetteerError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, entry: GazetteerEntry) {
        let key = normalize_name(&entry.name);
        self.max_words = self.max_words.max(key.split(' ').count());
        let idx = self.entries.len();
        self.by_country.entry(entry.country_code.clone()).or_default().entry(key).or_default().push(idx);
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    /// All entries registered under `name` (case-insensitive) for a country.
    pub fn lookup(&self, country_code: &str, name: &str) -> Vec<&GazetteerEntry> {
        self.by_country
            .get(&country_code.to_ascii_uppercase())
            .and_then(|m| m.get(&normalize_name(name)))
            .map(|ids| ids.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    fn in_scope(entry: &GazetteerEntry, scope: &[String]) -> bool {
        if scope.is_empty() {
            return true;
        }
        scope.iter().any(|s| {
            let code = s.rsplit('.').next().unwrap_or(s);
            let qualified_ok = match s.split_once('.') {
                Some((cc, _)) => cc.eq_ignore_ascii_case(&entry.country_code),
                None => true,
            };
            qualified_ok && (code == entry.admin1_code || (!entry.admin2_code.is_empty() && code == entry.admin2_code))
        })
    }
}

/// Longest-match, word-boundary, case-insensitive scan for places registered
/// under the event's countries, plus the event country name itself.
pub fn match_locations(s: &str, g: &Gazetteer, event: &Event) -> Vec<GazetteerHit> {
    let toks = words(s);
    let lowered: Vec<String> = toks.iter().map(|&(a, b)| s[a..b].to_lowercase()).collect();
    let country_key = normalize_name(&event.country);
    let country_words = if country_key.is_empty() { 0 } else { country_key.split(' ').count() };
    let max_words = g.max_words.max(country_words).max(1);
    let indexes: Vec<&HashMap<String, Vec<usize>>> =
        event.country_codes.iter().filter_map(|cc| g.by_country.get(&cc.to_ascii_uppercase())).collect();

    let mut hits = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut matched = None;
        for n in (1..=max_words.min(toks.len() - i)).rev() {
            let key = lowered[i..i + n].join(" ");
            let entry = indexes
                .iter()
                .filter_map(|m| m.get(&key))
                .flat_map(|ids| ids.iter().map(|&id| &g.entries[id]))
                .find(|e| Gazetteer::in_scope(e, &event.admin_scope));
            let surface = &s[toks[i].0..toks[i + n - 1].1];
            if let Some(e) = entry {
                matched = Some((
                    n,
                    GazetteerHit {
                        surface: surface.to_string(),
                        name: e.name.clone(),
                        country_code: e.country_code.clone(),
                        admin1_code: e.admin1_code.clone(),
                        admin2_code: e.admin2_code.clone(),
                    },
                ));
                break;
            }
            if n == country_words && key == country_key {
                matched = Some((
                    n,
                    GazetteerHit {
                        surface: surface.to_string(),
                        name: event.country.clone(),
                        country_code: event.country_codes.first().cloned().unwrap_or_default(),
                        admin1_code: String::new(),
                        admin2_code: String::new(),
                    },
                ));
                break;
            }
        }
        match matched {
            Some((n, hit)) => {
                hits.push(hit);
                i += n;
            }
            None => i += 1,
        }
    }
    hits
}

/// Segments each article body, keeps sentences passing the length filter
/// that mention at least one location of the event.
pub fn curate(articles: &[Article], g: &Gazetteer, event: &Event) -> (Vec<Sentence>, CurationReport) {
    let mut report = CurationReport { articles_in: articles.len(), ..Default::default() };
    let mut kept = Vec::new();
    for article in articles {
        for s in segment_sentences(&article.body) {
            report.sentences_segmented += 1;
            let n = s.chars().count();
            if n < MIN_SENTENCE_CHARS {
                report.dropped_short += 1;
                continue;
            }
            if n > MAX_SENTENCE_CHARS {
                report.dropped_long += 1;
                continue;
            }
            let hits = match_locations(&s, g, event);
            if hits.is_empty() {
                report.dropped_no_location += 1;
                continue;
            }
            kept.push(Sentence {
                text: s,
                source_url: article.url.clone(),
                event_ref: event.id.clone(),
                matched_locations: hits,
            });
        }
    }
    report.kept = kept.len();
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventType;
    use chrono::NaiveDate;

    fn event(country: &str, codes: &[&str]) -> Event {
        let mut e = Event::new("Test Floods", EventType::Floods, country, NaiveDate::from_ymd_opt(2024, 9, 1).unwrap());
        e.country_codes = codes.iter().map(|c| c.to_string()).collect();
        e
    }

    #[test]
    fn segmentation() {
        assert_eq!(segment_sentences("It rained. Roads flooded."), ["It rained.", "Roads flooded."]);
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
        assert_eq!(
            segment_sentences("The U.S. sent aid. Crews arrived."),
            ["The U.S. sent aid.", "Crews arrived."]
        );
        assert_eq!(
            segment_sentences("Dr. Smith warned of floods! Was it enough? \"No,\" he said."),
            ["Dr. Smith warned of floods!", "Was it enough?", "\"No,\" he said."]
        );
        assert_eq!(segment_sentences("Rain fell at 3.5 mm per hour. 20 homes flooded."), [
            "Rain fell at 3.5 mm per hour.",
            "20 homes flooded."
        ]);
        assert_eq!(segment_sentences("lowercase after. stays joined"), ["lowercase after. stays joined"]);
        assert_eq!(segment_sentences("He said \"Hurry.\" Then he left"), ["He said \"Hurry.\"", "Then he left"]);
    }

    #[test]
    fn length_bounds() {
        assert!(!length_filter(&"a".repeat(29)));
        assert!(length_filter(&"a".repeat(30)));
        assert!(length_filter(&"a".repeat(200)));
        assert!(!length_filter(&"a".repeat(201)));
        // counts chars, not bytes
        assert!(length_filter(&"é".repeat(30)));
    }

    #[test]
    fn gazetteer_parsing() {
        let g = Gazetteer::parse("name\tcountry_code\tadmin1_code\tadmin2_code\nKrakow\tPL\t77\t1261\nWarsaw\tPL\t78\t1465\nGdansk\tPL\t82\n").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.lookup("pl", "GDANSK")[0].admin2_code, "");
        let dup = Gazetteer::parse("Springfield\tUS\tIL\t167\nSpringfield\tUS\tMA\t013\n").unwrap();
        assert_eq!(dup.lookup("US", "springfield").len(), 2);
        let err = Gazetteer::parse("Krakow\tPL\t77\nbroken line\n").unwrap_err();
        assert!(matches!(err, GazetteerError::Format { line: 2, .. }));
        assert!(Gazetteer::parse("Paris\tFRA\t11\n").is_err());
    }

    #[test]
    fn location_matching() {
        let g = Gazetteer::parse("Krakow\tPL\t77\nYork\tUS\tNY\t\nNew York\tUS\tNY\t\nLondon\tGB\tENG\n").unwrap();
        let pl = event("Poland", &["PL"]);
        let hits = match_locations("Flooding hit Krakow overnight.", &g, &pl);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].name, "Krakow");
        assert!(match_locations("The water kept rising all night long.", &g, &pl).is_empty());
        // only the event's countries count
        assert!(match_locations("Flooding hit London overnight.", &g, &pl).is_empty());
        // country name counts as a location
        assert_eq!(match_locations("Rivers across poland rose.", &g, &pl)[0].name, "Poland");

        let us = event("USA", &["US"]);
        let hits = match_locations("Streets in New York were underwater.", &g, &us);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].surface, "New York");
        // word boundaries: "Yorkshire" is not "York"
        assert!(match_locations("Rain fell over Yorkshire moors today.", &g, &us).is_empty());
    }

    #[test]
    fn admin_scope_restricts() {
        let g = Gazetteer::parse("Krakow\tPL\t77\t1261\nGdansk\tPL\t82\t2261\n").unwrap();
        let mut e = event("Poland", &["PL"]);
        e.admin_scope = vec!["PL.77".into()];
        assert_eq!(match_locations("Krakow and Gdansk flooded.", &g, &e).len(), 1);
        e.admin_scope = vec!["2261".into()];
        assert_eq!(match_locations("Krakow and Gdansk flooded.", &g, &e)[0].name, "Gdansk");
    }

    #[test]
    fn curate_counts() {
        let g = Gazetteer::parse("Krakow\tPL\t77\n").unwrap();
        let e = event("Poland", &["PL"]);
        let article = Article {
            url: "https://x.example/a".into(),
            title: "t".into(),
            body: "Krakow is struggling after heavy rainfall this week. Short one. Sandbags were handed out to every household nearby. Officials in Krakow opened three emergency shelters.".into(),
            published: None,
            event: e.id.clone(),
            query: "q".into(),
        };
        let empty = Article { body: String::new(), ..article.clone() };
        let (kept, report) = curate(&[article, empty], &g, &e);
        assert_eq!(kept.len(), 2);
        assert_eq!(report.sentences_segmented, 4);
        assert_eq!(report.dropped_short, 1);
        assert_eq!(report.dropped_no_location, 1);
        assert_eq!(report.articles_in, 2);
        assert!(report.reconciles());
        assert_eq!(kept[0].event_ref, "test-floods");
    }
}
