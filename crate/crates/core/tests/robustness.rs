use chrono::{TimeZone, Utc};
use ewra_core::curate::segment_sentences;
use ewra_core::ingest::{dedupe, extract_page, parse_feed, Article};
use ewra_core::response::parse_output;
use ewra_core::{TaskKind, Taxonomy};
use proptest::prelude::*;

fn tagged_noise() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("<think>".to_string()),
        Just("</think>".to_string()),
        Just("<output>".to_string()),
        Just("</output>".to_string()),
        Just("- Impact: 0.8\n".to_string()),
        Just("Topic: Impact (0.8)\n".to_string()),
        Just("Sub-Topic:\n".to_string()),
        Just("Keywords: a, b\n".to_string()),
        Just("Sadness: nan\n".to_string()),
        "[ -~\n]{0,20}",
        "\\PC{0,8}",
    ];
    prop::collection::vec(piece, 0..12).prop_map(|v| v.concat())
}

fn xmlish() -> impl Strategy<Value = Vec<u8>> {
    let piece = prop_oneof![
        Just("<rss>".to_string()),
        Just("<channel>".to_string()),
        Just("<item>".to_string()),
        Just("</item>".to_string()),
        Just("<link>https://a.example/x</link>".to_string()),
        Just("<pubDate>Sat, 07 Sep 2024 09:30:00 GMT</pubDate>".to_string()),
        Just("<![CDATA[".to_string()),
        Just("]]>".to_string()),
        Just("&amp;&bogus;".to_string()),
        "[ -~]{0,16}",
    ];
    prop::collection::vec(piece, 0..16).prop_map(|v| v.concat().into_bytes())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn output_parser_total_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let s = String::from_utf8_lossy(&bytes);
        for t in TaskKind::ALL {
            let _ = parse_output(&s, t, &Taxonomy::default());
        }
    }

    #[test]
    fn output_parser_total_on_tagged_noise(s in tagged_noise()) {
        for t in TaskKind::ALL {
            let _ = parse_output(&s, t, &Taxonomy::default());
        }
    }

    #[test]
    fn feed_parser_total(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_feed(&bytes);
    }

    #[test]
    fn feed_parser_total_on_xmlish(bytes in xmlish()) {
        if let Ok(f) = parse_feed(&bytes) {
            prop_assert!(f.items.iter().all(|i| i.link.starts_with("http")));
        }
    }

    #[test]
    fn html_and_segmenter_total(s in "\\PC{0,300}") {
        let _ = extract_page(&s);
        for sent in segment_sentences(&s) {
            prop_assert!(!sent.trim().is_empty());
        }
    }

    #[test]
    fn dedupe_idempotent(picks in prop::collection::vec((0u8..4, 0u8..3, 0u8..3, any::<bool>()), 0..20)) {
        let articles: Vec<Article> = picks
            .iter()
            .map(|&(u, t, d, dated)| Article {
                url: format!("https://a.example/{u}"),
                title: format!("Title {t}"),
                body: String::new(),
                published: dated.then(|| Utc.with_ymd_and_hms(2024, 9, 1 + d as u32, 12, 0, 0).unwrap()),
                event: "e".into(),
                query: "q".into(),
            })
            .collect();
        let once = dedupe(articles);
        let twice = dedupe(once.clone());
        prop_assert_eq!(once, twice);
    }
}
