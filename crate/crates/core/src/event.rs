//! Registered extreme-weather events and the TOML registry format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Heatwave,
    Cold,
    Wind,
    Rain,
    Floods,
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heatwave" => Ok(EventType::Heatwave),
            "cold" => Ok(EventType::Cold),
            "wind" => Ok(EventType::Wind),
            "rain" => Ok(EventType::Rain),
            "floods" => Ok(EventType::Floods),
            other => Err(format!("unknown event type `{other}`")),
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventType::Heatwave => "heatwave",
            EventType::Cold => "cold",
            EventType::Wind => "wind",
            EventType::Rain => "rain",
            EventType::Floods => "floods",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Stable identifier (slug of the name unless given).
    pub id: String,
    pub name: String,
    /// Phrase used in search queries, e.g. the event name or a region phrase.
    pub proxy_query_name: String,
    pub event_type: EventType,
    /// Country as it appears in queries.
    pub country: String,
    /// ISO 3166-1 alpha-2 codes used to select gazetteer entries.
    #[serde(default)]
    pub country_codes: Vec<String>,
    pub event_date: NaiveDate,
    /// Admin1/admin2 codes ("CC.A1" or bare "A1") restricting location matches.
    #[serde(default)]
    pub admin_scope: Vec<String>,
}

/// Lowercase ASCII-alphanumeric slug with single hyphens.
pub fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

impl Event {
    pub fn new(name: &str, event_type: EventType, country: &str, event_date: NaiveDate) -> Self {
        Event {
            id: slugify(name),
            name: name.to_string(),
            proxy_query_name: name.to_string(),
            event_type,
            country: country.to_string(),
            country_codes: default_country_codes(country),
            event_date,
            admin_scope: Vec::new(),
        }
    }
}

/// ISO codes for the country names used by the built-in registry.
pub fn default_country_codes(country: &str) -> Vec<String> {
    let codes: &[&str] = match country.trim().to_ascii_lowercase().as_str() {
        "romania" => &["RO"],
        "poland" => &["PL"],
        "usa" | "united states" => &["US"],
        "norway" => &["NO"],
        "germany" => &["DE"],
        "canada" => &["CA"],
        "vietnam" => &["VN"],
        "france" => &["FR"],
        "australia" => &["AU"],
        "yemen" => &["YE"],
        "scotland" | "united kingdom" | "uk" => &["GB"],
        "denmark" => &["DK"],
        "caribbean" => &["AG", "AI", "BL", "BS", "CU", "DO", "HT", "MF", "PR", "SX", "TC", "VG", "VI"],
        "albania" => &["AL"],
        "saudi arabia" => &["SA"],
        "cyprus" => &["CY"],
        "india" => &["IN"],
        "italy" => &["IT"],
        "morocco" => &["MA"],
        "pakistan" => &["PK"],
        "brazil" => &["BR"],
        "switzerland" => &["CH"],
        "thailand" => &["TH"],
        "austria" => &["AT"],
        "jamaica" => &["JM"],
        "china" => &["CN"],
        "uae" | "united arab emirates" => &["AE"],
        "mexico" => &["MX"],
        "greece" => &["GR"],
        "south africa" => &["ZA"],
        "lybia" | "libya" => &["LY"],
        "hong kong" => &["HK"],
        _ => &[],
    };
    codes.iter().map(|c| c.to_string()).collect()
}

type BuiltinRow = (&'static str, EventType, &'static str, (u32, u32, i32));

// (name, type, country, day/month/year) for the sixty ClimaMeter events.
const BUILTIN: &[BuiltinRow] = {
    use EventType::*;
    &[
        ("Romania Floods", Floods, "Romania", (31, 8, 2024)),
        ("Poland Floods", Floods, "Poland", (18, 8, 2024)),
        ("USA Winter Storm", Cold, "USA", (14, 1, 2024)),
        ("Scandinavian Cold Spell", Cold, "Norway", (8, 1, 2024)),
        ("Ciro Snowstorm", Cold, "Germany", (2, 12, 2023)),
        ("North American Winter Storm", Cold, "Canada", (27, 12, 2022)),
        ("Hurricane Helene", Wind, "USA", (27, 9, 2024)),
        ("Typhoon Yagi", Wind, "Vietnam", (8, 9, 2024)),
        ("Storm Ingunn", Wind, "Norway", (1, 2, 2024)),
        ("Cyclone Belal", Wind, "France", (15, 1, 2024)),
        ("Cyclone Jasper", Wind, "Australia", (18, 12, 2023)),
        ("Storm Ciaran", Wind, "France", (3, 11, 2023)),
        ("Cyclone Tej", Wind, "Yemen", (23, 10, 2023)),
        ("Storms Babet and Aline", Wind, "Scotland", (20, 10, 2023)),
        ("Storm Poly", Wind, "Denmark", (5, 7, 2023)),
        ("Hurricane Ian Landfall", Wind, "USA", (28, 9, 2022)),
        ("April 2020 USA Tornado Outbreak", Wind, "USA", (12, 4, 2020)),
        ("Hurricane Irma Caribbean Landfall", Wind, "Caribbean", (7, 9, 2017)),
        ("European Heatwave", Heatwave, "Albania", (19, 7, 2024)),
        ("Eastern United States Heatwave", Heatwave, "USA", (23, 6, 2024)),
        ("Saudi Arabia Heatwave", Heatwave, "Saudi Arabia", (18, 6, 2024)),
        ("Eastern Mediterranean Heatwave", Heatwave, "Cyprus", (14, 6, 2024)),
        ("India Heatwave", Heatwave, "India", (29, 5, 2024)),
        ("Easter Extreme Weather in Europe", Heatwave, "Italy", (1, 4, 2024)),
        ("Morocco Heatwave", Heatwave, "Morocco", (15, 2, 2024)),
        ("Central Asia Heatwave", Heatwave, "Pakistan", (30, 11, 2023)),
        ("Brazil Heatwave", Heatwave, "Brazil", (19, 11, 2023)),
        ("October Heatwave in Europe", Heatwave, "Switzerland", (13, 10, 2023)),
        ("September Heatwave in Southern and Central Europe", Heatwave, "France", (10, 9, 2023)),
        ("Late Summer French Heatwave", Heatwave, "France", (23, 8, 2023)),
        ("Western USA Heatwave", Heatwave, "USA", (31, 7, 2023)),
        ("Cerberus Heatwave in Southern Europe", Heatwave, "Italy", (25, 7, 2023)),
        ("Southeast Asia Heat Peak", Heatwave, "Thailand", (15, 4, 2023)),
        ("Italy Multiple Floods", Rain, "Italy", (19, 10, 2024)),
        ("Storm Kirk", Rain, "France", (9, 10, 2024)),
        ("Storm Boris", Rain, "Austria", (15, 9, 2024)),
        ("Hurricane Beryl", Rain, "Jamaica", (3, 7, 2024)),
        ("Genoa Low Summer Floods", Rain, "France", (24, 6, 2024)),
        ("Bavaria Floods", Rain, "Germany", (3, 6, 2024)),
        ("Texas Floods", Rain, "USA", (5, 5, 2024)),
        ("South Brazil Floods", Rain, "Brazil", (2, 5, 2024)),
        ("China Floods", Rain, "China", (23, 4, 2024)),
        ("Dubai Floods", Rain, "UAE", (16, 4, 2024)),
        ("Storm Monica", Rain, "France", (9, 3, 2024)),
        ("California Floods", Rain, "USA", (1, 2, 2024)),
        // printed month-first in the source table
        ("San Diego Floods", Rain, "USA", (22, 1, 2024)),
        ("North-West USA and Canada Atmospheric River", Rain, "USA", (6, 12, 2023)),
        ("France and Italy Floods", Rain, "France", (21, 11, 2023)),
        ("Hurricane Otis", Rain, "Mexico", (25, 10, 2023)),
        ("New York Floods", Rain, "USA", (29, 9, 2023)),
        ("Mediterranean Depression Elias", Rain, "Greece", (27, 9, 2023)),
        ("Cape Town Floods", Rain, "South Africa", (25, 9, 2023)),
        ("Cevennes Floods", Rain, "France", (17, 9, 2023)),
        ("Medicane Daniel", Rain, "Lybia", (11, 9, 2023)),
        ("Guangdong and Hong Kong Floods", Rain, "Hong Kong", (8, 9, 2023)),
        ("Mediterranean Depression Daniel", Rain, "Greece", (5, 9, 2023)),
        ("Mediterranean Depression Rea", Rain, "Italy", (29, 8, 2023)),
        ("Storm Hans in Scandinavia", Rain, "Norway", (8, 8, 2023)),
        ("California Atmospheric River", Rain, "USA", (10, 1, 2023)),
        ("Medicane Ianos", Rain, "Greece", (18, 9, 2020)),
    ]
};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("reading event registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing event registry: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid event `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("duplicate event id `{0}`")]
    Duplicate(String),
}

/// Ordered collection of events addressable by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRegistry {
    pub events: Vec<Event>,
}

#[derive(Deserialize)]
struct RawRegistry {
    events: Vec<RawEvent>,
}

#[derive(Deserialize)]
struct RawEvent {
    id: Option<String>,
    name: String,
    proxy_query_name: Option<String>,
    event_type: EventType,
    country: String,
    country_codes: Option<Vec<String>>,
    event_date: NaiveDate,
    #[serde(default)]
    admin_scope: Vec<String>,
}

impl EventRegistry {
    pub fn builtin() -> Self {
        let events = BUILTIN
            .iter()
            .map(|&(name, ty, country, (d, m, y))| {
                let date = NaiveDate::from_ymd_opt(y, m, d).expect("built-in dates are valid");
                Event::new(name, ty, country, date)
            })
            .collect();
        EventRegistry { events }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, RegistryError> {
        let raw: RawRegistry = toml::from_str(s)?;
        let mut events = Vec::with_capacity(raw.events.len());
        for r in raw.events {
            let id = r.id.unwrap_or_else(|| slugify(&r.name));
            if r.name.trim().is_empty() || r.country.trim().is_empty() {
                return Err(RegistryError::Invalid { id, reason: "name and country must be nonempty".into() });
            }
            events.push(Event {
                proxy_query_name: r.proxy_query_name.unwrap_or_else(|| r.name.clone()),
                country_codes: r.country_codes.unwrap_or_else(|| default_country_codes(&r.country)),
                id,
                name: r.name,
                event_type: r.event_type,
                country: r.country,
                event_date: r.event_date,
                admin_scope: r.admin_scope,
            });
        }
        let reg = EventRegistry { events };
        reg.check_unique()?;
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| RegistryError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    fn check_unique(&self) -> Result<(), RegistryError> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.events {
            if !seen.insert(e.id.as_str()) {
                return Err(RegistryError::Duplicate(e.id.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry() {
        let reg = EventRegistry::builtin();
        assert_eq!(reg.events.len(), 60);
        reg.check_unique().unwrap();
        let yagi = reg.get("typhoon-yagi").unwrap();
        assert_eq!(yagi.event_type, EventType::Wind);
        assert_eq!(yagi.country, "Vietnam");
        assert_eq!(yagi.event_date, NaiveDate::from_ymd_opt(2024, 9, 8).unwrap());
        assert_eq!(yagi.country_codes, ["VN"]);
        assert!(reg.events.iter().all(|e| !e.country_codes.is_empty()));
        let sd = reg.get("san-diego-floods").unwrap();
        assert_eq!(sd.event_date, NaiveDate::from_ymd_opt(2024, 1, 22).unwrap());
    }

    #[test]
    fn toml_registry_defaults() {
        let reg = EventRegistry::from_toml_str(
            r#"
            [[events]]
            name = "Dubai Floods"
            event_type = "rain"
            country = "UAE"
            event_date = "2024-04-16"

            [[events]]
            id = "ca"
            name = "Central Asia Heatwave"
            proxy_query_name = "Central Asia heatwave"
            event_type = "heatwave"
            country = "Pakistan"
            event_date = "2023-11-30"
            admin_scope = ["PK.04"]
            "#,
        )
        .unwrap();
        assert_eq!(reg.ids(), ["dubai-floods", "ca"]);
        assert_eq!(reg.events[0].country_codes, ["AE"]);
        assert_eq!(reg.events[1].proxy_query_name, "Central Asia heatwave");
        assert!(EventRegistry::from_toml_str("[[events]]\nname='x'\nevent_type='snow'\ncountry='c'\nevent_date='2024-01-01'").is_err());
        assert!(EventRegistry::from_toml_str("[[events]]\nname='x'\nevent_type='cold'\ncountry='c'\nevent_date='2024-02-30'").is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("North-West USA and Canada Atmospheric River"), "north-west-usa-and-canada-atmospheric-river");
        assert_eq!(slugify("  April 2020 "), "april-2020");
    }
}
