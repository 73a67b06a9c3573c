//! The ordered set of origin classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default classes with the national teams / countries used to label them.
const DEFAULT_CLASSES: [(&str, &[&str]); 17] = [
    ("Anglo-Saxon", &["Great Britain", "Ireland"]),
    (
        "Arabic",
        &["Egypt", "Syria", "Saudi Arabia", "Jordan", "UAE", "Tunisia", "Algeria", "Morocco"],
    ),
    ("Balkans", &["Serbia", "Croatia", "Yugoslavia"]),
    ("Chinese", &["China"]),
    ("East-Europe", &["Poland", "Czechoslovakia", "Hungary"]),
    ("French", &["France"]),
    ("German", &["Germany"]),
    ("Hispanic-Iberian", &["Spain", "Portugal", "Mexico"]),
    ("India", &["India"]),
    ("Italian", &["Italy"]),
    ("Japanese", &["Japan"]),
    ("Korean", &["Korea"]),
    ("Persian", &["Iran"]),
    ("Scandinavian", &["Sweden", "Norway", "Finland", "Denmark", "Iceland"]),
    ("Slavic-Russian", &["Russia", "Ukraine", "Belarus"]),
    (
        "South-East Asia",
        &["Vietnam", "Thailand", "Malaysia", "Indonesia", "Laos", "Cambodia"],
    ),
    ("Turkish", &["Turkey"]),
];

const DEFAULT_NON_WESTERN: [&str; 7] = [
    "Arabic",
    "Chinese",
    "India",
    "Persian",
    "Slavic-Russian",
    "Turkish",
    "South-East Asia",
];

/// Ordered origin classes. Class indices are positions in this order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    names: Vec<String>,
    countries: Vec<Vec<String>>,
    non_western: Vec<usize>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        let names: Vec<String> = DEFAULT_CLASSES.iter().map(|(n, _)| n.to_string()).collect();
        let countries = DEFAULT_CLASSES
            .iter()
            .map(|(_, c)| c.iter().map(|s| s.to_string()).collect())
            .collect();
        let mut t = Taxonomy {
            names,
            countries,
            non_western: Vec::new(),
        };
        t.non_western = DEFAULT_NON_WESTERN
            .iter()
            .map(|n| t.index_of(n).expect("default non-western class exists"))
            .collect();
        t.non_western.sort_unstable();
        t
    }
}

/// Lowercase alphanumerics only, so `Anglo-Saxon`, `anglo saxon` and
/// `AngloSaxon` compare equal.
fn key(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl Taxonomy {
    /// Builds a taxonomy from class names; no country lists, no
    /// non-western subset.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if names.len() < 2 {
            return Err(Error::InvalidConfig("taxonomy needs at least 2 classes".into()));
        }
        let mut keys: Vec<String> = names.iter().map(|n| key(n)).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) || keys.iter().any(String::is_empty) {
            return Err(Error::InvalidConfig("taxonomy class names must be unique and non-empty".into()));
        }
        Ok(Taxonomy {
            countries: vec![Vec::new(); names.len()],
            names,
            non_western: Vec::new(),
        })
    }

    pub fn with_non_western<S: AsRef<str>>(mut self, subset: &[S]) -> Result<Self> {
        let mut idx = subset
            .iter()
            .map(|s| {
                self.index_of(s.as_ref())
                    .ok_or_else(|| Error::UnknownOrigin(s.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        self.non_western = idx;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn countries(&self, index: usize) -> &[String] {
        self.countries.get(index).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Class indices of the non-western subset, ascending.
    pub fn non_western(&self) -> &[usize] {
        &self.non_western
    }

    /// Index of a class, matching case- and punctuation-insensitively.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let k = key(name);
        self.names.iter().position(|n| key(n) == k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_seventeen_classes() {
        let t = Taxonomy::default();
        assert_eq!(t.len(), 17);
        assert_eq!(t.name(0), Some("Anglo-Saxon"));
        assert_eq!(t.name(16), Some("Turkish"));
        assert_eq!(t.index_of("AngloSaxon"), Some(0));
        assert_eq!(t.index_of("south-east asia"), Some(15));
        assert_eq!(t.index_of("Atlantis"), None);
        assert_eq!(t.countries(13).len(), 5);
    }

    #[test]
    fn default_non_western_subset() {
        let t = Taxonomy::default();
        let names: Vec<&str> = t.non_western().iter().map(|&k| t.name(k).unwrap()).collect();
        assert_eq!(
            names,
            ["Arabic", "Chinese", "India", "Persian", "Slavic-Russian", "South-East Asia", "Turkish"]
        );
    }

    #[test]
    fn rejects_duplicates_and_unknown_subset() {
        assert!(Taxonomy::new(&["A", "a"]).is_err());
        assert!(Taxonomy::new(&["A"]).is_err());
        let t = Taxonomy::new(&["A", "B"]).unwrap();
        assert!(matches!(t.clone().with_non_western(&["C"]), Err(Error::UnknownOrigin(_))));
        assert_eq!(t.with_non_western(&["B"]).unwrap().non_western(), &[1]);
    }
}
