use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The built-in manifest document.
pub const CANONICAL_MANIFEST_JSON: &str = include_str!("../data/stickers.json");

/// Canonical sticker id: lowercase ASCII letters and digits joined by single
/// hyphens, e.g. `mushroom-house`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StickerId(String);

impl StickerId {
    pub fn new(id: impl Into<String>) -> Result<Self, ManifestError> {
        let id = id.into();
        let valid = !id.is_empty()
            && id.split('-').all(|part| {
                !part.is_empty() && part.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
            });
        if valid {
            Ok(Self(id))
        } else {
            Err(ManifestError::InvalidId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The noun a description must contain to agree with this sticker: the
    /// last hyphen-separated segment (`mushroom-house` → `house`).
    pub fn head_noun(&self) -> &str {
        self.0.rsplit('-').next().unwrap_or(&self.0)
    }
}

impl TryFrom<String> for StickerId {
    type Error = ManifestError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<StickerId> for String {
    fn from(id: StickerId) -> Self {
        id.0
    }
}

impl fmt::Display for StickerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StickerCategory {
    Place,
    Character,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickerEntry {
    pub id: StickerId,
    pub category: StickerCategory,
    pub description_ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<String>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("invalid sticker id {0:?}")]
    InvalidId(String),
    #[error("sticker {0} listed twice")]
    Duplicate(StickerId),
    #[error("sticker {0} has an empty ground-truth description")]
    EmptyDescription(StickerId),
    #[error("manifest lists no stickers")]
    Empty,
    #[error("manifest document: {0}")]
    Parse(String),
    #[error("reading manifest: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickerManifest {
    stickers: Vec<StickerEntry>,
}

impl StickerManifest {
    /// The nine stickers shipped with the crate.
    pub fn canonical() -> Self {
        Self::from_json(CANONICAL_MANIFEST_JSON).expect("embedded sticker manifest is valid")
    }

    pub fn new(stickers: Vec<StickerEntry>) -> Result<Self, ManifestError> {
        if stickers.is_empty() {
            return Err(ManifestError::Empty);
        }
        let mut seen = BTreeSet::new();
        for s in &stickers {
            if !seen.insert(&s.id) {
                return Err(ManifestError::Duplicate(s.id.clone()));
            }
            if s.description_ground_truth.trim().is_empty() {
                return Err(ManifestError::EmptyDescription(s.id.clone()));
            }
        }
        Ok(Self { stickers })
    }

    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        #[derive(Deserialize)]
        struct Doc {
            stickers: Vec<StickerEntry>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))?;
        Self::new(doc.stickers)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, id: &StickerId) -> Option<&StickerEntry> {
        self.stickers.iter().find(|s| &s.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &StickerId> {
        self.stickers.iter().map(|s| &s.id)
    }

    pub fn entries(&self) -> &[StickerEntry] {
        &self.stickers
    }

    pub fn len(&self) -> usize {
        self.stickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stickers.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{mentions, word_count};

    #[test]
    fn canonical_has_three_of_each_category() {
        let m = StickerManifest::canonical();
        assert_eq!(m.len(), 9);
        for cat in [StickerCategory::Place, StickerCategory::Character, StickerCategory::Object] {
            assert_eq!(m.entries().iter().filter(|s| s.category == cat).count(), 3);
        }
    }

    #[test]
    fn ground_truth_descriptions_agree_with_their_ids() {
        for s in StickerManifest::canonical().entries() {
            assert!(mentions(&s.description_ground_truth, s.id.head_noun()), "{}", s.id);
            assert!(word_count(&s.description_ground_truth) <= 10);
        }
    }

    #[test]
    fn id_validation() {
        assert!(StickerId::new("mushroom-house").is_ok());
        for bad in ["", "Koala", "a--b", "-a", "a b", "koala-"] {
            assert!(StickerId::new(bad).is_err(), "{bad:?}");
        }
        assert_eq!(StickerId::new("mushroom-house").unwrap().head_noun(), "house");
        assert_eq!(StickerId::new("koala").unwrap().head_noun(), "koala");
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let dup = r#"{"stickers":[
            {"id":"a","category":"place","description_ground_truth":"an a"},
            {"id":"a","category":"object","description_ground_truth":"another a"}]}"#;
        assert!(matches!(StickerManifest::from_json(dup), Err(ManifestError::Duplicate(_))));
        assert!(matches!(StickerManifest::from_json(r#"{"stickers":[]}"#), Err(ManifestError::Empty)));
        assert!(matches!(StickerManifest::from_json("nope"), Err(ManifestError::Parse(_))));
    }
}
