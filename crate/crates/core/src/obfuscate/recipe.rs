//! Text form of a recipe: a `recipe-v1` header line followed by TOML.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::Recipe;

const HEADER: &str = "recipe-v1";

#[derive(Debug, Error)]
pub enum RecipeParseError {
    #[error("missing `{HEADER}` header")]
    Header,
    #[error("malformed recipe body: {0}")]
    Body(#[from] toml::de::Error),
}

impl Recipe {
    pub fn to_text(&self) -> String {
        let body = toml::to_string(self).expect("recipe fields are plain data");
        format!("{HEADER}\n{body}")
    }

    pub fn from_text(text: &str) -> Result<Recipe, RecipeParseError> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim_end() != HEADER {
            return Err(RecipeParseError::Header);
        }
        Ok(toml::from_str(body)?)
    }
}

/// TOML integers are signed, so seeds above `i64::MAX` are written as strings.
pub(crate) mod seed_format {
    use super::*;

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => v.serialize(s),
            Err(_) => seed.to_string().serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(serde::de::Error::custom),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
