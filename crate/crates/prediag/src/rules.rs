//! Consultation rules and stopword lists, from files or built in.

use std::path::Path;

use prediag_core::dialogue::RuleSet;
use prediag_core::Preprocessor;

use crate::error::{Error, Result};

const DEFAULT_RULES: &str = include_str!("../data/rules.toml");

pub fn default_rules() -> RuleSet {
    toml::from_str(DEFAULT_RULES).expect("built-in rules parse")
}

pub fn load_rules(path: Option<&Path>) -> Result<RuleSet> {
    let Some(path) = path else {
        return Ok(default_rules());
    };
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    toml::from_str(&text).map_err(|source| Error::Toml {
        path: path.into(),
        source,
    })
}

/// One word per line; `#` starts a comment line.
pub fn parse_stopwords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_preprocessor(stopwords: Option<&Path>) -> Result<Preprocessor> {
    let Some(path) = stopwords else {
        return Ok(Preprocessor::default());
    };
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(Preprocessor::with_stopwords(parse_stopwords(&text)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_rules() {
        let r = default_rules();
        assert!(r.slots.len() >= 4);
        assert!(r.slots.iter().all(|s| !s.question.is_empty()));
        assert!(r.upload_instruction.contains("/api/v1/classify"));
    }

    #[test]
    fn stopword_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stop.txt");
        std::fs::write(&p, "# list\nThe\n\nis\n").unwrap();
        let pre = load_preprocessor(Some(&p)).unwrap();
        assert!(pre.is_stopword("the") && pre.is_stopword("is") && !pre.is_stopword("in"));
        assert!(load_preprocessor(Some(&dir.path().join("missing"))).is_err());
    }
}
