//! Sentence preprocessing for retrieval.
//!
//! A sentence goes through four fixed steps:
//!
//! 1. lowercase, drop punctuation, collapse whitespace
//! 2. remove stopwords
//! 3. stem every surviving token by stripping its first and last character
//! 4. glue each neighbouring pair of stems into one token
//!
//! The output of step 4 (the *bigram pair string*) is the key used for
//! candidate retrieval.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shortest token that gets stemmed; shorter tokens pass through unchanged.
pub const MIN_STEM_LEN: usize = 3;

/// Stopwords used when no list is configured.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "before", "being", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "for", "from", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "i", "i'm", "if", "in", "into", "is", "it", "it's", "its", "just", "me", "my", "myself",
    "of", "on", "or", "our", "ours", "she", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "then", "there", "these", "they", "this", "those", "to", "too", "very",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will",
    "with", "would", "you", "your", "yours",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("cannot stem an empty token")]
    EmptyToken,
}

/// A sentence after all four preprocessing steps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProcessedText {
    pub original: String,
    pub normalized_tokens: Vec<String>,
    pub content_stems: Vec<String>,
    pub bigram_pair_string: String,
}

impl ProcessedText {
    /// Step 1 output as a single space-joined string.
    pub fn normalized_text(&self) -> String {
        self.normalized_tokens.join(" ")
    }

    /// Step 3 output joined with spaces.
    pub fn stem_text(&self) -> String {
        self.content_stems.join(" ")
    }

    /// Individual bigram tokens of the pair string.
    pub fn bigrams(&self) -> impl Iterator<Item = &str> {
        self.bigram_pair_string.split(' ').filter(|s| !s.is_empty())
    }
}

/// Stem a lowercase token by removing its first and last character.
///
/// Tokens shorter than [`MIN_STEM_LEN`] characters are returned as is.
pub fn stem_token(token: &str) -> Result<String, TextError> {
    let len = token.chars().count();
    if len == 0 {
        return Err(TextError::EmptyToken);
    }
    if len < MIN_STEM_LEN {
        return Ok(token.to_string());
    }
    Ok(token.chars().skip(1).take(len - 2).collect())
}

/// Step 1: lowercase tokens with punctuation removed.
///
/// Apostrophes survive only between two alphanumeric characters
/// (`don't` stays, `'quoted'` loses both).
pub fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let chars: Vec<char> = raw
                .chars()
                .map(|c| if c == '\u{2019}' { '\'' } else { c })
                .collect();
            let mut token = String::new();
            for (i, &c) in chars.iter().enumerate() {
                if c.is_alphanumeric() {
                    token.extend(c.to_lowercase());
                } else if c == '\'' {
                    let before = i > 0 && chars[i - 1].is_alphanumeric();
                    let after = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                    if before && after {
                        token.push('\'');
                    }
                }
            }
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

/// Step 4: join each neighbouring stem pair; a lone stem is kept as is.
pub fn bigram_pairs(stems: &[String]) -> String {
    match stems {
        [] => String::new(),
        [only] => only.clone(),
        _ => stems
            .windows(2)
            .map(|w| {
                let mut pair = w[0].clone();
                pair.push_str(&w[1]);
                pair
            })
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Runs the four-step pipeline against a configurable stopword list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessor {
    stopwords: BTreeSet<String>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::with_stopwords(DEFAULT_STOPWORDS.iter().copied())
    }
}

impl Preprocessor {
    /// Build a preprocessor from a stopword list. Entries are normalized the
    /// same way as input text, so `"The"` and `"the"` are equivalent.
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords = words
            .into_iter()
            .flat_map(|w| normalize(w.as_ref()))
            .collect();
        Self { stopwords }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn process(&self, text: &str) -> ProcessedText {
        let normalized_tokens = normalize(text);
        let content_stems: Vec<String> = normalized_tokens
            .iter()
            .filter(|t| !self.is_stopword(t))
            // normalize never yields empty tokens
            .map(|t| stem_token(t).expect("normalized tokens are non-empty"))
            .collect();
        let bigram_pair_string = bigram_pairs(&content_stems);
        ProcessedText {
            original: text.to_string(),
            normalized_tokens,
            content_stems,
            bigram_pair_string,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const WORKED: &str = "Google, is. the best searching engine in the World";

    #[test]
    fn worked_sentence_all_stages() {
        let p = Preprocessor::default().process(WORKED);
        assert_eq!(
            p.normalized_text(),
            "google is the best searching engine in the world"
        );
        let kept: Vec<&str> = p
            .normalized_tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !Preprocessor::default().is_stopword(t))
            .collect();
        assert_eq!(kept.join(" "), "google best searching engine world");
        assert_eq!(p.stem_text(), "oogl es earchin ngin orl");
        assert_eq!(p.bigram_pair_string, "oogles esearchin earchinngin nginorl");
    }

    #[test]
    fn empty_input() {
        let p = Preprocessor::default().process("");
        assert!(p.normalized_tokens.is_empty());
        assert!(p.content_stems.is_empty());
        assert_eq!(p.bigram_pair_string, "");
    }

    #[test]
    fn two_word_phrase() {
        // first and last character go: b(reas)t, c(ance)r
        let p = Preprocessor::default().process("breast cancer");
        assert_eq!(p.content_stems, vec!["reas", "ance"]);
        assert_eq!(p.bigram_pair_string, "reasance");
    }

    #[test]
    fn single_stem_is_its_own_pair_string() {
        let p = Preprocessor::default().process("hello!");
        assert_eq!(p.content_stems, vec!["ell"]);
        assert_eq!(p.bigram_pair_string, "ell");
    }

    #[test]
    fn stemming_rules() {
        assert_eq!(stem_token("google").unwrap(), "oogl");
        assert_eq!(stem_token("searching").unwrap(), "earchin");
        assert_eq!(stem_token("ct").unwrap(), "ct");
        assert_eq!(stem_token("abc").unwrap(), "b");
        assert_eq!(stem_token(""), Err(TextError::EmptyToken));
    }

    #[test]
    fn apostrophes_and_unicode_case() {
        assert_eq!(normalize("Don't 'quote' me"), vec!["don't", "quote", "me"]);
        assert_eq!(normalize("I\u{2019}m ÉCOLE"), vec!["i'm", "école"]);
        assert_eq!(normalize("  ... ,, "), Vec::<String>::new());
    }

    #[test]
    fn custom_stopwords_replace_defaults() {
        let pre = Preprocessor::with_stopwords(["Engine"]);
        let p = pre.process("the search engine");
        assert_eq!(p.stem_text(), "h earc");
    }

    proptest! {
        #[test]
        fn normalized_tokens_are_clean(s in "\\PC{0,60}") {
            let p = Preprocessor::default().process(&s);
            for t in &p.normalized_tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.is_alphanumeric() || c == '\''));
                prop_assert_eq!(t, &t.to_lowercase());
            }
            prop_assert!(p.content_stems.len() <= p.normalized_tokens.len());
        }

        #[test]
        fn bigram_items_are_neighbour_pairs(s in "[a-zA-Z ,.!]{0,80}") {
            let p = Preprocessor::default().process(&s);
            let items: Vec<&str> = p.bigrams().collect();
            let n = p.content_stems.len();
            if n >= 2 {
                prop_assert_eq!(items.len(), n - 1);
                for (i, item) in items.iter().enumerate() {
                    let expected = alloc::format!("{}{}", p.content_stems[i], p.content_stems[i + 1]);
                    prop_assert_eq!(*item, expected.as_str());
                }
            } else if n == 1 {
                prop_assert_eq!(p.bigram_pair_string.as_str(), p.content_stems[0].as_str());
            } else {
                prop_assert!(items.is_empty());
            }
        }

        #[test]
        fn stem_length_rule(t in "[a-z]{1,12}") {
            let len = t.chars().count();
            let expected = if len < MIN_STEM_LEN { len } else { len - 2 };
            prop_assert_eq!(stem_token(&t).unwrap().chars().count(), expected);
        }

        #[test]
        fn reprocessing_stems_never_fails(s in "\\PC{0,60}") {
            let pre = Preprocessor::default();
            let p = pre.process(&s);
            let again = pre.process(&p.stem_text());
            prop_assert!(again.content_stems.len() <= p.content_stems.len());
        }
    }
}
