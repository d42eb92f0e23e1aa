//! Statement/response graph with a bigram index.
//!
//! Every trained sentence becomes a [`Statement`]. A statement that was
//! said in reply to another one adds an edge from the prompting text to the
//! reply, so conversations that share a sentence merge into one node.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Preprocessor, ProcessedText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u64);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("statement text is empty after normalization")]
    EmptyStatement,
    #[error("cannot train from an empty conversation")]
    EmptyConversation,
    #[error("line {line} of the conversation is empty after normalization")]
    EmptyLine { line: usize },
    #[error("duplicate statement id {0}")]
    DuplicateId(StatementId),
    #[error("statement {0} has occurrence count 0")]
    ZeroCount(StatementId),
    #[error("statement {id} and {other} share text and prompt")]
    DuplicatePair { id: StatementId, other: StatementId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub id: StatementId,
    pub text: String,
    pub processed: ProcessedText,
    pub in_response_to: Option<String>,
    pub tag: Option<String>,
    pub occurrence_count: u32,
}

/// Persisted form of a statement; the processed text is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub id: StatementId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_response_to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub occurrence_count: u32,
}

impl From<&Statement> for StatementRecord {
    fn from(s: &Statement) -> Self {
        Self {
            id: s.id,
            text: s.text.clone(),
            in_response_to: s.in_response_to.clone(),
            tag: s.tag.clone(),
            occurrence_count: s.occurrence_count,
        }
    }
}

type PairKey = (String, Option<String>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    preprocessor: Preprocessor,
    statements: BTreeMap<StatementId, Statement>,
    by_pair: BTreeMap<PairKey, StatementId>,
    response_edges: BTreeMap<String, BTreeSet<StatementId>>,
    bigram_index: BTreeMap<String, BTreeSet<StatementId>>,
    next_id: u64,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        Self::new(Preprocessor::default())
    }
}

impl KnowledgeGraph {
    pub fn new(preprocessor: Preprocessor) -> Self {
        Self {
            preprocessor,
            statements: BTreeMap::new(),
            by_pair: BTreeMap::new(),
            response_edges: BTreeMap::new(),
            bigram_index: BTreeMap::new(),
            next_id: 1,
        }
    }

    /// Rebuild a graph from persisted records. Edges and the bigram index
    /// are derived, so only the records are needed.
    pub fn from_records<I>(preprocessor: Preprocessor, records: I) -> Result<Self, StoreError>
    where
        I: IntoIterator<Item = StatementRecord>,
    {
        let mut graph = Self::new(preprocessor);
        for rec in records {
            if graph.statements.contains_key(&rec.id) {
                return Err(StoreError::DuplicateId(rec.id));
            }
            if rec.occurrence_count == 0 {
                return Err(StoreError::ZeroCount(rec.id));
            }
            let processed = graph.preprocessor.process(&rec.text);
            if processed.normalized_tokens.is_empty() {
                return Err(StoreError::EmptyStatement);
            }
            let key = (rec.text.clone(), rec.in_response_to.clone());
            if let Some(&other) = graph.by_pair.get(&key) {
                return Err(StoreError::DuplicatePair { id: rec.id, other });
            }
            graph.by_pair.insert(key, rec.id);
            graph.next_id = graph.next_id.max(rec.id.0 + 1);
            graph.link(Statement {
                id: rec.id,
                text: rec.text,
                processed,
                in_response_to: rec.in_response_to,
                tag: rec.tag,
                occurrence_count: rec.occurrence_count,
            });
        }
        Ok(graph)
    }

    pub fn records(&self) -> impl Iterator<Item = StatementRecord> + '_ {
        self.statements.values().map(StatementRecord::from)
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn get(&self, id: StatementId) -> Option<&Statement> {
        self.statements.get(&id)
    }

    pub fn statements(&self) -> impl DoubleEndedIterator<Item = &Statement> {
        self.statements.values()
    }

    pub fn response_edges(&self) -> &BTreeMap<String, BTreeSet<StatementId>> {
        &self.response_edges
    }

    pub fn bigram_index(&self) -> &BTreeMap<String, BTreeSet<StatementId>> {
        &self.bigram_index
    }

    /// Statements recorded as replies to `text`, ordered by id.
    pub fn responses_to(&self, text: &str) -> Vec<&Statement> {
        self.response_edges
            .get(text)
            .into_iter()
            .flatten()
            .filter_map(|id| self.statements.get(id))
            .collect()
    }

    pub fn has_responses(&self, text: &str) -> bool {
        self.response_edges.get(text).is_some_and(|s| !s.is_empty())
    }

    /// Store a statement, or bump the count of an identical
    /// (text, prompt) pair. Returns the statement id either way.
    pub fn insert_statement(
        &mut self,
        text: &str,
        in_response_to: Option<&str>,
        tag: Option<&str>,
    ) -> Result<StatementId, StoreError> {
        let text = text.trim();
        let processed = self.preprocessor.process(text);
        if processed.normalized_tokens.is_empty() {
            return Err(StoreError::EmptyStatement);
        }
        let key = (text.to_string(), in_response_to.map(str::to_string));
        if let Some(&id) = self.by_pair.get(&key) {
            let s = self
                .statements
                .get_mut(&id)
                .expect("pair index points at a statement");
            s.occurrence_count = s.occurrence_count.saturating_add(1);
            return Ok(id);
        }
        let id = StatementId(self.next_id);
        self.next_id += 1;
        self.by_pair.insert(key, id);
        self.link(Statement {
            id,
            text: text.to_string(),
            processed,
            in_response_to: in_response_to.map(str::to_string),
            tag: tag.map(str::to_string),
            occurrence_count: 1,
        });
        Ok(id)
    }

    fn link(&mut self, statement: Statement) {
        let id = statement.id;
        for bigram in statement.processed.bigrams() {
            self.bigram_index
                .entry(bigram.to_string())
                .or_default()
                .insert(id);
        }
        if let Some(prompt) = &statement.in_response_to {
            self.response_edges
                .entry(prompt.clone())
                .or_default()
                .insert(id);
        }
        self.statements.insert(id, statement);
    }

    /// Candidates for the matcher, ranked by number of bigram tokens shared
    /// with the query (ties to lower id). Statements sharing nothing fill the
    /// remaining slots in id order, so a query without usable bigrams still
    /// gets candidates.
    pub fn search_candidates(&self, query: &ProcessedText, limit: usize) -> Vec<&Statement> {
        if limit == 0 {
            return Vec::new();
        }
        let query_bigrams: BTreeSet<&str> = query.bigrams().collect();
        let mut shared: BTreeMap<StatementId, usize> = BTreeMap::new();
        for bigram in query_bigrams {
            for &id in self.bigram_index.get(bigram).into_iter().flatten() {
                *shared.entry(id).or_default() += 1;
            }
        }
        let mut ranked: Vec<(usize, StatementId)> =
            shared.iter().map(|(&id, &n)| (n, id)).collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut out: Vec<&Statement> = ranked
            .into_iter()
            .take(limit)
            .map(|(_, id)| &self.statements[&id])
            .collect();
        if out.len() < limit {
            let rest = self
                .statements
                .values()
                .filter(|s| !shared.contains_key(&s.id))
                .take(limit - out.len());
            out.extend(rest);
        }
        out
    }

    /// List training: each line is a reply to the line before it.
    /// Returns the number of insert operations performed.
    ///
    /// All lines are checked before anything is inserted, so a bad line
    /// leaves the graph untouched.
    pub fn train_from_list<S: AsRef<str>>(
        &mut self,
        lines: &[S],
        tag: Option<&str>,
    ) -> Result<usize, StoreError> {
        if lines.is_empty() {
            return Err(StoreError::EmptyConversation);
        }
        if let Some(line) = lines.iter().position(|l| {
            self.preprocessor
                .process(l.as_ref())
                .normalized_tokens
                .is_empty()
        }) {
            return Err(StoreError::EmptyLine { line: line + 1 });
        }
        let mut previous: Option<&str> = None;
        for line in lines {
            let line = line.as_ref().trim();
            self.insert_statement(line, previous, tag)?;
            previous = Some(line);
        }
        Ok(lines.len())
    }

    /// Rebuild the bigram index from the statements alone.
    pub fn rebuilt_bigram_index(&self) -> BTreeMap<String, BTreeSet<StatementId>> {
        let mut index: BTreeMap<String, BTreeSet<StatementId>> = BTreeMap::new();
        for s in self.statements.values() {
            for b in self.preprocessor.process(&s.text).bigrams() {
                index.entry(b.to_string()).or_default().insert(s.id);
            }
        }
        index
    }
}
