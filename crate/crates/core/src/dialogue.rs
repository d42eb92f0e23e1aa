//! Consultation sessions: turn handling, risk-slot extraction and goal
//! completion.
//!
//! The slot schema, keywords and prompts are data ([`RuleSet`]); the
//! `prediag` crate ships a default rules file. A session counts as
//! *completed* once every required slot is filled and the bot has told the
//! patient to upload a pathology image.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KnowledgeGraph;
use crate::matcher::{self, ResponsePolicy, SelectError, SimilarityScore};
use crate::text;

/// Reply used when no stored statement clears the similarity threshold.
pub const DEFAULT_FALLBACK: &str = "-I am sorry, but I do not understand";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DialogueError {
    #[error("required slot `{0}` is not filled")]
    MissingSlot(String),
    #[error("no dialogue outcomes to score")]
    NoOutcomes,
    #[error(transparent)]
    Select(#[from] SelectError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Number,
    YesNo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotValue {
    Number(u32),
    Flag(YesNo),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotValue::Number(n) => write!(f, "{n}"),
            SlotValue::Flag(YesNo::Yes) => f.write_str("yes"),
            SlotValue::Flag(YesNo::No) => f.write_str("no"),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_max() -> u32 {
    120
}

/// One slot of the risk questionnaire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRule {
    pub name: String,
    pub kind: SlotKind,
    /// Asked when this is the next unfilled slot.
    pub question: String,
    /// Phrases that mark a user turn as talking about this slot.
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default = "default_true")]
    pub required: bool,
    /// Number slots: value at or above this adds one risk point.
    #[serde(default)]
    pub risk_at_or_above: Option<u32>,
    /// Yes/no slots: a "yes" adds one risk point.
    #[serde(default = "default_true")]
    pub risk_indicator: bool,
    #[serde(default)]
    pub min: u32,
    #[serde(default = "default_max")]
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskBands {
    /// Scores up to this are low.
    pub low_max: u32,
    /// Scores above `low_max` and up to this are medium; higher is high.
    pub medium_max: u32,
}

impl Default for RiskBands {
    fn default() -> Self {
        Self {
            low_max: 1,
            medium_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskMessages {
    pub low: String,
    pub medium: String,
    pub high: String,
}

/// Slot schema, extraction keywords and bot prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub slots: Vec<SlotRule>,
    pub affirmative: Vec<String>,
    pub negative: Vec<String>,
    /// Phrases that start the questionnaire.
    pub inquiry_triggers: Vec<String>,
    /// Said instead of the fallback when a turn only answered a question.
    pub acknowledgement: String,
    pub upload_instruction: String,
    pub risk_messages: RiskMessages,
    #[serde(default)]
    pub bands: RiskBands,
}

fn contains_phrase(tokens: &[String], phrase: &str) -> bool {
    let words = text::normalize(phrase);
    !words.is_empty() && tokens.windows(words.len()).any(|w| w == words.as_slice())
}

impl RuleSet {
    pub fn slot(&self, name: &str) -> Option<&SlotRule> {
        self.slots.iter().find(|s| s.name == name)
    }

    fn mentions_any(tokens: &[String], phrases: &[String]) -> bool {
        phrases.iter().any(|p| contains_phrase(tokens, p))
    }

    pub fn triggers_inquiry(&self, user_text: &str) -> bool {
        Self::mentions_any(&text::normalize(user_text), &self.inquiry_triggers)
    }

    /// Fill empty slots from one user turn. `asked` is the slot the bot
    /// asked about on its previous turn, which lets a bare "yes" or "45"
    /// count as an answer. Filled slots are never overwritten.
    ///
    /// Returns the names of the slots filled by this turn.
    pub fn update_profile(
        &self,
        profile: &mut RiskProfile,
        user_text: &str,
        asked: Option<&str>,
    ) -> Vec<String> {
        let tokens = text::normalize(user_text);
        let negative = Self::mentions_any(&tokens, &self.negative);
        let affirmative = Self::mentions_any(&tokens, &self.affirmative);
        let mut filled = Vec::new();
        for rule in &self.slots {
            if profile.get(&rule.name).is_some() {
                continue;
            }
            let on_topic = Self::mentions_any(&tokens, &rule.keywords);
            let was_asked = asked == Some(rule.name.as_str());
            if !on_topic && !was_asked {
                continue;
            }
            let value = match rule.kind {
                SlotKind::Number => tokens
                    .iter()
                    .filter_map(|t| t.parse::<u32>().ok())
                    .find(|n| (rule.min..=rule.max).contains(n))
                    .map(SlotValue::Number),
                SlotKind::YesNo => {
                    if negative {
                        Some(SlotValue::Flag(YesNo::No))
                    } else if affirmative || on_topic {
                        Some(SlotValue::Flag(YesNo::Yes))
                    } else {
                        None
                    }
                }
            };
            if let Some(v) = value {
                profile.slots.insert(rule.name.clone(), Some(v));
                filled.push(rule.name.clone());
            }
        }
        filled
    }

    /// First required slot still empty, in schema order.
    pub fn next_unfilled<'a>(&'a self, profile: &RiskProfile) -> Option<&'a SlotRule> {
        self.slots
            .iter()
            .find(|r| r.required && profile.get(&r.name).is_none())
    }

    pub fn is_complete(&self, profile: &RiskProfile) -> bool {
        self.next_unfilled(profile).is_none()
    }

    /// Score the profile: one point per "yes" indicator plus one per number
    /// slot at or above its threshold, then banded.
    pub fn assess_risk(&self, profile: &RiskProfile) -> Result<RiskLevel, DialogueError> {
        if let Some(missing) = self.next_unfilled(profile) {
            return Err(DialogueError::MissingSlot(missing.name.clone()));
        }
        let mut score = 0u32;
        for rule in &self.slots {
            let point = match (profile.get(&rule.name), rule.kind) {
                (Some(SlotValue::Number(n)), SlotKind::Number) => {
                    rule.risk_at_or_above.is_some_and(|t| n >= t)
                }
                (Some(SlotValue::Flag(YesNo::Yes)), SlotKind::YesNo) => rule.risk_indicator,
                _ => false,
            };
            score += u32::from(point);
        }
        Ok(if score <= self.bands.low_max {
            RiskLevel::Low
        } else if score <= self.bands.medium_max {
            RiskLevel::Medium
        } else {
            RiskLevel::High
        })
    }

    pub fn risk_message(&self, level: RiskLevel) -> &str {
        match level {
            RiskLevel::Low | RiskLevel::Unknown => &self.risk_messages.low,
            RiskLevel::Medium => &self.risk_messages.medium,
            RiskLevel::High => &self.risk_messages.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskLevel {
    #[default]
    Unknown,
    Low,
    Medium,
    High,
}

impl RiskLevel {
    /// Medium and high risk come with an explicit recommendation to upload.
    pub fn recommends_upload(self) -> bool {
        matches!(self, RiskLevel::Medium | RiskLevel::High)
    }
}

/// Condition details collected during a session.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RiskProfile {
    pub slots: BTreeMap<String, Option<SlotValue>>,
    pub risk_level: RiskLevel,
}

impl RiskProfile {
    pub fn new(rules: &RuleSet) -> Self {
        Self {
            slots: rules.slots.iter().map(|r| (r.name.clone(), None)).collect(),
            risk_level: RiskLevel::Unknown,
        }
    }

    pub fn get(&self, slot: &str) -> Option<SlotValue> {
        self.slots.get(slot).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GoalStatus {
    #[default]
    InProgress,
    Completed,
    Failed,
}

impl fmt::Display for GoalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GoalStatus::InProgress => "InProgress",
            GoalStatus::Completed => "Completed",
            GoalStatus::Failed => "Failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub history: Vec<Turn>,
    pub risk_profile: RiskProfile,
    pub goal_status: GoalStatus,
    /// Slot the bot asked about last.
    pub pending_slot: Option<String>,
    pub inquiry_active: bool,
    pub upload_prompted: bool,
}

impl Session {
    pub fn new(id: impl Into<String>, rules: &RuleSet) -> Self {
        Self {
            id: id.into(),
            history: Vec::new(),
            risk_profile: RiskProfile::new(rules),
            goal_status: GoalStatus::InProgress,
            pending_slot: None,
            inquiry_active: false,
            upload_prompted: false,
        }
    }

    /// Close the session. An unfinished goal becomes `Failed`; a finished
    /// one stays `Completed`.
    pub fn end(&mut self) -> DialogueOutcome {
        if self.goal_status == GoalStatus::InProgress {
            self.goal_status = GoalStatus::Failed;
        }
        DialogueOutcome {
            session_id: self.id.clone(),
            completed: self.goal_status == GoalStatus::Completed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueOutcome {
    pub session_id: String,
    pub completed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    pub threshold: SimilarityScore,
    pub candidate_limit: usize,
    pub policy: ResponsePolicy,
}

impl Default for ChatSettings {
    fn default() -> Self {
        Self {
            threshold: SimilarityScore::new(matcher::DEFAULT_THRESHOLD).expect("in range"),
            candidate_limit: 100,
            policy: ResponsePolicy::First,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnReply {
    pub text: String,
    /// Similarity of the matched statement, absent on fallback.
    pub similarity: Option<SimilarityScore>,
    pub filled_slots: Vec<String>,
}

/// Read-only view of everything a turn needs.
#[derive(Debug, Clone, Copy)]
pub struct Chatbot<'a> {
    pub graph: &'a KnowledgeGraph,
    pub rules: &'a RuleSet,
    pub settings: ChatSettings,
    pub fallback: &'a str,
}

impl<'a> Chatbot<'a> {
    pub fn new(graph: &'a KnowledgeGraph, rules: &'a RuleSet) -> Self {
        Self {
            graph,
            rules,
            settings: ChatSettings::default(),
            fallback: DEFAULT_FALLBACK,
        }
    }

    /// Process one user turn and produce the bot reply.
    ///
    /// The reply is never empty: without a match it is the fallback text
    /// (or the acknowledgement, if the turn answered a slot question).
    pub fn handle_turn<R: Rng + ?Sized>(
        &self,
        session: &mut Session,
        user_text: &str,
        rng: &mut R,
    ) -> Result<TurnReply, DialogueError> {
        let processed = self.graph.preprocessor().process(user_text);
        let candidates = self
            .graph
            .search_candidates(&processed, self.settings.candidate_limit)
            .into_iter()
            .filter(|s| self.graph.has_responses(&s.text));
        let matched = matcher::find_best_match(user_text, candidates, self.settings.threshold);

        let in_progress = session.goal_status == GoalStatus::InProgress;
        let mut filled = Vec::new();
        if in_progress {
            filled = self.rules.update_profile(
                &mut session.risk_profile,
                user_text,
                session.pending_slot.as_deref(),
            );
            if !filled.is_empty() || self.rules.triggers_inquiry(user_text) {
                session.inquiry_active = true;
            }
        }

        let mut parts: Vec<String> = Vec::new();
        match &matched {
            Some(m) => {
                let responses = self.graph.responses_to(&m.statement.text);
                let r = matcher::select_response(&responses, self.settings.policy, rng)?;
                parts.push(r.text.clone());
            }
            None if !filled.is_empty() => parts.push(self.rules.acknowledgement.clone()),
            None => parts.push(self.fallback.to_string()),
        }

        if in_progress && session.inquiry_active {
            match self.rules.next_unfilled(&session.risk_profile) {
                Some(next) => {
                    parts.push(next.question.clone());
                    session.pending_slot = Some(next.name.clone());
                }
                None => {
                    let level = self.rules.assess_risk(&session.risk_profile)?;
                    session.risk_profile.risk_level = level;
                    parts.push(self.rules.risk_message(level).to_string());
                    parts.push(self.rules.upload_instruction.clone());
                    session.upload_prompted = true;
                    session.pending_slot = None;
                    session.goal_status = GoalStatus::Completed;
                }
            }
        }

        let reply = parts.join(" ");
        session.history.push(Turn {
            speaker: Speaker::User,
            text: user_text.to_string(),
        });
        session.history.push(Turn {
            speaker: Speaker::Bot,
            text: reply.clone(),
        });
        Ok(TurnReply {
            text: reply,
            similarity: matched.map(|m| m.score),
            filled_slots: filled,
        })
    }
}

/// Goal completion rate over a set of finished dialogues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalCompletionRate {
    pub completed: usize,
    pub total: usize,
    /// Percentage rounded to two decimals.
    pub percent: f64,
}

impl fmt::Display for GoalCompletionRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}%", self.percent)
    }
}

pub fn compute_gcr(outcomes: &[DialogueOutcome]) -> Result<GoalCompletionRate, DialogueError> {
    if outcomes.is_empty() {
        return Err(DialogueError::NoOutcomes);
    }
    let completed = outcomes.iter().filter(|o| o.completed).count();
    let total = outcomes.len();
    let percent = libm::round(100.0 * completed as f64 / total as f64 * 100.0) / 100.0;
    Ok(GoalCompletionRate {
        completed,
        total,
        percent,
    })
}
