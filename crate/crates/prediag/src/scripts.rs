//! Scripted dialogues and the goal-completion harness.
//!
//! A script is a text file of user turns, one per line. An optional
//! `expect: Completed` or `expect: Failed` line records the label the
//! dialogue should end with; `#` lines are comments.

use std::fmt;
use std::path::{Path, PathBuf};

use prediag_core::dialogue::{
    compute_gcr, ChatSettings, Chatbot, GoalCompletionRate, GoalStatus, RuleSet, Session,
};
use prediag_core::KnowledgeGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueScript {
    pub name: String,
    pub expected: Option<GoalStatus>,
    pub turns: Vec<String>,
}

pub fn parse_script(name: &str, text: &str, path: &Path) -> Result<DialogueScript> {
    let mut expected = None;
    let mut turns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(label) = line.strip_prefix("expect:") {
            expected = Some(match label.trim() {
                "Completed" => GoalStatus::Completed,
                "Failed" => GoalStatus::Failed,
                other => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: i + 1,
                        message: format!("unknown label {other:?}"),
                    })
                }
            });
            continue;
        }
        turns.push(line.to_string());
    }
    if turns.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            message: "no user turns".into(),
        });
    }
    Ok(DialogueScript {
        name: name.to_string(),
        expected,
        turns,
    })
}

/// `*.txt` scripts of a directory in name order.
pub fn load_scripts(dir: &Path) -> Result<Vec<DialogueScript>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(Error::io(p))?;
            let name = p
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            parse_script(&name, &text, p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptOutcome {
    pub name: String,
    pub status: GoalStatus,
    pub expected: Option<GoalStatus>,
    pub transcript: Vec<(String, String)>,
}

impl ScriptOutcome {
    pub fn matches_expectation(&self) -> bool {
        self.expected.is_none_or(|e| e == self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcrReport {
    pub outcomes: Vec<ScriptOutcome>,
    pub rate: GoalCompletionRate,
}

impl GcrReport {
    pub fn mismatches(&self) -> Vec<&ScriptOutcome> {
        self.outcomes
            .iter()
            .filter(|o| !o.matches_expectation())
            .collect()
    }
}

/// Delimited text: one row per dialogue, then the aggregate.
impl fmt::Display for GcrReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dialogue,status,expected")?;
        for o in &self.outcomes {
            let expected = o
                .expected
                .map_or_else(|| "-".to_string(), |e| e.to_string());
            writeln!(f, "{},{},{}", o.name, o.status, expected)?;
        }
        write!(
            f,
            "GCR,{}/{},{}",
            self.rate.completed, self.rate.total, self.rate
        )
    }
}

/// Replay each script through a fresh session and score the outcomes.
pub fn run_gcr_harness(
    scripts: &[DialogueScript],
    graph: &KnowledgeGraph,
    rules: &RuleSet,
    settings: ChatSettings,
    seed: u64,
) -> Result<GcrReport> {
    let mut bot = Chatbot::new(graph, rules);
    bot.settings = settings;
    let mut outcomes = Vec::with_capacity(scripts.len());
    let mut finished = Vec::with_capacity(scripts.len());
    for script in scripts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut session = Session::new(script.name.clone(), rules);
        let mut transcript = Vec::new();
        for turn in &script.turns {
            let reply = bot.handle_turn(&mut session, turn, &mut rng)?;
            transcript.push((turn.clone(), reply.text));
        }
        finished.push(session.end());
        outcomes.push(ScriptOutcome {
            name: script.name.clone(),
            status: session.goal_status,
            expected: script.expected,
            transcript,
        });
    }
    let rate = compute_gcr(&finished)?;
    Ok(GcrReport { outcomes, rate })
}
