//! Plain-text training corpora.
//!
//! A corpus file holds one or more conversations separated by blank
//! lines. Each line of a conversation is a reply to the line above it.
//! Lines starting with `#` are comments.

use std::path::{Path, PathBuf};

use prediag_core::KnowledgeGraph;

use crate::error::{Error, Result};

pub fn parse_conversations(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line.to_string());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// `*.txt` files of a directory in name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

/// Train on every conversation of every file, tagging statements with
/// the file stem. On any error the graph is left as it was and the error
/// names the offending file. Returns the number of statements inserted
/// or reinforced.
pub fn train_from_files(graph: &mut KnowledgeGraph, files: &[PathBuf]) -> Result<usize> {
    let mut trained = graph.clone();
    let mut count = 0;
    for path in files {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let tag = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        for conversation in parse_conversations(&text) {
            count += trained
                .train_from_list(&conversation, tag.as_deref())
                .map_err(|source| Error::Corpus {
                    path: path.clone(),
                    source,
                })?;
        }
    }
    *graph = trained;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_lines_split_conversations() {
        let c = parse_conversations("# greetings\nHello\nHi there\n\n\nBye\n  Goodbye  \n");
        assert_eq!(c, vec![vec!["Hello", "Hi there"], vec!["Bye", "Goodbye"]]);
    }

    #[test]
    fn failing_file_leaves_graph_alone() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("a.txt");
        let bad = dir.path().join("b.txt");
        std::fs::write(&good, "Hello\nHi there\n").unwrap();
        std::fs::write(&bad, "How are you\n!!!\n").unwrap();
        let mut g = KnowledgeGraph::default();
        let err = train_from_files(&mut g, &[good.clone(), bad.clone()]).unwrap_err();
        assert!(err.to_string().contains("b.txt"), "{err}");
        assert!(g.is_empty());
        assert_eq!(train_from_files(&mut g, &[good]).unwrap(), 2);
        assert_eq!(g.responses_to("Hello")[0].text, "Hi there");
        assert_eq!(g.responses_to("Hello")[0].tag.as_deref(), Some("a"));
    }

    #[test]
    fn missing_file_is_named() {
        let mut g = KnowledgeGraph::default();
        let err = train_from_files(&mut g, &[PathBuf::from("/nonexistent/x.txt")]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.txt"));
    }
}
