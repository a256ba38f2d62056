//! SEARCH/REPLACE edit blocks: parsing model responses and applying them.
//!
//! Grammar, one block per marker triple, markers on their own lines:
//!
//! ```text
//! <<<<<<< SEARCH
//! exact text to find
//! =======
//! replacement text
//! >>>>>>> REPLACE
//! ```
//!
//! Text between blocks (including code fences) is ignored. A response with no
//! blocks but exactly one fenced code block is read as a whole-file rewrite.

use thiserror::Error;

pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("malformed edit block at line {line}: {reason}")]
    Malformed { line: usize, reason: &'static str },
    #[error("edit block {index}: search text not found in source")]
    NotFound { index: usize },
    #[error("response contains no edit blocks and no code block")]
    NoEdits,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EditBlock {
    pub search: String,
    pub replace: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParsedResponse {
    Blocks(Vec<EditBlock>),
    FullReplacement(String),
    Empty,
}

fn is_marker(line: &str, marker: &str) -> bool {
    line.trim_end() == marker
}

enum State {
    Outside,
    Search { start: usize, lines: Vec<String> },
    Replace { start: usize, search: Vec<String>, lines: Vec<String> },
}

pub fn parse_response(text: &str) -> Result<ParsedResponse, DiffError> {
    let mut blocks = Vec::new();
    let mut state = State::Outside;
    // 1-based line numbers in errors
    for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        state = match state {
            State::Outside => {
                if is_marker(line, SEARCH_MARKER) {
                    State::Search { start: n, lines: Vec::new() }
                } else if is_marker(line, REPLACE_MARKER) {
                    return Err(DiffError::Malformed { line: n, reason: "REPLACE marker outside a block" });
                } else {
                    State::Outside
                }
            }
            State::Search { start, mut lines } => {
                if is_marker(line, DIVIDER_MARKER) {
                    if lines.is_empty() {
                        return Err(DiffError::Malformed { line: start, reason: "empty SEARCH section" });
                    }
                    State::Replace { start, search: lines, lines: Vec::new() }
                } else if is_marker(line, SEARCH_MARKER) || is_marker(line, REPLACE_MARKER) {
                    return Err(DiffError::Malformed { line: n, reason: "marker inside SEARCH section" });
                } else {
                    lines.push(line.to_string());
                    State::Search { start, lines }
                }
            }
            State::Replace { start, search, mut lines } => {
                if is_marker(line, REPLACE_MARKER) {
                    blocks.push(EditBlock { search: search.join("\n"), replace: lines.join("\n") });
                    State::Outside
                } else if is_marker(line, SEARCH_MARKER) {
                    return Err(DiffError::Malformed { line: n, reason: "SEARCH marker inside REPLACE section" });
                } else {
                    lines.push(line.to_string());
                    State::Replace { start, search, lines }
                }
            }
        };
    }
    match state {
        State::Outside => {}
        State::Search { start, .. } => {
            return Err(DiffError::Malformed { line: start, reason: "SEARCH section without divider" })
        }
        State::Replace { start, .. } => {
            return Err(DiffError::Malformed { line: start, reason: "block without REPLACE terminator" })
        }
    }
    if !blocks.is_empty() {
        return Ok(ParsedResponse::Blocks(blocks));
    }
    let fenced = fenced_blocks(text);
    if fenced.len() == 1 {
        return Ok(ParsedResponse::FullReplacement(fenced.into_iter().next().unwrap()));
    }
    Ok(ParsedResponse::Empty)
}

/// Bodies of complete ``` fenced blocks; an unterminated fence is dropped.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let fence = line.trim_start().starts_with("```");
        match current.as_mut() {
            None if fence => current = Some(Vec::new()),
            None => {}
            Some(_) if fence && line.trim() == "```" => {
                let body = current.take().unwrap();
                let mut s = body.join("\n");
                s.push('\n');
                out.push(s);
            }
            Some(body) => body.push(line),
        }
    }
    out
}

/// Applies blocks in order, each against the result of the previous one.
/// Only the first occurrence of each search text is replaced.
pub fn apply(source: &str, blocks: &[EditBlock]) -> Result<String, DiffError> {
    let mut text = source.to_string();
    for (index, block) in blocks.iter().enumerate() {
        let at = text.find(&block.search).ok_or(DiffError::NotFound { index })?;
        text.replace_range(at..at + block.search.len(), &block.replace);
    }
    Ok(text)
}

/// Turns a parsed response into the edited program text.
pub fn apply_response(source: &str, parsed: &ParsedResponse) -> Result<String, DiffError> {
    match parsed {
        ParsedResponse::Blocks(blocks) => apply(source, blocks),
        ParsedResponse::FullReplacement(code) => Ok(code.clone()),
        ParsedResponse::Empty => Err(DiffError::NoEdits),
    }
}

pub fn render(blocks: &[EditBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(SEARCH_MARKER);
        out.push('\n');
        push_section(&mut out, &b.search);
        out.push_str(DIVIDER_MARKER);
        out.push('\n');
        push_section(&mut out, &b.replace);
        out.push_str(REPLACE_MARKER);
        out.push('\n');
    }
    out
}

fn push_section(out: &mut String, text: &str) {
    if !text.is_empty() {
        out.push_str(text);
        out.push('\n');
    }
}
