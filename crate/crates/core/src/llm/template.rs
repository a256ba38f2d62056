//! Versioned instruction templates and request assembly.

use super::{ChatMessage, GenerationRequest};
use crate::sandbox::CandidateLanguage;

pub const TEMPLATE_VERSION: &str = "v1";

pub const SYSTEM: &str = include_str!("../../templates/v1/system.txt");
pub const EDIT_FORMAT: &str = include_str!("../../templates/v1/edit_format.txt");
pub const META_SYSTEM: &str = include_str!("../../templates/v1/meta_system.txt");
pub const META_USER: &str = include_str!("../../templates/v1/meta_user.txt");

/// Single-pass `{{name}}` substitution; substituted text is not rescanned.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = &after[..close];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn code_block(out: &mut String, fence: &str, code: &str) {
    out.push_str("```");
    out.push_str(fence);
    out.push('\n');
    out.push_str(code);
    if !code.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
}

pub fn system_message(problem_brief: &str) -> String {
    fill(SYSTEM, &[("problem_brief", problem_brief), ("edit_format", EDIT_FORMAT.trim_end())])
}

/// User message sections, in order: prompt, ancestors (nearest first), the
/// program to edit, inspirations, then the parent's execution feedback.
pub fn user_message(request: &GenerationRequest, language: CandidateLanguage) -> String {
    let fence = language.fence_tag();
    let mut out = String::new();
    out.push_str("## Task\n");
    out.push_str(request.prompt_text.trim_end());
    out.push_str("\n\n");

    if !request.ancestor_codes.is_empty() {
        out.push_str("## Earlier versions of the program (nearest first)\n");
        for (i, code) in request.ancestor_codes.iter().enumerate() {
            let label = if i == 0 { " (parent of the program to edit)".to_string() } else { String::new() };
            out.push_str(&format!("### Ancestor {}{}\n", i + 1, label));
            code_block(&mut out, fence, code);
        }
        out.push('\n');
    }

    out.push_str("## Program to edit\n");
    code_block(&mut out, fence, &request.parent_code);
    out.push('\n');

    if !request.inspiration_codes.is_empty() {
        out.push_str("## Inspiration programs (for inspiration only; do not edit these)\n");
        for (i, code) in request.inspiration_codes.iter().enumerate() {
            out.push_str(&format!("### Inspiration {}\n", i + 1));
            code_block(&mut out, fence, code);
        }
        out.push('\n');
    }

    if let Some(feedback) = request.execution_feedback.as_deref().filter(|f| !f.trim().is_empty()) {
        out.push_str("## Execution feedback for the program to edit\n");
        out.push_str(feedback.trim_end());
        out.push_str("\n\n");
    }

    out.push_str("Reply with SEARCH/REPLACE blocks that edit the program to edit.\n");
    out
}

pub fn generation_messages(request: &GenerationRequest, language: CandidateLanguage) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(system_message(&request.problem_brief)),
        ChatMessage::user(user_message(request, language)),
    ]
}

pub fn meta_messages(problem_brief: &str, prompt: &str, code: &str, language: CandidateLanguage) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(fill(META_SYSTEM, &[("problem_brief", problem_brief)])),
        ChatMessage::user(fill(
            META_USER,
            &[("prompt", prompt.trim_end()), ("fence", language.fence_tag()), ("code", code.trim_end())],
        )),
    ]
}
