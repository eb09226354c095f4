//! Sentence segmentation of feedback text.
//!
//! A boundary is placed after a run of `.`, `!` or `?` when it is followed by
//! whitespace and then an uppercase letter or a digit. Backtick code spans are
//! atomic: nothing inside them is ever a boundary, and a code block that follows
//! a sentence stays attached to it. The end of a fenced block may itself close a
//! sentence under the same whitespace + uppercase/digit rule.

use thiserror::Error;

/// Tokens that end in a period without ending a sentence. Compared lowercase.
pub const ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "etc.", "vs."];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("feedback text is empty")]
    Empty,
}

pub fn segment_sentences(text: &str) -> Result<Vec<String>, SegmentError> {
    if text.trim().is_empty() {
        return Err(SegmentError::Empty);
    }

    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if c == '`' {
            let ticks = run_length(&chars, i, '`');
            let end = match find_closing(&chars, i + ticks, ticks) {
                Some(close) => close + ticks,
                None => chars.len(),
            };
            // closing fence of a block acts like a terminator
            if ticks >= 3 && boundary_follows(&chars, end) {
                cuts.push(byte_at(text, &chars, end));
            }
            i = end;
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            let mut end = i;
            while end < chars.len() && matches!(chars[end].1, '.' | '!' | '?') {
                end += 1;
            }
            if boundary_follows(&chars, end) && !ends_with_abbreviation(&chars, end) {
                cuts.push(byte_at(text, &chars, end));
            }
            i = end;
            continue;
        }
        i += 1;
    }

    let mut sentences = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        let piece = text[start..cut].trim();
        if !piece.is_empty() {
            sentences.push(piece.to_string());
        }
        start = cut;
    }
    Ok(sentences)
}

fn byte_at(text: &str, chars: &[(usize, char)], idx: usize) -> usize {
    chars.get(idx).map_or(text.len(), |(b, _)| *b)
}

fn run_length(chars: &[(usize, char)], from: usize, ch: char) -> usize {
    chars[from..].iter().take_while(|(_, c)| *c == ch).count()
}

/// Index of the first run of exactly `ticks` backticks at or after `from`.
fn find_closing(chars: &[(usize, char)], from: usize, ticks: usize) -> Option<usize> {
    let mut j = from;
    while j < chars.len() {
        if chars[j].1 == '`' {
            let run = run_length(chars, j, '`');
            if run == ticks {
                return Some(j);
            }
            j += run;
        } else {
            j += 1;
        }
    }
    None
}

fn boundary_follows(chars: &[(usize, char)], at: usize) -> bool {
    let mut j = at;
    if j >= chars.len() || !chars[j].1.is_whitespace() {
        return false;
    }
    while j < chars.len() && chars[j].1.is_whitespace() {
        j += 1;
    }
    j < chars.len() && (chars[j].1.is_uppercase() || chars[j].1.is_ascii_digit())
}

fn ends_with_abbreviation(chars: &[(usize, char)], end: usize) -> bool {
    let start = chars[..end]
        .iter()
        .rposition(|(_, c)| c.is_whitespace() || matches!(c, '(' | '"' | '\''))
        .map_or(0, |p| p + 1);
    let token: String = chars[start..end].iter().map(|(_, c)| c.to_ascii_lowercase()).collect();
    ABBREVIATIONS.contains(&token.as_str())
}

/// Whitespace-collapsed form used to check segmentation is lossless.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
