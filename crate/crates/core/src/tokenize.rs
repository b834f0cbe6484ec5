//! Text/token codec shared by the grammar trie and the token scorers.

use std::ops::Range;

/// Separator between subgoals in a serialized plan.
pub const SEPARATOR: &str = ",";
/// Stop marker terminating a serialized plan.
pub const STOP: &str = ".";

/// Converts between text and token sequences.
pub trait Tokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Vec<String>;

    /// Tokens together with the byte range each one occupies in `text`.
    fn encode_with_spans(&self, text: &str) -> Vec<(String, Range<usize>)>;

    fn decode(&self, tokens: &[String]) -> String;
}

/// Whitespace word tokenizer that splits `.` and `,` off as standalone tokens.
///
/// `decode` attaches punctuation to the preceding word, so for any text in
/// canonical spacing (`"pick up fork, put in cup."`) decoding the encoding
/// gives the text back.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WordTokenizer;

fn is_punct(c: char) -> bool {
    c == '.' || c == ','
}

impl Tokenizer for WordTokenizer {
    fn encode(&self, text: &str) -> Vec<String> {
        self.encode_with_spans(text)
            .into_iter()
            .map(|(tok, _)| tok)
            .collect()
    }

    fn encode_with_spans(&self, text: &str) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() || is_punct(c) {
                if let Some(start) = word_start.take() {
                    out.push((text[start..i].to_string(), start..i));
                }
                if is_punct(c) {
                    out.push((c.to_string(), i..i + c.len_utf8()));
                }
            } else if word_start.is_none() {
                word_start = Some(i);
            }
        }
        if let Some(start) = word_start {
            out.push((text[start..].to_string(), start..text.len()));
        }
        out
    }

    fn decode(&self, tokens: &[String]) -> String {
        let mut out = String::new();
        for tok in tokens {
            let punct = tok.chars().all(is_punct) && !tok.is_empty();
            if !out.is_empty() && !punct {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }
}
