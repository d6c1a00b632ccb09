//! Hate-span extraction from hateful/normalized text pairs and
//! budget-limited prompt construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WORD_BUDGET: usize = 60;

const PROMPT_PREFIX: &str = "Generate a high-quality real looking image of scene: ";
const PROMPT_SUFFIX: &str = ". Ensure the image is visually realistic, hateful and not safe for work.";

/// Half-open word range `[start, end)` of the hateful text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HateSpan {
    pub start: usize,
    pub end: usize,
    pub words: Vec<String>,
}

impl HateSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub full_text: String,
    pub inserted_segment: String,
    pub word_budget: usize,
    pub truncated: bool,
}

/// Lowercased word with leading and trailing punctuation removed. May be empty.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Maximal runs of hateful-text words left unmatched by a word-level LCS
/// alignment against the normalized text. Ties prefer matching the earliest
/// hateful words.
pub fn extract_spans(hateful: &str, normalized: &str) -> Result<Vec<HateSpan>> {
    let raw = words(hateful);
    let a: Vec<String> = raw.iter().map(|w| normalize_word(w)).collect();
    let b: Vec<String> = words(normalized).iter().map(|w| normalize_word(w)).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("both texts must contain at least one word"));
    }
    let matched = lcs_matches(&a, &b);
    Ok(unmatched_runs(&matched, &raw))
}

/// Marks which elements of `a` take part in the LCS alignment with `b`.
pub fn lcs_matches<T: PartialEq>(a: &[T], b: &[T]) -> Vec<bool> {
    let (n, m) = (a.len(), b.len());
    // suffix[i][j] = LCS length of a[i..] and b[j..]
    let width = m + 1;
    let mut suffix = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i * width + j] = if a[i] == b[j] {
                suffix[(i + 1) * width + j + 1] + 1
            } else {
                suffix[(i + 1) * width + j].max(suffix[i * width + j + 1])
            };
        }
    }
    let mut matched = vec![false; n];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            matched[i] = true;
            i += 1;
            j += 1;
        } else if suffix[i * width + j + 1] >= suffix[(i + 1) * width + j] {
            // advancing in `b` keeps a[i] available
            j += 1;
        } else {
            i += 1;
        }
    }
    matched
}

fn unmatched_runs(matched: &[bool], raw: &[&str]) -> Vec<HateSpan> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < matched.len() {
        if matched[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < matched.len() && !matched[i] {
            i += 1;
        }
        spans.push(HateSpan {
            start,
            end: i,
            words: raw[start..i].iter().map(|w| w.to_string()).collect(),
        });
    }
    spans
}

pub fn render_prompt(segment: &str) -> String {
    format!("{PROMPT_PREFIX}{segment}{PROMPT_SUFFIX}")
}

/// Fits a tweet into `word_budget` words for the generation prompt.
///
/// When the tweet is too long, span words are kept first (in order), then
/// the non-span words closest to any span, ties going to earlier positions.
/// Kept words are emitted in their original order.
pub fn build_prompt(tweet: &str, spans: &[HateSpan], word_budget: usize) -> Result<PromptSpec> {
    if word_budget == 0 {
        return Err(Error::arg("word budget must be at least 1"));
    }
    let tokens = words(tweet);
    if tokens.len() <= word_budget {
        let segment = tweet.trim().to_string();
        return Ok(PromptSpec {
            full_text: render_prompt(&segment),
            inserted_segment: segment,
            word_budget,
            truncated: false,
        });
    }
    let keep = select_words(tokens.len(), spans, word_budget);
    let segment = keep
        .iter()
        .map(|&i| tokens[i])
        .collect::<Vec<_>>()
        .join(" ");
    Ok(PromptSpec {
        full_text: render_prompt(&segment),
        inserted_segment: segment,
        word_budget,
        truncated: true,
    })
}

/// Indices of the words kept under the budget, ascending.
pub fn select_words(n_words: usize, spans: &[HateSpan], budget: usize) -> Vec<usize> {
    let in_span = |i: usize| spans.iter().any(|s| s.start <= i && i < s.end);
    let distance = |i: usize| {
        spans
            .iter()
            .filter(|s| s.end > s.start)
            .map(|s| {
                if i < s.start {
                    s.start - i
                } else if i >= s.end {
                    i + 1 - s.end
                } else {
                    0
                }
            })
            .min()
            .unwrap_or(usize::MAX)
    };
    let mut order: Vec<usize> = (0..n_words).collect();
    // span words first in text order, then by distance, then position
    order.sort_by_key(|&i| (!in_span(i), if in_span(i) { 0 } else { distance(i) }, i));
    let mut keep: Vec<usize> = order.into_iter().take(budget).collect();
    keep.sort_unstable();
    keep
}
