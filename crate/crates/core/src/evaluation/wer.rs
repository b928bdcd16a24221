//! Word and character error rates over normalized text.

use serde::{Deserialize, Serialize, Serializer};

use crate::arabic_text::normalize_default;

/// Edit operations of one minimum-cost alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub hits: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn distance(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Levenshtein distance with unit costs, in O(min) memory.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let diag = prev[j] + usize::from(x != y);
            cur[j + 1] = diag.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Minimum-cost alignment of `hypothesis` against `reference`.
///
/// The backtrace walks from the end and, among equally cheap moves, prefers a
/// match, then substitution, then insertion, then deletion. The total is the
/// same for every tie-break; the split into S/I/D is what the order fixes.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for j in 0..=m {
        d[j] = j as u32;
    }
    for i in 1..=n {
        d[i * w] = i as u32;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + u32::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * w + j - 1];
            if reference[i - 1] == hypothesis[j - 1] && here == diag {
                counts.hits += 1;
                i -= 1;
                j -= 1;
                continue;
            }
            if here == diag + 1 {
                counts.substitutions += 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == d[i * w + j - 1] + 1 {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Error rates of one hypothesis against one reference.
///
/// When the reference is empty and the hypothesis is not, the rate is
/// `+inf` in memory and `null` in JSON, with `empty_reference` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreReport {
    #[serde(serialize_with = "finite_or_null")]
    pub wer: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub cer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_tokens: usize,
    pub hyp_tokens: usize,
    pub char_edits: usize,
    pub ref_chars: usize,
    pub empty_reference: bool,
}

fn rate(edits: usize, reference_len: usize) -> f64 {
    match (edits, reference_len) {
        (0, _) => 0.0,
        (_, 0) => f64::INFINITY,
        (e, n) => e as f64 / n as f64,
    }
}

/// Normalizes both strings, then scores words (split on spaces) and
/// characters (codepoints, spaces included).
pub fn word_error_rate(reference: &str, hypothesis: &str) -> ScoreReport {
    let r = normalize_default(reference);
    let h = normalize_default(hypothesis);
    let r_tokens: Vec<&str> = r.tokens().collect();
    let h_tokens: Vec<&str> = h.tokens().collect();
    let words = align(&r_tokens, &h_tokens);

    let r_chars: Vec<char> = r.as_str().chars().collect();
    let h_chars: Vec<char> = h.as_str().chars().collect();
    let char_edits = edit_distance(&r_chars, &h_chars);

    ScoreReport {
        wer: rate(words.distance(), r_tokens.len()),
        cer: rate(char_edits, r_chars.len()),
        substitutions: words.substitutions,
        insertions: words.insertions,
        deletions: words.deletions,
        ref_tokens: r_tokens.len(),
        hyp_tokens: h_tokens.len(),
        char_edits,
        ref_chars: r_chars.len(),
        empty_reference: r_tokens.is_empty() && !h_tokens.is_empty(),
    }
}

/// Pooled rates over aligned utterance pairs: total edits over total
/// reference length, not the mean of per-utterance rates.
pub fn corpus_error_rate<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> ScoreReport {
    let mut total = ScoreReport {
        wer: 0.0,
        cer: 0.0,
        substitutions: 0,
        insertions: 0,
        deletions: 0,
        ref_tokens: 0,
        hyp_tokens: 0,
        char_edits: 0,
        ref_chars: 0,
        empty_reference: false,
    };
    for (r, h) in pairs {
        let s = word_error_rate(r, h);
        total.substitutions += s.substitutions;
        total.insertions += s.insertions;
        total.deletions += s.deletions;
        total.ref_tokens += s.ref_tokens;
        total.hyp_tokens += s.hyp_tokens;
        total.char_edits += s.char_edits;
        total.ref_chars += s.ref_chars;
    }
    let word_edits = total.substitutions + total.insertions + total.deletions;
    total.wer = rate(word_edits, total.ref_tokens);
    total.cer = rate(total.char_edits, total.ref_chars);
    total.empty_reference = total.ref_tokens == 0 && total.hyp_tokens > 0;
    total
}
