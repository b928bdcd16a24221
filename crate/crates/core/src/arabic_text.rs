//! Transcript normalization applied to every model output and every scoring
//! reference.
//!
//! The pipeline is defined over Unicode scalar values and runs these rules in
//! order:
//!
//! 1. Delete diacritics and the standalone hamza.
//! 2. Replace hamza/madda carrier letters with their bare base letter.
//! 3. Map eastern Arabic digits to ASCII digits.
//! 4. Delete every punctuation (`P*`) and symbol (`S*`) codepoint except
//!    `%` (U+0025) and `@` (U+0040). The Arabic percent sign U+066A becomes
//!    U+0025 when [`NormalizationConfig::map_arabic_percent_to_ascii`] is set.
//! 5. Delete ASCII Latin letters `[A-Za-z]`.
//! 6. Collapse whitespace runs to a single U+0020 and trim.
//!
//! | Rule | Input codepoints                         | Output          |
//! |------|------------------------------------------|-----------------|
//! | 1    | U+064B..=U+065F, U+0670                  | deleted         |
//! | 1    | U+0621 (ء)                                | deleted         |
//! | 2    | U+0622 (آ), U+0623 (أ), U+0625 (إ)        | U+0627 (ا)      |
//! | 2    | U+0624 (ؤ)                                | U+0648 (و)      |
//! | 2    | U+0626 (ئ)                                | U+064A (ي)      |
//! | 3    | U+0660..=U+0669, U+06F0..=U+06F9         | U+0030..=U+0039 |
//! | 4    | U+066A (٪)                                | U+0025 (%)      |
//! | 4    | general category `P*`/`S*` except %, @   | deleted         |
//! | 5    | U+0041..=U+005A, U+0061..=U+007A         | deleted         |
//!
//! Alef maqsura (ى) and ta marbuta (ة) are left untouched.
//!
//! Every rule is a per-codepoint map on a disjoint input set, so [`normalize`]
//! runs them in a single pass. The individual passes are also exported; the
//! tests use them to check that the fused pass agrees with the sequential
//! definition.

use std::fmt;

use icu_properties::props::{GeneralCategory, GeneralCategoryGroup};
use icu_properties::CodePointMapData;
use serde::{Deserialize, Serialize};

const HAMZA: char = '\u{0621}';
const ALEF: char = '\u{0627}';
const WAW: char = '\u{0648}';
const YEH: char = '\u{064A}';
const ARABIC_PERCENT: char = '\u{066A}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub map_arabic_percent_to_ascii: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            map_arabic_percent_to_ascii: true,
            collapse_whitespace: true,
        }
    }
}

/// Text that has been through [`normalize`]. Only constructible by normalizing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whitespace-separated tokens.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ').filter(|t| !t.is_empty())
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn is_diacritic(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{065F}' | '\u{0670}')
}

pub fn is_eastern_digit(c: char) -> bool {
    matches!(c, '\u{0660}'..='\u{0669}' | '\u{06F0}'..='\u{06F9}')
}

/// True for codepoints in general categories `P*` or `S*`.
pub fn is_punctuation_or_symbol(c: char) -> bool {
    let gc: GeneralCategory = CodePointMapData::<GeneralCategory>::new().get(c);
    GeneralCategoryGroup::Punctuation.contains(gc) || GeneralCategoryGroup::Symbol.contains(gc)
}

fn drop_diacritic(c: char) -> Option<char> {
    if is_diacritic(c) || c == HAMZA {
        None
    } else {
        Some(c)
    }
}

fn unseat_hamza(c: char) -> char {
    match c {
        '\u{0622}' | '\u{0623}' | '\u{0625}' => ALEF,
        '\u{0624}' => WAW,
        '\u{0626}' => YEH,
        other => other,
    }
}

fn westernize_digit(c: char) -> char {
    match c {
        '\u{0660}'..='\u{0669}' => char::from(b'0' + (c as u32 - 0x0660) as u8),
        '\u{06F0}'..='\u{06F9}' => char::from(b'0' + (c as u32 - 0x06F0) as u8),
        other => other,
    }
}

fn drop_symbol(c: char, cfg: &NormalizationConfig) -> Option<char> {
    match c {
        '%' | '@' => Some(c),
        ARABIC_PERCENT if cfg.map_arabic_percent_to_ascii => Some('%'),
        _ if is_punctuation_or_symbol(c) => None,
        _ => Some(c),
    }
}

fn drop_latin(c: char) -> Option<char> {
    if c.is_ascii_alphabetic() {
        None
    } else {
        Some(c)
    }
}

fn map_char(c: char, cfg: &NormalizationConfig) -> Option<char> {
    let c = drop_diacritic(c)?;
    let c = westernize_digit(unseat_hamza(c));
    let c = drop_symbol(c, cfg)?;
    drop_latin(c)
}

/// Normalizes `raw` according to the rule table in the module docs.
pub fn normalize(raw: &str, cfg: &NormalizationConfig) -> NormalizedText {
    let mapped = raw.chars().filter_map(|c| map_char(c, cfg));
    if cfg.collapse_whitespace {
        NormalizedText(collapse_chars(mapped))
    } else {
        NormalizedText(mapped.collect())
    }
}

/// [`normalize`] with the default configuration.
pub fn normalize_default(raw: &str) -> NormalizedText {
    normalize(raw, &NormalizationConfig::default())
}

pub fn is_normalized(text: &str) -> bool {
    normalize_default(text).as_str() == text
}

fn collapse_chars(chars: impl Iterator<Item = char>) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for c in chars {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(c);
    }
    out
}

/// Rule 1 on its own.
pub fn remove_diacritics(s: &str) -> String {
    s.chars().filter_map(drop_diacritic).collect()
}

/// Rule 2 on its own.
pub fn unseat_hamza_carriers(s: &str) -> String {
    s.chars().map(unseat_hamza).collect()
}

/// Rule 3 on its own.
pub fn westernize_digits(s: &str) -> String {
    s.chars().map(westernize_digit).collect()
}

/// Rule 4 on its own.
pub fn remove_punctuation(s: &str, cfg: &NormalizationConfig) -> String {
    s.chars().filter_map(|c| drop_symbol(c, cfg)).collect()
}

/// Rule 5 on its own.
pub fn remove_latin(s: &str) -> String {
    s.chars().filter_map(drop_latin).collect()
}

/// Rule 6 on its own.
pub fn collapse_whitespace(s: &str) -> String {
    collapse_chars(s.chars())
}
