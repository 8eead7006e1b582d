//! Address normalization, trigram string distance and building numbers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{LazyLock, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("abbreviation table line {line}: expected `abbrev=expansion`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("abbreviation {key:?} expands to a word that is itself abbreviated ({word:?})")]
    Cyclic { key: String, word: String },
    #[error("reading abbreviation table: {0}")]
    Io(#[from] std::io::Error),
}

/// Default French street-type abbreviations, in `abbrev=expansion` form.
pub const DEFAULT_ABBREVIATIONS: &str = "\
r.=rue
bd=boulevard
boul.=boulevard
av.=avenue
pl.=place
st=saint
ste=sainte
fg=faubourg
fbg=faubourg
faub.=faubourg
imp.=impasse
";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedAddress {
    pub normalized: String,
    pub building_number: Option<u32>,
}

/// Address normalizer driven by a word-level abbreviation table.
#[derive(Debug, Clone)]
pub struct Normalizer {
    abbreviations: HashMap<String, String>,
}

static DEFAULT_NORMALIZER: LazyLock<Normalizer> = LazyLock::new(|| {
    Normalizer::from_table(DEFAULT_ABBREVIATIONS).expect("built-in abbreviation table is valid")
});

fn abbreviation_key(word: &str) -> String {
    word.trim().replace('.', "").to_lowercase()
}

fn clean_expansion(text: &str) -> String {
    fold_and_lowercase(text)
        .replace('.', "")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl Normalizer {
    /// Builds a normalizer from `(abbreviation, expansion)` pairs. Dots in
    /// abbreviations are ignored, so `r.` also matches a bare `r`.
    pub fn new<I, K, V>(pairs: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let abbreviations: HashMap<String, String> = pairs
            .into_iter()
            .map(|(k, v)| (abbreviation_key(k.as_ref()), clean_expansion(v.as_ref())))
            .collect();
        // an expansion that contains an abbreviation would break idempotence
        for (key, expansion) in &abbreviations {
            for word in expansion.split(|c: char| c.is_whitespace() || c == '-') {
                if abbreviations.contains_key(word) {
                    return Err(TextError::Cyclic {
                        key: key.clone(),
                        word: word.to_string(),
                    });
                }
            }
        }
        Ok(Self { abbreviations })
    }

    /// Parses a plain-text table with one `abbrev=expansion` per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_table(text: &str) -> Result<Self, TextError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            match trimmed.split_once('=') {
                Some((k, v)) if !abbreviation_key(k).is_empty() && !v.trim().is_empty() => {
                    pairs.push((k.to_string(), v.to_string()))
                }
                _ => {
                    return Err(TextError::BadLine {
                        line: i + 1,
                        text: line.to_string(),
                    })
                }
            }
        }
        Self::new(pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        Self::from_table(&std::fs::read_to_string(path)?)
    }

    pub fn normalize(&self, raw: &str) -> NormalizedAddress {
        let folded = fold_and_lowercase(raw);
        let mut words: Vec<String> = Vec::new();
        for token in folded.split(' ') {
            let parts: Vec<String> = token
                .split('-')
                .map(|part| {
                    let bare = part.replace('.', "");
                    match self.abbreviations.get(&bare) {
                        Some(expansion) => expansion.clone(),
                        None => bare,
                    }
                })
                .filter(|p| !p.is_empty())
                .collect();
            if !parts.is_empty() {
                words.push(parts.join("-"));
            }
        }
        let normalized = words.join(" ");
        let building_number = leading_number(&normalized);
        NormalizedAddress {
            normalized,
            building_number,
        }
    }
}

impl Default for Normalizer {
    fn default() -> Self {
        DEFAULT_NORMALIZER.clone()
    }
}

static INSTALLED_NORMALIZER: OnceLock<Normalizer> = OnceLock::new();

/// Replaces the process-wide abbreviation table used by [`normalize`], and
/// therefore by the registry and the geocoder. Must run before any data is
/// loaded; a second call is refused and hands the normalizer back.
pub fn install_normalizer(normalizer: Normalizer) -> Result<(), Normalizer> {
    INSTALLED_NORMALIZER.set(normalizer)
}

/// Normalizes with the installed abbreviation table, or the built-in one.
pub fn normalize(raw: &str) -> NormalizedAddress {
    INSTALLED_NORMALIZER.get().unwrap_or(&DEFAULT_NORMALIZER).normalize(raw)
}

fn fold_once(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.nfkd() {
        if is_combining_mark(c) {
            continue;
        }
        match c {
            'œ' => out.push_str("oe"),
            'Œ' => out.push_str("OE"),
            'æ' => out.push_str("ae"),
            'Æ' => out.push_str("AE"),
            'ß' => out.push_str("ss"),
            'ø' => out.push('o'),
            'Ø' => out.push('O'),
            'đ' | 'Đ' => out.push('d'),
            'ł' | 'Ł' => out.push('l'),
            // apostrophes split words: "l'Épée" -> "l epee"
            '\'' | '’' | '‘' | 'ʼ' | '`' => out.push(' '),
            c if c.is_alphanumeric() || c == '-' || c == '.' => out.extend(c.to_lowercase()),
            _ => out.push(' '),
        }
    }
    out
}

/// Accent folding plus lowercasing, iterated to a fixpoint: a few compatibility
/// characters decompose to uppercase letters or lowercase into combining forms.
fn fold_and_lowercase(raw: &str) -> String {
    let mut current = fold_once(raw);
    for _ in 0..4 {
        let next = fold_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn leading_number(normalized: &str) -> Option<u32> {
    let first = normalized.split(' ').next()?;
    let digits: String = first.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        None
    } else {
        digits.parse().ok()
    }
}

/// A padded 3-character window, packed into 63 bits (21 bits per char).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trigram(u64);

impl Trigram {
    fn pack(chars: [char; 3]) -> Self {
        Self(((chars[0] as u64) << 42) | ((chars[1] as u64) << 21) | chars[2] as u64)
    }

    pub fn chars(self) -> [char; 3] {
        let unpack = |shift: u32| char::from_u32(((self.0 >> shift) & 0x1F_FFFF) as u32).unwrap_or('\u{FFFD}');
        [unpack(42), unpack(21), unpack(0)]
    }
}

impl std::fmt::Display for Trigram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in self.chars() {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Sorted, deduplicated set of trigrams.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrigramSet(Vec<Trigram>);

impl TrigramSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Trigram> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, t: &Trigram) -> bool {
        self.0.binary_search(t).is_ok()
    }

    /// Size of the intersection with `other` (merge of two sorted lists).
    pub fn shared(&self, other: &TrigramSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(Trigram::to_string).collect()
    }
}

/// Trigrams of every word (maximal alphanumeric run) of the lowercased
/// string, each word padded with two leading spaces and one trailing space.
pub fn trigram_set(s: &str) -> TrigramSet {
    let lower = s.to_lowercase();
    let mut grams = Vec::new();
    let mut window: Vec<char> = Vec::new();
    let flush = |word: &mut Vec<char>, grams: &mut Vec<Trigram>| {
        if word.is_empty() {
            return;
        }
        let mut padded = Vec::with_capacity(word.len() + 3);
        padded.extend([' ', ' ']);
        padded.append(word);
        padded.push(' ');
        grams.extend(padded.windows(3).map(|w| Trigram::pack([w[0], w[1], w[2]])));
    };
    for c in lower.chars() {
        if c.is_alphanumeric() {
            window.push(c);
        } else {
            flush(&mut window, &mut grams);
        }
    }
    flush(&mut window, &mut grams);
    grams.sort_unstable();
    grams.dedup();
    TrigramSet(grams)
}

/// Jaccard distance from set sizes: `1 − shared / (n + m − shared)`, and 0
/// when both sets are empty.
pub fn distance_from_counts(shared: usize, n: usize, m: usize) -> f64 {
    let union = n + m - shared;
    if union == 0 {
        0.0
    } else {
        1.0 - shared as f64 / union as f64
    }
}

pub fn trigram_distance(a: &TrigramSet, b: &TrigramSet) -> f64 {
    distance_from_counts(a.shared(b), a.len(), b.len())
}

/// Trigram string distance in `[0, 1]`.
pub fn string_distance(s1: &str, s2: &str) -> f64 {
    trigram_distance(&trigram_set(s1), &trigram_set(s2))
}

/// Parity penalty added when the two numbers lie on opposite sides of the street.
pub const PARITY_PENALTY: f64 = 10.0;

/// `|b_d − b_i|`, plus [`PARITY_PENALTY`] when parities differ.
pub fn building_number_distance(query: u32, candidate: u32) -> f64 {
    let diff = f64::from(query.abs_diff(candidate));
    if query % 2 == candidate % 2 {
        diff
    } else {
        diff + PARITY_PENALTY
    }
}
