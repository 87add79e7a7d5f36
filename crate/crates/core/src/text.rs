//! Tokenization and key normalization used by extraction, embedding and
//! grounding.

use std::collections::BTreeSet;

/// Verbs that name the same verification goal; all stem to `verify`.
const VERIFY_VERBS: &[&str] = &[
    "verify", "verifies", "verified", "verifying", "verification", "check", "checks", "checked",
    "checking", "validate", "validates", "validated", "validating", "validation", "confirm",
    "confirms", "confirmed", "confirming", "confirmation",
];

/// Lowercase alphanumeric tokens, split on everything else.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().collect()
}

fn stem_verb(token: &str) -> &str {
    if VERIFY_VERBS.contains(&token) {
        "verify"
    } else {
        token
    }
}

/// Normalize a free-form verification goal or key into a canonical key:
/// lowercase, whitespace/punctuation collapsed to `_`, verification verbs
/// stemmed to `verify`.
///
/// `"Check  Supplier legitimacy"` and `"verify_supplier_legitimacy"` both
/// map to `verify_supplier_legitimacy`.
pub fn canonical_key(raw: &str) -> String {
    tokens(raw)
        .iter()
        .map(|t| stem_verb(t))
        .collect::<Vec<_>>()
        .join("_")
}

/// Lowercase tokens joined by `_`, without verb stemming. Used for factor
/// keys, where `confirmed` and `verified` carry different meanings.
pub fn normalize_key(raw: &str) -> String {
    tokens(raw).join("_")
}

/// Content tokens of a canonical key: its tokens minus the stemmed verb.
pub fn key_tokens(key: &str) -> BTreeSet<String> {
    tokens(key)
        .into_iter()
        .filter(|t| stem_verb(t) != "verify")
        .collect()
}

/// `verify_supplier_legitimacy` -> `Verify supplier legitimacy`.
pub fn humanize_key(key: &str) -> String {
    let words = tokens(key);
    let mut out = words.join(" ");
    if let Some(first) = out.get(0..1) {
        let upper = first.to_uppercase();
        out.replace_range(0..1, &upper);
    }
    out
}

/// `verify_supplier_legitimacy` -> `Verify Supplier Legitimacy`.
pub fn title_key(key: &str) -> String {
    tokens(key)
        .iter()
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64 ^ seed;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
