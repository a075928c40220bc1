//! Toy caption grammar: "a photo of <color> <object>" with an optional
//! background phrase on augmented samples. The word list is fixed so caption
//! token ids are stable across runs and checkpoints.

use crate::conditioning::Vocabulary;
use crate::error::Result;
use crate::render::background::{NamedBackground, NAMED_BACKGROUNDS};
use crate::render::mesh::{ObjectKind, COLOR_NAMES};
use crate::scalar::Real;
use rand::Rng;

pub const OBJECT_NOUNS: [&str; 4] = ["arrowcar", "chevronbird", "wedgechair", "blockdog"];

/// Every word the toy grammar can produce, sorted and deduplicated.
pub fn standard_word_list() -> Vec<String> {
    let mut words: Vec<String> = vec!["a".into(), "photo".into(), "of".into()];
    for (name, _) in COLOR_NAMES {
        words.push(name.into());
    }
    for noun in OBJECT_NOUNS {
        words.push(noun.into());
    }
    for bg in &NAMED_BACKGROUNDS {
        for w in bg.phrase {
            words.push((*w).into());
        }
    }
    words.sort();
    words.dedup();
    words
}

pub fn standard_vocabulary<R: Real>(dim: usize, rng: &mut impl Rng) -> Vocabulary<R> {
    Vocabulary::new(standard_word_list(), &OBJECT_NOUNS, dim, rng)
}

pub fn base_caption_words(color: &str, kind: ObjectKind) -> Vec<String> {
    vec![
        "a".into(),
        "photo".into(),
        "of".into(),
        color.into(),
        kind.name().into(),
    ]
}

pub fn augmented_caption_words(
    color: &str,
    kind: ObjectKind,
    background: &NamedBackground,
) -> Vec<String> {
    let mut words = base_caption_words(color, kind);
    words.extend(background.phrase.iter().map(|w| (*w).to_string()));
    words
}

pub fn caption_string(words: &[String]) -> String {
    words.join(" ")
}

/// Longest caption the grammar can produce, plus one viewpoint token.
pub fn max_sequence_len() -> usize {
    let longest_bg = NAMED_BACKGROUNDS
        .iter()
        .map(|b| b.phrase.len())
        .max()
        .unwrap_or(0);
    5 + longest_bg + 1
}

/// Ids under the standard vocabulary ordering.
pub fn caption_ids_of<R: Real>(vocab: &Vocabulary<R>, words: &[String]) -> Result<Vec<u32>> {
    words.iter().map(|w| vocab.id(w)).collect()
}
