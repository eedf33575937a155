//! Dialog corpus ingestion: annotated transactional dialogs, slot ontology,
//! bag-of-words vocabulary, and optional pretrained word vectors.

mod embeddings;
mod ontology;
mod parse;
mod tokenize;
mod vocab;

pub use embeddings::load_pretrained_embeddings;
pub use ontology::Ontology;
pub use parse::{parse_dialog_corpus, write_dialog_corpus};
pub use tokenize::{question_tokens, tokenize};
pub use vocab::{build_vocabulary, encode_bow, Bag, Vocabulary, NULL_INDEX, NULL_TOKEN, UNK_INDEX, UNK_TOKEN};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown value \"{value}\" for slot {slot}")]
    UnknownValue {
        line: usize,
        slot: String,
        value: String,
    },
    #[error("line {line}: unknown slot \"{slot}\"")]
    UnknownSlot { line: usize, slot: String },
    #[error("embedding file declares dimension {file_dim}, requested {requested}")]
    DimensionMismatch { file_dim: usize, requested: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The three tracked goal variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Area,
    Food,
    Pricerange,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Area, Slot::Food, Slot::Pricerange];

    pub fn as_str(&self) -> &'static str {
        match self {
            Slot::Area => "area",
            Slot::Food => "food",
            Slot::Pricerange => "pricerange",
        }
    }

    pub fn parse(s: &str) -> Option<Slot> {
        match s {
            "area" => Some(Slot::Area),
            "food" => Some(Slot::Food),
            "pricerange" => Some(Slot::Pricerange),
            _ => None,
        }
    }

    pub fn ordinal(&self) -> usize {
        match self {
            Slot::Area => 0,
            Slot::Food => 1,
            Slot::Pricerange => 2,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Special state value meaning "any value is acceptable".
pub const DONTCARE: &str = "dontcare";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    Customer,
    Agent,
}

impl Speaker {
    pub fn as_str(&self) -> &'static str {
        match self {
            Speaker::Customer => "cust",
            Speaker::Agent => "agent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    /// 1-based position in the dialog.
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(index: usize, speaker: Speaker, text: &str) -> Utterance {
        Utterance {
            index,
            speaker,
            text: text.to_string(),
            tokens: tokenize(text),
        }
    }
}

/// Value sets per slot after a given turn. Un-augmented dialogs carry
/// singleton sets; augmentation can grow them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotState {
    sets: [BTreeSet<String>; 3],
}

impl SlotState {
    pub fn empty() -> SlotState {
        SlotState::default()
    }

    pub fn values(&self, slot: Slot) -> &BTreeSet<String> {
        &self.sets[slot.ordinal()]
    }

    pub fn insert(&mut self, slot: Slot, value: impl Into<String>) {
        self.sets[slot.ordinal()].insert(value.into());
    }

    pub fn set(&mut self, slot: Slot, values: BTreeSet<String>) {
        self.sets[slot.ordinal()] = values;
    }

    pub fn is_informed(&self, slot: Slot) -> bool {
        !self.sets[slot.ordinal()].is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialog {
    pub id: String,
    pub utterances: Vec<Utterance>,
    /// State AFTER each utterance; same length as `utterances`.
    pub states: Vec<SlotState>,
}

impl Dialog {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// State after turn `t` (1-based).
    pub fn state_after(&self, t: usize) -> &SlotState {
        &self.states[t - 1]
    }

    /// Most recent turn index (1-based, <= t) at which the slot's current
    /// value set was established, i.e. the last turn where the set changed.
    /// None when the slot is uninformed at t.
    pub fn established_at(&self, slot: Slot, t: usize) -> Option<usize> {
        if !self.states[t - 1].is_informed(slot) {
            return None;
        }
        let current = self.states[t - 1].values(slot);
        let mut at = 1;
        for j in (1..=t).rev() {
            let prev: &BTreeSet<String> = if j >= 2 {
                self.states[j - 2].values(slot)
            } else {
                return Some(1);
            };
            if prev != current {
                at = j;
                break;
            }
        }
        Some(at)
    }
}
