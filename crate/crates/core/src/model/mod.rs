//! The end-to-end memory network: parameters with weight tying, temporal
//! memory encoding, the multi-hop attention forward pass, and persistence.

mod forward;
mod io;
mod params;

pub use forward::{attention, encode_context, forward, hop, predict_index, AttentionTrace};
pub use io::{load_params, read_container, save_params, write_container, ModelContainer};
pub use params::{init_params, MemN2NParams};

use thiserror::Error;

use crate::corpus::{encode_bow, Bag, Vocabulary};
use crate::taskgen::QASample;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no memories: the context is empty")]
    NoMemories,
    #[error("pretrained matrix is {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    PretrainedShape {
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("adjacent tying aliases the output map with the last memory embedding: answer vocabulary ({answers}) cannot exceed vocabulary ({vocab})")]
    AnswerVocabularyTooLarge { answers: usize, vocab: usize },
    #[error("bad magic bytes: not a model container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("container truncated while reading {what}")]
    Truncated { what: String },
    #[error("container field {what}: {message}")]
    Corrupt { what: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameter-sharing scheme across hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tying {
    /// A^{k+1} and C^k share storage; the output map reads the last C.
    Adjacent,
    /// One A and one C for every hop; the output map is its own matrix.
    Layerwise,
}

impl Tying {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tying::Adjacent => "adjacent",
            Tying::Layerwise => "layerwise",
        }
    }

    pub fn parse(s: &str) -> Option<Tying> {
        match s {
            "adjacent" => Some(Tying::Adjacent),
            "layerwise" => Some(Tying::Layerwise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Embedding size d.
    pub d: usize,
    /// Hop count K.
    pub hops: usize,
    pub tying: Tying,
    /// Maximum number of memories M; older utterances beyond it are dropped.
    pub memory_capacity: usize,
    pub answer_size: usize,
    pub vocab_size: usize,
    /// Linear-start mode: attention softmax removed when true.
    pub linear_attention: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        assert!(self.d >= 1 && self.hops >= 1 && self.memory_capacity >= 1);
        if self.tying == Tying::Adjacent && self.answer_size > self.vocab_size {
            return Err(ModelError::AnswerVocabularyTooLarge {
                answers: self.answer_size,
                vocab: self.vocab_size,
            });
        }
        Ok(())
    }
}

/// Bag-of-words encodings of a sample's context utterances and question.
pub fn encode_sample(sample: &QASample, vocab: &Vocabulary) -> (Vec<Bag>, Bag) {
    let context = sample
        .context
        .iter()
        .map(|tokens| encode_bow(tokens, vocab))
        .collect();
    let question = encode_bow(&sample.question, vocab);
    (context, question)
}

/// Argmax with the lowest index winning exact ties.
pub fn argmax_tie_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
