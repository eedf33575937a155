//! Expansion of dialogs into subdialog prefixes and generation of the five
//! question-answering task datasets, with seeded augmentation and bAbI-style
//! task files.

mod augment;
mod format;
mod generate;
mod templates;

pub use augment::{augment_corpus, augment_dialog, AugmentRules};
pub use format::{read_task_file, write_task_file};
pub use generate::{
    build_answer_vocabulary, expand_subdialogs, gen_count, gen_factoid, gen_indefinite, gen_list,
    gen_yesno, generate_task, split_train_validation, vocabulary_for_samples, UNINFORMED_LABEL,
};
pub use templates::{
    count_question, factoid_question, list_label, list_question, numeral, question_for,
    question_strings, yesno_question, AugmentTemplates,
};

use std::collections::HashMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Slot;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("slot {slot} is informed at prefix {prefix}: indefinite samples need an uninformed slot")]
    SlotInformed { slot: String, prefix: usize },
    #[error("need at least 2 dialogs for a split, found {0}")]
    TooFewDialogs(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The five reading tasks derived from slot tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Factoid,
    YesNo,
    Indefinite,
    Count,
    List,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Factoid,
        TaskKind::YesNo,
        TaskKind::Indefinite,
        TaskKind::Count,
        TaskKind::List,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Factoid => "factoid",
            TaskKind::YesNo => "yesno",
            TaskKind::Indefinite => "indefinite",
            TaskKind::Count => "count",
            TaskKind::List => "list",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "factoid" => Some(TaskKind::Factoid),
            "yesno" => Some(TaskKind::YesNo),
            "indefinite" => Some(TaskKind::Indefinite),
            "count" => Some(TaskKind::Count),
            "list" => Some(TaskKind::List),
            _ => None,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One training or evaluation unit: a subdialog prefix, a question about one
/// slot, and the gold answer label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QASample {
    /// Token lists of the first `prefix_length` utterances, in dialog order.
    pub context: Vec<Vec<String>>,
    /// Whitespace tokens of the question template (trailing "?" included).
    pub question: Vec<String>,
    pub answer: String,
    /// 1-based utterance index establishing the answer, when one exists.
    pub supporting_fact: Option<usize>,
    pub task: TaskKind,
    pub slot: Slot,
    pub dialog_id: String,
    pub prefix_length: usize,
}

impl QASample {
    pub fn question_text(&self) -> String {
        self.question.join(" ")
    }
}

/// Fixed label set of the answer softmax: ontology values, the reserved
/// labels, and every count word / list label seen in training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerVocabulary {
    index_of: HashMap<String, usize>,
    labels: Vec<String>,
}

impl AnswerVocabulary {
    pub fn from_labels<I, S>(label_stream: I) -> AnswerVocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = AnswerVocabulary {
            index_of: HashMap::new(),
            labels: Vec::new(),
        };
        for l in label_stream {
            v.intern(l.as_ref());
        }
        v
    }

    fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index_of.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index_of.insert(label.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.index_of.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Independent deterministic stream per dialog, so corpora can be processed
/// in parallel without perturbing the sampled values.
pub(crate) fn dialog_rng(seed: u64, purpose: u64, ordinal: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose);
    rng.set_stream(ordinal);
    rng
}

pub(crate) const PURPOSE_GENERATE: u64 = 0x67656e;
/// Separate stream for sampling "maybe" question values, so the yes/no part
/// of the indefinite dataset is byte-identical to the yes/no dataset.
pub(crate) const PURPOSE_INDEFINITE: u64 = 0x696e64;
pub(crate) const PURPOSE_AUGMENT: u64 = 0x617567;
pub(crate) const PURPOSE_SPLIT: u64 = 0x73706c;
