//! Bag-of-words vocabulary and the map from token lists into sparse count
//! vectors of dimension |V|.

use std::collections::HashMap;

use super::{question_tokens, Dialog};

pub const NULL_TOKEN: &str = "<null>";
pub const UNK_TOKEN: &str = "<unk>";
pub const NULL_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Token <-> index bijection with reserved padding and unknown entries.
/// Index assignment is first-seen order over the corpus, then the question
/// strings, so the same inputs always produce the same mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index_of: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(token_stream: I) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary {
            index_of: HashMap::new(),
            tokens: Vec::new(),
        };
        vocab.intern(NULL_TOKEN);
        vocab.intern(UNK_TOKEN);
        for tok in token_stream {
            vocab.intern(tok.as_ref());
        }
        vocab
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index_of.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index_of.insert(token.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index_of.get(token).copied()
    }

    /// Index of a token, routing unseen tokens to UNK.
    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Vocabulary over every utterance token of every dialog plus every token of
/// the question strings, in that order.
pub fn build_vocabulary(dialogs: &[Dialog], questions: &[String]) -> Vocabulary {
    let dialog_tokens = dialogs
        .iter()
        .flat_map(|d| d.utterances.iter())
        .flat_map(|u| u.tokens.iter().cloned());
    let question_toks = questions.iter().flat_map(|q| question_tokens(q));
    Vocabulary::from_tokens(dialog_tokens.chain(question_toks))
}

/// Sparse count vector over the vocabulary: the image of a token list under
/// the bag-of-words map.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    dim: usize,
    /// (vocabulary index, count) pairs sorted by index; counts > 0.
    entries: Vec<(usize, f64)>,
}

impl Bag {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn total_count(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    pub fn count(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, c) in &self.entries {
            v[i] = c;
        }
        v
    }
}

/// Token occurrence counts; out-of-vocabulary tokens count under UNK.
pub fn encode_bow<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Bag {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for t in tokens {
        *counts.entry(vocab.index_or_unk(t.as_ref())).or_insert(0.0) += 1.0;
    }
    let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|(i, _)| *i);
    Bag {
        dim: vocab.len(),
        entries,
    }
}
