//! Training: loss, exact backward pass, clipping, the stepped SGD schedule
//! with a linear-start phase, and a finite-difference gradient oracle.

mod backward;
mod gradcheck;
mod loss;
mod optimizer;
mod trainer;

pub use backward::{backward, backward_sample, backward_sample_into, Gradients};
pub use gradcheck::{gradient_check, gradient_check_against, max_relative_error};
pub use loss::{cross_entropy_loss, LOSS_EPS};
pub use optimizer::{clip_gradients, lr_schedule, sgd_step};
pub use trainer::{train, EpochRecord, TrainHistory};

use thiserror::Error;

use crate::corpus::{encode_bow, Bag, Vocabulary};
use crate::model::ModelError;
use crate::taskgen::{AnswerVocabulary, QASample};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("gold index {gold} out of range for {answer_size} answers")]
    GoldIndexOutOfRange { gold: usize, answer_size: usize },
    #[error("answer \"{answer}\" is missing from the answer vocabulary")]
    MissingGoldLabel { answer: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The full recipe: initial rate 0.005 halved every 25 epochs, 100 epochs,
/// attention softmax removed for the first 20, batches of 16, gradients
/// clipped to global norm 40.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub max_epochs: usize,
    pub linear_start_epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.005,
            decay_every: 25,
            decay_factor: 0.5,
            max_epochs: 100,
            linear_start_epochs: 20,
            batch_size: 16,
            clip_norm: 40.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lr0 <= 0.0
            || self.decay_every == 0
            || self.decay_factor <= 0.0
            || self.max_epochs == 0
            || self.batch_size == 0
            || self.clip_norm <= 0.0
        {
            return Err("all training parameters must be positive".into());
        }
        if self.linear_start_epochs >= self.max_epochs {
            return Err(format!(
                "linear_start_epochs ({}) must be below max_epochs ({})",
                self.linear_start_epochs, self.max_epochs
            ));
        }
        Ok(())
    }
}

/// A sample with its bags precomputed and its answer resolved against the
/// fixed answer vocabulary (None when the label is absent, which counts as
/// an automatic miss at evaluation).
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub context: Vec<Bag>,
    pub question: Bag,
    pub gold: Option<usize>,
    pub answer: String,
}

pub fn encode_dataset(
    samples: &[QASample],
    vocab: &Vocabulary,
    answers: &AnswerVocabulary,
) -> Vec<EncodedSample> {
    samples
        .iter()
        .map(|s| EncodedSample {
            context: s.context.iter().map(|t| encode_bow(t, vocab)).collect(),
            question: encode_bow(&s.question, vocab),
            gold: answers.index(&s.answer),
            answer: s.answer.clone(),
        })
        .collect()
}
