//! The epoch loop: shuffle, batch, backward, clip, step, evaluate, and keep
//! the checkpoint with the best validation accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::backward;
use super::loss::LOSS_EPS;
use super::optimizer::{clip_gradients, lr_schedule, sgd_step};
use super::{encode_dataset, EncodedSample, TrainConfig, TrainError};
use crate::corpus::Vocabulary;
use crate::matrix::{softmax, Matrix};
use crate::model::{forward, init_params, MemN2NParams, ModelConfig};
use crate::parallel::map_ordered;
use crate::taskgen::{AnswerVocabulary, QASample};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub linear: bool,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose checkpoint was returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    /// One line per epoch: "epoch, lr, linear_mode, train_loss, val_loss, val_acc".
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&format!(
                "{}, {}, {}, {:.6}, {:.6}, {:.4}\n",
                e.epoch, e.lr, e.linear, e.train_loss, e.val_loss, e.val_accuracy
            ));
        }
        out
    }
}

/// Mean loss (over samples whose gold label exists) and accuracy (over all
/// samples; a missing gold label can never be predicted and counts wrong).
/// Validation always runs with softmax attention, the inference mode.
fn evaluate_set(
    params: &MemN2NParams,
    config: &ModelConfig,
    samples: &[EncodedSample],
) -> (f64, f64) {
    let cfg = ModelConfig {
        linear_attention: false,
        ..config.clone()
    };
    let results = map_ordered(samples, |s| {
        let (_, trace) = forward(params, &cfg, &s.context, &s.question)
            .expect("validation samples have nonempty contexts");
        let dist = softmax(&trace.logits);
        let predicted = crate::model::argmax_tie_low(&dist);
        match s.gold {
            Some(g) => (Some(-(dist[g] + LOSS_EPS).ln()), predicted == g),
            None => (None, false),
        }
    });
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    let mut correct = 0usize;
    for (loss, hit) in &results {
        if let Some(l) = loss {
            loss_sum += l;
            loss_n += 1;
        }
        correct += *hit as usize;
    }
    let mean_loss = if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN };
    let accuracy = if samples.is_empty() {
        0.0
    } else {
        correct as f64 / samples.len() as f64
    };
    (mean_loss, accuracy)
}

/// Run the full recipe and return the parameters of the epoch with the best
/// validation accuracy (earliest such epoch on ties) plus the per-epoch
/// history. An empty validation set falls back to scoring the training set.
#[allow(clippy::too_many_arguments)]
pub fn train(
    train_samples: &[QASample],
    val_samples: &[QASample],
    vocab: &Vocabulary,
    answers: &AnswerVocabulary,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    pretrained: Option<&Matrix>,
) -> Result<(MemN2NParams, TrainHistory), TrainError> {
    if train_samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    train_config.validate().expect("invalid training configuration");

    let encoded_train = encode_dataset(train_samples, vocab, answers);
    let encoded_val = encode_dataset(val_samples, vocab, answers);
    // Every training answer must be in the answer vocabulary.
    let trainable: Vec<EncodedSample> = encoded_train
        .iter()
        .filter(|s| s.gold.is_some())
        .cloned()
        .collect();
    if trainable.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    shuffle_rng.set_stream(1);

    let mut params = init_params(model_config, &mut init_rng, pretrained)?;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, MemN2NParams)> = None;

    let mut order: Vec<usize> = (0..trainable.len()).collect();
    for epoch in 1..=train_config.max_epochs {
        let linear = epoch <= train_config.linear_start_epochs;
        let lr = lr_schedule(train_config, epoch);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(train_config.batch_size) {
            let batch: Vec<EncodedSample> =
                chunk.iter().map(|&i| trainable[i].clone()).collect();
            let (batch_loss, grads) = backward(&params, model_config, &batch, linear)?;
            let grads = clip_gradients(grads, train_config.clip_norm);
            sgd_step(&mut params, &grads, lr);
            loss_sum += batch_loss * batch.len() as f64;
        }
        let train_loss = loss_sum / trainable.len() as f64;

        let val_set: &[EncodedSample] = if encoded_val.is_empty() {
            &encoded_train
        } else {
            &encoded_val
        };
        let (val_loss, val_accuracy) = evaluate_set(&params, model_config, val_set);

        history.epochs.push(EpochRecord {
            epoch,
            lr,
            linear,
            train_loss,
            val_loss,
            val_accuracy,
        });
        let improved = match &best {
            None => true,
            Some((best_acc, _, _)) => val_accuracy > *best_acc,
        };
        if improved {
            best = Some((val_accuracy, epoch, params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("max_epochs >= 1");
    history.best_epoch = best_epoch;
    Ok((best_params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, parse_dialog_corpus, Ontology};
    use crate::model::Tying;
    use crate::taskgen::{build_answer_vocabulary, generate_task, question_strings, TaskKind};

    fn tiny_corpus() -> Vec<crate::corpus::Dialog> {
        let mut text = String::new();
        let prices = ["cheap", "moderate", "expensive"];
        for (i, p) in prices.iter().enumerate() {
            text.push_str(&format!(
                "# dialog d{i}\n1|cust|i want something {p}|pricerange={p}\n2|agent|ok looking for {p} places|pricerange={p}\n\n"
            ));
        }
        parse_dialog_corpus(&text, &Ontology::builtin()).unwrap()
    }

    fn setup() -> (
        Vec<QASample>,
        Vocabulary,
        AnswerVocabulary,
        ModelConfig,
        TrainConfig,
    ) {
        let ont = Ontology::builtin();
        let dialogs = tiny_corpus();
        let samples = generate_task(&dialogs, TaskKind::Factoid, &ont, 3);
        let vocab = build_vocabulary(&dialogs, &question_strings(&ont));
        let answers = build_answer_vocabulary(&samples, &ont);
        let model_config = ModelConfig {
            d: 4,
            hops: 1,
            tying: Tying::Layerwise,
            memory_capacity: 2,
            answer_size: answers.len(),
            vocab_size: vocab.len(),
            linear_attention: false,
        };
        let train_config = TrainConfig {
            max_epochs: 6,
            linear_start_epochs: 2,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        (samples, vocab, answers, model_config, train_config)
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (samples, vocab, answers, mc, tc) = setup();
        let run = || train(&samples, &samples, &vocab, &answers, &mc, &tc, None).unwrap();
        let (p1, h1) = run();
        let (p2, h2) = run();
        assert_eq!(p1, p2);
        assert_eq!(h1.epochs, h2.epochs);
    }

    #[test]
    fn history_follows_schedule_and_linear_switch() {
        let (samples, vocab, answers, mc, mut tc) = setup();
        tc.max_epochs = 30;
        tc.linear_start_epochs = 3;
        let (_, history) = train(&samples, &samples, &vocab, &answers, &mc, &tc, None).unwrap();
        assert_eq!(history.epochs.len(), 30);
        for e in &history.epochs {
            assert_eq!(e.lr, lr_schedule(&tc, e.epoch));
            assert_eq!(e.linear, e.epoch <= 3);
        }
        assert_eq!(history.epochs[25].lr, 0.0025);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let (_, vocab, answers, mc, tc) = setup();
        let err = train(&[], &[], &vocab, &answers, &mc, &tc, None).unwrap_err();
        assert!(matches!(err, TrainError::EmptyTrainingSet));
    }

    #[test]
    fn log_lines_have_the_documented_shape() {
        let (samples, vocab, answers, mc, tc) = setup();
        let (_, history) = train(&samples, &samples, &vocab, &answers, &mc, &tc, None).unwrap();
        let log = history.log_lines();
        let lines: Vec<&str> = log.lines().map(str::trim).collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("1, 0.005, true, "));
        assert_eq!(lines[0].split(", ").count(), 6);
    }

    #[test]
    fn loss_decreases_under_repeated_full_batch_steps() {
        let (samples, vocab, answers, mc, _) = setup();
        let encoded = encode_dataset(&samples, &vocab, &answers);
        let mut params =
            init_params(&mc, &mut ChaCha8Rng::seed_from_u64(11), None).unwrap();
        let mut losses = Vec::new();
        for _ in 0..50 {
            let (loss, grads) = backward(&params, &mc, &encoded, false).unwrap();
            losses.push(loss);
            sgd_step(&mut params, &grads, 1e-3);
        }
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }
}
