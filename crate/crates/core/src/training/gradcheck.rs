//! Central finite differences over every free parameter entry, the
//! verification oracle for the analytic backward pass. Intended for small
//! instances (d <= 5, K <= 3, |V| <= 10) where it runs in milliseconds.

use super::backward::{backward_sample, Gradients};
use super::loss::LOSS_EPS;
use super::{EncodedSample, TrainError};
use crate::matrix::softmax;
use crate::model::{forward, MemN2NParams, ModelConfig};

fn loss_of(
    params: &MemN2NParams,
    config: &ModelConfig,
    sample: &EncodedSample,
    linear: bool,
) -> Result<f64, TrainError> {
    let cfg = ModelConfig {
        linear_attention: linear,
        ..config.clone()
    };
    let (_, trace) = forward(params, &cfg, &sample.context, &sample.question)?;
    let dist = softmax(&trace.logits);
    let gold = sample.gold.ok_or(TrainError::MissingGoldLabel {
        answer: sample.answer.clone(),
    })?;
    Ok(-(dist[gold] + LOSS_EPS).ln())
}

/// |a - n| / max(1e-8, |a| + |n|).
pub fn max_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Worst relative error between the analytic gradient and central
/// differences with step h, over every entry of every free storage.
pub fn gradient_check(
    params: &MemN2NParams,
    config: &ModelConfig,
    sample: &EncodedSample,
    linear: bool,
    h: f64,
) -> Result<f64, TrainError> {
    let (_, analytic) = backward_sample(params, config, sample, linear)?;
    gradient_check_against(params, config, sample, linear, h, &analytic)
}

/// Same as [`gradient_check`] but verifying a caller-supplied gradient;
/// lets tests confirm the oracle flags a corrupted entry.
pub fn gradient_check_against(
    params: &MemN2NParams,
    config: &ModelConfig,
    sample: &EncodedSample,
    linear: bool,
    h: f64,
    analytic: &Gradients,
) -> Result<f64, TrainError> {
    let n_storages = params.storages().len();
    let mut worst: f64 = 0.0;
    for si in 0..n_storages {
        let entries = params.storages()[si].1.len();
        for idx in 0..entries {
            let original = params.storages()[si].1.as_slice()[idx];

            let mut plus = params.clone();
            plus.storages_mut()[si].1.as_mut_slice()[idx] = original + h;
            let loss_plus = loss_of(&plus, config, sample, linear)?;

            let mut minus = params.clone();
            minus.storages_mut()[si].1.as_mut_slice()[idx] = original - h;
            let loss_minus = loss_of(&minus, config, sample, linear)?;

            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let analytic_entry = analytic.storages()[si].as_slice()[idx];
            worst = worst.max(max_relative_error(analytic_entry, numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::super::encode_dataset;
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::model::{init_params, Tying};
    use crate::taskgen::{AnswerVocabulary, QASample, TaskKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_instance(tying: Tying, linear: bool, seed: u64) -> f64 {
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "d", "q", "r"]);
        let answers = AnswerVocabulary::from_labels(["x", "y", "z", "w"]);
        let config = ModelConfig {
            d: 3,
            hops: 2,
            tying,
            memory_capacity: 3,
            answer_size: answers.len(),
            vocab_size: vocab.len(),
            linear_attention: false,
        };
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(seed), None).unwrap();
        let sample = QASample {
            context: vec![
                vec!["a".into(), "b".into()],
                vec!["c".into(), "a".into()],
                vec!["d".into()],
            ],
            question: vec!["q".into(), "r".into()],
            answer: "y".into(),
            supporting_fact: None,
            task: TaskKind::Factoid,
            slot: crate::corpus::Slot::Area,
            dialog_id: "d".into(),
            prefix_length: 3,
        };
        let encoded = encode_dataset(std::slice::from_ref(&sample), &vocab, &answers);
        let (params, config, encoded) = (params, config, encoded);
        gradient_check(&params, &config, &encoded[0], linear, 1e-5).unwrap()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for tying in [Tying::Adjacent, Tying::Layerwise] {
            let err = check_instance(tying, false, 31);
            assert!(err < 1e-4, "{tying:?} softmax: {err}");
        }
    }

    #[test]
    fn linear_attention_path_also_matches() {
        for tying in [Tying::Adjacent, Tying::Layerwise] {
            let err = check_instance(tying, true, 32);
            assert!(err < 1e-4, "{tying:?} linear: {err}");
        }
    }

    #[test]
    fn truncated_contexts_also_pass_the_check() {
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "q"]);
        let answers = AnswerVocabulary::from_labels(["x", "y", "z"]);
        let config = ModelConfig {
            d: 3,
            hops: 2,
            tying: Tying::Adjacent,
            memory_capacity: 2, // context below is longer than this
            answer_size: answers.len(),
            vocab_size: vocab.len(),
            linear_attention: false,
        };
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(77), None).unwrap();
        let sample = QASample {
            context: vec![
                vec!["a".into()],
                vec!["b".into(), "c".into()],
                vec!["c".into()],
                vec!["a".into(), "b".into()],
            ],
            question: vec!["q".into()],
            answer: "z".into(),
            supporting_fact: None,
            task: TaskKind::Factoid,
            slot: crate::corpus::Slot::Food,
            dialog_id: "d".into(),
            prefix_length: 4,
        };
        let encoded = encode_dataset(std::slice::from_ref(&sample), &vocab, &answers);
        for linear in [false, true] {
            let err = gradient_check(&params, &config, &encoded[0], linear, 1e-5).unwrap();
            assert!(err < 1e-4, "linear={linear}: {err}");
        }
    }

    #[test]
    fn corrupted_gradient_entry_is_flagged() {
        let vocab = Vocabulary::from_tokens(["a", "q"]);
        let answers = AnswerVocabulary::from_labels(["x", "y"]);
        let config = ModelConfig {
            d: 2,
            hops: 1,
            tying: Tying::Layerwise,
            memory_capacity: 2,
            answer_size: 2,
            vocab_size: vocab.len(),
            linear_attention: false,
        };
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(8), None).unwrap();
        let sample = QASample {
            context: vec![vec!["a".into()]],
            question: vec!["q".into()],
            answer: "x".into(),
            supporting_fact: None,
            task: TaskKind::Factoid,
            slot: crate::corpus::Slot::Area,
            dialog_id: "d".into(),
            prefix_length: 1,
        };
        let encoded = encode_dataset(std::slice::from_ref(&sample), &vocab, &answers);
        let (_, mut grads) = backward_sample(&params, &config, &encoded[0], false).unwrap();
        // double one W entry
        let mut storages = grads.storages_mut();
        let before = storages[3].as_slice()[0];
        assert!(before.abs() > 1e-6, "pick an entry that actually moves");
        storages[3].as_mut_slice()[0] = before * 2.0;
        drop(storages);
        let err =
            gradient_check_against(&params, &config, &encoded[0], false, 1e-5, &grads).unwrap();
        assert!(err > 1e-2, "corruption went unnoticed: {err}");
    }
}
