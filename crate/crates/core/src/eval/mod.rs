//! Accuracy metrics (per-slot, joint, per-task), attention-trace reports,
//! and the attention-vs-supporting-fact diagnostic.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{Slot, Vocabulary};
use crate::matrix::softmax;
use crate::model::{argmax_tie_low, encode_sample, forward, AttentionTrace, MemN2NParams, ModelConfig, ModelError};
use crate::parallel::map_ordered;
use crate::taskgen::{AnswerVocabulary, QASample, TaskKind, UNINFORMED_LABEL};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("factoid group (dialog {dialog_id}, prefix {prefix_length}) has samples for {found} slots, expected one per slot")]
    IncompleteGroup {
        dialog_id: String,
        prefix_length: usize,
        found: usize,
    },
    #[error("no samples to evaluate")]
    NoSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A trained model with the vocabularies needed to turn samples into
/// predictions. Predictions are read-only and safe to run in parallel.
pub struct Predictor<'a> {
    pub params: &'a MemN2NParams,
    pub config: &'a ModelConfig,
    pub vocab: &'a Vocabulary,
    pub answers: &'a AnswerVocabulary,
}

impl<'a> Predictor<'a> {
    /// Always predicts with softmax attention, the inference mode.
    fn inference_config(&self) -> ModelConfig {
        ModelConfig {
            linear_attention: false,
            ..self.config.clone()
        }
    }

    pub fn trace(&self, sample: &QASample) -> Result<AttentionTrace, ModelError> {
        let (context, question) = encode_sample(sample, self.vocab);
        let cfg = self.inference_config();
        let (_, trace) = forward(self.params, &cfg, &context, &question)?;
        Ok(trace)
    }

    pub fn label(&self, sample: &QASample) -> Result<String, ModelError> {
        let trace = self.trace(sample)?;
        let idx = argmax_tie_low(&softmax(&trace.logits));
        Ok(self.answers.label(idx).to_string())
    }
}

/// Counts reconcile as correct + incorrect + unanswerable = n, where
/// unanswerable means the gold label is outside the answer vocabulary (an
/// automatic error under the fixed-vocabulary assumption).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyStats {
    pub n: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub unanswerable: usize,
}

impl AccuracyStats {
    pub fn accuracy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }
}

/// Accuracy under an arbitrary label function; the model path and test
/// predictors share this definition.
pub fn accuracy_with<F>(
    samples: &[QASample],
    answers: &AnswerVocabulary,
    predict: F,
) -> AccuracyStats
where
    F: Fn(&QASample) -> String + Sync + Send,
{
    let predictions = map_ordered(samples, |s| predict(s));
    let mut stats = AccuracyStats::default();
    for (s, predicted) in samples.iter().zip(&predictions) {
        stats.n += 1;
        if answers.index(&s.answer).is_none() {
            stats.unanswerable += 1;
            stats.incorrect += 1;
        } else if *predicted == s.answer {
            stats.correct += 1;
        } else {
            stats.incorrect += 1;
        }
    }
    stats
}

/// Fraction of samples where the model's label equals the gold label.
pub fn slot_accuracy(predictor: &Predictor, samples: &[QASample]) -> AccuracyStats {
    accuracy_with(samples, predictor.answers, |s| {
        predictor.label(s).expect("samples have nonempty contexts")
    })
}

/// Indices of consecutive factoid samples covering one prefix, one per slot.
pub fn group_factoid_triples(samples: &[QASample]) -> Result<Vec<[usize; 3]>, EvalError> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let first = &samples[i];
        let mut group = vec![i];
        let mut j = i + 1;
        while j < samples.len()
            && samples[j].dialog_id == first.dialog_id
            && samples[j].prefix_length == first.prefix_length
        {
            group.push(j);
            j += 1;
        }
        let mut slots_seen: Vec<Slot> = group.iter().map(|&g| samples[g].slot).collect();
        slots_seen.sort();
        slots_seen.dedup();
        if group.len() != 3 || slots_seen.len() != 3 {
            return Err(EvalError::IncompleteGroup {
                dialog_id: first.dialog_id.clone(),
                prefix_length: first.prefix_length,
                found: slots_seen.len(),
            });
        }
        groups.push([group[0], group[1], group[2]]);
        i = j;
    }
    Ok(groups)
}

/// Joint accuracy under an arbitrary label function.
pub fn joint_accuracy_with<F>(samples: &[QASample], predict: F) -> Result<f64, EvalError>
where
    F: Fn(&QASample) -> String + Sync + Send,
{
    let groups = group_factoid_triples(samples)?;
    if groups.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let hits = map_ordered(&groups, |group| {
        group
            .iter()
            .all(|&i| predict(&samples[i]) == samples[i].answer) as usize
    });
    Ok(hits.iter().sum::<usize>() as f64 / groups.len() as f64)
}

/// Fraction of prefixes where all three slot predictions are correct
/// simultaneously. Samples must arrive grouped per prefix (the generator's
/// and task-file order), one sample per slot.
pub fn joint_accuracy(predictor: &Predictor, samples: &[QASample]) -> Result<f64, EvalError> {
    joint_accuracy_with(samples, |s| {
        predictor.label(s).expect("samples have nonempty contexts")
    })
}

/// Fraction of samples whose stored supporting fact is the attention argmax
/// at one or more hops. Samples without a supporting fact are excluded from
/// the denominator; a fact that fell out of memory capacity counts as a miss.
pub fn supporting_fact_hit_rate(
    predictor: &Predictor,
    samples: &[QASample],
) -> Result<f64, EvalError> {
    let with_fact: Vec<&QASample> = samples.iter().filter(|s| s.supporting_fact.is_some()).collect();
    if with_fact.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let hits = map_ordered(&with_fact, |s| {
        let trace = predictor.trace(s).expect("samples have nonempty contexts");
        let fact = s.supporting_fact.unwrap();
        let len = s.context.len();
        let hit = trace.attention.iter().any(|p| {
            let pos = argmax_tie_low(p);
            // memory (pos+1) counts back from the last utterance
            len - pos == fact
        });
        hit as usize
    });
    Ok(hits.iter().sum::<usize>() as f64 / with_fact.len() as f64)
}

/// Per-hop attention table for one sample, rows in original dialog order.
#[derive(Debug, Clone)]
pub struct AttentionReport {
    /// (original utterance index, utterance text, p^1..p^K).
    pub rows: Vec<(usize, String, Vec<f64>)>,
    pub question: String,
    pub predicted: String,
    pub hops: usize,
    pub truncated: usize,
}

pub fn attention_report(
    predictor: &Predictor,
    sample: &QASample,
) -> Result<AttentionReport, EvalError> {
    let trace = predictor.trace(sample)?;
    let predicted = predictor
        .answers
        .label(argmax_tie_low(&softmax(&trace.logits)))
        .to_string();
    let hops = trace.attention.len();
    let per_hop: Vec<Vec<f64>> = (1..=hops)
        .map(|k| trace.attention_in_dialog_order(k))
        .collect();
    let n = trace.n_memories;
    let rows = (0..n)
        .map(|r| {
            let original_index = trace.truncated + r + 1;
            let text = sample.context[original_index - 1].join(" ");
            let weights = per_hop.iter().map(|p| p[r]).collect();
            (original_index, text, weights)
        })
        .collect();
    Ok(AttentionReport {
        rows,
        question: sample.question_text(),
        predicted,
        hops,
        truncated: trace.truncated,
    })
}

impl AttentionReport {
    /// Aligned plain text, weights rounded to 2 decimals.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|(_, text, _)| text.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let mut out = String::new();
        out.push_str(&format!("{:>3} {:<width$}", "#", "utterance"));
        for k in 1..=self.hops {
            out.push_str(&format!(" {:>6}", format!("hop {k}")));
        }
        out.push('\n');
        for (idx, text, weights) in &self.rows {
            out.push_str(&format!("{idx:>3} {text:<width$}"));
            for w in weights {
                out.push_str(&format!(" {w:>6.2}"));
            }
            out.push('\n');
        }
        if self.truncated > 0 {
            out.push_str(&format!(
                "({} oldest utterances beyond memory capacity not shown)\n",
                self.truncated
            ));
        }
        out.push_str(&format!("{}  answer: {}\n", self.question, self.predicted));
        out
    }

    /// Comma-separated block with full-precision weights.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,utterance");
        for k in 1..=self.hops {
            out.push_str(&format!(",hop{k}"));
        }
        out.push('\n');
        for (idx, text, weights) in &self.rows {
            out.push_str(&format!("{idx},{}", text.replace(',', " ")));
            for w in weights {
                out.push_str(&format!(",{w:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Metrics for one (task, slot) group.
#[derive(Debug, Clone)]
pub struct GroupReport {
    pub task: TaskKind,
    pub slot: Slot,
    pub stats: AccuracyStats,
    /// Factoid only: restricted to prefixes where the slot is informed
    /// (gold label != "none").
    pub informed: Option<AccuracyStats>,
}

/// The assembled evaluation: per-(task, slot) accuracies, joint accuracy for
/// factoid triples, and gold-vs-predicted confusion counts.
pub struct EvalReport {
    pub groups: Vec<GroupReport>,
    pub joint: Option<f64>,
    pub confusion: BTreeMap<(String, String), usize>,
    pub total: AccuracyStats,
}

pub fn evaluate(predictor: &Predictor, samples: &[QASample]) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let predictions = map_ordered(samples, |s| {
        predictor.label(s).expect("samples have nonempty contexts")
    });

    let mut keys: Vec<(TaskKind, Slot)> = Vec::new();
    for s in samples {
        if !keys.contains(&(s.task, s.slot)) {
            keys.push((s.task, s.slot));
        }
    }
    keys.sort();

    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut total = AccuracyStats::default();
    for (s, predicted) in samples.iter().zip(&predictions) {
        *confusion
            .entry((s.answer.clone(), predicted.clone()))
            .or_insert(0) += 1;
        tally(&mut total, s, predicted, predictor.answers);
    }

    let mut groups = Vec::new();
    for (task, slot) in keys {
        let mut stats = AccuracyStats::default();
        let mut informed = AccuracyStats::default();
        for (s, predicted) in samples.iter().zip(&predictions) {
            if s.task != task || s.slot != slot {
                continue;
            }
            tally(&mut stats, s, predicted, predictor.answers);
            if task == TaskKind::Factoid && s.answer != UNINFORMED_LABEL {
                tally(&mut informed, s, predicted, predictor.answers);
            }
        }
        groups.push(GroupReport {
            task,
            slot,
            stats,
            informed: (task == TaskKind::Factoid).then_some(informed),
        });
    }

    // Joint accuracy is defined over complete factoid triples; skip it when
    // the dataset mixes tasks or the grouping is incomplete.
    let all_factoid = samples.iter().all(|s| s.task == TaskKind::Factoid);
    let joint = if all_factoid {
        group_factoid_triples(samples).ok().map(|groups| {
            let hits = groups
                .iter()
                .filter(|g| g.iter().all(|&i| predictions[i] == samples[i].answer))
                .count();
            hits as f64 / groups.len() as f64
        })
    } else {
        None
    };

    Ok(EvalReport {
        groups,
        joint,
        confusion,
        total,
    })
}

fn tally(stats: &mut AccuracyStats, s: &QASample, predicted: &str, answers: &AnswerVocabulary) {
    stats.n += 1;
    if answers.index(&s.answer).is_none() {
        stats.unanswerable += 1;
        stats.incorrect += 1;
    } else if predicted == s.answer {
        stats.correct += 1;
    } else {
        stats.incorrect += 1;
    }
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<11} {:<11} {:>7} {:>9} {:>13} {:>10}\n",
            "task", "slot", "n", "accuracy", "unanswerable", "informed"
        ));
        for g in &self.groups {
            let informed = match &g.informed {
                Some(stats) if stats.n > 0 => format!("{:.4}", stats.accuracy()),
                _ => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<11} {:<11} {:>7} {:>9.4} {:>13} {:>10}\n",
                g.task.as_str(),
                g.slot.as_str(),
                g.stats.n,
                g.stats.accuracy(),
                g.stats.unanswerable,
                informed
            ));
        }
        out.push_str(&format!(
            "{:<11} {:<11} {:>7} {:>9.4} {:>13}\n",
            "all", "all", self.total.n, self.total.accuracy(), self.total.unanswerable
        ));
        if let Some(joint) = self.joint {
            out.push_str(&format!("joint accuracy (factoid triples): {joint:.4}\n"));
        }
        out
    }

    /// "task,slot,n,accuracy" lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,slot,n,accuracy\n");
        for g in &self.groups {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                g.task.as_str(),
                g.slot.as_str(),
                g.stats.n,
                g.stats.accuracy()
            ));
        }
        if let Some(joint) = self.joint {
            out.push_str(&format!("factoid,joint,,{joint:.6}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests;
