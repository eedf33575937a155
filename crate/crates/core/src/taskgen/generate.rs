//! Subdialog expansion and per-task sample generators.

use rand::seq::SliceRandom;
use rand::Rng;

use super::templates::{list_label, numeral, question_for};
use super::{
    dialog_rng, AnswerVocabulary, QASample, TaskError, TaskKind, PURPOSE_GENERATE,
    PURPOSE_INDEFINITE, PURPOSE_SPLIT,
};
use crate::corpus::{question_tokens, Dialog, Ontology, Slot, SlotState, Utterance, DONTCARE};
use crate::parallel::map_ordered;

/// Factoid label for prefixes where a slot was never informed.
pub const UNINFORMED_LABEL: &str = "none";

/// One (prefix, state) pair per turn index t = 1..=len, ascending.
pub fn expand_subdialogs(dialog: &Dialog) -> Vec<(&[Utterance], &SlotState)> {
    (1..=dialog.len())
        .map(|t| (&dialog.utterances[..t], &dialog.states[t - 1]))
        .collect()
}

fn context_tokens(dialog: &Dialog, t: usize) -> Vec<Vec<String>> {
    dialog.utterances[..t].iter().map(|u| u.tokens.clone()).collect()
}

fn sample(
    dialog: &Dialog,
    t: usize,
    slot: Slot,
    task: TaskKind,
    question: String,
    answer: String,
    supporting_fact: Option<usize>,
) -> QASample {
    QASample {
        context: context_tokens(dialog, t),
        question: question_tokens(&question),
        answer,
        supporting_fact,
        task,
        slot,
        dialog_id: dialog.id.clone(),
        prefix_length: t,
    }
}

/// "what is the <slot> ?" — the single value when informed, "none" when not,
/// the canonical list label when the set has grown past one value.
pub fn gen_factoid(dialog: &Dialog, t: usize, slot: Slot) -> QASample {
    let values = dialog.state_after(t).values(slot);
    let (answer, fact) = match values.len() {
        0 => (UNINFORMED_LABEL.to_string(), None),
        1 => (
            values.iter().next().unwrap().clone(),
            dialog.established_at(slot, t),
        ),
        _ => (list_label(values), dialog.established_at(slot, t)),
    };
    sample(
        dialog,
        t,
        slot,
        TaskKind::Factoid,
        question_for(TaskKind::Factoid, slot, None),
        answer,
        fact,
    )
}

/// "is the <slot> <value> ?" — a fair coin picks between querying a gold
/// value ("yes") and a sampled non-gold domain value ("no").
///
/// Callers must only invoke this on informed slots; uninformed prefixes
/// belong to [`gen_indefinite`].
pub fn gen_yesno<R: Rng>(
    dialog: &Dialog,
    t: usize,
    slot: Slot,
    ontology: &Ontology,
    rng: &mut R,
) -> QASample {
    let state = dialog.state_after(t);
    let values = state.values(slot);
    assert!(!values.is_empty(), "gen_yesno requires an informed slot");
    let gold: Vec<&String> = values.iter().collect();
    let negatives: Vec<&String> = ontology
        .values(slot)
        .iter()
        .filter(|v| !values.contains(*v))
        .collect();

    let ask_gold = negatives.is_empty() || rng.gen_bool(0.5);
    let (queried, answer) = if ask_gold {
        ((*gold.choose(rng).unwrap()).clone(), "yes")
    } else {
        ((*negatives.choose(rng).unwrap()).clone(), "no")
    };
    sample(
        dialog,
        t,
        slot,
        TaskKind::YesNo,
        question_for(TaskKind::YesNo, slot, Some(&queried)),
        answer.to_string(),
        dialog.established_at(slot, t),
    )
}

/// "maybe" samples for prefixes where the slot has not been informed; the
/// emitted indefinite-knowledge dataset is the union of these with all
/// yes/no samples.
pub fn gen_indefinite<R: Rng>(
    dialog: &Dialog,
    t: usize,
    slot: Slot,
    ontology: &Ontology,
    rng: &mut R,
) -> Result<QASample, TaskError> {
    if dialog.state_after(t).is_informed(slot) {
        return Err(TaskError::SlotInformed {
            slot: slot.as_str().to_string(),
            prefix: t,
        });
    }
    let queried = ontology
        .values(slot)
        .choose(rng)
        .expect("ontology slots are nonempty")
        .clone();
    Ok(sample(
        dialog,
        t,
        slot,
        TaskKind::Indefinite,
        question_for(TaskKind::Indefinite, slot, Some(&queried)),
        "maybe".to_string(),
        None,
    ))
}

/// "how many <slot> are requested ?" — the English word for the set size.
pub fn gen_count(dialog: &Dialog, t: usize, slot: Slot) -> QASample {
    let values = dialog.state_after(t).values(slot);
    assert!(!values.is_empty(), "gen_count requires an informed slot");
    sample(
        dialog,
        t,
        slot,
        TaskKind::Count,
        question_for(TaskKind::Count, slot, None),
        numeral(values.len()),
        dialog.established_at(slot, t),
    )
}

/// "what are the <slot> requested ?" — the canonical sorted "+"-joined label.
pub fn gen_list(dialog: &Dialog, t: usize, slot: Slot) -> QASample {
    let values = dialog.state_after(t).values(slot);
    assert!(!values.is_empty(), "gen_list requires an informed slot");
    sample(
        dialog,
        t,
        slot,
        TaskKind::List,
        question_for(TaskKind::List, slot, None),
        list_label(values),
        dialog.established_at(slot, t),
    )
}

fn generate_for_dialog<R: Rng>(
    dialog: &Dialog,
    task: TaskKind,
    ontology: &Ontology,
    rng: &mut R,
    indef_rng: &mut R,
) -> Vec<QASample> {
    let mut out = Vec::new();
    for t in 1..=dialog.len() {
        for slot in Slot::ALL {
            let informed = dialog.state_after(t).is_informed(slot);
            match task {
                TaskKind::Factoid => out.push(gen_factoid(dialog, t, slot)),
                TaskKind::YesNo => {
                    if informed {
                        out.push(gen_yesno(dialog, t, slot, ontology, rng));
                    }
                }
                TaskKind::Indefinite => {
                    if informed {
                        out.push(gen_yesno(dialog, t, slot, ontology, rng));
                    } else {
                        out.push(gen_indefinite(dialog, t, slot, ontology, indef_rng).unwrap());
                    }
                }
                TaskKind::Count => {
                    if informed {
                        out.push(gen_count(dialog, t, slot));
                    }
                }
                TaskKind::List => {
                    if informed {
                        out.push(gen_list(dialog, t, slot));
                    }
                }
            }
        }
    }
    out
}

/// Generate one task dataset over the whole corpus. Dialogs are processed in
/// parallel on independent seeded streams and emitted in corpus order, so
/// output is byte-identical for a fixed seed regardless of worker count.
/// The indefinite dataset draws its yes/no coins from the same stream the
/// yes/no task uses, making it a literal superset of that dataset.
pub fn generate_task(
    dialogs: &[Dialog],
    task: TaskKind,
    ontology: &Ontology,
    seed: u64,
) -> Vec<QASample> {
    let indexed: Vec<(u64, &Dialog)> = dialogs
        .iter()
        .enumerate()
        .map(|(i, d)| (i as u64, d))
        .collect();
    map_ordered(&indexed, |(ordinal, dialog)| {
        let mut rng = dialog_rng(seed, PURPOSE_GENERATE, *ordinal);
        let mut indef_rng = dialog_rng(seed, PURPOSE_INDEFINITE, *ordinal);
        generate_for_dialog(dialog, task, ontology, &mut rng, &mut indef_rng)
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Input vocabulary for a generated dataset: context tokens and question
/// tokens in sample order, then every template instantiation over the
/// ontology (so questions about unseen values still encode without UNK).
pub fn vocabulary_for_samples(
    samples: &[QASample],
    ontology: &Ontology,
) -> crate::corpus::Vocabulary {
    let context_tokens = samples
        .iter()
        .flat_map(|s| s.context.iter().flatten().cloned());
    let sample_questions = samples.iter().flat_map(|s| s.question.iter().cloned());
    let template_tokens = super::templates::question_strings(ontology)
        .into_iter()
        .flat_map(|q| question_tokens(&q));
    crate::corpus::Vocabulary::from_tokens(
        context_tokens.chain(sample_questions).chain(template_tokens),
    )
}

/// Ontology values in declaration order, then the reserved labels, then every
/// further answer observed in the training samples, first seen first.
pub fn build_answer_vocabulary(train: &[QASample], ontology: &Ontology) -> AnswerVocabulary {
    let ontology_labels = Slot::ALL
        .iter()
        .flat_map(|s| ontology.values(*s).iter().cloned());
    let reserved = [DONTCARE, UNINFORMED_LABEL, "yes", "no", "maybe"]
        .into_iter()
        .map(str::to_string);
    let seen = train.iter().map(|s| s.answer.clone());
    AnswerVocabulary::from_labels(ontology_labels.chain(reserved).chain(seen))
}

/// Uniform random split at the dialog level: every sample of a dialog lands
/// on the same side. The validation side gets round(fraction * n_dialogs)
/// dialogs.
pub fn split_train_validation(
    samples: &[QASample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<QASample>, Vec<QASample>), TaskError> {
    assert!(fraction > 0.0 && fraction < 1.0, "fraction must be in (0,1)");
    let mut ids: Vec<&str> = Vec::new();
    for s in samples {
        if ids.last() != Some(&s.dialog_id.as_str()) && !ids.contains(&s.dialog_id.as_str()) {
            ids.push(&s.dialog_id);
        }
    }
    if ids.len() < 2 {
        return Err(TaskError::TooFewDialogs(ids.len()));
    }
    let n_val = (fraction * ids.len() as f64).round() as usize;
    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut dialog_rng(seed, PURPOSE_SPLIT, 0));
    let validation_ids: std::collections::HashSet<&str> =
        shuffled.into_iter().take(n_val).collect();

    let mut train = Vec::new();
    let mut validation = Vec::new();
    for s in samples {
        if validation_ids.contains(s.dialog_id.as_str()) {
            validation.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, validation))
}
