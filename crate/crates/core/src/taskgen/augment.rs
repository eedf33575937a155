//! Corpus augmentation growing slot value sets, so counting and listing
//! questions have multi-value answers.
//!
//! R1 rewrites an informing utterance "... v ..." into "... v or w ..." and
//! adds w to the state from that turn on. R2 inserts a new customer
//! utterance ("i would also accept ...") after the informing turn and adds
//! its value to subsequent states.

use rand::seq::SliceRandom;
use rand::Rng;

use super::templates::AugmentTemplates;
use super::{dialog_rng, PURPOSE_AUGMENT};
use crate::corpus::{Dialog, Ontology, Slot, Speaker, Utterance};
use crate::parallel::map_ordered;

#[derive(Debug, Clone, Copy)]
pub struct AugmentRules {
    pub r1_probability: f64,
    pub r2_probability: f64,
}

impl AugmentRules {
    pub fn new(r1_probability: f64, r2_probability: f64) -> AugmentRules {
        assert!((0.0..=1.0).contains(&r1_probability));
        assert!((0.0..=1.0).contains(&r2_probability));
        AugmentRules {
            r1_probability,
            r2_probability,
        }
    }

    pub fn is_noop(&self) -> bool {
        self.r1_probability == 0.0 && self.r2_probability == 0.0
    }
}

/// Find `needle` in `haystack` at a word boundary; returns the byte range.
fn find_word(haystack: &str, needle: &str) -> Option<std::ops::Range<usize>> {
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = start == 0
            || !haystack[..start]
                .chars()
                .next_back()
                .unwrap()
                .is_alphanumeric();
        let after_ok = end == haystack.len()
            || !haystack[end..].chars().next().unwrap().is_alphanumeric();
        if before_ok && after_ok {
            return Some(start..end);
        }
        from = end;
    }
    None
}

fn sample_new_value<'a, R: Rng>(
    ontology: &'a Ontology,
    slot: Slot,
    exclude: &std::collections::BTreeSet<String>,
    rng: &mut R,
) -> Option<&'a String> {
    let candidates: Vec<&String> = ontology
        .values(slot)
        .iter()
        .filter(|v| !exclude.contains(*v))
        .collect();
    candidates.choose(rng).copied()
}

/// Apply both augmentation rules to one dialog. Probabilities of zero leave
/// the dialog untouched. Value sets only ever grow.
pub fn augment_dialog<R: Rng>(
    dialog: &Dialog,
    rules: AugmentRules,
    templates: &AugmentTemplates,
    ontology: &Ontology,
    rng: &mut R,
) -> Dialog {
    if rules.is_noop() {
        return dialog.clone();
    }
    let mut out = dialog.clone();

    // R1: intra-utterance substitution at the turn that informs a value.
    for i in 1..=out.len() {
        for slot in Slot::ALL {
            let newly_informed: Vec<String> = {
                let now = out.state_after(i).values(slot);
                let before = if i >= 2 {
                    out.state_after(i - 1).values(slot).clone()
                } else {
                    Default::default()
                };
                now.iter().filter(|v| !before.contains(*v)).cloned().collect()
            };
            for value in newly_informed {
                let lowered = out.utterances[i - 1].text.to_lowercase();
                let Some(range) = find_word(&lowered, &value) else {
                    continue;
                };
                if !rng.gen_bool(rules.r1_probability) {
                    continue;
                }
                let exclude = out.state_after(i).values(slot).clone();
                let Some(extra) = sample_new_value(ontology, slot, &exclude, rng) else {
                    continue;
                };
                let extra = extra.clone();
                let mut text = lowered;
                text.replace_range(range.clone(), &format!("{value} or {extra}"));
                out.utterances[i - 1] = Utterance::new(i, out.utterances[i - 1].speaker, &text);
                for state in &mut out.states[i - 1..] {
                    state.insert(slot, extra.clone());
                }
            }
        }
    }

    // R2: inter-utterance addition. Informing turns are collected up front
    // and processed latest-first so earlier turn indices stay valid while
    // the dialog grows.
    let mut events: Vec<(usize, Slot)> = Vec::new();
    for i in 1..=out.len() {
        for slot in Slot::ALL {
            let now = out.state_after(i).values(slot);
            let before = if i >= 2 {
                out.state_after(i - 1).values(slot).clone()
            } else {
                Default::default()
            };
            if now.iter().any(|v| !before.contains(v)) {
                events.push((i, slot));
            }
        }
    }
    events.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.ordinal().cmp(&b.1.ordinal())));

    for (inform_turn, slot) in events {
        if inform_turn >= out.len() {
            continue; // nothing strictly after it but before the final turn
        }
        if !rng.gen_bool(rules.r2_probability) {
            continue;
        }
        // Insert before one of the turns inform_turn+1 ..= len, so the new
        // utterance lands strictly after the informer and never last.
        let position = rng.gen_range(inform_turn + 1..=out.len());
        let exclude = out.state_after(position - 1).values(slot).clone();
        let Some(extra) = sample_new_value(ontology, slot, &exclude, rng) else {
            continue;
        };
        let extra = extra.clone();
        let pattern_idx = rng.gen_range(0..templates.patterns(slot).len());
        let text = templates.instantiate(slot, pattern_idx, &extra);

        let mut new_state = out.states[position - 2].clone();
        new_state.insert(slot, extra.clone());
        out.utterances
            .insert(position - 1, Utterance::new(position, Speaker::Customer, &text));
        out.states.insert(position - 1, new_state);
        for state in &mut out.states[position..] {
            state.insert(slot, extra.clone());
        }
    }

    for (i, utt) in out.utterances.iter_mut().enumerate() {
        utt.index = i + 1;
    }
    out
}

/// Augment a whole corpus on independent per-dialog streams; output order
/// and content are fixed by (corpus, seed) alone.
pub fn augment_corpus(
    dialogs: &[Dialog],
    rules: AugmentRules,
    templates: &AugmentTemplates,
    ontology: &Ontology,
    seed: u64,
) -> Vec<Dialog> {
    let indexed: Vec<(u64, &Dialog)> = dialogs
        .iter()
        .enumerate()
        .map(|(i, d)| (i as u64, d))
        .collect();
    map_ordered(&indexed, |(ordinal, dialog)| {
        let mut rng = dialog_rng(seed, PURPOSE_AUGMENT, *ordinal);
        augment_dialog(dialog, rules, templates, ontology, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_dialog_corpus, Ontology};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn north_dialog() -> Dialog {
        let text = "\
# dialog d
1|cust|im looking for a chinese restaurant in the north|food=chinese;area=north
2|agent|rice house serves chinese food in the north of town|food=chinese;area=north
3|cust|what is the address|food=chinese;area=north
4|agent|rice house is on mill road city centre|food=chinese;area=north
5|cust|thank you good bye|food=chinese;area=north
";
        parse_dialog_corpus(text, &Ontology::builtin()).unwrap().remove(0)
    }

    #[test]
    fn zero_probabilities_are_a_noop() {
        let d = north_dialog();
        let out = augment_dialog(
            &d,
            AugmentRules::new(0.0, 0.0),
            &AugmentTemplates::builtin(),
            &Ontology::builtin(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(d, out);
    }

    #[test]
    fn r1_substitutes_value_and_grows_state() {
        let d = north_dialog();
        let out = augment_dialog(
            &d,
            AugmentRules::new(1.0, 0.0),
            &AugmentTemplates::builtin(),
            &Ontology::builtin(),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        assert_eq!(out.len(), d.len());
        let area = out.state_after(1).values(Slot::Area);
        assert_eq!(area.len(), 2);
        assert!(area.contains("north"));
        assert!(
            out.utterances[0].text.contains("north or "),
            "expected \"north or <value>\" in {:?}",
            out.utterances[0].text
        );
        // the added value keeps appearing in every later state
        for t in 1..=out.len() {
            assert_eq!(out.state_after(t).values(Slot::Area), area);
        }
    }

    #[test]
    fn r2_inserts_customer_utterance_after_informing_turn() {
        let d = north_dialog();
        let out = augment_dialog(
            &d,
            AugmentRules::new(0.0, 1.0),
            &AugmentTemplates::builtin(),
            &Ontology::builtin(),
            &mut ChaCha8Rng::seed_from_u64(7),
        );
        assert!(out.len() > d.len());
        // indices renumbered consecutively
        for (i, u) in out.utterances.iter().enumerate() {
            assert_eq!(u.index, i + 1);
        }
        // the inserted turn is never the last one
        assert_eq!(out.utterances.last().unwrap().text, d.utterances.last().unwrap().text);
        // states stay aligned and monotone
        assert_eq!(out.states.len(), out.utterances.len());
        for t in 2..=out.len() {
            for slot in Slot::ALL {
                let prev = out.state_after(t - 1).values(slot);
                let now = out.state_after(t).values(slot);
                assert!(prev.is_subset(now), "value sets must only grow");
            }
        }
    }

    #[test]
    fn augmented_values_come_from_the_domain() {
        let d = north_dialog();
        let ont = Ontology::builtin();
        for seed in 0..20 {
            let out = augment_dialog(
                &d,
                AugmentRules::new(0.7, 0.7),
                &AugmentTemplates::builtin(),
                &ont,
                &mut ChaCha8Rng::seed_from_u64(seed),
            );
            for state in &out.states {
                for slot in Slot::ALL {
                    for v in state.values(slot) {
                        assert!(ont.admits(slot, v), "{v} not in {slot} domain");
                    }
                }
            }
        }
    }

    #[test]
    fn corpus_augmentation_is_deterministic() {
        let dialogs = vec![north_dialog(), north_dialog()];
        let ont = Ontology::builtin();
        let t = AugmentTemplates::builtin();
        let a = augment_corpus(&dialogs, AugmentRules::new(0.5, 0.5), &t, &ont, 99);
        let b = augment_corpus(&dialogs, AugmentRules::new(0.5, 0.5), &t, &ont, 99);
        assert_eq!(a, b);
    }
}
