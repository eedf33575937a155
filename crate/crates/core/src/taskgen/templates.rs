//! Fixed question surface forms per (task, slot), the augmentation template
//! bank, and answer-label helpers.

use std::collections::BTreeSet;

use super::{TaskError, TaskKind};
use crate::corpus::{Ontology, Slot, DONTCARE};

pub fn factoid_question(slot: Slot) -> String {
    format!("what is the {} ?", slot.as_str())
}

/// Shared by the yes/no and indefinite-knowledge tasks.
pub fn yesno_question(slot: Slot, value: &str) -> String {
    format!("is the {} {} ?", slot.as_str(), value)
}

pub fn count_question(slot: Slot) -> String {
    format!("how many {} are requested ?", slot.as_str())
}

pub fn list_question(slot: Slot) -> String {
    format!("what are the {} requested ?", slot.as_str())
}

pub fn question_for(task: TaskKind, slot: Slot, value: Option<&str>) -> String {
    match task {
        TaskKind::Factoid => factoid_question(slot),
        TaskKind::YesNo | TaskKind::Indefinite => {
            yesno_question(slot, value.expect("yes/no question needs a value"))
        }
        TaskKind::Count => count_question(slot),
        TaskKind::List => list_question(slot),
    }
}

/// Every question string a converted corpus can contain: the fixed templates
/// plus the value-holed template instantiated over each slot's domain and
/// "dontcare". Feeding these to vocabulary construction guarantees questions
/// never hit UNK.
pub fn question_strings(ontology: &Ontology) -> Vec<String> {
    let mut out = Vec::new();
    for slot in Slot::ALL {
        out.push(factoid_question(slot));
        out.push(count_question(slot));
        out.push(list_question(slot));
        for value in ontology.values(slot) {
            out.push(yesno_question(slot, value));
        }
        out.push(yesno_question(slot, DONTCARE));
    }
    out
}

/// Canonical label for a value set: members sorted ascending, joined by "+".
pub fn list_label(values: &BTreeSet<String>) -> String {
    values.iter().cloned().collect::<Vec<_>>().join("+")
}

/// Lowercase English number word, hyphenated above twenty.
pub fn numeral(n: usize) -> String {
    const ONES: [&str; 20] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
        "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
        "nineteen",
    ];
    const TENS: [&str; 10] = [
        "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    ];
    match n {
        0..=19 => ONES[n].to_string(),
        20..=99 if n.is_multiple_of(10) => TENS[n / 10].to_string(),
        20..=99 => format!("{}-{}", TENS[n / 10], ONES[n % 10]),
        _ => n.to_string(),
    }
}

const BUILTIN_TEMPLATES: &str = include_str!("../../data/augment_templates.txt");

/// Per-slot "also accept" surface patterns used by the inter-utterance
/// augmentation rule. File lines are "slot | pattern-with-<VALUE>-hole".
#[derive(Debug, Clone)]
pub struct AugmentTemplates {
    patterns: [Vec<String>; 3],
}

impl AugmentTemplates {
    pub fn builtin() -> AugmentTemplates {
        AugmentTemplates::parse(BUILTIN_TEMPLATES).expect("bundled templates must parse")
    }

    pub fn parse(text: &str) -> Result<AugmentTemplates, TaskError> {
        let mut patterns: [Vec<String>; 3] = Default::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, pattern) = line.split_once('|').ok_or(TaskError::Malformed {
                line: i + 1,
                message: "expected \"slot | pattern\"".into(),
            })?;
            let slot = Slot::parse(name.trim()).ok_or_else(|| TaskError::Malformed {
                line: i + 1,
                message: format!("unknown slot \"{}\"", name.trim()),
            })?;
            let pattern = pattern.trim().to_string();
            if !pattern.contains("<VALUE>") {
                return Err(TaskError::Malformed {
                    line: i + 1,
                    message: "pattern is missing the <VALUE> hole".into(),
                });
            }
            patterns[slot.ordinal()].push(pattern);
        }
        for slot in Slot::ALL {
            if patterns[slot.ordinal()].is_empty() {
                return Err(TaskError::Malformed {
                    line: 0,
                    message: format!("no augmentation pattern for slot {slot}"),
                });
            }
        }
        Ok(AugmentTemplates { patterns })
    }

    pub fn load(path: &std::path::Path) -> Result<AugmentTemplates, TaskError> {
        AugmentTemplates::parse(&std::fs::read_to_string(path)?)
    }

    pub fn patterns(&self, slot: Slot) -> &[String] {
        &self.patterns[slot.ordinal()]
    }

    pub fn instantiate(&self, slot: Slot, pattern_idx: usize, value: &str) -> String {
        self.patterns[slot.ordinal()][pattern_idx].replace("<VALUE>", value)
    }
}
