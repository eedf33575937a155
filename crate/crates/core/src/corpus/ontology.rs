//! Slot domains, declared in a config file so membership errors surface at
//! parse time instead of deep inside task generation.

use super::{CorpusError, Slot, DONTCARE};
use std::collections::HashSet;

const BUILTIN: &str = include_str!("../../data/ontology.txt");

#[derive(Debug, Clone)]
pub struct Ontology {
    values: [Vec<String>; 3],
    lookup: [HashSet<String>; 3],
}

impl Ontology {
    /// The bundled default domains: 5 area, 91 food, 3 pricerange values.
    pub fn builtin() -> Ontology {
        Ontology::parse(BUILTIN).expect("bundled ontology must parse")
    }

    /// Parse "slot: value, value, ..." lines. Every slot must be declared
    /// exactly once; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Ontology, CorpusError> {
        let mut values: [Option<Vec<String>>; 3] = [None, None, None];
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, rest) = line.split_once(':').ok_or(CorpusError::Malformed {
                line: line_no,
                message: "expected \"slot: value, value, ...\"".into(),
            })?;
            let slot = Slot::parse(name.trim()).ok_or_else(|| CorpusError::UnknownSlot {
                line: line_no,
                slot: name.trim().to_string(),
            })?;
            let vals: Vec<String> = rest
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if vals.is_empty() {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: format!("slot {slot} declares no values"),
                });
            }
            if values[slot.ordinal()].replace(vals).is_some() {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: format!("slot {slot} declared twice"),
                });
            }
        }
        for slot in Slot::ALL {
            if values[slot.ordinal()].is_none() {
                return Err(CorpusError::Malformed {
                    line: 0,
                    message: format!("slot {slot} missing from ontology"),
                });
            }
        }
        let values = values.map(Option::unwrap);
        let lookup = [
            values[0].iter().cloned().collect(),
            values[1].iter().cloned().collect(),
            values[2].iter().cloned().collect(),
        ];
        Ok(Ontology { values, lookup })
    }

    pub fn load(path: &std::path::Path) -> Result<Ontology, CorpusError> {
        Ontology::parse(&std::fs::read_to_string(path)?)
    }

    /// Declared values in declaration order, excluding "dontcare".
    pub fn values(&self, slot: Slot) -> &[String] {
        &self.values[slot.ordinal()]
    }

    /// A value is admissible in a state if it is in the domain or "dontcare".
    pub fn admits(&self, slot: Slot, value: &str) -> bool {
        value == DONTCARE || self.lookup[slot.ordinal()].contains(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_documented_domain_sizes() {
        let ont = Ontology::builtin();
        assert_eq!(ont.values(Slot::Area).len(), 5);
        assert_eq!(ont.values(Slot::Food).len(), 91);
        assert_eq!(ont.values(Slot::Pricerange).len(), 3);
    }

    #[test]
    fn dontcare_is_always_admissible() {
        let ont = Ontology::builtin();
        assert!(ont.admits(Slot::Food, "dontcare"));
        assert!(!ont.admits(Slot::Food, "klingon"));
    }

    #[test]
    fn missing_slot_is_an_error() {
        let err = Ontology::parse("area: north\nfood: thai\n").unwrap_err();
        assert!(err.to_string().contains("pricerange"));
    }

    #[test]
    fn unknown_slot_is_named() {
        let err = Ontology::parse("area: north\nfood: thai\npricerange: cheap\ncolor: red\n")
            .unwrap_err();
        assert!(err.to_string().contains("color"));
    }
}
