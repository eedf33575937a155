//! Reader and writer for the line-oriented dialog-record format:
//!
//! ```text
//! # dialog <id>
//! <index>|<speaker>|<text>|<slot=value[,value...];...>
//! ```
//!
//! Records are blank-line separated; the fourth field is the full state
//! AFTER the turn, with empty slots omitted.

use std::collections::BTreeSet;

use super::{CorpusError, Dialog, Ontology, Slot, SlotState, Speaker, Utterance};

pub fn parse_dialog_corpus(text: &str, ontology: &Ontology) -> Result<Vec<Dialog>, CorpusError> {
    let mut dialogs = Vec::new();
    let mut current: Option<(String, Vec<Utterance>, Vec<SlotState>, usize)> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            if let Some(d) = current.take() {
                dialogs.push(finish_dialog(d)?);
            }
            continue;
        }
        if let Some(id) = line.strip_prefix("# dialog ") {
            if let Some(d) = current.take() {
                dialogs.push(finish_dialog(d)?);
            }
            let id = id.trim();
            if id.is_empty() {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: "dialog header has empty id".into(),
                });
            }
            current = Some((id.to_string(), Vec::new(), Vec::new(), line_no));
            continue;
        }

        let (_, utterances, states, _) = current.as_mut().ok_or(CorpusError::Malformed {
            line: line_no,
            message: "turn line before any \"# dialog\" header".into(),
        })?;

        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 4 {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("expected 4 |-separated fields, found {}", fields.len()),
            });
        }
        let index: usize = fields[0].trim().parse().map_err(|_| CorpusError::Malformed {
            line: line_no,
            message: format!("turn index \"{}\" is not a number", fields[0]),
        })?;
        if index != utterances.len() + 1 {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("turn index {} out of order (expected {})", index, utterances.len() + 1),
            });
        }
        let speaker = match fields[1].trim() {
            "cust" | "customer" => Speaker::Customer,
            "agent" => Speaker::Agent,
            other => {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: format!("unknown speaker \"{other}\""),
                })
            }
        };
        let utterance = Utterance::new(index, speaker, fields[2]);
        if utterance.tokens.is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "utterance tokenizes to nothing".into(),
            });
        }
        let state = parse_state(fields[3], ontology, line_no)?;

        // Monotone information: an informed slot never becomes uninformed.
        if let Some(prev) = states.last() {
            for slot in Slot::ALL {
                if prev.is_informed(slot) && !state.is_informed(slot) {
                    return Err(CorpusError::Malformed {
                        line: line_no,
                        message: format!("slot {slot} loses its value at turn {index}"),
                    });
                }
            }
        }

        utterances.push(utterance);
        states.push(state);
    }
    if let Some(d) = current.take() {
        dialogs.push(finish_dialog(d)?);
    }
    Ok(dialogs)
}

fn finish_dialog(
    (id, utterances, states, header_line): (String, Vec<Utterance>, Vec<SlotState>, usize),
) -> Result<Dialog, CorpusError> {
    if utterances.is_empty() {
        return Err(CorpusError::Malformed {
            line: header_line,
            message: format!("dialog {id} has no turns"),
        });
    }
    debug_assert_eq!(utterances.len(), states.len(), "state/turn count mismatch");
    Ok(Dialog {
        id,
        utterances,
        states,
    })
}

fn parse_state(field: &str, ontology: &Ontology, line_no: usize) -> Result<SlotState, CorpusError> {
    let mut state = SlotState::empty();
    let field = field.trim();
    if field.is_empty() {
        return Ok(state);
    }
    for part in field.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, vals) = part.split_once('=').ok_or(CorpusError::Malformed {
            line: line_no,
            message: format!("state entry \"{part}\" is not slot=value"),
        })?;
        let slot = Slot::parse(name.trim()).ok_or_else(|| CorpusError::UnknownSlot {
            line: line_no,
            slot: name.trim().to_string(),
        })?;
        let mut set = BTreeSet::new();
        for value in vals.split(',') {
            let value = value.trim();
            if value.is_empty() {
                continue;
            }
            if !ontology.admits(slot, value) {
                return Err(CorpusError::UnknownValue {
                    line: line_no,
                    slot: slot.as_str().to_string(),
                    value: value.to_string(),
                });
            }
            set.insert(value.to_string());
        }
        if set.is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("slot {slot} listed with no values"),
            });
        }
        state.set(slot, set);
    }
    Ok(state)
}

/// Inverse of `parse_dialog_corpus`; value sets serialize in sorted order.
pub fn write_dialog_corpus(dialogs: &[Dialog]) -> String {
    let mut out = String::new();
    for (i, d) in dialogs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("# dialog {}\n", d.id));
        for (utt, state) in d.utterances.iter().zip(&d.states) {
            let state_str = Slot::ALL
                .iter()
                .filter(|s| state.is_informed(**s))
                .map(|s| {
                    format!(
                        "{}={}",
                        s.as_str(),
                        state.values(*s).iter().cloned().collect::<Vec<_>>().join(",")
                    )
                })
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{}|{}|{}|{}\n",
                utt.index,
                utt.speaker.as_str(),
                utt.text,
                state_str
            ));
        }
    }
    out
}
