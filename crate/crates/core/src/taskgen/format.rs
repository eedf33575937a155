//! Task file reader/writer. One sample is a renumbered block: context lines
//! "<n> <utterance text>" with n restarting at 1, then the question line
//! "<n+1> <question text>\t<answer>\t<supporting-fact-or-empty>".

use super::{QASample, TaskError, TaskKind};
use crate::corpus::Slot;

pub fn write_task_file(samples: &[QASample]) -> String {
    let mut out = String::new();
    for s in samples {
        for (i, tokens) in s.context.iter().enumerate() {
            out.push_str(&format!("{} {}\n", i + 1, tokens.join(" ")));
        }
        let fact = s.supporting_fact.map(|f| f.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{} {}\t{}\t{}\n",
            s.context.len() + 1,
            s.question_text(),
            s.answer,
            fact
        ));
    }
    out
}

/// Inverse of [`write_task_file`]. Task and slot are recovered from the
/// question surface form. The format carries no provenance, so dialog ids
/// are reconstructed as 1-based ordinals: within one source dialog prefix
/// lengths never decrease and equal-length prefixes share their context, so
/// a shrinking prefix or a changed context at equal length starts a new
/// dialog.
pub fn read_task_file(text: &str) -> Result<Vec<QASample>, TaskError> {
    let mut samples = read_blocks(text)?;
    let mut group = 0usize;
    for i in 0..samples.len() {
        if i > 0 {
            let prev = &samples[i - 1];
            let cur = &samples[i];
            if cur.prefix_length < prev.prefix_length
                || (cur.prefix_length == prev.prefix_length && cur.context != prev.context)
            {
                group += 1;
            }
        }
        samples[i].dialog_id = (group + 1).to_string();
    }
    Ok(samples)
}

fn read_blocks(text: &str) -> Result<Vec<QASample>, TaskError> {
    let mut samples = Vec::new();
    let mut context: Vec<Vec<String>> = Vec::new();
    let mut block_no = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\n');
        if line.trim().is_empty() {
            continue;
        }
        let (num, rest) = line.split_once(' ').ok_or(TaskError::Malformed {
            line: line_no,
            message: "missing line number".into(),
        })?;
        let n: usize = num.parse().map_err(|_| TaskError::Malformed {
            line: line_no,
            message: format!("line number \"{num}\" is not a number"),
        })?;
        let expected = context.len() + 1;
        if n != expected {
            return Err(TaskError::Malformed {
                line: line_no,
                message: format!("line number {n} out of order (expected {expected})"),
            });
        }

        if !rest.contains('\t') {
            context.push(rest.split_whitespace().map(str::to_string).collect());
            continue;
        }

        let fields: Vec<&str> = rest.split('\t').collect();
        if fields.len() != 3 {
            return Err(TaskError::Malformed {
                line: line_no,
                message: format!("question line needs 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let question: Vec<String> = fields[0].split_whitespace().map(str::to_string).collect();
        let answer = fields[1].to_string();
        let supporting_fact = if fields[2].trim().is_empty() {
            None
        } else {
            let f: usize = fields[2].trim().parse().map_err(|_| TaskError::Malformed {
                line: line_no,
                message: format!("supporting fact \"{}\" is not a number", fields[2]),
            })?;
            if f > context.len() {
                return Err(TaskError::Malformed {
                    line: line_no,
                    message: format!("supporting fact {f} exceeds context length {}", context.len()),
                });
            }
            Some(f)
        };
        let (task, slot) = classify_question(&question, &answer).ok_or(TaskError::Malformed {
            line: line_no,
            message: format!("unrecognized question form \"{}\"", fields[0]),
        })?;
        if context.is_empty() {
            return Err(TaskError::Malformed {
                line: line_no,
                message: "question with no context lines".into(),
            });
        }
        block_no += 1;
        let prefix_length = context.len();
        samples.push(QASample {
            context: std::mem::take(&mut context),
            question,
            answer,
            supporting_fact,
            task,
            slot,
            dialog_id: block_no.to_string(),
            prefix_length,
        });
    }
    if !context.is_empty() {
        return Err(TaskError::Malformed {
            line: text.lines().count(),
            message: "file ends inside a block (no question line)".into(),
        });
    }
    Ok(samples)
}

fn classify_question(question: &[String], answer: &str) -> Option<(TaskKind, Slot)> {
    let q: Vec<&str> = question.iter().map(String::as_str).collect();
    match q.as_slice() {
        ["what", "is", "the", slot, "?"] => Some((TaskKind::Factoid, Slot::parse(slot)?)),
        ["is", "the", slot, .., "?"] if q.len() >= 5 => {
            let task = if answer == "maybe" {
                TaskKind::Indefinite
            } else {
                TaskKind::YesNo
            };
            Some((task, Slot::parse(slot)?))
        }
        ["how", "many", slot, "are", "requested", "?"] => {
            Some((TaskKind::Count, Slot::parse(slot)?))
        }
        ["what", "are", "the", slot, "requested", "?"] => {
            Some((TaskKind::List, Slot::parse(slot)?))
        }
        _ => None,
    }
}
