//! Multi-hop attention over utterance memories.
//!
//! Memories are indexed in reverse: memory 1 is the last utterance of the
//! context, so the learned temporal rows encode distance from the question.
//! Over-capacity contexts keep their most recent utterances.

use super::params::embed_bag;
use super::{argmax_tie_low, MemN2NParams, ModelConfig, ModelError};
use crate::corpus::Bag;
use crate::matrix::{dot, softmax};

/// Everything one forward pass computed, for reports and diagnostics.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    /// p^k over the active memories, memory 1 first (reverse order).
    pub attention: Vec<Vec<f64>>,
    /// u^1 .. u^{K+1}.
    pub controller: Vec<Vec<f64>>,
    /// o^1 .. o^K.
    pub outputs: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub distribution: Vec<f64>,
    /// Number of utterances dropped from the front of the context.
    pub truncated: usize,
    pub n_memories: usize,
}

impl AttentionTrace {
    /// Attention of hop k (1-based) in original dialog order, oldest kept
    /// utterance first.
    pub fn attention_in_dialog_order(&self, k: usize) -> Vec<f64> {
        let mut p = self.attention[k - 1].clone();
        p.reverse();
        p
    }
}

/// Input and output memory vectors for hop k.
/// m_i = A^k Φ(x_i) + T_A^k(i), c_i = C^k Φ(x_i) + T_C^k(i), with i = 1 at
/// the last utterance. Returns along with the number of dropped utterances.
pub fn encode_context(
    params: &MemN2NParams,
    config: &ModelConfig,
    context: &[Bag],
    k: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, usize) {
    let n = context.len().min(config.memory_capacity);
    let truncated = context.len() - n;
    let d = config.d;
    let (a, c, t_a, t_c) = (params.a(k), params.c(k), params.t_a(k), params.t_c(k));

    let mut ms = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    for i in 1..=n {
        let bag = &context[context.len() - i];
        let mut m = t_a.row(i - 1).to_vec();
        embed_bag(a, bag, &mut m);
        let mut cv = t_c.row(i - 1).to_vec();
        embed_bag(c, bag, &mut cv);
        debug_assert_eq!(m.len(), d);
        ms.push(m);
        cs.push(cv);
    }
    (ms, cs, truncated)
}

/// Attention weights p_i from scores u·m_i; raw scores in linear-start mode,
/// stable softmax otherwise.
pub fn attention(u: &[f64], memories: &[Vec<f64>], linear: bool) -> Vec<f64> {
    debug_assert!(!memories.is_empty());
    let scores: Vec<f64> = memories.iter().map(|m| dot(u, m)).collect();
    if linear {
        scores
    } else {
        softmax(&scores)
    }
}

/// One read-update cycle: p = attention(u, m), o = Σ p_i c_i, u' = o + u.
pub fn hop(
    u: &[f64],
    memories: &[Vec<f64>],
    outputs: &[Vec<f64>],
    linear: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    debug_assert_eq!(memories.len(), outputs.len());
    let p = attention(u, memories, linear);
    let mut o = vec![0.0; u.len()];
    for (weight, c) in p.iter().zip(outputs) {
        for (slot, value) in o.iter_mut().zip(c) {
            *slot += weight * value;
        }
    }
    let u_next = u.iter().zip(&o).map(|(a, b)| a + b).collect();
    (u_next, o, p)
}

/// Full K-hop pass: â = softmax(W(o^K + u^K)) with u^1 = B Φ(q).
pub fn forward(
    params: &MemN2NParams,
    config: &ModelConfig,
    context: &[Bag],
    question: &Bag,
) -> Result<(Vec<f64>, AttentionTrace), ModelError> {
    if context.is_empty() {
        return Err(ModelError::NoMemories);
    }
    let d = config.d;
    let mut u = vec![0.0; d];
    embed_bag(params.b(), question, &mut u);

    let mut trace = AttentionTrace {
        attention: Vec::with_capacity(config.hops),
        controller: vec![u.clone()],
        outputs: Vec::with_capacity(config.hops),
        logits: Vec::new(),
        distribution: Vec::new(),
        truncated: 0,
        n_memories: 0,
    };

    for k in 1..=config.hops {
        let (ms, cs, truncated) = encode_context(params, config, context, k);
        trace.truncated = truncated;
        trace.n_memories = ms.len();
        let (u_next, o, p) = hop(&u, &ms, &cs, config.linear_attention);
        trace.attention.push(p);
        trace.outputs.push(o);
        trace.controller.push(u_next.clone());
        u = u_next;
    }

    let logits = params.answer_logits(&u);
    let distribution = softmax(&logits);
    trace.logits = logits;
    trace.distribution = distribution.clone();
    Ok((distribution, trace))
}

/// Index of the predicted answer label (argmax, lowest index on ties).
pub fn predict_index(
    params: &MemN2NParams,
    config: &ModelConfig,
    context: &[Bag],
    question: &Bag,
) -> Result<usize, ModelError> {
    let (distribution, _) = forward(params, config, context, question)?;
    Ok(argmax_tie_low(&distribution))
}
