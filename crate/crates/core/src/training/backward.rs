//! Exact analytic gradients through the full K-hop graph, with tied roles
//! accumulating into their shared storage.

use super::loss::LOSS_EPS;
use super::{EncodedSample, TrainError};
use crate::corpus::Bag;
use crate::matrix::{dot, softmax, Matrix};
use crate::model::{encode_context, MemN2NParams, ModelConfig, Tying};
use crate::parallel::map_ordered;

/// One matrix per free (post-tying) parameter storage; every aliased role
/// adds its contribution to the single shared entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tying: Tying,
    hops: usize,
    pub(crate) b: Matrix,
    pub(crate) a1: Matrix,
    pub(crate) c: Vec<Matrix>,
    pub(crate) w: Option<Matrix>,
    pub(crate) t_a1: Matrix,
    pub(crate) t_c: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(params: &MemN2NParams) -> Gradients {
        let zero = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Gradients {
            tying: params.tying(),
            hops: params.hops(),
            b: zero(&params.b),
            a1: zero(&params.a1),
            c: params.c.iter().map(zero).collect(),
            w: params.w.as_ref().map(zero),
            t_a1: zero(&params.t_a1),
            t_c: params.t_c.iter().map(zero).collect(),
        }
    }

    /// Storages in the same order and under the same names as the parameter
    /// container.
    pub fn storages(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = vec![&self.b, &self.a1];
        out.extend(self.c.iter());
        if let Some(w) = &self.w {
            out.push(w);
        }
        out.push(&self.t_a1);
        out.extend(self.t_c.iter());
        out
    }

    pub fn storages_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = vec![&mut self.b, &mut self.a1];
        out.extend(self.c.iter_mut());
        if let Some(w) = &mut self.w {
            out.push(w);
        }
        out.push(&mut self.t_a1);
        out.extend(self.t_c.iter_mut());
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        let mut mine = self.storages_mut();
        let theirs = other.storages();
        assert_eq!(mine.len(), theirs.len());
        for (m, o) in mine.iter_mut().zip(theirs) {
            m.add_assign(o);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in self.storages_mut() {
            m.scale(factor);
        }
    }

    /// L2 norm over every free storage concatenated.
    pub fn global_norm(&self) -> f64 {
        self.storages().iter().map(|m| m.sq_norm()).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.storages().iter().all(|m| m.all_finite())
    }

    fn a_storage_mut(&mut self, k: usize) -> &mut Matrix {
        match self.tying {
            Tying::Adjacent => {
                if k == 1 {
                    &mut self.a1
                } else {
                    &mut self.c[k - 2]
                }
            }
            Tying::Layerwise => &mut self.a1,
        }
    }

    fn c_storage_mut(&mut self, k: usize) -> &mut Matrix {
        match self.tying {
            Tying::Adjacent => &mut self.c[k - 1],
            Tying::Layerwise => &mut self.c[0],
        }
    }

    fn t_a_storage_mut(&mut self, k: usize) -> &mut Matrix {
        match self.tying {
            Tying::Adjacent => {
                if k == 1 {
                    &mut self.t_a1
                } else {
                    &mut self.t_c[k - 2]
                }
            }
            Tying::Layerwise => &mut self.t_a1,
        }
    }

    fn t_c_storage_mut(&mut self, k: usize) -> &mut Matrix {
        match self.tying {
            Tying::Adjacent => &mut self.t_c[k - 1],
            Tying::Layerwise => &mut self.t_c[0],
        }
    }

    /// dW += dz ⊗ u. Under adjacent tying W row r lives in column r of the
    /// last C storage.
    fn add_answer_map(&mut self, dz: &[f64], u: &[f64]) {
        match self.tying {
            Tying::Adjacent => {
                let ck = &mut self.c[self.hops - 1];
                for (r, g) in dz.iter().enumerate() {
                    for (row, uv) in u.iter().enumerate() {
                        ck[(row, r)] += g * uv;
                    }
                }
            }
            Tying::Layerwise => {
                let w = self.w.as_mut().unwrap();
                for (r, g) in dz.iter().enumerate() {
                    for (col, uv) in u.iter().enumerate() {
                        w[(r, col)] += g * uv;
                    }
                }
            }
        }
    }
}

/// m[*, token] += dvec * count for every bag entry.
fn add_outer_bag(m: &mut Matrix, dvec: &[f64], bag: &Bag) {
    for &(token, count) in bag.entries() {
        for (r, g) in dvec.iter().enumerate() {
            m[(r, token)] += g * count;
        }
    }
}

fn add_vec(target: &mut [f64], source: &[f64]) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += s;
    }
}

/// Loss and exact gradient for a single sample. The `linear` flag switches
/// the attention Jacobian between softmax and identity.
pub fn backward_sample(
    params: &MemN2NParams,
    config: &ModelConfig,
    sample: &EncodedSample,
    linear: bool,
) -> Result<(f64, Gradients), TrainError> {
    let mut grads = Gradients::zeros_like(params);
    let loss = backward_sample_into(params, config, sample, linear, &mut grads)?;
    Ok((loss, grads))
}

/// Like [`backward_sample`] but accumulating into an existing gradient
/// buffer, so batch chunks reuse one allocation.
pub fn backward_sample_into(
    params: &MemN2NParams,
    config: &ModelConfig,
    sample: &EncodedSample,
    linear: bool,
    grads: &mut Gradients,
) -> Result<f64, TrainError> {
    let gold = sample.gold.ok_or(TrainError::MissingGoldLabel {
        answer: sample.answer.clone(),
    })?;
    if sample.context.is_empty() {
        return Err(TrainError::Model(crate::model::ModelError::NoMemories));
    }
    let cfg = ModelConfig {
        linear_attention: linear,
        ..config.clone()
    };
    let hops = cfg.hops;

    // Forward, caching everything the reverse sweep needs.
    let mut u = vec![0.0; cfg.d];
    for &(token, count) in sample.question.entries() {
        for (r, slot) in u.iter_mut().enumerate() {
            *slot += params.b()[(r, token)] * count;
        }
    }
    let mut us: Vec<Vec<f64>> = vec![u.clone()];
    let mut ms_per_hop = Vec::with_capacity(hops);
    let mut cs_per_hop = Vec::with_capacity(hops);
    let mut ps: Vec<Vec<f64>> = Vec::with_capacity(hops);

    for k in 1..=hops {
        let (ms, cs, _) = encode_context(params, &cfg, &sample.context, k);
        let scores: Vec<f64> = ms.iter().map(|m| dot(&u, m)).collect();
        let p = if linear { scores } else { softmax(&scores) };
        let mut o = vec![0.0; cfg.d];
        for (w, c) in p.iter().zip(&cs) {
            for (slot, v) in o.iter_mut().zip(c) {
                *slot += w * v;
            }
        }
        u = u.iter().zip(&o).map(|(a, b)| a + b).collect();
        us.push(u.clone());
        ms_per_hop.push(ms);
        cs_per_hop.push(cs);
        ps.push(p);
    }

    let logits = params.answer_logits(&u);
    let a_hat = softmax(&logits);
    if gold >= a_hat.len() {
        return Err(TrainError::GoldIndexOutOfRange {
            gold,
            answer_size: a_hat.len(),
        });
    }
    let loss = -(a_hat[gold] + LOSS_EPS).ln();

    // Reverse sweep. The epsilon floor in the loss makes the exact logit
    // gradient (p_g/(p_g+eps)) * (a_hat - onehot).
    let factor = a_hat[gold] / (a_hat[gold] + LOSS_EPS);
    let dz: Vec<f64> = a_hat
        .iter()
        .enumerate()
        .map(|(j, p)| factor * (p - if j == gold { 1.0 } else { 0.0 }))
        .collect();

    grads.add_answer_map(&dz, &us[hops]);
    let mut du = params.answer_logits_backward(&dz);

    let n = ms_per_hop[0].len();
    let mem_bags: Vec<&Bag> = (1..=n)
        .map(|i| &sample.context[sample.context.len() - i])
        .collect();

    for k in (1..=hops).rev() {
        let (ms, cs, p) = (&ms_per_hop[k - 1], &cs_per_hop[k - 1], &ps[k - 1]);
        let u_k = &us[k - 1];
        // u_{k+1} = u_k + o_k
        let do_k = du.clone();
        let mut du_k = du;

        // o_k = sum_i p_i c_i
        let dp: Vec<f64> = cs.iter().map(|c| dot(&do_k, c)).collect();
        // attention Jacobian
        let ds: Vec<f64> = if linear {
            dp
        } else {
            let inner = dot(p, &dp);
            p.iter().zip(&dp).map(|(pi, dpi)| pi * (dpi - inner)).collect()
        };

        for i in 0..n {
            // c_i path
            let dc: Vec<f64> = do_k.iter().map(|g| g * p[i]).collect();
            add_outer_bag(grads.c_storage_mut(k), &dc, mem_bags[i]);
            add_vec(grads.t_c_storage_mut(k).row_mut(i), &dc);
            // score path: s_i = u_k . m_i
            let dm: Vec<f64> = u_k.iter().map(|uv| uv * ds[i]).collect();
            add_outer_bag(grads.a_storage_mut(k), &dm, mem_bags[i]);
            add_vec(grads.t_a_storage_mut(k).row_mut(i), &dm);
            for (slot, mv) in du_k.iter_mut().zip(&ms[i]) {
                *slot += ds[i] * mv;
            }
        }
        du = du_k;
    }

    add_outer_bag(&mut grads.b, &du, &sample.question);
    Ok(loss)
}

/// Samples per reduction chunk. The chunk layout depends only on batch
/// order, never on worker count, so summation is bit-reproducible.
const CHUNK: usize = 8;

/// Mean loss and mean gradient over a batch. Fixed-size chunks of samples
/// are processed independently (in parallel when enabled), each accumulating
/// in sample order into one buffer; chunk buffers are then reduced in chunk
/// order. The result is bit-identical for any worker count.
pub fn backward(
    params: &MemN2NParams,
    config: &ModelConfig,
    batch: &[EncodedSample],
    linear: bool,
) -> Result<(f64, Gradients), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let chunks: Vec<&[EncodedSample]> = batch.chunks(CHUNK).collect();
    let per_chunk = map_ordered(&chunks, |chunk| -> Result<(f64, Gradients), TrainError> {
        let mut grads = Gradients::zeros_like(params);
        let mut loss = 0.0;
        for s in *chunk {
            loss += backward_sample_into(params, config, s, linear, &mut grads)?;
        }
        Ok((loss, grads))
    });

    let mut total_loss = 0.0;
    let mut acc: Option<Gradients> = None;
    for result in per_chunk {
        let (loss, g) = result?;
        total_loss += loss;
        match &mut acc {
            None => acc = Some(g),
            Some(a) => a.add_assign(&g),
        }
    }
    let mut grads = acc.unwrap();
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((total_loss * scale, grads))
}

#[cfg(test)]
mod tests {
    use super::super::encode_dataset;
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::model::{init_params, Tying};
    use crate::taskgen::AnswerVocabulary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (MemN2NParams, ModelConfig, Vec<EncodedSample>) {
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "q"]);
        let answers = AnswerVocabulary::from_labels(["x", "y", "z"]);
        let config = ModelConfig {
            d: 3,
            hops: 2,
            tying: Tying::Adjacent,
            memory_capacity: 4,
            answer_size: answers.len(),
            vocab_size: vocab.len(),
            linear_attention: false,
        };
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(17), None).unwrap();
        let samples = vec![
            crate::taskgen::QASample {
                context: vec![vec!["a".into(), "b".into()], vec!["c".into()]],
                question: vec!["q".into()],
                answer: "y".into(),
                supporting_fact: Some(1),
                task: crate::taskgen::TaskKind::Factoid,
                slot: crate::corpus::Slot::Area,
                dialog_id: "d".into(),
                prefix_length: 2,
            },
            crate::taskgen::QASample {
                context: vec![vec!["b".into()]],
                question: vec!["q".into(), "a".into()],
                answer: "z".into(),
                supporting_fact: None,
                task: crate::taskgen::TaskKind::Factoid,
                slot: crate::corpus::Slot::Food,
                dialog_id: "d".into(),
                prefix_length: 1,
            },
        ];
        let encoded = encode_dataset(&samples, &vocab, &answers);
        (params, config, encoded)
    }

    #[test]
    fn untouched_temporal_rows_have_zero_gradient() {
        let (params, config, encoded) = fixture();
        // max context length in the batch is 2 < memory_capacity 4
        let (_, g) = backward(&params, &config, &encoded, false).unwrap();
        assert_eq!(g.t_a1.row(2), &[0.0; 3]);
        assert_eq!(g.t_a1.row(3), &[0.0; 3]);
        assert_eq!(g.t_c.last().unwrap().row(3), &[0.0; 3]);
    }

    #[test]
    fn duplicating_the_batch_keeps_the_mean() {
        let (params, config, encoded) = fixture();
        let (loss1, g1) = backward(&params, &config, &encoded, false).unwrap();
        let doubled: Vec<EncodedSample> = encoded
            .iter()
            .chain(encoded.iter())
            .cloned()
            .collect();
        let (loss2, g2) = backward(&params, &config, &doubled, false).unwrap();
        assert!((loss1 - loss2).abs() < 1e-12);
        for (a, b) in g1.storages().iter().zip(g2.storages()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_reduction_is_order_fixed() {
        let (params, config, encoded) = fixture();
        let (l1, g1) = backward(&params, &config, &encoded, false).unwrap();
        let (l2, g2) = backward(&params, &config, &encoded, false).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn null_column_of_b_gets_no_gradient() {
        let (params, config, encoded) = fixture();
        let (_, g) = backward(&params, &config, &encoded, false).unwrap();
        assert_eq!(g.b.column(crate::corpus::NULL_INDEX), vec![0.0; 3]);
    }
}
