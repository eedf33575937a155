//! Compares the data-parallel batch gradient and evaluation paths against
//! a sequential per-sample baseline. Build with `--no-default-features` to
//! benchmark the fully sequential fallback under the same names.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dialog_reader::corpus::{parse_dialog_corpus, Ontology};
use dialog_reader::eval::{accuracy_with, Predictor};
use dialog_reader::model::{init_params, MemN2NParams, ModelConfig, Tying};
use dialog_reader::taskgen::{
    build_answer_vocabulary, generate_task, vocabulary_for_samples, AnswerVocabulary, QASample,
    TaskKind,
};
use dialog_reader::training::{
    backward, backward_sample_into, encode_dataset, EncodedSample, Gradients,
};

struct Fixture {
    params: MemN2NParams,
    config: ModelConfig,
    vocab: dialog_reader::corpus::Vocabulary,
    answers: AnswerVocabulary,
    samples: Vec<QASample>,
    encoded: Vec<EncodedSample>,
}

fn fixture() -> Fixture {
    let ontology = Ontology::builtin();
    let foods = ["italian", "chinese", "indian", "thai", "french", "british"];
    let areas = ["north", "south", "east", "west", "centre"];
    let prices = ["cheap", "moderate", "expensive"];
    let mut text = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..40 {
        use rand::Rng;
        let f = foods[rng.gen_range(0..foods.len())];
        let ar = areas[rng.gen_range(0..areas.len())];
        let p = prices[rng.gen_range(0..prices.len())];
        text.push_str(&format!("# dialog b{i}\n"));
        text.push_str(&format!("1|cust|im looking for a {p} restaurant serving {f} food|food={f};pricerange={p}\n"));
        text.push_str(&format!("2|agent|what part of town do you have in mind|food={f};pricerange={p}\n"));
        text.push_str(&format!("3|cust|somewhere in the {ar} of town|food={f};area={ar};pricerange={p}\n"));
        text.push_str(&format!("4|agent|there are several {f} places in the {ar}|food={f};area={ar};pricerange={p}\n"));
        text.push_str(&format!("5|cust|what is the address and phone number|food={f};area={ar};pricerange={p}\n"));
        text.push_str(&format!("6|cust|thank you good bye|food={f};area={ar};pricerange={p}\n\n"));
    }
    let dialogs = parse_dialog_corpus(&text, &ontology).unwrap();
    let samples = generate_task(&dialogs, TaskKind::Factoid, &ontology, 5);
    let vocab = vocabulary_for_samples(&samples, &ontology);
    let answers = build_answer_vocabulary(&samples, &ontology);
    let config = ModelConfig {
        d: 40,
        hops: 5,
        tying: Tying::Adjacent,
        memory_capacity: 6,
        answer_size: answers.len(),
        vocab_size: vocab.len(),
        linear_attention: false,
    };
    let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(3), None).unwrap();
    let encoded = encode_dataset(&samples, &vocab, &answers);
    Fixture {
        params,
        config,
        vocab,
        answers,
        samples,
        encoded,
    }
}

/// Sequential reference with the library's fixed chunk topology (8 samples
/// per buffer), so the result is bit-identical to the parallel path.
fn backward_sequential(
    params: &MemN2NParams,
    config: &ModelConfig,
    batch: &[EncodedSample],
) -> (f64, Gradients) {
    let mut total = 0.0;
    let mut acc: Option<Gradients> = None;
    for chunk in batch.chunks(8) {
        let mut grads = Gradients::zeros_like(params);
        let mut chunk_loss = 0.0;
        for s in chunk {
            chunk_loss += backward_sample_into(params, config, s, false, &mut grads).unwrap();
        }
        total += chunk_loss;
        match &mut acc {
            None => acc = Some(grads),
            Some(a) => a.add_assign(&grads),
        }
    }
    let mut grads = acc.unwrap();
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    (total * scale, grads)
}

fn bench_backward(c: &mut Criterion) {
    let f = fixture();
    let mut group = c.benchmark_group("batch_backward");
    for batch_size in [16usize, 64] {
        let batch = &f.encoded[..batch_size];
        // parallel and sequential reductions must agree bitwise
        let (l1, g1) = backward(&f.params, &f.config, batch, false).unwrap();
        let (l2, g2) = backward_sequential(&f.params, &f.config, batch);
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);

        group.bench_with_input(BenchmarkId::new("parallel", batch_size), &batch, |b, batch| {
            b.iter(|| backward(&f.params, &f.config, batch, false).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", batch_size),
            &batch,
            |b, batch| b.iter(|| backward_sequential(&f.params, &f.config, batch)),
        );
    }
    group.finish();
}

fn bench_evaluation(c: &mut Criterion) {
    let f = fixture();
    let predictor = Predictor {
        params: &f.params,
        config: &f.config,
        vocab: &f.vocab,
        answers: &f.answers,
    };
    let subset = &f.samples[..200.min(f.samples.len())];
    let mut group = c.benchmark_group("evaluation");
    group.bench_function("parallel_accuracy", |b| {
        b.iter(|| accuracy_with(subset, &f.answers, |s| predictor.label(s).unwrap()))
    });
    group.bench_function("sequential_accuracy", |b| {
        b.iter(|| {
            let mut correct = 0usize;
            for s in subset {
                if predictor.label(s).unwrap() == s.answer {
                    correct += 1;
                }
            }
            correct
        })
    });
    group.finish();
}

criterion_group!(benches, bench_backward, bench_evaluation);
criterion_main!(benches);
