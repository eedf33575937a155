use super::*;
use crate::corpus::{build_vocabulary, parse_dialog_corpus, Ontology};
use crate::model::{init_params, Tying};
use crate::taskgen::{build_answer_vocabulary, generate_task, question_strings};
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture() -> (
    Vec<QASample>,
    Vocabulary,
    AnswerVocabulary,
    ModelConfig,
    MemN2NParams,
) {
    let text = "\
# dialog a
1|cust|im looking for a cheap place|pricerange=cheap
2|agent|what part of town|pricerange=cheap
3|cust|the north please|pricerange=cheap;area=north

# dialog b
1|cust|thai food in the south|food=thai;area=south
2|agent|bangkok city is in the south|food=thai;area=south
";
    let ont = Ontology::builtin();
    let dialogs = parse_dialog_corpus(text, &ont).unwrap();
    let samples = generate_task(&dialogs, crate::taskgen::TaskKind::Factoid, &ont, 7);
    let vocab = build_vocabulary(&dialogs, &question_strings(&ont));
    let answers = build_answer_vocabulary(&samples, &ont);
    let config = ModelConfig {
        d: 4,
        hops: 2,
        tying: Tying::Adjacent,
        memory_capacity: 3,
        answer_size: answers.len(),
        vocab_size: vocab.len(),
        linear_attention: false,
    };
    let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(2), None).unwrap();
    (samples, vocab, answers, config, params)
}

#[test]
fn gold_predictor_scores_perfectly() {
    let (samples, _, answers, _, _) = fixture();
    let stats = accuracy_with(&samples, &answers, |s| s.answer.clone());
    assert_eq!(stats.accuracy(), 1.0);
    assert_eq!(stats.unanswerable, 0);
    assert_eq!(stats.correct + stats.incorrect, stats.n);
}

#[test]
fn unanswerable_gold_counts_as_error() {
    let (samples, _, _, _, _) = fixture();
    // Answer vocabulary missing every label: everything is unanswerable.
    let empty = AnswerVocabulary::from_labels(["something-else"]);
    let stats = accuracy_with(&samples, &empty, |s| s.answer.clone());
    assert_eq!(stats.correct, 0);
    assert_eq!(stats.unanswerable, stats.n);
    assert_eq!(stats.accuracy(), 0.0);
}

#[test]
fn accuracy_is_order_invariant() {
    let (mut samples, _, answers, _, _) = fixture();
    let a = accuracy_with(&samples, &answers, |s| s.answer.clone());
    samples.reverse();
    let b = accuracy_with(&samples, &answers, |s| s.answer.clone());
    assert_eq!(a.accuracy(), b.accuracy());
}

#[test]
fn uniform_random_predictor_hits_one_over_k() {
    // Balanced synthetic gold labels over k classes; a seeded uniform
    // predictor should land near 1/k.
    let (samples, _, _, _, _) = fixture();
    let k = 4usize;
    let labels = ["l0", "l1", "l2", "l3"];
    let answers = AnswerVocabulary::from_labels(labels);
    let mut synthetic = Vec::new();
    for i in 0..1000 {
        let mut s = samples[i % samples.len()].clone();
        s.answer = labels[i % k].to_string();
        synthetic.push(s);
    }
    let cell = std::sync::Mutex::new(ChaCha8Rng::seed_from_u64(99));
    let stats = accuracy_with(&synthetic, &answers, |_| {
        let mut rng = cell.lock().unwrap();
        labels[rng.gen_range(0..k)].to_string()
    });
    let expected = 1.0 / k as f64;
    assert!(
        (stats.accuracy() - expected).abs() < 0.05,
        "got {}, expected ~{expected}",
        stats.accuracy()
    );
}

#[test]
fn joint_accuracy_is_one_for_gold_predictor_and_bounded_by_slots() {
    let (samples, vocab, answers, config, params) = fixture();
    assert_eq!(joint_accuracy_with(&samples, |s| s.answer.clone()).unwrap(), 1.0);

    let predictor = Predictor {
        params: &params,
        config: &config,
        vocab: &vocab,
        answers: &answers,
    };
    let joint = joint_accuracy(&predictor, &samples).unwrap();
    let report = evaluate(&predictor, &samples).unwrap();
    for g in &report.groups {
        assert!(
            joint <= g.stats.accuracy() + 1e-12,
            "joint {} exceeds {}/{} accuracy {}",
            joint,
            g.task,
            g.slot,
            g.stats.accuracy()
        );
    }
    assert_eq!(report.joint, Some(joint));
}

#[test]
fn incomplete_group_is_reported() {
    let (samples, _, _, _, _) = fixture();
    let broken: Vec<QASample> = samples.iter().take(2).cloned().collect();
    let err = joint_accuracy_with(&broken, |s| s.answer.clone()).unwrap_err();
    assert!(err.to_string().contains("dialog a"), "{err}");
}

#[test]
fn joint_approximates_product_under_independent_errors() {
    // Synthetic predictor wrong independently per slot with fixed rates.
    let (samples, _, _, _, _) = fixture();
    let mut synthetic = Vec::new();
    for rep in 0..2000 {
        for slot in crate::corpus::Slot::ALL {
            let mut s = samples[slot.ordinal()].clone();
            s.dialog_id = format!("g{rep}");
            s.prefix_length = 1;
            s.slot = slot;
            s.answer = "gold".to_string();
            synthetic.push(s);
        }
    }
    let rates = [0.9, 0.8, 0.7];
    let cell = std::sync::Mutex::new(ChaCha8Rng::seed_from_u64(5));
    let joint = joint_accuracy_with(&synthetic, |s| {
        let mut rng = cell.lock().unwrap();
        if rng.gen_bool(rates[s.slot.ordinal()]) {
            "gold".to_string()
        } else {
            "wrong".to_string()
        }
    })
    .unwrap();
    let expected: f64 = rates.iter().product();
    assert!(
        (joint - expected).abs() < 0.04,
        "joint {joint} vs product {expected}"
    );
}

#[test]
fn attention_report_has_one_row_per_kept_utterance() {
    let (samples, vocab, answers, config, params) = fixture();
    let predictor = Predictor {
        params: &params,
        config: &config,
        vocab: &vocab,
        answers: &answers,
    };
    // 3-utterance prefix fits capacity 3
    let sample = samples.iter().find(|s| s.prefix_length == 3).unwrap();
    let report = attention_report(&predictor, sample).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.hops, config.hops);
    assert_eq!(report.rows[0].0, 1);
    assert_eq!(report.rows[0].1, sample.context[0].join(" "));
    // per-hop weights over rows sum to ~1 in softmax mode, and keep
    // summing to 1.00 +- 0.02 after rounding to two decimals
    for k in 0..report.hops {
        let sum: f64 = report.rows.iter().map(|(_, _, w)| w[k]).sum();
        assert!((sum - 1.0).abs() < 1e-6);
        let rounded: f64 = report
            .rows
            .iter()
            .map(|(_, _, w)| (w[k] * 100.0).round() / 100.0)
            .sum();
        assert!((rounded - 1.0).abs() <= 0.02, "rounded column sums to {rounded}");
    }
    let text = report.to_text();
    assert!(text.contains("what is the"));
    assert!(text.contains("answer: "));
    let csv = report.to_csv();
    assert!(csv.starts_with("index,utterance,hop1,hop2\n"));
}

#[test]
fn singleton_context_attends_fully_everywhere() {
    let (samples, vocab, answers, config, params) = fixture();
    let predictor = Predictor {
        params: &params,
        config: &config,
        vocab: &vocab,
        answers: &answers,
    };
    let sample = samples.iter().find(|s| s.prefix_length == 1).unwrap();
    let report = attention_report(&predictor, sample).unwrap();
    assert_eq!(report.rows.len(), 1);
    for w in &report.rows[0].2 {
        assert_eq!(format!("{w:.2}"), "1.00");
    }
}

#[test]
fn rounding_matches_two_decimals() {
    let report = AttentionReport {
        rows: vec![(1, "a".into(), vec![1.0 / 3.0])],
        question: "q".into(),
        predicted: "p".into(),
        hops: 1,
        truncated: 0,
    };
    assert!(report.to_text().contains("0.33"));
}

#[test]
fn forced_onehot_attention_always_hits_the_fact() {
    // d=1 parameters handcrafted so the temporal rows dominate the scores
    // and hop attention lands on memory 1 (the last utterance).
    let vocab = Vocabulary::from_tokens(["a", "b", "q"]);
    let answers = AnswerVocabulary::from_labels(["x", "y"]);
    let config = ModelConfig {
        d: 1,
        hops: 3,
        tying: Tying::Layerwise,
        memory_capacity: 4,
        answer_size: 2,
        vocab_size: vocab.len(),
        linear_attention: false,
    };
    let mut params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(1), None).unwrap();
    for (name, m) in params.storages_mut() {
        for v in m.as_mut_slice() {
            *v = 0.0;
        }
        if name == "B" {
            // u = count("q") > 0
            for c in 0..m.cols() {
                m[(0, c)] = 1.0;
            }
        }
        if name == "TA" {
            m[(0, 0)] = 50.0; // memory 1 wins every score
            for r in 1..m.rows() {
                m[(r, 0)] = -50.0;
            }
        }
    }
    let predictor = Predictor {
        params: &params,
        config: &config,
        vocab: &vocab,
        answers: &answers,
    };
    let mk = |prefix: usize| QASample {
        context: (0..prefix).map(|_| vec!["a".to_string()]).collect(),
        question: vec!["q".to_string()],
        answer: "x".to_string(),
        supporting_fact: Some(prefix), // the last utterance
        task: crate::taskgen::TaskKind::Factoid,
        slot: crate::corpus::Slot::Area,
        dialog_id: "d".to_string(),
        prefix_length: prefix,
    };
    let samples: Vec<QASample> = (1..=4).map(mk).collect();
    assert_eq!(supporting_fact_hit_rate(&predictor, &samples).unwrap(), 1.0);

    // pointing the fact anywhere else misses
    let mut off = mk(3);
    off.supporting_fact = Some(1);
    assert_eq!(
        supporting_fact_hit_rate(&predictor, std::slice::from_ref(&off)).unwrap(),
        0.0
    );
}

#[test]
fn samples_without_facts_are_excluded_from_the_rate() {
    let (samples, vocab, answers, config, params) = fixture();
    let predictor = Predictor {
        params: &params,
        config: &config,
        vocab: &vocab,
        answers: &answers,
    };
    let mut with_none: Vec<QASample> = samples.clone();
    for s in &mut with_none {
        s.supporting_fact = None;
    }
    assert!(supporting_fact_hit_rate(&predictor, &with_none).is_err());
}

#[test]
fn random_argmax_hit_rate_matches_closed_form() {
    // Uniform attention with random tie-breaking hits the fact at one of K
    // hops with probability 1 - (1 - 1/n)^K; checked by seeded simulation.
    let (n, k) = (10usize, 5usize);
    let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(k as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let trials = 20_000;
    let mut hits = 0;
    for _ in 0..trials {
        let fact = rng.gen_range(0..n);
        let hit = (0..k).any(|_| rng.gen_range(0..n) == fact);
        hits += hit as usize;
    }
    let measured = hits as f64 / trials as f64;
    assert!(
        (measured - expected).abs() < 0.05,
        "measured {measured}, closed form {expected}"
    );
}

#[test]
fn report_counts_reconcile() {
    let (samples, vocab, answers, config, params) = fixture();
    let predictor = Predictor {
        params: &params,
        config: &config,
        vocab: &vocab,
        answers: &answers,
    };
    let report = evaluate(&predictor, &samples).unwrap();
    for g in &report.groups {
        assert_eq!(g.stats.correct + g.stats.incorrect, g.stats.n);
        assert!(g.stats.unanswerable <= g.stats.incorrect);
    }
    let confusion_total: usize = report.confusion.values().sum();
    assert_eq!(confusion_total, samples.len());
    assert_eq!(report.total.n, samples.len());
    let csv = report.to_csv();
    assert!(csv.starts_with("task,slot,n,accuracy\n"));
    assert!(report.to_table().contains("factoid"));
}
