mod common;

use policylens::metrics::{classification_report, confusion_counts};
use policylens::synth::{self, keyword_corpus};
use policylens::textclf::*;
use policylens::{Theme, ThemeSet};
use proptest::prelude::*;
use rand::Rng;

fn random_data(rng: &mut impl Rng, n: usize, dim: usize) -> (Vec<SparseVector>, Vec<bool>) {
    let data = (0..n)
        .map(|_| {
            let mut entries = Vec::new();
            for j in 0..dim {
                if rng.random_bool(0.4) {
                    entries.push((j, rng.random_range(-1.0..1.0)));
                }
            }
            SparseVector::new(dim, entries)
        })
        .collect();
    let targets = (0..n).map(|_| rng.random_bool(0.5)).collect();
    (data, targets)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = synth::rng(2024);
    for _ in 0..100 {
        let dim = rng.random_range(1..8);
        let n = rng.random_range(1..20);
        let (data, targets) = random_data(&mut rng, n, dim);
        let head = Head {
            weights: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            bias: rng.random_range(-1.0..1.0),
        };
        let l2 = rng.random_range(0.0..0.1);
        let (_, analytic) = loss_and_gradient(&head, &data, &targets, l2);
        let numeric = common::fd_gradient(&head, &data, &targets, l2, 1e-5);
        let err = common::relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "relative error {err}");
    }
}

#[test]
fn toy_two_term_corpus_is_fit_exactly() {
    let m = ThemeSet::EMPTY.with(Theme::Mitigation);
    let d = ThemeSet::EMPTY.with(Theme::DisasterRiskManagement);
    let a = ThemeSet::EMPTY.with(Theme::Adaptation);
    let l = ThemeSet::EMPTY.with(Theme::LossAndDamage);
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..6 {
        texts.push(format!("emission plan {i}"));
        labels.push(m);
        texts.push(format!("flood plan {i}"));
        labels.push(d);
    }
    // the other two heads need one positive each
    texts.push("coastal plan".into());
    labels.push(a);
    texts.push("coastal plan".into());
    labels.push(a);
    texts.push("insurance plan".into());
    labels.push(l);
    texts.push("insurance plan".into());
    labels.push(l);
    let model = train(&texts, &labels, &TrainConfig::default()).unwrap();
    let preds: Vec<ThemeSet> = texts
        .iter()
        .map(|t| predict_labels(&model.score_text(t), DEFAULT_THRESHOLD))
        .collect();
    let counts = confusion_counts(&preds, &labels).unwrap();
    let report = classification_report(&counts, None);
    assert_eq!(report.micro.f1, 1.0, "{}", report.to_text());
}

#[test]
fn keyword_corpus_generalizes_to_held_out_docs() {
    let corpus = keyword_corpus(400, 42);
    let labels: Vec<ThemeSet> = corpus.iter().map(|c| c.1).collect();
    let (train_idx, test_idx) = holdout_split(&labels, 0.2, 7);
    let texts: Vec<&str> = train_idx.iter().map(|&i| corpus[i].0.as_str()).collect();
    let train_labels: Vec<ThemeSet> = train_idx.iter().map(|&i| labels[i]).collect();
    let model = train(&texts, &train_labels, &TrainConfig::default()).unwrap();
    let preds: Vec<ThemeSet> = test_idx
        .iter()
        .map(|&i| predict_labels(&model.score_text(&corpus[i].0), DEFAULT_THRESHOLD))
        .collect();
    let golds: Vec<ThemeSet> = test_idx.iter().map(|&i| labels[i]).collect();
    let report = classification_report(&confusion_counts(&preds, &golds).unwrap(), None);
    assert!(report.micro.f1 >= 0.95, "{}", report.to_text());

    let again = train(&texts, &train_labels, &TrainConfig::default()).unwrap();
    assert_eq!(again.to_text(), model.to_text());
}

#[test]
fn small_learning_rate_gives_monotone_loss() {
    let corpus = keyword_corpus(60, 3);
    let tokens: Vec<Vec<String>> = corpus.iter().map(|c| tokenize(&c.0)).collect();
    let vocab = fit_vocabulary(&tokens, 1, 1000).unwrap();
    let data: Vec<SparseVector> = tokens.iter().map(|t| vectorize(t, &vocab)).collect();
    for theme in Theme::ALL {
        let targets: Vec<bool> = corpus.iter().map(|c| c.1.contains(theme)).collect();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            ..TrainConfig::default()
        };
        let trace = train_head(theme, &data, &targets, vocab.len(), &cfg).unwrap();
        for w in trace.losses.windows(2) {
            assert!(w[1] <= w[0], "loss rose from {} to {}", w[0], w[1]);
        }
        assert!(trace.final_loss() <= std::f64::consts::LN_2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vectors_are_unit_or_zero(words in prop::collection::vec("[a-e]{1,3}", 0..30)) {
        let corpus = vec![
            vec!["aa".to_string(), "bb".into(), "abc".into()],
            vec!["cc".to_string(), "dd".into(), "aa".into()],
        ];
        let vocab = fit_vocabulary(&corpus, 1, 100).unwrap();
        let norm = vectorize(&words, &vocab).norm();
        prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn raising_threshold_never_adds_labels(
        scores in prop::array::uniform4(0.0f64..1.0),
        t1 in 0.01f64..0.99,
        t2 in 0.01f64..0.99,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let s = ThemeScores(scores);
        let high = predict_labels(&s, hi);
        let low = predict_labels(&s, lo);
        prop_assert_eq!(high.intersection(low), high);
    }

    #[test]
    fn training_is_deterministic_and_beats_zero(seed in 0u64..1000) {
        let corpus = keyword_corpus(40, seed);
        let labels: Vec<ThemeSet> = corpus.iter().map(|c| c.1).collect();
        prop_assume!(Theme::ALL.iter().all(|t| {
            let p = labels.iter().filter(|l| l.contains(*t)).count();
            p > 0 && p < labels.len()
        }));
        let texts: Vec<&str> = corpus.iter().map(|c| c.0.as_str()).collect();
        let cfg = TrainConfig { epochs: 40, min_df: 1, ..TrainConfig::default() };
        let a = train(&texts, &labels, &cfg).unwrap();
        let b = train(&texts, &labels, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        for k in 0..4 {
            prop_assert!(a.meta.final_loss[k] <= std::f64::consts::LN_2);
        }
        let back = MultiLabelModel::from_text(&a.to_text()).unwrap();
        prop_assert_eq!(back, a);
    }
}
