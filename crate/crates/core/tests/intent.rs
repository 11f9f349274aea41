use kasper_core::intent::{
    knn_classify, levenshtein, max_over_time, similarity, softmax, tokenize, CnnModel, Dataset,
    EmbeddingTable, Example, IntentClass, ModelBundle, ModelKind, Prediction, RnnModel,
    TrainConfig, NUM_CLASSES,
};
use kasper_core::sim::{generate_corpus, CorpusSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lev_recursive(a: &[u8], b: &[u8]) -> usize {
    match (a, b) {
        ([], _) => b.len(),
        (_, []) => a.len(),
        ([x, ra @ ..], [y, rb @ ..]) if x == y => lev_recursive(ra, rb),
        ([_, ra @ ..], [_, rb @ ..]) => {
            1 + lev_recursive(ra, b)
                .min(lev_recursive(a, rb))
                .min(lev_recursive(ra, rb))
        }
    }
}

fn flat(params: Vec<&[f64]>) -> Vec<f64> {
    params.concat()
}

fn nudge(params: Vec<&mut [f64]>, mut index: usize, delta: f64) {
    for p in params {
        if index < p.len() {
            p[index] += delta;
            return;
        }
        index -= p.len();
    }
    panic!("parameter index out of range");
}

/// Worst relative error between analytic and central-difference gradients
/// of the summed loss over `batch`, across every parameter.
fn worst_gradient_error<M: Clone>(
    model: &M,
    batch: &[(Vec<f64>, usize)],
    params: impl Fn(&M) -> Vec<f64>,
    nudge_param: impl Fn(&mut M, usize, f64),
    loss: impl Fn(&M, &[f64], usize) -> f64,
    analytic: impl Fn(&M, &[(Vec<f64>, usize)]) -> Vec<f64>,
) -> f64 {
    let h = 1e-4;
    let total = |m: &M| batch.iter().map(|(s, t)| loss(m, s, *t)).sum::<f64>();
    let grad = analytic(model, batch);
    assert_eq!(grad.len(), params(model).len());
    let mut worst = 0.0f64;
    for (i, &a) in grad.iter().enumerate() {
        let (mut up, mut down) = (model.clone(), model.clone());
        nudge_param(&mut up, i, h);
        nudge_param(&mut down, i, -h);
        let numeric = (total(&up) - total(&down)) / (2.0 * h);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

/// Six-word vocabulary of 4-d vectors and a few sentences of length 1 to 5.
fn small_instance(seed: u64) -> (EmbeddingTable, Vec<(Vec<f64>, usize)>) {
    let words = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"];
    let table = EmbeddingTable::random_with_bound(words, 4, 1.0, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let batch = (1..=5)
        .map(|len| {
            let tokens: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..6)]).collect();
            (table.sequence(&tokens), rng.random_range(0..NUM_CLASSES))
        })
        .collect();
    (table, batch)
}

fn cnn_error(seed: u64) -> f64 {
    let (_, batch) = small_instance(seed);
    let model = CnnModel::init(4, 2, &mut ChaCha8Rng::seed_from_u64(seed));
    worst_gradient_error(
        &model,
        &batch,
        |m| flat(m.params()),
        |m, i, d| nudge(m.params_mut(), i, d),
        |m, s, t| m.loss(s, t),
        |m, b| {
            let mut g = m.zeros_like();
            for (s, t) in b {
                m.loss_and_grad(s, *t, &mut g);
            }
            flat(g.params())
        },
    )
}

fn rnn_error(seed: u64) -> f64 {
    let (_, batch) = small_instance(seed);
    let model = RnnModel::init(4, 3, &mut ChaCha8Rng::seed_from_u64(seed));
    worst_gradient_error(
        &model,
        &batch,
        |m| flat(m.params()),
        |m, i, d| nudge(m.params_mut(), i, d),
        |m, s, t| m.loss(s, t),
        |m, b| {
            let mut g = m.zeros_like();
            for (s, t) in b {
                m.loss_and_grad(s, *t, &mut g);
            }
            flat(g.params())
        },
    )
}

fn small_corpus(per_class: usize) -> Dataset {
    generate_corpus(&CorpusSpec {
        per_class,
        ..CorpusSpec::default()
    })
    .unwrap()
}

proptest! {
    #[test]
    fn levenshtein_matches_the_recursive_definition(a in "[abc]{0,6}", b in "[abc]{0,6}") {
        prop_assert_eq!(levenshtein(&a, &b), lev_recursive(a.as_bytes(), b.as_bytes()));
    }

    #[test]
    fn levenshtein_is_a_metric(a in "[a-d ]{0,12}", b in "[a-d ]{0,12}", c in "[a-d ]{0,12}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        let s = similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, similarity(&b, &a));
    }

    #[test]
    fn softmax_ignores_a_common_shift(
        logits in prop::collection::vec(-50.0f64..50.0, NUM_CLASSES),
        shift in -100.0f64..100.0,
    ) {
        let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
        let (p, q) = (softmax(&logits), softmax(&shifted));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert_eq!(Prediction::from_logits(&logits).argmax, Prediction::from_logits(&shifted).argmax);
    }

    #[test]
    fn knn_with_every_point_votes_the_majority(
        counts in prop::collection::vec(1usize..4, 2..6),
        query in "[a-z]{1,8}( [a-z]{1,8}){0,3}",
        seed in any::<u64>(),
    ) {
        let mut examples = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            let extra = usize::from(c == 1);
            for i in 0..n + extra * counts.iter().max().unwrap() {
                examples.push(Example {
                    class: IntentClass::from_index(c).unwrap(),
                    text: format!("word{c} token{i} filler"),
                });
            }
        }
        let train = Dataset::new(examples).unwrap();
        let vocab: Vec<String> = train.iter().flat_map(|e| tokenize(&e.text)).chain(tokenize(&query)).collect();
        let table = EmbeddingTable::random(vocab, 8, seed);
        let p = knn_classify(&query, &train, &table, train.len()).unwrap();
        prop_assert_eq!(p.argmax, IntentClass::from_index(1).unwrap());
    }

    #[test]
    fn raising_the_maximum_raises_the_pool(
        values in prop::collection::vec(-10.0f64..10.0, 1..20),
        bump in 0.0f64..5.0,
        other in any::<prop::sample::Index>(),
    ) {
        let (t, max) = max_over_time(values.iter().copied());
        prop_assert!(values.iter().all(|v| *v <= max));
        let mut raised = values.clone();
        raised[t] += bump;
        prop_assert_eq!(max_over_time(raised.iter().copied()), (t, max + bump));
        let mut elsewhere = values.clone();
        elsewhere[other.index(values.len())] += bump;
        prop_assert!(max_over_time(elsewhere.iter().copied()).1 >= max);
    }

    #[test]
    fn cnn_pools_the_largest_window(seed in any::<u64>(), len in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = CnnModel::init(3, 2, &mut rng);
        let seq: Vec<f64> = (0..len * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fwd = model.forward(&seq);
        let mut k = 0;
        for bank in &model.banks {
            let w = bank.width;
            let mut padded = seq.clone();
            padded.resize(seq.len().max(w * 3), 0.0);
            let positions = padded.len() / 3 - w + 1;
            for f in 0..model.filters {
                let kernel = &bank.weights[f * w * 3..(f + 1) * w * 3];
                let best = (0..positions)
                    .map(|t| bank.bias[f] + (0..w * 3).map(|j| kernel[j] * padded[t * 3 + j]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(fwd.features[k], best.max(0.0));
                k += 1;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn analytic_gradients_match_finite_differences(seed in any::<u64>()) {
        let (c, r) = (cnn_error(seed), rnn_error(seed));
        prop_assert!(c <= 1e-4, "cnn relative error {c:e}");
        prop_assert!(r <= 1e-4, "rnn relative error {r:e}");
    }
}

#[test]
fn checkpoints_round_trip_bit_for_bit() {
    let data = small_corpus(6);
    let config = TrainConfig {
        epochs: 3,
        filters: 4,
        hidden: 5,
        seed: 7,
        ..TrainConfig::default()
    };
    let bundle = ModelBundle::train(
        &data,
        &[ModelKind::Cnn, ModelKind::Rnn],
        config.clone(),
        None,
    )
    .unwrap();
    let text = bundle.to_json();
    let back = ModelBundle::from_json(&text).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(back.to_json(), text);
    for e in data.iter().take(40) {
        for algo in bundle.available() {
            let (a, b) = (
                bundle.classify(algo, &e.text).unwrap(),
                back.classify(algo, &e.text).unwrap(),
            );
            assert_eq!(a.distribution, b.distribution);
        }
    }
    let again = ModelBundle::train(&data, &[ModelKind::Cnn, ModelKind::Rnn], config, None).unwrap();
    assert_eq!(again.to_json(), text);
}
