//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kasper_brain::{BackgroundServer, BrainHandle, HttpBrain};
use kasper_cli::{compare_algorithms, format_comparison, AlgoChoice, TrainOptions};
use kasper_core::assistant::{kasper_table, AssistantContext, AssistantState, Event, MediaCommand};
use kasper_core::audio::{frame_signal, frame_window, AudioSignal};
use kasper_core::brain::{Brain, SkillRegistry};
use kasper_core::fsm::validate_table;
use kasper_core::intent::{
    levenshtein, Algorithm, CnnModel, Dataset, EmbeddingTable, IntentClass, ModelBundle, ModelKind,
    RnnModel, TrainConfig, NUM_CLASSES,
};
use kasper_core::sim::{
    generate_corpus, run_scenario, CorpusSpec, Scenario, ScriptedEvent, Simulator,
};
use kasper_core::transcriber::{
    decode_beam, train_bigram_lm, BigramLM, LetterScores, Symbol, ALPHABET_SIZE, LM_SYMBOLS,
};
use proptest::test_runner::{Config, TestRunner};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn random_event(rng: &mut ChaCha8Rng) -> Event {
    let word = |rng: &mut ChaCha8Rng| {
        ["weather", "jazz", "news", "", "  "][rng.random_range(0..5)].to_owned()
    };
    match rng.random_range(0..11) {
        0 => Event::HotwordDetected,
        1 => Event::WakeButtonPressed,
        2 => Event::TranscriptReady(word(rng)),
        3 => Event::RecognitionFailed(word(rng)),
        4 => Event::ResponseReady {
            intent: IntentClass::ALL[rng.random_range(0..NUM_CLASSES)],
            text: word(rng),
        },
        5 => Event::ResponseSpoken,
        6 => Event::QueryFailed(word(rng)),
        7 => Event::ErrorAnnounced,
        8 => Event::MediaCommand(MediaCommand::Play(format!(
            "song-{}",
            rng.random_range(0..3)
        ))),
        9 => Event::MediaCommand(MediaCommand::Pause),
        _ => Event::MediaCommand(MediaCommand::Stop),
    }
}

fn fsm_soundness() -> Check {
    let violations = validate_table(&kasper_table());
    ensure(violations.is_empty(), || {
        format!("table violations: {violations:?}")
    })?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut sim = Simulator::new(AssistantContext::new(), None);
    let mut visited = std::collections::BTreeSet::new();
    for i in 0..10_000u64 {
        let event = random_event(&mut rng);
        sim.step(i, &ScriptedEvent::Dispatch(event), None)
            .map_err(|e| format!("event {i}: {e}"))?;
        let state = sim.context().state();
        ensure(AssistantState::ALL.contains(&state), || {
            format!("undeclared state {state:?}")
        })?;
        visited.insert(state);
    }
    let report = sim.report();
    ensure(report.passed(), || {
        format!("invariants broken: {:?}", report.violations)
    })?;
    ensure(visited.len() == 4, || {
        format!("fuzz only reached {visited:?}")
    })?;
    let took = within(Duration::from_secs(5), started)?;
    Ok(format!(
        "0 table violations, 10000 events, all 4 states visited, {took:.2?}"
    ))
}

fn interrupt_report() -> Check {
    let dir = fixtures().join("scenarios");
    let scenario = Scenario::load(dir.join("interrupt.scn")).map_err(|e| e.to_string())?;
    let expected =
        std::fs::read_to_string(dir.join("interrupt.report")).map_err(|e| e.to_string())?;
    let report = kasper_cli::simulate(&dir.join("interrupt.scn"), &kasper_cli::default_brain())
        .map_err(|e| e.to_string())?;
    ensure(report.count_media("PauseMedia") == 1, || {
        "PauseMedia count != 1".into()
    })?;
    ensure(report.count_media("ResumeMedia") == 1, || {
        "ResumeMedia count != 1".into()
    })?;
    ensure(report.final_track.as_deref() == Some("song-1"), || {
        format!("resumed {:?}", report.final_track)
    })?;
    ensure(report.final_state == AssistantState::Idle, || {
        format!("ended in {}", report.final_state)
    })?;
    ensure(report.interrupt_depth == 0, || {
        "interrupt stack not empty".into()
    })?;
    ensure(report.to_text() == expected, || {
        format!("report differs from fixture:\n{}", report.to_text())
    })?;
    ensure(scenario.entries.len() == 9, || {
        "unexpected scenario length".into()
    })?;
    Ok("1 pause, 1 resume of song-1, Idle, depth 0, report matches fixture".into())
}

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

fn levenshtein_oracle() -> Check {
    let started = Instant::now();
    let strings: Vec<String> = (0..=7u32)
        .flat_map(|len| {
            (0..1u32 << len).map(move |bits| {
                (0..len)
                    .map(|i| if bits >> i & 1 == 1 { 'b' } else { 'a' })
                    .collect()
            })
        })
        .collect();
    let mut mismatches = 0usize;
    for a in &strings {
        for b in &strings {
            if levenshtein(a, b) != lev_recursive(a.as_bytes(), b.as_bytes()) {
                mismatches += 1;
            }
        }
    }
    let pairs = strings.len() * strings.len();
    ensure(mismatches == 0, || {
        format!("{mismatches} mismatches in {pairs} pairs")
    })?;
    let took = within(Duration::from_secs(30), started)?;
    Ok(format!("{pairs} pairs, 0 mismatches, {took:.2?}"))
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

/// Worst relative error over every parameter of the summed batch loss.
fn worst_gradient_error<M: Clone>(
    model: &M,
    batch: &[(Vec<f64>, usize)],
    nudge_param: impl Fn(&mut M, usize, f64),
    loss: impl Fn(&M, &[f64], usize) -> f64,
    analytic: Vec<f64>,
) -> (usize, f64) {
    let h = 1e-4;
    let total = |m: &M| batch.iter().map(|(s, t)| loss(m, s, *t)).sum::<f64>();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let (mut up, mut down) = (model.clone(), model.clone());
        nudge_param(&mut up, i, h);
        nudge_param(&mut down, i, -h);
        let numeric = (total(&up) - total(&down)) / (2.0 * h);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
    }
    (analytic.len(), worst)
}

fn gradient_checks() -> Check {
    let started = Instant::now();
    let words = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"];
    let table = EmbeddingTable::random_with_bound(words, 4, 1.0, 42);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let batch: Vec<(Vec<f64>, usize)> = (1..=5)
        .map(|len| {
            let tokens: Vec<&str> = (0..len).map(|_| *words.choose(&mut rng).unwrap()).collect();
            (table.sequence(&tokens), rng.random_range(0..NUM_CLASSES))
        })
        .collect();

    let cnn = CnnModel::init(4, 2, &mut rng);
    let mut g = cnn.zeros_like();
    for (s, t) in &batch {
        cnn.loss_and_grad(s, *t, &mut g);
    }
    let (cnn_n, cnn_err) = worst_gradient_error(
        &cnn,
        &batch,
        |m, i, d| nudge(m.params_mut(), i, d),
        |m, s, t| m.loss(s, t),
        flat(g.params()),
    );

    let rnn = RnnModel::init(4, 3, &mut rng);
    let mut g = rnn.zeros_like();
    for (s, t) in &batch {
        rnn.loss_and_grad(s, *t, &mut g);
    }
    let (rnn_n, rnn_err) = worst_gradient_error(
        &rnn,
        &batch,
        |m, i, d| nudge(m.params_mut(), i, d),
        |m, s, t| m.loss(s, t),
        flat(g.params()),
    );

    ensure(cnn_err <= 1e-4, || {
        format!("CNN worst relative error {cnn_err:e}")
    })?;
    ensure(rnn_err <= 1e-4, || {
        format!("RNN worst relative error {rnn_err:e}")
    })?;
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!(
        "CNN {cnn_n} params max rel err {cnn_err:.1e}, RNN {rnn_n} params max rel err {rnn_err:.1e}, {took:.2?}"
    ))
}

fn trained_bundle(data: &Dataset) -> Result<(ModelBundle, Duration), String> {
    let table = EmbeddingTable::load(fixtures().join("embeddings/mini-50d.txt"))
        .map_err(|e| e.to_string())?;
    let started = Instant::now();
    let bundle = ModelBundle::train(
        data,
        &[ModelKind::Cnn, ModelKind::Rnn],
        TrainConfig::default(),
        Some(table),
    )
    .map_err(|e| e.to_string())?;
    Ok((bundle, started.elapsed()))
}

fn classifier_comparison(data: &Dataset, bundle: &ModelBundle) -> Check {
    let started = Instant::now();
    let rows = compare_algorithms(bundle, data, true).map_err(|e| e.to_string())?;
    let table = format_comparison(&rows);
    for line in table.lines() {
        println!("    {line}");
    }
    let accuracy = |a: Algorithm| rows.iter().find(|r| r.algorithm == a).map(|r| r.accuracy);
    let (cnn, fuzzy) = (
        accuracy(Algorithm::Cnn).ok_or("no CNN row")?,
        accuracy(Algorithm::Fuzzy).ok_or("no fuzzy row")?,
    );
    ensure(rows.len() == 4, || "expected four algorithms".into())?;
    ensure(cnn >= 0.75, || format!("CNN accuracy {cnn:.4} < 0.75"))?;
    ensure(cnn > fuzzy, || {
        format!("CNN {cnn:.4} does not beat fuzzy {fuzzy:.4}")
    })?;
    let took = within(Duration::from_secs(300), started)?;
    Ok(format!(
        "CNN {cnn:.4} >= 0.75 and > fuzzy {fuzzy:.4}, retrain+eval {took:.2?}"
    ))
}

fn brute_force_best(rows: &[Vec<(Symbol, f64)>], lm: &BigramLM, lm_weight: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let n = rows.len() as u32;
    for code in 0..4usize.pow(n) {
        let mut c = code;
        let mut score = 0.0;
        let mut text: Vec<Symbol> = Vec::new();
        let mut last = None;
        for row in rows {
            let (s, p) = row[c % 4];
            c /= 4;
            score += p.ln();
            if last != Some(s) && !s.is_blank() {
                if let Some(&prev) = text.last() {
                    score += lm_weight * (lm.prob(prev, s) * LM_SYMBOLS as f64).ln();
                }
                text.push(s);
            }
            last = Some(s);
        }
        best = best.max(score);
    }
    best
}

fn decoder() -> Check {
    let sym = |c| Symbol::from_char(c).unwrap();
    let mut rows: Vec<Vec<(Symbol, f64)>> = "MUM".chars().map(|c| vec![(sym(c), 1.0)]).collect();
    rows.push(vec![(sym('B'), 0.5), (sym('Z'), 0.5)]);
    let mumbai = train_bigram_lm(&["MUMBAI"]).map_err(|e| e.to_string())?;
    let scores = LetterScores::from_sparse(&rows).map_err(|e| e.to_string())?;
    let out = decode_beam(&scores, &mumbai, 2, 1.0).map_err(|e| e.to_string())?;
    ensure(out.text == "MUMB", || format!("decoded {:?}", out.text))?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let letters: Vec<char> = ('A'..='Z').collect();
    let mut instances = 0;
    for frames in 1..=5 {
        for _ in 0..400 {
            let mut symbols: Vec<usize> = (0..ALPHABET_SIZE).collect();
            let (picked, _) = symbols.partial_shuffle(&mut rng, 4);
            let picked = picked.to_vec();
            let rows: Vec<Vec<(Symbol, f64)>> = (0..frames)
                .map(|_| {
                    let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    picked
                        .iter()
                        .zip(&w)
                        .map(|(&i, x)| (Symbol::new(i).unwrap(), x / total))
                        .collect()
                })
                .collect();
            let words: Vec<String> = (0..rng.random_range(0..4))
                .map(|_| {
                    (0..rng.random_range(1..7))
                        .map(|_| *letters.choose(&mut rng).unwrap())
                        .collect()
                })
                .collect();
            let lm = train_bigram_lm(&words).map_err(|e| e.to_string())?;
            let lm_weight = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
            let scores = LetterScores::from_sparse(&rows).map_err(|e| e.to_string())?;
            let beam =
                decode_beam(&scores, &lm, 4usize.pow(5), lm_weight).map_err(|e| e.to_string())?;
            let best = brute_force_best(&rows, &lm, lm_weight);
            ensure((beam.score - best).abs() < 1e-9, || {
                format!(
                    "instance {instances}: beam {} vs exhaustive {best}",
                    beam.score
                )
            })?;
            instances += 1;
        }
    }
    Ok(format!(
        "MUMB decoded over MUMZ; exhaustive beam equals brute force on {instances} instances"
    ))
}

fn framing() -> Check {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(1u32..192_000, 1usize..50_000), |(rate, len)| {
            let window = (rate as f64 * 0.020).floor() as usize;
            proptest::prop_assert_eq!(frame_window(rate), window);
            let sig = AudioSignal::new(rate, vec![0.0; len]).unwrap();
            match frame_signal(&sig) {
                Ok(frames) => {
                    proptest::prop_assert_eq!(frames.len(), len / window);
                    let discarded = len - frames.len() * window;
                    proptest::prop_assert!(discarded < window);
                    proptest::prop_assert_eq!(frames.len() * window + discarded, len);
                }
                Err(_) => proptest::prop_assert_eq!(window, 0),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("10000 random (rate, length) cases: count, window and conservation exact".into())
}

fn service_parity(data: &Dataset, bundle: &ModelBundle) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ckpt = dir.path().join("model.json");
    bundle.save(&ckpt).map_err(|e| e.to_string())?;
    let served = ModelBundle::load(&ckpt).map_err(|e| e.to_string())?;
    let local = ModelBundle::load(&ckpt).map_err(|e| e.to_string())?;
    let server = BackgroundServer::start(
        "127.0.0.1:0",
        BrainHandle::loaded(Brain::new(served, SkillRegistry::default())),
    )
    .map_err(|e| e.to_string())?;
    let client = HttpBrain::new(server.url(), None).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut compared = 0;
    for _ in 0..100 {
        let text = &data.examples().choose(&mut rng).unwrap().text;
        for algo in Algorithm::ALL {
            let remote = client
                .query_with(text, Some(algo))
                .map_err(|e| e.to_string())?;
            let p = local.classify(algo, text).map_err(|e| e.to_string())?;
            ensure(remote.intent == p.argmax, || {
                format!("{algo} {text:?}: intent differs")
            })?;
            ensure(
                remote.confidence.to_bits() == p.confidence.to_bits(),
                || format!("{algo} {text:?}: {} vs {}", remote.confidence, p.confidence),
            )?;
            compared += 1;
        }
    }
    Ok(format!(
        "100 utterances x 4 algorithms: {compared} responses bit-equal over HTTP"
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = fixtures().join("corpus/default.tsv");
    let embeddings = fixtures().join("embeddings/mini-50d.txt");
    let train = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        kasper_cli::train(&TrainOptions {
            data: corpus.clone(),
            algo: AlgoChoice::Both,
            config: TrainConfig::default(),
            embeddings: Some(embeddings.clone()),
            out: out.clone(),
        })
        .map_err(|e| e.to_string())?;
        std::fs::read(out).map_err(|e| e.to_string())
    };
    let (a, b) = (train("a.json")?, train("b.json")?);
    ensure(a == b, || "checkpoints differ".into())?;

    let ckpt = dir.path().join("a.json");
    let brain = Brain::new(
        ModelBundle::load(&ckpt).map_err(|e| e.to_string())?,
        SkillRegistry::default(),
    );
    let mut reports = 0;
    for name in ["interrupt", "audio", "error"] {
        let scenario = Scenario::load(fixtures().join(format!("scenarios/{name}.scn")))
            .map_err(|e| e.to_string())?;
        let run =
            || run_scenario(&scenario, AssistantContext::new(), Some(&brain)).map(|r| r.to_text());
        let (x, y) = (
            run().map_err(|e| e.to_string())?,
            run().map_err(|e| e.to_string())?,
        );
        ensure(x == y, || format!("{name}: reports differ"))?;
        reports += 1;
    }
    Ok(format!("two trainings give identical {} byte checkpoints; {reports} scenarios replay byte-identically", a.len()))
}

fn report(number: usize, title: &str, check: impl FnOnce() -> Check) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| (*s).to_owned()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {number} [{title}]: PASS ({detail})");
            true
        }
        Err(detail) => {
            println!("criterion {number} [{title}]: FAIL ({detail})");
            false
        }
    }
}

fn main() -> ExitCode {
    let corpus = generate_corpus(&CorpusSpec::default()).expect("default corpus");
    let trained = trained_bundle(&corpus);
    let with_bundle = |f: fn(&Dataset, &ModelBundle) -> Check| {
        let trained = &trained;
        let corpus = &corpus;
        move || match trained {
            Ok((bundle, _)) => f(corpus, bundle),
            Err(e) => Err(format!("training failed: {e}")),
        }
    };
    if let Ok((_, took)) = &trained {
        println!("trained CNN and RNN on the bundled corpus in {took:.2?}");
    }
    let results = [
        report(1, "FSM soundness", fsm_soundness),
        report(2, "interrupt semantics", interrupt_report),
        report(3, "Levenshtein oracle", levenshtein_oracle),
        report(4, "gradient checks", gradient_checks),
        report(
            5,
            "classifier comparison",
            with_bundle(classifier_comparison),
        ),
        report(6, "decoder", decoder),
        report(7, "framing arithmetic", framing),
        report(8, "service/library parity", with_bundle(service_parity)),
        report(9, "determinism", determinism),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
