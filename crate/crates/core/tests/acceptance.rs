//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hssc::autodiff::Graph;
use hssc::data::{encode_all, split, synthetic, EncodedExample, ReviewExample, Vocabulary};
use hssc::eval::report::evaluate_model;
use hssc::eval::rouge::{rouge_l, rouge_n};
use hssc::gradcheck::{batch_loss, check_model, toy_examples, toy_model};
use hssc::model::attention::{AttentionView, ViewKind};
use hssc::model::decoder::teacher_forced_decode;
use hssc::model::encoder::{encode, ContextMemory};
use hssc::model::{Model, ModelConfig, Variant};
use hssc::tensor::{Gradients, ParamStore, Precision, Tensor};
use hssc::train::checkpoint::{encode_params, load_checkpoint, save_checkpoint, MANIFEST_FILE, PARAMS_FILE};
use hssc::train::optim::{clip_gradients, global_norm, lr_schedule, Adam, AdamConfig};
use hssc::train::trainer::{train, Quiet, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn shell(model: &Model) -> Model {
    Model {
        config: model.config,
        params: ParamStore::new(),
        ids: model.ids.clone(),
    }
}

fn gradient_oracle() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for seed in 0..2 {
        let mut model = toy_model(Variant::Hssc, seed);
        let batch = toy_examples(seed, 2, 20, 5, 3);
        let report = check_model(&mut model, &batch, 0.5, 1e-5).map_err(|e| e.to_string())?;
        ensure!(report.non_finite.is_empty(), "non-finite loss at {:?}", report.non_finite);
        ensure!(
            report.max_rel_error < 1e-4,
            "max relative error {:.3e} at {:?}",
            report.max_rel_error,
            report.worst
        );
        worst = worst.max(report.max_rel_error);
        entries += report.entries_checked;
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    Ok(format!("max relative error {worst:.2e} over {entries} entries in {elapsed:.1?}"))
}

fn loss_decomposition() -> Outcome {
    let model = toy_model(Variant::Hssc, 0);
    let batch = toy_examples(0, 2, 20, 5, 3);
    let s = shell(&model);
    let mut g = Graph::new(&model.params);
    let t = batch_loss(&s, &mut g, &batch, 0.5).map_err(|e| e.to_string())?;
    let grad = |v| {
        let mut out = Gradients::zeros_like(&model.params);
        g.backward(v, &mut out).map(|_| out).map_err(|e| e.to_string())
    };
    let joint = grad(t.joint)?;
    let ls = grad(t.summary)?;
    let lc = grad(t.classification.ok_or("no classification loss")?)?;
    let mut worst: f64 = 0.0;
    for (id, j) in joint.iter() {
        for ((a, b), c) in j.data().iter().zip(ls.get(id).data()).zip(lc.get(id).data()) {
            worst = worst.max((a - (b + 0.5 * c)).abs());
        }
    }
    ensure!(worst <= 1e-10, "decomposition off by {worst:.3e}");
    let wg = model.ids.generator_w;
    ensure!(lc.get(wg).data().iter().all(|&v| v == 0.0), "generator weight has L_c gradient");
    let wt = model.ids.sentiment_view.ok_or("no sentiment view")?.w;
    ensure!(ls.get(wt).data().iter().all(|&v| v == 0.0), "sentiment view has L_s gradient");
    Ok(format!("max deviation {worst:.1e}; generator/L_c and sentiment-view/L_s gradients exactly zero"))
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn attention_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 8;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=50);
        let mut store = ParamStore::new();
        let views = [
            AttentionView {
                w: store.add("summary", random_tensor(&mut rng, &[d, d], 2.0)),
                kind: ViewKind::Summary,
            },
            AttentionView {
                w: store.add("sentiment", random_tensor(&mut rng, &[d, d], 2.0)),
                kind: ViewKind::Sentiment,
            },
        ];
        let states: Vec<Tensor> = (0..len).map(|_| random_tensor(&mut rng, &[d], 2.0)).collect();
        let s = random_tensor(&mut rng, &[d], 1.0);
        let mut g = Graph::new(&store);
        let h = states.into_iter().map(|t| g.constant(t)).collect();
        let memory = ContextMemory::from_states(&mut g, h).map_err(|e| e.to_string())?;
        let sv = g.constant(s);
        for view in views {
            let a = view.attend(&mut g, sv, &memory).map_err(|e| e.to_string())?;
            let w = g.value(a.weights).data();
            ensure!(w.len() == len, "{} weights for length {len}", w.len());
            ensure!(w.iter().all(|&x| x >= 0.0), "negative weight");
            worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-6, "weights sum off by {worst:.3e}");
    for len in 1..=50 {
        let mut store = ParamStore::new();
        let view = AttentionView {
            w: store.add("w", Tensor::zeros(&[d, d])),
            kind: ViewKind::Summary,
        };
        let mut g = Graph::new(&store);
        let h = (0..len).map(|_| g.constant(random_tensor(&mut rng, &[d], 2.0))).collect();
        let memory = ContextMemory::from_states(&mut g, h).map_err(|e| e.to_string())?;
        let s = g.constant(random_tensor(&mut rng, &[d], 1.0));
        let a = view.attend(&mut g, s, &memory).map_err(|e| e.to_string())?;
        let want = 1.0 / len as f64;
        ensure!(
            g.value(a.weights).data().iter().all(|&x| x == want),
            "zero matrix not uniform at length {len}"
        );
    }
    Ok(format!("2000 weight vectors, max |sum - 1| = {worst:.1e}; zero matrix exactly uniform for L = 1..50"))
}

/// All sequences over {0, 1, 2} of length at most `max`, shortest first,
/// indexed so that `index(seq)` is their position in the list.
struct Sequences {
    all: Vec<Vec<u8>>,
    offsets: Vec<usize>,
}

impl Sequences {
    fn new(max: usize) -> Self {
        let mut all = vec![vec![]];
        let mut offsets = vec![0];
        let mut prev = vec![vec![]];
        for _ in 1..=max {
            offsets.push(all.len());
            let next: Vec<Vec<u8>> = prev
                .iter()
                .flat_map(|s: &Vec<u8>| {
                    (0..3u8).map(move |t| {
                        let mut x = s.clone();
                        x.push(t);
                        x
                    })
                })
                .collect();
            all.extend(next.iter().cloned());
            prev = next;
        }
        Sequences { all, offsets }
    }

    fn index(&self, seq: &[u8]) -> usize {
        self.offsets[seq.len()] + seq.iter().fold(0, |acc, &t| acc * 3 + t as usize)
    }
}

/// Every subsequence obtained by deleting any subset of positions.
fn subsequences(seq: &[u8]) -> Vec<Vec<u8>> {
    (0u32..1 << seq.len())
        .map(|mask| {
            seq.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &t)| t)
                .collect()
        })
        .collect()
}

fn rouge_oracle() -> Outcome {
    let started = Instant::now();
    let seqs = Sequences::new(8);
    let n = seqs.all.len();
    let words = n.div_ceil(64);
    // contains[s] = bitset of sequences having s as a subsequence.
    let mut contains = vec![vec![0u64; words]; n];
    let subs: Vec<Vec<usize>> = seqs
        .all
        .iter()
        .map(|s| {
            let mut v: Vec<usize> = subsequences(s).iter().map(|x| seqs.index(x)).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    for (r, sub) in subs.iter().enumerate() {
        for &s in sub {
            contains[s][r / 64] |= 1 << (r % 64);
        }
    }
    let mut pairs = 0u64;
    for (ci, cand) in seqs.all.iter().enumerate() {
        // at_least[l] = references sharing a common subsequence of length l with cand.
        let mut at_least = vec![vec![0u64; words]; cand.len() + 1];
        for &s in &subs[ci] {
            let l = seqs.all[s].len();
            for (a, b) in at_least[l].iter_mut().zip(&contains[s]) {
                *a |= b;
            }
        }
        for (ri, reference) in seqs.all.iter().enumerate() {
            let lcs = (0..=cand.len())
                .rev()
                .find(|&l| at_least[l][ri / 64] & (1 << (ri % 64)) != 0)
                .unwrap_or(0);
            let got = rouge_l(cand, reference);
            let total = cand.len() + reference.len();
            let want_f1 = if lcs == 0 { 0.0 } else { 2.0 * lcs as f64 / total as f64 };
            let want_p = if cand.is_empty() { 0.0 } else { lcs as f64 / cand.len() as f64 };
            let want_r = if reference.is_empty() { 0.0 } else { lcs as f64 / reference.len() as f64 };
            ensure!(
                got.precision == want_p && got.recall == want_r && (got.f1 - want_f1).abs() <= 1e-12,
                "rouge_l({cand:?}, {reference:?}) = {got:?}, brute-force LCS {lcs}"
            );
            pairs += 1;
        }
    }

    fn tok(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }
    let cases: [(&str, &str, usize, f64, f64); 6] = [
        ("a b c", "a b d", 1, 2.0 / 3.0, 2.0 / 3.0),
        ("a b c", "a b d", 2, 0.5, 0.5),
        ("a a a", "a b", 1, 1.0 / 3.0, 0.5),
        ("the cat sat on the mat", "the cat is on the mat", 1, 5.0 / 6.0, 5.0 / 6.0),
        ("the cat sat on the mat", "the cat is on the mat", 2, 3.0 / 5.0, 3.0 / 5.0),
        ("", "a b", 1, 0.0, 0.0),
    ];
    for (c, r, order, p, rec) in cases {
        let got = rouge_n(&tok(c), &tok(r), order);
        let f1 = if p + rec == 0.0 { 0.0 } else { 2.0 * p * rec / (p + rec) };
        ensure!(
            (got.precision - p).abs() <= 1e-15 && (got.recall - rec).abs() <= 1e-15 && (got.f1 - f1).abs() <= 1e-15,
            "rouge_{order}({c:?}, {r:?}) = {got:?}"
        );
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    Ok(format!("{pairs} pairs agree with brute-force LCS; {} n-gram hand cases; {elapsed:.1?}", cases.len()))
}

fn synthetic_examples(seed: u64, n: usize) -> Vec<ReviewExample> {
    synthetic::generate(seed, n)
        .iter()
        .map(|r| ReviewExample::from_record(r).expect("generator emits valid records"))
        .collect()
}

fn model_config(variant: Variant, vocab: &Vocabulary, dim: usize) -> ModelConfig {
    ModelConfig {
        variant,
        vocab_size: vocab.len(),
        embed_dim: dim,
        hidden_dim: dim,
        classifier_hidden: dim,
        num_classes: 5,
    }
}

fn overfit() -> Outcome {
    let started = Instant::now();
    let examples = synthetic_examples(3, 32);
    let vocab = Vocabulary::build(&examples, 50_000).map_err(|e| e.to_string())?;
    let encoded = encode_all(&vocab, &examples);
    let mut model = Model::new(model_config(Variant::Hssc, &vocab, 32), 7);
    let cfg = TrainConfig {
        batch_size: 1,
        epochs: 300,
        schedule_threshold: None,
        adam: AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    train(&mut model, &encoded, &[], &cfg, &mut Quiet).map_err(|e| e.to_string())?;
    let loss = hssc::train::trainer::evaluate_loss(&model, &encoded, 0.5).map_err(|e| e.to_string())?;
    let report = evaluate_model(&model, &vocab, &examples, 20, "train").map_err(|e| e.to_string())?;
    let acc = report.accuracy_5class.unwrap_or(0.0);
    let elapsed = started.elapsed();
    let summary = format!(
        "joint loss {:.4}, accuracy {acc:.1}%, RG-1 {:.2} in {elapsed:.1?}",
        loss.joint, report.rouge_1
    );
    ensure!(loss.joint < 0.1, "{summary}");
    ensure!(acc == 100.0, "{summary}");
    ensure!(report.rouge_1 > 95.0, "{summary}");
    ensure!(elapsed < Duration::from_secs(600), "{summary}");
    Ok(summary)
}

fn joint_signal() -> Outcome {
    let started = Instant::now();
    let corpus = synthetic_examples(2024, 2000);
    let splits = split(corpus, 200).map_err(|e| e.to_string())?;
    let vocab = Vocabulary::build(&splits.train, 50_000).map_err(|e| e.to_string())?;
    let train_set: Vec<EncodedExample> = encode_all(&vocab, &splits.train);
    let validation = encode_all(&vocab, &splits.validation);
    let cfg = TrainConfig {
        batch_size: 8,
        epochs: 15,
        schedule_threshold: None,
        adam: AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let fit = |mut model: Model, cfg: &TrainConfig| -> Result<hssc::eval::report::MetricReport, String> {
        train(&mut model, &train_set, &validation, cfg, &mut Quiet).map_err(|e| e.to_string())?;
        evaluate_model(&model, &vocab, &splits.validation, 20, "validation").map_err(|e| e.to_string())
    };
    let trained = |variant| -> Result<Model, String> {
        let mut model = Model::new(model_config(variant, &vocab, 32), 5);
        train(&mut model, &train_set, &validation, &cfg, &mut Quiet).map_err(|e| e.to_string())?;
        Ok(model)
    };

    let hssc = fit(Model::new(model_config(Variant::Hssc, &vocab, 32), 5), &cfg)?;
    let summarizer = trained(Variant::S2sAtt)?;
    let mut control = Model::new(model_config(Variant::NoMultiview, &vocab, 32), 5);
    control.copy_matching(&summarizer);
    let frozen = TrainConfig {
        trainable_prefixes: Some(vec!["classifier.".into()]),
        ..cfg.clone()
    };
    let control = fit(control, &frozen)?;
    let plain = fit(Model::new(model_config(Variant::S2s, &vocab, 32), 5), &cfg)?;

    let mut counts = [0usize; 5];
    splits.validation.iter().for_each(|e| counts[e.class()] += 1);
    let majority = 100.0 * *counts.iter().max().unwrap() as f64 / splits.validation.len() as f64;
    let (acc, ctl) = (hssc.accuracy_5class.unwrap_or(0.0), control.accuracy_5class.unwrap_or(0.0));
    let elapsed = started.elapsed();
    let summary = format!(
        "accuracy hssc {acc:.1} vs frozen-classifier control {ctl:.1} (majority class {majority:.1}); RG-L hssc {:.2} vs s2s {:.2}; {elapsed:.0?}",
        hssc.rouge_l, plain.rouge_l
    );
    ensure!(acc >= ctl, "{summary}");
    ensure!(hssc.rouge_l >= plain.rouge_l, "{summary}");
    ensure!(elapsed < Duration::from_secs(1800), "{summary}");
    Ok(summary)
}

fn optimizer_exactness() -> Outcome {
    let alpha = 3e-4;
    ensure!(lr_schedule(10.0, alpha, 5.0) == alpha / 1024.0, "lr at 10.0 is {}", lr_schedule(10.0, alpha, 5.0));
    ensure!(lr_schedule(3.0, alpha, 5.0) == alpha, "lr at 3.0 is {}", lr_schedule(3.0, alpha, 5.0));

    let mut store = ParamStore::new();
    let id = store.add("x", Tensor::scalar(0.5));
    let mut grads = Gradients::zeros_like(&store);
    grads.get_mut(id).data_mut()[0] = 1.0;
    let mut adam = Adam::new(AdamConfig::default(), &store);
    adam.step(&mut store, &grads, alpha, &[true], Precision::F64)
        .map_err(|e| e.to_string())?;
    let moved = store.get(id).item() - 0.5;
    let want = -0.0003 / (1.0 + 1e-8);
    ensure!((moved - want).abs() <= 1e-12, "first Adam step moved {moved:e}, expected {want:e}");

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let mut store = ParamStore::new();
        let scale = if trial % 2 == 0 { 0.2 } else { 20.0 };
        store.add("a", random_tensor(&mut rng, &[4, 3], 1.0));
        store.add("b", random_tensor(&mut rng, &[5], 1.0));
        let mut grads = Gradients::zeros_like(&store);
        for pid in store.ids().collect::<Vec<_>>() {
            *grads.get_mut(pid) = random_tensor(&mut rng, store.get(pid).shape(), scale);
        }
        let mask = [true, true];
        let before = global_norm(&grads, &mask);
        clip_gradients(&mut grads, 10.0, &mask, &store).map_err(|e| e.to_string())?;
        let after = global_norm(&grads, &mask);
        worst = worst.max((after - before.min(10.0)).abs());
    }
    ensure!(worst <= 1e-6, "post-clip norm off by {worst:e}");
    Ok(format!(
        "lr(10.0) = α/1024, lr(3.0) = α, first Adam step {moved:.6e}, clip error {worst:.1e}"
    ))
}

fn ablation_structure() -> Outcome {
    let count = |v| toy_model(v, 0).num_scalars();
    let [s2s, att, nmv, full, nhw] = [
        Variant::S2s,
        Variant::S2sAtt,
        Variant::NoMultiview,
        Variant::Hssc,
        Variant::NoHighway,
    ]
    .map(count);
    ensure!(s2s < att && att < nmv && nmv < full, "counts {s2s} {att} {nmv} {full}");
    ensure!(nhw == full, "no_highway {nhw} != hssc {full}");

    let model = toy_model(Variant::NoMultiview, 1);
    let mut steps = 0;
    for ex in toy_examples(1, 5, 20, 6, 4) {
        let mut g = Graph::new(&model.params);
        let memory = encode(&model, &mut g, &ex.source, None).map_err(|e| e.to_string())?;
        let tf = teacher_forced_decode(&model, &mut g, &memory, &ex.summary, None).map_err(|e| e.to_string())?;
        for step in &tf.steps {
            let c = step.summary.ok_or("missing summary vector")?.context;
            let t = step.sentiment_vector().ok_or("missing sentiment vector")?;
            ensure!(g.value(c) == g.value(t), "views differ");
            steps += 1;
        }
    }
    Ok(format!(
        "s2s {s2s} < s2s_att {att} < no_multiview {nmv} < hssc {full} = no_highway {nhw}; shared view identical over {steps} steps"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let examples = synthetic_examples(11, 40);
    let vocab = Vocabulary::build(&examples, 50_000).map_err(|e| e.to_string())?;
    let encoded = encode_all(&vocab, &examples);
    let cfg = TrainConfig {
        batch_size: 8,
        epochs: 2,
        dropout: 0.2,
        seed: 42,
        ..TrainConfig::default()
    };
    let mut bytes = Vec::new();
    for run in 0..2 {
        let mut model = Model::new(model_config(Variant::Hssc, &vocab, 16), 42);
        train(&mut model, &encoded[8..], &encoded[..8], &cfg, &mut Quiet).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}"));
        save_checkpoint(&path, &model, Precision::F64).map_err(|e| e.to_string())?;
        bytes.push((
            std::fs::read(path.join(MANIFEST_FILE)).map_err(|e| e.to_string())?,
            std::fs::read(path.join(PARAMS_FILE)).map_err(|e| e.to_string())?,
        ));
    }
    ensure!(bytes[0] == bytes[1], "checkpoints of identical runs differ");

    let (loaded, precision) = load_checkpoint(&dir.path().join("run0")).map_err(|e| e.to_string())?;
    let again = dir.path().join("again");
    save_checkpoint(&again, &loaded, precision).map_err(|e| e.to_string())?;
    let resaved = (
        std::fs::read(again.join(MANIFEST_FILE)).map_err(|e| e.to_string())?,
        std::fs::read(again.join(PARAMS_FILE)).map_err(|e| e.to_string())?,
    );
    ensure!(resaved == bytes[0], "save -> load -> save changed the bytes");
    ensure!(encode_params(&loaded, Precision::F64) == bytes[0].1, "loaded parameters differ");
    Ok(format!("identical {}-byte checkpoints; save -> load -> save idempotent", bytes[0].1.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient oracle", gradient_oracle),
        ("loss decomposition", loss_decomposition),
        ("attention normalization", attention_normalization),
        ("ROUGE oracle", rouge_oracle),
        ("overfit run", overfit),
        ("joint-signal sanity", joint_signal),
        ("schedule and optimizer exactness", optimizer_exactness),
        ("ablation structure", ablation_structure),
        ("determinism and persistence", determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {n} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
