use approx::assert_abs_diff_eq;
use hssc::autodiff::{softmax, Graph};
use hssc::data::{Batch, EncodedExample, EOS};
use hssc::gradcheck::{batch_loss, toy_examples, toy_model};
use hssc::model::attention::{AttentionView, ViewKind};
use hssc::model::classifier::{max_over, sentiment_context, ClassifierHead};
use hssc::model::decoder::{greedy_decode, teacher_forced_decode};
use hssc::model::encoder::{encode, ContextMemory};
use hssc::model::{Model, ModelConfig, Variant};
use hssc::tensor::{Gradients, ParamStore, Tensor};
use hssc::train::trainer::accumulate_batch;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        vocab_size: 30,
        embed_dim: 6,
        hidden_dim: 5,
        classifier_hidden: 7,
        num_classes: 5,
    }
}

fn zero_params(model: &mut Model, prefix: &str) {
    for id in model.params.ids().collect::<Vec<_>>() {
        if model.params.name(id).starts_with(prefix) {
            model.params.get_mut(id).data_mut().fill(0.0);
        }
    }
}

fn memory_values(model: &Model, source: &[usize]) -> Vec<Vec<f64>> {
    let mut g = Graph::new(&model.params);
    let m = encode(model, &mut g, source, None).unwrap();
    m.states.iter().map(|&s| g.value(s).data().to_vec()).collect()
}

#[test]
fn single_token_memory_sums_both_directions() {
    let model = Model::new(config(Variant::Hssc), 3);
    let mut g = Graph::new(&model.params);
    let m = encode(&model, &mut g, &[7], None).unwrap();
    assert_eq!(m.len(), 1);
    let f = g.value(m.forward[0]).data();
    let b = g.value(m.backward[0]).data();
    for ((h, x), y) in g.value(m.states[0]).data().iter().zip(f).zip(b) {
        assert_eq!(*h, x + y);
    }
}

#[test]
fn zeroed_backward_direction_leaves_forward_states() {
    let mut model = Model::new(config(Variant::Hssc), 3);
    zero_params(&mut model, "encoder.backward.");
    let mut g = Graph::new(&model.params);
    let m = encode(&model, &mut g, &[4, 9, 12, 5], None).unwrap();
    for (s, f) in m.states.iter().zip(&m.forward) {
        assert_eq!(g.value(*s).data(), g.value(*f).data());
    }
}

#[test]
fn shared_direction_weights_make_reversal_mirror_memory() {
    let mut model = Model::new(config(Variant::Hssc), 5);
    for part in ["w_ih", "w_hh", "bias"] {
        let src = model.params.find(&format!("encoder.forward.{part}")).unwrap();
        let dst = model.params.find(&format!("encoder.backward.{part}")).unwrap();
        *model.params.get_mut(dst) = model.params.get(src).clone();
    }
    let source = [4, 9, 12, 5, 20];
    let reversed: Vec<usize> = source.iter().rev().copied().collect();
    let a = memory_values(&model, &source);
    let b = memory_values(&model, &reversed);
    for t in 0..source.len() {
        for (x, y) in a[t].iter().zip(&b[source.len() - 1 - t]) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }
}

#[test]
fn encoding_is_deterministic_per_seed() {
    let a = Model::new(config(Variant::Hssc), 11);
    let b = Model::new(config(Variant::Hssc), 11);
    let c = Model::new(config(Variant::Hssc), 12);
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);
    assert_eq!(memory_values(&a, &[4, 5, 6]), memory_values(&b, &[4, 5, 6]));
}

proptest! {
    #[test]
    fn memory_entries_lie_strictly_within_two(seed in 0u64..1000, ids in prop::collection::vec(0usize..30, 1..12)) {
        let model = Model::new(config(Variant::Hssc), seed);
        for state in memory_values(&model, &ids) {
            for v in state {
                prop_assert!(v.abs() < 2.0);
            }
        }
    }
}

fn view_store(w: Tensor) -> (ParamStore, AttentionView) {
    let mut store = ParamStore::new();
    let id = store.add("w", w);
    (
        store,
        AttentionView {
            w: id,
            kind: ViewKind::Summary,
        },
    )
}

#[test]
fn attention_hand_case() {
    let (store, view) = view_store(Tensor::from_rows(&[&[1.0]]).unwrap());
    let mut g = Graph::new(&store);
    let h = vec![g.constant(Tensor::vector(vec![1.0])), g.constant(Tensor::vector(vec![-1.0]))];
    let memory = ContextMemory::from_states(&mut g, h).unwrap();
    let s = g.constant(Tensor::vector(vec![1.0]));
    let a = view.attend(&mut g, s, &memory).unwrap();
    let t = 1f64.tanh();
    let w0 = t.exp() / (t.exp() + (-t).exp());
    let w = g.value(a.weights).data();
    assert_abs_diff_eq!(w[0], w0, epsilon = 1e-12);
    assert_abs_diff_eq!(w[1], 1.0 - w0, epsilon = 1e-12);
    assert_abs_diff_eq!(w[0], 0.8210, epsilon = 1e-4);
    assert_abs_diff_eq!(g.value(a.context).item(), 2.0 * w0 - 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(g.value(a.context).item(), 0.6420, epsilon = 1e-4);
}

#[test]
fn zero_bilinear_matrix_gives_uniform_weights() {
    let (store, view) = view_store(Tensor::zeros(&[3, 3]));
    let mut g = Graph::new(&store);
    let h: Vec<_> = (0..7)
        .map(|i| g.constant(Tensor::vector(vec![i as f64, -1.0, 0.5 * i as f64])))
        .collect();
    let memory = ContextMemory::from_states(&mut g, h).unwrap();
    let s = g.constant(Tensor::vector(vec![0.3, -2.0, 1.0]));
    let a = view.attend(&mut g, s, &memory).unwrap();
    for &w in g.value(a.weights).data() {
        assert_eq!(w, 1.0 / 7.0);
    }
}

#[test]
fn single_state_memory_gets_all_the_weight() {
    let (store, view) = view_store(Tensor::from_rows(&[&[0.5, -1.0], &[2.0, 0.1]]).unwrap());
    let mut g = Graph::new(&store);
    let h = vec![g.constant(Tensor::vector(vec![0.25, -0.75]))];
    let memory = ContextMemory::from_states(&mut g, h).unwrap();
    let s = g.constant(Tensor::vector(vec![1.0, 1.0]));
    let a = view.attend(&mut g, s, &memory).unwrap();
    assert_eq!(g.value(a.weights).data(), &[1.0]);
    assert_eq!(g.value(a.context).data(), &[0.25, -0.75]);
}

#[test]
fn empty_memory_is_rejected() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    assert!(ContextMemory::from_states(&mut g, vec![]).is_err());
}

fn step_logits(model: &Model, source: &[usize], gold: &[usize]) -> Vec<Vec<f64>> {
    let mut g = Graph::new(&model.params);
    let m = encode(model, &mut g, source, None).unwrap();
    let tf = teacher_forced_decode(model, &mut g, &m, gold, None).unwrap();
    tf.logits().iter().map(|&l| g.value(l).data().to_vec()).collect()
}

#[test]
fn sentiment_view_does_not_touch_word_prediction() {
    let mut model = Model::new(config(Variant::Hssc), 2);
    let before = step_logits(&model, &[4, 8, 15, 16], &[23, 9]);
    let w = model.params.find("attention.sentiment.w").unwrap();
    model.params.get_mut(w).data_mut().iter_mut().for_each(|v| *v += 0.7);
    assert_eq!(before, step_logits(&model, &[4, 8, 15, 16], &[23, 9]));

    let shell = Model {
        config: model.config,
        params: ParamStore::new(),
        ids: model.ids.clone(),
    };
    let ex = [EncodedExample {
        source: vec![4, 8, 15, 16],
        summary: vec![23, 9],
        label: 2,
    }];
    let mut g = Graph::new(&model.params);
    let terms = batch_loss(&shell, &mut g, &ex, 0.5).unwrap();
    let mut grads = Gradients::zeros_like(&model.params);
    g.backward(terms.summary, &mut grads).unwrap();
    assert!(grads.get(w).data().iter().all(|&v| v == 0.0));
}

#[test]
fn teacher_forcing_runs_one_step_per_target() {
    let model = Model::new(config(Variant::Hssc), 2);
    let mut g = Graph::new(&model.params);
    let m = encode(&model, &mut g, &[4, 5], None).unwrap();
    let tf = teacher_forced_decode(&model, &mut g, &m, &[6, 7, 8], None).unwrap();
    assert_eq!(tf.steps.len(), 4);
    assert_eq!(tf.targets, vec![6, 7, 8, EOS]);
    assert_eq!(tf.sentiment_vectors().len(), 4);
}

#[test]
fn eos_bias_gives_empty_summary() {
    let mut model = Model::new(config(Variant::Hssc), 4);
    let b = model.ids.generator_b;
    model.params.get_mut(b).data_mut()[EOS] = 100.0;
    let p = model.predict(&[4, 5, 6], 20).unwrap();
    assert!(p.tokens.is_empty());
    assert_eq!(p.summary_weights.len(), 1);
}

#[test]
fn greedy_respects_length_cap() {
    let mut model = Model::new(config(Variant::Hssc), 4);
    let b = model.ids.generator_b;
    model.params.get_mut(b).data_mut()[9] = 100.0;
    let p = model.predict(&[4, 5, 6], 6).unwrap();
    assert_eq!(p.tokens, vec![9; 6]);
    assert!(model.predict(&[4], 0).is_err());
}

#[test]
fn greedy_matches_teacher_forcing_on_its_own_output() {
    for seed in 0..20 {
        let model = Model::new(config(Variant::Hssc), seed);
        let source = [4, 12, 7, 19];
        let mut g = Graph::new(&model.params);
        let m = encode(&model, &mut g, &source, None).unwrap();
        let greedy = greedy_decode(&model, &mut g, &m, 8).unwrap();
        let ended = greedy.steps.len() == greedy.tokens.len() + 1;
        if !ended || greedy.tokens.is_empty() {
            continue;
        }
        let greedy_logits: Vec<Vec<f64>> = greedy.steps.iter().map(|s| g.value(s.logits).data().to_vec()).collect();
        assert_eq!(greedy_logits, step_logits(&model, &source, &greedy.tokens));
    }
}

fn head_store() -> (ParamStore, ClassifierHead) {
    let mut store = ParamStore::new();
    let head = ClassifierHead::register(&mut store, 2, 3, 5, &mut ChaCha8Rng::seed_from_u64(1));
    (store, head)
}

#[test]
fn highway_pooling_hand_case() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let v = [g.constant(Tensor::vector(vec![1.0, -1.0]))];
    let h = [g.constant(Tensor::vector(vec![0.0, 0.0])), g.constant(Tensor::vector(vec![-2.0, 3.0]))];
    let r = sentiment_context(&mut g, &v, &h).unwrap();
    assert_eq!(g.value(r).data(), &[1.0, 3.0]);
    assert!(sentiment_context(&mut g, &[], &h).is_err());
    assert!(sentiment_context(&mut g, &v, &[]).is_err());
}

#[test]
fn zero_weights_give_uniform_distribution() {
    let (mut store, head) = head_store();
    for id in store.ids().collect::<Vec<_>>() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    let mut g = Graph::new(&store);
    let r = g.constant(Tensor::vector(vec![0.4, -1.2]));
    let logits = head.logits(&mut g, r, None).unwrap();
    let p = softmax(g.value(logits).data());
    for &x in &p {
        assert_abs_diff_eq!(x, 0.2, epsilon = 1e-15);
    }
    assert_eq!(hssc::autodiff::argmax(&p), 0);
}

#[test]
fn output_bias_can_force_a_class() {
    let (mut store, head) = head_store();
    store.get_mut(head.b2).data_mut()[3] = 50.0;
    for r in [[0.0, 0.0], [1.5, -1.5], [-1.9, 1.9]] {
        let mut g = Graph::new(&store);
        let r = g.constant(Tensor::vector(r.to_vec()));
        let logits = head.logits(&mut g, r, None).unwrap();
        assert_eq!(hssc::autodiff::argmax(g.value(logits).data()), 3);
    }
}

proptest! {
    #[test]
    fn pooling_is_order_invariant_and_dominates_memory(
        vs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..5),
        hs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..6),
    ) {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let v: Vec<_> = vs.iter().map(|x| g.constant(Tensor::vector(x.clone()))).collect();
        let h: Vec<_> = hs.iter().map(|x| g.constant(Tensor::vector(x.clone()))).collect();
        let r = sentiment_context(&mut g, &v, &h).unwrap();
        let mut rv: Vec<_> = v.iter().rev().copied().collect();
        let n = rv.len();
        rv.rotate_left(1 % n);
        let hr: Vec<_> = h.iter().rev().copied().collect();
        let r2 = sentiment_context(&mut g, &rv, &hr).unwrap();
        prop_assert_eq!(g.value(r).data(), g.value(r2).data());
        let mem = max_over(&mut g, &h).unwrap();
        for (a, b) in g.value(r).data().iter().zip(g.value(mem).data()) {
            prop_assert!(a >= b);
        }
    }
}

#[test]
fn padding_does_not_change_loss_or_gradients() {
    let model = Model::new(config(Variant::Hssc), 9);
    let examples = toy_examples(3, 3, 30, 6, 3);
    let refs: Vec<&EncodedExample> = examples.iter().collect();
    let plain = Batch::new(&refs);
    let padded = Batch::new(&refs).with_extra_padding(4);
    let mut ga = Gradients::zeros_like(&model.params);
    let mut gb = Gradients::zeros_like(&model.params);
    let a = accumulate_batch(&model, &plain, 0.5, None, &mut ga).unwrap();
    let b = accumulate_batch(&model, &padded, 0.5, None, &mut gb).unwrap();
    assert_eq!(a, b);
    assert_eq!(ga, gb);
}

#[test]
fn parameter_counts_follow_the_variant_structure() {
    let count = |v| toy_model(v, 0).num_scalars();
    assert!(count(Variant::S2s) < count(Variant::S2sAtt));
    assert!(count(Variant::S2sAtt) < count(Variant::NoMultiview));
    assert!(count(Variant::NoMultiview) < count(Variant::Hssc));
    assert_eq!(count(Variant::NoHighway), count(Variant::Hssc));
    let names = |v| -> Vec<String> { toy_model(v, 0).params.entries().iter().map(|e| e.name.clone()).collect() };
    assert!(!names(Variant::S2sAtt).iter().any(|n| n.starts_with("classifier.") || n.contains("sentiment")));
    assert!(!names(Variant::S2s).iter().any(|n| n.starts_with("attention.")));
}

#[test]
fn copy_matching_transfers_shared_parameters() {
    let base = Model::new(config(Variant::S2sAtt), 1);
    let mut target = Model::new(config(Variant::NoMultiview), 2);
    let copied = target.copy_matching(&base);
    assert_eq!(copied, base.params.len());
    for e in base.params.entries() {
        assert_eq!(target.params.get(target.params.find(&e.name).unwrap()), &e.value);
    }
}
