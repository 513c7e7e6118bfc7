use dstkit::exec::Parallelism;
use dstkit::model::data::Example;
use dstkit::model::decode::{forward, greedy_decode_ids};
use dstkit::model::ops::softmax_in_place;
use dstkit::model::{encode_batch, train, Checkpoint, Model, ModelConfig, TrainConfig, Truncate, Vocabulary};
use dstkit::linearize::Token;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn micro() -> ModelConfig {
    ModelConfig {
        encoder_layers: 1,
        decoder_layers: 1,
        model_dim: 8,
        ff_dim: 8,
        n_heads: 2,
        ..ModelConfig::default()
    }
}

fn words(n: usize) -> Vocabulary {
    Vocabulary::from_words((0..n).map(|i| format!("w{i}"))).unwrap()
}

/// Largest relative error over `n` random parameters, by central differences.
pub fn grad_check(seed: u64, n: usize) -> (usize, f64) {
    let model = Model::<f64>::init(&micro(), 12, seed).unwrap();
    let src = [4, 10, 11, 5, 3, 10];
    let dec_in = [1, 6, 10, 7, 11, 8];
    let labels = [6, 10, 7, 11, 8, 2];
    let (_, grad) = model.loss_and_grad(&src, &dec_in, &labels, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..n {
        let i = rng.random_range(0..model.params().len());
        let mut m = model.clone();
        m.params_mut()[i] += h;
        let up = m.loss(&src, &dec_in, &labels).unwrap().total;
        m.params_mut()[i] -= 2.0 * h;
        let down = m.loss(&src, &dec_in, &labels).unwrap().total;
        let numeric = (up - down) / (2.0 * h);
        let denom = grad[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad[i] - numeric).abs() / denom);
        checked += 1;
    }
    (checked, worst)
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let (checked, worst) = grad_check(11, 150);
    assert_eq!(checked, 150);
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn softmax_rows_are_normalized() {
    let model = Model::<f32>::init(&ModelConfig::default(), 30, 2).unwrap();
    let logits = model.logits(&[10, 11, 12, 4], &[1, 20, 21]).unwrap();
    for row in logits.chunks(30) {
        let mut p = row.to_vec();
        softmax_in_place(&mut p);
        let s: f64 = p.iter().map(|&v| v as f64).sum();
        assert!((s - 1.0).abs() <= 1e-6, "{s}");
    }
}

#[test]
fn decoder_is_causal() {
    let model = Model::<f64>::init(&micro(), 12, 4).unwrap();
    let a = model.logits(&[10, 11], &[1, 6, 10, 7]).unwrap();
    let b = model.logits(&[10, 11], &[1, 6, 11, 9]).unwrap();
    assert_eq!(a[..2 * 12], b[..2 * 12]);
    assert_ne!(a[2 * 12..], b[2 * 12..]);
}

#[test]
fn batch_permutation_permutes_outputs() {
    let v = words(5);
    let model = Model::<f32>::init(&micro(), v.len(), 9).unwrap();
    let srcs: Vec<Vec<Token>> = vec![
        vec![Token::word("w0"), Token::word("w1"), Token::word("w2")],
        vec![Token::word("w3")],
        vec![Token::word("w4"), Token::word("w0")],
    ];
    let tgts: Vec<Vec<Token>> = vec![
        vec![Token::word("w1")],
        vec![Token::word("w2"), Token::word("w3")],
        vec![Token::word("w0"), Token::word("w0"), Token::word("w4")],
    ];
    let refs = |xs: &[Vec<Token>], order: &[usize]| -> Vec<Vec<Token>> { order.iter().map(|&i| xs[i].clone()).collect() };
    let run = |order: &[usize]| {
        let s = refs(&srcs, order);
        let t = refs(&tgts, order);
        let s: Vec<&[Token]> = s.iter().map(Vec::as_slice).collect();
        let t: Vec<&[Token]> = t.iter().map(Vec::as_slice).collect();
        let sb = encode_batch(&s, &v, 512, Truncate::Front).unwrap();
        let tb = encode_batch(&t, &v, 256, Truncate::Back).unwrap();
        (forward(&model, &sb, &tb).unwrap(), tb.lengths())
    };
    let (a, la) = run(&[0, 1, 2]);
    let (b, _) = run(&[2, 0, 1]);
    let vs = v.len();
    for (pos_in_b, orig) in [(0usize, 2usize), (1, 0), (2, 1)] {
        let n = la[orig] * vs;
        assert_eq!(a[orig][..n], b[pos_in_b][..n]);
    }
}

#[test]
fn forward_rejects_mismatched_batches() {
    let v = words(2);
    let model = Model::<f32>::init(&micro(), v.len(), 1).unwrap();
    let one = [Token::word("w0")];
    let sb = encode_batch(&[&one, &one], &v, 512, Truncate::Front).unwrap();
    let tb = encode_batch(&[&one], &v, 256, Truncate::Back).unwrap();
    assert!(forward(&model, &sb, &tb).is_err());
}

fn copy_task(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(2..6);
            let s: Vec<u32> = (0..len).map(|_| rng.random_range(10..20)).collect();
            Example::from_ids(s.clone(), s)
        })
        .collect()
}

#[test]
fn training_is_deterministic_and_parallelism_independent() {
    let v = words(10);
    let data = copy_task(12, 3);
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        epochs: 2,
        batch_size: 4,
        seed: 5,
        ..TrainConfig::default()
    };
    let a = train(&data, &data[..3], &v, &micro(), &cfg, None, |_| {}).unwrap();
    let b = train(&data, &data[..3], &v, &micro(), &cfg, None, |_| {}).unwrap();
    let seq = TrainConfig {
        parallelism: Parallelism::Sequential,
        ..cfg.clone()
    };
    let c = train(&data, &data[..3], &v, &micro(), &seq, None, |_| {}).unwrap();
    assert_eq!(a.checkpoint.model.params(), b.checkpoint.model.params());
    assert_eq!(a.checkpoint.model.params(), c.checkpoint.model.params());
    assert_eq!(a.log.len(), 2);
}

#[test]
fn empty_splits_are_rejected() {
    let v = words(10);
    let data = copy_task(2, 1);
    assert!(train(&data, &[], &v, &micro(), &TrainConfig::default(), None, |_| {}).is_err());
    assert!(train(&[], &data, &v, &micro(), &TrainConfig::default(), None, |_| {}).is_err());
}

#[test]
fn memorizes_one_pair_and_survives_checkpoint_round_trip() {
    let v = words(10);
    let data = vec![Example::from_ids(vec![10, 11, 12], vec![6, 13, 7, 14, 8, 15])];
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        epochs: 60,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let out = train(&data, &data, &v, &micro(), &cfg, None, |_| {}).unwrap();
    let first = out.log.first().unwrap().train_loss;
    let last = out.log.last().unwrap().train_loss;
    assert!(last < first * 0.1, "{first} -> {last}");
    let decoded = greedy_decode_ids(&out.checkpoint.model, &data[0].source).unwrap();
    assert_eq!(decoded, data[0].target);
    assert_eq!(greedy_decode_ids(&out.checkpoint.model, &data[0].source).unwrap(), decoded);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    out.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(greedy_decode_ids(&loaded.model, &data[0].source).unwrap(), decoded);
}

#[test]
fn decode_output_is_bounded() {
    let model = Model::<f32>::init(&micro(), 12, 0).unwrap();
    let out = greedy_decode_ids(&model, &[10, 11]).unwrap();
    assert!(out.len() <= 256);
}
