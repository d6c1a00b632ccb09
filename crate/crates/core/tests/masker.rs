use dehate_core::masker::synthetic::{rectangles, to_batch};
use dehate_core::masker::{
    embed_span, film, gradient_check, init, load_checkpoint, predict, project_spans, save_checkpoint,
    train, LossKind, MaskerConfig, MaskerModel,
};
use dehate_core::numerics::Tensor;
use dehate_core::textproc::HateSpan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn span(words: &[&str]) -> HateSpan {
    HateSpan {
        start: 0,
        end: words.len(),
        words: words.iter().map(|w| w.to_string()).collect(),
    }
}

fn zeros_like(t: &Tensor) -> Tensor {
    Tensor::zeros(t.dims().to_vec()).unwrap()
}

fn random_embeddings(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..k).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn parameter_count_matches_layout() {
    let c = MaskerConfig::default();
    let (p2, d, b, s) = (c.patch_pixels(), c.embed_dim, c.encoder_blocks, c.span_embed_dim);
    let encoder = 3 * p2 * d + b * d * d;
    let projection = s * d;
    let decoder = b * (3 * d * d + 2 * d * d + 2 * d);
    let head = d * p2 + p2;
    let want = encoder + projection + decoder + head;
    assert_eq!(want, 15504);
    assert_eq!(init(&c).unwrap().param_count(), want);
}

#[test]
fn init_is_seeded() {
    let c = MaskerConfig::default();
    assert_eq!(init(&c).unwrap(), init(&c).unwrap());
    let other = MaskerConfig { seed: 43, ..c.clone() };
    assert_ne!(init(&c).unwrap(), init(&other).unwrap());
    for (_, t) in init(&c).unwrap().all_params() {
        assert!(t.data().iter().all(|v| (-0.1..0.1).contains(v)));
    }
}

#[test]
fn projection_of_repeated_span_equals_single() {
    let m = init(&MaskerConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = random_embeddings(&mut rng, 1, 32);
    let one = project_spans(&e, &m).unwrap();
    for k in 2..5 {
        let many = vec![e[0].clone(); k];
        let out = project_spans(&many, &m).unwrap();
        for (a, b) in one.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn projection_ignores_span_order() {
    let m = init(&MaskerConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let e = random_embeddings(&mut rng, 4, 32);
    let mut r = e.clone();
    r.reverse();
    let a = project_spans(&e, &m).unwrap();
    let b = project_spans(&r, &m).unwrap();
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn projection_is_matrix_times_mean() {
    let m = init(&MaskerConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = random_embeddings(&mut rng, 3, 32);
    let out = project_spans(&e, &m).unwrap();
    let (d, s) = (32, 32);
    for r in 0..d {
        let mut acc = 0.0f64;
        for c in 0..s {
            let mean = e.iter().map(|v| f64::from(v[c])).sum::<f64>() / 3.0;
            acc += f64::from(m.projection.data()[r * s + c]) * mean;
        }
        assert!((f64::from(out.data()[r]) - acc).abs() < 1e-6);
    }
    assert!(project_spans(&[], &m).is_err());
    assert!(project_spans(&[vec![0.0; 7]], &m).is_err());
}

fn zero_film(m: &mut MaskerModel, block: usize) {
    let f = &mut m.decoder[block].film;
    f.gamma_w = zeros_like(&f.gamma_w);
    f.gamma_b = zeros_like(&f.gamma_b);
    f.beta_w = zeros_like(&f.beta_w);
    f.beta_b = zeros_like(&f.beta_b);
}

#[test]
fn zeroed_generator_is_identity() {
    let mut m = init(&MaskerConfig::default()).unwrap();
    zero_film(&mut m, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor::matrix(5, 32, (0..160).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
    let c = Tensor::vector((0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    assert!(film(&x, &c, 1, &m).unwrap().bit_eq(&x));
}

#[test]
fn zero_gamma_yields_beta() {
    let mut m = init(&MaskerConfig::default()).unwrap();
    let f = &mut m.decoder[0].film;
    f.gamma_w = zeros_like(&f.gamma_w);
    f.gamma_b = Tensor::full(vec![32], -1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::matrix(3, 32, (0..96).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
    let c = Tensor::vector((0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let out = film(&x, &c, 0, &m).unwrap();
    let f = &m.decoder[0].film;
    for j in 0..32 {
        let beta: f64 = (0..32)
            .map(|k| f64::from(f.beta_w.data()[j * 32 + k]) * f64::from(c.data()[k]))
            .sum::<f64>()
            + f64::from(f.beta_b.data()[j]);
        for row in 0..3 {
            assert!((f64::from(out.data()[row * 32 + j]) - beta).abs() < 1e-6);
        }
    }
}

#[test]
fn film_matches_scalar_reference() {
    let c = MaskerConfig { embed_dim: 3, span_embed_dim: 3, ..MaskerConfig::default() };
    let m = init(&c).unwrap();
    let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0]).unwrap();
    let cond = Tensor::vector(vec![0.2, -0.7, 1.1]).unwrap();
    let out = film(&x, &cond, 1, &m).unwrap();
    let f = &m.decoder[1].film;
    let w = |t: &Tensor, i: usize| f64::from(t.data()[i]);
    for j in 0..3 {
        let mut gamma = 1.0 + w(&f.gamma_b, j);
        let mut beta = w(&f.beta_b, j);
        for k in 0..3 {
            gamma += w(&f.gamma_w, j * 3 + k) * w(&cond, k);
            beta += w(&f.beta_w, j * 3 + k) * w(&cond, k);
        }
        for r in 0..2 {
            let want = gamma * w(&x, r * 3 + j) + beta;
            assert!((f64::from(out.data()[r * 3 + j]) - want).abs() < 1e-6);
        }
    }
    assert!(film(&x, &cond, 2, &m).is_err());
}

#[test]
fn embedding_follows_hash_trace() {
    let dim = 32;
    let e = embed_span(&span(&["Vermin!", "go", "HOME"]), dim).unwrap();
    let mut want = vec![0.0f64; dim];
    for w in ["vermin", "go", "home"] {
        let d = Sha256::digest(w.as_bytes());
        let mut idx_bytes = [0u8; 8];
        idx_bytes.copy_from_slice(&d[..8]);
        let idx = (u64::from_le_bytes(idx_bytes) % dim as u64) as usize;
        want[idx] += if d[8] % 2 == 0 { 1.0 } else { -1.0 };
    }
    let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (a, b) in e.iter().zip(&want) {
        assert!((f64::from(*a) - b / norm).abs() < 1e-7);
    }
    assert!(embed_span(&span(&[]), dim).is_err());
}

#[test]
fn single_words_embed_to_signed_basis_vectors() {
    for w in ["pig", "vermin"] {
        let e = embed_span(&span(&[w]), 16).unwrap();
        let d = Sha256::digest(w.as_bytes());
        let idx = (u64::from_le_bytes(d[..8].try_into().unwrap()) % 16) as usize;
        let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
        for (i, v) in e.iter().enumerate() {
            assert_eq!(*v, if i == idx { sign } else { 0.0 });
        }
    }
}

#[test]
fn prediction_threshold_edges() {
    let c = MaskerConfig::default();
    let m = init(&c).unwrap();
    let inst = &rectangles(&c, 1, 8).unwrap()[0];
    let (mask, heat) = predict(&m, &inst.image, &inst.spans, 1.0).unwrap();
    assert!(mask.is_empty());
    assert!(heat.values().iter().all(|v| (0.0..1.0).contains(v)));
    assert!(predict(&m, &inst.image, &inst.spans, 0.0).is_err());
}

#[test]
fn zero_head_predicts_one_half() {
    let c = MaskerConfig::default();
    let mut m = init(&c).unwrap();
    m.head = zeros_like(&m.head);
    m.head_bias = zeros_like(&m.head_bias);
    let inst = &rectangles(&c, 1, 9).unwrap()[0];
    let (mask, heat) = predict(&m, &inst.image, &inst.spans, 0.4).unwrap();
    assert!(heat.values().iter().all(|&v| v == 0.5));
    assert_eq!(mask.count(), 32 * 32);
    let (mask, _) = predict(&m, &inst.image, &inst.spans, 0.6).unwrap();
    assert!(mask.is_empty());
}

#[test]
fn prediction_is_deterministic() {
    let c = MaskerConfig::default();
    let inst = &rectangles(&c, 1, 10).unwrap()[0];
    let a = predict(&init(&c).unwrap(), &inst.image, &inst.spans, 0.5).unwrap();
    let b = predict(&init(&c).unwrap(), &inst.image, &inst.spans, 0.5).unwrap();
    assert_eq!(a.0, b.0);
    assert!(a.1.tensor().bit_eq(b.1.tensor()));
}

#[test]
fn training_descends_and_keeps_encoder_frozen() {
    let c = MaskerConfig::default();
    let mut m = init(&c).unwrap();
    let before = m.encoder_checksum();
    let inst = rectangles(&c, 4, 5).unwrap();
    let batch = to_batch(&inst, c.span_embed_dim).unwrap();
    let log = train(&mut m, &[batch], 100, 0.01).unwrap();
    let first: f64 = log.losses[..20].iter().sum::<f64>() / 20.0;
    let last: f64 = log.losses[80..].iter().sum::<f64>() / 20.0;
    assert!(last < first, "{first} -> {last}");
    assert_eq!(m.encoder_checksum(), before);
}

#[test]
fn miniature_masker_gradients_check_out() {
    let c = MaskerConfig {
        image_size: 8,
        patch_size: 4,
        embed_dim: 4,
        encoder_blocks: 2,
        decoder_blocks: 2,
        span_embed_dim: 4,
        seed: 42,
    };
    for kind in [LossKind::Bce, LossKind::SoftIou] {
        let report = gradient_check(&c, kind).unwrap();
        assert!(report.passed(), "{kind:?}: {:e}", report.max_relative_error);
        assert!(report.checked > 100);
    }
}

#[test]
fn checkpoint_roundtrip() {
    let c = MaskerConfig::default();
    let m = init(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&m, dir.path()).unwrap();
    assert_eq!(load_checkpoint(dir.path()).unwrap(), m);
}
