use std::sync::OnceLock;

use fedvit::ckks::*;
use fedvit::fed::{encrypt_tokens, ClassifierHead};
use fedvit::io::*;
use fedvit::vit::{synthetic_dataset, VitConfig, VitModel};
use fedvit::{Error, WireError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Fixture {
    ctx: CkksContext,
    keys: KeySet,
}

fn small() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ctx = CkksContext::new(CkksParams::small()).unwrap();
        let keys = ctx.keygen(31).unwrap();
        Fixture { ctx, keys }
    })
}

fn paper() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ctx = CkksContext::new(CkksParams::paper()).unwrap();
        let keys = ctx.keygen(32).unwrap();
        Fixture { ctx, keys }
    })
}

fn random_ct(f: &Fixture, rng: &mut impl Rng) -> Ciphertext {
    let v: Vec<f64> = (0..f.ctx.slot_count()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let pt = f.ctx.encode(&v, f.ctx.default_scale(), f.ctx.max_level()).unwrap();
    let ct = f.ctx.encrypt(&f.keys.public, &pt, rng).unwrap();
    match rng.gen_range(0..3) {
        0 => ct,
        1 => f.ctx.rescale(&f.ctx.mul_plain(&ct, &pt).unwrap()).unwrap(),
        _ => f.ctx.mul(&ct, &ct).unwrap(),
    }
}

fn is_wire(e: &Error) -> bool {
    matches!(e, Error::Wire(_))
}

#[test]
fn ciphertext_round_trip_and_size() {
    for f in [small(), paper()] {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..4 {
            let ct = random_ct(f, &mut rng);
            let bytes = serialize_ciphertext(&ct);
            assert_eq!(bytes.len(), ct.serialized_size());
            assert_eq!(&bytes[..4], b"FCHE");
            let back = deserialize_ciphertext(&bytes, &f.ctx).unwrap();
            assert_eq!(back, ct);
            assert_eq!(serialize_ciphertext(&back), bytes);
        }
    }
    // header 19 + 2 * 4 * 8192 * 8 residue bytes + 4 checksum bytes
    assert_eq!(serialized_size(8192, 4, 2), 524_311);
    assert_eq!(CIPHERTEXT_HEADER_BYTES, 19);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn ciphertext_round_trip_prop(seed in any::<u64>()) {
        let f = small();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ct = random_ct(f, &mut rng);
        let bytes = serialize_ciphertext(&ct);
        prop_assert_eq!(deserialize_ciphertext(&bytes, &f.ctx).unwrap(), ct);
    }

    #[test]
    fn single_byte_corruption_is_detected(seed in any::<u64>(), pos_frac in 0.0f64..1.0, flip in 1u8..=255) {
        let f = small();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut bytes = serialize_ciphertext(&random_ct(f, &mut rng));
        let pos = ((bytes.len() as f64 * pos_frac) as usize).min(bytes.len() - 1);
        bytes[pos] ^= flip;
        let err = deserialize_ciphertext(&bytes, &f.ctx).unwrap_err();
        prop_assert!(is_wire(&err), "{err}");
    }

    #[test]
    fn head_round_trip_prop(classes in 1usize..5, dim in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let head = ClassifierHead::new(
            classes,
            dim,
            (0..classes * dim).map(|_| rng.gen_range(-1e3..1e3)).collect(),
            (0..classes).map(|_| rng.gen::<f64>()).collect(),
        ).unwrap();
        prop_assert_eq!(deserialize_head(&serialize_head(&head)).unwrap(), head);
    }
}

#[test]
fn every_header_byte_corruption_is_detected() {
    let f = small();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let bytes = serialize_ciphertext(&random_ct(f, &mut rng));
    for pos in (0..64).chain(bytes.len() - 8..bytes.len()) {
        let mut b = bytes.clone();
        b[pos] ^= 0x01;
        assert!(deserialize_ciphertext(&b, &f.ctx).is_err(), "byte {pos}");
    }
}

#[test]
fn header_errors_are_specific() {
    let f = small();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let bytes = serialize_ciphertext(&random_ct(f, &mut rng));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        deserialize_ciphertext(&bad, &f.ctx),
        Err(Error::Wire(WireError::BadMagic { .. }))
    ));
    let mut bad = bytes.clone();
    bad[4] = 99;
    assert!(matches!(
        deserialize_ciphertext(&bad, &f.ctx),
        Err(Error::Wire(WireError::UnsupportedVersion(99)))
    ));
    assert!(matches!(
        deserialize_ciphertext(&bytes[..5], &f.ctx),
        Err(Error::Wire(WireError::Truncated { .. }))
    ));
    assert!(matches!(
        deserialize_ciphertext(&bytes[..bytes.len() - 1], &f.ctx),
        Err(Error::Wire(_))
    ));
    // a ciphertext from another ring degree is refused
    let p = paper();
    let other = serialize_ciphertext(&random_ct(p, &mut rng));
    assert!(deserialize_ciphertext(&other, &f.ctx).is_err());
}

#[test]
fn key_round_trips() {
    let f = small();
    let k = &f.keys;
    let sk = serialize_secret_key(&k.secret, &f.ctx);
    assert_eq!(deserialize_secret_key(&sk, &f.ctx).unwrap(), k.secret);
    let pk = serialize_public_key(&k.public, &f.ctx);
    assert_eq!(deserialize_public_key(&pk, &f.ctx).unwrap(), k.public);
    let rk = serialize_relin_key(&k.relin, &f.ctx);
    assert_eq!(deserialize_relin_key(&rk, &f.ctx).unwrap(), k.relin);
    let gk = serialize_galois_keys(&k.galois, &f.ctx);
    assert_eq!(deserialize_galois_keys(&gk, &f.ctx).unwrap(), k.galois);

    // kinds are not interchangeable
    assert!(deserialize_public_key(&sk, &f.ctx).is_err());
    assert!(deserialize_secret_key(&rk, &f.ctx).is_err());
    assert!(deserialize_ciphertext(&pk, &f.ctx).is_err());
}

#[test]
fn plaintext_and_list_round_trips() {
    let f = small();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let pt = f.ctx.encode(&[1.0, -2.5, 3.25], 2f64.powi(25), 2).unwrap();
    assert_eq!(deserialize_plaintext(&serialize_plaintext(&pt), &f.ctx).unwrap(), pt);

    let cts: Vec<Ciphertext> = (0..3).map(|_| random_ct(f, &mut rng)).collect();
    let bytes = serialize_ciphertext_list(LIST_PREDICTIONS, &cts).unwrap();
    let (kind, back) = deserialize_ciphertext_list(&bytes, &f.ctx).unwrap();
    assert_eq!(kind, LIST_PREDICTIONS);
    assert_eq!(back, cts);
    let empty = serialize_ciphertext_list(LIST_GRADIENT, &[]).unwrap();
    assert_eq!(
        deserialize_ciphertext_list(&empty, &f.ctx).unwrap(),
        (LIST_GRADIENT, vec![])
    );
}

#[test]
fn token_message_concatenates_chunks() {
    let f = small();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let cts: Vec<Ciphertext> = (0..3).map(|_| random_ct(f, &mut rng)).collect();
    let msg = serialize_token_message(&cts);
    assert_eq!(msg.len(), cts.iter().map(Ciphertext::serialized_size).sum::<usize>());
    assert_eq!(deserialize_token_message(&msg, &f.ctx).unwrap(), cts);
    assert!(deserialize_token_message(&msg[..msg.len() - 10], &f.ctx).is_err());
    assert!(deserialize_token_message(&[], &f.ctx).is_err());
}

#[test]
fn bundle_round_trip() {
    let f = small();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let head = ClassifierHead::new(3, 600, vec![0.01; 1800], vec![0.1, 0.2, 0.3]).unwrap();
    let tokens: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..600).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let bundle = encrypt_tokens(&f.ctx, &f.keys.public, 3, &tokens, head, &mut rng).unwrap();
    assert_eq!(bundle.tokens[0].chunks.len(), 2);
    let bytes = serialize_bundle(&bundle).unwrap();
    assert_eq!(deserialize_bundle(&bytes, &f.ctx).unwrap(), bundle);
    let mut bad = bytes.clone();
    let mid = bad.len() / 2;
    bad[mid] ^= 4;
    assert!(deserialize_bundle(&bad, &f.ctx).is_err());
}

#[test]
fn token_file_round_trip() {
    let tf = TokenFile {
        client_id: 2,
        dim: 3,
        tokens: vec![vec![1.0, 2.0, 3.0], vec![-0.5, f64::MIN_POSITIVE, 1e300]],
        labels: vec![2, 0],
    };
    assert_eq!(deserialize_tokens(&serialize_tokens(&tf).unwrap()).unwrap(), tf);
    let bad = TokenFile { labels: vec![1], ..tf };
    assert!(serialize_tokens(&bad).is_err());
}

#[test]
fn model_and_dataset_round_trip() {
    let cfg = VitConfig::tiny();
    let model = VitModel::init(cfg, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
    let back = deserialize_model(&serialize_model(&model).unwrap()).unwrap();
    assert_eq!(back.config(), model.config());
    assert_eq!(back.params(), model.params());

    let ds = synthetic_dataset(5, 4, 4, 8);
    assert_eq!(deserialize_dataset(&serialize_dataset(&ds).unwrap()).unwrap(), ds);
    assert!(matches!(
        deserialize_model(&serialize_dataset(&ds).unwrap()),
        Err(Error::Wire(WireError::BadMagic { .. }))
    ));
}

#[test]
fn chunk_counts() {
    assert_eq!(chunk_count(768, 4096).unwrap(), 1);
    assert_eq!(chunk_count(120_000, 4096).unwrap(), 30);
    assert_eq!(chunk_count(4096, 4096).unwrap(), 1);
    assert_eq!(chunk_count(4097, 4096).unwrap(), 2);
    assert!(chunk_count(0, 4096).is_err());
    assert!(chunk_count(1, 0).is_err());
}

#[test]
fn ledger_ratio_is_exactly_thirty_for_same_level_ciphertexts() {
    let f = paper();
    let slots = f.ctx.slot_count();
    let size = serialized_size(f.ctx.ring_degree(), f.ctx.max_level(), 2);
    let mut l = CommLedger::new();
    let cls_chunks = chunk_count(768, slots).unwrap();
    let grad_chunks = chunk_count(120_000, slots).unwrap();
    l.record(
        Role::Client(1),
        Role::Server,
        PayloadKind::ClsToken,
        cls_chunks * size,
        cls_chunks,
    );
    l.record(
        Role::Client(1),
        Role::Server,
        PayloadKind::GradientVector,
        grad_chunks * size,
        grad_chunks,
    );
    assert_eq!(l.summary().gradient_to_cls_ratio(), Some(30.0));
}

#[test]
fn report_render_parse() {
    let mut r = Report::new("test");
    r.push("a", 1);
    r.push_f64("b", 0.1);
    r.push("c.d", "text with spaces");
    let text = r.render();
    let back = Report::parse(&text).unwrap();
    assert_eq!(back.render(), text);
    assert_eq!(back.get_f64("b"), Some(0.1));
    assert_eq!(back.get("schema"), Some(REPORT_SCHEMA));
    assert!(Report::parse("a=1\n").is_err());
}

#[test]
fn atomic_write_replaces_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/x.bin");
    write_atomic(&p, b"one").unwrap();
    write_atomic(&p, b"two").unwrap();
    assert_eq!(read_file(&p).unwrap(), b"two");
    assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    assert!(matches!(read_file(&dir.path().join("missing")), Err(Error::Io(_))));
}
