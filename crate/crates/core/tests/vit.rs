use fedvit::vit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_image(cfg: &VitConfig, rng: &mut impl Rng) -> Image {
    let px = (0..cfg.pixel_count()).map(|_| rng.gen_range(0.0..1.0)).collect();
    Image::new(cfg.image_h, cfg.image_w, cfg.channels, px).unwrap()
}

/// Tiny model with every tensor (gains, biases, CLS) randomized.
fn tiny_model(seed: u64) -> VitModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut m = VitModel::init_with_stddev(VitConfig::tiny(), 0.4, &mut rng).unwrap();
    let specs = m.layout().specs().to_vec();
    for s in specs {
        let t = m.tensor_mut(&s.name).unwrap();
        if s.name.ends_with(".gain") {
            t.iter_mut().for_each(|x| *x = 1.0 + rng.gen_range(-0.3..0.3));
        } else if s.name.ends_with("bias")
            || s.name.ends_with(".b1")
            || s.name.ends_with(".b2")
            || s.name == "cls_token"
        {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-0.3..0.3));
        }
    }
    m
}

#[test]
fn patch_counts() {
    let paper = VitConfig::paper();
    let img = Image::filled(200, 200, 3, 0.5);
    assert_eq!(patchify(&img, paper.patch_size).unwrap().len(), 64);
    assert_eq!(paper.patch_count(), 64);
    let desk = Image::filled(32, 32, 3, 0.25);
    let p = patchify(&desk, 8).unwrap();
    assert_eq!(p.len(), 16);
    assert!(p.iter().all(|x| x == &p[0]));
    assert!(patchify(&desk, 5).is_err());
    let mut bad = VitConfig::desk();
    bad.patch_size = 5;
    assert!(matches!(bad.validate(), Err(fedvit::Error::Config(_))));
}

#[test]
fn patchify_is_row_major() {
    let px: Vec<f64> = (0..4 * 4 * 3).map(|i| i as f64).collect();
    let img = Image::new(4, 4, 3, px).unwrap();
    let p = patchify(&img, 2).unwrap();
    // second patch starts at column 2 of row 0
    assert_eq!(&p[1][..3], &[6.0, 7.0, 8.0]);
    // third patch starts at row 2
    assert_eq!(&p[2][..3], &[24.0, 25.0, 26.0]);
    assert_eq!(&p[0][6..9], &[12.0, 13.0, 14.0]);
}

#[test]
fn probabilities_and_uniform_head() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let cfg = VitConfig::desk();
    let mut m = VitModel::init(cfg, &mut rng).unwrap();
    for _ in 0..5 {
        let out = m.forward(&random_image(&cfg, &mut rng)).unwrap();
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(out.cls.len(), 64);
    }
    m.tensor_mut("head.weight").unwrap().fill(0.0);
    m.tensor_mut("head.bias").unwrap().fill(0.0);
    let out = m.forward(&Image::filled(32, 32, 3, 0.0)).unwrap();
    assert!(out.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn attention_rows_sum_to_one() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let cfg = VitConfig::desk();
    let m = VitModel::init_with_stddev(cfg, 0.2, &mut rng).unwrap();
    let tr = m.forward_trace(&random_image(&cfg, &mut rng)).unwrap();
    let t = cfg.token_count();
    for l in 0..cfg.depth {
        for row in tr.attention(l).chunks(t) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn extract_cls_is_forward_cls() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let cfg = VitConfig::desk();
    let m = VitModel::init(cfg, &mut rng).unwrap();
    let img = random_image(&cfg, &mut rng);
    let a = m.extract_cls(&img).unwrap();
    assert_eq!(a, m.forward(&img).unwrap().cls);
    assert_eq!(a, m.extract_cls(&img).unwrap());
}

#[test]
fn paper_config_forward() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let cfg = VitConfig::paper();
    let m = VitModel::init(cfg, &mut rng).unwrap();
    let img = Image::filled(200, 200, 3, 0.3);
    let out = m.forward(&img).unwrap();
    assert_eq!(out.cls.len(), 768);
    assert_eq!(out.logits.len(), 3);
    assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn permuting_patches_with_positions_leaves_logits() {
    let m0 = tiny_model(5);
    let cfg = *m0.config();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let patches = patchify(&random_image(&cfg, &mut rng), cfg.patch_size).unwrap();
    let base = m0.forward_patches(&patches).unwrap().output.logits;

    let perm = [2usize, 0, 3, 1];
    let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| patches[i].clone()).collect();
    let d = cfg.hidden_dim;
    let mut m1 = m0.clone();
    let pos0 = m0.tensor("pos_embed").unwrap().to_vec();
    let pos1 = m1.tensor_mut("pos_embed").unwrap();
    for (new, &old) in perm.iter().enumerate() {
        pos1[(new + 1) * d..(new + 2) * d].copy_from_slice(&pos0[(old + 1) * d..(old + 2) * d]);
    }
    let got = m1.forward_patches(&permuted).unwrap().output.logits;
    for (a, b) in base.iter().zip(&got) {
        assert!((a - b).abs() < 1e-9);
    }
    // without the matching positional rows the output changes
    let moved = m0.forward_patches(&permuted).unwrap().output.logits;
    assert!(base.iter().zip(&moved).any(|(a, b)| (a - b).abs() > 1e-6));
}

// ---- independent straight-line forward pass ----

type Mat = Vec<Vec<f64>>;

fn mat(flat: &[f64], rows: usize, cols: usize) -> Mat {
    (0..rows).map(|r| flat[r * cols..(r + 1) * cols].to_vec()).collect()
}

fn matvec(w: &Mat, x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn ln(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(i, v)| g[i] * (v - mu) / (var + 1e-6).sqrt() + b[i])
        .collect()
}

fn oracle_logits(m: &VitModel, img: &Image) -> Vec<f64> {
    let c = *m.config();
    let (d, dk) = (c.hidden_dim, c.head_dim());
    let t = |n: &str| m.tensor(n).unwrap();
    let wp = mat(t("patch_proj.weight"), d, c.patch_dim());
    let mut z: Mat = vec![t("cls_token").to_vec()];
    for py in 0..c.image_h / c.patch_size {
        for px in 0..c.image_w / c.patch_size {
            let mut patch = Vec::new();
            for y in 0..c.patch_size {
                for x in 0..c.patch_size {
                    for ch in 0..c.channels {
                        let (yy, xx) = (py * c.patch_size + y, px * c.patch_size + x);
                        patch.push(img.pixels[(yy * c.image_w + xx) * c.channels + ch]);
                    }
                }
            }
            let e = matvec(&wp, &patch);
            z.push(e.iter().zip(t("patch_proj.bias")).map(|(a, b)| a + b).collect());
        }
    }
    let pos = mat(t("pos_embed"), z.len(), d);
    for (row, p) in z.iter_mut().zip(&pos) {
        row.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    for l in 0..c.depth {
        let n = |s: &str| format!("blocks.{l}.{s}");
        let a: Mat = z.iter().map(|r| ln(r, t(&n("ln1.gain")), t(&n("ln1.bias")))).collect();
        let q: Mat = a.iter().map(|r| matvec(&mat(t(&n("attn.wq")), d, d), r)).collect();
        let k: Mat = a.iter().map(|r| matvec(&mat(t(&n("attn.wk")), d, d), r)).collect();
        let v: Mat = a.iter().map(|r| matvec(&mat(t(&n("attn.wv")), d, d), r)).collect();
        let mut ctx = vec![vec![0.0; d]; z.len()];
        for h in 0..c.heads {
            let cols = h * dk..(h + 1) * dk;
            for i in 0..z.len() {
                let s: Vec<f64> = (0..z.len())
                    .map(|j| cols.clone().map(|cc| q[i][cc] * k[j][cc]).sum::<f64>() / (dk as f64).sqrt())
                    .collect();
                let mx = s.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = s.iter().map(|x| (x - mx).exp()).collect();
                let tot: f64 = e.iter().sum();
                for j in 0..z.len() {
                    for cc in cols.clone() {
                        ctx[i][cc] += e[j] / tot * v[j][cc];
                    }
                }
            }
        }
        let wo = mat(t(&n("attn.wo")), d, d);
        for (row, cr) in z.iter_mut().zip(&ctx) {
            row.iter_mut().zip(matvec(&wo, cr)).for_each(|(a, b)| *a += b);
        }
        let w1 = mat(t(&n("mlp.w1")), c.mlp_dim, d);
        let w2 = mat(t(&n("mlp.w2")), d, c.mlp_dim);
        for row in z.iter_mut() {
            let a2 = ln(row, t(&n("ln2.gain")), t(&n("ln2.bias")));
            let h1: Vec<f64> = matvec(&w1, &a2)
                .iter()
                .zip(t(&n("mlp.b1")))
                .map(|(x, b)| {
                    let u = x + b;
                    0.5 * u * (1.0 + libm::erf(u / 2f64.sqrt()))
                })
                .collect();
            let y = matvec(&w2, &h1);
            for i in 0..d {
                row[i] += y[i] + t(&n("mlp.b2"))[i];
            }
        }
    }
    let cls = ln(&z[0], t("final_ln.gain"), t("final_ln.bias"));
    matvec(&mat(t("head.weight"), c.classes, d), &cls)
        .iter()
        .zip(t("head.bias"))
        .map(|(a, b)| a + b)
        .collect()
}

#[test]
fn forward_matches_straight_line_oracle() {
    let m = tiny_model(7);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..3 {
        let img = random_image(m.config(), &mut rng);
        let got = m.forward(&img).unwrap().logits;
        let want = oracle_logits(&m, &img);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut model = tiny_model(9);
    let cfg = *model.config();
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let imgs: Vec<Image> = (0..3).map(|_| random_image(&cfg, &mut rng)).collect();
    let refs: Vec<&Image> = imgs.iter().collect();
    let labels = [0usize, 2, 1];
    let (_, grad) = loss_and_grads(&model, &refs, &labels).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for spec in model.layout().specs().to_vec() {
        let n = spec.len();
        let picks: Vec<usize> = if n <= 20 {
            (0..n).collect()
        } else {
            (0..20).map(|_| rng.gen_range(0..n)).collect()
        };
        for i in picks {
            let idx = spec.offset + i;
            let orig = model.params()[idx];
            model.params_mut()[idx] = orig + h;
            let lp = loss_and_grads(&model, &refs, &labels).unwrap().0;
            model.params_mut()[idx] = orig - h;
            let lm = loss_and_grads(&model, &refs, &labels).unwrap().0;
            model.params_mut()[idx] = orig;
            let num = (lp - lm) / (2.0 * h);
            let ana = grad[idx];
            let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-4);
            assert!(
                rel < 1e-4,
                "{}[{i}]: analytic {ana}, numeric {num}, rel {rel}",
                spec.name
            );
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn loss_properties() {
    let m = tiny_model(11);
    let cfg = *m.config();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let img = random_image(&cfg, &mut rng);
    let (single, g1) = loss_and_grads(&m, &[&img], &[1]).unwrap();
    let (double, g2) = loss_and_grads(&m, &[&img, &img], &[1, 1]).unwrap();
    assert!((single - double).abs() < 1e-14);
    assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-14));
    assert!(loss_and_grads(&m, &[], &[]).is_err());

    let mut u = m.clone();
    u.tensor_mut("head.weight").unwrap().fill(0.0);
    u.tensor_mut("head.bias").unwrap().fill(0.0);
    let (l, _) = loss_and_grads(&u, &[&img], &[0]).unwrap();
    assert!((l - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn zero_learning_rate_and_determinism() {
    let cfg = VitConfig::tiny();
    let data = synthetic_dataset(24, cfg.image_h, cfg.image_w, 1);
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let m0 = VitModel::init(cfg, &mut rng).unwrap();
    let tc = TrainConfig {
        epochs: 2,
        batch_size: 8,
        seed: 5,
        ..TrainConfig::paper()
    };

    let mut frozen = m0.clone();
    train_local(
        &mut frozen,
        &data,
        &TrainConfig {
            learning_rate: 0.0,
            ..tc
        },
    )
    .unwrap();
    assert_eq!(frozen.params(), m0.params());

    let mut a = m0.clone();
    let mut b = m0.clone();
    let ra = train_local(&mut a, &data, &tc).unwrap();
    let rb = train_local(&mut b, &data, &tc).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(ra, rb);
    assert_eq!(ra.epoch_accuracy.len(), 2);
    assert_ne!(a.params(), m0.params());
    assert!(train_local(&mut a, &Dataset::default(), &tc).is_err());
}

#[test]
fn synthetic_classes_separate_on_mean_colour() {
    // nearest class-mean colour classifies every sample
    let data = synthetic_dataset(300, 32, 32, 4);
    let means: Vec<[f64; 3]> = data
        .images
        .iter()
        .map(|img| {
            let mut m = [0.0; 3];
            for p in img.pixels.chunks(3) {
                for c in 0..3 {
                    m[c] += p[c];
                }
            }
            m.map(|v| v / 1024.0)
        })
        .collect();
    let mut centroid = [[0.0; 3]; 3];
    for (m, &y) in means.iter().zip(&data.labels) {
        for c in 0..3 {
            centroid[y][c] += m[c] / 100.0;
        }
    }
    for (m, &y) in means.iter().zip(&data.labels) {
        let dist = |k: usize| (0..3).map(|c| (m[c] - centroid[k][c]).powi(2)).sum::<f64>();
        let best = (0..3).min_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap()).unwrap();
        assert_eq!(best, y);
    }
    assert_eq!(synthetic_dataset(30, 32, 32, 4), synthetic_dataset(30, 32, 32, 4));
}

#[test]
fn non_finite_parameters_are_reported_with_layer() {
    let mut m = tiny_model(14);
    m.tensor_mut("blocks.0.mlp.b2").unwrap()[0] = f64::NAN;
    let img = Image::filled(4, 4, 3, 0.5);
    match m.forward(&img) {
        Err(fedvit::Error::NonFinite { layer, .. }) => assert_eq!(layer, 1),
        other => panic!("expected non-finite error, got {other:?}"),
    }
}
