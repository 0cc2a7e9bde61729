use fedvit::attack::*;
use fedvit::ckks::{CkksContext, CkksParams};
use fedvit::vit::Image;
use fedvit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn noise_image(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> Image {
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

fn gray(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Image {
    let mut px = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            px.push(f(y, x));
        }
    }
    Image::new(h, w, 1, px).unwrap()
}

// ---------- metrics ----------

#[test]
fn psnr_closed_forms() {
    let a = Image::filled(8, 8, 3, 0.5);
    assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    let b = Image::filled(8, 8, 3, 0.6);
    // MSE = 0.1^2 = 0.01
    assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    let board = gray(8, 8, |y, x| ((x + y) % 2) as f64);
    let inverse = gray(8, 8, |y, x| ((x + y + 1) % 2) as f64);
    assert_eq!(psnr(&board, &inverse).unwrap(), 0.0);
    assert!(psnr(&a, &Image::filled(8, 4, 3, 0.5)).is_err());
}

#[test]
fn ssim_identity_and_constant_patches() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let a = noise_image(&mut rng, 20, 17, 3);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);

    // Constant windows: variances and covariance vanish, so every window scores
    // (2 m1 m2 + C1) / (m1^2 + m2^2 + C1).
    let (m1, m2) = (0.2, 0.7);
    let c1 = 1e-4;
    let oracle = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    let got = ssim(&Image::filled(16, 16, 1, m1), &Image::filled(16, 16, 1, m2)).unwrap();
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    assert!(got < 0.8);

    assert!(ssim(&Image::filled(7, 20, 1, 0.0), &Image::filled(7, 20, 1, 0.0)).is_err());
}

#[test]
fn ssim_of_independent_noise_is_small() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(100 + seed);
        let a = noise_image(&mut rng, 64, 64, 1);
        let b = noise_image(&mut rng, 64, 64, 1);
        worst = worst.max(ssim(&a, &b).unwrap().abs());
    }
    assert!(worst < 0.1, "{worst}");
}

#[test]
fn nmi_identity_bijection_and_noise() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let a = noise_image(&mut rng, 32, 32, 1);
    assert!((nmi(&a, &a, NMI_BINS).unwrap() - 1.0).abs() < 1e-12);

    // values on bin centres, so 1 - v lands on the mirrored bin
    let centres = gray(32, 32, |_, _| (rng.gen_range(0..64) as f64 + 0.5) / 64.0);
    let mirrored = Image::new(32, 32, 1, centres.pixels.iter().map(|v| 1.0 - v).collect()).unwrap();
    assert!((nmi(&centres, &mirrored, NMI_BINS).unwrap() - 1.0).abs() < 1e-6);

    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha20Rng::seed_from_u64(200 + seed);
        let x = noise_image(&mut rng, 64, 64, 3);
        let y = noise_image(&mut rng, 64, 64, 3);
        worst = worst.max(nmi(&x, &y, NMI_BINS).unwrap());
    }
    assert!(worst < 0.1, "{worst}");

    let flat = Image::filled(8, 8, 1, 0.3);
    assert_eq!(nmi(&flat, &a_small(&mut rng), NMI_BINS).unwrap(), 0.0);
}

fn a_small(rng: &mut impl Rng) -> Image {
    noise_image(rng, 8, 8, 1)
}

#[test]
fn metrics_are_symmetric() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..5 {
        let a = noise_image(&mut rng, 12, 10, 3);
        let b = noise_image(&mut rng, 12, 10, 3);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-15);
        assert!((nmi(&a, &b, NMI_BINS).unwrap() - nmi(&b, &a, NMI_BINS).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn psnr_falls_as_noise_grows() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let clean = noise_image(&mut rng, 16, 16, 3);
    let means: Vec<f64> = (1..=20)
        .map(|level| {
            let sigma = 0.01 * level as f64;
            let normal = Normal::new(0.0, sigma).unwrap();
            (0..10)
                .map(|s| {
                    let mut r = ChaCha20Rng::seed_from_u64(1000 * level + s);
                    let noisy = Image::new(
                        16,
                        16,
                        3,
                        clean.pixels.iter().map(|v| v + normal.sample(&mut r)).collect(),
                    )
                    .unwrap();
                    psnr(&clean, &noisy).unwrap()
                })
                .sum::<f64>()
                / 10.0
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

// ---------- ridge inversion ----------

/// Dense Gauss-Jordan solve of the normal equations, written independently of
/// the library's factorisation.
fn normal_equation_oracle(z: &[Vec<f64>], x: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let f = z[0].len();
    let p = x[0].len();
    let mut a = vec![vec![0.0; f + p]; f];
    for (zi, xi) in z.iter().zip(x) {
        for r in 0..f {
            for c in 0..f {
                a[r][c] += zi[r] * zi[c];
            }
            for c in 0..p {
                a[r][f + c] += zi[r] * xi[c];
            }
        }
    }
    for (r, row) in a.iter_mut().enumerate() {
        row[r] += lambda;
    }
    for col in 0..f {
        let piv = (col..f)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let k = row[col];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= k * pv;
                }
            }
        }
    }
    a.into_iter().map(|row| row[f..].to_vec()).collect()
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

#[test]
fn fit_matches_normal_equation_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let z: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let x: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
    let map = fit_inversion(&refs(&z), &refs(&x), 0.3, FeatureKind::ClsToken).unwrap();
    let oracle = normal_equation_oracle(&z, &x, 0.3);
    for i in 0..6 {
        for j in 0..4 {
            assert!((map.weights[i * 4 + j] - oracle[i][j]).abs() < 1e-10);
        }
    }
}

#[test]
fn dual_and_primal_solutions_agree() {
    // 12 features, 10 samples takes the dual path; the oracle solves the primal.
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let z: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let x: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
    let map = fit_inversion(&refs(&z), &refs(&x), 0.05, FeatureKind::CiphertextBytes).unwrap();
    let oracle = normal_equation_oracle(&z, &x, 0.05);
    for i in 0..12 {
        for j in 0..3 {
            assert!((map.weights[i * 3 + j] - oracle[i][j]).abs() < 1e-9);
        }
    }
}

#[test]
fn self_regression_recovers_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let imgs: Vec<Vec<f64>> = (0..200).map(|_| (0..48).map(|_| rng.gen::<f64>()).collect()).collect();
    let map = fit_inversion(&refs(&imgs), &refs(&imgs), 1e-12, FeatureKind::ClsToken).unwrap();
    for i in 0..48 {
        for j in 0..48 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((map.weights[i * 48 + j] - want).abs() < 1e-6);
        }
    }
    let probe: Vec<f64> = (0..48).map(|_| rng.gen::<f64>()).collect();
    let r = reconstruct(&map, &probe).unwrap();
    assert!(r.iter().zip(&probe).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn heavy_ridge_shrinks_to_zero() {
    let z = vec![vec![0.3, -0.2, 0.9, 0.1]];
    let x = vec![vec![0.8, 0.4, 0.6]];
    let map = fit_inversion(&refs(&z), &refs(&x), 1e9, FeatureKind::ClsToken).unwrap();
    assert!(map.frobenius_norm() < 1e-8);
    assert!(reconstruct(&map, &z[0]).unwrap().iter().all(|v| v.abs() < 1e-8));
}

#[test]
fn ridge_norm_decreases_with_lambda() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for (n, f) in [(40, 8), (10, 30)] {
        let z: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.gen::<f64>()).collect()).collect();
        let norms: Vec<f64> = [1e-4, 1e-2, 1.0, 10.0, 1e3]
            .iter()
            .map(|&l| {
                fit_inversion(&refs(&z), &refs(&x), l, FeatureKind::ClsToken)
                    .unwrap()
                    .frobenius_norm()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
    }
}

#[test]
fn fit_rejects_bad_inputs() {
    let z = vec![vec![1.0; 11]];
    let x = vec![vec![0.5; 2]];
    assert!(matches!(
        fit_inversion(&refs(&z), &refs(&x), 1.0, FeatureKind::ClsToken),
        Err(Error::Contract(_))
    ));
    let z = vec![vec![1.0; 2]];
    assert!(fit_inversion(&refs(&z), &refs(&x), 0.0, FeatureKind::ClsToken).is_err());
    assert!(fit_inversion(
        &refs(&z),
        &refs(&[x[0].clone(), x[0].clone()]),
        1.0,
        FeatureKind::ClsToken
    )
    .is_err());
    let nan = vec![vec![f64::NAN, 1.0]];
    assert!(matches!(
        fit_inversion(&refs(&nan), &refs(&x), 1.0, FeatureKind::ClsToken),
        Err(Error::Numerical(_))
    ));
    let map = fit_inversion(&refs(&z), &refs(&x), 1.0, FeatureKind::ClsToken).unwrap();
    assert!(reconstruct(&map, &[1.0]).is_err());
}

#[test]
fn linear_generator_is_invertible_from_plaintext_features() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let gen = LinearGenerator::new(16, 16, 3, 32, 0.01, &mut rng);
    let (z, x): (Vec<Vec<f64>>, Vec<Image>) = (0..400).map(|_| gen.sample(&mut rng)).unzip();
    let (report, _) = evaluate_attack(
        (&z[..300], &x[..300]),
        (&z[300..], &x[300..]),
        DEFAULT_LAMBDA,
        FeatureKind::ClsToken,
    )
    .unwrap();
    assert!(report.mean_psnr() > 30.0, "{}", report.mean_psnr());
    assert!(report
        .per_image
        .iter()
        .all(|s| s.ssim <= 1.0 && s.nmi <= 1.0 && s.psnr >= 0.0));
}

#[test]
fn ciphertext_bytes_do_not_invert() {
    let ctx = CkksContext::new(CkksParams::small()).unwrap();
    let keys = ctx.keygen(10).unwrap();
    let cfg = AttackSuiteConfig {
        n_train: 200,
        n_eval: 40,
        ..AttackSuiteConfig::default()
    };
    let suite = run_attack_suite(&cfg, &ctx, &keys.public, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
    assert!(suite.plaintext.mean_psnr() > 30.0, "{}", suite.plaintext.mean_psnr());
    assert!(suite.ciphertext.mean_psnr() < 15.0, "{}", suite.ciphertext.mean_psnr());
    assert!(suite.psnr_gap() >= 15.0);
    let report = suite.report(&cfg);
    assert_eq!(report.get("ciphertext.feature_kind"), Some("ciphertext-bytes"));
    assert_eq!(report.get("ciphertext.n_train"), Some("200"));
}

#[test]
fn png_dump_round_trips_through_the_decoder() {
    let dir = tempfile::tempdir().unwrap();
    let img = gray(9, 11, |y, x| ((y * 11 + x) % 256) as f64 / 255.0);
    let path = dir.path().join("out/g.png");
    save_png(&img, &path).unwrap();
    let back = image::open(&path).unwrap().to_luma8();
    assert_eq!(back.dimensions(), (11, 9));
    assert_eq!(back.get_pixel(3, 2).0[0], (2 * 11 + 3) as u8);
}
