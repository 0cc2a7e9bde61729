//! Ridge-regression model inversion and image similarity metrics.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ckks::{CkksContext, PublicKey};
use crate::error::{Error, Result};
use crate::io::{serialize_ciphertext, Report};
use crate::vit::Image;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 8;
pub const NMI_BINS: usize = 64;
pub const DEFAULT_LAMBDA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    ClsToken,
    GradientVector,
    CiphertextBytes,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::ClsToken => "cls-token",
            FeatureKind::GradientVector => "gradient-vector",
            FeatureKind::CiphertextBytes => "ciphertext-bytes",
        }
    }
}

/// Linear map from a feature vector to pixels, `weights` row-major `[feature_dim, pixel_dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionMap {
    pub feature_dim: usize,
    pub pixel_dim: usize,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub kind: FeatureKind,
}

impl InversionMap {
    pub fn frobenius_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn rows_to_matrix(rows: &[&[f64]], what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, |r| r.len());
    if cols == 0 {
        return Err(Error::contract(format!("{what} are empty")));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::contract(format!("{what} differ in length")));
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical(format!("non-finite {what}")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Solves `(A + lambda I) Y = B` for symmetric positive semi-definite `A`.
fn ridge_solve(mut a: DMatrix<f64>, b: DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    match a.clone().cholesky() {
        Some(c) => Ok(c.solve(&b)),
        None => {
            let eig = a.symmetric_eigenvalues();
            let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            Err(Error::Numerical(format!(
                "ridge system is singular (condition estimate {:.3e})",
                max / min
            )))
        }
    }
}

/// `M = argmin |X - Z M|^2 + lambda |M|^2`.
///
/// Solved through `(Z^T Z + lambda I) M = Z^T X` when features are no more
/// numerous than samples, otherwise through the equivalent
/// `M = Z^T (Z Z^T + lambda I)^-1 X`.
pub fn fit_inversion(features: &[&[f64]], images: &[&[f64]], lambda: f64, kind: FeatureKind) -> Result<InversionMap> {
    if features.len() != images.len() {
        return Err(Error::contract(format!(
            "{} feature vectors for {} images",
            features.len(),
            images.len()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::contract(format!(
            "ridge strength must be positive, got {lambda}"
        )));
    }
    let z = rows_to_matrix(features, "features")?;
    let x = rows_to_matrix(images, "images")?;
    let (n, f) = z.shape();
    if n * 10 < f {
        return Err(Error::contract(format!(
            "{n} training pairs for {f}-dim features; at least {} needed",
            f.div_ceil(10)
        )));
    }
    let m = if f <= n {
        ridge_solve(z.tr_mul(&z), z.tr_mul(&x), lambda)?
    } else {
        let alpha = ridge_solve(&z * z.transpose(), x, lambda)?;
        z.tr_mul(&alpha)
    };
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("inversion map has non-finite entries".into()));
    }
    let pixel_dim = m.ncols();
    let mut weights = Vec::with_capacity(f * pixel_dim);
    for i in 0..f {
        weights.extend(m.row(i).iter());
    }
    Ok(InversionMap {
        feature_dim: f,
        pixel_dim,
        weights,
        lambda,
        kind,
    })
}

/// `z M`, clipped to `[0, 1]`.
pub fn reconstruct(map: &InversionMap, feature: &[f64]) -> Result<Vec<f64>> {
    if feature.len() != map.feature_dim {
        return Err(Error::contract(format!(
            "{}-dim feature for a map expecting {}",
            feature.len(),
            map.feature_dim
        )));
    }
    let mut out = vec![0.0; map.pixel_dim];
    for (z, row) in feature.iter().zip(map.weights.chunks_exact(map.pixel_dim)) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += z * w;
        }
    }
    for o in &mut out {
        *o = o.clamp(0.0, 1.0);
    }
    Ok(out)
}

fn same_shape(a: &Image, b: &Image) -> Result<()> {
    if (a.height, a.width, a.channels) != (b.height, b.width, b.channels) {
        return Err(Error::contract(format!(
            "image shapes differ: {}x{}x{} vs {}x{}x{}",
            a.height, a.width, a.channels, b.height, b.width, b.channels
        )));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` over all channels, [`PSNR_CAP_DB`] for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    same_shape(a, b)?;
    let mse = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM of grayscale images over every 8x8 window (stride 1, uniform weights).
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    same_shape(a, b)?;
    let (h, w) = (a.height, a.width);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::contract(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images"
        )));
    }
    let (ga, gb) = (a.grayscale(), b.grayscale());
    let c1 = 0.01f64.powi(2);
    let c2 = 0.03f64.powi(2);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                let row = (y + dy) * w + x;
                for i in row..row + SSIM_WINDOW {
                    let (p, q) = (ga[i], gb[i]);
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

fn bin(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

fn entropy(counts: &[usize], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `I(A;B) / sqrt(H(A) H(B))` from a joint histogram of grayscale intensities.
/// Zero when either image occupies a single bin.
pub fn nmi(a: &Image, b: &Image, bins: usize) -> Result<f64> {
    same_shape(a, b)?;
    if bins < 2 {
        return Err(Error::contract("NMI needs at least two bins"));
    }
    let (ga, gb) = (a.grayscale(), b.grayscale());
    let mut joint = vec![0usize; bins * bins];
    let mut ca = vec![0usize; bins];
    let mut cb = vec![0usize; bins];
    for (&p, &q) in ga.iter().zip(&gb) {
        let (i, j) = (bin(p, bins), bin(q, bins));
        joint[i * bins + j] += 1;
        ca[i] += 1;
        cb[j] += 1;
    }
    let total = ga.len() as f64;
    let (ha, hb) = (entropy(&ca, total), entropy(&cb, total));
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let hab = entropy(&joint, total);
    let mi = ha + hb - hab;
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageScores {
    pub psnr: f64,
    pub ssim: f64,
    pub nmi: f64,
}

pub fn score(original: &Image, recon: &Image) -> Result<ImageScores> {
    Ok(ImageScores {
        psnr: psnr(original, recon)?,
        ssim: ssim(original, recon)?,
        nmi: nmi(original, recon, NMI_BINS)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackReport {
    pub kind: FeatureKind,
    pub lambda: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub per_image: Vec<ImageScores>,
}

impl AttackReport {
    fn mean(&self, f: impl Fn(&ImageScores) -> f64) -> f64 {
        if self.per_image.is_empty() {
            return 0.0;
        }
        self.per_image.iter().map(f).sum::<f64>() / self.per_image.len() as f64
    }

    pub fn mean_psnr(&self) -> f64 {
        self.mean(|s| s.psnr)
    }

    pub fn mean_ssim(&self) -> f64 {
        self.mean(|s| s.ssim)
    }

    pub fn mean_nmi(&self) -> f64 {
        self.mean(|s| s.nmi)
    }

    pub fn push_into(&self, r: &mut Report, prefix: &str) {
        r.push(format!("{prefix}.feature_kind"), self.kind.name());
        r.push_f64(format!("{prefix}.lambda"), self.lambda);
        r.push(format!("{prefix}.n_train"), self.n_train);
        r.push(format!("{prefix}.n_eval"), self.n_eval);
        r.push_f64(format!("{prefix}.mean_psnr_db"), self.mean_psnr());
        r.push_f64(format!("{prefix}.mean_ssim"), self.mean_ssim());
        r.push_f64(format!("{prefix}.mean_nmi"), self.mean_nmi());
        for (i, s) in self.per_image.iter().enumerate() {
            r.push(
                format!("{prefix}.image.{i}"),
                format!("{:.6},{:.6},{:.6}", s.psnr, s.ssim, s.nmi),
            );
        }
    }
}

/// Fits on the training pairs and scores reconstructions of the held-out ones.
pub fn evaluate_attack(
    train: (&[Vec<f64>], &[Image]),
    eval: (&[Vec<f64>], &[Image]),
    lambda: f64,
    kind: FeatureKind,
) -> Result<(AttackReport, Vec<Image>)> {
    let zs: Vec<&[f64]> = train.0.iter().map(Vec::as_slice).collect();
    let xs: Vec<&[f64]> = train.1.iter().map(|i| i.pixels.as_slice()).collect();
    let map = fit_inversion(&zs, &xs, lambda, kind)?;
    let mut per_image = Vec::with_capacity(eval.0.len());
    let mut recons = Vec::with_capacity(eval.0.len());
    for (z, img) in eval.0.iter().zip(eval.1) {
        let r = Image::new(img.height, img.width, img.channels, reconstruct(&map, z)?)?;
        per_image.push(score(img, &r)?);
        recons.push(r);
    }
    Ok((
        AttackReport {
            kind,
            lambda,
            n_train: train.0.len(),
            n_eval: eval.0.len(),
            per_image,
        },
        recons,
    ))
}

/// Images `x = clip(A z + e)` from Rademacher latents `z` and Gaussian noise `e`.
///
/// Each pixel is driven mostly by one latent coordinate, so pixels stay inside
/// `[0, 1]` while varying strongly across samples.
#[derive(Clone, Debug)]
pub struct LinearGenerator {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub latent_dim: usize,
    pub noise: f64,
    /// Row-major `[latent_dim + 1, pixel_dim]`; row 0 is the offset.
    pub mixing: Vec<f64>,
}

impl LinearGenerator {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        latent_dim: usize,
        noise: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let p = height * width * channels;
        let d = latent_dim.max(1);
        let mut mixing = vec![0.0; (d + 1) * p];
        for px in 0..p {
            mixing[px] = 0.5;
            let main = px % d;
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            mixing[(main + 1) * p + px] = sign * 0.36;
            // remaining latents share an L1 budget of 0.08
            let others: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l1: f64 = others
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != main)
                .map(|(_, v)| v.abs())
                .sum();
            if l1 > 0.0 {
                for (k, v) in others.iter().enumerate().filter(|(k, _)| *k != main) {
                    mixing[(k + 1) * p + px] = 0.08 * v / l1;
                }
            }
        }
        Self {
            height,
            width,
            channels,
            latent_dim: d,
            noise,
            mixing,
        }
    }

    pub fn pixel_dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Latent with its leading constant 1, and the generated image.
    pub fn sample(&self, rng: &mut impl Rng) -> (Vec<f64>, Image) {
        let p = self.pixel_dim();
        let mut z = Vec::with_capacity(self.latent_dim + 1);
        z.push(1.0);
        z.extend((0..self.latent_dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }));
        let noise = Normal::new(0.0, self.noise).expect("non-negative noise");
        let mut px = vec![0.0; p];
        for (zk, row) in z.iter().zip(self.mixing.chunks_exact(p)) {
            for (x, a) in px.iter_mut().zip(row) {
                *x += zk * a;
            }
        }
        for x in &mut px {
            *x = (*x + noise.sample(rng)).clamp(0.0, 1.0);
        }
        let img = Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            pixels: px,
        };
        (z, img)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackSuiteConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub latent_dim: usize,
    pub noise: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub lambda: f64,
}

impl Default for AttackSuiteConfig {
    fn default() -> Self {
        Self {
            height: 16,
            width: 16,
            channels: 3,
            latent_dim: 32,
            noise: 0.01,
            n_train: 300,
            n_eval: 100,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

pub struct AttackSuite {
    pub plaintext: AttackReport,
    pub ciphertext: AttackReport,
    pub plaintext_recons: Vec<Image>,
    pub ciphertext_recons: Vec<Image>,
    pub originals: Vec<Image>,
}

impl AttackSuite {
    pub fn psnr_gap(&self) -> f64 {
        self.plaintext.mean_psnr() - self.ciphertext.mean_psnr()
    }

    pub fn report(&self, cfg: &AttackSuiteConfig) -> Report {
        let mut r = Report::new("attack");
        r.push("setup.generator", "linear, rademacher latents, gaussian noise");
        r.push(
            "setup.image_shape",
            format!("{}x{}x{}", cfg.height, cfg.width, cfg.channels),
        );
        r.push("setup.latent_dim", cfg.latent_dim);
        r.push_f64("setup.noise", cfg.noise);
        r.push("setup.split", "held-out samples from the same generator");
        r.push("setup.ciphertext_features", "first pixel_dim serialized bytes / 255");
        r.push("metric.ssim", "grayscale channel mean, 8x8 uniform window, stride 1");
        r.push("metric.nmi", "64 bins, I/sqrt(HaHb)");
        r.push_f64("metric.psnr_cap_db", PSNR_CAP_DB);
        self.plaintext.push_into(&mut r, "plaintext");
        self.ciphertext.push_into(&mut r, "ciphertext");
        r.push_f64("gap.psnr_db", self.psnr_gap());
        let p = &crate::fed::PAPER_REFERENCE;
        r.push("reference.status", "published values on real scans; not reproduced");
        r.push_f64("reference.paper.psnr_db", p.attack_psnr_db);
        r.push_f64("reference.paper.ssim", p.attack_ssim);
        r.push_f64("reference.paper.nmi", p.attack_nmi);
        r
    }
}

/// Ciphertext bytes as features: the first `len` serialized bytes scaled to `[0, 1]`.
pub fn ciphertext_byte_features(bytes: &[u8], len: usize) -> Result<Vec<f64>> {
    if bytes.len() < len {
        return Err(Error::contract(format!(
            "{} ciphertext bytes, {len} requested",
            bytes.len()
        )));
    }
    Ok(bytes[..len].iter().map(|&b| b as f64 / 255.0).collect())
}

/// Both arms on one synthetic fixture: the adversary sees the plaintext latents
/// in one and the encrypted latents' bytes in the other.
pub fn run_attack_suite(
    cfg: &AttackSuiteConfig,
    ctx: &CkksContext,
    pk: &PublicKey,
    rng: &mut impl Rng,
) -> Result<AttackSuite> {
    let gen = LinearGenerator::new(cfg.height, cfg.width, cfg.channels, cfg.latent_dim, cfg.noise, rng);
    let total = cfg.n_train + cfg.n_eval;
    let (latents, images): (Vec<Vec<f64>>, Vec<Image>) = (0..total).map(|_| gen.sample(rng)).unzip();
    let p = gen.pixel_dim();
    let mut ct_features = Vec::with_capacity(total);
    for z in &latents {
        let pt = ctx.encode(z, ctx.default_scale(), ctx.max_level())?;
        let ct = ctx.encrypt(pk, &pt, rng)?;
        ct_features.push(ciphertext_byte_features(&serialize_ciphertext(&ct), p)?);
    }
    let n = cfg.n_train;
    let (plaintext, plaintext_recons) = evaluate_attack(
        (&latents[..n], &images[..n]),
        (&latents[n..], &images[n..]),
        cfg.lambda,
        FeatureKind::ClsToken,
    )?;
    let (ciphertext, ciphertext_recons) = evaluate_attack(
        (&ct_features[..n], &images[..n]),
        (&ct_features[n..], &images[n..]),
        cfg.lambda,
        FeatureKind::CiphertextBytes,
    )?;
    Ok(AttackSuite {
        plaintext,
        ciphertext,
        plaintext_recons,
        ciphertext_recons,
        originals: images[n..].to_vec(),
    })
}

/// Writes an image as 8-bit PNG (grayscale for one channel, RGB for three).
pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .pixels
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let color = match img.channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(Error::contract(format!("cannot write a {c}-channel image"))),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    image::save_buffer(path, &bytes, img.width as u32, img.height as u32, color)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}
