use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::infer::SlotLayout;
use super::predicted_class;
use super::{
    aggregate_encrypted, aggregate_tokens, average_heads, decrypt_vector, encrypt_tokens, encrypt_vector,
    encrypted_inference, fit_poly_activation, majority_labels, plaintext_poly_predictions, ClassifierHead,
    ClientBundle, EncryptedToken, GlobalClassifier, Metrics, PolyFit,
};
use crate::ckks::{serialized_size, Ciphertext, CkksContext, CkksParams};
use crate::error::{Error, Result};
use crate::io::{
    chunk_count, deserialize_bundle, deserialize_ciphertext_list, format_f64, serialize_bundle,
    serialize_ciphertext_list, serialize_head, serialize_tokens, write_atomic, CommLedger, PayloadKind, Report, Role,
    TokenFile, LIST_AGGREGATE_GRADIENT, LIST_GRADIENT, LIST_PREDICTIONS,
};
use crate::vit::{
    accuracy, argmax, load_image_dir, pairwise_sum, softmax, synthetic_for, train_local, Dataset, Image, TrainConfig,
    VitConfig, VitModel,
};

/// Published full-scale figures, printed next to measured values and never asserted.
pub struct PaperReference {
    pub encrypted_cls_accuracy: f64,
    pub plaintext_cls_accuracy: f64,
    pub encrypted_gradient_accuracy: f64,
    pub plaintext_gradient_accuracy: f64,
    pub cls_ciphertext_kb: f64,
    pub gradient_ciphertext_kb: f64,
    pub encrypted_ms_per_image: f64,
    pub attack_psnr_db: f64,
    pub attack_ssim: f64,
    pub attack_nmi: f64,
}

pub const PAPER_REFERENCE: PaperReference = PaperReference {
    encrypted_cls_accuracy: 0.9002,
    plaintext_cls_accuracy: 0.9612,
    encrypted_gradient_accuracy: 0.8535,
    plaintext_gradient_accuracy: 0.9505,
    cls_ciphertext_kb: 326.4,
    gradient_ciphertext_kb: 9794.1,
    encrypted_ms_per_image: 66.0,
    attack_psnr_db: 52.26,
    attack_ssim: 0.999,
    attack_nmi: 0.741,
};

/// Independent seed for stream `stream`, index `index` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_DATA: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_KEYS: u64 = 4;
const STREAM_ENCRYPT: u64 = 5;
const STREAM_SPLIT: u64 = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundConfig {
    pub clients: usize,
    pub seed: u64,
    pub vit_profile: String,
    pub ckks_profile: String,
    pub train_per_client: usize,
    pub eval_per_client: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Class-per-subdirectory image folder; synthetic data when absent.
    pub data_dir: Option<PathBuf>,
    /// All clients start from the same initial weights.
    pub shared_init: bool,
    pub poly_lo: f64,
    pub poly_hi: f64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RoundConfig {
    pub fn desk() -> Self {
        Self {
            clients: 3,
            seed: 7,
            vit_profile: "desk".into(),
            ckks_profile: "paper".into(),
            train_per_client: 180,
            eval_per_client: 200,
            epochs: 15,
            learning_rate: 1e-4,
            batch_size: 32,
            data_dir: None,
            shared_init: true,
            poly_lo: -5.0,
            poly_hi: 5.0,
        }
    }

    /// Full-size model and the dataset split sizes of the three-client setup.
    pub fn paper() -> Self {
        Self {
            vit_profile: "paper".into(),
            train_per_client: 728,
            eval_per_client: 364,
            epochs: 30,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::config(format!("unknown round profile `{other}` (desk|paper)"))),
        }
    }

    /// Fields in `text` override the `base` values.
    pub fn from_toml(text: &str, base: &Self) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(text).map_err(|e| Error::config(format!("round config: {e}")))?;
        let mut merged = toml::Table::try_from(base).map_err(|e| Error::config(e.to_string()))?;
        for (k, v) in overrides {
            merged.insert(k, v);
        }
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("round config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("at least one client is required"));
        }
        if self.train_per_client == 0 {
            return Err(Error::config("clients need training samples"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.poly_lo < self.poly_hi) {
            return Err(Error::config("polynomial fit range is empty"));
        }
        VitConfig::by_name(&self.vit_profile)?;
        CkksParams::by_name(&self.ckks_profile)?;
        Ok(())
    }

    fn train_config(&self, client: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: derive_seed(self.seed, STREAM_TRAIN, client as u64),
            ..TrainConfig::paper()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigResult {
    pub name: &'static str,
    pub metrics: Metrics,
    pub bytes_sent: u64,
    /// Payload bytes per sample, excluding the head.
    pub bytes_per_sample: u64,
    /// Where inference runs: `server-encrypted`, `plaintext`, or `unavailable`.
    pub inference: &'static str,
}

#[derive(Clone, Debug)]
pub struct RoundResult {
    pub n_agg: usize,
    pub classes: usize,
    pub classifier: GlobalClassifier,
    pub encrypted_predictions: Vec<Ciphertext>,
    pub decrypted_predictions: Vec<Vec<f64>>,
    pub plaintext_poly_predictions: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub configs: Vec<ConfigResult>,
    /// Fraction of samples where encrypted and plaintext polynomial argmax agree.
    pub argmax_agreement: f64,
    pub max_abs_error: f64,
    pub client_train_accuracy: Vec<f64>,
    pub client_eval_accuracy: Vec<f64>,
    pub ledger: CommLedger,
    /// Wall-clock seconds per stage; not part of the deterministic report.
    pub timings: Vec<(String, f64)>,
    pub token_dim: usize,
    pub pixel_dim: usize,
    pub ring_degree: usize,
    pub slot_count: usize,
    pub chain_bits: Vec<u32>,
    pub fresh_ciphertext_bytes: usize,
}

struct Client {
    id: u32,
    model: VitModel,
    train_accuracy: f64,
    eval: Dataset,
    tokens: Vec<Vec<f64>>,
}

fn client_datasets(cfg: &RoundConfig, vit: &VitConfig) -> Result<Vec<(Dataset, Dataset)>> {
    let per = cfg.train_per_client + cfg.eval_per_client;
    match &cfg.data_dir {
        None => Ok((0..cfg.clients)
            .map(|i| {
                let ds = synthetic_for(vit, per, derive_seed(cfg.seed, STREAM_DATA, i as u64));
                let train: Vec<usize> = (0..cfg.train_per_client).collect();
                let eval: Vec<usize> = (cfg.train_per_client..per).collect();
                (ds.subset(&train), ds.subset(&eval))
            })
            .collect()),
        Some(dir) => {
            let ds = load_image_dir(dir, vit.image_h, vit.image_w)?;
            if ds.class_names.len() != vit.classes {
                return Err(Error::config(format!(
                    "{} classes on disk, model expects {}",
                    ds.class_names.len(),
                    vit.classes
                )));
            }
            if ds.len() < per * cfg.clients {
                return Err(Error::config(format!(
                    "{} images on disk; {} clients need {}",
                    ds.len(),
                    cfg.clients,
                    per * cfg.clients
                )));
            }
            let mut order: Vec<usize> = (0..ds.len()).collect();
            rand::seq::SliceRandom::shuffle(
                order.as_mut_slice(),
                &mut ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SPLIT, 0)),
            );
            Ok(order
                .chunks(per)
                .take(cfg.clients)
                .map(|idx| {
                    (
                        ds.subset(&idx[..cfg.train_per_client]),
                        ds.subset(&idx[cfg.train_per_client..]),
                    )
                })
                .collect())
        }
    }
}

fn flatten(img: &Image) -> &[f64] {
    &img.pixels
}

fn mean_vectors(vs: &[&[f64]]) -> Vec<f64> {
    let n = vs.len() as f64;
    let mut column = vec![0.0; vs.len()];
    (0..vs[0].len())
        .map(|i| {
            for (c, v) in column.iter_mut().zip(vs) {
                *c = v[i];
            }
            pairwise_sum(&column) / n
        })
        .collect()
}

/// Average of the client models' class probabilities.
fn ensemble_predict(models: &[&VitModel], image: &Image) -> Result<usize> {
    let mut probs = vec![0.0; models[0].config().classes];
    for m in models {
        for (p, q) in probs.iter_mut().zip(m.forward(image)?.probs) {
            *p += q;
        }
    }
    Ok(argmax(&probs))
}

struct Timer {
    entries: Vec<(String, f64)>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: impl Into<String>) {
        let now = Instant::now();
        self.entries.push((stage.into(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

fn write_out(dir: Option<&Path>, rel: &str, bytes: &[u8]) -> Result<()> {
    match dir {
        Some(d) => write_atomic(&d.join(rel), bytes),
        None => Ok(()),
    }
}

/// One round: every client trains and extracts, the server aggregates and
/// classifies under encryption, the key holder decrypts, and all four
/// configurations are scored against client-aligned labels.
///
/// With `out_dir`, every message is also written under `client<i>/`, `server/`
/// and `keyholder/`.
pub fn run_round(cfg: &RoundConfig, out_dir: Option<&Path>) -> Result<RoundResult> {
    cfg.validate()?;
    let vit = VitConfig::by_name(&cfg.vit_profile)?;
    let params = CkksParams::by_name(&cfg.ckks_profile)?;
    let mut timer = Timer::new();

    let ctx = CkksContext::new(params.clone()).map_err(|e| e.in_stage("keygen"))?;
    if ctx.max_level() < 4 {
        return Err(Error::config(format!(
            "ckks profile `{}` has {} levels; aggregation plus encrypted inference needs 4",
            cfg.ckks_profile,
            ctx.max_level()
        )));
    }
    SlotLayout::new(vit.hidden_dim, vit.classes, ctx.slot_count()).map_err(|e| e.in_stage("keygen"))?;

    // clients: local data, training, extraction
    let datasets = client_datasets(cfg, &vit).map_err(|e| e.in_stage("data"))?;
    let init_seed = |i: usize| derive_seed(cfg.seed, STREAM_INIT, if cfg.shared_init { 0 } else { i as u64 });
    let mut clients = Vec::with_capacity(cfg.clients);
    for (i, (train, eval)) in datasets.into_iter().enumerate() {
        let mut model = VitModel::init(vit, &mut ChaCha20Rng::seed_from_u64(init_seed(i)))?;
        let report = train_local(&mut model, &train, &cfg.train_config(i)).map_err(|e| e.in_stage("train"))?;
        timer.lap(format!("client.{}.train", i + 1));
        let tokens = eval
            .images
            .iter()
            .map(|img| model.extract_cls(img))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("extract"))?;
        timer.lap(format!("client.{}.extract", i + 1));
        clients.push(Client {
            id: i as u32 + 1,
            model,
            train_accuracy: report.epoch_accuracy.last().copied().unwrap_or(0.0),
            eval,
            tokens,
        });
    }

    // key holder
    let keys = ctx
        .keygen(derive_seed(cfg.seed, STREAM_KEYS, 0))
        .map_err(|e| e.in_stage("keygen"))?;
    timer.lap("keygen");

    // clients -> server
    let mut ledger = CommLedger::new();
    let mut bundles: Vec<ClientBundle> = Vec::with_capacity(cfg.clients);
    let mut gradients: Vec<Vec<EncryptedToken>> = Vec::with_capacity(cfg.clients);
    let pixel_dim = vit.pixel_count();
    for c in &clients {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_ENCRYPT, u64::from(c.id)));
        let head = ClassifierHead::from_model(&c.model);
        let bundle =
            encrypt_tokens(&ctx, &keys.public, c.id, &c.tokens, head, &mut rng).map_err(|e| e.in_stage("encrypt"))?;
        for t in &bundle.tokens {
            let bytes: usize = t.chunks.iter().map(Ciphertext::serialized_size).sum();
            ledger.record(
                Role::Client(c.id),
                Role::Server,
                PayloadKind::ClsToken,
                bytes,
                t.chunks.len(),
            );
        }
        let head_bytes = serialize_head(&bundle.head);
        ledger.record(Role::Client(c.id), Role::Server, PayloadKind::Head, head_bytes.len(), 0);
        let wire = serialize_bundle(&bundle)?;
        write_out(out_dir, &format!("client{}/bundle.fbnd", c.id), &wire)?;
        let tf = TokenFile {
            client_id: c.id,
            dim: vit.hidden_dim,
            tokens: c.tokens.clone(),
            labels: c.eval.labels.clone(),
        };
        write_out(out_dir, &format!("client{}/tokens.ftok", c.id), &serialize_tokens(&tf)?)?;
        timer.lap(format!("client.{}.encrypt_cls", c.id));
        bundles.push(deserialize_bundle(&wire, &ctx).map_err(|e| e.in_stage("server-receive"))?);
        drop(wire);
        timer.lap(format!("client.{}.server_receive", c.id));

        let mut grad_cts = Vec::new();
        let mut grad = Vec::with_capacity(c.eval.len());
        for (j, img) in c.eval.images.iter().enumerate() {
            let chunks =
                encrypt_vector(&ctx, &keys.public, flatten(img), &mut rng).map_err(|e| e.in_stage("encrypt"))?;
            let bytes: usize = chunks.iter().map(Ciphertext::serialized_size).sum();
            ledger.record(
                Role::Client(c.id),
                Role::Server,
                PayloadKind::GradientVector,
                bytes,
                chunks.len(),
            );
            grad_cts.extend(chunks.iter().cloned());
            grad.push(EncryptedToken {
                sample: j as u32,
                chunks,
            });
        }
        if out_dir.is_some() {
            let wire = serialize_ciphertext_list(LIST_GRADIENT, &grad_cts)?;
            write_out(out_dir, &format!("client{}/gradient.fprd", c.id), &wire)?;
        }
        gradients.push(grad);
        timer.lap(format!("client.{}.encrypt_gradient", c.id));
    }

    // server
    let means = aggregate_encrypted(&ctx, &bundles).map_err(|e| e.in_stage("aggregate"))?;
    let n_agg = means.len();
    let heads: Vec<ClassifierHead> = bundles.iter().map(|b| b.head.clone()).collect();
    let classifier = GlobalClassifier {
        head: average_heads(&heads).map_err(|e| e.in_stage("aggregate"))?,
        poly: fit_poly_activation(cfg.poly_lo, cfg.poly_hi).map_err(|e| e.in_stage("aggregate"))?,
    };
    let grad_sets: Vec<&[EncryptedToken]> = gradients.iter().map(Vec::as_slice).collect();
    let grad_means = aggregate_tokens(&ctx, &grad_sets, pixel_dim).map_err(|e| e.in_stage("aggregate"))?;
    drop(gradients);
    timer.lap("aggregate");

    let mut predictions = Vec::with_capacity(n_agg);
    for m in &means {
        let ct = encrypted_inference(&ctx, &classifier, &m.chunks[0], &keys.galois, &keys.relin)
            .map_err(|e| e.in_stage("infer"))?;
        predictions.push(ct);
    }
    timer.lap("infer");
    let pred_wire = serialize_ciphertext_list(LIST_PREDICTIONS, &predictions)?;
    let pred_chunks = predictions.len();
    ledger.record(
        Role::Server,
        Role::KeyHolder,
        PayloadKind::Predictions,
        pred_wire.len(),
        pred_chunks,
    );
    write_out(out_dir, "server/predictions.fprd", &pred_wire)?;
    let grad_flat: Vec<Ciphertext> = grad_means.iter().flat_map(|t| t.chunks.iter().cloned()).collect();
    let grad_wire = serialize_ciphertext_list(LIST_AGGREGATE_GRADIENT, &grad_flat)?;
    ledger.record(
        Role::Server,
        Role::KeyHolder,
        PayloadKind::AggregateMean,
        grad_wire.len(),
        grad_flat.len(),
    );
    write_out(out_dir, "server/gradient_mean.fprd", &grad_wire)?;

    // key holder
    let (_, received) = deserialize_ciphertext_list(&pred_wire, &ctx).map_err(|e| e.in_stage("decrypt"))?;
    let decrypted = received
        .iter()
        .map(|ct| decrypt_vector(&ctx, &keys.secret, std::slice::from_ref(ct), vit.classes))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("decrypt"))?;
    let (_, grad_received) = deserialize_ciphertext_list(&grad_wire, &ctx).map_err(|e| e.in_stage("decrypt"))?;
    let per_sample = chunk_count(pixel_dim, ctx.slot_count())?;
    let mean_images = grad_received
        .chunks(per_sample)
        .map(|chunks| decrypt_vector(&ctx, &keys.secret, chunks, pixel_dim))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("decrypt"))?;
    drop(pred_wire);
    drop(grad_wire);
    timer.lap("decrypt");

    // scoring
    let label_sets: Vec<&[usize]> = clients.iter().map(|c| c.eval.labels.as_slice()).collect();
    let labels = majority_labels(&label_sets, n_agg)?;
    let k = vit.classes;

    let enc_cls: Vec<usize> = decrypted.iter().map(|v| predicted_class(v, k)).collect();
    let mean_tokens: Vec<Vec<f64>> = (0..n_agg)
        .map(|j| {
            let toks: Vec<&[f64]> = clients.iter().map(|c| c.tokens[j].as_slice()).collect();
            mean_vectors(&toks)
        })
        .collect();
    let poly_ref: Vec<Vec<f64>> = mean_tokens
        .iter()
        .map(|t| plaintext_poly_predictions(&classifier, t))
        .collect();
    timer.lap("score_prepare");
    let plain_cls: Vec<usize> = mean_tokens
        .iter()
        .map(|t| argmax(&softmax(&classifier.head.logits(t))))
        .collect();
    timer.lap("infer_plaintext_cls");
    let agree = enc_cls
        .iter()
        .zip(&poly_ref)
        .filter(|(&e, p)| e == predicted_class(p, k))
        .count();
    let max_abs_error = decrypted
        .iter()
        .zip(&poly_ref)
        .flat_map(|(d, p)| d.iter().zip(p).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);

    let models: Vec<&VitModel> = clients.iter().map(|c| &c.model).collect();
    let mut plain_grad = Vec::with_capacity(n_agg);
    for j in 0..n_agg {
        let imgs: Vec<&[f64]> = clients.iter().map(|c| flatten(&c.eval.images[j])).collect();
        let mean = Image::new(vit.image_h, vit.image_w, vit.channels, mean_vectors(&imgs))?;
        plain_grad.push(ensemble_predict(&models, &mean)?);
    }
    timer.lap("infer_plaintext_gradient");
    let mut enc_grad = Vec::with_capacity(n_agg);
    for dec in &mean_images {
        let dec = Image::new(vit.image_h, vit.image_w, vit.channels, dec.clone())?;
        enc_grad.push(ensemble_predict(&models, &dec)?);
    }
    timer.lap("score_gradient");

    let summary = ledger.summary();
    let kind_bytes = |kind| summary.bytes_by_kind.get(&kind).copied().unwrap_or(0);
    let head_bytes = kind_bytes(PayloadKind::Head);
    let total_tokens: u64 = clients.iter().map(|c| c.tokens.len() as u64).sum();
    let per_sample = |b: u64| if total_tokens == 0 { 0 } else { b / total_tokens };
    let configs = vec![
        ConfigResult {
            name: "encrypted_cls",
            metrics: Metrics::compute(&labels, &enc_cls, k)?,
            bytes_sent: kind_bytes(PayloadKind::ClsToken) + head_bytes,
            bytes_per_sample: per_sample(kind_bytes(PayloadKind::ClsToken)),
            inference: "server-encrypted",
        },
        ConfigResult {
            name: "plaintext_cls",
            metrics: Metrics::compute(&labels, &plain_cls, k)?,
            bytes_sent: total_tokens * vit.hidden_dim as u64 * 8 + head_bytes,
            bytes_per_sample: vit.hidden_dim as u64 * 8,
            inference: "plaintext",
        },
        ConfigResult {
            name: "encrypted_gradient",
            metrics: Metrics::compute(&labels, &enc_grad, k)?,
            bytes_sent: kind_bytes(PayloadKind::GradientVector),
            bytes_per_sample: per_sample(kind_bytes(PayloadKind::GradientVector)),
            inference: "unavailable",
        },
        ConfigResult {
            name: "plaintext_gradient",
            metrics: Metrics::compute(&labels, &plain_grad, k)?,
            bytes_sent: total_tokens * pixel_dim as u64 * 8,
            bytes_per_sample: pixel_dim as u64 * 8,
            inference: "plaintext",
        },
    ];

    let client_eval_accuracy = clients
        .iter()
        .map(|c| accuracy(&c.model, &c.eval))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundResult {
        n_agg,
        classes: k,
        classifier,
        encrypted_predictions: predictions,
        decrypted_predictions: decrypted,
        plaintext_poly_predictions: poly_ref,
        labels,
        configs,
        argmax_agreement: if n_agg == 0 { 1.0 } else { agree as f64 / n_agg as f64 },
        max_abs_error,
        client_train_accuracy: clients.iter().map(|c| c.train_accuracy).collect(),
        client_eval_accuracy,
        ledger,
        timings: timer.entries,
        token_dim: vit.hidden_dim,
        pixel_dim,
        ring_degree: ctx.ring_degree(),
        slot_count: ctx.slot_count(),
        chain_bits: params.prime_bits.clone(),
        fresh_ciphertext_bytes: serialized_size(ctx.ring_degree(), ctx.max_level(), 2),
    })
}

fn push_poly(r: &mut Report, p: &PolyFit) {
    r.push_f64("poly.a0", p.coeffs[0]);
    r.push_f64("poly.a1", p.coeffs[1]);
    r.push_f64("poly.a2", p.coeffs[2]);
    r.push_f64("poly.range_lo", p.lo);
    r.push_f64("poly.range_hi", p.hi);
    r.push_f64("poly.rms", p.rms);
    r.push_f64("poly.max_abs_error", p.max_abs_error);
    r.push_f64("poly.nonmonotone_fraction", p.nonmonotone_fraction);
    r.push("poly.target", "logistic");
}

impl RoundResult {
    /// Deterministic results; wall times live in [`timings_report`](Self::timings_report).
    pub fn report(&self, cfg: &RoundConfig) -> Report {
        let mut r = Report::new("round");
        r.push("config.seed", cfg.seed);
        r.push("config.clients", cfg.clients);
        r.push("config.vit_profile", &cfg.vit_profile);
        r.push("config.ckks_profile", &cfg.ckks_profile);
        r.push("config.train_per_client", cfg.train_per_client);
        r.push("config.eval_per_client", cfg.eval_per_client);
        r.push("config.epochs", cfg.epochs);
        r.push_f64("config.learning_rate", cfg.learning_rate);
        r.push("config.batch_size", cfg.batch_size);
        r.push("config.shared_init", cfg.shared_init);
        r.push(
            "config.data",
            cfg.data_dir
                .as_ref()
                .map_or("synthetic".to_string(), |d| d.display().to_string()),
        );
        r.push("config.pixel_dim", self.pixel_dim);
        r.push("config.token_dim", self.token_dim);
        r.push("ckks.ring_degree", self.ring_degree);
        r.push("ckks.slots", self.slot_count);
        r.push(
            "ckks.chain_bits",
            self.chain_bits.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        );
        r.push("ckks.fresh_ciphertext_bytes", self.fresh_ciphertext_bytes);
        r.push("n_agg", self.n_agg);
        r.push("labels.rule", "majority-across-clients,ties-to-client-1");
        for (i, (tr, ev)) in self
            .client_train_accuracy
            .iter()
            .zip(&self.client_eval_accuracy)
            .enumerate()
        {
            r.push_f64(format!("client.{}.train_accuracy", i + 1), *tr);
            r.push_f64(format!("client.{}.eval_accuracy", i + 1), *ev);
        }
        push_poly(&mut r, &self.classifier.poly);
        for c in &self.configs {
            let p = format!("result.{}", c.name);
            r.push_f64(format!("{p}.accuracy"), c.metrics.accuracy);
            r.push_f64(format!("{p}.f1"), c.metrics.f1);
            r.push_f64(format!("{p}.precision"), c.metrics.precision);
            r.push_f64(format!("{p}.recall"), c.metrics.recall);
            r.push(format!("{p}.bytes_sent"), c.bytes_sent);
            r.push(format!("{p}.bytes_per_sample"), c.bytes_per_sample);
            r.push(format!("{p}.inference"), c.inference);
        }
        r.push_f64("agreement.encrypted_vs_poly_argmax", self.argmax_agreement);
        r.push_f64("agreement.max_abs_error", self.max_abs_error);

        let s = self.ledger.summary();
        r.push("ledger.messages", s.messages);
        r.push("ledger.total_bytes", s.total_bytes);
        r.push("ledger.total_chunks", s.total_chunks);
        for (role, b) in &s.bytes_by_sender {
            r.push(format!("ledger.sender.{role}.bytes"), b);
        }
        for (kind, b) in &s.bytes_by_kind {
            r.push(format!("ledger.kind.{}.bytes", kind.name()), b);
            r.push(format!("ledger.kind.{}.chunks", kind.name()), s.chunks_by_kind[kind]);
        }
        if let Some(ratio) = s.gradient_to_cls_ratio() {
            r.push_f64("ledger.ratio.gradient_to_cls", ratio);
        }
        push_table2(&mut r, self.ring_degree, self.chain_bits.len());
        push_references(&mut r);
        r
    }

    pub fn timings_report(&self, cfg: &RoundConfig) -> Report {
        let mut r = Report::new("timings");
        let secs = |stage: &str| self.timings.iter().find(|(s, _)| s == stage).map(|(_, t)| *t);
        for (stage, t) in &self.timings {
            r.push_f64(format!("seconds.{stage}"), *t);
        }
        for i in 1..=cfg.clients {
            if let Some(t) = secs(&format!("client.{i}.train")) {
                r.push_f64(
                    format!("client.{i}.train_seconds_per_epoch"),
                    t / cfg.epochs.max(1) as f64,
                );
            }
            if let Some(t) = secs(&format!("client.{i}.encrypt_cls")) {
                r.push_f64(format!("client.{i}.encrypt_cls_seconds"), t);
            }
        }
        if self.n_agg > 0 {
            for (stage, key) in [
                ("infer", "encrypted_cls"),
                ("infer_plaintext_cls", "plaintext_cls"),
                ("infer_plaintext_gradient", "plaintext_gradient"),
            ] {
                if let Some(t) = secs(stage) {
                    r.push_f64(format!("infer.{key}.ms_per_image"), t * 1e3 / self.n_agg as f64);
                }
            }
        }
        r.push_f64(
            "reference.paper.encrypted_ms_per_image",
            PAPER_REFERENCE.encrypted_ms_per_image,
        );
        r
    }
}

/// Per-sample sizes at the paper's token and image dimensions for a fresh
/// ciphertext of this ring.
pub(crate) fn push_table2(r: &mut Report, ring_degree: usize, levels: usize) {
    let slots = ring_degree / 2;
    let ct = serialized_size(ring_degree, levels, 2);
    for (name, dim) in [("cls", 768usize), ("gradient", 120_000)] {
        let chunks = chunk_count(dim, slots).expect("positive");
        r.push(format!("table2.{name}.dim"), dim);
        r.push(format!("table2.{name}.chunks"), chunks);
        r.push(format!("table2.{name}.bytes"), chunks * ct);
        r.push(
            format!("table2.{name}.kb"),
            format!("{:.1}", (chunks * ct) as f64 / 1024.0),
        );
    }
    let ratio =
        chunk_count(120_000, slots).expect("positive") as f64 / chunk_count(768, slots).expect("positive") as f64;
    r.push("table2.ratio", format_f64(ratio));
}

pub(crate) fn push_references(r: &mut Report) {
    let p = &PAPER_REFERENCE;
    r.push(
        "reference.status",
        "published full-scale values; not reproduced at desk scale",
    );
    r.push_f64("reference.paper.encrypted_cls_accuracy", p.encrypted_cls_accuracy);
    r.push_f64("reference.paper.plaintext_cls_accuracy", p.plaintext_cls_accuracy);
    r.push_f64(
        "reference.paper.encrypted_gradient_accuracy",
        p.encrypted_gradient_accuracy,
    );
    r.push_f64(
        "reference.paper.plaintext_gradient_accuracy",
        p.plaintext_gradient_accuracy,
    );
    r.push_f64("reference.paper.cls_ciphertext_kb", p.cls_ciphertext_kb);
    r.push_f64("reference.paper.gradient_ciphertext_kb", p.gradient_ciphertext_kb);
}
