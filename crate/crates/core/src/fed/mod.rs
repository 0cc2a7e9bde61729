//! Client, aggregation-server and key-holder roles of one federated round.

mod infer;
mod metrics;
mod poly;
mod round;

use rand::Rng;

pub use infer::{
    encrypted_inference, encrypted_matvec, encrypted_poly_activation, plaintext_logits, plaintext_poly_predictions,
    predicted_class, required_rotations, SlotLayout,
};
pub use metrics::{majority_labels, Metrics};
pub use poly::{fit_poly_activation, fit_quadratic, sigmoid, uniform_grid, PolyFit, POLY_GRID_POINTS, POLY_RANGE};
pub use round::{derive_seed, run_round, ConfigResult, RoundConfig, RoundResult, PAPER_REFERENCE};

use crate::ckks::{Ciphertext, CkksContext, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::io::chunk_count;
use crate::vit::{softmax, Dataset, VitModel};

/// Linear classification head, `weights` row-major `[classes, dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ClassifierHead {
    pub fn new(classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::contract("classifier head needs positive dimensions"));
        }
        if weights.len() != classes * dim || bias.len() != classes {
            return Err(Error::contract(format!(
                "head shapes {}x? / {} do not match {classes}x{dim}",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite head parameter".into()));
        }
        Ok(Self {
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn from_model(model: &VitModel) -> Self {
        let cfg = model.config();
        let (w, b) = model.head();
        Self {
            classes: cfg.classes,
            dim: cfg.hidden_dim,
            weights: w,
            bias: b,
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    pub fn logits(&self, token: &[f64]) -> Vec<f64> {
        plaintext_logits(self, token)
    }

    pub fn softmax(&self, token: &[f64]) -> Vec<f64> {
        softmax(&self.logits(token))
    }
}

/// Averaged head plus the polynomial that replaces the output activation.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalClassifier {
    pub head: ClassifierHead,
    pub poly: PolyFit,
}

/// One sample's token, possibly split over several ciphertexts.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedToken {
    pub sample: u32,
    pub chunks: Vec<Ciphertext>,
}

/// Everything a client sends to the server. Labels stay with the client.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientBundle {
    pub client_id: u32,
    pub dim: usize,
    pub tokens: Vec<EncryptedToken>,
    pub head: ClassifierHead,
}

impl ClientBundle {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Encrypts `values` into `chunk_count(len, slots)` top-level ciphertexts at the default scale.
pub fn encrypt_vector(
    ctx: &CkksContext,
    pk: &PublicKey,
    values: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<Ciphertext>> {
    let slots = ctx.slot_count();
    let chunks = chunk_count(values.len(), slots)?;
    let (scale, level) = (ctx.default_scale(), ctx.max_level());
    (0..chunks)
        .map(|c| {
            let part = &values[c * slots..((c + 1) * slots).min(values.len())];
            ctx.encrypt(pk, &ctx.encode(part, scale, level)?, rng)
        })
        .collect()
}

pub fn decrypt_vector(ctx: &CkksContext, sk: &SecretKey, chunks: &[Ciphertext], dim: usize) -> Result<Vec<f64>> {
    let slots = ctx.slot_count();
    let expected = chunk_count(dim, slots)?;
    if chunks.len() != expected {
        return Err(Error::contract(format!(
            "{} chunks for a {dim}-long vector; expected {expected}",
            chunks.len()
        )));
    }
    let mut out = Vec::with_capacity(dim);
    for ct in chunks {
        let vals = ctx.decrypt_decode(sk, ct)?;
        let take = (dim - out.len()).min(slots);
        out.extend_from_slice(&vals[..take]);
    }
    Ok(out)
}

/// Encrypts already-extracted tokens into a server-bound bundle.
pub fn encrypt_tokens(
    ctx: &CkksContext,
    pk: &PublicKey,
    client_id: u32,
    tokens: &[Vec<f64>],
    head: ClassifierHead,
    rng: &mut impl Rng,
) -> Result<ClientBundle> {
    let dim = head.dim;
    let mut out = Vec::with_capacity(tokens.len());
    for (j, t) in tokens.iter().enumerate() {
        if t.len() != dim {
            return Err(Error::contract(format!(
                "token {j} has length {}, head expects {dim}",
                t.len()
            )));
        }
        out.push(EncryptedToken {
            sample: j as u32,
            chunks: encrypt_vector(ctx, pk, t, rng)?,
        });
    }
    Ok(ClientBundle {
        client_id,
        dim,
        tokens: out,
        head,
    })
}

/// Extracts the CLS token of every sample and encrypts it.
pub fn client_encrypt_tokens(
    ctx: &CkksContext,
    pk: &PublicKey,
    model: &VitModel,
    dataset: &Dataset,
    client_id: u32,
    rng: &mut impl Rng,
) -> Result<ClientBundle> {
    let tokens = dataset
        .images
        .iter()
        .map(|img| model.extract_cls(img))
        .collect::<Result<Vec<_>>>()?;
    encrypt_tokens(ctx, pk, client_id, &tokens, ClassifierHead::from_model(model), rng)
}

/// `(1/N) * sum` of same-level ciphertexts: additions, one plaintext product by
/// `1/N` encoded at the scale of the last prime, then a rescale.
pub fn mean_ciphertexts(ctx: &CkksContext, cts: &[&Ciphertext]) -> Result<Ciphertext> {
    let (first, rest) = cts
        .split_first()
        .ok_or_else(|| Error::contract("nothing to aggregate"))?;
    let mut acc = (*first).clone();
    for ct in rest {
        ctx.add_assign(&mut acc, ct)?;
    }
    let level = acc.level();
    let inv = ctx.encode_constant(1.0 / cts.len() as f64, ctx.last_prime(level) as f64, level)?;
    ctx.rescale(&ctx.mul_plain(&acc, &inv)?)
}

/// Encrypted slotwise mean of token `j` over all clients, for `j < min n_i`.
///
/// Tokens are aligned by sorted sample index. The inputs hold no secret key.
pub fn aggregate_encrypted(ctx: &CkksContext, bundles: &[ClientBundle]) -> Result<Vec<EncryptedToken>> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::contract("aggregation needs at least one bundle"))?;
    if let Some(b) = bundles.iter().find(|b| b.dim != first.dim) {
        return Err(Error::contract(format!(
            "client {} sends {}-dim tokens, client {} sends {}",
            b.client_id, b.dim, first.client_id, first.dim
        )));
    }
    let sets: Vec<&[EncryptedToken]> = bundles.iter().map(|b| b.tokens.as_slice()).collect();
    aggregate_tokens(ctx, &sets, first.dim)
}

/// [`aggregate_encrypted`] over bare token lists of a common dimension.
pub fn aggregate_tokens(
    ctx: &CkksContext,
    per_client: &[&[EncryptedToken]],
    dim: usize,
) -> Result<Vec<EncryptedToken>> {
    if per_client.is_empty() {
        return Err(Error::contract("aggregation needs at least one client"));
    }
    let n_agg = per_client.iter().map(|t| t.len()).min().unwrap_or(0);
    let sorted: Vec<Vec<&EncryptedToken>> = per_client
        .iter()
        .map(|toks| {
            let mut v: Vec<&EncryptedToken> = toks.iter().collect();
            v.sort_by_key(|t| t.sample);
            v
        })
        .collect();
    let chunks = chunk_count(dim, ctx.slot_count())?;
    let mut out = Vec::with_capacity(n_agg);
    for j in 0..n_agg {
        let mut means = Vec::with_capacity(chunks);
        for c in 0..chunks {
            let parts = sorted
                .iter()
                .map(|toks| {
                    toks[j]
                        .chunks
                        .get(c)
                        .ok_or_else(|| Error::contract(format!("token {} is missing chunk {c}", toks[j].sample)))
                })
                .collect::<Result<Vec<_>>>()?;
            means.push(mean_ciphertexts(ctx, &parts)?);
        }
        out.push(EncryptedToken {
            sample: j as u32,
            chunks: means,
        });
    }
    Ok(out)
}

/// Elementwise mean of client heads, summed pairwise.
pub fn average_heads(heads: &[ClassifierHead]) -> Result<ClassifierHead> {
    let first = heads.first().ok_or_else(|| Error::contract("no heads to average"))?;
    if heads.iter().any(|h| h.classes != first.classes || h.dim != first.dim) {
        return Err(Error::contract("heads disagree on shape"));
    }
    let n = heads.len() as f64;
    let mean_of = |get: &dyn Fn(&ClassifierHead) -> &[f64], len: usize| -> Vec<f64> {
        let mut column = vec![0.0; heads.len()];
        (0..len)
            .map(|i| {
                for (c, h) in column.iter_mut().zip(heads) {
                    *c = get(h)[i];
                }
                crate::vit::pairwise_sum(&column) / n
            })
            .collect()
    };
    let weights = mean_of(&|h| &h.weights, first.weights.len());
    let bias = mean_of(&|h| &h.bias, first.bias.len());
    ClassifierHead::new(first.classes, first.dim, weights, bias)
}
