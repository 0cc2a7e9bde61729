//! Server-side encrypted classification of packed tokens.
//!
//! Slot layout: the token occupies slots `0..dim`. It is replicated into
//! `copies` blocks of `block = next_pow2(dim)` slots, multiplied by the packed
//! rows (`slot k*block + t` holds `W[k][t]`), and each block is folded into its
//! first slot with a rotate-and-add tree. Class `k` therefore lands in slot
//! `k*block` until the final pack moves it to slot `k`.

use super::{ClassifierHead, GlobalClassifier};
use crate::ckks::{Ciphertext, CkksContext, GaloisKeys, RelinKey};
use crate::error::{Error, Result};
use crate::vit::argmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotLayout {
    pub dim: usize,
    pub classes: usize,
    pub block: usize,
    pub copies: usize,
}

impl SlotLayout {
    pub fn new(dim: usize, classes: usize, slot_count: usize) -> Result<Self> {
        if dim == 0 || classes == 0 {
            return Err(Error::contract("layout needs positive dimensions"));
        }
        let block = dim.next_power_of_two();
        let copies = classes.next_power_of_two();
        if block * copies > slot_count {
            return Err(Error::config(format!(
                "{classes} classes of {dim}-dim rows need {} slots; only {slot_count} available",
                block * copies
            )));
        }
        Ok(Self {
            dim,
            classes,
            block,
            copies,
        })
    }

    fn packed_rows(&self, head: &ClassifierHead) -> Vec<f64> {
        let mut v = vec![0.0; self.block * self.copies];
        for k in 0..self.classes {
            v[k * self.block..k * self.block + self.dim].copy_from_slice(head.row(k));
        }
        v
    }

    /// `vals[k]` at slot `k*block`, zero elsewhere.
    fn at_blocks(&self, vals: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.block * self.copies];
        for (k, &x) in vals.iter().enumerate().take(self.classes) {
            v[k * self.block] = x;
        }
        v
    }

    fn mask(&self, value: f64) -> Vec<f64> {
        self.at_blocks(&vec![value; self.classes])
    }
}

/// Left-rotation steps the encrypted head uses, for key generation.
pub fn required_rotations(layout: &SlotLayout, slot_count: usize) -> Vec<i64> {
    let mut steps = Vec::new();
    let mut c = 1;
    while c < layout.copies {
        steps.push(-((c * layout.block) as i64));
        c <<= 1;
    }
    let mut s = 1;
    while s < layout.block {
        steps.push(s as i64);
        s <<= 1;
    }
    for k in 1..layout.classes {
        steps.push((k * layout.block - k) as i64 % slot_count as i64);
    }
    steps
}

pub fn plaintext_logits(head: &ClassifierHead, token: &[f64]) -> Vec<f64> {
    (0..head.classes)
        .map(|k| head.row(k).iter().zip(token).map(|(w, z)| w * z).sum::<f64>() + head.bias[k])
        .collect()
}

/// The reference pipeline the encrypted path computes: `a0 + a1 l + a2 l^2` of the logits.
pub fn plaintext_poly_predictions(clf: &GlobalClassifier, token: &[f64]) -> Vec<f64> {
    plaintext_logits(&clf.head, token)
        .iter()
        .map(|&l| clf.poly.eval(l))
        .collect()
}

fn check_token(ctx: &CkksContext, head: &ClassifierHead, ct: &Ciphertext) -> Result<SlotLayout> {
    if ct.component_count() != 2 {
        return Err(Error::contract("encrypted head needs a relinearized ciphertext"));
    }
    SlotLayout::new(head.dim, head.classes, ctx.slot_count())
}

fn replicate(ctx: &CkksContext, ct: &Ciphertext, layout: &SlotLayout, gk: &GaloisKeys) -> Result<Ciphertext> {
    let mut r = ct.clone();
    let mut c = 1;
    while c < layout.copies {
        let shifted = ctx.rotate(&r, -((c * layout.block) as i64), gk)?;
        ctx.add_assign(&mut r, &shifted)?;
        c <<= 1;
    }
    Ok(r)
}

fn fold_blocks(ctx: &CkksContext, ct: &Ciphertext, layout: &SlotLayout, gk: &GaloisKeys) -> Result<Ciphertext> {
    let mut r = ct.clone();
    let mut s = 1;
    while s < layout.block {
        let shifted = ctx.rotate(&r, s as i64, gk)?;
        ctx.add_assign(&mut r, &shifted)?;
        s <<= 1;
    }
    Ok(r)
}

/// Moves slot `k*block` to slot `k`; every other slot must already be zero.
fn pack(ctx: &CkksContext, ct: &Ciphertext, layout: &SlotLayout, gk: &GaloisKeys) -> Result<Ciphertext> {
    let mut out = ct.clone();
    for k in 1..layout.classes {
        let moved = ctx.rotate(ct, (k * layout.block - k) as i64, gk)?;
        ctx.add_assign(&mut out, &moved)?;
    }
    Ok(out)
}

fn require_level(ct: &Ciphertext, needed: usize, what: &str) -> Result<()> {
    if ct.level() < needed {
        return Err(Error::BudgetExhausted(format!(
            "{what} needs level {needed}, ciphertext is at level {}",
            ct.level()
        )));
    }
    Ok(())
}

/// Encrypted `W z + b`, packed into slots `0..classes` at the input scale.
/// Consumes two levels.
pub fn encrypted_matvec(
    ctx: &CkksContext,
    head: &ClassifierHead,
    ct: &Ciphertext,
    gk: &GaloisKeys,
) -> Result<Ciphertext> {
    let layout = check_token(ctx, head, ct)?;
    require_level(ct, 3, "encrypted matvec")?;
    let level = ct.level();
    // weights at the dropped prime's scale so the rescale restores the input scale
    let w = ctx.encode(&layout.packed_rows(head), ctx.last_prime(level) as f64, level)?;
    let prod = ctx.mul_plain(&replicate(ctx, ct, &layout, gk)?, &w)?;
    let folded = ctx.rescale(&fold_blocks(ctx, &prod, &layout, gk)?)?;
    let level = folded.level();
    let bias = ctx.encode(&layout.at_blocks(&head.bias), folded.scale(), level)?;
    let logits = ctx.add_plain(&folded, &bias)?;
    let mask = ctx.encode(&layout.mask(1.0), ctx.last_prime(level) as f64, level)?;
    let masked = ctx.rescale(&ctx.mul_plain(&logits, &mask)?)?;
    pack(ctx, &masked, &layout, gk)
}

/// Slotwise `a0 + a1 x + a2 x^2`. Consumes one level.
///
/// The squared term is formed as `x * (a2 x)` with `a2` encoded at an auxiliary
/// scale `2^k`, chosen as large as the remaining modulus allows (at most 2^40).
pub fn encrypted_poly_activation(
    ctx: &CkksContext,
    ct: &Ciphertext,
    coeffs: [f64; 3],
    rlk: &RelinKey,
) -> Result<Ciphertext> {
    require_level(ct, 2, "polynomial activation")?;
    if ct.component_count() != 2 {
        return Err(Error::contract("polynomial activation needs a relinearized ciphertext"));
    }
    let [a0, a1, a2] = coeffs;
    let level = ct.level();
    let s = ct.scale();
    let q_last = ctx.last_prime(level) as f64;
    let headroom = ctx.log_modulus(level - 1) - 10.0 + q_last.log2() - 2.0 * s.log2();
    let k = headroom.floor().min(40.0);
    if k < 20.0 {
        return Err(Error::BudgetExhausted(format!(
            "only 2^{k} of scale headroom left for the squared term"
        )));
    }
    let aux = 2f64.powf(k);
    let a2x = ctx.mul_plain(ct, &ctx.encode_constant(a2, aux, level)?)?;
    let sq = ctx.relinearize(&ctx.mul(ct, &a2x)?, rlk)?;
    let lin = ctx.mul_plain(ct, &ctx.encode_constant(a1, sq.scale() / s, level)?)?;
    let y = ctx.rescale(&ctx.add(&sq, &lin)?)?;
    ctx.add_plain(&y, &ctx.encode_constant(a0, y.scale(), y.level())?)
}

/// Matvec, bias and polynomial consuming two levels, for a token at level >= 3.
///
/// With `lambda^3 = F * q'` (F the target output scale, q' the second prime
/// dropped), the weights go in at `lambda * q / s`, the quadratic coefficient at
/// `lambda` and the linear one at `lambda^2`, so both polynomial terms meet at
/// scale `lambda^3` and the last rescale leaves `F`.
pub fn encrypted_inference(
    ctx: &CkksContext,
    clf: &GlobalClassifier,
    ct: &Ciphertext,
    gk: &GaloisKeys,
    rlk: &RelinKey,
) -> Result<Ciphertext> {
    let layout = check_token(ctx, &clf.head, ct)?;
    require_level(ct, 3, "encrypted inference")?;
    let [a0, a1, a2] = clf.poly.coeffs;
    let level = ct.level();
    let q_a = ctx.last_prime(level) as f64;
    let q_b = ctx.last_prime(level - 1) as f64;
    let log_f = (ctx.log_modulus(level - 2) - 10.0).floor().min(60.0);
    let lambda = 2f64.powf(((log_f + q_b.log2()) / 3.0).round());
    let w_scale = lambda * q_a / ct.scale();
    if w_scale < (1u64 << 20) as f64 {
        return Err(Error::BudgetExhausted(format!(
            "input scale {:e} leaves too little room for the weights",
            ct.scale()
        )));
    }

    let w = ctx.encode(&layout.packed_rows(&clf.head), w_scale, level)?;
    let prod = ctx.mul_plain(&replicate(ctx, ct, &layout, gk)?, &w)?;
    let folded = fold_blocks(ctx, &prod, &layout, gk)?;
    let bias = ctx.encode(&layout.at_blocks(&clf.head.bias), folded.scale(), level)?;
    let logits = ctx.add_plain(&folded, &bias)?;
    let quad = ctx.mul_plain(&logits, &ctx.encode(&layout.mask(a2), lambda, level)?)?;
    let l = ctx.rescale(&logits)?;
    let m = ctx.rescale(&quad)?;

    let level = l.level();
    let sq = ctx.relinearize(&ctx.mul(&l, &m)?, rlk)?;
    let lin = ctx.mul_plain(&l, &ctx.encode(&layout.mask(a1), sq.scale() / l.scale(), level)?)?;
    let y = ctx.rescale(&ctx.add(&sq, &lin)?)?;
    let y = ctx.add_plain(&y, &ctx.encode(&layout.mask(a0), y.scale(), y.level())?)?;
    pack(ctx, &y, &layout, gk)
}

/// Argmax over the first `classes` decrypted slots.
pub fn predicted_class(values: &[f64], classes: usize) -> usize {
    argmax(&values[..classes.min(values.len())])
}
