use num_complex::Complex64;

use super::params::CkksParams;
use crate::error::{Error, Result};
use crate::ring::{ntt_primes, PrimeRing};

/// Everything derived from [`CkksParams`]: prime rings, encoder tables and
/// the constants used by rescaling, decoding and key switching.
#[derive(Debug)]
pub struct CkksContext {
    params: CkksParams,
    /// Chain primes followed by the special prime.
    rings: Vec<PrimeRing>,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
    /// `garner_prefix[i][j] = (q_0 * ... * q_{j-1}) mod q_i` for `j <= i`.
    garner_prefix: Vec<Vec<u64>>,
    garner_inv: Vec<u64>,
    /// Special prime modulo each chain prime, and its inverse.
    special_mod: Vec<u64>,
    special_inv: Vec<u64>,
    /// Slot index for each odd exponent of psi.
    slot_of_exponent: Vec<usize>,
}

impl CkksContext {
    pub fn new(params: CkksParams) -> Result<Self> {
        params.validate()?;
        let n = params.ring_degree;
        let chain = ntt_primes(&params.prime_bits, n, &[])?;
        let special = ntt_primes(&[params.special_bits], n, &chain)?[0];
        let mut rings = Vec::with_capacity(chain.len() + 1);
        for &q in chain.iter().chain(std::iter::once(&special)) {
            rings.push(PrimeRing::new(q, n)?);
        }

        let m = 2 * n;
        let slots = n / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64))
            .collect();

        let levels = chain.len();
        let mut garner_prefix = Vec::with_capacity(levels);
        let mut garner_inv = Vec::with_capacity(levels);
        for (i, ring) in rings.iter().take(levels).enumerate() {
            let q = ring.modulus();
            let mut row = Vec::with_capacity(i + 1);
            let mut acc = 1u64;
            for &qj in chain.iter().take(i) {
                row.push(acc);
                acc = q.mul(acc, q.reduce(qj));
            }
            row.push(acc);
            garner_inv.push(
                q.inv(acc)
                    .ok_or_else(|| Error::config("chain primes are not distinct"))?,
            );
            garner_prefix.push(row);
        }

        let mut special_mod = Vec::with_capacity(levels);
        let mut special_inv = Vec::with_capacity(levels);
        for ring in rings.iter().take(levels) {
            let q = ring.modulus();
            let p = q.reduce(special);
            special_mod.push(p);
            special_inv.push(
                q.inv(p)
                    .ok_or_else(|| Error::config("special prime collides with chain"))?,
            );
        }

        let mut slot_of_exponent = vec![usize::MAX; m];
        for i in 0..n {
            slot_of_exponent[rings[0].eval_exponent(i)] = i;
        }

        Ok(Self {
            params,
            rings,
            rot_group,
            ksi_pows,
            garner_prefix,
            garner_inv,
            special_mod,
            special_inv,
            slot_of_exponent,
        })
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn ring_degree(&self) -> usize {
        self.params.ring_degree
    }

    pub fn slot_count(&self) -> usize {
        self.params.ring_degree / 2
    }

    pub fn max_level(&self) -> usize {
        self.rings.len() - 1
    }

    pub fn default_scale(&self) -> f64 {
        self.params.scale()
    }

    /// Rings for the first `level` chain primes.
    pub fn rings(&self, level: usize) -> &[PrimeRing] {
        &self.rings[..level]
    }

    /// Chain rings followed by the special ring.
    pub(crate) fn all_rings(&self) -> &[PrimeRing] {
        &self.rings
    }

    pub(crate) fn special_ring(&self) -> &PrimeRing {
        self.rings.last().expect("special prime")
    }

    pub fn chain_primes(&self) -> Vec<u64> {
        self.rings[..self.max_level()].iter().map(|r| r.q()).collect()
    }

    pub fn special_prime(&self) -> u64 {
        self.special_ring().q()
    }

    /// Prime removed by the next rescale of a level-`level` ciphertext.
    pub fn last_prime(&self, level: usize) -> u64 {
        self.rings[level - 1].q()
    }

    /// `log2` of the product of the first `level` chain primes.
    pub fn log_modulus(&self, level: usize) -> f64 {
        self.rings[..level].iter().map(|r| (r.q() as f64).log2()).sum()
    }

    pub(crate) fn special_mod(&self, i: usize) -> u64 {
        self.special_mod[i]
    }

    pub(crate) fn special_inv(&self, i: usize) -> u64 {
        self.special_inv[i]
    }

    /// Galois element for a left rotation by `step` slots.
    pub fn galois_element(&self, step: usize) -> usize {
        self.rot_group[step % self.slot_count()]
    }

    pub fn conjugation_element(&self) -> usize {
        2 * self.ring_degree() - 1
    }

    /// Evaluation-domain permutation realizing `X -> X^galois`.
    pub(crate) fn galois_permutation(&self, galois: usize) -> Vec<usize> {
        let n = self.ring_degree();
        let m = 2 * n;
        let ring = &self.rings[0];
        (0..n)
            .map(|i| self.slot_of_exponent[ring.eval_exponent(i) * galois % m])
            .collect()
    }

    /// Balanced mixed-radix reconstruction of one coefficient as `f64`.
    pub(crate) fn garner_to_f64(&self, residues: &[u64]) -> f64 {
        let level = residues.len();
        let mut digits = [0i64; 64];
        for i in 0..level {
            let q = self.rings[i].modulus();
            let mut acc = 0u64;
            for (j, &d) in digits.iter().enumerate().take(i) {
                acc = q.add(acc, q.mul(q.reduce_i64(d), self.garner_prefix[i][j]));
            }
            let v = q.mul(q.sub(residues[i], acc), self.garner_inv[i]);
            digits[i] = q.center(v);
        }
        let mut val = digits[level - 1] as f64;
        for j in (0..level - 1).rev() {
            val = val * self.rings[j].q() as f64 + digits[j] as f64;
        }
        val
    }

    /// Canonical-embedding inverse: slot values to the real/imaginary halves of the coefficient vector.
    pub(crate) fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.ring_degree();
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        vals.iter_mut().for_each(|v| *v *= inv);
    }

    pub(crate) fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.ring_degree();
        bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }
}

fn bit_reverse_permute<T>(a: &mut [T]) {
    let n = a.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            a.swap(i, j);
        }
    }
}
