//! Word-sized modular arithmetic and NTT-friendly prime selection.

use crate::error::{Error, Result};

/// A modulus below 2^62 with precomputed Barrett constants.
///
/// Products of two reduced operands are reduced with the classic
/// `floor(2^(2k) / q)` Barrett quotient estimate, which keeps every
/// intermediate inside a `u128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    bits: u32,
    mu: u64,
}

impl Modulus {
    pub const MAX_BITS: u32 = 62;

    pub fn new(value: u64) -> Result<Self> {
        if value < 2 {
            return Err(Error::config(format!("modulus {value} is too small")));
        }
        let bits = 64 - value.leading_zeros();
        if bits > Self::MAX_BITS {
            return Err(Error::config(format!(
                "modulus {value} has {bits} bits; at most {} supported",
                Self::MAX_BITS
            )));
        }
        let mu = ((1u128 << (2 * bits)) / value as u128) as u64;
        Ok(Self { value, bits, mu })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Reduces `x < q^2`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q1 = (x >> (self.bits - 1)) as u64;
        let q3 = ((q1 as u128 * self.mu as u128) >> (self.bits + 1)) as u64;
        // x - q3*q < 3q < 2^64, so low-word arithmetic is exact.
        let mut r = (x as u64).wrapping_sub(q3.wrapping_mul(self.value));
        if r >= self.value {
            r -= self.value;
        }
        if r >= self.value {
            r -= self.value;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else {
            x % self.value
        }
    }

    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.value as i64) as u64
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// `floor(w * 2^64 / q)`, the Shoup companion of a fixed multiplicand.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` when `a` shares a factor with `q`.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let (mut r0, mut r1) = (self.value as i128, self.reduce(a) as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let quot = r0 / r1;
            (r0, r1) = (r1, r0 - quot * r1);
            (t0, t1) = (t1, t0 - quot * t1);
        }
        (r0 == 1).then(|| t0.rem_euclid(self.value as i128) as u64)
    }

    /// Representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the first twelve prime bases are exact for all u64.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest primes `q < 2^bits` with `q ≡ 1 (mod 2N)`, scanning downward.
///
/// Bit sizes that repeat take successive primes, and any prime listed in
/// `exclude` is skipped, so every party derives the same distinct chain.
pub fn ntt_primes(bit_sizes: &[u32], ring_degree: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    let step = 2 * ring_degree as u64;
    let mut chosen: Vec<u64> = Vec::with_capacity(bit_sizes.len());
    for &bits in bit_sizes {
        if !(2..=Modulus::MAX_BITS).contains(&bits) {
            return Err(Error::config(format!("prime bit size {bits} out of range")));
        }
        let lower = 1u64 << (bits - 1);
        let top = 1u64 << bits;
        // largest candidate below 2^bits congruent to 1 mod 2N
        let mut candidate = top - step + 1;
        loop {
            if candidate <= lower {
                return Err(Error::config(format!(
                    "no {bits}-bit prime congruent to 1 mod {step} left"
                )));
            }
            if !chosen.contains(&candidate) && !exclude.contains(&candidate) && is_prime(candidate) {
                chosen.push(candidate);
                break;
            }
            candidate -= step;
        }
    }
    Ok(chosen)
}
