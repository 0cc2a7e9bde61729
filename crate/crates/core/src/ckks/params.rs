use crate::error::{Error, Result};

/// Ring degree, modulus chain and scale for one CKKS instantiation.
///
/// `prime_bits` lists the data primes in chain order; rescaling drops them
/// from the back. Key switching uses one extra prime of `special_bits`
/// bits that never carries ciphertext data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CkksParams {
    pub ring_degree: usize,
    pub prime_bits: Vec<u32>,
    pub special_bits: u32,
    pub log_scale: u32,
    /// Informational only; nothing checks it.
    pub claimed_security_bits: Option<u32>,
}

impl CkksParams {
    pub fn paper() -> Self {
        Self {
            ring_degree: 8192,
            prime_bits: vec![60, 40, 40, 60],
            special_bits: 61,
            log_scale: 40,
            claimed_security_bits: Some(128),
        }
    }

    /// Fast profile for tests; far too small to be secure.
    pub fn small() -> Self {
        Self {
            ring_degree: 1024,
            prime_bits: vec![40, 30, 40],
            special_bits: 41,
            log_scale: 30,
            claimed_security_bits: None,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "small" => Ok(Self::small()),
            other => Err(Error::config(format!(
                "unknown CKKS profile `{other}` (expected paper|small)"
            ))),
        }
    }

    pub fn slot_count(&self) -> usize {
        self.ring_degree / 2
    }

    pub fn scale(&self) -> f64 {
        (self.log_scale as f64).exp2()
    }

    pub fn max_level(&self) -> usize {
        self.prime_bits.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ring_degree < 16 || !self.ring_degree.is_power_of_two() {
            return Err(Error::config(format!(
                "ring degree {} must be a power of two >= 16",
                self.ring_degree
            )));
        }
        if self.prime_bits.len() < 3 {
            return Err(Error::config(format!(
                "modulus chain has {} primes; at least 3 are required",
                self.prime_bits.len()
            )));
        }
        if self.prime_bits.len() > 32 {
            return Err(Error::config("modulus chain longer than 32 primes"));
        }
        let max_bits = *self.prime_bits.iter().max().expect("non-empty");
        if self.special_bits < max_bits {
            return Err(Error::config(format!(
                "special prime ({} bits) must be at least as large as every chain prime ({max_bits} bits)",
                self.special_bits
            )));
        }
        if self.log_scale == 0 || self.log_scale >= self.prime_bits[0] {
            return Err(Error::config(format!(
                "log2 scale {} must lie in 1..{}",
                self.log_scale, self.prime_bits[0]
            )));
        }
        Ok(())
    }
}
