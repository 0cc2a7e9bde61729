//! RNS-CKKS: encoding through the canonical embedding, encryption and the
//! leveled homomorphic operations.

mod context;
mod encoding;
mod eval;
mod keys;
mod params;

pub use context::CkksContext;
pub use keys::{GaloisKeys, KeySet, KeySwitchKey, PublicKey, RelinKey, SecretKey, NOISE_STDDEV};
pub use params::CkksParams;

use crate::error::{Error, Result};
use crate::ring::RnsPoly;

/// Header bytes of the ciphertext wire format (magic, version, degree, level, count, scale).
pub const CIPHERTEXT_HEADER_BYTES: usize = 19;
pub const CIPHERTEXT_TRAILER_BYTES: usize = 4;

/// Encoded message in the evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    pub(crate) poly: RnsPoly,
    pub(crate) scale: f64,
}

impl Plaintext {
    pub fn level(&self) -> usize {
        self.poly.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn poly(&self) -> &RnsPoly {
        &self.poly
    }

    pub fn from_parts(poly: RnsPoly, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::contract(format!("invalid scale {scale}")));
        }
        Ok(Self { poly, scale })
    }
}

/// Components are kept in the evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) parts: Vec<RnsPoly>,
    pub(crate) scale: f64,
}

impl Ciphertext {
    pub fn from_parts(parts: Vec<RnsPoly>, scale: f64) -> Result<Self> {
        if !(2..=3).contains(&parts.len()) {
            return Err(Error::contract(format!("{} ciphertext components", parts.len())));
        }
        let (level, domain, n) = (parts[0].level(), parts[0].domain(), parts[0].degree());
        if parts
            .iter()
            .any(|p| p.level() != level || p.domain() != domain || p.degree() != n)
        {
            return Err(Error::contract("ciphertext components disagree on level or domain"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::contract(format!("invalid scale {scale}")));
        }
        Ok(Self { parts, scale })
    }

    pub fn level(&self) -> usize {
        self.parts[0].level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn degree(&self) -> usize {
        self.parts[0].degree()
    }

    pub fn components(&self) -> &[RnsPoly] {
        &self.parts
    }

    pub fn component_count(&self) -> usize {
        self.parts.len()
    }

    /// Bytes this ciphertext occupies on the wire.
    pub fn serialized_size(&self) -> usize {
        serialized_size(self.degree(), self.level(), self.parts.len())
    }
}

pub fn serialized_size(ring_degree: usize, level: usize, components: usize) -> usize {
    CIPHERTEXT_HEADER_BYTES + components * level * ring_degree * 8 + CIPHERTEXT_TRAILER_BYTES
}

pub(crate) fn scales_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
