use num_complex::Complex64;

use super::context::CkksContext;
use super::Plaintext;
use crate::error::{Error, Result};
use crate::ring::{Domain, RnsPoly};

impl CkksContext {
    /// Encodes up to `slot_count` reals at `scale`, producing an evaluation-domain
    /// plaintext over the first `level` primes. Unused slots are zero.
    pub fn encode(&self, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
        let slots = self.slot_count();
        if values.len() > slots {
            return Err(Error::contract(format!(
                "{} values exceed {slots} slots; chunk the vector first",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite value at index {i}")));
        }
        self.check_encode_args(scale, level)?;
        let mut vals: Vec<Complex64> = (0..slots)
            .map(|i| Complex64::new(values.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fft_special_inv(&mut vals);
        let n = self.ring_degree();
        let mut coeffs = vec![0i128; n];
        for (i, v) in vals.iter().enumerate() {
            coeffs[i] = round_to_i128(v.re * scale)?;
            coeffs[i + slots] = round_to_i128(v.im * scale)?;
        }
        let mut poly = RnsPoly::from_signed_i128(&coeffs, self.rings(level));
        poly.ntt_forward_in_place(self.rings(level))?;
        Ok(Plaintext { poly, scale })
    }

    /// The constant `value` in every slot; exact apart from rounding `value * scale`.
    pub fn encode_constant(&self, value: f64, scale: f64, level: usize) -> Result<Plaintext> {
        if !value.is_finite() {
            return Err(Error::contract("non-finite constant"));
        }
        self.check_encode_args(scale, level)?;
        let c = round_to_i128(value * scale)?;
        let n = self.ring_degree();
        // a constant polynomial evaluates to itself at every root
        let residues = self
            .rings(level)
            .iter()
            .map(|r| vec![r.modulus().reduce_i128(c); n])
            .collect();
        let poly = RnsPoly::from_residues(residues, Domain::Evaluation, self.rings(level))?;
        Ok(Plaintext { poly, scale })
    }

    pub fn decode(&self, pt: &Plaintext) -> Result<Vec<f64>> {
        Ok(self.decode_complex(pt)?.into_iter().map(|c| c.re).collect())
    }

    pub fn decode_complex(&self, pt: &Plaintext) -> Result<Vec<Complex64>> {
        let level = pt.level();
        if level == 0 || level > self.max_level() || pt.poly.degree() != self.ring_degree() {
            return Err(Error::contract("plaintext does not belong to this context"));
        }
        let mut poly = pt.poly.clone();
        if poly.domain() == Domain::Evaluation {
            poly.ntt_inverse_in_place(self.rings(level))?;
        }
        let slots = self.slot_count();
        let mut column = vec![0u64; level];
        let mut coeff = |k: usize| {
            for (i, c) in column.iter_mut().enumerate() {
                *c = poly.residue(i)[k];
            }
            self.garner_to_f64(&column) / pt.scale
        };
        let mut vals: Vec<Complex64> = (0..slots).map(|i| Complex64::new(coeff(i), 0.0)).collect();
        for (i, v) in vals.iter_mut().enumerate() {
            v.im = coeff(i + slots);
        }
        self.fft_special(&mut vals);
        Ok(vals)
    }

    fn check_encode_args(&self, scale: f64, level: usize) -> Result<()> {
        if !(scale.is_finite() && scale >= 1.0) {
            return Err(Error::contract(format!("invalid plaintext scale {scale}")));
        }
        if level == 0 || level > self.max_level() {
            return Err(Error::contract(format!(
                "level {level} outside 1..={}",
                self.max_level()
            )));
        }
        Ok(())
    }
}

fn round_to_i128(x: f64) -> Result<i128> {
    let r = x.round();
    if r.abs() >= 2f64.powi(126) {
        return Err(Error::Numerical(format!("encoded coefficient {x:e} overflows")));
    }
    Ok(r as i128)
}
