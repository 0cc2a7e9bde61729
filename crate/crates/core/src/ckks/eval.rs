use rand::Rng;

use super::context::CkksContext;
use super::keys::{
    sample_gaussian, sample_ternary, small_eval, GaloisKeys, KeySwitchKey, PublicKey, RelinKey, SecretKey,
};
use super::{scales_match, Ciphertext, Plaintext};
use crate::error::{Error, Result};
use crate::ring::{mod_switch_drop_last, Domain, RnsPoly};

impl SecretKey {
    /// The key over the first `level` chain primes, evaluation domain.
    pub fn to_eval(&self, level: usize) -> RnsPoly {
        self.level_view(level)
    }
}

impl CkksContext {
    fn check_ct(&self, ct: &Ciphertext) -> Result<()> {
        if ct.degree() != self.ring_degree() || ct.level() == 0 || ct.level() > self.max_level() {
            return Err(Error::contract("ciphertext does not belong to this context"));
        }
        if ct.parts[0].domain() != Domain::Evaluation {
            return Err(Error::contract("ciphertext must be in the evaluation domain"));
        }
        Ok(())
    }

    fn check_same_level(&self, a: usize, b: usize) -> Result<()> {
        if a != b {
            return Err(Error::contract(format!("level mismatch: {a} vs {b}")));
        }
        Ok(())
    }

    fn check_same_scale(&self, a: f64, b: f64) -> Result<()> {
        if !scales_match(a, b) {
            return Err(Error::contract(format!("scale mismatch: {a:e} vs {b:e}")));
        }
        Ok(())
    }

    /// Public-key encryption of a top-level plaintext.
    pub fn encrypt(&self, pk: &PublicKey, pt: &Plaintext, rng: &mut impl Rng) -> Result<Ciphertext> {
        let level = self.max_level();
        if pt.level() != level {
            return Err(Error::contract(format!(
                "plaintext at level {} but encryption requires the top level {level}",
                pt.level()
            )));
        }
        let rings = self.rings(level);
        let n = self.ring_degree();
        let u = small_eval(&sample_ternary(n, rng), rings);
        let mut c0 = small_eval(&sample_gaussian(n, rng), rings);
        let mut c1 = small_eval(&sample_gaussian(n, rng), rings);
        c0.fma_assign(&pk.b, &u, rings)?;
        c0.add_assign(&pt.poly, rings)?;
        c1.fma_assign(&pk.a, &u, rings)?;
        Ciphertext::from_parts(vec![c0, c1], pt.scale)
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
        self.check_ct(ct)?;
        if ct.parts.len() != 2 {
            return Err(Error::contract(
                "decrypt needs a 2-component ciphertext; relinearize first",
            ));
        }
        let rings = self.rings(ct.level());
        let s = sk.level_view(ct.level());
        let mut m = ct.parts[0].clone();
        m.fma_assign(&ct.parts[1], &s, rings)?;
        Ok(Plaintext {
            poly: m,
            scale: ct.scale,
        })
    }

    pub fn decrypt_decode(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<f64>> {
        self.decode(&self.decrypt(sk, ct)?)
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let mut out = a.clone();
        self.add_assign(&mut out, b)?;
        Ok(out)
    }

    pub fn add_assign(&self, a: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
        self.combine(a, b, false)
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let mut out = a.clone();
        self.combine(&mut out, b, true)?;
        Ok(out)
    }

    fn combine(&self, a: &mut Ciphertext, b: &Ciphertext, subtract: bool) -> Result<()> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        self.check_same_level(a.level(), b.level())?;
        self.check_same_scale(a.scale, b.scale)?;
        let rings = self.rings(a.level());
        while a.parts.len() < b.parts.len() {
            a.parts
                .push(RnsPoly::zero(self.ring_degree(), a.level(), Domain::Evaluation));
        }
        for (x, y) in a.parts.iter_mut().zip(&b.parts) {
            if subtract {
                x.sub_assign(y, rings)?;
            } else {
                x.add_assign(y, rings)?;
            }
        }
        Ok(())
    }

    pub fn negate(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        let mut out = a.clone();
        let rings = self.rings(a.level());
        out.parts.iter_mut().for_each(|p| p.neg_in_place(rings));
        Ok(out)
    }

    pub fn add_plain(&self, a: &Ciphertext, p: &Plaintext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_same_level(a.level(), p.level())?;
        self.check_same_scale(a.scale, p.scale)?;
        let mut out = a.clone();
        out.parts[0].add_assign(&p.poly, self.rings(a.level()))?;
        Ok(out)
    }

    pub fn sub_plain(&self, a: &Ciphertext, p: &Plaintext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_same_level(a.level(), p.level())?;
        self.check_same_scale(a.scale, p.scale)?;
        let mut out = a.clone();
        out.parts[0].sub_assign(&p.poly, self.rings(a.level()))?;
        Ok(out)
    }

    /// Slotwise product; the result scale is `scale(a) * scale(p)`.
    pub fn mul_plain(&self, a: &Ciphertext, p: &Plaintext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_same_level(a.level(), p.level())?;
        let rings = self.rings(a.level());
        let mut out = a.clone();
        for x in out.parts.iter_mut() {
            x.mul_assign(&p.poly, rings)?;
        }
        out.scale = a.scale * p.scale;
        Ok(out)
    }

    /// Tensor product of two 2-component ciphertexts at the same level.
    ///
    /// Operands may carry different scales; the result scale is their product.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        if a.parts.len() != 2 || b.parts.len() != 2 {
            return Err(Error::contract("ciphertext multiplication needs 2-component inputs"));
        }
        self.check_same_level(a.level(), b.level())?;
        let rings = self.rings(a.level());
        let (a0, a1, b0, b1) = (&a.parts[0], &a.parts[1], &b.parts[0], &b.parts[1]);
        let mut d0 = a0.clone();
        d0.mul_assign(b0, rings)?;
        let mut d1 = a0.clone();
        d1.mul_assign(b1, rings)?;
        d1.fma_assign(a1, b0, rings)?;
        let mut d2 = a1.clone();
        d2.mul_assign(b1, rings)?;
        Ciphertext::from_parts(vec![d0, d1, d2], a.scale * b.scale)
    }

    pub fn square(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.mul(a, a)
    }

    /// Folds the third component back onto the secret key. A 2-component input is returned unchanged.
    pub fn relinearize(&self, a: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
        self.check_ct(a)?;
        if a.parts.len() == 2 {
            return Ok(a.clone());
        }
        let (k0, k1) = self.key_switch(&a.parts[2], &rlk.0)?;
        let rings = self.rings(a.level());
        let mut c0 = a.parts[0].clone();
        c0.add_assign(&k0, rings)?;
        let mut c1 = a.parts[1].clone();
        c1.add_assign(&k1, rings)?;
        Ciphertext::from_parts(vec![c0, c1], a.scale)
    }

    /// Divides by the last prime of the current level and drops it.
    pub fn rescale(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        let level = a.level();
        if level < 2 {
            return Err(Error::BudgetExhausted(
                "rescale at level 1: no prime left to drop".into(),
            ));
        }
        let rings = self.rings(level);
        let q_last = rings[level - 1].q() as f64;
        let mut parts = Vec::with_capacity(a.parts.len());
        for p in &a.parts {
            let mut c = p.clone();
            c.ntt_inverse_in_place(rings)?;
            let mut d = mod_switch_drop_last(&c, rings)?;
            d.ntt_forward_in_place(&rings[..level - 1])?;
            parts.push(d);
        }
        Ciphertext::from_parts(parts, a.scale / q_last)
    }

    /// Drops primes without dividing; the scale is unchanged.
    pub fn drop_to_level(&self, a: &Ciphertext, level: usize) -> Result<Ciphertext> {
        self.check_ct(a)?;
        if level == 0 || level > a.level() {
            return Err(Error::contract(format!(
                "cannot move a level-{} ciphertext to level {level}",
                a.level()
            )));
        }
        let mut out = a.clone();
        for p in out.parts.iter_mut() {
            while p.level() > level {
                p.drop_last()?;
            }
        }
        Ok(out)
    }

    pub fn drop_plain_to_level(&self, p: &Plaintext, level: usize) -> Result<Plaintext> {
        if level == 0 || level > p.level() {
            return Err(Error::contract(format!(
                "cannot move a level-{} plaintext to level {level}",
                p.level()
            )));
        }
        let mut out = p.clone();
        while out.poly.level() > level {
            out.poly.drop_last()?;
        }
        Ok(out)
    }

    /// Cyclic left rotation of the slot vector by `steps` (negative rotates right).
    pub fn rotate(&self, a: &Ciphertext, steps: i64, gk: &GaloisKeys) -> Result<Ciphertext> {
        self.check_ct(a)?;
        if a.parts.len() != 2 {
            return Err(Error::contract("rotate needs a 2-component ciphertext"));
        }
        let n = self.slot_count() as i64;
        let k = steps.rem_euclid(n) as usize;
        if k == 0 {
            return Ok(a.clone());
        }
        let plan = self.rotation_plan(k, gk)?;
        let mut out = a.clone();
        for g in plan {
            out = self.apply_galois(&out, g, gk.get(g).expect("planned with available keys"))?;
        }
        Ok(out)
    }

    /// Galois elements whose composition rotates left by `k`, preferring the
    /// signed-binary form and falling back to plain binary.
    fn rotation_plan(&self, k: usize, gk: &GaloisKeys) -> Result<Vec<usize>> {
        let n = self.slot_count();
        let mut first_missing = None;
        for terms in [naf_steps(k, n), binary_steps(k)] {
            let plan: Vec<usize> = terms.iter().map(|&s| self.galois_element(s)).collect();
            match terms.iter().zip(&plan).find(|(_, g)| !gk.contains(**g)) {
                None => return Ok(plan),
                Some((&s, &g)) => {
                    first_missing.get_or_insert((s, g));
                }
            }
        }
        let (step, element) = first_missing.expect("some term missing");
        Err(Error::MissingGaloisKey { step, element })
    }

    /// Complex conjugation of every slot.
    pub fn conjugate(&self, a: &Ciphertext, gk: &GaloisKeys) -> Result<Ciphertext> {
        self.check_ct(a)?;
        let g = self.conjugation_element();
        let key = gk.get(g).ok_or(Error::MissingGaloisKey { step: 0, element: g })?;
        self.apply_galois(a, g, key)
    }

    fn apply_galois(&self, a: &Ciphertext, g: usize, key: &KeySwitchKey) -> Result<Ciphertext> {
        let perm = self.galois_permutation(g);
        let c0 = a.parts[0].permute_eval(&perm)?;
        let c1 = a.parts[1].permute_eval(&perm)?;
        let (k0, k1) = self.key_switch(&c1, key)?;
        let mut out0 = c0;
        out0.add_assign(&k0, self.rings(a.level()))?;
        Ciphertext::from_parts(vec![out0, k1], a.scale)
    }

    /// Hybrid key switch: returns `(d0, d1)` with `d0 + d1*s ≈ c*s'`.
    fn key_switch(&self, c: &RnsPoly, key: &KeySwitchKey) -> Result<(RnsPoly, RnsPoly)> {
        let level = c.level();
        let all = self.all_rings();
        let special = all.len() - 1;
        let n = self.ring_degree();
        // targets: the active chain primes then the special prime
        let targets: Vec<usize> = (0..level).chain(std::iter::once(special)).collect();
        let mut acc0 = vec![vec![0u64; n]; targets.len()];
        let mut acc1 = vec![vec![0u64; n]; targets.len()];
        let mut digit = vec![0u64; n];
        let mut lifted = vec![0u64; n];
        for j in 0..level {
            let ring_j = &all[j];
            digit.copy_from_slice(c.residue(j));
            ring_j.inverse(&mut digit);
            let qj = ring_j.modulus();
            let (b_j, a_j) = &key.parts[j];
            for (slot, &t) in targets.iter().enumerate() {
                let ring_t = &all[t];
                let qt = ring_t.modulus();
                let src: &[u64] = if t == j {
                    c.residue(j)
                } else {
                    for (o, &d) in lifted.iter_mut().zip(&digit) {
                        *o = qt.reduce_i64(qj.center(d));
                    }
                    ring_t.forward(&mut lifted);
                    &lifted
                };
                let (kb, ka) = (b_j.residue(t), a_j.residue(t));
                for i in 0..n {
                    acc0[slot][i] = qt.add(acc0[slot][i], qt.mul(src[i], kb[i]));
                    acc1[slot][i] = qt.add(acc1[slot][i], qt.mul(src[i], ka[i]));
                }
            }
        }
        let d0 = self.mod_down(acc0, level)?;
        let d1 = self.mod_down(acc1, level)?;
        Ok((d0, d1))
    }

    /// `(x - [x]_P) / P` on a polynomial held over the active chain plus the special prime.
    fn mod_down(&self, mut acc: Vec<Vec<u64>>, level: usize) -> Result<RnsPoly> {
        let sp_ring = self.special_ring();
        let sp = sp_ring.modulus();
        let mut top = acc.pop().expect("special residue");
        sp_ring.inverse(&mut top);
        let mut tmp = vec![0u64; top.len()];
        for (i, res) in acc.iter_mut().enumerate() {
            let ring = &self.all_rings()[i];
            let q = ring.modulus();
            for (o, &t) in tmp.iter_mut().zip(&top) {
                *o = q.reduce_i64(sp.center(t));
            }
            ring.forward(&mut tmp);
            let inv = self.special_inv(i);
            let inv_s = q.shoup(inv);
            for (x, &r) in res.iter_mut().zip(&tmp) {
                *x = q.mul_shoup(q.sub(*x, r), inv, inv_s);
            }
        }
        RnsPoly::from_residues(acc, Domain::Evaluation, self.rings(level))
    }
}

/// Signed-binary digits of `k` as left-rotation steps modulo `n` (powers of two,
/// negative ones expressed as `n - 2^j`).
fn naf_steps(k: usize, n: usize) -> Vec<usize> {
    let mut steps = Vec::new();
    let mut x = k as i64;
    let mut bit = 0u32;
    while x != 0 {
        if x & 1 == 1 {
            let d = 2 - (x & 3); // +1 or -1
            let p = 1i64 << bit;
            if (p as usize) < n {
                steps.push(if d > 0 { p as usize } else { n - p as usize });
            }
            x -= d;
        }
        x >>= 1;
        bit += 1;
    }
    steps
}

fn binary_steps(k: usize) -> Vec<usize> {
    (0..usize::BITS).map(|b| 1usize << b).filter(|&p| k & p != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naf_recomposes() {
        let n = 4096;
        for k in 1..n {
            let total: usize = naf_steps(k, n).iter().sum();
            assert_eq!(total % n, k, "k={k}");
            assert!(naf_steps(k, n).len() <= binary_steps(k).len());
        }
    }
}
