use super::ntt::PrimeRing;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

/// A ring element in residue-number-system form: one residue array per active prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnsPoly {
    residues: Vec<Vec<u64>>,
    domain: Domain,
}

impl RnsPoly {
    pub fn zero(degree: usize, level: usize, domain: Domain) -> Self {
        Self {
            residues: vec![vec![0; degree]; level],
            domain,
        }
    }

    /// Validates shape and range against `rings` (one ring per residue array).
    pub fn from_residues(residues: Vec<Vec<u64>>, domain: Domain, rings: &[PrimeRing]) -> Result<Self> {
        if residues.is_empty() {
            return Err(Error::contract("polynomial needs at least one residue array"));
        }
        if residues.len() > rings.len() {
            return Err(Error::contract(format!(
                "{} residue arrays but only {} primes",
                residues.len(),
                rings.len()
            )));
        }
        for (r, ring) in residues.iter().zip(rings) {
            if r.len() != ring.degree() {
                return Err(Error::contract(format!(
                    "residue array of length {} in degree-{} ring",
                    r.len(),
                    ring.degree()
                )));
            }
            if let Some(&bad) = r.iter().find(|&&x| x >= ring.q()) {
                return Err(Error::contract(format!("residue {bad} not reduced mod {}", ring.q())));
            }
        }
        Ok(Self { residues, domain })
    }

    /// Coefficient-domain polynomial from signed integer coefficients.
    pub fn from_signed(coeffs: &[i64], rings: &[PrimeRing]) -> Self {
        let residues = rings
            .iter()
            .map(|ring| coeffs.iter().map(|&c| ring.modulus().reduce_i64(c)).collect())
            .collect();
        Self {
            residues,
            domain: Domain::Coefficient,
        }
    }

    pub fn from_signed_i128(coeffs: &[i128], rings: &[PrimeRing]) -> Self {
        let residues = rings
            .iter()
            .map(|ring| {
                let q = ring.modulus();
                coeffs
                    .iter()
                    .map(|&c| match i64::try_from(c) {
                        Ok(small) => q.reduce_i64(small),
                        Err(_) => q.reduce_i128(c),
                    })
                    .collect()
            })
            .collect();
        Self {
            residues,
            domain: Domain::Coefficient,
        }
    }

    #[inline]
    pub fn level(&self) -> usize {
        self.residues.len()
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.residues[0].len()
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn residues(&self) -> &[Vec<u64>] {
        &self.residues
    }

    pub fn residue(&self, i: usize) -> &[u64] {
        &self.residues[i]
    }

    pub(crate) fn residue_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.residues[i]
    }

    pub fn is_zero(&self) -> bool {
        self.residues.iter().all(|r| r.iter().all(|&x| x == 0))
    }

    fn check_rings(&self, rings: &[PrimeRing]) -> Result<()> {
        if rings.len() < self.level() {
            return Err(Error::contract(format!(
                "level-{} polynomial given {} rings",
                self.level(),
                rings.len()
            )));
        }
        Ok(())
    }

    fn check_binary(&self, other: &Self) -> Result<()> {
        if self.level() != other.level() {
            return Err(Error::contract(format!(
                "level mismatch: {} vs {}",
                self.level(),
                other.level()
            )));
        }
        if self.domain != other.domain {
            return Err(Error::contract(format!(
                "domain mismatch: {:?} vs {:?}",
                self.domain, other.domain
            )));
        }
        Ok(())
    }

    pub fn ntt_forward_in_place(&mut self, rings: &[PrimeRing]) -> Result<()> {
        self.check_rings(rings)?;
        if self.domain != Domain::Coefficient {
            return Err(Error::contract("forward NTT on an evaluation-domain polynomial"));
        }
        for (r, ring) in self.residues.iter_mut().zip(rings) {
            ring.forward(r);
        }
        self.domain = Domain::Evaluation;
        Ok(())
    }

    pub fn ntt_inverse_in_place(&mut self, rings: &[PrimeRing]) -> Result<()> {
        self.check_rings(rings)?;
        if self.domain != Domain::Evaluation {
            return Err(Error::contract("inverse NTT on a coefficient-domain polynomial"));
        }
        for (r, ring) in self.residues.iter_mut().zip(rings) {
            ring.inverse(r);
        }
        self.domain = Domain::Coefficient;
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self, rings: &[PrimeRing]) -> Result<()> {
        self.check_binary(other)?;
        self.check_rings(rings)?;
        for ((a, b), ring) in self.residues.iter_mut().zip(&other.residues).zip(rings) {
            let q = ring.modulus();
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = q.add(*x, y));
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Self, rings: &[PrimeRing]) -> Result<()> {
        self.check_binary(other)?;
        self.check_rings(rings)?;
        for ((a, b), ring) in self.residues.iter_mut().zip(&other.residues).zip(rings) {
            let q = ring.modulus();
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = q.sub(*x, y));
        }
        Ok(())
    }

    pub fn mul_assign(&mut self, other: &Self, rings: &[PrimeRing]) -> Result<()> {
        self.check_binary(other)?;
        self.check_rings(rings)?;
        if self.domain != Domain::Evaluation {
            return Err(Error::contract("pointwise product requires the evaluation domain"));
        }
        for ((a, b), ring) in self.residues.iter_mut().zip(&other.residues).zip(rings) {
            let q = ring.modulus();
            a.iter_mut().zip(b).for_each(|(x, &y)| *x = q.mul(*x, y));
        }
        Ok(())
    }

    /// `self += a ⊙ b`, all in the evaluation domain.
    pub(crate) fn fma_assign(&mut self, a: &Self, b: &Self, rings: &[PrimeRing]) -> Result<()> {
        self.check_binary(a)?;
        a.check_binary(b)?;
        if self.domain != Domain::Evaluation {
            return Err(Error::contract("pointwise product requires the evaluation domain"));
        }
        for (((acc, x), y), ring) in self.residues.iter_mut().zip(&a.residues).zip(&b.residues).zip(rings) {
            let q = ring.modulus();
            for ((o, &u), &v) in acc.iter_mut().zip(x).zip(y) {
                *o = q.add(*o, q.mul(u, v));
            }
        }
        Ok(())
    }

    pub fn neg_in_place(&mut self, rings: &[PrimeRing]) {
        for (a, ring) in self.residues.iter_mut().zip(rings) {
            let q = ring.modulus();
            a.iter_mut().for_each(|x| *x = q.neg(*x));
        }
    }

    /// Multiplies residue `i` by `scalars[i]`.
    pub fn mul_scalar_per_prime(&mut self, scalars: &[u64], rings: &[PrimeRing]) {
        for ((a, &s), ring) in self.residues.iter_mut().zip(scalars).zip(rings) {
            let q = ring.modulus();
            let ss = q.shoup(s);
            a.iter_mut().for_each(|x| *x = q.mul_shoup(*x, s, ss));
        }
    }

    /// Drops the last residue array without dividing (modulus reduction).
    pub fn drop_last(&mut self) -> Result<()> {
        if self.level() < 2 {
            return Err(Error::BudgetExhausted("cannot drop the last remaining prime".into()));
        }
        self.residues.pop();
        Ok(())
    }

    /// Applies `X -> X^galois` in the coefficient domain.
    pub fn automorphism_coeff(&self, galois: usize, rings: &[PrimeRing]) -> Result<Self> {
        if self.domain != Domain::Coefficient {
            return Err(Error::contract(
                "coefficient automorphism on evaluation-domain polynomial",
            ));
        }
        let n = self.degree();
        let two_n = 2 * n;
        if galois.is_multiple_of(2) {
            return Err(Error::contract(format!("galois element {galois} is even")));
        }
        let mut out = Self::zero(n, self.level(), Domain::Coefficient);
        for ((src, dst), ring) in self.residues.iter().zip(out.residues.iter_mut()).zip(rings) {
            let q = ring.modulus();
            for (i, &c) in src.iter().enumerate() {
                let e = (i * galois) % two_n;
                if e < n {
                    dst[e] = c;
                } else {
                    dst[e - n] = q.neg(c);
                }
            }
        }
        Ok(out)
    }

    /// Applies a precomputed evaluation-domain permutation: `out[i] = self[perm[i]]`.
    pub fn permute_eval(&self, perm: &[usize]) -> Result<Self> {
        if self.domain != Domain::Evaluation {
            return Err(Error::contract(
                "evaluation permutation on coefficient-domain polynomial",
            ));
        }
        let residues = self
            .residues
            .iter()
            .map(|r| perm.iter().map(|&j| r[j]).collect())
            .collect();
        Ok(Self {
            residues,
            domain: Domain::Evaluation,
        })
    }
}

/// Forward NTT of every residue; rejects an evaluation-domain input.
pub fn ntt_forward(poly: &RnsPoly, rings: &[PrimeRing]) -> Result<RnsPoly> {
    let mut out = poly.clone();
    out.ntt_forward_in_place(rings)?;
    Ok(out)
}

pub fn ntt_inverse(poly: &RnsPoly, rings: &[PrimeRing]) -> Result<RnsPoly> {
    let mut out = poly.clone();
    out.ntt_inverse_in_place(rings)?;
    Ok(out)
}

pub fn poly_add(a: &RnsPoly, b: &RnsPoly, rings: &[PrimeRing]) -> Result<RnsPoly> {
    let mut out = a.clone();
    out.add_assign(b, rings)?;
    Ok(out)
}

pub fn poly_sub(a: &RnsPoly, b: &RnsPoly, rings: &[PrimeRing]) -> Result<RnsPoly> {
    let mut out = a.clone();
    out.sub_assign(b, rings)?;
    Ok(out)
}

pub fn poly_pointwise_mul(a: &RnsPoly, b: &RnsPoly, rings: &[PrimeRing]) -> Result<RnsPoly> {
    let mut out = a.clone();
    out.mul_assign(b, rings)?;
    Ok(out)
}

/// Divides by the last prime with rounding and drops it.
///
/// For the signed integer `x` the residues represent, the result represents
/// `round(x / q_last)`, computed residue-wise as `(x - [x]_{q_last}) * q_last^{-1}`
/// with the centered remainder `[x]_{q_last}`.
pub fn mod_switch_drop_last(poly: &RnsPoly, rings: &[PrimeRing]) -> Result<RnsPoly> {
    if poly.domain() != Domain::Coefficient {
        return Err(Error::contract("mod switch requires the coefficient domain"));
    }
    let level = poly.level();
    if level < 2 {
        return Err(Error::BudgetExhausted("level 1: no prime left to drop".into()));
    }
    poly.check_rings(rings)?;
    let last = &rings[level - 1];
    let q_last = last.q();
    let half = q_last / 2;
    let last_res = poly.residue(level - 1);
    let mut residues = Vec::with_capacity(level - 1);
    for (i, ring) in rings.iter().enumerate().take(level - 1) {
        let q = ring.modulus();
        let inv = q
            .inv(q_last % q.value())
            .ok_or_else(|| Error::config("chain primes not coprime"))?;
        let inv_s = q.shoup(inv);
        let q_last_mod = q.reduce(q_last);
        let r: Vec<u64> = poly
            .residue(i)
            .iter()
            .zip(last_res)
            .map(|(&x, &l)| {
                // centered remainder mod q_last, reduced into q_i
                let rem = if l > half {
                    q.sub(q.reduce(l), q_last_mod)
                } else {
                    q.reduce(l)
                };
                q.mul_shoup(q.sub(x, rem), inv, inv_s)
            })
            .collect();
        residues.push(r);
    }
    Ok(RnsPoly {
        residues,
        domain: Domain::Coefficient,
    })
}
