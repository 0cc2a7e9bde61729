use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::context::CkksContext;
use crate::error::{Error, Result};
use crate::ring::{Domain, PrimeRing, RnsPoly};

pub const NOISE_STDDEV: f64 = 3.2;
const NOISE_BOUND: f64 = 6.0 * NOISE_STDDEV;

/// Ternary secret, kept in the evaluation domain over every chain prime plus the special prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) s: RnsPoly,
}

/// `(b, a)` with `b = -a*s + e`, evaluation domain over the full chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) b: RnsPoly,
    pub(crate) a: RnsPoly,
}

/// Hybrid key-switching material from some `s'` to `s`: one `(b_j, a_j)` pair per
/// chain prime, each over the chain plus the special prime `P`, with
/// `b_j = -a_j*s + e_j + P*s'*[i == j]` in residue `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySwitchKey {
    pub(crate) parts: Vec<(RnsPoly, RnsPoly)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelinKey(pub(crate) KeySwitchKey);

/// Key-switching keys indexed by Galois element.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GaloisKeys {
    pub(crate) keys: BTreeMap<usize, KeySwitchKey>,
}

impl GaloisKeys {
    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.keys.keys().copied()
    }

    pub fn contains(&self, galois: usize) -> bool {
        self.keys.contains_key(&galois)
    }

    pub(crate) fn get(&self, galois: usize) -> Option<&KeySwitchKey> {
        self.keys.get(&galois)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

pub struct KeySet {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: RelinKey,
    pub galois: GaloisKeys,
}

impl SecretKey {
    /// Signed coefficients (each in {-1, 0, 1}).
    pub fn coefficients(&self, ctx: &CkksContext) -> Vec<i64> {
        let ring = &ctx.all_rings()[0];
        let mut r = self.s.residue(0).to_vec();
        ring.inverse(&mut r);
        r.into_iter().map(|x| ring.modulus().center(x)).collect()
    }

    pub(crate) fn level_view(&self, level: usize) -> RnsPoly {
        truncate(&self.s, level)
    }
}

pub(crate) fn truncate(p: &RnsPoly, level: usize) -> RnsPoly {
    let mut q = p.clone();
    while q.level() > level {
        q.drop_last().expect("level >= 1");
    }
    q
}

pub(crate) fn sample_ternary(n: usize, rng: &mut impl Rng) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(-1i64..=1)).collect()
}

/// Rounded Gaussian with standard deviation 3.2, rejecting beyond six deviations.
pub(crate) fn sample_gaussian(n: usize, rng: &mut impl Rng) -> Vec<i64> {
    let normal = Normal::new(0.0, NOISE_STDDEV).expect("valid stddev");
    (0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng);
            if x.abs() <= NOISE_BOUND {
                break x.round() as i64;
            }
        })
        .collect()
}

pub(crate) fn sample_uniform_eval(rings: &[PrimeRing], rng: &mut impl Rng) -> RnsPoly {
    let residues = rings
        .iter()
        .map(|r| (0..r.degree()).map(|_| rng.gen_range(0..r.q())).collect())
        .collect();
    RnsPoly::from_residues(residues, Domain::Evaluation, rings).expect("reduced by construction")
}

pub(crate) fn small_eval(coeffs: &[i64], rings: &[PrimeRing]) -> RnsPoly {
    let mut p = RnsPoly::from_signed(coeffs, rings);
    p.ntt_forward_in_place(rings).expect("coefficient domain");
    p
}

impl CkksContext {
    pub fn gen_secret_key(&self, rng: &mut impl Rng) -> SecretKey {
        let coeffs = sample_ternary(self.ring_degree(), rng);
        SecretKey {
            s: small_eval(&coeffs, self.all_rings()),
        }
    }

    pub fn gen_public_key(&self, sk: &SecretKey, rng: &mut impl Rng) -> PublicKey {
        let rings = self.rings(self.max_level());
        let s = sk.level_view(self.max_level());
        let a = sample_uniform_eval(rings, rng);
        let e = small_eval(&sample_gaussian(self.ring_degree(), rng), rings);
        let mut b = e;
        let mut as_ = a.clone();
        as_.mul_assign(&s, rings).expect("matching shapes");
        b.sub_assign(&as_, rings).expect("matching shapes");
        PublicKey { b, a }
    }

    /// Key-switching key from `target` (evaluation domain, chain + special) to the secret key.
    fn gen_switch_key(&self, sk: &SecretKey, target: &RnsPoly, rng: &mut impl Rng) -> KeySwitchKey {
        let rings = self.all_rings();
        let levels = self.max_level();
        let mut parts = Vec::with_capacity(levels);
        for j in 0..levels {
            let a = sample_uniform_eval(rings, rng);
            let mut b = small_eval(&sample_gaussian(self.ring_degree(), rng), rings);
            let mut as_ = a.clone();
            as_.mul_assign(&sk.s, rings).expect("matching shapes");
            b.sub_assign(&as_, rings).expect("matching shapes");
            let q = rings[j].modulus();
            let p = self.special_mod(j);
            let ps = q.shoup(p);
            let t = target.residue(j);
            for (x, &y) in b.residue_mut(j).iter_mut().zip(t) {
                *x = q.add(*x, q.mul_shoup(y, p, ps));
            }
            parts.push((b, a));
        }
        KeySwitchKey { parts }
    }

    pub fn gen_relin_key(&self, sk: &SecretKey, rng: &mut impl Rng) -> RelinKey {
        let mut s2 = sk.s.clone();
        s2.mul_assign(&sk.s, self.all_rings()).expect("matching shapes");
        RelinKey(self.gen_switch_key(sk, &s2, rng))
    }

    /// Keys for the given Galois elements.
    pub fn gen_galois_keys(&self, sk: &SecretKey, elements: &[usize], rng: &mut impl Rng) -> Result<GaloisKeys> {
        let m = 2 * self.ring_degree();
        let mut keys = BTreeMap::new();
        for &g in elements {
            if g % 2 == 0 || g >= m {
                return Err(Error::contract(format!("{g} is not a Galois element mod {m}")));
            }
            if keys.contains_key(&g) {
                continue;
            }
            let target = sk.s.permute_eval(&self.galois_permutation(g))?;
            keys.insert(g, self.gen_switch_key(sk, &target, rng));
        }
        Ok(GaloisKeys { keys })
    }

    /// Elements for left rotations by `±2^j` (`2^j < slot_count`) and for conjugation.
    pub fn default_galois_elements(&self) -> Vec<usize> {
        let n = self.slot_count();
        let mut out = Vec::new();
        let mut step = 1;
        while step < n {
            out.push(self.galois_element(step));
            out.push(self.galois_element(n - step));
            step <<= 1;
        }
        out.push(self.conjugation_element());
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Deterministic key generation: the same seed yields bit-identical keys.
    pub fn keygen(&self, seed: u64) -> Result<KeySet> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let secret = self.gen_secret_key(&mut rng);
        let public = self.gen_public_key(&secret, &mut rng);
        let relin = self.gen_relin_key(&secret, &mut rng);
        let galois = self.gen_galois_keys(&secret, &self.default_galois_elements(), &mut rng)?;
        Ok(KeySet {
            secret,
            public,
            relin,
            galois,
        })
    }
}
