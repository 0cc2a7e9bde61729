use super::modulus::Modulus;
use crate::error::{Error, Result};

/// `Z_q[X]/(X^N + 1)` for one NTT-friendly prime, with twiddle tables.
///
/// The forward transform leaves its output in bit-reversed order: slot `i`
/// holds the evaluation at `psi^(2*bitrev(i) + 1)`.
#[derive(Clone, Debug)]
pub struct PrimeRing {
    modulus: Modulus,
    degree: usize,
    log_degree: u32,
    psi: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    degree_inv: u64,
    degree_inv_shoup: u64,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl PrimeRing {
    pub fn new(q: u64, degree: usize) -> Result<Self> {
        if degree < 2 || !degree.is_power_of_two() {
            return Err(Error::config(format!(
                "ring degree {degree} is not a power of two >= 2"
            )));
        }
        let modulus = Modulus::new(q)?;
        let two_n = 2 * degree as u64;
        if q % two_n != 1 {
            return Err(Error::config(format!("{q} is not 1 mod {two_n}")));
        }
        let psi = find_primitive_root(&modulus, two_n)
            .ok_or_else(|| Error::config(format!("no primitive {two_n}-th root mod {q}")))?;
        let psi_inv = modulus.inv(psi).expect("root is a unit");
        let log_degree = degree.trailing_zeros();

        let mut psi_rev = vec![0u64; degree];
        let mut psi_inv_rev = vec![0u64; degree];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for i in 0..degree {
            let r = bit_reverse(i, log_degree);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let degree_inv = modulus.inv(degree as u64).expect("q is odd");
        Ok(Self {
            modulus,
            degree,
            log_degree,
            psi,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            degree_inv,
            degree_inv_shoup: modulus.shoup(degree_inv),
        })
    }

    #[inline]
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.modulus.value()
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn psi(&self) -> u64 {
        self.psi
    }

    /// Odd exponent `e` such that output slot `i` of [`forward`](Self::forward)
    /// is the evaluation at `psi^e`.
    pub fn eval_exponent(&self, i: usize) -> usize {
        2 * bit_reverse(i, self.log_degree) + 1
    }

    /// In-place negacyclic forward transform (Cooley-Tukey, natural in, bit-reversed out).
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = &self.modulus;
        let n = self.degree;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = q.mul_shoup(*y, w, ws);
                    *x = q.add(u, v);
                    *y = q.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    /// In-place inverse of [`forward`](Self::forward) (Gentleman-Sande).
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = &self.modulus;
        let mut t = 1;
        let mut m = self.degree;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = q.add(u, v);
                    *y = q.mul_shoup(q.sub(u, v), w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = q.mul_shoup(*x, self.degree_inv, self.degree_inv_shoup);
        }
    }
}

fn find_primitive_root(q: &Modulus, order: u64) -> Option<u64> {
    let exp = (q.value() - 1) / order;
    let minus_one = q.value() - 1;
    (2..q.value().min(10_000)).find_map(|g| {
        let c = q.pow(g, exp);
        (q.pow(c, order / 2) == minus_one).then_some(c)
    })
}
