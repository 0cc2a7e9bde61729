use fedvit::ring::*;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn rings(bits: &[u32], n: usize) -> Vec<PrimeRing> {
    ntt_primes(bits, n, &[])
        .unwrap()
        .into_iter()
        .map(|q| PrimeRing::new(q, n).unwrap())
        .collect()
}

fn random_poly(rng: &mut ChaCha20Rng, rings: &[PrimeRing], nonzero: usize) -> RnsPoly {
    let n = rings[0].degree();
    let res = rings
        .iter()
        .map(|r| {
            (0..n)
                .map(|i| if i < nonzero { rng.gen_range(0..r.q()) } else { 0 })
                .collect()
        })
        .collect();
    RnsPoly::from_residues(res, Domain::Coefficient, rings).unwrap()
}

fn schoolbook_negacyclic(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u128; n];
    let q128 = q as u128;
    for i in 0..n {
        for j in 0..n {
            let p = a[i] as u128 * b[j] as u128 % q128;
            let k = i + j;
            if k < n {
                out[k] = (out[k] + p) % q128;
            } else {
                out[k - n] = (out[k - n] + q128 - p) % q128;
            }
        }
    }
    out.into_iter().map(|x| x as u64).collect()
}

fn pow_mod(b: u64, e: u64, q: u64) -> u64 {
    BigUint::from(b)
        .modpow(&BigUint::from(e), &BigUint::from(q))
        .to_u64()
        .unwrap()
}

fn crt(residues: &[u64], primes: &[u64]) -> BigInt {
    let big_q: BigUint = primes.iter().map(|&p| BigUint::from(p)).product();
    let mut acc = BigUint::zero();
    for (&r, &p) in residues.iter().zip(primes) {
        let qi = &big_q / p;
        let inv = (&qi % p).modpow(&BigUint::from(p - 2), &BigUint::from(p));
        acc += BigUint::from(r) * &qi * inv;
    }
    let acc = BigInt::from(acc % &big_q);
    let big_q = BigInt::from(big_q);
    if &acc * 2 > big_q {
        acc - big_q
    } else {
        acc
    }
}

fn reduce_big(x: &BigInt, q: u64) -> u64 {
    let q = BigInt::from(q);
    (((x % &q) + &q) % &q).to_u64().unwrap()
}

#[test]
fn ntt_of_zero_and_constant() {
    let rs = rings(&[40, 30], 32);
    let zero = RnsPoly::zero(32, 2, Domain::Coefficient);
    assert!(ntt_forward(&zero, &rs).unwrap().is_zero());

    let mut one = vec![0i64; 32];
    one[0] = 1;
    let p = RnsPoly::from_signed(&one, &rs);
    let e = ntt_forward(&p, &rs).unwrap();
    assert!(e.residues().iter().all(|r| r.iter().all(|&x| x == 1)));
    let back = ntt_inverse(&e, &rs).unwrap();
    assert_eq!(back, p);
}

#[test]
fn ntt_rejects_wrong_domain() {
    let rs = rings(&[40], 16);
    let p = RnsPoly::zero(16, 1, Domain::Coefficient);
    assert!(ntt_inverse(&p, &rs).is_err());
    let e = ntt_forward(&p, &rs).unwrap();
    assert!(ntt_forward(&e, &rs).is_err());
}

#[test]
fn pointwise_product_matches_schoolbook() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for n in [16usize, 32, 64] {
        let rs = rings(&[50, 40, 30], n);
        for nonzero in [n / 2, n] {
            let a = random_poly(&mut rng, &rs, nonzero);
            let b = random_poly(&mut rng, &rs, nonzero);
            let prod = ntt_inverse(
                &poly_pointwise_mul(&ntt_forward(&a, &rs).unwrap(), &ntt_forward(&b, &rs).unwrap(), &rs).unwrap(),
                &rs,
            )
            .unwrap();
            for (i, r) in rs.iter().enumerate() {
                assert_eq!(
                    prod.residue(i),
                    schoolbook_negacyclic(a.residue(i), b.residue(i), r.q()).as_slice()
                );
            }
        }
    }
}

#[test]
fn forward_matches_direct_evaluation_at_n32() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let rs = rings(&[45], 32);
    let ring = &rs[0];
    let q = ring.q();
    let p = random_poly(&mut rng, &rs, 32);
    let e = ntt_forward(&p, &rs).unwrap();
    for i in 0..32 {
        let x = pow_mod(ring.psi(), ring.eval_exponent(i) as u64, q);
        let mut acc = 0u128;
        for &c in p.residue(0).iter().rev() {
            acc = (acc * x as u128 + c as u128) % q as u128;
        }
        assert_eq!(e.residue(0)[i], acc as u64, "slot {i}");
    }
}

#[test]
fn inverse_matches_direct_inverse_dft_at_n32() {
    // a_j = N^{-1} * sum_i A_i * x_i^{-j}, x_i the evaluation points
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let rs = rings(&[45], 32);
    let ring = &rs[0];
    let q = ring.q();
    let evals: Vec<u64> = (0..32).map(|_| rng.gen_range(0..q)).collect();
    let e = RnsPoly::from_residues(vec![evals.clone()], Domain::Evaluation, &rs).unwrap();
    let c = ntt_inverse(&e, &rs).unwrap();
    let n_inv = pow_mod(32, q - 2, q);
    for j in 0..32u64 {
        let mut acc = 0u128;
        for (i, &v) in evals.iter().enumerate() {
            let x = pow_mod(ring.psi(), ring.eval_exponent(i) as u64, q);
            let x_inv_j = pow_mod(pow_mod(x, q - 2, q), j, q);
            acc = (acc + v as u128 * x_inv_j as u128) % q as u128;
        }
        let want = (acc * n_inv as u128 % q as u128) as u64;
        assert_eq!(c.residue(0)[j as usize], want);
    }
}

#[test]
fn roundtrip_all_degrees() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut n = 16;
    while n <= 8192 {
        let rs = rings(&[60, 40], n);
        let p = random_poly(&mut rng, &rs, n);
        assert_eq!(ntt_inverse(&ntt_forward(&p, &rs).unwrap(), &rs).unwrap(), p, "N={n}");
        n *= 2;
    }
}

#[test]
fn add_sub_identities_and_level_checks() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let rs = rings(&[40, 40], 16);
    let a = random_poly(&mut rng, &rs, 16);
    let zero = RnsPoly::zero(16, 2, Domain::Coefficient);
    assert_eq!(poly_add(&a, &zero, &rs).unwrap(), a);
    assert!(poly_sub(&a, &a, &rs).unwrap().is_zero());

    let short = RnsPoly::zero(16, 1, Domain::Coefficient);
    assert!(poly_add(&a, &short, &rs).is_err());
    let ea = ntt_forward(&a, &rs).unwrap();
    assert!(poly_add(&a, &ea, &rs).is_err());
    assert!(poly_pointwise_mul(&a, &a, &rs).is_err());
}

#[test]
fn rns_ops_match_crt_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let rs = rings(&[50, 45, 40], 16);
    let primes: Vec<u64> = rs.iter().map(|r| r.q()).collect();
    let big_q: BigInt = primes.iter().map(|&p| BigInt::from(p)).product();
    let a = random_poly(&mut rng, &rs, 16);
    let b = random_poly(&mut rng, &rs, 16);
    let sum = poly_add(&a, &b, &rs).unwrap();
    let diff = poly_sub(&a, &b, &rs).unwrap();
    // products: stay in evaluation domain, CRT per slot
    let ea = ntt_forward(&a, &rs).unwrap();
    let eb = ntt_forward(&b, &rs).unwrap();
    let prod = poly_pointwise_mul(&ea, &eb, &rs).unwrap();
    let col = |p: &RnsPoly, j: usize| -> Vec<u64> { (0..rs.len()).map(|i| p.residue(i)[j]).collect() };
    for j in 0..16 {
        let (x, y) = (crt(&col(&a, j), &primes), crt(&col(&b, j), &primes));
        let canon = |v: BigInt| ((v % &big_q) + &big_q) % &big_q;
        assert_eq!(canon(crt(&col(&sum, j), &primes)), canon(&x + &y));
        assert_eq!(canon(crt(&col(&diff, j), &primes)), canon(&x - &y));
        let (ex, ey) = (crt(&col(&ea, j), &primes), crt(&col(&eb, j), &primes));
        assert_eq!(canon(crt(&col(&prod, j), &primes)), canon(ex * ey));
    }
}

#[test]
fn mod_switch_exact_division_and_zero() {
    let rs = rings(&[40, 30], 16);
    let q_last = rs[1].q() as i128;
    let ks: Vec<i128> = (0..16).map(|i| (i as i128 - 8) * 12345).collect();
    let scaled: Vec<i128> = ks.iter().map(|k| k * q_last).collect();
    let p = RnsPoly::from_signed_i128(&scaled, &rs);
    let out = mod_switch_drop_last(&p, &rs).unwrap();
    assert_eq!(out, RnsPoly::from_signed_i128(&ks, &rs[..1]));

    let zero = RnsPoly::zero(16, 2, Domain::Coefficient);
    assert!(mod_switch_drop_last(&zero, &rs).unwrap().is_zero());

    let single = RnsPoly::zero(16, 1, Domain::Coefficient);
    assert!(matches!(
        mod_switch_drop_last(&single, &rs),
        Err(fedvit::Error::BudgetExhausted(_))
    ));
}

#[test]
fn mod_switch_matches_round_divide_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for bits in [[40u32, 30], [60, 60], [30, 50]] {
        let rs = rings(&bits, 16);
        let primes: Vec<u64> = rs.iter().map(|r| r.q()).collect();
        for _ in 0..20 {
            let p = random_poly(&mut rng, &rs, 16);
            let out = mod_switch_drop_last(&p, &rs).unwrap();
            let q_last = BigInt::from(primes[1]);
            for j in 0..16 {
                let x = crt(&[p.residue(0)[j], p.residue(1)[j]], &primes);
                // round half away handled by centered remainder: x = k*q_last + r, |r| <= q_last/2
                let mut k = &x / &q_last;
                let mut r = &x - &k * &q_last;
                if &r * 2 > q_last {
                    k += BigInt::one();
                    r -= &q_last;
                } else if &r * -2 >= q_last {
                    k -= BigInt::one();
                    r += &q_last;
                }
                assert!(r.abs() * 2 <= q_last);
                assert_eq!(out.residue(0)[j], reduce_big(&k, primes[0]));
            }
        }
    }
}

#[test]
fn automorphism_eval_permutation_agrees_with_coefficients() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let n = 32;
    let rs = rings(&[40], n);
    let ring = &rs[0];
    let p = random_poly(&mut rng, &rs, n);
    for g in [5usize, 25, 2 * n - 1] {
        let coeff = ntt_forward(&p.automorphism_coeff(g, &rs).unwrap(), &rs).unwrap();
        // slot i of sigma_g(p) is p evaluated at x_i^g
        let e = ntt_forward(&p, &rs).unwrap();
        let pos: std::collections::HashMap<usize, usize> = (0..n).map(|i| (ring.eval_exponent(i), i)).collect();
        let perm: Vec<usize> = (0..n).map(|i| pos[&(ring.eval_exponent(i) * g % (2 * n))]).collect();
        assert_eq!(e.permute_eval(&perm).unwrap(), coeff);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn ntt_roundtrip_prop(seed in any::<u64>(), log_n in 4u32..=10) {
        let n = 1usize << log_n;
        let rs = rings(&[55, 35], n);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = random_poly(&mut rng, &rs, n);
        prop_assert_eq!(ntt_inverse(&ntt_forward(&p, &rs).unwrap(), &rs).unwrap(), p);
    }
}
