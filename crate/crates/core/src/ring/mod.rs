//! Exact arithmetic in `Z_q[X]/(X^N + 1)` over a chain of NTT-friendly primes.

pub mod modulus;
pub mod ntt;
pub mod poly;

pub use modulus::{is_prime, ntt_primes, Modulus};
pub use ntt::PrimeRing;
pub use poly::{
    mod_switch_drop_last, ntt_forward, ntt_inverse, poly_add, poly_pointwise_mul, poly_sub, Domain, RnsPoly,
};
