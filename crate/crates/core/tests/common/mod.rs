//! Independent oracles shared by the integration tests. Everything here is
//! written from the defining formulas with no fast paths.
#![allow(dead_code)]

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistlab::correlation::Ft2Params;
use twistlab::spectral::ComplexTable;
use twistlab::zmod::{gcd, inv_mod};

pub fn e(num: i128, den: u64) -> Complex64 {
    let r = num.rem_euclid(den as i128) as f64 / den as f64;
    Complex64::from_polar(1.0, TAU * r)
}

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_table(rng: &mut ChaCha8Rng, q: u64) -> ComplexTable {
    ComplexTable::from_fn(q, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap()
}

/// `q^{-1/2} sum_x f(x) e(nx/q)` in O(q^2).
pub fn naive_dft(f: &[Complex64]) -> Vec<Complex64> {
    let q = f.len() as u64;
    let s = (q as f64).sqrt();
    (0..q)
        .map(|n| f.iter().enumerate().map(|(x, &v)| v * e(n as i128 * x as i128, q)).sum::<Complex64>() / s)
        .collect()
}

/// `Kl_k(a; p)` by enumerating `x_1, ..., x_{k-1}` and solving for `x_k`; `a` must be a unit.
pub fn kl_direct(k: u32, a: u64, p: u64) -> Complex64 {
    fn rec(depth: u32, k: u32, prod: u64, sum: u64, a: u64, p: u64) -> Complex64 {
        if depth == k - 1 {
            let last = a * inv_mod(prod as i64, p).unwrap() % p;
            return e((sum + last) as i128, p);
        }
        (1..p).map(|x| rec(depth + 1, k, prod * x % p, (sum + x) % p, a, p)).sum()
    }
    rec(0, k, 1, 0, a % p, p) / (p as f64).powf((k - 1) as f64 / 2.0)
}

/// `d_3(n)` for `n = 1..=n_max` by counting triples `abc = n`.
pub fn d3_triples(n_max: usize) -> Vec<u64> {
    let mut out = vec![0u64; n_max + 1];
    for a in 1..=n_max {
        for b in 1..=n_max / a {
            for c in 1..=n_max / (a * b) {
                out[a * b * c] += 1;
            }
        }
    }
    out
}

pub fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// `FT_2` with both Kloosterman sums opened and the `v` sum done in closed form:
/// `k sum_{x1, x2} e(a x1/R - a' x2/R')` over units `x1 mod R`, `x2 mod R'` with
/// `+-(x1^{-1} c2' - x2^{-1} c2) + n = 0 mod k`.
pub fn ft2_opened(p: &Ft2Params) -> Complex64 {
    let s = p.r * p.c1 / p.n1;
    let (big_r, big_rp) = (s * p.c2, s * p.c2p);
    let k = s * p.c2 * p.c2p;
    let first = |m: u64, modulus: u64| -> i128 {
        if modulus == 1 {
            return 0;
        }
        let q0b = inv_mod(p.q0 as i64, modulus).unwrap() as i128;
        let mb = inv_mod(m as i64, modulus).unwrap() as i128;
        q0b * p.q1 as i128 % modulus as i128 * p.r as i128 % modulus as i128 * mb % modulus as i128
    };
    let (a, ap) = (first(p.m, big_r), first(p.mp, big_rp));
    let units = |modulus: u64| -> Vec<(u64, u64)> {
        (0..modulus)
            .filter(|&x| gcd(x, modulus) == 1)
            .map(|x| (x, if modulus == 1 { 0 } else { inv_mod(x as i64, modulus).unwrap() }))
            .collect()
    };
    let sign = if p.sign < 0 { -1i128 } else { 1 };
    let mut total = Complex64::new(0.0, 0.0);
    for (x1, x1b) in units(big_r) {
        for (x2, x2b) in units(big_rp) {
            let cond = sign * (x1b as i128 * p.c2p as i128 - x2b as i128 * p.c2 as i128) + p.n as i128;
            if cond.rem_euclid(k as i128) == 0 {
                total += e(a * x1 as i128, big_r) * e(-ap * x2 as i128, big_rp);
            }
        }
    }
    total * k as f64
}
