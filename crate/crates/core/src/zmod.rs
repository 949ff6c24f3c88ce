//! Exact modular arithmetic on 64-bit moduli.
//!
//! Everything here is integer-only: residues, inverses, CRT, deterministic
//! primality, primitive roots and discrete logarithms.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A residue class `value mod modulus` with `0 <= value < modulus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    /// Reduces an arbitrary signed integer modulo `modulus` (which must be positive).
    pub fn new(value: i64, modulus: u64) -> Self {
        assert!(modulus > 0, "modulus must be positive");
        Residue { value: reduce(value, modulus), modulus }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }
}

/// A factored modulus `q = q0 * q1` with `q0` prime and `gcd(q0, q1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    q: u64,
    q0: u64,
    q1: u64,
}

impl Modulus {
    pub fn new(q0: u64, q1: u64) -> Result<Self> {
        if !is_prime(q0) {
            return Err(Error::NotPrime(q0));
        }
        if q1 == 0 || gcd(q0, q1) != 1 {
            return Err(Error::ModuliNotCoprime(q0, q1));
        }
        let q = q0
            .checked_mul(q1)
            .ok_or_else(|| Error::InvalidParameter(format!("{q0}*{q1} overflows")))?;
        Ok(Modulus { q, q0, q1 })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn q0(&self) -> u64 {
        self.q0
    }

    pub fn q1(&self) -> u64 {
        self.q1
    }
}

/// `value mod modulus` in `[0, modulus)`.
#[inline]
pub fn reduce(value: i64, modulus: u64) -> u64 {
    (value as i128).rem_euclid(modulus as i128) as u64
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m` via the extended Euclidean algorithm.
pub fn inv_mod(a: i64, m: u64) -> Result<u64> {
    let a_red = reduce(a, m);
    let (mut old_r, mut r) = (a_red as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    if old_r != 1 {
        return Err(Error::NotInvertible { value: a, modulus: m });
    }
    Ok(old_s.rem_euclid(m as i128) as u64)
}

pub fn mod_inverse(a: Residue) -> Result<Residue> {
    let inv = inv_mod(a.value as i64, a.modulus)?;
    Ok(Residue { value: inv, modulus: a.modulus })
}

/// The unique residue modulo `q0 * q1` congruent to `a0` and `a1`.
pub fn crt_combine(a0: Residue, a1: Residue) -> Result<Residue> {
    let (m0, m1) = (a0.modulus, a1.modulus);
    if gcd(m0, m1) != 1 {
        return Err(Error::ModuliNotCoprime(m0, m1));
    }
    let q = m0 * m1;
    // x = a0 + m0 * ((a1 - a0) * m0^{-1} mod m1)
    let m0_inv = inv_mod(m0 as i64, m1)?;
    let diff = reduce(a1.value as i64 - (a0.value % m1) as i64, m1);
    let t = mul_mod(diff, m0_inv, m1);
    Ok(Residue { value: a0.value + m0 * t, modulus: q })
}

/// Deterministic Miller–Rabin; the witness set {2,..,17} is exact below 3.4e14.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 7] = [2, 3, 5, 7, 11, 13, 17];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization by trial division, primes in increasing order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .into_iter()
        .fold(n, |acc, (p, _)| acc / p * (p - 1))
}

pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn is_squarefree(n: u64) -> bool {
    n > 0 && factorize(n).iter().all(|&(_, e)| e == 1)
}

/// Smallest generator of `(Z/pZ)^*`.
pub fn primitive_root(p: u64) -> Result<Residue> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == 2 {
        return Ok(Residue { value: 1, modulus: 2 });
    }
    let prime_factors: Vec<u64> = factorize(p - 1).into_iter().map(|(f, _)| f).collect();
    let g = (2..p)
        .find(|&g| prime_factors.iter().all(|&f| pow_mod(g, (p - 1) / f, p) != 1))
        .expect("a prime modulus always has a primitive root");
    Ok(Residue { value: g, modulus: p })
}

/// Baby-step giant-step discrete logarithm: the `e` in `[0, p-1)` with
/// `g^e = x (mod p)`, where `g` is a primitive root modulo the prime `p`.
pub fn discrete_log(x: Residue, g: Residue) -> Result<u64> {
    let p = g.modulus;
    if x.modulus != p {
        return Err(Error::ModulusMismatch(x.modulus, p));
    }
    if x.value == 0 {
        return Err(Error::ZeroArgument);
    }
    let order = p - 1;
    if order <= 1 {
        return Ok(0);
    }
    let m = (order as f64).sqrt().ceil() as u64;
    let mut baby = HashMap::with_capacity(m as usize);
    let mut cur = 1u64;
    for j in 0..m {
        baby.entry(cur).or_insert(j);
        cur = mul_mod(cur, g.value, p);
    }
    // giant step factor g^{-m}
    let factor = pow_mod(inv_mod(g.value as i64, p)?, m, p);
    let mut gamma = x.value;
    for i in 0..=m {
        if let Some(&j) = baby.get(&gamma) {
            return Ok((i * m + j) % order);
        }
        gamma = mul_mod(gamma, factor, p);
    }
    Err(Error::InvalidParameter(format!(
        "{} is not a primitive root modulo {p}",
        g.value
    )))
}

/// Full power and logarithm tables for `F_p^*` with respect to the smallest
/// primitive root.
#[derive(Debug, Clone)]
pub struct DlogTable {
    p: u64,
    generator: u64,
    powers: Vec<u64>,
    logs: Vec<u32>,
}

impl DlogTable {
    pub fn new(p: u64) -> Result<Self> {
        let g = primitive_root(p)?.value;
        let n = (p - 1) as usize;
        let mut powers = Vec::with_capacity(n);
        let mut logs = vec![0u32; p as usize];
        let mut cur = 1u64;
        for i in 0..n {
            powers.push(cur);
            logs[cur as usize] = i as u32;
            cur = mul_mod(cur, g, p);
        }
        Ok(DlogTable { p, generator: g, powers, logs })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    /// Order of the unit group, `p - 1`.
    pub fn order(&self) -> usize {
        self.powers.len()
    }

    /// `g^i mod p`, with `i` taken modulo `p - 1`.
    pub fn power(&self, i: usize) -> u64 {
        self.powers[i % self.powers.len()]
    }

    /// Discrete log of a nonzero residue.
    pub fn log(&self, x: u64) -> Result<usize> {
        let x = x % self.p;
        if x == 0 {
            return Err(Error::ZeroArgument);
        }
        Ok(self.logs[x as usize] as usize)
    }
}
