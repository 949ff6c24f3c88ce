//! Randomized identity batteries shared by the `check` and `ft2` subcommands.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlation::{
    err3_direct, err3_u_sum, ft2_bruteforce, ft2_case2_bound_check, ft2_case2_refined_bound, ft2_closed_form_case1,
    n_sum_two_forms, random_ft2_params, Ft2Params, NSumParams,
};
use crate::error::Result;
use crate::par;
use crate::spectral::ComplexTable;
use crate::trace::{
    kloosterman_factorize, kloosterman_sum, realize, twisted_multiplicativity_check, MultChar, SheafSpec, TraceTable,
};
use crate::zmod::{gcd, is_prime};

/// Outcome of a battery of randomized checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub name: String,
    pub trials: usize,
    pub passed: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Battery {
    fn from_errors(name: &str, errors: &[f64], tolerance: f64) -> Self {
        Battery {
            name: name.into(),
            trials: errors.len(),
            passed: errors.iter().filter(|&&e| e <= tolerance).count(),
            max_error: errors.iter().copied().fold(0.0, f64::max),
            tolerance,
        }
    }

    pub fn ok(&self) -> bool {
        self.passed == self.trials
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {}/{} within {:e} (max error {:.3e})",
            self.name, self.passed, self.trials, self.tolerance, self.max_error
        )
    }
}

fn random_prime<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    loop {
        let p = rng.random_range(lo..=hi);
        if is_prime(p) {
            return p;
        }
    }
}

fn random_unit<R: Rng>(rng: &mut R, q: u64) -> i64 {
    loop {
        let a = rng.random_range(1..q.max(2) + 40) as i64;
        if gcd(a as u64 % q, q) == 1 && a as u64 % q != 0 {
            return a;
        }
    }
}

fn random_table<R: Rng>(rng: &mut R, q: u64) -> TraceTable {
    TraceTable::from_raw(
        ComplexTable::from_fn(q, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .expect("finite"),
    )
}

/// A whitelisted kernel modulo a prime: a random nontrivial Kummer sheaf or `Kl_2`.
fn random_good_spec<R: Rng>(rng: &mut R, p: u64) -> SheafSpec {
    if rng.random_bool(0.5) {
        SheafSpec::kummer(MultChar::new(p, rng.random_range(1..p - 1)).expect("prime"))
    } else {
        SheafSpec::hyper_kloosterman(2, p)
    }
}

/// Twisted multiplicativity of the normalized Fourier transform over random
/// tables `K0 mod q0`, `K1 mod q1` with `q0 q1 <= max_q`.
pub fn twisted_mult(trials: usize, max_q: u64, seed: u64) -> Result<Battery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(trials);
    while jobs.len() < trials {
        let q0 = rng.random_range(1..=100u64.min(max_q));
        let q1 = rng.random_range(1..=(max_q / q0).max(1));
        if gcd(q0, q1) != 1 {
            continue;
        }
        let k0 = random_table(&mut rng, q0);
        let k1 = random_table(&mut rng, q1);
        let x = rng.random_range(0..(q0 * q1) as i64);
        jobs.push((k0, k1, x));
    }
    let errors = par::map(&jobs, |(k0, k1, x)| {
        twisted_multiplicativity_check(k0, k1, *x).map(|(l, r)| (l - r).norm())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Battery::from_errors("twisted multiplicativity", &errors, 1e-9))
}

/// `S(a, b; mn) = S(a n^{-1}, b n^{-1}; m) S(a m^{-1}, b m^{-1}; n)` over random coprime `m, n` with `mn <= max_mn`.
pub fn kloosterman_factor(trials: usize, max_mn: u64, seed: u64) -> Result<Battery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(trials);
    while jobs.len() < trials {
        let m = rng.random_range(1..=200u64.min(max_mn));
        let n = rng.random_range(1..=(max_mn / m).max(1));
        if gcd(m, n) != 1 {
            continue;
        }
        let c = (m * n) as i64;
        jobs.push((rng.random_range(-c..=c), rng.random_range(-c..=c), m, n));
    }
    let errors = par::map(&jobs, |&(a, b, m, n)| {
        kloosterman_factorize(a, b, m, n).map(|(l, r)| (l * r - kloosterman_sum(a, b, m * n)).norm())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Battery::from_errors("Kloosterman factorization", &errors, 1e-9))
}

/// The two forms of `N_{c,r}(m, n; q0)`; `q0 = None` draws primes up to 397.
pub fn nsum(trials: usize, q0: Option<u64>, seed: u64) -> Result<Battery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p = q0.unwrap_or_else(|| random_prime(&mut rng, 5, 397));
        let spec = random_good_spec(&mut rng, p);
        let n = if rng.random_bool(0.2) { p as i64 * rng.random_range(-2..=2) } else { rng.random_range(-500..=500) };
        let params = NSumParams {
            c: random_unit(&mut rng, p),
            m: rng.random_range(-500..=500),
            q1: random_unit(&mut rng, p),
            n1: random_unit(&mut rng, p),
            r: random_unit(&mut rng, p),
            n,
            sign: if rng.random_bool(0.5) { 1 } else { -1 },
        };
        jobs.push((spec, params));
    }
    let errors = par::map(&jobs, |(spec, params)| {
        let k0 = realize(spec)?;
        n_sum_two_forms(&k0, params).map(|(a, b)| (a - b).norm())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Battery::from_errors("N_{c,r} two forms", &errors, 1e-9))
}

/// The `u`-sum identity `sum_u K0^(...) = sqrt(q0) K0(0) - K0^(alpha)` over kernels
/// with and without `K0(0) = 0`; when `K0(0) = 0` the shorter form `-K0^(alpha)` is also checked.
pub fn err3(trials: usize, q0: Option<u64>, seed: u64) -> Result<Battery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p = q0.unwrap_or_else(|| random_prime(&mut rng, 3, 397));
        let k0 = match rng.random_range(0..4) {
            0 => realize(&random_good_spec(&mut rng, p))?,
            1 => realize(&SheafSpec::constant_one(p))?,
            2 => realize(&SheafSpec::artin_schreier(p, vec![0, rng.random_range(1..p as i64)]))?,
            _ => random_table(&mut rng, p),
        };
        jobs.push((k0, random_unit(&mut rng, p), rng.random_range(-500..=500i64), random_unit(&mut rng, p)));
    }
    let errors = par::map(&jobs, |(k0, c, m, q1)| -> Result<f64> {
        let direct = err3_direct(k0, *c, *m, *q1)?;
        let (short, corrected) = err3_u_sum(k0, *c, *m, *q1)?;
        let mut e = (direct - corrected).norm();
        if k0.at(0) == Complex64::new(0.0, 0.0) {
            e = e.max((direct - short).norm());
        }
        Ok(e)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Battery::from_errors("err3 u-sum", &errors, 1e-9))
}

/// One `FT_2` comparison row.
#[derive(Debug, Clone, PartialEq)]
pub struct Ft2Row {
    pub params: Ft2Params,
    pub value: Complex64,
    /// Closed form (Case 1) or the stated bound (Case 2).
    pub reference: f64,
    pub refined_bound: f64,
}

pub const FT2_CSV_HEADER: &str = "r,c1,c2,c2p,n1,m,mp,q0,q1,sign,n,k,re,im,reference,refined_bound";

pub fn ft2_rows_csv(rows: &[Ft2Row]) -> String {
    use std::fmt::Write as _;
    let mut buf = format!("{FT2_CSV_HEADER}\n");
    for row in rows {
        let p = &row.params;
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            p.r, p.c1, p.c2, p.c2p, p.n1, p.m, p.mp, p.q0, p.q1, p.sign, p.n, p.k(),
            row.value.re, row.value.im, row.reference, row.refined_bound
        )
        .unwrap();
    }
    buf
}

/// Case 1 sweep: brute force against the closed form. Returns the rows and the largest error.
pub fn ft2_case1(trials: usize, max_k: u64, seed: u64) -> Result<(Vec<Ft2Row>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<Ft2Params> = (0..trials).map(|_| random_ft2_params(&mut rng, max_k, true)).collect();
    let rows = par::map(&params, |p| -> Result<Ft2Row> {
        let value = ft2_bruteforce(p)?;
        let closed = ft2_closed_form_case1(p)?;
        Ok(Ft2Row { params: *p, value, reference: closed.re, refined_bound: closed.re })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_err = rows.iter().map(|r| (r.value - Complex64::new(r.reference, 0.0)).norm()).fold(0.0, f64::max);
    Ok((rows, max_err))
}

/// Case 2 sweep: brute force against `k phi(r c1/n1)` and the refined bound.
pub fn ft2_case2(trials: usize, max_k: u64, seed: u64) -> Result<Vec<Ft2Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<Ft2Params> = (0..trials).map(|_| random_ft2_params(&mut rng, max_k, false)).collect();
    par::map(&params, |p| -> Result<Ft2Row> {
        let (value, bound) = ft2_case2_bound_check(p)?;
        Ok(Ft2Row { params: *p, value, reference: bound, refined_bound: ft2_case2_refined_bound(p) })
    })
    .into_iter()
    .collect()
}

/// Counts rows whose value exceeds the given bound column.
pub fn bound_violations(rows: &[Ft2Row], refined: bool) -> usize {
    rows.iter()
        .filter(|r| {
            let b = if refined { r.refined_bound } else { r.reference };
            r.value.norm() > b * (1.0 + 1e-12) + 1e-9
        })
        .count()
}
