//! Internal exponential sums: the `Z_{alpha,beta}` family and its shifted
//! correlations, the `N_{c,r}` sum, `FT_1`, `FT_2`, and the `u`-sum of the
//! third error term. Each sum has a definition-level evaluation and a
//! structural one so the two can be compared.

use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{dft_normalized, unit_phase, ComplexTable, MultConvolver};
use crate::trace::{hyper_kloosterman_table, kloosterman_sum, realize, MultChar, SheafSpec, SheafVariant, TraceTable};
use crate::zmod::{euler_phi, gcd, inv_mod, is_prime, mobius, mul_mod, reduce};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn inv(a: i64, q: u64) -> Result<i64> {
    Ok(inv_mod(a, q)? as i64)
}

fn mulm(a: i64, b: i64, q: u64) -> i64 {
    mul_mod(reduce(a, q), reduce(b, q), q) as i64
}

fn require_prime(q: u64) -> Result<()> {
    if is_prime(q) {
        Ok(())
    } else {
        Err(Error::NotPrime(q))
    }
}

/// `Kl_2(a; p)` with its true value `-p^{-1/2}` at `a = 0` (the tables store 0 there).
fn kl2_true(kl2: &ComplexTable, a: i64) -> Complex64 {
    let p = kl2.modulus();
    if reduce(a, p) == 0 {
        Complex64::new(-1.0 / (p as f64).sqrt(), 0.0)
    } else {
        kl2.at(a)
    }
}

/// Shifted-correlation parameters over a prime field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairParams {
    pub q: u64,
    pub alpha: i64,
    pub beta: i64,
    pub alphap: i64,
    pub betap: i64,
    pub delta: i64,
}

impl PairParams {
    /// Reduces everything modulo `q`; `alpha, beta, alphap, betap` must be nonzero.
    pub fn new(q: u64, alpha: i64, beta: i64, alphap: i64, betap: i64, delta: i64) -> Result<Self> {
        require_prime(q)?;
        let r = |x: i64| reduce(x, q) as i64;
        for (name, v) in [("alpha", alpha), ("beta", beta), ("alphap", alphap), ("betap", betap)] {
            if r(v) == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be nonzero modulo {q}")));
            }
        }
        Ok(PairParams { q, alpha: r(alpha), beta: r(beta), alphap: r(alphap), betap: r(betap), delta: r(delta) })
    }
}

/// Evaluator for `Z_{alpha,beta}(v) = q^{-1/2} sum_{x != 0} K0(xv) e(alpha x v/q) Kl_2(beta x; q)`
/// for a fixed `K0`, reusing the convolution plan and the `Kl_2` table.
pub struct ZSums {
    k0: ComplexTable,
    conv: MultConvolver,
    kl2: ComplexTable,
    kl2_unit_sum: Complex64,
}

impl ZSums {
    pub fn new(k0: &TraceTable) -> Result<Self> {
        let q = k0.modulus();
        require_prime(q)?;
        let conv = MultConvolver::new(q)?;
        let kl2 = hyper_kloosterman_table(2, q)?.values().clone();
        let kl2_unit_sum = kl2.values()[1..].iter().sum();
        Ok(ZSums { k0: k0.values().clone(), conv, kl2, kl2_unit_sum })
    }

    pub fn modulus(&self) -> u64 {
        self.k0.modulus()
    }

    pub fn kl2(&self) -> &ComplexTable {
        &self.kl2
    }

    /// All values `Z(v)` through one multiplicative convolution of
    /// `y -> K0(y) e(alpha y/q)` with `t -> Kl_2(beta/t)`.
    pub fn z(&self, alpha: i64, beta: i64) -> Result<ComplexTable> {
        let q = self.modulus();
        let (alpha, beta) = (reduce(alpha, q), reduce(beta, q));
        if alpha == 0 || beta == 0 {
            return Err(Error::InvalidParameter("alpha and beta must be nonzero".into()));
        }
        let l = ComplexTable::from_fn(q, |y| self.k0.values()[y as usize] * unit_phase(mul_mod(alpha, y, q) as i64, q))?;
        let g = ComplexTable::from_fn(q, |t| {
            if t == 0 {
                ZERO
            } else {
                let tinv = inv_mod(t as i64, q).expect("unit");
                self.kl2.values()[mul_mod(beta, tinv, q) as usize]
            }
        })?;
        let mut values = self.conv.convolve(&l, &g)?.into_values();
        values[0] = self.k0.values()[0] * self.kl2_unit_sum / (q as f64).sqrt();
        ComplexTable::new(values)
    }
}

/// Fast `Z_{alpha,beta}` table over `v mod q`.
pub fn z_sum(k0: &TraceTable, alpha: i64, beta: i64) -> Result<ComplexTable> {
    ZSums::new(k0)?.z(alpha, beta)
}

/// `Z_{alpha,beta}` by the defining O(q^2) double sum, with `Kl_2` taken from
/// complete Kloosterman sums rather than from the convolution tables.
pub fn z_sum_direct(k0: &TraceTable, alpha: i64, beta: i64) -> Result<ComplexTable> {
    let q = k0.modulus();
    require_prime(q)?;
    let sq = (q as f64).sqrt();
    let kl: Vec<Complex64> = (0..q).map(|x| kloosterman_sum(1, mulm(beta, x as i64, q), q) / sq).collect();
    let values = par::map_range(q as usize, |v| {
        let mut s = ZERO;
        for x in 1..q {
            let xv = mul_mod(x, v as u64, q) as i64;
            s += k0.at(xv) * unit_phase(mulm(alpha, xv, q), q) * kl[x as usize];
        }
        s / sq
    });
    ComplexTable::new(values)
}

/// `Z_{alpha,beta}(v)` in the substituted form `q^{-1/2} sum_x K0(x) e(alpha x/q) Kl_2(beta x/v)`
/// for `v != 0`; the value at 0 is taken from the definition.
pub fn z_sum_second_form(k0: &TraceTable, alpha: i64, beta: i64) -> Result<ComplexTable> {
    let q = k0.modulus();
    require_prime(q)?;
    let kl2 = hyper_kloosterman_table(2, q)?;
    let sq = (q as f64).sqrt();
    let zero_term = k0.at(0) * (1..q).map(|x| kl2.at(mulm(beta, x as i64, q))).sum::<Complex64>() / sq;
    let values = par::map_range(q as usize, |v| {
        if v == 0 {
            return zero_term;
        }
        let vinv = inv_mod(v as i64, q).expect("unit") as i64;
        let mut s = ZERO;
        for x in 1..q as i64 {
            s += k0.at(x) * unit_phase(mulm(alpha, x, q), q) * kl2.at(mulm(mulm(beta, x, q), vinv, q));
        }
        s / sq
    });
    ComplexTable::new(values)
}

/// `sum_{v mod q} Z(v) conj(Z'(v - delta))`.
pub fn pair_correlation(z: &ComplexTable, zp: &ComplexTable, delta: i64) -> Result<Complex64> {
    if z.modulus() != zp.modulus() {
        return Err(Error::ModulusMismatch(z.modulus(), zp.modulus()));
    }
    let q = z.modulus();
    let d = reduce(delta, q) as usize;
    let qn = q as usize;
    let (a, b) = (z.values(), zp.values());
    Ok(par::sum_range(0, qn, |v| a[v] * b[(v + qn - d) % qn].conj()))
}

/// [`pair_correlation`] for every shift `delta = 0..q`.
pub fn pair_correlation_all_shifts(z: &ComplexTable, zp: &ComplexTable) -> Result<Vec<Complex64>> {
    if z.modulus() != zp.modulus() {
        return Err(Error::ModulusMismatch(z.modulus(), zp.modulus()));
    }
    let qn = z.modulus() as usize;
    let (a, b) = (z.values(), zp.values());
    Ok(par::map_range(qn, |d| {
        let mut s = ZERO;
        for v in 0..qn {
            s += a[v] * b[(v + qn - d) % qn].conj();
        }
        s
    }))
}

/// The `delta = 0` correlation split into its diagonal single sum and the lower-order terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaZeroReduction {
    /// `sum_{x != 0} K0(x) conj K0((beta/beta') x) e((alpha - alpha' beta/beta') x/q)`.
    pub diagonal: Complex64,
    /// `-(1 + 1/q) (K0^(alpha) - K0(0)/sqrt q) conj(K0^(alpha') - K0(0)/sqrt q)`.
    pub boundary: Complex64,
    /// `(K0^(alpha) - K0(0)) conj(K0^(alpha') - K0(0))`, accurate only up to O(1).
    pub approx_boundary: Complex64,
    /// Contribution of `v = 0`, namely `|K0(0)|^2 / q^2`.
    pub zero_frequency: Complex64,
}

impl DeltaZeroReduction {
    /// Exact value of `sum_v Z(v) conj Z'(v)`.
    pub fn total(&self) -> Complex64 {
        self.diagonal + self.boundary + self.zero_frequency
    }

    /// Diagonal plus the approximate boundary term; agrees with [`total`](Self::total) up to O(1).
    pub fn approx_total(&self) -> Complex64 {
        self.diagonal + self.approx_boundary
    }
}

pub fn delta_zero_reduction(k0: &TraceTable, alpha: i64, beta: i64, alphap: i64, betap: i64) -> Result<DeltaZeroReduction> {
    let q = k0.modulus();
    let p = PairParams::new(q, alpha, beta, alphap, betap, 0)?;
    let ratio = mulm(p.beta, inv(p.betap, q)?, q);
    let eta = reduce(p.alpha - mulm(p.alphap, ratio, q), q) as i64;
    let diagonal = par::sum_range(1, q as usize, |x| {
        let x = x as i64;
        k0.at(x) * k0.at(mulm(ratio, x, q)).conj() * unit_phase(mulm(eta, x, q), q)
    });
    let hat = dft_normalized(k0.values());
    let k00 = k0.at(0);
    let sq = (q as f64).sqrt();
    let (ha, hap) = (hat.at(p.alpha), hat.at(p.alphap));
    let boundary = -(1.0 + 1.0 / q as f64) * (ha - k00 / sq) * (hap - k00 / sq).conj();
    let approx_boundary = (ha - k00) * (hap - k00).conj();
    let zero_frequency = Complex64::new(k00.norm_sqr() / (q * q) as f64, 0.0);
    Ok(DeltaZeroReduction { diagonal, boundary, approx_boundary, zero_frequency })
}

/// The scaling torus `T` and affine stabilizer `Aff` of a spec, for the families where they are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryGroup {
    /// `T` is all of `F_q^*`, `Aff` is the scalings `y -> a y`.
    Kummer,
    /// `T = {1}`, `Aff = {identity}`.
    Rigid,
}

pub fn symmetry_group(spec: &SheafSpec) -> Result<SymmetryGroup> {
    match &spec.variant {
        SheafVariant::Kummer(chi) if !chi.is_trivial() => Ok(SymmetryGroup::Kummer),
        SheafVariant::HyperKloosterman { .. } => Ok(SymmetryGroup::Rigid),
        SheafVariant::Scale { inner, .. } => symmetry_group(inner),
        SheafVariant::AffinePullback { b, inner, .. } if reduce(*b, inner.modulus()) == 0 => symmetry_group(inner),
        _ => Err(Error::UnknownSymmetryGroup(spec.label())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneracyCase {
    ScalingTorus,
    AffineStabilizer,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegeneracyVerdict {
    pub degenerate: bool,
    pub case: DegeneracyCase,
    /// The scaling or affine map tested, as text.
    pub gamma: String,
}

/// Decides whether `sum_v Z(v) conj Z'(v - delta)` carries a main term of size `q`.
pub fn classify_degeneracy(spec: &SheafSpec, params: &PairParams) -> Result<DegeneracyVerdict> {
    let group = symmetry_group(spec)?;
    let q = params.q;
    let a_ratio = mulm(params.alpha, inv(params.alphap, q)?, q);
    let b_ratio = mulm(params.beta, inv(params.betap, q)?, q);
    let not = |gamma: String| DegeneracyVerdict { degenerate: false, case: DegeneracyCase::None, gamma };
    if params.delta != 0 {
        return Ok(not(format!("shift by {}", params.delta)));
    }
    if a_ratio == b_ratio {
        let in_torus = match group {
            SymmetryGroup::Kummer => true,
            SymmetryGroup::Rigid => a_ratio == 1,
        };
        let gamma = format!("y -> {a_ratio}y");
        return Ok(if in_torus {
            DegeneracyVerdict { degenerate: true, case: DegeneracyCase::ScalingTorus, gamma }
        } else {
            not(gamma)
        });
    }
    let translation = reduce(params.alpha - mulm(params.alphap, b_ratio, q), q);
    let gamma = format!("y -> {b_ratio}y + {translation}");
    if b_ratio == 1 {
        return Ok(not(gamma));
    }
    let in_aff = match group {
        SymmetryGroup::Kummer => translation == 0,
        SymmetryGroup::Rigid => b_ratio == 1 && translation == 0,
    };
    Ok(if in_aff {
        DegeneracyVerdict { degenerate: true, case: DegeneracyCase::AffineStabilizer, gamma }
    } else {
        not(gamma)
    })
}

/// Parameters of `N_{c,r}(m, n; q0)`; `sign` is the `+-` in the second Kloosterman argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NSumParams {
    pub c: i64,
    pub m: i64,
    pub q1: i64,
    pub n1: i64,
    pub r: i64,
    pub n: i64,
    pub sign: i64,
}

/// `N_{c,r}` evaluated with Kloosterman sums (first form) and with normalized
/// `Kl_2` (second form). The second form uses `Kl_2(0) = -q0^{-1/2}`.
pub fn n_sum_two_forms(k0: &TraceTable, p: &NSumParams) -> Result<(Complex64, Complex64)> {
    let q0 = k0.modulus();
    require_prime(q0)?;
    let cb = inv(p.c, q0)?;
    let q1b = inv(p.q1, q0)?;
    let rb = inv(p.r, q0)?;
    inv(p.n1, q0)?;
    let sign = if p.sign < 0 { -1 } else { 1 };
    let hat = dft_normalized(k0.values());
    let kl2 = hyper_kloosterman_table(2, q0)?;
    let sq = (q0 as f64).sqrt();
    let mut form1 = ZERO;
    let mut form2 = ZERO;
    for u in 1..q0 as i64 {
        let ub = inv(u, q0)?;
        let arg = mulm(mulm(cb, p.m - mulm(p.q1, u, q0), q0), q1b, q0);
        let h = hat.at(arg);
        let a = mulm(mulm(cb, p.n1, q0), ub, q0);
        let b = sign * mulm(mulm(mulm(rb, cb, q0), p.n1, q0), p.n, q0);
        form1 += h * kloosterman_sum(a, b, q0);
        let t = sign * mulm(mulm(mulm(mulm(cb, cb, q0), rb, q0), mulm(p.n1, p.n1, q0), q0), mulm(p.n, ub, q0), q0);
        form2 += h * kl2_true(kl2.values(), t);
    }
    Ok((form1 / q0 as f64, form2 / sq))
}

/// Parameters of `FT_1(n; q0)` for the pair `(c, m)`, `(c', m')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ft1Params {
    pub c: i64,
    pub cp: i64,
    pub m: i64,
    pub mp: i64,
    pub q1: i64,
    pub r: i64,
    pub n1: i64,
    pub n: i64,
    pub k: i64,
    /// The sign `epsilon`.
    pub sign: i64,
}

impl Ft1Params {
    /// The dictionary `alpha = c^{-1} m q1^{-1}`, `alpha' = c'^{-1} m' q1^{-1}`,
    /// `beta = eps c^{-3} r^{-1} n1^2`, `beta' = eps c'^{-3} r^{-1} n1^2`, `delta = k^{-1} n`,
    /// all modulo `q0`.
    pub fn pair_params(&self, q0: u64) -> Result<PairParams> {
        let (cb, cpb, q1b, rb, kb) = (inv(self.c, q0)?, inv(self.cp, q0)?, inv(self.q1, q0)?, inv(self.r, q0)?, inv(self.k, q0)?);
        inv(self.n1, q0)?;
        let eps = if self.sign < 0 { -1 } else { 1 };
        let n1sq = mulm(self.n1, self.n1, q0);
        let cube = |x: i64| mulm(mulm(x, x, q0), x, q0);
        let alpha = mulm(mulm(cb, self.m, q0), q1b, q0);
        let alphap = mulm(mulm(cpb, self.mp, q0), q1b, q0);
        let beta = eps * mulm(mulm(cube(cb), rb, q0), n1sq, q0);
        let betap = eps * mulm(mulm(cube(cpb), rb, q0), n1sq, q0);
        let delta = mulm(kb, self.n, q0);
        PairParams::new(q0, alpha, beta, alphap, betap, delta)
    }
}

/// `FT_1(n; q0)` from its defining triple sum over `u, u'` (units) and `v mod q0`.
/// The `u` and `u'` sums are performed inside the `v` sum, giving O(q0^2) work.
pub fn ft1_bruteforce(k0: &TraceTable, p: &Ft1Params) -> Result<Complex64> {
    let q0 = k0.modulus();
    require_prime(q0)?;
    p.pair_params(q0)?;
    let (cb, cpb, q1b, rb, kb) = (inv(p.c, q0)?, inv(p.cp, q0)?, inv(p.q1, q0)?, inv(p.r, q0)?, inv(p.k, q0)?);
    let eps = if p.sign < 0 { -1 } else { 1 };
    let hat = dft_normalized(k0.values());
    let kl2 = hyper_kloosterman_table(2, q0)?;
    let n1sq = mulm(p.n1, p.n1, q0);
    let units: Vec<(i64, i64)> = (1..q0 as i64).map(|u| (u, inv_mod(u, q0).unwrap() as i64)).collect();
    let hat_u: Vec<Complex64> = units
        .iter()
        .map(|&(u, _)| hat.at(mulm(mulm(cb, p.m - mulm(p.q1, u, q0), q0), q1b, q0)))
        .collect();
    let hat_up: Vec<Complex64> = units
        .iter()
        .map(|&(u, _)| hat.at(mulm(mulm(cpb, p.mp - mulm(p.q1, u, q0), q0), q1b, q0)))
        .collect();
    let coef = eps * mulm(mulm(mulm(cb, cb, q0), rb, q0), n1sq, q0);
    let coefp = eps * mulm(mulm(mulm(cpb, cpb, q0), rb, q0), n1sq, q0);
    let freq = mulm(p.n, kb, q0);
    let total = par::sum_range(0, q0 as usize, |v| {
        let v = v as i64;
        let mut y = ZERO;
        let mut yp = ZERO;
        for (i, &(_, ub)) in units.iter().enumerate() {
            let vu = mulm(v, ub, q0);
            y += hat_u[i] * kl2_true(kl2.values(), mulm(coef, vu, q0));
            yp += hat_up[i] * kl2_true(kl2.values(), mulm(coefp, vu, q0));
        }
        y * yp.conj() * unit_phase(mulm(freq, v, q0), q0)
    });
    Ok(total / q0 as f64)
}

/// `FT_1(n; q0)` as `sum_v Z(v) conj Z'(v - delta)` through the parameter dictionary.
pub fn ft1_as_pair_correlation(k0: &TraceTable, p: &Ft1Params) -> Result<Complex64> {
    let pp = p.pair_params(k0.modulus())?;
    let zs = ZSums::new(k0)?;
    let z = zs.z(pp.alpha, pp.beta)?;
    let zp = zs.z(pp.alphap, pp.betap)?;
    pair_correlation(&z, &zp, pp.delta)
}

/// Parameters of `FT_2(n; k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ft2Params {
    pub r: u64,
    pub c1: u64,
    pub c2: u64,
    pub c2p: u64,
    pub n1: u64,
    pub m: u64,
    pub mp: u64,
    pub q0: u64,
    pub q1: u64,
    pub sign: i64,
    pub n: i64,
}

impl Ft2Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.r, self.c1, self.c2, self.c2p, self.n1, self.m, self.mp, self.q1];
        if positive.contains(&0) {
            return Err(Error::InvalidParameter("FT_2 parameters must be positive".into()));
        }
        require_prime(self.q0)?;
        if (self.r * self.c1) % self.n1 != 0 {
            return Err(Error::InvalidParameter(format!("n1 = {} does not divide r c1 = {}", self.n1, self.r * self.c1)));
        }
        let qq = self.q0 * self.q1;
        for c in [self.c1 * self.c2, self.c1 * self.c2p] {
            if gcd(c, qq) != 1 {
                return Err(Error::ModuliNotCoprime(c, qq));
            }
        }
        if gcd(self.m, self.big_r()) != 1 {
            return Err(Error::NotInvertible { value: self.m as i64, modulus: self.big_r() });
        }
        if gcd(self.mp, self.big_rp()) != 1 {
            return Err(Error::NotInvertible { value: self.mp as i64, modulus: self.big_rp() });
        }
        if gcd(self.q0, self.k()) != 1 {
            return Err(Error::NotInvertible { value: self.q0 as i64, modulus: self.k() });
        }
        Ok(())
    }

    /// `r c1 / n1`.
    pub fn s(&self) -> u64 {
        self.r * self.c1 / self.n1
    }

    /// `r c1 c2 / n1`.
    pub fn big_r(&self) -> u64 {
        self.s() * self.c2
    }

    /// `r c1 c2' / n1`.
    pub fn big_rp(&self) -> u64 {
        self.s() * self.c2p
    }

    /// `k = r c1 c2 c2' / n1`.
    pub fn k(&self) -> u64 {
        self.s() * self.c2 * self.c2p
    }

    /// Case 1 is `n = 0 mod k`.
    pub fn is_case1(&self) -> bool {
        reduce(self.n, self.k()) == 0
    }

    /// `q0^{-1} q1 r m^{-1} mod R`.
    fn first_arg(&self, m: u64, modulus: u64) -> Result<i64> {
        let q0b = inv(self.q0 as i64, modulus)?;
        let mb = inv(m as i64, modulus)?;
        Ok(mulm(mulm(q0b, self.q1 as i64, modulus), mulm(self.r as i64, mb, modulus), modulus))
    }
}

/// `FT_2(n; k) = sum_{v mod k} S(q0^{-1} q1 r m^{-1}, +-q0^{-1} v; R) conj S(q0^{-1} q1 r m'^{-1}, +-q0^{-1} v; R') e(n v q0^{-1}/k)`
/// with `R = r c1 c2/n1`, `R' = r c1 c2'/n1`.
pub fn ft2_bruteforce(p: &Ft2Params) -> Result<Complex64> {
    p.validate()?;
    let (big_r, big_rp, k) = (p.big_r(), p.big_rp(), p.k());
    let a = p.first_arg(p.m, big_r)?;
    let ap = p.first_arg(p.mp, big_rp)?;
    let sign = if p.sign < 0 { -1 } else { 1 };
    let q0b_r = inv(p.q0 as i64, big_r)?;
    let q0b_rp = inv(p.q0 as i64, big_rp)?;
    let q0b_k = inv(p.q0 as i64, k)?;
    let freq = mulm(p.n, q0b_k, k);
    Ok(par::sum_range(0, k as usize, |v| {
        let v = v as i64;
        let s1 = kloosterman_sum(a, sign * mulm(q0b_r, v, big_r), big_r);
        let s2 = kloosterman_sum(ap, sign * mulm(q0b_rp, v, big_rp), big_rp);
        s1 * s2.conj() * unit_phase(mulm(freq, v, k), k)
    }))
}

/// Ramanujan sum `c_R(t) = sum_{d | (R, t)} d mu(R/d)` in exact integer arithmetic.
pub fn ramanujan_sum(big_r: u64, t: u64) -> i128 {
    let g = gcd(big_r, t);
    let mut total = 0i128;
    let mut d = 1;
    while d * d <= g {
        if g % d == 0 {
            total += d as i128 * mobius(big_r / d) as i128;
            let e = g / d;
            if e != d {
                total += e as i128 * mobius(big_r / e) as i128;
            }
        }
        d += 1;
    }
    total
}

/// Case 1 closed form: `delta_{c2 = c2'} k c_R(q1 r (m - m'))`.
pub fn ft2_closed_form_case1(p: &Ft2Params) -> Result<Complex64> {
    p.validate()?;
    if !p.is_case1() {
        return Err(Error::InvalidParameter(format!("n = {} is not divisible by k = {}", p.n, p.k())));
    }
    if p.c2 != p.c2p {
        return Ok(ZERO);
    }
    let diff = p.m.abs_diff(p.mp) as u128 * p.q1 as u128 * p.r as u128;
    let big_r = p.big_r();
    let t = (diff % big_r as u128) as u64;
    let value = p.k() as i128 * ramanujan_sum(big_r, t);
    Ok(Complex64::new(value as f64, 0.0))
}

/// Case 2: brute-force value and the bound `k phi(r c1/n1)`.
pub fn ft2_case2_bound_check(p: &Ft2Params) -> Result<(Complex64, f64)> {
    p.validate()?;
    if p.is_case1() {
        return Err(Error::InvalidParameter(format!("n = {} is divisible by k = {}", p.n, p.k())));
    }
    let value = ft2_bruteforce(p)?;
    Ok((value, (p.k() * euler_phi(p.s())) as f64))
}

/// Case-2 bound `k phi(r c1/n1) gcd(c2, c2')`. The extra `gcd(c2, c2')`
/// counts the solutions `(x1 mod c2, x2 mod c2')` of `x1 c2' - x2 c2 = const mod c2 c2'`.
pub fn ft2_case2_refined_bound(p: &Ft2Params) -> f64 {
    (p.k() * euler_phi(p.s()) * gcd(p.c2, p.c2p)) as f64
}

/// Outcome of an exhaustive sweep comparing the `|sum|/q >= 1/2` detector with [`classify_degeneracy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSweep {
    pub tuples: usize,
    pub agreements: usize,
    /// Detector fires, verdict says non-degenerate.
    pub false_positives: usize,
    /// Verdict says degenerate, detector silent.
    pub false_negatives: usize,
    pub max_nondegenerate_ratio: f64,
    pub min_degenerate_ratio: f64,
    /// Largest `||sum|/q - 1|` over degenerate tuples.
    pub max_degenerate_deviation: f64,
}

/// Sweeps every `(alpha', beta', delta)` with `alpha = beta = 1` for a Kummer
/// or hyper-Kloosterman spec of prime modulus. For Kummer sheaves the scalings
/// `x -> x/alpha` and `v -> v/beta` reduce an arbitrary tuple to this slice
/// without changing `|sum|` or the verdict.
pub fn exhaustive_detector_sweep(spec: &SheafSpec) -> Result<DetectorSweep> {
    let table = realize(spec)?;
    let q = table.modulus();
    let zs = ZSums::new(&table)?;
    let z = zs.z(1, 1)?;
    let pairs: Vec<(i64, i64)> = (1..q as i64).flat_map(|a| (1..q as i64).map(move |b| (a, b))).collect();
    let rows = par::map(&pairs, |&(ap, bp)| -> Result<Vec<(bool, f64)>> {
        let zp = zs.z(ap, bp)?;
        let shifts = pair_correlation_all_shifts(&z, &zp)?;
        shifts
            .iter()
            .enumerate()
            .map(|(d, s)| {
                let params = PairParams::new(q, 1, 1, ap, bp, d as i64)?;
                Ok((classify_degeneracy(spec, &params)?.degenerate, s.norm() / q as f64))
            })
            .collect()
    });
    let mut out = DetectorSweep {
        tuples: 0,
        agreements: 0,
        false_positives: 0,
        false_negatives: 0,
        max_nondegenerate_ratio: 0.0,
        min_degenerate_ratio: f64::INFINITY,
        max_degenerate_deviation: 0.0,
    };
    for row in rows {
        for (degenerate, ratio) in row? {
            out.tuples += 1;
            let fires = ratio >= 0.5;
            match (degenerate, fires) {
                (true, true) | (false, false) => out.agreements += 1,
                (false, true) => out.false_positives += 1,
                (true, false) => out.false_negatives += 1,
            }
            if degenerate {
                out.min_degenerate_ratio = out.min_degenerate_ratio.min(ratio);
                out.max_degenerate_deviation = out.max_degenerate_deviation.max((ratio - 1.0).abs());
            } else {
                out.max_nondegenerate_ratio = out.max_nondegenerate_ratio.max(ratio);
            }
        }
    }
    Ok(out)
}

/// Draws random `FT_2` parameters with `k <= max_k` from the natural domain:
/// `c1` supported on the primes of `r`, `n1 | r c1`, `c2, c2'` coprime to `n1 r`,
/// `c1 c2 c2'` coprime to `q0 q1`. In Case 1 (`n` a multiple of `k`) half the
/// draws force `c2 = c2'`; in Case 2 `n` is not a multiple of `k`.
pub fn random_ft2_params<R: Rng>(rng: &mut R, max_k: u64, case1: bool) -> Ft2Params {
    let rad_divides = |d: u64, r: u64| crate::zmod::factorize(d).iter().all(|&(p, _)| r % p == 0);
    loop {
        let r = rng.random_range(1..=6u64);
        let c1_choices: Vec<u64> = (1..=12).filter(|&d| rad_divides(d, r)).collect();
        let c1 = c1_choices[rng.random_range(0..c1_choices.len())];
        let n1_choices: Vec<u64> = (1..=r * c1).filter(|d| (r * c1) % d == 0).collect();
        let n1 = n1_choices[rng.random_range(0..n1_choices.len())];
        let c2 = rng.random_range(1..=20u64);
        let c2p = if case1 && rng.random_bool(0.5) { c2 } else { rng.random_range(1..=20u64) };
        if gcd(c2, n1 * r) != 1 || gcd(c2p, n1 * r) != 1 {
            continue;
        }
        let k = r * c1 * c2 * c2p / n1;
        if k > max_k || (k == 1 && !case1) {
            continue;
        }
        let q1 = rng.random_range(1..=30u64);
        if gcd(c1 * c2 * c2p, q1) != 1 {
            continue;
        }
        let q0 = loop {
            let q0 = rng.random_range(101..1000u64);
            if is_prime(q0) && gcd(q0, k) == 1 && gcd(q0, q1) == 1 {
                break q0;
            }
        };
        let s = r * c1 / n1;
        let m = loop {
            let m = rng.random_range(1..=60u64);
            if gcd(m, s * c2) == 1 {
                break m;
            }
        };
        let mp = loop {
            let mp = rng.random_range(1..=60u64);
            if gcd(mp, s * c2p) == 1 {
                break mp;
            }
        };
        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
        let n = if case1 {
            k as i64 * rng.random_range(-2..=2i64)
        } else {
            loop {
                let n = rng.random_range(-3 * k as i64..=3 * k as i64);
                if n.rem_euclid(k as i64) != 0 {
                    break n;
                }
            }
        };
        let p = Ft2Params { r, c1, c2, c2p, n1, m, mp, q0, q1, sign, n };
        if p.validate().is_ok() {
            return p;
        }
    }
}

/// `u`-sum of the third error term. Returns `(short_form, general_form)`
/// = `(-K0^(alpha), sqrt(q0) K0(0) - K0^(alpha))` with `alpha = c^{-1} m q1^{-1}`.
pub fn err3_u_sum(k0: &TraceTable, c: i64, m: i64, q1: i64) -> Result<(Complex64, Complex64)> {
    let q0 = k0.modulus();
    let alpha = mulm(mulm(inv(c, q0)?, m, q0), inv(q1, q0)?, q0);
    let h = crate::spectral::dft_at(k0.values(), alpha);
    Ok((-h, (q0 as f64).sqrt() * k0.at(0) - h))
}

/// `sum_{u unit} K0^(c^{-1}(m - q1 u) q1^{-1})` by direct summation.
pub fn err3_direct(k0: &TraceTable, c: i64, m: i64, q1: i64) -> Result<Complex64> {
    let q0 = k0.modulus();
    let (cb, q1b) = (inv(c, q0)?, inv(q1, q0)?);
    let hat = dft_normalized(k0.values());
    Ok((1..q0 as i64)
        .filter(|&u| gcd(u as u64, q0) == 1)
        .map(|u| hat.at(mulm(mulm(cb, m - mulm(q1, u, q0), q0), q1b, q0)))
        .sum())
}

/// Kernel families used by the randomized correlation sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFamily {
    /// Kummer sheaf of a random nontrivial character.
    Kummer,
    /// `Kl_2`.
    Kloosterman,
}

impl PairFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PairFamily::Kummer => "kummer",
            PairFamily::Kloosterman => "kl2",
        }
    }

    pub fn spec<R: Rng>(&self, q: u64, rng: &mut R) -> Result<SheafSpec> {
        Ok(match self {
            PairFamily::Kummer => SheafSpec::kummer(MultChar::new(q, rng.random_range(1..q - 1))?),
            PairFamily::Kloosterman => SheafSpec::hyper_kloosterman(2, q),
        })
    }
}

impl std::str::FromStr for PairFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kummer" => Ok(PairFamily::Kummer),
            "kl2" | "kloosterman" => Ok(PairFamily::Kloosterman),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

/// One row of a correlation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub spec_id: String,
    pub params: PairParams,
    pub value: Complex64,
    pub degenerate: bool,
}

impl PairRecord {
    pub fn ratio_to_sqrtq(&self) -> f64 {
        self.value.norm() / (self.params.q as f64).sqrt()
    }
}

/// Options for [`pair_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub family: PairFamily,
    pub q_min: u64,
    pub q_max: u64,
    pub count: usize,
    pub seed: u64,
    /// Only emit tuples classified as non-degenerate.
    pub non_degenerate_only: bool,
}

/// Random shifted-correlation tuples over primes in `[q_min, q_max]`.
/// Tuples are drawn sequentially from the seed and evaluated in parallel;
/// rows come back in draw order.
pub fn pair_sweep(opts: &SweepOptions) -> Result<Vec<PairRecord>> {
    let primes: Vec<u64> = (opts.q_min.max(3)..=opts.q_max).filter(|&q| is_prime(q)).collect();
    if primes.is_empty() {
        return Err(Error::InvalidParameter(format!("no primes in [{}, {}]", opts.q_min, opts.q_max)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut jobs = Vec::with_capacity(opts.count);
    while jobs.len() < opts.count {
        let q = primes[rng.random_range(0..primes.len())];
        let spec = opts.family.spec(q, &mut rng)?;
        let mut draw = || rng.random_range(1..q) as i64;
        let (a, b, ap, bp) = (draw(), draw(), draw(), draw());
        let delta = rng.random_range(0..q) as i64;
        let params = PairParams::new(q, a, b, ap, bp, delta)?;
        let verdict = classify_degeneracy(&spec, &params)?;
        if opts.non_degenerate_only && verdict.degenerate {
            continue;
        }
        jobs.push((spec, params, verdict.degenerate));
    }
    par::map(&jobs, |(spec, params, degenerate)| {
        let table = realize(spec)?;
        let zs = ZSums::new(&table)?;
        let z = zs.z(params.alpha, params.beta)?;
        let zp = zs.z(params.alphap, params.betap)?;
        Ok(PairRecord {
            spec_id: spec.label(),
            params: *params,
            value: pair_correlation(&z, &zp, params.delta)?,
            degenerate: *degenerate,
        })
    })
    .into_iter()
    .collect()
}

pub const PAIR_CSV_HEADER: &str = "q0,spec_id,alpha,beta,alphap,betap,delta,re,im,ratio_to_sqrtq,degenerate_flag";

pub fn write_pair_csv<W: Write>(records: &[PairRecord], mut out: W) -> std::io::Result<()> {
    let mut buf = String::new();
    writeln!(buf, "{PAIR_CSV_HEADER}").unwrap();
    for r in records {
        let p = &r.params;
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{:.17e},{:.17e},{:.17e},{}",
            p.q,
            r.spec_id,
            p.alpha,
            p.beta,
            p.alphap,
            p.betap,
            p.delta,
            r.value.re,
            r.value.im,
            r.ratio_to_sqrtq(),
            u8::from(r.degenerate)
        )
        .unwrap();
    }
    out.write_all(buf.as_bytes())
}
