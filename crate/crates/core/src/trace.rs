//! Trace functions as tabulated values on `Z/qZ`.
//!
//! A [`SheafSpec`] is a finite symbolic tree (characters, Artin–Schreier
//! phases, hyper-Kloosterman sums, pullbacks, products, CRT products, raw
//! tables) and [`realize`] turns it into a [`TraceTable`]. Goodness is carried
//! as declared metadata; only the whitelisted families may claim it.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{dft_at, dft_normalized, unit_phase, ComplexTable, MultConvolver};
use crate::zmod::{factorize, gcd, inv_mod, is_prime, mul_mod, pow_mod, primitive_root, reduce, DlogTable};

/// A multiplicative character of `F_p^*`, `chi(g^i) = e(e*i/(p-1))`, extended by `chi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultChar {
    p: u64,
    g: u64,
    e: u64,
}

impl MultChar {
    /// Character of exponent index `e` with respect to the smallest primitive root.
    pub fn new(p: u64, e: u64) -> Result<Self> {
        let g = primitive_root(p)?.value();
        Ok(MultChar { p, g, e: e % (p - 1).max(1) })
    }

    /// The quadratic (Legendre) character of an odd prime.
    pub fn quadratic(p: u64) -> Result<Self> {
        if p == 2 {
            return Err(Error::InvalidParameter("no quadratic character modulo 2".into()));
        }
        Self::new(p, (p - 1) / 2)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn generator(&self) -> u64 {
        self.g
    }

    pub fn exponent(&self) -> u64 {
        self.e
    }

    pub fn is_trivial(&self) -> bool {
        self.e == 0
    }

    /// Tabulates the character on `0..p`.
    pub fn table(&self) -> Result<Vec<Complex64>> {
        let dlog = DlogTable::new(self.p)?;
        let order = (self.p - 1).max(1);
        let mut values = vec![Complex64::new(0.0, 0.0); self.p as usize];
        for i in 0..dlog.order() {
            let x = dlog.power(i);
            values[x as usize] = unit_phase(mul_mod(self.e, i as u64, order) as i64, order);
        }
        Ok(values)
    }
}

/// The shape of a trace function.
#[derive(Debug, Clone, PartialEq)]
pub enum SheafVariant {
    Kummer(MultChar),
    /// `x -> e(P(x)/p)`; `coeffs[i]` multiplies `x^i`. An empty polynomial is the constant 1.
    ArtinSchreier { p: u64, coeffs: Vec<i64> },
    /// Normalized `Kl_k(a; p)`, zero at `a = 0`.
    HyperKloosterman { k: u32, p: u64 },
    /// `x -> inner(a*x + b)`.
    AffinePullback { a: i64, b: i64, inner: Box<SheafSpec> },
    /// `x -> inner(lambda*x)`.
    Scale { lambda: i64, inner: Box<SheafSpec> },
    PointwiseProduct(Vec<SheafSpec>),
    /// `n -> K0(n mod q0) K1(n mod q1)`.
    CrtProduct(Box<SheafSpec>, Box<SheafSpec>),
    RawTable(ComplexTable),
}

/// A symbolic trace function with its declared goodness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SheafSpec {
    pub variant: SheafVariant,
    pub good: bool,
}

/// Whether a variant is on the goodness whitelist: nontrivial Kummer sheaves
/// (tame at infinity), hyper-Kloosterman sheaves (slope `1/k`), their
/// scalings and pullbacks, and CRT products whose prime-modulus factor is good.
pub fn whitelisted_good(variant: &SheafVariant) -> bool {
    match variant {
        SheafVariant::Kummer(chi) => !chi.is_trivial(),
        SheafVariant::HyperKloosterman { .. } => true,
        SheafVariant::AffinePullback { inner, .. } | SheafVariant::Scale { inner, .. } => {
            whitelisted_good(&inner.variant)
        }
        SheafVariant::CrtProduct(k0, _) => whitelisted_good(&k0.variant),
        SheafVariant::ArtinSchreier { .. } | SheafVariant::PointwiseProduct(_) | SheafVariant::RawTable(_) => false,
    }
}

impl SheafSpec {
    /// Wraps a variant, declaring it good exactly when it is whitelisted.
    pub fn from_variant(variant: SheafVariant) -> Self {
        let good = whitelisted_good(&variant);
        SheafSpec { variant, good }
    }

    pub fn kummer(chi: MultChar) -> Self {
        Self::from_variant(SheafVariant::Kummer(chi))
    }

    pub fn artin_schreier(p: u64, coeffs: Vec<i64>) -> Self {
        Self::from_variant(SheafVariant::ArtinSchreier { p, coeffs })
    }

    /// The constant function 1 modulo `q`.
    pub fn constant_one(q: u64) -> Self {
        Self::artin_schreier(q, Vec::new())
    }

    pub fn hyper_kloosterman(k: u32, p: u64) -> Self {
        Self::from_variant(SheafVariant::HyperKloosterman { k, p })
    }

    pub fn affine_pullback(a: i64, b: i64, inner: SheafSpec) -> Self {
        Self::from_variant(SheafVariant::AffinePullback { a, b, inner: Box::new(inner) })
    }

    pub fn scale(lambda: i64, inner: SheafSpec) -> Self {
        Self::from_variant(SheafVariant::Scale { lambda, inner: Box::new(inner) })
    }

    pub fn product(factors: Vec<SheafSpec>) -> Self {
        Self::from_variant(SheafVariant::PointwiseProduct(factors))
    }

    pub fn crt_product(k0: SheafSpec, k1: SheafSpec) -> Self {
        Self::from_variant(SheafVariant::CrtProduct(Box::new(k0), Box::new(k1)))
    }

    pub fn raw(table: ComplexTable) -> Self {
        Self::from_variant(SheafVariant::RawTable(table))
    }

    /// Overrides the declared goodness; claiming goodness off the whitelist is rejected.
    pub fn with_good(mut self, good: bool) -> Result<Self> {
        if good && !whitelisted_good(&self.variant) {
            return Err(Error::InvalidSpec(format!("{} cannot be declared good", self.label())));
        }
        self.good = good;
        Ok(self)
    }

    pub fn modulus(&self) -> u64 {
        match &self.variant {
            SheafVariant::Kummer(chi) => chi.p,
            SheafVariant::ArtinSchreier { p, .. } | SheafVariant::HyperKloosterman { p, .. } => *p,
            SheafVariant::AffinePullback { inner, .. } | SheafVariant::Scale { inner, .. } => inner.modulus(),
            SheafVariant::PointwiseProduct(fs) => fs.first().map_or(1, |f| f.modulus()),
            SheafVariant::CrtProduct(a, b) => a.modulus() * b.modulus(),
            SheafVariant::RawTable(t) => t.modulus(),
        }
    }

    /// The two component moduli of a CRT product.
    pub fn crt_factors(&self) -> Option<(u64, u64)> {
        match &self.variant {
            SheafVariant::CrtProduct(a, b) => Some((a.modulus(), b.modulus())),
            _ => None,
        }
    }

    /// Checks moduli consistency and the goodness whitelist over the whole tree.
    pub fn validate(&self) -> Result<()> {
        if self.good && !whitelisted_good(&self.variant) {
            return Err(Error::InvalidSpec(format!("{} cannot be declared good", self.label())));
        }
        match &self.variant {
            SheafVariant::Kummer(chi) => {
                if !is_prime(chi.p) {
                    return Err(Error::NotPrime(chi.p));
                }
            }
            SheafVariant::ArtinSchreier { p, .. } => {
                if *p == 0 {
                    return Err(Error::InvalidSpec("modulus must be positive".into()));
                }
            }
            SheafVariant::HyperKloosterman { k, p } => {
                if *k < 2 {
                    return Err(Error::InvalidSpec(format!("hyper-Kloosterman needs k >= 2, got {k}")));
                }
                if !is_prime(*p) {
                    return Err(Error::NotPrime(*p));
                }
            }
            SheafVariant::AffinePullback { a, inner, .. } => {
                inner.validate()?;
                inv_mod(*a, inner.modulus())?;
            }
            SheafVariant::Scale { lambda, inner } => {
                inner.validate()?;
                inv_mod(*lambda, inner.modulus())?;
            }
            SheafVariant::PointwiseProduct(fs) => {
                let first = fs
                    .first()
                    .ok_or_else(|| Error::InvalidSpec("empty pointwise product".into()))?;
                for f in fs {
                    f.validate()?;
                    if f.modulus() != first.modulus() {
                        return Err(Error::ModulusMismatch(first.modulus(), f.modulus()));
                    }
                }
            }
            SheafVariant::CrtProduct(a, b) => {
                a.validate()?;
                b.validate()?;
                if gcd(a.modulus(), b.modulus()) != 1 {
                    return Err(Error::ModuliNotCoprime(a.modulus(), b.modulus()));
                }
            }
            SheafVariant::RawTable(_) => {}
        }
        Ok(())
    }

    /// Declared sup-norm bound, when the family has one.
    pub fn declared_bound(&self) -> Option<f64> {
        match &self.variant {
            SheafVariant::Kummer(_) | SheafVariant::ArtinSchreier { .. } => Some(1.0),
            SheafVariant::HyperKloosterman { k, .. } => Some(*k as f64),
            SheafVariant::AffinePullback { inner, .. } | SheafVariant::Scale { inner, .. } => inner.declared_bound(),
            SheafVariant::PointwiseProduct(fs) => fs.iter().map(|f| f.declared_bound()).product(),
            SheafVariant::CrtProduct(a, b) => Some(a.declared_bound()? * b.declared_bound()?),
            SheafVariant::RawTable(_) => None,
        }
    }

    /// Compact identifier without commas, used as `kernel_id`/`spec_id` in CSV output.
    pub fn label(&self) -> String {
        match &self.variant {
            SheafVariant::Kummer(chi) => format!("kummer_p{}_e{}", chi.p, chi.e),
            SheafVariant::ArtinSchreier { p, coeffs } => {
                let c: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("as_p{}_c{}", p, c.join(":"))
            }
            SheafVariant::HyperKloosterman { k, p } => format!("kl{k}_p{p}"),
            SheafVariant::AffinePullback { a, b, inner } => format!("pull_a{a}_b{b}[{}]", inner.label()),
            SheafVariant::Scale { lambda, inner } => format!("scale_{lambda}[{}]", inner.label()),
            SheafVariant::PointwiseProduct(fs) => {
                let parts: Vec<String> = fs.iter().map(|f| f.label()).collect();
                format!("prod[{}]", parts.join("*"))
            }
            SheafVariant::CrtProduct(a, b) => format!("crt[{}+{}]", a.label(), b.label()),
            SheafVariant::RawTable(t) => format!("raw_q{}", t.modulus()),
        }
    }
}

/// Tabulated values of a trace function together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    values: ComplexTable,
    spec: SheafSpec,
    supnorm: f64,
    fourier_order: u32,
}

impl TraceTable {
    fn build(values: ComplexTable, spec: SheafSpec, fourier_order: u32) -> Self {
        let supnorm = values.supnorm();
        TraceTable { values, spec, supnorm, fourier_order }
    }

    /// Wraps an arbitrary table as a `RawTable` trace function.
    pub fn from_raw(values: ComplexTable) -> Self {
        Self::build(values.clone(), SheafSpec::raw(values), 0)
    }

    pub fn modulus(&self) -> u64 {
        self.values.modulus()
    }

    pub fn values(&self) -> &ComplexTable {
        &self.values
    }

    pub fn spec(&self) -> &SheafSpec {
        &self.spec
    }

    pub fn supnorm(&self) -> f64 {
        self.supnorm
    }

    /// Number of normalized Fourier transforms applied to the realized spec.
    pub fn fourier_order(&self) -> u32 {
        self.fourier_order
    }

    #[inline]
    pub fn at(&self, x: i64) -> Complex64 {
        self.values.at(x)
    }

    /// Recomputes the sup-norm and checks it against the declared bound.
    pub fn check_invariants(&self) -> Result<()> {
        let sup = self.values.supnorm();
        if (sup - self.supnorm).abs() > 0.0 {
            return Err(Error::InvalidSpec("stale sup-norm".into()));
        }
        if self.fourier_order == 0 {
            if let Some(bound) = self.spec.declared_bound() {
                if sup > bound + 1e-9 {
                    return Err(Error::InvalidSpec(format!(
                        "sup-norm {sup} exceeds declared bound {bound} for {}",
                        self.spec.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes `modulus,<q>` followed by `x,re,im` rows with 18 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_table_csv(&self.values, out)
    }
}

/// CSV form of a table: header `modulus,<q>`, then one `x,re,im` row per residue.
pub fn write_table_csv<W: Write>(table: &ComplexTable, mut out: W) -> std::io::Result<()> {
    let mut buf = String::with_capacity(48 * table.values().len() + 16);
    writeln!(buf, "modulus,{}", table.modulus()).unwrap();
    for (x, z) in table.values().iter().enumerate() {
        writeln!(buf, "{x},{:.17e},{:.17e}", z.re, z.im).unwrap();
    }
    out.write_all(buf.as_bytes())
}

/// Parses the CSV form written by [`write_table_csv`].
pub fn read_table_csv<R: BufRead>(input: R) -> Result<ComplexTable> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table file".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let q: usize = header
        .trim()
        .strip_prefix("modulus,")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad header line `{header}`")))?;
    let mut values = vec![None; q];
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("bad row {}: `{line}`", lineno + 2));
        let mut parts = line.split(',');
        let x: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let re: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let im: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || x >= q {
            return Err(bad());
        }
        values[x] = Some(Complex64::new(re, im));
    }
    let values: Option<Vec<Complex64>> = values.into_iter().collect();
    ComplexTable::new(values.ok_or_else(|| Error::Parse("missing residues in table".into()))?)
}

/// Complete Kloosterman sum `S(a, b; c) = sum_{x mod c, (x,c)=1} e((a x + b x^{-1})/c)`.
pub fn kloosterman_sum(a: i64, b: i64, c: u64) -> Complex64 {
    assert!(c >= 1, "modulus must be positive");
    let a = reduce(a, c);
    let b = reduce(b, c);
    let mut sum = Complex64::new(0.0, 0.0);
    for x in 0..c {
        if gcd(x, c) != 1 {
            continue;
        }
        let xinv = inv_mod(x as i64, c).expect("unit");
        let t = (mul_mod(a, x, c) + mul_mod(b, xinv, c)) % c;
        sum += unit_phase(t as i64, c);
    }
    sum
}

/// Splits `S(a, b; mn)` for coprime `m, n` into `S(a n^{-1}, b n^{-1}; m)` and
/// `S(a m^{-1}, b m^{-1}; n)`, whose product is the full sum.
pub fn kloosterman_factorize(a: i64, b: i64, m: u64, n: u64) -> Result<(Complex64, Complex64)> {
    if gcd(m, n) != 1 {
        return Err(Error::ModuliNotCoprime(m, n));
    }
    let n_inv = inv_mod(n as i64, m)? as i64;
    let m_inv = inv_mod(m as i64, n)? as i64;
    let left = kloosterman_sum(
        reduce(a, m) as i64 * n_inv % m as i64,
        reduce(b, m) as i64 * n_inv % m as i64,
        m,
    );
    let right = kloosterman_sum(
        reduce(a, n) as i64 * m_inv % n as i64,
        reduce(b, n) as i64 * m_inv % n as i64,
        n,
    );
    Ok((left, right))
}

/// Values of `Kl_k(.; p)` on `0..p` by a left fold of multiplicative convolutions
/// of `x -> e(x/p)`; the value at 0 is 0.
fn hyper_kloosterman_values(k: u32, p: u64) -> Result<ComplexTable> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let conv = MultConvolver::new(p)?;
    let base = ComplexTable::from_fn(p, |x| if x == 0 { Complex64::new(0.0, 0.0) } else { unit_phase(x as i64, p) })?;
    let base_spectrum = conv.spectrum(&base)?;
    let mut current = base;
    for _ in 1..k {
        let s = conv.spectrum(&current)?;
        current = conv.from_spectra(&s, &base_spectrum);
    }
    Ok(current)
}

/// `Kl_k(a; p) = p^{-(k-1)/2} sum_{x_1...x_k = a} e((x_1+...+x_k)/p)` for all `a`.
pub fn hyper_kloosterman_table(k: u32, p: u64) -> Result<TraceTable> {
    let values = hyper_kloosterman_values(k, p)?;
    Ok(TraceTable::build(values, SheafSpec::hyper_kloosterman(k, p), 0))
}

/// `Kl_k(.; q)` for squarefree `q`, assembled from prime tables by twisted
/// multiplicativity: `Kl_k(a; q) = prod_p Kl_k(a (q/p)^{-k}; p)`.
#[derive(Debug, Clone)]
pub struct HyperKloostermanComposite {
    k: u32,
    q: u64,
    local: Vec<(u64, u64, ComplexTable)>,
}

impl HyperKloostermanComposite {
    pub fn new(k: u32, q: u64) -> Result<Self> {
        if q == 0 || factorize(q).iter().any(|&(_, e)| e > 1) {
            return Err(Error::NotSquarefree(q));
        }
        let mut local = Vec::new();
        for (p, _) in factorize(q) {
            let cofactor_inv = inv_mod((q / p) as i64, p)?;
            let twist = pow_mod(cofactor_inv, k as u64, p);
            local.push((p, twist, hyper_kloosterman_values(k, p)?));
        }
        Ok(HyperKloostermanComposite { k, q, local })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn eval(&self, a: i64) -> Complex64 {
        self.local
            .iter()
            .map(|(p, twist, table)| table.values()[mul_mod(reduce(a, *p), *twist, *p) as usize])
            .product()
    }
}

pub fn hyper_kloosterman_composite(k: u32, a: i64, q: u64) -> Result<Complex64> {
    Ok(HyperKloostermanComposite::new(k, q)?.eval(a))
}

/// Tabulates a symbolic trace function.
pub fn realize(spec: &SheafSpec) -> Result<TraceTable> {
    spec.validate()?;
    let values = realize_values(spec)?;
    Ok(TraceTable::build(values, spec.clone(), 0))
}

fn realize_values(spec: &SheafSpec) -> Result<ComplexTable> {
    match &spec.variant {
        SheafVariant::Kummer(chi) => ComplexTable::new(chi.table()?),
        SheafVariant::ArtinSchreier { p, coeffs } => {
            let p = *p;
            let reduced: Vec<u64> = coeffs.iter().map(|&c| reduce(c, p)).collect();
            ComplexTable::from_fn(p, |x| {
                let v = reduced.iter().rev().fold(0u64, |acc, &c| (mul_mod(acc, x, p) + c) % p);
                unit_phase(v as i64, p)
            })
        }
        SheafVariant::HyperKloosterman { k, p } => hyper_kloosterman_values(*k, *p),
        SheafVariant::AffinePullback { a, b, inner } => {
            let t = realize_values(inner)?;
            let q = t.modulus();
            let (a, b) = (reduce(*a, q), reduce(*b, q));
            ComplexTable::from_fn(q, |x| t.values()[((mul_mod(a, x, q) + b) % q) as usize])
        }
        SheafVariant::Scale { lambda, inner } => {
            let t = realize_values(inner)?;
            let q = t.modulus();
            let l = reduce(*lambda, q);
            ComplexTable::from_fn(q, |x| t.values()[mul_mod(l, x, q) as usize])
        }
        SheafVariant::PointwiseProduct(fs) => {
            let tables = fs.iter().map(realize_values).collect::<Result<Vec<_>>>()?;
            let q = tables[0].modulus();
            ComplexTable::from_fn(q, |x| tables.iter().map(|t| t.values()[x as usize]).product())
        }
        SheafVariant::CrtProduct(a, b) => {
            let (t0, t1) = (realize_values(a)?, realize_values(b)?);
            let (q0, q1) = (t0.modulus(), t1.modulus());
            ComplexTable::from_fn(q0 * q1, |n| t0.values()[(n % q0) as usize] * t1.values()[(n % q1) as usize])
        }
        SheafVariant::RawTable(t) => Ok(t.clone()),
    }
}

/// Normalized Fourier transform of a trace table, keeping its lineage.
pub fn fourier_of(table: &TraceTable) -> TraceTable {
    TraceTable::build(dft_normalized(&table.values), table.spec.clone(), table.fourier_order + 1)
}

/// Both sides of `K^(x; q0 q1) = K0^(x q1^{-1}; q0) K1^(x q0^{-1}; q1)` for the CRT
/// product `K = K0.K1`. The left side is a direct O(q) sum, the right side
/// comes from the fast transforms of the two factors.
pub fn twisted_multiplicativity_check(k0: &TraceTable, k1: &TraceTable, x: i64) -> Result<(Complex64, Complex64)> {
    let (q0, q1) = (k0.modulus(), k1.modulus());
    if gcd(q0, q1) != 1 {
        return Err(Error::ModuliNotCoprime(q0, q1));
    }
    let product = ComplexTable::from_fn(q0 * q1, |n| k0.values.values()[(n % q0) as usize] * k1.values.values()[(n % q1) as usize])?;
    let lhs = dft_at(&product, x);
    let q1_inv = inv_mod(q1 as i64, q0)?;
    let q0_inv = inv_mod(q0 as i64, q1)?;
    let hat0 = dft_normalized(&k0.values);
    let hat1 = dft_normalized(&k1.values);
    let rhs = hat0.values()[mul_mod(reduce(x, q0), q1_inv, q0) as usize]
        * hat1.values()[mul_mod(reduce(x, q1), q0_inv, q1) as usize];
    Ok((lhs, rhs))
}

/// Flat document form of a [`SheafSpec`] used by the structured text (TOML) format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<SpecDoc>>,
}

fn need<T: Copy>(v: Option<T>, key: &str, variant: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidSpec(format!("missing key `{key}` for variant `{variant}`")))
}

impl SpecDoc {
    pub fn from_spec(spec: &SheafSpec) -> Self {
        let mut doc = SpecDoc::default();
        match &spec.variant {
            SheafVariant::Kummer(chi) => {
                doc.variant = "kummer".into();
                doc.p = Some(chi.p);
                doc.e = Some(chi.e);
            }
            SheafVariant::ArtinSchreier { p, coeffs } => {
                doc.variant = "artin_schreier".into();
                doc.p = Some(*p);
                doc.coeffs = Some(coeffs.clone());
            }
            SheafVariant::HyperKloosterman { k, p } => {
                doc.variant = "hyper_kloosterman".into();
                doc.p = Some(*p);
                doc.k = Some(*k);
            }
            SheafVariant::AffinePullback { a, b, inner } => {
                doc.variant = "affine_pullback".into();
                doc.a = Some(*a);
                doc.b = Some(*b);
                doc.factors = Some(vec![SpecDoc::from_spec(inner)]);
            }
            SheafVariant::Scale { lambda, inner } => {
                doc.variant = "scale".into();
                doc.lambda = Some(*lambda);
                doc.factors = Some(vec![SpecDoc::from_spec(inner)]);
            }
            SheafVariant::PointwiseProduct(fs) => {
                doc.variant = "product".into();
                doc.factors = Some(fs.iter().map(SpecDoc::from_spec).collect());
            }
            SheafVariant::CrtProduct(a, b) => {
                doc.variant = "crt_product".into();
                doc.factors = Some(vec![SpecDoc::from_spec(a), SpecDoc::from_spec(b)]);
            }
            SheafVariant::RawTable(t) => {
                doc.variant = "raw".into();
                doc.values = Some(t.values().iter().map(|z| [z.re, z.im]).collect());
            }
        }
        doc.good = Some(spec.good);
        doc
    }

    pub fn to_spec(&self) -> Result<SheafSpec> {
        let v = self.variant.as_str();
        let factors = || -> Result<Vec<SheafSpec>> {
            self.factors
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec(format!("missing key `factors` for variant `{v}`")))?
                .iter()
                .map(SpecDoc::to_spec)
                .collect()
        };
        let single = || -> Result<SheafSpec> {
            let mut fs = factors()?;
            if fs.len() != 1 {
                return Err(Error::InvalidSpec(format!("key `factors` must hold exactly one spec for `{v}`")));
            }
            Ok(fs.remove(0))
        };
        let spec = match v {
            "kummer" => SheafSpec::kummer(MultChar::new(need(self.p, "p", v)?, need(self.e, "e", v)?)?),
            "artin_schreier" => SheafSpec::artin_schreier(need(self.p, "p", v)?, self.coeffs.clone().unwrap_or_default()),
            "hyper_kloosterman" => SheafSpec::hyper_kloosterman(need(self.k, "k", v)?, need(self.p, "p", v)?),
            "affine_pullback" => SheafSpec::affine_pullback(need(self.a, "a", v)?, self.b.unwrap_or(0), single()?),
            "scale" => SheafSpec::scale(need(self.lambda, "lambda", v)?, single()?),
            "product" => SheafSpec::product(factors()?),
            "crt_product" => {
                let mut fs = factors()?;
                if fs.len() != 2 {
                    return Err(Error::InvalidSpec("key `factors` must hold exactly two specs for `crt_product`".into()));
                }
                let b = fs.pop().unwrap();
                let a = fs.pop().unwrap();
                SheafSpec::crt_product(a, b)
            }
            "raw" => {
                let vals = self
                    .values
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("missing key `values` for variant `raw`".into()))?;
                SheafSpec::raw(ComplexTable::new(vals.iter().map(|&[re, im]| Complex64::new(re, im)).collect())?)
            }
            other => return Err(Error::InvalidSpec(format!("unknown value `{other}` for key `variant`"))),
        };
        let spec = match self.good {
            Some(g) => spec.with_good(g).map_err(|e| Error::InvalidSpec(format!("key `good`: {e}")))?,
            None => spec,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses a spec from its TOML text form.
pub fn parse_spec(text: &str) -> Result<SheafSpec> {
    let doc: SpecDoc = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.message().to_string()))?;
    doc.to_spec()
}

/// TOML text form of a spec.
pub fn spec_to_toml(spec: &SheafSpec) -> String {
    toml::to_string(&SpecDoc::from_spec(spec)).expect("spec documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn kloosterman_examples() {
        assert!(close(kloosterman_sum(1, 1, 2), Complex64::new(1.0, 0.0), 1e-12));
        assert!(close(kloosterman_sum(1, 1, 3), Complex64::new(-1.0, 0.0), 1e-12));
        for c in [1u64, 6, 10, 17] {
            let phi = (0..c).filter(|&x| gcd(x, c) == 1).count() as f64;
            assert!(close(kloosterman_sum(0, 0, c), Complex64::new(phi, 0.0), 1e-9));
        }
    }

    #[test]
    fn factorization_examples() {
        let (l, r) = kloosterman_factorize(1, 1, 3, 5).unwrap();
        assert!(close(l * r, kloosterman_sum(1, 1, 15), 1e-9));
        let (l, r) = kloosterman_factorize(1, 1, 1, 11).unwrap();
        assert!(close(l, Complex64::new(1.0, 0.0), 1e-12));
        assert!(close(r, kloosterman_sum(1, 1, 11), 1e-12));
        assert_eq!(kloosterman_factorize(1, 1, 2, 2), Err(Error::ModuliNotCoprime(2, 2)));
    }

    #[test]
    fn hyper_kloosterman_examples() {
        let kl2 = hyper_kloosterman_table(2, 3).unwrap();
        assert!(close(kl2.at(1), Complex64::new(-1.0 / 3f64.sqrt(), 0.0), 1e-12));
        let kl3 = hyper_kloosterman_table(3, 2).unwrap();
        assert!(close(kl3.at(1), Complex64::new(-0.5, 0.0), 1e-12));
        assert_eq!(kl3.at(0), Complex64::new(0.0, 0.0));
        assert_eq!(hyper_kloosterman_table(2, 9).unwrap_err(), Error::NotPrime(9));
    }

    #[test]
    fn composite_matches_direct_double_sum() {
        let q = 15u64;
        for a in (1..q as i64).filter(|&a| gcd(a as u64, q) == 1) {
            let direct: Complex64 = (1..q)
                .filter(|&x| gcd(x, q) == 1)
                .map(|x| {
                    let y = mul_mod(reduce(a, q), inv_mod(x as i64, q).unwrap(), q);
                    unit_phase((x + y) as i64, q)
                })
                .sum::<Complex64>()
                / (q as f64).sqrt();
            assert!(close(hyper_kloosterman_composite(2, a, q).unwrap(), direct, 1e-9), "a={a}");
        }
        let t = hyper_kloosterman_table(3, 7).unwrap();
        for a in 0..7 {
            assert!(close(hyper_kloosterman_composite(3, a, 7).unwrap(), t.at(a), 1e-12));
        }
        assert_eq!(hyper_kloosterman_composite(2, 1, 12).unwrap_err(), Error::NotSquarefree(12));
    }

    #[test]
    fn realize_examples() {
        let chi = MultChar::quadratic(3).unwrap();
        let spec = SheafSpec::crt_product(SheafSpec::kummer(chi), SheafSpec::constant_one(5));
        let t = realize(&spec).unwrap();
        assert!(close(t.at(7), Complex64::new(1.0, 0.0), 1e-15));

        let inner = SheafSpec::hyper_kloosterman(2, 11);
        let a = realize(&inner).unwrap();
        let b = realize(&SheafSpec::affine_pullback(1, 0, inner)).unwrap();
        assert_eq!(a.values(), b.values());

        let k0 = realize(&SheafSpec::hyper_kloosterman(2, 3)).unwrap();
        let k1 = realize(&SheafSpec::hyper_kloosterman(2, 5)).unwrap();
        let k = realize(&SheafSpec::crt_product(SheafSpec::hyper_kloosterman(2, 3), SheafSpec::hyper_kloosterman(2, 5)))
            .unwrap();
        for n in 0..15 {
            assert!(close(k.at(n), k0.at(n % 3) * k1.at(n % 5), 1e-12));
        }
    }

    #[test]
    fn kummer_is_multiplicative_and_unimodular() {
        for p in (2..=101u64).filter(|&p| is_prime(p)) {
            for e in [1, (p - 1) / 2, p.saturating_sub(2)] {
                let chi = MultChar::new(p, e).unwrap();
                let t = realize(&SheafSpec::kummer(chi)).unwrap();
                assert_eq!(t.at(0), Complex64::new(0.0, 0.0));
                for x in 1..p {
                    assert!((t.at(x as i64).norm() - 1.0).abs() < 1e-12);
                    for y in 1..p {
                        assert!(close(t.at((x * y % p) as i64), t.at(x as i64) * t.at(y as i64), 1e-9));
                    }
                }
                t.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn goodness_whitelist() {
        let chi = MultChar::new(7, 2).unwrap();
        assert!(SheafSpec::kummer(chi).good);
        assert!(!SheafSpec::kummer(MultChar::new(7, 0).unwrap()).good);
        assert!(SheafSpec::hyper_kloosterman(4, 31).good);
        assert!(SheafSpec::scale(3, SheafSpec::hyper_kloosterman(2, 31)).good);
        let as1 = SheafSpec::artin_schreier(7, vec![0, 1]);
        assert!(!as1.good);
        assert!(as1.with_good(true).is_err());
    }

    #[test]
    fn validation_errors() {
        let bad_crt = SheafSpec::crt_product(SheafSpec::constant_one(6), SheafSpec::constant_one(4));
        assert_eq!(realize(&bad_crt).unwrap_err(), Error::ModuliNotCoprime(6, 4));
        let bad_prod = SheafSpec::product(vec![SheafSpec::constant_one(5), SheafSpec::constant_one(7)]);
        assert_eq!(realize(&bad_prod).unwrap_err(), Error::ModulusMismatch(5, 7));
        let bad_pull = SheafSpec::affine_pullback(0, 1, SheafSpec::constant_one(5));
        assert!(matches!(realize(&bad_pull), Err(Error::NotInvertible { .. })));
        assert!(realize(&SheafSpec::hyper_kloosterman(1, 5)).is_err());
    }

    #[test]
    fn twisted_multiplicativity_worked_example() {
        // 5^{-1} = 2 mod 3 and 3^{-1} = 2 mod 5, so x = 7 maps to (2 mod 3, 4 mod 5)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rand_table = |q: u64| {
            TraceTable::from_raw(
                ComplexTable::from_fn(q, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .unwrap(),
            )
        };
        let k0 = rand_table(3);
        let k1 = rand_table(5);
        let (lhs, rhs) = twisted_multiplicativity_check(&k0, &k1, 7).unwrap();
        let expected = dft_at(k0.values(), 2) * dft_at(k1.values(), 4);
        assert!(close(lhs, rhs, 1e-12));
        assert!(close(rhs, expected, 1e-12));

        let one = realize(&SheafSpec::constant_one(4)).unwrap();
        let k1 = rand_table(9);
        for x in 0..36 {
            let (l, r) = twisted_multiplicativity_check(&one, &k1, x).unwrap();
            assert!(close(l, r, 1e-12));
        }
        assert!(twisted_multiplicativity_check(&one, &rand_table(6), 1).is_err());
    }

    #[test]
    fn fourier_of_keeps_lineage() {
        let t = realize(&SheafSpec::kummer(MultChar::quadratic(13).unwrap())).unwrap();
        let hat = fourier_of(&t);
        assert_eq!(hat.spec(), t.spec());
        assert_eq!(hat.fourier_order(), 1);
        // Gauss sums of a nontrivial character have modulus sqrt(p)
        assert!((hat.supnorm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let t = realize(&SheafSpec::hyper_kloosterman(3, 17)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("modulus,17\n0,"));
        let back = read_table_csv(&buf[..]).unwrap();
        assert_eq!(&back, t.values());
        assert!(read_table_csv("modulus,3\n0,1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn spec_text_round_trip_and_diagnostics() {
        let spec = SheafSpec::crt_product(
            SheafSpec::scale(3, SheafSpec::kummer(MultChar::new(11, 4).unwrap())),
            SheafSpec::affine_pullback(2, 1, SheafSpec::hyper_kloosterman(2, 7)),
        );
        let text = spec_to_toml(&spec);
        assert_eq!(parse_spec(&text).unwrap(), spec);

        let err = parse_spec("variant = \"kummer\"\np = 7\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = parse_spec("variant = \"kummer\"\np = 7\n").unwrap_err();
        assert!(err.to_string().contains("`e`"), "{err}");
        let err = parse_spec("variant = \"artin_schreier\"\np = 7\ncoeffs = [0, 1]\ngood = true\n").unwrap_err();
        assert!(err.to_string().contains("good"), "{err}");
    }
}
