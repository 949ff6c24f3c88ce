//! Desk-scale experiments: smooth weights, correlation sums against trace
//! functions, discrepancies in progressions, a bilinear `Kl_4` preset and
//! log-log exponent fits over dyadic ladders.

use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::CoefficientSeries;
use crate::error::{Error, Result};
use crate::par;
use crate::trace::{HyperKloostermanComposite, TraceTable};
use crate::zmod::{euler_phi, gcd, is_squarefree, mul_mod, reduce};

/// Smooth weight supported on `[1, 2]`, equal to 1 on `[1 + w, 2 - w]` with `w = 1/(2Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightV {
    z: f64,
}

fn sigma(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step from 0 at `t <= 0` to 1 at `t >= 1`, with `psi(1/2) = 1/2`.
fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = sigma(t);
        a / (a + sigma(1.0 - t))
    }
}

impl WeightV {
    pub fn new(z: f64) -> Result<Self> {
        if !(z >= 1.0) || !z.is_finite() {
            return Err(Error::InvalidParameter(format!("Z must be a finite real >= 1, got {z}")));
        }
        Ok(WeightV { z })
    }

    /// The weight with `Z = 1`.
    pub fn standard() -> Self {
        WeightV { z: 1.0 }
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn edge_width(&self) -> f64 {
        0.5 / self.z
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = self.edge_width();
        if !(1.0..=2.0).contains(&x) {
            0.0
        } else if x < 1.0 + w {
            psi((x - 1.0) / w)
        } else if x > 2.0 - w {
            psi((2.0 - x) / w)
        } else {
            1.0
        }
    }
}

/// `weight_eval(V, x)`.
pub fn weight_eval(v: &WeightV, x: f64) -> f64 {
    v.eval(x)
}

/// One weighted correlation sum `sum_n lambda(n) K(n) V(n/X)` and its trivial bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRecord {
    pub experiment: String,
    pub kernel_id: String,
    pub q: u64,
    pub q0: u64,
    pub x: f64,
    pub z: f64,
    pub value: Complex64,
    pub trivial_bound: f64,
    pub ratio: f64,
}

impl CorrelationRecord {
    fn new(experiment: &str, kernel_id: String, q: u64, q0: u64, x: f64, z: f64, value: Complex64, trivial_bound: f64) -> Self {
        let ratio = if trivial_bound > 0.0 { value.norm() / trivial_bound } else { 0.0 };
        CorrelationRecord { experiment: experiment.into(), kernel_id, q, q0, x, z, value, trivial_bound, ratio }
    }
}

/// Integers `n` with `n/X` in `[1, 2]`.
fn support(x: f64) -> (usize, usize) {
    ((x.ceil() as usize).max(1), (2.0 * x).floor() as usize)
}

fn check_length(coeffs: &CoefficientSeries, x: f64) -> Result<()> {
    let need = (2.0 * x).floor() as usize;
    if coeffs.len() < need {
        return Err(Error::SeriesTooShort { have: coeffs.len(), need });
    }
    Ok(())
}

/// `sum_{X <= n <= 2X} lambda(n) K(n mod q) V(n/X)` by direct summation.
pub fn correlation_sum(coeffs: &CoefficientSeries, k: &TraceTable, x: f64, v: &WeightV) -> Result<CorrelationRecord> {
    check_length(coeffs, x)?;
    let q = k.modulus() as usize;
    let (lo, hi) = support(x);
    let vals = k.values().values();
    let [value, trivial] = par::sum_range_multi::<2, _>(lo, hi + 1, |n| {
        let w = v.eval(n as f64 / x);
        let lam = coeffs.get(n);
        let kn = vals[n % q];
        [kn * (lam * w), Complex64::new(lam.abs() * kn.norm() * w, 0.0)]
    });
    let q0 = k.spec().crt_factors().map_or(k.modulus(), |(a, _)| a);
    Ok(CorrelationRecord::new("corr", k.spec().label(), k.modulus(), q0, x, v.z(), value, trivial.re))
}

/// `sum_{n = a mod q} lambda(n) V(n/X) - (1/phi(q)) sum_{(n,q)=1} lambda(n) V(n/X)`.
/// Both sums are accumulated in one pass with identical blocking, so `q = 1` gives exactly 0.
pub fn ap_discrepancy(coeffs: &CoefficientSeries, q: u64, a: i64, x: f64, v: &WeightV) -> Result<f64> {
    let (disc, _) = ap_discrepancy_with_mass(coeffs, q, a, x, v)?;
    Ok(disc)
}

/// [`ap_discrepancy`] together with `sum_{n = a mod q} |lambda(n)| V(n/X)`.
pub fn ap_discrepancy_with_mass(coeffs: &CoefficientSeries, q: u64, a: i64, x: f64, v: &WeightV) -> Result<(f64, f64)> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be positive".into()));
    }
    let a = reduce(a, q);
    if gcd(a, q) != 1 {
        return Err(Error::ResidueNotCoprime { a, q });
    }
    check_length(coeffs, x)?;
    let (lo, hi) = support(x);
    let [progression, coprime, mass] = par::sum_range_multi::<3, _>(lo, hi + 1, |n| {
        let n64 = n as u64;
        if gcd(n64, q) != 1 {
            return [Complex64::new(0.0, 0.0); 3];
        }
        let t = coeffs.get(n) * v.eval(n as f64 / x);
        let hit = n64 % q == a;
        let c = |b: bool, val: f64| Complex64::new(if b { val } else { 0.0 }, 0.0);
        [c(hit, t), c(true, t), c(hit, t.abs())]
    });
    Ok((progression.re - coprime.re / euler_phi(q) as f64, mass.re))
}

/// `sum_{l, m} lambda(m) Kl_4(a l m; q) V(l/L) V(m/M)` with the standard weight in both variables.
pub fn bilinear_preset(l_size: f64, m_size: f64, q: u64, a: i64, coeffs: &CoefficientSeries) -> Result<Complex64> {
    if q == 0 || !is_squarefree(q) {
        return Err(Error::NotSquarefree(q));
    }
    check_length(coeffs, m_size)?;
    let kl4 = HyperKloostermanComposite::new(4, q)?;
    let v = WeightV::standard();
    let (l_lo, l_hi) = support(l_size);
    let (m_lo, m_hi) = support(m_size);
    let a = reduce(a, q);
    Ok(par::sum_range(l_lo, l_hi + 1, |l| {
        let wl = v.eval(l as f64 / l_size);
        if wl == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let al = mul_mod(a, l as u64 % q, q);
        let mut s = Complex64::new(0.0, 0.0);
        for m in m_lo..=m_hi {
            let wm = v.eval(m as f64 / m_size);
            if wm == 0.0 {
                continue;
            }
            s += kl4.eval(mul_mod(al, m as u64 % q, q) as i64) * (coeffs.get(m) * wm);
        }
        s * wl
    }))
}

/// Least-squares line through `(log X, log |S|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fits `log |value|` against `log X`.
pub fn exponent_fit(records: &[CorrelationRecord]) -> Result<ExponentFit> {
    fit_points(records.iter().map(|r| (r.x, r.value.norm())))
}

/// Fits `log y` against `log x` for positive pairs.
pub fn fit_points(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<ExponentFit> {
    let mut points = Vec::new();
    for (x, y) in pairs {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::DegenerateFit(format!("non-positive point ({x}, {y})")));
        }
        points.push((x.ln(), y.ln()));
    }
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return Err(Error::DegenerateFit("all X values are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ExponentFit { slope, intercept, r_squared, points })
}

/// `X = q, 2q, 4q, ..., 2^steps q`.
pub fn dyadic_ladder(q: u64, steps: u32) -> Vec<f64> {
    (0..=steps).map(|i| (q << i) as f64).collect()
}

/// Correlation sums along a ladder of `X` values; rows ordered by `X`.
pub fn correlation_ladder(coeffs: &CoefficientSeries, k: &TraceTable, xs: &[f64], v: &WeightV) -> Result<Vec<CorrelationRecord>> {
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        out.push(correlation_sum(coeffs, k, x, v)?);
    }
    Ok(out)
}

/// Sorts rows by `(q, X, kernel_id)`.
pub fn sort_records(records: &mut [CorrelationRecord]) {
    records.sort_by(|a, b| {
        a.q.cmp(&b.q)
            .then(a.x.total_cmp(&b.x))
            .then_with(|| a.kernel_id.cmp(&b.kernel_id))
    });
}

pub const EXPERIMENT_CSV_HEADER: &str = "experiment,kernel_id,q,q0,X,Z,re,im,abs,trivial_bound,ratio";

pub fn write_records_csv<W: Write>(records: &[CorrelationRecord], mut out: W) -> std::io::Result<()> {
    let mut buf = String::new();
    writeln!(buf, "{EXPERIMENT_CSV_HEADER}").unwrap();
    for r in records {
        writeln!(
            buf,
            "{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.experiment,
            r.kernel_id,
            r.q,
            r.q0,
            r.x,
            r.z,
            r.value.re,
            r.value.im,
            r.value.norm(),
            r.trivial_bound,
            r.ratio
        )
        .unwrap();
    }
    out.write_all(buf.as_bytes())
}

/// Parses rows written by [`write_records_csv`].
pub fn read_records_csv(text: &str) -> Result<Vec<CorrelationRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty experiment file".into()))?;
    if header.trim() != EXPERIMENT_CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("bad row {}: `{line}`", i + 2));
        if f.len() != 11 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
        out.push(CorrelationRecord {
            experiment: f[0].into(),
            kernel_id: f[1].into(),
            q: int(f[2])?,
            q0: int(f[3])?,
            x: num(f[4])?,
            z: num(f[5])?,
            value: Complex64::new(num(f[6])?, num(f[7])?),
            trivial_bound: num(f[9])?,
            ratio: num(f[10])?,
        });
    }
    Ok(out)
}

/// Converts an AP discrepancy into a CSV row.
pub fn ap_record(q: u64, a: u64, x: f64, z: f64, discrepancy: f64, mass: f64, series: &str) -> CorrelationRecord {
    CorrelationRecord::new("ap", format!("{series}_a{a}"), q, q, x, z, Complex64::new(discrepancy, 0.0), mass)
}

/// Converts a bilinear preset value into a CSV row; `X` holds `L*M`.
pub fn bilinear_record(q: u64, a: u64, l_size: f64, m_size: f64, value: Complex64, series: &str) -> CorrelationRecord {
    CorrelationRecord::new("bilinear", format!("kl4_a{a}_{series}_L{l_size}_M{m_size}"), q, q, l_size * m_size, 1.0, value, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub experiment: String,
    pub kernel_id: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub const FIT_CSV_HEADER: &str = "experiment,kernel_id,slope,intercept,r_squared,n_points";

pub fn write_fits_csv<W: Write>(fits: &[FitRow], mut out: W) -> std::io::Result<()> {
    let mut buf = String::new();
    writeln!(buf, "{FIT_CSV_HEADER}").unwrap();
    for f in fits {
        writeln!(
            buf,
            "{},{},{:.17e},{:.17e},{:.17e},{}",
            f.experiment, f.kernel_id, f.slope, f.intercept, f.r_squared, f.n_points
        )
        .unwrap();
    }
    out.write_all(buf.as_bytes())
}

/// Groups rows by `(experiment, kernel_id, q)` and fits each group with at least three distinct `X`.
pub fn fit_groups(records: &[CorrelationRecord]) -> Result<Vec<FitRow>> {
    let mut keys: Vec<(String, String, u64)> = records.iter().map(|r| (r.experiment.clone(), r.kernel_id.clone(), r.q)).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for (experiment, kernel_id, q) in keys {
        let group: Vec<CorrelationRecord> = records
            .iter()
            .filter(|r| r.experiment == experiment && r.kernel_id == kernel_id && r.q == q)
            .cloned()
            .collect();
        let fit = exponent_fit(&group)?;
        out.push(FitRow { experiment, kernel_id, slope: fit.slope, intercept: fit.intercept, r_squared: fit.r_squared, n_points: group.len() });
    }
    Ok(out)
}

/// Run manifest: everything needed to reproduce an output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub parameters: std::collections::BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            parameters: Default::default(),
            outputs: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.into(), value.to_string());
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}
