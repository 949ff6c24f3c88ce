//! Arithmetic coefficient sequences: divisor functions `d`, `d_3`, `d_4`,
//! normalized Ramanujan `tau`, and Dirichlet convolution.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

/// A named real sequence indexed by `n = 1..=N` (`values[0]` is `f(1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    name: String,
    values: Vec<f64>,
}

impl CoefficientSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        CoefficientSeries { name: name.into(), values }
    }

    /// The constant sequence 1.
    pub fn ones(n: usize) -> Self {
        Self::new("one", vec![1.0; n])
    }

    /// The Dirichlet unit: 1 at `n = 1`, 0 elsewhere.
    pub fn unit(n: usize) -> Self {
        let mut values = vec![0.0; n];
        if n > 0 {
            values[0] = 1.0;
        }
        Self::new("unit", values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `f(n)` for `1 <= n <= N`.
    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(format!("{}x{c}", self.name), self.values.iter().map(|v| v * c).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut buf = String::from("n,value\n");
        for (i, v) in self.values.iter().enumerate() {
            writeln!(buf, "{},{:.17e}", i + 1, v).unwrap();
        }
        out.write_all(buf.as_bytes())
    }
}

fn integer_convolve(f: &[u64], g: &[u64]) -> Vec<u64> {
    let n = f.len();
    let mut h = vec![0u64; n];
    for d in 1..=n {
        let fd = f[d - 1];
        if fd == 0 {
            continue;
        }
        for m in (d..=n).step_by(d) {
            h[m - 1] += fd * g[m / d - 1];
        }
    }
    h
}

fn divisor_counts(n: usize) -> Vec<u64> {
    integer_convolve(&vec![1; n], &vec![1; n])
}

/// Divisor function `d = 1 * 1`.
pub fn divisor_count(n: usize) -> CoefficientSeries {
    CoefficientSeries::new("d", divisor_counts(n).into_iter().map(|v| v as f64).collect())
}

/// `d_3 = 1 * d`, computed in integers.
pub fn sieve_d3(n: usize) -> CoefficientSeries {
    let d3 = integer_convolve(&vec![1; n], &divisor_counts(n));
    CoefficientSeries::new("d3", d3.into_iter().map(|v| v as f64).collect())
}

/// `d_4 = 1 * d_3`, computed in integers.
pub fn sieve_d4(n: usize) -> CoefficientSeries {
    let ones = vec![1; n];
    let d3 = integer_convolve(&ones, &divisor_counts(n));
    let d4 = integer_convolve(&ones, &d3);
    CoefficientSeries::new("d4", d4.into_iter().map(|v| v as f64).collect())
}

/// `(f * g)(n) = sum_{d | n} f(d) g(n/d)`.
pub fn dirichlet_convolve(f: &CoefficientSeries, g: &CoefficientSeries) -> Result<CoefficientSeries> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch(f.len(), g.len()));
    }
    let n = f.len();
    let mut h = vec![0.0; n];
    for d in 1..=n {
        let fd = f.values[d - 1];
        if fd == 0.0 {
            continue;
        }
        for m in (d..=n).step_by(d) {
            h[m - 1] += fd * g.values[m / d - 1];
        }
    }
    Ok(CoefficientSeries::new(format!("{}*{}", f.name, g.name), h))
}

/// Ramanujan `tau(1..=n)` from `Delta = q prod (1 - q^m)^24`, multiplying 24
/// times by the sparse pentagonal expansion of `prod (1 - q^m)`.
pub fn ramanujan_tau(n: usize) -> Vec<i128> {
    if n == 0 {
        return Vec::new();
    }
    // coefficients of q^0..q^{n-1} in prod (1 - q^m)
    let mut pentagonal: Vec<(usize, i128)> = vec![(0, 1)];
    for k in 1.. {
        let sign = if k % 2 == 1 { -1 } else { 1 };
        let a = k * (3 * k - 1) / 2;
        let b = k * (3 * k + 1) / 2;
        if a >= n {
            break;
        }
        pentagonal.push((a, sign));
        if b < n {
            pentagonal.push((b, sign));
        }
    }
    let mut series = vec![0i128; n];
    series[0] = 1;
    for _ in 0..24 {
        let mut next = vec![0i128; n];
        for (i, &c) in series.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &(e, s) in &pentagonal {
                if i + e >= n {
                    break;
                }
                next[i + e] += s * c;
            }
        }
        series = next;
    }
    // tau(m) is the coefficient of q^{m-1} in the product
    series
}

/// `lambda(n) = tau(n) / n^{11/2}` for `n = 1..=N`.
pub fn tau_normalized(n: usize) -> CoefficientSeries {
    let tau = ramanujan_tau(n);
    let values = tau
        .iter()
        .enumerate()
        .map(|(i, &t)| t as f64 / ((i + 1) as f64).powf(5.5))
        .collect();
    CoefficientSeries::new("tau", values)
}

/// `1 * lambda_tau`, the coefficients of the isobaric sum `1 + tau`.
pub fn one_plus_tau(n: usize) -> CoefficientSeries {
    let mut s = dirichlet_convolve(&CoefficientSeries::ones(n), &tau_normalized(n)).expect("equal lengths");
    s.name = "1+tau".into();
    s
}

/// Looks up a series by name: `one`, `d`, `d3`, `d4`, `tau`, `1+tau`.
pub fn series_by_name(name: &str, n: usize) -> Result<CoefficientSeries> {
    Ok(match name {
        "one" | "1" => CoefficientSeries::ones(n),
        "d" | "d2" => divisor_count(n),
        "d3" => sieve_d3(n),
        "d4" => sieve_d4(n),
        "tau" => tau_normalized(n),
        "1+tau" | "one_plus_tau" => one_plus_tau(n),
        other => return Err(Error::InvalidParameter(format!("unknown coefficient series `{other}`"))),
    })
}
