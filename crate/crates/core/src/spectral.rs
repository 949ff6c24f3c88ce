//! Unitary discrete Fourier transform on `Z/qZ` for arbitrary `q`, and
//! multiplicative convolution on `F_p^*`.
//!
//! The transform is normalized by `q^{-1/2}` and uses the positive phase
//! convention `K^(n) = q^{-1/2} sum_x K(x) e(nx/q)` with `e(t) = exp(2 pi i t)`.
//! Lengths that are not powers of two are handled by the chirp (Bluestein)
//! reindexing `nx = (n^2 + x^2 - (n-x)^2)/2`, which turns the transform into a
//! linear convolution evaluated with a power-of-two FFT of length `>= 2q - 1`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::zmod::{is_prime, reduce, DlogTable};

/// `e(num/den) = exp(2 pi i num/den)`, with the fraction reduced exactly first.
#[inline]
pub fn unit_phase(num: i64, den: u64) -> Complex64 {
    let r = reduce(num, den);
    Complex64::cis(TAU * (r as f64) / (den as f64))
}

/// A complex-valued function on `Z/qZ`, stored as `q` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTable {
    values: Vec<Complex64>,
}

impl ComplexTable {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty table".into()));
        }
        if let Some(i) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite entry at index {i}")));
        }
        Ok(ComplexTable { values })
    }

    /// Tabulates `f(x)` for `x` in `0..q`.
    pub fn from_fn(q: u64, f: impl FnMut(u64) -> Complex64) -> Result<Self> {
        Self::new((0..q).map(f).collect())
    }

    pub fn modulus(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value at the residue class of `x`.
    #[inline]
    pub fn at(&self, x: i64) -> Complex64 {
        self.values[reduce(x, self.modulus()) as usize]
    }

    pub fn supnorm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &ComplexTable) -> f64 {
        assert_eq!(self.modulus(), other.modulus());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Precomputed chirp data for one transform length.
pub struct ChirpPlan {
    q: usize,
    len: usize,
    chirp: Vec<Complex64>,
    kernel_spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ChirpPlan {
    pub fn new(q: usize) -> Self {
        assert!(q > 0);
        let len = (2 * q - 1).next_power_of_two();
        let two_q = 2 * q as u64;
        // w(n) = e(n^2 / 2q); n^2 is reduced mod 2q in exact arithmetic
        let chirp: Vec<Complex64> = (0..q as u64)
            .map(|n| {
                let sq = ((n as u128 * n as u128) % two_q as u128) as f64;
                Complex64::cis(TAU * sq / two_q as f64)
            })
            .collect();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        kernel[0] = chirp[0].conj();
        for j in 1..q {
            kernel[j] = chirp[j].conj();
            kernel[len - j] = chirp[j].conj();
        }
        forward.process(&mut kernel);
        ChirpPlan { q, len, chirp, kernel_spectrum: kernel, forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `q^{-1/2} sum_x input[x] e(nx/q)` for every `n`.
    pub fn forward(&self, input: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(input.len(), self.q);
        if self.q == 1 {
            return input.to_vec();
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for ((b, x), w) in buf.iter_mut().zip(input).zip(&self.chirp) {
            *b = x * w;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / (self.len as f64 * (self.q as f64).sqrt());
        buf.truncate(self.q);
        for (b, w) in buf.iter_mut().zip(&self.chirp) {
            *b = *b * w * scale;
        }
        buf
    }

    /// Inverse of [`ChirpPlan::forward`]: `q^{-1/2} sum_n input[n] e(-nx/q)`.
    pub fn inverse(&self, input: &[Complex64]) -> Vec<Complex64> {
        let conj: Vec<Complex64> = input.iter().map(|z| z.conj()).collect();
        let mut out = self.forward(&conj);
        for z in out.iter_mut() {
            *z = z.conj();
        }
        out
    }
}

/// Shared plan for length `q`; plans are built once per length and cached.
pub fn plan(q: usize) -> Arc<ChirpPlan> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ChirpPlan>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().expect("plan cache poisoned").get(&q) {
        return Arc::clone(p);
    }
    let built = Arc::new(ChirpPlan::new(q));
    let mut guard = cache.lock().expect("plan cache poisoned");
    Arc::clone(guard.entry(q).or_insert(built))
}

/// Normalized Fourier transform `K^(n) = q^{-1/2} sum_x K(x) e(nx/q)`.
pub fn dft_normalized(table: &ComplexTable) -> ComplexTable {
    let values = plan(table.values.len()).forward(&table.values);
    ComplexTable { values }
}

/// Inverse of [`dft_normalized`].
pub fn idft_normalized(table: &ComplexTable) -> ComplexTable {
    let values = plan(table.values.len()).inverse(&table.values);
    ComplexTable { values }
}

/// The normalized transform at a single frequency, by direct O(q) summation.
pub fn dft_at(table: &ComplexTable, n: i64) -> Complex64 {
    let q = table.modulus();
    let n = reduce(n, q);
    let sum: Complex64 = table
        .values
        .iter()
        .enumerate()
        .map(|(x, &k)| k * unit_phase(((n as u128 * x as u128) % q as u128) as i64, q))
        .sum();
    sum / (q as f64).sqrt()
}

/// Multiplicative convolution on `F_p^*` through discrete-log reindexing.
///
/// Holds the log tables and the length `p - 1` transform plan so that
/// repeated convolutions modulo the same prime share the setup cost.
pub struct MultConvolver {
    dlog: DlogTable,
    plan: Arc<ChirpPlan>,
}

impl MultConvolver {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let dlog = DlogTable::new(p)?;
        let plan = plan((p - 1) as usize);
        Ok(MultConvolver { dlog, plan })
    }

    pub fn prime(&self) -> u64 {
        self.dlog.prime()
    }

    pub fn dlog(&self) -> &DlogTable {
        &self.dlog
    }

    /// Spectrum of `i -> f(g^i)` on the cyclic group of order `p - 1`.
    pub fn spectrum(&self, f: &ComplexTable) -> Result<Vec<Complex64>> {
        let p = self.prime();
        if f.modulus() != p {
            return Err(Error::ModulusMismatch(f.modulus(), p));
        }
        let reindexed: Vec<Complex64> = (0..self.dlog.order())
            .map(|i| f.values[self.dlog.power(i) as usize])
            .collect();
        Ok(self.plan.forward(&reindexed))
    }

    /// Convolution from two spectra produced by [`MultConvolver::spectrum`].
    pub fn from_spectra(&self, fs: &[Complex64], gs: &[Complex64]) -> ComplexTable {
        let p = self.prime();
        let n = self.dlog.order();
        let product: Vec<Complex64> = fs.iter().zip(gs).map(|(a, b)| a * b).collect();
        let cyclic = self.plan.inverse(&product);
        // cyclic convolution = sqrt(n) * inverse(F . G) for the unitary transform
        let scale = (n as f64).sqrt() / (p as f64).sqrt();
        let mut values = vec![Complex64::new(0.0, 0.0); p as usize];
        for (i, c) in cyclic.into_iter().enumerate() {
            values[self.dlog.power(i) as usize] = c * scale;
        }
        ComplexTable { values }
    }

    /// `h(v) = p^{-1/2} sum_{xy = v} f(x) g(y)` over `x, y` in `F_p^*`; `h(0) = 0`.
    pub fn convolve(&self, f: &ComplexTable, g: &ComplexTable) -> Result<ComplexTable> {
        let fs = self.spectrum(f)?;
        let gs = self.spectrum(g)?;
        Ok(self.from_spectra(&fs, &gs))
    }
}

/// One-shot multiplicative convolution; see [`MultConvolver::convolve`].
pub fn mult_convolve(f: &ComplexTable, g: &ComplexTable, p: u64) -> Result<ComplexTable> {
    MultConvolver::new(p)?.convolve(f, g)
}
