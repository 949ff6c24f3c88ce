//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Runs with a custom harness so the lines appear in `cargo test` output. The
//! process fails when the set of failing criteria differs from `KNOWN_FAILURES`.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use sha2::{Digest, Sha256};
use twistlab::cli::battery;
use twistlab::coefficients::{divisor_count, ramanujan_tau, series_by_name, sieve_d3, tau_normalized};
use twistlab::correlation::{
    classify_degeneracy, exhaustive_detector_sweep, ft1_as_pair_correlation, ft1_bruteforce, pair_correlation,
    pair_sweep, Ft1Params, PairFamily, PairParams, SweepOptions, ZSums,
};
use twistlab::experiments::{ap_discrepancy, correlation_ladder, dyadic_ladder, exponent_fit, WeightV};
use twistlab::spectral::{dft_normalized, idft_normalized, ComplexTable};
use twistlab::trace::{hyper_kloosterman_table, realize, MultChar, SheafSpec};
use twistlab::zmod::{gcd, is_prime};

use common::{d3_triples, kl_direct, random_table, rng};

const IDENTITY_TOL: f64 = 1e-9;
const FT2_CASE1_TOL: f64 = 1e-6;
const DFT_BATTERY_SECONDS: f64 = 10.0;
const DFT_1E6_SECONDS: f64 = 5.0;
const TREND_SECONDS: f64 = 60.0;
const TREND_SLOPE_MAX: f64 = 0.85;
const TREND_Z: f64 = 4.0;
const AP_REL_TOL: f64 = 1e-6;

/// Pilot run (seed 20240601, 300 non-degenerate tuples per family, primes in [101, 499]).
const PILOT_KUMMER_MAX: f64 = 2.718735;
const PILOT_KUMMER_MEDIAN: f64 = 0.816026;
const PILOT_KL2_MAX: f64 = 2.306189;
const PILOT_KL2_MEDIAN: f64 = 0.818590;
const PILOT_FACTOR: f64 = 2.0;
const SQRT_CANCELLATION_SEED: u64 = 20_240_615;

/// Seeds fixed before the runs were looked at.
const FT2_SEED: u64 = 20_240_602;
const BATTERY_SEED: u64 = 20_240_603;

/// Criteria known to fail; see the decisions ledger.
const KNOWN_FAILURES: [&str; 1] = ["ft2"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn dft_parseval() -> Outcome {
    let t = Instant::now();
    let primes = [2u64, 3, 101, 997, 7919, 65_537, 99_991];
    let prime_powers = [4u64, 27, 121, 1024, 2401, 59_049, 65_536];
    let composite = [12u64, 360, 720, 5040, 10_080, 55_440, 83_160];
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for class in [&primes, &prime_powers, &composite] {
        for i in 0..100 {
            let q = class[i % class.len()];
            let f = random_table(&mut r, q);
            let hat = dft_normalized(&f);
            let back = idft_normalized(&hat);
            let scale = f.supnorm().max(1.0);
            worst = worst.max(back.max_abs_diff(&f) / scale);
            worst = worst.max((hat.l2_norm_sqr() - f.l2_norm_sqr()).abs() / f.l2_norm_sqr().max(1.0));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= IDENTITY_TOL && secs < DFT_BATTERY_SECONDS,
        format!("300 tables, max scaled error {worst:.2e}, {secs:.2} s"),
    )
}

fn dft_performance() -> Outcome {
    let n = 1_000_000u64;
    let f = ComplexTable::from_fn(n, |x| Complex64::new((x as f64).sin(), (0.3 * x as f64).cos())).unwrap();
    let t = Instant::now();
    let hat = dft_normalized(&f);
    let secs = t.elapsed().as_secs_f64();
    let parseval = (hat.l2_norm_sqr() / f.l2_norm_sqr() - 1.0).abs();
    outcome(secs <= DFT_1E6_SECONDS && parseval < 1e-9, format!("length 1e6 in {secs:.3} s"))
}

fn from_battery(b: battery::Battery, min_trials: usize) -> Outcome {
    outcome(b.ok() && b.trials >= min_trials && b.tolerance <= IDENTITY_TOL, b.summary())
}

fn hyper_kloosterman() -> Outcome {
    let mut direct_err: f64 = 0.0;
    let mut zero_ok = true;
    for p in (2..=31).filter(|&p| is_prime(p)) {
        for k in 2..=4u32 {
            let t = hyper_kloosterman_table(k, p).unwrap();
            zero_ok &= t.at(0).norm() == 0.0;
            for a in 1..p {
                direct_err = direct_err.max((t.at(a as i64) - kl_direct(k, a, p)).norm());
            }
        }
    }
    let mut deligne: f64 = 0.0;
    let mut imag: f64 = 0.0;
    for p in (2..=499).filter(|&p| is_prime(p)) {
        for k in 2..=4u32 {
            let t = hyper_kloosterman_table(k, p).unwrap();
            deligne = deligne.max(t.values().values().iter().map(|v| v.norm() / k as f64).fold(0.0, f64::max));
            if k == 2 {
                imag = imag.max(t.values().values().iter().map(|v| v.im.abs()).fold(0.0, f64::max));
            }
        }
    }
    outcome(
        direct_err <= IDENTITY_TOL && zero_ok && deligne <= 1.0 + 1e-12 && imag <= IDENTITY_TOL,
        format!("direct error {direct_err:.2e}, max |Kl_k|/k {deligne:.6}, max |Im Kl_2| {imag:.2e}"),
    )
}

fn ft2() -> Outcome {
    let (rows1, err1) = battery::ft2_case1(200, 400, FT2_SEED).unwrap();
    let vanishing = rows1.iter().filter(|r| r.params.c2 != r.params.c2p).count();
    let rows2 = battery::ft2_case2(200, 400, FT2_SEED).unwrap();
    let stated = battery::bound_violations(&rows2, false);
    let refined = battery::bound_violations(&rows2, true);
    let worst = rows2
        .iter()
        .max_by(|a, b| (a.value.norm() / a.reference).total_cmp(&(b.value.norm() / b.reference)))
        .unwrap();
    let p = worst.params;
    outcome(
        err1 <= FT2_CASE1_TOL && vanishing > 0 && stated == 0,
        format!(
            "case 1: 200 tuples ({vanishing} with c2 != c2'), max error {err1:.2e}; case 2: {stated}/200 exceed \
             k*phi(rc1/n1), {refined}/200 exceed k*phi(rc1/n1)*gcd(c2,c2'); worst |FT2| = {:.3} vs {} at \
             r={} c1={} c2={} c2'={} n1={} n={}",
            worst.value.norm(),
            worst.reference,
            p.r,
            p.c1,
            p.c2,
            p.c2p,
            p.n1,
            p.n
        ),
    )
}

fn ft1() -> Outcome {
    let mut r = rng(BATTERY_SEED);
    let primes: Vec<u64> = (101..=397).filter(|&p| is_prime(p)).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let families: [fn(&mut common::TestRng, u64) -> SheafSpec; 3] = [
        |r, p| SheafSpec::kummer(MultChar::new(p, r.random_range(1..p - 1)).unwrap()),
        |r, p| SheafSpec::scale(r.random_range(1..p as i64), SheafSpec::kummer(MultChar::quadratic(p).unwrap())),
        |_, p| SheafSpec::hyper_kloosterman(2, p),
    ];
    for family in families {
        let mut jobs = Vec::new();
        while jobs.len() < 100 {
            let p = primes[r.random_range(0..primes.len())];
            let spec = family(&mut r, p);
            let unit = |r: &mut common::TestRng| r.random_range(1..p as i64);
            let params = Ft1Params {
                c: unit(&mut r),
                cp: unit(&mut r),
                m: r.random_range(-1000..1000),
                mp: r.random_range(-1000..1000),
                q1: unit(&mut r),
                r: unit(&mut r),
                n1: unit(&mut r),
                n: r.random_range(-1000..1000),
                k: unit(&mut r),
                sign: if r.random_bool(0.5) { 1 } else { -1 },
            };
            if params.pair_params(p).is_ok() {
                jobs.push((spec, params));
            }
        }
        let errs = twistlab::par::map(&jobs, |(spec, params)| {
            let k0 = realize(spec).unwrap();
            (ft1_bruteforce(&k0, params).unwrap() - ft1_as_pair_correlation(&k0, params).unwrap()).norm()
        });
        count += errs.len();
        worst = errs.into_iter().fold(worst, f64::max);
    }
    outcome(worst <= IDENTITY_TOL, format!("{count} tuples over 3 kernel families, max error {worst:.2e}"))
}

fn square_root_cancellation() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (family, max, median) in [
        (PairFamily::Kummer, PILOT_KUMMER_MAX, PILOT_KUMMER_MEDIAN),
        (PairFamily::Kloosterman, PILOT_KL2_MAX, PILOT_KL2_MEDIAN),
    ] {
        let opts = SweepOptions { family, q_min: 101, q_max: 499, count: 300, seed: SQRT_CANCELLATION_SEED, non_degenerate_only: true };
        let mut ratios: Vec<f64> = pair_sweep(&opts).unwrap().iter().map(|r| r.ratio_to_sqrtq()).collect();
        ratios.sort_by(f64::total_cmp);
        let m = ratios[ratios.len() - 1];
        pass &= m <= PILOT_FACTOR * max;
        detail.push(format!(
            "{} max {m:.3} (pilot {max}, median {:.3} vs {median})",
            family.name(),
            ratios[ratios.len() / 2]
        ));
    }
    // degenerate Kummer tuples: delta = 0 and (alpha, beta) = gamma (alpha', beta')
    let mut r = rng(SQRT_CANCELLATION_SEED);
    let primes: Vec<u64> = (101..=499).filter(|&p| is_prime(p)).collect();
    let mut dev_ratio: f64 = 0.0;
    for i in 0..100 {
        let q = if i == 0 { 101 } else { primes[r.random_range(0..primes.len())] };
        let chi = if i == 0 { MultChar::quadratic(q).unwrap() } else { MultChar::new(q, r.random_range(1..q - 1)).unwrap() };
        let spec = SheafSpec::kummer(chi);
        let (ap, bp, g) = (r.random_range(1..q), r.random_range(1..q), r.random_range(1..q));
        let (a, b) = ((g * ap % q) as i64, (g * bp % q) as i64);
        let params = PairParams::new(q, a, b, ap as i64, bp as i64, 0).unwrap();
        pass &= classify_degeneracy(&spec, &params).unwrap().degenerate;
        let zs = ZSums::new(&realize(&spec).unwrap()).unwrap();
        let v = pair_correlation(&zs.z(a, b).unwrap(), &zs.z(ap as i64, bp as i64).unwrap(), 0).unwrap();
        let dev = (v.norm() / q as f64 - 1.0).abs();
        dev_ratio = dev_ratio.max(dev / (5.0 / (q as f64).sqrt()));
    }
    pass &= dev_ratio <= 1.0;
    detail.push(format!("degenerate Kummer max deviation {dev_ratio:.3} x 5/sqrt(q)"));
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tuples = 0;
    let specs = [1u64, 7, 20, 50].map(|e| SheafSpec::kummer(MultChar::new(101, e).unwrap()));
    for spec in specs.iter().cloned().chain([SheafSpec::hyper_kloosterman(2, 101)]) {
        let s = exhaustive_detector_sweep(&spec).unwrap();
        fp += s.false_positives;
        fn_ += s.false_negatives;
        tuples += s.tuples;
    }
    pass &= fp == 0 && fn_ == 0;
    detail.push(format!("detector at q = 101: {tuples} tuples, {fp} false positives, {fn_} false negatives"));
    outcome(pass, detail.join("; "))
}

fn coefficients() -> Outcome {
    let n = 10_000;
    let d3 = sieve_d3(n);
    let triples = d3_triples(n);
    let d3_ok = (1..=n).all(|i| d3.get(i) == triples[i] as f64);
    let tau = ramanujan_tau(3);
    let tau_ok = tau[1] == -24 && tau[2] == 252;
    let lam = tau_normalized(n);
    let d = divisor_count(n);
    let mut mult_err: f64 = 0.0;
    for a in 1..=100 {
        for b in 1..=n / a {
            if gcd(a as u64, b as u64) == 1 {
                mult_err = mult_err.max((lam.get(a * b) - lam.get(a) * lam.get(b)).abs());
                mult_err = mult_err.max((d3.get(a * b) - d3.get(a) * d3.get(b)).abs());
            }
        }
    }
    let deligne = (1..=n).map(|i| lam.get(i).abs() / d.get(i)).fold(0.0, f64::max);
    outcome(
        d3_ok && tau_ok && mult_err <= IDENTITY_TOL && deligne <= 1.0,
        format!("d3 = triples for n <= 1e4: {d3_ok}; tau(2), tau(3) = {}, {}; multiplicativity error {mult_err:.2e}; max |lambda|/d {deligne:.4}", tau[1], tau[2]),
    )
}

fn trend() -> Outcome {
    let t = Instant::now();
    let (q0, q1) = (17u64, 59u64);
    let spec = SheafSpec::crt_product(
        SheafSpec::kummer(MultChar::new(q0, 1).unwrap()),
        SheafSpec::kummer(MultChar::new(q1, 1).unwrap()),
    );
    let k = realize(&spec).unwrap();
    let q = q0 * q1;
    let xs = dyadic_ladder(q, 5);
    let d3 = series_by_name("d3", (2.0 * xs[xs.len() - 1]) as usize).unwrap();
    let run = |z: f64| {
        let recs = correlation_ladder(&d3, &k, &xs, &WeightV::new(z).unwrap()).unwrap();
        let slope = exponent_fit(&recs).unwrap().slope;
        let decreasing = recs.windows(2).all(|w| w[1].ratio < w[0].ratio);
        (slope, decreasing)
    };
    let (slope, decreasing) = run(TREND_Z);
    let (slope1, decreasing1) = run(1.0);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        slope < TREND_SLOPE_MAX && decreasing && secs <= TREND_SECONDS,
        format!(
            "q = {q} = {q0}*{q1}, Z = {TREND_Z}: slope {slope:.3}, ratio decreasing {decreasing}; \
             (Z = 1: slope {slope1:.3}, decreasing {decreasing1}); {secs:.2} s"
        ),
    )
}

fn ap_partition() -> Outcome {
    let x = 1e5;
    let coeffs = series_by_name("d3", (2.0 * x) as usize).unwrap();
    let v = WeightV::standard();
    let mut worst: f64 = 0.0;
    for q in [15u64, 303, 1001] {
        let units: Vec<u64> = (1..q).filter(|&a| gcd(a, q) == 1).collect();
        let total: f64 = twistlab::par::map(&units, |&a| ap_discrepancy(&coeffs, q, a as i64, x, &v).unwrap()).iter().sum();
        let scale: f64 = (x as usize..=(2.0 * x) as usize)
            .filter(|&n| gcd(n as u64, q) == 1)
            .map(|n| coeffs.get(n) * v.eval(n as f64 / x))
            .sum();
        worst = worst.max(total.abs() / scale);
    }
    outcome(worst <= AP_REL_TOL, format!("q in {{15, 303, 1001}}, X = 1e5: max relative residue {worst:.2e}"))
}

fn sha_of(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_twistlab");
    let runs: [(&[&str], &str); 4] = [
        (&["paircorr", "sweep", "--count", "60", "--include-degenerate"], "paircorr.csv"),
        (&["exp", "corr", "--steps", "4"], "corr.csv"),
        (&["ft2", "case1", "--trials", "60"], "ft2_case1.csv"),
        (&["exp", "ap", "--q", "303", "--x", "20000", "--residues", "0"], "ap.csv"),
    ];
    let mut same = 0;
    for (args, csv) in runs {
        let hashes: Vec<String> = ["1", "8"]
            .iter()
            .map(|jobs| {
                let dir = tempfile::tempdir().unwrap();
                let status = Command::new(bin)
                    .args(args)
                    .args(["--seed", "7", "--jobs", jobs, "--out"])
                    .arg(dir.path())
                    .output()
                    .unwrap()
                    .status;
                assert!(status.success(), "{args:?} failed");
                sha_of(&dir.path().join(csv))
            })
            .collect();
        same += usize::from(hashes[0] == hashes[1]);
    }
    outcome(same == 4, format!("{same}/4 commands byte-identical across --jobs 1 and --jobs 8"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("dft_parseval", dft_parseval),
        ("dft_performance", dft_performance),
        ("twisted_multiplicativity", || from_battery(battery::twisted_mult(100, 10_000, BATTERY_SEED).unwrap(), 100)),
        ("kloosterman_factorization", || from_battery(battery::kloosterman_factor(200, 10_000, BATTERY_SEED).unwrap(), 200)),
        ("hyper_kloosterman", hyper_kloosterman),
        ("nsum_two_forms", || from_battery(battery::nsum(100, None, BATTERY_SEED).unwrap(), 100)),
        ("ft2", ft2),
        ("err3", || from_battery(battery::err3(100, None, BATTERY_SEED).unwrap(), 100)),
        ("ft1_two_routes", ft1),
        ("square_root_cancellation", square_root_cancellation),
        ("coefficients", coefficients),
        ("trend_probe", trend),
        ("ap_partition", ap_partition),
        ("cli_determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = BTreeSet::new();
    let mut ran = BTreeSet::new();
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran.insert(name);
        let t = Instant::now();
        let o = check();
        println!("{} {name}: {} [{:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
        if !o.pass {
            failed.insert(name);
        }
    }
    let expected: BTreeSet<&str> = KNOWN_FAILURES.iter().copied().filter(|n| ran.contains(n)).collect();
    if failed != expected {
        eprintln!("unexpected acceptance outcome: failing {failed:?}, documented {expected:?}");
        std::process::exit(1);
    }
    println!("acceptance: {} criteria, {} documented failure(s)", ran.len(), failed.len());
}
