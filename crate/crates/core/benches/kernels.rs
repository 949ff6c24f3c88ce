use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use twistlab::coefficients::sieve_d3;
use twistlab::correlation::z_sum;
use twistlab::experiments::{correlation_sum, WeightV};
use twistlab::par;
use twistlab::spectral::{dft_normalized, ComplexTable};
use twistlab::trace::{realize, MultChar, SheafSpec};

fn threads() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", 0)]
}

fn dft(c: &mut Criterion) {
    let mut g = c.benchmark_group("dft");
    for q in [65_537u64, 1_000_000] {
        let t = ComplexTable::from_fn(q, |x| Complex64::new((x as f64).sin(), (x as f64).cos())).unwrap();
        for (name, jobs) in threads() {
            g.bench_with_input(BenchmarkId::new(name, q), &t, |b, t| b.iter(|| par::with_jobs(jobs, || dft_normalized(t))));
        }
    }
    g.finish();
}

fn z_sums(c: &mut Criterion) {
    let mut g = c.benchmark_group("z_sum");
    let k0 = realize(&SheafSpec::kummer(MultChar::new(10_007, 3).unwrap())).unwrap();
    for (name, jobs) in threads() {
        g.bench_function(name, |b| b.iter(|| par::with_jobs(jobs, || z_sum(&k0, 5, 7).unwrap())));
    }
    g.finish();
}

fn correlation(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlation_sum");
    let spec = SheafSpec::crt_product(
        SheafSpec::kummer(MultChar::new(17, 1).unwrap()),
        SheafSpec::kummer(MultChar::new(59, 1).unwrap()),
    );
    let k = realize(&spec).unwrap();
    let x = 500_000.0;
    let d3 = sieve_d3(1_000_000);
    let v = WeightV::new(4.0).unwrap();
    for (name, jobs) in threads() {
        g.bench_function(name, |b| b.iter(|| par::with_jobs(jobs, || correlation_sum(&d3, &k, x, &v).unwrap())));
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = dft, z_sums, correlation
}
criterion_main!(benches);
