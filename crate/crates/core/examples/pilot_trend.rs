//! Pilot for the d3-against-character ladder and the large-transform timing.

use num_complex::Complex64;
use twistlab::coefficients::sieve_d3;
use twistlab::experiments::{correlation_ladder, dyadic_ladder, exponent_fit, WeightV};
use twistlab::spectral::{dft_normalized, ComplexTable};
use twistlab::trace::{realize, MultChar, SheafSpec};

fn main() {
    let t = std::time::Instant::now();
    for (q0, q1) in [(17u64, 59u64), (13, 79), (19, 53)] {
        let q = q0 * q1;
        let spec = SheafSpec::crt_product(
            SheafSpec::kummer(MultChar::new(q0, 1).unwrap()),
            SheafSpec::kummer(MultChar::new(q1, 1).unwrap()),
        );
        let k = realize(&spec).unwrap();
        let xs = dyadic_ladder(q, 5);
        let d3 = sieve_d3(2 * (q as usize) << 5);
        for z in [1.0, 4.0] {
            let recs = correlation_ladder(&d3, &k, &xs, &WeightV::new(z).unwrap()).unwrap();
            let fit = exponent_fit(&recs).unwrap();
            let ratios: Vec<String> = recs.iter().map(|r| format!("{:.5}", r.ratio)).collect();
            let abs: Vec<String> = recs.iter().map(|r| format!("{:.1}", r.value.norm())).collect();
            println!("q={q} Z={z} slope={:.4} r2={:.3} ratios={ratios:?} abs={abs:?}", fit.slope, fit.r_squared);
        }
    }
    println!("ladders in {:?}", t.elapsed());
    let n = 1_000_000u64;
    let table = ComplexTable::from_fn(n, |x| Complex64::new((x as f64).sin(), (x as f64 * 0.3).cos())).unwrap();
    let t = std::time::Instant::now();
    let hat = dft_normalized(&table);
    println!("dft 1e6 in {:?} (norm {:.6})", t.elapsed(), hat.l2_norm_sqr() / table.l2_norm_sqr());
}
