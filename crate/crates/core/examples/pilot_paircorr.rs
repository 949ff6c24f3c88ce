//! Pilot for the shifted-correlation constants: max and median of
//! `|sum_v Z(v) conj Z'(v - delta)| / sqrt(q)` over non-degenerate tuples,
//! plus the exhaustive detector sweep at q = 101.

use twistlab::correlation::{exhaustive_detector_sweep, pair_sweep, PairFamily, SweepOptions};
use twistlab::trace::{MultChar, SheafSpec};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_240_601);
    for family in [PairFamily::Kummer, PairFamily::Kloosterman] {
        let opts = SweepOptions { family, q_min: 101, q_max: 499, count: 300, seed, non_degenerate_only: true };
        let recs = pair_sweep(&opts).unwrap();
        let mut ratios: Vec<f64> = recs.iter().map(|r| r.ratio_to_sqrtq()).collect();
        ratios.sort_by(f64::total_cmp);
        let zero_shift = recs.iter().filter(|r| r.params.delta == 0).count();
        println!(
            "{}: n={} max={:.6} median={:.6} delta0={}",
            family.name(),
            ratios.len(),
            ratios[ratios.len() - 1],
            (ratios[149] + ratios[150]) / 2.0,
            zero_shift
        );
    }
    for e in [50u64, 1, 7, 20] {
        let spec = SheafSpec::kummer(MultChar::new(101, e).unwrap());
        let t = std::time::Instant::now();
        let s = exhaustive_detector_sweep(&spec).unwrap();
        println!("kummer e={e}: {s:?} in {:?}", t.elapsed());
    }
    let s = exhaustive_detector_sweep(&SheafSpec::hyper_kloosterman(2, 101)).unwrap();
    println!("kl2: {s:?}");
}
