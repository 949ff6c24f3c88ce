//! Draws random Case-2 `FT_2` tuples and reports how the brute-force values
//! compare with the bound `k phi(r c1/n1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twistlab::correlation::{ft2_case2_bound_check, random_ft2_params};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let trials: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..trials {
        let p = random_ft2_params(&mut rng, 400, false);
        let (v, bound) = ft2_case2_bound_check(&p).unwrap();
        let ratio = v.norm() / bound;
        if ratio > 1.0 + 1e-9 {
            violations += 1;
            if violations <= 10 {
                println!("violation: {p:?} |FT2| = {:.3} bound = {bound}", v.norm());
            }
        }
        worst = worst.max(ratio);
    }
    println!("trials {trials} violations {violations} worst ratio {worst:.6}");
}
