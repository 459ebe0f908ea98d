// measurement scratch — not part of the crate
use sigtaylor_core::path::Path;
use sigtaylor_core::signature::{signature, IveKernel, iterated_strat_with_kernel};
use sigtaylor_core::words::enumerate_words;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_lip_drift(seed: u64, n: usize, t_end: f64, lo: f64, hi: f64, x0: f64) -> Path {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times: Vec<f64> = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
    let dt = t_end / n as f64;
    let blocks = 8;
    let mut slopes = vec![];
    for _ in 0..blocks { slopes.push(rng.random_range(lo..hi)); }
    let mut values = vec![x0];
    for i in 0..n {
        let s = slopes[i * blocks / n];
        values.push(values.last().unwrap() + s * dt);
    }
    Path::new(times, values).unwrap()
}

fn main() {
    for n in [400usize, 800] {
        let mut worst: (f64, String) = (0.0, String::new());
        for seed in 0..20u64 {
            let x = random_lip_drift(seed, n, 1.0, 0.5, 1.0, 0.0);
            let s = signature(&x, 4).unwrap();
            for w in enumerate_words(4) {
                if w.is_empty() { continue; }
                let kern = IveKernel::new(w, x.t_end());
                let v = iterated_strat_with_kernel(&kern, &x).unwrap();
                let ex = s.get(&w);
                let r = (v - ex).abs() / ex.abs().max(v.abs()).max(1e-300);
                if r > worst.0 { worst = (r, format!("{w} seed {seed} val {ex:.3e}")); }
            }
        }
        println!("kernel drift[0.5,1] n={n}: worst rel = {:.3e} at {}", worst.0, worst.1);
    }
}
