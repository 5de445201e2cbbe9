//! Runs the synthetic duet benchmark for a few seeds and prints mean SI-SDRi per method.
//!
//! Usage: `cargo run --release --example trend -- [seeds] [methods]`
//!
//! Runs in `f32`; set `TREND_F64=1` for `f64`. `TREND_DURATION` overrides the clip length in seconds.

use duetsep::bench::{make_trial, run_trial, BenchConfig, BenchModels, Method};

fn main() -> duetsep::Result<()> {
    if std::env::var("TREND_F64").is_ok() {
        run::<f64>()
    } else {
        run::<f32>()
    }
}

fn run<T: duetsep::Real>() -> duetsep::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).map_or(3, |s| s.parse().expect("seed count"));
    let methods: Vec<Method> = args
        .get(2)
        .map_or("naive,segmented,ar,ar-tf,nmf", |s| s.as_str())
        .split(',')
        .map(|m| m.parse())
        .collect::<duetsep::Result<_>>()?;
    let mut cfg = BenchConfig::default();
    if let Ok(d) = std::env::var("TREND_DURATION") {
        cfg.duration = d.parse().expect("duration");
    }
    let models = BenchModels::<T>::from_presets(&cfg)?;
    let mut sums = vec![(0.0, 0.0); methods.len()];
    for seed in 0..seeds {
        let trial = make_trial::<T>(&cfg, seed)?;
        for (m, acc) in methods.iter().zip(&mut sums) {
            let out = run_trial(&cfg, &models, &trial, *m)?;
            println!(
                "seed {seed:>2} {:<10} si-sdri {:>7.2} dB  switch {:.3}  ({:.1} s)",
                m.name(),
                out.si_sdri,
                out.identity_switch_rate,
                out.seconds
            );
            acc.0 += out.si_sdri;
            acc.1 += out.identity_switch_rate;
        }
    }
    for (m, (s, r)) in methods.iter().zip(sums) {
        println!("{:<10} mean si-sdri {:>7.2} dB  mean switch {:.3}", m.name(), s / seeds as f64, r / seeds as f64);
    }
    Ok(())
}
