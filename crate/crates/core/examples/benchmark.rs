//! Synthetic benchmark: KLRF against the class-entropy baseline.
//!
//! `cargo run --release -p klrf --example benchmark -- [seeds] [trees] [σ_a] [λ]`

use std::time::Instant;

use klrf::eval::{evaluate, usefulness_summary, EvalOptions};
use klrf::io::{synth_generate, SynthConfig};
use klrf::learning::{prepare_samples, train_baseline_samples, train_klrf_samples};
use klrf::{KlrfConfig, LabelMap};

fn main() -> klrf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let seeds = arg(0, 3.0) as u64;
    let trees = arg(1, 100.0) as usize;
    let mut gains = Vec::new();
    for seed in 0..seeds {
        let synth = SynthConfig {
            seed,
            appearance_noise: arg(2, SynthConfig::default().appearance_noise),
            class_signal: arg(3, SynthConfig::default().class_signal),
            ..SynthConfig::default()
        };
        let data = synth_generate(&synth)?;
        let reference = args.get(4).and_then(|s| s.parse().ok());
        let config = KlrfConfig { num_trees: trees, reference_trees: reference, seed, leaf_kinematics: false, ..KlrfConfig::default() };
        let labels = LabelMap::from_sequences(&data.train);
        let start = Instant::now();
        let samples = prepare_samples(&data.train, &labels, &config)?;
        let (klrf, _) = train_klrf_samples(samples.clone(), &labels, &config)?;
        let (base, _) = train_baseline_samples(&samples, &labels, &config)?;
        let test = &data.tests[0].1;
        let (rk, _) = evaluate(&klrf, test, &EvalOptions::default())?;
        let (rb, _) = evaluate(&base, test, &EvalOptions::default())?;
        let u: Vec<String> = usefulness_summary(&klrf.usefulness, &labels, 10)
            .iter()
            .map(|s| format!("{:+.2}", s.mean))
            .collect();
        let fmt = |v: &[Option<f64>]| v.iter().map(|a| format!("{:.2}", a.unwrap_or(0.0))).collect::<Vec<_>>().join(" ");
        println!(
            "seed {seed}: klrf {:.2} base {:.2} gain {:+.2} | U [{}] | klrf [{}] base [{}] | {:.1}s",
            100.0 * rk.mean_accuracy,
            100.0 * rb.mean_accuracy,
            100.0 * (rk.mean_accuracy - rb.mean_accuracy),
            u.join(" "),
            fmt(&rk.per_class_accuracy),
            fmt(&rb.per_class_accuracy),
            start.elapsed().as_secs_f64()
        );
        gains.push(rk.mean_accuracy - rb.mean_accuracy);
    }
    println!("mean gain {:+.2}", 100.0 * gains.iter().sum::<f64>() / gains.len() as f64);
    Ok(())
}
