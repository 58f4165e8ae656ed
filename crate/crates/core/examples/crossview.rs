//! Cross-view benchmark: train at view 0, test at 30° and 60°, comparing the
//! plain switching forest with view clustering + augmentation + consistency
//! filtering.
//!
//! `cargo run --release -p klrf --example crossview -- [seeds] [trees] [translations] [rotations] [offsets]`

use std::time::Instant;

use klrf::eval::{evaluate, EvalOptions};
use klrf::io::{synth_generate, SynthConfig};
use klrf::learning::train_klrf;
use klrf::model::AugmentationConfig;
use klrf::KlrfConfig;

fn main() -> klrf::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let arg = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let (seeds, trees) = (arg(0, 3) as u64, arg(1, 100));
    let mut diffs = Vec::new();
    for seed in 0..seeds {
        let data = synth_generate(&SynthConfig { seed, views: vec![30.0, 60.0], ..SynthConfig::default() })?;
        let test: Vec<_> = data.tests.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
        let plain = KlrfConfig { num_trees: trees, seed, leaf_kinematics: false, ..KlrfConfig::default() };
        let cross = KlrfConfig {
            cross_view_mode: true,
            leaf_kinematics: true,
            augmentation: AugmentationConfig {
                enabled: true,
                translations: arg(2, 2),
                rotations: arg(3, 2),
                temporal_offsets: arg(4, 2),
                ..AugmentationConfig::default()
            },
            ..plain.clone()
        };
        let t0 = Instant::now();
        let (mp, _) = train_klrf(&data.train, &plain)?;
        let (rp, _) = evaluate(&mp, &test, &EvalOptions::default())?;
        let t1 = Instant::now();
        let (mc, _) = train_klrf(&data.train, &cross)?;
        let opts = EvalOptions { kcf: true, temporal_offsets: cross.augmentation.temporal_offsets };
        let (rc, _) = evaluate(&mc, &test, &opts)?;
        let (rc_nokcf, _) = evaluate(&mc, &test, &EvalOptions::default())?;
        println!(
            "seed {seed}: plain {:.2} {:?} | cross {:.2} {:?} (no kcf {:.2}) | {:.1}s + {:.1}s",
            100.0 * rp.mean_accuracy,
            rp.per_view_accuracy,
            100.0 * rc.mean_accuracy,
            rc.per_view_accuracy,
            100.0 * rc_nokcf.mean_accuracy,
            (t1 - t0).as_secs_f64(),
            t1.elapsed().as_secs_f64()
        );
        diffs.push(rc.mean_accuracy - rp.mean_accuracy);
    }
    let wins = diffs.iter().filter(|d| **d > 0.0).count();
    println!("mean diff {:+.2}, wins {wins}/{}", 100.0 * diffs.iter().sum::<f64>() / diffs.len() as f64, diffs.len());
    Ok(())
}
