//! Simulation-based calibration of the full pipeline at reduced scale.
//!
//! `cargo run --release --example calibration -- [replications] [seed]`

use std::time::Instant;

use biathlon_bayes::data::SynthConfig;
use biathlon_bayes::sampler::SamplerConfig;
use biathlon_bayes::validate::sbc;

fn main() -> biathlon_bayes::Result<()> {
    let mut args = std::env::args().skip(1);
    let replications = args.next().map_or(100, |a| a.parse().expect("replications"));
    let seed = args.next().map_or(1, |a| a.parse().expect("seed"));
    let synth = SynthConfig::new(5, 4, 0);
    let spec = synth.model_spec();
    let sampler = SamplerConfig {
        seed,
        ..SamplerConfig::default()
    };
    let started = Instant::now();
    let report = sbc(&spec, &synth, replications, &sampler)?;
    println!(
        "{} of {} replications fitted in {:.1}s",
        report.succeeded,
        report.replications,
        started.elapsed().as_secs_f64()
    );
    println!("{:<20} {:>6} {:>6} {:>8}", "parameter", "cov50", "cov90", "p");
    for p in &report.parameters {
        println!("{:<20} {:>6.2} {:>6.2} {:>8.4}", p.name, p.coverage_50, p.coverage_90, p.p_value);
    }
    println!(
        "90% coverage in [0.84, 0.96] for {:.1}% of parameters; uniformity rejected: {}",
        100.0 * report.coverage_90_fraction(0.84, 0.96),
        report.any_rejected()
    );
    Ok(())
}
