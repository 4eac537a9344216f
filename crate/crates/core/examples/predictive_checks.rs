//! Posterior predictive checks on a small synthetic season with sparse
//! participation.
//!
//! `cargo run --release --example predictive_checks`

use biathlon_bayes::data::{generate_synthetic, SynthConfig};
use biathlon_bayes::predict::{
    cumulative, position_effects, race_position, replicate_dataset, stage_totals, PpcOptions,
};
use biathlon_bayes::sampler::{run_chains, SamplerConfig};

fn main() -> biathlon_bayes::Result<()> {
    let mut synth = SynthConfig::new(8, 6, 21);
    synth.participation_rate = 0.7;
    let (d, _) = generate_synthetic(&synth)?;
    let spec = synth.model_spec();
    let samples = run_chains(&spec, &d, &SamplerConfig::default())?;

    let reps = replicate_dataset(&samples, &d, &PpcOptions::default())?;
    println!("stage  sessions  observed  95% interval");
    for t in stage_totals(&reps, &d)? {
        let s = &t.summary;
        println!("{:>5} {:>9} {:>9} [{:>5.0}, {:>5.0}]", t.stage, t.sessions, s.observed.unwrap(), s.lower, s.upper);
    }
    println!("\nformat       position  observed%  95% interval");
    for c in race_position(&reps, &d)? {
        let s = &c.summary;
        println!(
            "{:<12} {:<9} {:>9.1} [{:.1}, {:.1}]",
            c.race_type.as_str(),
            c.position.as_str(),
            s.observed.unwrap(),
            s.lower,
            s.upper
        );
    }
    let who = &d.athletes()[0];
    let path = cumulative(&reps, &d, who)?;
    let last = path.last().unwrap();
    println!(
        "\n{who}: {} races, {} hits observed, 95% interval [{}, {}]",
        path.len(),
        last.summary.observed.unwrap(),
        last.summary.lower,
        last.summary.upper
    );
    let [prone, standing] = &position_effects(&samples)?[0];
    println!(
        "{who}: prone odds ratio {:.2}, standing {:.2}",
        prone.odds_ratio.mean, standing.odds_ratio.mean
    );
    Ok(())
}
