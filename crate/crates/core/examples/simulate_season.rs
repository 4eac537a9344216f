//! Synthetic season from the generative model, with its validation report.
//!
//! `cargo run --example simulate_season -- [participation] [seed]`

use biathlon_bayes::data::{generate_synthetic, validate, write_sessions, SynthConfig};

fn main() -> biathlon_bayes::Result<()> {
    let mut args = std::env::args().skip(1);
    let participation = args.next().map_or(0.85, |a| a.parse().expect("participation"));
    let seed = args.next().map_or(1, |a| a.parse().expect("seed"));
    let mut cfg = SynthConfig::paper_scale(seed);
    cfg.participation_rate = participation;
    let (d, truth) = generate_synthetic(&cfg)?;
    let report = validate(&d);
    println!(
        "{} bouts, {} hits of {} shots, {} athlete-stage gaps",
        d.len(),
        d.total_hits(),
        d.total_shots(),
        report.participation_gaps
    );
    println!("true sigma (mu, beta, gamma, omega): {:.3?}", truth.sigma());
    let mut head = Vec::new();
    write_sessions(&d, &mut head)?;
    for line in String::from_utf8_lossy(&head).lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
