//! Fits the full-season synthetic season (2088 bouts) with the default
//! protocol and reports convergence.
//!
//! `cargo run --release --example fit_season -- [seed] [random_walk|gradient_assisted]`

use std::time::Instant;

use biathlon_bayes::model::ModelSpec;
use biathlon_bayes::sampler::{export_draws, run_chains, summarize, SamplerConfig};
use biathlon_bayes::validate::paper_season;

fn main() -> biathlon_bayes::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = SamplerConfig::default();
    if let Some(s) = args.next() {
        cfg.seed = s.parse().expect("seed");
    }
    if let Some(m) = args.next() {
        cfg.proposal_mode = m.parse()?;
    }
    let (d, truth) = paper_season(3, 5)?;
    let spec = ModelSpec::for_dataset(&d)?;
    let started = Instant::now();
    let samples = run_chains(&spec, &d, &cfg)?;
    println!(
        "{} draws of {} parameters in {:.1}s",
        samples.n_total(),
        samples.dim(),
        started.elapsed().as_secs_f64()
    );

    let rows = summarize(&samples)?;
    let max_rhat = rows.iter().filter_map(|r| r.rhat).fold(0.0, f64::max);
    let min_ess = rows.iter().filter_map(|r| r.ess).fold(f64::INFINITY, f64::min);
    println!("max split-rhat {max_rhat:.4}, min ESS {min_ess:.0}");
    let covered = rows
        .iter()
        .zip(truth.coords())
        .filter(|(r, &x)| r.q025 <= x && x <= r.q975)
        .count();
    println!("95% intervals cover the truth for {covered} of {} parameters", rows.len());
    for r in rows.iter().filter(|r| r.name.starts_with("log_sigma")) {
        println!("  {:<16} mean {:+.3}  [{:+.3}, {:+.3}]", r.name, r.mean, r.q025, r.q975);
    }

    let path = std::env::temp_dir().join("fit_season.draws");
    export_draws(&samples, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    println!("draws written to {}", path.display());
    Ok(())
}
