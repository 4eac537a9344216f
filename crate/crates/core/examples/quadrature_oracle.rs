//! The sampler against grid quadrature on the one-parameter model.
//!
//! `cargo run --release --example quadrature_oracle`

use biathlon_bayes::sampler::{ess, run_chains, SamplerConfig};
use biathlon_bayes::stats::{mean, variance};
use biathlon_bayes::validate::{oracle_problem, quadrature_posterior};

fn main() -> biathlon_bayes::Result<()> {
    let (spec, d) = oracle_problem()?;
    let q = quadrature_posterior(&spec, &d)?;
    println!(
        "quadrature ({} nodes): mean {:.6}, sd {:.6}, grid doubling moved the mean by {:.1e}",
        q.nodes, q.mean, q.sd, q.refinement_change
    );
    for (p, x) in &q.quantiles {
        println!("  q{p:<5} {x:+.4}");
    }
    let samples = run_chains(&spec, &d, &SamplerConfig::default())?;
    let draws = samples.pooled(0);
    let (m, sd, n_eff) = (mean(&draws), variance(&draws).sqrt(), ess(&samples, 0)?);
    let mcse = sd / n_eff.sqrt();
    println!(
        "sampler: mean {m:.6}, sd {sd:.6}, ESS {n_eff:.0}; error {:.2} MCSE, sd off by {:.2}%",
        (m - q.mean).abs() / mcse,
        100.0 * (sd / q.sd - 1.0).abs()
    );
    Ok(())
}
