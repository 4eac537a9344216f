//! Exploratory tables for the 2021/22 season fixtures.
//!
//! `cargo run --example explore_season`

use std::fs::File;

use biathlon_bayes::data::{parse_sessions, RaceType};
use biathlon_bayes::explore::{
    accuracy_summary, cluster_athletes, favorite_race_counts, load_published_table, load_ranks, rank_correlations,
    stage_deviation_matrix,
};

fn main() -> biathlon_bayes::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let season = parse_sessions(File::open(format!("{dir}/season_2021_22_reconstructed.csv"))?)?;
    let published = load_published_table(File::open(format!("{dir}/published_accuracy_table.csv"))?)?;
    let ranks = load_ranks(File::open(format!("{dir}/season_2021_22_ranks.csv"))?)?;

    let summary = accuracy_summary(&season)?;
    let o = &summary.overall;
    println!(
        "season: {} bouts, overall {}%, prone {}%, standing {}%",
        season.len(),
        o.overall.unwrap().percent(),
        o.position[0].unwrap().percent(),
        o.position[1].unwrap().percent()
    );

    let fav = favorite_race_counts(&published);
    println!("\n{:<12} {:>9} {:>15}", "format", "favorite", "least favorite");
    for r in RaceType::ALL {
        println!("{:<12} {:>9} {:>15}", r.as_str(), fav.favorite[r.index()], fav.least[r.index()]);
    }

    println!("\nSpearman's rho against final rank:");
    for c in rank_correlations(&published, &ranks)? {
        println!("  {:<12} {:+.3}", c.feature.name(), c.rho);
    }

    let dev = stage_deviation_matrix(&season)?;
    let nilsson = dev.row("S. Nilsson").unwrap();
    let cells: Vec<String> = nilsson
        .iter()
        .map(|c| c.map_or("  .  ".into(), |v| format!("{:+.2}", v)))
        .collect();
    println!("\nS. Nilsson vs stage mean: {}", cells.join(" "));

    let clusters = cluster_athletes(&published, 3)?;
    for k in 1..=3 {
        let members: Vec<&str> = clusters
            .athletes
            .iter()
            .zip(&clusters.labels)
            .filter(|(_, &l)| l == k)
            .map(|(a, _)| a.as_str())
            .collect();
        println!("\ncluster {k} ({}): {}", members.len(), members.join(", "));
    }
    Ok(())
}
