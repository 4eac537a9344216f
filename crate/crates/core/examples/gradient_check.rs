//! Analytic gradient against central finite differences at three shapes.
//!
//! `cargo run --release --example gradient_check`

use biathlon_bayes::model::ModelSpec;
use biathlon_bayes::validate::{gradient_check, random_dataset, season_design};

fn main() -> biathlon_bayes::Result<()> {
    for (s, t, z) in [(2, 1, 2), (3, 4, 3), (30, 11, 4)] {
        let d = if s == 30 { season_design()? } else { random_dataset(s, t, z, 1)? };
        let r = gradient_check(&ModelSpec::new(s, t, z)?, &d, 100, 1)?;
        println!(
            "({s},{t},{z}): {} points, max relative error {:.2e} at {}",
            r.n_points,
            r.max_rel_error,
            r.argmax_name.unwrap_or_default()
        );
    }
    Ok(())
}
