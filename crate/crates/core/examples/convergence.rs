//! Split-rhat and ESS on a well-mixed and a deliberately unconverged pair of
//! chains.
//!
//! `cargo run --example convergence`

use biathlon_bayes::sampler::{ess_of, split_rhat, split_rhat_of};
use biathlon_bayes::validate::mean_shift_fixture;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn main() -> biathlon_bayes::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let z = Normal::new(0.0, 1.0).unwrap();
    let iid: Vec<Vec<f64>> = (0..4).map(|_| (0..1000).map(|_| z.sample(&mut rng)).collect()).collect();
    println!("iid chains:  rhat {:.4}, ESS {:.0}", split_rhat_of(&iid)?, ess_of(&iid)?);

    // AR(1) with coefficient 0.9: ESS near N (1 - 0.9) / (1 + 0.9)
    let ar: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let mut x = 0.0;
            (0..1000)
                .map(|_| {
                    x = 0.9 * x + z.sample(&mut rng);
                    x
                })
                .collect()
        })
        .collect();
    println!("AR(1) 0.9:   rhat {:.4}, ESS {:.0} (about 211 expected)", split_rhat_of(&ar)?, ess_of(&ar)?);

    let shifted = mean_shift_fixture(1000, 5.0, 1)?;
    println!("mean shift:  rhat {:.4}", split_rhat(&shifted, 0)?);
    Ok(())
}
