use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RaceType};
use crate::error::{Error, Result};

/// The four standard deviations, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    Mu,
    Beta,
    Gamma,
    Omega,
}

impl SigmaKind {
    pub const ALL: [SigmaKind; 4] = [SigmaKind::Mu, SigmaKind::Beta, SigmaKind::Gamma, SigmaKind::Omega];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SigmaKind::Mu => "mu",
            SigmaKind::Beta => "beta",
            SigmaKind::Gamma => "gamma",
            SigmaKind::Omega => "omega",
        }
    }
}

/// Parameter classes held fixed at zero instead of being sampled.
///
/// Used to build reduced models (e.g. a single free baseline) that can be
/// checked against quadrature. A clamped `log_sigma` means every standard
/// deviation is 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clamp {
    #[serde(default)]
    pub mu: bool,
    #[serde(default)]
    pub beta: bool,
    #[serde(default)]
    pub gamma: bool,
    #[serde(default)]
    pub omega: bool,
    #[serde(default)]
    pub log_sigma: bool,
}

impl Clamp {
    /// Everything except the baseline `mu` block.
    pub fn all_but_mu() -> Self {
        Clamp {
            mu: false,
            beta: true,
            gamma: true,
            omega: true,
            log_sigma: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_athletes: usize,
    pub n_stages: usize,
    pub n_race_types: usize,
    /// Scale `c` of the half-normal prior on each standard deviation.
    pub sigma_prior_scale: f64,
    #[serde(default)]
    pub clamp: Clamp,
}

impl ModelSpec {
    pub fn new(n_athletes: usize, n_stages: usize, n_race_types: usize) -> Result<Self> {
        let spec = ModelSpec {
            n_athletes,
            n_stages,
            n_race_types,
            sigma_prior_scale: 1.0,
            clamp: Clamp::default(),
        };
        spec.check()?;
        Ok(spec)
    }

    /// Dimensions of a dataset: its athletes, its stages and the four race formats.
    pub fn for_dataset(d: &Dataset) -> Result<Self> {
        Self::new(d.n_athletes(), d.n_stages(), RaceType::ALL.len())
    }

    pub fn with_clamp(mut self, clamp: Clamp) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn with_sigma_prior_scale(mut self, c: f64) -> Self {
        self.sigma_prior_scale = c;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.n_athletes < 2 || self.n_stages < 1 || self.n_race_types < 2 {
            return Err(Error::Config(format!(
                "model needs S >= 2, T >= 1, Z >= 2; got S={}, T={}, Z={}",
                self.n_athletes, self.n_stages, self.n_race_types
            )));
        }
        if !(self.sigma_prior_scale > 0.0 && self.sigma_prior_scale.is_finite()) {
            return Err(Error::Config(format!(
                "sigma prior scale must be positive, got {}",
                self.sigma_prior_scale
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n_athletes, self.n_stages, self.n_race_types)
    }

    pub fn dim(&self) -> usize {
        self.layout().dim
    }

    /// Free-coordinate names, in storage order.
    pub fn param_names(&self) -> Vec<String> {
        let (s_n, t_n, z_n) = (self.n_athletes, self.n_stages, self.n_race_types);
        let mut names = Vec::with_capacity(self.dim());
        names.extend((1..=t_n).map(|t| format!("mu[{t}]")));
        for s in 1..s_n {
            names.extend((1..=t_n).map(|t| format!("beta_free[{s},{t}]")));
        }
        names.extend((1..=s_n).map(|s| format!("gamma_free[{s}]")));
        for s in 1..=s_n {
            names.extend((1..z_n).map(|z| format!("omega_free[{s},{z}]")));
        }
        names.extend(SigmaKind::ALL.iter().map(|k| format!("log_sigma_{}", k.as_str())));
        names
    }

    /// Whether free coordinate `j` is held fixed.
    pub fn is_clamped(&self, j: usize) -> bool {
        let l = self.layout();
        let c = &self.clamp;
        if l.mu_range().contains(&j) {
            c.mu
        } else if l.beta_range().contains(&j) {
            c.beta
        } else if l.gamma_range().contains(&j) {
            c.gamma
        } else if l.omega_range().contains(&j) {
            c.omega
        } else {
            c.log_sigma
        }
    }

    pub fn free_coordinates(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.is_clamped(j)).collect()
    }

    /// Draws a state from the prior. Clamped classes stay at zero.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterState {
        let mut p = ParameterState::zeros(self);
        let c = self.sigma_prior_scale;
        if !self.clamp.log_sigma {
            for k in 0..4 {
                let z: f64 = rng.sample(StandardNormal);
                p.log_sigma_mut()[k] = (c * z.abs()).ln();
            }
        }
        let sigma = p.sigma();
        let normal = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
        let t_n = self.n_stages;
        if !self.clamp.mu {
            let mut prev = 0.0;
            for t in 0..t_n {
                prev += sigma[0] * normal(rng);
                p.mu_mut()[t] = prev;
            }
        }
        if !self.clamp.beta {
            for s in 0..self.n_athletes - 1 {
                let mut prev = 0.0;
                for t in 0..t_n {
                    prev += sigma[1] * normal(rng);
                    p.beta_free_mut(s)[t] = prev;
                }
            }
        }
        if !self.clamp.gamma {
            for s in 0..self.n_athletes {
                p.gamma_free_mut()[s] = sigma[2] * normal(rng);
            }
        }
        if !self.clamp.omega {
            for s in 0..self.n_athletes {
                for v in p.omega_free_mut(s) {
                    *v = sigma[3] * normal(rng);
                }
            }
        }
        p
    }

    /// Constrained effects of `p`, after checking its shape against this spec.
    pub fn expand(&self, p: &ParameterState) -> Result<Effects> {
        self.check_state(p)?;
        Ok(p.expand())
    }

    pub fn check_state(&self, p: &ParameterState) -> Result<()> {
        if p.n_athletes != self.n_athletes || p.n_stages != self.n_stages || p.n_race_types != self.n_race_types {
            return Err(Error::Dimension(format!(
                "state is (S={}, T={}, Z={}), spec is (S={}, T={}, Z={})",
                p.n_athletes, p.n_stages, p.n_race_types, self.n_athletes, self.n_stages, self.n_race_types
            )));
        }
        Ok(())
    }
}

/// Offsets of each parameter class in the free-coordinate vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_athletes: usize,
    pub n_stages: usize,
    pub n_race_types: usize,
    pub beta: usize,
    pub gamma: usize,
    pub omega: usize,
    pub log_sigma: usize,
    pub dim: usize,
}

impl Layout {
    pub fn new(n_athletes: usize, n_stages: usize, n_race_types: usize) -> Self {
        let beta = n_stages;
        let gamma = beta + n_athletes.saturating_sub(1) * n_stages;
        let omega = gamma + n_athletes;
        let log_sigma = omega + n_athletes * (n_race_types - 1);
        Layout {
            n_athletes,
            n_stages,
            n_race_types,
            beta,
            gamma,
            omega,
            log_sigma,
            dim: log_sigma + 4,
        }
    }

    pub fn mu_range(&self) -> std::ops::Range<usize> {
        0..self.beta
    }

    pub fn beta_range(&self) -> std::ops::Range<usize> {
        self.beta..self.gamma
    }

    /// Coordinates of free athlete `s`'s trajectory (`s < S-1`).
    pub fn beta_row(&self, s: usize) -> std::ops::Range<usize> {
        let start = self.beta + s * self.n_stages;
        start..start + self.n_stages
    }

    pub fn gamma_range(&self) -> std::ops::Range<usize> {
        self.gamma..self.omega
    }

    pub fn omega_range(&self) -> std::ops::Range<usize> {
        self.omega..self.log_sigma
    }

    pub fn omega_row(&self, s: usize) -> std::ops::Range<usize> {
        let start = self.omega + s * (self.n_race_types - 1);
        start..start + self.n_race_types - 1
    }

    pub fn log_sigma_range(&self) -> std::ops::Range<usize> {
        self.log_sigma..self.dim
    }
}

/// A point in the unconstrained (free-coordinate) parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub n_athletes: usize,
    pub n_stages: usize,
    pub n_race_types: usize,
    coords: Vec<f64>,
}

impl ParameterState {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let l = spec.layout();
        ParameterState {
            n_athletes: spec.n_athletes,
            n_stages: spec.n_stages,
            n_race_types: spec.n_race_types,
            coords: vec![0.0; l.dim],
        }
    }

    pub fn from_coords(spec: &ModelSpec, coords: Vec<f64>) -> Result<Self> {
        let dim = spec.dim();
        if coords.len() != dim {
            return Err(Error::Dimension(format!("{} coordinates for dimension {dim}", coords.len())));
        }
        Ok(ParameterState {
            n_athletes: spec.n_athletes,
            n_stages: spec.n_stages,
            n_race_types: spec.n_race_types,
            coords,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n_athletes, self.n_stages, self.n_race_types)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn mu(&self) -> &[f64] {
        &self.coords[self.layout().mu_range()]
    }

    pub fn mu_mut(&mut self) -> &mut [f64] {
        let r = self.layout().mu_range();
        &mut self.coords[r]
    }

    pub fn beta_free(&self, s: usize) -> &[f64] {
        &self.coords[self.layout().beta_row(s)]
    }

    pub fn beta_free_mut(&mut self, s: usize) -> &mut [f64] {
        let r = self.layout().beta_row(s);
        &mut self.coords[r]
    }

    pub fn gamma_free(&self) -> &[f64] {
        &self.coords[self.layout().gamma_range()]
    }

    pub fn gamma_free_mut(&mut self) -> &mut [f64] {
        let r = self.layout().gamma_range();
        &mut self.coords[r]
    }

    pub fn omega_free(&self, s: usize) -> &[f64] {
        &self.coords[self.layout().omega_row(s)]
    }

    pub fn omega_free_mut(&mut self, s: usize) -> &mut [f64] {
        let r = self.layout().omega_row(s);
        &mut self.coords[r]
    }

    pub fn log_sigma(&self) -> &[f64] {
        &self.coords[self.layout().log_sigma_range()]
    }

    pub fn log_sigma_mut(&mut self) -> &mut [f64] {
        let r = self.layout().log_sigma_range();
        &mut self.coords[r]
    }

    pub fn sigma(&self) -> [f64; 4] {
        let ls = self.log_sigma();
        [ls[0].exp(), ls[1].exp(), ls[2].exp(), ls[3].exp()]
    }

    /// Constrained effects. Every sum-to-zero identity holds exactly up to
    /// the rounding of one negated sum.
    pub fn expand(&self) -> Effects {
        expand_coords(self.n_athletes, self.n_stages, self.n_race_types, &self.coords)
    }
}

pub(crate) fn expand_coords(n_athletes: usize, n_stages: usize, n_race_types: usize, coords: &[f64]) -> Effects {
    let l = Layout::new(n_athletes, n_stages, n_race_types);
    let mu = coords[l.mu_range()].to_vec();

    let mut beta = vec![0.0; n_athletes * n_stages];
    let last = n_athletes - 1;
    for s in 0..last {
        let row = &coords[l.beta_row(s)];
        beta[s * n_stages..(s + 1) * n_stages].copy_from_slice(row);
        for t in 0..n_stages {
            beta[last * n_stages + t] -= row[t];
        }
    }

    let gamma = coords[l.gamma_range()].iter().map(|&g| [g, -g]).collect();

    let mut omega = vec![0.0; n_athletes * n_race_types];
    for s in 0..n_athletes {
        let row = &coords[l.omega_row(s)];
        let out = &mut omega[s * n_race_types..(s + 1) * n_race_types];
        out[..n_race_types - 1].copy_from_slice(row);
        out[n_race_types - 1] = -row.iter().sum::<f64>();
    }

    let ls = &coords[l.log_sigma_range()];
    Effects {
        n_athletes,
        n_stages,
        n_race_types,
        mu,
        beta,
        gamma,
        omega,
        sigma: [ls[0].exp(), ls[1].exp(), ls[2].exp(), ls[3].exp()],
    }
}

/// Constrained model effects.
#[derive(Clone, Debug, PartialEq)]
pub struct Effects {
    pub n_athletes: usize,
    pub n_stages: usize,
    pub n_race_types: usize,
    pub mu: Vec<f64>,
    /// Athlete-major `S x T`.
    pub beta: Vec<f64>,
    /// `[prone, standing]` per athlete.
    pub gamma: Vec<[f64; 2]>,
    /// Athlete-major `S x Z`.
    pub omega: Vec<f64>,
    pub sigma: [f64; 4],
}

impl Effects {
    pub fn beta(&self, s: usize, t: usize) -> f64 {
        self.beta[s * self.n_stages + t]
    }

    pub fn omega(&self, s: usize, z: usize) -> f64 {
        self.omega[s * self.n_race_types + z]
    }

    /// Linear predictor for zero-based indices.
    pub fn eta(&self, s: usize, t: usize, x: usize, z: usize) -> f64 {
        self.mu[t] + self.beta(s, t) + self.gamma[s][x] + self.omega(s, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn paper_dimension() {
        let spec = ModelSpec::new(30, 11, 4).unwrap();
        assert_eq!(spec.dim(), 11 + 29 * 11 + 30 + 30 * 3 + 4);
        assert_eq!(spec.dim(), 454);
        assert_eq!(spec.param_names().len(), 454);
        assert_eq!(spec.param_names()[0], "mu[1]");
        assert_eq!(spec.param_names()[453], "log_sigma_omega");
    }

    #[test]
    fn rejects_small_shapes() {
        assert!(ModelSpec::new(1, 4, 4).is_err());
        assert!(ModelSpec::new(2, 0, 4).is_err());
        assert!(ModelSpec::new(2, 1, 1).is_err());
        assert!(ModelSpec::new(2, 1, 2).is_ok());
    }

    #[test]
    fn zero_state_expands_to_zero() {
        let spec = ModelSpec::new(3, 4, 4).unwrap();
        let e = spec.expand(&ParameterState::zeros(&spec)).unwrap();
        assert!(e.mu.iter().chain(&e.beta).chain(&e.omega).all(|&v| v == 0.0));
        assert!(e.gamma.iter().all(|g| g == &[0.0, 0.0]));
        assert_eq!(e.sigma, [1.0; 4]);
    }

    #[test]
    fn last_athlete_is_negated() {
        let spec = ModelSpec::new(2, 3, 2).unwrap();
        let mut p = ParameterState::zeros(&spec);
        p.beta_free_mut(0).fill(0.3);
        let e = p.expand();
        for t in 0..3 {
            assert_eq!(e.beta(1, t), -0.3);
        }
    }

    #[test]
    fn constraints_hold_for_random_states() {
        let spec = ModelSpec::new(7, 5, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..20 {
            let coords = (0..spec.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = ParameterState::from_coords(&spec, coords).unwrap();
            let e = p.expand();
            for t in 0..5 {
                // independent recomputation of the column sum
                let mut col = 0.0;
                for s in 0..7 {
                    col += e.beta[s * 5 + t];
                }
                assert!(col.abs() < 1e-13, "{col}");
            }
            for s in 0..7 {
                assert_eq!(e.gamma[s][0] + e.gamma[s][1], 0.0);
                let row: f64 = e.omega[s * 4..s * 4 + 4].iter().sum();
                assert!(row.abs() < 1e-13);
            }
            assert!(e.sigma.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = ModelSpec::new(3, 4, 4).unwrap();
        let b = ModelSpec::new(3, 5, 4).unwrap();
        assert!(matches!(a.expand(&ParameterState::zeros(&b)), Err(Error::Dimension(_))));
        assert!(ParameterState::from_coords(&a, vec![0.0; 3]).is_err());
    }

    #[test]
    fn clamped_prior_draws_stay_zero() {
        let spec = ModelSpec::new(2, 1, 2).unwrap().with_clamp(Clamp::all_but_mu());
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = spec.sample_prior(&mut rng);
        assert_ne!(p.mu()[0], 0.0);
        assert!(p.coords()[1..].iter().all(|&v| v == 0.0));
        assert_eq!(spec.free_coordinates(), vec![0]);
    }
}
