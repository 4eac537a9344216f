use super::state::{expand_coords, Layout, ModelSpec, ParameterState};
use super::{inv_logit, softplus};
use crate::data::{Dataset, SHOTS_PER_BOUT};
use crate::error::{Error, Result};

const N_SHOTS: f64 = SHOTS_PER_BOUT as f64;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln C(5, y)` for `y = 0..=5`.
const LN_CHOOSE_5: [f64; 6] = [
    0.0,
    1.609_437_912_434_100_4,
    2.302_585_092_994_045_7,
    2.302_585_092_994_045_7,
    1.609_437_912_434_100_4,
    0.0,
];

pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Gaussian random walk started at zero: `x[0] ~ N(0, sd)`,
/// `x[t] ~ N(x[t-1], sd)`.
pub fn random_walk_logpdf(xs: &[f64], sd: f64) -> f64 {
    let mut prev = 0.0;
    let mut lp = 0.0;
    for &x in xs {
        lp += normal_logpdf(x, prev, sd);
        prev = x;
    }
    lp
}

/// Adds the random-walk gradient to `out`; returns `d/d ln(sd)`.
pub(crate) fn random_walk_grad(xs: &[f64], sd: f64, out: &mut [f64]) -> f64 {
    let inv_var = 1.0 / (sd * sd);
    let mut dlog_sd = 0.0;
    let mut prev = 0.0;
    for t in 0..xs.len() {
        let r = xs[t] - prev;
        out[t] -= r * inv_var;
        if t > 0 {
            out[t - 1] += r * inv_var;
        }
        dlog_sd += r * r * inv_var - 1.0;
        prev = xs[t];
    }
    dlog_sd
}

pub(crate) fn iid_logpdf(xs: &[f64], sd: f64) -> f64 {
    xs.iter().map(|&x| normal_logpdf(x, 0.0, sd)).sum()
}

/// Adds the iid-normal gradient to `out`; returns `d/d ln(sd)`.
pub(crate) fn iid_grad(xs: &[f64], sd: f64, out: &mut [f64]) -> f64 {
    let inv_var = 1.0 / (sd * sd);
    let mut dlog_sd = 0.0;
    for (o, &x) in out.iter_mut().zip(xs) {
        *o -= x * inv_var;
        dlog_sd += x * x * inv_var - 1.0;
    }
    dlog_sd
}

/// Half-normal(0, c) density of `sigma = exp(log_sigma)`, on the log scale,
/// including the `ln sigma` Jacobian.
pub fn half_normal_log_sigma(log_sigma: f64, c: f64) -> f64 {
    let sigma = log_sigma.exp();
    std::f64::consts::LN_2 - c.ln() - LN_SQRT_2PI - sigma * sigma / (2.0 * c * c) + log_sigma
}

pub(crate) fn half_normal_log_sigma_grad(log_sigma: f64, c: f64) -> f64 {
    let s2 = (2.0 * log_sigma).exp();
    1.0 - s2 / (c * c)
}

/// Binomial log-mass of `hits` out of five at log-odds `eta`, evaluated
/// without forming `p`.
#[inline]
pub(crate) fn bout_log_lik(hits: u8, eta: f64) -> f64 {
    let y = hits as f64;
    LN_CHOOSE_5[hits as usize] - y * softplus(-eta) - (N_SHOTS - y) * softplus(eta)
}

/// `d/d eta` of [`bout_log_lik`]: `y - 5 p`.
#[inline]
pub(crate) fn bout_score(hits: u8, eta: f64) -> f64 {
    hits as f64 - N_SHOTS * inv_logit(eta)
}

/// Dataset indices in compact form, checked against a model's dimensions.
#[derive(Clone, Debug)]
pub struct Observations {
    pub athlete: Vec<u32>,
    pub stage: Vec<u32>,
    pub position: Vec<u8>,
    pub race: Vec<u8>,
    pub hits: Vec<u8>,
}

impl Observations {
    pub fn new(d: &Dataset, spec: &ModelSpec) -> Result<Self> {
        let n = d.len();
        let mut obs = Observations {
            athlete: Vec::with_capacity(n),
            stage: Vec::with_capacity(n),
            position: Vec::with_capacity(n),
            race: Vec::with_capacity(n),
            hits: Vec::with_capacity(n),
        };
        for (i, r) in d.records().iter().enumerate() {
            let s = d.athlete_index(i);
            let t = r.stage as usize - 1;
            let z = r.race_type.index();
            if s >= spec.n_athletes || t >= spec.n_stages || z >= spec.n_race_types {
                return Err(Error::OutOfRange(format!(
                    "record {i} has (athlete {}, stage {}, race {}) outside S={}, T={}, Z={}",
                    s + 1,
                    t + 1,
                    z + 1,
                    spec.n_athletes,
                    spec.n_stages,
                    spec.n_race_types
                )));
            }
            obs.athlete.push(s as u32);
            obs.stage.push(t as u32);
            obs.position.push(r.position.index() as u8);
            obs.race.push(z as u8);
            obs.hits.push(r.hits);
        }
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Log posterior over the free coordinates for one dataset.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub spec: ModelSpec,
    pub obs: Observations,
    layout: Layout,
}

impl Posterior {
    pub fn new(spec: ModelSpec, d: &Dataset) -> Result<Self> {
        spec.check()?;
        let obs = Observations::new(d, &spec)?;
        Ok(Self::from_observations(spec, obs))
    }

    pub fn from_observations(spec: ModelSpec, obs: Observations) -> Self {
        let layout = spec.layout();
        Posterior { spec, obs, layout }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn check_len(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.layout.dim {
            return Err(Error::Dimension(format!(
                "{} coordinates for dimension {}",
                coords.len(),
                self.layout.dim
            )));
        }
        Ok(())
    }

    /// Linear predictor of every record.
    pub fn etas(&self, coords: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let e = expand_coords(l.n_athletes, l.n_stages, l.n_race_types, coords);
        let o = &self.obs;
        (0..o.len())
            .map(|i| e.eta(o.athlete[i] as usize, o.stage[i] as usize, o.position[i] as usize, o.race[i] as usize))
            .collect()
    }

    pub fn log_likelihood(&self, coords: &[f64]) -> Result<f64> {
        self.check_len(coords)?;
        Ok(self
            .etas(coords)
            .iter()
            .zip(&self.obs.hits)
            .map(|(&eta, &y)| bout_log_lik(y, eta))
            .sum())
    }

    pub fn log_prior(&self, coords: &[f64]) -> Result<f64> {
        self.check_len(coords)?;
        Ok(log_prior_coords(&self.layout, self.spec.sigma_prior_scale, coords))
    }

    pub fn log_density(&self, coords: &[f64]) -> Result<f64> {
        Ok(self.log_likelihood(coords)? + self.log_prior(coords)?)
    }

    /// Analytic gradient of the log posterior with respect to the free
    /// coordinates, through the constraint expansion.
    pub fn gradient(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coords)?;
        let l = &self.layout;
        let (s_n, t_n, z_n) = (l.n_athletes, l.n_stages, l.n_race_types);
        let last = s_n - 1;
        let mut g = vec![0.0; l.dim];

        // d loglik / d eta accumulated onto the constrained effects
        let mut d_mu = vec![0.0; t_n];
        let mut d_beta = vec![0.0; s_n * t_n];
        let mut d_gamma = vec![0.0; s_n];
        let mut d_omega = vec![0.0; s_n * z_n];
        let o = &self.obs;
        for (i, &eta) in self.etas(coords).iter().enumerate() {
            let score = bout_score(o.hits[i], eta);
            let (s, t) = (o.athlete[i] as usize, o.stage[i] as usize);
            d_mu[t] += score;
            d_beta[s * t_n + t] += score;
            d_gamma[s] += if o.position[i] == 0 { score } else { -score };
            d_omega[s * z_n + o.race[i] as usize] += score;
        }

        g[l.mu_range()].copy_from_slice(&d_mu);
        for s in 0..last {
            let row = l.beta_row(s);
            for t in 0..t_n {
                g[row.start + t] = d_beta[s * t_n + t] - d_beta[last * t_n + t];
            }
        }
        g[l.gamma_range()].copy_from_slice(&d_gamma);
        for s in 0..s_n {
            let row = l.omega_row(s);
            let tail = d_omega[s * z_n + z_n - 1];
            for z in 0..z_n - 1 {
                g[row.start + z] = d_omega[s * z_n + z] - tail;
            }
        }

        add_log_prior_grad(l, self.spec.sigma_prior_scale, coords, &mut g);
        Ok(g)
    }
}

pub(crate) fn log_prior_coords(l: &Layout, c: f64, coords: &[f64]) -> f64 {
    let ls = &coords[l.log_sigma_range()];
    let sd: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
    let mut lp = random_walk_logpdf(&coords[l.mu_range()], sd[0]);
    for s in 0..l.n_athletes - 1 {
        lp += random_walk_logpdf(&coords[l.beta_row(s)], sd[1]);
    }
    lp += iid_logpdf(&coords[l.gamma_range()], sd[2]);
    lp += iid_logpdf(&coords[l.omega_range()], sd[3]);
    lp + ls.iter().map(|&v| half_normal_log_sigma(v, c)).sum::<f64>()
}

fn add_log_prior_grad(l: &Layout, c: f64, coords: &[f64], g: &mut [f64]) {
    let ls_start = l.log_sigma;
    let sd: Vec<f64> = coords[l.log_sigma_range()].iter().map(|v| v.exp()).collect();
    let mut dls = [0.0; 4];

    let r = l.mu_range();
    dls[0] += random_walk_grad(&coords[r.clone()], sd[0], &mut g[r]);
    for s in 0..l.n_athletes - 1 {
        let r = l.beta_row(s);
        dls[1] += random_walk_grad(&coords[r.clone()], sd[1], &mut g[r]);
    }
    let r = l.gamma_range();
    dls[2] += iid_grad(&coords[r.clone()], sd[2], &mut g[r]);
    let r = l.omega_range();
    dls[3] += iid_grad(&coords[r.clone()], sd[3], &mut g[r]);

    for k in 0..4 {
        g[ls_start + k] += dls[k] + half_normal_log_sigma_grad(coords[ls_start + k], c);
    }
}

/// Linear predictor of record `i` of `d`.
pub fn linear_predictor(p: &ParameterState, d: &Dataset, i: usize) -> Result<f64> {
    let r = d
        .records()
        .get(i)
        .ok_or_else(|| Error::OutOfRange(format!("record {i} of {}", d.len())))?;
    let s = d.athlete_index(i);
    let t = r.stage as usize - 1;
    let z = r.race_type.index();
    if s >= p.n_athletes || t >= p.n_stages || z >= p.n_race_types {
        return Err(Error::OutOfRange(format!(
            "record {i} indices outside S={}, T={}, Z={}",
            p.n_athletes, p.n_stages, p.n_race_types
        )));
    }
    Ok(p.expand().eta(s, t, r.position.index(), z))
}

fn spec_of(p: &ParameterState) -> ModelSpec {
    ModelSpec {
        n_athletes: p.n_athletes,
        n_stages: p.n_stages,
        n_race_types: p.n_race_types,
        sigma_prior_scale: 1.0,
        clamp: Default::default(),
    }
}

pub fn log_likelihood(p: &ParameterState, d: &Dataset) -> Result<f64> {
    let spec = spec_of(p);
    let obs = Observations::new(d, &spec)?;
    Posterior::from_observations(spec, obs).log_likelihood(p.coords())
}

pub fn log_prior(p: &ParameterState, spec: &ModelSpec) -> Result<f64> {
    spec.check_state(p)?;
    Ok(log_prior_coords(&spec.layout(), spec.sigma_prior_scale, p.coords()))
}

pub fn log_posterior(p: &ParameterState, d: &Dataset, spec: &ModelSpec) -> Result<f64> {
    spec.check_state(p)?;
    Posterior::new(spec.clone(), d)?.log_density(p.coords())
}

pub fn grad_log_posterior(p: &ParameterState, d: &Dataset, spec: &ModelSpec) -> Result<Vec<f64>> {
    spec.check_state(p)?;
    Posterior::new(spec.clone(), d)?.gradient(p.coords())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_sessions, Dataset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn small(rows: &str) -> Dataset {
        parse_sessions(format!("athlete,stage,race_type,position,race_seq,bout_seq,hits\n{rows}").as_bytes()).unwrap()
    }

    #[test]
    fn ln_choose_table() {
        for (y, expect) in [1.0f64, 5.0, 10.0, 10.0, 5.0, 1.0].iter().enumerate() {
            assert!((LN_CHOOSE_5[y] - expect.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_record_likelihoods() {
        let d = small("A,1,sprint,prone,1,1,5\n");
        let spec = ModelSpec::new(2, 1, 4).unwrap();
        let p = ParameterState::zeros(&spec);
        let ll = log_likelihood(&p, &d).unwrap();
        assert!((ll - 5.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((ll - (-3.4657)).abs() < 1e-4);

        let d3 = small("A,1,sprint,prone,1,1,3\n");
        let ll3 = log_likelihood(&p, &d3).unwrap();
        // direct pmf: C(5,3) / 2^5
        assert!((ll3 - (10.0f64 / 32.0).ln()).abs() < 1e-12);
        assert!((ll3 - (-1.16315)).abs() < 1e-5);
    }

    #[test]
    fn additive_over_records() {
        let one = small("A,1,sprint,prone,1,1,3\n");
        let two = small("A,1,sprint,prone,1,1,3\nA,1,sprint,standing,1,2,3\n");
        let spec = ModelSpec::new(2, 1, 4).unwrap();
        let mut p = ParameterState::zeros(&spec);
        p.mu_mut()[0] = 0.7;
        let a = log_likelihood(&p, &one).unwrap();
        let b = log_likelihood(&p, &two).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn linear_predictor_sums_effects() {
        // athlete A is index 0 of S = 2, so beta/gamma/omega come from free coordinates
        let d = small("A,1,sprint,prone,1,1,3\n");
        let spec = ModelSpec::new(2, 1, 4).unwrap();
        let mut p = ParameterState::zeros(&spec);
        p.mu_mut()[0] = 0.5;
        p.beta_free_mut(0)[0] = 0.2;
        p.gamma_free_mut()[0] = 0.3;
        p.omega_free_mut(0)[1] = -0.1;
        let eta = linear_predictor(&p, &d, 0).unwrap();
        assert!((eta - 0.9).abs() < 1e-15);

        let mut q = ParameterState::zeros(&spec);
        q.mu_mut()[0] = 1.671;
        let prob = inv_logit(linear_predictor(&q, &d, 0).unwrap());
        assert!((prob - 0.842).abs() < 5e-4);
        assert!(linear_predictor(&q, &d, 1).is_err());
    }

    #[test]
    fn out_of_range_indices() {
        let d = small("A,3,sprint,prone,1,1,3\n");
        let spec = ModelSpec::new(2, 2, 4).unwrap();
        assert!(matches!(Posterior::new(spec, &d), Err(Error::OutOfRange(_))));
        let d = small("A,1,pursuit,prone,1,1,3\n");
        let spec = ModelSpec::new(2, 1, 2).unwrap();
        assert!(Posterior::new(spec, &d).is_err());
    }

    #[test]
    fn log_prior_at_zero_closed_form() {
        for (s, t, z) in [(2, 1, 2), (3, 4, 3), (30, 11, 4)] {
            let spec = ModelSpec::new(s, t, z).unwrap();
            let p = ParameterState::zeros(&spec);
            let n_normal = (t + (s - 1) * t + s + s * (z - 1)) as f64;
            let ln_phi0 = (1.0 / (2.0 * PI).sqrt()).ln();
            let half_normal_at_one = (2.0 / (2.0 * PI).sqrt()).ln() - 0.5;
            let expected = n_normal * ln_phi0 + 4.0 * half_normal_at_one + 4.0 * 0.0;
            let got = log_prior(&p, &spec).unwrap();
            assert!((got - expected).abs() < 1e-10 * expected.abs(), "{got} vs {expected}");
        }
    }

    #[test]
    fn moving_mu_away_from_zero_lowers_prior() {
        let spec = ModelSpec::new(3, 4, 4).unwrap();
        let mut p = ParameterState::zeros(&spec);
        let mut last = log_prior(&p, &spec).unwrap();
        for v in [0.25, 0.5, 1.0, 2.0] {
            p.mu_mut()[0] = v;
            let lp = log_prior(&p, &spec).unwrap();
            assert!(lp < last);
            last = lp;
        }
    }

    /// Term-by-term oracle written against the model definition rather than
    /// the layout helpers.
    fn prior_oracle(p: &ParameterState, c: f64) -> f64 {
        let npdf = |x: f64, m: f64, s: f64| -((x - m) * (x - m)) / (2.0 * s * s) - (s * (2.0 * PI).sqrt()).ln();
        let sig = p.sigma();
        let mut total = 0.0;
        let mu = p.mu();
        for t in 0..p.n_stages {
            total += npdf(mu[t], if t == 0 { 0.0 } else { mu[t - 1] }, sig[0]);
        }
        for s in 0..p.n_athletes - 1 {
            let b = p.beta_free(s);
            for t in 0..p.n_stages {
                total += npdf(b[t], if t == 0 { 0.0 } else { b[t - 1] }, sig[1]);
            }
        }
        for &g in p.gamma_free() {
            total += npdf(g, 0.0, sig[2]);
        }
        for s in 0..p.n_athletes {
            for &w in p.omega_free(s) {
                total += npdf(w, 0.0, sig[3]);
            }
        }
        for (k, &ls) in p.log_sigma().iter().enumerate() {
            let sd = sig[k];
            total += (2.0f64).ln() + npdf(sd, 0.0, c) + ls;
        }
        total
    }

    #[test]
    fn log_prior_matches_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for (s, t, z) in [(2, 1, 2), (3, 4, 3), (30, 11, 4)] {
            let spec = ModelSpec::new(s, t, z).unwrap().with_sigma_prior_scale(1.3);
            for _ in 0..10 {
                let coords = (0..spec.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
                let p = ParameterState::from_coords(&spec, coords).unwrap();
                let a = log_prior(&p, &spec).unwrap();
                let b = prior_oracle(&p, 1.3);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn mu_gradient_identities() {
        let d = small("A,1,sprint,prone,1,1,5\n");
        let spec = ModelSpec::new(2, 1, 4).unwrap();
        let post = Posterior::new(spec.clone(), &d).unwrap();
        let p = ParameterState::zeros(&spec);
        let g = post.gradient(p.coords()).unwrap();
        // likelihood part is y - n p = 2.5; prior part at mu = 0 vanishes
        assert!((g[0] - 2.5).abs() < 1e-12);

        let empty = small("");
        let post = Posterior::new(spec.clone(), &empty).unwrap();
        let g = post.gradient(p.coords()).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn extreme_predictors_stay_finite() {
        let d = small("A,1,sprint,prone,1,1,0\nB,1,sprint,prone,1,1,5\n");
        let spec = ModelSpec::new(2, 1, 4).unwrap();
        for mu in [-20.0, 20.0, -700.0, 700.0] {
            let mut p = ParameterState::zeros(&spec);
            p.mu_mut()[0] = mu;
            let post = Posterior::new(spec.clone(), &d).unwrap();
            assert!(post.log_likelihood(p.coords()).unwrap().is_finite());
            assert!(post.gradient(p.coords()).unwrap().iter().all(|v| v.is_finite()));
        }
    }
}
