//! The biathlon posterior as a [`BlockTarget`], with cached linear predictors.

use super::engine::{Block, BlockTarget, ScaleGroup};
use crate::model::density::{bout_log_lik, bout_score, half_normal_log_sigma_grad, iid_grad, iid_logpdf, random_walk_grad};
use crate::data::SHOTS_PER_BOUT;
use crate::model::{half_normal_log_sigma, inv_logit, random_walk_logpdf, Layout, ModelSpec, Posterior, SigmaKind};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SHOTS: f64 = SHOTS_PER_BOUT as f64;

#[derive(Clone, Copy, Debug)]
enum Kind {
    Mu,
    Beta,
    /// All free athletes' effects at one stage.
    BetaStage(usize),
    Gamma,
    Omega,
    LogSigma(usize),
}

/// Sparse map from a block's coordinates to the linear predictors they move.
#[derive(Clone, Debug, Default)]
struct Touch {
    records: Vec<u32>,
    /// `entries[starts[r]..starts[r + 1]]` belong to `records[r]`.
    starts: Vec<u32>,
    entries: Vec<(u16, f64)>,
}

impl Touch {
    fn push(&mut self, record: usize, entries: &[(u16, f64)]) {
        if self.starts.is_empty() {
            self.starts.push(0);
        }
        self.records.push(record as u32);
        self.entries.extend_from_slice(entries);
        self.starts.push(self.entries.len() as u32);
    }

    fn row(&self, r: usize) -> &[(u16, f64)] {
        &self.entries[self.starts[r] as usize..self.starts[r + 1] as usize]
    }
}

pub(crate) struct ModelTarget {
    posterior: Posterior,
    blocks: Vec<Block>,
    kinds: Vec<Kind>,
    touches: Vec<Touch>,
    max_touch: usize,
    groups: Vec<ScaleGroup>,
}

#[derive(Clone, Debug)]
pub(crate) struct Cache {
    eta: Vec<f64>,
    ll: Vec<f64>,
    staged_eta: Vec<f64>,
    staged_ll: Vec<f64>,
}

impl ModelTarget {
    pub(crate) fn new(posterior: Posterior) -> Self {
        let spec = posterior.spec.clone();
        let l = *posterior.layout();
        let obs = &posterior.obs;
        let (s_n, z_n) = (spec.n_athletes, spec.n_race_types);
        let last = s_n - 1;

        let mut by_athlete: Vec<Vec<usize>> = vec![Vec::new(); s_n];
        for i in 0..obs.len() {
            by_athlete[obs.athlete[i] as usize].push(i);
        }

        let mut blocks = Vec::new();
        let mut kinds = Vec::new();
        let mut touches = Vec::new();
        let mut add = |name: String, coords: Vec<usize>, kind: Kind, touch: Touch| {
            blocks.push(Block { name, coords });
            kinds.push(kind);
            touches.push(touch);
        };

        if !spec.clamp.mu {
            let mut t = Touch::default();
            for i in 0..obs.len() {
                t.push(i, &[(obs.stage[i] as u16, 1.0)]);
            }
            add("mu".into(), l.mu_range().collect(), Kind::Mu, t);
        }
        if !spec.clamp.beta {
            for s in 0..last {
                let mut t = Touch::default();
                let mut rows: Vec<(usize, f64)> = by_athlete[s].iter().map(|&i| (i, 1.0)).collect();
                rows.extend(by_athlete[last].iter().map(|&i| (i, -1.0)));
                rows.sort_by_key(|r| r.0);
                for (i, c) in rows {
                    t.push(i, &[(obs.stage[i] as u16, c)]);
                }
                add(format!("beta[{}]", s + 1), l.beta_row(s).collect(), Kind::Beta, t);
            }
        }
        if !spec.clamp.beta && s_n > 2 {
            // Every free trajectory also moves the last athlete, which couples
            // the athlete blocks; a cross-athlete block per stage lets the
            // learned covariance absorb that coupling.
            for t in 0..spec.n_stages {
                let mut tch = Touch::default();
                let all_neg: Vec<(u16, f64)> = (0..last).map(|s| (s as u16, -1.0)).collect();
                for i in 0..obs.len() {
                    if obs.stage[i] as usize != t {
                        continue;
                    }
                    let s = obs.athlete[i] as usize;
                    if s == last {
                        tch.push(i, &all_neg);
                    } else {
                        tch.push(i, &[(s as u16, 1.0)]);
                    }
                }
                let coords = (0..last).map(|s| l.beta_row(s).start + t).collect();
                add(format!("beta_stage[{}]", t + 1), coords, Kind::BetaStage(t), tch);
            }
        }
        if !spec.clamp.gamma {
            for s in 0..s_n {
                let mut t = Touch::default();
                for &i in &by_athlete[s] {
                    let c = if obs.position[i] == 0 { 1.0 } else { -1.0 };
                    t.push(i, &[(0, c)]);
                }
                let j = l.gamma + s;
                add(format!("gamma[{}]", s + 1), vec![j], Kind::Gamma, t);
            }
        }
        if !spec.clamp.omega {
            let all_neg: Vec<(u16, f64)> = (0..z_n - 1).map(|z| (z as u16, -1.0)).collect();
            for s in 0..s_n {
                let mut t = Touch::default();
                for &i in &by_athlete[s] {
                    let z = obs.race[i] as usize;
                    if z + 1 == z_n {
                        t.push(i, &all_neg);
                    } else {
                        t.push(i, &[(z as u16, 1.0)]);
                    }
                }
                add(format!("omega[{}]", s + 1), l.omega_row(s).collect(), Kind::Omega, t);
            }
        }
        if !spec.clamp.log_sigma {
            for k in SigmaKind::ALL {
                let j = l.log_sigma + k.index();
                add(format!("log_sigma_{}", k.as_str()), vec![j], Kind::LogSigma(k.index()), Touch::default());
            }
        }
        let max_touch = touches.iter().map(|t| t.records.len()).max().unwrap_or(0);

        let mut groups = Vec::new();
        if !spec.clamp.log_sigma {
            let classes = [
                (spec.clamp.beta, SigmaKind::Beta, l.beta_range()),
                (spec.clamp.gamma, SigmaKind::Gamma, l.gamma_range()),
                (spec.clamp.omega, SigmaKind::Omega, l.omega_range()),
            ];
            for (clamped, k, range) in classes {
                if !clamped && !range.is_empty() {
                    groups.push(ScaleGroup {
                        name: format!("rescale_{}", k.as_str()),
                        log_scale: l.log_sigma + k.index(),
                        members: range.collect(),
                    });
                }
            }
        }
        ModelTarget { posterior, blocks, kinds, touches, max_touch, groups }
    }

    pub(crate) fn spec(&self) -> &ModelSpec {
        &self.posterior.spec
    }

    fn layout(&self) -> &Layout {
        self.posterior.layout()
    }

    fn sigma(&self, state: &[f64], k: usize) -> f64 {
        if self.spec().clamp.log_sigma {
            1.0
        } else {
            state[self.layout().log_sigma + k].exp()
        }
    }

    /// Sum of squared prior residuals and their count for group `k`.
    fn group_ss(&self, state: &[f64], k: usize) -> (f64, usize) {
        let l = self.layout();
        let rw = |xs: &[f64]| {
            let mut prev = 0.0;
            xs.iter().fold(0.0, |acc, &x| {
                let r = x - prev;
                prev = x;
                acc + r * r
            })
        };
        let sq = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>();
        match k {
            0 => (rw(&state[l.mu_range()]), l.n_stages),
            1 => {
                let ss = (0..l.n_athletes - 1).map(|s| rw(&state[l.beta_row(s)])).sum();
                (ss, l.gamma - l.beta)
            }
            2 => (sq(&state[l.gamma_range()]), l.n_athletes),
            _ => (sq(&state[l.omega_range()]), l.log_sigma - l.omega),
        }
    }

    /// Prior part of block `b` at `values`; adds the gradient to `grad`.
    fn block_prior(&self, state: &[f64], b: usize, values: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match self.kinds[b] {
            Kind::Mu | Kind::Beta => {
                let sd = self.sigma(state, if matches!(self.kinds[b], Kind::Mu) { 0 } else { 1 });
                if let Some(g) = grad {
                    random_walk_grad(values, sd, g);
                }
                random_walk_logpdf(values, sd)
            }
            Kind::BetaStage(t) => {
                let sd = self.sigma(state, 1);
                let l = self.layout();
                let mut lp = 0.0;
                let mut row_grad = vec![0.0; l.n_stages];
                let mut grad = grad;
                for (s, &v) in values.iter().enumerate() {
                    let mut row = state[l.beta_row(s)].to_vec();
                    row[t] = v;
                    lp += random_walk_logpdf(&row, sd);
                    if let Some(g) = grad.as_deref_mut() {
                        row_grad.fill(0.0);
                        random_walk_grad(&row, sd, &mut row_grad);
                        g[s] += row_grad[t];
                    }
                }
                lp
            }
            Kind::Gamma | Kind::Omega => {
                let sd = self.sigma(state, if matches!(self.kinds[b], Kind::Gamma) { 2 } else { 3 });
                if let Some(g) = grad {
                    iid_grad(values, sd, g);
                }
                iid_logpdf(values, sd)
            }
            Kind::LogSigma(k) => {
                let v = values[0];
                let c = self.spec().sigma_prior_scale;
                let (ss, n) = self.group_ss(state, k);
                let inv_var = (-2.0 * v).exp();
                let n = n as f64;
                let lp = half_normal_log_sigma(v, c) - 0.5 * ss * inv_var - n * v - n * LN_SQRT_2PI;
                let g = half_normal_log_sigma_grad(v, c) + ss * inv_var - n;
                if let Some(out) = grad {
                    out[0] += g;
                }
                lp
            }
        }
    }
}

impl BlockTarget for ModelTarget {
    type Cache = Cache;

    fn dim(&self) -> usize {
        self.posterior.dim()
    }

    fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn log_density(&self, state: &[f64]) -> f64 {
        self.posterior.log_density(state).unwrap_or(f64::NAN)
    }

    fn init_cache(&self, state: &[f64]) -> Cache {
        let eta = self.posterior.etas(state);
        let ll = eta.iter().zip(&self.posterior.obs.hits).map(|(&e, &y)| bout_log_lik(y, e)).collect();
        Cache {
            eta,
            ll,
            staged_eta: vec![0.0; self.max_touch],
            staged_ll: vec![0.0; self.max_touch],
        }
    }

    fn current(&self, cache: &Cache, state: &[f64], b: usize, grad: Option<&mut [f64]>) -> f64 {
        let coords = &self.blocks[b].coords;
        let values: Vec<f64> = coords.iter().map(|&j| state[j]).collect();
        let touch = &self.touches[b];
        match grad {
            None => {
                let ll: f64 = touch.records.iter().map(|&i| cache.ll[i as usize]).sum();
                ll + self.block_prior(state, b, &values, None)
            }
            Some(g) => {
                g.fill(0.0);
                let hits = &self.posterior.obs.hits;
                let mut ll = 0.0;
                for (r, &i) in touch.records.iter().enumerate() {
                    let i = i as usize;
                    ll += cache.ll[i];
                    let score = bout_score(hits[i], cache.eta[i]);
                    for &(j, c) in touch.row(r) {
                        g[j as usize] += c * score;
                    }
                }
                ll + self.block_prior(state, b, &values, Some(g))
            }
        }
    }

    fn propose(&self, cache: &mut Cache, state: &[f64], b: usize, values: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let coords = &self.blocks[b].coords;
        let delta: Vec<f64> = coords.iter().zip(values).map(|(&j, v)| v - state[j]).collect();
        let touch = &self.touches[b];
        let hits = &self.posterior.obs.hits;
        let mut ll = 0.0;
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.fill(0.0);
        }
        for (r, &i) in touch.records.iter().enumerate() {
            let i = i as usize;
            let row = touch.row(r);
            let eta = cache.eta[i] + row.iter().map(|&(j, c)| c * delta[j as usize]).sum::<f64>();
            let l = bout_log_lik(hits[i], eta);
            cache.staged_eta[r] = eta;
            cache.staged_ll[r] = l;
            ll += l;
            if let Some(g) = g.as_deref_mut() {
                let score = bout_score(hits[i], eta);
                for &(j, c) in row {
                    g[j as usize] += c * score;
                }
            }
        }
        ll + self.block_prior(state, b, values, g)
    }

    fn curvature(&self, cache: &Cache, state: &[f64], b: usize) -> Option<Vec<f64>> {
        let d = self.blocks[b].coords.len();
        let mut p = vec![0.0; d * d];
        let touch = &self.touches[b];
        for (r, &i) in touch.records.iter().enumerate() {
            let q = inv_logit(cache.eta[i as usize]);
            let w = SHOTS * q * (1.0 - q);
            let row = touch.row(r);
            for &(j, cj) in row {
                for &(k, ck) in row {
                    p[j as usize * d + k as usize] += w * cj * ck;
                }
            }
        }
        let rw_precision = |p: &mut [f64], sd: f64| {
            let inv = 1.0 / (sd * sd);
            for t in 0..d {
                p[t * d + t] += inv;
                if t > 0 {
                    p[(t - 1) * d + t - 1] += inv;
                    p[t * d + t - 1] -= inv;
                    p[(t - 1) * d + t] -= inv;
                }
            }
        };
        match self.kinds[b] {
            Kind::Mu => rw_precision(&mut p, self.sigma(state, 0)),
            Kind::Beta => rw_precision(&mut p, self.sigma(state, 1)),
            Kind::BetaStage(t) => {
                let inv = self.sigma(state, 1).powi(-2);
                let k = if t + 1 < self.layout().n_stages { 2.0 } else { 1.0 };
                for s in 0..d {
                    p[s * d + s] += k * inv;
                }
            }
            Kind::Gamma | Kind::Omega => {
                let k = if matches!(self.kinds[b], Kind::Gamma) { 2 } else { 3 };
                let inv = self.sigma(state, k).powi(-2);
                for s in 0..d {
                    p[s * d + s] += inv;
                }
            }
            Kind::LogSigma(k) => {
                let v = state[self.blocks[b].coords[0]];
                let (ss, _) = self.group_ss(state, k);
                let c = self.spec().sigma_prior_scale;
                p[0] = 2.0 * ss * (-2.0 * v).exp() + 2.0 * (2.0 * v).exp() / (c * c);
            }
        }
        Some(p)
    }

    fn scale_groups(&self) -> &[ScaleGroup] {
        &self.groups
    }

    fn accept(&self, cache: &mut Cache, b: usize) {
        for (r, &i) in self.touches[b].records.iter().enumerate() {
            cache.eta[i as usize] = cache.staged_eta[r];
            cache.ll[i as usize] = cache.staged_ll[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Block conditionals must differ from the joint density by a constant
    /// that does not depend on the block's values.
    #[test]
    fn conditionals_match_joint_differences() {
        let (d, _) = generate_synthetic(&SynthConfig::new(4, 3, 2)).unwrap();
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let target = ModelTarget::new(Posterior::new(spec.clone(), &d).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let state = spec.sample_prior(&mut rng).into_coords();
        let mut cache = target.init_cache(&state);
        for b in 0..target.blocks().len() {
            let coords = target.blocks()[b].coords.clone();
            let values: Vec<f64> = coords.iter().map(|&j| state[j] + 0.3).collect();
            let mut moved = state.clone();
            for (k, &j) in coords.iter().enumerate() {
                moved[j] = values[k];
            }
            let joint = target.log_density(&moved) - target.log_density(&state);
            let cond = target.propose(&mut cache, &state, b, &values, None) - target.current(&cache, &state, b, None);
            assert!((joint - cond).abs() < 1e-9, "block {}: {joint} vs {cond}", target.blocks()[b].name);
        }
    }

    #[test]
    fn block_gradients_match_full_gradient() {
        let (d, _) = generate_synthetic(&SynthConfig::new(3, 4, 8)).unwrap();
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let posterior = Posterior::new(spec.clone(), &d).unwrap();
        let target = ModelTarget::new(posterior.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let state = spec.sample_prior(&mut rng).into_coords();
        let full = posterior.gradient(&state).unwrap();
        let mut cache = target.init_cache(&state);
        for b in 0..target.blocks().len() {
            let coords = target.blocks()[b].coords.clone();
            let values: Vec<f64> = coords.iter().map(|&j| state[j]).collect();
            let mut g1 = vec![0.0; coords.len()];
            let mut g2 = vec![0.0; coords.len()];
            target.current(&cache, &state, b, Some(&mut g1));
            target.propose(&mut cache, &state, b, &values, Some(&mut g2));
            for (k, &j) in coords.iter().enumerate() {
                assert!((g1[k] - full[j]).abs() < 1e-9 * (1.0 + full[j].abs()));
                assert!((g2[k] - full[j]).abs() < 1e-9 * (1.0 + full[j].abs()));
            }
        }
    }

    #[test]
    fn curvature_matches_finite_differences() {
        let (d, _) = generate_synthetic(&SynthConfig::new(4, 3, 6)).unwrap();
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let target = ModelTarget::new(Posterior::new(spec.clone(), &d).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let state = spec.sample_prior(&mut rng).into_coords();
        let mut cache = target.init_cache(&state);
        let h = 1e-4;
        for b in 0..target.blocks().len() {
            let coords = target.blocks()[b].coords.clone();
            let dn = coords.len();
            let p = target.curvature(&cache, &state, b).unwrap();
            let base: Vec<f64> = coords.iter().map(|&j| state[j]).collect();
            for j in 0..dn {
                let grad_at = |cache: &mut Cache, sign: f64| {
                    let mut v = base.clone();
                    v[j] += sign * h;
                    let mut g = vec![0.0; dn];
                    target.propose(cache, &state, b, &v, Some(&mut g));
                    g
                };
                let gp = grad_at(&mut cache, 1.0);
                let gm = grad_at(&mut cache, -1.0);
                for k in 0..dn {
                    let fd = -(gp[k] - gm[k]) / (2.0 * h);
                    let an = p[k * dn + j];
                    assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()), "{} ({j},{k}): {fd} vs {an}", target.blocks()[b].name);
                }
            }
        }
    }

    #[test]
    fn accept_updates_cache() {
        let (d, _) = generate_synthetic(&SynthConfig::new(3, 2, 3)).unwrap();
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let target = ModelTarget::new(Posterior::new(spec.clone(), &d).unwrap());
        let mut state = vec![0.0; spec.dim()];
        let mut cache = target.init_cache(&state);
        let b = 1;
        let coords = target.blocks()[b].coords.clone();
        let values = vec![0.7; coords.len()];
        target.propose(&mut cache, &state, b, &values, None);
        for &j in &coords {
            state[j] = 0.7;
        }
        target.accept(&mut cache, b);
        let fresh = target.init_cache(&state);
        for (a, e) in cache.eta.iter().zip(&fresh.eta) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn clamped_blocks_are_skipped() {
        let (d, _) = generate_synthetic(&SynthConfig::new(2, 1, 3)).unwrap();
        let spec = ModelSpec::for_dataset(&d).unwrap().with_clamp(crate::model::Clamp::all_but_mu());
        let target = ModelTarget::new(Posterior::new(spec, &d).unwrap());
        assert_eq!(target.blocks().len(), 1);
        assert_eq!(target.blocks()[0].name, "mu");
    }
}
