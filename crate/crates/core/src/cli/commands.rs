use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::args::*;
use super::files::{output_dir, read_bytes, sha256_hex, slug, write_atomic, write_json};
use super::{Manifest, Outcome};
use crate::data::{generate_synthetic, parse_sessions, validate, write_sessions, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::explore::{
    accuracy_summary, cluster_athletes_with, favorite_race_counts, load_published_table, load_ranks,
    rank_correlations, stage_deviation_matrix, write_correlations_csv, write_deviation_csv, write_favorites_csv,
    write_labels_csv, write_merges_csv, write_summary_csv, ClusterOptions,
};
use crate::model::ModelSpec;
use crate::predict::{
    self, beta_trajectories, mu_summary, position_effects, predictive_draws, race_effects, replicate_dataset,
    write_cumulative_csv, write_mu_csv, write_odds_ratio_csv, write_race_position_csv, write_stage_totals_csv,
    OddsRatioSummary, PpcOptions, PredictiveSummary,
};
use crate::sampler::{
    export_draws, export_draws_csv, import_draws, import_draws_csv, run_chains, summarize, PosteriorSamples,
    SamplerConfig, SIGMA_NOTE,
};
use crate::stats;
use crate::validate::{
    gradient_check, oracle_problem, quadrature_posterior, random_dataset, season_design, SamplerFitter, SbcConfig,
};

const SESSIONS: &str = "sessions.csv";
const DRAWS_BIN: &str = "draws.bin";
const DRAWS_CSV: &str = "draws.csv";
const DRAWS_CSV_MANIFEST: &str = "draws.manifest.json";

fn required<'a, T>(x: &'a Option<T>, flag: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn read_dataset(path: &Path) -> Result<(Dataset, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let d = parse_sessions(bytes.as_slice())?;
    Ok((d, bytes))
}

fn csv_file(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<String> {
    write_atomic(dir, name, body)?;
    Ok(name.to_string())
}

fn sampler_config(a: &SamplerArgs) -> Result<SamplerConfig> {
    let d = SamplerConfig::default();
    let cfg = SamplerConfig {
        n_chains: a.chains.unwrap_or(d.n_chains),
        burn_in: a.burnin.unwrap_or(d.burn_in),
        kept_iterations: a.keep.unwrap_or(d.kept_iterations),
        thin: a.thin.unwrap_or(d.thin),
        seed: a.seed.unwrap_or(d.seed),
        adapt_window: a.adapt.or(d.adapt_window),
        proposal_mode: a.proposal.unwrap_or(d.proposal_mode),
    };
    cfg.check()?;
    Ok(cfg)
}

pub fn ingest(a: IngestArgs) -> Result<Outcome> {
    let data = required(&a.data, "data")?;
    let out = output_dir(&a.common.out)?;
    let bytes = read_bytes(data)?;
    let mut m = Manifest::new("ingest", &a);
    m.input("data", data, &bytes);
    m.write(&out)?;
    let d = parse_sessions(bytes.as_slice())?;
    let report = validate(&d);
    write_atomic(&out, SESSIONS, |w| Ok(write_sessions(&d, w)?))?;
    write_json(&out, "validation.json", &report)?;
    println!(
        "{} bouts, {} athletes, {} stages, {} shots, {} hits",
        d.len(),
        d.n_athletes(),
        d.n_stages(),
        d.total_shots(),
        d.total_hits()
    );
    for c in report.checks.iter().filter(|c| c.status == crate::data::CheckStatus::Warn) {
        eprintln!("warning: {}: {}", c.name, c.detail);
    }
    Ok(Outcome::Done)
}

pub fn explore(a: ExploreArgs) -> Result<Outcome> {
    if a.data.is_none() && a.table.is_none() {
        return Err(Error::Config("explore needs --data or --table".into()));
    }
    let out = output_dir(&a.common.out)?;
    let k = a.clusters.unwrap_or(3);
    let mut m = Manifest::new("explore", &a);
    let data = match &a.data {
        Some(p) => {
            let (d, bytes) = read_dataset(p)?;
            m.input("data", p, &bytes);
            Some(d)
        }
        None => None,
    };
    let table_bytes = a.table.as_ref().map(|p| read_bytes(p)).transpose()?;
    if let (Some(p), Some(b)) = (&a.table, &table_bytes) {
        m.input("table", p, b);
    }
    let ranks_bytes = a.ranks.as_ref().map(|p| read_bytes(p)).transpose()?;
    if let (Some(p), Some(b)) = (&a.ranks, &ranks_bytes) {
        m.input("ranks", p, b);
    }
    m.write(&out)?;

    let table = match (&table_bytes, &data) {
        (Some(b), _) => load_published_table(b.as_slice())?,
        (None, Some(d)) => accuracy_summary(d)?,
        (None, None) => unreachable!("checked above"),
    };
    write_atomic(&out, "summary.csv", |w| write_summary_csv(&table, w))?;
    let fav = favorite_race_counts(&table);
    write_atomic(&out, "favorites.csv", |w| write_favorites_csv(&fav, w))?;
    if let Some(d) = &data {
        let dev = stage_deviation_matrix(d)?;
        write_atomic(&out, "deviation.csv", |w| write_deviation_csv(&dev, w))?;
    }
    let opts = ClusterOptions {
        standardize: a.standardize.unwrap_or(false),
    };
    let clusters = cluster_athletes_with(&table, k, opts)?;
    write_atomic(&out, "merges.csv", |w| write_merges_csv(&clusters, w))?;
    write_atomic(&out, "clusters.csv", |w| write_labels_csv(&clusters, w))?;
    if let Some(b) = &ranks_bytes {
        let ranks = load_ranks(b.as_slice())?;
        let rho = rank_correlations(&table, &ranks)?;
        write_atomic(&out, "correlations.csv", |w| write_correlations_csv(&rho, w))?;
        for r in &rho {
            println!("spearman {:<12} {:+.4} (n = {})", r.feature.name(), r.rho, r.n);
        }
    }
    let o = &table.overall;
    println!(
        "overall {} ({} of {} shots)",
        o.overall.map(|r| r.percent()).unwrap_or_default(),
        o.total_hits,
        o.total_shots
    );
    if !fav.ties.is_empty() {
        eprintln!("note: favorite ties resolved by rule for {}", fav.ties.join(", "));
    }
    Ok(Outcome::Done)
}

pub fn fit(a: FitArgs) -> Result<Outcome> {
    let data = required(&a.data, "data")?;
    let out = output_dir(&a.common.out)?;
    let cfg = sampler_config(&a.sampler)?;
    let (d, bytes) = read_dataset(data)?;
    let mut spec = ModelSpec::for_dataset(&d)?;
    if let Some(c) = a.sigma_scale {
        spec = spec.with_sigma_prior_scale(c);
        spec.check()?;
    }
    let mut m = Manifest::new("fit", &a);
    m.input("data", data, &bytes);
    m.seeds.insert("sampler", cfg.seed);
    m.extra("model", &spec)?;
    m.extra("sampler", &cfg)?;
    m.extra("sigma_note", SIGMA_NOTE)?;
    m.write(&out)?;

    let started = Instant::now();
    let samples = run_chains(&spec, &d, &cfg)?;
    write_atomic(&out, SESSIONS, |w| Ok(w.write_all(&bytes)?))?;
    match a.format.unwrap_or_default() {
        DrawsFormat::Binary => {
            write_atomic(&out, DRAWS_BIN, |w| export_draws(&samples, w))?;
        }
        DrawsFormat::Csv => {
            let mut side = Vec::new();
            write_atomic(&out, DRAWS_CSV, |w| export_draws_csv(&samples, w, &mut side))?;
            write_atomic(&out, DRAWS_CSV_MANIFEST, |w| Ok(w.write_all(&side)?))?;
        }
    }
    let low: Vec<_> = samples
        .blocks
        .iter()
        .filter(|b| b.acceptance.iter().any(|&r| !(0.1..=0.7).contains(&r)))
        .map(|b| b.name.clone())
        .collect();
    write_json(
        &out,
        "fit.json",
        &json!({
            "n_chains": samples.n_chains(),
            "draws_per_chain": samples.n_draws(),
            "total_draws": samples.n_total(),
            "dimension": samples.dim(),
            "blocks": samples.blocks,
        }),
    )?;
    eprintln!(
        "{} chains x {} draws ({} total, dimension {}) in {:.1}s",
        samples.n_chains(),
        samples.n_draws(),
        samples.n_total(),
        samples.dim(),
        started.elapsed().as_secs_f64()
    );
    if !low.is_empty() {
        eprintln!("warning: acceptance outside [0.1, 0.7] for {}", low.join(", "));
    }
    Ok(Outcome::Done)
}

struct LoadedFit {
    samples: PosteriorSamples,
    data: Dataset,
    draws_path: PathBuf,
    draws_bytes: Vec<u8>,
    sessions_bytes: Vec<u8>,
}

fn load_fit(dir: &Path) -> Result<LoadedFit> {
    let bin = dir.join(DRAWS_BIN);
    let (samples, draws_path, draws_bytes) = if bin.exists() {
        let bytes = read_bytes(&bin)?;
        (import_draws(bytes.as_slice())?, bin, bytes)
    } else {
        let csv = dir.join(DRAWS_CSV);
        let bytes = read_bytes(&csv)?;
        let side = BufReader::new(File::open(dir.join(DRAWS_CSV_MANIFEST))?);
        (import_draws_csv(bytes.as_slice(), side)?, csv, bytes)
    };
    let sessions_bytes = read_bytes(&dir.join(SESSIONS))?;
    let data = parse_sessions(sessions_bytes.as_slice())?;
    if data.source_digest() != samples.source_digest {
        return Err(Error::Checksum {
            expected: samples.source_digest.clone(),
            found: data.source_digest().to_string(),
        });
    }
    Ok(LoadedFit {
        samples,
        data,
        draws_path,
        draws_bytes,
        sessions_bytes,
    })
}

fn fit_dir_and_out(fit: &Option<PathBuf>, out: &Option<PathBuf>, sub: &str) -> Result<(PathBuf, PathBuf)> {
    let fit = required(fit, "fit")?.clone();
    let out = output_dir(&Some(out.clone().unwrap_or_else(|| fit.join(sub))))?;
    Ok((fit, out))
}

pub fn diagnose(a: DiagnoseArgs) -> Result<Outcome> {
    let (fit, out) = fit_dir_and_out(&a.fit, &a.common.out, "diagnose")?;
    let f = load_fit(&fit)?;
    let mut m = Manifest::new("diagnose", &a);
    m.input("draws", &f.draws_path, &f.draws_bytes);
    m.write(&out)?;
    let rows = summarize(&f.samples)?;
    write_atomic(&out, "diagnostics.csv", |w| {
        writeln!(w, "param,mean,sd,q025,q975,rhat,ess")?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
        for r in &rows {
            writeln!(
                w,
                "\"{}\",{:?},{:?},{:?},{:?},{},{}",
                r.name,
                r.mean,
                r.sd,
                r.q025,
                r.q975,
                opt(r.rhat),
                opt(r.ess)
            )?;
        }
        Ok(())
    })?;
    let worst_rhat = rows.iter().filter_map(|r| r.rhat.map(|v| (v, &r.name))).max_by(|a, b| a.0.total_cmp(&b.0));
    let worst_ess = rows.iter().filter_map(|r| r.ess.map(|v| (v, &r.name))).min_by(|a, b| a.0.total_cmp(&b.0));
    let max_rhat = worst_rhat.map(|w| w.0);
    let min_ess = worst_ess.map(|w| w.0);
    let report = json!({
        "n_chains": f.samples.n_chains(),
        "draws_per_chain": f.samples.n_draws(),
        "max_rhat": max_rhat,
        "max_rhat_param": worst_rhat.map(|w| w.1),
        "min_ess": min_ess,
        "min_ess_param": worst_ess.map(|w| w.1),
        "rhat_below_1_05": max_rhat.map(|v| v < 1.05),
        "ess_above_100": min_ess.map(|v| v > 100.0),
        "blocks": f.samples.blocks,
    });
    write_json(&out, "diagnostics.json", &report)?;
    println!(
        "max split-rhat {} ({}), min ESS {} ({})",
        max_rhat.map(|v| format!("{v:.4}")).unwrap_or("-".into()),
        worst_rhat.map(|w| w.1.as_str()).unwrap_or("-"),
        min_ess.map(|v| format!("{v:.0}")).unwrap_or("-".into()),
        worst_ess.map(|w| w.1.as_str()).unwrap_or("-"),
    );
    Ok(Outcome::Done)
}

pub fn predict(a: PredictArgs) -> Result<Outcome> {
    let (fit, out) = fit_dir_and_out(&a.fit, &a.common.out, "predict")?;
    let f = load_fit(&fit)?;
    let opts = PpcOptions {
        n_rep: a.n_rep,
        seed: a.seed.unwrap_or(1),
    };
    let mut m = Manifest::new("predict", &a);
    m.input("draws", &f.draws_path, &f.draws_bytes);
    m.input("data", &fit.join(SESSIONS), &f.sessions_bytes);
    m.seeds.insert("predictive", opts.seed);
    let future = match &a.future_schedule {
        Some(p) => {
            let (d, bytes) = read_dataset(p)?;
            m.input("future_schedule", p, &bytes);
            Some(d)
        }
        None => None,
    };
    m.write(&out)?;

    let (s, d) = (&f.samples, &f.data);
    let names = d.athletes();
    let mut produced = Vec::new();

    let mu = mu_summary(s, Some(d))?;
    produced.push(csv_file(&out, "mu_summary.csv", |w| write_mu_csv(&mu, w))?);

    let beta = beta_trajectories(s)?;
    let rows: Vec<(Vec<String>, &OddsRatioSummary)> = beta
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(t, c)| (vec![names[i].clone(), (t + 1).to_string()], c)))
        .collect();
    produced.push(csv_file(&out, "beta_or.csv", |w| write_odds_ratio_csv("athlete,stage", &rows, w))?);

    let gamma = position_effects(s)?;
    let positions = crate::data::Position::ALL;
    let rows: Vec<(Vec<String>, &OddsRatioSummary)> = gamma
        .iter()
        .enumerate()
        .flat_map(|(i, pair)| {
            pair.iter()
                .zip(positions)
                .map(move |(c, x)| (vec![names[i].clone(), x.as_str().to_string()], c))
        })
        .collect();
    produced.push(csv_file(&out, "gamma_or.csv", |w| write_odds_ratio_csv("athlete,position", &rows, w))?);

    let omega = race_effects(s)?;
    let races = crate::data::RaceType::ALL;
    let rows: Vec<(Vec<String>, &OddsRatioSummary)> = omega
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .zip(races)
                .map(move |(c, z)| (vec![names[i].clone(), z.as_str().to_string()], c))
        })
        .collect();
    produced.push(csv_file(&out, "omega_or.csv", |w| write_odds_ratio_csv("athlete,race_type", &rows, w))?);

    let reps = replicate_dataset(s, d, &opts)?;
    let totals = predict::stage_totals(&reps, d)?;
    produced.push(csv_file(&out, "ppc_stage_totals.csv", |w| write_stage_totals_csv(&totals, w))?);
    let cells = predict::race_position(&reps, d)?;
    produced.push(csv_file(&out, "ppc_race_position.csv", |w| write_race_position_csv(&cells, w))?);

    let athletes: Vec<String> = if a.athlete.is_empty() {
        names.iter().filter(|n| d.records().iter().any(|r| &r.athlete_id == *n)).cloned().collect()
    } else {
        a.athlete.clone()
    };
    for name in &athletes {
        let path = predict::cumulative(&reps, d, name)?;
        let file = format!("cumulative_{}.csv", slug(name));
        produced.push(csv_file(&out, &file, |w| write_cumulative_csv(&path, w))?);
    }

    if let Some(fd) = &future {
        let n_rep = opts.n_rep.unwrap_or(s.n_total());
        let draws = predictive_draws(s, fd.records(), names, n_rep, opts.seed)?;
        let summaries: Vec<PredictiveSummary> = (0..draws.n_templates())
            .map(|j| PredictiveSummary::from_draws(draws.template(j).iter().map(|&h| h as f64).collect(), None))
            .collect::<Result<_>>()?;
        produced.push(csv_file(&out, "future_predictions.csv", |w| {
            writeln!(w, "athlete,stage,race_type,position,race_seq,bout_seq,n_draws,mean,median,lower,upper")?;
            for (r, p) in fd.records().iter().zip(&summaries) {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{:?},{:?},{:?},{:?}",
                    r.athlete_id,
                    r.stage,
                    r.race_type.as_str(),
                    r.position.as_str(),
                    r.race_seq,
                    r.bout_seq,
                    p.n_draws,
                    p.mean,
                    p.median,
                    p.lower,
                    p.upper
                )?;
            }
            Ok(())
        })?);
    }

    let covered = totals.iter().filter(|t| t.summary.covers_observed() == Some(true)).count();
    let cells_covered = cells.iter().filter(|c| c.summary.covers_observed() == Some(true)).count();
    write_json(
        &out,
        "report.json",
        &json!({
            "draws_sha256": sha256_hex(&f.draws_bytes),
            "source_digest": s.source_digest,
            "seed": opts.seed,
            "n_rep": reps.n_rep(),
            "interval": [predict::LOWER_Q, predict::UPPER_Q],
            "stage_totals_covered": [covered, totals.len()],
            "race_position_covered": [cells_covered, cells.len()],
            "files": produced,
        }),
    )?;
    println!(
        "observed stage totals inside 95% intervals: {covered} of {}; race/position cells: {cells_covered} of {}",
        totals.len(),
        cells.len()
    );
    Ok(Outcome::Done)
}

pub fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let out = output_dir(&a.common.out)?;
    let mut cfg = SynthConfig::new(a.athletes.unwrap_or(30), a.stages.unwrap_or(11), a.seed.unwrap_or(1));
    cfg.participation_rate = a.participation.unwrap_or(1.0);
    cfg.check()?;
    let mut m = Manifest::new("simulate", &a);
    m.seeds.insert("simulation", cfg.seed);
    m.extra("synth", &cfg)?;
    m.write(&out)?;
    let (d, truth) = generate_synthetic(&cfg)?;
    if d.is_empty() {
        eprintln!("warning: the simulated season has no bouts");
        return Err(Error::Empty("no athlete started any race".into()));
    }
    write_atomic(&out, SESSIONS, |w| Ok(write_sessions(&d, w)?))?;
    write_json(&out, "true_params.json", &truth)?;
    println!("{} bouts across {} athletes and {} stages", d.len(), d.n_athletes(), d.n_stages());
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct OracleReport {
    pass: bool,
    quadrature_mean: f64,
    quadrature_sd: f64,
    sampler_mean: f64,
    sampler_sd: f64,
    ess: f64,
    mcse: f64,
    mean_error_in_mcse: f64,
    sd_relative_error: f64,
}

pub fn oracle(a: OracleArgs) -> Result<Outcome> {
    let out = output_dir(&a.common.out)?;
    let cfg = sampler_config(&a.sampler)?;
    let mut m = Manifest::new("validate oracle", &a);
    m.seeds.insert("sampler", cfg.seed);
    m.write(&out)?;
    let (spec, d) = oracle_problem()?;
    let q = quadrature_posterior(&spec, &d)?;
    let samples = run_chains(&spec, &d, &cfg)?;
    let draws = samples.pooled(0);
    let ess = crate::sampler::ess(&samples, 0)?;
    let (mean, sd) = (stats::mean(&draws), stats::variance(&draws).sqrt());
    let mcse = sd / ess.sqrt();
    let r = OracleReport {
        quadrature_mean: q.mean,
        quadrature_sd: q.sd,
        sampler_mean: mean,
        sampler_sd: sd,
        ess,
        mcse,
        mean_error_in_mcse: (mean - q.mean).abs() / mcse,
        sd_relative_error: (sd / q.sd - 1.0).abs(),
        pass: (mean - q.mean).abs() <= 3.0 * mcse && (sd / q.sd - 1.0).abs() <= 0.1,
    };
    write_json(&out, "oracle.json", &r)?;
    println!(
        "quadrature mean {:.5} sd {:.5}; sampler mean {:.5} sd {:.5} (ESS {:.0}); |error| = {:.2} MCSE, sd off by {:.1}%",
        q.mean,
        q.sd,
        mean,
        sd,
        ess,
        r.mean_error_in_mcse,
        100.0 * r.sd_relative_error
    );
    Ok(if r.pass {
        Outcome::Done
    } else {
        Outcome::Failed("sampler disagrees with quadrature".into())
    })
}

pub const GRADCHECK_SHAPES: [(usize, usize, usize); 3] = [(2, 1, 2), (3, 4, 3), (30, 11, 4)];

pub fn gradcheck(a: GradcheckArgs) -> Result<Outcome> {
    let out = output_dir(&a.common.out)?;
    let (points, seed) = (a.points.unwrap_or(100), a.seed.unwrap_or(1));
    let mut m = Manifest::new("validate gradcheck", &a);
    m.seeds.insert("points", seed);
    m.write(&out)?;
    let mut shapes = Vec::new();
    let mut pass = true;
    for (s, t, z) in GRADCHECK_SHAPES {
        let d = if (s, t, z) == (30, 11, 4) {
            season_design()?
        } else {
            random_dataset(s, t, z, seed)?
        };
        let spec = ModelSpec::new(s, t, z)?;
        let r = gradient_check(&spec, &d, points, seed)?;
        let ok = r.max_rel_error <= 1e-6;
        pass &= ok;
        println!(
            "shape ({s},{t},{z}): max relative error {:.3e} at {} ({})",
            r.max_rel_error,
            r.argmax_name.as_deref().unwrap_or("?"),
            if ok { "pass" } else { "FAIL" }
        );
        shapes.push(json!({"shape": [s, t, z], "pass": ok, "report": r}));
    }
    write_json(&out, "gradcheck.json", &json!({"pass": pass, "tolerance": 1e-6, "shapes": shapes}))?;
    Ok(if pass {
        Outcome::Done
    } else {
        Outcome::Failed("gradient disagrees with finite differences".into())
    })
}

pub fn sbc(a: SbcArgs) -> Result<Outcome> {
    let out = output_dir(&a.common.out)?;
    let sampler = sampler_config(&a.sampler)?;
    let synth = SynthConfig::new(a.athletes.unwrap_or(5), a.stages.unwrap_or(4), 0);
    let spec = synth.model_spec();
    let cfg = SbcConfig {
        replications: a.replications.unwrap_or(100),
        seed: sampler.seed,
        ..SbcConfig::default()
    };
    let mut m = Manifest::new("validate sbc", &a);
    m.seeds.insert("sbc", cfg.seed);
    m.extra("sbc", &cfg)?;
    m.write(&out)?;
    let started = Instant::now();
    let report = crate::validate::sbc_with(&spec, &synth, &cfg, &SamplerFitter { config: sampler })?;
    let coverage = report.coverage_90_fraction(0.84, 0.96);
    let pass = coverage >= 0.95 && !report.any_rejected();
    write_json(
        &out,
        "sbc.json",
        &json!({"pass": pass, "coverage_90_in_range_fraction": coverage, "report": report}),
    )?;
    write_atomic(&out, "sbc_ranks.csv", |w| {
        writeln!(w, "param,replication,rank")?;
        for p in &report.parameters {
            for (r, k) in p.ranks.iter().enumerate() {
                writeln!(w, "\"{}\",{},{}", p.name, r + 1, k)?;
            }
        }
        Ok(())
    })?;
    println!(
        "{} of {} replications in {:.0}s; 90% coverage in [0.84, 0.96] for {:.1}% of {} parameters; uniformity rejected for {}",
        report.succeeded,
        report.replications,
        started.elapsed().as_secs_f64(),
        100.0 * coverage,
        report.parameters.len(),
        report.parameters.iter().filter(|p| p.rejected).count()
    );
    Ok(if pass {
        Outcome::Done
    } else {
        Outcome::Failed("calibration checks did not pass".into())
    })
}
