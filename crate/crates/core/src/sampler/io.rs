//! Draws files.
//!
//! Binary layout:
//!
//! ```text
//! b"BBDRAWS1"
//! u32 LE        manifest length
//! [u8]          manifest JSON
//! f64 LE        draws, chain-major, then iteration, then parameter
//! [u8; 32]      SHA-256 of all preceding bytes
//! ```
//!
//! CSV mode writes `chain,iter,param,value` rows (1-based chain and
//! iteration, quoted parameter names) and a separate manifest carrying the CSV's SHA-256.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BlockStats, PosteriorSamples, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

const MAGIC: &[u8; 8] = b"BBDRAWS1";
const FORMAT: &str = "biathlon-bayes draws v1";

/// How the four scale parameters are to be read.
pub const SIGMA_NOTE: &str = "the second argument of every normal prior is a standard deviation; \
log_sigma_* are natural logs of those standard deviations";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawsManifest {
    pub format: String,
    pub spec: ModelSpec,
    pub config: SamplerConfig,
    pub seed: u64,
    pub source_digest: String,
    pub param_names: Vec<String>,
    pub n_chains: usize,
    pub n_draws: usize,
    pub dim: usize,
    pub blocks: Vec<BlockStats>,
    pub sigma_note: String,
    /// SHA-256 of the companion CSV file, in CSV mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_sha256: Option<String>,
}

impl DrawsManifest {
    pub fn for_samples(s: &PosteriorSamples) -> Self {
        DrawsManifest {
            format: FORMAT.into(),
            spec: s.spec.clone(),
            config: s.config.clone(),
            seed: s.config.seed,
            source_digest: s.source_digest.clone(),
            param_names: s.param_names.clone(),
            n_chains: s.n_chains(),
            n_draws: s.n_draws(),
            dim: s.dim(),
            blocks: s.blocks.clone(),
            sigma_note: SIGMA_NOTE.into(),
            csv_sha256: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Format(format!("unknown draws format {:?}", self.format)));
        }
        if self.dim != self.spec.dim() || self.param_names.len() != self.dim {
            return Err(Error::Dimension(format!(
                "manifest dim {} disagrees with spec dim {} or {} names",
                self.dim,
                self.spec.dim(),
                self.param_names.len()
            )));
        }
        if self.param_names != self.spec.param_names() {
            return Err(Error::Format("parameter names do not match the model spec".into()));
        }
        Ok(())
    }

    fn into_samples(self, draws: Vec<f64>) -> Result<PosteriorSamples> {
        if draws.len() != self.n_chains * self.n_draws * self.dim {
            return Err(Error::Dimension(format!(
                "{} values, manifest expects {} x {} x {}",
                draws.len(),
                self.n_chains,
                self.n_draws,
                self.dim
            )));
        }
        PosteriorSamples::new(self.spec, self.config, self.source_digest, self.blocks, self.n_chains, draws)
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Writes the binary draws file, streaming values row by row.
pub fn export_draws<W: Write>(samples: &PosteriorSamples, sink: W) -> Result<()> {
    let manifest = serde_json::to_vec(&DrawsManifest::for_samples(samples))?;
    let mut w = HashingWriter { inner: sink, hasher: Sha256::new() };
    w.write_all(MAGIC)?;
    w.write_all(&(manifest.len() as u32).to_le_bytes())?;
    w.write_all(&manifest)?;
    for chunk in samples.raw().chunks(samples.dim().max(1)) {
        let mut buf = Vec::with_capacity(chunk.len() * 8);
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    let digest = w.hasher.finalize();
    w.inner.write_all(&digest)?;
    w.inner.flush()?;
    Ok(())
}

pub fn import_draws<R: Read>(mut source: R) -> Result<PosteriorSamples> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(Error::Checksum {
            expected: "a complete draws file".into(),
            found: format!("{} bytes", bytes.len()),
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 32);
    let found = Sha256::digest(body);
    if found.as_slice() != tail {
        return Err(Error::Checksum {
            expected: hex::encode(tail),
            found: hex::encode(found),
        });
    }
    if &body[..8] != MAGIC {
        return Err(Error::Format("not a draws file".into()));
    }
    let len = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
    let manifest_end = 12 + len;
    if manifest_end > body.len() || (body.len() - manifest_end) % 8 != 0 {
        return Err(Error::Format("bad manifest length".into()));
    }
    let manifest: DrawsManifest = serde_json::from_slice(&body[12..manifest_end])?;
    manifest.check()?;
    let draws = body[manifest_end..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    manifest.into_samples(draws)
}

/// Writes draws as CSV and the manifest (with the CSV digest) separately.
pub fn export_draws_csv<W: Write, M: Write>(samples: &PosteriorSamples, csv: W, mut manifest_sink: M) -> Result<()> {
    let mut w = HashingWriter { inner: csv, hasher: Sha256::new() };
    writeln!(w, "chain,iter,param,value")?;
    for c in 0..samples.n_chains() {
        for i in 0..samples.n_draws() {
            let row = samples.row(c, i);
            let mut line = String::new();
            for (name, v) in samples.param_names.iter().zip(row) {
                line.push_str(&format!("{},{},\"{}\",{:?}\n", c + 1, i + 1, name, v));
            }
            w.write_all(line.as_bytes())?;
        }
    }
    w.flush()?;
    let mut manifest = DrawsManifest::for_samples(samples);
    manifest.csv_sha256 = Some(hex::encode(w.hasher.finalize()));
    serde_json::to_writer_pretty(&mut manifest_sink, &manifest)?;
    manifest_sink.write_all(b"\n")?;
    Ok(())
}

pub fn import_draws_csv<R: Read, M: Read>(csv: R, manifest: M) -> Result<PosteriorSamples> {
    let manifest: DrawsManifest = serde_json::from_reader(manifest)?;
    manifest.check()?;
    let mut bytes = Vec::new();
    BufReader::new(csv).read_to_end(&mut bytes)?;
    let found = hex::encode(Sha256::digest(&bytes));
    match &manifest.csv_sha256 {
        Some(expected) if *expected == found => {}
        Some(expected) => {
            return Err(Error::Checksum {
                expected: expected.clone(),
                found,
            })
        }
        None => return Err(Error::Format("manifest has no CSV digest".into())),
    }
    let (dim, n_draws) = (manifest.dim, manifest.n_draws);
    let mut draws = vec![f64::NAN; manifest.n_chains * n_draws * dim];
    let mut seen = 0usize;
    for (k, line) in bytes.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line != "chain,iter,param,value" {
                return Err(Error::parse(1, "bad draws CSV header"));
            }
            continue;
        }
        // parameter names contain commas and are quoted
        let mut head = line.splitn(3, ',');
        let (c, i, rest) = (head.next(), head.next(), head.next());
        let Some((name, value)) = rest.and_then(|r| r.rsplit_once(',')) else {
            return Err(Error::parse(k + 1, "expected 4 fields"));
        };
        let f = [c.unwrap_or(""), i.unwrap_or(""), name.trim_matches('"'), value];
        let c: usize = f[0].parse().map_err(|_| Error::parse(k + 1, "bad chain"))?;
        let i: usize = f[1].parse().map_err(|_| Error::parse(k + 1, "bad iter"))?;
        let j = manifest
            .param_names
            .iter()
            .position(|n| n == f[2])
            .ok_or_else(|| Error::parse(k + 1, format!("unknown parameter {}", f[2])))?;
        let v: f64 = f[3].parse().map_err(|_| Error::parse(k + 1, "bad value"))?;
        if c == 0 || c > manifest.n_chains || i == 0 || i > n_draws {
            return Err(Error::parse(k + 1, "chain or iteration out of range"));
        }
        draws[((c - 1) * n_draws + i - 1) * dim + j] = v;
        seen += 1;
    }
    if seen != draws.len() {
        return Err(Error::Dimension(format!("{seen} CSV values, expected {}", draws.len())));
    }
    manifest.into_samples(draws)
}
