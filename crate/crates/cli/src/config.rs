//! Run configuration: a flat `key = value` TOML file, named by
//! `SEPINV_CONFIG` or `--config`, with command-line flags taking precedence.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "SEPINV_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// `heuristic`, `remote URL` or `subprocess CMD`.
    pub backend: String,
    pub max_num: usize,
    pub max_attempts: usize,
    pub unfold_depth: usize,
    /// Address bound for oracle cross-checks; 0 disables them.
    pub oracle: usize,
    pub seed: u64,
    /// Seconds per remote backend call.
    pub timeout: u64,
    pub p_noise: f64,
    pub max_noise: usize,
    pub p_star: f64,
    pub p_or: f64,
}

impl Default for Config {
    fn default() -> Self {
        let synth = sepinv::datasynth::SynthConfig::default();
        let inv = sepinv::invgen::InvGenConfig::default();
        Config {
            backend: "heuristic".into(),
            max_num: inv.max_num,
            max_attempts: inv.max_attempts,
            unfold_depth: inv.prover.unfold_depth,
            oracle: 0,
            seed: 0,
            timeout: sepinv::inference::DEFAULT_TIMEOUT.as_secs(),
            p_noise: synth.p_noise,
            max_noise: synth.max_noise,
            p_star: synth.p_star,
            p_or: synth.p_or,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let c: Config = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Config::parse(&text).with_context(|| format!("bad config {}", path.display()))
    }

    /// The file given explicitly, else the one in `SEPINV_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Config> {
        match explicit {
            Some(p) => Config::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Config::load(Path::new(&p)),
                _ => Ok(Config::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("max_num", self.max_num), ("max_attempts", self.max_attempts), ("timeout", self.timeout as usize)] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        for (name, p) in [("p_noise", self.p_noise), ("p_star", self.p_star), ("p_or", self.p_or)] {
            if !(0.0..=1.0).contains(&p) {
                bail!("{name} must lie in [0, 1], got {p}");
            }
        }
        if self.p_star + self.p_or > 1.0 {
            bail!("p_star + p_or must not exceed 1");
        }
        Ok(())
    }
}
