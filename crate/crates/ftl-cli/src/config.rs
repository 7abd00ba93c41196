use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

/// Velocity law driving the particle system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    /// Blended law with the junction transition zones.
    Junction,
    /// Incoming-road profiles everywhere; no junction effect.
    FreeRoad,
}

/// Run parameters. Every field can come from the config file or a flag;
/// flags win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Model spec (TOML).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory; replaced atomically if it holds a previous run.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Base seed; replicate seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Velocity law.
    #[arg(long, value_enum)]
    pub law: Option<LawKind>,
    /// Microscopic horizon for simulations and limiter estimates.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Number of replicates for limiter and propagation estimates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Sampling interval of recorded states in `simulate`.
    #[arg(long)]
    pub record_every: Option<f64>,
    /// Also stream positions to `trajectory.bin` in `simulate`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub binary: Option<bool>,
    /// Scales for `compare`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Macroscopic sample times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Distances from the junction sampled on each road, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub distances: Option<Vec<f64>>,
    /// Labels for the count/position duality check, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<f64>>,
    /// Grid step of the junction solver.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Distance from the junction covered by `solve-macro` output.
    #[arg(long)]
    pub reach: Option<f64>,
    /// Limiter level; defaults to the lowest level in `solve-macro` and to
    /// the estimate in `compare`.
    #[arg(long, allow_hyphen_values = true)]
    pub level: Option<f64>,
}

impl Overrides {
    /// Field-wise `self` if set, else `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            spec: self.spec.or(base.spec),
            out: self.out.or(base.out),
            seed: self.seed.or(base.seed),
            law: self.law.or(base.law),
            horizon: self.horizon.or(base.horizon),
            replicates: self.replicates.or(base.replicates),
            record_every: self.record_every.or(base.record_every),
            binary: self.binary.or(base.binary),
            eps: self.eps.or(base.eps),
            times: self.times.or(base.times),
            distances: self.distances.or(base.distances),
            labels: self.labels.or(base.labels),
            dx: self.dx.or(base.dx),
            reach: self.reach.or(base.reach),
            level: self.level.or(base.level),
        }
    }
}

/// Reads parameters from a TOML config, or from the `config` entry of a
/// previous run's `manifest.json`.
pub fn load_file(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("cannot parse manifest {}", path.display()))?;
        let config = value
            .get("config")
            .with_context(|| format!("{} has no `config` entry", path.display()))?;
        return serde_json::from_value(config.clone())
            .with_context(|| format!("invalid `config` entry in {}", path.display()));
    }
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    ftl_junction::stats::linspace(lo, hi, n)
}

/// Fully resolved parameters, as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub spec: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub law: LawKind,
    pub horizon: f64,
    pub replicates: usize,
    pub record_every: f64,
    pub binary: bool,
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub labels: Vec<f64>,
    pub dx: f64,
    pub reach: f64,
    pub level: Option<f64>,
}

impl Resolved {
    pub fn new(o: Overrides, command: &str) -> Result<Self> {
        let Some(spec) = o.spec else {
            bail!("no model spec given; pass --spec or set `spec` in the config");
        };
        let default_horizon = match command {
            "simulate" => 50.0,
            _ => 200.0,
        };
        let r = Resolved {
            spec,
            out: o.out.unwrap_or_else(|| PathBuf::from("runs").join(command)),
            seed: o.seed.unwrap_or(2024),
            law: o.law.unwrap_or(LawKind::Junction),
            horizon: o.horizon.unwrap_or(default_horizon),
            replicates: o.replicates.unwrap_or(64),
            record_every: o.record_every.unwrap_or(1.0),
            binary: o.binary.unwrap_or(false),
            eps: o.eps.unwrap_or_else(|| vec![0.1, 0.05, 0.025]),
            times: o.times.unwrap_or_else(|| linspace(0.0, 2.0, 5)),
            distances: o.distances.unwrap_or_else(|| linspace(0.0, 1.0, 11)),
            labels: o.labels.unwrap_or_else(|| linspace(-0.3, 0.3, 13)),
            dx: o.dx.unwrap_or(0.01),
            reach: o.reach.unwrap_or(2.0),
            level: o.level,
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.record_every > 0.0) || !(self.dx > 0.0) || !(self.reach > 0.0) {
            bail!("horizon, record-every, dx and reach must be positive");
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) || self.eps.is_empty() {
            bail!("eps must be a nonempty list of positive scales");
        }
        if self.times.iter().any(|t| !(*t >= 0.0)) || self.times.windows(2).any(|w| w[1] <= w[0]) {
            bail!("times must be increasing and nonnegative");
        }
        if self.distances.iter().any(|d| !(*d >= 0.0)) {
            bail!("distances must be nonnegative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: Overrides = toml::from_str("seed = 1\nhorizon = 10.0\neps = [0.5]").unwrap();
        let flags = Overrides {
            seed: Some(7),
            ..Default::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.horizon, Some(10.0));
        assert_eq!(merged.eps, Some(vec![0.5]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Overrides>("sed = 1").is_err());
    }

    #[test]
    fn missing_spec_is_an_error() {
        assert!(Resolved::new(Overrides::default(), "homogenize").is_err());
    }
}
