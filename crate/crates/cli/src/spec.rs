//! Resolved benchmark configuration and its command-line/config-file sources.

use anyhow::{bail, Context, Result};
use nenmf_core::{RngSeed, SketchScheme};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    Gaussian,
    Power,
    Subspace,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Gaussian => "gaussian",
            Method::Power => "power",
            Method::Subspace => "subspace",
        }
    }

    /// Sketch scheme for compressed methods; `None` for vanilla.
    pub fn scheme(self) -> Option<SketchScheme> {
        match self {
            Method::Vanilla => None,
            Method::Gaussian => Some(SketchScheme::Gaussian),
            Method::Power => Some(SketchScheme::PowerIteration),
            Method::Subspace => Some(SketchScheme::SubspaceIteration),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "vanilla" => Method::Vanilla,
            "gaussian" => Method::Gaussian,
            "power" | "power_iteration" => Method::Power,
            "subspace" | "subspace_iteration" => Method::Subspace,
            other => bail!("unknown method {other:?} (vanilla, gaussian, power, subspace)"),
        })
    }
}

/// Everything a `generate` or `run` invocation needs, after merging flags,
/// config file and defaults. Serialized verbatim as `runspec.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// `null` in JSON means noiseless.
    #[serde(with = "finite_or_null")]
    pub snr_db: f64,
    pub method: Method,
    pub nu: usize,
    pub q: usize,
    pub max_inner: usize,
    pub budget_s: f64,
    pub seeds: Vec<RngSeed>,
    /// Set when the seeds were derived as `base_seed + index`.
    pub base_seed: Option<u64>,
    pub output_dir: PathBuf,
    pub trace_every: usize,
    /// `0` means no cap.
    pub max_outer: usize,
    /// `0` disables early stopping on RRE.
    pub rre_stop: f64,
    pub targets: Vec<f64>,
    pub serial: bool,
    /// Directory written by `generate`; instances are generated on the fly when absent.
    pub instances: Option<PathBuf>,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p == 0 {
            bail!("n, m and p must be positive");
        }
        if self.p > self.n.min(self.m) {
            bail!("p = {} exceeds min(n, m) = {}", self.p, self.n.min(self.m));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            bail!("snr-db must be a number or inf");
        }
        if self.method != Method::Vanilla {
            if self.nu < self.p {
                bail!(
                    "method {} needs nu >= p, got nu = {} and p = {}",
                    self.method,
                    self.nu,
                    self.p
                );
            }
            if self.nu > self.n.min(self.m) {
                bail!(
                    "nu = {} exceeds min(n, m) = {}",
                    self.nu,
                    self.n.min(self.m)
                );
            }
            if self.method != Method::Gaussian && self.q == 0 {
                bail!("method {} needs q >= 1", self.method);
            }
        }
        if self.max_inner == 0 {
            bail!("max-inner must be at least 1");
        }
        if !self.budget_s.is_finite() || self.budget_s < 0.0 {
            bail!("budget-s must be finite and >= 0");
        }
        if self.budget_s == 0.0 && self.max_outer == 0 {
            bail!("need budget-s > 0 or max-outer > 0");
        }
        if self.trace_every == 0 {
            bail!("trace-every must be at least 1");
        }
        if !(self.rre_stop >= 0.0) {
            bail!("rre-stop must be >= 0");
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            bail!("target RRE {t} must be positive and finite");
        }
        if self.seeds.is_empty() {
            bail!("no seeds requested");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            bail!("duplicate seeds requested");
        }
        Ok(())
    }

    /// Seed of the random factor initialization for one run.
    pub fn init_seed(seed: RngSeed) -> RngSeed {
        seed.derive(1)
    }

    /// First seed tried for the sketch of one run.
    pub fn sketch_seed(seed: RngSeed) -> RngSeed {
        seed.derive(2)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Problem and run parameters shared by `generate` and `run`. Every field is
/// optional so that flags can override an optional `--config` file.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct SpecArgs {
    /// Plain `key = value` file using the flag names as keys; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rows of X [default: 500]
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns of X [default: 500]
    #[arg(long)]
    pub m: Option<usize>,
    /// Factorization rank [default: 15]
    #[arg(long)]
    pub p: Option<usize>,
    /// Signal-to-noise ratio in dB, or `inf` for noiseless data [default: 30]
    #[arg(long, allow_negative_numbers = true)]
    pub snr_db: Option<f64>,
    /// [default: vanilla]
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Sketch dimension [default: 25]
    #[arg(long)]
    pub nu: Option<usize>,
    /// Power or subspace iterations [default: 4]
    #[arg(long)]
    pub q: Option<usize>,
    /// Inner iterations per subproblem [default: 500]
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Solver-time budget per seed in seconds [default: 15]
    #[arg(long)]
    pub budget_s: Option<f64>,
    /// Comma-separated explicit seeds
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// First seed when seeds are derived [default: 0]
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Number of derived seeds [default: 10]
    #[arg(long)]
    pub num_seeds: Option<usize>,
    /// Output directory [default: nenmf-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluate the RRE every this many outer iterations [default: 1]
    #[arg(long)]
    pub trace_every: Option<usize>,
    /// Run seeds one after another instead of in parallel
    #[arg(long)]
    pub serial: bool,
    /// Comma-separated RRE thresholds for time-to-target [default: 0.05]
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<f64>>,
    /// Cap on outer iterations, 0 for none [default: 0]
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Stop a run once its RRE reaches this value, 0 to disable [default: 0]
    #[arg(long)]
    pub rre_stop: Option<f64>,
    /// Load instances written by `generate` from this directory
    #[arg(long)]
    pub instances: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "n",
    "m",
    "p",
    "snr-db",
    "method",
    "nu",
    "q",
    "max-inner",
    "budget-s",
    "seeds",
    "base-seed",
    "num-seeds",
    "out",
    "trace-every",
    "serial",
    "targets",
    "max-outer",
    "rre-stop",
    "instances",
];

/// Parses a `key = value` config file. Blank lines and `#` comments are
/// ignored; underscores in keys are accepted in place of dashes.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key {key:?}", i + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Config(BTreeMap<String, String>);

impl Config {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow::anyhow!("config key {key}: {e}"))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse::<T>()
                            .map_err(|e| anyhow::anyhow!("config key {key}: {e}"))
                    })
                    .collect()
            })
            .transpose()
    }
}

impl SpecArgs {
    pub fn resolve(&self) -> Result<RunSpec> {
        let cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                Config(parse_config(&text).with_context(|| format!("in {}", path.display()))?)
            }
            None => Config(BTreeMap::new()),
        };

        let explicit = match &self.seeds {
            Some(s) => Some(s.clone()),
            None => cfg.list::<u64>("seeds")?,
        };
        let (seeds, base_seed) = match explicit {
            Some(list) => (list.into_iter().map(RngSeed).collect(), None),
            None => {
                let base = self.base_seed.or(cfg.get("base-seed")?).unwrap_or(0);
                let count = self.num_seeds.or(cfg.get("num-seeds")?).unwrap_or(10);
                let seeds = (0..count as u64).map(|i| RngSeed(base + i)).collect();
                (seeds, Some(base))
            }
        };

        let spec = RunSpec {
            n: self.n.or(cfg.get("n")?).unwrap_or(500),
            m: self.m.or(cfg.get("m")?).unwrap_or(500),
            p: self.p.or(cfg.get("p")?).unwrap_or(15),
            snr_db: self.snr_db.or(cfg.get("snr-db")?).unwrap_or(30.0),
            method: match self.method {
                Some(m) => m,
                None => cfg.get("method")?.unwrap_or(Method::Vanilla),
            },
            nu: self.nu.or(cfg.get("nu")?).unwrap_or(25),
            q: self.q.or(cfg.get("q")?).unwrap_or(4),
            max_inner: self.max_inner.or(cfg.get("max-inner")?).unwrap_or(500),
            budget_s: self.budget_s.or(cfg.get("budget-s")?).unwrap_or(15.0),
            seeds,
            base_seed,
            output_dir: match &self.out {
                Some(p) => p.clone(),
                None => cfg
                    .get("out")?
                    .unwrap_or_else(|| PathBuf::from("nenmf-out")),
            },
            trace_every: self.trace_every.or(cfg.get("trace-every")?).unwrap_or(1),
            max_outer: self.max_outer.or(cfg.get("max-outer")?).unwrap_or(0),
            rre_stop: self.rre_stop.or(cfg.get("rre-stop")?).unwrap_or(0.0),
            targets: match &self.targets {
                Some(t) => t.clone(),
                None => cfg.list("targets")?.unwrap_or_else(|| vec![0.05]),
            },
            serial: self.serial || cfg.get("serial")?.unwrap_or(false),
            instances: match &self.instances {
                Some(p) => Some(p.clone()),
                None => cfg.get("instances")?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}
