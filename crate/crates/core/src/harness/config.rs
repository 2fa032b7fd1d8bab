//! Flat `key=value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unset keys take
//! the defaults listed by [`KEYS`]; solver keys left unset follow
//! [`SolverConfig::standard`] for the configured mode and photon scale.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::denoiser::{NetworkArchitecture, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::PotentialKind;
use crate::solver::{SolverConfig, SolverMode, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Train,
    Denoise,
    Deblur,
    SampleNoise,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Train => "train",
            Task::Denoise => "denoise",
            Task::Deblur => "deblur",
            Task::SampleNoise => "sample-noise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Task::Train),
            "denoise" => Some(Task::Denoise),
            "deblur" => Some(Task::Deblur),
            "sample-noise" => Some(Task::SampleNoise),
            _ => None,
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Task,
    Text,
    Path,
    Float,
    Int,
    Bool,
    Mode,
    Geometry,
    Channels,
}

/// Every recognized key, its value type and its default (empty: none).
pub const KEYS: &[(&str, &str)] = &[
    ("alpha", "40"),
    ("backtracking", "true"),
    ("batch_size", "8"),
    ("bias", "true"),
    ("blocks", "1"),
    ("box_bound", "1"),
    ("bt_eta", "0.5"),
    ("bt_gamma", "0.8"),
    ("bt_max_trials", "60"),
    ("channels", "16,32,64"),
    ("gamma", ""),
    ("geometry", "burg"),
    ("input", ""),
    ("inv_gamma_max", "0.1"),
    ("inv_gamma_min", "0"),
    ("kernel", "uniform9"),
    ("kernel_size", "3"),
    ("lambda", ""),
    ("learning_rate", "0.0001"),
    ("max_iter", "500"),
    ("max_restarts", "6"),
    ("mode", "bred"),
    ("model", ""),
    ("out", "out"),
    ("patch_size", "32"),
    ("rel_tol", "1e-8"),
    ("restart_factor", "2"),
    ("restart_window", "5"),
    ("seed", "0"),
    ("steps", "2000"),
    ("strength", ""),
    ("tail_gain", "0.1"),
    ("task", ""),
    ("tau", ""),
    ("warm_gamma", ""),
    ("warm_iterations", "100"),
    ("warm_lambda", ""),
    ("warm_strength", ""),
    ("warm_tau", ""),
];

fn kind(key: &str) -> Option<Kind> {
    Some(match key {
        "task" => Kind::Task,
        "kernel" => Kind::Text,
        "input" | "model" | "out" => Kind::Path,
        "alpha" | "gamma" | "lambda" | "tau" | "strength" | "box_bound" | "bt_eta" | "bt_gamma" | "rel_tol"
        | "restart_factor" | "warm_gamma" | "warm_lambda" | "warm_strength" | "warm_tau" | "learning_rate"
        | "inv_gamma_min" | "inv_gamma_max" | "tail_gain" => Kind::Float,
        "seed" | "bt_max_trials" | "max_iter" | "max_restarts" | "restart_window" | "warm_iterations"
        | "steps" | "patch_size" | "batch_size" | "kernel_size" | "blocks" => Kind::Int,
        "backtracking" | "bias" => Kind::Bool,
        "mode" => Kind::Mode,
        "geometry" => Kind::Geometry,
        "channels" => Kind::Channels,
        _ => return None,
    })
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::config(format!("{key}={value}: expected {what}"))
}

fn check(key: &str, value: &str) -> Result<()> {
    let k = kind(key).ok_or_else(|| Error::config(format!("unknown key `{key}`")))?;
    let ok = match k {
        Kind::Task => Task::parse(value).is_some(),
        Kind::Text | Kind::Path => !value.is_empty(),
        Kind::Float => value.parse::<f64>().map(f64::is_finite).unwrap_or(false),
        Kind::Int => value.parse::<u64>().is_ok(),
        Kind::Bool => value.parse::<bool>().is_ok(),
        Kind::Mode => SolverMode::parse(value).is_some(),
        Kind::Geometry => PotentialKind::parse(value).is_some(),
        Kind::Channels => value.split(',').all(|c| c.trim().parse::<usize>().map(|c| c > 0).unwrap_or(false)),
    };
    if ok {
        Ok(())
    } else {
        let what = match k {
            Kind::Task => "train, denoise, deblur or sample-noise",
            Kind::Text | Kind::Path => "a nonempty value",
            Kind::Float => "a finite number",
            Kind::Int => "a nonnegative integer",
            Kind::Bool => "true or false",
            Kind::Mode => "bred or bpnp",
            Kind::Geometry => "burg or euclidean",
            Kind::Channels => "a comma-separated list of positive integers",
        };
        Err(bad(key, value, what))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

fn absolute(p: &Path) -> std::path::PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        let mut c = Self::default();
        c.values.insert("task".into(), task.name().into());
        c
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        check(key, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Result<Self> {
        self.set(key, &value.to_string())?;
        Ok(self)
    }

    /// Explicitly set value, if any.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Explicit value or default.
    fn value(&self, key: &str) -> Option<&str> {
        self.get(key).or_else(|| {
            KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).filter(|d| !d.is_empty())
        })
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Option<T> {
        self.value(key).and_then(|v| v.parse().ok())
    }

    fn float(&self, key: &str) -> Option<f64> {
        self.parsed(key)
    }

    fn int(&self, key: &str) -> Option<usize> {
        self.parsed(key)
    }

    /// Parses `key=value` lines. `result.*` lines from a run manifest are
    /// skipped, so a manifest can be replayed as a config.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            if k.trim().starts_with("result.") {
                continue;
            }
            c.set(k.trim(), v)?;
        }
        Ok(c)
    }

    /// Reads a config file; relative `input`, `model` and `file:` kernel
    /// paths are taken relative to the file's directory and made absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_text(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for key in ["input", "model"] {
            if let Some(v) = c.get(key) {
                if Path::new(v).is_relative() {
                    let joined = absolute(&base.join(v)).to_string_lossy().into_owned();
                    c.values.insert(key.into(), joined);
                }
            }
        }
        if let Some(file) = c.get("kernel").and_then(|k| k.strip_prefix("file:")) {
            if Path::new(file).is_relative() {
                let joined = format!("file:{}", absolute(&base.join(file)).to_string_lossy());
                c.values.insert("kernel".into(), joined);
            }
        }
        Ok(c)
    }

    /// Explicit entries, sorted by key.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn task(&self) -> Result<Task> {
        self.get("task")
            .and_then(Task::parse)
            .ok_or_else(|| Error::config("no task given (train, denoise, deblur or sample-noise)"))
    }

    pub fn seed(&self) -> u64 {
        self.parsed("seed").unwrap_or(0)
    }

    pub fn alpha(&self) -> f64 {
        self.float("alpha").unwrap_or(40.0)
    }

    pub fn mode(&self) -> SolverMode {
        self.value("mode").and_then(SolverMode::parse).unwrap_or(SolverMode::Bred)
    }

    pub fn geometry(&self) -> PotentialKind {
        self.value("geometry").and_then(PotentialKind::parse).unwrap_or(PotentialKind::Burg)
    }

    pub fn kernel(&self) -> &str {
        self.value("kernel").unwrap_or("uniform9")
    }

    /// Noise level for the denoise and sample-noise tasks.
    pub fn noise_gamma(&self) -> f64 {
        self.float("gamma").unwrap_or(25.0)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.value(key).map(PathBuf::from)
    }

    pub fn input(&self) -> Result<PathBuf> {
        self.path("input").ok_or_else(|| Error::config("no input given"))
    }

    pub fn model(&self) -> Result<PathBuf> {
        self.path("model").ok_or_else(|| Error::config("no model given"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out").unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Solver settings: standard values for `mode` and `alpha`, then explicit keys.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::standard(self.mode(), self.alpha());
        let p = &mut c.params;
        let set = |v: &mut f64, key: &str| {
            if let Some(x) = self.get(key).and_then(|s| s.parse().ok()) {
                *v = x;
            }
        };
        set(&mut p.lambda, "lambda");
        set(&mut p.gamma, "gamma");
        set(&mut p.tau, "tau");
        set(&mut p.strength, "strength");
        set(&mut c.box_bound, "box_bound");
        set(&mut c.backtracking.gamma, "bt_gamma");
        set(&mut c.backtracking.eta, "bt_eta");
        set(&mut c.restart.factor, "restart_factor");
        set(&mut c.rel_tol, "rel_tol");
        c.backtracking.enabled = self.parsed("backtracking").unwrap_or(true);
        c.backtracking.max_trials = self.int("bt_max_trials").unwrap_or(60);
        c.restart.window = self.int("restart_window").unwrap_or(5);
        c.restart.max_restarts = self.int("max_restarts").unwrap_or(6);
        c.max_iter = self.int("max_iter").unwrap_or(500);
        let iterations = self.int("warm_iterations").unwrap_or(100);
        c.warm_start = match (iterations, c.warm_start) {
            (0, _) | (_, None) => None,
            (iterations, Some(mut w)) => {
                set(&mut w.params.lambda, "warm_lambda");
                set(&mut w.params.gamma, "warm_gamma");
                set(&mut w.params.tau, "warm_tau");
                set(&mut w.params.strength, "warm_strength");
                Some(WarmStart { iterations, params: w.params })
            }
        };
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let channels = self
            .value("channels")
            .unwrap_or("16,32,64")
            .split(',')
            .filter_map(|c| c.trim().parse().ok())
            .collect();
        let d = TrainConfig::default();
        let c = TrainConfig {
            architecture: NetworkArchitecture {
                channels,
                kernel_size: self.int("kernel_size").unwrap_or(3),
                blocks: self.int("blocks").unwrap_or(1),
                bias: self.parsed("bias").unwrap_or(true),
            },
            geometry: self.geometry(),
            patch_size: self.int("patch_size").unwrap_or(d.patch_size),
            batch_size: self.int("batch_size").unwrap_or(d.batch_size),
            steps: self.int("steps").unwrap_or(d.steps),
            learning_rate: self.float("learning_rate").unwrap_or(d.learning_rate),
            inv_gamma_range: (
                self.float("inv_gamma_min").unwrap_or(d.inv_gamma_range.0),
                self.float("inv_gamma_max").unwrap_or(d.inv_gamma_range.1),
            ),
            tail_gain: self.float("tail_gain").unwrap_or(d.tail_gain),
            ..d
        };
        c.validate()?;
        Ok(c)
    }

    /// The explicit entries plus every resolved setting the task depends on.
    pub fn resolved(&self) -> Result<BTreeMap<String, String>> {
        let task = self.task()?;
        let mut m: BTreeMap<String, String> = self.values.clone();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed().to_string());
        put("out", self.out_dir().to_string_lossy().into_owned());
        match task {
            Task::Deblur => {
                let c = self.solver_config()?;
                put("alpha", self.alpha().to_string());
                put("mode", c.mode.name().into());
                put("kernel", self.kernel().into());
                put("lambda", c.params.lambda.to_string());
                put("gamma", c.params.gamma.to_string());
                put("tau", c.params.tau.to_string());
                put("strength", c.params.strength.to_string());
                put("box_bound", c.box_bound.to_string());
                put("backtracking", c.backtracking.enabled.to_string());
                put("bt_gamma", c.backtracking.gamma.to_string());
                put("bt_eta", c.backtracking.eta.to_string());
                put("bt_max_trials", c.backtracking.max_trials.to_string());
                put("restart_window", c.restart.window.to_string());
                put("restart_factor", c.restart.factor.to_string());
                put("max_restarts", c.restart.max_restarts.to_string());
                put("rel_tol", c.rel_tol.to_string());
                put("max_iter", c.max_iter.to_string());
                put("warm_iterations", c.warm_start.map_or(0, |w| w.iterations).to_string());
                if let Some(w) = c.warm_start {
                    put("warm_lambda", w.params.lambda.to_string());
                    put("warm_gamma", w.params.gamma.to_string());
                    put("warm_tau", w.params.tau.to_string());
                    put("warm_strength", w.params.strength.to_string());
                }
            }
            Task::Denoise => put("gamma", self.noise_gamma().to_string()),
            Task::SampleNoise => {
                put("gamma", self.noise_gamma().to_string());
                put("geometry", self.geometry().name().into());
            }
            Task::Train => {
                let c = self.train_config()?;
                let channels: Vec<String> = c.architecture.channels.iter().map(|c| c.to_string()).collect();
                put("channels", channels.join(","));
                put("kernel_size", c.architecture.kernel_size.to_string());
                put("blocks", c.architecture.blocks.to_string());
                put("bias", c.architecture.bias.to_string());
                put("geometry", c.geometry.name().into());
                put("patch_size", c.patch_size.to_string());
                put("batch_size", c.batch_size.to_string());
                put("steps", c.steps.to_string());
                put("learning_rate", c.learning_rate.to_string());
                put("inv_gamma_min", c.inv_gamma_range.0.to_string());
                put("inv_gamma_max", c.inv_gamma_range.1.to_string());
                put("tail_gain", c.tail_gain.to_string());
            }
        }
        Ok(m)
    }
}
