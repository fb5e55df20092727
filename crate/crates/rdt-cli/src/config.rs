//! Experiment configuration: a line-oriented `key value...` file. See
//! FORMATS.md for the full key list and defaults.

use crate::error::{CliError, Result};
use rdt_core::loss::Loss;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rdt,
    RandomTree,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rdt => "rdt",
            Method::RandomTree => "random_tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub classes: usize,
    pub per_class: usize,
    pub data_seed: u64,
    pub sigma_range: (f64, f64),
    pub mean_bounds: (f64, f64),
    pub rows: Vec<(usize, usize)>,
    pub methods: Vec<Method>,
    pub runs: usize,
    pub master_seed: u64,
    pub loss: Loss,
    /// Learning rates the tuner chooses from.
    pub lr_grid: Vec<f64>,
    /// Trajectory counts (M) the tuner chooses from.
    pub m_grid: Vec<usize>,
    /// Total training epochs per start.
    pub epochs: usize,
    /// Epochs between validation checkpoints.
    pub chunk_epochs: usize,
    /// Independent starts per run for the learned-leaf method.
    pub restarts: usize,
    pub init_scale: f64,
    pub baseline: bool,
    pub depth_scaled: bool,
    /// Sampling passes for the stochastic evaluation; 0 disables it.
    pub stochastic_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            classes: 16,
            per_class: 100,
            data_seed: 7,
            sigma_range: rdt_core::data::DEFAULT_SIGMA_RANGE,
            mean_bounds: rdt_core::data::DEFAULT_MEAN_BOUNDS,
            rows: Vec::new(),
            methods: vec![Method::Rdt, Method::RandomTree],
            runs: 5,
            master_seed: 42,
            loss: Loss::Square,
            lr_grid: vec![0.05, 0.02, 0.01],
            m_grid: vec![1, 4],
            epochs: 400,
            chunk_epochs: 40,
            restarts: 12,
            init_scale: 0.1,
            baseline: true,
            depth_scaled: true,
            stochastic_samples: 100,
        }
    }
}

fn bad(line_no: usize, what: &str) -> CliError {
    CliError::Usage(format!("config line {line_no}: {what}"))
}

fn parse_one<T: std::str::FromStr>(line_no: usize, key: &str, v: Option<&str>) -> Result<T> {
    v.and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(line_no, &format!("`{key}` needs a value")))
}

fn parse_pair<T: std::str::FromStr + Copy>(
    line_no: usize,
    key: &str,
    values: &[&str],
) -> Result<(T, T)> {
    if values.len() != 2 {
        return Err(bad(line_no, &format!("`{key}` needs two values")));
    }
    let a = parse_one(line_no, key, Some(values[0]))?;
    let b = parse_one(line_no, key, Some(values[1]))?;
    Ok((a, b))
}

fn parse_switch(line_no: usize, key: &str, v: Option<&str>) -> Result<bool> {
    match v {
        Some("on") => Ok(true),
        Some("off") => Ok(false),
        _ => Err(bad(line_no, &format!("`{key}` must be `on` or `off`"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut saw_row = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let key = fields.next().unwrap();
            let values: Vec<&str> = fields.collect();
            let first = values.first().copied();
            match key {
                "classes" => cfg.classes = parse_one(line_no, key, first)?,
                "per_class" => cfg.per_class = parse_one(line_no, key, first)?,
                "data_seed" => cfg.data_seed = parse_one(line_no, key, first)?,
                "sigma" => cfg.sigma_range = parse_pair(line_no, key, &values)?,
                "mean_bounds" => cfg.mean_bounds = parse_pair(line_no, key, &values)?,
                "row" => {
                    let (w, d) = parse_pair(line_no, key, &values)?;
                    cfg.rows.push((w, d));
                    saw_row = true;
                }
                "methods" => {
                    cfg.methods = values
                        .iter()
                        .map(|v| match *v {
                            "rdt" => Ok(Method::Rdt),
                            "random_tree" => Ok(Method::RandomTree),
                            other => Err(bad(line_no, &format!("unknown method {other:?}"))),
                        })
                        .collect::<Result<_>>()?;
                    if cfg.methods.is_empty() {
                        return Err(bad(line_no, "`methods` needs at least one value"));
                    }
                }
                "runs" => cfg.runs = parse_one(line_no, key, first)?,
                "master_seed" => cfg.master_seed = parse_one(line_no, key, first)?,
                "loss" => cfg.loss = parse_one(line_no, key, first)?,
                "lr_grid" => {
                    cfg.lr_grid = values
                        .iter()
                        .map(|v| parse_one(line_no, key, Some(v)))
                        .collect::<Result<_>>()?;
                }
                "m_grid" => {
                    cfg.m_grid = values
                        .iter()
                        .map(|v| parse_one(line_no, key, Some(v)))
                        .collect::<Result<_>>()?;
                }
                "epochs" => cfg.epochs = parse_one(line_no, key, first)?,
                "chunk_epochs" => cfg.chunk_epochs = parse_one(line_no, key, first)?,
                "restarts" => cfg.restarts = parse_one(line_no, key, first)?,
                "init_scale" => cfg.init_scale = parse_one(line_no, key, first)?,
                "baseline" => cfg.baseline = parse_switch(line_no, key, first)?,
                "depth_scaled" => cfg.depth_scaled = parse_switch(line_no, key, first)?,
                "stochastic_samples" => cfg.stochastic_samples = parse_one(line_no, key, first)?,
                other => return Err(bad(line_no, &format!("unknown key {other:?}"))),
            }
        }
        if !saw_row {
            return Err(CliError::Usage("config declares no `row W D` lines".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |msg: &str| Err(CliError::Usage(msg.into()));
        if self.classes < 2 {
            return usage("classes must be at least 2");
        }
        if self.per_class < 2 || !self.per_class.is_multiple_of(2) {
            return usage("per_class must be even and positive");
        }
        if self.runs < 1 {
            return usage("runs must be at least 1");
        }
        if self.rows.iter().any(|&(w, d)| w < 2 || d < 1) {
            return usage("every row needs width >= 2 and depth >= 1");
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|&lr| lr <= 0.0 || lr.is_nan()) {
            return usage("lr_grid needs positive learning rates");
        }
        if self.m_grid.is_empty() || self.m_grid.iter().any(|&m| m < 1) {
            return usage("m_grid needs positive trajectory counts");
        }
        if self.epochs < 1 || self.chunk_epochs < 1 {
            return usage("epochs and chunk_epochs must be at least 1");
        }
        if self.restarts < 1 {
            return usage("restarts must be at least 1");
        }
        if self.init_scale <= 0.0 || self.init_scale.is_nan() {
            return usage("init_scale must be positive");
        }
        Ok(())
    }
}
