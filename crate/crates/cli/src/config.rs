//! Run configuration: defaults, then a flat `key = value` file, then
//! command-line overrides, later settings winning.

use std::fmt::Write as _;
use std::path::PathBuf;

use cxr_core::eval::OverlapMode;
use cxr_core::localize::DEFAULT_THRESHOLDS;
use cxr_core::pooling::Loss;
use cxr_core::stats::DEFAULT_FRACTIONS;
use cxr_core::LabelSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    Avg,
    Max,
    Lse,
}

impl Pooling {
    fn as_str(self) -> &'static str {
        match self {
            Pooling::Avg => "avg",
            Pooling::Max => "max",
            Pooling::Lse => "lse",
        }
    }
}

/// Which overlap measures `eval-loc` sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    One(OverlapMode),
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<OverlapMode> {
        match self {
            ModeChoice::One(m) => vec![m],
            ModeChoice::Both => vec![OverlapMode::IoBB, OverlapMode::IoU],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub label_set: LabelSet,
    pub lexicon: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub thresholds: Vec<u8>,
    pub pooling: Pooling,
    pub r: f64,
    pub loss: Loss,
    pub seed: u64,
    pub propagate: bool,
    pub mode: ModeChoice,
    pub grid: Option<Vec<f64>>,
    pub images: Option<usize>,
    pub fractions: (f64, f64, f64),
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label_set: LabelSet::X8,
            lexicon: None,
            rules: None,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            pooling: Pooling::Lse,
            r: 10.0,
            loss: Loss::Wcel,
            seed: 0,
            propagate: false,
            mode: ModeChoice::Both,
            grid: None,
            images: None,
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad list element `{}`", s.trim())))
        .collect()
}

fn flag(v: &str) -> Result<bool, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(format!("expected a boolean, found `{other}`")),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let err = |e: String| format!("{key}: {e}");
        match key.trim() {
            "label_set" => self.label_set = v.parse().map_err(err)?,
            "lexicon" => self.lexicon = (!v.is_empty()).then(|| PathBuf::from(v)),
            "rules" => self.rules = (!v.is_empty()).then(|| PathBuf::from(v)),
            "thresholds" => {
                self.thresholds = list::<u8>(v).map_err(|_| err(format!("thresholds must be integers in [0, 255], got `{v}`")))?
            }
            "pooling" => {
                self.pooling = match v.to_ascii_lowercase().as_str() {
                    "avg" | "average" => Pooling::Avg,
                    "max" => Pooling::Max,
                    "lse" => Pooling::Lse,
                    other => return Err(err(format!("unknown pooling `{other}`"))),
                }
            }
            "r" => self.r = v.parse().map_err(|_| err(format!("bad number `{v}`")))?,
            "loss" => self.loss = v.parse().map_err(err)?,
            "seed" => self.seed = v.parse().map_err(|_| err(format!("bad seed `{v}`")))?,
            "propagate" => self.propagate = flag(v).map_err(err)?,
            "mode" => {
                self.mode = match v.to_ascii_lowercase().as_str() {
                    "both" => ModeChoice::Both,
                    m => ModeChoice::One(m.parse().map_err(err)?),
                }
            }
            "grid" => self.grid = Some(list::<f64>(v).map_err(err)?),
            "images" => self.images = Some(v.parse().map_err(|_| err(format!("bad image count `{v}`")))?),
            "fractions" => {
                let f = list::<f64>(v).map_err(err)?;
                if f.len() != 3 {
                    return Err(err("expected three fractions".into()));
                }
                self.fractions = (f[0], f[1], f[2]);
            }
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Applies a config file's contents. `#` starts a comment line.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            self.set(k, v).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.pooling == Pooling::Lse && !(self.r > 0.0 && self.r.is_finite()) {
            return Err(format!("r must be positive for lse pooling, got {}", self.r));
        }
        if self.thresholds.is_empty() {
            return Err("thresholds must not be empty".into());
        }
        if let Some(g) = &self.grid {
            if let Some(t) = g.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                return Err(format!("grid values must lie in (0, 1), got {t}"));
            }
        }
        Ok(())
    }

    /// One `key = value` line per setting, in a fixed order.
    pub fn render(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("builtin".to_string(), |p| p.display().to_string());
        let join = |v: &[String]| v.join(",");
        let mut out = String::new();
        let _ = writeln!(out, "label_set = {}", self.label_set);
        let _ = writeln!(out, "lexicon = {}", path(&self.lexicon));
        let _ = writeln!(out, "rules = {}", path(&self.rules));
        let _ = writeln!(out, "thresholds = {}", join(&self.thresholds.iter().map(u8::to_string).collect::<Vec<_>>()));
        let _ = writeln!(out, "pooling = {}", self.pooling.as_str());
        let _ = writeln!(out, "r = {}", self.r);
        let _ = writeln!(out, "loss = {}", self.loss);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "propagate = {}", self.propagate);
        let mode = match self.mode {
            ModeChoice::Both => "both".to_string(),
            ModeChoice::One(m) => m.to_string(),
        };
        let _ = writeln!(out, "mode = {mode}");
        let grid = self
            .grid
            .as_ref()
            .map_or("default".to_string(), |g| join(&g.iter().map(f64::to_string).collect::<Vec<_>>()));
        let _ = writeln!(out, "grid = {grid}");
        let images = self.images.map_or("auto".to_string(), |n| n.to_string());
        let _ = writeln!(out, "images = {images}");
        let (a, b, c) = self.fractions;
        let _ = writeln!(out, "fractions = {a},{b},{c}");
        out
    }
}
