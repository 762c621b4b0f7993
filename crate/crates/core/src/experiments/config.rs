use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::experiments::stream::StreamSpec;
use crate::period::DetectionConfig;
use crate::phase::EmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cpr,
    Laplace,
    Sw,
    SwMoving,
    SwFilter,
    Lbd,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Cpr,
        Method::Laplace,
        Method::Sw,
        Method::SwMoving,
        Method::SwFilter,
        Method::Lbd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cpr => "cpr",
            Method::Laplace => "laplace",
            Method::Sw => "sw",
            Method::SwMoving => "sw_moving",
            Method::SwFilter => "sw_filter",
            Method::Lbd => "lbd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Detection settings as written in a config file. Unset fields take the
/// length-dependent defaults of [`DetectionConfig::for_length`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionOptions {
    pub scales: Option<Vec<usize>>,
    pub t_min: Option<usize>,
    pub t_max: Option<usize>,
    pub peaks: Option<usize>,
    pub tau: Option<f64>,
    pub hann: Option<bool>,
    pub refine: Option<bool>,
}

impl DetectionOptions {
    pub fn resolve(&self, n: usize) -> Result<DetectionConfig> {
        let mut cfg = DetectionConfig::for_length(n).unwrap_or(DetectionConfig {
            scales: vec![n],
            t_min: 2,
            t_max: 2,
            peaks: 5,
            tau: 0.1,
            hann: true,
            refine: true,
        });
        if let Some(t) = self.t_min {
            cfg.t_min = t;
        }
        if let Some(t) = self.t_max {
            cfg.t_max = t;
        }
        if let Some(s) = &self.scales {
            cfg.scales = s.clone();
        } else if self.t_min.is_some() {
            for s in cfg.scales.iter_mut() {
                *s = (*s).max(4 * cfg.t_min).min(n);
            }
            cfg.scales.dedup();
        }
        if let Some(l) = self.peaks {
            cfg.peaks = l;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(h) = self.hann {
            cfg.hann = h;
        }
        if let Some(r) = self.refine {
            cfg.refine = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub epsilons: Vec<f64>,
    pub windows: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Largest |T_hat - T_true| still counted as a correct detection.
    #[serde(default)]
    pub tol_t: usize,
    pub stream: StreamSpec,
    #[serde(default)]
    pub detection: DetectionOptions,
    #[serde(default)]
    pub em: EmConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.windows.is_empty() || self.methods.is_empty() {
            return Err(Error::Config(
                "epsilons, windows and methods must be nonempty".into(),
            ));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("epsilon {e} must be positive")));
        }
        if self.windows.contains(&0) {
            return Err(Error::Config("window lengths must be positive".into()));
        }
        self.stream.validate()?;
        self.em.validate()?;
        self.baseline.validate()?;
        Ok(())
    }
}
