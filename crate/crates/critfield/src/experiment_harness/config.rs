use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::critical_finder::FinderOptions;
use crate::error::{Error, Result};
use crate::spectral_weights::{WeightFamily, WeightSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightConfig {
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_eps_cut")]
        eps_cut: f64,
    },
    Rational {
        exponent: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_eps_cut")]
        eps_cut: f64,
    },
    Bump {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_eps_cut")]
        eps_cut: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_eps_cut() -> f64 {
    1e-12
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig::Gaussian {
            amplitude: 1.0,
            eps_cut: default_eps_cut(),
        }
    }
}

impl WeightConfig {
    pub fn build(&self) -> Result<WeightSpec<f64>> {
        let (family, amplitude, eps_cut) = match *self {
            WeightConfig::Gaussian { amplitude, eps_cut } => (WeightFamily::Gaussian, amplitude, eps_cut),
            WeightConfig::Rational {
                exponent,
                amplitude,
                eps_cut,
            } => (WeightFamily::Rational { exponent }, amplitude, eps_cut),
            WeightConfig::Bump {
                radius,
                amplitude,
                eps_cut,
            } => (WeightFamily::Bump { radius }, amplitude, eps_cut),
        };
        WeightSpec::new(family, amplitude, eps_cut).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Pass thresholds for the normality diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// KS critical value is `ks_coefficient / sqrt(n) + ks_slack`.
    pub ks_coefficient: f64,
    pub ks_slack: f64,
    pub max_abs_skew: f64,
    pub max_abs_excess_kurtosis: f64,
    /// Width, in joint standard errors, of the agreement bands.
    pub sigma: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ks_coefficient: 1.358,
            ks_slack: 0.02,
            max_abs_skew: 0.15,
            max_abs_excess_kurtosis: 0.3,
            sigma: 3.0,
        }
    }
}

/// Kac-Rice predictions attached to each cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionConfig {
    /// Attach the two-point variance prediction where it is available (`m = 1`, `r <= 1/2`).
    pub variance: bool,
    /// Monte-Carlo draws for the mean density when `m >= 2`.
    pub density_samples: usize,
    pub mc_per_node: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            variance: true,
            density_samples: 1_000_000,
            mc_per_node: 20_000,
        }
    }
}

/// Schedule `hbar_n = n^(-2/p)` of the almost-sure convergence run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsConvergenceConfig {
    /// Exponent in `(0, m)`; `None` picks `0.8 m`.
    pub p: Option<f64>,
    pub n: Vec<usize>,
    pub replicates: usize,
    /// Smallest `hbar` the schedule may reach.
    pub hbar_floor: f64,
}

impl Default for AsConvergenceConfig {
    fn default() -> Self {
        Self {
            p: None,
            n: vec![2, 4, 8, 16],
            replicates: 20,
            hbar_floor: 1.0 / 1024.0,
        }
    }
}

/// Settings of the chaos decomposition of the limiting variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosConfig {
    /// Highest even order; `None` picks 6 for `m = 1` and 4 for `m = 2`.
    pub q_max: Option<usize>,
    pub coefficient_samples: usize,
    pub mc_per_node: usize,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self {
            q_max: None,
            coefficient_samples: 1_000_000,
            mc_per_node: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weight: WeightConfig,
    pub m: usize,
    pub hbar: Vec<f64>,
    /// Box sides; each lies in `(0, 1/2]` or equals 1.
    pub r: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: String,
    pub plot: bool,
    pub finder: FinderOptions,
    pub thresholds: Thresholds,
    pub predictions: PredictionConfig,
    pub as_convergence: AsConvergenceConfig,
    pub chaos: ChaosConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            weight: WeightConfig::default(),
            m: 1,
            hbar: vec![1.0 / 64.0],
            r: vec![1.0],
            samples: 2000,
            seed: 1,
            threads: 1,
            out: "out".into(),
            plot: false,
            finder: FinderOptions::default(),
            thresholds: Thresholds::default(),
            predictions: PredictionConfig::default(),
            as_convergence: AsConvergenceConfig::default(),
            chaos: ChaosConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=2).contains(&self.m) {
            return bad(format!("m must be 1 or 2, got {}", self.m));
        }
        if self.hbar.is_empty() || self.r.is_empty() {
            return bad("hbar and r must be non-empty".into());
        }
        if let Some(h) = self.hbar.iter().find(|&&h| !(h > 0.0 && h <= 0.25)) {
            return bad(format!("hbar must lie in (0, 1/4], got {h}"));
        }
        if let Some(r) = self.r.iter().find(|&&r| !((r > 0.0 && r <= 0.5) || r == 1.0)) {
            return bad(format!("r must lie in (0, 1/2] or equal 1, got {r}"));
        }
        if self.samples < 100 {
            return bad(format!("at least 100 samples per cell are required, got {}", self.samples));
        }
        if self.threads == 0 {
            return bad("threads must be positive".into());
        }
        if self.finder.scan_per_wavelength < 4 {
            return bad("finder.scan_per_wavelength must be at least 4".into());
        }
        self.weight.build()?;
        Ok(())
    }

    /// SHA-256 of the settings that determine the results; thread count and output location are excluded.
    pub fn settings_hash(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.out.clear();
        c.plot = false;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
