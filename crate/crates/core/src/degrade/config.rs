use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed sampling interval. `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::Config(format!(
                "{name}: invalid interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Every range and toggle of the synthesis pipeline.
///
/// ε and γ are drawn uniformly from the open interval `(lo, hi)`; noise
/// strengths are drawn log-uniformly from `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub epsilon: Interval,
    pub gamma: Interval,
    /// Shot-noise variance per unit linear signal.
    pub shot_strength: Interval,
    /// Read-noise standard deviation.
    pub read_sigma: Interval,
    /// Use randomly drawn camera response curves; identity curves otherwise.
    pub crf: bool,
    /// Scale the dark image by `mean(H) / mean(low_H)`; `k = 1` otherwise.
    pub constant_k: bool,
    /// Model inputs are emitted in LAB; RGB otherwise.
    pub lab: bool,
    /// Add noise after γ-darkening instead of before it.
    pub noise_after_gamma: bool,
    /// DoRF-style curve file. The built-in power-law family is used when unset.
    pub crf_database: Option<PathBuf>,
    /// Side length of the square training crops.
    pub size: usize,
    /// Ablation tag this configuration was derived from, if any.
    pub ablation: Option<Ablation>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon: Interval::new(-0.1, 0.1),
            gamma: Interval::new(0.01, 0.09),
            shot_strength: Interval::new(1e-4, 1e-2),
            read_sigma: Interval::new(1e-3, 3e-2),
            crf: true,
            constant_k: true,
            lab: true,
            noise_after_gamma: false,
            crf_database: None,
            size: 256,
            ablation: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.epsilon.validate("epsilon")?;
        self.gamma.validate("gamma")?;
        self.shot_strength.validate("shot_strength")?;
        self.read_sigma.validate("read_sigma")?;
        if self.epsilon.lo <= -1.0 || self.epsilon.hi >= 1.0 {
            return Err(Error::Config("epsilon must lie inside (-1, 1)".into()));
        }
        if self.gamma.lo <= 0.0 || self.gamma.hi > 1.0 {
            return Err(Error::Config("gamma must lie inside (0, 1]".into()));
        }
        for (name, i) in [
            ("shot_strength", self.shot_strength),
            ("read_sigma", self.read_sigma),
        ] {
            if i.lo < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
            if i.lo == 0.0 && i.hi > 0.0 {
                return Err(Error::Config(format!(
                    "{name}: log-uniform interval cannot start at 0 (use [0, 0] to disable)"
                )));
            }
        }
        if self.size == 0 {
            return Err(Error::Config("size must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::Proposed => {}
            Ablation::NoEpsilon => self.epsilon = Interval::fixed(0.0),
            Ablation::NoNoise => {
                self.shot_strength = Interval::fixed(0.0);
                self.read_sigma = Interval::fixed(0.0);
            }
            Ablation::NoCrf => self.crf = false,
            Ablation::NoK => self.constant_k = false,
            Ablation::NoLab => self.lab = false,
        }
        self.ablation = Some(ablation);
        self
    }

    pub fn noise_enabled(&self) -> bool {
        self.shot_strength.hi > 0.0 || self.read_sigma.hi > 0.0
    }
}

/// Pipeline configuration with exactly the named stage disabled.
pub fn ablation_config(name: &str) -> Result<PipelineConfig> {
    Ok(PipelineConfig::default().with_ablation(name.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Proposed,
    NoEpsilon,
    NoNoise,
    NoCrf,
    NoK,
    NoLab,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Proposed,
        Ablation::NoEpsilon,
        Ablation::NoNoise,
        Ablation::NoCrf,
        Ablation::NoK,
        Ablation::NoLab,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Ablation::Proposed => "proposed",
            Ablation::NoEpsilon => "no_epsilon",
            Ablation::NoNoise => "no_noise",
            Ablation::NoCrf => "no_crf",
            Ablation::NoK => "no_k",
            Ablation::NoLab => "no_lab",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::UnknownAblation {
                tag: s.to_string(),
                valid: Ablation::ALL.map(Ablation::tag).join(", "),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.crf && cfg.constant_k && cfg.lab && cfg.noise_enabled());
        assert!(!cfg.noise_after_gamma);
    }

    #[test]
    fn each_ablation_disables_one_stage() {
        let base = PipelineConfig::default();
        let proposed = ablation_config("proposed").unwrap();
        assert_eq!(
            proposed,
            PipelineConfig {
                ablation: Some(Ablation::Proposed),
                ..base.clone()
            }
        );
        let c = ablation_config("no_noise").unwrap();
        assert_eq!(c.shot_strength, Interval::fixed(0.0));
        assert_eq!(c.read_sigma, Interval::fixed(0.0));
        assert!(!c.noise_enabled() && c.crf && c.constant_k && c.lab);
        let c = ablation_config("no_epsilon").unwrap();
        assert_eq!(c.epsilon, Interval::fixed(0.0));
        assert!(!ablation_config("no_crf").unwrap().crf);
        assert!(!ablation_config("no_k").unwrap().constant_k);
        let c = ablation_config("no_lab").unwrap();
        assert!(!c.lab && c.crf && c.noise_enabled());
    }

    #[test]
    fn unknown_tag_lists_valid_ones() {
        let err = ablation_config("no_gan").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no_gan"));
        for a in Ablation::ALL {
            assert!(msg.contains(a.tag()), "{msg}");
        }
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = ablation_config("no_noise").unwrap();
        let text = cfg.to_toml();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);

        let partial = PipelineConfig::from_toml("gamma = [0.05, 0.05]\nlab = false\n").unwrap();
        assert_eq!(partial.gamma, Interval::fixed(0.05));
        assert!(!partial.lab);
        assert_eq!(partial.epsilon, PipelineConfig::default().epsilon);

        assert!(PipelineConfig::from_toml("gama = [0.1, 0.2]").is_err());
        assert!(PipelineConfig::from_toml("gamma = [0.2, 0.1]").is_err());
        assert!(PipelineConfig::from_toml("read_sigma = [0.0, 0.1]").is_err());
        assert!(PipelineConfig::from_toml("shot_strength = [-1.0, 0.1]").is_err());
    }
}
