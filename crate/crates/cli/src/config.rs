use std::path::PathBuf;

use dirreg_core::hmc::SamplerConfig;
use dirreg_core::model::Priors;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ml,
    Bayes,
    Both,
}

impl Method {
    pub fn ml(self) -> bool {
        matches!(self, Method::Ml | Method::Both)
    }

    pub fn bayes(self) -> bool {
        matches!(self, Method::Bayes | Method::Both)
    }
}

/// Everything a fit needs. Echoed into `fit.json`, except the output
/// directory, which is where that file lives anyway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub formula: String,
    /// Explicit response columns; when absent, every column whose name
    /// starts with the formula's left-hand side.
    pub response: Option<Vec<String>>,
    /// Component name or 1-based index; the last component when absent.
    pub reference: Option<String>,
    pub method: Method,
    pub prior_sd_beta: f64,
    pub prior_sd_theta: f64,
    pub sampler: SamplerConfig,
    pub level: f64,
    pub ml_starts: usize,
    pub write_draws: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, formula: impl Into<String>, out: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            formula: formula.into(),
            response: None,
            reference: None,
            method: Method::Both,
            prior_sd_beta: 5.0,
            prior_sd_theta: 5.0,
            sampler: SamplerConfig::default(),
            level: 0.95,
            ml_starts: 1,
            write_draws: true,
            out: out.into(),
        }
    }

    pub fn priors(&self) -> Result<Priors> {
        Ok(Priors::new(self.prior_sd_beta, self.prior_sd_theta)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!("level {} outside (0, 1)", self.level)));
        }
        if self.ml_starts == 0 {
            return Err(CliError::Config("at least one ML start required".into()));
        }
        self.priors()?;
        if self.method.bayes() {
            self.sampler.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::new("in.csv", "y ~ 1", "out");
        assert!(c.validate().is_ok());
        assert_eq!(c.method, Method::Both);
        assert_eq!((c.prior_sd_beta, c.prior_sd_theta), (5.0, 5.0));
    }

    #[test]
    fn rejects_bad_values() {
        let base = RunConfig::new("in.csv", "y ~ 1", "out");
        let mut c = base.clone();
        c.level = 0.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.ml_starts = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.prior_sd_beta = -1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sampler.chains = 0;
        assert!(c.validate().is_err());
        c.method = Method::Ml;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn out_dir_is_not_serialized() {
        let c = RunConfig::new("in.csv", "y ~ 1", "somewhere/else");
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("somewhere"));
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.out, std::path::PathBuf::new());
    }
}
