//! Sorter parameters. A config file is flat `key = value` TOML; any key may be omitted.
//!
//! ```text
//! kappa = 10
//! lambda = 0.4
//! n_min = 5
//! l_min_seconds = 10
//! d_max_um = 30
//! mu = 0.6
//! band_low_hz = 300
//! band_high_hz = 3000
//! tol_ms = 0.5
//! invert_polarity = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::sifter::SiftParams;
use crate::stitcher::StitchParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Detection threshold in MADs.
    pub kappa: f64,
    /// Relative difference-vector tolerance for "same neuron".
    pub lambda: f64,
    pub n_min: usize,
    pub l_min_seconds: f64,
    pub d_max_um: f64,
    pub mu: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub tol_ms: f64,
    pub invert_polarity: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kappa: 10.0,
            lambda: 0.4,
            n_min: 5,
            l_min_seconds: 10.0,
            d_max_um: 30.0,
            mu: 0.6,
            band_low_hz: 300.0,
            band_high_hz: 3000.0,
            tol_ms: 0.5,
            invert_polarity: false,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("lambda", self.lambda),
            ("l_min_seconds", self.l_min_seconds),
            ("d_max_um", self.d_max_um),
            ("mu", self.mu),
            ("band_low_hz", self.band_low_hz),
            ("band_high_hz", self.band_high_hz),
            ("tol_ms", self.tol_ms),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_min == 0 {
            return Err(Error::InvalidParameter("n_min must be positive".into()));
        }
        if self.band_low_hz >= self.band_high_hz {
            return Err(Error::InvalidBand(format!(
                "band_low_hz {} must be below band_high_hz {}",
                self.band_low_hz, self.band_high_hz
            )));
        }
        Ok(())
    }

    pub fn sift_params(&self, sample_rate: f64) -> SiftParams {
        SiftParams::new(sample_rate, self.lambda, self.n_min)
    }

    pub fn stitch_params(&self) -> StitchParams {
        StitchParams {
            d_max_um: self.d_max_um,
            mu: self.mu,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn partial_file_overrides() {
        let c = Config::parse("kappa = 7\n# comment\ninvert_polarity = true\n").unwrap();
        assert_eq!(c.kappa, 7.0);
        assert!(c.invert_polarity);
        assert_eq!(c.lambda, 0.4);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("kappa = -1").is_err());
        assert!(Config::parse("n_min = 0").is_err());
        assert!(Config::parse("band_low_hz = 4000").is_err());
        assert!(Config::parse("colour = 3").is_err());
        assert!(Config::parse("kappa = \"ten\"").is_err());
    }
}
