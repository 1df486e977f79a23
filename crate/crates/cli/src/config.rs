//! Run profiles. All defaults come from one TOML file holding a `default`
//! and a `paper` profile; flags given on the command line win.

use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

const BUNDLED: &str = include_str!("../data/lori.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub seed: u64,
    pub lf_threshold: f64,
    pub learning_curve_sizes: Vec<usize>,
    pub train_iterations: usize,
    pub decision_threshold: f64,
    pub max_steps: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    default: Profile,
    paper: Profile,
}

impl Profile {
    /// Reads `path` (or the bundled file) and picks the requested profile.
    pub fn load(path: Option<&Path>, paper: bool) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::invalid(format!("--config {}: {e}", p.display())))?,
            None => BUNDLED.to_owned(),
        };
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::invalid(format!("config file: {e}")))?;
        let profile = if paper { file.paper } else { file.default };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.lf_threshold) {
            return Err(CliError::invalid("config: lf_threshold must lie in [0, 1]"));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(CliError::invalid("config: decision_threshold must lie in (0, 1)"));
        }
        if self.learning_curve_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::invalid("config: learning_curve_sizes must be strictly ascending"));
        }
        if self.workers == 0 {
            return Err(CliError::invalid("config: workers must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_profiles_load() {
        let d = Profile::load(None, false).unwrap();
        let p = Profile::load(None, true).unwrap();
        assert_eq!(d.learning_curve_sizes, [50, 200, 800]);
        assert_eq!(p.lf_threshold, 0.7);
        assert_eq!(p.learning_curve_sizes, [5_000, 25_000, 50_000, 100_000]);
    }

    #[test]
    fn bad_profile_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let text = BUNDLED.replacen("lf_threshold = 0.5", "lf_threshold = 1.5", 1);
        std::fs::write(&path, text).unwrap();
        assert!(Profile::load(Some(&path), false).is_err());
        assert!(Profile::load(Some(&path), true).is_ok());
    }
}
