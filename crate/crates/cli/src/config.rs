use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use peltier_core::calibration::{self, Observation};
use peltier_core::controller::ControllerConfig;
use peltier_core::thermal::{PeltierParams, MAX_STEP};
use serde::Deserialize;

use crate::exit::{Failure, ResultExt, CONFIG};

/// Optional `--config` file. Relative paths inside it resolve against the file's directory.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub params: Option<PathBuf>,
    pub controller: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .code(CONFIG)?;
        let mut cfg: CliConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .code(CONFIG)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.params, &mut cfg.controller, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(dt) = cfg.dt {
            check_dt(dt)?;
        }
        Ok(cfg)
    }
}

pub fn check_dt(dt: f64) -> Result<f64, Failure> {
    if dt > 0.0 && dt <= MAX_STEP {
        Ok(dt)
    } else {
        Err(Failure::new(
            CONFIG,
            anyhow::anyhow!("dt {dt} must be in (0, {MAX_STEP}]"),
        ))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let run = || -> anyhow::Result<T> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    };
    run()
        .with_context(|| format!("loading {what} from {}", path.display()))
        .code(CONFIG)
}

/// Explicit file, else the config file's, else the bundled calibrated set.
pub fn load_params(path: Option<&Path>) -> Result<PeltierParams, Failure> {
    let params = match path {
        Some(p) => read_json(p, "parameters")?,
        None => calibration::calibrated_params(),
    };
    params.validate().context("invalid parameters").code(CONFIG)?;
    Ok(params)
}

pub fn load_observations(path: Option<&Path>) -> Result<Vec<Observation>, Failure> {
    let obs: Vec<Observation> = match path {
        Some(p) => read_json(p, "observations")?,
        None => calibration::bench_dataset(),
    };
    calibration::validate_observations(&obs).code(CONFIG)?;
    Ok(obs)
}

/// Controller settings from TOML or JSON (by extension); defaults when no file is given.
pub fn load_controller(path: Option<&Path>) -> Result<ControllerConfig, Failure> {
    let Some(path) = path else {
        return Ok(ControllerConfig::default());
    };
    let run = || -> anyhow::Result<ControllerConfig> {
        let text = fs::read_to_string(path)?;
        let cfg: ControllerConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            Some("toml") => toml::from_str(&text)?,
            _ => bail!("unknown controller config format (expected .toml or .json)"),
        };
        cfg.validate()?;
        Ok(cfg)
    };
    run()
        .with_context(|| format!("loading controller config from {}", path.display()))
        .code(CONFIG)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "params = \"p.json\"\nout_dir = \"/abs\"\ndt = 0.02\n").unwrap();
        let cfg = CliConfig::load(&path).unwrap();
        assert_eq!(cfg.params.unwrap(), dir.path().join("p.json"));
        assert_eq!(cfg.out_dir.unwrap(), PathBuf::from("/abs"));
        assert_eq!(cfg.dt, Some(0.02));
    }

    #[test]
    fn bad_dt_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dt = 0.5\n").unwrap();
        assert_eq!(CliConfig::load(&path).unwrap_err().code, CONFIG);
        assert_eq!(check_dt(0.0).unwrap_err().code, CONFIG);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dtt = 0.01\n").unwrap();
        assert!(CliConfig::load(&path).is_err());
    }

    #[test]
    fn controller_from_toml() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "hysteresis = 0.25\npark_orientation = \"cold\"\n").unwrap();
        let c = load_controller(Some(&path)).unwrap();
        assert_eq!(c.hysteresis, 0.25);
        assert_eq!(c.target_warm_temp, 40.0);
    }
}
