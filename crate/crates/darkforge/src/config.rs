//! Flat `key = value` degradation config. Blank lines and `#` comments are ignored.

use std::path::Path;

use darkforge_core::degrade::DegradeConfig;

use crate::error::{Error, Result};

pub fn parse_degrade_config(text: &str) -> Result<DegradeConfig> {
    let mut cfg = DegradeConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config { line: i + 1, message };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let float = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
        match key {
            "tau_color" => cfg.tau_color = float()?,
            "epsilon" => cfg.epsilon = float()?,
            "sigma_floor" => cfg.sigma_floor = float()?,
            "seed" => cfg.seed = value.parse().map_err(|e| err(format!("seed: {e}")))?,
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_degrade_config(path: &Path) -> Result<DegradeConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_degrade_config(&text)
}
