//! Key-value run configuration: `key = value` lines, `#` comments.
//! Recognized keys: `pedigree`, `ebv`, `bounds`, `n`, `theta2`. Command-line
//! flags override file values.

use std::path::PathBuf;

#[derive(Debug, Default)]
pub struct FileConfig {
    pub pedigree: Option<PathBuf>,
    pub ebv: Option<PathBuf>,
    pub bounds: Option<PathBuf>,
    pub n: Option<usize>,
    pub theta2: Option<f64>,
}

pub fn load(path: &std::path::Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = FileConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "pedigree" => cfg.pedigree = Some(PathBuf::from(value)),
            "ebv" => cfg.ebv = Some(PathBuf::from(value)),
            "bounds" => cfg.bounds = Some(PathBuf::from(value)),
            "n" => {
                cfg.n = Some(
                    value
                        .parse()
                        .map_err(|_| format!("line {}: bad n `{value}`", lineno + 1))?,
                )
            }
            "theta2" => {
                cfg.theta2 = Some(
                    value
                        .parse()
                        .map_err(|_| format!("line {}: bad theta2 `{value}`", lineno + 1))?,
                )
            }
            other => return Err(format!("line {}: unknown key `{other}`", lineno + 1)),
        }
    }
    Ok(cfg)
}
