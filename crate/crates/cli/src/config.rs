//! `key=value` parameter files. Flags given on the command line win.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileConfig {
    pub n: Option<u32>,
    pub c: Option<u32>,
    pub grid_cap: Option<u32>,
    pub samples: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = FileConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value, got {line:?}", lineno + 1);
            };
            let value = value.trim();
            let bad = || format!("line {}: bad value {value:?} for {}", lineno + 1, key.trim());
            match key.trim() {
                "n" => cfg.n = Some(value.parse().with_context(bad)?),
                "c" => cfg.c = Some(value.parse().with_context(bad)?),
                "grid_cap" => cfg.grid_cap = Some(value.parse().with_context(bad)?),
                "samples" => cfg.samples = Some(value.parse().with_context(bad)?),
                other => bail!("line {}: unknown key {other:?} (expected n, c, grid_cap, samples)", lineno + 1),
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = FileConfig::parse("# desk run\nn = 3\nc=2\n\ngrid_cap=20\nsamples=500\n").unwrap();
        assert_eq!(
            cfg,
            FileConfig {
                n: Some(3),
                c: Some(2),
                grid_cap: Some(20),
                samples: Some(500)
            }
        );
    }

    #[test]
    fn rejects_junk() {
        assert!(FileConfig::parse("n=three").is_err());
        assert!(FileConfig::parse("depth=4").is_err());
        assert!(FileConfig::parse("n").is_err());
    }
}
