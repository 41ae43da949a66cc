use std::str::FromStr;

use crate::distpca::{DistConfig, PartitionPolicy};
use crate::error::{LelaError, Result};
use crate::waltmin::SplitMode;

/// A distributed run described by a flat `key=value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct DistScenario {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub config: DistConfig,
}

impl Default for DistScenario {
    fn default() -> Self {
        Self { n: 100, d: 100, alpha: 0.0, config: DistConfig::new(4, 5, 2000, 10, 1) }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| LelaError::Parse(format!("bad value {raw:?} for key {key}")))
}

impl DistScenario {
    /// Blank lines and `#` comments are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sc = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| LelaError::Parse(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, raw) = (key.trim(), raw.trim());
            let c = &mut sc.config;
            match key {
                "n" => sc.n = value(key, raw)?,
                "d" => sc.d = value(key, raw)?,
                "alpha" => sc.alpha = value(key, raw)?,
                "s" => c.servers = value(key, raw)?,
                "r" => c.rank = value(key, raw)?,
                "m" => c.m = value(key, raw)?,
                "T" => c.iterations = value(key, raw)?,
                "init_rounds" => c.init_rounds = value(key, raw)?,
                "seed" => c.seed = value(key, raw)?,
                "partition" => c.policy = raw.parse()?,
                "split" => c.split = raw.parse::<SplitMode>().map_err(|e| LelaError::Parse(e.to_string()))?,
                other => return Err(LelaError::Parse(format!("line {}: unknown key {other}", lineno + 1))),
            }
        }
        Ok(sc)
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl FromStr for PartitionPolicy {
    type Err = LelaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(Self::Contiguous),
            "round-robin" => Ok(Self::RoundRobin),
            "random" | "seeded-random" => Ok(Self::SeededRandom),
            other => Err(LelaError::Parse(format!("unknown partition policy {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let sc = DistScenario::parse("# demo\nn=50\nd = 40\ns=3\nr=2\nm=900\nT=4\ninit_rounds=6\npartition=round-robin\nseed=9\nsplit=fresh\nalpha=1\n").unwrap();
        assert_eq!((sc.n, sc.d, sc.alpha), (50, 40, 1.0));
        let c = sc.config;
        assert_eq!((c.servers, c.rank, c.m, c.iterations, c.init_rounds, c.seed), (3, 2, 900, 4, 6, 9));
        assert_eq!(c.policy, PartitionPolicy::RoundRobin);
        assert_eq!(c.split, SplitMode::Fresh);
    }

    #[test]
    fn rejects_garbage() {
        assert!(DistScenario::parse("n=abc").is_err());
        assert!(DistScenario::parse("colour=blue").is_err());
        assert!(DistScenario::parse("just words").is_err());
        assert!(DistScenario::parse("partition=diagonal").is_err());
    }
}
