//! `key=value` config files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const KNOWN_KEYS: [&str; 11] = [
    "mode",
    "C",
    "epsilon",
    "epsilon-grid",
    "trials",
    "seed",
    "t-max",
    "threads",
    "out",
    "encoder-noisy",
    "a-count",
];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", n + 1))
            })?;
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key {k:?}",
                    n + 1
                )));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                ConfigFile::parse(&text)
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `flag`, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("config {key}: cannot parse {s:?}"))),
            None => Ok(default),
        }
    }

    /// A list from flags if any were given, else the comma-separated config value.
    pub fn pick_list(&self, flag: &[String], key: &str) -> Vec<String> {
        if !flag.is_empty() {
            return flag.to_vec();
        }
        self.get(key)
            .map(|s| {
                s.split(',')
                    .map(|x| x.trim().to_string())
                    .filter(|x| !x.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// `lo:hi:count`, log-spaced and inclusive of both ends.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("epsilon grid {spec:?} must be lo:hi:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let c = ConfigFile::parse("# comment\ntrials = 500\nC=inf,1\n\n").unwrap();
        assert_eq!(c.get("trials"), Some("500"));
        assert_eq!(c.pick(None, "trials", 7u64).unwrap(), 500);
        assert_eq!(c.pick(Some(9u64), "trials", 7).unwrap(), 9);
        assert_eq!(c.pick(None, "seed", 3u64).unwrap(), 3);
        assert_eq!(c.pick_list(&[], "C"), vec!["inf", "1"]);
        assert_eq!(c.pick_list(&["2".into()], "C"), vec!["2"]);
        assert!(ConfigFile::parse("bogus=1").is_err());
        assert!(ConfigFile::parse("novalue").is_err());
        assert!(c.pick::<u64>(None, "C", 0).is_err());
    }

    #[test]
    fn grids() {
        let g = parse_grid("1e-4:1e-2:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 1e-3).abs() < 1e-15);
        assert_eq!((g[0], g[2]), (1e-4, 1e-2));
        assert_eq!(parse_grid("2e-4:2e-4:1").unwrap(), vec![2e-4]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("1e-3:1e-4:3").is_err());
    }
}
