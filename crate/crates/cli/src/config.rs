//! Flat key-value configuration files.
//!
//! Format: one `key = value` pair per line, `#` comments, keys matching the
//! long flag names with `-` or `_` interchangeable. Command-line flags
//! override file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::args::CommonArgs;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got {line:?}", idx + 1);
            };
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                bail!("line {}: empty key", idx + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&key.replace('-', "_")).map(String::as_str)
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(value) => Ok(Some(value)),
                Err(err) => bail!("config key {key}: cannot parse {raw:?}: {err}"),
            },
        }
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse::<T>()
                        .map_err(|err| anyhow::anyhow!("config key {key}: cannot parse {item:?}: {err}"))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn parse_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(Some(true)),
                "false" | "0" | "no" | "off" => Ok(Some(false)),
                other => bail!("config key {key}: expected a boolean, got {other:?}"),
            },
        }
    }

    /// Fill unset argument fields from the file (flags keep precedence).
    pub fn overlay(&self, args: &mut CommonArgs) -> Result<()> {
        macro_rules! fill {
            ($field:ident, $key:literal, parse) => {
                if args.$field.is_none() {
                    args.$field = self.parse_as($key)?;
                }
            };
            ($field:ident, $key:literal, list) => {
                if args.$field.is_none() {
                    args.$field = self.parse_list($key)?;
                }
            };
            ($field:ident, $key:literal, path) => {
                if args.$field.is_none() {
                    args.$field = self.get($key).map(std::path::PathBuf::from);
                }
            };
            ($field:ident, $key:literal, string) => {
                if args.$field.is_none() {
                    args.$field = self.get($key).map(str::to_string);
                }
            };
        }
        fill!(data, "data", path);
        fill!(cache, "cache", path);
        fill!(out, "out", path);
        fill!(run_dir, "run_dir", path);
        fill!(paradigm, "paradigm", parse);
        fill!(alpha, "alpha", parse);
        fill!(alphas, "alphas", list);
        fill!(fractions, "fractions", list);
        fill!(seeds, "seeds", list);
        fill!(seed, "seed", parse);
        fill!(train_fraction, "train_fraction", parse);
        fill!(val_fraction, "val_fraction", parse);
        fill!(backend, "backend", string);
        fill!(epochs, "epochs", parse);
        fill!(batch_size, "batch_size", parse);
        fill!(lr, "lr", parse);
        fill!(max_input_len, "max_input_len", parse);
        fill!(max_gen_len, "max_gen_len", parse);
        fill!(workers, "workers", parse);
        fill!(separator, "separator", string);
        fill!(endpoint, "endpoint", string);
        fill!(model, "model", string);
        fill!(api_key_env, "api_key_env", string);
        if !args.instructed_format {
            args.instructed_format = self.parse_bool("instructed_format")?.unwrap_or(false);
        }
        if !args.mock_llm {
            args.mock_llm = self.parse_bool("mock_llm")?.unwrap_or(false);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values_and_comments() {
        let file = ConfigFile::parse("# comment\nepochs = 5\nbatch-size=16\n\nmock_llm = yes\n").unwrap();
        assert_eq!(file.get("epochs"), Some("5"));
        assert_eq!(file.get("batch_size"), Some("16"));
        assert_eq!(file.get("batch-size"), Some("16"));
    }

    #[test]
    fn flags_override_file_values() {
        let file = ConfigFile::parse("epochs = 5\nalpha = 0.3\nmock_llm = true\n").unwrap();
        let mut args = CommonArgs {
            epochs: Some(9),
            ..CommonArgs::default()
        };
        file.overlay(&mut args).unwrap();
        assert_eq!(args.epochs, Some(9));
        assert_eq!(args.alpha, Some(0.3));
        assert!(args.mock_llm);
    }

    #[test]
    fn bad_values_are_rejected() {
        let file = ConfigFile::parse("epochs = many\n").unwrap();
        let mut args = CommonArgs::default();
        assert!(file.overlay(&mut args).is_err());
        assert!(ConfigFile::parse("no equals sign\n").is_err());
    }

    #[test]
    fn lists_parse() {
        let file = ConfigFile::parse("seeds = 1, 2, 3\nalphas = 0.2,0.8\n").unwrap();
        let mut args = CommonArgs::default();
        file.overlay(&mut args).unwrap();
        assert_eq!(args.seeds, Some(vec![1, 2, 3]));
        assert_eq!(args.alphas, Some(vec![0.2, 0.8]));
    }
}
