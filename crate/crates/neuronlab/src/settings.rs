//! Flat `key=value` settings with typed accessors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self {
            values: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| invalid(key, "", "missing"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.trim()
            .parse()
            .map_err(|e: T::Err| invalid(key, raw, &e.to_string()))
    }

    /// Real number; also accepts `pi`, `pi/k`, `a*pi` and `a*pi/k`.
    pub fn real(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        parse_real(raw).ok_or_else(|| invalid(key, raw, "not a number"))
    }

    pub fn reals(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|s| parse_real(s).ok_or_else(|| invalid(key, raw, "not a list of numbers")))
            .collect()
    }

    pub fn usizes(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| invalid(key, raw, "not a list of integers"))
            })
            .collect()
    }

    /// `;`-separated vectors of `,`-separated numbers.
    pub fn vectors(&self, key: &str) -> Result<Vec<Vec<f64>>> {
        let raw = self.raw(key)?;
        raw.split(';')
            .map(|v| {
                v.split(',')
                    .map(|s| parse_real(s).ok_or_else(|| invalid(key, raw, "not a list of vectors")))
                    .collect()
            })
            .collect()
    }

    pub fn list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self.raw(key)?.split(';').map(|s| s.trim().to_string()).collect())
    }
}

pub(crate) fn invalid(key: &str, value: &str, reason: &str) -> HarnessError {
    HarnessError::InvalidSetting {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let (neg, num) = match num.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, num),
    };
    let coef = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(c) => c.trim().strip_suffix('*')?.trim().parse::<f64>().ok()?,
        None => return None,
    };
    let v = coef * PI / den;
    Some(if neg { -v } else { v })
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
            line: i + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(HarnessError::Config {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    parse_config(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

/// Splits a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| invalid(s, s, "expected key=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_forms() {
        assert_eq!(parse_real("0.25"), Some(0.25));
        assert_eq!(parse_real("pi"), Some(PI));
        assert_eq!(parse_real("pi/8"), Some(PI / 8.0));
        assert_eq!(parse_real("3*pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_real("-pi/2"), Some(-PI / 2.0));
        assert_eq!(parse_real("1e-3"), Some(1e-3));
        assert_eq!(parse_real("pie"), None);
        assert_eq!(parse_real("2pi"), None);
    }

    #[test]
    fn config_lines() {
        let c = parse_config("# header\neta = 0.1\n\nhorizon=5 # trailing\n").unwrap();
        assert_eq!(c, vec![("eta".into(), "0.1".into()), ("horizon".into(), "5".into())]);
        assert!(matches!(parse_config("a=1\nnope"), Err(HarnessError::Config { line: 2, .. })));
    }

    #[test]
    fn typed_access() {
        let s = Settings::from_pairs(&[("n", "12"), ("xs", "1,pi/2"), ("vs", "-1,1;-1,0.5"), ("bad", "x")]);
        assert_eq!(s.get::<usize>("n").unwrap(), 12);
        assert_eq!(s.reals("xs").unwrap(), vec![1.0, PI / 2.0]);
        assert_eq!(s.vectors("vs").unwrap(), vec![vec![-1.0, 1.0], vec![-1.0, 0.5]]);
        assert!(matches!(s.get::<usize>("bad"), Err(HarnessError::InvalidSetting { .. })));
        assert!(s.raw("missing").is_err());
    }
}
