//! Flat key=value configuration files: `#` comments, an `include` directive
//! resolved relative to the including file, later keys win, CLI flags and
//! `PSCGAN_*` environment variables override file values. Unknown keys are
//! rejected with the nearest valid key named.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.map.insert(key.into(), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    /// Typed lookup with a fallback.
    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::Config(format!("key '{key}': cannot parse value '{raw}'"))
            }),
        }
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    /// Apply PSCGAN_<KEY> environment overrides for the allowed keys.
    pub fn apply_env_overrides(&mut self, allowed: &[&str]) {
        for key in allowed {
            let var = format!("PSCGAN_{}", key.to_uppercase());
            if let Ok(v) = std::env::var(&var) {
                self.set(*key, v);
            }
        }
    }

    /// Reject keys outside `allowed`, suggesting the nearest valid one.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                let nearest = allowed
                    .iter()
                    .min_by_key(|a| levenshtein(key, a))
                    .copied()
                    .unwrap_or("");
                return Err(Error::Config(format!(
                    "unknown key '{key}' (did you mean '{nearest}'?)"
                )));
            }
        }
        Ok(())
    }

    /// Write the fully resolved config (the frozen copy every run records).
    pub fn write_frozen(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl std::fmt::Display for Settings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.map {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Parse one file, following `include=` directives (depth-limited).
pub fn parse_config(path: &Path) -> Result<Settings> {
    let mut settings = Settings::new();
    parse_into(path, &mut settings, 0)?;
    Ok(settings)
}

fn parse_into(path: &Path, settings: &mut Settings, depth: usize) -> Result<()> {
    if depth > 8 {
        return Err(Error::Config(format!(
            "include depth exceeded at {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "include" {
            parse_into(&base.join(value), settings, depth + 1)?;
        } else {
            settings.set(key, value);
        }
    }
    Ok(())
}

/// Edit distance used for nearest-key suggestions.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + (a[i - 1] != b[j - 1]) as usize;
            cur.push(sub.min(prev[j] + 1).min(cur[j - 1] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.cfg");
        std::fs::write(&p, "# comment\nb = 16\nsigma=50\n\nmode=pscgan\n").unwrap();
        let s = parse_config(&p).unwrap();
        assert_eq!(s.get("b"), Some("16"));
        assert_eq!(s.get("sigma"), Some("50"));
        assert_eq!(s.get_parsed::<f64>("sigma", 0.0).unwrap(), 50.0);
        assert_eq!(s.get_parsed::<usize>("missing", 7).unwrap(), 7);
        assert!(s.get_parsed::<usize>("mode", 0).is_err());
    }

    #[test]
    fn include_directive_and_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.cfg"), "b=32\nsigma=50\n").unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "include=base.cfg\nsigma=25\n").unwrap();
        let s = parse_config(&p).unwrap();
        assert_eq!(s.get("b"), Some("32"));
        assert_eq!(s.get("sigma"), Some("25"), "later keys override includes");
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let mut s = Settings::new();
        s.set("lamda_gp", "10");
        let err = s.check_keys(&["lambda_gp", "lambda_mm", "b"]).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("lamda_gp") && msg.contains("lambda_gp"), "{msg}");
    }

    #[test]
    fn frozen_copy_reparses_identically() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Settings::new();
        s.set("b", "8");
        s.set("mode", "mse");
        let p = dir.path().join("frozen.cfg");
        s.write_frozen(&p).unwrap();
        let s2 = parse_config(&p).unwrap();
        assert_eq!(s.to_string(), s2.to_string());
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
    }

    #[test]
    fn env_override_applies() {
        let mut s = Settings::new();
        s.set("sigma", "50");
        std::env::set_var("PSCGAN_SIGMA", "25");
        s.apply_env_overrides(&["sigma"]);
        std::env::remove_var("PSCGAN_SIGMA");
        assert_eq!(s.get("sigma"), Some("25"));
    }
}
