//! Flat key=value run configuration with CLI > file > defaults precedence
//! and a canonical hash for reproduction.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use blowup::ext_real::ExtReal;
use blowup::FunctionExpr;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// The merged configuration. Keys are plain strings; values keep their
/// source text so the canonical form (and its hash) is exactly what the
/// user wrote plus CLI overrides.
#[derive(Debug, Clone, Default)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                err(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn get_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| err(format!("missing required key {key:?}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(format!("key {key:?}: {s:?} is not a number"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get_f64(key)?
            .ok_or_else(|| err(format!("missing required key {key:?}")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| err(format!("key {key:?}: {s:?} is not a non-negative integer"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.get_usize(key)?.unwrap_or(default))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| err(format!("key {key:?}: {s:?} is not a non-negative integer"))),
        }
    }

    /// Parses an expression-valued key in the named variable.
    pub fn require_expr(&self, key: &str, var: &str) -> Result<FunctionExpr, ConfigError> {
        let src = self.require(key)?;
        FunctionExpr::parse(src, var)
            .map_err(|e| err(format!("key {key:?}: cannot parse {src:?}: {e}")))
    }

    pub fn expr_or(
        &self,
        key: &str,
        var: &str,
        default: &str,
    ) -> Result<FunctionExpr, ConfigError> {
        let src = self.get_or(key, default);
        FunctionExpr::parse(&src, var)
            .map_err(|e| err(format!("key {key:?}: cannot parse {src:?}: {e}")))
    }

    /// Parses an extended-real key: `inf`, `-inf`, or a finite number.
    pub fn ext_or(&self, key: &str, default: ExtReal) -> Result<ExtReal, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("inf") | Some("+inf") => Ok(ExtReal::PosInf),
            Some("-inf") => Ok(ExtReal::NegInf),
            Some(s) => s
                .parse::<f64>()
                .map(ExtReal::Finite)
                .map_err(|_| err(format!("key {key:?}: {s:?} is not inf, -inf, or a number"))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => {
                let mut out = Vec::new();
                for part in s.split(',') {
                    let p = part.trim();
                    out.push(p.parse::<f64>().map_err(|_| {
                        err(format!("key {key:?}: {p:?} is not a number"))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Canonical text form: sorted `key=value` lines. This is what the
    /// config hash commits to.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical form, hex-encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parse_merge_and_hash_are_order_independent() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nb = x^2\nxi = 1.0\n\nseed=42").unwrap();
        let c1 = Config::from_file(f.path()).unwrap();
        let mut f2 = tempfile::NamedTempFile::new().unwrap();
        writeln!(f2, "seed=42\nxi = 1.0\nb = x^2").unwrap();
        let c2 = Config::from_file(f2.path()).unwrap();
        assert_eq!(c1.hash(), c2.hash());
        assert_eq!(c1.get("b"), Some("x^2"));
        assert_eq!(c1.require_f64("xi").unwrap(), 1.0);
    }

    #[test]
    fn cli_override_changes_hash() {
        let mut c = Config::default();
        c.set("seed", 1u64);
        let h1 = c.hash();
        c.set("seed", 2u64);
        assert_ne!(h1, c.hash());
    }

    #[test]
    fn malformed_line_is_an_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "this is not a pair").unwrap();
        assert!(Config::from_file(f.path()).is_err());
    }

    #[test]
    fn ext_real_values() {
        let mut c = Config::default();
        c.set("l", "-inf");
        c.set("r", "3.5");
        assert_eq!(c.ext_or("l", ExtReal::PosInf).unwrap(), ExtReal::NegInf);
        assert_eq!(
            c.ext_or("r", ExtReal::PosInf).unwrap(),
            ExtReal::Finite(3.5)
        );
        assert_eq!(c.ext_or("absent", ExtReal::PosInf).unwrap(), ExtReal::PosInf);
    }
}
