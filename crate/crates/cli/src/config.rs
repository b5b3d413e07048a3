//! Sectioned `key = value` run-configuration files and flag/file merging.
//!
//! A config file groups defaults per subcommand:
//!
//! ```text
//! # chain size shared by a batch of runs
//! [mirror]
//! d = 3
//! n = 4
//! input = random
//! seed = 7
//!
//! [grape]
//! slices = 500
//! seeds = 1,2,3,4,5
//! ```
//!
//! Rules:
//!
//! * section headers `[name]` must name a subcommand (`mirror`, `track`,
//!   `cv`, `cqed`, `grape`, `verify-all`);
//! * a `key = value` line belongs to the preceding section; keys before any
//!   header are rejected;
//! * `#` starts a comment, blank lines are skipped, repeated keys keep the
//!   last value (so a file can be extended by appending);
//! * values are raw strings — each subcommand parses and validates its own
//!   keys and rejects keys it does not know.
//!
//! Merging is uniform across subcommands via [`Resolver`]: a command-line
//! flag always wins, then the file value, then the built-in default.  The
//! resolver records every resolved value so run records can embed the full
//! effective configuration, making every artifact self-describing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// A configuration problem: malformed file, unknown key, bad value.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Section names a config file may contain, mirroring the subcommands.
const SECTIONS: [&str; 6] = ["mirror", "track", "cv", "cqed", "grape", "verify-all"];

/// Parsed config file: per-section key/value maps.
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RunConfig {
    /// A config with no sections; every lookup falls through to defaults.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| ConfigError(format!("config {}: {}", path.display(), e.0)))
    }

    /// Parses config text.  See the module docs for the format.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError(format!(
                        "line {lineno}: unknown section [{name}] (expected one of {})",
                        SECTIONS.join(", ")
                    )));
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {lineno}: expected `key = value` or `[section]`, got `{line}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError(format!("line {lineno}: empty key")));
            }
            let Some(section) = &current else {
                return Err(ConfigError(format!(
                    "line {lineno}: key `{key}` appears before any [section] header"
                )));
            };
            sections
                .get_mut(section)
                .expect("section inserted when header was read")
                .insert(key.to_string(), value.to_string());
        }
        Ok(Self { sections })
    }

    /// The key/value map of one section (empty if the section is absent).
    pub fn section(&self, name: &str) -> BTreeMap<String, String> {
        self.sections.get(name).cloned().unwrap_or_default()
    }
}

/// Merges one subcommand's config section with its command-line flags.
///
/// Call [`Resolver::value`] / [`Resolver::optional`] once per key, then
/// [`Resolver::finish`] to reject unknown file keys and obtain the map of
/// resolved values for embedding in the run record.
pub struct Resolver {
    section_name: String,
    section: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    /// Starts resolution for the named subcommand section.
    pub fn new(section_name: &str, config: &RunConfig) -> Self {
        Self {
            section_name: section_name.to_string(),
            section: config.section(section_name),
            consumed: BTreeSet::new(),
            resolved: BTreeMap::new(),
        }
    }

    fn file_value<T>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.consumed.insert(key.to_string());
        match self.section.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                ConfigError(format!(
                    "[{}] {key} = {raw}: {e}",
                    self.section_name
                ))
            }),
        }
    }

    /// Resolves a key with a built-in default: flag > file > default.  The
    /// file value is parsed even when a flag shadows it, so malformed
    /// config lines are reported rather than silently ignored.
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError>
    where
        T: FromStr + ToString,
        T::Err: fmt::Display,
    {
        let file = self.file_value(key)?;
        let resolved = flag.or(file).unwrap_or(default);
        self.resolved.insert(key.to_string(), resolved.to_string());
        Ok(resolved)
    }

    /// Resolves a key whose default is data-dependent: flag > file > `None`.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError>
    where
        T: FromStr + ToString,
        T::Err: fmt::Display,
    {
        let file = self.file_value(key)?;
        let resolved = flag.or(file);
        if let Some(v) = &resolved {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(resolved)
    }

    /// Records an outcome that was derived rather than looked up (for
    /// example a data-dependent default), so the run record stays complete.
    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Rejects unknown file keys and returns the resolved configuration.
    pub fn finish(self) -> Result<BTreeMap<String, String>, ConfigError> {
        let unknown: Vec<&String> = self
            .section
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .collect();
        if let Some(first) = unknown.first() {
            return Err(ConfigError(format!(
                "[{}] unknown key `{first}`",
                self.section_name
            )));
        }
        Ok(self.resolved)
    }
}

/// Renders a resolved-configuration map as a JSON object of strings.
pub fn resolved_json(resolved: &BTreeMap<String, String>) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (k, v) in resolved {
        map.insert(k.clone(), serde_json::Value::String(v.clone()));
    }
    serde_json::Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_repeats() {
        let cfg = RunConfig::parse(
            "# batch defaults\n[mirror]\nd = 3\nn = 4\n\n[grape]\nslices = 20\nslices = 40\n",
        )
        .unwrap();
        assert_eq!(cfg.section("mirror").get("d").unwrap(), "3");
        assert_eq!(cfg.section("grape").get("slices").unwrap(), "40");
        assert!(cfg.section("cv").is_empty());
    }

    #[test]
    fn rejects_unknown_section_and_orphan_keys() {
        assert!(RunConfig::parse("[warp]\nx = 1\n").is_err());
        assert!(RunConfig::parse("x = 1\n").is_err());
        assert!(RunConfig::parse("[mirror]\nnot a pair\n").is_err());
    }

    #[test]
    fn resolver_precedence_and_unknown_keys() {
        let cfg = RunConfig::parse("[mirror]\nd = 5\nseed = 9\n").unwrap();
        let mut r = Resolver::new("mirror", &cfg);
        // flag wins over file, file wins over default
        assert_eq!(r.value("d", Some(2usize), 3).unwrap(), 2);
        assert_eq!(r.value("seed", None::<u64>, 7).unwrap(), 9);
        assert_eq!(r.value("n", None::<usize>, 4).unwrap(), 4);
        let resolved = r.finish().unwrap();
        assert_eq!(resolved.get("d").unwrap(), "2");
        assert_eq!(resolved.get("seed").unwrap(), "9");

        let mut r = Resolver::new("mirror", &cfg);
        let _ = r.value("d", None::<usize>, 3).unwrap();
        // `seed` never consumed -> unknown key error
        assert!(r.finish().is_err());
    }

    #[test]
    fn resolver_reports_bad_values_with_context() {
        let cfg = RunConfig::parse("[grape]\nslices = many\n").unwrap();
        let mut r = Resolver::new("grape", &cfg);
        let err = r.value("slices", None::<usize>, 10).unwrap_err();
        assert!(err.0.contains("[grape] slices = many"), "{}", err.0);
    }
}
