//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [group]
//! kind = "Z"            # Z | Z2 | Heisenberg
//! base = 2              # raw chain m_n = base^n ...
//! levels = 40
//! # moduli = [4, 32, 256]   # ... or an explicit schedule
//!
//! [window]
//! kind = "ktilde"       # perf | k | ktilde
//! k = 3
//! epsilon = "999/1000"
//! a = [3]
//! partition_level = 2
//! cap = 6
//! telescope = true
//! e_rule = "single"     # single | per-parent | keep
//!
//! [patch]
//! level = 6
//! xi = "critical"       # identity | critical | random
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toeplitz_core::group::power_schedule;
use toeplitz_core::{ERule, GroupKind, Rational, WindowKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub group: GroupSection,
    pub window: WindowSection,
    #[serde(default)]
    pub patch: PatchSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub kind: String,
    pub base: Option<u64>,
    pub levels: Option<usize>,
    pub moduli: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "one")]
    pub k: usize,
    pub epsilon: String,
    #[serde(default = "default_a")]
    pub a: Vec<usize>,
    #[serde(default = "one")]
    pub partition_level: usize,
    pub cap: usize,
    #[serde(default = "yes")]
    pub telescope: bool,
    #[serde(default = "default_e_rule")]
    pub e_rule: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PatchSection {
    /// Patch `D_level`; defaults to the window cap.
    pub level: Option<usize>,
    /// Explicit patch elements as coordinate lists; overrides `level`.
    pub elements: Option<Vec<Vec<i64>>>,
    #[serde(default = "default_xi")]
    pub xi: String,
    /// Number of Haar samples for fiber coverage.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for PatchSection {
    fn default() -> Self {
        PatchSection { level: None, elements: None, xi: default_xi(), samples: default_samples() }
    }
}

fn default_kind() -> String {
    "perf".into()
}
fn default_e_rule() -> String {
    "single".into()
}
fn default_xi() -> String {
    "critical".into()
}
fn default_a() -> Vec<usize> {
    vec![3]
}
fn default_samples() -> usize {
    100
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiChoice {
    Identity,
    Critical,
    Random,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.group_kind()?;
        self.moduli()?;
        let eps = self.epsilon()?;
        if eps <= Rational::from_integer(0) || eps >= Rational::from_integer(1) {
            return invalid("epsilon must lie strictly between 0 and 1");
        }
        let w = &self.window;
        if w.cap == 0 {
            return invalid("cap must be at least 1");
        }
        if w.a.is_empty() || w.a.iter().any(|&a| a < 3) {
            return invalid("every a_n must be at least 3");
        }
        let kind = self.window_kind()?;
        if kind != WindowKind::Perf {
            if w.k == 0 {
                return invalid("k must be at least 1");
            }
            if w.partition_level == 0 || w.partition_level > w.cap {
                return invalid("need cap >= partition_level >= 1");
            }
        }
        self.e_rule()?;
        self.xi()?;
        if self.patch.level.is_some_and(|m| m > w.cap) {
            return invalid("patch level cannot exceed the cap");
        }
        Ok(())
    }

    pub fn group_kind(&self) -> Result<GroupKind, ConfigError> {
        match self.group.kind.as_str() {
            "Z" => Ok(GroupKind::Lattice(1)),
            "Z2" => Ok(GroupKind::Lattice(2)),
            "Heisenberg" => Ok(GroupKind::Heisenberg),
            other => invalid(format!("unknown group {other:?}; expected Z, Z2 or Heisenberg")),
        }
    }

    /// The raw modulus schedule.
    pub fn moduli(&self) -> Result<Vec<u64>, ConfigError> {
        let dim = self.group_kind()?.dimension() as u32;
        let moduli = match (&self.group.moduli, self.group.base, self.group.levels) {
            (Some(m), None, None) => m.clone(),
            (None, Some(base), Some(levels)) => {
                power_schedule(base, levels, dim).map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            _ => return invalid("give either group.moduli or both group.base and group.levels"),
        };
        let mut previous = 1u64;
        for &m in &moduli {
            if m <= previous || m % previous != 0 {
                return invalid(format!("modulus schedule is not strictly refining at {m}"));
            }
            previous = m;
        }
        Ok(moduli)
    }

    pub fn epsilon(&self) -> Result<Rational, ConfigError> {
        parse_rational(&self.window.epsilon).ok_or_else(|| {
            ConfigError::Invalid(format!("epsilon {:?} is not a rational p/q", self.window.epsilon))
        })
    }

    pub fn window_kind(&self) -> Result<WindowKind, ConfigError> {
        match self.window.kind.as_str() {
            "perf" => Ok(WindowKind::Perf),
            "k" => Ok(WindowKind::K(self.window.k)),
            "ktilde" => Ok(WindowKind::KTilde(self.window.k)),
            other => invalid(format!("unknown window kind {other:?}; expected perf, k or ktilde")),
        }
    }

    pub fn e_rule(&self) -> Result<ERule, ConfigError> {
        match self.window.e_rule.as_str() {
            "single" => Ok(ERule::Single),
            "per-parent" => Ok(ERule::PerParent),
            "keep" => Ok(ERule::Keep),
            other => invalid(format!("unknown e_rule {other:?}")),
        }
    }

    pub fn xi(&self) -> Result<XiChoice, ConfigError> {
        match self.patch.xi.as_str() {
            "identity" => Ok(XiChoice::Identity),
            "critical" => Ok(XiChoice::Critical),
            "random" => Ok(XiChoice::Random),
            other => invalid(format!("unknown xi {other:?}; expected identity, critical or random")),
        }
    }

    pub fn patch_level(&self) -> usize {
        self.patch.level.unwrap_or(self.window.cap)
    }
}

/// `"p/q"` or an integer.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((p, q)) => {
            let p: i128 = p.trim().parse().ok()?;
            let q: i128 = q.trim().parse().ok()?;
            (q != 0).then(|| Rational::new(p, q))
        }
        None => Some(Rational::from_integer(text.parse().ok()?)),
    }
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
[group]
kind = "Z"
base = 2
levels = 30
[window]
kind = "k"
k = 2
epsilon = "1/2"
partition_level = 2
cap = 4
"#;

    #[test]
    fn sample_parses_with_defaults() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.window_kind().unwrap(), WindowKind::K(2));
        assert_eq!(c.epsilon().unwrap(), Rational::new(1, 2));
        assert_eq!(c.moduli().unwrap()[..3], [2, 4, 8]);
        assert_eq!(c.patch_level(), 4);
        assert_eq!(c.e_rule().unwrap(), ERule::Single);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("epsilon = \"1/2\"", "epsilon = \"3/2\""),
            ("cap = 4", "cap = 4\na = [2]"),
            ("partition_level = 2", "partition_level = 5"),
            ("kind = \"Z\"", "kind = \"Q\""),
            ("base = 2", "moduli = [4, 6]"),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(RunConfig::parse(&text).is_err(), "{to}");
        }
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("999/1000"), Some(Rational::new(999, 1000)));
        assert_eq!(parse_rational(" 2 "), Some(Rational::from_integer(2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(format_rational(&Rational::new(2, 4)), "1/2");
    }
}
