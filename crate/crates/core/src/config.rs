//! Run configuration: command-line flags layered over a `key = value` file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_REFINE: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Estimates,
    Rigidity,
    Spectrum,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Estimates => "estimates",
            Suite::Rigidity => "rigidity",
            Suite::Spectrum => "spectrum",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identities" => Ok(Suite::Identities),
            "estimates" => Ok(Suite::Estimates),
            "rigidity" => Ok(Suite::Rigidity),
            "spectrum" => Ok(Suite::Spectrum),
            other => Err(Error::Parse(format!("unknown suite '{other}'"))),
        }
    }
}

/// How a scan chooses `b` from `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BRule {
    /// `b = a + offset`
    Offset(f64),
    /// `b` held fixed
    Fixed(f64),
}

impl BRule {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            BRule::Offset(c) => a + c,
            BRule::Fixed(b) => b,
        }
    }
}

impl fmt::Display for BRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BRule::Offset(c) if *c < 0.0 => write!(f, "a-{}", -c),
            BRule::Offset(c) => write!(f, "a+{c}"),
            BRule::Fixed(b) => write!(f, "{b}"),
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("{key}: '{s}' is not finite")));
    }
    Ok(v)
}

fn parse_int<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: '{s}' is not a non-negative integer")))
}

/// Accepts `a`, `a+c`, `a-c` or a plain number.
impl FromStr for BRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(rest) = t.strip_prefix('a') {
            if rest.is_empty() {
                return Ok(BRule::Offset(0.0));
            }
            if let Some(c) = rest.strip_prefix('+') {
                return Ok(BRule::Offset(parse_f64("b_rule", c)?));
            }
            if let Some(c) = rest.strip_prefix('-') {
                return Ok(BRule::Offset(-parse_f64("b_rule", c)?));
            }
            return Err(Error::Parse(format!("b_rule: cannot read '{s}'")));
        }
        Ok(BRule::Fixed(parse_f64("b_rule", &t)?))
    }
}

/// Every setting that flags or a config file may carry. `None` means unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConfigValues {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub d: Option<u32>,
    pub n: Option<f64>,
    pub suite: Option<Suite>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub angular: Option<usize>,
    pub refine: Option<u32>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub a_step: Option<f64>,
    pub b_rule: Option<BRule>,
    pub w0: Option<f64>,
    pub s_max: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_steps: Option<usize>,
    pub k_max: Option<u32>,
    pub fields: Option<usize>,
}

pub const KEYS: &[&str] = &[
    "a", "b", "d", "n", "suite", "out", "format", "seed", "grid", "angular", "refine", "a_min",
    "a_max", "a_step", "b_rule", "w0", "s_max", "lambda", "alpha_min", "alpha_max",
    "alpha_steps", "k_max", "fields",
];

macro_rules! overlay_fields {
    ($base:ident, $over:ident, $($f:ident),*) => {
        ConfigValues { $($f: $over.$f.or($base.$f)),* }
    };
}

impl ConfigValues {
    /// `over` wins wherever it is set.
    pub fn overlay(self, over: ConfigValues) -> ConfigValues {
        let base = self;
        overlay_fields!(
            base, over, a, b, d, n, suite, out, format, seed, grid, angular, refine, a_min, a_max,
            a_step, b_rule, w0, s_max, lambda, alpha_min, alpha_max, alpha_steps, k_max, fields
        )
    }

    /// Sets one key; dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "a" => self.a = Some(parse_f64(k, value)?),
            "b" => self.b = Some(parse_f64(k, value)?),
            "d" => self.d = Some(parse_int(k, value)?),
            "n" => self.n = Some(parse_f64(k, value)?),
            "suite" => self.suite = Some(value.parse()?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "format" => self.format = Some(value.parse()?),
            "seed" => self.seed = Some(parse_int(k, value)?),
            "grid" => self.grid = Some(parse_int(k, value)?),
            "angular" => self.angular = Some(parse_int(k, value)?),
            "refine" => self.refine = Some(parse_int(k, value)?),
            "a_min" => self.a_min = Some(parse_f64(k, value)?),
            "a_max" => self.a_max = Some(parse_f64(k, value)?),
            "a_step" => self.a_step = Some(parse_f64(k, value)?),
            "b_rule" => self.b_rule = Some(value.parse()?),
            "w0" => self.w0 = Some(parse_f64(k, value)?),
            "s_max" => self.s_max = Some(parse_f64(k, value)?),
            "lambda" => self.lambda = Some(parse_f64(k, value)?),
            "alpha_min" => self.alpha_min = Some(parse_f64(k, value)?),
            "alpha_max" => self.alpha_max = Some(parse_f64(k, value)?),
            "alpha_steps" => self.alpha_steps = Some(parse_int(k, value)?),
            "k_max" => self.k_max = Some(parse_int(k, value)?),
            "fields" => self.fields = Some(parse_int(k, value)?),
            _ => return Err(Error::Parse(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn refine_or_default(&self) -> u32 {
        self.refine.unwrap_or(DEFAULT_REFINE)
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped;
/// a repeated key keeps its last value.
pub fn parse_config(text: &str) -> Result<ConfigValues> {
    let mut cfg = ConfigValues::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        if value.trim().is_empty() {
            return Err(Error::Parse(format!("line {}: empty value for '{}'", lineno + 1, key.trim())));
        }
        cfg.set(key, value)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ConfigValues> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file() {
        let cfg = parse_config(
            "# scan\n a = -0.5\nb=0\n\nd = 3  # three\nb-rule = a+0.5\nformat = json\nsuite=rigidity\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.a, Some(-0.5));
        assert_eq!(cfg.b, Some(0.0));
        assert_eq!(cfg.d, Some(3));
        assert_eq!(cfg.b_rule, Some(BRule::Offset(0.5)));
        assert_eq!(cfg.format, Some(Format::Json));
        assert_eq!(cfg.suite, Some(Suite::Rigidity));
        assert_eq!(cfg.seed_or_default(), 7);
        assert_eq!(cfg.refine_or_default(), DEFAULT_REFINE);
    }

    #[test]
    fn rejects_bad_lines() {
        for bad in ["a", "a = x", "zzz = 1", "d = -1", "d = 2.5", "a = inf", "format = xml", "b =  "] {
            let e = parse_config(bad).unwrap_err();
            assert!(matches!(e, Error::Parse(_)), "{bad}: {e:?}");
        }
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = parse_config("a = 1\nb = 2\nseed = 3").unwrap();
        let flags = ConfigValues {
            a: Some(-1.0),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.a, Some(-1.0));
        assert_eq!(merged.b, Some(2.0));
        assert_eq!(merged.seed, Some(3));
    }

    #[test]
    fn b_rules() {
        assert_eq!("a".parse::<BRule>().unwrap(), BRule::Offset(0.0));
        assert_eq!("a - 0.25".parse::<BRule>().unwrap(), BRule::Offset(-0.25));
        assert_eq!("0.3".parse::<BRule>().unwrap(), BRule::Fixed(0.3));
        assert!("b+1".parse::<BRule>().is_err());
        assert_eq!(BRule::Offset(0.5).apply(-1.0), -0.5);
        for r in [BRule::Offset(0.5), BRule::Offset(-0.25), BRule::Fixed(0.3)] {
            assert_eq!(r.to_string().parse::<BRule>().unwrap(), r);
        }
    }

    #[test]
    fn every_key_is_settable() {
        let mut cfg = ConfigValues::default();
        for k in KEYS {
            let v = match *k {
                "suite" => "spectrum",
                "format" => "csv",
                "b_rule" => "a+1",
                "out" => "x.csv",
                _ => "3",
            };
            cfg.set(k, v).unwrap();
        }
        assert_eq!(cfg.fields, Some(3));
        assert_eq!(cfg.out, Some(PathBuf::from("x.csv")));
    }
}
