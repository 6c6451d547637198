//! `key = value` run configuration.
//!
//! Values are SI base units. `#` starts a comment anywhere on a line.
//! Unknown and repeated keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use crate::circuit::CircuitParams;
use crate::control::DEFAULT_FC;
use crate::error::{Error, Result};
use crate::sim::SimConfig;

const REQUIRED: [&str; 7] = ["lf", "cf", "co", "r", "fs", "ils_amp", "vo_nominal"];
const OPTIONAL: [&str; 7] = ["ls", "cs", "dt", "ss_tol", "fc", "kp", "ki"];

/// Everything a command needs to run one circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub params: CircuitParams,
    pub sim: SimConfig,
    pub fc: f64,
    pub kp: Option<f64>,
    pub ki: Option<f64>,
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, (f64, usize)>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key `{key}`"),
                });
            }
            let v: f64 = value.trim().parse().map_err(|_| Error::Config {
                line,
                msg: format!("`{}` is not a number", value.trim()),
            })?;
            if let Some((_, first)) = values.insert(key.clone(), (v, line)) {
                return Err(Error::Config {
                    line,
                    msg: format!("`{key}` already set on line {first}"),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies a `key=value` override; later overrides win.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let parsed = Self::parse(assignment)?;
        if parsed.values.is_empty() {
            return Err(Error::Usage(format!("empty override `{assignment}`")));
        }
        for (k, (v, _)) in parsed.values {
            self.values.insert(k, (v, 0));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).map(|v| v.0)
    }

    /// Builds and validates the run configuration.
    pub fn resolve(&self) -> Result<RunConfig> {
        let need = |k: &'static str| {
            self.get(k)
                .ok_or_else(|| Error::Usage(format!("config is missing `{k}`")))
        };
        let params = CircuitParams {
            lf: need("lf")?,
            cf: need("cf")?,
            co: need("co")?,
            r: need("r")?,
            fs: need("fs")?,
            ils_amp: need("ils_amp")?,
            ls: self.get("ls"),
            cs: self.get("cs"),
            vo_nominal: need("vo_nominal")?,
        };
        params.validate()?;
        let mut sim = SimConfig::for_fs(params.fs);
        if let Some(dt) = self.get("dt") {
            sim.dt = dt;
        }
        if let Some(tol) = self.get("ss_tol") {
            sim.ss_tolerance = tol;
        }
        sim.validate(params.fs)?;
        let fc = self.get("fc").unwrap_or(DEFAULT_FC);
        if !(fc > 0.0 && fc.is_finite()) {
            return Err(Error::OutOfRange {
                name: "fc",
                value: fc,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let kp = self.get("kp");
        let ki = self.get("ki");
        if kp.is_some() != ki.is_some() {
            return Err(Error::Usage("set both kp and ki, or neither".into()));
        }
        for (name, v) in [("kp", kp), ("ki", ki)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Invalid(vec![crate::error::Violation::NonPositiveValue(name)]));
                }
            }
        }
        Ok(RunConfig {
            params,
            sim,
            fc,
            kp,
            ki,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROTO: &str = "\
# prototype
lf = 5.3e-6
cf = 76e-9   # switch capacitor
co = 3300e-6
r = 36
fs = 200e3
ils_amp = 0.8
vo_nominal = 24
";

    #[test]
    fn parses_prototype() {
        let cfg = ConfigMap::parse(PROTO).unwrap().resolve().unwrap();
        assert_eq!(cfg.params.cf, 76e-9);
        assert_eq!(cfg.params.ls, None);
        assert_eq!(cfg.fc, DEFAULT_FC);
        assert_eq!(cfg.sim.dt, 1.0 / 200e3 / 1000.0);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let e = ConfigMap::parse("lf = 1\nfoo = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = ConfigMap::parse("lf = 1\nlf = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = ConfigMap::parse("lf 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
        let e = ConfigMap::parse("lf = abc\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
    }

    #[test]
    fn missing_and_invalid_values() {
        let e = ConfigMap::parse("lf = 1\n").unwrap().resolve().unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
        let mut m = ConfigMap::parse(PROTO).unwrap();
        m.set("r = -1").unwrap();
        assert!(matches!(m.resolve(), Err(Error::Invalid(_))));
    }

    #[test]
    fn overrides_win() {
        let mut m = ConfigMap::parse(PROTO).unwrap();
        m.set("r=48").unwrap();
        m.set("kp = 0.5").unwrap();
        assert!(m.resolve().is_err());
        m.set("ki=3").unwrap();
        let cfg = m.resolve().unwrap();
        assert_eq!(cfg.params.r, 48.0);
        assert_eq!((cfg.kp, cfg.ki), (Some(0.5), Some(3.0)));
        assert!(m.set("bogus=1").is_err());
    }

    #[test]
    fn coarse_step_rejected() {
        let mut m = ConfigMap::parse(PROTO).unwrap();
        m.set("dt = 1e-7").unwrap();
        assert!(m.resolve().is_err());
    }
}
