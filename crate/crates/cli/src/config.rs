//! `key = value` run configuration and value parsers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fivebar_hybrid::design::DesignSearch;
use fivebar_hybrid::workspace::GridSpec;
use fivebar_hybrid::{AssemblyMode, DesignParams, Sign, WorkingMode, WorldPoint};

use crate::CliError;

/// Keys accepted in a config file; each matches a long flag.
pub const KEYS: [&str; 16] = [
    "command", "design", "grid", "joint-grid", "mode", "levels", "seed", "out", "theta",
    "assembly", "budget", "search", "samples", "start", "goal", "point",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// unknown or repeated keys are errors.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!("config line {}: unknown key {key:?}", n + 1)));
        }
        if out.insert(key.clone(), value.trim().to_owned()).is_some() {
            return Err(CliError::usage(format!("config line {}: repeated key {key:?}", n + 1)));
        }
    }
    Ok(out)
}

/// Flag values layered over config-file values.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> Self {
        let mut values = file;
        values.extend(flags);
        Self { values }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|s| parse(s).map_err(|e| CliError::usage(format!("--{key}: {e}"))))
            .transpose()
    }

    fn require<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        self.get(key, parse)?
            .ok_or_else(|| CliError::usage(format!("missing --{key}")))
    }

    pub fn design(&self) -> Result<DesignParams, CliError> {
        let [l0, l1, l2] = self.require("design", floats::<3>)?;
        DesignParams::new(l0, l1, l2).map_err(|e| CliError::usage(format!("--design: {e}")))
    }

    /// `--grid umin,umax,vmin,vmax,N`, or `N` alone for a grid around the design.
    pub fn grid(&self, design: &DesignParams, default_n: usize) -> Result<GridSpec, CliError> {
        let grid = match self.raw("grid") {
            None => GridSpec::around(design, default_n),
            Some(s) if !s.contains(',') => GridSpec::around(design, count(s).map_err(|e| CliError::usage(format!("--grid: {e}")))?),
            Some(s) => {
                let parts: Vec<&str> = s.split(',').collect();
                if parts.len() != 5 {
                    return Err(CliError::usage("--grid: expected umin,umax,vmin,vmax,N"));
                }
                let b = floats::<4>(&parts[..4].join(",")).map_err(|e| CliError::usage(format!("--grid: {e}")))?;
                let n = count(parts[4]).map_err(|e| CliError::usage(format!("--grid: {e}")))?;
                GridSpec::new(b[0], b[1], b[2], b[3], n)
            }
        };
        grid.map_err(|e| CliError::usage(format!("--grid: {e}")))
    }

    pub fn joint_grid(&self, default_n: usize) -> Result<GridSpec, CliError> {
        let n = self.get("joint-grid", count)?.unwrap_or(default_n);
        GridSpec::joint_space(n).map_err(|e| CliError::usage(format!("--joint-grid: {e}")))
    }

    pub fn mode(&self) -> Result<Option<WorkingMode>, CliError> {
        self.get("mode", |s| s.parse::<WorkingMode>())
    }

    /// `--mode start,goal` for planning.
    pub fn mode_pair(&self) -> Result<(WorkingMode, WorkingMode), CliError> {
        self.require("mode", |s| {
            let (a, b) = s.split_once(',').ok_or("expected start,goal modes, e.g. +-+,+++")?;
            Ok((a.parse()?, b.parse()?))
        })
    }

    pub fn levels(&self, default: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self.get("levels", float_list)?.unwrap_or_else(|| default.to_vec()))
    }

    pub fn seed(&self, default: u64) -> Result<u64, CliError> {
        Ok(self
            .get("seed", |s| s.trim().parse::<u64>().map_err(|e| e.to_string()))?
            .unwrap_or(default))
    }

    pub fn samples(&self, default: usize) -> Result<usize, CliError> {
        Ok(self.get("samples", count)?.unwrap_or(default))
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.raw("out").map(PathBuf::from)
    }

    pub fn theta(&self) -> Result<[f64; 3], CliError> {
        self.require("theta", floats::<3>)
    }

    pub fn assembly(&self) -> Result<AssemblyMode, CliError> {
        Ok(self
            .get("assembly", |s| match s.trim() {
                "+" | "+1" | "1" => Ok(AssemblyMode::POS),
                "-" | "-1" => Ok(AssemblyMode::NEG),
                other => Err(format!("expected + or -, got {other:?}")),
            })?
            .unwrap_or(AssemblyMode { gamma: Sign::Pos }))
    }

    pub fn budget(&self, default: f64) -> Result<f64, CliError> {
        Ok(self.get("budget", |s| floats::<1>(s).map(|v| v[0]))?.unwrap_or(default))
    }

    /// `--search l0min,l0max,l0steps,l1splits`.
    pub fn search(&self, default: DesignSearch) -> Result<DesignSearch, CliError> {
        Ok(self
            .get("search", |s| {
                let parts: Vec<&str> = s.split(',').collect();
                if parts.len() != 4 {
                    return Err("expected l0min,l0max,l0steps,l1splits".to_owned());
                }
                let b = floats::<2>(&parts[..2].join(","))?;
                Ok(DesignSearch::new(b[0], b[1], count(parts[2])?, count(parts[3])?))
            })?
            .unwrap_or(default))
    }

    pub fn point(&self, key: &str) -> Result<Option<WorldPoint>, CliError> {
        self.get(key, |s| floats::<3>(s).map(WorldPoint::from_array))
    }

    pub fn require_point(&self, key: &str) -> Result<WorldPoint, CliError> {
        self.point(key)?
            .ok_or_else(|| CliError::usage(format!("missing --{key}")))
    }
}

fn float(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let v: f64 = t.parse().map_err(|_| format!("not a number: {t:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {t:?}"))
    }
}

pub fn floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v = float_list(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

pub fn float_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(float).collect()
}

fn count(s: &str) -> Result<usize, String> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("not a non-negative integer: {:?}", s.trim()))
}
