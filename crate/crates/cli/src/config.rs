//! Flat sectioned `key = value` run configuration, with per-line
//! diagnostics and sweep expansion (comma-separated value lists on
//! numeric keys).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use quasilin::bvp::SolveConfig;
use quasilin::coefficients::Tail;
use quasilin::mesh::Geometry;

/// Parse-stage failure: reported with exit code 2.
#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(w, "line {}: {}", self.line, self.message)
        } else {
            write!(w, "{}", self.message)
        }
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug)]
struct Entry {
    raw: String,
    line: usize,
    used: std::cell::Cell<bool>,
}

impl Entry {
    fn pieces(&self) -> Vec<&str> {
        self.raw
            .split(',')
            .map(|v| v.trim())
            .filter(|v| !v.is_empty())
            .collect()
    }

    /// Value lists are sweepable only when every piece is numeric.
    fn numeric_list(&self) -> Option<Vec<&str>> {
        let pieces = self.pieces();
        if pieces.len() > 1 && pieces.iter().all(|p| p.parse::<f64>().is_ok()) {
            Some(pieces)
        } else {
            None
        }
    }
}

/// Parsed but untyped configuration.
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cfg = RawConfig::default();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(err(line_no, "empty section name"));
                }
                section = name.to_string();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err(line_no, "empty key"));
            }
            if section.is_empty() {
                return Err(err(line_no, format!("key `{key}` before any [section]")));
            }
            let value = value.trim();
            if value.is_empty() {
                return Err(err(line_no, format!("key `{key}` has no value")));
            }
            let prev = cfg.sections.get_mut(&section).unwrap().insert(
                key.to_string(),
                Entry {
                    raw: value.to_string(),
                    line: line_no,
                    used: std::cell::Cell::new(false),
                },
            );
            if prev.is_some() {
                return Err(err(line_no, format!("duplicate key `{section}.{key}`")));
            }
        }
        Ok(cfg)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.get(key)?;
        e.used.set(true);
        Some(e)
    }

    /// A single numeric-convertible value; a numeric list here means the
    /// config needs the sweep subcommand.
    fn single(&self, section: &str, key: &str) -> Result<Option<(String, usize)>, ParseError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => {
                if e.numeric_list().is_some() {
                    return Err(err(
                        e.line,
                        format!("`{section}.{key}` holds a value list; lists are only valid with the sweep subcommand"),
                    ));
                }
                Ok(Some((e.raw.clone(), e.line)))
            }
        }
    }

    fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ParseError> {
        match self.single(section, key)? {
            None => Ok(default),
            Some((v, line)) => v
                .parse::<f64>()
                .map_err(|_| err(line, format!("`{section}.{key}`: `{v}` is not a number"))),
        }
    }

    fn get_usize(&self, section: &str, key: &str, default: usize) -> Result<usize, ParseError> {
        match self.single(section, key)? {
            None => Ok(default),
            Some((v, line)) => v
                .parse::<usize>()
                .map_err(|_| err(line, format!("`{section}.{key}`: `{v}` is not an integer"))),
        }
    }

    fn get_str(&self, section: &str, key: &str, default: &str) -> Result<String, ParseError> {
        Ok(self
            .entry(section, key)
            .map(|e| e.raw.clone())
            .unwrap_or_else(|| default.to_string()))
    }

    /// Expands value lists into the Cartesian product of single-valued
    /// configurations, capped at 256 runs. Expansion order follows the
    /// sorted section/key order, so run numbering is deterministic.
    pub fn expand_sweep(&self) -> Result<Vec<RawConfig>, ParseError> {
        let mut axes: Vec<(&String, &String, Vec<String>)> = Vec::new();
        for (sname, keys) in &self.sections {
            for (kname, entry) in keys {
                if let Some(pieces) = entry.numeric_list() {
                    axes.push((sname, kname, pieces.iter().map(|s| s.to_string()).collect()));
                }
            }
        }
        let total: usize = axes.iter().map(|a| a.2.len()).product();
        if total > 256 {
            return Err(err(
                0,
                format!("sweep expands to {total} runs; the cap is 256"),
            ));
        }
        let mut runs = vec![self.clone_single()];
        for (sname, kname, values) in axes {
            let mut next = Vec::with_capacity(runs.len() * values.len());
            for run in &runs {
                for value in &values {
                    let mut r = run.clone_single();
                    let e = r
                        .sections
                        .get_mut(sname.as_str())
                        .unwrap()
                        .get_mut(kname.as_str())
                        .unwrap();
                    e.raw = value.clone();
                    next.push(r);
                }
            }
            runs = next;
        }
        Ok(runs)
    }

    fn clone_single(&self) -> RawConfig {
        let mut sections = BTreeMap::new();
        for (s, keys) in &self.sections {
            let mut out = BTreeMap::new();
            for (k, e) in keys {
                out.insert(
                    k.clone(),
                    Entry {
                        raw: e.raw.clone(),
                        line: e.line,
                        used: std::cell::Cell::new(false),
                    },
                );
            }
            sections.insert(s.clone(), out);
        }
        RawConfig { sections }
    }

    /// Keys that were never read by the typed extraction.
    fn unused_keys(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (s, keys) in &self.sections {
            for (k, e) in keys {
                if !e.used.get() {
                    out.push(format!("{s}.{k} (line {})", e.line));
                }
            }
        }
        out
    }
}

/// Which range the run targets: the main strongly singular range
/// `γ > 1` (full pipeline), or the weakly singular range `γ < 1`
/// (classifier only; the source tail integral diverges there).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseSpec {
    StrongSingularity,
    WeakSingularity,
}

#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub kind: String,
    pub mu: f64,
    pub gamma: f64,
    pub s0: f64,
    pub tail: Tail,
    pub case: CaseSpec,
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub family: FamilySpec,
    pub geometry: Geometry,
    pub mesh_n: usize,
    pub mesh_q: f64,
    pub transform_s_max: f64,
    pub transform_samples: usize,
    pub profile_ell: f64,
    pub profile_s_max: f64,
    pub solver: SolveConfig,
    pub window_min: Option<f64>,
    pub window_max: Option<f64>,
    pub out_dir: PathBuf,
    pub formats: Vec<String>,
}

/// Typed extraction; every error carries the offending line.
pub fn extract(raw: &RawConfig) -> Result<RunSpec, ParseError> {
    let kind = raw.get_str("family", "kind", "example")?;
    if kind != "example" {
        return Err(err(
            0,
            format!("family.kind `{kind}` is not a built-in (only `example`)"),
        ));
    }
    let mu = raw.get_f64("family", "mu", 0.0)?;
    let gamma = raw.get_f64("family", "gamma", 3.0)?;
    let s0 = raw.get_f64("family", "s0", 1.0)?;
    let tail_kind = raw.get_str("family", "tail", "bounded-blend")?;
    let tail = match tail_kind.as_str() {
        "bounded-blend" => Tail::BoundedBlend {
            a_min: raw.get_f64("family", "a_min", 0.1)?,
        },
        "power-tail" => Tail::PowerTail {
            k: raw.get_f64("family", "k", 0.0)?,
            a_inf: raw.get_f64("family", "a_inf", 1.0)?,
            p: raw.get_f64("family", "p", gamma)?,
            f_inf: raw.get_f64("family", "f_inf", 1.0)?,
        },
        other => {
            return Err(err(
                0,
                format!("family.tail `{other}` is not `bounded-blend` or `power-tail`"),
            ))
        }
    };
    let case = match raw.get_str("family", "case", "strong-singularity")?.as_str() {
        "strong-singularity" => CaseSpec::StrongSingularity,
        "weak-singularity" => CaseSpec::WeakSingularity,
        other => {
            return Err(err(
                0,
                format!("family.case `{other}` is not `strong-singularity` or `weak-singularity`"),
            ))
        }
    };

    let geometry = match raw.get_str("geometry", "kind", "interval")?.as_str() {
        "interval" => Geometry::Interval {
            length: raw.get_f64("geometry", "length", 1.0)?,
        },
        "ball" => Geometry::Ball {
            radius: raw.get_f64("geometry", "radius", 1.0)?,
            dim: raw.get_usize("geometry", "dim", 3)? as u32,
        },
        other => {
            return Err(err(
                0,
                format!("geometry.kind `{other}` is not `interval` or `ball`"),
            ))
        }
    };

    let solver = SolveConfig {
        eps0_factor: raw.get_f64("solver", "eps0_factor", 1e-2)?,
        eps_min: raw.get_f64("solver", "eps_min", 1e-10)?,
        newton_tol: raw.get_f64("solver", "newton_tol", 1e-11)?,
        max_iter: raw.get_usize("solver", "max_iter", 60)?,
        max_backtracks: raw.get_usize("solver", "max_backtracks", 40)?,
        initial: InitialFromStr(raw.get_str("solver", "initial", "super-profile")?).parse()?,
    };

    let window = |key: &str| -> Result<Option<f64>, ParseError> {
        let v = raw.get_str("analysis", key, "auto")?;
        if v == "auto" {
            Ok(None)
        } else {
            v.parse::<f64>()
                .map(Some)
                .map_err(|_| err(0, format!("analysis.{key}: `{v}` is not a number or `auto`")))
        }
    };

    let spec = RunSpec {
        family: FamilySpec {
            kind,
            mu,
            gamma,
            s0,
            tail,
            case,
        },
        geometry,
        mesh_n: raw.get_usize("mesh", "n", 512)?,
        mesh_q: raw.get_f64("mesh", "q", 2.0)?,
        transform_s_max: raw.get_f64("transform", "s_max", 20.0)?,
        transform_samples: raw.get_usize("transform", "n_samples", 1024)?,
        profile_ell: raw.get_f64("profile", "ell", 0.0)?,
        profile_s_max: raw.get_f64("profile", "s_max", 10.0)?,
        solver,
        window_min: window("window_min")?,
        window_max: window("window_max")?,
        out_dir: PathBuf::from(raw.get_str("output", "dir", "out")?),
        formats: raw
            .get_str("output", "formats", "csv,json")?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect(),
    };
    let unused = raw.unused_keys();
    if !unused.is_empty() {
        return Err(err(0, format!("unknown keys: {}", unused.join(", "))));
    }
    Ok(spec)
}

struct InitialFromStr(String);

impl InitialFromStr {
    fn parse(self) -> Result<quasilin::bvp::InitialIterate, ParseError> {
        match self.0.as_str() {
            "super-profile" => Ok(quasilin::bvp::InitialIterate::SuperProfile),
            "sub-profile" => Ok(quasilin::bvp::InitialIterate::SubProfile),
            other => Err(err(
                0,
                format!("solver.initial `{other}` is not `super-profile` or `sub-profile`"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# sample
[family]
mu = 0.5
gamma = 2.0

[mesh]
n = 128
q = 2.0
";

    #[test]
    fn parses_and_extracts_defaults() {
        let raw = RawConfig::parse(SAMPLE).unwrap();
        let spec = extract(&raw).unwrap();
        assert_eq!(spec.family.mu, 0.5);
        assert_eq!(spec.mesh_n, 128);
        assert_eq!(spec.transform_samples, 1024);
        assert!(matches!(spec.geometry, Geometry::Interval { length } if length == 1.0));
    }

    #[test]
    fn reports_line_of_bad_value() {
        let raw = RawConfig::parse("[mesh]\nn = soup\n").unwrap();
        let e = extract(&raw).unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RawConfig::parse("[family\n").is_err());
        assert!(RawConfig::parse("mu = 0.5\n").is_err());
        assert!(RawConfig::parse("[family]\nmu 0.5\n").is_err());
        assert!(RawConfig::parse("[family]\nmu = 1\nmu = 2\n").is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let raw = RawConfig::parse("[family]\nmuu = 0.5\n").unwrap();
        let e = extract(&raw).unwrap_err();
        assert!(e.message.contains("muu"));
    }

    #[test]
    fn list_values_require_sweep() {
        let raw = RawConfig::parse("[family]\ngamma = 1.5, 2.0\n").unwrap();
        assert!(extract(&raw).is_err());
        let runs = raw.expand_sweep().unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(extract(&runs[0]).unwrap().family.gamma, 1.5);
        assert_eq!(extract(&runs[1]).unwrap().family.gamma, 2.0);
    }

    #[test]
    fn sweep_cap() {
        let raw = RawConfig::parse(
            "[family]\ngamma = 1,2,3,4,5,6,7\nmu = 0.1,0.2,0.3,0.4,0.5,0.6,0.7\n[mesh]\nn = 64,128,256,512,1024,2048,4096\n",
        )
        .unwrap();
        assert!(raw.expand_sweep().is_err());
    }

    #[test]
    fn cartesian_order_is_deterministic() {
        let raw = RawConfig::parse("[family]\ngamma = 1.5, 2.0\nmu = 0.0, 0.25\n").unwrap();
        let runs = raw.expand_sweep().unwrap();
        let got: Vec<(f64, f64)> = runs
            .iter()
            .map(|r| {
                let s = extract(r).unwrap();
                (s.family.gamma, s.family.mu)
            })
            .collect();
        assert_eq!(
            got,
            vec![(1.5, 0.0), (1.5, 0.25), (2.0, 0.0), (2.0, 0.25)]
        );
    }
}
