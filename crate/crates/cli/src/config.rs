//! Run configuration: a flat `key = value` file overlaid by command-line
//! flags.
//!
//! ```text
//! # modulation sweep, three levels
//! eps = 1e-5
//! levels = -1, 0, 1
//! freq_a = 1, 5, 7, 11, 13
//! freq_b = 1, 5, 7, 11, 13
//! m_steps = 33
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use shm_core::{HarmonicSpec, LevelSet, Method, SolverConfig, DEFAULT_GRID};

use crate::error::CliError;

/// Environment variable overriding the default grid size.
pub const GRID_ENV: &str = "SHM_GRID";

/// Every key accepted in a config file; flags use the same names with `-`.
pub const KEYS: &[&str] = &[
    "eps",
    "grid",
    "levels",
    "freq_a",
    "freq_b",
    "target_a",
    "target_b",
    "mu_schedule",
    "grad_tol",
    "max_iter",
    "snap_tol",
    "min_dwell",
    "method",
    "m_min",
    "m_max",
    "m_steps",
    "warm_start",
    "sample_stride",
    "out",
    "summary",
    "format",
];

/// Raw key-value settings; later layers override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    n + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse list entry `{s}`")))
        })
        .collect()
}

/// Layout of the JSON result document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Pretty,
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRange {
    pub m_min: f64,
    pub m_max: f64,
    pub m_steps: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        if self.m_steps == 1 {
            return vec![self.m_min];
        }
        let span = self.m_max - self.m_min;
        (0..self.m_steps)
            .map(|i| {
                if i + 1 == self.m_steps {
                    self.m_max
                } else {
                    self.m_min + span * i as f64 / (self.m_steps - 1) as f64
                }
            })
            .collect()
    }
}

/// Fully resolved configuration for `solve` or `sweep`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub freq_a: Vec<u32>,
    pub freq_b: Vec<u32>,
    pub target_a: Vec<f64>,
    pub target_b: Vec<f64>,
    pub solver: SolverConfig,
    pub sweep: SweepRange,
    pub warm_start: bool,
    pub sample_stride: usize,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub format: OutputFormat,
}

const DEFAULT_FREQS: [u32; 5] = [1, 5, 7, 11, 13];

impl RunConfig {
    /// Resolves settings against defaults. `env_grid` is the value of
    /// [`GRID_ENV`], if set.
    pub fn resolve(settings: &Settings, env_grid: Option<&str>) -> Result<Self, CliError> {
        let levels = match settings.parse_list::<f64>("levels")? {
            Some(values) => LevelSet::from_values(&values)?,
            None => LevelSet::uniform(3)?,
        };
        let epsilon = settings.parse_value("eps")?.unwrap_or(1e-5);
        let mut solver = SolverConfig::new(levels, epsilon);

        let env_grid = env_grid
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("{GRID_ENV}: cannot parse `{v}`")))
            })
            .transpose()?;
        solver.grid_size = settings.parse_value("grid")?.or(env_grid).unwrap_or(DEFAULT_GRID);
        if let Some(schedule) = settings.parse_list("mu_schedule")? {
            solver.mu_schedule = schedule;
        }
        solver.grad_tol = settings.parse_value("grad_tol")?;
        if let Some(v) = settings.parse_value("max_iter")? {
            solver.max_iter = v;
        }
        if let Some(v) = settings.parse_value("snap_tol")? {
            solver.snap_tol = v;
        }
        if let Some(v) = settings.parse_value("min_dwell")? {
            solver.min_dwell = v;
        }
        if let Some(method) = settings.get("method") {
            solver.method = match method {
                "newton" => Method::Newton,
                "bb" | "barzilai-borwein" => Method::BarzilaiBorwein,
                other => return Err(CliError::Config(format!("`method`: unknown method `{other}`"))),
            };
        }
        solver.validate()?;

        let freq_a = settings.parse_list("freq_a")?.unwrap_or_else(|| DEFAULT_FREQS.to_vec());
        let freq_b = settings.parse_list("freq_b")?.unwrap_or_else(|| DEFAULT_FREQS.to_vec());
        let target_a = settings
            .parse_list("target_a")?
            .unwrap_or_else(|| vec![0.0; freq_a.len()]);
        let target_b = settings
            .parse_list("target_b")?
            .unwrap_or_else(|| vec![0.0; freq_b.len()]);

        let sweep = SweepRange {
            m_min: settings.parse_value("m_min")?.unwrap_or(-0.8),
            m_max: settings.parse_value("m_max")?.unwrap_or(0.8),
            m_steps: settings.parse_value("m_steps")?.unwrap_or(33),
        };
        if !(sweep.m_min <= sweep.m_max) {
            return Err(CliError::Config(format!(
                "m_min ({}) must not exceed m_max ({})",
                sweep.m_min, sweep.m_max
            )));
        }
        if sweep.m_steps == 0 {
            return Err(CliError::Config("m_steps must be at least 1".into()));
        }
        let sample_stride = settings.parse_value("sample_stride")?.unwrap_or(1);
        if sample_stride == 0 {
            return Err(CliError::Config("sample_stride must be at least 1".into()));
        }

        let format = match settings.get("format") {
            None | Some("pretty") => OutputFormat::Pretty,
            Some("compact") => OutputFormat::Compact,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "`format`: expected pretty or compact, got `{other}`"
                )))
            }
        };

        let config = Self {
            freq_a,
            freq_b,
            target_a,
            target_b,
            solver,
            sweep,
            warm_start: settings.parse_value("warm_start")?.unwrap_or(true),
            sample_stride,
            out: settings.get("out").map(PathBuf::from),
            summary: settings.get("summary").map(PathBuf::from),
            format,
        };
        config.spec()?;
        Ok(config)
    }

    pub fn spec(&self) -> Result<HarmonicSpec, CliError> {
        Ok(HarmonicSpec::new(
            self.freq_a.clone(),
            self.freq_b.clone(),
            self.target_a.clone(),
            self.target_b.clone(),
        )?)
    }

    /// Targets `(m, 0, …, 0)` on both coefficient families.
    pub fn modulation_spec(&self, m: f64) -> Result<HarmonicSpec, CliError> {
        let target = |len: usize| {
            let mut t = vec![0.0; len];
            if let Some(first) = t.first_mut() {
                *first = m;
            }
            t
        };
        Ok(HarmonicSpec::new(
            self.freq_a.clone(),
            self.freq_b.clone(),
            target(self.freq_a.len()),
            target(self.freq_b.len()),
        )?)
    }

    /// `√(4επ‖L‖_∞)` with `‖L‖_∞ = 1`.
    pub fn residual_bound(&self) -> f64 {
        (4.0 * self.solver.epsilon * std::f64::consts::PI).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&Settings::default(), None).unwrap();
        assert_eq!(c.freq_a, vec![1, 5, 7, 11, 13]);
        assert_eq!(c.target_b, vec![0.0; 5]);
        assert_eq!(c.solver.epsilon, 1e-5);
        assert_eq!(c.solver.grid_size, DEFAULT_GRID);
        assert_eq!(c.solver.levels.values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(c.sweep.values().len(), 33);
        assert!(c.warm_start);
        assert!((c.residual_bound() - 1.1209982432795857e-2).abs() < 1e-15);
    }

    #[test]
    fn file_parsing_and_overrides() {
        let mut s = Settings::parse(
            "# comment\neps = 1e-4\nlevels = -1, -0.5, 0, 0.5, 1  # five\nfreq-a = 1,3\ntarget_a = 0.2, 0.1\ngrid=500\n",
        )
        .unwrap();
        let mut flags = Settings::default();
        flags.set("grid", "800");
        s.overlay(&flags);
        let c = RunConfig::resolve(&s, Some("900")).unwrap();
        assert_eq!(c.solver.epsilon, 1e-4);
        assert_eq!(c.solver.levels.len(), 5);
        assert_eq!(c.solver.grid_size, 800);
        assert_eq!(c.freq_a, vec![1, 3]);
        assert_eq!(c.target_a, vec![0.2, 0.1]);
    }

    #[test]
    fn env_grid_applies_when_unset() {
        let c = RunConfig::resolve(&Settings::default(), Some("1234")).unwrap();
        assert_eq!(c.solver.grid_size, 1234);
        assert!(RunConfig::resolve(&Settings::default(), Some("many")).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Settings::parse("eps 1e-5").is_err());
        assert!(Settings::parse("colour = red").is_err());
        for text in [
            "eps = -1",
            "eps = abc",
            "levels = -1, 0.3, 1",
            "freq_a = 2",
            "target_a = 1, 2",
            "m_min = 1\nm_max = 0",
            "m_steps = 0",
            "method = simplex",
            "format = xml",
            "mu_schedule = 1e-3, 1e-2",
        ] {
            let s = Settings::parse(text).unwrap();
            assert!(RunConfig::resolve(&s, None).is_err(), "{text}");
        }
    }

    #[test]
    fn sweep_values() {
        let r = SweepRange {
            m_min: 0.0,
            m_max: 0.0,
            m_steps: 1,
        };
        assert_eq!(r.values(), vec![0.0]);
        let r = SweepRange {
            m_min: -0.8,
            m_max: 0.8,
            m_steps: 33,
        };
        let v = r.values();
        assert_eq!(v[0], -0.8);
        assert_eq!(v[16], 0.0);
        assert_eq!(v[32], 0.8);
    }
}
