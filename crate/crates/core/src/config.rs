//! Run configuration: INI-style `[section]` headers, `key = value` lines and
//! `#` comments.  Absent keys take their defaults; unknown keys are errors.

use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::geometry::{BaseBackend, GeometrySpec};

/// How a torus configuration is evolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Full product grid.
    Full,
    /// Two factor flows for a product-split initial potential.
    Reduced,
}

impl FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RunMode::Full),
            "reduced" => Ok(RunMode::Reduced),
            o => Err(Error::config("mode", format!("unknown run mode `{o}` (full, reduced)"))),
        }
    }
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Full => "full",
            RunMode::Reduced => "reduced",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub fit_window: (f64, f64),
    /// Base-index stride of the fiber sample set; `None` spreads 8 points evenly.
    pub fiber_stride: Option<usize>,
    /// Allowed growth of each bounded monitor after `t = 1`.
    pub blow_up_factor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { fit_window: (2.0, 6.0), fiber_stride: None, blow_up_factor: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Snapshot every this many samples; `0` writes only the final state.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), snapshot_every: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub flow: FlowParams,
    pub mode: Option<RunMode>,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Full runs unless asked otherwise; the octagon backend is always reduced.
    pub fn run_mode(&self) -> RunMode {
        match self.geometry.base_backend {
            BaseBackend::BolzaOctagon => RunMode::Reduced,
            BaseBackend::TorusSurrogate => self.mode.unwrap_or(RunMode::Full),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.flow.validate()?;
        let (t0, t1) = self.analysis.fit_window;
        if !(t1 > t0 && t0 >= 1.0) {
            return Err(Error::config("fit_window", "window must satisfy t1 > t0 >= 1"));
        }
        if self.analysis.fiber_stride == Some(0) {
            return Err(Error::config("fiber_stride", "stride must be positive"));
        }
        if !(self.analysis.blow_up_factor >= 1.0) {
            return Err(Error::config("blow_up_factor", "factor must be >= 1"));
        }
        if self.geometry.base_backend == BaseBackend::BolzaOctagon && self.mode == Some(RunMode::Full) {
            return Err(Error::config("mode", "the octagon backend only runs in reduced mode"));
        }
        Ok(())
    }

    /// The same configuration in the text format, every key written out.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let f = &self.flow;
        let a = &self.analysis;
        let mut s = String::new();
        s += "[geometry]\n";
        s += &format!("base_backend = {}\n", g.base_backend.name());
        s += &format!("m = {}\nn = {}\n", g.m, g.n);
        s += &format!("fiber_modulus = {}\n", g.fiber_modulus);
        s += &format!("twist_amplitude = {:?}\ntwist_level = {:?}\n", g.twist_amplitude, g.twist_level);
        s += &format!("base_grid = {}\nfiber_grid = {}\n", g.base_grid, g.fiber_grid);
        s += &format!("initial_potential = {}\n", g.initial_potential);
        s += &format!("initial_base_scale = {:?}\ninitial_fiber_scale = {:?}\n", g.initial_base_scale, g.initial_fiber_scale);
        s += "\n[flow]\n";
        s += &format!("t_end = {:?}\ndt_max = {:?}\nc_cfl = {:?}\ndt_sample = {:?}\n", f.t_end, f.dt_max, f.c_cfl, f.dt_sample);
        s += &format!("positivity_threshold = {:?}\n", f.positivity_threshold);
        s += &format!("integrator = {}\nmax_halvings = {}\n", f.integrator.name(), f.max_halvings);
        s += &format!("mode = {}\n", self.run_mode().name());
        s += "\n[analysis]\n";
        s += &format!("fit_window = {:?}, {:?}\n", a.fit_window.0, a.fit_window.1);
        if let Some(st) = a.fiber_stride {
            s += &format!("fiber_stride = {st}\n");
        }
        s += &format!("blow_up_factor = {:?}\n", a.blow_up_factor);
        s += "\n[output]\n";
        s += &format!("directory = {}\nsnapshot_every = {}\n", self.output.directory.display(), self.output.snapshot_every);
        s
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((parse_num(key, a)?, parse_num(key, b)?)),
        _ => Err(Error::config(key, format!("expected `t0, t1`, got `{v}`"))),
    }
}

fn apply(cfg: &mut RunConfig, section: &str, key: &str, v: &str) -> Result<()> {
    let g = &mut cfg.geometry;
    let f = &mut cfg.flow;
    match (section, key) {
        ("geometry", "base_backend") => g.base_backend = v.parse()?,
        ("geometry", "m") => g.m = parse_num(key, v)?,
        ("geometry", "n") => g.n = parse_num(key, v)?,
        ("geometry", "fiber_modulus") => {
            g.fiber_modulus = Complex64::from_str(&v.replace(' ', ""))
                .map_err(|_| Error::config(key, format!("cannot parse complex number `{v}` (use e.g. 0.5+1.2i)")))?
        }
        ("geometry", "twist_amplitude") => g.twist_amplitude = parse_num(key, v)?,
        ("geometry", "twist_level") => g.twist_level = parse_num(key, v)?,
        ("geometry", "base_grid") => g.base_grid = parse_num(key, v)?,
        ("geometry", "fiber_grid") => g.fiber_grid = parse_num(key, v)?,
        ("geometry", "initial_potential") => g.initial_potential = v.parse()?,
        ("geometry", "initial_base_scale") => g.initial_base_scale = parse_num(key, v)?,
        ("geometry", "initial_fiber_scale") => g.initial_fiber_scale = parse_num(key, v)?,
        ("flow", "t_end") => f.t_end = parse_num(key, v)?,
        ("flow", "dt_max") => f.dt_max = parse_num(key, v)?,
        ("flow", "c_cfl") => f.c_cfl = parse_num(key, v)?,
        ("flow", "dt_sample") => f.dt_sample = parse_num(key, v)?,
        ("flow", "positivity_threshold") => f.positivity_threshold = parse_num(key, v)?,
        ("flow", "integrator") => f.integrator = v.parse()?,
        ("flow", "max_halvings") => f.max_halvings = parse_num(key, v)?,
        ("flow", "mode") => cfg.mode = Some(v.parse()?),
        ("analysis", "fit_window") => cfg.analysis.fit_window = parse_pair(key, v)?,
        ("analysis", "fiber_stride") => cfg.analysis.fiber_stride = Some(parse_num(key, v)?),
        ("analysis", "blow_up_factor") => cfg.analysis.blow_up_factor = parse_num(key, v)?,
        ("output", "directory") => cfg.output.directory = PathBuf::from(v),
        ("output", "snapshot_every") => cfg.output.snapshot_every = parse_num(key, v)?,
        _ => return Err(Error::config(key, format!("unknown key in [{section}]"))),
    }
    Ok(())
}

fn at_line(err: Error, line: usize, key: &str) -> Error {
    match err {
        Error::ConfigInvalid { message, key: k, .. } => {
            Error::ConfigInvalid { line, key: if k.is_empty() { key.to_string() } else { k }, message }
        }
        other => Error::ConfigInvalid { line, key: key.to_string(), message: other.to_string() },
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section: Option<String> = None;
    let mut seen = std::collections::HashSet::new();
    let mut line_of = std::collections::HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::ConfigInvalid { line, key: String::new(), message: format!("bad section header `{body}`") })?
                .trim();
            if !matches!(name, "geometry" | "flow" | "analysis" | "output") {
                return Err(Error::ConfigInvalid { line, key: name.to_string(), message: "unknown section".into() });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::ConfigInvalid { line, key: String::new(), message: format!("expected `key = value`, got `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| Error::ConfigInvalid { line, key: key.to_string(), message: "key outside any section".into() })?;
        if !seen.insert((sec.to_string(), key.to_string())) {
            return Err(Error::ConfigInvalid { line, key: key.to_string(), message: "duplicate key".into() });
        }
        line_of.insert(key.to_string(), line);
        apply(&mut cfg, sec, key, value).map_err(|e| at_line(e, line, key))?;
    }
    cfg.validate().map_err(|e| match e {
        Error::ConfigInvalid { key, message, .. } => {
            let line = line_of.get(&key).copied().unwrap_or(0);
            Error::ConfigInvalid { line, key, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Integrator;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.geometry.base_grid, c.geometry.fiber_grid), (32, 32));
        assert_eq!(c.flow.t_end, 8.0);
        assert_eq!(c.geometry.base_backend, BaseBackend::TorusSurrogate);
    }

    #[test]
    fn octagon_config_echoes_values() {
        let c = parse_config("[geometry]\nbase_backend = bolza_octagon\nfiber_grid = 16\n").unwrap();
        assert_eq!(c.geometry.base_backend, BaseBackend::BolzaOctagon);
        assert_eq!(c.geometry.fiber_grid, 16);
        assert_eq!(c.run_mode(), RunMode::Reduced);
    }

    #[test]
    fn negative_twist_is_rejected_with_line() {
        let err = parse_config("# comment\n[geometry]\ntwist_amplitude = -1\n").unwrap_err();
        match err {
            Error::ConfigInvalid { line, key, .. } => assert_eq!((line, key.as_str()), (3, "twist_amplitude")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(matches!(parse_config("[flow]\nspeed = 3\n"), Err(Error::ConfigInvalid { line: 2, .. })));
        assert!(matches!(parse_config("[plots]\n"), Err(Error::ConfigInvalid { line: 1, .. })));
        assert!(matches!(parse_config("t_end = 3\n"), Err(Error::ConfigInvalid { line: 1, .. })));
        assert!(matches!(parse_config("[flow]\nt_end = 3\nt_end = 4\n"), Err(Error::ConfigInvalid { line: 3, .. })));
    }

    #[test]
    fn text_round_trip() {
        let text = "[geometry]\nfiber_modulus = 0.25+1.5i\ninitial_potential = prod(0.05; 1,0,1,0)\nbase_grid = 16\n\
                    [flow]\nintegrator = rk4\ndt_sample = 0.1\n[analysis]\nfit_window = 1.5, 5\nfiber_stride = 3\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.flow.integrator, Integrator::Rk4);
        assert_eq!(c.geometry.fiber_modulus, Complex64::new(0.25, 1.5));
        assert_eq!(parse_config(&c.to_text()).unwrap().geometry, c.geometry);
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!((again.flow, again.analysis), (c.flow.clone(), c.analysis.clone()));
    }
}
