//! Line-oriented configuration: `[section]` headers, `key = value` lines
//! and `#` comments.
//!
//! ```text
//! [noise]
//! sigma1 = 0.5
//! sigma2 = 0.5
//! source = normal 1.0 1.0     # law, intensity, scale
//! step = 0.001
//!
//! [experiment]
//! horizons = 100, 200, 500, 1000
//! ```
//!
//! The digest is taken over a canonical rendering of the parsed entries, so
//! it does not change with spacing, comments or blank lines.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::levy::{ImpulseSource, JumpLaw, LevyNoiseSpec, Step};
use crate::risk::{DeltaRule, ExperimentConfig, GridRule, ShrinkageRule, PAPER_EVAL_POINTS};
use crate::selection::{GridParams, PenaltyNorm};
use crate::signal::PeriodicSignal;

pub const SECTIONS: [&str; 5] = ["noise", "signal", "grid", "shrinkage", "experiment"];

/// A configuration problem, located by section and key where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: None,
            message: message.into(),
        }
    }

    fn key(section: &str, key: &str, message: impl fmt::Display) -> Self {
        ConfigError {
            line: None,
            key: Some(format!("[{section}] {key}")),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// Parsed sections in file order, before interpretation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, Vec<Entry>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{body}`")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::at(
                        line,
                        format!("unknown section [{name}], expected one of {}", SECTIONS.join(", ")),
                    ));
                }
                if sections.contains_key(name) {
                    return Err(ConfigError::at(line, format!("section [{name}] appears twice")));
                }
                sections.insert(name.to_string(), Vec::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{body}`")))?;
            let section = current
                .as_ref()
                .ok_or_else(|| ConfigError::at(line, "key outside of any section"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::at(line, "empty key"));
            }
            let value = value.split_whitespace().collect::<Vec<_>>().join(" ");
            let entries = sections.get_mut(section).expect("section was inserted");
            if key != "source" && entries.iter().any(|e| e.key == key) {
                return Err(ConfigError::at(line, format!("[{section}] {key} given twice")));
            }
            entries.push(Entry {
                key: key.to_string(),
                value,
                line,
            });
        }
        Ok(RawConfig { sections })
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    /// `section.key=value` lines in section order; entry order is kept
    /// within a section since repeated `source` keys are ordered.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for name in SECTIONS {
            if let Some(entries) = self.sections.get(name) {
                out.push_str(&format!("[{name}]\n"));
                for e in entries {
                    out.push_str(&format!("{}={}\n", e.key, e.value));
                }
            }
        }
        out
    }

    /// Hex sha256 of [`canonical`](Self::canonical).
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn section(&self, name: &'static str) -> Section<'_> {
        Section {
            name,
            entries: self.sections.get(name).map(Vec::as_slice).unwrap_or(&[]),
        }
    }
}

struct Section<'a> {
    name: &'static str,
    entries: &'a [Entry],
}

impl Section<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.key == key).map(|e| e.value.as_str())
    }

    fn all(&self, key: &str) -> Vec<&Entry> {
        self.entries.iter().filter(|e| e.key == key).collect()
    }

    fn err(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError::key(self.name, key, msg)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))))
            .transpose()
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<usize>()
                            .map_err(|e| self.err(key, format!("cannot parse `{x}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(ConfigError {
                line: Some(e.line),
                key: Some(format!("[{}] {}", self.name, e.key)),
                message: format!("unknown key, expected one of {}", allowed.join(", ")),
            }),
            None => Ok(()),
        }
    }
}

/// Settings of the property suite run by `check`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    /// Horizon of the improvement check.
    pub improvement_n: usize,
    /// Head of the projection weight used there; `None` picks the grid
    /// weight with the largest head.
    pub improvement_head: Option<usize>,
    pub improvement_replicates: usize,
    pub integral_horizon: usize,
    pub integral_replicates: usize,
    pub gram_records: usize,
    pub gram_d: usize,
    pub sigma_horizons: Vec<usize>,
    pub sigma_replicates: usize,
    pub oracle_horizons: Vec<usize>,
    pub oracle_replicates: usize,
    pub oracle_slack: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            improvement_n: 100,
            improvement_head: Some(10),
            improvement_replicates: 500,
            integral_horizon: 50,
            integral_replicates: 500,
            gram_records: 1000,
            gram_d: 10,
            sigma_horizons: vec![100, 1000],
            sigma_replicates: 100,
            oracle_horizons: vec![100, 500],
            oracle_replicates: 100,
            oracle_slack: 0.002,
        }
    }
}

impl CheckSettings {
    /// Replaces every replicate count.
    pub fn with_replicates(mut self, n: usize) -> Self {
        self.improvement_replicates = n;
        self.integral_replicates = n;
        self.gram_records = n;
        self.sigma_replicates = n;
        self.oracle_replicates = n;
        self
    }
}

/// An interpreted configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Horizon used by `simulate`.
    pub horizon: usize,
    pub check: CheckSettings,
    pub has_grid: bool,
    pub digest: String,
    pub canonical: String,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, super::CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| super::CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::from_str_in(&text, &base)?)
    }

    /// Parses `text`; relative table paths resolve against `base`.
    pub fn from_str_in(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;
        interpret(&raw, base)
    }

    /// Fails unless a `[grid]` section was given.
    pub fn require_grid(&self) -> Result<(), ConfigError> {
        if self.has_grid {
            Ok(())
        } else {
            Err(ConfigError {
                line: None,
                key: Some("[grid]".into()),
                message: "missing section, required by this subcommand".into(),
            })
        }
    }
}

fn interpret(raw: &RawConfig, base: &Path) -> Result<RunConfig, ConfigError> {
    let defaults = ExperimentConfig::paper();

    let noise = raw.section("noise");
    noise.check_keys(&["sigma1", "sigma2", "source", "step"])?;
    let sigma1 = noise.parse_or("sigma1", 0.5)?;
    let sigma2 = noise.parse_or("sigma2", 0.5)?;
    let mut sources = Vec::new();
    for e in noise.all("source") {
        sources.push(parse_source(&e.value).map_err(|m| ConfigError {
            line: Some(e.line),
            key: Some("[noise] source".into()),
            message: m,
        })?);
    }
    if sources.is_empty() && sigma2 > 0.0 && noise.get("sigma2").is_none() {
        sources = defaults.noise.sources().to_vec();
    } else if sources.is_empty() && sigma2 > 0.0 {
        return Err(noise.err("source", "sigma2 > 0 needs at least one `source = <law> <intensity> <param>` line"));
    }
    let spec = LevyNoiseSpec::new(sigma1, sigma2, sources).map_err(|e| noise.err("source", e))?;
    let step = match noise.parse::<f64>("step")? {
        Some(d) => Step::new(d).map_err(|e| noise.err("step", e))?,
        None => Step::default(),
    };

    let signal_sec = raw.section("signal");
    signal_sec.check_keys(&["name", "table", "coeffs"])?;
    let given: Vec<&str> = ["name", "table", "coeffs"]
        .into_iter()
        .filter(|k| signal_sec.get(k).is_some())
        .collect();
    if given.len() > 1 {
        return Err(signal_sec.err(given[1], format!("conflicts with `{}`", given[0])));
    }
    let signal = if let Some(name) = signal_sec.get("name") {
        PeriodicSignal::from_name(name).map_err(|e| signal_sec.err("name", e))?
    } else if let Some(file) = signal_sec.get("table") {
        load_signal_table(&base.join(file)).map_err(|m| signal_sec.err("table", m))?
    } else if let Some(list) = signal_sec.get("coeffs") {
        let coeffs = list
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| signal_sec.err("coeffs", e))?;
        PeriodicSignal::series(coeffs)
    } else {
        PeriodicSignal::paper()
    };

    let shrink = raw.section("shrinkage");
    shrink.check_keys(&["sigma_lower", "sigma_upper", "r_n", "delta", "penalty"])?;
    let sigma_lower = shrink.parse_or("sigma_lower", 0.25)?;
    let sigma_upper = shrink.parse_or("sigma_upper", 0.5)?;
    let r_n = match shrink.get("r_n") {
        None | Some("log") => None,
        Some(_) => Some(shrink.parse::<f64>("r_n")?.expect("present")),
    };
    let delta = match shrink.get("delta") {
        None | Some("default") => DeltaRule::Paper,
        Some(_) => DeltaRule::Fixed(shrink.parse::<f64>("delta")?.expect("present")),
    };
    let penalty_norm = match shrink.get("penalty") {
        None | Some("squared") => PenaltyNorm::SquaredNorm,
        Some("sum") => PenaltyNorm::Sum,
        Some(other) => return Err(shrink.err("penalty", format!("expected `squared` or `sum`, got `{other}`"))),
    };
    let shrinkage = ShrinkageRule {
        sigma_lower,
        sigma_upper,
        r_n,
    };
    spec.check_bounds(sigma_lower, sigma_upper).map_err(|e| {
        let key = if sigma_lower > sigma1 * sigma1 { "sigma_lower" } else { "sigma_upper" };
        shrink.err(key, e)
    })?;

    let grid_sec = raw.section("grid");
    grid_sec.check_keys(&["rule", "k_n", "rho_n", "m", "sigma_upper"])?;
    let grid_sigma = grid_sec.parse_or("sigma_upper", sigma_upper)?;
    let grid = match grid_sec.get("rule") {
        None | Some("default") => {
            for k in ["k_n", "rho_n", "m"] {
                if grid_sec.get(k).is_some() {
                    return Err(grid_sec.err(k, "only used with `rule = fixed`"));
                }
            }
            GridRule::Paper {
                sigma_upper: grid_sigma,
            }
        }
        Some("fixed") => {
            let k_n = grid_sec
                .parse::<f64>("k_n")?
                .ok_or_else(|| grid_sec.err("k_n", "required with `rule = fixed`"))?;
            let rho = grid_sec
                .parse::<f64>("rho_n")?
                .ok_or_else(|| grid_sec.err("rho_n", "required with `rule = fixed`"))?;
            let m = grid_sec.parse::<usize>("m")?;
            GridRule::Fixed(GridParams::new(k_n, rho, m, grid_sigma).map_err(|e| grid_sec.err("rule", e))?)
        }
        Some(other) => return Err(grid_sec.err("rule", format!("expected `default` or `fixed`, got `{other}`"))),
    };
    if grid_sigma < spec.sigma() {
        return Err(grid_sec.err("sigma_upper", format!("{grid_sigma} is below σ = {}", spec.sigma())));
    }

    let exp = raw.section("experiment");
    exp.check_keys(&[
        "horizons",
        "horizon",
        "replicates",
        "eval_points",
        "seed",
        "figure_points",
        "improvement_n",
        "improvement_head",
        "improvement_replicates",
        "integral_horizon",
        "integral_replicates",
        "gram_records",
        "gram_d",
        "sigma_horizons",
        "sigma_replicates",
        "oracle_horizons",
        "oracle_replicates",
        "oracle_slack",
    ])?;
    let horizons = exp.list("horizons")?.unwrap_or_else(|| defaults.horizons.clone());
    let horizon = exp.parse_or("horizon", horizons.first().copied().unwrap_or(100))?;
    if horizon < 2 {
        return Err(exp.err("horizon", "must be >= 2"));
    }
    let experiment = ExperimentConfig {
        horizons,
        replicates: exp.parse_or("replicates", defaults.replicates)?,
        eval_points: exp.parse_or("eval_points", PAPER_EVAL_POINTS)?,
        step,
        noise: spec,
        signal,
        grid,
        shrinkage,
        delta,
        penalty_norm,
        seed: exp.parse_or("seed", defaults.seed)?,
        figure_points: exp.parse_or("figure_points", defaults.figure_points)?,
    };
    experiment.validate().map_err(|e| ConfigError {
        line: None,
        key: None,
        message: e.to_string(),
    })?;

    let step = experiment.step;
    let resolved = |key: &str, ns: &[usize]| -> Result<(), ConfigError> {
        match ns.iter().find(|&&n| !step.resolves(n)) {
            Some(n) => Err(exp.err(key, format!("horizon {n} is too long for step {}", step.delta()))),
            None => Ok(()),
        }
    };
    resolved("horizon", &[horizon])?;

    let d = CheckSettings::default();
    let improvement_head = match exp.get("improvement_head") {
        None => d.improvement_head,
        Some("grid") => None,
        Some(_) => exp.parse::<usize>("improvement_head")?,
    };
    let check = CheckSettings {
        improvement_n: exp.parse_or("improvement_n", d.improvement_n)?,
        improvement_head,
        improvement_replicates: exp.parse_or("improvement_replicates", d.improvement_replicates)?,
        integral_horizon: exp.parse_or("integral_horizon", d.integral_horizon)?,
        integral_replicates: exp.parse_or("integral_replicates", d.integral_replicates)?,
        gram_records: exp.parse_or("gram_records", d.gram_records)?,
        gram_d: exp.parse_or("gram_d", d.gram_d)?,
        sigma_horizons: exp.list("sigma_horizons")?.unwrap_or(d.sigma_horizons),
        sigma_replicates: exp.parse_or("sigma_replicates", d.sigma_replicates)?,
        oracle_horizons: exp.list("oracle_horizons")?.unwrap_or(d.oracle_horizons),
        oracle_replicates: exp.parse_or("oracle_replicates", d.oracle_replicates)?,
        oracle_slack: exp.parse_or("oracle_slack", d.oracle_slack)?,
    };
    resolved("improvement_n", &[check.improvement_n])?;
    resolved("sigma_horizons", &check.sigma_horizons)?;
    resolved("oracle_horizons", &check.oracle_horizons)?;

    Ok(RunConfig {
        experiment,
        horizon,
        check,
        has_grid: raw.has_section("grid"),
        digest: raw.digest(),
        canonical: raw.canonical(),
    })
}

/// `<law> <intensity> <param>` with law one of `normal`, `twopoint`,
/// `uniform`.
fn parse_source(value: &str) -> Result<ImpulseSource, String> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let [law, intensity, param] = parts[..] else {
        return Err(format!("expected `<law> <intensity> <param>`, got `{value}`"));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("cannot parse `{s}`: {e}"));
    let (intensity, param) = (num(intensity)?, num(param)?);
    let law = match law {
        "normal" => JumpLaw::Normal { scale: param },
        "twopoint" => JumpLaw::TwoPoint { a: param },
        "uniform" => JumpLaw::Uniform { a: param },
        other => return Err(format!("unknown jump law `{other}`, expected normal, twopoint or uniform")),
    };
    ImpulseSource::new(intensity, law).map_err(|e| e.to_string())
}

/// Two-column `t,value` CSV.
fn load_signal_table(path: &PathBuf) -> Result<PeriodicSignal, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line.replace(' ', "") != "t,value" {
                return Err(format!("{} row {}: expected header `t,value`", path.display(), i + 1));
            }
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| format!("{} row {}: expected two columns", path.display(), i + 1))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("{} row {}: {e}", path.display(), i + 1))
        };
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    PeriodicSignal::from_table(times, values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[noise]\nsigma1 = 0.5\nsigma2 = 0.5\nsource = normal 1 1\n[grid]\n[experiment]\nhorizons = 100\n";

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_str_in(text, Path::new("."))
    }

    #[test]
    fn digest_ignores_layout() {
        let a = RawConfig::parse(BASE).unwrap().digest();
        let spaced = "# a comment\n\n[noise]\n  sigma1=0.5   # trailing\nsigma2   =   0.5\nsource = normal   1 1\n\n[grid]\n[experiment]\nhorizons =100\n";
        assert_eq!(a, RawConfig::parse(spaced).unwrap().digest());
        let changed = BASE.replace("sigma1 = 0.5", "sigma1 = 0.6");
        assert_ne!(a, RawConfig::parse(&changed).unwrap().digest());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn bad_step_names_key() {
        let err = parse(&BASE.replace("[grid]", "step = 0.003\n[grid]")).unwrap_err();
        assert!(err.to_string().contains("[noise] step"), "{err}");
    }

    #[test]
    fn variance_bounds_are_checked() {
        let err = parse(&format!("{BASE}[shrinkage]\nsigma_upper = 0.2\n")).unwrap_err();
        assert!(err.to_string().contains("sigma_upper"), "{err}");
        let err = parse(&format!("{BASE}[shrinkage]\nsigma_lower = 0.3\n")).unwrap_err();
        assert!(err.to_string().contains("sigma_lower"), "{err}");
    }

    #[test]
    fn structural_errors() {
        assert!(RawConfig::parse("sigma1 = 1").is_err());
        assert!(RawConfig::parse("[bogus]").is_err());
        assert!(RawConfig::parse("[noise]\nsigma1").is_err());
        assert!(RawConfig::parse("[noise]\nsigma1 = 1\nsigma1 = 2").is_err());
        assert!(parse("[noise]\nfoo = 1").is_err());
        assert!(parse(&BASE.replace("normal 1 1", "cauchy 1 1")).is_err());
        assert!(parse(&BASE.replace("normal 1 1", "normal 2 1")).is_err());
    }

    #[test]
    fn defaults_and_grid_flag() {
        let cfg = parse(BASE).unwrap();
        assert!(cfg.has_grid);
        assert_eq!(cfg.horizon, 100);
        assert_eq!(cfg.experiment.noise, LevyNoiseSpec::paper());
        let no_grid = parse(&BASE.replace("[grid]\n", "")).unwrap();
        assert!(no_grid.require_grid().is_err());
    }

    #[test]
    fn multiple_sources_and_gaussian() {
        let two = "[noise]\nsigma1 = 0.5\nsigma2 = 0.5\nsource = twopoint 0.5 1\nsource = uniform 1.5 1\n";
        let cfg = parse(two).unwrap();
        assert_eq!(cfg.experiment.noise.sources().len(), 2);
        let g = parse("[noise]\nsigma1 = 0.5\nsigma2 = 0\n[shrinkage]\nsigma_upper = 0.3\n").unwrap();
        assert!(g.experiment.noise.sources().is_empty());
    }
}
