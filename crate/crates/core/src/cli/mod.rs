//! The `levysel` subcommands: configuration loading, artifact writing and
//! the exit-code contract (0 ok, 1 failed check, 2 config or schema error,
//! 3 I/O error).

pub mod config;
pub mod csv;

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::estimate::{estimate_fourier, shrink_coeffs, shrink_threshold, WeightVector};
use crate::levy::simulate_path;
use crate::risk::{
    check_gram_inequality, check_improvement, check_integral_identities, check_oracle_inequality,
    check_sigma_accuracy, default_pairs, largest_head_weight, run_experiment, RiskReport,
};
use crate::selection::{estimate_sigma_from, pinsker_grid, select_with, SelectionRule};

pub use config::{CheckSettings, ConfigError, RawConfig, RunConfig};
pub use csv::{read_path_csv, strip_timestamp, CsvDoc, TIMESTAMP_PREFIX};

/// Environment variable giving the default worker count.
pub const THREADS_ENV: &str = "LEVYSEL_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Schema(String),
    Io(String),
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) | CliError::Schema(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub quiet: bool,
}

impl Options {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Options {
            config: config.into(),
            ..Default::default()
        }
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(r) = self.replicates {
            if r == 0 {
                return Err(CliError::Config("--replicates must be >= 1".into()));
            }
            cfg.experiment.replicates = r;
            cfg.check = cfg.check.with_replicates(r);
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn say(&self, msg: impl fmt::Display) {
        if !self.quiet {
            println!("{msg}");
        }
    }
}

/// Record of one run, written as `manifest.txt` next to the artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub digest: String,
    pub seed: u64,
    pub version: String,
    pub timestamp: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn new(cfg: &RunConfig) -> Self {
        RunManifest {
            digest: cfg.digest.clone(),
            seed: cfg.experiment.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: csv::unix_seconds(),
            outputs: Vec::new(),
        }
    }

    fn emit(&mut self, dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path);
        Ok(())
    }

    fn emit_doc(&mut self, dir: &Path, name: &str, doc: &CsvDoc) -> Result<(), CliError> {
        self.emit(dir, name, doc.text())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# levysel run manifest\n");
        let _ = writeln!(s, "digest={}", self.digest);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "version={}", self.version);
        let _ = writeln!(s, "{}{}", TIMESTAMP_PREFIX, self.timestamp);
        for o in &self.outputs {
            let name = o.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(s, "output={name}");
        }
        s
    }

    fn finish(mut self, dir: &Path) -> Result<Self, CliError> {
        let text = self.render();
        let path = dir.join("manifest.txt");
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path);
        Ok(self)
    }
}

/// Writes `path.csv` and `jumps.csv` for one simulated path.
pub fn cmd_simulate(opts: &Options) -> Result<RunManifest, CliError> {
    let cfg = opts.load()?;
    let dir = opts.out_dir()?;
    let e = &cfg.experiment;
    let path = simulate_path(&e.noise, &e.signal, cfg.horizon, e.step, e.seed)?;
    let mut manifest = RunManifest::new(&cfg);
    manifest.emit_doc(&dir, "path.csv", &csv::path_doc(&path, &cfg.digest, e.seed))?;
    manifest.emit_doc(&dir, "jumps.csv", &csv::jumps_doc(path.jumps(), &cfg.digest, e.seed))?;
    opts.say(format!(
        "simulated n={} steps={} jumps={} -> {}",
        cfg.horizon,
        path.values().len() - 1,
        path.jumps().len(),
        dir.display()
    ));
    manifest.finish(&dir)
}

/// Fits the improved estimator to a path CSV.
pub fn cmd_estimate(opts: &Options, path_csv: &Path) -> Result<RunManifest, CliError> {
    let cfg = opts.load()?;
    cfg.require_grid()?;
    let path = read_path_csv(path_csv)?;
    let n = path.horizon();
    if !path.step().resolves(n) {
        return Err(CliError::Schema(format!(
            "{}: horizon {n} is too long for {} steps per unit",
            path_csv.display(),
            path.step().steps_per_unit()
        )));
    }
    let dir = opts.out_dir()?;
    let e = &cfg.experiment;
    let est = estimate_fourier(&path)?;
    let sigma_hat = estimate_sigma_from(&est);
    let shrink = e.shrinkage.config(n)?;
    let rule = SelectionRule::new(Some(shrink), e.delta.delta(n))?.with_penalty_norm(e.penalty_norm);
    let grid = pinsker_grid(n, &e.grid.params(n))?;
    let out = select_with(&est, &grid, &rule, sigma_hat)?;
    let c_n = shrink_threshold(&out.chosen, &shrink, n);
    let theta_star = shrink_coeffs(est.coeffs(), out.chosen.head(), c_n)?;
    let chosen = &grid[out.index];

    let mut manifest = RunManifest::new(&cfg);
    let meta = [("horizon", n.to_string())];
    let mut coeffs = CsvDoc::new(
        "coefficients",
        &cfg.digest,
        e.seed,
        &meta,
        &["j", "theta_hat", "theta_star", "lambda"],
    );
    for (j, (th, ts)) in est.coeffs().iter().zip(&theta_star).enumerate() {
        coeffs.row(&[
            (j + 1).to_string(),
            th.to_string(),
            ts.to_string(),
            out.chosen.get(j + 1).to_string(),
        ]);
    }
    manifest.emit_doc(&dir, "coefficients.csv", &coeffs)?;
    manifest.emit_doc(&dir, "cost_table.csv", &cost_doc(&cfg, &out.cost_table, &meta))?;

    let mut summary = CsvDoc::new("summary", &cfg.digest, e.seed, &meta, &["key", "value"]);
    for (k, v) in [
        ("n", n.to_string()),
        ("sigma_hat", sigma_hat.to_string()),
        ("beta", chosen.beta.to_string()),
        ("r", chosen.r.to_string()),
        ("omega", chosen.omega.to_string()),
        ("d", chosen.head().to_string()),
        ("c_n", c_n.to_string()),
        ("cost", out.min_cost().to_string()),
        ("delta", out.delta.to_string()),
    ] {
        summary.row(&[k.to_string(), v]);
    }
    manifest.emit_doc(&dir, "summary.csv", &summary)?;
    opts.say(format!(
        "n={n} sigma_hat={sigma_hat:.6} beta={} r={:.4} d={} c_n={c_n:.3e} J={:.6e}",
        chosen.beta,
        chosen.r,
        chosen.head(),
        out.min_cost()
    ));
    manifest.finish(&dir)
}

fn cost_doc(cfg: &RunConfig, table: &[crate::selection::CostEntry], meta: &[(&str, String)]) -> CsvDoc {
    let mut doc = CsvDoc::new(
        "cost_table",
        &cfg.digest,
        cfg.experiment.seed,
        meta,
        &["beta", "r", "omega", "d", "cost", "penalty"],
    );
    for c in table {
        doc.row(&[
            c.beta.to_string(),
            c.r.to_string(),
            c.omega.to_string(),
            c.d.to_string(),
            c.cost.to_string(),
            c.penalty.to_string(),
        ]);
    }
    doc
}

/// Runs the Monte Carlo study and writes the risk report, figure data and
/// a text table.
pub fn cmd_experiment(opts: &Options) -> Result<RunManifest, CliError> {
    let cfg = opts.load()?;
    cfg.require_grid()?;
    let dir = opts.out_dir()?;
    let e = &cfg.experiment;
    let report = run_experiment(e)?;
    let mut manifest = RunManifest::new(&cfg);
    let meta = [("replicates", e.replicates.to_string())];
    let mut doc = CsvDoc::new(
        "risk_report",
        &cfg.digest,
        e.seed,
        &meta,
        &["n", "estimator", "risk", "stderr", "ratio", "c_n", "sigma_hat_mean"],
    );
    for row in &report.rows {
        let sigma = row.sigma_hat.mean.to_string();
        for (name, stat, ratio, c) in [
            ("improved", row.improved, row.ratio_improved, row.c_n_improved),
            ("lse", row.lse, 1.0, 0.0),
            ("shrunk_at_lse", row.shrunk_at_lse, row.ratio_shrunk, row.c_n_lse),
        ] {
            doc.row(&[
                row.n.to_string(),
                name.to_string(),
                stat.mean.to_string(),
                stat.stderr.to_string(),
                ratio.to_string(),
                c.to_string(),
                sigma.clone(),
            ]);
        }
    }
    manifest.emit_doc(&dir, "risk_report.csv", &doc)?;
    for row in &report.rows {
        let f = &row.figure;
        let meta = [("horizon", row.n.to_string()), ("replicate", "0".to_string())];
        let mut fig = CsvDoc::new("figure", &cfg.digest, e.seed, &meta, &["t", "S", "S_hat", "S_star"]);
        for i in 0..f.t.len() {
            fig.row(&[
                f.t[i].to_string(),
                f.signal[i].to_string(),
                f.lse[i].to_string(),
                f.improved[i].to_string(),
            ]);
        }
        manifest.emit_doc(&dir, &format!("figure_n{}.csv", row.n), &fig)?;
    }
    let table = render_tables(&report);
    manifest.emit(&dir, "table.txt", &table)?;
    opts.say(table.trim_end());
    manifest.finish(&dir)
}

/// Plain-text tables with one column per horizon: risks of `S*` and `Ŝ`
/// with their ratio, then of `S*_λ̂` and `Ŝ` with theirs.
pub fn render_tables(report: &RiskReport) -> String {
    let mut s = String::new();
    let head = |s: &mut String, title: &str| {
        let _ = writeln!(s, "{title}");
        let _ = write!(s, "{:<18}", "n");
        for r in &report.rows {
            let _ = write!(s, "{:>9}", r.n);
        }
        s.push('\n');
    };
    let line = |s: &mut String, label: &str, vals: Vec<String>| {
        let _ = write!(s, "{label:<18}");
        for v in vals {
            let _ = write!(s, "{v:>9}");
        }
        s.push('\n');
    };
    let rows = &report.rows;
    head(&mut s, &format!("Risks for different optimal weights (N = {})", report.replicates));
    line(&mut s, "R(S*_l*)", rows.iter().map(|r| format!("{:.4}", r.improved.mean)).collect());
    line(&mut s, "R(S^_l^)", rows.iter().map(|r| format!("{:.4}", r.lse.mean)).collect());
    line(&mut s, "R(S^_l^)/R(S*_l*)", rows.iter().map(|r| format!("{:.1}", r.ratio_improved)).collect());
    s.push('\n');
    head(&mut s, &format!("Risks for the same optimal weights (N = {})", report.replicates));
    line(&mut s, "R(S*_l^)", rows.iter().map(|r| format!("{:.4}", r.shrunk_at_lse.mean)).collect());
    line(&mut s, "R(S^_l^)", rows.iter().map(|r| format!("{:.4}", r.lse.mean)).collect());
    line(&mut s, "R(S^_l^)/R(S*_l^)", rows.iter().map(|r| format!("{:.1}", r.ratio_shrunk)).collect());
    s
}

/// One line of the `check` report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Runs the property suite on the configured scenario.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckLine>, CliError> {
    let e = &cfg.experiment;
    let c = &cfg.check;
    let mut lines = Vec::new();

    let n = c.improvement_n;
    let weights = match c.improvement_head {
        Some(d) => WeightVector::projection(n, d.min(n))?,
        None => largest_head_weight(n, &e.grid.params(n))?,
    };
    let imp = check_improvement(e, n, &weights, c.improvement_replicates)?;
    lines.push(CheckLine {
        name: format!("improvement n={n} d={}", imp.head),
        passed: imp.improves(),
        detail: format!(
            "delta={:.4e} se={:.2e} c_n={:.3e} delta+c_n^2={:.3e}",
            imp.delta.mean, imp.delta.stderr, imp.c_n, imp.margin_vs_bound
        ),
    });

    let t = c.integral_horizon;
    let pairs = check_integral_identities(&e.noise, t, c.integral_replicates, e.step, e.seed, &default_pairs())?;
    for p in &pairs {
        lines.push(CheckLine {
            name: format!("isometry t={t} {}", p.label),
            passed: p.isometry_holds(),
            detail: format!(
                "mean={:.4} expected={:.4} se={:.4}",
                p.product.mean, p.product_expected, p.product.stderr
            ),
        });
        lines.push(CheckLine {
            name: format!("fourth moment t={t} {}", p.label),
            passed: p.fourth_bound_holds(),
            detail: format!(
                "|mean|={:.4} bound={:.4} se={:.4}",
                p.fourth.mean.abs(),
                p.fourth_bound,
                p.fourth.stderr
            ),
        });
        if let (Some(w), Some(ok)) = (p.wick_expected, p.wick_holds()) {
            lines.push(CheckLine {
                name: format!("gaussian fourth moment t={t} {}", p.label),
                passed: ok,
                detail: format!("mean={:.4} expected={w:.4} se={:.4}", p.fourth.mean, p.fourth.stderr),
            });
        }
    }

    let gram = check_gram_inequality(&e.noise, t.max(c.gram_d), c.gram_d, c.gram_records, e.seed)?;
    lines.push(CheckLine {
        name: format!("gram d={} records={}", gram.d, gram.records),
        passed: gram.holds(),
        detail: format!(
            "min(tr-lmax)={:.4} bound={:.4} violations={}",
            gram.min_spread, gram.lower_bound, gram.violations
        ),
    });

    let acc = check_sigma_accuracy(e, &c.sigma_horizons, c.sigma_replicates)?;
    let sigma = e.noise.sigma();
    let decreasing = acc.windows(2).all(|w| w[1].abs_error.mean < w[0].abs_error.mean);
    let last = acc.last().map(|a| a.abs_error.mean).unwrap_or(f64::NAN);
    lines.push(CheckLine {
        name: "variance estimate".into(),
        passed: decreasing && last <= 0.3 * sigma,
        detail: acc
            .iter()
            .map(|a| format!("n={} E|s^-s|={:.4}", a.n, a.abs_error.mean))
            .chain(std::iter::once(format!("limit={:.4}", 0.3 * sigma)))
            .collect::<Vec<_>>()
            .join(" "),
    });

    for &n in &c.oracle_horizons {
        let o = check_oracle_inequality(e, n, c.oracle_replicates, c.oracle_slack)?;
        lines.push(CheckLine {
            name: format!("oracle n={n}"),
            passed: o.holds(),
            detail: format!(
                "R(S*)={:.4e} bound={:.4e} min_R={:.4e} factor={:.4}",
                o.selected.mean,
                o.bound(),
                o.oracle.mean,
                o.factor
            ),
        });
    }
    Ok(lines)
}

pub fn cmd_check(opts: &Options) -> Result<Vec<CheckLine>, CliError> {
    let cfg = opts.load()?;
    cfg.require_grid()?;
    let lines = run_checks(&cfg)?;
    for l in &lines {
        opts.say(l);
    }
    let failed: Vec<&str> = lines.iter().filter(|l| !l.passed).map(|l| l.name.as_str()).collect();
    if failed.is_empty() {
        Ok(lines)
    } else {
        Err(CliError::CheckFailed(failed.join("; ")))
    }
}
