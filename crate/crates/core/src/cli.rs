//! Command-line driver: a JSON run configuration, CSV/JSON tables, and a
//! pass/fail summary of every internal check.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, ContourMethod};
use crate::beta_infinity;
use crate::error::{Error, Result};
use crate::exact::{self, EvalOptions};
use crate::ho::{self, HOPoint};
use crate::model::ObservableSpec;
use crate::params::{EnsembleParams, HatParams, LevelHeight};
use crate::quadrature::QuadSpec;
use crate::sampler::{self, SamplerConfig};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "JACOBI_CORNERS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "jacobi-corners", version, about = "Sampling, exact moments and limit covariances of the beta-Jacobi corners process")]
pub struct Cli {
    /// Seed of the sampler streams; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Table format; overrides the config value.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for chains and parameter grids.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Draw corners arrays (sample_id, level, index, value).
    Sample,
    /// Exact moments of p_k next to Monte Carlo estimates.
    Moments,
    /// Limit covariances by contour, Chebyshev and GFF paths; frozen boundaries.
    Asymptotics,
    /// Jacobi roots, theta-scaled covariances and large-theta fluctuations.
    BetaInfinity,
    /// Identities of the Heckman-Opdam functions.
    Ho,
    /// Every check above at desk scale.
    AllChecks,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub ensemble: EnsembleBlock,
    pub sampler: SamplerConfig,
    pub samples: usize,
    pub asymptotics: AsymptoticsBlock,
    pub beta_infinity: BetaInfinityBlock,
    pub ho: HoBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            format: Format::Csv,
            ensemble: EnsembleBlock::default(),
            sampler: SamplerConfig {
                burn_in: 1000,
                thin: 5,
                ..SamplerConfig::default()
            },
            samples: 100_000,
            asymptotics: AsymptoticsBlock::default(),
            beta_infinity: BetaInfinityBlock::default(),
            ho: HoBlock::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleBlock {
    /// Given as numerator and denominator so that exact moments see it exactly.
    pub theta: (i64, i64),
    pub alpha: (i64, i64),
    pub m: usize,
    /// Number of levels.
    pub n: usize,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            theta: (1, 2),
            alpha: (1, 1),
            m: 2,
            n: 4,
        }
    }
}

impl EnsembleBlock {
    pub fn params(&self) -> Result<EnsembleParams> {
        let ratio = |(p, q): (i64, i64), name: &str| {
            if q == 0 {
                Err(Error::Config(format!("{name} has zero denominator")))
            } else {
                Ok(Rational64::new(p, q))
            }
        };
        EnsembleParams::from_ratios(ratio(self.theta, "theta")?, ratio(self.alpha, "alpha")?, self.m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsymptoticsBlock {
    pub m_hat: f64,
    pub alpha_hat: f64,
    pub theta: f64,
    /// Level heights; covariances are tabulated for every ordered pair.
    pub levels: Vec<f64>,
    pub max_degree: u32,
    /// `(M̂, α̂)` pairs for which frozen boundaries are written.
    pub boundary_panels: Vec<(f64, f64)>,
    pub boundary_max_height: f64,
    pub boundary_points: usize,
    pub tolerance: f64,
}

impl Default for AsymptoticsBlock {
    fn default() -> Self {
        Self {
            m_hat: 1.0,
            alpha_hat: 1.0,
            theta: 1.0,
            levels: vec![0.5, 1.5],
            max_degree: 2,
            boundary_panels: vec![(0.1, 1.0), (1.0, 1.0), (1.0, 0.1)],
            boundary_max_height: 3.0,
            boundary_points: 301,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaInfinityBlock {
    pub theta: i64,
    pub alpha: i64,
    pub m: usize,
    pub n: usize,
    pub samples: usize,
    pub thin: usize,
    /// Concentration radius in units of `θ^{-1/2}`.
    pub threshold: f64,
    pub theta_grid: Vec<i64>,
}

impl Default for BetaInfinityBlock {
    fn default() -> Self {
        Self {
            theta: 1_000_000,
            alpha: 2,
            m: 3,
            n: 3,
            samples: 100_000,
            thin: 5,
            threshold: 5.0,
            theta_grid: vec![100, 1_000, 10_000, 100_000, 1_000_000],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoBlock {
    pub thetas: Vec<f64>,
    pub quadrature: QuadSpec,
    pub tolerance: f64,
}

impl Default for HoBlock {
    fn default() -> Self {
        Self {
            thetas: vec![0.5, 1.0, 2.0],
            quadrature: QuadSpec::default(),
            tolerance: 1e-6,
        }
    }
}

/// One internal tolerance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn abs(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            pass: (value - reference).abs() <= tolerance,
        }
    }

    fn rel(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        let mut c = Self::abs(name, value, reference, tolerance * reference.abs());
        c.tolerance = tolerance;
        c
    }

    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference: bound,
            tolerance: 0.0,
            pass: value <= bound,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference: bound,
            tolerance: 0.0,
            pass: value >= bound,
        }
    }
}

#[derive(Clone, Debug)]
enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => (*v).into(),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Cell::Text(s) => s.clone().into(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(Cell::from($x)),*] };
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.header.join(",");
                s.push('\n');
                for r in &self.rows {
                    let cells: Vec<String> = r.iter().map(Cell::csv).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
                s
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: serde_json::Map<String, serde_json::Value> = self
                            .header
                            .iter()
                            .zip(r)
                            .map(|(h, c)| (h.to_string(), c.json()))
                            .collect();
                        serde_json::Value::Object(obj)
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&rows).expect("tables serialize");
                s.push('\n');
                s
            }
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    format: Format,
}

impl Output<'_> {
    fn table(&self, stem: &str, table: &Table) -> Result<PathBuf> {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = self.dir.join(format!("{stem}.{ext}"));
        write_file(&path, &table.render(self.format))?;
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        write_file(&path, &s)?;
        Ok(path)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the configuration file (if any) and applies flag overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = cli.format {
        config.format = format;
    }
    config.sampler.seed = config.seed;
    validate(&config)?;
    Ok(config)
}

fn validate(c: &RunConfig) -> Result<()> {
    c.ensemble.params()?;
    if c.ensemble.n == 0 {
        return Err(Error::Config("ensemble.n must be at least 1".into()));
    }
    c.sampler.validate()?;
    HatParams::new(c.asymptotics.m_hat, c.asymptotics.alpha_hat)?;
    for &(m, a) in &c.asymptotics.boundary_panels {
        HatParams::new(m, a)?;
    }
    for &l in &c.asymptotics.levels {
        LevelHeight::new(l)?;
    }
    if c.asymptotics.max_degree == 0 || c.asymptotics.max_degree > 6 {
        return Err(Error::Config("asymptotics.max_degree must be in 1..=6".into()));
    }
    if c.beta_infinity.theta <= 0 || c.beta_infinity.alpha <= 0 || c.beta_infinity.m == 0 || c.beta_infinity.n == 0 {
        return Err(Error::Config("beta_infinity parameters must be positive".into()));
    }
    if c.beta_infinity.theta_grid.iter().any(|&t| t <= 0) {
        return Err(Error::Config("beta_infinity.theta_grid must be positive".into()));
    }
    if c.ho.thetas.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Config("ho.thetas must be positive".into()));
    }
    Ok(())
}

/// Runs one command; returns the checks it performed.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<Vec<Check>> {
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let o = Output {
        dir: out,
        format: config.format,
    };
    let checks = match command {
        Command::Sample => cmd_sample(config, &o)?,
        Command::Moments => cmd_moments(config, &o)?,
        Command::Asymptotics => cmd_asymptotics(config, &o)?,
        Command::BetaInfinity => cmd_beta_infinity(config, &o)?,
        Command::Ho => cmd_ho(config, &o)?,
        Command::AllChecks => {
            let mut all = cmd_moments(config, &o)?;
            all.extend(cmd_asymptotics(config, &o)?);
            all.extend(cmd_beta_infinity(config, &o)?);
            all.extend(cmd_ho(config, &o)?);
            all
        }
    };
    let mut t = Table::new(&["check", "value", "reference", "tolerance", "pass"]);
    for c in &checks {
        t.push(row![c.name.clone(), c.value, c.reference, c.tolerance, c.pass]);
    }
    o.table("checks", &t)?;
    Ok(checks)
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    build: String,
    seed: u64,
    config: &'a RunConfig,
}

fn metadata(command: &str, config: &RunConfig, o: &Output) -> Result<()> {
    o.json(
        "metadata.json",
        &Metadata {
            command,
            build: format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            seed: config.seed,
            config,
        },
    )?;
    Ok(())
}

fn cmd_sample(config: &RunConfig, o: &Output) -> Result<Vec<Check>> {
    let params = config.ensemble.params()?;
    let n = config.ensemble.n;
    let samples = sampler::sample_corners(&params, n, &config.sampler, config.samples)?;
    let mut t = Table::new(&["sample_id", "level", "index", "value"]);
    let mut valid = 0usize;
    for (s, c) in samples.iter().enumerate() {
        if c.validate(params.m_param()).is_ok() {
            valid += 1;
        }
        for (k, level) in c.levels().iter().enumerate() {
            for (i, &x) in level.iter().enumerate() {
                t.push(row![s, k + 1, i + 1, x]);
            }
        }
    }
    o.table("samples", &t)?;
    metadata("sample", config, o)?;
    Ok(vec![Check::abs("sample.interlacing", valid as f64, samples.len() as f64, 0.0)])
}

fn cmd_moments(config: &RunConfig, o: &Output) -> Result<Vec<Check>> {
    let params = config.ensemble.params()?;
    let n = config.ensemble.n;
    let mut specs = Vec::new();
    for level in 1..=n {
        specs.push(ObservableSpec::power(1, level));
        specs.push(ObservableSpec::power(2, level));
    }
    let series = sampler::sample_observables(&params, n, &config.sampler, config.samples, &specs)?;
    let est = sampler::estimate_observables(&series)?;
    let opts = EvalOptions::default();
    let mut t = Table::new(&["observable", "level", "degree", "exact_value", "mc_mean", "mc_se", "z_score"]);
    let mut checks = Vec::new();
    let mut add = |t: &mut Table, name: &str, level: usize, degree: usize, exact: f64, mc: f64, se: f64| {
        let z = (mc - exact) / se;
        t.push(row![name, level, degree, exact, mc, se, z]);
        checks.push(Check::at_most(format!("moments.{name}.{degree}({level}).z"), z.abs(), 3.0));
    };
    for level in 1..=n {
        for degree in 1..=2 {
            let j = 2 * (level - 1) + degree - 1;
            let exact = exact::expectation(&params, &[specs[j]], &opts)?.to_f64();
            add(&mut t, "mean_p", level, degree, exact, est.means[j].mean, est.means[j].std_error);
        }
        let j = 2 * (level - 1);
        let var = exact::covariance(&params, &specs[j], &specs[j], &opts)?.to_f64();
        let e = est.covariance[j][j];
        add(&mut t, "var_p", level, 1, var, e.mean, e.std_error);
        if level > 1 {
            let i = 2 * (level - 2);
            let cov = exact::covariance(&params, &specs[j], &specs[i], &opts)?.to_f64();
            let e = est.covariance[j][i];
            add(&mut t, "cov_p_adjacent", level, 1, cov, e.mean, e.std_error);
        }
    }
    // level one against the Beta law
    let beta_mean = params.alpha() / (params.alpha() + params.m_param() as f64);
    let exact_mean = exact::expectation(&params, &[specs[0]], &opts)?.to_f64();
    checks.push(Check::rel("moments.level_one_beta_mean", exact_mean, beta_mean, 1e-14));
    o.table("moments", &t)?;
    metadata("moments", config, o)?;
    Ok(checks)
}

fn cmd_asymptotics(config: &RunConfig, o: &Output) -> Result<Vec<Check>> {
    let a = &config.asymptotics;
    let hp = HatParams::new(a.m_hat, a.alpha_hat)?;
    let theta = a.theta;
    let mut levels: Vec<LevelHeight> = a.levels.iter().map(|&l| LevelHeight::new(l)).collect::<Result<_>>()?;
    levels.sort_by(|x, y| y.get().total_cmp(&x.get()));
    let mut checks = Vec::new();

    let mut cov = Table::new(&[
        "n_hat_1", "n_hat_2", "k_1", "k_2", "contour", "chebyshev_path", "gff_path", "max_rel_diff",
    ]);
    let mut cheb = Table::new(&["n_hat_1", "n_hat_2", "n_1", "n_2", "closed_form", "contour", "abs_diff"]);
    for (i, &h1) in levels.iter().enumerate() {
        for &h2 in &levels[i..] {
            let c1 = (1..=a.max_degree).map(|k| asymptotics::monomial_in_chebyshev(&hp, h1, k)).collect::<Vec<_>>();
            let c2 = (1..=a.max_degree).map(|k| asymptotics::monomial_in_chebyshev(&hp, h2, k)).collect::<Vec<_>>();
            let mut closed = vec![vec![0.0; a.max_degree as usize + 1]; a.max_degree as usize + 1];
            for n1 in 1..=a.max_degree {
                for n2 in 1..=a.max_degree {
                    let cf = asymptotics::chebyshev_cov(&hp, theta, (n1, h1), (n2, h2))?;
                    let ct = asymptotics::chebyshev_contour_cov(&hp, theta, (n1, h1), (n2, h2))?;
                    closed[n1 as usize][n2 as usize] = cf;
                    cheb.push(row![h1.get(), h2.get(), n1, n2, cf, ct, (cf - ct).abs()]);
                    checks.push(Check::abs(
                        format!("asymptotics.chebyshev({n1},{},{n2},{})", h1.get(), h2.get()),
                        ct,
                        cf,
                        1e-8,
                    ));
                }
            }
            for k1 in 1..=a.max_degree {
                for k2 in 1..=a.max_degree {
                    let contour = asymptotics::limit_covariance_p(&hp, theta, (h1, k1), (h2, k2))?;
                    let mut via_cheb = 0.0;
                    for (p, x) in c1[k1 as usize - 1].iter().enumerate().skip(1) {
                        for (q, y) in c2[k2 as usize - 1].iter().enumerate().skip(1) {
                            via_cheb += x * y * closed[p][q];
                        }
                    }
                    let height = asymptotics::height_cov(&hp, (h1, k1 - 1), (h2, k2 - 1))?;
                    let via_gff = height * (k1 * k2) as f64 / (theta * std::f64::consts::PI);
                    let diff = ((contour - via_cheb).abs()).max((contour - via_gff).abs()) / contour.abs();
                    cov.push(row![h1.get(), h2.get(), k1, k2, contour, via_cheb, via_gff, diff]);
                    let tag = format!("({k1},{},{k2},{})", h1.get(), h2.get());
                    checks.push(Check::rel(format!("asymptotics.chebyshev_path{tag}"), via_cheb, contour, a.tolerance));
                    checks.push(Check::rel(format!("asymptotics.gff_path{tag}"), via_gff, contour, 1e-4));
                }
            }
        }
    }
    // the equal-level diagonal against n/(4θ)
    if let Some(&h) = levels.first() {
        for n in 1..=a.max_degree {
            let v = asymptotics::chebyshev_contour_cov(&hp, theta, (n, h), (n, h))?;
            checks.push(Check::rel(format!("asymptotics.diagonal({n})"), v, n as f64 / (4.0 * theta), 1e-10));
        }
        let g = |x: num_complex::Complex64| x;
        let a1 = asymptotics::limit_covariance_with(&hp, theta, (h, &g), (h, &g), ContourMethod::PoleComplement)?;
        checks.push(Check::rel("asymptotics.var_p1", a1, asymptotics::c2(&hp, h) / theta, 1e-10));
    }
    o.table("covariance", &cov)?;
    o.table("chebyshev", &cheb)?;

    let mut panels = Vec::new();
    for (i, &(m, al)) in a.boundary_panels.iter().enumerate() {
        let p = HatParams::new(m, al)?;
        let mut t = Table::new(&["n_hat", "l", "r"]);
        let mut ok = true;
        for j in 1..=a.boundary_points {
            let h = a.boundary_max_height * j as f64 / a.boundary_points as f64;
            let (l, r) = asymptotics::frozen_boundary(&p, LevelHeight::new(h)?);
            ok &= 0.0 <= l && l < r && r <= 1.0;
            t.push(row![h, l, r]);
        }
        checks.push(Check::abs(format!("asymptotics.boundary_in_unit_interval({m},{al})"), ok as u8 as f64, 1.0, 0.0));
        let path = o.table(&format!("frozen_boundary_{i}"), &t)?;
        panels.push(serde_json::json!({
            "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "m_hat": m,
            "alpha_hat": al,
        }));
    }
    o.json("frozen_boundary_panels.json", &panels)?;
    metadata("asymptotics", config, o)?;
    Ok(checks)
}

fn cmd_beta_infinity(config: &RunConfig, o: &Output) -> Result<Vec<Check>> {
    let b = &config.beta_infinity;
    let mut checks = Vec::new();

    let mut roots = Table::new(&["level", "index", "root"]);
    for level in 1..=b.n {
        let r = beta_infinity::jacobi_roots(level, b.m, b.alpha as f64)?;
        let residual = beta_infinity::stationarity_residual(&r.roots, level, b.m, b.alpha as f64);
        checks.push(Check::at_most(format!("beta_infinity.stationarity({level})"), residual, 1e-10));
        let increasing = r.roots.windows(2).all(|w| w[0] < w[1]);
        checks.push(Check::abs(format!("beta_infinity.roots_increasing({level})"), increasing as u8 as f64, 1.0, 0.0));
        for (i, x) in r.roots.iter().enumerate() {
            roots.push(row![level, i + 1, *x]);
        }
    }
    o.table("roots", &roots)?;

    let grid: Vec<Rational64> = b.theta_grid.iter().map(|&t| Rational64::from_integer(t)).collect();
    let e1 = ObservableSpec::elementary(1, 1);
    let seq = beta_infinity::theta_scaled_cov_sequence(Rational64::from_integer(b.alpha), b.m, &e1, &e1, &grid)?;
    let mut t = Table::new(&["theta", "theta_cov_e1"]);
    for (th, v) in b.theta_grid.iter().zip(&seq) {
        t.push(row![*th as f64, *v]);
    }
    o.table("theta_cov", &t)?;
    let (monotone, last) = beta_infinity::cauchy_summary(&seq);
    checks.push(Check::abs("beta_infinity.cauchy_monotone", monotone as u8 as f64, 1.0, 0.0));
    checks.push(Check::at_most("beta_infinity.cauchy_last_increment", last, 1e-4));
    let (al, m) = (b.alpha as f64, b.m as f64);
    if let Some(&v) = seq.last() {
        checks.push(Check::rel("beta_infinity.var_e1_limit", v, al * m / (al + m).powi(3), 1e-3));
    }

    let params = EnsembleParams::from_ratios(
        Rational64::from_integer(b.theta),
        Rational64::from_integer(b.alpha),
        b.m,
    )?;
    let mut cfg = config.sampler.clone();
    cfg.thin = b.thin;
    let report = beta_infinity::fluctuation_report(&params, b.n, &cfg, b.samples, b.threshold)?;
    checks.push(Check::at_least("beta_infinity.concentrated_fraction", report.concentrated_fraction, 0.99));
    for (i, &(s, se)) in report.skewness.iter().enumerate() {
        checks.push(Check::at_most(format!("beta_infinity.skewness_z({})", i + 1), (s / se).abs(), 3.0));
    }
    checks.push(Check::at_most("beta_infinity.linearization_z", report.max_linearization_z(), 3.0));
    o.json("fluctuation_summary.json", &report)?;
    metadata("beta-infinity", config, o)?;
    Ok(checks)
}

fn cmd_ho(config: &RunConfig, o: &Output) -> Result<Vec<Check>> {
    let h = &config.ho;
    let q = &h.quadrature;
    let tol = h.tolerance;
    let mut t = Table::new(&["check", "theta", "value", "reference", "residual", "tolerance", "pass"]);
    let mut checks = Vec::new();
    let mut record = |t: &mut Table, name: String, theta: f64, value: f64, reference: f64, tol: f64| {
        let residual = (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE);
        let pass = residual <= tol;
        t.push(row![name.clone(), theta, value, reference, residual, tol, pass]);
        checks.push(Check {
            name: format!("ho.{name}"),
            value: residual,
            reference: 0.0,
            tolerance: tol,
            pass,
        });
    };
    let r_full = [1.9, 0.7];
    for &theta in &h.thetas {
        for (n, m) in [(1usize, 1usize), (1, 2), (2, 2), (2, 3)] {
            let r = &r_full[..n];
            let p = HOPoint::new(r.to_vec(), ho::principal_point(m, theta), theta)?;
            let v = ho::ho_eval(&p, q)?;
            record(&mut t, format!("principal({n},{m})"), theta, v, ho::principal_closed_form(r, m, theta), tol);
            let d = ho::ho_dual_eval(&p, q)?;
            record(&mut t, format!("dual_principal({n},{m})"), theta, d, ho::dual_principal_closed_form(r, m, theta), tol);
        }
        for (a, b) in [(-0.4, -0.3), (0.25, -0.9)] {
            let (lhs, rhs) = ho::cauchy_check(&[a], &[b], theta, q)?;
            record(&mut t, format!("cauchy({a},{b})"), theta, lhs, rhs, 1e-8);
        }
        for (nv, r) in [(1usize, &r_full[..1]), (2, &r_full[..1]), (2, &r_full[..])] {
            let y = [0.3, -0.45];
            for k in 1..=nv {
                let (applied, expected) = ho::eigen_check(r, theta, nv, k, &y[..nv], q)?;
                record(&mut t, format!("eigen(n={},N={nv},k={k})", r.len()), theta, applied, expected, tol);
            }
        }
        let shifted = HOPoint::new(r_full.to_vec(), vec![0.2 + 0.6, -0.5 + 0.6], theta)?;
        let base = HOPoint::new(r_full.to_vec(), vec![0.2, -0.5], theta)?;
        let hom = ho::ho_eval(&shifted, q)?;
        let expected = (0.6 * (r_full[0] + r_full[1])).exp() * ho::ho_eval(&base, q)?;
        record(&mut t, "homogeneity".into(), theta, hom, expected, tol);
        let swapped = ho::ho_eval(&HOPoint::new(r_full.to_vec(), vec![-0.5, 0.2], theta)?, q)?;
        record(&mut t, "symmetry".into(), theta, swapped, ho::ho_eval(&base, q)?, tol);
    }
    // second-order decay of the Calogero residual
    let mut cal = Table::new(&["theta", "step", "residual"]);
    for &theta in &h.thetas {
        let steps = [0.08, 0.04, 0.02];
        let res: Vec<f64> = steps
            .iter()
            .map(|&s| ho::calogero_residual(&r_full, &[0.3, -0.45], theta, s, q))
            .collect::<Result<_>>()?;
        for (s, r) in steps.iter().zip(&res) {
            cal.push(row![theta, *s, *r]);
        }
        if theta == 1.0 {
            checks.push(Check::at_most("ho.calogero_theta_one", res[2], 1e-4));
        } else {
            // halving the step divides an O(h²) residual by about 4
            checks.push(Check::at_least(format!("ho.calogero_order({theta})"), res[1] / res[2], 3.0));
        }
    }
    o.table("ho_identities", &t)?;
    o.table("calogero", &cal)?;
    metadata("ho", config, o)?;
    Ok(checks)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(cli.command, &config, &cli.out) {
        Ok(checks) => {
            let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
            for c in &failed {
                eprintln!("FAIL {}: {} (reference {}, tolerance {})", c.name, c.value, c.reference, c.tolerance);
            }
            println!("{} checks, {} failed; outputs in {}", checks.len(), failed.len(), cli.out.display());
            i32::from(!failed.is_empty())
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
