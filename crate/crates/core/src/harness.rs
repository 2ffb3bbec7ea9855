//! Command-line runs: configuration, input files, the worker pool and CSV
//! emission. Every subcommand is a pure function of its [`RunConfig`]; the
//! worker count only changes scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use crate::chaos::{adapted_integral, adapted_integrand, eval_multiple_integral, product_formula_check};
use crate::clt::{clt_pipeline, findev_identity, CltConfig};
use crate::error::{Error, Result};
use crate::kernels::{factorial, kernel_norm_sq, KernelSpec, SymmetricKernel};
use crate::partition::{CellPartition, Direction, PartitionSpec, Resolution};
use crate::poc::{build_tangent_pair, conditional_cf_decoupled, poc_verdict, IntegrandFile, PocConfig, PocReport};
use crate::rmeasure::{levy_exponent, sample_measure, FirstOrderKernel, LawSpec, MeasureLaw};
use crate::scenarios::{
    block_example_kernel, pair_terminal, refined_block_kernel, switching_study, BlockScenario, SwitchingScenario,
    BLOCK_REFINEMENT, SWITCHING_GAMMAS,
};
use crate::stats::{mc_moments, relative_gap};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Lk,
    Simulate,
    ChaosCheck,
    PocVerify,
    Clt,
    ScenarioBlock,
    ScenarioSwitching,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lk => "lk",
            Command::Simulate => "simulate",
            Command::ChaosCheck => "chaos-check",
            Command::PocVerify => "poc-verify",
            Command::Clt => "clt",
            Command::ScenarioBlock => "scenario block",
            Command::ScenarioSwitching => "scenario switching",
        }
    }

    /// Column layout written by this command, see [`schema_columns`].
    pub fn schema(self) -> u32 {
        match self {
            Command::Lk => 1,
            Command::Simulate => 2,
            Command::ChaosCheck => 3,
            Command::PocVerify => 4,
            Command::Clt => 5,
            Command::ScenarioBlock | Command::ScenarioSwitching => 6,
        }
    }
}

pub fn schema_columns(schema: u32) -> &'static [&'static str] {
    match schema {
        1 => &["lambda", "re_psi", "im_psi"],
        2 => &["cell", "mass", "metric", "target", "value", "std_err"],
        3 => &["metric", "target", "value", "std_err"],
        4 => &["n", "lambda", "metric", "value", "std_err"],
        5 => &["n", "metric", "analytic_value", "mc_value", "std_err"],
        6 => &["n", "lambda", "metric", "analytic_value", "value", "std_err"],
        _ => &[],
    }
}

/// `min:max:count`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self { min: -3.0, max: 3.0, count: 21 }
    }
}

impl FromStr for LambdaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("lambda grid {s:?} is not min:max:count"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        let min: f64 = a.trim().parse().map_err(|_| bad())?;
        let max: f64 = b.trim().parse().map_err(|_| bad())?;
        let count: usize = c.trim().parse().map_err(|_| bad())?;
        if !min.is_finite() || !max.is_finite() || count == 0 || min > max || (count == 1 && min != max) {
            return Err(bad());
        }
        Ok(Self { min, max, count })
    }
}

impl LambdaGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub partition: Option<PathBuf>,
    pub kernel: Option<PathBuf>,
    pub integrand: Option<PathBuf>,
    /// `gaussian`, `cpoisson`, or a path to a `{"law": ...}` file.
    pub law: Option<String>,
    pub n_list: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub lambda: LambdaGrid,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub steps: usize,
    pub head_cut: f64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        let n_list = match command {
            Command::Clt | Command::ScenarioBlock => vec![4, 16, 64, 256],
            Command::ScenarioSwitching => vec![25, 100, 200],
            _ => Vec::new(),
        };
        Self {
            command,
            partition: None,
            kernel: None,
            integrand: None,
            law: None,
            n_list,
            trials: 100_000,
            seed: 0,
            lambda: LambdaGrid::default(),
            out: None,
            workers: 1,
            steps: 2000,
            head_cut: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("--trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        if matches!(self.command, Command::Clt | Command::ScenarioBlock | Command::ScenarioSwitching)
            && self.n_list.is_empty()
            && self.kernel.is_none()
        {
            return Err(Error::Config("--n-list is empty".into()));
        }
        Ok(())
    }

    fn law(&self) -> Result<MeasureLaw> {
        match self.law.as_deref() {
            None => Ok(MeasureLaw::CompensatedPoisson),
            Some(s @ ("gaussian" | "cpoisson")) => s.parse(),
            Some(path) => {
                let text = read(Path::new(path))?;
                let spec: LawSpec =
                    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_string(), source })?;
                Ok(spec.law)
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.display().to_string(), source })
}

/// Kernel input: a [`KernelSpec`] with an optional embedded partition.
#[derive(Debug, Clone, Deserialize)]
pub struct KernelFile {
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    #[serde(flatten)]
    pub kernel: KernelSpec,
}

/// Integrand input: an [`IntegrandFile`] with an optional embedded partition
/// and resolution direction.
#[derive(Debug, Clone, Deserialize)]
pub struct IntegrandInput {
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub reversed: bool,
    #[serde(flatten)]
    pub integrand: IntegrandFile,
}

/// `--partition` wins over a partition embedded in the input file.
fn resolve_partition(flag: Option<&Path>, embedded: Option<&PartitionSpec>) -> Result<Arc<CellPartition>> {
    let spec = match (flag, embedded) {
        (Some(path), _) => PartitionSpec::load(path)?,
        (None, Some(spec)) => spec.clone(),
        (None, None) => return Err(Error::Config("no partition: pass --partition or embed one in the input file".into())),
    };
    Ok(Arc::new(spec.build()?))
}

fn load_kernel(config: &RunConfig) -> Result<SymmetricKernel> {
    let path = config.kernel.as_deref().ok_or_else(|| Error::Config("--kernel is required".into()))?;
    let file: KernelFile = parse_json(path)?;
    let p = resolve_partition(config.partition.as_deref(), file.partition.as_ref())?;
    file.kernel.build(p)
}

/// CSV text with the versioned header comment.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(schema: u32) -> Self {
        let cols = schema_columns(schema);
        Self { text: format!("# chaoslab v{VERSION} schema={schema}\n{}\n", cols.join(",")), width: cols.len() }
    }

    pub fn row(&mut self, fields: &[Field]) {
        debug_assert_eq!(fields.len(), self.width);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match f {
                Field::Int(v) => write!(self.text, "{v}").unwrap(),
                Field::Num(v) => write!(self.text, "{v:?}").unwrap(),
                Field::Text(s) => self.text.push_str(s),
                Field::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(usize),
    Num(f64),
    Text(String),
    Empty,
}

impl From<Option<f64>> for Field {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Field::Empty, Field::Num)
    }
}

fn num(v: f64) -> Field {
    Field::Num(v)
}

fn text(s: impl Into<String>) -> Field {
    Field::Text(s.into())
}

/// Runs the command on a pool of `config.workers` threads and returns the
/// CSV text.
pub fn execute(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| match config.command {
        Command::Lk => lk(config),
        Command::Simulate => simulate(config),
        Command::ChaosCheck => chaos_check(config),
        Command::PocVerify => poc_verify(config),
        Command::Clt => clt(config),
        Command::ScenarioBlock => scenario_block(config),
        Command::ScenarioSwitching => scenario_switching(config),
    })
}

/// Executes and writes the CSV to `config.out` (stdout when absent). Returns
/// the process exit status; errors are reported on stderr.
pub fn run(config: &RunConfig) -> i32 {
    let result = execute(config).and_then(|csv| match &config.out {
        Some(path) => std::fs::write(path, csv).map_err(|source| Error::Io { path: path.display().to_string(), source }),
        None => {
            print!("{csv}");
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("chaoslab {}: {e}", config.command.name());
            e.exit_code()
        }
    }
}

fn lk(config: &RunConfig) -> Result<String> {
    let law = config.law()?;
    let f = load_kernel(config)?;
    if f.order() != 1 {
        return Err(Error::OrderMismatch { expected: 1, found: f.order() });
    }
    let mut values = vec![0.0; f.partition().len()];
    for (t, v) in f.entries() {
        values[t.get(0)] = v;
    }
    let h = FirstOrderKernel::new(f.partition().clone(), values)?;
    let mut csv = Csv::new(Command::Lk.schema());
    for l in config.lambda.points() {
        let psi = levy_exponent(law, &h, l);
        if !psi.re.is_finite() || !psi.im.is_finite() {
            return Err(Error::Numerical(format!("exponent at lambda {l} is {psi}")));
        }
        csv.row(&[num(l), num(psi.re), num(psi.im)]);
    }
    Ok(csv.finish())
}

fn simulate(config: &RunConfig) -> Result<String> {
    let law = config.law()?;
    let p = match &config.kernel {
        Some(path) => {
            let file: KernelFile = parse_json(path)?;
            resolve_partition(config.partition.as_deref(), file.partition.as_ref())?
        }
        None => resolve_partition(config.partition.as_deref(), None)?,
    };
    let n = p.len();
    let ms = mc_moments(config.trials, 2 * n, |t, row| {
        let s = sample_measure(&p, law, config.seed, t);
        for (i, &x) in s.increments().iter().enumerate() {
            row[2 * i] = x;
            row[2 * i + 1] = x * x;
        }
        Ok(())
    })?;
    let mut csv = Csv::new(Command::Simulate.schema());
    for c in p.cells() {
        let (m1, m2) = (ms[2 * c.id].estimate(), ms[2 * c.id + 1].estimate());
        csv.row(&[Field::Int(c.id), num(c.mass), text("mean"), num(0.0), num(m1.mean), num(m1.std_err)]);
        csv.row(&[Field::Int(c.id), num(c.mass), text("second_moment"), num(c.mass), num(m2.mean), num(m2.std_err)]);
    }
    Ok(csv.finish())
}

fn chaos_check(config: &RunConfig) -> Result<String> {
    let law = config.law()?;
    let f = load_kernel(config)?;
    let p = f.partition().clone();
    let res = Resolution::forward(p.clone());
    let clark_ocone = f.order() == 1 || (f.order() == 2 && f.offdiag_only());
    let product = law == MeasureLaw::CompensatedPoisson && f.order() <= 2 && f.order() >= 1;
    // columns: value, value^2, Clark-Ocone gap, product-formula gap
    let ms = mc_moments(config.trials, 4, |t, row| {
        let s = sample_measure(&p, law, config.seed, t);
        let x = eval_multiple_integral(&s, &f)?;
        row[0] = x;
        row[1] = x * x;
        if clark_ocone {
            row[2] = relative_gap(adapted_integral(&adapted_integrand(&f, &res, &s)?, &s)?, x);
        }
        if product {
            let (lhs, rhs) = product_formula_check(&s, &f, &f)?;
            row[3] = relative_gap(lhs, rhs);
        }
        Ok(())
    })?;
    let mut csv = Csv::new(Command::ChaosCheck.schema());
    let (m1, m2) = (ms[0].estimate(), ms[1].estimate());
    csv.row(&[text("mean"), num(0.0), num(m1.mean), num(m1.std_err)]);
    let iso = factorial(f.order()) as f64 * kernel_norm_sq(&f);
    csv.row(&[text("second_moment"), num(iso), num(m2.mean), num(m2.std_err)]);
    if clark_ocone {
        csv.row(&[text("clark_ocone_mean_rel_gap"), num(0.0), num(ms[2].mean()), num(ms[2].std_error())]);
    }
    if product {
        csv.row(&[text("product_formula_mean_rel_gap"), num(0.0), num(ms[3].mean()), num(ms[3].std_error())]);
    }
    Ok(csv.finish())
}

fn poc_rows(csv: &mut Csv, report: &PocReport, with_analytic: bool) {
    for (n, l, metric, value, se) in report.records() {
        let mut row = vec![Field::Int(n), Field::from(l), text(metric)];
        if with_analytic {
            row.push(Field::Empty);
        }
        row.extend([num(value), num(se)]);
        csv.row(&row);
    }
}

fn poc_verify(config: &RunConfig) -> Result<String> {
    let law = config.law()?;
    let path = config.integrand.as_deref().ok_or_else(|| Error::Config("--integrand is required".into()))?;
    let input: IntegrandInput = parse_json(path)?;
    let p = resolve_partition(config.partition.as_deref(), input.partition.as_ref())?;
    let direction = if input.reversed { Direction::Reversed } else { Direction::Forward };
    let res = Resolution::new(p.clone(), direction);
    let spec = input.integrand.build(&p)?;
    spec.validate(&res)?;
    let poc = PocConfig { n_values: vec![p.len()], trials: config.trials, lambda: config.lambda.points() };
    let report = poc_verdict(
        &poc,
        |_, t| build_tangent_pair(&spec, &res, law, config.seed, t, config.head_cut),
        |_, pair, l| conditional_cf_decoupled(pair, l),
    )?;
    let mut csv = Csv::new(Command::PocVerify.schema());
    poc_rows(&mut csv, &report, false);
    Ok(csv.finish())
}

fn clt(config: &RunConfig) -> Result<String> {
    let lambda = config.lambda.points();
    let file_kernel = match &config.kernel {
        Some(_) => Some(load_kernel(config)?),
        None => None,
    };
    let n_values = match &file_kernel {
        Some(f) => vec![f.partition().len()],
        None => config.n_list.clone(),
    };
    let from_file = |_: usize| Ok(file_kernel.clone().expect("kernel loaded"));
    let refined = |n: usize| refined_block_kernel(n, BLOCK_REFINEMENT);
    let family: &(dyn Fn(usize) -> Result<SymmetricKernel> + Sync) =
        if file_kernel.is_some() { &from_file } else { &block_example_kernel };
    let cc = CltConfig {
        n_values: n_values.clone(),
        trials: config.trials,
        seed: config.seed,
        poc_family: if file_kernel.is_some() { None } else { Some(&refined) },
        poc_trials: config.trials,
        poc_lambda: lambda,
    };
    let report = clt_pipeline(family, &cc)?;
    let mut csv = Csv::new(Command::Clt.schema());
    for (n, metric, analytic, mc, se) in report.rows() {
        csv.row(&[Field::Int(n), text(metric), analytic.into(), mc.into(), se.into()]);
    }
    for &n in &n_values {
        let r = findev_identity(&family(n)?, config.seed, config.trials)?;
        csv.row(&[Field::Int(n), text("findev_lhs"), num(r.rhs), num(r.lhs.mean), num(r.lhs.std_err)]);
        csv.row(&[Field::Int(n), text("findev_rhs_printed"), num(r.rhs_printed), Field::Empty, Field::Empty]);
    }
    Ok(csv.finish())
}

fn scenario_block(config: &RunConfig) -> Result<String> {
    let cc = CltConfig {
        n_values: config.n_list.clone(),
        trials: config.trials,
        seed: config.seed,
        poc_family: None,
        poc_trials: 0,
        poc_lambda: Vec::new(),
    };
    let report = clt_pipeline(&block_example_kernel, &cc)?;
    let mut csv = Csv::new(Command::ScenarioBlock.schema());
    for (n, metric, analytic, mc, se) in report.rows() {
        csv.row(&[Field::Int(n), Field::Empty, text(metric), analytic.into(), mc.into(), se.into()]);
    }
    let scenarios = config.n_list.iter().map(|&n| BlockScenario::new(n, BLOCK_REFINEMENT)).collect::<Result<Vec<_>>>()?;
    let poc = PocConfig { n_values: config.n_list.clone(), trials: config.trials, lambda: config.lambda.points() };
    let report = poc_verdict(
        &poc,
        |n, t| scenarios.iter().find(|s| s.n() == n).expect("scenario per n").pair(config.seed, t),
        |_, _, l| Complex64::new((-0.5 * l * l).exp(), 0.0),
    )?;
    poc_rows(&mut csv, &report, true);
    Ok(csv.finish())
}

fn scenario_switching(config: &RunConfig) -> Result<String> {
    let lambda = config.lambda.points();
    let mut csv = Csv::new(Command::ScenarioSwitching.schema());
    for &n in &config.n_list {
        let stage = switching_study(n, config.steps, config.seed, config.trials, &SWITCHING_GAMMAS, &lambda)?;
        for (g, est) in &stage.cf {
            for (i, &l) in est.lambda.iter().enumerate() {
                let target = crate::scenarios::switching_target_cf(*g, l);
                let (se_re, se_im) = est.std_err[i];
                csv.row(&[Field::Int(n), num(l), text(format!("stable_cf_re_gamma{g}")), num(target.re), num(est.values[i].re), num(se_re)]);
                csv.row(&[Field::Int(n), num(l), text(format!("stable_cf_im_gamma{g}")), num(target.im), num(est.values[i].im), num(se_im)]);
            }
        }
        let gap = |name: &str, e: crate::stats::Estimate| {
            vec![Field::Int(n), Field::Empty, text(name), num(0.0), num(e.mean), num(e.std_err)]
        };
        csv.row(&gap("norm_gap", stage.norm_gap));
        csv.row(&gap("reduction_gap", stage.reduction_gap));
    }
    let scenarios =
        config.n_list.iter().map(|&n| SwitchingScenario::new(n, config.steps)).collect::<Result<Vec<_>>>()?;
    let poc = PocConfig { n_values: config.n_list.clone(), trials: config.trials, lambda };
    let report = poc_verdict(
        &poc,
        |n, t| Ok(scenarios.iter().find(|s| s.n() == n).expect("scenario per n").pair(config.seed, t)?.1),
        |_, pair, l| {
            let w1 = pair_terminal(pair);
            Complex64::new((-0.5 * l * l * w1 * w1).exp(), 0.0)
        },
    )?;
    poc_rows(&mut csv, &report, true);
    Ok(csv.finish())
}
