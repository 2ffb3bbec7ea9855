//! Discrete principle of conditioning.
//!
//! An adapted array is the sequence of summands `Phi_j * dM_j` read along a
//! resolution, where `Phi_j` only sees increments of earlier cells. Its
//! decoupled tangent array keeps the same coefficients and swaps the
//! increments for an independent copy of the measure. Conditionally on the
//! main stream the decoupled total is an integral of a deterministic
//! integrand, so its conditional characteristic function is `exp(psi(u))`
//! in closed form.
//!
//! [`poc_verdict`] runs a family of tangent pairs indexed by `n` and reports
//! the quantities the conditioning argument needs: head second moments,
//! the distance of the conditional CF to a (random) target, and the distance
//! of the original totals' CF to the averaged target. None of these are
//! asserted here.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chaos::{adapted_integrand, AdaptedIntegrand};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SymmetricKernel};
use crate::partition::{CellPartition, Resolution};
use crate::rmeasure::{levy_exponent_values, same_partition, sample_measure_stream, MeasureLaw, MeasureSample};
use crate::stats::{mc_moments, Estimate, Moments, Trend, CHUNK};

/// Per-trial state of a streaming coefficient rule. `coefficient` is always
/// asked before the increment of the same cell is revealed through
/// `observe`, which makes every rule adapted by construction.
pub trait RuleState {
    fn coefficient(&mut self, position: usize, cell: usize) -> f64;
    fn observe(&mut self, position: usize, cell: usize, increment: f64);
}

pub trait AdaptedRule: Send + Sync {
    fn start(&self) -> Box<dyn RuleState + '_>;

    fn name(&self) -> &str {
        "custom"
    }
}

/// How the coefficients `Phi_j` are produced from the main stream.
#[derive(Clone)]
pub enum IntegrandSpec {
    /// One fixed value per cell (indexed by cell id).
    Deterministic(Vec<f64>),
    /// `Phi_j = sum_k w_{jk} M_k` over triples `(j, k, w)`; each `k` must
    /// precede `j`.
    Linear(Vec<(usize, usize, f64)>),
    /// The adapted representation `h_pi(f)` of an order-1 or order-2 kernel.
    Kernel(SymmetricKernel),
    Custom(Arc<dyn AdaptedRule>),
}

impl fmt::Debug for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrandSpec::Deterministic(v) => f.debug_tuple("Deterministic").field(&v.len()).finish(),
            IntegrandSpec::Linear(w) => f.debug_tuple("Linear").field(&w.len()).finish(),
            IntegrandSpec::Kernel(k) => f.debug_tuple("Kernel").field(&k.order()).field(&k.nnz()).finish(),
            IntegrandSpec::Custom(r) => f.debug_tuple("Custom").field(&r.name()).finish(),
        }
    }
}

impl IntegrandSpec {
    pub fn validate(&self, resolution: &Resolution) -> Result<()> {
        let partition = resolution.partition();
        match self {
            IntegrandSpec::Deterministic(v) if v.len() != partition.len() => {
                Err(Error::LengthMismatch { left: v.len(), right: partition.len() })
            }
            IntegrandSpec::Linear(weights) => {
                for &(j, k, _) in weights {
                    partition.check_id(j)?;
                    partition.check_id(k)?;
                    if !resolution.precedes(k, j) {
                        return Err(Error::NotAdapted { cell: j, depends_on: k });
                    }
                }
                Ok(())
            }
            IntegrandSpec::Kernel(f) => {
                if !same_partition(f.partition(), partition) {
                    return Err(Error::PartitionMismatch);
                }
                if !(1..=2).contains(&f.order()) {
                    return Err(Error::UnsupportedIntegral { order: f.order(), reason: "the adapted representation (orders 1 and 2 only)" });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Coefficients by cell id, computed from the main sample.
    pub fn coefficients(&self, resolution: &Resolution, main: &MeasureSample) -> Result<AdaptedIntegrand> {
        self.validate(resolution)?;
        let n = resolution.partition().len();
        let (values, source) = match self {
            IntegrandSpec::Deterministic(v) => (v.clone(), "deterministic".to_string()),
            IntegrandSpec::Linear(weights) => {
                let mut values = vec![0.0; n];
                for &(j, k, w) in weights {
                    values[j] += w * main.increment(k);
                }
                (values, "linear".to_string())
            }
            IntegrandSpec::Kernel(f) => return adapted_integrand(f, resolution, main),
            IntegrandSpec::Custom(rule) => {
                let mut values = vec![0.0; n];
                let mut state = rule.start();
                for (pos, cell) in resolution.ordered_cells().into_iter().enumerate() {
                    values[cell] = state.coefficient(pos, cell);
                    state.observe(pos, cell, main.increment(cell));
                }
                (values, rule.name().to_string())
            }
        };
        Ok(AdaptedIntegrand::from_sample(resolution, main, values, source))
    }
}

/// JSON form of an integrand for the command line:
/// `{"deterministic":[...]}`, `{"linear":[[j,k,w],...]}` or
/// `{"kernel":{"order":2,"entries":[...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrandFile {
    Deterministic(Vec<f64>),
    Linear(Vec<(usize, usize, f64)>),
    Kernel(KernelSpec),
}

impl IntegrandFile {
    pub fn build(&self, partition: &Arc<CellPartition>) -> Result<IntegrandSpec> {
        Ok(match self {
            IntegrandFile::Deterministic(v) => IntegrandSpec::Deterministic(v.clone()),
            IntegrandFile::Linear(w) => IntegrandSpec::Linear(w.clone()),
            IntegrandFile::Kernel(k) => IntegrandSpec::Kernel(k.build(partition.clone())?),
        })
    }
}

/// Summands of one adapted array, listed in resolution order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedArray {
    cells: Arc<Vec<usize>>,
    coefficients: Vec<f64>,
    increments: Vec<f64>,
    boundary: usize,
    law: MeasureLaw,
}

impl AdaptedArray {
    fn new(cells: Arc<Vec<usize>>, u: &AdaptedIntegrand, sample: &MeasureSample, boundary: usize) -> Self {
        let coefficients = cells.iter().map(|&c| u.value(c)).collect();
        let increments = cells.iter().map(|&c| sample.increment(c)).collect();
        Self { cells, coefficients, increments, boundary, law: sample.law() }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn law(&self) -> MeasureLaw {
        self.law
    }

    /// Cell id behind the `j`-th summand.
    pub fn cell(&self, j: usize) -> usize {
        self.cells[j]
    }

    pub fn coefficient(&self, j: usize) -> f64 {
        self.coefficients[j]
    }

    pub fn increment(&self, j: usize) -> f64 {
        self.increments[j]
    }

    pub fn summand(&self, j: usize) -> f64 {
        self.coefficients[j] * self.increments[j]
    }

    /// Number of summands in the head `S_{n, r_n}`.
    pub fn boundary(&self) -> usize {
        self.boundary
    }

    /// Sum of the first `k` summands.
    pub fn partial_sum(&self, k: usize) -> f64 {
        (0..k.min(self.len())).map(|j| self.summand(j)).sum()
    }

    pub fn head(&self) -> f64 {
        self.partial_sum(self.boundary)
    }

    pub fn total(&self) -> f64 {
        self.partial_sum(self.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentArrayPair {
    pub original: AdaptedArray,
    pub decoupled: AdaptedArray,
    integrand: AdaptedIntegrand,
}

impl TangentArrayPair {
    pub fn integrand(&self) -> &AdaptedIntegrand {
        &self.integrand
    }

    fn exponent(&self, lambda: f64, cells: &[usize]) -> Complex64 {
        let u = &self.integrand;
        let p = u.partition();
        match u.law() {
            MeasureLaw::Gaussian => {
                let norm: f64 = cells.iter().map(|&c| u.value(c).powi(2) * p.mass(c)).sum();
                Complex64::new(-0.5 * lambda * lambda * norm, 0.0)
            }
            MeasureLaw::CompensatedPoisson => {
                let mut psi = Complex64::new(0.0, 0.0);
                for &c in cells {
                    let th = lambda * u.value(c);
                    if th != 0.0 {
                        psi += p.mass(c) * Complex64::new(th.cos() - 1.0, th.sin() - th);
                    }
                }
                psi
            }
        }
    }

    /// Conditional CF of the decoupled head `S^(2)_{n, r_n}` given the main stream.
    pub fn conditional_cf_head(&self, lambda: f64) -> Complex64 {
        self.exponent(lambda, &self.original.cells[..self.original.boundary]).exp()
    }
}

/// Builds the pair on the main stream (0) and copy stream 1 of `(seed, trial)`.
/// `head_cut` is the time `t_n` whose slice forms the head.
pub fn build_tangent_pair(
    spec: &IntegrandSpec,
    resolution: &Resolution,
    law: MeasureLaw,
    seed: u64,
    trial: u64,
    head_cut: f64,
) -> Result<TangentArrayPair> {
    let p = resolution.partition();
    let main = sample_measure_stream(p, law, seed, trial, 0);
    let copy = sample_measure_stream(p, law, seed, trial, 1);
    tangent_pair_from_samples(spec, resolution, &main, &copy, head_cut)
}

/// Like [`build_tangent_pair`] with externally drawn main and copy samples.
pub fn tangent_pair_from_samples(
    spec: &IntegrandSpec,
    resolution: &Resolution,
    main: &MeasureSample,
    copy: &MeasureSample,
    head_cut: f64,
) -> Result<TangentArrayPair> {
    if !(0.0..=1.0).contains(&head_cut) {
        return Err(Error::TimeOutOfRange(head_cut));
    }
    if copy.stream() == main.stream() {
        return Err(Error::StreamMismatch("decoupled array needs an independent copy stream"));
    }
    if copy.law() != main.law() {
        return Err(Error::LawMismatch { expected: main.law().name() });
    }
    for s in [main, copy] {
        if !same_partition(s.partition(), resolution.partition()) {
            return Err(Error::PartitionMismatch);
        }
    }
    let integrand = spec.coefficients(resolution, main)?;
    let cells = Arc::new(resolution.ordered_cells());
    let boundary = cells.iter().take_while(|&&c| resolution.in_slice(c, head_cut)).count();
    Ok(TangentArrayPair {
        original: AdaptedArray::new(cells.clone(), &integrand, main, boundary),
        decoupled: AdaptedArray::new(cells, &integrand, copy, boundary),
        integrand,
    })
}

/// `E[exp(i lambda S^(2)) | main stream] = exp(psi(u; lambda))`.
pub fn conditional_cf_decoupled(pair: &TangentArrayPair, lambda: f64) -> Complex64 {
    let u = &pair.integrand;
    levy_exponent_values(&u.law().characteristics(), u.partition(), u.values(), lambda)
        .expect("built-in characteristics always match the partition")
        .exp()
}

/// Empirical (weighted) characteristic function over a lambda grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnEstimate {
    pub lambda: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Standard errors of the real and imaginary parts.
    pub std_err: Vec<(f64, f64)>,
    pub weighted: bool,
}

impl CharFnEstimate {
    /// `sqrt(se_re^2 + se_im^2)`, the standard error of the modulus of a
    /// deviation.
    pub fn combined_std_err(&self, i: usize) -> f64 {
        let (a, b) = self.std_err[i];
        a.hypot(b)
    }

    /// True when both components sit within `sigmas` standard errors of
    /// `target(lambda)` at every grid point.
    pub fn matches(&self, target: impl Fn(f64) -> Complex64, sigmas: f64) -> bool {
        self.lambda.iter().enumerate().all(|(i, &l)| {
            let d = self.values[i] - target(l);
            let (se_re, se_im) = self.std_err[i];
            Estimate { mean: d.re, std_err: se_re }.within(0.0, sigmas)
                && Estimate { mean: d.im, std_err: se_im }.within(0.0, sigmas)
        })
    }
}

/// Per lambda, the mean of `Z e^{i lambda X}` with standard errors; `z =
/// None` gives the plain empirical CF.
pub fn estimate_stable_cf(x: &[f64], z: Option<&[Complex64]>, lambda: &[f64]) -> Result<CharFnEstimate> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(z) = z {
        if z.len() != x.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: z.len() });
        }
    }
    let mut values = Vec::with_capacity(lambda.len());
    let mut std_err = Vec::with_capacity(lambda.len());
    for &l in lambda {
        let (mut re, mut im) = (Moments::default(), Moments::default());
        for (xc, zc) in x.chunks(CHUNK).enumerate().map(|(i, xc)| (xc, z.map(|z| &z[i * CHUNK..i * CHUNK + xc.len()]))) {
            let (mut cre, mut cim) = (Moments::default(), Moments::default());
            for (j, &xv) in xc.iter().enumerate() {
                let e = Complex64::new(0.0, l * xv).exp();
                let w = zc.map_or(e, |zc| zc[j] * e);
                cre.push(w.re);
                cim.push(w.im);
            }
            re.merge(&cre);
            im.merge(&cim);
        }
        values.push(Complex64::new(re.mean(), im.mean()));
        std_err.push((re.std_error(), im.std_error()));
    }
    Ok(CharFnEstimate { lambda: lambda.to_vec(), values, std_err, weighted: z.is_some() })
}

/// Targets with modulus below this are flagged as ill-conditioned.
pub const PHI_CLIP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PocConfig {
    pub n_values: Vec<usize>,
    pub trials: u64,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocLambdaRow {
    pub lambda: f64,
    /// `E|E[exp(i lambda S^(2)_head) | main] - 1|`
    pub head_cf_distance: Estimate,
    /// `E|E[exp(i lambda S^(2)) | main] - phi|`
    pub cp2_distance: Estimate,
    /// `|E exp(i lambda S^(1)) - E phi|`
    pub original_cf_distance: Estimate,
    pub target_mean: Complex64,
    /// Fraction of trials with `|phi| < PHI_CLIP`.
    pub clipped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocStage {
    pub n: usize,
    pub trials: u64,
    pub head_sq_original: Estimate,
    pub head_sq_decoupled: Estimate,
    pub rows: Vec<PocLambdaRow>,
}

impl PocStage {
    pub fn cp2_max(&self) -> f64 {
        self.rows.iter().map(|r| r.cp2_distance.mean).fold(0.0, f64::max)
    }

    pub fn original_max(&self) -> f64 {
        self.rows.iter().map(|r| r.original_cf_distance.mean).fold(0.0, f64::max)
    }

    pub fn clipped(&self) -> bool {
        self.rows.iter().any(|r| r.clipped_fraction > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocReport {
    pub stages: Vec<PocStage>,
}

impl PocReport {
    pub fn cp1_trend(&self) -> Trend {
        Trend::of(&self.stages.iter().map(|s| s.head_sq_original.mean).collect::<Vec<_>>())
    }

    pub fn cp2_trend(&self) -> Trend {
        Trend::of(&self.stages.iter().map(PocStage::cp2_max).collect::<Vec<_>>())
    }

    pub fn original_trend(&self) -> Trend {
        Trend::of(&self.stages.iter().map(PocStage::original_max).collect::<Vec<_>>())
    }

    /// `(n, lambda, metric, value, std_err)` rows; `lambda` is `None` for
    /// metrics that do not depend on it.
    pub fn records(&self) -> Vec<(usize, Option<f64>, &'static str, f64, f64)> {
        let mut out = Vec::new();
        for s in &self.stages {
            out.push((s.n, None, "cp1_head_sq_original", s.head_sq_original.mean, s.head_sq_original.std_err));
            out.push((s.n, None, "cp1_head_sq_decoupled", s.head_sq_decoupled.mean, s.head_sq_decoupled.std_err));
            for r in &s.rows {
                let l = Some(r.lambda);
                out.push((s.n, l, "cp1_head_cf_distance", r.head_cf_distance.mean, r.head_cf_distance.std_err));
                out.push((s.n, l, "cp2_cf_distance", r.cp2_distance.mean, r.cp2_distance.std_err));
                out.push((s.n, l, "original_cf_distance", r.original_cf_distance.mean, r.original_cf_distance.std_err));
                out.push((s.n, l, "phi_clipped_fraction", r.clipped_fraction, 0.0));
            }
        }
        out
    }
}

// per-trial columns: two head squares, then seven per lambda
const HEAD: usize = 2;
const PER_LAMBDA: usize = 7;

/// Runs every stage of a tangent-pair family and reports the conditioning
/// metrics. `phi_target(n, pair, lambda)` is the per-trial target, a function
/// of the main stream only.
pub fn poc_verdict<P, T>(config: &PocConfig, pair_fn: P, phi_target: T) -> Result<PocReport>
where
    P: Fn(usize, u64) -> Result<TangentArrayPair> + Sync,
    T: Fn(usize, &TangentArrayPair, f64) -> Complex64 + Sync,
{
    let lambda = &config.lambda;
    let width = HEAD + PER_LAMBDA * lambda.len();
    let mut stages = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let ms = mc_moments(config.trials, width, |trial, row| {
            let pair = pair_fn(n, trial)?;
            row[0] = pair.original.head().powi(2);
            row[1] = pair.decoupled.head().powi(2);
            let total = pair.original.total();
            for (i, &l) in lambda.iter().enumerate() {
                let phi = phi_target(n, &pair, l);
                let c = &mut row[HEAD + PER_LAMBDA * i..HEAD + PER_LAMBDA * (i + 1)];
                c[0] = (pair.conditional_cf_head(l) - 1.0).norm();
                c[1] = (conditional_cf_decoupled(&pair, l) - phi).norm();
                c[2] = f64::from(u8::from(phi.norm() < PHI_CLIP));
                let d = Complex64::new(0.0, l * total).exp() - phi;
                c[3] = d.re;
                c[4] = d.im;
                c[5] = phi.re;
                c[6] = phi.im;
            }
            Ok(())
        })?;
        let rows = lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let c = &ms[HEAD + PER_LAMBDA * i..HEAD + PER_LAMBDA * (i + 1)];
                let d = Complex64::new(c[3].mean(), c[4].mean());
                PocLambdaRow {
                    lambda: l,
                    head_cf_distance: c[0].estimate(),
                    cp2_distance: c[1].estimate(),
                    original_cf_distance: Estimate { mean: d.norm(), std_err: c[3].std_error().hypot(c[4].std_error()) },
                    target_mean: Complex64::new(c[5].mean(), c[6].mean()),
                    clipped_fraction: c[2].mean(),
                }
            })
            .collect();
        stages.push(PocStage {
            n,
            trials: config.trials,
            head_sq_original: ms[0].estimate(),
            head_sq_decoupled: ms[1].estimate(),
            rows,
        });
    }
    Ok(PocReport { stages })
}
