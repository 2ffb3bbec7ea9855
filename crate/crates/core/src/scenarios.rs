//! The two worked examples: a Poisson block sequence satisfying the fourth
//! moment conditions, and the switching quadratic Brownian functional.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::SymmetricKernel;
use crate::partition::{uniform_partition, CellPartition, Resolution};
use crate::poc::{estimate_stable_cf, tangent_pair_from_samples, AdaptedRule, CharFnEstimate, IntegrandSpec, RuleState, TangentArrayPair};
use crate::rmeasure::{sample_measure_stream, MeasureLaw, MeasureSample};
use crate::rng::{self, family, StreamKey};
use crate::stats::{mc_aggregate, mc_collect, Estimate, CHUNK};

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("n must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `n` unit cells with value `(2n)^{-1/2}` on every within-cell block `{j, j}`.
pub fn block_example_kernel(n: usize) -> Result<SymmetricKernel> {
    check_n(n)?;
    let p = Arc::new(uniform_partition(n, 1.0)?);
    let v = (2.0 * n as f64).powf(-0.5);
    SymmetricKernel::from_entries(p, 2, (0..n).map(|j| ([j, j], v)))
}

/// The block example on a partition where each unit cell is split into `k`
/// subcells of mass `1/k`. Only pairs of distinct subcells in the same block
/// carry mass, so the kernel is off-diagonal at the cell level and its
/// adapted representation is nontrivial. The value
/// `(2n(1 - 1/k))^{-1/2}` keeps `2||f||^2 = 1`.
pub fn refined_block_kernel(n: usize, k: usize) -> Result<SymmetricKernel> {
    check_n(n)?;
    if k < 2 {
        return Err(Error::InvalidParameter("refinement needs at least 2 subcells".into()));
    }
    let p = Arc::new(uniform_partition(n * k, 1.0 / k as f64)?);
    let v = (2.0 * n as f64 * (1.0 - 1.0 / k as f64)).powf(-0.5);
    let mut entries = Vec::with_capacity(n * k * (k - 1) / 2);
    for j in 0..n {
        for a in 0..k {
            for b in a + 1..k {
                entries.push(([j * k + a, j * k + b], v));
            }
        }
    }
    SymmetricKernel::from_offdiag_entries(p, 2, entries)
}

/// `n^{-1/2} sum_j 2^{-1/2} (M_j^2 - M_j - 1)` straight from the increments.
pub fn block_example_closed_form(sample: &MeasureSample, n: usize) -> Result<f64> {
    if sample.law() != MeasureLaw::CompensatedPoisson {
        return Err(Error::LawMismatch { expected: "cpoisson" });
    }
    if sample.partition().len() != n {
        return Err(Error::LengthMismatch { left: sample.partition().len(), right: n });
    }
    let s: f64 = sample.increments().iter().map(|m| 0.5f64.sqrt() * (m * m - m - 1.0)).sum();
    Ok(s / (n as f64).sqrt())
}

/// Head cut `t_n = n^{-1/2}` used for the block family.
pub fn block_head_cut(n: usize) -> f64 {
    (n as f64).powf(-0.5)
}

/// Subcells per unit cell used when the block family is run through the
/// conditioning route.
pub const BLOCK_REFINEMENT: usize = 4;

/// The refined block family as tangent pairs along the forward resolution.
#[derive(Debug, Clone)]
pub struct BlockScenario {
    n: usize,
    resolution: Resolution,
    spec: IntegrandSpec,
}

impl BlockScenario {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let f = refined_block_kernel(n, k)?;
        let resolution = Resolution::forward(f.partition().clone());
        Ok(Self { n, resolution, spec: IntegrandSpec::Kernel(f) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &SymmetricKernel {
        match &self.spec {
            IntegrandSpec::Kernel(f) => f,
            _ => unreachable!("block scenario always wraps a kernel"),
        }
    }

    pub fn pair(&self, seed: u64, trial: u64) -> Result<TangentArrayPair> {
        let p = self.resolution.partition();
        let main = sample_measure_stream(p, MeasureLaw::CompensatedPoisson, seed, trial, 0);
        let copy = sample_measure_stream(p, MeasureLaw::CompensatedPoisson, seed, trial, 1);
        tangent_pair_from_samples(&self.spec, &self.resolution, &main, &copy, block_head_cut(self.n))
    }
}

/// A Brownian path on the uniform grid `k/m`, `k = 0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    increments: Vec<f64>,
    // values[k] = W_{k/m}, accumulated left to right
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn from_increments(increments: Vec<f64>) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::InvalidParameter("a path needs at least one step".into()));
        }
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut w = 0.0;
        values.push(w);
        for &d in &increments {
            w += d;
            values.push(w);
        }
        Ok(Self { increments, values })
    }

    /// `m` i.i.d. `N(0, 1/m)` steps drawn in order from the keyed stream
    /// `(seed, trial, 0, brownian tag)`.
    pub fn simulate(m: usize, seed: u64, trial: u64, stream: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("a path needs at least one step".into()));
        }
        let mut r = StreamKey::new(seed, trial, 0, rng::tag(family::BROWNIAN, stream)).rng();
        let scale = (m as f64).recip().sqrt();
        let increments = (0..m).map(|_| scale * rng::standard_normal(&mut r)).collect();
        Self::from_increments(increments)
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W_{k/m}`.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.steps()]
    }

    /// `W*_t = W_1 - W_{1-t}`, whose increments are those of `W` read
    /// backwards.
    pub fn reversed(&self) -> Self {
        let mut inc = self.increments.clone();
        inc.reverse();
        Self::from_increments(inc).expect("nonempty path")
    }

    /// `W^(n)`: the path itself for odd `n`, its reversal for even `n`.
    pub fn switched(&self, n: usize) -> Self {
        if n % 2 == 0 {
            self.reversed()
        } else {
            self.clone()
        }
    }
}

fn trapezoid(m: usize, g: impl Fn(usize) -> f64) -> f64 {
    let h = 1.0 / m as f64;
    let inner: f64 = (1..m).map(&g).sum();
    h * (inner + 0.5 * (g(0) + g(m)))
}

fn check_switching(n: usize, m: usize) -> Result<()> {
    check_n(n)?;
    if m < 100 {
        return Err(Error::InvalidParameter(format!("grid of {m} steps is too coarse (need at least 100)")));
    }
    Ok(())
}

/// `A_n = int_0^1 t^{2n} [W_1^2 - W_t^2] dt` for the path as given (no
/// switching), by the trapezoid rule.
pub fn quadratic_functional(path: &BrownianPath, n: usize) -> f64 {
    let m = path.steps();
    let w1 = path.terminal();
    trapezoid(m, |k| {
        let t = k as f64 / m as f64;
        t.powi(2 * n as i32) * (w1 * w1 - path.value(k).powi(2))
    })
}

/// `sqrt(n) (2n + 1) A_n` computed on `W^(n)`.
pub fn switching_functional(path: &BrownianPath, n: usize) -> f64 {
    let nf = n as f64;
    nf.sqrt() * (2.0 * nf + 1.0) * quadratic_functional(&path.switched(n), n)
}

/// `(W_1, sqrt(n)(2n+1) A_n)` for trial `trial` on an `m`-step grid.
pub fn simulate_switching_functional(n: usize, m: usize, seed: u64, trial: u64) -> Result<(f64, f64)> {
    check_switching(n, m)?;
    let path = BrownianPath::simulate(m, seed, trial, 0)?;
    Ok((path.terminal(), switching_functional(&path, n)))
}

/// The stochastic-integral form `2 sqrt(n) sum_k W_{k-1} t_{k-1}^{2n+1} dW_k`
/// plus the explicit drift `sqrt(n) / (2n + 2)`, as a cross-check on
/// [`switching_functional`].
pub fn switching_reduction(path: &BrownianPath, n: usize) -> f64 {
    let w = path.switched(n);
    let m = w.steps();
    let nf = n as f64;
    let ito: f64 = (0..m)
        .map(|k| w.value(k) * (k as f64 / m as f64).powi(2 * n as i32 + 1) * w.increments()[k])
        .sum();
    2.0 * nf.sqrt() * ito + nf.sqrt() / (2.0 * nf + 2.0)
}

/// `||u_n||^2 = 4n int_0^1 (W_s^(n))^2 s^{4n+2} ds`, trapezoid rule.
pub fn switching_norm_limit(path: &BrownianPath, n: usize) -> f64 {
    let w = path.switched(n);
    let m = w.steps();
    4.0 * n as f64
        * trapezoid(m, |k| {
            let s = k as f64 / m as f64;
            w.value(k).powi(2) * s.powi(4 * n as i32 + 2)
        })
}

/// `E[exp(i gamma W_1 - lambda^2 W_1^2 / 2)] = (1+lambda^2)^{-1/2} exp(-gamma^2 / (2(1+lambda^2)))`.
pub fn switching_target_cf(gamma: f64, lambda: f64) -> Complex64 {
    let a = 1.0 + lambda * lambda;
    Complex64::new(a.powf(-0.5) * (-gamma * gamma / (2.0 * a)).exp(), 0.0)
}

/// Head cut `t_n = eps^{1/sqrt(n)}`.
pub fn switching_head_cut(n: usize, eps: f64) -> f64 {
    eps.powf((n as f64).powf(-0.5))
}

pub const SWITCHING_HEAD_EPS: f64 = 0.75;

/// Elementary version of `u_n(s) = 2 sqrt(n) W_s^(n) s^{2n+1}`: on the `k`-th
/// cell of the resolution the coefficient is `2 sqrt(n) W_{(k-1)/m}` times
/// the root-mean-square of `s^{2n+1}` over the cell. Averaging the weight
/// over the cell keeps `||u||^2` accurate when `s^{4n+2}` lives on a few
/// grid cells.
#[derive(Debug, Clone)]
pub struct SwitchingRule {
    weights: Vec<f64>,
}

impl SwitchingRule {
    pub fn new(n: usize, m: usize) -> Self {
        let p = 4 * n as i32 + 3;
        let mf = m as f64;
        let weights = (0..m)
            .map(|k| {
                let (a, b) = (k as f64 / mf, (k + 1) as f64 / mf);
                let mean_sq = mf * (b.powi(p) - a.powi(p)) / p as f64;
                2.0 * (n as f64).sqrt() * mean_sq.sqrt()
            })
            .collect();
        Self { weights }
    }
}

struct SwitchingState<'a> {
    weights: &'a [f64],
    w: f64,
}

impl RuleState for SwitchingState<'_> {
    fn coefficient(&mut self, position: usize, _: usize) -> f64 {
        self.weights[position] * self.w
    }

    fn observe(&mut self, _: usize, _: usize, increment: f64) {
        self.w += increment;
    }
}

impl AdaptedRule for SwitchingRule {
    fn start(&self) -> Box<dyn RuleState + '_> {
        Box::new(SwitchingState { weights: &self.weights, w: 0.0 })
    }

    fn name(&self) -> &str {
        "switching"
    }
}

/// Switching example as a tangent pair: `m` cells of mass `1/m`, read forward
/// for odd `n` and reversed for even `n`, so the resolution filtration is
/// the one generated by `W^(n)`.
#[derive(Debug, Clone)]
pub struct SwitchingScenario {
    n: usize,
    m: usize,
    partition: Arc<CellPartition>,
    resolution: Resolution,
    spec: IntegrandSpec,
    head_cut: f64,
}

impl SwitchingScenario {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        check_switching(n, m)?;
        let partition = Arc::new(uniform_partition(m, 1.0 / m as f64)?);
        let resolution = if n % 2 == 0 {
            Resolution::reversed(partition.clone())
        } else {
            Resolution::forward(partition.clone())
        };
        let spec = IntegrandSpec::Custom(Arc::new(SwitchingRule::new(n, m)));
        Ok(Self { n, m, partition, resolution, spec, head_cut: switching_head_cut(n, SWITCHING_HEAD_EPS) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn head_cut(&self) -> f64 {
        self.head_cut
    }

    fn sample(&self, path: &BrownianPath, seed: u64, trial: u64, stream: u64) -> Result<MeasureSample> {
        MeasureSample::from_increments(self.partition.clone(), MeasureLaw::Gaussian, path.increments().to_vec(), seed, trial, stream)
    }

    /// Tangent pair driven by path stream 0, decoupled with path stream 1.
    /// Returns the main path as well, for targets that depend on it.
    pub fn pair(&self, seed: u64, trial: u64) -> Result<(BrownianPath, TangentArrayPair)> {
        let path = BrownianPath::simulate(self.m, seed, trial, 0)?;
        let copy = BrownianPath::simulate(self.m, seed, trial, 1)?;
        let main = self.sample(&path, seed, trial, 0)?;
        let copy = self.sample(&copy, seed, trial, 1)?;
        let pair = tangent_pair_from_samples(&self.spec, &self.resolution, &main, &copy, self.head_cut)?;
        Ok((path, pair))
    }
}

/// Mixing weights `Z = e^{i gamma W_1}` used by the stable-convergence check.
pub const SWITCHING_GAMMAS: [f64; 2] = [0.0, 1.0];

/// Monte-Carlo summary of the switching functional at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingStage {
    pub n: usize,
    pub steps: usize,
    pub trials: u64,
    /// Weighted CF of `A'_n` per `gamma`.
    pub cf: Vec<(f64, CharFnEstimate)>,
    /// `E|‖u_n‖^2 - W_1^2|`
    pub norm_gap: Estimate,
    /// `E|A'_n - reduction|`
    pub reduction_gap: Estimate,
}

impl SwitchingStage {
    /// Largest `|estimate - target|` over the gamma and lambda grids.
    pub fn cf_distance(&self) -> f64 {
        self.cf
            .iter()
            .flat_map(|(g, est)| est.lambda.iter().zip(&est.values).map(move |(&l, v)| (v - switching_target_cf(*g, l)).norm()))
            .fold(0.0, f64::max)
    }
}

pub fn switching_study(n: usize, m: usize, seed: u64, trials: u64, gammas: &[f64], lambda: &[f64]) -> Result<SwitchingStage> {
    check_switching(n, m)?;
    let per_trial = mc_collect(trials, |t| {
        let path = BrownianPath::simulate(m, seed, t, 0)?;
        let a = switching_functional(&path, n);
        let w1 = path.terminal();
        Ok((w1, a, (switching_norm_limit(&path, n) - w1 * w1).abs(), (a - switching_reduction(&path, n)).abs()))
    })?;
    let xs: Vec<f64> = per_trial.iter().map(|r| r.1).collect();
    let cf = gammas
        .iter()
        .map(|&g| {
            let z: Vec<Complex64> = per_trial.iter().map(|r| Complex64::new(0.0, g * r.0).exp()).collect();
            Ok((g, estimate_stable_cf(&xs, Some(&z), lambda)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let norm_gap = mc_aggregate(&per_trial.iter().map(|r| r.2).collect::<Vec<_>>(), CHUNK)?;
    let reduction_gap = mc_aggregate(&per_trial.iter().map(|r| r.3).collect::<Vec<_>>(), CHUNK)?;
    Ok(SwitchingStage { n, steps: m, trials, cf, norm_gap, reduction_gap })
}

/// `W_1` of the main stream of a switching pair.
pub fn pair_terminal(pair: &TangentArrayPair) -> f64 {
    (0..pair.original.len()).map(|j| pair.original.increment(j)).sum()
}
