//! Fourth-moment conditions for double Poisson integrals.
//!
//! For `F = I_2(f)` with `2||f||^2 = 1`, asymptotic normality follows from
//! `||f *_1^1 f|| -> 0`, `||f *_2^1 f|| -> 0` and `int int f^4 -> 0`. The
//! second-moment expansion behind it reads
//!
//! ```text
//! E[(F^2 - 2 I_2(f *_2^0 f))^2]
//!     = 3 (2||f||^2)^2 + 48 ||f *_1^1 f||^2 + 96 ||sym(f *_1^0 f)||^2 + 16 ||f *_2^1 f||^2
//! ```
//!
//! [`findev_identity`] checks it by Monte Carlo.

use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::chaos::{adapted_integrand, eval_multiple_integral};
use crate::error::{Error, Result};
use crate::kernels::{contract, kernel_norm_sq, symmetrize, SymmetricKernel};
use crate::partition::{build_partition, Resolution};
use crate::rmeasure::{levy_exponent_values, sample_measure, MeasureLaw};
use crate::stats::{mc_aggregate, mc_collect, mc_moments, Estimate, CHUNK};

/// Thresholds fixed by the calibration run recorded under `calibration/`.
pub mod calibration {
    /// Bound on `|E F^4 - 3|` for the block family at `n = 256`, `10^5` trials.
    pub const FOURTH_MOMENT_256: f64 = 0.371;
    /// Bound on the KS distance of the block family at `n = 256`, `10^5` trials.
    pub const KS_256: f64 = 0.0427;
    /// Lower bound on the KS distance of the negative control at `10^5` trials.
    pub const NEGATIVE_CONTROL_KS_FLOOR: f64 = 0.2983;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionN {
    /// `int (int f(z, .)^2 dmu(z))^2 dmu`
    pub integrability: f64,
    /// `2 ||f||^2`, normalized to 1.
    pub norm_half: f64,
    /// `int int f^4`
    pub fourth_power: f64,
}

fn require_order_two(f: &SymmetricKernel) -> Result<()> {
    if f.order() == 2 {
        Ok(())
    } else {
        Err(Error::OrderMismatch { expected: 2, found: f.order() })
    }
}

/// `f *_2^0 f`, the pointwise square.
pub fn pointwise_square(f: &SymmetricKernel) -> Result<SymmetricKernel> {
    Ok(symmetrize(&contract(f, f, 2, 0)?))
}

pub fn check_assumption_n(f: &SymmetricKernel) -> Result<AssumptionN> {
    require_order_two(f)?;
    Ok(AssumptionN {
        integrability: contract(f, f, 2, 1)?.norm_sq(),
        norm_half: 2.0 * kernel_norm_sq(f),
        fourth_power: kernel_norm_sq(&pointwise_square(f)?),
    })
}

/// `(||f *_1^1 f||^2, ||f *_2^1 f||^2)`.
pub fn check_gstar(f: &SymmetricKernel) -> Result<(f64, f64)> {
    require_order_two(f)?;
    Ok((contract(f, f, 1, 1)?.norm_sq(), contract(f, f, 2, 1)?.norm_sq()))
}

/// Analytic side of the expansion with the symmetrized `f *_1^0 f`.
pub fn findev_rhs(f: &SymmetricKernel) -> Result<f64> {
    require_order_two(f)?;
    let n = 2.0 * kernel_norm_sq(f);
    let (c11, c21) = check_gstar(f)?;
    let c10 = kernel_norm_sq(&symmetrize(&contract(f, f, 1, 0)?));
    Ok(3.0 * n * n + 48.0 * c11 + 96.0 * c10 + 16.0 * c21)
}

/// The coefficients as printed in the source derivation (unsymmetrized
/// `f *_1^0 f`, weight 4 on `f *_2^1 f`). Kept for comparison only.
pub fn findev_rhs_printed(f: &SymmetricKernel) -> Result<f64> {
    require_order_two(f)?;
    let n = 2.0 * kernel_norm_sq(f);
    let (c11, c21) = check_gstar(f)?;
    let c10 = contract(f, f, 1, 0)?.norm_sq();
    Ok(3.0 * n * n + 48.0 * c11 + 96.0 * c10 + 4.0 * c21)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindevReport {
    pub lhs: Estimate,
    pub rhs: f64,
    pub rhs_printed: f64,
}

/// Monte-Carlo `E[(F^2 - 2 I_2(f *_2^0 f))^2]` under the Poisson law
/// against [`findev_rhs`].
pub fn findev_identity(f: &SymmetricKernel, seed: u64, trials: u64) -> Result<FindevReport> {
    require_order_two(f)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("Monte-Carlo budget must be positive".into()));
    }
    let sq = pointwise_square(f)?;
    let p = f.partition().clone();
    let ms = mc_moments(trials, 1, |t, row| {
        let s = sample_measure(&p, MeasureLaw::CompensatedPoisson, seed, t);
        let x = eval_multiple_integral(&s, f)?;
        let g = eval_multiple_integral(&s, &sq)?;
        row[0] = (x * x - 2.0 * g).powi(2);
        Ok(())
    })?;
    Ok(FindevReport { lhs: ms[0].estimate(), rhs: findev_rhs(f)?, rhs_printed: findev_rhs_printed(f)? })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_n(x) - Phi(x)|`, evaluated on both sides of every jump.
pub fn ks_to_normal(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Numerical("NaN in KS sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let phi = normal_cdf(x);
        d = d.max((i + 1) as f64 / n - phi).max(phi - i as f64 / n);
    }
    Ok(d)
}

/// Levels of the tail-moment diagnostic `E[F^4 1{|F| > K}]`.
pub const TAIL_LEVELS: [f64; 3] = [3.0, 5.0, 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CltRecord {
    pub n: usize,
    pub assumption: AssumptionN,
    pub gstar: (f64, f64),
    pub second_moment: Estimate,
    pub fourth_moment: Estimate,
    pub ks: f64,
    pub tail_moments: Vec<(f64, Estimate)>,
    /// `(lambda, E|exp(psi(h_pi(g_n); lambda)) - e^{-lambda^2/2}|)`
    pub poc_distance: Vec<(f64, Estimate)>,
}

impl CltRecord {
    pub fn poc_max(&self) -> f64 {
        self.poc_distance.iter().map(|(_, e)| e.mean).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub records: Vec<CltRecord>,
}

impl CltReport {
    /// `(n, metric, analytic_value, mc_value, std_err)` rows.
    #[allow(clippy::type_complexity)]
    pub fn rows(&self) -> Vec<(usize, String, Option<f64>, Option<f64>, Option<f64>)> {
        let mut out = Vec::new();
        for r in &self.records {
            let a = |name: &str, v: f64| (r.n, name.to_string(), Some(v), None, None);
            let mc = |name: String, target: Option<f64>, e: &Estimate| (r.n, name, target, Some(e.mean), Some(e.std_err));
            out.push(a("integrability", r.assumption.integrability));
            out.push(a("norm_half", r.assumption.norm_half));
            out.push(a("fourth_power_integral", r.assumption.fourth_power));
            out.push(a("contraction_11_norm_sq", r.gstar.0));
            out.push(a("contraction_21_norm_sq", r.gstar.1));
            out.push(mc("second_moment".into(), Some(r.assumption.norm_half), &r.second_moment));
            out.push(mc("fourth_moment".into(), Some(3.0), &r.fourth_moment));
            out.push((r.n, "ks_to_normal".into(), None, Some(r.ks), None));
            for (k, e) in &r.tail_moments {
                out.push(mc(format!("tail_fourth_moment_k{k}"), None, e));
            }
            for (l, e) in &r.poc_distance {
                out.push(mc(format!("poc_distance_lambda{l}"), Some(0.0), e));
            }
        }
        out
    }
}

type KernelFamily<'a> = &'a (dyn Fn(usize) -> Result<SymmetricKernel> + Sync);

pub struct CltConfig<'a> {
    pub n_values: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    /// Family whose adapted representation drives the POC-route distance;
    /// `None` uses the main family.
    pub poc_family: Option<KernelFamily<'a>>,
    pub poc_trials: u64,
    /// Empty skips the POC route.
    pub poc_lambda: Vec<f64>,
}

/// Analytic conditions, Monte-Carlo moments, KS distance and the POC-route
/// distance for each `f_n`, all under the Poisson law.
pub fn clt_pipeline(family: KernelFamily<'_>, config: &CltConfig<'_>) -> Result<CltReport> {
    let mut records = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let f = family(n)?;
        let assumption = check_assumption_n(&f)?;
        if !assumption.integrability.is_finite() {
            return Err(Error::Numerical(format!("integrability witness is {} at n = {n}", assumption.integrability)));
        }
        let gstar = check_gstar(&f)?;
        let p = f.partition().clone();
        let xs = mc_collect(config.trials, |t| {
            eval_multiple_integral(&sample_measure(&p, MeasureLaw::CompensatedPoisson, config.seed, t), &f)
        })?;
        let pow = |k: i32| xs.iter().map(|x| x.powi(k)).collect::<Vec<_>>();
        let second_moment = mc_aggregate(&pow(2), CHUNK)?;
        let fourth_moment = mc_aggregate(&pow(4), CHUNK)?;
        let tail_moments = TAIL_LEVELS
            .iter()
            .map(|&k| {
                let v: Vec<f64> = xs.iter().map(|x| if x.abs() > k { x.powi(4) } else { 0.0 }).collect();
                Ok((k, mc_aggregate(&v, CHUNK)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let ks = ks_to_normal(&xs)?;
        let poc_distance = if config.poc_lambda.is_empty() {
            Vec::new()
        } else {
            let g = match config.poc_family {
                Some(fam) => fam(n)?,
                None => f.clone(),
            };
            poc_route_distance(&g, config.seed, config.poc_trials, &config.poc_lambda)?
        };
        records.push(CltRecord { n, assumption, gstar, second_moment, fourth_moment, ks, tail_moments, poc_distance });
    }
    Ok(CltReport { records })
}

/// `E|exp(psi(h_pi(f); lambda)) - e^{-lambda^2/2}|` per lambda, Poisson law,
/// forward resolution.
pub fn poc_route_distance(f: &SymmetricKernel, seed: u64, trials: u64, lambda: &[f64]) -> Result<Vec<(f64, Estimate)>> {
    let p = f.partition().clone();
    let res = Resolution::forward(p.clone());
    let chars = MeasureLaw::CompensatedPoisson.characteristics();
    let ms = mc_moments(trials, lambda.len(), |t, row| {
        let s = sample_measure(&p, MeasureLaw::CompensatedPoisson, seed, t);
        let h = adapted_integrand(f, &res, &s)?;
        for (slot, &l) in row.iter_mut().zip(lambda) {
            let cf = levy_exponent_values(&chars, &p, h.values(), l)?.exp();
            *slot = (cf - Complex64::new((-0.5 * l * l).exp(), 0.0)).norm();
        }
        Ok(())
    })?;
    Ok(lambda.iter().zip(ms).map(|(&l, m)| (l, m.estimate())).collect())
}

/// Fixed kernel `1/2` on a pair of unit cells: `I_2 = M_0 M_1`, unit
/// variance, never Gaussian.
pub fn negative_control_kernel() -> SymmetricKernel {
    let p = Arc::new(build_partition(&[(1.0, 0.5), (1.0, 1.0)]).expect("valid partition"));
    SymmetricKernel::from_offdiag_entries(p, 2, [([0, 1], 0.5)]).expect("valid kernel")
}
