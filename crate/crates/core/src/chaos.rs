//! Exact multiple integrals of block kernels.
//!
//! For a symmetric block kernel the multiple integral factorizes over the
//! distinct cells of each multiset. A cell that occurs once contributes its
//! increment `M_i`; a cell that occurs twice contributes the within-cell
//! atom `D_i = I_2(1_{B_i x B_i})`. The atom follows from the product formula
//! at `p = q = 1` on a single cell,
//!
//! ```text
//! I_1(1_B)^2 = I_2(1_{B x B}) + I_1(1_B) + mu(B)      (Poisson)
//! I_1(1_B)^2 = I_2(1_{B x B}) + mu(B)                 (Gaussian)
//! ```
//!
//! so `D = M^2 - M - mu` for the compensated Poisson measure and
//! `D = M^2 - mu` for the Gaussian one. With these atoms
//!
//! ```text
//! I_d(f) = sum_m f(m) * (d! / prod_i k_i!) * prod_i A_{k_i}(i)
//! ```
//!
//! where `m` runs over stored multisets and `k_i` is the multiplicity of
//! cell `i` in `m`. Multiplicities above two would need higher Charlier or
//! Hermite atoms and are rejected.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{contract, factorial, symmetrize, SymmetricKernel};
use crate::partition::{CellPartition, Direction, Resolution};
use crate::rmeasure::{same_partition, MeasureLaw, MeasureSample};

fn check_sample(sample: &MeasureSample, partition: &Arc<CellPartition>) -> Result<()> {
    if same_partition(sample.partition(), partition) {
        Ok(())
    } else {
        Err(Error::PartitionMismatch)
    }
}

/// `I_d(f)` on one realization. Order 0 returns the constant.
pub fn eval_multiple_integral(sample: &MeasureSample, f: &SymmetricKernel) -> Result<f64> {
    check_sample(sample, f.partition())?;
    let d = f.order();
    let mut total = 0.0;
    for (t, v) in f.entries() {
        let mut term = v * t.arrangement_count() as f64;
        for (cell, k) in t.runs() {
            term *= match k {
                1 => sample.increment(cell),
                2 => sample.square_atom(cell),
                _ => {
                    return Err(Error::UnsupportedIntegral {
                        order: d,
                        reason: "a cell repeated more than twice",
                    })
                }
            };
        }
        total += term;
    }
    Ok(total)
}

fn binomial(n: usize, k: usize) -> usize {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Both sides of the Poisson product formula
///
/// ```text
/// I_p(f) I_q(g) = sum_{r=0}^{p^q} r! C(p,r) C(q,r) sum_{l=0}^{r} C(r,l) I_{p+q-r-l}(sym(f *_r^l g))
/// ```
///
/// evaluated on the same sample, for `p, q` in `{1, 2}`.
pub fn product_formula_check(sample: &MeasureSample, f: &SymmetricKernel, g: &SymmetricKernel) -> Result<(f64, f64)> {
    if sample.law() != MeasureLaw::CompensatedPoisson {
        return Err(Error::LawMismatch { expected: "cpoisson" });
    }
    let (p, q) = (f.order(), g.order());
    if !(1..=2).contains(&p) || !(1..=2).contains(&q) {
        return Err(Error::UnsupportedOrders { p, q });
    }
    let lhs = eval_multiple_integral(sample, f)? * eval_multiple_integral(sample, g)?;
    Ok((lhs, product_rhs(sample, f, g, true)?))
}

fn product_rhs(sample: &MeasureSample, f: &SymmetricKernel, g: &SymmetricKernel, inner_binomial: bool) -> Result<f64> {
    let (p, q) = (f.order(), g.order());
    let mut rhs = 0.0;
    for r in 0..=p.min(q) {
        let outer = (factorial(r) * binomial(p, r) * binomial(q, r)) as f64;
        for l in 0..=r {
            let inner = if inner_binomial { binomial(r, l) as f64 } else { 1.0 };
            let k = symmetrize(&contract(f, g, r, l)?);
            rhs += outer * inner * eval_multiple_integral(sample, &k)?;
        }
    }
    Ok(rhs)
}

/// `f 1_{Z_t^d}`: keeps the entries whose cells all lie in `Z_t`.
pub fn conditional_projection(f: &SymmetricKernel, resolution: &Resolution, t: f64) -> Result<SymmetricKernel> {
    if !same_partition(f.partition(), resolution.partition()) {
        return Err(Error::PartitionMismatch);
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    Ok(f.filter(|m| m.ids().iter().all(|&c| resolution.in_slice(c as usize, t))))
}

/// A per-cell integrand whose value on cell `c` depends only on increments
/// of cells strictly preceding `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedIntegrand {
    partition: Arc<CellPartition>,
    direction: Direction,
    law: MeasureLaw,
    values: Vec<f64>,
    seed: u64,
    trial: u64,
    stream: u64,
    source: String,
}

impl AdaptedIntegrand {
    /// Deterministic integrand; attached to the main stream of `(seed, trial)`.
    pub fn deterministic(
        resolution: &Resolution,
        law: MeasureLaw,
        values: Vec<f64>,
        seed: u64,
        trial: u64,
    ) -> Result<Self> {
        let partition = resolution.partition().clone();
        if values.len() != partition.len() {
            return Err(Error::LengthMismatch { left: values.len(), right: partition.len() });
        }
        Ok(Self {
            partition,
            direction: resolution.direction(),
            law,
            values,
            seed,
            trial,
            stream: 0,
            source: "deterministic".into(),
        })
    }

    /// Wraps values produced by a rule already known to be adapted to
    /// `sample` (the caller vouches for measurability).
    pub(crate) fn from_sample(resolution: &Resolution, sample: &MeasureSample, values: Vec<f64>, source: String) -> Self {
        Self {
            partition: resolution.partition().clone(),
            direction: resolution.direction(),
            law: sample.law(),
            values,
            seed: sample.seed(),
            trial: sample.trial(),
            stream: sample.stream(),
            source,
        }
    }

    pub fn partition(&self) -> &Arc<CellPartition> {
        &self.partition
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn law(&self) -> MeasureLaw {
        self.law
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Realized `||u||^2 = sum_c u(c)^2 mu_c`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().zip(self.partition.masses()).map(|(u, m)| u * u * m).sum()
    }
}

/// `h_pi(f)(c) = d * I_{d-1}(f(c, .) 1(. < c))` for `d` in `{1, 2}`.
///
/// Entries on a repeated cell are excluded by the strict order, so the
/// round trip through [`adapted_integral`] reproduces `I_2(f)` exactly only
/// for kernels without within-cell mass.
pub fn adapted_integrand(f: &SymmetricKernel, resolution: &Resolution, sample: &MeasureSample) -> Result<AdaptedIntegrand> {
    if !same_partition(f.partition(), resolution.partition()) {
        return Err(Error::PartitionMismatch);
    }
    check_sample(sample, f.partition())?;
    let n = f.partition().len();
    let mut values = vec![0.0; n];
    match f.order() {
        1 => {
            for (t, v) in f.entries() {
                values[t.get(0)] = v;
            }
        }
        2 => {
            for (t, v) in f.entries() {
                let (a, b) = (t.get(0), t.get(1));
                if a == b {
                    continue;
                }
                let (early, late) = if resolution.precedes(a, b) { (a, b) } else { (b, a) };
                values[late] += 2.0 * v * sample.increment(early);
            }
        }
        d => return Err(Error::UnsupportedIntegral { order: d, reason: "the adapted representation (orders 1 and 2 only)" }),
    }
    Ok(AdaptedIntegrand::from_sample(resolution, sample, values, format!("h_pi of an order-{} kernel", f.order())))
}

fn check_integrand(u: &AdaptedIntegrand, sample: &MeasureSample) -> Result<()> {
    check_sample(sample, &u.partition)?;
    if sample.law() != u.law {
        return Err(Error::LawMismatch { expected: u.law.name() });
    }
    if sample.seed() != u.seed || sample.trial() != u.trial {
        return Err(Error::StreamMismatch("integrand and sample come from different trials"));
    }
    Ok(())
}

/// `J(u) = sum_c u(c) M_c` on the stream that generated `u`.
pub fn adapted_integral(u: &AdaptedIntegrand, sample: &MeasureSample) -> Result<f64> {
    check_integrand(u, sample)?;
    if sample.stream() != u.stream {
        return Err(Error::StreamMismatch("adapted integral needs the stream that generated the integrand"));
    }
    Ok(dot(&u.values, sample.increments()))
}

/// `J~(u) = sum_c u(c) M~_c` with `M~` an independent copy.
pub fn decoupled_adapted_integral(u: &AdaptedIntegrand, copy: &MeasureSample) -> Result<f64> {
    check_integrand(u, copy)?;
    if copy.stream() == u.stream {
        return Err(Error::StreamMismatch("decoupled integral needs an independent copy stream"));
    }
    Ok(dot(&u.values, copy.increments()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
