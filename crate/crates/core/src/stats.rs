//! Deterministic Monte-Carlo aggregation.
//!
//! Trials are split into fixed chunks by trial index. Each chunk folds its
//! trials in index order into running moments, and chunk moments are merged
//! in chunk order with the pairwise update of Chan, Golub and LeVeque. The
//! result depends only on the trial values, never on how chunks were
//! scheduled over threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Trials per aggregation chunk.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (divisor `n - 1`); zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, std_err: self.std_error() }
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// `|mean - target| / std_err`, infinite when the error is zero and the
    /// mean is off target.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_err
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

fn fold_chunks<'a>(chunks: impl Iterator<Item = &'a [f64]>) -> Moments {
    let mut total = Moments::default();
    for chunk in chunks {
        let mut m = Moments::default();
        chunk.iter().for_each(|&x| m.push(x));
        total.merge(&m);
    }
    total
}

/// Mean and standard error (sample sd over `sqrt(n)`) of per-trial values.
pub fn mc_aggregate(values: &[f64], chunk: usize) -> Result<Estimate> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if chunk == 0 {
        return Err(Error::InvalidParameter("chunk size must be positive".into()));
    }
    let m = fold_chunks(values.chunks(chunk));
    check_finite(m.mean, "aggregate mean")?;
    Ok(m.estimate())
}

/// Like [`mc_aggregate`] for values tagged with their trial index; values
/// are put back in index order first, so any permutation of the input gives
/// the same bits.
pub fn mc_aggregate_indexed(values: &[(u64, f64)], chunk: usize) -> Result<Estimate> {
    let mut sorted = values.to_vec();
    sorted.sort_by_key(|&(i, _)| i);
    let plain: Vec<f64> = sorted.into_iter().map(|(_, x)| x).collect();
    mc_aggregate(&plain, chunk)
}

/// Runs `trial_fn` for trials `0..trials`, each writing `width` values, and
/// returns the moments of every column. Chunks may run on any thread.
pub fn mc_moments<F>(trials: u64, width: usize, trial_fn: F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    if trials == 0 {
        return Err(Error::EmptyInput);
    }
    let chunk = CHUNK as u64;
    let chunks = trials.div_ceil(chunk);
    let partials: Vec<Result<Vec<Moments>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut ms = vec![Moments::default(); width];
            let mut row = vec![0.0; width];
            for t in c * chunk..((c + 1) * chunk).min(trials) {
                row.fill(0.0);
                trial_fn(t, &mut row)?;
                for (j, (m, &x)) in ms.iter_mut().zip(&row).enumerate() {
                    if !x.is_finite() {
                        return Err(Error::Numerical(format!("non-finite value in column {j} at trial {t}")));
                    }
                    m.push(x);
                }
            }
            Ok(ms)
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for part in partials {
        for (acc, m) in total.iter_mut().zip(part?) {
            acc.merge(&m);
        }
    }
    Ok(total)
}

/// Collects one value per trial, in trial order.
pub fn mc_collect<T, F>(trials: u64, trial_fn: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..trials).into_par_iter().map(|t| trial_fn(t)).collect::<Vec<_>>().into_iter().collect()
}

/// Shape of a sequence indexed by increasing `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trend {
    /// Steps where the next value exceeds the current one.
    pub violations: usize,
    pub last_below_first: bool,
}

impl Trend {
    pub fn of(values: &[f64]) -> Self {
        let violations = values.windows(2).filter(|w| w[1] > w[0]).count();
        let last_below_first = match (values.first(), values.last()) {
            (Some(a), Some(b)) => values.len() > 1 && b < a,
            _ => false,
        };
        Self { violations, last_below_first }
    }

    /// Non-increasing up to `allowance` upward steps, and lower at the end.
    pub fn is_decreasing(&self, allowance: usize) -> bool {
        self.violations <= allowance && self.last_below_first
    }
}

/// `|a - b| / max(|a|, |b|, 1)`: relative for large values, absolute near
/// zero, where lattice-valued integrals can vanish exactly.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn check_finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numerical(format!("{what} is {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence() {
        let e = mc_aggregate(&[2.5; 1000], 64).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.std_err, 0.0);
    }

    #[test]
    fn alternating_signs() {
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = mc_aggregate(&xs, 256).unwrap();
        assert!(e.mean.abs() < 1e-15);
        assert!((e.std_err - 1.0 / (n as f64).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(mc_aggregate(&[], 16), Err(Error::EmptyInput)));
        assert!(mc_moments(0, 1, |_, _| Ok(())).is_err());
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..777).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut one = Moments::default();
        xs.iter().for_each(|&x| one.push(x));
        let chunked = fold_chunks(xs.chunks(50));
        assert!((one.mean() - chunked.mean()).abs() < 1e-13);
        assert!((one.variance() - chunked.variance()).abs() < 1e-12);
    }

    #[test]
    fn moments_over_trials_match_collected_values() {
        let trials = 3 * CHUNK as u64 + 17;
        let f = |t: u64| ((t * 2654435761) % 1000) as f64 / 1000.0;
        let ms = mc_moments(trials, 2, |t, row| {
            row[0] = f(t);
            row[1] = f(t) * f(t);
            Ok(())
        })
        .unwrap();
        let xs: Vec<f64> = (0..trials).map(f).collect();
        let e = mc_aggregate(&xs, CHUNK).unwrap();
        assert_eq!(ms[0].mean().to_bits(), e.mean.to_bits());
        assert_eq!(ms[0].count(), trials);
    }

    #[test]
    fn trends() {
        assert!(Trend::of(&[4.0, 3.0, 3.5, 1.0]).is_decreasing(1));
        assert!(!Trend::of(&[4.0, 5.0, 6.0, 1.0]).is_decreasing(1));
        assert!(!Trend::of(&[1.0, 0.5, 2.0]).is_decreasing(1));
        assert!(!Trend::of(&[1.0]).is_decreasing(0));
    }

    #[test]
    fn non_finite_trips_the_guard() {
        let r = mc_moments(10, 1, |t, row| {
            row[0] = if t == 7 { f64::NAN } else { 1.0 };
            Ok(())
        });
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
