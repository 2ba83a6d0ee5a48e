//! Weight normalization, effective sample size, multinomial selection and
//! the maximal coupling of two probability mass functions.
//!
//! Categorical draws use one uniform and an inverse-CDF search over running
//! sums. Indices are zero-based.

use alloc::vec::Vec;

use rand::Rng;

use crate::rng::uniform;
use crate::{Error, Result};

/// Residual masses below this are floating point noise from `r - min(r, s)`.
const RESIDUAL_FLOOR: f64 = 1e-15;

/// `log(mean(exp(lw)))`, computed with max subtraction.
pub fn log_mean_exp(lw: &[f64]) -> f64 {
    log_sum_exp(lw) - libm::log(lw.len() as f64)
}

pub fn log_sum_exp(lw: &[f64]) -> f64 {
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = lw.iter().map(|&w| libm::exp(w - max)).sum();
    max + libm::log(s)
}

/// Normalized probabilities from log weights.
///
/// Fails with [`Error::Degenerate`] when no weight is finite-positive, and
/// with [`Error::InvalidPmf`] on NaN or `+∞`.
pub fn normalize(lw: &[f64]) -> Result<Vec<f64>> {
    if lw.is_empty() {
        return Err(Error::InvalidPmf);
    }
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lw.iter().any(|w| w.is_nan()) || max == f64::INFINITY {
        return Err(Error::InvalidPmf);
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::Degenerate { time: 0 });
    }
    let mut p: Vec<f64> = lw.iter().map(|&w| libm::exp(w - max)).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Effective sample size `1 / Σ p_i²`.
pub fn ess(pmf: &[f64]) -> f64 {
    1.0 / pmf.iter().map(|p| p * p).sum::<f64>()
}

fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidPmf);
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPmf);
    }
    Ok(())
}

/// Inverse-CDF sampler over unnormalized nonnegative masses.
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    pub fn new(masses: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(masses.len());
        for &m in masses {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidPmf);
            }
            acc += m;
            cumulative.push(acc);
        }
        if acc.is_nan() || acc <= 0.0 {
            return Err(Error::InvalidPmf);
        }
        Ok(Categorical { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Index of the first running sum strictly above `u · total`.
    pub fn index_for(&self, u: f64) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        if i < self.cumulative.len() {
            i
        } else {
            // u·total rounded up to total: fall back to the last atom with mass
            let mut j = self.cumulative.len() - 1;
            while j > 0 && self.cumulative[j - 1] == total {
                j -= 1;
            }
            j
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(uniform(rng))
    }
}

/// `n` i.i.d. categorical draws from `pmf`.
pub fn multinomial_indices<R: Rng + ?Sized>(rng: &mut R, pmf: &[f64], n: usize) -> Result<Vec<usize>> {
    validate_pmf(pmf)?;
    let cat = Categorical::new(pmf)?;
    Ok((0..n).map(|_| cat.sample(rng)).collect())
}

/// Precomputed maximal coupling of two PMFs on the same index set.
///
/// With probability `overlap = Σ min(r1, r2)` both indices are drawn from
/// the normalized minimum and coincide; otherwise they are drawn
/// independently from the normalized residuals `r1 - min` and `r2 - min`.
#[derive(Debug, Clone)]
pub struct MaximalCoupling {
    overlap: f64,
    common: Option<Categorical>,
    residual_first: Option<Categorical>,
    residual_second: Option<Categorical>,
}

impl MaximalCoupling {
    pub fn new(r1: &[f64], r2: &[f64]) -> Result<Self> {
        if r1.len() != r2.len() {
            return Err(Error::Shape {
                expected: r1.len(),
                found: r2.len(),
            });
        }
        validate_pmf(r1)?;
        validate_pmf(r2)?;
        let mins: Vec<f64> = r1.iter().zip(r2).map(|(a, b)| a.min(*b)).collect();
        let overlap: f64 = mins.iter().sum::<f64>().min(1.0);
        let residual = |r: &[f64]| -> Vec<f64> {
            r.iter()
                .zip(&mins)
                .map(|(a, m)| {
                    let v = a - m;
                    if v < RESIDUAL_FLOOR {
                        0.0
                    } else {
                        v
                    }
                })
                .collect()
        };
        let common = if overlap > 0.0 {
            Categorical::new(&mins).ok()
        } else {
            None
        };
        // Residuals are only reachable when overlap < 1; their normalization by
        // (1 - overlap) is implicit in the categorical sampler.
        let (residual_first, residual_second) = if overlap < 1.0 {
            (
                Categorical::new(&residual(r1)).ok(),
                Categorical::new(&residual(r2)).ok(),
            )
        } else {
            (None, None)
        };
        let overlap = match (&residual_first, &residual_second) {
            // Both residuals vanished under the floor: the PMFs are equal up to rounding.
            (None, _) | (_, None) if common.is_some() => 1.0,
            _ => overlap,
        };
        Ok(MaximalCoupling {
            overlap,
            common,
            residual_first,
            residual_second,
        })
    }

    /// `Σ_i min(r1_i, r2_i)`, the probability that the meet branch is taken.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let u = uniform(rng);
        if u < self.overlap {
            let i = self.common.as_ref().expect("overlap > 0").sample(rng);
            (i, i)
        } else {
            let i = self.residual_first.as_ref().expect("overlap < 1").sample(rng);
            let j = self.residual_second.as_ref().expect("overlap < 1").sample(rng);
            (i, j)
        }
    }
}

/// One draw `(i, j)` from the maximal coupling of `r1` and `r2`.
pub fn maximal_coupling_indices<R: Rng + ?Sized>(rng: &mut R, r1: &[f64], r2: &[f64]) -> Result<(usize, usize)> {
    Ok(MaximalCoupling::new(r1, r2)?.sample(rng))
}
