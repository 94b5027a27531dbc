//! Empirical transport distances and Monte Carlo tail statistics.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::integrator::Path;
use crate::rng::{stream, StreamPurpose};
use crate::spectral::{distance, SpectralField};

/// Largest sample the exact assignment solver accepts.
pub const ASSIGNMENT_CAP: usize = 2048;

/// Equal-weight empirical measure on `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<SpectralField>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<SpectralField>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidSpec("empirical measure needs at least one point".into()));
        };
        let n = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpectralField] {
        &self.points
    }
}

/// Minimum-cost perfect matching of a square cost matrix (row-major).
/// Returns `assignment[row] = column`.
///
/// Shortest augmenting paths with row/column potentials, `O(m³)`.
pub fn hungarian(cost: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(cost.len(), m * m);
    // 1-based internally; index 0 is the virtual source column
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; m];
    for j in 1..=m {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// `W_p` between two equal-size empirical measures, `p ∈ {1, 2}`, computed
/// from an exact optimal assignment.
pub fn w_p_empirical(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: u32) -> Result<f64> {
    if p != 1 && p != 2 {
        return Err(Error::InvalidSpec(format!("W_p is only provided for p = 1, 2 (got {p})")));
    }
    let m = a.len();
    if m != b.len() {
        return Err(Error::UnequalSizes(m, b.len()));
    }
    if m > ASSIGNMENT_CAP {
        return Err(Error::TooLarge {
            requested: m,
            cap: ASSIGNMENT_CAP,
        });
    }
    let cost: Vec<f64> = a
        .points
        .par_iter()
        .flat_map_iter(|x| b.points.iter().map(move |y| x.distance(y).powi(p as i32)))
        .collect();
    let assignment = hungarian(&cost, m);
    // summed in sorted order so that W_p(a, b) and W_p(b, a) agree bit for bit
    let mut matched: Vec<f64> = assignment.iter().enumerate().map(|(i, &j)| cost[i * m + j]).collect();
    matched.sort_by(f64::total_cmp);
    let total: f64 = matched.iter().sum();
    Ok((total / m as f64).powf(1.0 / p as f64))
}

/// Trapezoidal `∫₀ᵀ ‖γ₁(t) − γ₂(t)‖_H dt` on the shared grid.
pub fn path_distance_l1(a: &Path, b: &Path) -> Result<f64> {
    if a.times != b.times {
        return Err(Error::GridMismatch);
    }
    let gaps: Vec<f64> = a.states.iter().zip(&b.states).map(|(x, y)| x.distance(y)).collect();
    Ok(trapezoid(&a.times, &gaps))
}

pub(crate) fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Time average `(1/T)∫₀ᵀ g(t) dt` of values on a uniform grid with step `dt`
/// (trapezoid rule).
pub fn time_average(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    let interior: f64 = values[1..n - 1].iter().sum();
    let integral = dt * (interior + 0.5 * (values[0] + values[n - 1]));
    integral / (dt * (n - 1) as f64)
}

/// A function `H → ℝ` with Lipschitz constant at most one.
#[derive(Debug, Clone, PartialEq)]
pub enum LipschitzObservable {
    /// `x ↦ ⟨φ, x⟩` with `‖φ‖_H = 1`.
    Linear { direction: SpectralField },
    /// `x ↦ ‖x − x₀‖_H`.
    Distance { anchor: SpectralField },
}

impl LipschitzObservable {
    /// Linear observable along `direction`, rescaled to unit norm.
    pub fn linear(direction: &SpectralField) -> Result<Self> {
        let norm = direction.norm();
        if norm == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let unit = direction.coeffs().iter().map(|c| c / norm).collect();
        Ok(Self::Linear {
            direction: SpectralField::from_vec_unchecked(unit),
        })
    }

    pub fn distance(anchor: SpectralField) -> Self {
        Self::Distance { anchor }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        1.0
    }

    pub fn eval(&self, x: &SpectralField) -> f64 {
        self.eval_slice(x.coeffs())
    }

    /// Evaluates on raw coefficients; shorter vectors are zero-padded.
    pub fn eval_slice(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear { direction } => direction.coeffs().iter().zip(x).map(|(a, b)| a * b).sum(),
            Self::Distance { anchor } => distance(x, anchor.coeffs()),
        }
    }
}

/// Empirical tail frequency at one deviation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    pub r: f64,
    pub exceedances: usize,
    pub frequency: f64,
    /// One-sided 95% Clopper–Pearson upper limit.
    pub upper: f64,
}

/// Empirical `E e^{λ(f − mean)}` with bootstrap percentile limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentPoint {
    pub lambda: f64,
    pub estimate: f64,
    /// 5th bootstrap percentile.
    pub lower: f64,
    /// 95th bootstrap percentile.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailMomentStats {
    pub samples: usize,
    pub mean: f64,
    pub tails: Vec<TailPoint>,
    pub moments: Vec<MomentPoint>,
}

/// Bootstrap settings for [`tail_and_moment_stats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
        }
    }
}

/// One-sided upper confidence limit for a binomial proportion with `k`
/// successes out of `m` trials, i.e. the `level` quantile of
/// `Beta(k + 1, m − k)`.
pub fn clopper_pearson_upper(k: usize, m: usize, level: f64) -> f64 {
    assert!(m > 0 && k <= m);
    if k == m {
        return 1.0;
    }
    if k == 0 {
        return 1.0 - (1.0 - level).powf(1.0 / m as f64);
    }
    let (a, b) = ((k + 1) as f64, (m - k) as f64);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Tail frequencies of `samples − mean` beyond each `r` and exponential
/// moments `E e^{λ(f − mean)}` for each `λ`, with the sample mean standing
/// in for the true one (it is recomputed inside every bootstrap resample).
pub fn tail_and_moment_stats(
    samples: &[f64],
    r_grid: &[f64],
    lambda_grid: &[f64],
    opts: BootstrapOptions,
) -> Result<TailMomentStats> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::InvalidSpec("no samples".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let tails = r_grid
        .iter()
        .map(|&r| {
            let k = samples.iter().filter(|&&s| s > mean + r).count();
            TailPoint {
                r,
                exceedances: k,
                frequency: k as f64 / m as f64,
                upper: clopper_pearson_upper(k, m, 0.95),
            }
        })
        .collect();

    // e^{λ(f_i − mean_b)} = e^{λ(f_i − mean)} · e^{−λ(mean_b − mean)}
    let centred: Vec<Vec<f64>> = lambda_grid
        .iter()
        .map(|&l| samples.iter().map(|s| (l * (s - mean)).exp()).collect())
        .collect();
    let estimates: Vec<f64> = centred.iter().map(|c| c.iter().sum::<f64>() / m as f64).collect();
    let boot: Vec<Vec<f64>> = (0..opts.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(opts.seed, StreamPurpose::Bootstrap, b as u64);
            let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..m as u64) as usize).collect();
            let shift = idx.iter().map(|&i| samples[i]).sum::<f64>() / m as f64 - mean;
            lambda_grid
                .iter()
                .zip(&centred)
                .map(|(l, c)| idx.iter().map(|&i| c[i]).sum::<f64>() / m as f64 * (-l * shift).exp())
                .collect()
        })
        .collect();
    let moments = lambda_grid
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let mut col: Vec<f64> = boot.iter().map(|row| row[j]).collect();
            col.sort_by(f64::total_cmp);
            let (lower, upper) = if col.is_empty() {
                (estimates[j], estimates[j])
            } else {
                (percentile(&col, 0.05), percentile(&col, 0.95))
            };
            MomentPoint {
                lambda,
                estimate: estimates[j],
                lower,
                upper,
            }
        })
        .collect();
    Ok(TailMomentStats {
        samples: m,
        mean,
        tails,
        moments,
    })
}
