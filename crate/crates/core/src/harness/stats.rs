//! Resampling helpers shared by the experiments.

use rand::Rng;
use rayon::prelude::*;

use crate::rng::{stream, StreamPurpose};

/// Point estimate with a 90% two-sided (95% one-sided) percentile interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, j) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Bootstrap over member indices. `stat` receives the resampled indices
/// and returns a fixed-length vector of statistics. `blocks` lists the
/// index ranges that are resampled separately (each resampled range keeps
/// its size); pass a single `0..m` range for the ordinary bootstrap.
pub fn bootstrap<F>(blocks: &[std::ops::Range<usize>], resamples: usize, seed: u64, stat: F) -> Vec<Interval>
where
    F: Fn(&[usize]) -> Vec<f64> + Sync,
{
    let all: Vec<usize> = blocks.iter().flat_map(|b| b.clone()).collect();
    let estimates = stat(&all);
    let draws: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, StreamPurpose::Bootstrap, b as u64);
            let idx: Vec<usize> = blocks
                .iter()
                .flat_map(|r| {
                    let (lo, len) = (r.start as u64, r.len() as u64);
                    (0..len).map(|_| (lo + rng.random_range(0..len)) as usize).collect::<Vec<_>>()
                })
                .collect();
            stat(&idx)
        })
        .collect();
    estimates
        .iter()
        .enumerate()
        .map(|(j, &estimate)| {
            let mut col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            if col.is_empty() {
                return Interval {
                    estimate,
                    lower: estimate,
                    upper: estimate,
                };
            }
            col.sort_by(f64::total_cmp);
            Interval {
                estimate,
                lower: percentile(&col, 0.05),
                upper: percentile(&col, 0.95),
            }
        })
        .collect()
}

/// Seed for the `salt`-th resampling of an experiment.
pub fn salted(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn mean_over(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        assert!((slope(&x, &y) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_of_constant_data_is_degenerate() {
        let v = vec![3.0; 40];
        let iv = bootstrap(&[0..40], 50, 1, |idx| vec![mean_over(&v, idx)]);
        assert_eq!(iv[0], Interval { estimate: 3.0, lower: 3.0, upper: 3.0 });
    }

    #[test]
    fn bootstrap_interval_covers_the_mean() {
        let v: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let iv = bootstrap(&[0..200], 400, 2, |idx| vec![mean_over(&v, idx)])[0];
        assert_eq!(iv.estimate, 4.5);
        assert!(iv.lower < 4.5 && 4.5 < iv.upper);
        assert!(iv.upper - iv.lower < 1.0);
    }

    #[test]
    fn blocks_are_resampled_within_their_range() {
        let iv = bootstrap(&[0..5, 5..10], 100, 3, |idx| {
            vec![idx[..5].iter().all(|&i| i < 5) as u8 as f64, idx[5..].iter().all(|&i| i >= 5) as u8 as f64]
        });
        assert!(iv.iter().all(|i| i.lower == 1.0));
    }
}
