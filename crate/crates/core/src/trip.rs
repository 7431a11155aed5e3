//! Paired sign-flip permutation test on ALCD differences.
//!
//! For each feature, the per-point ALCD after permuting that feature is
//! paired with the per-point ALCD after permuting the baseline. Under the
//! null hypothesis of no extrapolation the two group labels within each pair
//! are exchangeable, so flipping the sign of any paired difference leaves the
//! joint distribution unchanged. The test statistic is the mean paired
//! difference; the one-sided p-value counts sign-flip resamples at least as
//! large as the observed statistic.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alcd::AlcdTable;
use crate::error::{Error, Result};
use crate::stream;

/// Largest sample size accepted by [`exact_test`] (2^m enumeration).
pub const EXACT_TEST_MAX: usize = 20;

/// Per-point ALCD differences `feature - baseline` for one repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    diffs: Vec<f64>,
}

impl PairedSample {
    /// Builds a sample from two per-point ALCD slices of the same repetition.
    pub fn new(feature_alcd: &[f64], baseline_alcd: &[f64]) -> Result<Self> {
        if feature_alcd.len() != baseline_alcd.len() {
            return Err(Error::LengthMismatch(
                feature_alcd.len(),
                baseline_alcd.len(),
            ));
        }
        Self::from_diffs(
            feature_alcd
                .iter()
                .zip(baseline_alcd)
                .map(|(f, b)| f - b)
                .collect(),
        )
    }

    pub fn from_diffs(diffs: Vec<f64>) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self { diffs })
    }

    pub fn diffs(&self) -> &[f64] {
        &self.diffs
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty samples
    }
}

/// Mean paired difference.
pub fn statistic(sample: &PairedSample) -> f64 {
    sample.diffs.iter().sum::<f64>() / sample.len() as f64
}

/// Outcome of one permutation test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Monte Carlo sign-flip test: each round independently flips the sign of
/// every paired difference with probability 1/2 (equivalent to swapping the
/// two labels within the pair) and recomputes the statistic.
///
/// One-sided p-value with add-one smoothing:
/// `(1 + #{rounds with statistic >= observed}) / (1 + rounds)`; ties count as
/// extreme and the estimator never returns 0.
pub fn permutation_test(sample: &PairedSample, rounds: usize, seed: u64) -> Result<TestOutcome> {
    if rounds == 0 {
        return Err(Error::NoPermutationRounds);
    }
    let diffs = sample.diffs();
    let m = diffs.len();
    // comparing sums is equivalent to comparing means and avoids a division
    let observed_sum: f64 = diffs.iter().sum();
    let mut rng = stream::rng(seed, &[stream::TAG_TRIP]);
    let mut extreme = 0usize;
    for _ in 0..rounds {
        let mut sum = 0.0;
        let mut i = 0;
        while i < m {
            let mut word: u64 = rng.gen();
            let block = (m - i).min(64);
            for _ in 0..block {
                let d = diffs[i];
                sum += if word & 1 == 1 { -d } else { d };
                word >>= 1;
                i += 1;
            }
        }
        if sum >= observed_sum {
            extreme += 1;
        }
    }
    Ok(TestOutcome {
        statistic: observed_sum / m as f64,
        p_value: (1 + extreme) as f64 / (1 + rounds) as f64,
        permutations: rounds,
    })
}

/// Exact one-sided p-value by enumerating all 2^m sign assignments:
/// `#{assignments with statistic >= observed} / 2^m`. Brute-force oracle for
/// [`permutation_test`]; limited to `m <= EXACT_TEST_MAX`.
pub fn exact_test(sample: &PairedSample) -> Result<f64> {
    let m = sample.len();
    if m > EXACT_TEST_MAX {
        return Err(Error::SampleTooLarge(m, EXACT_TEST_MAX));
    }
    let diffs = sample.diffs();
    let observed_sum: f64 = diffs.iter().sum();
    let total = 1u64 << m;
    let mut extreme = 0u64;
    for mask in 0..total {
        let mut sum = 0.0;
        for (i, &d) in diffs.iter().enumerate() {
            sum += if mask >> i & 1 == 1 { -d } else { d };
        }
        if sum >= observed_sum {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

/// One test result per (feature, repetition) pair; the baseline feature
/// itself is omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripEntry {
    pub feature: usize,
    pub repetition: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Full TRIP output for an ALCD table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripResult {
    pub feature_names: Vec<String>,
    pub baseline: usize,
    pub entries: Vec<TripEntry>,
}

impl TripResult {
    /// All p-values for one feature across repetitions.
    pub fn feature_p_values(&self, feature: usize) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.feature == feature)
            .map(|e| e.p_value)
            .collect()
    }

    /// Indices of tested features (baseline excluded), in order.
    pub fn tested_features(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if seen.last() != Some(&e.feature) && !seen.contains(&e.feature) {
                seen.push(e.feature);
            }
        }
        seen
    }

    /// Flat CSV: `feature,repetition,statistic,p_value`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("feature,repetition,statistic,p_value\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.feature_names[e.feature], e.repetition, e.statistic, e.p_value
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string()).map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Runs the sign-flip test for every (feature, repetition) of the table
/// against the baseline column of the same repetition.
///
/// Each test consumes its own RNG stream keyed `(seed, feature, repetition)`,
/// so results do not depend on the parallel schedule.
pub fn run_trip(table: &AlcdTable, rounds: usize, seed: u64) -> Result<TripResult> {
    let baseline = table.baseline_index().ok_or(Error::MissingBaseline)?;
    let features: Vec<usize> = (0..table.n_features()).filter(|&j| j != baseline).collect();
    let pairs: Vec<(usize, usize)> = features
        .iter()
        .flat_map(|&j| (0..table.repetitions()).map(move |r| (j, r)))
        .collect();
    let entries: Result<Vec<TripEntry>> = pairs
        .par_iter()
        .map(|&(feature, repetition)| {
            let sample = PairedSample::new(
                table.slice(feature, repetition),
                table.slice(baseline, repetition),
            )?;
            let outcome = permutation_test(
                &sample,
                rounds,
                stream::derive(seed, &[stream::TAG_TRIP, feature as u64, repetition as u64]),
            )?;
            Ok(TripEntry {
                feature,
                repetition,
                statistic: outcome.statistic,
                p_value: outcome.p_value,
                permutations: outcome.permutations,
            })
        })
        .collect();
    Ok(TripResult {
        feature_names: table.feature_names().to_vec(),
        baseline,
        entries: entries?,
    })
}

/// Kolmogorov–Smirnov statistic of a sample against Uniform(0,1).
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let upper = (i + 1) as f64 / n - x;
        let lower = x - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    d
}

/// Asymptotic p-value of the KS statistic (Kolmogorov distribution with the
/// standard small-sample correction).
pub fn ks_uniform_p_value(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 1e-9 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
