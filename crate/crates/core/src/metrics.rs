//! Subspace-angle error, per-run summaries and across-seed aggregates.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::engine::IterationRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("bases must share shape, got {0}x{1} and {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("basis is rank deficient")]
    RankDeficient,
    #[error("empty basis")]
    Empty,
}

fn orthonormalize(a: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    if a.ncols() == 0 || a.nrows() < a.ncols() {
        return Err(MetricsError::Empty);
    }
    let qr = a.clone().qr();
    let diag = qr.r().diagonal().abs();
    let largest = diag.max();
    if !(largest > 0.0 && largest.is_finite()) || diag.min() <= 1e-12 * largest {
        return Err(MetricsError::RankDeficient);
    }
    Ok(qr.q())
}

/// Largest principal angle between `span(a)` and `span(b)`, in degrees.
///
/// Computed as `atan2(sin, cos)` from the smallest singular value of
/// `Qa' Qb` (the cosine) and the largest singular value of `Qb - Qa Qa' Qb`
/// (the sine), which stays accurate for tiny angles where `arccos` alone
/// would lose all digits.
pub fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, MetricsError> {
    if a.shape() != b.shape() {
        return Err(MetricsError::ShapeMismatch(a.nrows(), a.ncols(), b.nrows(), b.ncols()));
    }
    let qa = orthonormalize(a)?;
    let qb = orthonormalize(b)?;
    let overlap = qa.transpose() * &qb;
    let cos = overlap.singular_values().min().clamp(0.0, 1.0);
    let sin = (&qb - &qa * overlap).singular_values().max().clamp(0.0, 1.0);
    Ok(libm::atan2(sin, cos).to_degrees().clamp(0.0, 90.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceAngleReport {
    pub per_node_angle_deg: Vec<f64>,
    pub max_angle_deg: f64,
}

pub fn angle_report(
    node_bases: &[DMatrix<f64>],
    reference: &DMatrix<f64>,
) -> Result<SubspaceAngleReport, MetricsError> {
    let per_node_angle_deg = node_bases
        .iter()
        .map(|b| subspace_angle(b, reference))
        .collect::<Result<Vec<_>, _>>()?;
    let max_angle_deg = per_node_angle_deg.iter().copied().fold(0.0, f64::max);
    Ok(SubspaceAngleReport {
        per_node_angle_deg,
        max_angle_deg,
    })
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// First converged round, or the number of rounds run if none converged.
    pub iterations: usize,
    pub converged: bool,
    pub max_angle_deg: f64,
    pub per_node_angle_deg: Vec<f64>,
}

pub fn run_report(
    records: &[IterationRecord],
    node_bases: &[DMatrix<f64>],
    reference: &DMatrix<f64>,
) -> Result<RunSummary, MetricsError> {
    let angles = angle_report(node_bases, reference)?;
    let converged_at = records.iter().find(|r| r.converged).map(|r| r.t);
    Ok(RunSummary {
        iterations: converged_at.unwrap_or_else(|| records.last().map_or(0, |r| r.t)),
        converged: converged_at.is_some(),
        max_angle_deg: angles.max_angle_deg,
        per_node_angle_deg: angles.per_node_angle_deg,
    })
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median<T: PartialOrd + Copy>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    Some(sorted[(sorted.len() - 1) / 2])
}

/// Medians over a batch of runs (typically one per seed).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub runs: usize,
    /// Runs left after the angle filter.
    pub kept: usize,
    pub median_iterations: Option<usize>,
    pub median_angle_deg: Option<f64>,
    pub all_converged: bool,
}

/// Aggregates runs, dropping those whose max angle exceeds `angle_filter_deg`.
pub fn aggregate(runs: &[RunSummary], angle_filter_deg: Option<f64>) -> BatchSummary {
    let kept: Vec<&RunSummary> = runs
        .iter()
        .filter(|r| angle_filter_deg.is_none_or(|limit| r.max_angle_deg <= limit))
        .collect();
    let iterations: Vec<usize> = kept.iter().map(|r| r.iterations).collect();
    let angles: Vec<f64> = kept.iter().map(|r| r.max_angle_deg).collect();
    BatchSummary {
        runs: runs.len(),
        kept: kept.len(),
        median_iterations: lower_median(&iterations),
        median_angle_deg: lower_median(&angles),
        all_converged: kept.iter().all(|r| r.converged),
    }
}

/// Percentage reduction in iterations of `candidate` relative to `baseline`.
pub fn speedup(baseline_iters: f64, candidate_iters: f64) -> f64 {
    100.0 * (baseline_iters - candidate_iters) / baseline_iters
}
