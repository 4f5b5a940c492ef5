//! First-order comparisons: exact two-sample Kolmogorov-Smirnov statistics
//! for continuous columns, level-proportion tables with total variation
//! distance for discrete columns, and plot-ready column summaries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schema::{ColumnData, ColumnKind, ColumnTable};

pub const QUANTILE_PROBS: [f64; 9] = [0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0];

#[derive(Debug, Clone, Serialize)]
pub struct KsResult {
    pub column: String,
    pub statistic: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Exact sup |F_a - F_b| over the merged sample, evaluated at every jump
/// point. Symmetric in its arguments.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("ks_statistic needs nonempty samples".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == x {
            i += 1;
        }
        while j < ys.len() && ys[j] == x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Maximum KS statistic over the continuous columns both tables share, with
/// the real table as the reference sample. `Ok(None)` when there is no shared
/// continuous column (the comparison is recorded as skipped, not failed).
pub fn worst_case_ks(real: &ColumnTable, synth: &ColumnTable) -> Result<Option<KsResult>> {
    let mut worst: Option<KsResult> = None;
    for spec in &real.schema().columns {
        if spec.kind != ColumnKind::Continuous {
            continue;
        }
        let (Some(a), Some(b)) = (
            real.continuous_values(&spec.name),
            synth.continuous_values(&spec.name),
        ) else {
            continue;
        };
        let statistic = ks_statistic(a, b)?;
        if worst.as_ref().map_or(true, |w| statistic > w.statistic) {
            worst = Some(KsResult {
                column: spec.name.clone(),
                statistic,
                n_a: a.len(),
                n_b: b.len(),
            });
        }
    }
    Ok(worst)
}

/// The best (lowest) per-trial worst-case statistic.
pub fn best_trial_ks(per_trial_worst: &[f64]) -> Result<f64> {
    per_trial_worst
        .iter()
        .copied()
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::InvalidInput("best_trial_ks over an empty list".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProportionComparison {
    pub column: String,
    pub levels: Vec<String>,
    pub freq_real: Vec<f64>,
    pub freq_synth: Vec<f64>,
    /// Total variation distance, (1/2) sum |p - q| over the shared vocabulary.
    pub tvd: f64,
}

/// Per-level frequency pairs over the declared vocabulary; levels absent from
/// a sample get frequency zero.
pub fn proportion_comparison(
    real: &ColumnTable,
    synth: &ColumnTable,
    column: &str,
) -> Result<ProportionComparison> {
    let (spec_a, data_a) = real
        .column_by_name(column)
        .ok_or_else(|| Error::SchemaMismatch(format!("column '{column}' missing from real table")))?;
    let (spec_b, data_b) = synth.column_by_name(column).ok_or_else(|| {
        Error::SchemaMismatch(format!("column '{column}' missing from synthetic table"))
    })?;
    if spec_a.kind == ColumnKind::Continuous || spec_b.kind == ColumnKind::Continuous {
        return Err(Error::InvalidInput(format!(
            "proportion comparison needs a discrete column, '{column}' is continuous"
        )));
    }
    if spec_a.levels != spec_b.levels {
        return Err(Error::SchemaMismatch(format!(
            "column '{column}' has different vocabularies in the two tables"
        )));
    }
    let freq = |data: &ColumnData| -> Vec<f64> {
        let codes = match data {
            ColumnData::Codes(v) => v,
            _ => unreachable!("discrete columns store codes"),
        };
        let mut counts = vec![0usize; spec_a.levels.len()];
        for &c in codes {
            counts[c as usize] += 1;
        }
        let n = codes.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    };
    let freq_real = freq(data_a);
    let freq_synth = freq(data_b);
    let tvd = 0.5
        * freq_real
            .iter()
            .zip(&freq_synth)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    Ok(ProportionComparison {
        column: column.to_string(),
        levels: spec_a.levels.clone(),
        freq_real,
        freq_synth,
        tvd,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalSummary {
    pub column: String,
    pub n: usize,
    /// Nearest-rank quantiles at `QUANTILE_PROBS`.
    pub quantiles: Vec<f64>,
    pub hist_edges: Vec<f64>,
    pub hist_counts: Vec<u64>,
    pub mean: f64,
    pub sd: f64,
}

/// Order statistics plus an equal-width histogram (50 bins over [min, max],
/// one bin for a constant column).
pub fn marginal_summary(column: &str, values: &[f64]) -> Result<MarginalSummary> {
    if values.is_empty() {
        return Err(Error::InvalidInput("marginal_summary of empty column".into()));
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles = QUANTILE_PROBS
        .iter()
        .map(|&q| {
            let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
            sorted[rank - 1]
        })
        .collect();

    let lo = sorted[0];
    let hi = sorted[n - 1];
    let n_bins = if hi > lo { 50 } else { 1 };
    let width = (hi - lo) / n_bins as f64;
    let hist_edges: Vec<f64> = (0..=n_bins)
        .map(|k| {
            if k == n_bins {
                hi
            } else {
                lo + width * k as f64
            }
        })
        .collect();
    let mut hist_counts = vec![0u64; n_bins];
    for &v in values {
        let bin = if width > 0.0 {
            (((v - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        hist_counts[bin] += 1;
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(MarginalSummary {
        column: column.to_string(),
        n,
        quantiles,
        hist_edges,
        hist_counts,
        mean,
        sd,
    })
}
