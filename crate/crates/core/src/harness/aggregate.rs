//! Order statistics across trials.

use serde::Serialize;

use super::run::ErrorTrace;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub checkpoint_index: usize,
    pub oracle_calls: u64,
    pub median_l2: f64,
    pub decile10_l2: f64,
    pub decile90_l2: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AggregateTrace {
    pub rows: Vec<AggregateRow>,
}

/// Empirical quantile of sorted data by linear interpolation between order
/// statistics (`h = (N − 1)p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and first/last deciles of the error at each checkpoint.
pub fn aggregate(traces: &[ErrorTrace]) -> Result<AggregateTrace> {
    let first = traces.first().ok_or_else(|| Error::Misaligned("no traces to aggregate".into()))?;
    for t in traces {
        let aligned = t.rows.len() == first.rows.len()
            && t.rows.iter().zip(&first.rows).all(|(a, b)| a.checkpoint_index == b.checkpoint_index);
        if !aligned {
            return Err(Error::Misaligned(format!(
                "trial {} has {} checkpoints, trial {} has {}",
                t.trial,
                t.rows.len(),
                first.trial,
                first.rows.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(first.rows.len());
    let mut column = Vec::with_capacity(traces.len());
    for (j, r) in first.rows.iter().enumerate() {
        column.clear();
        column.extend(traces.iter().map(|t| t.rows[j].l2));
        column.sort_by(f64::total_cmp);
        rows.push(AggregateRow {
            checkpoint_index: r.checkpoint_index,
            oracle_calls: traces.iter().map(|t| t.rows[j].oracle_calls).max().unwrap_or(0),
            median_l2: quantile(&column, 0.5),
            decile10_l2: quantile(&column, 0.1),
            decile90_l2: quantile(&column, 0.9),
        });
    }
    Ok(AggregateTrace { rows })
}
