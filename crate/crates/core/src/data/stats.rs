use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QErrorStats {
    pub count: usize,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub mean_latency_us: f64,
}

/// Nearest-rank quantile of an ascending slice: element `ceil(q * len)`, 1-based.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn aggregate(qerrors: &[f64], latencies_us: &[f64]) -> Result<QErrorStats> {
    if qerrors.is_empty() || latencies_us.is_empty() {
        return Err(Error::Input("cannot aggregate an empty result list".into()));
    }
    let mut sorted = qerrors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(QErrorStats {
        count: sorted.len(),
        p50: nearest_rank(&sorted, 0.50),
        p95: nearest_rank(&sorted, 0.95),
        p99: nearest_rank(&sorted, 0.99),
        max: sorted[sorted.len() - 1],
        mean_latency_us: latencies_us.iter().sum::<f64>() / latencies_us.len() as f64,
    })
}
