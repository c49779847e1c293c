use std::io::Write;
use std::time::Instant;

use cardindex::armodel::MaskedNet;
use cardindex::cardest::{hybrid_estimate, q_error, EstimatorConfig, Method};
use cardindex::data::{aggregate, SelectivityClass};
use cardindex::index::CardIndex;
use cardindex::zorder::QueryBox;

use crate::CliError;

pub const CSV_COLUMNS: &str = "workload_class,quantile,qerror,mean_latency_us,method_mix,max_nscan,nscan_bound";

#[derive(Debug, Default)]
struct ClassRun {
    qerrors: Vec<f64>,
    latencies: Vec<f64>,
    exact: usize,
    sampled: usize,
    max_nscan: u64,
}

#[derive(Debug)]
pub struct BenchReport {
    rows: usize,
    nscan_bound: f64,
    point_count: usize,
    point_mean_us: f64,
    range_count: usize,
    range_mean_us: f64,
    classes: Vec<(&'static str, ClassRun)>,
}

fn micros(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}

/// Point queries on evenly spaced resident keys, then every workload box
/// through the range scan (whose exact count is the estimation ground truth)
/// and through the hybrid estimator.
pub fn run_bench(
    idx: &CardIndex<MaskedNet>,
    queries: &[QueryBox],
    point_queries: usize,
    cfg: &EstimatorConfig,
) -> Result<BenchReport, CliError> {
    let rows = idx.len();
    let slots = idx.slots();
    let probes = point_queries.min(rows);
    let mut point_total = 0.0;
    for i in 0..probes {
        let key = slots[i * rows / probes].key;
        let start = Instant::now();
        let hit = idx.point_query(key);
        point_total += micros(start);
        if hit.is_none() {
            return Err(CliError::Check(format!("resident key {key} not found")));
        }
    }

    let mut range_total = 0.0;
    let mut truths = Vec::with_capacity(queries.len());
    for q in queries {
        let start = Instant::now();
        let (count, _) = idx.range_count(q)?;
        range_total += micros(start);
        truths.push(count);
    }

    let mut classes: Vec<(&'static str, ClassRun)> =
        SelectivityClass::ALL.iter().map(|c| (c.name(), ClassRun::default())).collect();
    for (i, (q, &truth)) in queries.iter().zip(&truths).enumerate() {
        let r = hybrid_estimate(idx, q, cfg, i as u64)?;
        let class = SelectivityClass::of(truth as f64 / rows.max(1) as f64);
        let slot = SelectivityClass::ALL.iter().position(|&c| c == class).expect("known class");
        let run = &mut classes[slot].1;
        run.qerrors.push(q_error(r.card, truth as f64));
        run.latencies.push(r.elapsed_us);
        match r.method {
            Method::ExactIndex => {
                run.exact += 1;
                run.max_nscan = run.max_nscan.max(r.n_scan);
                if r.card != truth as f64 {
                    return Err(CliError::Check(format!("index-routed query {i} counted {} of {truth}", r.card)));
                }
            }
            Method::ProgressiveSample => run.sampled += 1,
        }
    }
    classes.retain(|(_, run)| !run.qerrors.is_empty());

    Ok(BenchReport {
        rows,
        nscan_bound: cfg.best * rows as f64,
        point_count: probes,
        point_mean_us: point_total / probes.max(1) as f64,
        range_count: queries.len(),
        range_mean_us: range_total / queries.len().max(1) as f64,
        classes,
    })
}

impl BenchReport {
    /// `#` header lines with the configuration and suite timings, then one
    /// row per (class, quantile).
    pub fn write_csv(&self, config_line: &str, out: &mut dyn Write) -> Result<(), CliError> {
        writeln!(out, "{config_line}")?;
        writeln!(out, "# rows {}", self.rows)?;
        writeln!(out, "# point_queries {} mean_latency_us {:.3}", self.point_count, self.point_mean_us)?;
        writeln!(out, "# range_queries {} mean_latency_us {:.3}", self.range_count, self.range_mean_us)?;
        writeln!(out, "{CSV_COLUMNS}")?;
        for (name, run) in &self.classes {
            let stats = aggregate(&run.qerrors, &run.latencies)?;
            let mix = format!("exact-index={};progressive-sample={}", run.exact, run.sampled);
            for (label, value) in [("p50", stats.p50), ("p95", stats.p95), ("p99", stats.p99), ("max", stats.max)] {
                writeln!(
                    out,
                    "{name},{label},{value:.6},{:.3},{mix},{},{}",
                    stats.mean_latency_us, run.max_nscan, self.nscan_bound
                )?;
            }
        }
        Ok(())
    }
}
