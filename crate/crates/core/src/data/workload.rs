use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{brute_force_card, Table};
use crate::error::{Error, Result};
use crate::zorder::{BitSpec, Interval, QueryBox};

/// Width scales cycled through by the generator.
pub const DEFAULT_SCALES: [f64; 3] = [1.0, 0.01, 0.001];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectivityClass {
    High,
    Low,
    ExLow,
}

impl SelectivityClass {
    pub const ALL: [SelectivityClass; 3] = [Self::High, Self::Low, Self::ExLow];

    /// High at `sel >= 1e-2`, extreme-low at `sel <= 1e-4`, low in between.
    pub fn of(selectivity: f64) -> Self {
        if selectivity >= 1e-2 {
            Self::High
        } else if selectivity <= 1e-4 {
            Self::ExLow
        } else {
            Self::Low
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::High => "high",
            Self::Low => "low",
            Self::ExLow => "ex-low",
        }
    }
}

impl fmt::Display for SelectivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One workload line: `{"dims":[{"lo":..,"hi":..}],"true_card":..,"class":..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadQuery {
    #[serde(flatten)]
    pub query: QueryBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_card: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<SelectivityClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub scales: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

impl WorkloadConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { scales: DEFAULT_SCALES.to_vec(), count, seed }
    }
}

/// Random boxes centred on table rows, labelled with exact cardinality and class.
///
/// Query `i` uses scale `scales[i % len]`, constrains a random subset of
/// `1..=m` attributes and leaves the rest unbounded. Each constrained width is
/// drawn uniformly below `scale * range` of that attribute and rounded half up
/// to at least one cell.
pub fn gen_workload(table: &Table, spec: &BitSpec, cfg: &WorkloadConfig) -> Result<Vec<WorkloadQuery>> {
    gen_range(table, spec, &cfg.scales, cfg.seed, 0..cfg.count as u64)
}

/// Keeps generating until each class holds `per_class` queries or
/// `max_rounds * per_class` candidates have been drawn. Classes that cannot be
/// filled come back short.
pub fn gen_balanced_workload(
    table: &Table,
    spec: &BitSpec,
    scales: &[f64],
    per_class: usize,
    seed: u64,
    max_rounds: usize,
) -> Result<Vec<WorkloadQuery>> {
    let mut buckets: [Vec<WorkloadQuery>; 3] = Default::default();
    let batch = (per_class * 3).max(64) as u64;
    let mut next = 0u64;
    while buckets.iter().any(|b| b.len() < per_class) && next < (max_rounds * per_class.max(1)) as u64 {
        for q in gen_range(table, spec, scales, seed, next..next + batch)? {
            let slot = SelectivityClass::ALL.iter().position(|&c| Some(c) == q.class).expect("classified");
            if buckets[slot].len() < per_class {
                buckets[slot].push(q);
            }
        }
        next += batch;
    }
    Ok(buckets.into_iter().flatten().collect())
}

fn gen_range(
    table: &Table,
    spec: &BitSpec,
    scales: &[f64],
    seed: u64,
    ids: std::ops::Range<u64>,
) -> Result<Vec<WorkloadQuery>> {
    if table.is_empty() {
        return Err(Error::Input("cannot generate a workload over an empty table".into()));
    }
    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Input("workload scales must be positive".into()));
    }
    let m = table.dims();
    let ranges: Vec<f64> = (0..m)
        .map(|c| {
            let col = table.column(c);
            let lo = col.iter().copied().min().unwrap_or(0);
            let hi = col.iter().copied().max().unwrap_or(0);
            (hi - lo) as f64 + 1.0
        })
        .collect();
    let max = spec.max_coord();
    let n = table.len() as f64;

    let make = |id: u64| -> WorkloadQuery {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        let scale = scales[(id % scales.len() as u64) as usize];
        let center = table.row(rng.random_range(0..table.len()));
        let p = rng.random_range(1..=m);
        let mut dims = vec![Interval { lo: 0, hi: max }; m];
        for d in rand::seq::index::sample(&mut rng, m, p) {
            let draw = rng.random::<f64>() * scale * ranges[d];
            let width = ((draw + 0.5).floor() as u64).max(1);
            let lo = center[d].saturating_sub((width - 1) / 2);
            let hi = lo.saturating_add(width - 1).min(max);
            dims[d] = Interval { lo, hi };
        }
        let query = QueryBox { dims };
        let card = brute_force_card(table, &query);
        WorkloadQuery { query, true_card: Some(card), class: Some(SelectivityClass::of(card as f64 / n)) }
    };

    let ids: Vec<u64> = ids.collect();
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        ids.par_iter().map(|&i| make(i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = ids.iter().map(|&i| make(i)).collect();
    Ok(out)
}

pub fn write_workload(path: &Path, queries: &[WorkloadQuery]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for q in queries {
        serde_json::to_writer(&mut w, q)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_workload(path: &Path) -> Result<Vec<WorkloadQuery>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q = serde_json::from_str(&line)
            .map_err(|e| Error::Ingest { row: i + 1, msg: format!("bad workload line: {e}") })?;
        out.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SynthKind, SynthParams};

    /// Large enough that a single-row box (selectivity 1/N) counts as extreme-low.
    fn table() -> (Table, BitSpec) {
        let t = gen_synthetic(&SynthParams::new(SynthKind::GaussianClusters, 30_000, 3, 12, 4)).unwrap();
        let spec = t.bit_spec().unwrap();
        (t, spec)
    }

    #[test]
    fn class_boundaries() {
        assert_eq!(SelectivityClass::of(1.0), SelectivityClass::High);
        assert_eq!(SelectivityClass::of(1e-2), SelectivityClass::High);
        assert_eq!(SelectivityClass::of(0.5e-2), SelectivityClass::Low);
        assert_eq!(SelectivityClass::of(1e-4), SelectivityClass::ExLow);
        assert_eq!(SelectivityClass::of(0.0), SelectivityClass::ExLow);
    }

    #[test]
    fn every_query_contains_a_row() {
        let (t, spec) = table();
        let qs = gen_workload(&t, &spec, &WorkloadConfig::new(300, 1)).unwrap();
        assert_eq!(qs.len(), 300);
        for q in &qs {
            q.query.validate(&spec).unwrap();
            assert!(q.true_card.unwrap() >= 1);
            assert_eq!(q.true_card.unwrap(), brute_force_card(&t, &q.query));
        }
        assert_eq!(gen_workload(&t, &spec, &WorkloadConfig::new(300, 1)).unwrap(), qs);
    }

    #[test]
    fn full_scale_full_width_is_high() {
        let (t, spec) = table();
        let cfg = WorkloadConfig { scales: vec![1e6], count: 50, seed: 2 };
        for q in gen_workload(&t, &spec, &cfg).unwrap() {
            let constrained = q.query.dims.iter().filter(|iv| iv.lo > 0 || iv.hi < spec.max_coord()).count();
            if constrained == 0 {
                assert_eq!(q.true_card, Some(t.len() as u64));
            }
            assert_eq!(q.class, Some(SelectivityClass::High));
        }
    }

    #[test]
    fn tiny_scale_is_mostly_extreme_low() {
        let (t, spec) = table();
        let cfg = WorkloadConfig { scales: vec![0.001], count: 200, seed: 3 };
        let qs = gen_workload(&t, &spec, &cfg).unwrap();
        let ex = qs.iter().filter(|q| q.class == Some(SelectivityClass::ExLow)).count();
        // most boxes constrain few attributes, so this is only a loose check
        assert!(ex > 20, "{ex} extreme-low queries");
    }

    #[test]
    fn balanced_fills_each_class() {
        let (t, spec) = table();
        let qs = gen_balanced_workload(&t, &spec, &DEFAULT_SCALES, 20, 9, 200).unwrap();
        for c in SelectivityClass::ALL {
            assert_eq!(qs.iter().filter(|q| q.class == Some(c)).count(), 20, "{c}");
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.jsonl");
        let (t, spec) = table();
        let qs = gen_workload(&t, &spec, &WorkloadConfig::new(10, 5)).unwrap();
        write_workload(&path, &qs).unwrap();
        assert_eq!(read_workload(&path).unwrap(), qs);
        let line = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        assert!(first.get("dims").is_some() && first.get("true_card").is_some() && first.get("class").is_some());
    }
}
