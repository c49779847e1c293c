use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Table;
use crate::error::{Error, Result};
use crate::zorder::BitSpec;

/// Share of rows that are copies of the leading rows in `DuplicatedPrefix` tables.
pub const DUPLICATE_FRACTION: f64 = 0.375;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    Uniform,
    GaussianClusters,
    /// Clustered base rows followed by copies of the first ones.
    DuplicatedPrefix,
    /// Uniform points restricted to alternating tiles of an 8^m grid.
    Checkerboard,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "gaussian-clusters" | "clusters" => Ok(Self::GaussianClusters),
            "duplicated-prefix" => Ok(Self::DuplicatedPrefix),
            "checkerboard" => Ok(Self::Checkerboard),
            _ => Err(Error::Input(format!(
                "unknown dataset kind `{s}` (uniform, gaussian-clusters, duplicated-prefix, checkerboard)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub kind: SynthKind,
    pub rows: usize,
    pub dims: usize,
    pub bits: u32,
    pub seed: u64,
    pub clusters: usize,
    /// Cluster standard deviation as a fraction of the domain width.
    pub spread: f64,
}

impl SynthParams {
    pub fn new(kind: SynthKind, rows: usize, dims: usize, bits: u32, seed: u64) -> Self {
        Self { kind, rows, dims, bits, seed, clusters: 8, spread: 0.02 }
    }
}

pub fn gen_synthetic(p: &SynthParams) -> Result<Table> {
    if p.rows == 0 {
        return Err(Error::Input("synthetic table needs at least one row".into()));
    }
    let spec = BitSpec::new(p.dims, p.bits)?;
    let max = spec.max_coord();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let rows: Vec<Vec<u64>> = match p.kind {
        SynthKind::Uniform => (0..p.rows).map(|_| (0..p.dims).map(|_| rng.random_range(0..=max)).collect()).collect(),
        SynthKind::GaussianClusters => clustered(p, p.rows, max, &mut rng)?,
        SynthKind::DuplicatedPrefix => {
            let copies = (p.rows as f64 * DUPLICATE_FRACTION).round() as usize;
            let mut rows = clustered(p, p.rows - copies, max, &mut rng)?;
            rows.extend_from_within(..copies);
            rows
        }
        SynthKind::Checkerboard => checkerboard(p, max, &mut rng),
    };
    Table::from_rows(p.bits, &rows)
}

fn clustered(p: &SynthParams, count: usize, max: u64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<u64>>> {
    let k = p.clusters.max(1);
    let width = max as f64 + 1.0;
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..p.dims).map(|_| rng.random::<f64>() * width).collect()).collect();
    let noise = Normal::new(0.0, p.spread.max(0.0) * width).map_err(|e| Error::Input(format!("bad cluster spread: {e}")))?;
    Ok((0..count)
        .map(|_| {
            let c = &centers[rng.random_range(0..k)];
            c.iter().map(|&mu| (mu + noise.sample(rng)).round().clamp(0.0, max as f64) as u64).collect()
        })
        .collect())
}

fn checkerboard(p: &SynthParams, max: u64, rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    let tiles = 8u64.min(max + 1);
    let tile = (max + 1) / tiles;
    (0..p.rows)
        .map(|_| loop {
            let row: Vec<u64> = (0..p.dims).map(|_| rng.random_range(0..=max)).collect();
            let parity: u64 = row.iter().map(|&v| (v / tile).min(tiles - 1)).sum();
            if parity.is_multiple_of(2) {
                break row;
            }
        })
        .collect()
}
