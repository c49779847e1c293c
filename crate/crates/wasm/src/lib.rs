//! Browser demo over a small 2-D table: a traced range scan and the hybrid
//! estimator with its refined probe. Results cross the boundary as JSON.

use cardindex::armodel::{train, MaskedNet, TrainConfig};
use cardindex::cardest::{fast_cdf_est_naive, hybrid_estimate, q_error, refine_probe, EstimatorConfig, Method};
use cardindex::data::{brute_force_card, gen_synthetic, SynthKind, SynthParams, Table};
use cardindex::index::{CardIndex, IndexConfig};
use cardindex::zorder::{decode, BitSpec, QueryBox, ZRegion};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Bits per coordinate; the canvas is 256 x 256 cells.
pub const BITS: u32 = 8;

#[derive(Serialize)]
struct ScanTrace {
    count: u64,
    scanned: u64,
    jumps: u64,
    hits: Vec<[u64; 2]>,
    /// Out-of-box tuple that triggered each jump, and where the scan landed.
    skips: Vec<([u64; 2], Option<[u64; 2]>)>,
}

#[derive(Serialize)]
struct Estimate {
    truth: u64,
    card: f64,
    method: Method,
    q_error: f64,
    naive: f64,
    refined: f64,
    /// Surviving Z intervals of the refined probe, as raw keys.
    intervals: Vec<[u64; 2]>,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    table: Table,
    spec: BitSpec,
    idx: CardIndex<MaskedNet>,
    final_loss: f64,
}

#[wasm_bindgen]
impl Demo {
    /// Generates a table of `rows` points and trains the index model on it.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, rows: usize, seed: u64, epochs: usize) -> Result<Demo, JsError> {
        let kind: SynthKind = kind.parse().map_err(js_err)?;
        let table = gen_synthetic(&SynthParams::new(kind, rows, 2, BITS, seed)).map_err(js_err)?;
        let spec = table.bit_spec().map_err(js_err)?;
        let keys = table.keys(&spec).map_err(js_err)?;
        let n = spec.key_bits();
        let cfg = TrainConfig { epochs, batch_size: 128, learning_rate: 5e-3, link: n, ell: n, seed, ..Default::default() };
        let (net, report) = train(&keys, n, &cfg).map_err(js_err)?;
        let idx = CardIndex::from_keys(net, spec, &keys, &IndexConfig { fanout: 32, ell: n, ..Default::default() })
            .map_err(js_err)?;
        Ok(Demo { table, spec, idx, final_loss: report.final_loss })
    }

    #[wasm_bindgen(getter)]
    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    /// All points as a flat `[x0, y0, x1, y1, ...]` array.
    pub fn points(&self) -> Vec<u32> {
        (0..self.table.len()).flat_map(|r| self.table.row(r).into_iter().map(|v| v as u32)).collect()
    }

    /// JSON trace of a range scan over `[x0, x1] x [y0, y1]`.
    pub fn range_scan(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> Result<String, JsError> {
        let q = self.query_box(x0, y0, x1, y1)?;
        let region = ZRegion::new(&q, &self.spec).map_err(js_err)?;
        let slots = self.idx.slots();
        let cell = |pos: usize| -> [u64; 2] {
            let c = decode(slots[pos].key, &self.spec);
            [c[0], c[1]]
        };
        let mut hits = Vec::new();
        let mut skips = Vec::new();
        let stats = self.idx.scan(&region, |pos| hits.push(cell(pos)), |from, to| {
            skips.push((cell(from), (to < slots.len()).then(|| cell(to))))
        });
        let trace = ScanTrace { count: stats.count, scanned: stats.scanned, jumps: stats.jumps, hits, skips };
        serde_json::to_string(&trace).map_err(js_err)
    }

    /// JSON of the hybrid estimate for `[x0, x1] x [y0, y1]` at refinement `depth`.
    pub fn estimate(&self, x0: u32, y0: u32, x1: u32, y1: u32, depth: u32, seed: u64) -> Result<String, JsError> {
        let q = self.query_box(x0, y0, x1, y1)?;
        let region = ZRegion::new(&q, &self.spec).map_err(js_err)?;
        let cfg = EstimatorConfig { depth, seed, ..Default::default() };
        let model = self.idx.model();
        let ell = self.idx.ell();
        let probe = refine_probe(model, &region, region.zmin(), region.zmax(), depth, cfg.delta0, ell);
        let result = hybrid_estimate(&self.idx, &q, &cfg, 0).map_err(js_err)?;
        let truth = brute_force_card(&self.table, &q);
        let out = Estimate {
            truth,
            card: result.card,
            method: result.method,
            q_error: q_error(result.card, truth as f64),
            naive: fast_cdf_est_naive(model, &region, ell) * self.table.len() as f64,
            refined: probe.mass * self.table.len() as f64,
            intervals: probe.intervals.iter().map(|(a, b)| [a.0.as_u64(), b.0.as_u64()]).collect(),
        };
        serde_json::to_string(&out).map_err(js_err)
    }
}

impl Demo {
    fn query_box(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> Result<QueryBox, JsError> {
        let lo = [x0.min(x1) as u64, y0.min(y1) as u64];
        let hi = [x0.max(x1) as u64, y0.max(y1) as u64];
        QueryBox::new(&lo, &hi, &self.spec).map_err(js_err)
    }
}
