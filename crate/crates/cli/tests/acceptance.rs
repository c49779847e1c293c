//! End-to-end acceptance suite: one test per criterion, each printing a
//! PASS/FAIL line straight to stderr so it shows up under the default harness.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cardindex::armodel::{cdf_call, cross_entropy, pdf_call, serialize, train, MaskedNet, TrainConfig};
use cardindex::cardest::{
    estimate_batch, fast_cdf_est_refine, hybrid_estimate, q_error, query_rng, z_progressive_sample, EstimateResult,
    EstimatorConfig, Method,
};
use cardindex::data::{
    brute_force_card, brute_force_rows, gen_balanced_workload, gen_synthetic, independence_cross_entropy, nearest_rank,
    ExactOracle, SelectivityClass, SynthKind, SynthParams, Table, WorkloadQuery, DEFAULT_SCALES,
};
use cardindex::index::{read_index, write_index, CardIndex, IndexConfig};
use cardindex::zorder::{decode, BitSpec, QueryBox, ZKey, ZRegion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {n:>2} {verdict} {name}: {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn table(kind: SynthKind, rows: usize, bits: u32, seed: u64) -> (Table, BitSpec, Vec<ZKey>) {
    let t = gen_synthetic(&SynthParams::new(kind, rows, 2, bits, seed)).unwrap();
    let spec = t.bit_spec().unwrap();
    let keys = t.keys(&spec).unwrap();
    (t, spec, keys)
}

fn random_box(rng: &mut ChaCha8Rng, spec: &BitSpec) -> QueryBox {
    let max = spec.max_coord();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for _ in 0..spec.dims() {
        let (a, b) = (rng.random_range(0..=max), rng.random_range(0..=max));
        lo.push(a.min(b));
        hi.push(a.max(b));
    }
    QueryBox::new(&lo, &hi, spec).unwrap()
}

/// 100k clustered rows, a trained net at n = 32 and the index built on it.
struct Big {
    table: Table,
    keys: Vec<ZKey>,
    idx: CardIndex<MaskedNet>,
    mixed: Vec<WorkloadQuery>,
    small: Vec<WorkloadQuery>,
    small_results: OnceLock<Vec<cardindex::Result<EstimateResult>>>,
}

fn big() -> &'static Big {
    static BIG: OnceLock<Big> = OnceLock::new();
    BIG.get_or_init(|| {
        let (table, spec, keys) = table(SynthKind::GaussianClusters, 100_000, 16, 1);
        let (net, _) = train(&keys, 32, &TrainConfig { seed: 1, ..Default::default() }).unwrap();
        let idx = CardIndex::from_keys(net, spec, &keys, &IndexConfig::default()).unwrap();
        let mixed = gen_balanced_workload(&table, &spec, &DEFAULT_SCALES, 334, 11, 200).unwrap();
        let small = gen_balanced_workload(&table, &spec, &DEFAULT_SCALES, 1000, 12, 200)
            .unwrap()
            .into_iter()
            .filter(|q| q.class != Some(SelectivityClass::High))
            .collect();
        Big { table, keys, idx, mixed, small, small_results: OnceLock::new() }
    })
}

fn small_results(b: &Big) -> &[cardindex::Result<EstimateResult>] {
    b.small_results.get_or_init(|| {
        let queries: Vec<QueryBox> = b.small.iter().map(|q| q.query.clone()).collect();
        estimate_batch(&b.idx, &queries, &EstimatorConfig::default())
    })
}

/// Point and range answers of `idx` on the criterion-3 suite.
fn index_answers(idx: &CardIndex<MaskedNet>, b: &Big) -> (Vec<Option<u64>>, Vec<Vec<u64>>) {
    let points = b.keys.iter().map(|&z| idx.point_query(z).map(|h| h.row)).collect();
    let ranges = b.mixed.iter().map(|q| idx.range_query(&q.query).unwrap()).collect();
    (points, ranges)
}

#[test]
fn criterion_01_bigmin_litmax_exhaustive() {
    let start = Instant::now();
    let spec = BitSpec::new(2, 4).unwrap();
    let mut pairs = 0u64;
    let mut mismatches = 0u64;
    for x0 in 0..16 {
        for x1 in x0..16 {
            for y0 in 0..16 {
                for y1 in y0..16 {
                    let q = QueryBox::new(&[x0, y0], &[x1, y1], &spec).unwrap();
                    let r = ZRegion::new(&q, &spec).unwrap();
                    let inside: Vec<bool> =
                        (0..256u128).map(|z| q.contains_coords(&decode(ZKey::from_u128(z), &spec))).collect();
                    let mut above = vec![None; 256];
                    let mut next = None;
                    for z in (0..256).rev() {
                        above[z] = next;
                        if inside[z] {
                            next = Some(ZKey::from_u128(z as u128));
                        }
                    }
                    let mut prev = None;
                    for z in 0..256 {
                        let key = ZKey::from_u128(z as u128);
                        pairs += 1;
                        if r.bigmin(key) != above[z] || r.litmax(key) != prev {
                            mismatches += 1;
                        }
                        if inside[z] {
                            prev = Some(key);
                        }
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "BIGMIN/LITMAX exhaustive on m=2, b=4",
        mismatches == 0 && elapsed < Duration::from_secs(10),
        &format!("{pairs} (box, z) pairs, {mismatches} mismatches, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_oracle_keystone() {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (kind, seed) in [(SynthKind::Uniform, 1), (SynthKind::GaussianClusters, 2), (SynthKind::DuplicatedPrefix, 3)] {
        let (_, spec, keys) = table(kind, 256, 8, seed);
        let n = spec.key_bits();
        let oracle = ExactOracle::new(keys.clone(), n).unwrap();
        let total = keys.len() as f64;
        for &z in &keys {
            let rank = keys.iter().filter(|&&k| k < z).count() as f64;
            let freq = keys.iter().filter(|&&k| k == z).count() as f64;
            worst = worst.max((cdf_call(&oracle, z, n) - rank / total).abs());
            worst = worst.max((pdf_call(&oracle, z) - freq / total).abs());
            checked += 1;
        }
    }
    report(
        2,
        "oracle CDF = rank/N and PDF = o(t)/N",
        worst <= 1e-9,
        &format!("{checked} tuples over 3 datasets, max abs error {worst:.2e}"),
    );
}

#[test]
fn criterion_03_index_exactness() {
    let b = big();
    let start = Instant::now();
    let mut lost = 0;
    for &z in &b.keys {
        match b.idx.point_query(z) {
            Some(hit) if b.keys[hit.row as usize] == z => {}
            _ => lost += 1,
        }
    }
    let mut per_class = [0usize; 3];
    let mut mismatches = 0;
    for wq in &b.mixed {
        let truth = brute_force_rows(&b.table, &wq.query);
        let mut rows = b.idx.range_query(&wq.query).unwrap();
        rows.sort_unstable();
        let (count, _) = b.idx.range_count(&wq.query).unwrap();
        if rows != truth || count != truth.len() as u64 {
            mismatches += 1;
        }
        let class = SelectivityClass::ALL.iter().position(|&c| Some(c) == wq.class).unwrap();
        per_class[class] += 1;
    }
    let elapsed = start.elapsed();
    report(
        3,
        "index point/range exactness on 100k rows",
        lost == 0 && mismatches == 0 && b.mixed.len() >= 1000 && per_class.iter().all(|&c| c > 0)
            && elapsed < Duration::from_secs(300),
        &format!(
            "{} resident keys, {lost} lost; {} boxes (high/low/ex-low {:?}), {mismatches} mismatches; {elapsed:.1?}",
            b.keys.len(),
            b.mixed.len(),
            per_class
        ),
    );
}

#[test]
fn criterion_04_scan_bound() {
    let b = big();
    let cfg = EstimatorConfig::default();
    let bound = cfg.best * b.keys.len() as f64;
    let mut routed = 0;
    let mut violations = 0;
    let mut max_scan = 0;
    for r in small_results(b) {
        match r {
            Ok(r) if r.method == Method::ExactIndex => {
                routed += 1;
                max_scan = max_scan.max(r.n_scan);
                if r.n_scan as f64 > bound {
                    violations += 1;
                }
            }
            Ok(_) => {}
            Err(_) => violations += 1,
        }
    }
    report(
        4,
        "N_scan <= bEST * N on Low + Ex-Low",
        violations == 0 && b.small.len() >= 2000,
        &format!("{} queries, {routed} index-routed, max N_scan {max_scan} vs bound {bound}, {violations} violations", b.small.len()),
    );
}

#[test]
fn criterion_05_routed_queries_are_exact() {
    let b = big();
    let mut exlow = 0;
    let mut exlow_routed = 0;
    let mut routed = 0;
    let mut inexact = 0;
    for (wq, r) in b.small.iter().zip(small_results(b)) {
        let Ok(r) = r else { continue };
        let is_exlow = wq.class == Some(SelectivityClass::ExLow);
        exlow += is_exlow as usize;
        if r.method == Method::ExactIndex {
            routed += 1;
            exlow_routed += is_exlow as usize;
            if q_error(r.card, wq.true_card.unwrap() as f64) != 1.0 {
                inexact += 1;
            }
        }
    }
    let share = exlow_routed as f64 / exlow.max(1) as f64;
    report(
        5,
        "index-routed q-error 1.0, >= 90% of Ex-Low routed",
        inexact == 0 && share >= 0.9,
        &format!("{exlow_routed}/{exlow} Ex-Low routed ({:.1}%), {routed} routed overall, {inexact} with q-error != 1", share * 100.0),
    );
}

#[test]
fn criterion_06_refinement_depth() {
    let depths = [0u32, 4, 8, 16];
    let (t, spec, keys) = table(SynthKind::Checkerboard, 10_000, 12, 3);
    let n = spec.key_bits();

    let oracle = ExactOracle::new(keys.clone(), n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut increases = 0;
    for _ in 0..200 {
        let r = ZRegion::new(&random_box(&mut rng, &spec), &spec).unwrap();
        let est: Vec<f64> =
            depths.iter().map(|&d| fast_cdf_est_refine(&oracle, &r, r.zmin(), r.zmax(), d, 1e-3, n)).collect();
        increases += est.windows(2).filter(|w| w[1] > w[0]).count();
    }

    // boxes straddling the x = 2^(b-1) quadrant boundary, the Fig. 4 shape
    let half = 1u64 << (spec.bits_per_dim() - 1);
    let boxes: Vec<QueryBox> = (0..200)
        .map(|_| {
            let (a, c) = (rng.random_range(1..64u64), rng.random_range(1..64u64));
            let y = rng.random_range(0..=spec.max_coord() - 96);
            let h = rng.random_range(1..96u64);
            QueryBox::new(&[half - a, y], &[half - 1 + c, y + h], &spec).unwrap()
        })
        .collect();
    let truths: Vec<f64> = boxes.iter().map(|q| brute_force_card(&t, q) as f64).collect();
    let (net, _) = train(&keys, n, &TrainConfig { ell: n, seed: 6, ..Default::default() }).unwrap();
    let idx = CardIndex::from_keys(net, spec, &keys, &IndexConfig { ell: n, ..Default::default() }).unwrap();
    let max_q: Vec<f64> = depths
        .iter()
        .map(|&depth| {
            let cfg = EstimatorConfig { depth, ..Default::default() };
            boxes
                .iter()
                .zip(&truths)
                .enumerate()
                .map(|(i, (q, &truth))| q_error(hybrid_estimate(&idx, q, &cfg, i as u64).unwrap().card, truth))
                .fold(1.0, f64::max)
        })
        .collect();
    let non_increasing = max_q.windows(2).all(|w| w[1] <= w[0]);
    let drop = max_q[0] / max_q[3];
    report(
        6,
        "refinement monotone in d, max q-error drops >= 2x",
        increases == 0 && non_increasing && drop >= 2.0,
        &format!("oracle probe increases {increases}/600; max q-error by d {depths:?}: {max_q:.3?}, drop {drop:.2}x"),
    );
}

#[test]
fn criterion_07_sampler_unbiased() {
    let (t, spec, keys) = table(SynthKind::GaussianClusters, 10_000, 16, 7);
    let oracle = ExactOracle::new(keys, spec.key_bits()).unwrap();
    let high: Vec<WorkloadQuery> = gen_balanced_workload(&t, &spec, &DEFAULT_SCALES, 100, 71, 200)
        .unwrap()
        .into_iter()
        .filter(|q| q.class == Some(SelectivityClass::High))
        .collect();
    let mut within = 0;
    for (i, wq) in high.iter().enumerate() {
        let r = ZRegion::new(&wq.query, &spec).unwrap();
        let est = z_progressive_sample(&oracle, &r, 2000, t.len(), &mut query_rng(72, i as u64));
        let truth = wq.true_card.unwrap() as f64;
        if (est.card - truth).abs() <= 3.0 * est.std_error + 1e-6 {
            within += 1;
        }
    }
    let full = ZRegion::new(&QueryBox::full(&spec), &spec).unwrap();
    let full_est = z_progressive_sample(&oracle, &full, 2000, t.len(), &mut query_rng(72, 1_000)).card;
    report(
        7,
        "progressive sampling unbiased under the oracle",
        high.len() == 100 && within >= 95 && full_est == t.len() as f64,
        &format!("{within}/{} High boxes within 3 SE; full box {full_est} of {}", high.len(), t.len()),
    );
}

#[test]
fn criterion_08_training_sanity() {
    let start = Instant::now();
    let (t, spec, keys) = table(SynthKind::GaussianClusters, 10_000, 16, 8);
    let cfg = TrainConfig { seed: 8, ..Default::default() };
    let (net, _) = train(&keys, 32, &cfg).unwrap();
    let ce = cross_entropy(&net, &keys);
    let baseline = independence_cross_entropy(&keys, 32);
    let idx = CardIndex::from_keys(net, spec, &keys, &IndexConfig::default()).unwrap();
    let high: Vec<WorkloadQuery> = gen_balanced_workload(&t, &spec, &DEFAULT_SCALES, 100, 81, 200)
        .unwrap()
        .into_iter()
        .filter(|q| q.class == Some(SelectivityClass::High))
        .collect();
    let queries: Vec<QueryBox> = high.iter().map(|q| q.query.clone()).collect();
    let mut qerrors: Vec<f64> = estimate_batch(&idx, &queries, &EstimatorConfig::default())
        .into_iter()
        .zip(&high)
        .map(|(r, wq)| q_error(r.unwrap().card, wq.true_card.unwrap() as f64))
        .collect();
    qerrors.sort_by(f64::total_cmp);
    let p50 = nearest_rank(&qerrors, 0.5);
    let elapsed = start.elapsed();
    report(
        8,
        "trained net beats independence, High p50 q-error <= 4",
        ce < baseline && p50 <= 4.0 && elapsed < Duration::from_secs(600),
        &format!("cross-entropy {ce:.3} vs baseline {baseline:.3} nats; High p50 {p50:.3} over {}; {elapsed:.1?}", high.len()),
    );
}

#[test]
fn criterion_09_artifact_budget_and_round_trip() {
    let b = big();
    let model_bytes = serialize(b.idx.model()).len();
    let restored = read_index(&write_index(&b.idx)).unwrap();
    let identical = index_answers(&b.idx, b) == index_answers(&restored, b);
    report(
        9,
        "model <= 200 KB, index round trip answers identically",
        model_bytes <= 200_000 && identical,
        &format!("model {model_bytes} bytes; reloaded index identical on criterion-3 suite: {identical}"),
    );
}

fn cardindex(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_cardindex"))
        .args(args)
        .current_dir(dir)
        .env("CARDINDEX_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Hash of a build + estimate run with timing fields removed.
fn pipeline_digest(dir: &Path) -> String {
    cardindex(dir, &["synth", "--rows", "5000", "--out", "t.tab"]);
    cardindex(dir, &["workload", "--table", "t.tab", "--per-class", "40", "--out", "w.jsonl"]);
    let build = cardindex(dir, &["build", "--table", "t.tab", "--model-out", "m.bin", "--index-out", "i.idx"]);
    cardindex(dir, &["estimate", "--index", "i.idx", "--workload", "w.jsonl", "--out", "e.jsonl"]);
    let mut h = Sha256::new();
    h.update(&build);
    for f in ["m.bin", "i.idx", "w.jsonl"] {
        h.update(std::fs::read(dir.join(f)).unwrap());
    }
    for line in std::fs::read_to_string(dir.join("e.jsonl")).unwrap().lines() {
        let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
        v.as_object_mut().unwrap().remove("elapsed_us");
        h.update(v.to_string());
    }
    format!("{:x}", h.finalize())
}

#[test]
fn criterion_10_deterministic_pipeline() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (da, db) = (pipeline_digest(a.path()), pipeline_digest(b.path()));
    report(10, "build + estimate deterministic under a fixed seed", da == db, &format!("{} vs {}", &da[..16], &db[..16]));
}
