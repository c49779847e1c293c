use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};

use cardindex::armodel::{save_model, serialize, train, TrainConfig};
use cardindex::cardest::{estimate_batch, q_error, EstimatorConfig, Method};
use cardindex::data::{
    aggregate, brute_force_rows, gen_balanced_workload, gen_synthetic, gen_workload, ingest_csv, load_table,
    read_workload, save_table, write_workload, QErrorStats, Schema, SelectivityClass, SynthKind, SynthParams,
    WorkloadConfig,
};
use cardindex::index::{load_index, write_index, CardIndex, IndexConfig};
use cardindex::zorder::{encode, BitSpec, QueryBox};
use serde::Serialize;

use crate::args::{
    BenchArgs, BuildArgs, EstimateArgs, EstimatorArgs, IngestArgs, QueryArgs, SynthArgs, TrainArgs, WorkloadArgs,
};
use crate::report;
use crate::CliError;

/// Rounds of candidate generation allowed when filling per-class quotas.
const BALANCE_ROUNDS: usize = 200;

pub(crate) fn config_line(command: &str, args: &impl Serialize) -> Result<String, CliError> {
    let body = serde_json::to_string(args).map_err(cardindex::Error::from)?;
    Ok(format!("# config {{\"command\":\"{command}\",\"args\":{body}}}"))
}

pub fn ingest(a: &IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let schema: Schema = a.schema.parse()?;
    let table = ingest_csv(&a.csv, &schema)?;
    save_table(&table, &a.out)?;
    writeln!(out, "{}", config_line("ingest", a)?)?;
    let bits: Vec<String> = table.columns().iter().map(|c| c.bits.to_string()).collect();
    writeln!(out, "rows {} columns {} bits {}", table.len(), table.dims(), bits.join(","))?;
    Ok(())
}

pub fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let kind: SynthKind = a.kind.parse()?;
    let table = gen_synthetic(&SynthParams::new(kind, a.rows, a.dims, a.bits, a.seed))?;
    save_table(&table, &a.out)?;
    writeln!(out, "{}", config_line("synth", a)?)?;
    writeln!(out, "rows {} columns {}", table.len(), table.dims())?;
    Ok(())
}

pub fn workload(a: &WorkloadArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = load_table(&a.table)?;
    let spec = table.bit_spec()?;
    let queries = match a.per_class {
        Some(n) => gen_balanced_workload(&table, &spec, &a.scales, n, a.seed, BALANCE_ROUNDS)?,
        None => gen_workload(&table, &spec, &WorkloadConfig { scales: a.scales.clone(), count: a.count, seed: a.seed })?,
    };
    write_workload(&a.out, &queries)?;
    writeln!(out, "{}", config_line("workload", a)?)?;
    for class in SelectivityClass::ALL {
        let n = queries.iter().filter(|q| q.class == Some(class)).count();
        writeln!(out, "{} {n}", class.name())?;
    }
    Ok(())
}

fn clamp_ell(ell: usize, n: usize) -> usize {
    if ell > n {
        log::warn!("ell {ell} exceeds key length {n}; clamping to {n}");
        n
    } else {
        ell
    }
}

fn train_config(t: &TrainArgs, n: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        learning_rate: t.learning_rate,
        link: t.link,
        hidden: t.hidden,
        ell: clamp_ell(t.ell, n),
        seed,
        ..Default::default()
    }
}

pub fn build(a: &BuildArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = load_table(&a.table)?;
    let spec = table.bit_spec()?;
    let keys = table.keys(&spec)?;
    let n = spec.key_bits();
    let cfg = train_config(&a.train, n, a.seed);
    writeln!(out, "{}", config_line("build", a)?)?;
    writeln!(out, "# key_bits {n} ell {}", cfg.ell)?;

    let (net, train_report) = train(&keys, n, &cfg)?;
    writeln!(out, "epoch,loss")?;
    for (e, loss) in train_report.epoch_losses.iter().enumerate() {
        writeln!(out, "{},{loss:.6}", e + 1)?;
    }
    let model_bytes = serialize(&net).len();
    save_model(&net, &a.model_out)?;

    let icfg = IndexConfig {
        fanout: a.index.fanout,
        submodels_per_million: a.index.submodels_per_million,
        berr_frac: a.index.berr_frac,
        ell: cfg.ell,
    };
    let idx = CardIndex::from_keys(net, spec, &keys, &icfg)?;
    let bytes = write_index(&idx);
    std::fs::write(&a.index_out, &bytes)?;
    writeln!(out, "model_bytes {model_bytes}")?;
    writeln!(out, "index_bytes {}", bytes.len())?;
    writeln!(out, "pages {}", idx.pages().len())?;
    writeln!(out, "submodels {}", idx.buckets().len())?;
    writeln!(out, "segments {}", idx.segment_count())?;
    Ok(())
}

/// Parses `lo:hi,*,v` into a box; `*` leaves a dimension unbounded and a bare
/// value fixes it.
pub fn parse_box(text: &str, spec: &BitSpec) -> Result<QueryBox, CliError> {
    let mut bounds = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let bad = || CliError::Usage(format!("malformed range bound `{part}` (expected lo:hi, v or *)"));
        if part == "*" {
            bounds.push(None);
            continue;
        }
        let (lo, hi) = match part.split_once(':') {
            Some((lo, hi)) => (lo.trim(), hi.trim()),
            None => (part, part),
        };
        let lo: u64 = lo.parse().map_err(|_| bad())?;
        let hi: u64 = hi.parse().map_err(|_| bad())?;
        bounds.push(Some((lo, hi)));
    }
    Ok(QueryBox::from_partial(&bounds, spec)?)
}

pub fn query(a: &QueryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let idx = load_index(&a.index)?;
    let spec = *idx.spec();
    let table = a.audit.as_deref().map(load_table).transpose()?;
    if let Some(point) = &a.point {
        let z = encode(point, &spec)?;
        match idx.point_query(z) {
            Some(hit) => writeln!(out, "found row {} page {} slot {}", hit.row, hit.page, hit.slot)?,
            None => writeln!(out, "not found")?,
        }
        if let Some(t) = &table {
            let truth = brute_force_rows(t, &QueryBox::point(point));
            let agrees = match idx.point_query(z) {
                Some(hit) => truth.contains(&hit.row),
                None => truth.is_empty(),
            };
            audit_line(out, agrees)?;
        }
        return Ok(());
    }
    let text = a.range.as_deref().ok_or_else(|| CliError::Usage("either --point or --range is required".into()))?;
    let q = parse_box(text, &spec)?;
    let mut rows = idx.range_query(&q)?;
    let stats = idx.range_stats(&q)?;
    writeln!(out, "count {} scanned {} jumps {}", stats.count, stats.scanned, stats.jumps)?;
    if a.rows {
        for r in &rows {
            writeln!(out, "{r}")?;
        }
    }
    if let Some(t) = &table {
        rows.sort_unstable();
        audit_line(out, rows == brute_force_rows(t, &q))?;
    }
    Ok(())
}

fn audit_line(out: &mut dyn Write, agrees: bool) -> Result<(), CliError> {
    if agrees {
        writeln!(out, "MATCH")?;
        Ok(())
    } else {
        writeln!(out, "MISMATCH")?;
        Err(CliError::Check("index answer differs from a full scan".into()))
    }
}

pub(crate) fn estimator_config(e: &EstimatorArgs, seed: u64) -> Result<EstimatorConfig, CliError> {
    let cfg = EstimatorConfig { best: e.best, samples: e.samples, depth: e.depth, delta0: e.delta0, seed };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct EstimateReport {
    config: serde_json::Value,
    rows: usize,
    classes: BTreeMap<&'static str, ClassSummary>,
}

#[derive(Serialize)]
struct ClassSummary {
    #[serde(flatten)]
    stats: QErrorStats,
    exact_index: usize,
    progressive_sample: usize,
}

pub fn estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = estimator_config(&a.estimator, a.seed)?;
    let idx = load_index(&a.index)?;
    let workload = read_workload(&a.workload)?;
    if a.report.is_some() && workload.iter().any(|q| q.true_card.is_none()) {
        return Err(CliError::Core(cardindex::Error::Input(
            "a summary report needs true_card on every workload query".into(),
        )));
    }
    let queries: Vec<QueryBox> = workload.iter().map(|q| q.query.clone()).collect();
    let results = estimate_batch(&idx, &queries, &cfg).into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut sink: Box<dyn Write + '_> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(&mut *out),
    };
    for r in &results {
        writeln!(sink, "{}", serde_json::to_string(r).map_err(cardindex::Error::from)?)?;
    }
    sink.flush()?;
    drop(sink);

    if let Some(path) = &a.report {
        let rows = idx.len();
        let mut groups: BTreeMap<&'static str, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
        for (wq, r) in workload.iter().zip(&results) {
            let truth = wq.true_card.expect("checked above");
            let class = wq.class.unwrap_or_else(|| SelectivityClass::of(truth as f64 / rows.max(1) as f64));
            let g = groups.entry(class.name()).or_default();
            g.0.push(q_error(r.card, truth as f64));
            g.1.push(r.elapsed_us);
            if r.method == Method::ExactIndex {
                g.2 += 1;
            }
        }
        let mut classes = BTreeMap::new();
        for (name, (qe, lat, exact)) in groups {
            let stats = aggregate(&qe, &lat)?;
            classes.insert(name, ClassSummary { stats, exact_index: exact, progressive_sample: qe.len() - exact });
        }
        let config = serde_json::json!({ "command": "estimate", "args": a });
        let rep = EstimateReport { config, rows, classes };
        std::fs::write(path, serde_json::to_string_pretty(&rep).map_err(cardindex::Error::from)?)?;
    }
    Ok(())
}

pub fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = estimator_config(&a.estimator, a.seed)?;
    let idx = load_index(&a.index)?;
    let workload = read_workload(&a.workload)?;
    let queries: Vec<QueryBox> = workload.iter().map(|q| q.query.clone()).collect();
    let header = config_line("bench", a)?;
    let rep = report::run_bench(&idx, &queries, a.point_queries, &cfg)?;
    let mut sink: Box<dyn Write + '_> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(&mut *out),
    };
    rep.write_csv(&header, &mut sink)?;
    sink.flush()?;
    Ok(())
}
