//! Sweep execution and result serialization.
//!
//! A sweep is a pure map over (unit, predictor, margin) cells followed by a
//! deterministic sort, so any worker count produces byte-identical output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{run_cluster_pipeline, AggregateFn};
use crate::config::{ClusterSource, DataSource, NodeFilter, SweepConfig, TopologySetup};
use crate::dataset::{clean, read_readings_file, synth, NodeSeries};
use crate::error::{Error, Result};
use crate::predictor::PredictorSpec;
use crate::protocol::{run_dps, trace_metrics_with, Decision, DpsTrace, ErrorMargin, TransmitReason};
use crate::topology::{cluster_kmeans, cluster_manual, parse_locations, ClusterPlan, NodePosition};

pub const CSV_HEADER: &str = "unit,predictor,e_max,transmissions,total,reduction_pct,mse_reconstruction,mse_prediction,baseline_msgs,dps_msgs";
pub const TRACE_CSV_HEADER: &str = "epoch,actual,reconstructed,decision,reason";

/// A sweep row's subject: one node or one cluster (keyed by its head).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    Node(u32),
    Cluster(u32),
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Node(id) => write!(f, "{id}"),
            Unit::Cluster(head) => write!(f, "cluster:{head}"),
        }
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(head) = s.strip_prefix("cluster:") {
            let head = head.parse().map_err(|_| Error::CsvFormat {
                line: 0,
                message: format!("bad cluster unit `{s}`"),
            })?;
            return Ok(Unit::Cluster(head));
        }
        let id = s.parse().map_err(|_| Error::CsvFormat {
            line: 0,
            message: format!("bad unit `{s}`"),
        })?;
        Ok(Unit::Node(id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub unit: Unit,
    pub predictor: String,
    pub e_max: f64,
    pub transmissions: u64,
    pub total: u64,
    pub reduction_pct: f64,
    pub mse_reconstruction: f64,
    pub mse_prediction: f64,
    pub baseline_msgs: u64,
    pub dps_msgs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Realized units, sorted; reported because an `All` node filter keeps
    /// only nodes with enough cleaned data for the slice.
    pub units: Vec<Unit>,
    /// Predictor labels in configuration order.
    pub predictors: Vec<String>,
}

// ---------------------------------------------------------------------------
// Data loading.

/// Cleaned, filtered, sliced per-node series.
pub fn load_series(cfg: &SweepConfig) -> Result<BTreeMap<u32, Vec<f64>>> {
    let full: BTreeMap<u32, NodeSeries> = match &cfg.source {
        DataSource::Files { readings, .. } => {
            let parsed = read_readings_file(readings)?;
            let (series, _) = clean(&parsed.readings, cfg.bounds);
            series
        }
        DataSource::Synth(specs) => specs
            .iter()
            .map(|spec| synth(spec).map(|s| (spec.node_id, s)))
            .collect::<Result<_>>()?,
    };

    let mut out = BTreeMap::new();
    match &cfg.nodes {
        NodeFilter::Ids(ids) => {
            for &node_id in ids {
                let series = full
                    .get(&node_id)
                    .ok_or(Error::MissingNode { node_id })?;
                out.insert(node_id, slice_node(series, cfg.slice, true)?);
            }
        }
        NodeFilter::All => {
            for (&node_id, series) in &full {
                if let Some(values) = slice_node(series, cfg.slice, false).transpose_ok() {
                    out.insert(node_id, values?);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(out)
}

fn slice_node(
    series: &NodeSeries,
    slice: Option<(usize, usize)>,
    strict: bool,
) -> Result<Vec<f64>> {
    let temps = series.temperatures();
    match slice {
        None => {
            if temps.is_empty() {
                return Err(Error::SliceOutOfRange {
                    node_id: series.node_id,
                    len: 0,
                    needed: 1,
                });
            }
            Ok(temps)
        }
        Some((start, end)) => {
            if temps.len() < end {
                if strict {
                    return Err(Error::SliceOutOfRange {
                        node_id: series.node_id,
                        len: temps.len(),
                        needed: end,
                    });
                }
                // Non-strict callers drop under-length nodes.
                return Err(Error::EmptySeries);
            }
            Ok(temps[start..end].to_vec())
        }
    }
}

// Small helper so the `All` path can treat "too short" as a skip while
// other errors (there are none today) would still propagate.
trait TransposeOk<T> {
    fn transpose_ok(self) -> Option<Result<T>>;
}

impl<T> TransposeOk<T> for Result<T> {
    fn transpose_ok(self) -> Option<Result<T>> {
        match self {
            Ok(v) => Some(Ok(v)),
            Err(Error::EmptySeries) | Err(Error::SliceOutOfRange { .. }) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

fn load_positions(cfg: &SweepConfig, nodes: &BTreeMap<u32, Vec<f64>>) -> Result<Vec<NodePosition>> {
    let path = match &cfg.source {
        DataSource::Files {
            locations: Some(path),
            ..
        } => path,
        _ => {
            return Err(Error::ConfigField {
                field: "dataset.locations",
                message: "k-means clustering needs a positions file".into(),
            });
        }
    };
    let parsed = parse_locations(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let by_id: BTreeMap<u32, NodePosition> = parsed
        .positions
        .into_iter()
        .map(|p| (p.node_id, p))
        .collect();
    nodes
        .keys()
        .map(|&node_id| {
            by_id
                .get(&node_id)
                .copied()
                .ok_or(Error::MissingPosition { node_id })
        })
        .collect()
}

fn build_plan(
    cfg: &SweepConfig,
    source: &ClusterSource,
    series: &BTreeMap<u32, Vec<f64>>,
) -> Result<ClusterPlan> {
    let plan = match source {
        ClusterSource::Manual(assignments) => cluster_manual(assignments)?,
        ClusterSource::KMeans { k, seed } => {
            let positions = load_positions(cfg, series)?;
            cluster_kmeans(&positions, *k, seed.unwrap_or(cfg.seed))?
        }
    };
    let expected = series.keys().copied().collect();
    plan.validate(Some(&expected))?;
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Execution.

#[derive(Clone, Copy)]
struct SortKey {
    unit: Unit,
    predictor_idx: usize,
    margin_idx: usize,
}

enum CellKind<'a> {
    /// One node's trace, message counts weighted by hop count.
    Node { node_id: u32, hops: u64 },
    /// One cluster's two-stage aggregation pipeline.
    Cluster {
        head: u32,
        members: &'a [u32],
        aggregate: AggregateFn,
        stage2: bool,
    },
}

struct Cell<'a> {
    key: SortKey,
    kind: CellKind<'a>,
    spec: &'a PredictorSpec,
    margin: ErrorMargin,
}

/// Execute the full cross-product described by the config. Deterministic:
/// the row set and order are identical for any worker count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let series = load_series(cfg)?;
    let include_warmup = cfg.include_warmup_in_reduction;

    let plan = match &cfg.topology {
        TopologySetup::StarDirect => None,
        TopologySetup::Relay { clusters } => Some(build_plan(cfg, clusters, &series)?),
        TopologySetup::Aggregation { clusters, .. } => Some(build_plan(cfg, clusters, &series)?),
    };

    let mut cells: Vec<Cell> = Vec::new();
    match (&cfg.topology, &plan) {
        (TopologySetup::StarDirect, _) => {
            for &node_id in series.keys() {
                for (pi, spec) in cfg.predictors.iter().enumerate() {
                    for (mi, &margin) in cfg.margins.iter().enumerate() {
                        cells.push(Cell {
                            key: SortKey {
                                unit: Unit::Node(node_id),
                                predictor_idx: pi,
                                margin_idx: mi,
                            },
                            kind: CellKind::Node { node_id, hops: 1 },
                            spec,
                            margin,
                        });
                    }
                }
            }
        }
        (TopologySetup::Relay { .. }, Some(plan)) => {
            for &node_id in series.keys() {
                let hops = if plan.is_head(node_id) { 1 } else { 2 };
                for (pi, spec) in cfg.predictors.iter().enumerate() {
                    for (mi, &margin) in cfg.margins.iter().enumerate() {
                        cells.push(Cell {
                            key: SortKey {
                                unit: Unit::Node(node_id),
                                predictor_idx: pi,
                                margin_idx: mi,
                            },
                            kind: CellKind::Node { node_id, hops },
                            spec,
                            margin,
                        });
                    }
                }
            }
        }
        (
            TopologySetup::Aggregation {
                aggregate, stage2_dps, ..
            },
            Some(plan),
        ) => {
            for cluster in &plan.clusters {
                for (pi, spec) in cfg.predictors.iter().enumerate() {
                    for (mi, &margin) in cfg.margins.iter().enumerate() {
                        cells.push(Cell {
                            key: SortKey {
                                unit: Unit::Cluster(cluster.head),
                                predictor_idx: pi,
                                margin_idx: mi,
                            },
                            kind: CellKind::Cluster {
                                head: cluster.head,
                                members: &cluster.members,
                                aggregate: *aggregate,
                                stage2: *stage2_dps,
                            },
                            spec,
                            margin,
                        });
                    }
                }
            }
        }
        _ => unreachable!("plan is built for every clustered topology"),
    }

    let compute = |cell: &Cell| -> Result<(SortKey, SweepRow)> {
        let row = match cell.kind {
            CellKind::Node { node_id, hops } => {
                let trace = run_dps(&series[&node_id], cell.spec, cell.margin)?;
                let metrics = trace_metrics_with(&trace, include_warmup);
                SweepRow {
                    unit: Unit::Node(node_id),
                    predictor: cell.spec.label(),
                    e_max: cell.margin.value(),
                    transmissions: metrics.transmissions,
                    total: metrics.total,
                    reduction_pct: metrics.reduction_pct,
                    mse_reconstruction: metrics.mse_reconstruction,
                    mse_prediction: metrics.mse_prediction,
                    baseline_msgs: hops * metrics.total,
                    dps_msgs: hops * metrics.transmissions,
                }
            }
            CellKind::Cluster {
                head,
                members,
                aggregate,
                stage2,
            } => aggregation_cell(head, members, &series, cell.spec, cell.margin, aggregate, stage2)?,
        };
        Ok((cell.key, row))
    };

    let mut keyed: Vec<(SortKey, SweepRow)> = if cfg.jobs == 1 {
        cells.iter().map(compute).collect::<Result<_>>()?
    } else if cfg.jobs == 0 {
        cells.par_iter().map(compute).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(compute).collect::<Result<Vec<_>>>())?
    };

    keyed.sort_by(|a, b| {
        (a.0.unit, a.0.predictor_idx, a.0.margin_idx).cmp(&(
            b.0.unit,
            b.0.predictor_idx,
            b.0.margin_idx,
        ))
    });

    let mut units: Vec<Unit> = keyed.iter().map(|(k, _)| k.unit).collect();
    units.dedup();
    Ok(SweepResult {
        rows: keyed.into_iter().map(|(_, row)| row).collect(),
        units,
        predictors: cfg.predictors.iter().map(|p| p.label()).collect(),
    })
}

fn aggregation_cell(
    head: u32,
    members: &[u32],
    series: &BTreeMap<u32, Vec<f64>>,
    spec: &PredictorSpec,
    margin: ErrorMargin,
    aggregate: AggregateFn,
    stage2: bool,
) -> Result<SweepRow> {
    let plan = ClusterPlan {
        clusters: vec![crate::topology::Cluster {
            head,
            members: members.to_vec(),
        }],
        method: crate::topology::ClusterMethod::Manual,
    };
    let result = run_cluster_pipeline(&plan, series, spec, margin, aggregate, stage2)?;
    let outcome = &result.clusters[0];
    let t = outcome.true_aggregate.len() as u64;

    // End-to-end aggregate error: what the sink believes vs the truth.
    let mse_reconstruction = outcome
        .sink_aggregate
        .iter()
        .zip(&outcome.true_aggregate)
        .map(|(s, t)| (s - t) * (s - t))
        .sum::<f64>()
        / t as f64;
    let (transmissions, mse_prediction) = match &outcome.aggregate_trace {
        Some(trace) => {
            let m = trace_metrics_with(trace, true);
            (m.transmissions, m.mse_prediction)
        }
        None => (t, 0.0),
    };

    Ok(SweepRow {
        unit: Unit::Cluster(head),
        predictor: spec.label(),
        e_max: margin.value(),
        transmissions,
        total: t,
        reduction_pct: outcome.reduction_pct,
        mse_reconstruction,
        mse_prediction,
        baseline_msgs: outcome.baseline_msgs,
        dps_msgs: outcome.member_msgs + outcome.head_to_sink_msgs,
    })
}

// ---------------------------------------------------------------------------
// Fixed-format serialization.

/// Render with six significant digits in plain decimal, no exponent,
/// trailing zeros trimmed. Deterministic, so repeated emissions are
/// byte-identical.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).clamp(0, 17) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

/// Write a sweep result as CSV with the fixed header and LF line endings.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))
        .map_err(csv_io_error)?;
    for row in &result.rows {
        w.write_record([
            row.unit.to_string(),
            row.predictor.clone(),
            fmt_sig6(row.e_max),
            row.transmissions.to_string(),
            row.total.to_string(),
            fmt_sig6(row.reduction_pct),
            fmt_sig6(row.mse_reconstruction),
            fmt_sig6(row.mse_prediction),
            row.baseline_msgs.to_string(),
            row.dps_msgs.to_string(),
        ])
        .map_err(csv_io_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

fn csv_io_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Parse a file previously written by `emit_csv`.
pub fn parse_csv<R: BufRead>(input: R) -> Result<SweepResult> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut rows = Vec::new();
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or(Error::CsvFormat {
            line: 1,
            message: "missing header".into(),
        })?
        .map_err(|e| Error::CsvFormat {
            line: 1,
            message: e.to_string(),
        })?;
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::CsvFormat {
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::CsvFormat {
            line,
            message: e.to_string(),
        })?;
        if record.len() != expected.len() {
            return Err(Error::CsvFormat {
                line,
                message: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let field = |idx: usize| record.get(idx).unwrap_or_default();
        let parse_f = |idx: usize| -> Result<f64> {
            field(idx).parse().map_err(|_| Error::CsvFormat {
                line,
                message: format!("bad number `{}`", field(idx)),
            })
        };
        let parse_u = |idx: usize| -> Result<u64> {
            field(idx).parse().map_err(|_| Error::CsvFormat {
                line,
                message: format!("bad count `{}`", field(idx)),
            })
        };
        rows.push(SweepRow {
            unit: field(0).parse().map_err(|_| Error::CsvFormat {
                line,
                message: format!("bad unit `{}`", field(0)),
            })?,
            predictor: field(1).to_string(),
            e_max: parse_f(2)?,
            transmissions: parse_u(3)?,
            total: parse_u(4)?,
            reduction_pct: parse_f(5)?,
            mse_reconstruction: parse_f(6)?,
            mse_prediction: parse_f(7)?,
            baseline_msgs: parse_u(8)?,
            dps_msgs: parse_u(9)?,
        });
    }

    let mut units = Vec::new();
    for row in &rows {
        if !units.contains(&row.unit) {
            units.push(row.unit);
        }
    }
    units.sort();
    let mut predictors = Vec::new();
    for row in &rows {
        if !predictors.contains(&row.predictor) {
            predictors.push(row.predictor.clone());
        }
    }
    Ok(SweepResult {
        rows,
        units,
        predictors,
    })
}

pub fn read_csv_file(path: &Path) -> Result<SweepResult> {
    let file = std::fs::File::open(path)?;
    parse_csv(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Plot data.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ReductionVsMargin,
    MseVsMargin,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reduction" => Ok(PlotKind::ReductionVsMargin),
            "mse" => Ok(PlotKind::MseVsMargin),
            other => Err(Error::Config(format!(
                "unknown plot kind `{other}` (expected `reduction` or `mse`)"
            ))),
        }
    }
}

/// Emit per-predictor blocks of `e_max value` pairs (gnuplot-style blank
/// line between blocks), averaging the metric over units at each margin.
pub fn write_plot_data<W: Write>(result: &SweepResult, kind: PlotKind, mut out: W) -> Result<()> {
    if result.rows.is_empty() {
        return Err(Error::EmptyResult);
    }
    let metric_name = match kind {
        PlotKind::ReductionVsMargin => "reduction_pct",
        PlotKind::MseVsMargin => "mse_reconstruction",
    };
    writeln!(out, "# {metric_name} vs e_max")?;
    let unit_list: Vec<String> = result.units.iter().map(|u| u.to_string()).collect();
    writeln!(out, "# units: {}", unit_list.join(" "))?;
    for (i, predictor) in result.predictors.iter().enumerate() {
        // Mean over units per margin; keys are the formatted margins so
        // bit-identical values group together.
        let mut by_margin: BTreeMap<String, (f64, usize, f64)> = BTreeMap::new();
        for row in result.rows.iter().filter(|r| &r.predictor == predictor) {
            let value = match kind {
                PlotKind::ReductionVsMargin => row.reduction_pct,
                PlotKind::MseVsMargin => row.mse_reconstruction,
            };
            let entry = by_margin
                .entry(fmt_sig6(row.e_max))
                .or_insert((0.0, 0, row.e_max));
            entry.0 += value;
            entry.1 += 1;
        }
        if by_margin.is_empty() {
            continue;
        }
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# predictor: {predictor}")?;
        let mut points: Vec<(f64, f64)> = by_margin
            .into_values()
            .map(|(sum, count, margin)| (margin, sum / count as f64))
            .collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite margins"));
        for (margin, value) in points {
            writeln!(out, "{} {}", fmt_sig6(margin), fmt_sig6(value))?;
        }
    }
    Ok(())
}

pub fn emit_plot_data(result: &SweepResult, kind: PlotKind, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_plot_data(result, kind, std::io::BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// Trace export.

/// Write one trace in the fixed `epoch,actual,reconstructed,decision,reason`
/// layout. An optional cluster id prepends a `cluster_id` column, used for
/// aggregate-stream traces.
pub fn write_trace_csv<W: Write>(trace: &DpsTrace, cluster_id: Option<u32>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let header: Vec<String> = match cluster_id {
        Some(_) => std::iter::once("cluster_id".to_string())
            .chain(TRACE_CSV_HEADER.split(',').map(str::to_string))
            .collect(),
        None => TRACE_CSV_HEADER.split(',').map(str::to_string).collect(),
    };
    w.write_record(&header).map_err(csv_io_error)?;
    for epoch in 0..trace.actual.len() {
        let (decision, reason) = match trace.decisions[epoch] {
            Decision::Transmit {
                reason: TransmitReason::Warmup,
                ..
            } => ("transmit", "warmup"),
            Decision::Transmit {
                reason: TransmitReason::ExceededMargin,
                ..
            } => ("transmit", "exceeded_margin"),
            Decision::Suppress { .. } => ("suppress", ""),
        };
        let mut record: Vec<String> = Vec::with_capacity(6);
        if let Some(id) = cluster_id {
            record.push(id.to_string());
        }
        record.push(epoch.to_string());
        record.push(fmt_sig6(trace.actual[epoch]));
        record.push(fmt_sig6(trace.reconstructed[epoch]));
        record.push(decision.to_string());
        record.push(reason.to_string());
        w.write_record(&record).map_err(csv_io_error)?;
    }
    w.flush()?;
    Ok(())
}
