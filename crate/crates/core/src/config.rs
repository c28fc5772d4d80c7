//! Sweep configuration: strict TOML parsing plus the canned experiment
//! presets. Unknown keys are fatal — a silently ignored typo in a margin
//! grid would corrupt every downstream number.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::aggregate::AggregateFn;
use crate::dataset::{Bounds, SynthSpec};
use crate::error::{Error, Result};
use crate::predictor::{PredictorKind, PredictorSpec};
use crate::protocol::ErrorMargin;
use crate::topology::ClusterAssignment;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        readings: PathBuf,
        locations: Option<PathBuf>,
    },
    Synth(Vec<SynthSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeFilter {
    All,
    Ids(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSource {
    Manual(Vec<ClusterAssignment>),
    KMeans { k: usize, seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySetup {
    StarDirect,
    Relay {
        clusters: ClusterSource,
    },
    Aggregation {
        clusters: ClusterSource,
        aggregate: AggregateFn,
        stage2_dps: bool,
    },
}

/// Validated sweep description; every run_sweep input lives here.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub source: DataSource,
    pub bounds: Bounds,
    pub nodes: NodeFilter,
    /// Positional `[start, end)` into each node's cleaned series.
    pub slice: Option<(usize, usize)>,
    pub predictors: Vec<PredictorSpec>,
    pub margins: Vec<ErrorMargin>,
    pub topology: TopologySetup,
    pub include_warmup_in_reduction: bool,
    /// Worker threads; 0 picks a default, 1 forces sequential execution.
    pub jobs: usize,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// Raw TOML layer.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: RawDataset,
    #[serde(default)]
    nodes: Option<Vec<u32>>,
    #[serde(default)]
    slice: Option<RawSlice>,
    #[serde(default)]
    predictor: Vec<RawPredictor>,
    #[serde(default)]
    grid: Option<RawGrid>,
    #[serde(default)]
    topology: Option<RawTopology>,
    #[serde(default)]
    include_warmup_in_reduction: Option<bool>,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    #[serde(default)]
    readings: Option<PathBuf>,
    #[serde(default)]
    locations: Option<PathBuf>,
    #[serde(default)]
    synth: Option<Vec<SynthSpec>>,
    #[serde(default)]
    t_min: Option<f64>,
    #[serde(default)]
    t_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlice {
    #[serde(default)]
    start: usize,
    end: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictor {
    kind: PredictorKind,
    #[serde(default)]
    order: Option<usize>,
    #[serde(default)]
    arma_p: Option<usize>,
    #[serde(default)]
    arma_q: Option<usize>,
    #[serde(default)]
    train_window: Option<usize>,
    #[serde(default)]
    mu0: Option<f64>,
    #[serde(default)]
    vss_alpha: Option<f64>,
    #[serde(default)]
    vss_gamma: Option<f64>,
    #[serde(default)]
    mu_min: Option<f64>,
    #[serde(default)]
    mu_max: Option<f64>,
    #[serde(default)]
    normalize: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default = "default_grid_start")]
    start: f64,
    #[serde(default = "default_grid_stop")]
    stop: f64,
    #[serde(default = "default_grid_count")]
    count: usize,
}

fn default_grid_start() -> f64 {
    0.1
}
fn default_grid_stop() -> f64 {
    5.0
}
fn default_grid_count() -> usize {
    50
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            start: default_grid_start(),
            stop: default_grid_stop(),
            count: default_grid_count(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    mode: RawMode,
    #[serde(default)]
    aggregate: Option<AggregateFn>,
    #[serde(default)]
    stage2_dps: Option<bool>,
    #[serde(default)]
    clusters: Option<Vec<ClusterAssignment>>,
    #[serde(default)]
    kmeans: Option<RawKmeans>,
}

#[derive(Debug, Deserialize, PartialEq, Eq)]
enum RawMode {
    StarDirect,
    Relay,
    Aggregation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKmeans {
    k: usize,
    #[serde(default)]
    seed: Option<u64>,
}

// ---------------------------------------------------------------------------

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    build_config(raw)
}

fn build_config(raw: RawConfig) -> Result<SweepConfig> {
    let source = match (raw.dataset.readings, raw.dataset.synth) {
        (Some(readings), None) => DataSource::Files {
            readings,
            locations: raw.dataset.locations,
        },
        (None, Some(synth)) => {
            if synth.is_empty() {
                return Err(Error::ConfigField {
                    field: "dataset.synth",
                    message: "needs at least one series".into(),
                });
            }
            let mut ids = BTreeSet::new();
            for spec in &synth {
                spec.validate()?;
                if !ids.insert(spec.node_id) {
                    return Err(Error::ConfigField {
                        field: "dataset.synth",
                        message: format!("duplicate node_id {}", spec.node_id),
                    });
                }
            }
            DataSource::Synth(synth)
        }
        (Some(_), Some(_)) => {
            return Err(Error::ConfigField {
                field: "dataset",
                message: "give either `readings` or `synth`, not both".into(),
            });
        }
        (None, None) => {
            return Err(Error::ConfigField {
                field: "dataset",
                message: "needs a `readings` path or a `synth` list".into(),
            });
        }
    };

    let defaults = Bounds::default();
    let bounds = Bounds {
        t_min: raw.dataset.t_min.unwrap_or(defaults.t_min),
        t_max: raw.dataset.t_max.unwrap_or(defaults.t_max),
    };
    if bounds.t_min >= bounds.t_max {
        return Err(Error::ConfigField {
            field: "dataset.t_min",
            message: "t_min must be below t_max".into(),
        });
    }

    let nodes = match raw.nodes {
        None => NodeFilter::All,
        Some(ids) if ids.is_empty() => NodeFilter::All,
        Some(mut ids) => {
            ids.sort_unstable();
            ids.dedup();
            NodeFilter::Ids(ids)
        }
    };

    let slice = match raw.slice {
        None => None,
        Some(RawSlice { start, end }) => {
            if start >= end {
                return Err(Error::ConfigField {
                    field: "slice",
                    message: format!("[{start}, {end}) is empty"),
                });
            }
            Some((start, end))
        }
    };

    if raw.predictor.is_empty() {
        return Err(Error::ConfigField {
            field: "predictor",
            message: "needs at least one [[predictor]] block".into(),
        });
    }
    let predictors: Vec<PredictorSpec> = raw
        .predictor
        .into_iter()
        .map(build_predictor)
        .collect::<Result<_>>()?;

    let margins = build_margins(&raw.grid.unwrap_or_default())?;

    let topology = match raw.topology {
        None => TopologySetup::StarDirect,
        Some(t) => build_topology(t)?,
    };

    Ok(SweepConfig {
        source,
        bounds,
        nodes,
        slice,
        predictors,
        margins,
        topology,
        include_warmup_in_reduction: raw.include_warmup_in_reduction.unwrap_or(true),
        jobs: raw.jobs.unwrap_or(0),
        seed: raw.seed.unwrap_or(0),
    })
}

fn build_predictor(raw: RawPredictor) -> Result<PredictorSpec> {
    let mut spec = match raw.kind {
        PredictorKind::Ma => {
            let order = raw.order.ok_or(Error::ConfigField {
                field: "predictor.order",
                message: "an MA predictor needs an explicit window length".into(),
            })?;
            PredictorSpec::ma(order)
        }
        PredictorKind::Ar => PredictorSpec::ar(raw.arma_p.unwrap_or(2)),
        PredictorKind::Arma => {
            PredictorSpec::arma(raw.arma_p.unwrap_or(2), raw.arma_q.unwrap_or(2))
        }
        PredictorKind::Lms => PredictorSpec::lms(raw.order.unwrap_or(4)),
        PredictorKind::LmsVss => PredictorSpec::lms_vss(raw.order.unwrap_or(4)),
    };
    if let Some(order) = raw.order {
        spec.order = order;
    }
    if let Some(p) = raw.arma_p {
        spec.arma_p = p;
    }
    if let Some(q) = raw.arma_q {
        spec.arma_q = q;
    }
    if let Some(tw) = raw.train_window {
        spec.train_window = tw;
    }
    if let Some(mu0) = raw.mu0 {
        spec.mu0 = mu0;
    }
    if let Some(a) = raw.vss_alpha {
        spec.vss_alpha = a;
    }
    if let Some(g) = raw.vss_gamma {
        spec.vss_gamma = g;
    }
    if let Some(lo) = raw.mu_min {
        spec.mu_min = lo;
    }
    if let Some(hi) = raw.mu_max {
        spec.mu_max = hi;
    }
    if let Some(n) = raw.normalize {
        spec.normalize = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn build_margins(grid: &RawGrid) -> Result<Vec<ErrorMargin>> {
    if grid.count < 1 {
        return Err(Error::ConfigField {
            field: "grid.count",
            message: "must be at least 1".into(),
        });
    }
    if !(grid.start.is_finite() && grid.start > 0.0) {
        return Err(Error::ConfigField {
            field: "grid.start",
            message: format!("margin must be positive, got {}", grid.start),
        });
    }
    if !(grid.stop.is_finite() && grid.stop >= grid.start) {
        return Err(Error::ConfigField {
            field: "grid.stop",
            message: format!("must be at least grid.start, got {}", grid.stop),
        });
    }
    if grid.count == 1 {
        return Ok(vec![ErrorMargin::new(grid.start)?]);
    }
    let step = (grid.stop - grid.start) / (grid.count - 1) as f64;
    (0..grid.count)
        .map(|i| {
            let v = if i + 1 == grid.count {
                grid.stop
            } else {
                grid.start + i as f64 * step
            };
            ErrorMargin::new(v)
        })
        .collect()
}

fn build_topology(raw: RawTopology) -> Result<TopologySetup> {
    let clusters = match (raw.clusters, raw.kmeans) {
        (Some(manual), None) => Some(ClusterSource::Manual(manual)),
        (None, Some(k)) => Some(ClusterSource::KMeans {
            k: k.k,
            seed: k.seed,
        }),
        (Some(_), Some(_)) => {
            return Err(Error::ConfigField {
                field: "topology",
                message: "give either `clusters` or `kmeans`, not both".into(),
            });
        }
        (None, None) => None,
    };
    match raw.mode {
        RawMode::StarDirect => {
            if clusters.is_some() {
                return Err(Error::ConfigField {
                    field: "topology.clusters",
                    message: "StarDirect mode takes no cluster plan".into(),
                });
            }
            Ok(TopologySetup::StarDirect)
        }
        RawMode::Relay => {
            let clusters = clusters.ok_or(Error::ConfigField {
                field: "topology",
                message: "Relay mode needs `clusters` or `kmeans`".into(),
            })?;
            Ok(TopologySetup::Relay { clusters })
        }
        RawMode::Aggregation => {
            let clusters = clusters.ok_or(Error::ConfigField {
                field: "topology",
                message: "Aggregation mode needs `clusters` or `kmeans`".into(),
            })?;
            Ok(TopologySetup::Aggregation {
                clusters,
                aggregate: raw.aggregate.unwrap_or(AggregateFn::Average),
                stage2_dps: raw.stage2_dps.unwrap_or(true),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Canned experiment presets.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Two-node star sweep over the full margin grid, all six filters.
    Fig5,
    /// Full-network star sweep of the MA family plus ARMA.
    Fig6_7,
    /// Relay sweep of the six-node cluster 1/33/34/35/36/37.
    Fig9,
    /// Head-side averaging on that cluster at a 0.5 °C margin.
    Aggregation97,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Fig5,
        Scenario::Fig6_7,
        Scenario::Fig9,
        Scenario::Aggregation97,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Fig5 => "Fig5",
            Scenario::Fig6_7 => "Fig6_7",
            Scenario::Fig9 => "Fig9",
            Scenario::Aggregation97 => "Aggregation97",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig5" => Ok(Scenario::Fig5),
            "fig6_7" | "fig6-7" | "fig67" => Ok(Scenario::Fig6_7),
            "fig9" => Ok(Scenario::Fig9),
            "aggregation97" => Ok(Scenario::Aggregation97),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }
}

/// The six-node cluster used by the relay and aggregation presets.
pub fn preset_cluster() -> ClusterAssignment {
    ClusterAssignment {
        head: Some(1),
        members: vec![1, 33, 34, 35, 36, 37],
    }
}

/// Positional slice shared by every preset: the first 5000 cleaned
/// readings per node.
pub const PRESET_SLICE: (usize, usize) = (0, 5000);

/// Build the canned config for a named preset over a readings file.
pub fn scenario_paper(
    scenario: Scenario,
    readings: PathBuf,
    locations: Option<PathBuf>,
) -> SweepConfig {
    let source = DataSource::Files {
        readings,
        locations,
    };
    let full_grid = build_margins(&RawGrid::default()).expect("default grid is valid");
    let base = SweepConfig {
        source,
        bounds: Bounds::default(),
        nodes: NodeFilter::All,
        slice: Some(PRESET_SLICE),
        predictors: Vec::new(),
        margins: full_grid,
        topology: TopologySetup::StarDirect,
        include_warmup_in_reduction: true,
        jobs: 0,
        seed: 0,
    };
    match scenario {
        Scenario::Fig5 => SweepConfig {
            nodes: NodeFilter::Ids(vec![13, 49]),
            predictors: vec![
                PredictorSpec::ma(2),
                PredictorSpec::ma(4),
                PredictorSpec::ma(10),
                PredictorSpec::arma(2, 2),
                PredictorSpec::lms(4),
                PredictorSpec::lms_vss(4),
            ],
            ..base
        },
        Scenario::Fig6_7 => SweepConfig {
            predictors: vec![
                PredictorSpec::ma(2),
                PredictorSpec::ma(4),
                PredictorSpec::ma(10),
                PredictorSpec::arma(2, 2),
            ],
            ..base
        },
        Scenario::Fig9 => SweepConfig {
            nodes: NodeFilter::Ids(preset_cluster().members.clone()),
            predictors: vec![
                PredictorSpec::ma(2),
                PredictorSpec::ma(4),
                PredictorSpec::lms(4),
                PredictorSpec::lms_vss(4),
            ],
            topology: TopologySetup::Relay {
                clusters: ClusterSource::Manual(vec![preset_cluster()]),
            },
            ..base
        },
        Scenario::Aggregation97 => SweepConfig {
            nodes: NodeFilter::Ids(preset_cluster().members.clone()),
            predictors: vec![PredictorSpec::ma(2)],
            margins: vec![ErrorMargin::new(0.5).expect("0.5 is a valid margin")],
            topology: TopologySetup::Aggregation {
                clusters: ClusterSource::Manual(vec![preset_cluster()]),
                aggregate: AggregateFn::Average,
                stage2_dps: true,
            },
            ..base
        },
    }
}
