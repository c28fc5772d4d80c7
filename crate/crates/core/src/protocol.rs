//! The dual prediction scheme.
//!
//! A node transmits a reading only when its one-step prediction misses the
//! measurement by more than the error margin; the sink keeps an identical
//! predictor clone and substitutes its own prediction for every suppressed
//! epoch. On a suppressed epoch BOTH sides feed the predicted value to
//! their predictors — the sink never learns the actual, so feeding the node
//! its measurement would desynchronize the pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{PredictorSpec, PredictorState};

/// Reconstruction error bound in °C. Finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ErrorMargin(f64);

impl ErrorMargin {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidMargin { value });
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ErrorMargin {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ErrorMargin> for f64 {
    fn from(margin: ErrorMargin) -> f64 {
        margin.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransmitReason {
    Warmup,
    ExceededMargin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Transmit { value: f64, reason: TransmitReason },
    Suppress { predicted: f64 },
}

impl Decision {
    pub fn is_transmit(&self) -> bool {
        matches!(self, Decision::Transmit { .. })
    }

    /// The value put on the radio, if any.
    pub fn transmitted_value(&self) -> Option<f64> {
        match self {
            Decision::Transmit { value, .. } => Some(*value),
            Decision::Suppress { .. } => None,
        }
    }
}

/// Sensor-side half of the scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    predictor: PredictorState,
    e_max: ErrorMargin,
}

impl NodeState {
    pub fn new(spec: PredictorSpec, e_max: ErrorMargin) -> Result<Self> {
        Ok(Self {
            predictor: PredictorState::new(spec)?,
            e_max,
        })
    }

    pub fn predictor(&self) -> &PredictorState {
        &self.predictor
    }

    /// Process one reading: decide transmit/suppress and advance the
    /// predictor. On suppression the predictor observes its own prediction.
    pub fn node_step(self, actual: f64) -> Result<(Decision, Self)> {
        if !actual.is_finite() {
            return Err(Error::NonFiniteInput { value: actual });
        }
        let NodeState { predictor, e_max } = self;
        if predictor.warmup_needed() > 0 {
            let predictor = predictor.observe(actual)?;
            return Ok((
                Decision::Transmit {
                    value: actual,
                    reason: TransmitReason::Warmup,
                },
                NodeState { predictor, e_max },
            ));
        }
        let predicted = predictor.predict()?;
        // Ties suppress; a non-finite prediction falls through to transmit.
        if (actual - predicted).abs() <= e_max.value() {
            let predictor = predictor.observe(predicted)?;
            Ok((
                Decision::Suppress { predicted },
                NodeState { predictor, e_max },
            ))
        } else {
            let predictor = predictor.observe(actual)?;
            Ok((
                Decision::Transmit {
                    value: actual,
                    reason: TransmitReason::ExceededMargin,
                },
                NodeState { predictor, e_max },
            ))
        }
    }
}

/// Sink-side half: reconstructs the series from received messages and its
/// predictor clone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkState {
    predictor: PredictorState,
}

impl SinkState {
    pub fn new(spec: PredictorSpec) -> Result<Self> {
        Ok(Self {
            predictor: PredictorState::new(spec)?,
        })
    }

    pub fn predictor(&self) -> &PredictorState {
        &self.predictor
    }

    /// Consume one epoch: `msg` is present iff the paired node transmitted.
    pub fn sink_step(self, msg: Option<f64>) -> Result<(f64, Self)> {
        let SinkState { predictor } = self;
        match msg {
            Some(value) => {
                let predictor = predictor.observe(value)?;
                Ok((value, SinkState { predictor }))
            }
            None => {
                let needed = predictor.warmup_needed();
                if needed > 0 {
                    return Err(Error::ProtocolDesync { needed });
                }
                let predicted = predictor.predict()?;
                let predictor = predictor.observe(predicted)?;
                Ok((predicted, SinkState { predictor }))
            }
        }
    }
}

/// Complete record of one node's DPS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpsTrace {
    pub node_id: u32,
    pub e_max: f64,
    pub spec: PredictorSpec,
    pub decisions: Vec<Decision>,
    pub actual: Vec<f64>,
    pub reconstructed: Vec<f64>,
    /// Pre-observation prediction per epoch; `None` during warm-up.
    pub predictions: Vec<Option<f64>>,
    pub transmissions: u64,
    pub total: u64,
}

impl DpsTrace {
    pub fn with_node_id(mut self, node_id: u32) -> Self {
        self.node_id = node_id;
        self
    }
}

/// Drive node and sink in lock-step over a series.
pub fn run_dps(series: &[f64], spec: &PredictorSpec, e_max: ErrorMargin) -> Result<DpsTrace> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut node = NodeState::new(spec.clone(), e_max)?;
    let mut sink = SinkState::new(spec.clone())?;

    let mut decisions = Vec::with_capacity(series.len());
    let mut reconstructed = Vec::with_capacity(series.len());
    let mut predictions = Vec::with_capacity(series.len());
    let mut transmissions = 0u64;

    for &actual in series {
        let prediction = if node.predictor.warmup_needed() == 0 {
            Some(node.predictor.predict()?)
        } else {
            None
        };
        let (decision, next_node) = node.node_step(actual)?;
        let (recon, next_sink) = sink.sink_step(decision.transmitted_value())?;
        debug_assert!(
            next_node.predictor.bits_eq(&next_sink.predictor),
            "node and sink predictor states diverged"
        );
        if decision.is_transmit() {
            transmissions += 1;
        }
        predictions.push(prediction);
        decisions.push(decision);
        reconstructed.push(recon);
        node = next_node;
        sink = next_sink;
    }

    Ok(DpsTrace {
        node_id: 0,
        e_max: e_max.value(),
        spec: spec.clone(),
        total: series.len() as u64,
        actual: series.to_vec(),
        decisions,
        reconstructed,
        predictions,
        transmissions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockstepIssue {
    /// Trace arrays or counters are internally inconsistent.
    Shape,
    DecisionMismatch,
    ReconstructionMismatch,
    MarginExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockstepViolation {
    pub epoch: usize,
    pub issue: LockstepIssue,
}

/// Replay a trace from scratch and confirm that it is exactly what the
/// node/sink pair would produce, and that every epoch honors the margin.
/// The first violating epoch is reported.
pub fn verify_lockstep(trace: &DpsTrace) -> std::result::Result<(), LockstepViolation> {
    let shape = LockstepViolation {
        epoch: 0,
        issue: LockstepIssue::Shape,
    };
    let n = trace.actual.len();
    if trace.decisions.len() != n
        || trace.reconstructed.len() != n
        || trace.total != n as u64
        || trace.transmissions != trace.decisions.iter().filter(|d| d.is_transmit()).count() as u64
    {
        return Err(shape);
    }
    let e_max = ErrorMargin::new(trace.e_max).map_err(|_| shape)?;
    let mut node = NodeState::new(trace.spec.clone(), e_max).map_err(|_| shape)?;
    let mut sink = SinkState::new(trace.spec.clone()).map_err(|_| shape)?;

    for epoch in 0..n {
        let (decision, next_node) = node.node_step(trace.actual[epoch]).map_err(|_| shape)?;
        if decision != trace.decisions[epoch] {
            return Err(LockstepViolation {
                epoch,
                issue: LockstepIssue::DecisionMismatch,
            });
        }
        let (recon, next_sink) = sink
            .sink_step(decision.transmitted_value())
            .map_err(|_| shape)?;
        if recon != trace.reconstructed[epoch] {
            return Err(LockstepViolation {
                epoch,
                issue: LockstepIssue::ReconstructionMismatch,
            });
        }
        let in_margin = match decision {
            Decision::Transmit { .. } => recon == trace.actual[epoch],
            Decision::Suppress { .. } => (trace.actual[epoch] - recon).abs() <= e_max.value(),
        };
        if !in_margin {
            return Err(LockstepViolation {
                epoch,
                issue: LockstepIssue::MarginExceeded,
            });
        }
        node = next_node;
        sink = next_sink;
    }
    Ok(())
}

/// Headline metrics of one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub transmissions: u64,
    pub total: u64,
    /// 100 * (1 - transmissions / total).
    pub reduction_pct: f64,
    /// Mean squared error of the sink's series against the actuals.
    pub mse_reconstruction: f64,
    /// Mean squared one-step prediction error over post-warm-up epochs.
    pub mse_prediction: f64,
}

pub fn trace_metrics(trace: &DpsTrace) -> Metrics {
    trace_metrics_with(trace, true)
}

/// As `trace_metrics`, optionally excluding warm-up epochs from the
/// reduction percentage (warm-up transmissions are unavoidable; excluding
/// them isolates the filter's own suppression power).
pub fn trace_metrics_with(trace: &DpsTrace, include_warmup: bool) -> Metrics {
    let total = trace.total;
    let reduction_pct = if include_warmup {
        if total == 0 {
            0.0
        } else {
            100.0 * (1.0 - trace.transmissions as f64 / total as f64)
        }
    } else {
        let warmup = trace
            .decisions
            .iter()
            .filter(|d| {
                matches!(
                    d,
                    Decision::Transmit {
                        reason: TransmitReason::Warmup,
                        ..
                    }
                )
            })
            .count() as u64;
        let considered = total - warmup;
        if considered == 0 {
            0.0
        } else {
            let margin_tx = trace.transmissions - warmup;
            100.0 * (1.0 - margin_tx as f64 / considered as f64)
        }
    };

    let mse_reconstruction = if trace.actual.is_empty() {
        0.0
    } else {
        let sum: f64 = trace
            .actual
            .iter()
            .zip(&trace.reconstructed)
            .map(|(a, r)| (r - a) * (r - a))
            .sum();
        sum / trace.actual.len() as f64
    };

    let mut pred_sum = 0.0;
    let mut pred_count = 0usize;
    for (prediction, actual) in trace.predictions.iter().zip(&trace.actual) {
        if let Some(p) = prediction {
            pred_sum += (p - actual) * (p - actual);
            pred_count += 1;
        }
    }
    let mse_prediction = if pred_count == 0 {
        0.0
    } else {
        pred_sum / pred_count as f64
    };

    Metrics {
        transmissions: trace.transmissions,
        total,
        reduction_pct,
        mse_reconstruction,
        mse_prediction,
    }
}
