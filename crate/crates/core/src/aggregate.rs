//! In-network processing at cluster heads.
//!
//! Two-stage pipeline per cluster: members run DPS toward their head, the
//! head summarizes the reconstructed member values (its own readings enter
//! directly — no radio is involved) and runs a second DPS instance on the
//! aggregate stream toward the sink. Member transmissions cost one hop
//! each; only the aggregate stream continues upward.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::PredictorSpec;
use crate::protocol::{run_dps, DpsTrace, ErrorMargin};
use crate::topology::{ClusterPlan, MessageCount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregateFn {
    Average,
    Minimum,
    Maximum,
}

/// Summarize a non-empty set of finite values.
pub fn aggregate(values: &[f64], f: AggregateFn) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    Ok(match f {
        AggregateFn::Average => values.iter().sum::<f64>() / values.len() as f64,
        AggregateFn::Minimum => values.iter().copied().fold(f64::INFINITY, f64::min),
        AggregateFn::Maximum => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Outcome of the pipeline for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    pub head: u32,
    pub members: Vec<u32>,
    /// One hop per member transmission toward the head; the head's own
    /// stream costs nothing.
    pub member_msgs: u64,
    /// Transmissions of the aggregate stream (= epoch count when stage-2
    /// DPS is disabled).
    pub head_to_sink_msgs: u64,
    /// No-aggregation relay baseline: T * (2 * (N - 1) + 1).
    pub baseline_msgs: u64,
    pub reduction_pct: f64,
    /// Stage-2 trace over the aggregate stream; absent when stage-2 DPS is
    /// disabled.
    pub aggregate_trace: Option<DpsTrace>,
    /// What the sink believes the aggregate is, per epoch.
    pub sink_aggregate: Vec<f64>,
    /// The summarization applied to the TRUE member values, per epoch.
    pub true_aggregate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub clusters: Vec<ClusterOutcome>,
    pub totals: MessageCount,
}

/// Run the two-stage pipeline over every cluster in the plan.
///
/// `series` must hold one equal-length series per plan member. With
/// `stage2_dps` off the head forwards the aggregate every epoch, which
/// isolates the effect of summarization alone.
pub fn run_cluster_pipeline(
    plan: &ClusterPlan,
    series: &BTreeMap<u32, Vec<f64>>,
    spec: &PredictorSpec,
    e_max: ErrorMargin,
    f: AggregateFn,
    stage2_dps: bool,
) -> Result<PipelineResult> {
    plan.validate(None)?;
    let mut length: Option<usize> = None;
    for node_id in plan.node_ids() {
        let s = series
            .get(&node_id)
            .ok_or(Error::MissingNode { node_id })?;
        match length {
            None => length = Some(s.len()),
            Some(expected) if s.len() != expected => {
                return Err(Error::SeriesLengthMismatch {
                    node_id,
                    len: s.len(),
                    expected,
                });
            }
            _ => {}
        }
    }
    let t = length.ok_or(Error::EmptySeries)?;
    if t == 0 {
        return Err(Error::EmptySeries);
    }

    let mut clusters = Vec::with_capacity(plan.clusters.len());
    let mut total_baseline = 0u64;
    let mut total_dps = 0u64;
    for cluster in &plan.clusters {
        let outcome = run_one_cluster(cluster.head, &cluster.members, series, spec, e_max, f, stage2_dps, t)?;
        total_baseline += outcome.baseline_msgs;
        total_dps += outcome.member_msgs + outcome.head_to_sink_msgs;
        clusters.push(outcome);
    }
    Ok(PipelineResult {
        clusters,
        totals: MessageCount::from_counts(total_baseline, total_dps),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one_cluster(
    head: u32,
    members: &[u32],
    series: &BTreeMap<u32, Vec<f64>>,
    spec: &PredictorSpec,
    e_max: ErrorMargin,
    f: AggregateFn,
    stage2_dps: bool,
    t: usize,
) -> Result<ClusterOutcome> {
    // Stage 1: non-head members toward the head.
    let mut member_msgs = 0u64;
    let mut known: Vec<(u32, Vec<f64>)> = Vec::with_capacity(members.len());
    for &m in members {
        if m == head {
            known.push((m, series[&m].clone()));
        } else {
            let trace = run_dps(&series[&m], spec, e_max)?;
            member_msgs += trace.transmissions;
            known.push((m, trace.reconstructed));
        }
    }

    // Stage 2: summarize what the head knows, epoch by epoch.
    let mut agg_input = Vec::with_capacity(t);
    let mut true_agg = Vec::with_capacity(t);
    let mut buf = Vec::with_capacity(members.len());
    for epoch in 0..t {
        buf.clear();
        for (_, values) in &known {
            buf.push(values[epoch]);
        }
        agg_input.push(aggregate(&buf, f)?);
        buf.clear();
        for &m in members {
            buf.push(series[&m][epoch]);
        }
        true_agg.push(aggregate(&buf, f)?);
    }

    let n = members.len() as u64;
    let baseline_msgs = t as u64 * (2 * (n - 1) + 1);
    let (head_to_sink_msgs, aggregate_trace, sink_aggregate) = if stage2_dps {
        let trace = run_dps(&agg_input, spec, e_max)?.with_node_id(head);
        (
            trace.transmissions,
            Some(trace.clone()),
            trace.reconstructed,
        )
    } else {
        (t as u64, None, agg_input.clone())
    };
    let dps_msgs = member_msgs + head_to_sink_msgs;
    let count = MessageCount::from_counts(baseline_msgs, dps_msgs);
    Ok(ClusterOutcome {
        head,
        members: members.to_vec(),
        member_msgs,
        head_to_sink_msgs,
        baseline_msgs,
        reduction_pct: count.reduction_pct,
        aggregate_trace,
        sink_aggregate,
        true_aggregate: true_agg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{cluster_manual, ClusterAssignment};

    fn margin(v: f64) -> ErrorMargin {
        ErrorMargin::new(v).unwrap()
    }

    #[test]
    fn aggregate_basics() {
        assert_eq!(aggregate(&[1.0, 2.0, 3.0], AggregateFn::Average).unwrap(), 2.0);
        assert_eq!(aggregate(&[1.0, 2.0, 3.0], AggregateFn::Minimum).unwrap(), 1.0);
        assert_eq!(aggregate(&[1.0, 2.0, 3.0], AggregateFn::Maximum).unwrap(), 3.0);
        for f in [AggregateFn::Average, AggregateFn::Minimum, AggregateFn::Maximum] {
            assert_eq!(aggregate(&[7.25], f).unwrap(), 7.25);
        }
        assert!(matches!(
            aggregate(&[], AggregateFn::Average),
            Err(Error::EmptyAggregate)
        ));
    }

    #[test]
    fn aggregate_stays_within_input_range() {
        let values = [19.5, 20.0, 22.5, 21.0];
        for f in [AggregateFn::Average, AggregateFn::Minimum, AggregateFn::Maximum] {
            let a = aggregate(&values, f).unwrap();
            assert!(a >= 19.5 && a <= 22.5);
        }
    }

    fn plan_of(head: u32, members: &[u32]) -> ClusterPlan {
        cluster_manual(&[ClusterAssignment {
            head: Some(head),
            members: members.to_vec(),
        }])
        .unwrap()
    }

    #[test]
    fn constant_members_cost_warmups_only() {
        let members = [1u32, 2, 3, 4];
        let plan = plan_of(1, &members);
        let series: BTreeMap<u32, Vec<f64>> = members
            .iter()
            .map(|&id| (id, vec![20.0 + id as f64; 50]))
            .collect();
        let result = run_cluster_pipeline(
            &plan,
            &series,
            &PredictorSpec::ma(2),
            margin(0.5),
            AggregateFn::Average,
            true,
        )
        .unwrap();
        let c = &result.clusters[0];
        // Three non-head members, two warm-up transmissions each.
        assert_eq!(c.member_msgs, 2 * 3);
        assert_eq!(c.head_to_sink_msgs, 2);
        assert_eq!(c.baseline_msgs, 50 * (2 * 3 + 1));
    }

    #[test]
    fn singleton_cluster_aggregates_its_own_stream() {
        let plan = plan_of(9, &[9]);
        let values = vec![20.0, 20.0, 25.0, 25.0, 25.0];
        let series: BTreeMap<u32, Vec<f64>> = [(9u32, values.clone())].into();
        let result = run_cluster_pipeline(
            &plan,
            &series,
            &PredictorSpec::ma(2),
            margin(0.5),
            AggregateFn::Average,
            true,
        )
        .unwrap();
        let c = &result.clusters[0];
        // Averaging a single stream is the identity, so the stage-2 trace is
        // exactly the DPS trace of the head's own series.
        assert_eq!(c.member_msgs, 0);
        assert_eq!(c.true_aggregate, values);
        let direct = run_dps(&values, &PredictorSpec::ma(2), margin(0.5)).unwrap();
        assert_eq!(c.sink_aggregate, direct.reconstructed);
        assert_eq!(c.head_to_sink_msgs, direct.transmissions);
    }

    #[test]
    fn sink_aggregate_error_is_bounded_by_twice_the_margin() {
        let members = [1u32, 2, 3];
        let plan = plan_of(1, &members);
        let mut series = BTreeMap::new();
        for (i, &id) in members.iter().enumerate() {
            let s = crate::dataset::synth(&crate::dataset::SynthSpec::random_walk(
                id,
                20.0 + i as f64,
                0.3,
                120,
                40 + i as u64,
            ))
            .unwrap();
            series.insert(id, s.temperatures());
        }
        let e = 0.5;
        for f in [AggregateFn::Average, AggregateFn::Minimum, AggregateFn::Maximum] {
            let result = run_cluster_pipeline(
                &plan,
                &series,
                &PredictorSpec::ma(2),
                margin(e),
                f,
                true,
            )
            .unwrap();
            let c = &result.clusters[0];
            for (s, t) in c.sink_aggregate.iter().zip(&c.true_aggregate) {
                assert!(
                    (s - t).abs() <= 2.0 * e + 1e-12,
                    "sink aggregate {s} strays from true {t}"
                );
            }
        }
    }

    #[test]
    fn stage2_toggle_sends_every_epoch() {
        let plan = plan_of(1, &[1, 2]);
        let series: BTreeMap<u32, Vec<f64>> =
            [(1u32, vec![20.0; 30]), (2u32, vec![21.0; 30])].into();
        let result = run_cluster_pipeline(
            &plan,
            &series,
            &PredictorSpec::ma(2),
            margin(0.5),
            AggregateFn::Average,
            false,
        )
        .unwrap();
        let c = &result.clusters[0];
        assert_eq!(c.head_to_sink_msgs, 30);
        assert!(c.aggregate_trace.is_none());
        assert_eq!(c.sink_aggregate, c.true_aggregate);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let plan = plan_of(1, &[1, 2]);
        let series: BTreeMap<u32, Vec<f64>> =
            [(1u32, vec![20.0; 30]), (2u32, vec![21.0; 29])].into();
        let err = run_cluster_pipeline(
            &plan,
            &series,
            &PredictorSpec::ma(2),
            margin(0.5),
            AggregateFn::Average,
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SeriesLengthMismatch { node_id: 2, .. }));
    }
}
