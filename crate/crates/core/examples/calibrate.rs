// Scratch calibration for the acceptance fixture (deleted before ship).
use std::collections::BTreeMap;
use dps::dataset::{clean, parse_readings, slice_digest, Bounds};
use dps::fixture::{readings_text, FixtureConfig};
use dps::predictor::PredictorSpec;
use dps::protocol::{run_dps, trace_metrics, ErrorMargin};
use dps::aggregate::{run_cluster_pipeline, AggregateFn};
use dps::topology::{cluster_manual, ClusterAssignment};
use sha2::{Digest, Sha256};

fn main() {
    let t0 = std::time::Instant::now();
    let cfg = FixtureConfig::default();
    let text = readings_text(&cfg);
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let file_digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    println!("file bytes: {}  sha256: {}", text.len(), file_digest);

    let parsed = parse_readings(std::io::Cursor::new(text)).unwrap();
    println!("lines {} accepted {} rejects {}", parsed.lines, parsed.readings.len(), parsed.rejects.len());
    let (series, _) = clean(&parsed.readings, Bounds::default());
    let mut min_len = usize::MAX;
    for s in series.values() { min_len = min_len.min(s.len()); }
    println!("nodes: {}  min cleaned len: {}", series.len(), min_len);
    assert!(series.len() == 54 && min_len >= 5000, "not enough data per node");

    let sliced: BTreeMap<u32, Vec<f64>> = series.iter()
        .map(|(&id, s)| (id, s.temperatures()[..5000].to_vec()))
        .collect();
    let sliced_series: BTreeMap<u32, dps::dataset::NodeSeries> = series.iter()
        .map(|(&id, s)| (id, dps::dataset::NodeSeries { node_id: id, points: s.points[..5000].to_vec() }))
        .collect();
    println!("slice digest: {}", slice_digest(&sliced_series));
    println!("[{:?}] ingest done", t0.elapsed());

    let m05 = ErrorMargin::new(0.5).unwrap();
    // Criterion 4: every node >= 90% with some predictor at 0.5.
    let mut worst: (f64, u32) = (100.0, 0);
    for (&id, temps) in &sliced {
        let tr = run_dps(temps, &PredictorSpec::ma(2), m05).unwrap();
        let red = trace_metrics(&tr).reduction_pct;
        if red < worst.0 { worst = (red, id); }
    }
    println!("[crit4] worst MA(2) reduction at 0.5: {:.3}% (node {})", worst.0, worst.1);

    // Criterion 5: Fig9 cluster ordering at 0.5.
    let cluster = [1u32, 33, 34, 35, 36, 37];
    let mut means = Vec::new();
    for spec in [PredictorSpec::ma(2), PredictorSpec::ma(4), PredictorSpec::lms_vss(4), PredictorSpec::lms(4)] {
        let mean: f64 = cluster.iter().map(|id| {
            trace_metrics(&run_dps(&sliced[id], &spec, m05).unwrap()).reduction_pct
        }).sum::<f64>() / 6.0;
        means.push((spec.label(), mean));
    }
    println!("[crit5] order: {:?}", means);
    let gaps: Vec<f64> = means.windows(2).map(|w| w[0].1 - w[1].1).collect();
    println!("[crit5] gaps (want >= 0): {:?}", gaps);

    // Criterion 6: MA transmissions monotone in order for e_max <= 1.5.
    let mut bad6 = 0;
    for i in 1..=15 {
        let e = ErrorMargin::new(i as f64 * 0.1).unwrap();
        let tx = |k: usize| -> f64 {
            cluster.iter().map(|id| run_dps(&sliced[id], &PredictorSpec::ma(k), e).unwrap().transmissions as f64).sum::<f64>() / 6.0
        };
        let (t2, t4, t10) = (tx(2), tx(4), tx(10));
        if !(t10 >= t4 && t4 >= t2) { bad6 += 1; println!("[crit6] VIOLATION at e={}: {} {} {}", i as f64*0.1, t2, t4, t10); }
    }
    println!("[crit6] violations: {bad6}");

    // Criterion 7: saturation per predictor between 1.5 and 5.0.
    for spec in [PredictorSpec::ma(2), PredictorSpec::ma(4), PredictorSpec::ma(10), PredictorSpec::arma(2,2), PredictorSpec::lms(4), PredictorSpec::lms_vss(4)] {
        let red_at = |e: f64| -> f64 {
            cluster.iter().map(|id| trace_metrics(&run_dps(&sliced[id], &spec, ErrorMargin::new(e).unwrap()).unwrap()).reduction_pct).sum::<f64>() / 6.0
        };
        let (r15, r50) = (red_at(1.5), red_at(5.0));
        println!("[crit7] {}: r(1.5)={:.3} r(5.0)={:.3} delta={:.3}", spec.label(), r15, r50, r50 - r15);
    }

    // Criterion 8: aggregation on the cluster.
    let plan = cluster_manual(&[ClusterAssignment { head: Some(1), members: cluster.to_vec() }]).unwrap();
    let sub: BTreeMap<u32, Vec<f64>> = cluster.iter().map(|&id| (id, sliced[&id].clone())).collect();
    let agg = run_cluster_pipeline(&plan, &sub, &PredictorSpec::ma(2), m05, AggregateFn::Average, true).unwrap();
    println!("[crit8] aggregation reduction: {:.3}% (dps {} / baseline {})", agg.totals.reduction_pct, agg.totals.dps_msgs, agg.totals.baseline_msgs);
    println!("total elapsed: {:?}", t0.elapsed());
}
