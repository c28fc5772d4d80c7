//! Deterministic synthetic lab trace in the readings-file layout.
//!
//! The public deployment trace is tens of megabytes and not always on
//! disk, so tests and demos can generate a stand-in with the same shape:
//! 54 motes sampling every 31 seconds, slow indoor dynamics (a daily
//! cycle, wandering baseline, occasional heating/door events, measurement
//! noise), plus the trace's characteristic defects — dying-battery
//! readings above 100 °C, duplicated epochs and missing samples.
//! Everything is a pure function of the config, so file digests are
//! reproducible anywhere.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;

pub const SAMPLE_INTERVAL_SECS: i64 = 31;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureConfig {
    pub nodes: u32,
    pub epochs: usize,
    pub seed: u64,
    /// Emit battery artifacts, duplicate epochs and gaps.
    pub defects: bool,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            nodes: 54,
            epochs: 5200,
            seed: 7,
            defects: true,
        }
    }
}

fn start_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2004, 2, 28)
        .expect("valid date")
        .and_hms_opt(0, 58, 46)
        .expect("valid time")
}

fn node_rng(seed: u64, node: u32, stream: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((node as u64) << 8)
        .wrapping_add(stream);
    ChaCha8Rng::seed_from_u64(mixed)
}

struct NodeLine {
    epoch: u64,
    temperature: f64,
    humidity: f64,
    light: f64,
    voltage: f64,
    duplicate: bool,
}

fn node_lines(cfg: &FixtureConfig, node: u32) -> Vec<NodeLine> {
    let mut dyn_rng = node_rng(cfg.seed, node, 1);
    let mut defect_rng = node_rng(cfg.seed, node, 2);
    let wander = Normal::new(0.0, 0.012).unwrap();
    let noise = Normal::new(0.0, 0.03).unwrap();

    let base = 17.0 + (node % 9) as f64 * 0.45;
    let amplitude = 1.2 + dyn_rng.random::<f64>() * 0.6;
    let phase = dyn_rng.random::<f64>() * std::f64::consts::TAU;
    let day = 86_400.0;

    let mut baseline = 0.0_f64;
    let mut event = 0.0_f64;
    let mut lines = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        baseline = 0.995 * baseline + wander.sample(&mut dyn_rng);
        event *= 0.985;
        if dyn_rng.random::<f64>() < 1.0 / 1500.0 {
            let sign = if dyn_rng.random::<bool>() { 1.0 } else { -1.0 };
            event += sign * (0.6 + dyn_rng.random::<f64>() * 1.2);
        }
        let seconds = epoch as f64 * SAMPLE_INTERVAL_SECS as f64;
        let diurnal = amplitude * (std::f64::consts::TAU * seconds / day + phase).sin();
        let temperature = base + diurnal + baseline + event + noise.sample(&mut dyn_rng);

        let humidity = 38.0 + 4.0 * (std::f64::consts::TAU * seconds / day + phase * 0.5).cos()
            - baseline * 2.0;
        let light = if diurnal > 0.0 { 45.0 + diurnal * 30.0 } else { 2.0 };
        let voltage = 2.69 - epoch as f64 * 1.0e-6;

        if cfg.defects && defect_rng.random::<f64>() < 0.012 {
            continue; // missing sample
        }
        let temperature = if cfg.defects && defect_rng.random::<f64>() < 0.002 {
            122.153 // dying battery
        } else {
            temperature
        };
        let duplicate = cfg.defects && defect_rng.random::<f64>() < 0.004;
        lines.push(NodeLine {
            epoch: epoch as u64,
            temperature,
            humidity,
            light,
            voltage,
            duplicate,
        });
    }
    lines
}

/// Render the whole trace, ordered by epoch then mote id, in the
/// 8-field readings layout.
pub fn readings_text(cfg: &FixtureConfig) -> String {
    let start = start_time();
    let per_node: Vec<Vec<NodeLine>> = (1..=cfg.nodes)
        .map(|node| node_lines(cfg, node))
        .collect();
    let mut cursors = vec![0usize; cfg.nodes as usize];
    let mut out = String::new();
    for epoch in 0..cfg.epochs as u64 {
        for node in 1..=cfg.nodes {
            let idx = (node - 1) as usize;
            let lines = &per_node[idx];
            let cursor = &mut cursors[idx];
            if *cursor >= lines.len() || lines[*cursor].epoch != epoch {
                continue;
            }
            let line = &lines[*cursor];
            *cursor += 1;
            let ts = start
                + Duration::seconds(epoch as i64 * SAMPLE_INTERVAL_SECS)
                + Duration::microseconds((node as i64 * 137_000) % 1_000_000);
            let stamp = ts.format("%Y-%m-%d %H:%M:%S%.6f");
            let emit = |out: &mut String, temp: f64| {
                writeln!(
                    out,
                    "{stamp} {epoch} {node} {temp:.4} {hum:.4} {light:.2} {volt:.5}",
                    hum = line.humidity,
                    light = line.light,
                    volt = line.voltage,
                )
                .expect("writing to a String cannot fail");
            };
            emit(&mut out, line.temperature);
            if line.duplicate {
                emit(&mut out, line.temperature + 0.01);
            }
        }
    }
    out
}

/// Render a positions file (`node_id x y`) with a deterministic lab-floor
/// layout: motes along the walls of a 40 m x 30 m room.
pub fn locations_text(nodes: u32, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c6f_6373);
    let mut out = String::new();
    for node in 1..=nodes {
        let around = (node - 1) as f64 / nodes as f64;
        let (x, y) = if around < 0.5 {
            (2.0 + around * 2.0 * 36.0, 3.0 + (node % 2) as f64 * 7.0)
        } else {
            (2.0 + (around - 0.5) * 2.0 * 36.0, 20.0 + (node % 2) as f64 * 7.0)
        };
        let jx = rng.random::<f64>() * 1.6 - 0.8;
        let jy = rng.random::<f64>() * 1.6 - 0.8;
        writeln!(out, "{node} {:.2} {:.2}", x + jx, y + jy).expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{clean, parse_readings, Bounds};
    use std::io::Cursor;

    #[test]
    fn fixture_is_deterministic() {
        let cfg = FixtureConfig {
            nodes: 3,
            epochs: 200,
            seed: 11,
            defects: true,
        };
        assert_eq!(readings_text(&cfg), readings_text(&cfg));
        assert_eq!(locations_text(3, 11), locations_text(3, 11));
    }

    #[test]
    fn fixture_parses_cleanly() {
        let cfg = FixtureConfig {
            nodes: 4,
            epochs: 400,
            seed: 5,
            defects: true,
        };
        let text = readings_text(&cfg);
        let parsed = parse_readings(Cursor::new(text)).unwrap();
        assert!(parsed.rejects.is_empty(), "rejects: {:?}", parsed.rejects);
        let (series, report) = clean(&parsed.readings, Bounds::default());
        assert_eq!(series.len(), 4);
        // Defects exist and get cleaned away.
        let dropped: usize = report
            .per_node
            .values()
            .map(|d| d.out_of_bounds + d.duplicates)
            .sum();
        assert!(dropped > 0);
        for s in series.values() {
            assert!(s.len() > 350);
            for pair in s.points.windows(2) {
                assert!(pair[0].0 < pair[1].0);
            }
        }
    }

    #[test]
    fn temperatures_look_like_a_heated_room() {
        let cfg = FixtureConfig {
            nodes: 2,
            epochs: 3000,
            seed: 9,
            defects: false,
        };
        let parsed = parse_readings(Cursor::new(readings_text(&cfg))).unwrap();
        let (series, _) = clean(&parsed.readings, Bounds::default());
        for s in series.values() {
            let temps = s.temperatures();
            let mean = temps.iter().sum::<f64>() / temps.len() as f64;
            assert!((10.0..30.0).contains(&mean), "mean {mean}");
            // Consecutive deltas stay small: indoor temperature is slow.
            let big_jumps = temps
                .windows(2)
                .filter(|w| (w[1] - w[0]).abs() > 1.0)
                .count();
            assert!(big_jumps < temps.len() / 100);
        }
    }
}
