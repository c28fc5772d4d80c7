//! Trace ingestion and synthetic series generation.
//!
//! The readings parser accepts the layout of the public Intel Lab trace:
//! whitespace-separated lines of `date time epoch moteid temperature
//! humidity light voltage`. Nothing in the input can make it fail; bad
//! lines become reject records. Cleaning sorts each node's readings by
//! epoch, keeps the first of duplicate epochs and drops temperatures
//! outside a plausibility band (the raw trace contains dying-battery
//! readings above 100 °C).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MIN_MOTE_ID: u32 = 1;
pub const MAX_MOTE_ID: u32 = 54;

/// One timestamped temperature sample from one mote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub node_id: u32,
    pub epoch: u64,
    pub timestamp: NaiveDateTime,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedReadings {
    pub readings: Vec<Reading>,
    pub rejects: Vec<Reject>,
    pub lines: usize,
}

/// Parse a readings stream. Total over arbitrary bytes: every line is
/// either accepted or rejected with a reason, and I/O is the only error.
pub fn parse_readings<R: BufRead>(mut input: R) -> Result<ParsedReadings> {
    let mut out = ParsedReadings::default();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = input.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        out.lines += 1;
        let line_no = out.lines;
        let text = String::from_utf8_lossy(&buf);
        let trimmed = text.trim_end_matches(['\n', '\r']);
        if trimmed.trim().is_empty() {
            out.rejects.push(Reject {
                line: line_no,
                reason: "empty line".into(),
            });
            continue;
        }
        match parse_line(trimmed) {
            Ok(reading) => out.readings.push(reading),
            Err(reason) => out.rejects.push(Reject {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(out)
}

fn parse_line(line: &str) -> std::result::Result<Reading, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
        .map_err(|e| format!("bad date `{}`: {e}", fields[0]))?;
    let time = NaiveTime::parse_from_str(fields[1], "%H:%M:%S%.f")
        .map_err(|e| format!("bad time `{}`: {e}", fields[1]))?;
    let epoch: u64 = fields[2]
        .parse()
        .map_err(|_| format!("bad epoch `{}`", fields[2]))?;
    let node_id: u32 = fields[3]
        .parse()
        .map_err(|_| format!("bad moteid `{}`", fields[3]))?;
    if !(MIN_MOTE_ID..=MAX_MOTE_ID).contains(&node_id) {
        return Err(format!(
            "moteid {node_id} outside [{MIN_MOTE_ID}, {MAX_MOTE_ID}]"
        ));
    }
    let temperature: f64 = fields[4]
        .parse()
        .map_err(|_| format!("bad temperature `{}`", fields[4]))?;
    if !temperature.is_finite() {
        return Err(format!("non-finite temperature `{}`", fields[4]));
    }
    // Humidity, light and voltage are validated and discarded.
    for (name, raw) in [
        ("humidity", fields[5]),
        ("light", fields[6]),
        ("voltage", fields[7]),
    ] {
        raw.parse::<f64>()
            .map_err(|_| format!("bad {name} `{raw}`"))?;
    }
    Ok(Reading {
        node_id,
        epoch,
        timestamp: date.and_time(time),
        temperature,
    })
}

/// Open a readings file, transparently inflating gzip.
pub fn read_readings_file(path: &Path) -> Result<ParsedReadings> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let got = file.read(&mut magic)?;
    let file = File::open(path)?;
    if got == 2 && magic == [0x1f, 0x8b] {
        parse_readings(BufReader::new(flate2::read::GzDecoder::new(file)))
    } else {
        parse_readings(BufReader::new(file))
    }
}

/// Per-node series of (epoch, temperature), strictly increasing in epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSeries {
    pub node_id: u32,
    pub points: Vec<(u64, f64)>,
}

impl NodeSeries {
    pub fn temperatures(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, t)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Plausibility band applied while cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            t_min: -10.0,
            t_max: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDrops {
    pub out_of_bounds: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub per_node: BTreeMap<u32, NodeDrops>,
    pub kept: usize,
}

/// Group readings per node, order them by epoch, and drop implausible
/// temperatures and duplicate epochs (first occurrence wins).
pub fn clean(readings: &[Reading], bounds: Bounds) -> (BTreeMap<u32, NodeSeries>, CleanReport) {
    let mut grouped: BTreeMap<u32, Vec<(u64, f64)>> = BTreeMap::new();
    let mut report = CleanReport::default();
    for r in readings {
        if r.temperature < bounds.t_min || r.temperature > bounds.t_max || !r.temperature.is_finite()
        {
            report.per_node.entry(r.node_id).or_default().out_of_bounds += 1;
            continue;
        }
        grouped
            .entry(r.node_id)
            .or_default()
            .push((r.epoch, r.temperature));
    }
    let mut series = BTreeMap::new();
    for (node_id, mut points) in grouped {
        // Stable sort keeps input order among equal epochs, so dedup
        // retains the first occurrence.
        points.sort_by_key(|&(epoch, _)| epoch);
        let before = points.len();
        points.dedup_by_key(|&mut (epoch, _)| epoch);
        let dropped = before - points.len();
        if dropped > 0 {
            report.per_node.entry(node_id).or_default().duplicates += dropped;
        }
        report.kept += points.len();
        series.insert(node_id, NodeSeries { node_id, points });
    }
    (series, report)
}

/// SHA-256 over the exact bit patterns of a cleaned (and possibly sliced)
/// series map; pins a dataset slice for reproducibility checks.
pub fn slice_digest(series: &BTreeMap<u32, NodeSeries>) -> String {
    let mut hasher = Sha256::new();
    for (node_id, s) in series {
        hasher.update(node_id.to_le_bytes());
        for &(epoch, temp) in &s.points {
            hasher.update(epoch.to_le_bytes());
            hasher.update(temp.to_bits().to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthKind {
    Constant,
    Ramp,
    SineNoise,
    RandomWalk,
}

/// Seeded synthetic series description. Unused parameters are ignored by
/// the generator for the chosen kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default = "default_node_id")]
    pub node_id: u32,
    pub kind: SynthKind,
    pub length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_step_sd")]
    pub step_sd: f64,
}

fn default_node_id() -> u32 {
    1
}
fn default_level() -> f64 {
    20.0
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_period() -> f64 {
    100.0
}
fn default_step_sd() -> f64 {
    0.05
}

impl SynthSpec {
    pub fn constant(node_id: u32, level: f64, length: usize) -> Self {
        Self {
            node_id,
            kind: SynthKind::Constant,
            length,
            seed: 0,
            level,
            slope: 0.0,
            amplitude: default_amplitude(),
            period: default_period(),
            noise_sd: 0.0,
            step_sd: default_step_sd(),
        }
    }

    pub fn random_walk(node_id: u32, level: f64, step_sd: f64, length: usize, seed: u64) -> Self {
        Self {
            node_id,
            kind: SynthKind::RandomWalk,
            length,
            seed,
            level,
            slope: 0.0,
            amplitude: default_amplitude(),
            period: default_period(),
            noise_sd: 0.0,
            step_sd,
        }
    }

    pub fn sine_noise(
        node_id: u32,
        level: f64,
        amplitude: f64,
        period: f64,
        noise_sd: f64,
        length: usize,
        seed: u64,
    ) -> Self {
        Self {
            node_id,
            kind: SynthKind::SineNoise,
            length,
            seed,
            level,
            slope: 0.0,
            amplitude,
            period,
            noise_sd,
            step_sd: default_step_sd(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 1 {
            return Err(Error::InvalidSynth {
                field: "length",
                message: "must be at least 1".into(),
            });
        }
        for (field, value) in [
            ("level", self.level),
            ("slope", self.slope),
            ("amplitude", self.amplitude),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidSynth {
                    field,
                    message: format!("must be finite, got {value}"),
                });
            }
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidSynth {
                field: "period",
                message: format!("must be positive, got {}", self.period),
            });
        }
        for (field, value) in [("noise_sd", self.noise_sd), ("step_sd", self.step_sd)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidSynth {
                    field,
                    message: format!("must be non-negative, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Generate a deterministic series; identical spec, identical output.
pub fn synth(spec: &SynthSpec) -> Result<NodeSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(spec.length);
    match spec.kind {
        SynthKind::Constant => {
            for _ in 0..spec.length {
                values.push(spec.level);
            }
        }
        SynthKind::Ramp => {
            for i in 0..spec.length {
                values.push(spec.level + spec.slope * i as f64);
            }
        }
        SynthKind::SineNoise => {
            let noise = gaussian(spec.noise_sd);
            for i in 0..spec.length {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / spec.period;
                let mut v = spec.level + spec.amplitude * phase.sin();
                if let Some(dist) = &noise {
                    v += dist.sample(&mut rng);
                }
                values.push(v);
            }
        }
        SynthKind::RandomWalk => {
            let step = gaussian(spec.step_sd);
            let mut current = spec.level;
            for _ in 0..spec.length {
                values.push(current);
                if let Some(dist) = &step {
                    current += dist.sample(&mut rng);
                }
            }
        }
    }
    Ok(NodeSeries {
        node_id: spec.node_id,
        points: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i as u64, v))
            .collect(),
    })
}

fn gaussian(sd: f64) -> Option<Normal<f64>> {
    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("validated standard deviation"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const GOOD_LINE: &str = "2004-02-28 00:59:16.02785 3 1 19.3024 38.4629 45.08 2.68742";

    #[test]
    fn parses_a_well_formed_line() {
        let parsed = parse_readings(Cursor::new(GOOD_LINE)).unwrap();
        assert_eq!(parsed.rejects.len(), 0);
        let r = &parsed.readings[0];
        assert_eq!(r.node_id, 1);
        assert_eq!(r.epoch, 3);
        assert_eq!(r.temperature, 19.3024);
        assert_eq!(
            r.timestamp,
            NaiveDate::from_ymd_opt(2004, 2, 28)
                .unwrap()
                .and_hms_micro_opt(0, 59, 16, 27850)
                .unwrap()
        );
    }

    #[test]
    fn wrong_field_count_is_rejected() {
        let parsed =
            parse_readings(Cursor::new("2004-02-28 00:59:16.02785 3 1 19.3024 38.4629")).unwrap();
        assert!(parsed.readings.is_empty());
        assert_eq!(parsed.rejects[0].line, 1);
        assert!(parsed.rejects[0].reason.contains("8 fields"));
    }

    #[test]
    fn out_of_range_moteid_is_rejected() {
        for bad in ["0", "55"] {
            let line = format!("2004-02-28 00:59:16.02785 3 {bad} 19.3024 38.4629 45.08 2.68742");
            let parsed = parse_readings(Cursor::new(line)).unwrap();
            assert!(parsed.readings.is_empty());
            assert!(parsed.rejects[0].reason.contains("moteid"));
        }
    }

    #[test]
    fn accepted_plus_rejected_covers_every_line() {
        let text = format!("{GOOD_LINE}\nnot a reading\n\n{GOOD_LINE}\nx y z\n");
        let parsed = parse_readings(Cursor::new(text)).unwrap();
        assert_eq!(parsed.lines, 5);
        assert_eq!(parsed.readings.len() + parsed.rejects.len(), 5);
    }

    #[test]
    fn parser_survives_arbitrary_bytes() {
        let garbage: Vec<u8> = vec![0xff, 0xfe, b'\n', 0x80, b' ', 0xc3, b'\n', b'\n'];
        let parsed = parse_readings(Cursor::new(garbage)).unwrap();
        assert_eq!(parsed.readings.len(), 0);
        assert_eq!(parsed.rejects.len(), parsed.lines);
    }

    fn reading(node_id: u32, epoch: u64, temperature: f64) -> Reading {
        Reading {
            node_id,
            epoch,
            timestamp: NaiveDate::from_ymd_opt(2004, 2, 28)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            temperature,
        }
    }

    #[test]
    fn clean_keeps_first_duplicate_epoch() {
        let readings = vec![reading(1, 7, 20.1), reading(1, 7, 20.2)];
        let (series, report) = clean(&readings, Bounds::default());
        assert_eq!(series[&1].points, vec![(7, 20.1)]);
        assert_eq!(report.per_node[&1].duplicates, 1);
    }

    #[test]
    fn clean_drops_battery_artifacts() {
        let readings = vec![reading(1, 1, 19.5), reading(1, 2, 122.15)];
        let (series, report) = clean(&readings, Bounds::default());
        assert_eq!(series[&1].points, vec![(1, 19.5)]);
        assert_eq!(report.per_node[&1].out_of_bounds, 1);
    }

    #[test]
    fn clean_sorts_by_epoch() {
        let readings = vec![reading(1, 9, 21.0), reading(1, 3, 20.0), reading(1, 5, 20.5)];
        let (series, _) = clean(&readings, Bounds::default());
        assert_eq!(series[&1].points, vec![(3, 20.0), (5, 20.5), (9, 21.0)]);
    }

    #[test]
    fn clean_is_idempotent() {
        let readings = vec![
            reading(2, 4, 18.0),
            reading(2, 4, 18.5),
            reading(2, 1, 17.0),
            reading(2, 8, 60.0),
            reading(3, 0, 22.0),
        ];
        let (first, _) = clean(&readings, Bounds::default());
        let again: Vec<Reading> = first
            .values()
            .flat_map(|s| s.points.iter().map(|&(e, t)| reading(s.node_id, e, t)))
            .collect();
        let (second, report) = clean(&again, Bounds::default());
        assert_eq!(first, second);
        assert_eq!(
            report.per_node.values().map(|d| d.duplicates).sum::<usize>(),
            0
        );
        assert_eq!(
            report
                .per_node
                .values()
                .map(|d| d.out_of_bounds)
                .sum::<usize>(),
            0
        );
    }

    #[test]
    fn synth_constant_and_ramp_are_definitional() {
        let c = synth(&SynthSpec::constant(1, 21.0, 5)).unwrap();
        assert_eq!(c.temperatures(), vec![21.0; 5]);

        let ramp = synth(&SynthSpec {
            kind: SynthKind::Ramp,
            slope: 1.0,
            level: 0.0,
            ..SynthSpec::constant(1, 0.0, 4)
        })
        .unwrap();
        assert_eq!(ramp.temperatures(), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn synth_is_seed_deterministic() {
        let spec = SynthSpec::random_walk(4, 20.0, 0.5, 64, 1234);
        assert_eq!(synth(&spec).unwrap(), synth(&spec).unwrap());

        let other = SynthSpec {
            seed: 1235,
            ..spec
        };
        assert_ne!(synth(&spec).unwrap(), synth(&other).unwrap());
    }

    #[test]
    fn synth_rejects_bad_parameters() {
        let mut spec = SynthSpec::constant(1, 20.0, 0);
        assert!(matches!(
            synth(&spec),
            Err(Error::InvalidSynth { field: "length", .. })
        ));
        spec.length = 4;
        spec.noise_sd = -1.0;
        assert!(matches!(
            synth(&spec),
            Err(Error::InvalidSynth {
                field: "noise_sd",
                ..
            })
        ));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let readings = vec![reading(1, 1, 19.5), reading(2, 1, 20.5)];
        let (series, _) = clean(&readings, Bounds::default());
        let a = slice_digest(&series);
        let b = slice_digest(&series);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);

        let readings2 = vec![reading(1, 1, 19.5), reading(2, 1, 20.500001)];
        let (series2, _) = clean(&readings2, Bounds::default());
        assert_ne!(a, slice_digest(&series2));
    }
}
