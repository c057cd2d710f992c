//! Traffic matrices: the capacity-weighted gravity model, time-varying stress
//! sequences, and the `step,src,dst,volume` CSV format.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ParseError, TmError};
use crate::topology::{NodeId, Topology};

/// Dense `n × n` demand volumes; the diagonal is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    volumes: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(n: usize) -> Self {
        TrafficMatrix { n, volumes: vec![0.0; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, src: NodeId, dst: NodeId) -> f64 {
        self.volumes[src * self.n + dst]
    }

    /// Sets one entry. Panics on diagonal or negative volumes.
    pub fn set(&mut self, src: NodeId, dst: NodeId, volume: f64) {
        assert!(src != dst || volume == 0.0, "diagonal demand must be zero");
        assert!(volume >= 0.0, "negative demand {volume}");
        self.volumes[src * self.n + dst] = volume;
    }

    pub fn total(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TrafficMatrix { n: self.n, volumes: self.volumes.iter().map(|v| v * factor).collect() }
    }

    /// Off-diagonal `(src, dst, volume)` entries in row-major order.
    pub fn demands(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.n).flat_map(move |s| {
            (0..self.n).filter(move |&d| d != s).map(move |d| (s, d, self.get(s, d)))
        })
    }
}

/// Gravity matrix from explicit node weights:
/// `volume(i, j) = total · w(i)·w(j) / Σ_{u≠v} w(u)·w(v)`.
pub fn gravity_from_weights(weights: &[f64], total_volume: f64) -> Result<TrafficMatrix, TmError> {
    if !(total_volume >= 0.0) {
        return Err(TmError::NegativeVolume(total_volume));
    }
    let n = weights.len();
    if n < 2 {
        return Err(TmError::TooSmall);
    }
    let sum: f64 = weights.iter().sum();
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    let norm = sum * sum - sq;
    if !(norm > 0.0) {
        return Err(TmError::ZeroWeights);
    }
    let mut tm = TrafficMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                tm.volumes[i * n + j] = total_volume * weights[i] * weights[j] / norm;
            }
        }
    }
    Ok(tm)
}

/// Node weight = total capacity of incident links, both directions.
pub fn node_weights(t: &Topology) -> Vec<f64> {
    let mut w = vec![0.0; t.node_count()];
    for l in t.links() {
        w[l.src] += l.capacity;
        w[l.dst] += l.capacity;
    }
    w
}

pub fn gravity_matrix(t: &Topology, total_volume: f64) -> Result<TrafficMatrix, TmError> {
    gravity_from_weights(&node_weights(t), total_volume)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Constant,
    Ramp,
    Sinusoid,
}

impl Profile {
    /// Scale factor applied to the base matrix at `step` of `steps`.
    pub fn scale(self, step: usize, steps: usize, peak: f64) -> f64 {
        match self {
            Profile::Constant => peak,
            Profile::Ramp if steps <= 1 => peak,
            Profile::Ramp => 0.1 + (peak - 0.1) * step as f64 / (steps - 1) as f64,
            Profile::Sinusoid => {
                0.55 * peak + 0.45 * peak * (2.0 * PI * step as f64 / steps as f64).sin()
            }
        }
    }
}

pub const DEFAULT_JITTER: (f64, f64) = (0.95, 1.05);

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub profile: Profile,
    pub steps: usize,
    pub peak_scale: f64,
    pub seed: u64,
    /// Multiplicative per-entry jitter bounds; `None` disables jitter.
    pub jitter: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmSequence {
    pub steps: Vec<TrafficMatrix>,
    pub generator: String,
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
}

impl TmSequence {
    /// Index of the step with the largest total volume (first on ties).
    pub fn peak_step(&self) -> usize {
        let mut best = 0;
        for (i, tm) in self.steps.iter().enumerate() {
            if tm.total() > self.steps[best].total() {
                best = i;
            }
        }
        best
    }
}

pub fn make_tm_sequence(base: &TrafficMatrix, spec: &SequenceSpec) -> Result<TmSequence, TmError> {
    if spec.steps == 0 {
        return Err(TmError::InvalidParameter("steps must be at least 1".into()));
    }
    if !(spec.peak_scale > 0.0) {
        return Err(TmError::InvalidParameter(format!("peak_scale must be positive, got {}", spec.peak_scale)));
    }
    if let Some((lo, hi)) = spec.jitter {
        if !(lo > 0.0 && hi >= lo) {
            return Err(TmError::InvalidParameter(format!("jitter bounds ({lo}, {hi})")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = base.size();
    let steps = (0..spec.steps)
        .map(|step| {
            let scale = spec.profile.scale(step, spec.steps, spec.peak_scale);
            let mut tm = base.scaled(scale);
            if let Some((lo, hi)) = spec.jitter {
                for s in 0..n {
                    for d in 0..n {
                        if s != d {
                            let f = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                            tm.volumes[s * n + d] *= f;
                        }
                    }
                }
            }
            tm
        })
        .collect();
    Ok(TmSequence {
        steps,
        generator: "gravity".to_string(),
        seed: Some(spec.seed),
        profile: Some(spec.profile),
    })
}

pub const TM_CSV_HEADER: [&str; 4] = ["step", "src", "dst", "volume"];

/// Writes every off-diagonal entry (zeros included) sorted by `(step, src, dst)`.
pub fn write_tm_csv(seq: &TmSequence) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TM_CSV_HEADER).expect("in-memory write");
    for (step, tm) in seq.steps.iter().enumerate() {
        for (s, d, v) in tm.demands() {
            w.write_record([step.to_string(), s.to_string(), d.to_string(), v.to_string()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Reads the TM CSV format. Rows may come in any order; absent entries are zero.
pub fn read_tm_csv(text: &str) -> Result<TmSequence, ParseError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ParseError::Malformed { format: "tm csv", message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != TM_CSV_HEADER {
        return Err(ParseError::Row { line: 1, message: format!("expected header `{}`", TM_CSV_HEADER.join(",")) });
    }
    let mut rows: Vec<(usize, NodeId, NodeId, f64, usize)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| ParseError::Row { line, message: e.to_string() })?;
        if record.len() != 4 {
            return Err(ParseError::Row { line, message: format!("expected 4 fields, found {}", record.len()) });
        }
        let int = |k: usize| -> Result<usize, ParseError> {
            record[k].parse().map_err(|_| ParseError::Row {
                line,
                message: format!("{} `{}` is not a non-negative integer", TM_CSV_HEADER[k], &record[k]),
            })
        };
        let (step, src, dst) = (int(0)?, int(1)?, int(2)?);
        let volume: f64 = record[3]
            .parse()
            .map_err(|_| ParseError::Row { line, message: format!("volume `{}` is not a number", &record[3]) })?;
        if !(volume >= 0.0) || !volume.is_finite() {
            return Err(ParseError::Row { line, message: format!("negative or invalid volume {volume}") });
        }
        if src == dst && volume > 0.0 {
            return Err(ParseError::Row { line, message: format!("diagonal demand {src}->{dst} must be zero") });
        }
        rows.push((step, src, dst, volume, line));
    }
    let Some(last_step) = rows.iter().map(|r| r.0).max() else {
        return Ok(TmSequence { steps: Vec::new(), generator: "file".into(), seed: None, profile: None });
    };
    let mut dims = vec![0usize; last_step + 1];
    for &(step, s, d, _, _) in &rows {
        dims[step] = dims[step].max(s.max(d) + 1);
    }
    let n = dims[0];
    for (step, &found) in dims.iter().enumerate() {
        if found != n {
            return Err(ParseError::Dimension { step, found, expected: n });
        }
    }
    let mut steps = vec![TrafficMatrix::zeros(n); last_step + 1];
    let mut seen = vec![false; (last_step + 1) * n * n];
    for (step, s, d, v, line) in rows {
        let key = step * n * n + s * n + d;
        if std::mem::replace(&mut seen[key], true) {
            return Err(ParseError::Row { line, message: format!("duplicate entry for step {step} {s}->{d}") });
        }
        steps[step].volumes[s * n + d] = v;
    }
    Ok(TmSequence { steps, generator: "file".into(), seed: None, profile: None })
}
