//! Per-event confidence traces, trace files, and synthetic long-tailed
//! populations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// Scores are clamped into this band after validation so logistic
/// arguments stay finite.
pub const SCORE_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Head,
    Tail,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Head => "head",
            Label::Tail => "tail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTrace {
    scores: Vec<f64>,
    pub label: Label,
    /// Whether the server would classify this event correctly if it were
    /// offloaded. Ignored for head events.
    pub server_correct: bool,
}

impl ConfidenceTrace {
    /// Builds a trace, rejecting scores outside the open unit interval.
    pub fn new(scores: Vec<f64>, label: Label, server_correct: bool) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidArgument("trace needs at least one score".into()));
        }
        for &s in &scores {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::InvalidArgument(format!("score {s} outside (0,1)")));
            }
        }
        Ok(Self::from_valid(scores, label, server_correct))
    }

    fn from_valid(mut scores: Vec<f64>, label: Label, server_correct: bool) -> Self {
        for s in &mut scores {
            *s = s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
        }
        ConfidenceTrace {
            scores,
            label,
            server_correct,
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn n_blocks(&self) -> usize {
        self.scores.len()
    }

    pub fn is_tail(&self) -> bool {
        self.label == Label::Tail
    }
}

/// A fixed set of traces sharing one block count. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePopulation {
    traces: Vec<ConfidenceTrace>,
    n_blocks: usize,
}

impl TracePopulation {
    pub fn new(traces: Vec<ConfidenceTrace>) -> Result<Self> {
        let Some(first) = traces.first() else {
            return Err(Error::InvalidArgument("population needs at least one trace".into()));
        };
        let n_blocks = first.n_blocks();
        if let Some(bad) = traces.iter().position(|t| t.n_blocks() != n_blocks) {
            return Err(Error::InvalidArgument(format!(
                "trace {bad} has {} blocks, expected {n_blocks}",
                traces[bad].n_blocks()
            )));
        }
        Ok(TracePopulation { traces, n_blocks })
    }

    pub fn traces(&self) -> &[ConfidenceTrace] {
        &self.traces
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn n_tail(&self) -> usize {
        self.traces.iter().filter(|t| t.is_tail()).count()
    }

    pub fn n_head(&self) -> usize {
        self.len() - self.n_tail()
    }

    /// Every distinct score value, ascending.
    pub fn distinct_scores(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.traces.iter().flat_map(|t| t.scores.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string(), "server_correct".to_string()];
        header.extend((1..=self.n_blocks).map(|n| format!("c{n}")));
        wr.write_record(&header)?;
        for t in &self.traces {
            let mut row = vec![
                t.label.as_str().to_string(),
                u8::from(t.server_correct).to_string(),
            ];
            // `{}` on f64 prints the shortest string that parses back exactly.
            row.extend(t.scores.iter().map(|s| format!("{s}")));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut records = rd.records();
        let header = match records.next() {
            None => return Err(ParseError::EmptyFile.into()),
            Some(h) => h.map_err(|e| malformed(1, e.to_string()))?,
        };
        let n_blocks = parse_header(&header)?;
        let mut traces = Vec::new();
        for (i, rec) in records.enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            traces.push(parse_row(&rec, line, n_blocks)?);
        }
        if traces.is_empty() {
            return Err(ParseError::EmptyFile.into());
        }
        Ok(TracePopulation { traces, n_blocks })
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    ParseError::MalformedRow {
        line,
        reason: reason.into(),
    }
    .into()
}

fn parse_header(h: &csv::StringRecord) -> Result<usize> {
    if h.len() < 3 || &h[0] != "label" || &h[1] != "server_correct" {
        return Err(malformed(1, "header must be label,server_correct,c1,...,cN"));
    }
    for (i, name) in h.iter().skip(2).enumerate() {
        if name != format!("c{}", i + 1) {
            return Err(malformed(1, format!("unexpected column `{name}`")));
        }
    }
    Ok(h.len() - 2)
}

fn parse_row(rec: &csv::StringRecord, line: usize, n_blocks: usize) -> Result<ConfidenceTrace> {
    if rec.len() < 2 {
        return Err(malformed(line, "missing label or server_correct"));
    }
    let found = rec.len() - 2;
    if found != n_blocks {
        return Err(ParseError::InconsistentBlocks {
            line,
            expected: n_blocks,
            found,
        }
        .into());
    }
    let label = match &rec[0] {
        "head" => Label::Head,
        "tail" => Label::Tail,
        other => return Err(malformed(line, format!("label `{other}` is not head or tail"))),
    };
    let server_correct = match &rec[1] {
        "0" => false,
        "1" => true,
        other => return Err(malformed(line, format!("server_correct `{other}` is not 0 or 1"))),
    };
    let mut scores = Vec::with_capacity(n_blocks);
    for field in rec.iter().skip(2) {
        let value: f64 = field
            .parse()
            .map_err(|_| malformed(line, format!("score `{field}` is not a number")))?;
        if !(value > 0.0 && value < 1.0) {
            return Err(ParseError::ScoreOutOfRange { line, value }.into());
        }
        scores.push(value);
    }
    Ok(ConfidenceTrace::from_valid(scores, label, server_correct))
}

pub fn load_population(path: impl AsRef<Path>) -> Result<TracePopulation> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    TracePopulation::read_csv(BufReader::new(f))
}

/// Tail-class softmax probability from two logits.
pub fn softmax_confidence(f_tail: f64, f_head: f64) -> Result<f64> {
    if !f_tail.is_finite() || !f_head.is_finite() {
        return Err(Error::InvalidArgument("logits must be finite".into()));
    }
    let m = f_tail.max(f_head);
    let a = (f_tail - m).exp();
    let b = (f_head - m).exp();
    Ok(a / (a + b))
}

/// Latent-logit parameters for one class. At block n of N the latent logit
/// is Gaussian with mean `drift * n/N` (signed by class) and standard
/// deviation `base_spread + spread * (n/N)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub drift: f64,
    pub spread: f64,
    pub base_spread: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            drift: 2.5,
            spread: 2.5,
            base_spread: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_events: usize,
    pub n_blocks: usize,
    pub imbalance_ratio: f64,
    pub head: ScoreParams,
    pub tail: ScoreParams,
    pub server_accuracy: f64,
    /// Tail drift is scaled by `min(1, scarcity_reference / R)^scarcity_exponent`,
    /// so rarer tail classes are harder to separate. Exponent 0 disables it.
    pub scarcity_reference: f64,
    pub scarcity_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_events: 1000,
            n_blocks: 4,
            imbalance_ratio: 4.0,
            head: ScoreParams::default(),
            tail: ScoreParams::default(),
            server_accuracy: 0.9,
            scarcity_reference: 4.0,
            scarcity_exponent: 4.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn new(n_events: usize, n_blocks: usize, imbalance_ratio: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_events,
            n_blocks,
            imbalance_ratio,
            seed,
            ..Default::default()
        }
    }

    pub fn n_head(&self) -> usize {
        let r = self.imbalance_ratio;
        let x = self.n_events as f64 * r / (r + 1.0);
        ((x + 0.5).floor() as usize).min(self.n_events)
    }

    fn validate(&self) -> Result<()> {
        if self.n_events < 1 {
            return Err(Error::InvalidArgument("n_events must be at least 1".into()));
        }
        if self.n_blocks < 1 {
            return Err(Error::InvalidArgument("n_blocks must be at least 1".into()));
        }
        if !(self.imbalance_ratio >= 1.0) || !self.imbalance_ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "imbalance ratio {} must be finite and >= 1",
                self.imbalance_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.server_accuracy) {
            return Err(Error::InvalidArgument("server_accuracy must lie in [0,1]".into()));
        }
        for p in [self.head, self.tail] {
            if !(p.spread >= 0.0 && p.base_spread >= 0.0 && p.drift.is_finite()) {
                return Err(Error::InvalidArgument("score parameters must be non-negative".into()));
            }
        }
        if !(self.scarcity_reference > 0.0) || !(self.scarcity_exponent >= 0.0) {
            return Err(Error::InvalidArgument("scarcity parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Draws a population whose class counts follow the imbalance ratio exactly.
/// Event order is shuffled so intervals see a realistic class mix.
pub fn generate_population(spec: &SyntheticSpec) -> Result<TracePopulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_head = spec.n_head();
    let n = spec.n_blocks as f64;
    let scarcity = (spec.scarcity_reference / spec.imbalance_ratio)
        .min(1.0)
        .powf(spec.scarcity_exponent);

    let mut traces = Vec::with_capacity(spec.n_events);
    for m in 0..spec.n_events {
        let label = if m < n_head { Label::Head } else { Label::Tail };
        let (p, sign, scale) = match label {
            Label::Head => (spec.head, -1.0, 1.0),
            Label::Tail => (spec.tail, 1.0, scarcity),
        };
        let scores = (1..=spec.n_blocks)
            .map(|b| {
                let depth = b as f64 / n;
                let mean = sign * scale * p.drift * depth;
                let sd = p.base_spread + p.spread * depth * depth;
                let z: f64 = rng.sample(StandardNormal);
                1.0 / (1.0 + (-(mean + sd * z)).exp())
            })
            .collect();
        let draw: f64 = rng.gen();
        let server_correct = label == Label::Tail && draw < spec.server_accuracy;
        traces.push(ConfidenceTrace::from_valid(scores, label, server_correct));
    }
    traces.shuffle(&mut rng);
    TracePopulation::new(traces)
}
