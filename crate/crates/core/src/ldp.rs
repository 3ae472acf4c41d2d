//! Non-interactive ε-LDP execution of a factorization mechanism.
//!
//! Each record `(x, y)` is mapped to the column `A_{·,(x,y)}` of the right
//! factor and released through a local randomizer. The analyst averages the
//! unbiased decodings and multiplies by the left factor `R`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{labeled_index, Dataset, IndexedMatrix, LabeledDistribution, PROB_TOL};

/// Largest ε accepted.
pub const MAX_EPSILON: f64 = 8.0;
/// Slack allowed above ε by the privacy audit.
pub const AUDIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    epsilon: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= MAX_EPSILON) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, {MAX_EPSILON}], got {epsilon}")));
        }
        Ok(PrivacyParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Probability that coord-rr flips its rounded bit.
    pub fn flip_probability(&self) -> f64 {
        1.0 / (1.0 + self.epsilon.exp())
    }

    /// `(e^ε + 1)/(e^ε − 1)`.
    pub fn debias_factor(&self) -> f64 {
        let e = self.epsilon.exp();
        (e + 1.0) / (e - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomizerKind {
    /// One uniformly chosen coordinate, rounded to a bit, then randomized response.
    CoordRr,
    /// The whole column plus Laplace noise calibrated to ℓ₁ sensitivity.
    LaplaceL1,
    /// Releases the column unchanged. Not private; test builds only.
    #[cfg(feature = "noise-free-hook")]
    NoiseFree,
}

impl RandomizerKind {
    pub fn name(self) -> &'static str {
        match self {
            RandomizerKind::CoordRr => "coord-rr",
            RandomizerKind::LaplaceL1 => "laplace-l1",
            #[cfg(feature = "noise-free-hook")]
            RandomizerKind::NoiseFree => "noise-free",
        }
    }

    /// Parses the two private randomizer names.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coord-rr" => Ok(RandomizerKind::CoordRr),
            "laplace-l1" => Ok(RandomizerKind::LaplaceL1),
            other => Err(Error::InvalidInput(format!("unknown randomizer {other:?}; expected coord-rr or laplace-l1"))),
        }
    }
}

/// A randomizer bound to a right factor `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizerSpec {
    pub kind: RandomizerKind,
    pub a: IndexedMatrix,
    /// `‖A‖_{1→∞}`.
    pub m: f64,
    /// Row count of `A`.
    pub d: usize,
    /// Largest ℓ₁ distance between two columns of `A`.
    pub delta1: f64,
}

impl RandomizerSpec {
    pub fn new(kind: RandomizerKind, a: IndexedMatrix) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() == 0 {
            return Err(Error::InvalidInput("right factor must have at least one row and column".into()));
        }
        let m = a.max_abs();
        let cols: Vec<Vec<f64>> = (0..a.ncols()).map(|j| a.column(j)).collect();
        let mut delta1 = 0.0f64;
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                let dist: f64 = cols[i].iter().zip(&cols[j]).map(|(p, q)| (p - q).abs()).sum();
                delta1 = delta1.max(dist);
            }
        }
        if !m.is_finite() || !delta1.is_finite() {
            return Err(Error::InvalidInput("right factor bounds are not finite".into()));
        }
        Ok(RandomizerSpec { kind, a, m, d, delta1 })
    }

    /// Number of discrete message symbols, when the message space is finite.
    pub fn symbol_count(&self) -> Option<usize> {
        match self.kind {
            RandomizerKind::CoordRr => Some(2 * self.d),
            _ => None,
        }
    }

    fn check_column(&self, col: usize) -> Result<()> {
        if col >= self.a.ncols() {
            return Err(Error::InvalidInput(format!("column {col} does not exist in A ({} columns)", self.a.ncols())));
        }
        Ok(())
    }
}

/// One released message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranscriptMessage {
    Coord { j: usize, bit: i8 },
    Vector(Vec<f64>),
}

impl TranscriptMessage {
    /// Index `2j + [bit = −1]` in the coord-rr message space.
    pub fn symbol(&self) -> Option<usize> {
        match self {
            TranscriptMessage::Coord { j, bit } => Some(2 * j + usize::from(*bit < 0)),
            TranscriptMessage::Vector(_) => None,
        }
    }

    pub fn from_symbol(symbol: usize) -> Self {
        TranscriptMessage::Coord { j: symbol / 2, bit: if symbol.is_multiple_of(2) { 1 } else { -1 } }
    }
}

impl fmt::Display for TranscriptMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranscriptMessage::Coord { j, bit } => write!(f, "{j}:{bit:+}"),
            TranscriptMessage::Vector(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{x:e}")?;
                }
                Ok(())
            }
        }
    }
}

/// Generator for record `index` under protocol seed `seed`.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    // u ∈ (−½, ½); inverse CDF.
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Probability that coord-rr rounds coordinate value `v` to `+1`.
fn round_up_probability(v: f64, m: f64) -> f64 {
    if m == 0.0 {
        return 0.5;
    }
    let v = v.clamp(-m, m);
    0.5 * (1.0 + v / m)
}

/// Randomizes the column at `col` using `rng`.
pub fn randomize_column<R: Rng + ?Sized>(
    spec: &RandomizerSpec,
    col: usize,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<TranscriptMessage> {
    spec.check_column(col)?;
    match spec.kind {
        RandomizerKind::CoordRr => {
            let j = rng.random_range(0..spec.d);
            let p = round_up_probability(spec.a.get(j, col), spec.m);
            let b0: i8 = if rng.random::<f64>() < p { 1 } else { -1 };
            let bit = if rng.random::<f64>() < params.flip_probability() { -b0 } else { b0 };
            Ok(TranscriptMessage::Coord { j, bit })
        }
        RandomizerKind::LaplaceL1 => {
            let scale = spec.delta1 / params.epsilon();
            Ok(TranscriptMessage::Vector(spec.a.column(col).into_iter().map(|v| v + laplace(scale, rng)).collect()))
        }
        #[cfg(feature = "noise-free-hook")]
        RandomizerKind::NoiseFree => Ok(TranscriptMessage::Vector(spec.a.column(col))),
    }
}

/// Randomizes one labeled record, deterministically in `seed`.
pub fn randomize(spec: &RandomizerSpec, record: (usize, i8), params: &PrivacyParams, seed: u64) -> Result<TranscriptMessage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    randomize_column(spec, labeled_index(record.0, record.1), params, &mut rng)
}

/// Message for record `index` of a protocol run with seed `seed`.
pub fn record_message(
    spec: &RandomizerSpec,
    record: (usize, i8),
    params: &PrivacyParams,
    seed: u64,
    index: u64,
) -> Result<TranscriptMessage> {
    randomize_column(spec, labeled_index(record.0, record.1), params, &mut record_rng(seed, index))
}

/// Decoding whose expectation over the randomizer is the input column.
pub fn unbiased_decode(msg: &TranscriptMessage, spec: &RandomizerSpec, params: &PrivacyParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.d];
    add_decoded(&mut out, msg, spec, params)?;
    Ok(out)
}

fn add_decoded(acc: &mut [f64], msg: &TranscriptMessage, spec: &RandomizerSpec, params: &PrivacyParams) -> Result<()> {
    match (spec.kind, msg) {
        (RandomizerKind::CoordRr, TranscriptMessage::Coord { j, bit }) if *j < spec.d => {
            acc[*j] += spec.d as f64 * spec.m * params.debias_factor() * f64::from(*bit);
            Ok(())
        }
        (kind, TranscriptMessage::Vector(v)) if kind != RandomizerKind::CoordRr && v.len() == spec.d => {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            Ok(())
        }
        _ => Err(Error::InvalidInput(format!("message does not match a {} randomizer of dimension {}", spec.kind.name(), spec.d))),
    }
}

/// Query answers labeled by the rows of `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answers {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

/// `R · mean(decode(messages))`.
pub fn aggregate(
    messages: &[TranscriptMessage],
    r: &IndexedMatrix,
    spec: &RandomizerSpec,
    params: &PrivacyParams,
) -> Result<Answers> {
    if messages.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate an empty transcript".into()));
    }
    if r.ncols() != spec.d {
        return Err(Error::InvalidInput(format!("R has {} columns but A has {} rows", r.ncols(), spec.d)));
    }
    let mut acc = vec![0.0; spec.d];
    for msg in messages {
        add_decoded(&mut acc, msg, spec, params)?;
    }
    let n = messages.len() as f64;
    let mean: Vec<f64> = acc.into_iter().map(|v| v / n).collect();
    Ok(Answers { labels: r.row_labels().to_vec(), values: r.mul_vec(&mean) })
}

/// Randomizes every record of `data` and returns the transcript.
pub fn run_transcript(data: &Dataset, spec: &RandomizerSpec, params: &PrivacyParams, seed: u64) -> Result<Vec<TranscriptMessage>> {
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    if spec.a.ncols() != 2 * data.domain().len() {
        return Err(Error::DomainMismatch(format!(
            "A has {} columns; the dataset domain needs {}",
            spec.a.ncols(),
            2 * data.domain().len()
        )));
    }
    data.records()
        .iter()
        .enumerate()
        .map(|(i, &rec)| record_message(spec, rec, params, seed, i as u64))
        .collect()
}

/// Unbiased estimates of `R·A·p̂` where `p̂` is the empirical distribution of `data`.
pub fn run_protocol(
    data: &Dataset,
    r: &IndexedMatrix,
    spec: &RandomizerSpec,
    params: &PrivacyParams,
    seed: u64,
) -> Result<Answers> {
    let transcript = run_transcript(data, spec, params, seed)?;
    aggregate(&transcript, r, spec, params)
}

// ---------------------------------------------------------------------------
// Exact channel analysis

fn require_discrete(spec: &RandomizerSpec) -> Result<()> {
    if spec.kind != RandomizerKind::CoordRr {
        return Err(Error::UnsupportedKind(spec.kind.name()));
    }
    Ok(())
}

/// Exact output distribution of coord-rr over its `2d` symbols for column `col`.
pub fn channel(spec: &RandomizerSpec, params: &PrivacyParams, col: usize) -> Result<Vec<f64>> {
    require_discrete(spec)?;
    spec.check_column(col)?;
    let f = params.flip_probability();
    let inv_d = 1.0 / spec.d as f64;
    let mut out = Vec::with_capacity(2 * spec.d);
    for j in 0..spec.d {
        let q = round_up_probability(spec.a.get(j, col), spec.m);
        let plus = q * (1.0 - f) + (1.0 - q) * f;
        out.push(inv_d * plus);
        out.push(inv_d * (1.0 - plus));
    }
    Ok(out)
}

/// Result of [`audit_privacy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAudit {
    pub epsilon: f64,
    pub max_log_ratio: f64,
    /// False when the value is the analytic calibration rather than an enumeration.
    pub enumerated: bool,
}

impl PrivacyAudit {
    pub fn passes(&self) -> bool {
        self.max_log_ratio <= self.epsilon + AUDIT_SLACK
    }
}

/// Largest `|ln(p/p′)|` over message symbols and pairs of input columns.
pub fn audit_privacy(spec: &RandomizerSpec, params: &PrivacyParams) -> Result<PrivacyAudit> {
    if spec.kind != RandomizerKind::CoordRr {
        return Ok(PrivacyAudit { epsilon: params.epsilon(), max_log_ratio: params.epsilon(), enumerated: false });
    }
    let channels: Vec<Vec<f64>> = (0..spec.a.ncols()).map(|c| channel(spec, params, c)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for s in 0..2 * spec.d {
        // The extreme pair per symbol is (min, max) over columns.
        let (lo, hi) = channels.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), ch| (lo.min(ch[s]), hi.max(ch[s])));
        let ratio = if lo == 0.0 { if hi == 0.0 { 0.0 } else { f64::INFINITY } } else { (hi / lo).ln() };
        worst = worst.max(ratio);
    }
    Ok(PrivacyAudit { epsilon: params.epsilon(), max_log_ratio: worst, enumerated: true })
}

/// Probability table over the coord-rr message symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDistribution {
    pub probs: Vec<f64>,
}

impl ChannelDistribution {
    pub fn symbols(&self) -> Vec<String> {
        (0..self.probs.len()).map(|s| format!("{}", TranscriptMessage::from_symbol(s))).collect()
    }
}

/// `Σ dist(x,y)·channel(x,y)`.
pub fn channel_marginal(spec: &RandomizerSpec, params: &PrivacyParams, dist: &LabeledDistribution) -> Result<ChannelDistribution> {
    require_discrete(spec)?;
    if dist.probs().len() != spec.a.ncols() {
        return Err(Error::DomainMismatch(format!(
            "distribution has {} labeled points; A has {} columns",
            dist.probs().len(),
            spec.a.ncols()
        )));
    }
    let mut out = vec![0.0; 2 * spec.d];
    for (col, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (o, c) in out.iter_mut().zip(channel(spec, params, col)?) {
            *o += p * c;
        }
    }
    debug_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e3 * PROB_TOL);
    Ok(ChannelDistribution { probs: out })
}

/// A probability table over a finite universe.
pub trait ProbabilityTable {
    fn table(&self) -> &[f64];
}

impl ProbabilityTable for ChannelDistribution {
    fn table(&self) -> &[f64] {
        &self.probs
    }
}

impl ProbabilityTable for LabeledDistribution {
    fn table(&self) -> &[f64] {
        self.probs()
    }
}

impl ProbabilityTable for [f64] {
    fn table(&self) -> &[f64] {
        self
    }
}

fn same_universe(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DomainMismatch(format!("tables have {} and {} entries", p.len(), q.len())));
    }
    Ok(())
}

/// `KL(p‖q)` in nats; `0·ln 0 = 0` and `+∞` when `p` is not dominated by `q`.
pub fn kl_divergence<P: ProbabilityTable + ?Sized, Q: ProbabilityTable + ?Sized>(p: &P, q: &Q) -> Result<f64> {
    let (p, q) = (p.table(), q.table());
    same_universe(p, q)?;
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        s += a * (a / b).ln();
    }
    Ok(s.max(0.0))
}

/// `½‖p − q‖₁`.
pub fn tv_distance<P: ProbabilityTable + ?Sized, Q: ProbabilityTable + ?Sized>(p: &P, q: &Q) -> Result<f64> {
    let (p, q) = (p.table(), q.table());
    same_universe(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// KL divergence between the n-record transcripts under i.i.d. inputs.
pub fn transcript_kl(
    dist_a: &LabeledDistribution,
    dist_b: &LabeledDistribution,
    spec: &RandomizerSpec,
    params: &PrivacyParams,
    n: usize,
) -> Result<f64> {
    let pa = channel_marginal(spec, params, dist_a)?;
    let pb = channel_marginal(spec, params, dist_b)?;
    let kl = kl_divergence(&pa, &pb)?;
    Ok(if kl == 0.0 { 0.0 } else { n as f64 * kl })
}

/// `4(e^ε − 1)²·(2·tv)²`, an upper bound on the per-record transcript KL.
pub fn contraction_bound(params: &PrivacyParams, tv: f64) -> f64 {
    let e = params.epsilon().exp() - 1.0;
    4.0 * e * e * (2.0 * tv) * (2.0 * tv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConceptClass;
    use alloc::string::ToString;

    fn a34() -> IndexedMatrix {
        IndexedMatrix::from_rows(&[
            vec![0.5, -1.0, 0.25, 0.0],
            vec![-0.3, 0.7, 1.0, -0.9],
            vec![0.1, 0.2, -0.6, 0.4],
        ])
        .unwrap()
    }

    fn one_point_spec(kind: RandomizerKind) -> RandomizerSpec {
        RandomizerSpec::new(kind, IndexedMatrix::from_rows(&[vec![1.0, -1.0]]).unwrap()).unwrap()
    }

    #[test]
    fn params_bounds() {
        assert!(PrivacyParams::new(0.0).is_err());
        assert!(PrivacyParams::new(8.5).is_err());
        assert!(PrivacyParams::new(8.0).is_ok());
    }

    #[test]
    fn spec_bounds() {
        let s = RandomizerSpec::new(RandomizerKind::CoordRr, a34()).unwrap();
        assert_eq!((s.d, s.m), (3, 1.0));
        assert_eq!(s.symbol_count(), Some(6));
        assert!((s.delta1 - 3.15).abs() < 1e-12);
    }

    #[test]
    fn coord_rr_flip_rate() {
        let spec = one_point_spec(RandomizerKind::CoordRr);
        let p = PrivacyParams::new(3f64.ln()).unwrap();
        let ch = channel(&spec, &p, 0).unwrap();
        assert!((ch[0] - 0.75).abs() < 1e-12);
        let n = 20_000;
        let plus = (0..n)
            .filter(|&s| randomize(&spec, (0, 1), &p, s).unwrap() == TranscriptMessage::Coord { j: 0, bit: 1 })
            .count();
        let rate = plus as f64 / n as f64;
        assert!((rate - 0.75).abs() < 4.0 * (0.75 * 0.25 / n as f64).sqrt(), "{rate}");
    }

    #[test]
    fn zero_value_is_uniform() {
        let spec = RandomizerSpec::new(RandomizerKind::CoordRr, IndexedMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap()).unwrap();
        for eps in [0.5, 2.0, 8.0] {
            let ch = channel(&spec, &PrivacyParams::new(eps).unwrap(), 0).unwrap();
            assert!((ch[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = RandomizerSpec::new(RandomizerKind::LaplaceL1, a34()).unwrap();
        let p = PrivacyParams::new(1.0).unwrap();
        assert_eq!(randomize(&spec, (1, -1), &p, 9).unwrap(), randomize(&spec, (1, -1), &p, 9).unwrap());
        assert!(randomize(&spec, (2, 1), &p, 9).is_err());
    }

    #[test]
    fn exact_expectation_by_enumeration() {
        for eps in [0.5, 1.0, 2.0] {
            let p = PrivacyParams::new(eps).unwrap();
            let spec = RandomizerSpec::new(RandomizerKind::CoordRr, a34()).unwrap();
            for col in 0..4 {
                let ch = channel(&spec, &p, col).unwrap();
                let mut mean = [0.0; 3];
                for (s, prob) in ch.iter().enumerate() {
                    let dec = unbiased_decode(&TranscriptMessage::from_symbol(s), &spec, &p).unwrap();
                    for (m, v) in mean.iter_mut().zip(dec) {
                        *m += prob * v;
                    }
                }
                for j in 0..3 {
                    assert!((mean[j] - spec.a.get(j, col)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn decode_sign_and_identity() {
        let spec = RandomizerSpec::new(RandomizerKind::CoordRr, a34()).unwrap();
        let p = PrivacyParams::new(1.0).unwrap();
        let up = unbiased_decode(&TranscriptMessage::Coord { j: 1, bit: 1 }, &spec, &p).unwrap();
        let down = unbiased_decode(&TranscriptMessage::Coord { j: 1, bit: -1 }, &spec, &p).unwrap();
        assert_eq!(up[1], -down[1]);
        assert!(unbiased_decode(&TranscriptMessage::Vector(vec![1.0; 3]), &spec, &p).is_err());
        let lap = RandomizerSpec::new(RandomizerKind::LaplaceL1, a34()).unwrap();
        let v = vec![0.1, 0.2, 0.3];
        assert_eq!(unbiased_decode(&TranscriptMessage::Vector(v.clone()), &lap, &p).unwrap(), v);
    }

    #[test]
    fn audit_examples() {
        let p = PrivacyParams::new(3f64.ln()).unwrap();
        // Row 0 attains both extremes ±m.
        let a = IndexedMatrix::from_rows(&[vec![1.0, -1.0, 0.2], vec![0.3, 0.0, -0.5]]).unwrap();
        let audit = audit_privacy(&RandomizerSpec::new(RandomizerKind::CoordRr, a).unwrap(), &p).unwrap();
        assert!((audit.max_log_ratio - 3f64.ln()).abs() < 1e-12);
        let inner = audit_privacy(&RandomizerSpec::new(RandomizerKind::CoordRr, a34()).unwrap(), &p).unwrap();
        assert!(inner.passes());
        assert!(audit.enumerated && audit.passes());
        let same = RandomizerSpec::new(RandomizerKind::CoordRr, IndexedMatrix::from_rows(&[vec![0.4, 0.4]]).unwrap()).unwrap();
        assert_eq!(audit_privacy(&same, &p).unwrap().max_log_ratio, 0.0);
        let lap = audit_privacy(&RandomizerSpec::new(RandomizerKind::LaplaceL1, a34()).unwrap(), &p).unwrap();
        assert!(!lap.enumerated);
    }

    #[test]
    fn binary_rr_kl_closed_form() {
        let spec = one_point_spec(RandomizerKind::CoordRr);
        let p = PrivacyParams::new(1.0).unwrap();
        let dom = vec!["x".to_string()];
        let plus = LabeledDistribution::point_mass(dom.clone(), 0, 1).unwrap();
        let minus = LabeledDistribution::point_mass(dom, 0, -1).unwrap();
        let e = core::f64::consts::E;
        let q = e / (1.0 + e);
        let expected = (2.0 * q - 1.0) * (q / (1.0 - q)).ln();
        let kl = transcript_kl(&plus, &minus, &spec, &p, 1).unwrap();
        assert!((kl - expected).abs() < 1e-12);
        assert!((kl - 0.46212).abs() < 1e-5);
        assert!((transcript_kl(&plus, &minus, &spec, &p, 7).unwrap() - 7.0 * kl).abs() < 1e-12);
        assert_eq!(transcript_kl(&plus, &plus, &spec, &p, 5).unwrap(), 0.0);
        assert!(kl <= contraction_bound(&p, tv_distance(&plus, &minus).unwrap()));
    }

    #[test]
    fn kl_and_tv_edges() {
        let p = [1.0, 0.0];
        let q = [0.0, 1.0];
        assert_eq!(kl_divergence(&p[..], &q[..]).unwrap(), f64::INFINITY);
        assert_eq!(tv_distance(&p[..], &q[..]).unwrap(), 1.0);
        assert_eq!(tv_distance(&p[..], &p[..]).unwrap(), 0.0);
        assert!(tv_distance(&p[..], &[1.0][..]).is_err());
    }

    #[test]
    fn marginal_symmetry() {
        let class = ConceptClass::new(
            vec!["a".into(), "b".into()],
            vec![("c".to_string(), vec![1, -1])],
        )
        .unwrap();
        // Columns (x,+1) and (x,−1) are negatives of each other.
        let a = IndexedMatrix::from_rows(&[vec![0.5, -0.5, 1.0, -1.0], vec![-0.2, 0.2, 0.3, -0.3]]).unwrap();
        let spec = RandomizerSpec::new(RandomizerKind::CoordRr, a).unwrap();
        let p = PrivacyParams::new(2.0).unwrap();
        let dist = LabeledDistribution::new(class.domain().to_vec(), vec![0.15, 0.15, 0.35, 0.35]).unwrap();
        let ch = channel_marginal(&spec, &p, &dist).unwrap();
        for v in &ch.probs {
            assert!((v - 0.25).abs() < 1e-12);
        }
        let pm = LabeledDistribution::point_mass(class.domain().to_vec(), 1, -1).unwrap();
        assert_eq!(channel_marginal(&spec, &p, &pm).unwrap().probs, channel(&spec, &p, 3).unwrap());
    }

    #[test]
    fn noise_free_protocol_is_exact() {
        let spec = RandomizerSpec::new(RandomizerKind::NoiseFree, a34().select_rows(&[0, 1])).unwrap();
        let p = PrivacyParams::new(1.0).unwrap();
        let data = Dataset::new(vec!["a".into(), "b".into()], vec![(1, 1)]).unwrap();
        let r = IndexedMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let ans = run_protocol(&data, &r, &spec, &p, 3).unwrap();
        assert_eq!(ans.values, vec![0.25, 1.25]);
        let empty = Dataset::new(vec!["a".into(), "b".into()], vec![]);
        assert!(empty.is_err() || run_protocol(&empty.unwrap(), &r, &spec, &p, 3).is_err());
    }
}
