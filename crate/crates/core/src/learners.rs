//! Agnostic and realizable learners and refuters over a finite class.
//!
//! Both are proper: the output is always a member of the class. The agnostic
//! learner estimates every population loss from one private release of the
//! concept-matrix queries. The realizable learner releases the surrogate
//! queries of the η program and accepts the first concept whose estimate
//! clears `2α`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{self, Answers, PrivacyParams, RandomizerKind, RandomizerSpec, TranscriptMessage};
use crate::model::{build_concept_matrix, labeled_point, ConceptClass, Dataset, IndexedMatrix};
use crate::norms::{self, Factorization};
use crate::sdp::SdpSettings;

pub const DEFAULT_C0: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Agnostic,
    Realizable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Refutation threshold.
    pub theta: f64,
    pub c0: f64,
    pub randomizer: RandomizerKind,
    pub sdp: SdpSettings,
}

impl TaskConfig {
    pub fn new(alpha: f64, beta: f64, epsilon: f64) -> Self {
        TaskConfig {
            alpha,
            beta,
            epsilon,
            theta: 0.0,
            c0: DEFAULT_C0,
            randomizer: RandomizerKind::CoordRr,
            sdp: SdpSettings::default(),
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1/2], got {}", self.alpha)));
        }
        if task == Task::Realizable && 3.0 * self.alpha > 1.0 {
            return Err(Error::InvalidInput(format!("realizable tasks need 3·alpha ≤ 1, got alpha = {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::InvalidInput(format!("beta must lie in (0, 1/2), got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidInput(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidInput(format!("c0 must be positive, got {}", self.c0)));
        }
        PrivacyParams::new(self.epsilon)?;
        self.sdp.validate()
    }

    pub fn privacy(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.epsilon)
    }
}

/// Summary of the released transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStats {
    pub records: usize,
    pub randomizer: String,
    pub epsilon: f64,
    /// Inner dimension of the factorization.
    pub d: usize,
    /// `‖A‖_{1→∞}`.
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub chosen: String,
    pub chosen_index: usize,
    /// Estimated loss (agnostic) or shifted surrogate estimate (realizable), per concept.
    pub estimates: Vec<(String, f64)>,
    pub n: usize,
    pub transcript: TranscriptStats,
}

// ---------------------------------------------------------------------------
// Sample size

/// `⌈c₀·norm²·ln(2|C|/β)/(ε²α²)⌉`.
pub fn sample_size_formula(norm: f64, class_size: usize, config: &TaskConfig) -> usize {
    let n = config.c0 * norm * norm * (2.0 * class_size as f64 / config.beta).ln()
        / (config.epsilon * config.epsilon * config.alpha * config.alpha);
    (n.ceil() as usize).max(1)
}

/// Sample size and the norm it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub n: usize,
    /// γ₂(W, α) for agnostic tasks, η(C, α) for realizable ones.
    pub norm: f64,
}

pub fn required_sample_size(task: Task, class: &ConceptClass, config: &TaskConfig) -> Result<SampleSize> {
    config.validate(task)?;
    let norm = match task {
        Task::Agnostic => norms::gamma2_approx(&build_concept_matrix(class), config.alpha, &config.sdp)?.value,
        Task::Realizable => norms::eta(class, config.alpha, &config.sdp)?.value,
    };
    Ok(SampleSize { n: sample_size_formula(norm, class.len(), config), norm })
}

// ---------------------------------------------------------------------------
// Shared selection

/// Index of the smallest estimate; ties go to the lexicographically smallest name.
fn argmin(names: &[String], values: &[f64], eligible: impl Fn(f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !eligible(v) {
            continue;
        }
        best = match best {
            Some(b) if values[b] < v || (values[b] == v && names[b] <= names[i]) => Some(b),
            _ => Some(i),
        };
    }
    best
}

fn check_data(class: &ConceptClass, data: &Dataset) -> Result<()> {
    if data.domain() != class.domain() {
        return Err(Error::DomainMismatch("dataset and class domains differ".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    Ok(())
}

fn stats(spec: &RandomizerSpec, params: &PrivacyParams, records: usize) -> TranscriptStats {
    TranscriptStats { records, randomizer: String::from(spec.kind.name()), epsilon: params.epsilon(), d: spec.d, m: spec.m }
}

// ---------------------------------------------------------------------------
// Agnostic

/// Agnostic learner with its factorization solved once.
#[derive(Debug, Clone)]
pub struct AgnosticLearner {
    class: ConceptClass,
    config: TaskConfig,
    params: PrivacyParams,
    factorization: Factorization,
    /// Left factor over concepts.
    r: IndexedMatrix,
    spec: RandomizerSpec,
}

impl AgnosticLearner {
    /// Factors `W` at accuracy `α/2` and lifts the right factor to labeled
    /// points: record `(x, y)` contributes `y·A_{·,x}`.
    pub fn prepare(class: &ConceptClass, config: &TaskConfig) -> Result<Self> {
        config.validate(Task::Agnostic)?;
        let params = config.privacy()?;
        let w = build_concept_matrix(class);
        let approx = norms::gamma2_approx(&w, config.alpha / 2.0, &config.sdp)?;
        let fac = approx.factorization;
        let limit = config.alpha / 2.0 + 10.0 * config.sdp.tolerance;
        if fac.residual_inf > limit {
            return Err(Error::PropertyViolation(format!(
                "factorization residual {:e} exceeds α/2 + tol = {limit:e}",
                fac.residual_inf
            )));
        }
        let a = &fac.a;
        let lifted = IndexedMatrix::from_fn(
            a.row_labels().to_vec(),
            crate::model::labeled_point_labels(class.domain()),
            |k, col| {
                let (x, y) = labeled_point(col);
                f64::from(y) * a.get(k, x)
            },
        );
        let spec = RandomizerSpec::new(config.randomizer, lifted)?;
        Ok(AgnosticLearner { class: class.clone(), config: config.clone(), params, r: fac.r.clone(), factorization: fac, spec })
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn randomizer(&self) -> &RandomizerSpec {
        &self.spec
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn transcript(&self, data: &Dataset, seed: u64) -> Result<Vec<TranscriptMessage>> {
        check_data(&self.class, data)?;
        ldp::run_transcript(data, &self.spec, &self.params, seed)
    }

    /// Loss estimates `½ − ½·(R·mean)` from a transcript, clamped to `[0, 1]`.
    pub fn estimate(&self, transcript: &[TranscriptMessage]) -> Result<Vec<f64>> {
        let Answers { values, .. } = ldp::aggregate(transcript, &self.r, &self.spec, &self.params)?;
        Ok(values.into_iter().map(|v| (0.5 - 0.5 * v).clamp(0.0, 1.0)).collect())
    }

    fn outcome(&self, estimates: Vec<f64>, n: usize) -> LearnOutcome {
        let names = self.class.names();
        let i = argmin(names, &estimates, |_| true).expect("class is nonempty");
        LearnOutcome {
            chosen: names[i].clone(),
            chosen_index: i,
            estimates: names.iter().cloned().zip(estimates).collect(),
            n,
            transcript: stats(&self.spec, &self.params, n),
        }
    }

    pub fn learn(&self, data: &Dataset, seed: u64) -> Result<LearnOutcome> {
        let t = self.transcript(data, seed)?;
        Ok(self.outcome(self.estimate(&t)?, data.len()))
    }

    /// `+1` iff the smallest estimated loss is at most `θ + α/2`.
    pub fn refute(&self, data: &Dataset, seed: u64) -> Result<i8> {
        let t = self.transcript(data, seed)?;
        Ok(self.refute_from_estimates(&self.estimate(&t)?))
    }

    pub fn refute_from_estimates(&self, estimates: &[f64]) -> i8 {
        let min = estimates.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min <= self.config.theta + self.config.alpha / 2.0 {
            1
        } else {
            -1
        }
    }

    pub fn outcome_from_estimates(&self, estimates: Vec<f64>, n: usize) -> LearnOutcome {
        self.outcome(estimates, n)
    }
}

pub fn agnostic_learn(class: &ConceptClass, data: &Dataset, config: &TaskConfig, seed: u64) -> Result<LearnOutcome> {
    AgnosticLearner::prepare(class, config)?.learn(data, seed)
}

pub fn agnostic_refute(class: &ConceptClass, data: &Dataset, config: &TaskConfig, seed: u64) -> Result<i8> {
    AgnosticLearner::prepare(class, config)?.refute(data, seed)
}

// ---------------------------------------------------------------------------
// Realizable

/// Realizable learner with its η program solved once.
#[derive(Debug, Clone)]
pub struct RealizableLearner {
    class: ConceptClass,
    config: TaskConfig,
    params: PrivacyParams,
    eta: norms::EtaSolution,
    spec: RandomizerSpec,
}

impl RealizableLearner {
    pub fn prepare(class: &ConceptClass, config: &TaskConfig) -> Result<Self> {
        config.validate(Task::Realizable)?;
        let params = config.privacy()?;
        let eta = norms::eta(class, config.alpha, &config.sdp)?;
        let spec = RandomizerSpec::new(config.randomizer, eta.factorization.a.clone())?;
        Ok(RealizableLearner { class: class.clone(), config: config.clone(), params, eta, spec })
    }

    pub fn eta(&self) -> &norms::EtaSolution {
        &self.eta
    }

    pub fn randomizer(&self) -> &RandomizerSpec {
        &self.spec
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn transcript(&self, data: &Dataset, seed: u64) -> Result<Vec<TranscriptMessage>> {
        check_data(&self.class, data)?;
        ldp::run_transcript(data, &self.spec, &self.params, seed)
    }

    /// Surrogate estimates `(W̃·p̂)_c − θ_c`.
    pub fn estimate(&self, transcript: &[TranscriptMessage]) -> Result<Vec<f64>> {
        let ans = ldp::aggregate(transcript, &self.eta.factorization.r, &self.spec, &self.params)?;
        Ok(ans.values.iter().zip(&self.eta.theta).map(|(v, t)| v - t).collect())
    }

    fn accept_bound(&self) -> f64 {
        2.0 * self.config.alpha
    }

    /// The accepted concept with the smallest estimate, if any clears `2α`.
    pub fn outcome_from_estimates(&self, estimates: Vec<f64>, n: usize) -> Result<LearnOutcome> {
        let names = self.class.names();
        let bound = self.accept_bound();
        let i = argmin(names, &estimates, |v| v < bound).ok_or_else(|| {
            Error::NotRealizable(format!("not realizable at this accuracy: no concept estimate is below 2α = {bound}"))
        })?;
        Ok(LearnOutcome {
            chosen: names[i].clone(),
            chosen_index: i,
            estimates: names.iter().cloned().zip(estimates).collect(),
            n,
            transcript: stats(&self.spec, &self.params, n),
        })
    }

    pub fn learn(&self, data: &Dataset, seed: u64) -> Result<LearnOutcome> {
        let t = self.transcript(data, seed)?;
        self.outcome_from_estimates(self.estimate(&t)?, data.len())
    }

    pub fn refute_from_estimates(&self, estimates: &[f64]) -> i8 {
        if estimates.iter().any(|&v| v < self.accept_bound()) {
            1
        } else {
            -1
        }
    }

    /// `+1` iff some shifted estimate is below `2α`.
    pub fn refute(&self, data: &Dataset, seed: u64) -> Result<i8> {
        let t = self.transcript(data, seed)?;
        Ok(self.refute_from_estimates(&self.estimate(&t)?))
    }
}

pub fn realizable_learn(class: &ConceptClass, data: &Dataset, config: &TaskConfig, seed: u64) -> Result<LearnOutcome> {
    RealizableLearner::prepare(class, config)?.learn(data, seed)
}

pub fn realizable_refute(class: &ConceptClass, data: &Dataset, config: &TaskConfig, seed: u64) -> Result<i8> {
    RealizableLearner::prepare(class, config)?.refute(data, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{population_loss, LabeledDistribution};
    use alloc::string::ToString;
    use alloc::vec;

    fn thresholds(points: usize) -> ConceptClass {
        let domain: Vec<String> = (0..points).map(|i| format!("x{i}")).collect();
        let concepts = (0..=points)
            .map(|t| (format!("t{t}"), (0..points).map(|x| if x < t { 1 } else { -1 }).collect()))
            .collect();
        ConceptClass::new(domain, concepts).unwrap()
    }

    fn exact(task_cfg: &TaskConfig) -> TaskConfig {
        let mut c = task_cfg.clone();
        c.randomizer = RandomizerKind::NoiseFree;
        c
    }

    #[test]
    fn formula_example() {
        let cfg = TaskConfig::new(0.1, 0.1, 1.0);
        let expected = (32.0 * 40f64.ln() / 0.01).ceil() as usize;
        assert_eq!(sample_size_formula(1.0, 2, &cfg), expected);
        assert_eq!(expected, 11805);
        let raw = |eps: f64| 32.0 * 40f64.ln() / (eps * eps * 0.01);
        assert!((raw(1.0) / raw(2.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TaskConfig::new(0.4, 0.1, 1.0).validate(Task::Agnostic).is_ok());
        assert!(TaskConfig::new(0.4, 0.1, 1.0).validate(Task::Realizable).is_err());
        assert!(TaskConfig::new(0.1, 0.5, 1.0).validate(Task::Agnostic).is_err());
        assert!(TaskConfig::new(0.1, 0.1, 1.0).with_theta(1.5).validate(Task::Agnostic).is_err());
    }

    #[test]
    fn singleton_realizable_size_uses_eta() {
        let c = ConceptClass::new(vec!["x".into()], vec![("c".to_string(), vec![1])]).unwrap();
        let cfg = TaskConfig::new(0.1, 0.1, 1.0);
        let s = required_sample_size(Task::Realizable, &c, &cfg).unwrap();
        assert!((s.norm - 0.45).abs() < 1e-6);
        assert_eq!(s.n, sample_size_formula(s.norm, 1, &cfg));
    }

    #[test]
    fn argmin_ties_by_name() {
        let names = vec!["b".to_string(), "a".to_string(), "c".to_string()];
        assert_eq!(argmin(&names, &[0.2, 0.2, 0.1], |_| true), Some(2));
        assert_eq!(argmin(&names, &[0.2, 0.2, 0.3], |_| true), Some(1));
        assert_eq!(argmin(&names, &[0.2, 0.2, 0.3], |v| v > 0.25), Some(2));
    }

    #[test]
    fn noise_free_agnostic_estimates_track_losses() {
        let class = thresholds(3);
        let cfg = exact(&TaskConfig::new(0.1, 0.1, 1.0));
        let learner = AgnosticLearner::prepare(&class, &cfg).unwrap();
        let records = vec![(0, 1), (1, 1), (2, -1), (1, -1)];
        let data = Dataset::new(class.domain().to_vec(), records).unwrap();
        let out = learner.learn(&data, 0).unwrap();
        let emp = crate::model::empirical_loss;
        for (c, (_, est)) in out.estimates.iter().enumerate() {
            let truth = emp(&data, class.concept(c)).unwrap();
            assert!((est - truth).abs() <= 0.1 / 4.0 + 1e-6, "{est} vs {truth}");
        }
        let best = (0..class.len()).map(|c| emp(&data, class.concept(c)).unwrap()).fold(1.0, f64::min);
        assert!(emp(&data, class.concept(out.chosen_index)).unwrap() <= best + 0.1 / 2.0);
    }

    #[test]
    fn noise_free_realizable_bounds() {
        let class = thresholds(3);
        let cfg = exact(&TaskConfig::new(0.1, 0.1, 1.0));
        let learner = RealizableLearner::prepare(&class, &cfg).unwrap();
        let marginal = vec![0.25, 0.25, 0.5];
        let dist = LabeledDistribution::labeled_by(class.domain().to_vec(), &marginal, class.concept(1)).unwrap();
        // Every labeled point once, weighted by repetition.
        let mut records = Vec::new();
        for (x, reps) in [(0usize, 1usize), (1, 1), (2, 2)] {
            for _ in 0..reps {
                records.push((x, class.concept(1)[x]));
            }
        }
        let data = Dataset::new(class.domain().to_vec(), records).unwrap();
        let out = learner.learn(&data, 0).unwrap();
        for (c, (_, est)) in out.estimates.iter().enumerate() {
            let loss = population_loss(&dist, class.concept(c)).unwrap();
            assert!(*est >= loss - 0.1 - 1e-6);
        }
        assert!(out.estimates[1].1 <= 0.1 + 1e-6);
        assert!(population_loss(&dist, class.concept(out.chosen_index)).unwrap() < 0.3);
    }

    #[test]
    fn noise_free_realizable_rejects_far_distribution() {
        let class = ConceptClass::new(vec!["x".into()], vec![("c".to_string(), vec![1])]).unwrap();
        let cfg = exact(&TaskConfig::new(0.1, 0.1, 1.0));
        let learner = RealizableLearner::prepare(&class, &cfg).unwrap();
        let data = Dataset::new(class.domain().to_vec(), vec![(0, -1)]).unwrap();
        assert!(matches!(learner.learn(&data, 0), Err(Error::NotRealizable(_))));
        assert_eq!(learner.refute(&data, 0).unwrap(), -1);
        let good = Dataset::new(class.domain().to_vec(), vec![(0, 1)]).unwrap();
        assert_eq!(learner.learn(&good, 0).unwrap().chosen, "c");
    }

    #[test]
    fn singleton_agnostic_and_vacuous_refute() {
        let class = ConceptClass::new(vec!["x".into(), "y".into()], vec![("c".to_string(), vec![1, -1])]).unwrap();
        let cfg = TaskConfig::new(0.2, 0.1, 1.0).with_theta(1.0);
        let data = Dataset::new(class.domain().to_vec(), vec![(0, -1), (1, 1), (0, 1)]).unwrap();
        for seed in 0..20 {
            assert_eq!(agnostic_learn(&class, &data, &cfg, seed).unwrap().chosen, "c");
            assert_eq!(agnostic_refute(&class, &data, &cfg, seed).unwrap(), 1);
        }
    }
}
