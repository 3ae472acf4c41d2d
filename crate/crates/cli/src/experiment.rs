//! Pieces shared by `simulate` and `sweep`: the population, the prepared
//! learner, per-trial seeds and trial evaluation.

use anyhow::{bail, Context, Result};
use ldpgamma_core::learners::{AgnosticLearner, LearnOutcome, RealizableLearner, Task, TaskConfig};
use ldpgamma_core::ldp::{aggregate, Answers, RandomizerSpec, TranscriptMessage};
use ldpgamma_core::model::{bayes_error, population_loss, ConceptClass, Dataset, LabeledDistribution};
use ldpgamma_core::Error as CoreError;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::io;

/// Tolerance for calling a loss zero.
const ZERO_LOSS: f64 = 1e-12;

/// The data distribution named by the config.
pub fn population(cfg: &ExperimentConfig, class: &ConceptClass) -> Result<LabeledDistribution> {
    if let Some(path) = &cfg.distribution {
        let dist = io::load_distribution(path)?;
        if dist.domain() != class.domain() {
            bail!("distribution {} is not over the class domain", path.display());
        }
        return Ok(dist);
    }
    let domain = class.domain().to_vec();
    match &cfg.target {
        Some(name) => {
            let c = class.index_of(name).with_context(|| format!("target {name:?} is not a concept of the class"))?;
            let marginal = vec![1.0 / domain.len() as f64; domain.len()];
            let clean = LabeledDistribution::labeled_by(domain, &marginal, class.concept(c))?;
            Ok(clean.mix(&clean.flip_labels(), 1.0 - cfg.label_noise)?)
        }
        None => Ok(LabeledDistribution::uniform_labels(domain)?),
    }
}

/// `(data seed, protocol seed)` for one trial of one grid point.
pub fn trial_seeds(seed: u64, point: u64, trial: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point);
    rng.set_word_pos(u128::from(trial) * 4);
    (rng.next_u64(), rng.next_u64())
}

pub enum Learner {
    Agnostic(AgnosticLearner),
    Realizable(RealizableLearner),
}

/// What the learner did with one transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Decision {
    Learned { outcome: LearnOutcome },
    /// No concept passed the realizable acceptance test.
    Rejected { reason: String },
    Refuted { value: i8 },
}

impl Learner {
    pub fn prepare(task: Task, class: &ConceptClass, cfg: &TaskConfig) -> Result<Self> {
        Ok(match task {
            Task::Agnostic => Learner::Agnostic(AgnosticLearner::prepare(class, cfg)?),
            Task::Realizable => Learner::Realizable(RealizableLearner::prepare(class, cfg)?),
        })
    }

    pub fn randomizer(&self) -> &RandomizerSpec {
        match self {
            Learner::Agnostic(l) => l.randomizer(),
            Learner::Realizable(l) => l.randomizer(),
        }
    }

    fn config(&self) -> &TaskConfig {
        match self {
            Learner::Agnostic(l) => l.config(),
            Learner::Realizable(l) => l.config(),
        }
    }

    pub fn transcript(&self, data: &Dataset, seed: u64) -> Result<Vec<TranscriptMessage>> {
        Ok(match self {
            Learner::Agnostic(l) => l.transcript(data, seed)?,
            Learner::Realizable(l) => l.transcript(data, seed)?,
        })
    }

    /// Raw answers `R·mean(decode)`, before any per-task transform.
    pub fn answers(&self, transcript: &[TranscriptMessage]) -> Result<Answers> {
        let r = match self {
            Learner::Agnostic(l) => &l.factorization().r,
            Learner::Realizable(l) => &l.eta().factorization.r,
        };
        Ok(aggregate(transcript, r, self.randomizer(), &self.config().privacy()?)?)
    }

    pub fn decide(&self, mode: Mode, transcript: &[TranscriptMessage]) -> Result<Decision> {
        let n = transcript.len();
        match self {
            Learner::Agnostic(l) => {
                let est = l.estimate(transcript)?;
                Ok(match mode {
                    Mode::Learn => Decision::Learned { outcome: l.outcome_from_estimates(est, n) },
                    Mode::Refute => Decision::Refuted { value: l.refute_from_estimates(&est) },
                })
            }
            Learner::Realizable(l) => {
                let est = l.estimate(transcript)?;
                match mode {
                    Mode::Refute => Ok(Decision::Refuted { value: l.refute_from_estimates(&est) }),
                    Mode::Learn => match l.outcome_from_estimates(est, n) {
                        Ok(outcome) => Ok(Decision::Learned { outcome }),
                        Err(CoreError::NotRealizable(reason)) => Ok(Decision::Rejected { reason }),
                        Err(e) => Err(e.into()),
                    },
                }
            }
        }
    }
}

/// Loss references a trial is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Smallest loss over the class.
    pub optimal_loss: f64,
    /// Smallest loss over all hypotheses.
    pub bayes_error: f64,
}

impl Reference {
    pub fn of(class: &ConceptClass, dist: &LabeledDistribution) -> Result<Self> {
        Ok(Reference { optimal_loss: class.min_loss(dist)?, bayes_error: bayes_error(dist) })
    }
}

/// The refuter's required answer, or `None` when either answer is allowed.
pub fn expected_refutation(task: Task, alpha: f64, theta: f64, r: Reference) -> Option<i8> {
    match task {
        Task::Agnostic if r.optimal_loss <= theta + ZERO_LOSS => Some(1),
        Task::Agnostic if r.bayes_error >= theta + alpha - ZERO_LOSS => Some(-1),
        Task::Realizable if r.optimal_loss <= ZERO_LOSS => Some(1),
        Task::Realizable if r.bayes_error >= 3.0 * alpha - ZERO_LOSS => Some(-1),
        _ => None,
    }
}

/// Whether a returned concept with this population loss meets the guarantee.
pub fn learned_ok(task: Task, alpha: f64, loss: f64, r: Reference) -> bool {
    match task {
        Task::Agnostic => loss <= r.optimal_loss + alpha,
        Task::Realizable => loss < 3.0 * alpha,
    }
}

/// Outcome label and achieved loss as written to a sweep row.
///
/// Learning rows carry `success`, `failure` or `rejected` and the population
/// loss of the returned concept. Refutation rows carry `+1` or `-1` and the
/// optimal loss over the class.
pub fn trial_record(
    task: Task,
    alpha: f64,
    class: &ConceptClass,
    dist: &LabeledDistribution,
    reference: Reference,
    decision: &Decision,
) -> Result<(String, Option<f64>)> {
    Ok(match decision {
        Decision::Learned { outcome } => {
            let loss = population_loss(dist, class.concept(outcome.chosen_index))?;
            let label = if learned_ok(task, alpha, loss, reference) { "success" } else { "failure" };
            (label.into(), Some(loss))
        }
        Decision::Rejected { .. } => ("rejected".into(), None),
        Decision::Refuted { value } => (format!("{value:+}"), Some(reference.optimal_loss)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldpgamma_core::zoo;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = trial_seeds(7, 0, 0);
        assert_eq!(a, trial_seeds(7, 0, 0));
        assert_ne!(a, trial_seeds(7, 0, 1));
        assert_ne!(a, trial_seeds(7, 1, 0));
        assert_ne!(a.0, a.1);
    }

    #[test]
    fn noisy_target_population() {
        let class = zoo::thresholds(4).unwrap();
        let cfg = ExperimentConfig { target: Some("t2".into()), label_noise: 0.25, ..Default::default() };
        let dist = population(&cfg, &class).unwrap();
        let r = Reference::of(&class, &dist).unwrap();
        assert!((r.optimal_loss - 0.25).abs() < 1e-12);
        assert!((r.bayes_error - 0.25).abs() < 1e-12);
        let bad = ExperimentConfig { target: Some("t9".into()), ..Default::default() };
        assert!(population(&bad, &class).is_err());
    }

    #[test]
    fn refutation_expectations() {
        let clean = Reference { optimal_loss: 0.0, bayes_error: 0.0 };
        let noise = Reference { optimal_loss: 0.5, bayes_error: 0.5 };
        let middle = Reference { optimal_loss: 0.3, bayes_error: 0.3 };
        assert_eq!(expected_refutation(Task::Agnostic, 0.1, 0.25, clean), Some(1));
        assert_eq!(expected_refutation(Task::Agnostic, 0.1, 0.25, noise), Some(-1));
        assert_eq!(expected_refutation(Task::Agnostic, 0.1, 0.25, middle), None);
        assert_eq!(expected_refutation(Task::Realizable, 0.1, 0.0, noise), Some(-1));
    }
}
