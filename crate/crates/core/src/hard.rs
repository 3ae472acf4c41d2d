//! Lower-bound distribution families built from dual witnesses, together
//! with exact checks of every finite property they are supposed to satisfy.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    bayes_error, build_difference_matrix, labeled_index, labeled_point, max_sign_vertex, population_loss,
    ConceptClass, IndexedMatrix, LabeledDistribution, WeightedIndex, BRUTE_FORCE_CAP,
};
use crate::norms::gamma2_dual;
use crate::sdp::{self, Constraint, SdpProblem, SdpSettings};

/// Tolerance for the exact construction identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Slack on bounds that involve a computed γ₂*.
pub const NORM_TOL: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Geometric binning

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningResult {
    /// Indices of the selected bin, ascending.
    pub selected: Vec<usize>,
    /// `π(S)·min_{v∈S} a_v`.
    pub score: f64,
    /// `π(S)·2^{−(j+1)}`, the quantity the bin was chosen by.
    pub floor_score: f64,
    /// Selected level `j`; the bin is `(2^{−(j+1)}, 2^{−j}]`.
    pub level: usize,
    /// Number of levels `J = ⌈log₂(1/β)⌉`.
    pub levels: usize,
    pub cutoff: f64,
    /// `π(S)`.
    pub mass: f64,
}

impl BinningResult {
    /// `(Σ_v π(v)a_v − β)/(2J)`, the guaranteed lower bound on `score`.
    pub fn guarantee(a: &[f64], pi: &[f64], beta: f64) -> f64 {
        let levels = level_count(beta);
        let avg: f64 = a.iter().zip(pi).map(|(a, p)| a * p).sum();
        (avg - beta) / (2.0 * levels.max(1) as f64)
    }
}

fn level_count(beta: f64) -> usize {
    let l = (1.0 / beta).log2();
    // Guard against 1/β landing a hair above a power of two.
    let r = l.round();
    if (l - r).abs() < 1e-12 {
        r as usize
    } else {
        l.ceil() as usize
    }
}

/// Picks the dyadic bin of values above `beta` that maximizes `π(B_j)·2^{−(j+1)}`.
pub fn geometric_binning(a: &[f64], pi: &[f64], beta: f64) -> Result<BinningResult> {
    if a.len() != pi.len() || a.is_empty() {
        return Err(Error::InvalidInput("values and weights must be nonempty and of equal length".into()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, 1], got {beta}")));
    }
    if a.iter().any(|v| !(0.0..=1.0).contains(v)) || pi.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidInput("values must lie in [0,1] and weights must be nonnegative".into()));
    }
    let levels = level_count(beta);
    let mut mass = vec![0.0; levels];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for (v, (&x, &p)) in a.iter().zip(pi).enumerate() {
        if x <= beta || p == 0.0 {
            continue;
        }
        // j with 2^{−(j+1)} < x ≤ 2^{−j}.
        let mut j = 0;
        while j + 1 < levels && x <= 0.5f64.powi(j as i32 + 1) {
            j += 1;
        }
        mass[j] += p;
        members[j].push(v);
    }
    let mut best: Option<(usize, f64)> = None;
    for j in 0..levels {
        if members[j].is_empty() {
            continue;
        }
        let floor = mass[j] * 0.5f64.powi(j as i32 + 1);
        if best.is_none_or(|(_, f)| floor > f) {
            best = Some((j, floor));
        }
    }
    let (level, floor_score) = best.ok_or(Error::MassBelowCutoff { cutoff: beta })?;
    let selected = members[level].clone();
    let min = selected.iter().map(|&v| a[v]).fold(f64::INFINITY, f64::min);
    Ok(BinningResult { score: mass[level] * min, floor_score, level, levels, cutoff: beta, mass: mass[level], selected })
}

// ---------------------------------------------------------------------------
// Helpers

fn loss(dist: &LabeledDistribution, class: &ConceptClass, c: usize) -> f64 {
    population_loss(dist, class.concept(c)).expect("distribution and class share a domain")
}

fn distribution(domain: &[String], probs: Vec<f64>) -> Result<LabeledDistribution> {
    LabeledDistribution::new(domain.to_vec(), probs)
}

/// `min_h [loss_λ(h) + loss_μ(h)] − min_{c∈C} loss_λ(c) − min_{c∈C} loss_μ(c)`,
/// with `h` ranging over every labeling of the domain. Negative when no
/// concept is Bayes-optimal for `λ` or `μ`.
pub fn cross_optimality_gap(lambda: &LabeledDistribution, mu: &LabeledDistribution, class: &ConceptClass) -> Result<f64> {
    if lambda.domain() != class.domain() || mu.domain() != class.domain() {
        return Err(Error::DomainMismatch("distributions and class must share a domain".into()));
    }
    let joint: f64 = (0..class.domain_size())
        .map(|x| (lambda.prob(x, 1) + mu.prob(x, 1)).min(lambda.prob(x, -1) + mu.prob(x, -1)))
        .sum();
    Ok(joint - class.min_loss(lambda)? - class.min_loss(mu)?)
}

// ---------------------------------------------------------------------------
// Agnostic family

/// One supported pair `(c, c′)` of an agnostic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMember {
    /// Row of the difference matrix, `c·|C| + c′`.
    pub row: usize,
    pub concepts: (usize, usize),
    pub lambda: LabeledDistribution,
    pub mu: LabeledDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgnosticHardFamily {
    /// Weights aligned with `members`.
    pub pi: WeightedIndex,
    pub members: Vec<PairMember>,
    /// Witness over `C² × X` with `u = π·(λ − μ)(x, +1)` on supported rows.
    pub u: IndexedMatrix,
}

impl AgnosticHardFamily {
    /// Rows of `u` for the supported pairs, in member order.
    pub fn support_matrix(&self) -> IndexedMatrix {
        let rows: Vec<usize> = self.members.iter().map(|m| m.row).collect();
        self.u.select_rows(&rows)
    }
}

/// Exact checks of an agnostic family against its witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgnosticFamilyReport {
    /// `D•U`.
    pub inner_product: f64,
    /// `|D•U − Σ π·(loss_λ(c′) − loss_λ(c))|`.
    pub lambda_identity_error: f64,
    /// `|D•U − Σ π·(loss_μ(c) − loss_μ(c′))|`.
    pub mu_identity_error: f64,
    /// `max |u − π·(λ − μ)(x, +1)|`.
    pub recovery_error: f64,
    /// `max |κ_λ(x) − κ_μ(x)|`.
    pub marginal_error: f64,
    /// μ labels every supported point opposite to λ.
    pub labels_negated: bool,
    /// `loss_λ(c′) − loss_λ(c)` per member.
    pub gaps: Vec<f64>,
}

impl AgnosticFamilyReport {
    pub fn passes(&self) -> bool {
        self.lambda_identity_error <= IDENTITY_TOL
            && self.mu_identity_error <= IDENTITY_TOL
            && self.recovery_error <= IDENTITY_TOL
            && self.marginal_error <= IDENTITY_TOL
            && self.labels_negated
    }
}

/// Builds `π`, `λ`, `μ` from a sign-fixed witness over `C² × X`:
/// `π` is the row ℓ₁ mass, `λ` puts `|u_x|/π` on label `sign(u_x)` and `μ`
/// on the opposite label.
pub fn build_agnostic_family(class: &ConceptClass, u: &IndexedMatrix) -> Result<AgnosticHardFamily> {
    let k = class.len();
    if u.nrows() != k * k || u.ncols() != class.domain_size() {
        return Err(Error::InvalidInput("witness must have |C|² rows and |X| columns".into()));
    }
    let mut members = Vec::new();
    let mut masses = Vec::new();
    let mut labels = Vec::new();
    for row in 0..u.nrows() {
        let r = u.row(row);
        let pi: f64 = r.iter().map(|v| v.abs()).sum();
        if pi == 0.0 {
            continue;
        }
        let mut lam = vec![0.0; 2 * class.domain_size()];
        let mut mu = vec![0.0; 2 * class.domain_size()];
        for (x, &v) in r.iter().enumerate() {
            if v > 0.0 {
                lam[labeled_index(x, 1)] = v / pi;
                mu[labeled_index(x, -1)] = v / pi;
            } else if v < 0.0 {
                lam[labeled_index(x, -1)] = -v / pi;
                mu[labeled_index(x, 1)] = -v / pi;
            }
        }
        members.push(PairMember {
            row,
            concepts: (row / k, row % k),
            lambda: distribution(class.domain(), lam)?,
            mu: distribution(class.domain(), mu)?,
        });
        masses.push(pi);
        labels.push(u.row_labels()[row].clone());
    }
    if members.is_empty() {
        return Err(Error::InvalidInput("witness is identically zero".into()));
    }
    Ok(AgnosticHardFamily { pi: WeightedIndex::from_masses(labels, &masses)?, members, u: u.clone() })
}

/// Checks the construction identities of an unrefined family.
pub fn verify_agnostic_family(class: &ConceptClass, family: &AgnosticHardFamily) -> Result<AgnosticFamilyReport> {
    let d = build_difference_matrix(class);
    let inner = d.dot(&family.u)?;
    let mass: f64 = family.u.l1_norm();
    let (mut sum_l, mut sum_m, mut recovery, mut marginal) = (0.0, 0.0, 0.0f64, 0.0f64);
    let mut negated = true;
    let mut gaps = Vec::with_capacity(family.members.len());
    for (m, &w) in family.members.iter().zip(family.pi.weights()) {
        // π as raw row mass, so that the identities hold for unnormalized U.
        let p = w * mass;
        let (c, c2) = m.concepts;
        let gap = loss(&m.lambda, class, c2) - loss(&m.lambda, class, c);
        sum_l += p * gap;
        sum_m += p * (loss(&m.mu, class, c) - loss(&m.mu, class, c2));
        gaps.push(gap);
        for x in 0..class.domain_size() {
            let diff = m.lambda.prob(x, 1) - m.mu.prob(x, 1);
            recovery = recovery.max((family.u.get(m.row, x) - p * diff).abs());
            let (kl, km) = (m.lambda.prob(x, 1) + m.lambda.prob(x, -1), m.mu.prob(x, 1) + m.mu.prob(x, -1));
            marginal = marginal.max((kl - km).abs());
            if m.lambda.prob(x, 1) > 0.0 && m.mu.prob(x, 1) > 0.0 || m.lambda.prob(x, -1) > 0.0 && m.mu.prob(x, -1) > 0.0 {
                negated = false;
            }
        }
    }
    Ok(AgnosticFamilyReport {
        inner_product: inner,
        lambda_identity_error: (inner - sum_l).abs(),
        mu_identity_error: (inner - sum_m).abs(),
        recovery_error: recovery,
        marginal_error: marginal,
        labels_negated: negated,
        gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedAgnostic {
    /// `π̃`, `λ̃ = λ`, `μ̃`, and `Ũ` in place of `U`.
    pub family: AgnosticHardFamily,
    pub alpha: f64,
    pub tau: f64,
    /// `D•U` of the input witness.
    pub inner_product: f64,
    pub binning: BinningResult,
    /// `loss_λ̃(c′) − loss_λ̃(c)` per refined member.
    pub lambda_gaps: Vec<f64>,
    /// `score/π(S)`, which every λ̃ gap must reach.
    pub property1_bound: f64,
    pub property1_holds: bool,
    /// Smallest `loss_μ̃(c′) − loss_μ̃(c)` over refined members. Reported, not asserted.
    pub property2_min: f64,
    /// `cross_optimality_gap(λ̃, μ̃)` per refined member. Reported, not asserted.
    pub cross_gaps: Vec<f64>,
    pub gamma2_star_u: f64,
    pub gamma2_star_u_tilde: f64,
    /// `α·γ₂*(U)/(D•U)`.
    pub property3_bound: f64,
    pub property3_holds: bool,
    /// `max |Ũ − π̃·(λ̃ − μ̃)(x, +1)|`.
    pub recovery_error: f64,
}

/// Restricts a family to a dyadic bin of loss gaps and mixes `μ` toward `λ`.
pub fn refine_agnostic_family(
    class: &ConceptClass,
    family: &AgnosticHardFamily,
    alpha: f64,
    settings: &SdpSettings,
) -> Result<RefinedAgnostic> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let report = verify_agnostic_family(class, family)?;
    let mass = family.u.l1_norm();
    let inner = report.inner_product / mass;
    if inner <= alpha {
        return Err(Error::InvalidInput(format!("D•U = {inner} does not exceed alpha = {alpha}")));
    }
    let a: Vec<f64> = report.gaps.iter().map(|g| g.clamp(0.0, 1.0)).collect();
    let binning = geometric_binning(&a, family.pi.weights(), alpha / 4.0)?;
    let tau = alpha / inner;
    let ps = binning.mass;
    let t = tau * ps;
    let mut members = Vec::new();
    let mut masses = Vec::new();
    let mut labels = Vec::new();
    let mut u_tilde = family.u.map(|_| 0.0);
    for &i in &binning.selected {
        let m = &family.members[i];
        let mu = m.mu.mix(&m.lambda, t)?;
        members.push(PairMember { row: m.row, concepts: m.concepts, lambda: m.lambda.clone(), mu });
        masses.push(family.pi.weights()[i]);
        labels.push(family.pi.support()[i].clone());
    }
    for m in &members {
        for x in 0..class.domain_size() {
            u_tilde.set(m.row, x, tau * family.u.get(m.row, x) / mass);
        }
    }
    let pi = WeightedIndex::from_masses(labels, &masses)?;
    let refined = AgnosticHardFamily { pi, members, u: u_tilde };

    let lambda_gaps: Vec<f64> = refined
        .members
        .iter()
        .map(|m| loss(&m.lambda, class, m.concepts.1) - loss(&m.lambda, class, m.concepts.0))
        .collect();
    let property1_bound = binning.score / ps;
    let property1_holds = lambda_gaps.iter().all(|g| *g >= property1_bound - IDENTITY_TOL);
    let property2_min = refined
        .members
        .iter()
        .map(|m| loss(&m.mu, class, m.concepts.1) - loss(&m.mu, class, m.concepts.0))
        .fold(f64::INFINITY, f64::min);
    let cross_gaps = refined
        .members
        .iter()
        .map(|m| cross_optimality_gap(&m.lambda, &m.mu, class))
        .collect::<Result<Vec<_>>>()?;
    // Ũ = τ·U on S and π̃(λ̃ − μ̃) = π̃·τπ(S)(λ − μ) = τ·U/‖U‖₁ row by row.
    let mut recovery_error = 0.0f64;
    for (m, &w) in refined.members.iter().zip(refined.pi.weights()) {
        for x in 0..class.domain_size() {
            let diff = m.lambda.prob(x, 1) - m.mu.prob(x, 1);
            recovery_error = recovery_error.max((refined.u.get(m.row, x) - w * diff).abs());
        }
    }
    let u_norm = family.u.scale(1.0 / mass);
    let gamma2_star_u = gamma2_dual(&u_norm, settings)?.value;
    let gamma2_star_u_tilde = gamma2_dual(&refined.u, settings)?.value;
    let property3_bound = alpha * gamma2_star_u / inner;
    Ok(RefinedAgnostic {
        family: refined,
        alpha,
        tau,
        inner_product: inner,
        binning,
        lambda_gaps,
        property1_bound,
        property1_holds,
        property2_min,
        cross_gaps,
        gamma2_star_u,
        gamma2_star_u_tilde,
        property3_bound,
        property3_holds: gamma2_star_u_tilde <= property3_bound + NORM_TOL,
        recovery_error,
    })
}

// ---------------------------------------------------------------------------
// Realizable family

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMember {
    pub concept: usize,
    pub lambda: LabeledDistribution,
    pub mu: LabeledDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizableHardFamily {
    /// Weights aligned with `members`.
    pub pi: WeightedIndex,
    pub members: Vec<ConceptMember>,
    /// Witness over `C × (X×{±1})` with `u = π·(λ − μ)/2` on supported rows.
    pub u: IndexedMatrix,
    /// `E_{c∼π}[loss_{λ_c}(c)]`.
    pub delta: f64,
    pub alpha: f64,
}

impl RealizableHardFamily {
    /// Rows of `u` for the supported concepts, in member order.
    pub fn support_matrix(&self) -> IndexedMatrix {
        let rows: Vec<usize> = self.members.iter().map(|m| m.concept).collect();
        self.u.select_rows(&rows)
    }

    /// `loss_{λ_c}(c)` per member.
    pub fn lambda_losses(&self, class: &ConceptClass) -> Vec<f64> {
        self.members.iter().map(|m| loss(&m.lambda, class, m.concept)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizableFamilyReport {
    pub delta: f64,
    /// `2α/(1+α)`, which `Δ` must exceed.
    pub delta_threshold: f64,
    /// `|(1+α)Δ − 2α − 2Σ(u_off − α|u_on|)|`.
    pub delta_identity_error: f64,
    /// `max_c loss_{μ_c}(c)`.
    pub mu_loss_max: f64,
    /// `max |u − π·(λ − μ)/2|`.
    pub recovery_error: f64,
    pub row_sum_max: f64,
}

impl RealizableFamilyReport {
    pub fn passes(&self) -> bool {
        self.delta > self.delta_threshold
            && self.delta_identity_error <= IDENTITY_TOL
            && self.mu_loss_max <= IDENTITY_TOL
            && self.recovery_error <= IDENTITY_TOL
    }
}

/// `λ_c = 2U⁺_c/π(c)`, `μ_c = 2U⁻_c/π(c)` from a witness in `S_C` with `‖U‖₁ = 1`.
pub fn build_realizable_family(class: &ConceptClass, u: &IndexedMatrix, alpha: f64) -> Result<RealizableHardFamily> {
    if u.nrows() != class.len() || u.ncols() != 2 * class.domain_size() {
        return Err(Error::InvalidInput("witness must have |C| rows and 2|X| columns".into()));
    }
    crate::norms::validate_realizable_dual(u, class, 1e-10)?;
    let mut members = Vec::new();
    let mut masses = Vec::new();
    for c in 0..class.len() {
        let row = u.row(c);
        let pi: f64 = row.iter().map(|v| v.abs()).sum();
        if pi == 0.0 {
            continue;
        }
        let lam: Vec<f64> = row.iter().map(|&v| 2.0 * v.max(0.0) / pi).collect();
        let mu: Vec<f64> = row.iter().map(|&v| 2.0 * (-v).max(0.0) / pi).collect();
        members.push(ConceptMember {
            concept: c,
            lambda: distribution(class.domain(), lam)?,
            mu: distribution(class.domain(), mu)?,
        });
        masses.push(pi);
    }
    if members.is_empty() {
        return Err(Error::InvalidInput("witness is identically zero".into()));
    }
    let labels = members.iter().map(|m| class.name(m.concept).into()).collect();
    let pi = WeightedIndex::from_masses(labels, &masses)?;
    let delta = members.iter().zip(pi.weights()).map(|(m, w)| w * loss(&m.lambda, class, m.concept)).sum();
    let threshold = 2.0 * alpha / (1.0 + alpha);
    if delta <= threshold {
        return Err(Error::PropertyViolation(format!("witness too weak: Δ = {delta} ≤ 2α/(1+α) = {threshold}")));
    }
    Ok(RealizableHardFamily { pi, members, u: u.clone(), delta, alpha })
}

pub fn verify_realizable_family(class: &ConceptClass, family: &RealizableHardFamily) -> RealizableFamilyReport {
    let alpha = family.alpha;
    let (off, on) = crate::norms::realizable_dual_terms(&family.u, class);
    let mass = family.u.l1_norm();
    let mut recovery = 0.0f64;
    let mut mu_loss = 0.0f64;
    for (m, &w) in family.members.iter().zip(family.pi.weights()) {
        mu_loss = mu_loss.max(loss(&m.mu, class, m.concept));
        for col in 0..family.u.ncols() {
            let (x, y) = labeled_point(col);
            let diff = m.lambda.prob(x, y) - m.mu.prob(x, y);
            recovery = recovery.max((family.u.get(m.concept, col) - w * mass * diff / 2.0).abs());
        }
    }
    let row_sum_max = (0..family.u.nrows())
        .map(|c| family.u.row(c).iter().sum::<f64>().abs())
        .fold(0.0, f64::max);
    RealizableFamilyReport {
        delta: family.delta,
        delta_threshold: 2.0 * alpha / (1.0 + alpha),
        delta_identity_error: ((1.0 + alpha) * family.delta - 2.0 * alpha - 2.0 * (off - alpha * on)).abs(),
        mu_loss_max: mu_loss,
        recovery_error: recovery,
        row_sum_max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedRealizable {
    /// `π̃`, `λ̃`, `μ̃ = μ`, and `Ũ` in place of `U`.
    pub family: RealizableHardFamily,
    pub tau: f64,
    pub binning: BinningResult,
    /// `loss_{λ̃_c}(c)` per refined member.
    pub lambda_losses: Vec<f64>,
    /// `τ·score`, which every refined λ̃ loss must reach.
    pub loss_bound: f64,
    pub mu_loss_max: f64,
    /// `max |(λ̃ − μ̃) − τπ(S)(λ − μ)|` over refined members.
    pub difference_error: f64,
    pub gamma2_star_u: f64,
    pub gamma2_star_u_tilde: f64,
    /// `2α·γ₂*(U)/((1+α)Δ)`.
    pub contraction_bound: f64,
}

impl RefinedRealizable {
    pub fn passes(&self) -> bool {
        self.lambda_losses.iter().all(|l| *l >= self.loss_bound - IDENTITY_TOL)
            && self.mu_loss_max <= IDENTITY_TOL
            && self.difference_error <= IDENTITY_TOL
            && self.gamma2_star_u_tilde <= self.contraction_bound + NORM_TOL
    }
}

/// Restricts to a dyadic bin of `loss_{λ_c}(c)` and mixes `λ` toward `μ`.
pub fn refine_realizable_family(
    class: &ConceptClass,
    family: &RealizableHardFamily,
    settings: &SdpSettings,
) -> Result<RefinedRealizable> {
    let alpha = family.alpha;
    let a: Vec<f64> = family.lambda_losses(class).iter().map(|l| l.clamp(0.0, 1.0)).collect();
    let binning = geometric_binning(&a, family.pi.weights(), alpha / (1.0 + alpha))?;
    let tau = 2.0 * alpha / ((1.0 + alpha) * family.delta);
    let ps = binning.mass;
    let t = tau * ps;
    let mass = family.u.l1_norm();
    let mut members = Vec::new();
    let mut masses = Vec::new();
    let mut labels = Vec::new();
    let mut u_tilde = family.u.map(|_| 0.0);
    let mut difference_error = 0.0f64;
    for &i in &binning.selected {
        let m = &family.members[i];
        let lambda = m.lambda.mix(&m.mu, t)?;
        for col in 0..family.u.ncols() {
            let (x, y) = labeled_point(col);
            let lhs = lambda.prob(x, y) - m.mu.prob(x, y);
            let rhs = t * (m.lambda.prob(x, y) - m.mu.prob(x, y));
            difference_error = difference_error.max((lhs - rhs).abs());
            u_tilde.set(m.concept, col, tau * family.u.get(m.concept, col) / mass);
        }
        members.push(ConceptMember { concept: m.concept, lambda, mu: m.mu.clone() });
        masses.push(family.pi.weights()[i]);
        labels.push(family.pi.support()[i].clone());
    }
    let pi = WeightedIndex::from_masses(labels, &masses)?;
    let lambda_losses: Vec<f64> = members.iter().map(|m| loss(&m.lambda, class, m.concept)).collect();
    let mu_loss_max = members.iter().map(|m| loss(&m.mu, class, m.concept)).fold(0.0, f64::max);
    let delta = members.iter().zip(pi.weights()).map(|(m, w)| w * loss(&m.lambda, class, m.concept)).sum();
    let u_norm = family.u.scale(1.0 / mass);
    let gamma2_star_u = gamma2_dual(&u_norm, settings)?.value;
    let gamma2_star_u_tilde = gamma2_dual(&u_tilde, settings)?.value;
    Ok(RefinedRealizable {
        family: RealizableHardFamily { pi, members, u: u_tilde, delta, alpha },
        tau,
        loss_bound: tau * binning.score,
        binning,
        lambda_losses,
        mu_loss_max,
        difference_error,
        gamma2_star_u,
        gamma2_star_u_tilde,
        contraction_bound: 2.0 * alpha * gamma2_star_u / ((1.0 + alpha) * family.delta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedFamily {
    pub family: RealizableHardFamily,
    pub alpha: f64,
    /// `bayes_error(λ̂_c)` per member.
    pub bayes_errors: Vec<f64>,
    pub mu_loss_max: f64,
    /// `max |(λ̂ − μ̂) − ½(λ − μ)|`.
    pub difference_error: f64,
}

impl MixedFamily {
    pub fn passes(&self) -> bool {
        self.bayes_errors.iter().all(|b| *b > self.alpha / 2.0)
            && self.mu_loss_max <= IDENTITY_TOL
            && self.difference_error <= IDENTITY_TOL
    }
}

/// `λ̂_c = ½λ_c + ½σ_c` and `μ̂_c = ½μ_c + ½σ_c`, where `σ_c` is the marginal
/// of `λ_c` labeled by `c`. Requires `loss_{λ_c}(c) > α` on the support.
pub fn mix_sigma(class: &ConceptClass, family: &RealizableHardFamily, alpha: f64) -> Result<MixedFamily> {
    let losses = family.lambda_losses(class);
    if let Some((m, l)) = family.members.iter().zip(&losses).find(|(_, l)| **l <= alpha) {
        return Err(Error::InvalidInput(format!(
            "loss of λ for concept {} is {l}, not above alpha = {alpha}",
            class.name(m.concept)
        )));
    }
    let mut members = Vec::with_capacity(family.members.len());
    let mut bayes = Vec::with_capacity(family.members.len());
    let mut difference_error = 0.0f64;
    for m in &family.members {
        let sigma = LabeledDistribution::labeled_by(class.domain().to_vec(), &m.lambda.marginal(), class.concept(m.concept))?;
        let lambda = m.lambda.mix(&sigma, 0.5)?;
        let mu = m.mu.mix(&sigma, 0.5)?;
        for col in 0..2 * class.domain_size() {
            let (x, y) = labeled_point(col);
            let lhs = lambda.prob(x, y) - mu.prob(x, y);
            let rhs = 0.5 * (m.lambda.prob(x, y) - m.mu.prob(x, y));
            difference_error = difference_error.max((lhs - rhs).abs());
        }
        bayes.push(bayes_error(&lambda));
        members.push(ConceptMember { concept: m.concept, lambda, mu });
    }
    let mu_loss_max = members.iter().map(|m| loss(&m.mu, class, m.concept)).fold(0.0, f64::max);
    let delta = members.iter().zip(family.pi.weights()).map(|(m, w)| w * loss(&m.lambda, class, m.concept)).sum();
    Ok(MixedFamily {
        family: RealizableHardFamily { pi: family.pi.clone(), members, u: family.u.scale(0.5), delta, alpha },
        alpha,
        bayes_errors: bayes,
        mu_loss_max,
        difference_error,
    })
}

// ---------------------------------------------------------------------------
// Reweighting

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweighting {
    /// `π̂`, on the support of the input weights.
    pub pi_hat: WeightedIndex,
    /// `‖M‖_{ℓ∞→L2(π̂)}`; `None` when the column count exceeds the cap.
    pub norm: Option<f64>,
    pub gamma2_star: f64,
    /// `4·γ₂*(Ũ)`.
    pub bound: f64,
    /// True when the cap was exceeded and the input weights were returned.
    pub capped: bool,
    /// Sign vectors generated by the cutting-plane loop.
    pub vertices: usize,
}

impl Reweighting {
    pub fn passes(&self) -> bool {
        self.norm.is_some_and(|n| n <= self.bound + NORM_TOL)
    }
}

fn vertex_values(m: &IndexedMatrix, signs: &[i8]) -> Vec<f64> {
    let f: Vec<f64> = signs.iter().map(|&s| f64::from(s)).collect();
    m.mul_vec(&f).into_iter().map(|v| v * v).collect()
}

/// `min_t` s.t. `Σ_i π_i v_i(f) ≤ t` for every listed vertex, `π` in the simplex.
fn solve_master(values: &[Vec<f64>], k: usize, settings: &SdpSettings) -> Result<(Vec<f64>, f64)> {
    let nv = values.len();
    // Variables: π (k), t, one slack per vertex.
    let mut p = SdpProblem::new(0, k + 1 + nv);
    p.objective_lp[k] = 1.0;
    for (f, v) in values.iter().enumerate() {
        let mut lp: Vec<(usize, f64)> = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect();
        lp.push((k, -1.0));
        lp.push((k + 1 + f, 1.0));
        p.add_constraint(Constraint { psd: vec![], lp, rhs: 0.0 });
    }
    p.add_constraint(Constraint { psd: vec![], lp: (0..k).map(|i| (i, 1.0)).collect(), rhs: 1.0 });
    let sol = sdp::solve(&p, settings)?;
    let mut pi: Vec<f64> = sol.x_lp[..k].iter().map(|v| v.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    Ok((pi, sol.x_lp[k]))
}

/// Searches for `π̂` on the support of `pi` minimizing `‖M‖_{ℓ∞→L2(π̂)}`,
/// where row `i` of `M` is `u_tilde_i / π_i`.
pub fn reweight_pi_hat(u_tilde: &IndexedMatrix, pi: &WeightedIndex, settings: &SdpSettings) -> Result<Reweighting> {
    if u_tilde.nrows() != pi.len() {
        return Err(Error::InvalidInput("witness rows and weights are not aligned".into()));
    }
    let gamma2_star = gamma2_dual(u_tilde, settings)?.value;
    let bound = 4.0 * gamma2_star;
    let support: Vec<usize> = (0..pi.len()).filter(|&i| pi.weights()[i] > 0.0).collect();
    if u_tilde.ncols() > BRUTE_FORCE_CAP {
        return Ok(Reweighting { pi_hat: pi.clone(), norm: None, gamma2_star, bound, capped: true, vertices: 0 });
    }
    let full_m = IndexedMatrix::from_fn(u_tilde.row_labels().to_vec(), u_tilde.col_labels().to_vec(), |i, j| {
        let w = pi.weights()[i];
        if w > 0.0 {
            u_tilde.get(i, j) / w
        } else {
            0.0
        }
    });
    let m = full_m.select_rows(&support);
    let k = support.len();
    // Seed with each row's own best vertex and the vertex at the input weights.
    let mut vertices: Vec<Vec<i8>> = (0..k)
        .map(|i| m.row(i).iter().map(|v| if *v < 0.0 { -1 } else { 1 }).collect())
        .collect();
    let start: Vec<f64> = support.iter().map(|&i| pi.weights()[i]).collect();
    vertices.push(max_sign_vertex(&m, &start).signs);
    vertices.sort();
    vertices.dedup();
    let mut values: Vec<Vec<f64>> = vertices.iter().map(|f| vertex_values(&m, f)).collect();
    let mut weights = start;
    for _ in 0..500 {
        let (w, t) = solve_master(&values, k, settings)?;
        weights = w;
        let best = max_sign_vertex(&m, &weights);
        if best.value_sq <= t + settings.tolerance * t.max(1.0) || vertices.contains(&best.signs) {
            break;
        }
        values.push(vertex_values(&m, &best.signs));
        vertices.push(best.signs);
    }
    let norm = max_sign_vertex(&m, &weights).value_sq.sqrt();
    let mut full = vec![0.0; pi.len()];
    for (&i, &w) in support.iter().zip(&weights) {
        full[i] = w;
    }
    Ok(Reweighting {
        pi_hat: WeightedIndex::new(pi.support().to_vec(), full)?,
        norm: Some(norm),
        gamma2_star,
        bound,
        capped: false,
        vertices: vertices.len(),
    })
}
