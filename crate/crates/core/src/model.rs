//! Finite concept classes, labeled distributions, datasets and the matrices
//! built from them, together with the elementary norms and losses.
//!
//! Labeled points `(x, y)` with `y ∈ {−1, +1}` are laid out as columns in the
//! order `(x₀,+1), (x₀,−1), (x₁,+1), …`; see [`labeled_index`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex as RandWeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability mass; deviations below it are renormalized.
pub const PROB_TOL: f64 = 1e-12;

/// Default column cap for the exact ℓ∞→L2(π) norm (2²² sign vectors).
pub const BRUTE_FORCE_CAP: usize = 22;

/// Column index of the labeled point `(x, y)`.
#[inline]
pub fn labeled_index(x: usize, y: i8) -> usize {
    2 * x + usize::from(y < 0)
}

/// Inverse of [`labeled_index`].
#[inline]
pub fn labeled_point(col: usize) -> (usize, i8) {
    (col / 2, if col.is_multiple_of(2) { 1 } else { -1 })
}

pub fn label_str(y: i8) -> &'static str {
    if y > 0 {
        "+1"
    } else {
        "-1"
    }
}

/// Column labels `point:+1`, `point:-1` for every point of `domain`.
pub fn labeled_point_labels(domain: &[String]) -> Vec<String> {
    domain
        .iter()
        .flat_map(|p| [format!("{p}:+1"), format!("{p}:-1")])
        .collect()
}

fn check_sign(v: i8) -> Result<()> {
    if v == 1 || v == -1 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("sign entries must be ±1, got {v}")))
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate {what} `{l}`")));
        }
    }
    Ok(())
}

/// Validates nonnegativity and unit mass, renormalizing small drift.
fn normalize_probs(probs: &mut [f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidInput("probabilities must be finite and nonnegative".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::NotNormalized { sum });
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ConceptClass

/// A finite domain together with a set of distinct ±1-valued concepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConceptClassRepr", into = "ConceptClassRepr")]
pub struct ConceptClass {
    domain: Vec<String>,
    names: Vec<String>,
    concepts: Vec<Vec<i8>>,
}

#[derive(Serialize, Deserialize)]
struct NamedConcept {
    name: String,
    values: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct ConceptClassRepr {
    domain: Vec<String>,
    concepts: Vec<NamedConcept>,
}

impl TryFrom<ConceptClassRepr> for ConceptClass {
    type Error = Error;
    fn try_from(r: ConceptClassRepr) -> Result<Self> {
        ConceptClass::new(r.domain, r.concepts.into_iter().map(|c| (c.name, c.values)).collect())
    }
}

impl From<ConceptClass> for ConceptClassRepr {
    fn from(c: ConceptClass) -> Self {
        ConceptClassRepr {
            domain: c.domain,
            concepts: c
                .names
                .into_iter()
                .zip(c.concepts)
                .map(|(name, values)| NamedConcept { name, values })
                .collect(),
        }
    }
}

impl ConceptClass {
    pub fn new(domain: Vec<String>, concepts: Vec<(String, Vec<i8>)>) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::InvalidInput("domain must contain at least one point".into()));
        }
        if concepts.is_empty() {
            return Err(Error::InvalidInput("concept class must be nonempty".into()));
        }
        check_unique(&domain, "point")?;
        let (names, concepts): (Vec<String>, Vec<Vec<i8>>) = concepts.into_iter().unzip();
        check_unique(&names, "concept name")?;
        let mut seen = BTreeSet::new();
        for (name, c) in names.iter().zip(&concepts) {
            if c.len() != domain.len() {
                return Err(Error::InvalidInput(format!(
                    "concept `{name}` has length {} but the domain has {} points",
                    c.len(),
                    domain.len()
                )));
            }
            for &v in c {
                check_sign(v)?;
            }
            if !seen.insert(c.clone()) {
                return Err(Error::InvalidInput(format!("concept `{name}` duplicates an earlier concept")));
            }
        }
        Ok(ConceptClass { domain, names, concepts })
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn domain_size(&self) -> usize {
        self.domain.len()
    }

    /// Number of concepts.
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn concept(&self, i: usize) -> &[i8] {
        &self.concepts[i]
    }

    pub fn concepts(&self) -> &[Vec<i8>] {
        &self.concepts
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn point_index(&self, point: &str) -> Option<usize> {
        self.domain.iter().position(|p| p == point)
    }

    pub fn is_negation_closed(&self) -> bool {
        let set: BTreeSet<&[i8]> = self.concepts.iter().map(|c| c.as_slice()).collect();
        self.concepts
            .iter()
            .all(|c| set.contains(c.iter().map(|v| -v).collect::<Vec<_>>().as_slice()))
    }

    /// The class together with the negation of each of its concepts.
    pub fn negation_closure(&self) -> ConceptClass {
        let mut seen: BTreeSet<Vec<i8>> = self.concepts.iter().cloned().collect();
        let mut names = self.names.clone();
        let mut concepts = self.concepts.clone();
        for (name, c) in self.names.iter().zip(&self.concepts) {
            let neg: Vec<i8> = c.iter().map(|v| -v).collect();
            if seen.insert(neg.clone()) {
                let mut neg_name = format!("neg({name})");
                while names.contains(&neg_name) {
                    neg_name.push('\'');
                }
                names.push(neg_name);
                concepts.push(neg);
            }
        }
        ConceptClass { domain: self.domain.clone(), names, concepts }
    }

    /// Row labels `(c,c')` of the difference matrix, in row-major pair order.
    pub fn pair_labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len() * self.len());
        for a in &self.names {
            for b in &self.names {
                out.push(format!("({a},{b})"));
            }
        }
        out
    }

    fn check_hypothesis(&self, hyp: &[i8]) -> Result<()> {
        if hyp.len() != self.domain.len() {
            return Err(Error::DomainMismatch(format!(
                "hypothesis has length {} but the domain has {} points",
                hyp.len(),
                self.domain.len()
            )));
        }
        hyp.iter().try_for_each(|&v| check_sign(v))
    }
}

// ---------------------------------------------------------------------------
// IndexedMatrix

/// Dense row-major real matrix whose rows and columns carry labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexedMatrixRepr")]
pub struct IndexedMatrix {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct IndexedMatrixRepr {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    entries: Vec<f64>,
}

impl TryFrom<IndexedMatrixRepr> for IndexedMatrix {
    type Error = Error;
    fn try_from(r: IndexedMatrixRepr) -> Result<Self> {
        IndexedMatrix::new(r.row_labels, r.col_labels, r.entries)
    }
}

impl IndexedMatrix {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != row_labels.len() * col_labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} entries for a {}x{} matrix",
                entries.len(),
                row_labels.len(),
                col_labels.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(IndexedMatrix { row_labels, col_labels, entries })
    }

    pub fn from_fn(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let (r, c) = (row_labels.len(), col_labels.len());
        let mut entries = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                entries.push(f(i, j));
            }
        }
        IndexedMatrix { row_labels, col_labels, entries }
    }

    /// Matrix with generic labels `r0, r1, …` and `c0, c1, …`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        IndexedMatrix::new(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            (0..cols).map(|j| format!("c{j}")).collect(),
            rows.iter().flatten().copied().collect(),
        )
    }

    pub fn nrows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.ncols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let c = self.ncols();
        self.entries[i * c + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.ncols();
        &self.entries[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.get(i, j)).collect()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> IndexedMatrix {
        IndexedMatrix {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            entries: self.entries.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> IndexedMatrix {
        self.map(|v| v * s)
    }

    pub fn transpose(&self) -> IndexedMatrix {
        IndexedMatrix::from_fn(self.col_labels.clone(), self.row_labels.clone(), |i, j| self.get(j, i))
    }

    pub fn select_rows(&self, rows: &[usize]) -> IndexedMatrix {
        IndexedMatrix::from_fn(
            rows.iter().map(|&i| self.row_labels[i].clone()).collect(),
            self.col_labels.clone(),
            |i, j| self.get(rows[i], j),
        )
    }

    pub fn matmul(&self, other: &IndexedMatrix) -> Result<IndexedMatrix> {
        if self.ncols() != other.nrows() {
            return Err(Error::InvalidInput(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows(),
                self.ncols(),
                other.nrows(),
                other.ncols()
            )));
        }
        let k = self.ncols();
        Ok(IndexedMatrix::from_fn(self.row_labels.clone(), other.col_labels.clone(), |i, j| {
            (0..k).map(|l| self.get(i, l) * other.get(l, j)).sum()
        }))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_same_shape(&self, other: &IndexedMatrix) -> Result<()> {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.nrows(),
                self.ncols(),
                other.nrows(),
                other.ncols()
            )));
        }
        Ok(())
    }

    /// Frobenius inner product `Σ a_ij b_ij`.
    pub fn dot(&self, other: &IndexedMatrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum())
    }

    pub fn add(&self, other: &IndexedMatrix) -> Result<IndexedMatrix> {
        self.check_same_shape(other)?;
        Ok(IndexedMatrix {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &IndexedMatrix) -> Result<IndexedMatrix> {
        self.add(&other.scale(-1.0))
    }

    /// Entrywise ℓ1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

// ---------------------------------------------------------------------------
// LabeledDistribution

/// Probability table over `X × {−1,+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct LabeledDistribution {
    domain: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    domain: Vec<String>,
    probs: Vec<(String, i8, f64)>,
}

impl TryFrom<DistributionRepr> for LabeledDistribution {
    type Error = Error;
    fn try_from(r: DistributionRepr) -> Result<Self> {
        LabeledDistribution::from_table(r.domain, &r.probs)
    }
}

impl From<LabeledDistribution> for DistributionRepr {
    fn from(d: LabeledDistribution) -> Self {
        let probs = d
            .probs
            .iter()
            .enumerate()
            .map(|(col, &p)| {
                let (x, y) = labeled_point(col);
                (d.domain[x].clone(), y, p)
            })
            .collect();
        DistributionRepr { domain: d.domain, probs }
    }
}

impl LabeledDistribution {
    /// `probs` is indexed by [`labeled_index`] and has length `2|X|`.
    pub fn new(domain: Vec<String>, mut probs: Vec<f64>) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::InvalidInput("empty domain".into()));
        }
        check_unique(&domain, "point")?;
        if probs.len() != 2 * domain.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} probabilities, got {}",
                2 * domain.len(),
                probs.len()
            )));
        }
        normalize_probs(&mut probs)?;
        Ok(LabeledDistribution { domain, probs })
    }

    /// Builds from `(point, label, prob)` triples; missing entries are zero.
    pub fn from_table(domain: Vec<String>, table: &[(String, i8, f64)]) -> Result<Self> {
        let mut probs = vec![0.0; 2 * domain.len()];
        for (point, y, p) in table {
            check_sign(*y)?;
            let x = domain
                .iter()
                .position(|d| d == point)
                .ok_or_else(|| Error::DomainMismatch(format!("unknown point `{point}`")))?;
            probs[labeled_index(x, *y)] += p;
        }
        LabeledDistribution::new(domain, probs)
    }

    pub fn point_mass(domain: Vec<String>, x: usize, y: i8) -> Result<Self> {
        let mut probs = vec![0.0; 2 * domain.len()];
        check_sign(y)?;
        if x >= domain.len() {
            return Err(Error::DomainMismatch(format!("point index {x} out of range")));
        }
        probs[labeled_index(x, y)] = 1.0;
        LabeledDistribution::new(domain, probs)
    }

    /// Distribution with marginal `marginal` whose labels follow `labels`.
    pub fn labeled_by(domain: Vec<String>, marginal: &[f64], labels: &[i8]) -> Result<Self> {
        if marginal.len() != domain.len() || labels.len() != domain.len() {
            return Err(Error::DomainMismatch("marginal/labels length differs from domain".into()));
        }
        let mut probs = vec![0.0; 2 * domain.len()];
        for (x, (&m, &y)) in marginal.iter().zip(labels).enumerate() {
            check_sign(y)?;
            probs[labeled_index(x, y)] = m;
        }
        LabeledDistribution::new(domain, probs)
    }

    /// Uniform marginal with independent fair-coin labels.
    pub fn uniform_labels(domain: Vec<String>) -> Result<Self> {
        let k = 2 * domain.len();
        LabeledDistribution::new(domain, vec![1.0 / k as f64; k])
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: usize, y: i8) -> f64 {
        self.probs[labeled_index(x, y)]
    }

    pub fn marginal(&self) -> Vec<f64> {
        self.probs.chunks(2).map(|p| p[0] + p[1]).collect()
    }

    /// Swaps the two labels at every point.
    pub fn flip_labels(&self) -> LabeledDistribution {
        LabeledDistribution {
            domain: self.domain.clone(),
            probs: self.probs.chunks(2).flat_map(|p| [p[1], p[0]]).collect(),
        }
    }

    /// Same marginal, every point relabeled by `labels`.
    pub fn relabel(&self, labels: &[i8]) -> Result<LabeledDistribution> {
        LabeledDistribution::labeled_by(self.domain.clone(), &self.marginal(), labels)
    }

    /// The mixture `w·self + (1−w)·other`.
    pub fn mix(&self, other: &LabeledDistribution, w: f64) -> Result<LabeledDistribution> {
        self.check_domain(other.domain())?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidInput(format!("mixture weight {w} outside [0,1]")));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        LabeledDistribution::new(self.domain.clone(), probs)
    }

    pub(crate) fn check_domain(&self, domain: &[String]) -> Result<()> {
        if self.domain != domain {
            return Err(Error::DomainMismatch("distributions are over different domains".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Dataset

/// A list of labeled records over a declared domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    domain: Vec<String>,
    records: Vec<(usize, i8)>,
}

impl Dataset {
    pub fn new(domain: Vec<String>, records: Vec<(usize, i8)>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("dataset must contain at least one record".into()));
        }
        for &(x, y) in &records {
            check_sign(y)?;
            if x >= domain.len() {
                return Err(Error::DomainMismatch(format!("record point index {x} outside the domain")));
            }
        }
        Ok(Dataset { domain, records })
    }

    /// Builds from point identifiers.
    pub fn from_named(domain: Vec<String>, records: &[(String, i8)]) -> Result<Self> {
        let recs = records
            .iter()
            .map(|(p, y)| {
                domain
                    .iter()
                    .position(|d| d == p)
                    .map(|x| (x, *y))
                    .ok_or_else(|| Error::DomainMismatch(format!("unknown point `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(domain, recs)
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn records(&self) -> &[(usize, i8)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Counts per labeled point, indexed by [`labeled_index`].
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; 2 * self.domain.len()];
        for &(x, y) in &self.records {
            h[labeled_index(x, y)] += 1;
        }
        h
    }

    /// Column index of every record in the labeled-point layout.
    pub fn columns(&self) -> Vec<usize> {
        self.records.iter().map(|&(x, y)| labeled_index(x, y)).collect()
    }
}

// ---------------------------------------------------------------------------
// WeightedIndex

/// A probability distribution over a finite labeled index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightedIndexRepr")]
pub struct WeightedIndex {
    support: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct WeightedIndexRepr {
    support: Vec<String>,
    weights: Vec<f64>,
}

impl TryFrom<WeightedIndexRepr> for WeightedIndex {
    type Error = Error;
    fn try_from(r: WeightedIndexRepr) -> Result<Self> {
        WeightedIndex::new(r.support, r.weights)
    }
}

impl WeightedIndex {
    pub fn new(support: Vec<String>, mut weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(Error::InvalidInput("support and weights must be nonempty and of equal length".into()));
        }
        check_unique(&support, "support label")?;
        normalize_probs(&mut weights)?;
        Ok(WeightedIndex { support, weights })
    }

    pub fn uniform(support: Vec<String>) -> Result<Self> {
        let k = support.len().max(1);
        let w = vec![1.0 / k as f64; support.len()];
        WeightedIndex::new(support, w)
    }

    /// Normalizes arbitrary nonnegative masses.
    pub fn from_masses(support: Vec<String>, masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| *m < 0.0) {
            return Err(Error::InvalidInput("masses must be nonnegative with positive total".into()));
        }
        WeightedIndex::new(support, masses.iter().map(|m| m / total).collect())
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Matrices

/// Rows indexed by concepts, columns by points, entries `c(x)`.
pub fn build_concept_matrix(class: &ConceptClass) -> IndexedMatrix {
    IndexedMatrix::from_fn(class.names().to_vec(), class.domain().to_vec(), |i, j| {
        f64::from(class.concept(i)[j])
    })
}

/// Rows indexed by ordered pairs `(c,c')`, entries `(c(x) − c'(x))/2`.
pub fn build_difference_matrix(class: &ConceptClass) -> IndexedMatrix {
    let k = class.len();
    IndexedMatrix::from_fn(class.pair_labels(), class.domain().to_vec(), |row, j| {
        let (a, b) = (row / k, row % k);
        0.5 * (f64::from(class.concept(a)[j]) - f64::from(class.concept(b)[j]))
    })
}

/// Rows indexed by concepts, columns by labeled points, entries `1[c(x) ≠ y]`.
pub fn build_loss_query_matrix(class: &ConceptClass) -> IndexedMatrix {
    IndexedMatrix::from_fn(
        class.names().to_vec(),
        labeled_point_labels(class.domain()),
        |i, col| {
            let (x, y) = labeled_point(col);
            if class.concept(i)[x] != y {
                1.0
            } else {
                0.0
            }
        },
    )
}

// ---------------------------------------------------------------------------
// Losses

fn check_hyp_len(domain_len: usize, hyp: &[i8]) -> Result<()> {
    if hyp.len() != domain_len {
        return Err(Error::DomainMismatch(format!(
            "hypothesis has length {} but the domain has {domain_len} points",
            hyp.len()
        )));
    }
    hyp.iter().try_for_each(|&v| check_sign(v))
}

/// `Pr_{(x,y)∼dist}[hyp(x) ≠ y]`.
pub fn population_loss(dist: &LabeledDistribution, hyp: &[i8]) -> Result<f64> {
    check_hyp_len(dist.domain().len(), hyp)?;
    Ok(hyp.iter().enumerate().map(|(x, &h)| dist.prob(x, -h)).sum())
}

/// Fraction of records with `hyp(x) ≠ y`.
pub fn empirical_loss(data: &Dataset, hyp: &[i8]) -> Result<f64> {
    check_hyp_len(data.domain().len(), hyp)?;
    let wrong = data.records().iter().filter(|&&(x, y)| hyp[x] != y).count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Minimum population loss over all hypotheses: `Σ_x min(p(x,+1), p(x,−1))`.
pub fn bayes_error(dist: &LabeledDistribution) -> f64 {
    dist.probs().chunks(2).map(|p| p[0].min(p[1])).sum()
}

/// The pointwise-majority hypothesis (ties go to +1).
pub fn bayes_hypothesis(dist: &LabeledDistribution) -> Vec<i8> {
    dist.probs().chunks(2).map(|p| if p[0] >= p[1] { 1 } else { -1 }).collect()
}

impl ConceptClass {
    /// Population loss of every concept.
    pub fn losses(&self, dist: &LabeledDistribution) -> Result<Vec<f64>> {
        dist.check_domain(self.domain())?;
        self.concepts.iter().map(|c| population_loss(dist, c)).collect()
    }

    /// `min_{c∈C} loss_dist(c)`.
    pub fn min_loss(&self, dist: &LabeledDistribution) -> Result<f64> {
        Ok(self.losses(dist)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn validate_hypothesis(&self, hyp: &[i8]) -> Result<()> {
        self.check_hypothesis(hyp)
    }
}

// ---------------------------------------------------------------------------
// Norms

/// Selects how [`operator_norm_inf_to_l2`] evaluates the maximum over sign vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorNormMethod {
    /// Exhaustive enumeration; errors above `cap` columns.
    Exact { cap: usize },
    /// Lower bound from random sign vectors followed by coordinate ascent.
    Sampled { samples: usize, seed: u64 },
}

impl Default for OperatorNormMethod {
    fn default() -> Self {
        OperatorNormMethod::Exact { cap: BRUTE_FORCE_CAP }
    }
}

/// Maximizer of `Σ_v w_v (M f)_v²` over sign vectors `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVertex {
    pub value_sq: f64,
    pub signs: Vec<i8>,
}

fn weighted_sq(weights: &[f64], p: &[f64]) -> f64 {
    weights.iter().zip(p).map(|(w, v)| w * v * v).sum()
}

/// Exhaustive maximization over `{±1}^cols` in Gray-code order.
///
/// The objective is even in `f`, so the first coordinate is fixed to +1.
pub(crate) fn max_sign_vertex(m: &IndexedMatrix, weights: &[f64]) -> SignVertex {
    let (rows, cols) = (m.nrows(), m.ncols());
    if cols == 0 {
        return SignVertex { value_sq: 0.0, signs: Vec::new() };
    }
    let mut f = vec![1i8; cols];
    let mut p: Vec<f64> = (0..rows).map(|i| m.row(i).iter().sum()).collect();
    let mut best = weighted_sq(weights, &p);
    let mut best_f = f.clone();
    let steps: u64 = 1u64 << (cols - 1);
    for t in 1..steps {
        let g = t.trailing_zeros() as usize + 1;
        let s = f64::from(f[g]);
        for (i, pi) in p.iter_mut().enumerate() {
            *pi -= 2.0 * s * m.get(i, g);
        }
        f[g] = -f[g];
        let v = weighted_sq(weights, &p);
        if v > best {
            best = v;
            best_f.copy_from_slice(&f);
        }
    }
    // Recompute exactly for the maximizer to shed incremental rounding.
    let fv: Vec<f64> = best_f.iter().map(|&s| f64::from(s)).collect();
    let value_sq = weighted_sq(weights, &m.mul_vec(&fv));
    SignVertex { value_sq, signs: best_f }
}

fn ascend_signs(m: &IndexedMatrix, weights: &[f64], f: &mut [i8]) -> f64 {
    let fv: Vec<f64> = f.iter().map(|&s| f64::from(s)).collect();
    let mut p = m.mul_vec(&fv);
    let mut cur = weighted_sq(weights, &p);
    loop {
        let mut improved = false;
        for g in 0..f.len() {
            let s = f64::from(f[g]);
            let trial: Vec<f64> = p.iter().enumerate().map(|(i, v)| v - 2.0 * s * m.get(i, g)).collect();
            let v = weighted_sq(weights, &trial);
            if v > cur + 1e-15 {
                cur = v;
                p = trial;
                f[g] = -f[g];
                improved = true;
            }
        }
        if !improved {
            return cur;
        }
    }
}

/// `max_{f∈{±1}^cols} sqrt(Σ_v π(v)·(M f)_v²)`.
///
/// The squared objective is convex in `f`, so its maximum over the ℓ∞ ball is
/// attained at a sign vector and enumeration is exact.
pub fn operator_norm_inf_to_l2(
    m: &IndexedMatrix,
    pi: &WeightedIndex,
    method: OperatorNormMethod,
) -> Result<f64> {
    if pi.len() != m.nrows() {
        return Err(Error::InvalidInput(format!(
            "weights index {} rows but the matrix has {}",
            pi.len(),
            m.nrows()
        )));
    }
    match method {
        OperatorNormMethod::Exact { cap } => {
            if m.ncols() > cap {
                return Err(Error::BruteForceCap { what: "operator norm", cols: m.ncols(), cap });
            }
            Ok(max_sign_vertex(m, pi.weights()).value_sq.sqrt())
        }
        OperatorNormMethod::Sampled { samples, seed } => {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best = 0.0f64;
            for _ in 0..samples.max(1) {
                let mut f: Vec<i8> = (0..m.ncols()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
                best = best.max(ascend_signs(m, pi.weights(), &mut f));
            }
            Ok(best.sqrt())
        }
    }
}

/// The three elementary operator norms of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementaryNorms {
    /// Largest absolute entry.
    pub norm_1_to_inf: f64,
    /// Largest column ℓ2 norm.
    pub norm_1_to_2: f64,
    /// Largest row ℓ2 norm.
    pub norm_2_to_inf: f64,
}

pub fn elementary_norms(m: &IndexedMatrix) -> ElementaryNorms {
    let col = (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m.get(i, j).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let row = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    ElementaryNorms { norm_1_to_inf: m.max_abs(), norm_1_to_2: col, norm_2_to_inf: row }
}

// ---------------------------------------------------------------------------
// Sampling

/// `n` i.i.d. draws from `dist`, deterministic in `seed`.
pub fn sample(dist: &LabeledDistribution, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let table = RandWeightedIndex::new(dist.probs())
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n).map(|_| labeled_point(table.sample(&mut rng))).collect();
    Dataset::new(dist.domain().to_vec(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    fn two_concepts() -> ConceptClass {
        ConceptClass::new(
            dom(2),
            vec![("c1".to_string(), vec![1, 1]), ("c2".to_string(), vec![1, -1])],
        )
        .unwrap()
    }

    #[test]
    fn concept_matrix_of_two_concepts() {
        let w = build_concept_matrix(&two_concepts());
        assert_eq!(w.entries(), &[1.0, 1.0, 1.0, -1.0]);
        assert_eq!(w.row_labels(), &["c1", "c2"]);
    }

    #[test]
    fn singleton_concept_matrix() {
        let c = ConceptClass::new(dom(1), vec![("c".into(), vec![1])]).unwrap();
        assert_eq!(build_concept_matrix(&c).entries(), &[1.0]);
    }

    #[test]
    fn threshold_concept_matrix() {
        let c = ConceptClass::new(
            dom(3),
            (1..=4)
                .map(|k| (format!("t{k}"), (1..=3).map(|x| if x >= k { 1 } else { -1 }).collect()))
                .collect(),
        )
        .unwrap();
        let w = build_concept_matrix(&c);
        assert_eq!((w.nrows(), w.ncols()), (4, 3));
        for k in 0..4 {
            for x in 0..3 {
                assert_eq!(w.get(k, x), if x >= k { 1.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn difference_matrix_rows() {
        let d = build_difference_matrix(&two_concepts());
        assert_eq!(d.row(0), &[0.0, 0.0]);
        assert_eq!(d.row(1), &[0.0, 1.0]);
        assert_eq!(d.row(2), &[0.0, -1.0]);
        assert_eq!(d.row(3), &[0.0, 0.0]);
        assert_eq!(d.row_labels()[1], "(c1,c2)");
    }

    #[test]
    fn difference_row_of_negation_pair_is_concept() {
        let c = ConceptClass::new(dom(3), vec![("a".into(), vec![1, -1, 1]), ("b".into(), vec![-1, 1, -1])]).unwrap();
        let d = build_difference_matrix(&c);
        assert_eq!(d.row(1), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn loss_query_matrix_entries() {
        let c = ConceptClass::new(dom(2), vec![("c".into(), vec![1, -1]), ("one".into(), vec![1, 1])]).unwrap();
        let l = build_loss_query_matrix(&c);
        assert_eq!(l.row(0), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(l.row(1), &[0.0, 1.0, 0.0, 1.0]);
        for i in 0..2 {
            assert_eq!(l.row(i).iter().sum::<f64>(), 2.0);
        }
        assert_eq!(l.col_labels()[1], "x1:-1");
    }

    #[test]
    fn construction_errors() {
        assert!(ConceptClass::new(dom(2), vec![("a".into(), vec![1, 1]), ("b".into(), vec![1, 1])]).is_err());
        assert!(ConceptClass::new(dom(2), vec![("a".into(), vec![1])]).is_err());
        assert!(ConceptClass::new(dom(2), vec![("a".into(), vec![1, 0])]).is_err());
        assert!(ConceptClass::new(vec![], vec![("a".into(), vec![])]).is_err());
        assert!(ConceptClass::new(dom(1), vec![("a".into(), vec![1]), ("a".into(), vec![-1])]).is_err());
        assert!(IndexedMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(LabeledDistribution::new(dom(1), vec![0.5, 0.4]).is_err());
        assert!(LabeledDistribution::new(dom(1), vec![1.5, -0.5]).is_err());
        assert!(Dataset::new(dom(1), vec![]).is_err());
        assert!(Dataset::new(dom(1), vec![(1, 1)]).is_err());
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let d = LabeledDistribution::new(dom(1), vec![0.5 + 4e-13, 0.5]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn losses_on_simple_distributions() {
        let pm = LabeledDistribution::point_mass(dom(1), 0, 1).unwrap();
        assert_eq!(population_loss(&pm, &[1]).unwrap(), 0.0);
        let un = LabeledDistribution::uniform_labels(dom(2)).unwrap();
        for h in [[1, 1], [1, -1], [-1, -1]] {
            assert!((population_loss(&un, &h).unwrap() - 0.5).abs() < 1e-15);
        }
        let c = [1i8, -1];
        let realizable = LabeledDistribution::labeled_by(dom(2), &[0.3, 0.7], &c).unwrap();
        assert_eq!(population_loss(&realizable, &c).unwrap(), 0.0);
        assert!(population_loss(&pm, &[1, 1]).is_err());
    }

    #[test]
    fn empirical_losses() {
        let d = Dataset::new(dom(1), vec![(0, 1)]).unwrap();
        assert_eq!(empirical_loss(&d, &[1]).unwrap(), 0.0);
        let d = Dataset::new(dom(1), vec![(0, 1), (0, -1)]).unwrap();
        assert_eq!(empirical_loss(&d, &[-1]).unwrap(), 0.5);
        let d = Dataset::new(dom(2), vec![(0, 1), (1, 1), (0, 1), (1, 1)]).unwrap();
        assert_eq!(empirical_loss(&d, &[-1, -1]).unwrap(), 1.0);
    }

    #[test]
    fn bayes_errors() {
        assert_eq!(bayes_error(&LabeledDistribution::point_mass(dom(2), 1, -1).unwrap()), 0.0);
        assert!((bayes_error(&LabeledDistribution::uniform_labels(dom(3)).unwrap()) - 0.5).abs() < 1e-15);
        let d = LabeledDistribution::new(dom(1), vec![0.75, 0.25]).unwrap();
        assert_eq!(bayes_error(&d), 0.25);
    }

    #[test]
    fn operator_norm_examples() {
        let m = IndexedMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let pi = WeightedIndex::uniform(vec!["a".into(), "b".into()]).unwrap();
        let v = operator_norm_inf_to_l2(&m, &pi, OperatorNormMethod::default()).unwrap();
        // f ∈ {±1}²: (Mf) ∈ {(2,0),(0,2)} up to sign, so π-weighted square is 2.
        assert!((v - 2f64.sqrt()).abs() < 1e-12);

        let z = IndexedMatrix::from_rows(&[vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(operator_norm_inf_to_l2(&z, &pi, OperatorNormMethod::default()).unwrap(), 0.0);

        let m = IndexedMatrix::from_rows(&[vec![0.5, -2.0, 1.0], vec![3.0, 3.0, 3.0]]).unwrap();
        let pt = WeightedIndex::new(vec!["a".into(), "b".into()], vec![1.0, 0.0]).unwrap();
        let v = operator_norm_inf_to_l2(&m, &pt, OperatorNormMethod::default()).unwrap();
        assert!((v - 3.5).abs() < 1e-12);

        let wide = IndexedMatrix::from_rows(&[vec![1.0; 23]]).unwrap();
        let one = WeightedIndex::uniform(vec!["a".into()]).unwrap();
        assert!(matches!(
            operator_norm_inf_to_l2(&wide, &one, OperatorNormMethod::default()),
            Err(Error::BruteForceCap { .. })
        ));
        let s = operator_norm_inf_to_l2(&wide, &one, OperatorNormMethod::Sampled { samples: 4, seed: 1 }).unwrap();
        assert!((s - 23.0).abs() < 1e-12);
    }

    #[test]
    fn elementary_norm_examples() {
        let i2 = IndexedMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let n = elementary_norms(&i2);
        assert_eq!((n.norm_1_to_inf, n.norm_1_to_2, n.norm_2_to_inf), (1.0, 1.0, 1.0));
        let ones = IndexedMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let n = elementary_norms(&ones);
        assert_eq!(n.norm_1_to_inf, 1.0);
        assert!((n.norm_1_to_2 - 2f64.sqrt()).abs() < 1e-15);
        assert!((n.norm_2_to_inf - 2f64.sqrt()).abs() < 1e-15);
        let n = elementary_norms(&IndexedMatrix::from_rows(&[vec![3.0]]).unwrap());
        assert_eq!((n.norm_1_to_inf, n.norm_1_to_2, n.norm_2_to_inf), (3.0, 3.0, 3.0));
    }

    #[test]
    fn sampling() {
        let pm = LabeledDistribution::point_mass(dom(2), 1, -1).unwrap();
        let d = sample(&pm, 3, 9).unwrap();
        assert_eq!(d.records(), &[(1, -1); 3]);
        let un = LabeledDistribution::uniform_labels(dom(3)).unwrap();
        assert_eq!(sample(&un, 50, 4).unwrap(), sample(&un, 50, 4).unwrap());
        let big = sample(&un, 100_000, 11).unwrap();
        let pos = big.records().iter().filter(|r| r.1 > 0).count() as f64 / 1e5;
        assert!((pos - 0.5).abs() < 0.01, "{pos}");
        assert!(sample(&un, 0, 1).is_err());
    }

    #[test]
    fn negation_closure() {
        let c = two_concepts();
        assert!(!c.is_negation_closed());
        let n = c.negation_closure();
        assert_eq!(n.len(), 4);
        assert!(n.is_negation_closed());
        assert_eq!(n.negation_closure().len(), 4);
    }

    #[test]
    fn serde_shapes() {
        let d = LabeledDistribution::new(dom(1), vec![0.25, 0.75]).unwrap();
        let repr: DistributionRepr = d.clone().into();
        assert_eq!(repr.probs[1], ("x1".to_string(), -1, 0.75));
        assert_eq!(LabeledDistribution::try_from(repr).unwrap(), d);
    }
}
