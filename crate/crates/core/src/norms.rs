//! The γ₂ factorization norm, its approximate and dual variants, the
//! realizable surrogate quantity η(C, α), and dual witnesses for both.
//!
//! Every quantity is a small SDP handed to [`crate::sdp`]. For an `r × c`
//! target the primal variable is the `(r+c)`-dimensional PSD block
//!
//! ```text
//!   [ R Rᵀ   M̃   ]
//!   [ M̃ᵀ    AᵀA ]
//! ```
//!
//! whose largest diagonal entry is minimized; eigendecomposition of the
//! optimal block yields a balanced factorization `M̃ = R·A`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{labeled_point, labeled_point_labels, ConceptClass, IndexedMatrix};
use crate::sdp::{self, Certificate, Constraint, SdpProblem, SdpSettings, SdpSolution};

/// Eigenvalues of an optimal PSD block below this are rejected.
pub const PSD_REJECT: f64 = -1e-8;
/// Relative cutoff under which eigen-directions are dropped from factors.
const RANK_CUTOFF: f64 = 1e-7;

/// A balanced factorization `R·A ≈ M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub r: IndexedMatrix,
    pub a: IndexedMatrix,
    /// `max |(R·A − M)_ij|` against the matrix that was approximated.
    pub residual_inf: f64,
    /// `‖R‖_{2→∞}·‖A‖_{1→2}`.
    pub gamma2_value: f64,
}

impl Factorization {
    /// `M̃ = R·A`.
    pub fn product(&self) -> IndexedMatrix {
        self.r.matmul(&self.a).expect("factor shapes agree")
    }

    /// Largest row ℓ2 norm of `R`.
    pub fn left_norm(&self) -> f64 {
        crate::model::elementary_norms(&self.r).norm_2_to_inf
    }

    /// Largest column ℓ2 norm of `A`.
    pub fn right_norm(&self) -> f64 {
        crate::model::elementary_norms(&self.a).norm_1_to_2
    }

    /// Inner dimension.
    pub fn rank(&self) -> usize {
        self.a.nrows()
    }
}

/// Result of [`gamma2_approx`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxGamma2 {
    pub value: f64,
    pub alpha: f64,
    pub m_tilde: IndexedMatrix,
    pub factorization: Factorization,
    pub certificate: Certificate,
    /// Dual solution `U` with `γ₂*(U) ≤ 1` and `M•U − α‖U‖₁` equal to the
    /// dual objective up to solver precision.
    pub dual_matrix: IndexedMatrix,
}

/// Result of [`gamma2_dual`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNorm {
    pub value: f64,
    /// Unit vector assigned to each row.
    pub f_map: Vec<Vec<f64>>,
    /// Unit vector assigned to each column.
    pub g_map: Vec<Vec<f64>>,
    pub certificate: Certificate,
}

/// Which dual formulation a [`DualWitness`] certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// `(D•U − α‖U‖₁)/γ₂*(U)` over the difference matrix.
    Agnostic,
    /// `(Σ u_{c,(x,−c(x))} − α Σ |u_{c,(x,c(x))}|)/γ₂*(U)` over `S_C`.
    Realizable,
}

/// A normalized dual matrix certifying a lower bound on γ₂(D, α) or η(C, α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualWitness {
    pub kind: WitnessKind,
    pub alpha: f64,
    /// `‖U‖₁ = 1`.
    pub u: IndexedMatrix,
    pub objective: f64,
    pub gamma2_star: f64,
    /// `D•U` (agnostic) or `Σ u_{c,(x,−c(x))}` (realizable).
    pub inner_product: f64,
    /// Value of the primal problem the witness was extracted from.
    pub primal_value: f64,
    pub certificate: Certificate,
}

/// Minimizer of γ₂(W + θ1ᵀ) over `W ∈ K_C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSolution {
    pub alpha: f64,
    pub w: IndexedMatrix,
    pub theta: Vec<f64>,
    pub w_tilde: IndexedMatrix,
    pub value: f64,
    pub factorization: Factorization,
    pub certificate: Certificate,
}

// ---------------------------------------------------------------------------
// Row/column deduplication

/// Maps every original index to `(reduced index, sign)`, or `None` when zero.
struct Dedup {
    reps: Vec<usize>,
    map: Vec<Option<(usize, f64)>>,
}

fn dedup(vectors: &[Vec<f64>]) -> Dedup {
    let mut reps: Vec<usize> = Vec::new();
    let mut map = Vec::with_capacity(vectors.len());
    'outer: for (i, v) in vectors.iter().enumerate() {
        if v.iter().all(|x| *x == 0.0) {
            map.push(None);
            continue;
        }
        for (k, &r) in reps.iter().enumerate() {
            let w = &vectors[r];
            if w == v {
                map.push(Some((k, 1.0)));
                continue 'outer;
            }
            if w.iter().zip(v).all(|(a, b)| *a == -*b) {
                map.push(Some((k, -1.0)));
                continue 'outer;
            }
        }
        map.push(Some((reps.len(), 1.0)));
        reps.push(i);
    }
    Dedup { reps, map }
}

/// `M` with duplicate (up to sign) and zero rows/columns removed. Neither
/// γ₂(M) nor γ₂(M, α) changes under this reduction.
struct Reduced {
    rows: Dedup,
    cols: Dedup,
    m: Vec<Vec<f64>>,
}

fn reduce(m: &IndexedMatrix) -> Reduced {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).to_vec()).collect();
    let rows = dedup(&rows);
    let cols: Vec<Vec<f64>> = (0..m.ncols()).map(|j| rows.reps.iter().map(|&i| m.get(i, j)).collect()).collect();
    let cols = dedup(&cols);
    let red = rows
        .reps
        .iter()
        .map(|&i| cols.reps.iter().map(|&j| m.get(i, j)).collect())
        .collect();
    Reduced { rows, cols, m: red }
}

// ---------------------------------------------------------------------------
// Factor extraction

fn gram_factor(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    let eig = SymmetricEigen::new((z + z.transpose()) * 0.5);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let mut cols: Vec<usize> = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l < PSD_REJECT {
            return Err(Error::NotPsd { eigenvalue: l });
        }
        if l > RANK_CUTOFF * lmax.max(1e-300) {
            cols.push(k);
        }
    }
    let mut b = DMatrix::zeros(n, cols.len().max(1));
    for (c, &k) in cols.iter().enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        for i in 0..n {
            b[(i, c)] = eig.eigenvectors[(i, k)] * s;
        }
    }
    Ok(b)
}

fn inner_labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("k{i}")).collect()
}

/// Balanced factorization from a Gram factor `B` whose first `r` rows give `R`
/// and remaining rows give `Aᵀ`, lifted back through the deduplication maps.
fn factor_from_gram(
    b: &DMatrix<f64>,
    r: usize,
    rows: &Dedup,
    cols: &Dedup,
    target: &IndexedMatrix,
) -> Factorization {
    let k = b.ncols();
    let mut rm = IndexedMatrix::from_fn(target.row_labels().to_vec(), inner_labels(k), |i, l| match rows.map[i] {
        Some((ri, s)) => s * b[(ri, l)],
        None => 0.0,
    });
    let mut am = IndexedMatrix::from_fn(inner_labels(k), target.col_labels().to_vec(), |l, j| match cols.map[j] {
        Some((cj, s)) => s * b[(r + cj, l)],
        None => 0.0,
    });
    balance(&mut rm, &mut am);
    let prod = rm.matmul(&am).expect("shapes agree");
    let residual_inf = prod.sub(target).expect("shapes agree").max_abs();
    let gamma2_value = crate::model::elementary_norms(&rm).norm_2_to_inf * crate::model::elementary_norms(&am).norm_1_to_2;
    Factorization { r: rm, a: am, residual_inf, gamma2_value }
}

fn balance(r: &mut IndexedMatrix, a: &mut IndexedMatrix) {
    let rn = crate::model::elementary_norms(r).norm_2_to_inf;
    let an = crate::model::elementary_norms(a).norm_1_to_2;
    if rn > 0.0 && an > 0.0 {
        let s = (an / rn).sqrt();
        *r = r.scale(s);
        *a = a.scale(1.0 / s);
    }
}

// ---------------------------------------------------------------------------
// γ₂ and approximate γ₂

/// γ₂(M): the minimum of `‖R‖_{2→∞}·‖A‖_{1→2}` over factorizations `M = R·A`.
pub fn gamma2(m: &IndexedMatrix, settings: &SdpSettings) -> Result<(f64, Factorization)> {
    let res = gamma2_approx(m, 0.0, settings)?;
    Ok((res.value, res.factorization))
}

fn build_gamma2_sdp(m: &[Vec<f64>], r: usize, c: usize, alpha: f64) -> SdpProblem {
    let n = r + c;
    let boxed = alpha > 0.0;
    let lp = 1 + n + if boxed { 2 * r * c } else { 0 };
    let mut p = SdpProblem::new(n, lp);
    p.objective_lp[0] = 1.0;
    for i in 0..n {
        p.add_constraint(Constraint { psd: vec![(i, i, 1.0)], lp: vec![(1 + i, 1.0), (0, -1.0)], rhs: 0.0 });
    }
    for i in 0..r {
        for j in 0..c {
            let e = (i, r + j, 1.0);
            if boxed {
                let g = 1 + n + 2 * (i * c + j);
                p.add_constraint(Constraint { psd: vec![e], lp: vec![(g, -1.0)], rhs: m[i][j] - alpha });
                p.add_constraint(Constraint { psd: vec![e], lp: vec![(g + 1, 1.0)], rhs: m[i][j] + alpha });
            } else {
                p.add_constraint(Constraint { psd: vec![e], lp: vec![], rhs: m[i][j] });
            }
        }
    }
    p
}

fn zero_certificate() -> Certificate {
    Certificate {
        primal_objective: 0.0,
        dual_objective: 0.0,
        gap: 0.0,
        primal_infeasibility: 0.0,
        dual_infeasibility: 0.0,
        iterations: 0,
    }
}

/// γ₂(M, α): the minimum of γ₂(M̃) over `‖M̃ − M‖_{1→∞} ≤ α`.
pub fn gamma2_approx(m: &IndexedMatrix, alpha: f64, settings: &SdpSettings) -> Result<ApproxGamma2> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha must be nonnegative, got {alpha}")));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput("matrix must have at least one row and column".into()));
    }
    settings.validate()?;
    let red = reduce(m);
    let (r, c) = (red.rows.reps.len(), red.cols.reps.len());
    let zero_dual = m.map(|_| 0.0);
    if r == 0 || c == 0 || red.m.iter().flatten().all(|v| v.abs() <= alpha) {
        // The zero matrix is feasible.
        let fac = Factorization {
            r: IndexedMatrix::from_fn(m.row_labels().to_vec(), inner_labels(1), |_, _| 0.0),
            a: IndexedMatrix::from_fn(inner_labels(1), m.col_labels().to_vec(), |_, _| 0.0),
            residual_inf: m.max_abs(),
            gamma2_value: 0.0,
        };
        return Ok(ApproxGamma2 {
            value: 0.0,
            alpha,
            m_tilde: zero_dual.clone(),
            factorization: fac,
            certificate: zero_certificate(),
            dual_matrix: zero_dual,
        });
    }
    if r + c > sdp::MAX_BLOCK_DIM {
        return Err(Error::TooLarge { dim: r + c, cap: sdp::MAX_BLOCK_DIM });
    }
    let problem = build_gamma2_sdp(&red.m, r, c, alpha);
    let sol = sdp::solve(&problem, settings)?;
    let b = gram_factor(&sol.x)?;
    let factorization = factor_from_gram(&b, r, &red.rows, &red.cols, m);
    let m_tilde = factorization.product();

    // Dual: U_ij is the sum of the multipliers of the entry constraints.
    let n = r + c;
    let mut u_red = vec![vec![0.0; c]; r];
    for i in 0..r {
        for j in 0..c {
            u_red[i][j] = if alpha > 0.0 {
                let k = n + 2 * (i * c + j);
                sol.y[k] + sol.y[k + 1]
            } else {
                sol.y[n + i * c + j]
            };
        }
    }
    let dual_matrix = IndexedMatrix::from_fn(m.row_labels().to_vec(), m.col_labels().to_vec(), |i, j| {
        match (red.rows.map[i], red.cols.map[j]) {
            (Some((ri, _)), Some((cj, _))) if red.rows.reps[ri] == i && red.cols.reps[cj] == j => u_red[ri][cj],
            _ => 0.0,
        }
    });
    Ok(ApproxGamma2 {
        value: sol.certificate.primal_objective,
        alpha,
        m_tilde,
        factorization,
        certificate: sol.certificate,
        dual_matrix,
    })
}

// ---------------------------------------------------------------------------
// Dual norm

/// γ₂*(U) = max Σ u_ij⟨f_i, g_j⟩ over unit vectors `f_i`, `g_j`.
pub fn gamma2_dual(u: &IndexedMatrix, settings: &SdpSettings) -> Result<DualNorm> {
    settings.validate()?;
    let rows: Vec<usize> = (0..u.nrows()).filter(|&i| u.row(i).iter().any(|v| *v != 0.0)).collect();
    let cols: Vec<usize> = (0..u.ncols()).filter(|&j| rows.iter().any(|&i| u.get(i, j) != 0.0)).collect();
    let (r, c) = (rows.len(), cols.len());
    if r == 0 {
        let unit = |_| vec![1.0];
        return Ok(DualNorm {
            value: 0.0,
            f_map: (0..u.nrows()).map(unit).collect(),
            g_map: (0..u.ncols()).map(unit).collect(),
            certificate: zero_certificate(),
        });
    }
    let n = r + c;
    if n > sdp::MAX_BLOCK_DIM {
        return Err(Error::TooLarge { dim: n, cap: sdp::MAX_BLOCK_DIM });
    }
    let mut p = SdpProblem::new(n, 0);
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let v = u.get(i, j);
            if v != 0.0 {
                p.objective_psd.push((a, r + b, -v));
            }
        }
    }
    for i in 0..n {
        p.add_constraint(Constraint { psd: vec![(i, i, 1.0)], lp: vec![], rhs: 1.0 });
    }
    let sol = sdp::solve(&p, settings)?;
    let b = gram_factor(&sol.x)?;
    let k = b.ncols();
    let unit_row = |i: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|l| b[(i, l)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.into_iter().map(|x| x / norm).collect()
        } else {
            let mut e = vec![0.0; k];
            e[0] = 1.0;
            e
        }
    };
    let mut e0 = vec![0.0; k];
    e0[0] = 1.0;
    let mut f_map = vec![e0.clone(); u.nrows()];
    let mut g_map = vec![e0; u.ncols()];
    for (a, &i) in rows.iter().enumerate() {
        f_map[i] = unit_row(a);
    }
    for (bb, &j) in cols.iter().enumerate() {
        g_map[j] = unit_row(r + bb);
    }
    Ok(DualNorm { value: -sol.certificate.primal_objective, f_map, g_map, certificate: sol.certificate })
}

/// `Σ u_ij ⟨f_i, g_j⟩` for an explicit vector assignment.
pub fn dual_pairing(u: &IndexedMatrix, f_map: &[Vec<f64>], g_map: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            let d: f64 = f_map[i].iter().zip(&g_map[j]).map(|(a, b)| a * b).sum();
            s += u.get(i, j) * d;
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Agnostic dual witness

fn clean_small(u: &IndexedMatrix) -> IndexedMatrix {
    let cut = 1e-9 * u.max_abs();
    u.map(|v| if v.abs() <= cut { 0.0 } else { v })
}

/// Witness `U` for γ₂(D, α) = max (D•U − α‖U‖₁)/γ₂*(U), normalized to
/// `‖U‖₁ = 1` with every row sign-fixed so that `Σ_x d·u ≥ 0`.
pub fn agnostic_dual_witness(d: &IndexedMatrix, alpha: f64, settings: &SdpSettings) -> Result<DualWitness> {
    if d.max_abs() == 0.0 {
        return Err(Error::DualDegenerate("γ₂(D,α)=0 for a class with fewer than two concepts".into()));
    }
    let approx = gamma2_approx(d, alpha, settings)?;
    if approx.value <= settings.tolerance {
        return Err(Error::DualDegenerate(format!(
            "γ₂(D,α)={:e} at α={alpha}: the zero matrix is (nearly) feasible",
            approx.value
        )));
    }
    let u = clean_small(&approx.dual_matrix);
    let signs: Vec<f64> = (0..u.nrows())
        .map(|i| {
            let s: f64 = d.row(i).iter().zip(u.row(i)).map(|(a, b)| a * b).sum();
            if s < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let mass = u.l1_norm();
    if mass == 0.0 {
        return Err(Error::DualDegenerate("dual solution is zero".into()));
    }
    let u = IndexedMatrix::from_fn(u.row_labels().to_vec(), u.col_labels().to_vec(), |i, j| {
        signs[i] * u.get(i, j) / mass
    });
    let star = gamma2_dual(&u, settings)?;
    let inner = d.dot(&u)?;
    let objective = (inner - alpha * u.l1_norm()) / star.value;
    if objective <= 0.0 {
        return Err(Error::DualDegenerate(format!("witness objective {objective:e} is not positive")));
    }
    Ok(DualWitness {
        kind: WitnessKind::Agnostic,
        alpha,
        u,
        objective,
        gamma2_star: star.value,
        inner_product: inner,
        primal_value: approx.value,
        certificate: approx.certificate,
    })
}

// ---------------------------------------------------------------------------
// η(C, α)

fn check_eta_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Variable layout of the η program.
struct EtaLayout {
    rows: usize,
    cols: usize,
    shift: f64,
}

impl EtaLayout {
    fn n(&self) -> usize {
        self.rows + self.cols
    }
    fn phi(&self, c: usize) -> usize {
        1 + self.n() + c
    }
    fn slack(&self, c: usize, col: usize) -> usize {
        1 + self.n() + self.rows + 2 * (c * self.cols + col)
    }
    fn lp_dim(&self) -> usize {
        1 + self.n() + self.rows + 2 * self.rows * self.cols
    }
}

fn is_on_label(class: &ConceptClass, c: usize, col: usize) -> bool {
    let (x, y) = labeled_point(col);
    class.concept(c)[x] == y
}

/// Solves the η program. θ_c is free; it is written `φ_c − L` with `φ_c ≥ 0`
/// and `L` exceeding `η + α`, which every optimal θ_c respects.
fn solve_eta(class: &ConceptClass, alpha: f64, settings: &SdpSettings) -> Result<(EtaLayout, SdpSolution)> {
    check_eta_alpha(alpha)?;
    settings.validate()?;
    let rows = class.len();
    let cols = 2 * class.domain_size();
    // W = 1[wrong label], θ = −½ is feasible with γ₂ ≤ ½·min(√|C|, √(2|X|)).
    let feasible = 0.5 * (rows as f64).sqrt().min((cols as f64).sqrt());
    let lay = EtaLayout { rows, cols, shift: feasible + alpha + 1.0 };
    let n = lay.n();
    if n > sdp::MAX_BLOCK_DIM {
        return Err(Error::TooLarge { dim: n, cap: sdp::MAX_BLOCK_DIM });
    }
    let mut p = SdpProblem::new(n, lay.lp_dim());
    p.objective_lp[0] = 1.0;
    for i in 0..n {
        p.add_constraint(Constraint { psd: vec![(i, i, 1.0)], lp: vec![(1 + i, 1.0), (0, -1.0)], rhs: 0.0 });
    }
    for c in 0..rows {
        for col in 0..cols {
            let e = (c, rows + col, 1.0);
            let phi = (lay.phi(c), -1.0);
            let s = lay.slack(c, col);
            if is_on_label(class, c, col) {
                // −α ≤ W̃ − θ ≤ α
                p.add_constraint(Constraint { psd: vec![e], lp: vec![phi, (s, -1.0)], rhs: -alpha - lay.shift });
                p.add_constraint(Constraint { psd: vec![e], lp: vec![phi, (s + 1, 1.0)], rhs: alpha - lay.shift });
            } else {
                // W̃ − θ ≥ 1; the second slack is unused and pinned to 1.
                p.add_constraint(Constraint { psd: vec![e], lp: vec![phi, (s, -1.0)], rhs: 1.0 - lay.shift });
                p.add_constraint(Constraint { psd: vec![], lp: vec![(s + 1, 1.0)], rhs: 1.0 });
            }
        }
    }
    let sol = sdp::solve(&p, settings)?;
    Ok((lay, sol))
}

/// η(C, α) = min γ₂(W + θ1ᵀ) over `W ∈ K_C` and per-concept shifts θ.
pub fn eta(class: &ConceptClass, alpha: f64, settings: &SdpSettings) -> Result<EtaSolution> {
    let (lay, sol) = solve_eta(class, alpha, settings)?;
    let (rows, cols) = (lay.rows, lay.cols);
    let col_labels = labeled_point_labels(class.domain());
    let theta: Vec<f64> = (0..rows).map(|c| sol.x_lp[lay.phi(c)] - lay.shift).collect();
    let w_tilde = IndexedMatrix::from_fn(class.names().to_vec(), col_labels.clone(), |c, col| sol.x[(c, rows + col)]);
    let w = IndexedMatrix::from_fn(class.names().to_vec(), col_labels, |c, col| w_tilde.get(c, col) - theta[c]);
    let b = gram_factor(&sol.x)?;
    let ident = |k: usize| Dedup { reps: (0..k).collect(), map: (0..k).map(|i| Some((i, 1.0))).collect() };
    let factorization = factor_from_gram(&b, rows, &ident(rows), &ident(cols), &w_tilde);
    Ok(EtaSolution {
        alpha,
        w,
        theta,
        w_tilde,
        value: sol.certificate.primal_objective,
        factorization,
        certificate: sol.certificate,
    })
}

/// Checks membership in `S_C`: zero row sums and nonnegative off-label entries.
pub fn validate_realizable_dual(u: &IndexedMatrix, class: &ConceptClass, tol: f64) -> Result<()> {
    if u.nrows() != class.len() || u.ncols() != 2 * class.domain_size() {
        return Err(Error::InvalidInput("witness shape does not match C × (X×{±1})".into()));
    }
    for c in 0..u.nrows() {
        let s: f64 = u.row(c).iter().sum();
        if s.abs() > tol {
            return Err(Error::PropertyViolation(format!("row {} sums to {s:e}, not zero", u.row_labels()[c])));
        }
        for col in 0..u.ncols() {
            if !is_on_label(class, c, col) && u.get(c, col) < -tol {
                return Err(Error::PropertyViolation(format!(
                    "off-label entry ({}, {}) is negative",
                    u.row_labels()[c],
                    u.col_labels()[col]
                )));
            }
        }
    }
    Ok(())
}

/// `Σ u_{c,(x,−c(x))}` and `Σ |u_{c,(x,c(x))}|`.
pub fn realizable_dual_terms(u: &IndexedMatrix, class: &ConceptClass) -> (f64, f64) {
    let (mut off, mut on) = (0.0, 0.0);
    for c in 0..u.nrows() {
        for col in 0..u.ncols() {
            if is_on_label(class, c, col) {
                on += u.get(c, col).abs();
            } else {
                off += u.get(c, col);
            }
        }
    }
    (off, on)
}

/// Witness `U ∈ S_C` for η(C, α), normalized to `‖U‖₁ = 1`.
pub fn eta_dual_witness(class: &ConceptClass, alpha: f64, settings: &SdpSettings) -> Result<DualWitness> {
    let (lay, sol) = solve_eta(class, alpha, settings)?;
    let (rows, cols) = (lay.rows, lay.cols);
    let n = lay.n();
    let primal_value = sol.certificate.primal_objective;
    if primal_value <= settings.tolerance {
        return Err(Error::DualDegenerate(format!("η(C,α)≈{primal_value:e}; no witness")));
    }
    // Constraint order: n diagonal rows, then two per (c, col).
    let mut u = vec![vec![0.0; cols]; rows];
    for c in 0..rows {
        for col in 0..cols {
            let k = n + 2 * (c * cols + col);
            u[c][col] = if is_on_label(class, c, col) { sol.y[k] + sol.y[k + 1] } else { sol.y[k].max(0.0) };
        }
    }
    let cut = 1e-9 * u.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    for row in u.iter_mut() {
        for v in row.iter_mut() {
            if v.abs() <= cut {
                *v = 0.0;
            }
        }
    }
    // Project onto zero row sums through the on-label entries.
    let per_row = class.domain_size() as f64;
    for c in 0..rows {
        let s: f64 = u[c].iter().sum();
        for col in 0..cols {
            if is_on_label(class, c, col) {
                u[c][col] -= s / per_row;
            }
        }
    }
    let mass: f64 = u.iter().flatten().map(|v| v.abs()).sum();
    if mass == 0.0 {
        return Err(Error::DualDegenerate("dual solution is zero".into()));
    }
    let u = IndexedMatrix::from_fn(class.names().to_vec(), labeled_point_labels(class.domain()), |c, col| {
        u[c][col] / mass
    });
    let star = gamma2_dual(&u, settings)?;
    let (off, on) = realizable_dual_terms(&u, class);
    let objective = (off - alpha * on) / star.value;
    if objective <= 0.0 {
        return Err(Error::DualDegenerate(format!("witness objective {objective:e} is not positive")));
    }
    Ok(DualWitness {
        kind: WitnessKind::Realizable,
        alpha,
        u,
        objective,
        gamma2_star: star.value,
        inner_product: off,
        primal_value,
        certificate: sol.certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_concept_matrix, build_difference_matrix};
    use alloc::string::ToString;

    fn s() -> SdpSettings {
        SdpSettings::default()
    }

    fn identity(n: usize) -> IndexedMatrix {
        IndexedMatrix::from_rows(&(0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect::<Vec<_>>())
            .unwrap()
    }

    fn two_concepts() -> ConceptClass {
        ConceptClass::new(
            vec!["x1".into(), "x2".into()],
            vec![("c1".to_string(), vec![1, 1]), ("c2".to_string(), vec![1, -1])],
        )
        .unwrap()
    }

    fn singleton(points: usize) -> ConceptClass {
        ConceptClass::new((0..points).map(|i| format!("x{i}")).collect(), vec![("c".into(), vec![1; points])]).unwrap()
    }

    #[test]
    fn identity_and_ones() {
        let (v, f) = gamma2(&identity(2), &s()).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        assert!(f.residual_inf < 1e-6);
        let ones = IndexedMatrix::from_rows(&[vec![1.0; 4], vec![1.0; 4], vec![1.0; 4]]).unwrap();
        let (v, f) = gamma2(&ones, &s()).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        assert!((f.left_norm() - f.right_norm()).abs() < 1e-8);
    }

    #[test]
    fn hadamard() {
        let h = IndexedMatrix::from_rows(&[
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0, -1.0],
            vec![1.0, 1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0, 1.0],
        ])
        .unwrap();
        let (v, f) = gamma2(&h, &s()).unwrap();
        assert!((v - 2.0).abs() < 1e-5, "{v}");
        assert!(f.residual_inf < 1e-6);
    }

    #[test]
    fn approx_edge_cases() {
        let h2 = IndexedMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let r = gamma2_approx(&h2, 1.0, &s()).unwrap();
        assert_eq!(r.value, 0.0);
        let exact = gamma2(&h2, &s()).unwrap().0;
        let zero = gamma2_approx(&h2, 0.0, &s()).unwrap().value;
        assert!((exact - zero).abs() < 1e-12);
        assert!(gamma2_approx(&h2, -0.1, &s()).is_err());
    }

    #[test]
    fn two_concept_difference_matrix() {
        // D has a single nonzero column ±1; (1−α)·D is optimal.
        let d = build_difference_matrix(&two_concepts());
        let r = gamma2_approx(&d, 0.25, &s()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-6, "{}", r.value);
        assert!(r.factorization.residual_inf <= 0.25 + 1e-6);
        assert!(r.certificate.gap <= 1e-6);
    }

    #[test]
    fn dual_norm_examples() {
        let mut e = vec![vec![0.0; 3]; 2];
        e[0][0] = 1.0;
        let u = IndexedMatrix::from_rows(&e).unwrap();
        assert!((gamma2_dual(&u, &s()).unwrap().value - 1.0).abs() < 1e-6);
        let ones = IndexedMatrix::from_rows(&[vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let d = gamma2_dual(&ones, &s()).unwrap();
        assert!((d.value - 6.0).abs() < 1e-6);
        assert!((dual_pairing(&ones, &d.f_map, &d.g_map) - 6.0).abs() < 1e-5);
        let zero = IndexedMatrix::from_rows(&[vec![0.0; 2]]).unwrap();
        assert_eq!(gamma2_dual(&zero, &s()).unwrap().value, 0.0);
    }

    #[test]
    fn agnostic_witness_two_concepts() {
        let d = build_difference_matrix(&two_concepts());
        let w = agnostic_dual_witness(&d, 0.25, &s()).unwrap();
        assert!((w.objective - 0.75).abs() < 1e-5, "{}", w.objective);
        assert!(w.inner_product > 0.25);
        assert!((w.u.l1_norm() - 1.0).abs() < 1e-10);
        assert!(matches!(agnostic_dual_witness(&d, 1.0, &s()), Err(Error::DualDegenerate(_))));
        let single = build_difference_matrix(&singleton(2));
        assert!(matches!(agnostic_dual_witness(&single, 0.1, &s()), Err(Error::DualDegenerate(_))));
    }

    #[test]
    fn eta_singleton_closed_form() {
        for alpha in [0.1, 0.9] {
            let e = eta(&singleton(1), alpha, &s()).unwrap();
            assert!((e.value - (1.0 - alpha) / 2.0).abs() < 1e-6, "{alpha}: {}", e.value);
        }
        let e = eta(&singleton(3), 0.1, &s()).unwrap();
        assert!((e.value - 0.45).abs() < 1e-6);
        for c in 0..1 {
            for col in 0..6 {
                let w = e.w.get(c, col);
                if col % 2 == 0 {
                    assert!(w.abs() <= 0.1 + 1e-7);
                } else {
                    assert!(w >= 1.0 - 1e-7);
                }
            }
        }
        assert!(eta(&singleton(1), 1.0, &s()).is_err());
        assert!(eta(&singleton(1), 0.0, &s()).is_err());
    }

    #[test]
    fn eta_witness_singleton() {
        let w = eta_dual_witness(&singleton(1), 0.1, &s()).unwrap();
        assert!((w.objective - 0.45).abs() < 1e-5);
        validate_realizable_dual(&w.u, &singleton(1), 1e-10).unwrap();
        // Analytic witness from the single-concept warm-up.
        let u = IndexedMatrix::from_rows(&[vec![-0.5, 0.5]]).unwrap();
        let (off, on) = realizable_dual_terms(&u, &singleton(1));
        let star = gamma2_dual(&u, &s()).unwrap().value;
        assert!(((off - 0.1 * on) / star - 0.45).abs() < 1e-6);
    }

    #[test]
    fn realizable_dual_validator() {
        let c = singleton(1);
        let bad_sum = IndexedMatrix::from_rows(&[vec![-0.4, 0.5]]).unwrap();
        assert!(validate_realizable_dual(&bad_sum, &c, 1e-10).is_err());
        let bad_sign = IndexedMatrix::from_rows(&[vec![0.5, -0.5]]).unwrap();
        assert!(validate_realizable_dual(&bad_sign, &c, 1e-10).is_err());
    }

    #[test]
    fn concept_matrix_gamma2_bounds() {
        let w = build_concept_matrix(&two_concepts());
        let (v, _) = gamma2(&w, &s()).unwrap();
        // H₂ up to column order: γ₂ = √2.
        assert!((v - 2f64.sqrt()).abs() < 1e-6);
    }
}
