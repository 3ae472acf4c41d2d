//! Small dense semidefinite programs in standard form
//!
//! ```text
//!   minimize   ⟨C, X⟩ + cᵀx
//!   subject to ⟨A_k, X⟩ + a_kᵀx = b_k,   X ⪰ 0,  x ≥ 0
//! ```
//!
//! solved by an infeasible primal-dual path-following method (HKM search
//! direction with a Mehrotra predictor-corrector). The dual is
//!
//! ```text
//!   maximize bᵀy  subject to  Σ y_k A_k + Z = C,  Σ y_k a_k + z = c,  Z ⪰ 0, z ≥ 0
//! ```
//!
//! and every returned solution carries the achieved duality gap together with
//! the primal and dual residuals.
//!
//! Matrix coefficients are given on the upper triangle: a term `(i, j, v)`
//! contributes `v·X_ij` to `⟨A, X⟩`, i.e. the symmetric `A` holds `v/2` at
//! `(i,j)` and `(j,i)` when `i ≠ j`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest PSD block the solver accepts.
pub const MAX_BLOCK_DIM: usize = 256;

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    /// Target for the absolute duality gap.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Reserved for randomized initialization; the interior-point solver starts
    /// deterministically and does not read it.
    pub seed: u64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings { tolerance: 1e-6, max_iterations: 200, seed: 0 }
    }
}

impl SdpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("solver tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// One equality constraint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraint {
    pub psd: Vec<(usize, usize, f64)>,
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// An SDP with one PSD block of size `psd_dim` and `lp_dim` nonnegative scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub psd_dim: usize,
    pub lp_dim: usize,
    pub objective_psd: Vec<(usize, usize, f64)>,
    pub objective_lp: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

/// Duality certificate of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal − dual|`.
    pub gap: f64,
    /// Max-norm of `b − A(X)`.
    pub primal_infeasibility: f64,
    /// Max-norm of `C − Z − Aᵀy`.
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DMatrix<f64>,
    pub x_lp: Vec<f64>,
    pub y: Vec<f64>,
    pub z: DMatrix<f64>,
    pub z_lp: Vec<f64>,
    pub certificate: Certificate,
}

impl SdpProblem {
    pub fn new(psd_dim: usize, lp_dim: usize) -> Self {
        SdpProblem { psd_dim, lp_dim, objective_lp: vec![0.0; lp_dim], ..Default::default() }
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    fn check(&self) -> Result<()> {
        if self.psd_dim > MAX_BLOCK_DIM {
            return Err(Error::TooLarge { dim: self.psd_dim, cap: MAX_BLOCK_DIM });
        }
        if self.objective_lp.len() != self.lp_dim {
            return Err(Error::InvalidInput("objective_lp length differs from lp_dim".into()));
        }
        let in_psd = |&(i, j, v): &(usize, usize, f64)| i <= j && j < self.psd_dim && v.is_finite();
        if !self.objective_psd.iter().all(in_psd) {
            return Err(Error::InvalidInput("objective term outside the PSD block".into()));
        }
        for c in &self.constraints {
            if !c.psd.iter().all(in_psd) || !c.lp.iter().all(|&(v, a)| v < self.lp_dim && a.is_finite()) {
                return Err(Error::InvalidInput("constraint term out of range".into()));
            }
            if !c.rhs.is_finite() {
                return Err(Error::InvalidInput("non-finite right-hand side".into()));
            }
        }
        Ok(())
    }

    fn sym_matrix(&self, terms: &[(usize, usize, f64)]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.psd_dim, self.psd_dim);
        for &(i, j, v) in terms {
            if i == j {
                m[(i, i)] += v;
            } else {
                m[(i, j)] += 0.5 * v;
                m[(j, i)] += 0.5 * v;
            }
        }
        m
    }

    /// `A(X, x)` for a possibly non-symmetric `X`.
    fn apply(&self, x: &DMatrix<f64>, x_lp: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let s: f64 = c
                    .psd
                    .iter()
                    .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 0.5 * v * (x[(i, j)] + x[(j, i)]) })
                    .sum();
                s + c.lp.iter().map(|&(k, a)| a * x_lp[k]).sum::<f64>()
            })
            .collect()
    }

    /// `Aᵀ(y)` split into its PSD and LP parts.
    fn adjoint(&self, y: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
        let mut m = DMatrix::zeros(self.psd_dim, self.psd_dim);
        let mut v = vec![0.0; self.lp_dim];
        for (c, &yk) in self.constraints.iter().zip(y) {
            for &(i, j, a) in &c.psd {
                if i == j {
                    m[(i, i)] += yk * a;
                } else {
                    m[(i, j)] += 0.5 * yk * a;
                    m[(j, i)] += 0.5 * yk * a;
                }
            }
            for &(k, a) in &c.lp {
                v[k] += yk * a;
            }
        }
        (m, v)
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_mat(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `t` with `X + t·dX ⪰ 0` (infinite when `dX ⪰ 0`).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(s) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lmin = SymmetricEigen::new(symmetrize(&s)).eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: DMatrix<f64>,
    dz: DMatrix<f64>,
    dx_lp: Vec<f64>,
    dz_lp: Vec<f64>,
    dy: Vec<f64>,
}

struct State<'a> {
    p: &'a SdpProblem,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    x_lp: Vec<f64>,
    z_lp: Vec<f64>,
    y: Vec<f64>,
}

impl State<'_> {
    /// Solves the Newton system for centering target `tau`, with an optional
    /// second-order correction from a predictor direction.
    fn direction(
        &self,
        schur: &Cholesky<f64, nalgebra::Dyn>,
        g: &DMatrix<f64>,
        rp: &[f64],
        rd: &DMatrix<f64>,
        rd_lp: &[f64],
        tau: f64,
        corr: Option<&Direction>,
    ) -> Direction {
        let p = self.p;
        // Part of dX that does not depend on dy.
        let mut base = g * tau - &self.x - &self.x * rd * g;
        if let Some(c) = corr {
            base -= &c.dx * &c.dz * g;
        }
        let mut base_lp: Vec<f64> = (0..p.lp_dim)
            .map(|v| tau / self.z_lp[v] - self.x_lp[v] - self.x_lp[v] * rd_lp[v] / self.z_lp[v])
            .collect();
        if let Some(c) = corr {
            for v in 0..p.lp_dim {
                base_lp[v] -= c.dx_lp[v] * c.dz_lp[v] / self.z_lp[v];
            }
        }
        let ab = p.apply(&base, &base_lp);
        let rhs = DVector::from_iterator(rp.len(), rp.iter().zip(&ab).map(|(r, a)| r - a));
        let dy = schur.solve(&rhs);
        let dy: Vec<f64> = dy.iter().copied().collect();
        let (aty, aty_lp) = p.adjoint(&dy);
        let dz = rd - aty;
        let mut dx_full = g * tau - &self.x - &self.x * &dz * g;
        if let Some(c) = corr {
            dx_full -= &c.dx * &c.dz * g;
        }
        let dx = symmetrize(&dx_full);
        let dz_lp: Vec<f64> = rd_lp.iter().zip(&aty_lp).map(|(r, a)| r - a).collect();
        let dx_lp: Vec<f64> = (0..p.lp_dim)
            .map(|v| {
                let mut d = tau / self.z_lp[v] - self.x_lp[v] - self.x_lp[v] * dz_lp[v] / self.z_lp[v];
                if let Some(c) = corr {
                    d -= c.dx_lp[v] * c.dz_lp[v] / self.z_lp[v];
                }
                d
            })
            .collect();
        Direction { dx, dz, dx_lp, dz_lp, dy }
    }

    fn steps(&self, d: &Direction) -> (f64, f64) {
        let ap = max_step_psd(&self.x, &d.dx).min(max_step_lp(&self.x_lp, &d.dx_lp));
        let ad = max_step_psd(&self.z, &d.dz).min(max_step_lp(&self.z_lp, &d.dz_lp));
        (ap, ad)
    }
}

/// Schur complement `M_kl = tr(A_k X A_l Z⁻¹) + Σ_v a_kv a_lv x_v / z_v`.
fn schur_matrix(p: &SdpProblem, x: &DMatrix<f64>, g: &DMatrix<f64>, x_lp: &[f64], z_lp: &[f64]) -> DMatrix<f64> {
    let m = p.constraints.len();
    let mut s = DMatrix::zeros(m, m);
    for k in 0..m {
        let ak = &p.constraints[k].psd;
        if ak.is_empty() {
            continue;
        }
        for l in k..m {
            let al = &p.constraints[l].psd;
            let mut acc = 0.0;
            for &(i, j, v) in ak {
                for &(pp, q, w) in al {
                    acc += 0.25
                        * v
                        * w
                        * (x[(j, pp)] * g[(q, i)]
                            + x[(j, q)] * g[(pp, i)]
                            + x[(i, pp)] * g[(q, j)]
                            + x[(i, q)] * g[(pp, j)]);
                }
            }
            s[(k, l)] = acc;
        }
    }
    // LP contributions, grouped by variable.
    let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.lp_dim];
    for (k, c) in p.constraints.iter().enumerate() {
        for &(v, a) in &c.lp {
            by_var[v].push((k, a));
        }
    }
    for (v, list) in by_var.iter().enumerate() {
        let w = x_lp[v] / z_lp[v];
        for &(k, a) in list {
            for &(l, b) in list {
                if l >= k {
                    s[(k, l)] += w * a * b;
                }
            }
        }
    }
    for k in 0..m {
        for l in 0..k {
            s[(k, l)] = s[(l, k)];
        }
    }
    s
}

fn factor_schur(mut s: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let scale = (0..s.nrows()).fold(0.0f64, |a, i| a.max(s[(i, i)].abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        if let Some(c) = Cholesky::new(s.clone()) {
            return Some(c);
        }
        let next = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
        for i in 0..s.nrows() {
            s[(i, i)] += next - reg;
        }
        reg = next;
    }
    None
}

/// Solves `problem` to an absolute duality gap of `settings.tolerance / 10`.
pub fn solve(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    settings.validate()?;
    problem.check()?;
    let n = problem.psd_dim;
    let nlp = problem.lp_dim;
    let m = problem.constraints.len();
    let b: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
    let c_psd = problem.sym_matrix(&problem.objective_psd);
    let c_lp = &problem.objective_lp;

    let a_norm = problem
        .constraints
        .iter()
        .map(|c| c.psd.iter().map(|t| t.2.abs()).chain(c.lp.iter().map(|t| t.1.abs())).fold(0.0, f64::max))
        .fold(1.0, f64::max);
    let b_norm = max_abs(&b);
    let c_norm = max_abs_mat(&c_psd).max(max_abs(c_lp));
    let xi = 10.0f64.max((1.0 + b_norm) / a_norm).max(((n + nlp) as f64).sqrt());
    let eta = 10.0f64.max(c_norm).max(a_norm);

    let mut st = State {
        p: problem,
        x: DMatrix::identity(n, n) * xi,
        z: DMatrix::identity(n, n) * eta,
        x_lp: vec![xi; nlp],
        z_lp: vec![eta; nlp],
        y: vec![0.0; m],
    };
    let dims = (n + nlp).max(1) as f64;
    let gap_target = settings.tolerance * 0.1;
    let feas_target = 1e-9 * (1.0 + b_norm.max(c_norm));
    let mut last_gap = f64::INFINITY;

    for iter in 0..=settings.max_iterations {
        let ax = problem.apply(&st.x, &st.x_lp);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let (aty, aty_lp) = problem.adjoint(&st.y);
        let rd = &c_psd - &st.z - aty;
        let rd_lp: Vec<f64> = (0..nlp).map(|v| c_lp[v] - st.z_lp[v] - aty_lp[v]).collect();
        let pobj = inner(&c_psd, &st.x) + dotv(c_lp, &st.x_lp);
        let dobj = dotv(&b, &st.y);
        let gap = (pobj - dobj).abs();
        let pinf = max_abs(&rp);
        let dinf = max_abs_mat(&rd).max(max_abs(&rd_lp));
        last_gap = gap;
        let cert = Certificate {
            primal_objective: pobj,
            dual_objective: dobj,
            gap,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            iterations: iter,
        };
        let mu = (inner(&st.x, &st.z) + dotv(&st.x_lp, &st.z_lp)) / dims;
        if gap <= gap_target && pinf <= feas_target && dinf <= feas_target && mu * dims <= gap_target {
            return Ok(SdpSolution {
                x: st.x,
                x_lp: st.x_lp,
                y: st.y,
                z: st.z,
                z_lp: st.z_lp,
                certificate: cert,
            });
        }
        if iter == settings.max_iterations {
            break;
        }

        let g = if n > 0 {
            match Cholesky::new(st.z.clone()) {
                Some(c) => c.inverse(),
                None => break,
            }
        } else {
            DMatrix::zeros(0, 0)
        };
        let g = symmetrize(&g);
        let Some(schur) = factor_schur(schur_matrix(problem, &st.x, &g, &st.x_lp, &st.z_lp)) else {
            break;
        };

        let pred = st.direction(&schur, &g, &rp, &rd, &rd_lp, 0.0, None);
        let (ap, ad) = st.steps(&pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff = &st.x + &pred.dx * ap;
        let z_aff = &st.z + &pred.dz * ad;
        let xl_aff: Vec<f64> = (0..nlp).map(|v| st.x_lp[v] + ap * pred.dx_lp[v]).collect();
        let zl_aff: Vec<f64> = (0..nlp).map(|v| st.z_lp[v] + ad * pred.dz_lp[v]).collect();
        let mu_aff = (inner(&x_aff, &z_aff) + dotv(&xl_aff, &zl_aff)) / dims;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        let dir = st.direction(&schur, &g, &rp, &rd, &rd_lp, sigma * mu, Some(&pred));
        let (ap, ad) = st.steps(&dir);
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        st.x = symmetrize(&(&st.x + &dir.dx * ap));
        for v in 0..nlp {
            st.x_lp[v] += ap * dir.dx_lp[v];
            st.z_lp[v] += ad * dir.dz_lp[v];
        }
        st.z = symmetrize(&(&st.z + &dir.dz * ad));
        for k in 0..m {
            st.y[k] += ad * dir.dy[k];
        }
    }
    Err(Error::SolverNonConvergence { iterations: settings.max_iterations, gap: last_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min x0 + 2 x1  s.t. x0 + x1 = 1, x ≥ 0  → 1
        let mut p = SdpProblem::new(0, 2);
        p.objective_lp = vec![1.0, 2.0];
        p.add_constraint(Constraint { psd: vec![], lp: vec![(0, 1.0), (1, 1.0)], rhs: 1.0 });
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert!((s.certificate.primal_objective - 1.0).abs() < 1e-6);
        assert!(s.certificate.gap <= 1e-7);
    }

    #[test]
    fn max_cut_of_single_edge() {
        // min ⟨C,X⟩ with C = [[0,1],[1,0]]/2·2, diag X = 1 → −1 at X = [[1,−1],[−1,1]].
        let mut p = SdpProblem::new(2, 0);
        p.objective_psd = vec![(0, 1, 1.0)];
        p.add_constraint(Constraint { psd: vec![(0, 0, 1.0)], lp: vec![], rhs: 1.0 });
        p.add_constraint(Constraint { psd: vec![(1, 1, 1.0)], lp: vec![], rhs: 1.0 });
        let s = solve(&p, &SdpSettings::default()).unwrap();
        assert!((s.certificate.primal_objective + 1.0).abs() < 1e-6, "{:?}", s.certificate);
        assert!((s.x[(0, 1)] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn minimum_eigenvalue() {
        // min ⟨C,X⟩ s.t. tr X = 1 equals λ_min(C).
        let c = [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        let mut p = SdpProblem::new(3, 0);
        for i in 0..3 {
            for j in i..3 {
                let v = if i == j { c[i][j] } else { 2.0 * c[i][j] };
                if v != 0.0 {
                    p.objective_psd.push((i, j, v));
                }
            }
        }
        p.add_constraint(Constraint { psd: (0..3).map(|i| (i, i, 1.0)).collect(), lp: vec![], rhs: 1.0 });
        let s = solve(&p, &SdpSettings::default()).unwrap();
        let expected = 2.0 - 2f64.sqrt();
        assert!((s.certificate.primal_objective - expected).abs() < 1e-6);
        assert!((s.certificate.dual_objective - expected).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let p = SdpProblem::new(MAX_BLOCK_DIM + 1, 0);
        assert!(matches!(solve(&p, &SdpSettings::default()), Err(Error::TooLarge { .. })));
        let mut p = SdpProblem::new(2, 0);
        p.objective_psd = vec![(1, 0, 1.0)];
        assert!(solve(&p, &SdpSettings::default()).is_err());
        let s = SdpSettings { tolerance: 0.0, ..Default::default() };
        assert!(solve(&SdpProblem::new(1, 0), &s).is_err());
    }

    #[test]
    fn non_convergence_reports_gap() {
        let mut p = SdpProblem::new(2, 0);
        p.objective_psd = vec![(0, 1, 1.0)];
        p.add_constraint(Constraint { psd: vec![(0, 0, 1.0)], lp: vec![], rhs: 1.0 });
        p.add_constraint(Constraint { psd: vec![(1, 1, 1.0)], lp: vec![], rhs: 1.0 });
        let s = SdpSettings { max_iterations: 1, ..Default::default() };
        match solve(&p, &s) {
            Err(Error::SolverNonConvergence { gap, .. }) => assert!(gap > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
