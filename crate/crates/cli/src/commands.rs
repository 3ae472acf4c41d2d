//! One function per subcommand. Each writes its artifact and returns a
//! verdict that becomes the exit code.

use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime};

use anyhow::{bail, Context, Result};
use ldpgamma_core::hard::{
    build_agnostic_family, build_realizable_family, mix_sigma, refine_agnostic_family, refine_realizable_family,
    reweight_pi_hat, verify_agnostic_family, verify_realizable_family, Reweighting,
};
use ldpgamma_core::learners::{required_sample_size, Task};
use ldpgamma_core::ldp::{audit_privacy, RandomizerSpec};
use ldpgamma_core::model::{build_concept_matrix, build_difference_matrix, sample, ConceptClass, IndexedMatrix};
use ldpgamma_core::norms::{agnostic_dual_witness, eta, eta_dual_witness, gamma2_approx};
use ldpgamma_core::sdp::SdpSettings;
use serde::Serialize;

use crate::config::{ExperimentConfig, MatrixKind};
use crate::experiment::{population, trial_record, trial_seeds, Decision, Learner, Reference};
use crate::io as files;
use crate::sweep;

/// `Positive` maps to exit code 0, `Negative` to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Positive,
    Negative,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Positive
        } else {
            Verdict::Negative
        }
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    command: &'static str,
    config: &'a ExperimentConfig,
    result: T,
}

/// Writes the artifact and a one-line summary; the summary goes to standard
/// error when the artifact itself occupies standard output.
fn emit<T: Serialize>(command: &'static str, cfg: &ExperimentConfig, result: T, summary: &str) -> Result<()> {
    files::write_json(cfg.out.as_deref(), &Artifact { command, config: cfg, result })?;
    if cfg.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn settings() -> SdpSettings {
    SdpSettings::default()
}

fn target_matrix(cfg: &ExperimentConfig) -> Result<(String, IndexedMatrix)> {
    if let Some(path) = &cfg.matrix {
        return Ok((path.display().to_string(), files::load_matrix(path)?));
    }
    let class = files::load_class(&cfg.class)?;
    Ok(match cfg.matrix_kind {
        MatrixKind::Concept => (format!("W({})", cfg.class), build_concept_matrix(&class)),
        MatrixKind::Difference => (format!("D({})", cfg.class), build_difference_matrix(&class)),
    })
}

pub fn gamma2(cfg: &ExperimentConfig) -> Result<Verdict> {
    let (name, m) = target_matrix(cfg)?;
    let res = gamma2_approx(&m, cfg.alpha, &settings())?;
    let summary = format!(
        "gamma2({name}, alpha={}) = {:.6} (rank {}, gap {:.1e})",
        cfg.alpha,
        res.value,
        res.factorization.rank(),
        res.certificate.gap
    );
    emit("gamma2", cfg, &res, &summary)?;
    Ok(Verdict::Positive)
}

pub fn eta_cmd(cfg: &ExperimentConfig) -> Result<Verdict> {
    let class = files::load_class(&cfg.class)?;
    let res = eta(&class, cfg.alpha, &settings())?;
    let summary = format!("eta({}, alpha={}) = {:.6} (gap {:.1e})", cfg.class, cfg.alpha, res.value, res.certificate.gap);
    emit("eta", cfg, &res, &summary)?;
    Ok(Verdict::Positive)
}

pub fn witness(cfg: &ExperimentConfig) -> Result<Verdict> {
    let class = files::load_class(&cfg.class)?;
    let res = match cfg.task.into() {
        Task::Agnostic => agnostic_dual_witness(&build_difference_matrix(&class), cfg.alpha, &settings())?,
        Task::Realizable => eta_dual_witness(&class, cfg.alpha, &settings())?,
    };
    let summary = format!(
        "{:?} witness for {}: objective {:.6} vs primal {:.6}",
        res.kind, cfg.class, res.objective, res.primal_value
    );
    emit("witness", cfg, &res, &summary)?;
    Ok(Verdict::Positive)
}

/// One checked property of a hard family.
#[derive(Debug, Serialize)]
struct Property {
    name: &'static str,
    /// `None` for diagnostics and for checks skipped at this size.
    pass: Option<bool>,
    measured: Option<f64>,
    bound: Option<f64>,
}

impl Property {
    fn check(name: &'static str, pass: bool) -> Self {
        Property { name, pass: Some(pass), measured: None, bound: None }
    }

    fn bounded(name: &'static str, measured: f64, bound: f64, pass: bool) -> Self {
        Property { name, pass: Some(pass), measured: Some(measured), bound: Some(bound) }
    }
}

fn reweighting_property(rw: &Reweighting) -> Property {
    match rw.norm {
        Some(norm) => Property::bounded("reweighting", norm, rw.bound, rw.passes()),
        None => Property { name: "reweighting", pass: None, measured: None, bound: Some(rw.bound) },
    }
}

#[derive(Serialize)]
struct HardFamilyBundle<T: Serialize> {
    properties: Vec<Property>,
    #[serde(flatten)]
    detail: T,
}

fn agnostic_bundle(class: &ConceptClass, alpha: f64, s: &SdpSettings) -> Result<HardFamilyBundle<serde_json::Value>> {
    let w = agnostic_dual_witness(&build_difference_matrix(class), alpha, s)?;
    if w.objective <= 0.0 {
        bail!("gamma2(D, {alpha}) is zero for this class, so there is no hard family");
    }
    let family = build_agnostic_family(class, &w.u)?;
    let report = verify_agnostic_family(class, &family)?;
    let refined = refine_agnostic_family(class, &family, alpha, s)?;
    let rw = reweight_pi_hat(&refined.family.support_matrix(), &refined.family.pi, s)?;
    let properties = vec![
        Property::check("construction-identities", report.passes()),
        Property::bounded(
            "refined-gap",
            refined.lambda_gaps.iter().copied().fold(f64::INFINITY, f64::min),
            refined.property1_bound,
            refined.property1_holds,
        ),
        Property { name: "refined-mu-gap", pass: None, measured: Some(refined.property2_min), bound: None },
        Property::bounded(
            "dual-contraction",
            refined.gamma2_star_u_tilde,
            refined.property3_bound,
            refined.property3_holds,
        ),
        reweighting_property(&rw),
    ];
    let detail = serde_json::json!({
        "witness": w,
        "family": family,
        "report": report,
        "refined": refined,
        "reweighting": rw,
    });
    Ok(HardFamilyBundle { properties, detail })
}

fn realizable_bundle(class: &ConceptClass, alpha: f64, s: &SdpSettings) -> Result<HardFamilyBundle<serde_json::Value>> {
    let w = eta_dual_witness(class, alpha, s)?;
    let family = build_realizable_family(class, &w.u, alpha)?;
    let report = verify_realizable_family(class, &family);
    let refined = refine_realizable_family(class, &family, s)?;
    // Mixed at just under the guaranteed loss of the refined λ̃.
    let mix_alpha = refined.loss_bound * (1.0 - 1e-9);
    let mixed = mix_sigma(class, &refined.family, mix_alpha)?;
    let rw = reweight_pi_hat(&refined.family.support_matrix(), &refined.family.pi, s)?;
    let properties = vec![
        Property::check("construction-identities", report.passes()),
        Property::check("refinement", refined.passes()),
        Property::bounded(
            "dual-contraction",
            refined.gamma2_star_u_tilde,
            refined.contraction_bound,
            refined.gamma2_star_u_tilde <= refined.contraction_bound + ldpgamma_core::hard::NORM_TOL,
        ),
        Property::bounded(
            "mixed-bayes-error",
            mixed.bayes_errors.iter().copied().fold(f64::INFINITY, f64::min),
            mix_alpha / 2.0,
            mixed.passes(),
        ),
        reweighting_property(&rw),
    ];
    let detail = serde_json::json!({
        "witness": w,
        "family": family,
        "report": report,
        "refined": refined,
        "mixed": mixed,
        "reweighting": rw,
    });
    Ok(HardFamilyBundle { properties, detail })
}

pub fn hardfamily(cfg: &ExperimentConfig) -> Result<Verdict> {
    let class = files::load_class(&cfg.class)?;
    let s = settings();
    let bundle = match cfg.task.into() {
        Task::Agnostic => agnostic_bundle(&class, cfg.alpha, &s)?,
        Task::Realizable => realizable_bundle(&class, cfg.alpha, &s)?,
    };
    let failed: Vec<&str> = bundle.properties.iter().filter(|p| p.pass == Some(false)).map(|p| p.name).collect();
    let checked = bundle.properties.iter().filter(|p| p.pass.is_some()).count();
    let summary = if failed.is_empty() {
        format!("hard family for {}: {checked} properties hold", cfg.class)
    } else {
        format!("hard family for {}: failed {}", cfg.class, failed.join(", "))
    };
    emit("hardfamily", cfg, &bundle, &summary)?;
    Ok(Verdict::from_bool(failed.is_empty()))
}

#[derive(Serialize)]
struct AuditResult {
    source: String,
    d: usize,
    columns: usize,
    m: f64,
    epsilon: f64,
    max_log_ratio: f64,
    enumerated: bool,
    passes: bool,
}

pub fn audit(cfg: &ExperimentConfig) -> Result<Verdict> {
    let kind = cfg.randomizer_kind()?;
    let params = cfg.task_config()?.privacy()?;
    let (source, spec) = match &cfg.matrix {
        Some(path) => (path.display().to_string(), RandomizerSpec::new(kind, files::load_matrix(path)?)?),
        None => {
            let class = files::load_class(&cfg.class)?;
            let learner = Learner::prepare(cfg.task.into(), &class, &cfg.task_config()?)?;
            (format!("A({})", cfg.class), learner.randomizer().clone())
        }
    };
    let a = audit_privacy(&spec, &params)?;
    let res = AuditResult {
        source,
        d: spec.d,
        columns: spec.a.ncols(),
        m: spec.m,
        epsilon: a.epsilon,
        max_log_ratio: a.max_log_ratio,
        enumerated: a.enumerated,
        passes: a.passes(),
    };
    let summary = format!(
        "{} on {}: {} max log-ratio {:.9} vs epsilon {} ({})",
        kind.name(),
        res.source,
        if res.enumerated { "enumerated" } else { "analytic" },
        res.max_log_ratio,
        res.epsilon,
        if res.passes { "pass" } else { "FAIL" }
    );
    let verdict = Verdict::from_bool(res.passes);
    emit("audit", cfg, res, &summary)?;
    Ok(verdict)
}

#[derive(Serialize)]
struct SimulationResult {
    n: usize,
    /// `formula`, `override` or `data`.
    n_source: &'static str,
    norm: Option<f64>,
    decision: Decision,
    outcome: String,
    achieved_loss: Option<f64>,
    reference: Option<Reference>,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Verdict> {
    let class = files::load_class(&cfg.class)?;
    let task: Task = cfg.task.into();
    let tcfg = cfg.task_config()?;
    let learner = Learner::prepare(task, &class, &tcfg)?;
    let (data_seed, protocol_seed) = trial_seeds(cfg.seed, 0, 0);
    let (data, dist, n_source, norm) = match &cfg.data {
        Some(path) => (files::read_dataset(path, class.domain())?, None, "data", None),
        None => {
            let dist = population(cfg, &class)?;
            let (n, source, norm) = match cfg.n {
                Some(n) => (n, "override", None),
                None => {
                    let s = required_sample_size(task, &class, &tcfg)?;
                    (s.n, "formula", Some(s.norm))
                }
            };
            (sample(&dist, n, data_seed)?, Some(dist), source, norm)
        }
    };
    let transcript = learner.transcript(&data, protocol_seed)?;
    if let Some(path) = &cfg.transcript {
        files::write_transcript(path, &transcript)?;
    }
    if let Some(path) = &cfg.answers {
        files::write_answers(path, &learner.answers(&transcript)?)?;
    }
    let decision = learner.decide(cfg.mode, &transcript)?;
    let (outcome, achieved_loss, reference) = match &dist {
        Some(dist) => {
            let r = Reference::of(&class, dist)?;
            let (o, l) = trial_record(task, cfg.alpha, &class, dist, r, &decision)?;
            (o, l, Some(r))
        }
        None => (
            match &decision {
                Decision::Learned { .. } => "learned".into(),
                Decision::Rejected { .. } => "rejected".into(),
                Decision::Refuted { value } => format!("{value:+}"),
            },
            None,
            None,
        ),
    };
    let verdict = match &decision {
        Decision::Learned { .. } => Verdict::from_bool(outcome != "failure"),
        Decision::Rejected { .. } => Verdict::Negative,
        Decision::Refuted { value } => Verdict::from_bool(*value == 1),
    };
    let summary = match &decision {
        Decision::Learned { outcome: o } => format!(
            "learn on {} with n={}: chose {}{}",
            cfg.class,
            data.len(),
            o.chosen,
            achieved_loss.map_or_else(String::new, |l| format!(" (population loss {l:.4}, {outcome})"))
        ),
        Decision::Rejected { reason } => format!("no concept accepted with n={}: {reason}", data.len()),
        Decision::Refuted { value } => format!("refute on {} with n={}: {value:+}", cfg.class, data.len()),
    };
    let res = SimulationResult { n: data.len(), n_source, norm, decision, outcome, achieved_loss, reference };
    emit("simulate", cfg, res, &summary)?;
    Ok(verdict)
}

pub fn sweep_cmd(cfg: &ExperimentConfig) -> Result<Verdict> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let result = sweep::run_sweep(cfg)?;
    let wall_ms = clock.elapsed().as_millis();
    match &cfg.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            sweep::write_csv(BufWriter::new(file), &result)?;
            sweep::write_sidecar(&sweep::sidecar_path(path), cfg, &result, started, wall_ms)?;
            print_sweep_summary(&mut io::stdout(), &result, Some(path))?;
        }
        None => {
            sweep::write_csv(io::stdout().lock(), &result)?;
            print_sweep_summary(&mut io::stderr(), &result, None)?;
        }
    }
    Ok(Verdict::Positive)
}

fn print_sweep_summary<W: Write>(w: &mut W, result: &sweep::SweepResult, path: Option<&Path>) -> Result<()> {
    for s in &result.summary.points {
        writeln!(
            w,
            "point {}: n={} epsilon={} alpha={} success {:.3}{}",
            s.point_id,
            s.n,
            s.epsilon,
            s.alpha,
            s.success_rate,
            s.rmse.map_or_else(String::new, |r| format!(" rmse {r:.4}"))
        )?;
    }
    for s in &result.summary.slopes {
        writeln!(w, "epsilon={} alpha={}: rmse slope {:.3}", s.epsilon, s.alpha, s.slope)?;
    }
    if let Some(p) = path {
        writeln!(w, "wrote {} trial rows to {}", result.rows.len(), p.display())?;
    }
    Ok(())
}
