use ldpgamma_core::hard::{geometric_binning, BinningResult};
use ldpgamma_core::learners::{AgnosticLearner, TaskConfig};
use ldpgamma_core::ldp::{
    channel_marginal, contraction_bound, kl_divergence, run_transcript, tv_distance, PrivacyParams, RandomizerKind,
    RandomizerSpec,
};
use ldpgamma_core::model::{
    bayes_error, build_concept_matrix, empirical_loss, operator_norm_inf_to_l2, population_loss, sample, IndexedMatrix,
    LabeledDistribution, OperatorNormMethod, WeightedIndex,
};
use ldpgamma_core::norms::{gamma2, gamma2_dual};
use ldpgamma_core::sdp::SdpSettings;
use ldpgamma_core::zoo;
use proptest::prelude::*;

fn domain(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn distribution() -> impl Strategy<Value = LabeledDistribution> {
    (1usize..5).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..1.0, 2 * n).prop_filter_map("zero mass", move |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-6).then(|| LabeledDistribution::new(domain(n), raw.iter().map(|v| v / s).collect()).unwrap())
        })
    })
}

fn hypothesis(n: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1 } else { -1 }), n)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = IndexedMatrix> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, cols), rows)
        .prop_map(|r| IndexedMatrix::from_rows(&r).unwrap())
}

fn sign_oracle(m: &IndexedMatrix, w: &[f64]) -> f64 {
    let cols = m.ncols();
    (0..1u32 << cols)
        .map(|mask| {
            let f: Vec<f64> = (0..cols).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            (0..m.nrows())
                .map(|i| {
                    let p: f64 = m.row(i).iter().zip(&f).map(|(a, b)| a * b).sum();
                    w[i] * p * p
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flipping_labels_complements_loss((d, h) in distribution().prop_flat_map(|d| {
        let n = d.domain().len();
        (Just(d), hypothesis(n))
    })) {
        let a = population_loss(&d, &h).unwrap();
        let b = population_loss(&d.flip_labels(), &h).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
        prop_assert!(bayes_error(&d) <= a + 1e-12);
    }

    #[test]
    fn empirical_loss_matches_histogram(seed in 0u64..1000, d in distribution()) {
        let n = d.domain().len();
        let data = sample(&d, 50, seed).unwrap();
        let h = vec![1i8; n];
        let wrong = data.records().iter().filter(|(_, y)| *y != 1).count();
        prop_assert!((empirical_loss(&data, &h).unwrap() - wrong as f64 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_matches_enumeration(m in matrix(3, 6), raw in prop::collection::vec(0.01f64..1.0, 3)) {
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let pi = WeightedIndex::from_masses(domain(3), &raw).unwrap();
        let got = operator_norm_inf_to_l2(&m, &pi, OperatorNormMethod::default()).unwrap();
        prop_assert!((got - sign_oracle(&m, &w)).abs() < 1e-9);
    }

    #[test]
    fn binning_meets_guarantee(
        a in prop::collection::vec(0.0f64..=1.0, 1..12),
        seed in prop::collection::vec(0.01f64..1.0, 12),
        beta in prop::sample::select(vec![0.5, 0.25, 0.1, 0.03, 0.01]),
    ) {
        let raw = &seed[..a.len()];
        let s: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|v| v / s).collect();
        prop_assume!(a.iter().zip(&pi).map(|(a, p)| a * p).sum::<f64>() > beta);
        let b = geometric_binning(&a, &pi, beta).unwrap();
        prop_assert!(b.score >= BinningResult::guarantee(&a, &pi, beta) - 1e-12);
        prop_assert!(b.floor_score <= b.score + 1e-12);
    }

    #[test]
    fn pinsker_and_contraction(p in distribution(), seed in 0u64..1000, eps in 0.1f64..3.0) {
        let n = p.domain().len();
        let q = {
            let shifted: Vec<f64> = p.probs().iter().enumerate().map(|(i, v)| v + ((seed as usize + i) % 3) as f64 * 0.1).collect();
            let s: f64 = shifted.iter().sum();
            LabeledDistribution::new(p.domain().to_vec(), shifted.iter().map(|v| v / s).collect()).unwrap()
        };
        let a = IndexedMatrix::from_rows(&[(0..2 * n).map(|j| if j % 2 == 0 { 1.0 } else { -0.5 }).collect()]).unwrap();
        let spec = RandomizerSpec::new(RandomizerKind::CoordRr, a).unwrap();
        let params = PrivacyParams::new(eps).unwrap();
        let (mp, mq) = (channel_marginal(&spec, &params, &p).unwrap(), channel_marginal(&spec, &params, &q).unwrap());
        let kl = kl_divergence(&mp, &mq).unwrap();
        let tv = tv_distance(&mp, &mq).unwrap();
        prop_assert!(kl >= 2.0 * tv * tv - 1e-15);
        prop_assert!(kl <= contraction_bound(&params, tv_distance(&p, &q).unwrap()) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gamma2_is_a_norm(a in matrix(3, 3), b in matrix(3, 3), c in -3.0f64..3.0) {
        let s = SdpSettings::default();
        let ga = gamma2(&a, &s).unwrap().0;
        let gb = gamma2(&b, &s).unwrap().0;
        let gsum = gamma2(&a.add(&b).unwrap(), &s).unwrap().0;
        let gscaled = gamma2(&a.scale(c), &s).unwrap().0;
        prop_assert!(gsum <= ga + gb + 1e-5);
        prop_assert!((gscaled - c.abs() * ga).abs() <= 1e-5 * (1.0 + ga));
    }

    #[test]
    fn gamma2_shrinks_on_submatrices(m in matrix(4, 3)) {
        let s = SdpSettings::default();
        let full = gamma2(&m, &s).unwrap().0;
        let sub = gamma2(&m.select_rows(&[0, 2]), &s).unwrap().0;
        prop_assert!(sub <= full + 1e-5);
    }

    #[test]
    fn dual_norm_bounds_pairing(u in matrix(3, 4), m in matrix(3, 4)) {
        let s = SdpSettings::default();
        let dual = gamma2_dual(&u, &s).unwrap().value;
        let primal = gamma2(&m, &s).unwrap().0;
        prop_assert!(u.dot(&m).unwrap() <= dual * primal + 1e-5);
    }
}

#[test]
fn noise_free_estimates_track_empirical_losses() {
    let class = zoo::thresholds(4).unwrap();
    let mut cfg = TaskConfig::new(0.1, 0.1, 1.0);
    cfg.randomizer = RandomizerKind::NoiseFree;
    let learner = AgnosticLearner::prepare(&class, &cfg).unwrap();
    let dist = LabeledDistribution::uniform_labels(class.domain().to_vec()).unwrap();
    let data = sample(&dist, 200, 3).unwrap();
    let transcript = run_transcript(&data, learner.randomizer(), &cfg.privacy().unwrap(), 0).unwrap();
    let estimates = learner.estimate(&transcript).unwrap();
    let w = build_concept_matrix(&class);
    for (c, est) in estimates.iter().enumerate() {
        let h: Vec<i8> = w.row(c).iter().map(|v| *v as i8).collect();
        let exact = empirical_loss(&data, &h).unwrap();
        // R·A is within α/2 of the lifted W, so each loss is within α/4.
        assert!((est - exact).abs() <= 0.025 + 1e-6, "concept {c}: {est} vs {exact}");
    }
}
