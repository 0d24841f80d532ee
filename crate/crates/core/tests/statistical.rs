//! Statistical invariants of the loss mechanisms, checked end to end
//! through the Monte-Carlo engine.

use cvmshare::bayes::{BetaBernoulliModel, NormalNormalModel, PosteriorModel};
use cvmshare::features::FeatureBank;
use cvmshare::mechanism::{MechanismConfig, SplitMap};
use cvmshare::sim::{
    expected_loss, mib_curve, truthfulness_gap, CountRule, DataGenerator, LossMethod,
    ScalarDistribution, Strategy,
};

fn bb_model() -> PosteriorModel {
    PosteriorModel::BetaBernoulli(BetaBernoulliModel::new(2.0, 2.0).unwrap())
}

fn nn_model() -> PosteriorModel {
    PosteriorModel::NormalNormal(NormalNormalModel::new(0.0, 1.0, 1.0).unwrap())
}

fn alg1(model: PosteriorModel) -> LossMethod {
    LossMethod::Mechanism { config: MechanismConfig::alg1(model) }
}

fn alg3(kappa: SplitMap) -> LossMethod {
    LossMethod::Mechanism { config: MechanismConfig::alg3(FeatureBank::identity(), kappa) }
}

fn uniform() -> DataGenerator {
    DataGenerator::Frequentist { dist: ScalarDistribution::Uniform { low: 0.0, high: 1.0 } }
}

// Truthful reporting is never beaten by a shipped fabrication, for both
// conjugate models, at ten thousand prior-and-data replications.
#[test]
fn truthfulness_gap_nonnegative_for_shipped_strategies() {
    let trials = 10_000;

    let bb_strategies = [
        Strategy::BernHalfAugment { count: CountRule::default() },
        Strategy::BernPluginAugment { count: CountRule::default() },
        Strategy::DuplicateAugment { count: CountRule::default() },
    ];
    for (i, strategy) in bb_strategies.iter().enumerate() {
        let gap = truthfulness_gap(
            &DataGenerator::Bayesian { model: bb_model() },
            &[25; 6],
            strategy,
            &alg1(bb_model()),
            0,
            trials,
            0xD00D + i as u64,
        )
        .unwrap();
        assert!(
            gap.gap >= -3.0 * gap.combined_se,
            "beta-Bernoulli {}: gap {} (se {})",
            strategy.name(),
            gap.gap,
            gap.combined_se
        );
    }

    let nn_strategies = [
        Strategy::MidpointInsert,
        Strategy::DuplicateAugment { count: CountRule::default() },
        Strategy::ShiftAll { delta: 0.5 },
    ];
    for (i, strategy) in nn_strategies.iter().enumerate() {
        let gap = truthfulness_gap(
            &DataGenerator::Bayesian { model: nn_model() },
            &[25; 6],
            strategy,
            &alg1(nn_model()),
            0,
            trials,
            0xF00D + i as u64,
        )
        .unwrap();
        assert!(
            gap.gap >= -3.0 * gap.combined_se,
            "normal-normal {}: gap {} (se {})",
            strategy.name(),
            gap.gap,
            gap.combined_se
        );
    }
}

// More truthful data strictly lowers the expected loss for both shipped
// models: the curve over n in {5, 10, 20, 40} decreases beyond 2 SE.
#[test]
fn mib_holds_for_both_conjugate_models() {
    for (model, seed) in [(bb_model(), 0xB0B), (nn_model(), 0xA0A)] {
        let curve = mib_curve(
            &DataGenerator::Bayesian { model },
            &[40, 30, 30],
            0,
            &[5, 10, 20, 40],
            &alg1(model),
            40_000,
            seed,
        )
        .unwrap();
        for pair in curve.windows(2) {
            let (n0, a) = pair[0];
            let (n1, b) = pair[1];
            let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            assert!(
                a.mean - b.mean > 2.0 * combined,
                "{model:?}: E[tau({n0})] = {} vs E[tau({n1})] = {} (combined se {combined})",
                a.mean,
                b.mean
            );
        }
    }
}

// Prior-free truthful expectation with a nonzero augmentation set:
// E[tau] = (1/6)(1/(|Y|+|W|) + 1/|Z|) for continuous data.
#[test]
fn prior_free_expectation_with_augmentation() {
    // Submission 10, pooled others 24, kappa = 3: |Y union W| = 13, |Z| = 20.
    let est = expected_loss(
        &uniform(),
        &[10, 24],
        &[Strategy::Truthful, Strategy::Truthful],
        &alg3(SplitMap::Constant { value: 3 }),
        0,
        200_000,
        0xE0E,
    )
    .unwrap();
    let expect = (1.0 / 6.0) * (1.0 / 13.0 + 1.0 / 20.0);
    assert!(
        (est.mean - expect).abs() / expect < 0.02,
        "mean {} vs {expect} (se {})",
        est.mean,
        est.std_error
    );
}

// The prior-agnostic loss is epsilon-approximately truthful with
// epsilon = (1/4)(1/(|X|+|W|) + 1/|Z|): no shipped fabrication wins by
// more than epsilon.
#[test]
fn prior_free_gaps_respect_the_approximation_bound() {
    let sizes = [12usize, 25];
    let strategies = [
        Strategy::MidpointInsert,
        Strategy::DuplicateAugment { count: CountRule::default() },
        Strategy::ShiftAll { delta: 0.3 },
    ];
    // kappa = 0: |X| = 12, |W| = 0, |Z| = 24.
    let epsilon = 0.25 * (1.0 / 12.0 + 1.0 / 24.0);
    for (i, strategy) in strategies.iter().enumerate() {
        let gap = truthfulness_gap(
            &uniform(),
            &sizes,
            strategy,
            &alg3(SplitMap::zero()),
            0,
            20_000,
            0xAB + i as u64,
        )
        .unwrap();
        assert!(
            gap.gap >= -epsilon - 3.0 * gap.combined_se,
            "{}: gap {} breaches epsilon {epsilon}",
            strategy.name(),
            gap.gap
        );
    }
}

// Baselines run through the identical engine: swapping the scoring
// method is the only difference between these runs.
#[test]
fn baselines_flow_through_the_same_pipeline() {
    use cvmshare::sim::BaselineKind;
    for kind in [BaselineKind::Cvm, BaselineKind::Ks, BaselineKind::MeanDiff] {
        let method = LossMethod::Baseline { kind, bank: FeatureBank::identity() };
        let est = expected_loss(
            &uniform(),
            &[15, 15, 15],
            &vec![Strategy::Truthful; 3],
            &method,
            0,
            2_000,
            0xBA5E,
        )
        .unwrap();
        assert!(est.mean.is_finite() && est.mean >= 0.0, "{kind:?} mean {}", est.mean);
        assert!(est.std_error > 0.0);
    }
}
