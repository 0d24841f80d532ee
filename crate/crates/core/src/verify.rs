//! The verification suite: every guarantee the library claims, checked
//! end to end with pinned tolerances and fixed seeds.
//!
//! `Full` runs the stated Monte-Carlo budgets; `Fast` runs the same
//! checks at reduced budgets for a quick gate. Each criterion reports
//! the measured values, the target, and a verdict.

use rand::Rng;
use serde::Serialize;

use crate::apps::{
    marketplace_alpha, marketplace_round, purchase_payments, BudgetedPurchaseConfig,
    FederatedConfig, MarketplaceConfig, Valuation,
};
use crate::bayes::{BetaBernoulliModel, NormalNormalModel, PosteriorModel};
use crate::features::FeatureBank;
use crate::mechanism::{
    run_mechanism, FeatureLoss, LossReport, MechanismConfig, SplitMap, SubmissionSet,
};
use crate::rng::substream;
use crate::sim::{
    coupled_size_losses, expected_loss, generate_scenario, truthfulness_gap, BaselineKind,
    CountRule, DataGenerator, EmbeddingModel, LossMethod, MonteCarloEstimate, ScalarDistribution,
    Strategy,
};
use crate::stats::ecdf_at;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Fast,
    Full,
}

impl VerifyLevel {
    fn pick(&self, fast: u64, full: u64) -> u64 {
        match self {
            VerifyLevel::Fast => fast,
            VerifyLevel::Full => full,
        }
    }
}

/// One measured assertion inside a criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    fn new(label: impl Into<String>, measured: f64, target: impl Into<String>, pass: bool) -> Self {
        Self { label: label.into(), measured, target: target.into(), pass }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub millis: u128,
}

impl CriterionOutcome {
    pub fn render(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!("[{verdict}] criterion {:2}: {} ({} ms)", self.id, self.name, self.millis);
        for check in &self.checks {
            line.push_str(&format!(
                "\n    {} {}: measured {:.6e}, target {}",
                if check.pass { "ok " } else { "FAIL" },
                check.label,
                check.measured,
                check.target
            ));
        }
        line
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub level: VerifyLevel,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for outcome in &self.outcomes {
            out.push_str(&outcome.render());
            out.push('\n');
        }
        let passed = self.outcomes.iter().filter(|o| o.pass).count();
        out.push_str(&format!("{passed}/{} criteria passed\n", self.outcomes.len()));
        out
    }
}

/// Relative-error acceptance, the workhorse of the closed-form checks.
pub fn rel_err_within(measured: f64, target: f64, tolerance: f64) -> bool {
    (measured - target).abs() / target.abs() <= tolerance
}

pub const CRITERION_IDS: [u8; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

pub fn run_suite(level: VerifyLevel) -> SuiteReport {
    let outcomes = CRITERION_IDS.iter().map(|&id| run_criterion(id, level)).collect();
    SuiteReport { level, outcomes }
}

/// Wall-clock budgets (milliseconds) per criterion at the full level.
fn budget_millis(id: u8) -> Option<u128> {
    match id {
        1 => Some(5_000),
        2 | 3 => Some(10_000),
        4 | 5 => Some(30_000),
        6 | 7 | 8 | 11 => Some(60_000),
        9 => Some(1_000),
        10 => Some(300_000),
        12 => Some(120_000),
        _ => None,
    }
}

pub fn run_criterion(id: u8, level: VerifyLevel) -> CriterionOutcome {
    let start = std::time::Instant::now();
    let (name, checks) = match id {
        1 => ("one-sample ECDF identity", c1_one_sample(level)),
        2 => ("two-sample ECDF expectation", c2_two_sample(level)),
        3 => ("prior-free truthful loss", c3_prior_free(level)),
        4 => ("Bayesian truthful-loss bounds", c4_bayes_bounds(level)),
        5 => ("posterior closed forms vs oracles", c5_posterior_oracles(level)),
        6 => ("beta-Bernoulli truthfulness gaps", c6_bb_gaps(level)),
        7 => ("normal-normal truthfulness gaps", c7_nn_gaps(level)),
        8 => ("more-data monotonicity and sensitivity", c8_mib(level)),
        9 => ("budgeted purchase properties", c9_purchase(level)),
        10 => ("marketplace calibration and optimum", c10_marketplace(level)),
        11 => ("federated utility and punishment", c11_federated(level)),
        12 => ("embedding pipeline direction", c12_embedding(level)),
        13 => ("seeded determinism", c13_determinism(level)),
        other => panic!("unknown criterion {other}"),
    };
    let millis = start.elapsed().as_millis();
    let mut checks = checks;
    if let Some(budget) = budget_millis(id) {
        checks.push(Check::new(
            "wall-clock budget",
            millis as f64 / 1000.0,
            format!("< {} s", budget / 1000),
            millis < budget,
        ));
    }
    CriterionOutcome { id, name, pass: checks.iter().all(|c| c.pass), checks, millis }
}

// ---------------------------------------------------------------------
// Criterion 1: E[(F_X(T) - T)^2] = 1/(6n) for X ~ U(0,1)^n, T ~ U(0,1).

fn c1_one_sample(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(30_000, 200_000);
    let n = 20usize;
    let mut acc = 0.0;
    for t in 0..trials {
        let mut rng = substream(0x5EED_0001, &[t]);
        let points: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let eval: f64 = rng.random();
        let f = ecdf_at(&points, eval).expect("nonempty");
        acc += (f - eval) * (f - eval);
    }
    let mean = acc / trials as f64;
    let target = 1.0 / (6.0 * n as f64);
    vec![Check::new(
        format!("mean over {trials} trials"),
        mean,
        format!("{target:.6e} +- 2%"),
        rel_err_within(mean, target, 0.02),
    )]
}

// ---------------------------------------------------------------------
// Criterion 2: E[(F_X(T) - F_Y(T))^2] = (1/6)(1/n + 1/m) for continuous
// data, and <= (1/4)(1/n + 1/m) for Bernoulli data.

fn c2_two_sample(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(30_000, 200_000);
    let (n, m) = (10usize, 30usize);

    let mut continuous = 0.0;
    let mut discrete = 0.0;
    for t in 0..trials {
        let mut rng = substream(0x5EED_0002, &[t]);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let eval: f64 = rng.random();
        let d = ecdf_at(&xs, eval).unwrap() - ecdf_at(&ys, eval).unwrap();
        continuous += d * d;

        let draw = |r: &mut rand_chacha::ChaCha12Rng| {
            if r.random::<f64>() < 0.3 {
                1.0
            } else {
                0.0
            }
        };
        let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let ys: Vec<f64> = (0..m).map(|_| draw(&mut rng)).collect();
        let eval = draw(&mut rng);
        let d = ecdf_at(&xs, eval).unwrap() - ecdf_at(&ys, eval).unwrap();
        discrete += d * d;
    }
    let continuous = continuous / trials as f64;
    let discrete = discrete / trials as f64;
    let target = (1.0 / 6.0) * (1.0 / n as f64 + 1.0 / m as f64);
    let bound = (1.0 / 4.0) * (1.0 / n as f64 + 1.0 / m as f64);
    vec![
        Check::new(
            "continuous uniform mean",
            continuous,
            format!("{target:.6e} +- 2%"),
            rel_err_within(continuous, target, 0.02),
        ),
        Check::new(
            "Bernoulli(0.3) mean",
            discrete,
            format!("<= {bound:.6e}"),
            discrete <= bound,
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 3: prior-agnostic truthful loss with |Y ∪ W| = 20, |Z| = 20
// equals (1/6)(1/20 + 1/20) = 1/60 for continuous data.

fn uniform_generator() -> DataGenerator {
    DataGenerator::Frequentist { dist: ScalarDistribution::Uniform { low: 0.0, high: 1.0 } }
}

fn alg3_identity() -> LossMethod {
    LossMethod::Mechanism { config: MechanismConfig::alg3(FeatureBank::identity(), SplitMap::zero()) }
}

fn c3_estimate(level: VerifyLevel) -> MonteCarloEstimate {
    let trials = level.pick(40_000, 100_000);
    expected_loss(
        &uniform_generator(),
        &[20, 21],
        &[Strategy::Truthful, Strategy::Truthful],
        &alg3_identity(),
        0,
        trials,
        0x5EED_0003,
    )
    .expect("estimation succeeds")
}

fn c3_prior_free(level: VerifyLevel) -> Vec<Check> {
    let est = c3_estimate(level);
    let target = 1.0 / 60.0;
    vec![Check::new(
        format!("mean over {} trials (se {:.2e})", est.trials, est.std_error),
        est.mean,
        format!("{target:.6e} +- 2%"),
        rel_err_within(est.mean, target, 0.02),
    )]
}

// ---------------------------------------------------------------------
// Criterion 4: normal-normal truthful loss with |X| = 10, |Z| = 19 lies
// in [1/114, (1/6)(1/10 + 1/19)] with 3 SE of slack.

fn c4_bayes_bounds(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(10_000, 60_000);
    let model = PosteriorModel::NormalNormal(NormalNormalModel::new(0.0, 1.0, 1.0).unwrap());
    let est = expected_loss(
        &DataGenerator::Bayesian { model },
        &[10, 10, 10],
        &vec![Strategy::Truthful; 3],
        &LossMethod::Mechanism { config: MechanismConfig::alg1(model) },
        0,
        trials,
        0x5EED_0004,
    )
    .expect("estimation succeeds");
    let lower = 1.0 / 114.0;
    let upper = (1.0 / 6.0) * (1.0 / 10.0 + 1.0 / 19.0);
    let slack = 3.0 * est.std_error;
    vec![
        Check::new(
            format!("mean over {trials} trials vs lower bound"),
            est.mean,
            format!(">= {lower:.6e} - 3se"),
            est.mean >= lower - slack,
        ),
        Check::new(
            "mean vs upper bound",
            est.mean,
            format!("<= {upper:.6e} + 3se"),
            est.mean <= upper + slack,
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 5: conjugate closed forms against independent oracles.

fn bb_quadrature(alpha: f64, beta: f64, data: &[f64], t: f64, cells: usize) -> f64 {
    let n = data.len() as f64;
    let sum: f64 = data.iter().sum();
    let a0 = alpha + sum + t;
    let b0 = beta + (n + 1.0) - sum - t;
    let h = 1.0 / cells as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..cells {
        let p = (i as f64 + 0.5) * h;
        let w = ((a0 - 1.0) * p.ln() + (b0 - 1.0) * (1.0 - p).ln()).exp();
        let g = if t >= 0.5 { 1.0 } else { 1.0 - p };
        num += g * w;
        den += w;
    }
    num / den
}

fn c5_posterior_oracles(level: VerifyLevel) -> Vec<Check> {
    // 50-case beta-Bernoulli grid against midpoint quadrature.
    let mut worst_bb = 0.0f64;
    let mut cases = 0;
    'grid: for &alpha in &[1.0, 2.0, 5.0] {
        for &beta in &[1.0, 2.5, 4.0] {
            for &(n, ones) in &[(0usize, 0usize), (3, 1), (3, 3), (8, 2), (8, 6)] {
                for &t in &[0.0, 1.0] {
                    if cases == 50 {
                        break 'grid;
                    }
                    cases += 1;
                    let data: Vec<f64> =
                        (0..n).map(|i| if i < ones { 1.0 } else { 0.0 }).collect();
                    let model = BetaBernoulliModel::new(alpha, beta).unwrap();
                    let closed = model
                        .cond_pred_cdf(&crate::stats::Sample::new(data.clone()).unwrap(), t)
                        .unwrap();
                    let quad = bb_quadrature(alpha, beta, &data, t, 200_000);
                    worst_bb = worst_bb.max((closed - quad).abs());
                }
            }
        }
    }

    // 20 normal-normal cases against exact-posterior Monte-Carlo.
    let draws = level.pick(60_000, 300_000);
    let mut nn_failures = 0u32;
    let mut worst_ratio = 0.0f64;
    for case in 0..20u64 {
        let mut rng = substream(0x5EED_0005, &[case]);
        let prior_mean = rng.random::<f64>() * 2.0 - 1.0;
        let prior_var = 0.5 + rng.random::<f64>() * 2.0;
        let obs_var = 0.5 + rng.random::<f64>() * 1.5;
        let n = (rng.random::<u32>() % 8) as usize;
        let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let t = rng.random::<f64>() * 4.0 - 2.0;

        let model = NormalNormalModel::new(prior_mean, prior_var, obs_var).unwrap();
        let sample = crate::stats::Sample::new(data.clone()).unwrap();
        let closed = model.cond_pred_cdf(&sample, t);

        let conditioning =
            crate::stats::Sample::new(data.iter().copied().chain([t]).collect()).unwrap();
        let (mu_post, var_post) = model.posterior_params(&conditioning);
        let mut hits = 0u64;
        for _ in 0..draws {
            let z1: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let z2: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let mu = mu_post + var_post.sqrt() * z1;
            if mu + obs_var.sqrt() * z2 <= t {
                hits += 1;
            }
        }
        let frac = hits as f64 / draws as f64;
        let se = (closed.max(1e-12) * (1.0 - closed).max(1e-12) / draws as f64).sqrt();
        let ratio = (frac - closed).abs() / se.max(1e-300);
        worst_ratio = worst_ratio.max(ratio);
        if (frac - closed).abs() > 4.0 * se {
            nn_failures += 1;
        }
    }

    vec![
        Check::new(
            format!("worst beta-Bernoulli quadrature error over {cases} cases"),
            worst_bb,
            "<= 1e-6",
            worst_bb <= 1e-6,
        ),
        Check::new(
            format!("normal-normal cases beyond 4 SE (worst {worst_ratio:.2} SE)"),
            nn_failures as f64,
            "= 0 of 20",
            nn_failures == 0,
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 6: beta-Bernoulli(2,2), 20 agents x 50 points. The mechanism
// punishes both fabrications at 3 combined SE; the mean-difference
// baseline is expected to reward at least one of them.

fn c6_bb_gaps(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(5_000, 30_000);
    let model = PosteriorModel::BetaBernoulli(BetaBernoulliModel::new(2.0, 2.0).unwrap());
    let generator = DataGenerator::Bayesian { model };
    let sizes = vec![50usize; 20];
    let mechanism = LossMethod::Mechanism { config: MechanismConfig::alg1(model) };
    let baseline =
        LossMethod::Baseline { kind: BaselineKind::MeanDiff, bank: FeatureBank::identity() };
    let fabrications = [
        Strategy::BernHalfAugment { count: CountRule::default() },
        Strategy::BernPluginAugment { count: CountRule::default() },
    ];

    let mut checks = Vec::new();
    let mut baseline_exploited = false;
    for fabrication in &fabrications {
        let gap = truthfulness_gap(
            &generator,
            &sizes,
            fabrication,
            &mechanism,
            0,
            trials,
            0x5EED_0006,
        )
        .expect("gap estimation succeeds");
        checks.push(Check::new(
            format!("alg1 gap under {} (se {:.2e})", fabrication.name(), gap.combined_se),
            gap.gap,
            "> 3 combined SE",
            gap.gap > 3.0 * gap.combined_se,
        ));

        let base = truthfulness_gap(
            &generator,
            &sizes,
            fabrication,
            &baseline,
            0,
            trials,
            0x5EED_0006,
        )
        .expect("gap estimation succeeds");
        if base.gap <= 0.0 {
            baseline_exploited = true;
        }
        checks.push(Check::new(
            format!("mean_diff gap under {} (se {:.2e})", fabrication.name(), base.combined_se),
            base.gap,
            "recorded",
            true,
        ));
    }
    checks.push(Check::new(
        "mean_diff exploited by at least one fabrication",
        if baseline_exploited { 1.0 } else { 0.0 },
        "gap <= 0 for some fabrication",
        baseline_exploited,
    ));
    checks
}

// ---------------------------------------------------------------------
// Criterion 7: normal-normal with midpoint insertion: the mechanism
// punishes it at 3 SE while the KS baseline rewards it.

fn c7_nn_gaps(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(8_000, 40_000);
    let model = PosteriorModel::NormalNormal(NormalNormalModel::new(0.0, 1.0, 1.0).unwrap());
    let generator = DataGenerator::Bayesian { model };
    let sizes = vec![10usize; 20];
    let mechanism = LossMethod::Mechanism { config: MechanismConfig::alg1(model) };
    let ks = LossMethod::Baseline { kind: BaselineKind::Ks, bank: FeatureBank::identity() };

    let gap = truthfulness_gap(
        &generator,
        &sizes,
        &Strategy::MidpointInsert,
        &mechanism,
        0,
        trials,
        0x5EED_0007,
    )
    .expect("gap estimation succeeds");
    let ks_gap = truthfulness_gap(
        &generator,
        &sizes,
        &Strategy::MidpointInsert,
        &ks,
        0,
        trials,
        0x5EED_0007,
    )
    .expect("gap estimation succeeds");

    vec![
        Check::new(
            format!("alg1 gap under midpoint_insert (se {:.2e})", gap.combined_se),
            gap.gap,
            "> 3 combined SE",
            gap.gap > 3.0 * gap.combined_se,
        ),
        Check::new(
            format!("ks gap under midpoint_insert (se {:.2e})", ks_gap.combined_se),
            ks_gap.gap,
            "<= 0",
            ks_gap.gap <= 0.0,
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 8: the prior-free truthful curve over n in {5,10,20,40} is
// nonincreasing beyond 2 SE and its consecutive differences match the
// closed form (1/6)(1/n - 1/n') within 5%.

fn c8_mib(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(60_000, 300_000);
    let sizes = [5usize, 10, 20, 40];
    let rows = coupled_size_losses(
        &uniform_generator(),
        &[40, 60],
        0,
        &sizes,
        &alg3_identity(),
        trials,
        0x5EED_0008,
    )
    .expect("curve estimation succeeds");

    let mut checks = Vec::new();
    for k in 0..sizes.len() - 1 {
        let diffs: Vec<f64> = rows.iter().map(|row| row[k] - row[k + 1]).collect();
        let est = MonteCarloEstimate::from_values(&diffs, 0x5EED_0008).unwrap();
        checks.push(Check::new(
            format!("decrease from n={} to n={} (se {:.2e})", sizes[k], sizes[k + 1], est.std_error),
            est.mean,
            "> 2 SE",
            est.mean > 2.0 * est.std_error,
        ));
        let closed = (1.0 / 6.0) * (1.0 / sizes[k] as f64 - 1.0 / sizes[k + 1] as f64);
        checks.push(Check::new(
            format!("difference n={}..{} vs closed form", sizes[k], sizes[k + 1]),
            est.mean,
            format!("{closed:.6e} +- 5%"),
            rel_err_within(est.mean, closed, 0.05),
        ));
    }
    checks
}

// ---------------------------------------------------------------------
// Criterion 9: purchase payments are individually rational and budget
// feasible over random loss vectors.

fn c9_purchase(_level: VerifyLevel) -> Vec<Check> {
    let mut violations = 0u64;
    let vectors = 10_000u64;
    for v in 0..vectors {
        let mut rng = substream(0x5EED_0009, &[v]);
        let m = 2 + (rng.random::<u32>() % 9) as usize;
        let budget = rng.random::<f64>() * 1000.0;
        let cfg = BudgetedPurchaseConfig::new(budget, m).unwrap();
        let reports: Vec<LossReport> = (0..m)
            .map(|i| LossReport {
                agent_id: i as u64,
                tau: rng.random::<f64>(),
                per_feature: vec![FeatureLoss { feature: 0, tau: 0.0, eval_value: 0.0 }],
                eval_point_index: 0,
                submission_size: 1,
                augment_size: 0,
                comparison_size: 1,
            })
            .collect();
        let payments = purchase_payments(&cfg, &reports).unwrap();
        if payments.iter().any(|&p| p < 0.0) || payments.iter().sum::<f64>() > budget + 1e-9 {
            violations += 1;
        }
    }
    vec![Check::new(
        format!("violations over {vectors} random loss vectors"),
        violations as f64,
        "= 0",
        violations == 0,
    )]
}

// ---------------------------------------------------------------------
// Criterion 10: a feasible marketplace yields alpha in (0,1], bounded
// buyer charges, and an agent-utility sweep peaking at the recommended
// per-agent count within one grid step at 2 SE.

fn market_config(trials: u64) -> MarketplaceConfig {
    let model = PosteriorModel::NormalNormal(NormalNormalModel::new(0.0, 1.0, 1.0).unwrap());
    let n_max = 200usize;
    MarketplaceConfig {
        cost: 0.25,
        valuation: Valuation::Table {
            values: (0..=n_max).map(|n| 6000.0 * (1.0 - (-(n as f64) / 8.0).exp())).collect(),
        },
        agents: 4,
        n_max,
        generator: DataGenerator::Bayesian { model },
        method: LossMethod::Mechanism { config: MechanismConfig::alg1(model) },
        trials,
    }
}

fn c10_marketplace(level: VerifyLevel) -> Vec<Check> {
    let cfg = market_config(level.pick(8_000, 30_000));
    let mut checks = Vec::new();

    let calibration = match marketplace_alpha(&cfg, 0x5EED_000A) {
        Ok(c) => c,
        Err(e) => {
            return vec![Check::new(format!("calibration failed: {e}"), f64::NAN, "alpha in (0,1]", false)];
        }
    };
    checks.push(Check::new(
        format!(
            "alpha at n*={} (sensitivity {:.3e} se {:.1e})",
            calibration.n_star, calibration.sensitivity.mean, calibration.sensitivity.std_error
        ),
        calibration.alpha,
        "in (0, 1]",
        calibration.alpha > 0.0 && calibration.alpha <= 1.0,
    ));

    // Buyer individual rationality over random loss vectors.
    let mut worst_charge = f64::NEG_INFINITY;
    for v in 0..2_000u64 {
        let mut rng = substream(0x5EED_0A0B, &[v]);
        let reports: Vec<LossReport> = (0..cfg.agents)
            .map(|i| LossReport {
                agent_id: i as u64,
                tau: rng.random::<f64>(),
                per_feature: vec![],
                eval_point_index: 0,
                submission_size: 1,
                augment_size: 0,
                comparison_size: 1,
            })
            .collect();
        let (_, charge) = marketplace_round(&cfg, &calibration, &reports).unwrap();
        worst_charge = worst_charge.max(charge);
    }
    checks.push(Check::new(
        "worst buyer charge over 2000 random loss vectors",
        worst_charge,
        format!("<= V(n*) = {:.1}", calibration.value_at_opt),
        worst_charge <= calibration.value_at_opt + 1e-9,
    ));

    // Agent-utility sweep around the recommended count.
    let recommended = calibration.profile[0];
    let sweep_trials = level.pick(20_000, 100_000);
    let lo = recommended.saturating_sub(5).max(1);
    let grid: Vec<usize> = (lo..=recommended + 5).collect();
    let rows = coupled_size_losses(
        &cfg.generator,
        &calibration.profile,
        0,
        &grid,
        &cfg.method,
        sweep_trials,
        0x5EED_0A0C,
    )
    .expect("sweep estimation succeeds");

    let share = calibration.value_at_opt / cfg.agents as f64;
    let utility =
        |n: usize, tau: f64| share * (1.0 - calibration.alpha * tau) - cfg.cost * n as f64;
    let rec_idx = grid.iter().position(|&n| n == recommended).unwrap();
    let mut means = Vec::with_capacity(grid.len());
    let mut diff_ses = Vec::with_capacity(grid.len());
    for (j, &n) in grid.iter().enumerate() {
        let utils: Vec<f64> = rows.iter().map(|row| utility(n, row[j])).collect();
        let diffs: Vec<f64> = rows
            .iter()
            .map(|row| utility(n, row[j]) - utility(recommended, row[rec_idx]))
            .collect();
        means.push(utils.iter().sum::<f64>() / utils.len() as f64);
        let d = MonteCarloEstimate::from_values(&diffs, 0).unwrap();
        diff_ses.push((d.mean, d.std_error));
    }
    let argmax = grid[means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()];
    // No grid point beyond one step may beat the recommendation by more
    // than 2 SE of the paired difference.
    let mut beaten_beyond_noise = false;
    for (j, &n) in grid.iter().enumerate() {
        if n.abs_diff(recommended) > 1 && diff_ses[j].0 > 2.0 * diff_ses[j].1 {
            beaten_beyond_noise = true;
        }
    }
    checks.push(Check::new(
        format!("empirical argmax of the utility sweep (recommended {recommended})"),
        argmax as f64,
        format!("within +-1 of {recommended} at 2 SE"),
        argmax.abs_diff(recommended) <= 1 || !beaten_beyond_noise,
    ));
    checks
}

// ---------------------------------------------------------------------
// Criterion 11: federated utility sits at (v(pool) + v(own))/2, strictly
// above going it alone, and fabrication shrinks allocations.

fn c11_federated(level: VerifyLevel) -> Vec<Check> {
    let model = PosteriorModel::NormalNormal(NormalNormalModel::new(0.0, 1.0, 1.0).unwrap());
    let generator = DataGenerator::Bayesian { model };
    let mech = MechanismConfig::alg1(model);
    let method = LossMethod::Mechanism { config: mech.clone() };
    let sizes = vec![405usize, 100, 100, 100, 100, 100];
    let valuation = Valuation::Sqrt { gamma: 1.0 };
    let cfg = FederatedConfig {
        valuations: vec![valuation.clone(); sizes.len()],
        estimation_trials: level.pick(10_000, 60_000),
    };

    let estimate = expected_loss(
        &generator,
        &sizes,
        &vec![Strategy::Truthful; sizes.len()],
        &method,
        0,
        cfg.estimation_trials,
        0x5EED_000B,
    )
    .expect("loss estimation succeeds");
    let alpha = crate::apps::federated_alpha(&cfg, 0, &sizes, &estimate).expect("alpha");

    let pool: usize = sizes[1..].iter().sum();
    let pool_value = valuation.value(pool).unwrap();
    let own_value = valuation.value(sizes[0]).unwrap();
    let target = 0.5 * (pool_value + own_value);

    // Fresh trials: expected value of the deployed allocation, truthful
    // versus a shifted submission, sharing scenario and mechanism draws.
    let trials = level.pick(4_000, 15_000);
    let mut truthful_values = Vec::with_capacity(trials as usize);
    let mut truthful_sizes = Vec::with_capacity(trials as usize);
    let mut shifted_sizes = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let ts = crate::rng::trial_seed(0x5EED_0B0C, t);
        let mut scenario_rng = substream(ts, &[crate::rng::Lane::Scenario as u64]);
        let (_, datasets) = generate_scenario(&generator, &sizes, &mut scenario_rng).unwrap();
        let truthful_set = SubmissionSet::from_datasets(datasets.clone()).unwrap();
        let mut shifted = datasets;
        shifted[0] = {
            let mut rng = substream(ts, &[crate::rng::Lane::Strategy as u64]);
            crate::sim::apply_strategy(&Strategy::ShiftAll { delta: 0.3 }, &shifted[0], &mut rng)
                .unwrap()
        };
        let shifted_set = SubmissionSet::from_datasets(shifted).unwrap();

        for (set, is_truthful) in [(&truthful_set, true), (&shifted_set, false)] {
            let mut rng = crate::rng::agent_stream(ts, 0);
            let report = crate::mechanism::agent_loss(&mech, set, 0, &mut rng).unwrap();
            let mut alloc_rng = substream(ts, &[crate::rng::Lane::App as u64]);
            let allocation =
                crate::apps::federated_allocate(&cfg, 0, alpha, set, &report, &mut alloc_rng)
                    .unwrap();
            if is_truthful {
                truthful_values.push(valuation.value(allocation.size).unwrap());
                truthful_sizes.push(allocation.size as f64);
            } else {
                shifted_sizes.push(allocation.size as f64);
            }
        }
    }
    let value_est = MonteCarloEstimate::from_values(&truthful_values, 0x5EED_0B0C).unwrap();
    let size_diffs: Vec<f64> = truthful_sizes
        .iter()
        .zip(&shifted_sizes)
        .map(|(t, s)| s - t)
        .collect();
    let diff_est = MonteCarloEstimate::from_values(&size_diffs, 0x5EED_0B0C).unwrap();

    vec![
        Check::new(
            format!("truthful expected utility (se {:.2e})", value_est.std_error),
            value_est.mean,
            format!("{target:.4} +- 3 SE"),
            (value_est.mean - target).abs() <= 3.0 * value_est.std_error,
        ),
        Check::new(
            "truthful utility vs standalone value",
            value_est.mean,
            format!("> {own_value:.4}"),
            value_est.mean > own_value,
        ),
        Check::new(
            format!("allocation change under shift_all (se {:.2e})", diff_est.std_error),
            diff_est.mean,
            "< -3 SE",
            diff_est.mean < -3.0 * diff_est.std_error,
        ),
    ]
}

// ---------------------------------------------------------------------
// Criterion 12: the embedding pipeline reports truthful < untruthful for
// the prior-free mechanism and all three baselines across three seeds.

fn c12_embedding(level: VerifyLevel) -> Vec<Check> {
    let trials = level.pick(60, 120);
    let dim = 32usize;
    let generator =
        DataGenerator::Embedding { model: EmbeddingModel::isotropic(dim, 0.5) };
    let bank = FeatureBank::coordinates(dim).unwrap();
    // Sized so the fabrication's sample-size reward under the baselines
    // stays below its distribution-shift penalty.
    let sizes = vec![300usize; 5];
    let mut shift = vec![0.0; dim];
    for value in shift.iter_mut().take(8) {
        *value = 0.5;
    }
    let fabrication =
        Strategy::EmbeddingFabricate { shift, scale: 1.0, count: CountRule::default() };

    let methods: Vec<(String, LossMethod)> = vec![
        (
            "alg3".into(),
            LossMethod::Mechanism {
                config: MechanismConfig::alg3(bank.clone(), SplitMap::zero()),
            },
        ),
        ("cvm".into(), LossMethod::Baseline { kind: BaselineKind::Cvm, bank: bank.clone() }),
        ("ks".into(), LossMethod::Baseline { kind: BaselineKind::Ks, bank: bank.clone() }),
        (
            "mean_diff".into(),
            LossMethod::Baseline { kind: BaselineKind::MeanDiff, bank: bank.clone() },
        ),
    ];

    let mut checks = Vec::new();
    for (label, method) in &methods {
        let mut directional = true;
        let mut worst = f64::INFINITY;
        for seed in 0..3u64 {
            let gap = truthfulness_gap(
                &generator,
                &sizes,
                &fabrication,
                method,
                0,
                trials,
                0x5EED_000C + seed,
            )
            .expect("gap estimation succeeds");
            worst = worst.min(gap.gap);
            if gap.gap <= 0.0 {
                directional = false;
            }
        }
        checks.push(Check::new(
            format!("{label}: smallest truthful-vs-fabricated gap across 3 seeds"),
            worst,
            "> 0",
            directional,
        ));
    }
    checks
}

// ---------------------------------------------------------------------
// Criterion 13: identical seeds reproduce results byte for byte.

fn c13_determinism(_level: VerifyLevel) -> Vec<Check> {
    let a = serde_json::to_string(&c3_estimate(VerifyLevel::Fast)).unwrap();
    let b = serde_json::to_string(&c3_estimate(VerifyLevel::Fast)).unwrap();

    let model = PosteriorModel::BetaBernoulli(BetaBernoulliModel::new(2.0, 2.0).unwrap());
    let gap = || {
        serde_json::to_string(
            &truthfulness_gap(
                &DataGenerator::Bayesian { model },
                &[12, 12, 12],
                &Strategy::BernHalfAugment { count: CountRule::default() },
                &LossMethod::Mechanism { config: MechanismConfig::alg1(model) },
                0,
                400,
                0x5EED_000D,
            )
            .unwrap(),
        )
        .unwrap()
    };
    let g1 = gap();
    let g2 = gap();

    // A full mechanism run serializes identically too.
    let mut rng = substream(0x5EED_0D0E, &[0]);
    let (_, datasets) = generate_scenario(&uniform_generator(), &[6, 9, 7], &mut rng).unwrap();
    let set = SubmissionSet::from_datasets(datasets).unwrap();
    let cfg = MechanismConfig::alg3(FeatureBank::identity(), SplitMap::Balance);
    let r1 = serde_json::to_string(&run_mechanism(&cfg, &set, 99).unwrap()).unwrap();
    let r2 = serde_json::to_string(&run_mechanism(&cfg, &set, 99).unwrap()).unwrap();

    vec![
        Check::new("estimate reruns identical", if a == b { 1.0 } else { 0.0 }, "byte-equal", a == b),
        Check::new("gap reruns identical", if g1 == g2 { 1.0 } else { 0.0 }, "byte-equal", g1 == g2),
        Check::new("mechanism reruns identical", if r1 == r2 { 1.0 } else { 0.0 }, "byte-equal", r1 == r2),
    ]
}
