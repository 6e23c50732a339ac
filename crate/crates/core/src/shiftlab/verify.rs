//! Randomized check of the three gap decompositions against the direct risk
//! difference, plus exact-zero degenerate constructions and a sampling check.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    empirical_risk, DiscreteJoint, DomainClassifier, LossTable, ShiftCase, ShiftInstance,
};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Largest accepted `|analytic − direct|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Loss-profile spread above which a trial counts as non-degenerate.
pub const SPREAD_THRESHOLD: f64 = 1e-6;
/// Draws per side in the sampling check.
pub const EMPIRICAL_SAMPLES: usize = 10_000;
/// Instances per case that also get the sampling check.
const EMPIRICAL_TRIALS: usize = 25;
/// Sampling-check tolerance in standard errors.
const EMPIRICAL_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: ShiftCase,
    pub trials: usize,
    /// Trials whose analytic gap matched the direct difference.
    pub matches: usize,
    pub max_residual: f64,
    pub non_degenerate: usize,
    /// Non-degenerate trials with a nonzero gap.
    pub non_degenerate_nonzero: usize,
    pub degenerate_trials: usize,
    /// Constant-loss constructions whose analytic and direct gaps are exactly 0.
    pub degenerate_exact_zero: usize,
    pub empirical_trials: usize,
    pub empirical_within: usize,
    /// Observed fraction of random trials with `R_test ≥ R_train`; reported,
    /// not asserted.
    pub test_risk_at_least_train: f64,
    /// First failing instance, for replay.
    pub counterexample: Option<ShiftInstance>,
}

impl CaseSummary {
    pub fn passed(&self) -> bool {
        self.matches == self.trials
            && self.non_degenerate_nonzero == self.non_degenerate
            && self.degenerate_exact_zero == self.degenerate_trials
            && self.empirical_within == self.empirical_trials
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftReport {
    pub seed: u64,
    pub trials: usize,
    pub cases: Vec<CaseSummary>,
    pub worst_residual: f64,
    pub passed: bool,
}

/// `trials` random instances per shift case, each checked against the
/// direct risk difference, plus as many constant-loss constructions.
pub fn verify_prop1(trials: usize, seed: u64) -> Result<ShiftReport> {
    if trials == 0 {
        return Err(Error::InvalidSpec("verify_prop1 needs at least one trial".into()));
    }
    let cases = [ShiftCase::Prior, ShiftCase::Covariate, ShiftCase::Concept]
        .into_iter()
        .map(|case| verify_case(case, trials, seed::derive_tag(seed, case.name())))
        .collect::<Result<Vec<_>>>()?;
    let worst_residual = cases.iter().map(|c| c.max_residual).fold(0.0, f64::max);
    let passed = cases.iter().all(CaseSummary::passed);
    Ok(ShiftReport {
        seed,
        trials,
        cases,
        worst_residual,
        passed,
    })
}

struct TrialOutcome {
    instance: ShiftInstance,
    residual: f64,
    gap: f64,
    non_degenerate: bool,
    empirical_ok: Option<bool>,
}

fn verify_case(case: ShiftCase, trials: usize, case_seed: u64) -> Result<CaseSummary> {
    let random_seed = seed::derive_tag(case_seed, "random");
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed::derive(random_seed, t as u64);
            let mut rng = seed::rng(trial_seed);
            let instance = random_instance(case, &mut rng)?;
            let result = instance.evaluate()?;
            let empirical_ok = (t < EMPIRICAL_TRIALS)
                .then(|| empirical_check(&instance, result.analytic_gap, seed::derive_tag(trial_seed, "sample")))
                .transpose()?;
            Ok(TrialOutcome {
                non_degenerate: loss_profile_spread(&instance) > SPREAD_THRESHOLD,
                residual: result.residual,
                gap: result.report.gap,
                instance,
                empirical_ok,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let degenerate_seed = seed::derive_tag(case_seed, "degenerate");
    let degenerate = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(degenerate_seed, t as u64));
            let instance = degenerate_instance(case, &mut rng)?;
            let result = instance.evaluate()?;
            Ok((instance, result.analytic_gap == 0.0 && result.report.gap == 0.0))
        })
        .collect::<Result<Vec<_>>>()?;

    let matches = outcomes.iter().filter(|o| o.residual <= RESIDUAL_TOLERANCE).count();
    let non_degenerate = outcomes.iter().filter(|o| o.non_degenerate).count();
    let non_degenerate_nonzero = outcomes.iter().filter(|o| o.non_degenerate && o.gap != 0.0).count();
    let empirical: Vec<bool> = outcomes.iter().filter_map(|o| o.empirical_ok).collect();
    let counterexample = outcomes
        .iter()
        .find(|o| {
            o.residual > RESIDUAL_TOLERANCE || (o.non_degenerate && o.gap == 0.0) || o.empirical_ok == Some(false)
        })
        .map(|o| o.instance.clone())
        .or_else(|| degenerate.iter().find(|(_, zero)| !zero).map(|(i, _)| i.clone()));
    Ok(CaseSummary {
        case,
        trials,
        matches,
        max_residual: outcomes.iter().map(|o| o.residual).fold(0.0, f64::max),
        non_degenerate,
        non_degenerate_nonzero,
        degenerate_trials: degenerate.len(),
        degenerate_exact_zero: degenerate.iter().filter(|(_, zero)| *zero).count(),
        empirical_trials: empirical.len(),
        empirical_within: empirical.iter().filter(|ok| **ok).count(),
        test_risk_at_least_train: outcomes.iter().filter(|o| o.gap >= 0.0).count() as f64 / trials as f64,
        counterexample,
    })
}

fn random_simplex(len: usize, rng: &mut Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn random_shape(rng: &mut Rng) -> (usize, usize) {
    (rng.random_range(2..=6), rng.random_range(2..=4))
}

fn random_loss(k: usize, rng: &mut Rng) -> Result<LossTable> {
    LossTable::new(ndarray::Array2::from_shape_simple_fn((k, k), || rng.random_range(0.0..1.0)))
}

fn random_classifier(n: usize, k: usize, rng: &mut Rng) -> DomainClassifier {
    DomainClassifier((0..n).map(|_| rng.random_range(0..k)).collect())
}

/// Generic instance satisfying the case's sharing precondition exactly up to
/// the rounding of the joint table.
fn random_instance(case: ShiftCase, rng: &mut Rng) -> Result<ShiftInstance> {
    let (n, k) = random_shape(rng);
    let (train, test) = match case {
        ShiftCase::Prior => {
            let cond: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(n, rng)).collect();
            (
                DiscreteJoint::from_prior(&random_simplex(k, rng), &cond)?,
                DiscreteJoint::from_prior(&random_simplex(k, rng), &cond)?,
            )
        }
        ShiftCase::Covariate => {
            let cond: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(k, rng)).collect();
            (
                DiscreteJoint::from_marginal(&random_simplex(n, rng), &cond)?,
                DiscreteJoint::from_marginal(&random_simplex(n, rng), &cond)?,
            )
        }
        ShiftCase::Concept | ShiftCase::General => {
            let marginal = random_simplex(n, rng);
            let a: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(k, rng)).collect();
            let b: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(k, rng)).collect();
            (DiscreteJoint::from_marginal(&marginal, &a)?, DiscreteJoint::from_marginal(&marginal, &b)?)
        }
    };
    Ok(ShiftInstance {
        case,
        train,
        test,
        loss: random_loss(k, rng)?,
        classifier: random_classifier(n, k, rng),
    })
}

/// Powers of two summing to exactly 1, from repeated halving.
fn dyadic_marginal(len: usize, rng: &mut Rng) -> Vec<f64> {
    let mut parts = vec![1.0];
    while parts.len() < len {
        let i = rng.random_range(0..parts.len());
        parts[i] *= 0.5;
        parts.push(parts[i]);
    }
    parts
}

/// Multiples of 1/8 summing to exactly 1.
fn eighths(len: usize, rng: &mut Rng) -> Vec<f64> {
    let mut parts = vec![0.0; len];
    for _ in 0..8 {
        parts[rng.random_range(0..len)] += 0.125;
    }
    parts
}

/// Every probability is dyadic and every marginal a power of two, so all
/// sums, products and renormalizations are exact and the collapsed
/// decompositions must give exactly 0.
fn degenerate_instance(case: ShiftCase, rng: &mut Rng) -> Result<ShiftInstance> {
    let (n, k) = random_shape(rng);
    let scale = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let (train, test, loss) = match case {
        ShiftCase::Prior => {
            let cond: Vec<Vec<f64>> = (0..k).map(|_| eighths(n, rng)).collect();
            (
                DiscreteJoint::from_prior(&dyadic_marginal(k, rng), &cond)?,
                DiscreteJoint::from_prior(&dyadic_marginal(k, rng), &cond)?,
                LossTable::constant(k, scale)?,
            )
        }
        ShiftCase::Covariate => {
            let cond: Vec<Vec<f64>> = (0..n).map(|_| eighths(k, rng)).collect();
            (
                DiscreteJoint::from_marginal(&dyadic_marginal(n, rng), &cond)?,
                DiscreteJoint::from_marginal(&dyadic_marginal(n, rng), &cond)?,
                LossTable::constant(k, scale)?,
            )
        }
        ShiftCase::Concept | ShiftCase::General => {
            let marginal = dyadic_marginal(n, rng);
            let a: Vec<Vec<f64>> = (0..n).map(|_| eighths(k, rng)).collect();
            let b: Vec<Vec<f64>> = (0..n).map(|_| eighths(k, rng)).collect();
            // Loss depends only on the prediction, so each row is constant in y.
            let rows: Vec<f64> = (0..k).map(|_| scale * f64::from(rng.random_range(0..4u8))).collect();
            let loss = LossTable::new(ndarray::Array2::from_shape_fn((k, k), |(p, _)| rows[p]))?;
            (DiscreteJoint::from_marginal(&marginal, &a)?, DiscreteJoint::from_marginal(&marginal, &b)?, loss)
        }
    };
    Ok(ShiftInstance {
        case,
        train,
        test,
        loss,
        classifier: random_classifier(n, k, rng),
    })
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Spread of the loss term each decomposition weights by the shifted
/// quantity: per class for prior shift, per point for covariate shift, and
/// across classes within a point for concept shift.
fn loss_profile_spread(inst: &ShiftInstance) -> f64 {
    let (f, loss, p) = (&inst.classifier, &inst.loss, &inst.train);
    match inst.case {
        ShiftCase::Prior => spread((0..p.n_classes()).filter_map(|y| {
            p.x_given_y(y)
                .map(|c| f.0.iter().zip(&c).map(|(&l, q)| loss.loss(l, y) * q).sum())
        })),
        ShiftCase::Covariate => spread((0..p.n_points()).filter_map(|x| {
            p.y_given_x(x)
                .map(|c| c.iter().enumerate().map(|(y, q)| loss.loss(f.0[x], y) * q).sum())
        })),
        ShiftCase::Concept | ShiftCase::General => (0..p.n_points())
            .map(|x| spread((0..p.n_classes()).map(|y| loss.loss(f.0[x], y))))
            .fold(0.0, f64::max),
    }
}

/// Per-draw loss variance under `joint`.
fn loss_variance(inst: &ShiftInstance, joint: &DiscreteJoint) -> f64 {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (x, &label) in inst.classifier.0.iter().enumerate() {
        for y in 0..joint.n_classes() {
            let l = inst.loss.loss(label, y);
            m1 += l * joint.p(x, y);
            m2 += l * l * joint.p(x, y);
        }
    }
    (m2 - m1 * m1).max(0.0)
}

fn empirical_check(inst: &ShiftInstance, analytic: f64, sample_seed: u64) -> Result<bool> {
    let mut rng = seed::rng(sample_seed);
    let train = inst.train.sample(EMPIRICAL_SAMPLES, &mut rng);
    let test = inst.test.sample(EMPIRICAL_SAMPLES, &mut rng);
    let gap = empirical_risk(&inst.classifier, &test, &inst.loss)?
        - empirical_risk(&inst.classifier, &train, &inst.loss)?;
    let n = EMPIRICAL_SAMPLES as f64;
    let sigma = ((loss_variance(inst, &inst.train) + loss_variance(inst, &inst.test)) / n).sqrt();
    Ok((gap - analytic).abs() <= EMPIRICAL_SIGMAS * sigma + 1e-12)
}
