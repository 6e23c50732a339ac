//! Exact train/test risk gaps on finite domains under prior, covariate and
//! concept shift.
//!
//! A joint distribution is a `[points × classes]` probability table. A
//! classifier assigns one label to each domain point. All risks are finite
//! sums, so every decomposition can be checked against the direct risk
//! difference to rounding error.

mod verify;

use ndarray::Array2;
use rand::distr::Distribution;
use rand_distr::weighted::WeightedIndex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

pub use verify::{verify_prop1, CaseSummary, ShiftReport, EMPIRICAL_SAMPLES, RESIDUAL_TOLERANCE};

/// Tolerance on the total mass of a joint table.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Tolerance for the shared-distribution precondition of each gap formula.
pub const SHARED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DiscreteJoint {
    table: Array2<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for DiscreteJoint {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidSpec("joint table rows differ in length".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let table = Array2::from_shape_vec((n, k), flat).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        DiscreteJoint::new(table)
    }
}

impl From<DiscreteJoint> for Vec<Vec<f64>> {
    fn from(j: DiscreteJoint) -> Self {
        j.table.outer_iter().map(|r| r.to_vec()).collect()
    }
}

impl DiscreteJoint {
    /// `table[[x, y]] = P(x, y)`; non-negative, finite, summing to 1.
    pub fn new(table: Array2<f64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Empty("joint table".into()));
        }
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidSpec("joint table has negative or non-finite mass".into()));
        }
        let total = table.sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidSpec(format!("joint table sums to {total}, not 1")));
        }
        Ok(DiscreteJoint { table })
    }

    /// `P(x, y) = P(y) · P(x|y)` with `conditionals[y][x] = P(x|y)`.
    pub fn from_prior(prior: &[f64], conditionals: &[Vec<f64>]) -> Result<Self> {
        let n = conditionals.first().map_or(0, Vec::len);
        let table = Array2::from_shape_fn((n, prior.len()), |(x, y)| prior[y] * conditionals[y][x]);
        DiscreteJoint::new(table)
    }

    /// `P(x, y) = P(x) · P(y|x)` with `conditionals[x][y] = P(y|x)`.
    pub fn from_marginal(marginal: &[f64], conditionals: &[Vec<f64>]) -> Result<Self> {
        let k = conditionals.first().map_or(0, Vec::len);
        let table = Array2::from_shape_fn((marginal.len(), k), |(x, y)| marginal[x] * conditionals[x][y]);
        DiscreteJoint::new(table)
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn n_points(&self) -> usize {
        self.table.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.table.ncols()
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.table[[x, y]]
    }

    /// `P(x)` for every domain point.
    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.outer_iter().map(|r| r.sum()).collect()
    }

    /// `P(y)` for every class.
    pub fn marginal_y(&self) -> Vec<f64> {
        self.table.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// `P(·|y)` over the domain; `None` when `P(y) = 0`.
    pub fn x_given_y(&self, y: usize) -> Option<Vec<f64>> {
        let col = self.table.column(y);
        let mass = col.sum();
        (mass > 0.0).then(|| col.iter().map(|p| p / mass).collect())
    }

    /// `P(·|x)` over the classes; `None` when `P(x) = 0`.
    pub fn y_given_x(&self, x: usize) -> Option<Vec<f64>> {
        let row = self.table.row(x);
        let mass = row.sum();
        (mass > 0.0).then(|| row.iter().map(|p| p / mass).collect())
    }

    /// Total-variation distance `½ Σ |P − Q|`.
    pub fn total_variation(&self, other: &DiscreteJoint) -> Result<f64> {
        check_same_shape(self, other)?;
        Ok(0.5 * self.table.iter().zip(other.table.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// `n` independent `(x, y)` draws.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> DiscreteSample {
        let k = self.n_classes();
        let index = WeightedIndex::new(self.table.iter().copied()).expect("validated joint has positive mass");
        let (points, labels) = (0..n).map(|_| {
            let cell = index.sample(rng);
            (cell / k, cell % k)
        }).unzip();
        DiscreteSample { points, labels }
    }
}

/// Draws from a [`DiscreteJoint`]: domain point indices and their labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteSample {
    pub points: Vec<usize>,
    pub labels: Vec<usize>,
}

/// `entries[[predicted, truth]] = ℓ(predicted, truth)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LossTable {
    entries: Array2<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for LossTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidSpec("loss table must be square".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        LossTable::new(Array2::from_shape_vec((k, k), flat).map_err(|e| Error::InvalidSpec(e.to_string()))?)
    }
}

impl From<LossTable> for Vec<Vec<f64>> {
    fn from(l: LossTable) -> Self {
        l.entries.outer_iter().map(|r| r.to_vec()).collect()
    }
}

impl LossTable {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if !entries.is_square() || entries.is_empty() {
            return Err(Error::InvalidSpec("loss table must be square and non-empty".into()));
        }
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpec("loss entries must be finite and non-negative".into()));
        }
        Ok(LossTable { entries })
    }

    pub fn zero_one(n_classes: usize) -> Self {
        LossTable {
            entries: Array2::from_shape_fn((n_classes, n_classes), |(a, b)| f64::from(u8::from(a != b))),
        }
    }

    /// Every entry equal to `c`.
    pub fn constant(n_classes: usize, c: f64) -> Result<Self> {
        LossTable::new(Array2::from_elem((n_classes, n_classes), c))
    }

    pub fn n_classes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn loss(&self, predicted: usize, truth: usize) -> f64 {
        self.entries[[predicted, truth]]
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        LossTable::new(&self.entries * factor)
    }
}

/// A deterministic classifier over a finite domain: one label per point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainClassifier(pub Vec<usize>);

impl DomainClassifier {
    pub fn constant(n_points: usize, label: usize) -> Self {
        DomainClassifier(vec![label; n_points])
    }

    fn check(&self, n_points: usize, loss: &LossTable) -> Result<()> {
        if self.0.len() != n_points {
            return Err(Error::Precondition(format!(
                "classifier defined on {} points, domain has {n_points}",
                self.0.len()
            )));
        }
        if let Some(&bad) = self.0.iter().find(|&&l| l >= loss.n_classes()) {
            return Err(Error::Precondition(format!("classifier label {bad} outside the loss table")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftCase {
    Prior,
    Covariate,
    Concept,
    General,
}

impl ShiftCase {
    pub fn name(self) -> &'static str {
        match self {
            ShiftCase::Prior => "prior",
            ShiftCase::Covariate => "covariate",
            ShiftCase::Concept => "concept",
            ShiftCase::General => "general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub r_train: f64,
    pub r_test: f64,
    /// Always `r_test - r_train`.
    pub gap: f64,
    pub case: ShiftCase,
}

impl RiskReport {
    pub fn new(r_train: f64, r_test: f64, case: ShiftCase) -> Self {
        RiskReport {
            r_train,
            r_test,
            gap: r_test - r_train,
            case,
        }
    }
}

fn check_same_shape(a: &DiscreteJoint, b: &DiscreteJoint) -> Result<()> {
    if a.table.dim() != b.table.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.table.len(),
            got: b.table.len(),
        });
    }
    Ok(())
}

fn check_inputs(f: &DomainClassifier, joint: &DiscreteJoint, loss: &LossTable) -> Result<()> {
    if joint.n_classes() != loss.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: loss.n_classes(),
            got: joint.n_classes(),
        });
    }
    f.check(joint.n_points(), loss)
}

/// `Σ_{x,y} ℓ(f(x), y) · P(x, y)`.
pub fn exact_risk(f: &DomainClassifier, joint: &DiscreteJoint, loss: &LossTable) -> Result<f64> {
    check_inputs(f, joint, loss)?;
    let mut risk = 0.0;
    for (x, &label) in f.0.iter().enumerate() {
        for y in 0..joint.n_classes() {
            risk += loss.loss(label, y) * joint.p(x, y);
        }
    }
    Ok(risk)
}

/// Mean pointwise loss over a sample.
pub fn empirical_risk(f: &DomainClassifier, sample: &DiscreteSample, loss: &LossTable) -> Result<f64> {
    if sample.points.is_empty() {
        return Err(Error::Empty("empirical risk of an empty sample".into()));
    }
    if sample.points.len() != sample.labels.len() {
        return Err(Error::LengthMismatch {
            left: sample.points.len(),
            right: sample.labels.len(),
        });
    }
    let mut total = 0.0;
    for (&x, &y) in sample.points.iter().zip(&sample.labels) {
        let label = *f
            .0
            .get(x)
            .ok_or_else(|| Error::Precondition(format!("classifier undefined on point {x}")))?;
        if label >= loss.n_classes() || y >= loss.n_classes() {
            return Err(Error::Precondition("label outside the loss table".into()));
        }
        total += loss.loss(label, y);
    }
    Ok(total / sample.points.len() as f64)
}

/// Direct difference `R_test − R_train`.
pub fn risk_report(
    f: &DomainClassifier,
    train: &DiscreteJoint,
    test: &DiscreteJoint,
    loss: &LossTable,
    case: ShiftCase,
) -> Result<RiskReport> {
    check_same_shape(train, test)?;
    Ok(RiskReport::new(exact_risk(f, train, loss)?, exact_risk(f, test, loss)?, case))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Class-conditional expected loss `Σ_x ℓ(f(x), y) P(x|y)`.
fn class_loss(f: &DomainClassifier, loss: &LossTable, y: usize, x_given_y: &[f64]) -> f64 {
    f.0.iter().zip(x_given_y).map(|(&label, p)| loss.loss(label, y) * p).sum()
}

/// Point-conditional expected loss `Σ_y ℓ(f(x), y) P(y|x)`.
fn point_loss(f: &DomainClassifier, loss: &LossTable, x: usize, y_given_x: &[f64]) -> f64 {
    y_given_x.iter().enumerate().map(|(y, p)| loss.loss(f.0[x], y) * p).sum()
}

/// Prior shift: `Σ_y ΔP(y) · Σ_x ℓ(f(x), y) P(x|y)`. Requires `P(x|y)`
/// shared wherever both distributions give class `y` mass.
pub fn gap_prior(f: &DomainClassifier, train: &DiscreteJoint, test: &DiscreteJoint, loss: &LossTable) -> Result<f64> {
    check_same_shape(train, test)?;
    check_inputs(f, train, loss)?;
    let (p_train, p_test) = (train.marginal_y(), test.marginal_y());
    let mut gap = 0.0;
    for y in 0..train.n_classes() {
        let conditional = match (train.x_given_y(y), test.x_given_y(y)) {
            (Some(a), Some(b)) => {
                if max_abs_diff(&a, &b) > SHARED_TOLERANCE {
                    return Err(Error::Precondition(format!("P(x|y={y}) differs between train and test")));
                }
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => continue,
        };
        gap += (p_test[y] - p_train[y]) * class_loss(f, loss, y, &conditional);
    }
    Ok(gap)
}

/// Covariate shift: `Σ_x ΔP(x) · Σ_y ℓ(f(x), y) P(y|x)`. Requires `P(y|x)`
/// shared wherever both distributions give point `x` mass.
pub fn gap_covariate(
    f: &DomainClassifier,
    train: &DiscreteJoint,
    test: &DiscreteJoint,
    loss: &LossTable,
) -> Result<f64> {
    check_same_shape(train, test)?;
    check_inputs(f, train, loss)?;
    let (p_train, p_test) = (train.marginal_x(), test.marginal_x());
    let mut gap = 0.0;
    for x in 0..train.n_points() {
        let conditional = match (train.y_given_x(x), test.y_given_x(x)) {
            (Some(a), Some(b)) => {
                if max_abs_diff(&a, &b) > SHARED_TOLERANCE {
                    return Err(Error::Precondition(format!("P(y|x={x}) differs between train and test")));
                }
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => continue,
        };
        gap += (p_test[x] - p_train[x]) * point_loss(f, loss, x, &conditional);
    }
    Ok(gap)
}

/// Concept shift: `Σ_x P(x) · Σ_y ℓ(f(x), y) ΔP(y|x)`. Requires `P(x)` shared.
pub fn gap_concept(
    f: &DomainClassifier,
    train: &DiscreteJoint,
    test: &DiscreteJoint,
    loss: &LossTable,
) -> Result<f64> {
    check_same_shape(train, test)?;
    check_inputs(f, train, loss)?;
    let marginal = train.marginal_x();
    if max_abs_diff(&marginal, &test.marginal_x()) > SHARED_TOLERANCE {
        return Err(Error::Precondition("P(x) differs between train and test".into()));
    }
    let mut gap = 0.0;
    for (x, &px) in marginal.iter().enumerate() {
        let (Some(a), Some(b)) = (train.y_given_x(x), test.y_given_x(x)) else {
            continue;
        };
        let delta: Vec<f64> = b.iter().zip(&a).map(|(t, s)| t - s).collect();
        gap += px * point_loss(f, loss, x, &delta);
    }
    Ok(gap)
}

/// The analytic gap for `case`; `General` is the direct difference.
pub fn analytic_gap(
    case: ShiftCase,
    f: &DomainClassifier,
    train: &DiscreteJoint,
    test: &DiscreteJoint,
    loss: &LossTable,
) -> Result<f64> {
    match case {
        ShiftCase::Prior => gap_prior(f, train, test, loss),
        ShiftCase::Covariate => gap_covariate(f, train, test, loss),
        ShiftCase::Concept => gap_concept(f, train, test, loss),
        ShiftCase::General => risk_report(f, train, test, loss, case).map(|r| r.gap),
    }
}

/// A replayable counterexample or test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftInstance {
    pub case: ShiftCase,
    pub train: DiscreteJoint,
    pub test: DiscreteJoint,
    pub loss: LossTable,
    pub classifier: DomainClassifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub report: RiskReport,
    pub analytic_gap: f64,
    /// `|analytic_gap − report.gap|`.
    pub residual: f64,
}

impl ShiftInstance {
    pub fn evaluate(&self) -> Result<InstanceResult> {
        let report = risk_report(&self.classifier, &self.train, &self.test, &self.loss, self.case)?;
        let analytic = analytic_gap(self.case, &self.classifier, &self.train, &self.test, &self.loss)?;
        Ok(InstanceResult {
            report,
            analytic_gap: analytic,
            residual: (analytic - report.gap).abs(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn joint(t: Array2<f64>) -> DiscreteJoint {
        DiscreteJoint::new(t).unwrap()
    }

    /// Independent oracle: enumerate every (x, y) term of both risks.
    fn brute_gap(f: &[usize], train: &Array2<f64>, test: &Array2<f64>, loss: &Array2<f64>) -> f64 {
        let mut gap = 0.0;
        for x in 0..train.nrows() {
            for y in 0..train.ncols() {
                gap += loss[[f[x], y]] * test[[x, y]];
                gap -= loss[[f[x], y]] * train[[x, y]];
            }
        }
        gap
    }

    #[test]
    fn correct_classifier_on_deterministic_joint_has_zero_risk() {
        let p = joint(array![[0.3, 0.0], [0.0, 0.7]]);
        let f = DomainClassifier(vec![0, 1]);
        assert_eq!(exact_risk(&f, &p, &LossTable::zero_one(2)).unwrap(), 0.0);
    }

    #[test]
    fn constant_classifier_risk_is_the_other_class_prior() {
        let p = joint(array![[0.1, 0.4], [0.2, 0.3]]);
        let r = exact_risk(&DomainClassifier::constant(2, 0), &p, &LossTable::zero_one(2)).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
    }

    #[test]
    fn undefined_points_and_bad_tables_are_errors() {
        let p = joint(array![[0.5, 0.0], [0.25, 0.25]]);
        assert!(exact_risk(&DomainClassifier(vec![0]), &p, &LossTable::zero_one(2)).is_err());
        assert!(exact_risk(&DomainClassifier(vec![0, 2]), &p, &LossTable::zero_one(2)).is_err());
        assert!(DiscreteJoint::new(array![[0.5, 0.6]]).is_err());
        assert!(DiscreteJoint::new(array![[1.5, -0.5]]).is_err());
        assert!(LossTable::new(array![[0.0, f64::NAN], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn hand_set_prior_shift_matches_enumeration() {
        // Shared P(x|y): class 0 → (0.8, 0.2), class 1 → (0.3, 0.7).
        let cond = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
        let train = DiscreteJoint::from_prior(&[0.9, 0.1], &cond).unwrap();
        let test = DiscreteJoint::from_prior(&[0.5, 0.5], &cond).unwrap();
        let loss = LossTable::zero_one(2);
        let f = DomainClassifier(vec![0, 1]);
        let analytic = gap_prior(&f, &train, &test, &loss).unwrap();
        let brute = brute_gap(&f.0, train.table(), test.table(), loss.entries());
        // ΔP(0)·P(x=1|0) + ΔP(1)·P(x=0|1) = −0.4·0.2 + 0.4·0.3
        assert!((analytic - 0.04).abs() < 1e-12);
        assert!((analytic - brute).abs() < 1e-12);
    }

    #[test]
    fn three_point_covariate_and_concept_match_enumeration() {
        let cond = vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.55, 0.45]];
        let train = DiscreteJoint::from_marginal(&[0.5, 0.3, 0.2], &cond).unwrap();
        let test = DiscreteJoint::from_marginal(&[0.1, 0.3, 0.6], &cond).unwrap();
        let loss = LossTable::new(array![[0.0, 1.3], [0.4, 0.0]]).unwrap();
        let f = DomainClassifier(vec![0, 1, 1]);
        let brute = brute_gap(&f.0, train.table(), test.table(), loss.entries());
        assert!((gap_covariate(&f, &train, &test, &loss).unwrap() - brute).abs() < 1e-12);

        let marginal = [0.25, 0.35, 0.4];
        let train = DiscreteJoint::from_marginal(&marginal, &cond).unwrap();
        let moved = vec![vec![0.1, 0.9], vec![0.6, 0.4], vec![0.5, 0.5]];
        let test = DiscreteJoint::from_marginal(&marginal, &moved).unwrap();
        let brute = brute_gap(&f.0, train.table(), test.table(), loss.entries());
        assert!((gap_concept(&f, &train, &test, &loss).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn no_shift_gives_zero_gap() {
        let cond = vec![vec![0.6, 0.4], vec![0.1, 0.9]];
        let p = DiscreteJoint::from_prior(&[0.3, 0.7], &cond).unwrap();
        let f = DomainClassifier(vec![1, 0]);
        let loss = LossTable::zero_one(2);
        assert_eq!(gap_prior(&f, &p, &p, &loss).unwrap(), 0.0);
        assert_eq!(gap_covariate(&f, &p, &p, &loss).unwrap(), 0.0);
        assert_eq!(gap_concept(&f, &p, &p, &loss).unwrap(), 0.0);
    }

    #[test]
    fn constant_loss_makes_prior_gap_vanish() {
        let cond = vec![vec![0.5, 0.25, 0.25], vec![0.125, 0.375, 0.5]];
        let train = DiscreteJoint::from_prior(&[0.75, 0.25], &cond).unwrap();
        let test = DiscreteJoint::from_prior(&[0.25, 0.75], &cond).unwrap();
        let f = DomainClassifier(vec![0, 1, 1]);
        let loss = LossTable::constant(2, 1.0).unwrap();
        assert_eq!(gap_prior(&f, &train, &test, &loss).unwrap(), 0.0);
    }

    #[test]
    fn concept_gap_sign_follows_bracketed_term() {
        // One point; test moves mass from class 0 to class 1. f predicts 0,
        // so its 0-1 loss rises.
        let train = joint(array![[0.5, 0.5]]);
        let test = joint(array![[0.25, 0.75]]);
        let gap = gap_concept(&DomainClassifier(vec![0]), &train, &test, &LossTable::zero_one(2)).unwrap();
        assert!((gap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn precondition_violations_are_reported() {
        let train = joint(array![[0.4, 0.1], [0.1, 0.4]]);
        let test = joint(array![[0.1, 0.4], [0.4, 0.1]]);
        let f = DomainClassifier(vec![0, 1]);
        let loss = LossTable::zero_one(2);
        assert!(matches!(gap_prior(&f, &train, &test, &loss), Err(Error::Precondition(_))));
        assert!(matches!(gap_covariate(&f, &train, &test, &loss), Err(Error::Precondition(_))));
        let shifted = joint(array![[0.6, 0.2], [0.1, 0.1]]);
        assert!(matches!(gap_concept(&f, &train, &shifted, &loss), Err(Error::Precondition(_))));
    }

    #[test]
    fn empirical_risk_edge_cases() {
        let f = DomainClassifier(vec![0, 1]);
        let loss = LossTable::zero_one(2);
        let one = DiscreteSample {
            points: vec![1],
            labels: vec![1],
        };
        assert_eq!(empirical_risk(&f, &one, &loss).unwrap(), 0.0);
        let s = DiscreteSample {
            points: vec![0, 1, 1],
            labels: vec![1, 1, 0],
        };
        let doubled = DiscreteSample {
            points: [s.points.clone(), s.points.clone()].concat(),
            labels: [s.labels.clone(), s.labels.clone()].concat(),
        };
        assert_eq!(empirical_risk(&f, &s, &loss).unwrap(), empirical_risk(&f, &doubled, &loss).unwrap());
        let empty = DiscreteSample {
            points: vec![],
            labels: vec![],
        };
        assert!(empirical_risk(&f, &empty, &loss).is_err());
    }

    #[test]
    fn empirical_risk_concentrates() {
        let p = joint(array![[0.2, 0.1], [0.15, 0.25], [0.05, 0.25]]);
        let f = DomainClassifier(vec![0, 1, 0]);
        let loss = LossTable::zero_one(2);
        let n = 100_000;
        let sample = p.sample(n, &mut crate::seed::rng(4));
        let exact = exact_risk(&f, &p, &loss).unwrap();
        let empirical = empirical_risk(&f, &sample, &loss).unwrap();
        assert!((empirical - exact).abs() <= 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = ShiftInstance {
            case: ShiftCase::Covariate,
            train: joint(array![[0.25, 0.25], [0.25, 0.25]]),
            test: joint(array![[0.375, 0.375], [0.125, 0.125]]),
            loss: LossTable::zero_one(2),
            classifier: DomainClassifier(vec![0, 0]),
        };
        let back = ShiftInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        let r = back.evaluate().unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(ShiftInstance::from_json(r#"{"case":"prior","train":[[0.5,0.6]],"test":[[1.0]],"loss":[[0]],"classifier":[0]}"#).is_err());
    }

    fn simplex(raw: Vec<f64>) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    prop_compose! {
        fn arb_prior_instance()(k in 2usize..4, n in 2usize..5)
            (prior_a in prop::collection::vec(0.05f64..1.0, k),
             prior_b in prop::collection::vec(0.05f64..1.0, k),
             cond in prop::collection::vec(prop::collection::vec(0.05f64..1.0, n), k),
             loss in prop::collection::vec(0.0f64..2.0, k * k),
             f in prop::collection::vec(0usize..k, n),
             k in Just(k))
            -> ShiftInstance
        {
            let cond: Vec<Vec<f64>> = cond.into_iter().map(simplex).collect();
            ShiftInstance {
                case: ShiftCase::Prior,
                train: DiscreteJoint::from_prior(&simplex(prior_a), &cond).unwrap(),
                test: DiscreteJoint::from_prior(&simplex(prior_b), &cond).unwrap(),
                loss: LossTable::new(Array2::from_shape_vec((k, k), loss).unwrap()).unwrap(),
                classifier: DomainClassifier(f),
            }
        }
    }

    proptest! {
        #[test]
        fn prior_gap_is_linear_in_the_loss(inst in arb_prior_instance(), c in 0.1f64..5.0) {
            let g = gap_prior(&inst.classifier, &inst.train, &inst.test, &inst.loss).unwrap();
            let scaled = inst.loss.scaled(c).unwrap();
            let gc = gap_prior(&inst.classifier, &inst.train, &inst.test, &scaled).unwrap();
            prop_assert!((gc - c * g).abs() <= 1e-12 * (1.0 + gc.abs()));
        }

        #[test]
        fn gaps_are_label_permutation_equivariant(inst in arb_prior_instance(), shift in 1usize..4) {
            let k = inst.loss.n_classes();
            let perm: Vec<usize> = (0..k).map(|c| (c + shift) % k).collect();
            let relabel = |j: &DiscreteJoint| {
                let t = Array2::from_shape_fn(j.table().dim(), |(x, y)| {
                    let src = perm.iter().position(|&p| p == y).unwrap();
                    j.p(x, src)
                });
                DiscreteJoint::new(t).unwrap()
            };
            let loss = LossTable::new(Array2::from_shape_fn((k, k), |(a, b)| {
                let (sa, sb) = (perm.iter().position(|&p| p == a).unwrap(), perm.iter().position(|&p| p == b).unwrap());
                inst.loss.loss(sa, sb)
            })).unwrap();
            let f = DomainClassifier(inst.classifier.0.iter().map(|&l| perm[l]).collect());
            let g = gap_prior(&inst.classifier, &inst.train, &inst.test, &inst.loss).unwrap();
            let gp = gap_prior(&f, &relabel(&inst.train), &relabel(&inst.test), &loss).unwrap();
            prop_assert!((g - gp).abs() < 1e-12);
        }

        #[test]
        fn zero_one_gap_is_bounded_by_total_variation(inst in arb_prior_instance()) {
            let k = inst.loss.n_classes();
            let loss = LossTable::zero_one(k);
            let r = risk_report(&inst.classifier, &inst.train, &inst.test, &loss, ShiftCase::General).unwrap();
            let tv = inst.train.total_variation(&inst.test).unwrap();
            prop_assert!(r.gap.abs() <= tv + 1e-12);
        }
    }
}
