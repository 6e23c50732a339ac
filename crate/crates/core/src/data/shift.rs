//! Synthetic train/test generators with prior, covariate and concept shift.
//!
//! Class-conditionals are Gaussian. Covariate shift is produced by
//! x-dependent selection of training points (logistic acceptance), which
//! leaves P(y|x) untouched. Concept shift relabels test points inside a
//! half-space.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

const PRIOR_TOLERANCE: f64 = 1e-9;
const MAX_REJECTIONS_PER_POINT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Prior,
    Covariate,
    Concept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl GaussianClass {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        let covariance = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        GaussianClass { mean, covariance }
    }
}

/// Training points are kept with probability `1 / (1 + exp(-(w·x + b)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionBias {
    pub direction: Vec<f64>,
    pub offset: f64,
}

impl SelectionBias {
    pub fn acceptance(&self, x: &[f64]) -> f64 {
        let t: f64 = self.direction.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.offset;
        1.0 / (1.0 + (-t).exp())
    }
}

/// Test labels of points with `x[feature] > threshold` become `(y + 1) mod K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRule {
    pub feature: usize,
    pub threshold: f64,
}

impl ConceptRule {
    pub fn in_region(&self, x: &[f64]) -> bool {
        x[self.feature] > self.threshold
    }

    pub fn relabel(&self, x: &[f64], y: usize, n_classes: usize) -> usize {
        if self.in_region(x) {
            (y + 1) % n_classes
        } else {
            y
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    /// Class priors of the test distribution (and of training, unless `kind` is prior).
    pub base_priors: Vec<f64>,
    /// Training class priors under prior shift.
    pub shifted_priors: Vec<f64>,
    pub classes: Vec<GaussianClass>,
    /// Required for covariate kind; optional add-on for prior kind.
    #[serde(default)]
    pub selection: Option<SelectionBias>,
    /// Required for concept kind.
    #[serde(default)]
    pub concept: Option<ConceptRule>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Output of [`gen_shifted`].
#[derive(Debug, Clone)]
pub struct ShiftedPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Labels the training rule assigns to the test points. Equal to
    /// `test.labels()` except under concept shift.
    pub test_base_labels: Vec<usize>,
}

impl ShiftSpec {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_features(&self) -> usize {
        self.classes.first().map_or(0, |c| c.mean.len())
    }

    pub fn training_priors(&self) -> &[f64] {
        match self.kind {
            ShiftKind::Prior => &self.shifted_priors,
            _ => &self.base_priors,
        }
    }

    /// Largest over smallest training prior.
    pub fn imbalance_ratio(&self) -> f64 {
        let p = self.training_priors();
        let max = p.iter().copied().fold(f64::MIN, f64::max);
        let min = p.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_classes();
        if k < 2 {
            return Err(Error::InvalidSpec("need at least two classes".into()));
        }
        let d = self.n_features();
        if d == 0 {
            return Err(Error::InvalidSpec("classes need at least one feature".into()));
        }
        for (name, p) in [("base_priors", &self.base_priors), ("shifted_priors", &self.shifted_priors)] {
            if p.len() != k {
                return Err(Error::InvalidSpec(format!("{name} has {} entries for {k} classes", p.len())));
            }
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidSpec(format!("{name} has a negative or non-finite entry")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > PRIOR_TOLERANCE {
                return Err(Error::InvalidSpec(format!("{name} sums to {total}, not 1")));
            }
        }
        if self.training_priors().iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidSpec("training priors must be strictly positive".into()));
        }
        for (c, class) in self.classes.iter().enumerate() {
            if class.mean.len() != d
                || class.covariance.len() != d
                || class.covariance.iter().any(|r| r.len() != d)
            {
                return Err(Error::InvalidSpec(format!("class {c} has inconsistent dimensions")));
            }
            cholesky(&class.covariance).ok_or(Error::NotPositiveDefinite { class: c })?;
        }
        match (self.kind, &self.selection, &self.concept) {
            (ShiftKind::Covariate, None, _) => {
                return Err(Error::InvalidSpec("covariate shift needs a selection bias".into()))
            }
            (ShiftKind::Concept, _, None) => {
                return Err(Error::InvalidSpec("concept shift needs a relabelling rule".into()))
            }
            _ => {}
        }
        if let Some(sel) = &self.selection {
            if sel.direction.len() != d {
                return Err(Error::InvalidSpec("selection direction has wrong dimension".into()));
            }
        }
        if let Some(rule) = &self.concept {
            if rule.feature >= d {
                return Err(Error::InvalidSpec("concept rule feature out of range".into()));
            }
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidSpec("n_train and n_test must be positive".into()));
        }
        Ok(())
    }

    /// Two-class, six-feature population (four informative, two pure
    /// noise) with training priors 0.895/0.105 (imbalance ratio 8.55) and a
    /// selection bias along a direction orthogonal to the class-mean
    /// difference, so the feature marginal is tilted while the class
    /// balance is preserved.
    pub fn imbalanced_shifted(n_train: usize, n_test: usize, seed: u64) -> ShiftSpec {
        ShiftSpec {
            kind: ShiftKind::Prior,
            base_priors: vec![0.5, 0.5],
            shifted_priors: vec![0.895, 0.105],
            classes: vec![
                GaussianClass::isotropic(vec![0.0; 6], 1.0),
                GaussianClass::isotropic(vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0], 1.0),
            ],
            selection: Some(SelectionBias {
                direction: vec![0.75, -0.75, 0.75, -0.75, 0.0, 0.0],
                offset: 0.5,
            }),
            concept: None,
            n_train,
            n_test,
            seed,
        }
    }

    /// Four equiprobable, well-separated classes in four features.
    pub fn balanced(n_train: usize, n_test: usize, seed: u64) -> ShiftSpec {
        let centers = [
            [2.0, 2.0, -2.0, 0.0],
            [-2.0, 2.0, 2.0, 0.0],
            [0.0, -2.0, 2.0, 2.0],
            [2.0, 0.0, 0.0, -2.0],
        ];
        ShiftSpec {
            kind: ShiftKind::Prior,
            base_priors: vec![0.25; 4],
            shifted_priors: vec![0.25; 4],
            classes: centers
                .iter()
                .map(|c| GaussianClass::isotropic(c.to_vec(), 1.0))
                .collect(),
            selection: None,
            concept: None,
            n_train,
            n_test,
            seed,
        }
    }
}

/// Lower-triangular Cholesky factor, `None` unless positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) || !v.is_finite() {
                    return None;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

struct Sampler<'a> {
    means: Vec<&'a [f64]>,
    factors: Vec<Vec<Vec<f64>>>,
}

impl Sampler<'_> {
    fn draw(&self, class: usize, rng: &mut Rng) -> Vec<f64> {
        let d = self.means[class].len();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.factors[class];
        (0..d)
            .map(|i| self.means[class][i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>())
            .collect()
    }
}

fn draw_points(
    n: usize,
    priors: &[f64],
    sampler: &Sampler<'_>,
    selection: Option<&SelectionBias>,
    rng: &mut Rng,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let classes = WeightedIndex::new(priors).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while xs.len() < n {
        attempts += 1;
        if attempts > MAX_REJECTIONS_PER_POINT * n {
            return Err(Error::InvalidSpec("selection bias accepts almost no points".into()));
        }
        let y = classes.sample(rng);
        let x = sampler.draw(y, rng);
        if let Some(sel) = selection {
            if rng.random::<f64>() >= sel.acceptance(&x) {
                continue;
            }
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

fn to_dataset(name: &str, xs: &[Vec<f64>], ys: Vec<usize>, n_classes: usize) -> Result<Dataset> {
    let d = xs[0].len();
    let features = Array2::from_shape_fn((xs.len(), d), |(i, j)| xs[i][j]);
    Dataset::new(name, features, ys, vec![FeatureKind::Numeric; d], n_classes).map_err(|e| match e {
        Error::InvalidDataset(msg) => Error::InvalidSpec(format!("{msg}; increase the sample size")),
        other => other,
    })
}

pub fn gen_shifted(spec: &ShiftSpec) -> Result<ShiftedPair> {
    spec.validate()?;
    let factors = spec
        .classes
        .iter()
        .map(|c| cholesky(&c.covariance).expect("validated"))
        .collect();
    let sampler = Sampler {
        means: spec.classes.iter().map(|c| c.mean.as_slice()).collect(),
        factors,
    };
    let k = spec.n_classes();
    let mut train_rng = seed::rng(seed::derive_tag(spec.seed, "train"));
    let mut test_rng = seed::rng(seed::derive_tag(spec.seed, "test"));

    let (train_x, train_y) = draw_points(
        spec.n_train,
        spec.training_priors(),
        &sampler,
        spec.selection.as_ref(),
        &mut train_rng,
    )?;
    let (test_x, test_base) = draw_points(spec.n_test, &spec.base_priors, &sampler, None, &mut test_rng)?;
    let test_y = match (&spec.kind, &spec.concept) {
        (ShiftKind::Concept, Some(rule)) => test_x
            .iter()
            .zip(&test_base)
            .map(|(x, &y)| rule.relabel(x, y, k))
            .collect(),
        _ => test_base.clone(),
    };
    Ok(ShiftedPair {
        train: to_dataset("shifted-train", &train_x, train_y, k)?,
        test: to_dataset("shifted-test", &test_x, test_y, k)?,
        test_base_labels: test_base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior_spec(priors: Vec<f64>, n: usize) -> ShiftSpec {
        ShiftSpec {
            kind: ShiftKind::Prior,
            base_priors: vec![0.5, 0.5],
            shifted_priors: priors,
            classes: vec![
                GaussianClass::isotropic(vec![-1.0, 0.0], 1.0),
                GaussianClass::isotropic(vec![1.0, 0.0], 1.0),
            ],
            selection: None,
            concept: None,
            n_train: n,
            n_test: n,
            seed: 11,
        }
    }

    fn within_three_sigma(count: usize, n: usize, p: f64) -> bool {
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - expected).abs() <= 3.0 * sigma
    }

    #[test]
    fn no_shift_priors_are_balanced() {
        let pair = gen_shifted(&prior_spec(vec![0.5, 0.5], 4000)).unwrap();
        let counts = pair.train.class_counts();
        assert!(within_three_sigma(counts[0], 4000, 0.5), "{counts:?}");
        assert!(within_three_sigma(pair.test.class_counts()[1], 4000, 0.5));
    }

    #[test]
    fn skewed_priors_reach_target_imbalance() {
        let spec = prior_spec(vec![0.895, 0.105], 20000);
        assert!((spec.imbalance_ratio() - 8.55).abs() < 0.05);
        let pair = gen_shifted(&spec).unwrap();
        let counts = pair.train.class_counts();
        assert!(within_three_sigma(counts[1], 20000, 0.105), "{counts:?}");
        let ir = pair.train.imbalance_ratio();
        assert!((7.9..9.3).contains(&ir), "{ir}");
        assert!(within_three_sigma(pair.test.class_counts()[1], 20000, 0.5));
    }

    #[test]
    fn concept_shift_flips_every_label_in_region() {
        let mut spec = prior_spec(vec![0.5, 0.5], 2000);
        spec.kind = ShiftKind::Concept;
        let rule = ConceptRule { feature: 0, threshold: 0.0 };
        spec.concept = Some(rule.clone());
        let pair = gen_shifted(&spec).unwrap();
        let test = &pair.test;
        let mut in_region = 0;
        let mut disagree = 0;
        for (i, row) in test.features().outer_iter().enumerate() {
            let x = row.to_vec();
            let same = test.labels()[i] == pair.test_base_labels[i];
            if rule.in_region(&x) {
                in_region += 1;
                disagree += usize::from(!same);
            } else {
                assert!(same);
            }
        }
        assert!(in_region > 0);
        assert_eq!(disagree, in_region);
        // Training labels follow the unaltered rule: the feature marginal is shared.
        assert_eq!(pair.train.n_points(), 2000);
    }

    #[test]
    fn covariate_shift_moves_marginal_only() {
        let mut spec = prior_spec(vec![0.5, 0.5], 20000);
        spec.kind = ShiftKind::Covariate;
        spec.selection = Some(SelectionBias {
            direction: vec![0.0, 2.0],
            offset: 0.0,
        });
        let pair = gen_shifted(&spec).unwrap();
        let mean_train = pair.train.features().column(1).mean().unwrap();
        let mean_test = pair.test.features().column(1).mean().unwrap();
        assert!(mean_train > mean_test + 0.4, "{mean_train} vs {mean_test}");
        // selection direction is orthogonal to the class means, so class balance holds
        assert!(within_three_sigma(pair.train.class_counts()[0], 20000, 0.5));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = prior_spec(vec![0.6, 0.5], 10);
        assert!(matches!(gen_shifted(&spec), Err(Error::InvalidSpec(_))));
        spec.shifted_priors = vec![0.5, 0.5];
        spec.classes[1].covariance = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(gen_shifted(&spec), Err(Error::NotPositiveDefinite { class: 1 })));
        let mut spec = prior_spec(vec![0.5, 0.5], 10);
        spec.kind = ShiftKind::Covariate;
        assert!(matches!(gen_shifted(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = ShiftSpec::imbalanced_shifted(500, 100, 3);
        let a = gen_shifted(&spec).unwrap();
        let b = gen_shifted(&spec).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }
}
