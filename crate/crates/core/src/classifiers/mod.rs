//! From-scratch classifiers behind one `fit` / `predict` /
//! `predict_scores` surface.
//!
//! Every family is deterministic given its `ClassifierSpec` seed. Scores are class
//! probabilities (or vote fractions) for every family except `sgd_linear`,
//! which returns raw one-vs-rest margins.

pub mod adaboost;
pub mod forest;
pub mod gboost;
pub mod knn;
pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod sgd;
pub mod tree;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use adaboost::AdaboostParams;
pub use forest::ForestParams;
pub use gboost::GboostParams;
pub use knn::KnnParams;
pub use logistic::LogisticParams;
pub use mlp::MlpParams;
pub use naive_bayes::NaiveBayesParams;
pub use sgd::SgdParams;
pub use tree::TreeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Gboost(GboostParams),
    Knn(KnnParams),
    SgdLinear(SgdParams),
    Adaboost(AdaboostParams),
    GaussianNb(NaiveBayesParams),
    LogisticRegression(LogisticParams),
    Mlp(MlpParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::DecisionTree(_) => "decision_tree",
            Family::RandomForest(_) => "random_forest",
            Family::Gboost(_) => "gboost",
            Family::Knn(_) => "knn",
            Family::SgdLinear(_) => "sgd_linear",
            Family::Adaboost(_) => "adaboost",
            Family::GaussianNb(_) => "gaussian_nb",
            Family::LogisticRegression(_) => "logistic_regression",
            Family::Mlp(_) => "mlp",
        }
    }

    /// Distance- and gradient-based families train on z-scored features.
    pub fn wants_standardized(&self) -> bool {
        matches!(
            self,
            Family::Knn(_) | Family::SgdLinear(_) | Family::LogisticRegression(_) | Family::Mlp(_)
        )
    }

    /// Scores are probabilities (rows sum to one).
    pub fn is_probabilistic(&self) -> bool {
        !matches!(self, Family::SgdLinear(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

/// The MLP-deep hidden layer widths.
pub const DEEP_WIDTHS: [usize; 8] = [128, 64, 32, 32, 16, 16, 8, 8];

impl ClassifierSpec {
    pub fn new(name: &str, family: Family) -> Self {
        ClassifierSpec {
            name: name.into(),
            family,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn decision_tree() -> Self {
        Self::new("decision_tree", Family::DecisionTree(TreeParams::default()))
    }

    pub fn random_forest() -> Self {
        Self::new("random_forest", Family::RandomForest(ForestParams::default()))
    }

    pub fn gboost() -> Self {
        Self::new("gboost", Family::Gboost(GboostParams::default()))
    }

    pub fn knn() -> Self {
        Self::new("knn", Family::Knn(KnnParams::default()))
    }

    pub fn sgd() -> Self {
        Self::new("sgd", Family::SgdLinear(SgdParams::default()))
    }

    pub fn adaboost() -> Self {
        Self::new("adaboost", Family::Adaboost(AdaboostParams::default()))
    }

    pub fn gaussian_nb() -> Self {
        Self::new("gaussian_nb", Family::GaussianNb(NaiveBayesParams::default()))
    }

    pub fn logistic_regression() -> Self {
        Self::new("logistic_regression", Family::LogisticRegression(LogisticParams::default()))
    }

    pub fn mlp(name: &str, hidden: Vec<usize>) -> Self {
        Self::new(
            name,
            Family::Mlp(MlpParams {
                hidden,
                ..MlpParams::default()
            }),
        )
    }

    pub fn mlp_deep() -> Self {
        Self::mlp("mlp_deep", DEEP_WIDTHS.to_vec())
    }

    pub fn mlp_shallow() -> Self {
        Self::mlp("mlp_shallow", vec![16])
    }

    /// The ten audited configurations, in report order.
    pub fn default_grid() -> Vec<ClassifierSpec> {
        vec![
            Self::decision_tree(),
            Self::random_forest(),
            Self::gboost(),
            Self::knn(),
            Self::mlp_deep(),
            Self::sgd(),
            Self::adaboost(),
            Self::gaussian_nb(),
            Self::logistic_regression(),
            Self::mlp_shallow(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(format!("{}: {msg}", self.name)));
        match &self.family {
            Family::DecisionTree(p) => p.validate().or_else(|m| bad(&m)),
            Family::RandomForest(p) => {
                if p.n_trees == 0 {
                    return bad("n_trees must be at least 1");
                }
                p.tree().validate().or_else(|m| bad(&m))
            }
            Family::Gboost(p) => {
                if p.max_depth == 0 || p.n_rounds == 0 || !(p.learning_rate > 0.0) || p.lambda < 0.0 {
                    return bad("gboost needs depth ≥ 1, rounds ≥ 1, learning rate > 0, λ ≥ 0");
                }
                Ok(())
            }
            Family::Knn(p) if p.k == 0 => bad("k must be at least 1"),
            Family::SgdLinear(p) if p.alpha < 0.0 || p.max_iter == 0 => bad("alpha ≥ 0 and max_iter ≥ 1 required"),
            Family::Adaboost(p) if p.n_stages == 0 || !(p.learning_rate > 0.0) => {
                bad("n_stages ≥ 1 and learning rate > 0 required")
            }
            Family::GaussianNb(p) if p.var_smoothing < 0.0 => bad("var_smoothing must be ≥ 0"),
            Family::LogisticRegression(p) if !(p.c > 0.0) => bad("C must be positive (λ = 1/C ≥ 0)"),
            Family::Mlp(p) => {
                if p.hidden.iter().any(|&w| w == 0) {
                    return bad("hidden-layer widths must be positive");
                }
                if p.batch_size == 0 || p.alpha < 0.0 {
                    return bad("batch size ≥ 1 and alpha ≥ 0 required");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Family-specific training objective at the end of fitting.
    pub training_loss: f64,
    pub iterations: usize,
    /// False when an iterative solver hit its iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone)]
enum Fitted {
    Tree(tree::DecisionTree),
    Forest(forest::RandomForest),
    Gboost(gboost::GradientBoosting),
    Knn(knn::Knn),
    Sgd(sgd::SgdLinear),
    Adaboost(adaboost::Adaboost),
    NaiveBayes(naive_bayes::GaussianNb),
    Logistic(logistic::LogisticRegression),
    Mlp(mlp::Network),
}

/// A fitted classifier. Immutable once built.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    spec: ClassifierSpec,
    n_classes: usize,
    n_features: usize,
    diagnostics: FitDiagnostics,
    fitted: Fitted,
}

pub fn fit(spec: &ClassifierSpec, train: &Dataset) -> Result<TrainedModel> {
    spec.validate()?;
    if train.n_features() == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let x = train.features().view();
    let y = train.labels();
    let k = train.n_classes();
    let (fitted, diagnostics) = match &spec.family {
        Family::DecisionTree(p) => {
            let (m, d) = tree::DecisionTree::fit(x, y, k, p, spec.seed);
            (Fitted::Tree(m), d)
        }
        Family::RandomForest(p) => {
            let (m, d) = forest::RandomForest::fit(x, y, k, p, spec.seed);
            (Fitted::Forest(m), d)
        }
        Family::Gboost(p) => {
            let (m, d) = gboost::GradientBoosting::fit(x, y, k, p);
            (Fitted::Gboost(m), d)
        }
        Family::Knn(p) => {
            let (m, d) = knn::Knn::fit(x, y, k, p);
            (Fitted::Knn(m), d)
        }
        Family::SgdLinear(p) => {
            let (m, d) = sgd::SgdLinear::fit(x, y, k, p, spec.seed);
            (Fitted::Sgd(m), d)
        }
        Family::Adaboost(p) => {
            let (m, d) = adaboost::Adaboost::fit(x, y, k, p, spec.seed);
            (Fitted::Adaboost(m), d)
        }
        Family::GaussianNb(p) => {
            let (m, d) = naive_bayes::GaussianNb::fit(x, y, k, p);
            (Fitted::NaiveBayes(m), d)
        }
        Family::LogisticRegression(p) => {
            let (m, d) = logistic::LogisticRegression::fit(x, y, k, p);
            (Fitted::Logistic(m), d)
        }
        Family::Mlp(p) => {
            let (m, d) = mlp::Network::fit(x, y, k, p, spec.seed);
            (Fitted::Mlp(m), d)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        n_classes: k,
        n_features: train.n_features(),
        diagnostics,
        fitted,
    })
}

impl TrainedModel {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn as_tree(&self) -> Option<&tree::DecisionTree> {
        match &self.fitted {
            Fitted::Tree(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_forest(&self) -> Option<&forest::RandomForest> {
        match &self.fitted {
            Fitted::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_gboost(&self) -> Option<&gboost::GradientBoosting> {
        match &self.fitted {
            Fitted::Gboost(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_adaboost(&self) -> Option<&adaboost::Adaboost> {
        match &self.fitted {
            Fitted::Adaboost(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_knn(&self) -> Option<&knn::Knn> {
        match &self.fitted {
            Fitted::Knn(k) => Some(k),
            _ => None,
        }
    }

    /// Score matrix `[n × n_classes]`.
    pub fn predict_scores(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.ncols(),
            });
        }
        Ok(match &self.fitted {
            Fitted::Tree(m) => m.scores(features),
            Fitted::Forest(m) => m.scores(features),
            Fitted::Gboost(m) => m.scores(features),
            Fitted::Knn(m) => m.scores(features),
            Fitted::Sgd(m) => m.scores(features),
            Fitted::Adaboost(m) => m.scores(features),
            Fitted::NaiveBayes(m) => m.scores(features),
            Fitted::Logistic(m) => m.scores(features),
            Fitted::Mlp(m) => m.scores(features),
        })
    }

    /// Argmax of [`predict_scores`](Self::predict_scores), lowest class id on ties.
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let scores = self.predict_scores(features)?;
        Ok(scores.outer_iter().map(|row| argmax(row.as_slice().expect("standard layout"))).collect())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// In-place numerically stable softmax of one row.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_ten_named_configs_with_pinned_defaults() {
        let grid = ClassifierSpec::default_grid();
        assert_eq!(grid.len(), 10);
        let names: Vec<&str> = grid.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "decision_tree",
                "random_forest",
                "gboost",
                "knn",
                "mlp_deep",
                "sgd",
                "adaboost",
                "gaussian_nb",
                "logistic_regression",
                "mlp_shallow"
            ]
        );
        let Family::DecisionTree(t) = &grid[0].family else { panic!() };
        assert_eq!((t.max_depth, t.max_features), (10, Some(5)));
        let Family::RandomForest(f) = &grid[1].family else { panic!() };
        assert_eq!(f.n_trees, 100);
        let Family::Gboost(g) = &grid[2].family else { panic!() };
        assert_eq!((g.max_depth, g.min_child_weight), (6, 1.0));
        let Family::Knn(k) = &grid[3].family else { panic!() };
        assert_eq!(k.k, 5);
        let Family::Mlp(m) = &grid[4].family else { panic!() };
        assert_eq!(m.hidden, vec![128, 64, 32, 32, 16, 16, 8, 8]);
        let Family::SgdLinear(s) = &grid[5].family else { panic!() };
        assert_eq!((s.alpha, s.max_iter), (0.0001, 1000));
        let Family::Mlp(m) = &grid[9].family else { panic!() };
        assert_eq!(m.hidden, vec![16]);
    }

    #[test]
    fn spec_json_round_trip_with_defaults() {
        let text = r#"[{"name": "tree", "family": "decision_tree"},
                       {"name": "wide", "family": "mlp", "hidden": [64], "seed": 4}]"#;
        let specs: Vec<ClassifierSpec> = serde_json::from_str(text).unwrap();
        assert_eq!(specs[0].family, Family::DecisionTree(TreeParams::default()));
        let Family::Mlp(m) = &specs[1].family else { panic!() };
        assert_eq!((m.hidden.clone(), m.batch_size, specs[1].seed), (vec![64], 32, 4));
        let grid = ClassifierSpec::default_grid();
        let back: Vec<ClassifierSpec> = serde_json::from_str(&serde_json::to_string(&grid).unwrap()).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        assert!(ClassifierSpec::mlp("m", vec![4, 0]).validate().is_err());
        let mut t = TreeParams::default();
        t.max_depth = 0;
        assert!(ClassifierSpec::new("t", Family::DecisionTree(t)).validate().is_err());
        let k = KnnParams { k: 0 };
        assert!(ClassifierSpec::new("k", Family::Knn(k)).validate().is_err());
    }

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
