//! Decomposition identities for covariate and concept shift on random
//! finite instances, checked against direct risk enumeration.

use footprint::shiftlab::{
    gap_concept, gap_covariate, risk_report, DiscreteJoint, DomainClassifier, LossTable, ShiftCase,
};
use ndarray::Array2;
use proptest::prelude::*;

fn simplex(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn rows(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), n)
        .prop_map(|rs| rs.into_iter().map(simplex).collect())
}

prop_compose! {
    fn covariate_case()(n in 2usize..7, k in 2usize..5)
        (a in prop::collection::vec(0.01f64..1.0, n),
         b in prop::collection::vec(0.01f64..1.0, n),
         cond in rows(n, k),
         loss in prop::collection::vec(0.0f64..3.0, k * k),
         f in prop::collection::vec(0usize..k, n),
         k in Just(k))
        -> (DiscreteJoint, DiscreteJoint, LossTable, DomainClassifier)
    {
        (
            DiscreteJoint::from_marginal(&simplex(a), &cond).unwrap(),
            DiscreteJoint::from_marginal(&simplex(b), &cond).unwrap(),
            LossTable::new(Array2::from_shape_vec((k, k), loss).unwrap()).unwrap(),
            DomainClassifier(f),
        )
    }
}

prop_compose! {
    fn concept_case()(n in 2usize..7, k in 2usize..5)
        (marginal in prop::collection::vec(0.01f64..1.0, n),
         a in rows(n, k),
         b in rows(n, k),
         loss in prop::collection::vec(0.0f64..3.0, k * k),
         f in prop::collection::vec(0usize..k, n),
         k in Just(k))
        -> (DiscreteJoint, DiscreteJoint, LossTable, DomainClassifier)
    {
        let marginal = simplex(marginal);
        (
            DiscreteJoint::from_marginal(&marginal, &a).unwrap(),
            DiscreteJoint::from_marginal(&marginal, &b).unwrap(),
            LossTable::new(Array2::from_shape_vec((k, k), loss).unwrap()).unwrap(),
            DomainClassifier(f),
        )
    }
}

proptest! {
    #[test]
    fn covariate_gap_equals_direct_difference((train, test, loss, f) in covariate_case()) {
        let direct = risk_report(&f, &train, &test, &loss, ShiftCase::Covariate).unwrap();
        let analytic = gap_covariate(&f, &train, &test, &loss).unwrap();
        prop_assert!((analytic - direct.gap).abs() <= 1e-12);
        prop_assert_eq!(direct.gap, direct.r_test - direct.r_train);
    }

    #[test]
    fn concept_gap_equals_direct_difference((train, test, loss, f) in concept_case()) {
        let direct = risk_report(&f, &train, &test, &loss, ShiftCase::Concept).unwrap();
        let analytic = gap_concept(&f, &train, &test, &loss).unwrap();
        prop_assert!((analytic - direct.gap).abs() <= 1e-12);
    }

    #[test]
    fn doubling_the_loss_doubles_the_gap((train, test, loss, f) in concept_case()) {
        let g = gap_concept(&f, &train, &test, &loss).unwrap();
        let g2 = gap_concept(&f, &train, &test, &loss.scaled(2.0).unwrap()).unwrap();
        prop_assert!((g2 - 2.0 * g).abs() <= 1e-12);
    }

    #[test]
    fn zero_one_risks_stay_in_unit_interval((train, _test, _loss, f) in covariate_case()) {
        let loss = LossTable::zero_one(train.n_classes());
        let r = footprint::shiftlab::exact_risk(&f, &train, &loss).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
    }
}
