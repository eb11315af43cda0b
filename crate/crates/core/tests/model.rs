mod common;

use common::fixed;
use cyberinsure::*;
use proptest::prelude::*;

fn exp(p0: f64, l: f64) -> RiskFunction {
    RiskFunction::exponential(p0, l).unwrap()
}

#[test]
fn risk_examples() {
    let rf = exp(0.5, 1.0);
    assert_eq!(rf.prob(0.0), 0.5);
    assert!((rf.prob(5f64.ln()) - 0.1).abs() < 1e-15);
    let pw = RiskFunction::power(0.5, 2.0).unwrap();
    assert!(pw.prob(X_MAX) < 1e-9);
    assert!(risk_prob(&rf, -1.0).is_err());
    assert!(RiskFunction::exponential(1.2, 1.0).is_err());
    assert!(RiskFunction::power(0.5, 0.0).is_err());
}

#[test]
fn joint_loss_examples() {
    let rf = exp(0.5, 1.0);
    assert_eq!(joint_loss_prob(&[0.7], &rf).unwrap(), rf.prob(0.7));
    assert!((joint_loss_prob(&[0.0, 0.0], &rf).unwrap() - 0.75).abs() < 1e-15);
    let with = joint_loss_prob(&[0.3, X_MAX, 1.2], &rf).unwrap();
    let without = joint_loss_prob(&[0.3, 1.2], &rf).unwrap();
    assert!((with - without).abs() < 1e-8);
    assert!(joint_loss_prob(&[], &rf).is_err());
}

#[test]
fn final_wealth_examples() {
    let one = MarketParams::new(1, 100.0, 10.0, exp(0.5, 1.0)).unwrap();
    let full = Contract::new(0.0, 10.0).unwrap();
    assert!((expected_final_wealth(&one, &[0.0], &full, 0).unwrap() - 95.0).abs() < 1e-12);
    let two = MarketParams::new(2, 100.0, 10.0, exp(0.5, 1.0)).unwrap();
    let x = 5f64.ln();
    let v = expected_final_wealth(&two, &[x, x], &full, 0).unwrap();
    assert!((v - (100.0 - x - 1.9)).abs() < 1e-12);
    assert!((v - 96.4906).abs() < 1e-4);
    // unconditional expectation agrees at full coverage
    assert_eq!(expected_wealth(&two, &[x, x], &full, 0).unwrap(), v);
    assert!((uninsured_wealth(&one, 0.0).unwrap() - 95.0).abs() < 1e-12);
    assert!(expected_final_wealth(&two, &[x], &full, 0).is_err());
}

#[test]
fn utility_and_contract_basics() {
    let u = UtilityFunction::exponential(0.5).unwrap();
    assert!(UtilityFunction::exponential(0.0).is_err());
    let w = 93.0;
    let v = u.value_from(w, 90.0);
    assert!((u.inverse_from(v, 90.0) - w).abs() < 1e-12);
    assert!(Contract::new(-1.0, 1.0).is_err());
    let c = Contract::new(1.0, 4.0).unwrap();
    assert_eq!(c.deductible(10.0), 6.0);
    assert!(c.check_within(3.0).is_err());
    assert!(InvestmentCostFunction::new(1.0, -5.0).is_err());
    let cost = InvestmentCostFunction::new(1.0, 5.0).unwrap();
    assert!((cost.cost(0.7) - 3.15).abs() < 1e-12);
}

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn family() -> impl Strategy<Value = RiskFamily> {
    prop_oneof![Just(RiskFamily::Exponential), Just(RiskFamily::Power)]
}

proptest! {
    #![proptest_config(fixed(1000, 11))]

    #[test]
    fn risk_derivatives_match_differences(fam in family(), p0 in 0.01f64..1.0, rate in 0.1f64..5.0, x in 0.0f64..40.0) {
        let rf = RiskFunction::new(fam, p0, rate).unwrap();
        // step well inside the local length scale of p
        let h = 1e-4 * (1.0 / rate).min((1.0 + x) / (rate + 2.0));
        let x = x.max(2.0 * h);
        prop_assert!(rf.slope(x) < 0.0);
        prop_assert!(rf.curvature(x) > 0.0);
        prop_assert!(rel_close(rf.slope(x), central(|t| rf.prob(t), x, h), 1e-6));
        prop_assert!(rel_close(rf.curvature(x), central(|t| rf.slope(t), x, h), 1e-6));
    }

    #[test]
    fn utility_derivatives_match_differences(a in 0.01f64..5.0, scaled in -5.0f64..5.0) {
        let u = UtilityFunction::exponential(a).unwrap();
        let origin = 90.0;
        let w = origin + scaled / a;
        let h = 1e-4 / a;
        prop_assert!(u.marginal_from(w, origin) > 0.0);
        prop_assert!(u.curvature_from(w, origin) <= 0.0);
        prop_assert!(rel_close(u.marginal_from(w, origin), central(|t| u.value_from(t, origin), w, h), 1e-6));
        prop_assert!(rel_close(u.curvature_from(w, origin), central(|t| u.marginal_from(t, origin), w, h), 1e-6));
        let lin = UtilityFunction::linear();
        prop_assert_eq!(lin.marginal_from(w, origin), 1.0);
        prop_assert_eq!(lin.curvature_from(w, origin), 0.0);
    }

    #[test]
    fn joint_loss_is_monotone(
        fam in family(),
        p0 in 0.01f64..1.0,
        rate in 0.1f64..5.0,
        xs in prop::collection::vec(0.0f64..20.0, 1..8),
        j in 0usize..8,
        bump in 0.0f64..5.0,
    ) {
        let rf = RiskFunction::new(fam, p0, rate).unwrap();
        let j = j % xs.len();
        let before = joint_loss_prob(&xs, &rf).unwrap();
        let mut more = xs.clone();
        more[j] += bump;
        let after = joint_loss_prob(&more, &rf).unwrap();
        prop_assert!(after <= before);
        prop_assert!((0.0..1.0).contains(&after));
    }
}
