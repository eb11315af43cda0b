//! Contracting under moral hazard and hidden risk class: pooling with no
//! information, pooling with post-contract information, and separating
//! contracts with pre-contract information.
//!
//! A contract `(z, c)` charges premium `z` in every state and pays `c` on a
//! loss, so wealth is `w0 - x - z - R + c` after a loss and `w0 - x - z`
//! otherwise. Utilities are normalized at the uninsured loss-state wealth,
//! `u(w0 - R) = 0` and `u'(w0 - R) = 1`, which keeps exponential utility
//! well conditioned at high aversion.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::invest::{Boundary, InvestmentSolution};
use crate::model::{Contract, RiskClassPair, RiskFunction, UtilityFamily, UtilityFunction, X_MAX};
use crate::oracle::grid_argmax_1d;
use crate::roots::{bisect, expand_until, golden_max};

/// Premium and coverage grid intervals per axis, each spanning `[0, R]`.
pub const ASYM_GRID_STEPS: usize = 500;
const REFINE_LEVELS: usize = 2;
const REFINE_HALF_WIDTH: usize = 10;
/// Coverage at or above `R - FULL_TOL` counts as full.
pub const FULL_TOL: f64 = 1e-6;
/// Best profit at or below this means no contract is worth offering.
pub const NO_MARKET_TOL: f64 = 1e-12;

pub trait LossCurve: Sync {
    fn prob(&self, x: f64) -> f64;
    fn slope(&self, x: f64) -> f64;
    fn curvature(&self, x: f64) -> f64;
}

impl LossCurve for RiskFunction {
    fn prob(&self, x: f64) -> f64 {
        RiskFunction::prob(self, x)
    }

    fn slope(&self, x: f64) -> f64 {
        RiskFunction::slope(self, x)
    }

    fn curvature(&self, x: f64) -> f64 {
        RiskFunction::curvature(self, x)
    }
}

/// Population-weighted risk `theta p_HC + (1 - theta) p_LC` faced by a user
/// who does not know its class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendedRisk(pub RiskClassPair);

impl LossCurve for BlendedRisk {
    fn prob(&self, x: f64) -> f64 {
        self.0.blended_prob(x)
    }

    fn slope(&self, x: f64) -> f64 {
        self.0.blended_slope(x)
    }

    fn curvature(&self, x: f64) -> f64 {
        self.0.blended_curvature(x)
    }
}

pub fn blended_risk(pair: &RiskClassPair, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("investment must be non-negative, got {x}")));
    }
    Ok(pair.blended_prob(x))
}

pub fn blended_risk_slope(pair: &RiskClassPair, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("investment must be non-negative, got {x}")));
    }
    Ok(pair.blended_slope(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NoInfo,
    PostContractInfo,
    PreContractInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageKind {
    Full,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Pooling,
    Separating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketOutcome {
    Traded,
    NoMarket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    /// Users who do not know their class.
    Pooled,
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymSolution {
    pub scenario: Scenario,
    pub outcome: MarketOutcome,
    pub contracts: BTreeMap<ClassLabel, Contract>,
    pub investments: BTreeMap<ClassLabel, f64>,
    pub insurer_profit: f64,
    pub coverage_kind: CoverageKind,
    pub value_of_information: f64,
    pub equilibrium_kind: EquilibriumKind,
    /// Best zero-profit contract for the same users (pooling scenarios only).
    pub fair_contract: Option<Contract>,
    /// Investment problems that failed the unimodality probe and were solved
    /// on a dense grid instead.
    pub dense_fallbacks: usize,
}

impl AsymSolution {
    pub fn max_coverage(&self) -> f64 {
        self.contracts.values().map(|c| c.coverage).fold(0.0, f64::max)
    }
}

/// Investment, valuation and insurer profit for one class facing one contract.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Response {
    x: f64,
    /// Certainty-equivalent wealth.
    ce: f64,
    eu: f64,
    profit: f64,
    boundary: Boundary,
    fallback: bool,
}

/// Wealth at which utilities are normalized.
pub fn utility_origin(w0: f64, r: f64) -> f64 {
    w0 - r
}

/// Certainty-equivalent view of a contract. Both utility families are free
/// of wealth effects, so the certainty equivalent is
/// `w0 - z - x - loading(p(x))` with a loading that depends only on the
/// deductible `D = R - c`; it is concave in `x` for both risk families.
#[derive(Clone, Copy)]
struct Valuation {
    base: f64,
    deductible: f64,
    origin: f64,
    util: UtilityFunction,
}

impl Valuation {
    fn new(contract: &Contract, util: &UtilityFunction, w0: f64, r: f64) -> Self {
        Self {
            base: w0 - contract.premium,
            deductible: r - contract.coverage,
            origin: utility_origin(w0, r),
            util: *util,
        }
    }

    /// `ln(1 - p + p e^(aD)) / a`, or `p D` for linear utility.
    fn loading(&self, p: f64) -> f64 {
        let d = self.deductible;
        match self.util.family {
            UtilityFamily::Linear => p * d,
            UtilityFamily::ExponentialConcave => {
                let a = self.util.aversion;
                if a * d > 30.0 {
                    d + (p + (1.0 - p) * (-a * d).exp()).ln() / a
                } else {
                    (p * (a * d).exp_m1()).ln_1p() / a
                }
            }
        }
    }

    fn loading_slope(&self, p: f64) -> f64 {
        let d = self.deductible;
        match self.util.family {
            UtilityFamily::Linear => d,
            UtilityFamily::ExponentialConcave => {
                let a = self.util.aversion;
                if a * d > 30.0 {
                    let e = (-a * d).exp();
                    (1.0 - e) / (a * (p + (1.0 - p) * e))
                } else {
                    let k = (a * d).exp_m1();
                    k / (a * (1.0 + p * k))
                }
            }
        }
    }

    fn loading_curvature(&self, p: f64) -> f64 {
        match self.util.family {
            UtilityFamily::Linear => 0.0,
            UtilityFamily::ExponentialConcave => -self.util.aversion * self.loading_slope(p).powi(2),
        }
    }

    fn ce<P: LossCurve + ?Sized>(&self, risk: &P, x: f64) -> f64 {
        self.base - x - self.loading(risk.prob(x))
    }

    fn dce<P: LossCurve + ?Sized>(&self, risk: &P, x: f64) -> f64 {
        -1.0 - risk.slope(x) * self.loading_slope(risk.prob(x))
    }

    fn ddce<P: LossCurve + ?Sized>(&self, risk: &P, x: f64) -> f64 {
        let p = risk.prob(x);
        -risk.curvature(x) * self.loading_slope(p) - risk.slope(x).powi(2) * self.loading_curvature(p)
    }

    fn utility(&self, ce: f64) -> f64 {
        self.util.value_from(ce, self.origin)
    }
}

fn respond<P: LossCurve + ?Sized>(contract: &Contract, risk: &P, util: &UtilityFunction, w0: f64, r: f64) -> Response {
    let val = Valuation::new(contract, util, w0, r);
    let ce = |x: f64| val.ce(risk, x);
    let dce = |x: f64| val.dce(risk, x);
    let hi = expand_until(0.0, X_MAX, |x| dce(x) < 0.0);

    let probe_hi = (2.0 * hi).min(X_MAX);
    let unimodal = {
        const PROBE: usize = 64;
        let vals: Vec<f64> = (0..PROBE)
            .map(|i| ce(probe_hi * i as f64 / (PROBE - 1) as f64))
            .collect();
        let slack = |v: f64| 1e-13 * (1.0 + v.abs());
        let mut falling = false;
        vals.windows(2).all(|w| {
            if w[1] < w[0] - slack(w[0]) {
                falling = true;
            }
            !(falling && w[1] > w[0] + slack(w[0]))
        })
    };

    let (x, boundary, fallback) = if !unimodal {
        let (x, _) = grid_argmax_1d(ce, 0.0, probe_hi, 100_000, 2).unwrap_or((0.0, ce(0.0)));
        let b = if x == 0.0 {
            Boundary::ZeroInvestment
        } else {
            Boundary::Interior
        };
        (x, b, true)
    } else if dce(0.0) <= 0.0 {
        (0.0, Boundary::ZeroInvestment, false)
    } else if dce(hi) >= 0.0 {
        (hi, Boundary::FullElimination, false)
    } else {
        let (a, b) = golden_max(ce, 0.0, hi, 1e-6 * (1.0 + hi));
        let (a, b) = ((a - 1e-6).max(0.0), (b + 1e-6).min(hi));
        let x = if dce(a) > 0.0 && dce(b) < 0.0 {
            bisect(dce, a, b)
        } else {
            bisect(dce, 0.0, hi)
        };
        (x, Boundary::Interior, false)
    };
    let c = ce(x);
    Response {
        x,
        ce: c,
        eu: val.utility(c),
        profit: contract.premium - risk.prob(x) * contract.coverage,
        boundary,
        fallback,
    }
}

fn check_contract(contract: &Contract, util: &UtilityFunction, w0: f64, r: f64) -> Result<()> {
    if !(r > 0.0 && r < w0) {
        return Err(domain(format!("risk size must satisfy 0 < R < w0, got R={r}, w0={w0}")));
    }
    if util.family == UtilityFamily::ExponentialConcave && !(util.aversion > 0.0) {
        return Err(domain("exponential utility needs a positive aversion"));
    }
    contract.check_within(r)
}

/// The user's expected-utility-maximizing self-defense investment under
/// `contract`, with investment cost paid in both states. Golden-section
/// search brackets the optimum and bisection on the analytic derivative
/// finishes it.
pub fn user_best_investment<P: LossCurve + ?Sized>(
    contract: &Contract,
    risk: &P,
    util: &UtilityFunction,
    w0: f64,
    r: f64,
) -> Result<InvestmentSolution> {
    check_contract(contract, util, w0, r)?;
    let res = respond(contract, risk, util, w0, r);
    let val = Valuation::new(contract, util, w0, r);
    let du = util.marginal_from(res.ce, val.origin);
    let dce = val.dce(risk, res.x);
    Ok(InvestmentSolution {
        x_star: res.x,
        p_star: risk.prob(res.x),
        objective_value: res.eu,
        boundary: res.boundary,
        foc_residual: du * dce,
        second_derivative: util.curvature_from(res.ce, val.origin) * dce * dce + du * val.ddce(risk, res.x),
        deviation_gain: None,
    })
}

/// Whether the last investment search needed the dense-grid fallback.
pub fn investment_needed_fallback<P: LossCurve + ?Sized>(
    contract: &Contract,
    risk: &P,
    util: &UtilityFunction,
    w0: f64,
    r: f64,
) -> bool {
    respond(contract, risk, util, w0, r).fallback
}

/// Expected utility of a user with loss curve `risk` investing `x` under `contract`.
pub fn expected_utility<P: LossCurve + ?Sized>(
    contract: &Contract,
    risk: &P,
    util: &UtilityFunction,
    w0: f64,
    r: f64,
    x: f64,
) -> f64 {
    let val = Valuation::new(contract, util, w0, r);
    val.utility(val.ce(risk, x))
}

/// `theta U_HC(C, x_HC) + (1 - theta) U_LC(C, x_LC) - U_alpha(C, x_alpha)`
/// with every investment a best response to `contract`.
pub fn value_of_information_post(
    contract: &Contract,
    pair: &RiskClassPair,
    util: &UtilityFunction,
    w0: f64,
    r: f64,
) -> Result<f64> {
    check_contract(contract, util, w0, r)?;
    let hc = respond(contract, &pair.high, util, w0, r);
    let lc = respond(contract, &pair.low, util, w0, r);
    let xa = respond(contract, &BlendedRisk(*pair), util, w0, r).x;
    let blended = expected_utility(contract, &BlendedRisk(*pair), util, w0, r, xa);
    Ok(pair.theta * hc.eu + (1.0 - pair.theta) * lc.eu - blended)
}

/// What a class does, and what coverage `c` is worth to it, at zero premium.
///
/// Neither utility family has wealth effects, so the best investment does
/// not depend on the premium and a premium `z` lowers the certainty
/// equivalent by exactly `z`. The premium axis is therefore solved exactly
/// from the binding constraints instead of being gridded.
#[derive(Debug, Clone, Copy)]
struct CoverageValue {
    c: f64,
    x: f64,
    p: f64,
    /// Certainty-equivalent wealth relative to `w0`, before any premium.
    ce: f64,
    fallback: bool,
}

fn coverage_value<P: LossCurve + ?Sized>(c: f64, risk: &P, util: &UtilityFunction, w0: f64, r: f64) -> CoverageValue {
    let res = respond(
        &Contract {
            premium: 0.0,
            coverage: c,
        },
        risk,
        util,
        w0,
        r,
    );
    CoverageValue {
        c,
        x: res.x,
        p: risk.prob(res.x),
        ce: res.ce - w0,
        fallback: res.fallback,
    }
}

/// Coverage levels of the initial grid: `R/500` spacing, `R` included.
fn coverage_grid(r: f64) -> Vec<f64> {
    (0..=ASYM_GRID_STEPS)
        .map(|j| {
            if j == ASYM_GRID_STEPS {
                r
            } else {
                r * j as f64 / ASYM_GRID_STEPS as f64
            }
        })
        .collect()
}

/// `2 * REFINE_HALF_WIDTH + 1` levels around `center` at spacing `step`,
/// clipped to `[0, R]`.
fn coverage_patch(center: f64, step: f64, r: f64) -> Vec<f64> {
    let half = REFINE_HALF_WIDTH as i64;
    let mut v: Vec<f64> = (-half..=half)
        .map(|k| {
            if k == 0 {
                center
            } else {
                (center + step * k as f64).clamp(0.0, r)
            }
        })
        .collect();
    v.dedup();
    v
}

/// Maximizes `score` over coverage levels with two refinement passes;
/// ties keep the smaller coverage.
fn coverage_argmax<T: Send + Copy>(
    r: f64,
    eval: &(impl Fn(f64) -> T + Sync),
    score: &(impl Fn(&T) -> Option<f64> + Sync),
) -> Option<(T, f64)> {
    let mut levels = coverage_grid(r);
    let mut step = r / ASYM_GRID_STEPS as f64;
    let mut best: Option<(f64, T, f64)> = None;
    for pass in 0..=REFINE_LEVELS {
        if pass > 0 {
            let (c, _, _) = best?;
            step /= REFINE_HALF_WIDTH as f64;
            levels = coverage_patch(c, step, r);
        }
        let evaluated: Vec<(f64, T)> = levels.par_iter().map(|&c| (c, eval(c))).collect();
        for (c, t) in evaluated {
            let Some(v) = score(&t) else { continue };
            let better = match best {
                None => true,
                Some((bc, _, bv)) => v > bv || (v == bv && c < bc),
            };
            if better {
                best = Some((c, t, v));
            }
        }
    }
    best.map(|(_, t, v)| (t, v))
}

fn coverage_kind(contracts: &BTreeMap<ClassLabel, Contract>, r: f64) -> CoverageKind {
    if contracts.values().all(|c| c.coverage >= r - FULL_TOL) {
        CoverageKind::Full
    } else {
        CoverageKind::Partial
    }
}

fn check_pair(pair: &RiskClassPair, util: &UtilityFunction, w0: f64, r: f64) -> Result<()> {
    check_contract(&Contract::NONE, util, w0, r)?;
    RiskClassPair::new(pair.low, pair.high, pair.theta).map(|_| ())
}

fn contract(z: f64, c: f64) -> Contract {
    Contract {
        premium: z.max(0.0),
        coverage: c,
    }
}

/// Pooling contract when neither side knows the user's class: the user
/// best-responds to the blended risk, and the insurer maximizes
/// `z - p_alpha(x) c` subject to the user weakly preferring the contract
/// to going uninsured.
pub fn solve_no_info(pair: &RiskClassPair, util: &UtilityFunction, w0: f64, r: f64) -> Result<AsymSolution> {
    check_pair(pair, util, w0, r)?;
    let blended = BlendedRisk(*pair);
    let out = coverage_value(0.0, &blended, util, w0, r);
    let eval = |c: f64| coverage_value(c, &blended, util, w0, r);
    // participation binds: the premium takes the whole certainty-equivalent gain
    let best = coverage_argmax(r, &eval, &|t: &CoverageValue| {
        let z = t.ce - out.ce;
        (z >= 0.0).then_some(z - t.p * t.c)
    });
    let fair = coverage_argmax(r, &eval, &|t: &CoverageValue| {
        let z = t.p * t.c;
        (t.ce - z >= out.ce).then_some(t.ce - z)
    });
    let fallbacks = [Some(out), best.map(|b| b.0), fair.map(|f| f.0)]
        .iter()
        .flatten()
        .filter(|t| t.fallback)
        .count();

    let (chosen, z, profit, outcome) = match best {
        Some((t, v)) if v > NO_MARKET_TOL => (t, t.ce - out.ce, v, MarketOutcome::Traded),
        _ => (out, 0.0, 0.0, MarketOutcome::NoMarket),
    };
    let contracts = BTreeMap::from([(ClassLabel::Pooled, contract(z, chosen.c))]);
    Ok(AsymSolution {
        scenario: Scenario::NoInfo,
        outcome,
        coverage_kind: coverage_kind(&contracts, r),
        contracts,
        investments: BTreeMap::from([(ClassLabel::Pooled, chosen.x)]),
        insurer_profit: profit,
        value_of_information: 0.0,
        equilibrium_kind: EquilibriumKind::Pooling,
        fair_contract: fair.map(|(t, _)| contract(t.p * t.c, t.c)),
        dense_fallbacks: fallbacks,
    })
}

#[derive(Debug, Clone, Copy)]
struct ClassValues {
    low: CoverageValue,
    high: CoverageValue,
}

fn class_values(c: f64, pair: &RiskClassPair, util: &UtilityFunction, w0: f64, r: f64) -> ClassValues {
    ClassValues {
        low: coverage_value(c, &pair.low, util, w0, r),
        high: coverage_value(c, &pair.high, util, w0, r),
    }
}

impl ClassValues {
    fn fallbacks(&self) -> usize {
        self.low.fallback as usize + self.high.fallback as usize
    }
}

/// Pooling contract signed before users learn their class; each class then
/// invests against its own risk. Both classes must weakly prefer the
/// contract to their own uninsured optimum.
pub fn solve_post_contract_info(pair: &RiskClassPair, util: &UtilityFunction, w0: f64, r: f64) -> Result<AsymSolution> {
    check_pair(pair, util, w0, r)?;
    let theta = pair.theta;
    let out = class_values(0.0, pair, util, w0, r);
    let eval = |c: f64| class_values(c, pair, util, w0, r);
    let max_premium = |t: &ClassValues| (t.low.ce - out.low.ce).min(t.high.ce - out.high.ce);
    let claims = |t: &ClassValues| (theta * t.high.p + (1.0 - theta) * t.low.p) * t.low.c;
    let best = coverage_argmax(r, &eval, &|t: &ClassValues| {
        let z = max_premium(t);
        (z >= 0.0).then_some(z - claims(t))
    });
    let fair = coverage_argmax(r, &eval, &|t: &ClassValues| {
        let z = claims(t);
        let origin = utility_origin(w0, r);
        let welfare = theta * util.value_from(w0 + t.high.ce - z, origin)
            + (1.0 - theta) * util.value_from(w0 + t.low.ce - z, origin);
        (z <= max_premium(t)).then_some(welfare)
    });
    let fallbacks = [Some(out), best.map(|b| b.0), fair.map(|f| f.0)]
        .iter()
        .flatten()
        .map(ClassValues::fallbacks)
        .sum();

    let (chosen, z, profit, outcome) = match best {
        Some((t, v)) if v > NO_MARKET_TOL => (t, max_premium(&t), v, MarketOutcome::Traded),
        _ => (out, 0.0, 0.0, MarketOutcome::NoMarket),
    };
    let signed = contract(z, chosen.low.c);
    let contracts = BTreeMap::from([(ClassLabel::Pooled, signed)]);
    Ok(AsymSolution {
        scenario: Scenario::PostContractInfo,
        outcome,
        coverage_kind: coverage_kind(&contracts, r),
        contracts,
        investments: BTreeMap::from([(ClassLabel::Low, chosen.low.x), (ClassLabel::High, chosen.high.x)]),
        insurer_profit: profit,
        value_of_information: value_of_information_post(&signed, pair, util, w0, r)?,
        equilibrium_kind: EquilibriumKind::Pooling,
        fair_contract: fair.map(|(t, _)| contract(claims(&t), t.low.c)),
        dense_fallbacks: fallbacks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Menu {
    z_low: f64,
    z_high: f64,
    value: f64,
}

/// Profit-maximizing premiums for a low-chance contract at `l` and a
/// high-chance contract at `h`, or `None` if no premiums satisfy both
/// participation and both incentive constraints.
///
/// In certainty-equivalent terms every constraint is linear in the two
/// premiums, and the objective increases in both, so the optimum sits at
/// the largest admissible low-chance premium.
fn menu(l: &ClassValues, h: &ClassValues, out: &ClassValues, theta: f64) -> Option<Menu> {
    let a_low = l.low.ce - out.low.ce;
    let a_high = h.high.ce - out.high.ce;
    // bounds on z_high - z_low from the two incentive constraints
    let gap_max = h.high.ce - l.high.ce;
    let gap_min = h.low.ce - l.low.ce;
    if gap_min > gap_max {
        return None;
    }
    let z_low = a_low.min(a_high - gap_min);
    if z_low < 0.0f64.max(-gap_max) {
        return None;
    }
    let z_high = a_high.min(z_low + gap_max);
    let value = (1.0 - theta) * (z_low - l.low.p * l.low.c) + theta * (z_high - h.high.p * h.high.c);
    Some(Menu { z_low, z_high, value })
}

#[derive(Debug, Clone, Copy)]
struct MenuChoice {
    low: ClassValues,
    high: ClassValues,
    menu: Menu,
}

fn best_menu(lows: &[ClassValues], highs: &[ClassValues], out: &ClassValues, theta: f64) -> Option<MenuChoice> {
    let per_low: Vec<Option<MenuChoice>> = lows
        .par_iter()
        .map(|l| {
            let mut best: Option<MenuChoice> = None;
            for h in highs {
                let Some(m) = menu(l, h, out, theta) else { continue };
                if best.is_none_or(|b| m.value > b.menu.value) {
                    best = Some(MenuChoice {
                        low: *l,
                        high: *h,
                        menu: m,
                    });
                }
            }
            best
        })
        .collect();
    per_low.into_iter().flatten().fold(None, |best, ch| match best {
        Some(b) if ch.menu.value <= b.menu.value => Some(b),
        _ => Some(ch),
    })
}

/// Menu of two contracts offered to users who already know their class.
/// Maximizes `theta profit_HC(C_HC) + (1 - theta) profit_LC(C_LC)` subject
/// to participation and incentive compatibility for both classes.
pub fn solve_pre_contract_info(pair: &RiskClassPair, util: &UtilityFunction, w0: f64, r: f64) -> Result<AsymSolution> {
    check_pair(pair, util, w0, r)?;
    let theta = pair.theta;
    let out = class_values(0.0, pair, util, w0, r);
    let values = |levels: &[f64]| -> Vec<ClassValues> {
        levels.par_iter().map(|&c| class_values(c, pair, util, w0, r)).collect()
    };
    let grid = values(&coverage_grid(r));
    let mut fallbacks: usize = out.fallbacks() + grid.iter().map(ClassValues::fallbacks).sum::<usize>();
    let mut best = best_menu(&grid, &grid, &out, theta);

    let mut step = r / ASYM_GRID_STEPS as f64;
    for _ in 0..REFINE_LEVELS {
        let Some(incumbent) = best else { break };
        step /= REFINE_HALF_WIDTH as f64;
        let lows = values(&coverage_patch(incumbent.low.low.c, step, r));
        let highs = values(&coverage_patch(incumbent.high.high.c, step, r));
        fallbacks += lows.iter().chain(&highs).map(ClassValues::fallbacks).sum::<usize>();
        if let Some(local) = best_menu(&lows, &highs, &out, theta) {
            if local.menu.value > incumbent.menu.value {
                best = Some(local);
            }
        }
    }

    let traded = best.is_some_and(|b| b.menu.value > NO_MARKET_TOL);
    let (c_low, c_high, profit) = match best {
        Some(b) if traded => (
            contract(b.menu.z_low, b.low.low.c),
            contract(b.menu.z_high, b.high.high.c),
            b.menu.value,
        ),
        _ => (Contract::NONE, Contract::NONE, 0.0),
    };
    let lc = respond(&c_low, &pair.low, util, w0, r);
    let hc = respond(&c_high, &pair.high, util, w0, r);
    let blended = BlendedRisk(*pair);
    let xa = respond(&c_low, &blended, util, w0, r).x;
    let vi = theta * hc.eu + (1.0 - theta) * lc.eu - expected_utility(&c_low, &blended, util, w0, r, xa);
    let contracts = BTreeMap::from([(ClassLabel::Low, c_low), (ClassLabel::High, c_high)]);
    Ok(AsymSolution {
        scenario: Scenario::PreContractInfo,
        outcome: if traded {
            MarketOutcome::Traded
        } else {
            MarketOutcome::NoMarket
        },
        coverage_kind: coverage_kind(&contracts, r),
        contracts,
        investments: BTreeMap::from([(ClassLabel::Low, lc.x), (ClassLabel::High, hc.x)]),
        insurer_profit: profit,
        value_of_information: vi,
        equilibrium_kind: if c_low == c_high {
            EquilibriumKind::Pooling
        } else {
            EquilibriumKind::Separating
        },
        fair_contract: None,
        dense_fallbacks: fallbacks,
    })
}

/// Insurer profit from one class buying `contract` and best-responding.
pub fn class_profit<P: LossCurve + ?Sized>(
    contract: &Contract,
    risk: &P,
    util: &UtilityFunction,
    w0: f64,
    r: f64,
) -> f64 {
    respond(contract, risk, util, w0, r).profit
}

/// The class's best-response investment and resulting expected utility.
pub fn class_response<P: LossCurve + ?Sized>(
    contract: &Contract,
    risk: &P,
    util: &UtilityFunction,
    w0: f64,
    r: f64,
) -> (f64, f64) {
    let res = respond(contract, risk, util, w0, r);
    (res.x, res.eu)
}
