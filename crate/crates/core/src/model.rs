//! Domain types shared by every solver: parametric risk and utility
//! families, contracts, market parameters, and the elementary probability
//! and wealth accounting of the networked-user model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Upper cap on every investment search. Reaching it is reported as a
/// boundary flag, never as a numeric infinity.
pub const X_MAX: f64 = 1e6;

/// Probabilities are clamped to `[0, PROB_CEILING]` before entering products.
pub const PROB_CEILING: f64 = 1.0 - 1e-12;

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(0.0, PROB_CEILING)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskFamily {
    /// `p(x) = p0 * exp(-rate * x)`
    Exponential,
    /// `p(x) = p0 / (1 + x)^rate`
    Power,
}

/// Decreasing, convex loss probability as a function of self-defense
/// investment. Both families satisfy `p' < 0`, `p'' > 0` and vanish (with
/// their slope) as investment grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskFunction {
    pub family: RiskFamily,
    pub p0: f64,
    pub rate: f64,
}

impl RiskFunction {
    pub fn new(family: RiskFamily, p0: f64, rate: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(domain(format!("p0 must lie in (0, 1], got {p0}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(domain(format!("rate must be positive and finite, got {rate}")));
        }
        Ok(Self { family, p0, rate })
    }

    pub fn exponential(p0: f64, lambda: f64) -> Result<Self> {
        Self::new(RiskFamily::Exponential, p0, lambda)
    }

    pub fn power(p0: f64, gamma: f64) -> Result<Self> {
        Self::new(RiskFamily::Power, p0, gamma)
    }

    /// `p(x)`. Callers guarantee `x >= 0`; see [`risk_prob`] for the checked form.
    pub fn prob(&self, x: f64) -> f64 {
        match self.family {
            RiskFamily::Exponential => self.p0 * (-self.rate * x).exp(),
            RiskFamily::Power => self.p0 * (1.0 + x).powf(-self.rate),
        }
    }

    /// `p'(x)`, always negative.
    pub fn slope(&self, x: f64) -> f64 {
        match self.family {
            RiskFamily::Exponential => -self.rate * self.prob(x),
            RiskFamily::Power => -self.rate * self.p0 * (1.0 + x).powf(-self.rate - 1.0),
        }
    }

    /// `p''(x)`, always positive.
    pub fn curvature(&self, x: f64) -> f64 {
        match self.family {
            RiskFamily::Exponential => self.rate * self.rate * self.prob(x),
            RiskFamily::Power => self.rate * (self.rate + 1.0) * self.p0 * (1.0 + x).powf(-self.rate - 2.0),
        }
    }
}

/// Checked `p(x)`.
pub fn risk_prob(rf: &RiskFunction, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("investment must be non-negative, got {x}")));
    }
    Ok(rf.prob(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFamily {
    Linear,
    ExponentialConcave,
}

/// Wealth utility. `ExponentialConcave` is `u(w) = (1 - exp(-a w)) / a`;
/// `Linear` is its risk-neutral limit `u(w) = w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityFunction {
    pub family: UtilityFamily,
    pub aversion: f64,
}

impl UtilityFunction {
    pub fn linear() -> Self {
        Self {
            family: UtilityFamily::Linear,
            aversion: 0.0,
        }
    }

    pub fn exponential(aversion: f64) -> Result<Self> {
        if !(aversion > 0.0 && aversion.is_finite()) {
            return Err(domain(format!(
                "exponential utility needs a positive finite aversion, got {aversion}"
            )));
        }
        Ok(Self {
            family: UtilityFamily::ExponentialConcave,
            aversion,
        })
    }

    pub fn value(&self, w: f64) -> f64 {
        self.value_from(w, 0.0)
    }

    pub fn marginal(&self, w: f64) -> f64 {
        self.marginal_from(w, 0.0)
    }

    pub fn curvature(&self, w: f64) -> f64 {
        self.curvature_from(w, 0.0)
    }

    /// Utility of `w` under the positive affine rescaling that puts
    /// `u(origin) = 0` and `u'(origin) = 1`. Every expected-utility ranking is
    /// unchanged, and exponential utility stays representable at large wealth.
    pub fn value_from(&self, w: f64, origin: f64) -> f64 {
        match self.family {
            UtilityFamily::Linear => w - origin,
            UtilityFamily::ExponentialConcave => {
                let a = self.aversion;
                -(-a * (w - origin)).exp_m1() / a
            }
        }
    }

    /// Wealth whose utility (normalized at `origin`) is `u`.
    pub fn inverse_from(&self, u: f64, origin: f64) -> f64 {
        match self.family {
            UtilityFamily::Linear => origin + u,
            UtilityFamily::ExponentialConcave => origin - (-self.aversion * u).ln_1p() / self.aversion,
        }
    }

    pub fn marginal_from(&self, w: f64, origin: f64) -> f64 {
        match self.family {
            UtilityFamily::Linear => 1.0,
            UtilityFamily::ExponentialConcave => (-self.aversion * (w - origin)).exp(),
        }
    }

    pub fn curvature_from(&self, w: f64, origin: f64) -> f64 {
        match self.family {
            UtilityFamily::Linear => 0.0,
            UtilityFamily::ExponentialConcave => -self.aversion * (-self.aversion * (w - origin)).exp(),
        }
    }
}

/// Piecewise insured/uninsured valuation used by the contract pricer:
/// `w - pKR` without insurance, `w - z - pK(R - c)` with contract `(z, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseInsuranceUtility {
    pub wealth: f64,
    /// Risk-aversion degree `K >= 1`.
    pub k: f64,
    pub risk: f64,
}

impl PiecewiseInsuranceUtility {
    pub fn new(wealth: f64, k: f64, risk: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(domain(format!("risk-aversion degree K must be >= 1, got {k}")));
        }
        if !(risk > 0.0 && risk < wealth) {
            return Err(domain(format!(
                "risk size must satisfy 0 < R < w, got R={risk}, w={wealth}"
            )));
        }
        Ok(Self { wealth, k, risk })
    }

    pub fn uninsured(&self, p: f64) -> f64 {
        self.wealth - p * self.k * self.risk
    }

    pub fn insured(&self, p: f64, contract: &Contract) -> f64 {
        self.wealth - contract.premium - p * self.k * (self.risk - contract.coverage)
    }
}

/// A `(premium, coverage)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub premium: f64,
    pub coverage: f64,
}

impl Contract {
    pub const NONE: Contract = Contract {
        premium: 0.0,
        coverage: 0.0,
    };

    pub fn new(premium: f64, coverage: f64) -> Result<Self> {
        if !(premium >= 0.0 && premium.is_finite()) {
            return Err(domain(format!("premium must be non-negative, got {premium}")));
        }
        if !(coverage >= 0.0 && coverage.is_finite()) {
            return Err(domain(format!("coverage must be non-negative, got {coverage}")));
        }
        Ok(Self { premium, coverage })
    }

    /// Rejects coverage above the risk size.
    pub fn check_within(&self, risk: f64) -> Result<()> {
        if self.coverage > risk {
            return Err(domain(format!("coverage {} exceeds risk size {risk}", self.coverage)));
        }
        Ok(())
    }

    pub fn deductible(&self, risk: f64) -> f64 {
        risk - self.coverage
    }
}

/// Risk-reduction cost `x(dp) = c1 dp + c2 dp^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvestmentCostFunction {
    pub c1: f64,
    pub c2: f64,
}

impl InvestmentCostFunction {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(domain(format!(
                "cost coefficients must be positive, got c1={c1}, c2={c2}"
            )));
        }
        Ok(Self { c1, c2 })
    }

    pub fn cost(&self, dp: f64) -> f64 {
        self.c1 * dp + self.c2 * dp * dp
    }

    pub fn marginal(&self, dp: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * dp
    }

    pub fn curvature(&self) -> f64 {
        2.0 * self.c2
    }
}

/// Low-chance / high-chance risk classes and the share `theta` of
/// high-chance users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskClassPair {
    pub low: RiskFunction,
    pub high: RiskFunction,
    pub theta: f64,
}

impl RiskClassPair {
    pub fn new(low: RiskFunction, high: RiskFunction, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(domain(format!("theta must lie in [0, 1], got {theta}")));
        }
        if low.p0 >= 1.0 || high.p0 >= 1.0 {
            return Err(domain("class risk probabilities must stay below 1"));
        }
        for x in class_test_grid() {
            let (pl, ph) = (low.prob(x), high.prob(x));
            if ph < pl {
                return Err(domain(format!(
                    "high-chance class must dominate the low-chance class: p_hc({x}) = {ph} < p_lc({x}) = {pl}"
                )));
            }
        }
        Ok(Self { low, high, theta })
    }

    pub fn blended_prob(&self, x: f64) -> f64 {
        self.theta * self.high.prob(x) + (1.0 - self.theta) * self.low.prob(x)
    }

    pub fn blended_slope(&self, x: f64) -> f64 {
        self.theta * self.high.slope(x) + (1.0 - self.theta) * self.low.slope(x)
    }

    pub fn blended_curvature(&self, x: f64) -> f64 {
        self.theta * self.high.curvature(x) + (1.0 - self.theta) * self.low.curvature(x)
    }

    pub fn classes_coincide(&self) -> bool {
        self.low == self.high
    }

    /// Whether low-chance investment is the more effective one at every grid
    /// point (`0 > p'_lc > p'_hc`). Optional check; the solvers do not rely on it.
    pub fn low_class_more_effective(&self) -> bool {
        class_test_grid().all(|x| {
            let (sl, sh) = (self.low.slope(x), self.high.slope(x));
            sl < 0.0 && sl > sh
        })
    }
}

fn class_test_grid() -> impl Iterator<Item = f64> {
    // 0 plus log-spaced points up to X_MAX
    std::iter::once(0.0).chain((0..=120).map(|i| 10f64.powf(-3.0 + 9.0 * i as f64 / 120.0)))
}

/// Parameters of the networked-user market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub n: usize,
    pub w0: f64,
    pub r: f64,
    pub risk: RiskFunction,
    pub util: UtilityFunction,
    pub classes: Option<RiskClassPair>,
    /// Minimum investment every user has already made; a lower bound on `x`.
    pub base_investment: f64,
}

impl MarketParams {
    pub fn new(n: usize, w0: f64, r: f64, risk: RiskFunction) -> Result<Self> {
        if n < 1 {
            return Err(domain("user count n must be at least 1"));
        }
        if !(r > 0.0 && r < w0 && w0.is_finite()) {
            return Err(domain(format!("risk size must satisfy 0 < R < w0, got R={r}, w0={w0}")));
        }
        Ok(Self {
            n,
            w0,
            r,
            risk,
            util: UtilityFunction::linear(),
            classes: None,
            base_investment: 0.0,
        })
    }

    pub fn with_utility(mut self, util: UtilityFunction) -> Self {
        self.util = util;
        self
    }

    pub fn with_classes(mut self, classes: RiskClassPair) -> Self {
        self.classes = Some(classes);
        self
    }

    pub fn with_base_investment(mut self, base: f64) -> Result<Self> {
        if !(0.0..X_MAX).contains(&base) {
            return Err(domain(format!("base investment must lie in [0, {X_MAX}), got {base}")));
        }
        self.base_investment = base;
        Ok(self)
    }

    pub fn with_users(mut self, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(domain("user count n must be at least 1"));
        }
        self.n = n;
        Ok(self)
    }
}

/// Probability that a user suffers the loss under perfect spread:
/// `1 - prod_j (1 - p(x_j))`.
pub fn joint_loss_prob(x_vec: &[f64], rf: &RiskFunction) -> Result<f64> {
    if x_vec.is_empty() {
        return Err(domain("investment vector is empty"));
    }
    if let [x] = x_vec {
        return Ok(clamp_prob(risk_prob(rf, *x)?));
    }
    let mut safe = 1.0;
    for &x in x_vec {
        safe *= 1.0 - clamp_prob(risk_prob(rf, x)?);
    }
    Ok(1.0 - safe)
}

fn check_profile(params: &MarketParams, x_vec: &[f64], contract: &Contract, user: usize) -> Result<()> {
    if x_vec.len() != params.n {
        return Err(domain(format!(
            "investment vector has {} entries for {} users",
            x_vec.len(),
            params.n
        )));
    }
    if user >= params.n {
        return Err(domain(format!("user index {user} out of range for n={}", params.n)));
    }
    contract.check_within(params.r)
}

/// Final wealth upon facing the risk, with the premium read as
/// `(1 - prod (1 - p(x_j))) * c`:
/// `w0 - x_i - P c - R + c`. For `c = R` this is the wealth in every state.
pub fn expected_final_wealth(params: &MarketParams, x_vec: &[f64], contract: &Contract, user: usize) -> Result<f64> {
    check_profile(params, x_vec, contract, user)?;
    let p = joint_loss_prob(x_vec, &params.risk)?;
    let c = contract.coverage;
    Ok(params.w0 - x_vec[user] - p * c - params.r + c)
}

/// Unconditional expected wealth with the same premium `P c` paid up front
/// and the deductible `R - c` borne when the joint loss occurs:
/// `w0 - x_i - P c - P (R - c)`. Equals [`expected_final_wealth`] at `c = R`.
pub fn expected_wealth(params: &MarketParams, x_vec: &[f64], contract: &Contract, user: usize) -> Result<f64> {
    check_profile(params, x_vec, contract, user)?;
    let p = joint_loss_prob(x_vec, &params.risk)?;
    let c = contract.coverage;
    Ok(params.w0 - x_vec[user] - p * c - p * (params.r - c))
}

/// Expected wealth of a lone uninsured user: `w0 - x - p(x) R`.
pub fn uninsured_wealth(params: &MarketParams, x: f64) -> Result<f64> {
    Ok(params.w0 - x - risk_prob(&params.risk, x)? * params.r)
}
