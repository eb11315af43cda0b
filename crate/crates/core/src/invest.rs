//! Optimal self-defense investment: full-coverage Cases 1-3, the partial
//! coverage Cases A and B, and the investment-ordering comparison.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{clamp_prob, InvestmentCostFunction, MarketParams, UtilityFunction, X_MAX};
use crate::oracle::grid_argmax_1d;
use crate::roots::{bisect, expand_until, golden_max, sign_changes};

/// Grid points used when scanning a first-order condition for sign changes.
pub const SCAN_POINTS: usize = 100_000;
/// Slack allowed when comparing investments across cases.
pub const ORDER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Interior,
    ZeroInvestment,
    FullElimination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvestmentSolution {
    pub x_star: f64,
    pub p_star: f64,
    pub objective_value: f64,
    pub boundary: Boundary,
    pub foc_residual: f64,
    /// Own second derivative of the objective at the solution.
    pub second_derivative: f64,
    /// Largest payoff improvement found by a unilateral grid deviation, when checked.
    pub deviation_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub equilibria: Vec<InvestmentSolution>,
    pub count: usize,
    pub selected: usize,
}

impl EquilibriumSet {
    fn from_sorted(equilibria: Vec<InvestmentSolution>) -> Self {
        Self {
            count: equilibria.len(),
            equilibria,
            selected: 0,
        }
    }

    pub fn canonical(&self) -> &InvestmentSolution {
        &self.equilibria[self.selected]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub x_case1: f64,
    pub x_case2: f64,
    pub x_case3: f64,
    pub x_case3_all: Vec<f64>,
    pub lemma1_holds: bool,
    pub lemma2_holds: bool,
    /// `None` when the precondition fails and the ordering is not asserted.
    pub lemma3_holds: Option<bool>,
    pub lemma3_precondition: bool,
    pub threshold: f64,
}

fn g1(params: &MarketParams, x: f64) -> f64 {
    -1.0 - params.risk.slope(x) * params.r
}

fn g2(params: &MarketParams, x: f64) -> f64 {
    let rf = &params.risk;
    let n = params.n as i32;
    -1.0 - n as f64 * rf.slope(x) * (1.0 - clamp_prob(rf.prob(x))).powi(n - 1) * params.r
}

fn g3(params: &MarketParams, x: f64) -> f64 {
    let rf = &params.risk;
    -1.0 - rf.slope(x) * (1.0 - clamp_prob(rf.prob(x))).powi(params.n as i32 - 1) * params.r
}

/// Smallest doubling point past which `scale * |p'| <= 0.5`, so the
/// first-order condition is at most -0.5 from there on.
fn effective_upper(params: &MarketParams, scale: f64) -> f64 {
    let lo = params.base_investment;
    expand_until(lo, X_MAX, |x| scale * params.risk.slope(x).abs() <= 0.5)
}

/// Cooperative per-user objective at a symmetric profile.
fn case2_objective(params: &MarketParams, x: f64) -> f64 {
    let q = 1.0 - clamp_prob(params.risk.prob(x));
    params.w0 - x - (1.0 - q.powi(params.n as i32)) * params.r
}

/// User payoff in the non-cooperative game when it invests `xi` and the
/// other `n - 1` users invest `others`.
fn case3_payoff(params: &MarketParams, xi: f64, others: f64) -> f64 {
    let rf = &params.risk;
    let safe_others = (1.0 - clamp_prob(rf.prob(others))).powi(params.n as i32 - 1);
    params.w0 - xi - (1.0 - (1.0 - clamp_prob(rf.prob(xi))) * safe_others) * params.r
}

/// Uninsured lone user (no cooperation, no spread).
pub fn solve_case1(params: &MarketParams) -> Result<InvestmentSolution> {
    let lo = params.base_investment;
    let rf = &params.risk;
    let objective = |x: f64| params.w0 - x - rf.prob(x) * params.r;
    let pack = |x: f64, boundary| InvestmentSolution {
        x_star: x,
        p_star: rf.prob(x),
        objective_value: objective(x),
        boundary,
        foc_residual: g1(params, x),
        second_derivative: -rf.curvature(x) * params.r,
        deviation_gain: None,
    };
    if g1(params, lo) <= 0.0 {
        return Ok(pack(lo, Boundary::ZeroInvestment));
    }
    let hi = expand_until(lo, X_MAX, |x| g1(params, x) <= 0.0);
    if g1(params, hi) > 0.0 {
        return Ok(pack(hi, Boundary::FullElimination));
    }
    let x = bisect(|x| g1(params, x), lo, hi);
    Ok(pack(x, Boundary::Interior))
}

/// Cooperative investment (social optimum with perfect spread).
///
/// The symmetric per-user objective need not be concave, so every local
/// maximum on the scan plus the lower bound is compared by objective value;
/// ties go to the smaller investment.
pub fn solve_case2(params: &MarketParams) -> Result<InvestmentSolution> {
    let lo = params.base_investment;
    let rf = &params.risk;
    let n = params.n as i32;
    let hi = effective_upper(params, params.n as f64 * params.r);

    let mut candidates = vec![(lo, Boundary::ZeroInvestment)];
    if hi > lo {
        for (a, b) in sign_changes(|x| g2(params, x), lo, hi, SCAN_POINTS) {
            if g2(params, a) > 0.0 {
                candidates.push((bisect(|x| g2(params, x), a, b), Boundary::Interior));
            }
        }
    }
    if g2(params, hi) > 0.0 {
        candidates.push((hi, Boundary::FullElimination));
    }
    let mut best = candidates[0];
    let mut best_val = case2_objective(params, best.0);
    for &(x, kind) in &candidates[1..] {
        let v = case2_objective(params, x);
        if v > best_val {
            best = (x, kind);
            best_val = v;
        }
    }
    let (x, boundary) = best;
    let p = rf.prob(x);
    Ok(InvestmentSolution {
        x_star: x,
        p_star: p,
        objective_value: best_val,
        boundary,
        foc_residual: g2(params, x),
        second_derivative: -(n as f64) * rf.curvature(x) * (1.0 - clamp_prob(p)).powi(n - 1) * params.r,
        deviation_gain: None,
    })
}

/// All symmetric Nash equilibria of the non-cooperative game with perfect
/// spread, ascending in investment. Each one is re-checked by a unilateral
/// deviation scan.
pub fn solve_case3(params: &MarketParams) -> Result<EquilibriumSet> {
    let lo = params.base_investment;
    let hi = effective_upper(params, params.r);
    let mut points = Vec::new();
    if g3(params, lo) <= 0.0 {
        points.push((lo, Boundary::ZeroInvestment));
    }
    if hi > lo {
        for (a, b) in sign_changes(|x| g3(params, x), lo, hi, SCAN_POINTS) {
            points.push((bisect(|x| g3(params, x), a, b), Boundary::Interior));
        }
    }
    if g3(params, hi) > 0.0 {
        points.push((hi, Boundary::FullElimination));
    }
    if points.is_empty() {
        return Err(Error::Numerical("no symmetric equilibrium found".into()));
    }
    let rf = &params.risk;
    let n = params.n as i32;
    let mut equilibria = Vec::with_capacity(points.len());
    for (x, boundary) in points {
        let own = case3_payoff(params, x, x);
        let (_, best) = grid_argmax_1d(
            |xi| case3_payoff(params, xi, x),
            lo,
            hi.max(x) * 2.0 - lo,
            SCAN_POINTS,
            2,
        )?;
        let p = rf.prob(x);
        equilibria.push(InvestmentSolution {
            x_star: x,
            p_star: p,
            objective_value: own,
            boundary,
            foc_residual: g3(params, x),
            second_derivative: -rf.curvature(x) * (1.0 - clamp_prob(p)).powi(n - 1) * params.r,
            deviation_gain: Some(best - own),
        });
    }
    equilibria.sort_by(|a, b| a.x_star.total_cmp(&b.x_star));
    Ok(EquilibriumSet::from_sorted(equilibria))
}

fn check_deductible(params: &MarketParams, d: f64) -> Result<()> {
    if !(d > 0.0 && d < params.r) {
        return Err(domain(format!(
            "deductible must satisfy 0 < D < R, got D={d}, R={}",
            params.r
        )));
    }
    Ok(())
}

/// Single user with an actuarially fair deductible contract, choosing its
/// risk reduction `dp = p0 - p` at cost `x(dp)`.
pub fn solve_partial_a(params: &MarketParams, cost: &InvestmentCostFunction, d: f64) -> Result<InvestmentSolution> {
    check_deductible(params, d)?;
    let p0 = params.risk.p0;
    let net = params.r - d;
    let dp = ((net - cost.c1) / (2.0 * cost.c2)).clamp(0.0, p0);
    let p = p0 - dp;
    let x = cost.cost(dp);
    let wealth = params.w0 - x - p * net;
    let boundary = if dp == 0.0 {
        Boundary::ZeroInvestment
    } else if p == 0.0 {
        Boundary::FullElimination
    } else {
        Boundary::Interior
    };
    Ok(InvestmentSolution {
        x_star: x,
        p_star: p,
        objective_value: params.util.value_from(wealth, params.w0),
        boundary,
        foc_residual: net - cost.marginal(dp),
        second_derivative: -cost.curvature() * params.util.marginal_from(wealth, params.w0),
        deviation_gain: None,
    })
}

/// Payoff of user `i` in the deductible game, in terms of its own loss
/// probability `pi` while everyone else holds `q`.
#[derive(Debug, Clone, Copy)]
struct DeductibleGame {
    n: i32,
    w0: f64,
    r: f64,
    d: f64,
    p0: f64,
    cost: InvestmentCostFunction,
    util: UtilityFunction,
}

struct GameState {
    s: f64,
    l: f64,
    w: f64,
    dw: f64,
}

impl DeductibleGame {
    fn new(params: &MarketParams, cost: &InvestmentCostFunction, d: f64) -> Self {
        Self {
            n: params.n as i32,
            w0: params.w0,
            r: params.r,
            d,
            p0: params.risk.p0,
            cost: *cost,
            util: params.util,
        }
    }

    fn state(&self, pi: f64, q: f64) -> GameState {
        let s = (1.0 - clamp_prob(q)).powi(self.n - 1);
        let l = 1.0 - (1.0 - clamp_prob(pi)) * s;
        let dp = self.p0 - pi;
        let w = self.w0 - self.cost.cost(dp) - l * (self.r - self.d);
        let dw = self.cost.marginal(dp) - s * (self.r - self.d);
        GameState { s, l, w, dw }
    }

    fn u(&self, w: f64) -> f64 {
        self.util.value_from(w, self.w0)
    }

    fn du(&self, w: f64) -> f64 {
        self.util.marginal_from(w, self.w0)
    }

    fn ddu(&self, w: f64) -> f64 {
        self.util.curvature_from(w, self.w0)
    }

    fn payoff(&self, pi: f64, q: f64) -> f64 {
        let st = self.state(pi, q);
        (1.0 - st.l) * self.u(st.w) + st.l * self.u(st.w - self.d)
    }

    fn marginal(&self, pi: f64, q: f64) -> f64 {
        let GameState { s, l, w, dw } = self.state(pi, q);
        let d = self.d;
        -s * (self.u(w) - self.u(w - d)) + dw * ((1.0 - l) * self.du(w) + l * self.du(w - d))
    }

    fn curvature(&self, pi: f64, q: f64) -> f64 {
        let GameState { s, l, w, dw } = self.state(pi, q);
        let d = self.d;
        let ddw = -self.cost.curvature();
        -2.0 * s * dw * (self.du(w) - self.du(w - d))
            + ddw * ((1.0 - l) * self.du(w) + l * self.du(w - d))
            + dw * dw * ((1.0 - l) * self.ddu(w) + l * self.ddu(w - d))
    }

    fn best_response(&self, q: f64) -> f64 {
        const COARSE: usize = 257;
        let step = self.p0 / (COARSE - 1) as f64;
        let node = |k: usize| if k == COARSE - 1 { self.p0 } else { k as f64 * step };
        let mut k_best = 0;
        let mut v_best = f64::NEG_INFINITY;
        for k in 0..COARSE {
            let v = self.payoff(node(k), q);
            if v > v_best {
                k_best = k;
                v_best = v;
            }
        }
        let a = node(k_best.saturating_sub(1));
        let b = node((k_best + 1).min(COARSE - 1));
        let (ga, gb) = golden_max(|p| self.payoff(p, q), a, b, 1e-13);
        let mut p = 0.5 * (ga + gb);
        if self.marginal(a, q) > 0.0 && self.marginal(b, q) < 0.0 {
            p = bisect(|p| self.marginal(p, q), a, b);
        }
        // endpoints win exact ties so boundary responses stay exact
        for cand in [a, b] {
            if self.payoff(cand, q) >= self.payoff(p, q) {
                p = cand;
            }
        }
        p
    }

    fn symmetric_foc(&self, p: f64) -> f64 {
        self.marginal(p, p)
    }

    /// Snaps an iterate to the boundary or to the nearby root of the
    /// symmetric first-order condition.
    fn polish(&self, p: f64) -> f64 {
        const SNAP: f64 = 1e-7;
        if p <= SNAP && self.symmetric_foc(0.0) <= 0.0 {
            return 0.0;
        }
        if p >= self.p0 - SNAP && self.symmetric_foc(self.p0) >= 0.0 {
            return self.p0;
        }
        let mut h = 1e-9;
        while h < self.p0 {
            let a = (p - h).max(0.0);
            let b = (p + h).min(self.p0);
            let (fa, fb) = (self.symmetric_foc(a), self.symmetric_foc(b));
            if fa == 0.0 {
                return a;
            }
            if fb == 0.0 {
                return b;
            }
            if (fa > 0.0) != (fb > 0.0) {
                return bisect(|x| self.symmetric_foc(x), a, b);
            }
            h *= 4.0;
        }
        p
    }

    fn solution(&self, p: f64) -> Result<InvestmentSolution> {
        let own = self.payoff(p, p);
        let (_, best) = grid_argmax_1d(|pi| self.payoff(pi, p), 0.0, self.p0, 10_000, 2)?;
        let boundary = if p == self.p0 {
            Boundary::ZeroInvestment
        } else if p == 0.0 {
            Boundary::FullElimination
        } else {
            Boundary::Interior
        };
        Ok(InvestmentSolution {
            x_star: self.cost.cost(self.p0 - p),
            p_star: p,
            objective_value: own,
            boundary,
            foc_residual: self.symmetric_foc(p),
            second_derivative: self.curvature(p, p),
            deviation_gain: Some(best - own),
        })
    }

    fn equilibria(&self) -> Result<EquilibriumSet> {
        const MAX_ITER: usize = 10_000;
        let mut found: Vec<f64> = Vec::new();
        let mut stalled = Vec::new();
        for start in [self.p0, 0.5 * self.p0, 0.0] {
            let mut p = start;
            let mut converged = false;
            for _ in 0..MAX_ITER {
                let next = 0.5 * p + 0.5 * self.best_response(p);
                let step = (next - p).abs();
                p = next;
                if step < 1e-10 {
                    converged = true;
                    break;
                }
            }
            if converged {
                found.push(self.polish(p));
            } else {
                stalled.push(p);
            }
        }
        if found.is_empty() {
            return Err(Error::Convergence {
                iterations: MAX_ITER,
                final_iterates: stalled,
            });
        }
        // descending p is ascending investment
        found.sort_by(|a, b| b.total_cmp(a));
        found.dedup_by(|a, b| (*a - *b).abs() < 1e-7);
        let equilibria = found
            .into_iter()
            .map(|p| self.solution(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(EquilibriumSet::from_sorted(equilibria))
    }
}

/// Symmetric equilibria of the deductible game where each user's premium is
/// the fair price `(1 - prod (1 - p_j)) (R - D)` of the joint loss and the
/// deductible `D` is borne whenever that loss occurs.
pub fn solve_partial_b(params: &MarketParams, cost: &InvestmentCostFunction, d: f64) -> Result<EquilibriumSet> {
    check_deductible(params, d)?;
    DeductibleGame::new(params, cost, d).equilibria()
}

/// The same game with no coverage at all (`D = R`).
pub fn solve_uninsured_game(params: &MarketParams, cost: &InvestmentCostFunction) -> Result<EquilibriumSet> {
    DeductibleGame::new(params, cost, params.r).equilibria()
}

/// `1 - (1/n)^(1/(n-1))`
pub fn lemma3_threshold(n: usize) -> f64 {
    let n = n as f64;
    1.0 - (1.0 / n).powf(1.0 / (n - 1.0))
}

pub fn compare_cases(params: &MarketParams) -> Result<ComparisonReport> {
    if params.n < 2 {
        return Err(domain("case comparison needs at least two users"));
    }
    let x1 = solve_case1(params)?.x_star;
    let x2 = solve_case2(params)?.x_star;
    let eq = solve_case3(params)?;
    let all: Vec<f64> = eq.equilibria.iter().map(|e| e.x_star).collect();
    let threshold = lemma3_threshold(params.n);
    let precondition = params.risk.p0 < threshold;
    Ok(ComparisonReport {
        x_case1: x1,
        x_case2: x2,
        x_case3: eq.canonical().x_star,
        lemma1_holds: all.iter().all(|&x| x <= x1 + ORDER_TOL),
        lemma2_holds: all.iter().all(|&x| x <= x2 + ORDER_TOL),
        lemma3_holds: precondition.then_some(x2 >= x1 - ORDER_TOL),
        lemma3_precondition: precondition,
        threshold,
        x_case3_all: all,
    })
}
