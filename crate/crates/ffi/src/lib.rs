//! C ABI over the cyberinsure solvers.
//!
//! Markets are opaque handles created with `ci_market_new` and released with
//! `ci_market_free`. Every fallible call returns a `CiStatus`; on failure the
//! message is kept per thread and read back with `ci_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cyberinsure::{
    profit_contract, solve_case1, solve_case2, solve_case3, solve_no_info, solve_post_contract_info,
    solve_pre_contract_info, welfare_contract, welfare_gap, Boundary, ContractSolution, EquilibriumKind, Error,
    InvestmentSolution, MarketOutcome, MarketParams, RiskClassPair, RiskFamily, RiskFunction, UtilityFunction,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Numerical = 3,
    Convergence = 4,
    NonFinite = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiRiskFamily {
    Exponential = 0,
    Power = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiBoundary {
    Interior = 0,
    ZeroInvestment = 1,
    FullElimination = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiScenario {
    NoInfo = 0,
    PostContractInfo = 1,
    PreContractInfo = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiInvestment {
    pub x_star: f64,
    pub p_star: f64,
    pub objective_value: f64,
    pub boundary: CiBoundary,
    pub foc_residual: f64,
    pub second_derivative: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiContract {
    pub premium: f64,
    pub coverage: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub total_welfare: f64,
    pub insurer_profit: f64,
}

/// Two risk classes sharing one family.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiClasses {
    pub family: CiRiskFamily,
    pub low_p0: f64,
    pub low_rate: f64,
    pub high_p0: f64,
    pub high_rate: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiAsymSummary {
    pub traded: bool,
    pub separating: bool,
    pub insurer_profit: f64,
    pub value_of_information: f64,
    /// Largest coverage offered to any class.
    pub max_coverage: f64,
}

/// Opaque market handle.
pub struct CiMarket {
    params: MarketParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CiStatus {
    match err {
        Error::Domain(_) => CiStatus::Domain,
        Error::Numerical(_) => CiStatus::Numerical,
        Error::Convergence { .. } => CiStatus::Convergence,
        Error::NonFinite { .. } => CiStatus::NonFinite,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CiStatus, String)>) -> CiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CiStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            CiStatus::Panic
        }
    }
}

fn lift(err: Error) -> (CiStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (CiStatus, String) {
    (CiStatus::NullPointer, format!("{what} is null"))
}

fn family(f: CiRiskFamily) -> RiskFamily {
    match f {
        CiRiskFamily::Exponential => RiskFamily::Exponential,
        CiRiskFamily::Power => RiskFamily::Power,
    }
}

fn investment(sol: &InvestmentSolution) -> CiInvestment {
    CiInvestment {
        x_star: sol.x_star,
        p_star: sol.p_star,
        objective_value: sol.objective_value,
        boundary: match sol.boundary {
            Boundary::Interior => CiBoundary::Interior,
            Boundary::ZeroInvestment => CiBoundary::ZeroInvestment,
            Boundary::FullElimination => CiBoundary::FullElimination,
        },
        foc_residual: sol.foc_residual,
        second_derivative: sol.second_derivative,
    }
}

fn contract(sol: &ContractSolution) -> CiContract {
    CiContract {
        premium: sol.contract.premium,
        coverage: sol.contract.coverage,
        p_low: sol.p_low,
        p_high: sol.p_high,
        total_welfare: sol.total_welfare,
        insurer_profit: sol.insurer_profit,
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or 0
/// when no error has been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ci_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a market of `n` users with linear utility. The handle is written to
/// `out` and must be released with `ci_market_free`.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ci_market_new(
    n: usize,
    w0: f64,
    r: f64,
    risk_family: CiRiskFamily,
    p0: f64,
    rate: f64,
    out: *mut *mut CiMarket,
) -> CiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let risk = RiskFunction::new(family(risk_family), p0, rate).map_err(lift)?;
        let params = MarketParams::new(n, w0, r, risk).map_err(lift)?;
        *out = Box::into_raw(Box::new(CiMarket { params }));
        Ok(())
    })
}

/// Switches the market to exponential utility with the given aversion, or to
/// linear utility when `aversion` is 0.
///
/// # Safety
/// `market` must be null or a live handle from `ci_market_new`.
#[no_mangle]
pub unsafe extern "C" fn ci_market_set_aversion(market: *mut CiMarket, aversion: f64) -> CiStatus {
    guard(|| {
        let m = market.as_mut().ok_or_else(|| null("market"))?;
        let util = if aversion == 0.0 {
            UtilityFunction::linear()
        } else {
            UtilityFunction::exponential(aversion).map_err(lift)?
        };
        m.params = m.params.with_utility(util);
        Ok(())
    })
}

/// # Safety
/// `market` must be null or a handle from `ci_market_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ci_market_free(market: *mut CiMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

unsafe fn solve_into(
    market: *const CiMarket,
    out: *mut CiInvestment,
    solve: impl FnOnce(&MarketParams) -> cyberinsure::Result<InvestmentSolution>,
) -> CiStatus {
    guard(|| {
        let m = market.as_ref().ok_or_else(|| null("market"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = investment(&solve(&m.params).map_err(lift)?);
        Ok(())
    })
}

/// Socially optimal investment when users do not interact.
///
/// # Safety
/// `market` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_solve_case1(market: *const CiMarket, out: *mut CiInvestment) -> CiStatus {
    solve_into(market, out, solve_case1)
}

/// Cooperative (social planner) investment.
///
/// # Safety
/// `market` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_solve_case2(market: *const CiMarket, out: *mut CiInvestment) -> CiStatus {
    solve_into(market, out, solve_case2)
}

/// Selected symmetric Nash equilibrium; the number of equilibria found is
/// written to `count` when it is not null.
///
/// # Safety
/// `market` must be a live handle; `out` must be valid for a write; `count`
/// must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_solve_case3(
    market: *const CiMarket,
    out: *mut CiInvestment,
    count: *mut usize,
) -> CiStatus {
    guard(|| {
        let m = market.as_ref().ok_or_else(|| null("market"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let set = solve_case3(&m.params).map_err(lift)?;
        *out = investment(set.canonical());
        if !count.is_null() {
            *count = set.count;
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_welfare_contract(w: f64, r: f64, k: f64, out: *mut CiContract) -> CiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = contract(&welfare_contract(w, r, k).map_err(lift)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_profit_contract(w: f64, r: f64, k: f64, out: *mut CiContract) -> CiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = contract(&profit_contract(w, r, k).map_err(lift)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_welfare_gap(r: f64, k: f64, out: *mut f64) -> CiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = welfare_gap(r, k).map_err(lift)?;
        Ok(())
    })
}

/// Insurer-optimal contract under one information scenario. `aversion` 0
/// selects linear utility.
///
/// # Safety
/// `classes` must point to a valid `CiClasses`; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ci_solve_asym(
    scenario: CiScenario,
    classes: *const CiClasses,
    aversion: f64,
    w0: f64,
    r: f64,
    out: *mut CiAsymSummary,
) -> CiStatus {
    guard(|| {
        let cl = classes.as_ref().ok_or_else(|| null("classes"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let f = family(cl.family);
        let pair = RiskClassPair::new(
            RiskFunction::new(f, cl.low_p0, cl.low_rate).map_err(lift)?,
            RiskFunction::new(f, cl.high_p0, cl.high_rate).map_err(lift)?,
            cl.theta,
        )
        .map_err(lift)?;
        let util = if aversion == 0.0 {
            UtilityFunction::linear()
        } else {
            UtilityFunction::exponential(aversion).map_err(lift)?
        };
        let sol = match scenario {
            CiScenario::NoInfo => solve_no_info(&pair, &util, w0, r),
            CiScenario::PostContractInfo => solve_post_contract_info(&pair, &util, w0, r),
            CiScenario::PreContractInfo => solve_pre_contract_info(&pair, &util, w0, r),
        }
        .map_err(lift)?;
        *out = CiAsymSummary {
            traded: sol.outcome == MarketOutcome::Traded,
            separating: sol.equilibrium_kind == EquilibriumKind::Separating,
            insurer_profit: sol.insurer_profit,
            value_of_information: sol.value_of_information,
            max_coverage: sol.max_coverage(),
        };
        Ok(())
    })
}
