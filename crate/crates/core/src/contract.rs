//! Contract pricing without information asymmetry: users with risk
//! probability uniform on `[0, 1]` buy when the contract beats their
//! uninsured valuation, and a single insurer picks `(z, c)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::Contract;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractObjective {
    WelfareMax,
    ProfitMax,
}

impl ContractObjective {
    pub fn label(&self) -> &'static str {
        match self {
            ContractObjective::WelfareMax => "welfare",
            ContractObjective::ProfitMax => "profit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractEvaluation {
    pub total_welfare: f64,
    pub insurer_profit: f64,
    pub p_low: f64,
    pub p_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSolution {
    pub contract: Contract,
    pub p_low: f64,
    pub p_high: f64,
    pub total_welfare: f64,
    pub insurer_profit: f64,
    pub objective: ContractObjective,
}

/// Grid resolution of [`numeric_contract_argmax`] as a fraction of `R`.
pub const CONTRACT_GRID: f64 = 1.0 / 2000.0;

fn check_k(k: f64) -> Result<()> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(domain(format!("risk-aversion degree K must be >= 1, got {k}")));
    }
    Ok(())
}

fn check_market(w: f64, r: f64, k: f64) -> Result<()> {
    check_k(k)?;
    if !(r > 0.0 && r < w && w.is_finite()) {
        return Err(domain(format!("risk size must satisfy 0 < R < w, got R={r}, w={w}")));
    }
    Ok(())
}

/// `(min(z / (K c), 1), min(z / c, 1))`: users buy when their risk
/// probability lies between the two bounds.
pub fn participation_bounds(z: f64, c: f64, k: f64) -> Result<(f64, f64)> {
    check_k(k)?;
    if !(c > 0.0) {
        return Err(domain(format!("coverage must be positive, got {c}")));
    }
    if !(z >= 0.0) {
        return Err(domain(format!("premium must be non-negative, got {z}")));
    }
    Ok(bounds(z, c, k))
}

fn bounds(z: f64, c: f64, k: f64) -> (f64, f64) {
    if c > 0.0 {
        ((z / (k * c)).min(1.0), (z / c).min(1.0))
    } else if z > 0.0 {
        // paying for nothing: nobody buys
        (1.0, 1.0)
    } else {
        (0.0, 0.0)
    }
}

fn evaluate(w: f64, r: f64, k: f64, z: f64, c: f64) -> ContractEvaluation {
    let (pl, ph) = bounds(z, c, k);
    let sq = ph * ph - pl * pl;
    let a = (ph - pl) * (w - z) - k * (r - c) * sq / 2.0;
    let b = pl * w - k * r * pl * pl / 2.0;
    let cc = w * (1.0 - ph) - k * r * (1.0 - ph * ph) / 2.0;
    ContractEvaluation {
        total_welfare: a + b + cc,
        insurer_profit: z * (ph - pl) - c * sq / 2.0,
        p_low: pl,
        p_high: ph,
    }
}

/// Total welfare and insurer profit of contract `(z, c)`.
pub fn evaluate_contract(w: f64, r: f64, k: f64, z: f64, c: f64) -> Result<ContractEvaluation> {
    check_market(w, r, k)?;
    Contract::new(z, c)?.check_within(r)?;
    Ok(evaluate(w, r, k, z, c))
}

/// Welfare with nobody insured, `w - K R / 2`.
pub fn uninsured_welfare(w: f64, r: f64, k: f64) -> f64 {
    w - k * r / 2.0
}

fn agree(name: &str, closed: f64, numeric: f64) -> Result<()> {
    if (closed - numeric).abs() > 1e-12 * closed.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "{name}: closed form {closed} disagrees with integral {numeric}"
        )));
    }
    Ok(())
}

pub fn welfare_contract(w: f64, r: f64, k: f64) -> Result<ContractSolution> {
    check_market(w, r, k)?;
    let tw = w - r * (2.0 * k - 1.0) / (2.0 * k);
    let profit = r * (k - 1.0).powi(2) / (2.0 * k * k);
    let ev = evaluate(w, r, k, r, r);
    agree("welfare", tw, ev.total_welfare)?;
    agree("profit", profit, ev.insurer_profit)?;
    Ok(ContractSolution {
        contract: Contract::new(r, r)?,
        p_low: 1.0 / k,
        p_high: 1.0,
        total_welfare: tw,
        insurer_profit: profit,
        objective: ContractObjective::WelfareMax,
    })
}

pub fn profit_contract(w: f64, r: f64, k: f64) -> Result<ContractSolution> {
    check_market(w, r, k)?;
    let z = r * k * k / (2.0 * k - 1.0);
    let profit = r * (k - 1.0).powi(2) / (2.0 * (2.0 * k - 1.0));
    let ev = evaluate(w, r, k, z, r);
    agree("profit", profit, ev.insurer_profit)?;
    Ok(ContractSolution {
        contract: Contract::new(z, r)?,
        p_low: k / (2.0 * k - 1.0),
        p_high: 1.0,
        total_welfare: ev.total_welfare,
        insurer_profit: profit,
        objective: ContractObjective::ProfitMax,
    })
}

/// `TW(welfare contract) - TW(profit contract)` in closed form.
pub fn welfare_gap(r: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    if !(r > 0.0) {
        return Err(domain(format!("risk size must be positive, got {r}")));
    }
    let m = 2.0 * k - 1.0;
    Ok(r / 2.0 * (k * k * (3.0 * k - 2.0) / (m * m) - m / k))
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    steps: usize,
}

impl Axis {
    fn at(&self, i: usize) -> f64 {
        if i == self.steps {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / self.steps as f64
        }
    }

    fn around(&self, x: f64, bound: (f64, f64)) -> Axis {
        let step = (self.hi - self.lo) / self.steps as f64;
        Axis {
            lo: (x - step).max(bound.0),
            hi: (x + step).min(bound.1),
            steps: 20,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    z: f64,
    c: f64,
    value: f64,
    ev: ContractEvaluation,
}

/// Preference among near-equal objective values: more coverage, then a
/// higher upper participation bound, then a lower premium.
fn tie_better(a: &Candidate, b: &Candidate) -> bool {
    (a.c, a.ev.p_high, -a.z) > (b.c, b.ev.p_high, -b.z)
}

fn scan(za: Axis, ca: Axis, eval: &(impl Fn(f64, f64) -> Option<Candidate> + Sync)) -> Option<Candidate> {
    let row = |i: usize| -> Vec<Candidate> {
        let z = za.at(i);
        (0..=ca.steps).filter_map(|j| eval(z, ca.at(j))).collect()
    };
    let top = (0..=za.steps)
        .into_par_iter()
        .map(|i| row(i).iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let tol = 1e-12 * top.abs().max(1.0);
    let per_row: Vec<Option<Candidate>> = (0..=za.steps)
        .into_par_iter()
        .map(|i| {
            row(i)
                .into_iter()
                .filter(|c| c.value >= top - tol)
                .fold(None, |best, c| match best {
                    Some(b) if !tie_better(&c, &b) => Some(b),
                    _ => Some(c),
                })
        })
        .collect();
    per_row.into_iter().flatten().fold(None, |best, c| match best {
        Some(b) if !tie_better(&c, &b) => Some(b),
        _ => Some(c),
    })
}

/// Brute-force contract search over `(z, c)` at spacing `R/2000` with two
/// levels of local refinement.
///
/// Welfare maximization caps the premium at `R` and requires non-negative
/// profit. Profit maximization searches `z` up to `max(1.5, K) R` and
/// requires total welfare of at least the uninsured level.
pub fn numeric_contract_argmax(w: f64, r: f64, k: f64, objective: ContractObjective) -> Result<ContractSolution> {
    check_market(w, r, k)?;
    let z_max = match objective {
        ContractObjective::WelfareMax => r,
        ContractObjective::ProfitMax => 1.5f64.max(k) * r,
    };
    let floor = uninsured_welfare(w, r, k);
    let eval = |z: f64, c: f64| -> Option<Candidate> {
        let ev = evaluate(w, r, k, z, c);
        let (feasible, value) = match objective {
            ContractObjective::WelfareMax => (ev.insurer_profit >= -1e-12, ev.total_welfare),
            ContractObjective::ProfitMax => (ev.total_welfare >= floor - 1e-12, ev.insurer_profit),
        };
        feasible.then_some(Candidate { z, c, value, ev })
    };
    let step = r * CONTRACT_GRID;
    let mut za = Axis {
        lo: 0.0,
        hi: z_max,
        steps: (z_max / step).round() as usize,
    };
    let mut ca = Axis {
        lo: 0.0,
        hi: r,
        steps: (r / step).round() as usize,
    };
    let mut best = scan(za, ca, &eval).ok_or_else(|| Error::Numerical("no feasible contract on the grid".into()))?;
    for _ in 0..2 {
        za = za.around(best.z, (0.0, z_max));
        ca = ca.around(best.c, (0.0, r));
        if let Some(local) = scan(za, ca, &eval) {
            let tol = 1e-12 * best.value.abs().max(1.0);
            if local.value > best.value + tol || (local.value >= best.value - tol && tie_better(&local, &best)) {
                best = local;
            }
        }
    }
    Ok(ContractSolution {
        contract: Contract::new(best.z, best.c)?,
        p_low: best.ev.p_low,
        p_high: best.ev.p_high,
        total_welfare: best.ev.total_welfare,
        insurer_profit: best.ev.insurer_profit,
        objective,
    })
}
