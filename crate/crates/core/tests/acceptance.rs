mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use cyberinsure::*;

const KS: [f64; 4] = [1.0, 1.5, 2.0, 5.0];
const DRAWS: usize = 500;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, ok: impl Into<String>) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: ok.into(),
        }
    } else {
        let shown: Vec<_> = failures.iter().take(4).cloned().collect();
        let more = failures.len().saturating_sub(shown.len());
        let mut detail = shown.join("; ");
        if more > 0 {
            detail.push_str(&format!("; {more} more"));
        }
        Outcome { pass: false, detail }
    }
}

fn within_budget(failures: &mut Vec<String>, start: Instant, budget: Duration) -> Duration {
    let took = start.elapsed();
    if took >= budget {
        failures.push(format!("took {took:.2?}, budget {budget:?}"));
    }
    took
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn grid_agreement(failures: &mut Vec<String>, k: f64, closed: &ContractSolution, obj: ContractObjective) {
    let step = R * CONTRACT_GRID;
    let grid = numeric_contract_argmax(W0, R, k, obj).unwrap();
    if !close(grid.contract.premium, closed.contract.premium, step + 1e-12)
        || !close(grid.contract.coverage, closed.contract.coverage, step + 1e-12)
    {
        failures.push(format!(
            "K={k} {obj:?}: grid {:?} vs {:?}",
            grid.contract, closed.contract
        ));
    }
    let (a, b) = match obj {
        ContractObjective::WelfareMax => (grid.total_welfare, closed.total_welfare),
        ContractObjective::ProfitMax => (grid.insurer_profit, closed.insurer_profit),
    };
    if !close(a, b, 1e-3) {
        failures.push(format!("K={k} {obj:?}: grid value {a} vs {b}"));
    }
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    for k in KS {
        let w = welfare_contract(W0, R, k).unwrap();
        let tw = 100.0 - 10.0 * (2.0 * k - 1.0) / (2.0 * k);
        let profit = 10.0 * (k - 1.0).powi(2) / (2.0 * k * k);
        if (w.contract.premium, w.contract.coverage) != (R, R) {
            f.push(format!("K={k}: contract {:?}", w.contract));
        }
        if !close(w.p_low, 1.0 / k, 1e-12)
            || !close(w.total_welfare, tw, 1e-10)
            || !close(w.insurer_profit, profit, 1e-10)
        {
            f.push(format!("K={k}: {w:?}"));
        }
        grid_agreement(&mut f, k, &w, ContractObjective::WelfareMax);
    }
    let took = within_budget(&mut f, start, Duration::from_secs(5));
    outcome(f, format!("4 K values, closed form and grid agree, {took:.2?}"))
}

fn criterion2() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    for k in KS {
        let p = profit_contract(W0, R, k).unwrap();
        let z = 10.0 * k * k / (2.0 * k - 1.0);
        let profit = 10.0 * (k - 1.0).powi(2) / (2.0 * (2.0 * k - 1.0));
        if !close(p.contract.premium, z, 1e-10) || p.contract.coverage != R {
            f.push(format!("K={k}: contract {:?}", p.contract));
        }
        if !close(p.p_low, k / (2.0 * k - 1.0), 1e-12) || !close(p.insurer_profit, profit, 1e-10) {
            f.push(format!("K={k}: {p:?}"));
        }
        if k == 1.0 && p.insurer_profit != 0.0 {
            f.push(format!("K=1 profit {} not exactly 0", p.insurer_profit));
        }
        grid_agreement(&mut f, k, &p, ContractObjective::ProfitMax);
    }
    let took = within_budget(&mut f, start, Duration::from_secs(5));
    outcome(f, format!("4 K values, closed form and grid agree, {took:.2?}"))
}

fn criterion3() -> Outcome {
    let mut f = Vec::new();
    if welfare_gap(R, 1.0).unwrap() != 0.0 {
        f.push("gap at K=1 is not 0".into());
    }
    let ks: Vec<f64> = (1..=900).map(|i| 1.0 + i as f64 / 100.0).collect();
    for &k in &ks {
        let w = welfare_contract(W0, R, k).unwrap();
        let p = profit_contract(W0, R, k).unwrap();
        let gap = welfare_gap(R, k).unwrap();
        if !(gap > 0.0) || !close(gap, w.total_welfare - p.total_welfare, 1e-10) {
            f.push(format!(
                "K={k}: gap {gap}, TW difference {}",
                w.total_welfare - p.total_welfare
            ));
        }
        if !(p.insurer_profit > w.insurer_profit) {
            f.push(format!("K={k}: profits {} vs {}", p.insurer_profit, w.insurer_profit));
        }
    }
    outcome(f, format!("K=1 gap 0, {} K values in (1, 10]", ks.len()))
}

fn draws() -> Vec<MarketParams> {
    let mut s = Sampler::new(2024);
    (0..DRAWS).map(|_| market_draw(&mut s)).collect()
}

struct Solved {
    m: MarketParams,
    s1: InvestmentSolution,
    s2: InvestmentSolution,
    s3: EquilibriumSet,
}

fn solve_all(markets: &[MarketParams]) -> Vec<Solved> {
    markets
        .iter()
        .map(|m| Solved {
            m: *m,
            s1: solve_case1(m).unwrap(),
            s2: solve_case2(m).unwrap(),
            s3: solve_case3(m).unwrap(),
        })
        .collect()
}

fn criterion4(solved: &[Solved], elapsed: Duration) -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let mut lemma3_draws = 0;
    let (mut exp, mut pow) = (0, 0);
    for (i, d) in solved.iter().enumerate() {
        match d.m.risk.family {
            RiskFamily::Exponential => exp += 1,
            RiskFamily::Power => pow += 1,
        }
        for eq in &d.s3.equilibria {
            if eq.x_star > d.s1.x_star + 1e-8 || eq.x_star > d.s2.x_star + 1e-8 {
                f.push(format!(
                    "draw {i}: x3={} x1={} x2={}",
                    eq.x_star, d.s1.x_star, d.s2.x_star
                ));
            }
        }
        if d.m.risk.p0 < lemma3_threshold_of(d.m.n) {
            lemma3_draws += 1;
            if d.s2.x_star < d.s1.x_star - 1e-8 {
                f.push(format!("draw {i}: x2={} < x1={}", d.s2.x_star, d.s1.x_star));
            }
        }
    }
    if exp == 0 || pow == 0 || lemma3_draws == 0 {
        f.push(format!(
            "draws not covering both families and the threshold: {exp}/{pow}/{lemma3_draws}"
        ));
    }
    let took = elapsed + start.elapsed();
    if took >= Duration::from_secs(60) {
        f.push(format!("took {took:.2?}, budget 60s"));
    }
    outcome(
        f,
        format!("{DRAWS} draws ({exp} exponential, {pow} power), {lemma3_draws} below the threshold, {took:.2?}"),
    )
}

fn audit(f: &mut Vec<String>, label: &str, s: &InvestmentSolution) -> bool {
    if s.boundary != Boundary::Interior {
        return false;
    }
    if !(s.foc_residual.abs() < 1e-8) || !(s.second_derivative < 0.0) {
        f.push(format!(
            "{label}: residual {} second derivative {}",
            s.foc_residual, s.second_derivative
        ));
    }
    true
}

fn criterion5(solved: &[Solved]) -> Outcome {
    let mut f = Vec::new();
    let mut interior = [0usize; 5];
    for (i, d) in solved.iter().enumerate() {
        interior[0] += audit(&mut f, &format!("draw {i} case1"), &d.s1) as usize;
        interior[1] += audit(&mut f, &format!("draw {i} case2"), &d.s2) as usize;
        for eq in &d.s3.equilibria {
            interior[2] += audit(&mut f, &format!("draw {i} case3"), eq) as usize;
        }
    }
    let mut s = Sampler::new(77);
    for i in 0..150 {
        let m = MarketParams::new(
            s.int(1, 6),
            W0,
            R,
            RiskFunction::exponential(s.range(0.3, 0.95), 1.0).unwrap(),
        )
        .unwrap();
        let cost = InvestmentCostFunction::new(s.range(0.1, 3.0), s.range(2.0, 40.0)).unwrap();
        let d = s.range(0.5, 0.9 * R);
        let a = solve_partial_a(&m, &cost, d);
        if let Ok(a) = a {
            interior[3] += audit(&mut f, &format!("partial A {i}"), &a) as usize;
        }
        for eq in &solve_partial_b(&m, &cost, d).unwrap().equilibria {
            interior[4] += audit(&mut f, &format!("partial B {i}"), eq) as usize;
        }
    }
    if interior.contains(&0) {
        f.push(format!("no interior solutions audited for some case: {interior:?}"));
    }
    outcome(
        f,
        format!("interior solutions audited (cases 1, 2, 3, A, B): {interior:?}"),
    )
}

fn criterion6(solved: &[Solved]) -> Outcome {
    let mut f = Vec::new();
    let mut checked = 0;
    for (i, d) in solved.iter().enumerate() {
        let zero_is_eq = foc_residual(CaseId::Case3, &d.m, 0.0).unwrap() <= 0.0;
        let near_edge = d.s3.equilibria.iter().any(|e| e.x_star < 1e-6);
        if zero_is_eq || near_edge {
            continue;
        }
        checked += 1;
        if d.s3.count % 2 != 1 {
            f.push(format!("draw {i}: {} equilibria", d.s3.count));
        }
    }
    if checked == 0 {
        f.push("no eligible draws".into());
    }
    outcome(f, format!("{checked} eligible draws, all odd"))
}

fn criterion7() -> Outcome {
    let mut f = Vec::new();
    let mut reruns = 0;
    for (k, (p, x, c, u)) in mc_fixtures().iter().enumerate() {
        let seed = 1000 + k as u64;
        let mut rep = monte_carlo_wealth(p, x, c, *u, 1_000_000, seed).unwrap();
        if !rep.within(4.0) {
            reruns += 1;
            rep = monte_carlo_wealth(p, x, c, *u, 1_000_000, seed + 1).unwrap();
        }
        if !rep.within(4.0) {
            f.push(format!("fixture {k}: z={}", rep.z_score));
        }
    }
    let (p, x, c, u) = mc_fixtures().swap_remove(7);
    let once = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&monte_carlo_wealth(&p, &x, &c, u, 1_000_000, 99).unwrap()).unwrap())
    };
    let a = once(1);
    if a != once(1) || a != once(4) {
        f.push("identical seeds gave different reports".into());
    }
    outcome(
        f,
        format!("20 fixtures within 4 standard errors ({reruns} re-runs), reports reproducible"),
    )
}

const AVERSIONS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

struct AsymRun {
    label: String,
    distinct: bool,
    theta: f64,
    sols: [AsymSolution; 3],
}

fn asym_run(label: String, pair: RiskClassPair, util: UtilityFunction) -> AsymRun {
    AsymRun {
        distinct: pair.low != pair.high,
        theta: pair.theta,
        sols: [
            solve_no_info(&pair, &util, W0, R).unwrap(),
            solve_post_contract_info(&pair, &util, W0, R).unwrap(),
            solve_pre_contract_info(&pair, &util, W0, R).unwrap(),
        ],
        label,
    }
}

fn criterion8() -> Outcome {
    let start = Instant::now();
    let exp_u = |a| UtilityFunction::exponential(a).unwrap();
    let sweep: Vec<AsymRun> = AVERSIONS
        .iter()
        .map(|&a| asym_run(format!("desk a={a}"), desk_pair(0.5), exp_u(a)))
        .collect();
    let mut runs: Vec<AsymRun> = asym_configs()
        .into_iter()
        .enumerate()
        .map(|(i, (pair, util))| asym_run(format!("config {i}"), pair, util))
        .collect();
    let same = RiskFunction::exponential(0.4, 0.8).unwrap();
    runs.push(asym_run(
        "identical".into(),
        RiskClassPair::new(same, same, 0.5).unwrap(),
        exp_u(0.3),
    ));
    for theta in [0.0, 1.0] {
        runs.push(asym_run(format!("desk theta={theta}"), desk_pair(theta), exp_u(0.1)));
    }

    let names = ["no_info", "post", "pre"];
    let mut partial = Vec::new();
    let mut trend = Vec::new();
    let mut vi_sign = Vec::new();
    let mut vi_iff = Vec::new();
    let mut profits = Vec::new();
    for r in sweep.iter().chain(&runs) {
        for (name, s) in names.iter().zip(&r.sols) {
            if r.distinct && s.max_coverage() >= R - 1e-6 {
                partial.push(format!("{} {name}: c={}", r.label, s.max_coverage()));
            }
        }
        for (name, s) in names.iter().zip(&r.sols).skip(1) {
            let vi = s.value_of_information;
            if vi < -1e-9 {
                vi_sign.push(format!("{} {name}: VI={vi:e}", r.label));
            }
            let trivial = !r.distinct || r.theta == 0.0 || r.theta == 1.0;
            if trivial != (vi.abs() <= 1e-9) {
                vi_iff.push(format!("{} {name}: VI={vi:e}", r.label));
            }
        }
        if r.sols[2].insurer_profit > r.sols[0].insurer_profit + 1e-9 {
            profits.push(format!(
                "{}: {} > {}",
                r.label, r.sols[2].insurer_profit, r.sols[0].insurer_profit
            ));
        }
    }
    for (j, name) in names.iter().enumerate() {
        let gaps: Vec<f64> = sweep.iter().map(|r| R - r.sols[j].max_coverage()).collect();
        if gaps.windows(2).any(|w| w[1] > w[0] + 1e-9) {
            trend.push(format!("{name}: R - c* = {gaps:?}"));
        }
    }

    let mut f = Vec::new();
    for (clause, bad) in [
        ("c* < R", partial),
        ("R - c* non-increasing", trend),
        ("VI >= 0", vi_sign),
        ("VI = 0 iff trivial classes", vi_iff),
        ("profit(separating) <= profit(no-info)", profits),
    ] {
        let status = if bad.is_empty() { "holds" } else { "violated" };
        println!("    {clause}: {status} ({} cases)", bad.len());
        for b in bad.iter().take(6) {
            println!("      {b}");
        }
        if !bad.is_empty() {
            f.push(format!("{clause} violated in {} cases", bad.len()));
        }
    }
    let took = within_budget(&mut f, start, Duration::from_secs(120));
    outcome(
        f,
        format!(
            "{} configurations, all clauses hold, {took:.2?}",
            sweep.len() + runs.len()
        ),
    )
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn criterion9() -> Outcome {
    let mut f = Vec::new();
    let tmp = tempfile::tempdir().unwrap();
    let configs = ["invest", "contract", "asym", "sweep_k", "sweep_p0", "sweep_aversion"];
    for name in configs {
        let mut outs = Vec::new();
        for (i, threads) in ["1", "1", "4"].iter().enumerate() {
            let dir = tmp.path().join(format!("{name}{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_cyberinsure"))
                .arg(golden_dir().join(format!("{name}.cfg")))
                .arg("--output")
                .arg(&dir)
                .env("SOLVER_THREADS", threads)
                .status()
                .unwrap();
            if !status.success() {
                f.push(format!("{name}: exit {status}"));
                break;
            }
            outs.push(read_outputs(&dir));
        }
        if outs.len() == 3 {
            if outs[0] != outs[1] || outs[0] != outs[2] {
                f.push(format!("{name}: outputs differ across runs or worker counts"));
            }
            if outs[0] != read_outputs(&golden_dir().join(name)) {
                f.push(format!("{name}: outputs differ from golden files"));
            }
        }
    }
    outcome(
        f,
        format!("{} configs byte-identical across runs and workers 1, 4", configs.len()),
    )
}

fn report(n: usize, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {status} {}", o.detail);
}

fn main() {
    let mut results = Vec::new();
    let mut run = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        report(n, &o);
        results.push(o.pass);
    };
    run(1, &mut criterion1);
    run(2, &mut criterion2);
    run(3, &mut criterion3);
    let start = Instant::now();
    let solved = solve_all(&draws());
    let solve_time = start.elapsed();
    run(4, &mut || criterion4(&solved, solve_time));
    run(5, &mut || criterion5(&solved));
    run(6, &mut || criterion6(&solved));
    run(7, &mut criterion7);
    run(8, &mut criterion8);
    run(9, &mut criterion9);
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
