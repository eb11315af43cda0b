//! Command dispatch, sweeps and report files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{parse_config, Command, ConfigError, ExperimentConfig, Settings, Sweep, SweepAxis};
use super::report::{Cell, Table};
use crate::asym::{solve_no_info, solve_post_contract_info, solve_pre_contract_info, AsymSolution};
use crate::contract::{
    numeric_contract_argmax, profit_contract, uninsured_welfare, welfare_contract, welfare_gap, ContractObjective,
    ContractSolution, CONTRACT_GRID,
};
use crate::invest::{
    compare_cases, solve_case1, solve_case2, solve_case3, solve_partial_a, solve_partial_b, InvestmentSolution,
};
use crate::model::Contract;
use crate::oracle::{monte_carlo_wealth, MIN_TRIALS};

/// Gain above which a reported equilibrium counts as profitably deviable.
const DEVIATION_TOL: f64 = 1e-8;
const MC_STD_ERRORS: f64 = 4.0;
/// Slack on the coverage trend along an aversion sweep.
const TREND_TOL: f64 = 1e-9;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io { path: PathBuf, source: std::io::Error },
    Solver(crate::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            RunError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        RunError::Solver(e)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

/// Result of one command before it is written to disk.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub command: Command,
    pub table: Table,
    pub records: Value,
    /// Property checks that failed.
    pub violations: Vec<String>,
    /// Plot series for sweeps: axis name and per-point rows.
    pub series: Option<(&'static str, Table)>,
}

impl Experiment {
    pub fn report_json(&self) -> Value {
        let mut v = json!({
            "command": self.command.name(),
            "columns": self.table.columns,
            "rows": self.table.rows_json(),
            "records": self.records,
            "violations": self.violations,
        });
        if let Some((axis, _)) = &self.series {
            v["axis"] = json!(axis);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment: Experiment,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.experiment.violations.is_empty() {
            0
        } else {
            2
        }
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &overrides.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        if trials < MIN_TRIALS {
            return Err(ConfigError::general(format!("--trials must be at least {MIN_TRIALS}")).into());
        }
        cfg.trials = trials;
    }
    Ok(cfg)
}

pub fn run(path: &Path, overrides: &Overrides) -> Result<RunOutcome, RunError> {
    let cfg = load_config(path, overrides)?;
    let experiment = execute(&cfg)?;
    let files = write_reports(&experiment, &cfg.output_dir)?;
    Ok(RunOutcome { experiment, files })
}

pub fn execute(cfg: &ExperimentConfig) -> crate::Result<Experiment> {
    let s = &cfg.settings;
    match cfg.command {
        Command::Invest => invest(s),
        Command::Contract => contract(s),
        Command::Asym => asym(s),
        Command::Validate => validate(s, cfg.trials, cfg.seed),
        Command::Sweep => sweep(s, cfg.sweep.as_ref().expect("sweep settings checked at load")),
    }
}

pub fn write_reports(e: &Experiment, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = Vec::new();
    let csv = dir.join("report.csv");
    fs::write(&csv, e.table.to_csv()).map_err(io(&csv))?;
    files.push(csv);
    let js = dir.join("report.json");
    let mut body = serde_json::to_string_pretty(&e.report_json()).expect("report serializes");
    body.push('\n');
    fs::write(&js, body).map_err(io(&js))?;
    files.push(js);
    if let Some((axis, series)) = &e.series {
        let p = dir.join(format!("series_{axis}.csv"));
        fs::write(&p, series.to_csv()).map_err(io(&p))?;
        files.push(p);
    }
    Ok(files)
}

const INVEST_COLUMNS: [&str; 13] = [
    "case",
    "equilibrium",
    "x_star",
    "p_star",
    "objective",
    "boundary",
    "foc_residual",
    "second_derivative",
    "deviation_gain",
    "lemma1",
    "lemma2",
    "lemma3",
    "lemma3_precondition",
];

fn invest(s: &Settings) -> crate::Result<Experiment> {
    let params = s.market()?;
    let case1 = solve_case1(&params)?;
    let case2 = solve_case2(&params)?;
    let case3 = solve_case3(&params)?;
    let cmp = if s.n >= 2 { Some(compare_cases(&params)?) } else { None };
    let lemmas = [
        Cell::opt_bool(cmp.as_ref().map(|c| c.lemma1_holds)),
        Cell::opt_bool(cmp.as_ref().map(|c| c.lemma2_holds)),
        Cell::opt_bool(cmp.as_ref().and_then(|c| c.lemma3_holds)),
        Cell::opt_bool(cmp.as_ref().map(|c| c.lemma3_precondition)),
    ];
    let none = [Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty];
    let mut table = Table::new(INVEST_COLUMNS.to_vec());
    let mut violations = Vec::new();
    let mut add = |case: &str, idx: usize, sol: &InvestmentSolution, tail: &[Cell]| {
        let mut row = vec![
            Cell::text(case),
            Cell::Int(idx as u64),
            Cell::Num(sol.x_star),
            Cell::Num(sol.p_star),
            Cell::Num(sol.objective_value),
            Cell::tag(&sol.boundary),
            Cell::Num(sol.foc_residual),
            Cell::Num(sol.second_derivative),
            Cell::opt_num(sol.deviation_gain),
        ];
        row.extend_from_slice(tail);
        table.push(row);
        if let Some(g) = sol.deviation_gain {
            if g > DEVIATION_TOL {
                violations.push(format!("{case} equilibrium {idx} admits a deviation gain of {g}"));
            }
        }
    };
    add("case1", 0, &case1, &lemmas);
    add("case2", 0, &case2, &lemmas);
    for (i, eq) in case3.equilibria.iter().enumerate() {
        add("case3", i, eq, &lemmas);
    }
    let mut records = json!({
        "case1": case1,
        "case2": case2,
        "case3": case3,
        "comparison": cmp,
    });
    if let Some(d) = s.d {
        let cost = s.cost()?;
        let a = solve_partial_a(&params, &cost, d)?;
        let b = solve_partial_b(&params, &cost, d)?;
        add("partial_a", 0, &a, &none);
        for (i, eq) in b.equilibria.iter().enumerate() {
            add("partial_b", i, eq, &none);
        }
        records["partial_a"] = json!(a);
        records["partial_b"] = json!(b);
    }
    if let Some(c) = &cmp {
        for (name, ok) in [
            ("lemma1", Some(c.lemma1_holds)),
            ("lemma2", Some(c.lemma2_holds)),
            ("lemma3", c.lemma3_holds),
        ] {
            if ok == Some(false) {
                violations.push(format!("{name} ordering violated"));
            }
        }
    }
    Ok(Experiment {
        command: Command::Invest,
        table,
        records,
        violations,
        series: None,
    })
}

/// Whether a grid solution matches the closed form within one grid step and 1e-3 in value.
fn grid_agrees(closed: &ContractSolution, grid: &ContractSolution, r: f64) -> bool {
    let step = r * CONTRACT_GRID * (1.0 + 1e-9);
    let value = |c: &ContractSolution| match c.objective {
        ContractObjective::WelfareMax => c.total_welfare,
        ContractObjective::ProfitMax => c.insurer_profit,
    };
    (closed.contract.premium - grid.contract.premium).abs() <= step
        && (closed.contract.coverage - grid.contract.coverage).abs() <= step
        && (value(closed) - value(grid)).abs() <= 1e-3
}

fn contract(s: &Settings) -> crate::Result<Experiment> {
    let (w, r, k) = (s.w0, s.r, s.k);
    let mut table = Table::new(vec!["objective", "method", "z", "c", "p_low", "p_high", "TW", "profit"]);
    let mut violations = Vec::new();
    let mut records = json!({
        "uninsured_welfare": uninsured_welfare(w, r, k),
        "welfare_gap": welfare_gap(r, k)?,
    });
    for objective in [ContractObjective::WelfareMax, ContractObjective::ProfitMax] {
        let closed = match objective {
            ContractObjective::WelfareMax => welfare_contract(w, r, k)?,
            ContractObjective::ProfitMax => profit_contract(w, r, k)?,
        };
        let grid = numeric_contract_argmax(w, r, k, objective)?;
        for (method, sol) in [("closed_form", &closed), ("grid", &grid)] {
            table.push(vec![
                Cell::text(objective.label()),
                Cell::text(method),
                Cell::Num(sol.contract.premium),
                Cell::Num(sol.contract.coverage),
                Cell::Num(sol.p_low),
                Cell::Num(sol.p_high),
                Cell::Num(sol.total_welfare),
                Cell::Num(sol.insurer_profit),
            ]);
        }
        if !grid_agrees(&closed, &grid, r) {
            violations.push(format!("{} contract disagrees with the grid search", objective.label()));
        }
        records[objective.label()] = json!({ "closed_form": closed, "grid": grid });
    }
    Ok(Experiment {
        command: Command::Contract,
        table,
        records,
        violations,
        series: None,
    })
}

fn asym_solutions(s: &Settings) -> crate::Result<[AsymSolution; 3]> {
    let pair = s.classes()?;
    let util = s.utility()?;
    Ok([
        solve_no_info(&pair, &util, s.w0, s.r)?,
        solve_post_contract_info(&pair, &util, s.w0, s.r)?,
        solve_pre_contract_info(&pair, &util, s.w0, s.r)?,
    ])
}

fn asym(s: &Settings) -> crate::Result<Experiment> {
    let sols = asym_solutions(s)?;
    let mut table = Table::new(vec![
        "scenario",
        "outcome",
        "equilibrium",
        "coverage_kind",
        "class",
        "z",
        "c",
        "x",
        "insurer_profit",
        "value_of_information",
        "uncovered",
        "fair_z",
        "fair_c",
    ]);
    let mut violations = Vec::new();
    for sol in &sols {
        let labels: std::collections::BTreeSet<_> = sol.contracts.keys().chain(sol.investments.keys()).collect();
        for label in labels {
            let contract = sol.contracts.get(label);
            table.push(vec![
                Cell::tag(&sol.scenario),
                Cell::tag(&sol.outcome),
                Cell::tag(&sol.equilibrium_kind),
                Cell::tag(&sol.coverage_kind),
                Cell::tag(label),
                Cell::opt_num(contract.map(|c| c.premium)),
                Cell::opt_num(contract.map(|c| c.coverage)),
                Cell::opt_num(sol.investments.get(label).copied()),
                Cell::Num(sol.insurer_profit),
                Cell::Num(sol.value_of_information),
                Cell::opt_num(contract.map(|c| s.r - c.coverage)),
                Cell::opt_num(sol.fair_contract.map(|c| c.premium)),
                Cell::opt_num(sol.fair_contract.map(|c| c.coverage)),
            ]);
        }
        if sol.value_of_information < -1e-9 {
            violations.push(format!("negative value of information in {:?}", sol.scenario));
        }
    }
    Ok(Experiment {
        command: Command::Asym,
        table,
        records: json!(sols),
        violations,
        series: None,
    })
}

fn validate(s: &Settings, trials: u64, seed: u64) -> crate::Result<Experiment> {
    let params = s.market()?;
    let x1 = solve_case1(&params)?.x_star;
    let x3 = solve_case3(&params)?.canonical().x_star;
    let mut table = Table::new(vec![
        "fixture",
        "x",
        "coverage",
        "user",
        "mean",
        "std_error",
        "analytic",
        "z_score",
        "trials",
        "seed",
        "within_4se",
    ]);
    let mut reports = Vec::new();
    let mut violations = Vec::new();
    let mut fixture = 0u64;
    for x in [x1, x3] {
        for c in [0.0, 0.5 * s.r, s.r] {
            let x_vec = vec![x; s.n];
            let contract = Contract::new(0.0, c)?;
            let rep = monte_carlo_wealth(&params, &x_vec, &contract, 0, trials, seed)?;
            let ok = rep.within(MC_STD_ERRORS);
            table.push(vec![
                Cell::Int(fixture),
                Cell::Num(x),
                Cell::Num(c),
                Cell::Int(0),
                Cell::Num(rep.mean),
                Cell::Num(rep.std_error),
                Cell::Num(rep.analytic),
                Cell::Num(rep.z_score),
                Cell::Int(rep.trials),
                Cell::Int(rep.seed),
                Cell::Bool(ok),
            ]);
            if !ok {
                violations.push(format!(
                    "fixture {fixture}: simulated mean is {} standard errors away",
                    rep.z_score
                ));
            }
            reports.push(json!({ "fixture": fixture, "x": x, "coverage": c, "report": rep }));
            fixture += 1;
        }
    }
    Ok(Experiment {
        command: Command::Validate,
        table,
        records: Value::Array(reports),
        violations,
        series: None,
    })
}

struct Point {
    row: Vec<Cell>,
    record: Value,
    violations: Vec<String>,
}

fn sweep_columns(axis: SweepAxis, target: Command) -> Vec<&'static str> {
    let mut cols = vec![axis.name()];
    cols.extend_from_slice(match target {
        Command::Contract => &[
            "welfare_gap",
            "TW_welfare",
            "TW_profit",
            "profit_welfare",
            "profit_profit",
            "z_welfare",
            "z_profit",
            "p_low_welfare",
            "p_low_profit",
            "gap_matches",
            "profit_order",
        ][..],
        Command::Invest => &[
            "x_case1",
            "x_case2",
            "x_case3",
            "equilibria",
            "threshold",
            "lemma1",
            "lemma2",
            "lemma3",
            "lemma3_precondition",
        ][..],
        _ => &[
            "c_no_info",
            "c_post",
            "c_pre_low",
            "c_pre_high",
            "uncovered_no_info",
            "uncovered_post",
            "uncovered_pre",
            "profit_no_info",
            "profit_post",
            "profit_pre",
            "vi_post",
            "vi_pre",
            "vi_nonnegative",
            "uncovered_nonincreasing",
        ][..],
    });
    cols
}

fn contract_point(s: &Settings) -> crate::Result<Point> {
    let (w, r, k) = (s.w0, s.r, s.k);
    let wel = welfare_contract(w, r, k)?;
    let pro = profit_contract(w, r, k)?;
    let gap = welfare_gap(r, k)?;
    let matches = (gap - (wel.total_welfare - pro.total_welfare)).abs() <= 1e-10;
    let order = if k > 1.0 {
        pro.insurer_profit > wel.insurer_profit
    } else {
        pro.insurer_profit >= wel.insurer_profit
    };
    let mut violations = Vec::new();
    if !matches {
        violations.push(format!("K={k}: welfare gap does not match the welfare difference"));
    }
    if !order {
        violations.push(format!("K={k}: monopolist profit not above the welfare maximizer's"));
    }
    Ok(Point {
        row: vec![
            Cell::Num(gap),
            Cell::Num(wel.total_welfare),
            Cell::Num(pro.total_welfare),
            Cell::Num(wel.insurer_profit),
            Cell::Num(pro.insurer_profit),
            Cell::Num(wel.contract.premium),
            Cell::Num(pro.contract.premium),
            Cell::Num(wel.p_low),
            Cell::Num(pro.p_low),
            Cell::Bool(matches),
            Cell::Bool(order),
        ],
        record: json!({ "welfare": wel, "profit": pro, "welfare_gap": gap }),
        violations,
    })
}

fn invest_point(s: &Settings) -> crate::Result<Point> {
    let params = s.market()?;
    if s.n < 2 {
        let c1 = solve_case1(&params)?;
        let c3 = solve_case3(&params)?;
        return Ok(Point {
            row: vec![
                Cell::Num(c1.x_star),
                Cell::Num(solve_case2(&params)?.x_star),
                Cell::Num(c3.canonical().x_star),
                Cell::Int(c3.count as u64),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ],
            record: json!({ "case1": c1, "case3": c3 }),
            violations: Vec::new(),
        });
    }
    let c = compare_cases(&params)?;
    let mut violations = Vec::new();
    for (name, ok) in [
        ("lemma1", Some(c.lemma1_holds)),
        ("lemma2", Some(c.lemma2_holds)),
        ("lemma3", c.lemma3_holds),
    ] {
        if ok == Some(false) {
            violations.push(format!("n={} p0={}: {name} ordering violated", s.n, s.p0));
        }
    }
    Ok(Point {
        row: vec![
            Cell::Num(c.x_case1),
            Cell::Num(c.x_case2),
            Cell::Num(c.x_case3),
            Cell::Int(c.x_case3_all.len() as u64),
            Cell::Num(c.threshold),
            Cell::Bool(c.lemma1_holds),
            Cell::Bool(c.lemma2_holds),
            Cell::opt_bool(c.lemma3_holds),
            Cell::Bool(c.lemma3_precondition),
        ],
        record: json!(c),
        violations,
    })
}

fn asym_point(s: &Settings) -> crate::Result<Point> {
    let [no_info, post, pre] = asym_solutions(s)?;
    let cov = |sol: &AsymSolution, label| sol.contracts.get(&label).map(|c| c.coverage);
    use crate::asym::ClassLabel::{High, Low, Pooled};
    let vi_ok = post.value_of_information >= -1e-9 && pre.value_of_information >= -1e-9;
    let mut violations = Vec::new();
    if !vi_ok {
        violations.push("negative value of information".to_string());
    }
    Ok(Point {
        row: vec![
            Cell::opt_num(cov(&no_info, Pooled)),
            Cell::opt_num(cov(&post, Pooled)),
            Cell::opt_num(cov(&pre, Low)),
            Cell::opt_num(cov(&pre, High)),
            Cell::Num(s.r - no_info.max_coverage()),
            Cell::Num(s.r - post.max_coverage()),
            Cell::Num(s.r - pre.max_coverage()),
            Cell::Num(no_info.insurer_profit),
            Cell::Num(post.insurer_profit),
            Cell::Num(pre.insurer_profit),
            Cell::Num(post.value_of_information),
            Cell::Num(pre.value_of_information),
            Cell::Bool(vi_ok),
            Cell::Empty,
        ],
        record: json!([no_info, post, pre]),
        violations,
    })
}

/// Marks each aversion-sweep row by whether every uncovered amount stayed at or
/// below its value on the previous row.
fn mark_coverage_trend(table: &mut Table, violations: &mut Vec<String>) {
    let cols: Vec<usize> = ["uncovered_no_info", "uncovered_post", "uncovered_pre"]
        .iter()
        .filter_map(|c| table.column(c))
        .collect();
    let flag = table.column("uncovered_nonincreasing").expect("trend column");
    for i in 0..table.rows.len() {
        let ok = i == 0
            || cols
                .iter()
                .all(|&c| match (table.rows[i][c].as_num(), table.rows[i - 1][c].as_num()) {
                    (Some(now), Some(before)) => now <= before + TREND_TOL,
                    _ => true,
                });
        if !ok {
            violations.push(format!("uncovered amount rose at aversion {:?}", table.rows[i][0]));
        }
        table.rows[i][flag] = Cell::Bool(ok);
    }
}

fn sweep(base: &Settings, sw: &Sweep) -> crate::Result<Experiment> {
    let values = sw.values();
    let points: Vec<Point> = values
        .par_iter()
        .map(|&v| {
            let s = base.with_axis(sw.axis, v);
            match sw.target {
                Command::Contract => contract_point(&s),
                Command::Invest => invest_point(&s),
                _ => asym_point(&s),
            }
        })
        .collect::<crate::Result<_>>()?;
    let mut table = Table::new(sweep_columns(sw.axis, sw.target));
    let mut violations = Vec::new();
    let mut records = Vec::new();
    for (v, p) in values.iter().zip(points) {
        let axis_value = if sw.axis == SweepAxis::N { v.round() } else { *v };
        let mut row = vec![Cell::Num(axis_value)];
        row.extend(p.row);
        table.push(row);
        violations.extend(p.violations);
        records.push(json!({ "value": axis_value, "result": p.record }));
    }
    if sw.target == Command::Asym && sw.axis == SweepAxis::Aversion && sw.stop >= sw.start {
        mark_coverage_trend(&mut table, &mut violations);
    }
    let series = table.clone();
    table.push_bool_summary();
    Ok(Experiment {
        command: Command::Sweep,
        table,
        records: json!({
            "target": sw.target.name(),
            "axis": sw.axis.name(),
            "points": records,
        }),
        violations,
        series: Some((sw.axis.name(), series)),
    })
}
