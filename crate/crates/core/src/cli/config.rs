//! Line-oriented `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::model::{InvestmentCostFunction, MarketParams, RiskClassPair, RiskFamily, RiskFunction, UtilityFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: &str, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "config error at line {l}, key '{k}': {}", self.message),
            (None, Some(k)) => write!(f, "config error, key '{k}': {}", self.message),
            _ => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Invest,
    Contract,
    Asym,
    Sweep,
    Validate,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "invest" => Command::Invest,
            "contract" => Command::Contract,
            "asym" => Command::Asym,
            "sweep" => Command::Sweep,
            "validate" => Command::Validate,
            _ => {
                return Err(format!(
                    "unknown command '{s}' (expected invest, contract, asym, sweep or validate)"
                ))
            }
        })
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Invest => "invest",
            Command::Contract => "contract",
            Command::Asym => "asym",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    P0,
    Lambda,
    Gamma,
    N,
    Theta,
    Aversion,
    D,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "K" => SweepAxis::K,
            "p0" => SweepAxis::P0,
            "lambda" => SweepAxis::Lambda,
            "gamma" => SweepAxis::Gamma,
            "n" => SweepAxis::N,
            "theta" => SweepAxis::Theta,
            "aversion" => SweepAxis::Aversion,
            "D" => SweepAxis::D,
            _ => {
                return Err(format!(
                    "unknown sweep axis '{s}' (expected K, p0, lambda, gamma, n, theta, aversion or D)"
                ))
            }
        })
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::P0 => "p0",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Gamma => "gamma",
            SweepAxis::N => "n",
            SweepAxis::Theta => "theta",
            SweepAxis::Aversion => "aversion",
            SweepAxis::D => "D",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub target: Command,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == last {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last as f64
                }
            })
            .collect()
    }
}

/// Every model parameter the commands read, with desk-scale defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub n: usize,
    pub w0: f64,
    pub r: f64,
    pub family: RiskFamily,
    pub p0: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub k: f64,
    pub linear_utility: bool,
    pub aversion: f64,
    pub theta: f64,
    pub lc_p0: f64,
    pub lc_rate: f64,
    pub hc_p0: f64,
    pub hc_rate: f64,
    pub c1: f64,
    pub c2: f64,
    pub d: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            n: 2,
            w0: 100.0,
            r: 10.0,
            family: RiskFamily::Exponential,
            p0: 0.5,
            lambda: 1.0,
            gamma: 2.0,
            k: 2.0,
            linear_utility: false,
            aversion: 0.1,
            theta: 0.5,
            lc_p0: 0.3,
            lc_rate: 1.0,
            hc_p0: 0.6,
            hc_rate: 0.5,
            c1: 1.0,
            c2: 5.0,
            d: None,
        }
    }
}

impl Settings {
    pub fn rate(&self) -> f64 {
        match self.family {
            RiskFamily::Exponential => self.lambda,
            RiskFamily::Power => self.gamma,
        }
    }

    pub fn risk(&self) -> crate::Result<RiskFunction> {
        RiskFunction::new(self.family, self.p0, self.rate())
    }

    pub fn utility(&self) -> crate::Result<UtilityFunction> {
        if self.linear_utility {
            Ok(UtilityFunction::linear())
        } else {
            UtilityFunction::exponential(self.aversion)
        }
    }

    pub fn market(&self) -> crate::Result<MarketParams> {
        Ok(MarketParams::new(self.n, self.w0, self.r, self.risk()?)?.with_utility(self.utility()?))
    }

    pub fn classes(&self) -> crate::Result<RiskClassPair> {
        RiskClassPair::new(
            RiskFunction::new(self.family, self.lc_p0, self.lc_rate)?,
            RiskFunction::new(self.family, self.hc_p0, self.hc_rate)?,
            self.theta,
        )
    }

    pub fn cost(&self) -> crate::Result<InvestmentCostFunction> {
        InvestmentCostFunction::new(self.c1, self.c2)
    }

    /// Applies one sweep coordinate.
    pub fn with_axis(&self, axis: SweepAxis, v: f64) -> Settings {
        let mut s = self.clone();
        match axis {
            SweepAxis::K => s.k = v,
            SweepAxis::P0 => s.p0 = v,
            SweepAxis::Lambda => s.lambda = v,
            SweepAxis::Gamma => s.gamma = v,
            SweepAxis::N => s.n = v.round() as usize,
            SweepAxis::Theta => s.theta = v,
            SweepAxis::Aversion => s.aversion = v,
            SweepAxis::D => s.d = Some(v),
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub settings: Settings,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub trials: u64,
}

const KEYS: &[&str] = &[
    "command",
    "target",
    "n",
    "w0",
    "w",
    "R",
    "family",
    "p0",
    "lambda",
    "gamma",
    "K",
    "utility",
    "aversion",
    "theta",
    "lc_p0",
    "lc_rate",
    "hc_p0",
    "hc_rate",
    "c1",
    "c2",
    "D",
    "sweep_axis",
    "sweep_start",
    "sweep_stop",
    "sweep_steps",
    "output_dir",
    "seed",
    "trials",
];

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<(usize, T)>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse::<T>()
                .map(|v| Some((line, v)))
                .map_err(|_| ConfigError::at(line, key, format!("expected {what}, got '{raw}'"))),
        }
    }

    fn real(&self, key: &str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> Result<f64, ConfigError> {
        match self.parse::<f64>(key, "a number")? {
            None => Ok(default),
            Some((line, v)) => {
                if v.is_finite() && ok(v) {
                    Ok(v)
                } else {
                    Err(ConfigError::at(line, key, format!("{v} is out of range: {rule}")))
                }
            }
        }
    }

    fn line(&self, key: &str) -> usize {
        self.get(key).map(|(l, _)| l).unwrap_or(0)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: None,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::at(line, k, "unknown key"));
        }
        if v.is_empty() {
            return Err(ConfigError::at(line, k, "missing value"));
        }
        if let Some((first, _)) = map.get(k) {
            return Err(ConfigError::at(
                line,
                k,
                format!("duplicate key (first set on line {first})"),
            ));
        }
        map.insert(k.to_string(), (line, v.to_string()));
    }
    let e = Entries { map };
    if let (Some(_), Some((line, _))) = (e.get("w0"), e.get("w")) {
        return Err(ConfigError::at(line, "w", "w is an alias of w0; set only one"));
    }

    let command = match e.get("command") {
        None => return Err(ConfigError::general("missing required key 'command'")),
        Some((line, v)) => v.parse::<Command>().map_err(|m| ConfigError::at(line, "command", m))?,
    };

    let d = Settings::default();
    let mut s = Settings::default();
    if let Some((line, v)) = e.parse::<usize>("n", "a positive integer")? {
        if v < 1 {
            return Err(ConfigError::at(line, "n", "user count must be at least 1"));
        }
        s.n = v;
    }
    let w_key = if e.get("w").is_some() { "w" } else { "w0" };
    s.w0 = e.real(w_key, d.w0, |v| v > 0.0, "initial wealth must be positive")?;
    s.r = e.real("R", d.r, |v| v > 0.0, "risk size must be positive")?;
    if s.r >= s.w0 {
        let key = if e.get("R").is_some() { "R" } else { w_key };
        return Err(ConfigError::at(
            e.line(key),
            key,
            format!("risk size R={} must be below initial wealth w0={}", s.r, s.w0),
        ));
    }
    if let Some((line, v)) = e.get("family") {
        s.family = match v {
            "exp" | "exponential" => RiskFamily::Exponential,
            "power" => RiskFamily::Power,
            _ => {
                return Err(ConfigError::at(
                    line,
                    "family",
                    format!("expected exp or power, got '{v}'"),
                ))
            }
        };
    }
    match s.family {
        RiskFamily::Exponential if e.get("gamma").is_some() => {
            return Err(ConfigError::at(
                e.line("gamma"),
                "gamma",
                "gamma applies to family = power",
            ));
        }
        RiskFamily::Power if e.get("lambda").is_some() => {
            return Err(ConfigError::at(
                e.line("lambda"),
                "lambda",
                "lambda applies to family = exp",
            ));
        }
        _ => {}
    }
    let prob = |v: f64| v > 0.0 && v <= 1.0;
    s.p0 = e.real("p0", d.p0, prob, "p0 must lie in (0, 1]")?;
    s.lambda = e.real("lambda", d.lambda, |v| v > 0.0, "lambda must be positive")?;
    s.gamma = e.real("gamma", d.gamma, |v| v > 0.0, "gamma must be positive")?;
    s.k = e.real("K", d.k, |v| v >= 1.0, "K must be at least 1")?;
    if let Some((line, v)) = e.get("utility") {
        s.linear_utility = match v {
            "linear" => true,
            "exponential" | "exp" => false,
            _ => {
                return Err(ConfigError::at(
                    line,
                    "utility",
                    format!("expected linear or exponential, got '{v}'"),
                ))
            }
        };
    }
    s.aversion = e.real("aversion", d.aversion, |v| v > 0.0, "aversion must be positive")?;
    s.theta = e.real(
        "theta",
        d.theta,
        |v| (0.0..=1.0).contains(&v),
        "theta must lie in [0, 1]",
    )?;
    let class_prob = |v: f64| v > 0.0 && v < 1.0;
    s.lc_p0 = e.real("lc_p0", d.lc_p0, class_prob, "class probabilities must lie in (0, 1)")?;
    s.hc_p0 = e.real("hc_p0", d.hc_p0, class_prob, "class probabilities must lie in (0, 1)")?;
    s.lc_rate = e.real("lc_rate", d.lc_rate, |v| v > 0.0, "rates must be positive")?;
    s.hc_rate = e.real("hc_rate", d.hc_rate, |v| v > 0.0, "rates must be positive")?;
    if s.classes().is_err() {
        let key = ["hc_p0", "hc_rate", "lc_p0", "lc_rate"]
            .into_iter()
            .find(|k| e.get(k).is_some())
            .unwrap_or("hc_p0");
        return Err(ConfigError::at(
            e.line(key),
            key,
            "high-chance class must dominate the low-chance class",
        ));
    }
    s.c1 = e.real("c1", d.c1, |v| v > 0.0, "c1 must be positive")?;
    s.c2 = e.real("c2", d.c2, |v| v > 0.0, "c2 must be positive")?;
    if e.get("D").is_some() {
        let r = s.r;
        s.d = Some(e.real("D", 0.0, |v| v > 0.0 && v < r, "deductible must satisfy 0 < D < R")?);
    }

    let sweep = if command == Command::Sweep {
        let axis = match e.get("sweep_axis") {
            None => return Err(ConfigError::general("command = sweep needs key 'sweep_axis'")),
            Some((line, v)) => v
                .parse::<SweepAxis>()
                .map_err(|m| ConfigError::at(line, "sweep_axis", m))?,
        };
        let target = match e.get("target") {
            None => return Err(ConfigError::general("command = sweep needs key 'target'")),
            Some((line, v)) => match v.parse::<Command>() {
                Ok(t @ (Command::Contract | Command::Invest | Command::Asym)) => t,
                _ => {
                    return Err(ConfigError::at(
                        line,
                        "target",
                        format!("expected contract, invest or asym, got '{v}'"),
                    ))
                }
            },
        };
        let steps = match e.get("sweep_steps") {
            None => return Err(ConfigError::general("command = sweep needs key 'sweep_steps'")),
            Some((line, v)) => match v.parse::<i64>() {
                Ok(n) if n >= 2 => n as usize,
                Ok(_) => return Err(ConfigError::at(line, "sweep_steps", "sweep steps must be ≥ 2")),
                Err(_) => {
                    return Err(ConfigError::at(
                        line,
                        "sweep_steps",
                        format!("expected an integer, got '{v}'"),
                    ))
                }
            },
        };
        let need = |k: &str| -> Result<f64, ConfigError> {
            match e.parse::<f64>(k, "a number")? {
                Some((_, v)) if v.is_finite() => Ok(v),
                Some((line, v)) => Err(ConfigError::at(line, k, format!("{v} is not finite"))),
                None => Err(ConfigError::general(format!("command = sweep needs key '{k}'"))),
            }
        };
        let sw = Sweep {
            axis,
            start: need("sweep_start")?,
            stop: need("sweep_stop")?,
            steps,
            target,
        };
        validate_sweep(&s, &sw).map_err(|m| ConfigError::at(e.line("sweep_start"), "sweep_start", m))?;
        Some(sw)
    } else {
        for k in ["sweep_axis", "sweep_start", "sweep_stop", "sweep_steps", "target"] {
            if e.get(k).is_some() {
                return Err(ConfigError::at(e.line(k), k, "only valid with command = sweep"));
            }
        }
        None
    };

    let output_dir = e
        .get("output_dir")
        .map(|(_, v)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("."));
    let seed = e
        .parse::<u64>("seed", "an unsigned 64-bit integer")?
        .map(|(_, v)| v)
        .unwrap_or(1);
    let trials = match e.parse::<u64>("trials", "an unsigned integer")? {
        None => 1_000_000,
        Some((line, v)) if v < crate::oracle::MIN_TRIALS => {
            return Err(ConfigError::at(
                line,
                "trials",
                format!("at least {} trials required", crate::oracle::MIN_TRIALS),
            ));
        }
        Some((_, v)) => v,
    };
    Ok(ExperimentConfig {
        command,
        settings: s,
        sweep,
        output_dir,
        seed,
        trials,
    })
}

/// Checks that every sweep point yields valid parameters.
fn validate_sweep(s: &Settings, sw: &Sweep) -> Result<(), String> {
    for v in sw.values() {
        let p = s.with_axis(sw.axis, v);
        let bad = |m: String| Err(format!("sweep value {} = {v}: {m}", sw.axis.name()));
        if sw.axis == SweepAxis::N && (v < 1.0 || v.fract() != 0.0) {
            return bad("n must be a positive integer".into());
        }
        if sw.axis == SweepAxis::D && !(v > 0.0 && v < p.r) {
            return bad("deductible must satisfy 0 < D < R".into());
        }
        if let Err(err) = p.market() {
            return bad(err.to_string());
        }
        if p.k < 1.0 {
            return bad("K must be at least 1".into());
        }
        if sw.target == Command::Asym {
            if let Err(err) = p.classes() {
                return bad(err.to_string());
            }
        }
    }
    Ok(())
}
