#![allow(dead_code)]

use cyberinsure::*;
use proptest::test_runner::{Config, RngSeed};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn fixed(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub struct Sampler(ChaCha8Rng);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn coin(&mut self) -> bool {
        self.0.next_u64() & 1 == 1
    }
}

/// Both families, n in 2..=10, R/w0 in (0, 1), rate in [0.1, 5].
pub fn market_draw(s: &mut Sampler) -> MarketParams {
    let family = if s.coin() {
        RiskFamily::Exponential
    } else {
        RiskFamily::Power
    };
    let risk = RiskFunction::new(family, s.range(0.02, 0.98), s.range(0.1, 5.0)).unwrap();
    let w0 = 100.0;
    MarketParams::new(s.int(2, 10), w0, w0 * s.range(0.02, 0.98), risk).unwrap()
}

pub fn case1_objective(m: &MarketParams, x: f64) -> f64 {
    m.w0 - x - m.risk.prob(x) * m.r
}

/// Per-user welfare when every user invests `x`.
pub fn case2_objective(m: &MarketParams, x: f64) -> f64 {
    m.w0 - x - (1.0 - (1.0 - m.risk.prob(x)).powi(m.n as i32)) * m.r
}

/// Payoff of one user investing `x` while the others invest `others`.
pub fn case3_payoff(m: &MarketParams, x: f64, others: f64) -> f64 {
    let safe = (1.0 - m.risk.prob(x)) * (1.0 - m.risk.prob(others)).powi(m.n as i32 - 1);
    m.w0 - x - (1.0 - safe) * m.r
}

pub fn lemma3_threshold_of(n: usize) -> f64 {
    1.0 - (1.0 / n as f64).powf(1.0 / (n as f64 - 1.0))
}

pub fn desk_pair(theta: f64) -> RiskClassPair {
    RiskClassPair::new(
        RiskFunction::exponential(0.3, 1.0).unwrap(),
        RiskFunction::exponential(0.6, 0.5).unwrap(),
        theta,
    )
    .unwrap()
}

pub const W0: f64 = 100.0;
pub const R: f64 = 10.0;

/// (params, x_vec, contract, user) fixtures covering both families,
/// n from 1 to 6, asymmetric investments and three coverage levels.
pub fn mc_fixtures() -> Vec<(MarketParams, Vec<f64>, Contract, usize)> {
    let mut out = Vec::new();
    let risks = [
        RiskFunction::exponential(0.5, 1.0).unwrap(),
        RiskFunction::power(0.5, 2.0).unwrap(),
        RiskFunction::exponential(0.9, 0.3).unwrap(),
        RiskFunction::power(0.2, 0.7).unwrap(),
    ];
    let profiles: [&[f64]; 5] = [
        &[0.0],
        &[1.6094379124341003, 1.6094379124341003],
        &[0.3, 2.0, 0.0],
        &[1.0; 4],
        &[0.2, 0.4, 0.8, 1.6, 3.2, 6.4],
    ];
    for (i, risk) in risks.iter().enumerate() {
        for (j, x) in profiles.iter().enumerate() {
            let c = [0.0, 5.0, 10.0][(i + j) % 3];
            let params = MarketParams::new(x.len(), 100.0, 10.0, *risk).unwrap();
            out.push((params, x.to_vec(), Contract::new(0.0, c).unwrap(), j % x.len()));
        }
    }
    out
}

/// Two-class configurations for the asymmetric-information checks.
pub fn asym_configs() -> Vec<(RiskClassPair, UtilityFunction)> {
    let exp = |p, l| RiskFunction::exponential(p, l).unwrap();
    let pow = |p, g| RiskFunction::power(p, g).unwrap();
    let pair = |low, high, theta| RiskClassPair::new(low, high, theta).unwrap();
    let u = |a| UtilityFunction::exponential(a).unwrap();
    vec![
        (desk_pair(0.5), u(0.1)),
        (desk_pair(0.5), u(0.5)),
        (desk_pair(0.3), u(1.0)),
        (pair(exp(0.2, 0.8), exp(0.5, 0.4), 0.7), u(0.3)),
        (pair(pow(0.3, 2.0), pow(0.6, 1.0), 0.5), u(0.2)),
        (pair(exp(0.1, 1.5), exp(0.4, 1.5), 0.5), u(0.05)),
    ]
}

pub struct Asym<'a> {
    pub pair: &'a RiskClassPair,
    pub util: &'a UtilityFunction,
}

impl Asym<'_> {
    pub fn eu<P: LossCurve + ?Sized>(&self, c: &Contract, risk: &P) -> f64 {
        class_response(c, risk, self.util, W0, R).1
    }

    pub fn profit<P: LossCurve + ?Sized>(&self, c: &Contract, risk: &P) -> f64 {
        class_profit(c, risk, self.util, W0, R)
    }

    pub fn blended(&self) -> BlendedRisk {
        BlendedRisk(*self.pair)
    }

    /// Largest gain from moving the investment away from `x` on a dense grid.
    pub fn deviation_gain<P: LossCurve + ?Sized>(&self, c: &Contract, risk: &P, x: f64) -> f64 {
        let f = |t: f64| expected_utility(c, risk, self.util, W0, R, t);
        let hi = (4.0 * x).max(60.0);
        let (_, best) = grid_argmax_1d(f, 0.0, hi, 20_000, 2).unwrap();
        best - f(x)
    }

    pub fn no_info_feasible(&self, c: &Contract) -> bool {
        self.eu(c, &self.blended()) >= self.eu(&Contract::NONE, &self.blended())
    }

    pub fn post_feasible(&self, c: &Contract) -> bool {
        self.eu(c, &self.pair.low) >= self.eu(&Contract::NONE, &self.pair.low)
            && self.eu(c, &self.pair.high) >= self.eu(&Contract::NONE, &self.pair.high)
    }

    pub fn post_profit(&self, c: &Contract) -> f64 {
        let t = self.pair.theta;
        t * self.profit(c, &self.pair.high) + (1.0 - t) * self.profit(c, &self.pair.low)
    }

    pub fn menu_feasible(&self, low: &Contract, high: &Contract) -> bool {
        let (l, h) = (&self.pair.low, &self.pair.high);
        let none = Contract::NONE;
        self.eu(low, l) >= self.eu(&none, l)
            && self.eu(high, h) >= self.eu(&none, h)
            && self.eu(low, l) >= self.eu(high, l)
            && self.eu(high, h) >= self.eu(low, h)
    }

    pub fn menu_profit(&self, low: &Contract, high: &Contract) -> f64 {
        let t = self.pair.theta;
        t * self.profit(high, &self.pair.high) + (1.0 - t) * self.profit(low, &self.pair.low)
    }
}

pub fn random_contract(s: &mut Sampler, z_max: f64) -> Contract {
    Contract::new(s.range(0.0, z_max), s.range(0.0, R)).unwrap()
}
