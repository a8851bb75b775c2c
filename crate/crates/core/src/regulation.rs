//! Regulatory overrides on the representative trader.
//!
//! A regulator watches the price against a lagging moving-average band and
//! replaces the trader's decision when the band is breached: BUY becomes SELL
//! above the band (pricking a bubble), SELL becomes BUY below it (propping up
//! a crash). The overridden action is what the market records, so it also
//! enters the trader's window.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::ifa::Action;
use crate::market::{MarketPath, TraderConfig};

pub const DEFAULT_MA_WINDOW: usize = 100;
pub const DEFAULT_THRESHOLD: i64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegimeKind {
    Unregulated,
    PrickBubbles,
    PropCrashes,
    Both,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [
        RegimeKind::Unregulated,
        RegimeKind::PrickBubbles,
        RegimeKind::PropCrashes,
        RegimeKind::Both,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Unregulated => "unregulated",
            RegimeKind::PrickBubbles => "prick",
            RegimeKind::PropCrashes => "prop",
            RegimeKind::Both => "both",
        }
    }

    fn pricks(self) -> bool {
        matches!(self, RegimeKind::PrickBubbles | RegimeKind::Both)
    }

    fn props(self) -> bool {
        matches!(self, RegimeKind::PropCrashes | RegimeKind::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DetectorParams {
    /// Moving-average length in ticks, at least 2.
    pub ma_window: usize,
    /// Band half-width in ticks, at least 1.
    pub threshold_k: i64,
}

impl DetectorParams {
    pub fn new(ma_window: usize, threshold_k: i64) -> Result<Self> {
        if ma_window < 2 {
            return Err(LabError::precondition(format!(
                "moving-average window must be at least 2, got {ma_window}"
            )));
        }
        if threshold_k < 1 {
            return Err(LabError::precondition(format!(
                "band threshold must be at least 1, got {threshold_k}"
            )));
        }
        Ok(DetectorParams {
            ma_window,
            threshold_k,
        })
    }
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            ma_window: DEFAULT_MA_WINDOW,
            threshold_k: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Regime {
    pub kind: RegimeKind,
    pub detector: DetectorParams,
    /// Interventions allowed before the regime switches off for good.
    pub budget: Option<u64>,
}

impl Regime {
    pub fn new(kind: RegimeKind, detector: DetectorParams, budget: Option<u64>) -> Self {
        Regime {
            kind,
            detector,
            budget,
        }
    }

    pub fn unregulated() -> Self {
        Regime::new(RegimeKind::Unregulated, DetectorParams::default(), None)
    }

    pub fn with_defaults(kind: RegimeKind) -> Self {
        Regime::new(kind, DetectorParams::default(), None)
    }

    fn exhausted(&self, interventions_so_far: u64) -> bool {
        self.budget.is_some_and(|b| interventions_so_far >= b)
    }
}

/// `unregulated | prick[:ma,k[,budget]] | prop[:ma,k[,budget]] | both[:ma,k[,budget]]`
impl FromStr for Regime {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::Parse {
            what: "regime",
            input: s.to_string(),
        };
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = match name {
            "unregulated" => RegimeKind::Unregulated,
            "prick" => RegimeKind::PrickBubbles,
            "prop" => RegimeKind::PropCrashes,
            "both" => RegimeKind::Both,
            _ => return Err(bad()),
        };
        let Some(params) = params else {
            return Ok(Regime::with_defaults(kind));
        };
        if kind == RegimeKind::Unregulated {
            return Err(bad());
        }
        let fields: Vec<&str> = params.split(',').map(str::trim).collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(bad());
        }
        let ma: usize = fields[0].parse().map_err(|_| bad())?;
        let k: i64 = fields[1].parse().map_err(|_| bad())?;
        let budget = fields
            .get(2)
            .map(|b| b.parse::<u64>().map_err(|_| bad()))
            .transpose()?;
        Ok(Regime::new(kind, DetectorParams::new(ma, k)?, budget))
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if self.kind == RegimeKind::Unregulated {
            return Ok(());
        }
        write!(f, ":{},{}", self.detector.ma_window, self.detector.threshold_k)?;
        if let Some(b) = self.budget {
            write!(f, ",{b}")?;
        }
        Ok(())
    }
}

/// Band test on an exact integer moving-average sum: `sign = 1` checks the
/// upper band, `sign = -1` the lower one.
#[inline]
fn breaches(current: i64, window_sum: i64, params: &DetectorParams, sign: i64) -> bool {
    let ma = params.ma_window as i64;
    let lhs = i128::from(current) * i128::from(ma);
    let band = i128::from(window_sum) + i128::from(sign) * i128::from(params.threshold_k) * i128::from(ma);
    if sign > 0 {
        lhs > band
    } else {
        lhs < band
    }
}

fn window_sum(prices: &[i64], params: &DetectorParams) -> Option<(i64, i64)> {
    if prices.len() < params.ma_window {
        return None;
    }
    let current = *prices.last()?;
    let sum = prices[prices.len() - params.ma_window..].iter().sum();
    Some((current, sum))
}

/// Current price above its `ma_window` moving average plus `threshold_k`.
/// False during warm-up.
pub fn detect_bubble(prices: &[i64], params: &DetectorParams) -> bool {
    window_sum(prices, params).is_some_and(|(cur, sum)| breaches(cur, sum, params, 1))
}

/// Current price below its `ma_window` moving average minus `threshold_k`.
pub fn detect_crash(prices: &[i64], params: &DetectorParams) -> bool {
    window_sum(prices, params).is_some_and(|(cur, sum)| breaches(cur, sum, params, -1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InterventionKind {
    Prick,
    Prop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Override {
    pub action: Action,
    pub intervention: Option<InterventionKind>,
}

impl Override {
    pub fn intervened(&self) -> bool {
        self.intervention.is_some()
    }
}

fn decide_override(
    decision: Action,
    bubble: bool,
    crash: bool,
    regime: &Regime,
    interventions_so_far: u64,
) -> Override {
    let keep = Override {
        action: decision,
        intervention: None,
    };
    if regime.kind == RegimeKind::Unregulated || regime.exhausted(interventions_so_far) {
        return keep;
    }
    match decision {
        Action::Buy if bubble && regime.kind.pricks() => Override {
            action: Action::Sell,
            intervention: Some(InterventionKind::Prick),
        },
        Action::Sell if crash && regime.kind.props() => Override {
            action: Action::Buy,
            intervention: Some(InterventionKind::Prop),
        },
        _ => keep,
    }
}

/// Passes one decision through the regime given the price history so far.
pub fn apply_regime(
    decision: Action,
    prices: &[i64],
    regime: &Regime,
    interventions_so_far: u64,
) -> Override {
    if regime.kind == RegimeKind::Unregulated {
        return decide_override(decision, false, false, regime, interventions_so_far);
    }
    decide_override(
        decision,
        detect_bubble(prices, &regime.detector),
        detect_crash(prices, &regime.detector),
        regime,
        interventions_so_far,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Intervention {
    pub t: usize,
    pub original: Action,
    pub overridden: Action,
    pub kind: InterventionKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegulatedRun {
    pub regime: Regime,
    pub path: MarketPath,
    /// Sorted by tick.
    pub interventions: Vec<Intervention>,
    /// Tick of the intervention that used up the budget (0 for a zero budget).
    pub budget_exhausted_at: Option<usize>,
}

impl RegulatedRun {
    pub fn count(&self, kind: InterventionKind) -> usize {
        self.interventions.iter().filter(|i| i.kind == kind).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.path.len() + 64);
        out.push_str("t,tick,price,intervened,original,final\n");
        let mut log = self.interventions.iter().peekable();
        for (t, (&tick, &price)) in self.path.ticks.iter().zip(&self.path.prices).enumerate() {
            let fin = if tick > 0 { Action::Buy } else { Action::Sell };
            let (intervened, original) = match log.peek() {
                Some(i) if i.t == t => {
                    let i = log.next().expect("peeked");
                    (1, i.original)
                }
                _ => (0, fin),
            };
            out.push_str(&format!("{t},{tick},{price},{intervened},{original},{fin}\n"));
        }
        out
    }
}

/// Incremental moving-average band over the price history.
struct Band {
    params: DetectorParams,
    recent: VecDeque<i64>,
    sum: i64,
}

impl Band {
    fn new(params: DetectorParams) -> Self {
        Band {
            params,
            recent: VecDeque::with_capacity(params.ma_window + 1),
            sum: 0,
        }
    }

    fn push(&mut self, price: i64) {
        self.recent.push_back(price);
        self.sum += price;
        if self.recent.len() > self.params.ma_window {
            self.sum -= self.recent.pop_front().expect("non-empty");
        }
    }

    fn state(&self) -> (bool, bool) {
        match self.recent.back() {
            Some(&cur) if self.recent.len() == self.params.ma_window => (
                breaches(cur, self.sum, &self.params, 1),
                breaches(cur, self.sum, &self.params, -1),
            ),
            _ => (false, false),
        }
    }
}

/// The market simulation with each decision passed through `regime` before
/// it moves the price and enters the window.
pub fn simulate_regulated(
    config: &TraderConfig,
    regime: &Regime,
    horizon: usize,
) -> Result<RegulatedRun> {
    if horizon == 0 {
        return Err(LabError::precondition("horizon must be at least one tick"));
    }
    let trader = config.trader();
    let mut window = config.seed;
    let mut band = Band::new(regime.detector);
    let mut ticks = Vec::with_capacity(horizon);
    let mut price = 0i64;
    let mut interventions = Vec::new();
    let mut budget_exhausted_at = match regime.budget {
        Some(0) if regime.kind != RegimeKind::Unregulated => Some(0),
        _ => None,
    };
    for t in 0..horizon {
        let decision = trader.decide(window);
        let (bubble, crash) = band.state();
        let ov = decide_override(decision, bubble, crash, regime, interventions.len() as u64);
        if let Some(kind) = ov.intervention {
            interventions.push(Intervention {
                t,
                original: decision,
                overridden: ov.action,
                kind,
            });
            if regime.budget == Some(interventions.len() as u64) {
                budget_exhausted_at = Some(t);
            }
        }
        ticks.push(ov.action.tick());
        price += i64::from(ov.action.tick());
        band.push(price);
        window = window.push(ov.action.sign());
    }
    Ok(RegulatedRun {
        regime: *regime,
        path: MarketPath::from_ticks(ticks),
        interventions,
        budget_exhausted_at,
    })
}

/// The four regimes with shared detector and budget, run in parallel.
pub fn run_all_regimes(
    config: &TraderConfig,
    detector: DetectorParams,
    budget: Option<u64>,
    horizon: usize,
) -> Result<Vec<RegulatedRun>> {
    RegimeKind::ALL
        .par_iter()
        .map(|&kind| simulate_regulated(config, &Regime::new(kind, detector, budget), horizon))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AsymmetryRow {
    pub detector: DetectorParams,
    pub prick_interventions: usize,
    pub both_prick: usize,
    pub both_prop: usize,
    pub identical_ticks: bool,
}

impl AsymmetryRow {
    /// Propping adds nothing once bubbles are pricked.
    pub fn holds(&self) -> bool {
        self.identical_ticks && self.both_prop == 0
    }
}

/// Compares PRICK_BUBBLES with BOTH for one detector setting.
pub fn asymmetry_check(
    config: &TraderConfig,
    detector: DetectorParams,
    horizon: usize,
) -> Result<AsymmetryRow> {
    let prick = simulate_regulated(config, &Regime::new(RegimeKind::PrickBubbles, detector, None), horizon)?;
    let both = simulate_regulated(config, &Regime::new(RegimeKind::Both, detector, None), horizon)?;
    Ok(AsymmetryRow {
        detector,
        prick_interventions: prick.interventions.len(),
        both_prick: both.count(InterventionKind::Prick),
        both_prop: both.count(InterventionKind::Prop),
        identical_ticks: prick.path.ticks == both.path.ticks,
    })
}

pub const SWEEP_MA_WINDOWS: [usize; 5] = [20, 50, 100, 200, 500];
pub const SWEEP_THRESHOLDS: [i64; 4] = [5, 10, 20, 40];

/// Asymmetry check over a grid of detector settings, ordered by
/// `(ma_window, threshold_k)`.
pub fn asymmetry_sweep(
    config: &TraderConfig,
    ma_windows: &[usize],
    thresholds: &[i64],
    horizon: usize,
) -> Result<Vec<AsymmetryRow>> {
    let grid: Vec<DetectorParams> = ma_windows
        .iter()
        .flat_map(|&ma| thresholds.iter().map(move |&k| DetectorParams::new(ma, k)))
        .collect::<Result<_>>()?;
    grid.into_par_iter()
        .map(|d| asymmetry_check(config, d, horizon))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "ma_window,threshold_k,prick_interventions,both_prick,both_prop,identical_ticks";

pub fn sweep_csv(rows: &[AsymmetryRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.detector.ma_window,
            r.detector.threshold_k,
            r.prick_interventions,
            r.both_prick,
            r.both_prop,
            r.identical_ticks
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifa::{run_ifa, IfaRule};
    use crate::market::{simulate, Window};
    use proptest::prelude::*;

    fn rule54(n: u32) -> TraderConfig {
        TraderConfig::all_up(IfaRule::from_number(54, 2).unwrap(), n).unwrap()
    }

    /// Slice-based reference: recomputes the detectors from the full price
    /// prefix and walks the automaton on explicit sign vectors.
    fn reference_run(config: &TraderConfig, regime: &Regime, horizon: usize) -> (Vec<i8>, usize) {
        let mut signs = config.seed.signs();
        let mut prices: Vec<i64> = Vec::new();
        let mut ticks = Vec::new();
        let mut count = 0u64;
        for _ in 0..horizon {
            let decision = run_ifa(&config.rule, &signs).unwrap();
            let ov = apply_regime(decision, &prices, regime, count);
            if ov.intervened() {
                count += 1;
            }
            ticks.push(ov.action.tick());
            prices.push(prices.last().copied().unwrap_or(0) + i64::from(ov.action.tick()));
            signs.pop();
            signs.insert(0, ov.action.sign());
        }
        (ticks, count as usize)
    }

    #[test]
    fn detector_examples() {
        let d = DetectorParams::default();
        assert!(!detect_bubble(&[5; 200], &d));
        assert!(!detect_crash(&[5; 200], &d));
        let rising: Vec<i64> = (0..200).collect();
        assert!(detect_bubble(&rising, &d));
        assert!(!detect_crash(&rising, &d));
        let falling: Vec<i64> = (0..200).map(|x| -x).collect();
        assert!(!detect_bubble(&falling, &d));
        assert!(detect_crash(&falling, &d));
        // warm-up
        assert!(!detect_bubble(&rising[..99], &d));
    }

    #[test]
    fn detector_params_validated() {
        assert!(DetectorParams::new(1, 10).is_err());
        assert!(DetectorParams::new(2, 0).is_err());
        assert!(DetectorParams::new(2, 1).is_ok());
    }

    proptest! {
        #[test]
        fn crash_is_reflected_bubble(steps in proptest::collection::vec(prop_oneof![Just(1i64), Just(-1i64)], 0..300), ma in 2usize..60, k in 1i64..8) {
            let prices: Vec<i64> = steps.iter().scan(0, |p, s| { *p += s; Some(*p) }).collect();
            let reflected: Vec<i64> = prices.iter().map(|p| -p).collect();
            let d = DetectorParams::new(ma, k).unwrap();
            prop_assert_eq!(detect_crash(&prices, &d), detect_bubble(&reflected, &d));
            prop_assert!(!(detect_crash(&prices, &d) && detect_bubble(&prices, &d)));
        }
    }

    #[test]
    fn apply_regime_examples() {
        let rising: Vec<i64> = (0..200).collect();
        let falling: Vec<i64> = (0..200).map(|x| -x).collect();
        for a in [Action::Buy, Action::Sell] {
            let ov = apply_regime(a, &rising, &Regime::unregulated(), 0);
            assert_eq!(ov, Override { action: a, intervention: None });
        }
        let prick = Regime::with_defaults(RegimeKind::PrickBubbles);
        let ov = apply_regime(Action::Buy, &rising, &prick, 0);
        assert_eq!(ov.action, Action::Sell);
        assert_eq!(ov.intervention, Some(InterventionKind::Prick));
        assert!(!apply_regime(Action::Sell, &rising, &prick, 0).intervened());

        let prop0 = Regime::new(RegimeKind::PropCrashes, DetectorParams::default(), Some(0));
        for a in [Action::Buy, Action::Sell] {
            assert_eq!(apply_regime(a, &falling, &prop0, 0).action, a);
        }
        let prop = Regime::with_defaults(RegimeKind::PropCrashes);
        assert_eq!(apply_regime(Action::Sell, &falling, &prop, 0).action, Action::Buy);
    }

    #[test]
    fn regime_strings() {
        assert_eq!("unregulated".parse::<Regime>().unwrap(), Regime::unregulated());
        let r: Regime = "prick:50,5,7".parse().unwrap();
        assert_eq!(r.kind, RegimeKind::PrickBubbles);
        assert_eq!(r.detector, DetectorParams::new(50, 5).unwrap());
        assert_eq!(r.budget, Some(7));
        assert_eq!(r.to_string(), "prick:50,5,7");
        assert_eq!("both".parse::<Regime>().unwrap().to_string(), "both:100,10");
        assert!("prop:1,5".parse::<Regime>().is_err());
        assert!("prop:50".parse::<Regime>().is_err());
        assert!("regulate".parse::<Regime>().is_err());
        assert!("unregulated:5,5".parse::<Regime>().is_err());
    }

    #[test]
    fn unregulated_matches_market_simulation() {
        let cfg = rule54(22);
        let run = simulate_regulated(&cfg, &Regime::unregulated(), 20_000).unwrap();
        assert_eq!(run.path, simulate(&cfg, 20_000).unwrap());
        assert!(run.interventions.is_empty());
    }

    #[test]
    fn streaming_matches_reference() {
        for (n, regime) in [
            (22, "prick"),
            (22, "both"),
            (22, "prop:50,5"),
            (10, "both:20,3,40"),
            (7, "prop:30,4,3"),
        ] {
            let cfg = rule54(n);
            let regime: Regime = regime.parse().unwrap();
            let run = simulate_regulated(&cfg, &regime, 6_000).unwrap();
            let (ticks, count) = reference_run(&cfg, &regime, 6_000);
            assert_eq!(run.path.ticks, ticks, "{regime}");
            assert_eq!(run.interventions.len(), count);
        }
    }

    #[test]
    fn intervention_log_is_sound() {
        let cfg = rule54(22);
        let regime: Regime = "both:50,5".parse().unwrap();
        let run = simulate_regulated(&cfg, &regime, 30_000).unwrap();
        assert!(!run.interventions.is_empty());
        for i in &run.interventions {
            assert_ne!(i.original, i.overridden);
            let prefix = &run.path.prices[..i.t];
            match i.kind {
                InterventionKind::Prick => assert!(detect_bubble(prefix, &regime.detector)),
                InterventionKind::Prop => assert!(detect_crash(prefix, &regime.detector)),
            }
            assert_eq!(run.path.ticks[i.t], i.overridden.tick());
        }
    }

    #[test]
    fn budget_limits_interventions_then_dynamics_resume() {
        let cfg = rule54(22);
        let regime: Regime = "prick:100,10,5".parse().unwrap();
        let horizon = 100_000;
        let run = simulate_regulated(&cfg, &regime, horizon).unwrap();
        assert!(run.interventions.len() <= 5);
        let Some(t_star) = run.budget_exhausted_at else {
            panic!("budget of 5 should be used up in {horizon} ticks");
        };
        assert_eq!(run.interventions.last().unwrap().t, t_star);
        // window after tick t_star, most recent first
        let n = cfg.lookback as usize;
        let signs: Vec<_> = run.path.ticks[t_star + 1 - n..=t_star]
            .iter()
            .rev()
            .map(|&t| if t > 0 { Action::Buy.sign() } else { Action::Sell.sign() })
            .collect();
        let resumed = TraderConfig::new(cfg.rule.clone(), cfg.lookback, Window::from_signs(&signs).unwrap()).unwrap();
        let rest = simulate(&resumed, horizon - t_star - 1).unwrap();
        assert_eq!(rest.ticks, run.path.ticks[t_star + 1..]);
    }

    #[test]
    fn zero_budget_is_exhausted_from_the_start() {
        let cfg = rule54(22);
        let regime: Regime = "prop:100,10,0".parse().unwrap();
        let run = simulate_regulated(&cfg, &regime, 10_000).unwrap();
        assert_eq!(run.budget_exhausted_at, Some(0));
        assert!(run.interventions.is_empty());
        assert_eq!(run.path, simulate(&cfg, 10_000).unwrap());
    }

    #[test]
    fn budget_monotonicity() {
        let cfg = rule54(14);
        let unlimited = simulate_regulated(&cfg, &"both:50,5".parse().unwrap(), 20_000).unwrap();
        let total = unlimited.interventions.len() as u64;
        let mut last = 0;
        for b in [0u64, 1, 2, 5, 10, 50, total, total + 10] {
            let r = simulate_regulated(&cfg, &format!("both:50,5,{b}").parse().unwrap(), 20_000).unwrap();
            assert!(r.interventions.len() >= last);
            last = r.interventions.len();
            if total <= b {
                assert_eq!(r.path, unlimited.path);
            }
        }
    }

    #[test]
    fn csv_columns() {
        let cfg = rule54(5);
        let run = simulate_regulated(&cfg, &"prick:4,1".parse().unwrap(), 300).unwrap();
        let csv = run.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,tick,price,intervened,original,final"));
        let flagged = csv.lines().skip(1).filter(|l| l.split(',').nth(3) == Some("1")).count();
        assert_eq!(flagged, run.interventions.len());
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[3] == "1", f[4] != f[5]);
        }
    }

    #[test]
    fn all_regimes_in_order() {
        let runs = run_all_regimes(&rule54(10), DetectorParams::default(), None, 2_000).unwrap();
        let kinds: Vec<_> = runs.iter().map(|r| r.regime.kind).collect();
        assert_eq!(kinds, RegimeKind::ALL);
    }
}
