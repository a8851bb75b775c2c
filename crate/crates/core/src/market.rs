//! The representative-trader market: one automaton trader whose decision is
//! the market move, fed back as the newest sign of its own lookback window.

use std::fmt;

use crate::error::{LabError, Result};
use crate::ifa::{Action, IfaRule, InputSign, PackedIfa};

pub const MAX_LOOKBACK: u32 = 64;
/// Largest lookback for which [`all_cycles`] will enumerate the state space.
pub const MAX_EXHAUSTIVE_LOOKBACK: u32 = 20;

/// The last `len` signs, packed: bit `i` holds the sign `i` ticks ago
/// (`Down = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    bits: u64,
    len: u32,
}

#[inline]
fn mask(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

fn check_len(len: u32) -> Result<()> {
    if len == 0 || len > MAX_LOOKBACK {
        return Err(LabError::precondition(format!(
            "lookback must be in 1..={MAX_LOOKBACK}, got {len}"
        )));
    }
    Ok(())
}

impl Window {
    pub fn from_bits(bits: u64, len: u32) -> Result<Self> {
        check_len(len)?;
        Ok(Window {
            bits: bits & mask(len),
            len,
        })
    }

    /// Signs given most recent first.
    pub fn from_signs(signs: &[InputSign]) -> Result<Self> {
        let len = u32::try_from(signs.len()).unwrap_or(u32::MAX);
        check_len(len)?;
        let bits = signs
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, s)| acc | (s.bit() << i));
        Ok(Window { bits, len })
    }

    pub fn all_up(len: u32) -> Result<Self> {
        Window::from_bits(0, len)
    }

    pub fn all_down(len: u32) -> Result<Self> {
        Window::from_bits(u64::MAX, len)
    }

    /// Parses `U`/`D` strings (most recent first) or `allU` / `allD`.
    pub fn parse(text: &str, len: u32) -> Result<Self> {
        let text = text.trim();
        match text {
            "allU" => return Window::all_up(len),
            "allD" => return Window::all_down(len),
            _ => {}
        }
        let signs: Vec<InputSign> = text
            .chars()
            .map(|c| match c {
                'U' | 'u' => Ok(InputSign::Up),
                'D' | 'd' => Ok(InputSign::Down),
                _ => Err(LabError::Parse {
                    what: "seed window",
                    input: text.to_string(),
                }),
            })
            .collect::<Result<_>>()?;
        if signs.len() != len as usize {
            return Err(LabError::precondition(format!(
                "seed window {text:?} has {} signs but lookback is {len}",
                signs.len()
            )));
        }
        Window::from_signs(&signs)
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn len(self) -> u32 {
        self.len
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn sign(self, ago: u32) -> InputSign {
        InputSign::from_bit(self.bits >> ago)
    }

    pub fn signs(self) -> Vec<InputSign> {
        (0..self.len).map(|i| self.sign(i)).collect()
    }

    /// New window with `sign` as the most recent entry and the oldest dropped.
    #[inline]
    pub fn push(self, sign: InputSign) -> Window {
        Window {
            bits: ((self.bits << 1) | sign.bit()) & mask(self.len),
            len: self.len,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.signs() {
            f.write_str(match s {
                InputSign::Up => "U",
                InputSign::Down => "D",
            })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraderConfig {
    pub rule: IfaRule,
    pub lookback: u32,
    pub seed: Window,
}

impl TraderConfig {
    pub fn new(rule: IfaRule, lookback: u32, seed: Window) -> Result<Self> {
        check_len(lookback)?;
        if seed.len() != lookback {
            return Err(LabError::precondition(format!(
                "seed window length {} differs from lookback {lookback}",
                seed.len()
            )));
        }
        Ok(TraderConfig {
            rule,
            lookback,
            seed,
        })
    }

    /// Config with the default all-UP seed.
    pub fn all_up(rule: IfaRule, lookback: u32) -> Result<Self> {
        TraderConfig::new(rule, lookback, Window::all_up(lookback)?)
    }

    pub fn trader(&self) -> Trader {
        Trader {
            ifa: PackedIfa::new(&self.rule),
            lookback: self.lookback,
        }
    }
}

/// A compiled trader: the window map and decision function.
#[derive(Clone, Debug)]
pub struct Trader {
    ifa: PackedIfa,
    lookback: u32,
}

impl Trader {
    pub fn lookback(&self) -> u32 {
        self.lookback
    }

    #[inline]
    pub fn decide(&self, window: Window) -> Action {
        self.ifa.decide(window.bits, self.lookback)
    }

    /// The window-state map.
    #[inline]
    pub fn next_window(&self, window: Window) -> Window {
        window.push(self.decide(window).sign())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarketPath {
    pub ticks: Vec<i8>,
    pub prices: Vec<i64>,
}

impl MarketPath {
    pub fn from_ticks(ticks: Vec<i8>) -> Self {
        let prices = ticks
            .iter()
            .scan(0i64, |level, &t| {
                *level += i64::from(t);
                Some(*level)
            })
            .collect();
        MarketPath { ticks, prices }
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.len() + 16);
        out.push_str("t,tick,price\n");
        for (t, (tick, price)) in self.ticks.iter().zip(&self.prices).enumerate() {
            out.push_str(&format!("{t},{tick},{price}\n"));
        }
        out
    }
}

/// One tick of the market: the decision on `window` and the updated window.
pub fn step(config: &TraderConfig, window: Window) -> Result<(i8, Window)> {
    if window.len() != config.lookback {
        return Err(LabError::precondition(format!(
            "window length {} differs from lookback {}",
            window.len(),
            config.lookback
        )));
    }
    let action = config.trader().decide(window);
    Ok((action.tick(), window.push(action.sign())))
}

pub fn simulate(config: &TraderConfig, horizon: usize) -> Result<MarketPath> {
    if horizon == 0 {
        return Err(LabError::precondition("horizon must be at least one tick"));
    }
    let trader = config.trader();
    let mut window = config.seed;
    let mut ticks = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let action = trader.decide(window);
        ticks.push(action.tick());
        window = window.push(action.sign());
    }
    Ok(MarketPath::from_ticks(ticks))
}

/// Transient length and period of the orbit of a deterministic map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleInfo {
    pub transient: u64,
    pub period: u64,
}

/// Brent's cycle finding: constant memory, at most `transient + 2 * period`
/// (rounded up to a power of two) map evaluations in the first phase.
pub fn brent<T, F>(start: T, mut f: F) -> CycleInfo
where
    T: Copy + Eq,
    F: FnMut(T) -> T,
{
    let mut power = 1u64;
    let mut period = 1u64;
    let mut tortoise = start;
    let mut hare = f(start);
    while tortoise != hare {
        if power == period {
            tortoise = hare;
            power *= 2;
            period = 0;
        }
        hare = f(hare);
        period += 1;
    }

    let mut tortoise = start;
    let mut hare = start;
    for _ in 0..period {
        hare = f(hare);
    }
    let mut transient = 0;
    while tortoise != hare {
        tortoise = f(tortoise);
        hare = f(hare);
        transient += 1;
    }
    CycleInfo { transient, period }
}

/// Transient and period of the window orbit reachable from the seed.
pub fn cycle_length(config: &TraderConfig) -> CycleInfo {
    let trader = config.trader();
    brent(config.seed, |w| trader.next_window(w))
}

/// One cycle of the window-state map, identified by its least window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CycleSummary {
    pub period: u64,
    pub least_window: u64,
}

/// Every cycle of the window map for lookback `n <= 20`, sorted.
pub fn all_cycles(rule: &IfaRule, lookback: u32) -> Result<Vec<CycleSummary>> {
    if !(1..=MAX_EXHAUSTIVE_LOOKBACK).contains(&lookback) {
        return Err(LabError::precondition(format!(
            "exhaustive cycle enumeration supports lookback 1..={MAX_EXHAUSTIVE_LOOKBACK}, got {lookback}"
        )));
    }
    let trader = TraderConfig::all_up(rule.clone(), lookback)?.trader();
    let size = 1usize << lookback;
    // 0 = unvisited, otherwise id of the walk that first reached the state
    let mut walk_of = vec![0u32; size];
    let mut pos = vec![0u32; size];
    let mut cycles = Vec::new();
    let mut walk_id = 0u32;
    for start in 0..size {
        if walk_of[start] != 0 {
            continue;
        }
        walk_id += 1;
        let mut state = start;
        let mut i = 0u32;
        while walk_of[state] == 0 {
            walk_of[state] = walk_id;
            pos[state] = i;
            i += 1;
            let w = Window::from_bits(state as u64, lookback)?;
            state = trader.next_window(w).bits() as usize;
        }
        if walk_of[state] == walk_id {
            let period = u64::from(i - pos[state]);
            let mut least = state as u64;
            let mut s = Window::from_bits(state as u64, lookback)?;
            for _ in 0..period {
                s = trader.next_window(s);
                least = least.min(s.bits());
            }
            cycles.push(CycleSummary {
                period,
                least_window: least,
            });
        }
    }
    cycles.sort();
    Ok(cycles)
}

/// Closed form of rule 54: buy iff the two oldest signs differ.
pub fn rule54_oracle(window: &[InputSign]) -> Result<Action> {
    match window {
        [.., older, oldest] => Ok(if older != oldest {
            Action::Buy
        } else {
            Action::Sell
        }),
        _ => Err(LabError::precondition("rule-54 oracle needs at least two signs")),
    }
}

pub const CYCLE_CSV_HEADER: &str = "rule,n,seed,transient,period";

pub fn cycle_csv_row(config: &TraderConfig, info: CycleInfo) -> String {
    format!(
        "{},{},{},{},{}",
        config.rule.number(),
        config.lookback,
        config.seed,
        info.transient,
        info.period
    )
}
