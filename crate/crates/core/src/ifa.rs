//! Iterated finite automata over price-change signs.
//!
//! An automaton with `k` states reads a window of signs most-recent-first,
//! starting in state 1, and emits one action per transition. The action of
//! the final transition is the trader's decision.
//!
//! Rules are numbered by writing each transition as one base-`2k` digit,
//! `2 * (next_state - 1) + output` with `SELL = 0` and `BUY = 1`, in the order
//! `(S1,UP), (S1,DOWN), (S2,UP), (S2,DOWN), ...`, most significant digit
//! first. Under this layout rule 54 has digits `0,3,1,2`.

use std::fmt;
use std::ops::Not;
use std::str::FromStr;

use crate::error::{LabError, Result};

/// Sign of one price change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputSign {
    Up,
    Down,
}

impl InputSign {
    /// Packed-window bit: `Up = 0`, `Down = 1`.
    #[inline]
    pub fn bit(self) -> u64 {
        match self {
            InputSign::Up => 0,
            InputSign::Down => 1,
        }
    }

    #[inline]
    pub fn from_bit(bit: u64) -> Self {
        if bit & 1 == 0 {
            InputSign::Up
        } else {
            InputSign::Down
        }
    }

    fn index(self) -> usize {
        self.bit() as usize
    }
}

impl Not for InputSign {
    type Output = InputSign;

    fn not(self) -> InputSign {
        match self {
            InputSign::Up => InputSign::Down,
            InputSign::Down => InputSign::Up,
        }
    }
}

/// Trade action emitted by a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Sell,
    Buy,
}

impl Action {
    fn digit(self) -> u64 {
        match self {
            Action::Sell => 0,
            Action::Buy => 1,
        }
    }

    /// The price move the representative trader causes.
    #[inline]
    pub fn tick(self) -> i8 {
        match self {
            Action::Buy => 1,
            Action::Sell => -1,
        }
    }

    /// The sign the market records after this action.
    #[inline]
    pub fn sign(self) -> InputSign {
        match self {
            Action::Buy => InputSign::Up,
            Action::Sell => InputSign::Down,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Buy => "BUY",
            Action::Sell => "SELL",
        }
    }
}

impl Not for Action {
    type Output = Action;

    fn not(self) -> Action {
        match self {
            Action::Buy => Action::Sell,
            Action::Sell => Action::Buy,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One table entry. `next` is a zero-based state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub next: usize,
    pub output: Action,
}

impl Transition {
    pub fn new(next: usize, output: Action) -> Self {
        Transition { next, output }
    }
}

/// Zero-based index of the start state ("state 1").
pub const START_STATE: usize = 0;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IfaRule {
    state_count: usize,
    /// Indexed by `2 * state + input`.
    table: Vec<Transition>,
}

impl IfaRule {
    pub fn new(state_count: usize, table: Vec<Transition>) -> Result<Self> {
        if state_count == 0 {
            return Err(LabError::InvalidRule("state count must be positive".into()));
        }
        if table.len() != 2 * state_count {
            return Err(LabError::InvalidRule(format!(
                "expected {} transitions for {} states, got {}",
                2 * state_count,
                state_count,
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|t| t.next >= state_count) {
            return Err(LabError::InvalidRule(format!(
                "next state {} outside 1..={}",
                bad.next + 1,
                state_count
            )));
        }
        Ok(IfaRule { state_count, table })
    }

    /// Convenience for `decode_rule(RuleNumber::new(value, state_count)?)`.
    pub fn from_number(value: u64, state_count: usize) -> Result<Self> {
        Ok(decode_rule(RuleNumber::new(value, state_count)?))
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    #[inline]
    pub fn transition(&self, state: usize, input: InputSign) -> Transition {
        self.table[2 * state + input.index()]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.table
    }

    pub fn number(&self) -> RuleNumber {
        encode_rule(self)
    }

    fn digits(&self) -> impl Iterator<Item = u64> + '_ {
        self.table
            .iter()
            .map(|t| 2 * t.next as u64 + t.output.digit())
    }
}

/// Textual form `k=<k>;<d0>,<d1>,...` with digits most significant first.
impl fmt::Display for IfaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={};", self.state_count)?;
        for (i, d) in self.digits().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for IfaRule {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::Parse {
            what: "rule",
            input: s.to_string(),
        };
        let (head, body) = s.trim().split_once(';').ok_or_else(bad)?;
        let k: usize = head
            .trim()
            .strip_prefix("k=")
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let body = body.trim();
        let digits: Vec<u64> = if body.contains(',') {
            body.split(',')
                .map(|d| d.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?
        } else {
            body.chars()
                .map(|c| c.to_digit(10).map(u64::from).ok_or_else(bad))
                .collect::<Result<_>>()?
        };
        let base = 2 * k as u64;
        if digits.iter().any(|&d| d >= base) {
            return Err(LabError::InvalidRule(format!(
                "digit out of range for base {base} in {s:?}"
            )));
        }
        let table = digits
            .into_iter()
            .map(|d| Transition::new((d / 2) as usize, if d % 2 == 1 { Action::Buy } else { Action::Sell }))
            .collect();
        IfaRule::new(k, table)
    }
}

/// Parses either a plain rule number (interpreted with `state_count`) or the
/// `k=<k>;<digits>` textual form.
pub fn parse_rule(text: &str, state_count: usize) -> Result<IfaRule> {
    let text = text.trim();
    if text.starts_with("k=") {
        text.parse()
    } else {
        let value: u64 = text.parse().map_err(|_| LabError::Parse {
            what: "rule number",
            input: text.to_string(),
        })?;
        IfaRule::from_number(value, state_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleNumber {
    value: u64,
    state_count: usize,
}

impl RuleNumber {
    pub fn new(value: u64, state_count: usize) -> Result<Self> {
        let bound = rule_space_size(state_count)?;
        if value >= bound {
            return Err(LabError::RuleOutOfRange {
                value,
                state_count,
                bound,
            });
        }
        Ok(RuleNumber { value, state_count })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn state_count(self) -> usize {
        self.state_count
    }
}

impl fmt::Display for RuleNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// `(2k)^(2k)`, or a capacity error when it does not fit in a `u64`.
pub fn rule_space_size(state_count: usize) -> Result<u64> {
    if state_count == 0 {
        return Err(LabError::InvalidRule("state count must be positive".into()));
    }
    let base = u64::try_from(2 * state_count).map_err(|_| LabError::Capacity { state_count })?;
    let exp = u32::try_from(2 * state_count).map_err(|_| LabError::Capacity { state_count })?;
    base.checked_pow(exp)
        .ok_or(LabError::Capacity { state_count })
}

pub fn decode_rule(number: RuleNumber) -> IfaRule {
    let k = number.state_count;
    let base = 2 * k as u64;
    let mut rest = number.value;
    let mut table = vec![Transition::new(0, Action::Sell); 2 * k];
    for slot in table.iter_mut().rev() {
        let d = rest % base;
        rest /= base;
        *slot = Transition::new(
            (d / 2) as usize,
            if d % 2 == 1 { Action::Buy } else { Action::Sell },
        );
    }
    debug_assert_eq!(rest, 0);
    IfaRule {
        state_count: k,
        table,
    }
}

pub fn encode_rule(rule: &IfaRule) -> RuleNumber {
    let base = 2 * rule.state_count as u64;
    // A valid rule's number is always below (2k)^(2k); wrapping can only occur
    // for state counts whose space overflows, which callers never enumerate.
    let value = rule
        .digits()
        .fold(0u64, |acc, d| acc.wrapping_mul(base).wrapping_add(d));
    RuleNumber {
        value,
        state_count: rule.state_count,
    }
}

/// Runs the automaton over `window` (most recent sign first) and returns the
/// output of the last transition taken.
pub fn run_ifa(rule: &IfaRule, window: &[InputSign]) -> Result<Action> {
    let (first, rest) = window
        .split_first()
        .ok_or_else(|| LabError::precondition("run_ifa needs a non-empty window"))?;
    let mut t = rule.transition(START_STATE, *first);
    for &sign in rest {
        t = rule.transition(t.next, sign);
    }
    Ok(t.output)
}

/// The rule with states renamed: old state `i` becomes `perm[i]`.
pub fn relabel(rule: &IfaRule, perm: &[usize]) -> IfaRule {
    let k = rule.state_count;
    debug_assert_eq!(perm.len(), k);
    let mut table = vec![Transition::new(0, Action::Sell); 2 * k];
    for state in 0..k {
        for input in [InputSign::Up, InputSign::Down] {
            let t = rule.transition(state, input);
            table[2 * perm[state] + input.index()] = Transition::new(perm[t.next], t.output);
        }
    }
    IfaRule {
        state_count: k,
        table,
    }
}

/// Up/down mirror: every input and every output negated.
pub fn mirror(rule: &IfaRule) -> IfaRule {
    let k = rule.state_count;
    let mut table = Vec::with_capacity(2 * k);
    for state in 0..k {
        for input in [InputSign::Up, InputSign::Down] {
            let t = rule.transition(state, !input);
            table.push(Transition::new(t.next, !t.output));
        }
    }
    IfaRule {
        state_count: k,
        table,
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Distinct images of `rule` under state relabeling and the up/down mirror,
/// sorted by rule number.
pub fn orbit(rule: &IfaRule) -> Vec<IfaRule> {
    let mirrored = mirror(rule);
    let mut members: Vec<IfaRule> = permutations(rule.state_count)
        .iter()
        .flat_map(|p| [relabel(rule, p), relabel(&mirrored, p)])
        .collect();
    members.sort_by_key(encode_rule);
    members.dedup();
    members
}

/// Least-numbered member of the rule's symmetry orbit.
pub fn canonical_form(rule: &IfaRule) -> IfaRule {
    orbit(rule)
        .into_iter()
        .next()
        .expect("orbit always contains the rule itself")
}

/// Every rule number for `state_count` states, ascending.
pub fn enumerate_rules(state_count: usize) -> Result<impl Iterator<Item = RuleNumber>> {
    let count = rule_space_size(state_count)?;
    Ok((0..count).map(move |value| RuleNumber { value, state_count }))
}

/// An automaton compiled for windows packed into a `u64` (bit `i` is the sign
/// `i` ticks ago, `Down = 1`). Consumes eight signs per table lookup.
#[derive(Clone, Debug)]
pub struct PackedIfa {
    rule: IfaRule,
    /// `(state << 8) | byte` -> (state after eight signs, last output).
    chunks: Vec<(u32, Action)>,
}

impl PackedIfa {
    pub fn new(rule: &IfaRule) -> Self {
        let k = rule.state_count;
        let mut chunks = Vec::with_capacity(k * 256);
        for state in 0..k {
            for byte in 0u64..256 {
                let mut s = state;
                let mut out = Action::Sell;
                for i in 0..8 {
                    let t = rule.transition(s, InputSign::from_bit(byte >> i));
                    s = t.next;
                    out = t.output;
                }
                chunks.push((s as u32, out));
            }
        }
        PackedIfa {
            rule: rule.clone(),
            chunks,
        }
    }

    pub fn rule(&self) -> &IfaRule {
        &self.rule
    }

    /// Decision for a packed window of `len >= 1` signs.
    #[inline]
    pub fn decide(&self, window: u64, len: u32) -> Action {
        debug_assert!((1..=64).contains(&len));
        let mut state = START_STATE;
        let mut out = Action::Sell;
        let mut bits = window;
        let mut remaining = len;
        while remaining >= 8 {
            let (s, o) = self.chunks[(state << 8) | (bits & 0xff) as usize];
            state = s as usize;
            out = o;
            bits >>= 8;
            remaining -= 8;
        }
        for _ in 0..remaining {
            let t = self.rule.transition(state, InputSign::from_bit(bits));
            state = t.next;
            out = t.output;
            bits >>= 1;
        }
        out
    }
}
