//! Exhaustive survey of small automaton rule spaces.
//!
//! Every rule is run from the all-UP seed at several lookbacks and measured
//! (cycle period, complexity of one orbit of ticks, kurtosis of bucketed
//! returns). A rule's own measurements give its direct label; the reported
//! label is the most complex direct label in its symmetry orbit, so labels
//! are constant on orbits.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::ifa::{canonical_form, decode_rule, encode_rule, enumerate_rules, orbit, rule_space_size, IfaRule, RuleNumber};
use crate::market::{cycle_length, simulate, TraderConfig};
use crate::stats::{bucket_returns, complexity_score, moments, DEFAULT_BUCKET_SIZE, MIN_COMPLEXITY_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Trivial,
    Periodic,
    Complex,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Trivial => "TRIVIAL",
            Label::Periodic => "PERIODIC",
            Label::Complex => "COMPLEX",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// COMPLEX needs both prongs: an orbit complexity of at least
/// `min_tick_complexity`, and a period of at least `2^n / n` at the largest
/// tested lookback `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexCriterion {
    pub min_tick_complexity: f64,
}

impl Default for ComplexCriterion {
    fn default() -> Self {
        ComplexCriterion {
            min_tick_complexity: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurveyConfig {
    pub lookbacks: Vec<u32>,
    pub horizon: usize,
    pub bucket_size: usize,
    pub criterion: ComplexCriterion,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        SurveyConfig {
            lookbacks: vec![6, 10, 14],
            horizon: 1 << 16,
            bucket_size: DEFAULT_BUCKET_SIZE,
            criterion: ComplexCriterion::default(),
        }
    }
}

impl SurveyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookbacks.is_empty() {
            return Err(LabError::precondition("survey needs at least one lookback"));
        }
        if let Some(&n) = self.lookbacks.iter().find(|&&n| !(2..=40).contains(&n)) {
            return Err(LabError::precondition(format!(
                "survey lookbacks must be in 2..=40, got {n}"
            )));
        }
        if self.horizon < MIN_COMPLEXITY_LEN.max(self.bucket_size * 4) {
            return Err(LabError::precondition(format!(
                "survey horizon {} too short",
                self.horizon
            )));
        }
        Ok(())
    }

    fn largest_lookback(&self) -> u32 {
        *self.lookbacks.iter().max().expect("validated non-empty")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleMeasurement {
    pub period_by_n: BTreeMap<u32, u64>,
    pub transient_by_n: BTreeMap<u32, u64>,
    /// Complexity of one full orbit of ticks at the largest lookback.
    pub tick_complexity: f64,
    /// NaN when the bucketed returns are constant.
    pub excess_kurtosis: f64,
}

pub fn measure_rule(rule: &IfaRule, config: &SurveyConfig) -> Result<RuleMeasurement> {
    let mut period_by_n = BTreeMap::new();
    let mut transient_by_n = BTreeMap::new();
    for &n in &config.lookbacks {
        let info = cycle_length(&TraderConfig::all_up(rule.clone(), n)?);
        period_by_n.insert(n, info.period);
        transient_by_n.insert(n, info.transient);
    }
    let n = config.largest_lookback();
    let path = simulate(&TraderConfig::all_up(rule.clone(), n)?, config.horizon)?;
    let orbit_len = (transient_by_n[&n] + period_by_n[&n]) as usize;
    let span = orbit_len.clamp(MIN_COMPLEXITY_LEN, config.horizon);
    let bits: Vec<bool> = path.ticks[..span].iter().map(|&t| t > 0).collect();
    let tick_complexity = complexity_score(&bits)?;
    let excess_kurtosis = match moments(&bucket_returns(&path, config.bucket_size)?) {
        Ok(m) => m.excess_kurtosis,
        Err(LabError::ZeroVariance) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(RuleMeasurement {
        period_by_n,
        transient_by_n,
        tick_complexity,
        excess_kurtosis,
    })
}

fn meets_period_prong(m: &RuleMeasurement, n: u32) -> bool {
    u128::from(m.period_by_n[&n]) * u128::from(n) >= 1u128 << n
}

pub fn direct_label(m: &RuleMeasurement, config: &SurveyConfig) -> Label {
    let n = config.largest_lookback();
    if m.period_by_n.values().all(|&p| p <= 2) {
        Label::Trivial
    } else if m.tick_complexity >= config.criterion.min_tick_complexity && meets_period_prong(m, n) {
        Label::Complex
    } else {
        Label::Periodic
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleClassification {
    pub rule: RuleNumber,
    pub canonical: RuleNumber,
    pub measurement: RuleMeasurement,
    pub direct_label: Label,
    /// Most complex direct label in the rule's orbit.
    pub label: Label,
}

/// Classifies one rule, measuring every member of its orbit.
pub fn classify_rule(rule: &IfaRule, config: &SurveyConfig) -> Result<RuleClassification> {
    config.validate()?;
    let measurement = measure_rule(rule, config)?;
    let direct = direct_label(&measurement, config);
    let mut label = direct;
    for member in orbit(rule) {
        if member != *rule {
            label = label.max(direct_label(&measure_rule(&member, config)?, config));
        }
    }
    Ok(RuleClassification {
        rule: encode_rule(rule),
        canonical: encode_rule(&canonical_form(rule)),
        measurement,
        direct_label: direct,
        label,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurveyReport {
    pub state_count: usize,
    pub config: SurveyConfig,
    /// Sorted by rule number.
    pub rows: Vec<RuleClassification>,
}

impl SurveyReport {
    /// Canonical representatives of the COMPLEX classes, ascending.
    pub fn complex_classes(&self) -> Vec<RuleNumber> {
        let mut classes: Vec<RuleNumber> = self
            .rows
            .iter()
            .filter(|r| r.label == Label::Complex)
            .map(|r| r.canonical)
            .collect();
        classes.sort();
        classes.dedup();
        classes
    }

    pub fn class_count(&self) -> usize {
        let mut c: Vec<RuleNumber> = self.rows.iter().map(|r| r.canonical).collect();
        c.sort();
        c.dedup();
        c.len()
    }

    /// For two-state rules: exactly one COMPLEX class, and it holds rule 54.
    pub fn uniqueness_holds(&self) -> Option<bool> {
        if self.state_count != 2 {
            return None;
        }
        let r54 = canonical_form(&decode_rule(RuleNumber::new(54, 2).ok()?));
        Some(self.complex_classes() == vec![encode_rule(&r54)])
    }

    /// Range `(lo, hi]` of complexity thresholds for which exactly one class
    /// (the one with the highest orbit complexity among those meeting the
    /// period prong) would be COMPLEX. `None` when no class meets the prong.
    pub fn unique_threshold_interval(&self) -> Option<(f64, f64)> {
        let n = self.config.largest_lookback();
        let mut best: BTreeMap<RuleNumber, f64> = BTreeMap::new();
        for r in &self.rows {
            if meets_period_prong(&r.measurement, n) {
                let e = best.entry(r.canonical).or_insert(f64::NEG_INFINITY);
                *e = e.max(r.measurement.tick_complexity);
            }
        }
        let mut scores: Vec<f64> = best.into_values().collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let hi = *scores.first()?;
        let lo = scores.get(1).copied().unwrap_or(0.0);
        Some((lo, hi))
    }

    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("rule,canonical,label");
        for n in &self.config.lookbacks {
            h.push_str(&format!(",period_n{n}"));
        }
        h.push_str(",tick_complexity,excess_kurtosis");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.rule, r.canonical, r.label));
            for n in &self.config.lookbacks {
                out.push_str(&format!(",{}", r.measurement.period_by_n[n]));
            }
            out.push_str(&format!(
                ",{},{}\n",
                r.measurement.tick_complexity, r.measurement.excess_kurtosis
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        let counts = self.label_counts();
        let mut s = format!(
            "k={} rules={} classes={} trivial={} periodic={} complex={}\n",
            self.state_count,
            self.rows.len(),
            self.class_count(),
            counts.get(&Label::Trivial).unwrap_or(&0),
            counts.get(&Label::Periodic).unwrap_or(&0),
            counts.get(&Label::Complex).unwrap_or(&0),
        );
        let classes: Vec<String> = self.complex_classes().iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("complex_classes=[{}]\n", classes.join(",")));
        s.push_str(&format!(
            "criterion: tick_complexity>={} and period(n={})>=2^n/n\n",
            self.config.criterion.min_tick_complexity,
            self.config.largest_lookback()
        ));
        if let Some((lo, hi)) = self.unique_threshold_interval() {
            s.push_str(&format!("single-class complexity thresholds: ({lo}, {hi}]\n"));
        }
        if let Some(u) = self.uniqueness_holds() {
            s.push_str(&format!("unique_complex_class_contains_54={u}\n"));
        }
        s
    }
}

pub const MAX_DEFAULT_SURVEY_K: usize = 3;

/// Classifies every `k`-state rule. `k > 3` is refused unless `allow_large`.
pub fn survey_rules(
    state_count: usize,
    config: &SurveyConfig,
    allow_large: bool,
    execution: Execution,
) -> Result<SurveyReport> {
    if state_count > MAX_DEFAULT_SURVEY_K && !allow_large {
        return Err(LabError::precondition(format!(
            "k={state_count} has {} rules; pass --allow-large to survey it",
            rule_space_size(state_count)?
        )));
    }
    config.validate()?;
    let numbers: Vec<RuleNumber> = enumerate_rules(state_count)?.collect();
    let measure = |n: &RuleNumber| -> Result<(RuleNumber, RuleNumber, RuleMeasurement)> {
        let rule = decode_rule(*n);
        let canonical = encode_rule(&canonical_form(&rule));
        Ok((*n, canonical, measure_rule(&rule, config)?))
    };
    let measured: Vec<_> = match execution {
        Execution::Serial => numbers.iter().map(measure).collect::<Result<_>>()?,
        Execution::Parallel => numbers.par_iter().map(measure).collect::<Result<_>>()?,
    };

    let mut class_label: BTreeMap<RuleNumber, Label> = BTreeMap::new();
    let direct: Vec<Label> = measured.iter().map(|(_, _, m)| direct_label(m, config)).collect();
    for ((_, canonical, _), &d) in measured.iter().zip(&direct) {
        let e = class_label.entry(*canonical).or_insert(d);
        *e = (*e).max(d);
    }
    let mut rows: Vec<RuleClassification> = measured
        .into_iter()
        .zip(direct)
        .map(|((rule, canonical, measurement), direct_label)| RuleClassification {
            rule,
            canonical,
            measurement,
            direct_label,
            label: class_label[&canonical],
        })
        .collect();
    rows.sort_by_key(|r| r.rule);
    Ok(SurveyReport {
        state_count,
        config: config.clone(),
        rows,
    })
}
