//! Elementary cellular automaton pollution model under three regimes:
//! plain evolution (anarchy), forced abstention (full a priori regulation)
//! and probabilistic retaliation by abstainers (noisy ex post justice).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::stats::complexity_score;

pub const DEFAULT_WIDTH: usize = 201;
pub const DEFAULT_STEPS: usize = 400;
pub const DEFAULT_ECA_RULE: u32 = 110;
pub const DEFAULT_JUSTICE_P: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaRegime {
    Anarchy,
    FullRegulation,
    ExPostJustice,
}

impl CaRegime {
    pub const ALL: [CaRegime; 3] = [
        CaRegime::Anarchy,
        CaRegime::FullRegulation,
        CaRegime::ExPostJustice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaRegime::Anarchy => "anarchy",
            CaRegime::FullRegulation => "full",
            CaRegime::ExPostJustice => "justice",
        }
    }
}

impl fmt::Display for CaRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaRegime {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "anarchy" => Ok(CaRegime::Anarchy),
            "full" | "full-regulation" => Ok(CaRegime::FullRegulation),
            "justice" | "ex-post-justice" => Ok(CaRegime::ExPostJustice),
            _ => Err(LabError::Parse {
                what: "CA regime",
                input: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaConfig {
    pub width: usize,
    /// Number of rows, including the initial one.
    pub steps: usize,
    pub eca_rule: u32,
    pub regime: CaRegime,
    pub justice_p: f64,
    pub seed: u64,
    pub initial: Vec<bool>,
}

/// A single polluter in the middle column.
pub fn center_row(width: usize) -> Vec<bool> {
    let mut row = vec![false; width];
    if width > 0 {
        row[width / 2] = true;
    }
    row
}

/// Parses `center` or an explicit string of `0`/`1` cells.
pub fn parse_initial(text: &str, width: usize) -> Result<Vec<bool>> {
    let text = text.trim();
    if text == "center" {
        return Ok(center_row(width));
    }
    let row: Vec<bool> = text
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(LabError::Parse {
                what: "initial row",
                input: text.to_string(),
            }),
        })
        .collect::<Result<_>>()?;
    if row.len() != width {
        return Err(LabError::precondition(format!(
            "initial row has {} cells but width is {width}",
            row.len()
        )));
    }
    Ok(row)
}

impl CaConfig {
    /// Rule 110, anarchy, centre seed, `p = 0.1`, generator seed 0.
    pub fn new(width: usize, steps: usize) -> Result<Self> {
        let config = CaConfig {
            width,
            steps,
            eca_rule: DEFAULT_ECA_RULE,
            regime: CaRegime::Anarchy,
            justice_p: DEFAULT_JUSTICE_P,
            seed: 0,
            initial: center_row(width),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_regime(&self, regime: CaRegime) -> Self {
        CaConfig {
            regime,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 3 {
            return Err(LabError::precondition(format!(
                "CA width must be at least 3, got {}",
                self.width
            )));
        }
        if self.steps == 0 {
            return Err(LabError::precondition("CA needs at least one row"));
        }
        if self.eca_rule > 255 {
            return Err(LabError::EcaRuleOutOfRange(self.eca_rule));
        }
        check_probability(self.justice_p)?;
        if self.initial.len() != self.width {
            return Err(LabError::precondition(format!(
                "initial row has {} cells but width is {}",
                self.initial.len(),
                self.width
            )));
        }
        Ok(())
    }

    /// Rightmost initially polluting column.
    pub fn seed_column(&self) -> Option<usize> {
        self.initial.iter().rposition(|&c| c)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LabError::precondition(format!(
            "probability must be in [0, 1], got {p}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaGrid {
    pub rows: Vec<Vec<bool>>,
}

impl CaGrid {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().flatten().filter(|&&c| c).count()
    }

    /// Row-major concatenation.
    pub fn bits(&self) -> Vec<bool> {
        self.rows.iter().flatten().copied().collect()
    }

    /// Plain PBM (`P1`), one grid row per line.
    pub fn to_pbm(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.width(), self.rows.len());
        for row in &self.rows {
            out.extend(row.iter().map(|&c| if c { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }
}

/// One elementary-CA update with zero cells beyond both edges.
pub fn eca_step(row: &[bool], rule: u32) -> Result<Vec<bool>> {
    if rule > 255 {
        return Err(LabError::EcaRuleOutOfRange(rule));
    }
    if row.len() < 3 {
        return Err(LabError::precondition(format!(
            "CA row must have at least 3 cells, got {}",
            row.len()
        )));
    }
    let cell = |i: isize| -> u32 {
        if i < 0 || i as usize >= row.len() {
            0
        } else {
            u32::from(row[i as usize])
        }
    };
    Ok((0..row.len() as isize)
        .map(|i| {
            let pattern = (cell(i - 1) << 2) | (cell(i) << 1) | cell(i + 1);
            (rule >> pattern) & 1 == 1
        })
        .collect())
}

/// Retaliation: each previous polluter, with probability `p`, makes one
/// uniformly chosen previous abstainer pollute in the new row.
pub fn apply_justice<R: Rng + ?Sized>(
    prev: &[bool],
    new: &[bool],
    p: f64,
    rng: &mut R,
) -> Result<Vec<bool>> {
    if prev.is_empty() || new.is_empty() {
        return Err(LabError::precondition("justice needs non-empty rows"));
    }
    if prev.len() != new.len() {
        return Err(LabError::precondition(format!(
            "row widths differ: {} vs {}",
            prev.len(),
            new.len()
        )));
    }
    check_probability(p)?;
    let mut out = new.to_vec();
    let abstainers: Vec<usize> = (0..prev.len()).filter(|&i| !prev[i]).collect();
    if abstainers.is_empty() {
        return Ok(out);
    }
    for _ in prev.iter().filter(|&&c| c) {
        if rng.random_bool(p) {
            out[abstainers[rng.random_range(0..abstainers.len())]] = true;
        }
    }
    Ok(out)
}

pub fn run_ca(config: &CaConfig) -> Result<CaGrid> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::with_capacity(config.steps);
    rows.push(config.initial.clone());
    for _ in 1..config.steps {
        let prev = rows.last().expect("row 0 present");
        let next = match config.regime {
            CaRegime::Anarchy => eca_step(prev, config.eca_rule)?,
            CaRegime::FullRegulation => vec![false; config.width],
            CaRegime::ExPostJustice => {
                let evolved = eca_step(prev, config.eca_rule)?;
                apply_justice(prev, &evolved, config.justice_p, &mut rng)?
            }
        };
        rows.push(next);
    }
    Ok(CaGrid { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeOutcome {
    pub regime: CaRegime,
    pub score: f64,
    pub pollution_rate: f64,
    /// Fraction of rows in which each column polluted.
    pub cell_frequency: Vec<f64>,
    pub right_half_polluted: bool,
    pub grid: CaGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaReport {
    pub config: CaConfig,
    pub outcomes: Vec<RegimeOutcome>,
}

impl CaReport {
    pub fn outcome(&self, regime: CaRegime) -> &RegimeOutcome {
        self.outcomes
            .iter()
            .find(|o| o.regime == regime)
            .expect("report holds every regime")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("regime,p,seed,score,pollution_rate,right_half_polluted\n");
        for o in &self.outcomes {
            let p = if o.regime == CaRegime::ExPostJustice {
                self.config.justice_p
            } else {
                0.0
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.regime, p, self.config.seed, o.score, o.pollution_rate, o.right_half_polluted
            ));
        }
        out
    }
}

pub fn summarize(config: &CaConfig, grid: CaGrid) -> Result<RegimeOutcome> {
    let cells = (grid.rows.len() * config.width) as f64;
    let score = complexity_score(&grid.bits())?;
    let mut counts = vec![0usize; config.width];
    for row in &grid.rows {
        for (c, &cell) in counts.iter_mut().zip(row) {
            *c += usize::from(cell);
        }
    }
    let rows = grid.rows.len() as f64;
    let right_half_polluted = match config.seed_column() {
        Some(col) => counts[col + 1..].iter().any(|&c| c > 0),
        None => counts.iter().any(|&c| c > 0),
    };
    Ok(RegimeOutcome {
        regime: config.regime,
        score,
        pollution_rate: grid.ones() as f64 / cells,
        cell_frequency: counts.iter().map(|&c| c as f64 / rows).collect(),
        right_half_polluted,
        grid,
    })
}

/// Runs all three regimes with otherwise identical parameters.
pub fn compare_regimes(config: &CaConfig) -> Result<CaReport> {
    config.validate()?;
    let outcomes = CaRegime::ALL
        .par_iter()
        .map(|&regime| {
            let c = config.with_regime(regime);
            summarize(&c, run_ca(&c)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaReport {
        config: config.clone(),
        outcomes,
    })
}
