//! The `ifa-lab` command line.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::ca::{self, CaConfig, CaRegime};
use crate::error::{LabError, Result};
use crate::ifa::parse_rule;
use crate::io::{ingest_returns, write_atomic, IngestFormat, RunManifest};
use crate::market::{self, all_cycles, cycle_length, simulate, TraderConfig, Window, CYCLE_CSV_HEADER};
use crate::regulation::{
    asymmetry_sweep, run_all_regimes, simulate_regulated, sweep_csv, InterventionKind, Regime,
    RegulatedRun, SWEEP_MA_WINDOWS, SWEEP_THRESHOLDS,
};
use crate::stats::{
    bucket_returns, moments, moments_csv_row, moments_with_lags, normal_benchmark,
    rolling_moments, rolling_sum_returns, MomentEstimates, ReturnSeries, MOMENTS_CSV_HEADER,
};
use crate::survey::{survey_rules, ComplexCriterion, Execution, SurveyConfig};
use crate::svg;

pub const THREADS_ENV: &str = "IFA_LAB_THREADS";
pub const DEFAULT_NORMAL_SEED: u64 = 20_240_101;

#[derive(Debug, Parser)]
#[command(name = "ifa-lab", version, about = "Automaton-trader market laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for CSV reports and the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots (requires --out).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TraderArgs {
    /// Rule number, or `k=<k>;<digits>`.
    #[arg(long, default_value = "54")]
    pub rule: String,
    /// States per rule when --rule is a number.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Lookback window in ticks.
    #[arg(long, default_value_t = 22)]
    pub n: u32,
    /// U/D string, most recent first, or allU / allD.
    #[arg(long, default_value = "allU")]
    pub seed_window: String,
}

impl TraderArgs {
    fn config(&self) -> Result<TraderConfig> {
        let rule = parse_rule(&self.rule, self.k)?;
        let seed = Window::parse(&self.seed_window, self.n)?;
        TraderConfig::new(rule, self.n, seed)
    }

    fn params(&self, config: &TraderConfig) -> Value {
        json!({
            "rule": config.rule.number().value(),
            "rule_text": config.rule.to_string(),
            "n": self.n,
            "seed_window": config.seed.to_string(),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct CaArgs {
    #[arg(long, default_value_t = ca::DEFAULT_WIDTH)]
    pub width: usize,
    /// Rows, including the initial one.
    #[arg(long, default_value_t = ca::DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, default_value_t = ca::DEFAULT_ECA_RULE)]
    pub eca_rule: u32,
    /// Retaliation probability for ex post justice.
    #[arg(long, default_value_t = ca::DEFAULT_JUSTICE_P)]
    pub p: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `center` or a 0/1 string of the grid width.
    #[arg(long, default_value = "center")]
    pub initial: String,
}

impl CaArgs {
    fn config(&self, regime: CaRegime) -> Result<CaConfig> {
        let config = CaConfig {
            width: self.width,
            steps: self.steps,
            eca_rule: self.eca_rule,
            regime,
            justice_p: self.p,
            seed: self.seed,
            initial: ca::parse_initial(&self.initial, self.width)?,
        };
        config.validate()?;
        Ok(config)
    }

    fn params(&self) -> Value {
        json!({
            "width": self.width,
            "steps": self.steps,
            "eca_rule": self.eca_rule,
            "p": self.p,
            "initial": self.initial,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a price path from one automaton trader.
    Simulate {
        #[command(flatten)]
        trader: TraderArgs,
        #[arg(long, default_value_t = 1000)]
        ticks: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Transient and period of the window orbit from the seed.
    Cycle {
        #[command(flatten)]
        trader: TraderArgs,
        /// Also enumerate every cycle of the window map (n <= 20).
        #[arg(long)]
        all_cycles: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Classify every rule with k states.
    Survey {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "6,10,14")]
        lookbacks: Vec<u32>,
        #[arg(long, default_value_t = 1 << 16)]
        horizon: usize,
        #[arg(long, default_value_t = 22)]
        bucket: usize,
        #[arg(long, default_value_t = 0.5)]
        complexity_threshold: f64,
        /// Permit k >= 4.
        #[arg(long)]
        allow_large: bool,
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Stylized-facts statistics of generated or ingested returns.
    Stats {
        /// Return series file; when absent the trader is simulated.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        format: String,
        #[command(flatten)]
        trader: TraderArgs,
        #[arg(long, default_value_t = 880_000)]
        ticks: usize,
        #[arg(long, default_value_t = 22)]
        bucket: usize,
        /// Rolling sums over overlapping windows instead of buckets.
        #[arg(long)]
        overlapping: bool,
        #[arg(long, default_value_t = 22)]
        max_lag: usize,
        #[arg(long, default_value_t = 250)]
        rolling_window: usize,
        #[arg(long, default_value_t = DEFAULT_NORMAL_SEED)]
        normal_seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Regulatory overrides on the trader.
    Regulate {
        #[command(flatten)]
        trader: TraderArgs,
        #[arg(long, default_value_t = 100_000)]
        ticks: usize,
        /// unregulated | prick[:ma,k[,budget]] | prop[:...] | both[:...]
        #[arg(long, default_value = "prick")]
        regime: String,
        /// Run all four regimes with the detector and budget of --regime.
        #[arg(long, conflicts_with = "sweep")]
        all_regimes: bool,
        /// PRICK vs BOTH over a grid of detector settings.
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 22)]
        bucket: usize,
        #[arg(long, default_value_t = 100)]
        rolling_window: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// One CA pollution regime.
    Ca {
        #[command(flatten)]
        grid: CaArgs,
        /// anarchy | full | justice
        #[arg(long, default_value = "anarchy")]
        regime: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// All three CA regimes side by side.
    Compare {
        #[command(flatten)]
        grid: CaArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-run a subcommand from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a subcommand produced, before it is written anywhere.
#[derive(Debug, Default)]
pub struct Outcome {
    pub subcommand: String,
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub svgs: Vec<(String, String)>,
    pub parameters: BTreeMap<String, Value>,
    pub seeds: BTreeMap<String, u64>,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new(subcommand: &str, params: Value) -> Self {
        let parameters = match params {
            Value::Object(map) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        Outcome {
            subcommand: subcommand.to_string(),
            parameters,
            ..Outcome::default()
        }
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn svg(&mut self, name: &str, contents: String) {
        self.svgs.push((name.to_string(), contents));
    }
}

fn kurtosis_or_nan(series: &ReturnSeries) -> (f64, f64) {
    match moments(series) {
        Ok(m) => (m.skewness, m.excess_kurtosis),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

fn rolling_csv(label: Option<&str>, rows: &[MomentEstimates]) -> String {
    let mut out = String::new();
    if label.is_some() {
        out.push_str("regime,");
    }
    out.push_str("index,mean,std_dev,skewness,excess_kurtosis\n");
    for (i, m) in rows.iter().enumerate() {
        if let Some(l) = label {
            out.push_str(l);
            out.push(',');
        }
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            m.mean, m.std_dev, m.skewness, m.excess_kurtosis
        ));
    }
    out
}

fn rolling_svg(title: &str, rows: &[MomentEstimates]) -> String {
    let std: Vec<f64> = rows.iter().map(|m| m.std_dev).collect();
    let skew: Vec<f64> = rows.iter().map(|m| m.skewness).collect();
    let kurt: Vec<f64> = rows.iter().map(|m| m.excess_kurtosis).collect();
    svg::lines(
        title,
        &[
            svg::Series { label: "std_dev", values: &std, color: "black" },
            svg::Series { label: "skewness", values: &skew, color: "steelblue" },
            svg::Series { label: "excess kurtosis", values: &kurt, color: "firebrick" },
        ],
    )
}

fn run_simulate(trader: &TraderArgs, ticks: usize) -> Result<Outcome> {
    let config = trader.config()?;
    let path = simulate(&config, ticks)?;
    let mut params = trader.params(&config);
    params["ticks"] = json!(ticks);
    let mut out = Outcome::new("simulate", params);
    let csv = path.to_csv();
    out.stdout = csv.clone();
    out.file("path.csv", csv);
    let prices: Vec<f64> = path.prices.iter().map(|&p| p as f64).collect();
    out.svg(
        "prices.svg",
        svg::lines(
            &format!("rule {} n={} prices", config.rule.number(), config.lookback),
            &[svg::Series { label: "price", values: &prices, color: "black" }],
        ),
    );
    Ok(out)
}

fn run_cycle(trader: &TraderArgs, every_cycle: bool) -> Result<Outcome> {
    let config = trader.config()?;
    let info = cycle_length(&config);
    let mut params = trader.params(&config);
    params["all_cycles"] = json!(every_cycle);
    let mut out = Outcome::new("cycle", params);
    let csv = format!("{CYCLE_CSV_HEADER}\n{}\n", market::cycle_csv_row(&config, info));
    out.stdout = csv.clone();
    out.file("cycle.csv", csv);
    if every_cycle {
        let mut s = String::from("period,least_window\n");
        for c in all_cycles(&config.rule, config.lookback)? {
            s.push_str(&format!("{},{}\n", c.period, Window::from_bits(c.least_window, config.lookback)?));
        }
        out.stdout.push_str(&s);
        out.file("cycles.csv", s);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_survey(
    k: usize,
    lookbacks: &[u32],
    horizon: usize,
    bucket: usize,
    threshold: f64,
    allow_large: bool,
    serial: bool,
) -> Result<Outcome> {
    let config = SurveyConfig {
        lookbacks: lookbacks.to_vec(),
        horizon,
        bucket_size: bucket,
        criterion: ComplexCriterion {
            min_tick_complexity: threshold,
        },
    };
    let exec = if serial { Execution::Serial } else { Execution::Parallel };
    let report = survey_rules(k, &config, allow_large, exec)?;
    let mut out = Outcome::new(
        "survey",
        json!({
            "k": k,
            "lookbacks": lookbacks,
            "horizon": horizon,
            "bucket": bucket,
            "complexity_threshold": threshold,
            "seed_window": "allU",
        }),
    );
    let csv = report.to_csv();
    out.stdout = csv.clone();
    out.file("survey.csv", csv);
    let summary = report.summary();
    out.notes.push(summary.trim_end().to_string());
    out.file("summary.txt", summary);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_stats(
    input: Option<&Path>,
    format: &str,
    trader: &TraderArgs,
    ticks: usize,
    bucket: usize,
    overlapping: bool,
    max_lag: usize,
    rolling_window: usize,
    normal_seed: u64,
) -> Result<Outcome> {
    let (series, mut params) = match input {
        Some(path) => {
            let fmt: IngestFormat = format.parse()?;
            (ingest_returns(path, fmt)?, json!({ "input": path.display().to_string(), "format": format }))
        }
        None => {
            let config = trader.config()?;
            let path = simulate(&config, ticks)?;
            let series = if overlapping {
                rolling_sum_returns(&path, bucket)?
            } else {
                bucket_returns(&path, bucket)?
            };
            let mut p = trader.params(&config);
            p["ticks"] = json!(ticks);
            p["bucket"] = json!(bucket);
            p["overlapping"] = json!(overlapping);
            (series, p)
        }
    };
    params["max_lag"] = json!(max_lag);
    params["rolling_window"] = json!(rolling_window);
    let lags: Vec<usize> = (1..=max_lag.min(series.len().saturating_sub(1))).collect();
    let m = moments_with_lags(&series, &lags)?;
    let normal = normal_benchmark(m.mean, m.std_dev, series.len(), normal_seed)?;
    let nm = moments_with_lags(&normal, &lags)?;

    let mut out = Outcome::new("stats", params);
    out.seeds.insert("normal".into(), normal_seed);
    let label = series.source.as_str();
    let moments_csv = format!(
        "{MOMENTS_CSV_HEADER}\n{}\n{}\n",
        moments_csv_row(label, series.len(), &m),
        moments_csv_row(normal.source.as_str(), normal.len(), &nm)
    );
    out.stdout = moments_csv.clone();
    out.file("moments.csv", moments_csv);

    let bound = 3.0 / (series.len() as f64).sqrt();
    let mut ac = format!("lag,{label},normal-benchmark,bound\n");
    for lag in &lags {
        ac.push_str(&format!("{lag},{},{},{bound}\n", m.autocorr[lag], nm.autocorr[lag]));
    }
    out.file("autocorr.csv", ac);

    let mut returns = format!("index,{label},normal-benchmark\n");
    for (i, (a, b)) in series.returns.iter().zip(&normal.returns).enumerate() {
        returns.push_str(&format!("{i},{a},{b}\n"));
    }
    out.file("returns.csv", returns);
    out.svg(
        "returns.svg",
        svg::scatter(
            "returns vs Normal with matched mean and std",
            &[
                svg::Series { label, values: &series.returns, color: "#1f3a93" },
                svg::Series { label: "normal benchmark", values: &normal.returns, color: "#f5a623" },
            ],
        ),
    );

    if rolling_window <= series.len() {
        match rolling_moments(&series, rolling_window) {
            Ok(rows) => {
                out.file("rolling.csv", rolling_csv(None, &rows));
                out.svg("rolling.svg", rolling_svg("rolling moments", &rows));
            }
            Err(e) => out.notes.push(format!("rolling moments skipped: {e}")),
        }
    }
    Ok(out)
}

fn regime_summary_row(run: &RegulatedRun, bucket: usize) -> String {
    let (skew, kurt) = bucket_returns(&run.path, bucket)
        .map(|s| kurtosis_or_nan(&s))
        .unwrap_or((f64::NAN, f64::NAN));
    format!(
        "{},\"{}\",{},{},{},{},{},{}",
        run.regime.kind.as_str(),
        run.regime,
        run.interventions.len(),
        run.count(InterventionKind::Prick),
        run.count(InterventionKind::Prop),
        run.budget_exhausted_at.map_or(String::new(), |t| t.to_string()),
        skew,
        kurt
    )
}

const REGIME_SUMMARY_HEADER: &str =
    "regime,spec,interventions,prick,prop,budget_exhausted_at,skewness,excess_kurtosis";

#[allow(clippy::too_many_arguments)]
fn run_regulate(
    trader: &TraderArgs,
    ticks: usize,
    regime_text: &str,
    all: bool,
    sweep: bool,
    bucket: usize,
    rolling_window: usize,
) -> Result<Outcome> {
    let config = trader.config()?;
    let regime: Regime = regime_text.parse()?;
    let mut params = trader.params(&config);
    params["ticks"] = json!(ticks);
    params["regime"] = json!(regime.to_string());
    params["all_regimes"] = json!(all);
    params["sweep"] = json!(sweep);
    params["bucket"] = json!(bucket);
    params["rolling_window"] = json!(rolling_window);
    let mut out = Outcome::new("regulate", params);

    if sweep {
        let rows = asymmetry_sweep(&config, &SWEEP_MA_WINDOWS, &SWEEP_THRESHOLDS, ticks)?;
        let csv = sweep_csv(&rows);
        out.stdout = csv.clone();
        out.file("sweep.csv", csv);
        return Ok(out);
    }

    let runs = if all {
        run_all_regimes(&config, regime.detector, regime.budget, ticks)?
    } else {
        vec![simulate_regulated(&config, &regime, ticks)?]
    };
    let mut summary = format!("{REGIME_SUMMARY_HEADER}\n");
    let mut prices = Vec::new();
    for run in &runs {
        let kind = run.regime.kind.as_str();
        summary.push_str(&regime_summary_row(run, bucket));
        summary.push('\n');
        out.file(&format!("run_{kind}.csv"), run.to_csv());
        prices.push((kind, run.path.prices.iter().map(|&p| p as f64).collect::<Vec<f64>>()));
        let series = bucket_returns(&run.path, bucket)?;
        if rolling_window <= series.len() {
            match rolling_moments(&series, rolling_window) {
                Ok(rows) => {
                    out.file(&format!("rolling_{kind}.csv"), rolling_csv(Some(kind), &rows));
                    out.svg(
                        &format!("rolling_{kind}.svg"),
                        rolling_svg(&format!("rolling moments, {kind}"), &rows),
                    );
                }
                Err(e) => out.notes.push(format!("{kind}: rolling moments skipped: {e}")),
            }
        }
    }
    let colors = ["black", "firebrick", "seagreen", "steelblue"];
    let series: Vec<svg::Series<'_>> = prices
        .iter()
        .zip(colors)
        .map(|((label, values), color)| svg::Series { label, values, color })
        .collect();
    out.svg("prices.svg", svg::lines("prices by regime", &series));
    out.stdout = summary.clone();
    out.file("regimes.csv", summary);
    Ok(out)
}

fn run_ca_one(grid: &CaArgs, regime_text: &str) -> Result<Outcome> {
    let regime: CaRegime = regime_text.parse()?;
    let config = grid.config(regime)?;
    let result = ca::run_ca(&config)?;
    let mut params = grid.params();
    params["regime"] = json!(regime.as_str());
    let mut out = Outcome::new("ca", params);
    out.seeds.insert("generator".into(), grid.seed);
    out.svg("grid.svg", svg::raster(&result.rows, 2));
    out.file("grid.pbm", result.to_pbm());
    let outcome = ca::summarize(&config, result)?;
    let report = ca::CaReport {
        config,
        outcomes: vec![outcome],
    };
    let csv = report.to_csv();
    out.stdout = csv.clone();
    out.file("ca.csv", csv);
    Ok(out)
}

fn run_compare(grid: &CaArgs) -> Result<Outcome> {
    let config = grid.config(CaRegime::Anarchy)?;
    let report = ca::compare_regimes(&config)?;
    let mut out = Outcome::new("compare", grid.params());
    out.seeds.insert("generator".into(), grid.seed);
    for o in &report.outcomes {
        out.file(&format!("grid_{}.pbm", o.regime), o.grid.to_pbm());
        out.svg(&format!("grid_{}.svg", o.regime), svg::raster(&o.grid.rows, 2));
    }
    let csv = report.to_csv();
    out.stdout = csv.clone();
    out.file("compare.csv", csv);
    Ok(out)
}

fn execute(command: &Command) -> Result<(Outcome, Option<OutputArgs>)> {
    Ok(match command {
        Command::Simulate { trader, ticks, output } => (run_simulate(trader, *ticks)?, Some(output.clone())),
        Command::Cycle { trader, all_cycles, output } => (run_cycle(trader, *all_cycles)?, Some(output.clone())),
        Command::Survey {
            k,
            lookbacks,
            horizon,
            bucket,
            complexity_threshold,
            allow_large,
            serial,
            output,
        } => (
            run_survey(*k, lookbacks, *horizon, *bucket, *complexity_threshold, *allow_large, *serial)?,
            Some(output.clone()),
        ),
        Command::Stats {
            input,
            format,
            trader,
            ticks,
            bucket,
            overlapping,
            max_lag,
            rolling_window,
            normal_seed,
            output,
        } => (
            run_stats(
                input.as_deref(),
                format,
                trader,
                *ticks,
                *bucket,
                *overlapping,
                *max_lag,
                *rolling_window,
                *normal_seed,
            )?,
            Some(output.clone()),
        ),
        Command::Regulate {
            trader,
            ticks,
            regime,
            all_regimes,
            sweep,
            bucket,
            rolling_window,
            output,
        } => (
            run_regulate(trader, *ticks, regime, *all_regimes, *sweep, *bucket, *rolling_window)?,
            Some(output.clone()),
        ),
        Command::Ca { grid, regime, output } => (run_ca_one(grid, regime)?, Some(output.clone())),
        Command::Compare { grid, output } => (run_compare(grid)?, Some(output.clone())),
        Command::Replay { .. } => unreachable!("replay is resolved before execution"),
    })
}

/// Arguments with any `--out` removed.
fn strip_out(args: &[String]) -> Vec<String> {
    let mut kept = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            kept.push(a.clone());
        }
    }
    kept
}

fn emit(outcome: &Outcome, output: &OutputArgs, argv: &[String]) -> Result<()> {
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    let Some(dir) = &output.out else {
        print!("{}", outcome.stdout);
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, contents) in &outcome.files {
        write_atomic(&dir.join(name), contents.as_bytes())?;
        written.push(name.clone());
    }
    if output.svg {
        for (name, contents) in &outcome.svgs {
            write_atomic(&dir.join(name), contents.as_bytes())?;
            written.push(name.clone());
        }
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: outcome.subcommand.clone(),
        argv: strip_out(argv),
        parameters: outcome.parameters.clone(),
        seeds: outcome.seeds.clone(),
        outputs: written,
    };
    manifest.write(dir)?;
    eprintln!("wrote {} files to {}", manifest.outputs.len() + 1, dir.display());
    Ok(())
}

fn run_parsed(cli: Cli, argv: &[String]) -> Result<()> {
    if let Command::Replay { manifest, out } = &cli.command {
        let m = RunManifest::read(manifest)?;
        let dir = match out {
            Some(d) => d.clone(),
            None => manifest
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        let mut args = vec![env!("CARGO_PKG_NAME").to_string()];
        args.extend(m.argv.iter().cloned());
        args.push("--out".into());
        args.push(dir.display().to_string());
        let replayed = Cli::try_parse_from(&args).map_err(|e| LabError::Parse {
            what: "manifest argv",
            input: e.to_string(),
        })?;
        if matches!(replayed.command, Command::Replay { .. }) {
            return Err(LabError::precondition("a manifest cannot replay another replay"));
        }
        return run_parsed(replayed, &args[1..]);
    }
    let (outcome, output) = execute(&cli.command)?;
    emit(&outcome, &output.expect("non-replay commands carry output args"), argv)
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var(THREADS_ENV).ok()?.trim().parse().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error");
            eprintln!("error kind=usage code=2 message={first:?}");
            let _ = e.print();
            return 2;
        }
    };
    let args = argv.get(1..).unwrap_or_default().to_vec();
    let result = match thread_pool() {
        Some(pool) => pool.install(|| run_parsed(cli, &args)),
        None => run_parsed(cli, &args),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "error kind={} code={} message={:?}",
                e.kind(),
                e.exit_code(),
                e.to_string()
            );
            e.exit_code()
        }
    }
}
