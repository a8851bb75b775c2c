//! Bucketed returns and the stylized-facts statistics: moments,
//! autocorrelations, rolling estimates and a seeded Normal benchmark.

mod complexity;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use complexity::{complexity_score, lz76_phrase_count, MIN_COMPLEXITY_LEN};

use crate::error::{LabError, Result};
use crate::market::MarketPath;

pub const DEFAULT_BUCKET_SIZE: usize = 22;
pub const MIN_MOMENT_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesSource {
    Generated,
    Ingested,
    NormalBenchmark,
}

impl SeriesSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesSource::Generated => "generated",
            SeriesSource::Ingested => "ingested",
            SeriesSource::NormalBenchmark => "normal-benchmark",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    pub returns: Vec<f64>,
    pub source: SeriesSource,
}

impl ReturnSeries {
    pub fn new(returns: Vec<f64>, source: SeriesSource) -> Result<Self> {
        if let Some(i) = returns.iter().position(|x| !x.is_finite()) {
            return Err(LabError::precondition(format!(
                "return {i} is not finite ({})",
                returns[i]
            )));
        }
        Ok(ReturnSeries { returns, source })
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsConfig {
    pub bucket_size: usize,
    pub lags: Vec<usize>,
    pub rolling_window: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            bucket_size: DEFAULT_BUCKET_SIZE,
            lags: (1..=22).collect(),
            rolling_window: 250,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimates {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub autocorr: BTreeMap<usize, f64>,
}

/// Non-overlapping buckets of `bucket_size` ticks; each return is the mean
/// tick of its bucket. A trailing partial bucket is dropped.
pub fn bucket_returns(path: &MarketPath, bucket_size: usize) -> Result<ReturnSeries> {
    if bucket_size == 0 {
        return Err(LabError::precondition("bucket size must be positive"));
    }
    if path.len() < bucket_size {
        return Err(LabError::TooShort {
            len: path.len(),
            needed: bucket_size,
        });
    }
    let b = bucket_size as f64;
    let returns = path
        .ticks
        .chunks_exact(bucket_size)
        .map(|c| c.iter().map(|&t| f64::from(t)).sum::<f64>() / b)
        .collect();
    ReturnSeries::new(returns, SeriesSource::Generated)
}

/// Overlapping variant: mean tick of every run of `bucket_size` consecutive
/// ticks, advancing one tick at a time.
pub fn rolling_sum_returns(path: &MarketPath, bucket_size: usize) -> Result<ReturnSeries> {
    if bucket_size == 0 {
        return Err(LabError::precondition("bucket size must be positive"));
    }
    if path.len() < bucket_size {
        return Err(LabError::TooShort {
            len: path.len(),
            needed: bucket_size,
        });
    }
    let b = bucket_size as f64;
    let mut sum: i64 = path.ticks[..bucket_size].iter().map(|&t| i64::from(t)).sum();
    let mut returns = Vec::with_capacity(path.len() - bucket_size + 1);
    returns.push(sum as f64 / b);
    for i in bucket_size..path.len() {
        sum += i64::from(path.ticks[i]) - i64::from(path.ticks[i - bucket_size]);
        returns.push(sum as f64 / b);
    }
    ReturnSeries::new(returns, SeriesSource::Generated)
}

struct Central {
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

fn central_moments(xs: &[f64]) -> Result<Central> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 || m2.sqrt() <= 1e-13 * scale {
        return Err(LabError::ZeroVariance);
    }
    Ok(Central { mean, m2, m3, m4 })
}

fn autocorr_of(xs: &[f64], mean: f64, lag: usize) -> f64 {
    let denom: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let num: f64 = xs
        .iter()
        .zip(&xs[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    num / denom
}

fn estimates(xs: &[f64], lags: &[usize]) -> Result<MomentEstimates> {
    if xs.len() < MIN_MOMENT_LEN {
        return Err(LabError::TooShort {
            len: xs.len(),
            needed: MIN_MOMENT_LEN,
        });
    }
    let c = central_moments(xs)?;
    let mut autocorr = BTreeMap::new();
    autocorr.insert(0, 1.0);
    for &lag in lags {
        if lag >= xs.len() {
            return Err(LabError::precondition(format!(
                "lag {lag} must be below series length {}",
                xs.len()
            )));
        }
        if lag > 0 {
            autocorr.insert(lag, autocorr_of(xs, c.mean, lag));
        }
    }
    Ok(MomentEstimates {
        mean: c.mean,
        std_dev: c.m2.sqrt(),
        skewness: c.m3 / c.m2.powf(1.5),
        excess_kurtosis: c.m4 / (c.m2 * c.m2) - 3.0,
        autocorr,
    })
}

/// Population moments; `autocorr` holds only lag 0.
pub fn moments(series: &ReturnSeries) -> Result<MomentEstimates> {
    estimates(&series.returns, &[])
}

pub fn moments_with_lags(series: &ReturnSeries, lags: &[usize]) -> Result<MomentEstimates> {
    estimates(&series.returns, lags)
}

pub fn autocorrelation(series: &ReturnSeries, lag: usize) -> Result<f64> {
    let xs = &series.returns;
    if lag >= xs.len() {
        return Err(LabError::precondition(format!(
            "lag {lag} must be below series length {}",
            xs.len()
        )));
    }
    let c = central_moments(xs)?;
    if lag == 0 {
        return Ok(1.0);
    }
    Ok(autocorr_of(xs, c.mean, lag))
}

/// Estimates over every contiguous window of `window` returns.
pub fn rolling_moments(series: &ReturnSeries, window: usize) -> Result<Vec<MomentEstimates>> {
    if window == 0 || window > series.len() {
        return Err(LabError::precondition(format!(
            "rolling window {window} must be in 1..={}",
            series.len()
        )));
    }
    series
        .returns
        .windows(window)
        .enumerate()
        .map(|(i, w)| {
            estimates(w, &[]).map_err(|e| match e {
                LabError::ZeroVariance => LabError::precondition(format!(
                    "rolling window starting at {i} has zero variance"
                )),
                other => other,
            })
        })
        .collect()
}

/// `count` Normal draws from a ChaCha8 stream seeded with `seed`.
pub fn normal_benchmark(mean: f64, std: f64, count: usize, seed: u64) -> Result<ReturnSeries> {
    if std < 0.0 || !std.is_finite() || !mean.is_finite() {
        return Err(LabError::precondition(format!(
            "normal benchmark needs finite mean and std >= 0, got mean {mean}, std {std}"
        )));
    }
    let normal = Normal::new(mean, std)
        .map_err(|e| LabError::precondition(format!("normal benchmark: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let returns = (0..count).map(|_| normal.sample(&mut rng)).collect();
    ReturnSeries::new(returns, SeriesSource::NormalBenchmark)
}

pub const MOMENTS_CSV_HEADER: &str = "series,count,mean,std_dev,skewness,excess_kurtosis";

pub fn moments_csv_row(label: &str, count: usize, m: &MomentEstimates) -> String {
    format!(
        "{label},{count},{},{},{},{}",
        m.mean, m.std_dev, m.skewness, m.excess_kurtosis
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(xs: Vec<f64>) -> ReturnSeries {
        ReturnSeries::new(xs, SeriesSource::Generated).unwrap()
    }

    fn alternating(len: usize) -> ReturnSeries {
        series((0..len).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect())
    }

    /// Textbook four-pass reference.
    fn four_pass(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let third = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let fourth = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, var.sqrt(), third / var.powf(1.5), fourth / (var * var) - 3.0)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-15
    }

    #[test]
    fn bucket_examples() {
        let p = MarketPath::from_ticks(vec![1, 1, -1, -1, 1, 1]);
        assert_eq!(bucket_returns(&p, 2).unwrap().returns, vec![1.0, -1.0, 1.0]);

        let cycle = [-1i8, -1, 1, -1, 1, 1, 1];
        let p = MarketPath::from_ticks(cycle.iter().cycle().take(70).copied().collect());
        let r = bucket_returns(&p, 7).unwrap();
        assert_eq!(r.len(), 10);
        assert!(r.returns.iter().all(|&x| (x - 1.0 / 7.0).abs() < 1e-15));

        let p = MarketPath::from_ticks(vec![1; 23]);
        assert_eq!(bucket_returns(&p, 22).unwrap().len(), 1);
        assert!(matches!(
            bucket_returns(&MarketPath::from_ticks(vec![1; 21]), 22),
            Err(LabError::TooShort { .. })
        ));
    }

    #[test]
    fn overlapping_variant() {
        let p = MarketPath::from_ticks(vec![1, 1, -1, -1, 1]);
        assert_eq!(rolling_sum_returns(&p, 2).unwrap().returns, vec![1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn alternating_moments() {
        let m = moments(&alternating(1000)).unwrap();
        assert!(m.mean.abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-12);
        assert!((m.excess_kurtosis + 2.0).abs() < 1e-12);
        assert_eq!(m.autocorr[&0], 1.0);
        let r1 = autocorrelation(&alternating(1000), 1).unwrap();
        assert!((r1 + 1.0).abs() <= 2.0 / 1000.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(moments(&series(vec![0.3; 10])), Err(LabError::ZeroVariance)));
        assert!(matches!(moments(&series(vec![0.0; 10])), Err(LabError::ZeroVariance)));
        assert!(matches!(moments(&series(vec![1.0, 2.0, 3.0])), Err(LabError::TooShort { .. })));
        assert!(autocorrelation(&alternating(10), 10).is_err());
        assert!(autocorrelation(&series(vec![2.0; 10]), 1).is_err());
        assert_eq!(autocorrelation(&alternating(10), 0).unwrap(), 1.0);
        assert!(ReturnSeries::new(vec![1.0, f64::NAN], SeriesSource::Ingested).is_err());
    }

    #[test]
    fn normal_benchmark_contract() {
        let c = normal_benchmark(0.25, 0.0, 50, 1).unwrap();
        assert!(c.returns.iter().all(|&x| x == 0.25));
        assert_eq!(normal_benchmark(0.0, 1.0, 100, 9).unwrap(), normal_benchmark(0.0, 1.0, 100, 9).unwrap());
        assert_ne!(normal_benchmark(0.0, 1.0, 100, 9).unwrap(), normal_benchmark(0.0, 1.0, 100, 10).unwrap());
        assert!(normal_benchmark(0.0, -1.0, 10, 1).is_err());
    }

    #[test]
    fn normal_benchmark_large_sample() {
        let s = normal_benchmark(0.0, 1.0, 1_000_000, 20_240_101).unwrap();
        let m = moments(&s).unwrap();
        assert!(m.mean.abs() < 0.005, "{}", m.mean);
        assert!((m.std_dev - 1.0).abs() < 0.005, "{}", m.std_dev);
        assert!(m.skewness.abs() < 0.02, "{}", m.skewness);
        assert!(m.excess_kurtosis.abs() < 0.05, "{}", m.excess_kurtosis);

        let short = normal_benchmark(0.0, 1.0, 100_000, 3).unwrap();
        assert!(autocorrelation(&short, 1).unwrap().abs() < 0.01);
    }

    #[test]
    fn rolling_examples() {
        let alt = alternating(200);
        for m in rolling_moments(&alt, 50).unwrap() {
            assert!((m.excess_kurtosis + 2.0).abs() < 1e-12);
        }
        let whole = rolling_moments(&alt, 200).unwrap();
        assert_eq!(whole, vec![moments(&alt).unwrap()]);
        assert!(rolling_moments(&alt, 201).is_err());

        let calm = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 });
        let wild = (0..200).map(|i| if i % 2 == 0 { 3.0 } else { -3.0 });
        let s = series(calm.chain(wild).collect());
        let roll = rolling_moments(&s, 40).unwrap();
        let calm_max = roll[..160].iter().map(|m| m.std_dev).fold(0.0, f64::max);
        assert!(roll[200..].iter().all(|m| m.std_dev > calm_max));
    }

    proptest! {
        #[test]
        fn agrees_with_four_pass(xs in proptest::collection::vec(-5.0f64..5.0, 8..200)) {
            let s = series(xs.clone());
            let m = moments(&s).unwrap();
            let (mean, sd, skew, kurt) = four_pass(&xs);
            prop_assert!(rel_close(m.mean, mean, 1e-12));
            prop_assert!(rel_close(m.std_dev, sd, 1e-12));
            prop_assert!(rel_close(m.skewness, skew, 1e-12) || (m.skewness - skew).abs() < 1e-12);
            prop_assert!(rel_close(m.excess_kurtosis, kurt, 1e-12));
        }

        #[test]
        fn scale_and_shift(xs in proptest::collection::vec(-5.0f64..5.0, 8..200), c in 0.01f64..100.0, shift in -10.0f64..10.0) {
            let base = moments_with_lags(&series(xs.clone()), &[1, 2, 3]).unwrap();
            let scaled = moments_with_lags(&series(xs.iter().map(|x| x * c).collect()), &[1, 2, 3]).unwrap();
            prop_assert!(rel_close(scaled.std_dev, c * base.std_dev, 1e-12));
            prop_assert!((scaled.skewness - base.skewness).abs() <= 1e-12 * base.skewness.abs().max(1.0));
            prop_assert!((scaled.excess_kurtosis - base.excess_kurtosis).abs() <= 1e-12 * base.excess_kurtosis.abs().max(1.0));
            for lag in 1..=3 {
                prop_assert!((scaled.autocorr[&lag] - base.autocorr[&lag]).abs() <= 1e-12);
            }
            let shifted = moments(&series(xs.iter().map(|x| x + shift).collect())).unwrap();
            prop_assert!((shifted.mean - base.mean - shift).abs() < 1e-9);
            prop_assert!((shifted.std_dev - base.std_dev).abs() < 1e-9 * base.std_dev.max(1.0));
            prop_assert!((shifted.skewness - base.skewness).abs() < 1e-6);
        }

        #[test]
        fn autocorr_in_unit_interval(xs in proptest::collection::vec(-5.0f64..5.0, 8..100), lag in 1usize..7) {
            let r = autocorrelation(&series(xs), lag).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
        }

        #[test]
        fn buckets_conserve_total(ticks in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..300), b in 1usize..30) {
            prop_assume!(ticks.len() >= b);
            let path = MarketPath::from_ticks(ticks.clone());
            let r = bucket_returns(&path, b).unwrap();
            let included: i64 = ticks[..r.len() * b].iter().map(|&t| i64::from(t)).sum();
            let total: f64 = r.returns.iter().sum::<f64>() * b as f64;
            prop_assert!((total - included as f64).abs() < 1e-9);
        }
    }
}
