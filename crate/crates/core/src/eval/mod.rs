//! Time- and frequency-domain scoring of translated test signals.

mod fft;
mod metrics;

use std::fmt;
use std::str::FromStr;

pub use fft::{fft, fft_real, fft_real_complex, Spectrum};
pub use metrics::{mae, pearson_r};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Source X through G, compared with the paired Y.
    XToY,
    /// Source Y through F, compared with the paired X.
    YToX,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XToY => "x2y",
            Direction::YToX => "y2x",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2y" => Ok(Direction::XToY),
            "y2x" => Ok(Direction::YToX),
            other => Err(Error::Config(format!(
                "direction must be x2y or y2x, got `{other}`"
            ))),
        }
    }
}

/// Anything that maps a signal from one domain to the other.
pub trait Translator {
    fn translate(&self, signal: &[f64], direction: Direction) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMetrics {
    pub r_time: f64,
    pub mae_time: f64,
    pub r_freq: f64,
    pub mae_freq: f64,
}

impl PairMetrics {
    fn values(&self) -> [f64; 4] {
        [self.r_time, self.mae_time, self.r_freq, self.mae_freq]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self {
            r_time: v[0],
            mae_time: v[1],
            r_freq: v[2],
            mae_freq: v[3],
        }
    }
}

/// Scores a translation against its ground truth. The frequency-domain
/// comparison uses one-sided magnitude spectra scaled to unit peak.
pub fn compare(translated: &[f64], truth: &[f64]) -> Result<PairMetrics> {
    let st = fft_real(translated)?.unit_peak()?;
    let sg = fft_real(truth)?.unit_peak()?;
    Ok(PairMetrics {
        r_time: pearson_r(translated, truth)?,
        mae_time: mae(translated, truth)?,
        r_freq: pearson_r(&st, &sg)?,
        mae_freq: mae(&st, &sg)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub direction: Direction,
    pub pairs: Vec<PairMetrics>,
}

impl MetricReport {
    pub fn min(&self) -> PairMetrics {
        self.fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> PairMetrics {
        self.fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> PairMetrics {
        let n = self.pairs.len() as f64;
        let s = self.fold(0.0, |a, b| a + b).values();
        PairMetrics::from_values(s.map(|v| v / n))
    }

    fn fold(&self, init: f64, f: impl Fn(f64, f64) -> f64) -> PairMetrics {
        let mut acc = [init; 4];
        for p in &self.pairs {
            for (a, v) in acc.iter_mut().zip(p.values()) {
                *a = f(*a, v);
            }
        }
        PairMetrics::from_values(acc)
    }

    /// CSV rows (no header): one per pair, then `min`, `max`, `mean`.
    pub fn csv_rows(&self) -> Vec<String> {
        let row = |id: &str, m: &PairMetrics| {
            format!(
                "{id},{},{},{},{},{}",
                self.direction, m.r_time, m.mae_time, m.r_freq, m.mae_freq
            )
        };
        let mut rows: Vec<String> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, m)| row(&i.to_string(), m))
            .collect();
        rows.push(row("min", &self.min()));
        rows.push(row("max", &self.max()));
        rows.push(row("mean", &self.mean()));
        rows
    }
}

pub const REPORT_HEADER: &str = "pair_id,direction,r_time,mae_time,r_freq,mae_freq";

/// Full CSV document for one or more reports.
pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for line in reports.iter().flat_map(MetricReport::csv_rows) {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Translates each test source and scores it against its paired target.
pub fn evaluate<T: Translator + ?Sized>(
    model: &T,
    test_x: &[Vec<f64>],
    test_y: &[Vec<f64>],
    direction: Direction,
) -> Result<MetricReport> {
    if test_x.is_empty() || test_x.len() != test_y.len() {
        return Err(Error::Config(format!(
            "evaluation needs matching non-empty test pairs, got {} and {}",
            test_x.len(),
            test_y.len()
        )));
    }
    let (sources, targets) = match direction {
        Direction::XToY => (test_x, test_y),
        Direction::YToX => (test_y, test_x),
    };
    let pairs = sources
        .iter()
        .zip(targets)
        .map(|(src, truth)| compare(&model.translate(src, direction)?, truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport { direction, pairs })
}
