use std::fs;
use std::path::Path;

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::plot::render_svg;
use crate::cyclegan::{losses_csv, train_with, CycleGanModel, EpochLog, TrainConfig};
use crate::dataset::{generate_dataset, load_dataset, read_sig, save_dataset, write_sig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, reports_csv, Direction, MetricReport, Translator};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Synthesizes a dataset into `out`. The seed is mandatory.
pub fn gen_data(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<String> {
    let seed = seed.ok_or_else(|| {
        Error::Config(
            "--seed is required: datasets are only generated from an explicit seed".into(),
        )
    })?;
    let mut run = RunConfig::load(config)?;
    run.dataset.seed = seed;
    let ds = generate_dataset(&run.dataset)?;
    save_dataset(&ds, out)?;
    Ok(format!(
        "wrote {} train and {} test pairs of length {} (seed {}) to {}",
        ds.train_x.len(),
        ds.test_x.len(),
        run.dataset.window_length,
        seed,
        out.display()
    ))
}

#[derive(Clone, Debug, Default)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub lambda_cycle: Option<f64>,
    pub beta1: Option<f64>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lambda_cycle {
            cfg.lambda_cycle = v;
        }
        if let Some(v) = self.beta1 {
            cfg.beta1 = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

/// Trains on the dataset in `data`, writing `model.ckpt` and `losses.csv`
/// into `out`.
pub fn train(
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    overrides: &TrainOverrides,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    let mut cfg = RunConfig::load(config)?.train;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    let ds = load_dataset(data)?;
    let mut model = CycleGanModel::new(&cfg, ds.config.window_length)?;
    let logs = train_with(&mut model, &ds, &cfg, on_epoch)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Checkpoint::from_model(&model, &cfg).save(&out.join("model.ckpt"))?;
    write_text(&out.join("losses.csv"), &losses_csv(&logs))?;
    Ok(logs)
}

pub fn load_model(checkpoint: &Path) -> Result<CycleGanModel> {
    Ok(Checkpoint::load(checkpoint)?.to_model(checkpoint)?.0)
}

/// Applies G (`x2y`) or F (`y2x`) to every signal in `input`.
pub fn translate(
    checkpoint: &Path,
    input: &Path,
    direction: Direction,
    out: &Path,
) -> Result<usize> {
    let model = load_model(checkpoint)?;
    let signals = read_sig(input)?;
    let n = model.length();
    if let Some(bad) = signals.iter().find(|s| s.len() != n) {
        return Err(Error::ShapeMismatch {
            op: "translate",
            left: vec![n],
            right: vec![bad.len()],
        });
    }
    let translated = signals
        .iter()
        .map(|s| model.translate(s, direction))
        .collect::<Result<Vec<_>>>()?;
    write_sig(out, &translated)?;
    Ok(translated.len())
}

/// Scores `model` on the test pairs in `data` in both directions and
/// writes the CSV report.
pub fn eval_with<T: Translator + ?Sized>(
    model: &T,
    data: &Path,
    report: &Path,
) -> Result<Vec<MetricReport>> {
    let ds = load_dataset(data)?;
    let reports = [Direction::XToY, Direction::YToX]
        .into_iter()
        .map(|d| evaluate(model, &ds.test_x, &ds.test_y, d))
        .collect::<Result<Vec<_>>>()?;
    write_text(report, &reports_csv(&reports))?;
    Ok(reports)
}

pub fn eval(checkpoint: &Path, data: &Path, report: &Path) -> Result<Vec<MetricReport>> {
    eval_with(&load_model(checkpoint)?, data, report)
}

pub fn plot(signals: &[&Path], out: &Path, spectrum: bool) -> Result<()> {
    let series = signals
        .iter()
        .map(|p| read_sig(p))
        .collect::<Result<Vec<_>>>()?;
    write_text(out, &render_svg(&series, spectrum)?)
}
