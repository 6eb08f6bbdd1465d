//! Runs every acceptance criterion and prints one PASS/FAIL line each.

mod common;

use std::f64::consts::{PI, TAU};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use sig2sig::cli::checkpoint::Checkpoint;
use sig2sig::cyclegan::{CycleGanModel, TrainConfig};
use sig2sig::dataset::{
    decode_sig, encode_sig, generate_dataset, generate_pairs, load_dataset, save_dataset,
    DatasetConfig, SeededRng,
};
use sig2sig::eval::{evaluate, fft_real_complex, mae, pearson_r, Direction, Translator};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sig2sig"))
        .args(args)
        .output()
        .unwrap()
}

fn cli_ok(args: &[&str]) -> Result<(), String> {
    let out = run_cli(args);
    ensure(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gradients() -> Outcome {
    let mut worst_layer = ("", 0.0f64);
    for (i, kind) in common::LAYER_KINDS.iter().enumerate() {
        let w = common::layer_worst(kind, 100, 1000 + i as u64);
        if w > worst_layer.1 {
            worst_layer = (kind, w);
        }
    }
    let g = common::network_worst(common::Net::Generator, 100, 7);
    let d = common::network_worst(common::Net::Discriminator, 100, 8);
    let detail = format!(
        "worst layer {} {:.1e} (< 1e-5), U-Net {g:.1e}, PatchGAN {d:.1e} (< 1e-4); 100 instances each",
        worst_layer.0, worst_layer.1
    );
    ensure(worst_layer.1 < 1e-5 && g < 1e-4 && d < 1e-4, detail.clone())?;
    Ok(detail)
}

fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    v * Complex64::from_polar(1.0, -TAU * ((k * j) % n) as f64 / n as f64)
                })
                .sum()
        })
        .collect()
}

fn fft_oracle() -> Outcome {
    let mut rng = SeededRng::new(2);
    let (mut worst_bin, mut worst_parseval) = (0.0f64, 0.0f64);
    for log_n in 3..=10 {
        let n = 1usize << log_n;
        for _ in 0..4 {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let fast = fft_real_complex(&x).map_err(|e| e.to_string())?;
            for (a, b) in fast.iter().zip(naive_dft(&x)) {
                worst_bin = worst_bin.max((a - b).norm());
            }
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq: f64 = fast.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            worst_parseval = worst_parseval.max((time - freq).abs() / time);
        }
    }
    let detail = format!("max |FFT - DFT| {worst_bin:.1e} (< 1e-9), Parseval rel {worst_parseval:.1e} (< 1e-10), N = 8..1024");
    ensure(worst_bin < 1e-9 && worst_parseval < 1e-10, detail.clone())?;
    Ok(detail)
}

fn same_dir(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        ensure(
            fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).map_err(|e| e.to_string())?,
            format!("{name:?} differs"),
        )?;
    }
    Ok(names.len())
}

fn reproducibility(work: &Path) -> Outcome {
    let (d1, d2) = (work.join("data1"), work.join("data2"));
    cli_ok(&["gen-data", "--out", p(&d1), "--seed", "42"])?;
    cli_ok(&["gen-data", "--out", p(&d2), "--seed", "42"])?;
    let files = same_dir(&d1, &d2)?;
    let start = Instant::now();
    for run in ["run1", "run2"] {
        cli_ok(&[
            "train",
            "--data",
            p(&d1),
            "--out",
            p(&work.join(run)),
            "--seed",
            "0",
            "--quiet",
        ])?;
    }
    let secs = start.elapsed().as_secs_f64() / 2.0;
    for f in ["model.ckpt", "losses.csv"] {
        ensure(
            fs::read(work.join("run1").join(f)).unwrap()
                == fs::read(work.join("run2").join(f)).unwrap(),
            format!("{f} differs between identical training runs"),
        )?;
    }
    Ok(format!(
        "gen-data seed 42 twice: {files} identical files; two default 100-epoch runs ({secs:.0}s each): identical model.ckpt and losses.csv"
    ))
}

fn column_means(report: &str, direction: &str) -> (f64, f64) {
    let row = report
        .lines()
        .find(|l| l.starts_with(&format!("mean,{direction},")))
        .unwrap();
    let v: Vec<f64> = row.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
    (v[0], v[2])
}

fn paper_shape(work: &Path) -> Outcome {
    let report = work.join("report.csv");
    let run = work.join("run1");
    cli_ok(&[
        "eval",
        "--checkpoint",
        p(&run.join("model.ckpt")),
        "--data",
        p(&work.join("data1")),
        "--report",
        p(&report),
    ])?;
    let text = fs::read_to_string(&report).unwrap();
    let losses = fs::read_to_string(run.join("losses.csv")).unwrap();
    let cycle = |line: &str| -> f64 {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        v[5] + v[6]
    };
    let rows: Vec<&str> = losses.lines().skip(1).collect();
    let (first, last) = (cycle(rows[0]), cycle(rows[rows.len() - 1]));
    let mut detail = Vec::new();
    let mut pass = last < 0.3 * first;
    for dir in ["x2y", "y2x"] {
        let (r_time, r_freq) = column_means(&text, dir);
        pass &= r_freq > r_time && r_freq >= 0.5;
        detail.push(format!(
            "{dir}: mean r_freq {r_freq:.3} vs r_time {r_time:.3}"
        ));
    }
    detail.push(format!(
        "cycle loss {first:.3} -> {last:.3} (ratio {:.3}, need < 0.3)",
        last / first
    ));
    let detail = detail.join("; ");
    ensure(pass, detail.clone())?;
    Ok(detail)
}

struct Oracle {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl Translator for Oracle {
    fn translate(&self, signal: &[f64], direction: Direction) -> sig2sig::Result<Vec<f64>> {
        let (src, dst) = match direction {
            Direction::XToY => (&self.x, &self.y),
            Direction::YToX => (&self.y, &self.x),
        };
        Ok(dst[src.iter().position(|v| v == signal).unwrap()].clone())
    }
}

fn metrics() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let a = [1.0, 2.0, 3.0, 4.0];
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    ensure(close(pearson_r(&a, &a).unwrap(), 1.0), "r(a, a) != 1")?;
    ensure(close(pearson_r(&a, &neg).unwrap(), -1.0), "r(a, -a) != -1")?;
    ensure(
        close(pearson_r(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8),
        "r != 0.8",
    )?;
    ensure(pearson_r(&[2.0; 4], &a).is_err(), "zero variance accepted")?;
    ensure(mae(&a, &a).unwrap() == 0.0, "mae(a, a) != 0")?;
    ensure(
        close(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0),
        "mae != 1",
    )?;
    ensure(
        mae(&a, &neg).unwrap() == mae(&neg, &a).unwrap(),
        "mae asymmetric",
    )?;
    ensure(mae(&a, &[1.0]).is_err(), "length mismatch accepted")?;
    let ds = generate_dataset(&DatasetConfig {
        seed: 42,
        ..Default::default()
    })
    .unwrap();
    let oracle = Oracle {
        x: ds.test_x.clone(),
        y: ds.test_y.clone(),
    };
    let mut pairs = 0;
    for dir in [Direction::XToY, Direction::YToX] {
        let report = evaluate(&oracle, &ds.test_x, &ds.test_y, dir).unwrap();
        for m in &report.pairs {
            ensure(
                close(m.r_time, 1.0) && m.mae_time == 0.0,
                format!("oracle scored {m:?}"),
            )?;
            pairs += 1;
        }
    }
    Ok(format!(
        "pearson/mae examples exact to 1e-12; oracle gives r_time = 1, mae_time = 0 on {pairs} pair evaluations"
    ))
}

fn asynchronicity() -> Outcome {
    let mean_r = |max_phase: f64| {
        let (train, test) = generate_pairs(&DatasetConfig {
            max_phase,
            seed: 42,
            ..Default::default()
        })
        .unwrap();
        let all: Vec<_> = train.iter().chain(&test).collect();
        all.iter()
            .map(|p| pearson_r(&p.x, &p.y).unwrap())
            .sum::<f64>()
            / all.len() as f64
    };
    let rs = [mean_r(0.0), mean_r(PI), mean_r(TAU)];
    let (train, test) = generate_pairs(&DatasetConfig {
        max_phase: 0.0,
        spectral_tilt: false,
        seed: 42,
        ..Default::default()
    })
    .unwrap();
    let identical = train.iter().chain(&test).all(|p| p.x == p.y);
    let detail = format!(
        "seed 42 mean paired r at max_phase 0, pi, 2pi: {:.4}, {:.4}, {:.4}; untilted synchronous x == y: {identical}",
        rs[0], rs[1], rs[2]
    );
    ensure(
        rs[0] >= rs[1] && rs[1] >= rs[2] && identical,
        detail.clone(),
    )?;
    Ok(detail)
}

fn exit_code(args: &[&str]) -> Option<i32> {
    run_cli(args).status.code()
}

fn formats(work: &Path) -> Outcome {
    let ds = generate_dataset(&DatasetConfig {
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let (a, b) = (work.join("fa"), work.join("fb"));
    save_dataset(&ds, &a).unwrap();
    save_dataset(&load_dataset(&a).unwrap(), &b).unwrap();
    same_dir(&a, &b)?;
    let sig = encode_sig(&ds.train_x).unwrap();
    ensure(
        encode_sig(&decode_sig(&sig, Path::new("t.sig")).unwrap()).unwrap() == sig,
        ".sig round trip differs",
    )?;

    let cfg = TrainConfig {
        base_channels: 4,
        seed: 3,
        ..Default::default()
    };
    let model = CycleGanModel::new(&cfg, 128).unwrap();
    let ckpt = work.join("m.ckpt");
    Checkpoint::from_model(&model, &cfg).save(&ckpt).unwrap();
    let (back, back_cfg) = Checkpoint::load(&ckpt).unwrap().to_model(&ckpt).unwrap();
    let again = Checkpoint::from_model(&back, &back_cfg).encode().unwrap();
    ensure(
        again == fs::read(&ckpt).unwrap(),
        "checkpoint round trip differs",
    )?;

    let input = a.join("test_x.sig");
    let out = work.join("o.sig");
    let translate = |ck: &Path, inp: &Path| {
        exit_code(&[
            "translate",
            "--checkpoint",
            p(ck),
            "--input",
            p(inp),
            "--direction",
            "x2y",
            "--out",
            p(&out),
        ])
    };
    ensure(
        translate(&ckpt, &input) == Some(0),
        "translate on valid files failed",
    )?;
    let corrupt = |src: &Path, name: &str, f: &dyn Fn(&mut Vec<u8>)| {
        let mut bytes = fs::read(src).unwrap();
        f(&mut bytes);
        let dst = work.join(name);
        fs::write(&dst, bytes).unwrap();
        dst
    };
    let codes = [
        translate(&corrupt(&ckpt, "magic.ckpt", &|b| b[0] = b'Z'), &input),
        translate(
            &corrupt(&ckpt, "cut.ckpt", &|b| b.truncate(b.len() / 2)),
            &input,
        ),
        translate(&ckpt, &corrupt(&input, "magic.sig", &|b| b[3] = b'0')),
        translate(
            &ckpt,
            &corrupt(&input, "cut.sig", &|b| b.truncate(b.len() - 5)),
        ),
    ];
    ensure(
        codes.iter().all(|c| *c == Some(3)),
        format!("exit codes {codes:?}, expected 3"),
    )?;
    Ok(".sig, dataset directory and checkpoint save->load->save byte-identical; corrupted magic/truncation exit 3".into())
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let criteria: [(&str, Check); 7] = [
        ("gradient correctness", Box::new(gradients)),
        ("FFT oracle equivalence", Box::new(fft_oracle)),
        ("bit-reproducibility", Box::new(|| reproducibility(w))),
        ("qualitative reproduction", Box::new(|| paper_shape(w))),
        ("metric unit tests", Box::new(metrics)),
        ("asynchronicity property", Box::new(asynchronicity)),
        ("format round-trips", Box::new(|| formats(w))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
