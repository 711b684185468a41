//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use forgeda_core::da_train::*;
use forgeda_core::data::{split_dataset, Domain, Manifest, PairedBatchIterator, Split, TensorDataset};
use forgeda_core::eval_report::{confusion, evaluate, f1_score, metrics};
use forgeda_core::models::{build_network, NetworkSpec};
use forgeda_core::rng::rng_from;
use forgeda_core::synth::*;
use forgeda_core::tensor_nn::{grl_backward, grl_forward, run_gradient_suite, OptimizerKind, OptimizerState, Tensor};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn toy_corpus() -> PathBuf {
    workspace().join("assets/toy_corpus")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rows = run_gradient_suite(2024, 10).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    for layer in ["conv2d", "fully_connected", "relu", "maxpool2d", "flatten", "softmax", "softmax_cross_entropy"] {
        for precision in ["f32", "f64"] {
            let row = rows
                .iter()
                .find(|r| r.layer == layer && r.precision == precision)
                .ok_or(format!("no {layer}/{precision} row"))?;
            check(row.cases >= 10, format!("{layer}/{precision}: {} cases", row.cases))?;
            check(
                row.passed && row.max_rel_error <= row.tolerance,
                format!("{layer}/{precision}: rel err {:.2e} > {:.0e}", row.max_rel_error, row.tolerance),
            )?;
        }
    }
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    Ok(format!("{} rows, worst rel err {worst:.2e}, {:.1}s", rows.len(), elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from(2, &[]);
    for _ in 0..100 {
        let n = rng.random_range(1..64);
        let x = Tensor::<f64>::from_fn(&[n], |_| rng.random_range(-1e3..1e3));
        check(grl_forward(&x).data() == x.data(), "forward changed values")?;
        let lambda: f64 = rng.random_range(0.0..3.0);
        let back = grl_backward(&x, lambda);
        for (b, u) in back.data().iter().zip(x.data()) {
            check(*b == -lambda * u, "backward is not -lambda * upstream")?;
        }
    }
    let (s, t) = moons_domains(256, 0.1, 35.0, 1).map_err(|e| e.to_string())?;
    let mut it = PairedBatchIterator::new(&s, &t, 32, 1).map_err(|e| e.to_string())?;
    let batches: Vec<_> = (0..3).map(|_| it.next_pair().unwrap()).collect();
    let spec = NetworkSpec::mlp(2, vec![32], 32);
    let run = |dann: bool| -> Vec<u32> {
        let mut net = build_network(&spec, 5).unwrap();
        let mut opt = OptimizerState::new(OptimizerKind::adam(1e-2)).unwrap();
        for (sb, tb) in &batches {
            if dann {
                dann_step(&mut net, sb, tb, 0.0, &mut opt).unwrap();
            } else {
                source_only_step(&mut net, sb, &mut opt).unwrap();
            }
        }
        net.named_params()
            .into_iter()
            .filter(|(n, _)| !n.starts_with("domain"))
            .flat_map(|(_, p)| p.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    check(run(true) == run(false), "DANN(lambda=0) trajectory differs from source-only")?;
    Ok("100 tensors, 3-step trajectory bit-equal".into())
}

fn criterion_3() -> Outcome {
    let single = compute_mmd(
        &Tensor::<f64>::new(vec![1, 2], vec![0.0, 0.0]).unwrap(),
        &Tensor::<f64>::new(vec![1, 2], vec![3.0, 4.0]).unwrap(),
        MmdKernel::Linear,
    )
    .map_err(|e| e.to_string())?;
    check(single == 5.0, format!("single-point case gave {single}"))?;
    let mut rng = rng_from(3, &[]);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(1..8);
        let (ns, nt) = (rng.random_range(1..12), rng.random_range(1..12));
        let x = Tensor::<f64>::from_fn(&[ns, d], |_| rng.random_range(-2.0..2.0));
        let y = Tensor::<f64>::from_fn(&[nt, d], |_| rng.random_range(-2.0..2.0));
        let oracle = (0..d)
            .map(|j| {
                let mx: f64 = (0..ns).map(|i| x.data()[i * d + j]).sum::<f64>() / ns as f64;
                let my: f64 = (0..nt).map(|i| y.data()[i * d + j]).sum::<f64>() / nt as f64;
                (mx - my).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        for kernel in [MmdKernel::Linear, MmdKernel::Rbf { bandwidth: 1.5 }] {
            let xy = compute_mmd(&x, &y, kernel).map_err(|e| e.to_string())?;
            let yx = compute_mmd(&y, &x, kernel).map_err(|e| e.to_string())?;
            let xx = compute_mmd(&x, &x, kernel).map_err(|e| e.to_string())?;
            check(xx.abs() <= 1e-12, format!("MMD(X,X) = {xx:e}"))?;
            check(xy >= 0.0, "negative MMD")?;
            check((xy - yx).abs() <= 1e-12, "MMD not symmetric")?;
            if kernel == MmdKernel::Linear {
                worst = worst.max((xy - oracle).abs());
            }
        }
    }
    check(worst <= 1e-9, format!("oracle deviation {worst:e}"))?;
    Ok(format!("50 set pairs, max oracle deviation {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from(4, &[]);
    let w = 40;
    let h = 25;
    let px = |rng: &mut forgeda_core::rng::Rng| -> Vec<u8> { (0..w * h * 3).map(|_| rng.random()).collect() };
    let fg = RasterImage::new(w, h, px(&mut rng), ColorSpace::Rgb).unwrap();
    let bg = RasterImage::new(w, h, px(&mut rng), ColorSpace::Rgb).unwrap();
    let full = ObjectMask::rect(w, h, 0, 0, w, h, "all");
    let part = ObjectMask::rect(w, h, 5, 3, 20, 12, "part");
    let hard = |alpha| BlendParams { alpha, feather_radius: 0 };
    let one = alpha_blend(&fg, &bg, &part, &hard(1.0)).map_err(|e| e.to_string())?;
    let zero = alpha_blend(&fg, &bg, &part, &hard(0.0)).map_err(|e| e.to_string())?;
    check(zero == bg, "alpha 0 is not the background")?;
    for i in 0..fg.pixel_count() {
        let want = if part.bits[i] { &fg } else { &bg };
        check(one.data[i * 3..i * 3 + 3] == want.data[i * 3..i * 3 + 3], "alpha 1 is not a hard paste")?;
    }
    // 1000 pixel pairs: all 1000 pixels of the full mask
    let half = alpha_blend(&fg, &bg, &full, &hard(0.5)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..fg.data.len() {
        let exact = 0.5 * fg.data[i] as f64 + 0.5 * bg.data[i] as f64;
        worst = worst.max((half.data[i] as f64 - exact).abs());
    }
    check(worst <= 1.0, format!("midpoint off by {worst}"))?;
    Ok(format!("{} pixel pairs, max midpoint error {worst}", fg.pixel_count()))
}

fn moons_target_accuracy(method: Method, seed: u64) -> f64 {
    let (s, t) = moons_domains(1000, 0.1, 35.0, seed).unwrap();
    let mut net = build_network(&NetworkSpec::mlp(2, vec![64], 64), seed).unwrap();
    let mut cfg = TrainConfig {
        method,
        epochs: 60,
        batch_size: 32,
        seed,
        optimizer: Some(OptimizerKind::adam(1e-3)),
        lambda: LambdaSchedule::annealed(),
        ..TrainConfig::default()
    };
    if method == Method::Ddc {
        cfg.optimizer = Some(OptimizerKind::sgd_momentum(1e-2, 0.9));
        cfg.mmd_alpha = 5.0;
        cfg.mmd_kernel = MmdKernel::Linear;
    }
    train(&mut net, &s, Some(&t), &cfg, &mut no_hook).unwrap();
    accuracy(&mut net, &t, 256).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut med = Vec::new();
    for method in [Method::SourceOnly, Method::Dann, Method::Ddc] {
        med.push(median((0..5).map(|s| moons_target_accuracy(method, s)).collect()));
    }
    let elapsed = start.elapsed();
    let summary = format!(
        "median target acc: source-only {:.3}, DANN {:.3}, DDC {:.3} ({:.1}s)",
        med[0],
        med[1],
        med[2],
        elapsed.as_secs_f64()
    );
    check(med[1] - med[0] >= 0.10, format!("DANN gain too small; {summary}"))?;
    check(med[2] - med[0] >= 0.10, format!("DDC gain too small; {summary}"))?;
    check(elapsed < Duration::from_secs(300), format!("too slow; {summary}"))?;
    Ok(summary)
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = toy_corpus();
    let cfg = GenerateConfig {
        count: 400,
        seed: 1,
        ..GenerateConfig::default()
    };
    let summary = generate_dataset(&corpus, &corpus.join("annotations.json"), dir.path(), &cfg).map_err(|e| e.to_string())?;
    let split = split_dataset(&summary.manifest, 0.8, 1).map_err(|e| e.to_string())?;
    let spec = NetworkSpec::alexnet(64);
    let load = |s: Split| TensorDataset::load(&split.with_split(s), 64, ColorSpace::Rgb, true, Domain::Source);
    let train_set = load(Split::Train).map_err(|e| e.to_string())?;
    let test_set = load(Split::Test).map_err(|e| e.to_string())?;
    let mut net = build_network(&spec, 0).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        epochs: 20,
        batch_size: 8,
        seed: 0,
        optimizer: Some(OptimizerKind::adam(1e-3)),
        ..TrainConfig::default()
    };
    train_source_only(&mut net, &train_set, &tc, &mut no_hook).map_err(|e| e.to_string())?;
    let m = evaluate(&mut net, &test_set, 64).map_err(|e| e.to_string())?;
    check(m.f1 >= 0.90, format!("held-out F1 {:.3}", m.f1))?;
    Ok(format!(
        "{} pairs, {} train / {} test, held-out F1 {:.3}",
        summary.manifest.len() / 2,
        train_set.len(),
        test_set.len(),
        m.f1
    ))
}

fn criterion_7() -> Outcome {
    let f1 = f1_score(0.6802, 0.9773) * 100.0;
    check((f1 - 80.18).abs() <= 0.1, format!("F1 {f1:.3} vs printed 80.18"))?;
    let mut rng = rng_from(7, &[]);
    for _ in 0..20 {
        let p: Vec<usize> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let l: Vec<usize> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..1000 {
            match (p[i] == 1, l[i] == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let m = metrics(confusion(&p, &l).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (pr, rc) = (tp as f64 / (tp + fp) as f64, tp as f64 / (tp + fn_) as f64);
        check((m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn_) == (tp, fp, tn, fn_), "confusion mismatch")?;
        check((m.accuracy - (tp + tn) as f64 / 1000.0).abs() < 1e-12, "accuracy mismatch")?;
        check((m.precision - pr).abs() < 1e-12 && (m.recall - rc).abs() < 1e-12, "precision/recall mismatch")?;
        check((m.f1 - 2.0 * pr * rc / (pr + rc)).abs() < 1e-12, "f1 mismatch")?;
    }
    Ok(format!("F1(68.02, 97.73) = {f1:.2}; 20 x 1000-element oracle checks"))
}

fn forgeda(args: &[&str], cwd: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_forgeda"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "forgeda {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn pipeline_config(corpus: &Path) -> String {
    format!(
        r#"[generate]
corpus = "{corpus}"
count = 24
seed = 3
inpaint_iterations = 100
out = "gen"

[split]
manifest = "gen/manifest.jsonl"
train_fraction = 0.75
seed = 3
out = "split"

[train]
method = "dann"
preset = "alexnet"
input_side = 32
source_manifest = "split/manifest.jsonl"
target_manifest = "split/manifest.jsonl"
target_split = "test"
epochs = 2
batch_size = 4
seed = 3
lambda = {{ mode = "annealed", max = 0.1 }}
out = "train"

[eval]
checkpoint = "train/checkpoint.bin"
manifest = "split/manifest.jsonl"
label = "dann-alexnet"
out = "eval"
"#,
        corpus = corpus.display()
    )
}

fn criterion_8() -> Outcome {
    let corpus = toy_corpus().canonicalize().map_err(|e| e.to_string())?;
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        std::fs::write(dir.path().join("run.toml"), pipeline_config(&corpus)).map_err(|e| e.to_string())?;
        for cmd in ["generate", "split", "train", "eval"] {
            forgeda(&["--config", "run.toml", cmd], dir.path())?;
        }
    }
    let files = [
        "gen/manifest.jsonl",
        "split/manifest.jsonl",
        "train/checkpoint.bin",
        "train/checkpoints/epoch-001.bin",
        "train/history.csv",
        "eval/report.txt",
        "eval/report.csv",
        "eval/metrics.json",
    ];
    for f in files {
        let a = std::fs::read(runs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(runs[1].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        check(a == b, format!("{f} differs between runs"))?;
    }
    let images = Manifest::load(&runs[0].path().join("gen/manifest.jsonl")).map_err(|e| e.to_string())?;
    for r in &images.records {
        let a = std::fs::read(runs[0].path().join("gen").join(&r.path)).map_err(|e| e.to_string())?;
        let b = std::fs::read(runs[1].path().join("gen").join(&r.path)).map_err(|e| e.to_string())?;
        check(a == b, format!("{} differs between runs", r.path))?;
    }
    Ok(format!("{} artifacts and {} images byte-identical", files.len(), images.len()))
}

fn criterion_9() -> Outcome {
    let corpus = toy_corpus().canonicalize().map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = pipeline_config(&corpus);
    cfg.push_str(
        r#"
[grid]
color_spaces = ["rgb", "ycrcb"]
eval_manifest = "split/manifest.jsonl"
eval_split = "test"
out = "grid"
"#,
    );
    std::fs::write(dir.path().join("run.toml"), cfg).map_err(|e| e.to_string())?;
    forgeda(&["--config", "run.toml", "generate"], dir.path())?;
    forgeda(&["--config", "run.toml", "split"], dir.path())?;
    forgeda(&["--config", "run.toml", "grid"], dir.path())?;
    let csv = std::fs::read_to_string(dir.path().join("grid/report.csv")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = csv.lines().collect();
    check(lines.len() == 3, format!("expected header + 2 rows, got {lines:?}"))?;
    check(lines[0] == "run,accuracy,precision,recall,f1", format!("header {:?}", lines[0]))?;
    check(lines[1].starts_with("dann-alexnet-rgb,"), format!("row 1 {:?}", lines[1]))?;
    check(lines[2].starts_with("dann-alexnet-ycrcb,"), format!("row 2 {:?}", lines[2]))?;
    for cs in ["rgb", "ycrcb"] {
        check(dir.path().join("grid").join(cs).join("checkpoint.bin").is_file(), format!("no {cs} checkpoint"))?;
    }
    Ok(format!("rows: {} | {}", lines[1], lines[2]))
}

fn main() {
    let only: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 gradient suite", criterion_1),
        ("2 GRL contract", criterion_2),
        ("3 MMD contract", criterion_3),
        ("4 blending contract", criterion_4),
        ("5 DA gain on toy domains", criterion_5),
        ("6 synthesis learnability", criterion_6),
        ("7 metrics", criterion_7),
        ("8 determinism", criterion_8),
        ("9 color-space grid", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
