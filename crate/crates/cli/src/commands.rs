use std::path::{Component, Path, PathBuf};

use forgeda_core::da_train::{self, EpochRecord, Method, TrainConfig};
use forgeda_core::data::{split_dataset, Domain, Manifest, Split, TensorDataset};
use forgeda_core::eval_report::{evaluate, render_report, MetricsReport, ReportFormat};
use forgeda_core::models::{build_network, load_checkpoint, save_checkpoint, NetworkSpec, TwoHeadNetwork};
use forgeda_core::synth::{generate_dataset, generate_toy_corpus, ColorSpace, GenerateConfig, ToyCorpusConfig};
use forgeda_core::tensor_nn::run_gradient_suite;
use forgeda_core::{Error, Result};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{absolute, require, GridSection, RunConfig, TrainSection};

/// Written next to every command's outputs.
#[derive(Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    seed: u64,
    version: &'a str,
    config_hash: String,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    io(path, std::fs::write(path, contents))
}

fn create_dir(dir: &Path) -> Result<()> {
    io(dir, std::fs::create_dir_all(dir))
}

/// Stores the resolved config and run metadata in `out`.
fn record_run(out: &Path, command: &str, seed: u64, resolved: &RunConfig) -> Result<()> {
    create_dir(out)?;
    let text = resolved.to_toml()?;
    let meta = RunMetadata {
        command,
        seed,
        version: forgeda_core::VERSION,
        config_hash: hex::encode(Sha256::digest(text.as_bytes())),
    };
    write(&out.join("resolved_config.toml"), &text)?;
    write(&out.join("run.json"), serde_json::to_string_pretty(&meta)? + "\n")
}

/// `target` expressed relative to directory `base`, both made absolute first.
pub fn relative_path(target: &Path, base: &Path) -> PathBuf {
    let (t, b) = (absolute(target), absolute(base));
    let tc: Vec<Component> = t.components().filter(|c| *c != Component::CurDir).collect();
    let bc: Vec<Component> = b.components().filter(|c| *c != Component::CurDir).collect();
    let common = tc.iter().zip(&bc).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return t;
    }
    let mut out = PathBuf::new();
    for _ in common..bc.len() {
        out.push("..");
    }
    for c in &tc[common..] {
        out.push(c.as_os_str());
    }
    out
}

pub fn toy_corpus(cfg: &RunConfig) -> Result<()> {
    let s = cfg.toy.clone().unwrap_or_default();
    let out = require(&s.out, "toy.out")?;
    let toy = ToyCorpusConfig {
        images: s.images,
        size: s.size,
        max_objects: s.max_objects,
        seed: s.seed,
    };
    let ann = generate_toy_corpus(&out, &toy)?;
    println!("wrote {} images and {}", toy.images, ann.display());
    Ok(())
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let mut s = cfg.generate.clone().unwrap_or_default();
    let corpus = require(&s.corpus, "generate.corpus")?;
    let annotations = s.annotations.clone().map(|p| absolute(&p)).unwrap_or_else(|| corpus.join("annotations.json"));
    let out = require(&s.out, "generate.out")?;
    s.corpus = Some(corpus.clone());
    s.annotations = Some(annotations.clone());
    s.out = Some(out.clone());
    let config = GenerateConfig {
        count: s.count,
        mix_copy_move: s.mix[0],
        mix_inpaint: s.mix[1],
        category: s.category.clone(),
        domain: s.domain,
        seed: s.seed,
        inpaint_iterations: s.inpaint_iterations,
        copy_move: s.copy_move.clone(),
    };
    config.validate()?;
    let summary = generate_dataset(&corpus, &annotations, &out, &config)?;
    record_run(
        &out,
        "generate",
        s.seed,
        &RunConfig {
            generate: Some(s),
            ..RunConfig::default()
        },
    )?;
    println!(
        "wrote {} records to {} ({} skipped attempts)",
        summary.manifest.len(),
        out.join("manifest.jsonl").display(),
        summary.skipped
    );
    Ok(())
}

pub fn split(cfg: &RunConfig) -> Result<()> {
    let mut s = cfg.split.clone().unwrap_or_default();
    let manifest_path = require(&s.manifest, "split.manifest")?;
    let out = require(&s.out, "split.out")?;
    s.manifest = Some(manifest_path.clone());
    s.out = Some(out.clone());
    let manifest = Manifest::load(&manifest_path)?;
    let mut split = split_dataset(&manifest, s.train_fraction, s.seed)?;
    create_dir(&out)?;
    for r in &mut split.records {
        let resolved = manifest.resolve(r);
        r.path = relative_path(&resolved, &out).to_string_lossy().replace('\\', "/");
    }
    split.base_dir = out.clone();
    split.save(&out.join("manifest.jsonl"))?;
    let train = split.records.iter().filter(|r| r.split == Some(Split::Train)).count();
    record_run(
        &out,
        "split",
        s.seed,
        &RunConfig {
            split: Some(s),
            ..RunConfig::default()
        },
    )?;
    println!("{train} train / {} test", split.len() - train);
    Ok(())
}

fn default_split(manifest: &Manifest, explicit: Option<Split>, fallback: Split) -> Manifest {
    let split = explicit.or_else(|| manifest.records.iter().any(|r| r.split.is_some()).then_some(fallback));
    match split {
        Some(s) => manifest.with_split(s),
        None => manifest.clone(),
    }
}

fn network_spec(t: &TrainSection) -> NetworkSpec {
    NetworkSpec {
        preset: t.preset,
        input_side: t.input_side,
        feature_dim: t.feature_dim,
        source_hidden: t.source_hidden,
        domain_hidden: t.domain_hidden,
        color_space: t.color_space,
        ..NetworkSpec::default()
    }
}

fn load_set(path: &Path, split: Option<Split>, fallback: Split, spec: &NetworkSpec, labels: bool, domain: Domain) -> Result<TensorDataset> {
    let m = default_split(&Manifest::load(path)?, split, fallback);
    TensorDataset::load(&m, spec.input_side as u32, spec.color_space, labels, domain)
}

/// Trains one network and writes checkpoints, history, config and metadata.
pub fn run_training(t: &TrainSection, out: &Path) -> Result<TwoHeadNetwork> {
    let source_path = require(&t.source_manifest, "train.source_manifest")?;
    let spec = network_spec(t);
    spec.validate()?;
    let config = TrainConfig {
        method: t.method,
        epochs: t.epochs,
        batch_size: t.batch_size,
        seed: t.seed,
        optimizer: t.optimizer,
        lambda: t.lambda,
        mmd_alpha: t.mmd_alpha,
        mmd_kernel: t.mmd_kernel,
    };
    config.validate()?;
    let source = load_set(&source_path, t.source_split, Split::Train, &spec, true, Domain::Source)?;
    let target = match (t.method, &t.target_manifest) {
        (Method::SourceOnly, _) => None,
        (_, Some(p)) => Some(load_set(&absolute(p), t.target_split, Split::Train, &spec, false, Domain::Target)?),
        (m, None) => return Err(Error::Config(format!("method {} needs train.target_manifest", m.name()))),
    };
    let monitor = match &t.monitor_manifest {
        Some(p) => Some(load_set(&absolute(p), t.monitor_split, Split::Test, &spec, true, Domain::Target)?),
        None => None,
    };
    info!("training {} on {} source samples", t.method.name(), source.len());

    create_dir(out)?;
    let ckpt_dir = out.join("checkpoints");
    if t.checkpoint_every_epoch {
        create_dir(&ckpt_dir)?;
    }
    let mut net = build_network(&spec, t.seed)?;
    let mut hook = |rec: &mut EpochRecord, net: &mut TwoHeadNetwork| -> Result<()> {
        if let Some(m) = &monitor {
            rec.target_accuracy = Some(da_train::accuracy(net, m, 64)?);
        }
        if t.checkpoint_every_epoch {
            save_checkpoint(net, &ckpt_dir.join(format!("epoch-{:03}.bin", rec.epoch)))?;
        }
        Ok(())
    };
    let history = da_train::train(&mut net, &source, target.as_ref(), &config, &mut hook)?;
    save_checkpoint(&net, &out.join("checkpoint.bin"))?;
    write(&out.join("history.csv"), history.to_csv())?;
    Ok(net)
}

fn resolve_train(t: &TrainSection, out: &Path) -> TrainSection {
    let abs = |p: &Option<PathBuf>| p.as_ref().map(|v| absolute(v));
    TrainSection {
        source_manifest: abs(&t.source_manifest),
        target_manifest: abs(&t.target_manifest),
        monitor_manifest: abs(&t.monitor_manifest),
        out: Some(out.to_path_buf()),
        ..t.clone()
    }
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let t = cfg.train.clone().unwrap_or_default();
    let out = require(&t.out, "train.out")?;
    let t = resolve_train(&t, &out);
    run_training(&t, &out)?;
    record_run(
        &out,
        "train",
        t.seed,
        &RunConfig {
            train: Some(t),
            ..RunConfig::default()
        },
    )?;
    println!("wrote {}", out.join("checkpoint.bin").display());
    Ok(())
}

/// Metrics plus the run label, as stored in `metrics.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledMetrics {
    pub label: String,
    pub metrics: MetricsReport,
}

fn score(checkpoint: &Path, manifest: &Path, split: Option<Split>, batch: usize) -> Result<MetricsReport> {
    let mut net = load_checkpoint(checkpoint)?;
    let spec = net.spec.clone();
    let data = load_set(manifest, split, Split::Test, &spec, true, Domain::Target)?;
    evaluate(&mut net, &data, batch.max(1))
}

fn write_reports(out: &Path, entries: &[(String, MetricsReport)]) -> Result<String> {
    let text = render_report(entries, ReportFormat::Text);
    create_dir(out)?;
    write(&out.join("report.txt"), &text)?;
    write(&out.join("report.csv"), render_report(entries, ReportFormat::Csv))?;
    Ok(text)
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let mut s = cfg.eval.clone().unwrap_or_default();
    let checkpoint = require(&s.checkpoint, "eval.checkpoint")?;
    let manifest = require(&s.manifest, "eval.manifest")?;
    s.checkpoint = Some(checkpoint.clone());
    s.manifest = Some(manifest.clone());
    let m = score(&checkpoint, &manifest, s.split, s.batch_size)?;
    let label = s.label.clone().unwrap_or_else(|| "eval".to_string());
    let entries = vec![(label.clone(), m.clone())];
    match &s.out {
        Some(out) => {
            let out = absolute(out);
            s.out = Some(out.clone());
            let text = write_reports(&out, &entries)?;
            let lm = LabeledMetrics { label, metrics: m };
            write(&out.join("metrics.json"), serde_json::to_string_pretty(&lm)? + "\n")?;
            record_run(
                &out,
                "eval",
                0,
                &RunConfig {
                    eval: Some(s),
                    ..RunConfig::default()
                },
            )?;
            print!("{text}");
        }
        None => print!("{}", render_report(&entries, ReportFormat::Text)),
    }
    Ok(())
}

pub fn gradcheck(seed: u64, cases: usize, out: Option<&Path>) -> Result<()> {
    let rows = run_gradient_suite(seed, cases)?;
    let mut text = format!("{:<24} {:>9} {:>6} {:>12} {:>10}  result\n", "layer", "precision", "cases", "max_rel_err", "tolerance");
    let mut csv = String::from("layer,precision,cases,max_rel_error,tolerance,passed\n");
    for r in &rows {
        text.push_str(&format!(
            "{:<24} {:>9} {:>6} {:>12.3e} {:>10.0e}  {}\n",
            r.layer,
            r.precision,
            r.cases,
            r.max_rel_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        ));
        csv.push_str(&format!(
            "{},{},{},{:e},{:e},{}\n",
            r.layer, r.precision, r.cases, r.max_rel_error, r.tolerance, r.passed
        ));
    }
    print!("{text}");
    if let Some(out) = out {
        create_dir(out)?;
        write(&out.join("gradcheck.txt"), &text)?;
        write(&out.join("gradcheck.csv"), &csv)?;
    }
    match rows.iter().filter(|r| !r.passed).count() {
        0 => Ok(()),
        n => Err(Error::Numeric(format!("{n} gradient checks failed"))),
    }
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let mut s = cfg.report.clone().unwrap_or_default();
    if s.inputs.is_empty() {
        return Err(Error::Config("report.inputs must list at least one metrics.json".into()));
    }
    let mut entries = Vec::new();
    for p in &mut s.inputs {
        *p = absolute(p);
        let text = io(p, std::fs::read_to_string(&p))?;
        let lm: LabeledMetrics =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
        entries.push((lm.label, lm.metrics));
    }
    match s.out.clone() {
        Some(out) => {
            let out = absolute(&out);
            s.out = Some(out.clone());
            print!("{}", write_reports(&out, &entries)?);
            record_run(
                &out,
                "report",
                0,
                &RunConfig {
                    report: Some(s),
                    ..RunConfig::default()
                },
            )?;
        }
        None => print!("{}", render_report(&entries, ReportFormat::Text)),
    }
    Ok(())
}

fn color_label(cs: ColorSpace) -> &'static str {
    match cs {
        ColorSpace::Rgb => "rgb",
        ColorSpace::YCrCb => "ycrcb",
    }
}

pub fn grid(cfg: &RunConfig) -> Result<()> {
    let base = cfg.train.clone().unwrap_or_default();
    let mut g: GridSection = cfg.grid.clone().unwrap_or_default();
    let out = require(&g.out, "grid.out")?;
    let eval_manifest = require(&g.eval_manifest, "grid.eval_manifest")?;
    g.out = Some(out.clone());
    g.eval_manifest = Some(eval_manifest.clone());
    if g.color_spaces.is_empty() {
        return Err(Error::Config("grid.color_spaces is empty".into()));
    }
    let base = resolve_train(&base, &out);
    let mut entries = Vec::new();
    for &cs in &g.color_spaces {
        let name = color_label(cs);
        let run_dir = out.join(name);
        let t = TrainSection {
            color_space: cs,
            out: Some(run_dir.clone()),
            ..base.clone()
        };
        run_training(&t, &run_dir)?;
        let m = score(&run_dir.join("checkpoint.bin"), &eval_manifest, g.eval_split, 64)?;
        entries.push((format!("{}-{}-{name}", t.method.name(), preset_label(t.preset)), m));
    }
    let text = write_reports(&out, &entries)?;
    record_run(
        &out,
        "grid",
        base.seed,
        &RunConfig {
            train: Some(base),
            grid: Some(g),
            ..RunConfig::default()
        },
    )?;
    print!("{text}");
    Ok(())
}

fn preset_label(p: forgeda_core::Preset) -> &'static str {
    match p {
        forgeda_core::Preset::AlexNetSmall => "alexnet",
        forgeda_core::Preset::Vgg7Small => "vgg7",
        forgeda_core::Preset::Mlp => "mlp",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(relative_path(Path::new("/a/b/img/x.png"), Path::new("/a/c")), PathBuf::from("../b/img/x.png"));
        assert_eq!(relative_path(Path::new("/a/b/x.png"), Path::new("/a/b")), PathBuf::from("x.png"));
    }
}
