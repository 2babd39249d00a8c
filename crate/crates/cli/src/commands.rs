//! Subcommand implementations. Each command validates its inputs, runs
//! the corresponding library operations, writes its artifacts, and
//! echoes the fully-resolved configuration next to them.

use std::path::{Path, PathBuf};

use serde_json::json;

use sign2text_core::corpus::{
    load_manifest, synth_generate, tokenize_whitespace, Split, SynthConfig, RESERVED,
};
use sign2text_core::error::{Error, Result};
use sign2text_core::features::{read_archive, reverse_frames, write_archive};
use sign2text_core::keypoint::LayoutMap;
use sign2text_core::metrics::evaluate_corpus;
use sign2text_core::model::checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, PreprocessSpec, CHECKPOINT_VERSION,
};
use sign2text_core::model::train::{greedy_decode, train};
use sign2text_core::pipeline::{
    build_archive, examples_for_split, load_hypotheses, preprocess_manifest, vocab_from_manifest,
    write_hypotheses, Hypothesis, PreprocessConfig,
};
use sign2text_core::select::{kurtosis, median_reorder, mixture_distribution};

use crate::config::{echo_config, FileConfig};

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub struct SynthArgs {
    pub out: PathBuf,
    pub vocab_size: usize,
    pub videos: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub frames_per_token: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        vocab_size: args.vocab_size,
        videos: args.videos,
        min_sentence_len: args.min_len,
        max_sentence_len: args.max_len,
        frames_per_token: args.frames_per_token,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    };
    ensure_dir(&args.out)?;
    let manifest = synth_generate(&cfg, &args.out)?;
    echo_config(&args.out.join("synth.config.json"), &cfg)?;
    println!(
        "wrote {} videos and {} to {}",
        manifest.rows.len(),
        "manifest.tsv",
        args.out.display()
    );
    Ok(())
}

pub fn cmd_preprocess(
    config: &FileConfig,
    manifest_path: &Path,
    out: &Path,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let cfg = PreprocessConfig {
        layout: LayoutMap::resolve(&config.preprocess.layout)?,
        scheme: config.parse_scheme()?,
        selector: config.parse_selector()?,
        l_p: config.preprocess.l_p,
        n_rule: config.parse_n_rule()?,
        seed: config.preprocess.seed,
    };
    let (stats, videos) = preprocess_manifest(&manifest, &cfg)?;
    let archive = build_archive(&cfg, &stats, videos)?;
    let shape = (
        archive.header.count,
        archive.header.frames,
        archive.header.dim,
    );
    write_archive(out, &archive)?;
    echo_config(
        &out.with_extension("config.json"),
        &json!({
            "preprocess": config.preprocess,
            "resolved": {
                "manifest": manifest_path.display().to_string(),
                "chosen_n": stats.chosen_n,
                "mean_frames": stats.mean_frames,
                "median_frames": stats.median_frames,
                "config_hash": cfg.hash(),
            },
        }),
    )?;
    println!(
        "wrote archive {} with shape ({}, {}, {})",
        out.display(),
        shape.0,
        shape.1,
        shape.2
    );
    Ok(())
}

pub fn cmd_train(
    config: &FileConfig,
    manifest_path: &Path,
    archive_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let archive = read_archive(archive_path)?;
    let vocab = vocab_from_manifest(&manifest);
    if vocab.size() <= RESERVED.len() {
        return Err(Error::EmptyCorpus);
    }
    let train_examples = examples_for_split(&manifest, &archive, &vocab, Split::Train)?;
    if train_examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut hyper = config.model_hyper(archive.header.dim, vocab.size());
    if hyper.max_target_len == 0 {
        // longest sentence anywhere in the corpus, terminator included
        hyper.max_target_len = manifest
            .rows
            .iter()
            .map(|r| tokenize_whitespace(&r.sentence).len() + 1)
            .max()
            .unwrap_or(1);
    }
    hyper.validate()?;
    let train_cfg = config.train_config();

    ensure_dir(out_dir)?;
    let mut rng = sign2text_core::select::seeded_rng(train_cfg.seed);
    let mut params = sign2text_core::model::ModelParams::init(&hyper, &mut rng);
    let mut loss_csv = String::from("epoch,loss\n");
    let logs = train(&hyper, &mut params, &train_examples, &train_cfg, |log| {
        eprintln!("epoch {}: loss {}", log.epoch, log.loss);
        loss_csv.push_str(&format!("{},{}\n", log.epoch, log.loss));
    })?;
    write_text(&out_dir.join("loss.csv"), &loss_csv)?;

    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        hyper: hyper.clone(),
        vocab: vocab.tokens().to_vec(),
        preprocess: PreprocessSpec {
            normalization: archive.header.normalization.clone(),
            selector: archive.header.selector.clone(),
            l_p: archive.header.l_p,
            frames: archive.header.frames,
            layout: config.preprocess.layout.clone(),
            reverse_frames: train_cfg.reverse_frames,
        },
        params,
    };
    save_checkpoint(out_dir.join("model.json"), &ckpt)?;
    echo_config(
        &out_dir.join("train.config.json"),
        &json!({
            "model": config.model,
            "train": config.train,
            "resolved": {
                "manifest": manifest_path.display().to_string(),
                "archive": archive_path.display().to_string(),
                "vocab_size": vocab.size(),
                "max_target_len": hyper.max_target_len,
                "input_dim": hyper.input_dim,
                "train_examples": train_examples.len(),
            },
        }),
    )?;
    let final_loss = logs.last().map_or(f64::NAN, |l| l.loss);
    println!(
        "trained {} epochs, final loss {}, model at {}",
        logs.len(),
        final_loss,
        out_dir.join("model.json").display()
    );
    Ok(())
}

pub fn cmd_translate(
    model_path: &Path,
    archive_path: &Path,
    out: &Path,
    manifest_path: Option<&Path>,
    split: Option<Split>,
) -> Result<()> {
    let ckpt = load_checkpoint(model_path)?;
    let archive = read_archive(archive_path)?;
    if archive.header.normalization != ckpt.preprocess.normalization
        || archive.header.l_p != ckpt.preprocess.l_p
        || archive.header.frames != ckpt.preprocess.frames
    {
        return Err(Error::LayoutMismatch(format!(
            "archive was preprocessed with ({}, l_p={}, N={}) but the model expects ({}, l_p={}, N={})",
            archive.header.normalization,
            archive.header.l_p,
            archive.header.frames,
            ckpt.preprocess.normalization,
            ckpt.preprocess.l_p,
            ckpt.preprocess.frames,
        )));
    }

    let keep: Option<std::collections::HashSet<String>> = match (manifest_path, split) {
        (Some(mp), Some(sp)) => Some(
            load_manifest(mp)?
                .rows_for(sp)
                .map(|r| r.video_id.clone())
                .collect(),
        ),
        (None, Some(_)) => {
            return Err(Error::ConfigInvalid(
                "--split requires --manifest".into(),
            ));
        }
        _ => None,
    };

    let mut hyps = Vec::new();
    for video in &archive.videos {
        if let Some(keep) = &keep {
            if !keep.contains(&video.id) {
                continue;
            }
        }
        let frames = if ckpt.preprocess.reverse_frames {
            reverse_frames(video).frames
        } else {
            video.frames.clone()
        };
        let ids = greedy_decode(&ckpt.hyper, &ckpt.params, &frames)?;
        let words: Vec<&str> = ids
            .iter()
            .filter(|&&id| id >= RESERVED.len())
            .map(|&id| ckpt.vocab[id].as_str())
            .collect();
        hyps.push(Hypothesis {
            video_id: video.id.clone(),
            sentence: words.join(" "),
        });
    }
    write_hypotheses(out, &hyps)?;
    echo_config(
        &out.with_extension("config.json"),
        &json!({
            "model": model_path.display().to_string(),
            "archive": archive_path.display().to_string(),
            "split": split.map(|s| s.name()),
            "videos": hyps.len(),
        }),
    )?;
    println!("wrote {} hypotheses to {}", hyps.len(), out.display());
    Ok(())
}

pub fn cmd_evaluate(
    manifest_path: &Path,
    hypotheses_path: &Path,
    split: Split,
    out: &Path,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let hyps = load_hypotheses(hypotheses_path)?;
    let by_id: std::collections::HashMap<&str, &str> = hyps
        .iter()
        .map(|h| (h.video_id.as_str(), h.sentence.as_str()))
        .collect();
    let mut pairs = Vec::new();
    for row in manifest.rows_for(split) {
        let hyp = by_id.get(row.video_id.as_str()).ok_or_else(|| {
            Error::LengthMismatch(format!(
                "no hypothesis for video {} in {}",
                row.video_id,
                hypotheses_path.display()
            ))
        })?;
        pairs.push((
            row.video_id.clone(),
            tokenize_whitespace(hyp),
            tokenize_whitespace(&row.sentence),
        ));
    }
    let report = evaluate_corpus(&pairs)?;
    write_text(out, &report.to_csv())?;
    echo_config(
        &out.with_extension("config.json"),
        &json!({
            "manifest": manifest_path.display().to_string(),
            "hypotheses": hypotheses_path.display().to_string(),
            "split": split.name(),
            "sentences": pairs.len(),
        }),
    )?;
    println!(
        "CORPUS bleu4={} rouge_l={} meteor_exact={}",
        report.bleu4, report.rouge_l, report.meteor_exact
    );
    Ok(())
}

pub fn cmd_inspect_dist(
    t: usize,
    l_p: usize,
    reordered: bool,
    out: Option<&Path>,
) -> Result<()> {
    let mut dist = mixture_distribution(t, l_p)?;
    if reordered {
        dist = median_reorder(&dist);
    }
    let kurt = kurtosis(&dist)?;
    let mut csv = String::from("k,prob\n");
    for (k, p) in dist.probs.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", k + 1, p));
    }
    csv.push_str(&format!("kurtosis,{kurt}\n"));
    match out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
