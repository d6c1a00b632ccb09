use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dehate_core::attention::{aggregate, binarize, export_gray, load_stack, Heatmap};
use dehate_core::evaluate::{leaderboard, leaderboard_csv, score, truth_mask, IoUReport};
use dehate_core::manifest::{load_manifest, write_manifest, Manifest, ManifestRow, Split};
use dehate_core::masker::synthetic::rectangles;
use dehate_core::masker::{
    embed_span, gradient_check, init, load_checkpoint, predict, save_checkpoint, train_with,
    LossKind, MaskerConfig, TrainBatch, TrainOptions,
};
use dehate_core::numerics::gradcheck::check_random_graphs;
use dehate_core::numerics::{tensor_read, tensor_write};
use dehate_core::redact::{anonymize, recover_mask};
use dehate_core::textproc::{build_prompt, extract_spans, normalize_word, words, HateSpan};
use dehate_core::{BinaryMask, ImageRGB8};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{
    BlurArgs, Cli, CmdResult, Command, Failure, GradcheckArgs, HeatmapArgs, LeaderboardArgs, LossArg,
    ManifestCommand, MaskArgs, MaskerShape, PredictArgs, PromptArgs, RecoverArgs, ScoreArgs, SpansArgs,
    SplitArg, SynthArgs, TrainArgs,
};

pub(crate) fn dispatch(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Heatmap(a) => heatmap(a),
        Command::Mask(a) => mask(&cfg, a),
        Command::Blur(a) => blur(&cfg, a),
        Command::Spans(a) => spans(a),
        Command::Prompt(a) => prompt(&cfg, a),
        Command::RecoverMask(a) => recover(a),
        Command::Score(a) => score_cmd(a),
        Command::Leaderboard(a) => leaderboard_cmd(a),
        Command::Train(a) => train_cmd(&cfg, a),
        Command::Predict(a) => predict_cmd(&cfg, a),
        Command::Gradcheck(a) => gradcheck(&cfg, a),
        Command::Synth(a) => synth(&cfg, a),
        Command::Manifest(ManifestCommand::Validate { path }) => {
            let counts = load_manifest(&path)?.validate()?;
            print_json(&counts)
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> Failure {
    Failure::Data(msg.into())
}

fn check_tau(name: &str, tau: f32) -> CmdResult {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(usage(format!("{name} {tau} outside (0, 1]")))
    }
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let text = serde_json::to_string(value).map_err(|e| data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Writes `text` to `out`, or stdout when `out` is absent.
fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| data(format!("stdout: {e}")))
        }
    }
}

fn read_heatmap(path: &Path) -> Result<Heatmap, Failure> {
    Ok(Heatmap::from_tensor(tensor_read(path)?)?)
}

fn to_split(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    }
}

fn heatmap(a: HeatmapArgs) -> CmdResult {
    if a.out_png.is_none() && a.out_tensor.is_none() {
        return Err(usage("give --out-png and/or --out-tensor"));
    }
    if a.tokens.is_empty() && a.words.is_empty() {
        return Err(usage("select tokens with --tokens or --words"));
    }
    let stack = load_stack(&a.stack, &a.meta)?;
    let mut selected = a.tokens.clone();
    for w in &a.words {
        let want = normalize_word(w);
        let hits: Vec<usize> = stack
            .tokens()
            .iter()
            .enumerate()
            .filter(|(_, t)| normalize_word(t) == want)
            .map(|(i, _)| i)
            .collect();
        if hits.is_empty() {
            return Err(data(format!("token `{w}` not in stack metadata")));
        }
        selected.extend(hits);
    }
    let h = aggregate(&stack, &selected)?;
    if let Some(p) = &a.out_tensor {
        tensor_write(h.tensor(), p)?;
    }
    if let Some(p) = &a.out_png {
        export_gray(&h, p)?;
    }
    Ok(())
}

fn mask(cfg: &RunConfig, a: MaskArgs) -> CmdResult {
    let tau = cfg.tau(a.tau);
    check_tau("tau", tau)?;
    let h = read_heatmap(&a.heatmap)?;
    binarize(&h, tau)?.write_png(&a.out)?;
    Ok(())
}

fn blur(cfg: &RunConfig, a: BlurArgs) -> CmdResult {
    let params = cfg.redaction(a.tau_black, a.tau_avg, a.box_radius)?;
    let img = ImageRGB8::read_png(&a.image)?;
    let h = read_heatmap(&a.heatmap)?;
    let (out, m) = anonymize(&img, &h, &params)?;
    out.write_png(&a.out)?;
    if let Some(p) = &a.mask_out {
        m.write_png(p)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SpanLine<'a> {
    id: &'a str,
    spans: Vec<HateSpan>,
}

fn spans(a: SpansArgs) -> CmdResult {
    match (a.hateful, a.normalized, a.manifest) {
        (Some(h), Some(n), None) => print_json(&extract_spans(&h, &n)?),
        (None, None, Some(path)) => {
            let m = load_manifest(&path)?;
            let mut out = String::new();
            for row in &m.rows {
                if let Some(n) = &row.normalized_text {
                    let line = SpanLine {
                        id: &row.id,
                        spans: extract_spans(&row.text, n)?,
                    };
                    out.push_str(&serde_json::to_string(&line).map_err(|e| data(e.to_string()))?);
                    out.push('\n');
                }
            }
            emit(None, &out)
        }
        _ => Err(usage("give --hateful with --normalized, or --manifest")),
    }
}

/// Spans from the normalized rewrite when one exists; none otherwise.
fn row_spans(text: &str, normalized: Option<&str>) -> Result<Vec<HateSpan>, Failure> {
    match normalized {
        Some(n) if !words(text).is_empty() && !words(n).is_empty() => Ok(extract_spans(text, n)?),
        _ => Ok(Vec::new()),
    }
}

#[derive(Serialize)]
struct PromptLine<'a> {
    id: &'a str,
    prompt: String,
    truncated: bool,
    spans: Vec<[usize; 2]>,
}

fn prompt_line(id: &str, text: &str, normalized: Option<&str>, budget: usize) -> Result<String, Failure> {
    let spans = row_spans(text, normalized)?;
    let p = build_prompt(text, &spans, budget)?;
    let line = PromptLine {
        id,
        prompt: p.full_text,
        truncated: p.truncated,
        spans: spans.iter().map(|s| [s.start, s.end]).collect(),
    };
    serde_json::to_string(&line).map_err(|e| data(e.to_string()))
}

fn prompt(cfg: &RunConfig, a: PromptArgs) -> CmdResult {
    let budget = cfg.word_budget(a.word_budget);
    if budget == 0 {
        return Err(usage("--word-budget must be at least 1"));
    }
    let mut out = String::new();
    match (&a.manifest, &a.text) {
        (Some(path), None) => {
            let m = load_manifest(path)?;
            let rows: Vec<&ManifestRow> = match a.split {
                Some(s) => m.split(to_split(s)).collect(),
                None => m.rows.iter().collect(),
            };
            for row in rows {
                out.push_str(&prompt_line(&row.id, &row.text, row.normalized_text.as_deref(), budget)?);
                out.push('\n');
            }
        }
        (None, Some(text)) => {
            out.push_str(&prompt_line("-", text, a.normalized.as_deref(), budget)?);
            out.push('\n');
        }
        _ => return Err(usage("give --manifest or --text")),
    }
    emit(a.out.as_deref(), &out)
}

fn recover(a: RecoverArgs) -> CmdResult {
    let orig = ImageRGB8::read_png(&a.original)?;
    let blurred = ImageRGB8::read_png(&a.blurred)?;
    recover_mask(&orig, &blurred, a.tol)?.write_png(&a.out)?;
    Ok(())
}

fn score_cmd(a: ScoreArgs) -> CmdResult {
    let m = load_manifest(&a.manifest)?;
    let rows: Vec<&ManifestRow> = match a.split {
        Some(s) => m.split(to_split(s)).collect(),
        None => m.rows.iter().filter(|r| r.has_truth()).collect(),
    };
    if rows.is_empty() {
        return Err(data("no rows with ground truth to score"));
    }
    if !a.pred.is_dir() {
        return Err(data(format!("{} is not a directory", a.pred.display())));
    }
    let report = score(&a.pred, &m, &rows)?;
    if let Some(p) = &a.report {
        let text = serde_json::to_string_pretty(&report).map_err(|e| data(e.to_string()))?;
        write_text(p, &text)?;
    }
    if !report.missing.is_empty() {
        eprintln!("{} predictions missing, scored as 0", report.missing.len());
    }
    for (id, msg) in &report.errors {
        eprintln!("{id}: {msg}");
    }
    println!("mean {:.6}", report.mean);
    Ok(())
}

fn leaderboard_cmd(a: LeaderboardArgs) -> CmdResult {
    let mut reports = BTreeMap::new();
    for spec in &a.teams {
        let (team, path) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--team expects NAME=REPORT.json, got `{spec}`")))?;
        if team.is_empty() {
            return Err(usage(format!("empty team name in `{spec}`")));
        }
        let raw = fs::read_to_string(path).map_err(|e| data(format!("{path}: {e}")))?;
        let report: IoUReport = serde_json::from_str(&raw).map_err(|e| data(format!("{path}: {e}")))?;
        if reports.insert(team.to_string(), report).is_some() {
            return Err(usage(format!("team `{team}` given twice")));
        }
    }
    emit(a.out.as_deref(), &leaderboard_csv(&leaderboard(&reports)))
}

/// Training material for one instance: image, span embeddings, truth mask.
type Example = (ImageRGB8, Vec<Vec<f32>>, BinaryMask);

fn embed_all(spans: &[HateSpan], dim: usize) -> Result<Vec<Vec<f32>>, Failure> {
    Ok(spans
        .iter()
        .map(|s| embed_span(s, dim))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Spans for conditioning the masker; the whole text when no spans are found.
fn conditioning_spans(row: &ManifestRow) -> Result<Vec<HateSpan>, Failure> {
    let spans = row_spans(&row.text, row.normalized_text.as_deref())?;
    if !spans.is_empty() {
        return Ok(spans);
    }
    let all: Vec<String> = words(&row.text).iter().map(|w| w.to_string()).collect();
    if all.is_empty() {
        return Err(data(format!("row `{}` has empty text", row.id)));
    }
    Ok(vec![HateSpan {
        start: 0,
        end: all.len(),
        words: all,
    }])
}

fn manifest_examples(m: &Manifest, config: &MaskerConfig) -> Result<Vec<Example>, Failure> {
    let rows: Vec<&ManifestRow> = m.split(Split::Train).collect();
    if rows.is_empty() {
        return Err(data("manifest has no train rows"));
    }
    rows.par_iter()
        .map(|row| {
            let image = ImageRGB8::read_png(m.resolve(&row.image))?;
            let truth = truth_mask(m, row)?;
            let spans = embed_all(&conditioning_spans(row)?, config.span_embed_dim)?;
            Ok((image, spans, truth))
        })
        .collect()
}

fn train_cmd(cfg: &RunConfig, a: TrainArgs) -> CmdResult {
    let config = cfg.masker(&a.shape, a.seed)?;
    if a.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(usage(format!("--lr {} must be positive", a.lr)));
    }
    let examples: Vec<Example> = match (&a.manifest, a.synthetic) {
        (Some(path), None) => manifest_examples(&load_manifest(path)?, &config)?,
        (None, Some(n)) => {
            if n == 0 {
                return Err(usage("--synthetic must be at least 1"));
            }
            rectangles(&config, n, config.seed)?
                .into_iter()
                .map(|inst| Ok((inst.image, embed_all(&inst.spans, config.span_embed_dim)?, inst.mask)))
                .collect::<Result<_, Failure>>()?
        }
        _ => return Err(usage("give --manifest or --synthetic")),
    };
    let size = a.batch_size.unwrap_or(examples.len());
    if size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    let batches: Vec<TrainBatch> = examples
        .chunks(size)
        .map(|chunk| TrainBatch {
            images: chunk.iter().map(|e| e.0.clone()).collect(),
            span_embeddings: chunk.iter().map(|e| e.1.clone()).collect(),
            truth_masks: chunk.iter().map(|e| e.2.clone()).collect(),
        })
        .collect();
    let mut model = init(&config)?;
    let opts = TrainOptions {
        steps: a.steps,
        lr: a.lr,
        loss: match a.loss {
            LossArg::Bce => LossKind::Bce,
            LossArg::SoftIou => LossKind::SoftIou,
        },
    };
    let log = train_with(&mut model, &batches, &opts, |step, loss| {
        if (step + 1) % 100 == 0 {
            eprintln!("step {:>6}  loss {loss:.6}", step + 1);
        }
    })?;
    save_checkpoint(&model, &a.out)?;
    if let Some(p) = &a.log {
        write_text(p, &serde_json::to_string(&log).map_err(|e| data(e.to_string()))?)?;
    }
    #[derive(Serialize)]
    struct Summary {
        steps: usize,
        final_loss: f64,
        encoder_checksum: String,
    }
    print_json(&Summary {
        steps: a.steps,
        final_loss: *log.losses.last().unwrap_or(&f64::NAN),
        encoder_checksum: model.encoder_checksum(),
    })
}

fn predict_cmd(cfg: &RunConfig, a: PredictArgs) -> CmdResult {
    let tau = cfg.predict_tau(a.tau);
    check_tau("tau", tau)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let m = load_manifest(&a.manifest)?;
    let rows: Vec<&ManifestRow> = match a.split {
        Some(s) => m.split(to_split(s)).collect(),
        None => m.rows.iter().collect(),
    };
    create_dir(&a.out)?;
    rows.par_iter().try_for_each(|row| -> CmdResult {
        let image = ImageRGB8::read_png(m.resolve(&row.image))?;
        let (mask, _) = predict(&model, &image, &conditioning_spans(row)?, tau)?;
        mask.write_png(a.out.join(format!("{}.png", row.id)))?;
        Ok(())
    })
}

fn gradcheck(cfg: &RunConfig, a: GradcheckArgs) -> CmdResult {
    let seed = cfg.seed(a.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs = check_random_graphs(&mut rng, a.graphs)?;
    let masker = if a.graphs_only {
        None
    } else {
        let mini = MaskerConfig {
            image_size: 8,
            patch_size: 4,
            embed_dim: 4,
            encoder_blocks: 2,
            decoder_blocks: 2,
            span_embed_dim: 4,
            seed,
        };
        Some(gradient_check(&mini, LossKind::Bce)?)
    };
    let passed = graphs.passed() && masker.as_ref().is_none_or(|m| m.passed());
    #[derive(Serialize)]
    struct Report {
        graphs: usize,
        graph_checks: usize,
        graph_max_relative_error: f64,
        masker_checks: Option<usize>,
        masker_max_relative_error: Option<f64>,
        passed: bool,
    }
    print_json(&Report {
        graphs: a.graphs,
        graph_checks: graphs.checked,
        graph_max_relative_error: graphs.max_relative_error,
        masker_checks: masker.as_ref().map(|m| m.checked),
        masker_max_relative_error: masker.as_ref().map(|m| m.max_relative_error),
        passed,
    })?;
    if passed {
        Ok(())
    } else {
        Err(data("gradient check failed"))
    }
}

fn synth(cfg: &RunConfig, a: SynthArgs) -> CmdResult {
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let shape = MaskerShape {
        image_size: a.image_size,
        patch_size: a.patch_size,
        ..MaskerShape::default()
    };
    let config = cfg.masker(&shape, a.seed)?;
    create_dir(&a.out.join("images"))?;
    create_dir(&a.out.join("masks"))?;
    let split = to_split(a.split);
    let mut rows = Vec::new();
    for inst in rectangles(&config, a.count, config.seed)? {
        let image = PathBuf::from(format!("images/{}.png", inst.id));
        let mask = PathBuf::from(format!("masks/{}.png", inst.id));
        inst.image.write_png(a.out.join(&image))?;
        inst.mask.write_png(a.out.join(&mask))?;
        let color = inst.spans[0].words.join(" ");
        rows.push(ManifestRow {
            id: inst.id,
            text: format!("look at the {color} square"),
            normalized_text: Some("look at the square".to_string()),
            image,
            blurred: None,
            mask: Some(mask),
            attention: None,
            split,
        });
    }
    write_manifest(&rows, a.out.join("manifest.jsonl"))?;
    Ok(())
}
