//! Subcommand implementations: thin argument resolution over the library
//! pipeline, plus manifests and the text/JSON output split.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use ranktune::embedding::detect_format;
use ranktune::eval::{
    eval_analogy, eval_completion, eval_similarity, AnalogyDataset, CompletionDataset, EvalReport,
    SimilarityDataset,
};
use ranktune::labels::{
    accumulate, default_min_support, finalize, inject_lexicon, LexiconPairs, RankingLabelSet,
};
use ranktune::neighbors::{random_threshold, top_k};
use ranktune::train::{StopReason, ThresholdSpec, TrainConfig, TrainState};
use ranktune::{
    load_embedding, save_embedding, Embedding, StopMode, SweepMode, TextFormat, UpdateRule,
    WordOrder,
};
use serde_json::json;

use crate::args::{
    Cli, Command, EvaluateArgs, FinetuneArgs, FormatArg, GenerateArgs, NeighborsArgs, OrderArg,
    StopModeArg, SweepArg, ThresholdArgs, UpdateRuleArg,
};
use crate::config::{self, Section};
use crate::failure::Failure;
use crate::manifest::{ManifestBuilder, RunManifest};

pub fn run(cli: Cli) -> Result<(), Failure> {
    let section = config::load(cli.config.as_deref(), cli.command.name())?;
    let ctx = Ctx {
        json: cli.json,
        config_path: cli.config,
    };
    match cli.command {
        Command::GenerateLabels(args) => cmd_generate_labels(args, &section, &ctx),
        Command::Finetune(args) => cmd_finetune(args, &section, &ctx),
        Command::Evaluate(args) => cmd_evaluate(args, &section, &ctx),
        Command::Neighbors(args) => cmd_neighbors(args, &section, &ctx),
        Command::Threshold(args) => cmd_threshold(args, &section, &ctx),
    }
}

struct Ctx {
    json: bool,
    config_path: Option<PathBuf>,
}

impl Ctx {
    fn track_config(&self, mb: &mut ManifestBuilder) -> Result<(), Failure> {
        if let Some(path) = &self.config_path {
            mb.input(path)?;
        }
        Ok(())
    }
}

fn parse_enum<T: ValueEnum + Copy>(text: &str, key: &str) -> Result<T, Failure> {
    T::from_str(text, true)
        .map_err(|_| Failure::Input(format!("invalid value `{text}` for `{key}`")))
}

fn resolve_format(
    flag: Option<FormatArg>,
    section: &Section,
) -> Result<Option<TextFormat>, Failure> {
    if let Some(f) = flag {
        return Ok(Some(f.into()));
    }
    match section.string("format")? {
        Some(s) => Ok(Some(parse_enum::<FormatArg>(&s, "format")?.into())),
        None => Ok(None),
    }
}

/// Digests, loads, optionally case-folds, and normalizes one embedding;
/// returns it with the text format it arrived in.
fn load_tracked(
    path: &Path,
    format: Option<TextFormat>,
    lowercase: bool,
    mb: &mut ManifestBuilder,
) -> Result<(Embedding, TextFormat), Failure> {
    mb.input(path)?;
    let fmt = match format {
        Some(f) => f,
        None => detect_format(path)?,
    };
    let mut e = load_embedding(path, Some(fmt))?;
    if lowercase {
        let (folded, dropped) = e.fold_lowercase();
        if dropped > 0 {
            eprintln!(
                "ranktune: {}: dropped {dropped} rows whose tokens collide after lowercasing",
                path.display()
            );
        }
        e = folded;
    }
    Ok((e.normalize_rows()?, fmt))
}

fn print_json(value: serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(&value).expect("report serialization cannot fail")
    );
}

fn cmd_generate_labels(args: GenerateArgs, section: &Section, ctx: &Ctx) -> Result<(), Failure> {
    let started = Instant::now();
    let mut mb = ManifestBuilder::new();
    ctx.track_config(&mut mb)?;

    let top_n = args.top_n.or(section.usize("top-n")?).unwrap_or(200);
    let cap = args.cap.or(section.usize("cap")?).unwrap_or(200);
    let lowercase = args.lowercase || section.bool("lowercase")?.unwrap_or(false);
    let format = resolve_format(args.format, section)?;

    let mut embeddings = Vec::with_capacity(args.embeddings.len());
    for path in &args.embeddings {
        let (e, _) = load_tracked(path, format, lowercase, &mut mb)?;
        embeddings.push(e);
    }
    let lexicon = match &args.lexicon {
        Some(path) => {
            mb.input(path)?;
            Some(LexiconPairs::load(path)?)
        }
        None => None,
    };

    let sources = embeddings.len() + usize::from(lexicon.is_some());
    let (min_support, downgraded) = match args.min_support.or(section.u32("min-support")?) {
        Some(m) => (m, false),
        None => default_min_support(sources),
    };
    if downgraded {
        eprintln!(
            "ranktune: only {sources} source(s); min-support lowered to 0 \
             (the default consensus filter needs at least 3)"
        );
    }

    let mut acc = accumulate(&embeddings, top_n)?;
    let lexicon_dropped = match &lexicon {
        Some(lex) => inject_lexicon(&mut acc, lex),
        None => 0,
    };
    let degenerate = acc.skipped_degenerate();
    let labels = finalize(acc, min_support, cap);
    labels.save(&args.out)?;
    mb.output(&args.out);

    let config_echo = json!({
        "top_n": top_n,
        "min_support": min_support,
        "cap": cap,
        "lowercase": lowercase,
        "format": format.map(|f| f.to_string()),
        "sources": sources,
    });
    let manifest = mb.finish("generate-labels", config_echo, started);
    manifest.write(&RunManifest::path_for(&args.out))?;

    if ctx.json {
        print_json(json!({
            "command": "generate-labels",
            "words_labeled": labels.len(),
            "total_entries": labels.total_entries(),
            "mean_list_length": labels.mean_list_len(),
            "degenerate_words_skipped": degenerate,
            "lexicon_pairs_dropped": lexicon_dropped,
            "out": args.out.display().to_string(),
            "manifest": manifest.to_value(),
        }));
    } else {
        println!(
            "labeled {} words, mean list length {:.1} -> {}",
            labels.len(),
            labels.mean_list_len(),
            args.out.display()
        );
        if degenerate > 0 {
            println!("skipped {degenerate} words with no positive-cosine neighbor");
        }
        if lexicon_dropped > 0 {
            println!("dropped {lexicon_dropped} lexicon pairs outside the fused vocabulary");
        }
    }
    Ok(())
}

fn preset_list() -> String {
    ranktune::EPSILON_PRESETS
        .iter()
        .map(|(name, _)| *name)
        .collect::<Vec<_>>()
        .join(", ")
}

fn preset_value(name: &str) -> Result<f64, Failure> {
    ranktune::epsilon_preset(name).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown preset `{name}`; expected one of: {}",
            preset_list()
        ))
    })
}

fn resolve_epsilon(args: &FinetuneArgs, section: &Section) -> Result<f64, Failure> {
    if args.epsilon.is_some() && args.preset.is_some() {
        return Err(Failure::Usage(
            "--epsilon and --preset are mutually exclusive".to_string(),
        ));
    }
    if let Some(e) = args.epsilon {
        return Ok(e);
    }
    if let Some(name) = &args.preset {
        return preset_value(name);
    }
    match (section.f64("epsilon")?, section.string("preset")?) {
        (Some(_), Some(_)) => Err(Failure::Input(
            "config sets both `epsilon` and `preset`".to_string(),
        )),
        (Some(e), None) => Ok(e),
        (None, Some(name)) => preset_value(&name),
        (None, None) => Err(Failure::Usage(format!(
            "finetune needs --epsilon or --preset (one of: {})",
            preset_list()
        ))),
    }
}

fn parse_threshold(text: &str, sample: Option<usize>, seed: u64) -> Result<ThresholdSpec, Failure> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(ThresholdSpec::Auto {
            sample_size: sample,
            seed,
        });
    }
    let value: f64 = text.parse().map_err(|_| {
        Failure::Usage(format!(
            "--threshold expects `auto` or a number, got `{text}`"
        ))
    })?;
    Ok(ThresholdSpec::Explicit(value))
}

fn stop_name(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Criterion => "criterion",
        StopReason::MaxEpochs => "max-epochs",
        StopReason::DegenerateLoss => "degenerate-loss",
    }
}

fn write_history(path: &Path, state: &TrainState) -> Result<(), Failure> {
    let mut body = String::from("epoch,J_rank,J_simi,seconds\n");
    for (epoch, ((jr, js), secs)) in state
        .j_rank
        .iter()
        .zip(&state.j_simi)
        .zip(&state.seconds)
        .enumerate()
    {
        body.push_str(&format!("{epoch},{jr},{js},{secs:.3}\n"));
    }
    std::fs::write(path, body).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_finetune(args: FinetuneArgs, section: &Section, ctx: &Ctx) -> Result<(), Failure> {
    let started = Instant::now();
    let mut mb = ManifestBuilder::new();
    ctx.track_config(&mut mb)?;

    let epsilon = resolve_epsilon(&args, section)?;
    let lr = args.lr.or(section.f64("lr")?).unwrap_or(0.1);
    let stop_mode = match args.stop_mode {
        Some(m) => m,
        None => match section.string("stop-mode")? {
            Some(s) => parse_enum::<StopModeArg>(&s, "stop-mode")?,
            None => StopModeArg::Initial,
        },
    };
    let max_epochs = args
        .max_epochs
        .or(section.usize("max-epochs")?)
        .unwrap_or(100);
    let seed = args.seed.or(section.u64("seed")?).unwrap_or(0);
    let sample = args.sample.or(section.usize("sample")?);
    let threshold_text = match args.threshold.clone() {
        Some(t) => Some(t),
        None => section.threshold_text()?,
    };
    let threshold = parse_threshold(threshold_text.as_deref().unwrap_or("auto"), sample, seed)?;
    let rank_cap = args.rank_cap.or(section.usize("rank-cap")?);
    let update_rule = match args.update_rule {
        Some(r) => r,
        None => match section.string("update-rule")? {
            Some(s) => parse_enum::<UpdateRuleArg>(&s, "update-rule")?,
            None => UpdateRuleArg::InverseError,
        },
    };
    let order = match args.order {
        Some(o) => o,
        None => match section.string("order")? {
            Some(s) => parse_enum::<OrderArg>(&s, "order")?,
            None => OrderArg::Ascending,
        },
    };
    let sweep = match args.sweep {
        Some(s) => s,
        None => match section.string("sweep")? {
            Some(s) => parse_enum::<SweepArg>(&s, "sweep")?,
            None => SweepArg::InPlace,
        },
    };
    let lowercase = args.lowercase || section.bool("lowercase")?.unwrap_or(false);
    let format = resolve_format(args.format, section)?;

    let (embedding, fmt) = load_tracked(&args.embedding, format, lowercase, &mut mb)?;
    mb.input(&args.labels)?;
    let labels = RankingLabelSet::load(&args.labels)?;

    let mut cfg = TrainConfig::new(epsilon);
    cfg.learning_rate = lr;
    cfg.stop_mode = match stop_mode {
        StopModeArg::Initial => StopMode::RelativeToInitial,
        StopModeArg::Previous => StopMode::RelativeToPrevious,
    };
    cfg.max_epochs = max_epochs;
    cfg.threshold = threshold;
    cfg.rank_cap = rank_cap;
    cfg.update_rule = match update_rule {
        UpdateRuleArg::InverseError => UpdateRule::InverseError,
        UpdateRuleArg::Standard => UpdateRule::Standard,
    };
    cfg.word_order = match order {
        OrderArg::Ascending => WordOrder::Ascending,
        OrderArg::Shuffled => WordOrder::Shuffled { seed },
    };
    cfg.sweep_mode = match sweep {
        SweepArg::InPlace => SweepMode::InPlace,
        SweepArg::Snapshot => SweepMode::Snapshot,
    };
    mb.seed(seed);

    let (tuned, state) = ranktune::finetune(embedding, &labels, &cfg)?;
    save_embedding(&tuned, &args.out, fmt)?;
    mb.output(&args.out);
    if let Some(history) = &args.history {
        write_history(history, &state)?;
        mb.output(history);
    }

    let config_echo =
        serde_json::to_value(&state.config).expect("config serialization cannot fail");
    let manifest = mb.finish("finetune", config_echo, started);
    manifest.write(&RunManifest::path_for(&args.out))?;

    if ctx.json {
        print_json(json!({
            "command": "finetune",
            "threshold": state.threshold,
            "epochs_run": state.epochs_run,
            "stopped": stop_name(state.stopped),
            "j_rank": state.j_rank,
            "j_simi": state.j_simi,
            "seconds": state.seconds,
            "words_skipped": state.words_skipped,
            "entries_skipped": state.entries_skipped,
            "out": args.out.display().to_string(),
            "history": args.history.as_ref().map(|p| p.display().to_string()),
            "manifest": manifest.to_value(),
        }));
    } else {
        println!("threshold {:.9}", state.threshold);
        println!(
            "stopped after {} epoch(s) ({}): J_rank {} -> {}",
            state.epochs_run,
            stop_name(state.stopped),
            state.j_rank.first().expect("history has the epoch-0 entry"),
            state.j_rank.last().expect("history has the epoch-0 entry"),
        );
        if state.words_skipped > 0 || state.entries_skipped > 0 {
            println!(
                "skipped {} labeled word(s) and {} neighbor entr(y/ies) not in the vocabulary",
                state.words_skipped, state.entries_skipped
            );
        }
        println!("wrote {}", args.out.display());
    }
    Ok(())
}

fn build_report(
    e: &Embedding,
    similarity: Option<&SimilarityDataset>,
    analogy: Option<&AnalogyDataset>,
    completion: Option<&CompletionDataset>,
) -> Result<EvalReport, Failure> {
    let mut report = EvalReport::default();
    if let Some(ds) = similarity {
        report.push("similarity", "spearman", &eval_similarity(e, ds)?);
    }
    if let Some(ds) = analogy {
        report.push("analogy", "accuracy", &eval_analogy(e, ds)?);
    }
    if let Some(ds) = completion {
        report.push("completion", "accuracy", &eval_completion(e, ds)?);
    }
    Ok(report)
}

fn align_rows(rows: &[Vec<String>]) -> String {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            for _ in cell.len()..*w {
                line.push(' ');
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn count_pair(before: usize, after: usize) -> String {
    if before == after {
        before.to_string()
    } else {
        format!("{before}/{after}")
    }
}

fn paired_table(before: &EvalReport, after: &EvalReport) -> String {
    let mut rows = vec![vec![
        "task".to_string(),
        "metric".to_string(),
        "before".to_string(),
        "after".to_string(),
        "evaluated".to_string(),
        "skipped".to_string(),
    ]];
    for (b, a) in before.tasks.iter().zip(&after.tasks) {
        rows.push(vec![
            b.task.clone(),
            b.metric.clone(),
            format!("{:.4}", b.value),
            format!("{:.4}", a.value),
            count_pair(b.evaluated, a.evaluated),
            count_pair(b.skipped, a.skipped),
        ]);
    }
    align_rows(&rows)
}

fn cmd_evaluate(args: EvaluateArgs, section: &Section, ctx: &Ctx) -> Result<(), Failure> {
    let started = Instant::now();
    let mut mb = ManifestBuilder::new();
    ctx.track_config(&mut mb)?;

    if args.similarity.is_none() && args.analogy.is_none() && args.completion.is_none() {
        return Err(Failure::Usage(
            "evaluate needs at least one dataset: --similarity, --analogy, or --completion"
                .to_string(),
        ));
    }
    let lowercase = args.lowercase || section.bool("lowercase")?.unwrap_or(false);
    let format = resolve_format(args.format, section)?;

    let similarity = match &args.similarity {
        Some(path) => {
            mb.input(path)?;
            let ds = SimilarityDataset::load(path)?;
            Some(if lowercase {
                let (folded, dropped) = ds.lowercased();
                if dropped > 0 {
                    eprintln!(
                        "ranktune: {}: dropped {dropped} case-colliding pairs",
                        path.display()
                    );
                }
                folded
            } else {
                ds
            })
        }
        None => None,
    };
    let analogy = match &args.analogy {
        Some(path) => {
            mb.input(path)?;
            let ds = AnalogyDataset::load(path)?;
            Some(if lowercase {
                let (folded, dropped) = ds.lowercased();
                if dropped > 0 {
                    eprintln!(
                        "ranktune: {}: dropped {dropped} case-colliding items",
                        path.display()
                    );
                }
                folded
            } else {
                ds
            })
        }
        None => None,
    };
    let completion = match &args.completion {
        Some(path) => {
            mb.input(path)?;
            let ds = CompletionDataset::load(path)?;
            Some(if lowercase { ds.lowercased() } else { ds })
        }
        None => None,
    };

    let config_echo = json!({
        "lowercase": lowercase,
        "format": format.map(|f| f.to_string()),
    });

    match (&args.embedding, &args.before, &args.after) {
        (Some(path), None, None) => {
            let (e, _) = load_tracked(path, format, lowercase, &mut mb)?;
            let report = build_report(
                &e,
                similarity.as_ref(),
                analogy.as_ref(),
                completion.as_ref(),
            )?;
            let manifest = mb.finish("evaluate", config_echo, started);
            if ctx.json {
                print_json(json!({
                    "command": "evaluate",
                    "report": serde_json::to_value(&report).expect("report serializes"),
                    "manifest": manifest.to_value(),
                }));
            } else {
                print!("{}", report.text_table());
            }
        }
        (None, Some(before_path), Some(after_path)) => {
            let (before_e, _) = load_tracked(before_path, format, lowercase, &mut mb)?;
            let (after_e, _) = load_tracked(after_path, format, lowercase, &mut mb)?;
            let before = build_report(
                &before_e,
                similarity.as_ref(),
                analogy.as_ref(),
                completion.as_ref(),
            )?;
            let after = build_report(
                &after_e,
                similarity.as_ref(),
                analogy.as_ref(),
                completion.as_ref(),
            )?;
            let manifest = mb.finish("evaluate", config_echo, started);
            if ctx.json {
                print_json(json!({
                    "command": "evaluate",
                    "before": serde_json::to_value(&before).expect("report serializes"),
                    "after": serde_json::to_value(&after).expect("report serializes"),
                    "manifest": manifest.to_value(),
                }));
            } else {
                print!("{}", paired_table(&before, &after));
            }
        }
        _ => {
            return Err(Failure::Usage(
                "provide --embedding, or --before together with --after".to_string(),
            ))
        }
    }
    Ok(())
}

fn cmd_neighbors(args: NeighborsArgs, section: &Section, ctx: &Ctx) -> Result<(), Failure> {
    let started = Instant::now();
    let mut mb = ManifestBuilder::new();
    ctx.track_config(&mut mb)?;

    let k = args.k.or(section.usize("k")?).unwrap_or(10);
    let lowercase = args.lowercase || section.bool("lowercase")?.unwrap_or(false);
    let format = resolve_format(args.format, section)?;
    let (e, _) = load_tracked(&args.embedding, format, lowercase, &mut mb)?;
    let word = if lowercase {
        args.word.to_lowercase()
    } else {
        args.word.clone()
    };
    let list = top_k(&e, &word, k)?;

    if ctx.json {
        let config_echo = json!({
            "word": word,
            "k": k,
            "lowercase": lowercase,
            "format": format.map(|f| f.to_string()),
        });
        let manifest = mb.finish("neighbors", config_echo, started);
        let neighbors: Vec<serde_json::Value> = list
            .entries
            .iter()
            .enumerate()
            .map(|(i, (token, cosine))| json!({"rank": i + 1, "token": token, "cosine": cosine}))
            .collect();
        print_json(json!({
            "command": "neighbors",
            "word": list.query,
            "neighbors": neighbors,
            "manifest": manifest.to_value(),
        }));
    } else {
        println!("rank\ttoken\tcosine");
        for (i, (token, cosine)) in list.entries.iter().enumerate() {
            println!("{}\t{token}\t{cosine:.9}", i + 1);
        }
    }
    Ok(())
}

fn cmd_threshold(args: ThresholdArgs, section: &Section, ctx: &Ctx) -> Result<(), Failure> {
    let started = Instant::now();
    let mut mb = ManifestBuilder::new();
    ctx.track_config(&mut mb)?;

    let sample = args.sample.or(section.usize("sample")?).unwrap_or(5000);
    let seed = args.seed.or(section.u64("seed")?).unwrap_or(0);
    mb.seed(seed);
    let value = random_threshold(args.dim, sample, seed)?;

    if ctx.json {
        let config_echo = json!({"dim": args.dim, "sample": sample, "seed": seed});
        let manifest = mb.finish("threshold", config_echo, started);
        print_json(json!({
            "command": "threshold",
            "dim": args.dim,
            "sample": sample,
            "seed": seed,
            "threshold": value,
            "manifest": manifest.to_value(),
        }));
    } else {
        println!("{value:.9}");
    }
    Ok(())
}
