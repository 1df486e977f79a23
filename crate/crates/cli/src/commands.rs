//! Subcommand implementations. Each reads its inputs, runs the module
//! operation it wraps, and writes files; stdout carries a short summary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use lori_core::classify::{
    train_classifier, learning_curve, load_classifier, Backend, ModelManifest, PhraseLibrary, SentenceClassifier,
    TrainConfig, TrainingRow, TOKENIZER_VERSION,
};
use lori_core::corpus::{load_corpus, save_corpus, split_by_applicant, Corpus, MicroLabel, SentenceRecord, SplitFractions};
use lori_core::evalmetrics::{cohen_kappa, weighted_metrics_from_labels};
use lori_core::extract::{run_react, write_trace_log, ExtractionResult, LlamaServerConfig, SessionRole, ToolRegistry};
use lori_core::lingfeat::{apply_normalizer, extract_features, fit_normalizer, FeatureRegistry, RuleTagger};
use lori_core::pipeline::write_traces;
use lori_core::textprep::{clean_text, iqr_filter, repair_conjoined, CleaningConfig, SplitterConfig};
use lori_core::weaksup::{build_weak_dataset, write_weak_dataset, LabelingFunction};
use lori_service::{Engine, EngineConfig, ExtractorChoice, GenerativeChoice, ServiceConfig};
use serde::{Deserialize, Serialize};

use crate::config::Profile;
use crate::error::{CliError, Context};
use crate::io::{guard, ndjson, pretty, read_ndjson, write};
use crate::lfspec::LfSpec;
use crate::{
    AnalyzeArgs, BackendFlag, Cli, Command, EvalArgs, ExtractArgs, ExtractorFlag, FeaturesArgs, GenerativeFlag,
    Global, PrepArgs, ServeArgs, TrainArgs, WeaklabelArgs,
};

struct Ctx {
    global: Global,
    profile: Profile,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.global.seed.unwrap_or(self.profile.seed)
    }

    fn engine_config(&self) -> EngineConfig {
        let g = &self.global;
        EngineConfig {
            models: g.models.clone(),
            prompts: g.prompts.clone(),
            generative: match g.generative {
                GenerativeFlag::Doubles => GenerativeChoice::Doubles,
                GenerativeFlag::Llama => GenerativeChoice::Llama(LlamaServerConfig {
                    base_url: g.llama_url.clone(),
                    seed: self.seed(),
                    ..LlamaServerConfig::default()
                }),
            },
            extractor: match g.extractor {
                ExtractorFlag::Auto => ExtractorChoice::Auto,
                ExtractorFlag::TextLayer => ExtractorChoice::TextLayer,
                ExtractorFlag::Ocr => ExtractorChoice::Ocr,
                ExtractorFlag::Fixture => ExtractorChoice::Fixture,
            },
            max_steps: Some(self.profile.max_steps),
        }
    }

    fn engine(&self) -> Result<Engine, CliError> {
        for (flag, p) in [("--models", &self.global.models), ("--prompts", &self.global.prompts)] {
            if let Some(p) = p.as_ref().filter(|p| !p.is_dir()) {
                return Err(CliError::invalid(format!("{flag} {}: not a directory", p.display())));
            }
        }
        Engine::load(&self.engine_config()).invalid("loading models")
    }

    /// Checks every output up front so nothing is written on refusal.
    fn guard_all<'a>(&self, paths: impl IntoIterator<Item = &'a Path>) -> Result<(), CliError> {
        paths.into_iter().try_for_each(|p| guard(p, self.global.force))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let profile = Profile::load(cli.global.config.as_deref(), cli.global.paper_config)?;
    let ctx = Ctx {
        global: cli.global,
        profile,
    };
    match cli.command {
        Command::Prep(a) => prep(&ctx, a),
        Command::Features(a) => features(&ctx, a),
        Command::Weaklabel(a) => weaklabel(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn read_corpus(dir: &Path) -> Result<Corpus, CliError> {
    if !dir.is_dir() {
        return Err(CliError::invalid(format!("{}: corpus directory not found", dir.display())));
    }
    let corpus = load_corpus(dir).invalid_at(dir)?;
    if corpus.is_empty() {
        return Err(CliError::invalid(format!("{}: corpus is empty", dir.display())));
    }
    Ok(corpus)
}

/// Input documents with their applicant ids, in file-name order.
fn documents(args: &PrepArgs) -> Result<Vec<(String, PathBuf)>, CliError> {
    if args.input.is_dir() {
        if args.applicant.is_some() {
            return Err(CliError::invalid("--applicant applies to a single input file, not a directory"));
        }
        let mut docs = Vec::new();
        for entry in std::fs::read_dir(&args.input).invalid_at(&args.input)? {
            let path = entry.invalid_at(&args.input)?.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if path.is_file() && !stem.starts_with('.') {
                docs.push((stem.to_owned(), path.clone()));
            }
        }
        docs.sort();
        if docs.is_empty() {
            return Err(CliError::invalid(format!("{}: no documents", args.input.display())));
        }
        Ok(docs)
    } else if args.input.is_file() {
        let id = match &args.applicant {
            Some(a) => a.clone(),
            None => args
                .input
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CliError::invalid("cannot derive an applicant id; pass --applicant"))?
                .to_owned(),
        };
        Ok(vec![(id, args.input.clone())])
    } else {
        Err(CliError::invalid(format!("--input {}: not found", args.input.display())))
    }
}

#[derive(Serialize)]
struct CleanedRecord<'a> {
    sentence_id: &'a str,
    text: String,
}

#[derive(Serialize)]
struct PrepSummary {
    documents: usize,
    letters: usize,
    sentences: usize,
    kept_sentences: usize,
    iqr_bounds: Option<(f64, f64)>,
}

fn prep(ctx: &Ctx, args: PrepArgs) -> Result<(), CliError> {
    let docs = documents(&args)?;
    let fractions = match args.split.as_deref() {
        Some(&[a, b, c]) => Some(SplitFractions::new(a, b, c)),
        Some(_) => return Err(CliError::invalid("--split takes exactly three fractions")),
        None => None,
    };
    ctx.guard_all([args.out.as_path()].into_iter().chain(args.cleaned.as_deref()))?;
    let engine = ctx.engine()?;

    let mut letters = Vec::new();
    let mut sentences = Vec::new();
    for (applicant, path) in &docs {
        let bytes = std::fs::read(path).invalid_at(path)?;
        let doc = engine
            .ingest(&bytes, applicant, &args.boundary)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        letters.extend(doc.letters);
        sentences.extend(doc.sentences);
    }
    let total = sentences.len();
    let mut bounds = None;
    if args.iqr {
        let (kept, b) = iqr_filter(&sentences).runtime("iqr filter")?;
        bounds = Some((b.q1, b.q3));
        let keep: BTreeSet<String> = kept.iter().map(|s| s.sentence_id.clone()).collect();
        for l in &mut letters {
            l.sentences.retain(|id| keep.contains(id));
        }
        sentences = kept;
    }
    let mut builder = Corpus::builder();
    for l in letters.iter().cloned() {
        builder = builder.letter(l);
    }
    for s in sentences.iter().cloned() {
        builder = builder.sentence(s);
    }
    let corpus = builder.build().runtime("building corpus")?;
    save_corpus(&corpus, &args.out).runtime_at(&args.out)?;

    if let Some(f) = fractions {
        let splits = split_by_applicant(&corpus, f, ctx.seed()).invalid("--split")?;
        let by_name: BTreeMap<String, &BTreeSet<String>> = splits
            .iter()
            .map(|s| (format!("{:?}", s.name).to_lowercase(), &s.sentence_ids))
            .collect();
        write(&args.out.join("splits.json"), &pretty(&by_name))?;
    }
    if let Some(path) = &args.cleaned {
        let splitter = SplitterConfig::bundled();
        let cleaning = CleaningConfig::default();
        let records: Vec<CleanedRecord> = sentences
            .iter()
            .map(|s| CleanedRecord {
                sentence_id: &s.sentence_id,
                text: repair_conjoined(&clean_text(&s.text, &cleaning), &splitter),
            })
            .collect();
        write(path, &ndjson(&records))?;
    }
    let summary = PrepSummary {
        documents: docs.len(),
        letters: letters.len(),
        sentences: total,
        kept_sentences: sentences.len(),
        iqr_bounds: bounds,
    };
    write(&args.out.join("prep_report.json"), &pretty(&summary))?;
    println!(
        "{} documents, {} letters, {} of {} sentences kept -> {}",
        summary.documents,
        summary.letters,
        summary.kept_sentences,
        summary.sentences,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FeatureRecord<'a> {
    sentence_id: &'a str,
    registry_version: &'a str,
    values: &'a [f64],
}

fn features(ctx: &Ctx, args: FeaturesArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let registry = match &args.registry {
        Some(p) => FeatureRegistry::load(p).invalid_at(p)?,
        None => FeatureRegistry::bundled(),
    };
    ctx.guard_all([args.out.as_path()].into_iter().chain(args.normalize.as_deref()))?;
    let tagger = RuleTagger;
    let mut vectors = corpus
        .sentences()
        .iter()
        .map(|s| extract_features(s, &tagger, &registry))
        .collect::<Result<Vec<_>, _>>()
        .runtime("feature extraction")?;
    if let Some(stats_path) = &args.normalize {
        let stats = fit_normalizer(&vectors).runtime("normalisation")?;
        vectors = vectors
            .iter()
            .map(|v| apply_normalizer(v, &stats))
            .collect::<Result<_, _>>()
            .runtime("normalisation")?;
        write(stats_path, &pretty(&stats))?;
    }
    let records: Vec<FeatureRecord> = corpus
        .sentences()
        .iter()
        .zip(&vectors)
        .map(|(s, v)| FeatureRecord {
            sentence_id: &s.sentence_id,
            registry_version: &v.registry_version,
            values: &v.values,
        })
        .collect();
    write(&args.out, &ndjson(&records))?;
    println!("{} vectors of {} features -> {}", records.len(), registry.features.len(), args.out.display());
    Ok(())
}

fn weaklabel(ctx: &Ctx, args: WeaklabelArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let spec = LfSpec::load(&args.lfs)?;
    let base = args.lfs.parent().unwrap_or(Path::new("."));
    let built = spec.build(base, ctx.profile.lf_threshold, ctx.seed())?;
    ctx.guard_all([args.out.as_path(), args.coverage.as_path()])?;
    let lfs: Vec<&dyn LabelingFunction> = built.functions.iter().map(|f| f.as_ref()).collect();
    let excluded: BTreeSet<String> = args.exclude.iter().cloned().collect();
    let (dataset, coverage) =
        build_weak_dataset(&corpus, &lfs, &built.policy, &excluded).runtime("weak labelling")?;
    write_weak_dataset(&args.out, &dataset.rows).runtime_at(&args.out)?;
    write(&args.coverage, &pretty(&coverage))?;
    println!(
        "{} labelled, {} excluded of {} sentences -> {}",
        coverage.labeled_count,
        coverage.excluded_count,
        coverage.sentences,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    weighted_f1: f64,
    weighted_precision: f64,
    weighted_recall: f64,
    accuracy: f64,
}

fn train(ctx: &Ctx, args: TrainArgs) -> Result<(), CliError> {
    let rows: Vec<TrainingRow> = read_ndjson(&args.data)?;
    let eval_rows: Option<Vec<TrainingRow>> = args.eval.as_deref().map(read_ndjson).transpose()?;
    let sizes = args.sizes.clone().unwrap_or_else(|| ctx.profile.learning_curve_sizes.clone());
    ctx.guard_all([args.out.as_path()].into_iter().chain(args.curve.as_deref()))?;
    let config = TrainConfig {
        backend: match args.backend {
            BackendFlag::Lightweight => Backend::Lightweight,
            BackendFlag::Lexicon => Backend::Lexicon,
            BackendFlag::Transformer => Backend::Transformer,
        },
        seed: ctx.seed(),
        iterations: args.iterations.unwrap_or(ctx.profile.train_iterations),
        decision_threshold: args.threshold.unwrap_or(ctx.profile.decision_threshold),
        ..TrainConfig::default()
    };

    let model: Box<dyn SentenceClassifier> = match config.backend {
        Backend::Lexicon => {
            // Nothing to fit: the artifact pins the bundled phrase library.
            std::fs::create_dir_all(&args.out).runtime_at(&args.out)?;
            ModelManifest {
                backend: Backend::Lexicon,
                seed: config.seed,
                tokenizer_version: TOKENIZER_VERSION.into(),
                registry_version: None,
                decision_threshold: config.decision_threshold,
                iterations: 0,
                trained_rows: 0,
            }
            .save(&args.out)
            .runtime_at(&args.out)?;
            write(&args.out.join("phrase_library.json"), &pretty(&PhraseLibrary::bundled()))?;
            load_classifier(&args.out).runtime_at(&args.out)?
        }
        _ => {
            let m = train_classifier(&rows, &config).map_err(|e| match e {
                lori_core::classify::ClassifyError::BackendUnavailable(_) => CliError::runtime(e.to_string()),
                other => CliError::invalid(format!("{}: {other}", args.data.display())),
            })?;
            m.save(&args.out).runtime_at(&args.out)?;
            Box::new(m)
        }
    };
    println!("{} -> {}", model.backend_id(), args.out.display());

    if let Some(eval_rows) = &eval_rows {
        let texts: Vec<&str> = eval_rows.iter().map(|r| r.text.as_str()).collect();
        let truth: Vec<u8> = eval_rows.iter().map(|r| r.label).collect();
        let pred: Vec<u8> = model.predict_batch(&texts).into_iter().map(|p| p.label).collect();
        let m = weighted_metrics_from_labels(&truth, &pred).invalid("--eval")?;
        println!(
            "eval weighted_f1 {:.4} precision {:.4} recall {:.4} accuracy {:.4}",
            m.weighted.f1, m.weighted.precision, m.weighted.recall, m.accuracy
        );
    }
    if let (Some(curve_path), Some(eval_rows)) = (&args.curve, &eval_rows) {
        let points = learning_curve(&rows, &sizes, eval_rows, &config).map_err(|e| CliError::invalid(e.to_string()))?;
        println!("{:>8} {:>11} {:>9} {:>9} {:>9}", "size", "weighted_f1", "precision", "recall", "accuracy");
        for p in &points {
            println!(
                "{:>8} {:>11.4} {:>9.4} {:>9.4} {:>9.4}",
                p.size, p.weighted_f1, p.weighted_precision, p.weighted_recall, p.accuracy
            );
        }
        write(curve_path, &pretty(&points))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct LabelLine {
    sentence_id: String,
    label: u8,
}

#[derive(Serialize)]
struct EvalReport {
    metrics: lori_core::evalmetrics::MetricsReport,
    kappa: Option<lori_core::evalmetrics::KappaResult>,
}

fn eval(ctx: &Ctx, args: EvalArgs) -> Result<(), CliError> {
    let truth: Vec<LabelLine> = read_ndjson(&args.truth)?;
    let pred: Vec<LabelLine> = read_ndjson(&args.pred)?;
    if let Some(out) = &args.out {
        ctx.guard_all([out.as_path()])?;
    }
    let mut predicted: BTreeMap<&str, u8> = BTreeMap::new();
    for p in &pred {
        if predicted.insert(&p.sentence_id, p.label).is_some() {
            return Err(CliError::invalid(format!("--pred: duplicate sentence_id {}", p.sentence_id)));
        }
    }
    let mut seen = BTreeSet::new();
    let mut y_true = Vec::with_capacity(truth.len());
    let mut y_pred = Vec::with_capacity(truth.len());
    for t in &truth {
        if !seen.insert(t.sentence_id.as_str()) {
            return Err(CliError::invalid(format!("--truth: duplicate sentence_id {}", t.sentence_id)));
        }
        let p = predicted
            .get(t.sentence_id.as_str())
            .ok_or_else(|| CliError::invalid(format!("--pred: no prediction for {}", t.sentence_id)))?;
        y_true.push(t.label);
        y_pred.push(*p);
    }
    if let Some(extra) = predicted.keys().find(|k| !seen.contains(*k)) {
        return Err(CliError::invalid(format!("--pred: {extra} is not in --truth")));
    }
    let metrics = weighted_metrics_from_labels(&y_true, &y_pred).invalid("eval")?;
    let kappa = cohen_kappa(&y_true, &y_pred).ok();
    let summary = EvalSummary {
        weighted_f1: metrics.weighted.f1,
        weighted_precision: metrics.weighted.precision,
        weighted_recall: metrics.weighted.recall,
        accuracy: metrics.accuracy,
    };
    println!("weighted_f1 {:.4}", summary.weighted_f1);
    println!("weighted_precision {:.4}", summary.weighted_precision);
    println!("weighted_recall {:.4}", summary.weighted_recall);
    println!("accuracy {:.4}", summary.accuracy);
    match &kappa {
        Some(k) => println!("kappa {:.4}", k.kappa),
        None => println!("kappa undefined"),
    }
    if let Some(out) = &args.out {
        write(out, &pretty(&EvalReport { metrics, kappa }))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ExtractionLine<'a> {
    sentence_id: &'a str,
    micro_label: MicroLabel,
    phrases: &'a [String],
    verified: bool,
    status: lori_core::extract::RunStatus,
}

fn extract(ctx: &Ctx, args: ExtractArgs) -> Result<(), CliError> {
    let sentences: Vec<SentenceRecord> = match (&args.corpus, &args.sentences) {
        (Some(dir), _) => read_corpus(dir)?.sentences().to_vec(),
        (None, Some(path)) => read_ndjson(path)?,
        (None, None) => unreachable!("clap requires one input"),
    };
    let labels: Vec<MicroLabel> = if args.labels.is_empty() {
        MicroLabel::ALL.to_vec()
    } else {
        args.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    };
    ctx.guard_all([args.out.as_path()].into_iter().chain(args.traces.as_deref()))?;
    let engine = ctx.engine()?;
    let selected: Vec<&SentenceRecord> = if args.highlighted {
        sentences.iter().filter(|s| engine.classifier.predict(&s.text).label == 1).collect()
    } else {
        sentences.iter().collect()
    };
    let g = &engine.generative;
    let tools = ToolRegistry::with_verifiers(g.sessions.clone(), g.prompts.clone());
    let mut results: Vec<ExtractionResult> = Vec::new();
    for s in &selected {
        for &label in &labels {
            let session = g.sessions.open(SessionRole::Extraction);
            let r = run_react(s, label, session.as_ref(), &tools, &g.prompts, g.max_steps)
                .map_err(|e| CliError::runtime(format!("{} {label}: {e}", s.sentence_id)))?;
            results.push(r);
        }
    }
    let lines: Vec<ExtractionLine> = results
        .iter()
        .map(|r| ExtractionLine {
            sentence_id: &r.sentence_id,
            micro_label: r.micro_label,
            phrases: &r.phrases,
            verified: r.verified,
            status: r.status,
        })
        .collect();
    write(&args.out, &ndjson(&lines))?;
    if let Some(path) = &args.traces {
        let mut buf = Vec::new();
        write_trace_log(&mut buf, &results).runtime("trace log")?;
        write(path, &buf)?;
    }
    let phrases: usize = results.iter().filter(|r| r.verified).map(|r| r.phrases.len()).sum();
    println!(
        "{} sentences x {} labels, {phrases} verified phrases -> {}",
        selected.len(),
        labels.len(),
        args.out.display()
    );
    Ok(())
}

fn analyze(ctx: &Ctx, args: AnalyzeArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.input).invalid_at(&args.input)?;
    if bytes.is_empty() {
        return Err(CliError::invalid(format!("{}: empty document", args.input.display())));
    }
    ctx.guard_all([args.out.as_path()].into_iter().chain(args.traces.as_deref()))?;
    let engine = ctx.engine()?;
    let doc = engine.ingest(&bytes, &args.applicant, &args.boundary)?;
    let built = engine.report(&doc)?;
    write(&args.out, built.report.to_json().as_bytes())?;
    if let Some(path) = &args.traces {
        let mut buf = Vec::new();
        write_traces(&mut buf, &built).runtime("trace log")?;
        write(path, &buf)?;
    }
    let r = &built.report;
    println!(
        "{}: {} letters, {} of {} sentences highlighted -> {}",
        r.applicant_id,
        r.letters_count,
        r.total_highlighted(),
        r.total_sentences(),
        args.out.display()
    );
    Ok(())
}

fn serve(ctx: &Ctx, args: ServeArgs) -> Result<(), CliError> {
    let store = ctx
        .global
        .store
        .clone()
        .ok_or_else(|| CliError::invalid("serve needs --store or LORI_STORE"))?;
    // Validate the engine before binding so bad flags exit with code 1.
    ctx.engine()?;
    let config = ServiceConfig {
        store,
        engine: ctx.engine_config(),
        workers: args.workers.unwrap_or(ctx.profile.workers),
    };
    let rt = tokio::runtime::Runtime::new().runtime("starting runtime")?;
    rt.block_on(lori_service::serve(config, args.addr)).runtime("serve")?;
    Ok(())
}
