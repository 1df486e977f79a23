//! One function per acceptance criterion. Random inputs come from fixed
//! ChaCha8 seeds, so every run checks the same cases.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lori_core::classify::{learning_curve, train_classifier, LexiconClassifier, PhraseLibrary, SentenceClassifier, TrainConfig};
use lori_core::corpus::{MicroLabel, SentenceRecord, Span};
use lori_core::evalmetrics::{cohen_kappa, weighted_metrics, weighted_metrics_from_labels, ConfusionMatrix};
use lori_core::extract::{
    isolation_leak, parse_phrase_list, run_react, trace_is_well_formed, DoubleSessionFactory, PromptSet,
    RunStatus, ScriptStep, ScriptedClient, ScriptedSessionFactory, SessionRole, StepKind, ToolRegistry,
};
use lori_core::pipeline::{build_report, ingest_document, BoundarySpec, FixtureExtractor, Generative};
use lori_core::synth::{separable_rows, synthetic_corpus};
use lori_core::textprep::{clean_text, iqr_filter, split_conjoined, CleaningConfig, SplitterConfig};
use lori_core::weaksup::{
    aggregate, build_weak_dataset, Aggregate, ConstantLf, LabelVote, LabelingFunction, ScriptedLf, ThresholdPolicy,
    Verdict, Vote,
};
use lori_service::{router, AppState, EngineConfig, JobRecord, JobState, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::{self, RawVote};
use crate::{ensure, SuiteResult};

const FIXTURE: &[u8] = include_bytes!("../../core/tests/fixtures/three_letters.txt");
const GOLDEN: &str = include_str!("../../core/tests/fixtures/three_letters.report.json");
const GOLDEN_APPLICANT: &str = "applicant-001";

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labels drawn with a rate that is sometimes exactly 0 or 1, so
/// single-class vectors are exercised too.
fn labels(r: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let rate = match r.random_range(0..6) {
        0 => 0.0,
        1 => 1.0,
        _ => r.random::<f64>(),
    };
    (0..n).map(|_| u8::from(r.random_bool(rate))).collect()
}

pub fn metrics() -> SuiteResult {
    let mut r = rng(11);
    for case in 0..10_000 {
        let n = r.random_range(1..=64);
        let (t, p) = (labels(&mut r, n), labels(&mut r, n));
        let report = weighted_metrics_from_labels(&t, &p).map_err(err)?;
        let got = [report.weighted.precision, report.weighted.recall, report.weighted.f1, report.accuracy];
        let want = oracle::weighted_prf(&t, &p);
        for (g, w) in got.iter().zip(want) {
            ensure!((g - w).abs() <= 1e-12, "case {case}: got {got:?}, oracle {want:?}");
        }
    }
    let expected = 484.0 / 524.0;
    for fp in 0..=40 {
        let cm = ConfusionMatrix::new(240, fp, 40 - fp, 244);
        ensure!(cm.total() == 524, "total {} for fp {fp}", cm.total());
        let acc = weighted_metrics(&cm).map_err(err)?.accuracy;
        ensure!((acc - expected).abs() <= 1e-9, "fp {fp}: accuracy {acc}");
    }
    Ok(format!("10000 vectors within 1e-12; 41 splits at accuracy {expected:.6}"))
}

pub fn kappa() -> SuiteResult {
    let mut r = rng(12);
    for _ in 0..50 {
        let n = r.random_range(1..=40);
        let a = labels(&mut r, n);
        let k = cohen_kappa(&a, &a).map_err(err)?.kappa;
        ensure!(k == 1.0, "identity gave {k} for {a:?}");
    }
    let k0 = cohen_kappa(&[1, 1, 0, 0], &[1, 0, 0, 1]).map_err(err)?;
    ensure!(
        k0.kappa.abs() <= 1e-12 && (k0.observed_agreement - 0.5).abs() <= 1e-12 && (k0.expected_agreement - 0.5).abs() <= 1e-12,
        "zero case: {k0:?}"
    );
    let k5 = cohen_kappa(&[1, 1, 1, 0], &[1, 1, 0, 0]).map_err(err)?;
    ensure!(
        (k5.kappa - 0.5).abs() <= 1e-12 && (k5.observed_agreement - 0.75).abs() <= 1e-12,
        "half case: {k5:?}"
    );
    for case in 0..1_000 {
        let n = r.random_range(1..=80);
        let (a, b) = (labels(&mut r, n), labels(&mut r, n));
        let ab = cohen_kappa(&a, &b).map_err(err)?.kappa;
        let ba = cohen_kappa(&b, &a).map_err(err)?.kappa;
        ensure!(ab == ba, "case {case}: kappa(a,b) {ab} != kappa(b,a) {ba}");
        let want = oracle::kappa(&a, &b);
        ensure!((ab - want).abs() <= 1e-12, "case {case}: {ab} vs oracle {want}");
    }
    Ok("identity, hand cases 0.0 and 0.5, symmetry on 1000 pairs".into())
}

fn random_vote(r: &mut ChaCha8Rng) -> RawVote {
    let threshold = match r.random_range(0..4) {
        0 => None,
        _ => Some(f64::from(r.random_range(0..=10u8)) / 10.0),
    };
    let confidence = match (r.random_range(0..4), threshold) {
        (0, Some(t)) => t,
        _ => f64::from(r.random_range(0..=20u8)) / 20.0,
    };
    RawVote {
        sign: r.random_range(-1..=1),
        confidence,
        threshold,
    }
}

fn verdict(sign: i8) -> Verdict {
    match sign {
        1 => Verdict::Positive,
        -1 => Verdict::Negative,
        _ => Verdict::Abstain,
    }
}

pub fn weak_supervision() -> SuiteResult {
    let mut r = rng(13);
    for case in 0..10_000 {
        let raw: Vec<RawVote> = (0..r.random_range(0..=8)).map(|_| random_vote(&mut r)).collect();
        let mut policy = ThresholdPolicy::new();
        let mut votes = Vec::new();
        // Ids are issued in reverse so the output must re-sort them.
        for (i, v) in raw.iter().enumerate().rev() {
            let id = format!("lf{i}");
            policy = policy.with(id.clone(), v.threshold);
            votes.push(LabelVote::new(id, verdict(v.sign), v.confidence));
        }
        let want = oracle::gated_majority(&raw);
        match (aggregate("s", &votes, &policy), want) {
            (Aggregate::Excluded, None) => {}
            (Aggregate::Labeled(rec), Some(label)) => {
                ensure!(rec.label == label, "case {case}: label {} vs oracle {label}", rec.label);
                let ids: Vec<&str> = rec.contributing_votes.iter().map(|v| v.lf_id.as_str()).collect();
                let mut sorted = ids.clone();
                sorted.sort();
                ensure!(ids == sorted, "case {case}: contributing votes not ordered by id");
            }
            (got, want) => return Err(format!("case {case}: {got:?} vs oracle {want:?} for {raw:?}")),
        }
    }

    let thresholds: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    for corpus_seed in 0..100u64 {
        let (corpus, _) = synthetic_corpus(r.random_range(2..=5), r.random_range(2..=6), 0.4, corpus_seed).map_err(err)?;
        let lfs: Vec<ScriptedLf> = (0..3)
            .map(|i| {
                let script: BTreeMap<String, Vote> = corpus
                    .sentences()
                    .iter()
                    .map(|s| {
                        let v = random_vote(&mut r);
                        let vote = if v.sign == 0 { Vote::abstain() } else { Vote::label(u8::from(v.sign > 0), v.confidence) };
                        (s.sentence_id.clone(), vote)
                    })
                    .collect();
                ScriptedLf::new(format!("lf{i}"), script, Vote::abstain())
            })
            .collect();
        let refs: Vec<&dyn LabelingFunction> = lfs.iter().map(|l| l as &dyn LabelingFunction).collect();
        let mut previous: Option<BTreeMap<String, f64>> = None;
        for &t in &thresholds {
            let policy = (0..3).fold(ThresholdPolicy::new(), |p, i| p.with(format!("lf{i}"), Some(t)));
            let (_, report) = build_weak_dataset(&corpus, &refs, &policy, &BTreeSet::new()).map_err(err)?;
            let coverage: BTreeMap<String, f64> = report.per_lf.iter().map(|(k, v)| (k.clone(), v.coverage)).collect();
            if let Some(prev) = &previous {
                for (id, c) in &coverage {
                    ensure!(*c <= prev[id], "corpus {corpus_seed}: {id} coverage rose to {c} at threshold {t}");
                }
            }
            previous = Some(coverage);
        }
    }

    let (corpus, _) = synthetic_corpus(6, 4, 0.5, 7).map_err(err)?;
    let lf = ConstantLf::new("all", Vote::label(1, 1.0));
    let policy = ThresholdPolicy::new().with("all", None);
    let applicants: Vec<String> = corpus.applicants().into_iter().map(str::to_owned).collect();
    for mask in 0u32..(1 << applicants.len()) {
        let excluded: BTreeSet<String> =
            applicants.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| a.clone()).collect();
        let (data, report) = build_weak_dataset(&corpus, &[&lf], &policy, &excluded).map_err(err)?;
        let kept: BTreeSet<&str> = data.rows.iter().map(|r| r.sentence_id.as_str()).collect();
        let mut skipped = 0;
        for s in corpus.sentences() {
            let applicant = corpus.applicant_of_sentence(&s.sentence_id).ok_or("sentence without applicant")?;
            let is_excluded = excluded.contains(applicant);
            skipped += u64::from(is_excluded);
            ensure!(
                kept.contains(s.sentence_id.as_str()) != is_excluded,
                "mask {mask:06b}: {} membership wrong",
                s.sentence_id
            );
        }
        ensure!(report.skipped_excluded_applicants == skipped, "mask {mask:06b}: skipped count");
    }
    Ok("10000 vote sets match oracle; coverage monotone on 100 corpora; 64 exclusion sets exact".into())
}

const DICTIONARY: &[&str] = &[
    "the", "team", "work", "teamwork", "lead", "leader", "ship", "leadership", "great", "skill", "skilled", "in",
    "novel", "innovation", "idea", "ideas", "at", "tea", "mwork", "communicator", "excellent", "collaborator", "an",
    "on", "go", "good", "is", "her", "here", "she", "he", "led", "all", "tall", "ball", "sea", "season", "son",
];

pub fn preprocessing() -> SuiteResult {
    let mut r = rng(14);
    for case in 0..1_000 {
        let n = r.random_range(1..=80);
        let hi = r.random_range(1..=200u32);
        let lengths: Vec<u32> = (0..n).map(|_| r.random_range(1..=hi)).collect();
        let records: Vec<SentenceRecord> = lengths
            .iter()
            .enumerate()
            .map(|(i, &len)| {
                let text = "x".repeat(len as usize);
                SentenceRecord::new(format!("s{i}"), "l", &text, Span::new(0, len as usize))
            })
            .collect();
        let (kept, bounds) = iqr_filter(&records).map_err(err)?;
        let mut sorted = lengths.clone();
        sorted.sort_unstable();
        let (q1, q3) = (oracle::quartile(&sorted, 1), oracle::quartile(&sorted, 3));
        ensure!(bounds.q1 == q1 && bounds.q3 == q3, "case {case}: bounds {bounds:?} vs ({q1}, {q3})");
        let want: Vec<&str> = records
            .iter()
            .filter(|s| q1 <= s.char_length as f64 && s.char_length as f64 <= q3)
            .map(|s| s.sentence_id.as_str())
            .collect();
        let got: Vec<&str> = kept.iter().map(|s| s.sentence_id.as_str()).collect();
        ensure!(got == want, "case {case}: kept {got:?} vs {want:?}");
    }

    let config = SplitterConfig::from_ranked_words(DICTIONARY, 6).map_err(err)?;
    let cost = |w: &str| config.word_cost(w);
    let mut split = 0;
    for case in 0..500 {
        let token: String = if case % 5 == 4 {
            (0..r.random_range(7..=12)).map(|_| ['q', 'x', 'z', 'e', 'a'][r.random_range(0..5)]).collect()
        } else {
            let mut t: String = (0..r.random_range(1..=4)).map(|_| DICTIONARY[r.random_range(0..DICTIONARY.len())]).collect();
            if r.random_bool(0.3) {
                t = t[..1].to_uppercase() + &t[1..];
            }
            t
        };
        let pieces = split_conjoined(&token, &config);
        let chars: Vec<char> = token.to_lowercase().chars().collect();
        let best = if chars.len() <= config.min_token_length || config.contains(&token) {
            None
        } else {
            oracle::min_segmentation_cost(&chars, &cost)
        };
        match best {
            None => ensure!(pieces == [token.clone()], "token {token}: expected unchanged, got {pieces:?}"),
            Some(best) => {
                ensure!(pieces.concat() == token, "token {token}: pieces {pieces:?} do not rebuild it");
                let total: f64 = pieces.iter().map(|p| cost(p).unwrap_or(f64::INFINITY)).sum();
                ensure!((total - best).abs() <= 1e-9, "token {token}: cost {total} vs oracle {best} ({pieces:?})");
                split += 1;
            }
        }
    }
    let bundled = split_conjoined("excellentcommunicator", &SplitterConfig::bundled());
    ensure!(bundled == ["excellent", "communicator"], "bundled list split {bundled:?}");

    const POOL: &[char] = &[
        'a', 'B', 'z', '0', '9', ' ', ' ', '\t', '\n', '.', ',', '-', '\'', '"', '!', '(', 'é', 'ß', 'İ', 'Ω', '中',
        '٣', '\u{301}', '\u{a0}', '😀', '_', '/',
    ];
    let configs: Vec<CleaningConfig> = (0..8)
        .map(|bits| CleaningConfig {
            keep_whitespace: bits & 1 != 0,
            collapse_whitespace_runs: bits & 2 != 0,
            preserve_case: bits & 4 != 0,
        })
        .collect();
    for case in 0..10_000 {
        let s: String = (0..r.random_range(0..40)).map(|_| POOL[r.random_range(0..POOL.len())]).collect();
        for c in &configs {
            let once = clean_text(&s, c);
            let twice = clean_text(&once, c);
            ensure!(once == twice, "case {case} {c:?}: {s:?} -> {once:?} -> {twice:?}");
        }
    }
    Ok(format!("1000 IQR samples exact; {split} of 500 tokens split at oracle cost; 10000 strings idempotent"))
}

pub fn classifier() -> SuiteResult {
    let train = separable_rows(1_000, 21);
    let test = separable_rows(200, 22);
    let config = TrainConfig::default();
    let model = train_classifier(&train, &config).map_err(err)?;
    let texts: Vec<&str> = test.iter().map(|r| r.text.as_str()).collect();
    let truth: Vec<u8> = test.iter().map(|r| r.label).collect();
    let pred: Vec<u8> = model.predict_batch(&texts).into_iter().map(|s| s.label).collect();
    let f1 = weighted_metrics_from_labels(&truth, &pred).map_err(err)?.weighted.f1;
    ensure!(f1 >= 0.95, "weighted F1 {f1:.4} below 0.95");

    let sizes = [50, 200, 800];
    let curve = learning_curve(&train, &sizes, &test, &config).map_err(err)?;
    ensure!(curve.len() == sizes.len(), "curve has {} rows", curve.len());
    for (point, size) in curve.iter().zip(sizes) {
        let values = [point.weighted_f1, point.weighted_precision, point.weighted_recall, point.accuracy];
        ensure!(point.size == size, "curve row size {} for {size}", point.size);
        ensure!(values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)), "bad curve row {point:?}");
    }
    let table: Vec<String> = curve.iter().map(|p| format!("{}:{:.3}", p.size, p.weighted_f1)).collect();
    Ok(format!("weighted F1 {f1:.4}; curve {}", table.join(" ")))
}

fn sentence(text: &str) -> SentenceRecord {
    SentenceRecord::new("l-s000", "l", text, Span::new(0, text.chars().count()))
}

fn verification_phrases(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix("Phrases:"))
        .map(parse_phrase_list)
        .unwrap_or_default()
}

/// Every verification prompt against every sentence, phrases masked.
fn audit(prompts: &[String], sentences: &[String]) -> Result<usize, String> {
    for p in prompts {
        let phrases = verification_phrases(p);
        for s in sentences {
            if let Some(leak) = isolation_leak(p, s, &phrases) {
                return Err(format!("verification prompt leaks `{leak}` from `{s}`"));
            }
        }
    }
    Ok(prompts.len())
}

pub fn react() -> SuiteResult {
    let prompts = PromptSet::bundled();
    let text = "He is an excellent communicator and a skilled collaborator when working on teams.";
    let agent = ScriptedClient::replies(
        "scripted-agent",
        [
            "I should first extract phrases which contain skills related to teamwork.",
            "extract",
            "excellent communicator; skilled collaborator",
            "I should verify whether each extracted phrase is a teamwork phrase.",
            "verify_teamwork",
            "I now know the final answer.",
            "finish",
        ],
    );
    let verifier = ScriptedSessionFactory::new(
        "scripted-verifier",
        [vec![ScriptStep::Reply(
            "excellent communicator is a teamwork phrase; skilled collaborator is a teamwork phrase".into(),
        )]],
    );
    let tools = ToolRegistry::with_verifiers(Arc::new(verifier), Arc::new(prompts.clone()));
    let result = run_react(&sentence(text), MicroLabel::Teamwork, &agent, &tools, &prompts, 8).map_err(err)?;
    ensure!(result.status == RunStatus::Completed && result.verified, "status {:?}", result.status);
    ensure!(result.phrases == ["excellent communicator", "skilled collaborator"], "phrases {:?}", result.phrases);
    ensure!(trace_is_well_formed(&result.trace), "malformed trace");
    let kinds: Vec<StepKind> = result.trace.iter().map(|s| s.kind).collect();
    let count = |k| kinds.iter().filter(|x| **x == k).count();
    ensure!(
        (count(StepKind::Thought), count(StepKind::Action), count(StepKind::Observation), count(StepKind::Final)) == (3, 2, 2, 1),
        "trace shape {kinds:?}"
    );
    let last = result.trace.last().ok_or("empty trace")?;
    ensure!(last.content == "excellent communicator; skilled collaborator", "final answer `{}`", last.content);
    let mut verification_prompts = tools.verification_prompts();
    let mut sentences = vec![text.to_owned()];

    let planted = "Jordan led the team through the audit and enjoys weekend hiking trips.";
    let agent = ScriptedClient::replies(
        "scripted-agent",
        [
            "I should first extract phrases which contain skills related to teamwork.",
            "extract",
            "led the team; enjoys weekend hiking",
            "I should verify the extracted phrases.",
            "verify_teamwork",
            "I now know the final answer.",
            "finish",
        ],
    );
    let doubles = DoubleSessionFactory::new(PhraseLibrary::bundled()).permissive_verifier().rejecting("enjoys weekend hiking");
    let tools = ToolRegistry::with_verifiers(Arc::new(doubles), Arc::new(prompts.clone()));
    let result = run_react(&sentence(planted), MicroLabel::Teamwork, &agent, &tools, &prompts, 8).map_err(err)?;
    ensure!(result.phrases == ["led the team"], "rejection double left {:?}", result.phrases);
    verification_prompts.extend(tools.verification_prompts());
    sentences.push(planted.to_owned());

    let doubles = Arc::new(DoubleSessionFactory::new(PhraseLibrary::bundled()));
    let doc = ingest_document(FIXTURE, GOLDEN_APPLICANT, &FixtureExtractor, &BoundarySpec::PageBreaks).map_err(err)?;
    let generative = Generative::new(doubles.clone(), prompts.clone());
    build_report(&doc, &LexiconClassifier::new(PhraseLibrary::bundled()), &generative).map_err(err)?;
    verification_prompts.extend(doubles.log().by_role(SessionRole::Verification));
    sentences.extend(doc.sentences.iter().map(|s| s.text.clone()));
    let audited = audit(&verification_prompts, &sentences)?;
    Ok(format!("replay and rejection exact; {audited} verification prompts free of 15-char sentence text"))
}

pub fn golden() -> SuiteResult {
    let run = || -> Result<String, String> {
        let doc = ingest_document(FIXTURE, GOLDEN_APPLICANT, &FixtureExtractor, &BoundarySpec::PageBreaks).map_err(err)?;
        let generative = Generative::new(
            Arc::new(DoubleSessionFactory::new(PhraseLibrary::bundled())),
            PromptSet::bundled(),
        );
        let built = build_report(&doc, &LexiconClassifier::new(PhraseLibrary::bundled()), &generative).map_err(err)?;
        Ok(built.report.to_json())
    };
    let json = run()?;
    ensure!(json == GOLDEN, "report differs from the frozen golden file");
    ensure!(run()? == json, "second run differs");
    let report: serde_json::Value = serde_json::from_str(&json).map_err(err)?;
    let letters = report["letters"].as_array().ok_or("no letters")?;
    for l in letters {
        let p = l["proportion"].as_str().ok_or("proportion is not a string")?;
        ensure!(p.len() == 6 && p.as_bytes()[1] == b'.', "proportion `{p}` is not four decimals");
    }
    let words = report["summary"].as_str().ok_or("no summary")?.split_whitespace().count();
    ensure!((80..=120).contains(&words), "summary has {words} words");
    Ok(format!("{} letters byte-identical; summary {words} words", letters.len()))
}

struct Api {
    app: Router,
    state: AppState,
}

impl Api {
    fn open(store: &Path) -> Result<Self, String> {
        let state = AppState::new(&ServiceConfig {
            store: store.into(),
            engine: EngineConfig::default(),
            workers: 2,
        })
        .map_err(err)?;
        Ok(Self {
            app: router(state.clone()),
            state,
        })
    }

    async fn call(&self, method: Method, uri: &str, body: &[u8]) -> Result<(StatusCode, Vec<u8>), String> {
        use tower::ServiceExt;
        let req = Request::builder().method(method).uri(uri).body(Body::from(body.to_vec())).map_err(err)?;
        let resp = self.app.clone().oneshot(req).await.map_err(err)?;
        let status = resp.status();
        let bytes = resp.into_body().collect().await.map_err(err)?.to_bytes().to_vec();
        Ok((status, bytes))
    }

    async fn get(&self, uri: &str) -> Result<(StatusCode, Vec<u8>), String> {
        self.call(Method::GET, uri, b"").await
    }

    async fn upload(&self, applicant: &str, query: &str, body: &[u8]) -> Result<(StatusCode, serde_json::Value), String> {
        let (status, bytes) = self.call(Method::POST, &format!("/applicants/{applicant}/letters{query}"), body).await?;
        Ok((status, serde_json::from_slice(&bytes).map_err(err)?))
    }

    async fn wait(&self, job_id: &str) -> Result<JobRecord, String> {
        for _ in 0..2_000 {
            let (_, body) = self.get(&format!("/jobs/{job_id}")).await?;
            let job: JobRecord = serde_json::from_slice(&body).map_err(err)?;
            if matches!(job.state, JobState::Done | JobState::Failed) {
                return Ok(job);
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        Err(format!("job {job_id} did not finish"))
    }
}

fn job_id(v: &serde_json::Value) -> Result<String, String> {
    v["job_id"].as_str().map(str::to_owned).ok_or_else(|| format!("no job id in {v}"))
}

async fn service_flow(dir: &Path) -> SuiteResult {
    let mut uris = vec!["/health".to_owned(), "/applicants".to_owned()];
    let before = {
        let api = Api::open(dir)?;
        let (status, v) = api.upload(GOLDEN_APPLICANT, "", FIXTURE).await?;
        ensure!(status == StatusCode::ACCEPTED, "upload gave {status}: {v}");
        let job = api.wait(&job_id(&v)?).await?;
        ensure!(job.state == JobState::Done, "job ended {job:?}");
        let (status, body) = api.get(&format!("/applicants/{GOLDEN_APPLICANT}/report")).await?;
        ensure!(status == StatusCode::OK && body == GOLDEN.as_bytes(), "report GET is not the golden report");
        uris.push(format!("/jobs/{}", job.job_id));
        uris.push(format!("/applicants/{GOLDEN_APPLICANT}/report"));
        let report: serde_json::Value = serde_json::from_slice(&body).map_err(err)?;
        for l in report["letters"].as_array().ok_or("no letters")? {
            uris.push(format!("/letters/{}", l["letter_id"].as_str().ok_or("no letter id")?));
        }

        let jobs = std::fs::read_dir(dir.join("jobs")).map_err(err)?.count();
        let (status, v) = api.upload(GOLDEN_APPLICANT, "", FIXTURE).await?;
        ensure!(status == StatusCode::OK && job_id(&v)? == job.job_id, "re-upload gave {status}: {v}");
        ensure!(std::fs::read_dir(dir.join("jobs")).map_err(err)?.count() == jobs, "re-upload created a job");

        for (query, body) in [("", &b""[..]), ("?boundary=columns", FIXTURE)] {
            let (status, v) = api.upload("a2", query, body).await?;
            ensure!(status == StatusCode::BAD_REQUEST, "bad upload `{query}` gave {status}: {v}");
        }
        for uri in ["/applicants/nobody/report", "/letters/0000000000000000-l0", "/jobs/job-missing"] {
            let (status, _) = api.get(uri).await?;
            ensure!(status == StatusCode::NOT_FOUND, "GET {uri} gave {status}");
        }

        let pause = api.state.pause_workers().await;
        let (status, queued) = api.upload("b2", "", FIXTURE).await?;
        ensure!(status == StatusCode::ACCEPTED, "upload while paused gave {status}");
        let (status, v) = api.upload("b2", "", b"Another letter entirely.").await?;
        ensure!(status == StatusCode::CONFLICT, "busy applicant gave {status}: {v}");
        drop(pause);
        let job = api.wait(&job_id(&queued)?).await?;
        ensure!(job.state == JobState::Done, "queued job ended {job:?}");
        uris.push(format!("/jobs/{}", job.job_id));
        uris.push("/applicants/b2/report".into());

        let mut out = Vec::new();
        for u in &uris {
            out.push(api.get(u).await?);
        }
        out
    };
    let api = Api::open(dir)?;
    for (u, expected) in uris.iter().zip(before) {
        ensure!(api.get(u).await? == expected, "GET {u} changed across restart");
    }
    Ok(format!("round trip, idempotency, 400/404/409 and {} URIs stable across restart", uris.len()))
}

pub fn service() -> SuiteResult {
    let dir = tempfile::tempdir().map_err(err)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(err)?;
    runtime.block_on(service_flow(dir.path()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_flags_copied_sentence_text() {
        let sentence = "Jordan led the team through a difficult audit.".to_owned();
        let leaky = "Micro-label: teamwork\nContext: through a difficult audit\nPhrases: led the team".to_owned();
        assert!(audit(&[leaky], std::slice::from_ref(&sentence)).is_err());
        let clean = "Micro-label: teamwork\nPhrases: led the team through a difficult".to_owned();
        assert_eq!(audit(&[clean], &[sentence]), Ok(1));
    }
}
